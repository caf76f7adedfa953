//! The learnable shift module: zero-initialized it is the identity; with a
//! bias it translates each channel by a fractional offset.
//!
//! cargo run --example shifter

use paon::layers::Shifter;
use paon::params::Params;
use paon::tensor::{Shape, Tape, Tensor};

fn main() -> paon::Result<()> {
    let x = Tensor::<f32>::from_fn(Shape::new(1, 2, 6, 6), |_, c, y, x| if (x + c, y) == (2, 2) { 1.0 } else { 0.0 });
    for bound in [1, 2] {
        let sh = Shifter::new("s", 2, bound)?;
        let mut params = Params::new();
        sh.init(&mut params);
        let identity = run(&sh, &params, &x)?;
        println!("b={bound}: zero init leaves input unchanged: {}", identity == x);

        // Bias only: shifts are b * tanh(bias), independent of the input.
        *params.get_mut(&sh.bias_name()).unwrap() =
            Tensor::from_vec(Shape::new(1, 4, 1, 1), vec![0.5, -0.5, 3.0, 0.0])?;
        let s = sh.evaluate_shifts(&params, &x)?;
        println!("b={bound}: shifts (dy, dx) per channel {:?}", s.data());
        let y = run(&sh, &params, &x)?;
        println!("b={bound}: mass kept per channel {:?}", (0..2).map(|c| channel_sum(&y, c)).collect::<Vec<_>>());
    }
    Ok(())
}

fn run(sh: &Shifter, params: &Params<f32>, x: &Tensor<f32>) -> paon::Result<Tensor<f32>> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape, false);
    let xv = tape.constant(x.clone());
    let y = sh.forward(&mut tape, &vars, xv)?;
    Ok(tape.value(y).clone())
}

fn channel_sum(t: &Tensor<f32>, c: usize) -> f32 {
    let [_, _, h, w] = t.shape().0;
    (0..h).flat_map(|y| (0..w).map(move |x| (y, x))).map(|(y, x)| t.at(0, c, y, x)).sum()
}
