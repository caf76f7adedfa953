//! A Padé neuron layer in each variant, its reductions, and a gradient check.
//!
//! cargo run --example paon_layer

use paon::layers::{Paon, PaonSpec, Variant};
use paon::params::Params;
use paon::tensor::gradcheck::{check, random_tensor, weighted_sum};
use paon::tensor::{Padding, Shape, Tape, Tensor};
use rand::SeedableRng;

fn main() -> paon::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let x: Tensor<f64> = random_tensor(&mut rng, Shape::new(1, 3, 8, 8), -1.0, 1.0);

    // [1/0] is an ordinary convolution with bias.
    let conv = Paon::new("conv", PaonSpec::conv(3, 4))?;
    let params: Params<f64> = conv.init_params(0).cast();
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape, false);
    let xv = tape.constant(x.clone());
    let y = conv.forward(&mut tape, &vars, xv)?;
    let w = tape.constant(params.get(&conv.num_kernel_name(1)).unwrap().clone());
    let b = tape.constant(params.get(&conv.bias_name()).unwrap().clone());
    let plain = tape.conv2d(xv, w, Some(b), Padding::Circular)?;
    println!("[1/0] vs conv2d: max diff {:.1e}", tape.value(y).max_abs_diff(tape.value(plain)).unwrap());

    for variant in [Variant::Vanilla, Variant::A, Variant::S] {
        let spec = PaonSpec::new(2, 1, 3, 4).with_variant(variant).with_shift(1);
        let layer = Paon::new("p", spec)?;
        let mut params: Params<f64> = layer.init_params(2).cast();
        for (_, t) in params.iter_mut() {
            *t = random_tensor(&mut rng, t.shape(), -0.1, 0.1);
        }
        let probe: Tensor<f64> = random_tensor(&mut rng, Shape::new(1, 4, 8, 8), -1.0, 1.0);
        let mut inputs = vec![x.clone()];
        inputs.extend(params.iter().map(|(_, t)| t.clone()));
        let reports = check(&inputs, 1e-5, |t, v| {
            let vars = params.rebind(&v[1..])?;
            let y = layer.forward(t, &vars, v[0])?;
            weighted_sum(t, y, &probe)
        })?;
        let worst = reports.iter().map(|r| r.rel_error).fold(0.0, f64::max);
        println!(
            "{variant:?} [2/1] with shifter: {} parameters, worst gradient error {worst:.1e}",
            layer.param_count()
        );
    }
    Ok(())
}
