//! Drives a Padé neuron's denominator through zero and compares how the
//! three variants react.
//!
//! cargo run --example singularity

use paon::layers::{Paon, PaonSpec, Variant};
use paon::params::Params;
use paon::tensor::{Shape, Tape, Tensor};

fn main() -> paon::Result<()> {
    // 1x1 kernels on one channel: Q_1(x) = 1 + w x vanishes at x = -1/w.
    let xs: Vec<f64> = vec![-1.0, -0.5, 0.0, 0.5, 1.0];
    let x = Tensor::from_vec(Shape::new(1, 1, 1, xs.len()), xs.clone())?;
    for variant in [Variant::Vanilla, Variant::A, Variant::S] {
        let spec = PaonSpec::new(2, 1, 1, 1).with_variant(variant).with_kernel(1, 1);
        let layer = Paon::new("demo", spec)?;
        let mut params: Params<f64> = layer.init_params(0).cast();
        *params.get_mut(&layer.num_kernel_name(1)).unwrap() = Tensor::scalar(1.0);
        *params.get_mut(&layer.den_kernel_name(1)).unwrap() = Tensor::scalar(-2.0);
        let mut tape = Tape::new();
        let vars = params.bind(&mut tape, false);
        let xv = tape.constant(x.clone());
        match layer.forward(&mut tape, &vars, xv) {
            Ok(y) => println!("{variant:?}: {:?}", tape.value(y).data().iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()),
            Err(e) => println!("{variant:?}: {e}"),
        }
    }
    Ok(())
}
