//! The tape: record a small computation, run backward, and compare one
//! gradient against central differences.
//!
//! cargo run --example autodiff

use paon::tensor::gradcheck::{check, random_tensor, weighted_sum};
use paon::tensor::{Padding, Shape, Tape, Tensor};
use rand::SeedableRng;

fn main() -> paon::Result<()> {
    // y = sum(tanh(conv(x, k)) * x)
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let x: Tensor<f64> = random_tensor(&mut rng, Shape::new(1, 2, 5, 5), -1.0, 1.0);
    let k: Tensor<f64> = random_tensor(&mut rng, Shape::new(2, 2, 3, 3), -0.5, 0.5);

    let mut tape = Tape::new();
    let xv = tape.param(x.clone());
    let kv = tape.param(k.clone());
    let c = tape.conv2d(xv, kv, None, Padding::Circular)?;
    let t = tape.tanh(c);
    let p = tape.mul(t, xv)?;
    let y = tape.sum(p);
    tape.backward(y)?;
    println!("y = {:.6}", tape.value(y).item()?);
    println!("|dy/dk| = {:.6}", tape.grad(kv).unwrap().norm());
    println!("tape holds {} nodes", tape.len());

    let probe = Tensor::full(Shape::SCALAR, 1.0);
    let reports = check(&[x, k], 1e-5, |t, v| {
        let c = t.conv2d(v[0], v[1], None, Padding::Circular)?;
        let th = t.tanh(c);
        let p = t.mul(th, v[0])?;
        let s = t.sum(p);
        weighted_sum(t, s, &probe)
    })?;
    for (name, r) in ["x", "k"].iter().zip(&reports) {
        println!("gradient of {name}: relative error vs finite differences {:.2e}", r.rel_error);
    }
    Ok(())
}
