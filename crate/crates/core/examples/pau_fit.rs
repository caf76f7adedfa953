//! Rational fits of GELU used to initialize Padé activation units.
//!
//! cargo run --release --example pau_fit

use paon::layers::fit_gelu;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn main() {
    for (m, n) in [(3, 2), (5, 4), (7, 6)] {
        let fit = fit_gelu(m, n);
        let worst = (0..=600)
            .map(|i| -3.0 + i as f64 * 0.01)
            .map(|x| (fit.eval(x) - gelu(x)).abs())
            .fold(0.0, f64::max);
        println!("[{m}/{n}] max |fit - gelu| on [-3, 3]: {worst:.2e}");
        if (m, n) == (7, 6) {
            println!("  numerator   {:?}", fit.num.iter().map(|c| format!("{c:.4}")).collect::<Vec<_>>());
            println!("  denominator {:?}", fit.den.iter().map(|c| format!("{c:.4}")).collect::<Vec<_>>());
        }
    }
}
