use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::params::{Bindings, Params};
use crate::tensor::{Real, Shape, Tape, Tensor, Var};

/// Coefficients of a safe rational function
/// `sum_k a_k x^k / (1 + sum_l |b_l x^l|)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalFit {
    /// `a_0 ..= a_M`.
    pub num: Vec<f64>,
    /// `b_1 ..= b_N`.
    pub den: Vec<f64>,
    /// Largest absolute error against the target on the fitting grid.
    pub max_error: f64,
}

impl RationalFit {
    pub fn eval(&self, x: f64) -> f64 {
        let (p, q) = crate::tensor::rational_parts(x, &self.num, &self.den);
        p / q
    }
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// Least-squares fit of the safe rational form of degree `[M/N]` to exact
/// GELU on a 601-point grid over `[-3, 3]`.
///
/// A linearized fit seeds a Levenberg-Marquardt refinement of the true
/// (absolute-value) objective. Fitting happens in `t = x / 3` and is mapped
/// back afterwards to keep the normal equations well conditioned.
pub fn fit_gelu(num_degree: usize, den_degree: usize) -> RationalFit {
    const SPAN: f64 = 3.0;
    let ts: Vec<f64> = (0..=600).map(|i| -1.0 + i as f64 / 300.0).collect();
    let ys: Vec<f64> = ts.iter().map(|&t| gelu(t * SPAN)).collect();
    let (m, n) = (num_degree, den_degree);
    let dim = m + 1 + n;

    // Linearized start: P(t) - y * sum b_l t^l ~= y.
    let mut a = DMatrix::<f64>::zeros(ts.len(), dim);
    for (i, (&t, &y)) in ts.iter().zip(&ys).enumerate() {
        for k in 0..=m {
            a[(i, k)] = t.powi(k as i32);
        }
        for l in 1..=n {
            a[(i, m + l)] = -y * t.powi(l as i32);
        }
    }
    let rhs = DVector::from_column_slice(&ys);
    let mut theta = a
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(dim));

    let residuals = |theta: &DVector<f64>| -> DVector<f64> {
        DVector::from_iterator(
            ts.len(),
            ts.iter().zip(&ys).map(|(&t, &y)| {
                let (p, q) = crate::tensor::rational_parts(t, &theta.as_slice()[..=m], &theta.as_slice()[m + 1..]);
                p / q - y
            }),
        )
    };
    let mut r = residuals(&theta);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..300 {
        let mut jac = DMatrix::<f64>::zeros(ts.len(), dim);
        for (i, &t) in ts.iter().enumerate() {
            let coeffs = theta.as_slice();
            let (p, q) = crate::tensor::rational_parts(t, &coeffs[..=m], &coeffs[m + 1..]);
            for k in 0..=m {
                jac[(i, k)] = t.powi(k as i32) / q;
            }
            for l in 1..=n {
                let tl = t.powi(l as i32);
                let sign = if coeffs[m + l] * tl >= 0.0 { 1.0 } else { -1.0 };
                jac[(i, m + l)] = -p / (q * q) * sign * tl;
            }
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..20 {
            let mut damped = jtj.clone();
            for d in 0..dim {
                damped[(d, d)] += lambda * (jtj[(d, d)] + 1e-12);
            }
            let Some(step) = damped.lu().solve(&(-&jtr)) else {
                lambda *= 4.0;
                continue;
            };
            let candidate = &theta + step;
            let cr = residuals(&candidate);
            let c = cr.norm_squared();
            if c < cost {
                theta = candidate;
                r = cr;
                cost = c;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }

    let num: Vec<f64> = (0..=m).map(|k| theta[k] / SPAN.powi(k as i32)).collect();
    let den: Vec<f64> = (1..=n).map(|l| theta[m + l] / SPAN.powi(l as i32)).collect();
    let mut fit = RationalFit {
        num,
        den,
        max_error: 0.0,
    };
    fit.max_error = ts
        .iter()
        .map(|&t| (fit.eval(t * SPAN) - gelu(t * SPAN)).abs())
        .fold(0.0, f64::max);
    fit
}

/// Padé activation unit: one learnable safe rational function shared by
/// every element of a layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Pau {
    name: String,
    num_degree: usize,
    den_degree: usize,
}

impl Pau {
    pub fn new(name: impl Into<String>, num_degree: usize, den_degree: usize) -> Self {
        Pau {
            name: name.into(),
            num_degree,
            den_degree,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_name(&self) -> String {
        format!("{}.num", self.name)
    }

    pub fn den_name(&self) -> String {
        format!("{}.den", self.name)
    }

    pub fn param_count(&self) -> usize {
        self.num_degree + 1 + self.den_degree
    }

    /// Initializes the coefficients from a GELU fit.
    pub fn init<T: Real>(&self, params: &mut Params<T>, fit: &RationalFit) -> Result<()> {
        if fit.num.len() != self.num_degree + 1 || fit.den.len() != self.den_degree {
            return Err(Error::Config(format!(
                "fit of degree [{}/{}] does not match PAU [{}/{}]",
                fit.num.len().saturating_sub(1),
                fit.den.len(),
                self.num_degree,
                self.den_degree
            )));
        }
        self.set(params, &fit.num, &fit.den);
        Ok(())
    }

    /// Sets the coefficients explicitly.
    pub fn set<T: Real>(&self, params: &mut Params<T>, num: &[f64], den: &[f64]) {
        let to_tensor = |v: &[f64]| {
            Tensor::from_vec(
                Shape::new(1, 1, 1, v.len()),
                v.iter().map(|&c| T::lit(c)).collect(),
            )
            .expect("coefficient shape")
        };
        params.insert(self.num_name(), to_tensor(num));
        params.insert(self.den_name(), to_tensor(den));
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, vars: &Bindings, x: Var) -> Result<Var> {
        let num = vars.get(&self.num_name())?;
        let den = vars.get(&self.den_name())?;
        Ok(tape.with_scope(&self.name, |t| t.rational(x, num, den)))
    }
}
