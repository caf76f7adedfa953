use std::sync::Arc;

use super::kernels::{self, Padding};
use super::{Real, Shape, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        padding: Padding,
    },
    Pow(Var, u32),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Abs(Var),
    Scale(Var, T),
    AddScalar(Var),
    Gelu(Var),
    Tanh(Var),
    GlobalAvgPool(Var),
    PixelShuffle(Var, usize),
    Translate { input: Var, shifts: Var },
    Rational { input: Var, num: Var, den: Var },
    Sum(Var),
    Mean(Var),
    Robust {
        pred: Var,
        target: Var,
        alpha: T,
        scale: T,
    },
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
    grad: Option<Tensor<T>>,
    scope: Option<Arc<str>>,
}

/// Records executed operations so that [`Tape::backward`] can replay their
/// adjoints in reverse order.
///
/// Leaves created with [`Tape::param`] accumulate gradients across
/// repeated `backward` calls until [`Tape::zero_grad`].
#[derive(Clone, Debug)]
pub struct Tape<T: Real = f32> {
    nodes: Vec<Node<T>>,
    scope: Option<Arc<str>>,
    check_finite: bool,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// `d|x|/dx`, taking +1 at the origin so that zero-initialized terms
/// under an absolute value still receive a gradient.
fn abs_slope<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one()
    } else {
        -T::one()
    }
}

fn gelu<T: Real>(x: T) -> T {
    T::lit(0.5) * x * (T::one() + (x * T::FRAC_1_SQRT_2()).erf())
}

fn gelu_slope<T: Real>(x: T) -> T {
    let cdf = T::lit(0.5) * (T::one() + (x * T::FRAC_1_SQRT_2()).erf());
    let pdf = (-(x * x) * T::lit(0.5)).exp() * T::FRAC_1_SQRT_2() * T::FRAC_2_SQRT_PI() * T::lit(0.5);
    cdf + x * pdf
}

/// Barron's general robust penalty for `alpha` outside {0, 2}, plus both limits.
pub(crate) fn robust_rho<T: Real>(e: T, alpha: T, scale: T) -> T {
    let z = (e / scale) * (e / scale);
    let two = T::lit(2.0);
    if alpha == two {
        T::lit(0.5) * z
    } else if alpha == T::zero() {
        (T::lit(0.5) * z).ln_1p()
    } else {
        let a2 = (alpha - two).abs();
        (a2 / alpha) * ((z / a2 + T::one()).powf(alpha / two) - T::one())
    }
}

pub(crate) fn robust_slope<T: Real>(e: T, alpha: T, scale: T) -> T {
    let c2 = scale * scale;
    let z = e * e / c2;
    let two = T::lit(2.0);
    if alpha == two {
        e / c2
    } else if alpha == T::zero() {
        two * e / (e * e + two * c2)
    } else {
        let a2 = (alpha - two).abs();
        (e / c2) * (z / a2 + T::one()).powf(alpha / two - T::one())
    }
}

struct Broadcast {
    out: Shape,
    a: [usize; 4],
    b: [usize; 4],
}

impl Broadcast {
    fn new(op: &'static str, a: Shape, b: Shape) -> Result<Self> {
        let out = a
            .broadcast(&b)
            .ok_or_else(|| Error::shape(op, format!("cannot broadcast {a} with {b}")))?;
        let stride = |s: Shape| {
            let st = s.strides();
            let mut r = [0; 4];
            for i in 0..4 {
                r[i] = if s.0[i] == 1 { 0 } else { st[i] };
            }
            r
        };
        Ok(Broadcast {
            out,
            a: stride(a),
            b: stride(b),
        })
    }

    /// Calls `f(out_index, a_index, b_index)` for every output element.
    fn for_each(&self, mut f: impl FnMut(usize, usize, usize)) {
        let [n, c, h, w] = self.out.0;
        let mut o = 0;
        for i in 0..n {
            for j in 0..c {
                for y in 0..h {
                    let ia = i * self.a[0] + j * self.a[1] + y * self.a[2];
                    let ib = i * self.b[0] + j * self.b[1] + y * self.b[2];
                    for x in 0..w {
                        f(o, ia + x * self.a[3], ib + x * self.b[3]);
                        o += 1;
                    }
                }
            }
        }
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            scope: None,
            check_finite: cfg!(debug_assertions),
        }
    }

    /// Enables or disables the debug assertion that finite inputs produce
    /// finite outputs. The training loop turns it off and reports
    /// non-finite values through [`Tape::first_non_finite`] instead.
    pub fn set_check_finite(&mut self, on: bool) {
        self.check_finite = on;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Labels every node recorded inside `f` with `name`.
    pub fn with_scope<R>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> R) -> R {
        let saved = self.scope.replace(Arc::from(name));
        let out = f(self);
        self.scope = saved;
        out
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
            grad: None,
            scope: self.scope.clone(),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a trainable leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    /// First recorded operation producing a non-finite value, with its
    /// scope label. Leaves are skipped: a bad input is reported where it is
    /// first used.
    pub fn first_non_finite(&self) -> Option<(Var, Option<&str>)> {
        self.nodes
            .iter()
            .enumerate()
            .find(|(_, n)| !matches!(n.op, Op::Leaf) && !n.value.all_finite())
            .map(|(i, n)| (Var(i), n.scope.as_deref()))
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        if self.check_finite {
            let inputs_finite = inputs.iter().all(|v| self.nodes[v.0].value.all_finite());
            debug_assert!(
                !inputs_finite || value.all_finite(),
                "non-finite output from finite inputs in {:?} (scope {:?})",
                op_name(&op),
                self.scope
            );
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
            scope: self.scope.clone(),
        });
        Var(self.nodes.len() - 1)
    }

    fn unary(&mut self, x: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let value = self.value(x).map(f);
        self.push(value, op, &[x])
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        op: Op<T>,
        f: impl Fn(T, T) -> T,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let bc = Broadcast::new(name, ta.shape(), tb.shape())?;
        let value = if ta.shape() == tb.shape() {
            let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
            Tensor::from_vec(bc.out, data)?
        } else {
            let mut out = Tensor::zeros(bc.out);
            let (da, db) = (ta.data(), tb.data());
            let dst = out.data_mut();
            bc.for_each(|o, i, j| dst[o] = f(da[i], db[j]));
            out
        };
        Ok(self.push(value, op, &[a, b]))
    }

    /// Same-size 2D convolution (cross-correlation) with stride 1.
    ///
    /// `kernel` is `(Cout, Cin, kh, kw)` with odd `kh`, `kw`; `bias`, when
    /// present, holds `Cout` values in any shape.
    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Option<Var>, padding: Padding) -> Result<Var> {
        let xs = self.shape(input);
        let ks = self.shape(kernel);
        let [cout, cin, kh, kw] = ks.0;
        if cin != xs.c() {
            return Err(Error::shape(
                "conv2d",
                format!("input {xs} has {} channels, kernel {ks} expects {cin}", xs.c()),
            ));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::shape("conv2d", format!("kernel {ks} must have odd spatial size")));
        }
        if let Some(b) = bias {
            let bs = self.shape(b);
            if bs.numel() != cout {
                return Err(Error::shape(
                    "conv2d",
                    format!("bias {bs} does not hold {cout} output channels"),
                ));
            }
        }
        let value = kernels::conv2d(
            self.value(input),
            self.value(kernel),
            bias.map(|b| self.value(b)),
            padding,
        );
        let mut inputs = vec![input, kernel];
        inputs.extend(bias);
        Ok(self.push(
            value,
            Op::Conv2d {
                input,
                kernel,
                bias,
                padding,
            },
            &inputs,
        ))
    }

    /// Elementwise `x^k` for a positive integer `k`.
    pub fn pow(&mut self, x: Var, k: u32) -> Result<Var> {
        if k == 0 {
            return Err(Error::Usage("pow needs an exponent k >= 1".into()));
        }
        Ok(self.unary(x, Op::Pow(x, k), |v| v.powi(k as i32)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, Op::Mul(a, b), |x, y| x * y)
    }

    /// Elementwise quotient; any zero in the denominator is a numeric-domain error.
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        if let Some(pos) = self.value(b).data().iter().position(|v| *v == T::zero()) {
            return Err(Error::Numeric {
                layer: self.scope.as_deref().unwrap_or("<unscoped>").to_string(),
                detail: format!("division by zero at flat index {pos}"),
            });
        }
        self.binary("div", a, b, Op::Div(a, b), |x, y| x / y)
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(x, Op::Abs(x), |v| v.abs())
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        self.unary(x, Op::Scale(x, c), |v| v * c)
    }

    pub fn add_scalar(&mut self, x: Var, c: T) -> Var {
        self.unary(x, Op::AddScalar(x), |v| v + c)
    }

    /// Exact GELU, `x * Phi(x)`.
    pub fn gelu(&mut self, x: Var) -> Var {
        self.unary(x, Op::Gelu(x), gelu)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), |v| v.tanh())
    }

    /// Per-channel spatial mean, `(N, C, H, W) -> (N, C, 1, 1)`.
    pub fn global_avg_pool(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let [n, c, h, w] = t.shape().0;
        let denom = T::lit((h * w) as f64);
        let data = t
            .data()
            .chunks(h * w)
            .map(|p| p.iter().copied().sum::<T>() / denom)
            .collect();
        let value = Tensor::from_vec(Shape::new(n, c, 1, 1), data).expect("pool shape");
        self.push(value, Op::GlobalAvgPool(x), &[x])
    }

    /// Depth-to-space rearrangement by factor `r`.
    pub fn pixel_shuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let s = self.shape(x);
        if r == 0 || s.c() % (r * r) != 0 {
            return Err(Error::shape(
                "pixel_shuffle",
                format!("{} channels are not divisible by r^2 = {}", s.c(), r * r),
            ));
        }
        let value = kernels::pixel_shuffle(self.value(x), r);
        Ok(self.push(value, Op::PixelShuffle(x, r), &[x]))
    }

    /// Bilinear circular translation of each channel; `shifts` is
    /// `(N, 2C, 1, 1)` with `(dy, dx)` for channel `c` at `2c` and `2c + 1`.
    pub fn translate(&mut self, input: Var, shifts: Var) -> Result<Var> {
        let xs = self.shape(input);
        let ss = self.shape(shifts);
        if ss != Shape::new(xs.n(), 2 * xs.c(), 1, 1) {
            return Err(Error::shape(
                "translate",
                format!("shifts {ss} do not match input {xs} (need Nx2Cx1x1)"),
            ));
        }
        let value = kernels::translate(self.value(input), self.value(shifts));
        Ok(self.push(value, Op::Translate { input, shifts }, &[input, shifts]))
    }

    /// Pointwise safe rational function `sum a_k x^k / (1 + sum |b_l x^l|)`
    /// with `num = [a_0..a_M]` and `den = [b_1..b_N]` stored flat.
    pub fn rational(&mut self, input: Var, num: Var, den: Var) -> Var {
        let a = self.value(num).data().to_vec();
        let b = self.value(den).data().to_vec();
        let value = self.value(input).map(|x| {
            let (p, q) = rational_parts(x, &a, &b);
            p / q
        });
        self.push(value, Op::Rational { input, num, den }, &[input, num, den])
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        self.push(Tensor::scalar(s), Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let m = t.sum() / T::lit(t.len() as f64);
        self.push(Tensor::scalar(m), Op::Mean(x), &[x])
    }

    /// Mean of Barron's robust penalty over `pred - target`.
    pub fn robust_loss(&mut self, pred: Var, target: Var, alpha: T, scale: T) -> Result<Var> {
        let (p, t) = (self.value(pred), self.value(target));
        if p.shape() != t.shape() {
            return Err(Error::Usage(format!(
                "loss needs equal shapes, got {} and {}",
                p.shape(),
                t.shape()
            )));
        }
        if !(alpha >= T::zero()) || !(scale > T::zero()) {
            return Err(Error::Usage("robust loss needs alpha >= 0 and scale > 0".into()));
        }
        let total: T = p
            .data()
            .iter()
            .zip(t.data())
            .map(|(&a, &b)| robust_rho(a - b, alpha, scale))
            .sum();
        let value = Tensor::scalar(total / T::lit(p.len() as f64));
        Ok(self.push(
            value,
            Op::Robust {
                pred,
                target,
                alpha,
                scale,
            },
            &[pred, target],
        ))
    }

    /// Reverse-mode sweep from a scalar `loss`; adds `dloss/dleaf` into the
    /// gradient of every trainable leaf.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.shape(loss) != Shape::SCALAR {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got {}",
                self.shape(loss)
            )));
        }
        let mut adj: Vec<Option<Tensor<T>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Tensor::scalar(T::one()));
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = adj[i].take() else { continue };
            if let Op::Leaf = self.nodes[i].op {
                let node = &mut self.nodes[i];
                match &mut node.grad {
                    Some(acc) => {
                        for (a, &v) in acc.data_mut().iter_mut().zip(g.data()) {
                            *a += v;
                        }
                    }
                    None => node.grad = Some(g),
                }
                continue;
            }
            for (target, contribution) in self.adjoints(i, &g) {
                accumulate(&mut adj[target.0], contribution);
            }
        }
        Ok(())
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient contributions flowing from node `i` into its inputs.
    fn adjoints(&self, i: usize, g: &Tensor<T>) -> Vec<(Var, Tensor<T>)> {
        let node = &self.nodes[i];
        let out = &node.value;
        let mut res = Vec::new();
        match node.op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                kernel,
                bias,
                padding,
            } => {
                let (xv, kv) = (self.value(input), self.value(kernel));
                if self.needs(input) {
                    res.push((input, kernels::conv2d_grad_input(g, kv, xv.shape(), padding)));
                }
                if self.needs(kernel) {
                    res.push((kernel, kernels::conv2d_grad_kernel(g, xv, kv.shape(), padding)));
                }
                if let Some(b) = bias.filter(|&b| self.needs(b)) {
                    let sums = kernels::channel_sums(g);
                    res.push((b, sums.reshape(self.shape(b)).expect("bias shape")));
                }
            }
            Op::Pow(x, k) => {
                let xv = self.value(x);
                let kk = T::lit(k as f64);
                let data = xv
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&v, &gv)| gv * kk * v.powi(k as i32 - 1))
                    .collect();
                res.push((x, Tensor::from_vec(xv.shape(), data).expect("shape")));
            }
            Op::Add(a, b) => self.binary_adjoint(&mut res, a, b, g, |_, _| T::one(), |_, _| T::one()),
            Op::Sub(a, b) => {
                self.binary_adjoint(&mut res, a, b, g, |_, _| T::one(), |_, _| -T::one())
            }
            Op::Mul(a, b) => self.binary_adjoint(&mut res, a, b, g, |_, y| y, |x, _| x),
            Op::Div(a, b) => self.binary_adjoint(
                &mut res,
                a,
                b,
                g,
                |_, y| T::one() / y,
                |x, y| -x / (y * y),
            ),
            Op::Abs(x) => res.push((x, self.unary_adjoint(x, g, |v, _| abs_slope(v)))),
            Op::Scale(x, c) => res.push((x, g.map(|v| v * c))),
            Op::AddScalar(x) => res.push((x, g.clone())),
            Op::Gelu(x) => res.push((x, self.unary_adjoint(x, g, |v, _| gelu_slope(v)))),
            Op::Tanh(x) => {
                let data = out
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&y, &gv)| gv * (T::one() - y * y))
                    .collect();
                res.push((x, Tensor::from_vec(out.shape(), data).expect("shape")));
            }
            Op::GlobalAvgPool(x) => {
                let s = self.shape(x);
                let denom = T::lit(s.plane() as f64);
                let mut grad = Tensor::zeros(s);
                for (plane, gv) in grad.data_mut().chunks_mut(s.plane()).zip(g.data()) {
                    plane.fill(*gv / denom);
                }
                res.push((x, grad));
            }
            Op::PixelShuffle(x, r) => res.push((x, kernels::pixel_unshuffle(g, r))),
            Op::Translate { input, shifts } => {
                let (gi, gs) = kernels::translate_grads(g, self.value(input), self.value(shifts));
                if self.needs(input) {
                    res.push((input, gi));
                }
                if self.needs(shifts) {
                    res.push((shifts, gs));
                }
            }
            Op::Rational { input, num, den } => {
                self.rational_adjoint(&mut res, input, num, den, g);
            }
            Op::Sum(x) => {
                res.push((x, Tensor::full(self.shape(x), g.data()[0])));
            }
            Op::Mean(x) => {
                let s = self.shape(x);
                res.push((x, Tensor::full(s, g.data()[0] / T::lit(s.numel() as f64))));
            }
            Op::Robust {
                pred,
                target,
                alpha,
                scale,
            } => {
                let (p, t) = (self.value(pred), self.value(target));
                let k = g.data()[0] / T::lit(p.len() as f64);
                let data: Vec<T> = p
                    .data()
                    .iter()
                    .zip(t.data())
                    .map(|(&a, &b)| k * robust_slope(a - b, alpha, scale))
                    .collect();
                let dp = Tensor::from_vec(p.shape(), data).expect("shape");
                if self.needs(target) {
                    res.push((target, dp.map(|v| -v)));
                }
                if self.needs(pred) {
                    res.push((pred, dp));
                }
            }
        }
        res
    }

    fn unary_adjoint(&self, x: Var, g: &Tensor<T>, slope: impl Fn(T, T) -> T) -> Tensor<T> {
        let xv = self.value(x);
        let data = xv
            .data()
            .iter()
            .zip(g.data())
            .map(|(&v, &gv)| gv * slope(v, gv))
            .collect();
        Tensor::from_vec(xv.shape(), data).expect("shape")
    }

    fn binary_adjoint(
        &self,
        res: &mut Vec<(Var, Tensor<T>)>,
        a: Var,
        b: Var,
        g: &Tensor<T>,
        da: impl Fn(T, T) -> T,
        db: impl Fn(T, T) -> T,
    ) {
        let (ta, tb) = (self.value(a), self.value(b));
        let bc = Broadcast::new("adjoint", ta.shape(), tb.shape()).expect("checked in forward");
        let (xa, xb, gd) = (ta.data(), tb.data(), g.data());
        let mut ga = self.needs(a).then(|| Tensor::zeros(ta.shape()));
        let mut gb = self.needs(b).then(|| Tensor::zeros(tb.shape()));
        bc.for_each(|o, i, j| {
            if let Some(ga) = ga.as_mut() {
                ga.data_mut()[i] += gd[o] * da(xa[i], xb[j]);
            }
            if let Some(gb) = gb.as_mut() {
                gb.data_mut()[j] += gd[o] * db(xa[i], xb[j]);
            }
        });
        if let Some(ga) = ga {
            res.push((a, ga));
        }
        if let Some(gb) = gb {
            res.push((b, gb));
        }
    }

    fn rational_adjoint(
        &self,
        res: &mut Vec<(Var, Tensor<T>)>,
        input: Var,
        num: Var,
        den: Var,
        g: &Tensor<T>,
    ) {
        let xv = self.value(input);
        let a = self.value(num).data();
        let b = self.value(den).data();
        let mut gx = Tensor::zeros(xv.shape());
        let mut ga = vec![T::zero(); a.len()];
        let mut gb = vec![T::zero(); b.len()];
        for ((&x, &gv), gxi) in xv.data().iter().zip(g.data()).zip(gx.data_mut()) {
            let (p, q) = rational_parts(x, a, b);
            let inv_q = T::one() / q;
            // dP/dx and dQ/dx
            let mut dp = T::zero();
            let mut pw = T::one();
            for (k, &ak) in a.iter().enumerate().skip(1) {
                dp += T::lit(k as f64) * ak * pw;
                pw *= x;
            }
            let mut dq = T::zero();
            let mut pw_prev = T::one();
            for (l, &bl) in b.iter().enumerate() {
                let l1 = l + 1;
                let term = bl * pw_prev * x;
                dq += abs_slope(term) * bl * T::lit(l1 as f64) * pw_prev;
                pw_prev *= x;
            }
            *gxi = gv * (dp * q - p * dq) * inv_q * inv_q;
            let mut pw = T::one();
            for gak in ga.iter_mut() {
                *gak += gv * pw * inv_q;
                pw *= x;
            }
            let mut pw = x;
            for (gbl, &bl) in gb.iter_mut().zip(b) {
                *gbl += -gv * p * inv_q * inv_q * abs_slope(bl * pw) * pw;
                pw *= x;
            }
        }
        if self.needs(input) {
            res.push((input, gx));
        }
        if self.needs(num) {
            let s = self.shape(num);
            res.push((num, Tensor::from_vec(s, ga).expect("shape")));
        }
        if self.needs(den) {
            let s = self.shape(den);
            res.push((den, Tensor::from_vec(s, gb).expect("shape")));
        }
    }
}

/// Numerator and safe denominator of the pointwise rational function.
pub fn rational_parts<T: Real>(x: T, a: &[T], b: &[T]) -> (T, T) {
    let mut p = T::zero();
    let mut pw = T::one();
    for &ak in a {
        p += ak * pw;
        pw *= x;
    }
    let mut q = T::one();
    let mut pw = x;
    for &bl in b {
        q += (bl * pw).abs();
        pw *= x;
    }
    (p, q)
}

fn accumulate<T: Real>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) {
    match slot {
        Some(acc) => {
            for (a, &v) in acc.data_mut().iter_mut().zip(g.data()) {
                *a += v;
            }
        }
        None => *slot = Some(g),
    }
}

fn op_name<T>(op: &Op<T>) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::Conv2d { .. } => "conv2d",
        Op::Pow(..) => "pow",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::Mul(..) => "mul",
        Op::Div(..) => "div",
        Op::Abs(..) => "abs",
        Op::Scale(..) => "scale",
        Op::AddScalar(..) => "add_scalar",
        Op::Gelu(..) => "gelu",
        Op::Tanh(..) => "tanh",
        Op::GlobalAvgPool(..) => "global_avg_pool",
        Op::PixelShuffle(..) => "pixel_shuffle",
        Op::Translate { .. } => "translate",
        Op::Rational { .. } => "rational",
        Op::Sum(..) => "sum",
        Op::Mean(..) => "mean",
        Op::Robust { .. } => "robust_loss",
    }
}
