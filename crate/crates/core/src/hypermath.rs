//! Poincaré-ball geometry (curvature −1) and the small feed-forward networks
//! used by the reranker.
//!
//! Möbius addition on the unit ball:
//!
//! ```text
//! a ⊕ b = ((1 + 2⟨a,b⟩ + ‖b‖²)·a + (1 − ‖a‖²)·b) / (1 + 2⟨a,b⟩ + ‖a‖²‖b‖²)
//! ```
//!
//! The separation between two ball points is `2·atan(‖(−c) ⊕ q‖)` in the
//! default mode. `2·artanh(‖(−c) ⊕ q‖)` (the Poincaré distance) and the plain
//! Euclidean distance are available as alternatives.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embedder::{dot, l2_norm};
use crate::error::{Error, Result};

/// Distance kept between projected points and the ball boundary.
pub const BALL_EPS: f64 = 1e-5;
const MIN_DENOMINATOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryMode {
    #[default]
    PaperAtan,
    Artanh,
    Euclidean,
}

impl GeometryMode {
    pub fn is_hyperbolic(self) -> bool {
        !matches!(self, GeometryMode::Euclidean)
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            GeometryMode::PaperAtan => 0,
            GeometryMode::Artanh => 1,
            GeometryMode::Euclidean => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(GeometryMode::PaperAtan),
            1 => Some(GeometryMode::Artanh),
            2 => Some(GeometryMode::Euclidean),
            _ => None,
        }
    }
}

impl FromStr for GeometryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper_atan" | "paper-atan" | "atan" => Ok(GeometryMode::PaperAtan),
            "artanh" => Ok(GeometryMode::Artanh),
            "euclidean" => Ok(GeometryMode::Euclidean),
            other => Err(Error::invalid(format!("unknown geometry mode `{other}`"))),
        }
    }
}

impl fmt::Display for GeometryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeometryMode::PaperAtan => "paper_atan",
            GeometryMode::Artanh => "artanh",
            GeometryMode::Euclidean => "euclidean",
        })
    }
}

/// A point strictly inside the unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint(Vec<f64>);

impl BallPoint {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if l2_norm(&v) < 1.0 && v.iter().all(|x| x.is_finite()) {
            Ok(BallPoint(v))
        } else {
            Err(Error::invalid("point lies outside the open unit ball"))
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Rescale `v` onto the ball of radius `1 − eps` if it lies outside it.
pub fn project_to_ball(v: &[f64], eps: f64) -> BallPoint {
    let n = l2_norm(v);
    let r = 1.0 - eps;
    if n <= r {
        BallPoint(v.to_vec())
    } else {
        BallPoint(v.iter().map(|x| x * r / n).collect())
    }
}

/// Möbius addition `a ⊕ b`.
pub fn mobius_add(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    let ab = dot(a, b);
    let aa = dot(a, a);
    let bb = dot(b, b);
    let den = 1.0 + 2.0 * ab + aa * bb;
    if den.abs() < MIN_DENOMINATOR {
        return Err(Error::Numeric(format!("Möbius denominator {den:e} is degenerate")));
    }
    let ca = 1.0 + 2.0 * ab + bb;
    let cb = 1.0 - aa;
    Ok(a.iter().zip(b).map(|(x, y)| (ca * x + cb * y) / den).collect())
}

/// Vector-Jacobian product of Möbius addition: given `∂L/∂(a ⊕ b)`, return
/// `(∂L/∂a, ∂L/∂b)`.
pub fn mobius_add_vjp(a: &[f64], b: &[f64], grad_out: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let ab = dot(a, b);
    let aa = dot(a, a);
    let bb = dot(b, b);
    let den = 1.0 + 2.0 * ab + aa * bb;
    if den.abs() < MIN_DENOMINATOR {
        return Err(Error::Numeric(format!("Möbius denominator {den:e} is degenerate")));
    }
    let ca = 1.0 + 2.0 * ab + bb;
    let cb = 1.0 - aa;
    let out: Vec<f64> = a.iter().zip(b).map(|(x, y)| (ca * x + cb * y) / den).collect();

    let g_num: Vec<f64> = grad_out.iter().map(|g| g / den).collect();
    let g_den = -dot(grad_out, &out) / den;
    let g_ca = dot(&g_num, a);
    let g_cb = dot(&g_num, b);
    // ca = 1 + 2ab + bb, cb = 1 - aa, den = 1 + 2ab + aa*bb
    let g_ab = 2.0 * g_ca + 2.0 * g_den;
    let g_aa = -g_cb + g_den * bb;
    let g_bb = g_ca + g_den * aa;

    let ga = a
        .iter()
        .zip(b)
        .zip(&g_num)
        .map(|((x, y), gn)| ca * gn + g_ab * y + 2.0 * g_aa * x)
        .collect();
    let gb = a
        .iter()
        .zip(b)
        .zip(&g_num)
        .map(|((x, y), gn)| cb * gn + g_ab * x + 2.0 * g_bb * y)
        .collect();
    Ok((ga, gb))
}

/// Gyro-difference `(−c) ⊕ q`.
fn gyro_diff(q: &[f64], c: &[f64]) -> Result<Vec<f64>> {
    let neg_c: Vec<f64> = c.iter().map(|x| -x).collect();
    mobius_add(&neg_c, q)
}

fn outer(mode: GeometryMode, n: f64) -> Result<(f64, f64)> {
    match mode {
        GeometryMode::PaperAtan => Ok((2.0 * n.atan(), 2.0 / (1.0 + n * n))),
        GeometryMode::Artanh => {
            if n >= 1.0 {
                return Err(Error::Numeric(format!("artanh argument {n} is not below 1")));
            }
            Ok((2.0 * n.atanh(), 2.0 / (1.0 - n * n)))
        }
        GeometryMode::Euclidean => Ok((n, 1.0)),
    }
}

/// Separation between `q` and `c`. Hyperbolic modes expect ball points.
pub fn separation(q: &[f64], c: &[f64], mode: GeometryMode) -> Result<f64> {
    if q.len() != c.len() {
        return Err(Error::Dimension {
            expected: q.len(),
            got: c.len(),
        });
    }
    let n = match mode {
        GeometryMode::Euclidean => q.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        _ => l2_norm(&gyro_diff(q, c)?),
    };
    Ok(outer(mode, n)?.0)
}

/// Projection Jacobian applied to an upstream gradient.
fn project_vjp(v: &[f64], g: &[f64], eps: f64) -> Vec<f64> {
    let n = l2_norm(v);
    let r = 1.0 - eps;
    if n <= r {
        return g.to_vec();
    }
    let gv = dot(g, v) / (n * n);
    v.iter().zip(g).map(|(x, gi)| r / n * (gi - gv * x)).collect()
}

/// Separation between raw network outputs `u_q`, `u_c`: projected onto the
/// ball first in hyperbolic modes. Returns `s` and `(∂s/∂u_q, ∂s/∂u_c)`.
/// At coincident points the zero subgradient is used.
pub fn separation_with_grad(u_q: &[f64], u_c: &[f64], mode: GeometryMode) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if u_q.len() != u_c.len() {
        return Err(Error::Dimension {
            expected: u_q.len(),
            got: u_c.len(),
        });
    }
    let d = u_q.len();
    if !mode.is_hyperbolic() {
        let diff: Vec<f64> = u_q.iter().zip(u_c).map(|(a, b)| a - b).collect();
        let n = l2_norm(&diff);
        if n == 0.0 {
            return Ok((0.0, vec![0.0; d], vec![0.0; d]));
        }
        let gq: Vec<f64> = diff.iter().map(|x| x / n).collect();
        let gc = gq.iter().map(|x| -x).collect();
        return Ok((n, gq, gc));
    }
    let pq = project_to_ball(u_q, BALL_EPS);
    let pc = project_to_ball(u_c, BALL_EPS);
    let neg_c: Vec<f64> = pc.as_slice().iter().map(|x| -x).collect();
    let w = mobius_add(&neg_c, pq.as_slice())?;
    let n = l2_norm(&w);
    let (s, ds_dn) = outer(mode, n)?;
    if n == 0.0 {
        return Ok((s, vec![0.0; d], vec![0.0; d]));
    }
    let gw: Vec<f64> = w.iter().map(|x| ds_dn * x / n).collect();
    let (g_negc, g_pq) = mobius_add_vjp(&neg_c, pq.as_slice(), &gw)?;
    let g_pc: Vec<f64> = g_negc.iter().map(|x| -x).collect();
    Ok((s, project_vjp(u_q, &g_pq, BALL_EPS), project_vjp(u_c, &g_pc, BALL_EPS)))
}

/// Forward-only counterpart of [`separation_with_grad`].
pub fn separation_of_outputs(u_q: &[f64], u_c: &[f64], mode: GeometryMode) -> Result<f64> {
    if mode.is_hyperbolic() {
        separation(project_to_ball(u_q, BALL_EPS).as_slice(), project_to_ball(u_c, BALL_EPS).as_slice(), mode)
    } else {
        separation(u_q, u_c, mode)
    }
}

/// `W₂·tanh(W₁·x + b₁) + b₂`. Weights are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLayerNet {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// The projection network mapping fused class vectors into `ℝ^d`.
pub type ProjectionNet = TwoLayerNet;

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

impl TwoLayerNet {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        TwoLayerNet {
            input,
            hidden,
            output,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; output * hidden],
            b2: vec![0.0; output],
        }
    }

    /// Uniform(−1/√fan_in, 1/√fan_in) weights and biases.
    pub fn init_uniform<R: Rng>(input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        let mut net = TwoLayerNet::zeros(input, hidden, output);
        let l1 = 1.0 / (input as f64).sqrt();
        let l2 = 1.0 / (hidden as f64).sqrt();
        net.w1.iter_mut().chain(net.b1.iter_mut()).for_each(|w| *w = rng.gen_range(-l1..=l1));
        net.w2.iter_mut().chain(net.b2.iter_mut()).for_each(|w| *w = rng.gen_range(-l2..=l2));
        net
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Parameter tensors in declaration order.
    pub fn tensors(&self) -> [&Vec<f64>; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<ForwardTrace> {
        if x.len() != self.input {
            return Err(Error::Dimension {
                expected: self.input,
                got: x.len(),
            });
        }
        let hidden: Vec<f64> = self
            .w1
            .chunks_exact(self.input.max(1))
            .take(self.hidden)
            .zip(&self.b1)
            .map(|(row, b)| (dot(row, x) + b).tanh())
            .collect();
        let output = self
            .w2
            .chunks_exact(self.hidden.max(1))
            .take(self.output)
            .zip(&self.b2)
            .map(|(row, b)| dot(row, &hidden) + b)
            .collect();
        Ok(ForwardTrace { hidden, output })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x)?.output)
    }

    /// Accumulate parameter gradients for upstream `g_out` into `grad`.
    /// Returns `∂L/∂x` when `want_input_grad` is set.
    pub fn backward(&self, x: &[f64], trace: &ForwardTrace, g_out: &[f64], grad: &mut TwoLayerNet, want_input_grad: bool) -> Option<Vec<f64>> {
        let h = self.hidden;
        let mut g_hidden = vec![0.0; h];
        for (o, &go) in g_out.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            grad.b2[o] += go;
            let row = &self.w2[o * h..(o + 1) * h];
            let grow = &mut grad.w2[o * h..(o + 1) * h];
            for k in 0..h {
                grow[k] += go * trace.hidden[k];
                g_hidden[k] += go * row[k];
            }
        }
        let mut g_x = want_input_grad.then(|| vec![0.0; self.input]);
        for (k, (&gh, &a)) in g_hidden.iter().zip(&trace.hidden).enumerate() {
            let gp = gh * (1.0 - a * a);
            if gp == 0.0 {
                continue;
            }
            grad.b1[k] += gp;
            let grow = &mut grad.w1[k * self.input..(k + 1) * self.input];
            grow.iter_mut().zip(x).for_each(|(g, xi)| *g += gp * xi);
            if let Some(gx) = g_x.as_mut() {
                let row = &self.w1[k * self.input..(k + 1) * self.input];
                gx.iter_mut().zip(row).for_each(|(g, w)| *g += gp * w);
            }
        }
        g_x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_mobius_value() {
        let r = mobius_add(&[0.3], &[0.4]).unwrap();
        assert!((r[0] - 0.625).abs() < 1e-15);
    }

    #[test]
    fn identities() {
        let a = [0.2, -0.5, 0.1];
        assert_eq!(mobius_add(&a, &[0.0; 3]).unwrap(), a.to_vec());
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!(l2_norm(&mobius_add(&neg, &a).unwrap()) < 1e-15);
        for mode in [GeometryMode::PaperAtan, GeometryMode::Artanh, GeometryMode::Euclidean] {
            assert_eq!(separation(&a, &a, mode).unwrap(), 0.0);
        }
    }

    #[test]
    fn scalar_separations() {
        let s = separation(&[0.5], &[0.0], GeometryMode::PaperAtan).unwrap();
        assert!((s - 0.927_295_218_001_612_2).abs() < 1e-12);
        let s = separation(&[0.5], &[0.0], GeometryMode::Artanh).unwrap();
        assert!((s - 3f64.ln()).abs() < 1e-12);
        let s = separation(&[0.5], &[0.0], GeometryMode::Euclidean).unwrap();
        assert_eq!(s, 0.5);
    }

    #[test]
    fn artanh_outside_ball_errors() {
        assert!(matches!(separation(&[1.5], &[0.0], GeometryMode::Artanh), Err(Error::Numeric(_))));
    }

    #[test]
    fn degenerate_denominator_errors() {
        // den = (1 - 1)^2 when a = -b on the boundary
        assert!(mobius_add(&[1.0], &[-1.0]).is_err());
    }

    #[test]
    fn projection_cases() {
        assert_eq!(project_to_ball(&[0.3, 0.4], BALL_EPS).as_slice(), &[0.3, 0.4]);
        let p = project_to_ball(&[0.0, 2.0], BALL_EPS);
        assert!((l2_norm(p.as_slice()) - (1.0 - BALL_EPS)).abs() < 1e-15);
        let edge = [1.0 - BALL_EPS];
        assert_eq!(project_to_ball(&edge, BALL_EPS).as_slice(), &edge);
        assert!(BallPoint::new(vec![1.0]).is_err());
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = TwoLayerNet::zeros(4, 3, 2);
        assert_eq!(net.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(net.forward(&[1.0]), Err(Error::Dimension { expected: 4, got: 1 })));
    }

    #[test]
    fn identity_net_is_tanh() {
        let mut net = TwoLayerNet::zeros(3, 3, 3);
        for i in 0..3 {
            net.w1[i * 3 + i] = 1.0;
            net.w2[i * 3 + i] = 1.0;
        }
        let x = [0.1, -0.2, 0.05];
        let y = net.forward(&x).unwrap();
        for (yi, xi) in y.iter().zip(x) {
            assert_eq!(*yi, xi.tanh());
        }
    }

    #[test]
    fn mobius_vjp_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<f64> = (0..5).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let b: Vec<f64> = (0..5).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let g: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = |a: &[f64], b: &[f64]| dot(&mobius_add(a, b).unwrap(), &g);
        let (ga, gb) = mobius_add_vjp(&a, &b, &g).unwrap();
        let h = 1e-6;
        for i in 0..5 {
            let mut ap = a.clone();
            let mut am = a.clone();
            ap[i] += h;
            am[i] -= h;
            assert!(((f(&ap, &b) - f(&am, &b)) / (2.0 * h) - ga[i]).abs() < 1e-8);
            let mut bp = b.clone();
            let mut bm = b.clone();
            bp[i] += h;
            bm[i] -= h;
            assert!(((f(&a, &bp) - f(&a, &bm)) / (2.0 * h) - gb[i]).abs() < 1e-8);
        }
    }
}
