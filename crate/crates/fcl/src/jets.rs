//! Derivative carriers for the tensor pipeline.
//!
//! Two kinds of jets complement [`crate::expr::Jet2`]:
//!
//! * [`Jet1`] — value plus gradient in the base coordinates. Used for
//!   derived tensor fields (Christoffel symbols, covariant derivatives of the
//!   1-form) whose own definition already consumed one derivative order of
//!   the underlying expression fields.
//! * [`TJet`] — a jet on the tangent bundle at a point `(x, y)` carrying the
//!   value, the gradients in `x` and `y`, and the mixed `x`–`y` and pure
//!   `y`–`y` second-derivative blocks. The `x`–`x` block is deliberately not
//!   carried: no downstream formula (spray curvature, covariant derivatives
//!   of the deviation tensor) uses it, and producing it would require third
//!   derivatives of the expression fields. The chain rule never mixes Hessian
//!   blocks, so dropping one block is sound.

use crate::expr::{pow_derivs, sym_index, Jet2};

/// Value and gradient with respect to the `n` base coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet1 {
    pub v: f64,
    pub g: Vec<f64>,
}

impl Jet1 {
    pub fn constant(n: usize, v: f64) -> Self {
        Jet1 { v, g: vec![0.0; n] }
    }

    pub fn from_parts(v: f64, g: Vec<f64>) -> Self {
        Jet1 { v, g }
    }

    /// Truncate an order-2 jet to (value, gradient).
    pub fn from_jet2(jet: &Jet2) -> Self {
        Jet1 {
            v: jet.value(),
            g: jet.grad().to_vec(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.g.len()
    }

    pub fn add(&self, rhs: &Jet1) -> Jet1 {
        Jet1 {
            v: self.v + rhs.v,
            g: self.g.iter().zip(&rhs.g).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &Jet1) -> Jet1 {
        Jet1 {
            v: self.v - rhs.v,
            g: self.g.iter().zip(&rhs.g).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn neg(&self) -> Jet1 {
        Jet1 {
            v: -self.v,
            g: self.g.iter().map(|a| -a).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Jet1 {
        Jet1 {
            v: c * self.v,
            g: self.g.iter().map(|a| c * a).collect(),
        }
    }

    pub fn mul(&self, rhs: &Jet1) -> Jet1 {
        Jet1 {
            v: self.v * rhs.v,
            g: self
                .g
                .iter()
                .zip(&rhs.g)
                .map(|(a, b)| a * rhs.v + self.v * b)
                .collect(),
        }
    }

    pub fn recip(&self) -> Jet1 {
        let inv = 1.0 / self.v;
        Jet1 {
            v: inv,
            g: self.g.iter().map(|a| -a * inv * inv).collect(),
        }
    }

    pub fn div(&self, rhs: &Jet1) -> Jet1 {
        self.mul(&rhs.recip())
    }
}

/// Jet of a scalar on the tangent bundle at `(x, y)`, both of dimension `n`.
///
/// Carried data: value, `∂/∂x`, `∂/∂y`, `∂²/∂x∂y` (dense `n×n`, x index
/// first) and `∂²/∂y∂y` (packed symmetric).
#[derive(Debug, Clone, PartialEq)]
pub struct TJet {
    n: usize,
    pub v: f64,
    dx: Vec<f64>,
    dy: Vec<f64>,
    dxy: Vec<f64>, // row-major [x_index * n + y_index]
    dyy: Vec<f64>, // packed symmetric
}

impl TJet {
    pub fn constant(n: usize, v: f64) -> Self {
        TJet {
            n,
            v,
            dx: vec![0.0; n],
            dy: vec![0.0; n],
            dxy: vec![0.0; n * n],
            dyy: vec![0.0; n * (n + 1) / 2],
        }
    }

    /// Lift a field of `x` alone: its `y`-blocks vanish identically.
    pub fn from_x_field(n: usize, value: f64, xgrad: &[f64]) -> Self {
        assert_eq!(xgrad.len(), n);
        let mut jet = TJet::constant(n, value);
        jet.dx.copy_from_slice(xgrad);
        jet
    }

    pub fn from_jet1(jet: &Jet1) -> Self {
        TJet::from_x_field(jet.nvars(), jet.v, &jet.g)
    }

    /// The fiber coordinate `y^j`.
    pub fn y_coordinate(n: usize, j: usize, value: f64) -> Self {
        let mut jet = TJet::constant(n, value);
        jet.dy[j] = 1.0;
        jet
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn dy(&self) -> &[f64] {
        &self.dy
    }

    /// `∂²/∂x^l ∂y^j`.
    pub fn dxy(&self, l: usize, j: usize) -> f64 {
        self.dxy[l * self.n + j]
    }

    /// `∂²/∂y^j ∂y^k`.
    pub fn dyy(&self, j: usize, k: usize) -> f64 {
        self.dyy[sym_index(j, k)]
    }

    fn assert_same_vars(&self, rhs: &TJet) {
        assert_eq!(self.n, rhs.n, "tangent jet arity mismatch");
    }

    pub fn add(&self, rhs: &TJet) -> TJet {
        self.assert_same_vars(rhs);
        let mut out = self.clone();
        out.v += rhs.v;
        for (a, b) in out.dx.iter_mut().zip(&rhs.dx) {
            *a += b;
        }
        for (a, b) in out.dy.iter_mut().zip(&rhs.dy) {
            *a += b;
        }
        for (a, b) in out.dxy.iter_mut().zip(&rhs.dxy) {
            *a += b;
        }
        for (a, b) in out.dyy.iter_mut().zip(&rhs.dyy) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, rhs: &TJet) -> TJet {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> TJet {
        self.scale(-1.0)
    }

    pub fn scale(&self, c: f64) -> TJet {
        let mut out = self.clone();
        out.v *= c;
        for a in out.dx.iter_mut() {
            *a *= c;
        }
        for a in out.dy.iter_mut() {
            *a *= c;
        }
        for a in out.dxy.iter_mut() {
            *a *= c;
        }
        for a in out.dyy.iter_mut() {
            *a *= c;
        }
        out
    }

    pub fn add_scalar(&self, c: f64) -> TJet {
        let mut out = self.clone();
        out.v += c;
        out
    }

    pub fn mul(&self, rhs: &TJet) -> TJet {
        self.assert_same_vars(rhs);
        let n = self.n;
        let mut out = TJet::constant(n, self.v * rhs.v);
        for l in 0..n {
            out.dx[l] = self.dx[l] * rhs.v + self.v * rhs.dx[l];
            out.dy[l] = self.dy[l] * rhs.v + self.v * rhs.dy[l];
        }
        for l in 0..n {
            for j in 0..n {
                out.dxy[l * n + j] = self.dxy[l * n + j] * rhs.v
                    + self.dx[l] * rhs.dy[j]
                    + self.dy[j] * rhs.dx[l]
                    + self.v * rhs.dxy[l * n + j];
            }
        }
        for j in 0..n {
            for k in 0..=j {
                let idx = sym_index(j, k);
                out.dyy[idx] = self.dyy[idx] * rhs.v
                    + self.dy[j] * rhs.dy[k]
                    + self.dy[k] * rhs.dy[j]
                    + self.v * rhs.dyy[idx];
            }
        }
        out
    }

    /// Compose with a univariate function given `(f, f', f'')` at `self.v`.
    pub fn compose(&self, f: f64, f1: f64, f2: f64) -> TJet {
        let n = self.n;
        let mut out = TJet::constant(n, f);
        for l in 0..n {
            out.dx[l] = f1 * self.dx[l];
            out.dy[l] = f1 * self.dy[l];
        }
        for l in 0..n {
            for j in 0..n {
                out.dxy[l * n + j] = f2 * self.dx[l] * self.dy[j] + f1 * self.dxy[l * n + j];
            }
        }
        for j in 0..n {
            for k in 0..=j {
                let idx = sym_index(j, k);
                out.dyy[idx] = f2 * self.dy[j] * self.dy[k] + f1 * self.dyy[idx];
            }
        }
        out
    }

    pub fn recip(&self) -> TJet {
        let x = self.v;
        self.compose(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    pub fn div(&self, rhs: &TJet) -> TJet {
        self.mul(&rhs.recip())
    }

    pub fn sqrt(&self) -> TJet {
        let r = self.v.sqrt();
        self.compose(r, 0.5 / r, -0.25 / (r * r * r))
    }

    pub fn powf(&self, p: f64) -> TJet {
        let (f, f1, f2) = pow_derivs(self.v, p);
        self.compose(f, f1, f2)
    }

    /// Compose a bivariate function with two tangent jets.
    ///
    /// `f` is an order-2 jet in two auxiliary variables `(s, t)` (as produced
    /// by running the function through [`Jet2`] arithmetic with `n = 2`),
    /// evaluated at `(s.v, t.v)`.
    pub fn compose2(f: &Jet2, s: &TJet, t: &TJet) -> TJet {
        assert_eq!(f.nvars(), 2, "compose2 expects a bivariate jet");
        s.assert_same_vars(t);
        let n = s.n;
        let (fs, ft) = (f.grad()[0], f.grad()[1]);
        let (fss, fst, ftt) = (f.hess(0, 0), f.hess(0, 1), f.hess(1, 1));
        let mut out = TJet::constant(n, f.value());
        for l in 0..n {
            out.dx[l] = fs * s.dx[l] + ft * t.dx[l];
            out.dy[l] = fs * s.dy[l] + ft * t.dy[l];
        }
        for l in 0..n {
            for j in 0..n {
                out.dxy[l * n + j] = fs * s.dxy[l * n + j]
                    + ft * t.dxy[l * n + j]
                    + fss * s.dx[l] * s.dy[j]
                    + fst * (s.dx[l] * t.dy[j] + t.dx[l] * s.dy[j])
                    + ftt * t.dx[l] * t.dy[j];
            }
        }
        for j in 0..n {
            for k in 0..=j {
                let idx = sym_index(j, k);
                out.dyy[idx] = fs * s.dyy[idx]
                    + ft * t.dyy[idx]
                    + fss * s.dy[j] * s.dy[k]
                    + fst * (s.dy[j] * t.dy[k] + t.dy[j] * s.dy[k])
                    + ftt * t.dy[j] * t.dy[k];
            }
        }
        out
    }
}
