//! Order-2 forward-mode jets over `n` base variables.
//!
//! A [`Jet2`] carries a value, a gradient and a dense symmetric Hessian with
//! respect to the base coordinates. Arithmetic propagates derivatives by the
//! chain and Leibniz rules, so evaluating an expression tree on jets yields
//! the exact value, gradient and Hessian of the expression (up to roundoff).
//!
//! The Hessian is stored once, packed as the lower triangle: entry `(i, j)`
//! with `i >= j` lives at `i*(i+1)/2 + j`. Symmetry is therefore structural.

/// Packed lower-triangle index for a symmetric matrix.
#[inline]
pub(crate) fn sym_index(i: usize, j: usize) -> usize {
    if i >= j {
        i * (i + 1) / 2 + j
    } else {
        j * (j + 1) / 2 + i
    }
}

/// Value, gradient and symmetric Hessian of a scalar with respect to `n`
/// base variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    n: usize,
    v: f64,
    g: Vec<f64>,
    h: Vec<f64>, // packed symmetric, length n(n+1)/2
}

impl Jet2 {
    pub fn constant(n: usize, v: f64) -> Self {
        Jet2 {
            n,
            v,
            g: vec![0.0; n],
            h: vec![0.0; n * (n + 1) / 2],
        }
    }

    /// Seed the `i`-th coordinate: value `x_i`, unit gradient entry, zero Hessian.
    pub fn variable(n: usize, i: usize, value: f64) -> Self {
        assert!(i < n, "variable index {i} out of range for {n} variables");
        let mut jet = Jet2::constant(n, value);
        jet.g[i] = 1.0;
        jet
    }

    /// Assemble a jet from raw components. `h` is the packed lower triangle.
    pub(crate) fn from_raw(n: usize, v: f64, g: Vec<f64>, h: Vec<f64>) -> Self {
        assert_eq!(g.len(), n);
        assert_eq!(h.len(), n * (n + 1) / 2);
        Jet2 { n, v, g, h }
    }

    pub(crate) fn hess_packed(&self) -> &[f64] {
        &self.h
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn value(&self) -> f64 {
        self.v
    }

    pub fn grad(&self) -> &[f64] {
        &self.g
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.h[sym_index(i, j)]
    }

    /// Hessian as a dense row-major `n x n` matrix.
    pub fn hess_matrix(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.hess(i, j);
            }
        }
        out
    }

    fn assert_same_vars(&self, rhs: &Jet2) {
        assert_eq!(self.n, rhs.n, "jet arity mismatch: {} vs {}", self.n, rhs.n);
    }

    pub fn add(&self, rhs: &Jet2) -> Jet2 {
        self.assert_same_vars(rhs);
        let mut out = self.clone();
        for (a, b) in out.g.iter_mut().zip(&rhs.g) {
            *a += b;
        }
        for (a, b) in out.h.iter_mut().zip(&rhs.h) {
            *a += b;
        }
        out.v += rhs.v;
        out
    }

    pub fn sub(&self, rhs: &Jet2) -> Jet2 {
        self.assert_same_vars(rhs);
        let mut out = self.clone();
        for (a, b) in out.g.iter_mut().zip(&rhs.g) {
            *a -= b;
        }
        for (a, b) in out.h.iter_mut().zip(&rhs.h) {
            *a -= b;
        }
        out.v -= rhs.v;
        out
    }

    pub fn neg(&self) -> Jet2 {
        let mut out = self.clone();
        out.v = -out.v;
        for a in out.g.iter_mut() {
            *a = -*a;
        }
        for a in out.h.iter_mut() {
            *a = -*a;
        }
        out
    }

    pub fn scale(&self, c: f64) -> Jet2 {
        let mut out = self.clone();
        out.v *= c;
        for a in out.g.iter_mut() {
            *a *= c;
        }
        for a in out.h.iter_mut() {
            *a *= c;
        }
        out
    }

    pub fn add_scalar(&self, c: f64) -> Jet2 {
        let mut out = self.clone();
        out.v += c;
        out
    }

    /// Leibniz product.
    pub fn mul(&self, rhs: &Jet2) -> Jet2 {
        self.assert_same_vars(rhs);
        let n = self.n;
        let mut out = Jet2::constant(n, self.v * rhs.v);
        for i in 0..n {
            out.g[i] = self.g[i] * rhs.v + self.v * rhs.g[i];
        }
        for i in 0..n {
            for j in 0..=i {
                let idx = sym_index(i, j);
                out.h[idx] = self.h[idx] * rhs.v
                    + self.g[i] * rhs.g[j]
                    + self.g[j] * rhs.g[i]
                    + self.v * rhs.h[idx];
            }
        }
        out
    }

    /// Compose with a univariate function given its value and first two
    /// derivatives at `self.value()`.
    pub fn compose(&self, f: f64, f1: f64, f2: f64) -> Jet2 {
        let n = self.n;
        let mut out = Jet2::constant(n, f);
        for i in 0..n {
            out.g[i] = f1 * self.g[i];
        }
        for i in 0..n {
            for j in 0..=i {
                let idx = sym_index(i, j);
                out.h[idx] = f2 * self.g[i] * self.g[j] + f1 * self.h[idx];
            }
        }
        out
    }

    /// Multiplicative inverse. Caller guarantees `self.value() != 0`.
    pub fn recip(&self) -> Jet2 {
        let x = self.v;
        self.compose(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    pub fn div(&self, rhs: &Jet2) -> Jet2 {
        self.mul(&rhs.recip())
    }

    pub fn sin(&self) -> Jet2 {
        let (s, c) = self.v.sin_cos();
        self.compose(s, c, -s)
    }

    pub fn cos(&self) -> Jet2 {
        let (s, c) = self.v.sin_cos();
        self.compose(c, -s, -c)
    }

    pub fn tan(&self) -> Jet2 {
        let t = self.v.tan();
        let sec2 = 1.0 + t * t;
        self.compose(t, sec2, 2.0 * t * sec2)
    }

    pub fn exp(&self) -> Jet2 {
        let e = self.v.exp();
        self.compose(e, e, e)
    }

    /// Natural logarithm. Caller guarantees `self.value() > 0`.
    pub fn ln(&self) -> Jet2 {
        let x = self.v;
        self.compose(x.ln(), 1.0 / x, -1.0 / (x * x))
    }

    /// Square root. Caller guarantees `self.value() > 0`.
    pub fn sqrt(&self) -> Jet2 {
        let r = self.v.sqrt();
        self.compose(r, 0.5 / r, -0.25 / (r * r * r))
    }

    pub fn sinh(&self) -> Jet2 {
        let s = self.v.sinh();
        let c = self.v.cosh();
        self.compose(s, c, s)
    }

    pub fn cosh(&self) -> Jet2 {
        let s = self.v.sinh();
        let c = self.v.cosh();
        self.compose(c, s, c)
    }

    /// Real power with constant exponent. Caller guarantees the domain rules
    /// checked by the expression evaluator (positive base for non-integer
    /// exponents, nonzero base for negative ones).
    pub fn powf(&self, p: f64) -> Jet2 {
        let (f, f1, f2) = pow_derivs(self.v, p);
        self.compose(f, f1, f2)
    }
}

/// `(x^p, p x^(p-1), p(p-1) x^(p-2))` with the `x = 0` corner cases of
/// integer exponents handled so that no spurious NaN appears.
pub(crate) fn pow_derivs(x: f64, p: f64) -> (f64, f64, f64) {
    let f = x.powf(p);
    let f1 = if p == 0.0 { 0.0 } else { p * x.powf(p - 1.0) };
    let c2 = p * (p - 1.0);
    let f2 = if c2 == 0.0 { 0.0 } else { c2 * x.powf(p - 2.0) };
    (f, f1, f2)
}
