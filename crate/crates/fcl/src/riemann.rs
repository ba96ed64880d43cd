//! Riemannian machinery: metric evaluation, Christoffel symbols, the
//! conformal transformation law, covariant derivatives and curvature.
//!
//! Index conventions used throughout:
//!
//! * `gamma[i][j][k]` stores `γ^i_{jk}`, symmetric in `(j, k)`.
//! * The curvature component order is `R_j{}^i{}_{kl}`, stored as
//!   `[j][i][k][l]`, with
//!   `R_j{}^i{}_{kl} = ∂_l γ^i_{jk} - ∂_k γ^i_{jl} + γ^r_{jk} γ^i_{rl} - γ^r_{jl} γ^i_{rk}`.
//!   The orientation is fixed so that (a) the transvection
//!   `y^j y^k R_j{}^i{}_{kl}` equals the spray curvature of the geodesic
//!   spray `G^i = ½ γ^i_{00}` and (b) the unit 2-sphere has sectional
//!   curvature +1.
//! * A `0` subscript denotes transvection with `y`.

use crate::error::{Error, Result};
use crate::expr::{sym_index, Expression, Jet2};
use crate::jets::Jet1;
use crate::linalg;

/// Symmetric grid of scalar fields `a_ij(x)`; only one triangle is stored,
/// so `a_ij = a_ji` holds structurally.
#[derive(Debug, Clone)]
pub struct MetricField {
    n: usize,
    entries: Vec<Expression>, // packed symmetric
}

impl MetricField {
    /// Build from packed entries ordered `(1,1), (2,1), (2,2), (3,1), ...`
    pub fn new(n: usize, entries: Vec<Expression>) -> Result<Self> {
        if entries.len() != n * (n + 1) / 2 {
            return Err(Error::DimensionMismatch {
                what: format!(
                    "metric needs {} entries for dimension {n}, got {}",
                    n * (n + 1) / 2,
                    entries.len()
                ),
            });
        }
        Ok(MetricField { n, entries })
    }

    pub fn from_sources(n: usize, sources: &[&str]) -> Result<Self> {
        let mut entries = Vec::with_capacity(sources.len());
        for (idx, src) in sources.iter().enumerate() {
            let expr = Expression::parse(src, n)
                .map_err(|e| Error::parse_in(format!("metric entry #{idx}"), e))?;
            entries.push(expr);
        }
        MetricField::new(n, entries)
    }

    pub fn euclidean(n: usize) -> Self {
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..=i {
                let src = if i == j { "1" } else { "0" };
                entries.push(Expression::parse(src, n).unwrap());
            }
        }
        MetricField { n, entries }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expression {
        &self.entries[sym_index(i, j)]
    }
}

/// Vector of scalar fields `b_i(x)`.
#[derive(Debug, Clone)]
pub struct OneFormField {
    n: usize,
    entries: Vec<Expression>,
}

impl OneFormField {
    pub fn new(n: usize, entries: Vec<Expression>) -> Result<Self> {
        if entries.len() != n {
            return Err(Error::DimensionMismatch {
                what: format!("one-form needs {n} entries, got {}", entries.len()),
            });
        }
        Ok(OneFormField { n, entries })
    }

    pub fn from_sources(n: usize, sources: &[&str]) -> Result<Self> {
        let mut entries = Vec::with_capacity(n);
        for (idx, src) in sources.iter().enumerate() {
            let expr = Expression::parse(src, n)
                .map_err(|e| Error::parse_in(format!("one-form entry b{}", idx + 1), e))?;
            entries.push(expr);
        }
        OneFormField::new(n, entries)
    }

    pub fn constant(n: usize, values: &[f64]) -> Self {
        let entries = values
            .iter()
            .map(|v| Expression::parse(&format!("{v}"), n).unwrap())
            .collect();
        OneFormField { n, entries }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize) -> &Expression {
        &self.entries[i]
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<Jet2>> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                e.eval_jet2(x)
                    .map_err(|err| Error::domain_in(format!("one-form entry b{}", i + 1), err))
            })
            .collect()
    }
}

/// Metric and inverse-metric jets at a point.
#[derive(Debug, Clone)]
pub struct MetricEval {
    n: usize,
    pub point: Vec<f64>,
    /// Packed symmetric jets of `a_ij`.
    pub a: Vec<Jet2>,
    /// Packed symmetric jets of `a^ij`.
    pub a_inv: Vec<Jet2>,
}

impl MetricEval {
    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn a_val(&self, i: usize, j: usize) -> f64 {
        self.a[sym_index(i, j)].value()
    }

    pub fn a_inv_val(&self, i: usize, j: usize) -> f64 {
        self.a_inv[sym_index(i, j)].value()
    }

    pub fn a_jet(&self, i: usize, j: usize) -> &Jet2 {
        &self.a[sym_index(i, j)]
    }

    pub fn a_inv_jet(&self, i: usize, j: usize) -> &Jet2 {
        &self.a_inv[sym_index(i, j)]
    }

    pub fn dense_a(&self) -> Vec<f64> {
        let vals: Vec<f64> = self.a.iter().map(|j| j.value()).collect();
        linalg::packed_to_dense(self.n, &vals)
    }

    pub fn dense_a_inv(&self) -> Vec<f64> {
        let vals: Vec<f64> = self.a_inv.iter().map(|j| j.value()).collect();
        linalg::packed_to_dense(self.n, &vals)
    }
}

/// Evaluate the metric at `x`: jets of `a_ij` and `a^ij`, with the positive
/// definiteness check. `a_inv · a = 1` holds to machine precision.
pub fn metric_at(metric: &MetricField, x: &[f64]) -> Result<MetricEval> {
    let n = metric.n;
    let mut a = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            let jet = metric.entry(i, j).eval_jet2(x).map_err(|err| {
                Error::domain_in(format!("metric entry a({},{})", i + 1, j + 1), err)
            })?;
            a.push(jet);
        }
    }
    let a_inv = linalg::jet_sym_inverse(n, n, &a).map_err(|order| Error::NotPositiveDefinite {
        point: x.to_vec(),
        order,
    })?;
    Ok(MetricEval {
        n,
        point: x.to_vec(),
        a,
        a_inv,
    })
}

/// Christoffel symbols and their first coordinate derivatives at a point.
#[derive(Debug, Clone)]
pub struct ChristoffelData {
    n: usize,
    /// `γ^i_{jk}` at `[(i*n + j)*n + k]`; symmetric in `(j, k)` exactly.
    pub gamma: Vec<f64>,
    /// `∂_l γ^i_{jk}` at `[((i*n + j)*n + k)*n + l]`.
    pub dgamma: Vec<f64>,
}

impl ChristoffelData {
    pub fn dimension(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.gamma[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn dget(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.dgamma[((i * self.n + j) * self.n + k) * self.n + l]
    }

    /// `γ^i_{jk}` as a gradient-carrying jet.
    pub fn jet1(&self, i: usize, j: usize, k: usize) -> Jet1 {
        let base = ((i * self.n + j) * self.n + k) * self.n;
        Jet1::from_parts(self.get(i, j, k), self.dgamma[base..base + self.n].to_vec())
    }

    /// Transvection `γ^i_{00} = γ^i_{jk} y^j y^k`.
    pub fn transvect00(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                for k in 0..n {
                    sum += self.get(i, j, k) * y[j] * y[k];
                }
            }
            out[i] = sum;
        }
        out
    }

    /// Nonlinear connection `N^i_j = γ^i_{jk} y^k`.
    pub fn nonlinear_connection(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut sum = 0.0;
                for k in 0..n {
                    sum += self.get(i, j, k) * y[k];
                }
                out[i * n + j] = sum;
            }
        }
        out
    }
}

/// Levi-Civita symbols from metric jets:
/// `γ^i_{jk} = ½ a^{ir} (∂_j a_rk + ∂_k a_rj - ∂_r a_jk)`,
/// with `∂γ` propagated through the same formula.
pub fn christoffel_from_jets(n: usize, a: &[Jet2], a_inv: &[Jet2]) -> ChristoffelData {
    let mut gamma = vec![0.0; n * n * n];
    let mut dgamma = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..=j {
                let mut value = 0.0;
                let mut grad = vec![0.0; n];
                for r in 0..n {
                    let inv = &a_inv[sym_index(i, r)];
                    let ark = &a[sym_index(r, k)];
                    let arj = &a[sym_index(r, j)];
                    let ajk = &a[sym_index(j, k)];
                    let bracket = ark.grad()[j] + arj.grad()[k] - ajk.grad()[r];
                    value += 0.5 * inv.value() * bracket;
                    for l in 0..n {
                        let dbracket = ark.hess(j, l) + arj.hess(k, l) - ajk.hess(r, l);
                        grad[l] += 0.5 * (inv.grad()[l] * bracket + inv.value() * dbracket);
                    }
                }
                for (jj, kk) in [(j, k), (k, j)] {
                    gamma[(i * n + jj) * n + kk] = value;
                    let base = ((i * n + jj) * n + kk) * n;
                    dgamma[base..base + n].copy_from_slice(&grad);
                }
            }
        }
    }
    ChristoffelData { n, gamma, dgamma }
}

/// Christoffel symbols of `metric` at `x`.
pub fn christoffel(metric: &MetricField, x: &[f64]) -> Result<ChristoffelData> {
    let eval = metric_at(metric, x)?;
    Ok(christoffel_from_jets(eval.n, &eval.a, &eval.a_inv))
}

/// Conformal transformation law for Levi-Civita connections: with
/// `g* = e^{2ρ} g`,
///
/// ```text
/// γ*^i_{jk} = γ^i_{jk} + ρ_j δ^i_k + ρ_k δ^i_j - ρ^i g_jk ,   ρ^i = g^{ij} ρ_j .
/// ```
///
/// `∂γ*` is propagated using the Hessian of `ρ` and the metric jets.
pub fn conformal_christoffel(
    base: &ChristoffelData,
    rho: &Jet2,
    eval: &MetricEval,
) -> Result<ChristoffelData> {
    let n = base.n;
    if rho.nvars() != n || eval.n != n {
        return Err(Error::DimensionMismatch {
            what: format!(
                "conformal factor has {} variables, connection has {n}",
                rho.nvars()
            ),
        });
    }
    // ρ^i and its gradient.
    let mut rho_up = vec![0.0; n];
    let mut drho_up = vec![0.0; n * n]; // [i][l]
    for i in 0..n {
        for j in 0..n {
            let inv = eval.a_inv_jet(i, j);
            rho_up[i] += inv.value() * rho.grad()[j];
            for l in 0..n {
                drho_up[i * n + l] += inv.grad()[l] * rho.grad()[j] + inv.value() * rho.hess(j, l);
            }
        }
    }

    let mut gamma = base.gamma.clone();
    let mut dgamma = base.dgamma.clone();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut value = 0.0;
                if i == k {
                    value += rho.grad()[j];
                }
                if i == j {
                    value += rho.grad()[k];
                }
                value -= rho_up[i] * eval.a_val(j, k);
                gamma[(i * n + j) * n + k] += value;
                let ajk = eval.a_jet(j, k);
                for l in 0..n {
                    let mut dv = 0.0;
                    if i == k {
                        dv += rho.hess(j, l);
                    }
                    if i == j {
                        dv += rho.hess(k, l);
                    }
                    dv -= drho_up[i * n + l] * ajk.value() + rho_up[i] * ajk.grad()[l];
                    dgamma[((i * n + j) * n + k) * n + l] += dv;
                }
            }
        }
    }
    Ok(ChristoffelData { n, gamma, dgamma })
}

/// Everything attached to the conformal metric `h_ij = e^{k} a_ij` with
/// `k = ln(4 / b²)`.
#[derive(Debug, Clone)]
pub struct HConnection {
    pub eval: MetricEval,
    /// Jets of `b_i`.
    pub b_lower: Vec<Jet2>,
    /// Jets of `b^i = a^{ij} b_j`.
    pub b_upper: Vec<Jet2>,
    /// Jet of `b² = a^{ij} b_i b_j`.
    pub bsq: Jet2,
    /// Jet of the conformal exponent `k(x) = ln(4/b²)`.
    pub k: Jet2,
    pub gamma_alpha: ChristoffelData,
    pub gamma_h: ChristoffelData,
}

impl HConnection {
    pub fn dimension(&self) -> usize {
        self.eval.n
    }

    /// `h_ij = e^k a_ij` values.
    pub fn h_val(&self, i: usize, j: usize) -> f64 {
        self.k.value().exp() * self.eval.a_val(i, j)
    }

    /// `h^{ij} = e^{-k} a^{ij}` values.
    pub fn h_inv_val(&self, i: usize, j: usize) -> f64 {
        (-self.k.value()).exp() * self.eval.a_inv_val(i, j)
    }
}

/// Jet of `b² = a^{ij} b_i b_j` from metric and one-form jets.
pub fn beta_norm_squared(eval: &MetricEval, b: &[Jet2]) -> Jet2 {
    let n = eval.n;
    let mut bsq = Jet2::constant(n, 0.0);
    for i in 0..n {
        for j in 0..n {
            bsq = bsq.add(&eval.a_inv_jet(i, j).mul(&b[i]).mul(&b[j]));
        }
    }
    bsq
}

/// Levi-Civita connection of `h_ij = e^{k} a_ij` obtained from the conformal
/// law with `ρ = k/2`, plus the ingredients (`b²`, `k`, `b^i`) the (α,β)
/// layer keeps reusing.
pub fn h_connection(metric: &MetricField, form: &OneFormField, x: &[f64]) -> Result<HConnection> {
    let eval = metric_at(metric, x)?;
    let n = eval.n;
    let b_lower = form.eval(x)?;
    let b_upper: Vec<Jet2> = (0..n)
        .map(|i| {
            let mut up = Jet2::constant(n, 0.0);
            for j in 0..n {
                up = up.add(&eval.a_inv_jet(i, j).mul(&b_lower[j]));
            }
            up
        })
        .collect();
    let bsq = beta_norm_squared(&eval, &b_lower);
    if bsq.value() <= 0.0 {
        return Err(Error::BetaDegenerate {
            point: x.to_vec(),
            bsq: bsq.value(),
        });
    }
    let k = Jet2::constant(n, 4.0).div(&bsq).ln();
    let gamma_alpha = christoffel_from_jets(n, &eval.a, &eval.a_inv);
    let gamma_h = conformal_christoffel(&gamma_alpha, &k.scale(0.5), &eval)?;
    Ok(HConnection {
        eval,
        b_lower,
        b_upper,
        bsq,
        k,
        gamma_alpha,
        gamma_h,
    })
}

/// Covariant derivative data of the 1-form `b` in `(M, α)`:
/// `b_{i;j} = ∂_j b_i - γ^r_{ij} b_r`, split into the symmetric part `r_ij`,
/// the antisymmetric part `s_ij`, the mixed `s^i_j = a^{ir} s_{rj}` and the
/// contraction `s_j = b^i s_ij`. Entries carry coordinate gradients.
#[derive(Debug, Clone)]
pub struct BetaInvariants {
    n: usize,
    /// `b_{i;j}` at `[i*n + j]`.
    pub bcov: Vec<Jet1>,
    /// `r_ij`, symmetric exactly.
    pub r: Vec<Jet1>,
    /// `s_ij`, antisymmetric exactly.
    pub s: Vec<Jet1>,
    /// `s^i_j` at `[i*n + j]`.
    pub s_mixed: Vec<Jet1>,
    /// `s_j = b^i s_ij`.
    pub s_low: Vec<Jet1>,
    /// `b²`.
    pub bsq: Jet2,
}

impl BetaInvariants {
    pub fn dimension(&self) -> usize {
        self.n
    }
}

/// β-invariants from metric jets, the α-connection and one-form jets.
/// Unlike [`h_connection`] this places no positivity requirement on `b²`.
pub fn beta_invariants_parts(
    eval: &MetricEval,
    gamma: &ChristoffelData,
    b: &[Jet2],
) -> BetaInvariants {
    let n = eval.n;

    let mut bcov = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut v = b[i].grad()[j];
            let mut g = vec![0.0; n];
            for l in 0..n {
                g[l] = b[i].hess(j, l);
            }
            for r in 0..n {
                v -= gamma.get(r, i, j) * b[r].value();
                for l in 0..n {
                    g[l] -= gamma.dget(r, i, j, l) * b[r].value()
                        + gamma.get(r, i, j) * b[r].grad()[l];
                }
            }
            bcov.push(Jet1::from_parts(v, g));
        }
    }

    let mut r = vec![Jet1::constant(n, 0.0); n * n];
    let mut s = vec![Jet1::constant(n, 0.0); n * n];
    for i in 0..n {
        for j in 0..=i {
            let sym = bcov[i * n + j].add(&bcov[j * n + i]).scale(0.5);
            r[i * n + j] = sym.clone();
            r[j * n + i] = sym;
            let anti = bcov[i * n + j].sub(&bcov[j * n + i]).scale(0.5);
            s[j * n + i] = anti.neg();
            s[i * n + j] = anti;
        }
    }

    let b_upper_jet1: Vec<Jet1> = (0..n)
        .map(|i| {
            let mut up = Jet1::constant(n, 0.0);
            for j in 0..n {
                up = up.add(&Jet1::from_jet2(eval.a_inv_jet(i, j)).mul(&Jet1::from_jet2(&b[j])));
            }
            up
        })
        .collect();
    let mut s_mixed = vec![Jet1::constant(n, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = Jet1::constant(n, 0.0);
            for rr in 0..n {
                let inv = Jet1::from_jet2(eval.a_inv_jet(i, rr));
                acc = acc.add(&inv.mul(&s[rr * n + j]));
            }
            s_mixed[i * n + j] = acc;
        }
    }
    let mut s_low = vec![Jet1::constant(n, 0.0); n];
    for j in 0..n {
        let mut acc = Jet1::constant(n, 0.0);
        for i in 0..n {
            acc = acc.add(&b_upper_jet1[i].mul(&s[i * n + j]));
        }
        s_low[j] = acc;
    }

    BetaInvariants {
        n,
        bcov,
        r,
        s,
        s_mixed,
        s_low,
        bsq: beta_norm_squared(eval, b),
    }
}

/// β-invariants from an already-assembled [`HConnection`].
pub fn beta_invariants_from(conn: &HConnection) -> BetaInvariants {
    beta_invariants_parts(&conn.eval, &conn.gamma_alpha, &conn.b_lower)
}

/// β-invariants of `(metric, form)` at `x`.
pub fn beta_invariants(
    metric: &MetricField,
    form: &OneFormField,
    x: &[f64],
) -> Result<BetaInvariants> {
    let eval = metric_at(metric, x)?;
    let gamma = christoffel_from_jets(eval.n, &eval.a, &eval.a_inv);
    let b = form.eval(x)?;
    Ok(beta_invariants_parts(&eval, &gamma, &b))
}

/// Full Riemann curvature `R_j{}^i{}_{kl}` of a connection, stored
/// `[j][i][k][l]`. The `(k, l)` antisymmetry is exact by construction.
#[derive(Debug, Clone)]
pub struct CurvatureTensor {
    n: usize,
    data: Vec<f64>,
}

impl CurvatureTensor {
    pub fn dimension(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, j: usize, i: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.data[((j * n + i) * n + k) * n + l]
    }

    /// `R_0{}^i{}_{0l} = y^j y^k R_j{}^i{}_{kl}` as a mixed matrix `[i*n + l]`.
    pub fn transvect_yy(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for l in 0..n {
                let mut sum = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        sum += y[j] * y[k] * self.get(j, i, k, l);
                    }
                }
                out[i * n + l] = sum;
            }
        }
        out
    }
}

/// Riemann curvature of the connection `gamma`.
pub fn riemann_curvature_of(gamma: &ChristoffelData) -> CurvatureTensor {
    let n = gamma.n;
    let mut data = vec![0.0; n * n * n * n];
    for j in 0..n {
        for i in 0..n {
            for k in 0..n {
                for l in 0..k {
                    let mut val = gamma.dget(i, j, k, l) - gamma.dget(i, j, l, k);
                    for r in 0..n {
                        val += gamma.get(r, j, k) * gamma.get(i, r, l)
                            - gamma.get(r, j, l) * gamma.get(i, r, k);
                    }
                    data[((j * n + i) * n + k) * n + l] = val;
                    data[((j * n + i) * n + l) * n + k] = -val;
                }
            }
        }
    }
    CurvatureTensor { n, data }
}

/// Riemann curvature of `metric` at `x`.
pub fn riemann_curvature(metric: &MetricField, x: &[f64]) -> Result<CurvatureTensor> {
    Ok(riemann_curvature_of(&christoffel(metric, x)?))
}

/// Sectional curvature of the plane spanned by `u, v` at `x`.
pub fn sectional_curvature(metric: &MetricField, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
    let eval = metric_at(metric, x)?;
    let n = eval.n;
    let curv = riemann_curvature_of(&christoffel_from_jets(n, &eval.a, &eval.a_inv));
    let mut ruv = vec![0.0; n];
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    sum += u[j] * u[k] * curv.get(j, i, k, l) * v[l];
                }
            }
        }
        ruv[i] = sum;
    }
    let inner = |a: &[f64], b: &[f64]| -> f64 {
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                sum += eval.a_val(i, j) * a[i] * b[j];
            }
        }
        sum
    };
    let num = inner(&ruv, v);
    let den = inner(u, u) * inner(v, v) - inner(u, v).powi(2);
    Ok(num / den)
}

// ---------------------------------------------------------------------------
// h-covariant derivative of y-dependent tensors
// ---------------------------------------------------------------------------

/// Dense little tensor, row-major over equal-size indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().product::<usize>().max(1);
        Tensor {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        for (i, d) in idx.iter().zip(&self.dims) {
            debug_assert!(i < d);
            off = off * d + i;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Walk all multi-indices of a given shape.
fn for_each_index(dims: &[usize], mut f: impl FnMut(&[usize])) {
    let rank = dims.len();
    let mut idx = vec![0usize; rank];
    if rank == 0 {
        f(&idx);
        return;
    }
    loop {
        f(&idx);
        let mut pos = rank;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < dims[pos] {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Variance of each tensor slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexKind {
    Upper,
    Lower,
}

/// h-covariant derivative of a (possibly y-dependent) tensor at `(x, y)`:
///
/// ```text
/// T‖j = ∂T/∂x^j - (∂T/∂y^s) N^s_j
///       + Σ_upper γ^{i_p}_{js} T^{..s..} - Σ_lower γ^s_{i_p j} T_{..s..}
/// ```
///
/// with `N^s_j = γ^s_{jk} y^k`. `dx[j]` and `dy[s]` hold the plain coordinate
/// derivatives of the components. The result has one extra trailing lower
/// index.
pub fn h_cov_derivative(
    value: &Tensor,
    dx: &[Tensor],
    dy: &[Tensor],
    signature: &[IndexKind],
    gamma: &ChristoffelData,
    y: &[f64],
) -> Result<Tensor> {
    let n = gamma.n;
    if value.rank() != signature.len() {
        return Err(Error::DimensionMismatch {
            what: format!(
                "tensor rank {} does not match signature length {}",
                value.rank(),
                signature.len()
            ),
        });
    }
    if dx.len() != n || dy.len() != n || value.dims.iter().any(|d| *d != n) {
        return Err(Error::DimensionMismatch {
            what: "tensor data must be cubical of the connection dimension".into(),
        });
    }
    let nonlinear = gamma.nonlinear_connection(y);

    let mut out_dims = value.dims.clone();
    out_dims.push(n);
    let mut out = Tensor::zeros(&out_dims);

    for_each_index(&value.dims.clone(), |idx| {
        for j in 0..n {
            let mut v = dx[j].get(idx);
            for s in 0..n {
                v -= dy[s].get(idx) * nonlinear[s * n + j];
            }
            let mut swapped = idx.to_vec();
            for (pos, kind) in signature.iter().enumerate() {
                let orig = idx[pos];
                for s in 0..n {
                    swapped[pos] = s;
                    match kind {
                        IndexKind::Upper => v += gamma.get(orig, j, s) * value.get(&swapped),
                        IndexKind::Lower => v -= gamma.get(s, orig, j) * value.get(&swapped),
                    }
                }
                swapped[pos] = orig;
            }
            let mut oidx = idx.to_vec();
            oidx.push(j);
            out.set(&oidx, v);
        }
    });
    Ok(out)
}

#[cfg(test)]
mod tests;
