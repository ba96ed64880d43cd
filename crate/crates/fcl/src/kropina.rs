//! The (α,β)-metric layer for `F = α^(m+1)/β^m`.
//!
//! Built from a Riemannian metric `α = sqrt(a_ij y^i y^j)` and a 1-form
//! `β = b_i y^i`, the generalized Kropina metric (`m ∉ {0, -1}`) is singular
//! where `β = 0`; all evaluation happens on the half-cone `β > 0` behind a
//! configurable guard `β > eps_beta·α`.
//!
//! The geodesic spray of any metric `F = α φ(s)`, `s = β/α`, is
//!
//! ```text
//! 2G^i = γ^i_00 + 2ωα s^i_0 + 2Θ (r_00 - 2αω s_0) (y^i/α + ω'/(ω - sω') b^i)
//! ω = φ'/(φ - sφ') ,   Θ = (ω - sω') / (2 (1 + sω + (b² - s²) ω'))
//! ```
//!
//! For the Kropina family `φ(s) = s^(-m)` these close to
//!
//! ```text
//! ω  = -m/((1+m) s) ,   ω' = m/((1+m) s²) ,
//! Θ  = -m s / (s² - m s² + m b²) ,   ω'/(ω - sω') = -1/(2s) .
//! ```
//!
//! Both routes are implemented; the generic one runs the φ-derivatives
//! through bivariate jets in `(s, b²)`, and the two must agree to roundoff.
//!
//! The conformal representation uses `h_ij = e^k a_ij`, `W_i = ½ e^k b_i`
//! with `k = ln(4/b²)`, which makes `‖W‖_h = 1`, `b^i = 2W^i` and
//! `F = π h_00^{(m+1)/2} / W_0^m` with `π = e^{(m-1)k/2}/2^m` hold
//! simultaneously.

use crate::error::{Error, Result};
use crate::expr::Jet2;
use crate::jets::{Jet1, TJet};
use crate::riemann::{
    self, BetaInvariants, HConnection, MetricField, OneFormField,
};

/// Guards for the conic domain and the sampling window in `s/b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainOptions {
    /// Require `β > eps_beta · α`.
    pub eps_beta: f64,
    /// Admissible band for `s/b` when sampling directions.
    pub s_window: (f64, f64),
}

impl Default for DomainOptions {
    fn default() -> Self {
        DomainOptions {
            eps_beta: 1e-6,
            s_window: (0.05, 0.95),
        }
    }
}

/// φ-family of an (α,β)-metric, given through its derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiFamily {
    /// `φ(s) = s^(-m)`.
    GeneralizedKropina { m: f64 },
    /// `φ(s) = 1 + s`. Used as a regression guard on the shared spray
    /// engine: with `b ≡ 0` the spray must reduce to the Riemannian one.
    Randers,
}

impl PhiFamily {
    /// `φ^(order)(s)` for `order <= 4`.
    pub fn derivative(&self, order: usize, s: f64) -> f64 {
        match self {
            PhiFamily::GeneralizedKropina { m } => {
                let mut coeff = 1.0;
                for i in 0..order {
                    coeff *= -m - i as f64;
                }
                coeff * s.powf(-m - order as f64)
            }
            PhiFamily::Randers => match order {
                0 => 1.0 + s,
                1 => 1.0,
                _ => 0.0,
            },
        }
    }

    /// Expand `φ^(k)` for `k = base..base+2` into a bivariate jet in the
    /// auxiliary variables `(s, b²)` at `s`.
    fn jet(&self, base: usize, s: f64) -> Jet2 {
        Jet2::from_raw(
            2,
            self.derivative(base, s),
            vec![self.derivative(base + 1, s), 0.0],
            vec![self.derivative(base + 2, s), 0.0, 0.0],
        )
    }
}

/// Which ω/Θ machinery the spray assembly uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SprayRoute {
    /// Kropina closed forms evaluated directly in tangent-jet arithmetic.
    ClosedForm,
    /// Generic definitions from φ-derivatives via bivariate `(s, b²)` jets.
    GenericPhi,
}

/// The generalized Kropina metric `F = α^(m+1)/β^m`.
#[derive(Debug, Clone)]
pub struct KropinaMetric {
    metric: MetricField,
    form: OneFormField,
    m: f64,
    options: DomainOptions,
}

impl KropinaMetric {
    pub fn new(metric: MetricField, form: OneFormField, m: f64) -> Result<Self> {
        Self::with_options(metric, form, m, DomainOptions::default())
    }

    pub fn with_options(
        metric: MetricField,
        form: OneFormField,
        m: f64,
        options: DomainOptions,
    ) -> Result<Self> {
        if m.abs() < 1e-12 || (m + 1.0).abs() < 1e-12 {
            return Err(Error::InvalidExponent { m });
        }
        if metric.dimension() != form.dimension() {
            return Err(Error::DimensionMismatch {
                what: format!(
                    "metric dimension {} vs one-form dimension {}",
                    metric.dimension(),
                    form.dimension()
                ),
            });
        }
        Ok(KropinaMetric {
            metric,
            form,
            m,
            options,
        })
    }

    pub fn dimension(&self) -> usize {
        self.metric.dimension()
    }

    pub fn exponent(&self) -> f64 {
        self.m
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn one_form(&self) -> &OneFormField {
        &self.form
    }

    pub fn options(&self) -> &DomainOptions {
        &self.options
    }

    pub fn family(&self) -> PhiFamily {
        PhiFamily::GeneralizedKropina { m: self.m }
    }

    /// `F, α, β, s` at `(x, y)`. Requires `α > 0` and `β > eps_beta·α`.
    pub fn f_value(&self, x: &[f64], y: &[f64]) -> Result<FValue> {
        let eval = riemann::metric_at(&self.metric, x)?;
        let b = self.form.eval(x)?;
        let n = self.dimension();
        let mut alpha2 = 0.0;
        let mut beta = 0.0;
        for i in 0..n {
            beta += b[i].value() * y[i];
            for j in 0..n {
                alpha2 += eval.a_val(i, j) * y[i] * y[j];
            }
        }
        let alpha = alpha2.sqrt();
        if !(alpha > 0.0) {
            return Err(Error::ConicDomain {
                point: x.to_vec(),
                alpha,
                beta,
                eps_beta: self.options.eps_beta,
            });
        }
        if beta <= self.options.eps_beta * alpha {
            return Err(Error::ConicDomain {
                point: x.to_vec(),
                alpha,
                beta,
                eps_beta: self.options.eps_beta,
            });
        }
        let f = alpha.powf(self.m + 1.0) / beta.powf(self.m);
        Ok(FValue {
            f,
            alpha,
            beta,
            s: beta / alpha,
        })
    }

    /// Whether `(x, y)` passes the conic guard, the `s/b` sampling window
    /// and the Θ-denominator guard (the denominator has an interior zero
    /// for `m < 0`).
    pub fn direction_admissible(&self, x: &[f64], y: &[f64]) -> Result<bool> {
        let eval = riemann::metric_at(&self.metric, x)?;
        let b = self.form.eval(x)?;
        let n = self.dimension();
        let mut alpha2 = 0.0;
        let mut beta = 0.0;
        let mut bsq = 0.0;
        for i in 0..n {
            beta += b[i].value() * y[i];
            for j in 0..n {
                alpha2 += eval.a_val(i, j) * y[i] * y[j];
                bsq += eval.a_inv_val(i, j) * b[i].value() * b[j].value();
            }
        }
        let alpha = alpha2.sqrt();
        if !(alpha > 0.0) || beta <= self.options.eps_beta * alpha || bsq <= 0.0 {
            return Ok(false);
        }
        let s = beta / alpha;
        let bnorm = bsq.sqrt();
        let (lo, hi) = self.options.s_window;
        if s < lo * bnorm || s > hi * bnorm {
            return Ok(false);
        }
        let den = theta_denominator(self.m, s, bsq);
        let scale = (1.0 - self.m).abs() * s * s + self.m.abs() * bsq;
        Ok(den.abs() > 1e-3 * scale)
    }

    /// The h-connection context at `x`.
    pub fn h_connection(&self, x: &[f64]) -> Result<HConnection> {
        riemann::h_connection(&self.metric, &self.form, x)
    }

    /// Spray data at `(x, y)` via the closed-form ω/Θ route.
    pub fn spray_alpha_beta(&self, x: &[f64], y: &[f64]) -> Result<SprayData> {
        self.spray_with_route(x, y, SprayRoute::ClosedForm)
    }

    pub fn spray_with_route(&self, x: &[f64], y: &[f64], route: SprayRoute) -> Result<SprayData> {
        let conn = self.h_connection(x)?;
        let inv = riemann::beta_invariants_from(&conn);
        let parts = spray_g_parts(
            &conn.eval,
            &conn.gamma_alpha,
            &conn.b_lower,
            &conn.b_upper,
            &inv,
            self.family(),
            route,
            y,
            Some(self.options.eps_beta),
        )?;
        let n = self.dimension();

        // ^hγ^i_00 as tangent jets, and Φ^i = G^i - ½ ^hγ^i_00.
        let y_jets: Vec<TJet> = (0..n).map(|j| TJet::y_coordinate(n, j, y[j])).collect();
        let gamma_h00: Vec<TJet> = (0..n)
            .map(|i| {
                let mut acc = TJet::constant(n, 0.0);
                for j in 0..n {
                    for kk in 0..n {
                        let coeff = TJet::from_jet1(&conn.gamma_h.jet1(i, j, kk));
                        acc = acc.add(&coeff.mul(&y_jets[j]).mul(&y_jets[kk]));
                    }
                }
                acc
            })
            .collect();
        let phi: Vec<TJet> = parts
            .g
            .iter()
            .zip(&gamma_h00)
            .map(|(g, gh)| g.sub(&gh.scale(0.5)))
            .collect();

        let f = parts
            .alpha
            .powf(self.m + 1.0)
            .mul(&parts.beta.powf(-self.m));

        Ok(SprayData {
            n,
            gamma00_alpha: conn.gamma_alpha.transvect00(y),
            gamma00_h: conn.gamma_h.transvect00(y),
            g: parts.g,
            phi,
            f,
            alpha: parts.alpha.v,
            beta: parts.beta.v,
            s: parts.s.v,
            conn,
            inv,
        })
    }

    /// The conformal `h/W` representation at `x`.
    pub fn to_hw(&self, x: &[f64]) -> Result<HWData> {
        let conn = self.h_connection(x)?;
        hw_from_connection(&conn, self.m)
    }
}

/// `F` together with its (α, β, s) split at a point-direction pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FValue {
    pub f: f64,
    pub alpha: f64,
    pub beta: f64,
    pub s: f64,
}

/// `Θ`-denominator `s² - m s² + m b²` of the Kropina closed forms.
pub fn theta_denominator(m: f64, s: f64, bsq: f64) -> f64 {
    s * s * (1.0 - m) + m * bsq
}

/// Pointwise φ-machinery values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiFunctions {
    pub phi: f64,
    pub dphi: f64,
    pub omega: f64,
    pub domega: f64,
    pub theta: f64,
    pub s: f64,
    pub bsq: f64,
}

/// Generic `ω, ω', Θ` from the φ-derivatives of the Kropina family:
/// `ω = φ'/(φ - sφ')`, `ω' = φφ''/(φ - sφ')²`,
/// `Θ = (ω - sω')/(2(1 + sω + (b² - s²)ω'))`.
pub fn phi_functions(m: f64, s: f64, bsq: f64) -> Result<PhiFunctions> {
    let family = PhiFamily::GeneralizedKropina { m };
    if s == 0.0 {
        return Err(Error::SingularPhi { what: "s", s });
    }
    let phi = family.derivative(0, s);
    let dphi = family.derivative(1, s);
    let ddphi = family.derivative(2, s);
    let denom = phi - s * dphi;
    if denom == 0.0 {
        return Err(Error::SingularPhi {
            what: "phi - s phi'",
            s,
        });
    }
    let omega = dphi / denom;
    let domega = phi * ddphi / (denom * denom);
    let theta_den = 2.0 * (1.0 + s * omega + (bsq - s * s) * domega);
    if theta_den == 0.0 {
        return Err(Error::SingularPhi {
            what: "theta denominator",
            s,
        });
    }
    let theta = (omega - s * domega) / theta_den;
    Ok(PhiFunctions {
        phi,
        dphi,
        omega,
        domega,
        theta,
        s,
        bsq,
    })
}

/// Kropina closed forms `(ω, ω', Θ)`.
pub fn kropina_closed_forms(m: f64, s: f64, bsq: f64) -> (f64, f64, f64) {
    let omega = -(m / (1.0 + m)) / s;
    let domega = (m / (1.0 + m)) / (s * s);
    let theta = -m * s / theta_denominator(m, s, bsq);
    (omega, domega, theta)
}

/// `σ₁ = 2ms/(s² - ms² + mb²)`; equals `-2Θ` identically.
pub fn sigma1(m: f64, s: f64, bsq: f64) -> f64 {
    2.0 * m * s / theta_denominator(m, s, bsq)
}

struct SprayParts {
    alpha: TJet,
    beta: TJet,
    s: TJet,
    g: Vec<TJet>,
}

/// The shared spray engine: `G^i` tangent jets for any φ-family.
#[allow(clippy::too_many_arguments)]
fn spray_g_parts(
    eval: &riemann::MetricEval,
    gamma_alpha: &riemann::ChristoffelData,
    b_lower: &[Jet2],
    b_upper: &[Jet2],
    inv: &BetaInvariants,
    family: PhiFamily,
    route: SprayRoute,
    y: &[f64],
    conic_guard: Option<f64>,
) -> Result<SprayParts> {
    let n = eval.dimension();
    let x = &eval.point;
    let y_jets: Vec<TJet> = (0..n).map(|j| TJet::y_coordinate(n, j, y[j])).collect();

    // α² = a_ij y^i y^j, β = b_i y^i as tangent jets.
    let mut alpha2 = TJet::constant(n, 0.0);
    for i in 0..n {
        for j in 0..n {
            let aij = eval.a_jet(i, j);
            let lifted = TJet::from_x_field(n, aij.value(), aij.grad());
            alpha2 = alpha2.add(&lifted.mul(&y_jets[i]).mul(&y_jets[j]));
        }
    }
    let alpha = alpha2.sqrt();
    let mut beta = TJet::constant(n, 0.0);
    for i in 0..n {
        let bi = TJet::from_x_field(n, b_lower[i].value(), b_lower[i].grad());
        beta = beta.add(&bi.mul(&y_jets[i]));
    }
    if let Some(eps) = conic_guard {
        if beta.v <= eps * alpha.v {
            return Err(Error::ConicDomain {
                point: x.clone(),
                alpha: alpha.v,
                beta: beta.v,
                eps_beta: eps,
            });
        }
    }
    let s = beta.div(&alpha);
    let bsq = TJet::from_x_field(n, inv.bsq.value(), inv.bsq.grad());

    // ω, Θ and the coefficient c = ω'/(ω - sω') of b^i.
    let (omega, theta, cvec) = match (route, family) {
        (SprayRoute::ClosedForm, PhiFamily::GeneralizedKropina { m }) => {
            let omega = s.recip().scale(-m / (1.0 + m));
            let den = s.mul(&s).scale(1.0 - m).add(&bsq.scale(m));
            if den.v == 0.0 {
                return Err(Error::SingularPhi {
                    what: "theta denominator",
                    s: s.v,
                });
            }
            let theta = s.scale(-m).div(&den);
            let cvec = s.recip().scale(-0.5);
            (omega, theta, cvec)
        }
        (SprayRoute::ClosedForm, PhiFamily::Randers) => {
            // ω = 1/(1 + ... ) closed forms are trivial for Randers but the
            // generic route is exact already; reuse it.
            generic_omega_theta(family, &s, &bsq)?
        }
        (SprayRoute::GenericPhi, fam) => generic_omega_theta(fam, &s, &bsq)?,
    };

    // γ^i_00, s^i_0, s_0, r_00 as tangent jets.
    let mut g: Vec<TJet> = Vec::with_capacity(n);
    let mut s0 = TJet::constant(n, 0.0);
    for j in 0..n {
        s0 = s0.add(&TJet::from_jet1(&inv.s_low[j]).mul(&y_jets[j]));
    }
    let mut r00 = TJet::constant(n, 0.0);
    for j in 0..n {
        for k in 0..n {
            r00 = r00.add(
                &TJet::from_jet1(&inv.r[j * n + k])
                    .mul(&y_jets[j])
                    .mul(&y_jets[k]),
            );
        }
    }
    // factor = r_00 - 2αω s_0
    let factor = r00.sub(&alpha.mul(&omega).mul(&s0).scale(2.0));
    let two_theta_factor = theta.mul(&factor).scale(2.0);

    for i in 0..n {
        let mut gamma00 = TJet::constant(n, 0.0);
        for j in 0..n {
            for k in 0..n {
                let coeff = TJet::from_jet1(&gamma_alpha.jet1(i, j, k));
                gamma00 = gamma00.add(&coeff.mul(&y_jets[j]).mul(&y_jets[k]));
            }
        }
        let mut si0 = TJet::constant(n, 0.0);
        for j in 0..n {
            si0 = si0.add(&TJet::from_jet1(&inv.s_mixed[i * n + j]).mul(&y_jets[j]));
        }
        let b_up = TJet::from_x_field(n, b_upper[i].value(), b_upper[i].grad());
        let vec_i = y_jets[i].div(&alpha).add(&cvec.mul(&b_up));
        // 2G^i = γ^i_00 + 2ωα s^i_0 + 2Θ(r_00 - 2αω s_0) vec_i
        let two_g = gamma00
            .add(&omega.mul(&alpha).mul(&si0).scale(2.0))
            .add(&two_theta_factor.mul(&vec_i));
        g.push(two_g.scale(0.5));
    }

    Ok(SprayParts { alpha, beta, s, g })
}

/// ω, Θ, c as tangent jets through bivariate `(s, b²)` jet arithmetic on the
/// generic definitions.
fn generic_omega_theta(
    family: PhiFamily,
    s: &TJet,
    bsq: &TJet,
) -> Result<(TJet, TJet, TJet)> {
    if matches!(family, PhiFamily::GeneralizedKropina { .. }) && s.v == 0.0 {
        return Err(Error::SingularPhi { what: "s", s: s.v });
    }
    let sv = Jet2::variable(2, 0, s.v);
    let tv = Jet2::variable(2, 1, bsq.v);
    let phi0 = family.jet(0, s.v);
    let phi1 = family.jet(1, s.v);
    let phi2 = family.jet(2, s.v);
    let denom = phi0.sub(&sv.mul(&phi1));
    if denom.value() == 0.0 {
        return Err(Error::SingularPhi {
            what: "phi - s phi'",
            s: s.v,
        });
    }
    let omega = phi1.div(&denom);
    let domega = phi0.mul(&phi2).div(&denom.mul(&denom));
    let theta_den = Jet2::constant(2, 1.0)
        .add(&sv.mul(&omega))
        .add(&tv.sub(&sv.mul(&sv)).mul(&domega))
        .scale(2.0);
    if theta_den.value() == 0.0 {
        return Err(Error::SingularPhi {
            what: "theta denominator",
            s: s.v,
        });
    }
    let theta = omega.sub(&sv.mul(&domega)).div(&theta_den);
    let cden = omega.sub(&sv.mul(&domega));
    if cden.value() == 0.0 {
        return Err(Error::SingularPhi {
            what: "omega - s omega'",
            s: s.v,
        });
    }
    let c = domega.div(&cden);
    Ok((
        TJet::compose2(&omega, s, bsq),
        TJet::compose2(&theta, s, bsq),
        TJet::compose2(&c, s, bsq),
    ))
}

/// Spray `G^i` tangent jets of an arbitrary φ-family over `(metric, form)`,
/// without any Kropina-specific context. The regression guard for the shared
/// engine calls this with the Randers family and `b ≡ 0`.
pub fn alpha_beta_spray(
    metric: &MetricField,
    form: &OneFormField,
    family: PhiFamily,
    route: SprayRoute,
    x: &[f64],
    y: &[f64],
) -> Result<Vec<TJet>> {
    let eval = riemann::metric_at(metric, x)?;
    let gamma = riemann::christoffel_from_jets(eval.dimension(), &eval.a, &eval.a_inv);
    let b = form.eval(x)?;
    let n = eval.dimension();
    let b_upper: Vec<Jet2> = (0..n)
        .map(|i| {
            let mut up = Jet2::constant(n, 0.0);
            for j in 0..n {
                up = up.add(&eval.a_inv_jet(i, j).mul(&b[j]));
            }
            up
        })
        .collect();
    let inv = riemann::beta_invariants_parts(&eval, &gamma, &b);
    let guard = match family {
        PhiFamily::GeneralizedKropina { .. } => Some(DomainOptions::default().eps_beta),
        PhiFamily::Randers => None,
    };
    let parts = spray_g_parts(&eval, &gamma, &b, &b_upper, &inv, family, route, y, guard)?;
    Ok(parts.g)
}

/// Spray coefficients, deviation tensor and their jets at `(x, y)`.
///
/// `Φ^i = G^i - ½ ^hγ^i_00` holds exactly by construction.
#[derive(Debug, Clone)]
pub struct SprayData {
    n: usize,
    /// `^αγ^i_00`.
    pub gamma00_alpha: Vec<f64>,
    /// `^hγ^i_00`.
    pub gamma00_h: Vec<f64>,
    /// `G^i` with tangent jets.
    pub g: Vec<TJet>,
    /// `Φ^i` with tangent jets.
    pub phi: Vec<TJet>,
    /// `F` with tangent jets.
    pub f: TJet,
    pub alpha: f64,
    pub beta: f64,
    pub s: f64,
    /// Connection context reused by the curvature layer.
    pub conn: HConnection,
    pub inv: BetaInvariants,
}

impl SprayData {
    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn g_values(&self) -> Vec<f64> {
        self.g.iter().map(|j| j.v).collect()
    }

    pub fn phi_values(&self) -> Vec<f64> {
        self.phi.iter().map(|j| j.v).collect()
    }
}

// ---------------------------------------------------------------------------
// h/W representation
// ---------------------------------------------------------------------------

/// The conformal `(h, W)` data at a point: `h_ij = e^k a_ij`,
/// `W_i = ½ e^k b_i`, `k = ln(4/b²)`.
#[derive(Debug, Clone)]
pub struct HWData {
    n: usize,
    pub m: f64,
    /// Conformal exponent jet.
    pub k: Jet2,
    /// Dense `h_ij` values.
    pub h: Vec<f64>,
    /// Dense `h^{ij}` values.
    pub h_inv: Vec<f64>,
    /// `W_i` with coordinate gradients.
    pub w: Vec<Jet1>,
    /// `W^i = h^{ij} W_j` values.
    pub w_upper: Vec<f64>,
    /// `k̄^i = h^{ij} k_j` values.
    pub kbar_upper: Vec<f64>,
    /// `π = e^{(m-1)k/2}/2^m`.
    pub pi_const: f64,
    /// `ε = (e^k)^{(m-1)/2}`.
    pub eps_const: f64,
    /// `σ₀` with the printed exponent `(m-1)/m`.
    pub sigma0_printed: f64,
    /// `σ₀` with the dimensional-bookkeeping exponent `(m-1)/2`.
    pub sigma0_alt: f64,
    pub bsq: f64,
}

impl HWData {
    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn h00(&self, y: &[f64]) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                sum += self.h[i * self.n + j] * y[i] * y[j];
            }
        }
        sum
    }

    pub fn w0(&self, y: &[f64]) -> f64 {
        self.w.iter().zip(y).map(|(w, yi)| w.v * yi).sum()
    }

    pub fn k0(&self, y: &[f64]) -> f64 {
        self.k.grad().iter().zip(y).map(|(k, yi)| k * yi).sum()
    }

    /// `‖W‖²_h = h^{ij} W_i W_j`.
    pub fn w_norm_sq(&self) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                sum += self.h_inv[i * self.n + j] * self.w[i].v * self.w[j].v;
            }
        }
        sum
    }

    /// `F = π h_00^{(m+1)/2} / W_0^m`.
    pub fn f_from_hw(&self, y: &[f64]) -> f64 {
        self.pi_const * self.h00(y).powf((self.m + 1.0) / 2.0) / self.w0(y).powf(self.m)
    }

    /// `σ₁ = 2ms/(s² - ms² + mb²)`.
    pub fn sigma1(&self, s: f64) -> f64 {
        sigma1(self.m, s, self.bsq)
    }
}

fn hw_from_connection(conn: &HConnection, m: f64) -> Result<HWData> {
    let n = conn.dimension();
    let k = conn.k.clone();
    let ek = k.value().exp();
    let mut h = vec![0.0; n * n];
    let mut h_inv = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] = ek * conn.eval.a_val(i, j);
            h_inv[i * n + j] = conn.eval.a_inv_val(i, j) / ek;
        }
    }
    let ek_jet1 = Jet1::from_jet2(&k.exp());
    let w: Vec<Jet1> = (0..n)
        .map(|i| {
            ek_jet1
                .mul(&Jet1::from_jet2(&conn.b_lower[i]))
                .scale(0.5)
        })
        .collect();
    let w_upper: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| h_inv[i * n + j] * w[j].v).sum())
        .collect();
    let kbar_upper: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| h_inv[i * n + j] * k.grad()[j]).sum())
        .collect();
    let kv = k.value();
    let pi_const = ((m - 1.0) * kv / 2.0).exp() / 2.0_f64.powf(m);
    let eps_const = ((m - 1.0) * kv / 2.0).exp();
    let sigma0_printed = (m / (m + 1.0)) * ((m - 1.0) / m * kv).exp() / 2.0_f64.powf(m - 1.0);
    let sigma0_alt = (m / (m + 1.0)) * ((m - 1.0) / 2.0 * kv).exp() / 2.0_f64.powf(m - 1.0);
    Ok(HWData {
        n,
        m,
        k,
        h,
        h_inv,
        w,
        w_upper,
        kbar_upper,
        pi_const,
        eps_const,
        sigma0_printed,
        sigma0_alt,
        bsq: conn.bsq.value(),
    })
}

// ---------------------------------------------------------------------------
// Killing invariants of W under the h-connection
// ---------------------------------------------------------------------------

/// `R_ij = (W_{i‖j} + W_{j‖i})/2`, `S_ij = (W_{i‖j} - W_{j‖i})/2` and their
/// contractions, all under the Levi-Civita connection of `h`.
#[derive(Debug, Clone)]
pub struct KillingInvariants {
    n: usize,
    /// `W_{i‖j}` at `[i*n + j]`.
    pub w_cov: Vec<f64>,
    /// `R_ij`, symmetric exactly.
    pub r_cap: Vec<f64>,
    /// `S_ij`, antisymmetric exactly.
    pub s_cap: Vec<f64>,
    /// `S^i_j = h^{ir} S_rj`.
    pub s_cap_mixed: Vec<f64>,
    /// `R_i = W^r R_ri`.
    pub r_low: Vec<f64>,
    /// `S_i = W^r S_ri`.
    pub s_low: Vec<f64>,
    /// `R^i = h^{ir} R_r`.
    pub r_up: Vec<f64>,
    /// `S^i = h^{ir} S_r`.
    pub s_up: Vec<f64>,
}

impl KillingInvariants {
    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn r00(&self, y: &[f64]) -> f64 {
        let n = self.n;
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                sum += self.r_cap[i * n + j] * y[i] * y[j];
            }
        }
        sum
    }

    pub fn s0_low(&self, y: &[f64]) -> f64 {
        self.s_low.iter().zip(y).map(|(s, yi)| s * yi).sum()
    }

    /// `S^i_0 = S^i_j y^j`.
    pub fn s_mixed0(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|j| self.s_cap_mixed[i * n + j] * y[j]).sum())
            .collect()
    }

    pub fn max_abs_r(&self) -> f64 {
        self.r_cap.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Killing invariants of `W` from the h-connection context.
pub fn killing_invariants(conn: &HConnection, hw: &HWData) -> KillingInvariants {
    let n = conn.dimension();
    let gamma_h = &conn.gamma_h;
    // W_{i‖j} = ∂_j W_i - ^hγ^r_{ij} W_r (W depends on x alone).
    let mut w_cov = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut v = hw.w[i].g[j];
            for r in 0..n {
                v -= gamma_h.get(r, i, j) * hw.w[r].v;
            }
            w_cov[i * n + j] = v;
        }
    }
    let mut r_cap = vec![0.0; n * n];
    let mut s_cap = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let sym = 0.5 * (w_cov[i * n + j] + w_cov[j * n + i]);
            r_cap[i * n + j] = sym;
            r_cap[j * n + i] = sym;
            let anti = 0.5 * (w_cov[i * n + j] - w_cov[j * n + i]);
            s_cap[i * n + j] = anti;
            s_cap[j * n + i] = -anti;
        }
    }
    let mut s_cap_mixed = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            s_cap_mixed[i * n + j] = (0..n).map(|r| hw.h_inv[i * n + r] * s_cap[r * n + j]).sum();
        }
    }
    let r_low: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|r| hw.w_upper[r] * r_cap[r * n + i]).sum())
        .collect();
    let s_low: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|r| hw.w_upper[r] * s_cap[r * n + i]).sum())
        .collect();
    let r_up: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|r| hw.h_inv[i * n + r] * r_low[r]).sum())
        .collect();
    let s_up: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|r| hw.h_inv[i * n + r] * s_low[r]).sum())
        .collect();
    KillingInvariants {
        n,
        w_cov,
        r_cap,
        s_cap,
        s_cap_mixed,
        r_low,
        s_low,
        r_up,
        s_up,
    }
}

// ---------------------------------------------------------------------------
// Printed-expansion diagnostics
// ---------------------------------------------------------------------------

/// One row of the diagnostics table: a labelled residual, never asserted.
#[derive(Debug, Clone)]
pub struct DiagnosticRow {
    pub label: String,
    pub residual: f64,
    pub relative: f64,
}

/// Residuals of the printed A-family decomposition
/// `2Φ^i h_00^{(m+1)/2} W_0^m = A₁^i h_00^{m+1} + A₂^i h_00^{(m+1)/2} W_0^m + A₃^i W_0^{2m}`
/// against the ground-truth deviation tensor from the spray formula, for
/// both readings of the `σ₀` exponent. Reporting only: the printed
/// expansion is not used anywhere in the computation pipeline.
pub fn paper_expansion_diagnostics(
    k: &KropinaMetric,
    x: &[f64],
    y: &[f64],
) -> Result<Vec<DiagnosticRow>> {
    let n = k.dimension();
    let m = k.exponent();
    let spray = k.spray_alpha_beta(x, y)?;
    let hw = hw_from_connection(&spray.conn, m)?;
    let killing = killing_invariants(&spray.conn, &hw);

    let h00 = hw.h00(y);
    let w0 = hw.w0(y);
    let k0 = hw.k0(y);
    let s = spray.s;
    let sig1 = hw.sigma1(s);
    let r00 = killing.r00(y);
    let s0 = killing.s0_low(y);
    let si0 = killing.s_mixed0(y);
    let wk: f64 = (0..n).map(|r| hw.w[r].v * hw.kbar_upper[r]).sum();

    let lhs: Vec<f64> = spray
        .phi
        .iter()
        .map(|phi| 2.0 * phi.v * h00.powf((m + 1.0) / 2.0) * w0.powf(m))
        .collect();
    let lhs_scale = lhs.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())).max(1e-300);

    let mut rows = Vec::new();
    for (label, sigma0) in [
        ("A-expansion, sigma0 exponent (m-1)/m as printed", hw.sigma0_printed),
        ("A-expansion, sigma0 exponent (m-1)/2 variant", hw.sigma0_alt),
    ] {
        let mut worst = 0.0_f64;
        for i in 0..n {
            let a1 = -2.0 * sigma0 * si0[i] - sigma0 * w0 * hw.kbar_upper[i]
                + sigma0 * k0 * hw.w_upper[i]
                + 2.0 * sigma0 * sig1 * s0 * hw.w_upper[i];
            let a2 = -k0 * y[i] + 0.5 * h00 * hw.kbar_upper[i]
                + sig1 * r00 * 2.0 * hw.w_upper[i];
            let a3 = -4.0 * sig1 * r00 * y[i]
                + 2.0 * sig1 * h00 * wk * y[i]
                + 0.5 * sig1 * h00.powf((m + 3.0) / 2.0) * wk * 2.0 * hw.w_upper[i];
            let rhs = a1 * h00.powf(m + 1.0)
                + a2 * h00.powf((m + 1.0) / 2.0) * w0.powf(m)
                + a3 * w0.powf(2.0 * m);
            worst = worst.max((lhs[i] - rhs).abs());
        }
        rows.push(DiagnosticRow {
            label: label.to_string(),
            residual: worst,
            relative: worst / lhs_scale,
        });
    }
    Ok(rows)
}
