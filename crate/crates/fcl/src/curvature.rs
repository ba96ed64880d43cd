//! Spray (Berwald) curvature, flag-curvature estimation, the
//! constant-curvature sampling verdict and a geodesic integrator.
//!
//! The curvature of a spray `G^i(x, y)` is taken in the transvected form
//!
//! ```text
//! R^i_l = 2 ∂G^i/∂x^l - y^j ∂²G^i/∂x^j∂y^l + 2 G^j ∂²G^i/∂y^j∂y^l
//!         - (∂G^i/∂y^j)(∂G^j/∂y^l) ,
//! ```
//!
//! which agrees with assembling the full Berwald tensor from
//! `G^i_{jk} = ∂²G^i/∂y^j∂y^k` and transvecting afterwards (the two are tied
//! by 2-homogeneity; the test suite demonstrates the agreement on a curved
//! example). A space is of scalar curvature `K` when
//! `R^i_l = K F² (δ^i_l - l^i l_l)` with `l^i = y^i/F`, `l_l = ∂F/∂y^l`;
//! constancy of `K` across the sampled cone is the verdict this module
//! produces.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jets::TJet;
use crate::kropina::KropinaMetric;
use crate::riemann::{self, MetricField};

/// A source of spray coefficients with tangent-bundle jets.
pub trait SprayEvaluator: Sync {
    fn dimension(&self) -> usize;

    /// `G^i(x, y)` as tangent jets (value, x- and y-gradients, mixed and
    /// fiber second derivatives).
    fn spray_jets(&self, x: &[f64], y: &[f64]) -> Result<Vec<TJet>>;

    /// The metric function whose geodesics the spray generates, as a tangent
    /// jet (`F` for Finsler instances, `α` for Riemannian ones).
    fn metric_jet(&self, x: &[f64], y: &[f64]) -> Result<TJet>;
}

impl SprayEvaluator for KropinaMetric {
    fn dimension(&self) -> usize {
        self.dimension()
    }

    fn spray_jets(&self, x: &[f64], y: &[f64]) -> Result<Vec<TJet>> {
        Ok(self.spray_alpha_beta(x, y)?.g)
    }

    fn metric_jet(&self, x: &[f64], y: &[f64]) -> Result<TJet> {
        Ok(self.spray_alpha_beta(x, y)?.f)
    }
}

/// The Riemannian baseline: `G^i = ½ γ^i_00`, `F = α`. Used to run the
/// curvature engine with the (α,β)-layer bypassed.
#[derive(Debug, Clone)]
pub struct RiemannianSpray {
    metric: MetricField,
}

impl RiemannianSpray {
    pub fn new(metric: MetricField) -> Self {
        RiemannianSpray { metric }
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> Result<(Vec<TJet>, TJet)> {
        let eval = riemann::metric_at(&self.metric, x)?;
        let n = eval.dimension();
        let gamma = riemann::christoffel_from_jets(n, &eval.a, &eval.a_inv);
        let y_jets: Vec<TJet> = (0..n).map(|j| TJet::y_coordinate(n, j, y[j])).collect();
        let mut alpha2 = TJet::constant(n, 0.0);
        for i in 0..n {
            for j in 0..n {
                let aij = eval.a_jet(i, j);
                let lifted = TJet::from_x_field(n, aij.value(), aij.grad());
                alpha2 = alpha2.add(&lifted.mul(&y_jets[i]).mul(&y_jets[j]));
            }
        }
        let g = (0..n)
            .map(|i| {
                let mut acc = TJet::constant(n, 0.0);
                for j in 0..n {
                    for k in 0..n {
                        let coeff = TJet::from_jet1(&gamma.jet1(i, j, k));
                        acc = acc.add(&coeff.mul(&y_jets[j]).mul(&y_jets[k]));
                    }
                }
                acc.scale(0.5)
            })
            .collect();
        Ok((g, alpha2.sqrt()))
    }
}

impl SprayEvaluator for RiemannianSpray {
    fn dimension(&self) -> usize {
        self.metric.dimension()
    }

    fn spray_jets(&self, x: &[f64], y: &[f64]) -> Result<Vec<TJet>> {
        Ok(self.eval(x, y)?.0)
    }

    fn metric_jet(&self, x: &[f64], y: &[f64]) -> Result<TJet> {
        Ok(self.eval(x, y)?.1)
    }
}

/// Transvected spray curvature `R^i_l` as a dense mixed matrix `[i*n + l]`.
pub fn berwald_curvature(g: &[TJet], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for l in 0..n {
            let mut v = 2.0 * g[i].dx()[l];
            for j in 0..n {
                v -= y[j] * g[i].dxy(j, l);
                v += 2.0 * g[j].v * g[i].dyy(j, l);
                v -= g[i].dy()[j] * g[j].dy()[l];
            }
            out[i * n + l] = v;
        }
    }
    out
}

/// Flag projection `h^i_l = δ^i_l - l^i l_l` with `l^i = y^i/F` and
/// `l_l = ∂F/∂y^l` taken from the jet of `F`.
pub fn flag_projection(f: &TJet, y: &[f64]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        for l in 0..n {
            let delta = if i == l { 1.0 } else { 0.0 };
            h[i * n + l] = delta - y[i] * f.dy()[l] / f.v;
        }
    }
    (h, f.v)
}

/// Least-squares fit of `R^i_l = K F² h^i_l`: `K` from the trace and the
/// relative Frobenius residual of the fit.
pub fn estimate_k(r_mixed: &[f64], f: f64, h_mixed: &[f64], n: usize) -> (f64, f64) {
    let trace: f64 = (0..n).map(|i| r_mixed[i * n + i]).sum();
    let k_fit = trace / (f * f * (n as f64 - 1.0));
    let mut num = 0.0;
    let mut den = 0.0;
    for idx in 0..n * n {
        let fit = k_fit * f * f * h_mixed[idx];
        num += (r_mixed[idx] - fit) * (r_mixed[idx] - fit);
        den += r_mixed[idx] * r_mixed[idx];
    }
    let rel_residual = num.sqrt() / den.sqrt().max(1e-300);
    (k_fit, rel_residual)
}

/// The five deviation-tensor ingredients of the pointwise curvature
/// decomposition, each an `n×n` mixed matrix, plus the h-curvature
/// transvection and the assembled `R^i_l`.
#[derive(Debug, Clone)]
pub struct PhiDerivativeSuite {
    pub n: usize,
    /// `Φ^i‖l`.
    pub phi_cov: Vec<f64>,
    /// `Φ^i_l = ∂Φ^i/∂y^l`.
    pub phi_y: Vec<f64>,
    /// `Φ^i_{l‖0}`.
    pub phi_y_cov0: Vec<f64>,
    /// `Φ^r_l Φ^i_r`.
    pub phi_phi: Vec<f64>,
    /// `Φ^r Φ_r{}^i{}_l`.
    pub phi_phi_y: Vec<f64>,
    /// `^hR_0{}^i{}_{0l}`.
    pub r_h: Vec<f64>,
    /// `^hR_0{}^i{}_{0l} + 2Φ^i‖l - Φ^i_{l‖0} + 2Φ^r Φ_r{}^i{}_l - Φ^r_l Φ^i_r`.
    pub assembled: Vec<f64>,
}

/// Computes the deviation-tensor derivative family by composing jet
/// differentiation with the h-covariant derivative; assembling them
/// reproduces the spray curvature through the decomposition
/// `R^i_l = ^hR_0{}^i{}_{0l} + 2Φ^i‖l - Φ^i_{l‖0} + 2Φ^rΦ_r{}^i{}_l - Φ^r_lΦ^i_r`.
pub fn phi_derivative_suite(k: &KropinaMetric, x: &[f64], y: &[f64]) -> Result<PhiDerivativeSuite> {
    let spray = k.spray_alpha_beta(x, y)?;
    let n = spray.dimension();
    let gamma_h = &spray.conn.gamma_h;
    let nonlinear = gamma_h.nonlinear_connection(y); // N^i_j
    let two_h = &spray.gamma00_h; // 2H^s = ^hγ^s_00
    let phi = &spray.phi;

    let mut phi_cov = vec![0.0; n * n];
    let mut phi_y = vec![0.0; n * n];
    let mut phi_y_cov0 = vec![0.0; n * n];
    let mut phi_phi = vec![0.0; n * n];
    let mut phi_phi_y = vec![0.0; n * n];
    for i in 0..n {
        for l in 0..n {
            // Φ^i‖l = ∂_l Φ^i - N^s_l Φ^i_s + γ^i_{ls} Φ^s
            let mut cov = phi[i].dx()[l];
            for s in 0..n {
                cov -= nonlinear[s * n + l] * phi[i].dy()[s];
                cov += gamma_h.get(i, l, s) * phi[s].v;
            }
            phi_cov[i * n + l] = cov;

            phi_y[i * n + l] = phi[i].dy()[l];

            // Φ^i_{l‖0} = y^j ∂_j Φ^i_l - 2H^s Φ^i_{ls} + N^i_s Φ^s_l - N^s_l Φ^i_s
            let mut cov0 = 0.0;
            for j in 0..n {
                cov0 += y[j] * phi[i].dxy(j, l);
            }
            for s in 0..n {
                cov0 -= two_h[s] * phi[i].dyy(l, s);
                cov0 += nonlinear[i * n + s] * phi[s].dy()[l];
                cov0 -= nonlinear[s * n + l] * phi[i].dy()[s];
            }
            phi_y_cov0[i * n + l] = cov0;

            let mut pp = 0.0;
            let mut ppy = 0.0;
            for r in 0..n {
                pp += phi[r].dy()[l] * phi[i].dy()[r];
                ppy += phi[r].v * phi[i].dyy(r, l);
            }
            phi_phi[i * n + l] = pp;
            phi_phi_y[i * n + l] = ppy;
        }
    }

    let r_h = riemann::riemann_curvature_of(gamma_h).transvect_yy(y);
    let assembled: Vec<f64> = (0..n * n)
        .map(|idx| {
            r_h[idx] + 2.0 * phi_cov[idx] - phi_y_cov0[idx] + 2.0 * phi_phi_y[idx] - phi_phi[idx]
        })
        .collect();

    Ok(PhiDerivativeSuite {
        n,
        phi_cov,
        phi_y,
        phi_y_cov0,
        phi_phi,
        phi_phi_y,
        r_h,
        assembled,
    })
}

// ---------------------------------------------------------------------------
// Constant-curvature verdict by dense sampling
// ---------------------------------------------------------------------------

/// What the curvature engine runs on.
pub enum CurvatureInstance {
    Kropina(KropinaMetric),
    Riemannian(RiemannianSpray),
}

impl CurvatureInstance {
    pub fn dimension(&self) -> usize {
        match self {
            CurvatureInstance::Kropina(k) => k.dimension(),
            CurvatureInstance::Riemannian(r) => r.dimension(),
        }
    }

    fn eval_point(&self, x: &[f64], y: &[f64]) -> Result<(Vec<TJet>, TJet)> {
        match self {
            CurvatureInstance::Kropina(k) => {
                let spray = k.spray_alpha_beta(x, y)?;
                Ok((spray.g, spray.f))
            }
            CurvatureInstance::Riemannian(r) => r.eval(x, y),
        }
    }

    fn admissible(&self, x: &[f64], y: &[f64]) -> Result<bool> {
        match self {
            CurvatureInstance::Kropina(k) => k.direction_admissible(x, y),
            CurvatureInstance::Riemannian(_) => Ok(true),
        }
    }
}

/// Sampling configuration for [`constant_curvature_check`].
#[derive(Debug, Clone)]
pub struct SampleConfig {
    pub samples: usize,
    pub seed: u64,
    pub tol_residual: f64,
    pub tol_k: f64,
    pub threads: usize,
    /// Per-coordinate box `[lo, hi]`.
    pub domain: Vec<(f64, f64)>,
    pub max_rejects: usize,
}

impl SampleConfig {
    pub fn new(domain: Vec<(f64, f64)>) -> Self {
        SampleConfig {
            samples: 200,
            seed: 0,
            tol_residual: 1e-6,
            tol_k: 1e-4,
            threads: 1,
            domain,
            max_rejects: 10_000,
        }
    }
}

/// One evaluated sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub index: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub f: f64,
    pub k_fit: f64,
    pub rel_residual: f64,
    /// Rejected draws before an admissible direction was found.
    pub rejects: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckSummary {
    pub pass: bool,
    pub samples: usize,
    pub k_median: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub k_spread: f64,
    pub max_residual: f64,
    pub tol_residual: f64,
    pub tol_k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub rows: Vec<SampleRow>,
    pub summary: CheckSummary,
}

/// Draws `samples` point-direction pairs (x uniform in the box, y uniform on
/// the unit sphere, rejecting inadmissible directions), fits `K` per sample
/// and aggregates the verdict:
/// pass iff `max rel_residual < tol_residual` and
/// `k_max - k_min < tol_k (1 + |k_median|)`.
///
/// Each sample owns a dedicated RNG stream derived from `(seed, index)`, so
/// the report is bit-identical for any thread count.
pub fn constant_curvature_check(
    instance: &CurvatureInstance,
    config: &SampleConfig,
) -> Result<CheckReport> {
    let n = instance.dimension();
    if config.domain.len() != n {
        return Err(Error::DimensionMismatch {
            what: format!(
                "domain has {} coordinate ranges, instance dimension is {n}",
                config.domain.len()
            ),
        });
    }

    let run = || -> Result<Vec<SampleRow>> {
        (0..config.samples)
            .into_par_iter()
            .map(|index| evaluate_sample(instance, config, index))
            .collect()
    };
    let rows = if config.threads == 0 {
        run()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .expect("thread pool")
            .install(run)?
    };

    let mut ks: Vec<f64> = rows.iter().map(|r| r.k_fit).collect();
    ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k_median = if ks.len() % 2 == 1 {
        ks[ks.len() / 2]
    } else {
        0.5 * (ks[ks.len() / 2 - 1] + ks[ks.len() / 2])
    };
    let k_min = *ks.first().unwrap();
    let k_max = *ks.last().unwrap();
    let k_spread = k_max - k_min;
    let max_residual = rows
        .iter()
        .map(|r| r.rel_residual)
        .fold(0.0_f64, f64::max);
    let pass = max_residual < config.tol_residual
        && k_spread < config.tol_k * (1.0 + k_median.abs());

    Ok(CheckReport {
        rows,
        summary: CheckSummary {
            pass,
            samples: config.samples,
            k_median,
            k_min,
            k_max,
            k_spread,
            max_residual,
            tol_residual: config.tol_residual,
            tol_k: config.tol_k,
        },
    })
}

fn evaluate_sample(
    instance: &CurvatureInstance,
    config: &SampleConfig,
    index: usize,
) -> Result<SampleRow> {
    let n = instance.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64 + 1);

    let mut rejects = 0usize;
    let (x, y) = loop {
        if rejects >= config.max_rejects {
            return Err(Error::EmptySample {
                sample: index,
                attempts: rejects,
            });
        }
        let x: Vec<f64> = config
            .domain
            .iter()
            .map(|(lo, hi)| rng.gen_range(*lo..*hi))
            .collect();
        let y = unit_sphere_direction(n, &mut rng);
        match instance.admissible(&x, &y) {
            Ok(true) => break (x, y),
            Ok(false) => rejects += 1,
            Err(e) => {
                return Err(Error::SampleFailed {
                    sample: index,
                    point: x,
                    source: Box::new(e),
                })
            }
        }
    };

    let (g, f) = instance.eval_point(&x, &y).map_err(|e| Error::SampleFailed {
        sample: index,
        point: x.clone(),
        source: Box::new(e),
    })?;
    let r = berwald_curvature(&g, &y);
    let (h_mixed, f_val) = flag_projection(&f, &y);
    let (k_fit, rel_residual) = estimate_k(&r, f_val, &h_mixed, n);
    Ok(SampleRow {
        index,
        x,
        y,
        f: f_val,
        k_fit,
        rel_residual,
        rejects,
    })
}

/// Uniform direction on the unit sphere via normalized Box-Muller Gaussians.
fn unit_sphere_direction(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let mut v = Vec::with_capacity(n);
        while v.len() < n {
            let u1: f64 = rng.gen::<f64>().max(1e-300);
            let u2: f64 = rng.gen();
            let radius = (-2.0 * u1.ln()).sqrt();
            let angle = 2.0 * std::f64::consts::PI * u2;
            v.push(radius * angle.cos());
            if v.len() < n {
                v.push(radius * angle.sin());
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

// ---------------------------------------------------------------------------
// Geodesic integration
// ---------------------------------------------------------------------------

/// Why a trajectory stopped early.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitReason {
    /// Left the coordinate chart box.
    Chart,
    /// Left the conic domain (or another evaluation failure).
    Cone,
}

#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub f: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    /// `max |F(t) - F(0)| / |F(0)|` along the trajectory.
    pub f_drift_rel: f64,
    pub exit: Option<ExitReason>,
}

/// Classical fixed-step 4th-order integration of `ẍ^i + 2G^i(x, ẋ) = 0`.
/// Truncates with a flag when the state leaves `box_domain` or the conic
/// domain.
pub fn geodesic_integrate(
    instance: &CurvatureInstance,
    x0: &[f64],
    y0: &[f64],
    t_end: f64,
    dt: f64,
    box_domain: Option<&[(f64, f64)]>,
) -> Result<Trajectory> {
    assert!(dt > 0.0, "dt must be positive");
    let n = instance.dimension();
    let deriv = |x: &[f64], y: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let (g, _) = instance.eval_point(x, y)?;
        Ok((y.to_vec(), g.iter().map(|gi| -2.0 * gi.v).collect()))
    };
    let f_at = |x: &[f64], y: &[f64]| -> Result<f64> {
        Ok(instance.eval_point(x, y)?.1.v)
    };

    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let f0 = f_at(&x, &y)?;
    let mut points = vec![TrajectoryPoint {
        t: 0.0,
        x: x.clone(),
        y: y.clone(),
        f: f0,
    }];
    let mut drift = 0.0_f64;
    let mut exit = None;
    let steps = (t_end / dt).round() as usize;

    'outer: for step in 1..=steps {
        let stage = |xs: &[f64], ys: &[f64]| deriv(xs, ys);
        let k1 = stage(&x, &y);
        let (k1x, k1y) = match k1 {
            Ok(v) => v,
            Err(e) if e.is_numerical() => {
                exit = Some(ExitReason::Cone);
                break 'outer;
            }
            Err(e) => return Err(e),
        };
        let half = dt / 2.0;
        let probe = |xs: &Vec<f64>, ys: &Vec<f64>, dx: &Vec<f64>, dy: &Vec<f64>, h: f64| {
            let xn: Vec<f64> = xs.iter().zip(dx).map(|(a, d)| a + h * d).collect();
            let yn: Vec<f64> = ys.iter().zip(dy).map(|(a, d)| a + h * d).collect();
            (xn, yn)
        };
        let (x2, y2) = probe(&x, &y, &k1x, &k1y, half);
        let (k2x, k2y) = match stage(&x2, &y2) {
            Ok(v) => v,
            Err(e) if e.is_numerical() => {
                exit = Some(ExitReason::Cone);
                break 'outer;
            }
            Err(e) => return Err(e),
        };
        let (x3, y3) = probe(&x, &y, &k2x, &k2y, half);
        let (k3x, k3y) = match stage(&x3, &y3) {
            Ok(v) => v,
            Err(e) if e.is_numerical() => {
                exit = Some(ExitReason::Cone);
                break 'outer;
            }
            Err(e) => return Err(e),
        };
        let (x4, y4) = probe(&x, &y, &k3x, &k3y, dt);
        let (k4x, k4y) = match stage(&x4, &y4) {
            Ok(v) => v,
            Err(e) if e.is_numerical() => {
                exit = Some(ExitReason::Cone);
                break 'outer;
            }
            Err(e) => return Err(e),
        };
        for i in 0..n {
            x[i] += dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            y[i] += dt / 6.0 * (k1y[i] + 2.0 * k2y[i] + 2.0 * k3y[i] + k4y[i]);
        }
        if let Some(bounds) = box_domain {
            if x.iter().zip(bounds).any(|(xi, (lo, hi))| xi < lo || xi > hi) {
                exit = Some(ExitReason::Chart);
                break 'outer;
            }
        }
        let f = match f_at(&x, &y) {
            Ok(f) => f,
            Err(e) if e.is_numerical() => {
                exit = Some(ExitReason::Cone);
                break 'outer;
            }
            Err(e) => return Err(e),
        };
        drift = drift.max((f - f0).abs() / f0.abs().max(1e-300));
        points.push(TrajectoryPoint {
            t: step as f64 * dt,
            x: x.clone(),
            y: y.clone(),
            f,
        });
    }

    Ok(Trajectory {
        points,
        f_drift_rel: drift,
        exit,
    })
}

#[cfg(test)]
mod tests;
