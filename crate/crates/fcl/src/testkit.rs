//! Instance builders shared by the unit, property and acceptance tests.
//!
//! The expression sources here match the metric files shipped in `metrics/`;
//! tests that go through the CLI parse those files, tests that exercise the
//! library directly build the same instances from this module.

use rand::Rng;

use crate::kropina::KropinaMetric;
use crate::riemann::{MetricField, OneFormField};

/// Flat metric with a parallel 1-form of length 2 (`b² = 4`, so the
/// conformal exponent vanishes identically).
pub fn flat_parallel(m: f64) -> KropinaMetric {
    let metric = MetricField::from_sources(2, &["1", "0", "1"]).unwrap();
    let form = OneFormField::from_sources(2, &["2", "0"]).unwrap();
    KropinaMetric::new(metric, form, m).unwrap()
}

/// Unit 2-sphere in polar coordinates `(θ, φ)`, `a = diag(1, sin²θ)`.
pub fn sphere_polar(radius: f64) -> MetricField {
    let r2 = radius * radius;
    MetricField::from_sources(2, &[&format!("{r2}"), "0", &format!("{r2}*sin(x1)^2")]).unwrap()
}

/// Round 3-sphere of curvature +1 in stereographic coordinates together with
/// twice the unit Hopf Killing one-form; the classical Kropina space of
/// constant flag curvature (`m = 1`).
pub fn hopf_s3() -> KropinaMetric {
    let q = "(1 + x1^2 + x2^2 + x3^2)";
    let diag = format!("4/{q}^2");
    let metric = MetricField::from_sources(3, &[&diag, "0", &diag, "0", "0", &diag]).unwrap();
    let form = OneFormField::from_sources(
        3,
        &[
            &format!("8*(x1*x3 - x2)/{q}^2"),
            &format!("8*(x2*x3 + x1)/{q}^2"),
            &format!("4*(1 + x3^2 - x1^2 - x2^2)/{q}^2"),
        ],
    )
    .unwrap();
    KropinaMetric::new(metric, form, 1.0).unwrap()
}

/// Flat metric with a non-Killing 1-form: the negative control that must
/// fail the constant-curvature check.
pub fn perturbed_b() -> KropinaMetric {
    let metric = MetricField::from_sources(2, &["1", "0", "1"]).unwrap();
    let form = OneFormField::from_sources(2, &["1 + 0.1*x2", "0"]).unwrap();
    KropinaMetric::new(metric, form, 1.0).unwrap()
}

/// Random analytic metric `δ_ij + ε`-perturbation, positive definite on
/// `|x| ≲ 1.5`, as expression sources.
pub fn random_metric_sources(n: usize, rng: &mut impl Rng) -> Vec<String> {
    let mut sources = Vec::new();
    for i in 0..n {
        for j in 0..=i {
            let c1 = rng.gen_range(-0.5..0.5);
            let c2 = rng.gen_range(-2.0..2.0);
            let v = 1 + (i + j) % n;
            let term = format!("0.1*({c1})*sin(({c2})*x{v} + x{})", j + 1);
            if i == j {
                sources.push(format!("1 + 0.2*cos(x{})^2 + {term}", i + 1));
            } else {
                sources.push(term);
            }
        }
    }
    sources
}

/// Random analytic 1-form bounded away from zero, as expression sources.
/// The leading constant keeps `β` sign-definite over moderate boxes.
pub fn random_form_sources(n: usize, rng: &mut impl Rng) -> Vec<String> {
    (0..n)
        .map(|i| {
            let c = rng.gen_range(-0.3..0.3);
            let v = 1 + (i + 1) % n;
            if i == 0 {
                format!("2 + ({c})*sin(x{v})")
            } else {
                format!("({c})*cos(x{v})")
            }
        })
        .collect()
}

/// Random generalized Kropina instance on dimension `n`.
pub fn random_instance(n: usize, m: f64, rng: &mut impl Rng) -> KropinaMetric {
    let a: Vec<String> = random_metric_sources(n, rng);
    let b: Vec<String> = random_form_sources(n, rng);
    let a_refs: Vec<&str> = a.iter().map(String::as_str).collect();
    let b_refs: Vec<&str> = b.iter().map(String::as_str).collect();
    let metric = MetricField::from_sources(n, &a_refs).unwrap();
    let form = OneFormField::from_sources(n, &b_refs).unwrap();
    KropinaMetric::new(metric, form, m).unwrap()
}

/// A point in the box `|x_i| <= 0.8` and a direction in the Kropina cone
/// (`β > 0`, `s` away from the window edges), drawn with rejection.
pub fn admissible_point(k: &KropinaMetric, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    let n = k.dimension();
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.8..0.8)).collect();
        for _ in 0..64 {
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if k.direction_admissible(&x, &y).unwrap_or(false) {
                return (x, y);
            }
        }
    }
}
