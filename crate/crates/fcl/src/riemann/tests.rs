use super::*;
use crate::testkit;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PI: f64 = std::f64::consts::PI;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn euclidean_metric_is_identity() {
    let metric = MetricField::euclidean(3);
    let eval = metric_at(&metric, &[0.3, -1.2, 7.0]).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert_eq!(eval.a_val(i, j), expect);
            assert_eq!(eval.a_inv_val(i, j), expect);
        }
    }
}

#[test]
fn sphere_chart_at_equator() {
    let metric = testkit::sphere_polar(1.0);
    let eval = metric_at(&metric, &[PI / 2.0, 0.3]).unwrap();
    assert!((eval.a_val(0, 0) - 1.0).abs() < 1e-15);
    assert!((eval.a_val(1, 1) - 1.0).abs() < 1e-15);
}

#[test]
fn indefinite_metric_reports_minor() {
    let metric = MetricField::from_sources(2, &["1", "0", "-1"]).unwrap();
    match metric_at(&metric, &[0.0, 0.0]) {
        Err(Error::NotPositiveDefinite { order, .. }) => assert_eq!(order, 2),
        other => panic!("expected positive-definiteness failure, got {other:?}"),
    }
}

#[test]
fn inverse_residual_is_tiny() {
    let metric = MetricField::from_sources(
        2,
        &["2 + sin(x1)", "0.3*x1*x2", "1.5 + 0.2*cos(x2)"],
    )
    .unwrap();
    let eval = metric_at(&metric, &[0.4, -0.7]).unwrap();
    let prod = linalg::mat_mul(2, &eval.dense_a_inv(), &eval.dense_a());
    for i in 0..2 {
        for j in 0..2 {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((prod[i * 2 + j] - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn flat_christoffels_vanish() {
    let gamma = christoffel(&MetricField::euclidean(2), &[0.5, -0.2]).unwrap();
    assert!(gamma.gamma.iter().all(|g| *g == 0.0));
    assert!(gamma.dgamma.iter().all(|g| *g == 0.0));
}

#[test]
fn sphere_christoffels_closed_form() {
    let gamma = christoffel(&testkit::sphere_polar(1.0), &[PI / 4.0, 1.0]).unwrap();
    // γ^1_22 = -sin θ cos θ = -1/2 at θ = π/4; γ^2_12 = cot θ = 1.
    assert!((gamma.get(0, 1, 1) - (-0.5)).abs() < 1e-14);
    assert!((gamma.get(1, 0, 1) - 1.0).abs() < 1e-14);
    assert_eq!(gamma.get(1, 0, 1), gamma.get(1, 1, 0));
}

#[test]
fn christoffel_derivatives_match_finite_differences() {
    let metric = MetricField::from_sources(
        2,
        &["1 + 0.3*sin(x1)*cos(x2)", "0.1*x1*x2", "1.2 + 0.2*x1^2"],
    )
    .unwrap();
    let x = [0.3, -0.4];
    let gamma = christoffel(&metric, &x).unwrap();
    for l in 0..2 {
        let step = 1e-5_f64.max(1e-5 * x[l].abs());
        let mut xp = x;
        let mut xm = x;
        xp[l] += step;
        xm[l] -= step;
        let gp = christoffel(&metric, &xp).unwrap();
        let gm = christoffel(&metric, &xm).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let fd = (gp.get(i, j, k) - gm.get(i, j, k)) / (2.0 * step);
                    assert!(
                        (gamma.dget(i, j, k, l) - fd).abs() < 1e-8,
                        "dgamma[{i}{j}{k}][{l}]"
                    );
                }
            }
        }
    }
}

#[test]
fn conformal_with_constant_factor_is_identity_on_gamma() {
    let metric = MetricField::from_sources(2, &["1 + 0.2*x1^2", "0", "1 + 0.1*x2^2"]).unwrap();
    let x = [0.3, 0.8];
    let eval = metric_at(&metric, &x).unwrap();
    let gamma = christoffel_from_jets(2, &eval.a, &eval.a_inv);
    let rho = Jet2::constant(2, 0.7);
    let starred = conformal_christoffel(&gamma, &rho, &eval).unwrap();
    assert_eq!(starred.gamma, gamma.gamma);
    assert_eq!(starred.dgamma, gamma.dgamma);
}

#[test]
fn conformal_one_dimensional_hand_value() {
    // a = 1, γ = 0, ρ = x1: γ*^1_11 = ρ_1 + ρ_1 - ρ^1 a_11 = 1.
    let metric = MetricField::from_sources(1, &["1"]).unwrap();
    let x = [0.4];
    let eval = metric_at(&metric, &x).unwrap();
    let gamma = christoffel_from_jets(1, &eval.a, &eval.a_inv);
    let rho = Expression::parse("x1", 1).unwrap().eval_jet2(&x).unwrap();
    let starred = conformal_christoffel(&gamma, &rho, &eval).unwrap();
    assert!((starred.get(0, 0, 0) - 1.0).abs() < 1e-15);
}

/// Builds `e^{2ρ} a` as expression sources and compares the conformal law
/// against a direct Christoffel computation on the scaled metric.
#[test]
fn conformal_law_matches_direct_computation() {
    let a_srcs = ["1 + 0.2*cos(x1)", "0.1*x1*x2", "1.3 + 0.1*sin(x2)"];
    let rho_src = "0.3*x1*x2";
    let metric = MetricField::from_sources(2, &a_srcs).unwrap();
    let scaled_srcs: Vec<String> = a_srcs
        .iter()
        .map(|src| format!("exp(2*({rho_src}))*({src})"))
        .collect();
    let scaled_refs: Vec<&str> = scaled_srcs.iter().map(String::as_str).collect();
    let scaled = MetricField::from_sources(2, &scaled_refs).unwrap();

    let x = [0.4, -0.6];
    let eval = metric_at(&metric, &x).unwrap();
    let gamma = christoffel_from_jets(2, &eval.a, &eval.a_inv);
    let rho = Expression::parse(rho_src, 2).unwrap().eval_jet2(&x).unwrap();
    let formula = conformal_christoffel(&gamma, &rho, &eval).unwrap();
    let direct = christoffel(&scaled, &x).unwrap();

    assert!(max_abs_diff(&formula.gamma, &direct.gamma) < 1e-9);
    assert!(max_abs_diff(&formula.dgamma, &direct.dgamma) < 1e-7);
}

#[test]
fn h_connection_vanishes_for_flat_parallel_data() {
    let metric = MetricField::euclidean(2);
    let form = OneFormField::constant(2, &[2.0, 0.0]);
    let conn = h_connection(&metric, &form, &[0.7, -0.1]).unwrap();
    assert!((conn.bsq.value() - 4.0).abs() < 1e-14);
    assert!(conn.k.value().abs() < 1e-14);
    assert!(conn.gamma_h.gamma.iter().all(|g| g.abs() < 1e-15));
}

/// Assembles `h_ij = e^k a_ij` jets by jet arithmetic and runs the plain
/// Christoffel pipeline on them; the conformal-law route must agree.
#[test]
fn h_connection_matches_direct_christoffel_of_h() {
    let k = testkit::random_instance(2, 1.0, &mut ChaCha8Rng::seed_from_u64(11));
    let x = [0.5, -0.3];
    let conn = h_connection(k.metric(), k.one_form(), &x).unwrap();
    let ek = conn.k.exp();
    let h_jets: Vec<Jet2> = conn.eval.a.iter().map(|a| ek.mul(a)).collect();
    let h_inv = linalg::jet_sym_inverse(2, 2, &h_jets).unwrap();
    let direct = christoffel_from_jets(2, &h_jets, &h_inv);
    assert!(max_abs_diff(&conn.gamma_h.gamma, &direct.gamma) < 1e-9);
    assert!(max_abs_diff(&conn.gamma_h.dgamma, &direct.dgamma) < 1e-7);
}

/// `^hγ^i_00 - ^αγ^i_00 - k_0 y^i + ½ h_00 k̄^i = 0`.
#[test]
fn transvected_conformal_identity() {
    let k = testkit::random_instance(3, 2.0, &mut ChaCha8Rng::seed_from_u64(5));
    let x = [0.2, -0.4, 0.6];
    let y = [0.9, 0.4, -0.2];
    let conn = h_connection(k.metric(), k.one_form(), &x).unwrap();
    let n = 3;
    let g_h = conn.gamma_h.transvect00(&y);
    let g_a = conn.gamma_alpha.transvect00(&y);
    let k0: f64 = (0..n).map(|j| conn.k.grad()[j] * y[j]).sum();
    let mut h00 = 0.0;
    for i in 0..n {
        for j in 0..n {
            h00 += conn.h_val(i, j) * y[i] * y[j];
        }
    }
    for i in 0..n {
        let mut kbar = 0.0;
        for j in 0..n {
            kbar += conn.h_inv_val(i, j) * conn.k.grad()[j];
        }
        let residual = g_h[i] - g_a[i] - k0 * y[i] + 0.5 * h00 * kbar;
        assert!(residual.abs() < 1e-10, "component {i}: {residual}");
    }
}

#[test]
fn beta_invariants_flat_parallel() {
    let metric = MetricField::euclidean(2);
    let form = OneFormField::constant(2, &[1.5, -0.5]);
    let inv = beta_invariants(&metric, &form, &[0.2, 0.9]).unwrap();
    assert!(inv.bcov.iter().all(|j| j.v == 0.0));
    assert!(inv.s_mixed.iter().all(|j| j.v == 0.0));
    assert!(inv.s_low.iter().all(|j| j.v == 0.0));
    assert!((inv.bsq.value() - 2.5).abs() < 1e-15);
}

#[test]
fn beta_invariants_linear_field() {
    // b = (x2, 0) on flat space: b_{1;2} = 1, b_{2;1} = 0,
    // s_12 = 1/2, r_12 = 1/2; at x = (0,1): b = (1,0), s_j = b^i s_ij = (0, 1/2).
    let metric = MetricField::euclidean(2);
    let form = OneFormField::from_sources(2, &["x2", "0"]).unwrap();
    let x = [0.0, 1.0];
    let inv = beta_invariants(&metric, &form, &x).unwrap();
    assert_eq!(inv.bcov[0 * 2 + 1].v, 1.0);
    assert_eq!(inv.bcov[1 * 2 + 0].v, 0.0);
    assert_eq!(inv.s[0 * 2 + 1].v, 0.5);
    assert_eq!(inv.s[1 * 2 + 0].v, -0.5);
    assert_eq!(inv.r[0 * 2 + 1].v, 0.5);
    assert_eq!(inv.s_low[0].v, 0.0);
    assert_eq!(inv.s_low[1].v, 0.5);
    // r + s = bcov and antisymmetry hold exactly.
    for i in 0..2 {
        for j in 0..2 {
            assert_eq!(
                inv.r[i * 2 + j].v + inv.s[i * 2 + j].v,
                inv.bcov[i * 2 + j].v
            );
            assert_eq!(inv.s[i * 2 + j].v, -inv.s[j * 2 + i].v);
        }
    }
}

#[test]
fn flat_curvature_vanishes() {
    let curv = riemann_curvature(&MetricField::euclidean(3), &[0.1, 0.2, 0.3]).unwrap();
    assert_eq!(curv.data.iter().fold(0.0_f64, |m, v| m.max(v.abs())), 0.0);
}

#[test]
fn unit_sphere_sectional_curvature_is_one() {
    let metric = testkit::sphere_polar(1.0);
    for &theta in &[0.6, 1.0, PI / 2.0, 2.2] {
        let sec = sectional_curvature(&metric, &[theta, 0.4], &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((sec - 1.0).abs() < 1e-8, "theta {theta}: sec {sec}");
        // Also with a generic plane basis (same 2-plane, skewed basis).
        let sec2 = sectional_curvature(&metric, &[theta, 0.4], &[1.0, 0.3], &[-0.2, 1.1]).unwrap();
        assert!((sec2 - 1.0).abs() < 1e-8);
    }
}

#[test]
fn radius_two_sphere_sectional_curvature() {
    let metric = testkit::sphere_polar(2.0);
    let sec = sectional_curvature(&metric, &[1.1, 0.0], &[1.0, 0.0], &[0.0, 1.0]).unwrap();
    assert!((sec - 0.25).abs() < 1e-8);
}

#[test]
fn first_bianchi_identity() {
    let k = testkit::random_instance(3, 1.0, &mut ChaCha8Rng::seed_from_u64(23));
    let curv = riemann_curvature(k.metric(), &[0.3, -0.2, 0.5]).unwrap();
    for j in 0..3 {
        for i in 0..3 {
            for kk in 0..3 {
                for l in 0..3 {
                    let cyc =
                        curv.get(j, i, kk, l) + curv.get(kk, i, l, j) + curv.get(l, i, j, kk);
                    assert!(cyc.abs() < 1e-9, "bianchi [{j}{i}{kk}{l}]: {cyc}");
                    // (k,l)-antisymmetry is exact by construction.
                    assert_eq!(curv.get(j, i, kk, l), -curv.get(j, i, l, kk));
                }
            }
        }
    }
}

#[test]
fn metric_compatibility_under_own_connection() {
    let k = testkit::random_instance(2, 1.0, &mut ChaCha8Rng::seed_from_u64(7));
    let x = [0.25, -0.55];
    let y = [1.0, 0.5];
    let eval = metric_at(k.metric(), &x).unwrap();
    let gamma = christoffel_from_jets(2, &eval.a, &eval.a_inv);

    let mut value = Tensor::zeros(&[2, 2]);
    let mut dx = vec![Tensor::zeros(&[2, 2]), Tensor::zeros(&[2, 2])];
    let dy = vec![Tensor::zeros(&[2, 2]), Tensor::zeros(&[2, 2])];
    for i in 0..2 {
        for j in 0..2 {
            value.set(&[i, j], eval.a_val(i, j));
            for l in 0..2 {
                dx[l].set(&[i, j], eval.a_jet(i, j).grad()[l]);
            }
        }
    }
    let cov = h_cov_derivative(
        &value,
        &dx,
        &dy,
        &[IndexKind::Lower, IndexKind::Lower],
        &gamma,
        &y,
    )
    .unwrap();
    assert!(cov.max_abs() < 1e-10, "max |a_ij;k| = {}", cov.max_abs());
}

#[test]
fn covariant_derivative_of_y_vanishes() {
    let k = testkit::random_instance(2, 1.0, &mut ChaCha8Rng::seed_from_u64(3));
    let x = [0.4, 0.1];
    let y = [0.7, -1.1];
    let gamma = christoffel(k.metric(), &x).unwrap();

    let mut value = Tensor::zeros(&[2]);
    let dx = vec![Tensor::zeros(&[2]), Tensor::zeros(&[2])];
    let mut dy = vec![Tensor::zeros(&[2]), Tensor::zeros(&[2])];
    for i in 0..2 {
        value.set(&[i], y[i]);
        for (s, dys) in dy.iter_mut().enumerate() {
            dys.set(&[i], if s == i { 1.0 } else { 0.0 });
        }
    }
    let cov = h_cov_derivative(&value, &dx, &dy, &[IndexKind::Upper], &gamma, &y).unwrap();
    // -N^i_j and +γ^i_{js} y^s cancel up to accumulation roundoff.
    assert!(cov.max_abs() < 1e-14, "max = {}", cov.max_abs());
}

#[test]
fn covariant_derivative_of_constants() {
    let gamma = christoffel(&MetricField::euclidean(2), &[0.0, 0.0]).unwrap();
    // Scalar constant.
    let value = Tensor::zeros(&[]);
    let cov = h_cov_derivative(
        &Tensor::zeros(&[]),
        &vec![value.clone(), value.clone()],
        &vec![value.clone(), value],
        &[],
        &gamma,
        &[1.0, 0.0],
    );
    // Rank-0 tensors are cubical vacuously; expect zeros.
    let cov = cov.unwrap();
    assert_eq!(cov.max_abs(), 0.0);

    // Constant vector field on flat space.
    let mut w = Tensor::zeros(&[2]);
    w.set(&[0], 3.0);
    w.set(&[1], -1.0);
    let zero = Tensor::zeros(&[2]);
    let cov = h_cov_derivative(
        &w,
        &vec![zero.clone(), zero.clone()],
        &vec![zero.clone(), zero],
        &[IndexKind::Upper],
        &gamma,
        &[1.0, 0.0],
    )
    .unwrap();
    assert_eq!(cov.max_abs(), 0.0);
}

#[test]
fn curvature_transvection_block_sanity() {
    // On the unit sphere with y = ∂_φ at the equator the transvected
    // curvature is diag(1, 0) (hand computation in the module conventions).
    let metric = testkit::sphere_polar(1.0);
    let curv = riemann_curvature(&metric, &[PI / 2.0, 0.0]).unwrap();
    let r = curv.transvect_yy(&[0.0, 1.0]);
    assert!((r[0] - 1.0).abs() < 1e-12);
    assert!(r[1].abs() < 1e-12);
    assert!(r[2].abs() < 1e-12);
    assert!(r[3].abs() < 1e-12);
}

#[test]
fn random_point_rng_smoke() {
    // admissible_point terminates quickly on a generic instance.
    let k = testkit::random_instance(2, 2.0, &mut ChaCha8Rng::seed_from_u64(99));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let (x, y) = testkit::admissible_point(&k, &mut rng);
        assert!(x.iter().all(|v| v.abs() <= 0.8));
        assert!(y.iter().any(|v| *v != 0.0));
        let mut r = rng.clone();
        let _ = r.gen::<f64>();
    }
}
