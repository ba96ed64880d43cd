//! Implementations behind the `fcl` subcommands. Each returns the text it
//! prints plus enough state for the binary to choose an exit code.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::curvature::{self, berwald_curvature, SampleConfig, SprayEvaluator};
use crate::error::{Error, Result};
use crate::expr::Jet2;
use crate::kropina::{
    killing_invariants, kropina_closed_forms, paper_expansion_diagnostics, phi_functions, sigma1,
    SprayRoute,
};
use crate::linalg;
use crate::riemann;

use super::metricfile::{MetricFile, Mode};
use super::report::{fmt_f64, render_verdict_report, ReportMeta};

/// `info`: echo the parsed definition and the b² range over a coarse grid.
pub fn cmd_info(path: &Path) -> Result<String> {
    let file = MetricFile::from_path(path)?;
    let n = file.dimension;
    let mut out = String::new();
    let _ = writeln!(out, "file: {}", path.display());
    let _ = writeln!(out, "mode: {}", file.options.mode.as_str());
    let _ = writeln!(out, "dimension: {n}");
    if let Some(coords) = &file.coords {
        let _ = writeln!(out, "coords: {}", coords.join(", "));
    }
    if let Some(m) = file.m {
        let _ = writeln!(out, "m: {m}");
    }
    for i in 1..=n {
        for j in i..=n {
            let _ = writeln!(
                out,
                "a{i}{j} = {}",
                file.a_sources[crate::expr::sym_index(i - 1, j - 1)]
            );
        }
    }
    if let Some(b) = &file.b_sources {
        for (i, src) in b.iter().enumerate() {
            let _ = writeln!(out, "b{} = {src}", i + 1);
        }
    }
    for (i, (lo, hi)) in file.domain.iter().enumerate() {
        let _ = writeln!(out, "domain x{}: [{lo}, {hi}]", i + 1);
    }
    let _ = writeln!(
        out,
        "options: eps_beta = {}, s_window = [{}, {}], tol_residual = {}, tol_k = {}",
        file.options.eps_beta,
        file.options.s_window.0,
        file.options.s_window.1,
        file.options.tol_residual,
        file.options.tol_k
    );

    if file.options.mode == Mode::Kropina {
        let metric = file.metric_field()?;
        let form = file.one_form_field()?.expect("validated in kropina mode");
        // 5 grid nodes per coordinate.
        let mut bsq_min = f64::INFINITY;
        let mut bsq_max = f64::NEG_INFINITY;
        let nodes = 5usize;
        let total = nodes.pow(n as u32);
        for flat in 0..total {
            let mut rest = flat;
            let x: Vec<f64> = file
                .domain
                .iter()
                .map(|(lo, hi)| {
                    let idx = rest % nodes;
                    rest /= nodes;
                    lo + (hi - lo) * idx as f64 / (nodes - 1) as f64
                })
                .collect();
            let eval = riemann::metric_at(&metric, &x)?;
            let b = form.eval(&x)?;
            let bsq = riemann::beta_norm_squared(&eval, &b).value();
            bsq_min = bsq_min.min(bsq);
            bsq_max = bsq_max.max(bsq);
        }
        let _ = writeln!(
            out,
            "b^2 over a {nodes}^{n} grid: min = {bsq_min:.12}, max = {bsq_max:.12}"
        );
    }
    Ok(out)
}

/// `spray`: spray data, h/W data and self-check lines at one `(x, y)`.
pub fn cmd_spray(path: &Path, x: &[f64], y: &[f64]) -> Result<String> {
    let file = MetricFile::from_path(path)?;
    if x.len() != file.dimension || y.len() != file.dimension {
        return Err(Error::Validation(format!(
            "point/direction need {} components",
            file.dimension
        )));
    }
    if file.options.mode != Mode::Kropina {
        return Err(Error::Validation(
            "spray requires a kropina-mode file".into(),
        ));
    }
    let k = file.build_kropina()?;
    let n = k.dimension();
    let spray = k.spray_alpha_beta(x, y)?;
    let hw = k.to_hw(x)?;
    let mut out = String::new();
    let _ = writeln!(out, "x = {x:?}");
    let _ = writeln!(out, "y = {y:?}");
    let _ = writeln!(
        out,
        "alpha = {:.12e}, beta = {:.12e}, s = {:.12e}, F = {:.12e}",
        spray.alpha, spray.beta, spray.s, spray.f.v
    );
    let _ = writeln!(out, "gamma00_alpha = {:?}", spray.gamma00_alpha);
    let _ = writeln!(out, "gamma00_h     = {:?}", spray.gamma00_h);
    let _ = writeln!(out, "G   = {:?}", spray.g_values());
    let _ = writeln!(out, "Phi = {:?}", spray.phi_values());
    let _ = writeln!(
        out,
        "k = {:.12e}, b^2 = {:.12e}, pi = {:.12e}, eps = {:.12e}",
        hw.k.value(),
        hw.bsq,
        hw.pi_const,
        hw.eps_const
    );
    let _ = writeln!(
        out,
        "|W|_h - 1 = {:.3e}",
        (hw.w_norm_sq().sqrt() - 1.0).abs()
    );
    let _ = writeln!(
        out,
        "F - pi h00^((m+1)/2)/W0^m = {:.3e}",
        (spray.f.v - hw.f_from_hw(y)).abs()
    );

    // Homogeneity flag at λ = 3: G(x, 3y) = 9 G(x, y).
    let y3: Vec<f64> = y.iter().map(|v| 3.0 * v).collect();
    let s3 = k.spray_alpha_beta(x, &y3)?;
    let mut hom = 0.0_f64;
    for i in 0..n {
        let scale = 1.0 + spray.g[i].v.abs() * 9.0;
        hom = hom.max((s3.g[i].v - 9.0 * spray.g[i].v).abs() / scale);
    }
    let _ = writeln!(out, "homogeneity |G(x,3y) - 9 G(x,y)| (rel) = {hom:.3e}");

    // Generic-φ route cross-check.
    let generic = k.spray_with_route(x, y, SprayRoute::GenericPhi)?;
    let mut route_diff = 0.0_f64;
    for i in 0..n {
        route_diff = route_diff.max((generic.g[i].v - spray.g[i].v).abs());
    }
    let _ = writeln!(
        out,
        "closed-form vs generic-phi spray: max |diff| = {route_diff:.3e}"
    );
    Ok(out)
}

/// Overrides for `check` coming from the command line.
#[derive(Debug, Clone, Default)]
pub struct CheckArgs {
    pub samples: Option<usize>,
    pub seed: u64,
    pub tol_residual: Option<f64>,
    pub tol_k: Option<f64>,
    pub threads: Option<usize>,
}

/// `check`: the constant-curvature verdict. Returns the JSON report and the
/// pass flag.
pub fn cmd_check(path: &Path, args: &CheckArgs) -> Result<(String, bool)> {
    let raw = std::fs::read(path)?;
    let file = MetricFile::parse(std::str::from_utf8(&raw).map_err(|_| {
        Error::Validation("metric file is not valid UTF-8".into())
    })?)?;
    let instance = file.build_instance()?;

    let mut config = SampleConfig::new(file.domain.clone());
    config.samples = args.samples.unwrap_or(200);
    config.seed = args.seed;
    config.tol_residual = args.tol_residual.unwrap_or(file.options.tol_residual);
    config.tol_k = args.tol_k.unwrap_or(file.options.tol_k);
    config.threads = args.threads.unwrap_or_else(default_threads);

    let report = curvature::constant_curvature_check(&instance, &config)?;
    let digest = Sha256::digest(&raw);
    let meta = ReportMeta {
        input_sha256: format!("{digest:x}"),
        mode: file.options.mode.as_str().to_string(),
        dimension: file.dimension,
        m: match file.options.mode {
            Mode::Kropina => file.m,
            Mode::Riemannian => None,
        },
        seed: config.seed,
        samples: config.samples,
        eps_beta: file.options.eps_beta,
        s_window: file.options.s_window,
        domain: file.domain.clone(),
    };
    let pass = report.summary.pass;
    Ok((render_verdict_report(&meta, &report), pass))
}

fn default_threads() -> usize {
    if let Ok(v) = std::env::var("FCL_THREADS") {
        if let Ok(t) = v.trim().parse::<usize>() {
            if t > 0 {
                return t;
            }
        }
    }
    std::thread::available_parallelism()
        .map(|v| v.get())
        .unwrap_or(1)
}

struct VerifyRow {
    label: &'static str,
    residual: f64,
    tol: Option<f64>, // None marks a report-only diagnostic
}

/// `verify`: the cross-identity suite. Asserting rows use tolerance 1e-8
/// (1e-7 for the two-path curvature assembly, whose operands pass through
/// second jets twice); diagnostic rows are report-only.
pub fn cmd_verify(path: &Path, samples: usize) -> Result<(String, bool)> {
    let file = MetricFile::from_path(path)?;
    let mut rows: Vec<VerifyRow> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0xF1D0);

    let sample_x = |rng: &mut ChaCha8Rng, file: &MetricFile| -> Vec<f64> {
        file.domain
            .iter()
            .map(|(lo, hi)| rng.gen_range(*lo..*hi))
            .collect()
    };

    match file.options.mode {
        Mode::Kropina => {
            let k = file.build_kropina()?;
            let n = k.dimension();
            let mut conformal = 0.0_f64;
            let mut transvected = 0.0_f64;
            let mut compat = 0.0_f64;
            let mut w_norm = 0.0_f64;
            let mut b_2w = 0.0_f64;
            let mut f_hw = 0.0_f64;
            let mut alpha_ratio = 0.0_f64;
            let mut phi_closed = 0.0_f64;
            let mut sigma_theta = 0.0_f64;
            let mut r_cross = 0.0_f64;
            let mut s_cross = 0.0_f64;
            let mut two_path = 0.0_f64;
            let mut killing_r = 0.0_f64;
            let mut diag_printed = 0.0_f64;
            let mut diag_alt = 0.0_f64;

            for _ in 0..samples {
                let x = sample_x(&mut rng, &file);
                let conn = k.h_connection(&x)?;

                // Conformal law: formula vs direct Christoffel of h-jets.
                let ek = conn.k.exp();
                let h_jets: Vec<Jet2> = conn.eval.a.iter().map(|a| ek.mul(a)).collect();
                let h_inv = linalg::jet_sym_inverse(n, n, &h_jets).map_err(|order| {
                    Error::NotPositiveDefinite {
                        point: x.clone(),
                        order,
                    }
                })?;
                let direct = riemann::christoffel_from_jets(n, &h_jets, &h_inv);
                for (a, b) in conn.gamma_h.gamma.iter().zip(&direct.gamma) {
                    conformal = conformal.max((a - b).abs());
                }

                // Metric compatibility of a under its own connection.
                let gamma_a = &conn.gamma_alpha;
                for i in 0..n {
                    for j in 0..n {
                        for l in 0..n {
                            let mut v = conn.eval.a_jet(i, j).grad()[l];
                            for r in 0..n {
                                v -= gamma_a.get(r, i, l) * conn.eval.a_val(r, j)
                                    + gamma_a.get(r, j, l) * conn.eval.a_val(i, r);
                            }
                            compat = compat.max(v.abs());
                        }
                    }
                }

                let hw = k.to_hw(&x)?;
                w_norm = w_norm.max((hw.w_norm_sq() - 1.0).abs());
                for i in 0..n {
                    let b_up: f64 = (0..n)
                        .map(|j| conn.eval.a_inv_val(i, j) * conn.b_lower[j].value())
                        .sum();
                    b_2w = b_2w.max((b_up - 2.0 * hw.w_upper[i]).abs());
                }

                let kinv = killing_invariants(&conn, &hw);
                killing_r = killing_r.max(kinv.max_abs_r());
                let binv = riemann::beta_invariants_from(&conn);
                let emk = (-hw.k.value()).exp();
                let wk: f64 = (0..n).map(|r| hw.w[r].v * hw.kbar_upper[r]).sum();
                for i in 0..n {
                    for j in 0..n {
                        let r_pred = 2.0
                            * emk
                            * (kinv.r_cap[i * n + j] - 0.5 * wk * hw.h[i * n + j]);
                        r_cross = r_cross.max((r_pred - binv.r[i * n + j].v).abs());
                        let s_pred = 2.0
                            * emk
                            * (kinv.s_cap[i * n + j]
                                + 0.5
                                    * (hw.k.grad()[i] * hw.w[j].v
                                        - hw.k.grad()[j] * hw.w[i].v));
                        s_cross = s_cross.max((s_pred - binv.s[i * n + j].v).abs());
                    }
                }

                // Direction-dependent identities.
                let y = loop {
                    let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    if k.direction_admissible(&x, &y)? {
                        break y;
                    }
                };
                let g_h = conn.gamma_h.transvect00(&y);
                let g_a = conn.gamma_alpha.transvect00(&y);
                let k0: f64 = (0..n).map(|j| conn.k.grad()[j] * y[j]).sum();
                let h00 = hw.h00(&y);
                for i in 0..n {
                    let resid = g_h[i] - g_a[i] - k0 * y[i] + 0.5 * h00 * hw.kbar_upper[i];
                    transvected = transvected.max(resid.abs());
                }

                let fv = k.f_value(&x, &y)?;
                f_hw = f_hw.max((fv.f - hw.f_from_hw(&y)).abs() / fv.f);
                alpha_ratio = alpha_ratio.max(
                    (fv.alpha * fv.alpha / fv.beta - h00 / (2.0 * hw.w0(&y))).abs()
                        / (fv.alpha * fv.alpha / fv.beta).abs(),
                );

                let m = k.exponent();
                let p = phi_functions(m, fv.s, hw.bsq)?;
                let (om, dom, th) = kropina_closed_forms(m, fv.s, hw.bsq);
                phi_closed = phi_closed
                    .max((p.omega - om).abs() / (1.0 + om.abs()))
                    .max((p.domega - dom).abs() / (1.0 + dom.abs()))
                    .max((p.theta - th).abs() / (1.0 + th.abs()));
                sigma_theta =
                    sigma_theta.max((sigma1(m, fv.s, hw.bsq) + 2.0 * th).abs());

                let g = k.spray_jets(&x, &y)?;
                let direct_r = berwald_curvature(&g, &y);
                let suite = curvature::phi_derivative_suite(&k, &x, &y)?;
                let scale = direct_r
                    .iter()
                    .fold(0.0_f64, |mm, v| mm.max(v.abs()))
                    .max(1.0);
                for idx in 0..direct_r.len() {
                    two_path =
                        two_path.max((direct_r[idx] - suite.assembled[idx]).abs() / scale);
                }

                let diag = paper_expansion_diagnostics(&k, &x, &y)?;
                diag_printed = diag_printed.max(diag[0].relative);
                diag_alt = diag_alt.max(diag[1].relative);
            }

            rows.push(VerifyRow {
                label: "conformal law: h-connection vs direct Christoffel of h",
                residual: conformal,
                tol: Some(1e-8),
            });
            rows.push(VerifyRow {
                label: "transvected conformal identity",
                residual: transvected,
                tol: Some(1e-8),
            });
            rows.push(VerifyRow {
                label: "metric compatibility a_ij;k",
                residual: compat,
                tol: Some(1e-8),
            });
            rows.push(VerifyRow {
                label: "h-norm of W equals 1",
                residual: w_norm,
                tol: Some(1e-8),
            });
            rows.push(VerifyRow {
                label: "b^i = 2 W^i",
                residual: b_2w,
                tol: Some(1e-8),
            });
            rows.push(VerifyRow {
                label: "F matches pi h00^((m+1)/2)/W0^m (relative)",
                residual: f_hw,
                tol: Some(1e-8),
            });
            rows.push(VerifyRow {
                label: "alpha^2/beta = h00/(2 W0) (relative)",
                residual: alpha_ratio,
                tol: Some(1e-8),
            });
            rows.push(VerifyRow {
                label: "generic phi-machinery vs closed forms",
                residual: phi_closed,
                tol: Some(1e-8),
            });
            rows.push(VerifyRow {
                label: "sigma1 = -2 Theta",
                residual: sigma_theta,
                tol: Some(1e-8),
            });
            rows.push(VerifyRow {
                label: "r_ij cross-relation (beta vs Killing invariants)",
                residual: r_cross,
                tol: Some(1e-8),
            });
            rows.push(VerifyRow {
                label: "s_ij cross-relation (beta vs Killing invariants)",
                residual: s_cross,
                tol: Some(1e-8),
            });
            rows.push(VerifyRow {
                label: "two-path curvature assembly (relative)",
                residual: two_path,
                tol: Some(1e-7),
            });
            rows.push(VerifyRow {
                label: "Killing tensor max |R_ij| of W (zero iff W Killing)",
                residual: killing_r,
                tol: None,
            });
            rows.push(VerifyRow {
                label: "printed A-expansion, sigma0 exponent (m-1)/m (relative)",
                residual: diag_printed,
                tol: None,
            });
            rows.push(VerifyRow {
                label: "printed A-expansion, sigma0 exponent (m-1)/2 (relative)",
                residual: diag_alt,
                tol: None,
            });
        }
        Mode::Riemannian => {
            let metric = file.metric_field()?;
            let n = file.dimension;
            let mut compat = 0.0_f64;
            let mut bianchi = 0.0_f64;
            let mut transvect = 0.0_f64;
            let spray = curvature::RiemannianSpray::new(metric.clone());
            for _ in 0..samples {
                let x = sample_x(&mut rng, &file);
                let eval = riemann::metric_at(&metric, &x)?;
                let gamma = riemann::christoffel_from_jets(n, &eval.a, &eval.a_inv);
                for i in 0..n {
                    for j in 0..n {
                        for l in 0..n {
                            let mut v = eval.a_jet(i, j).grad()[l];
                            for r in 0..n {
                                v -= gamma.get(r, i, l) * eval.a_val(r, j)
                                    + gamma.get(r, j, l) * eval.a_val(i, r);
                            }
                            compat = compat.max(v.abs());
                        }
                    }
                }
                let curv = riemann::riemann_curvature_of(&gamma);
                for j in 0..n {
                    for i in 0..n {
                        for kk in 0..n {
                            for l in 0..n {
                                bianchi = bianchi.max(
                                    (curv.get(j, i, kk, l)
                                        + curv.get(kk, i, l, j)
                                        + curv.get(l, i, j, kk))
                                    .abs(),
                                );
                            }
                        }
                    }
                }
                let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let g = spray.spray_jets(&x, &y)?;
                let r_spray = berwald_curvature(&g, &y);
                let r_riem = curv.transvect_yy(&y);
                for idx in 0..n * n {
                    transvect = transvect.max((r_spray[idx] - r_riem[idx]).abs());
                }
            }
            rows.push(VerifyRow {
                label: "metric compatibility a_ij;k",
                residual: compat,
                tol: Some(1e-8),
            });
            rows.push(VerifyRow {
                label: "first Bianchi identity",
                residual: bianchi,
                tol: Some(1e-8),
            });
            rows.push(VerifyRow {
                label: "spray curvature vs transvected Riemann tensor",
                residual: transvect,
                tol: Some(1e-8),
            });
        }
    }

    let mut out = String::new();
    let _ = writeln!(
        out,
        "identity suite: {} samples over the domain box",
        samples
    );
    let mut pass = true;
    for row in &rows {
        match row.tol {
            Some(tol) => {
                let ok = row.residual < tol;
                pass &= ok;
                let _ = writeln!(
                    out,
                    "CHECK {:<58} {:>12.3e}  (tol {:.0e})  {}",
                    row.label,
                    row.residual,
                    tol,
                    if ok { "PASS" } else { "FAIL" }
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "DIAG  {:<58} {:>12.3e}  (report-only)",
                    row.label, row.residual
                );
            }
        }
    }
    let _ = writeln!(out, "verdict: {}", if pass { "PASS" } else { "FAIL" });
    Ok((out, pass))
}

/// `geodesic`: integrate and render CSV (`t, x1.., y1.., F`) plus summary
/// comment lines.
pub fn cmd_geodesic(
    path: &Path,
    x0: &[f64],
    y0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<String> {
    let file = MetricFile::from_path(path)?;
    let n = file.dimension;
    if x0.len() != n || y0.len() != n {
        return Err(Error::Validation(format!(
            "start/velocity need {n} components"
        )));
    }
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(Error::Validation("t_end and dt must be positive".into()));
    }
    let instance = file.build_instance()?;
    let traj =
        curvature::geodesic_integrate(&instance, x0, y0, t_end, dt, Some(&file.domain))?;

    let mut out = String::new();
    out.push('t');
    for i in 1..=n {
        let _ = write!(out, ",x{i}");
    }
    for i in 1..=n {
        let _ = write!(out, ",y{i}");
    }
    out.push_str(",F\n");
    for p in &traj.points {
        let _ = write!(out, "{}", fmt_f64(p.t));
        for v in &p.x {
            let _ = write!(out, ",{}", fmt_f64(*v));
        }
        for v in &p.y {
            let _ = write!(out, ",{}", fmt_f64(*v));
        }
        let _ = writeln!(out, ",{}", fmt_f64(p.f));
    }
    let _ = writeln!(out, "# f_drift_rel = {}", fmt_f64(traj.f_drift_rel));
    let _ = writeln!(
        out,
        "# exit = {}",
        match traj.exit {
            None => "none",
            Some(curvature::ExitReason::Chart) => "chart",
            Some(curvature::ExitReason::Cone) => "cone",
        }
    );
    Ok(out)
}
