//! Deterministic JSON rendering of verdict reports.
//!
//! The report schema is versioned (`"schema": 1`) and every float is
//! serialized with 17 significant digits, so a report is byte-reproducible
//! from the same rows regardless of thread count or platform libm quirks in
//! shortest-float printing.

use crate::curvature::CheckReport;

/// 17 significant digits; round-trips every finite f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    debug_assert!(v.is_finite(), "reports never contain non-finite numbers");
    format!("{v:.16e}")
}

fn push_f64_array(out: &mut String, values: &[f64]) {
    out.push('[');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&fmt_f64(*v));
    }
    out.push(']');
}

/// Metadata block of a verdict report.
#[derive(Debug, Clone)]
pub struct ReportMeta {
    pub input_sha256: String,
    pub mode: String,
    pub dimension: usize,
    pub m: Option<f64>,
    pub seed: u64,
    pub samples: usize,
    pub eps_beta: f64,
    pub s_window: (f64, f64),
    pub domain: Vec<(f64, f64)>,
}

/// Renders the full verdict report as a single-line JSON document with a
/// fixed key order.
pub fn render_verdict_report(meta: &ReportMeta, report: &CheckReport) -> String {
    let mut out = String::with_capacity(256 + report.rows.len() * 256);
    out.push_str("{\"schema\":1,\"metadata\":{");
    out.push_str(&format!("\"input_sha256\":\"{}\"", meta.input_sha256));
    out.push_str(&format!(",\"mode\":\"{}\"", meta.mode));
    out.push_str(&format!(",\"dimension\":{}", meta.dimension));
    match meta.m {
        Some(m) => out.push_str(&format!(",\"m\":{}", fmt_f64(m))),
        None => out.push_str(",\"m\":null"),
    }
    out.push_str(&format!(",\"seed\":{}", meta.seed));
    out.push_str(&format!(",\"samples\":{}", meta.samples));
    out.push_str(&format!(
        ",\"tol_residual\":{}",
        fmt_f64(report.summary.tol_residual)
    ));
    out.push_str(&format!(",\"tol_k\":{}", fmt_f64(report.summary.tol_k)));
    out.push_str(&format!(",\"eps_beta\":{}", fmt_f64(meta.eps_beta)));
    out.push_str(",\"s_window\":");
    push_f64_array(&mut out, &[meta.s_window.0, meta.s_window.1]);
    out.push_str(",\"domain\":[");
    for (i, (lo, hi)) in meta.domain.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_f64_array(&mut out, &[*lo, *hi]);
    }
    out.push_str("]},\"rows\":[");
    for (i, row) in report.rows.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!("{{\"index\":{}", row.index));
        out.push_str(",\"x\":");
        push_f64_array(&mut out, &row.x);
        out.push_str(",\"y\":");
        push_f64_array(&mut out, &row.y);
        out.push_str(&format!(",\"f\":{}", fmt_f64(row.f)));
        out.push_str(&format!(",\"k_fit\":{}", fmt_f64(row.k_fit)));
        out.push_str(&format!(
            ",\"rel_residual\":{}",
            fmt_f64(row.rel_residual)
        ));
        out.push_str(&format!(",\"rejects\":{}}}", row.rejects));
    }
    out.push_str("],\"summary\":{");
    let s = &report.summary;
    out.push_str(&format!(
        "\"verdict\":\"{}\"",
        if s.pass { "PASS" } else { "FAIL" }
    ));
    out.push_str(&format!(",\"samples\":{}", s.samples));
    out.push_str(&format!(",\"k_median\":{}", fmt_f64(s.k_median)));
    out.push_str(&format!(",\"k_min\":{}", fmt_f64(s.k_min)));
    out.push_str(&format!(",\"k_max\":{}", fmt_f64(s.k_max)));
    out.push_str(&format!(",\"k_spread\":{}", fmt_f64(s.k_spread)));
    out.push_str(&format!(",\"max_residual\":{}", fmt_f64(s.max_residual)));
    out.push_str("}}");
    out
}
