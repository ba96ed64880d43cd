//! The metric-definition file format.
//!
//! A flat key-value text format with section headers, UTF-8, `#` comments,
//! LF or CRLF line endings:
//!
//! ```text
//! [metric]
//! dimension = 2
//! m = 2
//! a11 = 1
//! a12 = 0
//! a22 = 1
//!
//! [oneform]
//! b1 = 2
//! b2 = 0
//!
//! [domain]
//! x1 = -1, 1
//! x2 = -1, 1
//!
//! [options]
//! mode = kropina
//! eps_beta = 1e-6
//! s_window = 0.05, 0.95
//! tol_residual = 1e-6
//! tol_k = 1e-4
//! ```
//!
//! Metric entries cover the upper triangle (`aij` with `i <= j`). The
//! `[oneform]` section and `m` are required in `kropina` mode and optional
//! in `riemannian` mode (which runs the curvature engine on the Riemannian
//! spray, bypassing the (α,β) layer). All expressions are validated against
//! the declared dimension.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::curvature::{CurvatureInstance, RiemannianSpray};
use crate::error::{Error, Result};
use crate::expr::{sym_index, Expression};
use crate::kropina::{DomainOptions, KropinaMetric};
use crate::riemann::{MetricField, OneFormField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Kropina,
    Riemannian,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Kropina => "kropina",
            Mode::Riemannian => "riemannian",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileOptions {
    pub mode: Mode,
    pub eps_beta: f64,
    pub s_window: (f64, f64),
    pub tol_residual: f64,
    pub tol_k: f64,
}

impl Default for FileOptions {
    fn default() -> Self {
        let domain = DomainOptions::default();
        FileOptions {
            mode: Mode::Kropina,
            eps_beta: domain.eps_beta,
            s_window: domain.s_window,
            tol_residual: 1e-6,
            tol_k: 1e-4,
        }
    }
}

/// Parsed metric-definition file. Expression sources are kept verbatim so
/// that `parse -> serialize -> parse` is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricFile {
    pub dimension: usize,
    /// Optional display names for the coordinates (expressions always use
    /// `x1..xn`).
    pub coords: Option<Vec<String>>,
    pub m: Option<f64>,
    /// Upper-triangle sources in packed symmetric order.
    pub a_sources: Vec<String>,
    pub b_sources: Option<Vec<String>>,
    /// Per-coordinate `[lo, hi]`.
    pub domain: Vec<(f64, f64)>,
    pub options: FileOptions,
}

fn err_at(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Validation(format!("line {line}: {msg}"))
}

fn parse_f64(line: usize, value: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| err_at(line, format!("expected a number, found `{}`", value.trim())))
}

fn parse_pair(line: usize, value: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = value.split(',').collect();
    if parts.len() != 2 {
        return Err(err_at(line, "expected two comma-separated numbers"));
    }
    Ok((parse_f64(line, parts[0])?, parse_f64(line, parts[1])?))
}

impl MetricFile {
    pub fn from_path(path: &Path) -> Result<MetricFile> {
        let text = std::fs::read_to_string(path)?;
        MetricFile::parse(&text)
    }

    pub fn parse(text: &str) -> Result<MetricFile> {
        #[derive(PartialEq, Clone, Copy)]
        enum Section {
            None,
            Metric,
            Oneform,
            Domain,
            Options,
        }
        let mut section = Section::None;
        let mut dimension: Option<(usize, usize)> = None; // (value, line)
        let mut coords: Option<Vec<String>> = None;
        let mut m: Option<f64> = None;
        let mut a_entries: HashMap<(usize, usize), (String, usize)> = HashMap::new();
        let mut b_entries: HashMap<usize, (String, usize)> = HashMap::new();
        let mut domain_entries: HashMap<usize, ((f64, f64), usize)> = HashMap::new();
        let mut options = FileOptions::default();

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err_at(line_no, "unterminated section header"))?;
                section = match name.trim() {
                    "metric" => Section::Metric,
                    "oneform" => Section::Oneform,
                    "domain" => Section::Domain,
                    "options" => Section::Options,
                    other => return Err(err_at(line_no, format!("unknown section `[{other}]`"))),
                };
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err_at(line_no, "expected `key = value`"))?;
            let key = key.trim();
            let value = value.trim();
            match section {
                Section::None => {
                    return Err(err_at(line_no, "key outside of any section"));
                }
                Section::Metric => match key {
                    "dimension" => {
                        let n: usize = value.parse().map_err(|_| {
                            err_at(line_no, format!("invalid dimension `{value}`"))
                        })?;
                        dimension = Some((n, line_no));
                    }
                    "coords" => {
                        coords = Some(
                            value
                                .split(',')
                                .map(|c| c.trim().to_string())
                                .collect::<Vec<_>>(),
                        );
                    }
                    "m" => m = Some(parse_f64(line_no, value)?),
                    _ if key.starts_with('a') && key.len() == 3 => {
                        let digits: Vec<Option<usize>> = key[1..]
                            .chars()
                            .map(|c| c.to_digit(10).map(|d| d as usize))
                            .collect();
                        match (digits[0], digits[1]) {
                            (Some(i), Some(j)) if i >= 1 && j >= 1 => {
                                if i > j {
                                    return Err(err_at(
                                        line_no,
                                        format!("metric entries use the upper triangle; write a{j}{i} instead of a{i}{j}"),
                                    ));
                                }
                                if a_entries
                                    .insert((i, j), (value.to_string(), line_no))
                                    .is_some()
                                {
                                    return Err(err_at(line_no, format!("duplicate key `{key}`")));
                                }
                            }
                            _ => return Err(err_at(line_no, format!("unknown key `{key}`"))),
                        }
                    }
                    _ => return Err(err_at(line_no, format!("unknown key `{key}`"))),
                },
                Section::Oneform => {
                    if let Some(rest) = key.strip_prefix('b') {
                        let i: usize = rest.parse().map_err(|_| {
                            err_at(line_no, format!("unknown key `{key}`"))
                        })?;
                        if i == 0 {
                            return Err(err_at(line_no, "one-form indices start at b1"));
                        }
                        if b_entries.insert(i, (value.to_string(), line_no)).is_some() {
                            return Err(err_at(line_no, format!("duplicate key `{key}`")));
                        }
                    } else {
                        return Err(err_at(line_no, format!("unknown key `{key}`")));
                    }
                }
                Section::Domain => {
                    if let Some(rest) = key.strip_prefix('x') {
                        let i: usize = rest.parse().map_err(|_| {
                            err_at(line_no, format!("unknown key `{key}`"))
                        })?;
                        if i == 0 {
                            return Err(err_at(line_no, "coordinates start at x1"));
                        }
                        let pair = parse_pair(line_no, value)?;
                        if domain_entries.insert(i, (pair, line_no)).is_some() {
                            return Err(err_at(line_no, format!("duplicate key `{key}`")));
                        }
                    } else {
                        return Err(err_at(line_no, format!("unknown key `{key}`")));
                    }
                }
                Section::Options => match key {
                    "mode" => {
                        options.mode = match value {
                            "kropina" => Mode::Kropina,
                            "riemannian" => Mode::Riemannian,
                            other => {
                                return Err(err_at(
                                    line_no,
                                    format!("mode must be `kropina` or `riemannian`, found `{other}`"),
                                ))
                            }
                        };
                    }
                    "eps_beta" => options.eps_beta = parse_f64(line_no, value)?,
                    "s_window" => options.s_window = parse_pair(line_no, value)?,
                    "tol_residual" => options.tol_residual = parse_f64(line_no, value)?,
                    "tol_k" => options.tol_k = parse_f64(line_no, value)?,
                    _ => return Err(err_at(line_no, format!("unknown key `{key}`"))),
                },
            }
        }

        let (n, dim_line) = dimension
            .ok_or_else(|| Error::Validation("missing `dimension` in [metric]".into()))?;
        if n < 2 {
            return Err(err_at(dim_line, format!("dimension must be >= 2, got {n}")));
        }
        if n > 9 {
            return Err(err_at(
                dim_line,
                format!("dimension must be <= 9 (variables are x1..x9), got {n}"),
            ));
        }
        if let Some(c) = &coords {
            if c.len() != n {
                return Err(Error::Validation(format!(
                    "coords lists {} names for dimension {n}",
                    c.len()
                )));
            }
        }

        // Collect upper-triangle sources in packed symmetric order and
        // validate each against the dimension.
        let mut a_sources = vec![String::new(); n * (n + 1) / 2];
        for i in 1..=n {
            for j in i..=n {
                match a_entries.remove(&(i, j)) {
                    Some((src, line_no)) => {
                        Expression::parse(&src, n).map_err(|e| {
                            err_at(line_no, format!("a{i}{j}: {e}"))
                        })?;
                        a_sources[sym_index(i - 1, j - 1)] = src;
                    }
                    None => {
                        return Err(Error::Validation(format!(
                            "missing metric entry a{i}{j}"
                        )))
                    }
                }
            }
        }
        if let Some(((i, j), (_, line_no))) = a_entries.into_iter().next() {
            return Err(err_at(
                line_no,
                format!("metric entry a{i}{j} is outside dimension {n}"),
            ));
        }

        let b_sources = if b_entries.is_empty() {
            None
        } else {
            let mut sources = vec![String::new(); n];
            for i in 1..=n {
                match b_entries.remove(&i) {
                    Some((src, line_no)) => {
                        Expression::parse(&src, n)
                            .map_err(|e| err_at(line_no, format!("b{i}: {e}")))?;
                        sources[i - 1] = src;
                    }
                    None => {
                        return Err(Error::Validation(format!("missing one-form entry b{i}")))
                    }
                }
            }
            if let Some((i, (_, line_no))) = b_entries.into_iter().next() {
                return Err(err_at(
                    line_no,
                    format!("one-form entry b{i} is outside dimension {n}"),
                ));
            }
            Some(sources)
        };

        let mut domain = Vec::with_capacity(n);
        for i in 1..=n {
            match domain_entries.remove(&i) {
                Some(((lo, hi), line_no)) => {
                    if !(lo < hi) {
                        return Err(err_at(
                            line_no,
                            format!("domain for x{i} needs lo < hi, got {lo}, {hi}"),
                        ));
                    }
                    domain.push((lo, hi));
                }
                None => return Err(Error::Validation(format!("missing domain for x{i}"))),
            }
        }
        if let Some((i, (_, line_no))) = domain_entries.into_iter().next() {
            return Err(err_at(
                line_no,
                format!("domain entry x{i} is outside dimension {n}"),
            ));
        }

        let file = MetricFile {
            dimension: n,
            coords,
            m,
            a_sources,
            b_sources,
            domain,
            options,
        };
        file.validate_mode()?;
        Ok(file)
    }

    fn validate_mode(&self) -> Result<()> {
        match self.options.mode {
            Mode::Kropina => {
                let m = self.m.ok_or_else(|| {
                    Error::Validation("kropina mode requires `m` in [metric]".into())
                })?;
                if m.abs() < 1e-12 || (m + 1.0).abs() < 1e-12 {
                    return Err(Error::Validation(
                        "m must not be 0 or -1 (within 1e-12)".into(),
                    ));
                }
                if self.b_sources.is_none() {
                    return Err(Error::Validation(
                        "kropina mode requires an [oneform] section".into(),
                    ));
                }
            }
            Mode::Riemannian => {}
        }
        Ok(())
    }

    /// Canonical serialization; `parse(serialize(f)) == f`.
    pub fn serialize(&self) -> String {
        let n = self.dimension;
        let mut out = String::new();
        out.push_str("[metric]\n");
        let _ = writeln!(out, "dimension = {n}");
        if let Some(coords) = &self.coords {
            let _ = writeln!(out, "coords = {}", coords.join(", "));
        }
        if let Some(m) = self.m {
            let _ = writeln!(out, "m = {m}");
        }
        for i in 1..=n {
            for j in i..=n {
                let _ = writeln!(
                    out,
                    "a{i}{j} = {}",
                    self.a_sources[sym_index(i - 1, j - 1)]
                );
            }
        }
        if let Some(b) = &self.b_sources {
            out.push_str("\n[oneform]\n");
            for (i, src) in b.iter().enumerate() {
                let _ = writeln!(out, "b{} = {src}", i + 1);
            }
        }
        out.push_str("\n[domain]\n");
        for (i, (lo, hi)) in self.domain.iter().enumerate() {
            let _ = writeln!(out, "x{} = {lo}, {hi}", i + 1);
        }
        out.push_str("\n[options]\n");
        let _ = writeln!(out, "mode = {}", self.options.mode.as_str());
        let _ = writeln!(out, "eps_beta = {}", self.options.eps_beta);
        let _ = writeln!(
            out,
            "s_window = {}, {}",
            self.options.s_window.0, self.options.s_window.1
        );
        let _ = writeln!(out, "tol_residual = {}", self.options.tol_residual);
        let _ = writeln!(out, "tol_k = {}", self.options.tol_k);
        out
    }

    pub fn metric_field(&self) -> Result<MetricField> {
        let refs: Vec<&str> = self.a_sources.iter().map(String::as_str).collect();
        MetricField::from_sources(self.dimension, &refs)
    }

    pub fn one_form_field(&self) -> Result<Option<OneFormField>> {
        match &self.b_sources {
            Some(sources) => {
                let refs: Vec<&str> = sources.iter().map(String::as_str).collect();
                Ok(Some(OneFormField::from_sources(self.dimension, &refs)?))
            }
            None => Ok(None),
        }
    }

    pub fn build_kropina(&self) -> Result<KropinaMetric> {
        let metric = self.metric_field()?;
        let form = self.one_form_field()?.ok_or_else(|| {
            Error::Validation("instance has no [oneform] section".into())
        })?;
        let m = self
            .m
            .ok_or_else(|| Error::Validation("instance has no exponent m".into()))?;
        KropinaMetric::with_options(
            metric,
            form,
            m,
            DomainOptions {
                eps_beta: self.options.eps_beta,
                s_window: self.options.s_window,
            },
        )
    }

    pub fn build_instance(&self) -> Result<CurvatureInstance> {
        match self.options.mode {
            Mode::Kropina => Ok(CurvatureInstance::Kropina(self.build_kropina()?)),
            Mode::Riemannian => Ok(CurvatureInstance::Riemannian(RiemannianSpray::new(
                self.metric_field()?,
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAT: &str = "\
# flat metric, parallel one-form
[metric]
dimension = 2
m = 2
a11 = 1
a12 = 0
a22 = 1

[oneform]
b1 = 2
b2 = 0

[domain]
x1 = -1, 1
x2 = -1, 1
";

    #[test]
    fn parses_and_round_trips() {
        let file = MetricFile::parse(FLAT).unwrap();
        assert_eq!(file.dimension, 2);
        assert_eq!(file.m, Some(2.0));
        assert_eq!(file.options.mode, Mode::Kropina);
        let reparsed = MetricFile::parse(&file.serialize()).unwrap();
        assert_eq!(file, reparsed);
        // And serialization is a fixed point from then on.
        assert_eq!(file.serialize(), reparsed.serialize());
    }

    #[test]
    fn accepts_crlf() {
        let crlf = FLAT.replace('\n', "\r\n");
        let file = MetricFile::parse(&crlf).unwrap();
        assert_eq!(file.dimension, 2);
    }

    #[test]
    fn rejects_bad_exponent_with_message() {
        let text = FLAT.replace("m = 2", "m = -1");
        let err = MetricFile::parse(&text).unwrap_err();
        assert!(err.to_string().contains("m must not be 0 or -1"));
    }

    #[test]
    fn rejects_out_of_range_variable_with_line() {
        let text = FLAT.replace("a12 = 0", "a12 = x3");
        let err = MetricFile::parse(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 6"), "{msg}");
        assert!(msg.contains("x3"), "{msg}");
    }

    #[test]
    fn rejects_missing_entries() {
        let text = FLAT.replace("a22 = 1\n", "");
        let err = MetricFile::parse(&text).unwrap_err();
        assert!(err.to_string().contains("missing metric entry a22"));

        let text = FLAT.replace("x2 = -1, 1\n", "");
        let err = MetricFile::parse(&text).unwrap_err();
        assert!(err.to_string().contains("missing domain for x2"));
    }

    #[test]
    fn rejects_invalid_domain_order() {
        let text = FLAT.replace("x1 = -1, 1", "x1 = 1, -1");
        let err = MetricFile::parse(&text).unwrap_err();
        assert!(err.to_string().contains("lo < hi"));
    }

    #[test]
    fn riemannian_mode_allows_missing_oneform() {
        let text = "\
[metric]
dimension = 2
a11 = 1
a12 = 0
a22 = sin(x1)^2

[domain]
x1 = 0.5, 2.6
x2 = 0, 6

[options]
mode = riemannian
";
        let file = MetricFile::parse(text).unwrap();
        assert_eq!(file.options.mode, Mode::Riemannian);
        assert!(file.b_sources.is_none());
        assert!(matches!(
            file.build_instance().unwrap(),
            CurvatureInstance::Riemannian(_)
        ));
        let reparsed = MetricFile::parse(&file.serialize()).unwrap();
        assert_eq!(file, reparsed);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = FLAT.replace("a11 = 1", "a11 = 1\nbogus = 3");
        let err = MetricFile::parse(&text).unwrap_err();
        assert!(err.to_string().contains("unknown key"));
    }
}
