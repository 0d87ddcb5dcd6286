//! Spectral summary of a nonnegative matrix.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use urnlab_core::{ErwParams, Matrix, Reinforcement};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixReport {
    pub dim: usize,
    pub irreducible: bool,
    /// Largest absolute row sum.
    pub norm: f64,
    /// Smallest absolute row sum.
    pub sigma: f64,
    /// Present only for irreducible matrices.
    pub lambda: Option<f64>,
    pub pi: Option<Vec<f64>>,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
}

pub fn analyze_matrix(m: &Matrix) -> Result<MatrixReport> {
    m.check_nonnegative().map_err(|e| HarnessError::Config(e.to_string()))?;
    let irreducible = m.is_irreducible().map_err(HarnessError::Contract)?;
    let spectrum = if irreducible { Some(m.spectrum().map_err(HarnessError::Contract)?) } else { None };
    Ok(MatrixReport {
        dim: m.dim(),
        irreducible,
        norm: m.op_norm(),
        sigma: m.sigma(),
        lambda: spectrum.as_ref().map(|s| s.lambda),
        pi: spectrum.as_ref().map(|s| s.pi.clone()),
        iterations: spectrum.as_ref().map(|s| s.iterations),
        residual: spectrum.as_ref().map(|s| s.residual),
    })
}

#[derive(Deserialize)]
struct MatrixFile {
    matrix: Vec<Vec<f64>>,
}

/// Parses a matrix written as nested arrays, e.g. `[[2, 1], [1, 2]]`, or a
/// TOML document with a `matrix` key.
pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = match serde_json::from_str(text.trim()) {
        Ok(rows) => rows,
        Err(json_err) => match toml::from_str::<MatrixFile>(text) {
            Ok(file) => file.matrix,
            Err(_) => return Err(HarnessError::Config(format!("cannot read matrix: {json_err}"))),
        },
    };
    Matrix::from_rows(&rows).map_err(|e| HarnessError::Config(e.to_string()))
}

/// Parses `key=value` tokens (`d`, `a`, `p`, `q`) into walk parameters with
/// constant reinforcement `a`.
pub fn parse_erw_params(tokens: &[String]) -> Result<ErwParams> {
    let (mut d, mut a, mut p, mut q) = (None, None, None, None);
    for token in tokens.iter().flat_map(|t| t.split([' ', ','])).filter(|t| !t.is_empty()) {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("expected key=value, got {token:?}")))?;
        let bad = |_| HarnessError::Config(format!("bad value for {key}: {value:?}"));
        match key {
            "d" => d = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "a" => a = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "p" => p = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "q" => q = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            other => return Err(HarnessError::Config(format!("unknown walk parameter {other:?}"))),
        }
    }
    let need = |v: Option<f64>, k: &str| v.ok_or_else(|| HarnessError::Config(format!("missing walk parameter {k}")));
    let d = d.ok_or_else(|| HarnessError::Config("missing walk parameter d".into()))?;
    ErwParams::new(d, need(p, "p")?, need(q, "q")?, Reinforcement::Constant { a: need(a, "a")? })
        .map_err(|e| HarnessError::Config(e.to_string()))
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.10}")).collect();
    format!("({})", parts.join(", "))
}

pub fn render_table(report: &MatrixReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dimension    {}", report.dim);
    let _ = writeln!(out, "irreducible  {}", if report.irreducible { "yes" } else { "no (not irreducible)" });
    let _ = writeln!(out, "norm         {:.10}", report.norm);
    let _ = writeln!(out, "sigma        {:.10}", report.sigma);
    if let (Some(lambda), Some(pi)) = (report.lambda, &report.pi) {
        let _ = writeln!(out, "lambda       {lambda:.10}");
        let _ = writeln!(out, "pi           {}", fmt_vec(pi));
    }
    out
}
