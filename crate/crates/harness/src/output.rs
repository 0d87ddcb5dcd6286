//! CSV outputs. Every float is written with 17 significant digits so values
//! round-trip exactly; files from `simulate` start with `#` lines carrying
//! the tool version, master seed and canonical configuration.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{HarnessError, Result};
use crate::experiment::{ConvergenceSummary, ExperimentResult};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const REPLICATES_FILE: &str = "replicates.csv";
pub const PLOT_FILE: &str = "plot.csv";
pub const CONFIG_FILE: &str = "config.toml";

pub const PLOT_COLUMNS: [&str; 7] = ["model", "series", "n", "mean", "stderr", "replicates", "seed"];

/// Float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn provenance_header(result: &ExperimentResult) -> Result<String> {
    let mut out = format!(
        "# urnlab {}\n# master_seed = {}\n# config (canonical TOML):\n",
        env!("CARGO_PKG_VERSION"),
        result.config.master_seed
    );
    for line in result.config.to_canonical_toml()?.lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    Ok(out)
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))
}

/// Per-series, per-checkpoint statistics.
pub fn summary_csv(result: &ExperimentResult) -> Result<Vec<u8>> {
    let summary = &result.summary;
    let rows = summary.series.iter().flat_map(|(name, points)| {
        points.iter().map(move |p| {
            vec![
                summary.model.name().to_string(),
                name.clone(),
                p.n.to_string(),
                fmt_f64(p.mean),
                fmt_f64(p.stderr),
                fmt_f64(p.median),
                p.count.to_string(),
                summary.master_seed.to_string(),
            ]
        })
    });
    let mut out = provenance_header(result)?.into_bytes();
    out.extend(csv_bytes(&["model", "series", "n", "mean", "stderr", "median", "replicates", "seed"], rows)?);
    Ok(out)
}

/// Every replicate's raw values.
pub fn replicates_csv(result: &ExperimentResult) -> Result<Vec<u8>> {
    let rows = result.replicates.iter().flat_map(|rep| {
        rep.series.iter().flat_map(move |(name, values)| {
            values.iter().map(move |(n, v)| {
                vec![rep.index.to_string(), rep.seed.to_string(), name.clone(), n.to_string(), fmt_f64(*v)]
            })
        })
    });
    let mut out = provenance_header(result)?.into_bytes();
    out.extend(csv_bytes(&["replicate", "seed", "series", "n", "value"], rows)?);
    Ok(out)
}

/// One row of long-format plot data.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PlotRow {
    pub model: String,
    pub series: String,
    pub n: u64,
    pub mean: f64,
    pub stderr: f64,
    pub replicates: u64,
    pub seed: u64,
}

impl PlotRow {
    pub fn from_summary(summary: &ConvergenceSummary) -> Vec<PlotRow> {
        summary
            .series
            .iter()
            .flat_map(|(name, points)| {
                points.iter().map(move |p| PlotRow {
                    model: summary.model.name().to_string(),
                    series: name.clone(),
                    n: p.n,
                    mean: p.mean,
                    stderr: p.stderr,
                    replicates: p.count,
                    seed: summary.master_seed,
                })
            })
            .collect()
    }
}

/// Long-format CSV with columns [`PLOT_COLUMNS`], rows ordered by series
/// and then by `n`.
pub fn emit_plot_data(rows: &[PlotRow]) -> Result<Vec<u8>> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| (&a.series, a.n).cmp(&(&b.series, b.n)));
    csv_bytes(
        &PLOT_COLUMNS,
        sorted.into_iter().map(|r| {
            vec![r.model, r.series, r.n.to_string(), fmt_f64(r.mean), fmt_f64(r.stderr), r.replicates.to_string(), r.seed.to_string()]
        }),
    )
}

/// Reads the rows of a summary CSV written by [`summary_csv`].
pub fn read_summary(path: &Path) -> Result<Vec<PlotRow>> {
    let text = fs::read(path).map_err(HarnessError::io(path))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_slice());
    reader.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(HarnessError::io(path))?;
    f.write_all(bytes).map_err(HarnessError::io(path))
}

/// Writes the canonical config, summary, replicate and plot CSVs into `dir`.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
    let files = [
        (CONFIG_FILE, result.config.to_canonical_toml()?.into_bytes()),
        (SUMMARY_FILE, summary_csv(result)?),
        (REPLICATES_FILE, replicates_csv(result)?),
        (PLOT_FILE, emit_plot_data(&PlotRow::from_summary(&result.summary))?),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = dir.join(name);
        write_file(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(series: &str, n: u64) -> PlotRow {
        PlotRow { model: "urn".into(), series: series.into(), n, mean: 0.1, stderr: 0.0, replicates: 3, seed: 9 }
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 5.372281323269014, 1e-300, -2.5e17, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn empty_plot_data_is_header_only() {
        let bytes = emit_plot_data(&[]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "model,series,n,mean,stderr,replicates,seed\n");
    }

    #[test]
    fn plot_rows_sorted_by_series_then_n() {
        let bytes = emit_plot_data(&[row("b", 10), row("a", 100), row("b", 1), row("a", 10)]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let keys: Vec<(String, String)> =
            text.lines().skip(1).map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (f[1].to_string(), f[2].to_string())
            }).collect();
        let expected = [("a", "10"), ("a", "100"), ("b", "1"), ("b", "10")];
        assert_eq!(keys, expected.map(|(a, b)| (a.to_string(), b.to_string())));
    }

    #[test]
    fn single_point_gives_one_row() {
        let bytes = emit_plot_data(&[row("proportion_error", 100)]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap().lines().count(), 2);
    }
}
