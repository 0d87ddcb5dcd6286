//! Assumption diagnostics for an urn experiment: spectral data of the limit,
//! the moment check on `‖R_n‖`, the step-size band and the Cesàro traces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use urnlab_core::moment::{moment_diagnostic, MomentProfile, Phi};
use urnlab_core::urn::decade_checkpoints;
use urnlab_core::Urn;

use crate::analyze::{analyze_matrix, MatrixReport};
use crate::config::{ExperimentConfig, Model};
use crate::error::{HarnessError, Result};
use crate::experiment::{run_experiment, ExperimentResult, RunSettings};

pub const DEFAULT_MOMENT_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSummary {
    pub profile: String,
    pub epochs: Vec<u64>,
    pub estimates: Vec<f64>,
    pub std_errs: Vec<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSizeSummary {
    pub sigma: f64,
    pub norm: f64,
    /// Range of the replicate-mean `S_n / n` over checkpoints with `n ≥ 1000`
    /// (all checkpoints when none is that late).
    pub observed_min: f64,
    pub observed_max: f64,
    pub within: bool,
}

/// Final value of each Cesàro trace, averaged over replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSummary {
    pub series: String,
    pub first_n: u64,
    pub first_mean: f64,
    pub last_n: u64,
    pub last_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub limit: MatrixReport,
    pub moment: MomentSummary,
    pub step_size: StepSizeSummary,
    pub traces: Vec<TraceSummary>,
    #[serde(skip)]
    pub experiment: ExperimentResult,
}

/// Runs the experiment with the SA decomposition and tail traces switched
/// on, then adds the moment check (a `(log₊ x)²` profile unless configured)
/// and the step-size band.
pub fn diagnose(config: &ExperimentConfig, settings: RunSettings) -> Result<DiagnosticsReport> {
    if config.model != Model::Urn {
        return Err(HarnessError::Config("diagnose applies to model \"urn\"".into()));
    }
    let mut config = config.clone();
    config.diagnostics.sa_decomposition = true;
    config.diagnostics.tail_ce = true;
    let experiment = run_experiment(&config, settings)?;
    let generator = config.generator.as_ref().expect("validated").build()?;
    let limit_matrix = generator.limit_matrix();
    let limit = analyze_matrix(&limit_matrix)?;

    let (profile, samples, epochs) = match &config.diagnostics.moment {
        Some(m) => (MomentProfile::from(m.profile), m.samples, m.epochs.clone()),
        None => (
            MomentProfile::PhiMoment(Phi::LogPower { p: 2.0 }),
            DEFAULT_MOMENT_SAMPLES,
            decade_checkpoints(config.horizon),
        ),
    };
    let state = Urn::new(experiment.config.initial.clone().unwrap_or_else(|| vec![1.0; generator.dim()]))
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    let report = moment_diagnostic(generator.as_ref(), &state, &profile, &epochs, samples, &mut rng)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let moment = MomentSummary {
        profile: format!("{profile:?}"),
        epochs: report.rows.iter().map(|r| r.epoch).collect(),
        estimates: report.rows.iter().map(|r| r.estimate).collect(),
        std_errs: report.rows.iter().map(|r| r.std_err).collect(),
        flagged: report.flagged,
    };

    let totals = &experiment.summary.series["total_per_epoch"];
    let late: Vec<f64> = totals.iter().filter(|p| p.n >= 1000).map(|p| p.mean).collect();
    let used: Vec<f64> = if late.is_empty() { totals.iter().map(|p| p.mean).collect() } else { late };
    let observed_min = used.iter().copied().fold(f64::INFINITY, f64::min);
    let observed_max = used.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let step_size = StepSizeSummary {
        sigma: limit.sigma,
        norm: limit.norm,
        observed_min,
        observed_max,
        within: observed_min > 0.0 && observed_min >= limit.sigma - 1e-9 && observed_max <= limit.norm + 1e-9,
    };

    let traces = ["cesaro_delta", "cesaro_xi", "cesaro_gap", "eta", "tail_ce", "max_reconstruction"]
        .iter()
        .filter_map(|name| {
            let points = experiment.summary.series.get(*name)?;
            let (first, last) = (points.first()?, points.last()?);
            Some(TraceSummary {
                series: name.to_string(),
                first_n: first.n,
                first_mean: first.mean,
                last_n: last.n,
                last_mean: last.mean,
            })
        })
        .collect();

    Ok(DiagnosticsReport { limit, moment, step_size, traces, experiment })
}
