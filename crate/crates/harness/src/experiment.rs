//! Replicated runs, merged into per-checkpoint convergence summaries.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use urnlab_core::erw::erw_run;
use urnlab_core::generator::ReplacementGenerator;
use urnlab_core::scalar::l1_distance;
use urnlab_core::seed::mix64;
use urnlab_core::{ode_reference, replicate_seed, run, OdeOptions, PathStreams, RunOptions, Series, Urn};

use crate::config::{ExperimentConfig, GeneratorConfig, Model};
use crate::error::{HarnessError, Result};

/// Values of one named series at a sequence of epochs.
pub type SeriesValues = Vec<(u64, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub index: u64,
    pub seed: u64,
    pub series: BTreeMap<String, SeriesValues>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryPoint {
    pub n: u64,
    pub mean: f64,
    pub stderr: f64,
    pub median: f64,
    /// Replicates contributing a finite value.
    pub count: u64,
}

/// Mean, standard error and median across replicates of every series at
/// every recorded epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSummary {
    pub model: Model,
    pub replicates: u64,
    pub master_seed: u64,
    /// Dominant eigenvalue of the limit matrix (urn) or `1 + a` (walk).
    pub lambda: f64,
    /// Perron vector of the limit matrix.
    pub pi: Vec<f64>,
    pub series: BTreeMap<String, Vec<SummaryPoint>>,
}

impl ConvergenceSummary {
    pub fn point(&self, series: &str, n: u64) -> Option<&SummaryPoint> {
        self.series.get(series)?.iter().find(|p| p.n == n)
    }

    pub fn last(&self, series: &str) -> Option<&SummaryPoint> {
        self.series.get(series)?.last()
    }

    fn from_replicates(model: Model, config: &ExperimentConfig, lambda: f64, pi: Vec<f64>, reps: &[ReplicateResult]) -> Self {
        let mut pooled: BTreeMap<&str, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
        for rep in reps {
            for (name, values) in &rep.series {
                let slot = pooled.entry(name.as_str()).or_default();
                for (n, v) in values {
                    slot.entry(*n).or_default().push(*v);
                }
            }
        }
        let series = pooled
            .into_iter()
            .map(|(name, by_n)| (name.to_string(), by_n.into_iter().map(|(n, v)| summarize(n, v)).collect()))
            .collect();
        Self { model, replicates: config.replicates, master_seed: config.master_seed, lambda, pi, series }
    }
}

fn summarize(n: u64, values: Vec<f64>) -> SummaryPoint {
    let mut finite: Vec<f64> = values.into_iter().filter(|v| v.is_finite()).collect();
    let m = finite.len();
    if m == 0 {
        return SummaryPoint { n, mean: f64::NAN, stderr: f64::NAN, median: f64::NAN, count: 0 };
    }
    let mean = finite.iter().sum::<f64>() / m as f64;
    let stderr = if m > 1 {
        (finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64 / m as f64).sqrt()
    } else {
        0.0
    };
    finite.sort_by(|a, b| a.total_cmp(b));
    let median = if m % 2 == 1 { finite[m / 2] } else { 0.5 * (finite[m / 2 - 1] + finite[m / 2]) };
    SummaryPoint { n, mean, stderr, median, count: m as u64 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Canonical configuration the run used.
    pub config: ExperimentConfig,
    pub replicates: Vec<ReplicateResult>,
    pub summary: ConvergenceSummary,
}

/// Worker count; `None` uses every available core.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunSettings {
    pub workers: Option<usize>,
}

/// Runs every replicate of `config` on a pool of `settings.workers` threads.
/// Results do not depend on the worker count.
pub fn run_experiment(config: &ExperimentConfig, settings: RunSettings) -> Result<ExperimentResult> {
    config.validate()?;
    let config = config.canonical();
    let model = BuiltModel::build(&config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.workers.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let replicates: Vec<ReplicateResult> = pool.install(|| {
        (0..config.replicates)
            .into_par_iter()
            .map(|index| model.replicate(&config, index))
            .collect::<Result<_>>()
    })?;
    let summary =
        ConvergenceSummary::from_replicates(config.model, &config, model.lambda(), model.pi(), &replicates);
    Ok(ExperimentResult { config, replicates, summary })
}

enum BuiltModel {
    Urn { generator: Box<dyn ReplacementGenerator<f64>>, lambda: f64, pi: Vec<f64>, random_start: bool },
    Erw { params: urnlab_core::ErwParams },
}

impl BuiltModel {
    fn build(config: &ExperimentConfig) -> Result<Self> {
        match config.model {
            Model::Urn => {
                let gen_config = config.generator.as_ref().expect("validated");
                let generator = gen_config.build()?;
                let spectrum = generator.limit_matrix().spectrum().map_err(HarnessError::Contract)?;
                Ok(BuiltModel::Urn {
                    generator,
                    lambda: spectrum.lambda,
                    pi: spectrum.pi,
                    random_start: config.initial.is_none() && matches!(gen_config, GeneratorConfig::Erw(_)),
                })
            }
            Model::Erw => Ok(BuiltModel::Erw { params: config.erw.as_ref().expect("validated").params()? }),
        }
    }

    fn lambda(&self) -> f64 {
        match self {
            BuiltModel::Urn { lambda, .. } => *lambda,
            BuiltModel::Erw { params } => 1.0 + params.a(),
        }
    }

    fn pi(&self) -> Vec<f64> {
        match self {
            BuiltModel::Urn { pi, .. } => pi.clone(),
            BuiltModel::Erw { params } => params.perron_vector(),
        }
    }

    fn replicate(&self, config: &ExperimentConfig, index: u64) -> Result<ReplicateResult> {
        let seed = replicate_seed(config.master_seed, index);
        let series = match self {
            BuiltModel::Urn { generator, lambda, pi, random_start } => {
                urn_replicate(config, generator.as_ref(), *lambda, pi, *random_start, seed)?
            }
            BuiltModel::Erw { params } => erw_replicate(config, params, seed)?,
        };
        Ok(ReplicateResult { index, seed, series })
    }
}

fn push(map: &mut BTreeMap<String, SeriesValues>, name: impl Into<String>, n: u64, value: f64) {
    map.entry(name.into()).or_default().push((n, value));
}

fn urn_replicate(
    config: &ExperimentConfig,
    generator: &dyn ReplacementGenerator<f64>,
    lambda: f64,
    pi: &[f64],
    random_start: bool,
    seed: u64,
) -> Result<BTreeMap<String, SeriesValues>> {
    let k = generator.dim();
    let initial = match &config.initial {
        Some(c) => Urn::new(c.clone()).map_err(|e| HarnessError::Config(e.to_string()))?,
        None if random_start => {
            // the walk's first step is uniform over the types
            let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed));
            let mut c = vec![0.0; k];
            c[rng.random_range(0..k)] = 1.0;
            Urn::new(c).expect("one ball")
        }
        None => Urn::uniform(k),
    };
    let diagnostics = &config.diagnostics;
    let mut options = RunOptions::new(config.horizon, config.resolved_checkpoints());
    if diagnostics.certificate.is_some() {
        options = options.with_error_trace();
    } else if diagnostics.needs_monitor() {
        options = options.with_diagnostics();
    }
    let traj = run(initial, generator, &options, &mut PathStreams::new(seed)).map_err(HarnessError::Contract)?;

    let mut out = BTreeMap::new();
    let scaled_pi: Vec<f64> = pi.iter().map(|p| lambda * p).collect();
    for state in &traj.checkpoints {
        let n = state.epoch();
        let x = state.proportions();
        let counts = state.counts_per_epoch().expect("checkpoints are past epoch 0");
        let per_epoch = state.composition_per_epoch().expect("checkpoints are past epoch 0");
        let s_per_n = state.total_per_epoch().expect("checkpoints are past epoch 0");
        push(&mut out, "proportion_error", n, l1_distance(&x, pi));
        push(&mut out, "total_error", n, (s_per_n - lambda).abs());
        push(&mut out, "count_error", n, l1_distance(&counts, pi));
        push(&mut out, "composition_error", n, l1_distance(&per_epoch, &scaled_pi));
        push(&mut out, "total_per_epoch", n, s_per_n);
        for i in 0..k {
            push(&mut out, format!("proportion_{i}"), n, x[i]);
            push(&mut out, format!("count_{i}"), n, counts[i]);
            push(&mut out, format!("composition_{i}"), n, per_epoch[i]);
        }
    }
    if let Some(trace) = &traj.cesaro {
        for point in &trace.points {
            if diagnostics.sa_decomposition {
                for s in [Series::Delta, Series::Xi, Series::Gap, Series::Eta] {
                    push(&mut out, s.name(), point.epoch, point.get(s));
                }
                push(&mut out, "max_reconstruction", point.epoch, point.max_reconstruction);
            }
            if diagnostics.tail_ce {
                push(&mut out, Series::TailExpectation.name(), point.epoch, point.tail_expectation);
            }
        }
    }
    if let (Some(cert), Some(trace)) = (&diagnostics.certificate, &traj.error_trace) {
        let starts: Vec<usize> = cert.starts.iter().map(|s| *s as usize).filter(|s| *s <= trace.step_sizes.len()).collect();
        for row in trace.certificate(&starts, &cert.horizons) {
            push(&mut out, format!("certificate_T{}", row.horizon), row.start as u64, row.value.unwrap_or(f64::NAN));
        }
    }
    if diagnostics.ode_compare {
        let x0 = traj.initial.proportions();
        let mut grid = vec![0.0];
        grid.extend_from_slice(&traj.times);
        let limit = generator.limit_matrix();
        let sol = ode_reference(&limit, &x0, &grid, OdeOptions::default()).map_err(HarnessError::Contract)?;
        for (state, ode) in traj.checkpoints.iter().zip(&sol.states[1..]) {
            push(&mut out, "ode_gap", state.epoch(), l1_distance(&state.proportions(), ode));
        }
    }
    Ok(out)
}

fn erw_replicate(
    config: &ExperimentConfig,
    params: &urnlab_core::ErwParams,
    seed: u64,
) -> Result<BTreeMap<String, SeriesValues>> {
    let erw = config.erw.as_ref().expect("validated");
    let options = erw.run_options(config.horizon, config.resolved_checkpoints());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let traj = erw_run(params, &options, &mut rng).map_err(HarnessError::Contract)?;
    let limit = params.theoretical_limit();
    let memory_limit: Vec<f64> = params.perron_vector().iter().map(|p| (1.0 + params.a()) * p).collect();
    let mut out = BTreeMap::new();
    for snap in &traj.checkpoints {
        let n = snap.epoch;
        push(&mut out, "location_error", n, l1_distance(&snap.location, &limit));
        push(&mut out, "memory_error", n, l1_distance(&snap.type_memory, &memory_limit));
        for (i, v) in snap.location.iter().enumerate() {
            push(&mut out, format!("location_{}", i + 1), n, *v);
        }
        for (i, v) in snap.type_memory.iter().enumerate() {
            push(&mut out, format!("memory_{i}"), n, *v);
        }
        for (i, v) in snap.selections.iter().enumerate() {
            push(&mut out, format!("selection_{i}"), n, *v);
        }
    }
    Ok(out)
}
