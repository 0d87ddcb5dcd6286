use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use urnlab_core::generator::{AdaptedPerturbation, Deterministic, IidScalarMixture, PerturbationNoise, ProportionFeedback};
use urnlab_core::sa::StepSizeBand;
use urnlab_core::urn::decade_checkpoints;
use urnlab_core::{
    error_decomposition, ode_reference, replicate_seed, run, Matrix, OdeOptions, PathStreams, ReplacementGenerator,
    RunOptions, ScalarLaw, Series, Urn,
};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

fn friedman() -> Deterministic<f64> {
    Deterministic::new(Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap()).unwrap()
}

fn asymmetric() -> Matrix {
    Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap()
}

#[test]
fn draw_color_frequencies_match_composition() {
    let state = Urn::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 1_000_000;
    let mut counts = [0u64; 4];
    for _ in 0..draws {
        let u: f64 = rng.random();
        if u == 0.0 {
            continue;
        }
        counts[state.draw_color(u).unwrap()] += 1;
    }
    let total: u64 = counts.iter().sum();
    for (i, c) in counts.iter().enumerate() {
        let p = (i + 1) as f64 / 10.0;
        let se = (p * (1.0 - p) / total as f64).sqrt();
        assert!((*c as f64 / total as f64 - p).abs() < 3.0 * se, "color {i}: {counts:?}");
    }
}

#[test]
fn increments_bounded_by_replacement_norm() {
    let gen = IidScalarMixture::new(asymmetric(), ScalarLaw::Exponential { mean: 1.0 }).unwrap();
    let mut state = Urn::uniform(2);
    let mut streams = PathStreams::new(5);
    for _ in 0..10_000 {
        let before = state.total();
        let record = state.step(&gen, &mut streams).unwrap();
        assert!(record.increment_total >= 0.0);
        assert!(record.increment_total <= record.replacement.op_norm());
        assert_eq!(state.total(), before + record.increment_total);
    }
}

#[test]
fn runs_are_bit_reproducible() {
    let gen = AdaptedPerturbation::new(
        asymmetric(),
        Matrix::from_rows(&[[1.0, -0.5], [0.0, 2.0]]).unwrap(),
        0.5,
        PerturbationNoise::Exponential,
    )
    .unwrap();
    let opts = RunOptions::new(2000, vec![10, 100, 2000]).with_error_trace();
    let a = run(Urn::uniform(2), &gen, &opts, &mut PathStreams::new(99)).unwrap();
    let b = run(Urn::uniform(2), &gen, &opts, &mut PathStreams::new(99)).unwrap();
    assert_eq!(a, b);
    let bits = |t: &urnlab_core::PathTrajectory| -> Vec<u64> {
        t.final_state.composition().iter().map(|v| v.to_bits()).collect()
    };
    assert_eq!(bits(&a), bits(&b));
    let c = run(Urn::uniform(2), &gen, &opts, &mut PathStreams::new(100)).unwrap();
    assert_ne!(bits(&a), bits(&c));
}

#[test]
fn martingale_difference_has_mean_zero() {
    let base = Matrix::from_rows(&[[0.5, 1.0, 0.0], [0.0, 1.0, 2.0], [1.5, 0.0, 0.5]]).unwrap();
    let gen = IidScalarMixture::new(base, ScalarLaw::Exponential { mean: 2.0 }).unwrap();
    let mut prev = Urn::new(vec![3.0, 5.0, 2.0]).unwrap();
    // advance to epoch 20 so the truncation is nontrivial but rarely active
    let mut streams = PathStreams::new(1);
    for _ in 0..20 {
        prev.step(&gen, &mut streams).unwrap();
    }
    let moments = gen.exact_moments(prev.epoch() + 1, &prev).unwrap();
    let limit = gen.limit_matrix();
    let m = 10_000;
    let mut samples = vec![Vec::with_capacity(m); 3];
    for rep in 0..m {
        let mut next = prev.clone();
        let record = next.step(&gen, &mut PathStreams::new(replicate_seed(7, rep as u64))).unwrap();
        let terms = error_decomposition(&record, &prev, &limit, &moments.truncated_mean).unwrap();
        // δ is centered on the truncated increment; remove the tail part
        let tail: Vec<f64> = if record.replacement.op_norm() > record.epoch as f64 {
            let x = prev.proportions();
            let row = record.replacement.row(record.color);
            (0..3).map(|i| row[i] - x[i] * record.increment_total).collect()
        } else {
            vec![0.0; 3]
        };
        for i in 0..3 {
            samples[i].push(terms.delta[i] - tail[i]);
        }
    }
    for s in samples {
        let mean = s.iter().sum::<f64>() / m as f64;
        let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let se = (var / m as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
    }
}

fn analytic_generators() -> Vec<(&'static str, Box<dyn ReplacementGenerator<f64>>)> {
    let h = asymmetric();
    vec![
        ("deterministic", Box::new(Deterministic::new(h.clone()).unwrap())),
        ("two_point", Box::new(IidScalarMixture::new(h.clone(), ScalarLaw::FAIR_COIN).unwrap())),
        ("pareto", Box::new(IidScalarMixture::new(h.clone(), ScalarLaw::Pareto { scale: 1.0, shape: 1.5 }).unwrap())),
        ("log_pareto", Box::new(IidScalarMixture::new(h.clone(), ScalarLaw::LogPareto).unwrap())),
        (
            "adapted",
            Box::new(
                AdaptedPerturbation::new(
                    h.clone(),
                    Matrix::from_rows(&[[2.0, -1.0], [0.5, 1.0]]).unwrap(),
                    0.5,
                    PerturbationNoise::TwoPoint,
                )
                .unwrap(),
            ),
        ),
        ("feedback", Box::new(ProportionFeedback::new(h, 0.5).unwrap())),
    ]
}

#[test]
fn reconstruction_identity_holds_every_step() {
    for (name, gen) in analytic_generators() {
        let opts = RunOptions::new(10_000, vec![10_000]).with_diagnostics();
        let traj = run(Urn::uniform(2), gen.as_ref(), &opts, &mut PathStreams::new(3)).unwrap();
        let point = &traj.cesaro.unwrap().points[0];
        assert!(!point.estimated, "{name}");
        assert!(point.max_reconstruction <= 1e-9, "{name}: {}", point.max_reconstruction);
    }
}

#[test]
fn friedman_certificate_decays() {
    let horizon = 30_000;
    let mut early = Vec::new();
    let mut late = Vec::new();
    for seed in 0..20 {
        let opts = RunOptions::new(horizon, vec![horizon]).with_error_trace();
        let traj = run(Urn::uniform(2), &friedman(), &opts, &mut PathStreams::new(replicate_seed(21, seed))).unwrap();
        let rows = traj.error_trace.unwrap().certificate(&[100, 10_000], &[1.0]);
        early.push(rows[0].value.unwrap());
        late.push(rows[1].value.unwrap());
    }
    assert!(median(late.clone()) < median(early.clone()), "{early:?} {late:?}");
}

#[test]
fn eta_decays_for_friedman_urn() {
    let mut early = Vec::new();
    let mut late = Vec::new();
    for seed in 0..20 {
        let opts = RunOptions::new(100_000, vec![100, 100_000]).with_diagnostics();
        let traj = run(Urn::uniform(2), &friedman(), &opts, &mut PathStreams::new(replicate_seed(4, seed))).unwrap();
        let eta = traj.cesaro.unwrap().series(Series::Eta);
        early.push(eta[0].1.abs());
        late.push(eta[1].1.abs());
    }
    assert!(median(late) < median(early));
}

#[test]
fn eta_for_a_single_color_is_initial_mass_over_n() {
    let gen = Deterministic::new(Matrix::from_rows(&[[3.0]]).unwrap()).unwrap();
    let opts = RunOptions::new(50, vec![3, 10, 50]).with_diagnostics();
    let traj = run(Urn::new(vec![2.0]).unwrap(), &gen, &opts, &mut PathStreams::new(0)).unwrap();
    for point in traj.cesaro.unwrap().points {
        let n = point.epoch as f64;
        assert!((point.eta - 2.0 / n).abs() < 1e-12, "{point:?}");
        assert_eq!(point.delta, 0.0);
        assert_eq!(point.xi, 0.0);
    }
}

#[test]
fn deterministic_eta_bounded_by_norm() {
    let gen = Deterministic::new(asymmetric()).unwrap();
    let opts = RunOptions::new(10_000, decade_checkpoints(10_000)).with_diagnostics();
    let traj = run(Urn::uniform(2), &gen, &opts, &mut PathStreams::new(8)).unwrap();
    for point in traj.cesaro.unwrap().points.iter().filter(|p| p.epoch >= 10) {
        assert!(point.eta.abs() <= asymmetric().op_norm(), "{point:?}");
    }
}

#[test]
fn step_sizes_stay_in_the_norm_band() {
    let h = asymmetric();
    let gen = IidScalarMixture::new(h.clone(), ScalarLaw::FAIR_COIN).unwrap();
    let checkpoints: Vec<u64> = (0..=20).map(|i| (1000.0 * 100f64.powf(i as f64 / 20.0)).round() as u64).collect();
    let traj = run(Urn::uniform(2), &gen, &RunOptions::new(100_000, checkpoints), &mut PathStreams::new(12)).unwrap();
    let band = StepSizeBand::from_totals(&h, traj.checkpoints.iter().map(|s| s.total_per_epoch().unwrap()));
    assert!(band.within(0.0), "{band:?}");
    let lambda = h.spectrum().unwrap().lambda;
    assert!(band.observed_min < lambda + 0.5 && band.observed_max > lambda - 0.5);
}

fn tail_trace_decays(law: ScalarLaw) {
    let gen = IidScalarMixture::new(asymmetric(), law).unwrap();
    let mut early = Vec::new();
    let mut late = Vec::new();
    for seed in 0..20 {
        let opts = RunOptions::new(100_000, vec![100, 100_000]).with_diagnostics();
        let traj = run(Urn::uniform(2), &gen, &opts, &mut PathStreams::new(replicate_seed(31, seed))).unwrap();
        let tail = traj.cesaro.unwrap().series(Series::TailExpectation);
        early.push(tail[0].1);
        late.push(tail[1].1);
    }
    assert!(median(late.clone()) < median(early.clone()), "{law:?}: {early:?} {late:?}");
}

#[test]
fn tail_trace_decays_for_pareto() {
    tail_trace_decays(ScalarLaw::Pareto { scale: 1.0, shape: 1.5 });
}

#[test]
fn tail_trace_decays_for_log_pareto() {
    tail_trace_decays(ScalarLaw::LogPareto);
}

#[test]
fn bounded_generator_has_empty_tail() {
    let gen = IidScalarMixture::new(asymmetric(), ScalarLaw::FAIR_COIN).unwrap();
    let mut streams = PathStreams::new(2);
    let state = Urn::uniform(2);
    let bound = gen.norm_bound().unwrap();
    for epoch in [bound.ceil() as u64, 100, 10_000] {
        assert_eq!(gen.moments(epoch, &state, &mut streams.estimate).tail_norm, 0.0);
    }
}

#[test]
fn ode_attracts_random_starts() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let matrices = [
        Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap(),
        asymmetric(),
        Matrix::from_rows(&[[0.2, 1.0, 0.0], [0.0, 0.5, 1.0], [1.0, 0.3, 0.1]]).unwrap(),
    ];
    for h in matrices {
        let pi = h.spectrum().unwrap().pi;
        for _ in 0..20 {
            let raw: Vec<f64> = (0..h.dim()).map(|_| rng.random_range(0.01..1.0)).collect();
            let s: f64 = raw.iter().sum();
            let x0: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let grid: Vec<f64> = (0..=50).map(|t| t as f64).collect();
            let sol = ode_reference(&h, &x0, &grid, OdeOptions::default()).unwrap();
            for x in &sol.states {
                assert!((x.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
            let end = sol.states.last().unwrap();
            let dist: f64 = end.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            assert!(dist <= 1e-4, "{h:?} from {x0:?}: {dist}");
        }
    }
}

#[test]
fn interpolated_path_tracks_the_ode() {
    let h = Matrix::from_rows(&[[0.25, 0.5], [0.75, 0.25]]).unwrap();
    let gen = Deterministic::new(h.clone()).unwrap();
    let mut state = Urn::new(vec![900.0, 100.0]).unwrap();
    let mut streams = PathStreams::new(6);
    let mut times = vec![0.0];
    let mut path = vec![state.proportions()];
    let mut t = 0.0;
    while t < 5.0 {
        state.step(&gen, &mut streams).unwrap();
        t += 1.0 / state.total();
        times.push(t);
        path.push(state.proportions());
    }
    let stride = 50;
    let grid: Vec<f64> = times.iter().step_by(stride).copied().collect();
    let sol = ode_reference(&h, &path[0], &grid, OdeOptions::default()).unwrap();
    let worst = sol
        .states
        .iter()
        .zip(path.iter().step_by(stride))
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    assert!(worst <= 0.05, "{worst}");
}
