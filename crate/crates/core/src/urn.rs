//! The urn Markov chain.
//!
//! At epoch `n` a color is drawn with probability proportional to the
//! current composition and the matching row of a random replacement matrix
//! `R_n` is added: `C_n = C_{n−1} + χ_n R_n`.

use rand_distr::{Distribution, Open01};

use crate::error::{Error, Result};
use crate::generator::ReplacementGenerator;
use crate::matrix::NonnegMatrix;
use crate::sa::{CesaroTrace, ErrorTrace, SaMonitor};
use crate::scalar::Scalar;
use crate::seed::PathStreams;

/// Composition `C_n`, total `S_n`, draw counts `N_n` and epoch `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct UrnState<T> {
    composition: Vec<T>,
    total: T,
    counts: Vec<u64>,
    epoch: u64,
}

impl<T: Scalar> UrnState<T> {
    /// Starts an urn at epoch 0. The composition must be nonzero, finite
    /// and nonnegative.
    pub fn new(composition: Vec<T>) -> Result<Self> {
        if composition.is_empty() {
            return Err(Error::InvalidComposition("no colors".into()));
        }
        if let Some(i) = composition.iter().position(|c| !c.is_finite() || *c < T::zero()) {
            return Err(Error::InvalidComposition(format!(
                "color {} has entry {}",
                i,
                composition[i]
            )));
        }
        let total: T = composition.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::InvalidComposition("composition is the zero vector".into()));
        }
        let k = composition.len();
        Ok(Self { composition, total, counts: vec![0; k], epoch: 0 })
    }

    /// One ball of every color.
    pub fn uniform(k: usize) -> Self {
        Self::new(vec![T::one(); k]).expect("k > 0")
    }

    pub fn dim(&self) -> usize {
        self.composition.len()
    }

    pub fn composition(&self) -> &[T] {
        &self.composition
    }

    pub fn total(&self) -> T {
        self.total
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// `C_n / S_n`.
    pub fn proportions(&self) -> Vec<T> {
        self.composition.iter().map(|c| *c / self.total).collect()
    }

    /// `S_n / n`; `None` at epoch 0.
    pub fn total_per_epoch(&self) -> Option<T> {
        (self.epoch > 0).then(|| self.total / T::of(self.epoch as f64))
    }

    /// `C_n / n`; `None` at epoch 0.
    pub fn composition_per_epoch(&self) -> Option<Vec<T>> {
        let n = T::of(self.epoch as f64);
        (self.epoch > 0).then(|| self.composition.iter().map(|c| *c / n).collect())
    }

    /// `N_n / n`; `None` at epoch 0.
    pub fn counts_per_epoch(&self) -> Option<Vec<T>> {
        let n = self.epoch as f64;
        (self.epoch > 0).then(|| self.counts.iter().map(|c| T::of(*c as f64 / n)).collect())
    }

    /// Inverse-CDF color choice: color `i` (0-based) is chosen when
    /// `u ∈ (Σ_{j<i} C_j/S, Σ_{j≤i} C_j/S]`. Colors with no mass have empty
    /// intervals and are never chosen.
    pub fn draw_color(&self, u: T) -> Result<usize> {
        if !(u > T::zero() && u < T::one()) {
            return Err(Error::UniformOutOfRange(u.as_f64()));
        }
        let target = u * self.total;
        let mut cumulative = T::zero();
        let mut last_positive = 0;
        for (i, c) in self.composition.iter().enumerate() {
            if *c > T::zero() {
                cumulative += *c;
                last_positive = i;
                if target <= cumulative {
                    return Ok(i);
                }
            }
        }
        // rounding in the running sum can leave u·S just above the last edge
        Ok(last_positive)
    }

    /// Adds row `color` of `replacement`, returning the increment
    /// `Y_n = χ_n R_n 1ᵀ`. The matrix must be finite and nonnegative.
    pub fn apply(&mut self, color: usize, replacement: &NonnegMatrix<T>) -> Result<T> {
        let k = self.dim();
        if replacement.dim() != k {
            return Err(Error::DimensionMismatch { expected: k, got: replacement.dim() });
        }
        if color >= k {
            return Err(Error::InvalidParameter(format!("color {color} out of range for {k} colors")));
        }
        replacement.check_finite()?;
        replacement.check_nonnegative()?;
        let mut increment = T::zero();
        for (c, r) in self.composition.iter_mut().zip(replacement.row(color)) {
            *c += *r;
            increment += *r;
        }
        self.total += increment;
        self.counts[color] += 1;
        self.epoch += 1;
        Ok(increment)
    }

    /// One draw of the chain: the color from `streams.color`, `R_n` from
    /// `streams.replacement`.
    pub fn step<G>(&mut self, generator: &G, streams: &mut PathStreams) -> Result<DrawRecord<T>>
    where
        G: ReplacementGenerator<T> + ?Sized,
    {
        let epoch = self.epoch + 1;
        let u = uniform_open::<T>(&mut streams.color);
        let color = self.draw_color(u)?;
        let replacement = generator.sample(epoch, self, &mut streams.replacement);
        let increment_total = self
            .apply(color, &replacement)
            .map_err(|e| Error::InvalidReplacement { epoch, source: Box::new(e) })?;
        Ok(DrawRecord { epoch, color, replacement, increment_total, uniform_used: u })
    }
}

fn uniform_open<T: Scalar>(rng: &mut rand_chacha::ChaCha8Rng) -> T {
    let u: f64 = Open01.sample(rng);
    let u = T::of(u);
    // single precision can round values near 1 up to 1
    if u >= T::one() {
        T::one() - T::epsilon()
    } else if u <= T::zero() {
        T::min_positive_value()
    } else {
        u
    }
}

/// What happened at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawRecord<T> {
    pub epoch: u64,
    /// 0-based color index.
    pub color: usize,
    pub replacement: NonnegMatrix<T>,
    /// `Y_n`, between 0 and `‖R_n‖`.
    pub increment_total: T,
    pub uniform_used: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub horizon: u64,
    /// Sorted epochs in `1..=horizon` at which to snapshot the chain.
    pub checkpoints: Vec<u64>,
    /// Evaluate the stochastic-approximation decomposition every step.
    pub diagnostics: bool,
    /// Keep `(a_k, γ_k)` for every step; needs `diagnostics`.
    pub record_errors: bool,
}

impl RunOptions {
    pub fn new(horizon: u64, checkpoints: Vec<u64>) -> Self {
        Self { horizon, checkpoints, diagnostics: false, record_errors: false }
    }

    pub fn with_diagnostics(mut self) -> Self {
        self.diagnostics = true;
        self
    }

    pub fn with_error_trace(mut self) -> Self {
        self.diagnostics = true;
        self.record_errors = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.checkpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("checkpoints must be strictly increasing".into()));
        }
        if let Some(&c) = self.checkpoints.iter().find(|&&c| c == 0 || c > self.horizon) {
            return Err(Error::InvalidParameter(format!(
                "checkpoint {c} outside 1..={}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Powers of two up to `horizon`, plus `horizon` itself.
pub fn geometric_checkpoints(horizon: u64) -> Vec<u64> {
    let mut out: Vec<u64> = std::iter::successors(Some(1u64), |c| c.checked_mul(2))
        .take_while(|c| *c <= horizon)
        .collect();
    if horizon > 0 && out.last() != Some(&horizon) {
        out.push(horizon);
    }
    out
}

/// Powers of ten up to `horizon`, plus `horizon` itself.
pub fn decade_checkpoints(horizon: u64) -> Vec<u64> {
    let mut out: Vec<u64> = std::iter::successors(Some(1u64), |c| c.checked_mul(10))
        .take_while(|c| *c <= horizon)
        .collect();
    if horizon > 0 && out.last() != Some(&horizon) {
        out.push(horizon);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub initial: UrnState<T>,
    /// Chain state at each requested checkpoint.
    pub checkpoints: Vec<UrnState<T>>,
    /// Algorithmic time `Σ_{k ≤ n} 1/S_k` at each checkpoint.
    pub times: Vec<T>,
    pub final_state: UrnState<T>,
    /// Cesàro averages at the checkpoints, when diagnostics ran.
    pub cesaro: Option<CesaroTrace<T>>,
    pub error_trace: Option<ErrorTrace<T>>,
}

/// Runs one path from `initial` for `options.horizon` draws.
pub fn run<T, G>(
    initial: UrnState<T>,
    generator: &G,
    options: &RunOptions,
    streams: &mut PathStreams,
) -> Result<Trajectory<T>>
where
    T: Scalar,
    G: ReplacementGenerator<T> + ?Sized,
{
    options.validate()?;
    if generator.dim() != initial.dim() {
        return Err(Error::DimensionMismatch { expected: initial.dim(), got: generator.dim() });
    }
    let mut monitor = options
        .diagnostics
        .then(|| SaMonitor::new(generator.limit_matrix(), options.record_errors));
    let mut state = initial.clone();
    let mut snapshots = Vec::with_capacity(options.checkpoints.len());
    let mut times = Vec::with_capacity(options.checkpoints.len());
    let mut elapsed = T::zero();
    let mut cesaro = monitor.as_ref().map(|_| CesaroTrace::default());
    let mut next_checkpoint = options.checkpoints.iter().peekable();

    while state.epoch() < options.horizon {
        match monitor.as_mut() {
            None => {
                state.step(generator, streams)?;
            }
            Some(monitor) => {
                let prev = state.clone();
                let moments = generator.moments(prev.epoch() + 1, &prev, &mut streams.estimate);
                let record = state.step(generator, streams)?;
                monitor.observe(
                    &prev,
                    &state,
                    &record,
                    &moments.truncated_mean,
                    moments.tail_norm,
                    moments.exact,
                )?;
            }
        }
        elapsed += T::one() / state.total();
        if next_checkpoint.peek() == Some(&&state.epoch()) {
            next_checkpoint.next();
            times.push(elapsed);
            if let (Some(monitor), Some(trace)) = (monitor.as_ref(), cesaro.as_mut()) {
                trace.points.push(monitor.point(&state));
            }
            snapshots.push(state.clone());
        }
    }

    Ok(Trajectory {
        initial,
        checkpoints: snapshots,
        times,
        final_state: state,
        cesaro,
        error_trace: monitor.and_then(SaMonitor::into_error_trace),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::Deterministic;

    fn state(c: &[f64]) -> UrnState<f64> {
        UrnState::new(c.to_vec()).unwrap()
    }

    #[test]
    fn draw_color_examples() {
        let s = state(&[1.0, 0.0, 3.0]);
        assert_eq!(s.draw_color(0.25).unwrap(), 0);
        assert_eq!(s.draw_color(0.26).unwrap(), 2);
        let even = state(&[5.0, 5.0]);
        assert_eq!(even.draw_color(0.5).unwrap(), 0);
        assert_eq!(even.draw_color(0.50001).unwrap(), 1);
        assert_eq!(even.draw_color(1.0 - f64::EPSILON / 2.0).unwrap(), 1);
        for bad in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(even.draw_color(bad), Err(Error::UniformOutOfRange(_))));
        }
    }

    #[test]
    fn zero_mass_trailing_color_never_chosen() {
        let s = state(&[1.0, 2.0, 0.0]);
        assert_eq!(s.draw_color(0.999_999_999).unwrap(), 1);
    }

    #[test]
    fn initial_composition_validation() {
        assert!(UrnState::<f64>::new(vec![]).is_err());
        assert!(UrnState::new(vec![0.0, 0.0]).is_err());
        assert!(UrnState::new(vec![1.0, -1.0]).is_err());
        assert!(UrnState::new(vec![1.0, f64::INFINITY]).is_err());
        let u = UrnState::<f64>::uniform(3);
        assert_eq!((u.total(), u.epoch()), (3.0, 0));
    }

    #[test]
    fn apply_examples() {
        let mut s = state(&[1.0, 1.0]);
        let r = NonnegMatrix::from_rows(&[[2.0, 3.0], [7.0, 1.0]]).unwrap();
        assert_eq!(s.apply(0, &r).unwrap(), 5.0);
        assert_eq!(s.composition(), &[3.0, 4.0]);
        assert_eq!((s.total(), s.counts(), s.epoch()), (7.0, &[1u64, 0][..], 1));

        let mut z = state(&[1.0, 1.0]);
        let r = NonnegMatrix::from_rows(&[[2.0, 3.0], [0.0, 0.0]]).unwrap();
        assert_eq!(z.apply(1, &r).unwrap(), 0.0);
        assert_eq!((z.composition(), z.total()), (&[1.0, 1.0][..], 2.0));

        let mut p = state(&[2.0, 3.0]);
        p.apply(1, &NonnegMatrix::identity(2)).unwrap();
        assert_eq!(p.composition(), &[2.0, 4.0]);
    }

    #[test]
    fn apply_rejects_negative_and_nonfinite() {
        let mut s = state(&[1.0, 1.0]);
        let neg = NonnegMatrix::from_rows(&[[1.0, -1.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(s.apply(0, &neg), Err(Error::Negative { .. })));
        assert_eq!(s.epoch(), 0);
    }

    struct Faulty;
    impl ReplacementGenerator<f64> for Faulty {
        fn dim(&self) -> usize {
            2
        }
        fn sample(&self, epoch: u64, _: &UrnState<f64>, _: &mut dyn rand::RngCore) -> NonnegMatrix<f64> {
            let bad = if epoch == 3 { -1.0 } else { 1.0 };
            NonnegMatrix::from_rows(&[[bad, 1.0], [1.0, bad]]).unwrap()
        }
        fn limit_matrix(&self) -> NonnegMatrix<f64> {
            NonnegMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap()
        }
    }

    #[test]
    fn run_reports_failing_epoch() {
        let err = run(state(&[1.0, 1.0]), &Faulty, &RunOptions::new(10, vec![]), &mut PathStreams::new(1))
            .unwrap_err();
        assert!(matches!(err, Error::InvalidReplacement { epoch: 3, .. }), "{err:?}");
    }

    #[test]
    fn empty_run_keeps_initial_state() {
        let gen = Deterministic::new(NonnegMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap()).unwrap();
        let t = run(state(&[1.0, 1.0]), &gen, &RunOptions::new(0, vec![]), &mut PathStreams::new(1)).unwrap();
        assert_eq!(t.final_state, t.initial);
        assert!(t.checkpoints.is_empty());
    }

    #[test]
    fn friedman_totals_grow_by_one() {
        let gen = Deterministic::new(NonnegMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap()).unwrap();
        let cps = geometric_checkpoints(1000);
        let t = run(state(&[1.0, 1.0]), &gen, &RunOptions::new(1000, cps.clone()), &mut PathStreams::new(9))
            .unwrap();
        for (s, n) in t.checkpoints.iter().zip(&cps) {
            assert_eq!(s.epoch(), *n);
            assert_eq!(s.total(), (*n + 2) as f64);
            assert_eq!(s.counts().iter().sum::<u64>(), *n);
        }
    }

    #[test]
    fn checkpoint_validation() {
        assert!(RunOptions::new(10, vec![3, 2]).validate().is_err());
        assert!(RunOptions::new(10, vec![0]).validate().is_err());
        assert!(RunOptions::new(10, vec![11]).validate().is_err());
        assert!(RunOptions::new(10, vec![1, 10]).validate().is_ok());
        assert_eq!(geometric_checkpoints(10), vec![1, 2, 4, 8, 10]);
        assert_eq!(decade_checkpoints(1000), vec![1, 10, 100, 1000]);
        assert!(geometric_checkpoints(0).is_empty());
    }
}
