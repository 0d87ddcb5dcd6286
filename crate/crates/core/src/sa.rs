//! Stochastic-approximation view of the urn.
//!
//! The proportion vector `x_n = C_n / S_n` obeys
//!
//! ```text
//! x_n = x_{n−1} + (1/S_n) (h_H(x_{n−1}) + δ_n + ξ_n)
//! ```
//!
//! with the Lotka-Volterra drift `h_H(x) = xH − x (xH1ᵀ)`, a martingale
//! difference `δ_n` and a bias `ξ_n = h_{H̃_{n−1} − H}(x_{n−1})`. This module
//! evaluates the decomposition along a run, accumulates the Cesàro averages
//! the convergence argument needs, and integrates the limiting ODE.

use crate::error::{Error, Result};
use crate::matrix::NonnegMatrix;
use crate::scalar::{l1, Scalar};
use crate::urn::{DrawRecord, UrnState};

/// `h_H(x) = xH − x (xH1ᵀ)`; tangent to the simplex.
pub fn drift<T: Scalar>(x: &[T], h: &NonnegMatrix<T>) -> Result<Vec<T>> {
    let xh = h.left_mul(x)?;
    let growth: T = xh.iter().copied().sum();
    Ok(xh.iter().zip(x).map(|(a, xi)| *a - *xi * growth).collect())
}

/// One step of the decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct SAErrorTerms<T> {
    pub epoch: u64,
    /// `h_H(x_{n−1})`.
    pub drift_value: Vec<T>,
    pub delta: Vec<T>,
    pub xi: Vec<T>,
    /// `a_n = 1 / S_n`.
    pub step_size: T,
}

impl<T: Scalar> SAErrorTerms<T> {
    /// `γ_n = δ_n + ξ_n`.
    pub fn error(&self) -> Vec<T> {
        self.delta.iter().zip(&self.xi).map(|(d, x)| *d + *x).collect()
    }

    /// `‖(x_n − x_{n−1}) − a_n (h + δ + ξ)‖₁`, zero up to rounding.
    pub fn reconstruction_residual(&self, prev: &UrnState<T>, next: &UrnState<T>) -> T {
        let x0 = prev.proportions();
        let x1 = next.proportions();
        (0..x0.len())
            .map(|i| {
                let predicted = self.step_size * (self.drift_value[i] + self.delta[i] + self.xi[i]);
                ((x1[i] - x0[i]) - predicted).abs()
            })
            .sum()
    }
}

/// Splits the move made by `record` from `prev` into drift, martingale
/// difference and bias, given the limit `H` and the truncated generating
/// matrix `H̃_{n−1}`.
///
/// The conditional mean of `(χ_n R_n − x Y_n) 1{‖R_n‖ ≤ n}` factorizes as
/// `x H̃ − x (x H̃ 1ᵀ)` because the color and the replacement matrix are
/// conditionally independent.
pub fn error_decomposition<T: Scalar>(
    record: &DrawRecord<T>,
    prev: &UrnState<T>,
    limit: &NonnegMatrix<T>,
    truncated_mean: &NonnegMatrix<T>,
) -> Result<SAErrorTerms<T>> {
    let k = prev.dim();
    for m in [limit, truncated_mean, &record.replacement] {
        if m.dim() != k {
            return Err(Error::DimensionMismatch { expected: k, got: m.dim() });
        }
    }
    if record.epoch != prev.epoch() + 1 {
        return Err(Error::InvalidParameter(format!(
            "record epoch {} does not follow state epoch {}",
            record.epoch,
            prev.epoch()
        )));
    }
    let x = prev.proportions();
    let added = record.replacement.row(record.color);
    let y = record.increment_total;
    let centered = drift(&x, truncated_mean)?;
    let delta = (0..k).map(|i| added[i] - x[i] * y - centered[i]).collect();
    let gap = truncated_mean.sub(limit)?;
    Ok(SAErrorTerms {
        epoch: record.epoch,
        drift_value: drift(&x, limit)?,
        delta,
        xi: drift(&x, &gap)?,
        step_size: T::one() / (prev.total() + y),
    })
}

/// `τ(n, T) = inf{k ≥ n : a_n + … + a_k ≥ T}` over the finite prefix
/// `step_sizes = (a_1, a_2, …)`; indices are 1-based. `None` when the prefix
/// never accumulates `T`.
pub fn tau<T: Scalar>(step_sizes: &[T], start: usize, horizon: T) -> Option<usize> {
    assert!(start >= 1, "step sizes are indexed from 1");
    let mut acc = T::zero();
    for (offset, a) in step_sizes.iter().skip(start - 1).enumerate() {
        acc += *a;
        if acc >= horizon {
            return Some(start + offset);
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateRow<T> {
    pub start: usize,
    pub horizon: T,
    pub tau: Option<usize>,
    /// `sup_{n ≤ j ≤ τ(n,T)} ‖Σ_{k=n}^j a_k γ_k‖₁`, or `None` if the window
    /// runs past the recorded trace.
    pub value: Option<T>,
}

/// Window suprema of weighted error partial sums, the quantity that must
/// vanish for the iterates to track the ODE.
///
/// `step_sizes[k−1] = a_k` and `errors[k−1] = γ_k`.
pub fn kushner_clark_certificate<T: Scalar>(
    step_sizes: &[T],
    errors: &[Vec<T>],
    starts: &[usize],
    horizons: &[T],
) -> Vec<CertificateRow<T>> {
    assert_eq!(step_sizes.len(), errors.len());
    let mut rows = Vec::with_capacity(starts.len() * horizons.len());
    for &horizon in horizons {
        for &start in starts {
            let tau = tau(step_sizes, start, horizon);
            let value = tau.map(|end| {
                let k = errors[start - 1].len();
                let mut partial = vec![T::zero(); k];
                let mut sup = T::zero();
                for idx in start - 1..end {
                    for (p, g) in partial.iter_mut().zip(&errors[idx]) {
                        *p += step_sizes[idx] * *g;
                    }
                    sup = sup.max(l1(&partial));
                }
                sup
            });
            rows.push(CertificateRow { start, horizon, tau, value });
        }
    }
    rows
}

/// Weighted errors `(a_k, γ_k)` kept for the certificate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorTrace<T> {
    pub step_sizes: Vec<T>,
    pub errors: Vec<Vec<T>>,
}

impl<T: Scalar> ErrorTrace<T> {
    pub fn certificate(&self, starts: &[usize], horizons: &[T]) -> Vec<CertificateRow<T>> {
        kushner_clark_certificate(&self.step_sizes, &self.errors, starts, horizons)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Series {
    /// `‖(1/n) Σ δ_k‖₁`
    Delta,
    /// `‖(1/n) Σ ξ_k‖₁`
    Xi,
    /// `(1/n) Σ ‖H̃_{k−1} − H‖`
    Gap,
    /// `(1/n) Σ E[‖R_k‖ 1{‖R_k‖ > k} | F_{k−1}]`
    TailExpectation,
    /// `η_n = S_n/n − (1/n) Σ x_{m−1} H̃_{m−1} 1ᵀ + (1/n) Σ x_{m−1} (H̃_{m−1} − H) 1ᵀ`
    Eta,
}

impl Series {
    pub const ALL: [Series; 5] =
        [Series::Delta, Series::Xi, Series::Gap, Series::TailExpectation, Series::Eta];

    pub fn name(self) -> &'static str {
        match self {
            Series::Delta => "cesaro_delta",
            Series::Xi => "cesaro_xi",
            Series::Gap => "cesaro_gap",
            Series::TailExpectation => "tail_ce",
            Series::Eta => "eta",
        }
    }
}

/// Cesàro averages at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CesaroPoint<T> {
    pub epoch: u64,
    pub delta: T,
    pub xi: T,
    pub gap: T,
    pub tail_expectation: T,
    pub eta: T,
    /// Largest reconstruction residual seen so far.
    pub max_reconstruction: T,
    /// Whether any `H̃` so far was a Monte Carlo estimate.
    pub estimated: bool,
}

impl<T: Scalar> CesaroPoint<T> {
    pub fn get(&self, series: Series) -> T {
        match series {
            Series::Delta => self.delta,
            Series::Xi => self.xi,
            Series::Gap => self.gap,
            Series::TailExpectation => self.tail_expectation,
            Series::Eta => self.eta,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CesaroTrace<T> {
    pub points: Vec<CesaroPoint<T>>,
}

impl<T: Scalar> CesaroTrace<T> {
    pub fn series(&self, series: Series) -> Vec<(u64, T)> {
        self.points.iter().map(|p| (p.epoch, p.get(series))).collect()
    }

    pub fn at(&self, epoch: u64) -> Option<&CesaroPoint<T>> {
        self.points.iter().find(|p| p.epoch == epoch)
    }
}

/// Running sums behind the Cesàro traces, fed one step at a time.
#[derive(Debug, Clone)]
pub struct SaMonitor<T> {
    limit: NonnegMatrix<T>,
    sum_delta: Vec<T>,
    sum_xi: Vec<T>,
    sum_gap: T,
    sum_tail: T,
    sum_truncated_increment: T,
    sum_bias_increment: T,
    max_reconstruction: T,
    estimated: bool,
    trace: Option<ErrorTrace<T>>,
}

impl<T: Scalar> SaMonitor<T> {
    pub fn new(limit: NonnegMatrix<T>, record_errors: bool) -> Self {
        let k = limit.dim();
        Self {
            limit,
            sum_delta: vec![T::zero(); k],
            sum_xi: vec![T::zero(); k],
            sum_gap: T::zero(),
            sum_tail: T::zero(),
            sum_truncated_increment: T::zero(),
            sum_bias_increment: T::zero(),
            max_reconstruction: T::zero(),
            estimated: false,
            trace: record_errors.then(ErrorTrace::default),
        }
    }

    pub fn limit(&self) -> &NonnegMatrix<T> {
        &self.limit
    }

    /// Accounts for the step `prev → next` recorded in `record`, where
    /// `truncated_mean` is `H̃_{n−1}` and `tail_norm` the conditional tail
    /// expectation of `‖R_n‖`.
    pub fn observe(
        &mut self,
        prev: &UrnState<T>,
        next: &UrnState<T>,
        record: &DrawRecord<T>,
        truncated_mean: &NonnegMatrix<T>,
        tail_norm: T,
        exact: bool,
    ) -> Result<SAErrorTerms<T>> {
        let terms = error_decomposition(record, prev, &self.limit, truncated_mean)?;
        let x = prev.proportions();
        let gap = truncated_mean.sub(&self.limit)?;
        for i in 0..x.len() {
            self.sum_delta[i] += terms.delta[i];
            self.sum_xi[i] += terms.xi[i];
        }
        self.sum_gap += gap.op_norm();
        self.sum_tail += tail_norm;
        self.sum_truncated_increment += truncated_mean.left_mul(&x)?.into_iter().sum::<T>();
        self.sum_bias_increment += gap.left_mul(&x)?.into_iter().sum::<T>();
        self.max_reconstruction = self.max_reconstruction.max(terms.reconstruction_residual(prev, next));
        self.estimated |= !exact;
        if let Some(trace) = self.trace.as_mut() {
            trace.step_sizes.push(terms.step_size);
            trace.errors.push(terms.error());
        }
        Ok(terms)
    }

    pub fn point(&self, state: &UrnState<T>) -> CesaroPoint<T> {
        let n = T::of(state.epoch().max(1) as f64);
        CesaroPoint {
            epoch: state.epoch(),
            delta: l1(&self.sum_delta) / n,
            xi: l1(&self.sum_xi) / n,
            gap: self.sum_gap / n,
            tail_expectation: self.sum_tail / n,
            eta: state.total() / n - self.sum_truncated_increment / n + self.sum_bias_increment / n,
            max_reconstruction: self.max_reconstruction,
            estimated: self.estimated,
        }
    }

    pub fn into_error_trace(self) -> Option<ErrorTrace<T>> {
        self.trace
    }
}

/// Observed range of `S_n / n` against the band `[σ(H), ‖H‖]` it must
/// eventually occupy.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSizeBand<T> {
    pub sigma: T,
    pub norm: T,
    pub observed_min: T,
    pub observed_max: T,
}

impl<T: Scalar> StepSizeBand<T> {
    pub fn from_totals(limit: &NonnegMatrix<T>, totals_per_epoch: impl IntoIterator<Item = T>) -> Self {
        let (lo, hi) = totals_per_epoch
            .into_iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Self { sigma: limit.sigma(), norm: limit.op_norm(), observed_min: lo, observed_max: hi }
    }

    /// Whether the observed range sits inside the band widened by `slack`.
    pub fn within(&self, slack: T) -> bool {
        self.observed_min > T::zero()
            && self.observed_min >= self.sigma - slack
            && self.observed_max <= self.norm + slack
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions<T> {
    /// Largest RK4 step.
    pub dt: T,
    /// Largest tolerated departure from the simplex before renormalizing.
    pub simplex_tol: T,
}

impl<T: Scalar> Default for OdeOptions<T> {
    fn default() -> Self {
        Self { dt: T::of(0.01), simplex_tol: T::of(1e-6) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    /// Largest ℓ¹ gap at the grid points between the run at `dt` and a
    /// second run at `dt / 2`.
    pub richardson_error: T,
}

/// Integrates `ẋ = h_H(x)` from `x0` with classical RK4, reporting the state
/// at every point of `t_grid` (which starts at the initial time).
pub fn ode_reference<T: Scalar>(
    h: &NonnegMatrix<T>,
    x0: &[T],
    t_grid: &[T],
    options: OdeOptions<T>,
) -> Result<OdeSolution<T>> {
    if !h.is_irreducible()? {
        return Err(Error::NotIrreducible);
    }
    if x0.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: x0.len() });
    }
    let mass: T = x0.iter().copied().sum();
    if x0.iter().any(|v| *v < T::zero() || !v.is_finite()) || (mass - T::one()).abs() > T::of(1e-9) {
        return Err(Error::InvalidParameter("ode start must lie in the probability simplex".into()));
    }
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("time grid must be non-empty and nondecreasing".into()));
    }
    if !(options.dt > T::zero()) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    let coarse = integrate(h, x0, t_grid, options)?;
    let fine = integrate(h, x0, t_grid, OdeOptions { dt: options.dt / T::of(2.0), ..options })?;
    let richardson_error = coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| crate::scalar::l1_distance(a, b))
        .fold(T::zero(), T::max);
    Ok(OdeSolution { times: t_grid.to_vec(), states: coarse, richardson_error })
}

fn integrate<T: Scalar>(
    h: &NonnegMatrix<T>,
    x0: &[T],
    t_grid: &[T],
    options: OdeOptions<T>,
) -> Result<Vec<Vec<T>>> {
    let k = x0.len();
    let mut x = x0.to_vec();
    let mut out = Vec::with_capacity(t_grid.len());
    out.push(x.clone());
    let half = T::of(0.5);
    let sixth = T::one() / T::of(6.0);
    let mut probe = vec![T::zero(); k];
    for w in t_grid.windows(2) {
        let span = w[1] - w[0];
        let steps = (span / options.dt).ceil().to_usize().unwrap_or(0).max(1);
        let dt = span / T::of(steps as f64);
        for s in 0..steps {
            let k1 = drift(&x, h)?;
            probe.iter_mut().enumerate().for_each(|(i, p)| *p = x[i] + half * dt * k1[i]);
            let k2 = drift(&probe, h)?;
            probe.iter_mut().enumerate().for_each(|(i, p)| *p = x[i] + half * dt * k2[i]);
            let k3 = drift(&probe, h)?;
            probe.iter_mut().enumerate().for_each(|(i, p)| *p = x[i] + dt * k3[i]);
            let k4 = drift(&probe, h)?;
            for i in 0..k {
                x[i] += dt * sixth * (k1[i] + T::of(2.0) * k2[i] + T::of(2.0) * k3[i] + k4[i]);
            }
            let mass: T = x.iter().copied().sum();
            let lowest = x.iter().copied().fold(T::infinity(), T::min);
            let deviation = (mass - T::one()).abs().max(-lowest);
            if deviation > options.simplex_tol {
                let time = w[0] + dt * T::of((s + 1) as f64);
                return Err(Error::SimplexExit { time: time.as_f64(), deviation: deviation.as_f64() });
            }
            x.iter_mut().for_each(|v| *v = v.max(T::zero()));
            let mass: T = x.iter().copied().sum();
            x.iter_mut().for_each(|v| *v /= mass);
        }
        out.push(x.clone());
    }
    Ok(out)
}
