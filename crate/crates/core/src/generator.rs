//! Replacement-matrix generators.
//!
//! A generator draws `R_n` given the history summarized by the urn state after
//! `n − 1` draws, and reports the conditional moments the diagnostics need:
//! the generating matrix `H_{n−1} = E[R_n | F_{n−1}]`, its truncation
//! `H̃_{n−1} = E[R_n 1{‖R_n‖ ≤ n} | F_{n−1}]` and the tail expectation
//! `E[‖R_n‖ 1{‖R_n‖ > n} | F_{n−1}]`.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::laws::ScalarLaw;
use crate::matrix::NonnegMatrix;
use crate::scalar::Scalar;
use crate::urn::UrnState;

/// Conditional resamples used when a generator has no closed-form moments.
pub const MC_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMoments<T> {
    /// `H_{n−1}`.
    pub mean: NonnegMatrix<T>,
    /// `H̃_{n−1}`.
    pub truncated_mean: NonnegMatrix<T>,
    /// `E[‖R_n‖ 1{‖R_n‖ > n} | F_{n−1}]`.
    pub tail_norm: T,
    /// `false` when the values are Monte Carlo estimates.
    pub exact: bool,
}

pub trait ReplacementGenerator<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    /// Draws `R_n`; `state` is the urn after `epoch − 1` draws.
    ///
    /// Must not look at the color drawn at `epoch`, which keeps the color and
    /// the replacement matrix conditionally independent given the past.
    fn sample(&self, epoch: u64, state: &UrnState<T>, rng: &mut dyn RngCore) -> NonnegMatrix<T>;

    /// The irreducible limit `H` the generating matrices approach.
    fn limit_matrix(&self) -> NonnegMatrix<T>;

    /// Closed-form conditional moments, when available.
    fn exact_moments(&self, _epoch: u64, _state: &UrnState<T>) -> Option<ConditionalMoments<T>> {
        None
    }

    /// Closed-form moments, falling back to a Monte Carlo estimate from
    /// [`MC_RESAMPLES`] conditional draws on `rng`.
    fn moments(&self, epoch: u64, state: &UrnState<T>, rng: &mut dyn RngCore) -> ConditionalMoments<T> {
        self.exact_moments(epoch, state)
            .unwrap_or_else(|| estimate_moments(self, epoch, state, MC_RESAMPLES, rng))
    }

    fn mean(&self, epoch: u64, state: &UrnState<T>, rng: &mut dyn RngCore) -> NonnegMatrix<T> {
        self.moments(epoch, state, rng).mean
    }

    fn truncated_mean(&self, epoch: u64, state: &UrnState<T>, rng: &mut dyn RngCore) -> NonnegMatrix<T> {
        self.moments(epoch, state, rng).truncated_mean
    }

    /// Almost-sure bound on `‖R_n‖`, if one exists.
    fn norm_bound(&self) -> Option<T> {
        None
    }
}

/// Monte Carlo moments from `samples` conditional draws. The full and
/// truncated means come from the same draws, so `H̃ ≤ H` entrywise holds for
/// the estimates too.
pub fn estimate_moments<T, G>(
    gen: &G,
    epoch: u64,
    state: &UrnState<T>,
    samples: usize,
    rng: &mut dyn RngCore,
) -> ConditionalMoments<T>
where
    T: Scalar,
    G: ReplacementGenerator<T> + ?Sized,
{
    let k = gen.dim();
    let cutoff = T::of(epoch as f64);
    let mut mean = vec![T::zero(); k * k];
    let mut truncated = vec![T::zero(); k * k];
    let mut tail = T::zero();
    for _ in 0..samples {
        let r = gen.sample(epoch, state, rng);
        let norm = r.op_norm();
        let keep = norm <= cutoff;
        for (idx, v) in r.as_slice().iter().enumerate() {
            mean[idx] += *v;
            if keep {
                truncated[idx] += *v;
            }
        }
        if !keep {
            tail += norm;
        }
    }
    let m = T::of(samples as f64);
    ConditionalMoments {
        mean: NonnegMatrix::from_raw(k, mean.into_iter().map(|v| v / m).collect()),
        truncated_mean: NonnegMatrix::from_raw(k, truncated.into_iter().map(|v| v / m).collect()),
        tail_norm: tail / m,
        exact: false,
    }
}

fn require_irreducible<T: Scalar>(h: &NonnegMatrix<T>) -> Result<()> {
    h.check_nonnegative()?;
    if h.is_irreducible()? {
        Ok(())
    } else {
        Err(Error::NotIrreducible)
    }
}

/// Moments of `R = ζ · c · G` where `ζ ∈ {0, 1}` and `E[R] = G`, i.e. the
/// scaled two-point law with a single nonzero atom of norm `c ‖G‖`.
fn two_point_moments<T: Scalar>(g: NonnegMatrix<T>, epoch: u64, spread: T) -> ConditionalMoments<T> {
    let atom_norm = spread * g.op_norm();
    let fits = atom_norm <= T::of(epoch as f64);
    ConditionalMoments {
        truncated_mean: if fits { g.clone() } else { NonnegMatrix::zeros(g.dim()) },
        tail_norm: if fits { T::zero() } else { g.op_norm() },
        mean: g,
        exact: true,
    }
}

/// `R_n ≡ H0`.
#[derive(Debug, Clone)]
pub struct Deterministic<T> {
    matrix: NonnegMatrix<T>,
}

impl<T: Scalar> Deterministic<T> {
    pub fn new(matrix: NonnegMatrix<T>) -> Result<Self> {
        require_irreducible(&matrix)?;
        Ok(Self { matrix })
    }
}

impl<T: Scalar> ReplacementGenerator<T> for Deterministic<T> {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn sample(&self, _epoch: u64, _state: &UrnState<T>, _rng: &mut dyn RngCore) -> NonnegMatrix<T> {
        self.matrix.clone()
    }

    fn limit_matrix(&self) -> NonnegMatrix<T> {
        self.matrix.clone()
    }

    fn exact_moments(&self, epoch: u64, _state: &UrnState<T>) -> Option<ConditionalMoments<T>> {
        let norm = self.matrix.op_norm();
        let fits = norm <= T::of(epoch as f64);
        Some(ConditionalMoments {
            mean: self.matrix.clone(),
            truncated_mean: if fits { self.matrix.clone() } else { NonnegMatrix::zeros(self.dim()) },
            tail_norm: if fits { T::zero() } else { norm },
            exact: true,
        })
    }

    fn norm_bound(&self) -> Option<T> {
        Some(self.matrix.op_norm())
    }
}

/// `R_n = P_n M` with i.i.d. scalar weights `P_n`; limit `H = E[P] M`.
#[derive(Debug, Clone)]
pub struct IidScalarMixture<T> {
    base: NonnegMatrix<T>,
    law: ScalarLaw,
}

impl<T: Scalar> IidScalarMixture<T> {
    pub fn new(base: NonnegMatrix<T>, law: ScalarLaw) -> Result<Self> {
        law.validate()?;
        if !(law.mean() > 0.0) {
            return Err(Error::InvalidParameter("scalar law must have a positive mean".into()));
        }
        require_irreducible(&base)?;
        Ok(Self { base, law })
    }

    pub fn law(&self) -> ScalarLaw {
        self.law
    }
}

impl<T: Scalar> ReplacementGenerator<T> for IidScalarMixture<T> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn sample(&self, _epoch: u64, _state: &UrnState<T>, rng: &mut dyn RngCore) -> NonnegMatrix<T> {
        self.base.scale(T::of(self.law.sample(rng)))
    }

    fn limit_matrix(&self) -> NonnegMatrix<T> {
        self.base.scale(T::of(self.law.mean()))
    }

    fn exact_moments(&self, epoch: u64, _state: &UrnState<T>) -> Option<ConditionalMoments<T>> {
        // ‖P M‖ ≤ n  ⇔  P ≤ n / ‖M‖
        let base_norm = self.base.op_norm().as_f64();
        let cutoff = epoch as f64 / base_norm;
        Some(ConditionalMoments {
            mean: self.limit_matrix(),
            truncated_mean: self.base.scale(T::of(self.law.truncated_mean(cutoff))),
            tail_norm: T::of(base_norm * self.law.tail_mean(cutoff)),
            exact: true,
        })
    }

    fn norm_bound(&self) -> Option<T> {
        self.law.bound().map(|b| T::of(b) * self.base.op_norm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationNoise {
    /// `R_n = 2ζ H_{n−1}` with `ζ ~ Bernoulli(1/2)`; bounded, closed-form moments.
    TwoPoint,
    /// `R_{n,ij} = H_{n−1,ij} E_ij` with i.i.d. unit exponentials; moments estimated.
    Exponential,
}

/// Generating matrices `H_{n−1} = (H + n^{−β} B)₊` converging to `H` at a
/// polynomial rate, hence in Cesàro mean.
#[derive(Debug, Clone)]
pub struct AdaptedPerturbation<T> {
    limit: NonnegMatrix<T>,
    perturbation: NonnegMatrix<T>,
    beta: T,
    noise: PerturbationNoise,
}

impl<T: Scalar> AdaptedPerturbation<T> {
    pub fn new(
        limit: NonnegMatrix<T>,
        perturbation: NonnegMatrix<T>,
        beta: T,
        noise: PerturbationNoise,
    ) -> Result<Self> {
        require_irreducible(&limit)?;
        if perturbation.dim() != limit.dim() {
            return Err(Error::DimensionMismatch { expected: limit.dim(), got: perturbation.dim() });
        }
        if !(beta > T::zero()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { limit, perturbation, beta, noise })
    }

    /// `H_{n−1}` for the draw at `epoch = n`.
    pub fn generating_matrix(&self, epoch: u64) -> NonnegMatrix<T> {
        let weight = T::of(epoch.max(1) as f64).powf(-self.beta);
        self.limit
            .add(&self.perturbation.scale(weight))
            .expect("dimensions checked at construction")
            .clip_nonnegative()
    }
}

impl<T: Scalar> ReplacementGenerator<T> for AdaptedPerturbation<T> {
    fn dim(&self) -> usize {
        self.limit.dim()
    }

    fn sample(&self, epoch: u64, _state: &UrnState<T>, rng: &mut dyn RngCore) -> NonnegMatrix<T> {
        let g = self.generating_matrix(epoch);
        match self.noise {
            PerturbationNoise::TwoPoint => {
                if rng.random_bool(0.5) {
                    g.scale(T::of(2.0))
                } else {
                    NonnegMatrix::zeros(g.dim())
                }
            }
            PerturbationNoise::Exponential => g.map(|v| {
                let e: f64 = Exp1.sample(&mut *rng);
                v * T::of(e)
            }),
        }
    }

    fn limit_matrix(&self) -> NonnegMatrix<T> {
        self.limit.clone()
    }

    fn exact_moments(&self, epoch: u64, _state: &UrnState<T>) -> Option<ConditionalMoments<T>> {
        match self.noise {
            PerturbationNoise::TwoPoint => {
                Some(two_point_moments(self.generating_matrix(epoch), epoch, T::of(2.0)))
            }
            PerturbationNoise::Exponential => None,
        }
    }

    fn norm_bound(&self) -> Option<T> {
        match self.noise {
            PerturbationNoise::TwoPoint => {
                let worst = self.limit.add(&self.perturbation.clip_nonnegative()).ok()?;
                Some(T::of(2.0) * worst.op_norm())
            }
            PerturbationNoise::Exponential => None,
        }
    }
}

/// State-dependent generating matrix
/// `H_{n−1} = (H + ε (x − π_H)ᵀ 1)₊` with `x = C_{n−1}/S_{n−1}`: row `i` is
/// shifted by `ε (x_i − π_i)`. Draws are the bounded two-point law with that
/// conditional mean.
#[derive(Debug, Clone)]
pub struct ProportionFeedback<T> {
    limit: NonnegMatrix<T>,
    epsilon: T,
    perron: Vec<T>,
}

impl<T: Scalar> ProportionFeedback<T> {
    pub fn new(limit: NonnegMatrix<T>, epsilon: T) -> Result<Self> {
        require_irreducible(&limit)?;
        if !(epsilon >= T::zero() && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        let perron = limit.spectrum()?.pi;
        Ok(Self { limit, epsilon, perron })
    }

    pub fn generating_matrix(&self, state: &UrnState<T>) -> NonnegMatrix<T> {
        let x = state.proportions();
        let mut g = self.limit.clone();
        let k = g.dim();
        for i in 0..k {
            let shift = self.epsilon * (x[i] - self.perron[i]);
            for j in 0..k {
                g.set(i, j, (g.get(i, j) + shift).max(T::zero()));
            }
        }
        g
    }
}

impl<T: Scalar> ReplacementGenerator<T> for ProportionFeedback<T> {
    fn dim(&self) -> usize {
        self.limit.dim()
    }

    fn sample(&self, _epoch: u64, state: &UrnState<T>, rng: &mut dyn RngCore) -> NonnegMatrix<T> {
        let g = self.generating_matrix(state);
        if rng.random_bool(0.5) {
            g.scale(T::of(2.0))
        } else {
            NonnegMatrix::zeros(g.dim())
        }
    }

    fn limit_matrix(&self) -> NonnegMatrix<T> {
        self.limit.clone()
    }

    fn exact_moments(&self, epoch: u64, state: &UrnState<T>) -> Option<ConditionalMoments<T>> {
        Some(two_point_moments(self.generating_matrix(state), epoch, T::of(2.0)))
    }

    fn norm_bound(&self) -> Option<T> {
        // shifts are at most ε per entry
        let k = T::of(self.limit.dim() as f64);
        Some(T::of(2.0) * (self.limit.op_norm() + self.epsilon * k))
    }
}
