//! Monte Carlo checks of the uniform-integrability conditions on `‖R_n‖`.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::generator::ReplacementGenerator;
use crate::laws::ScalarLaw;
use crate::scalar::Scalar;
use crate::urn::UrnState;

fn log_plus(x: f64) -> f64 {
    if x > 1.0 {
        x.ln()
    } else {
        0.0
    }
}

/// Test functions `φ` with `Σ 1/(n φ(n)) < ∞`. Only the two families below
/// are accepted, each with exponent `p > 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phi {
    /// `(log₊ x)^p`
    LogPower { p: f64 },
    /// `log₊ x (log₊ log₊ x)^p`
    LogLogPower { p: f64 },
}

impl Phi {
    pub fn validate(&self) -> Result<()> {
        let p = match *self {
            Phi::LogPower { p } | Phi::LogLogPower { p } => p,
        };
        if p > 1.0 && p.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "φ exponent must exceed 1 for Σ 1/(nφ(n)) to converge, got {p}"
            )))
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Phi::LogPower { p } => log_plus(x).powf(p),
            Phi::LogLogPower { p } => log_plus(x) * log_plus(log_plus(x)).powf(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MomentProfile {
    /// `P(‖R_n‖ > x) ≤ c P(R > x)` for a majorizing variable `R`.
    Majorized { c: f64, majorizer: ScalarLaw },
    /// `sup_n E[‖R_n‖ φ(‖R_n‖)] < ∞`.
    PhiMoment(Phi),
}

impl MomentProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            MomentProfile::Majorized { c, majorizer } => {
                if !(*c > 0.0 && c.is_finite()) {
                    return Err(Error::InvalidParameter(format!("majorizing constant must be positive, got {c}")));
                }
                majorizer.validate()
            }
            MomentProfile::PhiMoment(phi) => phi.validate(),
        }
    }
}

/// False-alarm level of the majorization check.
const DKW_LEVEL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub epoch: u64,
    /// `E[‖R_n‖ φ(‖R_n‖)]` for a φ profile; for a majorization profile the
    /// largest excess `P̂(‖R_n‖ > x) − c P(R > x)` over the sampled norms.
    pub estimate: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub rows: Vec<MomentRow>,
    /// Likely violation: the φ-moment estimates grow across the probed
    /// epochs, or the empirical tail exceeds `c P(R > x)` beyond the DKW band.
    pub flagged: bool,
}

/// Samples `R_n` at each probed epoch (holding `state` as the history) and
/// estimates the quantity the profile bounds.
pub fn moment_diagnostic<T, G>(
    generator: &G,
    state: &UrnState<T>,
    profile: &MomentProfile,
    epochs: &[u64],
    samples: usize,
    rng: &mut dyn RngCore,
) -> Result<MomentReport>
where
    T: Scalar,
    G: ReplacementGenerator<T> + ?Sized,
{
    profile.validate()?;
    if samples < 2 {
        return Err(Error::InvalidParameter("moment diagnostic needs at least two samples".into()));
    }
    let mut rows = Vec::with_capacity(epochs.len());
    let mut flagged = false;
    for &epoch in epochs {
        let mut norms: Vec<f64> =
            (0..samples).map(|_| generator.sample(epoch, state, rng).op_norm().as_f64()).collect();
        let m = samples as f64;
        let row = match profile {
            MomentProfile::PhiMoment(phi) => {
                let values: Vec<f64> = norms.iter().map(|x| x * phi.eval(*x)).collect();
                let mean = values.iter().sum::<f64>() / m;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
                MomentRow { epoch, estimate: mean, std_err: (var / m).sqrt() }
            }
            MomentProfile::Majorized { c, majorizer } => {
                norms.sort_by(|a, b| a.total_cmp(b));
                let mut worst = f64::NEG_INFINITY;
                for (idx, x) in norms.iter().enumerate() {
                    // empirical P(‖R‖ > y) for y just below the idx-th order statistic
                    let p_hat = (samples - idx) as f64 / m;
                    worst = worst.max(p_hat - c * majorizer.survival(*x - x.abs() * 1e-12));
                }
                // uniform (DKW) band for the empirical survival function
                if worst > (DKW_LEVEL.recip() * 2.0).ln().sqrt() / (2.0 * m).sqrt() {
                    flagged = true;
                }
                MomentRow { epoch, estimate: worst, std_err: 0.5 / m.sqrt() }
            }
        };
        rows.push(row);
    }
    if let (MomentProfile::PhiMoment(_), Some(first), Some(last)) = (profile, rows.first(), rows.last()) {
        let combined = (first.std_err.powi(2) + last.std_err.powi(2)).sqrt();
        if last.estimate > first.estimate + 3.0 * combined {
            flagged = true;
        }
    }
    Ok(MomentReport { rows, flagged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{Deterministic, IidScalarMixture};
    use crate::matrix::NonnegMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn h() -> NonnegMatrix<f64> {
        NonnegMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap()
    }

    #[test]
    fn deterministic_moment_is_exact() {
        let gen = Deterministic::new(h()).unwrap();
        let phi = Phi::LogPower { p: 2.0 };
        let report = moment_diagnostic(
            &gen,
            &UrnState::uniform(2),
            &MomentProfile::PhiMoment(phi),
            &[1, 10, 100],
            50,
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        let b: f64 = 7.0;
        for row in &report.rows {
            assert!((row.estimate - b * b.ln().powi(2)).abs() < 1e-12);
            assert!(row.std_err < 1e-12);
        }
        assert!(!report.flagged);
    }

    #[test]
    fn pareto_phi_moment_is_stable_across_epochs() {
        // E[X log² X] < ∞ for a Pareto tail with shape 1.5
        let gen = IidScalarMixture::new(h(), ScalarLaw::Pareto { scale: 1.0, shape: 1.5 }).unwrap();
        let report = moment_diagnostic(
            &gen,
            &UrnState::uniform(2),
            &MomentProfile::PhiMoment(Phi::LogPower { p: 2.0 }),
            &[10, 1000, 100_000],
            20_000,
            &mut ChaCha8Rng::seed_from_u64(4),
        )
        .unwrap();
        assert!(report.rows.iter().all(|r| r.estimate.is_finite() && r.estimate > 0.0));
        assert!(!report.flagged, "{report:?}");
    }

    #[test]
    fn exponent_at_most_one_is_rejected() {
        let gen = IidScalarMixture::new(h(), ScalarLaw::LogPareto).unwrap();
        for phi in [Phi::LogPower { p: 1.0 }, Phi::LogLogPower { p: 0.5 }] {
            let err = moment_diagnostic(
                &gen,
                &UrnState::uniform(2),
                &MomentProfile::PhiMoment(phi),
                &[1],
                10,
                &mut ChaCha8Rng::seed_from_u64(1),
            );
            assert!(matches!(err, Err(Error::InvalidParameter(_))));
        }
    }

    #[test]
    fn majorization_by_own_law_passes_and_lighter_law_fails() {
        let law = ScalarLaw::Exponential { mean: 1.0 };
        let base = NonnegMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let gen = IidScalarMixture::new(base, law).unwrap();
        let run = |profile: MomentProfile| {
            moment_diagnostic(&gen, &UrnState::uniform(2), &profile, &[5], 5000, &mut ChaCha8Rng::seed_from_u64(2))
                .unwrap()
        };
        assert!(!run(MomentProfile::Majorized { c: 1.0, majorizer: law }).flagged);
        let lighter = ScalarLaw::Constant { value: 0.5 };
        assert!(run(MomentProfile::Majorized { c: 1.0, majorizer: lighter }).flagged);
    }

    #[test]
    fn phi_families() {
        assert_eq!(Phi::LogPower { p: 2.0 }.eval(0.5), 0.0);
        assert!((Phi::LogPower { p: 2.0 }.eval(std::f64::consts::E) - 1.0).abs() < 1e-15);
        let x = 1e6f64;
        let expected = x.ln() * x.ln().ln().powf(1.5);
        assert!((Phi::LogLogPower { p: 1.5 }.eval(x) - expected).abs() < 1e-9);
    }
}
