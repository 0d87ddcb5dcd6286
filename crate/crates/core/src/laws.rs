//! Nonnegative scalar laws used to randomize replacement matrices, with the
//! closed-form truncated means the diagnostics need.

use std::f64::consts::E;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1, Open01};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarLaw {
    /// Point mass at `value`.
    Constant { value: f64 },
    Exponential { mean: f64 },
    /// `P(X > x) = (scale / x)^shape` for `x ≥ scale`; `shape > 1`.
    Pareto { scale: f64, shape: f64 },
    /// `P(X > x) = min(1, e / (x (log x)²))` for `x ≥ e`.
    ///
    /// Mean `2e`, but `E[X log₊ X] = ∞`: integrable without the `L log L`
    /// moment.
    LogPareto,
    /// `high` with probability `p_high`, otherwise `low`.
    TwoPoint { low: f64, high: f64, p_high: f64 },
}

impl ScalarLaw {
    /// Two-point law on `{0, 2}` with equal weights; mean one.
    pub const FAIR_COIN: ScalarLaw = ScalarLaw::TwoPoint { low: 0.0, high: 2.0, p_high: 0.5 };

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            ScalarLaw::Constant { value } if !(value >= 0.0 && value.is_finite()) => {
                bad(format!("constant law needs a finite value >= 0, got {value}"))
            }
            ScalarLaw::Exponential { mean } if !(mean > 0.0 && mean.is_finite()) => {
                bad(format!("exponential mean must be positive, got {mean}"))
            }
            ScalarLaw::Pareto { scale, shape } if !(scale > 0.0 && shape > 1.0 && scale.is_finite()) => {
                bad(format!("pareto needs scale > 0 and shape > 1, got scale={scale} shape={shape}"))
            }
            ScalarLaw::TwoPoint { low, high, p_high }
                if !(low >= 0.0 && high >= low && high.is_finite() && (0.0..=1.0).contains(&p_high)) =>
            {
                bad(format!("two-point law needs 0 <= low <= high and p in [0,1], got ({low}, {high}, {p_high})"))
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ScalarLaw::Constant { value } => value,
            ScalarLaw::Exponential { mean } => mean,
            ScalarLaw::Pareto { scale, shape } => shape * scale / (shape - 1.0),
            ScalarLaw::LogPareto => 2.0 * E,
            ScalarLaw::TwoPoint { low, high, p_high } => low * (1.0 - p_high) + high * p_high,
        }
    }

    /// Upper bound of the support, when finite.
    pub fn bound(&self) -> Option<f64> {
        match *self {
            ScalarLaw::Constant { value } => Some(value),
            ScalarLaw::TwoPoint { low, high, p_high } => Some(if p_high > 0.0 { high } else { low }),
            _ => None,
        }
    }

    /// `P(X > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        match *self {
            ScalarLaw::Constant { value } => f64::from(u8::from(value > x)),
            ScalarLaw::Exponential { mean } => (-(x.max(0.0)) / mean).exp(),
            ScalarLaw::Pareto { scale, shape } => {
                if x < scale {
                    1.0
                } else {
                    (scale / x).powf(shape)
                }
            }
            ScalarLaw::LogPareto => {
                if x <= E {
                    1.0
                } else {
                    E / (x * x.ln().powi(2))
                }
            }
            ScalarLaw::TwoPoint { low, high, p_high } => {
                let mut s = 0.0;
                if low > x {
                    s += 1.0 - p_high;
                }
                if high > x {
                    s += p_high;
                }
                s
            }
        }
    }

    /// Tail mean `E[X 1{X > t}]`.
    pub fn tail_mean(&self, t: f64) -> f64 {
        match *self {
            ScalarLaw::Constant { value } => if value > t { value } else { 0.0 },
            ScalarLaw::Exponential { mean } => {
                let t = t.max(0.0);
                (t + mean) * (-t / mean).exp()
            }
            ScalarLaw::Pareto { scale, shape } => {
                if t < scale {
                    self.mean()
                } else {
                    self.mean() * (scale / t).powf(shape - 1.0)
                }
            }
            ScalarLaw::LogPareto => {
                if t <= E {
                    self.mean()
                } else {
                    let l = t.ln();
                    E / l + E / (l * l)
                }
            }
            ScalarLaw::TwoPoint { low, high, p_high } => {
                let mut s = 0.0;
                if low > t {
                    s += low * (1.0 - p_high);
                }
                if high > t {
                    s += high * p_high;
                }
                s
            }
        }
    }

    /// Truncated mean `E[X 1{X ≤ t}]`.
    pub fn truncated_mean(&self, t: f64) -> f64 {
        match *self {
            // Computed directly to avoid cancellation in mean − tail.
            ScalarLaw::Exponential { mean } => {
                if t <= 0.0 {
                    0.0
                } else {
                    mean - (t + mean) * (-t / mean).exp()
                }
            }
            ScalarLaw::Pareto { scale, shape } => {
                if t < scale {
                    0.0
                } else {
                    self.mean() * (1.0 - (scale / t).powf(shape - 1.0))
                }
            }
            _ => (self.mean() - self.tail_mean(t)).max(0.0),
        }
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        match *self {
            ScalarLaw::Constant { value } => value,
            ScalarLaw::Exponential { mean } => {
                let e: f64 = Exp1.sample(rng);
                mean * e
            }
            ScalarLaw::Pareto { scale, shape } => {
                let u: f64 = Open01.sample(rng);
                scale * u.powf(-1.0 / shape)
            }
            ScalarLaw::LogPareto => {
                let u: f64 = Open01.sample(rng);
                log_pareto_quantile(u)
            }
            ScalarLaw::TwoPoint { low, high, p_high } => {
                if rng.random_bool(p_high) {
                    high
                } else {
                    low
                }
            }
        }
    }
}

/// Solves `e / (x (log x)²) = u` for `x ≥ e`.
///
/// With `y = log x` this is `y + 2 log y = 1 − log u`, increasing and concave
/// in `y`; Newton from `y = 1` (where the left side is below the target)
/// increases monotonically to the root.
pub fn log_pareto_quantile(u: f64) -> f64 {
    debug_assert!(u > 0.0 && u <= 1.0);
    let target = 1.0 - u.ln();
    let mut y = 1.0f64;
    for _ in 0..200 {
        let f = y + 2.0 * y.ln() - target;
        let step = f / (1.0 + 2.0 / y);
        y -= step;
        if step.abs() <= 1e-15 * y {
            break;
        }
    }
    y.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + h * i as f64;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn log_pareto_quantile_inverts_survival() {
        for &u in &[1.0, 0.9, 0.5, 1e-3, 1e-9, 1e-300] {
            let x = log_pareto_quantile(u);
            let s = ScalarLaw::LogPareto.survival(x);
            assert!((s - u).abs() <= 1e-10 * u, "u={u} x={x} s={s}");
        }
        assert!((log_pareto_quantile(1.0) - E).abs() < 1e-12);
    }

    #[test]
    fn log_pareto_tail_mean_by_quadrature() {
        // E[X 1{X > t}] = t G(t) + ∫_t^∞ G(x) dx; substitute x = e^y and
        // integrate e/y² over [log t, L], adding the analytic remainder e/L.
        let t: f64 = 50.0;
        let upper = 400.0;
        let integral = simpson(|y: f64| E / (y * y), t.ln(), upper, 20_000) + E / upper;
        let oracle = t * ScalarLaw::LogPareto.survival(t) + integral;
        assert!((ScalarLaw::LogPareto.tail_mean(t) - oracle).abs() < 1e-9);
        assert!((ScalarLaw::LogPareto.truncated_mean(t) + oracle - 2.0 * E).abs() < 1e-9);
    }

    #[test]
    fn pareto_truncated_mean_by_quadrature() {
        let law = ScalarLaw::Pareto { scale: 1.0, shape: 1.5 };
        let t = 30.0;
        // density α x_m^α x^{−α−1}
        let oracle = simpson(|x| x * 1.5 * x.powf(-2.5), 1.0, t, 200_000);
        assert!((law.truncated_mean(t) - oracle).abs() < 1e-7);
        assert_eq!(law.truncated_mean(0.5), 0.0);
        assert!((law.tail_mean(t) + law.truncated_mean(t) - law.mean()).abs() < 1e-12);
    }

    #[test]
    fn exponential_and_discrete_truncations() {
        let law = ScalarLaw::Exponential { mean: 2.0 };
        let oracle = simpson(|x| x * 0.5 * (-x / 2.0).exp(), 0.0, 3.0, 10_000);
        assert!((law.truncated_mean(3.0) - oracle).abs() < 1e-10);
        let c = ScalarLaw::Constant { value: 3.0 };
        assert_eq!((c.truncated_mean(2.9), c.truncated_mean(3.0)), (0.0, 3.0));
        let tp = ScalarLaw::FAIR_COIN;
        assert_eq!(tp.mean(), 1.0);
        assert_eq!((tp.truncated_mean(1.9), tp.truncated_mean(2.0)), (0.0, 1.0));
        assert_eq!(tp.bound(), Some(2.0));
    }

    #[test]
    fn sample_means_within_three_standard_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for law in [
            ScalarLaw::Exponential { mean: 2.0 },
            ScalarLaw::Pareto { scale: 1.0, shape: 3.5 },
            ScalarLaw::FAIR_COIN,
        ] {
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((m - law.mean()).abs() < 3.0 * (v / n as f64).sqrt(), "{law:?}: {m}");
        }
    }

    #[test]
    fn validation() {
        assert!(ScalarLaw::Pareto { scale: 1.0, shape: 1.0 }.validate().is_err());
        assert!(ScalarLaw::Exponential { mean: 0.0 }.validate().is_err());
        assert!(ScalarLaw::TwoPoint { low: 2.0, high: 1.0, p_high: 0.5 }.validate().is_err());
        assert!(ScalarLaw::LogPareto.validate().is_ok());
    }
}
