//! Randomized urn models with unbounded replacement matrices, the
//! stochastic-approximation view of their dynamics, and the elephant random
//! walk whose memory forms such an urn.
//!
//! Every numerical type is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64` or `f32`.

pub mod erw;
pub mod error;
pub mod generator;
pub mod laws;
pub mod matrix;
pub mod moment;
pub mod sa;
pub mod scalar;
pub mod seed;
pub mod urn;

pub use erw::{erw_run, ErwParams, ErwReplacement, ErwRunOptions, ErwSnapshot, ErwTrajectory, Reinforcement, WalkState};
pub use error::{Error, Result};
pub use generator::{
    AdaptedPerturbation, ConditionalMoments, Deterministic, IidScalarMixture, PerturbationNoise, ProportionFeedback,
    ReplacementGenerator,
};
pub use laws::ScalarLaw;
pub use matrix::{NonnegMatrix, Spectrum};
pub use moment::{moment_diagnostic, MomentProfile, MomentReport, Phi};
pub use sa::{
    drift, error_decomposition, kushner_clark_certificate, ode_reference, tau, CesaroTrace, ErrorTrace, OdeOptions,
    OdeSolution, SAErrorTerms, SaMonitor, Series,
};
pub use scalar::Scalar;
pub use seed::{replicate_seed, PathStreams};
pub use urn::{run, DrawRecord, RunOptions, Trajectory, UrnState};

pub type Matrix = NonnegMatrix<f64>;
pub type Matrix32 = NonnegMatrix<f32>;
pub type Urn = UrnState<f64>;
pub type Urn32 = UrnState<f32>;
pub type PathTrajectory = Trajectory<f64>;
pub type PathTrajectory32 = Trajectory<f32>;
