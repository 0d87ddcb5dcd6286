//! Delayed elephant random walk on the nonnegative orthant with randomly
//! reinforced memory, and its urn formulation.
//!
//! Step types are indexed `0..=d`: type 0 is "no move", type `i ≥ 1` a unit
//! step along axis `i`. Each past epoch carries a memory (initially 1). At
//! every epoch after the first, a past epoch is selected with probability
//! proportional to its memory, its memory is reinforced by the coordinate of
//! a random vector `A` matching its step type, and the new step is drawn
//! from the selected type:
//!
//! * type 0 → type 0 with probability `p`, each axis with `(1 − p)/d`;
//! * type `i` → type `i` with probability `q`, type 0 with `1 − q`.
//!
//! The total memory per type, `W^{(n)}`, is an urn with `d + 1` colors.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1, Open01};

use crate::error::{Error, Result};
use crate::generator::{ConditionalMoments, ReplacementGenerator};
use crate::matrix::NonnegMatrix;
use crate::scalar::Scalar;
use crate::urn::UrnState;

/// Law of each coordinate of the reinforcement vector `(A_0, …, A_d)`;
/// coordinates are i.i.d. with common mean `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reinforcement {
    Constant { a: f64 },
    Exponential { mean: f64 },
    /// `scale` with probability `prob`, else 0.
    ScaledBernoulli { scale: f64, prob: f64 },
}

impl Reinforcement {
    pub fn mean(&self) -> f64 {
        match *self {
            Reinforcement::Constant { a } => a,
            Reinforcement::Exponential { mean } => mean,
            Reinforcement::ScaledBernoulli { scale, prob } => scale * prob,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Reinforcement::Constant { a } => a,
            Reinforcement::Exponential { mean } => {
                let e: f64 = Exp1.sample(rng);
                mean * e
            }
            Reinforcement::ScaledBernoulli { scale, prob } => {
                if rng.random_bool(prob) {
                    scale
                } else {
                    0.0
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Reinforcement::Constant { a } => a > 0.0 && a.is_finite(),
            Reinforcement::Exponential { mean } => mean > 0.0 && mean.is_finite(),
            Reinforcement::ScaledBernoulli { scale, prob } => {
                scale > 0.0 && scale.is_finite() && prob > 0.0 && prob <= 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("reinforcement needs a finite positive mean: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErwParams {
    d: usize,
    p: f64,
    q: f64,
    reinforcement: Reinforcement,
}

impl ErwParams {
    pub fn new(d: usize, p: f64, q: f64, reinforcement: Reinforcement) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension d must be at least 1".into()));
        }
        for (name, v) in [("p", p), ("q", q)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        reinforcement.validate()?;
        Ok(Self { d, p, q, reinforcement })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Common mean `a` of the reinforcement coordinates.
    pub fn a(&self) -> f64 {
        self.reinforcement.mean()
    }

    pub fn reinforcement(&self) -> Reinforcement {
        self.reinforcement
    }

    fn normalizer(&self) -> f64 {
        self.d as f64 * (1.0 - self.q + self.a() * (1.0 - self.p))
    }

    /// The nominal mean replacement matrix of the memory urn:
    /// row 0 is `(1 + pa, (1 − p)a/d, …, (1 − p)a/d)` and row `i ≥ 1` has
    /// `1 − q` in column 0 and `q + a` on the diagonal, zero elsewhere.
    ///
    /// Its dominant eigenvalue is `1 + a` with Perron vector
    /// [`ErwParams::perron_vector`]. Row 0 agrees with the walk's
    /// transition mean ([`ErwParams::walk_mean_matrix`]) only when `a = 1`.
    pub fn mean_replacement_matrix(&self) -> NonnegMatrix<f64> {
        let (d, p, q, a) = (self.d, self.p, self.q, self.a());
        let mut m = NonnegMatrix::zeros(d + 1);
        m.set(0, 0, 1.0 + p * a);
        for j in 1..=d {
            m.set(0, j, (1.0 - p) * a / d as f64);
            m.set(j, 0, 1.0 - q);
            m.set(j, j, q + a);
        }
        m
    }

    /// Mean of the memory added per step under the walk's dynamics: the
    /// selected type gains `a`, the new step's type gains 1. Row 0 is
    /// `(a + p, (1 − p)/d, …)`; rows `i ≥ 1` match
    /// [`ErwParams::mean_replacement_matrix`].
    pub fn walk_mean_matrix(&self) -> NonnegMatrix<f64> {
        let (d, p, q, a) = (self.d, self.p, self.q, self.a());
        let mut m = NonnegMatrix::zeros(d + 1);
        m.set(0, 0, a + p);
        for j in 1..=d {
            m.set(0, j, (1.0 - p) / d as f64);
            m.set(j, 0, 1.0 - q);
            m.set(j, j, q + a);
        }
        m
    }

    /// `(d(1 − q), a(1 − p), …, a(1 − p)) / (d(1 − q + a(1 − p)))`.
    pub fn perron_vector(&self) -> Vec<f64> {
        let z = self.normalizer();
        let mut v = vec![self.a() * (1.0 - self.p) / z; self.d + 1];
        v[0] = self.d as f64 * (1.0 - self.q) / z;
        v
    }

    /// Almost-sure limit of `L_n / n`:
    /// `a(1 − p) / (d(1 − q + a(1 − p)))` in every coordinate.
    pub fn theoretical_limit(&self) -> Vec<f64> {
        vec![self.a() * (1.0 - self.p) / self.normalizer(); self.d]
    }
}

/// Draws the type of the new step given the selected type.
pub fn next_step_type<R: Rng + ?Sized>(selected: usize, d: usize, p: f64, q: f64, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    if selected == 0 {
        if u < p {
            0
        } else {
            // (u − p)/(1 − p) is uniform on [0, 1)
            let axis = (((u - p) / (1.0 - p)) * d as f64) as usize;
            1 + axis.min(d - 1)
        }
    } else if u < q {
        selected
    } else {
        0
    }
}

/// Fenwick tree over nonnegative weights supporting append, point update and
/// proportional sampling in `O(log n)`.
#[derive(Debug, Clone, Default)]
pub struct WeightTree {
    tree: Vec<f64>,
    values: Vec<f64>,
    total: f64,
}

impl WeightTree {
    pub fn with_capacity(n: usize) -> Self {
        Self { tree: Vec::with_capacity(n), values: Vec::with_capacity(n), total: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sum of the first `count` weights.
    pub fn prefix(&self, count: usize) -> f64 {
        let mut i = count;
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i - 1];
            i &= i - 1;
        }
        s
    }

    pub fn push(&mut self, weight: f64) {
        let i = self.values.len() + 1;
        let low = i & i.wrapping_neg();
        let node = weight + self.prefix(i - 1) - self.prefix(i - low);
        self.tree.push(node);
        self.values.push(weight);
        self.total += weight;
    }

    pub fn add(&mut self, idx: usize, delta: f64) {
        self.values[idx] += delta;
        self.total += delta;
        let mut i = idx + 1;
        while i <= self.tree.len() {
            self.tree[i - 1] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Smallest index whose inclusive prefix sum exceeds `target`.
    pub fn find(&self, mut target: f64) -> usize {
        let n = self.tree.len();
        assert!(n > 0, "cannot sample from an empty tree");
        let mut pos = 0;
        let mut step = 1usize << (usize::BITS - 1 - n.leading_zeros());
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next - 1] <= target {
                pos = next;
                target -= self.tree[next - 1];
            }
            step >>= 1;
        }
        pos.min(n - 1)
    }

    /// Index drawn with probability proportional to its weight.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = Open01.sample(rng);
        self.find(u * self.total)
    }
}

/// Walk state after `n` epochs.
#[derive(Debug, Clone)]
pub struct WalkState {
    d: usize,
    location: Vec<u64>,
    step_types: Vec<u32>,
    memories: WeightTree,
    type_memory: Vec<f64>,
    /// Number of times a past step of each type was selected.
    selections: Vec<u64>,
    /// Total reinforcement credited to each type.
    reinforcement_by_type: Vec<f64>,
}

impl WalkState {
    /// The walk at the origin before its first step.
    pub fn new(d: usize) -> Self {
        Self {
            d,
            location: vec![0; d],
            step_types: Vec::new(),
            memories: WeightTree::default(),
            type_memory: vec![0.0; d + 1],
            selections: vec![0; d + 1],
            reinforcement_by_type: vec![0.0; d + 1],
        }
    }

    fn with_capacity(d: usize, n: usize) -> Self {
        let mut s = Self::new(d);
        s.step_types.reserve(n);
        s.memories = WeightTree::with_capacity(n);
        s
    }

    pub fn epoch(&self) -> u64 {
        self.step_types.len() as u64
    }

    /// `L_n`.
    pub fn location(&self) -> &[u64] {
        &self.location
    }

    /// Step types `X_1, …, X_n` as indices in `0..=d`.
    pub fn step_types(&self) -> &[u32] {
        &self.step_types
    }

    /// Memory `M_k^{(n)}` of epoch `k` (1-based).
    pub fn memory(&self, epoch: usize) -> f64 {
        self.memories.get(epoch - 1)
    }

    pub fn memories(&self) -> &[f64] {
        self.memories.values()
    }

    /// `W^{(n)}`: total memory per step type.
    pub fn type_memory(&self) -> &[f64] {
        &self.type_memory
    }

    pub fn selections(&self) -> &[u64] {
        &self.selections
    }

    pub fn reinforcement_by_type(&self) -> &[f64] {
        &self.reinforcement_by_type
    }

    pub fn total_memory(&self) -> f64 {
        self.memories.total()
    }

    /// Selects a past epoch (0-based) with probability proportional to its memory.
    pub fn select_epoch<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.memories.sample(rng)
    }

    /// Advances the walk by one epoch.
    pub fn step<R: Rng + ?Sized>(&mut self, params: &ErwParams, rng: &mut R) {
        assert_eq!(self.d, params.d, "walk dimension does not match parameters");
        let new_type = if self.step_types.is_empty() {
            rng.random_range(0..=self.d)
        } else {
            let chosen = self.select_epoch(rng);
            let selected = self.step_types[chosen] as usize;
            let reinforcement = params.reinforcement.sample(rng);
            self.memories.add(chosen, reinforcement);
            self.type_memory[selected] += reinforcement;
            self.reinforcement_by_type[selected] += reinforcement;
            self.selections[selected] += 1;
            next_step_type(selected, self.d, params.p, params.q, rng)
        };
        self.step_types.push(new_type as u32);
        self.memories.push(1.0);
        self.type_memory[new_type] += 1.0;
        if new_type > 0 {
            self.location[new_type - 1] += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErwRunOptions {
    pub horizon: u64,
    pub checkpoints: Vec<u64>,
    /// Largest number of epochs whose memories may be stored.
    pub memory_budget: u64,
}

impl ErwRunOptions {
    pub const DEFAULT_MEMORY_BUDGET: u64 = 100_000_000;

    pub fn new(horizon: u64, checkpoints: Vec<u64>) -> Self {
        Self { horizon, checkpoints, memory_budget: Self::DEFAULT_MEMORY_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErwSnapshot {
    pub epoch: u64,
    /// `L_n / n`.
    pub location: Vec<f64>,
    /// `W^{(n)} / n`.
    pub type_memory: Vec<f64>,
    /// Selected-type counts over `n`.
    pub selections: Vec<f64>,
}

impl ErwSnapshot {
    fn of(state: &WalkState) -> Self {
        let n = state.epoch() as f64;
        Self {
            epoch: state.epoch(),
            location: state.location.iter().map(|l| *l as f64 / n).collect(),
            type_memory: state.type_memory.iter().map(|w| w / n).collect(),
            selections: state.selections.iter().map(|s| *s as f64 / n).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ErwTrajectory {
    pub checkpoints: Vec<ErwSnapshot>,
    pub final_state: WalkState,
}

/// Simulates the walk directly for `options.horizon` epochs.
pub fn erw_run<R: Rng + ?Sized>(params: &ErwParams, options: &ErwRunOptions, rng: &mut R) -> Result<ErwTrajectory> {
    if options.horizon > options.memory_budget {
        return Err(Error::MemoryBudget { horizon: options.horizon, budget: options.memory_budget });
    }
    if options.checkpoints.windows(2).any(|w| w[1] <= w[0])
        || options.checkpoints.iter().any(|c| *c == 0 || *c > options.horizon)
    {
        return Err(Error::InvalidParameter("checkpoints must be increasing within 1..=horizon".into()));
    }
    let mut state = WalkState::with_capacity(params.d, options.horizon as usize);
    let mut checkpoints = Vec::with_capacity(options.checkpoints.len());
    let mut next = options.checkpoints.iter().peekable();
    while state.epoch() < options.horizon {
        state.step(params, rng);
        if next.peek() == Some(&&state.epoch()) {
            next.next();
            checkpoints.push(ErwSnapshot::of(&state));
        }
    }
    Ok(ErwTrajectory { checkpoints, final_state: state })
}

/// The memory urn as a replacement generator: row `i` of `R_n` adds the
/// reinforcement `A_i` to color `i` and one unit to the color of the step
/// drawn from type `i`.
#[derive(Debug, Clone)]
pub struct ErwReplacement {
    params: ErwParams,
}

impl ErwReplacement {
    pub fn new(params: ErwParams) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &ErwParams {
        &self.params
    }
}

impl<T: Scalar> ReplacementGenerator<T> for ErwReplacement {
    fn dim(&self) -> usize {
        self.params.d + 1
    }

    fn sample(&self, _epoch: u64, _state: &UrnState<T>, rng: &mut dyn RngCore) -> NonnegMatrix<T> {
        let k = self.params.d + 1;
        let mut m = NonnegMatrix::zeros(k);
        for i in 0..k {
            let a = self.params.reinforcement.sample(rng);
            let next = next_step_type(i, self.params.d, self.params.p, self.params.q, rng);
            m.set(i, i, m.get(i, i) + T::of(a));
            m.set(i, next, m.get(i, next) + T::one());
        }
        m
    }

    fn limit_matrix(&self) -> NonnegMatrix<T> {
        self.params.walk_mean_matrix().map_to()
    }

    fn exact_moments(&self, epoch: u64, _state: &UrnState<T>) -> Option<ConditionalMoments<T>> {
        match self.params.reinforcement {
            Reinforcement::Constant { a } => {
                let mean: NonnegMatrix<T> = self.params.walk_mean_matrix().map_to();
                let norm = 1.0 + a;
                let fits = norm <= epoch as f64;
                Some(ConditionalMoments {
                    truncated_mean: if fits { mean.clone() } else { NonnegMatrix::zeros(mean.dim()) },
                    tail_norm: if fits { T::zero() } else { T::of(norm) },
                    mean,
                    exact: true,
                })
            }
            _ => None,
        }
    }

    fn norm_bound(&self) -> Option<T> {
        match self.params.reinforcement {
            Reinforcement::Constant { a } => Some(T::of(1.0 + a)),
            Reinforcement::ScaledBernoulli { scale, .. } => Some(T::of(1.0 + scale)),
            Reinforcement::Exponential { .. } => None,
        }
    }
}

impl NonnegMatrix<f64> {
    /// Converts to another scalar type.
    pub fn map_to<T: Scalar>(&self) -> NonnegMatrix<T> {
        NonnegMatrix::from_raw(self.dim(), self.as_slice().iter().map(|v| T::of(*v)).collect())
    }
}
