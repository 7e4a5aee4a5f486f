//! Poissonized χ²-type closeness testing of two state sequences.
//!
//! For every state `b`, the outgoing transition counts of both sequences are
//! normalized into conditional distributions. If both rows hold more than `μ`
//! transitions, the test is repeated `N` times: a sample size is drawn from
//! `Poisson(m)` with `m = C·max(B^{2/3}/ε^{4/3}, B^{1/2}/ε²)`, both rows are
//! sampled, and the χ²-type statistic `z` and total variation `d` of the two
//! count vectors are computed. `z <= m²ε²/(8(m + B))` counts as an accept and
//! `d > ε` as a reject. States failing the `μ` guard are reported as the
//! sentinel `-1` in all four outputs.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::quantizer::StateSequence;
use crate::streams::{stream, StreamRng};
use crate::transition::{count_transitions_from, sample_counts, TransitionCounts};
use crate::{Error, Result};

pub const SENTINEL: f64 = -1.0;

/// How the two sample sizes of one iteration are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleSizeMode {
    /// Each side draws its own `m0 ~ Poisson(m)`; `z` has mean zero when the
    /// rows are equal.
    #[default]
    Independent,
    /// One `m0` per iteration shared by both sides. Under equal rows this
    /// biases `z` to about `-1`.
    Shared,
}

impl FromStr for SampleSizeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(SampleSizeMode::Independent),
            "shared" => Ok(SampleSizeMode::Shared),
            _ => Err(Error::domain(format!("unknown sample size mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosenessParams {
    pub epsilon: f64,
    pub c: f64,
    /// Testing iterations `N`.
    pub iterations: usize,
    /// A state is tested only when both rows hold more than this many transitions.
    pub min_transitions: u64,
    /// `B^d`.
    pub states: usize,
    pub seed: u64,
    pub sample_mode: SampleSizeMode,
}

impl ClosenessParams {
    /// Parameters with `μ = 1`, seed 0 and independent sample sizes.
    pub fn new(epsilon: f64, c: f64, iterations: usize, states: usize) -> Result<Self> {
        let p = ClosenessParams {
            epsilon,
            c,
            iterations,
            min_transitions: 1,
            states,
            seed: 0,
            sample_mode: SampleSizeMode::Independent,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_min_transitions(mut self, mu: u64) -> Self {
        self.min_transitions = mu;
        self
    }

    pub fn with_sample_mode(mut self, mode: SampleSizeMode) -> Self {
        self.sample_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::domain(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !self.c.is_finite() || self.c <= 0.0 {
            return Err(Error::domain(format!("C must be positive, got {}", self.c)));
        }
        if self.iterations < 1 {
            return Err(Error::domain("N must be at least 1"));
        }
        if self.states < 1 {
            return Err(Error::domain("state count must be at least 1"));
        }
        Ok(())
    }

    pub fn sample_size(&self) -> f64 {
        self.c * sample_size_factor(self.epsilon, self.states)
    }

    pub fn threshold(&self) -> f64 {
        accept_threshold(self.sample_size(), self.epsilon, self.states)
    }
}

fn sample_size_factor(epsilon: f64, states: usize) -> f64 {
    let b = states as f64;
    let sparse = b.powf(2.0 / 3.0) / epsilon.powf(4.0 / 3.0);
    let dense = b.sqrt() / (epsilon * epsilon);
    sparse.max(dense)
}

/// Poisson mean `m = C·max(B^{2/3}/ε^{4/3}, B^{1/2}/ε²)`.
pub fn required_sample_size(epsilon: f64, c: f64, states: usize) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::domain(format!("C must be positive, got {c}")));
    }
    if states < 1 {
        return Err(Error::domain("state count must be at least 1"));
    }
    Ok(c * sample_size_factor(epsilon, states))
}

/// Accept threshold `m²ε² / (8(m + B))`.
pub fn accept_threshold(m: f64, epsilon: f64, states: usize) -> f64 {
    m * m * epsilon * epsilon / (8.0 * (m + states as f64))
}

/// χ²-type statistic `Σ ((x - y)² - (x + y)) / (x + y)` over bins with
/// `x + y > 0`.
pub fn chi2_statistic(cx: &[u64], cy: &[u64]) -> Result<f64> {
    if cx.len() != cy.len() {
        return Err(Error::LengthMismatch { left: cx.len(), right: cy.len() });
    }
    Ok(cx
        .iter()
        .zip(cy)
        .filter(|(&x, &y)| x + y > 0)
        .map(|(&x, &y)| {
            let diff = x as f64 - y as f64;
            let sum = (x + y) as f64;
            (diff * diff - sum) / sum
        })
        .sum())
}

/// Total variation distance between the empirical distributions of two
/// count vectors.
pub fn tv_distance(cx: &[u64], cy: &[u64]) -> Result<f64> {
    if cx.len() != cy.len() {
        return Err(Error::LengthMismatch { left: cx.len(), right: cy.len() });
    }
    let nx: u64 = cx.iter().sum();
    let ny: u64 = cy.iter().sum();
    if nx == 0 || ny == 0 {
        return Err(Error::domain("total variation needs non-empty count vectors"));
    }
    let (nx, ny) = (nx as f64, ny as f64);
    let d = 0.5 * cx.iter().zip(cy).map(|(&x, &y)| (x as f64 / nx - y as f64 / ny).abs()).sum::<f64>();
    Ok(d.min(1.0))
}

/// `d(n)` of one iteration. A Poisson draw may leave a side empty: two
/// empty samples are at distance 0, one empty sample at distance 1.
fn sample_tv(cx: &[u64], cy: &[u64]) -> Result<f64> {
    let nx: u64 = cx.iter().sum();
    let ny: u64 = cy.iter().sum();
    match (nx, ny) {
        (0, 0) => Ok(0.0),
        (0, _) | (_, 0) => Ok(1.0),
        _ => tv_distance(cx, cy),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateTestResult {
    pub accept_prob: f64,
    pub reject_prob: f64,
    pub z_mean: f64,
    pub d_mean: f64,
    pub sentinel: bool,
}

impl StateTestResult {
    pub fn sentinel() -> Self {
        StateTestResult {
            accept_prob: SENTINEL,
            reject_prob: SENTINEL,
            z_mean: SENTINEL,
            d_mean: SENTINEL,
            sentinel: true,
        }
    }
}

/// Every iteration of one state test, for inspection and calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrace {
    pub z: Vec<f64>,
    pub d: Vec<f64>,
    pub accepts: usize,
    pub rejects: usize,
    pub threshold: f64,
}

impl StateTrace {
    pub fn summarize(&self) -> StateTestResult {
        let n = self.z.len() as f64;
        StateTestResult {
            accept_prob: self.accepts as f64 / n,
            reject_prob: self.rejects as f64 / n,
            z_mean: self.z.iter().sum::<f64>() / n,
            d_mean: self.d.iter().sum::<f64>() / n,
            sentinel: false,
        }
    }
}

fn check_rows(tx: &TransitionCounts, ty: &TransitionCounts, params: &ClosenessParams) -> Result<()> {
    if tx.counts.len() != params.states || ty.counts.len() != params.states {
        return Err(Error::domain(format!(
            "transition rows have lengths {} and {}, expected {}",
            tx.counts.len(),
            ty.counts.len(),
            params.states
        )));
    }
    if tx.from_state != ty.from_state {
        return Err(Error::domain(format!("rows are for different states ({} and {})", tx.from_state, ty.from_state)));
    }
    Ok(())
}

/// Runs the `N` iterations for one state, or `None` when the `μ` guard fails.
pub fn test_state_trace<R: Rng + ?Sized>(
    tx: &TransitionCounts,
    ty: &TransitionCounts,
    params: &ClosenessParams,
    rng: &mut R,
) -> Result<Option<StateTrace>> {
    params.validate()?;
    check_rows(tx, ty, params)?;
    let mu = params.min_transitions;
    if tx.total() <= mu || ty.total() <= mu {
        return Ok(None);
    }

    let m = params.sample_size();
    let threshold = accept_threshold(m, params.epsilon, params.states);
    let poisson = Poisson::new(m).map_err(|e| Error::domain(format!("poisson({m}): {e}")))?;

    let n = params.iterations;
    let mut trace =
        StateTrace { z: Vec::with_capacity(n), d: Vec::with_capacity(n), accepts: 0, rejects: 0, threshold };
    for _ in 0..n {
        let mx = poisson.sample(rng) as u64;
        let my = match params.sample_mode {
            SampleSizeMode::Independent => poisson.sample(rng) as u64,
            SampleSizeMode::Shared => mx,
        };
        let cx = sample_counts(&tx.counts, mx, rng)?;
        let cy = sample_counts(&ty.counts, my, rng)?;
        let z = chi2_statistic(&cx, &cy)?;
        let d = sample_tv(&cx, &cy)?;
        if z <= threshold {
            trace.accepts += 1;
        }
        if d > params.epsilon {
            trace.rejects += 1;
        }
        trace.z.push(z);
        trace.d.push(d);
    }
    Ok(Some(trace))
}

pub fn test_state<R: Rng + ?Sized>(
    tx: &TransitionCounts,
    ty: &TransitionCounts,
    params: &ClosenessParams,
    rng: &mut R,
) -> Result<StateTestResult> {
    Ok(test_state_trace(tx, ty, params, rng)?.map(|t| t.summarize()).unwrap_or_else(StateTestResult::sentinel))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosenessResult {
    pub per_state: Vec<StateTestResult>,
    pub params: ClosenessParams,
}

/// Tests every state of `x` against `y`. State `b` draws from stream `b` of
/// `params.seed`, so the result does not depend on thread scheduling.
pub fn closeness_analysis(x: &StateSequence, y: &StateSequence, params: &ClosenessParams) -> Result<ClosenessResult> {
    params.validate()?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::domain("closeness analysis needs non-empty sequences"));
    }
    if x.spec() != y.spec() {
        return Err(Error::domain("sequences were quantized with different specs"));
    }
    if x.state_count() != params.states {
        return Err(Error::domain(format!(
            "params declare {} states but sequences have {}",
            params.states,
            x.state_count()
        )));
    }
    let per_state = (1..=params.states)
        .into_par_iter()
        .map(|b| {
            let tx = count_transitions_from(x, b)?;
            let ty = count_transitions_from(y, b)?;
            let mut rng: StreamRng = stream(params.seed, b as u64);
            test_state(&tx, &ty, params, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClosenessResult { per_state, params: params.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
    Min,
}

impl Aggregation {
    fn apply(self, v: &mut [f64]) -> f64 {
        match self {
            Aggregation::Mean => v.iter().sum::<f64>() / v.len() as f64,
            Aggregation::Min => v.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregation::Median => {
                v.sort_by(f64::total_cmp);
                let n = v.len();
                if n % 2 == 1 {
                    v[n / 2]
                } else {
                    0.5 * (v[n / 2 - 1] + v[n / 2])
                }
            }
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Mean => "mean",
            Aggregation::Median => "median",
            Aggregation::Min => "min",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "median" => Ok(Aggregation::Median),
            "min" => Ok(Aggregation::Min),
            _ => Err(Error::domain(format!("unknown aggregation {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosenessSummary {
    pub accept_prob: f64,
    pub reject_prob: f64,
    pub z: f64,
    pub d: f64,
    pub method: Aggregation,
    pub states_used: usize,
}

/// Reduces the non-sentinel states with `method`, each output independently.
pub fn aggregate(result: &ClosenessResult, method: Aggregation) -> Result<ClosenessSummary> {
    aggregate_states(&result.per_state, method)
}

pub fn aggregate_states(per_state: &[StateTestResult], method: Aggregation) -> Result<ClosenessSummary> {
    let used: Vec<&StateTestResult> = per_state.iter().filter(|s| !s.sentinel).collect();
    if used.is_empty() {
        return Err(Error::Undetermined);
    }
    let column = |f: fn(&StateTestResult) -> f64| {
        let mut v: Vec<f64> = used.iter().map(|s| f(s)).collect();
        method.apply(&mut v)
    };
    Ok(ClosenessSummary {
        accept_prob: column(|s| s.accept_prob),
        reject_prob: column(|s| s.reject_prob),
        z: column(|s| s.z_mean),
        d: column(|s| s.d_mean),
        method,
        states_used: used.len(),
    })
}
