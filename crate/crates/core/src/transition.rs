//! Empirical transition counts and sampling from conditional rows.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::quantizer::StateSequence;
use crate::{Error, Result};

/// Observed transitions out of one state: `counts[k - 1]` is the number of
/// `from_state -> k` moves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCounts {
    pub from_state: usize,
    pub counts: Vec<u64>,
}

impl TransitionCounts {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn count_transitions_from(seq: &StateSequence, b: usize) -> Result<TransitionCounts> {
    let n = seq.state_count();
    if b < 1 || b > n {
        return Err(Error::domain(format!("state {b} outside 1..={n}")));
    }
    let mut counts = vec![0u64; n];
    for w in seq.states().windows(2) {
        if w[0] == b {
            counts[w[1] - 1] += 1;
        }
    }
    Ok(TransitionCounts { from_state: b, counts })
}

/// All rows at once; `m[b - 1][k - 1]` counts `b -> k`.
pub fn full_transition_counts(seq: &StateSequence) -> Vec<Vec<u64>> {
    let n = seq.state_count();
    let mut m = vec![vec![0u64; n]; n];
    for w in seq.states().windows(2) {
        m[w[0] - 1][w[1] - 1] += 1;
    }
    m
}

/// Rows of [`full_transition_counts`] wrapped as [`TransitionCounts`].
pub fn transition_rows(seq: &StateSequence) -> Vec<TransitionCounts> {
    full_transition_counts(seq)
        .into_iter()
        .enumerate()
        .map(|(i, counts)| TransitionCounts { from_state: i + 1, counts })
        .collect()
}

/// Counts of `m0` i.i.d. categorical draws with probabilities proportional to
/// `weights`, generated as one multinomial by successive conditional
/// binomials.
pub fn sample_counts<R: Rng + ?Sized>(weights: &[u64], m0: u64, rng: &mut R) -> Result<Vec<u64>> {
    let mut mass: u64 = weights.iter().sum();
    if mass == 0 {
        return Err(Error::domain("cannot sample from an all-zero weight vector"));
    }
    let mut out = vec![0u64; weights.len()];
    let mut left = m0;
    for (slot, &w) in out.iter_mut().zip(weights) {
        if left == 0 {
            break;
        }
        if w == 0 {
            continue;
        }
        let c = if w == mass {
            left
        } else {
            let p = w as f64 / mass as f64;
            Binomial::new(left, p).map_err(|e| Error::domain(format!("binomial({left}, {p}): {e}")))?.sample(rng)
        };
        *slot = c;
        left -= c;
        mass -= w;
    }
    Ok(out)
}
