//! Uniform quantization of proportions into a finite state space.
//!
//! Each of the `d` dimensions of `[0, p_max]` is cut into `B` equal bins with
//! edges `s_i = (i - 1) * p_max / B`, `i = 1..=B+1`. A value `v` falls in bin
//! `i` when `s_i < v <= s_{i+1}`; `v = 0` is assigned to bin 1. Bins of a
//! vector are flattened into a single state id in `1..=B^d` with dimension 1
//! varying fastest.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationSpec {
    p_max: f64,
    bins: usize,
    dim: usize,
}

impl QuantizationSpec {
    pub fn uniform(p_max: f64, bins: usize, dim: usize) -> Result<Self> {
        if !(p_max > 0.0 && p_max <= 1.0) {
            return Err(Error::domain(format!("p_max must lie in (0, 1], got {p_max}")));
        }
        if bins < 2 {
            return Err(Error::domain(format!("need at least 2 bins, got {bins}")));
        }
        if dim < 1 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        bins.checked_pow(dim as u32).ok_or_else(|| Error::domain("state space too large"))?;
        Ok(QuantizationSpec { p_max, bins, dim })
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total number of states, `B^d`.
    pub fn state_count(&self) -> usize {
        self.bins.pow(self.dim as u32)
    }

    /// Edge `s_{i+1}` for 0-based `i`, i.e. `i * p_max / B`.
    pub fn edge(&self, i: usize) -> f64 {
        if i == self.bins {
            self.p_max
        } else {
            i as f64 * self.p_max / self.bins as f64
        }
    }

    /// The `B + 1` edges of one dimension.
    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins).map(|i| self.edge(i)).collect()
    }

    /// 1-based bin of a scalar within one dimension.
    pub fn bin_of(&self, v: f64) -> Result<usize> {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::domain(format!("value {v} is negative or not finite")));
        }
        if v > self.p_max {
            return Err(Error::domain(format!("value {v} exceeds p_max {}", self.p_max)));
        }
        if v == 0.0 {
            return Ok(1);
        }
        let mut i = ((v / self.p_max) * self.bins as f64).ceil() as usize;
        i = i.clamp(1, self.bins);
        // Settle rounding at the edges so that edge(i-1) < v <= edge(i).
        while i > 1 && v <= self.edge(i - 1) {
            i -= 1;
        }
        while i < self.bins && v > self.edge(i) {
            i += 1;
        }
        Ok(i)
    }

    pub fn quantize_value(&self, v: &[f64]) -> Result<usize> {
        if v.len() != self.dim {
            return Err(Error::LengthMismatch { left: v.len(), right: self.dim });
        }
        let mut state = 0;
        let mut stride = 1;
        for &x in v {
            state += (self.bin_of(x)? - 1) * stride;
            stride *= self.bins;
        }
        Ok(state + 1)
    }

    pub fn quantize_sequence<V: AsRef<[f64]>>(&self, series: &[V]) -> Result<StateSequence> {
        let states = series
            .iter()
            .enumerate()
            .map(|(index, v)| {
                self.quantize_value(v.as_ref()).map_err(|e| Error::AtIndex { index, source: Box::new(e) })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StateSequence { states, spec: *self })
    }
}

/// Default `p_max` for a set of observed proportions: the maximum rounded up
/// to two significant digits, capped at 1. All-zero input gives 1.
pub fn default_p_max<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let max = values.into_iter().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return 1.0;
    }
    let unit = 10f64.powi(max.log10().floor() as i32 - 1);
    let mut p = (max / unit).ceil() * unit;
    // ceil on a value like 0.30000000000000004 / 0.01 can land one unit low
    if p < max {
        p += unit;
    }
    p.min(1.0)
}

/// A trajectory over state ids `1..=spec.state_count()`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSequence {
    states: Vec<usize>,
    spec: QuantizationSpec,
}

impl StateSequence {
    pub fn new(states: Vec<usize>, spec: QuantizationSpec) -> Result<Self> {
        let n = spec.state_count();
        if let Some((index, &s)) = states.iter().enumerate().find(|(_, &s)| s < 1 || s > n) {
            return Err(Error::AtIndex {
                index,
                source: Box::new(Error::domain(format!("state {s} outside 1..={n}"))),
            });
        }
        Ok(StateSequence { states, spec })
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn spec(&self) -> &QuantizationSpec {
        &self.spec
    }

    pub fn state_count(&self) -> usize {
        self.spec.state_count()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Contiguous sub-trajectory `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> StateSequence {
        StateSequence { states: self.states[range].to_vec(), spec: self.spec }
    }

    pub fn into_states(self) -> Vec<usize> {
        self.states
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn twenty_bins_on_unit_interval() {
        let spec = QuantizationSpec::uniform(1.0, 20, 1).unwrap();
        let edges = spec.edges();
        assert_eq!(edges.len(), 21);
        assert_eq!(spec.state_count(), 20);
        for (i, e) in edges.iter().enumerate() {
            assert_abs_diff_eq!(*e, 0.05 * i as f64, epsilon = 1e-12);
        }
        assert_eq!(edges[20], 1.0);
    }

    #[test]
    fn smallest_legal_spec() {
        let spec = QuantizationSpec::uniform(1.0, 2, 1).unwrap();
        assert_eq!(spec.edges(), vec![0.0, 0.5, 1.0]);
        assert_eq!(spec.state_count(), 2);
    }

    #[test]
    fn two_dimensional_spec() {
        let spec = QuantizationSpec::uniform(0.5, 5, 2).unwrap();
        assert_eq!(spec.state_count(), 25);
        assert_abs_diff_eq!(spec.edge(1) - spec.edge(0), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn invalid_specs() {
        assert!(QuantizationSpec::uniform(1.0, 1, 1).is_err());
        assert!(QuantizationSpec::uniform(0.0, 5, 1).is_err());
        assert!(QuantizationSpec::uniform(1.5, 5, 1).is_err());
        assert!(QuantizationSpec::uniform(1.0, 5, 0).is_err());
    }

    #[test]
    fn quantize_scalars() {
        let spec = QuantizationSpec::uniform(1.0, 20, 1).unwrap();
        assert_eq!(spec.quantize_value(&[0.13]).unwrap(), 3);
        assert_eq!(spec.quantize_value(&[0.0]).unwrap(), 1);
        assert_eq!(spec.quantize_value(&[1.0]).unwrap(), 20);
        // upper edges are inclusive
        assert_eq!(spec.quantize_value(&[0.15]).unwrap(), 3);
        assert_eq!(spec.quantize_value(&[0.05]).unwrap(), 1);
        assert!(spec.quantize_value(&[1.0000001]).is_err());
        assert!(spec.quantize_value(&[-0.01]).is_err());
    }

    #[test]
    fn row_major_flattening() {
        let spec = QuantizationSpec::uniform(1.0, 2, 2).unwrap();
        assert_eq!(spec.quantize_value(&[0.1, 0.1]).unwrap(), 1);
        assert_eq!(spec.quantize_value(&[0.9, 0.1]).unwrap(), 2);
        assert_eq!(spec.quantize_value(&[0.1, 0.9]).unwrap(), 3);
        assert_eq!(spec.quantize_value(&[0.9, 0.9]).unwrap(), 4);
        assert!(spec.quantize_value(&[0.9]).is_err());
    }

    #[test]
    fn quantize_sequences() {
        let spec = QuantizationSpec::uniform(1.0, 2, 1).unwrap();
        let q = spec.quantize_sequence(&[[0.1], [0.9], [0.4]]).unwrap();
        assert_eq!(q.states(), &[1, 2, 1]);

        let spec = QuantizationSpec::uniform(1.0, 20, 1).unwrap();
        let empty: Vec<[f64; 1]> = vec![];
        assert!(spec.quantize_sequence(&empty).unwrap().is_empty());
        let q = spec.quantize_sequence(&[[0.07]; 6]).unwrap();
        assert_eq!(q.states(), &[2; 6]);

        match spec.quantize_sequence(&[[0.1], [2.0]]) {
            Err(Error::AtIndex { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn default_p_max_rounds_up() {
        assert_eq!(default_p_max([0.0, 0.0]), 1.0);
        assert_abs_diff_eq!(default_p_max([0.1, 0.123]), 0.13, epsilon = 1e-12);
        assert!(default_p_max([0.3]) >= 0.3);
        assert!(default_p_max([3.7e-5, 1.2e-5]) >= 3.7e-5);
        assert_eq!(default_p_max([0.995]), 1.0);
    }

    #[test]
    fn sequence_validates_states() {
        let spec = QuantizationSpec::uniform(1.0, 5, 1).unwrap();
        assert!(StateSequence::new(vec![1, 5, 3], spec).is_ok());
        assert!(StateSequence::new(vec![1, 6], spec).is_err());
        assert!(StateSequence::new(vec![0], spec).is_err());
    }

    proptest! {
        #[test]
        fn monotone(u in 0.0f64..=0.7, v in 0.0f64..=0.7, bins in 2usize..40) {
            let spec = QuantizationSpec::uniform(0.7, bins, 1).unwrap();
            let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
            prop_assert!(spec.quantize_value(&[lo]).unwrap() <= spec.quantize_value(&[hi]).unwrap());
        }

        #[test]
        fn value_lies_in_its_bin(v in 0.0f64..=1.0, bins in 2usize..64) {
            let spec = QuantizationSpec::uniform(1.0, bins, 1).unwrap();
            let i = spec.quantize_value(&[v]).unwrap();
            prop_assert!(i >= 1 && i <= bins);
            if v > 0.0 {
                prop_assert!(spec.edge(i - 1) < v && v <= spec.edge(i));
            }
        }

        #[test]
        fn length_preserved(xs in proptest::collection::vec(0.0f64..=1.0, 0..50)) {
            let spec = QuantizationSpec::uniform(1.0, 20, 1).unwrap();
            let series: Vec<[f64; 1]> = xs.iter().map(|&x| [x]).collect();
            prop_assert_eq!(spec.quantize_sequence(&series).unwrap().len(), xs.len());
        }
    }
}
