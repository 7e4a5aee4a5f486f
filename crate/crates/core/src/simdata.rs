//! Simulation assets: the embedded five-state fixtures, trajectory
//! generation from a transition matrix, and tail perturbation.

use std::io::Write;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;

use crate::quantizer::{QuantizationSpec, StateSequence};
use crate::{Error, Result};

const ROW_TOLERANCE: f64 = 1e-9;

/// A row-stochastic matrix; `row(i)[j]` is the probability of `i+1 -> j+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    rows: Vec<Vec<f64>>,
    correction: f64,
}

impl TransitionMatrix {
    /// Strict constructor: rows must already sum to 1 within 1e-9.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::validated(rows, ROW_TOLERANCE, false)
    }

    /// Accepts rows whose sums are within `tolerance` of 1 and rescales them.
    /// The largest absolute deviation removed is kept in [`Self::correction`].
    pub fn renormalized(rows: Vec<Vec<f64>>, tolerance: f64) -> Result<Self> {
        Self::validated(rows, tolerance, true)
    }

    fn validated(mut rows: Vec<Vec<f64>>, tolerance: f64, rescale: bool) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::domain("transition matrix needs at least 2 states"));
        }
        let mut correction: f64 = 0.0;
        for (i, row) in rows.iter_mut().enumerate() {
            if row.len() != n {
                return Err(Error::domain(format!("row {} has {} entries, expected {n}", i + 1, row.len())));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::domain(format!("row {} has entries outside [0, 1]", i + 1)));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tolerance {
                return Err(Error::domain(format!("row {} sums to {sum}", i + 1)));
            }
            correction = correction.max((sum - 1.0).abs());
            if rescale {
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
        Ok(TransitionMatrix { rows, correction })
    }

    pub fn states(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn correction(&self) -> f64 {
        self.correction
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr =
            csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let row = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Parse { line, msg: format!("{f:?}: {e}") }))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        // printed matrices are only accurate to their last digit
        Self::renormalized(rows, 1e-6)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Where a trajectory starts.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Initial {
    #[default]
    Uniform,
    State(usize),
    Distribution(Vec<f64>),
}

fn nominal_spec(states: usize) -> Result<QuantizationSpec> {
    QuantizationSpec::uniform(1.0, states, 1)
}

pub fn generate_trajectory<R: Rng + ?Sized>(
    matrix: &TransitionMatrix,
    length: usize,
    initial: &Initial,
    rng: &mut R,
) -> Result<StateSequence> {
    if length < 1 {
        return Err(Error::domain("trajectory length must be at least 1"));
    }
    let n = matrix.states();
    let first = match initial {
        Initial::Uniform => rng.random_range(0..n),
        Initial::State(s) => {
            if *s < 1 || *s > n {
                return Err(Error::domain(format!("initial state {s} outside 1..={n}")));
            }
            s - 1
        }
        Initial::Distribution(p) => {
            if p.len() != n {
                return Err(Error::LengthMismatch { left: p.len(), right: n });
            }
            WeightedIndex::new(p).map_err(|e| Error::domain(format!("initial distribution: {e}")))?.sample(rng)
        }
    };
    let samplers = matrix
        .rows()
        .iter()
        .map(|r| WeightedIndex::new(r).map_err(|e| Error::domain(format!("transition row: {e}"))))
        .collect::<Result<Vec<_>>>()?;

    let mut states = Vec::with_capacity(length);
    let mut cur = first;
    states.push(cur + 1);
    for _ in 1..length {
        cur = samplers[cur].sample(rng);
        states.push(cur + 1);
    }
    StateSequence::new(states, nominal_spec(n)?)
}

/// Replaces the last `round(alpha · len / 100)` entries with `replacement`.
pub fn perturb_tail(seq: &StateSequence, alpha: f64, replacement: usize) -> Result<StateSequence> {
    if !(0.0..=100.0).contains(&alpha) {
        return Err(Error::domain(format!("alpha must lie in [0, 100], got {alpha}")));
    }
    let n = seq.state_count();
    if replacement < 1 || replacement > n {
        return Err(Error::domain(format!("replacement state {replacement} outside 1..={n}")));
    }
    let len = seq.len();
    let k = ((alpha * len as f64 / 100.0).round() as usize).min(len);
    let mut states = seq.states().to_vec();
    states[len - k..].iter_mut().for_each(|s| *s = replacement);
    StateSequence::new(states, *seq.spec())
}

const QX: [u8; 100] = [
    1, 4, 1, 2, 2, 5, 1, 2, 2, 5, 5, 5, 1, 2, 5, 5, 3, 3, 4, 5, 4, 2, 4, 4, 5, 3, 4, 4, 5, 5, 5, 5, 4, 3, 2, 2,
    5, //
    1, 4, 3, 2, 4, 5, 3, 5, 5, 1, 5, 2, 3, 5, 3, 2, 4, 1, 2, 4, 4, 5, 5, 1, 2, 2, 1, 2, 2, 1, 5, 5, 3, 5, 3, 5,
    1, //
    2, 4, 5, 3, 4, 4, 4, 5, 4, 3, 1, 4, 5, 4, 5, 4, 3, 2, 1, 3, 2, 3, 5, 1, 3, 4,
];

const QY: [u8; 100] = [
    1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 3, 3, 3,
    3, //
    3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 5, 5,
    5, //
    5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5,
];

const QZ: [u8; 100] = [
    1, 4, 1, 2, 2, 5, 1, 2, 2, 5, 5, 5, 1, 2, 5, 5, 3, 3, 4, 5, 4, 2, 4, 4, 5, 3, 4, 4, 5, 5, 5, 5, 4, 3, 2, 2,
    5, //
    1, 4, 3, 2, 4, 5, 3, 5, 5, 1, 5, 2, 3, 5, 3, 2, 4, 1, 2, 4, 4, 5, 5, 1, 2, 2, 1, 2, 2, 1, 5, 5, 3, 5, 3, 5,
    1, //
    2, 4, 5, 3, 4, 4, 4, 5, 4, 3, 1, 4, 5, 4, 5, 4, 3, 2, 1, 3, 2, 2, 2, 2, 2, 2,
];

const MATRIX: [[f64; 5]; 5] = [
    [0.02126912, 0.40209113, 0.3423650, 0.1571781, 0.07709659],
    [0.19377434, 0.19871080, 0.1079850, 0.1904423, 0.30908763],
    [0.16414480, 0.33028736, 0.0176185, 0.3189076, 0.16904172],
    [0.04017933, 0.03392901, 0.2268634, 0.2755908, 0.42343754],
    [0.24338862, 0.09483701, 0.2326078, 0.1308475, 0.29831911],
];

/// Replacement state used to build the perturbed fixture.
pub const QZ_REPLACEMENT: usize = 2;

/// The printed five-state simulation data.
#[derive(Debug, Clone)]
pub struct Fixtures {
    /// Markov trajectory drawn from `matrix`.
    pub qx: StateSequence,
    /// The states of `qx` sorted ascending; no Markov structure.
    pub qy: StateSequence,
    /// `qx` with its last 5% replaced by state 2.
    pub qz: StateSequence,
    pub matrix: TransitionMatrix,
    /// The matrix exactly as printed, before renormalization.
    pub printed_matrix: [[f64; 5]; 5],
}

fn fixture_seq(states: &[u8]) -> StateSequence {
    StateSequence::new(states.iter().map(|&s| s as usize).collect(), nominal_spec(5).expect("valid spec"))
        .expect("fixture states are in 1..=5")
}

pub fn fixtures() -> Fixtures {
    Fixtures {
        qx: fixture_seq(&QX),
        qy: fixture_seq(&QY),
        qz: fixture_seq(&QZ),
        matrix: TransitionMatrix::renormalized(MATRIX.iter().map(|r| r.to_vec()).collect(), 1e-6)
            .expect("printed matrix is stochastic to print precision"),
        printed_matrix: MATRIX,
    }
}

/// `qx` perturbed at `alpha` percent with the fixture replacement state.
pub fn perturbed_fixture(alpha: f64) -> Result<StateSequence> {
    perturb_tail(&fixture_seq(&QX), alpha, QZ_REPLACEMENT)
}

pub fn write_sequence_csv<W: Write>(seq: &StateSequence, mut w: W) -> Result<()> {
    writeln!(w, "state")?;
    for s in seq.states() {
        writeln!(w, "{s}")?;
    }
    Ok(())
}
