//! Segment-pair evolution matrices.
//!
//! A sequence is split into `L` segments (by count or by calendar period) and
//! every ordered pair of distinct segments is run through the closeness
//! analysis. The aggregated acceptance, rejection, χ²-type statistic and TV
//! distance land in four `L x L` matrices.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closeness::{aggregate, closeness_analysis, Aggregation, ClosenessParams, ClosenessSummary, SENTINEL};
use crate::quantizer::StateSequence;
use crate::streams::cell_seed;
use crate::{Error, Result};

/// Splits into `l` contiguous pieces; the first `l - 1` have `len / l`
/// entries and the last takes the remainder.
pub fn segment_by_count(seq: &StateSequence, l: usize) -> Result<Vec<StateSequence>> {
    if l < 1 {
        return Err(Error::domain("need at least one segment"));
    }
    if l > seq.len() {
        return Err(Error::domain(format!("cannot cut {} observations into {l} segments", seq.len())));
    }
    let width = seq.len() / l;
    Ok((0..l)
        .map(|i| {
            let end = if i + 1 == l { seq.len() } else { (i + 1) * width };
            seq.slice(i * width..end)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Period {
    /// Consecutive 7-day blocks anchored at the first observation. A trailing
    /// block that does not span 7 calendar days is dropped.
    Week,
    /// Calendar months; partial first and last months are kept.
    Month,
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Period::Week => "week",
            Period::Month => "month",
        })
    }
}

impl FromStr for Period {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "week" => Ok(Period::Week),
            "month" => Ok(Period::Month),
            _ => Err(Error::domain(format!("unknown period {s:?}"))),
        }
    }
}

/// A group of observations sharing a period label.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeled<T> {
    pub label: String,
    pub items: Vec<T>,
}

/// Groups dated observations by period, preserving order. Weeks are labeled
/// by their start date (`2020-04-01`), months as `2020-04`.
pub fn segment_by_calendar<T: Clone>(series: &[(NaiveDate, T)], period: Period) -> Result<Vec<Labeled<T>>> {
    let first = series.first().ok_or_else(|| Error::domain("no observations to segment"))?.0;
    if series.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(Error::domain("observations must be in date order"));
    }
    let last = series.last().map(|s| s.0).unwrap_or(first);

    let mut out: Vec<Labeled<T>> = Vec::new();
    let mut current_key = None;
    for (date, item) in series {
        let (key, label) = match period {
            Period::Week => {
                let block = (*date - first).num_days() / 7;
                let start = first + chrono::Duration::days(block * 7);
                if start + chrono::Duration::days(6) > last {
                    break;
                }
                (block, start.format("%Y-%m-%d").to_string())
            }
            Period::Month => {
                let key = date.year() as i64 * 12 + date.month0() as i64;
                (key, format!("{:04}-{:02}", date.year(), date.month()))
            }
        };
        if current_key != Some(key) {
            current_key = Some(key);
            out.push(Labeled { label, items: Vec::new() });
        }
        out.last_mut().expect("pushed above").items.push(item.clone());
    }
    if out.is_empty() {
        return Err(Error::domain("observations do not cover one complete period"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub label: String,
    pub seq: StateSequence,
}

/// A cell that could not be computed and holds the sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct CellWarning {
    pub row: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Accept,
    Reject,
    Z,
    D,
}

impl MatrixKind {
    pub const ALL: [MatrixKind; 4] = [MatrixKind::Accept, MatrixKind::Reject, MatrixKind::Z, MatrixKind::D];

    pub fn file_stem(self) -> &'static str {
        match self {
            MatrixKind::Accept => "accept",
            MatrixKind::Reject => "reject",
            MatrixKind::Z => "z",
            MatrixKind::D => "d",
        }
    }

    fn ideal_self_value(self) -> f64 {
        match self {
            MatrixKind::Accept => 1.0,
            _ => 0.0,
        }
    }
}

pub type Matrix = Vec<Vec<f64>>;

/// Cell `(i, j)` compares segment `i` (as `x`) with segment `j` (as `y`). The
/// diagonal holds the ideal self values (accept 1, others 0) and is never
/// computed.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionMatrices {
    pub labels: Vec<String>,
    pub accept: Matrix,
    pub reject: Matrix,
    pub z: Matrix,
    pub d: Matrix,
    pub warnings: Vec<CellWarning>,
}

impl EvolutionMatrices {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, kind: MatrixKind) -> &Matrix {
        match kind {
            MatrixKind::Accept => &self.accept,
            MatrixKind::Reject => &self.reject,
            MatrixKind::Z => &self.z,
            MatrixKind::D => &self.d,
        }
    }

    /// Diagonal cells are filled by convention, not computed.
    pub fn is_conventional(&self, i: usize, j: usize) -> bool {
        i == j
    }

    /// Averages `(i, j)` and `(j, i)`. A sentinel side defers to the other.
    pub fn symmetrized(&self, kind: MatrixKind) -> Matrix {
        let m = self.get(kind);
        let n = m.len();
        let mut out = m.clone();
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (m[i][j], m[j][i]);
                out[i][j] = match (a == SENTINEL, b == SENTINEL) {
                    (true, true) => SENTINEL,
                    (true, false) => b,
                    (false, true) => a,
                    (false, false) => 0.5 * (a + b),
                };
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, kind: MatrixKind, w: W) -> Result<()> {
        write_labeled_matrix(&self.labels, self.get(kind), w)
    }
}

pub fn write_labeled_matrix<W: Write>(labels: &[String], m: &Matrix, mut w: W) -> Result<()> {
    writeln!(w, "label,{}", labels.join(","))?;
    for (label, row) in labels.iter().zip(m) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{label},{}", cells.join(","))?;
    }
    Ok(())
}

/// Reads the format written by [`write_labeled_matrix`]; lines starting with
/// `#` are skipped. Returns the row labels and the matrix.
pub fn read_labeled_matrix<R: BufRead>(reader: R) -> Result<(Vec<String>, Matrix)> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let width = rdr.headers()?.len().saturating_sub(1);
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width + 1 {
            return Err(Error::Parse { line, msg: format!("expected {} fields, found {}", width + 1, rec.len()) });
        }
        labels.push(rec[0].to_string());
        let row = rec
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>().map_err(|e| Error::Parse { line, msg: format!("{f:?}: {e}") }))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((labels, rows))
}

fn summary_or_warning(
    x: &StateSequence,
    y: &StateSequence,
    params: &ClosenessParams,
    agg: Aggregation,
) -> std::result::Result<ClosenessSummary, String> {
    closeness_analysis(x, y, params).and_then(|r| aggregate(&r, agg)).map_err(|e| e.to_string())
}

/// Runs every off-diagonal cell in parallel. Cell `(i, j)` uses the seed
/// `cell_seed(params.seed, i, j)`, so results do not depend on the worker
/// count. Failing cells hold the sentinel and are listed in `warnings`.
pub fn pairwise_closeness(
    segments: &[Segment],
    params: &ClosenessParams,
    agg: Aggregation,
) -> Result<EvolutionMatrices> {
    let n = segments.len();
    if n < 2 {
        return Err(Error::domain(format!("need at least 2 segments, got {n}")));
    }
    params.validate()?;

    let cells: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    let results: Vec<_> = cells
        .par_iter()
        .map(|&(i, j)| {
            let cell_params = ClosenessParams { seed: cell_seed(params.seed, i, j), ..params.clone() };
            summary_or_warning(&segments[i].seq, &segments[j].seq, &cell_params, agg)
        })
        .collect();

    let filled = |kind: MatrixKind| -> Matrix {
        (0..n).map(|i| (0..n).map(|j| if i == j { kind.ideal_self_value() } else { SENTINEL }).collect()).collect()
    };
    let mut out = EvolutionMatrices {
        labels: segments.iter().map(|s| s.label.clone()).collect(),
        accept: filled(MatrixKind::Accept),
        reject: filled(MatrixKind::Reject),
        z: filled(MatrixKind::Z),
        d: filled(MatrixKind::D),
        warnings: Vec::new(),
    };
    for (&(i, j), r) in cells.iter().zip(results) {
        match r {
            Ok(s) => {
                out.accept[i][j] = s.accept_prob;
                out.reject[i][j] = s.reject_prob;
                out.z[i][j] = s.z;
                out.d[i][j] = s.d;
            }
            Err(message) => out.warnings.push(CellWarning { row: i, col: j, message }),
        }
    }
    Ok(out)
}
