//! Panel ingestion: per-segment daily counts and populations, observed
//! proportions, and the response/predictor export for external modeling.
//!
//! File formats (UTF-8, comma separated, header row required):
//!
//! * counts: `date,segment_id,count` with ISO-8601 dates;
//! * populations: `segment_id,population`;
//! * predictors: `week,<column>...`, keyed by the week labels of the
//!   evolution matrices.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use chrono::NaiveDate;

use crate::evolution::EvolutionMatrices;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountRow {
    pub date: NaiveDate,
    pub segment_id: String,
    pub count: u64,
}

/// Validated counts, sorted by `(segment_id, date)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CountPanel {
    pub rows: Vec<CountRow>,
}

impl CountPanel {
    pub fn segments(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.segment_id.as_str()).collect()
    }
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != expected {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header {}, found {}", expected.join(","), header.join(",")),
        });
    }
    Ok(())
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r)
}

pub fn parse_date(s: &str, line: u64) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| Error::Parse { line, msg: format!("date {s:?}: {e}") })
}

pub fn load_counts<R: Read>(input: R) -> Result<CountPanel> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &["date", "segment_id", "count"])?;
    let mut seen: HashMap<(NaiveDate, String), u64> = HashMap::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(Error::Parse { line, msg: format!("expected 3 fields, found {}", rec.len()) });
        }
        let date = parse_date(&rec[0], line)?;
        let segment_id = rec[1].to_string();
        if segment_id.is_empty() {
            return Err(Error::Parse { line, msg: "empty segment_id".into() });
        }
        let count: i64 = rec[2].parse().map_err(|e| Error::Parse { line, msg: format!("count {:?}: {e}", &rec[2]) })?;
        if count < 0 {
            return Err(Error::Parse { line, msg: format!("negative count {count}") });
        }
        if let Some(first) = seen.insert((date, segment_id.clone()), line) {
            return Err(Error::Parse { line, msg: format!("duplicate ({date}, {segment_id}) also on line {first}") });
        }
        rows.push(CountRow { date, segment_id, count: count as u64 });
    }
    rows.sort_by(|a, b| a.segment_id.cmp(&b.segment_id).then(a.date.cmp(&b.date)));
    Ok(CountPanel { rows })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PopulationTable {
    pub sizes: BTreeMap<String, u64>,
}

pub fn load_populations<R: Read>(input: R) -> Result<PopulationTable> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &["segment_id", "population"])?;
    let mut sizes = BTreeMap::new();
    let mut lines = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(Error::Parse { line, msg: format!("expected 2 fields, found {}", rec.len()) });
        }
        let id = rec[0].to_string();
        let pop: i64 =
            rec[1].parse().map_err(|e| Error::Parse { line, msg: format!("population {:?}: {e}", &rec[1]) })?;
        if pop <= 0 {
            return Err(Error::Parse { line, msg: format!("population of {id} must be positive, got {pop}") });
        }
        if let Some(first) = lines.insert(id.clone(), line) {
            return Err(Error::Parse { line, msg: format!("duplicate segment {id} also on line {first}") });
        }
        sizes.insert(id, pop as u64);
    }
    Ok(PopulationTable { sizes })
}

/// Observed proportions `n / N` per segment, in date order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProportionSeries {
    pub series: BTreeMap<String, Vec<(NaiveDate, f64)>>,
}

impl ProportionSeries {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.series.values().flatten().map(|(_, p)| *p)
    }

    pub fn get(&self, segment: &str) -> Option<&[(NaiveDate, f64)]> {
        self.series.get(segment).map(|v| v.as_slice())
    }
}

/// How dates missing inside a segment's observed range are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gaps {
    /// Missing dates are left out; consecutive observations stay adjacent.
    #[default]
    Skip,
    /// Missing dates are inserted with a zero count.
    ZeroFill,
}

fn missing_segments<'a>(ids: impl Iterator<Item = &'a str>, pops: &PopulationTable) -> Result<()> {
    let missing: BTreeSet<String> = ids.filter(|id| !pops.sizes.contains_key(*id)).map(String::from).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingSegments(missing.into_iter().collect()))
    }
}

fn with_gaps(points: Vec<(NaiveDate, u64)>, gaps: Gaps) -> Vec<(NaiveDate, u64)> {
    match (gaps, points.first(), points.last()) {
        (Gaps::ZeroFill, Some(&(first, _)), Some(&(last, _))) => {
            let by_date: HashMap<NaiveDate, u64> = points.into_iter().collect();
            first.iter_days().take_while(|d| *d <= last).map(|d| (d, by_date.get(&d).copied().unwrap_or(0))).collect()
        }
        _ => points,
    }
}

fn checked_ratio(n: u64, pop: u64, what: &str, date: NaiveDate) -> Result<f64> {
    if n > pop {
        return Err(Error::domain(format!("{what} on {date}: count {n} exceeds population {pop}")));
    }
    Ok(n as f64 / pop as f64)
}

pub fn proportions(panel: &CountPanel, pops: &PopulationTable, gaps: Gaps) -> Result<ProportionSeries> {
    missing_segments(panel.rows.iter().map(|r| r.segment_id.as_str()), pops)?;
    let mut grouped: BTreeMap<String, Vec<(NaiveDate, u64)>> = BTreeMap::new();
    for r in &panel.rows {
        grouped.entry(r.segment_id.clone()).or_default().push((r.date, r.count));
    }
    let mut series = BTreeMap::new();
    for (id, points) in grouped {
        let pop = pops.sizes[&id];
        let props = with_gaps(points, gaps)
            .into_iter()
            .map(|(date, n)| Ok((date, checked_ratio(n, pop, &id, date)?)))
            .collect::<Result<Vec<_>>>()?;
        series.insert(id, props);
    }
    Ok(ProportionSeries { series })
}

/// One series for the whole panel: summed counts over the summed population
/// of the segments present in the panel.
pub fn pooled_proportions(panel: &CountPanel, pops: &PopulationTable, gaps: Gaps) -> Result<Vec<(NaiveDate, f64)>> {
    missing_segments(panel.rows.iter().map(|r| r.segment_id.as_str()), pops)?;
    let total_pop: u64 = panel.segments().iter().map(|id| pops.sizes[*id]).sum();
    let mut by_date: BTreeMap<NaiveDate, u64> = BTreeMap::new();
    for r in &panel.rows {
        *by_date.entry(r.date).or_default() += r.count;
    }
    with_gaps(by_date.into_iter().collect(), gaps)
        .into_iter()
        .map(|(date, n)| Ok((date, checked_ratio(n, total_pop, "pooled panel", date)?)))
        .collect()
}

/// Predictor columns keyed by week label, in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictorTable {
    /// Column names after `week`.
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<String>)>,
}

impl PredictorTable {
    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut rdr = reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
        if header.first().map(String::as_str) != Some("week") {
            return Err(Error::Parse { line: 1, msg: "predictor table must start with a week column".into() });
        }
        let mut rows = Vec::new();
        let mut seen = HashMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != header.len() {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} fields, found {}", header.len(), rec.len()),
                });
            }
            let week = rec[0].to_string();
            if let Some(first) = seen.insert(week.clone(), line) {
                return Err(Error::Parse { line, msg: format!("duplicate week {week} also on line {first}") });
            }
            rows.push((week, rec.iter().skip(1).map(String::from).collect()));
        }
        Ok(PredictorTable { columns: header[1..].to_vec(), rows })
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(std::iter::once("week").chain(self.columns.iter().map(String::as_str)))?;
        for (week, vals) in &self.rows {
            wtr.write_record(std::iter::once(week.as_str()).chain(vals.iter().map(String::as_str)))?;
        }
        wtr.flush()?;
        Ok(())
    }

    fn lookup(&self, week: &str) -> Option<&[String]> {
        self.rows.iter().find(|(w, _)| w == week).map(|(_, v)| v.as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delay(u8);

impl Delay {
    pub fn weeks(weeks: u8) -> Result<Self> {
        if weeks > 2 {
            return Err(Error::domain(format!("delay must be 0, 1 or 2 weeks, got {weeks}")));
        }
        Ok(Delay(weeks))
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseRow {
    pub week: String,
    pub z: f64,
    pub d: f64,
    pub predictors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseExport {
    pub columns: Vec<String>,
    pub rows: Vec<ResponseRow>,
    /// Response weeks with no predictor row at the requested delay.
    pub unmatched: Vec<String>,
}

impl ResponseExport {
    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let header = ["week", "Z", "D"].into_iter().map(String::from).chain(self.columns.iter().cloned());
        wtr.write_record(header)?;
        for r in &self.rows {
            let fixed = [r.week.clone(), r.z.to_string(), r.d.to_string()];
            wtr.write_record(fixed.iter().chain(&r.predictors))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Joins the consecutive-week responses with predictors.
///
/// Response `k` is the cell `(k + 1, k)` of the `z` and `d` matrices, labeled
/// with week `k + 1`. With a delay of `n` weeks it is paired with the
/// predictors of response week `k - n`; the first `n` responses and any week
/// missing from the predictor table are reported in `unmatched`.
pub fn export_response_table(
    matrices: &EvolutionMatrices,
    predictors: &PredictorTable,
    delay: Delay,
) -> Result<ResponseExport> {
    let n = matrices.size();
    if n < 2 {
        return Err(Error::domain("need at least two weeks of matrices"));
    }
    let weeks: Vec<&String> = matrices.labels.iter().skip(1).collect();
    let mut rows = Vec::new();
    let mut unmatched = Vec::new();
    for (k, week) in weeks.iter().enumerate() {
        let source = k.checked_sub(delay.get()).map(|s| weeks[s].as_str());
        match source.and_then(|w| predictors.lookup(w)) {
            Some(vals) => rows.push(ResponseRow {
                week: (*week).clone(),
                z: matrices.z[k + 1][k],
                d: matrices.d[k + 1][k],
                predictors: vals.to_vec(),
            }),
            None => unmatched.push((*week).clone()),
        }
    }
    Ok(ResponseExport { columns: predictors.columns.clone(), rows, unmatched })
}
