//! Command-line front end.
//!
//! Exit codes: 0 on completion (whatever the verdict), 2 on I/O, parse or
//! domain errors, 3 when no state could be tested.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::baselines::{ks_two_sample, wilcoxon_rank_sum};
use crate::closeness::{aggregate, closeness_analysis, Aggregation, ClosenessParams, SampleSizeMode};
use crate::clustering::{kmeans_rows, severity_name};
use crate::evolution::{
    pairwise_closeness, read_labeled_matrix, segment_by_calendar, segment_by_count, write_labeled_matrix,
    EvolutionMatrices, MatrixKind, Period, Segment,
};
use crate::ingest::{
    export_response_table, load_counts, load_populations, pooled_proportions, proportions, Delay, Gaps, PredictorTable,
};
use crate::quantizer::default_p_max;
use crate::simdata::{fixtures, generate_trajectory, perturbed_fixture, write_sequence_csv, Initial, TransitionMatrix};
use crate::streams::stream;
use crate::{Error, QuantizationSpec, Result, StateSequence};

pub const SCHEMA_VERSION: u32 = 1;
const DEFAULT_BINS: usize = 20;
const FIXTURE_BINS: usize = 5;

#[derive(Debug, Parser)]
#[command(name = "seqcloseness", version, about = "Closeness testing for sequential data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Test two sequences state by state.
    Closeness(ClosenessArgs),
    /// Pairwise closeness matrices over segments.
    Evolve(EvolveArgs),
    /// k-means over the rows of a labeled matrix.
    Cluster(ClusterArgs),
    /// Draw a trajectory from a transition matrix.
    Simulate(SimulateArgs),
    /// Wilcoxon rank-sum and Kolmogorov-Smirnov tests on state values.
    Baseline(BaselineArgs),
    /// Join consecutive-week responses with predictors.
    ExportResponse(ExportArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TestArgs {
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long = "C", default_value_t = 100.0)]
    pub c: f64,
    #[arg(long = "N", default_value_t = 5)]
    pub n: usize,
    /// Bins per dimension (default 5 for fixtures, 20 otherwise).
    #[arg(long = "B")]
    pub b: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub mu: u64,
    /// Dimension of value inputs (default: number of value columns).
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, env = "SEQCLOSENESS_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "mean")]
    pub agg: Aggregation,
    /// Upper quantization bound (default: observed maximum rounded up).
    #[arg(long)]
    pub pmax: Option<f64>,
    #[arg(long, default_value = "independent")]
    pub sample_mode: SampleSizeMode,
}

#[derive(Debug, Args, Serialize)]
pub struct ClosenessArgs {
    /// `fixture:qx|qy|qz[:alpha]`, or a CSV with a `state` column or `value*` columns.
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub y: String,
    #[command(flatten)]
    pub test: TestArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct EvolveArgs {
    /// CSV with `date` and `value*` (or `state`) columns; without `date`, use --segments.
    #[arg(long, conflicts_with_all = ["counts", "populations"])]
    pub series: Option<String>,
    #[arg(long, requires = "populations")]
    pub counts: Option<PathBuf>,
    #[arg(long, requires = "counts")]
    pub populations: Option<PathBuf>,
    /// Use this segment's series instead of the pooled panel.
    #[arg(long, requires = "counts", conflicts_with = "across_segments")]
    pub segment: Option<String>,
    /// Compare the segments of the panel with each other.
    #[arg(long, requires = "counts")]
    pub across_segments: bool,
    /// Date window `START:END` (inclusive) for --across-segments.
    #[arg(long, requires = "across_segments")]
    pub window: Option<String>,
    #[arg(long, default_value = "month")]
    pub period: Period,
    /// Cut an undated series into this many equal segments.
    #[arg(long)]
    pub segments: Option<usize>,
    /// Insert zero counts for missing dates.
    #[arg(long)]
    pub zero_fill: bool,
    /// Also write `(i, j)`/`(j, i)` averaged matrices.
    #[arg(long)]
    pub symmetrize: bool,
    #[command(flatten)]
    pub test: TestArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ClusterArgs {
    /// Labeled matrix CSV, as written by `evolve`.
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, env = "SEQCLOSENESS_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Transition matrix CSV (default: the fixture matrix).
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub length: usize,
    /// Initial state (default: uniform).
    #[arg(long)]
    pub initial: Option<usize>,
    #[arg(long, env = "SEQCLOSENESS_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write the fixture sequences and matrix instead of simulating.
    #[arg(long)]
    pub export_fixtures: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct BaselineArgs {
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub y: String,
    #[arg(long = "B")]
    pub b: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub pmax: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportArgs {
    /// Directory holding `z.csv` and `d.csv` from a weekly `evolve` run.
    #[arg(long)]
    pub matrices: PathBuf,
    #[arg(long)]
    pub predictors: PathBuf,
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=2))]
    pub delay: u8,
}

/// Parses `args` and runs; returns the process exit code.
pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(Error::Undetermined) => {
            eprintln!("seqcloseness: {}", Error::Undetermined);
            3
        }
        Err(e) => {
            eprintln!("seqcloseness: {e}");
            2
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    std::fs::create_dir_all(&cli.out_dir)?;
    let work = || match &cli.command {
        Command::Closeness(a) => cmd_closeness(cli, a),
        Command::Evolve(a) => cmd_evolve(cli, a),
        Command::Cluster(a) => cmd_cluster(cli, a),
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Baseline(a) => cmd_baseline(cli, a),
        Command::ExportResponse(a) => cmd_export(cli, a),
    };
    match cli.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::domain(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// The full run configuration, minus settings that cannot change results.
fn run_config(cli: &Cli, resolved: serde_json::Value) -> serde_json::Value {
    json!({ "command": &cli.command, "resolved": resolved })
}

fn create(cli: &Cli, name: &str, config: &serde_json::Value) -> Result<BufWriter<File>> {
    let mut w = BufWriter::new(File::create(cli.out_dir.join(name))?);
    writeln!(w, "# seqcloseness {} config={}", env!("CARGO_PKG_VERSION"), config)?;
    Ok(w)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

enum RawInput {
    Fixture(StateSequence),
    States { dates: Option<Vec<NaiveDate>>, states: Vec<usize> },
    Values { dates: Option<Vec<NaiveDate>>, rows: Vec<Vec<f64>> },
}

impl RawInput {
    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            RawInput::Values { rows, .. } => Box::new(rows.iter().flatten().copied()),
            _ => Box::new(std::iter::empty()),
        }
    }

    fn width(&self) -> Option<usize> {
        match self {
            RawInput::Values { rows, .. } => rows.first().map(Vec::len),
            _ => None,
        }
    }
}

fn read_input(source: &str) -> Result<RawInput> {
    if let Some(rest) = source.strip_prefix("fixture:") {
        let fx = fixtures();
        let mut parts = rest.splitn(2, ':');
        let seq = match (parts.next(), parts.next()) {
            (Some("qx"), None) => fx.qx,
            (Some("qy"), None) => fx.qy,
            (Some("qz"), None) => fx.qz,
            (Some("qz"), Some(alpha)) => {
                let alpha: f64 = alpha.parse().map_err(|e| Error::domain(format!("alpha {alpha:?}: {e}")))?;
                perturbed_fixture(alpha)?
            }
            _ => return Err(Error::domain(format!("unknown fixture {source:?}; use qx, qy, qz or qz:<alpha>"))),
        };
        return Ok(RawInput::Fixture(seq));
    }
    read_table(open(Path::new(source))?)
}

fn read_table<R: std::io::Read>(input: R) -> Result<RawInput> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let find = |name: &str| header.iter().position(|h| h == name);
    let value_cols: Vec<usize> = (0..header.len()).filter(|&i| header[i].starts_with("value")).collect();
    let date_col = find("date");
    let state_col = find("state");
    if state_col.is_none() && value_cols.is_empty() {
        return Err(Error::Parse { line: 1, msg: "expected a `state` column or `value` columns".into() });
    }
    let mut dates = Vec::new();
    let mut states = Vec::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::Parse { line, msg: "missing field".into() });
        if let Some(c) = date_col {
            dates.push(crate::ingest::parse_date(field(c)?, line)?);
        }
        if let Some(c) = state_col {
            let s = field(c)?;
            states.push(s.parse::<usize>().map_err(|e| Error::Parse { line, msg: format!("state {s:?}: {e}") })?);
        } else {
            let row = value_cols
                .iter()
                .map(|&c| {
                    let v = field(c)?;
                    v.parse::<f64>().map_err(|e| Error::Parse { line, msg: format!("value {v:?}: {e}") })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
    }
    let dates = date_col.map(|_| dates);
    if state_col.is_some() {
        return Ok(RawInput::States { dates, states });
    }
    Ok(RawInput::Values { dates, rows })
}

/// Chooses the common quantization for a set of inputs.
struct Resolved {
    spec: QuantizationSpec,
}

fn resolve_spec(inputs: &[&RawInput], b: Option<usize>, dim: Option<usize>, pmax: Option<f64>) -> Result<Resolved> {
    if let Some(fixture) = inputs.iter().find_map(|r| match r {
        RawInput::Fixture(s) => Some(*s.spec()),
        _ => None,
    }) {
        if inputs.iter().any(|r| !matches!(r, RawInput::Fixture(_))) {
            return Err(Error::domain("fixtures can only be compared with fixtures"));
        }
        if b.is_some_and(|b| b != FIXTURE_BINS) || dim.is_some_and(|d| d != 1) {
            return Err(Error::domain(format!("fixtures have B = {FIXTURE_BINS} and d = 1")));
        }
        return Ok(Resolved { spec: fixture });
    }
    let bins = b.unwrap_or(DEFAULT_BINS);
    let widths: Vec<usize> = inputs.iter().filter_map(|r| r.width()).collect();
    if widths.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::domain("inputs have different numbers of value columns"));
    }
    let d = match (dim, widths.first()) {
        (Some(d), Some(&w)) if d != w => {
            return Err(Error::domain(format!("--dim {d} does not match {w} value columns")));
        }
        (Some(d), _) => d,
        (None, Some(&w)) => w,
        (None, None) => 1,
    };
    let p_max = pmax.unwrap_or_else(|| default_p_max(inputs.iter().flat_map(|r| r.values())));
    Ok(Resolved { spec: QuantizationSpec::uniform(p_max, bins, d)? })
}

fn to_sequence(raw: RawInput, spec: QuantizationSpec) -> Result<StateSequence> {
    match raw {
        RawInput::Fixture(s) => Ok(s),
        RawInput::States { states, .. } => StateSequence::new(states, spec),
        RawInput::Values { rows, .. } => spec.quantize_sequence(&rows),
    }
}

fn params_of(t: &TestArgs, states: usize) -> Result<ClosenessParams> {
    Ok(ClosenessParams::new(t.epsilon, t.c, t.n, states)?
        .with_seed(t.seed)
        .with_min_transitions(t.mu)
        .with_sample_mode(t.sample_mode))
}

fn spec_json(spec: &QuantizationSpec) -> serde_json::Value {
    json!({ "p_max": spec.p_max(), "B": spec.bins(), "dim": spec.dim(), "states": spec.state_count() })
}

fn cmd_closeness(cli: &Cli, a: &ClosenessArgs) -> Result<()> {
    let (rx, ry) = (read_input(&a.x)?, read_input(&a.y)?);
    let r = resolve_spec(&[&rx, &ry], a.test.b, a.test.dim, a.test.pmax)?;
    let (x, y) = (to_sequence(rx, r.spec)?, to_sequence(ry, r.spec)?);
    let params = params_of(&a.test, r.spec.state_count())?;
    let result = closeness_analysis(&x, &y, &params)?;
    let config = run_config(cli, spec_json(&r.spec));

    let mut w = create(cli, "closeness_states.csv", &config)?;
    writeln!(w, "state,accept_prob,reject_prob,z,d,tested")?;
    for (b, s) in result.per_state.iter().enumerate() {
        writeln!(w, "{},{},{},{},{},{}", b + 1, s.accept_prob, s.reject_prob, s.z_mean, s.d_mean, !s.sentinel)?;
    }
    w.flush()?;

    let summary = aggregate(&result, a.test.agg)?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "summary": summary,
        "threshold": params.threshold(),
        "sample_size": params.sample_size(),
    });
    let text = serde_json::to_string_pretty(&doc)?;
    std::fs::write(cli.out_dir.join("closeness_summary.json"), format!("{text}\n"))?;
    println!("{text}");
    Ok(())
}

fn parse_window(s: &str) -> Result<(NaiveDate, NaiveDate)> {
    let (a, b) = s.split_once(':').ok_or_else(|| Error::domain(format!("window {s:?} must be START:END")))?;
    let (a, b) = (crate::ingest::parse_date(a, 0)?, crate::ingest::parse_date(b, 0)?);
    if b < a {
        return Err(Error::domain(format!("window {s:?} ends before it starts")));
    }
    Ok((a, b))
}

fn dated_segments(dates: &[NaiveDate], seq: &StateSequence, period: Period) -> Result<Vec<Segment>> {
    let dated: Vec<(NaiveDate, usize)> = dates.iter().copied().zip(seq.states().iter().copied()).collect();
    segment_by_calendar(&dated, period)?
        .into_iter()
        .map(|g| Ok(Segment { label: g.label, seq: StateSequence::new(g.items, *seq.spec())? }))
        .collect()
}

fn evolve_segments(a: &EvolveArgs) -> Result<(Vec<Segment>, QuantizationSpec)> {
    let t = &a.test;
    if let Some(src) = &a.series {
        let raw = read_input(src)?;
        let r = resolve_spec(&[&raw], t.b, t.dim, t.pmax)?;
        let dates = match &raw {
            RawInput::Values { dates, .. } | RawInput::States { dates, .. } => dates.clone(),
            RawInput::Fixture(_) => None,
        };
        let seq = to_sequence(raw, r.spec)?;
        let segments = match (dates, a.segments) {
            (Some(dates), None) => dated_segments(&dates, &seq, a.period)?,
            (_, Some(l)) => segment_by_count(&seq, l)?
                .into_iter()
                .enumerate()
                .map(|(i, s)| Segment { label: (i + 1).to_string(), seq: s })
                .collect(),
            (None, None) => return Err(Error::domain("undated series needs --segments")),
        };
        return Ok((segments, r.spec));
    }
    let (Some(counts), Some(pops)) = (&a.counts, &a.populations) else {
        return Err(Error::domain("evolve needs --series or --counts with --populations"));
    };
    let panel = load_counts(open(counts)?)?;
    let pops = load_populations(open(pops)?)?;
    let gaps = if a.zero_fill { Gaps::ZeroFill } else { Gaps::Skip };
    let bins = t.b.unwrap_or(DEFAULT_BINS);
    if t.dim.is_some_and(|d| d != 1) {
        return Err(Error::domain("panel proportions are one-dimensional"));
    }

    if a.across_segments {
        let all = proportions(&panel, &pops, gaps)?;
        let window = a.window.as_deref().map(parse_window).transpose()?;
        let inside = |d: &NaiveDate| window.is_none_or(|(lo, hi)| (lo..=hi).contains(d));
        let p_max = t.pmax.unwrap_or_else(|| {
            default_p_max(all.series.values().flatten().filter(|(d, _)| inside(d)).map(|(_, p)| *p))
        });
        let spec = QuantizationSpec::uniform(p_max, bins, 1)?;
        let segments = all
            .series
            .iter()
            .map(|(id, points)| {
                let vals: Vec<[f64; 1]> = points.iter().filter(|(d, _)| inside(d)).map(|(_, p)| [*p]).collect();
                if vals.is_empty() {
                    return Err(Error::domain(format!("segment {id} has no observations in the window")));
                }
                Ok(Segment { label: id.clone(), seq: spec.quantize_sequence(&vals)? })
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok((segments, spec));
    }

    let series = match &a.segment {
        Some(id) => proportions(&panel, &pops, gaps)?
            .get(id)
            .ok_or_else(|| Error::domain(format!("segment {id} not in the panel")))?
            .to_vec(),
        None => pooled_proportions(&panel, &pops, gaps)?,
    };
    let p_max = t.pmax.unwrap_or_else(|| default_p_max(series.iter().map(|(_, p)| *p)));
    let spec = QuantizationSpec::uniform(p_max, bins, 1)?;
    let vals: Vec<[f64; 1]> = series.iter().map(|(_, p)| [*p]).collect();
    let seq = spec.quantize_sequence(&vals)?;
    let dates: Vec<NaiveDate> = series.iter().map(|(d, _)| *d).collect();
    Ok((dated_segments(&dates, &seq, a.period)?, spec))
}

fn cmd_evolve(cli: &Cli, a: &EvolveArgs) -> Result<()> {
    let (segments, spec) = evolve_segments(a)?;
    let params = params_of(&a.test, spec.state_count())?;
    let m = pairwise_closeness(&segments, &params, a.test.agg)?;
    let config = run_config(cli, json!({ "spec": spec_json(&spec), "segments": segments.len() }));
    for kind in MatrixKind::ALL {
        let mut w = create(cli, &format!("{}.csv", kind.file_stem()), &config)?;
        m.write_csv(kind, &mut w)?;
        w.flush()?;
        if a.symmetrize {
            let mut w = create(cli, &format!("{}_sym.csv", kind.file_stem()), &config)?;
            write_labeled_matrix(&m.labels, &m.symmetrized(kind), &mut w)?;
            w.flush()?;
        }
    }
    for warn in &m.warnings {
        eprintln!("warning: cell ({}, {}) left at -1: {}", m.labels[warn.row], m.labels[warn.col], warn.message);
    }
    eprintln!("wrote {0}x{0} matrices to {1}", m.size(), cli.out_dir.display());
    Ok(())
}

fn cmd_cluster(cli: &Cli, a: &ClusterArgs) -> Result<()> {
    let (labels, matrix) = read_labeled_matrix(open(&a.matrix)?)?;
    if labels.is_empty() {
        return Err(Error::domain("matrix has no rows"));
    }
    let fit = kmeans_rows(&matrix, a.k, a.seed, a.max_iter)?;
    let config = run_config(cli, json!({ "inertia": fit.inertia() }));
    let mut w = create(cli, "labels.csv", &config)?;
    writeln!(w, "label,cluster,severity")?;
    for (i, label) in labels.iter().enumerate() {
        writeln!(w, "{label},{},{}", fit.labels[i], severity_name(fit.severity(i), a.k))?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let config = run_config(cli, json!({}));
    if a.export_fixtures {
        let fx = fixtures();
        for (name, seq) in [("qx", &fx.qx), ("qy", &fx.qy), ("qz", &fx.qz)] {
            let mut w = create(cli, &format!("{name}.csv"), &config)?;
            write_sequence_csv(seq, &mut w)?;
            w.flush()?;
        }
        let mut w = create(cli, "matrix.csv", &config)?;
        fx.matrix.write_csv(&mut w)?;
        return Ok(w.flush()?);
    }
    let matrix = match &a.matrix {
        Some(p) => TransitionMatrix::read_csv(open(p)?)?,
        None => fixtures().matrix,
    };
    let initial = a.initial.map_or(Initial::Uniform, Initial::State);
    let seq = generate_trajectory(&matrix, a.length, &initial, &mut stream(a.seed, 0))?;
    let mut w = create(cli, "trajectory.csv", &config)?;
    write_sequence_csv(&seq, &mut w)?;
    Ok(w.flush()?)
}

fn cmd_baseline(cli: &Cli, a: &BaselineArgs) -> Result<()> {
    let (rx, ry) = (read_input(&a.x)?, read_input(&a.y)?);
    let r = resolve_spec(&[&rx, &ry], a.b, a.dim, a.pmax)?;
    let (x, y) = (to_sequence(rx, r.spec)?, to_sequence(ry, r.spec)?);
    let xs: Vec<f64> = x.states().iter().map(|&s| s as f64).collect();
    let ys: Vec<f64> = y.states().iter().map(|&s| s as f64).collect();
    let config = run_config(cli, spec_json(&r.spec));
    let mut w = create(cli, "baseline.csv", &config)?;
    writeln!(w, "method,statistic,p_value")?;
    for report in [wilcoxon_rank_sum(&xs, &ys)?, ks_two_sample(&xs, &ys)?] {
        writeln!(w, "{},{},{}", report.method, report.statistic, report.p_value)?;
        println!("{}: statistic {:.6}, p {:.6}", report.method, report.statistic, report.p_value);
    }
    Ok(w.flush()?)
}

fn cmd_export(cli: &Cli, a: &ExportArgs) -> Result<()> {
    let (labels, z) = read_labeled_matrix(open(&a.matrices.join("z.csv"))?)?;
    let (d_labels, d) = read_labeled_matrix(open(&a.matrices.join("d.csv"))?)?;
    if labels != d_labels {
        return Err(Error::domain("z.csv and d.csv have different labels"));
    }
    let unused = vec![vec![0.0; labels.len()]; labels.len()];
    let m = EvolutionMatrices { labels, accept: unused.clone(), reject: unused, z, d, warnings: vec![] };
    let predictors = PredictorTable::read(open(&a.predictors)?)?;
    let export = export_response_table(&m, &predictors, Delay::weeks(a.delay)?)?;
    let config = run_config(cli, json!({ "rows": export.rows.len() }));
    let mut w = create(cli, "response.csv", &config)?;
    export.write(&mut w)?;
    w.flush()?;
    if !export.unmatched.is_empty() {
        eprintln!("unmatched response weeks: {}", export.unmatched.join(", "));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cli = Cli::try_parse_from(["seqcloseness", "closeness", "--x", "fixture:qx", "--y", "fixture:qy"]).unwrap();
        let Command::Closeness(a) = cli.command else { panic!() };
        assert_eq!((a.test.epsilon, a.test.c, a.test.n, a.test.mu), (0.1, 100.0, 5, 1));
        assert_eq!(a.test.agg, Aggregation::Mean);
        assert_eq!(a.test.b, None);
        assert_eq!(cli.out_dir, PathBuf::from("."));
    }

    #[test]
    fn delay_is_bounded() {
        let base = ["seqcloseness", "export-response", "--matrices", ".", "--predictors", "p.csv", "--delay"];
        assert!(Cli::try_parse_from(base.iter().chain(&["2"])).is_ok());
        assert!(Cli::try_parse_from(base.iter().chain(&["3"])).is_err());
    }

    #[test]
    fn fixture_inputs() {
        let r = read_input("fixture:qz:5").unwrap();
        let RawInput::Fixture(s) = &r else { panic!() };
        assert_eq!(s, &fixtures().qz);
        assert!(read_input("fixture:qq").is_err());
        let spec = resolve_spec(&[&r], None, None, None).unwrap().spec;
        assert_eq!(spec.state_count(), 5);
        assert!(resolve_spec(&[&r], Some(20), None, None).is_err());
    }

    #[test]
    fn value_tables() {
        let t = read_table("# note\ndate,value1,value2\n2020-04-01,0.1,0.2\n2020-04-02,0.3,0.05\n".as_bytes()).unwrap();
        let r = resolve_spec(&[&t], Some(4), None, None).unwrap();
        assert_eq!((r.spec.dim(), r.spec.state_count()), (2, 16));
        assert!((r.spec.p_max() - 0.3).abs() < 1e-12);
        assert!(resolve_spec(&[&t], Some(4), Some(1), None).is_err());
        let seq = to_sequence(t, r.spec).unwrap();
        assert_eq!(seq.len(), 2);

        let s = read_table("state\n1\n3\n2\n".as_bytes()).unwrap();
        let r = resolve_spec(&[&s], Some(3), None, None).unwrap();
        assert_eq!(to_sequence(s, r.spec).unwrap().states(), &[1, 3, 2]);
        assert!(read_table("foo\n1\n".as_bytes()).is_err());
    }

    #[test]
    fn dated_states() {
        let t = read_table("date,state\n2020-04-01,2\n2020-04-02,5\n".as_bytes()).unwrap();
        let r = resolve_spec(&[&t], Some(5), None, None).unwrap();
        assert_eq!(to_sequence(t, r.spec).unwrap().states(), &[2, 5]);
    }
}
