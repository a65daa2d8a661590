//! Repeated seeded experiments, box-plot statistics with 1.5×IQR outlier
//! flagging, solver comparison through the investment ratio, and export.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bnb::{self, BnbConfig};
use crate::error::{usage, Error, Result};
use crate::metrics::{
    investment_ratio, quality_ratio, write_front_csv, MetricsReport, ReferenceFront, SNAP_EPSILON,
};
use crate::nsga2::{run_nsga2, Nsga2Config};
use crate::oracle::OracleConfig;
use crate::pareto::{ObjectiveVector, ParetoArchive};
use crate::problems::{by_name, ProblemSpec};

pub const DEFAULT_REPETITIONS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Nsga2,
    Bnb,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Nsga2 => "nsga2",
            SolverKind::Bnb => "bnb",
        })
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nsga2" => Ok(SolverKind::Nsga2),
            "bnb" => Ok(SolverKind::Bnb),
            other => Err(Error::Parse(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "lowercase")]
pub enum SolverConfig {
    Nsga2(Nsga2Config),
    Bnb(BnbConfig),
}

impl SolverConfig {
    pub fn kind(&self) -> SolverKind {
        match self {
            SolverConfig::Nsga2(_) => SolverKind::Nsga2,
            SolverConfig::Bnb(_) => SolverKind::Bnb,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SolverConfig::Nsga2(c) => c.validate(),
            SolverConfig::Bnb(c) => c.validate(),
        }
    }

    /// Runs the solver once with `seed` and returns its archive.
    pub fn solve(&self, problem: &ProblemSpec, seed: u64) -> Result<ParetoArchive> {
        match self {
            SolverConfig::Nsga2(c) => {
                Ok(run_nsga2(problem, None, &c.clone().with_seed(seed))?.archive)
            }
            SolverConfig::Bnb(c) => Ok(bnb::solve(problem, &c.clone().with_seed(seed))?.archive),
        }
    }
}

/// One parameter combination of one solver on one problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: String,
    pub id: u32,
    pub repetitions: usize,
    pub base_seed: u64,
    pub solver: SolverConfig,
    /// `None`: [`OracleConfig::for_problem`].
    pub oracle: Option<OracleConfig>,
    /// Record wall-clock milliseconds; off keeps `runs.csv` reproducible.
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    pub fn new(problem: impl Into<String>, id: u32, solver: SolverConfig) -> Self {
        Self {
            problem: problem.into(),
            id,
            repetitions: DEFAULT_REPETITIONS,
            base_seed: 0,
            solver,
            oracle: None,
            record_wall_time: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return usage("repetitions must be at least 1");
        }
        by_name(&self.problem)?;
        self.solver.validate()
    }

    pub fn oracle_config(&self, problem: &ProblemSpec) -> OracleConfig {
        self.oracle
            .clone()
            .unwrap_or_else(|| OracleConfig::for_problem(problem))
    }
}

fn default_repetitions() -> usize {
    DEFAULT_REPETITIONS
}

/// A parameter sweep as read from a config file: shared settings plus a
/// list of combinations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub problem: String,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(rename = "combination")]
    pub combinations: Vec<Combination>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Combination {
    pub id: u32,
    #[serde(flatten)]
    pub solver: SolverConfig,
}

impl ExperimentFile {
    /// One experiment per combination; IDs must be unique.
    pub fn experiments(&self) -> Result<Vec<ExperimentConfig>> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for c in &self.combinations {
            if !seen.insert(c.id) {
                return usage(format!("duplicate combination id {}", c.id));
            }
            let cfg = ExperimentConfig {
                problem: self.problem.clone(),
                id: c.id,
                repetitions: self.repetitions,
                base_seed: self.base_seed,
                solver: c.solver.clone(),
                oracle: self.oracle.clone(),
                record_wall_time: self.record_wall_time,
            };
            cfg.validate()?;
            out.push(cfg);
        }
        Ok(out)
    }
}

/// One repetition. `metrics` is `None` when the run failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: String,
    pub solver: SolverKind,
    pub id: u32,
    pub rep: usize,
    pub seed: u64,
    pub metrics: Option<MetricsReport>,
    pub wall_ms: Option<u64>,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        self.metrics.is_none()
    }
}

/// Records plus the feasible front each run produced (empty on failure).
#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub records: Vec<RunRecord>,
    pub fronts: Vec<Vec<ObjectiveVector>>,
}

/// GD snapping applies to reference fronts sampled from continuous sections.
pub fn snap_for(problem: &ProblemSpec) -> Option<f64> {
    (!problem.continuous.is_empty()).then_some(SNAP_EPSILON)
}

fn feasible_front(archive: &ParetoArchive) -> Vec<ObjectiveVector> {
    archive
        .members
        .iter()
        .filter(|s| s.is_feasible())
        .map(|s| s.objectives.clone())
        .collect()
}

/// Runs every repetition (seed `base_seed + rep`) in parallel and scores it
/// against `truth`. Failed repetitions are logged and recorded, not fatal.
pub fn run_experiment(cfg: &ExperimentConfig, truth: &ReferenceFront) -> Result<ExperimentResult> {
    cfg.validate()?;
    let problem = by_name(&cfg.problem)?;
    let runs: Vec<(RunRecord, Vec<ObjectiveVector>)> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let seed = cfg.base_seed.wrapping_add(rep as u64);
            let start = Instant::now();
            let outcome = cfg.solver.solve(&problem, seed).and_then(|archive| {
                let front = feasible_front(&archive);
                let report = truth.report(&front, archive.evaluation_count)?;
                Ok((report, front))
            });
            let wall_ms = cfg
                .record_wall_time
                .then(|| start.elapsed().as_millis() as u64);
            let (metrics, front) = match outcome {
                Ok((report, front)) => (Some(report), front),
                Err(e) => {
                    log::warn!(
                        "{} {} id {} rep {rep}: {e}",
                        cfg.problem,
                        cfg.solver.kind(),
                        cfg.id
                    );
                    (None, Vec::new())
                }
            };
            let record = RunRecord {
                problem: cfg.problem.clone(),
                solver: cfg.solver.kind(),
                id: cfg.id,
                rep,
                seed,
                metrics,
                wall_ms,
            };
            (record, front)
        })
        .collect();
    let (records, fronts) = runs.into_iter().unzip();
    Ok(ExperimentResult { records, fronts })
}

/// Box-plot statistics of one metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Mean of the values that are not outliers.
    pub mean: f64,
    /// Values beyond 1.5 IQR from the quartiles, ascending.
    pub outliers: Vec<f64>,
}

/// Quantile by linear interpolation between closest ranks on sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

impl Distribution {
    /// Errors on an empty sample or NaN values.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySummary);
        }
        if values.iter().any(|v| v.is_nan()) {
            return usage("cannot summarize NaN values");
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q1 = quantile(&sorted, 0.25);
        let q3 = quantile(&sorted, 0.75);
        let iqr = q3 - q1;
        let (low, high) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let (inliers, outliers): (Vec<f64>, Vec<f64>) =
            sorted.iter().partition(|&&v| v >= low && v <= high);
        let mean = inliers.iter().sum::<f64>() / inliers.len() as f64;
        Ok(Self {
            min: sorted[0],
            q1,
            median: quantile(&sorted, 0.5),
            q3,
            max: sorted[sorted.len() - 1],
            mean,
            outliers,
        })
    }
}

/// Metric names in export order.
pub const METRIC_NAMES: [&str; 7] = ["onvg", "purity", "gd", "igd", "spread", "d_spread", "evals"];

fn metric_values(m: &MetricsReport) -> [f64; 7] {
    [
        m.onvg as f64,
        m.purity,
        m.gd,
        m.igd,
        m.spread,
        m.relative_spread,
        m.evaluations as f64,
    ]
}

/// Statistics of one experiment's successful runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub problem: String,
    pub solver: SolverKind,
    pub id: u32,
    pub runs: usize,
    pub failures: usize,
    pub metrics: BTreeMap<String, Distribution>,
}

impl Summary {
    pub fn metric(&self, name: &str) -> Result<&Distribution> {
        self.metrics
            .get(name)
            .ok_or_else(|| Error::Usage(format!("summary has no `{name}` metric")))
    }
}

/// Summarizes records of a single experiment. Failed runs are counted but
/// excluded from the statistics.
pub fn summarize(records: &[RunRecord]) -> Result<Summary> {
    let first = records.first().ok_or(Error::EmptySummary)?;
    if records
        .iter()
        .any(|r| r.problem != first.problem || r.solver != first.solver || r.id != first.id)
    {
        return usage("records from different experiments; summarize each group separately");
    }
    let ok: Vec<[f64; 7]> = records
        .iter()
        .filter_map(|r| r.metrics.as_ref().map(metric_values))
        .collect();
    if ok.is_empty() {
        return Err(Error::EmptySummary);
    }
    let mut metrics = BTreeMap::new();
    for (k, name) in METRIC_NAMES.iter().enumerate() {
        let values: Vec<f64> = ok.iter().map(|v| v[k]).collect();
        metrics.insert(name.to_string(), Distribution::from_values(&values)?);
    }
    Ok(Summary {
        problem: first.problem.clone(),
        solver: first.solver,
        id: first.id,
        runs: records.len(),
        failures: records.len() - ok.len(),
        metrics,
    })
}

/// Groups records by `(problem, solver, id)` and summarizes each group.
pub fn summarize_groups(records: &[RunRecord]) -> Result<Vec<Summary>> {
    let mut groups: BTreeMap<(String, SolverKind, u32), Vec<RunRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.problem.clone(), r.solver, r.id))
            .or_default()
            .push(r.clone());
    }
    groups.values().map(|g| summarize(g)).collect()
}

/// Verbal reading of an investment ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvestmentClass {
    /// The candidate's quality is perfect (`IR = +inf`).
    BestQuality,
    /// `IR >= 1`: quality grew at least as much as cost.
    GoodInvestment,
    /// `0 < IR < 1`: quality grew, cost grew more.
    Enhanced,
    /// `IR = -1`.
    BreakEven,
    /// `-1 < IR < 0`: cost fell by more than quality did.
    AcceptableTradeoff,
    /// `IR < -1`.
    Bad,
}

impl InvestmentClass {
    pub fn of(ir: f64) -> Self {
        if ir == f64::INFINITY {
            InvestmentClass::BestQuality
        } else if ir >= 1.0 {
            InvestmentClass::GoodInvestment
        } else if ir > 0.0 {
            InvestmentClass::Enhanced
        } else if ir == -1.0 {
            InvestmentClass::BreakEven
        } else if ir > -1.0 {
            InvestmentClass::AcceptableTradeoff
        } else {
            InvestmentClass::Bad
        }
    }
}

/// JSON has no infinities; they are written as the strings `"inf"` and
/// `"-inf"`.
mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad number `{other}`"))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub problem: String,
    pub baseline: (SolverKind, u32),
    pub candidate: (SolverKind, u32),
    #[serde(with = "extended_float")]
    pub q: f64,
    pub c: f64,
    #[serde(with = "extended_float")]
    pub ir: f64,
    pub class: InvestmentClass,
}

/// Investment ratio of `candidate` over `baseline` from their GD, relative
/// spread and evaluation means.
pub fn compare(baseline: &Summary, candidate: &Summary) -> Result<Comparison> {
    let base_evals = baseline.metric("evals")?.mean;
    if base_evals == 0.0 {
        return usage("baseline has zero evaluations");
    }
    let q = quality_ratio(
        baseline.metric("gd")?.mean,
        baseline.metric("d_spread")?.mean,
        candidate.metric("gd")?.mean,
        candidate.metric("d_spread")?.mean,
    )?;
    let c = candidate.metric("evals")?.mean / base_evals;
    let ir = investment_ratio(q, c)?;
    Ok(Comparison {
        problem: candidate.problem.clone(),
        baseline: (baseline.solver, baseline.id),
        candidate: (candidate.solver, candidate.id),
        q,
        c,
        ir,
        class: InvestmentClass::of(ir),
    })
}

/// Column order of `runs.csv`.
pub const RUNS_HEADER: [&str; 14] = [
    "problem", "solver", "id", "rep", "seed", "onvg", "purity", "gd", "igd", "spread", "d_spread",
    "evals", "wall_ms", "failed",
];

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

/// Writes `runs.csv`; failed runs leave the metric cells empty.
pub fn write_runs_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(RUNS_HEADER).map_err(csv_err(path))?;
    for r in records {
        let mut row = vec![
            r.problem.clone(),
            r.solver.to_string(),
            r.id.to_string(),
            r.rep.to_string(),
            r.seed.to_string(),
        ];
        match &r.metrics {
            Some(m) => row.extend([
                m.onvg.to_string(),
                m.purity.to_string(),
                m.gd.to_string(),
                m.igd.to_string(),
                m.spread.to_string(),
                m.relative_spread.to_string(),
                m.evaluations.to_string(),
            ]),
            None => row.extend(std::iter::repeat_n(String::new(), 7)),
        }
        row.push(r.wall_ms.map(|v| v.to_string()).unwrap_or_default());
        row.push(r.failed().to_string());
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn parse_field<T: std::str::FromStr>(path: &Path, row: usize, name: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| {
        Error::Parse(format!(
            "{} row {row}, {name} = `{value}`: {e}",
            path.display()
        ))
    })
}

/// Reads a `runs.csv` written by [`write_runs_csv`].
pub fn read_runs_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(RUNS_HEADER.iter().copied()) {
        return Err(Error::Parse(format!(
            "{}: expected header {}",
            path.display(),
            RUNS_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let f = |k: usize| &rec[k];
        let failed: bool = parse_field(path, row, "failed", f(13))?;
        let metrics = if failed {
            None
        } else {
            Some(MetricsReport {
                onvg: parse_field(path, row, "onvg", f(5))?,
                purity: parse_field(path, row, "purity", f(6))?,
                gd: parse_field(path, row, "gd", f(7))?,
                igd: parse_field(path, row, "igd", f(8))?,
                spread: parse_field(path, row, "spread", f(9))?,
                relative_spread: parse_field(path, row, "d_spread", f(10))?,
                evaluations: parse_field(path, row, "evals", f(11))?,
            })
        };
        out.push(RunRecord {
            problem: f(0).to_string(),
            solver: f(1).parse()?,
            id: parse_field(path, row, "id", f(2))?,
            rep: parse_field(path, row, "rep", f(3))?,
            seed: parse_field(path, row, "seed", f(4))?,
            metrics,
            wall_ms: if f(12).is_empty() {
                None
            } else {
                Some(parse_field(path, row, "wall_ms", f(12))?)
            },
        });
    }
    Ok(out)
}

/// Reads `summary.json` written by [`export`].
pub fn read_summaries(path: &Path) -> Result<Vec<Summary>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `runs.csv`, `summary.json`, `comparison.json` and, for each run
/// with a front, `fronts/<problem>-<solver>-<id>-<rep>.csv` into `dir`.
pub fn export(
    dir: &Path,
    records: &[RunRecord],
    fronts: &[Vec<ObjectiveVector>],
    summaries: &[Summary],
    comparisons: &[Comparison],
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_runs_csv(&dir.join("runs.csv"), records)?;
    write_json(&dir.join("summary.json"), &summaries)?;
    write_json(&dir.join("comparison.json"), &comparisons)?;
    let front_dir = dir.join("fronts");
    for (r, front) in records.iter().zip(fronts) {
        if front.is_empty() {
            continue;
        }
        std::fs::create_dir_all(&front_dir).map_err(io_err(&front_dir))?;
        let name = format!("{}-{}-{}-{}.csv", r.problem, r.solver, r.id, r.rep);
        write_front_csv(&front_dir.join(name), front)?;
    }
    Ok(())
}
