//! Reference ("true") Pareto fronts.
//!
//! Three stages:
//! 1. [`enumerate_true_front`]: every integer combination times a uniform
//!    grid over the continuous variables, filtered. Exact for pure-integer
//!    problems.
//! 2. [`refine_continuous_sections`]: a fine local grid around each coarse
//!    Pareto point, for the integer combinations that reached the front.
//! 3. [`uniform_resample`]: each continuous section of a 2-objective front is
//!    interpolated with natural cubic splines and resampled at a constant
//!    step.
//!
//! [`true_front`] chains the three; [`cached_true_front`] adds a CSV cache.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::metrics::{read_front_csv, write_front_csv};
use crate::pareto::{
    nondominated_indices, pareto_filter, pareto_filter_vectors, ObjectiveVector, Solution,
    VariableVector,
};
use crate::problems::{EvalScratch, ProblemSpec};

/// Target number of evaluations per parallel work unit.
const CHUNK_EVALUATIONS: u64 = 1 << 16;

/// Sections are split where a gap exceeds this multiple of the median gap.
const SECTION_GAP_FACTOR: f64 = 10.0;

/// Spline sub-samples per knot interval when tabulating arc length.
const ARC_SUBSAMPLES: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Coarse grid points per continuous variable.
    pub continuous_grid_points: usize,
    /// Local grid points per continuous variable in refinement; 0 skips it.
    pub refine_grid_points: usize,
    /// Resampling step along continuous sections.
    pub epsilon: f64,
    /// Cap on the evaluations of each of enumeration and refinement.
    pub max_enumeration: u64,
    /// Cap on the resampled front size; the step grows past `epsilon` to
    /// respect it.
    pub max_resample_points: usize,
    /// Skip resampling when false.
    pub resample: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            continuous_grid_points: 101,
            refine_grid_points: 11,
            epsilon: 1e-4,
            max_enumeration: 100_000_000,
            max_resample_points: 200_000,
            resample: true,
        }
    }
}

impl OracleConfig {
    /// Grid sizes that keep each shipped problem within a few million
    /// evaluations.
    pub fn for_problem(problem: &ProblemSpec) -> Self {
        let continuous_grid_points = match problem.continuous.len() {
            0 => 1,
            1 | 2 => 401,
            3 => 41,
            _ => 11,
        };
        let continuous_grid_points = if problem.name == "truss" {
            11
        } else {
            continuous_grid_points
        };
        Self {
            continuous_grid_points,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.continuous_grid_points == 0 {
            return usage("continuous_grid_points must be positive");
        }
        if self.refine_grid_points == 1 {
            return usage("refine_grid_points must be 0 or at least 2");
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return usage(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.max_enumeration == 0 {
            return usage("max_enumeration must be at least 1");
        }
        if self.max_resample_points < 2 {
            return usage("max_resample_points must be at least 2");
        }
        Ok(())
    }

    /// Stable 64-bit digest of this config and the problem's domain
    /// (FNV-1a over their JSON form), used in cache names.
    pub fn digest(&self, problem: &ProblemSpec) -> u64 {
        let text = serde_json::to_string(&(self, &problem.continuous, problem.integer_box()))
            .expect("config serializes");
        text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }
}

/// A reference front with the solutions behind it.
#[derive(Clone, Debug)]
pub struct OracleFront {
    /// Objective vectors, sorted lexicographically.
    pub points: Vec<ObjectiveVector>,
    /// Evaluated solutions behind `points` before resampling.
    pub solutions: Vec<Solution>,
    /// Integer combinations with at least one solution on the front, sorted.
    pub contributing: Vec<Vec<i64>>,
    pub evaluations: u64,
    /// Final grid pitch per continuous variable (the approximation error
    /// scale); empty for pure-integer problems.
    pub grid_pitch: Vec<f64>,
    /// Step used by resampling, when it ran.
    pub resample_step: Option<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || lo == hi {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|k| if k == n - 1 { hi } else { lo + step * k as f64 })
        .collect()
}

fn sorted_points(solutions: &[Solution]) -> Vec<ObjectiveVector> {
    let mut points: Vec<ObjectiveVector> = solutions.iter().map(|s| s.objectives.clone()).collect();
    sort_lex(&mut points);
    points
}

fn sort_lex(points: &mut [ObjectiveVector]) {
    points.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
}

fn contributing(solutions: &[Solution]) -> Vec<Vec<i64>> {
    solutions
        .iter()
        .map(|s| s.vars.integer.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Evaluates `integer` at every point of the product grid `axes` and returns
/// the feasible non-dominated solutions.
fn conditional_front(
    problem: &ProblemSpec,
    scratch: &mut EvalScratch,
    axes: &[Vec<f64>],
    integer: &[i64],
) -> Vec<Solution> {
    let p = problem.objectives;
    let mut objectives: Vec<f64> = Vec::new();
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut counter = vec![0usize; axes.len()];
    let mut x: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    loop {
        let (f, violation) = scratch.run(problem, &x, integer);
        if violation <= 0.0 && f.iter().all(|v| v.is_finite()) {
            objectives.extend_from_slice(f);
            points.push(x.clone());
        }
        // Odometer step over the grid.
        let mut j = 0;
        loop {
            if j == axes.len() {
                return finish_front(objectives, points, integer, p);
            }
            counter[j] += 1;
            if counter[j] < axes[j].len() {
                x[j] = axes[j][counter[j]];
                break;
            }
            counter[j] = 0;
            x[j] = axes[j][0];
            j += 1;
        }
    }
}

fn finish_front(
    objectives: Vec<f64>,
    points: Vec<Vec<f64>>,
    integer: &[i64],
    p: usize,
) -> Vec<Solution> {
    nondominated_indices(points.len(), |i| (&objectives[i * p..(i + 1) * p], 0.0))
        .into_iter()
        .map(|i| Solution {
            vars: VariableVector::new(points[i].clone(), integer.to_vec()),
            objectives: ObjectiveVector(objectives[i * p..(i + 1) * p].to_vec()),
            violation: 0.0,
        })
        .collect()
}

fn decode_combination(mut index: u128, bounds: &[(i64, i64)]) -> Vec<i64> {
    bounds
        .iter()
        .map(|&(lo, hi)| {
            let width = (hi - lo + 1) as u128;
            let code = lo + (index % width) as i64;
            index /= width;
            code
        })
        .collect()
}

/// Evaluates the full lattice and returns its feasible Pareto front.
///
/// The result does not depend on the rayon pool size.
pub fn enumerate_true_front(problem: &ProblemSpec, cfg: &OracleConfig) -> Result<OracleFront> {
    cfg.validate()?;
    let bounds = problem.integer_box();
    let combinations = ProblemSpec::lattice_size(&bounds);
    let grid = cfg.continuous_grid_points as u128;
    let per_combination = grid.saturating_pow(problem.continuous.len() as u32);
    let required = combinations.saturating_mul(per_combination);
    if required > cfg.max_enumeration as u128 {
        return Err(Error::Capacity {
            required,
            budget: cfg.max_enumeration,
        });
    }
    let axes: Vec<Vec<f64>> = problem
        .continuous
        .iter()
        .map(|&(lo, hi)| linspace(lo, hi, cfg.continuous_grid_points))
        .collect();
    let chunk = (CHUNK_EVALUATIONS as u128 / per_combination).max(1);
    let chunks = combinations.div_ceil(chunk);

    let parts: Vec<Vec<Solution>> = (0..chunks as u64)
        .into_par_iter()
        .map(|c| {
            let mut scratch = EvalScratch::new(problem);
            let start = c as u128 * chunk;
            let end = (start + chunk).min(combinations);
            let mut found = Vec::new();
            for index in start..end {
                let integer = decode_combination(index, &bounds);
                found.extend(conditional_front(problem, &mut scratch, &axes, &integer));
            }
            pareto_filter(&found)
        })
        .collect();
    let all: Vec<Solution> = parts.into_iter().flatten().collect();
    let solutions = pareto_filter(&all);
    log::info!(
        "{}: enumerated {required} points, {} on the front",
        problem.name,
        solutions.len()
    );
    Ok(OracleFront {
        points: sorted_points(&solutions),
        contributing: contributing(&solutions),
        evaluations: required as u64,
        grid_pitch: problem
            .continuous
            .iter()
            .map(|&(lo, hi)| pitch(lo, hi, cfg.continuous_grid_points))
            .collect(),
        resample_step: None,
        solutions,
    })
}

fn pitch(lo: f64, hi: f64, n: usize) -> f64 {
    if n <= 1 {
        hi - lo
    } else {
        (hi - lo) / (n - 1) as f64
    }
}

/// Searches a fine local grid around each front point, one coarse pitch
/// wide on each side, then re-filters. Identity for pure-integer problems.
///
/// Only combinations in `front.contributing` are searched.
pub fn refine_continuous_sections(
    front: &OracleFront,
    problem: &ProblemSpec,
    cfg: &OracleConfig,
) -> Result<OracleFront> {
    cfg.validate()?;
    if problem.continuous.is_empty() || cfg.refine_grid_points == 0 || front.solutions.is_empty() {
        return Ok(front.clone());
    }
    let n = cfg.refine_grid_points;
    let per_point = (n as u128).saturating_pow(problem.continuous.len() as u32);
    let required = per_point.saturating_mul(front.solutions.len() as u128);
    if required > cfg.max_enumeration as u128 {
        return Err(Error::Capacity {
            required,
            budget: cfg.max_enumeration,
        });
    }
    let allowed: BTreeSet<&Vec<i64>> = front.contributing.iter().collect();
    let half: Vec<f64> = front.grid_pitch.clone();
    let parts: Vec<Vec<Solution>> = front
        .solutions
        .par_iter()
        .filter(|s| allowed.contains(&s.vars.integer))
        .map(|s| {
            let axes: Vec<Vec<f64>> = s
                .vars
                .continuous
                .iter()
                .zip(&problem.continuous)
                .zip(&half)
                .map(|((&x, &(lo, hi)), &h)| {
                    let mut axis = linspace((x - h).max(lo), (x + h).min(hi), n);
                    axis.push(x);
                    axis
                })
                .collect();
            let mut scratch = EvalScratch::new(problem);
            conditional_front(problem, &mut scratch, &axes, &s.vars.integer)
        })
        .collect();
    let mut all = front.solutions.clone();
    all.extend(parts.into_iter().flatten());
    let solutions = pareto_filter(&all);
    Ok(OracleFront {
        points: sorted_points(&solutions),
        contributing: contributing(&solutions),
        evaluations: front.evaluations + required as u64,
        grid_pitch: half.iter().map(|h| 2.0 * h / (n - 1) as f64).collect(),
        resample_step: None,
        solutions,
    })
}

fn gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Splits a lexicographically sorted 2-D front into sections at gaps above
/// [`SECTION_GAP_FACTOR`] times the median gap.
fn sections(points: &[ObjectiveVector]) -> Vec<&[ObjectiveVector]> {
    if points.len() < 2 {
        return vec![points];
    }
    let gaps: Vec<f64> = points.windows(2).map(|w| gap(&w[0], &w[1])).collect();
    let mut sorted = gaps.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    let threshold = SECTION_GAP_FACTOR * median;
    let mut out = Vec::new();
    let mut start = 0;
    for (i, &g) in gaps.iter().enumerate() {
        if g > threshold {
            out.push(&points[start..=i]);
            start = i + 1;
        }
    }
    out.push(&points[start..]);
    out
}

/// Natural cubic spline through `(t[i], y[i])`, `t` strictly increasing.
struct NaturalSpline {
    t: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl NaturalSpline {
    fn new(t: &[f64], y: &[f64]) -> Self {
        let n = t.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior equations.
            let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i]);
            }
            for i in 1..k {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * h[i];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - h[i + 1] * m[i + 2]) / diag[i];
            }
        }
        Self {
            t: t.to_vec(),
            y: y.to_vec(),
            m,
        }
    }

    fn eval(&self, s: f64) -> f64 {
        let n = self.t.len();
        let i = self.t[1..n - 1].partition_point(|&k| k <= s).min(n - 2);
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - s) / h;
        let b = (s - self.t[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// A continuous section as a parametric spline with an arc-length table.
struct SectionCurve {
    x: NaturalSpline,
    y: NaturalSpline,
    /// `(parameter, arc length)` samples, both increasing.
    table: Vec<(f64, f64)>,
}

impl SectionCurve {
    fn new(section: &[ObjectiveVector]) -> Self {
        let mut t = vec![0.0];
        for w in section.windows(2) {
            t.push(t.last().unwrap() + gap(&w[0], &w[1]));
        }
        let fx: Vec<f64> = section.iter().map(|p| p[0]).collect();
        let fy: Vec<f64> = section.iter().map(|p| p[1]).collect();
        let x = NaturalSpline::new(&t, &fx);
        let y = NaturalSpline::new(&t, &fy);
        let mut table = vec![(0.0, 0.0)];
        let mut prev = (fx[0], fy[0]);
        let mut length = 0.0;
        for w in t.windows(2) {
            for k in 1..=ARC_SUBSAMPLES {
                let s = if k == ARC_SUBSAMPLES {
                    w[1]
                } else {
                    w[0] + (w[1] - w[0]) * k as f64 / ARC_SUBSAMPLES as f64
                };
                let cur = (x.eval(s), y.eval(s));
                length += ((cur.0 - prev.0).powi(2) + (cur.1 - prev.1).powi(2)).sqrt();
                table.push((s, length));
                prev = cur;
            }
        }
        Self { x, y, table }
    }

    fn length(&self) -> f64 {
        self.table.last().unwrap().1
    }

    fn at_arc_length(&self, target: f64) -> ObjectiveVector {
        let i = self.table.partition_point(|&(_, l)| l < target);
        let s = if i == 0 {
            self.table[0].0
        } else if i >= self.table.len() {
            self.table.last().unwrap().0
        } else {
            let (t0, l0) = self.table[i - 1];
            let (t1, l1) = self.table[i];
            if l1 > l0 {
                t0 + (t1 - t0) * (target - l0) / (l1 - l0)
            } else {
                t1
            }
        };
        ObjectiveVector(vec![self.x.eval(s), self.y.eval(s)])
    }
}

fn resamplable(section: &[ObjectiveVector]) -> bool {
    if section.len() <= 3 {
        return false;
    }
    if section.windows(2).any(|w| w[0][0] == w[1][0]) {
        log::warn!(
            "section starting at ({}, {}) has repeated f1 values; passed through",
            section[0][0],
            section[0][1]
        );
        return false;
    }
    true
}

fn prepare(points: &[ObjectiveVector]) -> Result<Vec<ObjectiveVector>> {
    if points.iter().any(|p| p.len() != 2) {
        return usage("resampling needs 2-objective points");
    }
    let mut sorted = pareto_filter_vectors(points);
    sort_lex(&mut sorted);
    Ok(sorted)
}

/// Total length of the sections that [`uniform_resample`] would resample.
pub fn resampled_length(points: &[ObjectiveVector]) -> Result<f64> {
    let sorted = prepare(points)?;
    Ok(sections(&sorted)
        .into_iter()
        .filter(|s| resamplable(s))
        .map(|s| SectionCurve::new(s).length())
        .sum())
}

/// Re-discretizes each continuous section of a 2-objective front at a
/// constant arc-length step of at most `epsilon`.
///
/// The input is filtered and sorted by f1, then split where a gap exceeds
/// ten times the median gap. A section of length `L` becomes
/// `ceil(L / epsilon) + 1` points spaced `L / ceil(L / epsilon)` apart along a
/// natural cubic spline through its points (parameterized by chord length).
/// Sections of at most three points, or with repeated f1 values, are passed
/// through unchanged. The output is filtered again and sorted.
pub fn uniform_resample(points: &[ObjectiveVector], epsilon: f64) -> Result<Vec<ObjectiveVector>> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return usage(format!("epsilon must be positive, got {epsilon}"));
    }
    let sorted = prepare(points)?;
    let mut out = Vec::new();
    for section in sections(&sorted) {
        if !resamplable(section) {
            out.extend_from_slice(section);
            continue;
        }
        let curve = SectionCurve::new(section);
        let length = curve.length();
        let segments = (length / epsilon).ceil().max(1.0) as usize;
        let step = length / segments as f64;
        out.push(section[0].clone());
        for k in 1..segments {
            out.push(curve.at_arc_length(step * k as f64));
        }
        out.push(section[section.len() - 1].clone());
    }
    let mut filtered = pareto_filter_vectors(&out);
    sort_lex(&mut filtered);
    Ok(filtered)
}

/// Enumeration, refinement (problems with continuous variables) and
/// resampling (2-objective problems with continuous variables).
pub fn true_front(problem: &ProblemSpec, cfg: &OracleConfig) -> Result<OracleFront> {
    let coarse = enumerate_true_front(problem, cfg)?;
    if problem.continuous.is_empty() {
        return Ok(coarse);
    }
    let mut front = refine_continuous_sections(&coarse, problem, cfg)?;
    if cfg.resample && problem.objectives == 2 && front.points.len() > 1 {
        let length = resampled_length(&front.points)?;
        let step = cfg
            .epsilon
            .max(length / (cfg.max_resample_points - 1) as f64);
        if step > cfg.epsilon {
            log::warn!(
                "{}: resampling step raised from {} to {step} to stay under {} points",
                problem.name,
                cfg.epsilon,
                cfg.max_resample_points
            );
        }
        front.points = uniform_resample(&front.points, step)?;
        front.resample_step = Some(step);
    }
    Ok(front)
}

/// Path of the cached front for `problem` under `cfg` in `dir`.
pub fn cache_path(dir: &Path, problem: &ProblemSpec, cfg: &OracleConfig) -> PathBuf {
    dir.join(format!("{}-{:016x}.csv", problem.name, cfg.digest(problem)))
}

/// Reads the front from `dir` if cached, else computes and writes it.
pub fn cached_true_front(
    dir: &Path,
    problem: &ProblemSpec,
    cfg: &OracleConfig,
) -> Result<Vec<ObjectiveVector>> {
    let path = cache_path(dir, problem, cfg);
    if path.exists() {
        return read_front_csv(&path);
    }
    let front = true_front(problem, cfg)?;
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_front_csv(&path, &front.points)?;
    Ok(front.points)
}
