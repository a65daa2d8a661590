//! Front quality indicators: cardinality (ONVG), modified purity, GD/IGD,
//! spread and relative spread, plus the investment ratio that relates a
//! quality gain to its cost.
//!
//! All formulas work on raw, un-normalized objective values.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::pareto::{pareto_filter_vectors, ObjectiveVector};

/// Distances at or below this are treated as zero in GD against a sampled
/// continuous reference front.
pub const SNAP_EPSILON: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontSource {
    Approximate,
    True,
}

/// A set of mutually non-dominated objective vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Front {
    pub points: Vec<ObjectiveVector>,
    pub source: FrontSource,
}

impl Front {
    pub fn new(points: Vec<ObjectiveVector>, source: FrontSource) -> Self {
        Self { points, source }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Every indicator for one solver run against a reference front.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub onvg: usize,
    pub purity: f64,
    pub gd: f64,
    pub igd: f64,
    pub spread: f64,
    pub relative_spread: f64,
    pub evaluations: u64,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lex_sorted(points: &[ObjectiveVector]) -> Vec<&ObjectiveVector> {
    let mut sorted: Vec<&ObjectiveVector> = points.iter().collect();
    sorted.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    sorted
}

/// Nearest-neighbour queries against a fixed point set, pruned on the
/// first coordinate.
#[derive(Clone, Debug)]
pub struct NearestIndex {
    points: Vec<Vec<f64>>,
}

impl NearestIndex {
    pub fn new(points: &[ObjectiveVector]) -> Self {
        let points = lex_sorted(points)
            .into_iter()
            .map(|p| p.0.clone())
            .collect();
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared Euclidean distance from `q` to the closest indexed point.
    pub fn nearest_squared(&self, q: &[f64]) -> f64 {
        let start = self.points.partition_point(|p| p[0] < q[0]);
        let mut best = f64::INFINITY;
        for p in self.points[start..].iter() {
            let d0 = p[0] - q[0];
            if d0 * d0 > best {
                break;
            }
            best = best.min(squared_distance(p, q));
        }
        for p in self.points[..start].iter().rev() {
            let d0 = q[0] - p[0];
            if d0 * d0 > best {
                break;
            }
            best = best.min(squared_distance(p, q));
        }
        best
    }
}

/// Overall non-dominated vector generation: the point count.
pub fn onvg(front: &[ObjectiveVector]) -> usize {
    front.len()
}

fn bit_key(p: &[f64]) -> Vec<u64> {
    p.iter().map(|v| v.to_bits()).collect()
}

/// Fraction of `approx` that survives a joint Pareto filter with `truth`.
pub fn purity(approx: &[ObjectiveVector], truth: &[ObjectiveVector]) -> Result<f64> {
    if approx.is_empty() {
        return usage("purity of an empty approximation");
    }
    let mut joint = approx.to_vec();
    joint.extend_from_slice(truth);
    let survivors: HashSet<Vec<u64>> = pareto_filter_vectors(&joint)
        .iter()
        .map(|p| bit_key(p))
        .collect();
    let kept = approx
        .iter()
        .filter(|p| survivors.contains(&bit_key(p)))
        .count();
    Ok(kept as f64 / approx.len() as f64)
}

fn generational_distance(from: &[ObjectiveVector], to: &NearestIndex, snap: Option<f64>) -> f64 {
    let sum: f64 = from
        .iter()
        .map(|p| {
            let d2 = to.nearest_squared(p);
            match snap {
                Some(eps) if d2.sqrt() <= eps => 0.0,
                _ => d2,
            }
        })
        .sum();
    sum.sqrt() / from.len() as f64
}

/// Generational distance `sqrt(sum d_i^2) / |S|`, `d_i` the distance from
/// each approximate point to its nearest true point. With `snap = Some(eps)`,
/// distances `<= eps` count as zero.
pub fn gd(approx: &[ObjectiveVector], truth: &[ObjectiveVector], snap: Option<f64>) -> Result<f64> {
    if approx.is_empty() || truth.is_empty() {
        return usage("GD needs two nonempty fronts");
    }
    Ok(generational_distance(
        approx,
        &NearestIndex::new(truth),
        snap,
    ))
}

/// Inverted generational distance: distances from each true point to the
/// approximation, divided by `|P|`.
pub fn igd(approx: &[ObjectiveVector], truth: &[ObjectiveVector]) -> Result<f64> {
    if approx.is_empty() || truth.is_empty() {
        return usage("IGD needs two nonempty fronts");
    }
    Ok(generational_distance(
        truth,
        &NearestIndex::new(approx),
        None,
    ))
}

fn extremes(points: &[ObjectiveVector]) -> (&ObjectiveVector, &ObjectiveVector) {
    let sorted = lex_sorted(points);
    (sorted[0], sorted[sorted.len() - 1])
}

/// Spread with the reference extremes already extracted.
fn spread_with_extremes(approx: &[ObjectiveVector], first: &[f64], last: &[f64]) -> Result<f64> {
    if approx.len() < 2 {
        return usage(format!(
            "spread needs at least 2 points, got {}",
            approx.len()
        ));
    }
    let sorted = lex_sorted(approx);
    let d_f = squared_distance(sorted[0], first).sqrt();
    let d_l = squared_distance(sorted[sorted.len() - 1], last).sqrt();
    let gaps: Vec<f64> = sorted
        .windows(2)
        .map(|w| squared_distance(w[0], w[1]).sqrt())
        .collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let deviation: f64 = gaps.iter().map(|d| (d - mean).abs()).sum();
    let denominator = d_f + d_l + gaps.len() as f64 * mean;
    if denominator == 0.0 {
        return Ok(0.0);
    }
    Ok((d_f + d_l + deviation) / denominator)
}

/// Spread indicator: extent (distances of the approximation's extremes to
/// the true extremes) plus non-uniformity of consecutive gaps, with points
/// ordered by the first objective.
pub fn spread(approx: &[ObjectiveVector], truth: &[ObjectiveVector]) -> Result<f64> {
    if truth.is_empty() {
        return usage("spread needs a nonempty reference front");
    }
    let (first, last) = extremes(truth);
    spread_with_extremes(approx, first, last)
}

/// `|spread(P, P) - spread(S, P)|`.
pub fn relative_spread(approx: &[ObjectiveVector], truth: &[ObjectiveVector]) -> Result<f64> {
    Ok((spread(truth, truth)? - spread(approx, truth)?).abs())
}

/// Investment ratio: `q / c` when the quality ratio `q >= 1`, else `-c / q`.
///
/// `q = inf` (a perfect candidate) gives `+inf`; `q = 0` gives `-inf`.
pub fn investment_ratio(q: f64, c: f64) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return usage(format!("cost ratio must be positive and finite, got {c}"));
    }
    if !(q >= 0.0) {
        return usage(format!("quality ratio must be non-negative, got {q}"));
    }
    if q >= 1.0 {
        Ok(q / c)
    } else {
        Ok(-c / q)
    }
}

/// `num / den` with `x / 0 = inf` for `x > 0` and `0 / 0 = 1`.
fn guarded_ratio(num: f64, den: f64) -> f64 {
    match (num == 0.0, den == 0.0) {
        (true, true) => 1.0,
        (false, true) => f64::INFINITY,
        _ => num / den,
    }
}

/// Quality ratio of candidate `b` over baseline `a`: the geometric mean of
/// the GD ratio and the spread ratio, each oriented so larger is better.
///
/// When one ratio is infinite and the other zero the two verdicts cancel
/// and the result is 1.
pub fn quality_ratio(gd_a: f64, spread_a: f64, gd_b: f64, spread_b: f64) -> Result<f64> {
    for (name, v) in [
        ("gd_a", gd_a),
        ("spread_a", spread_a),
        ("gd_b", gd_b),
        ("spread_b", spread_b),
    ] {
        if !(v >= 0.0) {
            return usage(format!("{name} must be non-negative, got {v}"));
        }
    }
    let r_gd = guarded_ratio(gd_a, gd_b);
    let r_spread = guarded_ratio(spread_a, spread_b);
    let product = r_gd * r_spread;
    if product.is_nan() {
        return Ok(1.0);
    }
    Ok(product.sqrt())
}

/// A reference front with its nearest-neighbour index and own spread,
/// for scoring many runs against the same truth.
#[derive(Clone, Debug)]
pub struct ReferenceFront {
    pub points: Vec<ObjectiveVector>,
    index: NearestIndex,
    first: ObjectiveVector,
    last: ObjectiveVector,
    own_spread: f64,
    snap: Option<f64>,
}

impl ReferenceFront {
    /// `snap` is the GD snapping tolerance, `None` for exact fronts.
    pub fn new(points: Vec<ObjectiveVector>, snap: Option<f64>) -> Result<Self> {
        if points.is_empty() {
            return usage("reference front is empty");
        }
        let (first, last) = extremes(&points);
        let (first, last) = (first.clone(), last.clone());
        let own_spread = if points.len() >= 2 {
            spread_with_extremes(&points, &first, &last)?
        } else {
            0.0
        };
        Ok(Self {
            index: NearestIndex::new(&points),
            points,
            first,
            last,
            own_spread,
            snap,
        })
    }

    pub fn own_spread(&self) -> f64 {
        self.own_spread
    }

    /// Scores `approx`; needs at least two points for the spread terms.
    pub fn report(&self, approx: &[ObjectiveVector], evaluations: u64) -> Result<MetricsReport> {
        if approx.is_empty() {
            return usage("cannot score an empty approximation");
        }
        let spread = spread_with_extremes(approx, &self.first, &self.last)?;
        Ok(MetricsReport {
            onvg: onvg(approx),
            purity: purity(approx, &self.points)?,
            gd: generational_distance(approx, &self.index, self.snap),
            igd: generational_distance(&self.points, &NearestIndex::new(approx), None),
            spread,
            relative_spread: (self.own_spread - spread).abs(),
            evaluations,
        })
    }
}

/// Writes a front as CSV with header `f1,f2,...`.
pub fn write_front_csv(path: &Path, points: &[ObjectiveVector]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let p = points.first().map_or(2, |v| v.len());
    let header: Vec<String> = (1..=p).map(|k| format!("f{k}")).collect();
    w.write_record(&header).map_err(csv_err)?;
    for pt in points {
        w.write_record(pt.iter().map(|v| v.to_string()))
            .map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a front written by [`write_front_csv`]; the header row is required.
pub fn read_front_csv(path: &Path) -> Result<Vec<ObjectiveVector>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    if header.is_empty() || !header.iter().all(|h| h.trim().starts_with('f')) {
        return Err(Error::Parse(format!(
            "{}: expected a header row like f1,f2",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let values = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{}: `{s}`: {e}", path.display())))
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(ObjectiveVector(values));
    }
    Ok(out)
}
