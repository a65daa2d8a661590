//! Dominance relations, feasibility, Pareto filtering and the incumbent archive.
//!
//! All objectives are minimized. Problems stated as maximization are negated
//! when they are defined.

use std::cmp::Ordering;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};

/// Objective values `(f1, ..., fp)` of one evaluated point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector(pub Vec<f64>);

impl ObjectiveVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ObjectiveVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ObjectiveVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// A mixed assignment: continuous values and integer values.
///
/// Integer entries of discrete-set domains hold the set index, not the value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VariableVector {
    pub continuous: Vec<f64>,
    pub integer: Vec<i64>,
}

impl VariableVector {
    pub fn new(continuous: Vec<f64>, integer: Vec<i64>) -> Self {
        Self {
            continuous,
            integer,
        }
    }

    pub fn len(&self) -> usize {
        self.continuous.len() + self.integer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An evaluated point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub vars: VariableVector,
    pub objectives: ObjectiveVector,
    /// Aggregated constraint violation, zero iff feasible.
    pub violation: f64,
}

impl Solution {
    pub fn is_feasible(&self) -> bool {
        self.violation <= 0.0
    }

    /// Same objective vector and same violation.
    pub fn same_point(&self, other: &Solution) -> bool {
        self.violation == other.violation && self.objectives.0 == other.objectives.0
    }
}

/// Pareto dominance for minimization.
///
/// Returns a usage error if the vectors have different lengths.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return usage(format!(
            "cannot compare objective vectors of length {} and {}",
            a.len(),
            b.len()
        ));
    }
    Ok(dominates_unchecked(a, b))
}

#[inline]
pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strictly_better = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly_better = true;
        }
    }
    strictly_better
}

/// Feasibility-first dominance: feasible beats infeasible, smaller violation
/// beats larger, and two feasible points compare by Pareto dominance.
pub fn constrained_dominates(a: &Solution, b: &Solution) -> bool {
    match (a.is_feasible(), b.is_feasible()) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.violation < b.violation,
        (true, true) => dominates_unchecked(&a.objectives, &b.objectives),
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// Indices (ascending) of the points not constrained-dominated by any other
/// point. Exact duplicates keep only their first occurrence.
pub(crate) fn nondominated_indices<'a, F>(n: usize, point: F) -> Vec<usize>
where
    F: Fn(usize) -> (&'a [f64], f64),
{
    if n == 0 {
        return Vec::new();
    }
    let mut candidates: Vec<usize> = (0..n).filter(|&i| point(i).1 <= 0.0).collect();
    if candidates.is_empty() {
        let least = (0..n).map(|i| point(i).1).fold(f64::INFINITY, f64::min);
        candidates = (0..n).filter(|&i| point(i).1 == least).collect();
    }
    candidates.sort_by(|&i, &j| lex_cmp(point(i).0, point(j).0).then(i.cmp(&j)));

    let mut kept: Vec<usize> = Vec::new();
    if point(candidates[0]).0.len() == 2 {
        // Sorted by (f1, f2): a point survives iff its f2 beats every earlier survivor.
        let mut best_f2 = f64::INFINITY;
        for &i in &candidates {
            let f2 = point(i).0[1];
            if f2 < best_f2 {
                best_f2 = f2;
                kept.push(i);
            }
        }
    } else {
        // Lexicographic order guarantees a point is only dominated by earlier ones.
        for &i in &candidates {
            let p = point(i).0;
            let beaten = kept.iter().any(|&k| {
                let q = point(k).0;
                q == p || dominates_unchecked(q, p)
            });
            if !beaten {
                kept.push(i);
            }
        }
    }
    kept.sort_unstable();
    kept
}

/// Keeps the points not constrained-dominated by any other input point.
///
/// Duplicates are kept once (first occurrence) and survivors retain their
/// input order.
pub fn pareto_filter(points: &[Solution]) -> Vec<Solution> {
    nondominated_indices(points.len(), |i| {
        (&points[i].objectives[..], points[i].violation)
    })
    .into_iter()
    .map(|i| points[i].clone())
    .collect()
}

/// [`pareto_filter`] over bare objective vectors (all treated as feasible).
pub fn pareto_filter_vectors(points: &[ObjectiveVector]) -> Vec<ObjectiveVector> {
    nondominated_indices(points.len(), |i| (&points[i][..], 0.0))
        .into_iter()
        .map(|i| points[i].clone())
        .collect()
}

/// Componentwise minimum of a nonempty set of objective vectors.
pub fn ideal_point<'a, I>(points: I) -> Result<ObjectiveVector>
where
    I: IntoIterator<Item = &'a ObjectiveVector>,
{
    let mut iter = points.into_iter();
    let Some(first) = iter.next() else {
        return usage("ideal point of an empty set");
    };
    let mut ideal = first.0.clone();
    for p in iter {
        if p.len() != ideal.len() {
            return usage("ideal point over vectors of different lengths");
        }
        for (m, v) in ideal.iter_mut().zip(p.iter()) {
            *m = m.min(*v);
        }
    }
    Ok(ObjectiveVector(ideal))
}

/// The incumbent set of mutually non-dominated solutions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    pub members: Vec<Solution>,
    /// Objective evaluations spent producing this archive.
    pub evaluation_count: u64,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an archive from arbitrary points, filtering them first.
    pub fn from_points(points: &[Solution], evaluation_count: u64) -> Self {
        Self {
            members: pareto_filter(points),
            evaluation_count,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn objectives(&self) -> Vec<ObjectiveVector> {
        self.members.iter().map(|s| s.objectives.clone()).collect()
    }

    /// True iff some member dominates `point`.
    pub fn dominates_point(&self, point: &[f64]) -> bool {
        self.members
            .iter()
            .any(|m| m.is_feasible() && dominates_unchecked(&m.objectives, point))
    }

    /// Inserts `incoming`, dropping everything constrained-dominated.
    ///
    /// Equivalent to `pareto_filter(members ++ incoming)` but avoids
    /// re-sorting the whole archive on every insertion.
    pub fn merge<I>(&mut self, incoming: I, evaluations: u64)
    where
        I: IntoIterator<Item = Solution>,
    {
        self.evaluation_count += evaluations;
        for cand in incoming {
            let rejected = self
                .members
                .iter()
                .any(|m| m.same_point(&cand) || constrained_dominates(m, &cand));
            if rejected {
                continue;
            }
            self.members.retain(|m| !constrained_dominates(&cand, m));
            self.members.push(cand);
        }
    }
}

/// Functional form of [`ParetoArchive::merge`].
pub fn archive_merge(
    archive: &ParetoArchive,
    incoming: &[Solution],
    evaluations: u64,
) -> ParetoArchive {
    let mut out = archive.clone();
    out.merge(incoming.iter().cloned(), evaluations);
    out
}
