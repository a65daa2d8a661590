//! Benchmark bi-objective mixed-integer problems and the name registry.
//!
//! The bearing and coupling problems are not shipped: their objectives read
//! catalogue tables of standard part sizes whose contents are unpublished.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::pareto::{ObjectiveVector, Solution, VariableVector};

/// Domain of one integer-coded variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum IntegerDomain {
    /// Integers in `[lo, hi]`.
    Range { lo: i64, hi: i64 },
    /// `{0, 1}`.
    Binary,
    /// A sorted, duplicate-free value set; the variable holds an index into it.
    Set(Vec<f64>),
}

impl IntegerDomain {
    /// Inclusive bounds of the integer code.
    pub fn bounds(&self) -> (i64, i64) {
        match self {
            IntegerDomain::Range { lo, hi } => (*lo, *hi),
            IntegerDomain::Binary => (0, 1),
            IntegerDomain::Set(values) => (0, values.len() as i64 - 1),
        }
    }

    /// Numeric value represented by code `code`.
    pub fn value(&self, code: i64) -> f64 {
        match self {
            IntegerDomain::Set(values) => values[code as usize],
            _ => code as f64,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            IntegerDomain::Range { lo, hi } if lo > hi => {
                usage(format!("integer range [{lo}, {hi}] is empty"))
            }
            IntegerDomain::Set(values) => {
                if values.is_empty() {
                    return usage("discrete set is empty");
                }
                if values.windows(2).any(|w| w[0] >= w[1]) {
                    return usage("discrete set must be sorted and duplicate-free");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Per-variable domain, in the flattened order continuous-then-integer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum VariableDomain {
    Continuous { lo: f64, hi: f64 },
    Integer { lo: i64, hi: i64 },
    DiscreteSet(Vec<f64>),
    Binary,
}

/// Shape of a problem's true front.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParetoType {
    Discrete,
    Discontinuous,
    Continuous,
}

/// Inclusive integer bounds, one pair per integer variable.
pub type IntegerBox = Vec<(i64, i64)>;

/// Raw evaluation callback.
///
/// Arguments: continuous values, integer *values* (set codes already
/// decoded), objective output, constraint output. Constraints use the
/// `c >= 0` convention, inequalities first, then equalities (`c = 0`).
pub type EvalFn = dyn Fn(&[f64], &[f64], &mut [f64], &mut [f64]) + Send + Sync;

/// A multi-objective mixed-integer problem.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub continuous: Vec<(f64, f64)>,
    pub integer: Vec<IntegerDomain>,
    pub objectives: usize,
    pub inequalities: usize,
    pub equalities: usize,
    pub pareto_type: ParetoType,
    eval: Arc<EvalFn>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("continuous", &self.continuous)
            .field("integer", &self.integer)
            .field("objectives", &self.objectives)
            .field("inequalities", &self.inequalities)
            .field("equalities", &self.equalities)
            .finish()
    }
}

impl ProblemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        continuous: Vec<(f64, f64)>,
        integer: Vec<IntegerDomain>,
        objectives: usize,
        inequalities: usize,
        equalities: usize,
        pareto_type: ParetoType,
        eval: Arc<EvalFn>,
    ) -> Result<Self> {
        if objectives < 2 {
            return usage("a multi-objective problem needs at least two objectives");
        }
        for &(lo, hi) in &continuous {
            if !(lo <= hi) {
                return usage(format!("continuous bounds [{lo}, {hi}] are empty"));
            }
        }
        for d in &integer {
            d.validate()?;
        }
        Ok(Self {
            name: name.into(),
            continuous,
            integer,
            objectives,
            inequalities,
            equalities,
            pareto_type,
            eval,
        })
    }

    pub fn variable_count(&self) -> usize {
        self.continuous.len() + self.integer.len()
    }

    pub fn constraint_count(&self) -> usize {
        self.inequalities + self.equalities
    }

    pub fn domains(&self) -> Vec<VariableDomain> {
        let cont = self
            .continuous
            .iter()
            .map(|&(lo, hi)| VariableDomain::Continuous { lo, hi });
        let int = self.integer.iter().map(|d| match d {
            IntegerDomain::Range { lo, hi } => VariableDomain::Integer { lo: *lo, hi: *hi },
            IntegerDomain::Binary => VariableDomain::Binary,
            IntegerDomain::Set(v) => VariableDomain::DiscreteSet(v.clone()),
        });
        cont.chain(int).collect()
    }

    /// Full integer box of the problem.
    pub fn integer_box(&self) -> IntegerBox {
        self.integer.iter().map(IntegerDomain::bounds).collect()
    }

    /// Number of integer combinations in `bounds`, saturating.
    pub fn lattice_size(bounds: &[(i64, i64)]) -> u128 {
        bounds.iter().fold(1u128, |acc, &(lo, hi)| {
            acc.saturating_mul((hi - lo + 1) as u128)
        })
    }

    /// A copy of this problem with narrowed integer ranges.
    ///
    /// `bounds` must lie inside the current integer box. Set domains are
    /// sliced, so their codes are re-based at zero.
    pub fn restrict(&self, bounds: &[(i64, i64)]) -> Result<ProblemSpec> {
        if bounds.len() != self.integer.len() {
            return usage("restriction must give bounds for every integer variable");
        }
        let mut integer = Vec::with_capacity(bounds.len());
        for (d, &(lo, hi)) in self.integer.iter().zip(bounds) {
            let (dlo, dhi) = d.bounds();
            if lo < dlo || hi > dhi || lo > hi {
                return usage(format!("restriction [{lo}, {hi}] outside [{dlo}, {dhi}]"));
            }
            integer.push(match d {
                IntegerDomain::Set(values) => {
                    IntegerDomain::Set(values[lo as usize..=hi as usize].to_vec())
                }
                _ => IntegerDomain::Range { lo, hi },
            });
        }
        let mut out = self.clone();
        out.integer = integer;
        Ok(out)
    }

    /// Checks that `v` lies inside the domain box.
    pub fn check_domain(&self, v: &VariableVector) -> Result<()> {
        if v.continuous.len() != self.continuous.len() || v.integer.len() != self.integer.len() {
            return usage(format!(
                "problem `{}` expects {} continuous and {} integer variables",
                self.name,
                self.continuous.len(),
                self.integer.len()
            ));
        }
        for (i, (&x, &(lo, hi))) in v.continuous.iter().zip(&self.continuous).enumerate() {
            if !(lo <= x && x <= hi) {
                return usage(format!(
                    "continuous variable {i} = {x} outside [{lo}, {hi}]"
                ));
            }
        }
        for (i, (&y, d)) in v.integer.iter().zip(&self.integer).enumerate() {
            let (lo, hi) = d.bounds();
            if y < lo || y > hi {
                return usage(format!("integer variable {i} = {y} outside [{lo}, {hi}]"));
            }
        }
        Ok(())
    }

    /// Evaluates `v` after checking it lies in the domain.
    pub fn evaluate(&self, v: &VariableVector) -> Result<Solution> {
        self.check_domain(v)?;
        self.evaluate_unchecked(v)
    }

    /// Evaluates without the domain check; `v` must have the right shape.
    pub fn evaluate_unchecked(&self, v: &VariableVector) -> Result<Solution> {
        self.evaluate_with(&mut EvalScratch::new(self), v.clone())
    }

    /// [`Self::evaluate_unchecked`] reusing `scratch` and taking ownership of `v`.
    pub(crate) fn evaluate_with(
        &self,
        scratch: &mut EvalScratch,
        v: VariableVector,
    ) -> Result<Solution> {
        let (objectives, violation) = scratch.run(self, &v.continuous, &v.integer);
        if objectives.iter().any(|f| !f.is_finite()) {
            return Err(Error::NonFinite {
                problem: self.name.clone(),
                continuous: v.continuous.clone(),
                integer: v.integer.clone(),
            });
        }
        Ok(Solution {
            objectives: ObjectiveVector(objectives.to_vec()),
            vars: v,
            violation,
        })
    }
}

/// Reusable buffers for allocation-free evaluation in hot loops.
pub(crate) struct EvalScratch {
    int_values: Vec<f64>,
    objectives: Vec<f64>,
    constraints: Vec<f64>,
}

impl EvalScratch {
    pub(crate) fn new(problem: &ProblemSpec) -> Self {
        Self {
            int_values: vec![0.0; problem.integer.len()],
            objectives: vec![0.0; problem.objectives],
            constraints: vec![0.0; problem.constraint_count()],
        }
    }

    /// Returns the objectives and the aggregated violation.
    pub(crate) fn run(
        &mut self,
        problem: &ProblemSpec,
        continuous: &[f64],
        integer: &[i64],
    ) -> (&[f64], f64) {
        for ((slot, &code), d) in self
            .int_values
            .iter_mut()
            .zip(integer)
            .zip(&problem.integer)
        {
            *slot = d.value(code);
        }
        (problem.eval)(
            continuous,
            &self.int_values,
            &mut self.objectives,
            &mut self.constraints,
        );
        let violation = aggregate_violation(&self.constraints, problem.inequalities);
        (&self.objectives, violation)
    }
}

/// `sum max(0, -c)` over inequalities plus `sum |c|` over equalities.
/// A NaN constraint counts as an infinite violation.
pub fn aggregate_violation(constraints: &[f64], inequalities: usize) -> f64 {
    let mut total = 0.0;
    for (j, &c) in constraints.iter().enumerate() {
        let v = if c.is_nan() {
            f64::INFINITY
        } else if j < inequalities {
            (-c).max(0.0)
        } else {
            c.abs()
        };
        total += v;
    }
    total
}

/// Gear train: four tooth counts, gear-ratio error versus largest gear.
pub fn gear() -> ProblemSpec {
    const TARGET: f64 = 1.0 / 6.931;
    let eval = |_: &[f64], z: &[f64], f: &mut [f64], _: &mut [f64]| {
        let ratio = z[0] * z[1] / (z[2] * z[3]);
        let err = TARGET - ratio;
        f[0] = err * err;
        f[1] = z[0].max(z[1]).max(z[2]).max(z[3]);
    };
    ProblemSpec::new(
        "gear",
        vec![],
        vec![IntegerDomain::Range { lo: 12, hi: 60 }; 4],
        2,
        0,
        0,
        ParetoType::Discrete,
        Arc::new(eval),
    )
    .expect("gear definition is valid")
}

/// Disk brake: outer radius, engaging force and surface count are
/// continuous; the inner radius is integer.
///
/// Variable order: continuous `(x1, x2, x3)`, integer `(y1)`.
pub fn brake() -> ProblemSpec {
    let eval = |x: &[f64], y: &[f64], f: &mut [f64], c: &mut [f64]| {
        let (x1, x2, x3, y1) = (x[0], x[1], x[2], y[0]);
        let sq = x1 * x1 - y1 * y1;
        // (x1^2 - y1^2) / (x1^3 - y1^3) with the common factor cancelled,
        // finite when x1 = y1.
        let quad = x1 * x1 + x1 * y1 + y1 * y1;
        let ratio = (x1 + y1) / quad;
        f[0] = 4.9e-5 * sq * (x3 - 1.0);
        f[1] = 9.82e6 * ratio / (x2 * x3);
        // g <= 0 written as c = -g >= 0.
        c[0] = (x1 - y1) - 20.0;
        c[1] = 30.0 - 2.5 * (x3 + 1.0);
        c[2] = 0.4 - x2 / (PI * sq);
        c[3] = 1.0 - 2.22e-3 * x2 * quad / ((x1 + y1) * sq);
        c[4] = 2.66e-2 * x2 * x3 / ratio - 900.0;
    };
    ProblemSpec::new(
        "brake",
        vec![(75.0, 110.0), (1000.0, 3000.0), (2.0, 20.0)],
        vec![IntegerDomain::Range { lo: 55, hi: 80 }],
        2,
        5,
        0,
        ParetoType::Discontinuous,
        Arc::new(eval),
    )
    .expect("brake definition is valid")
}

/// Lower bounds of the three continuous truss member areas.
pub const TRUSS_AREA_LOWER: [f64; 3] = [2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];

/// Nine-bar truss: volume versus displacement.
///
/// Variable order: continuous `(A1, A2, A3)`, set-coded `(A4 .. A9)`.
pub fn truss() -> ProblemSpec {
    let eval = |x: &[f64], a: &[f64], f: &mut [f64], _: &mut [f64]| {
        let (a1, a2, a3) = (x[0], x[1], x[2]);
        let (a4, a5, a6, a7, a8, a9) = (a[0], a[1], a[2], a[3], a[4], a[5]);
        // Diagonal members are sqrt(2) times longer.
        f[0] = a1 + a2 + a3 + SQRT_2 * a4 + a5 + SQRT_2 * a6 + a7 + SQRT_2 * a8 + a9;
        f[1] = 4.0 / a1
            + 1.0 / a2
            + 1.0 / a3
            + 8.0 * SQRT_2 / a4
            + 4.0 / a5
            + 2.0 * SQRT_2 / a6
            + 4.0 / a7
            + 2.0 * SQRT_2 / a8;
    };
    ProblemSpec::new(
        "truss",
        TRUSS_AREA_LOWER.iter().map(|&lo| (lo, 10.0)).collect(),
        vec![IntegerDomain::Set(vec![1.0, 5.0, 10.0, 15.0]); 6],
        2,
        0,
        0,
        ParetoType::Discontinuous,
        Arc::new(eval),
    )
    .expect("truss definition is valid")
}

/// Quadratic matrix of the Mela problem over `z = (x1, x2, y1 .. y8)`.
pub const MELA_G: [[f64; 10]; 10] = [
    [1.0, -1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [-1.0, 2.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 3.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.0, 0.0, 0.0, 4.0, 0.0, 2.0, 0.0, 2.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 5.0, 2.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 6.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 7.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 10.0],
];
pub const MELA_C1: [f64; 10] = [-1.0, -1.0, 1.0, -10.0, 0.0, 1.0, -2.0, 0.0, 3.0, 0.0];
pub const MELA_C2: [f64; 10] = [1.0, 2.0, -1.0, 1.0, 5.0, -2.0, 0.0, 6.0, 0.0, -3.0];

/// Mela: a mildly nonlinear problem with eight binaries.
///
/// Variable order: continuous `(x1, x2)`, binary `(y1 .. y8)`.
pub fn mela() -> ProblemSpec {
    let eval = |x: &[f64], y: &[f64], f: &mut [f64], _: &mut [f64]| {
        let mut z = [0.0; 10];
        z[..2].copy_from_slice(x);
        z[2..].copy_from_slice(y);
        let mut quad = 0.0;
        for (i, row) in MELA_G.iter().enumerate() {
            if z[i] == 0.0 {
                continue;
            }
            let gz: f64 = row.iter().zip(&z).map(|(g, v)| g * v).sum();
            quad += z[i] * gz;
        }
        let lin1: f64 = MELA_C1.iter().zip(&z).map(|(c, v)| c * v).sum();
        let lin2: f64 = MELA_C2.iter().zip(&z).map(|(c, v)| c * v).sum();
        f[0] = 0.5 * quad + lin1;
        f[1] = lin2;
    };
    ProblemSpec::new(
        "mela",
        vec![(-1.0, 1.0); 2],
        vec![IntegerDomain::Binary; 8],
        2,
        0,
        0,
        ParetoType::Discontinuous,
        Arc::new(eval),
    )
    .expect("mela definition is valid")
}

/// Reading of the garbled `x2 9x3` term in the Tong problem's second
/// constraint.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TongVariant {
    /// `x2 - 9 x3`
    #[default]
    Minus,
    /// `x2 + 9 x3`
    Plus,
}

/// Tong: three continuous variables, three binaries and nine inequalities.
///
/// Variable order: continuous `(x1, x2, x3)`, binary `(y1, y2, y3)`.
/// The first constraint carries a stray parenthesis in its usual printed
/// form; it is read as `3 x1 - x2 + x3 + 2 y1 <= 0`.
pub fn tong(variant: TongVariant) -> ProblemSpec {
    let (sign, name) = match variant {
        TongVariant::Minus => (-1.0, "tong"),
        TongVariant::Plus => (1.0, "tong-plus"),
    };
    let eval = move |x: &[f64], y: &[f64], f: &mut [f64], c: &mut [f64]| {
        let (x1, x2, x3) = (x[0], x[1], x[2]);
        let (y1, y2, y3) = (y[0], y[1], y[2]);
        f[0] = x1 * x1 - x2 + x3 + 3.0 * y1 + 2.0 * y2 + y3;
        f[1] = 2.0 * x1 * x1 + x2 - 3.0 * x3 - 2.0 * y1 + y2 - 2.0 * y3;
        // g <= rhs written as c = rhs - g >= 0.
        c[0] = -(3.0 * x1 - x2 + x3 + 2.0 * y1);
        c[1] = 40.0 - (4.0 * x1 * x1 + 2.0 * x1 + x2 + sign * 9.0 * x3 + y1 + 7.0 * y2);
        c[2] = -(-x1 - 2.0 * x2 + 3.0 * x3 + 7.0 * y3);
        c[3] = 10.0 - (-x1 + 12.0 * y1);
        c[4] = 5.0 - (x1 - 2.0 * y1);
        c[5] = 20.0 - (-x2 + y2);
        c[6] = 40.0 - (x2 - y2);
        c[7] = 17.0 - (-x3 + y3);
        c[8] = 25.0 - (x3 - y3);
    };
    ProblemSpec::new(
        name,
        vec![(-100.0, 100.0); 3],
        vec![IntegerDomain::Binary; 3],
        2,
        9,
        0,
        ParetoType::Continuous,
        Arc::new(eval),
    )
    .expect("tong definition is valid")
}

/// Names accepted by [`by_name`].
pub const PROBLEM_NAMES: [&str; 5] = ["gear", "brake", "truss", "mela", "tong"];

/// Every shipped problem, in a fixed order.
pub fn registry() -> Vec<ProblemSpec> {
    vec![
        gear(),
        brake(),
        truss(),
        mela(),
        tong(TongVariant::default()),
    ]
}

/// Looks a shipped problem up by name. `tong-plus` selects the alternative
/// reading of the Tong constraint.
pub fn by_name(name: &str) -> Result<ProblemSpec> {
    match name {
        "gear" => Ok(gear()),
        "brake" => Ok(brake()),
        "truss" => Ok(truss()),
        "mela" => Ok(mela()),
        "tong" => Ok(tong(TongVariant::Minus)),
        "tong-plus" => Ok(tong(TongVariant::Plus)),
        "bearing" | "coupling" => Err(Error::UnknownProblem(format!(
            "{name} (needs unpublished catalogue tables)"
        ))),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}
