//! Dense linear-programming kernel with feasibility, optimality and
//! infeasibility certificates. Two arithmetic modes: `f64` with tolerances
//! (default) and arbitrary-precision rationals (exact classification on
//! small instances).

mod scalar;
mod simplex;

pub use scalar::{rational_to_f64, Scalar};

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default feasibility tolerance for float mode.
pub const EPS_FEAS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rel {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct LpRow {
    pub coeffs: Vec<f64>,
    pub rel: Rel,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Float,
    Exact,
}

/// Solver output. `dual` holds one multiplier per input row: dual
/// multipliers on optimality, a Farkas certificate on infeasibility
/// (`sum_r dual[r] * rhs[r] > sup_x sum_r dual[r] * (row_r . x)` over the
/// variable bounds). Values are empty on `Unbounded`.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub dual: Vec<f64>,
    pub dual_objective: f64,
    /// Present in exact mode: the rational primal point and row multipliers.
    pub exact: Option<ExactSolution>,
}

#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub x: Vec<BigRational>,
    pub objective: BigRational,
    pub dual: Vec<BigRational>,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("dimension mismatch: row {row} has {got} coefficients, expected {expected}")]
    DimensionMismatch {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("variable {0}: lower bound exceeds upper bound")]
    BadBounds(usize),
    #[error("non-finite input at {0}")]
    NonFinite(String),
    #[error("simplex iteration limit exceeded")]
    IterationLimit,
}

impl LpProblem {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::DimensionMismatch {
                row: usize::MAX,
                got: self.lower.len(),
                expected: n,
            });
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(LpError::DimensionMismatch {
                    row: r,
                    got: row.coeffs.len(),
                    expected: n,
                });
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(LpError::NonFinite(format!("row {r}")));
            }
        }
        for (j, c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(LpError::NonFinite(format!("objective[{j}]")));
            }
        }
        for j in 0..n {
            if let (Some(l), Some(u)) = (self.lower[j], self.upper[j]) {
                if l > u {
                    return Err(LpError::BadBounds(j));
                }
            }
            if self.lower[j].is_some_and(|v| !v.is_finite())
                || self.upper[j].is_some_and(|v| !v.is_finite())
            {
                return Err(LpError::NonFinite(format!("bounds[{j}]")));
            }
        }
        Ok(())
    }

    /// Plain-text inequality dump for debugging.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let sense = match self.sense {
            Sense::Minimize => "min",
            Sense::Maximize => "max",
        };
        writeln!(s, "{sense} {:?}", self.objective).unwrap();
        for row in &self.rows {
            let rel = match row.rel {
                Rel::Le => "<=",
                Rel::Eq => "=",
                Rel::Ge => ">=",
            };
            writeln!(s, "  {:?} {rel} {}", row.coeffs, row.rhs).unwrap();
        }
        for j in 0..self.num_vars() {
            writeln!(s, "  x{j} in [{:?}, {:?}]", self.lower[j], self.upper[j]).unwrap();
        }
        s
    }
}

/// Incremental LP construction with sparse row input.
#[derive(Debug, Clone)]
pub struct LpBuilder {
    sense: Sense,
    objective: Vec<f64>,
    lower: Vec<Option<f64>>,
    upper: Vec<Option<f64>>,
    rows: Vec<(Vec<(usize, f64)>, Rel, f64)>,
}

impl LpBuilder {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            objective: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn var(&mut self, obj: f64, lower: Option<f64>, upper: Option<f64>) -> usize {
        self.objective.push(obj);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn nonneg(&mut self, obj: f64) -> usize {
        self.var(obj, Some(0.0), None)
    }

    pub fn free(&mut self, obj: f64) -> usize {
        self.var(obj, None, None)
    }

    pub fn row(&mut self, coeffs: Vec<(usize, f64)>, rel: Rel, rhs: f64) -> usize {
        self.rows.push((coeffs, rel, rhs));
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn build(self) -> LpProblem {
        let n = self.objective.len();
        let rows = self
            .rows
            .into_iter()
            .map(|(sparse, rel, rhs)| {
                let mut coeffs = vec![0.0; n];
                for (j, c) in sparse {
                    coeffs[j] += c;
                }
                LpRow { coeffs, rel, rhs }
            })
            .collect();
        LpProblem {
            sense: self.sense,
            objective: self.objective,
            rows,
            lower: self.lower,
            upper: self.upper,
        }
    }
}

/// Solve an LP in the requested arithmetic mode.
pub fn solve(problem: &LpProblem, mode: Mode) -> Result<LpSolution, LpError> {
    problem.validate()?;
    match mode {
        Mode::Float => {
            let out = simplex::solve_generic::<f64>(problem)?;
            Ok(LpSolution {
                status: out.status,
                x: out.x.clone(),
                objective: out.objective,
                dual: out.dual.clone(),
                dual_objective: out.dual_objective,
                exact: None,
            })
        }
        Mode::Exact => {
            let out = simplex::solve_generic::<BigRational>(problem)?;
            Ok(LpSolution {
                status: out.status,
                x: out.x.iter().map(rational_to_f64).collect(),
                objective: rational_to_f64(&out.objective),
                dual: out.dual.iter().map(rational_to_f64).collect(),
                dual_objective: rational_to_f64(&out.dual_objective),
                exact: Some(ExactSolution {
                    x: out.x,
                    objective: out.objective,
                    dual: out.dual,
                }),
            })
        }
    }
}

/// Checks that `dual` is a valid infeasibility certificate for `p`: with
/// q = A^T y, the multipliers must have the right signs per row relation,
/// q must vanish on unbounded variable directions, and y.b must exceed the
/// supremum of q.x over the variable box.
pub fn farkas_certifies(p: &LpProblem, dual: &[f64], tol: f64) -> bool {
    if dual.len() != p.rows.len() {
        return false;
    }
    let mut yb = 0.0;
    for (r, row) in p.rows.iter().enumerate() {
        match row.rel {
            Rel::Le if dual[r] > tol => return false,
            Rel::Ge if dual[r] < -tol => return false,
            _ => {}
        }
        yb += dual[r] * row.rhs;
    }
    let mut sup = 0.0;
    for j in 0..p.num_vars() {
        let q: f64 = p
            .rows
            .iter()
            .zip(dual)
            .map(|(row, yi)| row.coeffs[j] * yi)
            .sum();
        sup += match (p.lower[j], p.upper[j]) {
            (Some(l), Some(u)) => (q * l).max(q * u),
            (Some(l), None) if q <= tol => q * l,
            (None, Some(u)) if q >= -tol => q * u,
            (None, None) if q.abs() <= tol => 0.0,
            _ => return false,
        };
    }
    yb > sup - tol
}

/// Feasibility of a constraint system: `solve` with a zero objective.
pub fn feasible_point(problem: &LpProblem, mode: Mode) -> Result<LpSolution, LpError> {
    let mut p = problem.clone();
    p.objective = vec![0.0; p.num_vars()];
    p.sense = Sense::Minimize;
    solve(&p, mode)
}
