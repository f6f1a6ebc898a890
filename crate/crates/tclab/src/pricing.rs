//! Consistent price systems on subtrees as linear programs, and the
//! supermartingale verifier for admissible strategies.
//!
//! A consistent price system on the subtree of a node u is a dual state
//! Z(node) in K'(node) for every node, with Z S a componentwise martingale.
//! Strict systems keep Z interior to K'. Strictness cannot be written as an
//! LP constraint directly, so the solver maximizes an absolute margin m
//! with rows `delta_Z >= m` (strict) and `Z^i >= m` (both); the anchor or
//! the normalization Z^1(u) = 1 pins the scale, which makes the absolute
//! margin meaningful and the LP bounded.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cone::ConeError;
use crate::lp::{self, LpBuilder, LpStatus, Mode, Rel, Sense, EPS_FEAS};
use crate::market::{is_admissible, portfolio_value, MarketError, ScenarioTree, Strategy};

/// Margins at or below this are treated as boundary-only (no usable
/// system), above it as a genuine strictly-positive margin.
pub const EPS_STRICT: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum PricingError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error("lp failure: {0}")]
    Lp(#[from] lp::LpError),
    #[error("anchor has length {got}, market has d={d}")]
    AnchorDimension { got: usize, d: usize },
    #[error("anchor is not interior to the dual cone (margin {0})")]
    AnchorNotInterior(f64),
}

/// A (strictly) consistent price system on the subtree of `at`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriceSystem {
    /// subtree root node id
    pub at: u64,
    pub t0: usize,
    pub strict: bool,
    pub z: HashMap<u64, Vec<f64>>,
    /// min over subtree nodes of min_i Z^i and, for strict systems, of
    /// the dual-cone margin delta_Z
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub enum CpsOutcome {
    Found(PriceSystem),
    /// The constraint system is feasible but only with margin <= EPS_STRICT:
    /// nothing qualifies as a system in K' \ {0} (resp. int K').
    Boundary { max_margin: f64 },
    /// No system at all, with a solver infeasibility certificate that was
    /// re-checked independently.
    Infeasible { certificate_valid: bool },
}

impl PriceSystem {
    /// Re-checks every invariant directly, without trusting the LP that
    /// produced the system. Returns the recomputed margin.
    pub fn validate(&self, tree: &ScenarioTree) -> Result<f64, PricingError> {
        let mut margin = f64::INFINITY;
        for n in tree.subtree(self.at)? {
            let z = self
                .z
                .get(&n.id)
                .ok_or(MarketError::UnknownNode(n.id))?;
            if !n.cone.in_dual_cone_tol(z, 1e-7) {
                return Err(PricingError::Market(MarketError::Invalid(vec![format!(
                    "Z outside the dual cone at node {}",
                    n.id
                )])));
            }
            let min_comp = z.iter().cloned().fold(f64::INFINITY, f64::min);
            margin = margin.min(min_comp);
            if self.strict {
                margin = margin.min(n.cone.interior_margin(z)?);
            }
            let kids = tree.children(n.id)?;
            if kids.is_empty() {
                continue;
            }
            for i in 0..tree.d {
                let lhs = z[i] * n.s[i];
                let rhs: f64 = kids
                    .iter()
                    .map(|c| (c.p / n.p) * self.z[&c.id][i] * c.s[i])
                    .sum();
                if (lhs - rhs).abs() > 1e-7 * (1.0 + lhs.abs()) {
                    return Err(PricingError::Market(MarketError::Invalid(vec![format!(
                        "martingale violated at node {} component {i}: {lhs} vs {rhs}",
                        n.id
                    )])));
                }
            }
        }
        Ok(margin)
    }

    /// Pointwise mix `self + alpha * other`; the sum of a lax and a strict
    /// system is strict again.
    pub fn mix(&self, other: &PriceSystem, alpha: f64) -> PriceSystem {
        let mut z = HashMap::new();
        for (id, a) in &self.z {
            let b = &other.z[id];
            z.insert(
                *id,
                a.iter().zip(b).map(|(x, y)| x + alpha * y).collect(),
            );
        }
        PriceSystem {
            at: self.at,
            t0: self.t0,
            strict: self.strict || (other.strict && alpha > 0.0),
            z,
            margin: f64::NAN, // callers re-validate
        }
    }
}

/// Searches for a consistent price system on the subtree of `at`.
/// `anchor` fixes Z(at) to an interior point of K'(at); without it the
/// system is normalized by Z^1(at) = 1.
pub fn find_cps(
    tree: &ScenarioTree,
    at: u64,
    strict: bool,
    anchor: Option<&[f64]>,
    mode: Mode,
) -> Result<CpsOutcome, PricingError> {
    let root = tree.node(at)?;
    if let Some(eta) = anchor {
        if eta.len() != tree.d {
            return Err(PricingError::AnchorDimension {
                got: eta.len(),
                d: tree.d,
            });
        }
        let m = root.cone.interior_margin(eta)?;
        if m <= 0.0 {
            return Err(PricingError::AnchorNotInterior(m));
        }
    }

    let nodes = tree.subtree(at)?;
    let mut builder = LpBuilder::new(Sense::Maximize);
    let mut var: HashMap<u64, Vec<usize>> = HashMap::new();
    for n in &nodes {
        var.insert(n.id, (0..tree.d).map(|_| builder.nonneg(0.0)).collect());
    }
    let m = builder.nonneg(1.0);

    for n in &nodes {
        let zv = &var[&n.id];
        for i in 0..tree.d {
            for j in 0..tree.d {
                if i == j {
                    continue;
                }
                let mut coeffs = vec![(zv[i], n.cone.big_lambda(i, j)), (zv[j], -1.0)];
                if strict {
                    coeffs.push((m, -1.0));
                }
                builder.row(coeffs, Rel::Ge, 0.0);
            }
            builder.row(vec![(zv[i], 1.0), (m, -1.0)], Rel::Ge, 0.0);
        }
        let kids = tree.children(n.id)?;
        if !kids.is_empty() {
            for i in 0..tree.d {
                let mut coeffs = vec![(zv[i], n.s[i])];
                for c in &kids {
                    coeffs.push((var[&c.id][i], -(c.p / n.p) * c.s[i]));
                }
                builder.row(coeffs, Rel::Eq, 0.0);
            }
        }
    }
    match anchor {
        Some(eta) => {
            for i in 0..tree.d {
                builder.row(vec![(var[&at][i], 1.0)], Rel::Eq, eta[i]);
            }
        }
        None => {
            builder.row(vec![(var[&at][0], 1.0)], Rel::Eq, 1.0);
        }
    }

    let problem = builder.build();
    let sol = lp::solve(&problem, mode)?;
    match sol.status {
        LpStatus::Infeasible => Ok(CpsOutcome::Infeasible {
            certificate_valid: lp::farkas_certifies(&problem, &sol.dual, 1e-7),
        }),
        LpStatus::Unbounded => Err(PricingError::Lp(lp::LpError::NonFinite(
            "unbounded margin".into(),
        ))),
        LpStatus::Optimal => {
            if sol.objective <= EPS_STRICT {
                return Ok(CpsOutcome::Boundary {
                    max_margin: sol.objective,
                });
            }
            let mut z = HashMap::new();
            for n in &nodes {
                z.insert(n.id, var[&n.id].iter().map(|&k| sol.x[k]).collect());
            }
            let mut ps = PriceSystem {
                at,
                t0: root.t,
                strict,
                z,
                margin: 0.0,
            };
            ps.margin = ps.validate(tree)?;
            Ok(CpsOutcome::Found(ps))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SupermartingaleReport {
    pub ok: bool,
    /// tightest slack across both inequalities of the chain
    pub min_slack: f64,
    pub violations: Vec<String>,
    pub precondition_failures: Vec<String>,
}

/// Verifies, node by node, the supermartingale chain
/// `Z_s . V_{s-1} S_s/S_{s-1} >= Z_s . V_s >= E[Z_{s+1} . V_{s+1} | F_s]`
/// for an admissible strategy whose terminal value dominates `-eta S_T/S_t0`.
pub fn verify_supermartingale(
    tree: &ScenarioTree,
    strategy: &Strategy,
    ps: &PriceSystem,
    eta: &[f64],
) -> Result<SupermartingaleReport, PricingError> {
    let mut pre = Vec::new();
    let (adm, viol) = is_admissible(tree, strategy)?;
    if !adm {
        pre.push(format!("strategy not admissible at node {}", viol.unwrap()));
    }
    let root = tree.node(ps.at)?;
    for leaf in tree.leaves_below(ps.at)? {
        let v = portfolio_value(tree, strategy, leaf.id)?;
        let lb: Vec<f64> = (0..tree.d)
            .map(|i| v[i] + eta[i] * leaf.s[i] / root.s[i])
            .collect();
        let (ok, _) = leaf
            .cone
            .in_solvency_cone(&lb, Mode::Float)
            .map_err(|e| MarketError::Cone(leaf.id, e))?;
        if !ok {
            pre.push(format!(
                "terminal solvency fails at leaf {}: V_T + eta S_T/S_t0 not in K_T",
                leaf.id
            ));
        }
    }

    let mut min_slack = f64::INFINITY;
    let mut violations = Vec::new();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    for n in tree.subtree(ps.at)? {
        let z = &ps.z[&n.id];
        let v = portfolio_value(tree, strategy, n.id)?;
        if n.id != ps.at {
            let parent = tree.node(n.parent.unwrap())?;
            let vp = portfolio_value(tree, strategy, parent.id)?;
            let carried: Vec<f64> = (0..tree.d)
                .map(|i| vp[i] * n.s[i] / parent.s[i])
                .collect();
            let slack = dot(z, &carried) - dot(z, &v);
            min_slack = min_slack.min(slack);
            if slack < -EPS_FEAS * (1.0 + dot(z, &v).abs()) {
                violations.push(format!("trade inequality fails at node {}: {slack}", n.id));
            }
        }
        let kids = tree.children(n.id)?;
        if !kids.is_empty() {
            let mut cond = 0.0;
            for c in &kids {
                let vc = portfolio_value(tree, strategy, c.id)?;
                cond += (c.p / n.p) * dot(&ps.z[&c.id], &vc);
            }
            let slack = dot(z, &v) - cond;
            min_slack = min_slack.min(slack);
            if slack < -EPS_FEAS * (1.0 + cond.abs()) {
                violations.push(format!(
                    "conditional expectation fails at node {}: {slack}",
                    n.id
                ));
            }
        }
    }
    Ok(SupermartingaleReport {
        ok: pre.is_empty() && violations.is_empty(),
        min_slack,
        violations,
        precondition_failures: pre,
    })
}
