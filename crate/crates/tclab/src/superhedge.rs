//! Superhedging a terminal claim from a start node: the cheapest initial
//! amount of asset-1 money whose carried value, plus admissible trading,
//! dominates the claim in the terminal solvency cones. The dual linear
//! program maximizes the expected claim value against relaxed dual systems
//! normalized by Z^1 = 1 at the start node; strong LP duality makes the
//! two values coincide.
//!
//! The dual relaxes "Z in K' \ {0}" to the closed cone K': on a finite
//! tree the objective is continuous and K' \ {0} is dense in K', so the
//! suprema agree.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::cone::ConeError;
use crate::lp::{self, LpBuilder, LpStatus, Mode, Rel, Sense, EPS_FEAS};
use crate::market::{Claim, MarketError, ScenarioTree, Strategy};
use crate::pricing::PriceSystem;

/// Acceptable primal-dual gap.
pub const EPS_DUAL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum SuperhedgeError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error("lp failure: {0}")]
    Lp(#[from] lp::LpError),
    #[error("hedging problem unbounded below: the subtree admits an arbitrage")]
    Arbitrage,
    #[error("internal: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct HedgeResult {
    pub at: u64,
    pub t0: usize,
    /// minimal initial amount of asset-1 money at the start node
    pub price: f64,
    pub strategy: Strategy,
    pub dual_system: PriceSystem,
    pub dual_value: f64,
    pub gap: f64,
}

fn add_cone_member(
    b: &mut LpBuilder,
    comp: &mut [Vec<(usize, f64)>],
    cone: &crate::cone::ConeSpec,
    sign: f64,
) {
    let d = comp.len();
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let a = b.nonneg(0.0);
            comp[i].push((a, sign * cone.big_lambda(i, j)));
            comp[j].push((a, -sign));
        }
        let disp = b.nonneg(0.0);
        comp[i].push((disp, sign));
    }
}

/// Minimal x with x e_1 S_T/S^1_t + V_T - g in K_T at every subtree leaf,
/// for an admissible strategy on the subtree of `at`.
pub fn superhedge_price(
    tree: &ScenarioTree,
    at: u64,
    claim: &Claim,
) -> Result<HedgeResult, SuperhedgeError> {
    superhedge_price_in(tree, at, claim, Mode::Float)
}

pub fn superhedge_price_in(
    tree: &ScenarioTree,
    at: u64,
    claim: &Claim,
    mode: Mode,
) -> Result<HedgeResult, SuperhedgeError> {
    let d = tree.d;
    let u = tree.node(at)?;
    let nodes = tree.subtree(at)?;
    let leaves = tree.leaves_below(at)?;
    for leaf in &leaves {
        if !claim.g.contains_key(&leaf.id) {
            return Err(MarketError::Invalid(vec![format!(
                "claim missing at leaf {}",
                leaf.id
            )])
            .into());
        }
    }

    let mut b = LpBuilder::new(Sense::Minimize);
    let x = b.free(1.0);
    let mut xi_vars: HashMap<u64, Vec<usize>> = HashMap::new();
    for n in &nodes {
        let xi: Vec<usize> = (0..d).map(|_| b.free(0.0)).collect();
        // admissibility: xi + (member of K) = 0
        let mut comp: Vec<Vec<(usize, f64)>> = (0..d).map(|i| vec![(xi[i], 1.0)]).collect();
        add_cone_member(&mut b, &mut comp, &n.cone, 1.0);
        for row in comp {
            b.row(row, Rel::Eq, 0.0);
        }
        xi_vars.insert(n.id, xi);
    }
    for leaf in &leaves {
        let g = claim.at(leaf.id);
        let mut comp: Vec<Vec<(usize, f64)>> = (0..d).map(|_| Vec::new()).collect();
        comp[0].push((x, leaf.s[0] / u.s[0]));
        for n in tree.path(leaf.id)? {
            if n.t < u.t {
                continue;
            }
            for i in 0..d {
                comp[i].push((xi_vars[&n.id][i], leaf.s[i] / n.s[i]));
            }
        }
        add_cone_member(&mut b, &mut comp, &leaf.cone, -1.0);
        for (i, row) in comp.into_iter().enumerate() {
            b.row(row, Rel::Eq, g[i]);
        }
    }
    let primal = lp::solve(&b.build(), mode)?;
    match primal.status {
        LpStatus::Unbounded => return Err(SuperhedgeError::Arbitrage),
        LpStatus::Infeasible => {
            return Err(SuperhedgeError::Internal(
                "primal infeasible despite free x".into(),
            ))
        }
        LpStatus::Optimal => {}
    }
    let strategy = Strategy {
        t0: u.t,
        xi: xi_vars
            .iter()
            .map(|(id, vars)| (*id, vars.iter().map(|&v| primal.x[v]).collect()))
            .collect(),
    };

    // dual: max sum_l (p_l/p_u) Z_T(l) . g(l) over relaxed systems
    let mut b = LpBuilder::new(Sense::Maximize);
    let mut zvars: HashMap<u64, Vec<usize>> = HashMap::new();
    for n in &nodes {
        let obj: Vec<f64> = if n.t == tree.horizon {
            claim
                .at(n.id)
                .iter()
                .map(|gi| gi * n.p / u.p)
                .collect()
        } else {
            vec![0.0; d]
        };
        zvars.insert(n.id, (0..d).map(|i| b.nonneg(obj[i])).collect());
    }
    for n in &nodes {
        let zv = &zvars[&n.id];
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    b.row(
                        vec![(zv[i], n.cone.big_lambda(i, j)), (zv[j], -1.0)],
                        Rel::Ge,
                        0.0,
                    );
                }
            }
        }
        let kids = tree.children(n.id)?;
        if !kids.is_empty() {
            for i in 0..d {
                let mut coeffs = vec![(zv[i], n.s[i])];
                for c in &kids {
                    coeffs.push((zvars[&c.id][i], -(c.p / n.p) * c.s[i]));
                }
                b.row(coeffs, Rel::Eq, 0.0);
            }
        }
    }
    b.row(vec![(zvars[&at][0], 1.0)], Rel::Eq, 1.0);
    let dual = lp::solve(&b.build(), mode)?;
    if dual.status != LpStatus::Optimal {
        return Err(SuperhedgeError::Internal(format!(
            "dual LP status {:?}",
            dual.status
        )));
    }
    let z = zvars
        .iter()
        .map(|(id, vars)| (*id, vars.iter().map(|&v| dual.x[v]).collect()))
        .collect();
    let dual_system = PriceSystem {
        at,
        t0: u.t,
        strict: false,
        z,
        margin: 0.0,
    };
    Ok(HedgeResult {
        at,
        t0: u.t,
        price: primal.objective,
        strategy,
        dual_system,
        dual_value: dual.objective,
        gap: primal.objective - dual.objective,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Attainability {
    pub attainable: bool,
    pub price: f64,
    /// hedging strategy when attainable, positive-value dual system when not
    pub result: HedgeResult,
}

/// A claim is attainable from zero endowment iff its superhedging price is
/// at most zero; the dual system then certifies the negative case with a
/// strictly positive expected claim value.
pub fn attainability(
    tree: &ScenarioTree,
    at: u64,
    claim: &Claim,
) -> Result<Attainability, SuperhedgeError> {
    attainability_in(tree, at, claim, Mode::Float)
}

pub fn attainability_in(
    tree: &ScenarioTree,
    at: u64,
    claim: &Claim,
    mode: Mode,
) -> Result<Attainability, SuperhedgeError> {
    let result = superhedge_price_in(tree, at, claim, mode)?;
    Ok(Attainability {
        attainable: result.price <= EPS_FEAS.max(EPS_DUAL),
        price: result.price,
        result,
    })
}
