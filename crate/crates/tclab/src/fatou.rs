//! Lab for the one-period market family in which limits of attainable
//! payoffs escape the attainable set: a cash asset plus assets 2..d moving
//! to 1 +/- 1/i with fair coin flips, free transfers out of cash at time 0
//! and into cash at time 1, and exchange costs 1/(i-1) resp. 1 otherwise.
//! Replicating the series payoff h^1 = sum_i y^i (2 b^i - 1) with
//! y^i = i^{-(1+eps)} needs a time-0 integrand of l^1 norm
//! sum_{i=2..d} i^{-eps}, which diverges as d grows when eps <= 1. The
//! sweep exhibits that growth on truncations; approximants
//! g_n = (h^1 - 1/n, 0, ...) stay attainable at every d.

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arbitrage::{self, Na2Error, Na2Report};
use crate::cone::{ConeError, ConeSpec, DEFAULT_RAY_DIM_CAP};
use crate::lp::{self, LpBuilder, LpStatus, Mode, Rel, Sense, EPS_FEAS};
use crate::market::{MarketError, ScenarioTree};

pub const DEFAULT_NODE_BUDGET: usize = 1 << 16;

/// Leaf budget for generated trees; override with TCLAB_NODE_BUDGET.
pub fn node_budget() -> usize {
    std::env::var("TCLAB_NODE_BUDGET")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_NODE_BUDGET)
}

#[derive(Debug, Error)]
pub enum FatouError {
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("{leaves} leaves exceed the node budget {budget}")]
    BudgetExceeded { leaves: usize, budget: usize },
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error("lp failure: {0}")]
    Lp(#[from] lp::LpError),
    #[error(transparent)]
    Arbitrage(#[from] Na2Error),
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CounterexampleConfig {
    /// assets 1..=d, asset 1 is cash
    pub d: usize,
    /// exponent in the series weights y^i = i^{-(1+eps)}
    pub eps: f64,
    /// approximation index for g_n = (h^1 - 1/n, 0, ...)
    pub n: usize,
}

impl CounterexampleConfig {
    pub fn new(d: usize, eps: f64, n: usize) -> Result<Self, FatouError> {
        if d < 2 {
            return Err(FatouError::Config(format!("d = {d}, need d >= 2")));
        }
        if !(eps > 0.0) {
            return Err(FatouError::Config(format!("eps = {eps}, need eps > 0")));
        }
        if n < 1 {
            return Err(FatouError::Config("n must be >= 1".into()));
        }
        Ok(CounterexampleConfig { d, eps, n })
    }
}

/// Time-0 costs: transfers out of cash are free, otherwise 1/(i-1) from
/// asset i (1-based).
pub fn lambda_t0(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|r| {
            (0..d)
                .map(|c| if r == 0 || r == c { 0.0 } else { 1.0 / r as f64 })
                .collect()
        })
        .collect()
}

/// Time-1 costs: transfers into cash are free, otherwise 1.
pub fn lambda_t1(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|r| {
            (0..d)
                .map(|c| if c == 0 || r == c { 0.0 } else { 1.0 })
                .collect()
        })
        .collect()
}

fn num_leaves_within(d: usize, budget: usize) -> Result<usize, FatouError> {
    let leaves = 1usize << (d - 1);
    if leaves > budget {
        return Err(FatouError::BudgetExceeded { leaves, budget });
    }
    Ok(leaves)
}

fn num_leaves(d: usize) -> Result<usize, FatouError> {
    num_leaves_within(d, node_budget())
}

/// Payoff of the up/down pattern `k` (bit i-2 set means asset i moved up).
pub fn h1(d: usize, eps: f64, k: usize) -> f64 {
    (2..=d)
        .map(|i| {
            let y = (i as f64).powf(-(1.0 + eps));
            if k >> (i - 2) & 1 == 1 {
                y
            } else {
                -y
            }
        })
        .sum()
}

pub fn oracle_partial_sum(eps: f64, d: usize) -> f64 {
    (2..=d).map(|i| (i as f64).powf(-eps)).sum()
}

/// One-period tree: S_0 = 1, cash stays at 1, asset i moves to 1 +/- 1/i,
/// one leaf per sign pattern with probability 2^{-(d-1)}.
pub fn build_counterexample(config: &CounterexampleConfig) -> Result<ScenarioTree, FatouError> {
    let d = config.d;
    let leaves = num_leaves(d)?;
    let p = 1.0 / leaves as f64;
    let mut nodes = vec![(0u64, 0usize, None, 1.0, vec![1.0; d], lambda_t0(d))];
    for k in 0..leaves {
        let mut s = vec![1.0; d];
        for i in 2..=d {
            let step = 1.0 / i as f64;
            s[i - 1] = if k >> (i - 2) & 1 == 1 {
                1.0 + step
            } else {
                1.0 - step
            };
        }
        nodes.push((1 + k as u64, 1, Some(0), p, s, lambda_t1(d)));
    }
    Ok(ScenarioTree::build(d, 1, nodes)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeFormulaReport {
    pub d: usize,
    pub t0_rays: Vec<Vec<f64>>,
    pub t0_expected: Vec<Vec<f64>>,
    pub t1_rays: Vec<Vec<f64>>,
    pub t1_expected: Vec<Vec<f64>>,
    pub matches: bool,
}

fn normalized_sorted(rays: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = rays
        .into_iter()
        .map(|r| {
            let lead = r.iter().cloned().find(|v| v.abs() > EPS_FEAS).unwrap_or(1.0);
            r.iter().map(|v| v / lead).collect()
        })
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

fn interval_corners(d: usize, lo: impl Fn(usize) -> f64, hi: impl Fn(usize) -> f64) -> Vec<Vec<f64>> {
    (0..1usize << (d - 1))
        .map(|k| {
            let mut z = vec![1.0];
            for i in 2..=d {
                z.push(if k >> (i - 2) & 1 == 1 { hi(i) } else { lo(i) });
            }
            z
        })
        .collect()
}

fn ray_sets_agree(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.iter().zip(y).all(|(u, v)| (u - v).abs() <= EPS_FEAS))
}

/// Checks the closed-form dual cones of the built market: at time 0 the
/// dual is the product of bands z^i in z^1 [1 - 1/i, 1], at time 1 of
/// z^i in z^1 [1, 2]; the extreme rays are the interval corners.
pub fn verify_published_cones(config: &CounterexampleConfig) -> Result<ConeFormulaReport, FatouError> {
    let d = config.d;
    if d > DEFAULT_RAY_DIM_CAP {
        return Err(FatouError::Config(format!(
            "d = {d} exceeds the ray enumeration cap {DEFAULT_RAY_DIM_CAP}"
        )));
    }
    let exact_rays = |lambda: Vec<Vec<f64>>| -> Result<Vec<Vec<f64>>, FatouError> {
        let cone = ConeSpec::new(lambda)?;
        Ok(cone
            .extreme_rays_dual_exact(DEFAULT_RAY_DIM_CAP)?
            .into_iter()
            .map(|r| r.iter().map(|q| q.to_f64().unwrap()).collect())
            .collect())
    };
    let t0_rays = normalized_sorted(exact_rays(lambda_t0(d))?);
    let t1_rays = normalized_sorted(exact_rays(lambda_t1(d))?);
    let t0_expected =
        normalized_sorted(interval_corners(d, |i| 1.0 - 1.0 / i as f64, |_| 1.0));
    let t1_expected = normalized_sorted(interval_corners(d, |_| 1.0, |_| 2.0));
    let matches =
        ray_sets_agree(&t0_rays, &t0_expected) && ray_sets_agree(&t1_rays, &t1_expected);
    Ok(ConeFormulaReport {
        d,
        t0_rays,
        t0_expected,
        t1_rays,
        t1_expected,
        matches,
    })
}

/// Both arbitrage checks on the built market; expensive beyond d = 5.
pub fn na2_on_counterexample(d: usize) -> Result<Na2Report, FatouError> {
    na2_on_counterexample_in(d, Mode::Float)
}

pub fn na2_on_counterexample_in(d: usize, mode: Mode) -> Result<Na2Report, FatouError> {
    if d > 5 {
        return Err(FatouError::Config(format!("d = {d}, NA2 check capped at 5")));
    }
    let config = CounterexampleConfig::new(d, 0.5, 1)?;
    let tree = build_counterexample(&config)?;
    Ok(arbitrage::check_na2_both_in(&tree, mode)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub d: usize,
    /// minimal l^1 norm of the non-cash time-0 integrand
    pub lp_min_norm: f64,
    /// l^1 norm of the whole time-0 transfer at the optimum
    pub transfer_norm: f64,
    pub oracle_partial_sum: f64,
    /// None when d exceeds the arbitrage-check cap
    pub na2_holds: Option<bool>,
    /// smallest nonzero time-0 cost, 1/(d-1); decays even though every
    /// pair keeps lambda^{ij} + lambda^{ji} > 0
    pub min_cost_t0: f64,
    pub weak_friction_holds: bool,
    pub martingale_ok: bool,
}

/// Minimal replication norms for the truncated payoff, by a collapsed LP.
///
/// The leafwise requirement V_T(l) - (h^1(l), 0, ...) in K_T(l) is
/// equivalent, via the interval corners of K'_1, to
///   xi^1 + sum_i min over the leaf sign and the corner choice of
///     z xi^i (1 +/- 1/i) -/+ y^i  >=  0,   z in {1, 2},
/// and the minimum separates across assets because every sign pattern is
/// a leaf and every corner combination is a ray. One small LP per d
/// replaces 2^{d-1} leaf blocks; tests cross-check it against the full
/// leafwise program at small d.
fn min_replication_norms_in(eps: f64, d: usize, mode: Mode) -> Result<(f64, f64), FatouError> {
    num_leaves(d)?;
    let cone0 = ConeSpec::new(lambda_t0(d))?;
    let mut b = LpBuilder::new(Sense::Minimize);
    let xi: Vec<usize> = (0..d).map(|_| b.free(0.0)).collect();
    for i in 1..d {
        let u = b.nonneg(1.0);
        b.row(vec![(u, 1.0), (xi[i], -1.0)], Rel::Ge, 0.0);
        b.row(vec![(u, 1.0), (xi[i], 1.0)], Rel::Ge, 0.0);
    }
    // admissibility: -xi in K_0
    let mut comp: Vec<Vec<(usize, f64)>> = (0..d).map(|i| vec![(xi[i], -1.0)]).collect();
    for i in 0..d {
        for j in 0..d {
            if i != j {
                let a = b.nonneg(0.0);
                comp[i].push((a, -cone0.big_lambda(i, j)));
                comp[j].push((a, 1.0));
            }
        }
        let disp = b.nonneg(0.0);
        comp[i].push((disp, -1.0));
    }
    for row in comp {
        b.row(row, Rel::Eq, 0.0);
    }
    // worst-case terminal solvency, collapsed across leaves and dual rays
    let mut solvency = vec![(xi[0], 1.0)];
    for i in 2..=d {
        let y = (i as f64).powf(-(1.0 + eps));
        let w = b.free(0.0);
        solvency.push((w, 1.0));
        for (step, yv) in [(1.0 / i as f64, y), (-1.0 / i as f64, -y)] {
            for z in [1.0, 2.0] {
                b.row(vec![(xi[i - 1], z * (1.0 + step)), (w, -1.0)], Rel::Ge, yv);
            }
        }
    }
    b.row(solvency, Rel::Ge, 0.0);
    let sol = lp::solve(&b.build(), mode)?;
    if sol.status != LpStatus::Optimal {
        return Err(FatouError::Config(format!(
            "replication LP for d = {d} returned {:?}",
            sol.status
        )));
    }
    let transfer: f64 = xi.iter().map(|&v| sol.x[v].abs()).sum();
    Ok((sol.objective, transfer))
}

fn martingale_under_uniform_weights(tree: &ScenarioTree) -> Result<bool, FatouError> {
    let root = tree.root();
    let kids = tree.children(root.id)?;
    Ok((0..tree.d).all(|i| {
        let e: f64 = kids.iter().map(|c| c.p / root.p * c.s[i]).sum();
        (e - root.s[i]).abs() <= 1e-12 * tree.d as f64
    }))
}

fn weak_friction(lambda: &[Vec<f64>]) -> bool {
    let d = lambda.len();
    (0..d).all(|i| (0..d).all(|j| i == j || lambda[i][j] + lambda[j][i] > 0.0))
}

/// One row per truncation level d; `lp_min_norm` tracks the oracle
/// partial sum, which diverges for eps <= 1.
pub fn replication_norm_sweep(eps: f64, d_list: &[usize]) -> Result<Vec<SweepRow>, FatouError> {
    replication_norm_sweep_in(eps, d_list, Mode::Float)
}

pub fn replication_norm_sweep_in(
    eps: f64,
    d_list: &[usize],
    mode: Mode,
) -> Result<Vec<SweepRow>, FatouError> {
    if !(eps > 0.0) {
        return Err(FatouError::Config(format!("eps = {eps}, need eps > 0")));
    }
    let mut rows = Vec::new();
    for &d in d_list {
        if d < 2 {
            return Err(FatouError::Config(format!("d = {d}, need d >= 2")));
        }
        let (lp_min_norm, transfer_norm) = min_replication_norms_in(eps, d, mode)?;
        let na2_holds = if d <= 5 {
            Some(na2_on_counterexample_in(d, mode)?.holds)
        } else {
            None
        };
        let config = CounterexampleConfig::new(d, eps, 1)?;
        let tree = build_counterexample(&config)?;
        rows.push(SweepRow {
            d,
            lp_min_norm,
            transfer_norm,
            oracle_partial_sum: oracle_partial_sum(eps, d),
            na2_holds,
            min_cost_t0: 1.0 / (d - 1) as f64,
            weak_friction_holds: weak_friction(&lambda_t0(d)) && weak_friction(&lambda_t1(d)),
            martingale_ok: martingale_under_uniform_weights(&tree)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
pub(crate) mod tests;
