//! Finite scenario tree carrying adapted prices and transaction costs,
//! plus trading strategies, portfolio dynamics and claim ingestion.
//!
//! Adaptedness is structural: processes are maps on nodes, and the
//! filtration at time t is the node partition at t, so no measurability
//! check is needed or performed.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cone::{ConeError, ConeSpec};
use crate::lp::Mode;

pub const EPS_PROB: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error("cannot parse {0}: {1}")]
    Parse(String, serde_json::Error),
    #[error("invalid market:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
    #[error("unknown node id {0}")]
    UnknownNode(u64),
    #[error("node {0}: {1}")]
    Cone(u64, ConeError),
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: u64,
    pub t: usize,
    pub parent: Option<u64>,
    /// absolute probability of reaching this node
    pub p: f64,
    /// strictly positive prices, length d
    pub s: Vec<f64>,
    pub cone: ConeSpec,
}

#[derive(Debug, Clone)]
pub struct ScenarioTree {
    pub d: usize,
    pub horizon: usize,
    nodes: Vec<Node>,
    index: HashMap<u64, usize>,
    children: Vec<Vec<usize>>,
    root: usize,
}

#[derive(Debug, Deserialize, Serialize)]
struct MarketFile {
    d: usize,
    #[serde(rename = "T")]
    horizon: usize,
    #[serde(default)]
    default_lambda: Option<Vec<Vec<f64>>>,
    nodes: Vec<NodeFile>,
}

#[derive(Debug, Deserialize, Serialize)]
struct NodeFile {
    id: u64,
    t: usize,
    #[serde(default)]
    parent: Option<u64>,
    p: f64,
    #[serde(rename = "S")]
    s: Vec<f64>,
    #[serde(default)]
    lambda: Option<Vec<Vec<f64>>>,
}

impl ScenarioTree {
    pub fn load(path: &Path) -> Result<Self, MarketError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MarketError::Io(path.display().to_string(), e))?;
        let file: MarketFile = serde_json::from_str(&text)
            .map_err(|e| MarketError::Parse(path.display().to_string(), e))?;
        Self::from_file(file)
    }

    pub fn from_json(text: &str) -> Result<Self, MarketError> {
        let file: MarketFile = serde_json::from_str(text)
            .map_err(|e| MarketError::Parse("<inline>".into(), e))?;
        Self::from_file(file)
    }

    /// Build a tree directly; `nodes` entries are
    /// (id, t, parent, p, S, lambda).
    #[allow(clippy::type_complexity)]
    pub fn build(
        d: usize,
        horizon: usize,
        nodes: Vec<(u64, usize, Option<u64>, f64, Vec<f64>, Vec<Vec<f64>>)>,
    ) -> Result<Self, MarketError> {
        Self::from_file(MarketFile {
            d,
            horizon,
            default_lambda: None,
            nodes: nodes
                .into_iter()
                .map(|(id, t, parent, p, s, lambda)| NodeFile {
                    id,
                    t,
                    parent,
                    p,
                    s,
                    lambda: Some(lambda),
                })
                .collect(),
        })
    }

    fn from_file(file: MarketFile) -> Result<Self, MarketError> {
        let mut bad: Vec<String> = Vec::new();
        if file.d == 0 {
            bad.push("asset count must be >= 1".into());
        }
        let mut nodes = Vec::with_capacity(file.nodes.len());
        let mut index = HashMap::new();
        for nf in &file.nodes {
            let lambda = nf
                .lambda
                .clone()
                .or_else(|| file.default_lambda.clone());
            let cone = match lambda {
                None => {
                    bad.push(format!(
                        "node {}: no cost matrix and no default_lambda",
                        nf.id
                    ));
                    continue;
                }
                Some(l) => match ConeSpec::new(l) {
                    Ok(c) => c,
                    Err(e) => {
                        bad.push(format!("node {}: {e}", nf.id));
                        continue;
                    }
                },
            };
            if cone.dim() != file.d {
                bad.push(format!(
                    "node {}: cost matrix is {}x{}, market has d={}",
                    nf.id,
                    cone.dim(),
                    cone.dim(),
                    file.d
                ));
                continue;
            }
            if nf.s.len() != file.d {
                bad.push(format!(
                    "node {}: price vector has length {}, expected {}",
                    nf.id,
                    nf.s.len(),
                    file.d
                ));
                continue;
            }
            if nf.s.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                bad.push(format!("node {}: non-positive or non-finite price", nf.id));
            }
            if !nf.p.is_finite() || nf.p <= 0.0 {
                bad.push(format!("node {}: non-positive probability", nf.id));
            }
            if index.insert(nf.id, nodes.len()).is_some() {
                bad.push(format!("duplicate node id {}", nf.id));
                continue;
            }
            nodes.push(Node {
                id: nf.id,
                t: nf.t,
                parent: nf.parent,
                p: nf.p,
                s: nf.s.clone(),
                cone,
            });
        }
        if !bad.is_empty() {
            return Err(MarketError::Invalid(bad));
        }

        let mut children: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        let mut root = None;
        for (k, n) in nodes.iter().enumerate() {
            match n.parent {
                None => {
                    if n.t != 0 {
                        bad.push(format!("node {}: no parent but t={} != 0", n.id, n.t));
                    } else if root.replace(k).is_some() {
                        bad.push(format!("node {}: second root", n.id));
                    }
                }
                Some(pid) => match index.get(&pid) {
                    None => bad.push(format!("node {}: unknown parent {pid}", n.id)),
                    Some(&pk) => {
                        if nodes[pk].t + 1 != n.t {
                            bad.push(format!(
                                "node {}: parent at t={}, expected t={}",
                                n.id,
                                nodes[pk].t,
                                n.t.saturating_sub(1)
                            ));
                        }
                        children[pk].push(k);
                    }
                },
            }
            if n.t > file.horizon {
                bad.push(format!("node {}: t={} beyond horizon {}", n.id, n.t, file.horizon));
            }
        }
        let root = match root {
            Some(r) => r,
            None => {
                bad.push("no root node at t=0".into());
                return Err(MarketError::Invalid(bad));
            }
        };
        if (nodes[root].p - 1.0).abs() > EPS_PROB {
            bad.push(format!("root probability {} != 1", nodes[root].p));
        }
        for (k, n) in nodes.iter().enumerate() {
            if n.t < file.horizon && children[k].is_empty() {
                bad.push(format!(
                    "node {}: interior node (t={} < {}) has no children",
                    n.id, n.t, file.horizon
                ));
            }
            if n.t == file.horizon && !children[k].is_empty() {
                bad.push(format!("node {}: terminal node has children", n.id));
            }
            if !children[k].is_empty() {
                let sum: f64 = children[k].iter().map(|&c| nodes[c].p).sum();
                if (sum - n.p).abs() > EPS_PROB * (1.0 + n.p) {
                    bad.push(format!(
                        "node {}: children probabilities sum to {sum}, parent has {}",
                        n.id, n.p
                    ));
                }
            }
        }
        if !bad.is_empty() {
            return Err(MarketError::Invalid(bad));
        }
        Ok(ScenarioTree {
            d: file.d,
            horizon: file.horizon,
            nodes,
            index,
            children,
            root,
        })
    }

    pub fn node(&self, id: u64) -> Result<&Node, MarketError> {
        self.index
            .get(&id)
            .map(|&k| &self.nodes[k])
            .ok_or(MarketError::UnknownNode(id))
    }

    pub fn root(&self) -> &Node {
        &self.nodes[self.root]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn children(&self, id: u64) -> Result<Vec<&Node>, MarketError> {
        let &k = self.index.get(&id).ok_or(MarketError::UnknownNode(id))?;
        Ok(self.children[k].iter().map(|&c| &self.nodes[c]).collect())
    }

    /// Path from the root to `id`, inclusive.
    pub fn path(&self, id: u64) -> Result<Vec<&Node>, MarketError> {
        let mut rev = Vec::new();
        let mut cur = self.node(id)?;
        loop {
            rev.push(cur);
            match cur.parent {
                Some(p) => cur = self.node(p)?,
                None => break,
            }
        }
        rev.reverse();
        Ok(rev)
    }

    /// Nodes of the subtree rooted at `id`, in breadth-first order.
    pub fn subtree(&self, id: u64) -> Result<Vec<&Node>, MarketError> {
        let &start = self.index.get(&id).ok_or(MarketError::UnknownNode(id))?;
        let mut out = Vec::new();
        let mut queue = vec![start];
        while let Some(k) = queue.pop() {
            out.push(&self.nodes[k]);
            queue.extend(&self.children[k]);
        }
        out.sort_by_key(|n| (n.t, n.id));
        Ok(out)
    }

    pub fn leaves(&self) -> Vec<&Node> {
        self.nodes.iter().filter(|n| n.t == self.horizon).collect()
    }

    pub fn leaves_below(&self, id: u64) -> Result<Vec<&Node>, MarketError> {
        Ok(self
            .subtree(id)?
            .into_iter()
            .filter(|n| n.t == self.horizon)
            .collect())
    }
}

/// Trading increments in money units: xi(node) is the net amount added to
/// each account at that node. Nodes absent from the map trade nothing.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Strategy {
    pub t0: usize,
    pub xi: HashMap<u64, Vec<f64>>,
}

impl Strategy {
    pub fn zero(t0: usize) -> Self {
        Strategy {
            t0,
            xi: HashMap::new(),
        }
    }

    pub fn xi_at(&self, node: &Node, d: usize) -> Vec<f64> {
        if node.t < self.t0 {
            return vec![0.0; d];
        }
        self.xi.get(&node.id).cloned().unwrap_or_else(|| vec![0.0; d])
    }
}

/// Terminal claim: a money-unit position per leaf.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Claim {
    pub g: HashMap<u64, Vec<f64>>,
}

impl Claim {
    pub fn load(path: &Path, tree: &ScenarioTree) -> Result<Self, MarketError> {
        #[derive(Deserialize)]
        struct ClaimFile {
            g: HashMap<u64, Vec<f64>>,
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| MarketError::Io(path.display().to_string(), e))?;
        let file: ClaimFile = serde_json::from_str(&text)
            .map_err(|e| MarketError::Parse(path.display().to_string(), e))?;
        let claim = Claim { g: file.g };
        claim.validate(tree)?;
        Ok(claim)
    }

    pub fn validate(&self, tree: &ScenarioTree) -> Result<(), MarketError> {
        let mut bad = Vec::new();
        for (id, v) in &self.g {
            match tree.node(*id) {
                Err(_) => bad.push(format!("claim references unknown node {id}")),
                Ok(n) if n.t != tree.horizon => {
                    bad.push(format!("claim node {id} is not a leaf"))
                }
                Ok(_) => {
                    if v.len() != tree.d {
                        bad.push(format!("claim at {id} has length {}", v.len()));
                    }
                    if v.iter().any(|x| !x.is_finite()) {
                        bad.push(format!("claim at {id} has non-finite entries"));
                    }
                }
            }
        }
        for leaf in tree.leaves() {
            if !self.g.contains_key(&leaf.id) {
                bad.push(format!("claim missing at leaf {}", leaf.id));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(MarketError::Invalid(bad))
        }
    }

    pub fn at(&self, leaf: u64) -> &[f64] {
        &self.g[&leaf]
    }
}

/// V_t = sum over ancestors s <= t of xi_s * S_t / S_s, componentwise.
/// Computed by the flow recursion V = V_parent * S/S_parent + xi.
pub fn portfolio_value(
    tree: &ScenarioTree,
    strategy: &Strategy,
    node_id: u64,
) -> Result<Vec<f64>, MarketError> {
    let mut v = vec![0.0; tree.d];
    let mut prev_s: Option<&[f64]> = None;
    for n in tree.path(node_id)? {
        if let Some(ps) = prev_s {
            for i in 0..tree.d {
                v[i] *= n.s[i] / ps[i];
            }
        }
        let xi = strategy.xi_at(n, tree.d);
        for i in 0..tree.d {
            v[i] += xi[i];
        }
        prev_s = Some(&n.s);
    }
    Ok(v)
}

/// A strategy is admissible when -xi(node) lies in the node's solvency
/// cone everywhere. Returns the first violating node id otherwise.
pub fn is_admissible(
    tree: &ScenarioTree,
    strategy: &Strategy,
) -> Result<(bool, Option<u64>), MarketError> {
    let mut ids: Vec<u64> = tree.nodes().map(|n| n.id).collect();
    ids.sort_unstable();
    for id in ids {
        let n = tree.node(id)?;
        let xi = strategy.xi_at(n, tree.d);
        if xi.iter().all(|v| *v == 0.0) {
            continue;
        }
        let neg: Vec<f64> = xi.iter().map(|v| -v).collect();
        let (ok, _) = n
            .cone
            .in_solvency_cone(&neg, Mode::Float)
            .map_err(|e| MarketError::Cone(id, e))?;
        if !ok {
            return Ok((false, Some(id)));
        }
    }
    Ok((true, None))
}

#[cfg(test)]
pub(crate) mod tests;
