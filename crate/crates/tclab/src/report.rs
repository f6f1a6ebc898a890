//! JSON run reports: schema-versioned, deterministic for a fixed input
//! and arithmetic mode (timings aside). Per-node results are emitted in
//! ascending node-id order and embedded certificates carry enough data to
//! re-validate through library calls alone.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fatou::SweepRow;

pub const SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_file(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Nodewise vectors in canonical (id-ascending) order.
pub fn sorted_map(m: &HashMap<u64, Vec<f64>>) -> BTreeMap<u64, Vec<f64>> {
    m.iter().map(|(k, v)| (*k, v.clone())).collect()
}

pub fn to_hash_map(m: &BTreeMap<u64, Vec<f64>>) -> HashMap<u64, Vec<f64>> {
    m.iter().map(|(k, v)| (*k, v.clone())).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    /// sha256 of the market file, when the command reads one
    pub input_digest: Option<String>,
    pub arithmetic_mode: String,
    pub elapsed_ms: u64,
    pub body: Body,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Body {
    Validate {
        ok: bool,
        d: usize,
        horizon: usize,
        nodes: usize,
        leaves: usize,
    },
    CheckEf {
        nodes: Vec<EfNode>,
    },
    CheckNa2 {
        method: String,
        holds: bool,
        nodes: Vec<Na2Node>,
    },
    FindCps {
        results: Vec<CpsNode>,
    },
    Superhedge {
        results: Vec<HedgeNode>,
    },
    FatouSweep {
        eps: f64,
        n: usize,
        rows: Vec<SweepRow>,
    },
}

/// Friction diagnostics per node: the all-ones margin, the dual boundary
/// distance, and the normal-cone / liquidation constants at the all-ones
/// reference point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EfNode {
    pub id: u64,
    pub t: usize,
    pub min_lambda: f64,
    pub uniform_friction_holds: bool,
    pub delta_one: f64,
    pub one_interior: bool,
    pub weak_friction_holds: bool,
    pub distance_one: f64,
    pub k_one: f64,
    pub alpha_one: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Na2Node {
    pub id: u64,
    pub t: usize,
    pub holds: bool,
    pub witness_eta: Option<Vec<f64>>,
    pub witness_xi: Option<BTreeMap<u64, Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CpsNode {
    pub at: u64,
    pub t0: usize,
    pub strict: bool,
    /// "found", "boundary" or "infeasible"
    pub outcome: String,
    pub margin: Option<f64>,
    pub max_margin: Option<f64>,
    pub certificate_valid: Option<bool>,
    pub z: Option<BTreeMap<u64, Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HedgeNode {
    pub at: u64,
    pub t0: usize,
    pub price: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub attainable: bool,
    pub strategy: BTreeMap<u64, Vec<f64>>,
    pub dual_z: BTreeMap<u64, Vec<f64>>,
}

impl Report {
    pub fn new(
        command: String,
        input_digest: Option<String>,
        exact: bool,
        elapsed_ms: u64,
        body: Body,
    ) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            input_digest,
            arithmetic_mode: if exact { "exact" } else { "float" }.to_string(),
            elapsed_ms,
            body,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}
