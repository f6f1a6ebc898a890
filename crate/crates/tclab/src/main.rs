use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use tclab::arbitrage::{self, Method};
use tclab::fatou::{self, CounterexampleConfig};
use tclab::lp::Mode;
use tclab::market::{Claim, ScenarioTree};
use tclab::pricing::{self, CpsOutcome};
use tclab::report::{self, Body, CpsNode, EfNode, HedgeNode, Na2Node, Report};
use tclab::superhedge;

#[derive(Parser)]
#[command(name = "tclab", version, about = "scenario-tree markets with transaction costs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// route all linear programs through exact rational arithmetic
    #[arg(long, global = true)]
    exact: bool,
    /// also write the JSON report to this path
    #[arg(long, global = true, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Primal,
    Dual,
    Both,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a market file and check all structural invariants
    Validate { market: PathBuf },
    /// Per-node friction diagnostics: margins, distances, growth constants
    CheckEf { market: PathBuf },
    /// No-arbitrage-of-second-kind check at every node
    CheckNa2 {
        market: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        method: MethodArg,
    },
    /// Search for a consistent price system on a subtree
    FindCps {
        market: PathBuf,
        /// subtree root node id (default: tree root)
        #[arg(long)]
        at: Option<u64>,
        /// run at every node of this time instead
        #[arg(long)]
        t0: Option<usize>,
        /// accept relaxed systems (closed dual cone) instead of strict ones
        #[arg(long)]
        lax: bool,
    },
    /// Price the cheapest terminal-claim superhedge and test attainability
    Superhedge {
        market: PathBuf,
        /// JSON file with the claim vector per leaf
        #[arg(long)]
        claim: PathBuf,
        #[arg(long)]
        at: Option<u64>,
        #[arg(long)]
        t0: Option<usize>,
    },
    /// Replication-norm sweep over truncations of the closure-failure market
    FatouSweep {
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        /// truncation levels, comma separated
        #[arg(long, value_delimiter = ',', default_values_t = vec![4usize, 8, 16])]
        d: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let ok = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return ExitCode::from(if ok { 0 } else { 1 });
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_market(path: &Path) -> Result<(ScenarioTree, String), String> {
    let digest = report::digest_file(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let tree = ScenarioTree::load(path).map_err(|e| e.to_string())?;
    Ok((tree, digest))
}

/// Nodes a `--at` / `--t0` pair selects, id ascending.
fn select_nodes(tree: &ScenarioTree, at: Option<u64>, t0: Option<usize>) -> Result<Vec<u64>, String> {
    match (at, t0) {
        (Some(_), Some(_)) => Err("pass --at or --t0, not both".into()),
        (Some(id), None) => {
            tree.node(id).map_err(|e| e.to_string())?;
            Ok(vec![id])
        }
        (None, Some(t)) => {
            if t > tree.horizon {
                return Err(format!("t0 = {t} exceeds the horizon {}", tree.horizon));
            }
            let mut ids: Vec<u64> = tree.nodes().filter(|n| n.t == t).map(|n| n.id).collect();
            ids.sort_unstable();
            Ok(ids)
        }
        (None, None) => Ok(vec![tree.root().id]),
    }
}

fn run(cli: &Cli) -> Result<ExitCode, String> {
    let start = Instant::now();
    let mode = if cli.exact { Mode::Exact } else { Mode::Float };
    let (command, digest, body, finding) = match &cli.cmd {
        Cmd::Validate { market } => {
            let (tree, digest) = load_market(market)?;
            let body = Body::Validate {
                ok: true,
                d: tree.d,
                horizon: tree.horizon,
                nodes: tree.num_nodes(),
                leaves: tree.leaves().len(),
            };
            (format!("validate {}", market.display()), Some(digest), body, false)
        }
        Cmd::CheckEf { market } => {
            let (tree, digest) = load_market(market)?;
            let ones = vec![1.0; tree.d];
            let mut nodes = Vec::new();
            let mut ids: Vec<u64> = tree.nodes().map(|n| n.id).collect();
            ids.sort_unstable();
            for id in ids {
                let n = tree.node(id).map_err(|e| e.to_string())?;
                let ef = n.cone.check_ef_conditions().map_err(|e| e.to_string())?;
                let delta_one = if cli.exact {
                    use num_traits::ToPrimitive;
                    n.cone
                        .interior_margin_exact(&ones)
                        .map_err(|e| e.to_string())?
                        .to_f64()
                        .unwrap_or(f64::NAN)
                } else {
                    ef.delta_one
                };
                nodes.push(EfNode {
                    id,
                    t: n.t,
                    min_lambda: ef.min_lambda,
                    uniform_friction_holds: ef.uniform_friction_holds,
                    delta_one,
                    one_interior: ef.one_interior,
                    weak_friction_holds: ef.weak_friction_holds,
                    distance_one: n.cone.dual_boundary_distance(&ones).map_err(|e| e.to_string())?,
                    k_one: n.cone.normal_cone_constant(&ones).map_err(|e| e.to_string())?,
                    alpha_one: n.cone.liquidation_bound_alpha(&ones).map_err(|e| e.to_string())?,
                });
            }
            (
                format!("check-ef {}", market.display()),
                Some(digest),
                Body::CheckEf { nodes },
                false,
            )
        }
        Cmd::CheckNa2 { market, method } => {
            let (tree, digest) = load_market(market)?;
            let (name, report) = match method {
                MethodArg::Primal => ("primal", arbitrage::check_na2_primal_in(&tree, mode)),
                MethodArg::Dual => ("dual", arbitrage::check_na2_dual_in(&tree, mode)),
                MethodArg::Both => ("both", arbitrage::check_na2_both_in(&tree, mode)),
            };
            let report = report.map_err(|e| e.to_string())?;
            debug_assert_eq!(report.method, match method {
                MethodArg::Primal => Method::Primal,
                MethodArg::Dual => Method::Dual,
                MethodArg::Both => Method::Both,
            });
            let mut nodes: Vec<Na2Node> = report
                .nodes
                .iter()
                .map(|v| Na2Node {
                    id: v.id,
                    t: v.t,
                    holds: v.holds,
                    witness_eta: v.witness.as_ref().map(|w| w.eta.clone()),
                    witness_xi: v.witness.as_ref().map(|w| report::sorted_map(&w.xi)),
                })
                .collect();
            nodes.sort_by_key(|v| v.id);
            let holds = report.holds;
            (
                format!("check-na2 {} --method {name}", market.display()),
                Some(digest),
                Body::CheckNa2 {
                    method: name.to_string(),
                    holds,
                    nodes,
                },
                !holds,
            )
        }
        Cmd::FindCps { market, at, t0, lax } => {
            let (tree, digest) = load_market(market)?;
            let mut results = Vec::new();
            let mut finding = false;
            for id in select_nodes(&tree, *at, *t0)? {
                let node = tree.node(id).map_err(|e| e.to_string())?;
                let outcome = pricing::find_cps(&tree, id, !lax, None, mode)
                    .map_err(|e| e.to_string())?;
                let row = match outcome {
                    CpsOutcome::Found(ps) => CpsNode {
                        at: id,
                        t0: node.t,
                        strict: !lax,
                        outcome: "found".into(),
                        margin: Some(ps.margin),
                        max_margin: None,
                        certificate_valid: None,
                        z: Some(report::sorted_map(&ps.z)),
                    },
                    CpsOutcome::Boundary { max_margin } => {
                        finding = true;
                        CpsNode {
                            at: id,
                            t0: node.t,
                            strict: !lax,
                            outcome: "boundary".into(),
                            margin: None,
                            max_margin: Some(max_margin),
                            certificate_valid: None,
                            z: None,
                        }
                    }
                    CpsOutcome::Infeasible { certificate_valid } => {
                        finding = true;
                        CpsNode {
                            at: id,
                            t0: node.t,
                            strict: !lax,
                            outcome: "infeasible".into(),
                            margin: None,
                            max_margin: None,
                            certificate_valid: Some(certificate_valid),
                            z: None,
                        }
                    }
                };
                results.push(row);
            }
            (
                format!("find-cps {}", market.display()),
                Some(digest),
                Body::FindCps { results },
                finding,
            )
        }
        Cmd::Superhedge { market, claim, at, t0 } => {
            let (tree, digest) = load_market(market)?;
            let claim = Claim::load(claim, &tree).map_err(|e| e.to_string())?;
            let mut results = Vec::new();
            let mut finding = false;
            for id in select_nodes(&tree, *at, *t0)? {
                match superhedge::attainability_in(&tree, id, &claim, mode) {
                    Ok(att) => {
                        let r = att.result;
                        results.push(HedgeNode {
                            at: id,
                            t0: r.t0,
                            price: r.price,
                            dual_value: r.dual_value,
                            gap: r.gap,
                            attainable: att.attainable,
                            strategy: report::sorted_map(&r.strategy.xi),
                            dual_z: report::sorted_map(&r.dual_system.z),
                        });
                    }
                    Err(superhedge::SuperhedgeError::Arbitrage) => {
                        finding = true;
                        eprintln!("node {id}: hedging problem unbounded, the subtree admits an arbitrage");
                    }
                    Err(e) => return Err(e.to_string()),
                }
            }
            (
                format!("superhedge {}", market.display()),
                Some(digest),
                Body::Superhedge { results },
                finding,
            )
        }
        Cmd::FatouSweep { eps, d, n } => {
            for &dv in d {
                CounterexampleConfig::new(dv, *eps, *n).map_err(|e| e.to_string())?;
            }
            let rows = fatou::replication_norm_sweep_in(*eps, d, mode).map_err(|e| e.to_string())?;
            let finding = rows.iter().any(|r| r.na2_holds == Some(false));
            (
                format!(
                    "fatou-sweep --eps {eps} --d {} --n {n}",
                    d.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
                ),
                None,
                Body::FatouSweep {
                    eps: *eps,
                    n: *n,
                    rows,
                },
                finding,
            )
        }
    };
    let report = Report::new(
        command,
        digest,
        cli.exact,
        start.elapsed().as_millis() as u64,
        body,
    );
    let json = report.to_json();
    print!("{json}");
    if let Some(path) = &cli.report {
        std::fs::write(path, &json).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(ExitCode::from(if finding { 2 } else { 0 }))
}
