//! Acceptance gate: each test checks one numbered criterion end to end
//! against independent oracles and prints a single PASS line on success.

use std::collections::HashMap;
use std::time::Instant;

use num_rational::BigRational;
use num_traits::Zero;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use tclab::arbitrage::{self, Witness};
use tclab::cone::ConeSpec;
use tclab::fatou::{self, CounterexampleConfig};
use tclab::lp::{self, LpBuilder, LpStatus, Mode, Rel, Sense};
use tclab::market::{is_admissible, Claim, ScenarioTree, Strategy};
use tclab::pricing::{find_cps, verify_supermartingale, CpsOutcome};
use tclab::superhedge;

fn random_lambda(rng: &mut impl Rng, d: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            if i != j {
                l[i][j] = rng.gen_range(lo..=hi);
            }
        }
    }
    l
}

/// Shrinks direct costs under their two-leg alternatives so the bid-ask
/// matrix admits no cheaper indirect route; entries stay above `lo` as
/// long as lo <= (1 + lo)^2 - 1.
fn triangle_close(l: &mut [Vec<f64>]) {
    let d = l.len();
    loop {
        let mut changed = false;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let via = (1.0 + l[i][j]) * (1.0 + l[j][k]) - 1.0;
                    if via < l[i][k] {
                        l[i][k] = via;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
}

fn random_cone(rng: &mut impl Rng, d: usize, lo: f64, hi: f64) -> ConeSpec {
    let mut l = random_lambda(rng, d, lo, hi);
    triangle_close(&mut l);
    ConeSpec::new(l).unwrap()
}

fn random_member(rng: &mut impl Rng, cone: &ConeSpec) -> Vec<f64> {
    let d = cone.dim();
    let mut x = vec![0.0; d];
    for i in 0..d {
        for j in 0..d {
            if i != j && rng.gen_bool(0.4) {
                let a = rng.gen_range(0.0..2.0);
                x[i] += a * cone.big_lambda(i, j);
                x[j] -= a;
            }
        }
    }
    for xi in x.iter_mut() {
        if rng.gen_bool(0.4) {
            *xi += rng.gen_range(0.0..1.0);
        }
    }
    x
}

fn uniform_lambda(d: usize, eps: f64) -> Vec<Vec<f64>> {
    let mut m = vec![vec![eps; d]; d];
    for i in 0..d {
        m[i][i] = 0.0;
    }
    m
}

fn random_market(rng: &mut impl Rng, d: usize, horizon: usize) -> ScenarioTree {
    let mut nodes = vec![(
        0u64,
        0usize,
        None,
        1.0,
        vec![1.0; d],
        uniform_lambda(d, rng.gen_range(0.05..0.45)),
    )];
    let mut frontier = vec![(0u64, 1.0f64, vec![1.0; d])];
    let mut next_id = 1u64;
    for t in 1..=horizon {
        let mut next = Vec::new();
        for (pid, pp, ps) in frontier {
            let k = rng.gen_range(2..=3);
            for b in 0..k {
                let s: Vec<f64> = ps.iter().map(|v| v * rng.gen_range(0.7..1.4)).collect();
                let p = if b == k - 1 {
                    pp * (1.0 - (k - 1) as f64 / k as f64)
                } else {
                    pp / k as f64
                };
                nodes.push((
                    next_id,
                    t,
                    Some(pid),
                    p,
                    s.clone(),
                    uniform_lambda(d, rng.gen_range(0.05..0.45)),
                ));
                next.push((next_id, p, s));
                next_id += 1;
            }
        }
        frontier = next;
    }
    ScenarioTree::build(d, horizon, nodes).unwrap()
}

fn binomial(up: f64, down: f64, lambda: f64) -> ScenarioTree {
    ScenarioTree::build(
        2,
        1,
        vec![
            (0, 0, None, 1.0, vec![1.0, 1.0], uniform_lambda(2, lambda)),
            (1, 1, Some(0), 0.5, vec![1.0, up], uniform_lambda(2, lambda)),
            (2, 1, Some(0), 0.5, vec![1.0, down], uniform_lambda(2, lambda)),
        ],
    )
    .unwrap()
}

fn deterministic_growth(lambda: f64) -> ScenarioTree {
    ScenarioTree::build(
        2,
        1,
        vec![
            (0, 0, None, 1.0, vec![1.0, 1.0], uniform_lambda(2, lambda)),
            (1, 1, Some(0), 1.0, vec![1.0, 1.5], uniform_lambda(2, lambda)),
        ],
    )
    .unwrap()
}

/// One-variable LP oracles for the margin and the sup-norm boundary
/// distance of `u` relative to the dual cone faces.
fn margin_and_distance_by_lp(cone: &ConeSpec, u: &[f64]) -> (f64, f64) {
    let solve_max = |weights: &dyn Fn(f64) -> f64| -> f64 {
        let mut b = LpBuilder::new(Sense::Maximize);
        let m = b.free(1.0);
        for i in 0..cone.dim() {
            for j in 0..cone.dim() {
                if i != j {
                    let big = cone.big_lambda(i, j);
                    b.row(vec![(m, weights(big))], Rel::Le, u[i] * big - u[j]);
                }
            }
        }
        let sol = lp::solve(&b.build(), Mode::Float).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        sol.objective
    };
    let margin = solve_max(&|_| 1.0);
    let distance = solve_max(&|big| 1.0 + big).abs();
    (margin, distance)
}

#[test]
fn criterion_1_margin_and_distance_match_lp() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..200 {
        let d = rng.gen_range(2..=5);
        let cone = random_cone(&mut rng, d, 0.01, 1.0);
        let u: Vec<f64> = if case % 2 == 0 {
            (0..d).map(|_| rng.gen_range(0.2..2.0)).collect()
        } else {
            (0..d).map(|_| rng.gen_range(-1.0..2.0)).collect()
        };
        let (lp_margin, lp_distance) = margin_and_distance_by_lp(&cone, &u);
        let margin = cone.interior_margin(&u).unwrap();
        assert!((margin - lp_margin).abs() <= 1e-9, "case {case}");
        assert_eq!(margin > 0.0, lp_margin > 0.0, "case {case}");
        let distance = cone.dual_boundary_distance(&u).unwrap();
        assert!(
            (distance - lp_distance).abs() <= 1e-9,
            "case {case}: {distance} vs {lp_distance}"
        );
    }
    assert!(start.elapsed().as_secs() < 30);
    println!("criterion 1 (cone formulas vs LP, 200 cones): PASS");
}

#[test]
fn criterion_2_membership_agrees_with_extreme_ray_test() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for case in 0..200 {
        let d = rng.gen_range(2..=5);
        let cone = random_cone(&mut rng, d, 0.01, 1.0);
        let x: Vec<f64> = if case % 2 == 0 {
            random_member(&mut rng, &cone)
        } else {
            (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let (member, _) = cone.in_solvency_cone(&x, Mode::Exact).unwrap();
        let xq: Vec<BigRational> = x
            .iter()
            .map(|v| BigRational::from_float(*v).unwrap())
            .collect();
        let ray_member = cone
            .extreme_rays_dual_exact(8)
            .unwrap()
            .iter()
            .all(|z| {
                z.iter()
                    .zip(&xq)
                    .fold(BigRational::zero(), |acc, (a, b)| acc + a * b)
                    >= BigRational::zero()
            });
        assert_eq!(member, ray_member, "case {case}");
    }
    println!("criterion 2 (membership vs extreme rays, 200 pairs, exact): PASS");
}

#[test]
fn criterion_3_all_ones_margin_equals_min_cost_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for case in 0..50 {
        let d = rng.gen_range(2..=5);
        // dyadic eps keeps 1 + eps exactly representable
        let eps = rng.gen_range(2..=512) as f64 / 1024.0;
        // entries in [eps, 2 eps] never violate the triangle inequality,
        // since any two-leg route costs at least 2 eps + eps^2
        let mut lambda = random_lambda(&mut rng, d, eps, 2.0 * eps);
        let (i, j) = (rng.gen_range(0..d), rng.gen_range(0..d));
        let (i, j) = if i == j { (i, (i + 1) % d) } else { (i, j) };
        lambda[i][j] = eps;
        let cone = ConeSpec::new(lambda).unwrap();
        let ones = vec![1.0; d];
        let margin = cone.interior_margin_exact(&ones).unwrap();
        assert_eq!(margin, BigRational::from_float(eps).unwrap(), "case {case}");
        assert!(margin > BigRational::zero());
    }
    println!("criterion 3 (delta at all-ones equals min cost, exact, 50 cones): PASS");
}

#[test]
fn criterion_4_liquidation_bound_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut accepted = 0;
    while accepted < 500 {
        let d = rng.gen_range(2..=5);
        let cone = random_cone(&mut rng, d, 0.01, 1.0);
        let eta = random_member(&mut rng, &cone);
        let l1_eta: f64 = eta.iter().map(|v| v.abs()).sum();
        if l1_eta < 1e-6 {
            continue;
        }
        let scale = rng.gen_range(0.05..1.0);
        let a: Vec<f64> = random_member(&mut rng, &cone)
            .iter()
            .map(|v| v * scale)
            .collect();
        let rest: Vec<f64> = eta.iter().zip(&a).map(|(e, v)| e - v).collect();
        let (ok, _) = cone.in_solvency_cone(&rest, Mode::Float).unwrap();
        if !ok {
            continue;
        }
        // xi = -a lies in -K, eta in K, xi + eta in K
        let alpha = cone.liquidation_bound_alpha(&vec![1.0; d]).unwrap();
        let l1_xi: f64 = a.iter().map(|v| v.abs()).sum();
        assert!(
            l1_xi <= alpha * l1_eta + 1e-9,
            "violation: {l1_xi} > {alpha} * {l1_eta}"
        );
        accepted += 1;
    }
    println!("criterion 4 (l1 liquidation bound, 500 triples): PASS");
}

#[test]
fn criterion_5_na2_methods_agree() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut holds = 0;
    let mut fails = 0;
    for case in 0..100 {
        let d = rng.gen_range(2..=4);
        let horizon = rng.gen_range(1..=3);
        let tree = random_market(&mut rng, d, horizon);
        // check_na2_both errors if any per-node verdict disagrees
        let report = arbitrage::check_na2_both(&tree)
            .unwrap_or_else(|e| panic!("case {case}: {e}"));
        if report.holds {
            holds += 1;
        } else {
            fails += 1;
        }
    }
    assert!(holds > 0 && fails > 0, "corpus is one-sided: {holds}/{fails}");

    // crafted cases: three that hold ...
    let wide = ScenarioTree::build(
        2,
        1,
        vec![
            (0, 0, None, 1.0, vec![1.0, 1.0], uniform_lambda(2, 10.0)),
            (1, 1, Some(0), 0.5, vec![1.0, 1.3], uniform_lambda(2, 10.0)),
            (2, 1, Some(0), 0.5, vec![1.0, 0.8], uniform_lambda(2, 10.0)),
        ],
    )
    .unwrap();
    assert!(arbitrage::check_na2_both(&wide).unwrap().holds);
    assert!(arbitrage::check_na2_both(&binomial(1.2, 0.9, 0.1)).unwrap().holds);
    assert!(arbitrage::check_na2_both(&binomial(1.05, 0.95, 0.3)).unwrap().holds);

    // ... and three that fail
    let growth = deterministic_growth(0.1);
    let report = arbitrage::check_na2_both(&growth).unwrap();
    assert!(!report.holds);
    // eta = (-1, 1) is a sound witness: owing one unit of cash against one
    // of the asset is unacceptable at time 0 yet cured by the sure growth
    let witness = Witness {
        at: 0,
        eta: vec![-1.0, 1.0],
        xi: HashMap::from([(1u64, vec![1.0, -1.1])]),
    };
    assert!(arbitrage::witness_is_sound(&growth, &witness).unwrap());
    assert!(!arbitrage::check_na2_both(&deterministic_growth(0.01)).unwrap().holds);
    let late_growth = ScenarioTree::build(
        2,
        2,
        vec![
            (0, 0, None, 1.0, vec![1.0, 1.0], uniform_lambda(2, 0.1)),
            (1, 1, Some(0), 0.5, vec![1.0, 1.2], uniform_lambda(2, 0.1)),
            (2, 1, Some(0), 0.5, vec![1.0, 0.9], uniform_lambda(2, 0.1)),
            (3, 2, Some(1), 0.5, vec![1.0, 1.8], uniform_lambda(2, 0.1)),
            (4, 2, Some(2), 0.5, vec![1.0, 1.35], uniform_lambda(2, 0.1)),
        ],
    )
    .unwrap();
    let report = arbitrage::check_na2_both(&late_growth).unwrap();
    assert!(!report.holds);
    // the failure sits at the intermediate nodes, not the root-time leaves
    assert!(report.nodes.iter().any(|v| v.t == 1 && !v.holds));

    assert!(start.elapsed().as_secs() < 300);
    println!("criterion 5 (NA2 methods agree, 100 random + 6 crafted): PASS");
}

#[test]
fn criterion_6_supermartingale_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut checked = 0;
    while checked < 100 {
        let d = rng.gen_range(2..=3);
        let horizon = rng.gen_range(1..=3);
        let tree = random_market(&mut rng, d, horizon);
        let ps = match find_cps(&tree, 0, true, None, Mode::Float) {
            Ok(CpsOutcome::Found(ps)) => ps,
            _ => continue, // not an NA2 market (or boundary); resample
        };
        let mut strategy = Strategy::zero(0);
        let mut total = 0.0;
        for id in 0..tree.num_nodes() as u64 {
            if rng.gen_bool(0.6) {
                let n = tree.node(id).unwrap();
                let xi: Vec<f64> = random_member(&mut rng, &n.cone)
                    .iter()
                    .map(|v| -v * 0.3)
                    .collect();
                total += xi.iter().map(|v| v.abs()).sum::<f64>();
                strategy.xi.insert(id, xi);
            }
        }
        assert!(is_admissible(&tree, &strategy).unwrap().0);
        // endow generously so terminal solvency holds and only the chain
        // inequalities are under test
        let eta = vec![10.0 * (1.0 + total); d];
        let report = verify_supermartingale(&tree, &strategy, &ps, &eta).unwrap();
        assert!(report.precondition_failures.is_empty(), "{report:?}");
        assert!(report.violations.is_empty(), "{report:?}");
        assert!(report.min_slack >= -1e-9, "{}", report.min_slack);
        checked += 1;
    }
    println!("criterion 6 (supermartingale chain, 100 pairs): PASS");
}

#[test]
fn criterion_7_superhedging_strong_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut priced = 0;
    for _ in 0..80 {
        let d = rng.gen_range(2..=4);
        let horizon = rng.gen_range(1..=3);
        let tree = random_market(&mut rng, d, horizon);
        let claim = Claim {
            g: tree
                .leaves()
                .into_iter()
                .map(|l| (l.id, (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()))
                .collect(),
        };
        match superhedge::superhedge_price(&tree, 0, &claim) {
            Ok(r) => {
                assert!(r.gap.abs() <= 1e-7, "gap {}", r.gap);
                priced += 1;
            }
            Err(superhedge::SuperhedgeError::Arbitrage) => {}
            Err(e) => panic!("{e}"),
        }
    }
    assert!(priced >= 50, "only {priced} bounded instances");

    // frictionless binomial: price = expectation under the unique
    // martingale weights q = (1 - down)/(up - down)
    let (up, down) = (1.25, 0.85);
    let tree = binomial(up, down, 0.0);
    let q = (1.0 - down) / (up - down);
    for _ in 0..20 {
        let g_up: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let g_dn: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let claim = Claim {
            g: HashMap::from([(1u64, g_up.clone()), (2u64, g_dn.clone())]),
        };
        let r = superhedge::superhedge_price(&tree, 0, &claim).unwrap();
        let expect = q * (g_up[0] + g_up[1]) + (1.0 - q) * (g_dn[0] + g_dn[1]);
        assert!((r.price - expect).abs() <= 1e-9, "{} vs {expect}", r.price);
    }
    println!("criterion 7 (superhedging duality gap <= 1e-7, frictionless oracle): PASS");
}

#[test]
fn criterion_8_counterexample_reproduction() {
    let start = Instant::now();
    for d in 2..=5 {
        assert!(fatou::na2_on_counterexample(d).unwrap().holds, "d = {d}");
        let config = CounterexampleConfig::new(d, 0.5, 1).unwrap();
        let report = fatou::verify_published_cones(&config).unwrap();
        assert!(report.matches, "cone rays differ at d = {d}");
    }
    let rows = fatou::replication_norm_sweep(0.5, &[4, 8, 16]).unwrap();
    for r in &rows {
        assert!(r.martingale_ok, "d = {}", r.d);
        let oracle: f64 = (2..=r.d).map(|i| (i as f64).powf(-0.5)).sum();
        assert!(
            (r.lp_min_norm - oracle).abs() <= 1e-6,
            "d = {}: {} vs {oracle}",
            r.d,
            r.lp_min_norm
        );
    }
    assert!(rows[0].lp_min_norm < rows[1].lp_min_norm);
    assert!(rows[1].lp_min_norm < rows[2].lp_min_norm);
    assert!(start.elapsed().as_secs() < 120);
    println!("criterion 8 (closure-failure market reproduction): PASS");
}

#[test]
fn criterion_9_generating_stress_grows() {
    let mut prev = 0.0;
    for d in [4usize, 8, 12, 16] {
        let mut lambda = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                if i < j {
                    lambda[i][j] = 1.0;
                }
            }
        }
        let cone = ConeSpec::new(lambda).unwrap();
        let score = cone
            .generating_stress_score()
            .unwrap()
            .expect("decomposition exists at finite d");
        assert!(score > prev, "d = {d}: {score} <= {prev}");
        prev = score;
    }
    println!("criterion 9 (asymmetric-cone stress bound strictly increasing): PASS");
}
