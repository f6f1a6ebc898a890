use super::*;
use std::io::Write;

pub fn json_tree(text: &str) -> ScenarioTree {
    ScenarioTree::from_json(text).unwrap()
}

/// One-period, two-asset binomial market used across the test suite.
pub fn binomial(up: f64, down: f64, lambda: f64) -> ScenarioTree {
    let l = |d: usize| {
        let mut m = vec![vec![lambda; d]; d];
        for i in 0..d {
            m[i][i] = 0.0;
        }
        m
    };
    ScenarioTree::build(
        2,
        1,
        vec![
            (0, 0, None, 1.0, vec![1.0, 1.0], l(2)),
            (1, 1, Some(0), 0.5, vec![1.0, up], l(2)),
            (2, 1, Some(0), 0.5, vec![1.0, down], l(2)),
        ],
    )
    .unwrap()
}

#[test]
fn minimal_single_node_market() {
    let tree = json_tree(
        r#"{"d":1,"T":0,"nodes":[{"id":0,"t":0,"p":1.0,"S":[1.0],"lambda":[[0.0]]}]}"#,
    );
    assert_eq!(tree.d, 1);
    assert_eq!(tree.leaves().len(), 1);
    assert_eq!(tree.root().id, 0);
}

#[test]
fn diagonal_cost_rejected_by_name() {
    let err = ScenarioTree::from_json(
        r#"{"d":1,"T":0,"nodes":[{"id":0,"t":0,"p":1.0,"S":[1.0],"lambda":[[0.1]]}]}"#,
    )
    .unwrap_err();
    assert!(err.to_string().contains("diagonal cost nonzero"), "{err}");
}

#[test]
fn default_lambda_fills_missing_matrices() {
    let tree = json_tree(
        r#"{"d":2,"T":1,"default_lambda":[[0.0,0.2],[0.2,0.0]],
            "nodes":[
              {"id":0,"t":0,"p":1.0,"S":[1.0,1.0]},
              {"id":1,"t":1,"parent":0,"p":1.0,"S":[1.0,1.5],
               "lambda":[[0.0,0.1],[0.1,0.0]]}]}"#,
    );
    assert_eq!(tree.node(0).unwrap().cone.lambda()[0][1], 0.2);
    assert_eq!(tree.node(1).unwrap().cone.lambda()[0][1], 0.1);
}

#[test]
fn structural_violations_are_named() {
    // bad probabilities, dangling parent, childless interior node
    let err = ScenarioTree::from_json(
        r#"{"d":1,"T":2,"default_lambda":[[0.0]],
            "nodes":[
              {"id":0,"t":0,"p":1.0,"S":[1.0]},
              {"id":1,"t":1,"parent":0,"p":0.7,"S":[1.0]},
              {"id":2,"t":2,"parent":9,"p":0.7,"S":[1.0]}]}"#,
    )
    .unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("unknown parent 9"), "{msg}");
    assert!(msg.contains("has no children"), "{msg}");
    assert!(msg.contains("children probabilities sum to 0.7"), "{msg}");

    let err = ScenarioTree::from_json(
        r#"{"d":1,"T":0,"nodes":[{"id":0,"t":0,"p":1.0,"S":[-1.0],"lambda":[[0.0]]}]}"#,
    )
    .unwrap_err();
    assert!(err.to_string().contains("non-positive or non-finite price"));

    let err = ScenarioTree::from_json(
        r#"{"d":1,"T":0,"nodes":[{"id":0,"t":0,"p":0.0,"S":[1.0],"lambda":[[0.0]]}]}"#,
    )
    .unwrap_err();
    assert!(err.to_string().contains("non-positive probability"));
}

#[test]
fn load_from_disk_roundtrip() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write!(
        file,
        r#"{{"d":2,"T":1,"default_lambda":[[0.0,0.1],[0.1,0.0]],
            "nodes":[
              {{"id":0,"t":0,"p":1.0,"S":[1.0,1.0]}},
              {{"id":1,"t":1,"parent":0,"p":0.5,"S":[1.0,1.2]}},
              {{"id":2,"t":1,"parent":0,"p":0.5,"S":[1.0,0.9]}}]}}"#
    )
    .unwrap();
    let tree = ScenarioTree::load(file.path()).unwrap();
    assert_eq!(tree.num_nodes(), 3);
    assert_eq!(tree.children(0).unwrap().len(), 2);
    assert!(ScenarioTree::load(Path::new("/nonexistent.json")).is_err());
}

#[test]
fn portfolio_value_flow() {
    let tree = binomial(1.2, 0.9, 0.1);
    let zero = Strategy::zero(0);
    assert_eq!(portfolio_value(&tree, &zero, 1).unwrap(), vec![0.0, 0.0]);

    let mut s = Strategy::zero(0);
    s.xi.insert(0, vec![-1.1, 1.0]);
    let v = portfolio_value(&tree, &s, 1).unwrap();
    assert!((v[0] + 1.1).abs() < 1e-15 && (v[1] - 1.2).abs() < 1e-15);

    // flow composition: V(child) = V(parent) * S_child/S_parent + xi(child)
    let mut s2 = s.clone();
    s2.xi.insert(2, vec![0.0, -0.5]);
    let vp = portfolio_value(&tree, &s2, 0).unwrap();
    let n2 = tree.node(2).unwrap();
    let n0 = tree.node(0).unwrap();
    let v2 = portfolio_value(&tree, &s2, 2).unwrap();
    for i in 0..2 {
        let expect = vp[i] * n2.s[i] / n0.s[i] + s2.xi[&2][i];
        assert!((v2[i] - expect).abs() < 1e-15);
    }

    // strategies starting at t0 have zero value before t0
    let mut late = Strategy::zero(1);
    late.xi.insert(0, vec![5.0, 5.0]); // ignored: before t0
    assert_eq!(portfolio_value(&tree, &late, 0).unwrap(), vec![0.0, 0.0]);

    assert!(matches!(
        portfolio_value(&tree, &zero, 77),
        Err(MarketError::UnknownNode(77))
    ));
}

#[test]
fn admissibility_checks() {
    let tree = binomial(1.2, 0.9, 0.1);
    assert_eq!(
        is_admissible(&tree, &Strategy::zero(0)).unwrap(),
        (true, None)
    );

    // selling the transfer generator: xi = (-Lambda^{12}, 1)
    let mut s = Strategy::zero(0);
    s.xi.insert(0, vec![-1.1, 1.0]);
    assert_eq!(is_admissible(&tree, &s).unwrap(), (true, None));

    // money cannot be thrown in
    let mut s = Strategy::zero(0);
    s.xi.insert(0, vec![0.1, 0.0]);
    assert_eq!(is_admissible(&tree, &s).unwrap(), (false, Some(0)));
}

#[test]
fn claim_validation() {
    let tree = binomial(1.2, 0.9, 0.1);
    let good = Claim {
        g: [(1, vec![1.0, 0.0]), (2, vec![0.0, 1.0])].into(),
    };
    good.validate(&tree).unwrap();
    assert_eq!(good.at(1), &[1.0, 0.0]);

    let bad = Claim {
        g: [(0, vec![1.0, 0.0]), (1, vec![1.0])].into(),
    };
    let msg = bad.validate(&tree).unwrap_err().to_string();
    assert!(msg.contains("not a leaf"), "{msg}");
    assert!(msg.contains("has length 1"), "{msg}");
    assert!(msg.contains("missing at leaf 2"), "{msg}");
}
