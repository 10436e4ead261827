//! Test oracles: random small networks and brute-force enumeration of the full joint.
#![allow(dead_code)]

use std::collections::BTreeSet;

use delayprop_core::network::{Domain, NetworkSpec, NodeSpec, Prior, TableDoc, DEFAULT_ROW_LIMIT};
use delayprop_core::Network;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random DAG with at most `max_nodes` categorical nodes of 2..=`max_states` states and random
/// strictly positive tables.
pub fn random_network(seed: u64, max_nodes: usize, max_states: usize) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_nodes);
    let cards: Vec<usize> = (0..n).map(|_| rng.random_range(2..=max_states)).collect();
    let mut nodes = Vec::new();
    let mut tables = Vec::new();
    for i in 0..n {
        let mut parents: Vec<usize> = (0..i).filter(|_| rng.random_bool(0.5)).collect();
        parents.truncate(3);
        let rows: usize = parents.iter().map(|&p| cards[p]).product();
        let table: Vec<Vec<f64>> =
            (0..rows).map(|_| (0..cards[i]).map(|_| rng.random_range(0.05..1.0)).collect()).collect();
        nodes.push(NodeSpec {
            name: format!("x{i}"),
            domain: Domain::Categorical((0..cards[i]).map(|s| format!("s{s}")).collect()),
            parents: parents.iter().map(|p| format!("x{p}")).collect(),
            prior: Prior::Uniform,
            column: None,
        });
        tables.push(TableDoc { node: format!("x{i}"), rows: table });
    }
    let spec = NetworkSpec { nodes, case_weight: 1.0, row_limit: DEFAULT_ROW_LIMIT, prior_strength: 1.0 };
    Network::with_tables(spec, tables).unwrap()
}

/// Every joint assignment of `net` in lexicographic order.
pub fn assignments(net: &Network) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for i in 0..net.len() {
        out = out
            .into_iter()
            .flat_map(|a: Vec<usize>| {
                (0..net.cardinality(i)).map(move |s| {
                    let mut b = a.clone();
                    b.push(s);
                    b
                })
            })
            .collect();
    }
    out
}

pub fn joint(net: &Network, states: &[usize]) -> f64 {
    (0..net.len()).map(|i| net.conditional(i, states)).product()
}

/// Findings as (node, admissible states).
pub type Findings = Vec<(usize, BTreeSet<usize>)>;

fn admitted(findings: &Findings, a: &[usize]) -> bool {
    findings.iter().all(|(n, set)| set.contains(&a[*n]))
}

/// P(findings) by summing the joint.
pub fn brute_evidence(net: &Network, findings: &Findings) -> f64 {
    assignments(net).iter().filter(|a| admitted(findings, a)).map(|a| joint(net, a)).sum()
}

/// P(node | findings) by summing the joint; `None` when the findings have probability zero.
pub fn brute_marginal(net: &Network, findings: &Findings, node: usize) -> Option<Vec<f64>> {
    let mut p = vec![0.0; net.cardinality(node)];
    for a in assignments(net).iter().filter(|a| admitted(findings, a)) {
        p[a[node]] += joint(net, a);
    }
    let z: f64 = p.iter().sum();
    (z > 0.0).then(|| p.into_iter().map(|v| v / z).collect())
}

/// Random findings on a random subset of nodes.
pub fn random_findings(net: &Network, seed: u64) -> Findings {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut out = Vec::new();
    for i in 0..net.len() {
        if rng.random_bool(0.4) {
            let mut set: BTreeSet<usize> = (0..net.cardinality(i)).filter(|_| rng.random_bool(0.5)).collect();
            if set.is_empty() {
                set.insert(rng.random_range(0..net.cardinality(i)));
            }
            out.push((i, set));
        }
    }
    out
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Composite Simpson integration of the standard normal density over `[lo, hi]`.
pub fn simpson_normal_mass(lo: f64, hi: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + k as f64 * h);
    }
    s * h / 3.0
}
