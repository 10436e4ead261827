mod common;

use std::time::Instant;

use common::*;
use delayprop_core::cases::{CaseTable, IngestOptions};
use delayprop_core::inference::{marginal, EvidenceSet};
use delayprop_core::network::Case;
use delayprop_core::synth::{default_scenario, generate, sweep_scenario};
use delayprop_core::Network;

fn ingest(records: &[delayprop_core::data::FlightLegRecord]) -> CaseTable {
    CaseTable::from_records(records, &IngestOptions { origin: Some("ORD".into()), ..Default::default() }).unwrap()
}

#[test]
fn empty_generation() {
    let out = generate(&default_scenario(), 0, 1).unwrap();
    assert!(out.records.is_empty() && out.cases.is_empty());
}

#[test]
fn records_rediscretize_to_true_bins() {
    for gt in [default_scenario(), sweep_scenario()] {
        let out = generate(&gt, 3000, 5).unwrap();
        let (cases, _) = gt.truth.discretize(&ingest(&out.records)).unwrap();
        assert_eq!(cases.len(), out.cases.len());
        let exact = cases
            .iter()
            .zip(&out.cases)
            .filter(|(got, want)| got.iter().zip(want.iter()).all(|(g, w)| *g == Some(*w)))
            .count();
        assert!(exact as f64 >= 0.999 * out.cases.len() as f64, "{exact} of {}", out.cases.len());
        for (vals, states) in out.values.iter().zip(&out.cases) {
            for (i, v) in vals.iter().enumerate() {
                if let (Some(v), Some(s)) = (v, gt.truth.scheme(i)) {
                    assert_eq!(s.bin_index(*v).unwrap(), states[i]);
                }
            }
        }
    }
}

#[test]
fn records_rederive_emitted_values() {
    let gt = default_scenario();
    let out = generate(&gt, 500, 2).unwrap();
    let table = ingest(&out.records);
    for (row, vals) in table.rows.iter().zip(&out.values) {
        for (i, v) in vals.iter().enumerate() {
            if let Some(v) = v {
                let col = table.column(gt.truth.name(i)).unwrap();
                let got = row[col].as_num().unwrap();
                assert!((got - v).abs() <= 1.0 / 60.0 + 1e-9, "{}: {got} vs {v}", gt.truth.name(i));
            }
        }
    }
}

#[test]
fn root_marginals_match_truth() {
    let gt = default_scenario();
    let n = 20_000;
    let out = generate(&gt, n, 13).unwrap();
    for i in (0..gt.truth.len()).filter(|&i| gt.truth.parents(i).is_empty()) {
        let mut freq = vec![0.0; gt.truth.cardinality(i)];
        for c in &out.cases {
            freq[c[i]] += 1.0 / n as f64;
        }
        let exact = gt.truth.table(i).probabilities(0);
        assert!(total_variation(&freq, &exact) < 0.02, "{}", gt.truth.name(i));
    }
}

#[test]
fn generation_is_deterministic() {
    let gt = default_scenario();
    assert_eq!(generate(&gt, 200, 7).unwrap(), generate(&gt, 200, 7).unwrap());
    assert_ne!(generate(&gt, 200, 7).unwrap().cases, generate(&gt, 200, 8).unwrap().cases);
}

/// Worst total variation between learned and true rows with at least `min_hits` observations.
fn worst_recovery_tv(n: usize, seed: u64, min_hits: usize) -> f64 {
    let gt = default_scenario();
    let out = generate(&gt, n, seed).unwrap();
    let (cases, _) = gt.truth.discretize(&ingest(&out.records)).unwrap();
    let (learned, _) = Network::build(gt.spec.clone()).unwrap().learn(&cases, gt.spec.case_weight).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..gt.truth.len() {
        let mut hits = vec![0usize; gt.truth.table(i).row_count()];
        for c in cases.iter().filter(|c| c.iter().all(Option::is_some)) {
            let states: Vec<usize> = c.iter().map(|s| s.unwrap()).collect();
            hits[gt.truth.row_of(i, &states)] += 1;
        }
        for (r, &h) in hits.iter().enumerate() {
            if h >= min_hits {
                let tv = total_variation(&learned.table(i).probabilities(r), &gt.truth.table(i).probabilities(r));
                worst = worst.max(tv);
            }
        }
    }
    worst
}

#[test]
fn learning_recovers_default_scenario() {
    let start = Instant::now();
    let tv = worst_recovery_tv(5000, 21, 50);
    assert!(tv < 0.05, "worst tv {tv}");
    assert!(start.elapsed().as_secs() < 120);
}

#[test]
fn every_node_reaches_gate_in_dest() {
    let net = default_scenario().truth;
    assert_eq!(net.len(), 12);
    let target = net.index_of("gate_in_dest").unwrap();
    for i in 0..net.len() {
        let mut frontier = vec![i];
        let mut seen = vec![false; net.len()];
        while let Some(v) = frontier.pop() {
            if !seen[v] {
                seen[v] = true;
                frontier.extend(net.children(v).iter().copied());
            }
        }
        assert!(seen[target], "{} cannot reach gate_in_dest", net.name(i));
    }
}

#[test]
fn late_arrival_raises_upstream_delays() {
    let net = default_scenario().truth;
    let gid = net.index_of("gate_in_dest").unwrap();
    let top = net.cardinality(gid) - 1;
    let e = EvidenceSet::hard(&net, &[(gid, top)]).unwrap();
    for name in ["taxi_out", "gate_out"] {
        let i = net.index_of(name).unwrap();
        let hi = net.scheme(i).unwrap().bin_index(30.0).unwrap();
        let tail = |p: &[f64]| p[hi..].iter().sum::<f64>();
        let prior = marginal(&net, &EvidenceSet::new(), i).unwrap();
        let post = marginal(&net, &e, i).unwrap();
        assert!(tail(&post) > tail(&prior), "{name}");
    }
}

#[test]
fn learner_spec_differs_from_truth_only_in_tables() {
    let gt = sweep_scenario();
    let prior = Network::build(gt.spec.clone()).unwrap();
    assert_eq!(prior.cards(), gt.truth.cards());
    let cases: Vec<Case> = Vec::new();
    assert_eq!(prior.learn(&cases, 1.0).unwrap().0, prior);
}
