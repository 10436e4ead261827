mod common;

use std::collections::BTreeMap;

use common::*;
use delayprop_core::inference::{
    evidence_probability, forward_sample, log_likelihood, map_state, marginal, markov_blanket_mean, posterior,
    EvidenceSet, StateRef,
};
use delayprop_core::network::{Domain, NetworkSpec, NodeSpec, Prior, TableDoc, DEFAULT_ROW_LIMIT};
use delayprop_core::{BinScheme, Network};

fn evidence_of(net: &Network, findings: &Findings) -> EvidenceSet {
    let mut e = EvidenceSet::new();
    for (n, set) in findings {
        e.insert(net, *n, set.iter().copied()).unwrap();
    }
    e
}

#[test]
fn ve_matches_enumeration_on_random_networks() {
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let net = random_network(seed, 6, 5);
        let findings = random_findings(&net, seed);
        let e = evidence_of(&net, &findings);
        let z = brute_evidence(&net, &findings);
        assert!((evidence_probability(&net, &e) - z).abs() < 1e-9 * z.max(1.0));
        for node in 0..net.len() {
            let exact = brute_marginal(&net, &findings, node).unwrap();
            let ve = marginal(&net, &e, node).unwrap();
            worst = worst.max(exact.iter().zip(&ve).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
    }
    assert!(worst < 1e-9, "max abs diff {worst}");
}

#[test]
fn map_agrees_with_brute_force_argmax() {
    for seed in 100..140 {
        let net = random_network(seed, 5, 4);
        let findings = random_findings(&net, seed);
        let e = evidence_of(&net, &findings);
        for node in 0..net.len() {
            let exact = brute_marginal(&net, &findings, node).unwrap();
            let ve = marginal(&net, &e, node).unwrap();
            let best = exact.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let m = map_state(&ve).unwrap();
            assert!((exact[m] - best).abs() < 1e-9);
        }
    }
}

#[test]
fn vacuous_finding_equals_no_evidence() {
    let net = random_network(7, 6, 4);
    let none = posterior(&net, &EvidenceSet::new(), &[]).unwrap();
    let mut e = EvidenceSet::new();
    e.insert(&net, 1, 0..net.cardinality(1)).unwrap();
    let vac = posterior(&net, &e, &[]).unwrap();
    for (k, p) in &none.posteriors {
        for (a, b) in p.iter().zip(&vac.posteriors[k]) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    assert!(vac.evidence_logprob.abs() < 1e-12);
}

#[test]
fn posterior_vectors_are_distributions() {
    for seed in 200..220 {
        let net = random_network(seed, 6, 5);
        let e = evidence_of(&net, &random_findings(&net, seed));
        let post = posterior(&net, &e, &[]).unwrap();
        for p in post.posteriors.values() {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn log_likelihood_is_ln_joint() {
    for seed in 300..320 {
        let net = random_network(seed, 5, 4);
        for a in assignments(&net).iter().step_by(7) {
            let ll = log_likelihood(&net, a).unwrap();
            assert!((ll - joint(&net, a).ln()).abs() < 1e-12);
        }
    }
}

#[test]
fn single_node_log_likelihood() {
    let spec = NetworkSpec {
        nodes: vec![NodeSpec {
            name: "a".into(),
            domain: Domain::Categorical(vec!["x".into(), "y".into()]),
            parents: vec![],
            prior: Prior::Uniform,
            column: None,
        }],
        case_weight: 1.0,
        row_limit: DEFAULT_ROW_LIMIT,
        prior_strength: 1.0,
    };
    let net = Network::with_tables(spec, vec![TableDoc { node: "a".into(), rows: vec![vec![0.25, 0.75]] }]).unwrap();
    assert!((log_likelihood(&net, &[0]).unwrap() - (-1.3863)).abs() < 1e-4);
}

#[test]
fn sampling_converges_to_marginals() {
    let net = random_network(11, 6, 4);
    let n = 50_000;
    let samples = forward_sample(&net, n, 3);
    for node in 0..net.len() {
        let mut freq = vec![0.0; net.cardinality(node)];
        for s in &samples {
            freq[s[node]] += 1.0 / n as f64;
        }
        let exact = marginal(&net, &EvidenceSet::new(), node).unwrap();
        assert!(total_variation(&freq, &exact) < 0.02);
    }
    assert_eq!(samples, forward_sample(&net, n, 3));
    assert!(forward_sample(&net, 0, 3).is_empty());
}

#[test]
fn binary_root_frequency() {
    let spec = NetworkSpec {
        nodes: vec![NodeSpec {
            name: "a".into(),
            domain: Domain::Categorical(vec!["0".into(), "1".into()]),
            parents: vec![],
            prior: Prior::Uniform,
            column: None,
        }],
        case_weight: 1.0,
        row_limit: DEFAULT_ROW_LIMIT,
        prior_strength: 1.0,
    };
    let net = Network::with_tables(spec, vec![TableDoc { node: "a".into(), rows: vec![vec![0.3, 0.7]] }]).unwrap();
    let s = forward_sample(&net, 10_000, 1);
    let f = s.iter().filter(|c| c[0] == 1).count() as f64 / 1e4;
    assert!((f - 0.7).abs() < 0.02);
}

fn binned_chain() -> Network {
    let bins = BinScheme::new(vec![0.0, 15.0, 30.0], true, true).unwrap();
    let node = |name: &str, parents: &[&str]| NodeSpec {
        name: name.into(),
        domain: Domain::Binned(bins.clone()),
        parents: parents.iter().map(|p| p.to_string()).collect(),
        prior: Prior::Uniform,
        column: None,
    };
    let spec = NetworkSpec {
        nodes: vec![node("a", &[]), node("b", &["a"]), node("c", &["b"]), node("d", &[])],
        case_weight: 1.0,
        row_limit: DEFAULT_ROW_LIMIT,
        prior_strength: 1.0,
    };
    let r = |v: [f64; 4]| v.to_vec();
    Network::with_tables(
        spec,
        vec![
            TableDoc { node: "a".into(), rows: vec![r([0.1, 0.2, 0.3, 0.4])] },
            TableDoc {
                node: "b".into(),
                rows: vec![r([0.7, 0.1, 0.1, 0.1]), r([0.1, 0.6, 0.2, 0.1]), r([0.1, 0.1, 0.5, 0.3]), r([0.05, 0.05, 0.1, 0.8])],
            },
            TableDoc {
                node: "c".into(),
                rows: vec![r([0.4, 0.3, 0.2, 0.1]), r([0.25, 0.25, 0.25, 0.25]), r([0.1, 0.2, 0.3, 0.4]), r([0.0, 0.1, 0.2, 0.7])],
            },
            TableDoc { node: "d".into(), rows: vec![r([0.25, 0.25, 0.25, 0.25])] },
        ],
    )
    .unwrap()
}

#[test]
fn blanket_mean_matches_enumeration() {
    let net = binned_chain();
    let mids = net.scheme(1).unwrap().midpoints();
    for a in 0..4 {
        for c in 0..4 {
            let findings: Findings = vec![(0, [a].into()), (2, [c].into())];
            let p = brute_marginal(&net, &findings, 1).unwrap();
            let exact: f64 = p.iter().zip(&mids).map(|(w, m)| w * m).sum();
            for d in [None, Some(0), Some(3)] {
                let got = markov_blanket_mean(&net, &vec![Some(a), None, Some(c), d], 1).unwrap();
                assert!((got - exact).abs() < 1e-12);
            }
        }
    }
    // d has no neighbours
    let prior_mean: f64 = mids.iter().sum::<f64>() / 4.0;
    assert!((markov_blanket_mean(&net, &vec![Some(0), Some(1), Some(2), None], 3).unwrap() - prior_mean).abs() < 1e-12);
}

#[test]
fn evidence_by_label_and_index_agree() {
    let net = binned_chain();
    let by_label: BTreeMap<String, Vec<StateRef>> =
        [("c".to_string(), vec![StateRef::Label("[15,30)".into())])].into();
    let by_index: BTreeMap<String, Vec<StateRef>> = [("c".to_string(), vec![StateRef::Index(2)])].into();
    let a = posterior(&net, &EvidenceSet::from_refs(&net, &by_label).unwrap(), &[]).unwrap();
    let b = posterior(&net, &EvidenceSet::from_refs(&net, &by_index).unwrap(), &[]).unwrap();
    assert_eq!(a, b);
    let unknown: BTreeMap<String, Vec<StateRef>> = [("zz".to_string(), vec![StateRef::Index(0)])].into();
    assert!(EvidenceSet::from_refs(&net, &unknown).is_err());
}

#[test]
fn expected_value_lies_within_midpoints() {
    let net = binned_chain();
    let post = posterior(&net, &EvidenceSet::hard(&net, &[(2, 3)]).unwrap(), &[]).unwrap();
    let mids = net.scheme(0).unwrap().midpoints();
    for v in post.expected.values() {
        assert!(*v >= mids[0] && *v <= mids[3]);
    }
}
