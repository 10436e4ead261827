//! Exact queries over a trained network: variable elimination with min-fill ordering, ancestral
//! sampling, case log-likelihood and Markov-blanket conditionals.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretize::BinScheme;
use crate::error::{Error, Result};
use crate::factor::Factor;
use crate::network::{Case, Network};
use crate::scalar::Real;

/// A state given by label (`"[15,30)"`, `"storm"`) or by index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateRef {
    Index(usize),
    Label(String),
}

/// Findings: for each observed node, the set of admissible states.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvidenceSet {
    findings: BTreeMap<usize, BTreeSet<usize>>,
}

impl EvidenceSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn findings(&self) -> &BTreeMap<usize, BTreeSet<usize>> {
        &self.findings
    }

    /// Restricts `node` to `states`; the set must be nonempty and within the node's states.
    pub fn insert<T: Real>(&mut self, net: &Network<T>, node: usize, states: impl IntoIterator<Item = usize>) -> Result<()> {
        if node >= net.len() {
            return Err(Error::InvalidEvidence(format!("node index {node} out of range")));
        }
        let set: BTreeSet<usize> = states.into_iter().collect();
        if set.is_empty() {
            return Err(Error::InvalidEvidence(format!("empty state set for `{}`", net.name(node))));
        }
        if let Some(&bad) = set.iter().find(|&&s| s >= net.cardinality(node)) {
            return Err(Error::InvalidEvidence(format!("state {bad} out of range for `{}`", net.name(node))));
        }
        self.findings.insert(node, set);
        Ok(())
    }

    pub fn hard<T: Real>(net: &Network<T>, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut e = Self::new();
        for &(node, state) in pairs {
            e.insert(net, node, [state])?;
        }
        Ok(e)
    }

    /// Builds evidence from node names and state references.
    pub fn from_refs<T: Real>(net: &Network<T>, refs: &BTreeMap<String, Vec<StateRef>>) -> Result<Self> {
        let mut e = Self::new();
        for (name, states) in refs {
            let node = net.index_of(name).map_err(|_| Error::InvalidEvidence(format!("unknown node `{name}`")))?;
            let domain = &net.node(node).domain;
            let idx = states
                .iter()
                .map(|s| match s {
                    StateRef::Index(k) => Ok(*k),
                    StateRef::Label(l) => domain
                        .state_of(l)
                        .ok_or_else(|| Error::InvalidEvidence(format!("unknown state {l:?} for `{name}`"))),
                })
                .collect::<Result<Vec<_>>>()?;
            e.insert(net, node, idx)?;
        }
        Ok(e)
    }

    fn admits(&self, node: usize, state: usize) -> bool {
        self.findings.get(&node).is_none_or(|s| s.contains(&state))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct PosteriorSet<T> {
    pub posteriors: BTreeMap<String, Vec<T>>,
    /// Midpoint-weighted mean for binned nodes.
    pub expected: BTreeMap<String, T>,
    pub evidence_logprob: T,
}

/// CPT of node `i` as a factor, with findings on `i` zeroing inadmissible states.
fn cpt_factor<T: Real>(net: &Network<T>, i: usize, evidence: &EvidenceSet) -> Factor<T> {
    let mut vars: Vec<usize> = net.parents(i).to_vec();
    vars.push(i);
    vars.sort_unstable();
    let cards: Vec<usize> = vars.iter().map(|&v| net.cardinality(v)).collect();
    let mut factor = Factor { vars, cards, values: Vec::new() };
    let strides = factor.strides();
    let pos = |v: usize| factor.vars.iter().position(|&x| x == v).unwrap();
    let parent_strides: Vec<usize> = net.parents(i).iter().map(|&p| strides[pos(p)]).collect();
    let own_stride = strides[pos(i)];
    let table = net.table(i);
    let mut values = vec![T::zero(); factor.cards.iter().product()];
    for r in 0..table.row_count() {
        let base: usize = table.row_states(r).iter().zip(&parent_strides).map(|(s, st)| s * st).sum();
        let probs = table.probabilities(r);
        for (s, p) in probs.into_iter().enumerate() {
            if evidence.admits(i, s) {
                values[base + s * own_stride] = p;
            }
        }
    }
    factor.values = values;
    factor
}

/// Nodes whose CPTs can influence a query on `targets`: the targets and their ancestors.
fn relevant<T: Real>(net: &Network<T>, targets: impl IntoIterator<Item = usize>) -> Vec<bool> {
    let mut keep = vec![false; net.len()];
    let mut stack: Vec<usize> = targets.into_iter().collect();
    while let Some(v) = stack.pop() {
        if !keep[v] {
            keep[v] = true;
            stack.extend_from_slice(net.parents(v));
        }
    }
    keep
}

/// Min-fill elimination order over `vars`, ties broken by node name then index.
fn min_fill_order<T: Real>(net: &Network<T>, factors: &[Factor<T>], vars: &[usize]) -> Vec<usize> {
    let mut adj: BTreeMap<usize, BTreeSet<usize>> = vars.iter().map(|&v| (v, BTreeSet::new())).collect();
    for f in factors {
        for &a in &f.vars {
            for &b in &f.vars {
                if a != b {
                    if let Some(s) = adj.get_mut(&a) {
                        s.insert(b);
                    }
                }
            }
        }
    }
    let mut remaining: BTreeSet<usize> = vars.iter().copied().collect();
    let mut order = Vec::with_capacity(vars.len());
    while !remaining.is_empty() {
        let fill = |v: usize| -> usize {
            let nb: Vec<usize> = adj[&v].iter().copied().collect();
            let mut missing = 0;
            for (k, &a) in nb.iter().enumerate() {
                for &b in &nb[k + 1..] {
                    if !adj.get(&a).is_some_and(|s| s.contains(&b)) {
                        missing += 1;
                    }
                }
            }
            missing
        };
        let v = *remaining
            .iter()
            .min_by(|&&a, &&b| fill(a).cmp(&fill(b)).then_with(|| net.name(a).cmp(net.name(b))).then(a.cmp(&b)))
            .unwrap();
        let nb: Vec<usize> = adj[&v].iter().copied().collect();
        for &a in &nb {
            for &b in &nb {
                if a != b {
                    if let Some(s) = adj.get_mut(&a) {
                        s.insert(b);
                    }
                }
            }
        }
        for &a in &nb {
            if let Some(s) = adj.get_mut(&a) {
                s.remove(&v);
            }
        }
        adj.remove(&v);
        remaining.remove(&v);
        order.push(v);
    }
    order
}

/// Unnormalized factor over `keep` (or a scalar when `keep` is `None`), i.e. P(keep, evidence).
fn eliminate<T: Real>(net: &Network<T>, evidence: &EvidenceSet, keep: Option<usize>) -> Factor<T> {
    let targets = keep.into_iter().chain(evidence.findings.keys().copied());
    let rel = relevant(net, targets);
    let mut factors: Vec<Factor<T>> = (0..net.len()).filter(|&i| rel[i]).map(|i| cpt_factor(net, i, evidence)).collect();
    let hidden: Vec<usize> = (0..net.len()).filter(|&i| rel[i] && Some(i) != keep).collect();
    for v in min_fill_order(net, &factors, &hidden) {
        let (touching, rest): (Vec<_>, Vec<_>) = factors.into_iter().partition(|f| f.vars.contains(&v));
        factors = rest;
        if let Some(product) = touching.into_iter().reduce(|a, b| a.product(&b)) {
            factors.push(product.sum_out(v));
        }
    }
    factors.into_iter().fold(Factor::scalar(T::one()), |a, b| a.product(&b))
}

/// P(evidence) by variable elimination.
pub fn evidence_probability<T: Real>(net: &Network<T>, evidence: &EvidenceSet) -> T {
    eliminate(net, evidence, None).total()
}

/// Exact posterior marginal of one node.
pub fn marginal<T: Real>(net: &Network<T>, evidence: &EvidenceSet, node: usize) -> Result<Vec<T>> {
    let f = eliminate(net, evidence, Some(node));
    let z = f.total();
    if !(z > T::zero()) {
        return Err(Error::InconsistentEvidence);
    }
    let mut values = f.values;
    for v in &mut values {
        *v /= z;
    }
    Ok(values)
}

/// Posterior marginals of `query` nodes (all nodes when empty) given interval/hard findings.
pub fn posterior<T: Real>(net: &Network<T>, evidence: &EvidenceSet, query: &[usize]) -> Result<PosteriorSet<T>> {
    let z = evidence_probability(net, evidence);
    if !(z > T::zero()) {
        return Err(Error::InconsistentEvidence);
    }
    let all: Vec<usize> = (0..net.len()).collect();
    let query = if query.is_empty() { &all[..] } else { query };
    let mut out = PosteriorSet { posteriors: BTreeMap::new(), expected: BTreeMap::new(), evidence_logprob: z.ln() };
    for &q in query {
        if q >= net.len() {
            return Err(Error::InvalidArgument(format!("query node index {q} out of range")));
        }
        let p = marginal(net, evidence, q)?;
        if let Some(s) = net.scheme(q) {
            out.expected.insert(net.name(q).to_string(), expected_value(&p, s)?);
        }
        out.posteriors.insert(net.name(q).to_string(), p);
    }
    Ok(out)
}

/// Midpoint-weighted mean of a distribution over the bins of `scheme`.
pub fn expected_value<T: Real>(p: &[T], scheme: &BinScheme<T>) -> Result<T> {
    if p.len() != scheme.len() {
        return Err(Error::LengthMismatch { expected: scheme.len(), got: p.len() });
    }
    Ok(p.iter().zip(scheme.midpoints()).map(|(&w, m)| w * m).sum())
}

/// Most probable state; ties go to the lower index.
pub fn map_state<T: Real>(p: &[T]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (k, &v) in p.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best.map(|(k, _)| k)
}

/// `n` complete cases by ancestral sampling; identical seeds give identical sequences.
pub fn forward_sample<T: Real>(net: &Network<T>, n: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cumulative: Vec<Vec<Vec<f64>>> = (0..net.len())
        .map(|i| {
            let t = net.table(i);
            (0..t.row_count())
                .map(|r| {
                    let mut acc = 0.0;
                    t.probabilities(r)
                        .into_iter()
                        .map(|p| {
                            acc += p.as_f64();
                            acc
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let order = net.topological_order().to_vec();
    (0..n)
        .map(|_| {
            let mut states = vec![0usize; net.len()];
            for &i in &order {
                let row = &cumulative[i][net.row_of(i, &states)];
                let u: f64 = rng.random::<f64>() * row[row.len() - 1];
                states[i] = row.iter().position(|&c| u < c).unwrap_or(row.len() - 1);
            }
            states
        })
        .collect()
}

/// Sum over nodes of ln P(state | parent states); `-inf` when any factor is zero.
pub fn log_likelihood<T: Real>(net: &Network<T>, case: &[usize]) -> Result<T> {
    if case.len() != net.len() {
        return Err(Error::LengthMismatch { expected: net.len(), got: case.len() });
    }
    for (i, &s) in case.iter().enumerate() {
        if s >= net.cardinality(i) {
            return Err(Error::InvalidBin { index: s, bins: net.cardinality(i) });
        }
    }
    let mut total = T::zero();
    for i in 0..net.len() {
        let p = net.conditional(i, case);
        if p <= T::zero() {
            return Ok(T::neg_infinity());
        }
        total += p.ln();
    }
    Ok(total)
}

/// P(node | Markov blanket) computed from the node's own CPT and its children's CPTs.
pub fn blanket_distribution<T: Real>(net: &Network<T>, case: &Case, node: usize) -> Result<Vec<T>> {
    if case.len() != net.len() {
        return Err(Error::LengthMismatch { expected: net.len(), got: case.len() });
    }
    let mut states: Vec<usize> = case.iter().map(|s| s.unwrap_or(0)).collect();
    for b in net.markov_blanket(node) {
        if case[b].is_none() {
            return Err(Error::IncompleteCase { index: 0, node: net.name(b).to_string() });
        }
    }
    let mut weights = Vec::with_capacity(net.cardinality(node));
    for s in 0..net.cardinality(node) {
        states[node] = s;
        let mut w = net.conditional(node, &states);
        for &c in net.children(node) {
            w *= net.conditional(c, &states);
        }
        weights.push(w);
    }
    let z: T = weights.iter().copied().sum();
    if !(z > T::zero()) {
        return Err(Error::InconsistentEvidence);
    }
    Ok(weights.into_iter().map(|w| w / z).collect())
}

/// Conditional mean of a binned node given its Markov blanket.
pub fn markov_blanket_mean<T: Real>(net: &Network<T>, case: &Case, node: usize) -> Result<T> {
    let scheme = net
        .scheme(node)
        .ok_or_else(|| Error::InvalidArgument(format!("`{}` is not a binned node", net.name(node))))?;
    expected_value(&blanket_distribution(net, case, node)?, scheme)
}
