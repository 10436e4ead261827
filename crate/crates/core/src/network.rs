//! Discrete network structure, regression-derived prior tables and Dirichlet-multinomial updating.

use serde::{Deserialize, Serialize};

use crate::cases::{CaseTable, Value};
use crate::discretize::BinScheme;
use crate::error::{Error, Result};
use crate::regression::{fit_piecewise, FitConfig, Input, PiecewiseRegression};
use crate::scalar::{std_normal_cdf, Real};

/// Default guard against parent sets whose tables explode.
pub const DEFAULT_ROW_LIMIT: usize = 200_000;

/// State space of a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub enum Domain<T> {
    #[serde(rename = "bins")]
    Binned(BinScheme<T>),
    #[serde(rename = "states")]
    Categorical(Vec<String>),
}

impl<T: Real> Domain<T> {
    pub fn len(&self) -> usize {
        match self {
            Domain::Binned(s) => s.len(),
            Domain::Categorical(states) => states.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            Domain::Binned(s) => s.labels(),
            Domain::Categorical(states) => states.clone(),
        }
    }

    pub fn scheme(&self) -> Option<&BinScheme<T>> {
        match self {
            Domain::Binned(s) => Some(s),
            Domain::Categorical(_) => None,
        }
    }

    /// State index for a label (bin label or category name).
    pub fn state_of(&self, label: &str) -> Option<usize> {
        match self {
            Domain::Binned(s) => (0..s.len()).find(|&k| s.label(k).is_ok_and(|l| l == label)),
            Domain::Categorical(states) => states.iter().position(|s| s == label),
        }
    }

    /// Predictor value a parent in `state` feeds into a regression mean.
    fn input(&self, state: usize) -> Input<'_, T> {
        match self {
            Domain::Binned(s) => Input::Num(s.midpoint(state).expect("state within domain")),
            Domain::Categorical(states) => Input::Label(&states[state]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub enum Prior<T> {
    Uniform,
    Regression { regression: PiecewiseRegression<T> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct NodeSpec<T> {
    pub name: String,
    #[serde(flatten)]
    pub domain: Domain<T>,
    #[serde(default)]
    pub parents: Vec<String>,
    #[serde(default = "uniform_prior")]
    pub prior: Prior<T>,
    /// Case-table column feeding this node; defaults to the node name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
}

fn uniform_prior<T>() -> Prior<T> {
    Prior::Uniform
}

impl<T: Real> NodeSpec<T> {
    pub fn column(&self) -> &str {
        self.column.as_deref().unwrap_or(&self.name)
    }
}

fn default_row_limit() -> usize {
    DEFAULT_ROW_LIMIT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct NetworkSpec<T> {
    pub nodes: Vec<NodeSpec<T>>,
    /// Weight of one observed case relative to a unit-strength prior row.
    pub case_weight: T,
    #[serde(default = "default_row_limit")]
    pub row_limit: usize,
    /// Total pseudo-count of every prior row.
    #[serde(default = "unit_strength")]
    pub prior_strength: T,
}

fn unit_strength<T: Real>() -> T {
    T::one()
}

/// Pseudo-counts of one node, one row per parent configuration in lexicographic order (the last
/// parent varies fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTable<T> {
    pub node: String,
    cardinality: usize,
    parent_cards: Vec<usize>,
    counts: Vec<T>,
}

impl<T: Real> ConditionalTable<T> {
    pub fn from_rows(node: &str, cardinality: usize, parent_cards: Vec<usize>, rows: Vec<Vec<T>>) -> Result<Self> {
        let expected: usize = parent_cards.iter().product();
        if rows.len() != expected {
            return Err(Error::LengthMismatch { expected, got: rows.len() });
        }
        let mut counts = Vec::with_capacity(expected * cardinality);
        for row in rows {
            if row.len() != cardinality {
                return Err(Error::LengthMismatch { expected: cardinality, got: row.len() });
            }
            if row.iter().any(|c| !(c.is_finite() && *c >= T::zero())) || row.iter().copied().sum::<T>() <= T::zero() {
                return Err(Error::InvalidArgument(format!("table `{node}` has a row without positive mass")));
            }
            counts.extend(row);
        }
        Ok(ConditionalTable { node: node.to_string(), cardinality, parent_cards, counts })
    }

    /// Uniform rows of total strength `strength`.
    pub fn uniform(node: &str, cardinality: usize, parent_cards: Vec<usize>, strength: T) -> Self {
        let rows: usize = parent_cards.iter().product();
        let cell = strength / T::from_usize(cardinality).unwrap();
        ConditionalTable { node: node.to_string(), cardinality, parent_cards, counts: vec![cell; rows * cardinality] }
    }

    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    pub fn parent_cards(&self) -> &[usize] {
        &self.parent_cards
    }

    pub fn row_count(&self) -> usize {
        self.counts.len() / self.cardinality
    }

    pub fn row_index(&self, parent_states: &[usize]) -> usize {
        parent_states
            .iter()
            .zip(&self.parent_cards)
            .fold(0, |acc, (&s, &c)| acc * c + s)
    }

    /// Parent states of row `r` (inverse of `row_index`).
    pub fn row_states(&self, mut r: usize) -> Vec<usize> {
        let mut states = vec![0; self.parent_cards.len()];
        for (slot, &c) in states.iter_mut().zip(&self.parent_cards).rev() {
            *slot = r % c;
            r /= c;
        }
        states
    }

    pub fn pseudo_counts(&self, row: usize) -> &[T] {
        &self.counts[row * self.cardinality..(row + 1) * self.cardinality]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.counts.chunks(self.cardinality)
    }

    /// Posterior-mean probabilities of one row.
    pub fn probabilities(&self, row: usize) -> Vec<T> {
        let counts = self.pseudo_counts(row);
        let total: T = counts.iter().copied().sum();
        counts.iter().map(|&c| c / total).collect()
    }

    pub fn probability(&self, row: usize, state: usize) -> T {
        let counts = self.pseudo_counts(row);
        counts[state] / counts.iter().copied().sum()
    }

    /// Adds `case_weight` to the pseudo-count of each `(parent states, state)` observation.
    /// All observations are validated before any count changes.
    pub fn dirichlet_update(&self, cases: &[(Vec<usize>, usize)], case_weight: T) -> Result<Self> {
        if !(case_weight > T::zero()) {
            return Err(Error::InvalidArgument("case weight must be positive".into()));
        }
        for (index, (parents, state)) in cases.iter().enumerate() {
            let ok = parents.len() == self.parent_cards.len()
                && parents.iter().zip(&self.parent_cards).all(|(s, c)| s < c)
                && *state < self.cardinality;
            if !ok {
                return Err(Error::IncompleteCase { index, node: self.node.clone() });
            }
        }
        let mut next = self.clone();
        for (parents, state) in cases {
            let row = self.row_index(parents);
            next.counts[row * self.cardinality + state] += case_weight;
        }
        Ok(next)
    }
}

/// Builds the prior table of a binned child from a regression normal: each row discretizes
/// N(mean at parent midpoints/labels, sigma) over the child bins, the outer bins absorbing the
/// infinite tails, and scales it to `strength`.
pub fn regression_to_cpt<T: Real>(
    model: &PiecewiseRegression<T>,
    child_name: &str,
    child: &BinScheme<T>,
    parents: &[(&str, &Domain<T>)],
    strength: T,
) -> Result<ConditionalTable<T>> {
    if !(model.sigma > T::zero()) {
        return Err(Error::NonPositiveSigma);
    }
    if !(strength > T::zero()) {
        return Err(Error::InvalidArgument("prior strength must be positive".into()));
    }
    for p in model.predictors() {
        if !parents.iter().any(|(name, _)| *name == p) {
            return Err(Error::PredictorNotParent { node: child_name.to_string(), predictor: p.to_string() });
        }
    }
    let parent_cards: Vec<usize> = parents.iter().map(|(_, d)| d.len()).collect();
    let boundaries: Vec<T> = (0..child.len() - 1).map(|k| child.bounds(k).unwrap().1).collect();
    let mut table = ConditionalTable::uniform(child_name, child.len(), parent_cards, strength);
    for r in 0..table.row_count() {
        let states = table.row_states(r);
        let mean = model.predict_mean(|name| {
            parents
                .iter()
                .position(|(p, _)| *p == name)
                .map(|i| parents[i].1.input(states[i]))
        })?;
        let row = normal_bin_probabilities(mean, model.sigma, &boundaries);
        for (slot, p) in table.counts[r * child.len()..(r + 1) * child.len()].iter_mut().zip(row) {
            *slot = p * strength;
        }
    }
    Ok(table)
}

/// Probabilities of N(mean, sigma) falling between consecutive `boundaries`, with the first and
/// last cells extending to -inf and +inf.
pub fn normal_bin_probabilities<T: Real>(mean: T, sigma: T, boundaries: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(boundaries.len() + 1);
    let mut prev = T::zero();
    for &b in boundaries {
        let c = std_normal_cdf((b - mean) / sigma);
        out.push((c - prev).max(T::zero()));
        prev = c;
    }
    out.push((T::one() - prev).max(T::zero()));
    out
}

/// A (possibly partial) assignment of states to every node, in spec order.
pub type Case = Vec<Option<usize>>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiscretizeReport {
    /// Per node: values present in the table that could not be mapped to a state.
    pub unmapped: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LearnReport {
    /// Per node: cases used and cases skipped for an incomplete family.
    pub used: Vec<usize>,
    pub skipped: Vec<usize>,
}

/// A validated network with one conditional table per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    spec: NetworkSpec<T>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    cards: Vec<usize>,
    order: Vec<usize>,
    tables: Vec<ConditionalTable<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct TableDoc<T> {
    pub node: String,
    pub rows: Vec<Vec<T>>,
}

/// The single JSON document holding a network config and, once trained, its tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ModelDocument<T> {
    pub nodes: Vec<NodeSpec<T>>,
    pub case_weight: T,
    #[serde(default = "default_row_limit")]
    pub row_limit: usize,
    #[serde(default = "unit_strength")]
    pub prior_strength: T,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tables: Vec<TableDoc<T>>,
}

impl<T: Real> Network<T> {
    /// Validates `spec` and initializes every table from its prior at `prior_strength`.
    pub fn build(spec: NetworkSpec<T>) -> Result<Self> {
        let (parents, children, cards, order) = validate(&spec)?;
        let mut tables = Vec::with_capacity(spec.nodes.len());
        for (i, node) in spec.nodes.iter().enumerate() {
            let pcards: Vec<usize> = parents[i].iter().map(|&p| cards[p]).collect();
            let table = match (&node.prior, &node.domain) {
                (Prior::Uniform, _) => ConditionalTable::uniform(&node.name, cards[i], pcards, spec.prior_strength),
                (Prior::Regression { regression }, Domain::Binned(scheme)) => {
                    let pdoms: Vec<(&str, &Domain<T>)> = parents[i]
                        .iter()
                        .map(|&p| (spec.nodes[p].name.as_str(), &spec.nodes[p].domain))
                        .collect();
                    regression_to_cpt(regression, &node.name, scheme, &pdoms, spec.prior_strength)?
                }
                (Prior::Regression { .. }, Domain::Categorical(_)) => {
                    return Err(Error::InvalidArgument(format!(
                        "regression prior on categorical node `{}`",
                        node.name
                    )))
                }
            };
            tables.push(table);
        }
        Ok(Network { spec, parents, children, cards, order, tables })
    }

    /// Validates `spec` and installs explicit pseudo-count tables.
    pub fn with_tables(spec: NetworkSpec<T>, tables: Vec<TableDoc<T>>) -> Result<Self> {
        let mut net = Self::build(spec)?;
        for doc in tables {
            let i = net.index_of(&doc.node)?;
            let pcards = net.tables[i].parent_cards.clone();
            net.tables[i] = ConditionalTable::from_rows(&doc.node, net.cards[i], pcards, doc.rows)?;
        }
        Ok(net)
    }

    pub fn from_document(doc: ModelDocument<T>) -> Result<Self> {
        let spec = NetworkSpec {
            nodes: doc.nodes,
            case_weight: doc.case_weight,
            row_limit: doc.row_limit,
            prior_strength: doc.prior_strength,
        };
        if doc.tables.is_empty() {
            Self::build(spec)
        } else {
            Self::with_tables(spec, doc.tables)
        }
    }

    pub fn to_document(&self) -> ModelDocument<T> {
        ModelDocument {
            nodes: self.spec.nodes.clone(),
            case_weight: self.spec.case_weight,
            row_limit: self.spec.row_limit,
            prior_strength: self.spec.prior_strength,
            tables: self
                .tables
                .iter()
                .map(|t| TableDoc { node: t.node.clone(), rows: t.rows().map(<[T]>::to_vec).collect() })
                .collect(),
        }
    }

    pub fn spec(&self) -> &NetworkSpec<T> {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.spec.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spec.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &NodeSpec<T> {
        &self.spec.nodes[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.spec.nodes[i].name
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.spec
            .nodes
            .iter()
            .position(|n| n.name == name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn cardinality(&self, i: usize) -> usize {
        self.cards[i]
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Topological order; among ready nodes the earliest in the spec comes first.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn table(&self, i: usize) -> &ConditionalTable<T> {
        &self.tables[i]
    }

    pub fn scheme(&self, i: usize) -> Option<&BinScheme<T>> {
        self.spec.nodes[i].domain.scheme()
    }

    /// Nodes with a bin scheme, in spec order.
    pub fn binned_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.scheme(i).is_some()).collect()
    }

    /// Row of node `i`'s table selected by the parent states in `states`.
    pub fn row_of(&self, i: usize, states: &[usize]) -> usize {
        self.parents[i].iter().fold(0, |acc, &p| acc * self.cards[p] + states[p])
    }

    /// P(node `i` = `states[i]` | its parents' states in `states`).
    pub fn conditional(&self, i: usize, states: &[usize]) -> T {
        self.tables[i].probability(self.row_of(i, states), states[i])
    }

    /// Parents, children and the children's other parents.
    pub fn markov_blanket(&self, i: usize) -> Vec<usize> {
        let mut blanket: Vec<usize> = self.parents[i].clone();
        for &c in &self.children[i] {
            blanket.push(c);
            blanket.extend(self.parents[c].iter().copied().filter(|&p| p != i));
        }
        blanket.sort_unstable();
        blanket.dedup();
        blanket
    }

    pub fn replace_table(&self, i: usize, table: ConditionalTable<T>) -> Result<Self> {
        if table.cardinality != self.cards[i] || table.parent_cards != self.tables[i].parent_cards {
            return Err(Error::InvalidArgument(format!("table shape does not fit node `{}`", self.name(i))));
        }
        let mut next = self.clone();
        next.tables[i] = table;
        Ok(next)
    }

    /// Dirichlet update of node `i` from full-network cases; any case missing the node or one of
    /// its parents is rejected with its index.
    pub fn dirichlet_update(&self, i: usize, cases: &[Case], case_weight: T) -> Result<Self> {
        let family = self.family_observations(i, cases, true)?;
        let table = self.tables[i].dirichlet_update(&family, case_weight)?;
        self.replace_table(i, table)
    }

    fn family_observations(&self, i: usize, cases: &[Case], strict: bool) -> Result<Vec<(Vec<usize>, usize)>> {
        let mut out = Vec::with_capacity(cases.len());
        for (index, case) in cases.iter().enumerate() {
            let parents: Option<Vec<usize>> = self.parents[i].iter().map(|&p| case.get(p).copied().flatten()).collect();
            match (parents, case.get(i).copied().flatten()) {
                (Some(ps), Some(s)) => out.push((ps, s)),
                _ if strict => {
                    return Err(Error::IncompleteCase { index, node: self.name(i).to_string() });
                }
                _ => {}
            }
        }
        Ok(out)
    }

    /// Updates every table with `case_weight`; cases incomplete for a node's family are skipped
    /// for that node only.
    pub fn learn(&self, cases: &[Case], case_weight: T) -> Result<(Self, LearnReport)> {
        let mut next = self.clone();
        let mut report = LearnReport::default();
        for i in 0..self.len() {
            let family = self.family_observations(i, cases, false)?;
            report.used.push(family.len());
            report.skipped.push(cases.len() - family.len());
            next.tables[i] = self.tables[i].dirichlet_update(&family, case_weight)?;
        }
        Ok((next, report))
    }

    /// Maps case-table rows to node states. Missing, out-of-range and unknown values become
    /// `None` and are counted per node.
    pub fn discretize(&self, table: &CaseTable) -> Result<(Vec<Case>, DiscretizeReport)> {
        let cols = self
            .spec
            .nodes
            .iter()
            .map(|n| table.column(n.column()).ok_or_else(|| Error::MissingColumn(n.column().to_string())))
            .collect::<Result<Vec<_>>>()?;
        let mut report = DiscretizeReport { unmapped: vec![0; self.len()] };
        let cases = table
            .rows
            .iter()
            .map(|row| {
                self.spec
                    .nodes
                    .iter()
                    .zip(&cols)
                    .enumerate()
                    .map(|(i, (node, &c))| {
                        let state = match (&node.domain, &row[c]) {
                            (_, Value::Missing) => return None,
                            (Domain::Binned(s), Value::Num(x)) => s.bin_index(T::lit(*x)).ok(),
                            (Domain::Binned(_), Value::Cat(_)) => None,
                            (Domain::Categorical(states), v) => {
                                let label = v.label()?;
                                states.iter().position(|s| *s == label)
                            }
                        };
                        if state.is_none() {
                            report.unmapped[i] += 1;
                        }
                        state
                    })
                    .collect()
            })
            .collect();
        Ok((cases, report))
    }
}

/// Replaces the prior of every binned node with a piecewise regression on its parents, fitted
/// from the node columns of `table`. Categorical nodes keep their priors.
pub fn fit_priors<T: Real>(spec: &NetworkSpec<T>, table: &CaseTable, cfg: &FitConfig) -> Result<NetworkSpec<T>> {
    let cols = spec
        .nodes
        .iter()
        .map(|n| table.column(n.column()).ok_or_else(|| Error::MissingColumn(n.column().to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut view = CaseTable::new(spec.nodes.iter().map(|n| n.name.clone()).collect());
    view.rows = table
        .rows
        .iter()
        .map(|row| {
            spec.nodes
                .iter()
                .zip(&cols)
                .map(|(node, &c)| match (&node.domain, &row[c]) {
                    (Domain::Categorical(_), v @ Value::Num(_)) => Value::Cat(v.label().unwrap()),
                    (_, v) => v.clone(),
                })
                .collect()
        })
        .collect();
    let mut out = spec.clone();
    for node in &mut out.nodes {
        if matches!(node.domain, Domain::Binned(_)) {
            let candidates: Vec<&str> = node.parents.iter().map(String::as_str).collect();
            let regression = fit_piecewise(&view, &node.name, &candidates, cfg)?;
            node.prior = Prior::Regression { regression };
        }
    }
    Ok(out)
}

type Structure = (Vec<Vec<usize>>, Vec<Vec<usize>>, Vec<usize>, Vec<usize>);

fn validate<T: Real>(spec: &NetworkSpec<T>) -> Result<Structure> {
    if !(spec.case_weight > T::zero()) {
        return Err(Error::InvalidArgument("case_weight must be positive".into()));
    }
    if !(spec.prior_strength > T::zero() && spec.prior_strength.is_finite()) {
        return Err(Error::InvalidArgument("prior_strength must be positive".into()));
    }
    let n = spec.nodes.len();
    for (i, node) in spec.nodes.iter().enumerate() {
        if spec.nodes[..i].iter().any(|o| o.name == node.name) {
            return Err(Error::DuplicateNode(node.name.clone()));
        }
        if node.domain.len() < 2 {
            return Err(Error::InvalidArgument(format!("node `{}` needs at least 2 states", node.name)));
        }
    }
    let index = |name: &str| {
        spec.nodes.iter().position(|n| n.name == name).ok_or_else(|| Error::UnknownNode(name.to_string()))
    };
    let mut parents = Vec::with_capacity(n);
    let mut children = vec![Vec::new(); n];
    for (i, node) in spec.nodes.iter().enumerate() {
        let ps = node.parents.iter().map(|p| index(p)).collect::<Result<Vec<_>>>()?;
        for (k, &p) in ps.iter().enumerate() {
            if ps[..k].contains(&p) {
                return Err(Error::InvalidArgument(format!("node `{}` lists parent `{}` twice", node.name, spec.nodes[p].name)));
            }
            children[p].push(i);
        }
        if let Prior::Regression { regression } = &node.prior {
            for pred in regression.predictors() {
                if !node.parents.iter().any(|p| p == pred) {
                    return Err(Error::PredictorNotParent { node: node.name.clone(), predictor: pred.to_string() });
                }
            }
        }
        parents.push(ps);
    }
    let cards: Vec<usize> = spec.nodes.iter().map(|n| n.domain.len()).collect();
    for (i, ps) in parents.iter().enumerate() {
        let rows = ps
            .iter()
            .try_fold(1usize, |acc, &p| acc.checked_mul(cards[p]))
            .filter(|&r| r <= spec.row_limit);
        if rows.is_none() {
            let approx = ps.iter().map(|&p| cards[p] as f64).product::<f64>();
            return Err(Error::TooManyRows {
                node: spec.nodes[i].name.clone(),
                rows: approx.min(usize::MAX as f64) as usize,
                limit: spec.row_limit,
            });
        }
    }
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut order = Vec::with_capacity(n);
    let mut done = vec![false; n];
    while order.len() < n {
        let Some(next) = (0..n).find(|&i| !done[i] && indegree[i] == 0) else {
            let cyclic = (0..n).filter(|&i| !done[i]).map(|i| spec.nodes[i].name.clone()).collect();
            return Err(Error::Cycle(cyclic));
        };
        done[next] = true;
        order.push(next);
        for &c in &children[next] {
            indegree[c] -= 1;
        }
    }
    Ok((parents, children, cards, order))
}
