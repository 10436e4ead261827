//! Synthetic flight-leg data drawn from a known ground-truth network.
//!
//! A scenario file is a network config (the spec a learner starts from) plus a `truth` section
//! overriding priors or tables of the generating network, and an `emission` section describing
//! how sampled states become continuous values and records.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::data::{FlightLegRecord, NO_EDCT};
use crate::error::{Error, Result};
use crate::inference::forward_sample;
use crate::network::{ConditionalTable, Domain, Network, NetworkSpec, NodeSpec, Prior, TableDoc, DEFAULT_ROW_LIMIT};
use crate::scalar::Real;

const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.json");
const SWEEP_SCENARIO: &str = include_str!("../scenarios/sweep.json");

/// Delay columns emitted on a one-second grid, in minutes.
const DELAY_COLUMNS: [&str; 8] = [
    "gate_in_prev",
    "turn_around",
    "gate_out",
    "taxi_out",
    "airborne",
    "taxi_in",
    "gate_in_dest",
    "gdp_time",
];
/// Count columns emitted as integers.
const COUNT_COLUMNS: [&str; 2] = ["dep_demand", "arr_throughput"];
const LABEL_COLUMNS: [&str; 5] = ["airline", "weather_dest", "enroute_storm", "runway_config", "gdp"];

/// `total = sum(terms)` holds exactly for the emitted values; the last term is derived.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SumConstraint {
    pub total: String,
    pub terms: Vec<String>,
}

/// Fixed parts of the synthesized legs. Durations are whole minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LegTemplate {
    pub origin: String,
    pub dest: String,
    pub prev_origin: String,
    pub airline: String,
    pub weather_dest: String,
    pub enroute_storm: String,
    pub runway_config: String,
    /// Scheduled departure of the first case, epoch seconds.
    pub start: i64,
    pub spacing_sec: i64,
    pub sched_turn_min: i64,
    pub unimp_taxi_out_min: i64,
    pub unimp_taxi_in_min: i64,
    pub plan_enroute_min: i64,
    pub gdp_time_min: i64,
}

impl Default for LegTemplate {
    fn default() -> Self {
        LegTemplate {
            origin: "ORD".into(),
            dest: "ATL".into(),
            prev_origin: "DCA".into(),
            airline: "AA".into(),
            weather_dest: "clear".into(),
            enroute_storm: "none".into(),
            runway_config: "west_flow".into(),
            start: 1_546_300_800,
            spacing_sec: 600,
            sched_turn_min: 90,
            unimp_taxi_out_min: 15,
            unimp_taxi_in_min: 8,
            plan_enroute_min: 97,
            gdp_time_min: 15,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Emission {
    #[serde(default)]
    pub sums: Vec<SumConstraint>,
    #[serde(default)]
    pub legs: LegTemplate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct TruthSection<T> {
    /// Priors replacing those of `nodes` in the generating network.
    #[serde(default)]
    pub priors: BTreeMap<String, Prior<T>>,
    /// Explicit generating tables; rows are normalized.
    #[serde(default)]
    pub tables: Vec<TableDoc<T>>,
}

impl<T> Default for TruthSection<T> {
    fn default() -> Self {
        TruthSection { priors: BTreeMap::new(), tables: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ScenarioFile<T> {
    pub nodes: Vec<NodeSpec<T>>,
    pub case_weight: T,
    #[serde(default = "default_row_limit")]
    pub row_limit: usize,
    #[serde(default = "unit_strength")]
    pub prior_strength: T,
    #[serde(default)]
    pub truth: TruthSection<T>,
    #[serde(default)]
    pub emission: Emission,
}

fn default_row_limit() -> usize {
    DEFAULT_ROW_LIMIT
}

fn unit_strength<T: Real>() -> T {
    T::one()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Grid {
    /// Minutes on a one-second grid.
    Seconds,
    /// Whole counts.
    Units,
    Label,
}

impl Grid {
    fn per_unit(self) -> f64 {
        match self {
            Grid::Seconds => 60.0,
            _ => 1.0,
        }
    }
}

/// A generating network with its emission rules.
#[derive(Debug, Clone)]
pub struct GroundTruth<T> {
    /// Config a learner starts from; its priors may differ from the truth.
    pub spec: NetworkSpec<T>,
    /// Network whose normalized tables are the true conditional distributions.
    pub truth: Network<T>,
    pub emission: Emission,
    grids: Vec<Grid>,
}

/// Output of [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized {
    /// Two legs per case: the inbound leg, then the leg the case describes.
    pub records: Vec<FlightLegRecord>,
    /// True state of every node, per case.
    pub cases: Vec<Vec<usize>>,
    /// Emitted continuous value per binned node, `None` for categorical nodes.
    pub values: Vec<Vec<Option<f64>>>,
}

impl Synthesized {
    pub fn current_leg(&self, case: usize) -> &FlightLegRecord {
        &self.records[2 * case + 1]
    }
}

impl<T: Real> GroundTruth<T> {
    pub fn from_file(file: ScenarioFile<T>) -> Result<Self> {
        let spec = NetworkSpec {
            nodes: file.nodes,
            case_weight: file.case_weight,
            row_limit: file.row_limit,
            prior_strength: file.prior_strength,
        };
        let mut truth_spec = spec.clone();
        for (name, prior) in file.truth.priors {
            let node = truth_spec
                .nodes
                .iter_mut()
                .find(|n| n.name == name)
                .ok_or_else(|| Error::UnknownNode(name.clone()))?;
            node.prior = prior;
        }
        let mut truth = Network::build(truth_spec)?;
        for doc in file.truth.tables {
            let i = truth.index_of(&doc.node)?;
            let rows = doc
                .rows
                .into_iter()
                .map(|row| {
                    let total: T = row.iter().copied().sum();
                    if !(total > T::zero()) || row.iter().any(|p| *p < T::zero()) {
                        return Err(Error::InvalidArgument(format!("truth row of `{}` must be a distribution", doc.node)));
                    }
                    Ok(row.into_iter().map(|p| p / total).collect())
                })
                .collect::<Result<Vec<Vec<T>>>>()?;
            let t = truth.table(i);
            let table = ConditionalTable::from_rows(&doc.node, t.cardinality(), t.parent_cards().to_vec(), rows)?;
            truth = truth.replace_table(i, table)?;
        }
        let grids = truth
            .spec()
            .nodes
            .iter()
            .map(|n| node_grid(n))
            .collect::<Result<Vec<_>>>()?;
        for c in &file.emission.sums {
            truth = mask_sum(&truth, &grids, c)?;
        }
        let gt = GroundTruth { spec, truth, emission: file.emission, grids };
        gt.check_phases()?;
        Ok(gt)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    fn column_index(&self, column: &str) -> Option<usize> {
        self.truth.spec().nodes.iter().position(|n| n.column() == column)
    }

    fn check_phases(&self) -> Result<()> {
        let present = ["gate_in_prev", "turn_around", "gate_out"].map(|c| self.column_index(c).is_some());
        if present.iter().all(|&p| p) {
            let covered = self.emission.sums.iter().any(|c| {
                let cols: Vec<&str> = std::iter::once(&c.total)
                    .chain(&c.terms)
                    .filter_map(|n| self.truth.index_of(n).ok())
                    .map(|i| self.truth.node(i).column())
                    .collect();
                ["gate_in_prev", "turn_around", "gate_out"].iter().all(|x| cols.contains(x))
            });
            if !covered {
                return Err(Error::InvalidArgument(
                    "gate_in_prev, turn_around and gate_out need a sum constraint tying them together".into(),
                ));
            }
        }
        if self.column_index("gdp_time").is_some() && self.column_index("gdp").is_none() {
            return Err(Error::InvalidArgument("a gdp_time node needs a gdp node".into()));
        }
        if let Some(i) = self.column_index("gdp") {
            if let Domain::Categorical(states) = &self.truth.node(i).domain {
                if states.iter().any(|s| s != "true" && s != "false") {
                    return Err(Error::InvalidArgument("gdp states must be \"true\" and \"false\"".into()));
                }
            }
        }
        Ok(())
    }
}

fn node_grid<T: Real>(node: &NodeSpec<T>) -> Result<Grid> {
    let col = node.column();
    let grid = match &node.domain {
        Domain::Binned(_) if DELAY_COLUMNS.contains(&col) => Grid::Seconds,
        Domain::Binned(_) if COUNT_COLUMNS.contains(&col) => Grid::Units,
        Domain::Categorical(_) if LABEL_COLUMNS.contains(&col) => Grid::Label,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "node `{}` maps to column `{col}`, which synthesized records cannot carry with its domain",
                node.name
            )))
        }
    };
    Ok(grid)
}

/// Bin `k` of a binned node as a half-open range of grid points; `None` marks an open tail.
fn grid_range<T: Real>(net: &Network<T>, grids: &[Grid], i: usize, k: usize) -> (Option<i64>, Option<i64>) {
    let (lo, hi) = net.scheme(i).expect("binned node").bounds(k).expect("state within domain");
    let scale = grids[i].per_unit();
    let to_grid = |x: T| -> Option<i64> {
        let x = x.as_f64();
        x.is_finite().then(|| {
            let g = x * scale;
            if (g - g.round()).abs() < 1e-9 {
                g.round() as i64
            } else {
                g.ceil() as i64
            }
        })
    };
    (to_grid(lo), to_grid(hi))
}

fn mask_sum<T: Real>(net: &Network<T>, grids: &[Grid], c: &SumConstraint) -> Result<Network<T>> {
    let total = net.index_of(&c.total)?;
    let terms = c.terms.iter().map(|t| net.index_of(t)).collect::<Result<Vec<_>>>()?;
    if terms.is_empty() {
        return Err(Error::InvalidArgument(format!("sum constraint on `{}` has no terms", c.total)));
    }
    for &i in std::iter::once(&total).chain(&terms) {
        if grids[i] != Grid::Seconds {
            return Err(Error::InvalidArgument(format!("sum constraint node `{}` must be a binned delay", net.name(i))));
        }
    }
    let positions = terms
        .iter()
        .map(|&t| {
            net.parents(total).iter().position(|&p| p == t).ok_or_else(|| {
                Error::InvalidArgument(format!("`{}` must be a parent of `{}`", net.name(t), c.total))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let table = net.table(total);
    let mut rows = Vec::with_capacity(table.row_count());
    for r in 0..table.row_count() {
        let states = table.row_states(r);
        let (mut lo, mut hi) = (Some(0i64), Some(0i64));
        for (&t, &pos) in terms.iter().zip(&positions) {
            let (a, b) = grid_range(net, grids, t, states[pos]);
            lo = lo.zip(a).map(|(x, y)| x + y);
            hi = hi.zip(b).map(|(x, y)| x + y);
        }
        let mut row = table.probabilities(r);
        for (k, p) in row.iter_mut().enumerate() {
            let (a, b) = grid_range(net, grids, total, k);
            let below = matches!((b, lo), (Some(b), Some(lo)) if b <= lo);
            let above = matches!((a, hi), (Some(a), Some(hi)) if a >= hi);
            if below || above {
                *p = T::zero();
            }
        }
        let sum: T = row.iter().copied().sum();
        if !(sum > T::zero()) {
            return Err(Error::Degenerate(format!("row {r} of `{}` has no bin compatible with its sum", c.total)));
        }
        rows.push(row.into_iter().map(|p| p / sum).collect());
    }
    let t = ConditionalTable::from_rows(&c.total, table.cardinality(), table.parent_cards().to_vec(), rows)?;
    net.replace_table(total, t)
}

/// Ground truth shipped with the crate: the twelve-node phase chain.
pub fn default_scenario() -> GroundTruth<f64> {
    GroundTruth::from_json(DEFAULT_SCENARIO).expect("shipped scenario is valid")
}

/// Ground truth for weight sweeps: noisy rows and a learner prior that is deliberately off.
pub fn sweep_scenario() -> GroundTruth<f64> {
    GroundTruth::from_json(SWEEP_SCENARIO).expect("shipped scenario is valid")
}

pub fn default_scenario_json() -> &'static str {
    DEFAULT_SCENARIO
}

pub fn sweep_scenario_json() -> &'static str {
    SWEEP_SCENARIO
}

/// Grid point in `[lo, hi)`; open ends extend by an exponential with mean `tail` grid units.
fn sample_range(rng: &mut ChaCha8Rng, lo: Option<i64>, hi: Option<i64>, tail: f64) -> i64 {
    let mut excess = || Exp::new(1.0 / tail).expect("positive tail").sample(rng).floor() as i64;
    match (lo, hi) {
        (Some(a), Some(b)) if b > a => rng.random_range(a..b),
        (Some(a), Some(_)) => a,
        (Some(a), None) => a + excess(),
        (None, Some(b)) => b - 1 - excess(),
        (None, None) => excess(),
    }
}

struct Emitter<'a, T> {
    gt: &'a GroundTruth<T>,
    derived: Vec<bool>,
}

impl<'a, T: Real> Emitter<'a, T> {
    fn new(gt: &'a GroundTruth<T>) -> Result<Self> {
        let mut derived = vec![false; gt.truth.len()];
        for c in &gt.emission.sums {
            derived[gt.truth.index_of(c.terms.last().expect("validated"))?] = true;
        }
        Ok(Emitter { gt, derived })
    }

    fn tail(&self, i: usize) -> f64 {
        let s = self.gt.truth.scheme(i).expect("binned");
        s.tail_halfwidth().as_f64() * self.gt.grids[i].per_unit()
    }

    fn free(&self, rng: &mut ChaCha8Rng, i: usize, k: usize) -> i64 {
        let (a, b) = grid_range(&self.gt.truth, &self.gt.grids, i, k);
        sample_range(rng, a, b, self.tail(i))
    }

    /// Grid values of every binned node for one case.
    fn emit(&self, rng: &mut ChaCha8Rng, states: &[usize]) -> Vec<Option<i64>> {
        let net = &self.gt.truth;
        let grids = &self.gt.grids;
        let mut out: Vec<Option<i64>> = (0..net.len())
            .map(|i| match grids[i] {
                Grid::Label => None,
                _ if self.derived[i] => None,
                _ => Some(self.free(rng, i, states[i])),
            })
            .collect();
        for c in &self.gt.emission.sums {
            let total = net.index_of(&c.total).unwrap();
            let terms: Vec<usize> = c.terms.iter().map(|t| net.index_of(t).unwrap()).collect();
            let (&last, fixed) = terms.split_last().unwrap();
            let (c_lo, c_hi) = grid_range(net, grids, last, states[last]);
            let (t_lo, t_hi) = grid_range(net, grids, total, states[total]);
            let mut attempts = 0;
            loop {
                let s: i64 = fixed.iter().map(|&t| out[t].unwrap()).sum();
                let lo = match (t_lo, c_lo) {
                    (Some(a), Some(c)) => Some(a.max(s + c)),
                    (a, c) => a.or(c.map(|c| s + c)),
                };
                let hi = match (t_hi, c_hi) {
                    (Some(b), Some(d)) => Some(b.min(s + d)),
                    (b, d) => b.or(d.map(|d| s + d)),
                };
                let feasible = !matches!((lo, hi), (Some(a), Some(b)) if b <= a);
                if feasible || attempts >= 1000 {
                    let v = sample_range(rng, lo, hi, self.tail(total));
                    out[total] = Some(v);
                    out[last] = Some(v - s);
                    break;
                }
                attempts += 1;
                for &t in fixed {
                    out[t] = Some(self.free(rng, t, states[t]));
                }
            }
        }
        out
    }
}

/// Draws `n` cases from the truth and turns each into an inbound leg plus the leg itself.
/// Deterministic per `seed`.
pub fn generate<T: Real>(gt: &GroundTruth<T>, n: usize, seed: u64) -> Result<Synthesized> {
    let cases = forward_sample(&gt.truth, n, seed);
    let emitter = Emitter::new(gt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let net = &gt.truth;
    let legs = &gt.emission.legs;
    let mut records = Vec::with_capacity(2 * n);
    let mut values = Vec::with_capacity(n);
    for (idx, states) in cases.iter().enumerate() {
        let grid = emitter.emit(&mut rng, states);
        let by_column = |col: &str| gt.column_index(col).and_then(|i| grid[i]);
        let label = |col: &str, default: &str| -> String {
            gt.column_index(col)
                .map(|i| net.node(i).domain.labels()[states[i]].clone())
                .unwrap_or_else(|| default.to_string())
        };
        let gip = by_column("gate_in_prev").unwrap_or(0);
        let go = by_column("gate_out").unwrap_or_else(|| gip + by_column("turn_around").unwrap_or(0));
        let ta = go - gip;
        let to = by_column("taxi_out").unwrap_or(0);
        let air = by_column("airborne").unwrap_or(0);
        let ti = by_column("taxi_in").unwrap_or(0);
        let gid = by_column("gate_in_dest").unwrap_or(0);
        let ceil_min = |sec: i64| (sec + 59).div_euclid(60);

        let tail_id = format!("N{idx:06}");
        let sch_out = legs.start + idx as i64 * legs.spacing_sec;
        let sched_turn = 60 * legs.sched_turn_min.max(ceil_min(-ta) + 1);
        let prev_sch_in = sch_out - sched_turn;
        let prev_act_in = prev_sch_in + gip;
        let prev_act_out = prev_act_in - 120 * 60;
        records.push(FlightLegRecord {
            tail_id: tail_id.clone(),
            airline: label("airline", &legs.airline),
            origin: legs.prev_origin.clone(),
            dest: legs.origin.clone(),
            sch_gate_out: Some(prev_sch_in - 120 * 60),
            act_gate_out: Some(prev_act_out),
            sch_gate_in: Some(prev_sch_in),
            act_gate_in: Some(prev_act_in),
            act_wheels_off: Some(prev_act_out + 15 * 60),
            act_wheels_on: Some(prev_act_in - 8 * 60),
            unimpeded_taxi_out_min: 15.0,
            unimpeded_taxi_in_min: 8.0,
            plan_enroute_min: 97.0,
            edct_off_sec: NO_EDCT,
            nom_to_min: 15.0,
            weather_dest: legs.weather_dest.clone(),
            enroute_storm: legs.enroute_storm.clone(),
            runway_config: legs.runway_config.clone(),
            dep_demand: None,
            arr_throughput: None,
        });

        let unimp_out = legs.unimp_taxi_out_min.max(ceil_min(-to));
        let plan = legs.plan_enroute_min.max(ceil_min(-air) + 1);
        let unimp_in = legs.unimp_taxi_in_min.max(ceil_min(-ti));
        let act_out = sch_out + go;
        let wheels_off = act_out + unimp_out * 60 + to;
        let wheels_on = wheels_off + plan * 60 + air;
        let act_in = wheels_on + unimp_in * 60 + ti;
        let edct = if label("gdp", "false") == "true" {
            let held = by_column("gdp_time").unwrap_or(legs.gdp_time_min * 60);
            act_out + unimp_out * 60 + held
        } else {
            NO_EDCT
        };
        let count = |col: &str| by_column(col).map(|v| v as f64);
        records.push(FlightLegRecord {
            tail_id,
            airline: label("airline", &legs.airline),
            origin: legs.origin.clone(),
            dest: legs.dest.clone(),
            sch_gate_out: Some(sch_out),
            act_gate_out: Some(act_out),
            sch_gate_in: Some(act_in - gid),
            act_gate_in: Some(act_in),
            act_wheels_off: Some(wheels_off),
            act_wheels_on: Some(wheels_on),
            unimpeded_taxi_out_min: unimp_out as f64,
            unimpeded_taxi_in_min: unimp_in as f64,
            plan_enroute_min: plan as f64,
            edct_off_sec: edct,
            nom_to_min: unimp_out as f64,
            weather_dest: label("weather_dest", &legs.weather_dest),
            enroute_storm: label("enroute_storm", &legs.enroute_storm),
            runway_config: label("runway_config", &legs.runway_config),
            dep_demand: count("dep_demand"),
            arr_throughput: count("arr_throughput"),
        });
        values.push(
            grid.iter()
                .zip(&gt.grids)
                .map(|(v, g)| v.map(|v| v as f64 / g.per_unit()))
                .collect(),
        );
    }
    Ok(Synthesized { records, cases, values })
}
