//! Evaluation: confusion matrices and midpoint MSE of MAP predictions, scaled MSE across case
//! weights, weight sweeps with their baselines, Markov-blanket squared error and log-likelihood
//! distribution comparison.

use serde::{Deserialize, Serialize};

use crate::cases::{CaseTable, TIME_COLUMN};
use crate::discretize::BinScheme;
use crate::error::{Error, Result};
use crate::inference::{blanket_distribution, expected_value, forward_sample, log_likelihood, map_state};
use crate::network::{Case, Network, NetworkSpec, Prior};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub test: usize,
    /// Rows without a usable timestamp, left out of both sides.
    pub untimed: usize,
}

/// Rows scheduled before `cutoff` (epoch seconds) train, the rest test.
pub fn split_by_date(table: &CaseTable, cutoff: f64) -> Result<(CaseTable, CaseTable, SplitCounts)> {
    let col = table.column(TIME_COLUMN).ok_or_else(|| Error::MissingColumn(TIME_COLUMN.into()))?;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    let mut untimed = 0;
    for (i, row) in table.rows.iter().enumerate() {
        match row[col].as_num() {
            Some(t) if t < cutoff => train.push(i),
            Some(_) => test.push(i),
            None => untimed += 1,
        }
    }
    let counts = SplitCounts { train: train.len(), test: test.len(), untimed };
    Ok((table.subset(train), table.subset(test), counts))
}

/// Mean over cases of the squared distance between actual and predicted bin midpoints.
pub fn approx_mse<T: Real>(actual: &[usize], predicted: &[usize], scheme: &BinScheme<T>) -> Result<T> {
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch { expected: actual.len(), got: predicted.len() });
    }
    if actual.is_empty() {
        return Err(Error::EmptyInput("approx_mse needs at least one case"));
    }
    let mut sum = T::zero();
    for (&a, &p) in actual.iter().zip(predicted) {
        let d = scheme.midpoint(a)? - scheme.midpoint(p)?;
        sum += d * d;
    }
    Ok(sum / T::from_usize(actual.len()).unwrap())
}

/// `(mse - min) / (max - min)` for each `(weight, mse)` pair.
pub fn scaled_mse<T: Real>(mse_by_weight: &[(T, T)]) -> Result<Vec<(T, T)>> {
    let lo = mse_by_weight.iter().map(|p| p.1).fold(T::infinity(), T::min);
    let hi = mse_by_weight.iter().map(|p| p.1).fold(T::neg_infinity(), T::max);
    if mse_by_weight.len() < 2 || !(hi > lo) {
        return Err(Error::Degenerate("scaled MSE needs at least two distinct values".into()));
    }
    Ok(mse_by_weight.iter().map(|&(w, m)| (w, (m - lo) / (hi - lo))).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct NodeEval<T> {
    pub node: String,
    /// `confusion[actual][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
    pub cases: usize,
    /// Cases without the node or part of its blanket.
    pub skipped: usize,
    pub approx_mse: T,
    /// Mean and standard deviation of the actual bin midpoints.
    pub mean: T,
    pub std: T,
}

/// MAP prediction of `node` from its Markov blanket for every case that observes both.
pub fn map_predictions<T: Real>(net: &Network<T>, cases: &[Case], node: usize) -> (Vec<usize>, Vec<usize>, usize) {
    let (mut actual, mut predicted) = (Vec::new(), Vec::new());
    let mut skipped = 0;
    for case in cases {
        let Some(a) = case[node] else {
            skipped += 1;
            continue;
        };
        match blanket_distribution(net, case, node) {
            Ok(p) => {
                actual.push(a);
                predicted.push(map_state(&p).unwrap());
            }
            Err(_) => skipped += 1,
        }
    }
    (actual, predicted, skipped)
}

/// Confusion matrix and approximate MSE for each binned node in `nodes`.
pub fn evaluate<T: Real>(net: &Network<T>, cases: &[Case], nodes: &[usize]) -> Result<Vec<NodeEval<T>>> {
    nodes
        .iter()
        .map(|&i| {
            let scheme = net
                .scheme(i)
                .ok_or_else(|| Error::InvalidArgument(format!("`{}` is not a binned node", net.name(i))))?;
            let (actual, predicted, skipped) = map_predictions(net, cases, i);
            let mut confusion = vec![vec![0usize; scheme.len()]; scheme.len()];
            for (&a, &p) in actual.iter().zip(&predicted) {
                confusion[a][p] += 1;
            }
            let n = actual.len();
            let (mse, mean, std) = if n == 0 {
                (T::nan(), T::nan(), T::nan())
            } else {
                let mids: Vec<T> = actual.iter().map(|&a| scheme.midpoint(a).unwrap()).collect();
                let nf = T::from_usize(n).unwrap();
                let mean = mids.iter().copied().sum::<T>() / nf;
                let var = mids.iter().map(|&m| (m - mean) * (m - mean)).sum::<T>() / nf;
                (approx_mse(&actual, &predicted, scheme)?, mean, var.sqrt())
            };
            Ok(NodeEval { node: net.name(i).to_string(), confusion, cases: n, skipped, approx_mse: mse, mean, std })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SweepRow<T> {
    pub node: String,
    pub weight: T,
    pub train_mse: T,
    pub test_mse: T,
    /// Scaled across weights; `None` when every weight gave the same MSE.
    pub train_scaled: Option<T>,
    pub test_scaled: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Baseline<T> {
    pub node: String,
    pub train_mse: T,
    pub test_mse: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SweepReport<T> {
    pub rows: Vec<SweepRow<T>>,
    /// Per weight: summed approximate MSE over the evaluated nodes, train then test.
    pub totals: Vec<(T, T, T)>,
    /// Prior tables only, no case updating.
    pub regression_only: Vec<Baseline<T>>,
    /// Uniform unit-strength priors updated with `counts_weight`.
    pub counts_only: Vec<Baseline<T>>,
    pub counts_weight: T,
}

impl<T: Real> SweepReport<T> {
    pub fn total_of(baselines: &[Baseline<T>]) -> (T, T) {
        baselines
            .iter()
            .fold((T::zero(), T::zero()), |(a, b), r| (a + r.train_mse, b + r.test_mse))
    }
}

fn node_mses<T: Real>(net: &Network<T>, cases: &[Case], nodes: &[usize]) -> Result<Vec<T>> {
    Ok(evaluate(net, cases, nodes)?.into_iter().map(|e| e.approx_mse).collect())
}

/// Rebuilds the priors and retrains at each weight, scoring every binned node on both samples;
/// also scores the regression-only and counts-only baselines.
pub fn weight_sweep<T: Real>(
    spec: &NetworkSpec<T>,
    train: &[Case],
    test: &[Case],
    weights: &[T],
    counts_weight: T,
) -> Result<SweepReport<T>> {
    if weights.is_empty() || weights.iter().any(|w| !(*w > T::zero())) {
        return Err(Error::InvalidArgument("sweep weights must be nonempty and positive".into()));
    }
    let prior_net = Network::build(spec.clone())?;
    let nodes = prior_net.binned_nodes();
    let mut per_weight = Vec::with_capacity(weights.len());
    for &w in weights {
        let mut s = spec.clone();
        s.case_weight = w;
        let (net, _) = Network::build(s)?.learn(train, w)?;
        per_weight.push((node_mses(&net, train, &nodes)?, node_mses(&net, test, &nodes)?));
    }

    let mut rows = Vec::new();
    for (k, &i) in nodes.iter().enumerate() {
        let train_curve: Vec<(T, T)> = weights.iter().zip(&per_weight).map(|(&w, m)| (w, m.0[k])).collect();
        let test_curve: Vec<(T, T)> = weights.iter().zip(&per_weight).map(|(&w, m)| (w, m.1[k])).collect();
        let train_scaled = scaled_mse(&train_curve).ok();
        let test_scaled = scaled_mse(&test_curve).ok();
        for (j, &w) in weights.iter().enumerate() {
            rows.push(SweepRow {
                node: prior_net.name(i).to_string(),
                weight: w,
                train_mse: train_curve[j].1,
                test_mse: test_curve[j].1,
                train_scaled: train_scaled.as_ref().map(|s| s[j].1),
                test_scaled: test_scaled.as_ref().map(|s| s[j].1),
            });
        }
    }
    let totals = weights
        .iter()
        .zip(&per_weight)
        .map(|(&w, (tr, te))| (w, tr.iter().copied().sum(), te.iter().copied().sum()))
        .collect();

    let baseline = |net: &Network<T>| -> Result<Vec<Baseline<T>>> {
        let tr = node_mses(net, train, &nodes)?;
        let te = node_mses(net, test, &nodes)?;
        Ok(nodes
            .iter()
            .zip(tr.into_iter().zip(te))
            .map(|(&i, (train_mse, test_mse))| Baseline { node: net.name(i).to_string(), train_mse, test_mse })
            .collect())
    };
    let regression_only = baseline(&prior_net)?;
    let mut uniform = spec.clone();
    uniform.case_weight = counts_weight;
    uniform.prior_strength = T::one();
    for n in &mut uniform.nodes {
        n.prior = Prior::Uniform;
    }
    let (counts_net, _) = Network::build(uniform)?.learn(train, counts_weight)?;
    let counts_only = baseline(&counts_net)?;
    Ok(SweepReport { rows, totals, regression_only, counts_only, counts_weight })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct BlanketError<T> {
    pub node: String,
    pub mse: T,
    pub cases: usize,
    /// Cases skipped for a missing or zero-probability blanket.
    pub skipped: usize,
}

/// Mean squared difference between each binned node's observed midpoint and its conditional mean
/// given the Markov blanket.
pub fn blanket_sq_error<T: Real>(net: &Network<T>, cases: &[Case]) -> Vec<BlanketError<T>> {
    net.binned_nodes()
        .into_iter()
        .map(|i| {
            let scheme = net.scheme(i).unwrap();
            let mut sum = T::zero();
            let (mut n, mut skipped) = (0usize, 0usize);
            for case in cases {
                let Some(a) = case[i] else {
                    skipped += 1;
                    continue;
                };
                match blanket_distribution(net, case, i).and_then(|p| expected_value(&p, scheme)) {
                    Ok(mean) => {
                        let d = scheme.midpoint(a).unwrap() - mean;
                        sum += d * d;
                        n += 1;
                    }
                    Err(_) => skipped += 1,
                }
            }
            let mse = if n == 0 { T::nan() } else { sum / T::from_usize(n).unwrap() };
            BlanketError { node: net.name(i).to_string(), mse, cases: n, skipped }
        })
        .collect()
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("KS statistic needs two nonempty samples"));
    }
    let sorted = |v: &[T]| {
        let mut v = v.to_vec();
        v.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        v
    };
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (T::from_usize(a.len()).unwrap(), T::from_usize(b.len()).unwrap());
    let (mut i, mut j) = (0, 0);
    let mut d = T::zero();
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        let gap = (T::from_usize(i).unwrap() / na - T::from_usize(j).unwrap() / nb).abs();
        d = d.max(gap);
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct LlComparison<T> {
    /// Finite log-likelihoods of the holdout cases.
    pub holdout: Vec<T>,
    /// Finite log-likelihoods of the generated cases.
    pub generated: Vec<T>,
    pub holdout_neg_inf: usize,
    pub generated_neg_inf: usize,
    pub ks_statistic: T,
}

/// Compares the log-likelihood distribution of `holdout` with that of `n_generated` cases
/// sampled from `net` itself.
pub fn ll_comparison<T: Real>(net: &Network<T>, holdout: &[Vec<usize>], n_generated: usize, seed: u64) -> Result<LlComparison<T>> {
    if holdout.is_empty() {
        return Err(Error::EmptyInput("ll_comparison needs holdout cases"));
    }
    let split = |cases: &[Vec<usize>]| -> Result<(Vec<T>, usize)> {
        let mut finite = Vec::with_capacity(cases.len());
        let mut neg_inf = 0;
        for c in cases {
            let ll = log_likelihood(net, c)?;
            if ll.is_finite() {
                finite.push(ll);
            } else {
                neg_inf += 1;
            }
        }
        Ok((finite, neg_inf))
    };
    let (holdout_ll, holdout_neg_inf) = split(holdout)?;
    let generated_cases = forward_sample(net, n_generated, seed);
    let (generated_ll, generated_neg_inf) = split(&generated_cases)?;
    let ks = ks_statistic(&holdout_ll, &generated_ll)?;
    Ok(LlComparison {
        holdout: holdout_ll,
        generated: generated_ll,
        holdout_neg_inf,
        generated_neg_inf,
        ks_statistic: ks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::Value;

    #[test]
    fn mse_examples() {
        let s = BinScheme::<f64>::default_delay();
        assert_eq!(approx_mse(&[6], &[5], &s).unwrap(), 225.0);
        assert_eq!(approx_mse(&[1, 6, 13], &[1, 6, 13], &s).unwrap(), 0.0);
        assert!(approx_mse(&[], &[], &s).is_err());
        assert!(approx_mse(&[1], &[], &s).is_err());
    }

    #[test]
    fn scaled_examples() {
        let scaled = scaled_mse(&[(1.0, 100.0), (30.0, 150.0), (300.0, 200.0)]).unwrap();
        assert_eq!(scaled, vec![(1.0, 0.0), (30.0, 0.5), (300.0, 1.0)]);
        assert!(scaled_mse(&[(1.0, 5.0), (2.0, 5.0)]).is_err());
        assert!(scaled_mse(&[(1.0, 5.0)]).is_err());
    }

    #[test]
    fn ks_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_statistic(&a, &[10.0, 11.0]).unwrap(), 1.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[2.0, 3.0]).unwrap(), 0.5);
        assert!(ks_statistic::<f64>(&[], &a).is_err());
    }

    #[test]
    fn date_split() {
        let mut t = CaseTable::new(vec!["sch_out".into()]);
        for x in [Value::Num(10.0), Value::Num(20.0), Value::Missing, Value::Num(30.0)] {
            t.rows.push(vec![x]);
        }
        let (tr, te, c) = split_by_date(&t, 5.0).unwrap();
        assert_eq!((tr.len(), te.len(), c.untimed), (0, 3, 1));
        let (tr, te, c) = split_by_date(&t, 25.0).unwrap();
        assert_eq!((c.train, c.test), (2, 1));
        assert_eq!(tr.rows[1][0], Value::Num(20.0));
        assert_eq!(te.rows[0][0], Value::Num(30.0));
    }
}
