//! Piecewise-linear regression with forward selection by k-fold cross-validation.
//!
//! Each phase-delay node gets one fitted model; its mean and residual spread parameterize the
//! normal prior that is discretized into the node's initial CPT.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cases::{CaseTable, Value};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One additive term of the mean function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub enum Term<T> {
    Linear { predictor: String, slope: T },
    /// Slope `slopes[0]` below the breakpoint and `slopes[1]` above it; continuous at the break.
    Hinge { predictor: String, breakpoint: T, slopes: [T; 2] },
    /// Additive effect per level; unlisted levels contribute zero.
    Categorical { predictor: String, effects: BTreeMap<String, T> },
}

impl<T: Real> Term<T> {
    pub fn predictor(&self) -> &str {
        match self {
            Term::Linear { predictor, .. }
            | Term::Hinge { predictor, .. }
            | Term::Categorical { predictor, .. } => predictor,
        }
    }

    fn contribution(&self, input: Input<'_, T>) -> Result<T> {
        match (self, input) {
            (Term::Linear { slope, .. }, Input::Num(x)) => Ok(*slope * x),
            (Term::Hinge { breakpoint, slopes, .. }, Input::Num(x)) => {
                let excess = (x - *breakpoint).max(T::zero());
                Ok(slopes[0] * x + (slopes[1] - slopes[0]) * excess)
            }
            (Term::Categorical { effects, .. }, Input::Label(l)) => {
                Ok(effects.get(l).copied().unwrap_or_else(T::zero))
            }
            (Term::Categorical { effects, .. }, Input::Num(x)) => {
                Ok(effects.get(&x.to_string()).copied().unwrap_or_else(T::zero))
            }
            (_, Input::Label(l)) => Err(Error::InvalidArgument(format!(
                "continuous predictor `{}` got label {l:?}",
                self.predictor()
            ))),
        }
    }
}

/// A predictor value: a number for continuous terms, a label for categorical ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Input<'a, T> {
    Num(T),
    Label(&'a str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct PiecewiseRegression<T> {
    pub response: String,
    pub intercept: T,
    pub terms: Vec<Term<T>>,
    pub sigma: T,
    #[serde(default)]
    pub cv_score: T,
}

impl<T: Real> PiecewiseRegression<T> {
    pub fn intercept_only(response: &str, mean: T, sigma: T) -> Self {
        PiecewiseRegression {
            response: response.to_string(),
            intercept: mean,
            terms: Vec::new(),
            sigma,
            cv_score: T::zero(),
        }
    }

    pub fn predictors(&self) -> Vec<&str> {
        self.terms.iter().map(Term::predictor).collect()
    }

    pub fn breakpoints(&self) -> Vec<Option<T>> {
        self.terms
            .iter()
            .map(|t| match t {
                Term::Hinge { breakpoint, .. } => Some(*breakpoint),
                _ => None,
            })
            .collect()
    }

    /// Mean of the normal prior at one predictor configuration.
    pub fn predict_mean<'a>(&self, lookup: impl Fn(&str) -> Option<Input<'a, T>>) -> Result<T> {
        let mut mean = self.intercept;
        for term in &self.terms {
            let input = lookup(term.predictor())
                .ok_or_else(|| Error::MissingPredictor(term.predictor().to_string()))?;
            mean += term.contribution(input)?;
        }
        Ok(mean)
    }

    pub fn predict_map(&self, values: &BTreeMap<String, Input<'_, T>>) -> Result<T> {
        self.predict_mean(|name| values.get(name).copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub folds: usize,
    /// Minimum relative CV-MSE improvement for accepting a term.
    pub min_improvement: f64,
    pub sigma_floor: f64,
    /// Complete cases required per candidate.
    pub cases_per_candidate: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { folds: 5, min_improvement: 0.01, sigma_floor: 0.5, cases_per_candidate: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Form<T> {
    Linear(usize),
    Hinge(usize, T),
    Categorical(usize, Vec<String>),
}

impl<T: Real> Form<T> {
    fn candidate(&self) -> usize {
        match self {
            Form::Linear(c) | Form::Hinge(c, _) | Form::Categorical(c, _) => *c,
        }
    }

    fn width(&self) -> usize {
        match self {
            Form::Linear(_) => 1,
            Form::Hinge(..) => 2,
            Form::Categorical(_, levels) => levels.len() - 1,
        }
    }

    fn push_columns(&self, row: &[Cell<T>], out: &mut Vec<T>) {
        match (self, &row[self.candidate()]) {
            (Form::Linear(_), Cell::Num(x)) => out.push(*x),
            (Form::Hinge(_, b), Cell::Num(x)) => {
                out.push(*x);
                out.push((*x - *b).max(T::zero()));
            }
            (Form::Categorical(_, levels), Cell::Label(l)) => {
                out.extend(levels[1..].iter().map(|lv| if lv == l { T::one() } else { T::zero() }));
            }
            _ => unreachable!("column kinds are checked when building cells"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Cell<T> {
    Num(T),
    Label(String),
}

fn cmp_cell<T: Real>(a: &Cell<T>, b: &Cell<T>) -> Ordering {
    match (a, b) {
        (Cell::Num(x), Cell::Num(y)) => x.partial_cmp(y).unwrap_or(Ordering::Equal),
        (Cell::Label(x), Cell::Label(y)) => x.cmp(y),
        (Cell::Num(_), Cell::Label(_)) => Ordering::Less,
        (Cell::Label(_), Cell::Num(_)) => Ordering::Greater,
    }
}

struct Design<T> {
    response: Vec<T>,
    rows: Vec<Vec<Cell<T>>>,
}

impl<T: Real> Design<T> {
    fn matrix(&self, forms: &[Form<T>], rows: &[usize]) -> Vec<Vec<T>> {
        rows.iter()
            .map(|&i| {
                let mut x = vec![T::one()];
                for f in forms {
                    f.push_columns(&self.rows[i], &mut x);
                }
                x
            })
            .collect()
    }

    fn fit(&self, forms: &[Form<T>], rows: &[usize]) -> Vec<T> {
        let x = self.matrix(forms, rows);
        let y: Vec<T> = rows.iter().map(|&i| self.response[i]).collect();
        least_squares(&x, &y)
    }

    fn cv_mse(&self, forms: &[Form<T>], folds: usize) -> T {
        let n = self.response.len();
        let mut sse = T::zero();
        for fold in 0..folds {
            let train: Vec<usize> = (0..n).filter(|i| i % folds != fold).collect();
            let test: Vec<usize> = (0..n).filter(|i| i % folds == fold).collect();
            let beta = self.fit(forms, &train);
            for (x, &i) in self.matrix(forms, &test).iter().zip(&test) {
                let r = self.response[i] - dot(x, &beta);
                sse += r * r;
            }
        }
        sse / T::from_usize(n).unwrap()
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Ordinary least squares through the normal equations, with a vanishing ridge on the slopes so
/// collinear or empty indicator columns resolve to zero instead of blowing up.
fn least_squares<T: Real>(x: &[Vec<T>], y: &[T]) -> Vec<T> {
    let p = x.first().map_or(1, Vec::len);
    let mut a = vec![vec![T::zero(); p + 1]; p];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            a[i][p] += row[i] * yi;
        }
    }
    let scale = (0..p).map(|i| a[i][i]).fold(T::one(), T::max);
    for (i, row) in a.iter_mut().enumerate().skip(1) {
        row[i] += scale * T::lit(1e-10);
    }
    solve_augmented(a)
}

fn solve_augmented<T: Real>(mut a: Vec<Vec<T>>) -> Vec<T> {
    let p = a.len();
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap_or(Ordering::Equal))
            .unwrap();
        a.swap(col, pivot);
        let d = a[col][col];
        if d.abs() <= T::epsilon() {
            continue;
        }
        for r in 0..p {
            if r != col {
                let f = a[r][col] / d;
                if f != T::zero() {
                    for c in col..=p {
                        let v = a[col][c];
                        a[r][c] -= f * v;
                    }
                }
            }
        }
    }
    (0..p)
        .map(|i| if a[i][i].abs() <= T::epsilon() { T::zero() } else { a[i][p] / a[i][i] })
        .collect()
}

/// Decile breakpoints (10%..90%) of the sorted values, deduplicated.
fn decile_grid<T: Real>(values: &mut [T]) -> Vec<T> {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = values.len();
    let mut grid: Vec<T> = (1..10).map(|d| values[(d * n / 10).min(n - 1)]).collect();
    grid.dedup();
    grid
}

/// Forward selection over `candidates` (in the given order) for predicting `response`.
///
/// Continuous candidates are tried as a linear term and as a hinge at each decile; categorical
/// candidates (any non-numeric value) enter as level indicators. A candidate is accepted when its
/// best form lowers the k-fold CV MSE by at least `min_improvement` relative to the current model.
pub fn fit_piecewise<T: Real>(
    table: &CaseTable,
    response: &str,
    candidates: &[&str],
    cfg: &FitConfig,
) -> Result<PiecewiseRegression<T>> {
    if cfg.folds < 2 {
        return Err(Error::InvalidArgument("cross-validation needs at least 2 folds".into()));
    }
    let resp_col = table.column(response).ok_or_else(|| Error::UnknownNode(response.to_string()))?;
    let cand_cols = candidates
        .iter()
        .map(|c| table.column(c).ok_or_else(|| Error::UnknownNode(c.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let categorical: Vec<bool> = cand_cols
        .iter()
        .map(|&c| table.rows.iter().any(|r| matches!(r[c], Value::Cat(_))))
        .collect();

    let mut complete: Vec<(T, Vec<Cell<T>>)> = Vec::new();
    for row in &table.rows {
        let Some(y) = row[resp_col].as_num().filter(|y| y.is_finite()) else { continue };
        let cells: Option<Vec<Cell<T>>> = cand_cols
            .iter()
            .zip(&categorical)
            .map(|(&c, &is_cat)| match (&row[c], is_cat) {
                (Value::Missing, _) => None,
                (v, true) => v.label().map(Cell::Label),
                (Value::Num(x), false) => x.is_finite().then(|| Cell::Num(T::lit(*x))),
                (Value::Cat(_), false) => None,
            })
            .collect();
        if let Some(cells) = cells {
            complete.push((T::lit(y), cells));
        }
    }
    let need = (cfg.cases_per_candidate * candidates.len()).max(cfg.folds);
    if complete.len() < need {
        return Err(Error::TooFewCases { have: complete.len(), need });
    }
    // Canonical order makes fold assignment independent of input order.
    complete.sort_by(|(ya, ca), (yb, cb)| {
        ya.partial_cmp(yb)
            .unwrap_or(Ordering::Equal)
            .then_with(|| ca.iter().zip(cb).map(|(a, b)| cmp_cell(a, b)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal))
    });
    let design = Design {
        response: complete.iter().map(|(y, _)| *y).collect(),
        rows: complete.into_iter().map(|(_, c)| c).collect(),
    };

    let forms_for = |c: usize| -> Vec<Form<T>> {
        if categorical[c] {
            let mut levels: Vec<String> = design
                .rows
                .iter()
                .map(|r| match &r[c] {
                    Cell::Label(l) => l.clone(),
                    Cell::Num(_) => unreachable!(),
                })
                .collect();
            levels.sort();
            levels.dedup();
            if levels.len() < 2 {
                return Vec::new();
            }
            vec![Form::Categorical(c, levels)]
        } else {
            let mut xs: Vec<T> = design
                .rows
                .iter()
                .map(|r| match r[c] {
                    Cell::Num(x) => x,
                    Cell::Label(_) => unreachable!(),
                })
                .collect();
            let mut forms = vec![Form::Linear(c)];
            forms.extend(decile_grid(&mut xs).into_iter().map(|b| Form::Hinge(c, b)));
            forms
        }
    };

    let threshold = T::one() - T::lit(cfg.min_improvement);
    let mut chosen: Vec<Form<T>> = Vec::new();
    let mut remaining: Vec<usize> = (0..candidates.len()).collect();
    let mut best = design.cv_mse(&chosen, cfg.folds);
    loop {
        let mut round: Option<(T, Form<T>)> = None;
        for &c in &remaining {
            for form in forms_for(c) {
                let mut trial = chosen.clone();
                trial.push(form.clone());
                let score = design.cv_mse(&trial, cfg.folds);
                if round.as_ref().is_none_or(|(s, _)| score < *s) {
                    round = Some((score, form));
                }
            }
        }
        match round {
            Some((score, form)) if best > T::zero() && score <= best * threshold => {
                remaining.retain(|&c| c != form.candidate());
                chosen.push(form);
                best = score;
            }
            _ => break,
        }
    }

    let all: Vec<usize> = (0..design.response.len()).collect();
    let beta = design.fit(&chosen, &all);
    let x = design.matrix(&chosen, &all);
    let sse: T = x.iter().zip(&design.response).map(|(row, &y)| (y - dot(row, &beta)).powi(2)).sum();
    let params = beta.len();
    let dof = if all.len() > params { all.len() - params } else { all.len() };
    let sigma = (sse / T::from_usize(dof).unwrap()).sqrt().max(T::lit(cfg.sigma_floor));

    let mut terms = Vec::new();
    let mut k = 1;
    for form in &chosen {
        let coef = &beta[k..k + form.width()];
        k += form.width();
        let predictor = candidates[form.candidate()].to_string();
        terms.push(match form {
            Form::Linear(_) => Term::Linear { predictor, slope: coef[0] },
            Form::Hinge(_, b) => Term::Hinge { predictor, breakpoint: *b, slopes: [coef[0], coef[0] + coef[1]] },
            Form::Categorical(_, levels) => Term::Categorical {
                predictor,
                effects: levels[1..].iter().cloned().zip(coef.iter().copied()).collect(),
            },
        });
    }
    Ok(PiecewiseRegression { response: response.to_string(), intercept: beta[0], terms, sigma, cv_score: best })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_recovers_exact_line() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 1.0 + 2.0 * i as f64).collect();
        let b = least_squares(&x, &y);
        assert!((b[0] - 1.0).abs() < 1e-6 && (b[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn solver_zeroes_empty_column() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64, 0.0]).collect();
        let y: Vec<f64> = (0..10).map(|i| 3.0 - i as f64).collect();
        let b = least_squares(&x, &y);
        assert!((b[1] + 1.0).abs() < 1e-6);
        assert_eq!(b[2], 0.0);
    }

    #[test]
    fn deciles() {
        let mut xs: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(decile_grid(&mut xs), vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0]);
        let mut flat = vec![1.0_f64; 20];
        assert_eq!(decile_grid(&mut flat), vec![1.0]);
    }

    #[test]
    fn predict_examples() {
        let m = PiecewiseRegression::intercept_only("y", 4.0_f64, 1.0);
        assert_eq!(m.predict_mean(|_| None).unwrap(), 4.0);

        let line = PiecewiseRegression {
            response: "y".into(),
            intercept: 1.0,
            terms: vec![Term::Linear { predictor: "x".into(), slope: 2.0 }],
            sigma: 1.0,
            cv_score: 0.0,
        };
        assert_eq!(line.predict_mean(|_| Some(Input::Num(3.0))).unwrap(), 7.0);
        assert!(matches!(line.predict_mean(|_| None), Err(Error::MissingPredictor(p)) if p == "x"));

        let hinge = PiecewiseRegression {
            response: "y".into(),
            intercept: 2.0,
            terms: vec![Term::Hinge { predictor: "q".into(), breakpoint: 40.0, slopes: [0.0, 1.0] }],
            sigma: 1.0,
            cv_score: 0.0,
        };
        assert_eq!(hinge.predict_mean(|_| Some(Input::Num(50.0))).unwrap(), 12.0);
        assert_eq!(hinge.predict_mean(|_| Some(Input::Num(10.0))).unwrap(), 2.0);
    }

    #[test]
    fn categorical_effects_default_to_zero() {
        let m = PiecewiseRegression {
            response: "y".into(),
            intercept: 5.0_f64,
            terms: vec![Term::Categorical {
                predictor: "w".into(),
                effects: [("storm".to_string(), 20.0)].into_iter().collect(),
            }],
            sigma: 1.0,
            cv_score: 0.0,
        };
        assert_eq!(m.predict_mean(|_| Some(Input::Label("storm"))).unwrap(), 25.0);
        assert_eq!(m.predict_mean(|_| Some(Input::Label("clear"))).unwrap(), 5.0);
        assert!(m.predict_mean(|_| Some(Input::Num(1.0))).is_ok());
    }

    #[test]
    fn json_shape() {
        let m = PiecewiseRegression {
            response: "y".into(),
            intercept: 1.0_f64,
            terms: vec![Term::Hinge { predictor: "q".into(), breakpoint: 40.0, slopes: [0.1, 1.0] }],
            sigma: 2.0,
            cv_score: 3.0,
        };
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["terms"][0]["kind"], "hinge");
        assert_eq!(v["terms"][0]["slopes"][1], 1.0);
        let back: PiecewiseRegression<f64> = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.breakpoints(), vec![Some(40.0)]);
    }
}
