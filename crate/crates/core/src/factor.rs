//! Dense factors over discrete variables, the workhorse of variable elimination.

use crate::scalar::Real;

/// Values over the joint states of `vars` (ascending), last variable varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor<T> {
    pub vars: Vec<usize>,
    pub cards: Vec<usize>,
    pub values: Vec<T>,
}

fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1; cards.len()];
    for k in (0..cards.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * cards[k + 1];
    }
    s
}

impl<T: Real> Factor<T> {
    pub fn scalar(value: T) -> Self {
        Factor { vars: Vec::new(), cards: Vec::new(), values: vec![value] }
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.cards)
    }

    /// Strides of `self` laid out along `vars` (zero where `self` does not mention a variable).
    fn strides_along(&self, vars: &[usize]) -> Vec<usize> {
        let own = self.strides();
        vars.iter()
            .map(|v| self.vars.iter().position(|x| x == v).map_or(0, |k| own[k]))
            .collect()
    }

    pub fn product(&self, other: &Factor<T>) -> Factor<T> {
        let mut vars: Vec<usize> = self.vars.iter().chain(&other.vars).copied().collect();
        vars.sort_unstable();
        vars.dedup();
        let cards: Vec<usize> = vars
            .iter()
            .map(|v| {
                self.vars
                    .iter()
                    .position(|x| x == v)
                    .map(|k| self.cards[k])
                    .unwrap_or_else(|| other.cards[other.vars.iter().position(|x| x == v).unwrap()])
            })
            .collect();
        let sa = self.strides_along(&vars);
        let sb = other.strides_along(&vars);
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut assign = vec![0usize; vars.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[ia] * other.values[ib]);
            for k in (0..vars.len()).rev() {
                assign[k] += 1;
                ia += sa[k];
                ib += sb[k];
                if assign[k] < cards[k] {
                    break;
                }
                ia -= sa[k] * cards[k];
                ib -= sb[k] * cards[k];
                assign[k] = 0;
            }
        }
        Factor { vars, cards, values }
    }

    pub fn sum_out(&self, var: usize) -> Factor<T> {
        let Some(p) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(p);
        cards.remove(p);
        let out_strides = strides(&cards);
        let mut along: Vec<usize> = Vec::with_capacity(self.vars.len());
        let mut j = 0;
        for k in 0..self.vars.len() {
            if k == p {
                along.push(0);
            } else {
                along.push(out_strides[j]);
                j += 1;
            }
        }
        let mut values = vec![T::zero(); cards.iter().product()];
        let mut assign = vec![0usize; self.vars.len()];
        let mut io = 0usize;
        for &v in &self.values {
            values[io] += v;
            for k in (0..self.vars.len()).rev() {
                assign[k] += 1;
                io += along[k];
                if assign[k] < self.cards[k] {
                    break;
                }
                io -= along[k] * self.cards[k];
                assign[k] = 0;
            }
        }
        Factor { vars, cards, values }
    }

    pub fn total(&self) -> T {
        self.values.iter().copied().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_marginal() {
        // f(a) = [0.2, 0.8]; g(a, b) = P(b | a)
        let f = Factor { vars: vec![0], cards: vec![2], values: vec![0.2_f64, 0.8] };
        let g = Factor { vars: vec![0, 1], cards: vec![2, 3], values: vec![0.1, 0.2, 0.7, 0.5, 0.25, 0.25] };
        let joint = f.product(&g);
        assert_eq!(joint.vars, vec![0, 1]);
        let b = joint.sum_out(0);
        let expect = [0.2 * 0.1 + 0.8 * 0.5, 0.2 * 0.2 + 0.8 * 0.25, 0.2 * 0.7 + 0.8 * 0.25];
        for (x, y) in b.values.iter().zip(expect) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!((joint.total() - 1.0_f64).abs() < 1e-15);
    }

    #[test]
    fn product_with_disjoint_scopes_and_middle_sum() {
        let f = Factor { vars: vec![2], cards: vec![2], values: vec![1.0, 2.0] };
        let g = Factor { vars: vec![0], cards: vec![3], values: vec![1.0, 10.0, 100.0] };
        let h = f.product(&g);
        assert_eq!(h.vars, vec![0, 2]);
        assert_eq!(h.values, vec![1.0, 2.0, 10.0, 20.0, 100.0, 200.0]);
        let k = Factor { vars: vec![0, 1, 2], cards: vec![2, 2, 2], values: (0..8).map(f64::from).collect() };
        assert_eq!(k.sum_out(1).values, vec![2.0, 4.0, 10.0, 12.0]);
        assert_eq!(k.sum_out(7), k);
    }
}
