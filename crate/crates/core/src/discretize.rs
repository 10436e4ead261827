//! Ordered bins for continuous variables, with optional unbounded tails.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScheme<T>", into = "RawScheme<T>")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct BinScheme<T> {
    edges: Vec<T>,
    lower_open: bool,
    upper_open: bool,
    tail_halfwidth: T,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
struct RawScheme<T> {
    edges: Vec<T>,
    lower_open: bool,
    upper_open: bool,
    #[serde(default)]
    tail_halfwidth: Option<T>,
}

impl<T: Real> TryFrom<RawScheme<T>> for BinScheme<T> {
    type Error = Error;

    fn try_from(raw: RawScheme<T>) -> Result<Self> {
        BinScheme::with_tail_halfwidth(raw.edges, raw.lower_open, raw.upper_open, raw.tail_halfwidth)
    }
}

impl<T: Real> From<BinScheme<T>> for RawScheme<T> {
    fn from(s: BinScheme<T>) -> Self {
        RawScheme {
            edges: s.edges,
            lower_open: s.lower_open,
            upper_open: s.upper_open,
            tail_halfwidth: Some(s.tail_halfwidth),
        }
    }
}

impl<T: Real> BinScheme<T> {
    /// Builds a scheme whose tail midpoints sit half a modal interior width beyond the edge.
    pub fn new(edges: Vec<T>, lower_open: bool, upper_open: bool) -> Result<Self> {
        Self::with_tail_halfwidth(edges, lower_open, upper_open, None)
    }

    pub fn with_tail_halfwidth(
        edges: Vec<T>,
        lower_open: bool,
        upper_open: bool,
        tail_halfwidth: Option<T>,
    ) -> Result<Self> {
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidScheme("edges must be finite".into()));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidScheme("edges must be strictly increasing".into()));
        }
        let bins = edges.len().saturating_sub(1) + usize::from(lower_open) + usize::from(upper_open);
        if edges.is_empty() || bins < 2 {
            return Err(Error::InvalidScheme(format!("need at least 2 bins, got {bins}")));
        }
        let tail_halfwidth = match tail_halfwidth {
            Some(h) if h > T::zero() && h.is_finite() => h,
            Some(_) => return Err(Error::InvalidScheme("tail_halfwidth must be positive".into())),
            None => modal_width(&edges).unwrap_or_else(T::one) / T::lit(2.0),
        };
        Ok(BinScheme { edges, lower_open, upper_open, tail_halfwidth })
    }

    /// Uniform bins of `width` from `lo` to `hi` with open tails on both sides.
    pub fn uniform(lo: T, hi: T, width: T) -> Result<Self> {
        if !(width > T::zero()) || !(hi > lo) {
            return Err(Error::InvalidScheme("uniform scheme needs lo < hi and width > 0".into()));
        }
        let steps = ((hi - lo) / width).round().to_usize().unwrap_or(0);
        let edges = (0..=steps).map(|i| lo + width * T::from_usize(i).unwrap()).collect();
        Self::new(edges, true, true)
    }

    /// 15-minute bins from -60 to +120 with open tails.
    pub fn default_delay() -> Self {
        Self::uniform(T::lit(-60.0), T::lit(120.0), T::lit(15.0)).expect("valid default scheme")
    }

    /// 2-minute bins used for density plots, closed on both ends.
    pub fn density(lo: T, hi: T) -> Result<Self> {
        let two = T::lit(2.0);
        let steps = ((hi - lo) / two).ceil().to_usize().unwrap_or(0);
        let edges = (0..=steps).map(|i| lo + two * T::from_usize(i).unwrap()).collect();
        Self::new(edges, false, false)
    }

    pub fn edges(&self) -> &[T] {
        &self.edges
    }

    pub fn lower_open(&self) -> bool {
        self.lower_open
    }

    pub fn upper_open(&self) -> bool {
        self.upper_open
    }

    pub fn tail_halfwidth(&self) -> T {
        self.tail_halfwidth
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1 + usize::from(self.lower_open) + usize::from(self.upper_open)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the bin holding `x`. Interior bins are `[lo, hi)`.
    pub fn bin_index(&self, x: T) -> Result<usize> {
        if !x.is_finite() {
            return Err(Error::InvalidArgument(format!("cannot bin non-finite value {x}")));
        }
        let first = self.edges[0];
        let last = *self.edges.last().unwrap();
        if x < first {
            return if self.lower_open { Ok(0) } else { Err(self.out_of_range(x)) };
        }
        if x >= last {
            return if self.upper_open { Ok(self.len() - 1) } else { Err(self.out_of_range(x)) };
        }
        let interior = self.edges.partition_point(|&e| e <= x) - 1;
        Ok(interior + usize::from(self.lower_open))
    }

    fn out_of_range(&self, x: T) -> Error {
        Error::OutOfRange {
            value: x.as_f64(),
            lo: self.edges[0].as_f64(),
            hi: self.edges.last().unwrap().as_f64(),
        }
    }

    fn check(&self, k: usize) -> Result<()> {
        if k < self.len() {
            Ok(())
        } else {
            Err(Error::InvalidBin { index: k, bins: self.len() })
        }
    }

    /// `(lo, hi)` of bin `k`; open tails use infinities.
    pub fn bounds(&self, k: usize) -> Result<(T, T)> {
        self.check(k)?;
        if self.lower_open && k == 0 {
            return Ok((T::neg_infinity(), self.edges[0]));
        }
        let i = k - usize::from(self.lower_open);
        if i + 1 < self.edges.len() {
            Ok((self.edges[i], self.edges[i + 1]))
        } else {
            Ok((*self.edges.last().unwrap(), T::infinity()))
        }
    }

    /// Representative value of bin `k`.
    pub fn midpoint(&self, k: usize) -> Result<T> {
        let (lo, hi) = self.bounds(k)?;
        Ok(if lo.is_infinite() {
            hi - self.tail_halfwidth
        } else if hi.is_infinite() {
            lo + self.tail_halfwidth
        } else {
            (lo + hi) / T::lit(2.0)
        })
    }

    pub fn midpoints(&self) -> Vec<T> {
        (0..self.len()).map(|k| self.midpoint(k).unwrap()).collect()
    }

    pub fn label(&self, k: usize) -> Result<String> {
        let (lo, hi) = self.bounds(k)?;
        Ok(if lo.is_infinite() {
            format!("(-inf,{hi})")
        } else if hi.is_infinite() {
            format!("[{lo},inf)")
        } else {
            format!("[{lo},{hi})")
        })
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.len()).map(|k| self.label(k).unwrap()).collect()
    }

    /// Normalized histogram of `values` over the bins.
    pub fn empirical_density(&self, values: &[T]) -> Result<Vec<T>> {
        if values.is_empty() {
            return Err(Error::EmptyInput("empirical_density needs at least one value"));
        }
        let mut counts = vec![0usize; self.len()];
        for &v in values {
            counts[self.bin_index(v)?] += 1;
        }
        let n = T::from_usize(values.len()).unwrap();
        Ok(counts.into_iter().map(|c| T::from_usize(c).unwrap() / n).collect())
    }
}

fn modal_width<T: Real>(edges: &[T]) -> Option<T> {
    let widths: Vec<T> = edges.windows(2).map(|w| w[1] - w[0]).collect();
    let mut best: Option<(usize, T)> = None;
    for &w in &widths {
        let count = widths.iter().filter(|&&o| o == w).count();
        best = match best {
            Some((c, b)) if c > count || (c == count && b <= w) => Some((c, b)),
            _ => Some((count, w)),
        };
    }
    best.map(|(_, w)| w)
}
