use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::{canonical_edge_id, Edge, Window};
use crate::error::{Error, Result};

/// Source of edge passage times.
///
/// An edge is addressed by its lower endpoint and its axis. Implementations
/// must be pure: the same edge always yields the same weight.
pub trait EdgeWeights: Sync {
    fn weight(&self, lower: &[i64], axis: usize) -> f64;

    fn edge_weight(&self, e: &Edge) -> f64 {
        self.weight(e.lower().coords(), e.axis())
    }
}

impl<T: EdgeWeights + ?Sized> EdgeWeights for &T {
    fn weight(&self, lower: &[i64], axis: usize) -> f64 {
        (**self).weight(lower, axis)
    }
}

/// Edge passage-time law. All variants are continuous, strictly positive
/// and have a finite exponential moment.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Distribution {
    Exponential { rate: f64 },
    Uniform { a: f64, b: f64 },
    ShiftedExponential { shift: f64, rate: f64 },
}

impl Default for Distribution {
    fn default() -> Self {
        Distribution::Exponential { rate: 1.0 }
    }
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Distribution::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            Distribution::Uniform { a, b } => a >= 0.0 && a < b && b.is_finite(),
            Distribution::ShiftedExponential { shift, rate } => {
                shift >= 0.0 && shift.is_finite() && rate > 0.0 && rate.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDistribution(format!("{self}")))
        }
    }

    /// Inverse CDF on the open unit interval.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Distribution::Exponential { rate } => -libm::log(u) / rate,
            Distribution::Uniform { a, b } => a + (b - a) * u,
            Distribution::ShiftedExponential { shift, rate } => shift - libm::log(u) / rate,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Exponential { rate } => 1.0 / rate,
            Distribution::Uniform { a, b } => 0.5 * (a + b),
            Distribution::ShiftedExponential { shift, rate } => shift + 1.0 / rate,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Distribution::Exponential { rate } | Distribution::ShiftedExponential { rate, .. } => {
                1.0 / (rate * rate)
            }
            Distribution::Uniform { a, b } => (b - a) * (b - a) / 12.0,
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Distribution::Exponential { rate } => write!(f, "exp:{rate}"),
            Distribution::Uniform { a, b } => write!(f, "unif:{a}:{b}"),
            Distribution::ShiftedExponential { shift, rate } => write!(f, "sexp:{shift}:{rate}"),
        }
    }
}

impl FromStr for Distribution {
    type Err = Error;

    /// Grammar: `exp:RATE`, `unif:A:B`, `sexp:SHIFT:RATE`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidDistribution(String::from(s));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| bad());
        let d = match parts.as_slice() {
            ["exp", rate] => Distribution::Exponential { rate: num(rate)? },
            ["unif", a, b] => Distribution::Uniform { a: num(a)?, b: num(b)? },
            ["sexp", shift, rate] => Distribution::ShiftedExponential { shift: num(shift)?, rate: num(rate)? },
            _ => return Err(bad()),
        };
        d.validate().map_err(|_| bad())?;
        Ok(d)
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn absorb(h: u64, v: u64) -> u64 {
    mix64(h.wrapping_add(GOLDEN) ^ mix64(v))
}

/// Counter-based iid edge weights.
///
/// The weight of an edge is `quantile(u)` where `u` is a 53-bit uniform
/// derived from a splitmix-style hash of `(seed, replica, lower endpoint,
/// axis)`. Nothing is stored, and a weight never depends on query order or
/// on which window the edge is seen through.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeightField {
    pub seed: u64,
    pub replica: u64,
    pub distribution: Distribution,
}

impl WeightField {
    pub fn new(seed: u64, replica: u64, distribution: Distribution) -> Result<Self> {
        distribution.validate()?;
        Ok(WeightField { seed, replica, distribution })
    }

    pub fn with_replica(&self, replica: u64) -> Self {
        WeightField { replica, ..*self }
    }

    /// Uniform variate on (0,1) attached to an edge.
    pub fn uniform(&self, lower: &[i64], axis: usize) -> f64 {
        let mut h = absorb(mix64(self.seed ^ GOLDEN), self.replica);
        h = absorb(h, lower.len() as u64);
        for &c in lower {
            h = absorb(h, c as u64);
        }
        h = absorb(h, axis as u64);
        ((h >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

impl EdgeWeights for WeightField {
    #[inline]
    fn weight(&self, lower: &[i64], axis: usize) -> f64 {
        self.distribution.quantile(self.uniform(lower, axis))
    }
}

/// Weight of an edge that must lie in the window or its one-site halo.
pub fn sample_weight(f: &WeightField, e: &Edge, w: &Window) -> Result<f64> {
    canonical_edge_id(e, w)?;
    Ok(f.edge_weight(e))
}

/// Every edge has the same passage time. Used for degenerate-law checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantWeights(pub f64);

impl EdgeWeights for ConstantWeights {
    fn weight(&self, _lower: &[i64], _axis: usize) -> f64 {
        self.0
    }
}

/// Explicit weights for the edges of one window, indexed by
/// [`canonical_edge_id`]. Edges outside the table read as `+inf`.
#[derive(Clone, Debug)]
pub struct TableWeights {
    window: Window,
    values: Vec<f64>,
}

impl TableWeights {
    pub fn new(window: Window, values: Vec<f64>) -> Result<Self> {
        if values.len() as u64 != window.edge_count() {
            return Err(Error::InsufficientData { needed: window.edge_count() as usize, got: values.len() });
        }
        Ok(TableWeights { window, values })
    }

    /// Snapshot of another weight source over a window.
    pub fn capture<W: EdgeWeights + ?Sized>(src: &W, window: &Window) -> Self {
        let mut values = alloc::vec![0.0; window.edge_count() as usize];
        let mut up = alloc::vec![0i64; window.dim()];
        for x in window.sites() {
            for k in 0..window.dim() {
                up.copy_from_slice(x.coords());
                up[k] += 1;
                if window.contains(&up) {
                    let e = Edge::new(x.clone(), super::Site::new(up.clone())).expect("adjacent");
                    let id = canonical_edge_id(&e, window).expect("inside");
                    values[id as usize] = src.weight(x.coords(), k);
                }
            }
        }
        TableWeights { window: window.clone(), values }
    }
}

impl EdgeWeights for TableWeights {
    fn weight(&self, lower: &[i64], axis: usize) -> f64 {
        let mut up = lower.to_vec();
        up[axis] += 1;
        if !(self.window.contains(lower) && self.window.contains(&up)) {
            return f64::INFINITY;
        }
        let e = Edge::new(super::Site::new(lower.to_vec()), super::Site::new(up)).expect("adjacent");
        match canonical_edge_id(&e, &self.window) {
            Ok(id) => self.values[id as usize],
            Err(_) => f64::INFINITY,
        }
    }
}
