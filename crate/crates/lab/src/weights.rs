use std::fmt;
use std::str::FromStr;

use fpp_core::{ConstantWeights, Distribution, EdgeWeights, WeightField};

/// A random distribution from the core grammar, or `const:MU` which puts
/// the same weight on every edge (a testing hook with known answers).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightSpec {
    Random(Distribution),
    Constant(f64),
}

impl FromStr for WeightSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(mu) = s.trim().strip_prefix("const:") {
            let mu: f64 = mu.trim().parse().map_err(|_| format!("bad constant weight `{s}`"))?;
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(format!("constant weight must be positive and finite, got {mu}"));
            }
            return Ok(WeightSpec::Constant(mu));
        }
        s.parse::<Distribution>().map(WeightSpec::Random).map_err(|e| e.to_string())
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::Random(d) => write!(f, "{d}"),
            WeightSpec::Constant(mu) => write!(f, "const:{mu}"),
        }
    }
}

impl WeightSpec {
    pub fn field(&self, seed: u64, replica: u64) -> Weights {
        match *self {
            WeightSpec::Random(d) => Weights::Random(WeightField::new(seed, replica, d).expect("validated distribution")),
            WeightSpec::Constant(mu) => Weights::Constant(ConstantWeights(mu)),
        }
    }
}

pub enum Weights {
    Random(WeightField),
    Constant(ConstantWeights),
}

impl EdgeWeights for Weights {
    fn weight(&self, lower: &[i64], axis: usize) -> f64 {
        match self {
            Weights::Random(f) => f.weight(lower, axis),
            Weights::Constant(c) => c.weight(lower, axis),
        }
    }
}
