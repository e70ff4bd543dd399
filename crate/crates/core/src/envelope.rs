//! Upper-regular envelopes of gridded positive functions.
//!
//! Working in log-log coordinates `Υ(t) = log f(e^t)`, the construction
//! replaces `Υ` by a regularized upper bound `Υ_reg` that is linear on
//! half-integer intervals, then either tilts it down to a nonincreasing
//! ramp (when it is eventually nonpositive) or takes the concave majorant
//! of `Υ_reg ∨ 0`. The result `f_up = exp(Υ_up(log r))` dominates `f`,
//! and in the concave case `log f_up(r) / log r` is nonincreasing.

use alloc::vec::Vec;

use crate::error::{domain, Error, Result};

/// Fraction of the log-domain treated as the tail for "eventually" claims.
pub const TAIL_FRACTION: f64 = 0.25;

const CHECK_TOL: f64 = 1e-9;

/// Positive samples `f(r_i)` on knots `1 = r_0 < r_1 < ...`, interpolated
/// linearly in `(log r, log f)`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GriddedFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl GriddedFunction {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: knots.len(), got: values.len() });
        }
        if knots.len() < 2 {
            return Err(Error::InsufficientData { needed: 2, got: knots.len() });
        }
        if knots[0] != 1.0 {
            return Err(domain("grid must start at r = 1"));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) || !knots[knots.len() - 1].is_finite() {
            return Err(domain("knots must be strictly increasing and finite"));
        }
        if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(domain("function values must be positive and finite"));
        }
        Ok(GriddedFunction { knots, values })
    }

    /// Samples `f` on the given knots.
    pub fn sample(knots: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = knots.iter().map(|&r| f(r)).collect();
        GriddedFunction::new(knots, values)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Smallest value, the `δ` with `f ≥ δ` on the grid.
    pub fn floor(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn r_max(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// `Υ(t) = log f(e^t)` as a piecewise-linear function on `[0, log r_max]`.
    pub fn log_log(&self) -> PiecewiseLinear {
        PiecewiseLinear {
            xs: self.knots.iter().map(|&r| libm::log(r)).collect(),
            ys: self.values.iter().map(|&v| libm::log(v)).collect(),
        }
    }
}

/// Continuous piecewise-linear function given by its breakpoints.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: xs.len().min(ys.len()) });
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(domain("breakpoints must be strictly increasing"));
        }
        if ys.iter().chain(&xs).any(|v| !v.is_finite()) {
            return Err(domain("breakpoints and values must be finite"));
        }
        Ok(PiecewiseLinear { xs, ys })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    /// Value at `x`, held constant outside the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&b| b <= x) - 1;
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        if x == x0 {
            return y0;
        }
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Largest absolute slope.
    pub fn max_slope(&self) -> f64 {
        self.xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
            .fold(0.0, f64::max)
    }

    /// Supremum on `[a, b]`: the larger of the endpoint values and the
    /// breakpoints inside.
    pub fn sup_on(&self, a: f64, b: f64) -> f64 {
        let mut m = self.eval(a).max(self.eval(b));
        for (x, y) in self.xs.iter().zip(&self.ys) {
            if *x > a && *x < b {
                m = m.max(*y);
            }
        }
        m
    }

    fn merged_breakpoints(&self, other: &PiecewiseLinear) -> Vec<f64> {
        let mut all: Vec<f64> = self.xs.iter().chain(&other.xs).copied().collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }
}

/// `Υ_reg`: linear on each half-integer interval with node values
/// `M_1` at 0 and ½, `M_k` at `k - ½` and `max(M_k, M_{k+1})` at `k`, where
/// `M_k` is the sup of `Υ` on `[k-1, k]`. The last interval is cut at
/// `R = log r_max` and kept flat so slopes stay within `2·c124`.
pub fn upsilon_regularize(f: &GriddedFunction) -> PiecewiseLinear {
    regularize(&f.log_log())
}

fn regularize(ups: &PiecewiseLinear) -> PiecewiseLinear {
    let r = ups.domain().1;
    let n = libm::ceil(r).max(1.0) as usize;
    let m: Vec<f64> = (1..=n).map(|k| ups.sup_on((k - 1) as f64, (k as f64).min(r))).collect();
    let mut xs = Vec::with_capacity(2 * n + 1);
    let mut ys = Vec::with_capacity(2 * n + 1);
    xs.push(0.0);
    ys.push(m[0]);
    for k in 1..=n {
        let half = k as f64 - 0.5;
        if half < r {
            xs.push(half);
            ys.push(m[k - 1]);
        }
        let node = k as f64;
        if node < r {
            xs.push(node);
            ys.push(m[k - 1].max(m[k]));
        }
    }
    // flat closing segment up to R
    let last = *ys.last().expect("non-empty");
    if r > *xs.last().expect("non-empty") {
        xs.push(r);
        ys.push(last);
    }
    PiecewiseLinear { xs, ys }
}

/// Least concave function above `max(p, 0)`: the upper convex hull of the
/// clipped breakpoint graph.
pub fn concave_majorant(p: &PiecewiseLinear) -> PiecewiseLinear {
    let pts: Vec<(f64, f64)> = p.xs.iter().zip(&p.ys).map(|(&x, &y)| (x, y.max(0.0))).collect();
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &q in &pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // drop b unless it lies strictly above the chord a-q
            let cross = (b.0 - a.0) * (q.1 - a.1) - (b.1 - a.1) * (q.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(q);
    }
    PiecewiseLinear { xs: hull.iter().map(|h| h.0).collect(), ys: hull.iter().map(|h| h.1).collect() }
}

/// Which branch of the construction produced the envelope.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EnvelopeCase {
    /// `Υ_reg ≤ 0` on the tail: a linear ramp down to 0 at `r0`.
    EventuallyNonpositive,
    /// Concave majorant of `Υ_reg ∨ 0`.
    ConcaveMajorant,
}

impl EnvelopeCase {
    pub fn number(self) -> u8 {
        match self {
            EnvelopeCase::EventuallyNonpositive => 1,
            EnvelopeCase::ConcaveMajorant => 2,
        }
    }
}

/// Grid-level postconditions of the envelope.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnvelopeChecks {
    /// `f_up ≥ f` at every knot.
    pub dominates: bool,
    /// `Υ_up` nondecreasing (concave case) or nondecreasing after `r0`.
    pub eventually_nondecreasing: bool,
    /// `log f_up(r) / log r` nonincreasing for `r > 1` (concave case only).
    pub log_ratio_nonincreasing: bool,
    /// `min f_up/f ≤ ratio_bound`.
    pub near_tight: bool,
}

impl EnvelopeChecks {
    pub fn all(&self) -> bool {
        self.dominates && self.eventually_nondecreasing && self.log_ratio_nonincreasing && self.near_tight
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Envelope {
    pub f_up: GriddedFunction,
    pub case: EnvelopeCase,
    /// Start of the flat zero tail in log units (ramp case only).
    pub t0: Option<f64>,
    /// Observed `max |Υ(s) - Υ(r)|` over `|s - r| ≤ 2`.
    pub c124: f64,
    /// Observed `max (Υ_reg - Υ)`.
    pub gap: f64,
    pub upsilon_reg: PiecewiseLinear,
    pub upsilon_up: PiecewiseLinear,
    /// `min` over knots of `f_up / f`.
    pub min_ratio: f64,
    /// `exp(c124 + gap + max(0, -min Υ))`.
    pub ratio_bound: f64,
    pub checks: EnvelopeChecks,
}

/// `max |p(s) - p(r)|` over `|s - r| ≤ span`, exact for piecewise-linear `p`.
pub fn local_oscillation(p: &PiecewiseLinear, span: f64) -> f64 {
    let (lo, hi) = p.domain();
    let mut probes: Vec<f64> = p.xs.clone();
    for &x in &p.xs {
        for y in [x - span, x + span] {
            if y > lo && y < hi {
                probes.push(y);
            }
        }
    }
    probes.sort_by(f64::total_cmp);
    probes.dedup();
    let vals: Vec<f64> = probes.iter().map(|&x| p.eval(x)).collect();
    let mut best: f64 = 0.0;
    let mut start = 0;
    for j in 0..probes.len() {
        while probes[j] - probes[start] > span * (1.0 + 1e-12) {
            start += 1;
        }
        for i in start..j {
            best = best.max((vals[j] - vals[i]).abs());
        }
    }
    best
}

/// Builds `f_up` on the knots of `f`.
pub fn upper_regular_envelope(f: &GriddedFunction) -> Result<Envelope> {
    let ups = f.log_log();
    let reg = regularize(&ups);
    let r = ups.domain().1;
    let c124 = local_oscillation(&ups, 2.0);
    let gap = reg
        .merged_breakpoints(&ups)
        .iter()
        .map(|&x| reg.eval(x) - ups.eval(x))
        .fold(f64::NEG_INFINITY, f64::max);

    let tail_start = (1.0 - TAIL_FRACTION) * r;
    let tail_nonpositive = reg.xs.iter().zip(&reg.ys).filter(|(x, _)| **x >= tail_start).all(|(_, y)| *y <= 0.0);

    let (case, t0, up) = if tail_nonpositive {
        // smallest breakpoint from which Υ_reg stays ≤ 0
        let mut first = reg.xs.len() - 1;
        while first > 0 && reg.ys[first - 1] <= 0.0 {
            first -= 1;
        }
        let t0 = reg.xs[first];
        let slope = 2.0 * c124;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &x in &reg.xs {
            xs.push(x);
            ys.push(if x <= t0 { slope * (t0 - x) } else { 0.0 });
        }
        (EnvelopeCase::EventuallyNonpositive, Some(t0), PiecewiseLinear { xs, ys })
    } else {
        let mut hull = concave_majorant(&reg);
        // flatten after the peak so the majorant is nondecreasing
        let peak = hull.ys.iter().enumerate().fold(0, |b, (i, y)| if *y > hull.ys[b] { i } else { b });
        let top = hull.ys[peak];
        hull.xs.truncate(peak + 1);
        hull.ys.truncate(peak + 1);
        if hull.xs[peak] < r {
            hull.xs.push(r);
            hull.ys.push(top);
        }
        (EnvelopeCase::ConcaveMajorant, None, hull)
    };

    let mut values = Vec::with_capacity(f.knots.len());
    for (&k, &v) in f.knots.iter().zip(&f.values) {
        let mut e = libm::exp(up.eval(libm::log(k)));
        // absorb last-ulp rounding where the envelope touches f
        if e < v && e >= v * (1.0 - 1e-12) {
            e = v;
        }
        values.push(e);
    }
    let f_up = GriddedFunction { knots: f.knots.clone(), values };

    let ratios: Vec<f64> = f_up.values.iter().zip(&f.values).map(|(u, v)| u / v).collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let min_ups = ups.ys.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio_bound = libm::exp(c124 + gap + (-min_ups).max(0.0));

    let ts: Vec<f64> = f.knots.iter().map(|&k| libm::log(k)).collect();
    let us: Vec<f64> = ts.iter().map(|&t| up.eval(t)).collect();
    let tol = |a: f64| CHECK_TOL * (1.0 + a.abs());
    let from = match t0 {
        Some(t0) => ts.partition_point(|&t| t < t0),
        None => 0,
    };
    let eventually_nondecreasing = us[from..].windows(2).all(|w| w[1] >= w[0] - tol(w[0]));
    let log_ratio_nonincreasing = match case {
        EnvelopeCase::ConcaveMajorant => {
            ts.iter().zip(&us).skip(1).collect::<Vec<_>>().windows(2).all(|w| {
                let (a, b) = (w[0].1 / w[0].0, w[1].1 / w[1].0);
                b <= a + tol(a)
            })
        }
        EnvelopeCase::EventuallyNonpositive => true,
    };
    let checks = EnvelopeChecks {
        dominates: ratios.iter().all(|&q| q >= 1.0),
        eventually_nondecreasing,
        log_ratio_nonincreasing,
        near_tight: min_ratio.is_finite() && min_ratio <= ratio_bound * (1.0 + 1e-12),
    };
    Ok(Envelope { f_up, case, t0, c124, gap, upsilon_reg: reg, upsilon_up: up, min_ratio, ratio_bound, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn grid(r_max_log2: u32, per_octave: u32) -> Vec<f64> {
        (0..=r_max_log2 * per_octave).map(|i| libm::exp2(i as f64 / per_octave as f64)).collect()
    }

    #[test]
    fn constant_two_regularizes_to_log_two() {
        let f = GriddedFunction::sample(grid(10, 4), |_| 2.0).unwrap();
        let reg = upsilon_regularize(&f);
        assert!(reg.values().iter().all(|&y| y == libm::log(2.0)));
        let env = upper_regular_envelope(&f).unwrap();
        assert_eq!(env.case, EnvelopeCase::ConcaveMajorant);
        assert!(env.f_up.values().iter().all(|&v| (v - 2.0).abs() < 1e-12));
        assert!(env.checks.all());
    }

    #[test]
    fn identity_in_log_coordinates() {
        // f(r) = r gives Υ(t) = t, M_k = k
        let knots: Vec<f64> = (0..=60).map(|i| libm::exp(i as f64 / 10.0)).collect();
        let f = GriddedFunction::sample(knots, |r| r).unwrap();
        let reg = upsilon_regularize(&f);
        for k in 1..=5 {
            assert!((reg.eval(k as f64 - 0.5) - k as f64).abs() < 1e-12);
            assert!((reg.eval(k as f64) - (k + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn hull_example() {
        let p = PiecewiseLinear::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 2.0, 1.0, 3.0]).unwrap();
        let h = concave_majorant(&p);
        assert_eq!(h.breakpoints(), &[0.0, 1.0, 3.0]);
        assert_eq!(h.eval(2.0), 2.5);
        let c = PiecewiseLinear::new(vec![0.0, 1.0, 2.0], vec![3.0, 3.0, 3.0]).unwrap();
        assert_eq!(concave_majorant(&c).eval(1.5), 3.0);
        let concave = PiecewiseLinear::new(vec![0.0, 1.0, 2.0, 4.0], vec![0.0, 2.0, 3.0, 3.5]).unwrap();
        assert_eq!(concave_majorant(&concave), concave);
    }

    #[test]
    fn half_is_lifted_to_one() {
        let f = GriddedFunction::sample(grid(12, 2), |_| 0.5).unwrap();
        let env = upper_regular_envelope(&f).unwrap();
        assert_eq!(env.case, EnvelopeCase::EventuallyNonpositive);
        assert_eq!(env.t0, Some(0.0));
        assert!(env.f_up.values().iter().all(|&v| v == 1.0));
        assert_eq!(env.min_ratio, 2.0);
        assert!(env.checks.all());
    }

    #[test]
    fn root_log_stays_within_gap() {
        let f = GriddedFunction::sample(grid(20, 8), |r| libm::exp(libm::sqrt(libm::log(r)))).unwrap();
        let env = upper_regular_envelope(&f).unwrap();
        assert_eq!(env.case, EnvelopeCase::ConcaveMajorant);
        for (u, v) in env.f_up.values().iter().zip(f.values()) {
            assert!(*u >= *v);
        }
        assert!(env.min_ratio <= libm::exp(env.gap) * (1.0 + 1e-12));
        assert!(env.checks.all());
    }

    #[test]
    fn oscillation_is_exact() {
        let p = PiecewiseLinear::new(vec![0.0, 1.0, 5.0], vec![0.0, 4.0, 0.0]).unwrap();
        // best pair: s = 1, r = 3 (value 2) or r = -1 clipped to 0
        assert_eq!(local_oscillation(&p, 2.0), 4.0);
        let q = PiecewiseLinear::new(vec![0.0, 10.0], vec![0.0, 5.0]).unwrap();
        assert!((local_oscillation(&q, 2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_grids() {
        assert!(GriddedFunction::new(vec![2.0, 3.0], vec![1.0, 1.0]).is_err());
        assert!(GriddedFunction::new(vec![1.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(GriddedFunction::new(vec![1.0, 2.0], vec![1.0, 0.0]).is_err());
    }
}
