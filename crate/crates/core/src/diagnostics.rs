//! Empirical probes of tail, gap, wandering and localness properties.
//!
//! Every probe reduces to tail counts of one sample over an increasing
//! grid, so reported probabilities are monotone by construction. Verdicts
//! are recomputed from the stored points and thresholds by
//! [`PropertyReport::rederive`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{domain, Error, Result};
use crate::estimators::{estimate_moments, GRef, MomentReport, SampleArchive, SampleKey};
use crate::geodesic::{DiscToDiscResult, GeodesicEngine};
use crate::geometry::{end_pairs, natural_cylinder, EndPairSet, Region, ShapeModel, Slab};
use crate::lattice::{EdgeWeights, Site, Window};
use crate::stats::{self, line_fit, quadratic_fit, wilson_interval};

/// Probe grid used when none is configured.
pub const DEFAULT_GRID: [f64; 5] = [0.1, 0.2, 0.5, 1.0, 2.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Property {
    ExpBound,
    ModerateGap,
    DownwardDeviation,
    Wandering,
    Concentration,
    LocalFluctuation,
    SlabVsFree,
    Backtrack,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Thresholds {
    /// Tail counts below this mark a grid point inconclusive.
    pub min_exceedances: usize,
    /// Minimum R² for a log-linear tail fit.
    pub min_r2: f64,
    /// Normal quantile for Wilson intervals.
    pub z: f64,
    /// `|κ|` above this classifies a tail as curved (see [`TailShape`]).
    pub curvature: f64,
    /// Log-log slope above which a curve counts as growing.
    pub growth_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { min_exceedances: 10, min_r2: 0.9, z: 1.96, curvature: 0.1, growth_tol: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbePoint {
    pub param: f64,
    pub estimate: f64,
    pub se: f64,
    pub ci: (f64, f64),
    pub count: usize,
    pub n: usize,
    pub inconclusive: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TailShape {
    Linear,
    /// Bends down faster than any exponential on the grid.
    SuperExponential,
    /// Bends up: heavier than exponential on the grid.
    Heavier,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TailFit {
    /// Abscissa of the fit: `"t"`, `"K^2"` or `"r^2/|x|"`.
    pub axis: String,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Quadratic coefficient scaled by `span² / |drop|`.
    pub kappa: Option<f64>,
    pub shape: TailShape,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PropertyReport {
    pub property: Property,
    pub grid: Vec<f64>,
    pub points: Vec<ProbePoint>,
    pub fit: Option<TailFit>,
    pub verdict: Verdict,
    pub thresholds: Thresholds,
    pub n_used: usize,
    pub truncated_excluded: usize,
    /// Named scalar summaries (scales, gaps, slopes).
    pub summary: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

impl PropertyReport {
    fn new(property: Property, grid: Vec<f64>, points: Vec<ProbePoint>, th: Thresholds) -> Self {
        PropertyReport {
            property,
            grid,
            points,
            fit: None,
            verdict: Verdict::Inconclusive,
            thresholds: th,
            n_used: 0,
            truncated_excluded: 0,
            summary: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.summary.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    /// Estimates in grid order are nonincreasing (tail probabilities only).
    pub fn is_monotone(&self) -> bool {
        self.points.windows(2).all(|w| w[1].estimate <= w[0].estimate)
    }

    /// Recomputes fit and verdict from the stored points and thresholds.
    pub fn rederive(&self) -> (Option<TailFit>, Verdict) {
        let th = &self.thresholds;
        match self.property {
            Property::ExpBound => exp_bound_verdict(&self.points, th),
            Property::Wandering => decay_verdict(&self.points, th, "K^2", |k| k * k),
            Property::Backtrack => {
                let x = self.get("xnorm").unwrap_or(1.0);
                decay_verdict(&self.points, th, "r^2/|x|", move |r| r * r / x)
            }
            Property::Concentration => (None, concentration_verdict(&self.points)),
            Property::DownwardDeviation => (None, downward_verdict(&self.points)),
            Property::ModerateGap => (None, moderate_gap_class(&self.points, th).0),
            Property::LocalFluctuation | Property::SlabVsFree => (self.fit.clone(), self.verdict),
        }
    }
}

fn clean_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.iter().any(|g| !g.is_finite()) {
        return Err(domain("probe grid must be finite"));
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    if g.is_empty() {
        return Err(domain("probe grid is empty"));
    }
    Ok(g)
}

fn tail_point(param: f64, count: usize, n: usize, th: &Thresholds) -> ProbePoint {
    let p = count as f64 / n as f64;
    ProbePoint {
        param,
        estimate: p,
        se: libm::sqrt(p * (1.0 - p) / n as f64),
        ci: wilson_interval(count, n, th.z),
        count,
        n,
        inconclusive: count < th.min_exceedances,
    }
}

/// Tail counts `#{s ≥ scale·g}` (or `> scale·g` when `strict`) over the grid.
fn upper_tail(samples: &[f64], grid: &[f64], scale: f64, strict: bool, th: &Thresholds) -> Vec<ProbePoint> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    grid.iter()
        .map(|&g| {
            let thr = g * scale;
            let below = if strict { s.partition_point(|&v| v <= thr) } else { s.partition_point(|&v| v < thr) };
            tail_point(g, n - below, n, th)
        })
        .collect()
}

/// Counts `#{s ≤ -scale·g}` over the grid.
fn lower_tail(samples: &[f64], grid: &[f64], scale: f64, th: &Thresholds) -> Vec<ProbePoint> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    grid.iter().map(|&g| tail_point(g, s.partition_point(|&v| v <= -g * scale), s.len(), th)).collect()
}

fn log_tail_fit(points: &[ProbePoint], axis: &str, map: impl Fn(f64) -> f64, th: &Thresholds) -> Option<TailFit> {
    let used: Vec<&ProbePoint> = points.iter().filter(|p| !p.inconclusive && p.estimate > 0.0).collect();
    if used.len() < 3 {
        return None;
    }
    let xs: Vec<f64> = used.iter().map(|p| map(p.param)).collect();
    let ys: Vec<f64> = used.iter().map(|p| libm::log(p.estimate)).collect();
    let fit = line_fit(&xs, &ys, None).ok()?;
    let kappa = if used.len() >= 4 {
        let drop = (ys[ys.len() - 1] - ys[0]).abs();
        let span = xs[xs.len() - 1] - xs[0];
        quadratic_fit(&xs, &ys).ok().filter(|_| drop > 0.0).map(|(_, _, c)| c * span * span / drop)
    } else {
        None
    };
    let shape = match kappa {
        Some(k) if k < -th.curvature => TailShape::SuperExponential,
        Some(k) if k > th.curvature => TailShape::Heavier,
        _ => TailShape::Linear,
    };
    Some(TailFit { axis: String::from(axis), slope: fit.slope, intercept: fit.intercept, r2: fit.r2, kappa, shape })
}

fn exp_bound_verdict(points: &[ProbePoint], th: &Thresholds) -> (Option<TailFit>, Verdict) {
    let fit = log_tail_fit(points, "t", |t| t, th);
    let verdict = match &fit {
        None => Verdict::Inconclusive,
        Some(f) if f.slope >= 0.0 || f.shape == TailShape::Heavier => Verdict::Inconsistent,
        Some(f) if f.r2 >= th.min_r2 || f.shape == TailShape::SuperExponential => Verdict::Consistent,
        Some(_) => Verdict::Inconclusive,
    };
    (fit, verdict)
}

fn decay_verdict(points: &[ProbePoint], th: &Thresholds, axis: &str, map: impl Fn(f64) -> f64) -> (Option<TailFit>, Verdict) {
    let fit = log_tail_fit(points, axis, map, th);
    let verdict = match &fit {
        None => Verdict::Inconclusive,
        Some(f) if f.slope >= 0.0 => Verdict::Inconsistent,
        Some(f) if f.r2 >= th.min_r2 => Verdict::Consistent,
        Some(_) => Verdict::Inconclusive,
    };
    (fit, verdict)
}

fn concentration_verdict(points: &[ProbePoint]) -> Verdict {
    match points.last() {
        Some(p) if !p.inconclusive => Verdict::Consistent,
        _ => Verdict::Inconclusive,
    }
}

fn downward_verdict(points: &[ProbePoint]) -> Verdict {
    if points.iter().any(|p| !p.inconclusive && p.ci.0 > 0.0) {
        Verdict::Consistent
    } else {
        Verdict::Inconclusive
    }
}

fn usable_times(a: &SampleArchive, key: &SampleKey) -> (Vec<f64>, usize) {
    let (good, dropped) = a.usable(key);
    (good.iter().map(|r| r.time).collect(), dropped)
}

fn scale_summary(m: &MomentReport) -> Vec<(String, f64)> {
    alloc::vec![
        (String::from("xnorm"), m.key.xnorm),
        (String::from("h_hat"), m.h_hat),
        (String::from("sigma_hat"), m.sigma_hat),
    ]
}

/// `P(|T - h| ≥ t·σ̂)` over `t`, with a log-linear tail fit.
pub fn exp_bound_tail_of(times: &[f64], grid: &[f64], th: Thresholds) -> Result<PropertyReport> {
    if times.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: times.len() });
    }
    let grid = clean_grid(grid)?;
    let h = stats::mean(times);
    let sigma = stats::std_dev(times);
    let dev: Vec<f64> = times.iter().map(|t| (t - h).abs()).collect();
    let points = upper_tail(&dev, &grid, sigma, false, &th);
    let mut rep = PropertyReport::new(Property::ExpBound, grid, points, th);
    rep.n_used = times.len();
    rep.summary.push((String::from("h_hat"), h));
    rep.summary.push((String::from("sigma_hat"), sigma));
    let (fit, verdict) = exp_bound_verdict(&rep.points, &th);
    if let Some(f) = &fit {
        match f.shape {
            TailShape::SuperExponential => rep.notes.push(String::from("tail bends down faster than exponential")),
            TailShape::Heavier => rep.notes.push(String::from("tail is heavier than exponential on the grid")),
            TailShape::Linear => {}
        }
    }
    rep.fit = fit;
    rep.verdict = verdict;
    Ok(rep)
}

pub fn exp_bound_tail(a: &SampleArchive, key: &SampleKey, grid: &[f64], th: Thresholds) -> Result<PropertyReport> {
    let (times, dropped) = usable_times(a, key);
    let mut rep = exp_bound_tail_of(&times, grid, th)?;
    rep.truncated_excluded = dropped;
    rep.summary.insert(0, (String::from("xnorm"), key.xnorm));
    Ok(rep)
}

/// `P(T - h ≤ -t·σ̂)` over `t`; consistent when mass is still resolved at
/// the largest `t`.
pub fn concentration_lower_tail_of(times: &[f64], grid: &[f64], th: Thresholds) -> Result<PropertyReport> {
    if times.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: times.len() });
    }
    let grid = clean_grid(grid)?;
    let h = stats::mean(times);
    let sigma = stats::std_dev(times);
    let dev: Vec<f64> = times.iter().map(|t| t - h).collect();
    let points = lower_tail(&dev, &grid, sigma, &th);
    let mut rep = PropertyReport::new(Property::Concentration, grid, points, th);
    rep.n_used = times.len();
    rep.summary.push((String::from("h_hat"), h));
    rep.summary.push((String::from("sigma_hat"), sigma));
    rep.verdict = concentration_verdict(&rep.points);
    Ok(rep)
}

pub fn concentration_lower_tail(a: &SampleArchive, key: &SampleKey, grid: &[f64], th: Thresholds) -> Result<PropertyReport> {
    let (times, dropped) = usable_times(a, key);
    let mut rep = concentration_lower_tail_of(&times, grid, th)?;
    rep.truncated_excluded = dropped;
    rep.summary.insert(0, (String::from("xnorm"), key.xnorm));
    Ok(rep)
}

/// `P(T ≤ g_ref - ε·σ̂)` over `ε`, with Wilson intervals.
pub fn downward_deviation_of(times: &[f64], grid: &[f64], g_ref: f64, th: Thresholds) -> Result<PropertyReport> {
    if times.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: times.len() });
    }
    let grid = clean_grid(grid)?;
    let sigma = stats::std_dev(times);
    let dev: Vec<f64> = times.iter().map(|t| t - g_ref).collect();
    let points = lower_tail(&dev, &grid, sigma, &th);
    let mut rep = PropertyReport::new(Property::DownwardDeviation, grid, points, th);
    rep.n_used = times.len();
    rep.summary.push((String::from("g_ref"), g_ref));
    rep.summary.push((String::from("sigma_hat"), sigma));
    rep.verdict = downward_verdict(&rep.points);
    Ok(rep)
}

pub fn downward_deviation(
    a: &SampleArchive,
    key: &SampleKey,
    grid: &[f64],
    g_ref: &GRef,
    th: Thresholds,
) -> Result<PropertyReport> {
    let (times, dropped) = usable_times(a, key);
    let mut rep = downward_deviation_of(&times, grid, g_ref.value, th)?;
    rep.truncated_excluded = dropped;
    rep.summary.insert(0, (String::from("xnorm"), key.xnorm));
    rep.notes.push(format!("g_ref: {}", g_ref.provenance));
    Ok(rep)
}

/// `P(R/Δ̂ ≥ K)` over `K` for precomputed ratios, fitted against `K²`.
pub fn wandering_tail_of(ratios: &[f64], grid: &[f64], th: Thresholds) -> Result<PropertyReport> {
    if ratios.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let grid = clean_grid(grid)?;
    let points = upper_tail(ratios, &grid, 1.0, false, &th);
    let mut rep = PropertyReport::new(Property::Wandering, grid, points, th);
    rep.n_used = ratios.len();
    let (fit, verdict) = decay_verdict(&rep.points, &th, "K^2", |k| k * k);
    rep.fit = fit;
    rep.verdict = verdict;
    Ok(rep)
}

/// Wandering tail at one endpoint, scaled by `Δ̂ = (|x|·σ̂)^{1/2}` from the
/// same sample.
pub fn wandering_tail(a: &SampleArchive, key: &SampleKey, grid: &[f64], th: Thresholds) -> Result<PropertyReport> {
    let m = estimate_moments(a, key, GRef::injected(0.0, "unused"))?;
    if !(m.delta_hat > 0.0) {
        return Err(domain("wandering scale is zero: passage times have no spread"));
    }
    let (good, dropped) = a.usable(key);
    let ratios: Vec<f64> = good.iter().map(|r| r.wandering / m.delta_hat).collect();
    let mut rep = wandering_tail_of(&ratios, grid, th)?;
    rep.truncated_excluded = dropped;
    rep.summary = scale_summary(&m);
    rep.summary.push((String::from("delta_hat"), m.delta_hat));
    Ok(rep)
}

/// `P(excess > r)` over `r`, fitted against `r²/|x|`. The strict
/// inequality makes `r = 0` count the paths that backtrack at all.
pub fn backtrack_tail_of(excess: &[f64], xnorm: f64, grid: &[f64], th: Thresholds) -> Result<PropertyReport> {
    if excess.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if !(xnorm > 0.0) {
        return Err(domain("|x| must be positive"));
    }
    let grid = clean_grid(grid)?;
    let points = upper_tail(excess, &grid, 1.0, true, &th);
    let mut rep = PropertyReport::new(Property::Backtrack, grid, points, th);
    rep.n_used = excess.len();
    rep.summary.push((String::from("xnorm"), xnorm));
    let (fit, verdict) = decay_verdict(&rep.points, &th, "r^2/|x|", |r| r * r / xnorm);
    rep.fit = fit;
    rep.verdict = verdict;
    Ok(rep)
}

pub fn backtrack_tail(a: &SampleArchive, key: &SampleKey, grid: &[f64], th: Thresholds) -> Result<PropertyReport> {
    let (good, dropped) = a.usable(key);
    let ex: Vec<f64> = good.iter().map(|r| r.backtrack).collect();
    let mut rep = backtrack_tail_of(&ex, key.xnorm, grid, th)?;
    rep.truncated_excluded = dropped;
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum GapClass {
    Bounded,
    BoundedSubsequence,
    Growing,
}

fn moderate_gap_class(points: &[ProbePoint], th: &Thresholds) -> (Verdict, GapClass, Option<f64>) {
    if points.iter().all(|p| p.estimate.abs() <= 2.0 * p.se + 1e-12) {
        return (Verdict::Consistent, GapClass::Bounded, None);
    }
    let pos: Vec<&ProbePoint> = points.iter().filter(|p| p.estimate > 0.0).collect();
    let slope = if pos.len() >= 3 {
        let xs: Vec<f64> = pos.iter().map(|p| libm::log(p.param)).collect();
        let ys: Vec<f64> = pos.iter().map(|p| libm::log(p.estimate)).collect();
        line_fit(&xs, &ys, None).ok().map(|f| f.slope)
    } else {
        None
    };
    match slope {
        Some(s) if s <= th.growth_tol => (Verdict::Consistent, GapClass::Bounded, Some(s)),
        None => (Verdict::Consistent, GapClass::Bounded, None),
        Some(s) => {
            let half = points.len() / 2;
            let early = points[..half].iter().map(|p| p.estimate).fold(f64::NEG_INFINITY, f64::max);
            let late = points[half..].iter().map(|p| p.estimate).fold(f64::INFINITY, f64::min);
            if late <= early {
                (Verdict::Consistent, GapClass::BoundedSubsequence, Some(s))
            } else {
                (Verdict::Inconsistent, GapClass::Growing, Some(s))
            }
        }
    }
}

/// The curve `|x| ↦ D_hat/σ̂` over increasing radii. Bounded curves are
/// consistent with the moderate-gap property; curves that grow but return
/// below their early maximum are bounded along a subsequence.
pub fn moderate_gap_curve(moments: &[MomentReport], th: Thresholds) -> Result<PropertyReport> {
    if moments.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: moments.len() });
    }
    let mut ms: Vec<&MomentReport> = moments.iter().collect();
    ms.sort_by(|a, b| a.key.xnorm.total_cmp(&b.key.xnorm));
    let mut points = Vec::with_capacity(ms.len());
    for m in &ms {
        if !(m.sigma_hat > 0.0) {
            return Err(domain(format!("zero spread at |x|={}", m.key.xnorm)));
        }
        let ratio = m.d_hat / m.sigma_hat;
        let se = libm::sqrt(m.h_se * m.h_se + (ratio * m.sigma_se) * (ratio * m.sigma_se)) / m.sigma_hat;
        points.push(ProbePoint {
            param: m.key.xnorm,
            estimate: ratio,
            se,
            ci: (ratio - th.z * se, ratio + th.z * se),
            count: m.n,
            n: m.n,
            inconclusive: false,
        });
    }
    let grid = points.iter().map(|p| p.param).collect();
    let mut rep = PropertyReport::new(Property::ModerateGap, grid, points, th);
    rep.n_used = ms.iter().map(|m| m.n).sum();
    rep.truncated_excluded = ms.iter().map(|m| m.truncated_excluded).sum();
    let (verdict, class, slope) = moderate_gap_class(&rep.points, &th);
    rep.verdict = verdict;
    if let Some(s) = slope {
        rep.summary.push((String::from("log_slope"), s));
    }
    rep.notes.push(String::from(match class {
        GapClass::Bounded => "bounded",
        GapClass::BoundedSubsequence => "bounded along a subsequence",
        GapClass::Growing => "growing",
    }));
    Ok(rep)
}

/// End pairs of the natural cylinder from the origin to `x` with radius
/// `eps·Δ̂`.
pub fn local_fluctuation_cylinder(x: &Site, eps: f64, delta_hat: f64, shape: &ShapeModel, w: &Window) -> Result<EndPairSet> {
    let c = natural_cylinder(&Site::origin(x.dim()), x, eps * delta_hat, shape)?;
    let ends = end_pairs(&c, w)?;
    if ends.is_empty() {
        return Err(domain("cylinder has no end pairs"));
    }
    Ok(ends)
}

/// Minimum over end pairs of `(E T(u,v|S) - E T_d2d) / σ̂(u,v|S)` from pair
/// means, pair standard deviations and the mean disc-to-disc time. Pairs
/// with zero spread are skipped.
pub fn local_fluctuation_from_moments(
    pair_means: &[f64],
    pair_sds: &[f64],
    d2d_mean: f64,
    th: Thresholds,
) -> Result<PropertyReport> {
    if pair_means.len() != pair_sds.len() {
        return Err(Error::DimensionMismatch { expected: pair_means.len(), got: pair_sds.len() });
    }
    if pair_means.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut points = Vec::new();
    let mut notes = Vec::new();
    for (i, (m, s)) in pair_means.iter().zip(pair_sds).enumerate() {
        if !(*s > 0.0) {
            notes.push(format!("pair {i} has zero spread; skipped"));
            continue;
        }
        let gap = (m - d2d_mean) / s;
        points.push(ProbePoint { param: i as f64, estimate: gap, se: 0.0, ci: (gap, gap), count: 0, n: 0, inconclusive: false });
    }
    let grid = points.iter().map(|p| p.param).collect();
    let mut rep = PropertyReport::new(Property::LocalFluctuation, grid, points, th);
    rep.notes = notes;
    rep.summary.push((String::from("d2d_mean"), d2d_mean));
    if let Some(g) = rep.points.iter().map(|p| p.estimate).reduce(f64::min) {
        rep.summary.push((String::from("gap"), g));
    }
    Ok(rep)
}

/// Gap from per-replica pair times (`times[replica][pair]`). The
/// disc-to-disc time of each replica is the minimum over its pairs.
pub fn local_fluctuation_from_samples(times: &[Vec<f64>], truncated_excluded: usize, th: Thresholds) -> Result<PropertyReport> {
    if times.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: times.len() });
    }
    let k = times[0].len();
    if let Some(bad) = times.iter().find(|r| r.len() != k) {
        return Err(Error::DimensionMismatch { expected: k, got: bad.len() });
    }
    let d2d: Vec<f64> = times.iter().map(|r| r.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    let mut means = Vec::with_capacity(k);
    let mut sds = Vec::with_capacity(k);
    for j in 0..k {
        let col: Vec<f64> = times.iter().map(|r| r[j]).collect();
        means.push(stats::mean(&col));
        sds.push(stats::std_dev(&col));
    }
    let mut rep = local_fluctuation_from_moments(&means, &sds, stats::mean(&d2d), th)?;
    rep.n_used = times.len();
    rep.truncated_excluded = truncated_excluded;
    rep.summary.push((String::from("d2d_sd"), stats::std_dev(&d2d)));
    Ok(rep)
}

/// One replica of the disc-to-disc probe: all pair times, or `None` when
/// the search touched the window boundary.
pub fn local_fluctuation_replica<W: EdgeWeights + ?Sized>(
    engine: &mut GeodesicEngine,
    weights: &W,
    ends: &EndPairSet,
) -> Result<Option<Vec<f64>>> {
    let r: DiscToDiscResult = engine.disc_to_disc(weights, ends, true)?;
    if r.truncated {
        return Ok(None);
    }
    Ok(r.pair_times.map(|v| v.into_iter().map(|(_, t)| t).collect()))
}

/// Serial driver over replicas `0..reps` of a weight-field family.
pub fn local_fluctuation_gap<W: EdgeWeights, F: Fn(u64) -> W>(
    field: F,
    ends: &EndPairSet,
    window: &Window,
    reps: u64,
    th: Thresholds,
) -> Result<PropertyReport> {
    let mut engine = GeodesicEngine::new(window.clone());
    let mut rows = Vec::new();
    let mut dropped = 0;
    for rep in 0..reps {
        match local_fluctuation_replica(&mut engine, &field(rep), ends)? {
            Some(r) => rows.push(r),
            None => dropped += 1,
        }
    }
    local_fluctuation_from_samples(&rows, dropped, th)
}

/// Trend of the localness gap over radii: consistent with growth to
/// infinity only when the gap increases over the whole probed range.
pub fn local_fluctuation_trend(gaps: &[(f64, f64)], th: Thresholds) -> Result<PropertyReport> {
    if gaps.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: gaps.len() });
    }
    let mut g = gaps.to_vec();
    g.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = g.iter().map(|p| libm::log(p.0)).collect();
    let ys: Vec<f64> = g.iter().map(|p| p.1).collect();
    let fit = line_fit(&xs, &ys, None)?;
    let increasing = g.windows(2).all(|w| w[1].1 > w[0].1);
    let points = g
        .iter()
        .map(|&(r, v)| ProbePoint { param: r, estimate: v, se: 0.0, ci: (v, v), count: 0, n: 0, inconclusive: false })
        .collect();
    let mut rep = PropertyReport::new(Property::LocalFluctuation, g.iter().map(|p| p.0).collect(), points, th);
    rep.summary.push((String::from("slope_vs_log_r"), fit.slope));
    rep.verdict = if increasing && fit.slope > 0.0 {
        Verdict::Consistent
    } else if fit.slope <= 0.0 {
        Verdict::Inconsistent
    } else {
        Verdict::Inconclusive
    };
    Ok(rep)
}

/// `Δ = T(0,x|S) - T(0,x)` for one replica, or `None` if either search
/// touched the window boundary.
pub fn slab_vs_free_replica<W: EdgeWeights + ?Sized>(
    engine: &mut GeodesicEngine,
    weights: &W,
    x: &Site,
    slab: &Slab,
) -> Result<Option<f64>> {
    let o = Site::origin(x.dim());
    let free = engine.passage_time(weights, &o, x, &Region::All)?;
    let inside = engine.passage_time(weights, &o, x, &Region::Slab(slab.clone()))?;
    if free.truncated || inside.truncated {
        return Ok(None);
    }
    Ok(Some(inside.time - free.time))
}

/// Summary of slab-minus-free differences at one endpoint: `E[Δ²]` and the
/// tail `P(Δ ≥ t)`.
pub fn slab_vs_free_of(deltas: &[f64], xnorm: f64, grid: &[f64], th: Thresholds) -> Result<PropertyReport> {
    if deltas.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if let Some(d) = deltas.iter().find(|&&d| d < -1e-9 * (1.0 + d.abs())) {
        return Err(domain(format!("slab time below free time by {}", -d)));
    }
    let grid = clean_grid(grid)?;
    let sq: Vec<f64> = deltas.iter().map(|d| d * d).collect();
    let msq = stats::mean(&sq);
    let se = if sq.len() > 1 { stats::std_dev(&sq) / libm::sqrt(sq.len() as f64) } else { 0.0 };
    let points = upper_tail(deltas, &grid, 1.0, false, &th);
    let mut rep = PropertyReport::new(Property::SlabVsFree, grid, points, th);
    rep.n_used = deltas.len();
    rep.summary.push((String::from("xnorm"), xnorm));
    rep.summary.push((String::from("mean_sq"), msq));
    rep.summary.push((String::from("mean_sq_se"), se));
    rep.summary.push((String::from("zero_fraction"), deltas.iter().filter(|&&d| d <= 0.0).count() as f64 / deltas.len() as f64));
    Ok(rep)
}

/// Serial driver for the slab comparison over replicas `0..reps`.
pub fn slab_vs_free<W: EdgeWeights, F: Fn(u64) -> W>(
    field: F,
    x: &Site,
    slab: &Slab,
    window: &Window,
    reps: u64,
    grid: &[f64],
    th: Thresholds,
) -> Result<PropertyReport> {
    let mut engine = GeodesicEngine::new(window.clone());
    let mut deltas = Vec::new();
    let mut dropped = 0;
    for rep in 0..reps {
        match slab_vs_free_replica(&mut engine, &field(rep), x, slab)? {
            Some(d) => deltas.push(d),
            None => dropped += 1,
        }
    }
    let mut rep = slab_vs_free_of(&deltas, x.norm(), grid, th)?;
    rep.truncated_excluded = dropped;
    Ok(rep)
}

/// Whether `E[Δ²]` stays flat in `|x|`: log-log slope at most `growth_tol`.
pub fn slab_variance_trend(points: &[(f64, f64)], th: Thresholds) -> Result<PropertyReport> {
    if points.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: points.len() });
    }
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    let pts: Vec<ProbePoint> = p
        .iter()
        .map(|&(r, v)| ProbePoint { param: r, estimate: v, se: 0.0, ci: (v, v), count: 0, n: 0, inconclusive: false })
        .collect();
    let mut rep = PropertyReport::new(Property::SlabVsFree, p.iter().map(|q| q.0).collect(), pts, th);
    if p.iter().all(|q| q.1 == 0.0) {
        rep.verdict = Verdict::Consistent;
        rep.notes.push(String::from("slab and free times agree in every replica"));
        return Ok(rep);
    }
    if p.iter().any(|q| !(q.1 > 0.0)) {
        rep.notes.push(String::from("zero mean square at some radius; trend not fitted"));
        return Ok(rep);
    }
    let xs: Vec<f64> = p.iter().map(|q| libm::log(q.0)).collect();
    let ys: Vec<f64> = p.iter().map(|q| libm::log(q.1)).collect();
    let fit = line_fit(&xs, &ys, None)?;
    rep.summary.push((String::from("log_slope"), fit.slope));
    rep.summary.push((String::from("log_slope_se"), fit.slope_se));
    rep.verdict = if fit.slope <= th.growth_tol { Verdict::Consistent } else { Verdict::Inconsistent };
    Ok(rep)
}
