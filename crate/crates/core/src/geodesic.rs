//! Exact region-restricted passage times on lattice windows.
//!
//! All queries run Dijkstra over the window's linear indices. Interior
//! vertices of a path must lie in the region; the endpoints are exempt,
//! which is the slab-passage convention for boundary and end pairs.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{domain, Error, Result};
use crate::geometry::{distance_to_line, EndPairSet, Frame, Region};
use crate::lattice::{EdgeWeights, Site, Window};

const NONE: usize = usize::MAX;

/// Passage time with its optimal path.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeodesicResult {
    pub time: f64,
    pub path: Vec<Site>,
    /// The path touches a window face beyond which the region continues.
    pub truncated: bool,
    /// Vertices settled by the search.
    pub visited: usize,
}

/// Minimum over source/target pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiSourceResult {
    pub time: f64,
    pub source: Site,
    pub target: Site,
    pub geodesic: GeodesicResult,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscToDiscResult {
    pub time: f64,
    pub argmin: (Site, Site),
    /// Slab passage time of every end pair, left-major, when requested.
    pub pair_times: Option<Vec<((Site, Site), f64)>>,
    pub truncated: bool,
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    idx: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // min-heap on (dist, idx)
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// role bits for endpoint-exempt sites
const SOURCE: u8 = 1;
const TARGET: u8 = 2;

/// Reusable Dijkstra state for one window. Scratch arrays are dense over the
/// window and invalidated by bumping an epoch counter, so repeated queries
/// cost no clearing.
pub struct GeodesicEngine {
    window: Window,
    strides: Vec<usize>,
    epoch: u32,
    stamp: Vec<u32>,
    dist: Vec<f64>,
    pred: Vec<usize>,
    settled: Vec<bool>,
    role: Vec<u8>,
    region_stamp: Vec<u32>,
    in_region: Vec<bool>,
    heap: BinaryHeap<Entry>,
    coords: Vec<i64>,
    ncoords: Vec<i64>,
    visited: usize,
}

impl GeodesicEngine {
    pub fn new(window: Window) -> Self {
        let n = window.volume();
        let d = window.dim();
        let strides = (0..d).map(|k| window.stride(k)).collect();
        GeodesicEngine {
            window,
            strides,
            epoch: 0,
            stamp: vec![0; n],
            dist: vec![f64::INFINITY; n],
            pred: vec![NONE; n],
            settled: vec![false; n],
            role: vec![0; n],
            region_stamp: vec![0; n],
            in_region: vec![false; n],
            heap: BinaryHeap::new(),
            coords: vec![0; d],
            ncoords: vec![0; d],
            visited: 0,
        }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    /// Retargets the engine, reusing allocations where possible.
    pub fn set_window(&mut self, window: Window) {
        if window == self.window {
            return;
        }
        let n = window.volume();
        let d = window.dim();
        self.strides = (0..d).map(|k| window.stride(k)).collect();
        self.stamp.clear();
        self.stamp.resize(n, 0);
        self.region_stamp.clear();
        self.region_stamp.resize(n, 0);
        self.dist.resize(n, f64::INFINITY);
        self.pred.resize(n, NONE);
        self.settled.resize(n, false);
        self.role.resize(n, 0);
        self.in_region.resize(n, false);
        self.coords.resize(d, 0);
        self.ncoords.resize(d, 0);
        self.epoch = 0;
        self.window = window;
    }

    fn begin(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.region_stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        self.heap.clear();
        self.visited = 0;
    }

    #[inline]
    fn touch(&mut self, i: usize) {
        if self.stamp[i] != self.epoch {
            self.stamp[i] = self.epoch;
            self.dist[i] = f64::INFINITY;
            self.pred[i] = NONE;
            self.settled[i] = false;
            self.role[i] = 0;
        }
    }

    #[inline]
    fn region_ok(&mut self, i: usize, region: &Region) -> bool {
        if let Region::All = region {
            return true;
        }
        if self.region_stamp[i] != self.epoch {
            self.region_stamp[i] = self.epoch;
            self.window.coords_into(i, &mut self.ncoords);
            self.in_region[i] = region.contains_site(&self.ncoords);
        }
        self.in_region[i]
    }

    fn index(&self, s: &Site) -> Result<usize> {
        if s.dim() != self.window.dim() {
            return Err(Error::DimensionMismatch { expected: self.window.dim(), got: s.dim() });
        }
        self.window.index_of(s.coords()).ok_or_else(|| domain("site lies outside the window"))
    }

    /// Multi-source search that stops once `stop` targets are settled.
    fn search<W: EdgeWeights + ?Sized>(
        &mut self,
        weights: &W,
        sources: &[usize],
        targets: &[usize],
        region: &Region,
        stop: usize,
    ) -> usize {
        self.begin();
        for &t in targets {
            self.touch(t);
            self.role[t] |= TARGET;
        }
        for &s in sources {
            self.touch(s);
            self.role[s] |= SOURCE;
            if self.dist[s] != 0.0 {
                self.dist[s] = 0.0;
                self.heap.push(Entry { dist: 0.0, idx: s });
            }
        }
        let d = self.window.dim();
        let mut hit = 0;
        while let Some(Entry { dist, idx }) = self.heap.pop() {
            if self.settled[idx] || dist > self.dist[idx] {
                continue;
            }
            self.settled[idx] = true;
            self.visited += 1;
            let role = self.role[idx];
            if role & TARGET != 0 {
                hit += 1;
                if hit >= stop {
                    break;
                }
            }
            if role & SOURCE == 0 && !self.region_ok(idx, region) {
                continue;
            }
            self.window.coords_into(idx, &mut self.coords);
            for k in 0..d {
                let stride = self.strides[k];
                let lo = self.window.lo().coords()[k];
                let hi = self.window.hi().coords()[k];
                let c = self.coords[k];
                if c > lo {
                    let j = idx - stride;
                    self.coords[k] -= 1;
                    let w = weights.weight(&self.coords, k);
                    self.coords[k] += 1;
                    self.relax(idx, j, dist + w, region);
                }
                if c < hi {
                    let j = idx + stride;
                    let w = weights.weight(&self.coords, k);
                    self.relax(idx, j, dist + w, region);
                }
            }
        }
        hit
    }

    #[inline]
    fn relax(&mut self, from: usize, to: usize, nd: f64, region: &Region) {
        self.touch(to);
        if self.settled[to] {
            return;
        }
        if self.role[to] == 0 && !self.region_ok(to, region) {
            return;
        }
        let cur = self.dist[to];
        if nd < cur || (nd == cur && from < self.pred[to]) {
            self.dist[to] = nd;
            self.pred[to] = from;
            if nd < cur {
                self.heap.push(Entry { dist: nd, idx: to });
            }
        }
    }

    fn reached(&self, i: usize) -> bool {
        self.stamp[i] == self.epoch && self.settled[i]
    }

    fn extract(&self, target: usize, region: &Region) -> GeodesicResult {
        let mut idx = Vec::new();
        let mut i = target;
        while i != NONE {
            idx.push(i);
            i = self.pred[i];
        }
        idx.reverse();
        let path: Vec<Site> = idx.iter().map(|&i| self.window.site_at(i)).collect();
        let truncated = path.iter().any(|s| self.truncates(s.coords(), region));
        GeodesicResult { time: self.dist[target], path, truncated, visited: self.visited }
    }

    /// Whether `x` sits on a window face with region beyond it.
    fn truncates(&self, x: &[i64], region: &Region) -> bool {
        let lo = self.window.lo().coords();
        let hi = self.window.hi().coords();
        let mut beyond = x.to_vec();
        for k in 0..x.len() {
            for (face, step) in [(lo[k], -1), (hi[k], 1)] {
                if x[k] == face {
                    beyond[k] = x[k] + step;
                    let open = region.contains_site(&beyond);
                    beyond[k] = x[k];
                    if open {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// `T(src, dst | region)` inside the window.
    pub fn passage_time<W: EdgeWeights + ?Sized>(
        &mut self,
        weights: &W,
        src: &Site,
        dst: &Site,
        region: &Region,
    ) -> Result<GeodesicResult> {
        let s = self.index(src)?;
        let t = self.index(dst)?;
        if s == t {
            return Ok(GeodesicResult {
                time: 0.0,
                path: vec![src.clone()],
                truncated: self.truncates(src.coords(), region),
                visited: 0,
            });
        }
        self.search(weights, &[s], &[t], region, 1);
        if !self.reached(t) {
            return Err(Error::Unreachable);
        }
        Ok(self.extract(t, region))
    }

    /// `min` over `sources × targets` of the restricted passage time, in one search.
    pub fn multi_source_min<W: EdgeWeights + ?Sized>(
        &mut self,
        weights: &W,
        sources: &[Site],
        targets: &[Site],
        region: &Region,
    ) -> Result<MultiSourceResult> {
        if sources.is_empty() || targets.is_empty() {
            return Err(domain("source and target sets must be non-empty"));
        }
        let s: Vec<usize> = sources.iter().map(|x| self.index(x)).collect::<Result<_>>()?;
        let t: Vec<usize> = targets.iter().map(|x| self.index(x)).collect::<Result<_>>()?;
        if self.search(weights, &s, &t, region, 1) == 0 {
            return Err(Error::Unreachable);
        }
        // the first settled target has the smallest (time, index)
        let best = t
            .iter()
            .copied()
            .filter(|&i| self.reached(i))
            .min_by(|&a, &b| self.dist[a].total_cmp(&self.dist[b]).then(a.cmp(&b)))
            .ok_or(Error::Unreachable)?;
        let geodesic = self.extract(best, region);
        Ok(MultiSourceResult {
            time: geodesic.time,
            source: geodesic.path[0].clone(),
            target: self.window.site_at(best),
            geodesic,
        })
    }

    /// Restricted passage times from `src` to each target (`None` if unreachable).
    pub fn one_to_many<W: EdgeWeights + ?Sized>(
        &mut self,
        weights: &W,
        src: &Site,
        targets: &[Site],
        region: &Region,
    ) -> Result<Vec<Option<GeodesicResult>>> {
        let s = self.index(src)?;
        let t: Vec<usize> = targets.iter().map(|x| self.index(x)).collect::<Result<_>>()?;
        let mut distinct = t.clone();
        distinct.sort_unstable();
        distinct.dedup();
        self.search(weights, &[s], &distinct, region, distinct.len());
        Ok(t.iter().map(|&i| self.reached(i).then(|| self.extract(i, region))).collect())
    }

    /// `T_d2d`: the minimum over end pairs of the passage time restricted to
    /// the cylinder's slab (not the cylinder itself).
    pub fn disc_to_disc<W: EdgeWeights + ?Sized>(
        &mut self,
        weights: &W,
        ends: &EndPairSet,
        record_pairs: bool,
    ) -> Result<DiscToDiscResult> {
        if ends.is_empty() {
            return Err(domain("cylinder has no end pairs"));
        }
        let region = Region::Slab(ends.cylinder.slab().clone());
        if !record_pairs {
            let m = self.multi_source_min(weights, &ends.left, &ends.right, &region)?;
            return Ok(DiscToDiscResult {
                time: m.time,
                argmin: (m.source, m.target),
                pair_times: None,
                truncated: m.geodesic.truncated,
            });
        }
        let mut pairs = Vec::with_capacity(ends.len());
        let mut best: Option<(f64, usize)> = None;
        let mut truncated = false;
        for u in &ends.left {
            let res = self.one_to_many(weights, u, &ends.right, &region)?;
            for (v, r) in ends.right.iter().zip(res) {
                let r = r.ok_or(Error::Unreachable)?;
                truncated |= r.truncated;
                if best.is_none_or(|(b, _)| r.time < b) {
                    best = Some((r.time, pairs.len()));
                }
                pairs.push(((u.clone(), v.clone()), r.time));
            }
        }
        let (time, at) = best.expect("non-empty");
        Ok(DiscToDiscResult { time, argmin: pairs[at].0.clone(), pair_times: Some(pairs), truncated })
    }
}

/// Sum of edge weights along a path.
pub fn path_weight<W: EdgeWeights + ?Sized>(weights: &W, path: &[Site]) -> Result<f64> {
    let mut total = 0.0;
    for pair in path.windows(2) {
        let e = crate::lattice::Edge::new(pair[0].clone(), pair[1].clone())?;
        total += weights.edge_weight(&e);
    }
    Ok(total)
}

/// Largest Euclidean distance from a path vertex to the line through the
/// origin and `x`.
pub fn transverse_wandering(path: &[Site], x: &Site) -> Result<f64> {
    let n = x.norm();
    if n == 0.0 {
        return Err(domain("wandering needs x != 0"));
    }
    let dir: Vec<f64> = x.coords().iter().map(|&c| c as f64 / n).collect();
    let origin = vec![0.0; x.dim()];
    Ok(path.iter().map(|u| distance_to_line(&u.to_point(), &origin, &dir)).fold(0.0, f64::max))
}

/// Smallest `r ≥ 0` such that every path vertex lies in `S_θ(-r, Φ_θ(x)+r)`.
pub fn backtrack_excess(path: &[Site], frame: &Frame, x: &Site) -> f64 {
    let end = frame.phi(&x.to_point());
    let mut excess: f64 = 0.0;
    for u in path {
        let p = frame.phi(&u.to_point());
        excess = excess.max(-p).max(p - end);
    }
    excess
}

/// Window growth schedule for free passage times.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MarginPolicy {
    /// Transverse multiplier `K` of the wandering guess.
    pub k: f64,
    /// Guess of the wandering scale `Δ̂`.
    pub delta_guess: f64,
    /// Longitudinal coefficient of `(|x| log |x|)^{1/2}`.
    pub c_long: f64,
    pub retry_cap: usize,
}

impl Default for MarginPolicy {
    fn default() -> Self {
        MarginPolicy { k: 3.0, delta_guess: 0.0, c_long: 1.0, retry_cap: 4 }
    }
}

impl MarginPolicy {
    /// Initial per-axis margins for the pair `(src, dst)`.
    pub fn margins(&self, src: &Site, dst: &Site) -> Vec<i64> {
        let v = dst.sub(src).to_point();
        let len = dst.sub(src).norm();
        let long = if len > 1.0 { self.c_long * libm::sqrt(len * libm::log(len)) } else { 0.0 };
        let trans = self.k * self.delta_guess;
        v.iter().map(|c| libm::ceil(trans.max(long * c.abs() / len.max(1.0))) as i64).collect()
    }
}

/// Outcome of an adaptive-window run; `result.truncated` stays set if the
/// retry cap was hit.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveRun {
    pub result: GeodesicResult,
    pub margins: Vec<Vec<i64>>,
}

impl AdaptiveRun {
    pub fn attempts(&self) -> usize {
        self.margins.len()
    }
}

/// Free or region-restricted passage time on a bounding box of the
/// endpoints grown by the policy margins, doubling them while the
/// geodesic is truncated.
pub fn run_with_adaptive_window<W: EdgeWeights + ?Sized>(
    weights: &W,
    src: &Site,
    dst: &Site,
    region: &Region,
    policy: &MarginPolicy,
    engine: Option<&mut GeodesicEngine>,
) -> Result<AdaptiveRun> {
    let base = Window::new(
        Site::new(src.coords().iter().zip(dst.coords()).map(|(a, b)| *a.min(b)).collect::<Vec<_>>()),
        Site::new(src.coords().iter().zip(dst.coords()).map(|(a, b)| *a.max(b)).collect::<Vec<_>>()),
    )
    .or_else(|_| Window::new(src.clone(), src.offset(&Site::new(vec![1; src.dim()]))))?;
    let mut margin = policy.margins(src, dst);
    let mut own;
    let engine = match engine {
        Some(e) => e,
        None => {
            own = GeodesicEngine::new(base.expanded(&margin));
            &mut own
        }
    };
    let mut margins = Vec::new();
    loop {
        engine.set_window(base.expanded(&margin));
        let result = engine.passage_time(weights, src, dst, region)?;
        margins.push(margin.clone());
        if !result.truncated || margins.len() > policy.retry_cap {
            return Ok(AdaptiveRun { result, margins });
        }
        margin = margin.iter().map(|m| (2 * m).max(1)).collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{end_pairs, natural_cylinder, ShapeModel};
    use crate::lattice::{ConstantWeights, Distribution, TableWeights, WeightField};

    fn segment_weights() -> TableWeights {
        let w = Window::new(Site::from([0]), Site::from([3])).unwrap();
        TableWeights::new(w, vec![0.5, 1.0, 0.25]).unwrap()
    }

    #[test]
    fn segment() {
        let w = Window::new(Site::from([0]), Site::from([3])).unwrap();
        let mut e = GeodesicEngine::new(w);
        let r = e.passage_time(&segment_weights(), &Site::from([0]), &Site::from([3]), &Region::All).unwrap();
        assert_eq!(r.time, 1.75);
        assert_eq!(r.path, vec![Site::from([0]), Site::from([1]), Site::from([2]), Site::from([3])]);
        let z = e.passage_time(&segment_weights(), &Site::from([2]), &Site::from([2]), &Region::All).unwrap();
        assert_eq!((z.time, z.path.len()), (0.0, 1));
    }

    #[test]
    fn constant_weights_give_l1_distance() {
        let w = Window::cube(2, -3, 8).unwrap();
        let mut e = GeodesicEngine::new(w);
        let f = ConstantWeights(0.7);
        let r = e.passage_time(&f, &Site::from([0, 0]), &Site::from([5, -2]), &Region::All).unwrap();
        assert!((r.time - 0.7 * 7.0).abs() < 1e-12);
        // ties go to the lexicographically smallest predecessor
        let again = e.passage_time(&f, &Site::from([0, 0]), &Site::from([5, -2]), &Region::All).unwrap();
        assert_eq!(r.path, again.path);
    }

    #[test]
    fn path_time_consistency_and_truncation() {
        let f = WeightField::new(3, 0, Distribution::default()).unwrap();
        let w = Window::cube(2, -6, 6).unwrap();
        let mut e = GeodesicEngine::new(w);
        let r = e.passage_time(&f, &Site::from([-4, 1]), &Site::from([3, 2]), &Region::All).unwrap();
        let back = path_weight(&f, &r.path).unwrap();
        assert!((r.time - back).abs() <= 1e-12 * r.time);
        let edge = e.passage_time(&f, &Site::from([-6, 0]), &Site::from([0, 0]), &Region::All).unwrap();
        assert!(edge.truncated);
    }

    #[test]
    fn unreachable_inside_region() {
        let w = Window::cube(2, 0, 4).unwrap();
        let mut e = GeodesicEngine::new(w);
        let s = Frame::new(&ShapeModel::L2, &[1.0, 0.0]).unwrap();
        let slab = crate::geometry::Slab::new(s, vec![0.0, 0.0], 0.0, 1.0).unwrap();
        let r = e.passage_time(&ConstantWeights(1.0), &Site::from([0, 0]), &Site::from([4, 0]), &Region::Slab(slab));
        assert_eq!(r, Err(Error::Unreachable));
    }

    #[test]
    fn multi_source_matches_pairwise() {
        let f = WeightField::new(11, 2, Distribution::default()).unwrap();
        let w = Window::cube(2, 0, 1).unwrap();
        let mut e = GeodesicEngine::new(w);
        let sources = [Site::from([0, 0]), Site::from([0, 1])];
        let targets = [Site::from([1, 0]), Site::from([1, 1])];
        let m = e.multi_source_min(&f, &sources, &targets, &Region::All).unwrap();
        let mut best = f64::INFINITY;
        for s in &sources {
            for t in &targets {
                best = best.min(e.passage_time(&f, s, t, &Region::All).unwrap().time);
            }
        }
        assert_eq!(m.time, best);
        let same = e.multi_source_min(&f, &sources[..1], &sources[..1], &Region::All).unwrap();
        assert_eq!(same.time, 0.0);
    }

    #[test]
    fn disc_to_disc_single_pair() {
        let f = WeightField::new(5, 0, Distribution::default()).unwrap();
        let w = Window::new(Site::from([-1, -3]), Site::from([5, 3])).unwrap();
        let c = natural_cylinder(&Site::from([0, 0]), &Site::from([4, 0]), 0.5, &ShapeModel::L2).unwrap();
        let ends = end_pairs(&c, &w).unwrap();
        let mut e = GeodesicEngine::new(w);
        let d = e.disc_to_disc(&f, &ends, true).unwrap();
        let slab = Region::Slab(c.slab().clone());
        let direct = e.passage_time(&f, &Site::from([0, 0]), &Site::from([4, 0]), &slab).unwrap();
        assert_eq!(d.time, direct.time);
        let wide = natural_cylinder(&Site::from([0, 0]), &Site::from([4, 0]), 1.5, &ShapeModel::L2).unwrap();
        let ends = end_pairs(&wide, e.window()).unwrap();
        let d = e.disc_to_disc(&f, &ends, true).unwrap();
        let quick = e.disc_to_disc(&f, &ends, false).unwrap();
        assert_eq!(d.time, quick.time);
        assert!(d.pair_times.unwrap().iter().all(|(_, t)| *t >= d.time));
    }

    #[test]
    fn wandering_and_backtracking() {
        let x = Site::from([1, 1]);
        let path = [Site::from([0, 0]), Site::from([1, 0]), Site::from([1, 1])];
        let r = transverse_wandering(&path, &x).unwrap();
        assert!((r - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(transverse_wandering(&path, &Site::from([0, 0])).is_err());
        let frame = Frame::new(&ShapeModel::L2, &[1.0, 0.0]).unwrap();
        let x = Site::from([4, 0]);
        let monotone = [Site::from([0, 0]), Site::from([1, 0]), Site::from([1, 1]), Site::from([4, 0])];
        assert_eq!(backtrack_excess(&monotone, &frame, &x), 0.0);
        let back = [Site::from([0, 0]), Site::from([-2, 0]), Site::from([6, 0]), Site::from([4, 0])];
        assert_eq!(backtrack_excess(&back, &frame, &x), 2.0);
    }

    #[test]
    fn adaptive_doubling() {
        let f = WeightField::new(1, 0, Distribution::default()).unwrap();
        let src = Site::from([0, 0]);
        let dst = Site::from([6, 0]);
        let policy = MarginPolicy { k: 0.0, delta_guess: 0.0, c_long: 0.0, retry_cap: 2 };
        let run = run_with_adaptive_window(&f, &src, &dst, &Region::All, &policy, None).unwrap();
        assert_eq!(run.margins[0], vec![0, 0]);
        assert!(run.attempts() >= 2);
        assert_eq!(run.margins[1], vec![1, 1]);
        if run.attempts() == 3 {
            assert_eq!(run.margins[2], vec![2, 2]);
        }
        let generous = MarginPolicy { k: 1.0, delta_guess: 10.0, c_long: 2.0, retry_cap: 3 };
        let run = run_with_adaptive_window(&f, &src, &dst, &Region::All, &generous, None).unwrap();
        assert!(!run.result.truncated);
        assert_eq!(run.attempts(), 1);
    }
}
