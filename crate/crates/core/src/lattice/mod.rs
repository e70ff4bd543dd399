//! Integer-lattice sites, nearest-neighbour edges, bounded windows and
//! reproducible edge-weight fields.

mod weights;

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::geometry::Region;

pub use weights::{sample_weight, ConstantWeights, Distribution, EdgeWeights, TableWeights, WeightField};

/// A point of `Z^d`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Site(Vec<i64>);

impl Site {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        Site(coords.into())
    }

    pub fn origin(dim: usize) -> Self {
        Site(alloc::vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn to_point(&self) -> Vec<f64> {
        self.0.iter().map(|&c| c as f64).collect()
    }

    pub fn l1_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|&c| (c as f64) * (c as f64)).sum())
    }

    pub fn l1_distance(&self, other: &Site) -> i64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    pub fn offset(&self, by: &Site) -> Site {
        Site(self.0.iter().zip(&by.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Site) -> Site {
        Site(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

impl<const N: usize> From<[i64; N]> for Site {
    fn from(c: [i64; N]) -> Self {
        Site(c.to_vec())
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A nearest-neighbour edge, stored with `b = a + e_axis`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    a: Site,
    b: Site,
    axis: usize,
}

impl Edge {
    /// Builds the canonical edge between two adjacent sites, in either order.
    pub fn new(u: Site, v: Site) -> Result<Self> {
        if u.dim() != v.dim() {
            return Err(Error::DimensionMismatch { expected: u.dim(), got: v.dim() });
        }
        if u.l1_distance(&v) != 1 {
            return Err(Error::NotAdjacent);
        }
        let axis = (0..u.dim()).find(|&k| u.0[k] != v.0[k]).ok_or(Error::NotAdjacent)?;
        if u.0[axis] < v.0[axis] {
            Ok(Edge { a: u, b: v, axis })
        } else {
            Ok(Edge { a: v, b: u, axis })
        }
    }

    pub fn lower(&self) -> &Site {
        &self.a
    }

    pub fn upper(&self) -> &Site {
        &self.b
    }

    pub fn axis(&self) -> usize {
        self.axis
    }
}

/// Inclusive axis-aligned box standing in for `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Window {
    lo: Site,
    hi: Site,
}

impl Window {
    pub fn new(lo: Site, hi: Site) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::DimensionMismatch { expected: lo.dim(), got: hi.dim() });
        }
        if lo.dim() == 0 {
            return Err(Error::InvalidWindow("dimension must be at least 1".into()));
        }
        if lo.0.iter().zip(&hi.0).any(|(l, h)| l > h) {
            return Err(Error::InvalidWindow("lo must be <= hi componentwise".into()));
        }
        let w = Window { lo, hi };
        if w.volume() < 2 {
            return Err(Error::InvalidWindow("window must contain at least two sites".into()));
        }
        Ok(w)
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: i64, hi: i64) -> Result<Self> {
        Window::new(Site(alloc::vec![lo; dim]), Site(alloc::vec![hi; dim]))
    }

    /// Smallest window containing both sites.
    pub fn bounding(a: &Site, b: &Site) -> Result<Self> {
        let lo = a.0.iter().zip(&b.0).map(|(x, y)| *x.min(y)).collect::<Vec<_>>();
        let hi = a.0.iter().zip(&b.0).map(|(x, y)| *x.max(y)).collect::<Vec<_>>();
        Window::new(Site(lo), Site(hi))
    }

    /// Grows the window by `margins[k]` on both sides of axis `k`.
    pub fn expanded(&self, margins: &[i64]) -> Window {
        let lo = self.lo.0.iter().zip(margins).map(|(l, m)| l - m).collect();
        let hi = self.hi.0.iter().zip(margins).map(|(h, m)| h + m).collect();
        Window { lo: Site(lo), hi: Site(hi) }
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn lo(&self) -> &Site {
        &self.lo
    }

    pub fn hi(&self) -> &Site {
        &self.hi
    }

    pub fn extent(&self, axis: usize) -> usize {
        (self.hi.0[axis] - self.lo.0[axis] + 1) as usize
    }

    pub fn volume(&self) -> usize {
        (0..self.dim()).map(|k| self.extent(k)).product()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.0.iter().zip(&self.hi.0)).all(|(c, (l, h))| l <= c && c <= h)
    }

    /// Whether `x` lies on a face of the window.
    pub fn on_boundary(&self, x: &[i64]) -> bool {
        x.iter().zip(self.lo.0.iter().zip(&self.hi.0)).any(|(c, (l, h))| c == l || c == h)
    }

    /// Stride of `axis` in the linear index (coordinate 0 is most significant,
    /// so linear order equals lexicographic order of sites).
    pub fn stride(&self, axis: usize) -> usize {
        ((axis + 1)..self.dim()).map(|k| self.extent(k)).product()
    }

    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let mut idx = 0usize;
        for k in 0..self.dim() {
            idx = idx * self.extent(k) + (x[k] - self.lo.0[k]) as usize;
        }
        Some(idx)
    }

    /// Writes the coordinates of linear index `idx` into `out`.
    pub fn coords_into(&self, mut idx: usize, out: &mut [i64]) {
        for k in (0..self.dim()).rev() {
            let n = self.extent(k);
            out[k] = self.lo.0[k] + (idx % n) as i64;
            idx /= n;
        }
    }

    pub fn site_at(&self, idx: usize) -> Site {
        let mut c = alloc::vec![0; self.dim()];
        self.coords_into(idx, &mut c);
        Site(c)
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.volume()).map(move |i| self.site_at(i))
    }

    /// Number of edges with both endpoints in the window.
    pub fn edge_count(&self) -> u64 {
        let ext: Vec<u64> = (0..self.dim()).map(|k| self.extent(k) as u64).collect();
        box_edge_count(&ext)
    }
}

fn box_edge_count(ext: &[u64]) -> u64 {
    (0..ext.len())
        .map(|k| {
            (ext[k] - 1)
                * ext
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != k)
                    .map(|(_, n)| *n)
                    .product::<u64>()
        })
        .sum()
}

/// Rank of edge `(lower, axis)` among the edges of the box with extents
/// `ext`, ordered by lower-endpoint position (lexicographic) and then axis.
/// `pos` is the lower endpoint relative to the box origin.
fn box_edge_rank(pos: &[u64], axis: usize, ext: &[u64]) -> u64 {
    let d = ext.len();
    let mut rank = 0u64;
    for k in 0..d {
        // positions q < pos (lexicographic) whose edge along k stays in the box
        for j in 0..d {
            if k < j && pos[k] + 1 >= ext[k] {
                continue;
            }
            let choices = if k == j { pos[j].min(ext[j] - 1) } else { pos[j] };
            if choices == 0 {
                continue;
            }
            let mut suffix = 1u64;
            for i in (j + 1)..d {
                suffix *= if i == k { ext[i] - 1 } else { ext[i] };
            }
            rank += choices * suffix;
        }
    }
    rank + (0..axis).filter(|&k| pos[k] + 1 < ext[k]).count() as u64
}

/// Stable integer id of an edge relative to a window.
///
/// Edges with both endpoints in the window get ids `0..E` (a bijection onto
/// the window's edge set); edges reaching into the one-site halo get ids
/// `E..`. Anything further out is a domain error.
pub fn canonical_edge_id(e: &Edge, w: &Window) -> Result<u64> {
    if e.lower().dim() != w.dim() {
        return Err(Error::DimensionMismatch { expected: w.dim(), got: e.lower().dim() });
    }
    let d = w.dim();
    let axis = e.axis();
    if w.contains(e.lower().coords()) && w.contains(e.upper().coords()) {
        let ext: Vec<u64> = (0..d).map(|k| w.extent(k) as u64).collect();
        let pos: Vec<u64> = (0..d).map(|k| (e.lower().0[k] - w.lo.0[k]) as u64).collect();
        return Ok(box_edge_rank(&pos, axis, &ext));
    }
    let halo = w.expanded(&alloc::vec![1; d]);
    if !(halo.contains(e.lower().coords()) && halo.contains(e.upper().coords())) {
        return Err(Error::EdgeOutsideHalo);
    }
    let ext: Vec<u64> = (0..d).map(|k| halo.extent(k) as u64).collect();
    let pos: Vec<u64> = (0..d).map(|k| (e.lower().0[k] - halo.lo.0[k]) as u64).collect();
    Ok(w.edge_count() + box_edge_rank(&pos, axis, &ext))
}

/// Sites at l1-distance one from `x` inside both the window and the region,
/// ordered by axis and then sign (negative first).
pub fn neighbors(x: &Site, w: &Window, r: &Region) -> Vec<Site> {
    let mut out = Vec::with_capacity(2 * x.dim());
    for k in 0..x.dim() {
        for step in [-1i64, 1] {
            let mut c = x.0.clone();
            c[k] += step;
            if w.contains(&c) && r.contains_site(&c) {
                out.push(Site(c));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use alloc::vec;

    fn edge(a: &[i64], b: &[i64]) -> Edge {
        Edge::new(Site::new(a), Site::new(b)).unwrap()
    }

    #[test]
    fn edge_ids_in_a_segment() {
        let w = Window::new(Site::from([0]), Site::from([3])).unwrap();
        assert_eq!(canonical_edge_id(&edge(&[0], &[1]), &w).unwrap(), 0);
        assert_eq!(canonical_edge_id(&edge(&[1], &[2]), &w).unwrap(), 1);
        assert_eq!(canonical_edge_id(&edge(&[1], &[0]), &w).unwrap(), 0);
    }

    #[test]
    fn edge_far_outside_is_rejected() {
        let w = Window::cube(2, 0, 3).unwrap();
        assert_eq!(canonical_edge_id(&edge(&[5, 5], &[6, 5]), &w), Err(Error::EdgeOutsideHalo));
        // the halo ring itself is fine
        assert!(canonical_edge_id(&edge(&[-1, 0], &[0, 0]), &w).unwrap() >= w.edge_count());
    }

    #[test]
    fn ids_follow_position_then_axis() {
        let w = Window::cube(2, 0, 2).unwrap();
        let mut listed = Vec::new();
        for x in w.sites() {
            for k in 0..2 {
                let mut y = x.coords().to_vec();
                y[k] += 1;
                if w.contains(&y) {
                    listed.push(canonical_edge_id(&edge(x.coords(), &y), &w).unwrap());
                }
            }
        }
        let expect: Vec<u64> = (0..w.edge_count()).collect();
        assert_eq!(listed, expect);
    }

    #[test]
    fn window_and_halo_ids_are_injective() {
        for w in [Window::cube(2, -1, 2).unwrap(), Window::new(Site::from([0, 0, 0]), Site::from([1, 2, 1])).unwrap()] {
            let halo = w.expanded(&vec![1; w.dim()]);
            let mut seen = BTreeSet::new();
            let mut count = 0;
            for x in halo.sites() {
                for k in 0..w.dim() {
                    let mut y = x.coords().to_vec();
                    y[k] += 1;
                    if halo.contains(&y) {
                        let id = canonical_edge_id(&edge(x.coords(), &y), &w).unwrap();
                        let inside = w.contains(x.coords()) && w.contains(&y);
                        assert_eq!(inside, id < w.edge_count());
                        assert!(seen.insert(id));
                        count += 1;
                    }
                }
            }
            assert_eq!(seen.len(), count);
        }
    }

    #[test]
    fn neighbor_clipping() {
        let w = Window::cube(2, 0, 3).unwrap();
        assert_eq!(neighbors(&Site::from([0, 0]), &w, &Region::All), vec![Site::from([1, 0]), Site::from([0, 1])]);
        assert_eq!(neighbors(&Site::from([1, 1]), &w, &Region::All).len(), 4);
    }

    #[test]
    fn index_round_trip_is_lexicographic() {
        let w = Window::new(Site::from([-1, 2]), Site::from([1, 4])).unwrap();
        let sites: Vec<Site> = w.sites().collect();
        let mut sorted = sites.clone();
        sorted.sort();
        assert_eq!(sites, sorted);
        for (i, s) in sites.iter().enumerate() {
            assert_eq!(w.index_of(s.coords()), Some(i));
        }
    }

    #[test]
    fn window_validation() {
        assert!(Window::new(Site::from([0, 0]), Site::from([0, 0])).is_err());
        assert!(Window::new(Site::from([1, 0]), Site::from([0, 3])).is_err());
        assert!(Edge::new(Site::from([0, 0]), Site::from([1, 1])).is_err());
    }
}
