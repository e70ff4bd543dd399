use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use super::{distance_to_line, dot, norm, Cylinder, ShapeModel, Side, Slab};
use crate::error::{Error, Result};
use crate::lattice::{Site, Window};

/// Default angular tolerance for near-natural slabs, in radians.
pub const DEFAULT_NEAR_NATURAL_TOL: f64 = 0.05;

/// End vertices of a cylinder split by end, and all opposite-end pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct EndPairSet {
    pub cylinder: Cylinder,
    pub left: Vec<Site>,
    pub right: Vec<Site>,
}

impl EndPairSet {
    pub fn len(&self) -> usize {
        self.left.len() * self.right.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pairs in left-major lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (&Site, &Site)> + '_ {
        self.left.iter().flat_map(move |u| self.right.iter().map(move |v| (u, v)))
    }
}

fn for_each_neighbor(c: &[i64], mut f: impl FnMut(&[i64])) {
    let mut n = c.to_vec();
    for k in 0..c.len() {
        for s in [-1, 1] {
            n[k] = c[k] + s;
            f(&n);
        }
        n[k] = c[k];
    }
}

/// End vertices of `c`: the non-interior endpoints of edges that have the
/// other endpoint strictly inside the cylinder's slab and cross an end
/// hyperplane within the cylinder radius.
pub fn end_pairs(c: &Cylinder, w: &Window) -> Result<EndPairSet> {
    let slab = c.slab();
    let d = w.dim();
    let mut left = BTreeSet::new();
    let mut right = BTreeSet::new();
    let mut a = alloc::vec![0i64; d];
    let mut pa = alloc::vec![0.0f64; d];
    let mut p = alloc::vec![0.0f64; d];
    let reach = c.radius() + 1.0 + 1e-9;
    for idx in 0..w.volume() {
        w.coords_into(idx, &mut a);
        for k in 0..d {
            pa[k] = a[k] as f64;
        }
        // the crossing point is within one step of `a`, and skew distance dominates the Euclidean one
        if !slab.interior(&pa) || distance_to_line(&pa, c.axis_point(), c.axis_dir()) > reach {
            continue;
        }
        let phi_a = slab.phi(&pa);
        let mut err = None;
        for_each_neighbor(&a, |b| {
            let pb: Vec<f64> = b.iter().map(|&x| x as f64).collect();
            let Some(side) = slab.side_of(&pb) else { return };
            let level = match side {
                Side::Lower => slab.lo(),
                Side::Upper => slab.hi(),
            };
            let phi_b = slab.phi(&pb);
            let t = (level - phi_a) / (phi_b - phi_a);
            for k in 0..d {
                p[k] = pa[k] + t * (pb[k] - pa[k]);
            }
            if c.axis_distance(&p) <= c.radius() * (1.0 + 1e-9) + 1e-9 {
                if !w.contains(b) {
                    err = Some(Error::InvalidWindow(format!("end vertex {:?} lies outside the window", Site::new(b))));
                    return;
                }
                match side {
                    Side::Lower => left.insert(Site::new(b)),
                    Side::Upper => right.insert(Site::new(b)),
                };
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(EndPairSet { cylinder: c.clone(), left: left.into_iter().collect(), right: right.into_iter().collect() })
}

fn adjacent_to_interior(slab: &Slab, c: &[i64]) -> bool {
    let mut hit = false;
    for_each_neighbor(c, |n| hit |= slab.interior_site(n));
    hit
}

/// Sites of `w` adjacent to, but not in, the interior of `slab`, split into
/// the lower and upper sides.
pub fn boundary_sites(slab: &Slab, w: &Window) -> (Vec<Site>, Vec<Site>) {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for s in w.sites() {
        let u = s.to_point();
        if slab.interior(&u) || !adjacent_to_interior(slab, s.coords()) {
            continue;
        }
        match slab.side_of(&u) {
            Some(Side::Lower) => lower.push(s),
            Some(Side::Upper) => upper.push(s),
            None => {}
        }
    }
    (lower, upper)
}

/// Whether `(u, v)` is a boundary pair of `slab` (either orientation).
pub fn is_boundary_pair(slab: &Slab, u: &Site, v: &Site) -> bool {
    let (pu, pv) = (u.to_point(), v.to_point());
    if slab.interior(&pu) || slab.interior(&pv) {
        return false;
    }
    if !adjacent_to_interior(slab, u.coords()) || !adjacent_to_interior(slab, v.coords()) {
        return false;
    }
    matches!(
        (slab.side_of(&pu), slab.side_of(&pv)),
        (Some(Side::Lower), Some(Side::Upper)) | (Some(Side::Upper), Some(Side::Lower))
    )
}

/// Membership of `slab` in the near-natural family of `(x, y)`: `(x, y)` is
/// a boundary pair, the slab direction is within `eps1` of `(y-x)/|y-x|`,
/// and the angle to the natural slab is below `eps1`.
pub fn is_near_natural(slab: &Slab, x: &Site, y: &Site, shape: &ShapeModel, eps1: f64) -> Result<bool> {
    if !is_boundary_pair(slab, x, y) {
        return Ok(false);
    }
    let v = y.sub(x).to_point();
    let dir: Vec<f64> = v.iter().map(|c| c / norm(&v)).collect();
    let alpha = slab.frame().theta();
    let gap = norm(&dir.iter().zip(alpha).map(|(a, b)| a - b).collect::<Vec<_>>());
    if gap >= eps1 {
        return Ok(false);
    }
    let nat = super::natural_slab(x, y, shape)?;
    let cos = dot(slab.frame().normal(), nat.frame().normal()).abs().min(1.0);
    Ok(libm::acos(cos) < eps1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{natural_cylinder, Frame};
    use alloc::vec;

    fn axis_cylinder(radius: f64) -> Cylinder {
        natural_cylinder(&Site::from([0, 0]), &Site::from([3, 0]), radius, &ShapeModel::L2).unwrap()
    }

    #[test]
    fn thin_cylinder_has_one_pair() {
        let w = Window::new(Site::from([-2, -3]), Site::from([5, 3])).unwrap();
        let e = end_pairs(&axis_cylinder(0.5), &w).unwrap();
        assert_eq!(e.left, vec![Site::from([0, 0])]);
        assert_eq!(e.right, vec![Site::from([3, 0])]);
        assert_eq!(e.len(), 1);
    }

    #[test]
    fn wider_cylinder_has_nine_pairs() {
        let w = Window::new(Site::from([-2, -3]), Site::from([5, 3])).unwrap();
        let e = end_pairs(&axis_cylinder(1.5), &w).unwrap();
        assert_eq!(e.left, vec![Site::from([0, -1]), Site::from([0, 0]), Site::from([0, 1])]);
        assert_eq!(e.right.len(), 3);
        assert_eq!(e.pairs().count(), 9);
    }

    #[test]
    fn end_vertex_outside_window_is_an_error() {
        let w = Window::new(Site::from([1, -3]), Site::from([5, 3])).unwrap();
        assert!(matches!(end_pairs(&axis_cylinder(0.5), &w), Err(Error::InvalidWindow(_))));
    }

    #[test]
    fn boundary_pairs_of_axis_slab() {
        let f = Frame::new(&ShapeModel::L2, &[1.0, 0.0]).unwrap();
        let s = Slab::new(f, vec![0.0, 0.0], 0.0, 3.0).unwrap();
        let w = Window::cube(2, -2, 5).unwrap();
        let (lo, hi) = boundary_sites(&s, &w);
        assert!(lo.iter().all(|u| u.coords()[0] == 0));
        assert!(hi.iter().all(|u| u.coords()[0] == 3));
        assert_eq!(lo.len(), 8);
        assert!(is_boundary_pair(&s, &Site::from([0, 0]), &Site::from([3, 2])));
        assert!(is_boundary_pair(&s, &Site::from([3, 2]), &Site::from([0, 0])));
        assert!(!is_boundary_pair(&s, &Site::from([-1, 0]), &Site::from([3, 2])));
        assert!(!is_boundary_pair(&s, &Site::from([0, 0]), &Site::from([0, 1])));
    }

    #[test]
    fn natural_slab_is_near_natural() {
        let x = Site::from([0, 0]);
        let y = Site::from([20, 1]);
        let nat = crate::geometry::natural_slab(&x, &y, &ShapeModel::L2).unwrap();
        assert!(is_near_natural(&nat, &x, &y, &ShapeModel::L2, DEFAULT_NEAR_NATURAL_TOL).unwrap());
        let f = Frame::new(&ShapeModel::L2, &[1.0, 0.0]).unwrap();
        let axis = Slab::new(f, vec![0.0, 0.0], 0.0, 20.0).unwrap();
        assert!(is_near_natural(&axis, &x, &y, &ShapeModel::L2, DEFAULT_NEAR_NATURAL_TOL).unwrap());
        assert!(!is_near_natural(&axis, &x, &y, &ShapeModel::L2, 0.01).unwrap());
    }
}
