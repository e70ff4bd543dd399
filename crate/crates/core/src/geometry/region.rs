use alloc::vec::Vec;

use super::{distance_to_line, dot, normalized, Frame, ShapeModel};
use crate::error::{domain, Result};
use crate::lattice::{Site, Window};

const REL_TOL: f64 = 1e-9;

#[inline]
fn tol(level: f64) -> f64 {
    REL_TOL * (1.0 + level.abs())
}

/// Runs `f` on the real embedding of a lattice point without allocating
/// for the dimensions the simulations use.
#[inline]
fn with_point<R>(c: &[i64], f: impl FnOnce(&[f64]) -> R) -> R {
    let mut buf = [0.0f64; 8];
    if c.len() <= buf.len() {
        for (b, &x) in buf.iter_mut().zip(c) {
            *b = x as f64;
        }
        f(&buf[..c.len()])
    } else {
        let v: Vec<f64> = c.iter().map(|&x| x as f64).collect();
        f(&v)
    }
}

#[inline]
fn phi_from(frame: &Frame, origin: &[f64], u: &[f64]) -> f64 {
    let n = frame.normal();
    let mut s = 0.0;
    for k in 0..u.len() {
        s += n[k] * (u[k] - origin[k]);
    }
    s / dot(n, frame.y())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Side {
    /// `H⁺`: `Φ ≥ level`.
    Upper,
    /// `H⁻`: `Φ ≤ level`.
    Lower,
}

/// Closed halfspace `H^±_{θ,level}` measured from `origin`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Halfspace {
    pub frame: Frame,
    pub origin: Vec<f64>,
    pub level: f64,
    pub side: Side,
}

impl Halfspace {
    pub fn contains(&self, u: &[f64]) -> bool {
        let p = phi_from(&self.frame, &self.origin, u);
        match self.side {
            Side::Upper => p >= self.level - tol(self.level),
            Side::Lower => p <= self.level + tol(self.level),
        }
    }
}

/// Closed slab `S_θ(lo, hi)` measured from `origin`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Slab {
    frame: Frame,
    origin: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl Slab {
    pub fn new(frame: Frame, origin: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if origin.len() != frame.dim() {
            return Err(crate::Error::DimensionMismatch { expected: frame.dim(), got: origin.len() });
        }
        if !(lo <= hi) {
            return Err(domain("slab requires lo <= hi"));
        }
        Ok(Slab { frame, origin, lo, hi })
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn phi(&self, u: &[f64]) -> f64 {
        phi_from(&self.frame, &self.origin, u)
    }

    pub fn phi_site(&self, c: &[i64]) -> f64 {
        self.frame.phi_site(c, &self.origin)
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        let p = self.phi(u);
        p >= self.lo - tol(self.lo) && p <= self.hi + tol(self.hi)
    }

    /// Strict interior `lo < Φ < hi`.
    pub fn interior(&self, u: &[f64]) -> bool {
        let p = self.phi(u);
        p > self.lo + tol(self.lo) && p < self.hi - tol(self.hi)
    }

    pub fn interior_site(&self, c: &[i64]) -> bool {
        with_point(c, |u| self.interior(u))
    }

    /// Which side of the slab a non-interior point lies on.
    pub fn side_of(&self, u: &[f64]) -> Option<Side> {
        let p = self.phi(u);
        if p <= self.lo + tol(self.lo) {
            Some(Side::Lower)
        } else if p >= self.hi - tol(self.hi) {
            Some(Side::Upper)
        } else {
            None
        }
    }

    /// The same slab translated by `by`.
    pub fn translated(&self, by: &[f64]) -> Slab {
        let origin = self.origin.iter().zip(by).map(|(a, b)| a + b).collect();
        Slab { origin, ..self.clone() }
    }
}

/// Bounded cylinder: points within `radius` of the axis line, cut by `slab`.
/// The skew variant measures the distance along `H_{θ,0}` of the slab frame
/// instead of orthogonally.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Cylinder {
    axis_point: Vec<f64>,
    axis_dir: Vec<f64>,
    radius: f64,
    slab: Slab,
    skew: bool,
}

impl Cylinder {
    pub fn new(axis_point: Vec<f64>, axis_dir: &[f64], radius: f64, slab: Slab, skew: bool) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(domain("cylinder radius must be positive"));
        }
        let d = slab.frame().dim();
        if axis_point.len() != d || axis_dir.len() != d {
            return Err(crate::Error::DimensionMismatch { expected: d, got: axis_dir.len() });
        }
        let axis_dir = normalized(axis_dir).ok_or_else(|| domain("axis direction must be non-zero"))?;
        if slab.frame().phi(&axis_dir).abs() < 1e-9 {
            return Err(domain("axis is parallel to the end hyperplanes; cylinder is unbounded"));
        }
        Ok(Cylinder { axis_point, axis_dir, radius, slab, skew })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn slab(&self) -> &Slab {
        &self.slab
    }

    pub fn axis_point(&self) -> &[f64] {
        &self.axis_point
    }

    pub fn axis_dir(&self) -> &[f64] {
        &self.axis_dir
    }

    pub fn is_skew(&self) -> bool {
        self.skew
    }

    /// Distance from `u` to the axis line (skew or Euclidean).
    pub fn axis_distance(&self, u: &[f64]) -> f64 {
        if self.skew {
            let f = self.slab.frame();
            let mut pd = 0.0;
            let mut pv = 0.0;
            let n = f.normal();
            for k in 0..u.len() {
                pd += n[k] * self.axis_dir[k];
                pv += n[k] * (u[k] - self.axis_point[k]);
            }
            let t = pv / pd;
            let mut s = 0.0;
            for k in 0..u.len() {
                let w = u[k] - self.axis_point[k] - t * self.axis_dir[k];
                s += w * w;
            }
            libm::sqrt(s)
        } else {
            distance_to_line(u, &self.axis_point, &self.axis_dir)
        }
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        self.slab.contains(u) && self.axis_distance(u) <= self.radius + tol(self.radius)
    }

    /// Axis point on the end hyperplane `Φ = level`.
    pub fn axis_at(&self, level: f64) -> Vec<f64> {
        let t = (level - self.slab.phi(&self.axis_point)) / self.slab.frame().phi(&self.axis_dir);
        self.axis_point.iter().zip(&self.axis_dir).map(|(p, d)| p + t * d).collect()
    }

    /// A lattice box containing the cylinder, grown by `margin` sites.
    pub fn bounding_window(&self, margin: i64) -> Result<Window> {
        let a = self.axis_at(self.slab.lo());
        let b = self.axis_at(self.slab.hi());
        let reach = if self.skew {
            self.radius
        } else {
            let c = self.slab.frame().phi(&self.axis_dir).abs() * dot(self.slab.frame().normal(), self.slab.frame().y());
            self.radius * (1.0 + 1.0 / c.max(1e-9))
        };
        let lo: Vec<i64> =
            a.iter().zip(&b).map(|(x, y)| libm::floor(x.min(*y) - reach) as i64 - margin).collect();
        let hi: Vec<i64> = a.iter().zip(&b).map(|(x, y)| libm::ceil(x.max(*y) + reach) as i64 + margin).collect();
        Window::new(Site::new(lo), Site::new(hi))
    }
}

/// An allowed vertex set for restricted passage times.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Region {
    All,
    Halfspace(Halfspace),
    Slab(Slab),
    Cylinder(Cylinder),
    Intersection(Vec<Region>),
}

impl Region {
    pub fn contains(&self, u: &[f64]) -> bool {
        match self {
            Region::All => true,
            Region::Halfspace(h) => h.contains(u),
            Region::Slab(s) => s.contains(u),
            Region::Cylinder(c) => c.contains(u),
            Region::Intersection(rs) => rs.iter().all(|r| r.contains(u)),
        }
    }

    #[inline]
    pub fn contains_site(&self, c: &[i64]) -> bool {
        match self {
            Region::All => true,
            _ => with_point(c, |u| self.contains(u)),
        }
    }
}

impl From<Slab> for Region {
    fn from(s: Slab) -> Self {
        Region::Slab(s)
    }
}

impl From<Cylinder> for Region {
    fn from(c: Cylinder) -> Self {
        Region::Cylinder(c)
    }
}

impl From<Halfspace> for Region {
    fn from(h: Halfspace) -> Self {
        Region::Halfspace(h)
    }
}

fn natural_frame(x: &Site, y: &Site, shape: &ShapeModel) -> Result<(Frame, Vec<f64>)> {
    if x.dim() != y.dim() {
        return Err(crate::Error::DimensionMismatch { expected: x.dim(), got: y.dim() });
    }
    if x == y {
        return Err(domain("natural frame needs x != y"));
    }
    let v = y.sub(x).to_point();
    let frame = Frame::new(shape, &v)?;
    Ok((frame, v))
}

/// `S_nat(x, y)`: the slab between the hyperplanes through `x` and `y`
/// parallel to the supporting plane in direction `y - x`.
pub fn natural_slab(x: &Site, y: &Site, shape: &ShapeModel) -> Result<Slab> {
    let (frame, v) = natural_frame(x, y, shape)?;
    let hi = frame.phi(&v);
    Slab::new(frame, x.to_point(), 0.0, hi)
}

/// `C_nat(x, y, radius)`: points within `radius` of the line through `x`
/// and `y`, cut by the natural slab.
pub fn natural_cylinder(x: &Site, y: &Site, radius: f64, shape: &ShapeModel) -> Result<Cylinder> {
    if !(radius > 0.0) {
        return Err(domain("cylinder radius must be positive"));
    }
    let (frame, v) = natural_frame(x, y, shape)?;
    let hi = frame.phi(&v);
    let slab = Slab::new(frame, x.to_point(), 0.0, hi)?;
    Cylinder::new(x.to_point(), &v, radius, slab, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn axis_slab(lo: f64, hi: f64) -> Slab {
        let f = Frame::new(&ShapeModel::L2, &[1.0, 0.0]).unwrap();
        Slab::new(f, vec![0.0, 0.0], lo, hi).unwrap()
    }

    #[test]
    fn slab_membership() {
        let r = Region::Slab(axis_slab(0.0, 1.0));
        assert!(r.contains_site(&[1, 1]));
        assert!(r.contains_site(&[0, -5]));
        assert!(!r.contains_site(&[2, 1]));
        assert!(Slab::new(axis_slab(0.0, 1.0).frame().clone(), vec![0.0, 0.0], 2.0, 1.0).is_err());
    }

    #[test]
    fn interior_is_strict() {
        let s = axis_slab(0.0, 3.0);
        assert!(!s.interior_site(&[0, 0]));
        assert!(s.interior_site(&[1, 7]));
        assert!(!s.interior_site(&[3, 0]));
        assert_eq!(s.side_of(&[-1.0, 0.0]), Some(Side::Lower));
        assert_eq!(s.side_of(&[3.0, 0.0]), Some(Side::Upper));
    }

    #[test]
    fn natural_cylinder_examples() {
        let x = Site::from([1, 2]);
        let y = Site::from([7, 5]);
        for r in [0.1, 1.0, 4.0] {
            let c = natural_cylinder(&x, &y, r, &ShapeModel::L2).unwrap();
            assert!(c.contains(&x.to_point()) && c.contains(&y.to_point()));
            assert!(c.contains(&[4.0, 3.5]));
        }
        let c = natural_cylinder(&x, &y, 1.0, &ShapeModel::L2).unwrap();
        // unit normal to (6,3) is (-1,2)/√5
        let s = libm::sqrt(5.0);
        assert!(!c.contains(&[4.0 - 2.0 / s, 3.5 + 4.0 / s]));
        assert!(natural_cylinder(&x, &y, 0.0, &ShapeModel::L2).is_err());
        assert!(natural_cylinder(&x, &x, 1.0, &ShapeModel::L2).is_err());
    }

    #[test]
    fn halfspaces() {
        let f = Frame::new(&ShapeModel::L1, &[0.0, 1.0]).unwrap();
        let up = Region::Halfspace(Halfspace { frame: f.clone(), origin: vec![0.0, 0.0], level: 2.0, side: Side::Upper });
        let dn = Region::Halfspace(Halfspace { frame: f, origin: vec![0.0, 0.0], level: 2.0, side: Side::Lower });
        assert!(up.contains_site(&[5, 2]) && dn.contains_site(&[5, 2]));
        assert!(up.contains_site(&[0, 3]) && !dn.contains_site(&[0, 3]));
    }

    #[test]
    fn skew_cylinder_distance() {
        // tilted ℓ1 frame: H_{θ,0} is x1 + x2 = 0 for θ in the open first quadrant
        let th = [0.8, 0.6];
        let f = Frame::new(&ShapeModel::L1, &th).unwrap();
        let slab = Slab::new(f.clone(), vec![0.0, 0.0], 0.0, 10.0).unwrap();
        let c = Cylinder::new(vec![0.0, 0.0], &th, 1.0, slab, true).unwrap();
        let u = [5.0, 1.0];
        assert!((c.axis_distance(&u) - f.skew_distance(&u)).abs() < 1e-12);
    }

    #[test]
    fn bounding_window_covers() {
        let x = Site::from([0, 0]);
        let y = Site::from([9, 4]);
        for shape in [ShapeModel::L1, ShapeModel::L2] {
            let c = natural_cylinder(&x, &y, 2.5, &shape).unwrap();
            let w = c.bounding_window(0).unwrap();
            let big = w.expanded(&[6, 6]);
            for s in big.sites() {
                if c.contains(&s.to_point()) {
                    assert!(w.contains(s.coords()), "{s:?}");
                }
            }
        }
    }
}
