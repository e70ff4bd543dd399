use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use super::norm;
use crate::error::{Error, Result};

/// A norm `g` on `R^d` standing in for the time constant.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ShapeModel {
    L1,
    L2,
    /// `g(x) = sum_k w_k |x_k|`.
    WeightedL1(Vec<f64>),
    Empirical(EmpiricalShape),
}

impl ShapeModel {
    /// Dimension the model is tied to, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            ShapeModel::L1 | ShapeModel::L2 => None,
            ShapeModel::WeightedL1(w) => Some(w.len()),
            ShapeModel::Empirical(_) => Some(2),
        }
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        match self.dim() {
            Some(k) if k != d => Err(Error::DimensionMismatch { expected: k, got: d }),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ShapeModel::L1 => x.iter().map(|c| c.abs()).sum(),
            ShapeModel::L2 => norm(x),
            ShapeModel::WeightedL1(w) => x.iter().zip(w).map(|(c, w)| w * c.abs()).sum(),
            ShapeModel::Empirical(e) => e.eval(x),
        }
    }

    /// A (sub)gradient at `x`. At kinks of the analytic polyhedral norms the
    /// zero sign gives the average of the adjacent face normals; the
    /// empirical model uses a mollified gradient.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let sign = |c: f64| if c > 0.0 { 1.0 } else if c < 0.0 { -1.0 } else { 0.0 };
        match self {
            ShapeModel::L1 => x.iter().map(|&c| sign(c)).collect(),
            ShapeModel::L2 => {
                let n = norm(x);
                x.iter().map(|c| c / n).collect()
            }
            ShapeModel::WeightedL1(w) => x.iter().zip(w).map(|(&c, w)| w * sign(c)).collect(),
            ShapeModel::Empirical(e) => e.mollified_gradient(x),
        }
    }
}

impl fmt::Display for ShapeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeModel::L1 => write!(f, "l1"),
            ShapeModel::L2 => write!(f, "l2"),
            ShapeModel::WeightedL1(w) => {
                write!(f, "wl1")?;
                for x in w {
                    write!(f, ":{x}")?;
                }
                Ok(())
            }
            ShapeModel::Empirical(_) => write!(f, "empirical"),
        }
    }
}

impl FromStr for ShapeModel {
    type Err = Error;

    /// `l1`, `l2` or `wl1:w1:...:wd`. Empirical shapes are built from their
    /// CSV data with [`EmpiricalShape::from_csv`].
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "l1" => Ok(ShapeModel::L1),
            "l2" => Ok(ShapeModel::L2),
            _ if s.starts_with("wl1:") => {
                let w = s[4..]
                    .split(':')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<core::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::InvalidShape(String::from(s)))?;
                if w.is_empty() || w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                    return Err(Error::InvalidShape(String::from(s)));
                }
                Ok(ShapeModel::WeightedL1(w))
            }
            _ => Err(Error::InvalidShape(String::from(s))),
        }
    }
}

/// Planar limit-shape estimate from per-direction radii.
///
/// The boundary points `radius * (cos a, sin a)` are replaced by their convex
/// hull and `g` is the gauge of that polygon, so `g` is positively
/// homogeneous and convex whatever the noise in the radii.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmpiricalShape {
    /// Hull vertices, counter-clockwise by angle in `[0, 2pi)`.
    vertices: Vec<[f64; 2]>,
    angles: Vec<f64>,
    /// `faces[i]` is `m` with `m . y = 1` on the edge from vertex `i` to `i+1`.
    faces: Vec<[f64; 2]>,
    mollify: f64,
}

const MOLLIFY_HALF_WIDTH: f64 = 1e-3;

fn wrap_angle(a: f64) -> f64 {
    let r = libm::fmod(a, 2.0 * PI);
    if r < 0.0 {
        r + 2.0 * PI
    } else {
        r
    }
}

fn angle_of(x: &[f64]) -> f64 {
    let a = libm::atan2(x[1], x[0]);
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

impl EmpiricalShape {
    /// `angles` in radians, `radii` the distance from the origin to the shape
    /// boundary in that direction (that is `1 / g(direction)`).
    pub fn new(angles: &[f64], radii: &[f64]) -> Result<Self> {
        if angles.len() != radii.len() || angles.len() < 3 {
            return Err(Error::InvalidShape("need at least three (angle, radius) rows".into()));
        }
        if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidShape("radii must be positive".into()));
        }
        let mut pts: Vec<[f64; 2]> = angles
            .iter()
            .zip(radii)
            .map(|(&a, &r)| [r * libm::cos(a), r * libm::sin(a)])
            .collect();
        pts.sort_by(|p, q| p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])));
        pts.dedup();
        // Andrew's monotone chain
        let mut hull: Vec<[f64; 2]> = Vec::with_capacity(pts.len() * 2);
        for pass in 0..2 {
            let start = hull.len();
            let iter: &mut dyn Iterator<Item = &[f64; 2]> =
                if pass == 0 { &mut pts.iter() } else { &mut pts.iter().rev() };
            for &p in iter {
                while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                    hull.pop();
                }
                hull.push(p);
            }
            hull.pop();
        }
        if hull.len() < 3 {
            return Err(Error::InvalidShape("degenerate hull".into()));
        }
        let n = hull.len();
        for i in 0..n {
            if cross(hull[i], hull[(i + 1) % n], [0.0, 0.0]) <= 0.0 {
                return Err(Error::InvalidShape("origin must lie strictly inside the shape".into()));
            }
        }
        let mut with_angle: Vec<(f64, [f64; 2])> = hull.iter().map(|p| (angle_of(p), *p)).collect();
        with_angle.sort_by(|a, b| a.0.total_cmp(&b.0));
        let vertices: Vec<[f64; 2]> = with_angle.iter().map(|v| v.1).collect();
        let angles: Vec<f64> = with_angle.iter().map(|v| v.0).collect();
        let faces = (0..n)
            .map(|i| {
                let p = vertices[i];
                let q = vertices[(i + 1) % n];
                let det = p[0] * q[1] - p[1] * q[0];
                [(q[1] - p[1]) / det, (p[0] - q[0]) / det]
            })
            .collect();
        Ok(EmpiricalShape { vertices, angles, faces, mollify: MOLLIFY_HALF_WIDTH })
    }

    /// Parses `angle,radius` rows; a header line and blank lines are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut angles = Vec::new();
        let mut radii = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',');
            let (a, r) = (cols.next(), cols.next());
            match (a.map(|s| s.trim().parse::<f64>()), r.map(|s| s.trim().parse::<f64>())) {
                (Some(Ok(a)), Some(Ok(r))) => {
                    angles.push(a);
                    radii.push(r);
                }
                _ if i == 0 => continue,
                _ => return Err(Error::InvalidShape(format!("bad row {}: {line}", i + 1))),
            }
        }
        EmpiricalShape::new(&angles, &radii)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    fn face_for_angle(&self, a: f64) -> usize {
        // last vertex with angle <= a, cyclically
        match self.angles.iter().rposition(|&v| v <= a) {
            Some(i) => i,
            None => self.angles.len() - 1,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if x[0] == 0.0 && x[1] == 0.0 {
            return 0.0;
        }
        let m = self.faces[self.face_for_angle(angle_of(x))];
        m[0] * x[0] + m[1] * x[1]
    }

    fn mollified_gradient(&self, x: &[f64]) -> Vec<f64> {
        const SAMPLES: usize = 21;
        let a0 = angle_of(x);
        let mut acc = [0.0, 0.0];
        for s in 0..SAMPLES {
            let a = a0 + self.mollify * (2.0 * s as f64 / (SAMPLES - 1) as f64 - 1.0);
            let a = wrap_angle(a);
            let m = self.faces[self.face_for_angle(a)];
            acc[0] += m[0];
            acc[1] += m[1];
        }
        alloc::vec![acc[0] / SAMPLES as f64, acc[1] / SAMPLES as f64]
    }

    /// Largest violation of `g((u+v)/2) <= (g(u)+g(v))/2` over a set of points.
    pub fn convexity_defect(&self, pts: &[[f64; 2]]) -> f64 {
        let mut worst: f64 = 0.0;
        for u in pts {
            for v in pts {
                let mid = [(u[0] + v[0]) / 2.0, (u[1] + v[1]) / 2.0];
                worst = worst.max(self.eval(&mid) - (self.eval(u) + self.eval(v)) / 2.0);
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn parse_specs() {
        assert_eq!("l1".parse::<ShapeModel>().unwrap(), ShapeModel::L1);
        assert_eq!("l2".parse::<ShapeModel>().unwrap(), ShapeModel::L2);
        assert_eq!("wl1:1:2.5".parse::<ShapeModel>().unwrap(), ShapeModel::WeightedL1(vec![1.0, 2.5]));
        assert!("wl1:".parse::<ShapeModel>().is_err());
        assert!("wl1:1:-2".parse::<ShapeModel>().is_err());
        assert!("lp".parse::<ShapeModel>().is_err());
    }

    #[test]
    fn analytic_norms() {
        assert_eq!(ShapeModel::L1.eval(&[3.0, -4.0]), 7.0);
        assert_eq!(ShapeModel::L2.eval(&[3.0, -4.0]), 5.0);
        assert_eq!(ShapeModel::WeightedL1(vec![2.0, 0.5]).eval(&[3.0, -4.0]), 8.0);
        assert_eq!(ShapeModel::L1.gradient(&[1.0, 0.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn empirical_circle_is_close_to_l2() {
        let n = 360;
        let angles: Vec<f64> = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
        let radii = vec![2.0; n];
        let e = EmpiricalShape::new(&angles, &radii).unwrap();
        for i in 0..50 {
            let a = 0.123 * i as f64;
            let x = [3.0 * libm::cos(a), 3.0 * libm::sin(a)];
            assert!((e.eval(&x) - 1.5).abs() < 1e-3);
            let s = 7.25;
            assert!((e.eval(&[s * x[0], s * x[1]]) - s * e.eval(&x)).abs() < 1e-9);
        }
        let g = ShapeModel::Empirical(e).gradient(&[1.0, 1.0]);
        assert!((g[0] - g[1]).abs() < 1e-2);
    }

    #[test]
    fn empirical_hull_absorbs_dents() {
        // diamond plus the corner (1,1), with one dented direction the hull drops
        let angles = [0.0, PI / 4.0, PI / 2.0, PI, 1.5 * PI, 0.3];
        let radii = [1.0, libm::sqrt(2.0), 1.0, 1.0, 1.0, 0.5];
        let e = EmpiricalShape::new(&angles, &radii).unwrap();
        assert_eq!(e.vertices().len(), 5);
        assert!(e.vertices().iter().all(|v| (v[0] * v[0] + v[1] * v[1]) >= 1.0 - 1e-12));
        let grid: Vec<[f64; 2]> = (0..40).map(|i| [libm::cos(i as f64), libm::sin(1.7 * i as f64)]).collect();
        assert!(e.convexity_defect(&grid) <= 1e-12);
    }

    #[test]
    fn empirical_rejects_bad_input() {
        assert!(EmpiricalShape::new(&[0.0, 1.0], &[1.0, 1.0]).is_err());
        assert!(EmpiricalShape::new(&[0.0, 0.1, 0.2], &[1.0, 1.0, 1.0]).is_err());
        let csv = "angle,radius\n0,1\n1.5707963267948966,1\n3.141592653589793,1\n4.71238898038469,1\n";
        let e = EmpiricalShape::from_csv(csv).unwrap();
        assert!((e.eval(&[0.5, 0.5]) - 1.0).abs() < 1e-12);
    }
}
