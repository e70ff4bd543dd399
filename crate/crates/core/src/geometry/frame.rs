use alloc::vec::Vec;

use super::{dot, norm, normalized, ShapeModel};
use crate::error::{domain, Error, Result};

/// θ-coordinates of a shape: the boundary point `y_θ` in direction θ and
/// the unit normal of the supporting hyperplane there.
///
/// `Φ_θ(u) = (n·u)/(n·y_θ)` is the linear functional that equals `r` on the
/// hyperplane `H_{θ,r}` through `r·y_θ`; the tangential projection is
/// `π_θ(u) = Φ_θ(u)·y_θ`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Frame {
    theta: Vec<f64>,
    normal: Vec<f64>,
    y: Vec<f64>,
    ny: f64,
}

const DEGENERATE_COS: f64 = 1e-9;

impl Frame {
    /// Frame with the supporting plane normal taken from the shape's
    /// (sub)gradient at θ.
    pub fn new(shape: &ShapeModel, theta: &[f64]) -> Result<Self> {
        let normal = shape.gradient(theta);
        Frame::with_normal(shape, theta, &normal)
    }

    /// Frame with an explicitly chosen supporting plane normal.
    pub fn with_normal(shape: &ShapeModel, theta: &[f64], normal: &[f64]) -> Result<Self> {
        shape.check_dim(theta.len())?;
        if normal.len() != theta.len() {
            return Err(Error::DimensionMismatch { expected: theta.len(), got: normal.len() });
        }
        let theta = normalized(theta).ok_or_else(|| domain("direction must be non-zero"))?;
        let normal = normalized(normal).ok_or(Error::DegenerateFrame)?;
        let g = shape.eval(&theta);
        if !(g > 0.0 && g.is_finite()) {
            return Err(domain("shape must be positive on the direction"));
        }
        let y: Vec<f64> = theta.iter().map(|t| t / g).collect();
        let ny = dot(&normal, &y);
        if ny <= DEGENERATE_COS * norm(&y) {
            return Err(Error::DegenerateFrame);
        }
        Ok(Frame { theta, normal, y, ny })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    /// The boundary point `y_θ`.
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// `Φ_θ(u)`.
    #[inline]
    pub fn phi(&self, u: &[f64]) -> f64 {
        dot(&self.normal, u) / self.ny
    }

    /// `Φ_θ` at a lattice site, relative to `origin`.
    #[inline]
    pub fn phi_site(&self, c: &[i64], origin: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..c.len() {
            s += self.normal[k] * (c[k] as f64 - origin[k]);
        }
        s / self.ny
    }

    /// `π_θ(u)`.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        let t = self.phi(u);
        self.y.iter().map(|c| t * c).collect()
    }

    /// `|u - π_θ u|`, the distance from `u` to the axis measured along `H_{θ,0}`.
    pub fn skew_distance(&self, u: &[f64]) -> f64 {
        let t = self.phi(u);
        libm::sqrt(u.iter().zip(&self.y).map(|(a, b)| (a - t * b) * (a - t * b)).sum())
    }

    /// Orthonormal basis of `H_{θ,0}`.
    pub fn tangent_basis(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d.saturating_sub(1));
        for k in 0..d {
            if basis.len() + 1 == d {
                break;
            }
            let mut v = alloc::vec![0.0; d];
            v[k] = 1.0;
            let c = dot(&v, &self.normal);
            for (vi, ni) in v.iter_mut().zip(&self.normal) {
                *vi -= c * ni;
            }
            for b in &basis {
                let c = dot(&v, b);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= c * bi;
                }
            }
            if let Some(u) = normalized(&v) {
                if norm(&v) > 1e-8 {
                    basis.push(u);
                }
            }
        }
        basis
    }

    /// Hyperplane `H_{θ,level}`.
    pub fn hyperplane(&self, level: f64) -> Hyperplane {
        Hyperplane { frame: self.clone(), level }
    }
}

/// `H_{θ,r}`: the hyperplane through `r·y_θ` parallel to the supporting plane.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Hyperplane {
    pub frame: Frame,
    pub level: f64,
}

impl Hyperplane {
    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        (self.frame.phi(u) - self.level).abs() <= tol
    }

    pub fn point(&self) -> Vec<f64> {
        self.frame.y().iter().map(|c| c * self.level).collect()
    }

    /// Checks `g(u) >= level - tol` for probe points of the plane within
    /// `radius` of `level·y_θ`, which holds iff the plane supports the
    /// `level`-ball near the contact point.
    pub fn supports(&self, shape: &ShapeModel, radius: f64, steps: usize, tol: f64) -> bool {
        let base = self.point();
        let basis = self.frame.tangent_basis();
        for b in &basis {
            for i in 1..=steps {
                let s = radius * i as f64 / steps as f64;
                for sign in [-1.0, 1.0] {
                    let u: Vec<f64> = base.iter().zip(b).map(|(p, v)| p + sign * s * v).collect();
                    if shape.eval(&u) < self.level - tol {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// `π_θ(u)` for the shape's default supporting plane at θ.
pub fn tangential_projection(u: &[f64], theta: &[f64], shape: &ShapeModel) -> Result<Vec<f64>> {
    Ok(Frame::new(shape, theta)?.project(u))
}

/// `Φ_θ(u)`: `g(π_θ u)` on the positive side of `H_{θ,0}`, `-g(π_θ u)` otherwise.
pub fn phi_theta(u: &[f64], theta: &[f64], shape: &ShapeModel) -> Result<f64> {
    Ok(Frame::new(shape, theta)?.phi(u))
}

/// `Θ_ρ(y) = |y - π_ρ y| / g(π_ρ y)`, a surrogate for the angle between `y` and ρ.
pub fn theta_surrogate_angle(y: &[f64], rho: &[f64], shape: &ShapeModel) -> Result<f64> {
    let f = Frame::new(shape, rho)?;
    let t = f.phi(y);
    if t == 0.0 {
        return Err(domain("projection onto the axis is zero"));
    }
    let p = f.project(y);
    Ok(super::norm(&super::sub(y, &p)) / shape.eval(&p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const S2: f64 = core::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn l2_projection() {
        let p = tangential_projection(&[3.0, 4.0], &[1.0, 0.0], &ShapeModel::L2).unwrap();
        assert_eq!(p, vec![3.0, 0.0]);
        let f = Frame::new(&ShapeModel::L2, &[1.0, 0.0]).unwrap();
        assert_eq!(f.project(&[3.0, 0.0]), vec![3.0, 0.0]);
    }

    #[test]
    fn l1_face_projection() {
        // θ = (1,1)/√2 in the interior of a face; supporting plane x1+x2 = 1
        let p = tangential_projection(&[2.0, 0.0], &[S2, S2], &ShapeModel::L1).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn phi_values() {
        let f = Frame::new(&ShapeModel::L2, &[1.0, 0.0]).unwrap();
        assert_eq!(f.phi(&[2.5, -7.0]), 2.5);
        assert_eq!(f.phi(&[0.0, 0.0]), 0.0);
        for shape in [ShapeModel::L1, ShapeModel::L2, ShapeModel::WeightedL1(vec![1.0, 3.0])] {
            for th in [[1.0, 0.0], [0.6, 0.8], [-0.3, 0.2]] {
                let f = Frame::new(&shape, &th).unwrap();
                let y2: Vec<f64> = f.y().iter().map(|c| 2.0 * c).collect();
                assert!((f.phi(&y2) - 2.0).abs() < 1e-12);
                assert!((shape.eval(f.y()) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn surrogate_angle() {
        let t = theta_surrogate_angle(&[4.0, 3.0], &[1.0, 0.0], &ShapeModel::L2).unwrap();
        assert_eq!(t, 0.75);
        let t2 = theta_surrogate_angle(&[8.0, 6.0], &[1.0, 0.0], &ShapeModel::L2).unwrap();
        assert_eq!(t2, 0.75);
        assert_eq!(theta_surrogate_angle(&[5.0, 0.0], &[1.0, 0.0], &ShapeModel::L2).unwrap(), 0.0);
        assert!(theta_surrogate_angle(&[0.0, 1.0], &[1.0, 0.0], &ShapeModel::L2).is_err());
    }

    #[test]
    fn degenerate_normal_is_rejected() {
        assert_eq!(
            Frame::with_normal(&ShapeModel::L2, &[1.0, 0.0], &[0.0, 1.0]),
            Err(Error::DegenerateFrame)
        );
    }

    #[test]
    fn supporting_planes() {
        for th in [[1.0, 0.0], [S2, S2], [0.6, -0.8]] {
            for shape in [ShapeModel::L1, ShapeModel::L2] {
                let f = Frame::new(&shape, &th).unwrap();
                assert!(f.hyperplane(1.0).supports(&shape, 0.5, 50, 1e-12));
            }
        }
        let basis = Frame::new(&ShapeModel::L2, &[0.0, 0.0, 1.0]).unwrap().tangent_basis();
        assert_eq!(basis.len(), 2);
    }
}
