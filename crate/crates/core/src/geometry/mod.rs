//! Norms, supporting hyperplanes, slabs, cylinders, projections, end and
//! boundary pairs, and curvature probes of a limit-shape model.

mod curvature;
mod frame;
mod pairs;
mod region;
mod shape;

use alloc::vec::Vec;

pub use curvature::{
    curvature_fit, curvature_report, is_directionally_good, CurvatureFit, CurvatureReport, Directionality,
    DEFAULT_QUALITY_THRESHOLD,
};
pub use frame::{phi_theta, tangential_projection, theta_surrogate_angle, Frame, Hyperplane};
pub use pairs::{boundary_sites, end_pairs, is_boundary_pair, is_near_natural, EndPairSet, DEFAULT_NEAR_NATURAL_TOL};
pub use region::{natural_cylinder, natural_slab, Cylinder, Halfspace, Region, Side, Slab};
pub use shape::{EmpiricalShape, ShapeModel};

use crate::lattice::Site;

/// Nearest lattice point; exact half-ties round toward `+inf` in each
/// coordinate, which commutes with integer translations.
pub fn closest_lattice_point(u: &[f64]) -> Site {
    Site::new(u.iter().map(|&c| libm::floor(c + 0.5) as i64).collect::<Vec<_>>())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub(crate) fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(a.iter().map(|x| x / n).collect())
    } else {
        None
    }
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Euclidean distance from `u` to the line through `p` with unit direction `dir`.
pub fn distance_to_line(u: &[f64], p: &[f64], dir: &[f64]) -> f64 {
    let mut vv = 0.0;
    let mut along = 0.0;
    for k in 0..u.len() {
        let v = u[k] - p[k];
        vv += v * v;
        along += v * dir[k];
    }
    libm::sqrt((vv - along * along).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_rule() {
        assert_eq!(closest_lattice_point(&[0.4, 0.6]), Site::from([0, 1]));
        assert_eq!(closest_lattice_point(&[0.5, -0.5]), Site::from([1, 0]));
        assert_eq!(closest_lattice_point(&[2.0, 3.0]), Site::from([2, 3]));
        assert_eq!(closest_lattice_point(&[-1.5, 7.5]), Site::from([-1, 8]));
    }

    #[test]
    fn line_distance() {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        assert!((distance_to_line(&[1.0, 0.0], &[0.0, 0.0], &[s, s]) - s).abs() < 1e-15);
    }
}
