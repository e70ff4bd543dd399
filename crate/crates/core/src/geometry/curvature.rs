use alloc::vec::Vec;

use super::{distance_to_line, Frame, ShapeModel};
use crate::error::{Error, Result};
use crate::lattice::Site;

/// Fit quality a probe radius needs to count toward the curvature neighbourhood.
pub const DEFAULT_QUALITY_THRESHOLD: f64 = 0.95;

const STEPS_PER_RAY: usize = 10;
const FLAT_TOL: f64 = 1e-12;

/// Quadratic behaviour of `g` on `H_{θ,1}` near `y_θ`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurvatureFit {
    pub eps: f64,
    /// Largest ratio `(g(u)-1)/|u-y_θ|²` over the probes.
    pub c5_hat: f64,
    /// Smallest such ratio.
    pub c6_hat: f64,
    /// Least-squares slope of `g(u)-1` against `|u-y_θ|²`.
    pub slope: f64,
    /// R² of that fit.
    pub quality: f64,
    pub probes: usize,
}

impl CurvatureFit {
    pub fn is_curved(&self, threshold: f64) -> bool {
        self.c6_hat > 0.0 && self.quality >= threshold
    }
}

fn probe_directions(frame: &Frame) -> Vec<Vec<f64>> {
    let basis = frame.tangent_basis();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for b in &basis {
        dirs.push(b.clone());
        dirs.push(b.iter().map(|x| -x).collect());
    }
    let h = core::f64::consts::FRAC_1_SQRT_2;
    for i in 0..basis.len() {
        for j in (i + 1)..basis.len() {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                dirs.push(basis[i].iter().zip(&basis[j]).map(|(a, b)| h * (si * a + sj * b)).collect());
            }
        }
    }
    dirs
}

/// Probes `g` on rays of `H_{θ,1}` out of `y_θ` at radii `eps·k/10`,
/// `k = 1..=10`.
pub fn curvature_fit(shape: &ShapeModel, frame: &Frame, eps: f64) -> Result<CurvatureFit> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(crate::error::domain("probe radius must be positive"));
    }
    let y = frame.y();
    let mut ts = Vec::new();
    let mut zs = Vec::new();
    for dir in probe_directions(frame) {
        for k in 1..=STEPS_PER_RAY {
            let s = eps * k as f64 / STEPS_PER_RAY as f64;
            let u: Vec<f64> = y.iter().zip(&dir).map(|(a, b)| a + s * b).collect();
            ts.push(s * s);
            let z = shape.eval(&u) - 1.0;
            // rounding noise on flat faces reads as exactly flat
            zs.push(if z.abs() <= FLAT_TOL { 0.0 } else { z });
        }
    }
    if ts.len() < 8 {
        return Err(Error::InsufficientData { needed: 8, got: ts.len() });
    }
    let ratios = ts.iter().zip(&zs).map(|(t, z)| z / t);
    let (c5_hat, c6_hat) = ratios.fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), r| (hi.max(r), lo.min(r)));
    // g(y_θ) = 1 exactly, so the fit goes through the origin; its slope is a
    // t²-weighted mean of the ratios and lies in [c6_hat, c5_hat]
    let stt: f64 = ts.iter().map(|t| t * t).sum();
    let slope = ts.iter().zip(&zs).map(|(t, z)| t * z).sum::<f64>() / stt;
    let zbar = zs.iter().sum::<f64>() / zs.len() as f64;
    let ss_tot: f64 = zs.iter().map(|z| (z - zbar) * (z - zbar)).sum();
    let ss_res: f64 = ts.iter().zip(&zs).map(|(t, z)| (z - slope * t) * (z - slope * t)).sum();
    let quality = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).max(0.0)
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(CurvatureFit { eps, c5_hat, c6_hat, slope, quality, probes: ts.len() })
}

/// Curvature fits over a ladder of probe radii.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurvatureReport {
    pub theta: Vec<f64>,
    pub fits: Vec<CurvatureFit>,
    /// Largest ladder radius whose fit reaches the quality threshold.
    pub eps0_hat: Option<f64>,
    /// `θ` counts as empirically curved.
    pub curved: bool,
    pub threshold: f64,
}

pub fn curvature_report(shape: &ShapeModel, frame: &Frame, ladder: &[f64], threshold: f64) -> Result<CurvatureReport> {
    let fits = ladder.iter().map(|&e| curvature_fit(shape, frame, e)).collect::<Result<Vec<_>>>()?;
    let eps0_hat = fits.iter().filter(|f| f.quality >= threshold).map(|f| f.eps).fold(None, |m: Option<f64>, e| {
        Some(m.map_or(e, |m| m.max(e)))
    });
    let curved = match eps0_hat {
        Some(e0) => fits.iter().filter(|f| f.eps <= e0).all(|f| f.is_curved(threshold)),
        None => false,
    };
    Ok(CurvatureReport { theta: frame.theta().to_vec(), fits, eps0_hat, curved, threshold })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Directionality {
    Good,
    Acceptable,
    Neither,
}

/// Classifies `(θ, x)`: both need an empirically curved θ and
/// `|x|^{-1/4} < ε₀`; good pairs sit within `d` of the axis line, acceptable
/// ones within `|x|^{1/5}`.
pub fn is_directionally_good(theta: &[f64], x: &Site, report: &CurvatureReport) -> Directionality {
    let r = x.norm();
    let Some(eps0) = report.eps0_hat else { return Directionality::Neither };
    if !report.curved || r == 0.0 || libm::pow(r, -0.25) >= eps0 {
        return Directionality::Neither;
    }
    let Some(dir) = super::normalized(theta) else { return Directionality::Neither };
    let dist = distance_to_line(&x.to_point(), &alloc::vec![0.0; x.dim()], &dir);
    if dist <= x.dim() as f64 {
        Directionality::Good
    } else if dist <= libm::pow(r, 0.2) {
        Directionality::Acceptable
    } else {
        Directionality::Neither
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_ball_is_curved() {
        let eps = 0.1;
        for th in [[1.0, 0.0], [0.6, 0.8], [-0.28, 0.96]] {
            let f = Frame::new(&ShapeModel::L2, &th).unwrap();
            let fit = curvature_fit(&ShapeModel::L2, &f, eps).unwrap();
            // the ratio (sqrt(1+s²)-1)/s² decreases in s
            let exact_min = (libm::sqrt(1.0 + eps * eps) - 1.0) / (eps * eps);
            assert!((fit.c6_hat - exact_min).abs() < 1e-12);
            assert!((fit.c5_hat - 0.5).abs() < 1e-3);
            assert!(fit.c6_hat <= fit.slope && fit.slope <= fit.c5_hat);
            assert!((fit.c6_hat - 0.5).abs() < 1.3e-3);
            assert!(fit.is_curved(DEFAULT_QUALITY_THRESHOLD));
            let wide = curvature_fit(&ShapeModel::L2, &f, 2.0 * eps).unwrap();
            assert!(wide.c5_hat <= 2.0 * fit.c5_hat * 1.1);
        }
    }

    #[test]
    fn l1_face_is_flat() {
        let f = Frame::with_normal(&ShapeModel::L1, &[1.0, 0.0], &[1.0, 1.0]).unwrap();
        let fit = curvature_fit(&ShapeModel::L1, &f, 0.1).unwrap();
        assert_eq!(fit.c6_hat, 0.0);
        assert!(!fit.is_curved(DEFAULT_QUALITY_THRESHOLD));
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let mid = Frame::new(&ShapeModel::L1, &[s, s]).unwrap();
        let fit = curvature_fit(&ShapeModel::L1, &mid, 0.1).unwrap();
        assert_eq!((fit.c5_hat, fit.c6_hat, fit.quality), (0.0, 0.0, 1.0));
    }

    #[test]
    fn three_dimensional_probes() {
        let f = Frame::new(&ShapeModel::L2, &[0.0, 0.0, 1.0]).unwrap();
        let fit = curvature_fit(&ShapeModel::L2, &f, 0.1).unwrap();
        assert_eq!(fit.probes, 80);
        assert!((fit.c5_hat - 0.5).abs() < 1e-3);
    }

    #[test]
    fn classification() {
        let th = [1.0, 0.0];
        let f = Frame::new(&ShapeModel::L2, &th).unwrap();
        let rep = curvature_report(&ShapeModel::L2, &f, &[0.05, 0.1, 0.2], DEFAULT_QUALITY_THRESHOLD).unwrap();
        assert_eq!(rep.eps0_hat, Some(0.2));
        assert!(rep.curved);
        assert_eq!(is_directionally_good(&th, &Site::from([1000, 0]), &rep), Directionality::Good);
        assert_eq!(is_directionally_good(&th, &Site::from([1000, 3]), &rep), Directionality::Acceptable);
        assert_eq!(is_directionally_good(&th, &Site::from([1000, 5]), &rep), Directionality::Neither);
        assert_eq!(is_directionally_good(&th, &Site::from([3, 0]), &rep), Directionality::Neither);
        let flat = Frame::new(&ShapeModel::L1, &[0.6, 0.8]).unwrap();
        let rep = curvature_report(&ShapeModel::L1, &flat, &[0.1], DEFAULT_QUALITY_THRESHOLD).unwrap();
        assert!(!rep.curved);
        assert_eq!(is_directionally_good(&[0.6, 0.8], &Site::from([600, 800]), &rep), Directionality::Neither);
    }
}
