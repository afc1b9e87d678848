//! Fiber Fourier modes of deformation tensors, vanishing orders and the
//! regularity predictor.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acs::{j_from_phi, DeformationTensor};
use crate::error::{Error, Result};
use crate::geometry::{standard_structure, ComplexPoint, ZERO};
use crate::settings::Settings;

/// Fiber modes of a deformation tensor along one direction.
#[derive(Clone, Debug)]
pub struct ModeSpectrum {
    /// Unit representative of the direction; its largest coordinate is real
    /// and positive, so that the fiber coordinate along it is `zeta = t`.
    pub direction: Vec<Complex64>,
    pub radius: f64,
    pub samples: usize,
    /// `modes[k]` is the frame-matrix coefficient of `zeta^k`.
    pub modes: Vec<DMatrix<Complex64>>,
    /// `negative[k - 1]` is the raw DFT bin of frequency `-k`.
    pub negative: Vec<DMatrix<Complex64>>,
}

impl ModeSpectrum {
    pub fn max_mode(&self) -> usize {
        self.modes.len() - 1
    }

    /// Frobenius norm of `c_k`.
    pub fn amplitude(&self, k: usize) -> f64 {
        self.modes[k].norm()
    }

    /// Largest Frobenius norm among the negative-frequency bins.
    pub fn max_negative(&self) -> f64 {
        self.negative.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }

    /// `sum_k c_k zeta^k`.
    pub fn reconstruct(&self, zeta: Complex64) -> DMatrix<Complex64> {
        let mut acc = self.modes[0].clone();
        let mut p = Complex64::new(1.0, 0.0);
        for c in &self.modes[1..] {
            p *= zeta;
            acc += c.map(|v| v * p);
        }
        acc
    }
}

/// Canonical unit representative of a direction: normalized, with the first
/// coordinate of largest modulus rotated onto the positive real axis.
pub fn canonical_direction(direction: &[Complex64]) -> Result<Vec<Complex64>> {
    let norm = direction.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if direction.len() < 2 {
        return Err(Error::InvalidInput("direction needs at least two coordinates".into()));
    }
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidInput("direction must be a finite nonzero vector".into()));
    }
    let mut c = 0;
    for k in 1..direction.len() {
        if direction[k].norm() > direction[c].norm() {
            c = k;
        }
    }
    let phase = (direction[c] / direction[c].norm()).conj();
    Ok(direction.iter().map(|v| v * phase / norm).collect())
}

/// Fourier coefficients of the frame matrix of `phi` on the fiber circle of
/// radius `r` over `direction`, divided by `r^k`.
pub fn extract_modes(
    phi: &DeformationTensor,
    direction: &[Complex64],
    r: f64,
    max_mode: usize,
    samples: usize,
) -> Result<ModeSpectrum> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidInput(format!("extraction radius {r} must lie in (0, 1)")));
    }
    if samples < 2 * max_mode + 2 {
        return Err(Error::Aliasing { samples, modes: max_mode });
    }
    if direction.len() != phi.dim() {
        return Err(Error::DimensionMismatch { expected: phi.dim(), got: direction.len() });
    }
    let dir = canonical_direction(direction)?;
    let values = (0..samples)
        .map(|j| {
            let theta = std::f64::consts::TAU * j as f64 / samples as f64;
            let t = Complex64::from_polar(r, theta);
            let x = ComplexPoint::from_vec_unchecked(dir.iter().map(|v| v * t).collect());
            phi.frame_matrix(&x)
        })
        .collect::<Result<Vec<_>>>()?;
    let d = phi.dim() - 1;
    let bin = |freq: f64| {
        let mut acc = DMatrix::from_element(d, d, ZERO);
        for (j, v) in values.iter().enumerate() {
            let theta = std::f64::consts::TAU * j as f64 / samples as f64;
            let w = Complex64::from_polar(1.0 / samples as f64, -freq * theta);
            acc += v.map(|c| c * w);
        }
        acc
    };
    let modes = (0..=max_mode).map(|k| bin(k as f64).map(|c| c / r.powi(k as i32))).collect();
    let negative = (1..=max_mode).map(|k| bin(-(k as f64))).collect();
    Ok(ModeSpectrum { direction: dir, radius: r, samples, modes, negative })
}

/// Deterministic grid of directions: unit representatives of `(w, 1)` for
/// affine points `w` in the last chart with `|w| <= 0.85`, arranged on
/// concentric rings around `w = 0`.
pub fn direction_grid(n: usize, count: usize) -> Result<Vec<Vec<Complex64>>> {
    if n < 2 {
        return Err(Error::InvalidInput("dimension must be at least 2".into()));
    }
    if count == 0 {
        return Err(Error::EmptyInput("direction grid"));
    }
    const OUTER: f64 = 0.85;
    let rings = ((count as f64).sqrt() / 2.0).ceil().max(1.0) as usize;
    let rest = count - 1;
    let weight_total: usize = (1..=rings).sum();
    let mut counts: Vec<usize> = (1..=rings).map(|i| rest * i / weight_total).collect();
    let assigned: usize = counts.iter().sum();
    if let Some(last) = counts.last_mut() {
        *last += rest - assigned;
    }
    let mut affine: Vec<Vec<Complex64>> = vec![vec![ZERO; n - 1]];
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    for (i, &c) in counts.iter().enumerate() {
        let rho = OUTER * (i + 1) as f64 / rings as f64;
        for j in 0..c {
            let theta = std::f64::consts::TAU * j as f64 / c as f64 + 0.5 * i as f64;
            let w = (0..n - 1)
                .map(|a| Complex64::from_polar(rho / ((n - 1) as f64).sqrt(), theta + golden * a as f64 * (j + 1) as f64))
                .collect();
            affine.push(w);
        }
    }
    affine.truncate(count);
    Ok(affine
        .into_iter()
        .map(|w| {
            let mut v = w;
            v.push(Complex64::new(1.0, 0.0));
            let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            v.into_iter().map(|c| c / norm).collect()
        })
        .collect())
}

/// Spectra over a set of directions, computed in parallel.
pub fn extract_grid(phi: &DeformationTensor, directions: &[Vec<Complex64>], s: &Settings) -> Result<Vec<ModeSpectrum>> {
    directions.par_iter().map(|d| extract_modes(phi, d, s.radius, s.modes, s.samples)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum VanishingOrder {
    /// Smallest mode index with a non-vanishing coefficient.
    Order(usize),
    /// Every mode up to the given index vanishes.
    AllVanish(usize),
}

/// Default vanishing tolerance: `1e-8` times the largest mode amplitude
/// (floored at `1e-12`), but never below the absolute floor of `s`.
pub fn default_tolerance(spectra: &[ModeSpectrum], s: &Settings) -> f64 {
    let max_amp = spectra
        .iter()
        .flat_map(|sp| (0..sp.modes.len()).map(move |k| sp.amplitude(k)))
        .fold(0.0, f64::max);
    (1e-8 * max_amp.max(1e-12)).max(s.vanishing_floor)
}

/// Smallest index `k` such that `|c_k| > tol` at some direction.
pub fn vanishing_order(spectra: &[ModeSpectrum], tol: f64) -> Result<VanishingOrder> {
    let first = spectra.first().ok_or(Error::EmptyInput("spectra"))?;
    let kmax = first.max_mode();
    if spectra.iter().any(|sp| sp.max_mode() != kmax) {
        return Err(Error::InvalidInput("spectra have inconsistent maximal mode".into()));
    }
    let order = spectra
        .iter()
        .filter_map(|sp| (0..=kmax).find(|&k| sp.amplitude(k) > tol))
        .min();
    Ok(match order {
        Some(k) => VanishingOrder::Order(k),
        None => VanishingOrder::AllVanish(kmax),
    })
}

/// Smoothness classes at the origin predicted from a vanishing order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RegularityPrediction {
    /// Vanishing order below 3: no conclusion.
    NoConclusion,
    Classes {
        /// J is of class C^j_class at the origin.
        j_class: u32,
        /// The exhaustion is of class C^tau_class; only reported for k >= 6.
        tau_class: Option<u32>,
    },
}

pub fn predict_regularity(k: usize) -> RegularityPrediction {
    if k < 3 {
        return RegularityPrediction::NoConclusion;
    }
    let half = (k / 2) as u32;
    RegularityPrediction::Classes { j_class: half - 1, tau_class: (k >= 6).then_some(half) }
}

/// Modes guaranteed to vanish when the exhaustion is of class `C^{2k}` at
/// the center: `{0, ..., k - 1}`.
pub fn regularity_to_vanishing(two_k: i64) -> Result<Vec<usize>> {
    if two_k <= 0 || two_k % 2 != 0 {
        return Err(Error::InvalidInput(format!("smoothness {two_k} must be a positive even integer")));
    }
    Ok((0..(two_k / 2) as usize).collect())
}

/// Log-log samples `(log r, log |psi~|)` and their least-squares slope.
#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
}

/// Least-squares slope of `log |psi~|` against `log |z|` along a direction,
/// where `psi~ = Omega_o (J - J_o)` is the deviation of the structure lowered
/// with the standard Levi form.
pub fn decay_exponent(phi: &DeformationTensor, direction: &[Complex64], radii: &[f64]) -> Result<f64> {
    Ok(decay_fit(phi, direction, radii)?.slope)
}

pub fn decay_fit(phi: &DeformationTensor, direction: &[Complex64], radii: &[f64]) -> Result<DecayFit> {
    if radii.len() < 4 {
        return Err(Error::InvalidInput("decay fit needs at least 4 radii".into()));
    }
    if radii.iter().any(|&r| !(r > 0.0 && r < 0.5)) {
        return Err(Error::InvalidInput("decay radii must lie in (0, 0.5)".into()));
    }
    if direction.len() != phi.dim() {
        return Err(Error::DimensionMismatch { expected: phi.dim(), got: direction.len() });
    }
    let dir = canonical_direction(direction)?;
    let jo = standard_structure(phi.dim());
    let omega_o = &jo * -4.0;
    let mut pts = Vec::new();
    for &r in radii {
        let x = ComplexPoint::from_vec_unchecked(dir.iter().map(|v| v * r).collect());
        let psi = &omega_o * (j_from_phi(phi, &x)? - &jo);
        let v = psi.norm();
        if v >= 1e-14 {
            pts.push((r.ln(), v.ln()));
        }
    }
    if pts.len() < 2 {
        return Err(Error::DegenerateFit("deviation from the standard structure is below 1e-14".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("radii must be distinct".into()));
    }
    Ok(DecayFit { points: pts, slope: sxy / sxx })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial(k: u32, c: Complex64) -> DeformationTensor {
        DeformationTensor::fiber_polynomial(vec![(k, c)])
    }

    #[test]
    fn monomial_is_recovered() {
        let c = Complex64::new(0.2, 0.1);
        let dir = vec![Complex64::new(0.3, 0.4), Complex64::new(1.0, 0.0)];
        let sp = extract_modes(&monomial(3, c), &dir, 0.5, 16, 64).unwrap();
        assert!((sp.modes[3][(0, 0)] - c).norm() < 1e-12);
        for k in (0..=16).filter(|&k| k != 3) {
            assert!(sp.amplitude(k) < 1e-10, "k = {k}");
        }
        assert!(sp.max_negative() < 1e-12);
    }

    #[test]
    fn aliasing_and_radius_guards() {
        let phi = DeformationTensor::zero(2);
        let d = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        assert!(matches!(extract_modes(&phi, &d, 0.5, 16, 33), Err(Error::Aliasing { .. })));
        assert!(extract_modes(&phi, &d, 1.0, 4, 16).is_err());
        assert!(extract_modes(&phi, &d, 0.0, 4, 16).is_err());
    }

    #[test]
    fn direction_grid_has_requested_size_and_stays_in_chart() {
        for n in 2..4 {
            let g = direction_grid(n, 32).unwrap();
            assert_eq!(g.len(), 32);
            for d in &g {
                let w2: f64 = d[..n - 1].iter().map(|c| c.norm_sqr()).sum::<f64>() / d[n - 1].norm_sqr();
                assert!(w2.sqrt() <= 0.85 + 1e-12);
            }
        }
    }

    #[test]
    fn predictor_tables() {
        use RegularityPrediction::*;
        assert_eq!(predict_regularity(6), Classes { j_class: 2, tau_class: Some(3) });
        assert_eq!(predict_regularity(7), Classes { j_class: 2, tau_class: Some(3) });
        assert_eq!(predict_regularity(4), Classes { j_class: 1, tau_class: None });
        assert_eq!(predict_regularity(2), NoConclusion);
        assert_eq!(regularity_to_vanishing(2).unwrap(), vec![0]);
        assert_eq!(regularity_to_vanishing(6).unwrap(), vec![0, 1, 2]);
        assert!(regularity_to_vanishing(3).is_err());
        assert!(regularity_to_vanishing(0).is_err());
    }

    #[test]
    fn vanishing_order_cases() {
        let d = direction_grid(2, 4).unwrap();
        let s = Settings::default();
        let zero: Vec<_> = d.iter().map(|v| extract_modes(&DeformationTensor::zero(2), v, 0.5, 10, 32).unwrap()).collect();
        assert_eq!(vanishing_order(&zero, default_tolerance(&zero, &s)).unwrap(), VanishingOrder::AllVanish(10));
        let mut mixed = zero.clone();
        mixed[2].modes[0][(0, 0)] = Complex64::new(1e-3, 0.0);
        assert_eq!(vanishing_order(&mixed, default_tolerance(&mixed, &s)).unwrap(), VanishingOrder::Order(0));
        assert!(vanishing_order(&[], 1e-8).is_err());
    }

    #[test]
    fn decay_of_zero_tensor_is_degenerate() {
        let d = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let r = decay_exponent(&DeformationTensor::zero(2), &d, &[0.05, 0.1, 0.2, 0.4]);
        assert!(matches!(r, Err(Error::DegenerateFit(_))));
    }
}
