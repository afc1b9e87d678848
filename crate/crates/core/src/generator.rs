//! Leading-order deformation tensors with a planted fiber mode.
//!
//! For `f = zeta^{2m} fhat(w)` in the last chart (`w_a = z_a / z_n`,
//! `zeta = |z| z_n / |z_n|`) the tensor is the raised tangential CR Hessian
//! `dbar_b( tau_o * (dbar_b f)^sharp )`. In ambient coordinates this is
//! `eps * d^2 (tau_o f) / dzbar_j dzbar_k`, a symmetric matrix annihilating
//! `zbar`, which is evaluated in closed form.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::acs::{check_bound_constraint, DeformationTensor, StandardStructure};
use crate::error::{Error, Result};
use crate::expr::{Expr, Formula, VarFamily};
use crate::geometry::{
    antiholomorphic_vector, ddc_matrix, form_eval, frames, holomorphic_vector, real_vector, ComplexField,
    ComplexPoint, StandardExhaustion, I, ZERO,
};
use crate::numdiff;
use crate::settings::Settings;
use crate::spectrum::direction_grid;

/// Radii of the standard probe grid used for the amplitude bound.
pub const PROBE_RADII: [f64; 4] = [0.25, 0.5, 0.75, 0.95];

/// Tangential antiholomorphic derivative: components `Ebar_b g` along the
/// normal frame, by central differences in the real directions of `E_b`.
pub fn dbar_b(g: &dyn ComplexField, x: &ComplexPoint, s: &Settings) -> Result<Vec<Complex64>> {
    let f = frames(x)?;
    let h = s.fd_step_second * x.norm().max(1e-3);
    f.h_frame
        .iter()
        .map(|e| {
            let re = real_vector(e);
            let ie: Vec<Complex64> = e.iter().map(|c| c * I).collect();
            let im = real_vector(&ie);
            let de = numdiff::central_richardson(|t| g.value(&x.shifted(&re, t)), h)?;
            let die = numdiff::central_richardson(|t| g.value(&x.shifted(&im, t)), h)?;
            Ok((de + I * die) * 0.5)
        })
        .collect()
}

/// Raising through the standard Levi form: the unique `X` in H^{1,0} (returned
/// as dz-coefficients) with `ddc tau_o(X, Ybar) = 2i alpha(Ybar)` for every
/// frame vector `Ybar`.
pub fn sharp(alpha: &[Complex64], x: &ComplexPoint, s: &Settings) -> Result<Vec<Complex64>> {
    let n = x.dim();
    if alpha.len() != n - 1 {
        return Err(Error::DimensionMismatch { expected: n - 1, got: alpha.len() });
    }
    let f = frames(x)?;
    let omega = ddc_matrix(&StandardExhaustion { n }, &StandardStructure::new(n), x, s)?;
    let gram = DMatrix::from_fn(n - 1, n - 1, |a, b| {
        let ebar: Vec<Complex64> = f.h_frame[b].iter().map(|c| c.conj()).collect();
        form_eval(&omega, &holomorphic_vector(&f.h_frame[a]), &antiholomorphic_vector(&ebar))
    });
    let rhs = DVector::from_iterator(n - 1, alpha.iter().map(|a| a * 2.0 * I));
    let coeffs = gram
        .transpose()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NumericDomain("Levi form is singular on the normal distribution".into()))?;
    let mut out = vec![ZERO; n];
    for (a, e) in f.h_frame.iter().enumerate() {
        for i in 0..n {
            out[i] += coeffs[a] * e[i];
        }
    }
    Ok(out)
}

/// Parameters of the construction. `fhat` is an expression in the affine
/// coordinates `w1..w_{n-1}` of the last chart.
#[derive(Clone, Debug)]
pub struct GeneratorInput {
    pub m: u32,
    pub fhat: Formula,
    pub epsilon: f64,
    pub dim: usize,
}

impl GeneratorInput {
    pub fn new(m: u32, fhat: &str, epsilon: f64, dim: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::InvalidInput(format!("m = {m} must be at least 3")));
        }
        if dim < 2 {
            return Err(Error::InvalidInput("dimension must be at least 2".into()));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidInput(format!("amplitude {epsilon} must be positive")));
        }
        let fhat = Formula::parse(fhat, VarFamily::Affine(dim - 1))?;
        Ok(GeneratorInput { m, fhat, epsilon, dim })
    }
}

/// Result of the construction.
#[derive(Clone, Debug)]
pub struct GeneratorOutput {
    pub phi: DeformationTensor,
    /// True when `fhat` is CR-holomorphic, so the tensor vanishes identically.
    pub vanishing: bool,
    pub max_amplitude: f64,
}

/// Symbolic antiholomorphic derivatives of `fhat`.
#[derive(Clone, Debug)]
struct AntiDerivatives {
    first: Vec<Expr>,
    second: Vec<Vec<Expr>>,
}

impl AntiDerivatives {
    fn new(fhat: &Formula) -> Self {
        let k = fhat.family().count();
        let first: Vec<Expr> = (0..k).map(|a| fhat.diff(a, true)).collect();
        let second = first.iter().map(|d| (0..k).map(|b| d.diff(b, true)).collect()).collect();
        AntiDerivatives { first, second }
    }

    fn is_zero(&self) -> bool {
        self.first.iter().all(Expr::is_zero)
    }
}

/// Ambient matrix `d^2 (tau_o f) / dzbar_j dzbar_k` (without `eps`).
fn ambient_hessian(m: u32, fhat: &Formula, d: &AntiDerivatives, x: &ComplexPoint) -> Result<DMatrix<Complex64>> {
    let z = x.coords();
    let n = z.len();
    let p = n - 1;
    if z[p] == ZERO {
        return Err(Error::ChartDomain { chart: p });
    }
    let mf = m as f64;
    let s = x.norm_sqr();
    let zpb = z[p].conj();
    let w: Vec<Complex64> = z[..p].iter().map(|v| v / z[p]).collect();

    let g = (z[p] / zpb).powu(m) * s.powi(m as i32 + 1);
    let a: Vec<Complex64> = (0..n)
        .map(|j| z[j] * ((mf + 1.0) / s) - if j == p { mf / zpb } else { ZERO })
        .collect();
    let grad_g: Vec<Complex64> = a.iter().map(|v| g * v).collect();
    let hess_g = DMatrix::from_fn(n, n, |j, k| {
        let da = -(z[j] * z[k]) * ((mf + 1.0) / (s * s)) + if j == p && k == p { mf / (zpb * zpb) } else { ZERO };
        g * (a[j] * a[k] + da)
    });

    // dwbar_a / dzbar_j and second derivatives.
    let dw = |aa: usize, j: usize| -> Complex64 {
        let mut v = ZERO;
        if j == aa {
            v += 1.0 / zpb;
        }
        if j == p {
            v -= z[aa].conj() / (zpb * zpb);
        }
        v
    };
    let d2w = |aa: usize, j: usize, k: usize| -> Complex64 {
        let mut v = ZERO;
        if j == aa && k == p {
            v -= 1.0 / (zpb * zpb);
        }
        if j == p && k == aa {
            v -= 1.0 / (zpb * zpb);
        }
        if j == p && k == p {
            v += z[aa].conj() * 2.0 / (zpb * zpb * zpb);
        }
        v
    };
    let fval = fhat.eval(&w);
    let fa: Vec<Complex64> = d.first.iter().map(|e| e.eval(&w)).collect();
    let fab: Vec<Vec<Complex64>> = d.second.iter().map(|row| row.iter().map(|e| e.eval(&w)).collect()).collect();
    let grad_f: Vec<Complex64> = (0..n).map(|j| (0..p).map(|aa| fa[aa] * dw(aa, j)).sum()).collect();
    let hess_f = DMatrix::from_fn(n, n, |j, k| {
        let mut v = ZERO;
        for aa in 0..p {
            v += fa[aa] * d2w(aa, j, k);
            for bb in 0..p {
                v += fab[aa][bb] * dw(aa, j) * dw(bb, k);
            }
        }
        v
    });
    let out = DMatrix::from_fn(n, n, |j, k| {
        hess_g[(j, k)] * fval + grad_g[j] * grad_f[k] + grad_f[j] * grad_g[k] + g * hess_f[(j, k)]
    });
    if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NumericDomain("generator Hessian is not finite".into()));
    }
    Ok(out)
}

fn unit_tensor(m: u32, fhat: &Formula, dim: usize) -> DeformationTensor {
    let d = AntiDerivatives::new(fhat);
    let fhat = fhat.clone();
    DeformationTensor::closed_form(dim, move |x| {
        let a = ambient_hessian(m, &fhat, &d, x)?;
        let e = frames(x)?.matrix();
        Ok(e.adjoint() * a * e.map(|c| c.conj()))
    })
}

/// Standard probe points: the default direction grid at the probe radii.
pub fn probe_points(dim: usize, s: &Settings) -> Result<Vec<ComplexPoint>> {
    let dirs = direction_grid(dim, s.directions)?;
    Ok(dirs
        .iter()
        .flat_map(|d| PROBE_RADII.iter().map(move |&r| ComplexPoint::from_vec_unchecked(d.iter().map(|c| c * r).collect())))
        .collect())
}

/// Largest amplitude, on a bisection grid, whose bound margin stays above
/// `s.amplitude_margin` at every standard probe. Infinite when `fhat` is
/// CR-holomorphic.
pub fn max_amplitude(fhat: &Formula, m: u32, dim: usize, s: &Settings) -> Result<f64> {
    if AntiDerivatives::new(fhat).is_zero() {
        return Ok(f64::INFINITY);
    }
    let unit = unit_tensor(m, fhat, dim);
    let probes = probe_points(dim, s)?;
    let frames_at: Vec<DMatrix<Complex64>> = probes.iter().map(|x| unit.frame_matrix(x)).collect::<Result<_>>()?;
    if frames_at.iter().all(|f| f.iter().all(|c| c.norm() == 0.0)) {
        return Ok(f64::INFINITY);
    }
    let ok = |eps: f64| -> Result<bool> {
        let scaled = DeformationTensor::closed_form(dim, {
            let frames_at = frames_at.clone();
            let probes = probes.clone();
            move |x| {
                let i = probes.iter().position(|p| p == x).expect("probe lookup");
                Ok(frames_at[i].map(|c| c * eps))
            }
        });
        for x in &probes {
            if check_bound_constraint(&scaled, x)? <= s.amplitude_margin {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let mut hi = 1.0;
    while ok(hi)? {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Leading-order tensor with planted mode `2m`.
pub fn build_phi_leading(input: &GeneratorInput, s: &Settings) -> Result<GeneratorOutput> {
    let d = AntiDerivatives::new(&input.fhat);
    if d.is_zero() {
        return Ok(GeneratorOutput { phi: DeformationTensor::zero(input.dim), vanishing: true, max_amplitude: f64::INFINITY });
    }
    let bound = max_amplitude(&input.fhat, input.m, input.dim, s)?;
    if input.epsilon > bound {
        return Err(Error::AmplitudeTooLarge { epsilon: input.epsilon, bound });
    }
    let unit = unit_tensor(input.m, &input.fhat, input.dim);
    let eps = input.epsilon;
    let phi = DeformationTensor::closed_form(input.dim, move |x| Ok(unit.frame_matrix(x)?.map(|c| c * eps)));
    Ok(GeneratorOutput { phi, vanishing: false, max_amplitude: bound })
}

/// `f = zeta^{2m} fhat(w)` in the last chart.
pub fn planted_function(m: u32, fhat: &Formula, x: &ComplexPoint) -> Result<Complex64> {
    let z = x.coords();
    let p = z.len() - 1;
    if z[p] == ZERO {
        return Err(Error::ChartDomain { chart: p });
    }
    let zeta = z[p] / z[p].norm() * x.norm();
    let w: Vec<Complex64> = z[..p].iter().map(|v| v / z[p]).collect();
    Ok(zeta.powu(2 * m) * fhat.eval(&w))
}

/// Frame matrix of the unscaled tensor by direct composition: the field
/// `V = tau_o (dbar_b f)^sharp` is built from finite-difference `dbar_b` and
/// [`sharp`], then differentiated along each `Ebar_b` and projected to the
/// normal distribution.
pub fn compose_direct(fhat: &Formula, m: u32, x: &ComplexPoint, s: &Settings) -> Result<DMatrix<Complex64>> {
    let n = x.dim();
    let f = |y: &ComplexPoint| planted_function(m, fhat, y);
    let v = |y: &ComplexPoint| -> Result<DVector<Complex64>> {
        let alpha = dbar_b(&f, y, s)?;
        let x1 = sharp(&alpha, y, s)?;
        Ok(DVector::from_vec(x1).map(|c| c * y.norm_sqr()))
    };
    let fr = frames(x)?;
    let h = 1e-3 * x.norm();
    let mut out = DMatrix::from_element(n - 1, n - 1, ZERO);
    for (b, e) in fr.h_frame.iter().enumerate() {
        let re = real_vector(e);
        let ie: Vec<Complex64> = e.iter().map(|c| c * I).collect();
        let im = real_vector(&ie);
        let de = numdiff::central_richardson(|t| v(&x.shifted(&re, t)), h)?;
        let die = numdiff::central_richardson(|t| v(&x.shifted(&im, t)), h)?;
        let dv: Vec<Complex64> = (0..n).map(|i| (de[i] + I * die[i]) * 0.5).collect();
        for (a, ea) in fr.h_frame.iter().enumerate() {
            out[(a, b)] = (0..n).map(|i| ea[i].conj() * dv[i]).sum();
        }
    }
    Ok(out)
}

/// Recipe form of the generator input used by configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amplitude {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

/// Fraction of the bound used when the amplitude is `"auto"`.
pub const AUTO_FRACTION: f64 = 0.5;

impl Amplitude {
    pub fn resolve(&self, fhat: &Formula, m: u32, dim: usize, s: &Settings) -> Result<f64> {
        match self {
            Amplitude::Value(v) => Ok(*v),
            Amplitude::Auto(_) => {
                let b = max_amplitude(fhat, m, dim, s)?;
                Ok(if b.is_finite() { AUTO_FRACTION * b } else { 1.0 })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acs::mat_vec;

    fn pt(v: &[(f64, f64)]) -> ComplexPoint {
        ComplexPoint::new(v.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap()
    }

    #[test]
    fn dbar_b_annihilates_holomorphic_and_constants() {
        let s = Settings::default();
        let x = pt(&[(0.2, 0.1), (0.4, -0.2)]);
        let hol = |y: &ComplexPoint| Ok(y.coords()[0] / y.coords()[1]);
        let one = |_: &ComplexPoint| Ok(Complex64::new(1.0, 0.0));
        assert!(dbar_b(&hol, &x, &s).unwrap()[0].norm() < 1e-8);
        assert!(dbar_b(&one, &x, &s).unwrap()[0].norm() == 0.0);
    }

    #[test]
    fn dbar_b_of_conjugate_affine_coordinate() {
        let s = Settings::default();
        let x = pt(&[(0.2, 0.1), (0.4, -0.2)]);
        let f = frames(&x).unwrap();
        let z = x.coords();
        // Ebar(wbar) = sum_j conj(e_j) dwbar/dzbar_j.
        let e = &f.h_frame[0];
        let expected = e[0].conj() / z[1].conj() - e[1].conj() * z[0].conj() / (z[1].conj() * z[1].conj());
        let wbar = |y: &ComplexPoint| Ok((y.coords()[0] / y.coords()[1]).conj());
        let got = dbar_b(&wbar, &x, &s).unwrap()[0];
        assert!(expected.norm() > 0.1);
        assert!((got - expected).norm() < 1e-8);
    }

    #[test]
    fn sharp_is_the_frame_dual() {
        let s = Settings::default();
        let x = pt(&[(0.3, 0.0), (0.1, 0.5)]);
        let f = frames(&x).unwrap();
        let alpha = [Complex64::new(0.7, -0.2)];
        let v = sharp(&alpha, &x, &s).unwrap();
        for i in 0..2 {
            assert!((v[i] - alpha[0] * f.h_frame[0][i]).norm() < 1e-12);
        }
        let v2 = sharp(&[alpha[0] * 2.0], &x, &s).unwrap();
        assert!((v2[0] - v[0] * 2.0).norm() < 1e-12);
        assert!(sharp(&[ZERO], &x, &s).unwrap().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn closed_form_matches_direct_composition() {
        let s = Settings::default();
        let fhat = Formula::parse("abs2(w)", VarFamily::Affine(1)).unwrap();
        let unit = unit_tensor(3, &fhat, 2);
        for x in [pt(&[(0.2, 0.1), (0.4, -0.2)]), pt(&[(-0.5, 0.2), (0.3, 0.3)])] {
            let a = unit.frame_matrix(&x).unwrap()[(0, 0)];
            let b = compose_direct(&fhat, 3, &x, &s).unwrap()[(0, 0)];
            assert!((a - b).norm() < 1e-6 * (1.0 + a.norm()), "{a} vs {b}");
        }
    }

    #[test]
    fn ambient_hessian_is_symmetric_and_kills_zbar() {
        let fhat = Formula::parse("abs2(w1) + w2*conj(w1)^2", VarFamily::Affine(2)).unwrap();
        let d = AntiDerivatives::new(&fhat);
        let x = pt(&[(0.2, 0.1), (0.1, -0.3), (0.4, 0.2)]);
        let h = ambient_hessian(3, &fhat, &d, &x).unwrap();
        assert!((&h - h.transpose()).iter().all(|c| c.norm() < 1e-14));
        let zbar: Vec<Complex64> = x.coords().iter().map(|c| c.conj()).collect();
        assert!(mat_vec(&h, &zbar).iter().all(|c| c.norm() < 1e-13));
    }

    #[test]
    fn holomorphic_fhat_is_flagged() {
        let s = Settings::default();
        let input = GeneratorInput::new(3, "w", 0.5, 2).unwrap();
        let out = build_phi_leading(&input, &s).unwrap();
        assert!(out.vanishing && out.phi.is_zero());
    }
}
