//! Deformation tensors and the almost complex structures they induce.
//!
//! A deformation tensor is stored through its frame matrix
//! `Phi_ab = e_a^* M conj(e_b)` in the frame of [`frames`], where the ambient
//! matrix `M` maps the dzbar-coefficients of a (0,1)-vector of the normal
//! distribution to the dz-coefficients of its image. Conversely
//! `M = E Phi E^T` for the frame matrix `E`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    antiholomorphic_vector, complex_vector, ddc_matrix, form_eval, frames, holomorphic_vector, real_vector,
    standard_structure, ComplexPoint, FrameSplitting, StandardExhaustion, I, ZERO,
};
use crate::numdiff;
use crate::settings::Settings;

// ---------------------------------------------------------------------------
// Structure fields

/// Field of real 2n x 2n matrices squaring to -Id.
pub trait AcsField: Send + Sync {
    fn dim(&self) -> usize;

    fn matrix(&self, x: &ComplexPoint) -> Result<DMatrix<f64>>;

    /// True when the matrix does not depend on the point.
    fn is_constant(&self) -> bool {
        false
    }

    /// Directional derivative `D_dir J` at `x`.
    fn derivative(&self, x: &ComplexPoint, dir: &DVector<f64>, s: &Settings) -> Result<DMatrix<f64>> {
        if self.is_constant() {
            return Ok(DMatrix::zeros(2 * self.dim(), 2 * self.dim()));
        }
        numdiff::central_richardson(|t| self.matrix(&x.shifted(dir, t)), s.acs_step)
    }

    /// Claimed smoothness class at the origin, when known.
    fn claimed_class_at_origin(&self) -> Option<u32> {
        None
    }
}

/// The standard structure J_o.
#[derive(Clone, Debug)]
pub struct StandardStructure {
    n: usize,
    j: DMatrix<f64>,
}

impl StandardStructure {
    pub fn new(n: usize) -> Self {
        StandardStructure { n, j: standard_structure(n) }
    }
}

impl AcsField for StandardStructure {
    fn dim(&self) -> usize {
        self.n
    }
    fn matrix(&self, _x: &ComplexPoint) -> Result<DMatrix<f64>> {
        Ok(self.j.clone())
    }
    fn is_constant(&self) -> bool {
        true
    }
}

/// Structure whose normal (-i)-eigenspace is the graph of a deformation tensor.
#[derive(Clone)]
pub struct DeformedStructure {
    pub phi: DeformationTensor,
    pub class_at_origin: Option<u32>,
}

impl DeformedStructure {
    pub fn new(phi: DeformationTensor) -> Self {
        DeformedStructure { phi, class_at_origin: None }
    }
}

impl AcsField for DeformedStructure {
    fn dim(&self) -> usize {
        self.phi.dim()
    }
    fn matrix(&self, x: &ComplexPoint) -> Result<DMatrix<f64>> {
        j_from_phi(&self.phi, x)
    }
    fn is_constant(&self) -> bool {
        self.phi.is_zero()
    }
    fn claimed_class_at_origin(&self) -> Option<u32> {
        self.class_at_origin
    }
}

/// Blocks `(J11, J12)` of the R-linear map `v -> J11 v + J12 conj(v)` on C^n
/// represented by a real matrix.
pub fn complexify(r: &DMatrix<f64>) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let n = r.nrows() / 2;
    let mut j11 = DMatrix::from_element(n, n, ZERO);
    let mut j12 = DMatrix::from_element(n, n, ZERO);
    for k in 0..n {
        let le = complex_vector(&r.column(2 * k).into_owned());
        let li = complex_vector(&r.column(2 * k + 1).into_owned());
        for i in 0..n {
            j11[(i, k)] = (le[i] - I * li[i]) * 0.5;
            j12[(i, k)] = (le[i] + I * li[i]) * 0.5;
        }
    }
    (j11, j12)
}

/// Inverse of [`complexify`].
pub fn realify(j11: &DMatrix<Complex64>, j12: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = j11.nrows();
    let mut r = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for k in 0..n {
            let a = j11[(i, k)] + j12[(i, k)];
            let b = (j11[(i, k)] - j12[(i, k)]) * I;
            r[(2 * i, 2 * k)] = a.re;
            r[(2 * i + 1, 2 * k)] = a.im;
            r[(2 * i, 2 * k + 1)] = b.re;
            r[(2 * i + 1, 2 * k + 1)] = b.im;
        }
    }
    r
}

/// Complex-linear extension of a real structure matrix acting on
/// `(dz-coefficients, dzbar-coefficients)`.
pub fn complexified_action(r: &DMatrix<f64>) -> DMatrix<Complex64> {
    let (j11, j12) = complexify(r);
    let n = j11.nrows();
    let mut m = DMatrix::from_element(2 * n, 2 * n, ZERO);
    m.view_mut((0, 0), (n, n)).copy_from(&j11);
    m.view_mut((0, n), (n, n)).copy_from(&j12);
    m.view_mut((n, 0), (n, n)).copy_from(&j12.map(|v| v.conj()));
    m.view_mut((n, n), (n, n)).copy_from(&j11.map(|v| v.conj()));
    m
}

// ---------------------------------------------------------------------------
// Deformation tensors

type FrameFn = dyn Fn(&ComplexPoint) -> Result<DMatrix<Complex64>> + Send + Sync;

#[derive(Clone)]
enum Repr {
    Zero,
    ClosedForm(Arc<FrameFn>),
    Sampled(Arc<SampledDeformation>),
}

/// A deformation tensor on the punctured ball.
#[derive(Clone)]
pub struct DeformationTensor {
    n: usize,
    repr: Repr,
}

impl std::fmt::Debug for DeformationTensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.repr {
            Repr::Zero => "zero",
            Repr::ClosedForm(_) => "closed-form",
            Repr::Sampled(_) => "sampled",
        };
        write!(f, "DeformationTensor {{ n: {}, kind: {kind} }}", self.n)
    }
}

impl DeformationTensor {
    pub fn zero(n: usize) -> Self {
        DeformationTensor { n, repr: Repr::Zero }
    }

    /// Tensor given by its frame matrix as a function of the point.
    pub fn closed_form<F>(n: usize, f: F) -> Self
    where
        F: Fn(&ComplexPoint) -> Result<DMatrix<Complex64>> + Send + Sync + 'static,
    {
        DeformationTensor { n, repr: Repr::ClosedForm(Arc::new(f)) }
    }

    pub fn sampled(s: SampledDeformation) -> Self {
        DeformationTensor { n: s.dimension, repr: Repr::Sampled(Arc::new(s)) }
    }

    /// Scalar (n = 2) tensor `sum_k c_k zeta^k`, with `zeta` the fiber
    /// coordinate in the frame chart.
    pub fn fiber_polynomial(coeffs: Vec<(u32, Complex64)>) -> Self {
        Self::closed_form(2, move |x| {
            let f = frames(x)?;
            let zeta = crate::geometry::fiber_coordinate(x, f.chart)?;
            let v = coeffs.iter().fold(ZERO, |acc, &(k, c)| acc + c * zeta.powu(k));
            Ok(DMatrix::from_element(1, 1, v))
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero)
    }

    pub fn as_sampled(&self) -> Option<&SampledDeformation> {
        match &self.repr {
            Repr::Sampled(s) => Some(s),
            _ => None,
        }
    }

    /// Frame matrix at `x != 0`.
    pub fn frame_matrix(&self, x: &ComplexPoint) -> Result<DMatrix<Complex64>> {
        if x.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.dim() });
        }
        if x.is_origin() {
            return Err(Error::AtOrigin);
        }
        let m = match &self.repr {
            Repr::Zero => DMatrix::from_element(self.n - 1, self.n - 1, ZERO),
            Repr::ClosedForm(f) => f(x)?,
            Repr::Sampled(s) => s.interpolate(x)?,
        };
        if m.nrows() != self.n - 1 || m.ncols() != self.n - 1 {
            return Err(Error::DimensionMismatch { expected: self.n - 1, got: m.nrows() });
        }
        if m.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NumericDomain("deformation tensor is not finite".into()));
        }
        Ok(m)
    }

    /// Frame, frame matrix and ambient matrix at `x`.
    pub fn ambient(&self, x: &ComplexPoint) -> Result<(FrameSplitting, DMatrix<Complex64>, DMatrix<Complex64>)> {
        let phi = self.frame_matrix(x)?;
        let f = frames(x)?;
        let e = f.matrix();
        let m = &e * &phi * e.transpose();
        Ok((f, phi, m))
    }
}

/// Operator norm (largest singular value) of a complex matrix.
pub fn operator_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    m.clone().svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max)
}

/// Structure matrix induced by a deformation tensor at `x`.
///
/// The (+i)-eigenspace is spanned by the radial (1,0)-vector and the vectors
/// `E_b + conj(phi(Ebar_b))`; the (-i)-eigenspace by their conjugates. At the
/// origin the standard structure is returned.
pub fn j_from_phi(phi: &DeformationTensor, x: &ComplexPoint) -> Result<DMatrix<f64>> {
    let n = phi.dim();
    if x.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.dim() });
    }
    if x.is_origin() || phi.is_zero() {
        return Ok(standard_structure(n));
    }
    let (f, frame_phi, m) = phi.ambient(x)?;
    let margin = 1.0 - operator_norm(&frame_phi).powi(2);
    if margin <= 0.0 {
        return Err(Error::DegenerateStructure(margin));
    }
    let mbar = m.map(|v| v.conj());
    let mut p = DMatrix::from_element(2 * n, 2 * n, ZERO);
    for i in 0..n {
        p[(i, 0)] = f.radial[i];
        p[(n + i, n)] = f.radial[i].conj();
    }
    for (b, e) in f.h_frame.iter().enumerate() {
        let ev = DVector::from_column_slice(e);
        let ebar = ev.map(|v| v.conj());
        let up = &mbar * &ev;
        let down = &m * &ebar;
        for i in 0..n {
            p[(i, b + 1)] = ev[i];
            p[(n + i, b + 1)] = up[i];
            p[(i, n + b + 1)] = down[i];
            p[(n + i, n + b + 1)] = ebar[i];
        }
    }
    let pinv = p
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NumericDomain("eigenbasis of the deformed structure is singular".into()))?;
    let mut d = DMatrix::from_element(2 * n, 2 * n, ZERO);
    for k in 0..n {
        d[(k, k)] = I;
        d[(n + k, n + k)] = -I;
    }
    let jc = &p * d * pinv;
    let j11 = jc.view((0, 0), (n, n)).into_owned();
    let j12 = jc.view((0, n), (n, n)).into_owned();
    Ok(realify(&j11, &j12))
}

/// Nijenhuis tensor `N(X, Y) = [X, Y] - [JX, JY] + J[JX, Y] + J[X, JY]` for
/// constant-coefficient X, Y. Results with norm below the configured floor
/// are returned as exact zeros.
pub fn nijenhuis(
    j: &dyn AcsField,
    x: &ComplexPoint,
    xv: &DVector<f64>,
    yv: &DVector<f64>,
    s: &Settings,
) -> Result<DVector<f64>> {
    let n2 = 2 * j.dim();
    if xv.len() != n2 || yv.len() != n2 {
        return Err(Error::DimensionMismatch { expected: n2, got: xv.len().min(yv.len()) });
    }
    if j.is_constant() {
        return Ok(DVector::zeros(n2));
    }
    let jm = j.matrix(x)?;
    let jx = &jm * xv;
    let jy = &jm * yv;
    let d = |dir: &DVector<f64>| j.derivative(x, dir, s);
    let out = -(d(&jx)? * yv) + d(&jy)? * xv - &jm * (d(yv)? * xv) + &jm * (d(xv)? * yv);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericDomain("Nijenhuis tensor is not finite".into()));
    }
    if out.norm() < s.nijenhuis_floor {
        return Ok(DVector::zeros(n2));
    }
    Ok(out)
}

fn standard_form(n: usize, x: &ComplexPoint, s: &Settings) -> Result<DMatrix<f64>> {
    ddc_matrix(&StandardExhaustion { n }, &StandardStructure::new(n), x, s)
}

/// Largest violation of `ddc tau_o(phi X, Y) + ddc tau_o(X, phi Y) = 0` over
/// frame pairs, with the form normalized so that unit frame vectors pair to 1.
pub fn check_hermitian_constraint(phi: &DeformationTensor, x: &ComplexPoint, s: &Settings) -> Result<f64> {
    let n = phi.dim();
    let (f, _, m) = phi.ambient(x)?;
    let omega = standard_form(n, x, s)?;
    let mut worst: f64 = 0.0;
    for ea in &f.h_frame {
        for eb in &f.h_frame {
            let a_bar: Vec<Complex64> = ea.iter().map(|v| v.conj()).collect();
            let b_bar: Vec<Complex64> = eb.iter().map(|v| v.conj()).collect();
            let phi_a = mat_vec(&m, &a_bar);
            let phi_b = mat_vec(&m, &b_bar);
            let lhs = form_eval(&omega, &holomorphic_vector(&phi_a), &antiholomorphic_vector(&b_bar))
                + form_eval(&omega, &antiholomorphic_vector(&a_bar), &holomorphic_vector(&phi_b));
            worst = worst.max(lhs.norm() / 2.0);
        }
    }
    Ok(worst)
}

/// `min over unit X in H^{0,1} of [ddc tau_o(Xbar, X) - ddc tau_o(phi X, conj(phi X))]`,
/// normalized so that the zero tensor has margin 1.
pub fn check_bound_constraint(phi: &DeformationTensor, x: &ComplexPoint) -> Result<f64> {
    let m = phi.frame_matrix(x)?;
    Ok(1.0 - operator_norm(&m).powi(2))
}

pub(crate) fn mat_vec(m: &DMatrix<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|k| m[(i, k)] * v[k]).sum()).collect()
}

/// Residual of the two-term frame identity
/// `ddc_J tau_o(X + conj(phi(Xbar)), Y + phi(Y)) = ddc_o tau_o(X, Y) + ddc_o tau_o(conj(phi(Xbar)), phi(Y))`
/// for `X` in H^{1,0} (dz-coefficients `a`) and `Y` in H^{0,1}
/// (dzbar-coefficients `b`).
pub fn lemma_identity_residual(
    phi: &DeformationTensor,
    x: &ComplexPoint,
    a: &[Complex64],
    b: &[Complex64],
    s: &Settings,
) -> Result<f64> {
    let n = phi.dim();
    if a.len() != n || b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.len().min(b.len()) });
    }
    let scale = x.norm() * (1.0 + a.iter().chain(b).map(|v| v.norm()).sum::<f64>());
    let along_a: Complex64 = a.iter().zip(x.coords()).map(|(u, z)| u * z.conj()).sum();
    let along_b: Complex64 = b.iter().zip(x.coords()).map(|(u, z)| u * z).sum();
    if along_a.norm() > 1e-10 * scale || along_b.norm() > 1e-10 * scale {
        return Err(Error::Precondition("frame vectors must lie in the normal distribution".into()));
    }
    let (_, _, m) = phi.ambient(x)?;
    let a_bar: Vec<Complex64> = a.iter().map(|v| v.conj()).collect();
    let phi_xbar_conj: Vec<Complex64> = mat_vec(&m, &a_bar).into_iter().map(|v| v.conj()).collect();
    let phi_y = mat_vec(&m, b);

    let omega_o = standard_form(n, x, s)?;
    let omega_j = ddc_matrix(&StandardExhaustion { n }, &DeformedStructure::new(phi.clone()), x, s)?;

    let xj = holomorphic_vector(a) + antiholomorphic_vector(&phi_xbar_conj);
    let yj = antiholomorphic_vector(b) + holomorphic_vector(&phi_y);
    let lhs = form_eval(&omega_j, &xj, &yj);
    let rhs = form_eval(&omega_o, &holomorphic_vector(a), &antiholomorphic_vector(b))
        + form_eval(&omega_o, &antiholomorphic_vector(&phi_xbar_conj), &holomorphic_vector(&phi_y));
    Ok((lhs - rhs).norm())
}

/// Graph residual `|(J + i)(w + phi(w))|` maximized over the frame vectors
/// `w = Ebar_b`.
pub fn graph_residual(phi: &DeformationTensor, x: &ComplexPoint) -> Result<f64> {
    let n = phi.dim();
    let j = j_from_phi(phi, x)?;
    let jc = complexified_action(&j);
    let (f, _, m) = phi.ambient(x)?;
    let mut worst: f64 = 0.0;
    for e in &f.h_frame {
        let ebar: Vec<Complex64> = e.iter().map(|v| v.conj()).collect();
        let up = mat_vec(&m, &ebar);
        let v = DVector::from_iterator(2 * n, up.into_iter().chain(ebar));
        let r = &jc * &v + v.map(|c| c * I);
        worst = worst.max(r.iter().map(|c| c.norm()).fold(0.0, f64::max));
    }
    Ok(worst)
}

/// Frame components of the normal deformation tensor of a structure matrix:
/// for each frame vector `Ebar_b`, the unique `W` in H^{1,0} with
/// `Ebar_b + W` in the (-i)-eigenspace (least squares).
pub fn phi_from_j(j: &DMatrix<f64>, x: &ComplexPoint) -> Result<DMatrix<Complex64>> {
    let n = x.dim();
    let f = frames(x)?;
    let jc = complexified_action(j);
    let mut shifted = jc.clone();
    for k in 0..2 * n {
        shifted[(k, k)] += I;
    }
    // Columns of (J + i) applied to (E_a, 0).
    let mut a = DMatrix::from_element(2 * n, n - 1, ZERO);
    for (c, e) in f.h_frame.iter().enumerate() {
        let v = DVector::from_iterator(2 * n, e.iter().cloned().chain(std::iter::repeat_n(ZERO, n)));
        a.set_column(c, &(&shifted * v));
    }
    let ah = a.adjoint();
    let normal = &ah * &a;
    let inv = normal
        .try_inverse()
        .ok_or_else(|| Error::NumericDomain("normal-form extraction is singular".into()))?;
    let mut out = DMatrix::from_element(n - 1, n - 1, ZERO);
    for (b, e) in f.h_frame.iter().enumerate() {
        let v = DVector::from_iterator(2 * n, std::iter::repeat_n(ZERO, n).chain(e.iter().map(|c| c.conj())));
        let rhs = -(&shifted * v);
        let w = &inv * (&ah * rhs);
        out.set_column(b, &w);
    }
    Ok(out)
}

/// Real tangent vector of the (1,0)-part `v` (i.e. `V + Vbar`).
pub fn real_part_vector(v: &[Complex64]) -> DVector<f64> {
    real_vector(v)
}

// ---------------------------------------------------------------------------
// Sampled representation

pub const SAMPLED_SCHEMA_VERSION: u32 = 1;

/// Frame matrices of a deformation tensor (n = 2) sampled on a grid in polar
/// coordinates of the last chart.
///
/// Values are stored in row-major order over `(shell, re_w, im_w, arg_zeta)`,
/// each as a `[re, im]` pair. Interpolation is trilinear over
/// `(Re w, Im w, arg zeta)` (periodic in the angle) and linear in `|zeta|`
/// between shells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledDeformation {
    pub schema_version: u32,
    pub dimension: usize,
    /// 0-based chart of the affine coordinate `w = z_0 / z_chart`.
    pub chart: usize,
    pub shells: Vec<f64>,
    pub re_w: Vec<f64>,
    pub im_w: Vec<f64>,
    /// Number of uniformly spaced samples of `arg zeta` in `[0, 2 pi)`.
    pub arg_samples: usize,
    pub values: Vec<[f64; 2]>,
}

/// Grid description for sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingPlan {
    pub shells: Vec<f64>,
    pub re_w: Vec<f64>,
    pub im_w: Vec<f64>,
    pub arg_samples: usize,
}

impl SamplingPlan {
    /// Uniform grid: `shells` radii in `[r0, r1]`, a square `[-w_max, w_max]^2`
    /// with `w_count` nodes per axis, `arg_samples` angles.
    pub fn uniform(r0: f64, r1: f64, shells: usize, w_max: f64, w_count: usize, arg_samples: usize) -> Self {
        let lin = |a: f64, b: f64, k: usize| -> Vec<f64> {
            if k == 1 {
                vec![a]
            } else {
                (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
            }
        };
        SamplingPlan {
            shells: lin(r0, r1, shells),
            re_w: lin(-w_max, w_max, w_count),
            im_w: lin(-w_max, w_max, w_count),
            arg_samples,
        }
    }

    fn validate(&self) -> Result<()> {
        let increasing = |v: &[f64]| v.windows(2).all(|p| p[1] > p[0]);
        if self.shells.is_empty() || self.re_w.len() < 2 || self.im_w.len() < 2 || self.arg_samples < 2 {
            return Err(Error::InvalidInput("sampling grid too small".into()));
        }
        if !increasing(&self.shells) || !increasing(&self.re_w) || !increasing(&self.im_w) {
            return Err(Error::InvalidInput("grid axes must be strictly increasing".into()));
        }
        if self.shells[0] <= 0.0 || *self.shells.last().unwrap() >= 1.0 {
            return Err(Error::InvalidInput("shells must lie in (0, 1)".into()));
        }
        let corner = self.re_w[0].abs().max(*self.re_w.last().unwrap()).hypot(self.im_w[0].abs().max(*self.im_w.last().unwrap()));
        if corner >= 1.0 {
            return Err(Error::InvalidInput("affine grid must stay inside |w| < 1".into()));
        }
        Ok(())
    }

    /// Point of the ball at the given grid indices.
    pub fn point(&self, shell: usize, i: usize, j: usize, k: usize) -> ComplexPoint {
        let w = Complex64::new(self.re_w[i], self.im_w[j]);
        let theta = std::f64::consts::TAU * k as f64 / self.arg_samples as f64;
        let zeta = Complex64::from_polar(self.shells[shell], theta);
        let mu = (1.0 + w.norm_sqr()).powf(-0.5);
        ComplexPoint::from_vec_unchecked(vec![w * zeta * mu, zeta * mu])
    }
}

impl SampledDeformation {
    /// Sample a tensor (n = 2) on a plan.
    pub fn from_tensor(phi: &DeformationTensor, plan: &SamplingPlan) -> Result<Self> {
        Self::from_fn(plan, |x| Ok(phi.frame_matrix(x)?[(0, 0)]))
    }

    /// Sample an arbitrary scalar frame-component function on a plan.
    pub fn from_fn(plan: &SamplingPlan, f: impl Fn(&ComplexPoint) -> Result<Complex64> + Sync) -> Result<Self> {
        use rayon::prelude::*;
        plan.validate()?;
        let (ns, ni, nj, nk) = (plan.shells.len(), plan.re_w.len(), plan.im_w.len(), plan.arg_samples);
        let values = (0..ns * ni * nj * nk)
            .into_par_iter()
            .map(|idx| {
                let k = idx % nk;
                let j = (idx / nk) % nj;
                let i = (idx / (nk * nj)) % ni;
                let sh = idx / (nk * nj * ni);
                let v = f(&plan.point(sh, i, j, k))?;
                Ok([v.re, v.im])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SampledDeformation {
            schema_version: SAMPLED_SCHEMA_VERSION,
            dimension: 2,
            chart: 1,
            shells: plan.shells.clone(),
            re_w: plan.re_w.clone(),
            im_w: plan.im_w.clone(),
            arg_samples: plan.arg_samples,
            values,
        })
    }

    pub fn plan(&self) -> SamplingPlan {
        SamplingPlan {
            shells: self.shells.clone(),
            re_w: self.re_w.clone(),
            im_w: self.im_w.clone(),
            arg_samples: self.arg_samples,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SAMPLED_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!("unsupported schema version {}", self.schema_version)));
        }
        if self.dimension != 2 || self.chart != 1 {
            return Err(Error::InvalidInput("sampled tensors are supported for n = 2, chart 1 only".into()));
        }
        self.plan().validate()?;
        let expected = self.shells.len() * self.re_w.len() * self.im_w.len() * self.arg_samples;
        if self.values.len() != expected {
            return Err(Error::InvalidInput(format!("expected {expected} values, found {}", self.values.len())));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: SampledDeformation = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    /// Largest sampled modulus.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max)
    }

    fn at(&self, sh: usize, i: usize, j: usize, k: usize) -> Complex64 {
        let (ni, nj, nk) = (self.re_w.len(), self.im_w.len(), self.arg_samples);
        let v = self.values[((sh * ni + i) * nj + j) * nk + k];
        Complex64::new(v[0], v[1])
    }

    fn interpolate(&self, x: &ComplexPoint) -> Result<DMatrix<Complex64>> {
        let z = x.coords();
        if z[1] == ZERO {
            return Err(Error::ChartDomain { chart: 1 });
        }
        let w = z[0] / z[1];
        let r = x.norm();
        let mut arg = z[1].arg();
        if arg < 0.0 {
            arg += std::f64::consts::TAU;
        }
        let locate = |axis: &[f64], v: f64| -> Result<(usize, f64)> {
            let last = axis.len() - 1;
            let tol = 1e-12 * (1.0 + v.abs());
            if v < axis[0] - tol || v > axis[last] + tol {
                return Err(Error::InvalidInput(format!("point outside the sampled region (value {v})")));
            }
            let mut lo = 0;
            while lo + 1 < last && axis[lo + 1] <= v {
                lo += 1;
            }
            let t = ((v - axis[lo]) / (axis[lo + 1] - axis[lo])).clamp(0.0, 1.0);
            Ok((lo, t))
        };
        let (i0, ti) = locate(&self.re_w, w.re)?;
        let (j0, tj) = locate(&self.im_w, w.im)?;
        let nk = self.arg_samples;
        let pos = arg / std::f64::consts::TAU * nk as f64;
        let k0 = (pos.floor() as usize) % nk;
        let tk = pos - pos.floor();
        let k1 = (k0 + 1) % nk;
        let shell_value = |sh: usize| {
            let mut acc = ZERO;
            for (di, wi) in [(0, 1.0 - ti), (1, ti)] {
                for (dj, wj) in [(0, 1.0 - tj), (1, tj)] {
                    for (kk, wk) in [(k0, 1.0 - tk), (k1, tk)] {
                        let wgt = wi * wj * wk;
                        if wgt != 0.0 {
                            acc += self.at(sh, i0 + di, j0 + dj, kk) * wgt;
                        }
                    }
                }
            }
            acc
        };
        let v = if self.shells.len() == 1 {
            if (r - self.shells[0]).abs() > 1e-12 {
                return Err(Error::InvalidInput("point outside the sampled shell".into()));
            }
            shell_value(0)
        } else {
            let (s0, ts) = locate(&self.shells, r)?;
            shell_value(s0) * (1.0 - ts) + shell_value(s0 + 1) * ts
        };
        Ok(DMatrix::from_element(1, 1, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ONE;

    fn pt(v: &[(f64, f64)]) -> ComplexPoint {
        ComplexPoint::new(v.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap()
    }

    #[test]
    fn complexify_roundtrip() {
        let j = standard_structure(3);
        let (a, b) = complexify(&j);
        assert!((realify(&a, &b) - &j).amax() < 1e-15);
        assert!((a[(1, 1)] - I).norm() < 1e-15);
        assert!(b.iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn constant_scalar_tensor_eigenvectors() {
        let c = Complex64::new(0.1, -0.05);
        let phi = DeformationTensor::closed_form(2, move |_| Ok(DMatrix::from_element(1, 1, c)));
        let x = pt(&[(0.5, 0.0), (0.0, 0.0)]);
        let j = j_from_phi(&phi, &x).unwrap();
        assert!((&j * &j + DMatrix::identity(4, 4)).amax() < 1e-12);
        let jc = complexified_action(&j);
        // Ebar + c E with E = (0, 1): dz-part (0, c), dzbar-part (0, 1).
        let v = DVector::from_vec(vec![ZERO, c, ZERO, ONE]);
        assert!((&jc * &v + v.map(|z| z * I)).iter().all(|z| z.norm() < 1e-12));
        // Radial (0,1)-direction.
        let r = DVector::from_vec(vec![ZERO, ZERO, ONE, ZERO]);
        assert!((&jc * &r + r.map(|z| z * I)).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn origin_returns_standard_structure() {
        let phi = DeformationTensor::closed_form(2, |_| Err(Error::NumericDomain("never evaluated".into())));
        let j = j_from_phi(&phi, &ComplexPoint::origin(2)).unwrap();
        assert_eq!(j, standard_structure(2));
    }

    #[test]
    fn hermitian_constraint_examples_in_three_dimensions() {
        let s = Settings::default();
        let x = pt(&[(0.2, 0.1), (-0.1, 0.3), (0.25, -0.05)]);
        let g = Complex64::new(0.03, 0.04);
        let sym = DeformationTensor::closed_form(3, move |_| {
            Ok(DMatrix::from_row_slice(2, 2, &[ZERO, g, g, ZERO]))
        });
        assert!(check_hermitian_constraint(&sym, &x, &s).unwrap() < 1e-14);
        let anti = DeformationTensor::closed_form(3, move |_| {
            Ok(DMatrix::from_row_slice(2, 2, &[ZERO, g, -g, ZERO]))
        });
        let r = check_hermitian_constraint(&anti, &x, &s).unwrap();
        assert!((r - 2.0 * g.norm()).abs() < 1e-12, "{r}");
    }

    #[test]
    fn bound_constraint_examples() {
        let x = pt(&[(0.3, 0.0), (0.1, 0.2)]);
        let mk = |v: f64| DeformationTensor::closed_form(2, move |_| Ok(DMatrix::from_element(1, 1, Complex64::new(0.0, v))));
        assert!((check_bound_constraint(&DeformationTensor::zero(2), &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((check_bound_constraint(&mk(0.5), &x).unwrap() - 0.75).abs() < 1e-15);
        assert!((check_bound_constraint(&mk(1.2), &x).unwrap() + 0.44).abs() < 1e-12);
        assert!(matches!(j_from_phi(&mk(1.2), &x), Err(Error::DegenerateStructure(_))));
    }

    #[test]
    fn phi_from_j_inverts_j_from_phi() {
        let phi = DeformationTensor::fiber_polynomial(vec![(2, Complex64::new(0.3, 0.2))]);
        let x = pt(&[(0.2, 0.3), (0.4, -0.1)]);
        let j = j_from_phi(&phi, &x).unwrap();
        let back = phi_from_j(&j, &x).unwrap();
        assert!((back[(0, 0)] - phi.frame_matrix(&x).unwrap()[(0, 0)]).norm() < 1e-12);
    }
}
