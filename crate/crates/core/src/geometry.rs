//! Points, polar charts, frames and the dd^c operator.
//!
//! Real coordinates are interleaved: `(x1, y1, x2, y2, ...)` with
//! `z_k = x_k + i y_k`. Chart indices are 0-based: chart `c` is the chart on
//! which `z_c != 0`, with affine coordinates `w^a = z_a / z_c` (a != c, in
//! increasing order) and fiber coordinate `zeta = |z| z_c / |z_c|`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::acs::AcsField;
use crate::error::{check_finite, Error, Result};
use crate::numdiff;
use crate::settings::Settings;

pub(crate) const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
pub(crate) const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// A point of C^n in standard coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexPoint {
    coords: Vec<Complex64>,
}

impl ComplexPoint {
    pub fn new(coords: Vec<Complex64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidInput(format!("dimension must be >= 2, got {}", coords.len())));
        }
        if coords.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        Ok(ComplexPoint { coords })
    }

    /// Like `new`, additionally requiring `|z| < 1`.
    pub fn ball(coords: Vec<Complex64>) -> Result<Self> {
        let p = Self::new(coords)?;
        let r = p.norm();
        if r >= 1.0 {
            return Err(Error::OutsideBall(r));
        }
        Ok(p)
    }

    pub fn origin(n: usize) -> Self {
        ComplexPoint { coords: vec![ZERO; n.max(2)] }
    }

    pub fn from_real(x: &[f64]) -> Result<Self> {
        if !x.len().is_multiple_of(2) {
            return Err(Error::InvalidInput("odd number of real coordinates".into()));
        }
        Self::new(x.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect())
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<Complex64>) -> Self {
        ComplexPoint { coords }
    }

    pub fn to_real(&self) -> DVector<f64> {
        real_vector(&self.coords)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coords.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_origin(&self) -> bool {
        self.coords.iter().all(|c| *c == ZERO)
    }

    /// `self + t * dir`, where `dir` is a real tangent vector.
    pub fn shifted(&self, dir: &DVector<f64>, t: f64) -> ComplexPoint {
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(k, c)| c + Complex64::new(t * dir[2 * k], t * dir[2 * k + 1]))
            .collect();
        ComplexPoint { coords }
    }

    /// `self + t * v` for a complex direction `v`.
    pub fn shifted_complex(&self, v: &[Complex64], t: Complex64) -> ComplexPoint {
        ComplexPoint { coords: self.coords.iter().zip(v).map(|(c, d)| c + t * d).collect() }
    }

    pub fn scaled(&self, t: Complex64) -> ComplexPoint {
        ComplexPoint { coords: self.coords.iter().map(|c| c * t).collect() }
    }
}

/// Real tangent vector that moves `z` in the complex direction `v`.
pub fn real_vector(v: &[Complex64]) -> DVector<f64> {
    DVector::from_iterator(2 * v.len(), v.iter().flat_map(|c| [c.re, c.im]))
}

/// Inverse of [`real_vector`].
pub fn complex_vector(x: &DVector<f64>) -> Vec<Complex64> {
    x.as_slice().chunks(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

/// Complexified real-basis components of the (1,0)-vector `sum v_k d/dz_k`.
pub fn holomorphic_vector(v: &[Complex64]) -> DVector<Complex64> {
    DVector::from_iterator(2 * v.len(), v.iter().flat_map(|c| [c * 0.5, -I * c * 0.5]))
}

/// Complexified real-basis components of the (0,1)-vector `sum u_k d/dzbar_k`.
pub fn antiholomorphic_vector(u: &[Complex64]) -> DVector<Complex64> {
    DVector::from_iterator(2 * u.len(), u.iter().flat_map(|c| [c * 0.5, I * c * 0.5]))
}

/// The standard structure J_o as a real 2n x 2n matrix.
pub fn standard_structure(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(2 * k + 1, 2 * k)] = 1.0;
        j[(2 * k, 2 * k + 1)] = -1.0;
    }
    j
}

/// `tau_o(z) = |z|^2`.
pub fn tau_standard(z: &ComplexPoint) -> f64 {
    z.norm_sqr()
}

// ---------------------------------------------------------------------------
// Polar charts

/// Blow-up polar coordinates `([w], zeta)` in chart `chart` (0-based).
#[derive(Clone, Debug, PartialEq)]
pub struct PolarPoint {
    pub chart: usize,
    pub affine: Vec<Complex64>,
    pub fiber: Complex64,
}

impl PolarPoint {
    pub fn dim(&self) -> usize {
        self.affine.len() + 1
    }

    /// `mu_w = (1 + |w|^2)^(-1/2)`
    pub fn mu(&self) -> f64 {
        (1.0 + self.affine.iter().map(|w| w.norm_sqr()).sum::<f64>()).powf(-0.5)
    }

    /// Argument of the fiber coordinate in `[0, 2 pi)`.
    pub fn fiber_arg(&self) -> f64 {
        let a = self.fiber.arg();
        if a < 0.0 {
            a + std::f64::consts::TAU
        } else {
            a
        }
    }

    /// Indices of the coordinates that carry affine variables, in order.
    pub fn others(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&k| k != self.chart).collect()
    }
}

/// Fiber coordinate of `x` in chart `chart`.
pub fn fiber_coordinate(x: &ComplexPoint, chart: usize) -> Result<Complex64> {
    let zc = *x.coords().get(chart).ok_or(Error::DimensionMismatch { expected: x.dim(), got: chart + 1 })?;
    if zc == ZERO {
        return Err(Error::ChartDomain { chart });
    }
    Ok(zc / zc.norm() * x.norm())
}

pub fn to_polar(z: &ComplexPoint, chart: usize, s: &Settings) -> Result<PolarPoint> {
    let n = z.dim();
    if chart >= n {
        return Err(Error::DimensionMismatch { expected: n, got: chart + 1 });
    }
    let zc = z.coords()[chart];
    if zc == ZERO {
        return Err(Error::ChartDomain { chart });
    }
    let r = z.norm();
    if r < s.fiber_min {
        return Err(Error::SingularFiber(r));
    }
    let affine = (0..n).filter(|&k| k != chart).map(|k| z.coords()[k] / zc).collect();
    Ok(PolarPoint { chart, affine, fiber: zc / zc.norm() * r })
}

pub fn from_polar(p: &PolarPoint, s: &Settings) -> Result<ComplexPoint> {
    let r = p.fiber.norm();
    if r >= 1.0 {
        return Err(Error::OutsideBall(r));
    }
    if r < s.fiber_min {
        return Err(Error::SingularFiber(r));
    }
    let n = p.dim();
    let mu = p.mu();
    let mut coords = vec![ZERO; n];
    coords[p.chart] = p.fiber * mu;
    for (a, k) in p.others().into_iter().enumerate() {
        coords[k] = p.affine[a] * p.fiber * mu;
    }
    ComplexPoint::new(coords)
}

/// Complexified Jacobians of the polar chart.
///
/// `z_from_w` has rows `(z_1..z_n, zbar_1..zbar_n)` and columns
/// `(w^1..w^{n-1}, zeta, wbar^1..wbar^{n-1}, zetabar)`; `w_from_z` is the
/// reverse map with the roles of rows and columns exchanged. Both are
/// assembled from closed-form derivatives.
#[derive(Clone, Debug)]
pub struct PolarJacobian {
    pub z_from_w: DMatrix<Complex64>,
    pub w_from_z: DMatrix<Complex64>,
}

pub fn polar_jacobian(p: &PolarPoint, s: &Settings) -> Result<PolarJacobian> {
    let zeta = p.fiber;
    if zeta.norm() < s.fiber_min {
        return Err(Error::SingularFiber(zeta.norm()));
    }
    let n = p.dim();
    let c = p.chart;
    let others = p.others();
    let mu = p.mu();
    let mu3 = mu * mu * mu;
    let w = &p.affine;

    // Holomorphic and antiholomorphic n x n blocks of dz / d(w, zeta).
    let mut zw = DMatrix::from_element(n, n, ZERO);
    let mut zwb = DMatrix::from_element(n, n, ZERO);
    for (a, &row) in others.iter().enumerate() {
        for b in 0..n - 1 {
            let delta = if a == b { ONE } else { ZERO };
            zw[(row, b)] = delta * mu * zeta - w[b].conj() * w[a] * zeta * (0.5 * mu3);
            zwb[(row, b)] = -(w[b] * w[a] * zeta) * (0.5 * mu3);
        }
        zw[(row, n - 1)] = w[a] * mu;
    }
    for b in 0..n - 1 {
        zw[(c, b)] = -(w[b].conj() * zeta) * (0.5 * mu3);
        zwb[(c, b)] = -(w[b] * zeta) * (0.5 * mu3);
    }
    zw[(c, n - 1)] = Complex64::new(mu, 0.0);

    // Blocks of d(w, zeta) / dz.
    let z = from_polar_unchecked(p);
    let zc = z[c];
    let rs = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let u = zc / zc.norm();
    let mut wz = DMatrix::from_element(n, n, ZERO);
    let mut wzb = DMatrix::from_element(n, n, ZERO);
    for (a, &k) in others.iter().enumerate() {
        wz[(a, k)] = ONE / zc;
        wz[(a, c)] = -z[k] / (zc * zc);
    }
    for j in 0..n {
        wz[(n - 1, j)] = u * z[j].conj() / (2.0 * rs);
        wzb[(n - 1, j)] = u * z[j] / (2.0 * rs);
    }
    wz[(n - 1, c)] += u * rs / (2.0 * zc);
    wzb[(n - 1, c)] -= u * rs / (2.0 * zc.conj());

    Ok(PolarJacobian { z_from_w: assemble(&zw, &zwb), w_from_z: assemble(&wz, &wzb) })
}

fn from_polar_unchecked(p: &PolarPoint) -> Vec<Complex64> {
    let mu = p.mu();
    let mut coords = vec![ZERO; p.dim()];
    coords[p.chart] = p.fiber * mu;
    for (a, k) in p.others().into_iter().enumerate() {
        coords[k] = p.affine[a] * p.fiber * mu;
    }
    coords
}

fn assemble(hol: &DMatrix<Complex64>, anti: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = hol.nrows();
    let mut m = DMatrix::from_element(2 * n, 2 * n, ZERO);
    m.view_mut((0, 0), (n, n)).copy_from(hol);
    m.view_mut((0, n), (n, n)).copy_from(anti);
    m.view_mut((n, 0), (n, n)).copy_from(&anti.map(|v| v.conj()));
    m.view_mut((n, n), (n, n)).copy_from(&hol.map(|v| v.conj()));
    m
}

// ---------------------------------------------------------------------------
// Frames

/// Radial line and an orthonormal frame of the normal distribution at `x`.
///
/// The chart is the first coordinate of largest modulus. The normal frame is
/// the Gram-Schmidt orthonormalization of the projections of `d/dz_a`
/// (a != chart) onto the complement of `span{x, ix}`, multiplied by the unit
/// phase `z_c / |z_c|` of the chart coordinate. The phase makes the frame
/// rotate with the fiber circle, so that a fiber-homogeneous tensor of degree
/// k shows up as the k-th Fourier mode of its frame components.
#[derive(Clone, Debug)]
pub struct FrameSplitting {
    pub base: ComplexPoint,
    pub chart: usize,
    pub radial: Vec<Complex64>,
    pub h_frame: Vec<Vec<Complex64>>,
}

impl FrameSplitting {
    /// Frame vectors as the columns of an n x (n-1) matrix.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        let n = self.base.dim();
        DMatrix::from_fn(n, n - 1, |i, a| self.h_frame[a][i])
    }
}

pub fn frames(x: &ComplexPoint) -> Result<FrameSplitting> {
    if x.is_origin() {
        return Err(Error::AtOrigin);
    }
    let n = x.dim();
    let r = x.norm();
    let xhat: Vec<Complex64> = x.coords().iter().map(|c| c / r).collect();
    let mut chart = 0;
    for k in 1..n {
        if x.coords()[k].norm() > x.coords()[chart].norm() {
            chart = k;
        }
    }
    let phase = x.coords()[chart] / x.coords()[chart].norm();
    let mut frame: Vec<Vec<Complex64>> = Vec::with_capacity(n - 1);
    for a in (0..n).filter(|&k| k != chart) {
        // e_a - xhat <xhat, e_a> - sum_prev h <h, e_a>, with <u, v> = u^* v.
        let mut v: Vec<Complex64> = (0..n).map(|i| if i == a { ONE } else { ZERO }).collect();
        let proj = xhat[a].conj();
        for i in 0..n {
            v[i] -= xhat[i] * proj;
        }
        for h in &frame {
            let p = h[a].conj();
            for i in 0..n {
                v[i] -= h[i] * p;
            }
        }
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        frame.push(v.into_iter().map(|c| c / norm).collect());
    }
    for h in &mut frame {
        for c in h.iter_mut() {
            *c *= phase;
        }
    }
    Ok(FrameSplitting { base: x.clone(), chart, radial: xhat, h_frame: frame })
}

// ---------------------------------------------------------------------------
// Scalar fields

/// Real-valued function on (a region of) C^n. Derivatives are with respect to
/// the interleaved real coordinates; the defaults are central differences.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &ComplexPoint) -> Result<f64>;

    fn gradient(&self, x: &ComplexPoint, s: &Settings) -> Result<DVector<f64>> {
        fd_gradient(self, x, s)
    }

    fn hessian(&self, x: &ComplexPoint, s: &Settings) -> Result<DMatrix<f64>> {
        fd_hessian(self, x, s)
    }

    /// True when `gradient`/`hessian` are closed-form.
    fn has_analytic_derivatives(&self) -> bool {
        false
    }
}

fn step_at(x: &ComplexPoint, rel: f64) -> f64 {
    rel * x.norm().max(1.0)
}

pub fn fd_gradient<F: ScalarField + ?Sized>(f: &F, x: &ComplexPoint, s: &Settings) -> Result<DVector<f64>> {
    let n2 = 2 * x.dim();
    let h = step_at(x, s.fd_step);
    let mut g = DVector::zeros(n2);
    for i in 0..n2 {
        let e = DVector::from_fn(n2, |k, _| if k == i { 1.0 } else { 0.0 });
        g[i] = numdiff::central_richardson(|t| f.value(&x.shifted(&e, t)), h)?;
    }
    for v in g.iter() {
        check_finite("gradient", *v)?;
    }
    Ok(g)
}

pub fn fd_hessian<F: ScalarField + ?Sized>(f: &F, x: &ComplexPoint, s: &Settings) -> Result<DMatrix<f64>> {
    let n2 = 2 * x.dim();
    let h = step_at(x, s.fd_step_second);
    let unit = |i: usize| DVector::from_fn(n2, |k, _| if k == i { 1.0 } else { 0.0 });
    let mut m = DMatrix::zeros(n2, n2);
    for i in 0..n2 {
        let ei = unit(i);
        m[(i, i)] = numdiff::richardson(
            &[
                numdiff::second_central(|t| f.value(&x.shifted(&ei, t)), h)?,
                numdiff::second_central(|t| f.value(&x.shifted(&ei, t)), 0.5 * h)?,
            ],
            2.0,
        );
        for j in 0..i {
            let ej = unit(j);
            let mixed = |hh: f64| -> Result<f64> {
                let pp = f.value(&x.shifted(&ei, hh).shifted(&ej, hh))?;
                let pm = f.value(&x.shifted(&ei, hh).shifted(&ej, -hh))?;
                let mp = f.value(&x.shifted(&ei, -hh).shifted(&ej, hh))?;
                let mm = f.value(&x.shifted(&ei, -hh).shifted(&ej, -hh))?;
                Ok((pp - pm - mp + mm) / (4.0 * hh * hh))
            };
            let v = numdiff::richardson(&[mixed(h)?, mixed(0.5 * h)?], 2.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    for v in m.iter() {
        check_finite("hessian", *v)?;
    }
    Ok(m)
}

/// `tau_o = |z|^2` with closed-form derivatives.
#[derive(Clone, Copy, Debug)]
pub struct StandardExhaustion {
    pub n: usize,
}

impl ScalarField for StandardExhaustion {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &ComplexPoint) -> Result<f64> {
        Ok(x.norm_sqr())
    }
    fn gradient(&self, x: &ComplexPoint, _s: &Settings) -> Result<DVector<f64>> {
        Ok(x.to_real() * 2.0)
    }
    fn hessian(&self, _x: &ComplexPoint, _s: &Settings) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(2 * self.n, 2 * self.n) * 2.0)
    }
    fn has_analytic_derivatives(&self) -> bool {
        true
    }
}

/// `log F` for a positive field `F`; derivatives are composed from those of
/// `F`, so analytic inputs stay analytic.
pub struct LogField<'a> {
    pub inner: &'a dyn ScalarField,
}

impl ScalarField for LogField<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &ComplexPoint) -> Result<f64> {
        let v = self.inner.value(x)?;
        if v <= 0.0 {
            return Err(Error::NumericDomain(format!("log of non-positive value {v}")));
        }
        Ok(v.ln())
    }
    fn gradient(&self, x: &ComplexPoint, s: &Settings) -> Result<DVector<f64>> {
        let v = self.value(x)?.exp();
        Ok(self.inner.gradient(x, s)? / v)
    }
    fn hessian(&self, x: &ComplexPoint, s: &Settings) -> Result<DMatrix<f64>> {
        let v = self.value(x)?.exp();
        let g = self.inner.gradient(x, s)?;
        let h = self.inner.hessian(x, s)?;
        Ok(h / v - (&g * g.transpose()) / (v * v))
    }
    fn has_analytic_derivatives(&self) -> bool {
        self.inner.has_analytic_derivatives()
    }
}

/// Closure-backed field with finite-difference derivatives.
pub struct FnField<F> {
    pub n: usize,
    pub f: F,
}

impl<F> FnField<F>
where
    F: Fn(&ComplexPoint) -> f64 + Send + Sync,
{
    pub fn new(n: usize, f: F) -> Self {
        FnField { n, f }
    }
}

impl<F> ScalarField for FnField<F>
where
    F: Fn(&ComplexPoint) -> f64 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &ComplexPoint) -> Result<f64> {
        check_finite("field", (self.f)(x))
    }
}

/// Real-valued expression in `z1..zn` with symbolic derivatives.
#[derive(Clone, Debug)]
pub struct ExprField {
    formula: crate::expr::Formula,
    grad: Vec<crate::expr::Expr>,
    hol: Vec<Vec<crate::expr::Expr>>,
    mixed: Vec<Vec<crate::expr::Expr>>,
}

impl ExprField {
    pub fn parse(source: &str, n: usize) -> Result<Self> {
        let formula = crate::expr::Formula::parse(source, crate::expr::VarFamily::Ambient(n))?;
        let grad: Vec<_> = (0..n).map(|i| formula.diff(i, false)).collect();
        let hol = (0..n).map(|i| (0..n).map(|j| grad[i].diff(j, false)).collect()).collect();
        let mixed = (0..n).map(|i| (0..n).map(|j| grad[i].diff(j, true)).collect()).collect();
        Ok(ExprField { formula, grad, hol, mixed })
    }

    pub fn source(&self) -> &str {
        self.formula.source()
    }

    /// Holomorphic Wirtinger gradient `(d/dz_i)`.
    pub fn wirtinger_gradient(&self, x: &ComplexPoint) -> Vec<Complex64> {
        self.grad.iter().map(|e| e.eval(x.coords())).collect()
    }
}

impl ScalarField for ExprField {
    fn dim(&self) -> usize {
        self.grad.len()
    }
    fn value(&self, x: &ComplexPoint) -> Result<f64> {
        check_finite("expression", self.formula.eval(x.coords()).re)
    }
    fn gradient(&self, x: &ComplexPoint, _s: &Settings) -> Result<DVector<f64>> {
        let d = self.wirtinger_gradient(x);
        Ok(DVector::from_iterator(2 * d.len(), d.iter().flat_map(|c| [2.0 * c.re, -2.0 * c.im])))
    }
    fn hessian(&self, x: &ComplexPoint, _s: &Settings) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let fij = self.hol[i][j].eval(x.coords());
                let fijb = self.mixed[i][j].eval(x.coords());
                m[(2 * i, 2 * j)] = 2.0 * (fij.re + fijb.re);
                m[(2 * i, 2 * j + 1)] = -2.0 * fij.im + 2.0 * fijb.im;
                m[(2 * i + 1, 2 * j)] = -2.0 * fij.im - 2.0 * fijb.im;
                m[(2 * i + 1, 2 * j + 1)] = -2.0 * fij.re + 2.0 * fijb.re;
            }
        }
        Ok(m)
    }
    fn has_analytic_derivatives(&self) -> bool {
        true
    }
}

/// Complex-valued function, used for CR derivatives in the generator.
pub trait ComplexField: Send + Sync {
    fn value(&self, x: &ComplexPoint) -> Result<Complex64>;
}

impl<F> ComplexField for F
where
    F: Fn(&ComplexPoint) -> Result<Complex64> + Send + Sync,
{
    fn value(&self, x: &ComplexPoint) -> Result<Complex64> {
        self(x)
    }
}

// ---------------------------------------------------------------------------
// dd^c

/// The 2-form `dd^c_J F` at `x` as an antisymmetric real matrix
/// `Omega[i][j] = dd^c_J F(e_i, e_j)` in the interleaved real basis.
///
/// Uses `dd^c F(X, Y) = -X(dF(JY)) + Y(dF(JX))` with constant-coefficient
/// extensions of X and Y, so derivatives of J enter through `dF((D_X J) Y)`.
pub fn ddc_matrix(f: &dyn ScalarField, j: &dyn AcsField, x: &ComplexPoint, s: &Settings) -> Result<DMatrix<f64>> {
    let n2 = 2 * x.dim();
    let grad = f.gradient(x, s)?;
    let hess = f.hessian(x, s)?;
    let jx = j.matrix(x)?;
    let hj = &hess * &jx;
    let mut omega = hj.transpose() - hj;
    if !j.is_constant() {
        // rows[i] = grad^T (D_i J)
        let mut rows = DMatrix::zeros(n2, n2);
        for i in 0..n2 {
            let e = DVector::from_fn(n2, |k, _| if k == i { 1.0 } else { 0.0 });
            let dj = j.derivative(x, &e, s)?;
            let r = grad.transpose() * dj;
            rows.row_mut(i).copy_from(&r);
        }
        omega += rows.transpose() - rows;
    }
    for v in omega.iter() {
        check_finite("ddc", *v)?;
    }
    Ok(omega)
}

/// `dd^c_J F (X, Y)` for real tangent vectors.
pub fn ddc(
    f: &dyn ScalarField,
    j: &dyn AcsField,
    x: &ComplexPoint,
    xv: &DVector<f64>,
    yv: &DVector<f64>,
    s: &Settings,
) -> Result<f64> {
    let omega = ddc_matrix(f, j, x, s)?;
    Ok((xv.transpose() * omega * yv)[(0, 0)])
}

/// Complex-bilinear extension of a real 2-form matrix.
pub fn form_eval(omega: &DMatrix<f64>, a: &DVector<Complex64>, b: &DVector<Complex64>) -> Complex64 {
    let mut acc = ZERO;
    for i in 0..omega.nrows() {
        for k in 0..omega.ncols() {
            if omega[(i, k)] != 0.0 {
                acc += a[i] * b[k] * omega[(i, k)];
            }
        }
    }
    acc
}

/// Hermitian matrix `d^2 F / dz_i dzbar_j` recovered from a real Hessian.
pub fn levi_from_real_hessian(h: &DMatrix<f64>) -> DMatrix<Complex64> {
    let n = h.nrows() / 2;
    DMatrix::from_fn(n, n, |i, j| {
        let xx = h[(2 * i, 2 * j)];
        let yy = h[(2 * i + 1, 2 * j + 1)];
        let xy = h[(2 * i, 2 * j + 1)];
        let yx = h[(2 * i + 1, 2 * j)];
        Complex64::new(0.25 * (xx + yy), 0.25 * (xy - yx))
    })
}

/// Symmetric real matrix `G = (1/4) Omega J`, i.e. `G(X, Y) = dd^c F(X, JY) / 4`.
/// For integrable J and the standard structure this is the real form of the
/// Hermitian matrix `d^2 F / dz dzbar`.
pub fn metric_from_form(omega: &DMatrix<f64>, j: &DMatrix<f64>) -> DMatrix<f64> {
    omega * j * 0.25
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acs::StandardStructure;

    fn pt(v: &[(f64, f64)]) -> ComplexPoint {
        ComplexPoint::new(v.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap()
    }

    #[test]
    fn polar_examples() {
        let s = Settings::default();
        let p = to_polar(&pt(&[(0.0, 0.0), (0.5, 0.0)]), 1, &s).unwrap();
        assert!(p.affine[0].norm() < 1e-15);
        assert!((p.fiber - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        let p = to_polar(&pt(&[(0.3, 0.0), (0.3, 0.0)]), 1, &s).unwrap();
        assert!((p.affine[0] - ONE).norm() < 1e-15);
        assert!((p.fiber.re - 0.3 * 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(to_polar(&pt(&[(0.5, 0.0), (0.0, 0.0)]), 1, &s), Err(Error::ChartDomain { chart: 1 })));
    }

    #[test]
    fn from_polar_imaginary_example() {
        let s = Settings::default();
        let p = PolarPoint { chart: 1, affine: vec![I], fiber: Complex64::new(0.0, 0.2) };
        let z = from_polar(&p, &s).unwrap();
        let r2 = 2f64.sqrt();
        assert!((z.coords()[0] - Complex64::new(-0.2 / r2, 0.0)).norm() < 1e-15);
        assert!((z.coords()[1] - Complex64::new(0.0, 0.2 / r2)).norm() < 1e-15);
        let bad = PolarPoint { chart: 1, affine: vec![ONE], fiber: Complex64::new(1.0, 0.0) };
        assert!(from_polar(&bad, &s).is_err());
    }

    #[test]
    fn jacobian_columns_for_zetabar_vanish() {
        let s = Settings::default();
        let p = PolarPoint { chart: 1, affine: vec![ZERO], fiber: Complex64::new(0.4, 0.1) };
        let j = polar_jacobian(&p, &s).unwrap();
        for row in 0..2 {
            assert_eq!(j.z_from_w[(row, 3)], ZERO);
        }
    }

    #[test]
    fn frames_axis_point() {
        let f = frames(&pt(&[(0.5, 0.0), (0.0, 0.0)])).unwrap();
        assert_eq!(f.chart, 0);
        assert!((f.radial[0] - ONE).norm() < 1e-15);
        assert!((f.h_frame[0][1] - ONE).norm() < 1e-15);
        assert!(f.h_frame[0][0].norm() < 1e-15);
        assert!(matches!(frames(&ComplexPoint::origin(2)), Err(Error::AtOrigin)));
    }

    #[test]
    fn ddc_of_tau_standard_is_four() {
        let s = Settings::default();
        let x = pt(&[(0.1, 0.2), (-0.3, 0.05)]);
        let j = StandardStructure::new(2);
        let tau = StandardExhaustion { n: 2 };
        let ex = DVector::from_row_slice(&[1.0, 0.0, 0.0, 0.0]);
        let ey = DVector::from_row_slice(&[0.0, 1.0, 0.0, 0.0]);
        assert!((ddc(&tau, &j, &x, &ex, &ey, &s).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn expression_field_derivatives_match_finite_differences() {
        let s = Settings::default();
        let f = ExprField::parse("abs2(z1)^2 + 0.3*re(z1^2*z2) + im(z2)*abs2(z2)", 2).unwrap();
        let x = pt(&[(0.2, -0.1), (0.35, 0.25)]);
        let ga = f.gradient(&x, &s).unwrap();
        let gf = fd_gradient(&f, &x, &s).unwrap();
        assert!((ga - gf).amax() < 1e-8);
        let ha = f.hessian(&x, &s).unwrap();
        let hf = fd_hessian(&f, &x, &s).unwrap();
        assert!((ha - hf).amax() < 1e-6);
    }

    #[test]
    fn levi_form_of_tau_standard_is_identity() {
        let h = levi_from_real_hessian(&(DMatrix::identity(4, 4) * 2.0));
        assert!((h - DMatrix::identity(2, 2).map(|v: f64| Complex64::new(v, 0.0))).camax() < 1e-15);
    }
}
