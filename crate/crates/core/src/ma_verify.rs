//! Checks of the Monge-Ampere system, the foliation, the Kaehler metric of
//! `dd^c_J tau` and its curvature.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::acs::AcsField;
use crate::error::{Error, Result};
use crate::expr::{Formula, VarFamily};
use crate::geometry::{
    complex_vector, ddc_matrix, levi_from_real_hessian, metric_from_form, real_vector, ComplexPoint, LogField,
    ScalarField, I, ZERO,
};
use crate::kobayashi::DiskCoeffs;
use crate::numdiff;
use crate::settings::Settings;

/// Minimal eigenvalue ratio between the non-kernel and kernel parts of
/// `dd^c log tau` for a clean kernel.
pub const RANK_GAP: f64 = 1e3;

#[derive(Clone, Debug, Serialize)]
pub struct MaReport {
    pub point: Vec<[f64; 2]>,
    pub min_eig_ddc_tau: f64,
    pub min_eig_ddc_log_tau: f64,
    /// `|det (d dbar log tau)|`, from the real metric of `dd^c log tau`.
    pub det_residual: f64,
    /// Unit complex vector spanning the kernel of `dd^c log tau`.
    pub kernel: Vec<[f64; 2]>,
    /// Ratio of the third to the second smallest real eigenvalue.
    pub gap_ratio: f64,
}

fn sym_metric(f: &dyn ScalarField, j: &dyn AcsField, x: &ComplexPoint, s: &Settings) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let omega = ddc_matrix(f, j, x, s)?;
    let jm = j.matrix(x)?;
    let g = metric_from_form(&omega, &jm);
    Ok(((&g + g.transpose()) * 0.5, jm))
}

fn pairs(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

fn sorted_eigen(g: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = g.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(g.nrows(), idx.len(), |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

fn kernel_of(glog: &DMatrix<f64>) -> Result<(Vec<Complex64>, f64)> {
    let (vals, vecs) = sorted_eigen(glog);
    let gap = if vals.len() > 2 { vals[2] / vals[1].abs().max(1e-300) } else { f64::INFINITY };
    let v = complex_vector(&vecs.column(0).into_owned());
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    Ok((v.into_iter().map(|c| c / norm).collect(), gap))
}

pub fn ma_residuals(tau: &dyn ScalarField, j: &dyn AcsField, x: &ComplexPoint, s: &Settings) -> Result<MaReport> {
    let t = tau.value(x)?;
    if t <= 0.0 {
        return Err(Error::NumericDomain(format!("exhaustion must be positive at the probe (value {t})")));
    }
    let (g, _) = sym_metric(tau, j, x, s)?;
    let log = LogField { inner: tau };
    let (glog, _) = sym_metric(&log, j, x, s)?;
    let min_tau = sorted_eigen(&g).0[0];
    let min_log = sorted_eigen(&glog).0[0];
    let det_residual = glog.determinant().abs().sqrt();
    let (kernel, gap_ratio) = kernel_of(&glog)?;
    Ok(MaReport {
        point: pairs(x.coords()),
        min_eig_ddc_tau: min_tau,
        min_eig_ddc_log_tau: min_log,
        det_residual,
        kernel: pairs(&kernel),
        gap_ratio,
    })
}

/// Unit vector spanning the kernel of `d dbar log tau`.
pub fn foliation_kernel(tau: &dyn ScalarField, j: &dyn AcsField, x: &ComplexPoint, s: &Settings) -> Result<Vec<Complex64>> {
    let log = LogField { inner: tau };
    let (glog, _) = sym_metric(&log, j, x, s)?;
    let (v, gap) = kernel_of(&glog)?;
    if gap < RANK_GAP {
        return Err(Error::RankGap(gap));
    }
    Ok(v)
}

/// Angle between complex lines spanned by `a` and `b`.
pub fn line_angle(a: &[Complex64], b: &[Complex64]) -> f64 {
    let ip: Complex64 = a.iter().zip(b).map(|(u, v)| u.conj() * v).sum();
    let na = a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let c = (ip.norm() / (na * nb)).min(1.0);
    // acos loses precision near 1; use the sine instead.
    (1.0 - c * c).max(0.0).sqrt().asin()
}

/// Kaehler metric of `dd^c_J tau`.
#[derive(Clone, Debug)]
pub struct KahlerMetric {
    /// J-invariant part `(G + J^T G J) / 2` of `G = dd^c tau(., J .) / 4`.
    pub real: DMatrix<f64>,
    /// Hermitian matrix in standard coordinates, `real = Re(h)` on real vectors.
    pub hermitian: DMatrix<Complex64>,
    /// Size of the J-anti-invariant part that was removed.
    pub defect: f64,
    pub min_eig: f64,
}

pub fn kahler_metric(tau: &dyn ScalarField, j: &dyn AcsField, x: &ComplexPoint, s: &Settings) -> Result<KahlerMetric> {
    let (g, jm) = sym_metric(tau, j, x, s)?;
    let inv = (jm.transpose() * &g * &jm + &g) * 0.5;
    let defect = (&inv - &g).amax();
    let min_eig = sorted_eigen(&inv).0[0];
    if min_eig <= 0.0 {
        return Err(Error::Positivity(min_eig));
    }
    let n = x.dim();
    let hermitian = DMatrix::from_fn(n, n, |i, k| Complex64::new(inv[(2 * i, 2 * k)], inv[(2 * i + 1, 2 * k)]));
    Ok(KahlerMetric { real: inv, hermitian, defect, min_eig })
}

// ---------------------------------------------------------------------------
// Metric blocks and curvature

/// Field of Hermitian matrices `omega_{j kbar}`.
pub trait MetricBlock: Send + Sync {
    fn dim(&self) -> usize;
    fn omega(&self, x: &ComplexPoint) -> Result<DMatrix<Complex64>>;
    /// Probes closer than this to the origin are rejected.
    fn min_radius(&self) -> f64 {
        0.0
    }
}

/// Constant identity block.
#[derive(Clone, Copy, Debug)]
pub struct FlatMetric {
    pub n: usize,
}

impl MetricBlock for FlatMetric {
    fn dim(&self) -> usize {
        self.n
    }
    fn omega(&self, _x: &ComplexPoint) -> Result<DMatrix<Complex64>> {
        Ok(DMatrix::identity(self.n, self.n))
    }
}

/// Block given by expressions in `z1..zn`, row-major.
#[derive(Clone, Debug)]
pub struct ExprMetric {
    n: usize,
    entries: Vec<Formula>,
}

impl ExprMetric {
    pub fn new(n: usize, entries: &[&str]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: entries.len() });
        }
        let entries = entries.iter().map(|e| Formula::parse(e, VarFamily::Ambient(n))).collect::<Result<_>>()?;
        Ok(ExprMetric { n, entries })
    }

    /// Identity block with one diagonal entry replaced.
    pub fn diagonal_override(n: usize, k: usize, entry: &str) -> Result<Self> {
        let mut e: Vec<String> = (0..n * n).map(|i| if i % (n + 1) == 0 { "1".into() } else { "0".into() }).collect();
        e[k * (n + 1)] = entry.into();
        let refs: Vec<&str> = e.iter().map(String::as_str).collect();
        Self::new(n, &refs)
    }
}

impl MetricBlock for ExprMetric {
    fn dim(&self) -> usize {
        self.n
    }
    fn omega(&self, x: &ComplexPoint) -> Result<DMatrix<Complex64>> {
        let m = DMatrix::from_fn(self.n, self.n, |i, k| self.entries[i * self.n + k].eval(x.coords()));
        if m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NumericDomain("metric block is not finite".into()));
        }
        Ok(m)
    }
}

/// Levi matrix `d^2 tau / dz_j dzbar_k` of an exhaustion.
pub struct ExhaustionMetric<'a> {
    pub tau: Box<dyn ScalarField + 'a>,
    pub settings: Settings,
}

impl MetricBlock for ExhaustionMetric<'_> {
    fn dim(&self) -> usize {
        self.tau.dim()
    }
    fn omega(&self, x: &ComplexPoint) -> Result<DMatrix<Complex64>> {
        Ok(levi_from_real_hessian(&self.tau.hessian(x, &self.settings)?))
    }
    fn min_radius(&self) -> f64 {
        if self.tau.has_analytic_derivatives() {
            0.0
        } else {
            self.settings.curvature_min_radius
        }
    }
}

fn check_probe(w: &dyn MetricBlock, x: &ComplexPoint) -> Result<()> {
    if x.dim() != w.dim() {
        return Err(Error::DimensionMismatch { expected: w.dim(), got: x.dim() });
    }
    if x.norm() < w.min_radius() {
        return Err(Error::Precondition(format!(
            "probe at |x| = {} is closer than {} to the center",
            x.norm(),
            w.min_radius()
        )));
    }
    Ok(())
}

fn unit(n2: usize, k: usize) -> DVector<f64> {
    DVector::from_fn(n2, |i, _| if i == k { 1.0 } else { 0.0 })
}

/// Real partial derivative of the block along real coordinate `p`.
fn real_first(w: &dyn MetricBlock, x: &ComplexPoint, p: usize, s: &Settings) -> Result<DMatrix<Complex64>> {
    let e = unit(2 * x.dim(), p);
    numdiff::central_ladder(|t| w.omega(&x.shifted(&e, t)), &s.curvature_steps)
}

fn real_second(w: &dyn MetricBlock, x: &ComplexPoint, p: usize, q: usize, s: &Settings) -> Result<DMatrix<Complex64>> {
    let n2 = 2 * x.dim();
    let ep = unit(n2, p);
    if p == q {
        return numdiff::second_ladder(|t| w.omega(&x.shifted(&ep, t)), &s.curvature_steps);
    }
    let eq = unit(n2, q);
    let mixed = |h: f64| -> Result<DMatrix<Complex64>> {
        let pp = w.omega(&x.shifted(&ep, h).shifted(&eq, h))?;
        let pm = w.omega(&x.shifted(&ep, h).shifted(&eq, -h))?;
        let mp = w.omega(&x.shifted(&ep, -h).shifted(&eq, h))?;
        let mm = w.omega(&x.shifted(&ep, -h).shifted(&eq, -h))?;
        Ok((pp - pm - mp + mm).map(|c| c / (4.0 * h * h)))
    };
    let est = s.curvature_steps.iter().map(|&h| mixed(h)).collect::<Result<Vec<_>>>()?;
    let ratio = s.curvature_steps[0] / s.curvature_steps[1];
    Ok(numdiff::richardson(&est, ratio))
}

/// `d omega / dz_i` (holomorphic Wirtinger derivative).
pub fn d_omega(w: &dyn MetricBlock, x: &ComplexPoint, i: usize, s: &Settings) -> Result<DMatrix<Complex64>> {
    check_probe(w, x)?;
    let dx = real_first(w, x, 2 * i, s)?;
    let dy = real_first(w, x, 2 * i + 1, s)?;
    Ok((dx - dy.map(|c| c * I)).map(|c| c * 0.5))
}

/// `d omega / dzbar_i`.
pub fn dbar_omega(w: &dyn MetricBlock, x: &ComplexPoint, i: usize, s: &Settings) -> Result<DMatrix<Complex64>> {
    check_probe(w, x)?;
    let dx = real_first(w, x, 2 * i, s)?;
    let dy = real_first(w, x, 2 * i + 1, s)?;
    Ok((dx + dy.map(|c| c * I)).map(|c| c * 0.5))
}

/// `d^2 omega / dz_a dzbar_b`.
pub fn ddbar_omega(w: &dyn MetricBlock, x: &ComplexPoint, a: usize, b: usize, s: &Settings) -> Result<DMatrix<Complex64>> {
    check_probe(w, x)?;
    let xx = real_second(w, x, 2 * a, 2 * b, s)?;
    let yy = real_second(w, x, 2 * a + 1, 2 * b + 1, s)?;
    let xy = real_second(w, x, 2 * a, 2 * b + 1, s)?;
    let yx = real_second(w, x, 2 * a + 1, 2 * b, s)?;
    Ok((xx + yy + (xy - yx).map(|c| c * I)).map(|c| c * 0.25))
}

/// `Gamma_{ij|kbar} = d omega_{j kbar} / dz_i`.
pub fn christoffel(w: &dyn MetricBlock, x: &ComplexPoint, i: usize, j: usize, k: usize, s: &Settings) -> Result<Complex64> {
    let n = w.dim();
    if i >= n || j >= n || k >= n {
        return Err(Error::InvalidInput("index out of range".into()));
    }
    Ok(d_omega(w, x, i, s)?[(j, k)])
}

/// `max |Gamma_{ij|kbar} - Gamma_{ji|kbar}|`, zero for Kaehler blocks.
pub fn christoffel_symmetry_residual(w: &dyn MetricBlock, x: &ComplexPoint, s: &Settings) -> Result<f64> {
    let n = w.dim();
    let d: Vec<_> = (0..n).map(|i| d_omega(w, x, i, s)).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                worst = worst.max((d[i][(j, k)] - d[j][(i, k)]).norm());
            }
        }
    }
    Ok(worst)
}

/// Curvature slots `R(d_a, d_bbar, d_c, d_dbar)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Slots {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub d: usize,
}

impl Slots {
    pub fn new(a: usize, b: usize, c: usize, d: usize) -> Self {
        Slots { a, b, c, d }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurvatureMethod {
    /// `d_a d_bbar omega_{c dbar}` along the leaf tangent to `d_leaf`, valid
    /// where `Gamma_{leaf leaf|kbar}` vanishes.
    LeafShortcut { leaf: usize },
    /// `d_a d_bbar omega_{c dbar} - sum (d_a omega_{c qbar}) (omega^{-1})_{qp} (d_bbar omega_{p dbar})`.
    Full,
}

/// Threshold for the leaf shortcut precondition.
pub const LEAF_GAMMA_TOL: f64 = 1e-6;

pub fn curvature_component(
    w: &dyn MetricBlock,
    x: &ComplexPoint,
    slots: Slots,
    method: CurvatureMethod,
    s: &Settings,
) -> Result<Complex64> {
    let n = w.dim();
    if [slots.a, slots.b, slots.c, slots.d].iter().any(|&k| k >= n) {
        return Err(Error::InvalidInput("curvature slot out of range".into()));
    }
    let second = ddbar_omega(w, x, slots.a, slots.b, s)?[(slots.c, slots.d)];
    match method {
        CurvatureMethod::LeafShortcut { leaf } => {
            if leaf >= n {
                return Err(Error::InvalidInput("leaf index out of range".into()));
            }
            let g = d_omega(w, x, leaf, s)?;
            let worst = (0..n).map(|k| g[(leaf, k)].norm()).fold(0.0, f64::max);
            if worst >= LEAF_GAMMA_TOL {
                return Err(Error::Precondition(format!(
                    "leaf shortcut needs vanishing Christoffel symbols along the leaf (found {worst:e})"
                )));
            }
            Ok(second)
        }
        CurvatureMethod::Full => {
            let om = w.omega(x)?;
            let inv = om
                .try_inverse()
                .ok_or_else(|| Error::NumericDomain("metric block is singular".into()))?;
            let da = d_omega(w, x, slots.a, s)?;
            let db = dbar_omega(w, x, slots.b, s)?;
            let mut corr = ZERO;
            for p in 0..n {
                for q in 0..n {
                    corr += da[(slots.c, q)] * inv[(q, p)] * db[(p, slots.d)];
                }
            }
            Ok(second - corr)
        }
    }
}

/// Largest violation of `R(a,b,c,d) = R(c,b,a,d) = R(a,d,c,b)` and
/// `conj R(a,b,c,d) = R(b,a,d,c)` for the full formula.
pub fn curvature_symmetry_residual(w: &dyn MetricBlock, x: &ComplexPoint, slots: Slots, s: &Settings) -> Result<f64> {
    let r = |sl: Slots| curvature_component(w, x, sl, CurvatureMethod::Full, s);
    let base = r(slots)?;
    let Slots { a, b, c, d } = slots;
    let others = [r(Slots::new(c, b, a, d))?, r(Slots::new(a, d, c, b))?, r(Slots::new(b, a, d, c))?.conj()];
    Ok(others.iter().map(|o| (o - base).norm()).fold(0.0, f64::max))
}

/// Evaluated probe for reports.
#[derive(Clone, Debug)]
pub struct CurvatureProbe {
    pub point: ComplexPoint,
    pub omega: DMatrix<Complex64>,
    /// `christoffel[i][(j, k)] = Gamma_{ij|kbar}`.
    pub christoffel: Vec<DMatrix<Complex64>>,
    pub components: Vec<(Slots, Complex64)>,
    pub order: u32,
}

pub fn curvature_probe(w: &dyn MetricBlock, x: &ComplexPoint, slots: &[Slots], s: &Settings) -> Result<CurvatureProbe> {
    check_probe(w, x)?;
    let omega = w.omega(x)?;
    let herm = (&omega - omega.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
    if herm > 1e-10 * (1.0 + omega.iter().map(|c| c.norm()).fold(0.0, f64::max)) {
        return Err(Error::InvalidInput("metric block is not Hermitian".into()));
    }
    let min = omega.clone().symmetric_eigen().eigenvalues.min();
    if min <= 0.0 {
        return Err(Error::Positivity(min));
    }
    let christoffel = (0..w.dim()).map(|i| d_omega(w, x, i, s)).collect::<Result<_>>()?;
    let components = slots
        .iter()
        .map(|&sl| Ok((sl, curvature_component(w, x, sl, CurvatureMethod::Full, s)?)))
        .collect::<Result<_>>()?;
    Ok(CurvatureProbe { point: x.clone(), omega, christoffel, components, order: 0 })
}

/// `(d_zeta d_zetabar)^m R(zeta v)` at `zeta = 0` along the leaf through the
/// origin tangent to `v`, by nested five-point Laplacians (`m <= 2`).
pub fn leaf_curvature_derivative(
    w: &dyn MetricBlock,
    v: &[Complex64],
    slots: Slots,
    m: u32,
    s: &Settings,
) -> Result<Complex64> {
    if m > 2 {
        return Err(Error::InvalidInput("leaf derivatives are provided up to order 2".into()));
    }
    if v.len() != w.dim() {
        return Err(Error::DimensionMismatch { expected: w.dim(), got: v.len() });
    }
    const H: f64 = 0.05;
    fn lap(
        w: &dyn MetricBlock,
        v: &[Complex64],
        slots: Slots,
        zeta: Complex64,
        m: u32,
        s: &Settings,
    ) -> Result<Complex64> {
        if m == 0 {
            let x = ComplexPoint::from_vec_unchecked(v.iter().map(|c| c * zeta).collect());
            return curvature_component(w, &x, slots, CurvatureMethod::Full, s);
        }
        let stencil = |h: f64| -> Result<Complex64> {
            let c = lap(w, v, slots, zeta, m - 1, s)?;
            let mut acc = c * -4.0;
            for d in [Complex64::new(h, 0.0), Complex64::new(-h, 0.0), Complex64::new(0.0, h), Complex64::new(0.0, -h)] {
                acc += lap(w, v, slots, zeta + d, m - 1, s)?;
            }
            // d d-bar = Laplacian / 4
            Ok(acc / (4.0 * h * h))
        };
        Ok(numdiff::richardson(&[stencil(H)?, stencil(H / 2.0)?], 2.0))
    }
    lap(w, v, slots, ZERO, m, s)
}

// ---------------------------------------------------------------------------
// Leaves

/// Geodesy and flatness residuals of a holomorphic disk.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LeafResiduals {
    /// `max |(nabla_T T)^perp|_g / |T|_g^2` over probes.
    pub geodesy: f64,
    /// `max |K|` for the Gauss curvature `K` of the induced metric.
    pub flatness: f64,
}

/// Real metric of `dd^c_J tau` at a point.
fn real_metric(tau: &dyn ScalarField, j: &dyn AcsField, x: &ComplexPoint, s: &Settings) -> Result<DMatrix<f64>> {
    Ok(kahler_metric(tau, j, x, s)?.real)
}

/// Step for differentiating the metric in leaf computations.
const METRIC_STEP: f64 = 1e-3;
/// Step of the Laplacian in the leaf coordinate.
const LEAF_STEP: f64 = 1e-2;

pub fn leaf_residuals(
    tau: &dyn ScalarField,
    j: &dyn AcsField,
    disk: &DiskCoeffs,
    probes: &[Complex64],
    s: &Settings,
) -> Result<LeafResiduals> {
    let n2 = 2 * tau.dim();
    if disk.dim() != tau.dim() {
        return Err(Error::DimensionMismatch { expected: tau.dim(), got: disk.dim() });
    }
    if probes.is_empty() {
        return Err(Error::EmptyInput("leaf probes"));
    }
    let point = |zeta: Complex64| ComplexPoint::new(disk.eval(zeta));
    let mut geodesy: f64 = 0.0;
    let mut flatness: f64 = 0.0;
    for &zeta in probes {
        let x = point(zeta)?;
        let g = real_metric(tau, j, &x, s)?;
        let ginv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NumericDomain("metric is singular".into()))?;
        let fp = disk.derivative(zeta);
        let t = real_vector(&fp);
        let tt = real_vector(&fp.iter().map(|c| c * I).collect::<Vec<_>>());
        let fss = real_vector(&disk.second_derivative(zeta));
        // dG[l] = d G / d x_l
        let dg: Vec<DMatrix<f64>> = (0..n2)
            .map(|l| {
                let e = unit(n2, l);
                numdiff::central_richardson(|h| real_metric(tau, j, &x.shifted(&e, h), s), METRIC_STEP)
            })
            .collect::<Result<_>>()?;
        // Gamma(T, T)^k = 1/2 G^{kl} (2 T^i T^j d_i G_{jl} - T^i T^j d_l G_{ij})
        let mut lowered = DVector::zeros(n2);
        for l in 0..n2 {
            let mut acc = 0.0;
            for i in 0..n2 {
                acc += 2.0 * t[i] * (dg[i].row(l) * &t)[(0, 0)];
            }
            acc -= (t.transpose() * &dg[l] * &t)[(0, 0)];
            lowered[l] = 0.5 * acc;
        }
        let accel = &fss + &ginv * lowered;
        let basis = DMatrix::from_columns(&[t.clone(), tt]);
        let gram = basis.transpose() * &g * &basis;
        let coef = gram
            .try_inverse()
            .ok_or_else(|| Error::NumericDomain("degenerate leaf tangent".into()))?
            * (basis.transpose() * &g * &accel);
        let normal = &accel - &basis * coef;
        let tnorm2 = (t.transpose() * &g * &t)[(0, 0)];
        geodesy = geodesy.max((normal.transpose() * &g * &normal)[(0, 0)].max(0.0).sqrt() / tnorm2);

        let log_lambda = |z: Complex64| -> Result<f64> {
            let x = point(z)?;
            let g = real_metric(tau, j, &x, s)?;
            let t = real_vector(&disk.derivative(z));
            Ok((t.transpose() * g * &t)[(0, 0)].ln())
        };
        let lap = |h: f64| -> Result<f64> {
            let c = log_lambda(zeta)?;
            let mut acc = -4.0 * c;
            for d in [Complex64::new(h, 0.0), Complex64::new(-h, 0.0), Complex64::new(0.0, h), Complex64::new(0.0, -h)] {
                acc += log_lambda(zeta + d)?;
            }
            Ok(acc / (h * h))
        };
        let laplacian = numdiff::richardson(&[lap(LEAF_STEP)?, lap(LEAF_STEP / 2.0)?], 2.0);
        flatness = flatness.max((-laplacian / (2.0 * tnorm2)).abs());
    }
    Ok(LeafResiduals { geodesy, flatness })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acs::StandardStructure;
    use crate::geometry::{ExprField, StandardExhaustion};

    fn pt(v: &[(f64, f64)]) -> ComplexPoint {
        ComplexPoint::new(v.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap()
    }

    #[test]
    fn ball_pair_is_monge_ampere_with_radial_kernel() {
        let s = Settings::default();
        let x = pt(&[(0.3, 0.0), (0.4, 0.0)]);
        let tau = StandardExhaustion { n: 2 };
        let r = ma_residuals(&tau, &StandardStructure::new(2), &x, &s).unwrap();
        assert!(r.det_residual < 1e-8);
        assert!(r.min_eig_ddc_tau > 0.0);
        let k = foliation_kernel(&tau, &StandardStructure::new(2), &x, &s).unwrap();
        assert!(line_angle(&k, x.coords()) < 1e-6);
    }

    #[test]
    fn fourth_power_is_monge_ampere_but_perturbation_is_not() {
        let s = Settings::default();
        let x = pt(&[(0.5, 0.0), (0.0, 0.0)]);
        let j = StandardStructure::new(2);
        let quartic = ExprField::parse("(abs2(z1) + abs2(z2))^2", 2).unwrap();
        assert!(ma_residuals(&quartic, &j, &x, &s).unwrap().det_residual < 1e-8);
        let bad = ExprField::parse("abs2(z1) + abs2(z2) + 0.3*re(z1^2)", 2).unwrap();
        assert!(ma_residuals(&bad, &j, &x, &s).unwrap().det_residual > 1e-3);
    }

    #[test]
    fn rank_deficient_exhaustion_has_no_clean_kernel() {
        let s = Settings::default();
        let tau = ExprField::parse("abs2(z1)", 2).unwrap();
        let r = foliation_kernel(&tau, &StandardStructure::new(2), &pt(&[(0.5, 0.1), (0.2, 0.0)]), &s);
        assert!(matches!(r, Err(Error::RankGap(_))));
    }

    #[test]
    fn non_psh_exhaustion_fails_positivity() {
        let s = Settings::default();
        let tau = ExprField::parse("abs2(z1) - abs2(z2)", 2).unwrap();
        let r = kahler_metric(&tau, &StandardStructure::new(2), &pt(&[(0.5, 0.1), (0.2, 0.0)]), &s);
        assert!(matches!(r, Err(Error::Positivity(_))));
    }

    #[test]
    fn christoffel_of_monomial_block() {
        let s = Settings::default();
        let w = ExprMetric::diagonal_override(2, 1, "1 + abs2(z1)").unwrap();
        let x = pt(&[(0.3, -0.2), (0.1, 0.4)]);
        let g = christoffel(&w, &x, 0, 1, 1, &s).unwrap();
        assert!((g - Complex64::new(0.3, 0.2)).norm() < 1e-9);
        assert_eq!(christoffel(&FlatMetric { n: 2 }, &x, 0, 0, 1, &s).unwrap(), ZERO);
    }

    #[test]
    fn shortcut_and_full_formula_on_the_leaf() {
        let s = Settings::default();
        let w = ExprMetric::diagonal_override(2, 1, "1 + abs2(z1)").unwrap();
        let sl = Slots::new(0, 0, 1, 1);
        let x = ComplexPoint::origin(2);
        let short = curvature_component(&w, &x, sl, CurvatureMethod::LeafShortcut { leaf: 0 }, &s).unwrap();
        let full = curvature_component(&w, &x, sl, CurvatureMethod::Full, &s).unwrap();
        assert!((short - 1.0).norm() < 1e-8);
        assert!((full - short).norm() < 1e-8);
        // Off the leaf the shortcut precondition fails.
        let off = pt(&[(0.5, 0.0), (0.0, 0.0)]);
        let w2 = ExprMetric::diagonal_override(2, 0, "1 + abs2(z1)").unwrap();
        assert!(matches!(
            curvature_component(&w2, &off, sl, CurvatureMethod::LeafShortcut { leaf: 0 }, &s),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn leaf_laplacian_of_curvature() {
        let s = Settings::default();
        // omega_22 = 1 + |z1|^4: R(1,1,2,2) = 4|z1|^2 + O(|z1|^6) on the leaf.
        let w = ExprMetric::diagonal_override(2, 1, "1 + abs2(z1)^2").unwrap();
        let v = [Complex64::new(1.0, 0.0), ZERO];
        let d1 = leaf_curvature_derivative(&w, &v, Slots::new(0, 0, 1, 1), 1, &s).unwrap();
        assert!((d1 - 4.0).norm() < 1e-4, "{d1}");
    }

    #[test]
    fn non_leaf_disk_is_not_geodesic() {
        let s = Settings::default();
        let tau = StandardExhaustion { n: 2 };
        let disk = DiskCoeffs { coeffs: vec![vec![ZERO, ZERO], vec![Complex64::new(1.0, 0.0), ZERO], vec![ZERO, Complex64::new(0.2, 0.0)]] };
        let r = leaf_residuals(&tau, &StandardStructure::new(2), &disk, &[ZERO, Complex64::new(0.3, 0.1)], &s).unwrap();
        assert!(r.geodesy > 1e-3);
        let radial = DiskCoeffs::linear(&[ZERO, ZERO], &[Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]);
        let r = leaf_residuals(&tau, &StandardStructure::new(2), &radial, &[Complex64::new(0.3, 0.1), Complex64::new(-0.5, 0.2)], &s).unwrap();
        assert!(r.geodesy < 1e-10 && r.flatness < 1e-10);
    }
}
