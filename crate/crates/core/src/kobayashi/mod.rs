//! Kobayashi extremal disks, the center-based Monge-Ampere exhaustion, the
//! indicatrix and the normal form of domains whose indicatrix is linearly a
//! ball.

mod disk;
mod domain;

pub use disk::{
    circular_representation, extremal_disk, kobayashi_metric, solve_extremal_disk, DiskCoeffs, DiskMethod,
    ExtremalDisk,
};
pub use domain::{sphere_grid, Domain, DomainKind, DomainSpec, Gauge};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::acs::{phi_from_j, SampledDeformation, SamplingPlan};
use crate::error::{Error, Result};
use crate::geometry::{real_vector, standard_structure, ComplexPoint, ExprField, ScalarField, ZERO};
use crate::numdiff;
use crate::settings::Settings;
use domain::{as_complex, hermitian_inv_sqrt};

/// `tau(y) = tanh^2 delta(y)`, with `delta` the Kobayashi distance from the
/// center.
pub fn ma_exhaustion(d: &Domain, y: &[Complex64], s: &Settings) -> Result<f64> {
    if y.len() != d.n {
        return Err(Error::DimensionMismatch { expected: d.n, got: y.len() });
    }
    if !d.contains(y)? {
        return Err(Error::InvalidInput("point is not inside the domain".into()));
    }
    let rel: Vec<Complex64> = y.iter().zip(d.center.coords()).map(|(a, b)| a - b).collect();
    if rel.iter().all(|c| c.norm() == 0.0) {
        return Ok(0.0);
    }
    if let Some(mu) = d.gauge(&rel) {
        return Ok(mu?.powi(2));
    }
    Ok(shoot_disk(d, y, s)?.1.powi(2))
}

/// `delta(y) = artanh sqrt(tau(y))`.
pub fn kobayashi_distance(d: &Domain, y: &[Complex64], s: &Settings) -> Result<f64> {
    Ok(ma_exhaustion(d, y, s)?.sqrt().atanh())
}

/// Finds the direction `v` and radius `r` with `f^v(r) = y` by Newton
/// iteration on `u = r v` with a finite-difference Jacobian.
fn shoot_disk(d: &Domain, y: &[Complex64], s: &Settings) -> Result<(Vec<Complex64>, f64)> {
    let c = d.center.coords();
    let rel: Vec<Complex64> = y.iter().zip(c).map(|(a, b)| a - b).collect();
    let reach = d.distance_to_boundary(c, &rel)?;
    let norm = rel.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let mut u = real_vector(&rel) * (norm / reach / norm);
    let target = real_vector(y);
    let residual = |u: &DVector<f64>| -> Result<DVector<f64>> {
        let r = u.norm();
        if r >= 1.0 {
            return Err(Error::NumericDomain("disk shooting left the unit disk".into()));
        }
        let v = as_complex(u);
        let disk = extremal_disk(d, c, &v, s)?;
        Ok(real_vector(&disk.disk.eval(Complex64::new(r, 0.0))) - &target)
    };
    let h = 1e-5;
    for _ in 0..30 {
        let g = residual(&u)?;
        if g.norm() < 1e-10 {
            return Ok((as_complex(&(&u / u.norm())), u.norm()));
        }
        let m = u.len();
        let mut jac = DMatrix::zeros(m, m);
        for k in 0..m {
            let mut up = u.clone();
            up[k] += h;
            let mut um = u.clone();
            um[k] -= h;
            let col = (residual(&up)? - residual(&um)?) / (2.0 * h);
            jac.set_column(k, &col);
        }
        let step = jac
            .lu()
            .solve(&g)
            .ok_or_else(|| Error::NumericDomain("disk shooting Jacobian is singular".into()))?;
        let mut t = 1.0;
        let mut next = &u - &step * t;
        while next.norm() >= 1.0 && t > 1e-6 {
            t *= 0.5;
            next = &u - &step * t;
        }
        u = next;
    }
    Err(Error::NonConvergence { iterations: 30, penalty: residual(&u)?.norm() })
}

/// Sampled indicatrix at the center and its linear realization.
#[derive(Clone, Debug)]
pub struct IndicatrixSample {
    pub directions: Vec<Vec<Complex64>>,
    pub kappa: Vec<f64>,
    /// Boundary points `v / kappa(v)`.
    pub boundary: Vec<Vec<Complex64>>,
    /// Hermitian form `h` used for the realization: the Levi form of the
    /// exhaustion at the center when it is numerically C^2 there, otherwise
    /// the least-squares fit of `kappa^2`.
    pub levi: DMatrix<Complex64>,
    pub c2_at_center: bool,
    /// Columns form a basis unitary for `levi`; `l_B(u) = basis * u`.
    pub basis: DMatrix<Complex64>,
    /// `max |kappa(l_B u) - 1|` over unit vectors `u`.
    pub residual: f64,
}

impl IndicatrixSample {
    /// `max |h(v, v) / kappa(v)^2 - 1|` over the sampled directions.
    pub fn kappa_identity_residual(&self) -> f64 {
        self.directions
            .iter()
            .zip(&self.kappa)
            .map(|(v, k)| (hermitian_value(&self.levi, v) / (k * k) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn hermitian_value(h: &DMatrix<Complex64>, v: &[Complex64]) -> f64 {
    let mut acc = ZERO;
    for i in 0..v.len() {
        for j in 0..v.len() {
            acc += v[i].conj() * h[(i, j)] * v[j];
        }
    }
    acc.re
}

/// Least-squares Hermitian `h` with `v^* h v ~ y`; returns `h` and the
/// largest relative misfit.
pub fn fit_hermitian(dirs: &[Vec<Complex64>], values: &[f64]) -> Result<(DMatrix<Complex64>, f64)> {
    let n = dirs.first().ok_or(Error::EmptyInput("directions"))?.len();
    let params = n * n;
    if dirs.len() < params {
        return Err(Error::DegenerateFit("too few directions for a Hermitian fit".into()));
    }
    let basis = |k: usize| -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(n, n, ZERO);
        if k < n {
            m[(k, k)] = Complex64::new(1.0, 0.0);
        } else {
            let idx = (k - n) / 2;
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
            let (i, j) = pairs[idx];
            if (k - n).is_multiple_of(2) {
                m[(i, j)] = Complex64::new(1.0, 0.0);
                m[(j, i)] = Complex64::new(1.0, 0.0);
            } else {
                m[(i, j)] = Complex64::new(0.0, 1.0);
                m[(j, i)] = Complex64::new(0.0, -1.0);
            }
        }
        m
    };
    let mats: Vec<_> = (0..params).map(basis).collect();
    let a = DMatrix::from_fn(dirs.len(), params, |r, k| hermitian_value(&mats[k], &dirs[r]));
    let b = DVector::from_column_slice(values);
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::DegenerateFit(e.to_string()))?;
    let mut h = DMatrix::from_element(n, n, ZERO);
    for (k, m) in mats.iter().enumerate() {
        h += m.map(|c| c * coef[k]);
    }
    let fitted = &a * &coef;
    let misfit = fitted
        .iter()
        .zip(values)
        .map(|(f, y)| (f - y).abs() / y.abs().max(1e-300))
        .fold(0.0, f64::max);
    Ok((h, misfit))
}

/// Symmetric second differences of `tau` at the center at three steps,
/// halving each time; C^2 when they agree within `1e-3` relative and the
/// resulting quadratic form is Hermitian to the same tolerance.
fn levi_at_center(d: &Domain, dirs: &[Vec<Complex64>], s: &Settings) -> Result<(DMatrix<Complex64>, bool)> {
    let c = d.center.coords();
    let base = 0.1 * dirs.iter().map(|v| d.distance_to_boundary(c, v)).collect::<Result<Vec<_>>>()?.into_iter().fold(f64::INFINITY, f64::min);
    let steps = [base, base / 2.0, base / 4.0];
    let mut consistent = true;
    let mut q = Vec::with_capacity(dirs.len());
    for v in dirs {
        let at = |t: f64| -> Result<f64> {
            let y: Vec<Complex64> = c.iter().zip(v).map(|(a, b)| a + b * t).collect();
            ma_exhaustion(d, &y, s)
        };
        let est = steps.iter().map(|&h| numdiff::second_central(at, h)).collect::<Result<Vec<_>>>()?;
        let scale = est.iter().map(|e| e.abs()).fold(0.0, f64::max).max(1e-300);
        if est.iter().any(|e| (e - est[2]).abs() > 1e-3 * scale) {
            consistent = false;
        }
        q.push(0.5 * est[2]);
    }
    let (h, misfit) = fit_hermitian(dirs, &q)?;
    Ok((h, consistent && misfit < 1e-3))
}

/// Kobayashi indicatrix at the center on `count` directions.
pub fn indicatrix(d: &Domain, count: usize, s: &Settings) -> Result<IndicatrixSample> {
    let directions = sphere_grid(d.n, count.max(d.n * d.n));
    let c = d.center.coords().to_vec();
    let kappa: Vec<f64> = directions.par_iter().map(|v| kobayashi_metric(d, &c, v, s)).collect::<Result<_>>()?;
    let boundary = directions.iter().zip(&kappa).map(|(v, k)| v.iter().map(|x| x / *k).collect()).collect();
    let (levi_c2, c2) = levi_at_center(d, &directions, s)?;
    let levi = if c2 {
        levi_c2
    } else {
        let k2: Vec<f64> = kappa.iter().map(|k| k * k).collect();
        fit_hermitian(&directions, &k2)?.0
    };
    let basis = hermitian_inv_sqrt(&levi)?;
    let images: Vec<Vec<Complex64>> = directions
        .iter()
        .map(|u| (0..d.n).map(|i| (0..d.n).map(|k| basis[(i, k)] * u[k]).sum()).collect())
        .collect();
    let residual = images
        .par_iter()
        .map(|w| Ok((kobayashi_metric(d, &c, w, s)? - 1.0).abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(IndicatrixSample { directions, kappa, boundary, levi, c2_at_center: c2, basis, residual })
}

/// Tolerance on the indicatrix normalization for the normal form.
pub const BALL_TOLERANCE: f64 = 1e-3;

/// Circular representation `Psi(x) = f^{l_B x}(|x|)` of a domain whose
/// indicatrix is linearly a ball, on the unit ball.
#[derive(Clone, Debug)]
pub struct CircularRepresentation {
    pub domain: Domain,
    pub basis: DMatrix<Complex64>,
    pub indicatrix_residual: f64,
}

impl CircularRepresentation {
    pub fn new(d: &Domain, s: &Settings) -> Result<Self> {
        let ind = indicatrix(d, 4 * d.n * d.n, s)?;
        if ind.residual > BALL_TOLERANCE {
            return Err(Error::IndicatrixNotBall(ind.residual));
        }
        Ok(CircularRepresentation { domain: d.clone(), basis: ind.basis, indicatrix_residual: ind.residual })
    }

    fn apply_basis(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n).map(|i| (0..n).map(|k| self.basis[(i, k)] * x[k]).sum()).collect()
    }

    /// `Psi(x)` for `x` in the unit ball.
    pub fn map(&self, x: &[Complex64], s: &Settings) -> Result<Vec<Complex64>> {
        let r = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if r >= 1.0 {
            return Err(Error::OutsideBall(r));
        }
        if r == 0.0 {
            return Ok(self.domain.center.coords().to_vec());
        }
        let v = self.apply_basis(x);
        circular_representation(&self.domain, &v, Complex64::new(r, 0.0), s)
    }

    /// Real Jacobian of `Psi` at `x != 0`. Closed-form through the gauge for
    /// ball and circular domains, central differences otherwise.
    pub fn jacobian(&self, x: &[Complex64], s: &Settings) -> Result<DMatrix<f64>> {
        let n = x.len();
        let r = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if r == 0.0 {
            return Err(Error::AtOrigin);
        }
        let xr = real_vector(x);
        match &self.domain.kind {
            DomainKind::Convex { .. } => {
                let h = 1e-4 * r;
                let mut jac = DMatrix::zeros(2 * n, 2 * n);
                for k in 0..2 * n {
                    let col = numdiff::central_richardson(
                        |t| {
                            let mut y = xr.clone();
                            y[k] += t;
                            Ok(real_vector(&self.map(&as_complex(&y), s)?))
                        },
                        h,
                    )?;
                    jac.set_column(k, &col);
                }
                Ok(jac)
            }
            kind => {
                // Psi(x) = |x| B x / mu(B x)
                let bx = self.apply_basis(x);
                let (mu, grad_mu) = match kind {
                    DomainKind::Ball { radius } => {
                        let m = bx.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                        (m / radius, real_vector(&bx) / (m * radius))
                    }
                    DomainKind::Circular(g) => (g.mu(&bx)?, g.mu_gradient(&bx, s)?),
                    DomainKind::Convex { .. } => unreachable!(),
                };
                let bxr = real_vector(&bx);
                let mut jac = DMatrix::zeros(2 * n, 2 * n);
                for k in 0..2 * n {
                    let mut e = DVector::zeros(2 * n);
                    e[k] = 1.0;
                    let bd = real_vector(&self.apply_basis(&as_complex(&e)));
                    let dr = xr[k] / r;
                    let dmu = grad_mu.dot(&bd);
                    let col = &bxr * (dr / mu) + &bd * (r / mu) - &bxr * (r * dmu / (mu * mu));
                    jac.set_column(k, &col);
                }
                Ok(jac)
            }
        }
    }

    /// Pulled-back structure `D Psi^{-1} J_o D Psi` at `x`.
    pub fn structure(&self, x: &[Complex64], s: &Settings) -> Result<DMatrix<f64>> {
        let jac = self.jacobian(x, s)?;
        let inv = jac
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NumericDomain("circular representation is singular".into()))?;
        Ok(inv * standard_structure(x.len()) * jac)
    }

    /// Frame matrix of the normal-form deformation tensor at `x`.
    pub fn deformation(&self, x: &[Complex64], s: &Settings) -> Result<DMatrix<Complex64>> {
        let j = self.structure(x, s)?;
        phi_from_j(&j, &ComplexPoint::new(x.to_vec())?)
    }
}

/// Normal-form deformation tensor of a two-dimensional domain sampled on a
/// plan.
pub fn pushforward_deformation(d: &Domain, plan: &SamplingPlan, s: &Settings) -> Result<SampledDeformation> {
    if d.n != 2 {
        return Err(Error::InvalidInput("sampled normal forms are supported for n = 2".into()));
    }
    let rep = CircularRepresentation::new(d, s)?;
    let sampled = SampledDeformation::from_fn(plan, |x| Ok(rep.deformation(x.coords(), s)?[(0, 0)]))?;
    if sampled.max_abs() >= 1.0 {
        return Err(Error::DegenerateStructure(1.0 - sampled.max_abs().powi(2)));
    }
    Ok(sampled)
}

/// Center-based Monge-Ampere exhaustion as a scalar field: closed-form
/// `mu^2` for balls and quadratic gauges, numerical otherwise.
pub fn exhaustion_field<'a>(d: &'a Domain, s: &Settings) -> Result<Box<dyn ScalarField + 'a>> {
    match &d.kind {
        DomainKind::Ball { radius } => {
            let sum: Vec<String> = (1..=d.n).map(|i| format!("abs2(z{i})")).collect();
            let src = format!("{}*({})", 1.0 / (radius * radius), sum.join(" + "));
            Ok(Box::new(ExprField::parse(&src, d.n)?))
        }
        DomainKind::Circular(g) if g.power == 2 => Ok(Box::new(g.expr.clone())),
        _ => {
            let s = s.clone();
            Ok(Box::new(NumericExhaustion { d, s }))
        }
    }
}

struct NumericExhaustion<'a> {
    d: &'a Domain,
    s: Settings,
}

impl ScalarField for NumericExhaustion<'_> {
    fn dim(&self) -> usize {
        self.d.n
    }
    fn value(&self, x: &ComplexPoint) -> Result<f64> {
        ma_exhaustion(self.d, x.coords(), &self.s)
    }
}
