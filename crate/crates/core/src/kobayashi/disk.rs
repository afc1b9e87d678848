use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::domain::{unit, Domain};
use crate::error::{Error, Result};
use crate::geometry::ZERO;
use crate::settings::Settings;

/// Taylor coefficients `a_0..a_N` of a holomorphic disk `f(zeta) = sum a_j zeta^j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskCoeffs {
    pub coeffs: Vec<Vec<Complex64>>,
}

impl DiskCoeffs {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].len()
    }

    /// Disk `zeta -> center + zeta v`.
    pub fn linear(center: &[Complex64], v: &[Complex64]) -> Self {
        DiskCoeffs { coeffs: vec![center.to_vec(), v.to_vec()] }
    }

    fn horner(&self, zeta: Complex64, order: usize) -> Vec<Complex64> {
        let n = self.dim();
        let mut acc = vec![ZERO; n];
        for j in (order..self.coeffs.len()).rev() {
            let factor: f64 = (0..order).map(|k| (j - k) as f64).product();
            for i in 0..n {
                acc[i] = acc[i] * zeta + self.coeffs[j][i] * factor;
            }
        }
        acc
    }

    pub fn eval(&self, zeta: Complex64) -> Vec<Complex64> {
        self.horner(zeta, 0)
    }

    pub fn derivative(&self, zeta: Complex64) -> Vec<Complex64> {
        self.horner(zeta, 1)
    }

    pub fn second_derivative(&self, zeta: Complex64) -> Vec<Complex64> {
        self.horner(zeta, 2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiskMethod {
    Analytic,
    Solver,
}

/// Extremal disk with `f(0) = p`, `f'(0) = lambda v / |v|`, `lambda > 0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtremalDisk {
    pub disk: DiskCoeffs,
    pub lambda: f64,
    /// `kappa(v) = |v| / lambda`.
    pub kappa: f64,
    /// `int_0^{2 pi} rho(f(e^{i theta}))^2 d theta` (quadrature).
    pub penalty: f64,
    pub iterations: usize,
    pub method: DiskMethod,
}

/// Extremal disk through `p` tangent to `v`. Disks through the center of ball
/// and circular domains are the radial disks; everything else is solved.
pub fn extremal_disk(d: &Domain, p: &[Complex64], v: &[Complex64], s: &Settings) -> Result<ExtremalDisk> {
    if p.len() != d.n || v.len() != d.n {
        return Err(Error::DimensionMismatch { expected: d.n, got: p.len().min(v.len()) });
    }
    let (vhat, norm) = unit(v)?;
    let at_center = p.iter().zip(d.center.coords()).all(|(a, b)| (a - b).norm() == 0.0);
    if at_center && d.has_radial_disks() {
        let mu = d.gauge(&vhat).expect("radial kinds have a gauge")?;
        let lambda = 1.0 / mu;
        let a1: Vec<Complex64> = vhat.iter().map(|c| c * lambda).collect();
        return Ok(ExtremalDisk {
            disk: DiskCoeffs::linear(p, &a1),
            lambda,
            kappa: norm / lambda,
            penalty: 0.0,
            iterations: 0,
            method: DiskMethod::Analytic,
        });
    }
    solve_extremal_disk(d, p, v, s)
}

/// Kobayashi metric `kappa(v)` at `p`.
pub fn kobayashi_metric(d: &Domain, p: &[Complex64], v: &[Complex64], s: &Settings) -> Result<f64> {
    Ok(extremal_disk(d, p, v, s)?.kappa)
}

struct Problem<'a> {
    d: &'a Domain,
    p: Vec<Complex64>,
    vhat: Vec<Complex64>,
    degree: usize,
    /// Powers `zeta_q^j` for quadrature nodes q and j = 0..=degree.
    powers: Vec<Vec<Complex64>>,
    weight: f64,
}

impl Problem<'_> {
    fn unknowns(&self) -> usize {
        1 + 2 * self.d.n * (self.degree - 1)
    }

    fn disk(&self, x: &DVector<f64>) -> DiskCoeffs {
        let n = self.d.n;
        let mut coeffs = vec![self.p.clone(), self.vhat.iter().map(|c| c * x[0]).collect()];
        for j in 2..=self.degree {
            let base = 1 + 2 * n * (j - 2);
            coeffs.push((0..n).map(|i| Complex64::new(x[base + 2 * i], x[base + 2 * i + 1])).collect());
        }
        DiskCoeffs { coeffs }
    }

    fn boundary(&self, x: &DVector<f64>) -> Vec<Vec<Complex64>> {
        let disk = self.disk(x);
        let n = self.d.n;
        self.powers
            .iter()
            .map(|pw| {
                let mut z = vec![ZERO; n];
                for (j, c) in disk.coeffs.iter().enumerate() {
                    for i in 0..n {
                        z[i] += c[i] * pw[j];
                    }
                }
                z
            })
            .collect()
    }

    /// Quadrature of `rho^2` over the boundary circle.
    fn penalty(&self, x: &DVector<f64>) -> Result<f64> {
        let mut acc = 0.0;
        for z in self.boundary(x) {
            acc += self.d.rho(&z)?.powi(2);
        }
        Ok(acc * self.weight)
    }

    fn objective(&self, x: &DVector<f64>, beta: f64) -> Result<(f64, DVector<f64>)> {
        let n = self.d.n;
        let mut grad = DVector::zeros(x.len());
        let mut pen = 0.0;
        for (q, z) in self.boundary(x).iter().enumerate() {
            let r = self.d.rho(z)?;
            pen += r * r;
            let dz = self.d.rho_dz(z);
            // d(rho^2) = 2 rho * 2 Re(sum_i drho/dz_i dz_i)
            let pw = &self.powers[q];
            let c: Vec<Complex64> = dz.iter().map(|g| g * (4.0 * r)).collect();
            let lam: Complex64 = (0..n).map(|i| c[i] * self.vhat[i]).sum::<Complex64>() * pw[1];
            grad[0] += lam.re;
            for j in 2..=self.degree {
                let base = 1 + 2 * n * (j - 2);
                for i in 0..n {
                    let t = c[i] * pw[j];
                    grad[base + 2 * i] += t.re;
                    grad[base + 2 * i + 1] -= t.im;
                }
            }
        }
        grad *= beta * self.weight;
        grad[0] -= 1.0;
        let f = -x[0] + beta * self.weight * pen;
        if !f.is_finite() {
            return Err(Error::NumericDomain("disk objective is not finite".into()));
        }
        Ok((f, grad))
    }
}

/// Penalized maximization of `lambda` over disks of the configured degree,
/// with boundary penalty continuation and a BFGS inner solver.
pub fn solve_extremal_disk(d: &Domain, p: &[Complex64], v: &[Complex64], s: &Settings) -> Result<ExtremalDisk> {
    if p.len() != d.n || v.len() != d.n {
        return Err(Error::DimensionMismatch { expected: d.n, got: p.len().min(v.len()) });
    }
    let (vhat, norm) = unit(v)?;
    if !d.contains(p)? {
        return Err(Error::InvalidInput("base point must lie inside the domain".into()));
    }
    if s.disk_degree < 2 || s.disk_quadrature < 2 * s.disk_degree + 2 {
        return Err(Error::InvalidInput("disk quadrature must exceed twice the degree".into()));
    }
    let q = s.disk_quadrature;
    let powers = (0..q)
        .map(|k| {
            let z = Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / q as f64);
            let mut pw = Vec::with_capacity(s.disk_degree + 1);
            let mut acc = Complex64::new(1.0, 0.0);
            for _ in 0..=s.disk_degree {
                pw.push(acc);
                acc *= z;
            }
            pw
        })
        .collect();
    let prob = Problem {
        d,
        p: p.to_vec(),
        vhat: vhat.clone(),
        degree: s.disk_degree,
        powers,
        weight: std::f64::consts::TAU / q as f64,
    };
    let mut x = DVector::zeros(prob.unknowns());
    x[0] = d.distance_to_boundary(p, &vhat)?;
    let mut iterations = 0;
    for &beta in &s.penalty_ladder {
        let (xn, it) = bfgs(|y| prob.objective(y, beta), x, s.solver_max_iter)?;
        x = xn;
        iterations += it;
    }
    let penalty = prob.penalty(&x)?;
    let beta_last = s.penalty_ladder.last().copied().unwrap_or(0.0);
    if penalty > 1e-8 || x[0] <= 0.0 {
        return Err(Error::NonConvergence { iterations, penalty: beta_last.max(penalty) });
    }
    let lambda = x[0];
    Ok(ExtremalDisk { disk: prob.disk(&x), lambda, kappa: norm / lambda, penalty, iterations, method: DiskMethod::Solver })
}

/// BFGS with Armijo backtracking. Returns the final point and the number of
/// iterations used.
fn bfgs(f: impl Fn(&DVector<f64>) -> Result<(f64, DVector<f64>)>, x0: DVector<f64>, max_iter: usize) -> Result<(DVector<f64>, usize)> {
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut g) = f(&x)?;
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;
    for it in 0..max_iter {
        let gnorm = g.amax();
        if gnorm < 1e-11 {
            return Ok((x, it));
        }
        let mut dir = -(&h * &g);
        let mut slope = g.dot(&dir);
        if slope >= 0.0 {
            h = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = g.dot(&dir);
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn = &x + &dir * t;
            if let Ok((fn_, gn)) = f(&xn) {
                if fn_ <= fx + 1e-4 * t * slope {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            return Ok((x, it));
        };
        let sv = &xn - &x;
        let yv = &gn - &g;
        let sy = sv.dot(&yv);
        if sy > 1e-300 {
            if !scaled {
                h *= sy / yv.dot(&yv);
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            // H' = H - rho (s y^T H + H y s^T) + (rho^2 y^T H y + rho) s s^T
            h -= (&sv * hy.transpose() + &hy * sv.transpose()) * rho;
            h += &sv * sv.transpose() * (rho * rho * yhy + rho);
        }
        let df = (fx - fn_).abs();
        x = xn;
        fx = fn_;
        g = gn;
        if df < 1e-16 * (1.0 + fx.abs()) && sv.amax() < 1e-15 {
            return Ok((x, it + 1));
        }
    }
    Ok((x, max_iter))
}

/// Point `f^v(zeta)` of the extremal disk through the center tangent to `v`.
pub fn circular_representation(d: &Domain, v: &[Complex64], zeta: Complex64, s: &Settings) -> Result<Vec<Complex64>> {
    if zeta.norm() >= 1.0 {
        return Err(Error::OutsideBall(zeta.norm()));
    }
    let disk = extremal_disk(d, d.center.coords(), v, s)?;
    Ok(disk.disk.eval(zeta))
}
