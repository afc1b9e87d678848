use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{complex_vector, ComplexPoint, ExprField, ScalarField, ZERO};
use crate::settings::Settings;

/// Gauge of a circular domain given through `mu^power = expr(z)`.
#[derive(Clone, Debug)]
pub struct Gauge {
    pub expr: ExprField,
    pub power: u32,
}

impl Gauge {
    /// Minkowski functional `mu(z)`.
    pub fn mu(&self, z: &[Complex64]) -> Result<f64> {
        let p = ComplexPoint::from_vec_unchecked(z.to_vec());
        let e = self.expr.value(&p)?;
        if e < 0.0 {
            return Err(Error::NumericDomain(format!("gauge expression is negative ({e})")));
        }
        Ok(e.powf(1.0 / self.power as f64))
    }

    /// Real gradient of `mu` (interleaved coordinates).
    pub fn mu_gradient(&self, z: &[Complex64], s: &Settings) -> Result<DVector<f64>> {
        let p = ComplexPoint::from_vec_unchecked(z.to_vec());
        let e = self.expr.value(&p)?;
        let de = self.expr.gradient(&p, s)?;
        let k = self.power as f64;
        Ok(de * (e.powf(1.0 / k - 1.0) / k))
    }
}

#[derive(Clone, Debug)]
pub enum DomainKind {
    /// Ball of the given radius around the origin.
    Ball { radius: f64 },
    /// Circular domain `{mu < 1}` with center at the origin.
    Circular(Gauge),
    /// `{rho < 0}` for a strictly convex defining function.
    Convex { rho: ExprField },
}

/// Bounded domain in C^n with a distinguished center.
#[derive(Clone, Debug)]
pub struct Domain {
    pub n: usize,
    pub kind: DomainKind,
    pub center: ComplexPoint,
}

/// JSON recipe form of a domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Ball {
        dimension: usize,
        #[serde(default = "one")]
        radius: f64,
    },
    Circular {
        dimension: usize,
        /// Expression for `mu^power` in `z1..zn`.
        gauge: String,
        #[serde(default = "two")]
        power: u32,
    },
    Convex {
        dimension: usize,
        rho: String,
        /// Center as `[re, im]` pairs.
        center: Vec<[f64; 2]>,
    },
}

fn one() -> f64 {
    1.0
}
fn two() -> u32 {
    2
}

impl DomainSpec {
    pub fn build(&self, s: &Settings) -> Result<Domain> {
        match self {
            DomainSpec::Ball { dimension, radius } => Domain::ball(*dimension, *radius),
            DomainSpec::Circular { dimension, gauge, power } => Domain::circular(*dimension, gauge, *power, s),
            DomainSpec::Convex { dimension, rho, center } => {
                let c = center.iter().map(|v| Complex64::new(v[0], v[1])).collect();
                Domain::convex(*dimension, rho, ComplexPoint::new(c)?, s)
            }
        }
    }
}

const HOMOGENEITY_PROBES: usize = 16;

impl Domain {
    pub fn ball(n: usize, radius: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput("dimension must be at least 2".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("radius {radius} must be positive")));
        }
        Ok(Domain { n, kind: DomainKind::Ball { radius }, center: ComplexPoint::origin(n) })
    }

    /// Circular domain with `mu^power = gauge`. Homogeneity
    /// `mu(lambda z) = |lambda| mu(z)` is checked on seeded random probes.
    pub fn circular(n: usize, gauge: &str, power: u32, s: &Settings) -> Result<Self> {
        let _ = s;
        if n < 2 {
            return Err(Error::InvalidInput("dimension must be at least 2".into()));
        }
        if power == 0 {
            return Err(Error::InvalidInput("gauge power must be positive".into()));
        }
        let g = Gauge { expr: ExprField::parse(gauge, n)?, power };
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..HOMOGENEITY_PROBES {
            let z: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let lam = Complex64::from_polar(rng.random_range(0.2..3.0), rng.random_range(0.0..std::f64::consts::TAU));
            let a = g.mu(&z.iter().map(|c| c * lam).collect::<Vec<_>>())?;
            let b = lam.norm() * g.mu(&z)?;
            if (a - b).abs() > 1e-10 * (1.0 + b) {
                return Err(Error::InvalidInput("gauge is not absolutely homogeneous of degree one".into()));
            }
            if b <= 0.0 {
                return Err(Error::InvalidInput("gauge must be positive away from the origin".into()));
            }
        }
        Ok(Domain { n, kind: DomainKind::Circular(g), center: ComplexPoint::origin(n) })
    }

    /// Convex domain `{rho < 0}` with center `center`. Strict convexity is
    /// checked through the Hessian of `rho` at boundary points along a set of
    /// rays from the center.
    pub fn convex(n: usize, rho: &str, center: ComplexPoint, s: &Settings) -> Result<Self> {
        if center.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: center.dim() });
        }
        let rho = ExprField::parse(rho, n)?;
        let d = Domain { n, kind: DomainKind::Convex { rho }, center };
        if d.rho(d.center.coords())? >= 0.0 {
            return Err(Error::InvalidInput("center must lie inside the domain".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0xc0ffee);
        for _ in 0..HOMOGENEITY_PROBES {
            let v: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let t = d.distance_to_boundary(d.center.coords(), &v)?;
            let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            let b: Vec<Complex64> = d.center.coords().iter().zip(&v).map(|(c, w)| c + w * (t / norm)).collect();
            let DomainKind::Convex { rho } = &d.kind else { unreachable!() };
            let h = rho.hessian(&ComplexPoint::from_vec_unchecked(b), s)?;
            let min = h.symmetric_eigen().eigenvalues.min();
            if min <= 0.0 {
                return Err(Error::InvalidInput(format!("defining function is not strictly convex (eigenvalue {min:e})")));
            }
        }
        Ok(d)
    }

    /// Defining function (negative inside).
    pub fn rho(&self, z: &[Complex64]) -> Result<f64> {
        match &self.kind {
            DomainKind::Ball { radius } => Ok(z.iter().map(|c| c.norm_sqr()).sum::<f64>() - radius * radius),
            DomainKind::Circular(g) => {
                let p = ComplexPoint::from_vec_unchecked(z.to_vec());
                Ok(g.expr.value(&p)? - 1.0)
            }
            DomainKind::Convex { rho } => rho.value(&ComplexPoint::from_vec_unchecked(z.to_vec())),
        }
    }

    /// Holomorphic Wirtinger gradient `d rho / dz_i`.
    pub fn rho_dz(&self, z: &[Complex64]) -> Vec<Complex64> {
        match &self.kind {
            DomainKind::Ball { .. } => z.iter().map(|c| c.conj()).collect(),
            DomainKind::Circular(g) => g.expr.wirtinger_gradient(&ComplexPoint::from_vec_unchecked(z.to_vec())),
            DomainKind::Convex { rho } => rho.wirtinger_gradient(&ComplexPoint::from_vec_unchecked(z.to_vec())),
        }
    }

    pub fn contains(&self, z: &[Complex64]) -> Result<bool> {
        Ok(self.rho(z)? < 0.0)
    }

    /// Minkowski functional for ball and circular kinds.
    pub fn gauge(&self, z: &[Complex64]) -> Option<Result<f64>> {
        match &self.kind {
            DomainKind::Ball { radius } => Some(Ok(z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt() / radius)),
            DomainKind::Circular(g) => Some(g.mu(z)),
            DomainKind::Convex { .. } => None,
        }
    }

    /// True when disks through the center are radial and known in closed form.
    pub fn has_radial_disks(&self) -> bool {
        !matches!(self.kind, DomainKind::Convex { .. })
    }

    /// Distance from `p` to the boundary along the real ray `p + t v / |v|`.
    pub fn distance_to_boundary(&self, p: &[Complex64], v: &[Complex64]) -> Result<f64> {
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateDirection);
        }
        if self.rho(p)? >= 0.0 {
            return Err(Error::InvalidInput("point is not inside the domain".into()));
        }
        let at = |t: f64| -> Result<f64> {
            let z: Vec<Complex64> = p.iter().zip(v).map(|(a, b)| a + b * (t / norm)).collect();
            self.rho(&z)
        };
        let mut hi = 1.0;
        let mut guard = 0;
        while at(hi)? < 0.0 {
            hi *= 2.0;
            guard += 1;
            if guard > 60 {
                return Err(Error::InvalidInput("domain is unbounded along a ray".into()));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if at(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Deterministic directions on the unit sphere of C^n covering moduli and
/// relative phases.
pub fn sphere_grid(n: usize, count: usize) -> Vec<Vec<Complex64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            // Spread |v_1|^2 uniformly and rotate the relative phases.
            let t = (k as f64 + 0.5) / count as f64;
            let mut v = vec![ZERO; n];
            let mut rest = 1.0f64;
            for (i, slot) in v.iter_mut().enumerate().take(n - 1) {
                let frac = if i == 0 { t } else { 0.5 };
                let m = (rest * frac).sqrt();
                *slot = Complex64::from_polar(m, golden * (k * (i + 1)) as f64);
                rest -= m * m;
            }
            v[n - 1] = Complex64::new(rest.max(0.0).sqrt(), 0.0);
            v
        })
        .collect()
}

/// Unit vector of a direction.
pub(crate) fn unit(v: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateDirection);
    }
    Ok((v.iter().map(|c| c / norm).collect(), norm))
}

/// Real Jacobian helper: complex vector of a real tangent vector.
pub(crate) fn as_complex(v: &DVector<f64>) -> Vec<Complex64> {
    complex_vector(v)
}

/// Inverse square root of a Hermitian positive definite matrix.
pub(crate) fn hermitian_inv_sqrt(h: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let eig = h.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::Positivity(eig.eigenvalues.min()));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(l.powf(-0.5), 0.0)));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.adjoint())
}
