//! Nijenhuis tensor of deformed structures: exactly integrable output in
//! dimension 2, quadratic defect for a generic profile in dimension 3.

use circtype::acs::{nijenhuis, AcsField, DeformedStructure};
use circtype::generator::{build_phi_leading, GeneratorInput};
use circtype::geometry::ComplexPoint;
use circtype::spectrum::direction_grid;
use circtype::Settings;
use nalgebra::DVector;

fn max_nijenhuis(j: &dyn AcsField, x: &ComplexPoint, s: &Settings) -> circtype::Result<f64> {
    let n2 = 2 * j.dim();
    let e = |k: usize| DVector::from_fn(n2, |i, _| if i == k { 1.0 } else { 0.0 });
    let mut worst: f64 = 0.0;
    for a in 0..n2 {
        for b in 0..n2 {
            worst = worst.max(nijenhuis(j, x, &e(a), &e(b), s)?.norm());
        }
    }
    Ok(worst)
}

fn main() -> circtype::Result<()> {
    let s = Settings { nijenhuis_floor: 0.0, ..Settings::default() };
    for (dim, fhat) in [(2, "abs2(w)"), (3, "abs2(w1) + conj(w1)*conj(w2)*w2 + conj(w2)^2")] {
        let x = ComplexPoint::new(direction_grid(dim, 32)?[9].iter().map(|c| c * 0.6).collect())?;
        let mut values = Vec::new();
        for eps in [5e-3, 1e-2, 2e-2] {
            let out = build_phi_leading(&GeneratorInput::new(3, fhat, eps, dim)?, &s)?;
            values.push(max_nijenhuis(&DeformedStructure::new(out.phi), &x, &s)?);
        }
        let slope = (values[2] / values[0]).ln() / 4f64.ln();
        println!("n = {dim}, fhat = {fhat}: |N| = {values:?}, log-log slope {slope:.3}");
    }
    Ok(())
}
