//! Fiber Fourier modes of a planted fiber polynomial and of the zero tensor.

use circtype::acs::DeformationTensor;
use circtype::spectrum::{default_tolerance, direction_grid, extract_grid, extract_modes, vanishing_order};
use circtype::Settings;
use num_complex::Complex64;

fn main() -> circtype::Result<()> {
    let s = Settings::default();
    let planted = DeformationTensor::fiber_polynomial(vec![(3, Complex64::new(0.2, -0.1)), (5, Complex64::new(0.0, 0.05))]);
    let dir = [Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)];
    for r in [0.2, 0.4, 0.6] {
        let sp = extract_modes(&planted, &dir, r, 8, 64)?;
        println!("r = {r}: c3 = {:.12} c5 = {:.12} |c4| = {:.1e}", sp.modes[3][(0, 0)], sp.modes[5][(0, 0)], sp.amplitude(4));
    }
    let grid = direction_grid(2, s.directions)?;
    for (name, phi) in [("planted", planted), ("zero", DeformationTensor::zero(2))] {
        let spectra = extract_grid(&phi, &grid, &s)?;
        let tol = default_tolerance(&spectra, &s);
        println!("{name}: vanishing order {:?} (tolerance {tol:e})", vanishing_order(&spectra, tol)?);
    }
    Ok(())
}
