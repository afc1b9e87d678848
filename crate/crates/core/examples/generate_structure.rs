//! Leading-order deformation tensor with planted mode 2m, checked against the
//! direct composition and the structural constraints.

use circtype::acs::{check_bound_constraint, check_hermitian_constraint};
use circtype::generator::{build_phi_leading, compose_direct, max_amplitude, GeneratorInput};
use circtype::geometry::ComplexPoint;
use circtype::spectrum::{default_tolerance, direction_grid, extract_grid, vanishing_order};
use circtype::Settings;
use num_complex::Complex64;

fn main() -> circtype::Result<()> {
    let s = Settings::default();
    let input = GeneratorInput::new(3, "abs2(w)", 1e-2, 2)?;
    println!("admissible amplitude bound {:.6}", max_amplitude(&input.fhat, 3, 2, &s)?);
    let out = build_phi_leading(&input, &s)?;
    let grid = direction_grid(2, s.directions)?;
    let spectra = extract_grid(&out.phi, &grid, &s)?;
    println!("vanishing order {:?}", vanishing_order(&spectra, default_tolerance(&spectra, &s))?);

    let x = ComplexPoint::new(vec![Complex64::new(0.2, 0.1), Complex64::new(0.4, -0.1)])?;
    let closed = out.phi.frame_matrix(&x)?[(0, 0)];
    let direct = compose_direct(&input.fhat, 3, &x, &s)?[(0, 0)] * input.epsilon;
    println!("closed form {closed:.10} vs direct {direct:.10}");
    println!("hermitian residual {:e}", check_hermitian_constraint(&out.phi, &x, &s)?);
    println!("bound margin {:.6}", check_bound_constraint(&out.phi, &x)?);
    Ok(())
}
