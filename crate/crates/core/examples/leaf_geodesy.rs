//! Geodesy and flatness residuals of radial leaves and of a non-leaf disk.

use circtype::acs::{DeformedStructure, StandardStructure};
use circtype::generator::{build_phi_leading, GeneratorInput};
use circtype::geometry::StandardExhaustion;
use circtype::kobayashi::DiskCoeffs;
use circtype::ma_verify::leaf_residuals;
use circtype::Settings;
use num_complex::Complex64;

fn main() -> circtype::Result<()> {
    let s = Settings::default();
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let tau = StandardExhaustion { n: 2 };
    let radial = DiskCoeffs::linear(&[c(0.0, 0.0); 2], &[c(0.6, 0.0), c(0.0, 0.8)]);
    let probes = [c(0.5, 0.1), c(-0.3, 0.6)];
    println!("ball, radial leaf: {:?}", leaf_residuals(&tau, &StandardStructure::new(2), &radial, &probes, &s)?);

    let bent = DiskCoeffs { coeffs: vec![vec![c(0.0, 0.0); 2], vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.2, 0.0)]] };
    println!("ball, bent disk: {:?}", leaf_residuals(&tau, &StandardStructure::new(2), &bent, &probes, &s)?);

    for eps in [5e-3, 1e-2, 2e-2] {
        let j = DeformedStructure::new(build_phi_leading(&GeneratorInput::new(3, "abs2(w)", eps, 2)?, &s)?.phi);
        println!("generated eps = {eps}: {:?}", leaf_residuals(&tau, &j, &radial, &probes, &s)?);
    }
    Ok(())
}
