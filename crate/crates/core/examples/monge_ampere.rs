//! Monge-Ampere residuals and the foliation kernel for the ball, a circular
//! gauge and a generated structure.

use circtype::acs::{DeformedStructure, StandardStructure};
use circtype::generator::{build_phi_leading, GeneratorInput};
use circtype::geometry::{ComplexPoint, ExprField, StandardExhaustion};
use circtype::ma_verify::{foliation_kernel, kahler_metric, line_angle, ma_residuals};
use circtype::Settings;
use num_complex::Complex64;

fn main() -> circtype::Result<()> {
    let s = Settings::default();
    let x = ComplexPoint::new(vec![Complex64::new(0.3, 0.2), Complex64::new(0.1, -0.4)])?;
    let std_j = StandardStructure::new(2);

    let ball = StandardExhaustion { n: 2 };
    let r = ma_residuals(&ball, &std_j, &x, &s)?;
    println!("ball: det {:e}, kernel angle {:e}", r.det_residual, line_angle(&foliation_kernel(&ball, &std_j, &x, &s)?, x.coords()));

    let ellipse = ExprField::parse("abs2(z1) + 4*abs2(z2)", 2)?;
    let r = ma_residuals(&ellipse, &std_j, &x, &s)?;
    println!("ellipse gauge: det {:e}, min eigenvalue {:.4}", r.det_residual, r.min_eig_ddc_tau);

    let out = build_phi_leading(&GeneratorInput::new(3, "abs2(w)", 2e-2, 2)?, &s)?;
    let j = DeformedStructure::new(out.phi);
    let r = ma_residuals(&ball, &j, &x, &s)?;
    let k = kahler_metric(&ball, &j, &x, &s)?;
    println!("generated: det {:e}, gap ratio {:.2e}, J-anti-invariant defect {:e}", r.det_residual, r.gap_ratio, k.defect);
    Ok(())
}
