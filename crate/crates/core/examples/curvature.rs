//! Christoffel symbols and curvature of a metric block: leaf shortcut against
//! the full formula, and a leaf derivative of the curvature.

use circtype::geometry::ComplexPoint;
use circtype::ma_verify::{christoffel, curvature_component, leaf_curvature_derivative, CurvatureMethod, ExprMetric, Slots};
use circtype::Settings;
use num_complex::Complex64;

fn main() -> circtype::Result<()> {
    let s = Settings::default();
    let w = ExprMetric::diagonal_override(2, 1, "1 + abs2(z1)")?;
    let o = ComplexPoint::origin(2);
    let sl = Slots::new(0, 0, 1, 1);
    let short = curvature_component(&w, &o, sl, CurvatureMethod::LeafShortcut { leaf: 0 }, &s)?;
    let full = curvature_component(&w, &o, sl, CurvatureMethod::Full, &s)?;
    println!("R(1,1,2,2) at 0: shortcut {short:.10}, full {full:.10}");
    let x = ComplexPoint::new(vec![Complex64::new(0.3, -0.2), Complex64::new(0.1, 0.0)])?;
    println!("Gamma_(12|2) at {:?} = {:.10}", x.coords(), christoffel(&w, &x, 0, 1, 1, &s)?);

    let quartic = ExprMetric::diagonal_override(2, 1, "1 + abs2(z1)^2")?;
    let v = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    println!("d d-bar R along the leaf: {:.6}", leaf_curvature_derivative(&quartic, &v, sl, 1, &s)?);
    Ok(())
}
