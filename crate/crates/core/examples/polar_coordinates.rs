//! Polar charts `z -> (chart, w, zeta)` and the frame splitting at a point.

use circtype::geometry::{frames, from_polar, to_polar, ComplexPoint};
use circtype::Settings;
use num_complex::Complex64;

fn main() -> circtype::Result<()> {
    let s = Settings::default();
    let z = ComplexPoint::new(vec![Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.5)])?;
    let p = to_polar(&z, 1, &s)?;
    println!("chart {} w = {:?} zeta = {} (mu = {:.6})", p.chart, p.affine, p.fiber, p.mu());
    let back = from_polar(&p, &s)?;
    let err: f64 = back.coords().iter().zip(z.coords()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    println!("round trip error {err:e}");
    let f = frames(&z)?;
    println!("radial {:?}", f.radial);
    println!("normal frame {:?}", f.h_frame);
    Ok(())
}
