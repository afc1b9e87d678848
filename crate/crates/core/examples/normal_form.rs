//! Normal form of a linear image of the ball: circular representation and the
//! pushed-forward deformation tensor.

use circtype::acs::SamplingPlan;
use circtype::kobayashi::{pushforward_deformation, CircularRepresentation, Domain};
use circtype::Settings;
use num_complex::Complex64;

fn main() -> circtype::Result<()> {
    let s = Settings::default();
    let d = Domain::circular(2, "abs2(z1) + 4*abs2(z2)", 2, &s)?;
    let rep = CircularRepresentation::new(&d, &s)?;
    let x = [Complex64::new(0.3, 0.1), Complex64::new(0.2, -0.4)];
    println!("Psi({x:?}) = {:?}", rep.map(&x, &s)?);
    let plan = SamplingPlan::uniform(0.3, 0.7, 3, 0.5, 5, 8);
    let phi = pushforward_deformation(&d, &plan, &s)?;
    println!("{} samples, max |phi| = {:e}", phi.values.len(), phi.max_abs());
    Ok(())
}
