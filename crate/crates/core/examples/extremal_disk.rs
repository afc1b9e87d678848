//! Extremal disks: the closed-form radial disk of a circular domain, the
//! penalized solver on the same domain, and a convex domain.

use circtype::kobayashi::{extremal_disk, solve_extremal_disk, Domain};
use circtype::geometry::ComplexPoint;
use circtype::Settings;
use num_complex::Complex64;

fn main() -> circtype::Result<()> {
    let s = Settings::default();
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let ellipse = Domain::circular(2, "abs2(z1) + 4*abs2(z2)", 2, &s)?;
    let origin = [c(0.0, 0.0), c(0.0, 0.0)];
    let v = [c(0.6, 0.0), c(0.0, 0.8)];
    let exact = extremal_disk(&ellipse, &origin, &v, &s)?;
    let solved = solve_extremal_disk(&ellipse, &origin, &v, &s)?;
    println!("ellipse: kappa analytic {:.10}, solver {:.10} ({} iterations)", exact.kappa, solved.kappa, solved.iterations);

    let convex = Domain::convex(2, "abs2(z1) + abs2(z2) + 0.3*abs2(z1)^2 - 1", ComplexPoint::new(vec![c(0.1, 0.0), c(0.0, 0.0)])?, &s)?;
    let d = extremal_disk(&convex, convex.center.coords(), &[c(1.0, 0.0), c(0.0, 0.5)], &s)?;
    println!("convex: kappa {:.8}, boundary penalty {:.1e}", d.kappa, d.penalty);
    for k in 0..4 {
        let z = d.disk.eval(Complex64::from_polar(1.0, k as f64 * std::f64::consts::FRAC_PI_2));
        println!("  f(e^(i k pi/2)), k = {k}: rho = {:.2e}", convex.rho(&z)?);
    }
    Ok(())
}
