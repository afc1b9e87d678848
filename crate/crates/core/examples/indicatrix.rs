//! Kobayashi indicatrix at the center and its normalization to the unit ball.

use circtype::kobayashi::{indicatrix, Domain};
use circtype::Settings;

fn main() -> circtype::Result<()> {
    let s = Settings::default();
    let ellipse = Domain::circular(2, "abs2(z1) + 4*abs2(z2)", 2, &s)?;
    let ind = indicatrix(&ellipse, 32, &s)?;
    println!("C^2 at center: {}", ind.c2_at_center);
    println!("basis:\n{:.6}", ind.basis.map(|c| c.re));
    println!("normalization residual {:e}, kappa identity residual {:e}", ind.residual, ind.kappa_identity_residual());

    let quartic = Domain::circular(2, "abs2(z1)^2 + abs2(z2)^2", 4, &s)?;
    let ind = indicatrix(&quartic, 32, &s)?;
    println!("quartic gauge: C^2 at center {}, normalization residual {:.3}", ind.c2_at_center, ind.residual);
    Ok(())
}
