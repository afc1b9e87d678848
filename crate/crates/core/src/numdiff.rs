//! Central finite differences with Richardson extrapolation.
//!
//! Values are anything that supports linear combination (scalars, complex
//! scalars, nalgebra matrices); the closures map a step parameter `t` to the
//! sampled value, so callers decide the direction in which they move.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::Result;

pub trait FdValue: Clone {
    /// `a * self + b * other`
    fn lin(&self, a: f64, other: &Self, b: f64) -> Self;
}

impl FdValue for f64 {
    fn lin(&self, a: f64, other: &Self, b: f64) -> Self {
        a * self + b * other
    }
}

impl FdValue for Complex64 {
    fn lin(&self, a: f64, other: &Self, b: f64) -> Self {
        self * a + other * b
    }
}

impl FdValue for DMatrix<f64> {
    fn lin(&self, a: f64, other: &Self, b: f64) -> Self {
        self * a + other * b
    }
}

impl FdValue for DVector<f64> {
    fn lin(&self, a: f64, other: &Self, b: f64) -> Self {
        self * a + other * b
    }
}

impl FdValue for DMatrix<Complex64> {
    fn lin(&self, a: f64, other: &Self, b: f64) -> Self {
        self.map(|v| v * a) + other.map(|v| v * b)
    }
}

impl FdValue for DVector<Complex64> {
    fn lin(&self, a: f64, other: &Self, b: f64) -> Self {
        self.map(|v| v * a) + other.map(|v| v * b)
    }
}

/// Plain central difference `(g(h) - g(-h)) / 2h`.
pub fn central<T: FdValue>(g: impl Fn(f64) -> Result<T>, h: f64) -> Result<T> {
    let p = g(h)?;
    let m = g(-h)?;
    Ok(p.lin(0.5 / h, &m, -0.5 / h))
}

/// Central difference at steps `h` and `h/2` combined to cancel the h^2 term.
pub fn central_richardson<T: FdValue>(g: impl Fn(f64) -> Result<T>, h: f64) -> Result<T> {
    let d1 = central(&g, h)?;
    let d2 = central(&g, 0.5 * h)?;
    Ok(d2.lin(4.0 / 3.0, &d1, -1.0 / 3.0))
}

/// Second difference `(g(h) - 2 g(0) + g(-h)) / h^2`.
pub fn second_central<T: FdValue>(g: impl Fn(f64) -> Result<T>, h: f64) -> Result<T> {
    let p = g(h)?;
    let z = g(0.0)?;
    let m = g(-h)?;
    let s = p.lin(1.0, &m, 1.0);
    Ok(s.lin(1.0 / (h * h), &z, -2.0 / (h * h)))
}

/// Neville-style elimination of the even error terms h^2, h^4, ... for
/// estimates computed on a geometric ladder `h, h/r, h/r^2, ...`.
/// Returns the most extrapolated value.
pub fn richardson<T: FdValue>(estimates: &[T], ratio: f64) -> T {
    assert!(!estimates.is_empty(), "richardson needs at least one estimate");
    let mut level: Vec<T> = estimates.to_vec();
    let mut factor = ratio * ratio;
    while level.len() > 1 {
        level = level
            .windows(2)
            .map(|w| w[1].lin(factor / (factor - 1.0), &w[0], -1.0 / (factor - 1.0)))
            .collect();
        factor *= ratio * ratio;
    }
    level.pop().expect("non-empty")
}

/// Central differences on an explicit step ladder (each step the previous
/// divided by `ratio`), extrapolated.
pub fn central_ladder<T: FdValue>(g: impl Fn(f64) -> Result<T>, steps: &[f64]) -> Result<T> {
    let ratio = ladder_ratio(steps);
    let est = steps.iter().map(|&h| central(&g, h)).collect::<Result<Vec<_>>>()?;
    Ok(richardson(&est, ratio))
}

/// Second differences on a step ladder, extrapolated.
pub fn second_ladder<T: FdValue>(g: impl Fn(f64) -> Result<T>, steps: &[f64]) -> Result<T> {
    let ratio = ladder_ratio(steps);
    let est = steps.iter().map(|&h| second_central(&g, h)).collect::<Result<Vec<_>>>()?;
    Ok(richardson(&est, ratio))
}

fn ladder_ratio(steps: &[f64]) -> f64 {
    if steps.len() < 2 {
        2.0
    } else {
        steps[0] / steps[1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_beats_plain_central_on_sine() {
        let g = |t: f64| Ok((0.7 + t).sin());
        let exact = 0.7f64.cos();
        let plain = central(g, 1e-2).unwrap();
        let rich = central_richardson(g, 1e-2).unwrap();
        assert!((plain - exact).abs() > 1e-6);
        assert!((rich - exact).abs() < 1e-10);
    }

    #[test]
    fn ladder_extrapolation_of_second_derivative() {
        let g = |t: f64| Ok((0.3 + t).exp());
        let est = second_ladder(g, &[1e-2, 5e-3, 2.5e-3]).unwrap();
        assert!((est - 0.3f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn matrices_differentiate_entrywise() {
        let g = |t: f64| Ok(DMatrix::from_row_slice(1, 2, &[t * t, (2.0 * t).sin()]));
        let d = central_richardson(g, 1e-3).unwrap();
        assert!(d[(0, 0)].abs() < 1e-12);
        assert!((d[(0, 1)] - 2.0).abs() < 1e-10);
    }
}
