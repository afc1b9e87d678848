//! Sampling a tensor on a grid, JSON round trip, and interpolated evaluation.

use circtype::acs::{DeformationTensor, SampledDeformation, SamplingPlan};
use circtype::geometry::ComplexPoint;
use num_complex::Complex64;

fn main() -> circtype::Result<()> {
    let phi = DeformationTensor::fiber_polynomial(vec![(3, Complex64::new(0.2, 0.1))]);
    let plan = SamplingPlan::uniform(0.2, 0.8, 4, 0.6, 9, 32);
    let sampled = SampledDeformation::from_tensor(&phi, &plan)?;
    let text = sampled.to_json()?;
    let back = DeformationTensor::sampled(SampledDeformation::from_json(&text)?);
    let x = ComplexPoint::new(vec![Complex64::new(0.1, 0.05), Complex64::new(0.5, 0.2)])?;
    let exact = phi.frame_matrix(&x)?[(0, 0)];
    let interp = back.frame_matrix(&x)?[(0, 0)];
    println!("{} bytes of JSON; exact {exact:.6}, interpolated {interp:.6}", text.len());
    Ok(())
}
