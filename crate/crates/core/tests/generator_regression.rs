//! Pinned amplitude bounds and the Nijenhuis scaling of a non-integrable
//! profile in dimension 3.

use circtype::acs::{nijenhuis, AcsField, DeformedStructure};
use circtype::expr::{Formula, VarFamily};
use circtype::generator::{build_phi_leading, max_amplitude, GeneratorInput};
use circtype::geometry::ComplexPoint;
use circtype::spectrum::direction_grid;
use circtype::Settings;
use nalgebra::DVector;
use serde::Deserialize;

#[derive(Deserialize)]
struct Golden {
    cases: Vec<Case>,
    relative_tolerance: f64,
}

#[derive(Deserialize)]
struct Case {
    m: u32,
    fhat: String,
    dimension: usize,
    max_amplitude: f64,
}

#[test]
fn max_amplitude_matches_golden() {
    let golden: Golden = serde_json::from_str(include_str!("golden/max_amplitude.json")).unwrap();
    let s = Settings::default();
    for case in golden.cases {
        let fhat = Formula::parse(&case.fhat, VarFamily::Affine(case.dimension - 1)).unwrap();
        let got = max_amplitude(&fhat, case.m, case.dimension, &s).unwrap();
        let rel = (got - case.max_amplitude).abs() / case.max_amplitude;
        assert!(rel < golden.relative_tolerance, "{}: {got} vs {}", case.fhat, case.max_amplitude);
    }
}

fn max_nijenhuis(j: &dyn AcsField, x: &ComplexPoint, s: &Settings) -> f64 {
    let n2 = 2 * j.dim();
    let e = |k: usize| DVector::from_fn(n2, |i, _| if i == k { 1.0 } else { 0.0 });
    let mut worst: f64 = 0.0;
    for a in 0..n2 {
        for b in 0..n2 {
            worst = worst.max(nijenhuis(j, x, &e(a), &e(b), s).unwrap().norm());
        }
    }
    worst
}

#[test]
fn dimension_three_nijenhuis_is_quadratic_in_amplitude() {
    let s = Settings { nijenhuis_floor: 0.0, ..Settings::default() };
    let fhat = "abs2(w1) + conj(w1)*conj(w2)*w2 + conj(w2)^2";
    let x = ComplexPoint::new(direction_grid(3, 32).unwrap()[9].iter().map(|c| c * 0.6).collect()).unwrap();
    let values: Vec<f64> = [5e-3, 1e-2, 2e-2]
        .iter()
        .map(|&eps| {
            let out = build_phi_leading(&GeneratorInput::new(3, fhat, eps, 3).unwrap(), &s).unwrap();
            max_nijenhuis(&DeformedStructure::new(out.phi), &x, &s)
        })
        .collect();
    let slope = (values[2] / values[0]).ln() / 4f64.ln();
    assert!(values[0] > 1e-8, "{values:?}");
    assert!((slope - 2.0).abs() < 0.1, "slope {slope}, values {values:?}");
}
