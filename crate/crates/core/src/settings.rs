use serde::{Deserialize, Serialize};

/// Numerical knobs shared by the library. Every operation that discretizes
/// takes this record explicitly; `Settings::default()` reproduces the
/// documented defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Settings {
    /// Relative step for first derivatives of scalar fields.
    pub fd_step: f64,
    /// Relative step for second derivatives of scalar fields.
    pub fd_step_second: f64,
    /// Step for derivatives of structure-matrix fields (Nijenhuis, ddc with
    /// non-constant J).
    pub acs_step: f64,
    /// Nijenhuis residuals with norm below this are reported as exactly zero.
    pub nijenhuis_floor: f64,
    /// Chart operations reject |zeta| below this.
    pub fiber_min: f64,
    /// Step ladder for Richardson-extrapolated metric derivatives.
    pub curvature_steps: [f64; 3],
    /// Numerically defined metric blocks refuse probes closer than this to
    /// the center.
    pub curvature_min_radius: f64,
    /// Circle samples per fiber.
    pub samples: usize,
    /// Highest mode index extracted.
    pub modes: usize,
    /// Number of points of the direction grid.
    pub directions: usize,
    /// Extraction radius.
    pub radius: f64,
    /// Absolute floor of the vanishing tolerance.
    pub vanishing_floor: f64,
    /// Disk degree for the extremal-disk solver.
    pub disk_degree: usize,
    /// Boundary quadrature points for the extremal-disk solver.
    pub disk_quadrature: usize,
    /// Penalty continuation ladder.
    pub penalty_ladder: Vec<f64>,
    /// Iteration cap per penalty stage.
    pub solver_max_iter: usize,
    /// Required margin for the amplitude bound.
    pub amplitude_margin: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            fd_step: 1e-5,
            fd_step_second: 1e-4,
            acs_step: 1e-4,
            nijenhuis_floor: 1e-9,
            fiber_min: 1e-6,
            curvature_steps: [1e-2, 5e-3, 2.5e-3],
            curvature_min_radius: 0.05,
            samples: 64,
            modes: 16,
            directions: 32,
            radius: 0.5,
            vanishing_floor: 1e-10,
            disk_degree: 32,
            disk_quadrature: 128,
            penalty_ladder: vec![1e2, 1e4, 1e6],
            solver_max_iter: 4000,
            amplitude_margin: 0.1,
        }
    }
}

impl Settings {
    /// Range checks; violations are configuration errors.
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        let positive = [
            ("fd_step", self.fd_step),
            ("fd_step_second", self.fd_step_second),
            ("acs_step", self.acs_step),
            ("fiber_min", self.fiber_min),
            ("curvature_min_radius", self.curvature_min_radius),
            ("vanishing_floor", self.vanishing_floor),
            ("amplitude_margin", self.amplitude_margin),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite (got {v})")));
            }
        }
        if !(self.nijenhuis_floor >= 0.0) {
            return Err(Error::Config("nijenhuis_floor must be non-negative".into()));
        }
        let c = self.curvature_steps;
        if !(c[0] > c[1] && c[1] > c[2] && c[2] > 0.0) || (c[0] / c[1] - c[1] / c[2]).abs() > 1e-12 * c[0] / c[1] {
            return Err(Error::Config("curvature_steps must be a decreasing geometric ladder".into()));
        }
        if !(self.radius > 0.0 && self.radius < 1.0) {
            return Err(Error::Config(format!("radius must lie in (0, 1) (got {})", self.radius)));
        }
        if self.modes == 0 || self.samples < 2 * self.modes + 2 {
            return Err(Error::Aliasing { samples: self.samples, modes: self.modes });
        }
        if self.directions == 0 {
            return Err(Error::Config("directions must be positive".into()));
        }
        if self.disk_degree < 2 || self.disk_quadrature < 2 * self.disk_degree + 2 {
            return Err(Error::Config("disk_quadrature must be at least 2 * disk_degree + 2, with degree >= 2".into()));
        }
        if self.penalty_ladder.is_empty() || self.penalty_ladder.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::Config("penalty_ladder must be a non-empty list of positive weights".into()));
        }
        if self.solver_max_iter == 0 {
            return Err(Error::Config("solver_max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_bad_values_do_not() {
        Settings::default().validate().unwrap();
        let s = Settings { samples: 20, ..Settings::default() };
        assert!(matches!(s.validate(), Err(crate::Error::Aliasing { .. })));
        let s = Settings { radius: 1.5, ..Settings::default() };
        assert!(s.validate().is_err());
        let s = Settings { curvature_steps: [1e-2, 1e-3, 5e-4], ..Settings::default() };
        assert!(s.validate().is_err());
    }
}
