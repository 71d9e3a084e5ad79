//! Upwind dynamics: velocities, right-hand side, energy, dissipation,
//! time integration, stationarity and brute-force minimisation.

mod export;
mod field;
mod integrate;
mod minimize;
mod stationarity;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use export::{fmt_f64, write_diagnostics_json, write_trajectory_csv, TRAJECTORY_HEADER};
pub use field::{center_of_mass_drift, dissipation, energy, potentials, rhs, velocity};
pub use integrate::{
    integrate, integrate_with, IntegrateOptions, Outcome, Sampling, Trajectory, TrajectoryPoint,
};
pub use minimize::{brute_force_minimize, simplex_grid, Minimizer, DEFAULT_MAX_PAIRS};
pub use stationarity::{is_stationary, StationarityReport, Violation};

/// Mobility m(r, s) = r^θ₁ (1 − s)^θ₂ with 0⁰ = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mobility {
    pub theta1: f64,
    pub theta2: f64,
}

impl Mobility {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        for (name, t) in [("theta1", theta1), ("theta2", theta2)] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {t}")));
            }
        }
        Ok(Self { theta1, theta2 })
    }

    /// m(r, s) = r.
    pub fn linear() -> Self {
        Self {
            theta1: 1.0,
            theta2: 0.0,
        }
    }

    /// m(r, s) = r (1 − s).
    pub fn volume_filling() -> Self {
        Self {
            theta1: 1.0,
            theta2: 1.0,
        }
    }

    #[inline]
    pub fn eval(&self, r: f64, s: f64) -> f64 {
        let head = if self.theta1 == 1.0 {
            r
        } else if self.theta1 == 0.0 {
            1.0
        } else {
            r.powf(self.theta1)
        };
        let room = (1.0 - s).max(0.0);
        let tail = if self.theta2 == 0.0 {
            1.0
        } else if self.theta2 == 1.0 {
            room
        } else {
            room.powf(self.theta2)
        };
        head * tail
    }

    /// Upper density threshold S: 1 when θ₂ > 0, unbounded otherwise.
    pub fn threshold(&self) -> f64 {
        if self.theta2 > 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    }

    /// m(0, s) = 0 for every s, so empty vertices emit nothing.
    pub fn upwind_admissible(&self) -> bool {
        self.theta1 > 0.0
    }
}

impl Default for Mobility {
    fn default() -> Self {
        Self::linear()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsParams {
    pub p: f64,
    pub beta: [f64; 2],
    #[serde(default)]
    pub mobility: Mobility,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default = "default_tol")]
    pub stationarity_tol: f64,
    pub t_end: f64,
}

fn default_dt_max() -> f64 {
    1e-2
}

fn default_cfl() -> f64 {
    0.5
}

fn default_tol() -> f64 {
    1e-10
}

impl DynamicsParams {
    pub fn new(p: f64, beta: [f64; 2], mobility: Mobility, t_end: f64) -> Self {
        Self {
            p,
            beta,
            mobility,
            dt_max: default_dt_max(),
            cfl_safety: default_cfl(),
            stationarity_tol: default_tol(),
            t_end,
        }
    }

    /// p = 2, β = (1, 1), linear mobility.
    pub fn quadratic(t_end: f64) -> Self {
        Self::new(2.0, [1.0, 1.0], Mobility::linear(), t_end)
    }

    /// Conjugate exponent q = p / (p − 1).
    pub fn q(&self) -> f64 {
        if self.p == 2.0 {
            2.0
        } else {
            self.p / (self.p - 1.0)
        }
    }

    /// Checks everything that does not depend on the time horizon.
    pub fn validate_field(&self) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::InvalidParameter(format!("p must lie in (1, inf), got {}", self.p)));
        }
        if self.beta.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {:?}", self.beta)));
        }
        Mobility::new(self.mobility.theta1, self.mobility.theta2)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_field()?;
        if !self.mobility.upwind_admissible() {
            return Err(Error::InvalidParameter(
                "theta1 = 0 is not upwind admissible and cannot drive the dynamics".into(),
            ));
        }
        if !(self.dt_max > 0.0) {
            return Err(Error::InvalidParameter(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cfl_safety must lie in (0, 1), got {}",
                self.cfl_safety
            )));
        }
        if !(self.stationarity_tol >= 0.0) {
            return Err(Error::InvalidParameter("stationarity_tol must be nonnegative".into()));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidParameter(format!("t_end must be positive, got {}", self.t_end)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mobility_family() {
        let lin = Mobility::linear();
        assert_eq!(lin.eval(0.0, 0.7), 0.0);
        assert_eq!(lin.eval(0.3, 5.0), 0.3);
        assert_eq!(lin.threshold(), f64::INFINITY);
        let vf = Mobility::volume_filling();
        assert_eq!(vf.eval(0.5, 0.5), 0.25);
        assert_eq!(vf.eval(0.5, 1.0), 0.0);
        assert_eq!(vf.threshold(), 1.0);
        let m = Mobility::new(0.5, 0.0).unwrap();
        assert_eq!(m.eval(0.25, 0.9), 0.5);
        let flat = Mobility::new(0.0, 0.0).unwrap();
        assert_eq!(flat.eval(0.0, 0.0), 1.0);
        assert!(!flat.upwind_admissible());
        assert!(Mobility::new(1.5, 0.0).is_err());
    }

    #[test]
    fn conjugate_exponent() {
        for p in [1.65, 2.0, 3.0, 5.0] {
            let params = DynamicsParams::new(p, [1.0, 1.0], Mobility::linear(), 1.0);
            assert!((params.q() * (p - 1.0) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn validation() {
        let mut params = DynamicsParams::quadratic(1.0);
        assert!(params.validate().is_ok());
        params.p = 1.0;
        assert!(params.validate().is_err());
        let mut params = DynamicsParams::quadratic(1.0);
        params.beta = [1.0, 0.0];
        assert!(params.validate().is_err());
        let mut params = DynamicsParams::quadratic(1.0);
        params.mobility = Mobility::new(0.0, 1.0).unwrap();
        assert!(params.validate_field().is_ok());
        assert!(params.validate().is_err());
    }

    #[test]
    fn params_json_defaults() {
        let p: DynamicsParams = serde_json::from_str(r#"{"p":2,"beta":[1,2],"t_end":3}"#).unwrap();
        assert_eq!(p.dt_max, 1e-2);
        assert_eq!(p.cfl_safety, 0.5);
        assert_eq!(p.mobility, Mobility::linear());
        assert!(serde_json::from_str::<DynamicsParams>(r#"{"p":2,"beta":[1,2],"t_end":3,"x":1}"#).is_err());
    }
}
