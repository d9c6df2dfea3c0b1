//! Dimensional constants shared by every model in the crate.

use crate::{Error, Result};

/// The four dimensional symbols appearing in the Hamiltonians.
///
/// Defaults are natural units (all 1.0). Formulas keep the constants symbolic
/// so SI values work as well; nothing in the crate assumes a particular unit
/// system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant.
    pub hbar: f64,
    /// Particle mass.
    pub mass: f64,
    /// Particle charge (coupling constant).
    pub charge: f64,
    /// Speed of light.
    pub light_speed: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::natural()
    }
}

impl PhysicalConstants {
    /// Natural units: hbar = m = q = c = 1.
    pub const fn natural() -> Self {
        PhysicalConstants {
            hbar: 1.0,
            mass: 1.0,
            charge: 1.0,
            light_speed: 1.0,
        }
    }

    /// Validating constructor; all four constants must be strictly positive
    /// and finite.
    pub fn new(hbar: f64, mass: f64, charge: f64, light_speed: f64) -> Result<Self> {
        let consts = PhysicalConstants {
            hbar,
            mass,
            charge,
            light_speed,
        };
        consts.validate()?;
        Ok(consts)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("hbar", self.hbar),
            ("mass", self.mass),
            ("charge", self.charge),
            ("light_speed", self.light_speed),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be strictly positive and finite, got {value}"),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_natural_units() {
        let c = PhysicalConstants::default();
        assert_eq!(c, PhysicalConstants::natural());
        assert_eq!(c.hbar, 1.0);
        assert_eq!(c.light_speed, 1.0);
    }

    #[test]
    fn rejects_nonpositive_values() {
        assert!(PhysicalConstants::new(1.0, -2.0, 1.0, 1.0).is_err());
        assert!(PhysicalConstants::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(PhysicalConstants::new(1.0, 1.0, f64::NAN, 1.0).is_err());
        assert!(PhysicalConstants::new(1.055e-34, 9.109e-31, 1.602e-19, 2.998e8).is_ok());
    }
}
