//! Motor run-time conversion for the push-pull and rotation drives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Drive-train parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorParams {
    /// Motor speed in revolutions per minute.
    pub rpm: f64,
    /// Reduction ratio.
    pub d: f64,
    /// Friction-wheel radius, mm.
    pub r: f64,
    /// Radius correction for wheel elasticity and grooves, mm.
    #[serde(default)]
    pub epsilon: f64,
    /// Driving/driven gear diameter ratio.
    pub c: f64,
}

impl Default for MotorParams {
    fn default() -> Self {
        Self {
            rpm: 60.0,
            d: 1.0,
            r: 10.0,
            epsilon: 0.0,
            c: 1.0,
        }
    }
}

impl MotorParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("rpm", self.rpm)?;
        positive("d", self.d)?;
        positive("r", self.r)?;
        positive("c", self.c)?;
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "{name} must be >= 0, got {v}"
        )))
    }
}

/// Push-pull run time in ms for a travel of `distance_mm` (pass the absolute
/// value; the sign only selects the motor direction).
pub fn push_pull_duration_ms(distance_mm: f64, p: &MotorParams) -> Result<f64> {
    p.validate()?;
    non_negative("distance", distance_mm)?;
    Ok(60000.0 * distance_mm / (2.0 * std::f64::consts::PI * p.rpm * p.d * (p.r + p.epsilon)))
}

/// Rotation run time in ms for `theta_deg` degrees (absolute value).
pub fn rotation_duration_ms(theta_deg: f64, p: &MotorParams) -> Result<f64> {
    p.validate()?;
    non_negative("theta", theta_deg)?;
    Ok(60000.0 * theta_deg / (360.0 * p.rpm * p.d * p.c))
}

/// Travel implied by running the push-pull motor for `ms`.
pub fn push_pull_distance_mm(ms: f64, p: &MotorParams) -> Result<f64> {
    p.validate()?;
    non_negative("duration", ms)?;
    Ok(ms * 2.0 * std::f64::consts::PI * p.rpm * p.d * (p.r + p.epsilon) / 60000.0)
}

/// Rotation implied by running the rotation motor for `ms`.
pub fn rotation_angle_deg(ms: f64, p: &MotorParams) -> Result<f64> {
    p.validate()?;
    non_negative("duration", ms)?;
    Ok(ms * 360.0 * p.rpm * p.d * p.c / 60000.0)
}

/// Both run times for one command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorSchedule {
    pub push_pull_ms: f64,
    pub rotation_ms: f64,
    /// Drive direction of the push-pull motor: +1 push, -1 pull, 0 idle.
    pub push_pull_dir: i8,
    pub rotation_dir: i8,
}

pub fn schedule(translate_mm: f64, rotate_deg: f64, p: &MotorParams) -> Result<MotorSchedule> {
    let sign = |v: f64| {
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    Ok(MotorSchedule {
        push_pull_ms: push_pull_duration_ms(translate_mm.abs(), p)?,
        rotation_ms: rotation_duration_ms(rotate_deg.abs(), p)?,
        push_pull_dir: sign(translate_mm),
        rotation_dir: sign(rotate_deg),
    })
}
