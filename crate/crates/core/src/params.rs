//! Geometric description of the mechanism and its JSON configuration.
//!
//! Lengths are millimeters, angles radians, torques newton-millimeters.
//! The JSON form carries angles in degrees.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Leg azimuths about the base origin.
pub const LEG_AZIMUTHS: [f64; 4] = [PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0, 7.0 * PI / 4.0];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read mechanism file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed mechanism JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid mechanism parameter `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

/// One of the four kinematic chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Leg {
    One,
    Two,
    Three,
    Four,
}

impl Leg {
    pub const ALL: [Leg; 4] = [Leg::One, Leg::Two, Leg::Three, Leg::Four];

    /// Leg from its 1-based number.
    pub fn from_number(n: usize) -> Option<Leg> {
        match n {
            1 => Some(Leg::One),
            2 => Some(Leg::Two),
            3 => Some(Leg::Three),
            4 => Some(Leg::Four),
            _ => None,
        }
    }

    /// Zero-based index, for array access.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn number(self) -> usize {
        self.index() + 1
    }

    pub fn azimuth(self) -> f64 {
        LEG_AZIMUTHS[self.index()]
    }
}

/// Full geometric description of the mechanism.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismParams {
    /// Upper (actuated) link length.
    pub upper_link: f64,
    /// Parallelogram link length.
    pub lower_link: f64,
    /// Traveling-plate half offset along x.
    pub plate_half_x: f64,
    /// Traveling-plate half offset along y.
    pub plate_half_y: f64,
    /// Tactor-bar offset.
    pub bar_offset: f64,
    /// Tactor-bar length.
    pub bar_length: f64,
    /// Radial distance from the origin to each actuated joint.
    pub base_radius: f64,
    /// Height of the actuated joints above the base plane.
    pub base_z: f64,
    pub azimuths: [f64; 4],
    /// Actuated-angle interval `[min, max]`, shared by all legs.
    pub q_limits: [f64; 2],
    /// Mechanical stop of the plate parallelogram, `|theta| <= theta_limit`.
    pub theta_limit: f64,
    /// Per-motor torque limit referred to the actuated joint.
    pub tau_max: f64,
}

impl Default for MechanismParams {
    fn default() -> Self {
        Self {
            upper_link: 17.5,
            lower_link: 15.0,
            plate_half_x: 12.15,
            plate_half_y: 4.97,
            bar_offset: 7.5,
            bar_length: 17.5,
            base_radius: DEFAULT_BASE_RADIUS,
            base_z: 0.0,
            azimuths: LEG_AZIMUTHS,
            q_limits: [DEFAULT_Q_MIN_DEG.to_radians(), DEFAULT_Q_MAX_DEG.to_radians()],
            theta_limit: DEFAULT_THETA_LIMIT_DEG.to_radians(),
            tau_max: DEFAULT_TAU_MAX,
        }
    }
}

/// Default base radius, mm. Places the upper links horizontal at the
/// centered home pose with the parallelograms inclined toward the plate.
pub const DEFAULT_BASE_RADIUS: f64 = 14.0;
pub const DEFAULT_Q_MIN_DEG: f64 = -50.0;
pub const DEFAULT_Q_MAX_DEG: f64 = 15.0;
pub const DEFAULT_THETA_LIMIT_DEG: f64 = 30.0;
/// Joint torque limit giving 1.39 N of +z force at the home pose.
pub const DEFAULT_TAU_MAX: f64 = 6.081_250_000;

impl MechanismParams {
    /// Loads a JSON mechanism description and validates it.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let raw: MechanismConfig = serde_json::from_str(text)?;
        let params = raw.into_params();
        params.validate()?;
        Ok(params)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_config(&self) -> MechanismConfig {
        MechanismConfig {
            upper_link: self.upper_link,
            lower_link: self.lower_link,
            d1: self.plate_half_x,
            h1: self.plate_half_y,
            d: self.bar_offset,
            h: self.bar_length,
            base_radius: self.base_radius,
            base_z: self.base_z,
            q_limits: [self.q_limits[0].to_degrees(), self.q_limits[1].to_degrees()],
            theta_limit: self.theta_limit.to_degrees(),
            tau_max: self.tau_max,
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_config()).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("L", self.upper_link),
            ("l", self.lower_link),
            ("d1", self.plate_half_x),
            ("h1", self.plate_half_y),
            ("d", self.bar_offset),
            ("h", self.bar_length),
            ("tau_max", self.tau_max),
            ("theta_limit", self.theta_limit),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError::Invalid {
                    field,
                    reason: format!("must be finite and strictly positive, got {value}"),
                });
            }
        }
        if !(self.base_radius.is_finite() && self.base_radius >= 0.0) {
            return Err(ConfigError::Invalid {
                field: "base_radius",
                reason: format!("must be finite and non-negative, got {}", self.base_radius),
            });
        }
        if !self.base_z.is_finite() {
            return Err(ConfigError::Invalid {
                field: "base_z",
                reason: "must be finite".into(),
            });
        }
        let [lo, hi] = self.q_limits;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(ConfigError::Invalid {
                field: "q_limits",
                reason: format!("need min < max, got [{lo}, {hi}]"),
            });
        }
        if self.azimuths.iter().any(|a| !a.is_finite()) {
            return Err(ConfigError::Invalid {
                field: "phi",
                reason: "azimuths must be finite".into(),
            });
        }
        Ok(())
    }

    /// Copy with every length scaled by `factor`; angles and torque limit kept.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            upper_link: self.upper_link * factor,
            lower_link: self.lower_link * factor,
            plate_half_x: self.plate_half_x * factor,
            plate_half_y: self.plate_half_y * factor,
            bar_offset: self.bar_offset * factor,
            bar_length: self.bar_length * factor,
            base_radius: self.base_radius * factor,
            base_z: self.base_z * factor,
            ..self.clone()
        }
    }

    pub fn within_q_limits(&self, q: f64) -> bool {
        q >= self.q_limits[0] && q <= self.q_limits[1]
    }

    /// Typical length scale, used for relative tolerances.
    pub fn length_scale(&self) -> f64 {
        self.upper_link + self.lower_link
    }
}

/// Wire form of [`MechanismParams`]. Angles are degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismConfig {
    #[serde(rename = "L")]
    pub upper_link: f64,
    #[serde(rename = "l")]
    pub lower_link: f64,
    pub d1: f64,
    pub h1: f64,
    pub d: f64,
    pub h: f64,
    pub base_radius: f64,
    pub base_z: f64,
    pub q_limits: [f64; 2],
    #[serde(default = "default_theta_limit_deg")]
    pub theta_limit: f64,
    pub tau_max: f64,
}

fn default_theta_limit_deg() -> f64 {
    DEFAULT_THETA_LIMIT_DEG
}

impl MechanismConfig {
    pub fn into_params(self) -> MechanismParams {
        MechanismParams {
            upper_link: self.upper_link,
            lower_link: self.lower_link,
            plate_half_x: self.d1,
            plate_half_y: self.h1,
            bar_offset: self.d,
            bar_length: self.h,
            base_radius: self.base_radius,
            base_z: self.base_z,
            azimuths: LEG_AZIMUTHS,
            q_limits: [self.q_limits[0].to_radians(), self.q_limits[1].to_radians()],
            theta_limit: self.theta_limit.to_radians(),
            tau_max: self.tau_max,
        }
    }
}
