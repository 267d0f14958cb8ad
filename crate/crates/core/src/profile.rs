//! Scalar time profiles used to scale prescribed values and loads.

use std::f64::consts::TAU;

/// Multiplier `p(t)` applied to a nominal value, with analytic first and
/// second derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Profile {
    #[default]
    Constant,
    /// Linear rise from 0 at `t = 0` to 1 at `t = duration`, then held.
    Ramp { duration: f64 },
    /// `sin(2π f t + phase)`.
    Sinusoid { frequency: f64, phase: f64 },
}

impl Profile {
    pub fn is_constant(&self) -> bool {
        matches!(self, Profile::Constant)
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Profile::Constant => 1.0,
            Profile::Ramp { duration } => (t / duration).clamp(0.0, 1.0),
            Profile::Sinusoid { frequency, phase } => (TAU * frequency * t + phase).sin(),
        }
    }

    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            Profile::Constant => 0.0,
            Profile::Ramp { duration } => {
                if (0.0..duration).contains(&t) {
                    1.0 / duration
                } else {
                    0.0
                }
            }
            Profile::Sinusoid { frequency, phase } => {
                let w = TAU * frequency;
                w * (w * t + phase).cos()
            }
        }
    }

    /// Second derivative; the ramp's kinks are ignored.
    pub fn acceleration(&self, t: f64) -> f64 {
        match *self {
            Profile::Constant | Profile::Ramp { .. } => 0.0,
            Profile::Sinusoid { frequency, phase } => {
                let w = TAU * frequency;
                -w * w * (w * t + phase).sin()
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            Profile::Constant => Ok(()),
            Profile::Ramp { duration } if duration > 0.0 && duration.is_finite() => Ok(()),
            Profile::Ramp { .. } => Err("ramp duration must be positive".into()),
            Profile::Sinusoid { frequency, phase }
                if frequency.is_finite() && phase.is_finite() =>
            {
                Ok(())
            }
            Profile::Sinusoid { .. } => Err("sinusoid parameters must be finite".into()),
        }
    }
}
