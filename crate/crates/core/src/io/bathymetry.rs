//! Bottom elevation presets.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bathymetry {
    Flat,
    /// V-shaped trough along x₁ = 2, sloping down towards x₂ = 0.
    Inclined,
    /// Smooth bump of height 0.2 centred at (0.5, 0.5).
    Gaussian,
}

impl Bathymetry {
    pub const ALL: [Bathymetry; 3] = [Bathymetry::Flat, Bathymetry::Inclined, Bathymetry::Gaussian];

    pub fn name(self) -> &'static str {
        match self {
            Bathymetry::Flat => "flat",
            Bathymetry::Inclined => "inclined",
            Bathymetry::Gaussian => "gaussian",
        }
    }

    /// z_B at horizontal position `x`, m.
    pub fn elevation(self, x: Vec2) -> f64 {
        let [x1, x2] = x;
        match self {
            Bathymetry::Flat => 0.0,
            Bathymetry::Inclined => {
                let across = 6.4125 / 22.8 * (x1 - 2.0);
                let along = 2.25 / 22.8 * (x2 - 6.0) + 0.5625;
                (across + along).max(-across + along).max(0.0)
            }
            Bathymetry::Gaussian => 0.2 * (-40.0 * ((x1 - 0.5).powi(2) + (x2 - 0.5).powi(2))).exp(),
        }
    }
}

impl FromStr for Bathymetry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

impl fmt::Display for Bathymetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Elevation of the named preset at `x`.
pub fn bathymetry(preset: &str, x: Vec2) -> Result<f64> {
    Ok(preset.parse::<Bathymetry>()?.elevation(x))
}
