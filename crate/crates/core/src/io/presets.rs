//! Built-in scenarios, shipped as configuration files.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    /// Configuration text in the `mlswr-config v1` format.
    pub text: &'static str,
}

pub const PRESETS: [Preset; 3] = [
    Preset {
        name: "sim1",
        summary: "inclined-wall vessel 4 m x 6 m, 40x40x40 cells, h0 = 1.5 m, T = 40 s",
        text: include_str!("../../configs/sim1.cfg"),
    },
    Preset {
        name: "sim2",
        summary: "sim1 with sigma_0 = 0.5, phi_c = 0.002 and c0 = (10, 8)",
        text: include_str!("../../configs/sim2.cfg"),
    },
    Preset {
        name: "sim3",
        summary: "unit square over a gaussian bump, 40x40x60 cells, h0 = 0.4 m, T = 20 s",
        text: include_str!("../../configs/sim3.cfg"),
    },
];

pub fn preset(name: &str) -> Result<&'static Preset> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))
}
