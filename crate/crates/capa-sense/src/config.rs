//! Scenario configuration files.
//!
//! Scenarios load from TOML with keys mirroring the reference parameter
//! table (`frequency_ghz`, `tx_w_min`, …, `power_mA2`, `noise_power`,
//! `gl_points`, and a `[[targets]]` array). Power is given in mA² in the
//! file and stored internally in A².

use serde::Deserialize;

use crate::geometry::{Aperture, Scenario, Target, ETA_0};
use crate::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    /// `[x, y, z]` in meters.
    position: [f64; 3],
    reflection_re: f64,
    reflection_im: f64,
}

fn default_eta0() -> f64 {
    ETA_0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    frequency_ghz: f64,
    #[serde(default = "default_eta0")]
    impedance_eta0: f64,
    tx_w_min: f64,
    tx_w_max: f64,
    tx_h_min: f64,
    tx_h_max: f64,
    rx_w_min: f64,
    rx_w_max: f64,
    rx_h_min: f64,
    rx_h_max: f64,
    #[serde(rename = "power_mA2")]
    power_ma2: f64,
    noise_power: f64,
    gl_points: usize,
    targets: Vec<RawTarget>,
}

/// Parse a scenario from TOML text.
pub fn scenario_from_toml_str(text: &str) -> Result<Scenario> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("TOML parse error: {e}")))?;
    let tx = Aperture::new(raw.tx_w_min, raw.tx_w_max, raw.tx_h_min, raw.tx_h_max)?;
    let rx = Aperture::new(raw.rx_w_min, raw.rx_w_max, raw.rx_h_min, raw.rx_h_max)?;
    let targets = raw
        .targets
        .iter()
        .map(|t| {
            Target::new(
                nalgebra::Vector3::new(t.position[0], t.position[1], t.position[2]),
                num_complex::Complex64::new(t.reflection_re, t.reflection_im),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Scenario::new(
        raw.frequency_ghz * 1.0e9,
        raw.impedance_eta0,
        tx,
        rx,
        targets,
        raw.power_ma2 * 1.0e-6, // mA² → A²
        raw.noise_power,
        raw.gl_points,
        raw.gl_points,
    )
}

/// Load a scenario from a TOML file.
pub fn load_scenario(path: &std::path::Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    scenario_from_toml_str(&text)
}
