//! Parameter files: flat JSON keyed by the `SystemParams` field names, with
//! every frequency or rate written as `{"value": .., "unit": ..}`.
//!
//! ```json
//! { "omega1": {"value": 6.0, "unit": "GHz_2pi"}, "g": {"value": 70, "unit": "MHz_2pi"}, "n_cavity": 6 }
//! ```
//!
//! Missing keys take the reference-device values.

use std::path::Path;

use cqed_core::model::{landscape_point, SystemParams, POINT_X_TILDE};
use cqed_core::units::{ghz, mhz, to_ghz, to_mhz};
use serde::{Deserialize, Serialize};

use crate::error::FormatError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FreqUnit {
    #[serde(rename = "GHz_2pi")]
    GHz2Pi,
    #[serde(rename = "MHz_2pi")]
    MHz2Pi,
    #[serde(rename = "rad_per_s")]
    RadPerS,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quantity {
    pub value: f64,
    pub unit: FreqUnit,
}

impl Quantity {
    pub fn to_rad_per_s(self) -> f64 {
        match self.unit {
            FreqUnit::GHz2Pi => ghz(self.value),
            FreqUnit::MHz2Pi => mhz(self.value),
            FreqUnit::RadPerS => self.value,
        }
    }

    pub fn ghz(omega: f64) -> Self {
        Quantity { value: to_ghz(omega), unit: FreqUnit::GHz2Pi }
    }

    pub fn mhz(omega: f64) -> Self {
        Quantity { value: to_mhz(omega), unit: FreqUnit::MHz2Pi }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega1: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega2: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_c: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_r: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_transmon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cavity: Option<usize>,
}

impl ParamsFile {
    pub fn resolve(&self) -> SystemParams {
        let r = SystemParams::reference();
        let q = |x: Option<Quantity>, d: f64| x.map_or(d, Quantity::to_rad_per_s);
        SystemParams {
            omega1: q(self.omega1, r.omega1),
            omega2: q(self.omega2, r.omega2),
            omega_c: q(self.omega_c, r.omega_c),
            alpha1: q(self.alpha1, r.alpha1),
            alpha2: q(self.alpha2, r.alpha2),
            g: q(self.g, r.g),
            gamma: q(self.gamma, r.gamma),
            kappa: q(self.kappa, r.kappa),
            omega_r: q(self.omega_r, r.omega_r),
            n_transmon: self.n_transmon.unwrap_or(r.n_transmon),
            n_cavity: self.n_cavity.unwrap_or(r.n_cavity),
        }
    }

    pub fn from_params(p: &SystemParams) -> Self {
        ParamsFile {
            omega1: Some(Quantity::ghz(p.omega1)),
            omega2: Some(Quantity::ghz(p.omega2)),
            omega_c: Some(Quantity::ghz(p.omega_c)),
            alpha1: Some(Quantity::mhz(p.alpha1)),
            alpha2: Some(Quantity::mhz(p.alpha2)),
            g: Some(Quantity::mhz(p.g)),
            gamma: Some(Quantity::mhz(p.gamma)),
            kappa: Some(Quantity::mhz(p.kappa)),
            omega_r: Some(Quantity::ghz(p.omega_r)),
            n_transmon: Some(p.n_transmon),
            n_cavity: Some(p.n_cavity),
        }
    }
}

pub fn params_from_str(text: &str, path: &Path) -> Result<SystemParams, FormatError> {
    let file: ParamsFile = serde_json::from_str(text).map_err(|e| FormatError::parse(path, e.line() as u64, e.to_string()))?;
    let p = file.resolve();
    p.validate().map_err(|e| FormatError::invalid(path, e.to_string()))?;
    Ok(p)
}

/// Load a parameter file; `None` gives the reference device.
pub fn load_params(path: Option<&Path>) -> Result<SystemParams, FormatError> {
    match path {
        None => Ok(SystemParams::reference()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| FormatError::io(p, e))?;
            params_from_str(&text, p)
        }
    }
}

pub fn params_to_json(p: &SystemParams) -> String {
    serde_json::to_string_pretty(&ParamsFile::from_params(p)).expect("plain data serializes")
}

/// Landscape point named on the command line: `xtilde` or `D2A,DCG`.
/// The rotating frame is placed midway between the qubits.
pub fn apply_point(base: &SystemParams, spec: &str) -> Result<(SystemParams, bool), String> {
    let (d2a, dcg) = match spec.trim().to_ascii_lowercase().as_str() {
        "xtilde" | "x~" | "x̃" => POINT_X_TILDE,
        s => {
            let parts: Vec<&str> = s.split(',').collect();
            if parts.len() != 2 {
                return Err(format!("point '{spec}' must be 'xtilde' or 'D2A,DCG'"));
            }
            let a = parts[0].trim().parse::<f64>().map_err(|e| format!("point '{spec}': {e}"))?;
            let b = parts[1].trim().parse::<f64>().map_err(|e| format!("point '{spec}': {e}"))?;
            (a, b)
        }
    };
    let (p, warn) = landscape_point(d2a, dcg, base);
    Ok((SystemParams { omega_r: 0.5 * (p.omega1 + p.omega2), ..p }, warn))
}
