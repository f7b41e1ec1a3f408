use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MgError, Result};

/// Values for the universal constants that the bounds leave unspecified.
///
/// Every total-variation bound is reported as "configured constant times
/// an explicit expression"; nothing here is ever silently replaced by 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    /// Multiplier of the k-dimensional TV bounds (product and simplex bodies).
    #[serde(rename = "C_tv_multi", default = "one")]
    pub c_tv_multi: f64,
    /// Constant of the n-dimensional smoothing inequality `||f*phi_t - f||_1 <= c n t`.
    #[serde(rename = "c_smooth", default = "one")]
    pub c_smooth: f64,
    /// Multiplier of the univariate simplex TV bound.
    #[serde(rename = "C_tv_simplex1d", default = "one")]
    pub c_tv_simplex1d: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        ConstantsConfig {
            c_tv_multi: 1.0,
            c_smooth: 1.0,
            c_tv_simplex1d: 1.0,
        }
    }
}

impl ConstantsConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("C_tv_multi", self.c_tv_multi),
            ("c_smooth", self.c_smooth),
            ("C_tv_simplex1d", self.c_tv_simplex1d),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(MgError::invalid(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let c: ConstantsConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        c.validate().map_err(|e| e.to_string())?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MgError::io(path, e))?;
        Self::from_json(&text).map_err(|msg| MgError::Parse {
            path: path.to_path_buf(),
            msg,
        })
    }
}
