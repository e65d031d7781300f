//! Run settings. A TOML file supplies any subset of the keys; command-line
//! flags override it; unset keys fall back to defaults when a command
//! resolves them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// FPCA components `J`.
    pub components: Option<usize>,
    /// Dimensions at which the log-density is reported.
    pub r: Option<Vec<usize>>,
    /// Truncation `T` of the modal curve.
    pub truncation: Option<usize>,
    pub kernel: Option<String>,
    /// Fixed bandwidth; the normal-reference rule when unset.
    pub bandwidth: Option<f64>,
    pub seed: Option<u64>,
    pub mc_samples: Option<usize>,
    pub lambda: Option<f64>,
    pub out: Option<PathBuf>,
    /// Number of density groups.
    pub groups: Option<usize>,
    /// Points per axis of the score-plane contour grid.
    pub contour_points: Option<usize>,

    /// `power:<a>`, `geometric:<rho>`, `gaussian:<c>` or `explicit:<t1>,<t2>,...`.
    pub decay: Option<String>,
    pub jmax: Option<usize>,
    pub law: Option<String>,
    pub center: Option<Vec<f64>>,
    pub radii: Option<Vec<f64>>,
    pub regime: Option<String>,

    pub model: Option<String>,
    pub n: Option<usize>,
    pub m: Option<usize>,

    pub models: Option<Vec<String>>,
    pub replications: Option<usize>,
    pub truncations: Option<Vec<usize>>,
    pub estimators: Option<Vec<String>>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),*) => {
        Config { $($field: $top.$field.or($base.$field),)* }
    };
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::input(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are plain values")
    }

    /// Values set in `top` win over those in `self`.
    pub fn overlay(self, top: Config) -> Config {
        overlay!(
            self, top, components, r, truncation, kernel, bandwidth, seed, mc_samples, lambda, out, groups,
            contour_points, decay, jmax, law, center, radii, regime, model, n, m, models, replications,
            truncations, estimators
        )
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn kernel(&self) -> CliResult<fdensity::Kernel> {
        match &self.kernel {
            None => Ok(fdensity::Kernel::Gaussian),
            Some(k) => Ok(k.parse()?),
        }
    }
}

/// Checks that a count setting is at least one.
pub(crate) fn positive(name: &str, v: usize) -> CliResult<usize> {
    if v == 0 {
        return Err(CliError::input(format!("{name} must be at least 1")));
    }
    Ok(v)
}
