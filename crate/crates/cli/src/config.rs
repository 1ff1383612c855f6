//! Run configuration: a JSON file merged with command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::UsageError;

/// Every tunable of every subcommand. Unset fields fall back to defaults
/// when the subcommand reads them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gps: Option<PathBuf>,
    pub gis: Option<Vec<PathBuf>>,
    pub entities: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub secondary: Option<PathBuf>,
    pub tree: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub lct: Option<PathBuf>,
    pub out: Option<PathBuf>,

    pub theta: Option<f64>,
    pub r: Option<f64>,
    pub d0: Option<f64>,
    pub cutoff: Option<f64>,
    pub mode: Option<String>,
    pub epsilon: Option<f64>,
    pub tau: Option<f64>,
    pub gamma: Option<Vec<f64>>,
    pub class: Option<String>,
    pub weighted: Option<bool>,
    pub xi: Option<f64>,
    pub levels: Option<Vec<f64>>,
    pub k: Option<usize>,
    pub height: Option<f64>,
    pub alpha: Option<f64>,
    pub match_cost: Option<String>,
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
    pub n: Option<Vec<usize>>,
    pub m: Option<Vec<usize>>,
    pub timestamps: Option<Vec<String>>,
    pub replicates: Option<usize>,
    pub convergence: Option<bool>,
    pub r0: Option<f64>,
    pub q: Option<f64>,
    pub side: Option<f64>,
    pub overlap_tol: Option<f64>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),* $(,)?) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())).into())
    }

    /// `self` with every field set in `flags` replaced.
    pub fn merged(mut self, flags: &RunConfig) -> Self {
        overlay!(
            self, flags, gps, gis, entities, scenario, table, secondary, tree, labels, lct, out, theta, r, d0,
            cutoff, mode, epsilon, tau, gamma, class, weighted, xi, levels, k, height, alpha, match_cost, sigma,
            seed, n, m, timestamps, replicates, convergence, r0, q, side, overlap_tol,
        );
        self
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Fetches a required path or fails with a usage error.
pub fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, UsageError> {
    value
        .as_deref()
        .ok_or_else(|| UsageError(format!("missing required input --{flag}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file: RunConfig = serde_json::from_str(r#"{"gamma": [0.5], "seed": 3, "tau": 0.02}"#).unwrap();
        let flags = RunConfig {
            seed: Some(9),
            ..Default::default()
        };
        let m = file.merged(&flags);
        assert_eq!(m.seed, Some(9));
        assert_eq!(m.gamma, Some(vec![0.5]));
        assert_eq!(m.tau, Some(0.02));
        assert!(serde_json::from_str::<RunConfig>(r#"{"gama": [0.5]}"#).is_err());
    }
}
