//! Flat JSON configuration merged with command-line flags.
//!
//! Precedence, lowest first: built-in defaults, the `--config` file, flags.
//! Keys are the long flag names with `-` replaced by `_`, except the
//! physical `L` and `N`.

use std::path::{Path, PathBuf};

use clap::Args;
use hartree_lab::energy::ProblemSpec;
use hartree_lab::solver::SolveOptions;
use hartree_lab::{make_grid, GridSpec};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::sync::Arc;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Original,
    Rescaled,
    Limit,
    Massless,
}

/// Every parameter any command reads. Commands ignore keys they do not use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub family: Family,
    pub m: f64,
    /// The first entry is used by single-state commands.
    pub c: Vec<f64>,
    #[serde(rename = "N")]
    pub total_mass: f64,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub n: usize,
    /// Finer grid of the critical-mass scan; defaults to `3n/2`.
    pub n_fine: Option<usize>,
    pub tol: f64,
    pub max_iter: usize,
    pub step: f64,
    pub seed: u64,
    pub symmetrize: bool,
    pub runs: usize,
    pub window: Option<(f64, f64)>,
    pub lambda_c: f64,
    pub delta: Option<f64>,
    pub eigs: usize,
    pub label: Option<String>,
    pub state: Option<PathBuf>,
    pub init: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            family: Family::Limit,
            m: 1.0,
            c: vec![16.0],
            total_mass: 1.0,
            half_width: 12.0,
            n: 64,
            n_fine: None,
            tol: 1e-9,
            max_iter: 3000,
            step: 0.9,
            seed: 0,
            symmetrize: false,
            runs: 10,
            window: None,
            lambda_c: 1.0,
            delta: None,
            eigs: 4,
            label: None,
            state: None,
            init: None,
            out: PathBuf::from("out"),
        }
    }
}

/// Flags shared by every command. Unset flags leave file or default values.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct Overrides {
    /// Flat JSON file with default values for any of the flags below.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    /// Comma-separated list.
    #[arg(long, value_delimiter = ',', global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    /// Total mass of the original family.
    #[arg(long = "N", global = true)]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub total_mass: Option<f64>,
    /// Box half-width: the grid covers [-L, L)³.
    #[arg(long = "L", global = true)]
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    /// Points per dimension, 2^k or 3·2^k.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_fine: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetrize: Option<bool>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    /// Fit window `r_min,r_max`.
    #[arg(long, value_delimiter = ',', num_args = 2, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<Vec<f64>>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_c: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigs: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// State file for `verify`.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<PathBuf>,
    /// Warm start for `solve`.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn read_file(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Config(format!("{}: expected a JSON object", path.display()))),
        Err(e) => Err(CliError::Config(format!("{}: {e}", path.display()))),
    }
}

impl RunConfig {
    /// Merge defaults, the optional file and the flags, then validate.
    pub fn resolve(flags: &Overrides) -> Result<Self, CliError> {
        let mut merged = match &flags.config {
            Some(p) => read_file(p)?,
            None => Map::new(),
        };
        let Value::Object(set) = serde_json::to_value(flags).expect("flags serialize") else {
            unreachable!("flags serialize to an object")
        };
        merged.extend(set);
        let cfg: RunConfig = serde_json::from_value(Value::Object(merged))
            .map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("m", self.m),
            ("N", self.total_mass),
            ("L", self.half_width),
            ("lambda_c", self.lambda_c),
            ("step", self.step),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{k} = {v} must be positive")));
            }
        }
        if self.c.is_empty() || self.c.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(CliError::Config("c must be a non-empty list of positive values".into()));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(CliError::Config("delta must be positive".into()));
            }
        }
        make_grid(self.half_width, self.n).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(nf) = self.n_fine {
            make_grid(self.half_width, nf).map_err(|e| CliError::Config(e.to_string()))?;
        }
        self.solve_options().validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<GridSpec>, CliError> {
        make_grid(self.half_width, self.n).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            max_iterations: self.max_iter,
            step: self.step,
            tolerance: self.tol,
            seed: self.seed,
            symmetrize: self.symmetrize,
            ..SolveOptions::default()
        }
    }

    /// Problem for single-state commands, using the first `c`.
    pub fn spec(&self) -> ProblemSpec {
        self.spec_at(self.c[0])
    }

    pub fn spec_at(&self, c: f64) -> ProblemSpec {
        match self.family {
            Family::Original => ProblemSpec::Original { m: self.m, total_mass: self.total_mass },
            Family::Rescaled => ProblemSpec::Rescaled { m: self.m, c },
            Family::Limit => ProblemSpec::Limit { m: self.m },
            Family::Massless => ProblemSpec::Massless,
        }
    }

    pub fn label(&self, fallback: &str) -> String {
        self.label.clone().unwrap_or_else(|| fallback.to_string())
    }

    /// SHA-256 of the canonical JSON form. The output directory is left out
    /// so the same run written to two places carries one hash.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        value.as_object_mut().expect("object").remove("out");
        let bytes = serde_json::to_vec(&value).expect("config serializes");
        hex(&Sha256::digest(bytes))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"m": 0.5, "n": 32, "L": 10}"#).unwrap();
        let flags = Overrides { config: Some(path), n: Some(48), ..Default::default() };
        let cfg = RunConfig::resolve(&flags).unwrap();
        assert_eq!(cfg.m, 0.5);
        assert_eq!(cfg.n, 48);
        assert_eq!(cfg.half_width, 10.0);
        assert_eq!(cfg.tol, 1e-9);
    }

    #[test]
    fn rejects_bad_values() {
        for flags in [
            Overrides { n: Some(100), ..Default::default() },
            Overrides { m: Some(-1.0), ..Default::default() },
            Overrides { c: Some(vec![]), ..Default::default() },
            Overrides { tol: Some(0.5), ..Default::default() },
        ] {
            assert!(matches!(RunConfig::resolve(&flags), Err(CliError::Config(_))));
        }
    }

    #[test]
    fn unknown_keys_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"mass": 2}"#).unwrap();
        let flags = Overrides { config: Some(path), ..Default::default() };
        assert!(RunConfig::resolve(&flags).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let b = RunConfig { seed: 1, ..RunConfig::default() };
        assert_eq!(a.hash(), RunConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let moved = RunConfig { out: "elsewhere".into(), ..RunConfig::default() };
        assert_eq!(a.hash(), moved.hash());
    }
}
