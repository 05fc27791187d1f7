//! Run configuration: a flat TOML key schema mirrored one-to-one by CLI flags.
//!
//! Resolution order is built-in defaults, then the config file, then flags.
//! Defaults depend on the verb and the preset; everything is resolved and
//! validated before any pipeline starts.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use wipcrit::{Execution, Preset, VerdictPolicy};

use crate::CliError;

/// Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Structured config file (TOML, flat keys). Flags override its values.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Parameter family: CE1, CE2 or LINEAR.
    #[arg(long)]
    pub preset: Option<Preset>,
    /// Label for an explicit family.
    #[arg(long)]
    pub label: Option<String>,
    /// Explicit theta_1..theta_K (comma separated); overrides `preset`.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub theta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub rho: Option<Vec<f64>>,
    /// Explicit delays N_1 < ... < N_K.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub big_n: Option<Vec<f64>>,
    /// Explicit epsilon_k; chosen automatically when absent.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub epsilon: Option<Vec<f64>>,

    /// Truncation level K for a preset.
    #[arg(long)]
    pub k: Option<usize>,
    /// Largest K visited by `sweep-k`.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Cycle length M of the rotation; chosen automatically when absent.
    #[arg(long)]
    pub m: Option<u64>,
    /// Horizon for series and the C3 curve.
    #[arg(long)]
    pub n_max: Option<u64>,
    /// Largest index in the C4 partial sums.
    #[arg(long)]
    pub i_max: Option<u64>,
    /// Largest 1-based position in the Monte-Carlo C1/C2 block curves.
    #[arg(long)]
    pub p_max: Option<u64>,
    /// Path horizon for `donsker`.
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub grid_size: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// parallel or sequential.
    #[arg(long)]
    pub execution: Option<Execution>,
    /// Output directory. Not echoed into summaries, so reruns elsewhere compare equal.
    #[arg(long, short)]
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,

    #[arg(long)]
    pub ratio_max: Option<f64>,
    #[arg(long)]
    pub floor_factor: Option<f64>,
    /// Number of trailing blocks the verdict policy inspects.
    #[arg(long)]
    pub policy_window: Option<usize>,
    #[arg(long)]
    pub min_blocks: Option<usize>,

    /// Test hook: `arc-table` corrupts the first delay entry of the built model.
    #[arg(long, hide = true)]
    pub inject_fault: Option<Fault>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    ArcTable,
}

impl std::str::FromStr for Fault {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "arc-table" => Ok(Fault::ArcTable),
            other => Err(format!("unknown fault `{other}`")),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Values set in `over` win.
    pub fn merged(self, over: RunConfig) -> RunConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RunConfig { $($f: over.$f.or(self.$f),)* } };
        }
        pick!(
            config,
            preset,
            label,
            theta,
            rho,
            big_n,
            epsilon,
            k,
            k_max,
            m,
            n_max,
            i_max,
            p_max,
            n,
            grid_size,
            trials,
            seed,
            execution,
            output,
            ratio_max,
            floor_factor,
            policy_window,
            min_blocks,
            inject_fault
        )
    }

    /// File values overlaid by flag values.
    pub fn from_flags(flags: RunConfig) -> Result<RunConfig, CliError> {
        match &flags.config {
            Some(path) => Ok(Self::load(path)?.merged(flags)),
            None => Ok(flags),
        }
    }

    pub fn policy(&self) -> Result<VerdictPolicy, CliError> {
        let d = VerdictPolicy::default();
        let p = VerdictPolicy {
            ratio_max: self.ratio_max.unwrap_or(d.ratio_max),
            floor_factor: self.floor_factor.unwrap_or(d.floor_factor),
            window: self.policy_window.unwrap_or(d.window),
            min_blocks: self.min_blocks.unwrap_or(d.min_blocks),
        };
        if !(p.ratio_max > 0.0 && p.ratio_max < 1.0) {
            return Err(CliError::Config(format!("ratio_max must lie in (0, 1), got {}", p.ratio_max)));
        }
        if !(p.floor_factor > 0.0 && p.floor_factor <= 1.0) {
            return Err(CliError::Config(format!("floor_factor must lie in (0, 1], got {}", p.floor_factor)));
        }
        if p.window == 0 || p.min_blocks < p.window + 1 {
            return Err(CliError::Config(format!(
                "policy needs window >= 1 and min_blocks >= window + 1 (window {}, min_blocks {})",
                p.window, p.min_blocks
            )));
        }
        Ok(p)
    }

    /// Validated policy, written back so reports show every constant.
    pub fn resolve_policy(&mut self) -> Result<VerdictPolicy, CliError> {
        let p = self.policy()?;
        self.ratio_max = Some(p.ratio_max);
        self.floor_factor = Some(p.floor_factor);
        self.policy_window = Some(p.window);
        self.min_blocks = Some(p.min_blocks);
        Ok(p)
    }

    pub fn explicit(&self) -> bool {
        self.theta.is_some() || self.rho.is_some() || self.big_n.is_some()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn execution(&self) -> Execution {
        self.execution.unwrap_or_default()
    }

    pub fn output(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from("wipcrit-out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_keys_parse() {
        let c = RunConfig::from_toml(
            "preset = \"CE2\"\nk = 4\ntrials = 5000\ntheta = [1.0, 2.0]\nexecution = \"sequential\"\n",
        )
        .unwrap();
        assert_eq!(c.preset, Some(Preset::Ce2));
        assert_eq!(c.k, Some(4));
        assert_eq!(c.theta, Some(vec![1.0, 2.0]));
        assert_eq!(c.execution, Some(Execution::Sequential));
    }

    #[test]
    fn bad_types_and_keys_are_config_errors() {
        assert!(matches!(RunConfig::from_toml("seed = \"abc\""), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::from_toml("sead = 3"), Err(CliError::Config(_))));
    }

    #[test]
    fn flags_override_file() {
        let file = RunConfig { k: Some(3), seed: Some(9), ..Default::default() };
        let flags = RunConfig { k: Some(5), ..Default::default() };
        let m = file.merged(flags);
        assert_eq!((m.k, m.seed), (Some(5), Some(9)));
    }

    #[test]
    fn policy_validation() {
        assert!(RunConfig { ratio_max: Some(1.5), ..Default::default() }.policy().is_err());
        assert!(RunConfig { min_blocks: Some(2), ..Default::default() }.policy().is_err());
        assert_eq!(RunConfig::default().policy().unwrap(), VerdictPolicy::default());
    }
}
