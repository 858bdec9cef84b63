use std::path::{Path, PathBuf};

use priorglasso::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Settings shared by every subcommand. Loaded from `--config` when given,
/// then overridden field by field by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub solver: SolverConfig,
    pub k_candidates: Vec<f64>,
    pub gamma_ebic: f64,
    pub edge_tol: f64,
    pub seed: u64,
    pub log_level: String,
    pub threads: Option<usize>,
    /// Per-class observation CSVs, in class order.
    pub inputs: Vec<PathBuf>,
    /// Per-class prior CSVs, in class order.
    pub priors: Vec<PathBuf>,
    /// Per-class attention stacks (JSON file or directory of CSVs).
    pub attention: Vec<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub header: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            k_candidates: (0..=50).map(f64::from).collect(),
            gamma_ebic: 0.5,
            edge_tol: 1e-6,
            seed: 0,
            log_level: "warn".into(),
            threads: None,
            inputs: Vec::new(),
            priors: Vec::new(),
            attention: Vec::new(),
            output_dir: None,
            header: false,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.solver.validate()?;
        if self.k_candidates.is_empty() {
            return Err(CliError::Config("k_candidates is empty".into()));
        }
        if !self.k_candidates.contains(&0.0) {
            return Err(CliError::Config("k_candidates must contain 0".into()));
        }
        if let Some(k) = self.k_candidates.iter().find(|k| !(**k >= 0.0 && k.is_finite())) {
            return Err(CliError::Config(format!("k_candidates entry {k} is not a finite non-negative number")));
        }
        if !(self.gamma_ebic >= 0.0) {
            return Err(CliError::Config(format!("gamma_ebic must be non-negative, got {}", self.gamma_ebic)));
        }
        if !(self.edge_tol >= 0.0) {
            return Err(CliError::Config(format!("edge_tol must be non-negative, got {}", self.edge_tol)));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        for path in self.inputs.iter().chain(&self.priors).chain(&self.attention) {
            if !path.exists() {
                return Err(CliError::MissingInput(path.clone()));
            }
        }
        Ok(())
    }
}
