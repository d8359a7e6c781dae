//! Flat JSON configuration plus command-line overrides.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use adsel::graph::Sigma;
use adsel::harness::{EvaluatorLabels, ExperimentConfig};
use adsel::{Ablation, Error, Normalization, Result};
use clap::Args;
use serde_json::Value;

/// Solver flags shared by every subcommand that fits a model.
#[derive(Debug, Clone, Default, Args)]
pub struct SolverFlags {
    /// JSON file with flat keys (e.g. {"lambda": 10, "n_repeats": 5}).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Weight of the masked label reconstruction.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Row sparsity weight on U.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Manifold weight (also accepted as --eta).
    #[arg(long, alias = "eta")]
    pub beta: Option<f64>,
    /// Redundancy weight.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Row sparsity weight on W.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Neighbours per sample in the affinity graph.
    #[arg(long = "neighbours")]
    pub q: Option<usize>,
    /// Heat-kernel bandwidth, or "auto".
    #[arg(long)]
    pub sigma: Option<Sigma>,
    /// Iteration cap.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Stop when the relative objective change falls below this.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed for initialisation, splits and masking.
    #[arg(long)]
    pub seed: Option<u64>,
    /// full, no_dual_se, no_gfrl or no_gmr.
    #[arg(long)]
    pub ablation: Option<Ablation>,
    /// Apply the multiplicative updates without the descent safeguard.
    #[arg(long)]
    pub no_safeguard: bool,
    /// zscore or none.
    #[arg(long)]
    pub normalization: Option<Normalization>,
}

/// Protocol flags for `experiment` and `sweep`.
#[derive(Debug, Clone, Default, Args)]
pub struct ProtocolFlags {
    /// Comma-separated missing-label ratios.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,
    /// Repeats per missing ratio.
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Share of samples used for training.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Fraction of features to keep.
    #[arg(long)]
    pub budget: Option<f64>,
    /// ML-KNN neighbours.
    #[arg(long)]
    pub mlknn_k: Option<usize>,
    /// ML-KNN Laplace smoothing.
    #[arg(long)]
    pub mlknn_smoothing: Option<f64>,
    /// Train ML-KNN on full or masked training labels.
    #[arg(long)]
    pub evaluator_labels: Option<EvaluatorLabels>,
    /// Repeats used to score each grid point.
    #[arg(long)]
    pub grid_repeats: Option<usize>,
}

/// Every key a config file may contain.
fn known_keys() -> BTreeSet<String> {
    let defaults = serde_json::to_value(ExperimentConfig::default()).expect("config serialises");
    let mut keys: BTreeSet<String> = defaults
        .as_object()
        .expect("config is an object")
        .keys()
        .cloned()
        .collect();
    keys.insert("eta".into());
    keys
}

/// Parses a flat JSON config, rejecting keys no field accepts.
pub fn parse_config(text: &str, origin: &Path) -> Result<ExperimentConfig> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("{}: {e}", origin.display())))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Config(format!("{}: top level must be a JSON object", origin.display())))?;
    let known = known_keys();
    let unknown: Vec<&str> = obj.keys().map(String::as_str).filter(|k| !known.contains(*k)).collect();
    if !unknown.is_empty() {
        return Err(Error::Config(format!(
            "{}: unknown key(s): {}",
            origin.display(),
            unknown.join(", ")
        )));
    }
    serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", origin.display())))
}

impl SolverFlags {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        let hp = &mut cfg.hyperparams;
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    hp.$field = v;
                }
            )*};
        }
        set!(lambda, alpha, beta, mu, delta, q, sigma, max_iter, tol, seed, ablation);
        if self.no_safeguard {
            hp.safeguard = false;
        }
        if let Some(n) = self.normalization {
            cfg.normalization = n;
        }
    }
}

impl ProtocolFlags {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(r) = &self.ratios {
            cfg.missing_ratios = r.clone();
        }
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {$(
                if let Some(v) = self.$flag {
                    cfg.$field = v;
                }
            )*};
        }
        set!(
            repeats => n_repeats,
            train_fraction => train_fraction,
            budget => budget,
            mlknn_k => mlknn_k,
            mlknn_smoothing => mlknn_smoothing,
            evaluator_labels => evaluator_labels,
            grid_repeats => grid_repeats
        );
    }
}

/// The config file (if any) with flags applied on top, plus the raw file
/// bytes for the manifest.
pub fn resolve(solver: &SolverFlags, protocol: Option<&ProtocolFlags>) -> Result<(ExperimentConfig, Option<Vec<u8>>)> {
    let (mut cfg, raw) = match &solver.config {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|source| Error::Config(format!("{}: {source}", path.display())))?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| Error::Config(format!("{}: not UTF-8", path.display())))?;
            (parse_config(&text, path)?, Some(bytes))
        }
        None => (ExperimentConfig::default(), None),
    };
    solver.apply(&mut cfg);
    if let Some(p) = protocol {
        p.apply(&mut cfg);
    }
    cfg.validate()?;
    Ok((cfg, raw))
}
