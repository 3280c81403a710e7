//! Experiment configuration: one JSON file, `--set` overrides, and a
//! content hash that stamps every output for reproducibility.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use pla_core::channel::{OfdmConfig, PowerDelayProfile, ScenarioConfig};
use pla_core::litenp::TrainConfig;

/// Exponential power-delay-profile parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdpSpec {
    pub num_taps: usize,
    pub decay_rate: f64,
}

impl Default for PdpSpec {
    fn default() -> Self {
        Self {
            num_taps: 4,
            decay_rate: 1.0,
        }
    }
}

impl PdpSpec {
    pub fn build(&self) -> Result<PowerDelayProfile> {
        Ok(PowerDelayProfile::exponential(self.num_taps, self.decay_rate)?)
    }
}

/// Detector selection for evaluation and sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    /// Neyman-Pearson detector from full channel statistics.
    Np,
    /// NP variant whose conditional means ignore estimation noise.
    NoiseBlindNp,
    /// The trained LiteNP-Net.
    Litenp,
    /// Pearson correlation baseline.
    Pearson,
}

impl DetectorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetectorKind::Np => "np",
            DetectorKind::NoiseBlindNp => "noise_blind_np",
            DetectorKind::Litenp => "litenp",
            DetectorKind::Pearson => "pearson",
        }
    }
}

/// Parameter swept by `pla sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SnrDb,
    DeltaT,
    DistanceOverLambda,
    LatentDim,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

fn default_n_train() -> usize {
    50_000
}

fn default_n_test() -> usize {
    10_000
}

fn default_latent_dim() -> usize {
    32
}

fn default_detectors() -> Vec<DetectorKind> {
    vec![
        DetectorKind::Np,
        DetectorKind::NoiseBlindNp,
        DetectorKind::Litenp,
        DetectorKind::Pearson,
    ]
}

fn default_target_fprs() -> Vec<f64> {
    vec![0.01, 0.05, 0.1]
}

fn default_master_seed() -> u64 {
    42
}

/// Full experiment description. Every field has a default, so a config file
/// only needs the values it changes; the resolved form (all fields explicit)
/// is what gets hashed and written as the run's meta file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub pdp: PdpSpec,
    #[serde(default)]
    pub ofdm: OfdmConfig,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    #[serde(default = "default_detectors")]
    pub detectors: Vec<DetectorKind>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default = "default_target_fprs")]
    pub target_fprs: Vec<f64>,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields carry defaults")
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.ofdm.validate()?;
        self.train.validate()?;
        self.pdp.build()?;
        if self.n_train < 2 || self.n_test < 2 {
            bail!("dataset sizes must be at least 2");
        }
        if self.latent_dim == 0 {
            bail!("latent_dim must be positive");
        }
        if self.detectors.is_empty() {
            bail!("at least one detector must be selected");
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                bail!("sweep.values must be nonempty");
            }
        }
        for &fpr in &self.target_fprs {
            if !(0.0..=1.0).contains(&fpr) {
                bail!("target FPR {fpr} outside [0, 1]");
            }
        }
        Ok(())
    }

    /// Canonical serialized form: the resolved config with every field
    /// explicit, in declaration order. Hashing and meta files both use it.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// First 16 hex characters of the SHA-256 of the canonical form.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.canonical_json()?.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        Ok(hex[..16].to_string())
    }
}

/// Loads a config file, applies `--set key=value` overrides (dotted paths
/// into the JSON tree, values parsed as JSON with a string fallback) and an
/// optional master-seed override, then validates.
pub fn load_config(
    path: Option<&Path>,
    sets: &[String],
    seed_override: Option<u64>,
) -> Result<ExperimentConfig> {
    let mut tree: serde_json::Value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => serde_json::json!({}),
    };

    for entry in sets {
        let Some((key, raw_value)) = entry.split_once('=') else {
            bail!("--set expects key=value, got {entry:?}");
        };
        let value = serde_json::from_str(raw_value)
            .unwrap_or_else(|_| serde_json::Value::String(raw_value.to_string()));
        set_path(&mut tree, key, value)?;
    }

    let mut config: ExperimentConfig =
        serde_json::from_value(tree).context("config does not match the expected schema")?;
    if let Some(seed) = seed_override {
        config.master_seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn set_path(tree: &mut serde_json::Value, dotted: &str, value: serde_json::Value) -> Result<()> {
    let mut node = tree;
    let parts: Vec<&str> = dotted.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !node.is_object() {
            bail!("--set path {dotted:?} descends into a non-object");
        }
        let map = node.as_object_mut().unwrap();
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| serde_json::json!({}));
    }
    bail!("--set key must be nonempty")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_and_validate() {
        let config = ExperimentConfig::default();
        config.validate().unwrap();
        assert_eq!(config.n_train, 50_000);
        assert_eq!(config.n_test, 10_000);
        assert_eq!(config.latent_dim, 32);
        assert_eq!(config.detectors.len(), 4);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig::default();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        let mut c = ExperimentConfig::default();
        c.master_seed = 7;
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn canonical_form_round_trips() {
        let config = ExperimentConfig::default();
        let json = config.canonical_json().unwrap();
        let reparsed: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(json, reparsed.canonical_json().unwrap());
        assert_eq!(config.hash().unwrap(), reparsed.hash().unwrap());
    }

    #[test]
    fn set_overrides_nested_paths() {
        let config = load_config(
            None,
            &[
                "scenario.snr_db=6".to_string(),
                "n_test=100".to_string(),
                "detectors=[\"np\"]".to_string(),
            ],
            Some(9),
        )
        .unwrap();
        assert_eq!(config.scenario.snr_db, 6.0);
        assert_eq!(config.n_test, 100);
        assert_eq!(config.detectors, vec![DetectorKind::Np]);
        assert_eq!(config.master_seed, 9);
    }

    #[test]
    fn invalid_overrides_are_rejected() {
        assert!(load_config(None, &["oops".to_string()], None).is_err());
        assert!(load_config(None, &["n_test=1".to_string()], None).is_err());
        assert!(load_config(None, &["scenario.doppler_hz=-1".to_string()], None).is_err());
    }
}
