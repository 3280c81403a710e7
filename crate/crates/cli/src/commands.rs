//! Implementations of the CLI subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use pla_core::channel::{snr_to_noise_var, OfdmConfig, PowerDelayProfile};
use pla_core::data::{
    build_authentication_pairs, build_experimental_pairs, gen_sim_dataset, load_csi_csv,
    load_pairs_csv, phase_compensate, write_pairs, DatasetMeta, PairDataset,
};
use pla_core::detector::{
    build_noise_blind_np, build_np, np_statistic, pearson_statistic, NpCoefficients, PearsonMode,
};
use pla_core::litenp::{self, LiteNpModel, TrainConfig};
use pla_core::metrics::{auc, roc, threshold_for_fpr, RocCurve};
use pla_core::rng::{self, purpose};
use pla_core::stats::ChannelStatistics;

use crate::config::{DetectorKind, ExperimentConfig, SweepAxis};

/// Where NP-style detectors take their channel statistics from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StatsSource {
    /// Closed-form statistics from the dataset's recorded model parameters.
    True,
    /// Sample statistics estimated from a training dataset.
    Estimated,
}

/// Pearson input representation, mirrored from the core enum for clap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PearsonInput {
    ComplexParts,
    Amplitude,
}

impl From<PearsonInput> for PearsonMode {
    fn from(value: PearsonInput) -> Self {
        match value {
            PearsonInput::ComplexParts => PearsonMode::ComplexParts,
            PearsonInput::Amplitude => PearsonMode::Amplitude,
        }
    }
}

fn provenance_line(config: &ExperimentConfig) -> Result<String> {
    Ok(format!(
        "# config_hash={} seed={}",
        config.hash()?,
        config.master_seed
    ))
}

fn create_output(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating directory {}", parent.display()))?;
        }
    }
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("creating output file {}", path.display())
    })?))
}

fn meta_path_for(data_path: &Path) -> PathBuf {
    data_path.with_extension("meta.json")
}

fn write_dataset(
    config: &ExperimentConfig,
    dataset: &PairDataset,
    path: &Path,
) -> Result<()> {
    let mut w = create_output(path)?;
    writeln!(w, "{}", provenance_line(config)?)?;
    write_pairs(&mut w, dataset)?;
    w.flush()?;
    dataset.meta.save(&meta_path_for(path))?;
    Ok(())
}

/// `simulate`: generate train/test pair datasets plus meta files sufficient
/// to regenerate them bit-identically.
pub fn simulate(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let pdp = config.pdp.build()?;
    std::fs::create_dir_all(out_dir)?;

    for (name, n, stream) in [
        ("train", config.n_train, purpose::TRAIN_DATA),
        ("test", config.n_test, purpose::TEST_DATA),
    ] {
        let mut generator = rng::substream(config.master_seed, stream);
        let mut dataset =
            gen_sim_dataset(&pdp, &config.ofdm, &config.scenario, n, &mut generator)?;
        dataset.meta.seed = Some(config.master_seed);
        let path = out_dir.join(format!("{name}.csv"));
        write_dataset(config, &dataset, &path)?;
        println!(
            "wrote {} ({} samples, {} positive / {} negative)",
            path.display(),
            dataset.meta.n_samples,
            dataset.meta.n_positive,
            dataset.meta.n_negative
        );
    }

    let meta_path = out_dir.join("simulate.meta.json");
    std::fs::write(&meta_path, config.canonical_json()? + "\n")?;
    println!("wrote {}", meta_path.display());
    Ok(())
}

/// Effective seed for model init and training: an explicit nonzero
/// `train.seed` wins, otherwise it is derived from the master seed.
fn training_seed(config: &ExperimentConfig, master_seed: u64) -> u64 {
    if config.train.seed != 0 {
        config.train.seed
    } else {
        rng::derive_seed(master_seed, purpose::TRAINING)
    }
}

fn train_model_on(
    config: &ExperimentConfig,
    dataset: &PairDataset,
    master_seed: u64,
    latent_dim: usize,
) -> Result<(LiteNpModel, litenp::TrainingHistory)> {
    let m_prime = dataset
        .samples
        .first()
        .map(|s| s.h_k.len())
        .context("training dataset is empty")?;
    let seed = training_seed(config, master_seed);
    let train_config = TrainConfig {
        seed,
        ..config.train.clone()
    };
    let model = LiteNpModel::init(m_prime, latent_dim, latent_dim, seed)?;
    Ok(litenp::train(model, &dataset.samples, &train_config)?)
}

/// `train`: fit LiteNP-Net on a pair dataset, save the model and the
/// per-epoch loss history.
pub fn train(
    config: &ExperimentConfig,
    data: &Path,
    model_out: &Path,
    history_out: Option<&Path>,
) -> Result<()> {
    let dataset = load_pairs_csv(data)?;
    let (model, history) = train_model_on(config, &dataset, config.master_seed, config.latent_dim)?;

    if let Some(parent) = model_out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    model.save(model_out)?;
    println!("wrote {}", model_out.display());

    if let Some(path) = history_out {
        let mut w = create_output(path)?;
        writeln!(w, "{}", provenance_line(config)?)?;
        history.write_csv(&mut w)?;
        w.flush()?;
        println!("wrote {}", path.display());
    }
    let best = history
        .best_val_loss()
        .context("training produced no epochs")?;
    println!(
        "trained {} epochs, best validation loss {best:.6}",
        history.records.len()
    );
    Ok(())
}

fn stats_from_meta(meta: &DatasetMeta) -> Result<ChannelStatistics> {
    let variances = meta
        .pdp_tap_variances
        .clone()
        .context("dataset meta lacks pdp_tap_variances; cannot rebuild true statistics")?;
    let pdp = PowerDelayProfile::new(variances)?;
    let ofdm: OfdmConfig = meta
        .ofdm
        .clone()
        .context("dataset meta lacks the OFDM layout")?;
    Ok(ChannelStatistics::from_model(
        &pdp,
        &ofdm,
        meta.alpha.context("dataset meta lacks alpha")?,
        meta.beta.context("dataset meta lacks beta")?,
        meta.theta.context("dataset meta lacks theta")?,
        meta.noise_var.context("dataset meta lacks noise_var")?,
    )?)
}

fn estimated_stats(train_data: &Path) -> Result<ChannelStatistics> {
    let dataset = load_pairs_csv(train_data)?;
    let meta = DatasetMeta::load(&meta_path_for(train_data)).with_context(|| {
        format!(
            "estimated statistics need the meta sidecar {}",
            meta_path_for(train_data).display()
        )
    })?;
    let noise_var = meta
        .noise_var
        .context("training meta lacks noise_var (required by the estimators)")?;
    let theta = meta.theta.unwrap_or(1.0);
    Ok(ChannelStatistics::estimate_from_pairs(
        &dataset.legitimate_pairs(),
        &dataset.attacker_pairs(),
        noise_var,
        theta,
    )?)
}

fn score_with_np(dataset: &PairDataset, coeffs: &NpCoefficients) -> Result<Vec<(f64, bool)>> {
    dataset
        .samples
        .iter()
        .map(|s| Ok((np_statistic(&s.h_k, &s.h_k1, coeffs)?, s.label)))
        .collect()
}

/// Everything `evaluate`/`roc-export` need to score a dataset.
pub struct ScoringSpec<'a> {
    pub detector: DetectorKind,
    pub stats_source: StatsSource,
    pub model: Option<&'a Path>,
    pub train_data: Option<&'a Path>,
    pub pearson_mode: PearsonMode,
}

fn score_dataset(
    spec: &ScoringSpec,
    data_path: &Path,
    dataset: &PairDataset,
) -> Result<Vec<(f64, bool)>> {
    match spec.detector {
        DetectorKind::Np | DetectorKind::NoiseBlindNp => {
            let stats = match spec.stats_source {
                StatsSource::True => {
                    let meta = DatasetMeta::load(&meta_path_for(data_path)).with_context(|| {
                        format!(
                            "true statistics need the meta sidecar {}",
                            meta_path_for(data_path).display()
                        )
                    })?;
                    stats_from_meta(&meta)?
                }
                StatsSource::Estimated => {
                    let train_data = spec
                        .train_data
                        .context("--stats estimated requires --train-data")?;
                    estimated_stats(train_data)?
                }
            };
            let coeffs = match spec.detector {
                DetectorKind::Np => build_np(&stats)?,
                _ => build_noise_blind_np(&stats)?,
            };
            score_with_np(dataset, &coeffs)
        }
        DetectorKind::Litenp => {
            let model_path = spec.model.context("--detector litenp requires --model")?;
            let model = LiteNpModel::load(model_path)?;
            // pre-activations: rank-identical to sigmoid scores, no saturation ties
            Ok(litenp::raw_scores(&model, &dataset.samples)?)
        }
        DetectorKind::Pearson => dataset
            .samples
            .iter()
            .map(|s| Ok((pearson_statistic(&s.h_k, &s.h_k1, spec.pearson_mode)?, s.label)))
            .collect(),
    }
}

/// `evaluate`: score a test dataset with one detector, write AUC and
/// TPR-at-target-FPR metrics, optionally the full ROC.
pub fn evaluate(
    config: &ExperimentConfig,
    data: &Path,
    spec: &ScoringSpec,
    metrics_out: &Path,
    roc_out: Option<&Path>,
) -> Result<()> {
    let dataset = load_pairs_csv(data)?;
    let scored = score_dataset(spec, data, &dataset)?;
    let curve = roc(&scored)?;
    let area = auc(&curve);

    let mut w = create_output(metrics_out)?;
    writeln!(w, "{}", provenance_line(config)?)?;
    writeln!(w, "metric,value")?;
    writeln!(w, "detector,{}", spec.detector.as_str())?;
    writeln!(w, "auc,{area}")?;
    for &target in &config.target_fprs {
        let sel = threshold_for_fpr(&curve, target)?;
        writeln!(w, "tpr_at_fpr_{target},{}", sel.tpr)?;
        writeln!(w, "achieved_fpr_at_{target},{}", sel.fpr)?;
        writeln!(w, "threshold_at_fpr_{target},{}", sel.threshold.value)?;
    }
    w.flush()?;
    println!("wrote {}", metrics_out.display());

    if let Some(path) = roc_out {
        write_roc(config, &curve, path)?;
    }
    println!("detector={} auc={area:.6}", spec.detector.as_str());
    Ok(())
}

fn write_roc(config: &ExperimentConfig, curve: &RocCurve, path: &Path) -> Result<()> {
    let mut w = create_output(path)?;
    writeln!(w, "{}", provenance_line(config)?)?;
    curve.write_csv(&mut w)?;
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

/// `roc-export`: score a dataset and write only the ROC curve.
pub fn roc_export(
    config: &ExperimentConfig,
    data: &Path,
    spec: &ScoringSpec,
    out: &Path,
) -> Result<()> {
    let dataset = load_pairs_csv(data)?;
    let scored = score_dataset(spec, data, &dataset)?;
    let curve = roc(&scored)?;
    write_roc(config, &curve, out)
}

fn apply_axis(config: &ExperimentConfig, axis: SweepAxis, value: f64) -> ExperimentConfig {
    let mut point = config.clone();
    match axis {
        SweepAxis::SnrDb => point.scenario.snr_db = value,
        SweepAxis::DeltaT => point.scenario.interval_s = value,
        SweepAxis::DistanceOverLambda => {
            point.scenario.attacker_distance_m = value * point.ofdm.carrier_wavelength();
        }
        SweepAxis::LatentDim => point.latent_dim = value.round() as usize,
    }
    point
}

fn point_statistics(point: &ExperimentConfig, pdp: &PowerDelayProfile) -> Result<ChannelStatistics> {
    Ok(ChannelStatistics::from_model(
        pdp,
        &point.ofdm,
        point.scenario.alpha(),
        point.scenario.beta(point.ofdm.carrier_wavelength()),
        point.scenario.power_ratio,
        snr_to_noise_var(point.scenario.snr_db, pdp),
    )?)
}

/// `sweep`: for every axis value, regenerate datasets with a seed derived
/// from the master seed and the axis index, build/train the selected
/// detectors and append `axis_value,detector,auc,seed` rows.
pub fn sweep(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let Some(sweep_spec) = config.sweep.clone() else {
        bail!("sweep requires a `sweep` section in the config");
    };
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("sweep.csv");
    let mut w = create_output(&csv_path)?;
    writeln!(w, "{}", provenance_line(config)?)?;
    writeln!(w, "axis_value,detector,auc,seed")?;

    for (index, &value) in sweep_spec.values.iter().enumerate() {
        let point = apply_axis(config, sweep_spec.axis, value);
        point.validate()?;
        let point_seed = config.master_seed ^ index as u64;
        let pdp = point.pdp.build()?;

        let mut test_rng = rng::substream(point_seed, purpose::TEST_DATA);
        let test = gen_sim_dataset(&pdp, &point.ofdm, &point.scenario, point.n_test, &mut test_rng)?;

        let needs_training = point.detectors.contains(&DetectorKind::Litenp);
        let train_set = if needs_training {
            let mut train_rng = rng::substream(point_seed, purpose::TRAIN_DATA);
            Some(gen_sim_dataset(
                &pdp,
                &point.ofdm,
                &point.scenario,
                point.n_train,
                &mut train_rng,
            )?)
        } else {
            None
        };

        for detector in &point.detectors {
            let scored: Vec<(f64, bool)> = match detector {
                DetectorKind::Np => {
                    let coeffs = build_np(&point_statistics(&point, &pdp)?)?;
                    score_with_np(&test, &coeffs)?
                }
                DetectorKind::NoiseBlindNp => {
                    let coeffs = build_noise_blind_np(&point_statistics(&point, &pdp)?)?;
                    score_with_np(&test, &coeffs)?
                }
                DetectorKind::Litenp => {
                    let train_set = train_set.as_ref().expect("generated above");
                    let (model, _) =
                        train_model_on(&point, train_set, point_seed, point.latent_dim)?;
                    litenp::raw_scores(&model, &test.samples)?
                }
                DetectorKind::Pearson => test
                    .samples
                    .iter()
                    .map(|s| {
                        Ok((
                            pearson_statistic(&s.h_k, &s.h_k1, PearsonMode::ComplexParts)?,
                            s.label,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?,
            };
            let area = pla_core::metrics::auc_from_scores(&scored)?;
            writeln!(w, "{value},{},{area},{point_seed}", detector.as_str())?;
            println!(
                "axis={value} detector={} auc={area:.6} seed={point_seed}",
                detector.as_str()
            );
        }
    }
    w.flush()?;
    println!("wrote {}", csv_path.display());

    let meta_path = out_dir.join("sweep.meta.json");
    std::fs::write(&meta_path, config.canonical_json()? + "\n")?;
    println!("wrote {}", meta_path.display());
    Ok(())
}

/// Pairing mode for `ingest`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum IngestMode {
    /// Per-source delta-k pairing (training-style labels).
    Train,
    /// Pair every packet against the latest known-legitimate packet.
    Test,
}

/// `ingest`: experimental CSI CSV to a labeled pair dataset.
#[allow(clippy::too_many_arguments)]
pub fn ingest(
    config: &ExperimentConfig,
    input: &Path,
    mode: IngestMode,
    dk_pos: usize,
    dk_neg: usize,
    legit_id: Option<&str>,
    compensate_phase: bool,
    ref_subcarrier: usize,
    out: &Path,
) -> Result<()> {
    let mut records = load_csi_csv(input)?;
    if records.is_empty() {
        bail!("{} contains no CSI records", input.display());
    }
    if compensate_phase {
        if ref_subcarrier >= records[0].csi.len() {
            bail!(
                "reference subcarrier {ref_subcarrier} out of range for M' = {}",
                records[0].csi.len()
            );
        }
        records = phase_compensate(&records, ref_subcarrier);
    }
    let mut dataset = match mode {
        IngestMode::Train => build_experimental_pairs(&records, dk_pos, dk_neg)?,
        IngestMode::Test => {
            let legit = legit_id.context("--mode test requires --legit-id")?;
            build_authentication_pairs(&records, legit)?
        }
    };
    dataset.meta.source = format!("{} ({})", dataset.meta.source, input.display());
    write_dataset(config, &dataset, out)?;
    println!(
        "wrote {} ({} samples, {} positive / {} negative)",
        out.display(),
        dataset.meta.n_samples,
        dataset.meta.n_positive,
        dataset.meta.n_negative
    );
    Ok(())
}
