//! Labeled CSI-pair datasets: simulation, experimental ingestion and
//! preprocessing.
//!
//! File formats (bit-exact contracts, UTF-8, LF line endings, floats
//! written with 17 significant digits so `f64` round-trips losslessly):
//!
//! - CSI records: `packet_index,timestamp,source_id,re_0,im_0,...,re_{M'-1},im_{M'-1}`
//! - Pair datasets: the same row layout with a leading `label` column and
//!   two CSI blocks per row (reference measurement, then the measurement
//!   under test); the metadata columns describe the reference packet.
//! - Dataset metadata: a JSON sidecar carrying every parameter and seed
//!   needed to regenerate a simulated dataset bit-identically.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    evolve_attacker, evolve_legitimate, measure_csi, sample_taps, snr_to_noise_var, taps_to_cfr,
    CsiMeasurement, OfdmConfig, PowerDelayProfile, ScenarioConfig,
};
use crate::error::{Error, Result};
use crate::litenp::Sample;

/// Provenance of one pair row: the reference packet it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct PairOrigin {
    pub packet_index: u64,
    pub timestamp: f64,
    pub source_id: String,
}

/// Scenario and provenance record for a dataset, serialized as a JSON
/// sidecar next to the data file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// "simulated" or "experimental".
    pub kind: String,
    /// Free-form origin tag (generator name, capture file, ...).
    pub source: String,
    /// Master seed when the dataset is simulated.
    pub seed: Option<u64>,
    pub m_prime: usize,
    pub n_samples: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub theta: Option<f64>,
    pub noise_var: Option<f64>,
    pub scenario: Option<ScenarioConfig>,
    pub pdp_tap_variances: Option<Vec<f64>>,
    pub ofdm: Option<OfdmConfig>,
}

impl DatasetMeta {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::invalid(format!("meta serialization failed: {e}")))?;
        w.write_all(json.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Malformed {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// A labeled pair dataset with per-row provenance and metadata.
#[derive(Debug, Clone)]
pub struct PairDataset {
    pub samples: Vec<Sample>,
    pub origins: Vec<PairOrigin>,
    pub meta: DatasetMeta,
}

impl PairDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(reference, next)` tuples of the positive samples, as consumed by
    /// the statistics estimators.
    pub fn legitimate_pairs(&self) -> Vec<(CsiMeasurement, CsiMeasurement)> {
        self.samples
            .iter()
            .filter(|s| s.label)
            .map(|s| (s.h_k.clone(), s.h_k1.clone()))
            .collect()
    }

    /// `(reference, next)` tuples of the negative samples.
    pub fn attacker_pairs(&self) -> Vec<(CsiMeasurement, CsiMeasurement)> {
        self.samples
            .iter()
            .filter(|s| !s.label)
            .map(|s| (s.h_k.clone(), s.h_k1.clone()))
            .collect()
    }

    pub fn scored_labels(&self) -> (usize, usize) {
        let pos = self.samples.iter().filter(|s| s.label).count();
        (pos, self.samples.len() - pos)
    }
}

/// Generates a balanced simulated dataset.
///
/// Per sample: draw the reference taps, evolve them one interval along both
/// the legitimate and the attacker branch, map all three to CFRs and add
/// independent measurement noise. Positive samples keep the legitimate
/// `(k, k+1)` pair, negatives the `(k legitimate, k+1 attacker)` pair; the
/// label split is `ceil(n/2)` positives to `floor(n/2)` negatives and the
/// rows are shuffled.
pub fn gen_sim_dataset<R: Rng + ?Sized>(
    pdp: &PowerDelayProfile,
    config: &OfdmConfig,
    scenario: &ScenarioConfig,
    n: usize,
    rng: &mut R,
) -> Result<PairDataset> {
    scenario.validate()?;
    if n < 2 {
        return Err(Error::invalid("dataset size must be at least 2"));
    }
    let alpha = scenario.alpha();
    let beta = scenario.beta(config.carrier_wavelength());
    let theta = scenario.power_ratio;
    let noise_var = snr_to_noise_var(scenario.snr_db, pdp);
    let n_positive = n.div_ceil(2);

    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let taps_k = sample_taps(pdp, rng);
        let taps_ba = evolve_legitimate(&taps_k, pdp, alpha, rng)?;
        let taps_ma = evolve_attacker(&taps_k, pdp, beta, theta, rng)?;
        let csi_k = measure_csi(&taps_to_cfr(&taps_k, config)?, noise_var, rng);
        let csi_ba = measure_csi(&taps_to_cfr(&taps_ba, config)?, noise_var, rng);
        let csi_ma = measure_csi(&taps_to_cfr(&taps_ma, config)?, noise_var, rng);
        if i < n_positive {
            samples.push(Sample::new(csi_k, csi_ba, true));
        } else {
            samples.push(Sample::new(csi_k, csi_ma, false));
        }
    }
    shuffle_samples(&mut samples, rng);

    let origins = samples
        .iter()
        .enumerate()
        .map(|(i, _)| PairOrigin {
            packet_index: i as u64,
            timestamp: 0.0,
            source_id: "sim".to_string(),
        })
        .collect();
    let meta = DatasetMeta {
        kind: "simulated".to_string(),
        source: "gen_sim_dataset".to_string(),
        seed: None,
        m_prime: config.num_active(),
        n_samples: n,
        n_positive,
        n_negative: n - n_positive,
        alpha: Some(alpha),
        beta: Some(beta),
        theta: Some(theta),
        noise_var: Some(noise_var),
        scenario: Some(scenario.clone()),
        pdp_tap_variances: Some(pdp.tap_variances().to_vec()),
        ofdm: Some(config.clone()),
    };
    Ok(PairDataset {
        samples,
        origins,
        meta,
    })
}

fn shuffle_samples<T, R: Rng + ?Sized>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// One row of an experimental CSI capture.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiRecord {
    pub packet_index: u64,
    pub timestamp: f64,
    pub source_id: String,
    pub csi: CsiMeasurement,
}

fn float17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes records in the documented CSI CSV format to any writer.
pub fn write_csi_records<W: Write>(mut w: W, records: &[CsiRecord]) -> Result<()> {
    let m = records.first().map_or(0, |r| r.csi.len());
    write!(w, "packet_index,timestamp,source_id")?;
    for i in 0..m {
        write!(w, ",re_{i},im_{i}")?;
    }
    writeln!(w)?;
    for r in records {
        write!(w, "{},{},{}", r.packet_index, float17(r.timestamp), r.source_id)?;
        for z in r.csi.values().iter() {
            write!(w, ",{},{}", float17(z.re), float17(z.im))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Writes records in the documented CSI CSV format.
pub fn write_csi_csv(path: &Path, records: &[CsiRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csi_records(&mut w, records)?;
    w.flush()?;
    Ok(())
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Reads a CSV file into `(line_number, content)` rows, skipping blank
/// lines and `#` comments (CLI outputs carry a provenance comment line).
fn read_content_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push((idx + 1, line));
    }
    Ok(out)
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| malformed(path, line, format!("not a decimal float: {field:?}")))
}

/// Loads a CSI CSV capture; every row must carry the same number of
/// subcarriers, and source IDs must not contain commas.
pub fn load_csi_csv(path: &Path) -> Result<Vec<CsiRecord>> {
    let lines = read_content_lines(path)?;
    let Some(((_, header), rows)) = lines.split_first() else {
        return Err(malformed(path, 1, "missing header"));
    };
    if !header.starts_with("packet_index,timestamp,source_id") {
        return Err(malformed(path, 1, "unexpected header for a CSI record file"));
    }

    let mut records = Vec::new();
    let mut m_prime: Option<usize> = None;
    for (line_no, line) in rows {
        let (line_no, line) = (*line_no, line);
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 5 || (fields.len() - 3) % 2 != 0 {
            return Err(malformed(
                path,
                line_no,
                format!("expected 3 + 2*M' columns, got {}", fields.len()),
            ));
        }
        let m = (fields.len() - 3) / 2;
        match m_prime {
            None => m_prime = Some(m),
            Some(expected) if expected != m => {
                return Err(malformed(
                    path,
                    line_no,
                    format!("inconsistent subcarrier count: {m} vs {expected}"),
                ));
            }
            _ => {}
        }
        let packet_index = fields[0]
            .parse::<u64>()
            .map_err(|_| malformed(path, line_no, format!("bad packet_index {:?}", fields[0])))?;
        let timestamp = parse_f64(path, line_no, fields[1])?;
        let source_id = fields[2].to_string();
        let mut values = Vec::with_capacity(m);
        for k in 0..m {
            let re = parse_f64(path, line_no, fields[3 + 2 * k])?;
            let im = parse_f64(path, line_no, fields[4 + 2 * k])?;
            values.push(Complex64::new(re, im));
        }
        records.push(CsiRecord {
            packet_index,
            timestamp,
            source_id,
            csi: CsiMeasurement::from_vec(values),
        });
    }
    Ok(records)
}

/// Writes a pair dataset in the documented format (label column, reference
/// packet metadata, then both CSI blocks) to any writer.
pub fn write_pairs<W: Write>(mut w: W, dataset: &PairDataset) -> Result<()> {
    let m = dataset.samples.first().map_or(0, |s| s.h_k.len());
    write!(w, "label,packet_index,timestamp,source_id")?;
    for block in ["a", "b"] {
        for i in 0..m {
            write!(w, ",{block}_re_{i},{block}_im_{i}")?;
        }
    }
    writeln!(w)?;
    for (sample, origin) in dataset.samples.iter().zip(&dataset.origins) {
        write!(
            w,
            "{},{},{},{}",
            u8::from(sample.label),
            origin.packet_index,
            float17(origin.timestamp),
            origin.source_id
        )?;
        for block in [&sample.h_k, &sample.h_k1] {
            for z in block.values().iter() {
                write!(w, ",{},{}", float17(z.re), float17(z.im))?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Writes a pair dataset to a file.
pub fn save_pairs_csv(path: &Path, dataset: &PairDataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pairs(&mut w, dataset)?;
    w.flush()?;
    Ok(())
}

/// Loads a pair dataset; `meta` is rebuilt with counts only (use the JSON
/// sidecar for scenario parameters).
pub fn load_pairs_csv(path: &Path) -> Result<PairDataset> {
    let lines = read_content_lines(path)?;
    let Some(((_, header), rows)) = lines.split_first() else {
        return Err(malformed(path, 1, "missing header"));
    };
    if !header.starts_with("label,packet_index,timestamp,source_id") {
        return Err(malformed(path, 1, "unexpected header for a pair dataset file"));
    }

    let mut samples = Vec::new();
    let mut origins = Vec::new();
    let mut m_prime: Option<usize> = None;
    for (line_no, line) in rows {
        let (line_no, line) = (*line_no, line);
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 8 || (fields.len() - 4) % 4 != 0 {
            return Err(malformed(
                path,
                line_no,
                format!("expected 4 + 4*M' columns, got {}", fields.len()),
            ));
        }
        let m = (fields.len() - 4) / 4;
        match m_prime {
            None => m_prime = Some(m),
            Some(expected) if expected != m => {
                return Err(malformed(
                    path,
                    line_no,
                    format!("inconsistent subcarrier count: {m} vs {expected}"),
                ));
            }
            _ => {}
        }
        let label = match fields[0] {
            "0" => false,
            "1" => true,
            other => return Err(malformed(path, line_no, format!("bad label {other:?}"))),
        };
        let packet_index = fields[1]
            .parse::<u64>()
            .map_err(|_| malformed(path, line_no, format!("bad packet_index {:?}", fields[1])))?;
        let timestamp = parse_f64(path, line_no, fields[2])?;
        let source_id = fields[3].to_string();
        let read_block = |offset: usize| -> Result<CsiMeasurement> {
            let mut values = Vec::with_capacity(m);
            for k in 0..m {
                let re = parse_f64(path, line_no, fields[offset + 2 * k])?;
                let im = parse_f64(path, line_no, fields[offset + 2 * k + 1])?;
                values.push(Complex64::new(re, im));
            }
            Ok(CsiMeasurement::from_vec(values))
        };
        let h_k = read_block(4)?;
        let h_k1 = read_block(4 + 2 * m)?;
        samples.push(Sample::new(h_k, h_k1, label));
        origins.push(PairOrigin {
            packet_index,
            timestamp,
            source_id,
        });
    }

    let n_positive = samples.iter().filter(|s| s.label).count();
    let meta = DatasetMeta {
        kind: "file".to_string(),
        source: path.display().to_string(),
        seed: None,
        m_prime: m_prime.unwrap_or(0),
        n_samples: samples.len(),
        n_positive,
        n_negative: samples.len() - n_positive,
        alpha: None,
        beta: None,
        theta: None,
        noise_var: None,
        scenario: None,
        pdp_tap_variances: None,
        ofdm: None,
    };
    Ok(PairDataset {
        samples,
        origins,
        meta,
    })
}

/// Groups records by source (first-appearance order) and checks that
/// timestamps are nondecreasing within each source.
fn group_by_source(records: &[CsiRecord]) -> Result<Vec<(String, Vec<&CsiRecord>)>> {
    let mut groups: Vec<(String, Vec<&CsiRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(id, _)| *id == r.source_id) {
            Some((_, v)) => v.push(r),
            None => groups.push((r.source_id.clone(), vec![r])),
        }
    }
    for (id, stream) in &groups {
        if stream.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
            return Err(Error::invalid(format!(
                "timestamps for source {id:?} are not nondecreasing"
            )));
        }
    }
    Ok(groups)
}

/// Builds training pairs from per-source streams: indices `dk_pos` apart are
/// labeled legitimate (same device, short gap), indices `dk_neg` apart are
/// labeled rogue (the device has moved far enough to look like another one).
pub fn build_experimental_pairs(
    records: &[CsiRecord],
    dk_pos: usize,
    dk_neg: usize,
) -> Result<PairDataset> {
    if dk_pos == 0 || dk_neg == 0 {
        return Err(Error::invalid("packet offsets must be positive"));
    }
    if dk_pos == dk_neg {
        return Err(Error::invalid(
            "positive and negative packet offsets must differ",
        ));
    }
    let groups = group_by_source(records)?;
    let mut samples = Vec::new();
    let mut origins = Vec::new();
    for (id, stream) in &groups {
        if stream.len() < dk_neg + 1 {
            log::warn!(
                "source {id:?} has {} records, fewer than dk_neg + 1 = {}; no negative pairs",
                stream.len(),
                dk_neg + 1
            );
        }
        for (dk, label) in [(dk_pos, true), (dk_neg, false)] {
            for k in 0..stream.len().saturating_sub(dk) {
                samples.push(Sample::new(
                    stream[k].csi.clone(),
                    stream[k + dk].csi.clone(),
                    label,
                ));
                origins.push(PairOrigin {
                    packet_index: stream[k].packet_index,
                    timestamp: stream[k].timestamp,
                    source_id: id.clone(),
                });
            }
        }
    }
    let n_positive = samples.iter().filter(|s| s.label).count();
    let m_prime = samples.first().map_or(0, |s| s.h_k.len());
    let meta = DatasetMeta {
        kind: "experimental".to_string(),
        source: format!("delta-k pairing (dk_pos={dk_pos}, dk_neg={dk_neg})"),
        seed: None,
        m_prime,
        n_samples: samples.len(),
        n_positive,
        n_negative: samples.len() - n_positive,
        alpha: None,
        beta: None,
        theta: None,
        noise_var: None,
        scenario: None,
        pdp_tap_variances: None,
        ofdm: None,
    };
    Ok(PairDataset {
        samples,
        origins,
        meta,
    })
}

/// Test-time pairing against ground truth: every packet is compared with
/// the most recent packet of the known-legitimate source, so same-source
/// pairs are labeled 1 and cross-source pairs 0.
pub fn build_authentication_pairs(records: &[CsiRecord], legit_id: &str) -> Result<PairDataset> {
    let mut ordered: Vec<&CsiRecord> = records.iter().collect();
    ordered.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));

    let mut samples = Vec::new();
    let mut origins = Vec::new();
    let mut last_legit: Option<&CsiRecord> = None;
    for r in ordered {
        if let Some(reference) = last_legit {
            samples.push(Sample::new(
                reference.csi.clone(),
                r.csi.clone(),
                r.source_id == legit_id,
            ));
            origins.push(PairOrigin {
                packet_index: reference.packet_index,
                timestamp: reference.timestamp,
                source_id: reference.source_id.clone(),
            });
        }
        if r.source_id == legit_id {
            last_legit = Some(r);
        }
    }
    let n_positive = samples.iter().filter(|s| s.label).count();
    let m_prime = samples.first().map_or(0, |s| s.h_k.len());
    let meta = DatasetMeta {
        kind: "experimental".to_string(),
        source: format!("authentication pairing (legit={legit_id})"),
        seed: None,
        m_prime,
        n_samples: samples.len(),
        n_positive,
        n_negative: samples.len() - n_positive,
        alpha: None,
        beta: None,
        theta: None,
        noise_var: None,
        scenario: None,
        pdp_tap_variances: None,
        ofdm: None,
    };
    Ok(PairDataset {
        samples,
        origins,
        meta,
    })
}

/// Removes the common oscillator phase from one measurement by rotating it
/// so the reference subcarrier becomes real-nonnegative. Magnitudes and
/// inter-subcarrier phase differences are untouched; applying it twice is
/// the same as applying it once.
pub fn phase_compensate_measurement(csi: &CsiMeasurement, ref_index: usize) -> CsiMeasurement {
    let reference = csi.values()[ref_index];
    let magnitude = reference.norm();
    if magnitude == 0.0 {
        log::warn!("phase compensation reference entry is zero; record left unrotated");
        return csi.clone();
    }
    let rotation = reference.conj() / magnitude;
    CsiMeasurement::new(csi.values() * rotation)
}

/// Phase-compensates every record against the same reference subcarrier.
pub fn phase_compensate(records: &[CsiRecord], ref_index: usize) -> Vec<CsiRecord> {
    records
        .iter()
        .map(|r| CsiRecord {
            csi: phase_compensate_measurement(&r.csi, ref_index),
            ..r.clone()
        })
        .collect()
}

/// Stratified shuffle-split into (train, validation, test).
///
/// Positives and negatives are permuted and cut independently with
/// cumulative rounding, so each split's label ratio matches the global one
/// as closely as integer counts allow.
pub fn split_shuffle(
    dataset: &PairDataset,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(PairDataset, PairDataset, PairDataset)> {
    let (f1, f2, f3) = fractions;
    if !(f1 > 0.0 && f2 > 0.0 && f3 > 0.0) {
        return Err(Error::invalid("split fractions must all be positive"));
    }
    if ((f1 + f2 + f3) - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("split fractions must sum to 1"));
    }

    let mut rng = crate::rng::from_seed(seed);
    let mut pos_idx: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.samples[i].label).collect();
    let mut neg_idx: Vec<usize> = (0..dataset.len()).filter(|&i| !dataset.samples[i].label).collect();
    shuffle_samples(&mut pos_idx, &mut rng);
    shuffle_samples(&mut neg_idx, &mut rng);

    let cut = |count: usize| -> (usize, usize) {
        let c1 = (count as f64 * f1).round() as usize;
        let c2 = (count as f64 * (f1 + f2)).round() as usize;
        (c1.min(count), c2.min(count))
    };
    let (p1, p2) = cut(pos_idx.len());
    let (n1, n2) = cut(neg_idx.len());

    let mut build = |pos: &[usize], neg: &[usize]| -> Result<PairDataset> {
        let mut indices: Vec<usize> = pos.iter().chain(neg).copied().collect();
        if indices.is_empty() {
            return Err(Error::invalid("a split fraction produced an empty split"));
        }
        shuffle_samples(&mut indices, &mut rng);
        let samples: Vec<Sample> = indices.iter().map(|&i| dataset.samples[i].clone()).collect();
        let origins: Vec<PairOrigin> = indices.iter().map(|&i| dataset.origins[i].clone()).collect();
        let n_positive = samples.iter().filter(|s| s.label).count();
        let meta = DatasetMeta {
            n_samples: samples.len(),
            n_positive,
            n_negative: samples.len() - n_positive,
            ..dataset.meta.clone()
        };
        Ok(PairDataset {
            samples,
            origins,
            meta,
        })
    };

    let train = build(&pos_idx[..p1], &neg_idx[..n1])?;
    let val = build(&pos_idx[p1..p2], &neg_idx[n1..n2])?;
    let test = build(&pos_idx[p2..], &neg_idx[n2..])?;
    Ok((train, val, test))
}
