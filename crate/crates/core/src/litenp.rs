//! LiteNP-Net: a lightweight network whose architecture mirrors the NP
//! detector's quadratic form.
//!
//! Three linear embedding networks stand in for the coefficient matrices of
//! the real-form statistic: `psi_a` is a single full matrix (the `A'` slot
//! has full rank), while `psi_b` and `psi_c` are rank-bottlenecked products
//! `w_b2 * w_b1` and `w_c2 * w_c1` whose latent widths cap the representable
//! rank. The processing head sums the three inner products and squashes the
//! result through a sigmoid. There are no bias terms anywhere: the target
//! function is a pure quadratic form.
//!
//! Training minimizes the contrastive loss
//! `v * max(0, margin - s)^2 + (1 - v) * s^2`
//! with minibatch RMSprop, early stopping on validation loss, and exact
//! analytic gradients derived from the bilinear structure.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::CsiMeasurement;
use crate::detector::{realify_vector, RealCoefficients};
use crate::error::{Error, Result};

/// One labeled CSI pair: `label = true` means both measurements came from
/// the legitimate device.
#[derive(Debug, Clone)]
pub struct Sample {
    pub h_k: CsiMeasurement,
    pub h_k1: CsiMeasurement,
    pub label: bool,
}

impl Sample {
    pub fn new(h_k: CsiMeasurement, h_k1: CsiMeasurement, label: bool) -> Self {
        Self { h_k, h_k1, label }
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub margin: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub seed: u64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 32,
            max_epochs: 5000,
            patience: 20,
            margin: 1.0,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::invalid(
                "batch_size, max_epochs and patience must be positive",
            ));
        }
        if !(self.margin > 0.0) {
            return Err(Error::invalid("margin must be positive"));
        }
        if !(self.rmsprop_decay > 0.0 && self.rmsprop_decay < 1.0) {
            return Err(Error::invalid("rmsprop_decay must lie in (0, 1)"));
        }
        if !(self.rmsprop_epsilon > 0.0) {
            return Err(Error::invalid("rmsprop_epsilon must be positive"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid("validation_fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

const MODEL_MAGIC: &[u8; 4] = b"LNP1";
const MODEL_VERSION: u32 = 1;

/// The five weight matrices of LiteNP-Net.
#[derive(Debug, Clone, PartialEq)]
pub struct LiteNpModel {
    w_a: DMatrix<f64>,  // 2m x 2m
    w_b1: DMatrix<f64>, // e_b x 2m
    w_b2: DMatrix<f64>, // 2m x e_b
    w_c1: DMatrix<f64>, // e_c x 2m
    w_c2: DMatrix<f64>, // 2m x e_c
    seed: u64,
}

impl LiteNpModel {
    /// Fresh model with weights drawn i.i.d. uniform in `[-s, s]`,
    /// `s = sqrt(6 / (fan_in + fan_out))` per matrix, so the initial
    /// pre-activation stays near zero and scores start near 0.5.
    pub fn init(m_prime: usize, e_b: usize, e_c: usize, seed: u64) -> Result<Self> {
        if m_prime == 0 || e_b == 0 || e_c == 0 {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        let mut rng = crate::rng::from_seed(seed);
        let d = 2 * m_prime;
        let mut fill = |rows: usize, cols: usize, fan_in: usize, fan_out: usize| {
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
            DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-s..s))
        };
        // Fill order is part of the determinism contract.
        let w_a = fill(d, d, d, d);
        let w_b1 = fill(e_b, d, d, e_b);
        let w_b2 = fill(d, e_b, e_b, d);
        let w_c1 = fill(e_c, d, d, e_c);
        let w_c2 = fill(d, e_c, e_c, d);
        Ok(Self {
            w_a,
            w_b1,
            w_b2,
            w_c1,
            w_c2,
            seed,
        })
    }

    /// Builds a model from explicit weight matrices.
    pub fn from_weights(
        w_a: DMatrix<f64>,
        w_b1: DMatrix<f64>,
        w_b2: DMatrix<f64>,
        w_c1: DMatrix<f64>,
        w_c2: DMatrix<f64>,
    ) -> Result<Self> {
        let d = w_a.nrows();
        if d == 0 || d % 2 != 0 || w_a.ncols() != d {
            return Err(Error::invalid("w_a must be square with even dimension"));
        }
        let e_b = w_b1.nrows();
        let e_c = w_c1.nrows();
        if e_b == 0 || w_b1.ncols() != d || w_b2.nrows() != d || w_b2.ncols() != e_b {
            return Err(Error::invalid("psi_b weight shapes are inconsistent"));
        }
        if e_c == 0 || w_c1.ncols() != d || w_c2.nrows() != d || w_c2.ncols() != e_c {
            return Err(Error::invalid("psi_c weight shapes are inconsistent"));
        }
        Ok(Self {
            w_a,
            w_b1,
            w_b2,
            w_c1,
            w_c2,
            seed: 0,
        })
    }

    /// Plants detector coefficients into the network: `w_a` takes `A'`
    /// directly, and `B'`, `C'` are SVD-factored into the bottlenecked
    /// products. Exact whenever `rank(B') <= e_b` and `rank(C') <= e_c`.
    pub fn from_coefficients(coeffs: &RealCoefficients, e_b: usize, e_c: usize) -> Result<Self> {
        let d = coeffs.dim();
        if e_b == 0 || e_b > d || e_c == 0 || e_c > d {
            return Err(Error::invalid("latent dimensions must lie in 1..=2M'"));
        }
        let (b1, b2) = factor_rank(coeffs.b(), e_b);
        let (c1, c2) = factor_rank(coeffs.c(), e_c);
        Self::from_weights(coeffs.a().clone(), b1, b2, c1, c2)
    }

    pub fn m_prime(&self) -> usize {
        self.w_a.nrows() / 2
    }

    pub fn latent_b(&self) -> usize {
        self.w_b1.nrows()
    }

    pub fn latent_c(&self) -> usize {
        self.w_c1.nrows()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn w_a(&self) -> &DMatrix<f64> {
        &self.w_a
    }

    pub fn w_b1(&self) -> &DMatrix<f64> {
        &self.w_b1
    }

    pub fn w_b2(&self) -> &DMatrix<f64> {
        &self.w_b2
    }

    pub fn w_c1(&self) -> &DMatrix<f64> {
        &self.w_c1
    }

    pub fn w_c2(&self) -> &DMatrix<f64> {
        &self.w_c2
    }

    /// Replaces one weight matrix; shapes must match. Intended for
    /// perturbation-style checks against the analytic gradients.
    pub fn with_weight(mut self, which: WeightId, value: DMatrix<f64>) -> Result<Self> {
        let slot = match which {
            WeightId::A => &mut self.w_a,
            WeightId::B1 => &mut self.w_b1,
            WeightId::B2 => &mut self.w_b2,
            WeightId::C1 => &mut self.w_c1,
            WeightId::C2 => &mut self.w_c2,
        };
        if slot.shape() != value.shape() {
            return Err(Error::DimensionMismatch {
                expected: slot.nrows(),
                actual: value.nrows(),
            });
        }
        *slot = value;
        Ok(self)
    }

    /// Score one pair. Returns `(s, q)`: the sigmoid score and the
    /// pre-activation `q = <w_a x1, x1> + <w_b2 w_b1 x1, x0> + <w_c2 w_c1 x0, x0>`.
    pub fn forward(&self, h_k: &CsiMeasurement, h_k1: &CsiMeasurement) -> Result<(f64, f64)> {
        if h_k.len() != self.m_prime() || h_k1.len() != self.m_prime() {
            return Err(Error::DimensionMismatch {
                expected: self.m_prime(),
                actual: h_k.len().max(h_k1.len()),
            });
        }
        Ok(self.forward_real(&realify_vector(h_k), &realify_vector(h_k1)))
    }

    fn forward_real(&self, x0: &DVector<f64>, x1: &DVector<f64>) -> (f64, f64) {
        let q = x1.dot(&(&self.w_a * x1))
            + x0.dot(&(&self.w_b2 * (&self.w_b1 * x1)))
            + x0.dot(&(&self.w_c2 * (&self.w_c1 * x0)));
        (sigmoid(q), q)
    }

    /// Serializes dims, seed and the five weight matrices (row-major
    /// little-endian f64) behind a versioned header.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&MODEL_VERSION.to_le_bytes())?;
        w.write_all(&(self.m_prime() as u32).to_le_bytes())?;
        w.write_all(&(self.latent_b() as u32).to_le_bytes())?;
        w.write_all(&(self.latent_c() as u32).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for m in [&self.w_a, &self.w_b1, &self.w_b2, &self.w_c1, &self.w_c2] {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    w.write_all(&m[(i, j)].to_le_bytes())?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(Error::invalid("not a LiteNP-Net model file (bad magic)"));
        }
        let mut u32_buf = [0u8; 4];
        r.read_exact(&mut u32_buf)?;
        let version = u32::from_le_bytes(u32_buf);
        if version != MODEL_VERSION {
            return Err(Error::invalid(format!("unsupported model version {version}")));
        }
        r.read_exact(&mut u32_buf)?;
        let m_prime = u32::from_le_bytes(u32_buf) as usize;
        r.read_exact(&mut u32_buf)?;
        let e_b = u32::from_le_bytes(u32_buf) as usize;
        r.read_exact(&mut u32_buf)?;
        let e_c = u32::from_le_bytes(u32_buf) as usize;
        let mut u64_buf = [0u8; 8];
        r.read_exact(&mut u64_buf)?;
        let seed = u64::from_le_bytes(u64_buf);

        let d = 2 * m_prime;
        let mut read_matrix = |rows: usize, cols: usize| -> Result<DMatrix<f64>> {
            let mut m = DMatrix::<f64>::zeros(rows, cols);
            let mut buf = [0u8; 8];
            for i in 0..rows {
                for j in 0..cols {
                    r.read_exact(&mut buf)?;
                    m[(i, j)] = f64::from_le_bytes(buf);
                }
            }
            Ok(m)
        };
        let w_a = read_matrix(d, d)?;
        let w_b1 = read_matrix(e_b, d)?;
        let w_b2 = read_matrix(d, e_b)?;
        let w_c1 = read_matrix(e_c, d)?;
        let w_c2 = read_matrix(d, e_c)?;
        let mut model = Self::from_weights(w_a, w_b1, w_b2, w_c1, w_c2)?;
        model.seed = seed;
        Ok(model)
    }
}

/// Identifies one of the five weight matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightId {
    A,
    B1,
    B2,
    C1,
    C2,
}

/// Splits `m ~ (u sqrt(sv)) (sqrt(sv) v^T)` keeping the `latent` leading
/// singular triplets; exact when `rank(m) <= latent`.
fn factor_rank(m: &DMatrix<f64>, latent: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = m.nrows();
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u requested");
    let v_t = svd.v_t.as_ref().expect("svd with v_t requested");
    let mut w1 = DMatrix::<f64>::zeros(latent, d);
    let mut w2 = DMatrix::<f64>::zeros(d, latent);
    for k in 0..latent.min(svd.singular_values.len()) {
        let root = svd.singular_values[k].sqrt();
        for j in 0..d {
            w1[(k, j)] = root * v_t[(k, j)];
            w2[(j, k)] = root * u[(j, k)];
        }
    }
    (w1, w2)
}

fn sigmoid(q: f64) -> f64 {
    if q >= 0.0 {
        1.0 / (1.0 + (-q).exp())
    } else {
        let e = q.exp();
        e / (1.0 + e)
    }
}

/// Contrastive loss `v * max(0, margin - s)^2 + (1 - v) * s^2`.
pub fn contrastive_loss(s: f64, label: bool, margin: f64) -> f64 {
    if label {
        let hinge = (margin - s).max(0.0);
        hinge * hinge
    } else {
        s * s
    }
}

/// Gradients of the mean batch loss with respect to the five weight matrices.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
}

impl Gradients {
    fn zeros_like(model: &LiteNpModel) -> Self {
        Self {
            a: DMatrix::zeros(model.w_a.nrows(), model.w_a.ncols()),
            b1: DMatrix::zeros(model.w_b1.nrows(), model.w_b1.ncols()),
            b2: DMatrix::zeros(model.w_b2.nrows(), model.w_b2.ncols()),
            c1: DMatrix::zeros(model.w_c1.nrows(), model.w_c1.ncols()),
            c2: DMatrix::zeros(model.w_c2.nrows(), model.w_c2.ncols()),
        }
    }
}

/// Analytic gradients for a batch of samples.
pub fn gradients(model: &LiteNpModel, batch: &[Sample], margin: f64) -> Result<Gradients> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("gradient batch"));
    }
    let realified: Vec<(DVector<f64>, DVector<f64>, bool)> = batch
        .iter()
        .map(|s| (realify_vector(&s.h_k), realify_vector(&s.h_k1), s.label))
        .collect();
    let (grads, _) = batch_gradients(model, &realified, margin);
    Ok(grads)
}

/// Core gradient pass over pre-realified samples. Returns the gradients of
/// the mean loss and the mean loss itself.
///
/// With `u = w_b1 x1`, `w = w_b2^T x0`, `p = w_c1 x0`, `r = w_c2^T x0`:
/// `dq/dw_a = x1 x1^T`, `dq/dw_b2 = x0 u^T`, `dq/dw_b1 = w x1^T`,
/// `dq/dw_c2 = x0 p^T`, `dq/dw_c1 = r x0^T`.
fn batch_gradients(
    model: &LiteNpModel,
    batch: &[(DVector<f64>, DVector<f64>, bool)],
    margin: f64,
) -> (Gradients, f64) {
    let mut grads = Gradients::zeros_like(model);
    let inv_n = 1.0 / batch.len() as f64;
    let mut loss_sum = 0.0;
    for (x0, x1, label) in batch {
        let u = &model.w_b1 * x1;
        let w = model.w_b2.tr_mul(x0);
        let p = &model.w_c1 * x0;
        let r = model.w_c2.tr_mul(x0);
        let q = x1.dot(&(&model.w_a * x1)) + u.dot(&w) + p.dot(&r);
        let s = sigmoid(q);
        loss_sum += contrastive_loss(s, *label, margin);

        let dl_ds = if *label {
            -2.0 * (margin - s).max(0.0)
        } else {
            2.0 * s
        };
        let g = dl_ds * s * (1.0 - s) * inv_n;
        if g == 0.0 {
            continue;
        }
        grads.a.ger(g, x1, x1, 1.0);
        grads.b2.ger(g, x0, &u, 1.0);
        grads.b1.ger(g, &w, x1, 1.0);
        grads.c2.ger(g, x0, &p, 1.0);
        grads.c1.ger(g, &r, x0, 1.0);
    }
    (grads, loss_sum * inv_n)
}

/// Per-weight RMSprop caches.
#[derive(Debug, Clone)]
pub struct RmspropState {
    a: DMatrix<f64>,
    b1: DMatrix<f64>,
    b2: DMatrix<f64>,
    c1: DMatrix<f64>,
    c2: DMatrix<f64>,
}

impl RmspropState {
    pub fn new(model: &LiteNpModel) -> Self {
        let g = Gradients::zeros_like(model);
        Self {
            a: g.a,
            b1: g.b1,
            b2: g.b2,
            c1: g.c1,
            c2: g.c2,
        }
    }
}

fn rmsprop_update(
    w: &mut DMatrix<f64>,
    cache: &mut DMatrix<f64>,
    grad: &DMatrix<f64>,
    lr: f64,
    decay: f64,
    eps: f64,
) {
    for ((wi, ci), gi) in w.iter_mut().zip(cache.iter_mut()).zip(grad.iter()) {
        *ci = decay * *ci + (1.0 - decay) * gi * gi;
        *wi -= lr * gi / (ci.sqrt() + eps);
    }
}

/// One RMSprop step: `cache <- decay cache + (1 - decay) g^2`,
/// `w <- w - lr g / (sqrt(cache) + eps)`, elementwise.
pub fn rmsprop_step(
    model: &mut LiteNpModel,
    state: &mut RmspropState,
    grads: &Gradients,
    config: &TrainConfig,
) {
    let (lr, decay, eps) = (
        config.learning_rate,
        config.rmsprop_decay,
        config.rmsprop_epsilon,
    );
    rmsprop_update(&mut model.w_a, &mut state.a, &grads.a, lr, decay, eps);
    rmsprop_update(&mut model.w_b1, &mut state.b1, &grads.b1, lr, decay, eps);
    rmsprop_update(&mut model.w_b2, &mut state.b2, &grads.b2, lr, decay, eps);
    rmsprop_update(&mut model.w_c1, &mut state.c1, &grads.c1, lr, decay, eps);
    rmsprop_update(&mut model.w_c2, &mut state.c2, &grads.c2, lr, decay, eps);
}

/// Per-epoch training record.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Loss trajectory of a training run.
#[derive(Debug, Clone, Default)]
pub struct TrainingHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainingHistory {
    pub fn best_val_loss(&self) -> Option<f64> {
        self.records
            .iter()
            .map(|r| r.val_loss)
            .fold(None, |best, v| Some(best.map_or(v, |b: f64| b.min(v))))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,train_loss,val_loss")?;
        for r in &self.records {
            writeln!(w, "{},{},{}", r.epoch, r.train_loss, r.val_loss)?;
        }
        Ok(())
    }
}

/// Trains the model with minibatch RMSprop and early stopping.
///
/// The dataset is shuffled once with the config seed; the trailing
/// `validation_fraction` of the shuffle is held out. Training stops when the
/// validation loss has not improved for `patience` consecutive epochs or at
/// `max_epochs`, and the weights with the best validation loss are returned.
pub fn train(
    model: LiteNpModel,
    dataset: &[Sample],
    config: &TrainConfig,
) -> Result<(LiteNpModel, TrainingHistory)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyInput("training dataset"));
    }
    if dataset.iter().all(|s| s.label) || dataset.iter().all(|s| !s.label) {
        return Err(Error::SingleClass);
    }
    let m_prime = model.m_prime();
    for s in dataset {
        if s.h_k.len() != m_prime || s.h_k1.len() != m_prime {
            return Err(Error::DimensionMismatch {
                expected: m_prime,
                actual: s.h_k.len().max(s.h_k1.len()),
            });
        }
    }

    let realified: Vec<(DVector<f64>, DVector<f64>, bool)> = dataset
        .iter()
        .map(|s| (realify_vector(&s.h_k), realify_vector(&s.h_k1), s.label))
        .collect();

    let mut rng = crate::rng::from_seed(config.seed);
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    shuffle(&mut indices, &mut rng);
    let val_n = ((dataset.len() as f64 * config.validation_fraction).round() as usize)
        .clamp(1, dataset.len() - 1);
    let (train_idx, val_idx) = indices.split_at(dataset.len() - val_n);
    let mut train_order: Vec<usize> = train_idx.to_vec();

    let mut model = model;
    let mut state = RmspropState::new(&model);
    let mut history = TrainingHistory::default();
    let mut best_val = f64::INFINITY;
    let mut best_model = model.clone();
    let mut epochs_without_improvement = 0usize;

    for epoch in 1..=config.max_epochs {
        shuffle(&mut train_order, &mut rng);
        let mut loss_sum = 0.0;
        for chunk in train_order.chunks(config.batch_size) {
            let batch: Vec<(DVector<f64>, DVector<f64>, bool)> =
                chunk.iter().map(|&i| realified[i].clone()).collect();
            let (grads, batch_loss) = batch_gradients(&model, &batch, config.margin);
            loss_sum += batch_loss * chunk.len() as f64;
            rmsprop_step(&mut model, &mut state, &grads, config);
        }
        let train_loss = loss_sum / train_order.len() as f64;
        let val_loss = val_idx
            .iter()
            .map(|&i| {
                let (x0, x1, label) = &realified[i];
                let (s, _) = model.forward_real(x0, x1);
                contrastive_loss(s, *label, config.margin)
            })
            .sum::<f64>()
            / val_idx.len() as f64;
        history.records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });

        if val_loss < best_val {
            best_val = val_loss;
            best_model = model.clone();
            epochs_without_improvement = 0;
        } else {
            epochs_without_improvement += 1;
            if epochs_without_improvement >= config.patience {
                break;
            }
        }
    }
    best_model.seed = config.seed;
    Ok((best_model, history))
}

/// Fisher-Yates with the caller's generator; pinned here so the training
/// trajectory never depends on shuffle internals elsewhere.
fn shuffle<R: Rng>(indices: &mut [usize], rng: &mut R) {
    for i in (1..indices.len()).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
}

/// Sigmoid scores for every sample, order-preserving.
pub fn score_dataset(model: &LiteNpModel, samples: &[Sample]) -> Result<Vec<(f64, bool)>> {
    samples
        .iter()
        .map(|s| model.forward(&s.h_k, &s.h_k1).map(|(score, _)| (score, s.label)))
        .collect()
}

/// Pre-activation values `q` for every sample. Rank-equivalent to the
/// sigmoid scores but immune to saturation ties in floating point, which
/// makes it the better input for ROC/AUC computation.
pub fn raw_scores(model: &LiteNpModel, samples: &[Sample]) -> Result<Vec<(f64, bool)>> {
    samples
        .iter()
        .map(|s| model.forward(&s.h_k, &s.h_k1).map(|(_, q)| (q, s.label)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{OfdmConfig, PowerDelayProfile};
    use crate::detector::{build_np, np_statistic_real};
    use crate::rng;
    use crate::stats::ChannelStatistics;
    use num_complex::Complex64;
    use rand_distr::StandardNormal;

    fn random_csi<R: Rng>(n: usize, rng: &mut R) -> CsiMeasurement {
        CsiMeasurement::from_vec(
            (0..n)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect(),
        )
    }

    fn random_batch<R: Rng>(m: usize, count: usize, rng: &mut R) -> Vec<Sample> {
        (0..count)
            .map(|i| Sample::new(random_csi(m, rng), random_csi(m, rng), i % 2 == 0))
            .collect()
    }

    #[test]
    fn init_is_deterministic_and_shaped() {
        let a = LiteNpModel::init(4, 3, 5, 77).unwrap();
        let b = LiteNpModel::init(4, 3, 5, 77).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.w_b1().shape(), (3, 8));
        assert_eq!(a.w_b2().shape(), (8, 3));
        assert_eq!(a.w_c1().shape(), (5, 8));
        assert_eq!(a.w_c2().shape(), (8, 5));
        assert_eq!(a.w_a().shape(), (8, 8));
        let c = LiteNpModel::init(4, 3, 5, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_weights_score_half() {
        let zero = LiteNpModel::from_weights(
            DMatrix::zeros(8, 8),
            DMatrix::zeros(3, 8),
            DMatrix::zeros(8, 3),
            DMatrix::zeros(3, 8),
            DMatrix::zeros(8, 3),
        )
        .unwrap();
        let mut r = rng::from_seed(5);
        let (s, q) = zero
            .forward(&random_csi(4, &mut r), &random_csi(4, &mut r))
            .unwrap();
        assert_eq!(q, 0.0);
        assert_eq!(s, 0.5);
    }

    #[test]
    fn sigmoid_identities() {
        for q in [-7.3, -0.2, 0.0, 1.4, 11.0] {
            assert!((sigmoid(q) + sigmoid(-q) - 1.0).abs() < 1e-12);
        }
        assert!(sigmoid(-1.0) < sigmoid(0.0));
        assert!(sigmoid(0.0) < sigmoid(1.0));
    }

    #[test]
    fn planted_detector_reproduces_the_real_statistic() {
        let pdp = PowerDelayProfile::exponential(2, 1.0).unwrap();
        let config = OfdmConfig::fully_active(6, 0.125).unwrap();
        let stats = ChannelStatistics::from_model(&pdp, &config, 0.9, 0.2, 1.0, 0.1).unwrap();
        let real = RealCoefficients::from_complex(&build_np(&stats).unwrap());
        // latent 2L = 4 suffices: rank(B'), rank(C') <= 2L
        let model = LiteNpModel::from_coefficients(&real, 4, 4).unwrap();
        let mut r = rng::from_seed(13);
        for _ in 0..50 {
            let h0 = random_csi(6, &mut r);
            let h1 = random_csi(6, &mut r);
            let x0 = realify_vector(&h0);
            let x1 = realify_vector(&h1);
            let expected = np_statistic_real(&x0, &x1, &real).unwrap();
            let (_, q) = model.forward(&h0, &h1).unwrap();
            assert!(
                (q - expected).abs() <= 1e-9 * (1.0 + expected.abs()),
                "q={q} expected={expected}"
            );
        }
    }

    #[test]
    fn contrastive_loss_cases() {
        assert_eq!(contrastive_loss(1.0, true, 1.0), 0.0);
        assert!((contrastive_loss(0.8, false, 1.0) - 0.64).abs() < 1e-15);
        assert!((contrastive_loss(0.3, true, 1.0) - 0.49).abs() < 1e-15);
        assert_eq!(contrastive_loss(0.0, false, 1.0), 0.0);
    }

    #[test]
    fn gradients_zero_when_hinge_inactive() {
        // margin 0.5 with a strongly positive pre-activation keeps s >= margin
        let d = 4;
        let model = LiteNpModel::from_weights(
            DMatrix::identity(d, d) * 50.0,
            DMatrix::zeros(2, d),
            DMatrix::zeros(d, 2),
            DMatrix::zeros(2, d),
            DMatrix::zeros(d, 2),
        )
        .unwrap();
        let mut r = rng::from_seed(3);
        let batch: Vec<Sample> = (0..4)
            .map(|_| Sample::new(random_csi(2, &mut r), random_csi(2, &mut r), true))
            .collect();
        let g = gradients(&model, &batch, 0.5).unwrap();
        for m in [&g.a, &g.b1, &g.b2, &g.c1, &g.c2] {
            assert!(m.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        let mut r = rng::from_seed(42);
        let model = LiteNpModel::init(3, 4, 4, 911).unwrap();
        let batch = random_batch(3, 6, &mut r);
        let margin = 1.0;
        let analytic = gradients(&model, &batch, margin).unwrap();

        let mean_loss = |m: &LiteNpModel| -> f64 {
            batch
                .iter()
                .map(|s| {
                    let (score, _) = m.forward(&s.h_k, &s.h_k1).unwrap();
                    contrastive_loss(score, s.label, margin)
                })
                .sum::<f64>()
                / batch.len() as f64
        };

        let h = 1e-5;
        let mut max_rel = 0.0_f64;
        let fields: [(&DMatrix<f64>, WeightId, &DMatrix<f64>); 5] = [
            (&analytic.a, WeightId::A, model.w_a()),
            (&analytic.b1, WeightId::B1, model.w_b1()),
            (&analytic.b2, WeightId::B2, model.w_b2()),
            (&analytic.c1, WeightId::C1, model.w_c1()),
            (&analytic.c2, WeightId::C2, model.w_c2()),
        ];
        for (grad, which, weights) in fields {
            for i in 0..grad.nrows() {
                for j in 0..grad.ncols() {
                    let perturb = |delta: f64| -> f64 {
                        let mut w = weights.clone();
                        w[(i, j)] += delta;
                        let m = model.clone().with_weight(which, w).unwrap();
                        mean_loss(&m)
                    };
                    let numeric = (perturb(h) - perturb(-h)) / (2.0 * h);
                    let denom = (grad[(i, j)].abs() + numeric.abs()).max(1e-6);
                    max_rel = max_rel.max((grad[(i, j)] - numeric).abs() / denom);
                }
            }
        }
        assert!(max_rel < 1e-5, "max relative gradient error {max_rel}");
    }

    #[test]
    fn rmsprop_first_step_and_shrinkage() {
        let d = 2;
        let mut model = LiteNpModel::from_weights(
            DMatrix::zeros(d, d),
            DMatrix::zeros(1, d),
            DMatrix::zeros(d, 1),
            DMatrix::zeros(1, d),
            DMatrix::zeros(d, 1),
        )
        .unwrap();
        let mut state = RmspropState::new(&model);
        let config = TrainConfig::default();
        let ones = Gradients {
            a: DMatrix::from_element(d, d, 1.0),
            b1: DMatrix::from_element(1, d, 1.0),
            b2: DMatrix::from_element(d, 1, 1.0),
            c1: DMatrix::from_element(1, d, 1.0),
            c2: DMatrix::from_element(d, 1, 1.0),
        };
        rmsprop_step(&mut model, &mut state, &ones, &config);
        // -lr / (sqrt(0.1) + eps), evaluated independently
        let expected = -0.0031622775601683824;
        assert!((model.w_a()[(0, 0)] - expected).abs() < 1e-12);

        let first = model.w_a()[(0, 0)];
        rmsprop_step(&mut model, &mut state, &ones, &config);
        let second_step = model.w_a()[(0, 0)] - first;
        assert!(
            second_step.abs() < expected.abs(),
            "cache growth must shrink steps"
        );

        // zero gradient leaves weights untouched
        let before = model.clone();
        let zeros = Gradients::zeros_like(&model);
        rmsprop_step(&mut model, &mut state, &zeros, &config);
        assert_eq!(before.w_a(), model.w_a());
    }

    #[test]
    fn training_separates_an_easy_task() {
        // positives: identical pairs; negatives: independent pairs
        let m = 4;
        let mut r = rng::from_seed(400);
        let mut data = Vec::new();
        for i in 0..1600 {
            if i % 2 == 0 {
                let h = random_csi(m, &mut r);
                data.push(Sample::new(h.clone(), h, true));
            } else {
                data.push(Sample::new(
                    random_csi(m, &mut r),
                    random_csi(m, &mut r),
                    false,
                ));
            }
        }
        let config = TrainConfig {
            max_epochs: 200,
            seed: 7,
            learning_rate: 0.002,
            ..TrainConfig::default()
        };
        let model = LiteNpModel::init(m, 8, 8, 7).unwrap();
        let (_, history) = train(model, &data, &config).unwrap();
        let best = history.best_val_loss().unwrap();
        assert!(best < 0.05, "best validation loss {best} on a separable task");
    }

    #[test]
    fn training_stops_after_patience_on_constant_loss() {
        // all-zero CSI vectors give a constant loss surface
        let zero = CsiMeasurement::from_vec(vec![Complex64::new(0.0, 0.0); 2]);
        let data: Vec<Sample> = (0..20)
            .map(|i| Sample::new(zero.clone(), zero.clone(), i % 2 == 0))
            .collect();
        let config = TrainConfig {
            patience: 1,
            max_epochs: 50,
            seed: 1,
            ..TrainConfig::default()
        };
        let model = LiteNpModel::init(2, 2, 2, 1).unwrap();
        let (_, history) = train(model, &data, &config).unwrap();
        assert_eq!(history.records.len(), 2);
    }

    #[test]
    fn training_is_deterministic() {
        let mut r = rng::from_seed(88);
        let data = random_batch(3, 60, &mut r);
        let config = TrainConfig {
            max_epochs: 5,
            patience: 5,
            seed: 21,
            ..TrainConfig::default()
        };
        let (m1, h1) = train(LiteNpModel::init(3, 4, 4, 21).unwrap(), &data, &config).unwrap();
        let (m2, h2) = train(LiteNpModel::init(3, 4, 4, 21).unwrap(), &data, &config).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(h1.records.len(), h2.records.len());
        for (a, b) in h1.records.iter().zip(&h2.records) {
            assert_eq!(a.train_loss, b.train_loss);
            assert_eq!(a.val_loss, b.val_loss);
        }
    }

    #[test]
    fn training_rejects_single_class() {
        let mut r = rng::from_seed(9);
        let data: Vec<Sample> = (0..10)
            .map(|_| Sample::new(random_csi(2, &mut r), random_csi(2, &mut r), true))
            .collect();
        let config = TrainConfig::default();
        match train(LiteNpModel::init(2, 2, 2, 0).unwrap(), &data, &config) {
            Err(Error::SingleClass) => {}
            other => panic!("expected SingleClass, got {other:?}"),
        }
    }

    #[test]
    fn scoring_preserves_order_and_handles_empty() {
        let model = LiteNpModel::init(2, 2, 2, 4).unwrap();
        assert!(score_dataset(&model, &[]).unwrap().is_empty());
        let mut r = rng::from_seed(31);
        let data = random_batch(2, 8, &mut r);
        let scored = score_dataset(&model, &data).unwrap();
        assert_eq!(scored.len(), 8);
        for (s, d) in scored.iter().zip(&data) {
            assert_eq!(s.1, d.label);
            assert!(s.0 > 0.0 && s.0 < 1.0);
        }
    }

    #[test]
    fn model_file_round_trips_bit_exact() {
        let model = LiteNpModel::init(5, 6, 3, 123).unwrap();
        let dir = std::env::temp_dir().join("pla_core_model_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.bin");
        model.save(&path).unwrap();
        let loaded = LiteNpModel::load(&path).unwrap();
        assert_eq!(model, loaded);
        assert_eq!(loaded.seed(), 123);
        std::fs::remove_dir_all(&dir).ok();
    }
}
