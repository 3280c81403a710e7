//! Neyman-Pearson detection of rogue transmitters from CSI pairs.
//!
//! The log-likelihood-ratio test reduces to the quadratic form
//!
//! `L = h1^H A h1 + Re{h0^H B h1} + h0^H C h0  >  threshold`
//!
//! with coefficient matrices built from the channel statistics:
//!
//! - `A = -(sigma_ba^-1 - sigma_ma^-1)`
//! - `B = 2 (sigma_h sigma_h_hat^-1)^H (alpha sigma_ba^-1 - beta/sqrt(theta) sigma_ma^-1)`
//! - `C = -sigma_h_hat^-1 sigma_h (alpha^2 sigma_ba^-1 - beta^2/theta sigma_ma^-1) sigma_h sigma_h_hat^-1`
//!
//! An equivalent real form over stacked `[Re; Im]` vectors, a direct
//! Gaussian log-likelihood oracle, a noise-blind variant and a Pearson
//! correlation baseline round out the module.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::CsiMeasurement;
use crate::error::{Error, Result};
use crate::linalg;
use crate::stats::ChannelStatistics;

/// Coefficient matrices of the complex-form NP statistic. `A` and `C` are
/// Hermitian; `B` is general.
#[derive(Debug, Clone)]
pub struct NpCoefficients {
    a: DMatrix<Complex64>,
    b: DMatrix<Complex64>,
    c: DMatrix<Complex64>,
}

impl NpCoefficients {
    pub fn a(&self) -> &DMatrix<Complex64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<Complex64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<Complex64> {
        &self.c
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Writes the three matrices to a little-endian binary dump:
    /// magic `NPC1`, dimension as u32, then A, B, C row-major with each
    /// complex entry as two f64 (re, im).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(b"NPC1")?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        for m in [&self.a, &self.b, &self.c] {
            write_complex_matrix(&mut w, m)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a dump produced by [`NpCoefficients::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"NPC1" {
            return Err(Error::invalid("not an NP coefficient dump (bad magic)"));
        }
        let mut dim_bytes = [0u8; 4];
        r.read_exact(&mut dim_bytes)?;
        let n = u32::from_le_bytes(dim_bytes) as usize;
        let a = read_complex_matrix(&mut r, n, n)?;
        let b = read_complex_matrix(&mut r, n, n)?;
        let c = read_complex_matrix(&mut r, n, n)?;
        Ok(Self { a, b, c })
    }
}

fn write_complex_matrix<W: Write>(w: &mut W, m: &DMatrix<Complex64>) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].re.to_le_bytes())?;
            w.write_all(&m[(i, j)].im.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_complex_matrix<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<DMatrix<Complex64>> {
    let mut m = DMatrix::<Complex64>::zeros(rows, cols);
    let mut buf = [0u8; 16];
    for i in 0..rows {
        for j in 0..cols {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[0..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..16].try_into().unwrap());
            m[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(m)
}

/// Real-form coefficients over stacked `[Re; Im]` vectors. Each matrix is the
/// `[[Re, -Im], [Im, Re]]` expansion of its complex source.
#[derive(Debug, Clone)]
pub struct RealCoefficients {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl RealCoefficients {
    pub fn from_complex(coeffs: &NpCoefficients) -> Self {
        Self {
            a: realify_matrix(coeffs.a()),
            b: realify_matrix(coeffs.b()),
            c: realify_matrix(coeffs.c()),
        }
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// Decision threshold for any of the detectors' scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionThreshold {
    pub value: f64,
}

/// Outcome of comparing a statistic against a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Legitimate,
    Rogue,
}

/// Greater-is-legitimate decision; the boundary counts as rogue.
pub fn decide(statistic: f64, threshold: DecisionThreshold) -> Decision {
    if statistic > threshold.value {
        Decision::Legitimate
    } else {
        Decision::Rogue
    }
}

struct Inverses {
    inv_ba: DMatrix<Complex64>,
    inv_ma: DMatrix<Complex64>,
}

fn invert_conditionals(
    sigma_ba: &DMatrix<Complex64>,
    sigma_ma: &DMatrix<Complex64>,
) -> Result<Inverses> {
    Ok(Inverses {
        inv_ba: linalg::hermitian_inverse(sigma_ba, "sigma_ba")?,
        inv_ma: linalg::hermitian_inverse(sigma_ma, "sigma_ma")?,
    })
}

fn assemble_coefficients(
    inv: &Inverses,
    gain_adjoint: &DMatrix<Complex64>, // (sigma_h sigma_h_hat^-1)^H, identity for the noise-blind variant
    alpha: f64,
    beta_over_sqrt_theta: f64,
) -> NpCoefficients {
    let mut a = -(&inv.inv_ba - &inv.inv_ma);
    linalg::hermitian_symmetrize(&mut a);

    let weighted_first = &inv.inv_ba * Complex64::new(alpha, 0.0)
        - &inv.inv_ma * Complex64::new(beta_over_sqrt_theta, 0.0);
    let b = gain_adjoint * &weighted_first * Complex64::new(2.0, 0.0);

    let weighted_second = &inv.inv_ba * Complex64::new(alpha * alpha, 0.0)
        - &inv.inv_ma * Complex64::new(beta_over_sqrt_theta * beta_over_sqrt_theta, 0.0);
    let mut c = -(gain_adjoint * &weighted_second * &gain_adjoint.adjoint());
    linalg::hermitian_symmetrize(&mut c);

    NpCoefficients { a, b, c }
}

/// Builds the NP coefficients from full channel statistics.
pub fn build_np(stats: &ChannelStatistics) -> Result<NpCoefficients> {
    let inv = invert_conditionals(stats.sigma_ba(), stats.sigma_ma())?;
    // (sigma_h sigma_h_hat^-1)^H = sigma_h_hat^-1 sigma_h for Hermitian factors
    let chol = linalg::cholesky_named(stats.sigma_h_hat(), "sigma_h_hat")?;
    let gain_adjoint = chol.solve(stats.sigma_h());
    Ok(assemble_coefficients(
        &inv,
        &gain_adjoint,
        stats.alpha(),
        stats.beta() / stats.theta().sqrt(),
    ))
}

/// Noise-blind benchmark: the conditional mean maps ignore estimation noise
/// (`sigma_h sigma_h_hat^-1` replaced by the identity) and the covariances
/// are completed consistently with those means:
/// `(1 - alpha^2) sigma_h + noise_var I` and
/// `((1 - beta^2) / theta) sigma_h + noise_var I`.
/// Coincides with [`build_np`] when `noise_var = 0`.
pub fn build_noise_blind_np(stats: &ChannelStatistics) -> Result<NpCoefficients> {
    let n = stats.dim();
    let identity = DMatrix::<Complex64>::identity(n, n);
    let noise = &identity * Complex64::new(stats.noise_var(), 0.0);
    let alpha = stats.alpha();
    let beta = stats.beta();
    let theta = stats.theta();

    let mut sigma_ba = stats.sigma_h() * Complex64::new(1.0 - alpha * alpha, 0.0) + &noise;
    let mut sigma_ma =
        stats.sigma_h() * Complex64::new((1.0 - beta * beta) / theta, 0.0) + &noise;
    linalg::hermitian_symmetrize(&mut sigma_ba);
    linalg::hermitian_symmetrize(&mut sigma_ma);

    let inv = invert_conditionals(&sigma_ba, &sigma_ma)?;
    Ok(assemble_coefficients(
        &inv,
        &identity,
        alpha,
        beta / theta.sqrt(),
    ))
}

fn check_dims(h_k: &CsiMeasurement, h_k1: &CsiMeasurement, dim: usize) -> Result<()> {
    if h_k.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: h_k.len(),
        });
    }
    if h_k1.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: h_k1.len(),
        });
    }
    Ok(())
}

/// Evaluates the complex-form NP statistic. The `A` and `C` terms are
/// Hermitian quadratic forms, so the result is real up to round-off; the
/// real part is returned.
pub fn np_statistic(
    h_k: &CsiMeasurement,
    h_k1: &CsiMeasurement,
    coeffs: &NpCoefficients,
) -> Result<f64> {
    check_dims(h_k, h_k1, coeffs.dim())?;
    let x0 = h_k.values();
    let x1 = h_k1.values();
    let term_a = x1.dotc(&(coeffs.a() * x1));
    let term_b = x0.dotc(&(coeffs.b() * x1));
    let term_c = x0.dotc(&(coeffs.c() * x0));
    Ok(term_a.re + term_b.re + term_c.re)
}

/// Stacks a complex vector as `[Re; Im]`.
pub fn realify_vector(h: &CsiMeasurement) -> DVector<f64> {
    let n = h.len();
    let mut out = DVector::<f64>::zeros(2 * n);
    for (i, z) in h.values().iter().enumerate() {
        out[i] = z.re;
        out[n + i] = z.im;
    }
    out
}

/// Expands a complex matrix to its real `[[Re, -Im], [Im, Re]]` block form,
/// so that `x1^T realify(K) x2 = Re{h1^H K h2}` for stacked vectors.
pub fn realify_matrix(k: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = k.nrows();
    debug_assert_eq!(n, k.ncols());
    let mut out = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = k[(i, j)];
            out[(i, j)] = z.re;
            out[(i, n + j)] = -z.im;
            out[(n + i, j)] = z.im;
            out[(n + i, n + j)] = z.re;
        }
    }
    out
}

/// Real-form statistic `x1^T A' x1 + x0^T B' x1 + x0^T C' x0`.
pub fn np_statistic_real(
    x0: &DVector<f64>,
    x1: &DVector<f64>,
    coeffs: &RealCoefficients,
) -> Result<f64> {
    let dim = coeffs.dim();
    if x0.len() != dim || x1.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: x0.len().max(x1.len()),
        });
    }
    Ok(x1.dot(&(coeffs.a() * x1)) + x0.dot(&(coeffs.b() * x1)) + x0.dot(&(coeffs.c() * x0)))
}

/// Direct evaluation of the Gaussian log-likelihood ratio
/// `ln f(h_k1 | h_k; legit) - ln f(h_k1 | h_k; attacker)` from the
/// conditional means and covariances, without the quadratic-form algebra.
/// Satisfies `np_statistic = log_likelihood_oracle + ln det(sigma_ba) - ln det(sigma_ma)`.
pub fn log_likelihood_oracle(
    h_k: &CsiMeasurement,
    h_k1: &CsiMeasurement,
    stats: &ChannelStatistics,
) -> Result<f64> {
    check_dims(h_k, h_k1, stats.dim())?;
    let legit = crate::stats::conditional_params_legit(stats)?;
    let attacker = crate::stats::conditional_params_attacker(stats)?;

    let log_density = |mean: DVector<Complex64>,
                       cov: &DMatrix<Complex64>,
                       name: &'static str|
     -> Result<f64> {
        let chol = linalg::cholesky_named(cov, name)?;
        let centered = h_k1.values() - mean;
        let solved = chol.solve(&centered);
        let quad = centered.dotc(&solved).re;
        // complex Gaussian: -n ln pi - ln det - quad
        Ok(-(stats.dim() as f64) * std::f64::consts::PI.ln() - linalg::ln_det(&chol) - quad)
    };

    let log_f0 = log_density(legit.mean_for(h_k), legit.covariance(), "sigma_ba")?;
    let log_f1 = log_density(attacker.mean_for(h_k), attacker.covariance(), "sigma_ma")?;
    Ok(log_f0 - log_f1)
}

/// Input representation for the Pearson baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PearsonMode {
    /// Correlate the stacked real/imaginary parts (2M' points).
    ComplexParts,
    /// Correlate the per-subcarrier amplitudes (M' points).
    Amplitude,
}

/// Pearson correlation between two CSI measurements.
pub fn pearson_statistic(
    h_k: &CsiMeasurement,
    h_k1: &CsiMeasurement,
    mode: PearsonMode,
) -> Result<f64> {
    if h_k.len() != h_k1.len() {
        return Err(Error::DimensionMismatch {
            expected: h_k.len(),
            actual: h_k1.len(),
        });
    }
    let (a, b): (Vec<f64>, Vec<f64>) = match mode {
        PearsonMode::ComplexParts => (
            realify_vector(h_k).iter().copied().collect(),
            realify_vector(h_k1).iter().copied().collect(),
        ),
        PearsonMode::Amplitude => (
            h_k.values().iter().map(|z| z.norm()).collect(),
            h_k1.values().iter().map(|z| z.norm()).collect(),
        ),
    };
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(&b) {
        cov += (x - mean_a) * (y - mean_b);
        var_a += (x - mean_a) * (x - mean_a);
        var_b += (y - mean_b) * (y - mean_b);
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::invalid(
            "pearson correlation undefined for a zero-variance input",
        ));
    }
    Ok(cov / (var_a.sqrt() * var_b.sqrt()))
}
