//! True and estimated channel statistics.
//!
//! The detector consumes four Hermitian covariance matrices along with the
//! correlation coefficients `alpha`, `beta` and the power ratio `theta`:
//! the CFR covariance `sigma_h`, the measurement covariance
//! `sigma_h_hat = sigma_h + noise_var * I`, and the conditional covariances
//! `sigma_ba` / `sigma_ma` of the next measurement given the current one
//! under the legitimate and attacker hypotheses. All of them can be built
//! in closed form from the channel model, or estimated from CSI pairs with
//! the sample estimators implemented here.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::{CsiMeasurement, OfdmConfig, PowerDelayProfile};
use crate::error::{Error, Result};
use crate::linalg;

/// A pair of consecutive CSI measurements (reference, next).
pub type CsiPair = (CsiMeasurement, CsiMeasurement);

/// Which subcarriers feed the scalar correlation estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubcarrierSelection {
    /// Average the per-subcarrier estimates over all active subcarriers.
    Average,
    /// Use a single subcarrier (position within the active set).
    Single(usize),
}

/// Channel covariance on the active subcarriers:
/// `sigma_h[m, m'] = sum_l variance(l) * exp(-j 2 pi (m - m') l / M)`.
///
/// Equivalently `sum_l variance(l) * v_l v_l^H` with DFT steering vectors
/// restricted to the active indices; its rank is the number of taps.
pub fn true_sigma_h(pdp: &PowerDelayProfile, config: &OfdmConfig) -> Result<DMatrix<Complex64>> {
    let m_total = config.total_subcarriers();
    if pdp.num_taps() > m_total {
        return Err(Error::DimensionMismatch {
            expected: m_total,
            actual: pdp.num_taps(),
        });
    }
    let active = config.active_indices();
    let n = active.len();
    let mut sigma = DMatrix::<Complex64>::zeros(n, n);
    for (i, &m_i) in active.iter().enumerate() {
        for (j, &m_j) in active.iter().enumerate() {
            let mut sum = Complex64::new(0.0, 0.0);
            for (l, &v) in pdp.tap_variances().iter().enumerate() {
                let phase = -2.0 * std::f64::consts::PI * (m_i as f64 - m_j as f64) * l as f64
                    / m_total as f64;
                sum += Complex64::from_polar(v, phase);
            }
            sigma[(i, j)] = sum;
        }
    }
    linalg::hermitian_symmetrize(&mut sigma);
    Ok(sigma)
}

/// The full statistics bundle consumed by the NP detector.
#[derive(Debug, Clone)]
pub struct ChannelStatistics {
    alpha: f64,
    beta: f64,
    theta: f64,
    noise_var: f64,
    sigma_h: DMatrix<Complex64>,
    sigma_h_hat: DMatrix<Complex64>,
    sigma_ba: DMatrix<Complex64>,
    sigma_ma: DMatrix<Complex64>,
}

impl ChannelStatistics {
    /// Closed-form statistics for the simulated channel model.
    ///
    /// `sigma_ba = alpha^2 (sigma_h - sigma_h sigma_h_hat^-1 sigma_h)
    ///             + (1 - alpha^2) sigma_h + noise_var I`, and `sigma_ma`
    /// analogously with `beta^2 / theta`, `(1 - beta^2) / theta`.
    pub fn from_model(
        pdp: &PowerDelayProfile,
        config: &OfdmConfig,
        alpha: f64,
        beta: f64,
        theta: f64,
        noise_var: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::invalid(format!("beta {beta} outside [0, 1]")));
        }
        if !(theta > 0.0) {
            return Err(Error::invalid("theta must be positive"));
        }
        if !(noise_var >= 0.0) {
            return Err(Error::invalid("noise_var must be nonnegative"));
        }
        let sigma_h = true_sigma_h(pdp, config)?;
        let n = sigma_h.nrows();
        let identity = DMatrix::<Complex64>::identity(n, n);
        let sigma_h_hat = &sigma_h + &identity * Complex64::new(noise_var, 0.0);

        // posterior covariance sigma_h - sigma_h sigma_h_hat^-1 sigma_h
        let chol = linalg::cholesky_named(&sigma_h_hat, "sigma_h_hat")?;
        let solved = chol.solve(&sigma_h); // sigma_h_hat^-1 sigma_h
        let mut posterior = &sigma_h - &sigma_h * &solved;
        linalg::hermitian_symmetrize(&mut posterior);

        let mut sigma_ba = &posterior * Complex64::new(alpha * alpha, 0.0)
            + &sigma_h * Complex64::new(1.0 - alpha * alpha, 0.0)
            + &identity * Complex64::new(noise_var, 0.0);
        let mut sigma_ma = &posterior * Complex64::new(beta * beta / theta, 0.0)
            + &sigma_h * Complex64::new((1.0 - beta * beta) / theta, 0.0)
            + &identity * Complex64::new(noise_var, 0.0);
        linalg::hermitian_symmetrize(&mut sigma_ba);
        linalg::hermitian_symmetrize(&mut sigma_ma);

        Ok(Self {
            alpha,
            beta,
            theta,
            noise_var,
            sigma_h,
            sigma_h_hat,
            sigma_ba,
            sigma_ma,
        })
    }

    /// Assembles statistics from externally produced parts (typically the
    /// sample estimators below). Checks dimensions and Hermitian symmetry.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        alpha: f64,
        beta: f64,
        theta: f64,
        noise_var: f64,
        sigma_h: DMatrix<Complex64>,
        sigma_h_hat: DMatrix<Complex64>,
        sigma_ba: DMatrix<Complex64>,
        sigma_ma: DMatrix<Complex64>,
    ) -> Result<Self> {
        let n = sigma_h.nrows();
        for (m, name) in [
            (&sigma_h, "sigma_h"),
            (&sigma_h_hat, "sigma_h_hat"),
            (&sigma_ba, "sigma_ba"),
            (&sigma_ma, "sigma_ma"),
        ] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: m.nrows().max(m.ncols()),
                });
            }
            if linalg::hermitian_deviation(m) > 1e-10 {
                return Err(Error::invalid(format!("{name} is not Hermitian")));
            }
        }
        Ok(Self {
            alpha,
            beta,
            theta,
            noise_var,
            sigma_h,
            sigma_h_hat,
            sigma_ba,
            sigma_ma,
        })
    }

    /// Runs the full estimation pipeline on labeled CSI pairs: correlation
    /// coefficients, measurement/channel covariances and the conditional
    /// residual covariances under both hypotheses.
    pub fn estimate_from_pairs(
        legitimate_pairs: &[CsiPair],
        attacker_pairs: &[CsiPair],
        noise_var: f64,
        theta: f64,
    ) -> Result<Self> {
        let alpha = estimate_alpha(legitimate_pairs, noise_var, SubcarrierSelection::Average)?;
        let beta = estimate_beta(attacker_pairs, noise_var, theta, SubcarrierSelection::Average)?;

        let references: Vec<CsiMeasurement> =
            legitimate_pairs.iter().map(|(h0, _)| h0.clone()).collect();
        let sigma_h_hat = estimate_sigma_h_hat(&references)?;
        let sigma_h = estimate_sigma_h(&references, noise_var)?;

        let chol = linalg::cholesky_named(&sigma_h_hat, "sigma_h_hat")?;
        let gain = chol.solve(&sigma_h).adjoint(); // sigma_h sigma_h_hat^-1
        let ba_map = &gain * Complex64::new(alpha, 0.0);
        let ma_map = &gain * Complex64::new(beta / theta.sqrt(), 0.0);

        let sigma_ba = estimate_sigma_ba(legitimate_pairs, &ba_map)?;
        let sigma_ma = estimate_sigma_ma(attacker_pairs, &ma_map)?;

        Self::from_parts(
            alpha,
            beta,
            theta,
            noise_var,
            sigma_h,
            sigma_h_hat,
            sigma_ba,
            sigma_ma,
        )
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn sigma_h(&self) -> &DMatrix<Complex64> {
        &self.sigma_h
    }

    pub fn sigma_h_hat(&self) -> &DMatrix<Complex64> {
        &self.sigma_h_hat
    }

    pub fn sigma_ba(&self) -> &DMatrix<Complex64> {
        &self.sigma_ba
    }

    pub fn sigma_ma(&self) -> &DMatrix<Complex64> {
        &self.sigma_ma
    }

    /// Number of active subcarriers the statistics are defined over.
    pub fn dim(&self) -> usize {
        self.sigma_h.nrows()
    }
}

/// Conditional Gaussian of the next measurement given the current one:
/// the mean is `mean_map * h_k`, the covariance is fixed.
#[derive(Debug, Clone)]
pub struct ConditionalGaussian {
    mean_map: DMatrix<Complex64>,
    covariance: DMatrix<Complex64>,
}

impl ConditionalGaussian {
    pub fn mean_map(&self) -> &DMatrix<Complex64> {
        &self.mean_map
    }

    pub fn covariance(&self) -> &DMatrix<Complex64> {
        &self.covariance
    }

    /// Conditional mean for a concrete measurement.
    pub fn mean_for(&self, h_k: &CsiMeasurement) -> DVector<Complex64> {
        &self.mean_map * h_k.values()
    }
}

/// `sigma_h sigma_h_hat^-1` via a Hermitian solve (both factors Hermitian,
/// so the product is the adjoint of `sigma_h_hat^-1 sigma_h`).
fn measurement_gain(stats: &ChannelStatistics) -> Result<DMatrix<Complex64>> {
    let chol = linalg::cholesky_named(stats.sigma_h_hat(), "sigma_h_hat")?;
    Ok(chol.solve(stats.sigma_h()).adjoint())
}

/// Legitimate-hypothesis conditional parameters:
/// mean map `alpha * sigma_h sigma_h_hat^-1`, covariance `sigma_ba`.
pub fn conditional_params_legit(stats: &ChannelStatistics) -> Result<ConditionalGaussian> {
    let gain = measurement_gain(stats)?;
    Ok(ConditionalGaussian {
        mean_map: gain * Complex64::new(stats.alpha(), 0.0),
        covariance: stats.sigma_ba().clone(),
    })
}

/// Attacker-hypothesis conditional parameters:
/// mean map `(beta / sqrt(theta)) * sigma_h sigma_h_hat^-1`, covariance `sigma_ma`.
pub fn conditional_params_attacker(stats: &ChannelStatistics) -> Result<ConditionalGaussian> {
    let gain = measurement_gain(stats)?;
    Ok(ConditionalGaussian {
        mean_map: gain * Complex64::new(stats.beta() / stats.theta().sqrt(), 0.0),
        covariance: stats.sigma_ma().clone(),
    })
}

fn check_pairs(pairs: &[CsiPair], what: &'static str) -> Result<usize> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput(what));
    }
    let n = pairs[0].0.len();
    for (h0, h1) in pairs {
        if h0.len() != n || h1.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: h0.len().max(h1.len()),
            });
        }
    }
    Ok(n)
}

/// Correlation-coefficient estimator shared by alpha and beta:
/// per subcarrier, `Re{ mean(h1[m] conj(h0[m])) / (mean(|h0[m]|^2) - noise_var) }`,
/// averaged (or selected) per `selection`, then scaled by `prefactor`.
///
/// Sums are averaged before the noise-power subtraction so the correction
/// matches the population identity `E|h_hat|^2 = E|h|^2 + noise_var`.
fn estimate_correlation(
    pairs: &[CsiPair],
    noise_var: f64,
    prefactor: f64,
    selection: SubcarrierSelection,
) -> Result<f64> {
    let dim = check_pairs(pairs, "correlation estimator pairs")?;
    if pairs.len() < 2 {
        return Err(Error::invalid("need at least 2 pairs to estimate a correlation"));
    }
    let indices: Vec<usize> = match selection {
        SubcarrierSelection::Average => (0..dim).collect(),
        SubcarrierSelection::Single(m) => {
            if m >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: m,
                });
            }
            vec![m]
        }
    };
    let n = pairs.len() as f64;
    let mut acc = 0.0;
    for &m in &indices {
        let mut cross = Complex64::new(0.0, 0.0);
        let mut power = 0.0;
        for (h0, h1) in pairs {
            cross += h1.values()[m] * h0.values()[m].conj();
            power += h0.values()[m].norm_sqr();
        }
        let denom = power / n - noise_var;
        if denom <= 0.0 {
            return Err(Error::NonPositiveDenominator(denom));
        }
        acc += (cross / n).re / denom;
    }
    Ok(prefactor * acc / indices.len() as f64)
}

/// Temporal-correlation estimate from legitimate pairs `(h_k, h_k+1)`.
pub fn estimate_alpha(
    pairs: &[CsiPair],
    noise_var: f64,
    selection: SubcarrierSelection,
) -> Result<f64> {
    estimate_correlation(pairs, noise_var, 1.0, selection)
}

/// Attacker-correlation estimate from `(h_ba_k, h_ma_k+1)` pairs; the
/// `sqrt(theta)` prefactor compensates the attacker power scaling.
pub fn estimate_beta(
    pairs: &[CsiPair],
    noise_var: f64,
    theta: f64,
    selection: SubcarrierSelection,
) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::invalid("theta must be positive"));
    }
    estimate_correlation(pairs, noise_var, theta.sqrt(), selection)
}

/// Sample covariance of the measurements, `mean(h h^H)`, symmetrized.
pub fn estimate_sigma_h_hat(samples: &[CsiMeasurement]) -> Result<DMatrix<Complex64>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("covariance samples"));
    }
    let n = samples[0].len();
    if samples.len() < n {
        log::warn!(
            "estimating a {n}x{n} covariance from only {} samples; expect a poor estimate",
            samples.len()
        );
    }
    let mut acc = DMatrix::<Complex64>::zeros(n, n);
    for s in samples {
        if s.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: s.len(),
            });
        }
        acc.gerc(Complex64::new(1.0, 0.0), s.values(), s.values(), Complex64::new(1.0, 0.0));
    }
    let mut cov = acc / Complex64::new(samples.len() as f64, 0.0);
    linalg::hermitian_symmetrize(&mut cov);
    Ok(cov)
}

/// Channel-covariance estimate: sample covariance minus `noise_var * I`,
/// projected onto the PSD cone.
pub fn estimate_sigma_h(samples: &[CsiMeasurement], noise_var: f64) -> Result<DMatrix<Complex64>> {
    let mut est = estimate_sigma_h_hat(samples)?;
    if noise_var == 0.0 {
        return Ok(est);
    }
    let n = est.nrows();
    est -= DMatrix::<Complex64>::identity(n, n) * Complex64::new(noise_var, 0.0);
    Ok(linalg::psd_project(&est))
}

/// Residual outer-product average with per-sample conditional means
/// subtracted, symmetrized, plus a trace-scaled diagonal loading so the
/// result stays positive definite for downstream inversion.
fn estimate_conditional_covariance(
    pairs: &[CsiPair],
    mean_map: &DMatrix<Complex64>,
    what: &'static str,
) -> Result<DMatrix<Complex64>> {
    let dim = check_pairs(pairs, what)?;
    if mean_map.nrows() != dim || mean_map.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: mean_map.nrows().max(mean_map.ncols()),
        });
    }
    let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
    for (h0, h1) in pairs {
        let residual = h1.values() - mean_map * h0.values();
        acc.gerc(Complex64::new(1.0, 0.0), &residual, &residual, Complex64::new(1.0, 0.0));
    }
    let mut cov = acc / Complex64::new(pairs.len() as f64, 0.0);
    linalg::hermitian_symmetrize(&mut cov);

    // Diagonal loading relative to the matrix scale; an absolute floor covers
    // the all-zero-residual case so the PD contract still holds.
    let trace: f64 = (0..dim).map(|i| cov[(i, i)].re).sum();
    let scale = trace / dim as f64;
    let eps = 1e-8 * if scale > 0.0 { scale } else { 1.0 };
    cov += DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(eps, 0.0);
    Ok(cov)
}

/// Conditional covariance under the legitimate hypothesis, from pairs
/// `(h_k, h_k+1)` and the legitimate mean map.
pub fn estimate_sigma_ba(
    pairs: &[CsiPair],
    mean_map: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    estimate_conditional_covariance(pairs, mean_map, "sigma_ba pairs")
}

/// Conditional covariance under the attacker hypothesis, from pairs
/// `(h_ba_k, h_ma_k+1)` and the attacker mean map.
pub fn estimate_sigma_ma(
    pairs: &[CsiPair],
    mean_map: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    estimate_conditional_covariance(pairs, mean_map, "sigma_ma pairs")
}
