//! Correlated multipath channel simulation and noisy LS CSI measurement.
//!
//! The channel is an L-tap Rayleigh impulse response whose taps evolve as a
//! first-order Gauss-Markov process under a Bell-shaped Doppler spectrum.
//! The legitimate link decorrelates over time (coefficient `alpha`); the
//! attacker link is additionally decorrelated in space and scaled by the
//! tap-power ratio `theta`. CSI is the DFT of the taps on the active
//! subcarriers plus white measurement noise, which is statistically
//! equivalent to a least-squares channel estimate from unit-power pilots.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bell-spectrum shape constant: the autocorrelation is
/// `exp(-2 pi f_d dt / sqrt(A))` with `A = 9`.
const BELL_SQRT_A: f64 = 3.0;

/// OFDM grid: total subcarriers, active subcarrier indices and wavelength.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OfdmConfig {
    total_subcarriers: usize,
    active_indices: Vec<usize>,
    carrier_wavelength: f64,
}

impl OfdmConfig {
    pub fn new(
        total_subcarriers: usize,
        active_indices: Vec<usize>,
        carrier_wavelength: f64,
    ) -> Result<Self> {
        let config = Self {
            total_subcarriers,
            active_indices,
            carrier_wavelength,
        };
        config.validate()?;
        Ok(config)
    }

    /// Re-checks the invariants; needed after serde deserialization, which
    /// bypasses the constructor.
    pub fn validate(&self) -> Result<()> {
        if self.total_subcarriers == 0 {
            return Err(Error::invalid("total_subcarriers must be positive"));
        }
        if self.active_indices.is_empty() {
            return Err(Error::invalid("active_indices must be nonempty"));
        }
        if !self.active_indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("active_indices must be strictly increasing"));
        }
        if *self.active_indices.last().unwrap() >= self.total_subcarriers {
            return Err(Error::invalid(format!(
                "active index {} out of range for {} subcarriers",
                self.active_indices.last().unwrap(),
                self.total_subcarriers
            )));
        }
        if !(self.carrier_wavelength > 0.0) {
            return Err(Error::invalid("carrier_wavelength must be positive"));
        }
        Ok(())
    }

    /// 64-subcarrier grid with the 52 data/pilot subcarriers of the 802.11
    /// legacy long training symbol (indices 1..=26 and 38..=63; DC and the
    /// guard band are null) and a 2.4 GHz wavelength of 0.125 m.
    pub fn default_80211_legacy() -> Self {
        let active = (1..=26).chain(38..=63).collect();
        Self::new(64, active, 0.125).expect("static layout is valid")
    }

    /// Grid with every one of `m` subcarriers active; handy for small cases.
    pub fn fully_active(m: usize, carrier_wavelength: f64) -> Result<Self> {
        Self::new(m, (0..m).collect(), carrier_wavelength)
    }

    pub fn total_subcarriers(&self) -> usize {
        self.total_subcarriers
    }

    pub fn active_indices(&self) -> &[usize] {
        &self.active_indices
    }

    /// Number of active subcarriers M'.
    pub fn num_active(&self) -> usize {
        self.active_indices.len()
    }

    pub fn carrier_wavelength(&self) -> f64 {
        self.carrier_wavelength
    }
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self::default_80211_legacy()
    }
}

/// Per-tap variances of the multipath channel, normalized to unit total power.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerDelayProfile {
    tap_variances: Vec<f64>,
}

impl PowerDelayProfile {
    /// Normalizes the given tap variances to unit sum.
    pub fn new(tap_variances: Vec<f64>) -> Result<Self> {
        if tap_variances.is_empty() {
            return Err(Error::invalid("power delay profile needs at least one tap"));
        }
        if tap_variances.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::invalid("tap variances must be finite and nonnegative"));
        }
        let total: f64 = tap_variances.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("at least one tap variance must be positive"));
        }
        Ok(Self {
            tap_variances: tap_variances.iter().map(|v| v / total).collect(),
        })
    }

    /// Exponentially decaying profile: `variance(l) ~ exp(-decay_rate * l)`.
    pub fn exponential(num_taps: usize, decay_rate: f64) -> Result<Self> {
        if num_taps == 0 {
            return Err(Error::invalid("num_taps must be at least 1"));
        }
        if !(decay_rate > 0.0) {
            return Err(Error::invalid("decay_rate must be positive"));
        }
        Self::new((0..num_taps).map(|l| (-decay_rate * l as f64).exp()).collect())
    }

    pub fn num_taps(&self) -> usize {
        self.tap_variances.len()
    }

    pub fn tap_variances(&self) -> &[f64] {
        &self.tap_variances
    }

    /// Unit by construction; kept explicit for SNR bookkeeping.
    pub fn total_power(&self) -> f64 {
        self.tap_variances.iter().sum()
    }
}

/// One realization of the L-tap channel impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTaps {
    taps: Vec<Complex64>,
}

impl ChannelTaps {
    pub fn new(taps: Vec<Complex64>) -> Self {
        Self { taps }
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }
}

/// A noisy CSI measurement: one complex value per active subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiMeasurement {
    values: DVector<Complex64>,
}

impl CsiMeasurement {
    pub fn new(values: DVector<Complex64>) -> Self {
        Self { values }
    }

    pub fn from_vec(values: Vec<Complex64>) -> Self {
        Self {
            values: DVector::from_vec(values),
        }
    }

    pub fn values(&self) -> &DVector<Complex64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }
}

/// Physical scenario: Doppler, transmission interval, attacker geometry,
/// tap-power ratio and measurement SNR.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Maximum Doppler spread f_d in Hz.
    pub doppler_hz: f64,
    /// Transmission interval between consecutive packets, seconds.
    pub interval_s: f64,
    /// Distance between the legitimate device and the attacker, meters.
    pub attacker_distance_m: f64,
    /// Attacker speed in m/s (scenario bookkeeping; the spatial correlation
    /// itself reduces to a function of distance over wavelength).
    pub attacker_speed_mps: f64,
    /// Tap-power ratio theta between the legitimate and attacker links.
    pub power_ratio: f64,
    /// Measurement SNR in dB relative to unit total channel power.
    pub snr_db: f64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.doppler_hz > 0.0) {
            return Err(Error::invalid("doppler_hz must be positive"));
        }
        if !(self.interval_s >= 0.0) {
            return Err(Error::invalid("interval_s must be nonnegative"));
        }
        if !(self.attacker_distance_m >= 0.0) {
            return Err(Error::invalid("attacker_distance_m must be nonnegative"));
        }
        if !(self.power_ratio > 0.0) {
            return Err(Error::invalid("power_ratio must be positive"));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::invalid("snr_db must be finite"));
        }
        Ok(())
    }

    /// Temporal correlation of the legitimate link over one interval.
    pub fn alpha(&self) -> f64 {
        bell_autocorrelation(self.doppler_hz, self.interval_s)
    }

    /// Joint spatial-temporal correlation between the attacker's channel and
    /// the legitimate channel one interval earlier.
    pub fn beta(&self, wavelength: f64) -> f64 {
        spatial_correlation(self.attacker_distance_m, wavelength)
            * bell_autocorrelation(self.doppler_hz, self.interval_s)
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            doppler_hz: 8.0,
            interval_s: 0.02,
            attacker_distance_m: 0.125,
            attacker_speed_mps: 1.0,
            power_ratio: 1.0,
            snr_db: 12.0,
        }
    }
}

/// Temporal autocorrelation of the Bell-shaped Doppler spectrum:
/// `exp(-2 pi f_d dt / 3)`.
pub fn bell_autocorrelation(doppler_hz: f64, delta_t: f64) -> f64 {
    assert!(doppler_hz > 0.0, "doppler_hz must be positive");
    assert!(delta_t >= 0.0, "delta_t must be nonnegative");
    (-2.0 * std::f64::consts::PI * doppler_hz * delta_t / BELL_SQRT_A).exp()
}

/// Spatial correlation over a displacement of `distance_m`. Interpreting the
/// displacement as motion at the Doppler-equivalent speed `f_d * lambda`
/// cancels `f_d`, leaving `exp(-2 pi (d / lambda) / 3)`.
pub fn spatial_correlation(distance_m: f64, wavelength: f64) -> f64 {
    assert!(distance_m >= 0.0, "distance_m must be nonnegative");
    assert!(wavelength > 0.0, "wavelength must be positive");
    (-2.0 * std::f64::consts::PI * (distance_m / wavelength) / BELL_SQRT_A).exp()
}

/// One draw of a circularly-symmetric complex Gaussian with the given variance.
fn draw_cn<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    if variance == 0.0 {
        // Still consume the stream so tap layouts don't shift draws.
        let _: (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        return Complex64::new(0.0, 0.0);
    }
    let s = (variance * 0.5).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Draws an independent channel realization: tap `l` is CN(0, variance(l)).
pub fn sample_taps<R: Rng + ?Sized>(pdp: &PowerDelayProfile, rng: &mut R) -> ChannelTaps {
    ChannelTaps::new(
        pdp.tap_variances()
            .iter()
            .map(|&v| draw_cn(rng, v))
            .collect(),
    )
}

/// Advances the legitimate channel by one interval:
/// `alpha * h + sqrt(1 - alpha^2) * w` with innovation `w ~ CN(0, variance(l))`.
/// The marginal tap distribution is preserved.
pub fn evolve_legitimate<R: Rng + ?Sized>(
    taps: &ChannelTaps,
    pdp: &PowerDelayProfile,
    alpha: f64,
    rng: &mut R,
) -> Result<ChannelTaps> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    if taps.len() != pdp.num_taps() {
        return Err(Error::DimensionMismatch {
            expected: pdp.num_taps(),
            actual: taps.len(),
        });
    }
    let innovation_scale = (1.0 - alpha * alpha).sqrt();
    Ok(ChannelTaps::new(
        taps.taps()
            .iter()
            .zip(pdp.tap_variances())
            .map(|(&h, &v)| h * alpha + draw_cn(rng, v) * innovation_scale)
            .collect(),
    ))
}

/// Produces the attacker channel one interval later:
/// `(beta / sqrt(theta)) * h + (sqrt(1 - beta^2) / sqrt(theta)) * w`,
/// so the attacker tap power is `variance(l) / theta`.
pub fn evolve_attacker<R: Rng + ?Sized>(
    taps: &ChannelTaps,
    pdp: &PowerDelayProfile,
    beta: f64,
    theta: f64,
    rng: &mut R,
) -> Result<ChannelTaps> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid(format!("beta {beta} outside [0, 1]")));
    }
    if !(theta > 0.0) {
        return Err(Error::invalid(format!("theta {theta} must be positive")));
    }
    if taps.len() != pdp.num_taps() {
        return Err(Error::DimensionMismatch {
            expected: pdp.num_taps(),
            actual: taps.len(),
        });
    }
    let sqrt_theta = theta.sqrt();
    let keep = beta / sqrt_theta;
    let innovate = (1.0 - beta * beta).sqrt() / sqrt_theta;
    Ok(ChannelTaps::new(
        taps.taps()
            .iter()
            .zip(pdp.tap_variances())
            .map(|(&h, &v)| h * keep + draw_cn(rng, v) * innovate)
            .collect(),
    ))
}

/// Evaluates the channel frequency response on the active subcarriers:
/// `H[m] = sum_l h[l] * exp(-j 2 pi m l / M)`.
pub fn taps_to_cfr(taps: &ChannelTaps, config: &OfdmConfig) -> Result<DVector<Complex64>> {
    let m_total = config.total_subcarriers();
    if taps.len() > m_total {
        return Err(Error::DimensionMismatch {
            expected: m_total,
            actual: taps.len(),
        });
    }
    let values = config
        .active_indices()
        .iter()
        .map(|&m| {
            taps.taps()
                .iter()
                .enumerate()
                .map(|(l, &h)| {
                    let phase = -2.0 * std::f64::consts::PI * (m * l) as f64 / m_total as f64;
                    h * Complex64::from_polar(1.0, phase)
                })
                .sum()
        })
        .collect();
    Ok(DVector::from_vec(values))
}

/// Adds white complex Gaussian measurement noise of variance `noise_var` per
/// subcarrier. With unit-power pilots this equals the LS channel estimate.
pub fn measure_csi<R: Rng + ?Sized>(
    cfr: &DVector<Complex64>,
    noise_var: f64,
    rng: &mut R,
) -> CsiMeasurement {
    assert!(noise_var >= 0.0, "noise_var must be nonnegative");
    if noise_var == 0.0 {
        return CsiMeasurement::new(cfr.clone());
    }
    CsiMeasurement::new(cfr.map(|h| h + draw_cn(rng, noise_var)))
}

/// Noise variance for a target SNR against the profile's total channel power.
pub fn snr_to_noise_var(snr_db: f64, pdp: &PowerDelayProfile) -> f64 {
    10f64.powf(-snr_db / 10.0) * pdp.total_power()
}
