//! Finite-key secret-key lengths for sending-or-not-sending (SNS)
//! twin-field QKD.
//!
//! The pipeline is
//! [`expected_statistics`] → [`estimate_untagged`] → [`skl`], with
//! [`optimize_sns`] / [`optimize_block`] searching the eight protocol
//! parameters for the longest key. Statistics are expected values (no shot
//! noise); the finite-size analysis treats them as the observed counts.

mod finite;
mod optimize;
mod stats;

use thiserror::Error;

use crate::linkbudget::TfLink;

pub use finite::{
    chernoff_lower_mean, chernoff_upper_mean, correction_bits, estimate_untagged,
    observed_lower, random_sampling_gap, skl, Analysis, CorrectionForm, UntaggedEstimate,
};
pub use optimize::{
    accumulate_link, coarse_grid, optimize_block, optimize_sns, pool_samples, OptimizerOptions,
    Optimized,
};
pub use stats::{
    click_probability, expected_statistics, pulse_probabilities, ChannelBlock, PulseProbabilities,
    SnsStatistics,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KeyRateError {
    #[error("value {0} outside [0, 1]")]
    OutOfUnitInterval(f64),
    #[error("invalid SNS parameters: {0}")]
    BadParams(&'static str),
    #[error("invalid channel: {0}")]
    BadChannel(&'static str),
    #[error("security parameter {name} = {value} outside (0, 1)")]
    BadEpsilon { name: &'static str, value: f64 },
    #[error("non-physical statistics: {0}")]
    NonPhysical(&'static str),
    #[error("statistics from different parameter sets cannot be pooled")]
    ParamMismatch,
}

pub type Result<T> = std::result::Result<T, KeyRateError>;

/// Binary entropy in bits.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(KeyRateError::OutOfUnitInterval(x));
    }
    Ok(h2(x))
}

pub(crate) fn h2(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }
}

/// SNS protocol parameters.
///
/// `delta` is the full width of the accepted phase slice: an X-window pair
/// with both parties at `mu1` is kept when the phase difference lies within
/// `delta / 2` of 0 or of pi, so the kept fraction is `delta / pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnsParams {
    pub mu_z: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub p_send: f64,
    pub p_z: f64,
    pub p0: f64,
    pub p1: f64,
    pub delta: f64,
}

impl SnsParams {
    pub fn validate(&self) -> Result<()> {
        let prob = |x: f64| x > 0.0 && x < 1.0;
        if !(self.mu_z > 0.0 && self.mu_z.is_finite()) {
            return Err(KeyRateError::BadParams("mu_z must be positive"));
        }
        if !(self.mu1 > 0.0 && self.mu1 < self.mu2 && self.mu2.is_finite()) {
            return Err(KeyRateError::BadParams("need 0 < mu1 < mu2"));
        }
        if !(prob(self.p_send) && prob(self.p_z) && prob(self.p0) && prob(self.p1)) {
            return Err(KeyRateError::BadParams("probabilities must lie in (0, 1)"));
        }
        if self.p0 + self.p1 > 1.0 {
            return Err(KeyRateError::BadParams("p0 + p1 must not exceed 1"));
        }
        if !(self.delta > 0.0 && self.delta < std::f64::consts::PI) {
            return Err(KeyRateError::BadParams("delta must lie in (0, pi)"));
        }
        Ok(())
    }

    /// Probability of the `mu2` decoy in an X window.
    pub fn p2(&self) -> f64 {
        (1.0 - self.p0 - self.p1).max(0.0)
    }

    pub(crate) fn to_array(self) -> [f64; 8] {
        [
            self.mu_z, self.mu1, self.mu2, self.p_send, self.p_z, self.p0, self.p1, self.delta,
        ]
    }

    pub(crate) fn from_array(a: [f64; 8]) -> Self {
        SnsParams {
            mu_z: a[0],
            mu1: a[1],
            mu2: a[2],
            p_send: a[3],
            p_z: a[4],
            p0: a[5],
            p1: a[6],
            delta: a[7],
        }
    }
}

impl Default for SnsParams {
    fn default() -> Self {
        SnsParams {
            mu_z: 0.4,
            mu1: 0.05,
            mu2: 0.3,
            p_send: 0.2,
            p_z: 0.8,
            p0: 0.3,
            p1: 0.5,
            delta: std::f64::consts::PI / 6.0,
        }
    }
}

/// Failure probabilities of the finite-key analysis.
///
/// `cor`, `pa` and `hat` enter the key-length correction term; `n1` is spent
/// on the decoy yield and untagged-count concentration bounds and `bar` on
/// the phase-error bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityEpsilons {
    pub cor: f64,
    pub pa: f64,
    pub hat: f64,
    pub bar: f64,
    pub n1: f64,
}

impl Default for SecurityEpsilons {
    fn default() -> Self {
        SecurityEpsilons {
            cor: 1e-10,
            pa: 1e-10,
            hat: 1e-10,
            bar: 1e-10,
            n1: 1e-10,
        }
    }
}

impl SecurityEpsilons {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("eps_cor", self.cor),
            ("eps_pa", self.pa),
            ("eps_hat", self.hat),
            ("eps_bar", self.bar),
            ("eps_n1", self.n1),
        ] {
            if !(value > 0.0 && value < 1.0) {
                return Err(KeyRateError::BadEpsilon { name, value });
            }
        }
        Ok(())
    }

    /// Secrecy failure probability accumulated over the estimation steps.
    pub fn sec(&self) -> f64 {
        self.pa + self.hat + self.bar + self.n1
    }

    /// Total failure probability eps_cor + eps_sec.
    pub fn total(&self) -> f64 {
        self.cor + self.sec()
    }
}

/// Detector and post-processing characteristics shared by every link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Devices {
    pub detector_efficiency: f64,
    /// Dark-count probability per detector per gate.
    pub dark_count_prob: f64,
    pub optical_error: f64,
    pub rep_rate_hz: f64,
    pub ec_factor: f64,
}

impl Default for Devices {
    fn default() -> Self {
        Devices {
            detector_efficiency: 0.5,
            dark_count_prob: 1e-9,
            optical_error: 0.05,
            rep_rate_hz: 1e9,
            ec_factor: 1.11,
        }
    }
}

impl Devices {
    pub fn validate(&self) -> Result<()> {
        if !(self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0) {
            return Err(KeyRateError::BadChannel("detector efficiency must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.dark_count_prob) {
            return Err(KeyRateError::BadChannel("dark-count probability must lie in [0, 1)"));
        }
        if !(0.0..0.5).contains(&self.optical_error) {
            return Err(KeyRateError::BadChannel("optical error must lie in [0, 0.5)"));
        }
        if !(self.rep_rate_hz > 0.0 && self.rep_rate_hz.is_finite()) {
            return Err(KeyRateError::BadChannel("repetition rate must be positive"));
        }
        if !(self.ec_factor >= 1.0) {
            return Err(KeyRateError::BadChannel("error-correction factor must be >= 1"));
        }
        Ok(())
    }
}

/// A single twin-field link: channel efficiency plus devices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub link: TfLink,
    pub devices: Devices,
}

impl ChannelModel {
    /// Symmetric link with total sender-to-sender loss `loss_db`.
    pub fn from_loss_db(loss_db: f64, devices: Devices) -> Self {
        ChannelModel {
            link: TfLink::Total(crate::linkbudget::from_db(loss_db)),
            devices,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.devices.validate()?;
        let (a, b) = self.link.arms();
        for e in [a, b] {
            if !(e >= 0.0 && e <= 1.0) {
                return Err(KeyRateError::BadChannel("efficiency must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Finite-key output ledger of one block.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SklBreakdown {
    /// Block size N (pulses sent).
    pub n_pulses: f64,
    /// Raw Z-window bits n-bar.
    pub n_raw: f64,
    pub qber_z: f64,
    pub n1_lower: f64,
    pub e1ph_upper: f64,
    pub lambda_ec: f64,
    pub skl_bits: f64,
}

/// One row of a rate table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub loss_db: f64,
    pub duration_s: f64,
    pub result: Optimized,
}

pub const RATE_TABLE_HEADER: &str = "loss_db,duration_s,skl_bits,n1,e1ph,qber_z,n_raw,\
mu_z,mu1,mu2,p_send,p_z,p0,p1,delta";

/// Write rate-table rows as CSV with a header line.
pub fn write_rate_table<W: std::io::Write>(rows: &[RateRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{RATE_TABLE_HEADER}")?;
    for r in rows {
        let b = &r.result.breakdown;
        let p = &r.result.params;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.loss_db,
            r.duration_s,
            b.skl_bits,
            b.n1_lower,
            b.e1ph_upper,
            b.qber_z,
            b.n_raw,
            p.mu_z,
            p.mu1,
            p.mu2,
            p.p_send,
            p.p_z,
            p.p0,
            p.p1,
            p.delta
        )?;
    }
    Ok(())
}
