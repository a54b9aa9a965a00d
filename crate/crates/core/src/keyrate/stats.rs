//! Expected detection statistics of the SNS click model.
//!
//! Two weak coherent pulses interfere on a 50:50 beamsplitter watched by two
//! threshold detectors. A window is effective when exactly one detector
//! clicks. Photon statistics are Poissonian and every party randomizes its
//! global phase.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::{ChannelModel, Devices, KeyRateError, Result, SnsParams};
use crate::linkbudget::TfLink;
use crate::numeric::gauss_legendre;

const SLICE_NODES: usize = 8;

fn slice_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(SLICE_NODES))
}

/// Click probability of a threshold detector receiving mean photon number
/// `mean` with dark-count probability `dark`.
pub fn click_probability(mean: f64, dark: f64) -> f64 {
    -((-dark).ln_1p() - mean).exp_m1()
}

/// Exactly-one-click probability when the detectors see independent Poisson
/// light of means `left` and `right`.
fn exactly_one(left: f64, right: f64, dark: f64) -> f64 {
    let ql = click_probability(left, dark);
    let qr = click_probability(right, dark);
    ql * (1.0 - qr) + qr * (1.0 - ql)
}

/// e^{-m} (I0(k) - 1), by power series.
fn scaled_bessel_i0_minus_one(m: f64, k: f64) -> f64 {
    let x = 0.25 * k * k;
    let mut term = 1.0;
    let mut sum = 0.0;
    let mut j = 1.0;
    loop {
        term *= x / (j * j);
        sum += term;
        if term <= sum * 1e-17 || j > 500.0 {
            break;
        }
        j += 1.0;
    }
    (-m).exp() * sum
}

/// Per-pulse probabilities of each window outcome for one link.
///
/// Values are conditional on the window class (both parties in Z, or the
/// stated X-window source pair); window-selection probabilities are applied
/// in [`expected_statistics`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PulseProbabilities {
    /// Z window, neither party sends.
    pub z_none: f64,
    /// Z window, exactly one party sends (averaged over which one).
    pub z_one: f64,
    /// Z window, both parties send.
    pub z_both: f64,
    /// X window, both parties vacuum.
    pub x_vacuum: f64,
    /// X window, one party at `mu1`, the other vacuum (side-averaged).
    pub x_mu1: f64,
    /// X window, one party at `mu2`, the other vacuum (side-averaged).
    pub x_mu2: f64,
    /// Both at `mu1`, phase difference inside the slice: effective events.
    pub slice_effective: f64,
    /// Both at `mu1`, phase difference inside the slice: wrong-detector events.
    pub slice_error: f64,
}

/// Per-pulse outcome probabilities for the given arm efficiencies.
pub fn pulse_probabilities(link: TfLink, devices: &Devices, params: &SnsParams) -> PulseProbabilities {
    let (eta_a, eta_b) = link.arms();
    let det = devices.detector_efficiency;
    let d = devices.dark_count_prob;
    let ea = eta_a * det;
    let eb = eta_b * det;

    let one_sided = |mu: f64| {
        0.5 * (exactly_one(0.5 * ea * mu, 0.5 * ea * mu, d)
            + exactly_one(0.5 * eb * mu, 0.5 * eb * mu, d))
    };
    let vacuum = exactly_one(0.0, 0.0, d);

    // both send at mu_z with independent random phases
    let m = 0.5 * params.mu_z * (ea + eb);
    let k = params.mu_z * (ea * eb).sqrt();
    let one_minus_d = 1.0 - d;
    let e_m = (-m).exp();
    let bracket =
        scaled_bessel_i0_minus_one(m, k) - e_m * (-m).exp_m1() + d * (-2.0 * m).exp();
    let z_both = 2.0 * one_minus_d * bracket;

    // phase slice |phi| <= delta/2 around 0; the pi slice is the mirror image
    let m1 = 0.5 * params.mu1 * (ea + eb);
    let k1 = params.mu1 * (ea * eb).sqrt();
    let e_opt = devices.optical_error;
    let (nodes, weights) = slice_rule();
    let half = 0.5 * params.delta;
    let mut eff = 0.0;
    let mut err = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        let c = (half * x).cos();
        let ql = click_probability(m1 + k1 * c, d);
        let qr = click_probability(m1 - k1 * c, d);
        let right = ql * (1.0 - qr);
        let wrong = qr * (1.0 - ql);
        eff += 0.5 * w * (right + wrong);
        err += 0.5 * w * ((1.0 - e_opt) * wrong + e_opt * right);
    }

    PulseProbabilities {
        z_none: vacuum,
        z_one: one_sided(params.mu_z),
        z_both,
        x_vacuum: vacuum,
        x_mu1: one_sided(params.mu1),
        x_mu2: one_sided(params.mu2),
        slice_effective: eff,
        slice_error: err,
    }
}

/// Expected window and detection counts of one finite-key block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnsStatistics {
    pub params: SnsParams,
    pub n_pulses: f64,
    pub ec_factor: f64,
    /// Z windows in which exactly one party sent (untagged-bit candidates).
    pub z_one_windows: f64,
    /// Effective Z-window events, the raw key n-bar.
    pub z_detections: f64,
    /// Effective Z-window events carrying a bit error.
    pub z_errors: f64,
    pub vacuum_windows: f64,
    pub vacuum_detections: f64,
    pub mu1_windows: f64,
    pub mu1_detections: f64,
    pub mu2_windows: f64,
    pub mu2_detections: f64,
    pub slice_windows: f64,
    pub slice_detections: f64,
    pub slice_errors: f64,
}

impl SnsStatistics {
    fn empty(params: SnsParams, ec_factor: f64) -> Self {
        SnsStatistics {
            params,
            n_pulses: 0.0,
            ec_factor,
            z_one_windows: 0.0,
            z_detections: 0.0,
            z_errors: 0.0,
            vacuum_windows: 0.0,
            vacuum_detections: 0.0,
            mu1_windows: 0.0,
            mu1_detections: 0.0,
            mu2_windows: 0.0,
            mu2_detections: 0.0,
            slice_windows: 0.0,
            slice_detections: 0.0,
            slice_errors: 0.0,
        }
    }

    fn add_pulses(&mut self, probs: &PulseProbabilities, pulses: f64) {
        let p = &self.params;
        let z = pulses * p.p_z * p.p_z;
        let x = pulses * (1.0 - p.p_z) * (1.0 - p.p_z);
        let none = (1.0 - p.p_send) * (1.0 - p.p_send);
        let one = 2.0 * p.p_send * (1.0 - p.p_send);
        let both = p.p_send * p.p_send;

        self.n_pulses += pulses;
        self.z_one_windows += z * one;
        self.z_detections += z * (none * probs.z_none + one * probs.z_one + both * probs.z_both);
        self.z_errors += z * (none * probs.z_none + both * probs.z_both);

        // single-sided sources count both sides
        let vac = x * p.p0 * p.p0;
        let w1 = x * 2.0 * p.p1 * p.p0;
        let w2 = x * 2.0 * p.p2() * p.p0;
        let ws = x * p.p1 * p.p1 * p.delta / PI;
        self.vacuum_windows += vac;
        self.vacuum_detections += vac * probs.x_vacuum;
        self.mu1_windows += w1;
        self.mu1_detections += w1 * probs.x_mu1;
        self.mu2_windows += w2;
        self.mu2_detections += w2 * probs.x_mu2;
        self.slice_windows += ws;
        self.slice_detections += ws * probs.slice_effective;
        self.slice_errors += ws * probs.slice_error;
    }

    /// Z-window bit-error rate E_Z (0 when nothing was detected).
    pub fn qber_z(&self) -> f64 {
        if self.z_detections > 0.0 {
            self.z_errors / self.z_detections
        } else {
            0.0
        }
    }

    /// Merge two blocks that used the same parameters.
    pub fn merge(&self, other: &SnsStatistics) -> Result<SnsStatistics> {
        if self.params != other.params || self.ec_factor != other.ec_factor {
            return Err(KeyRateError::ParamMismatch);
        }
        let mut s = *self;
        s.n_pulses += other.n_pulses;
        s.z_one_windows += other.z_one_windows;
        s.z_detections += other.z_detections;
        s.z_errors += other.z_errors;
        s.vacuum_windows += other.vacuum_windows;
        s.vacuum_detections += other.vacuum_detections;
        s.mu1_windows += other.mu1_windows;
        s.mu1_detections += other.mu1_detections;
        s.mu2_windows += other.mu2_windows;
        s.mu2_detections += other.mu2_detections;
        s.slice_windows += other.slice_windows;
        s.slice_detections += other.slice_detections;
        s.slice_errors += other.slice_errors;
        Ok(s)
    }
}

/// Pulses sent over a set of channel conditions that form one key block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelBlock {
    pub devices: Devices,
    pub entries: Vec<(TfLink, f64)>,
}

impl ChannelBlock {
    pub fn new(devices: Devices) -> Self {
        ChannelBlock {
            devices,
            entries: Vec::new(),
        }
    }

    pub fn single(channel: &ChannelModel, pulses: f64) -> Self {
        ChannelBlock {
            devices: channel.devices,
            entries: vec![(channel.link, pulses)],
        }
    }

    pub fn push(&mut self, link: TfLink, pulses: f64) {
        if pulses > 0.0 {
            self.entries.push((link, pulses));
        }
    }

    pub fn n_pulses(&self) -> f64 {
        self.entries.iter().map(|(_, n)| n).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Concatenate another block's pulses (devices must agree).
    pub fn extend(&mut self, other: &ChannelBlock) {
        self.entries.extend(other.entries.iter().copied());
    }

    pub fn statistics(&self, params: &SnsParams) -> SnsStatistics {
        let mut s = SnsStatistics::empty(*params, self.devices.ec_factor);
        for (link, pulses) in &self.entries {
            let probs = pulse_probabilities(*link, &self.devices, params);
            s.add_pulses(&probs, *pulses);
        }
        s
    }
}

/// Expected statistics of `n_pulses` pulses over a single fixed channel.
pub fn expected_statistics(
    channel: &ChannelModel,
    params: &SnsParams,
    n_pulses: f64,
) -> Result<SnsStatistics> {
    channel.validate()?;
    params.validate()?;
    if !(n_pulses >= 1.0 && n_pulses.is_finite()) {
        return Err(KeyRateError::BadChannel("block must contain at least one pulse"));
    }
    Ok(ChannelBlock::single(channel, n_pulses).statistics(params))
}
