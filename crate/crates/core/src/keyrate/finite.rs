//! Decoy-state estimation and finite-key length.

use super::{h2, KeyRateError, Result, SecurityEpsilons, SklBreakdown, SnsStatistics};

/// Whether concentration penalties are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Analysis {
    #[default]
    Finite,
    /// Expected values taken as exact; no concentration terms or ε correction.
    Asymptotic,
}

/// Grouping of the ε correction in the key length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrectionForm {
    /// 2 log2[(2/ε_cor) · 2/(√2 ε_PA ε̂)]
    #[default]
    Literal,
    /// log2(2/ε_cor) + 2 log2(1/(√2 ε_PA ε̂))
    Split,
}

/// Bits removed from the key to pay for the ε budget.
pub fn correction_bits(eps: &SecurityEpsilons, form: CorrectionForm) -> f64 {
    let pa = std::f64::consts::SQRT_2 * eps.pa * eps.hat;
    match form {
        CorrectionForm::Literal => 2.0 * ((2.0 / eps.cor) * (2.0 / pa)).log2(),
        CorrectionForm::Split => (2.0 / eps.cor).log2() + 2.0 * (1.0 / pa).log2(),
    }
}

/// Upper bound on the mean of a sum of Bernoulli trials whose observed value
/// is `x`, failing with probability `eps`.
pub fn chernoff_upper_mean(x: f64, eps: f64) -> f64 {
    let b = (1.0 / eps).ln();
    x + b + (2.0 * b * x + b * b).sqrt()
}

/// Lower bound on the mean counterpart of [`chernoff_upper_mean`].
pub fn chernoff_lower_mean(x: f64, eps: f64) -> f64 {
    let b = (1.0 / eps).ln();
    (x - 0.5 * b - (2.0 * b * x + 0.25 * b * b).sqrt()).max(0.0)
}

/// Lower bound on an observed count given its expectation.
pub fn observed_lower(mean: f64, eps: f64) -> f64 {
    (mean - (2.0 * mean * (1.0 / eps).ln()).sqrt()).max(0.0)
}

/// Random-sampling deviation between the phase-error rate of `n` Z bits and
/// that observed on `k` X samples with rate `lambda`.
pub fn random_sampling_gap(n: f64, k: f64, lambda: f64, eps: f64) -> f64 {
    if n <= 0.0 || k <= 0.0 {
        return 0.5;
    }
    let l = lambda.clamp(1e-12, 0.5);
    let var = l * (1.0 - l);
    let arg = (n + k) / (n * k * var * eps * eps);
    if arg <= 1.0 {
        return 0.0;
    }
    ((n + k) * var / (n * k * std::f64::consts::LN_2) * arg.log2()).sqrt()
}

/// Decoy-state bounds on the untagged bits.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UntaggedEstimate {
    /// Lower bound on the single-photon yield s1.
    pub s1_lower: f64,
    /// Lower bound on the untagged Z bits n1.
    pub n1_lower: f64,
    /// Upper bound on the phase-flip rate of the untagged bits.
    pub e1ph_upper: f64,
}

/// Lower-bound the untagged bits and upper-bound their phase-flip rate.
pub fn estimate_untagged(
    stats: &SnsStatistics,
    eps: &SecurityEpsilons,
    analysis: Analysis,
) -> Result<UntaggedEstimate> {
    eps.validate()?;
    let p = &stats.params;
    p.validate()?;
    let counts = [
        stats.vacuum_detections,
        stats.mu1_detections,
        stats.mu2_detections,
        stats.slice_errors,
        stats.z_detections,
    ];
    if counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(KeyRateError::NonPhysical("negative or non-finite count"));
    }
    if stats.vacuum_detections > stats.vacuum_windows
        || stats.mu1_detections > stats.mu1_windows
        || stats.mu2_detections > stats.mu2_windows
        || stats.slice_errors > stats.slice_detections * (1.0 + 1e-12)
    {
        return Err(KeyRateError::NonPhysical("more detections than windows"));
    }
    if stats.z_detections <= 0.0 {
        return Ok(UntaggedEstimate {
            s1_lower: 0.0,
            n1_lower: 0.0,
            e1ph_upper: 0.5,
        });
    }

    let finite = analysis == Analysis::Finite;
    let yield_bounds = |det: f64, windows: f64, e: f64| -> (f64, f64) {
        if windows <= 0.0 {
            return (0.0, 1.0);
        }
        if finite {
            (
                chernoff_lower_mean(det, e) / windows,
                (chernoff_upper_mean(det, e) / windows).min(1.0),
            )
        } else {
            (det / windows, det / windows)
        }
    };
    let (s0_lo, s0_hi) = yield_bounds(stats.vacuum_detections, stats.vacuum_windows, eps.n1);
    let (s1_lo_obs, _) = yield_bounds(stats.mu1_detections, stats.mu1_windows, eps.n1);
    let (_, s2_hi_obs) = yield_bounds(stats.mu2_detections, stats.mu2_windows, eps.n1);

    let (m1, m2) = (p.mu1, p.mu2);
    let s1_lower = ((m2 * m2 * m1.exp() * s1_lo_obs
        - m1 * m1 * m2.exp() * s2_hi_obs
        - (m2 * m2 - m1 * m1) * s0_hi)
        / (m1 * m2 * (m2 - m1)))
        .clamp(0.0, 1.0);

    let tagged_free = stats.z_one_windows * p.mu_z * (-p.mu_z).exp() * s1_lower;
    let n1_lower = if finite {
        observed_lower(tagged_free, eps.n1)
    } else {
        tagged_free
    }
    .min(stats.z_detections);

    // single-photon share of the slice windows
    let one_photon = 2.0 * m1 * (-2.0 * m1).exp();
    let nx1 = stats.slice_windows * one_photon * s1_lower;
    let e1ph_upper = if nx1 <= 0.0 || stats.slice_windows <= 0.0 {
        0.5
    } else {
        let t_hi = if finite {
            chernoff_upper_mean(stats.slice_errors, eps.bar)
        } else {
            stats.slice_errors
        } / stats.slice_windows;
        let vac = (-2.0 * m1).exp() * s0_lo / 2.0;
        let ex = ((t_hi - vac) / (one_photon * s1_lower)).max(0.0);
        let gap = if finite {
            random_sampling_gap(n1_lower, nx1, ex, eps.bar)
        } else {
            0.0
        };
        (ex + gap).min(0.5)
    };

    Ok(UntaggedEstimate {
        s1_lower,
        n1_lower,
        e1ph_upper,
    })
}

/// Finite-key secret-key length of one block.
pub fn skl(
    stats: &SnsStatistics,
    eps: &SecurityEpsilons,
    analysis: Analysis,
    form: CorrectionForm,
) -> Result<SklBreakdown> {
    skl_with_margin(stats, eps, analysis, form).map(|(b, _)| b)
}

/// Key length together with the unclamped key expression.
pub(crate) fn skl_with_margin(
    stats: &SnsStatistics,
    eps: &SecurityEpsilons,
    analysis: Analysis,
    form: CorrectionForm,
) -> Result<(SklBreakdown, f64)> {
    let est = estimate_untagged(stats, eps, analysis)?;
    let e_z = stats.qber_z();
    let lambda_ec = stats.ec_factor * stats.z_detections * h2(e_z);
    let correction = match analysis {
        Analysis::Finite => correction_bits(eps, form),
        Analysis::Asymptotic => 0.0,
    };
    let raw = est.n1_lower * (1.0 - h2(est.e1ph_upper)) - lambda_ec - correction;
    let skl_bits = if raw > 0.0 {
        raw.min(est.n1_lower).min(stats.z_detections)
    } else {
        0.0
    };
    let breakdown = SklBreakdown {
        n_pulses: stats.n_pulses,
        n_raw: stats.z_detections,
        qber_z: e_z,
        n1_lower: est.n1_lower,
        e1ph_upper: est.e1ph_upper,
        lambda_ec,
        skl_bits,
    };
    Ok((breakdown, raw))
}
