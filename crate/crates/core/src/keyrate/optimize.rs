//! Parameter search and session pooling.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::finite::skl_with_margin;
use super::{
    Analysis, ChannelBlock, ChannelModel, CorrectionForm, Devices, KeyRateError, Result,
    SecurityEpsilons, SklBreakdown, SnsParams,
};
use crate::linkbudget::{from_db, to_db, TfLink};

/// Search box: (lower, upper) per coordinate in [`SnsParams::to_array`] order.
const BOX: [(f64, f64); 8] = [
    (0.01, 2.0),
    (0.001, 1.0),
    (0.01, 2.0),
    (0.005, 0.7),
    (0.05, 0.995),
    (0.005, 0.95),
    (0.005, 0.99),
    (0.01, 3.1),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    pub starts: usize,
    pub evals_per_start: usize,
    pub analysis: Analysis,
    pub correction: CorrectionForm,
    /// Width of the loss bins used when pooling samples; 0 keeps every sample.
    pub bin_db: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            starts: 3,
            evals_per_start: 400,
            analysis: Analysis::Finite,
            correction: CorrectionForm::Literal,
            bin_db: 0.1,
        }
    }
}

/// Optimizer output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimized {
    pub params: SnsParams,
    pub breakdown: SklBreakdown,
    /// False when no evaluated point produced a positive key.
    pub positive: bool,
    pub evaluations: usize,
}

/// The coarse grid that the optimizer result never falls below.
///
/// Two levels per coordinate:
/// mu_z {0.3, 0.5}, mu1 {0.03, 0.08}, mu2 {0.3, 0.6}, p {0.02, 0.08},
/// p_Z {0.6, 0.85}, p0 {0.15, 0.3}, p1 {0.5, 0.7}, delta {pi/8, pi/5}.
pub fn coarse_grid() -> Vec<SnsParams> {
    let levels: [[f64; 2]; 8] = [
        [0.3, 0.5],
        [0.03, 0.08],
        [0.3, 0.6],
        [0.02, 0.08],
        [0.6, 0.85],
        [0.15, 0.3],
        [0.5, 0.7],
        [PI / 8.0, PI / 5.0],
    ];
    (0..256u32)
        .map(|code| {
            let mut a = [0.0; 8];
            for (k, lv) in levels.iter().enumerate() {
                a[k] = lv[((code >> (7 - k)) & 1) as usize];
            }
            SnsParams::from_array(a)
        })
        .collect()
}

/// Pull a candidate back into the feasible region.
fn repair(mut a: [f64; 8]) -> [f64; 8] {
    for (v, (lo, hi)) in a.iter_mut().zip(BOX) {
        *v = v.clamp(lo, hi);
    }
    if a[2] <= a[1] * 1.05 {
        a[2] = (a[1] * 1.05).min(BOX[2].1);
        if a[2] <= a[1] {
            a[1] = a[2] / 1.05;
        }
    }
    if a[5] + a[6] > 0.995 {
        let s = 0.995 / (a[5] + a[6]);
        a[5] *= s;
        a[6] *= s;
    }
    a
}

struct Evaluator<'a> {
    block: &'a ChannelBlock,
    eps: &'a SecurityEpsilons,
    opts: &'a OptimizerOptions,
    count: usize,
}

impl Evaluator<'_> {
    fn eval(&mut self, params: &SnsParams) -> Result<(SklBreakdown, f64)> {
        self.count += 1;
        let stats = self.block.statistics(params);
        skl_with_margin(&stats, self.eps, self.opts.analysis, self.opts.correction)
    }
}

/// Score ordering: key length first, then the unclamped margin.
fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 > b.1)
}

fn score(b: &SklBreakdown, margin: f64) -> (f64, f64) {
    (b.skl_bits, margin)
}

/// Maximize the key length of a pooled block.
pub fn optimize_block(
    block: &ChannelBlock,
    eps: &SecurityEpsilons,
    opts: &OptimizerOptions,
) -> Result<Optimized> {
    eps.validate()?;
    block.devices.validate()?;
    let grid = coarse_grid();
    if block.is_empty() {
        return Ok(Optimized {
            params: grid[0],
            breakdown: SklBreakdown::default(),
            positive: false,
            evaluations: 0,
        });
    }
    let mut ev = Evaluator {
        block,
        eps,
        opts,
        count: 0,
    };

    let mut scored = Vec::with_capacity(grid.len());
    for (i, p) in grid.iter().enumerate() {
        let (b, m) = ev.eval(p)?;
        scored.push((score(&b, m), i, b));
    }
    // stable order: best score, then lowest grid index
    scored.sort_by(|x, y| {
        y.0 .0
            .total_cmp(&x.0 .0)
            .then(y.0 .1.total_cmp(&x.0 .1))
            .then(x.1.cmp(&y.1))
    });

    let mut best = (scored[0].0, grid[scored[0].1], scored[0].2);
    for &(s0, idx, b0) in scored.iter().take(opts.starts) {
        let (s, p, b) = coordinate_search(&mut ev, grid[idx], s0, b0)?;
        if better(s, best.0) {
            best = (s, p, b);
        }
    }

    let positive = best.2.skl_bits > 0.0;
    if !positive {
        best = (scored[0].0, grid[scored[0].1], scored[0].2);
    }
    Ok(Optimized {
        params: best.1,
        breakdown: best.2,
        positive,
        evaluations: ev.count,
    })
}

fn coordinate_search(
    ev: &mut Evaluator,
    start: SnsParams,
    start_score: (f64, f64),
    start_breakdown: SklBreakdown,
) -> Result<((f64, f64), SnsParams, SklBreakdown)> {
    let budget = ev.count + ev.opts.evals_per_start;
    let mut x = start.to_array();
    let mut best = start_score;
    let mut best_b = start_breakdown;
    let mut step = 0.5f64;
    while step > 1e-3 && ev.count < budget {
        let mut improved = false;
        for k in 0..8 {
            for factor in [1.0 + step, 1.0 / (1.0 + step)] {
                if ev.count >= budget {
                    break;
                }
                let mut cand = x;
                cand[k] *= factor;
                let cand = repair(cand);
                if cand == x {
                    continue;
                }
                let params = SnsParams::from_array(cand);
                if params.validate().is_err() {
                    continue;
                }
                let (b, m) = ev.eval(&params)?;
                let s = score(&b, m);
                if better(s, best) {
                    best = s;
                    best_b = b;
                    x = cand;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((best, SnsParams::from_array(x), best_b))
}

/// Optimize a single fixed channel over a session of `duration_s` seconds.
pub fn optimize_sns(
    channel: &ChannelModel,
    duration_s: f64,
    eps: &SecurityEpsilons,
    opts: &OptimizerOptions,
) -> Result<Optimized> {
    channel.validate()?;
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(KeyRateError::BadChannel("duration must be positive"));
    }
    let pulses = channel.devices.rep_rate_hz * duration_s;
    optimize_block(&ChannelBlock::single(channel, pulses), eps, opts)
}

/// Spread `pulses` at `loss_db` over the two neighbouring bin centres.
fn bin_weights(loss_db: f64, bin_db: f64) -> [(i64, f64); 2] {
    let x = loss_db / bin_db;
    let lo = x.floor();
    let frac = x - lo;
    [(lo as i64, 1.0 - frac), (lo as i64 + 1, frac)]
}

/// Build a pooled block from `(link, duration_s)` samples.
///
/// With a positive bin width, losses are snapped to a dB grid by linear
/// interpolation between neighbouring bin centres, which keeps the pooled
/// statistics continuous in the sample losses.
pub fn pool_samples(samples: &[(TfLink, f64)], devices: Devices, bin_db: f64) -> ChannelBlock {
    let mut block = ChannelBlock::new(devices);
    if bin_db <= 0.0 {
        for &(link, dur) in samples {
            block.push(link, dur * devices.rep_rate_hz);
        }
        return block;
    }
    let mut total: BTreeMap<i64, f64> = BTreeMap::new();
    let mut arms: BTreeMap<(i64, i64), f64> = BTreeMap::new();
    let mut zero = 0.0;
    for &(link, dur) in samples {
        let pulses = dur * devices.rep_rate_hz;
        match link {
            TfLink::Total(eta) if eta > 0.0 => {
                for (i, w) in bin_weights(to_db(eta), bin_db) {
                    *total.entry(i).or_default() += w * pulses;
                }
            }
            TfLink::Arms { a, b } if a > 0.0 && b > 0.0 => {
                for (i, wi) in bin_weights(to_db(a), bin_db) {
                    for (j, wj) in bin_weights(to_db(b), bin_db) {
                        *arms.entry((i, j)).or_default() += wi * wj * pulses;
                    }
                }
            }
            _ => zero += pulses,
        }
    }
    for (i, n) in total {
        block.push(TfLink::Total(from_db(i as f64 * bin_db).min(1.0)), n);
    }
    for ((i, j), n) in arms {
        block.push(
            TfLink::Arms {
                a: from_db(i as f64 * bin_db).min(1.0),
                b: from_db(j as f64 * bin_db).min(1.0),
            },
            n,
        );
    }
    block.push(TfLink::Total(0.0), zero);
    block
}

/// Pool every sample of one link into a single block and optimize it.
pub fn accumulate_link(
    samples: &[(TfLink, f64)],
    devices: Devices,
    eps: &SecurityEpsilons,
    opts: &OptimizerOptions,
) -> Result<Optimized> {
    let block = pool_samples(samples, devices, opts.bin_db);
    optimize_block(&block, eps, opts)
}
