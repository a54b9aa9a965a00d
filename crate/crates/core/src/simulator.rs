//! End-to-end daily key campaigns for a ring constellation serving two
//! antipodal ground stations.
//!
//! A day runs geometry → link budget → key rate: visibility sessions are
//! found for each ground station, every session is sampled into uplink and
//! ISL efficiencies, samples are pooled per twin-field link
//! `{GS_j, S_(i±1)}` (with `S_i` serving), and each pooled block is
//! optimized once. The protocol key of the day is
//! `sum_i min(SKL_(i,1), SKL_(i+N/2,2))`, where `SKL_(i,j)` is the smaller
//! of the two directions around serving satellite `i`.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{
    find_sessions, min_ring_size, visibility_fraction, Constellation, ConstellationSpec,
    GeometryError, GroundStation,
};
use crate::keyrate::{
    optimize_block, pool_samples, ChannelBlock, Devices, KeyRateError, OptimizerOptions,
    SecurityEpsilons, SklBreakdown,
};
use crate::linkbudget::{
    isl_efficiency, session_loss_profile, tf_link, LinkBudgetError, OpticalParams, TfLink,
    TfLinkMode, TurbulenceProfile, UplinkChannel,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    LinkBudget(#[from] LinkBudgetError),
    #[error(transparent)]
    KeyRate(#[from] KeyRateError),
    #[error(
        "inter-satellite link yields {isl_bits:.6e} bits/day, below the \
         {gs_bits:.6e} bits of the ground link it must carry"
    )]
    IslInsufficient { isl_bits: f64, gs_bits: f64 },
}

pub type Result<T> = std::result::Result<T, SimError>;

const GOLDEN_FRACTION: f64 = 0.618_033_988_749_894_9;

/// Everything needed to simulate one campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub constellation: ConstellationSpec,
    pub ground_stations: [GroundStation; 2],
    pub max_zenith_deg: f64,
    pub optics: OpticalParams,
    pub turbulence: TurbulenceProfile,
    pub devices: Devices,
    pub eps: SecurityEpsilons,
    pub link_mode: TfLinkMode,
    pub optimizer: OptimizerOptions,
    pub t_total_s: f64,
    pub n_days: usize,
    pub seed: u64,
    /// Shift the constellation phase from day to day.
    pub vary_phase: bool,
    /// Key every session separately instead of pooling a whole day.
    pub per_session_blocks: bool,
    /// Step of the visibility scan.
    pub session_dt_s: f64,
    /// Step of the loss profiles.
    pub sample_dt_s: f64,
    /// Step of the inter-satellite consistency profile.
    pub isl_dt_s: f64,
}

impl ScenarioConfig {
    /// Defaults with both stations on the equator, 180 degrees apart.
    pub fn new(constellation: ConstellationSpec) -> Self {
        let gs1 = GroundStation {
            id: 1,
            latitude_deg: 0.0,
            longitude_deg: 0.0,
        };
        ScenarioConfig {
            constellation,
            ground_stations: [gs1, gs1.antipodal_partner(2)],
            max_zenith_deg: 70.0,
            optics: OpticalParams::default(),
            turbulence: TurbulenceProfile::hv57(),
            devices: Devices::default(),
            eps: SecurityEpsilons::default(),
            link_mode: TfLinkMode::default(),
            optimizer: OptimizerOptions::default(),
            t_total_s: 86_400.0,
            n_days: 30,
            seed: 0,
            vary_phase: true,
            per_session_blocks: false,
            session_dt_s: 10.0,
            sample_dt_s: 1.0,
            isl_dt_s: 60.0,
        }
    }

    /// Place both stations at `latitude_deg`, 180 degrees apart in longitude.
    pub fn set_latitude(&mut self, latitude_deg: f64) {
        self.ground_stations[0].latitude_deg = latitude_deg;
        self.ground_stations[1] = self.ground_stations[0].antipodal_partner(self.ground_stations[1].id);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::Config(m));
        self.constellation.validate()?;
        let n = self.constellation.num_sats;
        if n % 2 != 0 {
            return bad(format!("num_sats = {n} must be even to pair i with i + N/2"));
        }
        let min = min_ring_size(self.constellation.altitude_km, self.constellation.atm_shell_km)?;
        if n < min {
            return bad(format!(
                "num_sats = {n} is below the minimum ring size {min} for line of sight"
            ));
        }
        let [a, b] = &self.ground_stations;
        GroundStation::new(a.id, a.latitude_deg, a.longitude_deg)?;
        GroundStation::new(b.id, b.latitude_deg, b.longitude_deg)?;
        if a.id == b.id {
            return bad("ground stations need distinct ids".into());
        }
        if a.latitude_deg != b.latitude_deg {
            return bad("ground stations must share a latitude".into());
        }
        let sep = (b.longitude_deg - a.longitude_deg).rem_euclid(360.0);
        if (sep - 180.0).abs() > 1e-9 {
            return bad(format!("ground stations are {sep} degrees apart, need 180"));
        }
        if !(self.max_zenith_deg > 0.0 && self.max_zenith_deg < 90.0) {
            return bad(format!("max_zenith_deg = {} outside (0, 90)", self.max_zenith_deg));
        }
        self.optics.validate()?;
        UplinkChannel::new(
            self.optics.clone(),
            &self.turbulence,
            self.constellation.altitude_km,
            self.max_zenith_deg,
        )?;
        self.devices.validate()?;
        self.eps.validate()?;
        let o = &self.optimizer;
        if o.starts == 0 || !(o.bin_db >= 0.0) {
            return bad("optimizer needs at least one start and a non-negative bin width".into());
        }
        for (name, v) in [
            ("t_total_s", self.t_total_s),
            ("session_dt_s", self.session_dt_s),
            ("sample_dt_s", self.sample_dt_s),
            ("isl_dt_s", self.isl_dt_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if self.n_days == 0 {
            return bad("n_days must be at least 1".into());
        }
        Ok(())
    }

    /// Constellation phase offset of a given day, degrees.
    pub fn phase_offset_deg(&self, day: usize) -> f64 {
        let d = if self.vary_phase { day as u64 } else { 0 };
        let x = (self.seed.wrapping_add(d) as f64 * GOLDEN_FRACTION).fract();
        x * 360.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// Towards satellite i + 1.
    Plus,
    /// Towards satellite i - 1.
    Minus,
}

/// A ground-assisted twin-field link {GS_gs, S_(sat±1)} measured at S_sat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkId {
    pub sat: usize,
    pub gs: u8,
    pub dir: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyReport {
    pub day: usize,
    pub phase_offset_deg: f64,
    pub per_link: BTreeMap<LinkId, SklBreakdown>,
    /// SKL_(i,j): the weaker direction around serving satellite i for GS j.
    pub per_sat: BTreeMap<(usize, u8), f64>,
    /// Mean of SKL_(i,j) over all satellites and both stations.
    pub per_sat_gs_skl: f64,
    /// Mean raw Z-window bits per (satellite, station) pair.
    pub raw_bits: f64,
    /// Mean block size (pulses) per (satellite, station) pair.
    pub block_size: f64,
    pub rho_vis: [f64; 2],
    pub sessions: [usize; 2],
    pub protocol_skl: f64,
    /// Daily key of one inter-satellite twin-field link.
    pub isl_skl: f64,
}

/// Campaign metrics in report order.
pub const METRICS: [&str; 8] = [
    "protocol_skl",
    "per_sat_gs_skl",
    "raw_bits",
    "block_size",
    "rho_vis_gs1",
    "rho_vis_gs2",
    "isl_skl",
    "sessions",
];

impl DailyReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "protocol_skl" => self.protocol_skl,
            "per_sat_gs_skl" => self.per_sat_gs_skl,
            "raw_bits" => self.raw_bits,
            "block_size" => self.block_size,
            "rho_vis_gs1" => self.rho_vis[0],
            "rho_vis_gs2" => self.rho_vis[1],
            "isl_skl" => self.isl_skl,
            "sessions" => (self.sessions[0] + self.sessions[1]) as f64,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub name: &'static str,
    pub mean: f64,
    /// Population standard deviation over the days.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub days: Vec<DailyReport>,
    pub metrics: Vec<MetricSummary>,
}

impl CampaignResult {
    pub fn metric(&self, name: &str) -> Option<MetricSummary> {
        self.metrics.iter().find(|m| m.name == name).copied()
    }

    pub fn mean(&self, name: &str) -> f64 {
        self.metric(name).map_or(f64::NAN, |m| m.mean)
    }
}

fn summarize(days: &[DailyReport]) -> Vec<MetricSummary> {
    METRICS
        .iter()
        .map(|name| {
            let xs: Vec<f64> = days.iter().filter_map(|d| d.metric(name)).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            MetricSummary {
                name,
                mean,
                std: var.sqrt(),
            }
        })
        .collect()
}

/// Optimizes pooled blocks, reusing results for identical blocks.
struct BlockCache<'a> {
    config: &'a ScenarioConfig,
    cache: HashMap<Vec<u64>, SklBreakdown>,
}

impl<'a> BlockCache<'a> {
    fn new(config: &'a ScenarioConfig) -> Self {
        BlockCache {
            config,
            cache: HashMap::new(),
        }
    }

    fn fingerprint(block: &ChannelBlock) -> Vec<u64> {
        let mut key = Vec::with_capacity(3 * block.entries.len());
        for (link, n) in &block.entries {
            match *link {
                TfLink::Total(t) => key.extend([0, t.to_bits()]),
                TfLink::Arms { a, b } => key.extend([1, a.to_bits(), b.to_bits()]),
            }
            key.push(n.to_bits());
        }
        key
    }

    fn skl(&mut self, samples: &[(TfLink, f64)]) -> Result<SklBreakdown> {
        let c = self.config;
        let block = pool_samples(samples, c.devices, c.optimizer.bin_db);
        let key = Self::fingerprint(&block);
        if let Some(b) = self.cache.get(&key) {
            return Ok(*b);
        }
        let b = optimize_block(&block, &c.eps, &c.optimizer)?.breakdown;
        self.cache.insert(key, b);
        Ok(b)
    }
}

fn sum_breakdowns(parts: &[SklBreakdown]) -> SklBreakdown {
    let mut s = SklBreakdown::default();
    for p in parts {
        s.n_pulses += p.n_pulses;
        s.n_raw += p.n_raw;
        s.n1_lower += p.n1_lower;
        s.lambda_ec += p.lambda_ec;
        s.skl_bits += p.skl_bits;
    }
    if s.n_raw > 0.0 {
        s.qber_z = parts.iter().map(|p| p.qber_z * p.n_raw).sum::<f64>() / s.n_raw;
    }
    if s.n1_lower > 0.0 {
        s.e1ph_upper = parts.iter().map(|p| p.e1ph_upper * p.n1_lower).sum::<f64>() / s.n1_lower;
    }
    s
}

/// Simulate one day of the campaign.
pub fn run_day(config: &ScenarioConfig, day: usize) -> Result<DailyReport> {
    config.validate()?;
    let mut spec = config.constellation.clone();
    let phase = config.phase_offset_deg(day);
    spec.initial_phase_deg += phase;
    let constellation = Constellation::new(spec.clone())?;
    let n = spec.num_sats;
    let uplink = UplinkChannel::new(
        config.optics.clone(),
        &config.turbulence,
        spec.altitude_km,
        config.max_zenith_deg,
    )?;
    let t0 = spec.epoch_s;
    let t1 = t0 + config.t_total_s;

    let isl = |a: usize, b: usize, t: f64| -> Result<f64> {
        let d = constellation
            .position(a, t)
            .sub(constellation.position(b, t))
            .norm();
        Ok(isl_efficiency(d * 1e3, &config.optics)?)
    };

    // samples per link, optionally split by session
    let mut samples: BTreeMap<(LinkId, usize), Vec<(TfLink, f64)>> = BTreeMap::new();
    let mut rho_vis = [0.0; 2];
    let mut session_counts = [0; 2];
    for (j, gs) in config.ground_stations.iter().enumerate() {
        let sessions = find_sessions(&spec, gs, config.max_zenith_deg, t0, t1, config.session_dt_s)?;
        rho_vis[j] = visibility_fraction(&sessions, config.t_total_s)?;
        session_counts[j] = sessions.len();
        for (s_idx, session) in sessions.iter().enumerate() {
            let profile =
                session_loss_profile(session, &constellation, gs, &uplink, config.sample_dt_s)?;
            let sat = session.serving_sat;
            let block_tag = if config.per_session_blocks { s_idx } else { 0 };
            for (dir, nb) in [(Direction::Plus, (sat + 1) % n), (Direction::Minus, (sat + n - 1) % n)] {
                let id = LinkId { sat, gs: gs.id, dir };
                let entry = samples.entry((id, block_tag)).or_default();
                for s in &profile {
                    let mid = s.time_s + 0.5 * s.duration_s;
                    let link = tf_link(config.link_mode, s.efficiency, isl(sat, nb, mid)?)?;
                    entry.push((link, s.duration_s));
                }
            }
        }
    }

    let mut cache = BlockCache::new(config);
    let mut parts: BTreeMap<LinkId, Vec<SklBreakdown>> = BTreeMap::new();
    for ((id, _), s) in &samples {
        parts.entry(*id).or_default().push(cache.skl(s)?);
    }
    let per_link: BTreeMap<LinkId, SklBreakdown> =
        parts.iter().map(|(id, p)| (*id, sum_breakdowns(p))).collect();

    let ids = [config.ground_stations[0].id, config.ground_stations[1].id];
    let mut per_sat = BTreeMap::new();
    let mut raw = 0.0;
    let mut pulses = 0.0;
    for &gs in &ids {
        for sat in 0..n {
            let get = |dir| per_link.get(&LinkId { sat, gs, dir });
            let (p, m) = (get(Direction::Plus), get(Direction::Minus));
            let skl = match (p, m) {
                (Some(p), Some(m)) => p.skl_bits.min(m.skl_bits),
                _ => 0.0,
            };
            for b in [p, m].into_iter().flatten() {
                raw += 0.5 * b.n_raw;
                pulses += 0.5 * b.n_pulses;
            }
            per_sat.insert((sat, gs), skl);
        }
    }
    let pairs = (2 * n) as f64;
    let per_sat_gs_skl = per_sat.values().sum::<f64>() / pairs;
    let protocol_skl = (0..n)
        .map(|i| per_sat[&(i, ids[0])].min(per_sat[&((i + n / 2) % n, ids[1])]))
        .sum();

    // every neighbour pair of either ring type is congruent, so satellite 0
    // with neighbours n-1 and 1 stands for all of them
    let steps = (config.t_total_s / config.isl_dt_s).ceil() as usize;
    let mut isl_samples = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = t0 + k as f64 * config.isl_dt_s;
        let dur = (t1 - t).min(config.isl_dt_s);
        let mid = t + 0.5 * dur;
        let link = tf_link(config.link_mode, isl(0, n - 1, mid)?, isl(0, 1, mid)?)?;
        isl_samples.push((link, dur));
    }
    let isl_skl = cache.skl(&isl_samples)?.skl_bits;
    let gs_max = per_link.values().map(|b| b.skl_bits).fold(0.0, f64::max);
    if isl_skl < gs_max {
        return Err(SimError::IslInsufficient {
            isl_bits: isl_skl,
            gs_bits: gs_max,
        });
    }

    Ok(DailyReport {
        day,
        phase_offset_deg: phase,
        per_link,
        per_sat,
        per_sat_gs_skl,
        raw_bits: raw / pairs,
        block_size: pulses / pairs,
        rho_vis,
        sessions: session_counts,
        protocol_skl,
        isl_skl,
    })
}

/// Run every day of the campaign and summarize.
pub fn run_campaign(config: &ScenarioConfig) -> Result<CampaignResult> {
    config.validate()?;
    let days = (0..config.n_days)
        .into_par_iter()
        .map(|d| run_day(config, d))
        .collect::<Result<Vec<_>>>()?;
    let metrics = summarize(&days);
    Ok(CampaignResult { days, metrics })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    NumSats,
    Latitude,
}

/// One campaign per value along `axis`.
pub fn sweep(config: &ScenarioConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<(f64, CampaignResult)>> {
    if values.is_empty() {
        return Err(SimError::Config("sweep needs at least one value".into()));
    }
    values
        .iter()
        .map(|&v| {
            let mut c = config.clone();
            match axis {
                SweepAxis::NumSats => {
                    if v.fract() != 0.0 || v < 0.0 {
                        return Err(SimError::Config(format!("num_sats = {v} is not a count")));
                    }
                    c.constellation.num_sats = v as usize;
                }
                SweepAxis::Latitude => c.set_latitude(v),
            }
            Ok((v, run_campaign(&c)?))
        })
        .collect()
}

/// Curve rows `x,mean,std` for one metric across a sweep.
pub fn write_curve<W: std::io::Write>(
    points: &[(f64, CampaignResult)],
    metric: &str,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "x,mean,std")?;
    for (x, r) in points {
        if let Some(m) = r.metric(metric) {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", x, m.mean, m.std)?;
        }
    }
    Ok(())
}
