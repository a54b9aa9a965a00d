//! Optical channel efficiencies for ground-to-satellite uplinks and
//! vacuum inter-satellite links (ISL).
//!
//! Conventions: SI units throughout (metres, radians). `beam_divergence_rad`
//! is the *full* far-field divergence angle, so the 1/e^2 half-angle used in
//! Gaussian beam formulas is `beam_divergence_rad / 2`.
//!
//! The uplink efficiency is the product
//! `eta_opt * eta_atm^sec(z) * L_fs * G_t * G_r * <eta_turb>`, where the
//! turbulence factor is the aperture-coupling penalty of the long-term
//! (turbulence-broadened) beam relative to the diffraction-only beam.

use std::f64::consts::PI;
use std::io::Write;

use thiserror::Error;

use crate::geometry::{self, Constellation, GroundStation, VisibilitySession, EARTH_RADIUS_KM};
use crate::numeric::adaptive_simpson;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkBudgetError {
    #[error("{name} out of range, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("optics efficiency {0} outside (0, 1]")]
    BadOpticsEfficiency(f64),
    #[error("zenith angle {zenith_deg} deg beyond the operating limit {limit_deg} deg")]
    BeyondZenithLimit { zenith_deg: f64, limit_deg: f64 },
    #[error("efficiency {0} outside (0, 1]")]
    BadEfficiency(f64),
    #[error("turbulence integration top {top_m} m must exceed station altitude {gs_m} m")]
    BadIntegrationRange { top_m: f64, gs_m: f64 },
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
}

pub type Result<T> = std::result::Result<T, LinkBudgetError>;

fn non_negative(name: &'static str, value: f64) -> Result<f64> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(LinkBudgetError::NonPositive { name, value })
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(LinkBudgetError::NonPositive { name, value })
    }
}

/// Terminal and atmosphere parameters of the optical links.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalParams {
    pub wavelength_m: f64,
    /// Full far-field divergence angle.
    pub beam_divergence_rad: f64,
    pub gs_tx_diameter_m: f64,
    pub sat_tx_diameter_m: f64,
    pub sat_rx_diameter_m: f64,
    /// Ground transmitter beam waist (1/e^2 radius).
    pub gs_beam_waist_m: f64,
    /// RMS platform pointing jitter.
    pub pointing_jitter_rad: f64,
    pub optics_efficiency: f64,
    /// Atmospheric extinction at zenith, dB.
    pub atm_loss_db_zenith: f64,
}

impl Default for OpticalParams {
    fn default() -> Self {
        OpticalParams {
            wavelength_m: 850e-9,
            beam_divergence_rad: 15e-6,
            gs_tx_diameter_m: 0.54,
            sat_tx_diameter_m: 0.30,
            sat_rx_diameter_m: 0.30,
            gs_beam_waist_m: 0.27,
            pointing_jitter_rad: 1e-6,
            optics_efficiency: 0.5,
            atm_loss_db_zenith: 1.55,
        }
    }
}

impl OpticalParams {
    pub fn validate(&self) -> Result<()> {
        positive("wavelength_m", self.wavelength_m)?;
        positive("beam_divergence_rad", self.beam_divergence_rad)?;
        positive("gs_tx_diameter_m", self.gs_tx_diameter_m)?;
        positive("sat_tx_diameter_m", self.sat_tx_diameter_m)?;
        positive("sat_rx_diameter_m", self.sat_rx_diameter_m)?;
        positive("gs_beam_waist_m", self.gs_beam_waist_m)?;
        non_negative("pointing_jitter_rad", self.pointing_jitter_rad)?;
        non_negative("atm_loss_db_zenith", self.atm_loss_db_zenith)?;
        if !(self.optics_efficiency > 0.0 && self.optics_efficiency <= 1.0) {
            return Err(LinkBudgetError::BadOpticsEfficiency(self.optics_efficiency));
        }
        Ok(())
    }

    /// Receiver collecting area pi (D_rx / 2)^2.
    pub fn rx_area_m2(&self) -> f64 {
        PI * (self.sat_rx_diameter_m / 2.0).powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TurbulenceModel {
    HufnagelValley,
    /// C_n^2 identically zero.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurbulenceProfile {
    pub model: TurbulenceModel,
    pub wind_speed_mps: f64,
    /// Near-ground structure constant A, m^(-2/3).
    pub cn2_ground: f64,
    pub gs_altitude_m: f64,
}

impl TurbulenceProfile {
    /// HV 5/7 profile.
    pub fn hv57() -> Self {
        TurbulenceProfile {
            model: TurbulenceModel::HufnagelValley,
            wind_speed_mps: 21.0,
            cn2_ground: 1.7e-14,
            gs_altitude_m: 0.0,
        }
    }

    /// A profile with no turbulence at all.
    pub fn none() -> Self {
        TurbulenceProfile {
            model: TurbulenceModel::None,
            wind_speed_mps: 0.0,
            cn2_ground: 0.0,
            gs_altitude_m: 0.0,
        }
    }
}

impl Default for TurbulenceProfile {
    fn default() -> Self {
        Self::hv57()
    }
}

/// Default upper limit of the turbulence path integral, metres.
pub const TURBULENCE_TOP_M: f64 = 20_000.0;

/// Hufnagel–Valley refractive-index structure parameter at altitude `h` (m).
pub fn cn2(h: f64, profile: &TurbulenceProfile) -> f64 {
    match profile.model {
        TurbulenceModel::HufnagelValley => {
            let v = profile.wind_speed_mps / 27.0;
            0.00594 * v * v * (1e-5 * h).powi(10) * (-h / 1000.0).exp()
                + 2.7e-16 * (-h / 1500.0).exp()
                + profile.cn2_ground * (-h / 100.0).exp()
        }
        TurbulenceModel::None => 0.0,
    }
}

/// Vertical path integral of C_n^2 from the station altitude to `h_top`.
pub fn cn2_path_integral(profile: &TurbulenceProfile, h_top: f64) -> Result<f64> {
    if !(h_top > profile.gs_altitude_m) {
        return Err(LinkBudgetError::BadIntegrationRange {
            top_m: h_top,
            gs_m: profile.gs_altitude_m,
        });
    }
    let f = |h: f64| cn2(h, profile);
    // split at the scale heights so the adaptive rule sees each regime
    let mut edges = vec![profile.gs_altitude_m];
    for e in [1_000.0, 5_000.0, 15_000.0] {
        if e > profile.gs_altitude_m && e < h_top {
            edges.push(e);
        }
    }
    edges.push(h_top);
    Ok(edges
        .windows(2)
        .map(|w| adaptive_simpson(&f, w[0], w[1], 1e-9))
        .sum())
}

/// Fried coherence length along a slant path at zenith angle `zenith_rad`.
/// Returns `f64::INFINITY` for a turbulence-free profile.
pub fn fried_r0(
    profile: &TurbulenceProfile,
    wavelength_m: f64,
    zenith_rad: f64,
    h_top: f64,
) -> Result<f64> {
    if !(zenith_rad >= 0.0 && zenith_rad < PI / 2.0) {
        return Err(LinkBudgetError::BeyondZenithLimit {
            zenith_deg: zenith_rad.to_degrees(),
            limit_deg: 90.0,
        });
    }
    positive("wavelength_m", wavelength_m)?;
    let integral = cn2_path_integral(profile, h_top)?;
    Ok(r0_from_integral(integral, wavelength_m, zenith_rad))
}

fn r0_from_integral(integral: f64, wavelength_m: f64, zenith_rad: f64) -> f64 {
    if integral <= 0.0 {
        return f64::INFINITY;
    }
    let k = 2.0 * PI / wavelength_m;
    (0.423 * k * k * integral / zenith_rad.cos()).powf(-0.6)
}

/// Free-space loss (lambda / (4 pi L))^2.
pub fn free_space_loss(wavelength_m: f64, distance_m: f64) -> Result<f64> {
    positive("wavelength_m", wavelength_m)?;
    positive("distance_m", distance_m)?;
    Ok((wavelength_m / (4.0 * PI * distance_m)).powi(2))
}

/// Transmitter gain 8 / Theta_B^2 and receiver gain 4 pi A_r / lambda^2.
pub fn antenna_gains(params: &OpticalParams) -> Result<(f64, f64)> {
    let div = positive("beam_divergence_rad", params.beam_divergence_rad)?;
    let lambda = positive("wavelength_m", params.wavelength_m)?;
    positive("sat_rx_diameter_m", params.sat_rx_diameter_m)?;
    Ok((8.0 / (div * div), 4.0 * PI * params.rx_area_m2() / (lambda * lambda)))
}

/// Slant range from a ground station to an orbit of altitude `altitude_m`
/// at zenith angle `zenith_rad` on a spherical Earth.
pub fn slant_range_m(altitude_m: f64, zenith_rad: f64) -> f64 {
    let re = EARTH_RADIUS_KM * 1e3;
    let r = re + altitude_m;
    let (s, c) = zenith_rad.sin_cos();
    (r * r - re * re * s * s).sqrt() - re * c
}

pub fn to_db(efficiency: f64) -> f64 {
    -10.0 * efficiency.log10()
}

pub fn from_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Gaussian beam radius after propagating `z` from a waist `w0`.
pub fn gaussian_radius(w0: f64, wavelength_m: f64, z: f64) -> f64 {
    let zr = PI * w0 * w0 / wavelength_m;
    w0 * (1.0 + (z / zr).powi(2)).sqrt()
}

/// Power fraction of a Gaussian beam of radius `w` collected by a centred
/// circular aperture of diameter `d`.
pub fn aperture_coupling(d: f64, w: f64) -> f64 {
    -(-2.0 * (d / (2.0 * w)).powi(2)).exp_m1()
}

/// The individual uplink factors; their product is the uplink efficiency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UplinkFactors {
    pub optics: f64,
    pub atmosphere: f64,
    pub free_space: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub turbulence: f64,
    pub path_length_m: f64,
}

impl UplinkFactors {
    pub fn efficiency(&self) -> f64 {
        self.optics * self.atmosphere * self.free_space * self.tx_gain * self.rx_gain
            * self.turbulence
    }
}

/// Uplink evaluator with the turbulence path integral computed once.
#[derive(Debug, Clone)]
pub struct UplinkChannel {
    params: OpticalParams,
    altitude_m: f64,
    max_zenith_rad: f64,
    cn2_integral: f64,
}

impl UplinkChannel {
    pub fn new(
        params: OpticalParams,
        profile: &TurbulenceProfile,
        altitude_km: f64,
        max_zenith_deg: f64,
    ) -> Result<Self> {
        params.validate()?;
        positive("altitude_km", altitude_km)?;
        Ok(UplinkChannel {
            params,
            altitude_m: altitude_km * 1e3,
            max_zenith_rad: max_zenith_deg.to_radians(),
            cn2_integral: cn2_path_integral(profile, TURBULENCE_TOP_M)?,
        })
    }

    pub fn params(&self) -> &OpticalParams {
        &self.params
    }

    pub fn r0(&self, zenith_rad: f64) -> f64 {
        r0_from_integral(self.cn2_integral, self.params.wavelength_m, zenith_rad)
    }

    pub fn factors(&self, zenith_rad: f64) -> Result<UplinkFactors> {
        if zenith_rad > self.max_zenith_rad + 1e-12 || zenith_rad < 0.0 {
            return Err(LinkBudgetError::BeyondZenithLimit {
                zenith_deg: zenith_rad.to_degrees(),
                limit_deg: self.max_zenith_rad.to_degrees(),
            });
        }
        let p = &self.params;
        let lambda = p.wavelength_m;
        let l = slant_range_m(self.altitude_m, zenith_rad);
        let (g_t, g_r) = antenna_gains(p)?;
        let eta_atm = from_db(p.atm_loss_db_zenith);
        let w_diff = gaussian_radius(p.gs_beam_waist_m, lambda, l);
        let r0 = self.r0(zenith_rad);
        let turbulence = if r0.is_finite() {
            let w_turb = 2.1 * lambda * l / (PI * r0) / 2.0;
            let w_lt = (w_diff * w_diff + w_turb * w_turb).sqrt();
            aperture_coupling(p.sat_rx_diameter_m, w_lt)
                / aperture_coupling(p.sat_rx_diameter_m, w_diff)
        } else {
            1.0
        };
        Ok(UplinkFactors {
            optics: p.optics_efficiency,
            atmosphere: eta_atm.powf(1.0 / zenith_rad.cos()),
            free_space: free_space_loss(lambda, l)?,
            tx_gain: g_t,
            rx_gain: g_r,
            turbulence,
            path_length_m: l,
        })
    }

    pub fn efficiency(&self, zenith_rad: f64) -> Result<f64> {
        Ok(self.factors(zenith_rad)?.efficiency())
    }
}

/// One-shot uplink efficiency at `zenith_rad` for an orbit at `altitude_km`
/// with a 70 deg operating limit.
pub fn uplink_efficiency(
    zenith_rad: f64,
    params: &OpticalParams,
    profile: &TurbulenceProfile,
    altitude_km: f64,
) -> Result<f64> {
    UplinkChannel::new(params.clone(), profile, altitude_km, 70.0)?.efficiency(zenith_rad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IslFactors {
    pub optics: f64,
    pub geometric: f64,
    pub pointing: f64,
}

impl IslFactors {
    pub fn efficiency(&self) -> f64 {
        self.optics * self.geometric * self.pointing
    }
}

/// Waist of the satellite beam whose far-field half-angle is Theta_B / 2.
pub fn sat_beam_waist_m(params: &OpticalParams) -> f64 {
    params.wavelength_m / (PI * params.beam_divergence_rad / 2.0)
}

pub fn isl_factors(distance_m: f64, params: &OpticalParams) -> Result<IslFactors> {
    positive("distance_m", distance_m)?;
    params.validate()?;
    let (g_t, g_r) = antenna_gains(params)?;
    let w = gaussian_radius(sat_beam_waist_m(params), params.wavelength_m, distance_m);
    let s2 = params.pointing_jitter_rad.powi(2);
    Ok(IslFactors {
        optics: params.optics_efficiency,
        geometric: aperture_coupling(params.sat_rx_diameter_m, w),
        pointing: (-g_t * s2).exp() * (-g_r * s2).exp(),
    })
}

/// ISL efficiency eta_opt * eta_geo(L) * eta_point.
pub fn isl_efficiency(distance_m: f64, params: &OpticalParams) -> Result<f64> {
    Ok(isl_factors(distance_m, params)?.efficiency())
}

/// Chord between ring members `hops` apart on a circle of radius `radius_km`
/// holding `n` equally spaced satellites, km.
pub fn ring_chord_km(n: usize, hops: usize, radius_km: f64) -> f64 {
    2.0 * radius_km * (PI * hops as f64 / n as f64).sin()
}

/// How the two arms of a ground-assisted twin-field link are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TfLinkMode {
    /// A single effective efficiency max{eta_UL, eta_ISL}.
    #[default]
    LiteralMax,
    /// Keep the uplink and ISL arms separate.
    AsymmetricArms,
}

/// Efficiency description handed to the key-rate model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TfLink {
    /// Total sender-to-sender efficiency, split evenly over the two arms.
    Total(f64),
    /// Per-arm efficiencies.
    Arms { a: f64, b: f64 },
}

impl TfLink {
    /// Per-arm efficiencies.
    pub fn arms(&self) -> (f64, f64) {
        match *self {
            TfLink::Total(t) => (t.sqrt(), t.sqrt()),
            TfLink::Arms { a, b } => (a, b),
        }
    }

    /// Total sender-to-sender efficiency.
    pub fn total(&self) -> f64 {
        match *self {
            TfLink::Total(t) => t,
            TfLink::Arms { a, b } => a * b,
        }
    }
}

fn unit_interval(e: f64) -> Result<f64> {
    if e > 0.0 && e <= 1.0 {
        Ok(e)
    } else {
        Err(LinkBudgetError::BadEfficiency(e))
    }
}

/// Effective twin-field link efficiency max{eta_UL, eta_ISL}.
pub fn effective_tf_link(uplink: f64, isl: f64) -> Result<f64> {
    Ok(unit_interval(uplink)?.max(unit_interval(isl)?))
}

/// Twin-field link description for the chosen arm-combination mode.
pub fn tf_link(mode: TfLinkMode, uplink: f64, isl: f64) -> Result<TfLink> {
    match mode {
        TfLinkMode::LiteralMax => Ok(TfLink::Total(effective_tf_link(uplink, isl)?)),
        TfLinkMode::AsymmetricArms => Ok(TfLink::Arms {
            a: unit_interval(uplink)?,
            b: unit_interval(isl)?,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSample {
    pub time_s: f64,
    /// Time represented by this sample (the last one of a session may be short).
    pub duration_s: f64,
    pub zenith_deg: f64,
    pub path_length_km: f64,
    pub efficiency: f64,
    pub loss_db: f64,
}

/// Uplink loss samples every `dt` seconds over one session.
pub fn session_loss_profile(
    session: &VisibilitySession,
    constellation: &Constellation,
    gs: &GroundStation,
    uplink: &UplinkChannel,
    dt: f64,
) -> Result<Vec<LossSample>> {
    positive("dt", dt)?;
    let n = ((session.duration_s() / dt).ceil() as usize).max(1);
    let limit = uplink.max_zenith_rad;
    (0..n)
        .map(|k| {
            let t = session.t_start_s + k as f64 * dt;
            let duration = (session.t_end_s - t).min(dt);
            let zenith =
                geometry::zenith_angle_at(constellation, session.serving_sat, gs, t).to_radians();
            // boundary refinement can leave the edge a hair outside the limit
            let zenith = if zenith > limit && zenith - limit < 1e-4 {
                limit
            } else {
                zenith
            };
            let f = uplink.factors(zenith)?;
            let eta = f.efficiency();
            Ok(LossSample {
                time_s: t,
                duration_s: duration,
                zenith_deg: zenith.to_degrees(),
                path_length_km: f.path_length_m / 1e3,
                efficiency: eta,
                loss_db: to_db(eta),
            })
        })
        .collect()
}

/// Writes `time_s,zenith_deg,path_km,loss_db` rows.
pub fn write_loss_csv<W: Write>(samples: &[LossSample], mut out: W) -> std::io::Result<()> {
    writeln!(out, "time_s,zenith_deg,path_km,loss_db")?;
    for s in samples {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            s.time_s, s.zenith_deg, s.path_length_km, s.loss_db
        )?;
    }
    Ok(())
}
