//! Scenario files: TOML sections with interface units, `--set` overrides and
//! conversion to the core configuration.

use serde::{Deserialize, Serialize};
use toml::Value;

use ringqkd_core::geometry::{ConstellationKind, ConstellationSpec, GroundStation};
use ringqkd_core::keyrate::{
    Analysis, CorrectionForm, Devices, OptimizerOptions, SecurityEpsilons,
};
use ringqkd_core::linkbudget::{OpticalParams, TfLinkMode, TurbulenceModel, TurbulenceProfile};
use ringqkd_core::simulator::ScenarioConfig;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Type1,
    Type2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstellationSection {
    pub kind: Kind,
    pub num_sats: usize,
    pub altitude_km: f64,
    pub atm_shell_km: f64,
    pub initial_phase_deg: f64,
    pub epoch_s: f64,
}

impl Default for ConstellationSection {
    fn default() -> Self {
        ConstellationSection {
            kind: Kind::Type2,
            num_sats: 12,
            altitude_km: 500.0,
            atm_shell_km: 100.0,
            initial_phase_deg: 0.0,
            epoch_s: 0.0,
        }
    }
}

/// Station 1 position; station 2 sits at the same latitude, 180 degrees east.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundStationSection {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub max_zenith_deg: f64,
}

impl Default for GroundStationSection {
    fn default() -> Self {
        GroundStationSection {
            latitude_deg: 0.0,
            longitude_deg: 0.0,
            max_zenith_deg: 70.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticsSection {
    pub wavelength_nm: f64,
    pub beam_divergence_urad: f64,
    pub gs_tx_diameter_m: f64,
    pub sat_tx_diameter_m: f64,
    pub sat_rx_diameter_m: f64,
    pub gs_beam_waist_m: f64,
    pub pointing_jitter_urad: f64,
    pub optics_efficiency: f64,
    pub atm_loss_db_zenith: f64,
}

impl Default for OpticsSection {
    fn default() -> Self {
        let p = OpticalParams::default();
        OpticsSection {
            wavelength_nm: p.wavelength_m * 1e9,
            beam_divergence_urad: p.beam_divergence_rad * 1e6,
            gs_tx_diameter_m: p.gs_tx_diameter_m,
            sat_tx_diameter_m: p.sat_tx_diameter_m,
            sat_rx_diameter_m: p.sat_rx_diameter_m,
            gs_beam_waist_m: p.gs_beam_waist_m,
            pointing_jitter_urad: p.pointing_jitter_rad * 1e6,
            optics_efficiency: p.optics_efficiency,
            atm_loss_db_zenith: p.atm_loss_db_zenith,
        }
    }
}

impl OpticsSection {
    pub fn to_params(&self) -> OpticalParams {
        OpticalParams {
            wavelength_m: self.wavelength_nm * 1e-9,
            beam_divergence_rad: self.beam_divergence_urad * 1e-6,
            gs_tx_diameter_m: self.gs_tx_diameter_m,
            sat_tx_diameter_m: self.sat_tx_diameter_m,
            sat_rx_diameter_m: self.sat_rx_diameter_m,
            gs_beam_waist_m: self.gs_beam_waist_m,
            pointing_jitter_rad: self.pointing_jitter_urad * 1e-6,
            optics_efficiency: self.optics_efficiency,
            atm_loss_db_zenith: self.atm_loss_db_zenith,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurbulenceKind {
    Hv57,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TurbulenceSection {
    pub model: TurbulenceKind,
    pub wind_speed_mps: f64,
    pub cn2_ground: f64,
    pub gs_altitude_m: f64,
}

impl Default for TurbulenceSection {
    fn default() -> Self {
        let t = TurbulenceProfile::hv57();
        TurbulenceSection {
            model: TurbulenceKind::Hv57,
            wind_speed_mps: t.wind_speed_mps,
            cn2_ground: t.cn2_ground,
            gs_altitude_m: t.gs_altitude_m,
        }
    }
}

impl TurbulenceSection {
    pub fn to_profile(&self) -> TurbulenceProfile {
        TurbulenceProfile {
            model: match self.model {
                TurbulenceKind::Hv57 => TurbulenceModel::HufnagelValley,
                TurbulenceKind::None => TurbulenceModel::None,
            },
            wind_speed_mps: self.wind_speed_mps,
            cn2_ground: self.cn2_ground,
            gs_altitude_m: self.gs_altitude_m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkMode {
    Max,
    Arms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub detector_efficiency: f64,
    pub dark_count_prob: f64,
    pub optical_error: f64,
    pub rep_rate_hz: f64,
    pub ec_factor: f64,
    pub link_mode: LinkMode,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let d = Devices::default();
        ChannelSection {
            detector_efficiency: d.detector_efficiency,
            dark_count_prob: d.dark_count_prob,
            optical_error: d.optical_error,
            rep_rate_hz: d.rep_rate_hz,
            ec_factor: d.ec_factor,
            link_mode: LinkMode::Max,
        }
    }
}

impl ChannelSection {
    pub fn to_devices(&self) -> Devices {
        Devices {
            detector_efficiency: self.detector_efficiency,
            dark_count_prob: self.dark_count_prob,
            optical_error: self.optical_error,
            rep_rate_hz: self.rep_rate_hz,
            ec_factor: self.ec_factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrectionKind {
    Literal,
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisKind {
    Finite,
    Asymptotic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecuritySection {
    pub eps_cor: f64,
    pub eps_pa: f64,
    pub eps_hat: f64,
    pub eps_bar: f64,
    pub eps_n1: f64,
    pub correction: CorrectionKind,
    pub analysis: AnalysisKind,
}

impl Default for SecuritySection {
    fn default() -> Self {
        let e = SecurityEpsilons::default();
        SecuritySection {
            eps_cor: e.cor,
            eps_pa: e.pa,
            eps_hat: e.hat,
            eps_bar: e.bar,
            eps_n1: e.n1,
            correction: CorrectionKind::Literal,
            analysis: AnalysisKind::Finite,
        }
    }
}

impl SecuritySection {
    pub fn to_eps(&self) -> SecurityEpsilons {
        SecurityEpsilons {
            cor: self.eps_cor,
            pa: self.eps_pa,
            hat: self.eps_hat,
            bar: self.eps_bar,
            n1: self.eps_n1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub starts: usize,
    pub evals_per_start: usize,
    pub bin_db: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let o = OptimizerOptions::default();
        OptimizerSection {
            starts: o.starts,
            evals_per_start: o.evals_per_start,
            bin_db: o.bin_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignSection {
    pub t_total_s: f64,
    pub n_days: usize,
    pub seed: u64,
    pub vary_phase: bool,
    pub per_session_blocks: bool,
    pub session_dt_s: f64,
    pub sample_dt_s: f64,
    pub isl_dt_s: f64,
}

impl Default for CampaignSection {
    fn default() -> Self {
        CampaignSection {
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
}

/// A complete scenario file; every section and key is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub constellation: ConstellationSection,
    pub ground_stations: GroundStationSection,
    pub optics: OpticsSection,
    pub turbulence: TurbulenceSection,
    pub channel: ChannelSection,
    pub security: SecuritySection,
    pub optimizer: OptimizerSection,
    pub campaign: CampaignSection,
}

/// Parse a `section.key=value` override; the value is read as a TOML
/// literal, falling back to a bare string.
pub fn parse_override(text: &str) -> Result<(Vec<String>, Value), CliError> {
    let (path, raw) = text
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("override `{text}` is not key=value")))?;
    let keys: Vec<String> = path.trim().split('.').map(|s| s.trim().to_string()).collect();
    if keys.len() != 2 || keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Validation(format!(
            "override key `{}` must look like section.key",
            path.trim()
        )));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((keys, value))
}

impl Scenario {
    /// Parse file text, then apply overrides in order.
    pub fn load(text: &str, overrides: &[String]) -> Result<Scenario, CliError> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Validation(format!("scenario: {e}")))?;
        for o in overrides {
            let (keys, value) = parse_override(o)?;
            let section = table
                .entry(keys[0].clone())
                .or_insert_with(|| Value::Table(toml::Table::new()));
            let Value::Table(section) = section else {
                return Err(CliError::Validation(format!("`{}` is not a section", keys[0])));
            };
            section.insert(keys[1].clone(), value);
        }
        Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Validation(format!("scenario: {e}")))
    }

    pub fn to_config(&self) -> ScenarioConfig {
        let c = &self.constellation;
        let mut spec = ConstellationSpec::new(
            match c.kind {
                Kind::Type1 => ConstellationKind::Type1Polar,
                Kind::Type2 => ConstellationKind::Type2Equatorial,
            },
            c.num_sats,
            c.altitude_km,
        );
        spec.atm_shell_km = c.atm_shell_km;
        spec.initial_phase_deg = c.initial_phase_deg;
        spec.epoch_s = c.epoch_s;

        let mut cfg = ScenarioConfig::new(spec);
        let g = &self.ground_stations;
        let gs1 = GroundStation {
            id: 1,
            latitude_deg: g.latitude_deg,
            longitude_deg: g.longitude_deg,
        };
        cfg.ground_stations = [gs1, gs1.antipodal_partner(2)];
        cfg.max_zenith_deg = g.max_zenith_deg;
        cfg.optics = self.optics.to_params();
        cfg.turbulence = self.turbulence.to_profile();
        cfg.devices = self.channel.to_devices();
        cfg.link_mode = match self.channel.link_mode {
            LinkMode::Max => TfLinkMode::LiteralMax,
            LinkMode::Arms => TfLinkMode::AsymmetricArms,
        };
        cfg.eps = self.security.to_eps();
        cfg.optimizer = self.optimizer_options();
        let k = &self.campaign;
        cfg.t_total_s = k.t_total_s;
        cfg.n_days = k.n_days;
        cfg.seed = k.seed;
        cfg.vary_phase = k.vary_phase;
        cfg.per_session_blocks = k.per_session_blocks;
        cfg.session_dt_s = k.session_dt_s;
        cfg.sample_dt_s = k.sample_dt_s;
        cfg.isl_dt_s = k.isl_dt_s;
        cfg
    }

    pub fn optimizer_options(&self) -> OptimizerOptions {
        OptimizerOptions {
            starts: self.optimizer.starts,
            evals_per_start: self.optimizer.evals_per_start,
            analysis: match self.security.analysis {
                AnalysisKind::Finite => Analysis::Finite,
                AnalysisKind::Asymptotic => Analysis::Asymptotic,
            },
            correction: match self.security.correction {
                CorrectionKind::Literal => CorrectionForm::Literal,
                CorrectionKind::Split => CorrectionForm::Split,
            },
            bin_db: self.optimizer.bin_db,
        }
    }

    /// Load-time validation of every module's invariants.
    pub fn validate(&self) -> Result<ScenarioConfig, CliError> {
        let cfg = self.to_config();
        cfg.validate()
            .map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(cfg)
    }

    /// Fully resolved scenario as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}
