//! Command-line front end: scenario loading, subcommands and report files.

pub mod report;
pub mod scenario;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use ringqkd_core::geometry::{self, Constellation};
use ringqkd_core::keyrate::{self, ChannelModel, RateRow};
use ringqkd_core::linkbudget::{self, UplinkChannel};
use ringqkd_core::relay::{self, CompromiseScenario, RecoveryTarget, Segment};
use ringqkd_core::simulator::{self, SweepAxis};

pub use scenario::Scenario;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for bad input, 3 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) | CliError::Io { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "ringqkd", version, about = "Ring-constellation twin-field QKD simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ScenarioArgs {
    /// Scenario file (TOML); defaults apply to anything it leaves out.
    #[arg(long, short = 'c')]
    pub scenario: Option<PathBuf>,
    /// Override one key, e.g. `--set constellation.num_sats=24`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Campaign seed; shorthand for `--set campaign.seed=N`.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ScenarioArgs {
    pub fn all_overrides(&self) -> Vec<String> {
        let mut o = self.overrides.clone();
        if let Some(s) = self.seed {
            o.push(format!("campaign.seed={s}"));
        }
        o
    }

    pub fn load(&self) -> Result<Scenario> {
        let text = match &self.scenario {
            Some(p) => fs::read_to_string(p).map_err(|e| {
                CliError::Validation(format!("cannot read {}: {e}", p.display()))
            })?,
            None => String::new(),
        };
        Scenario::load(&text, &self.all_overrides())
    }
}

#[derive(Debug, Args, Clone)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long, short = 'o', env = "RINGQKD_OUTPUT_DIR", default_value = "ringqkd-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Ns,
    Latitude,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a multi-day campaign and write a report.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run one campaign per value of a swept parameter.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Print uplink and inter-satellite losses.
    Linkbudget {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Write the loss profile of the first visible pass over station 1 to this file.
        #[arg(long)]
        pass: Option<PathBuf>,
        /// Print inter-satellite losses for 1..=N hops instead of the uplink table.
        #[arg(long, value_name = "MAX_HOPS")]
        isl: Option<usize>,
    },
    /// Optimized secret key length at fixed channel losses.
    Keyrate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Comma-separated losses in dB.
        #[arg(long, value_delimiter = ',', required = true)]
        loss_db: Vec<f64>,
        #[arg(long, default_value_t = 10.0)]
        duration_s: f64,
    },
    /// Check what a set of compromised satellites learns about the relayed key.
    Security {
        #[arg(long)]
        ns: usize,
        /// Satellite attached to station A.
        #[arg(long)]
        i: usize,
        /// Satellite attached to station B.
        #[arg(long)]
        k: usize,
        /// Neighbour range of the twin-field links.
        #[arg(long, default_value_t = 2)]
        r: usize,
        #[arg(long, default_value_t = 1)]
        rings: usize,
        /// Compromised satellites, comma-separated; applied to every ring.
        #[arg(long, value_delimiter = ',')]
        compromised: Vec<usize>,
        /// Also search for the smallest coalition that exposes the final key.
        #[arg(long)]
        min: bool,
    },
    /// Validate a scenario and print it fully resolved.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
}

/// Run one command, writing human-readable output to `out`.
pub fn run<W: Write>(command: Command, out: &mut W) -> Result<()> {
    let w = |e: std::io::Error| CliError::Runtime(format!("writing output: {e}"));
    match command {
        Command::Simulate { scenario, output } => {
            let s = scenario.load()?;
            let cfg = s.validate()?;
            let result = simulator::run_campaign(&cfg)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            report::write_manifest(&output.out, &s, &scenario.all_overrides())?;
            report::write_report_csv(&output.out, &result)?;
            report::write_summary(&output.out, &s, &[(None, &result)])?;
            for m in &result.metrics {
                writeln!(out, "{:<16} mean {:.6e}  std {:.6e}", m.name, m.mean, m.std).map_err(w)?;
            }
            writeln!(out, "wrote {}", output.out.display()).map_err(w)?;
        }
        Command::Sweep {
            scenario,
            output,
            axis,
            values,
        } => {
            let s = scenario.load()?;
            let cfg = s.validate()?;
            let axis = match axis {
                AxisArg::Ns => SweepAxis::NumSats,
                AxisArg::Latitude => SweepAxis::Latitude,
            };
            let points = simulator::sweep(&cfg, axis, &values).map_err(|e| match e {
                simulator::SimError::Config(m) => CliError::Validation(m),
                other => CliError::Runtime(other.to_string()),
            })?;
            report::write_manifest(&output.out, &s, &scenario.all_overrides())?;
            report::write_curves(&output.out, &points)?;
            let refs: Vec<_> = points.iter().map(|(x, r)| (Some(*x), r)).collect();
            report::write_summary(&output.out, &s, &refs)?;
            for (x, r) in &points {
                writeln!(out, "{x}: protocol_skl {:.6e}", r.mean("protocol_skl")).map_err(w)?;
            }
            writeln!(out, "wrote {}", output.out.display()).map_err(w)?;
        }
        Command::Linkbudget {
            scenario,
            pass,
            isl,
        } => {
            let s = scenario.load()?;
            let cfg = s.validate()?;
            linkbudget_cmd(&cfg, pass.as_deref(), isl, out)?;
        }
        Command::Keyrate {
            scenario,
            loss_db,
            duration_s,
        } => {
            let s = scenario.load()?;
            let cfg = s.validate()?;
            let mut rows = Vec::with_capacity(loss_db.len());
            for l in loss_db {
                if !(l >= 0.0 && l.is_finite()) {
                    return Err(CliError::Validation(format!("loss {l} dB must be non-negative")));
                }
                let ch = ChannelModel::from_loss_db(l, cfg.devices);
                let result = keyrate::optimize_sns(&ch, duration_s, &cfg.eps, &cfg.optimizer)
                    .map_err(|e| CliError::Validation(e.to_string()))?;
                rows.push(RateRow {
                    loss_db: l,
                    duration_s,
                    result,
                });
            }
            keyrate::write_rate_table(&rows, &mut *out).map_err(w)?;
        }
        Command::Security {
            ns,
            i,
            k,
            r,
            rings,
            compromised,
            min,
        } => {
            let path = relay::build_paths(ns, i, k, r, rings)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let sc = CompromiseScenario::uniform(&compromised, rings);
            let v = relay::adversary_can_recover(&path, &sc)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            for seg in &v.segments {
                let name = match seg.segment {
                    Segment::Plus => "plus",
                    Segment::Minus => "minus",
                };
                writeln!(out, "ring {} {name}: exposed={}", seg.ring, seg.recoverable).map_err(w)?;
            }
            writeln!(out, "final key exposed: {}", v.recoverable).map_err(w)?;
            if min {
                let m = relay::min_compromise(&path, RecoveryTarget::FinalKey, true, 2_000_000);
                writeln!(
                    out,
                    "smallest exposing coalition: {}..={} satellites, e.g. {:?}",
                    m.lower, m.upper, m.example
                )
                .map_err(w)?;
            }
        }
        Command::Validate { scenario } => {
            let s = scenario.load()?;
            s.validate()?;
            out.write_all(s.to_toml().as_bytes()).map_err(w)?;
        }
    }
    Ok(())
}

fn linkbudget_cmd<W: Write>(
    cfg: &simulator::ScenarioConfig,
    pass: Option<&Path>,
    isl: Option<usize>,
    out: &mut W,
) -> Result<()> {
    let w = |e: std::io::Error| CliError::Runtime(format!("writing output: {e}"));
    let rt = |e: linkbudget::LinkBudgetError| CliError::Runtime(e.to_string());
    let spec = &cfg.constellation;
    if let Some(max_hops) = isl {
        let radius = spec.orbit_radius_km();
        writeln!(out, "hops,distance_km,loss_db").map_err(w)?;
        for h in 1..=max_hops.min(spec.num_sats / 2) {
            let d = linkbudget::ring_chord_km(spec.num_sats, h, radius);
            let eta = linkbudget::isl_efficiency(d * 1e3, &cfg.optics).map_err(rt)?;
            writeln!(out, "{h},{d:.3},{:.3}", linkbudget::to_db(eta)).map_err(w)?;
        }
        return Ok(());
    }
    let uplink = UplinkChannel::new(
        cfg.optics.clone(),
        &cfg.turbulence,
        spec.altitude_km,
        cfg.max_zenith_deg,
    )
    .map_err(rt)?;
    writeln!(out, "zenith_deg,loss_db").map_err(w)?;
    let mut z = 0.0;
    while z <= cfg.max_zenith_deg + 1e-9 {
        let eta = uplink.efficiency(z.to_radians()).map_err(rt)?;
        writeln!(out, "{z:.1},{:.3}", linkbudget::to_db(eta)).map_err(w)?;
        z += 10.0;
    }
    if let Some(path) = pass {
        let gs = &cfg.ground_stations[0];
        let rt_geo = |e: geometry::GeometryError| CliError::Runtime(e.to_string());
        let sessions = geometry::find_sessions(
            spec,
            gs,
            cfg.max_zenith_deg,
            spec.epoch_s,
            spec.epoch_s + cfg.t_total_s,
            cfg.session_dt_s,
        )
        .map_err(rt_geo)?;
        let first = sessions
            .first()
            .ok_or_else(|| CliError::Runtime("no visible pass in the campaign window".into()))?;
        let c = Constellation::new(spec.clone()).map_err(rt_geo)?;
        let samples = linkbudget::session_loss_profile(first, &c, gs, &uplink, cfg.sample_dt_s)
            .map_err(rt)?;
        let f = fs::File::create(path).map_err(io_err(path))?;
        linkbudget::write_loss_csv(&samples, std::io::BufWriter::new(f)).map_err(io_err(path))?;
        writeln!(out, "wrote {} samples to {}", samples.len(), path.display()).map_err(w)?;
    }
    Ok(())
}
