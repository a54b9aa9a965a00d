//! Files written by `simulate` and `sweep`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::{json, Map, Value};

use ringqkd_core::simulator::{write_curve, CampaignResult, METRICS};

use crate::{io_err, Result, Scenario};

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(io_err(path))?))
}

/// `manifest.toml`: the fully resolved scenario. Overrides are recorded as
/// comments so the file loads back to the same scenario.
pub fn write_manifest(dir: &Path, scenario: &Scenario, overrides: &[String]) -> Result<()> {
    let path = dir.join("manifest.toml");
    let mut f = create(&path)?;
    let mut text = format!("# ringqkd {}\n", env!("CARGO_PKG_VERSION"));
    for o in overrides {
        text.push_str(&format!("# override: {o}\n"));
    }
    text.push('\n');
    text.push_str(&scenario.to_toml());
    f.write_all(text.as_bytes()).map_err(io_err(&path))?;
    f.flush().map_err(io_err(&path))
}

/// `report.csv`: one row per simulated day.
pub fn write_report_csv(dir: &Path, result: &CampaignResult) -> Result<()> {
    let path = dir.join("report.csv");
    let mut f = create(&path)?;
    let mut header = String::from("day,phase_offset_deg");
    for m in METRICS {
        header.push(',');
        header.push_str(m);
    }
    writeln!(f, "{header}").map_err(io_err(&path))?;
    for d in &result.days {
        let mut row = format!("{},{:.16e}", d.day, d.phase_offset_deg);
        for m in METRICS {
            row.push_str(&format!(",{:.16e}", d.metric(m).unwrap_or(f64::NAN)));
        }
        writeln!(f, "{row}").map_err(io_err(&path))?;
    }
    f.flush().map_err(io_err(&path))
}

fn metrics_json(result: &CampaignResult) -> Value {
    let mut m = Map::new();
    for s in &result.metrics {
        m.insert(s.name.to_string(), json!({ "mean": s.mean, "std": s.std }));
    }
    Value::Object(m)
}

/// `summary.json`: per-metric mean and population std, one entry per
/// campaign (a sweep records its x value alongside).
pub fn write_summary(
    dir: &Path,
    scenario: &Scenario,
    runs: &[(Option<f64>, &CampaignResult)],
) -> Result<()> {
    let path = dir.join("summary.json");
    let campaigns: Vec<Value> = runs
        .iter()
        .map(|(x, r)| {
            let mut v = json!({ "n_days": r.days.len(), "metrics": metrics_json(r) });
            if let Some(x) = x {
                v["x"] = json!(x);
            }
            v
        })
        .collect();
    let doc = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": scenario.campaign.seed,
        "num_sats": scenario.constellation.num_sats,
        "campaigns": campaigns,
    });
    let mut f = create(&path)?;
    serde_json::to_writer_pretty(&mut f, &doc)
        .map_err(|e| crate::CliError::Runtime(format!("summary: {e}")))?;
    writeln!(f).map_err(io_err(&path))?;
    f.flush().map_err(io_err(&path))
}

/// `curves/<metric>.csv` with `x,mean,std` rows for every metric.
pub fn write_curves(dir: &Path, points: &[(f64, CampaignResult)]) -> Result<()> {
    for m in METRICS {
        let path = dir.join("curves").join(format!("{m}.csv"));
        let mut f = create(&path)?;
        write_curve(points, m, &mut f).map_err(io_err(&path))?;
        f.flush().map_err(io_err(&path))?;
    }
    Ok(())
}
