//! Runs a config: executes the probe, writes artifacts, evaluates criteria.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use super::config::{Comparison, ExperimentConfig, Format};
use super::probes::{execute, ProbeOutput};
use crate::error::{Error, Result};

/// Command-line overrides applied on top of the config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub metric: String,
    pub op: Comparison,
    pub value: f64,
    pub observed: f64,
    pub pass: bool,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let op = match self.op {
            Comparison::Ge => ">=",
            Comparison::Le => "<=",
        };
        format!(
            "[{}] {} {op} {}: observed {:.6e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.metric,
            self.value,
            self.observed
        )
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub criteria: Vec<CriterionResult>,
}

impl RunOutcome {
    pub fn pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CRITERIA: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(r: &Result<RunOutcome>) -> i32 {
    match r {
        Ok(o) if o.pass() => EXIT_OK,
        Ok(_) => EXIT_CRITERIA,
        Err(e) if e.is_schema() => EXIT_SCHEMA,
        Err(Error::Io(_)) => EXIT_SCHEMA,
        Err(_) => EXIT_NUMERICAL,
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text)
}

fn write_csv(path: &Path, out: &ProbeOutput) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&out.header)?;
    for r in &out.rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Executes `cfg` and writes results.csv, manifest.json and summary.txt into the output directory.
pub fn run(cfg: &ExperimentConfig, label: &str, ov: &Overrides) -> Result<RunOutcome> {
    let mut cfg = cfg.clone();
    if let Some(s) = ov.seed {
        cfg.numerics.seed = s;
    }
    if let Some(j) = ov.jobs {
        cfg.numerics.jobs = j;
    }
    if let Some(o) = &ov.out {
        cfg.output.dir = o.display().to_string();
    }
    cfg.validate()?;
    let model = cfg.model.to_spec()?;
    let probe = cfg.probe()?.clone();
    let out_dir = PathBuf::from(&cfg.output.dir);
    fs::create_dir_all(&out_dir)?;

    crate::quantize::set_norm_seed(cfg.numerics.seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.numerics.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let result = pool.install(|| execute(&model, &probe, &cfg.numerics));
    crate::quantize::set_norm_seed(crate::quantize::NORM_SEED);
    let out = result?;
    let elapsed = start.elapsed().as_secs_f64();

    let criteria: Vec<CriterionResult> = cfg
        .criteria
        .iter()
        .map(|c| {
            let observed = out.metrics.get(&c.metric).copied().unwrap_or(f64::NAN);
            CriterionResult {
                metric: c.metric.clone(),
                op: c.op,
                value: c.value,
                observed,
                pass: c.holds(observed),
            }
        })
        .collect();

    if cfg.output.formats.contains(&Format::Csv) {
        write_csv(&out_dir.join("results.csv"), &out)?;
    }
    if cfg.output.formats.contains(&Format::Json) {
        let manifest = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "label": label,
            "config": cfg,
            "metrics": out.metrics,
            "criteria": criteria,
            "detail": out.detail,
            "elapsed_seconds": elapsed,
        });
        fs::write(
            out_dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
    }
    let mut summary: Vec<String> = criteria.iter().map(|c| c.line()).collect();
    summary.push(format!(
        "{label}: {}/{} criteria passed",
        criteria.iter().filter(|c| c.pass).count(),
        criteria.len()
    ));
    fs::write(out_dir.join("summary.txt"), summary.join("\n") + "\n")?;
    Ok(RunOutcome { out_dir, criteria })
}
