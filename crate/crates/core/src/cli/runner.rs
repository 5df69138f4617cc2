//! The experiment pipeline and its on-disk artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::chart::{read_trace_csv, render_chart, ChartOptions, Quantity};
use super::config::{ExperimentConfig, ResolvedConfig, System};
use super::CliError;
use crate::cat_oracle::{exact_exponent, Branch, CatMatrix, Probe, DEFAULT_ORTHOGONALITY_TOL};
use crate::qce::{fit_exponent, run_trace, ExponentEstimate, Status, Trace};

pub const TRACE_FILE: &str = "trace.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const CONFIG_FILE: &str = "resolved_config.toml";
pub const CHART_FILE: &str = "chart.svg";

/// How a run ended; maps onto the process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    GuardHalt,
    Degenerate,
}

impl Outcome {
    pub fn from_status(status: Status) -> Self {
        match status {
            Status::Ok => Self::Completed,
            Status::HaltedSaturation | Status::HaltedUnitarity => Self::GuardHalt,
            Status::Degenerate => Self::Degenerate,
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Self::Completed => 0,
            Self::GuardHalt => 3,
            Self::Degenerate => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub lambda: f64,
    pub transients: Vec<f64>,
    pub residual: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub directions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub mu1: f64,
    pub lambda_exact: f64,
    pub branch: String,
    pub lambda_fit: Option<f64>,
    pub abs_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub started: String,
    pub finished: String,
    pub status: String,
    pub halt_reason: String,
    pub records: usize,
    pub last_n: usize,
    pub trace_csv: String,
    pub chart: Option<String>,
    pub fit_note: Option<String>,
    pub estimate: Option<EstimateRecord>,
    pub oracle: Option<OracleComparison>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub trace: Trace,
    pub estimate: Option<ExponentEstimate>,
    pub manifest: RunManifest,
    pub outcome: Outcome,
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub chart_path: Option<PathBuf>,
}

/// Pipeline output before anything touches the disk.
#[derive(Debug, Clone)]
pub struct Computed {
    pub trace: Trace,
    pub fit: Result<ExponentEstimate, crate::Error>,
    pub oracle: Option<OracleComparison>,
}

pub fn compute(cfg: &ResolvedConfig) -> Result<Computed, CliError> {
    let mut run = cfg.heisenberg_run()?;
    let directions = cfg.directions()?;
    let trace = run_trace(&mut run, &directions, cfg.n_max, &cfg.guards())?;
    let series: Vec<_> = (0..directions.len())
        .map(|i| trace.growth_series(i, cfg.fit_min_n))
        .collect();
    let fit = fit_exponent(&series);
    let oracle = match cfg.system {
        System::Cat => cat_comparison(cfg, fit.as_ref().ok().map(|e| e.lambda))?,
        _ => None,
    };
    Ok(Computed { trace, fit, oracle })
}

fn cat_comparison(
    cfg: &ResolvedConfig,
    lambda_fit: Option<f64>,
) -> Result<Option<OracleComparison>, CliError> {
    let Some(entries) = cfg.matrix else {
        return Ok(None);
    };
    let m = CatMatrix::new(entries)?;
    let l = [cfg.observable[0], cfg.observable[1]];
    let mut best = None;
    for v in &cfg.directions {
        let e = exact_exponent(&m, Probe::Real([v[0], v[1]]), l, DEFAULT_ORTHOGONALITY_TOL)?;
        if best.is_none() || e.branch == Branch::Unstable {
            best = Some(e);
        }
    }
    Ok(best.map(|e| OracleComparison {
        mu1: m.mu1(),
        lambda_exact: e.lambda,
        branch: match e.branch {
            Branch::Unstable => "unstable".into(),
            Branch::Stable => "stable".into(),
        },
        lambda_fit,
        abs_error: lambda_fit.map(|f| (f - e.lambda).abs()),
    }))
}

fn fmt_num(x: f64) -> String {
    format!("{x:.14e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// The trace as CSV text, one row per record.
pub fn trace_csv(trace: &Trace) -> Result<String, CliError> {
    let tags: Vec<String> = trace
        .directions
        .iter()
        .enumerate()
        .map(|(i, d)| d.tag(i))
        .collect();
    let mut header = vec!["n".to_string()];
    for t in &tags {
        header.extend([
            format!("mean_Dn_{t}"),
            format!("mean_growth_{t}"),
            format!("excluded_{t}"),
            format!("saturation_fraction_{t}"),
            format!("loglog_{t}"),
        ]);
    }
    header.extend(["roundtrip_error".into(), "status".into()]);

    let mut w = csv::Writer::from_writer(Vec::new());
    let ser = |e: csv::Error| CliError::Serialize(e.to_string());
    w.write_record(&header).map_err(ser)?;
    for r in &trace.records {
        let mut row = vec![r.n.to_string()];
        for d in &r.directions {
            let loglog = d
                .mean_dn
                .filter(|_| r.n >= 2)
                .map(|m| m / (r.n as f64 + 1.0).ln().ln());
            row.extend([
                fmt_opt(d.mean_dn),
                fmt_opt(d.mean_growth),
                d.joint_excluded.to_string(),
                fmt_num(d.saturation_fraction),
                fmt_opt(loglog),
            ]);
        }
        row.extend([fmt_num(r.roundtrip_error), r.status.label().to_string()]);
        w.write_record(&row).map_err(ser)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Serialize(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Serialize(e.to_string()))
}

fn halt_reason(trace: &Trace, cfg: &ResolvedConfig) -> String {
    let Some(last) = trace.records.last() else {
        return "no records".into();
    };
    let mut s = String::new();
    match last.status {
        Status::Ok => {
            let _ = write!(s, "completed n_max = {}", cfg.n_max);
        }
        Status::HaltedSaturation => {
            let (i, d) = last
                .directions
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.saturation_fraction.total_cmp(&b.1.saturation_fraction))
                .expect("at least one direction");
            let _ = write!(
                s,
                "saturation guard at n = {}: fraction {:.3e} of points reach ratio {} (direction {})",
                last.n,
                d.saturation_fraction,
                cfg.saturation_ratio,
                trace.directions[i].tag(i)
            );
        }
        Status::HaltedUnitarity => {
            let _ = write!(
                s,
                "unitarity guard at n = {}: roundtrip error {:.3e} exceeds {:.1e}",
                last.n, last.roundtrip_error, cfg.unitarity_eps
            );
        }
        Status::Degenerate => {
            let _ = write!(s, "degenerate average at n = {}: no valid grid points", last.n);
        }
    }
    s
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Run the pipeline and write trace, manifest, resolved config and chart
/// into `cfg.output_dir`.
pub fn run_experiment(cfg: &ResolvedConfig) -> Result<RunOutputs, CliError> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let started = timestamp();
    let computed = compute(cfg)?;
    let csv = trace_csv(&computed.trace)?;
    let csv_path = dir.join(TRACE_FILE);
    write_file(&csv_path, &csv)?;

    let resolved = cfg.to_config();
    let resolved_text =
        toml::to_string(&resolved).map_err(|e| CliError::Serialize(e.to_string()))?;
    write_file(&dir.join(CONFIG_FILE), &resolved_text)?;

    let chart_path = if cfg.chart && computed.trace.records.len() >= 2 {
        let table = read_trace_csv(&csv)?;
        let svg = render_chart(
            &table,
            &ChartOptions {
                quantity: Quantity::Auto,
                fit: true,
                fit_min_n: cfg.fit_min_n,
                title: Some(format!("{} (N = {})", cfg.preset.name(), cfg.grid_size)),
            },
        )?;
        let path = dir.join(CHART_FILE);
        write_file(&path, &svg)?;
        Some(path)
    } else {
        None
    };

    let tags: Vec<String> = computed
        .trace
        .directions
        .iter()
        .enumerate()
        .map(|(i, d)| d.tag(i))
        .collect();
    let (estimate, fit_note) = match &computed.fit {
        Ok(e) => (
            Some(EstimateRecord {
                lambda: e.lambda,
                transients: e.transients.clone(),
                residual: e.residual,
                n_min: e.n_range.0,
                n_max: e.n_range.1,
                directions: tags,
            }),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    };
    let status = computed.trace.final_status();
    let manifest = RunManifest {
        software: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        started,
        finished: timestamp(),
        status: status.label().into(),
        halt_reason: halt_reason(&computed.trace, cfg),
        records: computed.trace.records.len(),
        last_n: computed.trace.records.last().map_or(0, |r| r.n),
        trace_csv: TRACE_FILE.into(),
        chart: chart_path.as_ref().map(|_| CHART_FILE.into()),
        fit_note,
        estimate,
        oracle: computed.oracle.clone(),
        config: resolved,
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = toml::to_string(&manifest).map_err(|e| CliError::Serialize(e.to_string()))?;
    write_file(&manifest_path, &text)?;

    Ok(RunOutputs {
        trace: computed.trace,
        estimate: computed.fit.ok(),
        manifest,
        outcome: Outcome::from_status(status),
        csv_path,
        manifest_path,
        chart_path,
    })
}
