use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use qcexp::cat_oracle::{
    exact_exponent, finite_n_sequence, Branch, CatMatrix, Probe, DEFAULT_ORTHOGONALITY_TOL,
};
use qcexp::cli::{
    emit_chart, run_experiment, ChartOptions, CliError, ExperimentConfig, Preset, Quantity,
};
use qcexp::floquet::Order;

#[derive(Parser)]
#[command(name = "qcexp", version, about = "Quantum characteristic exponents of kicked systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file or a preset.
    Run(RunArgs),
    /// Render a trace CSV as SVG.
    Chart(ChartArgs),
    /// Print exact cat-map results.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config (a run manifest also works).
    config: Option<PathBuf>,
    /// cat, rotor_quadratic, rotor_cosine or custom.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    kick_strength: Option<f64>,
    #[arg(long)]
    time_step: Option<f64>,
    /// Comma-separated wavevector, e.g. `1,1`.
    #[arg(long, allow_hyphen_values = true)]
    observable: Option<String>,
    /// Comma-separated direction; repeat for several.
    #[arg(long = "direction", allow_hyphen_values = true)]
    directions: Vec<String>,
    /// Row-major `a,b,c,d`.
    #[arg(long, allow_hyphen_values = true)]
    matrix: Option<String>,
    /// kick_then_free or free_then_kick.
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    saturation_ratio: Option<f64>,
    #[arg(long)]
    unitarity_eps: Option<f64>,
    #[arg(long)]
    log_floor: Option<f64>,
    #[arg(long)]
    fit_min_n: Option<usize>,
    /// Cat on the 541 × 541 grid.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_chart: bool,
}

#[derive(Args)]
struct ChartArgs {
    csv: PathBuf,
    /// Defaults to the CSV path with an `.svg` extension.
    #[arg(long)]
    out: Option<PathBuf>,
    /// auto, growth, dn or loglog.
    #[arg(long, default_value = "auto")]
    quantity: String,
    #[arg(long)]
    no_fit: bool,
    #[arg(long, default_value_t = 2)]
    fit_min_n: usize,
    #[arg(long)]
    title: Option<String>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value = "1,1,1,2", allow_hyphen_values = true)]
    matrix: String,
    #[arg(long, default_value = "1,1", allow_hyphen_values = true)]
    l: String,
    #[arg(long, default_value = "1,0", allow_hyphen_values = true)]
    v: String,
    /// Step for the finite-n value.
    #[arg(long, default_value_t = 30)]
    n: usize,
}

/// A usage problem: reported with exit status 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| usage(format!("bad {what}: `{s}`"))))
        .collect()
}

fn parse_matrix(s: &str) -> Result<[[i64; 2]; 2]> {
    match parse_list::<i64>(s, "matrix")?.as_slice() {
        &[a, b, c, d] => Ok([[a, b], [c, d]]),
        _ => Err(usage(format!("matrix needs 4 entries: `{s}`"))),
    }
}

fn parse_pair<T: std::str::FromStr + Copy>(s: &str, what: &str) -> Result<[T; 2]> {
    match parse_list::<T>(s, what)?.as_slice() {
        &[a, b] => Ok([a, b]),
        _ => Err(usage(format!("{what} needs 2 entries: `{s}`"))),
    }
}

fn config_from_args(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| match e {
            CliError::Config(m) => usage(format!("{}: {m}", path.display())),
            other => other.into(),
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = &a.preset {
        cfg.preset = Some(Preset::parse(p).ok_or_else(|| usage(format!("unknown preset `{p}`")))?);
    }
    if cfg.preset.is_none() && a.config.is_none() {
        bail!(usage("give a config file or --preset"));
    }
    cfg.grid_size = a.grid_size.or(cfg.grid_size);
    cfg.n_max = a.n_max.or(cfg.n_max);
    cfg.kick_strength = a.kick_strength.or(cfg.kick_strength);
    cfg.time_step = a.time_step.or(cfg.time_step);
    if let Some(o) = &a.observable {
        cfg.observable = Some(parse_list(o, "observable")?);
    }
    if !a.directions.is_empty() {
        cfg.directions = Some(
            a.directions
                .iter()
                .map(|d| parse_list(d, "direction"))
                .collect::<Result<_>>()?,
        );
    }
    if let Some(m) = &a.matrix {
        cfg.matrix = Some(parse_matrix(m)?);
    }
    if let Some(o) = &a.order {
        cfg.order = Some(match o.as_str() {
            "kick_then_free" => Order::KickThenFree,
            "free_then_kick" => Order::FreeThenKick,
            _ => bail!(usage(format!("unknown order `{o}`"))),
        });
    }
    cfg.saturation_ratio = a.saturation_ratio.or(cfg.saturation_ratio);
    cfg.unitarity_eps = a.unitarity_eps.or(cfg.unitarity_eps);
    cfg.log_floor = a.log_floor.or(cfg.log_floor);
    cfg.fit_min_n = a.fit_min_n.or(cfg.fit_min_n);
    if a.paper_scale {
        cfg.paper_scale = Some(true);
    }
    if let Some(out) = &a.out {
        cfg.output_dir = Some(out.clone());
    }
    if a.no_chart {
        cfg.chart = Some(false);
    }
    Ok(cfg)
}

fn run(a: RunArgs) -> Result<i32> {
    let cfg = config_from_args(&a)?;
    let resolved = cfg.resolve().map_err(|e| usage(e.to_string()))?;
    println!(
        "[run] {} N = {} n_max = {} -> {}",
        resolved.preset.name(),
        resolved.grid_size,
        resolved.n_max,
        resolved.output_dir.display()
    );
    let out = run_experiment(&resolved).context("experiment failed")?;
    println!("[run] {}", out.manifest.halt_reason);
    match &out.manifest.estimate {
        Some(e) => println!(
            "[run] lambda = {:.6} (n = {}..{}, rms residual {:.2e})",
            e.lambda, e.n_min, e.n_max, e.residual
        ),
        None => println!(
            "[run] no exponent fit: {}",
            out.manifest.fit_note.as_deref().unwrap_or("-")
        ),
    }
    if let Some(o) = &out.manifest.oracle {
        println!("[run] exact lambda = {:.6} ({} branch)", o.lambda_exact, o.branch);
    }
    println!("[run] trace {}", out.csv_path.display());
    println!("[run] manifest {}", out.manifest_path.display());
    Ok(out.outcome.exit_code())
}

fn chart(a: ChartArgs) -> Result<i32> {
    let quantity = Quantity::parse(&a.quantity)
        .ok_or_else(|| usage(format!("unknown quantity `{}`", a.quantity)))?;
    let out = a.out.clone().unwrap_or_else(|| a.csv.with_extension("svg"));
    let opts = ChartOptions {
        quantity,
        fit: !a.no_fit,
        fit_min_n: a.fit_min_n,
        title: a.title,
    };
    emit_chart(&a.csv, &out, &opts).with_context(|| format!("charting {}", a.csv.display()))?;
    println!("{}", out.display());
    Ok(0)
}

fn oracle(a: OracleArgs) -> Result<i32> {
    let entries = parse_matrix(&a.matrix)?;
    let l = parse_pair::<i64>(&a.l, "l")?;
    let v = parse_pair::<f64>(&a.v, "v")?;
    let m = CatMatrix::new(entries).map_err(|e| usage(e.to_string()))?;
    let probe = Probe::Real(v);
    let exact = exact_exponent(&m, probe, l, DEFAULT_ORTHOGONALITY_TOL)
        .map_err(|e| usage(e.to_string()))?;
    println!("M = [[{}, {}], [{}, {}]]", entries[0][0], entries[0][1], entries[1][0], entries[1][1]);
    println!("mu1 = {:.12}", m.mu1());
    println!("mu2 = {:.12}", m.mu2());
    println!("log|mu1| = {:.6}", m.lyapunov());
    let branch = match exact.branch {
        Branch::Unstable => "unstable",
        Branch::Stable => "stable",
    };
    println!("exponent(v = {v:?}, l = {l:?}) = {:.6} ({branch} branch)", exact.lambda);
    if a.n >= 1 {
        let seq = finite_n_sequence(&m, probe, l, a.n, DEFAULT_ORTHOGONALITY_TOL)?;
        if let Some(&(n, x)) = seq.last() {
            println!("(1/n) log|v.M^n l| at n = {n}: {x:.6}");
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Chart(a) => chart(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
