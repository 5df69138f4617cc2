//! Acceptance suite: one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use num_traits::ToPrimitive;

use qcexp::cat_oracle::{analytic_derivative_field, CatMatrix, PhaseSum};
use qcexp::cli::config::{ExperimentConfig, Preset, ResolvedConfig};
use qcexp::cli::runner::{compute, run_experiment, Computed, TRACE_FILE};
use qcexp::floquet::{
    Floquet, FloquetSpec, IntMatrix2, KickSpec, KineticSpec, KineticVariant, Order,
};
use qcexp::grid::{plane_wave, Direction, PeriodicGrid, RealField, WaveField};
use qcexp::heisenberg::{HeisenbergRun, Observable};
use qcexp::qce::{least_squares_slope, telescoping_check, Status};
use qcexp::spectral::Spectral;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn resolve(cfg: ExperimentConfig) -> ResolvedConfig {
    cfg.resolve().expect("preset resolves")
}

fn preset(p: Preset) -> ResolvedConfig {
    resolve(ExperimentConfig::preset(p))
}

fn timed(cfg: &ResolvedConfig) -> Result<(Computed, Duration), String> {
    let t = Instant::now();
    let c = compute(cfg).map_err(|e| e.to_string())?;
    Ok((c, t.elapsed()))
}

fn exact_cat_exponent() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_qcexp"))
        .arg("oracle")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("exit status {}", out.status))?;
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text
        .lines()
        .find(|l| l.starts_with("log|mu1|"))
        .ok_or("no log|mu1| line")?;
    let printed = line.rsplit(' ').next().unwrap_or_default();
    let expected = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    ensure(printed == format!("{expected:.6}"), || format!("printed {printed}"))?;
    ensure(printed.starts_with("0.9624"), || format!("printed {printed}"))?;
    Ok(format!("oracle prints {printed}"))
}

fn numerical_cat_exponent() -> Outcome {
    let mut notes = Vec::new();
    for (paper_scale, lo, hi, budget) in [(true, 0.90, 1.00, 600.0), (false, 0.85, 1.05, 60.0)] {
        let cfg = resolve(ExperimentConfig {
            paper_scale: Some(paper_scale),
            ..ExperimentConfig::preset(Preset::Cat)
        });
        let (c, dt) = timed(&cfg)?;
        ensure(c.trace.final_status() == Status::HaltedSaturation, || {
            format!("N = {}: run ended {:?}", cfg.grid_size, c.trace.final_status())
        })?;
        let fit = c.fit.map_err(|e| e.to_string())?;
        ensure((lo..=hi).contains(&fit.lambda), || {
            format!("N = {}: lambda = {:.4} outside [{lo}, {hi}]", cfg.grid_size, fit.lambda)
        })?;
        ensure(dt.as_secs_f64() <= budget, || {
            format!("N = {} took {:.1}s", cfg.grid_size, dt.as_secs_f64())
        })?;
        notes.push(format!(
            "N = {}: lambda = {:.4} in {:.1}s",
            cfg.grid_size,
            fit.lambda,
            dt.as_secs_f64()
        ));
    }
    Ok(notes.join("; "))
}

fn cat_run(n: usize, period: f64, l: [i64; 2], n_max: usize) -> HeisenbergRun {
    let floquet = Floquet::new(FloquetSpec {
        grid: PeriodicGrid::torus(n).unwrap(),
        kinetic: KineticSpec::new(KineticVariant::CatQuadratic, period).unwrap(),
        kick: KickSpec::Substitution(IntMatrix2::unimodular([[1, 1], [1, 2]]).unwrap()),
        order: Order::KickThenFree,
    })
    .unwrap();
    HeisenbergRun::new(floquet, Observable::new(&l).unwrap(), n_max).unwrap()
}

fn sup(f: &RealField) -> f64 {
    f.values().iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn numerical_derivatives(run: &mut HeisenbergRun, v: &Direction, n_max: usize) -> Vec<RealField> {
    let spectral = Spectral::new(run.floquet().grid());
    (0..=n_max)
        .map(|n| {
            let g = run.gamma(n).unwrap();
            spectral.directional_derivative(&g, v).unwrap()
        })
        .collect()
}

fn oracle_equivalence() -> Outcome {
    const N: usize = 128;
    const N_MAX: usize = 4;
    let m = CatMatrix::standard();
    let l = [1, 0];
    let v = Direction::new(&[1.0, 0.0]).unwrap();
    let grid = PeriodicGrid::torus(N).unwrap();
    let mut run = cat_run(N, 1.0, l, N_MAX);
    let num = numerical_derivatives(&mut run, &v, N_MAX);
    let ana: Vec<RealField> = (0..=N_MAX)
        .map(|n| analytic_derivative_field(&m, l, &v, 1.0, n, grid).unwrap())
        .collect();

    // one global scale for all n
    let (mut sxy, mut syy) = (0.0, 0.0);
    for (a, b) in num.iter().zip(&ana) {
        for (x, y) in a.values().iter().zip(b.values()) {
            sxy += x * y;
            syy += y * y;
        }
    }
    let scale = sxy / syy;
    let mut worst_rel: f64 = 0.0;
    let mut worst_sup: f64 = 0.0;
    for (a, b) in num.iter().zip(&ana) {
        let bmax = sup(b);
        for (x, y) in a.values().iter().zip(b.values()) {
            let model = scale * y;
            worst_sup = worst_sup.max((x - model).abs() / (scale.abs() * bmax));
            if y.abs() > 1e-3 * bmax {
                worst_rel = worst_rel.max((x - model).abs() / model.abs());
            }
        }
    }
    ensure(worst_rel < 1e-4, || format!("pointwise relative error {worst_rel:.2e}"))?;

    // sup ratios carry |cos Aₙ₊₁ / cos Aₙ| from the accumulated free phase
    let ratio_of = |a: &RealField, b: &RealField| sup(b) / sup(a);
    let orbit_dot = |ps: &PhaseSum| ps.end()[0].to_f64().unwrap();
    let mut worst_ratio: f64 = 0.0;
    for n in 0..N_MAX {
        let p0 = PhaseSum::new(m.matrix().transpose(), l, 1.0, n).unwrap();
        let p1 = PhaseSum::new(m.matrix().transpose(), l, 1.0, n + 1).unwrap();
        let expected = (orbit_dot(&p1) / orbit_dot(&p0)).abs()
            * (p1.common_phase.cos() / p0.common_phase.cos()).abs();
        let got = ratio_of(&num[n], &num[n + 1]);
        worst_ratio = worst_ratio.max((got / expected - 1.0).abs());
    }
    ensure(worst_ratio < 1e-6, || format!("T = 1 sup ratio error {worst_ratio:.2e}"))?;

    // at T = 1/(2π) every cos Aₙ is ±1 and the ratio is the bare orbit ratio
    let mut res = cat_run(N, 1.0 / (2.0 * PI), l, N_MAX);
    let num_res = numerical_derivatives(&mut res, &v, N_MAX);
    let orbit = qcexp::cat_oracle::orbit(m.matrix(), l, N_MAX);
    let mut worst_bare: f64 = 0.0;
    for n in 0..N_MAX {
        let expected = (orbit[n + 1][0].to_f64().unwrap() / orbit[n][0].to_f64().unwrap()).abs();
        let got = ratio_of(&num_res[n], &num_res[n + 1]);
        worst_bare = worst_bare.max((got / expected - 1.0).abs());
    }
    ensure(worst_bare < 1e-6, || format!("resonant sup ratio error {worst_bare:.2e}"))?;

    Ok(format!(
        "scale {scale:.6}, pointwise rel {worst_rel:.1e}, sup-normalized {worst_sup:.1e}, \
         ratio err {worst_ratio:.1e} (T = 1), {worst_bare:.1e} (T = 1/2pi)"
    ))
}

fn unitarity_guard() -> Outcome {
    let cfg = preset(Preset::RotorQuadratic);
    let mut run = cfg.heisenberg_run().map_err(|e| e.to_string())?;
    let s = run.sample(100).map_err(|e| e.to_string())?;
    ensure(s.roundtrip_error < 1e-8, || format!("roundtrip error {:.2e}", s.roundtrip_error))?;

    let cat = cat_run(64, 1.0, [1, 1], 1);
    let grid = cat.floquet().grid();
    let field = WaveField::from_fn(grid, |x| {
        Complex64::new((2.0 * PI * x[0]).sin() + x[1], (6.0 * PI * x[1]).cos() * x[0])
    });
    let kick = cat.floquet().kick_roundtrip_error(&field, 50);
    ensure(kick == 0.0, || format!("substitution roundtrip {kick:e}"))?;
    Ok(format!(
        "rotor n = 100 roundtrip {:.2e}; substitution roundtrip {kick}",
        s.roundtrip_error
    ))
}

fn eigenphases() -> Outcome {
    let tau = 5f64.sqrt() / 2.0;
    let grid = PeriodicGrid::line(64).unwrap();
    let mut worst: f64 = 0.0;
    for variant in [KineticVariant::RotorQuadratic, KineticVariant::RotorCosine] {
        let f = Floquet::new(FloquetSpec {
            grid,
            kinetic: KineticSpec::new(variant, tau).unwrap(),
            kick: KickSpec::Multiplicative { strength: 0.0 },
            order: Order::FreeThenKick,
        })
        .unwrap();
        for k in [0i64, 1, -1, 5, -5] {
            let kf = k as f64;
            let phase = match variant {
                KineticVariant::RotorQuadratic => Complex64::from_polar(1.0, -tau * 2.0 * PI * kf * kf),
                _ => Complex64::from_polar(1.0, tau * 2.0 * PI * kf.cos()),
            };
            let psi = plane_wave(grid, &[k]).unwrap();
            let out = f.apply_free(&psi);
            for (a, b) in out.values().iter().zip(psi.values()) {
                worst = worst.max((a - phase * b).norm());
            }
        }
    }
    ensure(worst < 1e-12, || format!("max deviation {worst:.2e}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

fn window(series: &[(usize, f64)], lo: usize, hi: usize) -> Vec<(usize, f64)> {
    series
        .iter()
        .copied()
        .filter(|&(n, _)| (lo..=hi).contains(&n))
        .collect()
}

fn vanishing_rotor_exponent(c: &Computed) -> Outcome {
    ensure(c.trace.final_status() == Status::Ok, || {
        format!("halted: {:?}", c.trace.final_status())
    })?;
    let w = window(&c.trace.dn_series(0), 100, 300);
    ensure(w.len() == 201, || format!("{} points in [100, 300]", w.len()))?;
    let slope = least_squares_slope(&w).ok_or("no slope")?;
    ensure(slope.abs() < 0.02, || format!("slope {slope:.4}"))?;
    Ok(format!("slope of <Dn> over [100, 300] = {slope:.5}"))
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (max - min) / mean
}

fn slow_growth(c: &Computed) -> Outcome {
    ensure(c.trace.final_status() == Status::Ok, || {
        format!("halted: {:?}", c.trace.final_status())
    })?;
    let w = window(&c.trace.dn_series(0), 50, 300);
    ensure(w.len() == 251, || format!("{} points in [50, 300]", w.len()))?;
    let raw: Vec<f64> = w.iter().map(|p| p.1).collect();
    let scaled: Vec<f64> = w
        .iter()
        .map(|&(n, d)| d / (n as f64 + 1.0).ln().ln())
        .collect();
    let (sr, ss) = (spread(&raw), spread(&scaled));
    ensure(ss < sr, || format!("scaled spread {ss:.3} >= raw {sr:.3}"))?;
    let lambda = c.fit.as_ref().map_err(|e| e.to_string())?.lambda;
    ensure(lambda.abs() < 0.05, || format!("lambda = {lambda:.4}"))?;
    Ok(format!("spread raw {sr:.3}, scaled {ss:.3}; lambda = {lambda:.4}"))
}

fn telescoping() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for p in [Preset::Cat, Preset::RotorQuadratic, Preset::RotorCosine] {
        let cfg = preset(p);
        let mut run = cfg.heisenberg_run().map_err(|e| e.to_string())?;
        let guards = cfg.guards();
        let mut min_points = usize::MAX;
        for v in cfg.directions().map_err(|e| e.to_string())? {
            for n in 1..=20 {
                let t = telescoping_check(&mut run, &v, n, &guards).map_err(|e| e.to_string())?;
                worst = worst.max(t.max_abs_error);
                min_points = min_points.min(t.points);
            }
        }
        notes.push(format!("{} >= {min_points} pts", p.name()));
    }
    ensure(worst < 1e-9, || format!("max error {worst:.2e}"))?;
    Ok(format!("max error {worst:.1e} ({})", notes.join(", ")))
}

/// Composite midpoint rule with geometric refinement toward the
/// logarithmic singularity at u = 1/4.
fn log_cos_integral() -> f64 {
    // ∫₀¹ log|cos 2πu| du = 4 ∫₀^{1/4} log cos 2πu du; substitute s = 1/4 - u
    let f = |s: f64| (2.0 * PI * s).sin().ln();
    let mut total = 0.0;
    let mut hi = 0.25;
    for _ in 0..60 {
        let lo = hi / 2.0;
        let m = 20_000;
        let h = (hi - lo) / m as f64;
        total += (0..m).map(|i| f(lo + (i as f64 + 0.5) * h)).sum::<f64>() * h;
        hi = lo;
    }
    // remaining [0, hi]: log sin 2πs ≈ log 2πs
    total += hi * ((2.0 * PI * hi).ln() - 1.0);
    4.0 * total
}

fn analytic_d0(c: &Computed) -> Outcome {
    let quad = log_cos_integral();
    ensure((quad + 2f64.ln()).abs() < 1e-9, || {
        format!("quadrature {quad:.12} vs -ln 2")
    })?;
    // D₀ = log|2π cos 2πx| averages to log 2π - log 2
    let expected = (2.0 * PI).ln() + quad;
    let d0 = c.trace.records[0].directions[0].mean_dn.ok_or("no D0")?;
    ensure((d0 - expected).abs() < 0.05, || format!("D0 = {d0:.4}, log pi = {expected:.4}"))?;
    Ok(format!("quadrature {quad:.10}; D0 = {d0:.4} vs log pi = {expected:.4}"))
}

fn determinism() -> Outcome {
    let dirs = [tempfile::tempdir(), tempfile::tempdir()];
    let mut notes = Vec::new();
    for (p, n, n_max) in [(Preset::Cat, 96, 30), (Preset::RotorCosine, 1024, 60)] {
        let mut bytes = Vec::new();
        for d in &dirs {
            let d = d.as_ref().map_err(|e| e.to_string())?;
            let cfg = resolve(ExperimentConfig {
                grid_size: Some(n),
                n_max: Some(n_max),
                output_dir: Some(d.path().to_path_buf()),
                chart: Some(false),
                ..ExperimentConfig::preset(p)
            });
            run_experiment(&cfg).map_err(|e| e.to_string())?;
            bytes.push(std::fs::read(d.path().join(TRACE_FILE)).map_err(|e| e.to_string())?);
        }
        ensure(bytes[0] == bytes[1], || format!("{} CSVs differ", p.name()))?;
        notes.push(format!("{} {} bytes", p.name(), bytes[0].len()));
    }
    Ok(format!("identical CSVs ({})", notes.join(", ")))
}

fn main() -> ExitCode {
    let rotor_quadratic = compute(&preset(Preset::RotorQuadratic)).expect("rotor_quadratic run");
    let rotor_cosine = compute(&preset(Preset::RotorCosine)).expect("rotor_cosine run");

    let criteria: Vec<Criterion> = vec![
        ("exact cat exponent", Box::new(exact_cat_exponent)),
        ("numerical cat exponent", Box::new(numerical_cat_exponent)),
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("unitarity guard", Box::new(unitarity_guard)),
        ("eigenphase exactness", Box::new(eigenphases)),
        ("vanishing rotator exponent", Box::new(|| vanishing_rotor_exponent(&rotor_quadratic))),
        ("slow-growth characterization", Box::new(|| slow_growth(&rotor_cosine))),
        ("identity telescoping", Box::new(telescoping)),
        ("analytic D0 level", Box::new(|| analytic_d0(&rotor_quadratic))),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
