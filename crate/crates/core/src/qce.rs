//! Growth indices of Heisenberg fields and the characteristic-exponent fit.
//!
//! For each step `n` the derivative `Re v·∂γₙ(x)` is formed on the grid and
//! `Dₙ(x) = log|Re v·∂γₙ(x)|`. A trace records the uniform averages `⟨Dₙ⟩`
//! and `⟨Dₙ - D₀⟩/n` until a guard fires. The exponent is then read off by a
//! least-squares fit of `λ + c_v/n` with `λ` shared across directions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{
    directional_derivative, log_magnitude, masked_mean, Direction, RealField,
    DEFAULT_LOG_FLOOR, DEFAULT_SATURATION_RATIO,
};
use crate::heisenberg::HeisenbergRun;

/// Default bound on the roundtrip error `|(U⁻ⁿUⁿ - 1)ψ₀|`.
pub const DEFAULT_UNITARITY_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Guards {
    /// Fraction of the dynamic range at which a local difference counts as
    /// saturated; `>= 1` never halts.
    pub saturation_ratio: f64,
    pub unitarity_eps: f64,
    /// Relative floor for `log|·|`.
    pub log_floor: f64,
}

impl Default for Guards {
    fn default() -> Self {
        Self {
            saturation_ratio: DEFAULT_SATURATION_RATIO,
            unitarity_eps: DEFAULT_UNITARITY_EPS,
            log_floor: DEFAULT_LOG_FLOOR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    HaltedSaturation,
    HaltedUnitarity,
    Degenerate,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::HaltedSaturation => "halted_saturation",
            Status::HaltedUnitarity => "halted_unitarity",
            Status::Degenerate => "degenerate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Status::Ok,
            Status::HaltedSaturation,
            Status::HaltedUnitarity,
            Status::Degenerate,
        ]
        .into_iter()
        .find(|st| st.label() == s)
    }
}

/// Per-direction numbers of one trace step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionStats {
    /// `⟨Dₙ⟩`; `None` when every point fell below the floor.
    pub mean_dn: Option<f64>,
    /// `⟨Dₙ - D₀⟩/n` over the joint validity mask; `None` at `n = 0`.
    pub mean_growth: Option<f64>,
    /// Points excluded from `⟨Dₙ⟩`.
    pub excluded: usize,
    /// Points excluded from `⟨Dₙ - D₀⟩`.
    pub joint_excluded: usize,
    pub saturation_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub n: usize,
    pub directions: Vec<DirectionStats>,
    pub roundtrip_error: f64,
    pub status: Status,
}

impl TraceRecord {
    pub fn halted(&self) -> bool {
        self.status != Status::Ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub directions: Vec<Direction>,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    /// Status of the last record: `Ok` when the run reached `n_max`.
    pub fn final_status(&self) -> Status {
        self.records.last().map_or(Status::Ok, |r| r.status)
    }

    /// `(n, ⟨Dₙ - D₀⟩/n)` for unhalted records with `n >= min_n`.
    pub fn growth_series(&self, direction: usize, min_n: usize) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter(|r| !r.halted() && r.n >= min_n.max(1))
            .filter_map(|r| r.directions[direction].mean_growth.map(|g| (r.n, g)))
            .collect()
    }

    /// `(n, ⟨Dₙ⟩)` for unhalted records.
    pub fn dn_series(&self, direction: usize) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter(|r| !r.halted())
            .filter_map(|r| r.directions[direction].mean_dn.map(|d| (r.n, d)))
            .collect()
    }
}

/// `Dₙ(x) = log|Re v·∂γ(x)|` for the real part of `gamma`, with the
/// saturation fraction of the underlying difference.
pub fn growth_index_field(
    gamma: &crate::grid::WaveField,
    v: &Direction,
    guards: &Guards,
) -> Result<(RealField, f64)> {
    let d = directional_derivative(&gamma.real_part(), v, guards.saturation_ratio)?;
    Ok((log_magnitude(&d.field, guards.log_floor), d.saturation_fraction))
}

fn joint_growth(dn: &RealField, d0: &RealField, n: usize) -> (Option<f64>, usize) {
    let (sum, count) = dn
        .values()
        .iter()
        .zip(d0.values())
        .zip(dn.valid().iter().zip(d0.valid()))
        .filter(|(_, (a, b))| **a && **b)
        .fold((0.0, 0usize), |(s, c), ((x, y), _)| (s + (x - y), c + 1));
    let excluded = dn.values().len() - count;
    if count == 0 {
        (None, excluded)
    } else {
        (Some(sum / count as f64 / n as f64), excluded)
    }
}

/// Sweep `n = 0..=n_max`, stopping at the first step where a guard fires
/// or an average degenerates. Guards are not evaluated at `n = 0`.
pub fn run_trace(
    run: &mut HeisenbergRun,
    directions: &[Direction],
    n_max: usize,
    guards: &Guards,
) -> Result<Trace> {
    if n_max < 1 {
        return Err(Error::InvalidParameter {
            name: "n_max",
            reason: "must be at least 1".into(),
        });
    }
    if directions.is_empty() {
        return Err(Error::InvalidParameter {
            name: "directions",
            reason: "at least one direction is required".into(),
        });
    }
    let grid = run.floquet().grid();
    for v in directions {
        grid.check_dim(v.dim())?;
    }
    let mut reference: Vec<RealField> = Vec::with_capacity(directions.len());
    let mut records = Vec::new();
    for n in 0..=n_max {
        let sample = run.sample(n)?;
        let mut stats = Vec::with_capacity(directions.len());
        let mut degenerate = false;
        for (i, v) in directions.iter().enumerate() {
            let (dn, saturation_fraction) = growth_index_field(&sample.gamma, v, guards)?;
            let (mean_dn, excluded) = match masked_mean(&dn) {
                Ok(m) => (Some(m.mean), m.excluded),
                Err(_) => (None, dn.values().len()),
            };
            let (mean_growth, joint_excluded) = if n == 0 {
                (None, excluded)
            } else {
                joint_growth(&dn, &reference[i], n)
            };
            degenerate |= mean_dn.is_none() || (n > 0 && mean_growth.is_none());
            if n == 0 {
                reference.push(dn);
            }
            stats.push(DirectionStats {
                mean_dn,
                mean_growth,
                excluded,
                joint_excluded,
                saturation_fraction,
            });
        }
        let status = if degenerate {
            Status::Degenerate
        } else if n > 0 && sample.roundtrip_error > guards.unitarity_eps {
            Status::HaltedUnitarity
        } else if n > 0 && stats.iter().any(|s| s.saturation_fraction > 0.0) {
            Status::HaltedSaturation
        } else {
            Status::Ok
        };
        records.push(TraceRecord {
            n,
            directions: stats,
            roundtrip_error: sample.roundtrip_error,
            status,
        });
        if status != Status::Ok {
            break;
        }
    }
    Ok(Trace {
        directions: directions.to_vec(),
        records,
    })
}

/// Largest deviation between `Dₙ - D₀` and the telescoped sum of per-step
/// log ratios `Σₖ (Dₖ - Dₖ₋₁)`, over points valid at every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelescopeCheck {
    pub max_abs_error: f64,
    pub points: usize,
}

pub fn telescoping_check(
    run: &mut HeisenbergRun,
    v: &Direction,
    n: usize,
    guards: &Guards,
) -> Result<TelescopeCheck> {
    let mut fields = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let gamma = run.gamma(k)?;
        fields.push(growth_index_field(&gamma, v, guards)?.0);
    }
    let len = fields[0].values().len();
    let mut max_abs_error: f64 = 0.0;
    let mut points = 0;
    for i in 0..len {
        if !fields.iter().all(|f| f.valid()[i]) {
            continue;
        }
        points += 1;
        let direct = fields[n].values()[i] - fields[0].values()[i];
        let telescoped: f64 = (1..=n)
            .map(|k| fields[k].values()[i] - fields[k - 1].values()[i])
            .sum();
        max_abs_error = max_abs_error.max((direct - telescoped).abs());
    }
    if points == 0 {
        return Err(Error::DegenerateAverage { total: len });
    }
    Ok(TelescopeCheck {
        max_abs_error,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentEstimate {
    /// Shared large-`n` limit.
    pub lambda: f64,
    /// `c_v` for each direction.
    pub transients: Vec<f64>,
    /// RMS residual of the fit.
    pub residual: f64,
    /// Smallest and largest `n` entering the fit.
    pub n_range: (usize, usize),
}

/// Least-squares fit of `g_v(n) = λ + c_v/n` with `λ` common to all series.
///
/// Eliminating each `c_v` leaves a one-parameter problem in `λ`, so the fit
/// is closed form.
pub fn fit_exponent(series: &[Vec<(usize, f64)>]) -> Result<ExponentEstimate> {
    let params = series.len() + 1;
    let total: usize = series.iter().map(Vec::len).sum();
    if series.is_empty() || series.iter().any(|s| s.len() < 2) || total < params {
        return Err(Error::UnderDetermined {
            points: total,
            params,
        });
    }
    if series.iter().flatten().any(|&(n, _)| n == 0) {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "fit points need n >= 1".into(),
        });
    }
    struct Sums {
        w: f64,
        ww: f64,
        yw: f64,
    }
    let sums: Vec<Sums> = series
        .iter()
        .map(|s| {
            s.iter().fold(Sums { w: 0.0, ww: 0.0, yw: 0.0 }, |acc, &(n, y)| {
                let w = 1.0 / n as f64;
                Sums {
                    w: acc.w + w,
                    ww: acc.ww + w * w,
                    yw: acc.yw + y * w,
                }
            })
        })
        .collect();
    let (mut ab, mut bb) = (0.0, 0.0);
    for (s, st) in series.iter().zip(&sums) {
        for &(n, y) in s {
            let w = 1.0 / n as f64;
            let a = y - st.yw / st.ww * w;
            let b = 1.0 - st.w / st.ww * w;
            ab += a * b;
            bb += b * b;
        }
    }
    if bb <= 1e-14 * total as f64 {
        return Err(Error::UnderDetermined {
            points: total,
            params,
        });
    }
    let lambda = ab / bb;
    let transients: Vec<f64> = sums.iter().map(|st| (st.yw - lambda * st.w) / st.ww).collect();
    let sq: f64 = series
        .iter()
        .zip(&transients)
        .flat_map(|(s, &c)| s.iter().map(move |&(n, y)| (y - lambda - c / n as f64).powi(2)))
        .sum();
    let ns = series.iter().flatten().map(|&(n, _)| n);
    let n_range = (ns.clone().min().unwrap_or(0), ns.max().unwrap_or(0));
    Ok(ExponentEstimate {
        lambda,
        transients,
        residual: (sq / total as f64).sqrt(),
        n_range,
    })
}

/// `(n, ⟨Dₙ⟩ / log(log(n+1)))` for `n >= 2`; smaller `n` have a
/// non-positive scale and are dropped.
pub fn loglog_scaled(series: &[(usize, f64)]) -> Vec<(usize, f64)> {
    series
        .iter()
        .filter(|&&(n, _)| n >= 2)
        .map(|&(n, d)| (n, d / ((n as f64 + 1.0).ln().ln())))
        .collect()
}

/// Ordinary least-squares slope of `y` against `n`.
pub fn least_squares_slope(series: &[(usize, f64)]) -> Option<f64> {
    if series.len() < 2 {
        return None;
    }
    let m = series.len() as f64;
    let mx = series.iter().map(|p| p.0 as f64).sum::<f64>() / m;
    let my = series.iter().map(|p| p.1).sum::<f64>() / m;
    let (sxy, sxx) = series.iter().fold((0.0, 0.0), |(sxy, sxx), &(n, y)| {
        let dx = n as f64 - mx;
        (sxy + dx * (y - my), sxx + dx * dx)
    });
    (sxx > 0.0).then(|| sxy / sxx)
}
