//! Periodic grids on the unit circle and unit torus, fields sampled on them,
//! finite-difference directional derivatives and masked log averages.
//!
//! Points are stored row-major: in 2D the flat index is `j0 * n + j1`, where
//! `j0` runs along the first coordinate axis.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default ratio of the local difference to the dynamic range at which a
/// derivative is considered saturated.
pub const DEFAULT_SATURATION_RATIO: f64 = 0.5;

/// Default relative floor below which `|f|` is excluded from log averages.
pub const DEFAULT_LOG_FLOOR: f64 = 1e-12;

/// Uniform periodic grid on `[0,1)` or `[0,1)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicGrid {
    dim: usize,
    n: usize,
}

impl PeriodicGrid {
    /// Smallest axis length for which a central difference touches three
    /// distinct points.
    pub const MIN_POINTS: usize = 3;

    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if n < Self::MIN_POINTS {
            return Err(Error::GridTooSmall {
                min: Self::MIN_POINTS,
                got: n,
            });
        }
        Ok(Self { dim, n })
    }

    /// The circle S¹ with `n` points.
    pub fn line(n: usize) -> Result<Self> {
        Self::new(1, n)
    }

    /// The torus T² with `n × n` points.
    pub fn torus(n: usize) -> Result<Self> {
        Self::new(2, n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Total number of points, `n` or `n²`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Integer coordinates of a flat index. The second entry is 0 in 1D.
    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        match self.dim {
            1 => [idx, 0],
            _ => [idx / self.n, idx % self.n],
        }
    }

    pub fn flat_index(&self, j: [usize; 2]) -> usize {
        match self.dim {
            1 => j[0] % self.n,
            _ => (j[0] % self.n) * self.n + (j[1] % self.n),
        }
    }

    /// Coordinate `j/n` of a flat index.
    pub fn coord(&self, idx: usize) -> [f64; 2] {
        let [a, b] = self.multi_index(idx);
        [a as f64 / self.n as f64, b as f64 / self.n as f64]
    }

    /// Flat index of the neighbour displaced by `step` (±1) along `axis`.
    pub fn neighbour(&self, idx: usize, axis: usize, step: isize) -> usize {
        let mut j = self.multi_index(idx);
        let n = self.n as isize;
        j[axis] = (j[axis] as isize + step).rem_euclid(n) as usize;
        self.flat_index(j)
    }

    /// Symmetric Fourier band `[-⌊n/2⌋, ⌈n/2⌉ - 1]` per axis.
    pub fn band(&self) -> (i64, i64) {
        let n = self.n as i64;
        (-(n / 2), (n + 1) / 2 - 1)
    }

    /// Signed mode number carried by FFT bin `i` of one axis.
    pub fn mode_of_bin(&self, i: usize) -> i64 {
        let (_, hi) = self.band();
        if i as i64 <= hi {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Mode numbers of every flat spectral index.
    pub fn modes(&self, idx: usize) -> [i64; 2] {
        let [a, b] = self.multi_index(idx);
        match self.dim {
            1 => [self.mode_of_bin(a), 0],
            _ => [self.mode_of_bin(a), self.mode_of_bin(b)],
        }
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    /// `(k·j) mod n` evaluated exactly for an integer wavevector.
    pub fn phase_index(&self, k: &[i64], idx: usize) -> i64 {
        let j = self.multi_index(idx);
        let n = self.n as i64;
        k.iter()
            .zip(j.iter())
            .map(|(&kc, &jc)| (kc.rem_euclid(n) * jc as i64).rem_euclid(n))
            .sum::<i64>()
            .rem_euclid(n)
    }
}

/// Complex field on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    grid: PeriodicGrid,
    values: Vec<Complex64>,
}

impl WaveField {
    pub fn new(grid: PeriodicGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coord(i))).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Discrete norm `sqrt(Σ|ψ_j|² / len)`; the flat state has norm 1.
    pub fn norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|z| z.norm_sqr()).sum();
        (s / self.values.len() as f64).sqrt()
    }

    /// Largest pointwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &WaveField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn scale(&mut self, c: f64) {
        for z in &mut self.values {
            *z *= c;
        }
    }

    pub fn real_part(&self) -> RealField {
        RealField::new(self.grid, self.values.iter().map(|z| z.re).collect())
            .expect("length preserved")
    }
}

/// Real samples with a validity mask. Masked points never enter averages.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: PeriodicGrid,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl RealField {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        let valid = vec![true; values.len()];
        Self::with_mask(grid, values, valid)
    }

    pub fn with_mask(grid: PeriodicGrid, values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        if values.len() != grid.len() || valid.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len().min(valid.len()),
            });
        }
        Ok(Self {
            grid,
            values,
            valid,
        })
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coord(i))).collect();
        Self::new(grid, values).expect("length matches grid")
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn masked_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }

    /// Largest `|f|` over valid points.
    pub fn max_abs(&self) -> f64 {
        self.iter_valid().map(|(_, v)| v.abs()).fold(0.0, f64::max)
    }

    /// `(max - min)` over valid points, 0 if none are valid.
    pub fn dynamic_range(&self) -> f64 {
        let (lo, hi) = self
            .iter_valid()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| {
                (lo.min(v), hi.max(v))
            });
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }

    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter(|(_, (_, ok))| **ok)
            .map(|(i, (v, _))| (i, *v))
    }
}

/// Unit direction of differentiation: `±1` in 1D, a normalised pair in 2D.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    components: Vec<f64>,
}

impl Direction {
    pub fn new(components: &[f64]) -> Result<Self> {
        if components.is_empty() || components.len() > 2 {
            return Err(Error::UnsupportedDimension(components.len()));
        }
        let norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidDirection);
        }
        Ok(Self {
            components: components.iter().map(|c| c / norm).collect(),
        })
    }

    pub fn axis(dim: usize, axis: usize) -> Result<Self> {
        let mut c = vec![0.0; dim];
        if axis >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: axis + 1,
            });
        }
        c[axis] = 1.0;
        Self::new(&c)
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// Short label used in CSV column names: `x`/`y` for the axes.
    pub fn tag(&self, index: usize) -> String {
        match self.components.as_slice() {
            [x] if *x > 0.0 => "x".into(),
            [x, y] if *x == 1.0 && *y == 0.0 => "x".into(),
            [x, y] if *x == 0.0 && *y == 1.0 => "y".into(),
            _ => format!("v{index}"),
        }
    }
}

/// Result of [`directional_derivative`].
#[derive(Debug, Clone)]
pub struct Derivative {
    pub field: RealField,
    pub saturation_fraction: f64,
}

/// Central difference of a real field along `v` with periodic wrap.
///
/// In 2D the derivative along a non-axis direction is the combination
/// `v0 Δ0 + v1 Δ1` of the axis differences. A point is saturated when the
/// difference numerator `|f(x+h) - f(x-h)|` reaches `saturation_ratio` times
/// the field's dynamic range; ratios `>= 1` disable the test.
pub fn directional_derivative(
    f: &RealField,
    v: &Direction,
    saturation_ratio: f64,
) -> Result<Derivative> {
    let grid = f.grid();
    grid.check_dim(v.dim())?;
    let range = f.dynamic_range();
    if range == 0.0 {
        let field = RealField::with_mask(grid, vec![0.0; grid.len()], f.valid.clone())?;
        return Ok(Derivative {
            field,
            saturation_fraction: 0.0,
        });
    }
    let two_h = 2.0 * grid.spacing();
    let threshold = saturation_ratio * range;
    let check = saturation_ratio < 1.0;
    let mut values = Vec::with_capacity(grid.len());
    let mut valid = Vec::with_capacity(grid.len());
    let mut saturated = 0usize;
    for idx in 0..grid.len() {
        let mut numerator = 0.0;
        let mut ok = f.valid[idx];
        for (axis, &c) in v.components().iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let fwd = grid.neighbour(idx, axis, 1);
            let bwd = grid.neighbour(idx, axis, -1);
            ok &= f.valid[fwd] && f.valid[bwd];
            numerator += c * (f.values[fwd] - f.values[bwd]);
        }
        if check && ok && numerator.abs() >= threshold {
            saturated += 1;
        }
        values.push(numerator / two_h);
        valid.push(ok);
    }
    Ok(Derivative {
        field: RealField::with_mask(grid, values, valid)?,
        saturation_fraction: saturated as f64 / grid.len() as f64,
    })
}

/// Pointwise `log|f|` with the mask extended by the relative floor.
///
/// A point is kept when it is valid in `f` and `|f| > floor * max|f|`.
pub fn log_magnitude(f: &RealField, floor: f64) -> RealField {
    let cut = floor * f.max_abs();
    let mut values = Vec::with_capacity(f.values.len());
    let mut valid = Vec::with_capacity(f.values.len());
    for (&x, &ok) in f.values.iter().zip(&f.valid) {
        let keep = ok && x.abs() > cut && x != 0.0;
        valid.push(keep);
        values.push(if keep { x.abs().ln() } else { 0.0 });
    }
    RealField {
        grid: f.grid,
        values,
        valid,
    }
}

/// Mean of a masked field together with the number of excluded points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskedMean {
    pub mean: f64,
    pub excluded: usize,
}

pub fn masked_mean(f: &RealField) -> Result<MaskedMean> {
    let (sum, count) = f
        .iter_valid()
        .fold((0.0, 0usize), |(s, c), (_, v)| (s + v, c + 1));
    if count == 0 {
        return Err(Error::DegenerateAverage { total: f.values.len() });
    }
    Ok(MaskedMean {
        mean: sum / count as f64,
        excluded: f.values.len() - count,
    })
}

/// Uniform-measure average of `log|f|`, excluding masked and near-zero points.
pub fn masked_log_average(f: &RealField, floor: f64) -> Result<MaskedMean> {
    masked_mean(&log_magnitude(f, floor))
}

/// Constant field equal to 1 everywhere (the zero-momentum state).
pub fn flat_state(grid: PeriodicGrid) -> WaveField {
    WaveField {
        grid,
        values: vec![Complex64::new(1.0, 0.0); grid.len()],
    }
}

/// `exp(2πi k·j/n)`, with the phase reduced exactly on the integer lattice.
pub fn plane_wave(grid: PeriodicGrid, k: &[i64]) -> Result<WaveField> {
    grid.check_dim(k.len())?;
    let (lo, hi) = grid.band();
    if let Some(&bad) = k.iter().find(|&&c| c < lo || c > hi) {
        return Err(Error::BandLimit { k: bad, lo, hi });
    }
    let n = grid.n_per_axis() as f64;
    let values = (0..grid.len())
        .map(|i| {
            let m = grid.phase_index(k, i) as f64;
            Complex64::from_polar(1.0, 2.0 * PI * m / n)
        })
        .collect();
    WaveField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn grid_geometry() {
        let g = PeriodicGrid::torus(5).unwrap();
        assert_eq!(g.len(), 25);
        assert_eq!(g.multi_index(7), [1, 2]);
        assert_eq!(g.neighbour(4, 1, 1), 0);
        assert_eq!(g.neighbour(0, 0, -1), 20);
        assert_eq!(g.band(), (-2, 2));
        assert_eq!(PeriodicGrid::line(4).unwrap().band(), (-2, 1));
        assert_eq!(PeriodicGrid::line(4).unwrap().mode_of_bin(2), -2);
        assert!(PeriodicGrid::line(2).is_err());
        assert!(PeriodicGrid::new(3, 8).is_err());
    }

    #[test]
    fn flat_state_is_ones_with_unit_norm() {
        let g = PeriodicGrid::line(4).unwrap();
        let f = flat_state(g);
        assert_eq!(f.values(), &[c(1.0, 0.0); 4]);
        assert_eq!(f.norm(), 1.0);
    }

    #[test]
    fn plane_wave_roots_of_unity() {
        let g = PeriodicGrid::line(4).unwrap();
        let f = plane_wave(g, &[1]).unwrap();
        let expected = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        for (a, b) in f.values().iter().zip(expected) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-15);
        }
        assert_eq!(plane_wave(g, &[0]).unwrap(), flat_state(g));
    }

    #[test]
    fn plane_wave_negative_mode_is_conjugate() {
        let g = PeriodicGrid::line(8).unwrap();
        let p = plane_wave(g, &[3]).unwrap();
        let m = plane_wave(g, &[-3]).unwrap();
        for (a, b) in p.values().iter().zip(m.values()) {
            assert_abs_diff_eq!((a.conj() - b).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn plane_wave_rejects_out_of_band() {
        let g = PeriodicGrid::line(8).unwrap();
        assert!(matches!(
            plane_wave(g, &[4]),
            Err(Error::BandLimit { k: 4, lo: -4, hi: 3 })
        ));
        assert!(plane_wave(g, &[-4]).is_ok());
        assert!(plane_wave(g, &[1, 1]).is_err());
    }

    #[test]
    fn central_difference_of_sine_within_taylor_bound() {
        let n = 4096;
        let g = PeriodicGrid::line(n).unwrap();
        let f = RealField::from_fn(g, |x| (2.0 * PI * x[0]).sin());
        let d = directional_derivative(&f, &Direction::new(&[1.0]).unwrap(), 0.5).unwrap();
        let h = g.spacing();
        let bound = (2.0 * PI).powi(3) * h * h / 6.0;
        let err = d
            .field
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - 2.0 * PI * (2.0 * PI * g.coord(i)[0]).cos()).abs())
            .fold(0.0, f64::max);
        assert!(err <= bound, "{err} > {bound}");
        assert_eq!(d.saturation_fraction, 0.0);
    }

    #[test]
    fn constant_field_has_zero_derivative() {
        let g = PeriodicGrid::torus(8).unwrap();
        let f = RealField::from_fn(g, |_| 3.5);
        let d = directional_derivative(&f, &Direction::axis(2, 1).unwrap(), 0.5).unwrap();
        assert!(d.field.values().iter().all(|v| *v == 0.0));
        assert_eq!(d.saturation_fraction, 0.0);
    }

    #[test]
    fn saturation_measured_against_range_two() {
        // sin(2πkx) has range 2; the central-difference numerator peaks at
        // 2 sin(2πk/N) which crosses 1 once k/N > 1/12.
        let g = PeriodicGrid::line(64).unwrap();
        let v = Direction::new(&[1.0]).unwrap();
        let slow = RealField::from_fn(g, |x| (2.0 * PI * 4.0 * x[0]).sin());
        let fast = RealField::from_fn(g, |x| (2.0 * PI * 8.0 * x[0]).sin());
        assert_abs_diff_eq!(slow.dynamic_range(), 2.0, epsilon = 1e-12);
        assert_eq!(directional_derivative(&slow, &v, 0.5).unwrap().saturation_fraction, 0.0);
        let sat = directional_derivative(&fast, &v, 0.5).unwrap().saturation_fraction;
        assert!(sat > 0.0);
        assert_eq!(directional_derivative(&fast, &v, 1.0).unwrap().saturation_fraction, 0.0);
    }

    #[test]
    fn plane_wave_derivative_is_second_order() {
        let v = Direction::new(&[1.0]).unwrap();
        for k in [1i64, 2, 5] {
            let mut errs = Vec::new();
            for n in [256usize, 512] {
                let g = PeriodicGrid::line(n).unwrap();
                let f = plane_wave(g, &[k]).unwrap().real_part();
                let d = directional_derivative(&f, &v, 1.0).unwrap();
                let kk = 2.0 * PI * k as f64;
                let err = d
                    .field
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(i, val)| (val + kk * (kk * g.coord(i)[0]).sin()).abs())
                    .fold(0.0, f64::max);
                errs.push(err);
            }
            let order = (errs[0] / errs[1]).log2();
            assert!((order - 2.0).abs() < 0.05, "k={k}: order {order}");
        }
    }

    #[test]
    fn log_average_of_constant() {
        let g = PeriodicGrid::line(16).unwrap();
        let f = RealField::from_fn(g, |_| 2.5);
        let m = masked_log_average(&f, DEFAULT_LOG_FLOOR).unwrap();
        assert_abs_diff_eq!(m.mean, 2.5f64.ln(), epsilon = 1e-15);
        assert_eq!(m.excluded, 0);
    }

    #[test]
    fn log_average_of_zero_field_is_degenerate() {
        let g = PeriodicGrid::line(16).unwrap();
        let f = RealField::from_fn(g, |_| 0.0);
        assert_eq!(
            masked_log_average(&f, DEFAULT_LOG_FLOOR),
            Err(Error::DegenerateAverage { total: 16 })
        );
    }

    #[test]
    fn log_average_counts_masked_points() {
        let g = PeriodicGrid::line(4).unwrap();
        let f = RealField::with_mask(g, vec![1.0, 0.0, 2.0, 4.0], vec![true, true, true, false])
            .unwrap();
        let m = masked_log_average(&f, DEFAULT_LOG_FLOOR).unwrap();
        assert_eq!(m.excluded, 2);
        assert_abs_diff_eq!(m.mean, 2f64.ln() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn directions_normalise_and_tag() {
        let d = Direction::new(&[3.0, 4.0]).unwrap();
        assert_eq!(d.components(), &[0.6, 0.8]);
        assert_eq!(d.tag(3), "v3");
        assert_eq!(Direction::axis(2, 1).unwrap().tag(0), "y");
        assert!(Direction::new(&[0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn derivative_is_linear(
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            ka in 1i64..6, kb in 1i64..6, vx in -1.0f64..1.0, vy in 0.1f64..1.0,
        ) {
            let g = PeriodicGrid::torus(24).unwrap();
            let v = Direction::new(&[vx, vy]).unwrap();
            let f = RealField::from_fn(g, |x| (2.0 * PI * (ka as f64 * x[0] + x[1])).sin());
            let h = RealField::from_fn(g, |x| (2.0 * PI * kb as f64 * x[1]).cos() + x[0]);
            let combo = RealField::new(
                g,
                f.values().iter().zip(h.values()).map(|(p, q)| a * p + b * q).collect(),
            ).unwrap();
            let df = directional_derivative(&f, &v, 1.0).unwrap().field;
            let dh = directional_derivative(&h, &v, 1.0).unwrap().field;
            let dc = directional_derivative(&combo, &v, 1.0).unwrap().field;
            for i in 0..g.len() {
                let lin = a * df.values()[i] + b * dh.values()[i];
                prop_assert!((dc.values()[i] - lin).abs() <= 1e-12 * (1.0 + lin.abs()));
            }
        }

        #[test]
        fn log_average_sign_and_scale(c in 0.01f64..100.0, k in 1i64..7) {
            let g = PeriodicGrid::line(128).unwrap();
            let f = RealField::from_fn(g, |x| (2.0 * PI * k as f64 * x[0]).cos() + 0.3);
            let neg = RealField::new(g, f.values().iter().map(|v| -v).collect()).unwrap();
            let scaled = RealField::new(g, f.values().iter().map(|v| c * v).collect()).unwrap();
            let base = masked_log_average(&f, DEFAULT_LOG_FLOOR).unwrap();
            let flipped = masked_log_average(&neg, DEFAULT_LOG_FLOOR).unwrap();
            let shifted = masked_log_average(&scaled, DEFAULT_LOG_FLOOR).unwrap();
            prop_assert!((base.mean - flipped.mean).abs() <= 1e-12);
            prop_assert!((shifted.mean - base.mean - c.ln()).abs() <= 1e-12);
            prop_assert_eq!(base.excluded, shifted.excluded);
        }
    }
}
