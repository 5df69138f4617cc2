//! Unitary discrete Fourier transforms on periodic grids.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::Result;
use crate::grid::{Direction, PeriodicGrid, RealField, WaveField};

/// Planned forward/inverse FFT pair for one grid, normalised by
/// `1/sqrt(len)` in each direction.
#[derive(Clone)]
pub struct Spectral {
    grid: PeriodicGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    norm: f64,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: PeriodicGrid) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n_per_axis();
        Self {
            grid,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            norm: 1.0 / (grid.len() as f64).sqrt(),
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    /// In-place unitary forward transform of raw grid samples.
    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        self.transform(&self.forward, data);
    }

    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.transform(&self.inverse, data);
    }

    fn transform(&self, fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let n = self.grid.n_per_axis();
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        // rows (or the whole line in 1D)
        fft.process_with_scratch(data, &mut scratch);
        if self.grid.dim() == 2 {
            let mut t = vec![Complex64::new(0.0, 0.0); data.len()];
            transpose(data, &mut t, n);
            fft.process_with_scratch(&mut t, &mut scratch);
            transpose(&t, data, n);
        }
        for z in data.iter_mut() {
            *z *= self.norm;
        }
    }

    pub fn forward_transform(&self, f: &WaveField) -> WaveField {
        let mut out = f.clone();
        self.forward_in_place(out.values_mut());
        out
    }

    pub fn inverse_transform(&self, f: &WaveField) -> WaveField {
        let mut out = f.clone();
        self.inverse_in_place(out.values_mut());
        out
    }

    /// Exact derivative of the band-limited interpolant of `Re f` along `v`.
    ///
    /// The Nyquist bin of an even grid is dropped so the result stays real.
    pub fn directional_derivative(&self, f: &WaveField, v: &Direction) -> Result<RealField> {
        self.grid.check_dim(v.dim())?;
        let n = self.grid.n_per_axis();
        let nyquist = if n.is_multiple_of(2) { Some(-(n as i64) / 2) } else { None };
        let mut data: Vec<Complex64> = f.values().iter().map(|z| Complex64::new(z.re, 0.0)).collect();
        self.forward_in_place(&mut data);
        for (idx, z) in data.iter_mut().enumerate() {
            let k = self.grid.modes(idx);
            if nyquist.is_some_and(|ny| k[..v.dim()].contains(&ny)) {
                *z = Complex64::new(0.0, 0.0);
                continue;
            }
            let kv: f64 = v
                .components()
                .iter()
                .zip(k.iter())
                .map(|(c, &m)| c * m as f64)
                .sum();
            *z *= Complex64::new(0.0, 2.0 * PI * kv);
        }
        self.inverse_in_place(&mut data);
        RealField::new(self.grid, data.into_iter().map(|z| z.re).collect())
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    for ib in (0..n).step_by(BLOCK) {
        for jb in (0..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                for j in jb..(jb + BLOCK).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}
