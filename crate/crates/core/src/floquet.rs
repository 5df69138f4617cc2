//! One-period evolution operators of kicked systems.
//!
//! A Floquet operator is the product of a free evolution, diagonal in the
//! Fourier basis, and a kick, which is either a pointwise phase
//! `exp(-i q cos 2πx)` or the lattice substitution `ψ(x) -> ψ(M⁻¹x)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, WaveField};
use crate::spectral::Spectral;

/// Free Hamiltonians, each diagonal on Fourier modes `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KineticVariant {
    /// `-(1/2π) d²/dx²` on the circle: `2πk²`.
    RotorQuadratic,
    /// `-2π cos((1/2πi) d/dx)` on the circle: `-2π cos k`.
    RotorCosine,
    /// `p²/2` on the torus with `p = 2πk`.
    CatQuadratic,
}

impl KineticVariant {
    pub fn dim(self) -> usize {
        match self {
            Self::RotorQuadratic | Self::RotorCosine => 1,
            Self::CatQuadratic => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticSpec {
    pub variant: KineticVariant,
    /// τ for rotators, T for the cat.
    pub time_step: f64,
}

impl KineticSpec {
    pub fn new(variant: KineticVariant, time_step: f64) -> Result<Self> {
        if !(time_step.is_finite() && time_step > 0.0) {
            return Err(Error::InvalidParameter {
                name: "time_step",
                reason: format!("must be finite and positive, got {time_step}"),
            });
        }
        Ok(Self { variant, time_step })
    }

    /// Eigenvalue of the free Hamiltonian on mode `k`.
    pub fn eigenvalue(&self, k: [i64; 2]) -> f64 {
        match self.variant {
            KineticVariant::RotorQuadratic => 2.0 * PI * (k[0] * k[0]) as f64,
            KineticVariant::RotorCosine => -2.0 * PI * (k[0] as f64).cos(),
            KineticVariant::CatQuadratic => {
                0.5 * (2.0 * PI).powi(2) * (k[0] * k[0] + k[1] * k[1]) as f64
            }
        }
    }

    /// `exp(-i time_step H₀(k))`.
    pub fn phase(&self, k: [i64; 2]) -> Complex64 {
        Complex64::from_polar(1.0, -self.time_step * self.eigenvalue(k))
    }
}

/// 2×2 integer matrix with determinant 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntMatrix2(pub [[i64; 2]; 2]);

impl IntMatrix2 {
    pub const IDENTITY: Self = Self([[1, 0], [0, 1]]);

    pub fn unimodular(entries: [[i64; 2]; 2]) -> Result<Self> {
        let m = Self(entries);
        if m.det() != 1 {
            return Err(Error::NotUnimodular(entries));
        }
        Ok(m)
    }

    pub fn det(&self) -> i64 {
        let [[a, b], [c, d]] = self.0;
        a * d - b * c
    }

    pub fn trace(&self) -> i64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Adjugate, which is the inverse since `det = 1`.
    pub fn inverse(&self) -> Self {
        let [[a, b], [c, d]] = self.0;
        Self([[d, -b], [-c, a]])
    }

    pub fn transpose(&self) -> Self {
        let [[a, b], [c, d]] = self.0;
        Self([[a, c], [b, d]])
    }

    pub fn apply(&self, v: [i64; 2]) -> [i64; 2] {
        let [[a, b], [c, d]] = self.0;
        [a * v[0] + b * v[1], c * v[0] + d * v[1]]
    }

    /// `M j mod n` on lattice indices.
    pub fn apply_mod(&self, j: [usize; 2], n: usize) -> [usize; 2] {
        let n = n as i64;
        let [[a, b], [c, d]] = self.0;
        let (j0, j1) = (j[0] as i64, j[1] as i64);
        let r = |p: i64, q: i64| ((p.rem_euclid(n) * j0 + q.rem_euclid(n) * j1).rem_euclid(n)) as usize;
        [r(a, b), r(c, d)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KickSpec {
    /// `V(x) = q cos(2πx)` applied as `exp(-iV)`.
    Multiplicative { strength: f64 },
    /// `ψ(x) -> ψ(M⁻¹x)`.
    Substitution(IntMatrix2),
}

impl KickSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::Multiplicative { .. } => 1,
            Self::Substitution(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    /// `U = U_free U_kick`.
    KickThenFree,
    /// `U = U_kick U_free`.
    FreeThenKick,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloquetSpec {
    pub grid: PeriodicGrid,
    pub kinetic: KineticSpec,
    pub kick: KickSpec,
    pub order: Order,
}

impl FloquetSpec {
    fn validate(&self) -> Result<()> {
        self.grid.check_dim(self.kinetic.variant.dim())?;
        self.grid.check_dim(self.kick.dim())?;
        if let KickSpec::Multiplicative { strength } = self.kick {
            if !strength.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "kick_strength",
                    reason: format!("must be finite, got {strength}"),
                });
            }
        }
        if let KickSpec::Substitution(m) = self.kick {
            IntMatrix2::unimodular(m.0)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Kick {
    Phase(Vec<Complex64>),
    Permutation {
        forward: Vec<usize>,
        inverse: Vec<usize>,
    },
}

/// A Floquet operator with its phase and permutation tables precomputed.
#[derive(Debug, Clone)]
pub struct Floquet {
    spec: FloquetSpec,
    spectral: Spectral,
    free_phase: Vec<Complex64>,
    kick: Kick,
}

impl Floquet {
    pub fn new(spec: FloquetSpec) -> Result<Self> {
        spec.validate()?;
        let grid = spec.grid;
        let free_phase = (0..grid.len())
            .map(|idx| spec.kinetic.phase(grid.modes(idx)))
            .collect();
        let kick = match spec.kick {
            KickSpec::Multiplicative { strength } => {
                let n = grid.n_per_axis() as f64;
                Kick::Phase(
                    (0..grid.len())
                        .map(|j| {
                            let v = strength * (2.0 * PI * j as f64 / n).cos();
                            Complex64::from_polar(1.0, -v)
                        })
                        .collect(),
                )
            }
            KickSpec::Substitution(m) => {
                let n = grid.n_per_axis();
                let table = |a: IntMatrix2| -> Vec<usize> {
                    (0..grid.len())
                        .map(|idx| grid.flat_index(a.apply_mod(grid.multi_index(idx), n)))
                        .collect()
                };
                Kick::Permutation {
                    forward: table(m.inverse()),
                    inverse: table(m),
                }
            }
        };
        Ok(Self {
            spec,
            spectral: Spectral::new(grid),
            free_phase,
            kick,
        })
    }

    pub fn spec(&self) -> &FloquetSpec {
        &self.spec
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.spec.grid
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    fn free_in_place(&self, data: &mut [Complex64], inverse: bool) {
        self.spectral.forward_in_place(data);
        for (z, p) in data.iter_mut().zip(&self.free_phase) {
            *z *= if inverse { p.conj() } else { *p };
        }
        self.spectral.inverse_in_place(data);
    }

    fn kick_in_place(&self, data: &mut Vec<Complex64>, inverse: bool) {
        match &self.kick {
            Kick::Phase(phase) => {
                for (z, p) in data.iter_mut().zip(phase) {
                    *z *= if inverse { p.conj() } else { *p };
                }
            }
            Kick::Permutation { forward, inverse: back } => {
                let table = if inverse { back } else { forward };
                *data = table.iter().map(|&src| data[src]).collect();
            }
        }
    }

    /// One forward period on raw samples.
    pub fn step_in_place(&self, data: &mut Vec<Complex64>) {
        match self.spec.order {
            Order::KickThenFree => {
                self.kick_in_place(data, false);
                self.free_in_place(data, false);
            }
            Order::FreeThenKick => {
                self.free_in_place(data, false);
                self.kick_in_place(data, false);
            }
        }
    }

    /// One backward period: conjugate factors in reverse order.
    pub fn step_inverse_in_place(&self, data: &mut Vec<Complex64>) {
        match self.spec.order {
            Order::KickThenFree => {
                self.free_in_place(data, true);
                self.kick_in_place(data, true);
            }
            Order::FreeThenKick => {
                self.kick_in_place(data, true);
                self.free_in_place(data, true);
            }
        }
    }

    fn map(&self, f: &WaveField, op: impl FnOnce(&mut Vec<Complex64>)) -> WaveField {
        let mut data = f.values().to_vec();
        op(&mut data);
        WaveField::new(f.grid(), data).expect("operators preserve length")
    }

    pub fn apply_free(&self, f: &WaveField) -> WaveField {
        self.map(f, |d| self.free_in_place(d, false))
    }

    pub fn apply_free_inverse(&self, f: &WaveField) -> WaveField {
        self.map(f, |d| self.free_in_place(d, true))
    }

    pub fn apply_kick(&self, f: &WaveField) -> WaveField {
        self.map(f, |d| self.kick_in_place(d, false))
    }

    pub fn apply_kick_inverse(&self, f: &WaveField) -> WaveField {
        self.map(f, |d| self.kick_in_place(d, true))
    }

    pub fn apply(&self, f: &WaveField) -> WaveField {
        self.map(f, |d| self.step_in_place(d))
    }

    pub fn apply_inverse(&self, f: &WaveField) -> WaveField {
        self.map(f, |d| self.step_inverse_in_place(d))
    }

    /// `Uⁿ f`.
    pub fn apply_n(&self, f: &WaveField, n: usize) -> WaveField {
        self.map(f, |d| (0..n).for_each(|_| self.step_in_place(d)))
    }

    /// `U⁻ⁿ f`.
    pub fn apply_inverse_n(&self, f: &WaveField, n: usize) -> WaveField {
        self.map(f, |d| (0..n).for_each(|_| self.step_inverse_in_place(d)))
    }

    /// Max-norm of `(K⁻ⁿKⁿ - 1) f` for the kick factor `K` alone.
    pub fn kick_roundtrip_error(&self, f: &WaveField, n: usize) -> f64 {
        let there = self.map(f, |d| (0..n).for_each(|_| self.kick_in_place(d, false)));
        let back = self.map(&there, |d| (0..n).for_each(|_| self.kick_in_place(d, true)));
        back.max_abs_diff(f)
    }

    /// Max-norm of `(U⁻ⁿUⁿ - 1) f`.
    pub fn unitarity_roundtrip_error(&self, f: &WaveField, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let there = self.apply_n(f, n);
        self.apply_inverse_n(&there, n).max_abs_diff(f)
    }
}
