//! Heisenberg-evolved observable fields `γₙ = U⁻ⁿ X Uⁿ ψ₀`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::floquet::Floquet;
use crate::grid::{flat_state, PeriodicGrid, WaveField};

/// The multiplication operator `X = a·sin(2π l·x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    l: Vec<i64>,
    amplitude: f64,
}

impl Observable {
    pub fn new(l: &[i64]) -> Result<Self> {
        Self::scaled(l, 1.0)
    }

    /// `amplitude · sin(2π l·x)`; only used to probe scaling covariance.
    pub fn scaled(l: &[i64], amplitude: f64) -> Result<Self> {
        if l.is_empty() || l.len() > 2 {
            return Err(Error::UnsupportedDimension(l.len()));
        }
        if l.iter().all(|&c| c == 0) {
            return Err(Error::ZeroWavevector);
        }
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::InvalidParameter {
                name: "amplitude",
                reason: format!("must be positive, got {amplitude}"),
            });
        }
        Ok(Self {
            l: l.to_vec(),
            amplitude,
        })
    }

    pub fn wavevector(&self) -> &[i64] {
        &self.l
    }

    /// Samples of the observable's symbol on the grid.
    pub fn samples(&self, grid: PeriodicGrid) -> Result<Vec<f64>> {
        grid.check_dim(self.l.len())?;
        let n = grid.n_per_axis() as f64;
        Ok((0..grid.len())
            .map(|i| self.amplitude * (2.0 * PI * grid.phase_index(&self.l, i) as f64 / n).sin())
            .collect())
    }

    pub fn apply(&self, f: &WaveField) -> Result<WaveField> {
        let s = self.samples(f.grid())?;
        let values = f.values().iter().zip(&s).map(|(z, x)| z * x).collect();
        WaveField::new(f.grid(), values)
    }
}

/// `γₙ` together with the guard measurement taken alongside it.
#[derive(Debug, Clone)]
pub struct HeisenbergSample {
    pub n: usize,
    pub gamma: WaveField,
    /// Max-norm of `(U⁻ⁿUⁿ - 1)ψ₀`.
    pub roundtrip_error: f64,
}

/// Sequential evaluation of `γₙ` for `n = 0..=n_max` with the forward
/// states `Uⁿψ₀` cached.
///
/// Each `γₙ` is obtained from the cached `Uⁿψ₀` by `n` backward steps, so a
/// full sweep costs `n_max` forward and `n_max(n_max+1)/2` backward steps.
#[derive(Debug)]
pub struct HeisenbergRun {
    floquet: Floquet,
    observable: Observable,
    psi0: WaveField,
    n_max: usize,
    forward: Vec<WaveField>,
    forward_steps: usize,
    backward_steps: usize,
}

impl HeisenbergRun {
    /// Run starting from the flat state.
    pub fn new(floquet: Floquet, observable: Observable, n_max: usize) -> Result<Self> {
        let psi0 = flat_state(floquet.grid());
        Self::with_state(floquet, observable, psi0, n_max)
    }

    pub fn with_state(
        floquet: Floquet,
        observable: Observable,
        psi0: WaveField,
        n_max: usize,
    ) -> Result<Self> {
        let grid = floquet.grid();
        grid.check_dim(observable.wavevector().len())?;
        if psi0.grid() != grid {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: psi0.grid().len(),
            });
        }
        Ok(Self {
            floquet,
            observable,
            forward: vec![psi0.clone()],
            psi0,
            n_max,
            forward_steps: 0,
            backward_steps: 0,
        })
    }

    pub fn floquet(&self) -> &Floquet {
        &self.floquet
    }

    pub fn observable(&self) -> &Observable {
        &self.observable
    }

    pub fn initial_state(&self) -> &WaveField {
        &self.psi0
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Forward Floquet steps performed so far.
    pub fn forward_steps(&self) -> usize {
        self.forward_steps
    }

    /// Backward Floquet steps spent on `γₙ` (guard roundtrips excluded).
    pub fn backward_steps(&self) -> usize {
        self.backward_steps
    }

    fn check(&self, n: usize) -> Result<()> {
        if n > self.n_max {
            return Err(Error::StepOutOfRange {
                n,
                n_max: self.n_max,
            });
        }
        Ok(())
    }

    /// `Uⁿψ₀`, extending the cache as needed.
    pub fn forward_state(&mut self, n: usize) -> Result<&WaveField> {
        self.check(n)?;
        while self.forward.len() <= n {
            let next = self.floquet.apply(self.forward.last().expect("ψ₀ cached"));
            self.forward.push(next);
            self.forward_steps += 1;
        }
        Ok(&self.forward[n])
    }

    /// `γₙ = U⁻ⁿ X Uⁿ ψ₀`.
    pub fn gamma(&mut self, n: usize) -> Result<WaveField> {
        let state = self.forward_state(n)?.clone();
        let field = self.observable.apply(&state)?;
        self.backward_steps += n;
        Ok(self.floquet.apply_inverse_n(&field, n))
    }

    /// `γₙ` and the roundtrip error of `ψ₀` at the same `n`, evaluated on
    /// two threads.
    pub fn sample(&mut self, n: usize) -> Result<HeisenbergSample> {
        let state = self.forward_state(n)?.clone();
        let field = self.observable.apply(&state)?;
        let floquet = &self.floquet;
        let psi0 = &self.psi0;
        let (gamma, back) = std::thread::scope(|s| {
            let roundtrip = s.spawn(|| floquet.apply_inverse_n(&state, n));
            let gamma = floquet.apply_inverse_n(&field, n);
            (gamma, roundtrip.join().expect("roundtrip thread panicked"))
        });
        self.backward_steps += n;
        Ok(HeisenbergSample {
            n,
            gamma,
            roundtrip_error: back.max_abs_diff(psi0),
        })
    }

    /// Like [`gamma`](Self::gamma) but fails when the roundtrip error
    /// exceeds `eps`.
    pub fn gamma_guarded(&mut self, n: usize, eps: f64) -> Result<WaveField> {
        let s = self.sample(n)?;
        if s.roundtrip_error > eps {
            return Err(Error::Unitarity {
                n,
                error: s.roundtrip_error,
                eps,
            });
        }
        Ok(s.gamma)
    }
}
