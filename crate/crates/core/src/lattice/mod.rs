//! Single atom in a one-dimensional shaken optical lattice.
//!
//! The Hamiltonian is `p²/2m − (V₀/2)·cos(2k_L x + φ(t))`. At zero
//! quasimomentum the lattice only couples the momentum comb `{2nħk_L}`, so
//! states live on the truncated basis `n ∈ [−n_max, n_max]` (dimension
//! `D = 2·n_max + 1`, stored in ascending `n`).
//!
//! # Units
//!
//! Every public quantity is expressed in recoil units:
//!
//! * energy: `E_r = ħ²k_L²/2m`
//! * time: `1/ω_r` with `ω_r = E_r/ħ`
//! * velocity: `v_r = ħk_L/m`
//! * acceleration: `ω_r·v_r`
//! * momentum: `ħk_L` (comb index `n` sits at `2n ħk_L`)
//! * position: `1/k_L` (one lattice period is `π`)
//!
//! In these units the Schrödinger equation reads `i dψ/dt = H ψ` and the
//! kinetic energy of comb index `n` is `(2n)²`.
//!
//! A uniform acceleration `a` enters through the kinetic-drift gauge: the
//! diagonal becomes `(2n − a·t)²`, which keeps the comb closed. The
//! equivalent lattice-frame gauge (diagonal `(2n)²`, phase `φ − 2a·t²`) is
//! available through [`propagate_lattice_frame`] as a cross-check.

mod density;
mod evolve;
mod schedule;
mod state;

pub use density::{position_density_evolution, DensityFrame, DensityMovie, DensitySettings, PositionGrid};
pub use evolve::{propagate, propagate_from, propagate_lattice_frame, propagator, propagator_from};
pub use schedule::{
    time_reverse, PhaseSchedule, PhaseSegment, SegmentKind, HALF_CYCLE, MIRROR_DRIVE_FREQUENCY,
};
pub use state::{MomentumState, Propagator};

pub(crate) use evolve::{Evolver, Gauge};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Edge population above which the momentum comb is considered truncated.
pub const TRUNCATION_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LatticeConfig {
    /// Lattice depth `V₀` in `E_r`.
    pub depth: f64,
    /// Half-width of the momentum comb.
    pub n_max: usize,
    /// Midpoint substeps per schedule segment.
    pub substeps_per_segment: usize,
    /// Uniform acceleration in `ω_r·v_r`.
    pub accel: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig {
            depth: 10.0,
            n_max: 16,
            substeps_per_segment: 32,
            accel: 0.0,
        }
    }
}

impl LatticeConfig {
    pub fn with_accel(mut self, accel: f64) -> Self {
        self.accel = accel;
        self
    }

    pub fn with_depth(mut self, depth: f64) -> Self {
        self.depth = depth;
        self
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps_per_segment = substeps;
        self
    }

    /// Checks the documented ranges. A zero depth is accepted for
    /// free-particle checks; negative depths are not.
    pub fn validate(&self) -> Result<()> {
        if !self.depth.is_finite() || self.depth < 0.0 {
            return Err(Error::invalid(format!("lattice depth {} must be >= 0", self.depth)));
        }
        if self.n_max < 8 {
            return Err(Error::invalid(format!("n_max {} must be >= 8", self.n_max)));
        }
        if self.substeps_per_segment == 0 {
            return Err(Error::invalid("substeps_per_segment must be >= 1"));
        }
        if !self.accel.is_finite() {
            return Err(Error::invalid("acceleration must be finite"));
        }
        Ok(())
    }

    /// Basis dimension `2·n_max + 1`.
    pub fn dim(&self) -> usize {
        2 * self.n_max + 1
    }

    /// Storage index of comb index `n`.
    pub fn index(&self, n: i64) -> usize {
        debug_assert!(n.unsigned_abs() as usize <= self.n_max);
        (n + self.n_max as i64) as usize
    }

    /// Comb index stored at `idx`.
    pub fn comb(&self, idx: usize) -> i64 {
        idx as i64 - self.n_max as i64
    }

    /// Nearest-neighbour matrix element `⟨n+1|H|n⟩` at zero phase.
    pub(crate) fn coupling(&self) -> f64 {
        -self.depth / 4.0
    }

    /// Kinetic diagonal `(2n − a·t)²` of the kinetic-drift gauge.
    pub(crate) fn kinetic_diagonal(&self, t: f64) -> Vec<f64> {
        let drift = self.accel * t;
        (0..self.dim())
            .map(|i| {
                let p = 2.0 * self.comb(i) as f64 - drift;
                p * p
            })
            .collect()
    }
}

/// Dense Hamiltonian at phase `phase` and time `t` in the kinetic-drift gauge.
pub fn build_hamiltonian(phase: f64, t: f64, cfg: &LatticeConfig) -> Result<DMatrix<Complex64>> {
    if !phase.is_finite() || !t.is_finite() {
        return Err(Error::invalid(format!("non-finite phase {phase} or time {t}")));
    }
    if t < 0.0 {
        return Err(Error::invalid(format!("time {t} must be >= 0")));
    }
    cfg.validate()?;
    let dim = cfg.dim();
    let diag = cfg.kinetic_diagonal(t);
    let up = Complex64::from_polar(cfg.coupling(), phase);
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..dim {
        h[(i, i)] = Complex64::new(diag[i], 0.0);
        if i + 1 < dim {
            h[(i + 1, i)] = up;
            h[(i, i + 1)] = up.conj();
        }
    }
    Ok(h)
}

/// Eigenvalues (ascending) and eigenvectors of the q = 0 Bloch Hamiltonian.
#[derive(Debug, Clone)]
pub struct BlochSpectrum {
    pub energies: Vec<f64>,
    /// Column `b` holds band `b` on the comb basis.
    pub vectors: DMatrix<f64>,
    pub n_max: usize,
}

impl BlochSpectrum {
    pub fn band(&self, b: usize) -> MomentumState {
        MomentumState::from_real(self.vectors.column(b).iter().copied().collect(), self.n_max)
    }

    pub fn num_bands(&self) -> usize {
        self.energies.len()
    }
}

/// Diagonalises the static (`φ = 0`) lattice Hamiltonian at zero quasimomentum.
///
/// Each eigenvector is real; its sign is fixed so that the largest-magnitude
/// component (lowest `n` among ties) is positive.
pub fn bloch_eigensystem(cfg: &LatticeConfig) -> Result<BlochSpectrum> {
    cfg.validate()?;
    if cfg.accel != 0.0 {
        return Err(Error::invalid("Bloch states are defined at zero acceleration"));
    }
    let eig = RealEigen::of_tridiagonal(&cfg.kinetic_diagonal(0.0), cfg.coupling());
    let dim = cfg.dim();
    let mut vectors = eig.vectors;
    for b in 0..dim {
        let mut col = vectors.column_mut(b);
        let max = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let lead = col
            .iter()
            .position(|x| x.abs() >= max * (1.0 - 1e-9))
            .unwrap_or(0);
        if col[lead] < 0.0 {
            col.neg_mut();
        }
    }
    Ok(BlochSpectrum {
        energies: eig.values,
        vectors,
        n_max: cfg.n_max,
    })
}

/// Ascending eigendecomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub(crate) struct RealEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl RealEigen {
    pub fn of_tridiagonal(diag: &[f64], off: f64) -> Self {
        let dim = diag.len();
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = diag[i];
            if i + 1 < dim {
                m[(i + 1, i)] = off;
                m[(i, i + 1)] = off;
            }
        }
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut vectors = DMatrix::<f64>::zeros(dim, dim);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        RealEigen { values, vectors }
    }
}
