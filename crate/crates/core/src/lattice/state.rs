use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex amplitudes `c_n` on the momentum comb `n ∈ [−n_max, n_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    amps: DVector<Complex64>,
    n_max: usize,
}

impl MomentumState {
    /// Plane wave `|2nħk_L⟩`.
    pub fn basis(n: i64, n_max: usize) -> Self {
        assert!(n.unsigned_abs() as usize <= n_max, "comb index {n} outside ±{n_max}");
        let mut amps = DVector::zeros(2 * n_max + 1);
        amps[(n + n_max as i64) as usize] = Complex64::new(1.0, 0.0);
        MomentumState { amps, n_max }
    }

    pub fn from_amplitudes(amps: DVector<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if dim % 2 == 0 {
            return Err(Error::invalid(format!("comb dimension {dim} must be odd")));
        }
        Ok(MomentumState {
            amps,
            n_max: dim / 2,
        })
    }

    pub(crate) fn from_real(values: Vec<f64>, n_max: usize) -> Self {
        debug_assert_eq!(values.len(), 2 * n_max + 1);
        MomentumState {
            amps: DVector::from_iterator(values.len(), values.into_iter().map(|x| Complex64::new(x, 0.0))),
            n_max,
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut DVector<Complex64> {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> DVector<Complex64> {
        self.amps
    }

    /// Amplitude of comb index `n`, zero outside the basis.
    pub fn amplitude(&self, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.n_max {
            return Complex64::new(0.0, 0.0);
        }
        self.amps[(n + self.n_max as i64) as usize]
    }

    pub fn population(&self, n: i64) -> f64 {
        self.amplitude(n).norm_sqr()
    }

    /// `|c_n|²` in ascending `n`.
    pub fn populations(&self) -> Vec<f64> {
        self.amps.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn normalized(mut self) -> Self {
        let norm = self.norm_sqr().sqrt();
        self.amps.unscale_mut(norm);
        self
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &MomentumState) -> Complex64 {
        assert_eq!(self.dim(), other.dim(), "comb dimensions differ");
        self.amps.dotc(&other.amps)
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &MomentumState) -> f64 {
        self.overlap(other).norm_sqr()
    }

    /// Larger of the two edge populations `|c_{±n_max}|²`.
    pub fn edge_population(&self) -> f64 {
        let last = self.dim() - 1;
        self.amps[0].norm_sqr().max(self.amps[last].norm_sqr())
    }

    pub fn max_abs_diff(&self, other: &MomentumState) -> f64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Dense evolution operator on the comb.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    matrix: DMatrix<Complex64>,
    n_max: usize,
}

impl Propagator {
    pub fn identity(n_max: usize) -> Self {
        let dim = 2 * n_max + 1;
        Propagator {
            matrix: DMatrix::identity(dim, dim),
            n_max,
        }
    }

    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim != matrix.ncols() || dim % 2 == 0 {
            return Err(Error::invalid(format!(
                "propagator must be square with odd dimension, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Propagator {
            matrix,
            n_max: dim / 2,
        })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut DMatrix<Complex64> {
        &mut self.matrix
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `⟨2nħk_L| U |2mħk_L⟩`.
    pub fn element(&self, n: i64, m: i64) -> Complex64 {
        let off = self.n_max as i64;
        self.matrix[((n + off) as usize, (m + off) as usize)]
    }

    pub fn apply(&self, state: &MomentumState) -> MomentumState {
        assert_eq!(self.dim(), state.dim(), "comb dimensions differ");
        MomentumState {
            amps: &self.matrix * state.amplitudes(),
            n_max: self.n_max,
        }
    }

    /// `next · self`: this evolution followed by `next`.
    pub fn then(&self, next: &Propagator) -> Propagator {
        Propagator {
            matrix: &next.matrix * &self.matrix,
            n_max: self.n_max,
        }
    }

    pub fn transpose(&self) -> Propagator {
        Propagator {
            matrix: self.matrix.transpose(),
            n_max: self.n_max,
        }
    }

    /// `‖U†U − I‖_max`.
    pub fn unitarity_error(&self) -> f64 {
        let g = self.matrix.adjoint() * &self.matrix;
        let dim = self.dim();
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// Largest edge population reached from any source column with
    /// `|m| ≤ n_max/2`, the region a physical state occupies.
    pub fn edge_population(&self) -> f64 {
        let dim = self.dim();
        let reach = self.n_max / 2;
        let mut worst = 0.0f64;
        for j in (self.n_max - reach)..=(self.n_max + reach) {
            worst = worst
                .max(self.matrix[(0, j)].norm_sqr())
                .max(self.matrix[(dim - 1, j)].norm_sqr());
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Propagator) -> f64 {
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}
