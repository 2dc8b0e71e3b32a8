//! Real-space density evolution on a finite box by split-step Fourier
//! propagation. Used for the wave-packet pictures of the interferometer;
//! the comb simulation in [`super::evolve`] stays the reference dynamics.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{bloch_eigensystem, LatticeConfig, PhaseSchedule};
use crate::error::{Error, Result};

/// Uniform grid on `[−extent/2, extent/2)` in units of `1/k_L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionGrid {
    pub points: usize,
    pub extent: f64,
}

impl PositionGrid {
    /// `periods` lattice periods (length `π` each) sampled `per_period` times.
    pub fn lattice_periods(periods: usize, per_period: usize) -> Self {
        PositionGrid {
            points: periods * per_period,
            extent: periods as f64 * PI,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.points as f64
    }

    pub fn positions(&self) -> Vec<f64> {
        let dx = self.spacing();
        (0..self.points)
            .map(|i| -0.5 * self.extent + i as f64 * dx)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityFrame {
    pub t: f64,
    /// `|ψ(x, t)|²` per grid point.
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMovie {
    pub grid: PositionGrid,
    pub frames: Vec<DensityFrame>,
}

impl DensityMovie {
    pub fn positions(&self) -> Vec<f64> {
        self.grid.positions()
    }

    /// `Σ|ψ|² dx` of every frame.
    pub fn norms(&self) -> Vec<f64> {
        let dx = self.grid.spacing();
        self.frames
            .iter()
            .map(|f| f.density.iter().sum::<f64>() * dx)
            .collect()
    }

    pub fn centroid(&self, frame: usize) -> f64 {
        let x = self.positions();
        let f = &self.frames[frame].density;
        let mass: f64 = f.iter().sum();
        f.iter().zip(&x).map(|(d, x)| d * x).sum::<f64>() / mass
    }

    /// Centroids of the dominant wave packet on each side of `x = 0`, as
    /// `(left, right)`. The density is averaged over one lattice period and
    /// only the window of half-width `window` around each side's maximum
    /// contributes, so slow residual populations near the origin do not
    /// drag the estimate.
    pub fn branch_centroids(&self, frame: usize, window: f64) -> (f64, f64) {
        let x = self.positions();
        let dx = self.grid.spacing();
        let smooth = period_average(&self.frames[frame].density, (PI / dx).round() as usize);
        let side = |pick: &dyn Fn(f64) -> bool| -> f64 {
            let peak = x
                .iter()
                .zip(&smooth)
                .filter(|(x, _)| pick(**x))
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(x, _)| *x)
                .unwrap_or(0.0);
            let (mut mass, mut first) = (0.0, 0.0);
            for (xi, d) in x.iter().zip(&smooth) {
                if pick(*xi) && (xi - peak).abs() <= window {
                    mass += d;
                    first += d * xi;
                }
            }
            if mass > 0.0 {
                first / mass
            } else {
                peak
            }
        };
        (side(&|x| x < 0.0), side(&|x| x >= 0.0))
    }
}

fn period_average(density: &[f64], width: usize) -> Vec<f64> {
    let width = width.max(1);
    let n = density.len();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + density[i];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(width / 2);
            let hi = (i + width - width / 2).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Parameters for [`position_density_evolution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensitySettings {
    /// Standard deviation of the initial density envelope, in lattice sites.
    pub envelope_width: f64,
    pub grid: PositionGrid,
    /// Split-step time step (shortened per segment to divide it evenly).
    pub time_step: f64,
    /// Record every `sample_stride`-th step.
    pub sample_stride: usize,
}

impl Default for DensitySettings {
    fn default() -> Self {
        DensitySettings {
            envelope_width: 4.0,
            grid: PositionGrid::lattice_periods(512, 16),
            time_step: 2e-3,
            sample_stride: 50,
        }
    }
}

const EDGE_FRACTION: usize = 64;
const EDGE_LIMIT: f64 = 1e-4;
const INITIAL_EDGE_LIMIT: f64 = 1e-8;

/// Evolves the ground Bloch state times a Gaussian envelope through
/// `sequence`, alternating kinetic half-steps in momentum space with
/// potential steps in position space.
pub fn position_density_evolution(
    cfg: &LatticeConfig,
    sequence: &PhaseSchedule,
    settings: &DensitySettings,
) -> Result<DensityMovie> {
    let grid = settings.grid;
    if grid.points < 16 || !(grid.extent > 0.0) {
        return Err(Error::invalid("position grid is empty"));
    }
    if grid.spacing() > PI / 16.0 + 1e-12 {
        return Err(Error::invalid(format!(
            "grid spacing {} does not resolve 16 points per lattice period",
            grid.spacing()
        )));
    }
    if !(settings.envelope_width > 0.0) || !(settings.time_step > 0.0) || settings.sample_stride == 0 {
        return Err(Error::invalid("envelope width, time step and stride must be positive"));
    }

    let n = grid.points;
    let dx = grid.spacing();
    let x = grid.positions();
    let bloch = bloch_eigensystem(&LatticeConfig { accel: 0.0, ..*cfg })?.band(0);
    let sigma = settings.envelope_width * PI;
    let mut psi: Vec<Complex64> = x
        .iter()
        .map(|&xi| {
            let mut b = Complex64::new(0.0, 0.0);
            for m in -(cfg.n_max as i64)..=(cfg.n_max as i64) {
                b += bloch.amplitude(m) * Complex64::from_polar(1.0, 2.0 * m as f64 * xi);
            }
            b * (-xi * xi / (4.0 * sigma * sigma)).exp()
        })
        .collect();
    let norm = (psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * dx).sqrt();
    for c in &mut psi {
        *c /= norm;
    }
    let edge = edge_mass(&psi, dx);
    if edge > INITIAL_EDGE_LIMIT {
        return Err(Error::invalid(format!(
            "initial envelope does not fit the box (edge mass {edge:.3e})"
        )));
    }

    let mut planner = FftPlanner::<f64>::new();
    let fwd: Arc<dyn Fft<f64>> = planner.plan_fft_forward(n);
    let inv: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(n);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];
    let k: Vec<f64> = (0..n)
        .map(|i| {
            let j = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
            2.0 * PI * j / grid.extent
        })
        .collect();
    let (cos2x, sin2x): (Vec<f64>, Vec<f64>) = x.iter().map(|xi| ((2.0 * xi).cos(), (2.0 * xi).sin())).unzip();
    let half_depth = 0.5 * cfg.depth;

    let mut frames = vec![DensityFrame {
        t: 0.0,
        density: psi.iter().map(|c| c.norm_sqr()).collect(),
    }];
    let mut t = 0.0;
    let mut step_count = 0usize;
    let mut kinetic = vec![Complex64::new(0.0, 0.0); n];
    let fill_kinetic = |kinetic: &mut [Complex64], t: f64, dt: f64| {
        let drift = cfg.accel * t;
        for (kp, ki) in kinetic.iter_mut().zip(&k) {
            let p = ki - drift;
            *kp = Complex64::from_polar(1.0 / n as f64, -p * p * 0.5 * dt);
        }
    };
    for seg in sequence.segments() {
        let steps = (seg.duration() / settings.time_step).ceil().max(1.0) as usize;
        let dt = seg.duration() / steps as f64;
        for s in 0..steps {
            let local = (s as f64 + 0.5) * dt;
            let phase = seg.phase_at(local);
            let t_mid = t + 0.5 * dt;
            // Half kinetic step, evaluated at the midpoint of the half step.
            fill_kinetic(&mut kinetic, t + 0.25 * dt, dt);
            fwd.process_with_scratch(&mut psi, &mut scratch);
            for (c, kp) in psi.iter_mut().zip(&kinetic) {
                *c *= kp;
            }
            inv.process_with_scratch(&mut psi, &mut scratch);
            let (cp, sp) = (phase.cos(), phase.sin());
            for i in 0..n {
                let v = -half_depth * (cos2x[i] * cp - sin2x[i] * sp);
                psi[i] *= Complex64::from_polar(1.0, -v * dt);
            }
            fill_kinetic(&mut kinetic, t_mid + 0.25 * dt, dt);
            fwd.process_with_scratch(&mut psi, &mut scratch);
            for (c, kp) in psi.iter_mut().zip(&kinetic) {
                *c *= kp;
            }
            inv.process_with_scratch(&mut psi, &mut scratch);

            t += dt;
            step_count += 1;
            let edge = edge_mass(&psi, dx);
            if edge > EDGE_LIMIT {
                return Err(Error::BoxOverflow { edge_density: edge });
            }
            if step_count % settings.sample_stride == 0 {
                frames.push(DensityFrame {
                    t,
                    density: psi.iter().map(|c| c.norm_sqr()).collect(),
                });
            }
        }
    }
    if step_count % settings.sample_stride != 0 {
        frames.push(DensityFrame {
            t,
            density: psi.iter().map(|c| c.norm_sqr()).collect(),
        });
    }
    Ok(DensityMovie { grid, frames })
}

/// Probability in the outermost `1/64` of the box on either side.
fn edge_mass(psi: &[Complex64], dx: f64) -> f64 {
    let w = (psi.len() / EDGE_FRACTION).max(1);
    let left: f64 = psi[..w].iter().map(|c| c.norm_sqr()).sum();
    let right: f64 = psi[psi.len() - w..].iter().map(|c| c.norm_sqr()).sum();
    left.max(right) * dx
}
