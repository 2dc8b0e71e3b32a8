//! Piecewise-constant time stepping of states and propagators.
//!
//! Every segment is cut into `substeps_per_segment` pieces and each piece
//! applies `exp(−i H(φ_mid, t_mid) Δt)`. When the Hamiltonian cannot change
//! inside a segment (constant phase, static kinetic term) the pieces are
//! merged into one exact exponential.
//!
//! The phase enters only through `H(φ) = D_φ H₀ D_φ†` with
//! `D_φ = diag(e^{inφ})` and `H₀` real symmetric tridiagonal, so all
//! exponentials are taken of `H₀`: by eigendecomposition when `H₀` is static
//! (cached once) or for dense propagators, and by a Chebyshev expansion when
//! a single state is pushed through a drifting kinetic term.

use num_complex::Complex64;

use super::{LatticeConfig, MomentumState, PhaseSchedule, Propagator, RealEigen, TRUNCATION_LIMIT};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Gauge {
    /// Diagonal `(2n − a·t)²`, phase `φ`.
    KineticDrift,
    /// Diagonal `(2n)²`, phase `φ − 2a·t²`.
    LatticeFrame,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Substep {
    pub phase: f64,
    pub t: f64,
    pub dt: f64,
}

/// Stepping engine for one lattice configuration and gauge.
#[derive(Debug, Clone)]
pub(crate) struct Evolver {
    cfg: LatticeConfig,
    gauge: Gauge,
    static_eig: Option<RealEigen>,
}

impl Evolver {
    pub fn new(cfg: &LatticeConfig, gauge: Gauge) -> Result<Self> {
        cfg.validate()?;
        let drifting = gauge == Gauge::KineticDrift && cfg.accel != 0.0;
        let static_eig = if drifting {
            None
        } else {
            let zero = LatticeConfig { accel: 0.0, ..*cfg };
            Some(RealEigen::of_tridiagonal(&zero.kinetic_diagonal(0.0), cfg.coupling()))
        };
        Ok(Evolver {
            cfg: *cfg,
            gauge,
            static_eig,
        })
    }

    fn hamiltonian_is_static(&self) -> bool {
        self.cfg.accel == 0.0
    }

    pub fn substeps(&self, schedule: &PhaseSchedule, t_start: f64) -> Vec<Substep> {
        let mut out = Vec::new();
        let mut seg_start = t_start;
        let n = self.cfg.substeps_per_segment;
        for seg in schedule.segments() {
            let dur = seg.duration();
            if seg.is_constant() && self.hamiltonian_is_static() {
                out.push(self.substep(seg.phase_at(0.0), seg_start + 0.5 * dur, dur));
            } else {
                let dt = dur / n as f64;
                for k in 0..n {
                    let local = (k as f64 + 0.5) * dt;
                    out.push(self.substep(seg.phase_at(local), seg_start + local, dt));
                }
            }
            seg_start += dur;
        }
        out
    }

    fn substep(&self, phase: f64, t: f64, dt: f64) -> Substep {
        let phase = match self.gauge {
            Gauge::KineticDrift => phase,
            Gauge::LatticeFrame => phase - 2.0 * self.cfg.accel * t * t,
        };
        Substep { phase, t, dt }
    }

    fn gauge_factors(&self, phase: f64) -> Vec<Complex64> {
        (0..self.cfg.dim())
            .map(|i| Complex64::from_polar(1.0, self.cfg.comb(i) as f64 * phase))
            .collect()
    }

    fn eigen_at(&self, t: f64) -> std::borrow::Cow<'_, RealEigen> {
        match &self.static_eig {
            Some(e) => std::borrow::Cow::Borrowed(e),
            None => std::borrow::Cow::Owned(RealEigen::of_tridiagonal(
                &self.cfg.kinetic_diagonal(t),
                self.cfg.coupling(),
            )),
        }
    }

    /// Applies one substep to every column of `cols` (column-major, length
    /// a multiple of the comb dimension).
    pub fn apply_dense(&self, step: Substep, cols: &mut [Complex64]) {
        let eig = self.eigen_at(step.t);
        let gauge = self.gauge_factors(step.phase);
        let rot: Vec<Complex64> = eig
            .values
            .iter()
            .map(|&l| Complex64::from_polar(1.0, -l * step.dt))
            .collect();
        let dim = self.cfg.dim();
        let v = eig.vectors.as_slice();
        let mut w = vec![ZERO; dim];
        for col in cols.chunks_exact_mut(dim) {
            for (c, g) in col.iter_mut().zip(&gauge) {
                *c *= g.conj();
            }
            for k in 0..dim {
                let vk = &v[k * dim..(k + 1) * dim];
                let mut acc = ZERO;
                for (x, c) in vk.iter().zip(col.iter()) {
                    acc += c * *x;
                }
                w[k] = acc * rot[k];
            }
            col.fill(ZERO);
            for k in 0..dim {
                let vk = &v[k * dim..(k + 1) * dim];
                let wk = w[k];
                for (c, x) in col.iter_mut().zip(vk) {
                    *c += wk * *x;
                }
            }
            for (c, g) in col.iter_mut().zip(&gauge) {
                *c *= g;
            }
        }
    }

    /// Applies one substep to a single state.
    pub fn apply_state(&self, step: Substep, amps: &mut [Complex64]) {
        if self.static_eig.is_some() {
            self.apply_dense(step, amps);
            return;
        }
        let gauge = self.gauge_factors(step.phase);
        for (c, g) in amps.iter_mut().zip(&gauge) {
            *c *= g.conj();
        }
        chebyshev_apply(&self.cfg.kinetic_diagonal(step.t), self.cfg.coupling(), step.dt, amps);
        for (c, g) in amps.iter_mut().zip(&gauge) {
            *c *= g;
        }
    }

    pub fn evolve_state(&self, state: &MomentumState, schedule: &PhaseSchedule, t_start: f64) -> MomentumState {
        let mut out = state.clone();
        let amps = out.amplitudes_mut().as_mut_slice();
        for step in self.substeps(schedule, t_start) {
            self.apply_state(step, amps);
        }
        out
    }

    pub fn evolve_propagator(&self, schedule: &PhaseSchedule, t_start: f64) -> Propagator {
        let mut u = Propagator::identity(self.cfg.n_max);
        let cols = u.matrix_mut().as_mut_slice();
        for step in self.substeps(schedule, t_start) {
            self.apply_dense(step, cols);
        }
        u
    }
}

/// `y ← exp(−i H dt) y` for the real symmetric tridiagonal `H` with the given
/// diagonal and constant off-diagonal, by Chebyshev expansion.
pub(crate) fn chebyshev_apply(diag: &[f64], off: f64, dt: f64, y: &mut [Complex64]) {
    if dt == 0.0 {
        return;
    }
    let (dmin, dmax) = diag
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let lo = dmin - 2.0 * off.abs();
    let hi = dmax + 2.0 * off.abs();
    let center = 0.5 * (hi + lo);
    let half = (0.5 * (hi - lo)).max(1e-300);
    let coeffs = bessel_series(half * dt);

    let dim = y.len();
    let scaled = |src: &[Complex64], dst: &mut [Complex64]| {
        for i in 0..dim {
            let mut acc = (diag[i] - center) * src[i];
            if i > 0 {
                acc += off * src[i - 1];
            }
            if i + 1 < dim {
                acc += off * src[i + 1];
            }
            dst[i] = acc / half;
        }
    };

    let mut prev = y.to_vec();
    let mut cur = vec![ZERO; dim];
    let mut next = vec![ZERO; dim];
    scaled(&prev, &mut cur);
    let mut acc: Vec<Complex64> = prev.iter().map(|c| c * coeffs[0]).collect();
    // (−i)^k cycles through 1, −i, −1, i.
    let powers = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
    ];
    if coeffs.len() > 1 {
        let f = powers[1] * (2.0 * coeffs[1]);
        for (a, c) in acc.iter_mut().zip(&cur) {
            *a += f * c;
        }
    }
    for (k, &jk) in coeffs.iter().enumerate().skip(2) {
        scaled(&cur, &mut next);
        for i in 0..dim {
            next[i] = 2.0 * next[i] - prev[i];
        }
        let f = powers[k % 4] * (2.0 * jk);
        for (a, c) in acc.iter_mut().zip(&next) {
            *a += f * c;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    let global = Complex64::from_polar(1.0, -center * dt);
    for (dst, a) in y.iter_mut().zip(acc) {
        *dst = global * a;
    }
}

/// Bessel functions `J_0(x) … J_K(x)` by Miller's backward recurrence,
/// truncated once the terms drop below `1e-18` past `k = x`.
pub(crate) fn bessel_series(x: f64) -> Vec<f64> {
    if x == 0.0 {
        return vec![1.0];
    }
    let needed = (x + 10.0 * x.cbrt() + 30.0).ceil() as usize;
    let start = needed + 20 + (needed % 2);
    let mut j = vec![0.0f64; start + 2];
    j[start] = 1e-280;
    for k in (1..=start).rev() {
        j[k - 1] = (2.0 * k as f64 / x) * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in &mut j[k - 1..] {
                *v *= 1e-250;
            }
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    for v in &mut j {
        *v /= norm;
    }
    let mut last = needed.min(start);
    while last > 0 && (last as f64) > x && j[last].abs() < 1e-18 {
        last -= 1;
    }
    j.truncate(last + 2);
    j
}

fn check_state(state: &MomentumState, cfg: &LatticeConfig) -> Result<()> {
    if state.dim() != cfg.dim() {
        return Err(Error::invalid(format!(
            "state dimension {} does not match comb dimension {}",
            state.dim(),
            cfg.dim()
        )));
    }
    let norm = state.norm_sqr();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::invalid(format!("state norm {norm} is not 1")));
    }
    Ok(())
}

fn healthy(state: MomentumState) -> Result<MomentumState> {
    let edge = state.edge_population();
    if edge >= TRUNCATION_LIMIT {
        return Err(Error::Truncation {
            max_edge_population: edge,
        });
    }
    Ok(state)
}

/// Evolves `state` through `schedule` starting at `t = 0`.
pub fn propagate(state: &MomentumState, schedule: &PhaseSchedule, cfg: &LatticeConfig) -> Result<MomentumState> {
    propagate_from(state, schedule, cfg, 0.0)
}

/// As [`propagate`], with the schedule starting at `t_start` on the global
/// clock (the acceleration drift depends on absolute time).
pub fn propagate_from(
    state: &MomentumState,
    schedule: &PhaseSchedule,
    cfg: &LatticeConfig,
    t_start: f64,
) -> Result<MomentumState> {
    check_state(state, cfg)?;
    let ev = Evolver::new(cfg, Gauge::KineticDrift)?;
    healthy(ev.evolve_state(state, schedule, t_start))
}

/// Evolution in the lattice-comoving gauge. Momentum populations agree with
/// [`propagate`]; amplitudes differ by a diagonal phase when `a ≠ 0`.
pub fn propagate_lattice_frame(
    state: &MomentumState,
    schedule: &PhaseSchedule,
    cfg: &LatticeConfig,
) -> Result<MomentumState> {
    check_state(state, cfg)?;
    let ev = Evolver::new(cfg, Gauge::LatticeFrame)?;
    healthy(ev.evolve_state(state, schedule, 0.0))
}

/// Dense evolution operator of `schedule` starting at `t = 0`.
pub fn propagator(schedule: &PhaseSchedule, cfg: &LatticeConfig) -> Result<Propagator> {
    propagator_from(schedule, cfg, 0.0)
}

pub fn propagator_from(schedule: &PhaseSchedule, cfg: &LatticeConfig, t_start: f64) -> Result<Propagator> {
    let ev = Evolver::new(cfg, Gauge::KineticDrift)?;
    let u = ev.evolve_propagator(schedule, t_start);
    let edge = u.edge_population();
    if edge >= TRUNCATION_LIMIT {
        return Err(Error::Truncation {
            max_edge_population: edge,
        });
    }
    Ok(u)
}
