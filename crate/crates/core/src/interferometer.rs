//! Five-region interferometer: split, free flight, mirror, free flight,
//! recombine.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    bloch_eigensystem, position_density_evolution, time_reverse, DensityMovie, DensitySettings, Evolver, Gauge,
    LatticeConfig, MomentumState, PhaseSchedule, PhaseSegment, Propagator, TRUNCATION_LIMIT,
};
use crate::tasks::SPLITTER_TARGET_BAND;

/// Free-flight regions are cut into pieces no longer than this, so the
/// midpoint rule follows the acceleration drift inside them.
pub const MAX_FREE_SEGMENT: f64 = 0.25;

/// Lattice-unit slope `dx/dt` (`k_L⁻¹` per `ω_r⁻¹`) of one recoil velocity.
pub const RECOIL_VELOCITY_SLOPE: f64 = 2.0;

/// One region of the sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    /// A lattice phase schedule, simulated at the run's acceleration.
    Schedule(PhaseSchedule),
    /// A fixed operator lasting `duration`, independent of acceleration.
    Fixed { op: Propagator, duration: f64 },
}

impl Component {
    pub fn duration(&self) -> f64 {
        match self {
            Component::Schedule(s) => s.total_duration(),
            Component::Fixed { duration, .. } => *duration,
        }
    }

    pub fn schedule(&self) -> Option<&PhaseSchedule> {
        match self {
            Component::Schedule(s) => Some(s),
            Component::Fixed { .. } => None,
        }
    }
}

/// How the recombiner's sign is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NegatePolicy {
    /// Try both and keep the larger ground-band return at `a = 0`.
    #[default]
    Calibrate,
    Keep,
    Negate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterferometerSequence {
    pub split: Component,
    pub free1: f64,
    pub mirror: Component,
    pub free2: f64,
    pub recombine: Component,
    /// Sign flag used for the time-reversed recombiner, if it was derived.
    pub negate: Option<bool>,
    /// Ground-band return at `a = 0` for `[keep, negate]`, when calibrated.
    pub calibration: Option<[f64; 2]>,
}

impl InterferometerSequence {
    pub fn regions(&self) -> [RegionRef<'_>; 5] {
        [
            RegionRef::Component(&self.split),
            RegionRef::Free(self.free1),
            RegionRef::Component(&self.mirror),
            RegionRef::Free(self.free2),
            RegionRef::Component(&self.recombine),
        ]
    }

    /// Start of each region followed by the end of the sequence.
    pub fn region_boundaries(&self) -> [f64; 6] {
        let mut out = [0.0; 6];
        for (i, r) in self.regions().iter().enumerate() {
            out[i + 1] = out[i] + r.duration();
        }
        out
    }

    pub fn total_duration(&self) -> f64 {
        self.region_boundaries()[5]
    }

    /// The whole sequence as one phase schedule, if every region is a schedule.
    pub fn as_schedule(&self) -> Option<PhaseSchedule> {
        let mut out = PhaseSchedule::new();
        for r in self.regions() {
            match r {
                RegionRef::Component(c) => out = out.then(c.schedule()?),
                RegionRef::Free(d) => out = out.then(&free_schedule(d)),
            }
        }
        Some(out)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum RegionRef<'a> {
    Component(&'a Component),
    Free(f64),
}

impl RegionRef<'_> {
    pub fn duration(&self) -> f64 {
        match self {
            RegionRef::Component(c) => c.duration(),
            RegionRef::Free(d) => *d,
        }
    }
}

/// `φ ≡ 0` for `duration`, in pieces of at most [`MAX_FREE_SEGMENT`].
pub fn free_schedule(duration: f64) -> PhaseSchedule {
    if duration <= 0.0 {
        return PhaseSchedule::new();
    }
    let pieces = (duration / MAX_FREE_SEGMENT).ceil().max(1.0) as usize;
    let step = duration / pieces as f64;
    PhaseSchedule::from_segments(vec![PhaseSegment::free(step).expect("positive step"); pieces])
}

/// Builds the sequence from learned splitter and mirror schedules. The
/// recombiner is the splitter played backwards.
pub fn assemble(
    split: &PhaseSchedule,
    mirror: &PhaseSchedule,
    free_time: f64,
    negate: NegatePolicy,
    cfg: &LatticeConfig,
) -> Result<InterferometerSequence> {
    if !(free_time.is_finite() && free_time >= 0.0) {
        return Err(Error::invalid(format!("free time {free_time} must be >= 0")));
    }
    let build = |flag: bool| InterferometerSequence {
        split: Component::Schedule(split.clone()),
        free1: free_time,
        mirror: Component::Schedule(mirror.clone()),
        free2: free_time,
        recombine: Component::Schedule(time_reverse(split, flag)),
        negate: Some(flag),
        calibration: None,
    };
    match negate {
        NegatePolicy::Keep => Ok(build(false)),
        NegatePolicy::Negate => Ok(build(true)),
        NegatePolicy::Calibrate => {
            let static_cfg = cfg.with_accel(0.0);
            let keep = ground_return(&build(false), &static_cfg)?;
            let neg = ground_return(&build(true), &static_cfg)?;
            let mut seq = build(neg > keep);
            seq.calibration = Some([keep, neg]);
            Ok(seq)
        }
    }
}

/// `g → b₃`, `b₃ → −g`, identity on the rest, with `g` and `b₃` the ground and
/// third-excited Bloch states.
pub fn ideal_splitter(cfg: &LatticeConfig) -> Result<Propagator> {
    let bands = bloch_eigensystem(&cfg.with_accel(0.0))?;
    let g = bands.band(0).into_amplitudes();
    let b = bands.band(SPLITTER_TARGET_BAND).into_amplitudes();
    let dim = g.len();
    let mut m = DMatrix::<Complex64>::identity(dim, dim);
    m -= &g * g.adjoint() + &b * b.adjoint();
    m += &b * g.adjoint() - &g * b.adjoint();
    Propagator::from_matrix(m)
}

/// Momentum reversal `|n⟩ → |−n⟩` over the whole comb; on the `±4ħk_L`
/// pair it is the mirror target.
pub fn ideal_mirror(n_max: usize) -> Propagator {
    let dim = 2 * n_max + 1;
    let m = DMatrix::from_fn(dim, dim, |i, j| {
        if i + j == dim - 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Propagator::from_matrix(m).expect("square odd matrix")
}

/// Sequence built from [`ideal_splitter`], [`ideal_mirror`] and the
/// splitter's transpose, each taking `component_time`.
pub fn ideal_sequence(cfg: &LatticeConfig, free_time: f64, component_time: f64) -> Result<InterferometerSequence> {
    let s = ideal_splitter(cfg)?;
    Ok(InterferometerSequence {
        recombine: Component::Fixed { op: s.transpose(), duration: component_time },
        split: Component::Fixed { op: s, duration: component_time },
        free1: free_time,
        mirror: Component::Fixed { op: ideal_mirror(cfg.n_max), duration: component_time },
        free2: free_time,
        negate: None,
        calibration: None,
    })
}

/// Final state after the sequence at acceleration `accel`, starting in the
/// ground Bloch state, in the kinetic-drift gauge.
pub fn run_state(seq: &InterferometerSequence, accel: f64, cfg: &LatticeConfig) -> Result<MomentumState> {
    let run_cfg = cfg.with_accel(accel);
    run_cfg.validate()?;
    let mut state = bloch_eigensystem(&cfg.with_accel(0.0))?.band(0);
    let ev = Evolver::new(&run_cfg, Gauge::KineticDrift)?;
    let mut t = 0.0;
    for region in seq.regions() {
        match region {
            RegionRef::Component(Component::Schedule(s)) => state = ev.evolve_state(&state, s, t),
            RegionRef::Component(Component::Fixed { op, .. }) => {
                if op.dim() != state.dim() {
                    return Err(Error::invalid("fixed component has the wrong comb size"));
                }
                state = op.apply(&state);
            }
            RegionRef::Free(d) => state = ev.evolve_state(&state, &free_schedule(d), t),
        }
        t += region.duration();
    }
    let edge = state.edge_population();
    if edge >= TRUNCATION_LIMIT {
        return Err(Error::TruncationAtAccel { accel, max_edge_population: edge });
    }
    Ok(state)
}

/// Momentum populations at the output port.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputDistribution {
    pub probabilities: Vec<f64>,
    pub n_max: usize,
    pub accel: f64,
    pub total_time: f64,
}

impl OutputDistribution {
    pub fn probability(&self, n: i64) -> f64 {
        if n.unsigned_abs() as usize > self.n_max {
            return 0.0;
        }
        self.probabilities[(n + self.n_max as i64) as usize]
    }

    /// `½ Σ |P(n) − Q(n)|`.
    pub fn total_variation(&self, other: &OutputDistribution) -> f64 {
        0.5 * self
            .probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>()
    }

    /// `max_n |P(n) − P(−n)|`.
    pub fn parity_asymmetry(&self) -> f64 {
        let n = self.n_max as i64;
        (1..=n)
            .map(|k| (self.probability(k) - self.probability(-k)).abs())
            .fold(0.0, f64::max)
    }
}

pub fn run(seq: &InterferometerSequence, accel: f64, cfg: &LatticeConfig) -> Result<OutputDistribution> {
    let state = run_state(seq, accel, cfg)?;
    let mut probabilities = state.populations();
    let total: f64 = probabilities.iter().sum();
    for p in &mut probabilities {
        *p /= total;
    }
    Ok(OutputDistribution {
        probabilities,
        n_max: state.n_max(),
        accel,
        total_time: seq.total_duration(),
    })
}

/// Population of the ground Bloch state after the sequence.
pub fn ground_return(seq: &InterferometerSequence, cfg: &LatticeConfig) -> Result<f64> {
    let g = bloch_eigensystem(&cfg.with_accel(0.0))?.band(0);
    Ok(run_state(seq, cfg.accel, cfg)?.fidelity(&g))
}

/// Real-space density through the sequence. Needs every region as a schedule.
pub fn density_movie(seq: &InterferometerSequence, cfg: &LatticeConfig, settings: &DensitySettings) -> Result<DensityMovie> {
    let schedule = seq
        .as_schedule()
        .ok_or_else(|| Error::invalid("density movies need schedule components"))?;
    position_density_evolution(cfg, &schedule, settings)
}

/// Least-squares slopes of the left and right branch centroids over frames
/// with `t0 ≤ t ≤ t1`, in lattice units (divide by
/// [`RECOIL_VELOCITY_SLOPE`] for recoil velocities).
/// Half-width of the centroid window around each branch peak: two envelope
/// widths, so that atoms left behind by an imperfect mirror stay outside.
pub fn branch_window(envelope_width: f64) -> f64 {
    2.0 * envelope_width * std::f64::consts::PI
}

pub fn branch_slopes(movie: &DensityMovie, t0: f64, t1: f64, window: f64) -> Result<(f64, f64)> {
    let mut ts = Vec::new();
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (i, f) in movie.frames.iter().enumerate() {
        if f.t >= t0 && f.t <= t1 {
            let (l, r) = movie.branch_centroids(i, window);
            ts.push(f.t);
            left.push(l);
            right.push(r);
        }
    }
    if ts.len() < 3 {
        return Err(Error::invalid("fewer than three frames in the fit window"));
    }
    Ok((slope(&ts, &left), slope(&ts, &right)))
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
