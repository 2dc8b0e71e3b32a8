use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Angular frequency of the sinusoidal mirror drive, `12 ω_r`: the kinetic
/// energy gap between `|4ħk_L⟩` and `|2ħk_L⟩`.
pub const MIRROR_DRIVE_FREQUENCY: f64 = 12.0;

/// Duration of one half-cycle of the mirror drive, `π/12 ω_r⁻¹`.
pub const HALF_CYCLE: f64 = PI / MIRROR_DRIVE_FREQUENCY;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentKind {
    /// `φ(t) = phase` for the whole segment.
    Constant { phase: f64 },
    /// `φ(t) = amplitude · sin(12 (start + t))`, `t` measured from the
    /// segment start. Lasts exactly one half-cycle.
    HalfCycle { amplitude: f64, start: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSegment {
    kind: SegmentKind,
    duration: f64,
}

impl PhaseSegment {
    pub fn constant(phase: f64, duration: f64) -> Result<Self> {
        if !phase.is_finite() {
            return Err(Error::invalid(format!("phase {phase} is not finite")));
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::invalid(format!("segment duration {duration} must be > 0")));
        }
        Ok(PhaseSegment {
            kind: SegmentKind::Constant { phase },
            duration,
        })
    }

    /// Lattice held still (`φ ≡ 0`).
    pub fn free(duration: f64) -> Result<Self> {
        Self::constant(0.0, duration)
    }

    pub fn half_cycle(amplitude: f64, start: f64) -> Result<Self> {
        if !amplitude.is_finite() || !start.is_finite() {
            return Err(Error::invalid("half-cycle amplitude and start must be finite"));
        }
        Ok(PhaseSegment {
            kind: SegmentKind::HalfCycle { amplitude, start },
            duration: HALF_CYCLE,
        })
    }

    pub fn kind(&self) -> SegmentKind {
        self.kind
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Phase at time `t` after the segment start.
    pub fn phase_at(&self, t: f64) -> f64 {
        match self.kind {
            SegmentKind::Constant { phase } => phase,
            SegmentKind::HalfCycle { amplitude, start } => {
                amplitude * (MIRROR_DRIVE_FREQUENCY * (start + t)).sin()
            }
        }
    }

    /// Whether `φ` is constant over the segment.
    pub fn is_constant(&self) -> bool {
        matches!(self.kind, SegmentKind::Constant { .. })
    }

    /// The segment played backwards, `φ'(t) = ±φ(duration − t)`.
    ///
    /// A half-cycle is symmetric about its midpoint up to a shift of the
    /// sinusoid, so reversing it only flips the sign of `start`.
    fn reversed(&self, negate: bool) -> Self {
        let sign = if negate { -1.0 } else { 1.0 };
        let kind = match self.kind {
            SegmentKind::Constant { phase } => SegmentKind::Constant { phase: sign * phase },
            SegmentKind::HalfCycle { amplitude, start } => SegmentKind::HalfCycle {
                amplitude: sign * amplitude,
                start: -start,
            },
        };
        PhaseSegment {
            kind,
            duration: self.duration,
        }
    }
}

/// Piecewise description of the lattice phase `φ(t)` on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhaseSchedule {
    segments: Vec<PhaseSegment>,
}

impl PhaseSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_segments(segments: Vec<PhaseSegment>) -> Self {
        PhaseSchedule { segments }
    }

    /// Constant phases, each held for `step`.
    pub fn piecewise_constant(phases: &[f64], step: f64) -> Result<Self> {
        phases
            .iter()
            .map(|&p| PhaseSegment::constant(p, step))
            .collect::<Result<Vec<_>>>()
            .map(Self::from_segments)
    }

    /// Consecutive half-cycles of `A_k sin(12 t)` with the given amplitudes,
    /// starting at `t = 0`.
    pub fn sinusoid(amplitudes: &[f64]) -> Result<Self> {
        amplitudes
            .iter()
            .enumerate()
            .map(|(k, &a)| PhaseSegment::half_cycle(a, k as f64 * HALF_CYCLE))
            .collect::<Result<Vec<_>>>()
            .map(Self::from_segments)
    }

    pub fn free(duration: f64) -> Result<Self> {
        Ok(Self::from_segments(vec![PhaseSegment::free(duration)?]))
    }

    pub fn push(&mut self, segment: PhaseSegment) {
        self.segments.push(segment);
    }

    pub fn segments(&self) -> &[PhaseSegment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// This schedule followed by `next`.
    pub fn then(&self, next: &PhaseSchedule) -> PhaseSchedule {
        let mut segments = self.segments.clone();
        segments.extend_from_slice(&next.segments);
        PhaseSchedule { segments }
    }

    /// `φ(t)`. Segment boundaries belong to the later segment, except `t = T`.
    pub fn phase_at(&self, t: f64) -> Option<f64> {
        if !(t >= 0.0) {
            return None;
        }
        let mut start = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            let end = start + seg.duration;
            let last = i + 1 == self.segments.len();
            if t < end || (last && t <= end * (1.0 + 1e-12)) {
                return Some(seg.phase_at((t - start).min(seg.duration)));
            }
            start = end;
        }
        None
    }

    /// Start time of every segment, followed by the total duration.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        let mut t = 0.0;
        out.push(t);
        for s in &self.segments {
            t += s.duration;
            out.push(t);
        }
        out
    }
}

/// Plays `schedule` backwards; with `negate` every phase (or amplitude) also
/// flips sign. Total duration is preserved.
pub fn time_reverse(schedule: &PhaseSchedule, negate: bool) -> PhaseSchedule {
    PhaseSchedule {
        segments: schedule
            .segments
            .iter()
            .rev()
            .map(|s| s.reversed(negate))
            .collect(),
    }
}
