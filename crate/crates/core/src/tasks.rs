//! The two control problems: a beam splitter (reach a target state) and a
//! mirror (reach a target operator on the `±4ħk_L` subspace).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dqn::{Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::lattice::{
    bloch_eigensystem, Evolver, Gauge, LatticeConfig, MomentumState, PhaseSchedule, PhaseSegment, Propagator,
    HALF_CYCLE, TRUNCATION_LIMIT,
};

/// Splitter actions, index 0 first.
pub const SPLITTER_PHASES: [f64; 5] = [-PI, -PI / 2.0, -PI / 4.0, 0.0, PI / 2.0];

/// Mirror actions: drive amplitude (rad) for the next half-cycle.
pub const MIRROR_AMPLITUDES: [f64; 5] = [0.4, 0.6, 0.8, 1.0, 1.2];

/// Comb index of the splitting momentum `p₀ = 4ħk_L`.
pub const P0_INDEX: i64 = 2;

/// Comb indices observed by both tasks.
pub const OBSERVED: std::ops::RangeInclusive<i64> = -3..=3;

pub const SPLITTER_TARGET_BAND: usize = 3;

/// Reward `F/(1 − F)`, paid only at the end of an episode.
pub fn terminal_reward(fidelity: f64) -> f64 {
    let f = fidelity.clamp(0.0, 1.0 - 1e-12);
    f / (1.0 - f)
}

/// `|⟨target|state⟩|²`.
pub fn splitter_fidelity(state: &MomentumState, target: &MomentumState) -> f64 {
    target.fidelity(state)
}

/// The third-excited Bloch state at `q = 0`.
pub fn splitter_target(cfg: &LatticeConfig) -> Result<MomentumState> {
    Ok(bloch_eigensystem(cfg)?.band(SPLITTER_TARGET_BAND))
}

fn check_static(cfg: &LatticeConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.accel != 0.0 {
        return Err(Error::invalid("control tasks are defined in a static lattice (accel = 0)"));
    }
    if (cfg.n_max as i64) < 4 {
        return Err(Error::invalid("n_max too small for the observed momenta"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitterSettings {
    /// Time the chosen phase is held (ω_r⁻¹).
    pub step_duration: f64,
    pub max_steps: usize,
    pub fidelity_threshold: f64,
}

impl Default for SplitterSettings {
    fn default() -> Self {
        SplitterSettings {
            step_duration: 0.25,
            max_steps: 60,
            fidelity_threshold: 0.95,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitterTask {
    settings: SplitterSettings,
    step_ops: Vec<Propagator>,
    initial: MomentumState,
    target: MomentumState,
    state: MomentumState,
    phases: Vec<f64>,
    done: bool,
}

impl SplitterTask {
    pub fn new(cfg: &LatticeConfig, settings: SplitterSettings) -> Result<Self> {
        check_static(cfg)?;
        if !(settings.step_duration.is_finite() && settings.step_duration > 0.0) {
            return Err(Error::invalid("splitter step duration must be > 0"));
        }
        if settings.max_steps == 0 {
            return Err(Error::invalid("max_steps must be at least 1"));
        }
        let spectrum = bloch_eigensystem(cfg)?;
        let ev = Evolver::new(cfg, Gauge::KineticDrift)?;
        let step_ops = SPLITTER_PHASES
            .iter()
            .map(|&p| Ok(ev.evolve_propagator(&PhaseSchedule::piecewise_constant(&[p], settings.step_duration)?, 0.0)))
            .collect::<Result<Vec<_>>>()?;
        let initial = spectrum.band(0);
        Ok(SplitterTask {
            settings,
            step_ops,
            target: spectrum.band(SPLITTER_TARGET_BAND),
            state: initial.clone(),
            initial,
            phases: Vec::new(),
            done: true,
        })
    }

    pub fn settings(&self) -> &SplitterSettings {
        &self.settings
    }

    pub fn state(&self) -> &MomentumState {
        &self.state
    }

    pub fn target(&self) -> &MomentumState {
        &self.target
    }

    pub fn observe(&self) -> Vec<f64> {
        OBSERVED.map(|n| self.state.population(n)).collect()
    }

    /// Replays a list of action indices from the ground state.
    pub fn replay(&mut self, actions: &[usize]) -> Result<f64> {
        self.reset();
        for &a in actions {
            if self.done {
                break;
            }
            self.step(a)?;
        }
        Ok(self.fidelity())
    }
}

impl Environment for SplitterTask {
    type Protocol = PhaseSchedule;

    fn observation_dim(&self) -> usize {
        OBSERVED.count()
    }

    fn num_actions(&self) -> usize {
        SPLITTER_PHASES.len()
    }

    fn reset(&mut self) -> Vec<f64> {
        self.state = self.initial.clone();
        self.phases.clear();
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::InvalidState("splitter step after episode end".into()));
        }
        let op = self
            .step_ops
            .get(action)
            .ok_or_else(|| Error::invalid(format!("splitter action {action} out of range")))?;
        self.state = op.apply(&self.state);
        self.phases.push(SPLITTER_PHASES[action]);
        let f = self.fidelity();
        self.done = self.phases.len() >= self.settings.max_steps || f > self.settings.fidelity_threshold;
        if self.done {
            let edge = self.state.edge_population();
            if edge > TRUNCATION_LIMIT {
                return Err(Error::Truncation { max_edge_population: edge });
            }
        }
        Ok(StepOutcome {
            observation: self.observe(),
            reward: if self.done { terminal_reward(f) } else { 0.0 },
            done: self.done,
        })
    }

    fn fidelity(&self) -> f64 {
        splitter_fidelity(&self.state, &self.target)
    }

    fn protocol(&self) -> PhaseSchedule {
        PhaseSchedule::piecewise_constant(&self.phases, self.settings.step_duration)
            .expect("recorded phases are finite")
    }
}

/// A target operator acting on the span of two comb states, identity
/// elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubspaceTarget {
    pub indices: [i64; 2],
    /// `block[i][j] = ⟨indices[i]| U_target |indices[j]⟩`.
    pub block: [[Complex64; 2]; 2],
}

impl SubspaceTarget {
    /// `|p₀⟩⟨−p₀| + |−p₀⟩⟨p₀|`.
    pub fn mirror() -> Self {
        let z = Complex64::new(0.0, 0.0);
        let o = Complex64::new(1.0, 0.0);
        SubspaceTarget {
            indices: [P0_INDEX, -P0_INDEX],
            block: [[z, o], [o, z]],
        }
    }

    pub fn dim(&self) -> usize {
        2
    }

    /// Full-basis projector onto the subspace.
    pub fn projector(&self, n_max: usize) -> DMatrix<Complex64> {
        let dim = 2 * n_max + 1;
        let mut p = DMatrix::zeros(dim, dim);
        for &n in &self.indices {
            let i = (n + n_max as i64) as usize;
            p[(i, i)] = Complex64::new(1.0, 0.0);
        }
        p
    }

    /// Full-basis target operator.
    pub fn operator(&self, n_max: usize) -> Propagator {
        let mut u = Propagator::identity(n_max);
        let off = n_max as i64;
        let m = u.matrix_mut();
        for (i, &ni) in self.indices.iter().enumerate() {
            for (j, &nj) in self.indices.iter().enumerate() {
                m[((ni + off) as usize, (nj + off) as usize)] = self.block[i][j];
            }
        }
        u
    }

    /// `M = P U_target† U P` on the subspace, as a 2×2 block.
    pub fn overlap_block(&self, u: &Propagator) -> [[Complex64; 2]; 2] {
        let b = subspace_block(u, &self.indices);
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    m[i][j] += self.block[k][i].conj() * b[k][j];
                }
            }
        }
        m
    }
}

fn subspace_block(u: &Propagator, indices: &[i64; 2]) -> [[Complex64; 2]; 2] {
    let mut b = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (i, &ni) in indices.iter().enumerate() {
        for (j, &nj) in indices.iter().enumerate() {
            b[i][j] = u.element(ni, nj);
        }
    }
    b
}

/// `[Tr(MM†) + |Tr M|²] / (d (d + 1))`. Leakage out of the subspace shrinks `M`.
pub fn channel_fidelity(u: &Propagator, target: &SubspaceTarget) -> f64 {
    let m = target.overlap_block(u);
    let frob: f64 = m.iter().flatten().map(|c| c.norm_sqr()).sum();
    let tr = m[0][0] + m[1][1];
    let d = target.dim() as f64;
    (frob + tr.norm_sqr()) / (d * (d + 1.0))
}

/// `min_χ ‖B − e^{iχ} T‖₂` between the subspace block `B` of `u` and the
/// target block `T`, with `χ` fitted in the Frobenius sense.
pub fn subspace_phase_error(u: &Propagator, target: &SubspaceTarget) -> f64 {
    let b = subspace_block(u, &target.indices);
    let mut inner = Complex64::new(0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            inner += target.block[i][j].conj() * b[i][j];
        }
    }
    let chi = Complex64::from_polar(1.0, inner.arg());
    let mut a = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            a[i][j] = b[i][j] - chi * target.block[i][j];
        }
    }
    let frob: f64 = a.iter().flatten().map(|c| c.norm_sqr()).sum();
    let det = (a[0][0] * a[1][1] - a[0][1] * a[1][0]).norm_sqr();
    ((frob + (frob * frob - 4.0 * det).max(0.0).sqrt()) / 2.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MirrorSettings {
    pub max_half_cycles: usize,
    pub fidelity_threshold: f64,
}

impl Default for MirrorSettings {
    fn default() -> Self {
        MirrorSettings {
            max_half_cycles: 16,
            fidelity_threshold: 0.95,
        }
    }
}

/// Propagators of one drive half-cycle for every amplitude, split by the
/// parity of the half-cycle index (the sinusoid flips sign each half-cycle).
#[derive(Debug, Clone)]
struct HalfCycleCache {
    amplitudes: Vec<f64>,
    ops: Vec<[Propagator; 2]>,
}

impl HalfCycleCache {
    fn new(cfg: &LatticeConfig, amplitudes: &[f64]) -> Result<Self> {
        let ev = Evolver::new(cfg, Gauge::KineticDrift)?;
        let ops = amplitudes
            .iter()
            .map(|&a| {
                let even = PhaseSchedule::from_segments(vec![PhaseSegment::half_cycle(a, 0.0)?]);
                let odd = PhaseSchedule::from_segments(vec![PhaseSegment::half_cycle(a, HALF_CYCLE)?]);
                Ok([ev.evolve_propagator(&even, 0.0), ev.evolve_propagator(&odd, HALF_CYCLE)])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HalfCycleCache {
            amplitudes: amplitudes.to_vec(),
            ops,
        })
    }

    fn get(&self, action: usize, k: usize) -> &Propagator {
        &self.ops[action][k % 2]
    }
}

#[derive(Debug, Clone)]
pub struct MirrorTask {
    settings: MirrorSettings,
    target: SubspaceTarget,
    cache: HalfCycleCache,
    u: Propagator,
    amplitudes: Vec<f64>,
    done: bool,
}

impl MirrorTask {
    pub fn new(cfg: &LatticeConfig, settings: MirrorSettings) -> Result<Self> {
        check_static(cfg)?;
        if settings.max_half_cycles == 0 {
            return Err(Error::invalid("max_half_cycles must be at least 1"));
        }
        Ok(MirrorTask {
            settings,
            target: SubspaceTarget::mirror(),
            cache: HalfCycleCache::new(cfg, &MIRROR_AMPLITUDES)?,
            u: Propagator::identity(cfg.n_max),
            amplitudes: Vec::new(),
            done: true,
        })
    }

    pub fn settings(&self) -> &MirrorSettings {
        &self.settings
    }

    pub fn propagator(&self) -> &Propagator {
        &self.u
    }

    pub fn target(&self) -> &SubspaceTarget {
        &self.target
    }

    /// `|⟨n|U|+p₀⟩|²` for `n = −3…3`, then the same for `−p₀`.
    pub fn observe(&self) -> Vec<f64> {
        [P0_INDEX, -P0_INDEX]
            .iter()
            .flat_map(|&m| OBSERVED.map(move |n| self.u.element(n, m).norm_sqr()))
            .collect()
    }

    pub fn replay(&mut self, actions: &[usize]) -> Result<f64> {
        self.reset();
        for &a in actions {
            if self.done {
                break;
            }
            self.step(a)?;
        }
        Ok(self.fidelity())
    }
}

impl Environment for MirrorTask {
    type Protocol = PhaseSchedule;

    fn observation_dim(&self) -> usize {
        2 * OBSERVED.count()
    }

    fn num_actions(&self) -> usize {
        self.cache.amplitudes.len()
    }

    fn reset(&mut self) -> Vec<f64> {
        self.u = Propagator::identity(self.u.n_max());
        self.amplitudes.clear();
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::InvalidState("mirror step after episode end".into()));
        }
        if action >= self.cache.amplitudes.len() {
            return Err(Error::invalid(format!("mirror action {action} out of range")));
        }
        let k = self.amplitudes.len();
        self.u = self.u.then(self.cache.get(action, k));
        self.amplitudes.push(self.cache.amplitudes[action]);
        let f = self.fidelity();
        self.done = self.amplitudes.len() >= self.settings.max_half_cycles || f > self.settings.fidelity_threshold;
        if self.done {
            let edge = self.u.edge_population();
            if edge > TRUNCATION_LIMIT {
                return Err(Error::Truncation { max_edge_population: edge });
            }
        }
        Ok(StepOutcome {
            observation: self.observe(),
            reward: if self.done { terminal_reward(f) } else { 0.0 },
            done: self.done,
        })
    }

    fn fidelity(&self) -> f64 {
        channel_fidelity(&self.u, &self.target)
    }

    fn protocol(&self) -> PhaseSchedule {
        PhaseSchedule::sinusoid(&self.amplitudes).expect("recorded amplitudes are finite")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub amplitude: f64,
    pub half_cycles: usize,
    pub duration: f64,
    pub fidelity: f64,
}

/// Channel fidelity of a constant-amplitude `A sin(12 t)` drive after every
/// half-cycle up to `max_half_cycles`, for each amplitude.
pub fn fixed_amplitude_scan(cfg: &LatticeConfig, amplitudes: &[f64], max_half_cycles: usize) -> Result<Vec<ScanPoint>> {
    check_static(cfg)?;
    let cache = HalfCycleCache::new(cfg, amplitudes)?;
    let target = SubspaceTarget::mirror();
    let mut out = Vec::with_capacity(amplitudes.len() * max_half_cycles);
    for (a, &amp) in amplitudes.iter().enumerate() {
        let mut u = Propagator::identity(cfg.n_max);
        for k in 0..max_half_cycles {
            u = u.then(cache.get(a, k));
            out.push(ScanPoint {
                amplitude: amp,
                half_cycles: k + 1,
                duration: (k + 1) as f64 * HALF_CYCLE,
                fidelity: channel_fidelity(&u, &target),
            });
        }
    }
    Ok(out)
}

/// The best point of a scan.
pub fn best_scan_point(points: &[ScanPoint]) -> Option<ScanPoint> {
    points.iter().copied().max_by(|a, b| a.fidelity.total_cmp(&b.fidelity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::propagator;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn cfg() -> LatticeConfig {
        LatticeConfig::default()
    }

    #[test]
    fn reward_arithmetic() {
        assert!((terminal_reward(0.95) - 19.0).abs() < 1e-9);
        assert!((terminal_reward(0.5) - 1.0).abs() < 1e-12);
        assert!(terminal_reward(1.0).is_finite());
        let mut prev = -1.0;
        for k in 0..1000 {
            let r = terminal_reward(k as f64 / 1000.0);
            assert!(r > prev);
            prev = r;
        }
    }

    #[test]
    fn splitter_reset_is_symmetric_ground_state() {
        let mut t = SplitterTask::new(&cfg(), SplitterSettings::default()).unwrap();
        let a = t.reset();
        let b = t.reset();
        assert_eq!(a, b);
        assert_eq!(a.len(), 7);
        for i in 0..3 {
            assert!((a[i] - a[6 - i]).abs() < 1e-10);
        }
        assert!(a[3] > a[2] && a[3] > 0.5);

        let mut free = SplitterTask::new(&cfg().with_depth(0.0), SplitterSettings::default()).unwrap();
        assert_eq!(free.reset(), vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_phase_leaves_ground_state_alone() {
        let mut t = SplitterTask::new(&cfg(), SplitterSettings::default()).unwrap();
        let start = t.reset();
        let zero = SPLITTER_PHASES.iter().position(|&p| p == 0.0).unwrap();
        for _ in 0..10 {
            let out = t.step(zero).unwrap();
            assert_eq!(out.reward, 0.0);
            assert!(!out.done);
            for (x, y) in out.observation.iter().zip(&start) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn splitter_episode_ends_and_pays_terminal_reward() {
        let s = SplitterSettings { max_steps: 4, ..Default::default() };
        let mut t = SplitterTask::new(&cfg(), s).unwrap();
        t.reset();
        let mut last = None;
        for k in 0..4 {
            let out = t.step(k % 5).unwrap();
            assert_eq!(out.done, k == 3);
            last = Some(out);
        }
        let out = last.unwrap();
        assert!((out.reward - terminal_reward(t.fidelity())).abs() < 1e-12);
        assert!(matches!(t.step(0), Err(Error::InvalidState(_))));
        assert_eq!(t.protocol().len(), 4);
        assert!(t.step(7).is_err());
    }

    #[test]
    fn splitter_protocol_reproduces_state() {
        let mut t = SplitterTask::new(&cfg(), SplitterSettings::default()).unwrap();
        t.reset();
        for a in [0, 4, 2, 1, 4, 3, 0] {
            t.step(a).unwrap();
        }
        let replayed = crate::lattice::propagate(&t.initial, &t.protocol(), &cfg()).unwrap();
        assert!(replayed.max_abs_diff(t.state()) < 1e-10);
    }

    #[test]
    fn splitter_fidelity_examples() {
        let bands = bloch_eigensystem(&cfg()).unwrap();
        let target = bands.band(3);
        assert!((splitter_fidelity(&target, &target) - 1.0).abs() < 1e-12);
        assert!(splitter_fidelity(&bands.band(0), &target) < 1e-10);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mix = MomentumState::from_amplitudes(
            (target.amplitudes() + bands.band(5).amplitudes()) * Complex64::new(s, 0.0),
        )
        .unwrap();
        assert!((splitter_fidelity(&mix, &target) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn channel_fidelity_of_target_and_identity() {
        let t = SubspaceTarget::mirror();
        assert!((channel_fidelity(&t.operator(16), &t) - 1.0).abs() < 1e-14);
        assert!((channel_fidelity(&Propagator::identity(16), &t) - 1.0 / 3.0).abs() < 1e-14);
        assert!(subspace_phase_error(&t.operator(16), &t) < 1e-14);
        let phased = Propagator::from_matrix(t.operator(16).matrix() * Complex64::from_polar(1.0, 0.7)).unwrap();
        assert!(subspace_phase_error(&phased, &t) < 1e-14);
        assert!(subspace_phase_error(&Propagator::identity(16), &t) > 1.0);
    }

    #[test]
    fn overlap_block_matches_full_basis_product() {
        let t = SubspaceTarget::mirror();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_unitary(&mut rng, 9);
        let u = Propagator::from_matrix(u).unwrap();
        let p = t.projector(4);
        let full = &p * t.operator(4).matrix().adjoint() * u.matrix() * &p;
        let m = t.overlap_block(&u);
        for (i, &ni) in t.indices.iter().enumerate() {
            for (j, &nj) in t.indices.iter().enumerate() {
                let f = full[((ni + 4) as usize, (nj + 4) as usize)];
                assert!((f - m[i][j]).norm() < 1e-14);
            }
        }
        assert!((full.trace() - (m[0][0] + m[1][1])).norm() < 1e-14);
    }

    fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<Complex64> {
        let g = DMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
        });
        g.qr().q()
    }

    /// A unitary that leaks half of each subspace column out of the subspace.
    fn leaky_unitary(rng: &mut ChaCha8Rng) -> Propagator {
        let n_max = 4;
        let dim = 2 * n_max + 1;
        let t = SubspaceTarget::mirror();
        let idx: Vec<usize> = t.indices.iter().map(|&n| (n + n_max as i64) as usize).collect();
        let others: Vec<usize> = (0..dim).filter(|i| !idx.contains(i)).collect();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        // Mix each subspace state 50/50 with one outside state by a Hadamard.
        let phases = [rng.gen_range(0.0..6.0), rng.gen_range(0.0..6.0)];
        for (k, &i) in idx.iter().enumerate() {
            let o = others[k];
            let j = idx[1 - k];
            let ph = Complex64::from_polar(s, phases[k]);
            m[(j, i)] = ph;
            m[(o, i)] = ph;
            m[(j, o)] = ph;
            m[(o, o)] = -ph;
        }
        for &o in &others[2..] {
            m[(o, o)] = Complex64::new(1.0, 0.0);
        }
        let u = Propagator::from_matrix(m).unwrap();
        assert!(u.unitarity_error() < 1e-12);
        u
    }

    fn state_fidelity(u: &Propagator, t: &SubspaceTarget, a: Complex64, b: Complex64) -> f64 {
        let n_max = u.n_max();
        let mut v = DVector::zeros(u.dim());
        v[(t.indices[0] + n_max as i64) as usize] = a;
        v[(t.indices[1] + n_max as i64) as usize] = b;
        let out = u.matrix() * &v;
        let ideal = t.operator(n_max).matrix() * &v;
        ideal.dotc(&out).norm_sqr()
    }

    #[test]
    fn channel_fidelity_equals_average_state_fidelity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let t = SubspaceTarget::mirror();
        let u = leaky_unitary(&mut rng);
        let f = channel_fidelity(&u, &t);

        // The six axis states of the Bloch sphere form a 2-design, so their
        // mean reproduces the Haar average of a quadratic fidelity exactly.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let design = [
            (c(1.0, 0.0), c(0.0, 0.0)),
            (c(0.0, 0.0), c(1.0, 0.0)),
            (c(s, 0.0), c(s, 0.0)),
            (c(s, 0.0), c(-s, 0.0)),
            (c(s, 0.0), c(0.0, s)),
            (c(s, 0.0), c(0.0, -s)),
        ];
        let exact = design.iter().map(|&(a, b)| state_fidelity(&u, &t, a, b)).sum::<f64>() / 6.0;
        assert!((f - exact).abs() < 1e-12, "{f} vs {exact}");

        // Monte Carlo over Haar-random subspace states.
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let z: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
            let x = state_fidelity(&u, &t, c(z[0] / norm, z[1] / norm), c(z[2] / norm, z[3] / norm));
            sum += x;
            sum2 += x * x;
        }
        let mean = sum / n as f64;
        let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - f).abs() < 4.0 * se, "MC {mean} ± {se} vs {f}");
    }

    #[test]
    fn mirror_reset_observes_identity() {
        let mut t = MirrorTask::new(&cfg(), MirrorSettings::default()).unwrap();
        let obs = t.reset();
        assert_eq!(obs.len(), 14);
        assert_eq!(obs.iter().sum::<f64>(), 2.0);
        assert_eq!(obs[3 + 2], 1.0);
        assert_eq!(obs[7 + 3 - 2], 1.0);
        assert_eq!(t.reset(), obs);
    }

    #[test]
    fn mirror_steps_match_direct_propagation() {
        let c = cfg();
        let mut t = MirrorTask::new(&c, MirrorSettings::default()).unwrap();
        t.reset();
        for a in [2, 4, 0, 3, 1] {
            t.step(a).unwrap();
        }
        let direct = propagator(&t.protocol(), &c).unwrap();
        assert!(direct.max_abs_diff(t.propagator()) < 1e-12);
        for b in t.protocol().boundaries() {
            assert!(t.protocol().phase_at(b).unwrap().abs() < 1e-12);
        }
        assert!((t.protocol().total_duration() - 5.0 * HALF_CYCLE).abs() < 1e-12);
        let obs = t.observe();
        assert!(obs[..7].iter().sum::<f64>() <= 1.0 + 1e-12);
        assert!(obs[7..].iter().sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn mirror_episode_length_bounded() {
        let s = MirrorSettings { max_half_cycles: 3, ..Default::default() };
        let mut t = MirrorTask::new(&cfg(), s).unwrap();
        t.reset();
        assert!(!t.step(0).unwrap().done);
        assert!(!t.step(0).unwrap().done);
        assert!(t.step(0).unwrap().done);
        assert!(t.step(0).is_err());
    }

    #[test]
    fn fixed_amplitude_scan_reaches_paper_level() {
        let pts = fixed_amplitude_scan(&cfg(), &MIRROR_AMPLITUDES, 16).unwrap();
        assert_eq!(pts.len(), 5 * 16);
        let best = best_scan_point(&pts).unwrap();
        assert!(best.fidelity >= 0.75, "{best:?}");
        assert!((2.0..4.5).contains(&best.duration), "{best:?}");
    }

    #[test]
    fn tasks_reject_accelerated_lattice() {
        assert!(SplitterTask::new(&cfg().with_accel(1e-3), SplitterSettings::default()).is_err());
        assert!(MirrorTask::new(&cfg().with_accel(1e-3), MirrorSettings::default()).is_err());
    }
}
