//! Run configuration, read from TOML.
//!
//! Every section and key is optional; omitted values take the defaults
//! below. Unknown keys are rejected.
//!
//! ```toml
//! seed = 0
//!
//! [lattice]
//! depth = 10.0
//! n_max = 16
//! substeps_per_segment = 32
//!
//! [splitter]
//! step_duration = 0.25
//!
//! [splitter.hyper]
//! gamma = 0.999
//! episodes = 20000
//!
//! [mirror.hyper]
//! episodes = 8000
//!
//! [interferometer]
//! free_time = 10.0
//! negate = "calibrate"
//!
//! [estimation]
//! true_accel = -3e-4
//! atoms = 10000
//! trials = 20
//! ```

use serde::{Deserialize, Serialize};

use crate::dqn::Hyperparameters;
use crate::error::{Error, Result};
use crate::estimation::AccelGrid;
use crate::interferometer::NegatePolicy;
use crate::lattice::{DensitySettings, LatticeConfig, PositionGrid};
use crate::tasks::{MirrorSettings, SplitterSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    pub depth: f64,
    pub n_max: usize,
    pub substeps_per_segment: usize,
}

impl Default for LatticeSection {
    fn default() -> Self {
        let c = LatticeConfig::default();
        LatticeSection {
            depth: c.depth,
            n_max: c.n_max,
            substeps_per_segment: c.substeps_per_segment,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitterSection {
    /// Duration of one constant-phase action, in `ω_r⁻¹`.
    pub step_duration: f64,
    /// Episode length and success threshold are `hyper.max_steps` and
    /// `hyper.fidelity_threshold`.
    pub hyper: Hyperparameters,
}

impl Default for SplitterSection {
    fn default() -> Self {
        SplitterSection {
            step_duration: SplitterSettings::default().step_duration,
            hyper: Hyperparameters::splitter(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MirrorSection {
    /// `hyper.max_steps` is the half-cycle cap.
    pub hyper: Hyperparameters,
}

impl Default for MirrorSection {
    fn default() -> Self {
        MirrorSection {
            hyper: Hyperparameters::mirror(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterferometerSection {
    /// Each free-propagation region, in `ω_r⁻¹`.
    pub free_time: f64,
    pub negate: NegatePolicy,
    /// Duration given to each ideal component when no protocol is supplied.
    pub ideal_component_time: f64,
}

impl Default for InterferometerSection {
    fn default() -> Self {
        InterferometerSection {
            free_time: 10.0,
            negate: NegatePolicy::Calibrate,
            ideal_component_time: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationSection {
    /// Grid for the likelihood table and posterior snapshots, `ω_r v_r`.
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    pub true_accel: f64,
    /// Largest number of atoms in the σ-vs-N ladder.
    pub atoms: usize,
    pub trials: usize,
    /// Posterior snapshots are written after these many atoms.
    pub snapshots: Vec<usize>,
    /// The σ-vs-N curve uses a finer grid of this width centred on
    /// `true_accel`, so the posterior stays resolved at large N.
    pub fine_span: f64,
    pub fine_points: usize,
    /// Bragg free propagation time `T`; defaults to the interferometer's
    /// free time.
    pub bragg_time: Option<f64>,
}

impl Default for EstimationSection {
    fn default() -> Self {
        let g = AccelGrid::default();
        EstimationSection {
            grid_min: g.min,
            grid_max: g.max,
            grid_points: g.points,
            true_accel: -3e-4,
            atoms: 10_000,
            trials: 20,
            snapshots: vec![0, 1, 10, 100],
            fine_span: 8e-4,
            fine_points: 801,
            bragg_time: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensitySection {
    /// Gaussian envelope width in lattice sites.
    pub envelope_width: f64,
    pub lattice_periods: usize,
    pub points_per_period: usize,
    pub time_step: f64,
    pub sample_stride: usize,
    /// Only every `x_stride`-th grid point is written to CSV.
    pub x_stride: usize,
}

impl Default for DensitySection {
    fn default() -> Self {
        DensitySection {
            envelope_width: 4.0,
            lattice_periods: 512,
            points_per_period: 16,
            time_step: 2e-3,
            sample_stride: 50,
            x_stride: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub lattice: LatticeSection,
    pub splitter: SplitterSection,
    pub mirror: MirrorSection,
    pub interferometer: InterferometerSection,
    pub estimation: EstimationSection,
    pub density: DensitySection,
}

impl RunConfig {
    pub fn lattice_config(&self) -> LatticeConfig {
        LatticeConfig {
            depth: self.lattice.depth,
            n_max: self.lattice.n_max,
            substeps_per_segment: self.lattice.substeps_per_segment,
            accel: 0.0,
        }
    }

    pub fn splitter_settings(&self) -> SplitterSettings {
        SplitterSettings {
            step_duration: self.splitter.step_duration,
            max_steps: self.splitter.hyper.max_steps,
            fidelity_threshold: self.splitter.hyper.fidelity_threshold,
        }
    }

    pub fn mirror_settings(&self) -> MirrorSettings {
        MirrorSettings {
            max_half_cycles: self.mirror.hyper.max_steps,
            fidelity_threshold: self.mirror.hyper.fidelity_threshold,
        }
    }

    pub fn grid(&self) -> Result<AccelGrid> {
        let e = &self.estimation;
        AccelGrid::new(e.grid_min, e.grid_max, e.grid_points)
    }

    pub fn fine_grid(&self) -> Result<AccelGrid> {
        let e = &self.estimation;
        AccelGrid::centered(e.true_accel, e.fine_span / (e.fine_points.max(2) - 1) as f64, e.fine_points)
    }

    pub fn bragg_time(&self) -> f64 {
        self.estimation.bragg_time.unwrap_or(self.interferometer.free_time)
    }

    pub fn density_settings(&self) -> DensitySettings {
        let d = &self.density;
        DensitySettings {
            envelope_width: d.envelope_width,
            grid: PositionGrid::lattice_periods(d.lattice_periods, d.points_per_period),
            time_step: d.time_step,
            sample_stride: d.sample_stride,
        }
    }

    /// Range checks. The error names the offending key as `section.key`.
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        let mut checks: Vec<(String, bool, String)> = Vec::new();
        let l = &self.lattice;
        checks.push(("lattice.depth".into(), l.depth.is_finite() && l.depth >= 0.0, format!("{} must be >= 0", l.depth)));
        checks.push(("lattice.n_max".into(), l.n_max >= 8, format!("{} must be >= 8", l.n_max)));
        checks.push((
            "lattice.substeps_per_segment".into(),
            l.substeps_per_segment >= 1,
            "must be >= 1".into(),
        ));
        let s = &self.splitter;
        checks.push((
            "splitter.step_duration".into(),
            s.step_duration.is_finite() && s.step_duration > 0.0,
            format!("{} must be > 0", s.step_duration),
        ));
        for (section, h) in [("splitter.hyper", &s.hyper), ("mirror.hyper", &self.mirror.hyper)] {
            let unit = |x: f64| (0.0..=1.0).contains(&x);
            checks.push((format!("{section}.gamma"), unit(h.gamma), format!("{} outside [0, 1]", h.gamma)));
            checks.push((format!("{section}.tau"), unit(h.tau), format!("{} outside [0, 1]", h.tau)));
            checks.push((
                format!("{section}.learning_rate"),
                h.learning_rate.is_finite() && h.learning_rate > 0.0,
                format!("{} must be > 0", h.learning_rate),
            ));
            checks.push((format!("{section}.episodes"), h.episodes >= 1, "must be >= 1".into()));
            checks.push((
                format!("{section}.epsilon_decay"),
                h.epsilon_decay.is_finite() && h.epsilon_decay >= 0.0,
                format!("{} must be >= 0", h.epsilon_decay),
            ));
            checks.push((format!("{section}.epsilon_floor"), unit(h.epsilon_floor), format!("{} outside [0, 1]", h.epsilon_floor)));
            checks.push((format!("{section}.hidden"), h.hidden >= 1, "must be >= 1".into()));
            checks.push((format!("{section}.batch"), h.batch >= 1, "must be >= 1".into()));
            checks.push((format!("{section}.max_steps"), h.max_steps >= 1, "must be >= 1".into()));
            checks.push((
                format!("{section}.fidelity_threshold"),
                h.fidelity_threshold > 0.0 && h.fidelity_threshold < 1.0,
                format!("{} outside (0, 1)", h.fidelity_threshold),
            ));
            checks.push((
                format!("{section}.replay_capacity"),
                h.replay_capacity >= h.batch,
                format!("{} smaller than batch", h.replay_capacity),
            ));
        }
        let i = &self.interferometer;
        checks.push((
            "interferometer.free_time".into(),
            i.free_time.is_finite() && i.free_time >= 0.0,
            format!("{} must be >= 0", i.free_time),
        ));
        checks.push((
            "interferometer.ideal_component_time".into(),
            i.ideal_component_time.is_finite() && i.ideal_component_time > 0.0,
            format!("{} must be > 0", i.ideal_component_time),
        ));
        let e = &self.estimation;
        checks.push((
            "estimation.grid_max".into(),
            e.grid_min.is_finite() && e.grid_max.is_finite() && e.grid_max > e.grid_min,
            format!("{} must exceed grid_min {}", e.grid_max, e.grid_min),
        ));
        checks.push(("estimation.grid_points".into(), e.grid_points >= 3, "must be >= 3".into()));
        checks.push(("estimation.true_accel".into(), e.true_accel.is_finite(), "must be finite".into()));
        checks.push(("estimation.atoms".into(), e.atoms >= 100, "must be >= 100".into()));
        checks.push(("estimation.trials".into(), e.trials >= 1, "must be >= 1".into()));
        checks.push((
            "estimation.fine_span".into(),
            e.fine_span.is_finite() && e.fine_span > 0.0,
            format!("{} must be > 0", e.fine_span),
        ));
        checks.push(("estimation.fine_points".into(), e.fine_points >= 3, "must be >= 3".into()));
        checks.push((
            "estimation.bragg_time".into(),
            e.bragg_time.is_none_or(|t| t.is_finite() && t > 0.0),
            "must be > 0".into(),
        ));
        let d = &self.density;
        checks.push(("density.envelope_width".into(), d.envelope_width > 0.0, "must be > 0".into()));
        checks.push(("density.lattice_periods".into(), d.lattice_periods >= 2, "must be >= 2".into()));
        checks.push(("density.points_per_period".into(), d.points_per_period >= 4, "must be >= 4".into()));
        checks.push(("density.time_step".into(), d.time_step > 0.0, "must be > 0".into()));
        checks.push(("density.sample_stride".into(), d.sample_stride >= 1, "must be >= 1".into()));
        checks.push(("density.x_stride".into(), d.x_stride >= 1, "must be >= 1".into()));

        match checks.into_iter().find(|c| !c.1) {
            Some((key, _, msg)) => Err((key, msg)),
            None => Ok(()),
        }
    }

    /// The effective configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line where `section.key` is set, if it appears in the text.
fn line_of_key(text: &str, dotted: &str) -> Option<usize> {
    let (section, key) = match dotted.rsplit_once('.') {
        Some((s, k)) => (s, k),
        None => ("", dotted),
    };
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(h) = line.strip_prefix('[').and_then(|h| h.strip_suffix(']')) {
            current = h.trim().to_string();
            continue;
        }
        let Some((k, _)) = line.split_once('=') else { continue };
        let k = k.trim();
        let full = if current.is_empty() { k.to_string() } else { format!("{current}.{k}") };
        if full == dotted || (current == section && k == key) {
            return Some(i + 1);
        }
    }
    None
}

/// Parses and range-checks a configuration. Errors carry the line number
/// (0 when the offending key was left at its default).
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map_or(0, |s| line_of_offset(text, s.start)),
        message: e.message().to_string(),
    })?;
    cfg.validate().map_err(|(key, msg)| Error::Parse {
        line: line_of_key(text, &key).unwrap_or(0),
        message: format!("{key}: {msg}"),
    })?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.lattice.depth, 10.0);
        assert_eq!(c.splitter.hyper.hidden, 98);
        assert_eq!(c.mirror.hyper.hidden, 128);
        assert_eq!(c.estimation.true_accel, -3e-4);
    }

    #[test]
    fn out_of_range_names_key_and_line() {
        let err = parse_config("seed = 1\n\n[splitter.hyper]\ngamma = 1.5\n").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 4);
                assert!(message.contains("splitter.hyper.gamma"), "{message}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_key_and_type_mismatch_have_lines() {
        match parse_config("[lattice]\ndepth = 10.0\ndeep = 3\n").unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("deep"), "{message}");
            }
            e => panic!("{e}"),
        }
        match parse_config("seed = 2\n[lattice]\nn_max = \"many\"\n").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.seed = 42;
        c.lattice.depth = 7.5;
        c.mirror.hyper.episodes = 12;
        c.interferometer.negate = NegatePolicy::Negate;
        c.estimation.bragg_time = Some(12.5);
        c.estimation.snapshots = vec![3, 30];
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
        assert_eq!(parse_config(&RunConfig::default().to_toml()).unwrap(), RunConfig::default());
    }

    #[test]
    fn derived_settings() {
        let c = parse_config("[interferometer]\nfree_time = 6.0\n").unwrap();
        assert_eq!(c.bragg_time(), 6.0);
        assert_eq!(c.splitter_settings().max_steps, 60);
        assert_eq!(c.mirror_settings().max_half_cycles, 16);
        let g = c.fine_grid().unwrap();
        assert_eq!(g.points, 801);
        assert_eq!(g.index_of(-3e-4), Some(400));
        assert!((g.spacing() - 1e-6).abs() < 1e-15);
    }
}
