//! Command-line pipelines. Each subcommand writes into a run directory:
//! the effective configuration as `config.toml`, a `summary.txt` of
//! `key = value` lines, and its CSV and protocol artifacts.
//!
//! The seed and the output directory can also come from the environment
//! (`SHAKEN_LATTICE_SEED`, `SHAKEN_LATTICE_OUT`); command-line flags win.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dqn::{train_with_progress, Environment, EpisodeStats, Hyperparameters, TrainOutcome};
use crate::error::{Error, Result};
use crate::estimation::{
    bragg_fisher, bragg_table, build_likelihood, cr_bound, fisher_information, posterior_snapshots,
    sample_measurements, sigma_vs_n_experiment, AccelGrid, Posterior, SigmaCurve,
};
use crate::interferometer::{
    assemble, density_movie, ground_return, ideal_sequence, run, InterferometerSequence, RECOIL_VELOCITY_SLOPE,
};
use crate::io::checkpoint::Checkpoint;
use crate::io::config::{load_config, RunConfig};
use crate::io::protocol::{ProtocolFile, TaskKind};
use crate::io::tables;
use crate::tasks::{best_scan_point, fixed_amplitude_scan, MirrorTask, SplitterTask, MIRROR_AMPLITUDES};

pub const SEED_ENV: &str = "SHAKEN_LATTICE_SEED";
pub const OUT_ENV: &str = "SHAKEN_LATTICE_OUT";

#[derive(Debug, Parser)]
#[command(name = "shaken-lattice", about = "Shaken-lattice interferometer design and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML configuration; defaults apply to everything it omits.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run directory (default `runs/<command>-seed<seed>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct SequenceArgs {
    /// Splitter protocol file (from `train-splitter`).
    #[arg(long)]
    pub splitter: Option<PathBuf>,
    /// Mirror protocol file (from `train-mirror`).
    #[arg(long)]
    pub mirror: Option<PathBuf>,
    /// Use the analytically ideal components instead of protocol files.
    #[arg(long)]
    pub ideal: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the beam-splitter agent.
    TrainSplitter {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Train the mirror agent.
    TrainMirror {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Fixed-amplitude mirror drive scan.
    BaselineMirror {
        #[command(flatten)]
        common: Common,
    },
    /// Output momentum distributions of the assembled interferometer.
    RunInterferometer {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        seq: SequenceArgs,
    },
    /// Likelihood table, posterior snapshots and σ-vs-N curve.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        seq: SequenceArgs,
    },
    /// Bayesian estimation with the analytic Bragg interferometer.
    BraggBaseline {
        #[command(flatten)]
        common: Common,
        /// Free propagation time `T` (default: the configured Bragg time).
        #[arg(long)]
        time: Option<f64>,
    },
    /// Real-space density through the whole sequence.
    ExportDensity {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        seq: SequenceArgs,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::TrainSplitter { .. } => "train-splitter",
            Command::TrainMirror { .. } => "train-mirror",
            Command::BaselineMirror { .. } => "baseline-mirror",
            Command::RunInterferometer { .. } => "run-interferometer",
            Command::Estimate { .. } => "estimate",
            Command::BraggBaseline { .. } => "bragg-baseline",
            Command::ExportDensity { .. } => "export-density",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::TrainSplitter { common, .. }
            | Command::TrainMirror { common, .. }
            | Command::BaselineMirror { common }
            | Command::RunInterferometer { common, .. }
            | Command::Estimate { common, .. }
            | Command::BraggBaseline { common, .. }
            | Command::ExportDensity { common, .. } => common,
        }
    }
}

/// Parses `argv` (including the program name), runs the pipeline and
/// returns the process exit status.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// A resolved run: configuration, seed and output directory.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: RunConfig,
    pub dir: PathBuf,
}

impl RunContext {
    pub fn resolve(command: &str, common: &Common) -> Result<Self> {
        let mut config = match &common.config {
            Some(p) => load_config(p)?,
            None => RunConfig::default(),
        };
        if let Ok(s) = std::env::var(SEED_ENV) {
            config.seed = s
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("{SEED_ENV}={s} is not an unsigned integer")))?;
        }
        if let Some(s) = common.seed {
            config.seed = s;
        }
        let dir = common
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs").join(format!("{command}-seed{}", config.seed)));
        Ok(RunContext { config, dir })
    }

    fn prepare(&self) -> Result<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.dir.join("config.toml");
        std::fs::write(&path, self.config.to_toml()).map_err(|e| Error::io(path, e))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write_summary(&self, summary: &Summary) -> Result<()> {
        let path = self.path("summary.txt");
        std::fs::write(&path, &summary.0).map_err(|e| Error::io(path, e))
    }
}

#[derive(Default)]
struct Summary(String);

impl Summary {
    fn add(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{key} = {value}");
    }
}

/// Runs one subcommand and returns its run directory.
pub fn execute(command: &Command) -> Result<PathBuf> {
    let ctx = RunContext::resolve(command.name(), command.common())?;
    // Inputs are checked before anything is written.
    if let Command::RunInterferometer { seq, .. } | Command::Estimate { seq, .. } | Command::ExportDensity { seq, .. } =
        command
    {
        check_sequence_args(command.name(), seq)?;
    }
    ctx.prepare()?;
    let mut summary = Summary::default();
    summary.add("command", command.name());
    summary.add("seed", ctx.config.seed);
    match command {
        Command::TrainSplitter { episodes, .. } => train_splitter(&ctx, *episodes, &mut summary)?,
        Command::TrainMirror { episodes, .. } => train_mirror(&ctx, *episodes, &mut summary)?,
        Command::BaselineMirror { .. } => baseline_mirror(&ctx, &mut summary)?,
        Command::RunInterferometer { seq, .. } => run_interferometer(&ctx, seq, &mut summary)?,
        Command::Estimate { seq, .. } => estimate(&ctx, seq, &mut summary)?,
        Command::BraggBaseline { time, .. } => bragg_baseline(&ctx, *time, &mut summary)?,
        Command::ExportDensity { seq, .. } => export_density(&ctx, seq, &mut summary)?,
    }
    ctx.write_summary(&summary)?;
    Ok(ctx.dir)
}

fn check_sequence_args(command: &str, seq: &SequenceArgs) -> Result<()> {
    if seq.ideal {
        if command == "export-density" {
            return Err(Error::invalid("export-density needs protocol files; ideal components have no phase schedule"));
        }
        return Ok(());
    }
    let missing: Vec<&str> = [("--splitter", &seq.splitter), ("--mirror", &seq.mirror)]
        .iter()
        .filter(|(_, p)| p.is_none())
        .map(|(flag, _)| *flag)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingInput(format!(
            "{command} needs protocol files: pass {} (write them with train-splitter / train-mirror), or use --ideal",
            missing.join(" and ")
        )));
    }
    for p in [&seq.splitter, &seq.mirror].into_iter().flatten() {
        if !p.exists() {
            return Err(Error::MissingInput(format!("protocol file {} does not exist", p.display())));
        }
    }
    Ok(())
}

fn progress_printer(label: &'static str, every: usize) -> impl FnMut(&EpisodeStats) {
    let mut best = 0.0f64;
    move |ep: &EpisodeStats| {
        best = best.max(ep.fidelity);
        if (ep.episode + 1) % every == 0 {
            eprintln!(
                "{label} episode {:>6}  epsilon {:.3}  fidelity {:.4}  best {:.4}",
                ep.episode + 1,
                ep.epsilon,
                ep.fidelity,
                best
            );
        }
    }
}

fn finish_training<E: Environment>(
    ctx: &RunContext,
    kind: TaskKind,
    hyper: &Hyperparameters,
    out: TrainOutcome<E::Protocol>,
    to_schedule: impl Fn(E::Protocol) -> crate::lattice::PhaseSchedule,
    summary: &mut Summary,
) -> Result<()> {
    tables::write_training(&ctx.path("training.csv"), &out.record.episodes)?;
    Checkpoint {
        online: out.online,
        target: out.target,
        adam: out.optimizer,
    }
    .save(&ctx.path("checkpoint.bin"))?;
    summary.add("episodes", out.record.episodes.len());
    summary.add("best_fidelity", out.record.best_fidelity);
    summary.add("best_episode", out.record.best_episode.map_or(-1, |e| e as i64));
    if let Some(p) = out.best_protocol {
        let file = ProtocolFile {
            task: kind,
            seed: Some(ctx.config.seed),
            fidelity: Some(out.record.best_fidelity),
            hyper: Some(*hyper),
            schedule: to_schedule(p),
        };
        let name = format!("{}.protocol", kind.name());
        file.save(&ctx.path(&name))?;
        summary.add("protocol", name);
        summary.add("protocol_duration", file.schedule.total_duration());
    }
    Ok(())
}

fn train_splitter(ctx: &RunContext, episodes: Option<usize>, summary: &mut Summary) -> Result<()> {
    let c = &ctx.config;
    let mut hyper = c.splitter.hyper;
    if let Some(e) = episodes {
        hyper.episodes = e;
    }
    let mut task = SplitterTask::new(&c.lattice_config(), c.splitter_settings())?;
    let out = train_with_progress(&mut task, &hyper, c.seed, progress_printer("splitter", 1000))?;
    finish_training::<SplitterTask>(ctx, TaskKind::Splitter, &hyper, out, |p| p, summary)
}

fn train_mirror(ctx: &RunContext, episodes: Option<usize>, summary: &mut Summary) -> Result<()> {
    let c = &ctx.config;
    let mut hyper = c.mirror.hyper;
    if let Some(e) = episodes {
        hyper.episodes = e;
    }
    let mut task = MirrorTask::new(&c.lattice_config(), c.mirror_settings())?;
    let out = train_with_progress(&mut task, &hyper, c.seed, progress_printer("mirror", 1000))?;
    finish_training::<MirrorTask>(ctx, TaskKind::Mirror, &hyper, out, |p| p, summary)
}

fn baseline_mirror(ctx: &RunContext, summary: &mut Summary) -> Result<()> {
    let c = &ctx.config;
    let points = fixed_amplitude_scan(&c.lattice_config(), &MIRROR_AMPLITUDES, c.mirror.hyper.max_steps)?;
    tables::write_scan(&ctx.path("scan.csv"), &points)?;
    if let Some(best) = best_scan_point(&points) {
        summary.add("best_amplitude", best.amplitude);
        summary.add("best_half_cycles", best.half_cycles);
        summary.add("best_duration", best.duration);
        summary.add("best_channel_fidelity", best.fidelity);
    }
    Ok(())
}

fn load_protocol(path: &Path, kind: TaskKind) -> Result<ProtocolFile> {
    let p = ProtocolFile::load(path)?;
    if p.task != kind {
        return Err(Error::invalid(format!(
            "{} holds a {} protocol, expected {}",
            path.display(),
            p.task.name(),
            kind.name()
        )));
    }
    Ok(p)
}

/// The five-region sequence from protocol files or ideal components.
pub fn build_sequence(config: &RunConfig, seq: &SequenceArgs) -> Result<InterferometerSequence> {
    let cfg = config.lattice_config();
    let i = &config.interferometer;
    if seq.ideal {
        return ideal_sequence(&cfg, i.free_time, i.ideal_component_time);
    }
    check_sequence_args("the interferometer", seq)?;
    let split = load_protocol(seq.splitter.as_deref().expect("checked"), TaskKind::Splitter)?;
    let mirror = load_protocol(seq.mirror.as_deref().expect("checked"), TaskKind::Mirror)?;
    assemble(&split.schedule, &mirror.schedule, i.free_time, i.negate, &cfg)
}

fn describe_sequence(seq: &InterferometerSequence, summary: &mut Summary) {
    let b = seq.region_boundaries();
    summary.add(
        "region_boundaries",
        b.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" "),
    );
    summary.add("total_duration", seq.total_duration());
    if let Some(n) = seq.negate {
        summary.add("recombiner_negated", n);
    }
    if let Some([keep, neg]) = seq.calibration {
        summary.add("calibration_keep", keep);
        summary.add("calibration_negate", neg);
    }
}

fn run_interferometer(ctx: &RunContext, args: &SequenceArgs, summary: &mut Summary) -> Result<()> {
    let c = &ctx.config;
    let cfg = c.lattice_config();
    let seq = build_sequence(c, args)?;
    describe_sequence(&seq, summary);
    summary.add("ground_return", ground_return(&seq, &cfg)?);
    let dists = [run(&seq, 0.0, &cfg)?, run(&seq, c.estimation.true_accel, &cfg)?];
    tables::write_outputs(&ctx.path("output.csv"), &dists)?;
    summary.add("total_variation_true_vs_zero", dists[1].total_variation(&dists[0]));
    Ok(())
}

/// Numbers shared by the `estimate` summary and the acceptance suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub fisher: f64,
    pub sigma_1000: f64,
    pub cr_1000: f64,
    pub slope: f64,
    /// Bragg bound at N = 1000 with `T` equal to the free propagation time.
    pub bragg_cr_free_time: f64,
    /// Bragg bound at N = 1000 with the Bragg sequence (`2T`) as long as
    /// the whole shaken-lattice sequence.
    pub bragg_cr_total_time: f64,
}

impl SensitivityReport {
    /// `None` when the curve does not reach 1000 atoms.
    pub fn from_curve(config: &RunConfig, seq: &InterferometerSequence, curve: &SigmaCurve) -> Option<Self> {
        let p = curve.at(1000)?;
        Some(SensitivityReport {
            fisher: curve.fisher,
            sigma_1000: p.sigma,
            cr_1000: p.cr_bound.unwrap_or(f64::INFINITY),
            slope: curve.log_slope(100, config.estimation.atoms).unwrap_or(f64::NAN),
            bragg_cr_free_time: cr_bound(bragg_fisher(config.bragg_time()), 1000)?,
            bragg_cr_total_time: cr_bound(bragg_fisher(seq.total_duration() / 2.0), 1000)?,
        })
    }

    pub fn ratio_free_time(&self) -> f64 {
        self.sigma_1000 / self.bragg_cr_free_time
    }

    pub fn ratio_total_time(&self) -> f64 {
        self.sigma_1000 / self.bragg_cr_total_time
    }
}

fn estimate(ctx: &RunContext, args: &SequenceArgs, summary: &mut Summary) -> Result<()> {
    let c = &ctx.config;
    let e = &c.estimation;
    let cfg = c.lattice_config();
    let seq = build_sequence(c, args)?;
    describe_sequence(&seq, summary);

    let grid = c.grid()?;
    let wide = build_likelihood(&seq, &grid, &cfg)?;
    tables::write_likelihood(&ctx.path("likelihood.csv"), &wide)?;
    let n_snap = e.snapshots.iter().copied().max().unwrap_or(0);
    let record = sample_measurements(&wide, e.true_accel, n_snap, c.seed)?;
    let snaps = posterior_snapshots(&wide, &record, &Posterior::uniform(grid.points), &e.snapshots)?;
    tables::write_posteriors(&ctx.path("posterior.csv"), &grid.values(), &snaps)?;

    let fine = build_likelihood(&seq, &c.fine_grid()?, &cfg)?;
    let curve = sigma_vs_n_experiment(&fine, e.true_accel, e.atoms, e.trials, c.seed)?;
    tables::write_sigma_curve(&ctx.path("sigma.csv"), &curve)?;

    summary.add("fisher_information", curve.fisher);
    if let Some(s) = curve.log_slope(100, e.atoms) {
        summary.add("log_slope", s);
    }
    if let Some(report) = SensitivityReport::from_curve(c, &seq, &curve) {
        summary.add("sigma_1000", report.sigma_1000);
        summary.add("cramer_rao_1000", report.cr_1000);
        summary.add("bragg_time", c.bragg_time());
        summary.add("bragg_cramer_rao_1000", report.bragg_cr_free_time);
        summary.add("ratio_to_bragg", report.ratio_free_time());
        summary.add("bragg_cramer_rao_1000_total_time", report.bragg_cr_total_time);
        summary.add("ratio_to_bragg_total_time", report.ratio_total_time());
    }
    Ok(())
}

/// Grid on the monotonic side of the Bragg fringe that contains
/// `true_accel`: the cosine model cannot tell `a` from `−a`.
pub fn bragg_grid(config: &RunConfig, t: f64) -> Result<AccelGrid> {
    let e = &config.estimation;
    let a = e.true_accel;
    let half_fringe = std::f64::consts::PI / (crate::estimation::BRAGG_PHASE_PER_AT2 * t * t);
    let (lo, hi) = if a < 0.0 { (-half_fringe, 0.0) } else { (0.0, half_fringe) };
    if a.abs() >= half_fringe || a == 0.0 {
        return Err(Error::invalid(format!(
            "true acceleration {a} is not inside one Bragg half-fringe (|a| < {half_fringe})"
        )));
    }
    // Grid spacing as in the fine grid, anchored so that `a` is a grid point.
    let h = e.fine_span / (e.fine_points - 1) as f64;
    let below = ((a - lo) / h).floor() as usize;
    let above = ((hi - a) / h).floor() as usize;
    let below = below.saturating_sub(1).max(1);
    let above = above.saturating_sub(1).max(1);
    AccelGrid::new(a - below as f64 * h, a + above as f64 * h, below + above + 1)
}

fn bragg_baseline(ctx: &RunContext, time: Option<f64>, summary: &mut Summary) -> Result<()> {
    let c = &ctx.config;
    let e = &c.estimation;
    let t = time.unwrap_or_else(|| c.bragg_time());
    let grid = bragg_grid(c, t)?;
    let table = bragg_table(&grid, t)?;
    let j = grid.index_of(e.true_accel).expect("grid built around the true acceleration");
    let numeric = fisher_information(&table, j)?;
    let curve = sigma_vs_n_experiment(&table, e.true_accel, e.atoms, e.trials, c.seed)?;
    tables::write_sigma_curve(&ctx.path("bragg_sigma.csv"), &curve)?;
    summary.add("bragg_time", t);
    summary.add("grid_points", grid.points);
    summary.add("fisher_analytic", bragg_fisher(t));
    summary.add("fisher_numeric", numeric);
    if let Some(s) = curve.log_slope(100, e.atoms) {
        summary.add("log_slope", s);
    }
    if let Some(p) = curve.at(1000) {
        summary.add("sigma_1000", p.sigma);
        summary.add("cramer_rao_1000", p.cr_bound.unwrap_or(f64::INFINITY));
    }
    Ok(())
}

fn export_density(ctx: &RunContext, args: &SequenceArgs, summary: &mut Summary) -> Result<()> {
    let c = &ctx.config;
    let cfg = c.lattice_config();
    let seq = build_sequence(c, args)?;
    describe_sequence(&seq, summary);
    let movie = density_movie(&seq, &cfg, &c.density_settings())?;
    tables::write_density(&ctx.path("density.csv"), &movie, c.density.x_stride)?;

    let window = crate::interferometer::branch_window(c.density.envelope_width);
    let norms = movie.norms();
    tables::write_rows(
        &ctx.path("centroids.csv"),
        &["t [1/omega_r]", "norm [1]", "centroid [1/k_L]", "left_branch [1/k_L]", "right_branch [1/k_L]"],
        movie.frames.iter().enumerate().map(|(i, f)| {
            let (l, r) = movie.branch_centroids(i, window);
            vec![
                f.t.to_string(),
                norms[i].to_string(),
                movie.centroid(i).to_string(),
                l.to_string(),
                r.to_string(),
            ]
        }),
    )?;
    let b = seq.region_boundaries();
    for (name, k) in [("free1", 1), ("free2", 3)] {
        if let Ok((l, r)) = crate::interferometer::branch_slopes(&movie, b[k], b[k + 1], window) {
            summary.add(&format!("{name}_left_velocity"), l / RECOIL_VELOCITY_SLOPE);
            summary.add(&format!("{name}_right_velocity"), r / RECOIL_VELOCITY_SLOPE);
        }
    }
    Ok(())
}
