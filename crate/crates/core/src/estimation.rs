//! Bayesian acceleration estimation, Fisher information, and the analytic
//! two-port Bragg interferometer used as a baseline.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interferometer::{run, InterferometerSequence};
use crate::lattice::LatticeConfig;

/// Outcomes with smaller probability are left out of the Fisher sum.
pub const FISHER_CUTOFF: f64 = 1e-12;

/// Phase coefficient of the Bragg interferometer in recoil units:
/// `2k_L·a·T²` with `a` in `ω_r v_r` and `T` in `ω_r⁻¹` is `4aT²`.
pub const BRAGG_PHASE_PER_AT2: f64 = 4.0;

/// Uniform acceleration grid in `ω_r v_r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl AccelGrid {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        if points < 3 {
            return Err(Error::invalid(format!("grid needs at least 3 points, got {points}")));
        }
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(Error::invalid(format!("grid bounds [{min}, {max}] are not increasing")));
        }
        Ok(AccelGrid { min, max, points })
    }

    /// `points` values centred on `center` with the given spacing.
    pub fn centered(center: f64, spacing: f64, points: usize) -> Result<Self> {
        let half = spacing * (points.saturating_sub(1)) as f64 / 2.0;
        Self::new(center - half, center + half, points)
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.points - 1) as f64
    }

    pub fn value(&self, j: usize) -> f64 {
        if j + 1 == self.points {
            self.max
        } else {
            self.min + j as f64 * self.spacing()
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.value(j)).collect()
    }

    /// Index of the grid point equal to `a` (to 1e−6 of a spacing).
    pub fn index_of(&self, a: f64) -> Option<usize> {
        let x = (a - self.min) / self.spacing();
        let j = x.round();
        if j < 0.0 || j >= self.points as f64 || (x - j).abs() > 1e-6 {
            return None;
        }
        Some(j as usize)
    }
}

impl Default for AccelGrid {
    fn default() -> Self {
        AccelGrid {
            min: -0.01,
            max: 0.01,
            points: 401,
        }
    }
}

/// `P(outcome | a_j)` for every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodTable {
    pub grid: AccelGrid,
    /// Label of each outcome column (comb index, or ±1 for Bragg ports).
    pub labels: Vec<i64>,
    pub rows: Vec<Vec<f64>>,
}

impl LikelihoodTable {
    /// Checks shape, nonnegativity and row normalisation (1e−9).
    pub fn from_rows(grid: AccelGrid, labels: Vec<i64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != grid.points {
            return Err(Error::invalid("one likelihood row per grid point required"));
        }
        for (j, r) in rows.iter().enumerate() {
            if r.len() != labels.len() {
                return Err(Error::invalid(format!("row {j} has {} entries, expected {}", r.len(), labels.len())));
            }
            if r.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
                return Err(Error::invalid(format!("row {j} has a negative or non-finite entry")));
            }
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("row {j} sums to {s}")));
            }
        }
        Ok(LikelihoodTable { grid, labels, rows })
    }

    pub fn outcomes(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.rows[j]
    }
}

/// Runs the interferometer at every grid acceleration (in parallel).
pub fn build_likelihood(seq: &InterferometerSequence, grid: &AccelGrid, cfg: &LatticeConfig) -> Result<LikelihoodTable> {
    let rows = grid
        .values()
        .into_par_iter()
        .map(|a| run(seq, a, cfg).map(|d| d.probabilities))
        .collect::<Result<Vec<_>>>()?;
    let n = cfg.n_max as i64;
    LikelihoodTable::from_rows(*grid, (-n..=n).collect(), rows)
}

/// `P(±) = (1 ± cos(4aT²))/2`, as `[P(+), P(−)]`.
pub fn bragg_baseline(a: f64, t: f64) -> Result<[f64; 2]> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::invalid(format!("Bragg interrogation time {t} must be > 0")));
    }
    let c = (BRAGG_PHASE_PER_AT2 * a * t * t).cos();
    Ok([(1.0 + c) / 2.0, (1.0 - c) / 2.0])
}

/// Fisher information of the Bragg model, `(4T²)²` for every `a`.
pub fn bragg_fisher(t: f64) -> f64 {
    (BRAGG_PHASE_PER_AT2 * t * t).powi(2)
}

pub fn bragg_table(grid: &AccelGrid, t: f64) -> Result<LikelihoodTable> {
    let rows = grid
        .values()
        .into_iter()
        .map(|a| bragg_baseline(a, t).map(|p| p.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    LikelihoodTable::from_rows(*grid, vec![1, -1], rows)
}

/// Sampled outcome columns and where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub outcomes: Vec<usize>,
    pub seed: u64,
    pub true_accel: f64,
}

impl MeasurementRecord {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }
}

fn true_row(table: &LikelihoodTable, a: f64) -> Result<usize> {
    table
        .grid
        .index_of(a)
        .ok_or_else(|| Error::invalid(format!("true acceleration {a} is not a grid point")))
}

fn sample_with(table: &LikelihoodTable, j: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(table.row(j)).map_err(|e| Error::invalid(format!("row {j}: {e}")))?;
    Ok((0..n).map(|_| dist.sample(rng)).collect())
}

/// `n` independent draws from the row of `true_accel`.
pub fn sample_measurements(table: &LikelihoodTable, true_accel: f64, n: usize, seed: u64) -> Result<MeasurementRecord> {
    let j = true_row(table, true_accel)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(MeasurementRecord {
        outcomes: sample_with(table, j, n, &mut rng)?,
        seed,
        true_accel,
    })
}

/// Probability mass over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub probs: Vec<f64>,
}

impl Posterior {
    pub fn uniform(points: usize) -> Self {
        Posterior {
            probs: vec![1.0 / points as f64; points],
        }
    }
}

/// Sequential Bayes updates in log space.
#[derive(Debug, Clone)]
struct LogPosterior {
    log: Vec<f64>,
    count: usize,
}

impl LogPosterior {
    fn new(prior: &Posterior) -> Self {
        LogPosterior {
            log: prior.probs.iter().map(|p| p.ln()).collect(),
            count: 0,
        }
    }

    fn update(&mut self, table: &LikelihoodTable, outcome: usize) -> Result<()> {
        for (l, row) in self.log.iter_mut().zip(&table.rows) {
            *l += row[outcome].ln();
        }
        self.count += 1;
        let max = self.log.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::DegenerateEvidence { measurements: self.count });
        }
        let lse = max + self.log.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        for l in &mut self.log {
            *l -= lse;
        }
        Ok(())
    }

    fn posterior(&self) -> Posterior {
        let mut probs: Vec<f64> = self.log.iter().map(|l| l.exp()).collect();
        let s: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= s;
        }
        Posterior { probs }
    }
}

fn check_prior(table: &LikelihoodTable, prior: &Posterior) -> Result<()> {
    if prior.probs.len() != table.grid.points {
        return Err(Error::invalid("prior and grid sizes differ"));
    }
    let s: f64 = prior.probs.iter().sum();
    if (s - 1.0).abs() > 1e-9 || prior.probs.iter().any(|&p| p < 0.0) {
        return Err(Error::invalid("prior is not a normalised distribution"));
    }
    Ok(())
}

/// `P(a | p₁…p_N) ∝ P(p_N|a)…P(p₁|a) P(a)`.
pub fn bayes_posterior(table: &LikelihoodTable, record: &MeasurementRecord, prior: &Posterior) -> Result<Posterior> {
    check_prior(table, prior)?;
    let mut lp = LogPosterior::new(prior);
    for &o in &record.outcomes {
        if o >= table.outcomes() {
            return Err(Error::invalid(format!("outcome {o} out of range")));
        }
        lp.update(table, o)?;
    }
    Ok(lp.posterior())
}

/// Posteriors after the first `n` measurements for each `n` in `checkpoints`.
pub fn posterior_snapshots(
    table: &LikelihoodTable,
    record: &MeasurementRecord,
    prior: &Posterior,
    checkpoints: &[usize],
) -> Result<Vec<(usize, Posterior)>> {
    check_prior(table, prior)?;
    let mut lp = LogPosterior::new(prior);
    let mut out = Vec::new();
    let mut wanted: Vec<usize> = checkpoints.to_vec();
    wanted.sort_unstable();
    wanted.dedup();
    let mut next = wanted.iter().peekable();
    while next.peek() == Some(&&0) {
        out.push((0, lp.posterior()));
        next.next();
    }
    for (i, &o) in record.outcomes.iter().enumerate() {
        lp.update(table, o)?;
        while next.peek() == Some(&&(i + 1)) {
            out.push((i + 1, lp.posterior()));
            next.next();
        }
    }
    Ok(out)
}

/// Mean and standard deviation of the posterior over the grid.
pub fn posterior_mean_std(posterior: &Posterior, grid: &AccelGrid) -> (f64, f64) {
    let xs = grid.values();
    let mean: f64 = posterior.probs.iter().zip(&xs).map(|(p, x)| p * x).sum();
    let var: f64 = posterior.probs.iter().zip(&xs).map(|(p, x)| p * (x - mean).powi(2)).sum();
    (mean, var.max(0.0).sqrt())
}

/// `I₁(a_j) = Σ_p (∂P/∂a)² / P` with a central difference over rows `j ± 1`.
pub fn fisher_information(table: &LikelihoodTable, j: usize) -> Result<f64> {
    if j == 0 || j + 1 >= table.grid.points {
        return Err(Error::invalid(format!("Fisher information needs an interior grid index, got {j}")));
    }
    let h2 = 2.0 * table.grid.spacing();
    let (lo, mid, hi) = (&table.rows[j - 1], &table.rows[j], &table.rows[j + 1]);
    Ok((0..table.outcomes())
        .filter(|&k| mid[k] >= FISHER_CUTOFF)
        .map(|k| {
            let d = (hi[k] - lo[k]) / h2;
            d * d / mid[k]
        })
        .sum())
}

/// `1/√(N I₁)`, or `None` when `I₁ = 0` (no bound).
pub fn cr_bound(fisher: f64, n: usize) -> Option<f64> {
    if fisher > 0.0 && n > 0 {
        Some(1.0 / (n as f64 * fisher).sqrt())
    } else {
        None
    }
}

/// `1, 2, 5, 10, 20, 50, …` up to and including `n_max`.
pub fn log_ladder(n_max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut decade = 1;
    'outer: loop {
        for m in [1, 2, 5] {
            let n = m * decade;
            if n >= n_max {
                break 'outer;
            }
            out.push(n);
        }
        decade *= 10;
    }
    out.push(n_max);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaPoint {
    pub n: usize,
    /// Posterior standard deviation averaged over trials.
    pub sigma: f64,
    /// Standard error of that average.
    pub sigma_sem: f64,
    pub mean_estimate: f64,
    /// Root-mean-square error of the posterior mean.
    pub rms_error: f64,
    /// Cramér-Rao bound at the true acceleration, if defined.
    pub cr_bound: Option<f64>,
}

impl SigmaPoint {
    /// Sampling error of `rms_error` over `trials` records, `rms/√(2·trials)`.
    pub fn rms_error_sem(&self, trials: usize) -> f64 {
        self.rms_error / (2.0 * trials as f64).sqrt()
    }

    /// The spread of the estimates does not undercut the Cramér-Rao bound
    /// by more than three standard errors. Holds trivially without a bound.
    pub fn cramer_rao_consistent(&self, trials: usize) -> bool {
        self.cr_bound
            .is_none_or(|cr| self.rms_error >= cr - 3.0 * self.rms_error_sem(trials))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaCurve {
    pub true_accel: f64,
    pub fisher: f64,
    pub trials: usize,
    pub points: Vec<SigmaPoint>,
}

impl SigmaCurve {
    /// Least-squares slope of `ln σ` against `ln N` for `lo ≤ N ≤ hi`.
    pub fn log_slope(&self, lo: usize, hi: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|p| p.n >= lo && p.n <= hi && p.sigma > 0.0)
            .map(|p| ((p.n as f64).ln(), p.sigma.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }

    pub fn at(&self, n: usize) -> Option<&SigmaPoint> {
        self.points.iter().find(|p| p.n == n)
    }
}

/// Posterior width versus number of atoms, averaged over `trials`
/// independent records drawn at `true_accel`, with a uniform prior.
pub fn sigma_vs_n_experiment(
    table: &LikelihoodTable,
    true_accel: f64,
    n_max: usize,
    trials: usize,
    seed: u64,
) -> Result<SigmaCurve> {
    if n_max < 100 {
        return Err(Error::invalid("sigma-vs-N needs N_max >= 100"));
    }
    if trials == 0 {
        return Err(Error::invalid("at least one trial required"));
    }
    let j = true_row(table, true_accel)?;
    let fisher = if j > 0 && j + 1 < table.grid.points { fisher_information(table, j)? } else { 0.0 };
    let ladder = log_ladder(n_max);
    let prior = Posterior::uniform(table.grid.points);

    let per_trial = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let outcomes = sample_with(table, j, n_max, &mut rng)?;
            let record = MeasurementRecord { outcomes, seed, true_accel };
            let snaps = posterior_snapshots(table, &record, &prior, &ladder)?;
            Ok(snaps
                .into_iter()
                .map(|(_, p)| posterior_mean_std(&p, &table.grid))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let points = ladder
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let t = trials as f64;
            let sigmas: Vec<f64> = per_trial.iter().map(|r| r[k].1).collect();
            let means: Vec<f64> = per_trial.iter().map(|r| r[k].0).collect();
            let sigma = sigmas.iter().sum::<f64>() / t;
            let sd = if trials > 1 {
                (sigmas.iter().map(|s| (s - sigma).powi(2)).sum::<f64>() / (t - 1.0)).sqrt()
            } else {
                0.0
            };
            SigmaPoint {
                n,
                sigma,
                sigma_sem: sd / t.sqrt(),
                mean_estimate: means.iter().sum::<f64>() / t,
                rms_error: (means.iter().map(|m| (m - true_accel).powi(2)).sum::<f64>() / t).sqrt(),
                cr_bound: cr_bound(fisher, n),
            }
        })
        .collect();
    Ok(SigmaCurve {
        true_accel,
        fisher,
        trials,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::ideal_sequence;
    use rand::seq::SliceRandom;

    fn two_point() -> LikelihoodTable {
        // Two grid points are not a valid AccelGrid, so pad with a third
        // that the prior excludes.
        let grid = AccelGrid::new(0.0, 2.0, 3).unwrap();
        LikelihoodTable::from_rows(grid, vec![0, 1], vec![vec![0.8, 0.2], vec![0.2, 0.8], vec![0.5, 0.5]]).unwrap()
    }

    #[test]
    fn grid_checks() {
        assert!(AccelGrid::new(0.0, 1.0, 1).is_err());
        assert!(AccelGrid::new(1.0, 0.0, 5).is_err());
        let g = AccelGrid::default();
        assert_eq!(g.points, 401);
        assert!((g.spacing() - 5e-5).abs() < 1e-15);
        assert_eq!(g.index_of(-3e-4), Some(194));
        assert_eq!(g.index_of(-3.1e-4), None);
        let c = AccelGrid::centered(-3e-4, 1e-6, 801).unwrap();
        assert_eq!(c.index_of(-3e-4), Some(400));
    }

    #[test]
    fn bayes_two_point_arithmetic() {
        let t = two_point();
        let prior = Posterior { probs: vec![0.5, 0.5, 0.0] };
        let rec = MeasurementRecord { outcomes: vec![0], seed: 0, true_accel: 0.0 };
        let post = bayes_posterior(&t, &rec, &prior).unwrap();
        assert!((post.probs[0] - 0.8).abs() < 1e-15);
        assert!((post.probs[1] - 0.2).abs() < 1e-15);
        assert_eq!(post.probs[2], 0.0);
        let empty = MeasurementRecord { outcomes: vec![], seed: 0, true_accel: 0.0 };
        assert_eq!(bayes_posterior(&t, &empty, &prior).unwrap(), prior);
    }

    #[test]
    fn posterior_ignores_measurement_order() {
        let grid = AccelGrid::new(-0.01, 0.01, 101).unwrap();
        let t = bragg_table(&grid, 10.0).unwrap();
        let mut rec = sample_measurements(&t, grid.value(30), 2000, 3).unwrap();
        let prior = Posterior::uniform(101);
        let a = bayes_posterior(&t, &rec, &prior).unwrap();
        rec.outcomes.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
        let b = bayes_posterior(&t, &rec, &prior).unwrap();
        let diff = a.probs.iter().zip(&b.probs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "{diff}");
        assert!((a.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn impossible_evidence_is_reported() {
        let grid = AccelGrid::new(0.0, 1.0, 3).unwrap();
        let t = LikelihoodTable::from_rows(grid, vec![0, 1], vec![vec![1.0, 0.0]; 3]).unwrap();
        let rec = MeasurementRecord { outcomes: vec![0, 1], seed: 0, true_accel: 0.0 };
        assert!(matches!(
            bayes_posterior(&t, &rec, &Posterior::uniform(3)),
            Err(Error::DegenerateEvidence { measurements: 2 })
        ));
    }

    #[test]
    fn sampling_statistics() {
        let grid = AccelGrid::new(0.0, 1.0, 3).unwrap();
        let certain = LikelihoodTable::from_rows(grid, vec![0, 1], vec![vec![1.0, 0.0]; 3]).unwrap();
        assert!(sample_measurements(&certain, 0.5, 100, 1).unwrap().outcomes.iter().all(|&o| o == 0));
        assert!(sample_measurements(&certain, 0.3, 10, 1).is_err());

        let p = [0.1, 0.25, 0.4, 0.25];
        let t = LikelihoodTable::from_rows(grid, vec![-1, 0, 1, 2], vec![p.to_vec(); 3]).unwrap();
        let n = 10_000;
        let rec = sample_measurements(&t, 1.0, n, 5).unwrap();
        assert_eq!(rec, sample_measurements(&t, 1.0, n, 5).unwrap());
        for (k, &pk) in p.iter().enumerate() {
            let c = rec.outcomes.iter().filter(|&&o| o == k).count() as f64;
            let sd = (n as f64 * pk * (1.0 - pk)).sqrt();
            assert!((c - n as f64 * pk).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn moments() {
        let g = AccelGrid::new(-1.0, 1.0, 1001).unwrap();
        let mut point = Posterior { probs: vec![0.0; 1001] };
        point.probs[700] = 1.0;
        let (m, s) = posterior_mean_std(&point, &g);
        assert!((m - g.value(700)).abs() < 1e-15 && s == 0.0);
        let mut two = Posterior { probs: vec![0.0; 1001] };
        two.probs[250] = 0.5;
        two.probs[750] = 0.5;
        let (m, s) = posterior_mean_std(&two, &g);
        assert!(m.abs() < 1e-15 && (s - 0.5).abs() < 1e-12);
        let (m, s) = posterior_mean_std(&Posterior::uniform(1001), &g);
        assert!(m.abs() < 1e-12);
        assert!((s - 1.0 / 3f64.sqrt()).abs() < 0.01 / 3f64.sqrt());
    }

    #[test]
    fn fisher_of_analytic_models() {
        let g = AccelGrid::new(-1.0, 1.0, 11).unwrap();
        let flat = LikelihoodTable::from_rows(g, vec![0, 1], vec![vec![0.3, 0.7]; 11]).unwrap();
        assert_eq!(fisher_information(&flat, 5).unwrap(), 0.0);
        assert!(fisher_information(&flat, 0).is_err());
        assert!(fisher_information(&flat, 10).is_err());

        let t = 10.0;
        let g = AccelGrid::centered(-3e-4, 1e-6, 21).unwrap();
        let table = bragg_table(&g, t).unwrap();
        let i1 = fisher_information(&table, 10).unwrap();
        let expect = bragg_fisher(t);
        assert!(((i1 - expect) / expect).abs() < 1e-6, "{i1} vs {expect}");

        // A zero-probability outcome is skipped, leaving I₁ finite.
        let g0 = AccelGrid::centered(0.0, 1e-6, 21).unwrap();
        let at_zero = bragg_table(&g0, t).unwrap();
        assert!(fisher_information(&at_zero, 10).unwrap().is_finite());
    }

    #[test]
    fn bragg_ports() {
        assert_eq!(bragg_baseline(0.0, 10.0).unwrap(), [1.0, 0.0]);
        let t = 3.0;
        let a = std::f64::consts::PI / (BRAGG_PHASE_PER_AT2 * t * t);
        let p = bragg_baseline(a, t).unwrap();
        assert!(p[0].abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
        assert!(bragg_baseline(0.0, 0.0).is_err());
    }

    #[test]
    fn cramer_rao() {
        assert_eq!(cr_bound(4.0, 1), Some(0.5));
        assert_eq!(cr_bound(4.0, 4), Some(0.25));
        assert_eq!(cr_bound(0.0, 10), None);
        // (2k_L T²)⁻¹ with T = 10 in recoil units.
        let b = cr_bound(bragg_fisher(10.0), 1).unwrap();
        assert!((b - 1.0 / 400.0).abs() < 1e-15);
    }

    #[test]
    fn ladder() {
        assert_eq!(log_ladder(100), vec![1, 2, 5, 10, 20, 50, 100]);
        assert_eq!(log_ladder(300), vec![1, 2, 5, 10, 20, 50, 100, 200, 300]);
    }

    #[test]
    fn sigma_curve_scales_like_inverse_root_n() {
        // The Bragg fringe is even in a; keep the grid on one monotonic branch.
        let t = 10.0;
        let grid = AccelGrid::new(-6e-3, -2e-3, 401).unwrap();
        let table = bragg_table(&grid, t).unwrap();
        let a = grid.value(200);
        let curve = sigma_vs_n_experiment(&table, a, 2000, 16, 1).unwrap();
        let slope = curve.log_slope(100, 2000).unwrap();
        assert!((slope + 0.5).abs() < 0.1, "slope {slope}");
        for p in curve.points.iter().filter(|p| p.n >= 100) {
            assert!(p.cramer_rao_consistent(curve.trials), "{p:?}");
            assert!(p.sigma < 1.5 * p.cr_bound.unwrap(), "{p:?}");
        }
        let again = sigma_vs_n_experiment(&table, a, 100, 1, 4).unwrap();
        assert_eq!(again, sigma_vs_n_experiment(&table, a, 100, 1, 4).unwrap());
    }

    #[test]
    fn likelihood_rows_of_ideal_sequence() {
        let cfg = LatticeConfig::default();
        let seq = ideal_sequence(&cfg, 10.0, 1.0).unwrap();
        let grid = AccelGrid::new(-2e-3, 2e-3, 5).unwrap();
        let t = build_likelihood(&seq, &grid, &cfg).unwrap();
        for r in &t.rows {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let direct = run(&seq, grid.value(3), &cfg).unwrap();
        assert_eq!(t.rows[3], direct.probabilities);
        assert!(fisher_information(&t, 2).unwrap() > 0.0);
    }
}
