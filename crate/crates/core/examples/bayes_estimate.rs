//! Bayesian estimate of an acceleration from simulated single-atom momentum
//! measurements, using the ideal-component interferometer.
//!
//! cargo run --release --example bayes_estimate -- [atoms] [seed]

use shaken_lattice::estimation::{
    build_likelihood, fisher_information, posterior_mean_std, posterior_snapshots, sample_measurements, AccelGrid,
    Posterior,
};
use shaken_lattice::interferometer::ideal_sequence;
use shaken_lattice::lattice::LatticeConfig;

fn main() -> shaken_lattice::Result<()> {
    let mut args = std::env::args().skip(1);
    let atoms: usize = args.next().map_or(1000, |s| s.parse().expect("atoms"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let a_true = -3e-4;

    let cfg = LatticeConfig::default();
    let seq = ideal_sequence(&cfg, 10.0, 1.0)?;
    // Fine grid around the true value so the posterior stays resolved.
    let grid = AccelGrid::centered(a_true, 2e-6, 401)?;
    let table = build_likelihood(&seq, &grid, &cfg)?;
    let fisher = fisher_information(&table, grid.index_of(a_true).expect("on grid"))?;

    let record = sample_measurements(&table, a_true, atoms, seed)?;
    let mut checkpoints = vec![1, 10, 100, atoms];
    checkpoints.dedup();
    let snaps = posterior_snapshots(&table, &record, &Posterior::uniform(grid.points), &checkpoints)?;
    println!("true a = {a_true:e} omega_r v_r, Fisher information {fisher:.4e}");
    println!("     N   mean            sigma       1/sqrt(N I)");
    for (n, post) in &snaps {
        let (mean, std) = posterior_mean_std(post, &grid);
        println!("{n:>6}   {mean:>12.4e}   {std:.3e}   {:.3e}", 1.0 / (*n as f64 * fisher).sqrt());
    }
    Ok(())
}
