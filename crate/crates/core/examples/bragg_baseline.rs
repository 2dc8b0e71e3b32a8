//! The two-port Bragg interferometer: numeric Fisher information against
//! (4T^2)^2 and the width of the Bayesian posterior against N.
//!
//! cargo run --release --example bragg_baseline -- [T]

use shaken_lattice::estimation::{bragg_fisher, bragg_table, fisher_information, sigma_vs_n_experiment, AccelGrid};

fn main() -> shaken_lattice::Result<()> {
    let t: f64 = std::env::args().nth(1).map_or(10.0, |s| s.parse().expect("T"));
    // P(+) = (1 + cos 4aT^2)/2 cannot tell a from -a, so the grid stays on
    // one side of zero, inside a single fringe.
    let a_true = -0.2 / (t * t);
    let grid = AccelGrid::centered(a_true, 1e-6 * (10.0 / t).powi(2), 3801)?;
    let table = bragg_table(&grid, t)?;
    let numeric = fisher_information(&table, grid.index_of(a_true).expect("on grid"))?;
    println!("T = {t}: Fisher information numeric {numeric:.6e}, analytic {:.6e}", bragg_fisher(t));

    let curve = sigma_vs_n_experiment(&table, a_true, 10_000, 10, 1)?;
    println!("     N   sigma       Cramer-Rao");
    for p in &curve.points {
        println!("{:>6}   {:.3e}   {:.3e}", p.n, p.sigma, p.cr_bound.unwrap_or(f64::INFINITY));
    }
    if let Some(s) = curve.log_slope(100, 10_000) {
        println!("log-log slope for N >= 100: {s:.3}");
    }
    Ok(())
}
