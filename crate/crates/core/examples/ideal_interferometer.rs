//! Five-region interferometer built from ideal components: ground-band
//! return at rest and the output momentum distribution under acceleration.
//!
//! cargo run --release --example ideal_interferometer -- [free_time]

use shaken_lattice::interferometer::{ground_return, ideal_sequence, run};
use shaken_lattice::lattice::LatticeConfig;

fn main() -> shaken_lattice::Result<()> {
    let free_time = std::env::args().nth(1).map_or(10.0, |s| s.parse().expect("free time"));
    let cfg = LatticeConfig::default();
    let seq = ideal_sequence(&cfg, free_time, 1.0)?;
    println!("total duration {:.2} / omega_r", seq.total_duration());
    println!("ground-band return at a = 0: {:.10}", ground_return(&seq, &cfg)?);

    println!("a [omega_r v_r]   P(-4)   P(-2)   P(0)    P(+2)   P(+4)  [hbar k_L]");
    for a in [0.0, -3e-4, -1e-3, -3e-3, 3e-3] {
        let d = run(&seq, a, &cfg)?;
        let p: Vec<String> = (-2..=2).map(|n| format!("{:.4}", d.probability(n))).collect();
        println!("{a:>14.1e}   {}", p.join("  "));
    }
    Ok(())
}
