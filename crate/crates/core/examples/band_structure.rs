//! Bloch bands of the static lattice at zero quasimomentum, and the
//! splitter target.
//!
//! cargo run --release --example band_structure -- [depth]

use shaken_lattice::lattice::{bloch_eigensystem, LatticeConfig};
use shaken_lattice::tasks::SPLITTER_TARGET_BAND;

fn main() -> shaken_lattice::Result<()> {
    let depth = std::env::args().nth(1).map_or(10.0, |s| s.parse().expect("depth"));
    let cfg = LatticeConfig::default().with_depth(depth);
    let bands = bloch_eigensystem(&cfg)?;

    println!("V0 = {depth} E_r, comb n in [-{0}, {0}]", cfg.n_max);
    println!("band  energy [E_r]   populations n = -3..3");
    for b in 0..6 {
        let s = bands.band(b);
        let pops: Vec<String> = (-3..=3).map(|n| format!("{:.3}", s.population(n))).collect();
        println!("{b:>4}  {:>12.4}   {}", bands.energies[b], pops.join(" "));
    }

    let t = bands.band(SPLITTER_TARGET_BAND);
    let odd = (t.amplitude(2) - t.amplitude(-2)).norm() / 2f64.sqrt();
    println!("band {SPLITTER_TARGET_BAND} overlap with (|+4> - |-4>)/sqrt2: {:.4}", odd * odd);
    Ok(())
}
