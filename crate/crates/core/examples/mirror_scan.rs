//! Fixed-amplitude mirror drive: channel fidelity against duration for each
//! amplitude of the action set.
//!
//! cargo run --release --example mirror_scan

use shaken_lattice::lattice::LatticeConfig;
use shaken_lattice::tasks::{best_scan_point, fixed_amplitude_scan, MIRROR_AMPLITUDES};

fn main() -> shaken_lattice::Result<()> {
    let points = fixed_amplitude_scan(&LatticeConfig::default(), &MIRROR_AMPLITUDES, 16)?;
    for &amp in &MIRROR_AMPLITUDES {
        let row: Vec<String> = points
            .iter()
            .filter(|p| p.amplitude == amp)
            .map(|p| format!("{:.2}", p.fidelity))
            .collect();
        println!("A = {amp:.1}: {}", row.join(" "));
    }
    let best = best_scan_point(&points).expect("non-empty scan");
    println!(
        "best: A = {} for {} half-cycles ({:.3} / omega_r), channel fidelity {:.4}",
        best.amplitude, best.half_cycles, best.duration, best.fidelity
    );
    Ok(())
}
