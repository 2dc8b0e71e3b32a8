//! Interferometer assembled from learned splitter and mirror protocols,
//! with the recombiner obtained by time reversal. Prints the ground-band
//! return and the branch velocities seen in the real-space density.
//!
//! cargo run --release --example learned_interferometer -- [splitter.protocol] [mirror.protocol]

use std::path::PathBuf;

use shaken_lattice::interferometer::{assemble, branch_slopes, branch_window, density_movie, ground_return, NegatePolicy, RECOIL_VELOCITY_SLOPE};
use shaken_lattice::io::ProtocolFile;
use shaken_lattice::lattice::{DensitySettings, LatticeConfig};

fn main() -> shaken_lattice::Result<()> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    let mut args = std::env::args().skip(1);
    let split = args.next().map_or(data.join("splitter.protocol"), PathBuf::from);
    let mirror = args.next().map_or(data.join("mirror.protocol"), PathBuf::from);
    let split = ProtocolFile::load(&split)?;
    let mirror = ProtocolFile::load(&mirror)?;
    println!(
        "splitter: {} steps, fidelity {:?}; mirror: {} half-cycles, fidelity {:?}",
        split.schedule.len(),
        split.fidelity,
        mirror.schedule.len(),
        mirror.fidelity
    );

    let cfg = LatticeConfig::default();
    let seq = assemble(&split.schedule, &mirror.schedule, 10.0, NegatePolicy::Calibrate, &cfg)?;
    println!("recombiner negated: {:?}, calibration {:?}", seq.negate, seq.calibration);
    println!("ground-band return at a = 0: {:.4}", ground_return(&seq, &cfg)?);

    let settings = DensitySettings::default();
    let movie = density_movie(&seq, &cfg, &settings)?;
    let b = seq.region_boundaries();
    let window = branch_window(settings.envelope_width);
    for (name, k) in [("free propagation I", 1), ("free propagation II", 3)] {
        let (l, r) = branch_slopes(&movie, b[k], b[k + 1], window)?;
        println!(
            "{name}: left branch {:+.2} v_r, right branch {:+.2} v_r",
            l / RECOIL_VELOCITY_SLOPE,
            r / RECOIL_VELOCITY_SLOPE
        );
    }
    Ok(())
}
