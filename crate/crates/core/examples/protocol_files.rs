//! Saving and loading phase protocols and network checkpoints.
//!
//! cargo run --release --example protocol_files

use shaken_lattice::dqn::Hyperparameters;
use shaken_lattice::io::{Checkpoint, ProtocolFile, TaskKind};
use shaken_lattice::lattice::PhaseSchedule;
use shaken_lattice::neural_net::{init_params, AdamState};

fn main() -> shaken_lattice::Result<()> {
    let dir = std::env::temp_dir().join("shaken-lattice-protocol-demo");
    std::fs::create_dir_all(&dir).expect("temp dir");

    let phases = [0.0, -std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, -std::f64::consts::PI];
    let mut file = ProtocolFile::new(TaskKind::Splitter, PhaseSchedule::piecewise_constant(&phases, 0.25)?);
    file.seed = Some(3);
    file.fidelity = Some(0.5);
    file.hyper = Some(Hyperparameters::splitter());
    let path = dir.join("demo.protocol");
    file.save(&path)?;
    print!("{}", std::fs::read_to_string(&path).expect("just written"));
    assert_eq!(ProtocolFile::load(&path)?, file);

    let online = init_params(7, 98, 5, 0)?;
    let ckpt = Checkpoint { target: online.clone(), adam: AdamState::new(&online), online };
    let path = dir.join("demo.bin");
    ckpt.save(&path)?;
    let bytes = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
    println!("checkpoint: {bytes} bytes, round trip exact: {}", Checkpoint::load(&path)? == ckpt);
    Ok(())
}
