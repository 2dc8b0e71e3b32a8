//! Trains the beam-splitter agent and prints the best protocol found.
//!
//! cargo run --release --example train_splitter -- [episodes] [seed]

use std::time::Instant;

use shaken_lattice::dqn::{train_with_progress, Hyperparameters};
use shaken_lattice::lattice::LatticeConfig;
use shaken_lattice::tasks::{SplitterSettings, SplitterTask};

fn main() -> shaken_lattice::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes = args.next().map_or(2000, |s| s.parse().expect("episodes"));
    let seed = args.next().map_or(0, |s| s.parse().expect("seed"));

    let hyper = Hyperparameters { episodes, ..Hyperparameters::splitter() };
    let mut task = SplitterTask::new(&LatticeConfig::default(), SplitterSettings::default())?;
    let start = Instant::now();
    let mut best = 0.0f64;
    let out = train_with_progress(&mut task, &hyper, seed, |ep| {
        best = best.max(ep.fidelity);
        if (ep.episode + 1) % 500 == 0 {
            println!(
                "episode {:>6}  eps {:.3}  F {:.4}  best {:.4}  steps {:>2}  loss {:.3e}  {:.1}s",
                ep.episode + 1,
                ep.epsilon,
                ep.fidelity,
                best,
                ep.steps,
                ep.mean_loss,
                start.elapsed().as_secs_f64()
            );
        }
    })?;
    let rec = &out.record;
    println!("best fidelity {:.4} at episode {:?}", rec.best_fidelity, rec.best_episode);
    let idx: Vec<String> = rec.best_actions.iter().map(|a| a.to_string()).collect();
    println!("actions: {}", idx.join(" "));
    if let Some(p) = out.best_protocol {
        let phases: Vec<String> = p.segments().iter().map(|s| format!("{:.3}", s.phase_at(0.0))).collect();
        println!("{} steps: {}", p.len(), phases.join(" "));
    }
    Ok(())
}
