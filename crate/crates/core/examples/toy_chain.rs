//! Double deep Q-learning on a four-state chain, checked against value
//! iteration.
//!
//! cargo run --release --example toy_chain

use shaken_lattice::dqn::toy::{value_iteration, ChainMdp};
use shaken_lattice::dqn::{greedy_action, train, Hyperparameters};
use shaken_lattice::neural_net::forward;

fn main() -> shaken_lattice::Result<()> {
    let gamma = 0.9;
    let hyper = Hyperparameters {
        gamma,
        tau: 0.95,
        learning_rate: 3e-3,
        episodes: 1500,
        epsilon_decay: 1e-3,
        epsilon_floor: 0.05,
        hidden: 32,
        batch: 32,
        max_steps: 20,
        ..Hyperparameters::splitter()
    };
    let mut env = ChainMdp::new(4, hyper.max_steps);
    let out = train(&mut env, &hyper, 4)?;
    let (values, policy) = value_iteration(&env, gamma);

    println!("state  V*      Q(left)  Q(right)  greedy  optimal");
    for s in env.interior_states() {
        let obs = env.observation_of(s);
        let q = forward(&out.online, &obs)?;
        println!(
            "{s:>5}  {:.3}   {:.3}    {:.3}     {}       {}",
            values[s],
            q[0],
            q[1],
            greedy_action(&out.online, &obs),
            policy[s]
        );
    }
    Ok(())
}
