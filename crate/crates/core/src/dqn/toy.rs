//! A four-state deterministic chain, small enough to solve exactly.
//!
//! Interior states `0..4` sit between two absorbing ends. Action 0 moves
//! left, action 1 moves right. Falling off the left end pays
//! [`LEFT_REWARD`], off the right end [`RIGHT_REWARD`]; nothing else pays.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Environment, StepOutcome};
use crate::error::{Error, Result};

pub const CHAIN_STATES: usize = 4;
pub const LEFT_REWARD: f64 = 0.75;
pub const RIGHT_REWARD: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct ChainMdp {
    rng: ChaCha8Rng,
    max_steps: usize,
    pos: usize,
    steps: usize,
    done: bool,
    last_reward: f64,
    actions: Vec<usize>,
}

impl ChainMdp {
    /// Episodes start in a uniformly random interior state.
    pub fn new(seed: u64, max_steps: usize) -> Self {
        ChainMdp {
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_steps,
            pos: 0,
            steps: 0,
            done: true,
            last_reward: 0.0,
            actions: Vec::new(),
        }
    }

    pub fn interior_states(&self) -> std::ops::Range<usize> {
        0..CHAIN_STATES
    }

    pub fn observation_of(&self, s: usize) -> Vec<f64> {
        let mut v = vec![0.0; CHAIN_STATES];
        v[s] = 1.0;
        v
    }

    /// `(state, action, reward)` for the two moves that end an episode.
    pub fn terminal_moves(&self) -> [(usize, usize, f64); 2] {
        [(0, 0, LEFT_REWARD), (CHAIN_STATES - 1, 1, RIGHT_REWARD)]
    }

    /// `(next interior state or None, reward)`.
    pub fn transition(s: usize, a: usize) -> (Option<usize>, f64) {
        match (s, a) {
            (0, 0) => (None, LEFT_REWARD),
            (s, 0) => (Some(s - 1), 0.0),
            (s, _) if s + 1 == CHAIN_STATES => (None, RIGHT_REWARD),
            (s, _) => (Some(s + 1), 0.0),
        }
    }
}

impl Environment for ChainMdp {
    type Protocol = Vec<usize>;

    fn observation_dim(&self) -> usize {
        CHAIN_STATES
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn reset(&mut self) -> Vec<f64> {
        self.pos = self.rng.gen_range(0..CHAIN_STATES);
        self.steps = 0;
        self.done = false;
        self.last_reward = 0.0;
        self.actions.clear();
        self.observation_of(self.pos)
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::InvalidState("step after episode end".into()));
        }
        if action >= 2 {
            return Err(Error::invalid(format!("action {action} out of range")));
        }
        self.steps += 1;
        self.actions.push(action);
        let (next, reward) = Self::transition(self.pos, action);
        self.last_reward = reward;
        self.done = next.is_none() || self.steps >= self.max_steps;
        if let Some(n) = next {
            self.pos = n;
        }
        Ok(StepOutcome {
            observation: self.observation_of(self.pos),
            reward,
            done: self.done,
        })
    }

    fn fidelity(&self) -> f64 {
        self.last_reward
    }

    fn protocol(&self) -> Vec<usize> {
        self.actions.clone()
    }
}

/// Optimal values and greedy actions (lowest index on ties) of the chain.
pub fn value_iteration(_env: &ChainMdp, gamma: f64) -> (Vec<f64>, Vec<usize>) {
    let mut v = vec![0.0; CHAIN_STATES];
    let q = |v: &[f64], s: usize, a: usize| {
        let (next, r) = ChainMdp::transition(s, a);
        r + next.map_or(0.0, |n| gamma * v[n])
    };
    for _ in 0..1000 {
        let nv: Vec<f64> = (0..CHAIN_STATES).map(|s| q(&v, s, 0).max(q(&v, s, 1))).collect();
        let delta = nv.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = nv;
        if delta < 1e-15 {
            break;
        }
    }
    let policy = (0..CHAIN_STATES)
        .map(|s| if q(&v, s, 1) > q(&v, s, 0) { 1 } else { 0 })
        .collect();
    (v, policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_iteration_closed_form() {
        let env = ChainMdp::new(0, 10);
        let (v, pi) = value_iteration(&env, 0.9);
        assert!((v[3] - 1.0).abs() < 1e-12);
        assert!((v[2] - 0.9).abs() < 1e-12);
        assert!((v[1] - 0.81).abs() < 1e-12);
        assert!((v[0] - 0.75).abs() < 1e-12);
        assert_eq!(pi, vec![0, 1, 1, 1]);
    }

    #[test]
    fn episodes_terminate() {
        let mut env = ChainMdp::new(3, 5);
        env.reset();
        let mut done = false;
        let mut n = 0;
        while !done {
            done = env.step(n % 2).unwrap().done;
            n += 1;
        }
        assert!(n <= 5);
        assert!(env.step(0).is_err());
    }
}
