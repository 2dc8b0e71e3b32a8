//! Double deep Q-learning: replay buffer, ε-greedy policy, TD targets and
//! the training loop.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural_net::{adam_step, grad_td_loss, init_params, soft_update, AdamState, MlpParams, TdSample};

pub mod toy;

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: usize,
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Bounded FIFO of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Experience>,
    head: usize,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "replay capacity must be at least 1");
        ReplayBuffer {
            items: Vec::new(),
            head: 0,
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Stores `e`, evicting the oldest entry when full.
    pub fn push(&mut self, e: Experience) {
        if self.items.len() < self.capacity {
            self.items.push(e);
        } else {
            self.items[self.head] = e;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Entries from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer)
    }
}

/// `batch` distinct entries drawn uniformly, or `None` while the buffer is
/// still smaller than the batch.
pub fn sample_batch<'a, R: Rng>(buffer: &'a ReplayBuffer, batch: usize, rng: &mut R) -> Option<Vec<&'a Experience>> {
    if batch == 0 || buffer.len() < batch {
        return None;
    }
    Some(
        index::sample(rng, buffer.len(), batch)
            .into_iter()
            .map(|i| &buffer.items[i])
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparameters {
    pub gamma: f64,
    pub tau: f64,
    pub learning_rate: f64,
    pub episodes: usize,
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
    pub hidden: usize,
    pub batch: usize,
    pub max_steps: usize,
    pub fidelity_threshold: f64,
    pub replay_capacity: usize,
}

impl Hyperparameters {
    /// Beam-splitter settings.
    pub fn splitter() -> Self {
        Hyperparameters {
            gamma: 0.999,
            tau: 0.999,
            learning_rate: 0.001,
            episodes: 20_000,
            epsilon_decay: 1e-4,
            epsilon_floor: 0.01,
            hidden: 98,
            batch: 64,
            max_steps: 60,
            fidelity_threshold: 0.95,
            replay_capacity: 100_000,
        }
    }

    /// Mirror settings.
    pub fn mirror() -> Self {
        Hyperparameters {
            gamma: 0.99,
            tau: 0.99,
            learning_rate: 0.001,
            episodes: 8_000,
            epsilon_decay: 5e-4,
            hidden: 128,
            batch: 32,
            max_steps: 16,
            ..Self::splitter()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} = {x} outside [0, 1]")))
            }
        };
        unit("gamma", self.gamma)?;
        unit("tau", self.tau)?;
        unit("epsilon_floor", self.epsilon_floor)?;
        unit("fidelity_threshold", self.fidelity_threshold)?;
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid(format!("learning_rate = {} must be > 0", self.learning_rate)));
        }
        if !(self.epsilon_decay.is_finite() && self.epsilon_decay >= 0.0) {
            return Err(Error::invalid(format!("epsilon_decay = {} must be >= 0", self.epsilon_decay)));
        }
        for (name, v) in [
            ("episodes", self.episodes),
            ("hidden", self.hidden),
            ("batch", self.batch),
            ("max_steps", self.max_steps),
            ("replay_capacity", self.replay_capacity),
        ] {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self::splitter()
    }
}

/// `max(1 − decay·episode, floor)`.
pub fn epsilon(episode: usize, hyper: &Hyperparameters) -> f64 {
    (1.0 - hyper.epsilon_decay * episode as f64).max(hyper.epsilon_floor)
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn greedy_action(params: &MlpParams, state: &[f64]) -> usize {
    argmax(&params.forward_unchecked(state))
}

/// ε-greedy choice. One uniform draw decides exploration, a second picks
/// the random action.
pub fn select_action<R: Rng>(params: &MlpParams, state: &[f64], eps: f64, rng: &mut R) -> usize {
    if rng.gen::<f64>() < eps {
        rng.gen_range(0..params.output_dim())
    } else {
        greedy_action(params, state)
    }
}

/// Double-DQN targets `rᵢ + (1 − dᵢ) γ Q'(s'ᵢ, argmax_a Q(s'ᵢ, a))`.
pub fn td_targets(online: &MlpParams, target: &MlpParams, batch: &[&Experience], gamma: f64) -> Vec<f64> {
    batch
        .iter()
        .map(|e| {
            if e.done {
                e.reward
            } else {
                let a = greedy_action(online, &e.next_state);
                e.reward + gamma * target.forward_unchecked(&e.next_state)[a]
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// An episodic control problem with discrete actions.
pub trait Environment {
    /// Control sequence reconstructed from the actions of an episode.
    type Protocol: Clone;

    fn observation_dim(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn reset(&mut self) -> Vec<f64>;
    fn step(&mut self, action: usize) -> Result<StepOutcome>;
    /// Figure of merit of the current state.
    fn fidelity(&self) -> f64;
    fn protocol(&self) -> Self::Protocol;
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    pub steps: usize,
    pub fidelity: f64,
    pub episode_return: f64,
    pub epsilon: f64,
    pub mean_loss: f64,
    pub max_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingRecord {
    pub episodes: Vec<EpisodeStats>,
    pub best_episode: Option<usize>,
    pub best_fidelity: f64,
    pub best_actions: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<P> {
    pub online: MlpParams,
    pub target: MlpParams,
    pub optimizer: AdamState,
    pub record: TrainingRecord,
    pub best_protocol: Option<P>,
}

/// Runs `hyper.episodes` episodes of double DQN on `env`.
///
/// One gradient step and one soft target update follow every environment
/// step once the buffer holds a full batch.
pub fn train<E: Environment>(env: &mut E, hyper: &Hyperparameters, seed: u64) -> Result<TrainOutcome<E::Protocol>> {
    train_with_progress(env, hyper, seed, |_| {})
}

/// As [`train`], calling `progress` after every episode.
pub fn train_with_progress<E: Environment>(
    env: &mut E,
    hyper: &Hyperparameters,
    seed: u64,
    mut progress: impl FnMut(&EpisodeStats),
) -> Result<TrainOutcome<E::Protocol>> {
    hyper.validate()?;
    let mut online = init_params(env.observation_dim(), hyper.hidden, env.num_actions(), seed)?;
    let mut target = online.clone();
    let mut adam = AdamState::new(&online);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0fd0_u64);
    let mut buffer = ReplayBuffer::new(hyper.replay_capacity);
    let mut record = TrainingRecord::default();
    let mut best_protocol = None;
    let mut last_loss = 0.0;

    for episode in 0..hyper.episodes {
        let eps = epsilon(episode, hyper);
        let mut state = env.reset();
        let mut actions = Vec::new();
        let mut ret = 0.0;
        let (mut loss_sum, mut loss_max, mut updates) = (0.0, 0.0f64, 0usize);
        let mut done = false;
        let mut steps = 0;
        while !done {
            let action = select_action(&online, &state, eps, &mut rng);
            let out = env.step(action)?;
            actions.push(action);
            steps += 1;
            ret += out.reward;
            done = out.done;
            buffer.push(Experience {
                state: std::mem::take(&mut state),
                action,
                next_state: out.observation.clone(),
                reward: out.reward,
                done,
            });
            state = out.observation;

            if let Some(batch) = sample_batch(&buffer, hyper.batch, &mut rng) {
                let ys = td_targets(&online, &target, &batch, hyper.gamma);
                let samples: Vec<TdSample<'_>> = batch
                    .iter()
                    .zip(&ys)
                    .map(|(e, &y)| TdSample {
                        state: &e.state,
                        action: e.action,
                        target: y,
                    })
                    .collect();
                let (grad, loss) = grad_td_loss(&online, &samples)?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { episode, step: steps, last_loss });
                }
                last_loss = loss;
                adam_step(&mut online, &mut adam, &grad, hyper.learning_rate)?;
                soft_update(&mut target, &online, hyper.tau)?;
                loss_sum += loss;
                loss_max = loss_max.max(loss);
                updates += 1;
            }
            if steps > 1_000_000 {
                return Err(Error::InvalidState("environment never terminated".into()));
            }
        }

        let fidelity = env.fidelity();
        if record.best_episode.is_none() || fidelity > record.best_fidelity {
            record.best_episode = Some(episode);
            record.best_fidelity = fidelity;
            record.best_actions = actions;
            best_protocol = Some(env.protocol());
        }
        let stats = EpisodeStats {
            episode,
            steps,
            fidelity,
            episode_return: ret,
            epsilon: eps,
            mean_loss: if updates > 0 { loss_sum / updates as f64 } else { 0.0 },
            max_loss: loss_max,
        };
        progress(&stats);
        record.episodes.push(stats);
    }

    Ok(TrainOutcome {
        online,
        target,
        optimizer: adam,
        record,
        best_protocol,
    })
}

/// Runs one greedy episode and returns the actions taken.
pub fn greedy_rollout<E: Environment>(env: &mut E, params: &MlpParams, step_limit: usize) -> Result<Vec<usize>> {
    let mut state = env.reset();
    let mut actions = Vec::new();
    for _ in 0..step_limit {
        let a = greedy_action(params, &state);
        actions.push(a);
        let out = env.step(a)?;
        state = out.observation;
        if out.done {
            break;
        }
    }
    Ok(actions)
}

#[cfg(test)]
mod tests {
    use super::toy::{value_iteration, ChainMdp};
    use super::*;

    fn exp(tag: f64, done: bool) -> Experience {
        Experience {
            state: vec![tag],
            action: 0,
            next_state: vec![tag],
            reward: tag,
            done,
        }
    }

    #[test]
    fn epsilon_schedule() {
        let h = Hyperparameters::splitter();
        assert_eq!(epsilon(0, &h), 1.0);
        assert!((epsilon(5000, &h) - 0.5).abs() < 1e-12);
        assert_eq!(epsilon(20_000, &h), 0.01);
        assert!((epsilon(9899, &h) - 0.0101).abs() < 1e-9);
    }

    #[test]
    fn buffer_evicts_oldest() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(exp(i as f64, false));
            assert!(b.len() <= 3);
        }
        let order: Vec<f64> = b.iter().map(|e| e.reward).collect();
        assert_eq!(order, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_without_replacement() {
        let mut b = ReplayBuffer::new(100);
        for i in 0..8 {
            b.push(exp(i as f64, false));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_batch(&b, 9, &mut rng).is_none());
        let all = sample_batch(&b, 8, &mut rng).unwrap();
        let mut tags: Vec<f64> = all.iter().map(|e| e.reward).collect();
        tags.sort_by(f64::total_cmp);
        assert_eq!(tags, (0..8).map(|i| i as f64).collect::<Vec<_>>());

        let mut counts = [0usize; 8];
        let draws = 10_000;
        for _ in 0..draws {
            let s = sample_batch(&b, 3, &mut rng).unwrap();
            let mut seen: Vec<f64> = s.iter().map(|e| e.reward).collect();
            seen.dedup();
            assert_eq!(seen.len(), 3);
            for e in s {
                counts[e.reward as usize] += 1;
            }
        }
        let p = 3.0 / 8.0;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() < 3.5 * sigma, "count {c}");
        }
    }

    #[test]
    fn action_selection() {
        let p = MlpParams::from_parts((1, 1, 3), vec![1.0], vec![0.0], vec![0.0, 3.0, 1.0], vec![0.0; 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(select_action(&p, &[1.0], 0.0, &mut rng), 1);
        let flat = MlpParams::zeros(1, 1, 3);
        assert_eq!(select_action(&flat, &[1.0], 0.0, &mut rng), 0);

        let five = MlpParams::zeros(1, 1, 5);
        let n = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[select_action(&five, &[0.0], 1.0, &mut rng)] += 1;
        }
        let sigma = (n as f64 * 0.2 * 0.8).sqrt();
        for c in counts {
            assert!((c as f64 - 0.2 * n as f64).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn targets_mask_terminals_and_use_online_argmax() {
        // online prefers action 1, target values [5, 10].
        let online = MlpParams::from_parts((1, 1, 2), vec![1.0], vec![0.0], vec![1.0, 2.0], vec![0.0; 2]).unwrap();
        let target = MlpParams::from_parts((1, 1, 2), vec![1.0], vec![0.0], vec![50.0, 10.0], vec![0.0; 2]).unwrap();
        let term = Experience { state: vec![1.0], action: 0, next_state: vec![1.0], reward: 19.0, done: true };
        let live = Experience { state: vec![1.0], action: 0, next_state: vec![1.0], reward: 0.0, done: false };
        let y = td_targets(&online, &target, &[&term, &live], 0.999);
        assert_eq!(y[0], 19.0);
        assert!((y[1] - 9.99).abs() < 1e-12);
        let same = td_targets(&target, &target, &[&live], 0.5);
        assert_eq!(same[0], 25.0);
    }

    #[test]
    fn hyperparameter_validation() {
        assert!(Hyperparameters::splitter().validate().is_ok());
        assert!(Hyperparameters::mirror().validate().is_ok());
        let bad = Hyperparameters { gamma: 1.5, ..Hyperparameters::splitter() };
        assert!(bad.validate().unwrap_err().to_string().contains("gamma"));
    }

    fn toy_hyper(gamma: f64) -> Hyperparameters {
        Hyperparameters {
            gamma,
            tau: 0.95,
            learning_rate: 0.003,
            episodes: 1500,
            epsilon_decay: 1.0 / 1000.0,
            epsilon_floor: 0.05,
            hidden: 32,
            batch: 32,
            max_steps: 20,
            fidelity_threshold: 1.0,
            replay_capacity: 10_000,
        }
    }

    #[test]
    fn toy_chain_policy_matches_value_iteration() {
        let mut env = ChainMdp::new(7, 20);
        let h = toy_hyper(0.9);
        let out = train(&mut env, &h, 4).unwrap();
        let (v, policy) = value_iteration(&env, 0.9);
        for s in env.interior_states() {
            let obs = env.observation_of(s);
            let q = out.online.forward_unchecked(&obs);
            assert_eq!(argmax(&q), policy[s], "state {s}: q = {q:?}, v* = {v:?}");
            assert!((q[policy[s]] - v[s]).abs() < 0.1, "state {s}: q = {q:?}, v* = {}", v[s]);
        }
    }

    #[test]
    fn zero_discount_learns_immediate_reward() {
        for seed in 0..3 {
            let mut env = ChainMdp::new(3, 20);
            let out = train(&mut env, &toy_hyper(0.0), seed).unwrap();
            for (s, a, r) in env.terminal_moves() {
                let q = out.online.forward_unchecked(&env.observation_of(s))[a];
                assert!((q - r).abs() < 0.05, "seed {seed} state {s} action {a}: {q} vs {r}");
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let h = Hyperparameters { episodes: 200, ..toy_hyper(0.9) };
        let a = train(&mut ChainMdp::new(1, 20), &h, 8).unwrap();
        let b = train(&mut ChainMdp::new(1, 20), &h, 8).unwrap();
        assert_eq!(a.record, b.record);
        assert_eq!(a.online, b.online);
    }
}
