//! Episodic training loop for vanilla DQN, prioritized replay, contrastive
//! replay and its no-contrast ablation, all with Monte-Carlo targets and a
//! single online network.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::{Action, GridConfig, GridError, GridWorld, Observation, Outcome};
use crate::probe::{qprobe, ProbeSpec};
use crate::qnet::{AdamState, MlpParams, QnetError, Sample, WeightInit, N_ACTIONS};
use crate::replay::{
    admit_episode, assemble_batch, Admission, CerBuffer, MemBuffer, PerBuffer, ReplayError,
    Transition,
};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Qnet(#[from] QnetError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
    #[error("episode trace has not terminated")]
    IncompleteTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Dqn,
    Per,
    Cer,
    CerNocontrast,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Dqn,
        Algorithm::Per,
        Algorithm::Cer,
        Algorithm::CerNocontrast,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dqn => "dqn",
            Algorithm::Per => "per",
            Algorithm::Cer => "cer",
            Algorithm::CerNocontrast => "cer-nocontrast",
        }
    }

    fn uses_cer(self) -> bool {
        matches!(self, Algorithm::Cer | Algorithm::CerNocontrast)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected dqn, per, cer, cer-nocontrast)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub epsilon_initial: f64,
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
    /// Significance factor on the episode's largest state jump.
    pub delta: f64,
    /// Percentile width of the target gate, in percent.
    pub psi: f64,
    /// Batch size.
    pub kappa: usize,
    pub learning_rate: f64,
    pub episodes: usize,
    pub seed: u64,
    pub buffer_capacity: usize,
    /// Distance under which two encoded states count as the same state.
    pub state_tol: f64,
    pub per_alpha: f64,
    pub per_beta_start: f64,
    pub per_beta_end: f64,
    pub per_floor: f64,
    /// Add the terminal reward to every target undiscounted instead of
    /// folding it into the last step's reward.
    pub undiscounted_terminal: bool,
    pub weight_init: WeightInit,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Cer,
            gamma: 0.99,
            epsilon_initial: 1.0,
            epsilon_decay: 0.995,
            epsilon_floor: 0.01,
            delta: 0.99,
            psi: 10.0,
            kappa: 4096,
            learning_rate: 0.01,
            episodes: 2000,
            seed: 0,
            buffer_capacity: crate::replay::DEFAULT_CAPACITY,
            state_tol: 1e-9,
            per_alpha: 0.6,
            per_beta_start: 0.4,
            per_beta_end: 1.0,
            per_floor: 1e-3,
            undiscounted_terminal: false,
            weight_init: WeightInit::HeUniform,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: String| Err(AgentError::InvalidConfig(m));
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        for (name, v) in [
            ("epsilon_initial", self.epsilon_initial),
            ("epsilon_decay", self.epsilon_decay),
            ("epsilon_floor", self.epsilon_floor),
        ] {
            if !unit(v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta must lie in (0, 1], got {}", self.delta));
        }
        if !(self.psi > 0.0 && self.psi < 50.0) {
            return bad(format!("psi must lie in (0, 50), got {}", self.psi));
        }
        if self.kappa == 0 || self.buffer_capacity == 0 {
            return bad("kappa and buffer_capacity must be positive".into());
        }
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.per_alpha >= 0.0 && self.per_floor > 0.0) {
            return bad("per_alpha must be non-negative and per_floor positive".into());
        }
        if !(unit(self.per_beta_start) && unit(self.per_beta_end)) {
            return bad("per_beta_start and per_beta_end must lie in [0, 1]".into());
        }
        if !(self.state_tol >= 0.0) {
            return bad("state_tol must be non-negative".into());
        }
        Ok(())
    }

    /// `max(floor, ε₀ · decay^episode)`.
    pub fn epsilon_at(&self, episode: usize) -> f64 {
        let e = self.epsilon_initial * self.epsilon_decay.powi(episode.min(i32::MAX as usize) as i32);
        e.max(self.epsilon_floor)
    }

    /// Importance-sampling exponent, linear over the run.
    pub fn beta_at(&self, episode: usize) -> f64 {
        let frac = if self.episodes > 1 {
            (episode as f64 / (self.episodes - 1) as f64).min(1.0)
        } else {
            1.0
        };
        self.per_beta_start + (self.per_beta_end - self.per_beta_start) * frac
    }

    fn admission(&self) -> Admission {
        Admission {
            delta: self.delta,
            psi: self.psi,
            state_tol: self.state_tol,
            contrastive: self.algorithm == Algorithm::Cer,
        }
    }
}

/// ε-greedy choice; greedy ties go to the lowest index.
pub fn select_action<R: Rng + ?Sized>(q: &[f64; N_ACTIONS], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return rng.gen_range(0..N_ACTIONS);
    }
    let mut best = 0;
    for a in 1..N_ACTIONS {
        if q[a] > q[best] {
            best = a;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub state: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_state: Observation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub steps: Vec<TraceStep>,
    pub outcome: Outcome,
    /// Terminal part of the final step's reward.
    pub terminal_reward: f64,
}

impl EpisodeTrace {
    pub fn episode_return(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Monte-Carlo return-to-go for every step, by reverse accumulation
/// `τ_t = r_{t+1} + γ τ_{t+1}`.
///
/// With `undiscounted_terminal`, the terminal reward is removed from the last
/// step and added to every target as-is.
pub fn mc_targets(
    trace: &EpisodeTrace,
    gamma: f64,
    undiscounted_terminal: bool,
) -> Result<Vec<f64>, AgentError> {
    if trace.outcome == Outcome::Ongoing {
        return Err(AgentError::IncompleteTrace);
    }
    let n = trace.steps.len();
    let mut targets = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let mut r = trace.steps[t].reward;
        if undiscounted_terminal && t + 1 == n {
            r -= trace.terminal_reward;
        }
        acc = r + gamma * acc;
        targets[t] = acc;
    }
    if undiscounted_terminal {
        for t in &mut targets {
            *t += trace.terminal_reward;
        }
    }
    Ok(targets)
}

/// Per-episode training record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    pub episode_return: f64,
    pub length: usize,
    pub outcome: Outcome,
    pub loss: f64,
    pub epsilon: f64,
    pub buffer_size: usize,
    pub cer_size: usize,
    pub admitted: usize,
}

/// Series logged over a full run; every series has one entry per episode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMetrics {
    pub returns: Vec<f64>,
    pub lengths: Vec<usize>,
    pub losses: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub buffer_sizes: Vec<usize>,
    pub cer_sizes: Vec<usize>,
    pub admissions: Vec<usize>,
    /// `probes[episode][probe]` holds the probe's two action values, read
    /// after that episode's training step.
    pub probes: Vec<Vec<[f64; 2]>>,
    pub wall_clock_secs: f64,
}

impl RunMetrics {
    pub fn push(&mut self, stats: &EpisodeStats, probes: Vec<[f64; 2]>) {
        self.returns.push(stats.episode_return);
        self.lengths.push(stats.length);
        self.losses.push(stats.loss);
        self.epsilons.push(stats.epsilon);
        self.buffer_sizes.push(stats.buffer_size);
        self.cer_sizes.push(stats.cer_size);
        self.admissions.push(stats.admitted);
        self.probes.push(probes);
    }

    pub fn episodes(&self) -> usize {
        self.returns.len()
    }
}

/// One algorithm's complete training state on one environment.
pub struct Trainer {
    env: GridWorld,
    config: AgentConfig,
    params: MlpParams,
    adam: AdamState,
    rng: ChaCha8Rng,
    mem: MemBuffer,
    cer: CerBuffer,
    per: PerBuffer,
    episode: usize,
}

impl Trainer {
    pub fn new(config: AgentConfig, grid: GridConfig) -> Result<Self, AgentError> {
        config.validate()?;
        let env = GridWorld::new(grid)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = MlpParams::init_with(env.config().obs_dim(), config.weight_init, &mut rng);
        let adam = AdamState::new(&params, config.learning_rate);
        let cap = config.buffer_capacity;
        // Only the buffers the algorithm uses get their capacity.
        let (mem_cap, per_cap) = match config.algorithm {
            Algorithm::Per => (1, cap),
            _ => (cap, 1),
        };
        let cer_cap = if config.algorithm.uses_cer() { cap } else { 1 };
        Ok(Self {
            mem: MemBuffer::new(mem_cap),
            cer: CerBuffer::new(cer_cap),
            per: PerBuffer::new(per_cap, config.per_alpha, config.per_floor),
            env,
            config,
            params,
            adam,
            rng,
            episode: 0,
        })
    }

    pub fn env(&self) -> &GridWorld {
        &self.env
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn mem(&self) -> &MemBuffer {
        &self.mem
    }

    pub fn cer(&self) -> &CerBuffer {
        &self.cer
    }

    pub fn per(&self) -> &PerBuffer {
        &self.per
    }

    pub fn episodes_done(&self) -> usize {
        self.episode
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon_at(self.episode)
    }

    /// Rolls out one ε-greedy episode without touching any buffer.
    pub fn rollout(&mut self, epsilon: f64) -> Result<EpisodeTrace, AgentError> {
        let mut state = self.env.reset(self.config.seed);
        let mut steps = Vec::new();
        loop {
            let obs = self.env.encode(&state);
            let q = self.params.forward(obs.as_slice())?;
            let action = select_action(&q, epsilon, &mut self.rng);
            let result = self.env.step(&state, Action::ALL[action])?;
            steps.push(TraceStep {
                state: obs,
                action,
                reward: result.reward,
                next_state: self.env.encode(&result.next_state),
            });
            state = result.next_state;
            if result.done {
                return Ok(EpisodeTrace {
                    steps,
                    outcome: result.outcome,
                    terminal_reward: result.terminal_reward,
                });
            }
        }
    }

    /// Computes targets and files the episode into the algorithm's buffers.
    /// Returns the number of contrastive-buffer admissions.
    pub fn store_episode(&mut self, trace: &EpisodeTrace) -> Result<usize, AgentError> {
        let targets = mc_targets(trace, self.config.gamma, self.config.undiscounted_terminal)?;
        let episode_id = self.episode as u64;
        let transitions: Vec<Transition> = trace
            .steps
            .iter()
            .zip(&targets)
            .enumerate()
            .map(|(t, (s, &target))| Transition {
                state: s.state,
                action: s.action,
                target,
                episode_id,
                step_index: t,
            })
            .collect();
        if self.config.algorithm == Algorithm::Per {
            for t in &transitions {
                self.per.push(*t);
            }
            return Ok(0);
        }
        for t in &transitions {
            self.mem.push(*t);
        }
        if !self.config.algorithm.uses_cer() {
            return Ok(0);
        }
        let next: Vec<Observation> = trace.steps.iter().map(|s| s.next_state).collect();
        Ok(admit_episode(
            &transitions,
            &next,
            &self.mem,
            &mut self.cer,
            &self.config.admission(),
        ))
    }

    /// Draws one batch for the configured algorithm and takes one gradient
    /// step. Returns the batch loss before the update.
    pub fn train_step(&mut self, epsilon: f64) -> Result<f64, AgentError> {
        let kappa = self.config.kappa;
        if self.config.algorithm == Algorithm::Per {
            if self.per.is_empty() {
                return Ok(0.0);
            }
            let beta = self.config.beta_at(self.episode);
            let drawn = self.per.sample(kappa, beta, &mut self.rng);
            let samples: Vec<Sample<'_>> = drawn
                .iter()
                .map(|d| Sample {
                    state: d.transition.state.as_slice(),
                    action: d.transition.action,
                    target: d.transition.target,
                    weight: d.weight,
                })
                .collect();
            let mut errors = Vec::with_capacity(kappa);
            let (loss, grads) = self.params.loss_and_grads(&samples, Some(&mut errors))?;
            self.adam.step(&mut self.params, &grads)?;
            let slots: Vec<usize> = drawn.iter().map(|d| d.slot).collect();
            self.per.update(&slots, &errors)?;
            return Ok(loss);
        }
        if self.mem.is_empty() {
            return Ok(0.0);
        }
        let batch = match self.config.algorithm {
            Algorithm::Dqn => (0..kappa)
                .map(|_| *self.mem.sample(&mut self.rng).expect("non-empty"))
                .collect(),
            _ => assemble_batch(&self.mem, &self.cer, kappa, epsilon, &mut self.rng),
        };
        let samples: Vec<Sample<'_>> = batch
            .iter()
            .map(|t| Sample {
                state: t.state.as_slice(),
                action: t.action,
                target: t.target,
                weight: 1.0,
            })
            .collect();
        let (loss, grads) = self.params.loss_and_grads(&samples, None)?;
        self.adam.step(&mut self.params, &grads)?;
        Ok(loss)
    }

    /// Rollout, buffer update and one training step; advances ε.
    pub fn run_episode(&mut self) -> Result<(EpisodeTrace, EpisodeStats), AgentError> {
        let epsilon = self.epsilon();
        let trace = self.rollout(epsilon)?;
        let admitted = self.store_episode(&trace)?;
        let loss = self.train_step(epsilon)?;
        let stats = EpisodeStats {
            episode: self.episode,
            episode_return: trace.episode_return(),
            length: trace.len(),
            outcome: trace.outcome,
            loss,
            epsilon,
            buffer_size: if self.config.algorithm == Algorithm::Per {
                self.per.len()
            } else {
                self.mem.len()
            },
            cer_size: self.cer.len(),
            admitted,
        };
        self.episode += 1;
        Ok((trace, stats))
    }

    /// Greedy action values at every cell for the given flags, row-major from
    /// the bottom row.
    pub fn q_table(&self, v1: bool, v2: bool) -> Result<Vec<[f64; N_ACTIONS]>, AgentError> {
        let n = self.env.config().size;
        let mut out = Vec::with_capacity(n * n);
        for y in 0..n {
            for x in 0..n {
                let s = crate::gridworld::GridState { x, y, v1, v2, steps_elapsed: 0 };
                out.push(self.params.forward(self.env.encode(&s).as_slice())?);
            }
        }
        Ok(out)
    }
}

/// Full training run, recording probe values after every episode.
pub fn train_run(
    config: &AgentConfig,
    grid: &GridConfig,
    probes: &[ProbeSpec],
) -> Result<RunMetrics, AgentError> {
    let started = Instant::now();
    let mut trainer = Trainer::new(config.clone(), grid.clone())?;
    let mut metrics = RunMetrics::default();
    for _ in 0..config.episodes {
        let (_, stats) = trainer.run_episode()?;
        let values = qprobe(trainer.params(), trainer.env(), probes)?;
        metrics.push(&stats, values);
    }
    metrics.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::Cell;

    fn obs(v: f64) -> Observation {
        Observation::from_slice(&[v, 0.0, 0.0])
    }

    fn trace(rewards: &[f64], terminal: f64, outcome: Outcome) -> EpisodeTrace {
        EpisodeTrace {
            steps: rewards
                .iter()
                .map(|&r| TraceStep { state: obs(0.0), action: 0, reward: r, next_state: obs(0.0) })
                .collect(),
            outcome,
            terminal_reward: terminal,
        }
    }

    #[test]
    fn greedy_and_tie_break() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_action(&[1.0, 5.0, 2.0, 0.0], 0.0, &mut rng), 1);
        assert_eq!(select_action(&[3.0, 3.0, 1.0, 1.0], 0.0, &mut rng), 0);
        assert_eq!(select_action(&[3.0, 3.0, 1.0, 1.0].map(|q| q + 40.0), 0.0, &mut rng), 0);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[select_action(&[0.0, 9.0, 0.0, 0.0], 1.0, &mut rng)] += 1;
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * 0.25).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn targets_by_hand_backup() {
        let t = trace(&[-0.01, -0.01, 0.99], 1.0, Outcome::GoalReached);
        let tau = mc_targets(&t, 0.99, false).unwrap();
        let hand = -0.01 + 0.99 * -0.01 + 0.99 * 0.99 * 0.99;
        assert!((tau[0] - hand).abs() < 1e-12);
        assert!((tau[0] - 0.950399).abs() < 1e-6);
        assert!((tau[2] - 0.99).abs() < 1e-12);
        for k in 0..2 {
            assert!((tau[k] - (t.steps[k].reward + 0.99 * tau[k + 1])).abs() < 1e-12);
        }
    }

    #[test]
    fn targets_edge_cases() {
        let t = trace(&[-0.01, 0.3, 0.99], 1.0, Outcome::GoalReached);
        assert_eq!(mc_targets(&t, 0.0, false).unwrap(), vec![-0.01, 0.3, 0.99]);
        let z = trace(&[0.0; 5], 0.0, Outcome::TimedOut);
        assert_eq!(mc_targets(&z, 0.99, false).unwrap(), vec![0.0; 5]);
        let open = trace(&[0.0; 2], 0.0, Outcome::Ongoing);
        assert!(matches!(mc_targets(&open, 0.99, false), Err(AgentError::IncompleteTrace)));
    }

    #[test]
    fn undiscounted_terminal_variant() {
        let t = trace(&[-0.01, -0.01, 9.99], 10.0, Outcome::GoalReached);
        let tau = mc_targets(&t, 0.99, true).unwrap();
        assert!((tau[2] - 9.99).abs() < 1e-12);
        assert!((tau[0] - (-0.01 - 0.0099 - 0.009801 + 10.0)).abs() < 1e-12);
    }

    #[test]
    fn epsilon_schedule_decays_to_floor() {
        let c = AgentConfig::default();
        assert_eq!(c.epsilon_at(0), 1.0);
        assert!((c.epsilon_at(1) - 0.995).abs() < 1e-15);
        assert_eq!(c.epsilon_at(5000), 0.01);
        assert!((1..3000).all(|k| c.epsilon_at(k) <= c.epsilon_at(k - 1)));
        assert!((c.beta_at(0) - 0.4).abs() < 1e-15);
        assert!((c.beta_at(c.episodes - 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let ok = AgentConfig::default();
        assert!(ok.validate().is_ok());
        for broken in [
            AgentConfig { gamma: 1.5, ..ok.clone() },
            AgentConfig { psi: 50.0, ..ok.clone() },
            AgentConfig { delta: 0.0, ..ok.clone() },
            AgentConfig { kappa: 0, ..ok.clone() },
            AgentConfig { epsilon_decay: -0.1, ..ok.clone() },
        ] {
            assert!(broken.validate().is_err());
        }
        assert_eq!("cer-nocontrast".parse::<Algorithm>(), Ok(Algorithm::CerNocontrast));
        assert!("ddqn".parse::<Algorithm>().is_err());
    }

    #[test]
    fn timeout_episode_has_full_length() {
        // A zero network always picks `up`; the agent pins itself to the top wall.
        let grid = GridConfig::single_waypoint(8, Cell::new(2, 5), 30);
        let mut trainer = Trainer::new(AgentConfig::default(), grid).unwrap();
        trainer.params = MlpParams::zeros(3);
        let trace = trainer.rollout(0.0).unwrap();
        assert_eq!(trace.len(), 30);
        assert_eq!(trace.outcome, Outcome::TimedOut);
        assert!((trace.episode_return() - (-0.3)).abs() < 1e-9);
    }

    #[test]
    fn repeated_training_fits_a_single_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = MlpParams::init(3, &mut rng);
        let mut adam = AdamState::new(&params, 0.01);
        let state = [0.3, 0.6, 1.0];
        let batch = [Sample { state: &state, action: 2, target: 7.5, weight: 1.0 }];
        for _ in 0..500 {
            let (_, grads) = params.loss_and_grads(&batch, None).unwrap();
            adam.step(&mut params, &grads).unwrap();
        }
        assert!((params.forward(&state).unwrap()[2] - 7.5).abs() < 1e-3);
    }

    #[test]
    fn exact_targets_give_zero_loss_and_no_movement() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut params = MlpParams::init(3, &mut rng);
        let state = [0.1, 0.9, 0.0];
        let q = params.forward(&state).unwrap();
        let batch: Vec<Sample> = (0..4).map(|a| Sample { state: &state, action: a, target: q[a], weight: 1.0 }).collect();
        let (loss, grads) = params.loss_and_grads(&batch, None).unwrap();
        assert_eq!(loss, 0.0);
        let before = params.clone();
        let mut adam = AdamState::new(&params, 0.01);
        adam.step(&mut params, &grads).unwrap();
        assert_eq!(params, before);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn per_priorities_follow_pre_update_errors() {
        let grid = GridConfig::single_waypoint(8, Cell::new(2, 5), 100);
        let config = AgentConfig { algorithm: Algorithm::Per, kappa: 512, ..AgentConfig::default() };
        let mut trainer = Trainer::new(config.clone(), grid).unwrap();
        let trace = trainer.rollout(1.0).unwrap();
        trainer.store_episode(&trace).unwrap();
        let before = trainer.params().clone();
        trainer.train_step(1.0).unwrap();
        let per = trainer.per();
        let mut drawn = 0;
        for slot in 0..per.len() {
            let t = per.transitions().get(slot).unwrap();
            let err = before.forward(t.state.as_slice()).unwrap()[t.action] - t.target;
            let expected = (err.abs() + config.per_floor).powf(config.per_alpha);
            let p = per.priority(slot);
            if p != 1.0 {
                assert!((p - expected).abs() < 1e-12, "slot {slot}: {p} vs {expected}");
                drawn += 1;
            }
        }
        assert!(drawn > 0);
    }

    #[test]
    fn cer_buffer_grows_when_the_flag_flips() {
        // Walk straight up the waypoint column: the flip is the largest jump
        // and its target sits in the top decile of the buffer.
        let grid = GridConfig::single_waypoint(8, Cell::new(0, 5), 100);
        let mut trainer = Trainer::new(AgentConfig { kappa: 64, ..AgentConfig::default() }, grid).unwrap();
        // Earlier history: a zero network pins itself to the top wall and times out.
        trainer.params = MlpParams::zeros(3);
        let stuck = trainer.rollout(0.0).unwrap();
        trainer.store_episode(&stuck).unwrap();
        let earlier = trainer.cer().len();
        let env = trainer.env().clone();
        let mut state = env.reset(0);
        let mut steps = Vec::new();
        let route = [Action::Up; 7].into_iter().chain([Action::Right; 7]);
        let mut last = None;
        for action in route {
            let r = env.step(&state, action).unwrap();
            steps.push(TraceStep {
                state: env.encode(&state),
                action: action.index(),
                reward: r.reward,
                next_state: env.encode(&r.next_state),
            });
            state = r.next_state;
            last = Some(r);
        }
        let last = last.unwrap();
        assert_eq!(last.outcome, Outcome::GoalReached);
        let trace = EpisodeTrace { steps, outcome: last.outcome, terminal_reward: last.terminal_reward };
        let admitted = trainer.store_episode(&trace).unwrap();
        assert!(admitted >= 1);
        assert_eq!(trainer.cer().len(), earlier + admitted);
    }

    #[test]
    fn identical_seeds_give_identical_runs() {
        let grid = GridConfig::single_waypoint(8, Cell::new(2, 5), 100);
        for algorithm in Algorithm::ALL {
            let config = AgentConfig { algorithm, episodes: 15, kappa: 128, seed: 4, ..AgentConfig::default() };
            let a = train_run(&config, &grid, &crate::probe::default_probes(&grid)).unwrap();
            let b = train_run(&config, &grid, &crate::probe::default_probes(&grid)).unwrap();
            assert_eq!(a.returns, b.returns);
            assert_eq!(a.losses, b.losses);
            assert_eq!(a.cer_sizes, b.cer_sizes);
            assert_eq!(a.probes, b.probes);
            let c = train_run(&AgentConfig { seed: 5, ..config }, &grid, &[]).unwrap();
            assert_ne!(a.losses, c.losses);
        }
    }
}
