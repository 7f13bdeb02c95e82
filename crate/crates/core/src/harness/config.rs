//! Experiment presets and the TOML override document.

#[cfg(feature = "cli")]
use std::path::Path;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agent::{AgentConfig, Algorithm};
use crate::gridworld::{Cell, GridConfig, GridWorld, TerminalRewards};
use crate::probe::{default_probes, ProbeSpec};
use crate::qnet::WeightInit;

pub const EXPERIMENT_IDS: [u8; 5] = [1, 2, 3, 4, 5];
pub const DEFAULT_SMOOTHING_WINDOW: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: u8,
    pub grid: GridConfig,
    /// Shared hyperparameters; `algorithm` and `seed` are set per run.
    pub agent: AgentConfig,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub probes: Vec<ProbeSpec>,
    pub smoothing_window: usize,
    /// Upper bound on concurrently executing runs.
    pub jobs: usize,
}

/// The environment columns of the experiment table, used for the golden check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub experiment: u8,
    pub grid_size: usize,
    pub reward_none: f64,
    pub reward_only_w1: Option<f64>,
    pub reward_only_w2: Option<f64>,
    pub reward_both: Option<f64>,
    pub timeout: usize,
    pub epsilon_decay: f64,
}

fn grid_for(experiment: u8) -> Option<(GridConfig, f64)> {
    let preset = match experiment {
        1 => (GridConfig::single_waypoint(8, Cell::new(2, 5), 100), 0.995),
        2 => (
            GridConfig::two_waypoints(8, Cell::new(0, 7), Cell::new(7, 0), 160, 2.0, 10.0),
            0.995,
        ),
        3 | 5 => (GridConfig::single_waypoint(12, Cell::new(3, 8), 240), 0.999),
        4 => (
            GridConfig::two_waypoints(8, Cell::new(0, 7), Cell::new(7, 0), 160, -1.0, 10.0),
            0.999,
        ),
        _ => return None,
    };
    Some(preset)
}

/// Known optimum for the default placement, where one exists.
pub fn reference_optimum(experiment: u8) -> Option<f64> {
    match experiment {
        1 => Some(9.86),
        2 => Some(9.72),
        3 | 5 => Some(9.78),
        _ => None,
    }
}

/// Slower decay needs more episodes before exploitation settles.
pub fn default_episodes(epsilon_decay: f64) -> usize {
    if epsilon_decay >= 0.999 {
        6000
    } else {
        2000
    }
}

impl ExperimentConfig {
    pub fn defaults(experiment: u8) -> Result<Self, HarnessError> {
        let (grid, decay) =
            grid_for(experiment).ok_or(HarnessError::UnknownExperiment(experiment))?;
        let agent = AgentConfig {
            epsilon_decay: decay,
            episodes: default_episodes(decay),
            ..AgentConfig::default()
        };
        let probes = default_probes(&grid);
        Ok(Self {
            experiment,
            grid,
            agent,
            algorithms: Algorithm::ALL.to_vec(),
            seeds: (0..10).collect(),
            out_dir: PathBuf::from(format!("results/exp{experiment}")),
            probes,
            smoothing_window: DEFAULT_SMOOTHING_WINDOW,
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
        })
    }

    pub fn table_row(&self) -> TableRow {
        let r = &self.grid.terminal_rewards;
        TableRow {
            experiment: self.experiment,
            grid_size: self.grid.size,
            reward_none: r.none,
            reward_only_w1: r.only_w1,
            reward_only_w2: r.only_w2,
            reward_both: r.both,
            timeout: self.grid.timeout,
            epsilon_decay: self.agent.epsilon_decay,
        }
    }

    /// Defaults for `experiment`, then the file at `path` if given.
    #[cfg(feature = "cli")]
    pub fn load(experiment: u8, path: Option<&Path>) -> Result<Self, HarnessError> {
        let mut config = Self::defaults(experiment)?;
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
            let overrides: Overrides = toml::from_str(&text)
                .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
            config.apply(overrides)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: Overrides) -> Result<(), HarnessError> {
        if let Some(id) = o.experiment {
            if id != self.experiment {
                return Err(HarnessError::Config(format!(
                    "config file is for experiment {id}, not {}",
                    self.experiment
                )));
            }
        }
        let grid_changed = o.grid.is_some();
        if let Some(g) = o.grid {
            g.apply(&mut self.grid);
        }
        if let Some(a) = o.agent {
            a.apply(&mut self.agent);
        }
        if let Some(v) = o.algorithms {
            self.algorithms = v;
        }
        if let Some(v) = o.seeds {
            self.seeds = v;
        }
        if let Some(v) = o.out_dir {
            self.out_dir = v;
        }
        if let Some(v) = o.smoothing_window {
            self.smoothing_window = v;
        }
        if let Some(v) = o.jobs {
            self.jobs = v;
        }
        match o.probes {
            Some(p) => self.probes = p,
            None if grid_changed => self.probes = default_probes(&self.grid),
            None => {}
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.grid.validate()?;
        self.agent.validate()?;
        let bad = |msg: &str| Err(HarnessError::Config(msg.to_string()));
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1");
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return bad("seeds must be distinct");
        }
        let mut algs: Vec<&str> = self.algorithms.iter().map(|a| a.name()).collect();
        algs.sort_unstable();
        algs.dedup();
        if algs.len() != self.algorithms.len() {
            return bad("algorithms must be distinct");
        }
        for p in &self.probes {
            if p.cell.x >= self.grid.size || p.cell.y >= self.grid.size {
                return Err(HarnessError::Config(format!(
                    "probe `{}` cell {} lies outside the {}x{} grid",
                    p.label, p.cell, self.grid.size, self.grid.size
                )));
            }
            if p.v2 && self.grid.waypoints.len() < 2 {
                return Err(HarnessError::Config(format!(
                    "probe `{}` sets v2 but the grid has one waypoint",
                    p.label
                )));
            }
        }
        Ok(())
    }

    /// BFS optimum of the effective grid. For untouched presets it must agree
    /// with the known value.
    pub fn oracle(&self) -> Result<f64, HarnessError> {
        let optimum = GridWorld::new(self.grid.clone())?.optimal_return();
        let preset = grid_for(self.experiment).map(|(g, _)| g);
        if let (Some(reference), Some(preset)) = (reference_optimum(self.experiment), preset) {
            if preset == self.grid && (optimum - reference).abs() > 1e-9 {
                return Err(HarnessError::OracleMismatch { experiment: self.experiment, optimum, reference });
            }
        }
        Ok(optimum)
    }

    /// Hyperparameters of one run.
    pub fn run_config(&self, algorithm: Algorithm, seed: u64) -> AgentConfig {
        AgentConfig { algorithm, seed, ..self.agent.clone() }
    }
}

/// Partial document accepted by `--config`. Every key is optional; unknown
/// keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub experiment: Option<u8>,
    pub algorithms: Option<Vec<Algorithm>>,
    pub seeds: Option<Vec<u64>>,
    #[serde(alias = "out")]
    pub out_dir: Option<PathBuf>,
    pub smoothing_window: Option<usize>,
    pub jobs: Option<usize>,
    pub probes: Option<Vec<ProbeSpec>>,
    pub grid: Option<GridOverrides>,
    pub agent: Option<AgentOverrides>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridOverrides {
    pub size: Option<usize>,
    pub start: Option<Cell>,
    pub goal: Option<Cell>,
    pub waypoints: Option<Vec<Cell>>,
    pub step_reward: Option<f64>,
    pub timeout: Option<usize>,
    pub terminal_rewards: Option<RewardOverrides>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardOverrides {
    pub none: Option<f64>,
    pub only_w1: Option<f64>,
    pub only_w2: Option<f64>,
    pub both: Option<f64>,
}

impl GridOverrides {
    fn apply(self, grid: &mut GridConfig) {
        let resized = self.size.is_some();
        if let Some(v) = self.size {
            grid.size = v;
        }
        // A resized grid keeps its goal in the far corner unless told otherwise.
        if resized && self.goal.is_none() && grid.size > 0 {
            grid.goal = Cell::new(grid.size - 1, grid.size - 1);
        }
        if let Some(v) = self.start {
            grid.start = v;
        }
        if let Some(v) = self.goal {
            grid.goal = v;
        }
        if let Some(v) = self.waypoints {
            // Fewer waypoints make the unreachable patterns meaningless.
            match v.len() {
                0 => {
                    grid.terminal_rewards.only_w1 = None;
                    grid.terminal_rewards.only_w2 = None;
                    grid.terminal_rewards.both = None;
                }
                1 => {
                    grid.terminal_rewards.only_w2 = None;
                    grid.terminal_rewards.both = None;
                }
                _ => {}
            }
            grid.waypoints = v;
        }
        if let Some(v) = self.step_reward {
            grid.step_reward = v;
        }
        if let Some(v) = self.timeout {
            grid.timeout = v;
        }
        if let Some(r) = self.terminal_rewards {
            let t: &mut TerminalRewards = &mut grid.terminal_rewards;
            if let Some(v) = r.none {
                t.none = v;
            }
            if r.only_w1.is_some() {
                t.only_w1 = r.only_w1;
            }
            if r.only_w2.is_some() {
                t.only_w2 = r.only_w2;
            }
            if r.both.is_some() {
                t.both = r.both;
            }
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentOverrides {
    pub gamma: Option<f64>,
    pub epsilon_initial: Option<f64>,
    pub epsilon_decay: Option<f64>,
    pub epsilon_floor: Option<f64>,
    pub delta: Option<f64>,
    pub psi: Option<f64>,
    pub kappa: Option<usize>,
    pub learning_rate: Option<f64>,
    pub episodes: Option<usize>,
    pub buffer_capacity: Option<usize>,
    pub state_tol: Option<f64>,
    pub per_alpha: Option<f64>,
    pub per_beta_start: Option<f64>,
    pub per_beta_end: Option<f64>,
    pub per_floor: Option<f64>,
    pub undiscounted_terminal: Option<bool>,
    pub weight_init: Option<WeightInit>,
}

impl AgentOverrides {
    fn apply(self, a: &mut AgentConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { a.$field = v; })*
            };
        }
        let decay_only = self.epsilon_decay.is_some() && self.episodes.is_none();
        set!(
            gamma, epsilon_initial, epsilon_decay, epsilon_floor, delta, psi, kappa,
            learning_rate, episodes, buffer_capacity, state_tol, per_alpha, per_beta_start,
            per_beta_end, per_floor, undiscounted_terminal, weight_init
        );
        if decay_only {
            a.episodes = default_episodes(a.epsilon_decay);
        }
    }
}
