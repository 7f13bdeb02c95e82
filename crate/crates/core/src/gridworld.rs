//! Deterministic waypoint gridworld.
//!
//! The agent starts in a corner of an `size × size` grid and must reach the
//! goal. Visiting waypoints on the way changes the terminal reward. Moves into
//! a wall leave the position unchanged but still cost a step.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid size must be at least 2, got {0}")]
    SizeTooSmall(usize),
    #[error("{what} cell ({x}, {y}) lies outside the {size}x{size} grid")]
    OutOfBounds {
        what: &'static str,
        x: usize,
        y: usize,
        size: usize,
    },
    #[error("start, goal and waypoints must be distinct cells")]
    OverlappingCells,
    #[error("at most two waypoints are supported, got {0}")]
    TooManyWaypoints(usize),
    #[error("terminal reward for pattern `{0}` does not match the waypoint count")]
    RewardPatternMismatch(&'static str),
    #[error("timeout must be at least one step")]
    ZeroTimeout,
    #[error("step called on a terminal state")]
    TerminalState,
}

/// A grid cell; `y` grows upwards, so `(0, 0)` is the bottom-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
        }
    }
}

/// Which waypoints were visited before the goal was entered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VisitPattern {
    None,
    OnlyW1,
    OnlyW2,
    Both,
}

impl VisitPattern {
    pub fn from_flags(v1: bool, v2: bool) -> Self {
        match (v1, v2) {
            (false, false) => VisitPattern::None,
            (true, false) => VisitPattern::OnlyW1,
            (false, true) => VisitPattern::OnlyW2,
            (true, true) => VisitPattern::Both,
        }
    }
}

/// Total terminal reward paid on goal entry for each visit pattern.
///
/// Entries are totals, not increments over `none`. Patterns that cannot occur
/// for the configured number of waypoints must be `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalRewards {
    pub none: f64,
    pub only_w1: Option<f64>,
    pub only_w2: Option<f64>,
    pub both: Option<f64>,
}

impl TerminalRewards {
    pub fn get(&self, pattern: VisitPattern) -> Option<f64> {
        match pattern {
            VisitPattern::None => Some(self.none),
            VisitPattern::OnlyW1 => self.only_w1,
            VisitPattern::OnlyW2 => self.only_w2,
            VisitPattern::Both => self.both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub size: usize,
    pub start: Cell,
    pub goal: Cell,
    pub waypoints: Vec<Cell>,
    pub step_reward: f64,
    pub timeout: usize,
    pub terminal_rewards: TerminalRewards,
}

impl GridConfig {
    /// One waypoint on a monotone start-goal path of length `2 * (size - 1)`.
    pub fn single_waypoint(size: usize, w1: Cell, timeout: usize) -> Self {
        Self {
            size,
            start: Cell::new(0, 0),
            goal: Cell::new(size - 1, size - 1),
            waypoints: vec![w1],
            step_reward: -0.01,
            timeout,
            terminal_rewards: TerminalRewards {
                none: 1.0,
                only_w1: Some(10.0),
                only_w2: None,
                both: None,
            },
        }
    }

    pub fn two_waypoints(
        size: usize,
        w1: Cell,
        w2: Cell,
        timeout: usize,
        only_one: f64,
        both: f64,
    ) -> Self {
        Self {
            size,
            start: Cell::new(0, 0),
            goal: Cell::new(size - 1, size - 1),
            waypoints: vec![w1, w2],
            step_reward: -0.01,
            timeout,
            terminal_rewards: TerminalRewards {
                none: 1.0,
                only_w1: Some(only_one),
                only_w2: Some(only_one),
                both: Some(both),
            },
        }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.size < 2 {
            return Err(GridError::SizeTooSmall(self.size));
        }
        if self.timeout == 0 {
            return Err(GridError::ZeroTimeout);
        }
        if self.waypoints.len() > 2 {
            return Err(GridError::TooManyWaypoints(self.waypoints.len()));
        }
        let mut cells = vec![("start", self.start), ("goal", self.goal)];
        cells.extend(self.waypoints.iter().map(|&w| ("waypoint", w)));
        for &(what, c) in &cells {
            if c.x >= self.size || c.y >= self.size {
                return Err(GridError::OutOfBounds {
                    what,
                    x: c.x,
                    y: c.y,
                    size: self.size,
                });
            }
        }
        for (i, a) in cells.iter().enumerate() {
            if cells[i + 1..].iter().any(|b| b.1 == a.1) {
                return Err(GridError::OverlappingCells);
            }
        }
        let n = self.waypoints.len();
        let tr = &self.terminal_rewards;
        let expect = |present: bool, value: Option<f64>, name| match (present, value) {
            (true, Some(_)) | (false, None) => Ok(()),
            _ => Err(GridError::RewardPatternMismatch(name)),
        };
        expect(n >= 1, tr.only_w1, "only_w1")?;
        expect(n >= 2, tr.only_w2, "only_w2")?;
        expect(n >= 2, tr.both, "both")?;
        Ok(())
    }

    /// Length of the encoded observation: position plus one flag per waypoint,
    /// with at least one flag slot.
    pub fn obs_dim(&self) -> usize {
        2 + self.waypoints.len().max(1)
    }
}

/// Encoded state `(x̄, ȳ, v1[, v2])`, stored inline to keep replay buffers flat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    values: [f64; 4],
    len: u8,
}

impl Observation {
    pub fn from_slice(values: &[f64]) -> Self {
        assert!(values.len() <= 4, "observation longer than 4 components");
        let mut v = [0.0; 4];
        v[..values.len()].copy_from_slice(values);
        Self {
            values: v,
            len: values.len() as u8,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.len as usize]
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Euclidean distance; observations of different length are never close.
    pub fn distance(&self, other: &Observation) -> f64 {
        if self.len != other.len {
            return f64::INFINITY;
        }
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridState {
    pub x: usize,
    pub y: usize,
    pub v1: bool,
    pub v2: bool,
    pub steps_elapsed: usize,
}

impl GridState {
    pub fn cell(&self) -> Cell {
        Cell::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ongoing,
    GoalReached,
    TimedOut,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub next_state: GridState,
    pub reward: f64,
    pub done: bool,
    pub outcome: Outcome,
    /// Terminal part of `reward`, zero unless the goal was entered.
    pub terminal_reward: f64,
}

/// A validated environment.
#[derive(Debug, Clone)]
pub struct GridWorld {
    config: GridConfig,
}

impl GridWorld {
    pub fn new(config: GridConfig) -> Result<Self, GridError> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    /// The seed is unused: the dynamics are deterministic.
    pub fn reset(&self, _seed: u64) -> GridState {
        GridState {
            x: self.config.start.x,
            y: self.config.start.y,
            v1: false,
            v2: false,
            steps_elapsed: 0,
        }
    }

    pub fn is_terminal(&self, state: &GridState) -> bool {
        state.cell() == self.config.goal || state.steps_elapsed >= self.config.timeout
    }

    pub fn encode(&self, state: &GridState) -> Observation {
        let scale = (self.config.size - 1) as f64;
        let mut v = [state.x as f64 / scale, state.y as f64 / scale, 0.0, 0.0];
        v[2] = f64::from(u8::from(state.v1));
        v[3] = f64::from(u8::from(state.v2));
        Observation {
            values: v,
            len: self.config.obs_dim() as u8,
        }
    }

    fn moved(&self, cell: Cell, action: Action) -> Cell {
        let max = self.config.size - 1;
        match action {
            Action::Up => Cell::new(cell.x, (cell.y + 1).min(max)),
            Action::Down => Cell::new(cell.x, cell.y.saturating_sub(1)),
            Action::Left => Cell::new(cell.x.saturating_sub(1), cell.y),
            Action::Right => Cell::new((cell.x + 1).min(max), cell.y),
        }
    }

    fn visit(&self, cell: Cell, v1: bool, v2: bool) -> (bool, bool) {
        let wp = &self.config.waypoints;
        (
            v1 || wp.first() == Some(&cell),
            v2 || wp.get(1) == Some(&cell),
        )
    }

    pub fn step(&self, state: &GridState, action: Action) -> Result<StepResult, GridError> {
        if self.is_terminal(state) {
            return Err(GridError::TerminalState);
        }
        let cell = self.moved(state.cell(), action);
        let (v1, v2) = self.visit(cell, state.v1, state.v2);
        let next_state = GridState {
            x: cell.x,
            y: cell.y,
            v1,
            v2,
            steps_elapsed: state.steps_elapsed + 1,
        };
        let (outcome, terminal_reward) = if cell == self.config.goal {
            let pattern = VisitPattern::from_flags(v1, v2);
            let bonus = self
                .config
                .terminal_rewards
                .get(pattern)
                .expect("validated config covers every reachable pattern");
            (Outcome::GoalReached, bonus)
        } else if next_state.steps_elapsed >= self.config.timeout {
            (Outcome::TimedOut, 0.0)
        } else {
            (Outcome::Ongoing, 0.0)
        };
        Ok(StepResult {
            next_state,
            reward: self.config.step_reward + terminal_reward,
            done: outcome != Outcome::Ongoing,
            outcome,
            terminal_reward,
        })
    }

    /// Shortest start-to-goal path length for each visit pattern, by BFS over
    /// `(cell, v1, v2)`. The goal is absorbing, so paths never pass through it.
    pub fn shortest_paths(&self) -> Vec<(VisitPattern, usize)> {
        let n = self.config.size;
        let idx = |c: Cell, v1: bool, v2: bool| {
            ((c.y * n + c.x) * 2 + usize::from(v1)) * 2 + usize::from(v2)
        };
        let mut dist = vec![usize::MAX; n * n * 4];
        let mut queue = VecDeque::new();
        let start = self.reset(0);
        let (v1, v2) = (start.v1, start.v2);
        dist[idx(start.cell(), v1, v2)] = 0;
        queue.push_back((start.cell(), v1, v2));
        let mut found = Vec::new();
        while let Some((cell, v1, v2)) = queue.pop_front() {
            let d = dist[idx(cell, v1, v2)];
            if cell == self.config.goal {
                found.push((VisitPattern::from_flags(v1, v2), d));
                continue;
            }
            for action in Action::ALL {
                let next = self.moved(cell, action);
                let (n1, n2) = self.visit(next, v1, v2);
                let slot = idx(next, n1, n2);
                if dist[slot] == usize::MAX {
                    dist[slot] = d + 1;
                    queue.push_back((next, n1, n2));
                }
            }
        }
        found
    }

    /// Best achievable undiscounted episode return.
    pub fn optimal_return(&self) -> f64 {
        let c = &self.config;
        self.shortest_paths()
            .into_iter()
            .filter(|&(_, len)| len <= c.timeout)
            .filter_map(|(p, len)| c.terminal_rewards.get(p).map(|r| r + c.step_reward * len as f64))
            .fold(None, |best: Option<f64>, v| Some(best.map_or(v, |b| b.max(v))))
            .unwrap_or(c.step_reward * c.timeout as f64)
    }
}
