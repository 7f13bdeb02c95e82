//! Browser front end: train one agent incrementally on a preset grid and
//! read back its learning curve, value map and greedy route.
//!
//! [`Demo`] holds the logic and is usable natively; the `wasm_bindgen`
//! wrappers only convert errors.

use cer_core::agent::{AgentConfig, Algorithm, Trainer};
use cer_core::gridworld::{Action, GridWorld};
use cer_core::harness::{smooth, ExperimentConfig};
use cer_core::qnet::N_ACTIONS;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Layout {
    pub size: usize,
    pub start: [usize; 2],
    pub goal: [usize; 2],
    pub waypoints: Vec<[usize; 2]>,
    pub timeout: usize,
    pub optimum: f64,
}

pub fn layout_of(experiment: u8) -> Result<Layout, String> {
    let config = ExperimentConfig::defaults(experiment).map_err(|e| e.to_string())?;
    let optimum = config.oracle().map_err(|e| e.to_string())?;
    let g = &config.grid;
    Ok(Layout {
        size: g.size,
        start: [g.start.x, g.start.y],
        goal: [g.goal.x, g.goal.y],
        waypoints: g.waypoints.iter().map(|c| [c.x, c.y]).collect(),
        timeout: g.timeout,
        optimum,
    })
}

pub struct Demo {
    trainer: Trainer,
    returns: Vec<f64>,
}

impl Demo {
    /// `batch` of 0 keeps the preset batch size.
    pub fn new(experiment: u8, algorithm: &str, seed: u64, batch: usize) -> Result<Self, String> {
        let preset = ExperimentConfig::defaults(experiment).map_err(|e| e.to_string())?;
        let algorithm: Algorithm = algorithm.parse()?;
        let mut config = AgentConfig { algorithm, seed, ..preset.agent };
        if batch > 0 {
            config.kappa = batch;
        }
        let trainer = Trainer::new(config, preset.grid).map_err(|e| e.to_string())?;
        Ok(Self { trainer, returns: Vec::new() })
    }

    /// Runs `episodes` more training episodes; returns the last return.
    pub fn train(&mut self, episodes: usize) -> Result<f64, String> {
        for _ in 0..episodes {
            let (_, stats) = self.trainer.run_episode().map_err(|e| e.to_string())?;
            self.returns.push(stats.episode_return);
        }
        Ok(self.returns.last().copied().unwrap_or(f64::NAN))
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn episodes(&self) -> usize {
        self.trainer.episodes_done()
    }

    pub fn epsilon(&self) -> f64 {
        self.trainer.epsilon()
    }

    pub fn cer_size(&self) -> usize {
        self.trainer.cer().len()
    }

    /// Action values for every cell, row-major from the bottom row, four per cell.
    pub fn values(&self, v1: bool, v2: bool) -> Result<Vec<f64>, String> {
        let table = self.trainer.q_table(v1, v2).map_err(|e| e.to_string())?;
        Ok(table.iter().flat_map(|q| q.iter().copied()).collect())
    }

    /// Cells of a purely greedy episode from the start, as flat (x, y) pairs.
    /// Does not touch the training random stream.
    pub fn greedy_route(&self) -> Result<Vec<u32>, String> {
        let env: &GridWorld = self.trainer.env();
        let mut state = env.reset(0);
        let mut route = vec![state.x as u32, state.y as u32];
        while !env.is_terminal(&state) {
            let q = self.trainer.params().forward(env.encode(&state).as_slice()).map_err(|e| e.to_string())?;
            let best = (1..N_ACTIONS).fold(0, |b, a| if q[a] > q[b] { a } else { b });
            state = env.step(&state, Action::ALL[best]).map_err(|e| e.to_string())?.next_state;
            route.extend([state.x as u32, state.y as u32]);
        }
        Ok(route)
    }
}

#[wasm_bindgen]
pub fn layout(experiment: u8) -> Result<String, JsError> {
    let layout = layout_of(experiment).map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&layout).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub struct Session(Demo);

#[wasm_bindgen]
impl Session {
    #[wasm_bindgen(constructor)]
    pub fn new(experiment: u8, algorithm: &str, seed: u32, batch: u32) -> Result<Session, JsError> {
        Demo::new(experiment, algorithm, u64::from(seed), batch as usize)
            .map(Session)
            .map_err(|e| JsError::new(&e))
    }

    pub fn train(&mut self, episodes: u32) -> Result<f64, JsError> {
        self.0.train(episodes as usize).map_err(|e| JsError::new(&e))
    }

    pub fn returns(&self) -> Vec<f64> {
        self.0.returns().to_vec()
    }

    pub fn smoothed(&self, window: u32) -> Vec<f64> {
        smooth(self.0.returns(), window as usize)
    }

    pub fn episodes(&self) -> u32 {
        self.0.episodes() as u32
    }

    pub fn epsilon(&self) -> f64 {
        self.0.epsilon()
    }

    #[wasm_bindgen(js_name = cerSize)]
    pub fn cer_size(&self) -> u32 {
        self.0.cer_size() as u32
    }

    pub fn values(&self, v1: bool, v2: bool) -> Result<Vec<f64>, JsError> {
        self.0.values(v1, v2).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = greedyRoute)]
    pub fn greedy_route(&self) -> Result<Vec<u32>, JsError> {
        self.0.greedy_route().map_err(|e| JsError::new(&e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_reports_the_preset() {
        let l = layout_of(1).unwrap();
        assert_eq!(l.size, 8);
        assert_eq!(l.waypoints, vec![[2, 5]]);
        assert!((l.optimum - 9.86).abs() < 1e-9);
        let json = serde_json::to_string(&layout_of(2).unwrap()).unwrap();
        assert!(json.contains("\"waypoints\":[[0,7],[7,0]]"));
        assert!(layout_of(9).is_err());
    }

    #[test]
    fn session_trains_and_reports() {
        let mut d = Demo::new(1, "cer", 0, 64).unwrap();
        d.train(5).unwrap();
        assert_eq!(d.episodes(), 5);
        assert_eq!(d.returns().len(), 5);
        assert!(d.epsilon() < 1.0);
        assert_eq!(d.values(false, false).unwrap().len(), 8 * 8 * 4);
        let route = d.greedy_route().unwrap();
        assert_eq!(&route[..2], &[0, 0]);
        assert!(route.len() % 2 == 0 && route.len() >= 4);
        assert!(Demo::new(1, "sarsa", 0, 0).is_err());
    }

    #[test]
    fn greedy_route_leaves_training_unchanged() {
        let mut a = Demo::new(1, "dqn", 3, 64).unwrap();
        let mut b = Demo::new(1, "dqn", 3, 64).unwrap();
        a.train(3).unwrap();
        b.train(3).unwrap();
        a.greedy_route().unwrap();
        a.train(3).unwrap();
        b.train(3).unwrap();
        assert_eq!(a.returns(), b.returns());
    }
}
