//! Q-value probes: fixed (cell, flags) situations whose action values are
//! recorded during training.

use serde::{Deserialize, Serialize};

use crate::gridworld::{Action, Cell, GridConfig, GridState, GridWorld};
use crate::qnet::{MlpParams, QnetError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub label: String,
    pub cell: Cell,
    pub v1: bool,
    pub v2: bool,
    pub actions: [Action; 2],
}

impl ProbeSpec {
    pub fn columns(&self) -> [String; 2] {
        self.actions.map(|a| format!("q_{}_{}", self.label, a.name()))
    }
}

/// The two situations around the first waypoint: the cell just below it
/// before visiting (up vs right), and the cell just right of it after
/// visiting (right vs down). Cells that fall outside the grid are skipped.
pub fn default_probes(grid: &GridConfig) -> Vec<ProbeSpec> {
    let Some(&w1) = grid.waypoints.first() else {
        return Vec::new();
    };
    let mut probes = Vec::new();
    if w1.y > 0 {
        probes.push(ProbeSpec {
            label: "below_w1".into(),
            cell: Cell::new(w1.x, w1.y - 1),
            v1: false,
            v2: false,
            actions: [Action::Up, Action::Right],
        });
    }
    if w1.x + 1 < grid.size {
        probes.push(ProbeSpec {
            label: "right_of_w1".into(),
            cell: Cell::new(w1.x + 1, w1.y),
            v1: true,
            v2: false,
            actions: [Action::Right, Action::Down],
        });
    }
    probes
}

/// Values of each probe's two named actions.
pub fn qprobe(
    params: &MlpParams,
    env: &GridWorld,
    probes: &[ProbeSpec],
) -> Result<Vec<[f64; 2]>, QnetError> {
    probes
        .iter()
        .map(|p| {
            let state = GridState {
                x: p.cell.x,
                y: p.cell.y,
                v1: p.v1,
                v2: p.v2,
                steps_elapsed: 0,
            };
            let q = params.forward(env.encode(&state).as_slice())?;
            Ok(p.actions.map(|a| q[a.index()]))
        })
        .collect()
}
