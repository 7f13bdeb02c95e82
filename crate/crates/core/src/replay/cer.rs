//! Contrastive buffer admission and batch mixing.
//!
//! After each episode, transitions whose state jump is close to the episode's
//! largest jump are candidates. A candidate is admitted when its target sits in
//! the top or bottom `psi` percent of the main buffer's targets, together with
//! the most recent stored transition from the same state under a different
//! action.

use std::io::{self, Write};

use rand::Rng;

use super::{CerBuffer, MemBuffer, Transition};
use crate::gridworld::Observation;

/// Steps `t` with `‖s_{t+1} − s_t‖₂ ≥ delta · max_k ‖s_{k+1} − s_k‖₂`.
pub fn significant_transitions(steps: &[(Observation, Observation)], delta: f64) -> Vec<usize> {
    let jumps: Vec<f64> = steps.iter().map(|(s, next)| s.distance(next)).collect();
    let max = jumps.iter().copied().fold(0.0, f64::max);
    let cut = delta * max;
    jumps
        .iter()
        .enumerate()
        .filter(|&(_, &d)| d >= cut)
        .map(|(t, _)| t)
        .collect()
}

/// Nearest-rank cut points over a set of targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercentileCuts {
    pub low: f64,
    pub high: f64,
}

/// 1-based nearest rank `⌈p·n/100⌉`, guarding against products that land a
/// hair above an integer in binary floating point.
fn nearest_rank(percent: f64, n: usize) -> usize {
    let r = percent * n as f64 / 100.0;
    let rank = if (r - r.round()).abs() < 1e-9 { r.round() } else { r.ceil() };
    (rank as usize).clamp(1, n)
}

impl PercentileCuts {
    /// `None` for an empty target set. `targets` is reordered in place.
    pub fn from_targets(targets: &mut [f64], psi: f64) -> Option<Self> {
        let n = targets.len();
        if n == 0 {
            return None;
        }
        let lo_rank = nearest_rank(psi, n) - 1;
        let hi_rank = nearest_rank(100.0 - psi, n) - 1;
        let (_, &mut low, _) = targets.select_nth_unstable_by(lo_rank, f64::total_cmp);
        let (_, &mut high, _) = targets.select_nth_unstable_by(hi_rank, f64::total_cmp);
        Some(Self { low, high })
    }

    pub fn from_buffer(mem: &MemBuffer, psi: f64) -> Option<Self> {
        let mut targets: Vec<f64> = mem.iter().map(|t| t.target).collect();
        Self::from_targets(&mut targets, psi)
    }

    /// Inclusive on both sides.
    pub fn passes(&self, target: f64) -> bool {
        target >= self.high || target <= self.low
    }
}

/// Whether `target` falls in the top or bottom `psi` percent of `mem`'s targets.
pub fn percentile_gate(target: f64, mem: &MemBuffer, psi: f64) -> bool {
    PercentileCuts::from_buffer(mem, psi).is_some_and(|c| c.passes(target))
}

/// Most recently stored transition within `state_tol` of the anchor's state
/// that took a different action.
pub fn find_contrastive(anchor: &Transition, mem: &MemBuffer, state_tol: f64) -> Option<Transition> {
    mem.iter_newest_first()
        .find(|t| t.action != anchor.action && t.state.distance(&anchor.state) <= state_tol)
        .copied()
}

/// Admission thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admission {
    pub delta: f64,
    pub psi: f64,
    pub state_tol: f64,
    /// Look up and admit contrastive partners. Off for the ablation.
    pub contrastive: bool,
}

/// Runs the admission rule over one finished episode and returns how many
/// transitions were appended to `cer`.
///
/// `episode[t]` holds `(s_t, a_t, τ_t)` and `next_states[t]` is `s_{t+1}`.
/// `mem` must already contain the episode.
pub fn admit_episode(
    episode: &[Transition],
    next_states: &[Observation],
    mem: &MemBuffer,
    cer: &mut CerBuffer,
    rule: &Admission,
) -> usize {
    debug_assert_eq!(episode.len(), next_states.len());
    if episode.is_empty() {
        return 0;
    }
    let Some(cuts) = PercentileCuts::from_buffer(mem, rule.psi) else {
        return 0;
    };
    let pairs: Vec<(Observation, Observation)> = episode
        .iter()
        .zip(next_states)
        .map(|(t, &next)| (t.state, next))
        .collect();
    let mut admitted = 0;
    for t in significant_transitions(&pairs, rule.delta) {
        let anchor = &episode[t];
        if !cuts.passes(anchor.target) {
            continue;
        }
        cer.push(*anchor);
        admitted += 1;
        if rule.contrastive {
            if let Some(partner) = find_contrastive(anchor, mem, rule.state_tol) {
                cer.push(partner);
                admitted += 1;
            }
        }
    }
    admitted
}

/// Number of contrastive-buffer samples in a batch of `kappa`:
/// `⌊(0.25 − 0.15·ε)·κ⌋`.
pub fn cer_share(kappa: usize, epsilon: f64) -> usize {
    let share = (0.25 - 0.15 * epsilon) * kappa as f64;
    ((share + 1e-9).floor() as usize).min(kappa)
}

/// Mixed batch: `cer_share` draws from `cer` (none if it is empty), the rest
/// from `mem`, all uniform with replacement.
pub fn assemble_batch<R: Rng + ?Sized>(
    mem: &MemBuffer,
    cer: &CerBuffer,
    kappa: usize,
    epsilon: f64,
    rng: &mut R,
) -> Vec<Transition> {
    let from_cer = if cer.is_empty() { 0 } else { cer_share(kappa, epsilon) };
    let mut batch = Vec::with_capacity(kappa);
    batch.extend((0..from_cer).filter_map(|_| cer.sample(rng).copied()));
    batch.extend((from_cer..kappa).filter_map(|_| mem.sample(rng).copied()));
    batch
}

/// Debug dump of the contrastive buffer, oldest first.
pub fn write_cer_csv<W: Write>(cer: &CerBuffer, mut out: W) -> io::Result<()> {
    let dim = cer.iter().next().map_or(0, |t| t.state.len());
    let cols: Vec<String> = (0..dim).map(|i| format!("s{i}")).collect();
    writeln!(out, "{},action,target,episode_id,step_index", cols.join(","))?;
    for t in cer.iter() {
        let state: Vec<String> = t.state.as_slice().iter().map(|v| format!("{v}")).collect();
        writeln!(
            out,
            "{},{},{},{},{}",
            state.join(","),
            t.action,
            t.target,
            t.episode_id,
            t.step_index
        )?;
    }
    Ok(())
}
