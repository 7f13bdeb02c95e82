use rand::Rng;

use super::{ReplayError, RingBuffer, SumTree, Transition};

/// A prioritized draw: buffer slot, the transition and its normalized
/// importance weight.
#[derive(Debug, Clone, Copy)]
pub struct PerSample {
    pub slot: usize,
    pub transition: Transition,
    pub weight: f64,
}

/// Proportional prioritized replay. Leaves store `(|error| + floor)^alpha`.
#[derive(Debug, Clone)]
pub struct PerBuffer {
    ring: RingBuffer<Transition>,
    tree: SumTree,
    alpha: f64,
    floor: f64,
    max_priority: f64,
}

impl PerBuffer {
    pub fn new(capacity: usize, alpha: f64, floor: f64) -> Self {
        Self {
            ring: RingBuffer::new(capacity),
            tree: SumTree::new(capacity),
            alpha,
            floor,
            max_priority: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    pub fn transitions(&self) -> &RingBuffer<Transition> {
        &self.ring
    }

    /// Stored (already exponentiated) priority of a slot.
    pub fn priority(&self, slot: usize) -> f64 {
        self.tree.leaf(slot)
    }

    /// New transitions enter at the largest priority seen so far.
    pub fn push(&mut self, t: Transition) {
        let slot = self.ring.push(t);
        self.tree.set(slot, self.max_priority);
    }

    /// Draws `count` transitions with probability `p_i / Σ p_j` and weights
    /// `(N · P(i))^-beta`, normalized by the largest weight in the batch.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, beta: f64, rng: &mut R) -> Vec<PerSample> {
        if self.is_empty() || count == 0 {
            return Vec::new();
        }
        let total = self.tree.total();
        let n = self.len() as f64;
        let mut out: Vec<PerSample> = (0..count)
            .map(|_| {
                let mut slot = self.tree.find(rng.gen::<f64>() * total);
                if slot >= self.len() {
                    slot = self.len() - 1;
                }
                let p = self.tree.leaf(slot) / total;
                PerSample {
                    slot,
                    transition: *self.ring.get(slot).expect("slot within length"),
                    weight: (n * p).powf(-beta),
                }
            })
            .collect();
        let max_w = out.iter().map(|s| s.weight).fold(0.0, f64::max);
        if max_w > 0.0 && max_w.is_finite() {
            for s in &mut out {
                s.weight /= max_w;
            }
        }
        out
    }

    /// Sets each slot's priority to `(|error| + floor)^alpha`.
    pub fn update(&mut self, slots: &[usize], errors: &[f64]) -> Result<(), ReplayError> {
        if slots.len() != errors.len() {
            return Err(ReplayError::LengthMismatch("slots", "errors"));
        }
        if let Some(&index) = slots.iter().find(|&&s| s >= self.len()) {
            return Err(ReplayError::IndexOutOfRange { index, len: self.len() });
        }
        for (&slot, &err) in slots.iter().zip(errors) {
            let p = (err.abs() + self.floor).powf(self.alpha);
            self.tree.set(slot, p);
            self.max_priority = self.max_priority.max(p);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::Observation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(i: usize) -> Transition {
        Transition {
            state: Observation::from_slice(&[0.0, 0.0, 0.0]),
            action: i % 4,
            target: i as f64,
            episode_id: 0,
            step_index: i,
        }
    }

    #[test]
    fn new_items_enter_at_max_priority() {
        let mut b = PerBuffer::new(8, 0.6, 1e-3);
        b.push(tr(0));
        assert_eq!(b.priority(0), 1.0);
        b.update(&[0], &[3.0]).unwrap();
        b.push(tr(1));
        assert_eq!(b.priority(1), b.priority(0));
    }

    #[test]
    fn zero_error_keeps_a_positive_floor() {
        let mut b = PerBuffer::new(4, 0.6, 1e-3);
        b.push(tr(0));
        b.update(&[0], &[0.0]).unwrap();
        assert!((b.priority(0) - 1e-3f64.powf(0.6)).abs() < 1e-15);
        assert!(b.priority(0) > 0.0);
    }

    #[test]
    fn update_rejects_bad_indices() {
        let mut b = PerBuffer::new(4, 0.6, 1e-3);
        b.push(tr(0));
        assert_eq!(
            b.update(&[2], &[1.0]),
            Err(ReplayError::IndexOutOfRange { index: 2, len: 1 })
        );
        assert!(b.update(&[0, 0], &[1.0]).is_err());
    }

    #[test]
    fn uniform_priorities_give_unit_weights() {
        let mut b = PerBuffer::new(16, 0.6, 1e-3);
        for i in 0..10 {
            b.push(tr(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for s in b.sample(64, 0.7, &mut rng) {
            assert!((s.weight - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_beta_gives_unit_weights() {
        let mut b = PerBuffer::new(16, 1.0, 1e-3);
        for i in 0..10 {
            b.push(tr(i));
        }
        b.update(&[0, 3, 5], &[5.0, 0.1, 2.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(b.sample(64, 0.0, &mut rng).iter().all(|s| s.weight == 1.0));
    }

    #[test]
    fn sampling_frequency_follows_priorities() {
        let mut b = PerBuffer::new(4, 1.0, 0.0);
        b.push(tr(0));
        b.push(tr(1));
        b.update(&[0, 1], &[1.0, 3.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 100_000;
        let hits = b.sample(draws, 0.4, &mut rng).iter().filter(|s| s.slot == 0).count();
        let p = 0.25;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!((hits as f64 - draws as f64 * p).abs() < 3.0 * sigma, "{hits}");
    }

    #[test]
    fn equal_priorities_sample_uniformly() {
        let mut b = PerBuffer::new(8, 0.6, 1e-3);
        for i in 0..5 {
            b.push(tr(i));
        }
        b.update(&[0, 1, 2, 3, 4], &[2.0, 0.5, 7.0, 0.0, 1.0]).unwrap();
        b.update(&[0, 1, 2, 3, 4], &[1.0; 5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 50_000;
        let mut counts = [0usize; 5];
        for s in b.sample(draws, 1.0, &mut rng) {
            counts[s.slot] += 1;
        }
        let p = 0.2;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }
}
