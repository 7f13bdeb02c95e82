/// Binary sum tree over a power-of-two number of leaves.
///
/// Node `1` is the root, node `i` has children `2i` and `2i + 1`, and leaf
/// `k` lives at node `leaves + k`. Updates recompute each ancestor from its
/// two children, so every internal node is exactly the sum of its children.
#[derive(Debug, Clone)]
pub struct SumTree {
    nodes: Vec<f64>,
    leaves: usize,
}

impl SumTree {
    /// `capacity` is rounded up to the next power of two.
    pub fn new(capacity: usize) -> Self {
        let leaves = capacity.max(1).next_power_of_two();
        Self {
            nodes: vec![0.0; 2 * leaves],
            leaves,
        }
    }

    pub fn leaves(&self) -> usize {
        self.leaves
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn leaf(&self, k: usize) -> f64 {
        self.nodes[self.leaves + k]
    }

    pub fn set(&mut self, k: usize, value: f64) {
        assert!(k < self.leaves, "leaf {k} out of range");
        let mut i = self.leaves + k;
        self.nodes[i] = value;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    /// Leaf whose cumulative interval `[prefix_k, prefix_k + leaf_k)` holds `u`.
    ///
    /// `u` is clamped into `[0, total)`; descent never ends on an empty leaf
    /// while any positive leaf exists.
    pub fn find(&self, u: f64) -> usize {
        let mut u = u.max(0.0);
        let mut i = 1;
        while i < self.leaves {
            let left = 2 * i;
            let right = left + 1;
            if u < self.nodes[left] || self.nodes[right] <= 0.0 {
                i = left;
            } else {
                u -= self.nodes[left];
                i = right;
            }
        }
        i - self.leaves
    }

    /// Internal consistency: every parent equals the sum of its children.
    pub fn is_consistent(&self) -> bool {
        (1..self.leaves).all(|i| self.nodes[i] == self.nodes[2 * i] + self.nodes[2 * i + 1])
    }
}
