use rand::Rng;

/// Fixed-capacity FIFO ring. Once full, each push overwrites the oldest item.
#[derive(Debug, Clone)]
pub struct RingBuffer<T> {
    items: Vec<T>,
    capacity: usize,
    cursor: usize,
    pushed: u64,
}

impl<T> RingBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "ring buffer capacity must be positive");
        Self {
            items: Vec::new(),
            capacity,
            cursor: 0,
            pushed: 0,
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

    /// Total number of pushes, including overwritten items.
    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    /// Stores `item` and returns its slot.
    pub fn push(&mut self, item: T) -> usize {
        let slot = self.cursor;
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[slot] = item;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        self.pushed += 1;
        slot
    }

    /// Item stored in physical slot `slot`.
    pub fn get(&self, slot: usize) -> Option<&T> {
        self.items.get(slot)
    }

    /// Iterates from the most recently pushed item to the oldest.
    pub fn iter_newest_first(&self) -> impl Iterator<Item = &T> + '_ {
        let n = self.items.len();
        let newest = (self.cursor + self.capacity - 1) % self.capacity;
        (0..n).map(move |k| &self.items[(newest + n - k) % n])
    }

    /// Iterates from the oldest item to the newest.
    pub fn iter(&self) -> impl Iterator<Item = &T> + '_ {
        let (wrapped, fresh) = if self.items.len() < self.capacity {
            (&self.items[..], &self.items[..0])
        } else {
            let (a, b) = self.items.split_at(self.cursor);
            (b, a)
        };
        wrapped.iter().chain(fresh)
    }

    /// Uniform draw with replacement; `None` when empty.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&T> {
        if self.items.is_empty() {
            None
        } else {
            Some(&self.items[rng.gen_range(0..self.items.len())])
        }
    }
}
