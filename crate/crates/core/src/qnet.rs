//! Fully connected Q-network `d_in → 32 → 8 → 4` with rectifier hidden units,
//! a linear head, masked MSE loss and an Adam optimizer.
//!
//! Parameters live in one flat vector so the optimizer, gradient checks and
//! snapshots can treat them uniformly. Layout, row-major per weight matrix:
//! `w1 (32×d_in), b1 (32), w2 (8×32), b2 (8), w3 (4×8), b3 (4)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HIDDEN1: usize = 32;
pub const HIDDEN2: usize = 8;
pub const N_ACTIONS: usize = 4;

const SNAPSHOT_MAGIC: &str = "cerlab-qnet";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum QnetError {
    #[error("input has {got} components, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("sample weight must be positive, got {0}")]
    BadWeight(f64),
    #[error("action index {0} out of range")]
    BadAction(usize),
    #[error("non-finite gradient component at parameter {0}")]
    NonFiniteGradient(usize),
    #[error("parameter shapes differ")]
    ShapeMismatch,
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

/// Weight initialization; biases always start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightInit {
    /// `U(±√(6 / fan_in))`
    HeUniform,
    /// `U(±√(6 / (fan_in + fan_out)))`
    GlorotUniform,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    d_in: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    len: usize,
}

impl Layout {
    fn new(d_in: usize) -> Self {
        let w1 = 0;
        let b1 = w1 + HIDDEN1 * d_in;
        let w2 = b1 + HIDDEN1;
        let b2 = w2 + HIDDEN2 * HIDDEN1;
        let w3 = b2 + HIDDEN2;
        let b3 = w3 + N_ACTIONS * HIDDEN2;
        Self {
            d_in,
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            len: b3 + N_ACTIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    d_in: usize,
    values: Vec<f64>,
}

/// One training example: encoded state, taken action, regression target and
/// importance weight (1 unless prioritized replay is in use).
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub state: &'a [f64],
    pub action: usize,
    pub target: f64,
    pub weight: f64,
}

struct Activations {
    h1: [f64; HIDDEN1],
    h2: [f64; HIDDEN2],
}

impl MlpParams {
    pub fn zeros(d_in: usize) -> Self {
        Self {
            d_in,
            values: vec![0.0; Layout::new(d_in).len],
        }
    }

    /// He-style uniform fan-in initialization, zero biases.
    pub fn init<R: Rng + ?Sized>(d_in: usize, rng: &mut R) -> Self {
        Self::init_with(d_in, WeightInit::HeUniform, rng)
    }

    pub fn init_with<R: Rng + ?Sized>(d_in: usize, scheme: WeightInit, rng: &mut R) -> Self {
        let mut p = Self::zeros(d_in);
        let l = Layout::new(d_in);
        for (start, fan_in, fan_out) in [
            (l.w1, d_in, HIDDEN1),
            (l.w2, HIDDEN1, HIDDEN2),
            (l.w3, HIDDEN2, N_ACTIONS),
        ] {
            let count = fan_in * fan_out;
            let bound = match scheme {
                WeightInit::HeUniform => (6.0 / fan_in as f64).sqrt(),
                WeightInit::GlorotUniform => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            };
            for w in &mut p.values[start..start + count] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        p
    }

    pub fn from_values(d_in: usize, values: Vec<f64>) -> Result<Self, QnetError> {
        if values.len() != Layout::new(d_in).len {
            return Err(QnetError::ShapeMismatch);
        }
        Ok(Self { d_in, values })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn layout(&self) -> Layout {
        Layout::new(self.d_in)
    }

    pub fn w1(&self) -> &[f64] {
        let l = self.layout();
        &self.values[l.w1..l.b1]
    }
    pub fn b1(&self) -> &[f64] {
        let l = self.layout();
        &self.values[l.b1..l.w2]
    }
    pub fn w2(&self) -> &[f64] {
        let l = self.layout();
        &self.values[l.w2..l.b2]
    }
    pub fn b2(&self) -> &[f64] {
        let l = self.layout();
        &self.values[l.b2..l.w3]
    }
    pub fn w3(&self) -> &[f64] {
        let l = self.layout();
        &self.values[l.w3..l.b3]
    }
    pub fn b3(&self) -> &[f64] {
        let l = self.layout();
        &self.values[l.b3..]
    }
    pub fn b3_mut(&mut self) -> &mut [f64] {
        let l = self.layout();
        &mut self.values[l.b3..]
    }

    fn hidden(&self, l: &Layout, state: &[f64]) -> Activations {
        let v = &self.values;
        let mut h1 = [0.0; HIDDEN1];
        for (j, h) in h1.iter_mut().enumerate() {
            let row = &v[l.w1 + j * l.d_in..l.w1 + (j + 1) * l.d_in];
            let z = v[l.b1 + j] + row.iter().zip(state).map(|(w, s)| w * s).sum::<f64>();
            *h = z.max(0.0);
        }
        let mut h2 = [0.0; HIDDEN2];
        for (k, h) in h2.iter_mut().enumerate() {
            let row = &v[l.w2 + k * HIDDEN1..l.w2 + (k + 1) * HIDDEN1];
            let z = v[l.b2 + k] + row.iter().zip(&h1).map(|(w, x)| w * x).sum::<f64>();
            *h = z.max(0.0);
        }
        Activations { h1, h2 }
    }

    fn head(&self, l: &Layout, h2: &[f64; HIDDEN2], action: usize) -> f64 {
        let v = &self.values;
        let row = &v[l.w3 + action * HIDDEN2..l.w3 + (action + 1) * HIDDEN2];
        v[l.b3 + action] + row.iter().zip(h2).map(|(w, x)| w * x).sum::<f64>()
    }

    pub fn forward(&self, state: &[f64]) -> Result<[f64; N_ACTIONS], QnetError> {
        if state.len() != self.d_in {
            return Err(QnetError::DimensionMismatch {
                expected: self.d_in,
                got: state.len(),
            });
        }
        let l = self.layout();
        let act = self.hidden(&l, state);
        let mut q = [0.0; N_ACTIONS];
        for (a, out) in q.iter_mut().enumerate() {
            *out = self.head(&l, &act.h2, a);
        }
        Ok(q)
    }

    /// Weighted MSE on the taken action's output only, with exact gradients.
    ///
    /// `loss = (1/B) Σ wᵢ (Q(sᵢ)[aᵢ] − τᵢ)²`. The per-sample prediction errors
    /// `Q(sᵢ)[aᵢ] − τᵢ` are written to `errors` when given.
    pub fn loss_and_grads(
        &self,
        batch: &[Sample<'_>],
        mut errors: Option<&mut Vec<f64>>,
    ) -> Result<(f64, MlpParams), QnetError> {
        if batch.is_empty() {
            return Err(QnetError::EmptyBatch);
        }
        let l = self.layout();
        let v = &self.values;
        let mut grads = MlpParams::zeros(self.d_in);
        let g = &mut grads.values;
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        if let Some(e) = errors.as_deref_mut() {
            e.clear();
        }
        for s in batch {
            if s.state.len() != self.d_in {
                return Err(QnetError::DimensionMismatch {
                    expected: self.d_in,
                    got: s.state.len(),
                });
            }
            if s.action >= N_ACTIONS {
                return Err(QnetError::BadAction(s.action));
            }
            if !(s.weight > 0.0) {
                return Err(QnetError::BadWeight(s.weight));
            }
            let act = self.hidden(&l, s.state);
            let err = self.head(&l, &act.h2, s.action) - s.target;
            if let Some(e) = errors.as_deref_mut() {
                e.push(err);
            }
            loss += s.weight * err * err;
            let dq = 2.0 * s.weight * err * scale;

            let a = s.action;
            g[l.b3 + a] += dq;
            let mut dh2 = [0.0; HIDDEN2];
            for k in 0..HIDDEN2 {
                g[l.w3 + a * HIDDEN2 + k] += dq * act.h2[k];
                if act.h2[k] > 0.0 {
                    dh2[k] = dq * v[l.w3 + a * HIDDEN2 + k];
                }
            }
            let mut dh1 = [0.0; HIDDEN1];
            for (k, &d) in dh2.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g[l.b2 + k] += d;
                let row = l.w2 + k * HIDDEN1;
                for j in 0..HIDDEN1 {
                    g[row + j] += d * act.h1[j];
                    dh1[j] += d * v[row + j];
                }
            }
            for (j, &d) in dh1.iter().enumerate() {
                if d == 0.0 || act.h1[j] <= 0.0 {
                    continue;
                }
                g[l.b1 + j] += d;
                let row = l.w1 + j * l.d_in;
                for (i, &x) in s.state.iter().enumerate() {
                    g[row + i] += d * x;
                }
            }
        }
        Ok((loss * scale, grads))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(params: &MlpParams, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; params.len()],
            v: vec![0.0; params.len()],
        }
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// Bias-corrected Adam update. Parameters are left untouched if any
    /// gradient component is non-finite.
    pub fn step(&mut self, params: &mut MlpParams, grads: &MlpParams) -> Result<(), QnetError> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(QnetError::ShapeMismatch);
        }
        if let Some(i) = grads.values.iter().position(|g| !g.is_finite()) {
            return Err(QnetError::NonFiniteGradient(i));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powf(self.t as f64);
        let c2 = 1.0 - self.beta2.powf(self.t as f64);
        for ((p, &g), (m, v)) in params
            .values
            .iter_mut()
            .zip(&grads.values)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Versioned text snapshot: a magic/version line, the input width, then one
/// parameter per line in round-trip precision.
pub fn write_snapshot(params: &MlpParams) -> String {
    let mut out = format!("{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION}\nd_in {}\n", params.d_in);
    for v in &params.values {
        out.push_str(&format!("{v:?}\n"));
    }
    out
}

pub fn read_snapshot(text: &str) -> Result<MlpParams, QnetError> {
    let bad = |m: &str| QnetError::Snapshot(m.to_string());
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty input"))?;
    match header.split_whitespace().collect::<Vec<_>>()[..] {
        [SNAPSHOT_MAGIC, ver] if ver == SNAPSHOT_VERSION.to_string() => {}
        _ => return Err(bad("unrecognized header")),
    }
    let d_in = lines
        .next()
        .and_then(|l| l.strip_prefix("d_in "))
        .and_then(|d| d.trim().parse::<usize>().ok())
        .ok_or_else(|| bad("missing d_in line"))?;
    let values = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<f64>().map_err(|e| bad(&e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    MlpParams::from_values(d_in, values)
}
