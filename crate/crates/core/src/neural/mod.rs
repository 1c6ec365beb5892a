//! Window-to-day forecasters trained by plain gradient descent.
//!
//! Three architectures share one parameter container:
//!
//! * `SlFnn`: a single linear map `y = W x + b`.
//! * `MlFnn`: two ReLU hidden layers the width of the input, linear output.
//! * `Lstm`: one recurrent layer whose memory is the width of the input,
//!   followed by a dense read-out of the last hidden state. By default each
//!   window value is one time step; [`LstmMode::SingleStep`] feeds the whole
//!   window at once instead.
//!
//! The loss is the squared error averaged over outputs and batch samples.
//! Gradients are computed analytically (through time for the LSTM).

mod checkpoint;
mod lstm;
mod tensor;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::CheckpointMeta;
pub use lstm::{LstmState, LstmStep};
pub use tensor::Tensor;

use lstm::LstmParams;
use tensor::{affine, affine_backward};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-2;
pub const DEFAULT_BATCH_WINDOWS: usize = 10;
pub const FORGET_BIAS: f64 = 1.0;
/// Learning rates offered for tuning.
pub const LEARNING_RATE_GRID: [f64; 5] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4];

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("non-finite value")]
    NonFinite,
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("training diverged at step {step}")]
    Diverged { step: u64 },
    #[error("empty batch")]
    EmptyBatch,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    SlFnn,
    MlFnn,
    Lstm,
}

impl NetKind {
    pub const ALL: [NetKind; 3] = [NetKind::SlFnn, NetKind::MlFnn, NetKind::Lstm];

    pub fn name(self) -> &'static str {
        match self {
            NetKind::SlFnn => "slfnn",
            NetKind::MlFnn => "mlfnn",
            NetKind::Lstm => "lstm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LstmMode {
    /// One scalar input per time step.
    #[default]
    PerValue,
    /// The whole window as a single time step.
    SingleStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub kind: NetKind,
    pub input_size: usize,
    pub output_size: usize,
    pub hidden_size: usize,
    pub learning_rate: f64,
    pub batch_windows: usize,
    pub seed: u64,
    #[serde(default)]
    pub lstm_mode: LstmMode,
}

impl NetConfig {
    /// Hidden width equal to the input, default learning rate and batch.
    pub fn new(kind: NetKind, input_size: usize, output_size: usize, seed: u64) -> Self {
        Self {
            kind,
            input_size,
            output_size,
            hidden_size: input_size,
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_windows: DEFAULT_BATCH_WINDOWS,
            seed,
            lstm_mode: LstmMode::PerValue,
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.input_size == 0 || self.output_size == 0 || self.hidden_size == 0 {
            return Err(NeuralError::Config("layer sizes must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(NeuralError::Config("learning rate must be positive".into()));
        }
        if self.batch_windows == 0 {
            return Err(NeuralError::Config("batch must hold at least one window".into()));
        }
        Ok(())
    }

    fn lstm_step_width(&self) -> usize {
        match self.lstm_mode {
            LstmMode::PerValue => 1,
            LstmMode::SingleStep => self.input_size,
        }
    }

    /// Parameter names and shapes in storage order.
    pub fn layout(&self) -> Vec<(&'static str, Vec<usize>)> {
        let (i, o, h) = (self.input_size, self.output_size, self.hidden_size);
        match self.kind {
            NetKind::SlFnn => vec![("w", vec![o, i]), ("b", vec![o])],
            NetKind::MlFnn => vec![
                ("w1", vec![h, i]),
                ("b1", vec![h]),
                ("w2", vec![h, h]),
                ("b2", vec![h]),
                ("w3", vec![o, h]),
                ("b3", vec![o]),
            ],
            NetKind::Lstm => vec![
                ("wx", vec![4 * h, self.lstm_step_width()]),
                ("wh", vec![4 * h, h]),
                ("b", vec![4 * h]),
                ("wy", vec![o, h]),
                ("by", vec![o]),
            ],
        }
    }
}

/// One window and the day that follows it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: NetConfig,
    params: Vec<Tensor>,
    steps: u64,
    diverged: bool,
}

enum Cache {
    Sl,
    Ml { a1: Vec<f64>, a2: Vec<f64> },
    Lstm(Vec<LstmStep>),
}

impl Network {
    /// Weights uniform in `±1/√fan_in` (`±1/√H` for every LSTM matrix),
    /// biases zero except the LSTM forget gate.
    pub fn init(config: NetConfig) -> Result<Self, NeuralError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let hsz = config.hidden_size;
        let params = config
            .layout()
            .into_iter()
            .map(|(name, shape)| {
                if shape.len() == 1 {
                    let mut t = Tensor::zeros(&shape);
                    if config.kind == NetKind::Lstm && name == "b" {
                        t.data_mut()[hsz..2 * hsz].iter_mut().for_each(|v| *v = FORGET_BIAS);
                    }
                    return t;
                }
                let fan_in = if config.kind == NetKind::Lstm { hsz } else { shape[1] };
                let bound = 1.0 / (fan_in as f64).sqrt();
                let data = (0..shape[0] * shape[1]).map(|_| rng.gen_range(-bound..bound)).collect();
                Tensor::new(shape, data).expect("finite by construction")
            })
            .collect();
        Ok(Self {
            config,
            params,
            steps: 0,
            diverged: false,
        })
    }

    pub fn from_params(config: NetConfig, params: Vec<Tensor>) -> Result<Self, NeuralError> {
        config.validate()?;
        let layout = config.layout();
        if layout.len() != params.len() {
            return Err(NeuralError::Shape {
                expected: layout.len(),
                got: params.len(),
            });
        }
        for ((_, shape), t) in layout.iter().zip(&params) {
            if shape.as_slice() != t.shape() {
                return Err(NeuralError::Shape {
                    expected: shape.iter().product(),
                    got: t.len(),
                });
            }
        }
        Ok(Self {
            config,
            params,
            steps: 0,
            diverged: false,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Completed gradient steps.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Set once a step produced a non-finite loss, gradient or parameter;
    /// the parameters stay at their last finite values from then on.
    pub fn is_diverged(&self) -> bool {
        self.diverged
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NeuralError> {
        if x.len() != self.config.input_size {
            return Err(NeuralError::Shape {
                expected: self.config.input_size,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn lstm_params(&self) -> LstmParams<'_> {
        let [wx, wh, b, wy, by] = self.params.as_slice() else {
            unreachable!("LSTM layout has five tensors");
        };
        LstmParams { wx, wh, b, wy, by }
    }

    fn lstm_steps<'a>(&self, x: &'a [f64]) -> Vec<&'a [f64]> {
        x.chunks(self.config.lstm_step_width()).collect()
    }

    fn forward_cached(&self, x: &[f64], y: &mut [f64]) -> Cache {
        let p = &self.params;
        match self.config.kind {
            NetKind::SlFnn => {
                affine(&p[0], &p[1], x, y);
                Cache::Sl
            }
            NetKind::MlFnn => {
                let h = self.config.hidden_size;
                let mut a1 = vec![0.0; h];
                affine(&p[0], &p[1], x, &mut a1);
                a1.iter_mut().for_each(|v| *v = v.max(0.0));
                let mut a2 = vec![0.0; h];
                affine(&p[2], &p[3], &a1, &mut a2);
                a2.iter_mut().for_each(|v| *v = v.max(0.0));
                affine(&p[4], &p[5], &a2, y);
                Cache::Ml { a1, a2 }
            }
            NetKind::Lstm => Cache::Lstm(lstm::forward(&self.lstm_params(), &self.lstm_steps(x), y)),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        self.check_input(x)?;
        let mut y = vec![0.0; self.config.output_size];
        self.forward_cached(x, &mut y);
        Ok(y)
    }

    /// Hidden pre-activations `z1` followed by `z2` of an ML-FNN; empty for
    /// other kinds.
    pub fn hidden_preactivations(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        self.check_input(x)?;
        if self.config.kind != NetKind::MlFnn {
            return Ok(Vec::new());
        }
        let h = self.config.hidden_size;
        let p = &self.params;
        let mut z1 = vec![0.0; h];
        affine(&p[0], &p[1], x, &mut z1);
        let a1: Vec<f64> = z1.iter().map(|v| v.max(0.0)).collect();
        let mut z2 = vec![0.0; h];
        affine(&p[2], &p[3], &a1, &mut z2);
        z1.extend(z2);
        Ok(z1)
    }

    /// Per-step gates and states of an LSTM; empty for other kinds.
    pub fn lstm_trace(&self, x: &[f64]) -> Result<Vec<LstmStep>, NeuralError> {
        self.check_input(x)?;
        if self.config.kind != NetKind::Lstm {
            return Ok(Vec::new());
        }
        Ok(lstm::unroll(&self.lstm_params(), &self.lstm_steps(x)))
    }

    fn check_batch(&self, batch: &[Sample]) -> Result<(), NeuralError> {
        if batch.is_empty() {
            return Err(NeuralError::EmptyBatch);
        }
        for s in batch {
            self.check_input(&s.input)?;
            if s.target.len() != self.config.output_size {
                return Err(NeuralError::Shape {
                    expected: self.config.output_size,
                    got: s.target.len(),
                });
            }
        }
        Ok(())
    }

    pub fn loss(&self, batch: &[Sample]) -> Result<f64, NeuralError> {
        self.check_batch(batch)?;
        let mut y = vec![0.0; self.config.output_size];
        let mut sse = 0.0;
        for s in batch {
            self.forward_cached(&s.input, &mut y);
            sse += y.iter().zip(&s.target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        Ok(sse / (batch.len() * self.config.output_size) as f64)
    }

    /// Mean squared error over the batch and its gradient for every tensor.
    pub fn loss_and_grad(&self, batch: &[Sample]) -> Result<(f64, Vec<Tensor>), NeuralError> {
        self.check_batch(batch)?;
        let mut grads: Vec<Tensor> = self.params.iter().map(|t| Tensor::zeros(t.shape())).collect();
        let out = self.config.output_size;
        let scale = 1.0 / (batch.len() * out) as f64;
        let mut y = vec![0.0; out];
        let mut dy = vec![0.0; out];
        let mut sse = 0.0;
        for s in batch {
            let cache = self.forward_cached(&s.input, &mut y);
            for ((d, yi), ti) in dy.iter_mut().zip(&y).zip(&s.target) {
                sse += (yi - ti) * (yi - ti);
                *d = 2.0 * (yi - ti) * scale;
            }
            self.backward(&s.input, cache, &dy, &mut grads);
        }
        Ok((sse * scale, grads))
    }

    fn backward(&self, x: &[f64], cache: Cache, dy: &[f64], grads: &mut [Tensor]) {
        let p = &self.params;
        match cache {
            Cache::Sl => {
                let (gw, gb) = grads.split_at_mut(1);
                affine_backward(&p[0], x, dy, &mut gw[0], &mut gb[0], None);
            }
            Cache::Ml { a1, a2 } => {
                let h = self.config.hidden_size;
                let [g1, gb1, g2, gb2, g3, gb3] = grads else {
                    unreachable!("ML-FNN layout has six tensors");
                };
                let mut d2 = vec![0.0; h];
                affine_backward(&p[4], &a2, dy, g3, gb3, Some(&mut d2));
                for (d, a) in d2.iter_mut().zip(&a2) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
                let mut d1 = vec![0.0; h];
                affine_backward(&p[2], &a1, &d2, g2, gb2, Some(&mut d1));
                for (d, a) in d1.iter_mut().zip(&a1) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
                affine_backward(&p[0], x, &d1, g1, gb1, None);
            }
            Cache::Lstm(trace) => {
                lstm::backward(&self.lstm_params(), &self.lstm_steps(x), &trace, dy, grads);
            }
        }
    }

    /// One gradient-descent update on `batch`; returns the loss before the
    /// update. A non-finite loss, gradient or updated parameter leaves the
    /// parameters unchanged and marks the network diverged.
    pub fn train_step(&mut self, batch: &[Sample]) -> Result<f64, NeuralError> {
        if self.diverged {
            return Err(NeuralError::Diverged { step: self.steps });
        }
        let (loss, grads) = self.loss_and_grad(batch)?;
        let lr = self.config.learning_rate;
        let finite = loss.is_finite() && grads.iter().all(Tensor::is_finite);
        let updated: Option<Vec<Tensor>> = finite
            .then(|| {
                self.params
                    .iter()
                    .zip(&grads)
                    .map(|(p, g)| {
                        let mut next = p.clone();
                        for (v, d) in next.data_mut().iter_mut().zip(g.data()) {
                            *v -= lr * d;
                        }
                        next
                    })
                    .collect::<Vec<_>>()
            })
            .filter(|ps| ps.iter().all(Tensor::is_finite));
        match updated {
            Some(ps) => {
                self.params = ps;
                self.steps += 1;
                Ok(loss)
            }
            None => {
                self.diverged = true;
                log::warn!("{} diverged at step {}", self.config.kind.name(), self.steps);
                Err(NeuralError::Diverged { step: self.steps })
            }
        }
    }

    pub(crate) fn set_param(&mut self, tensor: usize, index: usize, value: f64) {
        self.params[tensor].data_mut()[index] = value;
    }
}

/// Largest relative gap `|g_a - g_n| / max(1e-8, |g_a| + |g_n|)` between the
/// analytic gradient and central differences over every parameter.
pub fn gradient_check(net: &Network, batch: &[Sample], epsilon: f64) -> Result<f64, NeuralError> {
    let (_, grads) = net.loss_and_grad(batch)?;
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for (ti, g) in grads.iter().enumerate() {
        for (j, &ga) in g.data().iter().enumerate() {
            let orig = net.params[ti].data()[j];
            probe.set_param(ti, j, orig + epsilon);
            let up = probe.loss(batch)?;
            probe.set_param(ti, j, orig - epsilon);
            let down = probe.loss(batch)?;
            probe.set_param(ti, j, orig);
            let gn = (up - down) / (2.0 * epsilon);
            let rel = (ga - gn).abs() / (ga.abs() + gn.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
