//! Autoregressive forecaster trained with masked mean squared error.
//!
//! Each predicted hour is a function of the previous `lag` hours (values and
//! masks) and an encoding of the whole context window (mean values and
//! observation rates):
//!
//! ```text
//! u_t   = [x_{t-lag..t}, m_{t-lag..t}, mean(x_ctx), mean(m_ctx)]
//! ŷ_t   = W2 · tanh(W1 · u_t + b1) + b2 + S · u_t
//! ```
//!
//! Training uses teacher forcing; prediction feeds its own outputs back as
//! observed hours. The hidden activations double as block embeddings.

mod train;

pub use train::{train, EpochLog, Optimizer, Regime, TrainConfig, Trained};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::DenseSeries;
use crate::error::{Error, Result};
use crate::symbolize::{Block, BlockEmbedder};

/// Masked MSE: `(1/NT) Σ_n Σ_t ‖(y − ŷ) ⊙ m‖²`.
///
/// Each of the `N` entries is a `T × |F|` matrix; all must share `T`.
pub fn masked_mse(truth: &[Vec<Vec<f64>>], pred: &[Vec<Vec<f64>>], mask: &[Vec<Vec<u8>>]) -> Result<f64> {
    if truth.len() != pred.len() || truth.len() != mask.len() {
        return Err(Error::shape("truth, prediction and mask counts differ"));
    }
    if truth.is_empty() {
        return Err(Error::shape("masked MSE over zero series"));
    }
    let steps = truth[0].len();
    let mut total = 0.0;
    for ((y, p), m) in truth.iter().zip(pred).zip(mask) {
        if y.len() != steps || p.len() != steps || m.len() != steps {
            return Err(Error::shape("series with differing step counts"));
        }
        for ((yr, pr), mr) in y.iter().zip(p).zip(m) {
            if yr.len() != pr.len() || yr.len() != mr.len() {
                return Err(Error::shape("rows with differing feature counts"));
            }
            for ((a, b), &w) in yr.iter().zip(pr).zip(mr) {
                if w != 0 {
                    total += (a - b) * (a - b);
                }
            }
        }
    }
    if steps == 0 {
        return Ok(0.0);
    }
    Ok(total / (truth.len() * steps) as f64)
}

/// Shape of the forecaster.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForecastConfig {
    /// Context (encoder) hours.
    pub context: usize,
    /// Forecast (decoder) hours.
    pub horizon: usize,
    /// Hours of history fed to every step.
    pub lag: usize,
    pub hidden: usize,
    /// Window start spacing; `None` uses one window at the series start.
    #[serde(default)]
    pub stride: Option<usize>,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            context: 24,
            horizon: 24,
            lag: 3,
            hidden: 50,
            stride: None,
        }
    }
}

impl ForecastConfig {
    /// The three-hours-ahead-from-three-hours task used for embeddings.
    pub fn three_to_three(block_len: usize) -> Self {
        Self {
            context: 3,
            horizon: 3,
            lag: 3,
            hidden: 50,
            stride: Some(block_len.max(1)),
        }
    }

    pub fn input_dim(&self, n_features: usize) -> usize {
        2 * self.lag * n_features + 2 * n_features
    }

    /// Start offsets of the windows cut from a series of `hours` hours.
    pub fn window_starts(&self, hours: usize) -> Vec<usize> {
        let span = self.context + self.horizon;
        if hours < span {
            return Vec::new();
        }
        match self.stride {
            None => vec![0],
            Some(s) => (0..=hours - span).step_by(s.max(1)).collect(),
        }
    }
}

/// Parameter layout inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    d: usize,
    h: usize,
    f: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    skip: usize,
    len: usize,
}

impl Layout {
    fn new(cfg: &ForecastConfig, f: usize) -> Self {
        let d = cfg.input_dim(f);
        let h = cfg.hidden;
        let w1 = 0;
        let b1 = w1 + h * d;
        let w2 = b1 + h;
        let b2 = w2 + f * h;
        let skip = b2 + f;
        let len = skip + f * d;
        Self { d, h, f, w1, b1, w2, b2, skip, len }
    }
}

/// One teacher-forced training step: encoded input, target row and its mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub mask: Vec<u8>,
}

/// Context and forecast rows of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub values: Vec<Vec<f64>>,
    pub mask: Vec<Vec<u8>>,
}

/// Trainable forecaster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastModel {
    pub config: ForecastConfig,
    pub n_features: usize,
    params: Vec<f64>,
    trained: bool,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config_hash: String,
    model: ForecastModel,
}

impl ForecastModel {
    /// Model with all parameters zero, not marked as trained.
    pub fn zeros(config: ForecastConfig, n_features: usize) -> Self {
        let len = Layout::new(&config, n_features).len;
        Self {
            config,
            n_features,
            params: vec![0.0; len],
            trained: false,
        }
    }

    /// Model with Gaussian hidden weights scaled by fan-in.
    pub fn init(config: ForecastConfig, n_features: usize, seed: u64) -> Self {
        use rand_distr::{Distribution, Normal};
        let mut m = Self::zeros(config, n_features);
        let l = m.layout();
        let mut rng = crate::rng::derived_rng(seed, "forecast-init", 0);
        let n1 = Normal::new(0.0, 1.0 / (l.d as f64).sqrt()).unwrap();
        let n2 = Normal::new(0.0, 1.0 / (l.h.max(1) as f64).sqrt()).unwrap();
        for w in &mut m.params[l.w1..l.b1] {
            *w = n1.sample(&mut rng);
        }
        for w in &mut m.params[l.w2..l.b2] {
            *w = 0.1 * n2.sample(&mut rng);
        }
        m
    }

    /// Closed-form persistence forecaster: every step repeats the previous hour.
    pub fn persistence(config: ForecastConfig, n_features: usize) -> Self {
        let mut m = Self::zeros(config, n_features);
        let l = m.layout();
        let last = (m.config.lag - 1) * n_features;
        for f in 0..n_features {
            m.params[l.skip + f * l.d + last + f] = 1.0;
        }
        m.trained = true;
        m
    }

    fn layout(&self) -> Layout {
        Layout::new(&self.config, self.n_features)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub(crate) fn mark_trained(&mut self) {
        self.trained = true;
    }

    pub fn input_dim(&self) -> usize {
        self.layout().d
    }

    /// Hidden activations and prediction for one encoded input.
    fn forward(&self, input: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        let l = self.layout();
        let p = &self.params;
        for (j, h) in hidden.iter_mut().enumerate() {
            let row = &p[l.w1 + j * l.d..l.w1 + (j + 1) * l.d];
            let a: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + p[l.b1 + j];
            *h = a.tanh();
        }
        for (f, o) in out.iter_mut().enumerate() {
            let w2 = &p[l.w2 + f * l.h..l.w2 + (f + 1) * l.h];
            let s = &p[l.skip + f * l.d..l.skip + (f + 1) * l.d];
            *o = p[l.b2 + f]
                + w2.iter().zip(hidden.iter()).map(|(w, h)| w * h).sum::<f64>()
                + s.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
        }
    }

    /// Prediction for one encoded input.
    pub fn predict_step(&self, input: &[f64]) -> Vec<f64> {
        let mut hidden = vec![0.0; self.config.hidden];
        let mut out = vec![0.0; self.n_features];
        self.forward(input, &mut hidden, &mut out);
        out
    }

    /// Mean masked squared error over samples and its gradient.
    pub fn loss_and_gradient(&self, samples: &[Sample]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.accumulate(samples.iter(), &mut grad);
        (loss, grad)
    }

    /// Mean masked squared error over samples.
    pub fn loss(&self, samples: &[Sample]) -> f64 {
        let mut hidden = vec![0.0; self.config.hidden];
        let mut out = vec![0.0; self.n_features];
        let mut total = 0.0;
        for s in samples {
            self.forward(&s.input, &mut hidden, &mut out);
            for ((o, y), &m) in out.iter().zip(&s.target).zip(&s.mask) {
                if m != 0 {
                    total += (o - y) * (o - y);
                }
            }
        }
        if samples.is_empty() {
            0.0
        } else {
            total / samples.len() as f64
        }
    }

    /// Adds the gradient of the mean loss over `samples` into `grad`; returns the loss.
    pub(crate) fn accumulate<'a>(&self, samples: impl ExactSizeIterator<Item = &'a Sample>, grad: &mut [f64]) -> f64 {
        if samples.len() == 0 {
            return 0.0;
        }
        let l = self.layout();
        let scale = 1.0 / samples.len() as f64;
        let mut hidden = vec![0.0; l.h];
        let mut out = vec![0.0; l.f];
        let mut g_out = vec![0.0; l.f];
        let mut total = 0.0;
        for s in samples {
            self.forward(&s.input, &mut hidden, &mut out);
            let mut any = false;
            for f in 0..l.f {
                let r = if s.mask[f] != 0 { out[f] - s.target[f] } else { 0.0 };
                total += r * r;
                g_out[f] = 2.0 * r * scale;
                any |= r != 0.0;
            }
            if any {
                self.backward_step(&s.input, &hidden, &g_out, grad, None);
            }
        }
        total * scale
    }

    /// Adds parameter gradients of one step given `∂L/∂ŷ`; optionally writes `∂L/∂u`.
    fn backward_step(&self, input: &[f64], hidden: &[f64], g_out: &[f64], grad: &mut [f64], mut g_in: Option<&mut [f64]>) {
        let l = self.layout();
        let p = &self.params;
        let mut g_hid = vec![0.0; l.h];
        if let Some(gi) = g_in.as_deref_mut() {
            gi.iter_mut().for_each(|v| *v = 0.0);
        }
        for f in 0..l.f {
            let g = g_out[f];
            if g == 0.0 {
                continue;
            }
            grad[l.b2 + f] += g;
            let w2 = l.w2 + f * l.h;
            for j in 0..l.h {
                grad[w2 + j] += g * hidden[j];
                g_hid[j] += g * p[w2 + j];
            }
            let sk = l.skip + f * l.d;
            for (gw, x) in grad[sk..sk + l.d].iter_mut().zip(input) {
                *gw += g * x;
            }
            if let Some(gi) = g_in.as_deref_mut() {
                for (v, w) in gi.iter_mut().zip(&p[sk..sk + l.d]) {
                    *v += g * w;
                }
            }
        }
        for j in 0..l.h {
            let ga = g_hid[j] * (1.0 - hidden[j] * hidden[j]);
            if ga == 0.0 {
                continue;
            }
            grad[l.b1 + j] += ga;
            let w1 = l.w1 + j * l.d;
            for (gw, x) in grad[w1..w1 + l.d].iter_mut().zip(input) {
                *gw += ga * x;
            }
            if let Some(gi) = g_in.as_deref_mut() {
                for (v, w) in gi.iter_mut().zip(&p[w1..w1 + l.d]) {
                    *v += ga * w;
                }
            }
        }
    }

    /// Context and forecast rows of every window of a series.
    pub fn windows(&self, series: &DenseSeries) -> Result<Vec<Window>> {
        self.check_width(&series.values)?;
        let cfg = &self.config;
        Ok(cfg
            .window_starts(series.len())
            .into_iter()
            .map(|start| {
                let end = start + cfg.context + cfg.horizon;
                Window {
                    values: series.values[start..end].to_vec(),
                    mask: series.mask[start..end].to_vec(),
                }
            })
            .collect())
    }

    /// Free-running masked MSE over windows, as in evaluation.
    pub fn rollout_loss(&self, windows: &[Window]) -> f64 {
        let mut grad = vec![0.0; self.params.len()];
        self.accumulate_rollout(windows.iter(), &mut grad)
    }

    /// Free-running masked MSE over windows and its gradient through the rollout.
    pub fn rollout_loss_and_gradient(&self, windows: &[Window]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.accumulate_rollout(windows.iter(), &mut grad);
        (loss, grad)
    }

    /// Backpropagation through the rollout: every prediction also feeds the
    /// value slots of the next `lag` inputs.
    pub(crate) fn accumulate_rollout<'a>(&self, windows: impl ExactSizeIterator<Item = &'a Window>, grad: &mut [f64]) -> f64 {
        let cfg = &self.config;
        let n = windows.len();
        if n == 0 || cfg.horizon == 0 {
            return 0.0;
        }
        let l = self.layout();
        let (c, hz, lag, f) = (cfg.context, cfg.horizon, cfg.lag, l.f);
        let scale = 1.0 / (n * hz) as f64;
        let mut inputs = vec![vec![0.0; l.d]; hz];
        let mut hiddens = vec![vec![0.0; l.h]; hz];
        let mut dy = vec![vec![0.0; f]; hz];
        let mut g_in = vec![0.0; l.d];
        let mut out = vec![0.0; f];
        let mut total = 0.0;
        for w in windows {
            let summary = self.summary(&w.values[..c], &w.mask[..c]);
            let mut values = w.values[..c].to_vec();
            let mut mask = w.mask[..c].to_vec();
            for k in 0..hz {
                inputs[k] = self.encode(&values, &mask, c + k, &summary);
                self.forward(&inputs[k], &mut hiddens[k], &mut out);
                for i in 0..f {
                    let r = if w.mask[c + k][i] != 0 { out[i] - w.values[c + k][i] } else { 0.0 };
                    total += r * r;
                    dy[k][i] = 2.0 * r * scale;
                }
                values.push(out.clone());
                mask.push(vec![1; f]);
            }
            for k in (0..hz).rev() {
                let (head, tail) = dy.split_at_mut(k);
                self.backward_step(&inputs[k], &hiddens[k], &tail[0], grad, Some(&mut g_in));
                for j in 0..lag {
                    // slot j of step k holds row c + k + j - lag
                    if k + j >= lag {
                        let kk = k + j - lag;
                        for i in 0..f {
                            head[kk][i] += g_in[j * f + i];
                        }
                    }
                }
            }
        }
        total * scale
    }

    /// Context encoding: mean values then observation rates over the rows.
    fn summary(&self, values: &[Vec<f64>], mask: &[Vec<u8>]) -> Vec<f64> {
        let f = self.n_features;
        let mut s = vec![0.0; 2 * f];
        if values.is_empty() {
            return s;
        }
        for (vr, mr) in values.iter().zip(mask) {
            for i in 0..f {
                s[i] += vr[i];
                s[f + i] += f64::from(mr[i]);
            }
        }
        let n = values.len() as f64;
        s.iter_mut().for_each(|x| *x /= n);
        s
    }

    /// Encodes the input of the step following row `t - 1` (rows before 0 are zero).
    fn encode(&self, values: &[Vec<f64>], mask: &[Vec<u8>], t: usize, summary: &[f64]) -> Vec<f64> {
        let f = self.n_features;
        let lag = self.config.lag;
        let mut u = vec![0.0; self.input_dim()];
        for j in 0..lag {
            // slot j holds row t - lag + j
            if t + j >= lag {
                let r = t + j - lag;
                u[j * f..(j + 1) * f].copy_from_slice(&values[r]);
                for i in 0..f {
                    u[lag * f + j * f + i] = f64::from(mask[r][i]);
                }
            }
        }
        u[2 * lag * f..].copy_from_slice(summary);
        u
    }

    fn check_width(&self, rows: &[Vec<f64>]) -> Result<()> {
        if rows.iter().any(|r| r.len() != self.n_features) {
            return Err(Error::shape(format!("model expects {} features", self.n_features)));
        }
        Ok(())
    }

    /// Teacher-forced samples of every window of a series.
    pub fn samples(&self, series: &DenseSeries) -> Result<Vec<Sample>> {
        self.check_width(&series.values)?;
        let cfg = &self.config;
        let mut out = Vec::new();
        for start in cfg.window_starts(series.len()) {
            let ctx = start..start + cfg.context;
            let summary = self.summary(&series.values[ctx.clone()], &series.mask[ctx]);
            let end = start + cfg.context + cfg.horizon;
            let vals = &series.values[start..end];
            let mask = &series.mask[start..end];
            for t in cfg.context..cfg.context + cfg.horizon {
                out.push(Sample {
                    input: self.encode(vals, mask, t, &summary),
                    target: vals[t].clone(),
                    mask: mask[t].clone(),
                });
            }
        }
        Ok(out)
    }

    /// Free-running forecast of `horizon` hours after the given context rows.
    pub fn predict(&self, context_values: &[Vec<f64>], context_mask: &[Vec<u8>]) -> Result<Vec<Vec<f64>>> {
        if context_values.len() != self.config.context || context_mask.len() != self.config.context {
            return Err(Error::shape(format!(
                "context of {} hours, model expects {}",
                context_values.len(),
                self.config.context
            )));
        }
        self.check_width(context_values)?;
        let summary = self.summary(context_values, context_mask);
        let mut values = context_values.to_vec();
        let mut mask = context_mask.to_vec();
        let mut out = Vec::with_capacity(self.config.horizon);
        for _ in 0..self.config.horizon {
            let u = self.encode(&values, &mask, values.len(), &summary);
            let y = self.predict_step(&u);
            values.push(y.clone());
            mask.push(vec![1; self.n_features]);
            out.push(y);
        }
        Ok(out)
    }

    /// Masked MSE of free-running forecasts over every window of `series`.
    pub fn rollout_mse(&self, series: &[DenseSeries]) -> Result<f64> {
        let cfg = &self.config;
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        let mut mask = Vec::new();
        for s in series {
            for start in cfg.window_starts(s.len()) {
                let c = start + cfg.context;
                pred.push(self.predict(&s.values[start..c], &s.mask[start..c])?);
                truth.push(s.values[c..c + cfg.horizon].to_vec());
                mask.push(s.mask[c..c + cfg.horizon].to_vec());
            }
        }
        if truth.is_empty() {
            return Err(Error::data(format!(
                "no series covers {} context + {} forecast hours",
                cfg.context, cfg.horizon
            )));
        }
        masked_mse(&truth, &pred, &mask)
    }

    /// Hidden activations averaged over the hours of a block.
    ///
    /// The block serves as its own context; step `j` sees the `lag` hours up to
    /// and including hour `j`, zero-padded before the block start.
    pub fn block_embedding(&self, block: &Block) -> Result<Vec<f64>> {
        if !self.trained {
            return Err(Error::param("block embedding from an untrained model"));
        }
        self.check_width(&block.data)?;
        let summary = self.summary(&block.data, &block.mask);
        let mut acc = vec![0.0; self.config.hidden];
        let mut hidden = vec![0.0; self.config.hidden];
        let mut out = vec![0.0; self.n_features];
        for j in 0..block.len() {
            let u = self.encode(&block.data, &block.mask, j + 1, &summary);
            self.forward(&u, &mut hidden, &mut out);
            for (a, h) in acc.iter_mut().zip(&hidden) {
                *a += h;
            }
        }
        let n = block.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Ok(acc)
    }

    /// Hash of the configuration and feature count.
    pub fn config_hash(&self) -> String {
        let text = serde_json::to_string(&(&self.config, self.n_features)).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn to_checkpoint(&self) -> Result<String> {
        Ok(serde_json::to_string(&Checkpoint {
            version: 1,
            config_hash: self.config_hash(),
            model: self.clone(),
        })?)
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.version != 1 {
            return Err(Error::data(format!("unsupported checkpoint version {}", ck.version)));
        }
        if ck.model.params.len() != ck.model.layout().len {
            return Err(Error::data("checkpoint parameter count does not match its config"));
        }
        if ck.model.config_hash() != ck.config_hash {
            return Err(Error::data("checkpoint config hash mismatch"));
        }
        Ok(ck.model)
    }
}

impl BlockEmbedder for ForecastModel {
    fn embed(&self, block: &Block) -> Result<Vec<f64>> {
        self.block_embedding(block)
    }
}

/// Risk of one or more models on a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub mse: f64,
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub se: f64,
    pub n_test: usize,
}

impl RiskEstimate {
    /// Mean and standard error of per-seed risks.
    pub fn aggregate(per_seed: Vec<f64>, n_test: usize) -> Result<Self> {
        if per_seed.is_empty() {
            return Err(Error::data("no risks to aggregate"));
        }
        let (mean, se) = crate::eval::stats::mean_se(&per_seed);
        Ok(Self {
            mse: mean,
            per_seed,
            mean,
            se,
            n_test,
        })
    }
}

/// Masked MSE of a model on original test series.
pub fn evaluate(model: &ForecastModel, test: &[DenseSeries]) -> Result<RiskEstimate> {
    if test.is_empty() {
        return Err(Error::data("empty test set"));
    }
    let mse = model.rollout_mse(test)?;
    RiskEstimate::aggregate(vec![mse], test.len())
}
