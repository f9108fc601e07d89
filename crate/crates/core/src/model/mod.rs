//! The triple-path encoder-decoder classifier.
//!
//! Three independent encoder stacks read the same scaled window as time
//! tokens, sensor tokens (transposed window) and frequency tokens (rows of
//! the 2D DFT magnitude). Their outputs are concatenated along the token
//! axis into the encoder memory. The decoder reads the five statistic
//! tokens of the window, cross-attends to the memory, and a mean-pooled
//! linear head produces class logits.

mod config;
mod layers;
mod params;

pub use config::{parse_paths, EncoderPath, ModelConfig};
pub use layers::{
    sinusoidal_encoding, AttentionProbe, DecoderLayer, EncoderLayer, FeedForward, Forward, Linear,
    MultiHeadAttention, Norm, LAYER_NORM_EPS,
};
pub use params::{Param, ParamId, ParamStore};

use crate::autodiff::{log_sum_exp, Mode, Tape, Var};
use crate::error::{Error, Result};
use crate::features::{
    engineer_decoder_features, fft2d_magnitude, DecoderFeatures, Window, STAT_TOKENS,
};
use crate::rng::Stream;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Model inputs derived once per window: the three token views and the
/// decoder statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedWindow<T> {
    /// `[W, k]`
    pub time: Tensor<T>,
    /// `[k, W]`
    pub sensor: Tensor<T>,
    /// `[W, k]`, DFT magnitude scaled by `1 / sqrt(W k)`.
    pub frequency: Tensor<T>,
    /// `[5, k]`
    pub stats: Tensor<T>,
}

impl<T: Scalar> PreparedWindow<T> {
    pub fn new(window: &Window<T>) -> Result<Self> {
        let (w, k) = (window.len(), window.features());
        let norm = T::one() / T::from_usize_lossy(w * k).sqrt();
        Ok(Self {
            time: window.values().clone(),
            sensor: window.values().transpose_last()?,
            frequency: fft2d_magnitude(window)?.values().map(|v| v * norm),
            stats: engineer_decoder_features(window)?.into_tensor(),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.time.shape()[0], self.time.shape()[1])
    }
}

/// Stacked model inputs with a leading batch axis.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub size: usize,
    pub time: Tensor<T>,
    pub sensor: Tensor<T>,
    pub frequency: Tensor<T>,
    pub stats: Tensor<T>,
}

impl<T: Scalar> Batch<T> {
    pub fn stack(samples: &[&PreparedWindow<T>]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Usage("empty batch".into()))?;
        let (w, k) = first.shape();
        if let Some(bad) = samples.iter().find(|s| s.shape() != (w, k)) {
            let (bw, bk) = bad.shape();
            return Err(Error::Shape {
                what: "batch window".into(),
                expected: vec![w, k],
                actual: vec![bw, bk],
            });
        }
        let stack = |get: fn(&PreparedWindow<T>) -> &Tensor<T>, dims: [usize; 2]| {
            let data = samples
                .iter()
                .flat_map(|s| get(s).data().iter().copied())
                .collect();
            Tensor::new(vec![samples.len(), dims[0], dims[1]], data)
        };
        Ok(Self {
            size: samples.len(),
            time: stack(|s| &s.time, [w, k])?,
            sensor: stack(|s| &s.sensor, [k, w])?,
            frequency: stack(|s| &s.frequency, [w, k])?,
            stats: stack(|s| &s.stats, [STAT_TOKENS, k])?,
        })
    }

    fn view(&self, path: EncoderPath) -> &Tensor<T> {
        match path {
            EncoderPath::Time => &self.time,
            EncoderPath::Sensor => &self.sensor,
            EncoderPath::Frequency => &self.frequency,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PathEncoder {
    pub path: EncoderPath,
    pub input: Linear,
    pub layers: Vec<EncoderLayer>,
}

#[derive(Debug, Clone)]
pub struct ItstModel<T> {
    config: ModelConfig,
    seed: u64,
    store: ParamStore<T>,
    paths: Vec<PathEncoder>,
    stats_input: Linear,
    decoder: Vec<DecoderLayer>,
    head: Linear,
}

impl<T: Scalar> ItstModel<T> {
    /// Glorot-uniform weights and zero biases. Every parameter is drawn
    /// from a stream named after it, so toggling a path leaves all other
    /// parameters unchanged.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (d, h, f) = (config.d_model, config.heads, config.d_ffn);
        let mut store = ParamStore::new();
        let paths = config
            .enabled_paths
            .iter()
            .map(|&path| {
                let base = format!("encoder.{path}");
                let input = Linear::new(
                    &mut store,
                    seed,
                    &format!("{base}.input"),
                    config.path_token_width(path),
                    d,
                );
                let layers = (0..config.encoder_layers)
                    .map(|i| {
                        EncoderLayer::new(&mut store, seed, &format!("{base}.layer{i}"), d, h, f)
                    })
                    .collect();
                PathEncoder {
                    path,
                    input,
                    layers,
                }
            })
            .collect();
        let stats_input = Linear::new(&mut store, seed, "decoder.input", config.features, d);
        let decoder = (0..config.decoder_layers)
            .map(|i| DecoderLayer::new(&mut store, seed, &format!("decoder.layer{i}"), d, h, f))
            .collect();
        let head = Linear::new(&mut store, seed, "head", d, config.num_classes);
        Ok(Self {
            config,
            seed,
            store,
            paths,
            stats_input,
            decoder,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    pub fn parameter_census(&self) -> Vec<(String, usize)> {
        self.store.census()
    }

    pub fn parameter_count(&self) -> usize {
        self.store.numel()
    }

    pub fn check_window(&self, rows: usize, cols: usize) -> Result<()> {
        let expected = [self.config.window, self.config.features];
        if [rows, cols] != expected {
            return Err(Error::Shape {
                what: "model input window".into(),
                expected: expected.to_vec(),
                actual: vec![rows, cols],
            });
        }
        Ok(())
    }

    fn embed<'t>(
        &self,
        cx: &Forward<'t, T>,
        input: &Linear,
        tokens: Tensor<T>,
    ) -> Result<Var<'t, T>> {
        let positions = tokens.shape()[1];
        let x = input.forward(cx, &cx.tape.constant(tokens))?;
        let pe = cx
            .tape
            .constant(sinusoidal_encoding(positions, self.config.d_model));
        Ok(x.add(&pe)?)
    }

    /// Encoder memory `[B, memory_tokens, d_model]`, paths concatenated in
    /// time, sensor, frequency order.
    pub fn encode<'t>(&self, cx: &mut Forward<'t, T>, batch: &Batch<T>) -> Result<Var<'t, T>> {
        let (w, k) = (batch.time.shape()[1], batch.time.shape()[2]);
        self.check_window(w, k)?;
        let mut maps = Vec::with_capacity(self.paths.len());
        for enc in &self.paths {
            let x = self.embed(cx, &enc.input, batch.view(enc.path).clone())?;
            let mut x = cx.dropout(x)?;
            for layer in &enc.layers {
                x = layer.forward(cx, &x)?;
            }
            maps.push(x);
        }
        if maps.len() == 1 {
            Ok(maps[0])
        } else {
            Ok(cx.tape.concat(&maps, 1)?)
        }
    }

    /// Decoder output `[B, 5, d_model]`.
    pub fn decode<'t>(
        &self,
        cx: &mut Forward<'t, T>,
        stats: &Tensor<T>,
        memory: &Var<'t, T>,
    ) -> Result<Var<'t, T>> {
        let shape = stats.shape();
        if shape.len() != 3 || shape[1..] != [STAT_TOKENS, self.config.features] {
            return Err(Error::Shape {
                what: "decoder statistics".into(),
                expected: vec![
                    shape.first().copied().unwrap_or(1),
                    STAT_TOKENS,
                    self.config.features,
                ],
                actual: shape.to_vec(),
            });
        }
        let x = self.embed(cx, &self.stats_input, stats.clone())?;
        let mut x = cx.dropout(x)?;
        for layer in &self.decoder {
            x = layer.forward(cx, &x, memory)?;
        }
        Ok(x)
    }

    /// Class logits `[B, num_classes]`.
    pub fn logits<'t>(&self, cx: &mut Forward<'t, T>, batch: &Batch<T>) -> Result<Var<'t, T>> {
        let memory = self.encode(cx, batch)?;
        let decoded = self.decode(cx, &batch.stats, &memory)?;
        let pooled = decoded.mean_axis(1)?;
        Ok(self.head.forward(cx, &pooled)?)
    }

    fn eval_pass<R>(&self, f: impl for<'t> FnOnce(&mut Forward<'t, T>) -> Result<R>) -> Result<R> {
        let tape = Tape::new(Mode::Eval);
        let mut cx = Forward {
            tape: &tape,
            store: &self.store,
            dropout: None,
            probes: None,
        };
        f(&mut cx)
    }

    /// Mean cross-entropy of a batch with dropout disabled.
    pub fn loss(&self, batch: &Batch<T>, labels: &[usize]) -> Result<T> {
        self.eval_pass(|cx| {
            Ok(self
                .logits(cx, batch)?
                .cross_entropy(labels)?
                .value()
                .item())
        })
    }

    /// Training loss and the gradient of every parameter, in [`ParamId`]
    /// order. Dropout is active when a stream is supplied and the configured
    /// rate is positive.
    pub fn loss_and_grads(
        &self,
        batch: &Batch<T>,
        labels: &[usize],
        dropout: Option<Stream>,
    ) -> Result<(T, Vec<Tensor<T>>)> {
        let tape = Tape::new(Mode::Train);
        let mut cx = Forward {
            tape: &tape,
            store: &self.store,
            dropout: dropout.map(|s| (self.config.dropout, s)),
            probes: None,
        };
        let loss = self.logits(&mut cx, batch)?.cross_entropy(labels)?;
        tape.backward(loss)?;
        let mut grads: Vec<Tensor<T>> = self
            .store
            .iter()
            .map(|(_, p)| Tensor::zeros(p.value.shape()))
            .collect();
        for (key, g) in tape.param_grads() {
            grads[key] = g;
        }
        Ok((loss.value().item(), grads))
    }

    /// Class probabilities `[B, num_classes]` with dropout disabled.
    pub fn predict_proba(&self, batch: &Batch<T>) -> Result<Tensor<T>> {
        self.eval_pass(|cx| {
            let logits = self.logits(cx, batch)?;
            Ok((*logits.softmax(1)?.value()).clone())
        })
    }

    /// Log class probabilities `[B, num_classes]` with dropout disabled.
    pub fn log_proba(&self, batch: &Batch<T>) -> Result<Tensor<T>> {
        let logits = self.eval_pass(|cx| Ok((*self.logits(cx, batch)?.value()).clone()))?;
        let c = self.config.num_classes;
        let mut out = logits;
        for row in out.data_mut().chunks_mut(c) {
            let lse = log_sum_exp(row);
            row.iter_mut().for_each(|v| *v -= lse);
        }
        Ok(out)
    }

    /// Encoder memory of one window, `[memory_tokens, d_model]`.
    pub fn encoder_forward(&self, window: &Window<T>) -> Result<Tensor<T>> {
        let batch = Batch::stack(&[&PreparedWindow::new(window)?])?;
        self.eval_pass(|cx| {
            let m = self.encode(cx, &batch)?;
            let v = m.value();
            Ok(v.reshape(&v.shape()[1..])?)
        })
    }

    /// Decoder output `[5, d_model]` for given statistics and memory.
    pub fn decoder_forward(
        &self,
        feats: &DecoderFeatures<T>,
        memory: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        let stats = feats.values();
        let stats = stats.reshape(&[1, stats.shape()[0], stats.shape()[1]])?;
        let m = memory.reshape(&[1, memory.shape()[0], memory.shape()[1]])?;
        self.eval_pass(|cx| {
            let mem = cx.tape.constant(m);
            let out = self.decode(cx, &stats, &mem)?;
            let v = out.value();
            Ok(v.reshape(&v.shape()[1..])?)
        })
    }

    /// Probability vector over the classes for one scaled window.
    pub fn classify(&self, window: &Window<T>) -> Result<Vec<T>> {
        let batch = Batch::stack(&[&PreparedWindow::new(window)?])?;
        Ok(self.predict_proba(&batch)?.into_data())
    }

    /// Every attention probability tensor of an evaluation pass.
    pub fn trace_attention(&self, window: &Window<T>) -> Result<Vec<AttentionProbe<T>>> {
        let batch = Batch::stack(&[&PreparedWindow::new(window)?])?;
        self.eval_pass(|cx| {
            cx.probes = Some(Vec::new());
            self.logits(cx, &batch)?;
            Ok(cx.probes.take().unwrap_or_default())
        })
    }
}
