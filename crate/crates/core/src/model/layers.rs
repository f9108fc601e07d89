use crate::autodiff::{Tape, Var};
use crate::model::params::{ParamId, ParamStore};
use crate::rng::Stream;
use crate::scalar::Scalar;
use crate::tensor::{Result, Tensor};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Per-pass state threaded through the layers.
pub struct Forward<'t, T: Scalar> {
    pub tape: &'t Tape<T>,
    pub store: &'t ParamStore<T>,
    /// Dropout stream; `None` disables dropout.
    pub dropout: Option<(f64, Stream)>,
    /// When set, every attention probability tensor is recorded here.
    pub probes: Option<Vec<AttentionProbe<T>>>,
}

/// Attention weights of one attention block, `[batch, queries, keys]` per head.
#[derive(Debug, Clone)]
pub struct AttentionProbe<T> {
    pub layer: String,
    pub head: usize,
    pub probs: Tensor<T>,
}

impl<'t, T: Scalar> Forward<'t, T> {
    pub fn param(&self, id: ParamId) -> Var<'t, T> {
        self.store.bind(self.tape, id)
    }

    pub fn dropout(&mut self, x: Var<'t, T>) -> Result<Var<'t, T>> {
        match &mut self.dropout {
            Some((rate, stream)) if *rate > 0.0 => x.dropout(*rate, stream),
            _ => Ok(x),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        seed: u64,
        name: &str,
        fan_in: usize,
        fan_out: usize,
    ) -> Self {
        Self {
            weight: store.glorot(seed, format!("{name}.weight"), fan_in, fan_out),
            bias: store.constant(format!("{name}.bias"), fan_out, T::zero()),
        }
    }

    pub fn forward<'t, T: Scalar>(
        &self,
        cx: &Forward<'t, T>,
        x: &Var<'t, T>,
    ) -> Result<Var<'t, T>> {
        x.matmul(&cx.param(self.weight))?.add(&cx.param(self.bias))
    }
}

#[derive(Debug, Clone)]
pub struct Norm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl Norm {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, width: usize) -> Self {
        Self {
            gamma: store.constant(format!("{name}.gamma"), width, T::one()),
            beta: store.constant(format!("{name}.beta"), width, T::zero()),
        }
    }

    pub fn forward<'t, T: Scalar>(
        &self,
        cx: &Forward<'t, T>,
        x: &Var<'t, T>,
    ) -> Result<Var<'t, T>> {
        x.layer_norm(
            &cx.param(self.gamma),
            &cx.param(self.beta),
            T::lit(LAYER_NORM_EPS),
        )
    }
}

#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub name: String,
    pub heads: usize,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
}

impl MultiHeadAttention {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        seed: u64,
        name: &str,
        d_model: usize,
        heads: usize,
    ) -> Self {
        Self {
            name: name.to_string(),
            heads,
            query: Linear::new(store, seed, &format!("{name}.query"), d_model, d_model),
            key: Linear::new(store, seed, &format!("{name}.key"), d_model, d_model),
            value: Linear::new(store, seed, &format!("{name}.value"), d_model, d_model),
            output: Linear::new(store, seed, &format!("{name}.output"), d_model, d_model),
        }
    }

    /// `q: [B, Tq, d]`, `kv: [B, Tk, d]` -> `[B, Tq, d]`.
    ///
    /// Each head attends with `softmax(Qh Khᵀ / sqrt(d / heads)) Vh`; head
    /// outputs are concatenated and projected.
    pub fn forward<'t, T: Scalar>(
        &self,
        cx: &mut Forward<'t, T>,
        q: &Var<'t, T>,
        kv: &Var<'t, T>,
    ) -> Result<Var<'t, T>> {
        let d = *q.shape().last().expect("rank 3");
        let dh = d / self.heads;
        let scale = T::one() / T::from_usize_lossy(dh).sqrt();
        let qs = self.query.forward(cx, q)?;
        let ks = self.key.forward(cx, kv)?;
        let vs = self.value.forward(cx, kv)?;
        let mut outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = qs.narrow(2, h * dh, dh)?;
            let kh = ks.narrow(2, h * dh, dh)?;
            let vh = vs.narrow(2, h * dh, dh)?;
            let probs = qh.matmul(&kh.transpose()?)?.scale(scale).softmax(2)?;
            if let Some(probes) = cx.probes.as_mut() {
                probes.push(AttentionProbe {
                    layer: self.name.clone(),
                    head: h,
                    probs: (*probs.value()).clone(),
                });
            }
            outs.push(probs.matmul(&vh)?);
        }
        let joined = if outs.len() == 1 {
            outs[0]
        } else {
            cx.tape.concat(&outs, 2)?
        };
        self.output.forward(cx, &joined)
    }
}

#[derive(Debug, Clone)]
pub struct FeedForward {
    pub inner: Linear,
    pub outer: Linear,
}

impl FeedForward {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        seed: u64,
        name: &str,
        d_model: usize,
        d_ffn: usize,
    ) -> Self {
        Self {
            inner: Linear::new(store, seed, &format!("{name}.inner"), d_model, d_ffn),
            outer: Linear::new(store, seed, &format!("{name}.outer"), d_ffn, d_model),
        }
    }

    pub fn forward<'t, T: Scalar>(
        &self,
        cx: &Forward<'t, T>,
        x: &Var<'t, T>,
    ) -> Result<Var<'t, T>> {
        let h = self.inner.forward(cx, x)?.relu();
        self.outer.forward(cx, &h)
    }
}

/// Post-norm residual: `norm(x + dropout(sublayer))`.
fn residual<'t, T: Scalar>(
    cx: &mut Forward<'t, T>,
    norm: &Norm,
    x: &Var<'t, T>,
    sub: Var<'t, T>,
) -> Result<Var<'t, T>> {
    let sub = cx.dropout(sub)?;
    norm.forward(cx, &x.add(&sub)?)
}

#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub attention: MultiHeadAttention,
    pub norm1: Norm,
    pub ffn: FeedForward,
    pub norm2: Norm,
}

impl EncoderLayer {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        seed: u64,
        name: &str,
        d_model: usize,
        heads: usize,
        d_ffn: usize,
    ) -> Self {
        Self {
            attention: MultiHeadAttention::new(
                store,
                seed,
                &format!("{name}.attention"),
                d_model,
                heads,
            ),
            norm1: Norm::new(store, &format!("{name}.norm1"), d_model),
            ffn: FeedForward::new(store, seed, &format!("{name}.ffn"), d_model, d_ffn),
            norm2: Norm::new(store, &format!("{name}.norm2"), d_model),
        }
    }

    pub fn forward<'t, T: Scalar>(
        &self,
        cx: &mut Forward<'t, T>,
        x: &Var<'t, T>,
    ) -> Result<Var<'t, T>> {
        let a = self.attention.forward(cx, x, x)?;
        let x = residual(cx, &self.norm1, x, a)?;
        let f = self.ffn.forward(cx, &x)?;
        residual(cx, &self.norm2, &x, f)
    }
}

#[derive(Debug, Clone)]
pub struct DecoderLayer {
    pub self_attention: MultiHeadAttention,
    pub norm1: Norm,
    pub cross_attention: MultiHeadAttention,
    pub norm2: Norm,
    pub ffn: FeedForward,
    pub norm3: Norm,
}

impl DecoderLayer {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        seed: u64,
        name: &str,
        d_model: usize,
        heads: usize,
        d_ffn: usize,
    ) -> Self {
        Self {
            self_attention: MultiHeadAttention::new(
                store,
                seed,
                &format!("{name}.self_attention"),
                d_model,
                heads,
            ),
            norm1: Norm::new(store, &format!("{name}.norm1"), d_model),
            cross_attention: MultiHeadAttention::new(
                store,
                seed,
                &format!("{name}.cross_attention"),
                d_model,
                heads,
            ),
            norm2: Norm::new(store, &format!("{name}.norm2"), d_model),
            ffn: FeedForward::new(store, seed, &format!("{name}.ffn"), d_model, d_ffn),
            norm3: Norm::new(store, &format!("{name}.norm3"), d_model),
        }
    }

    pub fn forward<'t, T: Scalar>(
        &self,
        cx: &mut Forward<'t, T>,
        x: &Var<'t, T>,
        memory: &Var<'t, T>,
    ) -> Result<Var<'t, T>> {
        let a = self.self_attention.forward(cx, x, x)?;
        let x = residual(cx, &self.norm1, x, a)?;
        let c = self.cross_attention.forward(cx, &x, memory)?;
        let x = residual(cx, &self.norm2, &x, c)?;
        let f = self.ffn.forward(cx, &x)?;
        residual(cx, &self.norm3, &x, f)
    }
}

/// Fixed sinusoidal encoding `[positions, width]`:
/// `pe[p, 2i] = sin(p / 10000^(2i/width))`, `pe[p, 2i+1] = cos(...)`.
pub fn sinusoidal_encoding<T: Scalar>(positions: usize, width: usize) -> Tensor<T> {
    let mut data = Vec::with_capacity(positions * width);
    for p in 0..positions {
        for j in 0..width {
            let exponent = (2 * (j / 2)) as f64 / width as f64;
            let angle = p as f64 / 10_000f64.powf(exponent);
            data.push(T::lit(if j % 2 == 0 { angle.sin() } else { angle.cos() }));
        }
    }
    Tensor::new(vec![positions, width], data).expect("positive dims")
}
