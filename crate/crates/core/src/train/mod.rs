//! Training, evaluation and the multi-run experiment harnesses.

mod experiments;
mod metrics;

pub use experiments::{
    ablate, install, random_search, run_repeated, AblationRow, RunStats, SearchResult, SearchSpace,
    Trial, ABLATION_ORDER,
};
pub use metrics::{
    argmax, evaluate, Classifier, ConfusionMatrix, Evaluation, LookupClassifier, UniformClassifier,
};

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::WindowedDataset;
use crate::error::{usage, Error, Result};
use crate::features::Scaler;
use crate::model::{Batch, ItstModel, ModelConfig, PreparedWindow};
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainHyper {
    pub batch_size: usize,
    pub max_steps: usize,
    pub warmup_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Multiplier on the warmup / inverse-sqrt schedule.
    pub lr_factor: f64,
    /// Seeds batch order and dropout.
    pub seed: u64,
    /// Windows per forward pass during evaluation.
    pub eval_batch: usize,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            batch_size: 32,
            max_steps: 3000,
            warmup_steps: 400,
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
            lr_factor: 1.0,
            seed: 0,
            eval_batch: 128,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.warmup_steps == 0 || self.eval_batch == 0 {
            return Err(Error::Config(
                "batch_size, warmup_steps and eval_batch must be >= 1".into(),
            ));
        }
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !unit(self.beta1) || !unit(self.beta2) || !(self.eps > 0.0) || !(self.lr_factor >= 0.0) {
            return Err(Error::Config(
                "Adam betas must lie in [0, 1), eps > 0 and lr_factor >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// `d_model^-0.5 * min(step^-0.5, step * warmup^-1.5)`.
pub fn lr_schedule(step: usize, d_model: usize, warmup: usize) -> Result<f64> {
    if step == 0 {
        return Err(usage("the learning-rate schedule starts at step 1"));
    }
    if warmup == 0 || d_model == 0 {
        return Err(usage("d_model and warmup must be positive"));
    }
    let s = step as f64;
    Ok((d_model as f64).powf(-0.5) * warmup_ramp(s, warmup as f64).min(inverse_sqrt(s)))
}

// `s * w^-1.5`, written as `(s / w) * w^-0.5` so it equals
// `inverse_sqrt(w)` bit for bit at `s == w`.
fn warmup_ramp(s: f64, w: f64) -> f64 {
    (s / w) * inverse_sqrt(w)
}

fn inverse_sqrt(s: f64) -> f64 {
    1.0 / s.sqrt()
}

/// Adam with bias correction over a flat list of parameter tensors.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    beta1: T,
    beta2: T,
    eps: T,
    step: i32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(sizes: impl IntoIterator<Item = usize>, beta1: f64, beta2: f64, eps: f64) -> Self {
        let (m, v): (Vec<_>, Vec<_>) = sizes
            .into_iter()
            .map(|n| (vec![T::zero(); n], vec![T::zero(); n]))
            .unzip();
        Self {
            beta1: T::lit(beta1),
            beta2: T::lit(beta2),
            eps: T::lit(eps),
            step: 0,
            m,
            v,
        }
    }

    pub fn steps(&self) -> usize {
        self.step as usize
    }

    /// Apply one update to `params[i] -= lr * m̂ / (sqrt(v̂) + eps)`.
    pub fn update<'a>(
        &mut self,
        params: impl Iterator<Item = &'a mut [T]>,
        grads: &[Tensor<T>],
        lr: T,
    ) where
        T: 'a,
    {
        self.step += 1;
        let c1 = T::one() - self.beta1.powi(self.step);
        let c2 = T::one() - self.beta2.powi(self.step);
        for (i, p) in params.enumerate() {
            let (m, v, g) = (&mut self.m[i], &mut self.v[i], grads[i].data());
            for j in 0..p.len() {
                m[j] = self.beta1 * m[j] + (T::one() - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (T::one() - self.beta2) * g[j] * g[j];
                let mhat = m[j] / c1;
                let vhat = v[j] / c2;
                p[j] -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

/// Scaled, tokenized train and test splits ready for training.
#[derive(Debug, Clone)]
pub struct PreparedData<T> {
    /// Fitted on the training split only.
    pub scaler: Scaler<T>,
    pub train: Vec<PreparedWindow<T>>,
    pub train_labels: Vec<usize>,
    pub test: Vec<PreparedWindow<T>>,
    pub test_labels: Vec<usize>,
}

impl<T: Scalar> PreparedData<T> {
    /// Fit the scaler on `train`, scale both splits and derive token views
    /// and statistics per window.
    pub fn new(train: &WindowedDataset<f64>, test: &WindowedDataset<f64>) -> Result<Self> {
        let scaler = Scaler::fit(&train.data().cast::<T>())?;
        Self::with_scaler(scaler, train, test)
    }

    pub fn with_scaler(
        scaler: Scaler<T>,
        train: &WindowedDataset<f64>,
        test: &WindowedDataset<f64>,
    ) -> Result<Self> {
        if train.is_empty() || test.is_empty() {
            return Err(usage("train and test splits must be non-empty"));
        }
        Ok(Self {
            train: prepare_split(&scaler, train)?,
            train_labels: train.labels().to_vec(),
            test: prepare_split(&scaler, test)?,
            test_labels: test.labels().to_vec(),
            scaler,
        })
    }

    pub fn window_shape(&self) -> (usize, usize) {
        self.train[0].shape()
    }
}

/// Scale `data` and tokenize every window.
pub fn prepare_split<T: Scalar>(
    scaler: &Scaler<T>,
    data: &WindowedDataset<f64>,
) -> Result<Vec<PreparedWindow<T>>> {
    let scaled = WindowedDataset::new(
        scaler.apply(&data.data().cast::<T>())?,
        data.labels().to_vec(),
    )?;
    scaled.windows().map(|w| PreparedWindow::new(&w)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub model: ModelConfig,
    pub hyper: TrainHyper,
    pub model_seed: u64,
    pub steps: usize,
    /// Cross-entropy of each training batch, dropout active.
    pub loss_curve: Vec<f64>,
    pub test_cc: f64,
    pub test_accuracy: f64,
    pub confusion: ConfusionMatrix,
    /// Excluded from serialized reports so they stay reproducible.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

fn check_data<T: Scalar>(model: &ItstModel<T>, data: &PreparedData<T>) -> Result<()> {
    for w in data.train.iter().chain(&data.test) {
        let (rows, cols) = w.shape();
        model.check_window(rows, cols).map_err(|e| match e {
            Error::Shape {
                expected, actual, ..
            } => Error::Usage(format!(
                "model expects windows of shape {expected:?}, dataset has {actual:?}"
            )),
            other => other,
        })?;
    }
    let classes = model.config().num_classes;
    if let Some(&l) = data
        .train_labels
        .iter()
        .chain(&data.test_labels)
        .find(|&&l| l >= classes)
    {
        return Err(usage(format!(
            "label {l} is outside the model's {classes} classes"
        )));
    }
    Ok(())
}

/// Mini-batch Adam on `data.train` with the warmup schedule, then one
/// evaluation on `data.test`.
///
/// Batches are drawn without replacement from a per-epoch shuffle; each
/// step's dropout masks come from their own stream. The result depends only
/// on the model (config, seed) and `hyper`.
pub fn train<T: Scalar>(
    model: &mut ItstModel<T>,
    data: &PreparedData<T>,
    hyper: &TrainHyper,
) -> Result<TrainReport> {
    let start = Instant::now();
    hyper.validate()?;
    check_data(model, data)?;
    let n = data.train.len();
    let d_model = model.config().d_model;
    let mut adam = Adam::<T>::new(
        model.store().iter().map(|(_, p)| p.value.numel()),
        hyper.beta1,
        hyper.beta2,
        hyper.eps,
    );
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    let mut epoch = 0u64;
    let mut loss_curve = Vec::with_capacity(hyper.max_steps);
    let mut picked = Vec::with_capacity(hyper.batch_size);
    for step in 1..=hyper.max_steps {
        picked.clear();
        while picked.len() < hyper.batch_size.min(n) {
            if cursor == n {
                order.sort_unstable();
                order.shuffle(&mut rng::stream(hyper.seed, "batch-order", &[epoch]));
                epoch += 1;
                cursor = 0;
            }
            picked.push(order[cursor]);
            cursor += 1;
        }
        let windows: Vec<_> = picked.iter().map(|&i| &data.train[i]).collect();
        let labels: Vec<usize> = picked.iter().map(|&i| data.train_labels[i]).collect();
        let batch = Batch::stack(&windows)?;
        let dropout = rng::stream(hyper.seed, "dropout", &[step as u64]);
        let (loss, grads) = model.loss_and_grads(&batch, &labels, Some(dropout))?;
        let lr = T::lit(hyper.lr_factor * lr_schedule(step, d_model, hyper.warmup_steps)?);
        let store = model.store_mut();
        adam.update(store.values_mut(), &grads, lr);
        if !store.all_finite() {
            return Err(usage(format!("non-finite parameters after step {step}")));
        }
        loss_curve.push(loss.as_f64());
    }
    let eval = evaluate(&*model, &data.test, &data.test_labels, hyper.eval_batch)?;
    Ok(TrainReport {
        model: model.config().clone(),
        hyper: hyper.clone(),
        model_seed: model.seed(),
        steps: hyper.max_steps,
        loss_curve,
        test_cc: eval.cc,
        test_accuracy: eval.accuracy,
        confusion: eval.confusion,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Initialize a model from `(config, seed)` and train it.
pub fn train_new<T: Scalar>(
    config: &ModelConfig,
    model_seed: u64,
    data: &PreparedData<T>,
    hyper: &TrainHyper,
) -> Result<(ItstModel<T>, TrainReport)> {
    let mut model = ItstModel::new(config.clone(), model_seed)?;
    let report = train(&mut model, data, hyper)?;
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        let a = lr_schedule(1, 512, 4000).unwrap();
        let oracle = 512f64.powf(-0.5) * 4000f64.powf(-1.5);
        assert!((a - oracle).abs() <= 1e-18);
        assert!((a - 1.7469e-7).abs() < 5e-12);
        let b = lr_schedule(4000, 512, 4000).unwrap();
        assert!((b - 6.9877e-4).abs() < 5e-9);
        assert!(lr_schedule(0, 512, 4000).is_err());
    }

    #[test]
    fn schedule_branches_meet_at_warmup() {
        for warmup in [1usize, 4, 100, 400, 4000] {
            let w = warmup as f64;
            assert_eq!(warmup_ramp(w, w), inverse_sqrt(w), "warmup {warmup}");
            assert!((warmup_ramp(w - 0.5, w) - (w - 0.5) * w.powf(-1.5)).abs() <= 1e-15);
            let peak = lr_schedule(warmup, 64, warmup).unwrap();
            if warmup > 1 {
                assert!(lr_schedule(warmup - 1, 64, warmup).unwrap() < peak);
            }
            assert!(lr_schedule(warmup + 1, 64, warmup).unwrap() < peak);
        }
        let rates: Vec<f64> = (1..=800)
            .map(|s| lr_schedule(s, 64, 400).unwrap())
            .collect();
        assert!(rates[..400].windows(2).all(|p| p[0] < p[1]));
        assert!(rates[399..].windows(2).all(|p| p[0] > p[1]));
    }

    #[test]
    fn adam_ignores_zero_gradients() {
        let mut adam = Adam::<f64>::new([3], 0.9, 0.98, 1e-9);
        let mut p = vec![1.0, -2.0, 0.5];
        let before = p.clone();
        for _ in 0..5 {
            adam.update(
                std::iter::once(p.as_mut_slice()),
                &[Tensor::zeros(&[3])],
                0.1,
            );
        }
        assert_eq!(p, before);
        assert_eq!(adam.steps(), 5);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut adam = Adam::<f64>::new([2], 0.9, 0.98, 1e-9);
        let mut p = vec![0.0, 0.0];
        adam.update(
            std::iter::once(p.as_mut_slice()),
            &[Tensor::new(vec![2], vec![3.0, -0.5]).unwrap()],
            0.01,
        );
        assert!((p[0] + 0.01).abs() < 1e-10 && (p[1] - 0.01).abs() < 1e-10);
    }

    #[test]
    fn hyper_validation() {
        assert!(TrainHyper::default().validate().is_ok());
        assert!(TrainHyper {
            batch_size: 0,
            ..TrainHyper::default()
        }
        .validate()
        .is_err());
        assert!(TrainHyper {
            warmup_steps: 0,
            ..TrainHyper::default()
        }
        .validate()
        .is_err());
    }
}
