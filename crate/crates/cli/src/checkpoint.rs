//! Trained classifiers on disk: `checkpoint.json` plus, for ITST models, a
//! flat parameter tensor `params.itst` in registration order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use itst::model::{Batch, ModelConfig};
use itst::tensor::Tensor;
use itst::train::{Classifier, LookupClassifier};
use itst::{ItstModel, Scaler};

use crate::error::{usage, Result};
use crate::fsutil::{create_dir, read_json, write_atomic, write_json};
use crate::tensor_file;

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const PARAMS_FILE: &str = "params.itst";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CheckpointBody {
    Itst {
        model: ModelConfig,
        model_seed: u64,
        steps: usize,
        params: Vec<ParamEntry>,
    },
    /// Memorized window-to-label table.
    Lookup { classifier: LookupClassifier },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub schema_version: u32,
    /// Fitted on the training split; applied to every window before
    /// classification.
    pub scaler: Scaler,
    /// `[window, features]` the checkpoint accepts.
    pub window_shape: [usize; 2],
    #[serde(flatten)]
    pub body: CheckpointBody,
}

pub enum LoadedClassifier {
    Itst(Box<ItstModel>),
    Lookup(LookupClassifier),
}

impl Classifier<f64> for LoadedClassifier {
    fn num_classes(&self) -> usize {
        match self {
            LoadedClassifier::Itst(m) => Classifier::<f64>::num_classes(m.as_ref()),
            LoadedClassifier::Lookup(l) => Classifier::<f64>::num_classes(l),
        }
    }

    fn log_proba(&self, batch: &Batch<f64>) -> itst::Result<Tensor<f64>> {
        match self {
            LoadedClassifier::Itst(m) => m.log_proba(batch),
            LoadedClassifier::Lookup(l) => l.log_proba(batch),
        }
    }
}

pub fn save_model(dir: &Path, model: &ItstModel, scaler: &Scaler, steps: usize) -> Result<()> {
    create_dir(dir)?;
    let mut flat = Vec::with_capacity(model.parameter_count());
    let mut params = Vec::new();
    for (_, p) in model.store().iter() {
        flat.extend_from_slice(p.value.data());
        params.push(ParamEntry {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
        });
    }
    let flat = Tensor::new(vec![flat.len()], flat).map_err(itst::Error::from)?;
    write_atomic(&dir.join(PARAMS_FILE), &tensor_file::encode(&flat))?;
    let c = model.config();
    let header = CheckpointHeader {
        schema_version: SCHEMA_VERSION,
        scaler: scaler.clone(),
        window_shape: [c.window, c.features],
        body: CheckpointBody::Itst {
            model: c.clone(),
            model_seed: model.seed(),
            steps,
            params,
        },
    };
    write_json(&dir.join(CHECKPOINT_FILE), &header)
}

pub fn save_lookup(
    dir: &Path,
    classifier: &LookupClassifier,
    scaler: &Scaler,
    window_shape: [usize; 2],
) -> Result<()> {
    create_dir(dir)?;
    let header = CheckpointHeader {
        schema_version: SCHEMA_VERSION,
        scaler: scaler.clone(),
        window_shape,
        body: CheckpointBody::Lookup {
            classifier: classifier.clone(),
        },
    };
    write_json(&dir.join(CHECKPOINT_FILE), &header)
}

pub fn load(dir: &Path) -> Result<(CheckpointHeader, LoadedClassifier)> {
    let path = dir.join(CHECKPOINT_FILE);
    if !path.is_file() {
        return Err(usage(format!("no checkpoint at {}", path.display())));
    }
    let header: CheckpointHeader = read_json(&path)?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(usage(format!(
            "{}: unsupported schema version {}",
            path.display(),
            header.schema_version
        )));
    }
    let clf = match &header.body {
        CheckpointBody::Lookup { classifier } => LoadedClassifier::Lookup(classifier.clone()),
        CheckpointBody::Itst {
            model,
            model_seed,
            params,
            ..
        } => {
            let mut m = ItstModel::new(model.clone(), *model_seed)?;
            let flat = tensor_file::read(&dir.join(PARAMS_FILE))?.into_f64();
            if flat.shape() != [m.parameter_count()] {
                return Err(usage(format!(
                    "{PARAMS_FILE}: expected shape [{}] for this model, got {:?}",
                    m.parameter_count(),
                    flat.shape()
                )));
            }
            let census: Vec<ParamEntry> = m
                .store()
                .iter()
                .map(|(_, p)| ParamEntry {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                })
                .collect();
            if &census != params {
                return Err(usage(
                    "checkpoint parameter list does not match its model config",
                ));
            }
            let mut offset = 0;
            for dst in m.store_mut().values_mut() {
                dst.copy_from_slice(&flat.data()[offset..offset + dst.len()]);
                offset += dst.len();
            }
            LoadedClassifier::Itst(Box::new(m))
        }
    };
    Ok((header, clf))
}
