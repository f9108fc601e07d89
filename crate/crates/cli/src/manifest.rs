//! On-disk dataset: four tensor files plus a JSON manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};

use itst::dataset::WindowedDataset;
use itst::synth::{
    channel_catalog, class_signature_table, ChannelSpec, GenConfig, Split, CLASS_NAMES,
};
use itst::tensor::Tensor;

use crate::error::{usage, CliError, Result};
use crate::fsutil::{read_json, write_atomic, write_json};
use crate::tensor_file;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub label: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFiles {
    /// `(windows, window, features)` tensor.
    pub data: String,
    /// `(windows,)` tensor of integer-valued labels.
    pub labels: String,
    pub windows: usize,
    pub class_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub generator: GenConfig,
    pub classes: Vec<ClassEntry>,
    pub channels: Vec<ChannelSpec>,
    pub train: SplitFiles,
    pub test: SplitFiles,
}

fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Test => "test",
    }
}

fn split_files(split: Split, ds: &WindowedDataset<f64>) -> SplitFiles {
    let name = split_name(split);
    SplitFiles {
        data: format!("{name}_data.itst"),
        labels: format!("{name}_labels.itst"),
        windows: ds.len(),
        class_counts: ds.class_counts(CLASS_NAMES.len()),
    }
}

impl DatasetManifest {
    pub fn new(
        generator: GenConfig,
        train: &WindowedDataset<f64>,
        test: &WindowedDataset<f64>,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            classes: class_signature_table()
                .into_iter()
                .map(|s| ClassEntry {
                    label: s.class_label,
                    name: s.name,
                })
                .collect(),
            channels: channel_catalog(),
            train: split_files(Split::Train, train),
            test: split_files(Split::Test, test),
            generator,
        }
    }

    pub fn class_names(&self) -> Vec<&str> {
        self.classes.iter().map(|c| c.name.as_str()).collect()
    }
}

/// Write both splits and the manifest into `dir` (which must exist).
pub fn write_dataset(
    dir: &Path,
    generator: &GenConfig,
    train: &WindowedDataset<f64>,
    test: &WindowedDataset<f64>,
) -> Result<DatasetManifest> {
    let manifest = DatasetManifest::new(generator.clone(), train, test);
    for (files, ds) in [(&manifest.train, train), (&manifest.test, test)] {
        write_atomic(&dir.join(&files.data), &tensor_file::encode(ds.data()))?;
        let labels: Vec<f64> = ds.labels().iter().map(|&l| l as f64).collect();
        let labels = Tensor::new(vec![labels.len()], labels).map_err(itst::Error::from)?;
        write_atomic(&dir.join(&files.labels), &tensor_file::encode(&labels))?;
    }
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

fn load_split(
    dir: &Path,
    manifest: &DatasetManifest,
    files: &SplitFiles,
) -> Result<WindowedDataset<f64>> {
    let data = tensor_file::read(&dir.join(&files.data))?.into_f64();
    let g = &manifest.generator;
    let expected = [files.windows, g.window, g.features];
    if data.shape() != expected {
        return Err(usage(format!(
            "{}: manifest declares shape {expected:?}, file holds {:?}",
            files.data,
            data.shape()
        )));
    }
    let raw = tensor_file::read(&dir.join(&files.labels))?.into_f64();
    if raw.shape() != [files.windows] {
        return Err(usage(format!(
            "{}: manifest declares shape [{}], file holds {:?}",
            files.labels,
            files.windows,
            raw.shape()
        )));
    }
    let classes = manifest.classes.len();
    let labels = raw
        .data()
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && (v as usize) < classes {
                Ok(v as usize)
            } else {
                Err(usage(format!("{}: invalid label {v}", files.labels)))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let ds = WindowedDataset::new(data, labels)?;
    if ds.class_counts(classes) != files.class_counts {
        return Err(usage(format!(
            "{}: label counts disagree with the manifest",
            files.labels
        )));
    }
    Ok(ds)
}

/// Read and validate a dataset directory.
pub fn load_dataset(
    dir: &Path,
) -> Result<(DatasetManifest, WindowedDataset<f64>, WindowedDataset<f64>)> {
    let path = dir.join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(usage(format!("no dataset manifest at {}", path.display())));
    }
    let manifest: DatasetManifest = read_json(&path)?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(usage(format!(
            "{}: unsupported schema version {}",
            path.display(),
            manifest.schema_version
        )));
    }
    if manifest.classes.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: empty class table",
            path.display()
        )));
    }
    let train = load_split(dir, &manifest, &manifest.train)?;
    let test = load_split(dir, &manifest, &manifest.test)?;
    Ok((manifest, train, test))
}
