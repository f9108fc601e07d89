use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use itst::model::{parse_paths, EncoderPath, ModelConfig};
use itst::synth::{generate_dataset, GenConfig, DESK_SCALE};
use itst::train::{self, evaluate, AblationRow, PreparedData, SearchSpace, TrainHyper, Trial};
use itst::ItstModel;

use crate::checkpoint;
use crate::error::{usage, Result};
use crate::fsutil::{create_dir, read_json, write_atomic, write_json};
use crate::manifest::{load_dataset, write_dataset, DatasetManifest};

/// Contents of a `--config` file. Both sections are optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainHyper,
    /// Result recorded by `search`; ignored on input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cc: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let config: RunConfig = match path {
            Some(p) => read_json(p)?,
            None => RunConfig::default(),
        };
        config.model.validate()?;
        config.train.validate()?;
        Ok(config)
    }
}

pub fn cc_line(cc: f64) -> String {
    format!("CC={cc:.6}")
}

pub struct GenData {
    pub seed: u64,
    pub scale: f64,
    pub out: PathBuf,
}

pub fn gen_data(args: &GenData, stdout: &mut String) -> Result<DatasetManifest> {
    let cfg = GenConfig {
        seed: args.seed,
        scale: args.scale,
        ..GenConfig::default()
    };
    cfg.validate()?;
    let (train, test) = generate_dataset(&cfg)?;
    create_dir(&args.out)?;
    let manifest = write_dataset(&args.out, &cfg, &train, &test)?;
    for (c, name) in manifest.classes.iter().enumerate() {
        let _ = writeln!(
            stdout,
            "class {:2} {:<28} train {:5}  test {:5}",
            c, name.name, manifest.train.class_counts[c], manifest.test.class_counts[c]
        );
    }
    let shape = |n: usize| format!("({n}, {}, {})", cfg.window, cfg.features);
    let _ = writeln!(
        stdout,
        "train {}  test {}",
        shape(train.len()),
        shape(test.len())
    );
    Ok(manifest)
}

pub const DEFAULT_SCALE: f64 = DESK_SCALE;

fn prepared(
    train: &itst::WindowedDataset,
    test: &itst::WindowedDataset,
) -> Result<PreparedData<f64>> {
    Ok(PreparedData::new(train, test)?)
}

pub struct TrainArgs {
    pub data: PathBuf,
    pub config: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    pub paths: Option<String>,
}

fn apply_paths(config: &mut ModelConfig, paths: Option<&str>) -> Result<()> {
    if let Some(list) = paths {
        let parsed = parse_paths(list)?;
        if parsed.is_empty() {
            return Err(usage(
                "--paths needs at least one of time, sensor, frequency",
            ));
        }
        config.enabled_paths = parsed;
    }
    Ok(())
}

pub fn train_cmd(args: &TrainArgs, stdout: &mut String) -> Result<train::TrainReport> {
    let mut run = RunConfig::load(args.config.as_deref())?;
    apply_paths(&mut run.model, args.paths.as_deref())?;
    let (manifest, train_set, test_set) = load_dataset(&args.data)?;
    let data = prepared(&train_set, &test_set)?;
    let hyper = TrainHyper {
        seed: args.seed,
        ..run.train.clone()
    };
    let mut model = ItstModel::new(run.model.clone(), args.seed)?;
    let report = train::train(&mut model, &data, &hyper)?;
    create_dir(&args.out)?;
    write_json(&args.out.join("report.json"), &report)?;
    write_atomic(
        &args.out.join("confusion.csv"),
        report.confusion.to_csv(&manifest.class_names()).as_bytes(),
    )?;
    checkpoint::save_model(
        &args.out.join("checkpoint"),
        &model,
        &data.scaler,
        report.steps,
    )?;
    eprintln!(
        "trained {} steps in {:.1}s",
        report.steps, report.wall_time_secs
    );
    let _ = writeln!(stdout, "paths={}", names(&run.model.enabled_paths));
    let _ = writeln!(stdout, "accuracy={:.6}", report.test_accuracy);
    let _ = writeln!(stdout, "{}", cc_line(report.test_cc));
    Ok(report)
}

fn names(paths: &[EncoderPath]) -> String {
    paths.iter().map(|p| p.name()).collect::<Vec<_>>().join(",")
}

pub struct EvalArgs {
    pub data: PathBuf,
    pub checkpoint: PathBuf,
    pub out: PathBuf,
}

pub fn eval_cmd(args: &EvalArgs, stdout: &mut String) -> Result<train::Evaluation> {
    let (header, clf) = checkpoint::load(&args.checkpoint)?;
    let (manifest, train_set, test_set) = load_dataset(&args.data)?;
    let shape = [manifest.generator.window, manifest.generator.features];
    if shape != header.window_shape {
        return Err(usage(format!(
            "checkpoint expects windows of shape {:?}, dataset has {shape:?}",
            header.window_shape
        )));
    }
    let data = PreparedData::with_scaler(header.scaler.clone(), &train_set, &test_set)?;
    let eval = evaluate(&clf, &data.test, &data.test_labels, 128)?;
    create_dir(&args.out)?;
    write_atomic(
        &args.out.join("confusion.csv"),
        eval.confusion.to_csv(&manifest.class_names()).as_bytes(),
    )?;
    let _ = writeln!(stdout, "accuracy={:.6}", eval.accuracy);
    let _ = writeln!(stdout, "{}", cc_line(eval.cc));
    Ok(eval)
}

pub struct AblateArgs {
    pub data: PathBuf,
    pub config: Option<PathBuf>,
    pub seed: u64,
    pub repeats: usize,
    pub out: PathBuf,
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let flag = |b: bool| if b { "1" } else { "0" };
    let mut out = String::from("time_domain,sensor_domain,frequency_domain,cc\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            flag(r.has(EncoderPath::Time)),
            flag(r.has(EncoderPath::Sensor)),
            flag(r.has(EncoderPath::Frequency)),
            r.cc_mean
        );
    }
    out
}

pub fn ablate_cmd(args: &AblateArgs, stdout: &mut String) -> Result<Vec<AblationRow>> {
    if args.repeats == 0 {
        return Err(usage("--repeats must be >= 1"));
    }
    let run = RunConfig::load(args.config.as_deref())?;
    let (_, train_set, test_set) = load_dataset(&args.data)?;
    let data = prepared(&train_set, &test_set)?;
    let seeds: Vec<u64> = (0..args.repeats as u64)
        .map(|i| args.seed.wrapping_add(i))
        .collect();
    let rows = train::ablate(&run.model, &run.train, &data, &seeds)?;
    create_dir(&args.out)?;
    write_atomic(
        &args.out.join("ablation.csv"),
        ablation_csv(&rows).as_bytes(),
    )?;
    write_json(&args.out.join("ablation.json"), &rows)?;
    for r in &rows {
        let _ = writeln!(stdout, "{:<24} {}", names(&r.paths), cc_line(r.cc_mean));
    }
    Ok(rows)
}

pub struct SearchArgs {
    pub data: PathBuf,
    pub config: Option<PathBuf>,
    pub space: Option<PathBuf>,
    pub budget: usize,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn trials_csv(trials: &[Trial]) -> String {
    let mut out = String::from(
        "index,d_model,heads,encoder_layers,decoder_layers,d_ffn,dropout,warmup_steps,cc\n",
    );
    for t in trials {
        let c = &t.config;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            t.index,
            c.d_model,
            c.heads,
            c.encoder_layers,
            c.decoder_layers,
            c.d_ffn,
            c.dropout,
            t.hyper.warmup_steps,
            t.cc
        );
    }
    out
}

pub fn search_cmd(args: &SearchArgs, stdout: &mut String) -> Result<train::SearchResult> {
    let run = RunConfig::load(args.config.as_deref())?;
    let space: SearchSpace = match &args.space {
        Some(p) => read_json(p)?,
        None => SearchSpace::default(),
    };
    space.validate()?;
    let (_, train_set, test_set) = load_dataset(&args.data)?;
    let data = prepared(&train_set, &test_set)?;
    let result = train::random_search(
        &space,
        &run.model,
        &run.train,
        args.budget,
        args.seed,
        &data,
    )?;
    create_dir(&args.out)?;
    let best = RunConfig {
        model: result.best.config.clone(),
        train: result.best.hyper.clone(),
        cc: Some(result.best.cc),
    };
    write_json(&args.out.join("best_config.json"), &best)?;
    write_atomic(
        &args.out.join("trials.csv"),
        trials_csv(&result.trials).as_bytes(),
    )?;
    let _ = writeln!(
        stdout,
        "best trial {} of {}",
        result.best.index,
        result.trials.len()
    );
    let _ = writeln!(stdout, "{}", cc_line(result.best.cc));
    Ok(result)
}

/// Worker count from `ITST_THREADS`; 1 when unset.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var("ITST_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(usage(format!(
                "ITST_THREADS must be a positive integer, got {v:?}"
            ))),
        },
    }
}
