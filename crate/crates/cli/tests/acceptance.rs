//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are always printed.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Output};
use std::time::Instant;

use rand::Rng;

use itst::features::{engineer_decoder_features, fft2d_magnitude, fit_quadratic, Scaler, Window};
use itst::model::{Batch, EncoderPath, ItstModel, ModelConfig, PreparedWindow};
use itst::rng;
use itst::synth::{generate_dataset, GenConfig};
use itst::tensor::Tensor;
use itst::train::{run_repeated, LookupClassifier, PreparedData, TrainHyper};
use itst_cli::checkpoint;
use itst_cli::commands::RunConfig;
use itst_cli::manifest::load_dataset;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Desk-scale settings of the complementarity experiment.
fn desk_config() -> PathBuf {
    workspace().join("configs/desk-ablation.json")
}

fn itst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_itst"))
        .args(args)
        .env("ITST_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Result<Output, String> {
    let o = itst(args);
    if o.status.success() {
        Ok(o)
    } else {
        Err(format!(
            "`itst {}` exited {:?}: {}",
            args.join(" "),
            o.status.code(),
            String::from_utf8_lossy(&o.stderr)
        ))
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(
                    path.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

fn random_window(s: &mut rng::Stream, w: usize, k: usize) -> Window<f64> {
    let data = (0..w * k).map(|_| s.random_range(-1.0..1.0)).collect();
    Window::new(Tensor::new(vec![w, k], data).unwrap()).unwrap()
}

fn gradient_integrity() -> Outcome {
    const H: f64 = 1e-6;
    let start = Instant::now();
    let config = ModelConfig {
        d_model: 8,
        heads: 2,
        encoder_layers: 1,
        decoder_layers: 1,
        d_ffn: 16,
        dropout: 0.0,
        window: 6,
        features: 3,
        ..ModelConfig::default()
    };
    let mut model = ItstModel::<f64>::new(config, 21).map_err(|e| e.to_string())?;
    let mut s = rng::stream(1, "acceptance-gradcheck", &[]);
    let prepared: Vec<_> = (0..4)
        .map(|_| PreparedWindow::new(&random_window(&mut s, 6, 3)).unwrap())
        .collect();
    let batch = Batch::stack(&prepared.iter().collect::<Vec<_>>()).unwrap();
    let labels = [0, 3, 11, 6];
    let (_, grads) = model.loss_and_grads(&batch, &labels, None).unwrap();
    let ids: Vec<_> = model.store().iter().map(|(id, _)| id).collect();
    let (mut worst, mut checked) = (0.0f64, 0usize);
    for id in ids {
        for i in 0..model.store().get(id).value.numel() {
            let orig = model.store().get(id).value.data()[i];
            model.store_mut().value_mut(id).data_mut()[i] = orig + H;
            let up = model.loss(&batch, &labels).unwrap();
            model.store_mut().value_mut(id).data_mut()[i] = orig - H;
            let down = model.loss(&batch, &labels).unwrap();
            model.store_mut().value_mut(id).data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * H);
            let analytic = grads[id.0].data()[i];
            // Relative error, floored where the gradient is below what h
            // can resolve.
            worst =
                worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3));
            checked += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-6, || {
        format!("worst relative error {worst:.2e}")
    })?;
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "{checked} parameters, worst relative error {worst:.2e}, {secs:.1}s"
    ))
}

fn fft_oracle() -> Outcome {
    let (w, k) = (40, 34);
    let mut s = rng::stream(2, "acceptance-fft", &[]);
    let (mut worst, mut parseval) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let win = random_window(&mut s, w, k);
        let x = win.values().data();
        let fast = fft2d_magnitude(&win).map_err(|e| e.to_string())?;
        let mut naive = vec![0.0; w * k];
        let mut peak = 0.0f64;
        for u in 0..w {
            for v in 0..k {
                let (mut re, mut im) = (0.0, 0.0);
                for t in 0..w {
                    for c in 0..k {
                        let angle =
                            -2.0 * PI * ((u * t) as f64 / w as f64 + (v * c) as f64 / k as f64);
                        re += x[t * k + c] * angle.cos();
                        im += x[t * k + c] * angle.sin();
                    }
                }
                naive[u * k + v] = re.hypot(im);
                peak = peak.max(naive[u * k + v]);
            }
        }
        for (a, b) in fast.values().data().iter().zip(&naive) {
            worst = worst.max((a - b).abs() / peak);
        }
        let energy: f64 = x.iter().map(|v| v * v).sum();
        let spectral: f64 =
            fast.values().data().iter().map(|m| m * m).sum::<f64>() / (w * k) as f64;
        parseval = parseval.max((energy - spectral).abs() / energy);
    }
    ensure(worst <= 1e-9, || {
        format!("magnitude relative error {worst:.2e}")
    })?;
    ensure(parseval <= 1e-9, || {
        format!("Parseval relative error {parseval:.2e}")
    })?;
    Ok(format!(
        "20 inputs 40x34: magnitude error {worst:.2e}, Parseval error {parseval:.2e}"
    ))
}

/// Least squares through an orthonormal basis of {1, t, t²} (modified
/// Gram-Schmidt), independent of the normal equations.
fn qr_residual(ys: &[f64]) -> Vec<f64> {
    let n = ys.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for power in 0..3 {
        let mut q: Vec<f64> = (0..n).map(|t| (t as f64).powi(power)).collect();
        for b in &basis {
            let d: f64 = q.iter().zip(b).map(|(x, y)| x * y).sum();
            q.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        q.iter_mut().for_each(|x| *x /= norm);
        basis.push(q);
    }
    let mut r = ys.to_vec();
    for b in &basis {
        let d: f64 = r.iter().zip(b).map(|(x, y)| x * y).sum();
        r.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
    }
    r
}

fn quadratic_oracle() -> Outcome {
    let mut s = rng::stream(3, "acceptance-quad", &[]);
    let (mut coef, mut ortho, mut resid) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let (c0, c1, c2) = (
            s.random_range(-5.0..5.0),
            s.random_range(-1.0..1.0),
            s.random_range(-0.1..0.1),
        );
        let ys: Vec<f64> = (0..40)
            .map(|t| c0 + c1 * t as f64 + c2 * (t * t) as f64)
            .collect();
        let fit = fit_quadratic(&ys).map_err(|e| e.to_string())?;
        coef = coef
            .max((fit.c0 - c0).abs())
            .max((fit.c1 - c1).abs())
            .max((fit.c2 - c2).abs());

        let noisy: Vec<f64> = ys.iter().map(|y| y + s.random_range(-2.0..2.0)).collect();
        let fit = fit_quadratic(&noisy).map_err(|e| e.to_string())?;
        let r: Vec<f64> = noisy
            .iter()
            .enumerate()
            .map(|(t, y)| y - fit.eval(t as f64))
            .collect();
        for power in 0..3 {
            let basis_norm = (0..40)
                .map(|t| (t as f64).powi(2 * power))
                .sum::<f64>()
                .sqrt();
            let dot: f64 = r
                .iter()
                .enumerate()
                .map(|(t, v)| v * (t as f64).powi(power))
                .sum();
            ortho = ortho.max(dot.abs() / basis_norm);
        }
        let oracle = qr_residual(&noisy);
        resid = resid.max(
            r.iter()
                .zip(&oracle)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
    }
    ensure(coef <= 1e-8, || format!("coefficient error {coef:.2e}"))?;
    ensure(ortho <= 1e-8, || {
        format!("residual orthogonality {ortho:.2e}")
    })?;
    ensure(resid <= 1e-8, || {
        format!("residual differs from the QR oracle by {resid:.2e}")
    })?;
    Ok(format!("100 columns: coefficient error {coef:.2e}, orthogonality {ortho:.2e}, QR residual gap {resid:.2e}"))
}

fn scaler_postconditions() -> Outcome {
    let (train, _) = generate_dataset(&GenConfig {
        seed: 4,
        scale: 0.00276,
        ..GenConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let [n, w, k] = train.shape();
    let mut data = train.data().data().to_vec();
    // Channel 7 is pinned to a constant.
    for row in data.chunks_mut(k) {
        row[7] = 3.25;
    }
    let flat = Tensor::new(vec![n * w, k], data).unwrap();
    let scaled = Scaler::fit(&flat)
        .map_err(|e| e.to_string())?
        .apply(&flat)
        .map_err(|e| e.to_string())?;
    let rows = (n * w) as f64;
    let (mut mean_err, mut var_err) = (0.0f64, 0.0f64);
    for j in (0..k).filter(|&j| j != 7) {
        let col: Vec<f64> = scaled.data().iter().skip(j).step_by(k).copied().collect();
        let mean = col.iter().sum::<f64>() / rows;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows;
        mean_err = mean_err.max(mean.abs());
        var_err = var_err.max((var - 1.0).abs());
    }
    let constant_zero = scaled.data().iter().skip(7).step_by(k).all(|&v| v == 0.0);
    ensure(mean_err <= 1e-9, || format!("|mean| {mean_err:.2e}"))?;
    ensure(var_err <= 1e-9, || format!("|var-1| {var_err:.2e}"))?;
    ensure(constant_zero, || {
        "constant channel is not mapped to 0".into()
    })?;
    Ok(format!(
        "{} rows x {k}: |mean| {mean_err:.2e}, |var-1| {var_err:.2e}, constant channel -> 0",
        n * w
    ))
}

fn shape_contracts() -> Outcome {
    let model = ItstModel::<f64>::new(ModelConfig::default(), 5).map_err(|e| e.to_string())?;
    let mut s = rng::stream(5, "acceptance-shapes", &[]);
    let win = random_window(&mut s, 40, 34);
    let memory = model.encoder_forward(&win).map_err(|e| e.to_string())?;
    ensure(
        memory.shape()[0] == 114 && model.config().memory_tokens() == 114,
        || format!("memory shape {:?}", memory.shape()),
    )?;
    let feats = engineer_decoder_features(&win).map_err(|e| e.to_string())?;
    ensure(feats.values().shape() == [5, 34], || {
        format!("decoder features {:?}", feats.values().shape())
    })?;
    let probs = model.classify(&win).map_err(|e| e.to_string())?;
    let sum: f64 = probs.iter().sum();
    ensure(probs.len() == 12 && (sum - 1.0).abs() <= 1e-12, || {
        format!("{} probabilities, sum {sum}", probs.len())
    })?;
    for path in EncoderPath::ALL {
        let single = ItstModel::<f64>::new(
            ModelConfig {
                enabled_paths: vec![path],
                ..ModelConfig::default()
            },
            5,
        )
        .map_err(|e| e.to_string())?;
        let expected = if path == EncoderPath::Sensor { 34 } else { 40 };
        ensure(
            single.encoder_forward(&win).unwrap().shape()[0] == expected,
            || format!("{path} memory"),
        )?;
    }
    Ok(format!(
        "memory 114x{}, decoder features 5x34, 12 probabilities summing to 1 (|err| {:.1e})",
        memory.shape()[1],
        (sum - 1.0).abs()
    ))
}

fn determinism(root: &Path) -> Outcome {
    fs::create_dir_all(root).map_err(|e| e.to_string())?;
    let cfg = root.join("quick.json");
    fs::write(
        &cfg,
        r#"{"model": {"d_model": 8, "heads": 2, "encoder_layers": 1, "decoder_layers": 1, "d_ffn": 16},
            "train": {"batch_size": 8, "max_steps": 5, "warmup_steps": 10, "eval_batch": 64}}"#,
    )
    .unwrap();
    let space = root.join("space.json");
    fs::write(
        &space,
        r#"{"d_model": [8, 16], "heads": [2], "encoder_layers": [1], "decoder_layers": [1], "d_ffn": [16, 32],
            "warmup_steps": [5.0, 50.0]}"#,
    )
    .unwrap();
    let mut checked = Vec::new();
    for round in ["a", "b"] {
        let dir = root.join(round);
        let data = dir.join("data");
        run_ok(&[
            "gen-data",
            "--seed",
            "11",
            "--scale",
            "0.00276",
            "--out",
            p(&data),
        ])?;
        run_ok(&[
            "train",
            "--data",
            p(&data),
            "--config",
            p(&cfg),
            "--seed",
            "2",
            "--out",
            p(&dir.join("train")),
        ])?;
        run_ok(&[
            "ablate",
            "--data",
            p(&data),
            "--config",
            p(&cfg),
            "--repeats",
            "2",
            "--out",
            p(&dir.join("ablate")),
        ])?;
        run_ok(&[
            "search",
            "--data",
            p(&data),
            "--config",
            p(&cfg),
            "--space",
            p(&space),
            "--budget",
            "3",
            "--out",
            p(&dir.join("search")),
        ])?;
    }
    for cmd in ["data", "train", "ablate", "search"] {
        let (a, b) = (
            snapshot(&root.join("a").join(cmd)),
            snapshot(&root.join("b").join(cmd)),
        );
        ensure(!a.is_empty() && a == b, || {
            format!("{cmd} outputs differ between runs")
        })?;
        checked.push(format!("{cmd} ({} files)", a.len()));
    }
    Ok(format!("byte-identical reruns: {}", checked.join(", ")))
}

fn overfit() -> Outcome {
    let start = Instant::now();
    let cfg = GenConfig {
        seed: 41,
        scale: 0.004,
        ..GenConfig::default()
    };
    let (train, _) = generate_dataset(&cfg).map_err(|e| e.to_string())?;
    let mut picked = Vec::new();
    for c in [0, 1, 3, 7, 8] {
        picked.extend(
            train
                .labels()
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == c)
                .map(|(i, _)| i)
                .take(8),
        );
    }
    let set = train.subset(&picked).map_err(|e| e.to_string())?;
    let data = PreparedData::<f64>::new(&set, &set).map_err(|e| e.to_string())?;
    let config = ModelConfig {
        d_model: 16,
        heads: 2,
        encoder_layers: 1,
        decoder_layers: 1,
        d_ffn: 32,
        dropout: 0.0,
        ..ModelConfig::default()
    };
    let hyper = TrainHyper {
        batch_size: 40,
        max_steps: 500,
        warmup_steps: 50,
        ..TrainHyper::default()
    };
    let (_, report) =
        itst::train::train_new(&config, 0, &data, &hyper).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure(report.test_cc < 0.05, || {
        format!("training CC {:.4} after 500 steps", report.test_cc)
    })?;
    ensure(secs < 120.0, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "5 classes x 8 windows: training CC {:.2e} after 500 steps, {secs:.1}s",
        report.test_cc
    ))
}

fn complementarity(root: &Path) -> Outcome {
    let start = Instant::now();
    let data = root.join("desk");
    run_ok(&["gen-data", "--seed", "0", "--out", p(&data)])?;
    let out = root.join("ablation");
    run_ok(&[
        "ablate",
        "--data",
        p(&data),
        "--config",
        p(&desk_config()),
        "--repeats",
        "5",
        "--seed",
        "0",
        "--out",
        p(&out),
    ])?;
    let text = fs::read_to_string(out.join("ablation.csv")).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    ensure(
        rows.len() == 8 && rows[0] == ["time_domain", "sensor_domain", "frequency_domain", "cc"],
        || format!("unexpected ablation.csv layout:\n{text}"),
    )?;
    let flags: Vec<String> = rows[1..].iter().map(|r| r[..3].concat()).collect();
    ensure(
        flags == ["100", "010", "001", "110", "101", "011", "111"],
        || format!("row order {flags:?}"),
    )?;
    let cc: Vec<f64> = rows[1..].iter().map(|r| r[3].parse().unwrap()).collect();
    let secs = start.elapsed().as_secs_f64();
    let table = format!(
        "T {:.4} S {:.4} F {:.4} TS {:.4} TF {:.4} SF {:.4} TSF {:.4}, {:.0}s",
        cc[0], cc[1], cc[2], cc[3], cc[4], cc[5], cc[6], secs
    );
    ensure(cc[6] < cc[0] && cc[6] < cc[1] && cc[6] < cc[2], || {
        format!("triple path not best: {table}")
    })?;
    ensure(secs < 1800.0, || format!("over 30 minutes: {table}"))?;
    Ok(format!("mean test CC over 5 seeds: {table}"))
}

fn metrics_parity(root: &Path) -> Outcome {
    let (train, test) = generate_dataset(&GenConfig::desk(0)).map_err(|e| e.to_string())?;
    let data = PreparedData::<f64>::new(&train, &test).map_err(|e| e.to_string())?;
    let desk: RunConfig =
        serde_json::from_str(&fs::read_to_string(desk_config()).unwrap()).unwrap();
    let hyper = TrainHyper {
        max_steps: 20,
        ..desk.train
    };
    let stats = run_repeated(&desk.model, &hyper, &data, 20).map_err(|e| e.to_string())?;
    let ccs: Vec<f64> = stats.reports.iter().map(|r| r.test_cc).collect();
    ensure(ccs.len() == 20, || format!("{} reports", ccs.len()))?;
    let mean = ccs.iter().sum::<f64>() / 20.0;
    let var = ccs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / 19.0;
    let best = ccs.iter().copied().fold(f64::INFINITY, f64::min);
    let gap = (stats.cc_mean - mean)
        .abs()
        .max((stats.cc_var - var).abs())
        .max((stats.cc_best - best).abs());
    ensure(gap <= 1e-12, || {
        format!("statistics differ from the reports by {gap:.2e}")
    })?;

    // confusion.csv from the CLI: every row of HYP sums to 1.
    let run = root.join("train");
    let desk_data = root.join("desk");
    if !desk_data.join("manifest.json").exists() {
        run_ok(&["gen-data", "--seed", "0", "--out", p(&desk_data)])?;
    }
    let quick = root.join("quick-desk.json");
    fs::write(
        &quick,
        serde_json::to_string(&RunConfig {
            train: hyper.clone(),
            ..desk.clone()
        })
        .unwrap(),
    )
    .unwrap();
    run_ok(&[
        "train",
        "--data",
        p(&desk_data),
        "--config",
        p(&quick),
        "--out",
        p(&run),
    ])?;
    let csv = fs::read_to_string(run.join("confusion.csv")).unwrap();
    let mut row_err = 0.0f64;
    for line in csv.lines().skip(1) {
        let sum: f64 = line
            .split(',')
            .skip(1)
            .map(|v| v.parse::<f64>().unwrap())
            .sum();
        row_err = row_err.max((sum - 1.0).abs());
    }
    ensure(csv.lines().count() == 13 && row_err <= 1e-9, || {
        format!("confusion rows off by {row_err:.2e}")
    })?;

    // The memorizing fixture through `eval`.
    let (_, train_set, test_set) = load_dataset(&desk_data).map_err(|e| e.to_string())?;
    let prepared = PreparedData::<f64>::new(&train_set, &test_set).map_err(|e| e.to_string())?;
    let oracle = LookupClassifier::memorize(12, &prepared.test, &prepared.test_labels)
        .map_err(|e| e.to_string())?;
    let ck = root.join("oracle");
    checkpoint::save_lookup(&ck, &oracle, &prepared.scaler, [40, 34]).map_err(|e| e.to_string())?;
    let ev = root.join("oracle-eval");
    let o = run_ok(&[
        "eval",
        "--data",
        p(&desk_data),
        "--checkpoint",
        p(&ck),
        "--out",
        p(&ev),
    ])?;
    let stdout = String::from_utf8_lossy(&o.stdout).into_owned();
    ensure(stdout.lines().last() == Some("CC=0.000000"), || {
        format!("oracle eval printed {stdout:?}")
    })?;
    let csv = fs::read_to_string(ev.join("confusion.csv")).unwrap();
    for (i, line) in csv.lines().skip(1).enumerate() {
        for (j, v) in line.split(',').skip(1).enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            ensure(v.parse::<f64>().unwrap() == expect, || {
                format!("oracle HYP[{i}][{j}] = {v}")
            })?;
        }
    }
    Ok(format!(
        "20 runs: CC_mean {:.4} CC_var {:.2e} CC_best {:.4} (recomputed gap {gap:.1e}); HYP rows sum to 1 (err {row_err:.1e}); oracle CC=0.000000 with identity HYP",
        stats.cc_mean, stats.cc_var, stats.cc_best
    ))
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = tmp.path();
    let criteria: Vec<Criterion> = vec![
        ("gradient integrity", Box::new(gradient_integrity)),
        ("FFT oracle", Box::new(fft_oracle)),
        ("quadratic-fit oracle", Box::new(quadratic_oracle)),
        ("scaler postconditions", Box::new(scaler_postconditions)),
        ("shape contracts", Box::new(shape_contracts)),
        (
            "determinism",
            Box::new(|| determinism(&root.join("determinism"))),
        ),
        ("overfit check", Box::new(overfit)),
        (
            "ablation complementarity",
            Box::new(|| complementarity(root)),
        ),
        ("metrics parity", Box::new(|| metrics_parity(root))),
    ];
    // ITST_ACCEPTANCE=1,5,9 restricts the run to those criteria.
    let only: Option<Vec<usize>> = std::env::var("ITST_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|n| n.trim().parse().ok()).collect());
    let (mut failed, mut ran) = (0, 0);
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        ran += 1;
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
