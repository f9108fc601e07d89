//! Seeded synthetic condition-monitoring data for a two-stage C-band EDFA.
//!
//! The generator stands in for hardware-in-the-loop recordings. Each sample
//! trajectory picks an operating point on the input-power x gain grid,
//! renders the 34-channel base signal for it, adds per-channel Gaussian
//! noise and then superimposes the class signature.
//!
//! Signature design. Several classes are built to be indistinguishable from
//! per-channel summary statistics so that each encoder path has work to do:
//!
//! * Classes 2, 6 and 11 oscillate on the same stage-2 channels with the
//!   same amplitude distribution and a random phase; only the oscillation
//!   frequency (3, 5 and 8 cycles per window) differs.
//! * Classes 4/9 and 5/10 inject a shared noise process into the same two
//!   channels, in phase for the detector faults and in antiphase for the
//!   passive-loss faults; marginal statistics are identical, only the
//!   cross-sensor correlation differs.
//! * The remaining faults are drifts, offsets and a spectral tilt that
//!   the per-channel statistics already expose.
//!
//! Randomness comes from named streams keyed by (split, class, trajectory,
//! purpose); see [`crate::rng`]. Changing the scale only appends or drops
//! trajectories, it never reshuffles existing ones.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::WindowedDataset;
use crate::error::{usage, Result};
use crate::features::{sliding_windows, CbmSeries};
use crate::rng::{self, Stream};
use crate::tensor::Tensor;

pub const NUM_CLASSES: usize = 12;
pub const NUM_CHANNELS: usize = 34;

/// Normal state and fault cases, indexed by class label.
pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "Normal",
    "Pump laser 1",
    "Pump laser 2",
    "Power detector 1",
    "Power detector 2",
    "Power detector 3",
    "Power detector 4",
    "Variable optical attenuator",
    "Passive components 1",
    "Passive components 2",
    "Passive components 3",
    "Passive components 4",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelRole {
    StageInputPower,
    StageOutputPower,
    PumpCurrent,
    PumpPower,
    DetectorReading,
    VoaAttenuation,
    Temperature,
    Auxiliary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    pub role: ChannelRole,
    /// Value at the centre of the operating grid.
    pub nominal: f64,
    pub noise_sigma: f64,
    /// Change per unit of normalized input power (`-1..1` across the grid).
    pub input_sensitivity: f64,
    /// Change per unit of normalized gain (`-1..1` across the grid).
    pub gain_sensitivity: f64,
}

impl ChannelSpec {
    /// Bound on `|value - nominal|` excluding noise and faults.
    pub fn operating_span(&self) -> f64 {
        1.1 * self.input_sensitivity.abs() + self.gain_sensitivity.abs()
    }
}

/// The frozen 34-channel catalog:
///
/// | index | channels |
/// |-------|----------|
/// | 0-3   | stage 1/2 input and output powers (dBm) |
/// | 4-11  | pump 1 and pump 2 current, optical power, temperature, TEC current |
/// | 12-13 | VOA attenuation (dB) and drive voltage |
/// | 14-17 | photocurrents of power detectors 1-4 (uA) |
/// | 18-26 | output power of the 9 WDM channels (dBm) |
/// | 27-33 | case and board temperature, supply voltage, ASE estimate, reflected power, gain set point, control error |
pub fn channel_catalog() -> Vec<ChannelSpec> {
    use ChannelRole::*;
    let mut out = Vec::with_capacity(NUM_CHANNELS);
    let mut ch = |name: String, role, nominal, sigma: f64, input, gain| {
        out.push(ChannelSpec {
            name,
            role,
            nominal,
            noise_sigma: sigma,
            input_sensitivity: input * sigma,
            gain_sensitivity: gain * sigma,
        })
    };
    // Sensitivities are expressed in multiples of the channel noise.
    ch(
        "stage1_input_power".into(),
        StageInputPower,
        -17.0,
        0.5,
        3.0,
        0.0,
    );
    ch(
        "stage1_output_power".into(),
        StageOutputPower,
        0.0,
        0.4,
        3.0,
        2.0,
    );
    ch(
        "stage2_input_power".into(),
        StageInputPower,
        -3.0,
        0.4,
        3.0,
        2.0,
    );
    ch(
        "stage2_output_power".into(),
        StageOutputPower,
        10.0,
        0.4,
        3.0,
        3.0,
    );
    ch("pump1_current".into(), PumpCurrent, 300.0, 3.0, 3.0, 2.0);
    ch("pump1_power".into(), PumpPower, 150.0, 1.5, 3.0, 2.0);
    ch(
        "pump1_temperature".into(),
        Temperature,
        25.0,
        0.05,
        1.0,
        1.0,
    );
    ch("pump1_tec_current".into(), PumpCurrent, 0.4, 0.01, 2.0, 2.0);
    ch("pump2_current".into(), PumpCurrent, 400.0, 4.0, 3.0, 2.0);
    ch("pump2_power".into(), PumpPower, 200.0, 2.0, 3.0, 2.0);
    ch(
        "pump2_temperature".into(),
        Temperature,
        25.0,
        0.05,
        1.0,
        1.0,
    );
    ch(
        "pump2_tec_current".into(),
        PumpCurrent,
        0.45,
        0.01,
        2.0,
        2.0,
    );
    ch(
        "voa_attenuation".into(),
        VoaAttenuation,
        3.0,
        0.05,
        0.0,
        -3.0,
    );
    ch("voa_drive".into(), VoaAttenuation, 1.2, 0.01, 0.0, -3.0);
    for (i, nominal) in [60.0, 110.0, 90.0, 150.0].into_iter().enumerate() {
        ch(
            format!("pd{}_photocurrent", i + 1),
            DetectorReading,
            nominal,
            1.0,
            3.0,
            2.0,
        );
    }
    for i in 0..9 {
        let ripple = 0.2 * ((i as f64) * 0.9).sin();
        ch(
            format!("wdm{}_output_power", i + 1),
            StageOutputPower,
            0.5 + ripple,
            0.3,
            3.0,
            3.0,
        );
    }
    ch("case_temperature".into(), Temperature, 40.0, 0.1, 0.0, 2.0);
    ch("board_temperature".into(), Temperature, 45.0, 0.1, 0.0, 2.0);
    ch("supply_voltage".into(), Auxiliary, 12.0, 0.01, 0.0, 1.0);
    ch(
        "ase_power_estimate".into(),
        Auxiliary,
        -20.0,
        0.3,
        -2.0,
        3.0,
    );
    ch("reflected_power".into(), Auxiliary, -40.0, 0.5, 1.0, 0.0);
    ch("gain_setpoint".into(), Auxiliary, 27.0, 0.01, 0.0, 800.0);
    ch("control_error".into(), Auxiliary, 0.0, 0.05, 0.0, 0.0);
    debug_assert_eq!(out.len(), NUM_CHANNELS);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultMode {
    None,
    /// Adds `severity * weight * t / W`.
    LinearDrift,
    /// Adds `severity * weight`.
    OffsetStep,
    /// Adds `severity * weight * xi(t)`, with `xi` one standard-normal
    /// process shared by all affected channels. The sign of each weight sets
    /// the coupling, and the marginal noise variance is inflated.
    VarianceInflation,
    /// Adds `severity * weight * sin(2 pi cycles t / W + phase)`.
    Oscillation {
        cycles: u32,
    },
    /// Like [`FaultMode::OffsetStep`], with weights linear in the channel
    /// index across the WDM output-power channels.
    GainTilt,
}

/// How one class perturbs the base signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSignature {
    pub class_label: usize,
    pub name: String,
    pub mode: FaultMode,
    /// `(channel index, weight per unit severity)` in channel units.
    pub affected_channels: Vec<(usize, f64)>,
    /// Upper end of the sampled severity range.
    pub severity: f64,
}

/// Relative severity range sampled per trajectory.
pub const SEVERITY_RANGE: (f64, f64) = (0.3, 1.0);

const STAGE2_GROUP: [usize; 4] = [3, 8, 9, 17];

/// One signature per class label, in label order.
pub fn class_signature_table() -> Vec<FaultSignature> {
    let cat = channel_catalog();
    let w = |c: usize, sigmas: f64| (c, sigmas * cat[c].noise_sigma);
    let oscillation = |cycles| {
        (
            FaultMode::Oscillation { cycles },
            STAGE2_GROUP.iter().map(|&c| w(c, 3.0)).collect::<Vec<_>>(),
        )
    };
    let tilt: Vec<_> = (18..27)
        .map(|c| w(c, 1.5 * (c as f64 - 22.0) / 4.0))
        .collect();
    let rows: [(FaultMode, Vec<(usize, f64)>); NUM_CLASSES] = [
        (FaultMode::None, vec![]),
        // Pump 1 ageing: the controller raises the current, optical power and
        // stage-1 output still droop.
        (
            FaultMode::LinearDrift,
            vec![w(4, 5.0), w(5, -4.0), w(1, -3.0)],
        ),
        oscillation(3),
        (FaultMode::OffsetStep, vec![w(0, 3.0), w(14, 3.0)]),
        (FaultMode::VarianceInflation, vec![w(1, 2.5), w(15, 2.5)]),
        (FaultMode::VarianceInflation, vec![w(2, 2.5), w(16, 2.5)]),
        oscillation(5),
        (FaultMode::GainTilt, {
            let mut t = tilt;
            t.push(w(12, 3.0));
            t
        }),
        (
            FaultMode::LinearDrift,
            vec![w(1, -5.0), w(15, -4.0), w(4, 2.0)],
        ),
        (FaultMode::VarianceInflation, vec![w(1, 2.5), w(15, -2.5)]),
        (FaultMode::VarianceInflation, vec![w(2, 2.5), w(16, -2.5)]),
        oscillation(8),
    ];
    rows.into_iter()
        .enumerate()
        .map(|(label, (mode, affected_channels))| FaultSignature {
            class_label: label,
            name: CLASS_NAMES[label].to_string(),
            mode,
            affected_channels,
            severity: 1.0,
        })
        .collect()
}

/// Perturb a `time x channels` matrix with `sig` at `severity`. Time is
/// measured in window lengths (`t / window`). Channels the signature does not
/// touch are returned bit-identical.
pub fn inject_fault(
    base: &Tensor<f64>,
    sig: &FaultSignature,
    severity: f64,
    window: usize,
    stream: &mut Stream,
) -> Result<Tensor<f64>> {
    if !(severity >= 0.0) {
        return Err(usage(format!(
            "severity must be non-negative, got {severity}"
        )));
    }
    if base.rank() != 2 {
        return Err(usage(format!(
            "expected a time x channel matrix, got {:?}",
            base.shape()
        )));
    }
    let (len, k) = (base.shape()[0], base.shape()[1]);
    if let Some(&(c, _)) = sig.affected_channels.iter().find(|(c, _)| *c >= k) {
        return Err(usage(format!(
            "signature touches channel {c} of a {k}-channel matrix"
        )));
    }
    let mut out = base.clone();
    let shape: Vec<f64> = match sig.mode {
        FaultMode::None => return Ok(out),
        FaultMode::LinearDrift => (0..len).map(|t| t as f64 / window as f64).collect(),
        FaultMode::OffsetStep | FaultMode::GainTilt => vec![1.0; len],
        FaultMode::VarianceInflation => (0..len).map(|_| stream.sample(StandardNormal)).collect(),
        FaultMode::Oscillation { cycles } => {
            let phase = stream.random_range(0.0..2.0 * PI);
            (0..len)
                .map(|t| (2.0 * PI * cycles as f64 * t as f64 / window as f64 + phase).sin())
                .collect()
        }
    };
    let data = out.data_mut();
    for &(c, weight) in &sig.affected_channels {
        for (t, s) in shape.iter().enumerate() {
            data[t * k + c] += severity * weight * s;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    /// Fraction of the full dataset size, in `(0, 1]`.
    pub scale: f64,
    pub train_windows_per_class: usize,
    pub test_windows_per_class: usize,
    pub window: usize,
    pub features: usize,
    /// Consecutive stride-1 windows cut from each generated trajectory.
    /// Overlapping windows are near-duplicates, so the default of 1 gives
    /// every window its own operating point and noise.
    pub windows_per_series: usize,
    pub input_power_dbm: (i32, i32),
    pub gain_db: (i32, i32),
    pub wdm_channels: usize,
}

/// Scale giving 128 train and 64 test windows per class.
pub const DESK_SCALE: f64 = 0.044;

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scale: 1.0,
            train_windows_per_class: 2905,
            test_windows_per_class: 1432,
            window: 40,
            features: NUM_CHANNELS,
            windows_per_series: 1,
            input_power_dbm: (-35, 1),
            gain_db: (19, 35),
            wdm_channels: 9,
        }
    }
}

impl GenConfig {
    pub fn desk(seed: u64) -> Self {
        Self {
            seed,
            scale: DESK_SCALE,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(usage(format!(
                "scale must lie in (0, 1], got {}",
                self.scale
            )));
        }
        if self.features != NUM_CHANNELS {
            return Err(usage(format!(
                "the channel catalog has {NUM_CHANNELS} channels, config asks for {}",
                self.features
            )));
        }
        if self.window < 3 || self.windows_per_series == 0 {
            return Err(usage("window must be >= 3 and windows_per_series >= 1"));
        }
        if self.input_power_dbm.0 > self.input_power_dbm.1 || self.gain_db.0 > self.gain_db.1 {
            return Err(usage("operating grid bounds are reversed"));
        }
        Ok(())
    }

    /// Windows per class for a split: `ceil(scale * full_count)`.
    pub fn windows_per_class(&self, split: Split) -> usize {
        let full = match split {
            Split::Train => self.train_windows_per_class,
            Split::Test => self.test_windows_per_class,
        };
        // Guard against 0.1 * 2905 = 290.50000000000006-style round-up.
        let exact = self.scale * full as f64;
        let nearest = exact.round();
        if (exact - nearest).abs() < 1e-9 {
            nearest as usize
        } else {
            exact.ceil() as usize
        }
    }

    pub fn series_len(&self) -> usize {
        self.window + self.windows_per_series - 1
    }

    fn trajectories(&self, split: Split) -> usize {
        self.windows_per_class(split)
            .div_ceil(self.windows_per_series)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn code(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }
}

/// Purpose of a random stream within one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Operating,
    Noise,
    Fault,
}

/// Seed of the stream one trajectory uses for one purpose.
pub fn trajectory_stream_seed(
    cfg: &GenConfig,
    split: Split,
    class: usize,
    trajectory: usize,
    purpose: Purpose,
) -> u64 {
    let p = match purpose {
        Purpose::Operating => 0,
        Purpose::Noise => 1,
        Purpose::Fault => 2,
    };
    rng::stream_seed(
        cfg.seed,
        "edfa-synth",
        &[split.code(), class as u64, trajectory as u64, p],
    )
}

fn trajectory_stream(
    cfg: &GenConfig,
    split: Split,
    class: usize,
    traj: usize,
    purpose: Purpose,
) -> Stream {
    use rand::SeedableRng;
    Stream::seed_from_u64(trajectory_stream_seed(cfg, split, class, traj, purpose))
}

/// Every stream seed a split consumes.
pub fn split_stream_seeds(cfg: &GenConfig, split: Split) -> Vec<u64> {
    let mut out = Vec::new();
    for class in 0..NUM_CLASSES {
        for traj in 0..cfg.trajectories(split) {
            for purpose in [Purpose::Operating, Purpose::Noise, Purpose::Fault] {
                out.push(trajectory_stream_seed(cfg, split, class, traj, purpose));
            }
        }
    }
    out
}

/// Noise-free signal of one trajectory: operating point on the grid plus a
/// slow input-power wander.
pub fn base_series(cfg: &GenConfig, split: Split, class: usize, trajectory: usize) -> Tensor<f64> {
    let mut op = trajectory_stream(cfg, split, class, trajectory, Purpose::Operating);
    let (pmin, pmax) = cfg.input_power_dbm;
    let (gmin, gmax) = cfg.gain_db;
    let p_dbm = op.random_range(pmin..=pmax) as f64;
    let g_db = op.random_range(gmin..=gmax) as f64;
    let wander_phase = op.random_range(0.0..2.0 * PI);
    let centre = |lo: i32, hi: i32, v: f64| {
        let half = (hi - lo) as f64 / 2.0;
        if half == 0.0 {
            0.0
        } else {
            (v - (lo + hi) as f64 / 2.0) / half
        }
    };
    let p0 = centre(pmin, pmax, p_dbm);
    let g = centre(gmin, gmax, g_db);
    let catalog = channel_catalog();
    let len = cfg.series_len();
    let mut data = Vec::with_capacity(len * NUM_CHANNELS);
    for t in 0..len {
        let p = p0 + 0.05 * (2.0 * PI * t as f64 / 120.0 + wander_phase).sin();
        for ch in &catalog {
            data.push(ch.nominal + ch.input_sensitivity * p + ch.gain_sensitivity * g);
        }
    }
    Tensor::new(vec![len, NUM_CHANNELS], data).expect("positive dims")
}

/// Gaussian channel noise of one trajectory.
pub fn noise_series(cfg: &GenConfig, split: Split, class: usize, trajectory: usize) -> Tensor<f64> {
    let mut noise = trajectory_stream(cfg, split, class, trajectory, Purpose::Noise);
    let catalog = channel_catalog();
    let len = cfg.series_len();
    let mut data = Vec::with_capacity(len * NUM_CHANNELS);
    for _ in 0..len {
        for ch in &catalog {
            let z: f64 = noise.sample(StandardNormal);
            data.push(ch.noise_sigma * z);
        }
    }
    Tensor::new(vec![len, NUM_CHANNELS], data).expect("positive dims")
}

/// Full raw trajectory: base + noise, then the class signature.
pub fn trajectory(
    cfg: &GenConfig,
    split: Split,
    class: usize,
    trajectory: usize,
) -> Result<CbmSeries<f64>> {
    let base = base_series(cfg, split, class, trajectory);
    let noise = noise_series(cfg, split, class, trajectory);
    let clean: Vec<f64> = base
        .data()
        .iter()
        .zip(noise.data())
        .map(|(b, n)| b + n)
        .collect();
    let clean = Tensor::new(base.shape().to_vec(), clean)?;
    let sig = &class_signature_table()[class];
    let mut fault = trajectory_stream(cfg, split, class, trajectory, Purpose::Fault);
    let (lo, hi) = SEVERITY_RANGE;
    let severity = sig.severity * fault.random_range(lo..hi);
    let series = inject_fault(&clean, sig, severity, cfg.window, &mut fault)?;
    CbmSeries::new(series)
}

fn generate_split(cfg: &GenConfig, split: Split) -> Result<WindowedDataset<f64>> {
    let per_class = cfg.windows_per_class(split);
    let mut windows = Vec::with_capacity(per_class * NUM_CLASSES);
    let mut labels = Vec::with_capacity(per_class * NUM_CLASSES);
    for class in 0..NUM_CLASSES {
        let mut produced = 0;
        for traj in 0..cfg.trajectories(split) {
            let series = trajectory(cfg, split, class, traj)?;
            for w in sliding_windows(&series, cfg.window)? {
                if produced == per_class {
                    break;
                }
                windows.push(w);
                labels.push(class);
                produced += 1;
            }
        }
    }
    WindowedDataset::from_windows(&windows, labels)
}

/// Raw (unscaled) train and test splits, class-major order, balanced.
pub fn generate_dataset(cfg: &GenConfig) -> Result<(WindowedDataset<f64>, WindowedDataset<f64>)> {
    cfg.validate()?;
    Ok((
        generate_split(cfg, Split::Train)?,
        generate_split(cfg, Split::Test)?,
    ))
}
