use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::model::{EncoderPath, ModelConfig};
use crate::rng;
use crate::scalar::Scalar;
use crate::train::{train_new, PreparedData, TrainHyper, TrainReport};

/// Run `f` on a dedicated pool of `threads` workers. Independent runs are
/// distributed over the pool; results are collected in submission order, so
/// they do not depend on the thread count.
pub fn install<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub cc_mean: f64,
    /// Sample variance (`n - 1`); 0 for a single run.
    pub cc_var: f64,
    /// Lowest test CC over the runs.
    pub cc_best: f64,
    pub reports: Vec<TrainReport>,
}

impl RunStats {
    pub fn from_ccs(ccs: &[f64]) -> Result<(f64, f64, f64)> {
        if ccs.is_empty() {
            return Err(usage("statistics need at least one run"));
        }
        let n = ccs.len() as f64;
        let mean = ccs.iter().sum::<f64>() / n;
        let var = if ccs.len() < 2 {
            0.0
        } else {
            ccs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)
        };
        let best = ccs.iter().copied().fold(f64::INFINITY, f64::min);
        Ok((mean, var, best))
    }

    pub fn from_reports(reports: Vec<TrainReport>) -> Result<Self> {
        let ccs: Vec<f64> = reports.iter().map(|r| r.test_cc).collect();
        let (cc_mean, cc_var, cc_best) = Self::from_ccs(&ccs)?;
        Ok(Self {
            cc_mean,
            cc_var,
            cc_best,
            reports,
        })
    }
}

/// `n` runs that differ only in seed: run `i` initializes the model with and
/// draws batches and dropout from `hyper.seed + i`. The data is fixed.
pub fn run_repeated<T: Scalar>(
    config: &ModelConfig,
    hyper: &TrainHyper,
    data: &PreparedData<T>,
    n: usize,
) -> Result<RunStats> {
    if n == 0 {
        return Err(usage("run_repeated needs n >= 1"));
    }
    let reports = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let seed = hyper.seed.wrapping_add(i);
            let h = TrainHyper {
                seed,
                ..hyper.clone()
            };
            train_new(config, seed, data, &h).map(|(_, r)| r)
        })
        .collect::<Result<Vec<_>>>()?;
    RunStats::from_reports(reports)
}

/// Path subsets in ablation-table row order.
pub const ABLATION_ORDER: [&[EncoderPath]; 7] = {
    use EncoderPath::*;
    [
        &[Time],
        &[Sensor],
        &[Frequency],
        &[Time, Sensor],
        &[Time, Frequency],
        &[Sensor, Frequency],
        &[Time, Sensor, Frequency],
    ]
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub paths: Vec<EncoderPath>,
    /// Test CC per seed, in seed order.
    pub ccs: Vec<f64>,
    pub cc_mean: f64,
}

impl AblationRow {
    pub fn has(&self, path: EncoderPath) -> bool {
        self.paths.contains(&path)
    }
}

/// Train every non-empty path subset once per seed on the same data. The
/// seed sets both model init and batch order, identically across rows.
pub fn ablate<T: Scalar>(
    base: &ModelConfig,
    hyper: &TrainHyper,
    data: &PreparedData<T>,
    seeds: &[u64],
) -> Result<Vec<AblationRow>> {
    if seeds.is_empty() {
        return Err(usage("ablation needs at least one seed"));
    }
    let jobs: Vec<(usize, u64)> = (0..ABLATION_ORDER.len())
        .flat_map(|r| seeds.iter().map(move |&s| (r, s)))
        .collect();
    let ccs = jobs
        .par_iter()
        .map(|&(row, seed)| {
            let config = ModelConfig {
                enabled_paths: ABLATION_ORDER[row].to_vec(),
                ..base.clone()
            };
            let h = TrainHyper {
                seed,
                ..hyper.clone()
            };
            train_new(&config, seed, data, &h).map(|(_, r)| r.test_cc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ABLATION_ORDER
        .iter()
        .zip(ccs.chunks(seeds.len()))
        .map(|(paths, ccs)| AblationRow {
            paths: paths.to_vec(),
            ccs: ccs.to_vec(),
            cc_mean: ccs.iter().sum::<f64>() / ccs.len() as f64,
        })
        .collect())
}

/// Bounds of the hyperparameter search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub d_model: Vec<usize>,
    pub heads: Vec<usize>,
    pub encoder_layers: Vec<usize>,
    pub decoder_layers: Vec<usize>,
    pub d_ffn: Vec<usize>,
    /// Uniform range.
    pub dropout: (f64, f64),
    /// Log-uniform range, rounded to whole steps.
    pub warmup_steps: (f64, f64),
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            d_model: vec![32, 64, 128],
            heads: vec![2, 4, 8],
            encoder_layers: vec![1, 2, 3],
            decoder_layers: vec![1, 2, 3],
            d_ffn: vec![64, 128, 256],
            dropout: (0.0, 0.3),
            warmup_steps: (100.0, 2000.0),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let lists = [
            &self.d_model,
            &self.heads,
            &self.encoder_layers,
            &self.decoder_layers,
            &self.d_ffn,
        ];
        if lists.iter().any(|l| l.is_empty() || l.contains(&0)) {
            return Err(usage(
                "every search dimension needs at least one positive choice",
            ));
        }
        if self
            .d_model
            .iter()
            .any(|&d| !self.heads.iter().any(|&h| d % h == 0))
        {
            return Err(usage("some d_model choice is divisible by no head count"));
        }
        let (dlo, dhi) = self.dropout;
        let (wlo, whi) = self.warmup_steps;
        if !(0.0 <= dlo && dlo <= dhi && dhi < 1.0) || !(1.0 <= wlo && wlo <= whi) {
            return Err(usage(
                "dropout must satisfy 0 <= lo <= hi < 1 and warmup 1 <= lo <= hi",
            ));
        }
        Ok(())
    }

    fn sample(
        &self,
        base: &ModelConfig,
        hyper: &TrainHyper,
        stream: &mut rng::Stream,
    ) -> (ModelConfig, TrainHyper) {
        fn pick<R: Rng>(s: &mut R, xs: &[usize]) -> usize {
            xs[s.random_range(0..xs.len())]
        }
        let d_model = pick(stream, &self.d_model);
        let heads: Vec<usize> = self
            .heads
            .iter()
            .copied()
            .filter(|&h| d_model.is_multiple_of(h))
            .collect();
        let config = ModelConfig {
            d_model,
            heads: pick(stream, &heads),
            encoder_layers: pick(stream, &self.encoder_layers),
            decoder_layers: pick(stream, &self.decoder_layers),
            d_ffn: pick(stream, &self.d_ffn),
            dropout: uniform(stream, self.dropout),
            ..base.clone()
        };
        let (lo, hi) = self.warmup_steps;
        let warmup = uniform(stream, (lo.ln(), hi.ln())).exp().round().max(1.0) as usize;
        (
            config,
            TrainHyper {
                warmup_steps: warmup,
                ..hyper.clone()
            },
        )
    }
}

fn uniform(stream: &mut rng::Stream, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        stream.random_range(lo..hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub config: ModelConfig,
    pub hyper: TrainHyper,
    pub cc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Trial,
    pub trials: Vec<Trial>,
}

/// Seeded random search: `budget` configurations are drawn from `space`
/// (model fields not in the space come from `base`, training fields from
/// `hyper`), each trained once, and the lowest test CC wins; ties go to the
/// earlier trial.
pub fn random_search<T: Scalar>(
    space: &SearchSpace,
    base: &ModelConfig,
    hyper: &TrainHyper,
    budget: usize,
    seed: u64,
    data: &PreparedData<T>,
) -> Result<SearchResult> {
    if budget == 0 {
        return Err(usage("search budget must be >= 1"));
    }
    space.validate()?;
    let mut stream = rng::stream(seed, "random-search", &[]);
    let candidates: Vec<_> = (0..budget)
        .map(|_| space.sample(base, hyper, &mut stream))
        .collect();
    let trials = candidates
        .into_par_iter()
        .enumerate()
        .map(|(index, (config, h))| {
            let model_seed = rng::stream_seed(seed, "random-search-init", &[index as u64]);
            let (_, report) = train_new(&config, model_seed, data, &h)?;
            Ok(Trial {
                index,
                config,
                hyper: h,
                cc: report.test_cc,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = trials
        .iter()
        .fold(&trials[0], |best, t| if t.cc < best.cc { t } else { best })
        .clone();
    Ok(SearchResult { best, trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_variance_example() {
        let (mean, var, best) = RunStats::from_ccs(&[0.4, 0.5]).unwrap();
        assert!((mean - 0.45).abs() < 1e-15);
        assert!((var - 0.005).abs() < 1e-15);
        assert_eq!(best, 0.4);
        assert_eq!(RunStats::from_ccs(&[0.7]).unwrap(), (0.7, 0.0, 0.7));
        assert!(RunStats::from_ccs(&[]).is_err());
    }

    #[test]
    fn ablation_order_is_fixed() {
        let names: Vec<String> = ABLATION_ORDER
            .iter()
            .map(|p| p.iter().map(|x| &x.name()[..1]).collect())
            .collect();
        assert_eq!(names, ["t", "s", "f", "ts", "tf", "sf", "tsf"]);
    }

    #[test]
    fn empty_space_is_rejected() {
        assert!(SearchSpace::default().validate().is_ok());
        let empty = SearchSpace {
            heads: vec![],
            ..SearchSpace::default()
        };
        assert!(empty.validate().is_err());
        let odd = SearchSpace {
            d_model: vec![30],
            heads: vec![4],
            ..SearchSpace::default()
        };
        assert!(odd.validate().is_err());
    }

    #[test]
    fn samples_respect_bounds() {
        let space = SearchSpace::default();
        let mut s = rng::stream(1, "t", &[]);
        for _ in 0..200 {
            let (c, h) = space.sample(&ModelConfig::default(), &TrainHyper::default(), &mut s);
            assert!(c.validate().is_ok());
            assert!((0.0..0.3).contains(&c.dropout));
            assert!((100..=2000).contains(&h.warmup_steps));
        }
    }
}
