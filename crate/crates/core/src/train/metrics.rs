use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::model::{Batch, ItstModel, PreparedWindow};
use crate::rng::mix64;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Anything that maps a batch of prepared windows to class log-probabilities.
pub trait Classifier<T: Scalar> {
    fn num_classes(&self) -> usize;

    /// `[B, num_classes]` log-probabilities.
    fn log_proba(&self, batch: &Batch<T>) -> Result<Tensor<T>>;
}

impl<T: Scalar> Classifier<T> for ItstModel<T> {
    fn num_classes(&self) -> usize {
        self.config().num_classes
    }

    fn log_proba(&self, batch: &Batch<T>) -> Result<Tensor<T>> {
        ItstModel::log_proba(self, batch)
    }
}

/// Equal probability for every class.
#[derive(Debug, Clone, Copy)]
pub struct UniformClassifier {
    pub classes: usize,
}

impl<T: Scalar> Classifier<T> for UniformClassifier {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn log_proba(&self, batch: &Batch<T>) -> Result<Tensor<T>> {
        let lp = -T::from_usize_lossy(self.classes).ln();
        Ok(Tensor::full(&[batch.size, self.classes], lp))
    }
}

/// Memorized `window -> label` table: one-hot on known windows, uniform on
/// unknown ones. Serves as a perfect-prediction fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupClassifier {
    pub classes: usize,
    /// Window fingerprint to label.
    #[serde(with = "pairs")]
    pub table: BTreeMap<u64, usize>,
}

/// Stored as `[[fingerprint, label], ...]` so integer keys survive formats
/// that only allow string map keys.
mod pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<u64, usize>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u64, usize>, D::Error> {
        Ok(Vec::<(u64, usize)>::deserialize(d)?.into_iter().collect())
    }
}

impl LookupClassifier {
    pub fn memorize<T: Scalar>(
        classes: usize,
        windows: &[PreparedWindow<T>],
        labels: &[usize],
    ) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (w, &l) in windows.iter().zip(labels) {
            if l >= classes {
                return Err(usage(format!("label {l} is outside {classes} classes")));
            }
            if let Some(prev) = table.insert(Self::fingerprint(w.time.data()), l) {
                if prev != l {
                    return Err(usage("identical windows carry different labels"));
                }
            }
        }
        Ok(Self { classes, table })
    }

    /// Hash of the exact bit patterns of a window.
    pub fn fingerprint<T: Scalar>(values: &[T]) -> u64 {
        values
            .iter()
            .fold(0x5EED_u64, |h, v| mix64(h ^ v.as_f64().to_bits()))
    }
}

impl<T: Scalar> Classifier<T> for LookupClassifier {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn log_proba(&self, batch: &Batch<T>) -> Result<Tensor<T>> {
        let c = self.classes;
        let block = batch.time.numel() / batch.size;
        let uniform = -T::from_usize_lossy(c).ln();
        let mut out = Vec::with_capacity(batch.size * c);
        for w in batch.time.data().chunks(block) {
            match self.table.get(&Self::fingerprint(w)) {
                Some(&label) => out.extend((0..c).map(|j| {
                    if j == label {
                        T::zero()
                    } else {
                        T::neg_infinity()
                    }
                })),
                None => out.extend(std::iter::repeat_n(uniform, c)),
            }
        }
        Ok(Tensor::new(vec![batch.size, c], out)?)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Counts of (true class, predicted class) and their row-normalized rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: usize,
    pub counts: Vec<Vec<usize>>,
    /// `hyp[i][j]`: fraction of true-class-`i` samples predicted `j`. Rows of
    /// classes without samples are all zero.
    pub hyp: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    pub fn from_predictions(classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Shape {
                what: "confusion predictions".into(),
                expected: vec![truth.len()],
                actual: vec![predicted.len()],
            });
        }
        let mut counts = vec![vec![0usize; classes]; classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= classes || p >= classes {
                return Err(usage(format!(
                    "class index out of range for {classes} classes"
                )));
            }
            counts[t][p] += 1;
        }
        let hyp = counts
            .iter()
            .map(|row| {
                let n: usize = row.iter().sum();
                row.iter()
                    .map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
                    .collect()
            })
            .collect();
        Ok(Self {
            classes,
            counts,
            hyp,
        })
    }

    pub fn samples(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let correct: usize = (0..self.classes).map(|i| self.counts[i][i]).sum();
        correct as f64 / self.samples().max(1) as f64
    }

    /// Header row of class names, then one labelled row of rates per true
    /// class.
    pub fn to_csv(&self, names: &[&str]) -> String {
        let name = |i: usize| {
            names
                .get(i)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("class {i}"))
        };
        let mut out = String::from("true\\predicted");
        for j in 0..self.classes {
            out.push(',');
            out.push_str(&name(j));
        }
        out.push('\n');
        for (i, row) in self.hyp.iter().enumerate() {
            out.push_str(&name(i));
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Mean cross-entropy over samples.
    pub cc: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

/// Cross-entropy, accuracy and confusion of `clf` on a labelled split,
/// processed in chunks of `eval_batch` windows.
pub fn evaluate<T: Scalar, C: Classifier<T> + ?Sized>(
    clf: &C,
    windows: &[PreparedWindow<T>],
    labels: &[usize],
    eval_batch: usize,
) -> Result<Evaluation> {
    if windows.is_empty() || windows.len() != labels.len() {
        return Err(usage(format!(
            "evaluation needs matching non-empty windows and labels, got {} and {}",
            windows.len(),
            labels.len()
        )));
    }
    let c = clf.num_classes();
    let mut total = 0.0f64;
    let mut predicted = Vec::with_capacity(labels.len());
    for (chunk, chunk_labels) in windows
        .chunks(eval_batch.max(1))
        .zip(labels.chunks(eval_batch.max(1)))
    {
        let batch = Batch::stack(&chunk.iter().collect::<Vec<_>>())?;
        let lp = clf.log_proba(&batch)?;
        for (row, &label) in lp.data().chunks(c).zip(chunk_labels) {
            if label >= c {
                return Err(usage(format!("label {label} is outside {c} classes")));
            }
            total -= row[label].as_f64();
            predicted.push(argmax(row));
        }
    }
    let confusion = ConfusionMatrix::from_predictions(c, labels, &predicted)?;
    Ok(Evaluation {
        // `+ 0.0` folds a negative zero into positive zero.
        cc: total / labels.len() as f64 + 0.0,
        accuracy: confusion.accuracy(),
        confusion,
    })
}
