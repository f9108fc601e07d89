use crate::error::{usage, Error, Result};
use crate::features::Window;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `(samples, window, features)` tensor with one class label per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset<T> {
    data: Tensor<T>,
    labels: Vec<usize>,
}

impl<T: Scalar> WindowedDataset<T> {
    pub fn new(data: Tensor<T>, labels: Vec<usize>) -> Result<Self> {
        if data.rank() != 3 {
            return Err(usage(format!(
                "dataset tensor must have rank 3, got shape {:?}",
                data.shape()
            )));
        }
        if data.shape()[0] != labels.len() {
            return Err(Error::Shape {
                what: "dataset labels".into(),
                expected: vec![data.shape()[0]],
                actual: vec![labels.len()],
            });
        }
        Ok(Self { data, labels })
    }

    pub fn from_windows(windows: &[Window<T>], labels: Vec<usize>) -> Result<Self> {
        let first = windows.first().ok_or_else(|| usage("empty dataset"))?;
        let (w, k) = (first.len(), first.features());
        let mut data = Vec::with_capacity(windows.len() * w * k);
        for win in windows {
            if (win.len(), win.features()) != (w, k) {
                return Err(Error::Shape {
                    what: "dataset window".into(),
                    expected: vec![w, k],
                    actual: vec![win.len(), win.features()],
                });
            }
            data.extend_from_slice(win.values().data());
        }
        Self::new(Tensor::new(vec![windows.len(), w, k], data)?, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn features(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.len(), self.window_len(), self.features()]
    }

    pub fn data(&self) -> &Tensor<T> {
        &self.data
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn window(&self, i: usize) -> Window<T> {
        let (w, k) = (self.window_len(), self.features());
        let rows = self.data.data()[i * w * k..(i + 1) * w * k].to_vec();
        Window::new(Tensor::new(vec![w, k], rows).expect("consistent dims")).expect("rank 2")
    }

    pub fn windows(&self) -> impl Iterator<Item = Window<T>> + '_ {
        (0..self.len()).map(|i| self.window(i))
    }

    /// Samples per class label, indexed by label.
    pub fn class_counts(&self, classes: usize) -> Vec<usize> {
        let mut counts = vec![0; classes];
        for &l in &self.labels {
            if l < classes {
                counts[l] += 1;
            }
        }
        counts
    }

    /// Samples whose label is in `keep`, with their original labels.
    pub fn filter_classes(&self, keep: &[usize]) -> Result<Self> {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| keep.contains(&self.labels[i]))
            .collect();
        self.subset(&idx)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(usage("empty subset"));
        }
        let block = self.window_len() * self.features();
        let mut data = Vec::with_capacity(indices.len() * block);
        for &i in indices {
            data.extend_from_slice(&self.data.data()[i * block..(i + 1) * block]);
        }
        let shape = vec![indices.len(), self.window_len(), self.features()];
        Self::new(
            Tensor::new(shape, data)?,
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// Same data with every window replaced by `f(window)`.
    pub fn map_data(&self, f: impl Fn(&Tensor<T>) -> Result<Tensor<T>>) -> Result<Self> {
        let data = f(&self.data)?;
        if data.shape() != self.data.shape() {
            return Err(Error::Shape {
                what: "mapped dataset".into(),
                expected: self.data.shape().to_vec(),
                actual: data.shape().to_vec(),
            });
        }
        Self::new(data, self.labels.clone())
    }

    pub fn cast<U: Scalar>(&self) -> WindowedDataset<U> {
        WindowedDataset {
            data: self.data.cast(),
            labels: self.labels.clone(),
        }
    }
}
