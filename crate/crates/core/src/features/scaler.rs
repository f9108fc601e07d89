use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Per-feature standardization `(x - mean) / scale` with population
/// statistics. Features with no spread get scale 1, so they map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Scalar> Scaler<T> {
    /// Fit on a tensor whose last axis indexes features; every other axis is
    /// flattened into rows.
    pub fn fit(train: &Tensor<T>) -> Result<Self> {
        let k = *train.shape().last().expect("rank >= 1");
        let rows = train.numel() / k;
        if train.rank() < 2 || rows < 2 {
            return Err(usage(format!(
                "scaler needs at least 2 training rows, got shape {:?}",
                train.shape()
            )));
        }
        let n = T::from_usize_lossy(rows);
        let mut mean = vec![T::zero(); k];
        for row in train.data().chunks(k) {
            mean.iter_mut().zip(row).for_each(|(m, &v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![T::zero(); k];
        for row in train.data().chunks(k) {
            for j in 0..k {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        let scale = var
            .iter()
            .zip(&mean)
            .map(|(&v, &m)| {
                let sd = (v / n).sqrt();
                let floor = T::lit(1e-12) * m.abs().max(T::one());
                if sd > floor {
                    sd
                } else {
                    T::one()
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn features(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, data: &Tensor<T>) -> Result<Tensor<T>> {
        let k = *data.shape().last().expect("rank >= 1");
        if k != self.features() {
            return Err(usage(format!(
                "scaler was fitted on {} features, data has shape {:?}",
                self.features(),
                data.shape()
            )));
        }
        let mut out = data.clone();
        for row in out.data_mut().chunks_mut(k) {
            for j in 0..k {
                row[j] = (row[j] - self.mean[j]) / self.scale[j];
            }
        }
        Ok(out)
    }

    pub fn cast<U: Scalar>(&self) -> Scaler<U> {
        Scaler {
            mean: self.mean.iter().map(|v| U::lit(v.as_f64())).collect(),
            scale: self.scale.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[f64]) -> Tensor<f64> {
        Tensor::new(vec![values.len(), 1], values.to_vec()).unwrap()
    }

    #[test]
    fn two_point_column() {
        let s = Scaler::fit(&col(&[1.0, 3.0])).unwrap();
        assert_eq!((s.mean[0], s.scale[0]), (2.0, 1.0));
        assert_eq!(s.apply(&col(&[1.0, 3.0])).unwrap().data(), &[-1.0, 1.0]);
        assert_eq!(s.apply(&col(&[5.0])).unwrap().data(), &[3.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let s = Scaler::fit(&col(&[7.0, 7.0, 7.0])).unwrap();
        assert_eq!(s.scale[0], 1.0);
        assert_eq!(s.apply(&col(&[7.0, 7.0, 7.0])).unwrap().data(), &[0.0; 3]);
    }

    #[test]
    fn too_few_rows() {
        assert!(Scaler::fit(&col(&[1.0])).is_err());
    }

    #[test]
    fn feature_count_mismatch() {
        let s = Scaler::fit(&col(&[1.0, 2.0])).unwrap();
        assert!(s.apply(&Tensor::zeros(&[2, 2])).is_err());
    }

    #[test]
    fn refit_after_scaling_is_identity() {
        let data: Vec<f64> = (0..60)
            .map(|i| ((i * 37) % 11) as f64 * 0.7 - (i % 3) as f64)
            .collect();
        let x = Tensor::new(vec![5, 4, 3], data).unwrap();
        let s = Scaler::fit(&x).unwrap();
        let y = s.apply(&x).unwrap();
        let again = Scaler::fit(&y).unwrap();
        for j in 0..3 {
            assert!(again.mean[j].abs() < 1e-9);
            assert!((again.scale[j] - 1.0).abs() < 1e-9);
        }
        let z = again.apply(&y).unwrap();
        for (a, b) in z.data().iter().zip(y.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
