use crate::error::{usage, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Raw monitoring series: `len` time points by `k` parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CbmSeries<T> {
    values: Tensor<T>,
}

impl<T: Scalar> CbmSeries<T> {
    pub fn new(values: Tensor<T>) -> Result<Self> {
        if values.rank() != 2 {
            return Err(usage(format!(
                "a monitoring series is a time x parameter matrix, got shape {:?}",
                values.shape()
            )));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn features(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn values(&self) -> &Tensor<T> {
        &self.values
    }
}

/// `W` consecutive time points of a series, `W x k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window<T> {
    values: Tensor<T>,
}

impl<T: Scalar> Window<T> {
    pub fn new(values: Tensor<T>) -> Result<Self> {
        if values.rank() != 2 {
            return Err(Error::Shape {
                what: "window".into(),
                expected: vec![0, 0],
                actual: values.shape().to_vec(),
            });
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn features(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn values(&self) -> &Tensor<T> {
        &self.values
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.values
    }

    /// Values of feature column `j` in time order.
    pub fn column(&self, j: usize) -> Vec<T> {
        let k = self.features();
        self.values
            .data()
            .iter()
            .skip(j)
            .step_by(k)
            .copied()
            .collect()
    }
}

/// Every stride-1 window of length `width`: exactly `len - width + 1` of them,
/// window `i` covering rows `[i, i + width)`.
pub fn sliding_windows<T: Scalar>(series: &CbmSeries<T>, width: usize) -> Result<Vec<Window<T>>> {
    let len = series.len();
    if width == 0 || len < width {
        return Err(usage(format!(
            "series of length {len} is too short for windows of length {width}"
        )));
    }
    let k = series.features();
    let data = series.values.data();
    (0..=len - width)
        .map(|i| {
            let rows = data[i * k..(i + width) * k].to_vec();
            Window::new(Tensor::new(vec![width, k], rows)?)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(len: usize, k: usize) -> CbmSeries<f64> {
        let data = (0..len * k).map(|i| (i / k) as f64).collect();
        CbmSeries::new(Tensor::new(vec![len, k], data).unwrap()).unwrap()
    }

    #[test]
    fn full_length_window_equals_series() {
        let s = ramp(40, 3);
        let w = sliding_windows(&s, 40).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].values(), s.values());
    }

    #[test]
    fn window_count_and_offsets() {
        let w = sliding_windows(&ramp(100, 2), 40).unwrap();
        assert_eq!(w.len(), 61);
        assert_eq!(w[3].values().get(&[0, 0]), 3.0);
        assert_eq!(w[3].column(1)[39], 42.0);
    }

    #[test]
    fn too_short_series_is_rejected() {
        assert!(sliding_windows(&ramp(10, 2), 40).is_err());
    }

    proptest! {
        #[test]
        fn count_is_len_minus_width_plus_one(len in 1usize..120, width in 1usize..60) {
            let s = ramp(len, 2);
            match sliding_windows(&s, width) {
                Ok(w) => {
                    prop_assert!(len >= width);
                    prop_assert_eq!(w.len(), len - width + 1);
                }
                Err(_) => prop_assert!(len < width),
            }
        }
    }
}
