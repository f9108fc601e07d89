use crate::error::{usage, Result};
use crate::features::Window;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Rows of [`DecoderFeatures`]: mean, variance, and the three quadratic-fit
/// coefficients.
pub const STAT_TOKENS: usize = 5;

/// Least-squares coefficients of `c0 + c1·t + c2·t²` over `t = 0..W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadFit<T> {
    pub c0: T,
    pub c1: T,
    pub c2: T,
}

impl<T: Scalar> QuadFit<T> {
    pub fn eval(&self, t: T) -> T {
        self.c0 + self.c1 * t + self.c2 * t * t
    }
}

/// Solves the 3x3 normal equations of the quadratic least-squares problem
/// by Gaussian elimination with partial pivoting.
pub fn fit_quadratic<T: Scalar>(column: &[T]) -> Result<QuadFit<T>> {
    if column.len() < 3 {
        return Err(usage(format!(
            "quadratic fit needs at least 3 points, got {}",
            column.len()
        )));
    }
    // Power sums Σ t^p for p = 0..4 and moments Σ t^p y for p = 0..2.
    let mut s = [T::zero(); 5];
    let mut b = [T::zero(); 3];
    for (i, &y) in column.iter().enumerate() {
        let t = T::from_usize_lossy(i);
        let mut tp = T::one();
        for (p, sp) in s.iter_mut().enumerate() {
            *sp += tp;
            if p < 3 {
                b[p] += tp * y;
            }
            tp *= t;
        }
    }
    let mut a = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| {
                a[i][col]
                    .abs()
                    .partial_cmp(&a[j][col].abs())
                    .expect("finite")
            })
            .expect("non-empty range");
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for c in col..3 {
                let v = a[col][c];
                a[row][c] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = [T::zero(); 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for c in row + 1..3 {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    Ok(QuadFit {
        c0: x[0],
        c1: x[1],
        c2: x[2],
    })
}

/// `5 x k` statistic tokens computed per feature column over time.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderFeatures<T> {
    values: Tensor<T>,
}

impl<T: Scalar> DecoderFeatures<T> {
    pub fn values(&self) -> &Tensor<T> {
        &self.values
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.values
    }

    pub fn mean(&self, j: usize) -> T {
        self.values.get(&[0, j])
    }

    pub fn variance(&self, j: usize) -> T {
        self.values.get(&[1, j])
    }

    pub fn quadratic(&self, j: usize) -> QuadFit<T> {
        QuadFit {
            c0: self.values.get(&[2, j]),
            c1: self.values.get(&[3, j]),
            c2: self.values.get(&[4, j]),
        }
    }
}

pub fn engineer_decoder_features<T: Scalar>(window: &Window<T>) -> Result<DecoderFeatures<T>> {
    let (w, k) = (window.len(), window.features());
    let n = T::from_usize_lossy(w);
    let mut data = vec![T::zero(); STAT_TOKENS * k];
    for j in 0..k {
        let col = window.column(j);
        let mean = col.iter().copied().sum::<T>() / n;
        let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let fit = fit_quadratic(&col)?;
        for (row, v) in [mean, var, fit.c0, fit.c1, fit.c2].into_iter().enumerate() {
            data[row * k + j] = v;
        }
    }
    Ok(DecoderFeatures {
        values: Tensor::new(vec![STAT_TOKENS, k], data)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn exact_members_are_recovered() {
        let f = fit_quadratic(&[2.0f64; 10]).unwrap();
        assert!(close(f.c0, 2.0, 1e-10) && close(f.c1, 0.0, 1e-10) && close(f.c2, 0.0, 1e-10));
        let ramp: Vec<f64> = (0..40).map(|t| t as f64).collect();
        let f = fit_quadratic(&ramp).unwrap();
        assert!(close(f.c0, 0.0, 1e-9) && close(f.c1, 1.0, 1e-9) && close(f.c2, 0.0, 1e-9));
        let quad: Vec<f64> = (0..40)
            .map(|t| 1.0 + 2.0 * t as f64 + 3.0 * (t * t) as f64)
            .collect();
        let f = fit_quadratic(&quad).unwrap();
        assert!(close(f.c0, 1.0, 1e-8) && close(f.c1, 2.0, 1e-8) && close(f.c2, 3.0, 1e-8));
    }

    #[test]
    fn rejects_short_columns() {
        assert!(fit_quadratic(&[1.0f64, 2.0]).is_err());
    }

    #[test]
    fn constant_window_statistics() {
        let w = Window::new(Tensor::full(&[40, 34], 5.0f64)).unwrap();
        let f = engineer_decoder_features(&w).unwrap();
        assert_eq!(f.values().shape(), &[5, 34]);
        for j in 0..34 {
            assert_eq!(f.mean(j), 5.0);
            assert_eq!(f.variance(j), 0.0);
            let q = f.quadratic(j);
            assert!(close(q.c0, 5.0, 1e-9) && close(q.c1, 0.0, 1e-9) && close(q.c2, 0.0, 1e-9));
        }
    }

    #[test]
    fn population_moments() {
        let w = Window::new(Tensor::new(vec![4, 1], vec![1.0f64, 2.0, 3.0, 4.0]).unwrap()).unwrap();
        let f = engineer_decoder_features(&w).unwrap();
        assert_eq!(f.mean(0), 2.5);
        assert_eq!(f.variance(0), 1.25);
    }
}
