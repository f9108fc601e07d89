use num_complex::Complex;

use crate::error::Result;
use crate::features::Window;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Unnormalized 2D DFT of a `rows x cols` real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub rows: usize,
    pub cols: usize,
    pub bins: Vec<Complex<T>>,
}

impl<T: Scalar> Spectrum<T> {
    pub fn at(&self, u: usize, v: usize) -> Complex<T> {
        self.bins[u * self.cols + v]
    }
}

/// `X[u, v] = Σ_t Σ_s x[t, s] · exp(-2πi (u t / W + v s / k))`
pub fn dft2d<T: Scalar>(window: &Window<T>) -> Spectrum<T> {
    let (rows, cols) = (window.len(), window.features());
    let mut bins: Vec<Complex<T>> = window
        .values()
        .data()
        .iter()
        .map(|&v| Complex::new(v, T::zero()))
        .collect();
    let row_plan = Dft1d::new(cols);
    for row in bins.chunks_mut(cols) {
        row_plan.apply(row);
    }
    let col_plan = Dft1d::new(rows);
    let mut column = vec![Complex::new(T::zero(), T::zero()); rows];
    for j in 0..cols {
        for i in 0..rows {
            column[i] = bins[i * cols + j];
        }
        col_plan.apply(&mut column);
        for i in 0..rows {
            bins[i * cols + j] = column[i];
        }
    }
    Spectrum { rows, cols, bins }
}

/// `|X[u, v]|` with the same `W x k` layout as the input window.
pub fn fft2d_magnitude<T: Scalar>(window: &Window<T>) -> Result<Window<T>> {
    let spec = dft2d(window);
    let mags = spec.bins.iter().map(|c| c.norm()).collect();
    Window::new(Tensor::new(vec![spec.rows, spec.cols], mags)?)
}

/// In-place 1D forward DFT for one length: iterative radix-2 when the length
/// is a power of two, direct summation with a twiddle table otherwise.
struct Dft1d<T> {
    n: usize,
    twiddles: Vec<Complex<T>>,
}

impl<T: Scalar> Dft1d<T> {
    fn new(n: usize) -> Self {
        let twiddles = (0..n)
            .map(|j| {
                let angle = -2.0 * std::f64::consts::PI * j as f64 / n as f64;
                Complex::new(T::lit(angle.cos()), T::lit(angle.sin()))
            })
            .collect();
        Self { n, twiddles }
    }

    fn apply(&self, buf: &mut [Complex<T>]) {
        debug_assert_eq!(buf.len(), self.n);
        if self.n <= 1 {
            return;
        }
        if self.n.is_power_of_two() {
            self.radix2(buf);
        } else {
            self.direct(buf);
        }
    }

    fn direct(&self, buf: &mut [Complex<T>]) {
        let n = self.n;
        let input = buf.to_vec();
        for (f, out) in buf.iter_mut().enumerate() {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (t, &x) in input.iter().enumerate() {
                acc = acc + x * self.twiddles[(f * t) % n];
            }
            *out = acc;
        }
    }

    fn radix2(&self, buf: &mut [Complex<T>]) {
        let n = self.n;
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..len / 2 {
                    let w = self.twiddles[k * step];
                    let a = buf[start + k];
                    let b = buf[start + k + len / 2] * w;
                    buf[start + k] = a + b;
                    buf[start + k + len / 2] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn window(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Window<f64> {
        let data = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        Window::new(Tensor::new(vec![rows, cols], data).unwrap()).unwrap()
    }

    /// Direct double sum with fresh trigonometry for every term.
    fn naive(w: &Window<f64>) -> Vec<Complex<f64>> {
        let (m, n) = (w.len(), w.features());
        let mut out = Vec::with_capacity(m * n);
        for u in 0..m {
            for v in 0..n {
                let mut acc = Complex::new(0.0, 0.0);
                for t in 0..m {
                    for s in 0..n {
                        let a = -2.0 * PI * ((u * t) as f64 / m as f64 + (v * s) as f64 / n as f64);
                        acc += w.values().get(&[t, s]) * Complex::new(a.cos(), a.sin());
                    }
                }
                out.push(acc);
            }
        }
        out
    }

    #[test]
    fn constant_matrix_is_dc_only() {
        for (m, n) in [(4, 8), (5, 3), (40, 34)] {
            let mag = fft2d_magnitude(&window(m, n, |_, _| 2.5)).unwrap();
            let d = mag.values().data();
            assert!((d[0] - 2.5 * (m * n) as f64).abs() < 1e-9);
            assert!(d[1..].iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn radix2_and_direct_paths_agree_with_naive() {
        for (m, n) in [(8, 16), (6, 5), (16, 3)] {
            let w = window(m, n, |t, s| {
                ((t * 7 + s * 3) % 5) as f64 - 1.7 + 0.1 * t as f64
            });
            let fast = dft2d(&w);
            for (a, b) in fast.bins.iter().zip(naive(&w)) {
                assert!((a - b).norm() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn cosine_column_concentrates_in_conjugate_bins() {
        let (m, n, f, col) = (40, 34, 3, 5);
        let w = window(m, n, |t, s| {
            if s == col {
                (2.0 * PI * (f * t) as f64 / m as f64).cos()
            } else {
                0.0
            }
        });
        let mag = fft2d_magnitude(&w).unwrap();
        let oracle = naive(&w);
        for u in 0..m {
            for v in 0..n {
                let got = mag.values().get(&[u, v]);
                assert!((got - oracle[u * n + v].norm()).abs() < 1e-9);
                let expect = if u == f || u == m - f {
                    m as f64 / 2.0
                } else {
                    0.0
                };
                assert!((got - expect).abs() < 1e-9, "bin ({u},{v}) = {got}");
            }
        }
    }
}
