//! Dense row-major n-dimensional arrays and the raw kernels behind the
//! differentiable operations in [`crate::autodiff`].

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: axis {axis} is invalid for shape {shape:?}")]
    Axis {
        op: &'static str,
        axis: usize,
        shape: Vec<usize>,
    },
    #[error("target label {label} is out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("{0}")]
    Usage(String),
}

pub type Result<T, E = TensorError> = std::result::Result<T, E>;

/// Dense tensor with positive dimensions and row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(TensorError::Usage(format!(
                "tensor dimensions must be positive, got {shape:?}"
            )));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(TensorError::Shape {
                op: "new",
                lhs: shape,
                rhs: vec![data.len()],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        assert!(
            shape.iter().all(|&d| d > 0),
            "zero-sized dimension in {shape:?}"
        );
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn scalar(value: T) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    /// Build a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(TensorError::Usage("ragged rows".into()));
        }
        Self::new(vec![rows.len(), cols], rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// A scalar tensor is any tensor holding exactly one element.
    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn item(&self) -> T {
        self.data[0]
    }

    pub fn get(&self, index: &[usize]) -> T {
        self.data[self.offset(index)]
    }

    fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.shape.len(), "index rank");
        index.iter().zip(&self.shape).fold(0, |acc, (&i, &d)| {
            assert!(i < d, "index {index:?} out of bounds for {:?}", self.shape);
            acc * d + i
        })
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.numel() {
            return Err(TensorError::Shape {
                op: "reshape",
                lhs: self.shape.clone(),
                rhs: shape.to_vec(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Swap the last two axes.
    pub fn transpose_last(&self) -> Result<Self> {
        let r = self.rank();
        if r < 2 {
            return Err(TensorError::Axis {
                op: "transpose",
                axis: 1,
                shape: self.shape.clone(),
            });
        }
        let (m, n) = (self.shape[r - 2], self.shape[r - 1]);
        let mut shape = self.shape.clone();
        shape.swap(r - 2, r - 1);
        let mut data = vec![T::zero(); self.numel()];
        for (src, dst) in self.data.chunks(m * n).zip(data.chunks_mut(m * n)) {
            transpose_into(src, dst, m, n);
        }
        Ok(Self { shape, data })
    }

    /// Plain (untracked) matrix product with the same broadcasting rules as
    /// [`crate::autodiff::Var::matmul`].
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        let plan = MatmulPlan::new(&self.shape, &rhs.shape)?;
        let mut out = vec![T::zero(); plan.out_numel()];
        plan.forward(&self.data, &rhs.data, &mut out);
        Ok(Self {
            shape: plan.out_shape,
            data: out,
        })
    }
}

/// Decomposition of an axis into (outer, len, inner) strides.
pub(crate) fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

pub(crate) fn transpose_into<T: Copy>(src: &[T], dst: &mut [T], m: usize, n: usize) {
    for i in 0..m {
        for j in 0..n {
            dst[j * m + i] = src[i * n + j];
        }
    }
}

/// `out[m×p] += a[m×n] · b[n×p]`
pub(crate) fn gemm_nn<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, n: usize, p: usize) {
    for i in 0..m {
        let row = &mut out[i * p..(i + 1) * p];
        for q in 0..n {
            let aiq = a[i * n + q];
            if aiq == T::zero() {
                continue;
            }
            let brow = &b[q * p..(q + 1) * p];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aiq * bv;
            }
        }
    }
}

/// `out[m×n] += a[m×p] · b[n×p]ᵀ`
pub(crate) fn gemm_nt<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, n: usize, p: usize) {
    for i in 0..m {
        let arow = &a[i * p..(i + 1) * p];
        for j in 0..n {
            let brow = &b[j * p..(j + 1) * p];
            let mut acc = T::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                acc += x * y;
            }
            out[i * n + j] += acc;
        }
    }
}

/// `out[n×p] += a[m×n]ᵀ · c[m×p]`
pub(crate) fn gemm_tn<T: Scalar>(a: &[T], c: &[T], out: &mut [T], m: usize, n: usize, p: usize) {
    for i in 0..m {
        let crow = &c[i * p..(i + 1) * p];
        for j in 0..n {
            let aij = a[i * n + j];
            if aij == T::zero() {
                continue;
            }
            let orow = &mut out[j * p..(j + 1) * p];
            for (o, &cv) in orow.iter_mut().zip(crow) {
                *o += aij * cv;
            }
        }
    }
}

/// Shape bookkeeping for `[..., m, n] × [n, p]` (shared right operand) and
/// `[..., m, n] × [..., n, p]` (equal leading batch dimensions).
#[derive(Debug, Clone)]
pub(crate) struct MatmulPlan {
    pub batch: usize,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub rhs_batched: bool,
    pub out_shape: Vec<usize>,
}

impl MatmulPlan {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        let mismatch = || TensorError::Shape {
            op: "matmul",
            lhs: a.to_vec(),
            rhs: b.to_vec(),
        };
        if a.len() < 2 || b.len() < 2 {
            return Err(mismatch());
        }
        let (m, n) = (a[a.len() - 2], a[a.len() - 1]);
        let (bn, p) = (b[b.len() - 2], b[b.len() - 1]);
        if n != bn {
            return Err(mismatch());
        }
        let lead = &a[..a.len() - 2];
        let rhs_batched = b.len() > 2;
        if rhs_batched && &b[..b.len() - 2] != lead {
            return Err(mismatch());
        }
        let mut out_shape = lead.to_vec();
        out_shape.extend([m, p]);
        Ok(Self {
            batch: lead.iter().product(),
            m,
            n,
            p,
            rhs_batched,
            out_shape,
        })
    }

    pub fn out_numel(&self) -> usize {
        self.batch * self.m * self.p
    }

    fn rhs_block(&self, bi: usize) -> std::ops::Range<usize> {
        if self.rhs_batched {
            bi * self.n * self.p..(bi + 1) * self.n * self.p
        } else {
            0..self.n * self.p
        }
    }

    pub fn forward<T: Scalar>(&self, a: &[T], b: &[T], out: &mut [T]) {
        let (m, n, p) = (self.m, self.n, self.p);
        for bi in 0..self.batch {
            gemm_nn(
                &a[bi * m * n..(bi + 1) * m * n],
                &b[self.rhs_block(bi)],
                &mut out[bi * m * p..(bi + 1) * m * p],
                m,
                n,
                p,
            );
        }
    }

    /// Accumulates `dA += dC·Bᵀ` and `dB += Aᵀ·dC`.
    pub fn backward<T: Scalar>(
        &self,
        a: &[T],
        b: &[T],
        dc: &[T],
        da: Option<&mut [T]>,
        db: Option<&mut [T]>,
    ) {
        let (m, n, p) = (self.m, self.n, self.p);
        if let Some(da) = da {
            for bi in 0..self.batch {
                gemm_nt(
                    &dc[bi * m * p..(bi + 1) * m * p],
                    &b[self.rhs_block(bi)],
                    &mut da[bi * m * n..(bi + 1) * m * n],
                    m,
                    n,
                    p,
                );
            }
        }
        if let Some(db) = db {
            for bi in 0..self.batch {
                let range = self.rhs_block(bi);
                gemm_tn(
                    &a[bi * m * n..(bi + 1) * m * n],
                    &dc[bi * m * p..(bi + 1) * m * p],
                    &mut db[range],
                    m,
                    n,
                    p,
                );
            }
        }
    }
}
