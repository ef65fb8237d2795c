//! Minimal row-major matrix used by the network, plus the scalar abstraction
//! that lets the training path run in f32 while the finite-difference tests
//! drive the identical code in f64.

use crate::blob::DType;

/// Floating-point element type for network math.
pub trait Scalar:
    num_traits::Float + Send + Sync + Default + std::fmt::Debug + std::iter::Sum + 'static
{
    const DTYPE: DType;
    fn from_f64(x: f64) -> Self;
    fn into_f64(self) -> f64;
}

impl Scalar for f32 {
    const DTYPE: DType = DType::F32;
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn into_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const DTYPE: DType = DType::F64;
    fn from_f64(x: f64) -> Self {
        x
    }
    fn into_f64(self) -> f64 {
        self
    }
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Mat<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![F::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }
}

/// Dot product with a fixed 8-lane accumulation order: deterministic and
/// wide enough for the autovectorizer.
#[inline]
pub(crate) fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [F::zero(); 8];
    let mut ita = a.chunks_exact(8);
    let mut itb = b.chunks_exact(8);
    for (ca, cb) in (&mut ita).zip(&mut itb) {
        for k in 0..8 {
            acc[k] = acc[k] + ca[k] * cb[k];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[2] + acc[6])) + ((acc[1] + acc[5]) + (acc[3] + acc[7]));
    for (&x, &y) in ita.remainder().iter().zip(itb.remainder()) {
        s = s + x * y;
    }
    s
}

/// out += a * xs, elementwise.
#[inline]
pub(crate) fn axpy<F: Scalar>(out: &mut [F], a: F, xs: &[F]) {
    debug_assert_eq!(out.len(), xs.len());
    for (o, &x) in out.iter_mut().zip(xs) {
        *o = *o + a * x;
    }
}
