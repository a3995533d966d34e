//! Scalar abstraction (f32 for training, f64 for the gradient-check
//! suite) and the small dense-matrix type the network is built on.

use num_traits::Float;

pub trait Scalar:
    Float + num_traits::NumAssign + Copy + Send + Sync + std::fmt::Debug + 'static
{
    const DTYPE: &'static str;
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Row-major dense matrix; `rows` is the output width for weight
/// matrices (y = W x + b with W of shape out x in).
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// y = W x + b
    pub fn matvec_bias(&self, x: &[T], b: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(b.len(), self.rows);
        let mut y = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let mut acc = b[r];
            for (w, xv) in self.row(r).iter().zip(x) {
                acc += *w * *xv;
            }
            y.push(acc);
        }
        y
    }

    /// y += W^T g (gradient w.r.t. the input of y = W x).
    pub fn add_transposed_matvec(&self, g: &[T], y: &mut [T]) {
        debug_assert_eq!(g.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for r in 0..self.rows {
            let gr = g[r];
            if gr == T::zero() {
                continue;
            }
            for (w, yv) in self.row(r).iter().zip(y.iter_mut()) {
                *yv += *w * gr;
            }
        }
    }

    /// W += outer(g, x) (weight gradient of y = W x).
    pub fn add_outer(&mut self, g: &[T], x: &[T]) {
        debug_assert_eq!(g.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for r in 0..self.rows {
            let gr = g[r];
            if gr == T::zero() {
                continue;
            }
            for (w, xv) in self.row_mut(r).iter_mut().zip(x) {
                *w += gr * *xv;
            }
        }
    }
}

#[inline]
pub fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

#[inline]
pub fn relu_grad<T: Scalar>(pre: T) -> T {
    if pre > T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Numerically stable 2-way softmax.
pub fn softmax2<T: Scalar>(logits: &[T; 2]) -> [T; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let z = e0 + e1;
    [e0 / z, e1 / z]
}

pub fn add_assign<T: Scalar>(dst: &mut [T], src: &[T]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d += *s;
    }
}

pub fn first_non_finite<T: Scalar>(values: &[T]) -> Option<usize> {
    values.iter().position(|v| !v.is_finite())
}
