//! Scalar abstraction so the same networks run in `f32` for training and in
//! `f64` for finite-difference gradient checks.

use core::fmt::Debug;
use core::iter::Sum;
use core::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point element type with a GEMM kernel.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Send + Sync + AddAssign + SubAssign + MulAssign + Sum + 'static
{
    /// `c ← alpha·a·b + beta·c` for an `m×k` by `k×n` product.
    ///
    /// # Safety
    /// Every strided index touched must lie inside the backing buffers.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("representable constant")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Real for f64 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// Strided view of a dense matrix held in a slice.
#[derive(Clone, Copy)]
pub struct MatRef<'a, T> {
    pub data: &'a [T],
    pub rows: usize,
    pub cols: usize,
    pub row_stride: usize,
    pub col_stride: usize,
}

impl<'a, T> MatRef<'a, T> {
    /// Row-major `rows×cols` view.
    pub fn new(data: &'a [T], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            row_stride: cols,
            col_stride: 1,
        }
    }

    /// Transposed view over the same storage.
    pub fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
        }
    }

    fn span(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            0
        } else {
            (self.rows - 1) * self.row_stride + (self.cols - 1) * self.col_stride + 1
        }
    }
}

/// `c ← alpha·a·b + beta·c`, with `c` row-major `a.rows × b.cols`.
pub fn gemm<T: Real>(alpha: T, a: MatRef<'_, T>, b: MatRef<'_, T>, beta: T, c: &mut [T]) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert!(a.span() <= a.data.len() && b.span() <= b.data.len());
    assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if m == 1 || n == 1 || k == 1 {
        skinny_gemm(alpha, a, b, beta, &mut c[..m * n]);
        return;
    }
    // SAFETY: spans checked above; c is row-major m×n.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.row_stride as isize,
            a.col_stride as isize,
            b.data.as_ptr(),
            b.row_stride as isize,
            b.col_stride as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        )
    }
}

/// Matrix-vector and outer-product shapes, which the blocked kernel handles
/// poorly. Written as contiguous dot/axpy loops so they vectorise.
fn skinny_gemm<T: Real>(alpha: T, a: MatRef<'_, T>, b: MatRef<'_, T>, beta: T, c: &mut [T]) {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if beta == T::zero() {
        c.fill(T::zero());
    } else if beta != T::one() {
        c.iter_mut().for_each(|v| *v *= beta);
    }
    let at = |i: usize, p: usize| a.data[i * a.row_stride + p * a.col_stride];
    let bt = |p: usize, j: usize| b.data[p * b.row_stride + j * b.col_stride];
    if k == 1 {
        // c[i][:] += alpha·a[i]·b[0][:]
        let row: alloc::vec::Vec<T> = (0..n).map(|j| alpha * bt(0, j)).collect();
        for i in 0..m {
            axpy(at(i, 0), &row, &mut c[i * n..(i + 1) * n]);
        }
    } else if n == 1 {
        if a.col_stride == 1 {
            let x: alloc::vec::Vec<T> = (0..k).map(|p| bt(p, 0)).collect();
            for (i, ci) in c.iter_mut().enumerate() {
                *ci += alpha * dot(&a.data[i * a.row_stride..][..k], &x);
            }
        } else if a.row_stride == 1 {
            for p in 0..k {
                let col = &a.data[p * a.col_stride..][..m];
                axpy(alpha * bt(p, 0), col, c);
            }
        } else {
            for (i, ci) in c.iter_mut().enumerate() {
                *ci += alpha * (0..k).map(|p| at(i, p) * bt(p, 0)).sum::<T>();
            }
        }
    } else {
        // m == 1
        if b.col_stride == 1 {
            for p in 0..k {
                axpy(alpha * at(0, p), &b.data[p * b.row_stride..][..n], c);
            }
        } else if b.row_stride == 1 {
            let x: alloc::vec::Vec<T> = (0..k).map(|p| at(0, p)).collect();
            for (j, cj) in c.iter_mut().enumerate() {
                *cj += alpha * dot(&b.data[j * b.col_stride..][..k], &x);
            }
        } else {
            for (j, cj) in c.iter_mut().enumerate() {
                *cj += alpha * (0..k).map(|p| at(0, p) * bt(p, j)).sum::<T>();
            }
        }
    }
}

#[inline]
fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

/// Dot product with eight independent accumulators.
#[inline]
fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let xc = x.chunks_exact(8);
    let yc = y.chunks_exact(8);
    let tail: T = xc.remainder().iter().zip(yc.remainder()).map(|(&a, &b)| a * b).sum();
    for (a, b) in xc.zip(yc) {
        for i in 0..8 {
            acc[i] += a[i] * b[i];
        }
    }
    acc.iter().copied().sum::<T>() + tail
}
