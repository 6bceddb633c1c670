use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point element type of the engine: `f64` for verification,
/// `f32` for training and inference.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Dtype tag used in checkpoints.
    const DTYPE: u8;

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn to_le_bytes_vec(values: &[Self], out: &mut Vec<u8>);

    fn from_le_bytes_slice(bytes: &[u8]) -> Vec<Self>;

    /// `C = alpha * A * B + beta * C` with arbitrary row/column strides.
    ///
    /// # Safety
    /// The pointers and strides must describe matrices of the given sizes
    /// inside live allocations, and `c` must not alias `a` or `b`.
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
}

impl Real for f32 {
    const DTYPE: u8 = 0;

    fn to_le_bytes_vec(values: &[Self], out: &mut Vec<u8>) {
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn from_le_bytes_slice(bytes: &[u8]) -> Vec<Self> {
        bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect()
    }

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
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Real for f64 {
    const DTYPE: u8 = 1;

    fn to_le_bytes_vec(values: &[Self], out: &mut Vec<u8>) {
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn from_le_bytes_slice(bytes: &[u8]) -> Vec<Self> {
        bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect()
    }

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
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// Layout of a matrix operand stored in a flat slice.
#[derive(Debug, Clone, Copy)]
pub enum Layout {
    /// Stored as given, row-major.
    Normal,
    /// The stored row-major matrix is the transpose of the operand.
    Transposed,
}

/// `c (m x n) = a (m x k) * b (k x n) + beta * c`, all row-major in storage.
///
/// Large products are split across rayon workers by rows of `c`; every
/// element still accumulates over `k` in the same order, so results do not
/// depend on the number of threads.
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    la: Layout,
    b: &[T],
    lb: Layout,
    beta: T,
    c: &mut [T],
) {
    assert!(a.len() >= m * k, "gemm: lhs too small");
    assert!(b.len() >= k * n, "gemm: rhs too small");
    assert!(c.len() >= m * n, "gemm: output too small");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = match la {
        Layout::Normal => (k as isize, 1),
        Layout::Transposed => (1, m as isize),
    };
    let (rsb, csb) = match lb {
        Layout::Normal => (n as isize, 1),
        Layout::Transposed => (1, k as isize),
    };

    let work = m * n * k;
    let threads = rayon::current_num_threads();
    if threads <= 1 || work < 1 << 22 || m < 2 * threads {
        // SAFETY: bounds asserted above; `c` is a unique borrow.
        unsafe {
            T::gemm_raw(
                m, k, n, T::one(), a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta,
                c.as_mut_ptr(), n as isize, 1,
            );
        }
        return;
    }

    use rayon::prelude::*;
    let rows_per = m.div_ceil(threads);
    c[..m * n]
        .par_chunks_mut(rows_per * n)
        .enumerate()
        .for_each(|(i, chunk)| {
            let r0 = i * rows_per;
            let rows = chunk.len() / n;
            // SAFETY: rows r0..r0+rows of `a` are in bounds; each chunk of
            // `c` is disjoint.
            unsafe {
                T::gemm_raw(
                    rows,
                    k,
                    n,
                    T::one(),
                    a.as_ptr().offset(r0 as isize * rsa),
                    rsa,
                    csa,
                    b.as_ptr(),
                    rsb,
                    csb,
                    beta,
                    chunk.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        });
}
