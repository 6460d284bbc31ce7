//! Small dense kernels: symmetric eigendecomposition and Cholesky.
//!
//! The eigensolver is the classic two-phase method: Householder reduction to
//! tridiagonal form followed by the implicit QL iteration with Wilkinson
//! shifts. It is O(n^3) and handles n = 784 comfortably.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Eigenpairs of a symmetric matrix, sorted by eigenvalue, largest first.
/// `vectors` holds one unit eigenvector per column.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Array1<T>,
    pub vectors: Array2<T>,
}

pub fn symmetric_eigen<T: Scalar>(a: ArrayView2<'_, T>) -> Result<SymmetricEigen<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::LengthMismatch {
            what: "symmetric matrix columns",
            expected: n,
            got: a.ncols(),
        });
    }
    if n == 0 {
        return Ok(SymmetricEigen {
            values: Array1::zeros(0),
            vectors: Array2::zeros((0, 0)),
        });
    }
    let mut v = a.to_owned();
    let mut d = Array1::<T>::zeros(n);
    let mut e = Array1::<T>::zeros(n);
    tridiagonalize(&mut v, &mut d, &mut e);
    // QL rotates pairs of eigenvector columns; work on the transpose so the
    // rotations touch contiguous rows.
    let mut vt = v.t().as_standard_layout().into_owned();
    tridiagonal_ql(&mut vt, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = Array1::from_iter(order.iter().map(|&i| d[i]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&vt.row(src));
    }
    Ok(SymmetricEigen { values, vectors })
}

// Householder reduction; on exit `v` holds the accumulated orthogonal
// transform, `d` the diagonal and `e[1..]` the sub-diagonal.
fn tridiagonalize<T: Scalar>(v: &mut Array2<T>, d: &mut Array1<T>, e: &mut Array1<T>) {
    let n = v.nrows();
    let zero = T::zero();
    for j in 0..n {
        d[j] = v[[n - 1, j]];
    }
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[[i - 1, j]];
                v[[i, j]] = zero;
                v[[j, i]] = zero;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = zero;
            }
            for j in 0..i {
                f = d[j];
                v[[j, i]] = f;
                g = e[j] + v[[j, j]] * f;
                for k in (j + 1)..i {
                    g += v[[k, j]] * d[k];
                    e[k] += v[[k, j]] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[[k, j]] -= upd;
                }
                d[j] = v[[i - 1, j]];
                v[[i, j]] = zero;
            }
        }
        d[i] = h;
    }

    for i in 0..n.saturating_sub(1) {
        v[[n - 1, i]] = v[[i, i]];
        v[[i, i]] = T::one();
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[[k, i + 1]] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v[[k, i + 1]] * v[[k, j]];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[[k, j]] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[[k, i + 1]] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[[n - 1, j]];
        v[[n - 1, j]] = zero;
    }
    v[[n - 1, n - 1]] = T::one();
    e[0] = zero;
}

// `vt` holds the eigenvector basis transposed: row i is eigenvector i.
fn tridiagonal_ql<T: Scalar>(vt: &mut Array2<T>, d: &mut Array1<T>, e: &mut Array1<T>) -> Result<()> {
    let n = vt.nrows();
    let zero = T::zero();
    let one = T::one();
    let two = T::of(2.0);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;

    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 300 {
                    return Err(Error::InvalidParameter(
                        "symmetric eigensolver failed to converge".into(),
                    ));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for i in (l + 2)..n {
                    d[i] -= h;
                }
                f += h;

                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (mut lo, mut hi) = vt.multi_slice_mut((ndarray::s![i, ..], ndarray::s![i + 1, ..]));
                    for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                        let next = *b;
                        *b = s * *a + c * next;
                        *a = c * *a - s * next;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    Ok(())
}

/// Lower-triangular Cholesky factor `L` with `a = L Lᵀ`.
pub fn cholesky<T: Scalar>(a: ArrayView2<'_, T>) -> Result<Array2<T>> {
    let n = a.nrows();
    let mut l = Array2::<T>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= T::zero() || !sum.is_finite() {
                    return Err(Error::NotPositiveDefinite);
                }
                l[[i, i]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
pub fn spd_inverse<T: Scalar>(a: ArrayView2<'_, T>) -> Result<Array2<T>> {
    let n = a.nrows();
    let l = cholesky(a)?;
    let mut inv = Array2::<T>::zeros((n, n));
    let mut col = Array1::<T>::zeros(n);
    for c in 0..n {
        // forward solve L y = e_c
        for i in 0..n {
            let mut sum = if i == c { T::one() } else { T::zero() };
            for k in 0..i {
                sum -= l[[i, k]] * col[k];
            }
            col[i] = sum / l[[i, i]];
        }
        // back solve Lᵀ x = y
        for i in (0..n).rev() {
            let mut sum = col[i];
            for k in (i + 1)..n {
                sum -= l[[k, i]] * inv[[k, c]];
            }
            inv[[i, c]] = sum / l[[i, i]];
        }
    }
    // symmetrize away rounding noise
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = (inv[[i, j]] + inv[[j, i]]) / T::of(2.0);
            inv[[i, j]] = avg;
            inv[[j, i]] = avg;
        }
    }
    Ok(inv)
}

/// Sample covariance (divisor n − 1) of the rows of `x` around `mean`.
pub fn sample_covariance<T: Scalar>(x: ArrayView2<'_, T>, mean: ArrayView1<'_, T>) -> Array2<T> {
    let n = x.nrows();
    let centered = &x - &mean;
    let mut cov = centered.t().dot(&centered);
    let denom = T::of_usize(n.saturating_sub(1).max(1));
    cov.mapv_inplace(|v| v / denom);
    cov
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}
