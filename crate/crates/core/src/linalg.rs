//! Small dense matrix helpers: row-major storage, Gaussian elimination,
//! thin QR, and a cyclic Jacobi eigensolver for symmetric matrices.
//!
//! Problem sizes here are tiny (tens of rows, single-digit factor counts),
//! so clarity and determinism win over BLAS-grade performance. All loops
//! run in a fixed order; no threading, no fused operations.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat<R> {
    pub rows: usize,
    pub cols: usize,
    /// Row-major: entry (i, j) lives at `data[i * cols + j]`.
    pub data: Vec<R>,
}

impl<R: Scalar> Mat<R> {
    pub fn zeros(rows: usize, cols: usize) -> Mat<R> {
        Mat {
            rows,
            cols,
            data: vec![R::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Mat<R> {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            *m.at_mut(i, i) = R::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<R>]) -> Mat<R> {
        let n = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == c), "ragged rows");
        Mat {
            rows: n,
            cols: c,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> R {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut R {
        &mut self.data[i * self.cols + j]
    }

    pub fn col(&self, j: usize) -> Vec<R> {
        (0..self.rows).map(|i| self.at(i, j)).collect()
    }

    pub fn transpose(&self) -> Mat<R> {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *t.at_mut(j, i) = self.at(i, j);
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat<R>) -> Mat<R> {
        assert_eq!(self.cols, other.rows, "shape mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == R::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    *out.at_mut(i, j) = out.at(i, j) + a * other.at(k, j);
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[R]) -> Vec<R> {
        assert_eq!(self.cols, v.len(), "shape mismatch");
        (0..self.rows)
            .map(|i| {
                let mut s = R::zero();
                for j in 0..self.cols {
                    s = s + self.at(i, j) * v[j];
                }
                s
            })
            .collect()
    }

    pub fn scaled(&self, k: R) -> Mat<R> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * k).collect(),
        }
    }

    pub fn add(&self, other: &Mat<R>) -> Mat<R> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Mat<R>) -> R {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(R::zero(), |m, x| if x > m { x } else { m })
    }

    pub fn frobenius(&self) -> R {
        self.data
            .iter()
            .map(|&x| x * x)
            .fold(R::zero(), |s, x| s + x)
            .sqrt()
    }

    fn max_abs(&self) -> R {
        self.data
            .iter()
            .map(|x| x.abs())
            .fold(R::zero(), |m, x| if x > m { x } else { m })
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when the matrix is singular to working precision.
pub fn solve<R: Scalar>(a: &Mat<R>, b: &[R]) -> Option<Vec<R>> {
    assert_eq!(a.rows, a.cols, "square system required");
    assert_eq!(a.rows, b.len(), "shape mismatch");
    let n = a.rows;
    if n == 0 {
        return Some(vec![]);
    }
    let scale = a.max_abs();
    if scale == R::zero() {
        return None;
    }
    let tiny = scale * R::epsilon() * R::from_usize_lossy(n);

    let mut m = a.clone();
    let mut rhs = b.to_vec();
    for k in 0..n {
        let mut p = k;
        let mut best = m.at(k, k).abs();
        for i in k + 1..n {
            let v = m.at(i, k).abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best <= tiny {
            return None;
        }
        if p != k {
            for j in 0..n {
                let tmp = m.at(k, j);
                *m.at_mut(k, j) = m.at(p, j);
                *m.at_mut(p, j) = tmp;
            }
            rhs.swap(k, p);
        }
        for i in k + 1..n {
            let f = m.at(i, k) / m.at(k, k);
            if f == R::zero() {
                continue;
            }
            *m.at_mut(i, k) = R::zero();
            for j in k + 1..n {
                *m.at_mut(i, j) = m.at(i, j) - f * m.at(k, j);
            }
            rhs[i] = rhs[i] - f * rhs[k];
        }
    }
    let mut x = vec![R::zero(); n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in k + 1..n {
            s = s - m.at(k, j) * x[j];
        }
        x[k] = s / m.at(k, k);
    }
    Some(x)
}

/// Matrix inverse via Gauss-Jordan; `None` when singular.
pub fn inverse<R: Scalar>(a: &Mat<R>) -> Option<Mat<R>> {
    assert_eq!(a.rows, a.cols, "square matrix required");
    let n = a.rows;
    if n == 0 {
        return Some(Mat::zeros(0, 0));
    }
    let scale = a.max_abs();
    if scale == R::zero() {
        return None;
    }
    let tiny = scale * R::epsilon() * R::from_usize_lossy(n);

    let mut m = a.clone();
    let mut inv = Mat::identity(n);
    for k in 0..n {
        let mut p = k;
        let mut best = m.at(k, k).abs();
        for i in k + 1..n {
            let v = m.at(i, k).abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best <= tiny {
            return None;
        }
        if p != k {
            for j in 0..n {
                let tmp = m.at(k, j);
                *m.at_mut(k, j) = m.at(p, j);
                *m.at_mut(p, j) = tmp;
                let tmp = inv.at(k, j);
                *inv.at_mut(k, j) = inv.at(p, j);
                *inv.at_mut(p, j) = tmp;
            }
        }
        let d = m.at(k, k);
        for j in 0..n {
            *m.at_mut(k, j) = m.at(k, j) / d;
            *inv.at_mut(k, j) = inv.at(k, j) / d;
        }
        for i in 0..n {
            if i == k {
                continue;
            }
            let f = m.at(i, k);
            if f == R::zero() {
                continue;
            }
            for j in 0..n {
                *m.at_mut(i, j) = m.at(i, j) - f * m.at(k, j);
                *inv.at_mut(i, j) = inv.at(i, j) - f * inv.at(k, j);
            }
        }
    }
    Some(inv)
}

/// Thin QR by modified Gram-Schmidt with reorthogonalization (two passes),
/// for `rows >= cols`. Returns `None` on rank deficiency.
pub fn thin_qr<R: Scalar>(a: &Mat<R>) -> Option<(Mat<R>, Mat<R>)> {
    let (n, k) = (a.rows, a.cols);
    assert!(n >= k, "thin QR needs rows >= cols");
    let scale = a.max_abs();
    let tiny = if scale == R::zero() {
        R::epsilon()
    } else {
        scale * R::epsilon() * R::from_usize_lossy(n.max(1))
    };

    let mut q = a.clone();
    let mut r = Mat::zeros(k, k);
    for j in 0..k {
        // Two orthogonalization passes keep Q'Q near identity even for
        // ill-conditioned inputs.
        for _ in 0..2 {
            for i in 0..j {
                let mut dot = R::zero();
                for t in 0..n {
                    dot = dot + q.at(t, i) * q.at(t, j);
                }
                *r.at_mut(i, j) = r.at(i, j) + dot;
                for t in 0..n {
                    *q.at_mut(t, j) = q.at(t, j) - dot * q.at(t, i);
                }
            }
        }
        let mut norm = R::zero();
        for t in 0..n {
            norm = norm + q.at(t, j) * q.at(t, j);
        }
        let norm = norm.sqrt();
        if norm <= tiny {
            return None;
        }
        *r.at_mut(j, j) = norm;
        for t in 0..n {
            *q.at_mut(t, j) = q.at(t, j) / norm;
        }
    }
    Some((q, r))
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with matching eigenvector
/// columns. The input is symmetrized defensively (averaging with its
/// transpose) to absorb round-off asymmetry.
pub fn sym_eigen<R: Scalar>(a: &Mat<R>) -> (Vec<R>, Mat<R>) {
    assert_eq!(a.rows, a.cols, "square matrix required");
    let n = a.rows;
    if n == 0 {
        return (vec![], Mat::zeros(0, 0));
    }
    let half = R::from_f64_lossy(0.5);
    let mut m = a.clone();
    for i in 0..n {
        for j in 0..n {
            let s = (a.at(i, j) + a.at(j, i)) * half;
            *m.at_mut(i, j) = s;
        }
    }
    let mut v = Mat::identity(n);
    let scale = m.max_abs().max(R::one());
    let stop = scale * R::epsilon();

    for _sweep in 0..64 {
        let mut off = R::zero();
        for p in 0..n {
            for q in p + 1..n {
                let x = m.at(p, q).abs();
                if x > off {
                    off = x;
                }
            }
        }
        if off <= stop {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.at(p, q);
                if apq.abs() <= stop * R::epsilon() {
                    continue;
                }
                let theta = (m.at(q, q) - m.at(p, p)) / (apq * (R::one() + R::one()));
                let t = {
                    let s = if theta >= R::zero() { R::one() } else { -R::one() };
                    s / (theta.abs() + (theta * theta + R::one()).sqrt())
                };
                let c = R::one() / (t * t + R::one()).sqrt();
                let s = t * c;

                for j in 0..n {
                    let mpj = m.at(p, j);
                    let mqj = m.at(q, j);
                    *m.at_mut(p, j) = c * mpj - s * mqj;
                    *m.at_mut(q, j) = s * mpj + c * mqj;
                }
                for i in 0..n {
                    let mip = m.at(i, p);
                    let miq = m.at(i, q);
                    *m.at_mut(i, p) = c * mip - s * miq;
                    *m.at_mut(i, q) = s * mip + c * miq;
                    let vip = v.at(i, p);
                    let viq = v.at(i, q);
                    *v.at_mut(i, p) = c * vip - s * viq;
                    *v.at_mut(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m.at(j, j)
            .partial_cmp(&m.at(i, i))
            .expect("finite eigenvalues")
            .then(i.cmp(&j))
    });
    let values: Vec<R> = order.iter().map(|&i| m.at(i, i)).collect();
    let mut vectors = Mat::zeros(n, n);
    for (jnew, &jold) in order.iter().enumerate() {
        for i in 0..n {
            *vectors.at_mut(i, jnew) = v.at(i, jold);
        }
    }
    (values, vectors)
}

/// Principal angles (radians, ascending) between the column spans of `a`
/// and `b`. Both are orthonormalized first; angles come from the singular
/// values of the cross-Gram matrix.
pub fn principal_angles<R: Scalar>(a: &Mat<R>, b: &Mat<R>) -> Option<Vec<R>> {
    assert_eq!(a.rows, b.rows, "ambient dimensions differ");
    let (qa, _) = thin_qr(a)?;
    let (qb, _) = thin_qr(b)?;
    let m = qa.transpose().matmul(&qb);
    let gram = m.transpose().matmul(&m);
    let (vals, _) = sym_eigen(&gram);
    let k = a.cols.min(b.cols);
    let mut angles: Vec<R> = vals
        .iter()
        .take(k)
        .map(|&l| {
            let sigma = l.max(R::zero()).sqrt().min(R::one());
            sigma.acos()
        })
        .collect();
    angles.sort_by(|x, y| x.partial_cmp(y).expect("finite angles"));
    Some(angles)
}
