//! Dense linear algebra used by the model fitters: Cholesky solves for
//! kernel ridge and Newton steps, and a symmetric eigendecomposition that
//! backs the minimum-norm least-squares solver.
//!
//! Kept in-crate (rather than pulling in a matrix library) so every
//! routine is generic over the crate's scalar type and the exact
//! numerical behavior is pinned by the tests below.

use crate::float::Float;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("eigensolver failed to converge at index {index}")]
    EigenNonConvergence { index: usize },
}

/// In-place lower Cholesky factorization of a symmetric positive-definite
/// matrix. On success the lower triangle of `a` holds L with A = L·Lᵀ;
/// the strict upper triangle is left untouched.
pub fn cholesky_in_place<F: Float>(a: &mut Matrix<F>) -> Result<(), LinalgError> {
    let n = a.rows();
    debug_assert_eq!(n, a.cols());
    for j in 0..n {
        let mut diag = a.get(j, j);
        for k in 0..j {
            let l = a.get(j, k);
            diag -= l * l;
        }
        if diag <= F::zero() || !diag.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { pivot: j });
        }
        let diag = diag.sqrt();
        a.set(j, j, diag);
        for i in (j + 1)..n {
            let mut v = a.get(i, j);
            for k in 0..j {
                v -= a.get(i, k) * a.get(j, k);
            }
            a.set(i, j, v / diag);
        }
    }
    Ok(())
}

/// Solves L·Lᵀ·x = b given the factor from [`cholesky_in_place`].
pub fn cholesky_solve<F: Float>(chol: &Matrix<F>, b: &[F]) -> Vec<F> {
    let n = chol.rows();
    debug_assert_eq!(b.len(), n);
    let mut x = b.to_vec();
    for i in 0..n {
        let mut v = x[i];
        for k in 0..i {
            v -= chol.get(i, k) * x[k];
        }
        x[i] = v / chol.get(i, i);
    }
    for i in (0..n).rev() {
        let mut v = x[i];
        for k in (i + 1)..n {
            v -= chol.get(k, i) * x[k];
        }
        x[i] = v / chol.get(i, i);
    }
    x
}

/// Solves A·x = b for symmetric positive-definite A.
pub fn solve_spd<F: Float>(a: &Matrix<F>, b: &[F]) -> Result<Vec<F>, LinalgError> {
    let mut chol = a.clone();
    cholesky_in_place(&mut chol)?;
    Ok(cholesky_solve(&chol, b))
}

/// Symmetric eigendecomposition A = V·diag(d)·Vᵀ.
///
/// Householder tridiagonalization followed by implicit-shift QL, the
/// classic EISPACK tred2/tql2 pair. Eigenvalues are returned in ascending
/// order; column j of the returned matrix is the eigenvector for `d[j]`.
pub fn sym_eigen<F: Float>(a: &Matrix<F>) -> Result<(Vec<F>, Matrix<F>), LinalgError> {
    let n = a.rows();
    debug_assert_eq!(n, a.cols());
    if n == 0 {
        return Ok((Vec::new(), Matrix::zeros(0, 0)));
    }
    let mut v = a.clone();
    let mut d = vec![F::zero(); n];
    let mut e = vec![F::zero(); n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;
    Ok((d, v))
}

fn tred2<F: Float>(v: &mut Matrix<F>, d: &mut [F], e: &mut [F]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v.get(n - 1, j);
    }
    for i in (1..n).rev() {
        let mut scale = F::zero();
        let mut h = F::zero();
        for item in d.iter().take(i) {
            scale += item.abs();
        }
        if scale == F::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v.get(i - 1, j);
                v.set(i, j, F::zero());
                v.set(j, i, F::zero());
            }
        } else {
            for item in d.iter_mut().take(i) {
                *item /= scale;
                h += *item * *item;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > F::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = F::zero();
            }
            for j in 0..i {
                let f = d[j];
                v.set(j, i, f);
                let mut g = e[j] + v.get(j, j) * f;
                for k in (j + 1)..i {
                    g += v.get(k, j) * d[k];
                    e[k] += v.get(k, j) * f;
                }
                e[j] = g;
            }
            let mut f = F::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    let val = v.get(k, j) - (f * e[k] + g * d[k]);
                    v.set(k, j, val);
                }
                d[j] = v.get(i - 1, j);
                v.set(i, j, F::zero());
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        let tmp = v.get(i, i);
        v.set(n - 1, i, tmp);
        v.set(i, i, F::one());
        let h = d[i + 1];
        if h != F::zero() {
            for k in 0..=i {
                d[k] = v.get(k, i + 1) / h;
            }
            for j in 0..=i {
                let mut g = F::zero();
                for k in 0..=i {
                    g += v.get(k, i + 1) * v.get(k, j);
                }
                for k in 0..=i {
                    let val = v.get(k, j) - g * d[k];
                    v.set(k, j, val);
                }
            }
        }
        for k in 0..=i {
            v.set(k, i + 1, F::zero());
        }
    }
    for j in 0..n {
        d[j] = v.get(n - 1, j);
        v.set(n - 1, j, F::zero());
    }
    v.set(n - 1, n - 1, F::one());
    e[0] = F::zero();
}

fn tql2<F: Float>(v: &mut Matrix<F>, d: &mut [F], e: &mut [F]) -> Result<(), LinalgError> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = F::zero();

    let mut f = F::zero();
    let mut tst1 = F::zero();
    let eps = F::epsilon();
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
                if iter > 60 {
                    return Err(LinalgError::EigenNonConvergence { index: l });
                }
                let g = d[l];
                let two = F::cast(2.0);
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(F::one());
                if p < F::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                p = d[m];
                let mut c = F::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = F::zero();
                let mut s2 = F::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v.get(k, i + 1);
                        v.set(k, i + 1, s * v.get(k, i) + c * h);
                        v.set(k, i, c * v.get(k, i) - s * h);
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
        e[l] = F::zero();
    }

    // Sort ascending, carrying eigenvectors along.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for j in (i + 1)..n {
            if d[j] < p {
                k = j;
                p = d[j];
            }
        }
        if k != i {
            d.swap(k, i);
            for row in 0..n {
                let tmp = v.get(row, i);
                v.set(row, i, v.get(row, k));
                v.set(row, k, tmp);
            }
        }
    }
    Ok(())
}

/// Minimum-norm least-squares solution of A·X ≈ B.
///
/// Singular values below `rel_cutoff` times the largest are treated as
/// zero, which is what makes rank-deficient and underdetermined systems
/// return the minimum-norm solution rather than noise. The decomposition
/// goes through the Gram matrix on the smaller side, so only a
/// min(rows, cols)² eigenproblem is ever solved.
pub fn minnorm_solve<F: Float>(
    a: &Matrix<F>,
    b: &Matrix<F>,
    rel_cutoff: F,
) -> Result<Matrix<F>, LinalgError> {
    let n = a.rows();
    let d = a.cols();
    let k = b.cols();
    debug_assert_eq!(b.rows(), n);
    let mut out = Matrix::zeros(d, k);
    if n == 0 || d == 0 {
        return Ok(out);
    }

    if d <= n {
        // G = AᵀA = V Σ² Vᵀ; pinv(A) = V Σ⁻² Vᵀ Aᵀ.
        let mut g = Matrix::zeros(d, d);
        for i in 0..n {
            let row = a.row(i);
            for p in 0..d {
                let rp = row[p];
                if rp == F::zero() {
                    continue;
                }
                for q in p..d {
                    let val = g.get(p, q) + rp * row[q];
                    g.set(p, q, val);
                }
            }
        }
        for p in 0..d {
            for q in 0..p {
                g.set(p, q, g.get(q, p));
            }
        }
        let (w, v) = sym_eigen(&g)?;
        let w_max = w.iter().fold(F::zero(), |acc, &x| acc.max(x));
        let thresh = w_max * rel_cutoff * rel_cutoff;
        // c = Aᵀ b, one column at a time
        for col in 0..k {
            let mut c = vec![F::zero(); d];
            for i in 0..n {
                let bi = b.get(i, col);
                if bi == F::zero() {
                    continue;
                }
                let row = a.row(i);
                for (cp, &rp) in c.iter_mut().zip(row) {
                    *cp += rp * bi;
                }
            }
            for (j, &wj) in w.iter().enumerate() {
                if wj <= thresh || wj <= F::zero() {
                    continue;
                }
                let mut proj = F::zero();
                for p in 0..d {
                    proj += v.get(p, j) * c[p];
                }
                let coef = proj / wj;
                for p in 0..d {
                    let val = out.get(p, col) + coef * v.get(p, j);
                    out.set(p, col, val);
                }
            }
        }
    } else {
        // G = AAᵀ = U Σ² Uᵀ; pinv(A) = Aᵀ U Σ⁻² Uᵀ.
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = F::zero();
                let (ri, rj) = (a.row(i), a.row(j));
                for p in 0..d {
                    s += ri[p] * rj[p];
                }
                g.set(i, j, s);
                g.set(j, i, s);
            }
        }
        let (w, u) = sym_eigen(&g)?;
        let w_max = w.iter().fold(F::zero(), |acc, &x| acc.max(x));
        let thresh = w_max * rel_cutoff * rel_cutoff;
        for col in 0..k {
            // t = U Σ⁻² Uᵀ b
            let mut t = vec![F::zero(); n];
            for (j, &wj) in w.iter().enumerate() {
                if wj <= thresh || wj <= F::zero() {
                    continue;
                }
                let mut proj = F::zero();
                for i in 0..n {
                    proj += u.get(i, j) * b.get(i, col);
                }
                let coef = proj / wj;
                for (i, tv) in t.iter_mut().enumerate() {
                    *tv += coef * u.get(i, j);
                }
            }
            // out = Aᵀ t
            for (i, &ti) in t.iter().enumerate() {
                if ti == F::zero() {
                    continue;
                }
                let row = a.row(i);
                for p in 0..d {
                    let val = out.get(p, col) + row[p] * ti;
                    out.set(p, col, val);
                }
            }
        }
    }
    Ok(out)
}
