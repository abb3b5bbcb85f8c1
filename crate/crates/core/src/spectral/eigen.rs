//! Dense symmetric eigensolver: Householder reduction to tridiagonal form
//! followed by the implicit QL algorithm with Wilkinson-style shifts.
//!
//! The reduction updates the full active block rather than one triangle so
//! that every inner loop walks a contiguous row; this matters for the
//! 1024 x 1024 Gram matrices of large layers.

use nalgebra::DMatrix;

/// QL sweeps allowed per eigenvalue before giving up.
const MAX_SWEEPS: usize = 60;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EigenError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("QL iteration did not converge for eigenvalue {index} after {MAX_SWEEPS} sweeps")]
    NoConvergence { index: usize },
}

/// Eigenpairs sorted by descending eigenvalue; column `i` of `vectors`
/// belongs to `values[i]`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenDecomposition {
    /// `V diag(values) Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |i, j| {
            self.vectors[(i, j)] * self.values[j]
        });
        scaled * self.vectors.transpose()
    }
}

/// Eigenvalues of the symmetric matrix `m`, sorted descending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>, EigenError> {
    let n = check_square(m)?;
    let mut a = row_major(m);
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut a, &mut d, &mut e, false);
    ql_implicit(n, &mut d, &mut e, None)?;
    d.sort_unstable_by(|x, y| y.total_cmp(x));
    Ok(d)
}

/// Full eigendecomposition of the symmetric matrix `m`, sorted descending.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<EigenDecomposition, EigenError> {
    let n = check_square(m)?;
    let mut z = row_major(m);
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut z, &mut d, &mut e, true);
    ql_implicit(n, &mut d, &mut e, Some(&mut z))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |row, col| z[row * n + order[col]]);
    Ok(EigenDecomposition { values, vectors })
}

fn check_square(m: &DMatrix<f64>) -> Result<usize, EigenError> {
    if m.nrows() != m.ncols() {
        return Err(EigenError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Reduce the row-major symmetric `a` to tridiagonal form: diagonal in `d`,
/// subdiagonal in `e[1..]` (`e[0] = 0`). With `vectors`, `a` is replaced by
/// the accumulated orthogonal transform.
fn tridiagonalize(n: usize, a: &mut [f64], d: &mut [f64], e: &mut [f64], vectors: bool) {
    if n == 0 {
        return;
    }
    let mut hs = vec![0.0; n];
    let mut p = vec![0.0; n];
    for i in (1..n).rev() {
        let l = i - 1;
        let row_i = i * n;
        let scale: f64 = a[row_i..=row_i + l].iter().map(|x| x.abs()).sum();
        if l == 0 || scale == 0.0 {
            e[i] = a[row_i + l];
            continue;
        }

        let mut h = 0.0;
        for k in 0..=l {
            a[row_i + k] /= scale;
            h += a[row_i + k] * a[row_i + k];
        }
        let f = a[row_i + l];
        let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
        e[i] = scale * g;
        h -= f * g;
        a[row_i + l] = f - g;

        // row i now holds the Householder vector u
        let (head, tail) = a.split_at_mut(row_i);
        let u = &tail[..=l];
        let mut fsum = 0.0;
        for j in 0..=l {
            if vectors {
                head[j * n + i] = u[j] / h;
            }
            let row = &head[j * n..j * n + l + 1];
            let dot: f64 = row.iter().zip(u).map(|(x, y)| x * y).sum();
            p[j] = dot / h;
            fsum += p[j] * u[j];
        }
        let hh = fsum / (h + h);
        for j in 0..=l {
            p[j] -= hh * u[j];
        }
        for j in 0..=l {
            let (uj, pj) = (u[j], p[j]);
            let row = &mut head[j * n..j * n + l + 1];
            for ((x, &uk), &pk) in row.iter_mut().zip(u).zip(&p[..=l]) {
                *x -= uj * pk + pj * uk;
            }
        }
        hs[i] = h;
    }

    e[0] = 0.0;
    for i in 0..n {
        if vectors {
            if hs[i] != 0.0 {
                for j in 0..i {
                    let g: f64 = (0..i).map(|k| a[i * n + k] * a[k * n + j]).sum();
                    for k in 0..i {
                        a[k * n + j] -= g * a[k * n + i];
                    }
                }
            }
            d[i] = a[i * n + i];
            a[i * n + i] = 1.0;
            for j in 0..i {
                a[j * n + i] = 0.0;
                a[i * n + j] = 0.0;
            }
        } else {
            d[i] = a[i * n + i];
        }
    }
}

/// Implicit QL on the tridiagonal (`d`, `e`) produced by [`tridiagonalize`].
/// Eigenvalues overwrite `d`; `z` (row-major) receives the eigenvectors.
fn ql_implicit(n: usize, d: &mut [f64], e: &mut [f64], mut z: Option<&mut Vec<f64>>) -> Result<(), EigenError> {
    if n < 2 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(EigenError::NoConvergence { index: l });
            }

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..n {
                        let row = k * n;
                        let t = z[row + i + 1];
                        z[row + i + 1] = s * z[row + i] + c * t;
                        z[row + i] = c * z[row + i] - s * t;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn diagonal() {
        let v = symmetric_eigenvalues(&dmatrix![1.0, 0.0; 0.0, 4.0]).unwrap();
        assert_eq!(v, vec![4.0, 1.0]);
    }

    #[test]
    fn two_by_two() {
        let v = symmetric_eigenvalues(&dmatrix![5.0, 4.0; 4.0, 5.0]).unwrap();
        assert!((v[0] - 9.0).abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12, "{v:?}");
    }

    #[test]
    fn trivial_sizes() {
        assert!(symmetric_eigenvalues(&DMatrix::zeros(0, 0)).unwrap().is_empty());
        assert_eq!(symmetric_eigenvalues(&dmatrix![3.5]).unwrap(), vec![3.5]);
        assert_eq!(symmetric_eigenvalues(&DMatrix::zeros(4, 4)).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn not_square() {
        assert!(matches!(
            symmetric_eigenvalues(&DMatrix::zeros(2, 3)),
            Err(EigenError::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn vectors_reconstruct_and_are_orthonormal() {
        let m = DMatrix::from_fn(9, 9, |i, j| {
            1.0 / (1.0 + i as f64 + j as f64) + if i == j { 2.0 } else { 0.0 }
        });
        let dec = symmetric_eigen(&m).unwrap();
        let err = (dec.reconstruct() - &m).norm();
        assert!(err <= 1e-12 * m.norm(), "{err}");
        let gram = dec.vectors.transpose() * &dec.vectors;
        assert!((gram - DMatrix::identity(9, 9)).norm() < 1e-12);
        let values = symmetric_eigenvalues(&m).unwrap();
        for (a, b) in values.iter().zip(&dec.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_eigenvalues() {
        // J - I has eigenvalues n-1 (once) and -1 (n-1 times)
        let n = 6;
        let m = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 });
        let v = symmetric_eigenvalues(&m).unwrap();
        assert!((v[0] - 5.0).abs() < 1e-12);
        assert!(v[1..].iter().all(|x| (x + 1.0).abs() < 1e-12), "{v:?}");
    }
}
