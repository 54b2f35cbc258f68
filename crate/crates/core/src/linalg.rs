//! Symmetric eigensolver: Householder reduction to tridiagonal form, then
//! implicit-shift QL on the tridiagonal. The values-only path skips all
//! transform bookkeeping and is the one the Monte Carlo loop drives; the
//! vectors path exists for diagnostics and for Golub-Welsch quadrature
//! rules.

use crate::matrix::SquareMatrix;
use crate::{Error, Result};

const MAX_QL_SWEEPS: usize = 50;

/// Eigenvalues in ascending order.
pub fn symmetric_eigenvalues(m: &SquareMatrix) -> Result<Vec<f64>> {
    let n = m.n();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (mut d, mut e, _) = householder(m.data().to_vec(), n, false);
    ql(&mut d, &mut e, None, n)?;
    d.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    Ok(d)
}

/// Eigenvalues in ascending order plus orthonormal eigenvectors in the
/// matching columns.
pub fn symmetric_eigen(m: &SquareMatrix) -> Result<(Vec<f64>, SquareMatrix)> {
    let n = m.n();
    let (mut d, mut e, q) = householder(m.data().to_vec(), n, true);
    let mut z = q.expect("vector accumulation requested");
    ql(&mut d, &mut e, Some(&mut z), n)?;
    Ok(sorted_with_vectors(d, z, n))
}

/// Eigen-decomposition of a symmetric tridiagonal matrix given its diagonal
/// and subdiagonal (`sub.len() == diag.len() - 1`).
pub fn tridiagonal_eigen(diag: &[f64], sub: &[f64]) -> Result<(Vec<f64>, SquareMatrix)> {
    let n = diag.len();
    assert_eq!(sub.len(), n.saturating_sub(1));
    let mut d = diag.to_vec();
    // shift into the internal convention: e[i] couples i-1 and i
    let mut e = vec![0.0; n];
    e[1..n].copy_from_slice(sub);
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    ql(&mut d, &mut e, Some(&mut z), n)?;
    Ok(sorted_with_vectors(d, z, n))
}

fn sorted_with_vectors(d: Vec<f64>, z: Vec<f64>, n: usize) -> (Vec<f64>, SquareMatrix) {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).expect("eigenvalues are finite"));
    let mut values = Vec::with_capacity(n);
    let mut vectors = SquareMatrix::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        values.push(d[src]);
        for row in 0..n {
            vectors.set(row, col, z[row * n + src]);
        }
    }
    (values, vectors)
}

/// Householder reduction of a symmetric matrix (row-major, only the lower
/// triangle is read). Returns the diagonal, the subdiagonal in e[1..], and
/// the accumulated orthogonal transform when `vectors` is set.
fn householder(mut a: Vec<f64>, n: usize, vectors: bool) -> (Vec<f64>, Vec<f64>, Option<Vec<f64>>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    if n == 0 {
        return (d, e, if vectors { Some(a) } else { None });
    }

    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| a[i * n + k].abs()).sum();
            if scale == 0.0 {
                e[i] = a[i * n + l];
            } else {
                for k in 0..=l {
                    a[i * n + k] /= scale;
                    h += a[i * n + k] * a[i * n + k];
                }
                let f = a[i * n + l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[i * n + l] = f - g;
                let mut f_acc = 0.0;
                for j in 0..=l {
                    if vectors {
                        a[j * n + i] = a[i * n + j] / h;
                    }
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[j * n + k] * a[i * n + k];
                    }
                    for k in (j + 1)..=l {
                        g += a[k * n + j] * a[i * n + k];
                    }
                    e[j] = g / h;
                    f_acc += e[j] * a[i * n + j];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = a[i * n + j];
                    let gj = e[j] - hh * f;
                    e[j] = gj;
                    for k in 0..=j {
                        a[j * n + k] -= f * e[k] + gj * a[i * n + k];
                    }
                }
            }
        } else {
            e[i] = a[i * n + l];
        }
        d[i] = h;
    }

    if vectors {
        d[0] = 0.0;
        e[0] = 0.0;
        for i in 0..n {
            if d[i] != 0.0 {
                for j in 0..i {
                    let mut g = 0.0;
                    for k in 0..i {
                        g += a[i * n + k] * a[k * n + j];
                    }
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
        }
        (d, e, Some(a))
    } else {
        e[0] = 0.0;
        for i in 0..n {
            d[i] = a[i * n + i];
        }
        (d, e, None)
    }
}

/// Implicit-shift QL sweeps on a tridiagonal (d, e) with e[i] coupling
/// i-1 and i. Optionally rotates the n x n transform in `z` along.
fn ql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>, n: usize) -> Result<()> {
    if n <= 1 {
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
            if sweeps > MAX_QL_SWEEPS {
                return Err(Error::NoConvergence {
                    what: "implicit-shift QL",
                    detail: format!("block starting at {l} after {MAX_QL_SWEEPS} sweeps"),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r } else { -r });
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflowed = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflowed = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(zz) = z.as_deref_mut() {
                    for k in 0..n {
                        f = zz[k * n + i + 1];
                        zz[k * n + i + 1] = s * zz[k * n + i] + c * f;
                        zz[k * n + i] = c * zz[k * n + i] - s * f;
                    }
                }
            }
            if underflowed {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
