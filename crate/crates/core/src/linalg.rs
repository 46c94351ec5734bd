//! Krylov solvers for the symmetric systems produced by the forms.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut out = nalgebra::DVectorViewMut::from_slice(y, self.nrows());
        out.gemv(1.0, self, &nalgebra::DVectorView::from_slice(x, self.ncols()), 0.0);
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    /// Relative residual `|b - A x| / |b|`.
    pub residual: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Subtracts the mean so that the vector is orthogonal to constants.
pub fn project_mean_zero(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= m;
    }
}

/// Conjugate gradients to relative residual `tol`. With `project`, every
/// iterate and residual is projected (singular systems on a complement of
/// the kernel).
pub fn conjugate_gradient<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    project: Option<&dyn Fn(&mut [f64])>,
) -> Result<CgOutcome> {
    let n = a.dim();
    let mut rhs = b.to_vec();
    if let Some(p) = project {
        p(&mut rhs);
    }
    let bnorm = dot(&rhs, &rhs).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x,
            residual: 0.0,
            iterations: 0,
        });
    }
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 1..=max_iter {
        a.apply(&p, &mut ap);
        if let Some(pr) = project {
            pr(&mut ap);
        }
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotConverged {
                residual: rr.sqrt() / bnorm,
                iterations: it,
            });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if let Some(pr) = project {
            pr(&mut r);
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * bnorm {
            // Confirm with the true residual.
            let mut ax = vec![0.0; n];
            a.apply(&x, &mut ax);
            let mut res: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
            if let Some(pr) = project {
                pr(&mut res);
            }
            let true_res = dot(&res, &res).sqrt() / bnorm;
            if true_res <= tol * 10.0 {
                if let Some(pr) = project {
                    pr(&mut x);
                }
                return Ok(CgOutcome {
                    x,
                    residual: true_res,
                    iterations: it,
                });
            }
            r = res;
            p = r.clone();
            rr = dot(&r, &r);
            continue;
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(Error::NotConverged {
        residual: rr.sqrt() / bnorm,
        iterations: max_iter,
    })
}

/// Lowest `k` eigenpairs of a symmetric positive definite operator by
/// Lanczos on its inverse (inner solves by CG), with full
/// reorthogonalization. Returns ascending eigenvalues and unit eigenvectors.
pub fn shift_invert_lanczos<A: LinearOperator + ?Sized>(
    a: &A,
    k: usize,
    tol: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.dim();
    let mut steps = (2 * k + 20).max(40).min(n);
    loop {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
        let mut alpha = Vec::with_capacity(steps);
        let mut beta: Vec<f64> = Vec::with_capacity(steps);
        // Deterministic, generic start vector.
        let mut q: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i as f64 * 0.7548776662466927).fract() - 0.5)).collect();
        let qn = dot(&q, &q).sqrt();
        q.iter_mut().for_each(|v| *v /= qn);
        for j in 0..steps {
            basis.push(q.clone());
            let w = conjugate_gradient(a, &q, 1e-13, 20 * n + 100, None)?.x;
            let mut w = w;
            let aj = dot(&w, &q);
            alpha.push(aj);
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            let bj = dot(&w, &w).sqrt();
            if j + 1 == steps || bj < 1e-14 {
                break;
            }
            beta.push(bj);
            q = w.into_iter().map(|v| v / bj).collect();
        }
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let take = k.min(m);
        let mut values = Vec::with_capacity(take);
        let mut vectors = Vec::with_capacity(take);
        let mut worst: f64 = 0.0;
        for &idx in order.iter().take(take) {
            let theta = eig.eigenvalues[idx];
            let lambda = 1.0 / theta;
            let s = eig.eigenvectors.column(idx);
            let mut v = vec![0.0; n];
            for (c, b) in s.iter().zip(&basis) {
                v.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
            }
            let vn = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= vn);
            let mut av = vec![0.0; n];
            a.apply(&v, &mut av);
            let res = av.iter().zip(&v).map(|(x, y)| (x - lambda * y).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(res / lambda.abs());
            values.push(lambda);
            vectors.push(v);
        }
        if take == k && worst <= tol {
            return Ok((values, vectors));
        }
        if steps >= n {
            return Err(Error::NotConverged {
                residual: worst,
                iterations: steps,
            });
        }
        steps = (2 * steps).min(n);
    }
}

/// Dense symmetric eigendecomposition, ascending.
pub fn dense_symmetric_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(a.clone());
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                4.0 + i as f64 * 0.1
            } else {
                1.0 / (1.0 + (i as f64 - j as f64).abs())
            }
        })
    }

    #[test]
    fn cg_matches_direct_solve() {
        let a = spd(30);
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let x = conjugate_gradient(&a, &b, 1e-12, 500, None).unwrap();
        let direct = a.clone().cholesky().unwrap().solve(&to_dvector(&b));
        for (u, v) in x.x.iter().zip(direct.iter()) {
            assert!((u - v).abs() < 1e-10);
        }
        assert!(x.residual <= 1e-11);
    }

    #[test]
    fn cg_zero_rhs() {
        let a = spd(5);
        let x = conjugate_gradient(&a, &[0.0; 5], 1e-12, 10, None).unwrap();
        assert!(x.x.iter().all(|&v| v == 0.0));
        assert_eq!(x.iterations, 0);
    }

    #[test]
    fn projected_cg_on_graph_laplacian() {
        let n = 12;
        let mut l = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 / (1.0 + (i + j) as f64) });
        for i in 0..n {
            let s: f64 = (0..n).filter(|&j| j != i).map(|j| l[(i, j)]).sum();
            for j in 0..n {
                if j != i {
                    l[(i, j)] = -l[(i, j)];
                }
            }
            l[(i, i)] = s;
        }
        let mut b: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
        project_mean_zero(&mut b);
        let x = conjugate_gradient(&l, &b, 1e-12, 1000, Some(&project_mean_zero)).unwrap();
        let mut lx = vec![0.0; n];
        l.apply(&x.x, &mut lx);
        for (u, v) in lx.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
        assert!(x.x.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn lanczos_matches_dense() {
        let a = spd(60);
        let (dense, _) = dense_symmetric_eigen(&a);
        let (vals, vecs) = shift_invert_lanczos(&a, 4, 1e-9).unwrap();
        for (l, d) in vals.iter().zip(&dense) {
            assert!((l - d).abs() < 1e-9 * d, "{l} vs {d}");
        }
        for v in &vecs {
            assert!((dot(v, v) - 1.0).abs() < 1e-12);
        }
    }
}
