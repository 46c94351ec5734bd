//! Dirichlet eigenpairs of the discrete form and spectral calculus.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::domain::{Domain, GridFunction};
use crate::error::{Error, Result};
use crate::forms::{FormKind, FormMatrix};
use crate::kernels::{GrowthSample, KernelSpec};
use crate::linalg::{dense_symmetric_eigen, shift_invert_lanczos};
use crate::special::unit_ball_volume;

/// Dense eigensolver up to this many interior cells; Lanczos above.
pub const DENSE_LIMIT: usize = 2000;

/// Eigenvalues ascending; columns of `vectors` are interior values of
/// `phi_j`, normalized by `h^N sum phi^2 = 1`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub cell_volume: f64,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn n_cells(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.n_cells()
    }

    pub fn eigenfunction(&self, domain: &Domain, j: usize) -> GridFunction {
        GridFunction {
            interior: self.vectors.column(j).iter().copied().collect(),
            shell: vec![0.0; domain.n_shell()],
        }
    }

    /// Coefficients `u_j = h^N sum u phi_j`.
    pub fn coefficients(&self, u: &GridFunction) -> Result<Vec<f64>> {
        if u.interior.len() != self.n_cells() {
            return Err(Error::Mismatch(format!(
                "decomposition has {} cells, function has {}",
                self.n_cells(),
                u.interior.len()
            )));
        }
        Ok((0..self.len())
            .map(|j| self.cell_volume * self.vectors.column(j).iter().zip(&u.interior).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }

    fn require_full(&self) -> Result<()> {
        if !self.is_full() {
            return Err(Error::PartialDecomposition {
                have: self.len(),
                need: self.n_cells(),
            });
        }
        Ok(())
    }

    /// `sum lambda_j^power u_j phi_j`.
    pub fn apply_power(&self, domain: &Domain, u: &GridFunction, power: f64) -> Result<GridFunction> {
        self.require_full()?;
        let c = self.coefficients(u)?;
        let n = self.n_cells();
        let mut out = vec![0.0; n];
        for (j, cj) in c.iter().enumerate() {
            let s = self.eigenvalues[j].powf(power) * cj;
            for (o, p) in out.iter_mut().zip(self.vectors.column(j).iter()) {
                *o += s * p;
            }
        }
        GridFunction::from_interior(domain, out)
    }

    /// `(sum lambda_j^-1 v_j^2)^(1/2)`.
    pub fn hstar_norm(&self, v: &GridFunction) -> Result<f64> {
        self.require_full()?;
        let c = self.coefficients(v)?;
        Ok(c.iter().zip(&self.eigenvalues).map(|(c, l)| c * c / l).sum::<f64>().sqrt())
    }

    /// `sum lambda_j u_j^2`, the energy read off the spectrum.
    pub fn parseval_energy(&self, u: &GridFunction) -> Result<f64> {
        self.require_full()?;
        let c = self.coefficients(u)?;
        Ok(c.iter().zip(&self.eigenvalues).map(|(c, l)| l * c * c).sum())
    }
}

/// Lowest `k` eigenpairs of the full Dirichlet form.
pub fn dirichlet_eigen(form: &FormMatrix, k: usize) -> Result<SpectralDecomposition> {
    eigen_of_kind(form, k, FormKind::Full)
}

pub fn eigen_of_kind(form: &FormMatrix, k: usize, kind: FormKind) -> Result<SpectralDecomposition> {
    let a = form.stiffness_kind(kind);
    eigen_of_matrix(&a, form.domain.cell_volume(), k)
}

/// Generalized problem `A phi = lambda h^N phi`.
pub fn eigen_of_matrix(a: &DMatrix<f64>, cell_volume: f64, k: usize) -> Result<SpectralDecomposition> {
    let n = a.nrows();
    if k == 0 || k > n {
        return Err(Error::Domain(format!("requested {k} eigenpairs from {n} cells")));
    }
    let scaled = a / cell_volume;
    let norm = cell_volume.sqrt();
    let (values, mut vectors) = if n <= DENSE_LIMIT {
        let (vals, vecs) = dense_symmetric_eigen(&scaled);
        (vals[..k].to_vec(), vecs.columns(0, k).into_owned())
    } else {
        let (vals, vecs) = shift_invert_lanczos(&scaled, k, 1e-8)?;
        (vals, DMatrix::from_fn(n, k, |r, c| vecs[c][r]))
    };
    for j in 0..k {
        let mut col = vectors.column_mut(j);
        col /= norm;
        let s: f64 = col.iter().sum();
        let flip = if s.abs() > 1e-12 * col.amax() * (n as f64) {
            s < 0.0
        } else {
            col.iter().find(|v| v.abs() > 1e-12).is_some_and(|&v| v < 0.0)
        };
        if flip {
            col.neg_mut();
        }
    }
    Ok(SpectralDecomposition {
        eigenvalues: values,
        vectors,
        cell_volume,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BerezinReport {
    pub bound: f64,
    pub t_star: f64,
    pub condition_ok: bool,
    pub samples: Vec<GrowthSample>,
}

/// `|Omega|/(2 pi)^N g(2 pi / (omega_N |Omega|)^(1/N))` together with the
/// growth condition on a grid around its argument.
pub fn berezin_bound(kernel: &KernelSpec, measure: f64) -> Result<BerezinReport> {
    if !kernel.ell_nonincreasing() {
        return Err(Error::Hypothesis("profile l must be nonincreasing".into()));
    }
    let n = kernel.dimension;
    let omega = unit_ball_volume(n);
    let t_star = 2.0 * std::f64::consts::PI / (omega * measure).powf(1.0 / n as f64);
    let g = kernel.spectral_mass_g_tol(t_star, 1e-9)?;
    let bound = measure / (2.0 * std::f64::consts::PI).powi(n as i32) * g;
    let ts: Vec<f64> = [0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|f| f * t_star).collect();
    let samples = kernel.growth_condition(&ts)?;
    let condition_ok = samples.iter().all(|s| s.holds());
    Ok(BerezinReport {
        bound,
        t_star,
        condition_ok,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Shape;
    use crate::kernels::{EllSpec, Tail};

    fn setup(h: f64) -> FormMatrix {
        let k = KernelSpec::new(1, EllSpec::constant(1.0), Tail::PowerDecay { alpha2: 0.5 }).unwrap();
        let d = Domain::build(Shape::Interval { a: -1.0, b: 1.0 }, h, 1.0 + h).unwrap();
        FormMatrix::assemble(&d, &k).unwrap()
    }

    #[test]
    fn two_cell_closed_form() {
        let f = setup(1.0);
        let dec = dirichlet_eigen(&f, 2).unwrap();
        let l = f.exterior_mass();
        let w = f.weight(0, 1);
        let (a, b) = (l[0] + w, l[1] + w);
        let mean = 0.5 * (a + b);
        let disc = (0.25 * (a - b).powi(2) + w * w).sqrt();
        let vol = f.domain.cell_volume();
        assert!((dec.eigenvalues[0] - (mean - disc) / vol).abs() < 1e-12);
        assert!((dec.eigenvalues[1] - (mean + disc) / vol).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_and_rayleigh() {
        let f = setup(0.125);
        let dec = dirichlet_eigen(&f, 16).unwrap();
        let d = &f.domain;
        for i in 0..4 {
            let pi = dec.eigenfunction(d, i);
            for j in 0..4 {
                let pj = dec.eigenfunction(d, j);
                let ip = pi.dot(&pj, d);
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expected).abs() < 1e-10);
            }
            let e = f.energy(&pi, &pi, FormKind::Full).unwrap();
            assert!((e - dec.eigenvalues[i]).abs() < 1e-8 * dec.eigenvalues[i]);
        }
        assert!(dec.eigenvalues[0] > 0.0);
        assert!(dec.eigenvalues[0] < dec.eigenvalues[1]);
        assert!(dec.eigenfunction(d, 0).interior.iter().all(|&v| v > -1e-10));
    }

    #[test]
    fn spectral_powers_compose() {
        let f = setup(0.125);
        let d = &f.domain;
        let dec = dirichlet_eigen(&f, d.n_interior()).unwrap();
        let u = GridFunction::from_fn_interior(d, |x| x[0] * x[0] - 0.3 * x[0]);
        let half = dec.apply_power(d, &u, 0.5).unwrap();
        let twice = dec.apply_power(d, &half, 0.5).unwrap();
        let once = dec.apply_power(d, &u, 1.0).unwrap();
        for (a, b) in twice.interior.iter().zip(&once.interior) {
            assert!((a - b).abs() < 1e-8 * once.interior.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        let e = f.energy(&u, &u, FormKind::Full).unwrap();
        assert!((dec.parseval_energy(&u).unwrap() - e).abs() < 1e-10 * e);
        let phi1 = dec.eigenfunction(d, 0);
        assert!((dec.hstar_norm(&phi1).unwrap() - dec.eigenvalues[0].powf(-0.5)).abs() < 1e-10);
        let partial = dirichlet_eigen(&f, 3).unwrap();
        assert!(matches!(partial.apply_power(d, &u, 1.0), Err(Error::PartialDecomposition { .. })));
    }

    #[test]
    fn lanczos_path_agrees_with_dense() {
        let f = setup(0.0625);
        let a = f.stiffness();
        let vol = f.domain.cell_volume();
        let dense = eigen_of_matrix(&a, vol, 3).unwrap();
        let scaled = &a / vol;
        let (vals, _) = shift_invert_lanczos(&scaled, 3, 1e-9).unwrap();
        for (x, y) in vals.iter().zip(&dense.eigenvalues) {
            assert!((x - y).abs() < 1e-8 * y);
        }
    }

    #[test]
    fn berezin_bound_positive_and_below_lambda1() {
        let f = setup(0.0625);
        let rep = berezin_bound(&f.kernel, f.domain.measure()).unwrap();
        assert!(rep.bound > 0.0);
        let dec = dirichlet_eigen(&f, 1).unwrap();
        assert!(dec.eigenvalues[0] >= rep.bound * (1.0 - 1e-3), "{} vs {}", dec.eigenvalues[0], rep.bound);
    }
}
