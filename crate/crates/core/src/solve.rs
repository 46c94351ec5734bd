//! Dirichlet, sublinear and Neumann problems on the assembled form.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::analysis::{lorentz_norm, LorentzWeight};
use crate::domain::{Domain, GridFunction};
use crate::error::{Error, Result};
use crate::forms::FormMatrix;
use crate::kernels::{KernelSpec, Tail};
use crate::linalg::{conjugate_gradient, project_mean_zero};
use crate::quad::{integrate_breaks, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Relative residual target.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub solution: GridFunction,
    pub residual: f64,
    pub iterations: usize,
    /// Exponent of the reported norms.
    pub p: f64,
    pub u_norm: f64,
    pub f_norm: f64,
    pub u_lorentz: Option<f64>,
}

impl SolveReport {
    fn new(domain: &Domain, solution: GridFunction, f: &GridFunction, residual: f64, iterations: usize) -> Self {
        let u_norm = solution.lp_norm(domain, 2.0);
        let f_norm = f.lp_norm(domain, 2.0);
        Self {
            solution,
            residual,
            iterations,
            p: 2.0,
            u_norm,
            f_norm,
            u_lorentz: None,
        }
    }
}

/// Dirichlet solver with the interior stiffness matrix kept for repeated
/// solves.
pub struct DirichletSolver<'a> {
    pub form: &'a FormMatrix,
    pub stiffness: DMatrix<f64>,
    pub options: SolverOptions,
}

impl<'a> DirichletSolver<'a> {
    pub fn new(form: &'a FormMatrix, options: SolverOptions) -> Self {
        Self {
            form,
            stiffness: form.stiffness(),
            options,
        }
    }

    fn solve_rhs(&self, rhs: &[f64]) -> Result<(Vec<f64>, f64, usize)> {
        let out = conjugate_gradient(&self.stiffness, rhs, self.options.tolerance, self.options.max_iterations, None)?;
        Ok((out.x, out.residual, out.iterations))
    }

    /// Zero-exterior `u` with `E(u, 1_{C_i}) = h^N f_i` for every interior cell.
    pub fn solve(&self, f: &GridFunction) -> Result<SolveReport> {
        let d = &self.form.domain;
        d.check(f)?;
        if f.interior.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("right side must be finite".into()));
        }
        let vol = d.cell_volume();
        let rhs: Vec<f64> = f.interior.iter().map(|v| v * vol).collect();
        let (x, residual, iterations) = self.solve_rhs(&rhs)?;
        let u = GridFunction::from_interior(d, x)?;
        Ok(SolveReport::new(d, u, f, residual, iterations))
    }

    /// `u = w + g` with `w` zero-exterior and `L u = f` in the interior; `g`
    /// is taken as zero beyond the shell.
    pub fn solve_nonhom(&self, f: &GridFunction, g: &GridFunction) -> Result<SolveReport> {
        let d = &self.form.domain;
        d.check(f)?;
        d.check(g)?;
        let vol = d.cell_volume();
        let lg = self.form.apply_l(g)?;
        let rhs: Vec<f64> = f.interior.iter().zip(&lg).map(|(f, l)| (f - l) * vol).collect();
        let (w, residual, iterations) = self.solve_rhs(&rhs)?;
        let interior = w.iter().zip(&g.interior).map(|(w, g)| w + g).collect();
        let u = GridFunction::from_parts(d, interior, g.shell.clone())?;
        Ok(SolveReport::new(d, u, f, residual, iterations))
    }
}

pub fn solve_dirichlet(form: &FormMatrix, f: &GridFunction, options: SolverOptions) -> Result<SolveReport> {
    DirichletSolver::new(form, options).solve(f)
}

pub fn solve_dirichlet_nonhom(
    form: &FormMatrix,
    f: &GridFunction,
    g: &GridFunction,
    options: SolverOptions,
) -> Result<SolveReport> {
    DirichletSolver::new(form, options).solve_nonhom(f, g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothingRatios {
    pub p: f64,
    pub lp: f64,
    pub lorentz: f64,
}

/// `||u||_p / ||f||_p` and `||u||_{A,p} / ||f||_p`; both zero for `f = 0`.
pub fn smoothing_report(
    domain: &Domain,
    u: &GridFunction,
    f: &GridFunction,
    p: f64,
    weight: &LorentzWeight,
) -> Result<SmoothingRatios> {
    let fp = f.lp_norm(domain, p);
    if fp == 0.0 {
        return Ok(SmoothingRatios { p, lp: 0.0, lorentz: 0.0 });
    }
    Ok(SmoothingRatios {
        p,
        lp: u.lp_norm(domain, p) / fp,
        lorentz: lorentz_norm(u, domain.cell_volume(), weight, p)? / fp,
    })
}

/// Nonlinearity `f(t) = c t^p` for `t >= 0`; `p = 0` is a constant source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSource {
    pub exponent: f64,
    pub scale: f64,
}

impl PowerSource {
    pub fn constant(c: f64) -> Self {
        Self { exponent: 0.0, scale: c }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        if self.exponent == 0.0 {
            self.scale
        } else {
            self.scale * t.powf(self.exponent)
        }
    }

    /// `F(t) = int_0^t f`.
    pub fn primitive(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        self.scale * t.powf(self.exponent + 1.0) / (self.exponent + 1.0)
    }

    pub fn is_sublinear(&self) -> bool {
        self.scale > 0.0 && (0.0..1.0).contains(&self.exponent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SublinearReport {
    pub report: SolveReport,
    /// Picard steps from the large constant start.
    pub iterations_from_above: usize,
    /// `max |u_low - u_high|` between the two limits.
    pub start_gap: f64,
    /// Iterates from below never decreased.
    pub monotone_from_below: bool,
}

/// Damped Picard iteration `u <- (u + S(f(u_+))) / 2` until the sup-norm
/// step is below `step_tol`.
fn picard(
    solver: &DirichletSolver,
    source: &PowerSource,
    start: Vec<f64>,
    step_tol: f64,
    max_steps: usize,
) -> Result<(Vec<f64>, usize, bool)> {
    let d = &solver.form.domain;
    let mut u = start;
    let mut monotone = true;
    let mut last = f64::INFINITY;
    for k in 1..=max_steps {
        let f = GridFunction::from_interior(d, u.iter().map(|&t| source.eval(t)).collect())?;
        let s = solver.solve(&f)?.solution.interior;
        let mut step: f64 = 0.0;
        for (ui, si) in u.iter_mut().zip(&s) {
            let next = 0.5 * (*ui + si);
            if next < *ui - 1e-12 * ui.abs().max(1.0) {
                monotone = false;
            }
            step = step.max((next - *ui).abs());
            *ui = next;
        }
        last = step;
        if step < step_tol {
            return Ok((u, k, monotone));
        }
    }
    Err(Error::Stagnation(last))
}

/// Unique nonnegative solution of `L u = f(u)` for a sublinear power
/// source, computed from below and from above.
pub fn solve_sublinear(form: &FormMatrix, source: &PowerSource, options: SolverOptions) -> Result<SublinearReport> {
    if !(source.is_sublinear()) {
        return Err(Error::Domain(format!(
            "source must satisfy f(t)/t nonincreasing: exponent in [0, 1), positive scale, got {:?}",
            source
        )));
    }
    let solver = DirichletSolver::new(form, options);
    let d = &form.domain;
    let step_tol = 1e-8;
    let max_steps = 10_000;
    // Below: one linear solve with the source frozen at a small level.
    let seed = GridFunction::constant(d, source.eval(1e-3));
    let low = solver.solve(&GridFunction::from_interior(d, seed.interior.clone())?)?.solution.interior;
    let (u_low, it_low, monotone) = picard(&solver, source, low, step_tol, max_steps)?;
    let top = u_low.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let (u_high, it_high, _) = picard(&solver, source, vec![100.0 * top; d.n_interior()], step_tol, max_steps)?;
    let gap = u_low.iter().zip(&u_high).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let f = GridFunction::from_interior(d, u_low.iter().map(|&t| source.eval(t)).collect())?;
    let check = solver.solve(&f)?;
    let u = GridFunction::from_interior(d, u_low)?;
    Ok(SublinearReport {
        report: SolveReport::new(d, u, &f, check.residual, it_low),
        iterations_from_above: it_high,
        start_gap: gap,
        monotone_from_below: monotone,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PohozaevReport {
    pub lhs: f64,
    pub rhs: f64,
    pub sigma: f64,
    pub p_star: f64,
    pub pass: bool,
}

/// `p_* = (N + sigma) / (N - sigma)`.
pub fn critical_exponent(kernel: &KernelSpec) -> Result<(f64, f64)> {
    let sigma = kernel.scaling_sigma()?.sigma;
    let n = kernel.dimension as f64;
    if sigma >= n {
        return Err(Error::Supercritical {
            sigma,
            dimension: kernel.dimension,
        });
    }
    Ok((sigma, (n + sigma) / (n - sigma)))
}

/// `h^N sum u f(u) <= 2N/(N - sigma) h^N sum F(u)`, with 5% slack.
pub fn pohozaev_check(form: &FormMatrix, u: &GridFunction, source: &PowerSource) -> Result<PohozaevReport> {
    form.domain.check(u)?;
    let (sigma, p_star) = critical_exponent(&form.kernel)?;
    let n = form.kernel.dimension as f64;
    let vol = form.domain.cell_volume();
    let lhs: f64 = u.interior.iter().map(|&t| t * source.eval(t) * vol).sum();
    let rhs: f64 = 2.0 * n / (n - sigma) * u.interior.iter().map(|&t| source.primitive(t) * vol).sum::<f64>();
    Ok(PohozaevReport {
        lhs,
        rhs,
        sigma,
        p_star,
        pass: lhs <= rhs * (1.0 + 5e-2),
    })
}

/// Neumann system over interior cells and the shell cells that couple to
/// them. Pairs between two exterior cells are not part of the form.
pub struct NeumannSystem<'a> {
    pub form: &'a FormMatrix,
    /// Shell indices (into `domain.shell`) carried as unknowns.
    pub shell_cells: Vec<usize>,
    pub matrix: DMatrix<f64>,
}

impl<'a> NeumannSystem<'a> {
    pub fn new(form: &'a FormMatrix) -> Self {
        let n = form.n_interior();
        let shell_cells: Vec<usize> = (0..form.n_shell())
            .filter(|&k| (0..n).any(|j| form.weight(n + k, j) > 0.0))
            .collect();
        let idx: Vec<usize> = (0..n).chain(shell_cells.iter().map(|k| n + k)).collect();
        let m = idx.len();
        let mut a = DMatrix::zeros(m, m);
        for p in 0..m {
            for q in p + 1..m {
                if p >= n && q >= n {
                    continue;
                }
                let w = form.weight(idx[p], idx[q]);
                a[(p, q)] = -w;
                a[(q, p)] = -w;
                a[(p, p)] += w;
                a[(q, q)] += w;
            }
        }
        Self {
            form,
            shell_cells,
            matrix: a,
        }
    }

    pub fn solve(&self, f: &GridFunction, options: SolverOptions) -> Result<SolveReport> {
        let d = &self.form.domain;
        d.check(f)?;
        let vol = d.cell_volume();
        let mean = vol * f.interior.iter().sum::<f64>();
        let l1 = vol * f.interior.iter().map(|v| v.abs()).sum::<f64>();
        let tolerance = 1e-10 * l1;
        if mean.abs() > tolerance {
            return Err(Error::IncompatibleData { mean, tolerance });
        }
        let n = d.n_interior();
        let mut rhs = vec![0.0; self.matrix.nrows()];
        for (r, v) in rhs.iter_mut().zip(&f.interior) {
            *r = v * vol;
        }
        let project = |v: &mut [f64]| project_mean_zero(v);
        let out = conjugate_gradient(&self.matrix, &rhs, options.tolerance, options.max_iterations, Some(&project))?;
        let shift = out.x[..n].iter().sum::<f64>() / n as f64;
        let interior: Vec<f64> = out.x[..n].iter().map(|v| v - shift).collect();
        let mut shell = vec![0.0; d.n_shell()];
        for (p, &k) in self.shell_cells.iter().enumerate() {
            shell[k] = out.x[n + p] - shift;
        }
        let u = GridFunction::from_parts(d, interior, shell)?;
        Ok(SolveReport::new(d, u, f, out.residual, out.iterations))
    }

    /// `(L u)` on interior cells and `(N u)` on shell cells as densities,
    /// restricted to the pairs of the Neumann form.
    pub fn operators(&self, u: &GridFunction) -> Result<(Vec<f64>, Vec<f64>)> {
        let f = self.form;
        f.domain.check(u)?;
        let vol = f.domain.cell_volume();
        let lu: Vec<f64> = f
            .apply_l(u)?
            .iter()
            .zip(&u.interior)
            .zip(&f.tail)
            .map(|((l, ui), t)| l - ui * t / vol)
            .collect();
        Ok((lu, f.apply_n(u)?))
    }

    /// Energy over interior-interior and interior-shell pairs.
    pub fn energy(&self, u: &GridFunction, v: &GridFunction) -> Result<f64> {
        let f = self.form;
        f.domain.check(u)?;
        f.domain.check(v)?;
        let n = f.n_interior();
        let uu = u.values();
        let vv = v.values();
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..uu.len() {
                s += f.weight(i, j) * (uu[i] - uu[j]) * (vv[i] - vv[j]);
            }
        }
        Ok(s)
    }
}

pub fn solve_neumann(form: &FormMatrix, f: &GridFunction, options: SolverOptions) -> Result<SolveReport> {
    NeumannSystem::new(form).solve(f, options)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeumannTail {
    pub radii: Vec<f64>,
    pub far_values: Vec<f64>,
    pub weighted_mean: f64,
    /// `|u(x) - mean| / osc(u)` at each probe.
    pub deviation: Vec<f64>,
}

/// `int_{C_j} K(x - y) dy` for a point `x` outside the cell.
fn point_cell_weight(kernel: &KernelSpec, domain: &Domain, x: [f64; 2], center: [f64; 2]) -> Result<f64> {
    let h = domain.h;
    let rho = kernel.rho();
    let opts = QuadOptions::rel(1e-12).with_abs(1e-300);
    let breaks = |lo: f64, hi: f64, c: f64, extra: f64| {
        let mut pts = vec![lo];
        for b in [c - extra, c + extra] {
            if b > lo && b < hi {
                pts.push(b);
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.push(hi);
        pts
    };
    if domain.dimension == 1 {
        let lo = center[0] - 0.5 * h;
        let hi = lo + h;
        let pts = breaks(lo, hi, x[0], rho);
        Ok(integrate_breaks(|y| kernel.radial((x[0] - y).abs()), &pts, opts)?.value)
    } else {
        let lo = center[1] - 0.5 * h;
        let hi = lo + h;
        let inner = |y1: f64| -> f64 {
            let dy = x[1] - y1;
            let a = center[0] - 0.5 * h;
            let reach = (rho * rho - dy * dy).max(0.0).sqrt();
            let pts = breaks(a, a + h, x[0], reach);
            integrate_breaks(|y0| kernel.radial(((x[0] - y0).powi(2) + dy * dy).sqrt()), &pts, opts)
                .map(|r| r.value)
                .unwrap_or(f64::NAN)
        };
        Ok(integrate_breaks(inner, &[lo, hi], opts)?.value)
    }
}

/// Exterior reconstruction `u(x) = sum u_j w_xj / sum w_xj` at probes
/// `|x| in factors * diam(Omega)` on the first axis.
pub fn neumann_tail(form: &FormMatrix, u: &GridFunction, factors: &[f64]) -> Result<NeumannTail> {
    let kernel = &form.kernel;
    if kernel.tail == Tail::Zero {
        return Err(Error::NoStabilization);
    }
    let d = &form.domain;
    d.check(u)?;
    let mean = u.interior.iter().sum::<f64>() / u.interior.len() as f64;
    let (lo, hi) = u.interior.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let osc = hi - lo;
    let diam = d.diameter();
    let mut radii = Vec::new();
    let mut values = Vec::new();
    let mut deviation = Vec::new();
    for &f in factors {
        let r = f * diam;
        let x = [d.anchor[0] + r, d.anchor[1]];
        let mut num = 0.0;
        let mut den = 0.0;
        for (c, &uj) in d.interior.iter().zip(&u.interior) {
            let w = point_cell_weight(kernel, d, x, c.center)?;
            num += w * uj;
            den += w;
        }
        if !(den > 0.0) {
            return Err(Error::NoStabilization);
        }
        let v = num / den;
        radii.push(r);
        values.push(v);
        deviation.push(if osc > 0.0 { (v - mean).abs() / osc } else { 0.0 });
    }
    Ok(NeumannTail {
        radii,
        far_values: values,
        weighted_mean: mean,
        deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Shape;
    use crate::kernels::EllSpec;
    use crate::rng::{stream, uniform_interior};
    use crate::spectral::dirichlet_eigen;

    fn form(h: f64, tail: Tail) -> FormMatrix {
        let k = KernelSpec::new(1, EllSpec::constant(1.0), tail).unwrap();
        let d = Domain::build(Shape::Interval { a: -1.0, b: 1.0 }, h, 1.0 + h).unwrap();
        FormMatrix::assemble(&d, &k).unwrap()
    }

    const DECAY: Tail = Tail::PowerDecay { alpha2: 0.5 };

    #[test]
    fn zero_source_zero_solution() {
        let f = form(0.125, DECAY);
        let r = solve_dirichlet(&f, &GridFunction::zeros(&f.domain), SolverOptions::default()).unwrap();
        assert!(r.solution.interior.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eight_cells_match_cholesky() {
        let f = form(0.25, DECAY);
        let d = &f.domain;
        assert_eq!(d.n_interior(), 8);
        let rhs = GridFunction::from_fn_interior(d, |x| (3.0 * x[0]).sin() + 0.5);
        let r = solve_dirichlet(&f, &rhs, SolverOptions::default()).unwrap();
        let b = nalgebra::DVector::from_iterator(8, rhs.interior.iter().map(|v| v * d.cell_volume()));
        let direct = f.stiffness().cholesky().unwrap().solve(&b);
        for (u, v) in r.solution.interior.iter().zip(direct.iter()) {
            assert!((u - v).abs() < 1e-10 * direct.amax());
        }
    }

    #[test]
    fn eigenfunction_and_energy_identity() {
        let f = form(1.0 / 32.0, DECAY);
        let d = &f.domain;
        let dec = dirichlet_eigen(&f, 1).unwrap();
        let phi = dec.eigenfunction(d, 0);
        let rhs = phi.map(|v| v * dec.eigenvalues[0]);
        let r = solve_dirichlet(&f, &rhs, SolverOptions::default()).unwrap();
        let err = r.solution.interior.iter().zip(&phi.interior).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8);
        let e = f.energy(&r.solution, &r.solution, crate::forms::FormKind::Full).unwrap();
        let w = d.cell_volume() * rhs.interior.iter().zip(&r.solution.interior).map(|(a, b)| a * b).sum::<f64>();
        assert!((e - w).abs() < 1e-9 * e);
        // Spectral bound for p = 2.
        assert!(r.u_norm <= r.f_norm / dec.eigenvalues[0] * (1.0 + 1e-9));
    }

    #[test]
    fn nonhom_constants_are_harmonic() {
        let f = form(0.125, Tail::Zero);
        let d = &f.domain;
        let g = GridFunction::from_parts(d, vec![1.0; d.n_interior()], vec![1.0; d.n_shell()]).unwrap();
        let r = solve_dirichlet_nonhom(&f, &GridFunction::zeros(d), &g, SolverOptions::default()).unwrap();
        assert!(r.solution.interior.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn nonhom_without_data_is_dirichlet() {
        let f = form(0.125, DECAY);
        let d = &f.domain;
        let rhs = GridFunction::from_fn_interior(d, |x| 1.0 - x[0]);
        let a = solve_dirichlet(&f, &rhs, SolverOptions::default()).unwrap();
        let b = solve_dirichlet_nonhom(&f, &rhs, &GridFunction::zeros(d), SolverOptions::default()).unwrap();
        assert_eq!(a.solution, b.solution);
    }

    #[test]
    fn maximum_principle_and_comparison() {
        let f = form(1.0 / 16.0, DECAY);
        let d = &f.domain;
        let solver = DirichletSolver::new(&f, SolverOptions::default());
        for seed in 0..10 {
            let mut rng = stream(42, "max_principle", seed);
            let src = uniform_interior(d, &mut rng).map(f64::abs);
            let shell = uniform_interior(d, &mut rng).map(f64::abs);
            let g = GridFunction::from_parts(
                d,
                vec![0.0; d.n_interior()],
                (0..d.n_shell()).map(|k| shell.interior[k % d.n_interior()]).collect(),
            )
            .unwrap();
            let u = solver.solve_nonhom(&src, &g).unwrap();
            assert!(u.solution.interior.iter().all(|&v| v >= -1e-10));
            let bigger = src.map(|v| v + 0.1);
            let u1 = solver.solve(&src).unwrap();
            let u2 = solver.solve(&bigger).unwrap();
            assert!(u1.solution.interior.iter().zip(&u2.solution.interior).all(|(a, b)| *a <= b + 1e-10));
        }
    }

    #[test]
    fn smoothing_zero_source() {
        let f = form(0.125, DECAY);
        let d = &f.domain;
        let z = GridFunction::zeros(d);
        let r = smoothing_report(d, &z, &z, 2.0, &LorentzWeight::Linear(1.0)).unwrap();
        assert_eq!((r.lp, r.lorentz), (0.0, 0.0));
    }

    #[test]
    fn sublinear_constant_source_is_linear_solve() {
        let f = form(0.125, DECAY);
        let d = &f.domain;
        let r = solve_sublinear(&f, &PowerSource::constant(2.0), SolverOptions::default()).unwrap();
        let lin = solve_dirichlet(&f, &GridFunction::constant(d, 2.0).map(|v| v), SolverOptions::default()).unwrap();
        for (a, b) in r.report.solution.interior.iter().zip(&lin.solution.interior) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn sublinear_square_root() {
        let f = form(1.0 / 16.0, DECAY);
        let src = PowerSource {
            exponent: 0.5,
            scale: 1.0,
        };
        let r = solve_sublinear(&f, &src, SolverOptions::default()).unwrap();
        let u = &r.report.solution.interior;
        assert!(u.iter().all(|&v| v > 0.0));
        let imax = u.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(imax > 0 && imax + 1 < u.len());
        assert!(r.start_gap < 1e-6);
        assert!(r.monotone_from_below);
        let p = pohozaev_check(&f, &r.report.solution, &src).unwrap();
        assert!(p.pass && p.lhs < p.rhs);
    }

    #[test]
    fn pohozaev_critical_exponent() {
        let k = KernelSpec::new(1, EllSpec::constant(1.0), Tail::PiecewisePower { alpha1: 0.5, alpha2: 0.5 }).unwrap();
        let (sigma, p_star) = critical_exponent(&k).unwrap();
        assert!((sigma - 0.5).abs() < 1e-3);
        assert!((p_star - 3.0).abs() < 1e-2);
        let f = form(0.25, DECAY);
        let z = GridFunction::zeros(&f.domain);
        let r = pohozaev_check(&f, &z, &PowerSource { exponent: 0.5, scale: 1.0 }).unwrap();
        assert!(r.pass && r.lhs == 0.0 && r.rhs == 0.0);
    }

    #[test]
    fn neumann_basics() {
        let f = form(0.125, DECAY);
        let d = &f.domain;
        let sys = NeumannSystem::new(&f);
        let z = sys.solve(&GridFunction::zeros(d), SolverOptions::default()).unwrap();
        assert!(z.solution.values().iter().all(|&v| v == 0.0));
        let bad = GridFunction::constant(d, 1.0);
        let bad = GridFunction::from_interior(d, bad.interior).unwrap();
        assert!(matches!(sys.solve(&bad, SolverOptions::default()), Err(Error::IncompatibleData { .. })));
        let odd = GridFunction::from_fn_interior(d, |x| x[0]);
        let u = sys.solve(&odd, SolverOptions::default()).unwrap().solution.interior;
        let n = u.len();
        for i in 0..n {
            assert!((u[i] + u[n - 1 - i]).abs() < 1e-8);
        }
    }

    #[test]
    fn neumann_six_cells_match_pseudo_inverse() {
        let k = KernelSpec::new(1, EllSpec::constant(0.5), DECAY).unwrap();
        let d = Domain::build(Shape::Interval { a: 0.0, b: 1.5 }, 0.25, 0.75).unwrap();
        let f = FormMatrix::assemble(&d, &k).unwrap();
        let sys = NeumannSystem::new(&f);
        let src = GridFunction::from_interior(&d, vec![1.0, -2.0, 0.5, 0.25, 0.75, -0.5]).unwrap();
        let u = sys.solve(&src, SolverOptions::default()).unwrap().solution;
        let m = sys.matrix.nrows();
        let mut b = nalgebra::DVector::zeros(m);
        for i in 0..6 {
            b[i] = src.interior[i] * d.cell_volume();
        }
        let pinv = sys.matrix.clone().pseudo_inverse(1e-12).unwrap();
        let x = pinv * b;
        let shift = x.rows(0, 6).sum() / 6.0;
        for i in 0..6 {
            assert!((u.interior[i] - (x[i] - shift)).abs() < 1e-9);
        }
    }

    #[test]
    fn neumann_integration_by_parts() {
        let f = form(1.0 / 16.0, DECAY);
        let d = &f.domain;
        let sys = NeumannSystem::new(&f);
        let src = GridFunction::from_fn_interior(d, |x| (2.0 * x[0]).sin());
        let u = sys.solve(&src, SolverOptions::default()).unwrap().solution;
        let (lu, nu) = sys.operators(&u).unwrap();
        for seed in 0..5 {
            let mut rng = stream(42, "ibp", seed);
            let vi = uniform_interior(d, &mut rng);
            let shell: Vec<f64> = (0..d.n_shell()).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
            let v = GridFunction::from_parts(d, vi.interior, shell).unwrap();
            let vol = d.cell_volume();
            let lhs = vol * (lu.iter().zip(&v.interior).map(|(a, b)| a * b).sum::<f64>()
                + nu.iter().zip(&v.shell).map(|(a, b)| a * b).sum::<f64>());
            let rhs = sys.energy(&u, &v).unwrap();
            assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(1e-3));
        }
    }

    #[test]
    fn neumann_tail_contract() {
        let f = form(0.125, DECAY);
        let d = &f.domain;
        let c = GridFunction::from_parts(d, vec![0.7; d.n_interior()], vec![0.7; d.n_shell()]).unwrap();
        let t = neumann_tail(&f, &c, &[2.0, 4.0, 8.0]).unwrap();
        assert!(t.deviation.iter().all(|&v| v == 0.0));
        assert!(t.far_values.iter().all(|&v| (v - 0.7).abs() < 1e-12));
        let z = form(0.125, Tail::Zero);
        assert!(matches!(neumann_tail(&z, &c, &[2.0]), Err(Error::NoStabilization)));
    }
}
