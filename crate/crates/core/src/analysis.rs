//! Rearrangement, Lorentz-type norms and the inequality checks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::domain::{Domain, GridFunction, Shape};
use crate::error::{Error, Result};
use crate::forms::FormMatrix;
use crate::kernels::KernelSpec;
use crate::linalg::shift_invert_lanczos;
use crate::spectral::DENSE_LIMIT;
use crate::special::unit_ball_volume;

/// Distribution function of `|u|` for a grid function: `mu(t) = measures[k]`
/// for `t` in `[levels[k+1], levels[k])`, with `levels` strictly decreasing
/// and an implicit final level 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionProfile {
    pub levels: Vec<f64>,
    pub measures: Vec<f64>,
}

impl DistributionProfile {
    pub fn of(u: &GridFunction, cell_volume: f64) -> Self {
        let mut v: Vec<f64> = u.interior.iter().map(|x| x.abs()).filter(|&x| x > 0.0).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        let mut levels = Vec::new();
        let mut measures = Vec::new();
        for (i, &x) in v.iter().enumerate() {
            if levels.last() == Some(&x) {
                *measures.last_mut().unwrap() = (i + 1) as f64 * cell_volume;
            } else {
                levels.push(x);
                measures.push((i + 1) as f64 * cell_volume);
            }
        }
        Self { levels, measures }
    }

    /// `mu(t) = |{|u| > t}|`.
    pub fn mu(&self, t: f64) -> f64 {
        // Right-continuous step: count levels strictly above t.
        match self.levels.iter().position(|&l| l <= t) {
            Some(0) => 0.0,
            Some(k) => self.measures[k - 1],
            None => self.measures.last().copied().unwrap_or(0.0),
        }
    }
}

/// Increasing weight `A` on `[0, |Omega|]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LorentzWeight {
    /// `A(s) = c s`.
    Linear(f64),
    /// Piecewise linear through `(s_k, a_k)`, `s_0 = 0`, extended with the
    /// last slope.
    Tabulated { s: Vec<f64>, a: Vec<f64> },
}

impl LorentzWeight {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            LorentzWeight::Linear(c) => c * s,
            LorentzWeight::Tabulated { s: xs, a } => {
                let n = xs.len();
                if s <= 0.0 {
                    return 0.0;
                }
                let k = xs.partition_point(|&x| x < s);
                let k = k.clamp(1, n - 1);
                let t = (s - xs[k - 1]) / (xs[k] - xs[k - 1]);
                a[k - 1] + t * (a[k] - a[k - 1])
            }
        }
    }

    /// Weight generated by the radial function `psi(x) = M(rho |x|/R)` on
    /// the ball grid of measure `n h^N`: `A(k h^N) = h^N sum_{i<k} psi(x_i)`
    /// over cells sorted by radius.
    pub fn from_kernel(kernel: &KernelSpec, ball: &BallGrid) -> Self {
        let vol = ball.domain.cell_volume();
        let psi = ball.psi(kernel);
        let mut s = vec![0.0];
        let mut a = vec![0.0];
        let mut acc = 0.0;
        for (k, &i) in ball.order.iter().enumerate() {
            acc += psi[i] * vol;
            s.push((k + 1) as f64 * vol);
            a.push(acc);
        }
        LorentzWeight::Tabulated { s, a }
    }
}

/// `||u||_{A,p} = (p int_0^inf A(mu(t)) t^(p-1) dt)^(1/p)`, exact for step
/// distribution functions.
pub fn lorentz_norm(u: &GridFunction, cell_volume: f64, weight: &LorentzWeight, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("Lorentz exponent must be >= 1, got {p}")));
    }
    let prof = DistributionProfile::of(u, cell_volume);
    let k = prof.levels.len();
    let mut s = 0.0;
    for i in 0..k {
        let next = if i + 1 < k { prof.levels[i + 1] } else { 0.0 };
        s += weight.eval(prof.measures[i]) * (prof.levels[i].powf(p) - next.powf(p));
    }
    Ok(s.powf(1.0 / p))
}

/// Target grid of a rearrangement: a centered interval in 1D, the `n`
/// lattice cells nearest the origin in 2D; `order` lists cells by radius.
#[derive(Debug, Clone)]
pub struct BallGrid {
    pub domain: Domain,
    pub order: Vec<usize>,
    pub radius: f64,
}

impl BallGrid {
    pub fn new(dimension: usize, n: usize, h: f64, r_ext: f64) -> Result<Self> {
        let shape = if dimension == 1 {
            let half = 0.5 * n as f64 * h;
            Shape::Interval { a: -half, b: half }
        } else {
            let reach = ((n as f64 / std::f64::consts::PI).sqrt() + 3.0).ceil() as i64;
            let mut cand: Vec<(i64, [i64; 2])> = Vec::new();
            for i in -reach..reach {
                for j in -reach..reach {
                    let key = (2 * i + 1).pow(2) + (2 * j + 1).pow(2);
                    cand.push((key, [i, j]));
                }
            }
            cand.sort();
            let mut cells: Vec<[i64; 2]> = cand.into_iter().take(n).map(|c| c.1).collect();
            cells.sort();
            Shape::Cells { dimension: 2, h, cells }
        };
        let domain = Domain::build(shape, h, r_ext)?;
        if domain.n_interior() != n {
            return Err(Error::Domain(format!(
                "ball grid has {} cells, expected {n}",
                domain.n_interior()
            )));
        }
        // Exact integer radius keys: 2 x / h is an odd integer offset.
        let key = |c: &crate::domain::Cell| -> i64 {
            let a = ((2.0 * c.center[0] / h).round()) as i64;
            let b = ((2.0 * c.center[1] / h).round()) as i64;
            a * a + b * b
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (key(&domain.interior[i]), domain.interior[i].index));
        let radius = (domain.measure() / unit_ball_volume(dimension)).powf(1.0 / dimension as f64);
        Ok(Self { domain, order, radius })
    }

    /// Ball grid with the same cell count, size and shell width as `domain`.
    pub fn matching(domain: &Domain) -> Result<Self> {
        Self::new(domain.dimension, domain.n_interior(), domain.h, domain.r_ext)
    }

    /// `psi(x_i) = M(clamp(rho |x_i| / R, 1e-12 rho, rho))`.
    pub fn psi(&self, kernel: &KernelSpec) -> Vec<f64> {
        origin_weight(kernel, &self.domain, self.radius)
    }
}

/// Hardy weight at the origin, `M(clamp(rho |x| / R, 1e-12 rho, rho))`.
pub fn origin_weight(kernel: &KernelSpec, domain: &Domain, big_r: f64) -> Vec<f64> {
    let rho = kernel.rho();
    domain
        .interior
        .iter()
        .map(|c| {
            let r = (c.center[0].powi(2) + c.center[1].powi(2)).sqrt();
            let s = (rho * r / big_r).clamp(1e-12 * rho, rho);
            kernel.mass_m(s).unwrap_or(0.0)
        })
        .collect()
}

/// Hardy weight at the boundary, `M(clamp(dist(x, boundary), 1e-12 rho, rho))`.
pub fn boundary_weight(kernel: &KernelSpec, domain: &Domain) -> Vec<f64> {
    let rho = kernel.rho();
    domain
        .boundary_distance()
        .iter()
        .map(|&d| kernel.mass_m(d.clamp(1e-12 * rho, rho)).unwrap_or(0.0))
        .collect()
}

/// `sup_{x in Omega} |x|` over the continuous shape.
pub fn max_radius(domain: &Domain) -> f64 {
    match &domain.shape {
        Shape::Interval { a, b } => a.abs().max(b.abs()),
        Shape::Box { min, max } => {
            let x = min[0].abs().max(max[0].abs());
            let y = min[1].abs().max(max[1].abs());
            (x * x + y * y).sqrt()
        }
        Shape::Ball { radius, .. } => *radius,
        Shape::Cells { .. } => domain
            .interior
            .iter()
            .map(|c| {
                let h = 0.5 * domain.h;
                let x = c.center[0].abs() + h;
                let y = if domain.dimension == 2 { c.center[1].abs() + h } else { 0.0 };
                (x * x + y * y).sqrt()
            })
            .fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone)]
pub struct Rearranged {
    pub ball: BallGrid,
    pub values: GridFunction,
    pub profile: DistributionProfile,
}

/// Decreasing rearrangement of `|u|` onto the ball grid of equal measure.
pub fn rearrange(domain: &Domain, u: &GridFunction) -> Result<Rearranged> {
    domain.check(u)?;
    let ball = BallGrid::matching(domain)?;
    Ok(rearrange_onto(&ball, domain.cell_volume(), u))
}

pub fn rearrange_onto(ball: &BallGrid, cell_volume: f64, u: &GridFunction) -> Rearranged {
    let mut v: Vec<f64> = u.interior.iter().map(|x| x.abs()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    let mut out = vec![0.0; v.len()];
    for (rank, &i) in ball.order.iter().enumerate() {
        out[i] = v[rank];
    }
    let values = GridFunction {
        interior: out,
        shell: vec![0.0; ball.domain.n_shell()],
    };
    Rearranged {
        ball: ball.clone(),
        profile: DistributionProfile::of(u, cell_volume),
        values,
    }
}

/// Smallest `c` with `x^T A x >= c sum_i d_i x_i^2`, `d > 0`.
pub fn min_generalized_eigenvalue(a: &DMatrix<f64>, d: &[f64]) -> Result<f64> {
    let n = a.nrows();
    if d.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("weight must be positive on every cell".into()));
    }
    let s: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    let b = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * s[i] * s[j]);
    if n <= DENSE_LIMIT {
        let eig = SymmetricEigen::new(b);
        Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
    } else {
        Ok(shift_invert_lanczos(&b, 1, 1e-8)?.0[0])
    }
}

fn quad_form(a: &DMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
    let xv = DVector::from_column_slice(x);
    let yv = DVector::from_column_slice(y);
    xv.dot(&(a * yv))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Poincare,
    HardyOrigin,
    HardyBoundary,
    Symmetrization,
    StroockVaropoulos,
    AbsoluteValue,
    PiconeRemainder,
    LorentzEmbedding,
}

pub const CHECKS: [Check; 8] = [
    Check::Poincare,
    Check::HardyOrigin,
    Check::HardyBoundary,
    Check::Symmetrization,
    Check::StroockVaropoulos,
    Check::AbsoluteValue,
    Check::PiconeRemainder,
    Check::LorentzEmbedding,
];

impl Check {
    pub fn name(&self) -> &'static str {
        match self {
            Check::Poincare => "poincare",
            Check::HardyOrigin => "hardy_origin",
            Check::HardyBoundary => "hardy_boundary",
            Check::Symmetrization => "symmetrization",
            Check::StroockVaropoulos => "stroock_varopoulos",
            Check::AbsoluteValue => "absolute_value",
            Check::PiconeRemainder => "picone_remainder",
            Check::LorentzEmbedding => "lorentz_embedding",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        CHECKS.iter().copied().find(|c| c.name() == name).ok_or_else(|| Error::UnknownCheck {
            name: name.to_string(),
            valid: CHECKS.iter().map(|c| c.name()).collect::<Vec<_>>().join(", "),
        })
    }

    /// Exact discrete inequalities get a tight tolerance; checks that move
    /// between grids get 5%.
    pub fn default_tolerance(&self) -> f64 {
        match self {
            Check::StroockVaropoulos => 1e-12,
            Check::Poincare | Check::AbsoluteValue | Check::PiconeRemainder => 1e-8,
            Check::HardyOrigin | Check::HardyBoundary => 1e-8,
            Check::Symmetrization | Check::LorentzEmbedding => 5e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Report {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub pass: bool,
}

impl Report {
    fn new(lhs: f64, rhs: f64, tol: f64) -> Self {
        let ratio = if rhs == 0.0 {
            if lhs >= 0.0 {
                1.0
            } else {
                f64::NEG_INFINITY
            }
        } else {
            lhs / rhs
        };
        // Both sides zero counts as equality.
        let pass = ratio >= 1.0 - tol || (lhs >= rhs * (1.0 - tol) && rhs <= 0.0);
        Self { lhs, rhs, ratio, pass }
    }
}

/// Precomputed state for evaluating one check on many zero-exterior `u`.
pub struct Verifier {
    pub check: Check,
    pub tolerance: f64,
    /// Exponent for Stroock–Varopoulos.
    pub p: f64,
    form: FormMatrix,
    stiffness: DMatrix<f64>,
    weight: Vec<f64>,
    /// Best discrete constant for the weighted checks.
    pub constant: f64,
    ball: Option<(BallGrid, DMatrix<f64>)>,
    lorentz: Option<LorentzWeight>,
    picone: Option<(Vec<f64>, Vec<f64>)>,
}

impl Verifier {
    pub fn new(form: &FormMatrix, check: Check) -> Result<Self> {
        let kernel = form.kernel;
        let domain = &form.domain;
        let vol = domain.cell_volume();
        let stiffness = form.stiffness();
        let mut v = Self {
            check,
            tolerance: check.default_tolerance(),
            p: 2.0,
            form: form.clone(),
            stiffness,
            weight: Vec::new(),
            constant: 0.0,
            ball: None,
            lorentz: None,
            picone: None,
        };
        match check {
            Check::Poincare => v.constant = form.poincare_constant(),
            Check::HardyOrigin | Check::HardyBoundary => {
                let w = if check == Check::HardyOrigin {
                    origin_weight(&kernel, domain, max_radius(domain))
                } else {
                    boundary_weight(&kernel, domain)
                };
                let d: Vec<f64> = w.iter().map(|x| x * vol).collect();
                v.constant = min_generalized_eigenvalue(&v.stiffness, &d)?;
                v.weight = w;
            }
            Check::Symmetrization | Check::LorentzEmbedding => {
                if !kernel.radially_nonincreasing() {
                    return Err(Error::Hypothesis("kernel profile must be radially nonincreasing".into()));
                }
                let ball = BallGrid::matching(domain)?;
                let ball_form = FormMatrix::assemble(&ball.domain, &kernel)?;
                let a_ball = ball_form.stiffness();
                if check == Check::LorentzEmbedding {
                    let psi = ball.psi(&kernel);
                    let d: Vec<f64> = psi.iter().map(|x| x * vol).collect();
                    v.constant = min_generalized_eigenvalue(&a_ball, &d)?;
                    v.lorentz = Some(LorentzWeight::from_kernel(&kernel, &ball));
                }
                v.ball = Some((ball, a_ball));
            }
            Check::PiconeRemainder => {
                let floor = 0.25 * domain.h;
                let wfun = |x: [f64; 2]| {
                    let r = (x[0] * x[0] + x[1] * x[1]).sqrt().max(floor);
                    r.powf(-0.5 * domain.dimension as f64)
                };
                let w = GridFunction::from_fn(domain, wfun);
                // Potential V_i h^N = (L w)_i h^N / w_i, w = 0 beyond the shell.
                let lw = form.apply_l(&w)?;
                let pot: Vec<f64> = lw.iter().zip(&w.interior).map(|(l, wi)| l * vol / wi).collect();
                v.picone = Some((w.values(), pot));
            }
            Check::StroockVaropoulos | Check::AbsoluteValue => {}
        }
        Ok(v)
    }

    pub fn with_exponent(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    fn energy(&self, u: &[f64]) -> f64 {
        quad_form(&self.stiffness, u, u)
    }

    pub fn evaluate(&self, u: &GridFunction) -> Result<Report> {
        self.form.domain.check(u)?;
        if !u.is_zero_exterior() {
            return Err(Error::Domain("checks apply to zero-exterior functions".into()));
        }
        let x = &u.interior;
        let vol = self.form.domain.cell_volume();
        let tol = self.tolerance;
        let rep = match self.check {
            Check::Poincare => {
                let rhs = self.constant * vol * x.iter().map(|v| v * v).sum::<f64>();
                Report::new(self.energy(x), rhs, tol)
            }
            Check::HardyOrigin | Check::HardyBoundary => {
                let rhs = self.constant * vol * x.iter().zip(&self.weight).map(|(v, w)| v * v * w).sum::<f64>();
                Report::new(self.energy(x), rhs, tol)
            }
            Check::Symmetrization => {
                let (ball, a_ball) = self.ball.as_ref().unwrap();
                let star = rearrange_onto(ball, vol, u);
                let rhs = quad_form(a_ball, &star.values.interior, &star.values.interior);
                Report::new(self.energy(x), rhs, tol)
            }
            Check::LorentzEmbedding => {
                let weight = self.lorentz.as_ref().unwrap();
                let norm = lorentz_norm(u, vol, weight, 2.0)?;
                Report::new(self.energy(x), self.constant * norm * norm, tol)
            }
            Check::StroockVaropoulos => {
                let p = self.p;
                let c = 2.0 * (p - 1.0).sqrt() / p;
                let phi: Vec<f64> = x.iter().map(|v| c * v.abs().powf(0.5 * p)).collect();
                let f: Vec<f64> = x.iter().map(|v| v.abs().powf(p - 2.0) * v).collect();
                Report::new(quad_form(&self.stiffness, &f, x), self.energy(&phi), tol)
            }
            Check::AbsoluteValue => {
                let a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
                Report::new(self.energy(x), self.energy(&a), tol)
            }
            Check::PiconeRemainder => {
                let (w, pot) = self.picone.as_ref().unwrap();
                let n = x.len();
                let total = n + self.form.n_shell();
                let potential: f64 = x.iter().zip(pot).map(|(u, p)| u * u * p).sum();
                let mut remainder = 0.0;
                for i in 0..n {
                    for j in i + 1..total {
                        let uj = if j < n { x[j] } else { 0.0 };
                        let q = x[i] / w[i] - uj / w[j];
                        remainder += self.form.weight(i, j) * w[i] * w[j] * q * q;
                    }
                }
                Report::new(self.energy(x), potential + remainder, tol)
            }
        };
        Ok(rep)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SharpnessRow {
    pub h: f64,
    pub l1: f64,
    pub lorentz: f64,
}

/// Witness for the sharpness of the Lorentz embedding in 1D:
/// `v(s) = l(rho s/R) / (s psi(s)^1.5)` has bounded `L^1` norm while its
/// `L_{A,1}` norm grows as the grid resolves the origin.
pub fn sharpness_trend(kernel: &KernelSpec, hs: &[f64]) -> Result<Vec<SharpnessRow>> {
    if kernel.dimension != 1 {
        return Err(Error::Domain("sharpness witness is implemented in 1D".into()));
    }
    let rho = kernel.rho();
    hs.iter()
        .map(|&h| {
            let d = Domain::build(Shape::Interval { a: -1.0, b: 1.0 }, h, rho + h)?;
            let big_r = 2.0;
            let u = GridFunction::from_fn_interior(&d, |x| {
                let s = x[0].abs();
                let arg = (rho * s / big_r).clamp(1e-12 * rho, rho * (1.0 - 1e-12));
                let psi = kernel.mass_m(arg).unwrap_or(f64::NAN);
                kernel.near_profile(arg) / (s * psi.powf(1.5))
            });
            let ball = BallGrid::matching(&d)?;
            let weight = LorentzWeight::from_kernel(kernel, &ball);
            Ok(SharpnessRow {
                h,
                l1: u.lp_norm(&d, 1.0),
                lorentz: lorentz_norm(&u, d.cell_volume(), &weight, 1.0)?,
            })
        })
        .collect()
}
