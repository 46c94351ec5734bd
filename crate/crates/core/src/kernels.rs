//! Radial Lévy kernels of order near zero and their scalar functionals.
//!
//! A kernel is `K(z) = |z|^-N l(|z|)` on `0 < |z| < rho` with a tail law
//! beyond `rho`. Everything here is a pure function of an immutable
//! [`KernelSpec`].

use std::f64::consts::{E, LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_breaks, integrate_to_infinity, wynn_epsilon, QuadOptions};
use crate::special::{bessel_j0, one_minus_j0};

/// `log(C rho / s)` with `C = e^e` keeps `log log` at least 1 on `(0, rho)`.
const INV_LOG_LOG_SHIFT: f64 = E;

/// Slowly varying profile `l` on `(0, rho)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EllVariant {
    /// `l(s) = c`.
    Constant(f64),
    /// `l(s) = log^beta(2 rho / s)`, `beta >= -1`.
    LogPow(f64),
    /// `l(s) = 1 / (L log L)` with `L = log(e^e rho / s)`.
    InvLogLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllSpec {
    pub variant: EllVariant,
    pub rho: f64,
}

impl EllSpec {
    pub fn new(variant: EllVariant, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Domain(format!("singular range rho must be positive, got {rho}")));
        }
        match variant {
            EllVariant::Constant(c) if !(c > 0.0 && c.is_finite()) => {
                return Err(Error::Domain(format!("constant profile must be positive, got {c}")))
            }
            EllVariant::LogPow(beta) if !(beta >= -1.0 && beta.is_finite()) => {
                return Err(Error::Domain(format!("LogPow exponent must be >= -1, got {beta}")))
            }
            _ => {}
        }
        Ok(Self { variant, rho })
    }

    pub fn constant(rho: f64) -> Self {
        Self {
            variant: EllVariant::Constant(1.0),
            rho,
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        match self.variant {
            EllVariant::Constant(c) => c,
            EllVariant::LogPow(beta) => (2.0 * self.rho / s).ln().powf(beta),
            EllVariant::InvLogLog => {
                let l = INV_LOG_LOG_SHIFT + (self.rho / s).ln();
                1.0 / (l * l.ln())
            }
        }
    }

    /// Slow variation sampled along `s_k = rho 2^-k`: the ratios
    /// `l(lambda s)/l(s)` for `lambda` in {1/2, 2} end inside `[1-tol, 1+tol]`.
    pub fn is_slowly_varying(&self, tol: f64) -> bool {
        let mut last_ok = false;
        for k in 2..=60 {
            let s = self.rho * 2f64.powi(-k);
            let r_half = self.value(0.5 * s) / self.value(s);
            let r_two = self.value(2.0 * s) / self.value(s);
            last_ok = (r_half - 1.0).abs() <= tol && (r_two - 1.0).abs() <= tol;
        }
        last_ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Tail {
    /// Compact support: `K = 0` for `|z| >= rho`.
    Zero,
    /// `K(z) = K(rho-) (rho/|z|)^(N + alpha2)` beyond `rho`.
    PowerDecay { alpha2: f64 },
    /// Fractional-type kernel: `|z|^(-N-alpha1)` inside `rho`, continuous
    /// power decay with exponent `N + alpha2` outside. Overrides `l`.
    PiecewisePower { alpha1: f64, alpha2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub dimension: usize,
    pub ell: EllSpec,
    pub tail: Tail,
}

/// `(N g(t), t g'(t))` at one sample radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthSample {
    pub t: f64,
    pub n_g: f64,
    pub t_dg: f64,
}

impl GrowthSample {
    pub fn holds(&self) -> bool {
        self.n_g <= self.t_dg * (1.0 + 1e-6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingSigma {
    pub lambdas: [f64; 3],
    pub gammas: [f64; 3],
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulusValue {
    pub value: f64,
    pub radius: f64,
    pub clamped: bool,
}

impl KernelSpec {
    pub fn new(dimension: usize, ell: EllSpec, tail: Tail) -> Result<Self> {
        if dimension != 1 && dimension != 2 {
            return Err(Error::Domain(format!("dimension must be 1 or 2, got {dimension}")));
        }
        match tail {
            Tail::Zero => {}
            Tail::PowerDecay { alpha2 } => {
                if !(alpha2 > 0.0 && alpha2.is_finite()) {
                    return Err(Error::Domain(format!("tail exponent alpha2 must be positive, got {alpha2}")));
                }
            }
            Tail::PiecewisePower { alpha1, alpha2 } => {
                if !(alpha1 > 0.0 && alpha1 < 2.0) {
                    return Err(Error::Domain(format!("alpha1 must lie in (0,2), got {alpha1}")));
                }
                if !(alpha2 > 0.0 && alpha2.is_finite()) {
                    return Err(Error::Domain(format!("tail exponent alpha2 must be positive, got {alpha2}")));
                }
            }
        }
        Ok(Self { dimension, ell, tail })
    }

    /// `K(z) = |z|^(-N-alpha)` on all of `R^N`.
    pub fn pure_power(dimension: usize, alpha: f64) -> Result<Self> {
        Self::new(
            dimension,
            EllSpec::constant(1.0),
            Tail::PiecewisePower {
                alpha1: alpha,
                alpha2: alpha,
            },
        )
    }

    pub fn rho(&self) -> f64 {
        self.ell.rho
    }

    fn n(&self) -> f64 {
        self.dimension as f64
    }

    /// Surface measure of the unit sphere: 2 in 1D, `2 pi` in 2D.
    pub fn sphere_area(&self) -> f64 {
        if self.dimension == 1 {
            2.0
        } else {
            2.0 * PI
        }
    }

    /// `s^N K(s)` for `0 < s < rho`: the effective profile.
    pub fn near_profile(&self, s: f64) -> f64 {
        match self.tail {
            Tail::PiecewisePower { alpha1, .. } => s.powf(-alpha1),
            _ => self.ell.value(s),
        }
    }

    fn near_at_rho(&self) -> f64 {
        self.near_profile(self.rho())
    }

    /// Radial profile `K(r)`.
    pub fn radial(&self, r: f64) -> f64 {
        let rho = self.rho();
        if r < rho {
            return self.near_profile(r) * r.powi(-(self.dimension as i32));
        }
        let k_rho = self.near_at_rho() * rho.powi(-(self.dimension as i32));
        match self.tail {
            Tail::Zero => 0.0,
            Tail::PowerDecay { alpha2 } | Tail::PiecewisePower { alpha2, .. } => {
                k_rho * (rho / r).powf(self.n() + alpha2)
            }
        }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.radial(r)
    }

    fn tail_exponent(&self) -> Option<f64> {
        match self.tail {
            Tail::Zero => None,
            Tail::PowerDecay { alpha2 } | Tail::PiecewisePower { alpha2, .. } => Some(alpha2),
        }
    }

    /// `int_t^inf K(r) r^(N-1) dr`; multiply by [`Self::sphere_area`] for the
    /// mass of `{|z| > t}`.
    pub fn radial_upper_mass(&self, t: f64) -> f64 {
        let rho = self.rho();
        let tail = match self.tail_exponent() {
            None => 0.0,
            Some(a) => self.near_at_rho() / a * (rho / t.max(rho)).powf(a),
        };
        if t < rho {
            self.mass_closed(t) + tail
        } else {
            tail
        }
    }

    /// Mass of `{|z| > t}`.
    pub fn upper_mass(&self, t: f64) -> f64 {
        self.sphere_area() * self.radial_upper_mass(t)
    }

    /// Lévy integrability `int min(1,|z|^2) K(z) dz`, by quadrature.
    pub fn levy_integral(&self) -> Result<f64> {
        let opts = QuadOptions::rel(1e-10);
        let rho = self.rho();
        let nm1 = self.dimension as i32 - 1;
        let w = |r: f64| r.min(1.0).powi(2) * self.radial(r) * r.powi(nm1);
        let mut pts = vec![0.0, rho, 1.0];
        pts.sort_by(f64::total_cmp);
        let far = pts[2];
        let near = integrate_breaks(w, &pts, opts)?.value;
        let tail = match self.tail {
            Tail::Zero => 0.0,
            _ => integrate_to_infinity(w, far, opts)?.value,
        };
        let v = self.sphere_area() * (near + tail);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Hypothesis("kernel is not a Lévy kernel".into()))
        }
    }

    /// Non-integrability at the origin, sampled: increments of `M` along
    /// `r_k = rho 2^-k` must not decay geometrically.
    pub fn is_nonintegrable(&self) -> bool {
        let rho = self.rho();
        let m = |k: i32| self.mass_closed(rho * 2f64.powi(-k));
        let inc = |k: i32| m(k + 1) - m(k);
        let (d1, d2) = (inc(100), inc(200));
        d1 > 0.0 && d2 > 0.0 && d2 / d1 >= 0.25
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        if !(r > 0.0 && r <= self.rho()) {
            return Err(Error::Domain(format!("radius {r} outside (0, rho = {}]", self.rho())));
        }
        Ok(())
    }

    fn mass_closed(&self, r: f64) -> f64 {
        let rho = self.rho();
        if r >= rho {
            return 0.0;
        }
        match self.tail {
            Tail::PiecewisePower { alpha1, .. } => (r.powf(-alpha1) - rho.powf(-alpha1)) / alpha1,
            _ => match self.ell.variant {
                EllVariant::Constant(c) => c * (rho / r).ln(),
                EllVariant::LogPow(beta) => {
                    let l = (2.0 * rho / r).ln();
                    if (beta + 1.0).abs() < 1e-14 {
                        (l / LN_2).ln()
                    } else {
                        (l.powf(beta + 1.0) - LN_2.powf(beta + 1.0)) / (beta + 1.0)
                    }
                }
                EllVariant::InvLogLog => {
                    let l = INV_LOG_LOG_SHIFT + (rho / r).ln();
                    l.ln().ln()
                }
            },
        }
    }

    /// `M(r) = int_r^rho l(s)/s ds`, closed form for every built-in profile.
    pub fn mass_m(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        Ok(self.mass_closed(r))
    }

    /// `M(r)` by quadrature in the variable `u = log s`.
    pub fn mass_m_quadrature(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        let v = integrate(
            |u: f64| self.near_profile(u.exp()),
            r.ln(),
            self.rho().ln(),
            QuadOptions::rel(1e-12),
        )?;
        Ok(v.value)
    }

    /// `A(R) = int_0^R s^(nu-1) l(s) ds`.
    pub fn holder_mass_a(&self, nu: f64, big_r: f64) -> Result<f64> {
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::Domain(format!("Hölder exponent must lie in (0,1), got {nu}")));
        }
        self.check_radius(big_r)?;
        match self.tail {
            Tail::PiecewisePower { alpha1, .. } => {
                if nu <= alpha1 {
                    return Err(Error::Domain(format!(
                        "A(R) diverges for power kernels with nu = {nu} <= alpha1 = {alpha1}"
                    )));
                }
                return Ok(big_r.powf(nu - alpha1) / (nu - alpha1));
            }
            _ => {}
        }
        if let EllVariant::Constant(c) = self.ell.variant {
            return Ok(c * big_r.powf(nu) / nu);
        }
        // s = t^(1/nu) turns s^(nu-1) ds into dt/nu.
        let v = integrate(
            |t: f64| self.ell.value(t.powf(1.0 / nu)),
            0.0,
            big_r.powf(nu),
            QuadOptions::rel(1e-12),
        )?;
        Ok(v.value / nu)
    }

    fn modulus_g(&self, nu: f64, r: f64) -> Result<f64> {
        let a = self.holder_mass_a(nu, r)?;
        let m = self.mass_closed(r);
        Ok((a / m).powf(1.0 / nu))
    }

    /// `varpi(s) = M(g^-1(s))` with `g(R) = (A(R)/M(R))^(1/nu)`.
    pub fn modulus_omega(&self, nu: f64, s: f64) -> Result<ModulusValue> {
        let rho = self.rho();
        let lo_r = rho * 1e-12;
        let hi_r = rho * (1.0 - 1e-9);
        // Monotonicity of g on a log grid.
        let samples = 200;
        let mut prev = -1.0;
        for k in 0..=samples {
            let r = lo_r * (hi_r / lo_r).powf(k as f64 / samples as f64);
            let g = self.modulus_g(nu, r)?;
            if !(g > prev) {
                return Err(Error::Hypothesis(format!("g(R) is not strictly increasing near R = {r:e}")));
            }
            prev = g;
        }
        let g_lo = self.modulus_g(nu, lo_r)?;
        let g_hi = self.modulus_g(nu, hi_r)?;
        if s <= g_lo {
            return Ok(ModulusValue {
                value: self.mass_closed(lo_r),
                radius: lo_r,
                clamped: true,
            });
        }
        if s >= g_hi {
            return Ok(ModulusValue {
                value: self.mass_closed(hi_r),
                radius: hi_r,
                clamped: true,
            });
        }
        let (mut a, mut b) = (lo_r.ln(), hi_r.ln());
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if self.modulus_g(nu, mid.exp())? < s {
                a = mid;
            } else {
                b = mid;
            }
            if b - a < 1e-15 * a.abs().max(1.0) {
                break;
            }
        }
        let r = (0.5 * (a + b)).exp();
        Ok(ModulusValue {
            value: self.mass_closed(r),
            radius: r,
            clamped: false,
        })
    }

    /// Fourier multiplier `m(xi) = int (1 - cos(z.xi)) K(z) dz`.
    pub fn multiplier(&self, xi: &[f64]) -> Result<f64> {
        let k = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.multiplier_radial(k)
    }

    /// Multiplier as a function of `|xi|`, with default tolerance.
    pub fn multiplier_radial(&self, k: f64) -> Result<f64> {
        self.multiplier_radial_tol(k, 1e-10)
    }

    pub fn multiplier_radial_tol(&self, k: f64, rel_tol: f64) -> Result<f64> {
        if k == 0.0 {
            return Ok(0.0);
        }
        let rho = self.rho();
        let opts = QuadOptions::rel(rel_tol);
        let dim = self.dimension;
        let osc = move |t: f64| -> f64 {
            if dim == 1 {
                let s = (0.5 * t).sin();
                2.0 * s * s
            } else {
                one_minus_j0(t)
            }
        };
        // radial density q(r) with m = int_0^inf osc(k r) q(r) dr
        let area = self.sphere_area();
        let q = |r: f64| area * self.radial(r) * r.powi(dim as i32 - 1);

        let period = PI / k;
        let mut pts = vec![0.0];
        let mut j = 1.0;
        while j * period < rho {
            pts.push(j * period);
            j += 1.0;
        }
        pts.push(rho);
        let near = integrate_breaks(|r| osc(k * r) * q(r), &pts, opts)?.value;
        if self.tail_exponent().is_none() {
            return Ok(near);
        }
        // Beyond rho: int q - int (1 - osc) q; the second term oscillates with
        // zeros near (j pi + phase)/k and is summed panel-wise with
        // epsilon acceleration.
        let smooth = area * self.radial_upper_mass(rho);
        let cosine = |t: f64| if dim == 1 { t.cos() } else { bessel_j0(t) };
        let phase = if dim == 1 { 0.5 * PI } else { 0.75 * PI };
        let mut first = ((k * rho - phase) / PI).ceil();
        if first * PI + phase <= k * rho {
            first += 1.0;
        }
        let mut edges = vec![rho];
        for i in 0..80 {
            edges.push((phase + (first + i as f64) * PI) / k);
        }
        let mut partial = Vec::with_capacity(edges.len());
        let mut acc = 0.0;
        let mut estimate = 0.0;
        for (i, w) in edges.windows(2).enumerate() {
            acc += integrate(|r| cosine(k * r) * q(r), w[0], w[1], opts)?.value;
            partial.push(acc);
            if i >= 12 && i % 4 == 0 {
                let (est, err) = wynn_epsilon(&partial);
                estimate = est;
                if err <= rel_tol * (smooth - est).abs().max(near.abs()) * 0.1 {
                    return Ok(near + smooth - est);
                }
            }
        }
        let (est, err) = wynn_epsilon(&partial);
        if err > 1e3 * rel_tol * (near + smooth - est).abs() {
            return Err(Error::Quadrature {
                value: near + smooth - estimate,
                error: err,
                subdivisions: partial.len(),
            });
        }
        Ok(near + smooth - est)
    }

    /// `g(t) = int_{|xi| <= t} m(xi) dxi`.
    pub fn spectral_mass_g(&self, t: f64) -> Result<f64> {
        self.spectral_mass_g_tol(t, 1e-6)
    }

    pub fn spectral_mass_g_tol(&self, t: f64, rel_tol: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Domain(format!("frequency radius must be nonnegative, got {t}")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let inner = (rel_tol * 1e-3).max(1e-12);
        let dim = self.dimension;
        let err = std::cell::Cell::new(None);
        let v = integrate(
            |x: f64| match self.multiplier_radial_tol(x, inner) {
                Ok(m) => {
                    if dim == 1 {
                        2.0 * m
                    } else {
                        2.0 * PI * x * m
                    }
                }
                Err(e) => {
                    err.set(Some(e));
                    0.0
                }
            },
            0.0,
            t,
            QuadOptions::rel(rel_tol),
        )?;
        if let Some(e) = err.take() {
            return Err(e);
        }
        Ok(v.value)
    }

    /// Samples `N g(t) <= t g'(t)` with a central difference for `g'`.
    pub fn growth_condition(&self, ts: &[f64]) -> Result<Vec<GrowthSample>> {
        let tol = 1e-10;
        ts.iter()
            .map(|&t| {
                let d = 1e-3 * t;
                let g = self.spectral_mass_g_tol(t, tol)?;
                let gp = (self.spectral_mass_g_tol(t + d, tol)? - self.spectral_mass_g_tol(t - d, tol)?) / (2.0 * d);
                Ok(GrowthSample {
                    t,
                    n_g: self.n() * g,
                    t_dg: t * gp,
                })
            })
            .collect()
    }

    /// `gamma(lambda) = lambda^-N sup_z K(z/lambda)/K(z)` on a log grid.
    pub fn gamma(&self, lambda: f64) -> Result<f64> {
        let rho = self.rho();
        let mut zs: Vec<f64> = (0..=3000)
            .map(|i| rho * 1e-6 * 1e9f64.powf(i as f64 / 3000.0))
            .collect();
        for c in [rho, lambda * rho] {
            for f in [1.0 - 1e-12, 1.0 - 1e-9, 1.0 + 1e-12, 1.0 + 1e-9] {
                zs.push(c * f);
            }
        }
        let mut sup = 0.0f64;
        for &z in &zs {
            let num = self.radial(z / lambda);
            let den = self.radial(z);
            if den == 0.0 {
                if num > 0.0 {
                    return Err(Error::GammaInfinite(z));
                }
                continue;
            }
            sup = sup.max(num / den);
        }
        Ok(lambda.powi(-(self.dimension as i32)) * sup)
    }

    /// Scaling exponent `sigma = gamma'(1+)` by one Richardson level with
    /// `h = 1e-3`.
    pub fn scaling_sigma(&self) -> Result<ScalingSigma> {
        let h = 1e-3;
        let lambdas = [1.0 + h, 1.0 + 2.0 * h, 1.0 + 4.0 * h];
        let gammas = [self.gamma(lambdas[0])?, self.gamma(lambdas[1])?, self.gamma(lambdas[2])?];
        let d = |g: f64, step: f64| (g - 1.0) / step;
        let sigma = 2.0 * d(gammas[0], h) - d(gammas[1], 2.0 * h);
        Ok(ScalingSigma {
            lambdas,
            gammas,
            sigma,
        })
    }

    /// `l` nonincreasing on `(0, rho)`, sampled.
    pub fn ell_nonincreasing(&self) -> bool {
        let rho = self.rho();
        let mut prev = f64::INFINITY;
        for i in 0..=2000 {
            let s = rho * 1e-12 * 1e12f64.powf(i as f64 / 2000.0) * (1.0 - 1e-12);
            let v = self.near_profile(s);
            if v > prev * (1.0 + 1e-12) {
                return false;
            }
            prev = v;
        }
        true
    }

    /// `K` radially nonincreasing, sampled on `[1e-12 rho, 1e3 rho]`.
    pub fn radially_nonincreasing(&self) -> bool {
        let rho = self.rho();
        let mut prev = f64::INFINITY;
        for i in 0..=3000 {
            let r = rho * 1e-12 * 1e15f64.powf(i as f64 / 3000.0);
            let v = self.radial(r);
            if v > prev * (1.0 + 1e-12) {
                return false;
            }
            prev = v;
        }
        true
    }

    /// Boundary-modulus diagnostic `int_0^rho w0(s) l(s)/s ds`; `None` when
    /// the integral diverges.
    pub fn perimeter_integral<F: Fn(f64) -> f64>(&self, modulus: F) -> Option<f64> {
        let rho = self.rho();
        // u = -log(s/rho), s = rho e^-u; ds/s = -du
        let f = |u: f64| {
            let s = rho * (-u).exp();
            modulus(s) * self.near_profile(s)
        };
        // Partial integrals over [0, U] for growing U; divergence shows up as
        // a steady growth of the increments.
        let mut total = 0.0;
        let mut prev_inc = f64::INFINITY;
        let mut a = 0.0;
        let mut b = 1.0;
        let mut growing = 0;
        for _ in 0..40 {
            let inc = integrate(f, a, b, QuadOptions::rel(1e-10)).ok()?.value;
            total += inc;
            if inc >= 0.75 * prev_inc {
                growing += 1;
            } else {
                growing = 0;
            }
            if growing >= 10 {
                return None;
            }
            prev_inc = inc;
            a = b;
            b *= 2.0;
            if inc <= 1e-12 * total.abs() {
                return Some(total);
            }
        }
        // Up to s = rho e^-2^40 the increments decayed; accept.
        Some(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn const_kernel(dim: usize, tail: Tail) -> KernelSpec {
        KernelSpec::new(dim, EllSpec::constant(1.0), tail).unwrap()
    }

    fn log_kernel(beta: f64) -> KernelSpec {
        KernelSpec::new(1, EllSpec::new(EllVariant::LogPow(beta), 1.0).unwrap(), Tail::Zero).unwrap()
    }

    #[test]
    fn mass_constant_profile() {
        let k = const_kernel(1, Tail::Zero);
        assert!((k.mass_m(0.1).unwrap() - 10f64.ln()).abs() < 1e-14);
        assert_eq!(k.mass_m(1.0).unwrap(), 0.0);
    }

    #[test]
    fn mass_log_profile_closed_form_and_quadrature() {
        let k = log_kernel(1.0);
        let expected = 0.5 * (10f64.ln().powi(2) - LN_2.powi(2));
        assert!((k.mass_m(0.2).unwrap() - expected).abs() < 1e-13);
        assert!((k.mass_m_quadrature(0.2).unwrap() - expected).abs() < 1e-11);
        assert!((expected - 2.41072).abs() < 1e-5);
    }

    #[test]
    fn mass_closed_forms_agree_with_quadrature() {
        let kernels = [
            log_kernel(-1.0),
            log_kernel(0.5),
            log_kernel(2.0),
            KernelSpec::new(2, EllSpec::new(EllVariant::InvLogLog, 0.5).unwrap(), Tail::Zero).unwrap(),
            KernelSpec::pure_power(1, 0.3).unwrap(),
        ];
        for k in &kernels {
            for &r in &[1e-6, 1e-3, 0.01, 0.3] {
                let r = r * k.rho();
                let a = k.mass_m(r).unwrap();
                let b = k.mass_m_quadrature(r).unwrap();
                assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{k:?} r={r}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn mass_rejects_out_of_range() {
        let k = const_kernel(1, Tail::Zero);
        assert!(matches!(k.mass_m(0.0), Err(Error::Domain(_))));
        assert!(matches!(k.mass_m(1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn holder_mass_constant() {
        let k = const_kernel(1, Tail::Zero);
        assert!((k.holder_mass_a(0.5, 0.25).unwrap() - 1.0).abs() < 1e-14);
        assert!(k.holder_mass_a(0.5, 1e-30).unwrap() < 1e-14);
        assert!(k.holder_mass_a(1.0, 0.5).is_err());
    }

    #[test]
    fn holder_mass_log_matches_integration_by_parts() {
        // int_0^R s^(nu-1) log(2/s) ds = R^nu/nu log(2/R) + R^nu/nu^2
        let k = log_kernel(1.0);
        let (nu, r): (f64, f64) = (0.5, 0.25);
        let oracle = r.powf(nu) / nu * (2.0 / r).ln() + r.powf(nu) / (nu * nu);
        let v = k.holder_mass_a(nu, r).unwrap();
        assert!((v - oracle).abs() < 1e-11, "{v} vs {oracle}");
    }

    #[test]
    fn modulus_round_trip_constant() {
        let k = const_kernel(1, Tail::Zero);
        let nu = 0.5;
        for &r in &[1e-6f64, 1e-4, 1e-2] {
            let g = r / (0.5 * (1.0 / r).ln()).powi(2);
            let w = k.modulus_omega(nu, g).unwrap();
            assert!(!w.clamped);
            assert!((w.value - (1.0 / r).ln()).abs() < 1e-9, "{w:?}");
        }
        let g_half = (k.holder_mass_a(nu, 0.5).unwrap() / k.mass_m(0.5).unwrap()).powf(1.0 / nu);
        let w = k.modulus_omega(nu, g_half).unwrap();
        assert!((w.value - k.mass_m(0.5).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn modulus_log_profile_matches_tabulation() {
        let k = log_kernel(1.0);
        let nu = 0.3;
        let s = 1e-3;
        let w = k.modulus_omega(nu, s).unwrap();
        // Dense tabulation of g on a log grid, then log-linear interpolation.
        let n = 20000;
        let grid: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let r = 1e-12 * (0.999_999f64 / 1e-12).powf(i as f64 / n as f64);
                let g = (k.holder_mass_a(nu, r).unwrap() / k.mass_m(r).unwrap()).powf(1.0 / nu);
                (r, g)
            })
            .collect();
        let idx = grid.windows(2).position(|w| w[0].1 <= s && s <= w[1].1).unwrap();
        let (r0, g0) = grid[idx];
        let (r1, g1) = grid[idx + 1];
        let t = (s.ln() - g0.ln()) / (g1.ln() - g0.ln());
        let r = (r0.ln() + t * (r1.ln() - r0.ln())).exp();
        let oracle = k.mass_m(r).unwrap();
        assert!((w.value - oracle).abs() < 1e-6 * oracle, "{} vs {oracle}", w.value);
    }

    #[test]
    fn modulus_clamps_outside_range() {
        let k = const_kernel(1, Tail::Zero);
        let w = k.modulus_omega(0.5, 1e-300).unwrap();
        assert!(w.clamped);
        let w = k.modulus_omega(0.5, 1e300).unwrap();
        assert!(w.clamped);
    }

    // Cin(x) = gamma + ln x - Ci(x) = int_0^x (1 - cos t)/t dt, power series.
    fn cin(x: f64) -> f64 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            let kf = k as f64;
            term *= -x * x / ((2.0 * kf - 1.0) * (2.0 * kf));
            sum -= term / (2.0 * kf);
        }
        sum
    }

    #[test]
    fn multiplier_constant_zero_tail_matches_cosine_integral() {
        let k = const_kernel(1, Tail::Zero);
        let oracle = 2.0 * cin(10.0);
        // 2 (ln 10 + gamma - Ci(10)) with Ci(10) = -0.045456433004455372635
        let reference = 2.0 * (10f64.ln() + crate::special::EULER_GAMMA + 0.045_456_433_004_455_37);
        assert!((oracle - reference).abs() < 1e-12);
        let m = k.multiplier(&[10.0]).unwrap();
        assert!((m - oracle).abs() < 1e-9, "{m} vs {oracle}");
    }

    #[test]
    fn multiplier_zero_and_even() {
        let k = const_kernel(2, Tail::PowerDecay { alpha2: 0.5 });
        assert_eq!(k.multiplier(&[0.0, 0.0]).unwrap(), 0.0);
        let a = k.multiplier(&[1.5, -2.0]).unwrap();
        let b = k.multiplier(&[-1.5, 2.0]).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
    }

    #[test]
    fn multiplier_pure_power_homogeneity() {
        for &alpha in &[0.3, 0.5, 0.7, 1.2] {
            let k = KernelSpec::pure_power(1, alpha).unwrap();
            for &xi in &[0.7, 3.0, 20.0] {
                let r = k.multiplier_radial(2.0 * xi).unwrap() / k.multiplier_radial(xi).unwrap();
                assert!((r - 2f64.powf(alpha)).abs() < 1e-6, "alpha={alpha} xi={xi}: {r}");
            }
        }
    }

    #[test]
    fn multiplier_pure_power_2d_homogeneity() {
        let k = KernelSpec::pure_power(2, 0.5).unwrap();
        let r = k.multiplier_radial(6.0).unwrap() / k.multiplier_radial(3.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-6, "{r}");
    }

    #[test]
    fn multiplier_2d_matches_cartesian_quadrature() {
        // Direct 2D integral in polar coordinates with the angle done numerically.
        let k = const_kernel(2, Tail::Zero);
        let xi = 4.0;
        let opts = QuadOptions::rel(1e-11);
        let direct = integrate(
            |r: f64| {
                let ang = integrate(|t: f64| 1.0 - (xi * r * t.cos()).cos(), 0.0, 2.0 * PI, opts)
                    .unwrap()
                    .value;
                ang * k.radial(r) * r
            },
            0.0,
            1.0,
            opts,
        )
        .unwrap()
        .value;
        let m = k.multiplier(&[xi, 0.0]).unwrap();
        assert!((m - direct).abs() < 1e-8 * direct, "{m} vs {direct}");
    }

    #[test]
    fn spectral_mass_monotone_and_zero() {
        let k = const_kernel(1, Tail::PowerDecay { alpha2: 0.5 });
        assert_eq!(k.spectral_mass_g(0.0).unwrap(), 0.0);
        let ts: Vec<f64> = (0..21).map(|i| 0.25 * i as f64).collect();
        let gs: Vec<f64> = ts.iter().map(|&t| k.spectral_mass_g(t).unwrap()).collect();
        for w in gs.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn spectral_mass_matches_riemann_sum() {
        let k = const_kernel(1, Tail::PowerDecay { alpha2: 0.5 });
        let t = 5.0;
        let n = 400;
        let dx = t / n as f64;
        let riemann: f64 = (0..n)
            .map(|i| 2.0 * k.multiplier_radial_tol((i as f64 + 0.5) * dx, 1e-8).unwrap() * dx)
            .sum();
        let g = k.spectral_mass_g(t).unwrap();
        assert!((g - riemann).abs() < 1e-2 * g, "{g} vs {riemann}");
    }

    #[test]
    fn growth_condition_holds_for_constant_profile() {
        let k = const_kernel(1, Tail::PowerDecay { alpha2: 0.5 });
        for s in k.growth_condition(&[0.5, 1.5, 4.0]).unwrap() {
            assert!(s.holds(), "{s:?}");
        }
    }

    #[test]
    fn sigma_pure_power() {
        for &alpha in &[0.3, 0.8, 1.5] {
            let k = KernelSpec::pure_power(1, alpha).unwrap();
            let s = k.scaling_sigma().unwrap();
            assert!((s.sigma - alpha).abs() < 1e-4, "{alpha}: {s:?}");
            for (l, g) in s.lambdas.iter().zip(s.gammas) {
                assert!((g - l.powf(alpha)).abs() < 1e-12);
            }
        }
        let k = KernelSpec::pure_power(1, 0.3).unwrap();
        assert!((k.gamma(1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sigma_piecewise_is_max_exponent() {
        let k = KernelSpec::new(
            2,
            EllSpec::constant(1.0),
            Tail::PiecewisePower {
                alpha1: 0.4,
                alpha2: 0.9,
            },
        )
        .unwrap();
        let s = k.scaling_sigma().unwrap();
        assert!((s.sigma - 0.9).abs() < 1e-3, "{s:?}");
    }

    #[test]
    fn sigma_compact_support_is_infinite() {
        let k = const_kernel(1, Tail::Zero);
        assert!(matches!(k.scaling_sigma(), Err(Error::GammaInfinite(_))));
    }

    #[test]
    fn levy_and_nonintegrability() {
        for k in [
            const_kernel(1, Tail::Zero),
            const_kernel(2, Tail::PowerDecay { alpha2: 0.5 }),
            log_kernel(-1.0),
            KernelSpec::new(1, EllSpec::new(EllVariant::InvLogLog, 1.0).unwrap(), Tail::Zero).unwrap(),
        ] {
            assert!(k.levy_integral().unwrap().is_finite());
            assert!(k.is_nonintegrable(), "{k:?}");
        }
    }

    #[test]
    fn slow_variation_of_builtin_profiles() {
        for v in [EllVariant::Constant(2.0), EllVariant::LogPow(1.0), EllVariant::LogPow(-1.0), EllVariant::InvLogLog] {
            assert!(EllSpec::new(v, 1.0).unwrap().is_slowly_varying(0.05), "{v:?}");
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(EllSpec::new(EllVariant::LogPow(-1.5), 1.0).is_err());
        assert!(EllSpec::new(EllVariant::Constant(1.0), 0.0).is_err());
        assert!(KernelSpec::new(3, EllSpec::constant(1.0), Tail::Zero).is_err());
    }

    #[test]
    fn perimeter_diagnostic() {
        let k = KernelSpec::new(1, EllSpec::new(EllVariant::LogPow(-1.0), 0.5).unwrap(), Tail::Zero).unwrap();
        // l(s) ~ (log 1/s)^-1 and w0(s) = (log 1/s)^-1: integrable.
        let finite = k.perimeter_integral(|s: f64| 1.0 / (1.0 / s).ln());
        assert!(finite.is_some());
        // Constant modulus against a constant profile: log-divergent.
        let kc = const_kernel(1, Tail::Zero);
        assert!(kc.perimeter_integral(|_| 1.0).is_none());
    }
}
