//! Discrete Dirichlet form on piecewise-constant grid functions.
//!
//! The kernel is translation invariant and all cells share one lattice, so a
//! pair weight `w_ij` only depends on the integer offset between the cells.
//! Weights are computed once per offset from
//! `w(d) = int K(z) prod_k (h - |z_k - d_k h|)_+ dz`.

use std::cell::Cell as StdCell;
use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::domain::{Domain, GridFunction, Shape};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::quad::{integrate, integrate_breaks, integrate_to_infinity, QuadOptions};
use crate::special::ellip_k_complementary;

const WEIGHT_TOL_1D: f64 = 1e-13;
const WEIGHT_TOL_2D: f64 = 1e-11;

/// Which pair set an energy runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKind {
    /// Pairs in `Q_Omega`: interior-interior and interior-exterior.
    Full,
    /// Interior-interior pairs only.
    Censored,
    /// Every pair of cells, shell-shell included.
    Global,
}

/// Runs a nested quadrature whose inner call may fail; the first error wins.
struct Failure(StdCell<Option<Error>>);

impl Failure {
    fn new() -> Self {
        Self(StdCell::new(None))
    }

    fn guard(&self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                let prev = self.0.take();
                self.0.set(Some(prev.unwrap_or(e)));
                0.0
            }
        }
    }

    fn finish(self, v: Result<f64>) -> Result<f64> {
        if let Some(e) = self.0.take() {
            return Err(e);
        }
        v
    }
}

fn hat(t: f64, h: f64) -> f64 {
    (h - t.abs()).max(0.0)
}

/// Weight between two cells whose lattice indices differ by `d`.
pub fn offset_weight(kernel: &KernelSpec, h: f64, d: [i64; 2]) -> Result<f64> {
    let rho = kernel.rho();
    if kernel.dimension == 1 {
        let d = d[0].unsigned_abs() as f64;
        if d == 0.0 {
            return Err(Error::Domain("self-pair weight is never formed".into()));
        }
        let (a, c, b) = ((d - 1.0) * h, d * h, (d + 1.0) * h);
        let mut pts = vec![a, c, b];
        if rho > a && rho < b {
            pts.push(rho);
        }
        pts.sort_by(f64::total_cmp);
        let r = integrate_breaks(
            |z| kernel.radial(z) * hat(z - c, h),
            &pts,
            QuadOptions::rel(WEIGHT_TOL_1D),
        )?;
        return Ok(r.value);
    }
    // Canonical offset: d0 >= d1 >= 0, d0 >= 1.
    let (mut d0, mut d1) = (d[0].unsigned_abs() as f64, d[1].unsigned_abs() as f64);
    if d1 > d0 {
        std::mem::swap(&mut d0, &mut d1);
    }
    if d0 == 0.0 {
        return Err(Error::Domain("self-pair weight is never formed".into()));
    }
    let (c0, c1) = (d0 * h, d1 * h);
    let mut total = 0.0;
    for (x0, x1) in [(c0 - h, c0), (c0, c0 + h)] {
        for (y0, y1) in [(c1 - h, c1), (c1, c1 + h)] {
            total += rect_integral(kernel, [x0, y0], [x1, y1], |z: [f64; 2]| {
                hat(z[0] - c0, h) * hat(z[1] - c1, h)
            })?;
        }
    }
    Ok(total)
}

/// `int_R K(z) p(z) dz` over an axis-aligned rectangle in the half plane
/// `x >= 0`; polar coordinates about the origin whenever the origin touches
/// the rectangle or the circle `|z| = rho` crosses it.
fn rect_integral<P: Fn([f64; 2]) -> f64 + Sync>(kernel: &KernelSpec, lo: [f64; 2], hi: [f64; 2], p: P) -> Result<f64> {
    let rho = kernel.rho();
    let dmin = {
        let dx = lo[0].max(0.0).max(-hi[0]);
        let dy = (lo[1].max(0.0)).max(-hi[1]);
        (dx * dx + dy * dy).sqrt()
    };
    let corners = [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
    let dmax = corners
        .iter()
        .map(|c| (c[0] * c[0] + c[1] * c[1]).sqrt())
        .fold(0.0, f64::max);
    // Absolute floor from the size of the whole piece, so slivers whose
    // contribution is pure rounding noise do not stall the inner rules.
    let mid = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let k_ref = kernel.radial((mid[0] * mid[0] + mid[1] * mid[1]).sqrt()).max(if dmin > 0.0 {
        kernel.radial(dmin)
    } else {
        0.0
    });
    let scale = (hi[0] - lo[0]) * (hi[1] - lo[1]) * p(mid) * k_ref;
    let opts = QuadOptions::rel(WEIGHT_TOL_2D).with_abs(1e-3 * WEIGHT_TOL_2D * scale);
    let fail = Failure::new();
    if dmin > 0.0 && (dmax <= rho || dmin >= rho || kernel.radial(dmin) == kernel.radial(dmax)) {
        let v = integrate(
            |x: f64| {
                fail.guard(
                    integrate(|y: f64| kernel.radial((x * x + y * y).sqrt()) * p([x, y]), lo[1], hi[1], opts)
                        .map(|r| r.value),
                )
            },
            lo[0],
            hi[0],
            opts,
        )
        .map(|r| r.value);
        return fail.finish(v);
    }
    // Angular breakpoints: corners and crossings of |z| = rho with the edges.
    let mut thetas: Vec<f64> = corners
        .iter()
        .filter(|c| c[0] != 0.0 || c[1] != 0.0)
        .map(|c| c[1].atan2(c[0]))
        .collect();
    for x in [lo[0], hi[0]] {
        if x.abs() < rho {
            let y = (rho * rho - x * x).sqrt();
            for y in [y, -y] {
                if y > lo[1] && y < hi[1] {
                    thetas.push(y.atan2(x));
                }
            }
        }
    }
    for y in [lo[1], hi[1]] {
        if y.abs() < rho {
            let x = (rho * rho - y * y).sqrt();
            if x > lo[0] && x < hi[0] {
                thetas.push(y.atan2(x));
            }
        }
    }
    thetas.sort_by(f64::total_cmp);
    let ray = |theta: f64| -> (f64, f64) {
        let (s, c) = theta.sin_cos();
        let mut r0 = 0.0f64;
        let mut r1 = f64::INFINITY;
        for (dir, a, b) in [(c, lo[0], hi[0]), (s, lo[1], hi[1])] {
            if dir.abs() < 1e-300 {
                continue;
            }
            let (t0, t1) = if dir > 0.0 { (a / dir, b / dir) } else { (b / dir, a / dir) };
            r0 = r0.max(t0);
            r1 = r1.min(t1);
        }
        (r0, r1)
    };
    let v = integrate_breaks(
        |theta: f64| {
            let (r0, r1) = ray(theta);
            if !(r1 > r0) {
                return 0.0;
            }
            let (s, c) = theta.sin_cos();
            let f = |r: f64| kernel.radial(r) * r * p([r * c, r * s]);
            let res = if r0 < rho && rho < r1 {
                integrate_breaks(f, &[r0, rho, r1], opts)
            } else {
                integrate(f, r0, r1, opts)
            };
            fail.guard(res.map(|r| r.value))
        },
        &thetas,
        opts,
    )
    .map(|r| r.value);
    fail.finish(v)
}

/// Offset-indexed weights `w(|d0|, |d1|)`.
#[derive(Debug, Clone, PartialEq)]
struct OffsetTable {
    dims: [usize; 2],
    values: Vec<f64>,
}

impl OffsetTable {
    fn get(&self, d: [i64; 2]) -> Option<f64> {
        let (a, b) = (d[0].unsigned_abs() as usize, d[1].unsigned_abs() as usize);
        if a < self.dims[0] && b < self.dims[1] {
            Some(self.values[a * self.dims[1] + b])
        } else {
            None
        }
    }
}

/// Assembled discrete form over interior and shell cells.
#[derive(Debug, Clone)]
pub struct FormMatrix {
    pub kernel: KernelSpec,
    pub domain: Domain,
    table: OffsetTable,
    /// Exterior mass density per interior cell.
    pub lambda: Vec<f64>,
    /// Part of `Lambda_i h^N` coming from beyond the shell.
    pub tail: Vec<f64>,
    /// Reported uncertainty of `tail`.
    pub tail_uncertainty: Vec<f64>,
    pub tail_corrected: bool,
}

fn offset_of(a: [i64; 2], b: [i64; 2]) -> [i64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

impl FormMatrix {
    pub fn assemble(domain: &Domain, kernel: &KernelSpec) -> Result<Self> {
        if domain.dimension != kernel.dimension {
            return Err(Error::Mismatch(format!(
                "domain is {}D, kernel is {}D",
                domain.dimension, kernel.dimension
            )));
        }
        if domain.r_ext < kernel.rho() {
            return Err(Error::Domain(format!(
                "shell width {} is below the singular range {}",
                domain.r_ext,
                kernel.rho()
            )));
        }
        let h = domain.h;
        let mut dmax = [0i64; 2];
        let all: Vec<[i64; 2]> = domain.cells().map(|c| c.index).collect();
        let (lo, hi) = index_bounds(&all);
        let (ilo, ihi) = index_bounds(&domain.interior.iter().map(|c| c.index).collect::<Vec<_>>());
        for k in 0..2 {
            dmax[k] = (ihi[k] - lo[k]).max(hi[k] - ilo[k]);
        }
        let dims = if domain.dimension == 2 {
            let m = dmax[0].max(dmax[1]) as usize + 1;
            [m, m]
        } else {
            [dmax[0] as usize + 1, 1]
        };
        // Canonical offsets, computed in parallel and collected in order.
        let canon: Vec<[i64; 2]> = if domain.dimension == 1 {
            (1..dims[0] as i64).map(|a| [a, 0]).collect()
        } else {
            let mut v = Vec::new();
            for a in 1..dims[0] as i64 {
                for b in 0..=a {
                    v.push([a, b]);
                }
            }
            v
        };
        let weights: Vec<Result<f64>> = canon.par_iter().map(|&d| offset_weight(kernel, h, d)).collect();
        let mut values = vec![0.0; dims[0] * dims[1]];
        for (d, w) in canon.iter().zip(weights) {
            let w = w.map_err(|e| Error::Domain(format!("weight for cell offset {d:?}: {e}")))?;
            let (a, b) = (d[0] as usize, d[1] as usize);
            values[a * dims[1] + b] = w;
            if domain.dimension == 2 {
                values[b * dims[1] + a] = w;
            }
        }
        let table = OffsetTable { dims, values };
        let (tail, tail_uncertainty) = exterior_tail(domain, kernel)?;
        let vol = domain.cell_volume();
        let lambda: Vec<f64> = domain
            .interior
            .par_iter()
            .zip(tail.par_iter())
            .map(|(ci, t)| {
                let s: f64 = domain
                    .shell
                    .iter()
                    .map(|cj| table.get(offset_of(ci.index, cj.index)).unwrap_or(0.0))
                    .sum();
                (s + t) / vol
            })
            .collect();
        Ok(Self {
            kernel: *kernel,
            domain: domain.clone(),
            table,
            lambda,
            tail,
            tail_uncertainty,
            tail_corrected: true,
        })
    }

    pub fn n_interior(&self) -> usize {
        self.domain.n_interior()
    }

    pub fn n_shell(&self) -> usize {
        self.domain.n_shell()
    }

    fn index(&self, i: usize) -> [i64; 2] {
        let n = self.domain.n_interior();
        if i < n {
            self.domain.interior[i].index
        } else {
            self.domain.shell[i - n].index
        }
    }

    /// Weight between cells `i` and `j` (interior first, then shell).
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let d = offset_of(self.index(i), self.index(j));
        match self.table.get(d) {
            Some(w) => w,
            None => offset_weight(&self.kernel, self.domain.h, d).unwrap_or(f64::NAN),
        }
    }

    /// `Lambda_i h^N` per interior cell.
    pub fn exterior_mass(&self) -> Vec<f64> {
        let vol = self.domain.cell_volume();
        self.lambda.iter().map(|l| l * vol).collect()
    }

    /// Poincaré constant `min_i Lambda_i`.
    pub fn poincare_constant(&self) -> f64 {
        self.lambda.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Interior stiffness matrix of the full form.
    pub fn stiffness(&self) -> DMatrix<f64> {
        self.stiffness_kind(FormKind::Full)
    }

    /// Interior stiffness matrix of the full or censored form.
    pub fn stiffness_kind(&self, kind: FormKind) -> DMatrix<f64> {
        let n = self.n_interior();
        let ext = self.exterior_mass();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0; n];
                let mut diag = 0.0;
                for (j, r) in row.iter_mut().enumerate() {
                    if j != i {
                        let w = self.weight(i, j);
                        *r = -w;
                        diag += w;
                    }
                }
                if kind != FormKind::Censored {
                    diag += ext[i];
                }
                row[i] = diag;
                row
            })
            .collect();
        DMatrix::from_fn(n, n, |i, j| rows[i][j])
    }

    /// Bilinear form `E(u, v)` over the chosen pair set.
    pub fn energy(&self, u: &GridFunction, v: &GridFunction, kind: FormKind) -> Result<f64> {
        self.domain.check(u)?;
        self.domain.check(v)?;
        let n = self.n_interior();
        let m = self.n_shell();
        let uu = u.values();
        let vv = v.values();
        let rows: Vec<f64> = (0..n + m)
            .into_par_iter()
            .map(|i| {
                let mut s = 0.0;
                let upper = match kind {
                    FormKind::Censored => n,
                    _ => n + m,
                };
                if i >= n && kind != FormKind::Global {
                    return 0.0;
                }
                if i >= upper {
                    return 0.0;
                }
                for j in i + 1..upper {
                    let du = uu[i] - uu[j];
                    let dv = vv[i] - vv[j];
                    if du != 0.0 && dv != 0.0 {
                        s += du * dv * self.weight(i, j);
                    }
                }
                if i < n && kind != FormKind::Censored {
                    s += uu[i] * vv[i] * self.tail[i];
                }
                s
            })
            .collect();
        Ok(rows.iter().sum())
    }

    /// Discrete `L u` on interior cells (density), exterior beyond the shell
    /// taken as zero.
    pub fn apply_l(&self, u: &GridFunction) -> Result<Vec<f64>> {
        self.domain.check(u)?;
        let n = self.n_interior();
        let uu = u.values();
        let vol = self.domain.cell_volume();
        Ok((0..n)
            .into_par_iter()
            .map(|i| {
                let mut s = uu[i] * self.tail[i];
                for (j, &uj) in uu.iter().enumerate() {
                    if j != i {
                        s += (uu[i] - uj) * self.weight(i, j);
                    }
                }
                s / vol
            })
            .collect())
    }

    /// Nonlocal Neumann operator on shell cells (density).
    pub fn apply_n(&self, u: &GridFunction) -> Result<Vec<f64>> {
        self.domain.check(u)?;
        let n = self.n_interior();
        let vol = self.domain.cell_volume();
        Ok((0..self.n_shell())
            .into_par_iter()
            .map(|k| {
                let i = n + k;
                let ui = u.shell[k];
                (0..n).map(|j| (ui - u.interior[j]) * self.weight(i, j)).sum::<f64>() / vol
            })
            .collect())
    }

    /// J-perimeter of the cell set `{x_i in E}`, `E` inside `Omega`.
    pub fn j_perimeter(&self, set: &Shape) -> Result<f64> {
        let in_e = GridFunction::indicator(&self.domain, set);
        if !in_e.is_zero_exterior() {
            return Err(Error::Domain("perimeter set is not contained in the domain".into()));
        }
        self.energy(&in_e, &in_e, FormKind::Full)
    }

    /// Writes the versioned little-endian binary form file.
    pub fn write_binary<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::json!({
            "kernel": self.kernel,
            "shape": self.domain.shape,
            "h": self.domain.h,
            "r_ext": self.domain.r_ext,
        })
        .to_string();
        w.write_all(FORM_MAGIC)?;
        w.write_all(&FORM_VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(header.as_bytes())?;
        let n = self.n_interior();
        let m = self.n_shell();
        w.write_all(&(n as u64).to_le_bytes())?;
        w.write_all(&(m as u64).to_le_bytes())?;
        for c in self.domain.cells() {
            w.write_all(&c.index[0].to_le_bytes())?;
            w.write_all(&c.index[1].to_le_bytes())?;
            w.write_all(&c.center[0].to_le_bytes())?;
            w.write_all(&c.center[1].to_le_bytes())?;
        }
        // Packed upper triangle over Q_Omega rows: interior i, j > i.
        for i in 0..n {
            for j in i + 1..n + m {
                w.write_all(&self.weight(i, j).to_le_bytes())?;
            }
        }
        for v in self.lambda.iter().chain(&self.tail).chain(&self.tail_uncertainty) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: std::io::Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != FORM_MAGIC {
            return Err(Error::Format("not a form file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != FORM_VERSION {
            return Err(Error::Format(format!("unsupported form file version {version}")));
        }
        let len = read_u64(&mut r)? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        let header: serde_json::Value =
            serde_json::from_slice(&buf).map_err(|e| Error::Format(format!("bad header: {e}")))?;
        let kernel: KernelSpec = serde_json::from_value(header["kernel"].clone())
            .map_err(|e| Error::Format(format!("bad kernel header: {e}")))?;
        let shape: Shape = serde_json::from_value(header["shape"].clone())
            .map_err(|e| Error::Format(format!("bad shape header: {e}")))?;
        let h = header["h"].as_f64().ok_or_else(|| Error::Format("missing h".into()))?;
        let r_ext = header["r_ext"].as_f64().ok_or_else(|| Error::Format("missing r_ext".into()))?;
        let domain = Domain::build(shape, h, r_ext)?;
        let n = read_u64(&mut r)? as usize;
        let m = read_u64(&mut r)? as usize;
        if n != domain.n_interior() || m != domain.n_shell() {
            return Err(Error::Format("cell counts do not match the rebuilt grid".into()));
        }
        for c in domain.cells() {
            let i0 = read_i64(&mut r)?;
            let i1 = read_i64(&mut r)?;
            let _ = (read_f64(&mut r)?, read_f64(&mut r)?);
            if [i0, i1] != c.index {
                return Err(Error::Format("cell list does not match the rebuilt grid".into()));
            }
        }
        let all: Vec<[i64; 2]> = domain.cells().map(|c| c.index).collect();
        let mut found: HashMap<[usize; 2], f64> = HashMap::new();
        for i in 0..n {
            for j in i + 1..n + m {
                let w = read_f64(&mut r)?;
                let d = offset_of(all[i], all[j]);
                let mut key = [d[0].unsigned_abs() as usize, d[1].unsigned_abs() as usize];
                if domain.dimension == 2 && key[1] > key[0] {
                    key.swap(0, 1);
                }
                found.insert(key, w);
            }
        }
        let dim_max = found.keys().map(|k| k[0].max(k[1])).max().unwrap_or(0) + 1;
        let dims = if domain.dimension == 2 { [dim_max, dim_max] } else { [dim_max, 1] };
        let mut values = vec![0.0; dims[0] * dims[1]];
        for (k, w) in found {
            values[k[0] * dims[1] + k[1]] = w;
            if domain.dimension == 2 {
                values[k[1] * dims[1] + k[0]] = w;
            }
        }
        let mut read_vec = |len: usize| -> Result<Vec<f64>> { (0..len).map(|_| read_f64(&mut r)).collect() };
        let lambda = read_vec(n)?;
        let tail = read_vec(n)?;
        let tail_uncertainty = read_vec(n)?;
        Ok(Self {
            kernel,
            domain,
            table: OffsetTable { dims, values },
            lambda,
            tail,
            tail_uncertainty,
            tail_corrected: true,
        })
    }
}

const FORM_MAGIC: &[u8; 8] = b"NLFORM\0\0";
const FORM_VERSION: u32 = 1;

fn read_u32<R: std::io::Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: std::io::Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_i64<R: std::io::Read>(r: &mut R) -> Result<i64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(i64::from_le_bytes(b))
}

fn read_f64<R: std::io::Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn index_bounds(cells: &[[i64; 2]]) -> ([i64; 2], [i64; 2]) {
    let mut lo = [i64::MAX; 2];
    let mut hi = [i64::MIN; 2];
    for c in cells {
        for k in 0..2 {
            lo[k] = lo[k].min(c[k]);
            hi[k] = hi[k].max(c[k]);
        }
    }
    (lo, hi)
}

/// `int_{C_i} int_{beyond shell} K(y - x) dy dx` per interior cell, with an
/// uncertainty. Exact quadrature in 1D; in 2D the exit radius of the union
/// of cells is traced along rays from the cell center.
fn exterior_tail(domain: &Domain, kernel: &KernelSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = domain.n_interior();
    let h = domain.h;
    let all: Vec<[i64; 2]> = domain.cells().map(|c| c.index).collect();
    let (lo, hi) = index_bounds(&all);
    if domain.dimension == 1 {
        let left = domain.anchor[0] + lo[0] as f64 * h;
        let right = domain.anchor[0] + (hi[0] + 1) as f64 * h;
        let rho = kernel.rho();
        let out: Result<Vec<f64>> = domain
            .interior
            .par_iter()
            .map(|c| {
                let (a, b) = (c.center[0] - 0.5 * h, c.center[0] + 0.5 * h);
                let f = |x: f64| kernel.radial_upper_mass(right - x) + kernel.radial_upper_mass(x - left);
                let mut pts = vec![a, b];
                for p in [right - rho, left + rho] {
                    if p > a && p < b {
                        pts.push(p);
                    }
                }
                pts.sort_by(f64::total_cmp);
                Ok(integrate_breaks(f, &pts, QuadOptions::rel(1e-12))?.value)
            })
            .collect();
        return Ok((out?, vec![0.0; n]));
    }
    if kernel.radial_upper_mass(domain.r_ext) == 0.0 && domain.r_ext >= kernel.rho() + h * 2f64.sqrt() {
        // Compact support fully covered by the shell.
        return Ok((vec![0.0; n], vec![0.0; n]));
    }
    let set: HashSet<[i64; 2]> = all.iter().copied().collect();
    let anchor = domain.anchor;
    let inside = |p: [f64; 2]| {
        let i = ((p[0] - anchor[0]) / h).floor() as i64;
        let j = ((p[1] - anchor[1]) / h).floor() as i64;
        set.contains(&[i, j])
    };
    let vol = domain.cell_volume();
    let area_factor = kernel.sphere_area() / (2.0 * PI);
    let rows: Vec<(f64, f64)> = domain
        .interior
        .par_iter()
        .map(|c| {
            let x = c.center;
            let exit = |theta: f64| {
                let (s, co) = theta.sin_cos();
                let step = 0.125 * h;
                let mut r = 0.0;
                while inside([x[0] + r * co, x[1] + r * s]) {
                    r += step;
                }
                let (mut a, mut b) = ((r - step).max(0.0), r);
                for _ in 0..40 {
                    let mid = 0.5 * (a + b);
                    if inside([x[0] + mid * co, x[1] + mid * s]) {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                0.5 * (a + b)
            };
            let mean = |count: usize| {
                (0..count)
                    .map(|k| {
                        let t = 2.0 * PI * (k as f64 + 0.5) / count as f64;
                        kernel.radial_upper_mass(exit(t))
                    })
                    .sum::<f64>()
                    * 2.0
                    * PI
                    / count as f64
            };
            let fine = mean(512);
            let coarse = mean(256);
            (area_factor * fine * vol, area_factor * (fine - coarse).abs() * vol)
        })
        .collect();
    Ok(rows.into_iter().unzip())
}

/// `L u(x)` for a smooth callable `u`, with the principal value split at
/// `r_pv`: both pieces integrate the symmetric difference
/// `2u(x) - u(x+z) - u(x-z)` over half the directions.
pub fn apply_l_pointwise<U: Fn([f64; 2]) -> f64 + Sync>(
    kernel: &KernelSpec,
    u: U,
    x: [f64; 2],
    r_pv: f64,
    breaks: &[f64],
) -> Result<f64> {
    let rho = kernel.rho();
    if !(r_pv > 0.0 && r_pv < rho) {
        return Err(Error::Domain(format!("principal-value radius must lie in (0, rho), got {r_pv}")));
    }
    let ux = u(x);
    let dim = kernel.dimension;
    let opts = QuadOptions::rel(1e-10).with_abs(1e-14);
    let fail = Failure::new();
    let sym = |r: f64| -> f64 {
        if dim == 1 {
            2.0 * ux - u([x[0] + r, 0.0]) - u([x[0] - r, 0.0])
        } else {
            fail.guard(
                integrate(
                    |t: f64| {
                        let (s, c) = t.sin_cos();
                        2.0 * ux - u([x[0] + r * c, x[1] + r * s]) - u([x[0] - r * c, x[1] - r * s])
                    },
                    0.0,
                    PI,
                    opts,
                )
                .map(|v| v.value),
            )
        }
    };
    let f = |r: f64| sym(r) * kernel.radial(r) * r.powi(dim as i32 - 1);
    let inner = integrate(f, 0.0, r_pv, opts)?.value;
    let mut pts = vec![r_pv, rho];
    pts.extend(breaks.iter().copied().filter(|&b| b > r_pv && b < rho));
    pts.sort_by(f64::total_cmp);
    let mut outer = integrate_breaks(f, &pts, opts)?.value;
    if kernel.radial_upper_mass(rho) > 0.0 {
        let mut far: Vec<f64> = breaks.iter().copied().filter(|&b| b > rho).collect();
        far.insert(0, rho);
        far.sort_by(f64::total_cmp);
        let last = *far.last().unwrap();
        if far.len() > 1 {
            outer += integrate_breaks(f, &far, opts)?.value;
        }
        outer += integrate_to_infinity(f, last, opts)?.value;
    }
    fail.finish(Ok(inner + outer))
}

/// `W(x) = |x|^(N/2) L[|.|^(-N/2)](x)` for `0 < |x| < rho/3`.
pub fn hardy_witness(kernel: &KernelSpec, x: [f64; 2]) -> Result<f64> {
    let d = (x[0] * x[0] + x[1] * x[1]).sqrt();
    let rho = kernel.rho();
    if !(d > 0.0 && d < rho / 3.0) {
        return Err(Error::Domain(format!("witness point must satisfy 0 < |x| < rho/3, got {d}")));
    }
    let n = kernel.dimension as f64;
    let ux = d.powf(-0.5 * n);
    let opts = QuadOptions::rel(1e-10);
    // Symmetric difference of |y|^(-N/2) over the sphere |y - x| = r; `gap`
    // is |d - r|, passed separately so it never rounds to zero.
    let diff = |r: f64, gap: f64| -> f64 {
        if kernel.dimension == 1 {
            2.0 * ux - (d + r).powf(-0.5) - gap.powf(-0.5)
        } else {
            let s = d + r;
            let mean = 2.0 / PI * ellip_k_complementary(gap / s) / s;
            2.0 * PI * (ux - mean)
        }
    };
    let weight = |r: f64| kernel.radial(r) * r.powi(kernel.dimension as i32 - 1);
    let f = |r: f64| diff(r, (d - r).abs()) * weight(r);
    // r = d -+ t^2 near the pole of u.
    let below = |t: f64| diff(d - t * t, t * t) * weight(d - t * t) * 2.0 * t;
    let above = |t: f64| diff(d + t * t, t * t) * weight(d + t * t) * 2.0 * t;
    let mut v = integrate(f, 0.0, 0.5 * d, opts)?.value;
    v += integrate(below, 0.0, (0.5 * d).sqrt(), opts)?.value;
    v += integrate(above, 0.0, d.sqrt(), opts)?.value;
    v += integrate(f, 2.0 * d, rho, opts)?.value;
    if kernel.radial_upper_mass(rho) > 0.0 {
        v += integrate_to_infinity(f, rho, opts)?.value;
    }
    Ok(d.powf(0.5 * n) * v)
}
