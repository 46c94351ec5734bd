//! Uniform Cartesian grids over a bounded set with an exterior shell.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bounded sets understood by the grid builder. `Ball` is centered at the
/// origin; `Cells` is a union of lattice cells with faces at multiples of `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Interval { a: f64, b: f64 },
    Box { min: [f64; 2], max: [f64; 2] },
    Ball { dimension: usize, radius: f64 },
    Cells { dimension: usize, h: f64, cells: Vec<[i64; 2]> },
}

impl Shape {
    pub fn dimension(&self) -> usize {
        match self {
            Shape::Interval { .. } => 1,
            Shape::Box { .. } => 2,
            Shape::Ball { dimension, .. } | Shape::Cells { dimension, .. } => *dimension,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Shape::Interval { a, b } => a < b && a.is_finite() && b.is_finite(),
            Shape::Box { min, max } => min[0] < max[0] && min[1] < max[1],
            Shape::Ball { dimension, radius } => (*dimension == 1 || *dimension == 2) && *radius > 0.0,
            Shape::Cells { dimension, h, .. } => (*dimension == 1 || *dimension == 2) && *h > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid shape {self:?}")))
        }
    }

    /// Lower corner of the lattice the grid is built on.
    fn anchor(&self) -> [f64; 2] {
        match self {
            Shape::Interval { a, .. } => [*a, 0.0],
            Shape::Box { min, .. } => *min,
            Shape::Ball { dimension, radius } => {
                if *dimension == 1 {
                    [-radius, 0.0]
                } else {
                    [-radius, -radius]
                }
            }
            Shape::Cells { .. } => [0.0, 0.0],
        }
    }

    fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        match self {
            Shape::Interval { a, b } => ([*a, 0.0], [*b, 0.0]),
            Shape::Box { min, max } => (*min, *max),
            Shape::Ball { dimension, radius } => {
                let r = *radius;
                if *dimension == 1 {
                    ([-r, 0.0], [r, 0.0])
                } else {
                    ([-r, -r], [r, r])
                }
            }
            Shape::Cells { dimension, h, cells } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for c in cells {
                    for k in 0..*dimension {
                        lo[k] = lo[k].min(c[k] as f64 * h);
                        hi[k] = hi[k].max((c[k] + 1) as f64 * h);
                    }
                }
                if *dimension == 1 {
                    lo[1] = 0.0;
                    hi[1] = 0.0;
                }
                (lo, hi)
            }
        }
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        match self {
            Shape::Interval { a, b } => *a < x[0] && x[0] < *b,
            Shape::Box { min, max } => min[0] < x[0] && x[0] < max[0] && min[1] < x[1] && x[1] < max[1],
            Shape::Ball { radius, .. } => norm(x) < *radius,
            Shape::Cells { dimension, h, cells } => {
                let idx = lattice_index(x, *h, *dimension);
                cells.contains(&idx)
            }
        }
    }

    /// Euclidean distance from `x` to the closed set.
    pub fn distance_to(&self, x: [f64; 2]) -> f64 {
        match self {
            Shape::Interval { a, b } => (a - x[0]).max(x[0] - b).max(0.0),
            Shape::Box { min, max } => box_distance(x, *min, *max),
            Shape::Ball { radius, .. } => (norm(x) - radius).max(0.0),
            Shape::Cells { dimension, h, cells } => cells
                .iter()
                .map(|c| {
                    let (lo, hi) = cell_box(*c, *h, *dimension);
                    box_distance(x, lo, hi)
                })
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Distance from an interior point to the boundary.
    pub fn boundary_distance(&self, x: [f64; 2]) -> f64 {
        match self {
            Shape::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Shape::Box { min, max } => (x[0] - min[0]).min(max[0] - x[0]).min(x[1] - min[1]).min(max[1] - x[1]),
            Shape::Ball { radius, .. } => radius - norm(x),
            Shape::Cells { dimension, h, cells } => {
                let set: HashSet<[i64; 2]> = cells.iter().copied().collect();
                let own = lattice_index(x, *h, *dimension);
                let mut best = f64::INFINITY;
                let mut reach = 1i64;
                loop {
                    let range1 = if *dimension == 2 { -reach..=reach } else { 0..=0 };
                    for di in -reach..=reach {
                        for dj in range1.clone() {
                            let c = [own[0] + di, own[1] + dj];
                            if !set.contains(&c) {
                                let (lo, hi) = cell_box(c, *h, *dimension);
                                best = best.min(box_distance(x, lo, hi));
                            }
                        }
                    }
                    if best <= (reach as f64) * h {
                        return best;
                    }
                    reach *= 2;
                }
            }
        }
    }
}

fn norm(x: [f64; 2]) -> f64 {
    (x[0] * x[0] + x[1] * x[1]).sqrt()
}

fn box_distance(x: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> f64 {
    let dx = (lo[0] - x[0]).max(x[0] - hi[0]).max(0.0);
    let dy = (lo[1] - x[1]).max(x[1] - hi[1]).max(0.0);
    (dx * dx + dy * dy).sqrt()
}

fn cell_box(c: [i64; 2], h: f64, dimension: usize) -> ([f64; 2], [f64; 2]) {
    let lo = [c[0] as f64 * h, if dimension == 2 { c[1] as f64 * h } else { 0.0 }];
    let hi = [lo[0] + h, if dimension == 2 { lo[1] + h } else { 0.0 }];
    (lo, hi)
}

fn lattice_index(x: [f64; 2], h: f64, dimension: usize) -> [i64; 2] {
    let i = (x[0] / h).floor() as i64;
    let j = if dimension == 2 { (x[1] / h).floor() as i64 } else { 0 };
    [i, j]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub index: [i64; 2],
    pub center: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Domain {
    pub dimension: usize,
    pub shape: Shape,
    pub h: f64,
    pub r_ext: f64,
    pub anchor: [f64; 2],
    pub interior: Vec<Cell>,
    pub shell: Vec<Cell>,
}

/// Shell width that covers the singular range plus one cell diagonal.
pub fn default_r_ext(rho: f64, h: f64, dimension: usize) -> f64 {
    rho + h * (dimension as f64).sqrt()
}

impl Domain {
    pub fn build(shape: Shape, h: f64, r_ext: f64) -> Result<Self> {
        shape.validate()?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Domain(format!("cell size must be positive, got {h}")));
        }
        if !(r_ext >= 0.0 && r_ext.is_finite()) {
            return Err(Error::Domain(format!("shell width must be nonnegative, got {r_ext}")));
        }
        if let Shape::Cells { h: hc, .. } = &shape {
            if (hc - h).abs() > 1e-14 * h {
                return Err(Error::Domain(format!("cell set built for h = {hc}, grid asked for h = {h}")));
            }
        }
        let dim = shape.dimension();
        let anchor = shape.anchor();
        let (lo, hi) = shape.bounding_box();
        let center = |i: i64, j: i64| -> [f64; 2] {
            let y = if dim == 2 { anchor[1] + (j as f64 + 0.5) * h } else { 0.0 };
            [anchor[0] + (i as f64 + 0.5) * h, y]
        };
        let idx_range = |k: usize, pad: f64| -> (i64, i64) {
            if k == 1 && dim == 1 {
                return (0, 0);
            }
            let a = ((lo[k] - pad - anchor[k]) / h).floor() as i64 - 1;
            let b = ((hi[k] + pad - anchor[k]) / h).ceil() as i64 + 1;
            (a, b)
        };

        let mut interior = Vec::new();
        let (i0, i1) = idx_range(0, 0.0);
        let (j0, j1) = idx_range(1, 0.0);
        for i in i0..=i1 {
            for j in j0..=j1 {
                let c = center(i, j);
                if shape.contains(c) {
                    interior.push(Cell { index: [i, j], center: c });
                }
            }
        }
        if interior.len() < 2 {
            return Err(Error::GridTooCoarse(interior.len()));
        }

        let mut shell = Vec::new();
        let (i0, i1) = idx_range(0, r_ext);
        let (j0, j1) = idx_range(1, r_ext);
        let slack = 1e-12 * h.max(r_ext);
        for i in i0..=i1 {
            for j in j0..=j1 {
                let c = center(i, j);
                if !shape.contains(c) && shape.distance_to(c) <= r_ext + slack {
                    shell.push(Cell { index: [i, j], center: c });
                }
            }
        }
        Ok(Self {
            dimension: dim,
            shape,
            h,
            r_ext,
            anchor,
            interior,
            shell,
        })
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn n_shell(&self) -> usize {
        self.shell.len()
    }

    /// Interior cells followed by shell cells.
    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.interior.iter().chain(self.shell.iter())
    }

    pub fn n_cells(&self) -> usize {
        self.interior.len() + self.shell.len()
    }

    /// `h^N`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dimension as i32)
    }

    /// `|Omega| = h^N * #interior`.
    pub fn measure(&self) -> f64 {
        self.cell_volume() * self.interior.len() as f64
    }

    /// Largest distance between interior cell centers.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.shape.bounding_box();
        ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
    }

    /// Distance from each interior center to the boundary.
    pub fn boundary_distance(&self) -> Vec<f64> {
        self.interior.iter().map(|c| self.shape.boundary_distance(c.center)).collect()
    }

    pub fn check(&self, u: &GridFunction) -> Result<()> {
        if u.interior.len() != self.interior.len() || u.shell.len() != self.shell.len() {
            return Err(Error::Mismatch(format!(
                "grid has {}+{} cells, function has {}+{}",
                self.interior.len(),
                self.shell.len(),
                u.interior.len(),
                u.shell.len()
            )));
        }
        Ok(())
    }
}

/// One value per interior cell and per shell cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    pub interior: Vec<f64>,
    pub shell: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(domain: &Domain) -> Self {
        Self {
            interior: vec![0.0; domain.n_interior()],
            shell: vec![0.0; domain.n_shell()],
        }
    }

    /// Interior values with zero exterior.
    pub fn from_interior(domain: &Domain, values: Vec<f64>) -> Result<Self> {
        let u = Self {
            interior: values,
            shell: vec![0.0; domain.n_shell()],
        };
        domain.check(&u)?;
        Ok(u)
    }

    pub fn from_parts(domain: &Domain, interior: Vec<f64>, shell: Vec<f64>) -> Result<Self> {
        let u = Self { interior, shell };
        domain.check(&u)?;
        Ok(u)
    }

    /// Samples `f` at every center, interior and shell.
    pub fn from_fn<F: Fn([f64; 2]) -> f64>(domain: &Domain, f: F) -> Self {
        Self {
            interior: domain.interior.iter().map(|c| f(c.center)).collect(),
            shell: domain.shell.iter().map(|c| f(c.center)).collect(),
        }
    }

    /// Samples `f` on the interior; zero exterior.
    pub fn from_fn_interior<F: Fn([f64; 2]) -> f64>(domain: &Domain, f: F) -> Self {
        Self {
            interior: domain.interior.iter().map(|c| f(c.center)).collect(),
            shell: vec![0.0; domain.n_shell()],
        }
    }

    /// `1_E` sampled at centers.
    pub fn indicator(domain: &Domain, subset: &Shape) -> Self {
        Self::from_fn(domain, |x| if subset.contains(x) { 1.0 } else { 0.0 })
    }

    pub fn constant(domain: &Domain, c: f64) -> Self {
        Self {
            interior: vec![c; domain.n_interior()],
            shell: vec![c; domain.n_shell()],
        }
    }

    pub fn is_zero_exterior(&self) -> bool {
        self.shell.iter().all(|&v| v == 0.0)
    }

    /// Interior and shell values concatenated.
    pub fn values(&self) -> Vec<f64> {
        let mut v = self.interior.clone();
        v.extend_from_slice(&self.shell);
        v
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            interior: self.interior.iter().map(|&v| f(v)).collect(),
            shell: self.shell.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `(h^N sum |u_i|^p)^(1/p)` over interior cells.
    pub fn lp_norm(&self, domain: &Domain, p: f64) -> f64 {
        let s: f64 = self.interior.iter().map(|v| v.abs().powf(p)).sum();
        (domain.cell_volume() * s).powf(1.0 / p)
    }

    /// `h^N sum u_i v_i` over interior cells.
    pub fn dot(&self, other: &Self, domain: &Domain) -> f64 {
        domain.cell_volume() * self.interior.iter().zip(&other.interior).map(|(a, b)| a * b).sum::<f64>()
    }
}
