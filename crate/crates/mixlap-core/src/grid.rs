//! Uniform tensor grids on a box `Ω = (0,L₁)×…` with zero exterior
//! extension, nodal functions on them, and the forward-difference cell
//! gradient.
//!
//! Unknowns live at the `M` interior nodes per axis, spaced `h = L/(M+1)`;
//! the boundary value 0 and the zero extension outside `Ω` are implicit.
//! Cells are the `M+1` intervals per axis between consecutive nodes
//! (including the two boundary gaps), so piecewise-constant cell gradients
//! see the boundary condition.

use std::io::Write as IoWrite;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Uniform tensor grid. One- and two-dimensional grids share the
/// representation: a 1D grid has `m[1] = 1`, `h[1] = 1`, and ignores the
/// second coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    extents: [f64; 2],
    m: [usize; 2],
    h: [f64; 2],
    delta: f64,
}

impl Grid {
    /// Low-level constructor: accepts any `M ≥ 1` per axis (toy fixtures
    /// use M = 1, 2). Use [`make_grid`] for the validated entry point with
    /// the production minimum M ≥ 3.
    pub fn new(dim: usize, extents: &[f64], m: &[usize], delta: f64) -> Result<Arc<Grid>> {
        if dim != 1 && dim != 2 {
            return Err(Error::invalid(format!("dim must be 1 or 2, got {dim}")));
        }
        if extents.len() != dim || m.len() != dim {
            return Err(Error::invalid("extents/node counts must match dim"));
        }
        if extents.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::invalid("extents must be positive and finite"));
        }
        if m.iter().any(|&mi| mi == 0) {
            return Err(Error::invalid("need at least one node per axis"));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::invalid("boundary-strip width must be finite and ≥ 0"));
        }
        let mut ext = [1.0f64; 2];
        let mut mm = [1usize; 2];
        let mut h = [1.0f64; 2];
        for a in 0..dim {
            ext[a] = extents[a];
            mm[a] = m[a];
            h[a] = extents[a] / (m[a] + 1) as f64;
        }
        Ok(Arc::new(Grid {
            dim,
            extents: ext,
            m: mm,
            h,
            delta,
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Per-axis extents (length `dim`).
    pub fn extents(&self) -> &[f64] {
        &self.extents[..self.dim]
    }

    /// Per-axis interior node counts (length `dim`).
    pub fn node_counts(&self) -> &[usize] {
        &self.m[..self.dim]
    }

    /// Per-axis spacings (length `dim`).
    pub fn spacings(&self) -> &[f64] {
        &self.h[..self.dim]
    }

    /// Boundary-strip width δ of `Ω_δ`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Total number of interior nodes.
    pub fn n_nodes(&self) -> usize {
        self.m[0] * self.m[1]
    }

    /// Number of cells (per-axis node gaps including the boundary gaps).
    pub fn n_cells(&self) -> usize {
        (self.m[0] + 1) * if self.dim == 2 { self.m[1] + 1 } else { 1 }
    }

    /// Nodal quadrature weight (the cell volume `h₁·h₂`).
    pub fn node_weight(&self) -> f64 {
        self.h[0] * self.h[1]
    }

    /// Volume of `Ω`.
    pub fn volume(&self) -> f64 {
        self.extents[0] * if self.dim == 2 { self.extents[1] } else { 1.0 }
    }

    /// Diameter of `Ω`.
    pub fn diameter(&self) -> f64 {
        if self.dim == 2 {
            self.extents[0].hypot(self.extents[1])
        } else {
            self.extents[0]
        }
    }

    /// Flat index of the node with per-axis indices `(ix, iy)`.
    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.m[0] + ix
    }

    /// Per-axis indices of the node with flat index `idx`.
    pub fn node_split(&self, idx: usize) -> (usize, usize) {
        (idx % self.m[0], idx / self.m[0])
    }

    /// Coordinates of a node; the second component is 0 for 1D grids.
    pub fn node_pos(&self, idx: usize) -> [f64; 2] {
        let (ix, iy) = self.node_split(idx);
        [
            (ix + 1) as f64 * self.h[0],
            if self.dim == 2 { (iy + 1) as f64 * self.h[1] } else { 0.0 },
        ]
    }

    /// Distance from a node to the boundary of `Ω`.
    pub fn boundary_distance(&self, idx: usize) -> f64 {
        let pos = self.node_pos(idx);
        let mut d = pos[0].min(self.extents[0] - pos[0]);
        if self.dim == 2 {
            d = d.min(pos[1]).min(self.extents[1] - pos[1]);
        }
        d
    }

    /// Mask of the boundary strip `Ω_δ = {x : dist(x, ∂Ω) < δ}`.
    pub fn strip_mask(&self) -> Vec<bool> {
        (0..self.n_nodes())
            .map(|i| self.boundary_distance(i) < self.delta)
            .collect()
    }

    /// Mask of the compact inset `{x : dist(x, ∂Ω) ≥ inset}`.
    pub fn inset_mask(&self, inset: f64) -> Vec<bool> {
        (0..self.n_nodes())
            .map(|i| self.boundary_distance(i) >= inset)
            .collect()
    }

    /// Indices of nodes with center strictly inside the ball `B_r(x0)`.
    pub fn nodes_in_ball(&self, x0: [f64; 2], r: f64) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&i| self.dist(self.node_pos(i), x0) < r)
            .collect()
    }

    /// Euclidean distance respecting the grid dimension.
    pub fn dist(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        if self.dim == 2 {
            (x[0] - y[0]).hypot(x[1] - y[1])
        } else {
            (x[0] - y[0]).abs()
        }
    }

    /// Nodal value with the zero extension: per-axis indices may step one
    /// off the grid (boundary ring), where the value is 0.
    #[inline]
    pub fn value_at(&self, values: &[f64], ix: isize, iy: isize) -> f64 {
        if ix < 0 || iy < 0 || ix >= self.m[0] as isize || iy >= self.m[1] as isize {
            0.0
        } else {
            values[iy as usize * self.m[0] + ix as usize]
        }
    }

    /// Flat index of the node mirrored across the vertical midline.
    pub fn mirror_x(&self, idx: usize) -> usize {
        let (ix, iy) = self.node_split(idx);
        self.node_index(self.m[0] - 1 - ix, iy)
    }
}

/// Validated grid constructor: `M ≥ 3` per axis and `0 < δ` less than half
/// of the smallest extent.
pub fn make_grid(dim: usize, extents: &[f64], m: &[usize], delta: f64) -> Result<Arc<Grid>> {
    if m.iter().any(|&mi| mi < 3) {
        return Err(Error::invalid(format!(
            "need at least 3 nodes per axis, got {m:?}"
        )));
    }
    let min_extent = extents.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(delta > 0.0 && delta < 0.5 * min_extent) {
        return Err(Error::invalid(format!(
            "boundary-strip width must lie in (0, {}), got {delta}",
            0.5 * min_extent
        )));
    }
    Grid::new(dim, extents, m, delta)
}

/// Function on the interior nodes of a grid; implicitly 0 on the boundary
/// and on all of `R^N ∖ Ω`.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    /// Wraps nodal values; every value must be finite.
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::invalid(format!(
                "expected {} nodal values, got {}",
                grid.n_nodes(),
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("nodal values must be finite"));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.n_nodes();
        GridFunction {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Result<Self> {
        let n = grid.n_nodes();
        GridFunction::new(grid, vec![c; n])
    }

    /// Samples `f` at the node coordinates.
    pub fn from_fn(grid: Arc<Grid>, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let values = (0..grid.n_nodes())
            .map(|i| {
                let p = grid.node_pos(i);
                f(p[0], p[1])
            })
            .collect();
        GridFunction::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise map; the result must stay finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        GridFunction::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination with another function on the same grid.
    pub fn zip_map(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        GridFunction::new(self.grid.clone(), values)
    }

    /// Positive part `u⁺ = max(u, 0)`.
    pub fn pos_part(&self) -> Self {
        self.map(|v| v.max(0.0)).expect("max of finite values is finite")
    }

    /// Negative part `u⁻ = max(−u, 0)` (nonnegative by convention).
    pub fn neg_part(&self) -> Self {
        self.map(|v| (-v).max(0.0)).expect("max of finite values is finite")
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Minimum over the nodes selected by `mask`; `+∞` if none selected.
    pub fn min_on(&self, mask: &[bool]) -> f64 {
        self.values
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute nodewise difference.
    pub fn sup_diff(&self, other: &GridFunction) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs())))
    }

    /// Discrete `L^r` norm by nodal quadrature, `(Σ |u_i|^r w)^{1/r}`.
    pub fn lr_norm(&self, r: f64) -> f64 {
        let w = self.grid.node_weight();
        let sum: f64 = self.values.iter().map(|v| v.abs().powf(r)).sum();
        (w * sum).powf(1.0 / r)
    }

    /// Mirror reflection across the vertical midline (for symmetry tests).
    pub fn mirrored_x(&self) -> Self {
        let values = (0..self.values.len())
            .map(|i| self.values[self.grid.mirror_x(i)])
            .collect();
        GridFunction {
            grid: self.grid.clone(),
            values,
        }
    }

    /// CSV serialization: header `x[,y],u`, one node per row, 17 significant
    /// digits.
    pub fn write_csv<W: IoWrite>(&self, mut out: W) -> std::io::Result<()> {
        if self.grid.dim() == 2 {
            writeln!(out, "x,y,u")?;
        } else {
            writeln!(out, "x,u")?;
        }
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.node_pos(i);
            if self.grid.dim() == 2 {
                writeln!(out, "{:.16e},{:.16e},{:.16e}", p[0], p[1], v)?;
            } else {
                writeln!(out, "{:.16e},{:.16e}", p[0], v)?;
            }
        }
        Ok(())
    }

    fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && *self.grid != *other.grid {
            return Err(Error::invalid("grid functions live on different grids"));
        }
        Ok(())
    }
}

/// Forward-difference gradient per cell, using the zero boundary values.
///
/// Cell `(cx, cy)` spans `[cx·h₁, (cx+1)·h₁] × …` with `cx ∈ 0..=M₁`; its
/// gradient components difference the nodal values at the cell corners
/// closest to the origin corner. Linear in `u`.
pub fn discrete_gradient(u: &GridFunction) -> Vec<[f64; 2]> {
    let grid = u.grid();
    let v = u.values();
    let [m0, m1] = [grid.m[0], grid.m[1]];
    let [h0, h1] = grid.h;
    if grid.dim == 1 {
        let mut out = Vec::with_capacity(m0 + 1);
        for cx in 0..=m0 as isize {
            let base = grid.value_at(v, cx - 1, 0);
            out.push([(grid.value_at(v, cx, 0) - base) / h0, 0.0]);
        }
        return out;
    }
    let mut out = Vec::with_capacity((m0 + 1) * (m1 + 1));
    for cy in 0..=m1 as isize {
        for cx in 0..=m0 as isize {
            let base = grid.value_at(v, cx - 1, cy - 1);
            let gx = (grid.value_at(v, cx, cy - 1) - base) / h0;
            let gy = (grid.value_at(v, cx - 1, cy) - base) / h1;
            out.push([gx, gy]);
        }
    }
    out
}
