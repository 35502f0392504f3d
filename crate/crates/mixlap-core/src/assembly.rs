//! Precomputed nonlocal data for a grid: pairwise kernel coefficients,
//! per-node exterior weights, and a deterministic parallel evaluation of the
//! nonlocal energy and its gradient.
//!
//! Interpreting a grid function as piecewise constant on the cell that each
//! node owns, the pair coefficient for nodes `i, j` is the correlation
//! integral `A_ij = ∬_{cell_i×cell_j} K̂(x-y) dx dy` of the unit-coefficient
//! kernel `K̂(z) = |z|^{-N-ps}` (the physical coefficient `b` is applied at
//! evaluation time). On a uniform grid `A_ij` depends only on the index
//! offset, so coefficients are tabulated per offset:
//!
//! * **touching offsets** (index distance ≤ 1 per axis): the plain cell
//!   average diverges whenever `ps ≥ 1`, so the kernel is weighted by
//!   `(|⟨z, e_ij⟩| / |x_i-x_j|)^p`, `e_ij` the pair direction — the factor
//!   by which `|u(x)-u(y)|^p` differs from `|u_i-u_j|^p` for locally linear
//!   `u`. The weighted average is finite for every `0 < s < 1` (since
//!   `p > ps`) and keeps the scheme consistent;
//! * **near offsets** (≤ 3 per axis): plain cell average, closed-form in
//!   1D and adaptive quadrature in 2D;
//! * **far offsets**: midpoint value `w_i w_j K̂(x_i - x_j)`.
//!
//! The exterior weight `W_ext(x_i) = ∫_{R^N∖Ω} K̂(x_i - y) dy` is closed-form
//! in 1D; in 2D the radial integral is exact (`Ω` is convex, so each ray
//! exits once) and only the angular integral `∫ r_exit(θ)^{-ps} dθ / ps` is
//! quadrature, split at the four corner directions.

use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exponents::Exponents;
use crate::grid::Grid;
use crate::kernel::signed_power;
use crate::quad::{adaptive_interval, adaptive_rect, gauss_rect, power_int};

/// Index offset between two interacting nodes with its tabulated kernel
/// coefficient and the number of node pairs realizing it.
#[derive(Debug, Clone, Copy)]
struct Offset {
    di: isize,
    dj: isize,
    coeff: f64,
}

/// Nonlocal interaction data for one grid and one `(p, s)` pair.
#[derive(Debug)]
pub struct NonlocalAssembly {
    grid: Arc<Grid>,
    p: f64,
    s: f64,
    offsets: Vec<Offset>,
    /// Chunks of the offset list with roughly equal pair counts; the energy
    /// reduction is parallel over chunks but accumulated in chunk order, so
    /// results are bit-identical for every thread count.
    chunks: Vec<Range<usize>>,
    w_ext: Vec<f64>,
}

/// Pair count target per parallel chunk.
const CHUNK_PAIRS: usize = 1 << 18;

impl NonlocalAssembly {
    /// Tabulates kernel coefficients and exterior weights for the grid.
    /// `rel_tol` is the relative quadrature tolerance (1e-10 in production).
    pub fn build(grid: &Arc<Grid>, exps: &Exponents, rel_tol: f64) -> Result<Self> {
        if exps.dim != grid.dim() {
            return Err(Error::invalid("exponent dimension does not match grid"));
        }
        if !(rel_tol > 0.0 && rel_tol < 1e-2) {
            return Err(Error::invalid("quadrature tolerance must lie in (0, 1e-2)"));
        }
        let (p, s) = (exps.p, exps.s);
        let table = coeff_table(grid, p, s, rel_tol)?;
        let m = grid.node_counts();
        let (m0, m1) = (m[0], if grid.dim() == 2 { m[1] } else { 1 });

        let mut offsets = Vec::new();
        for dj in 0..m1 as isize {
            let di_lo = if dj == 0 { 1 } else { -(m0 as isize - 1) };
            for di in di_lo..m0 as isize {
                let coeff = table[dj as usize][di.unsigned_abs()];
                debug_assert!(coeff.is_finite() && coeff > 0.0);
                offsets.push(Offset { di, dj, coeff });
            }
        }

        let mut chunks = Vec::new();
        let mut start = 0usize;
        let mut acc = 0usize;
        for (k, off) in offsets.iter().enumerate() {
            acc += pair_count(m0, m1, off);
            if acc >= CHUNK_PAIRS {
                chunks.push(start..k + 1);
                start = k + 1;
                acc = 0;
            }
        }
        if start < offsets.len() {
            chunks.push(start..offsets.len());
        }

        let w_ext = exterior_weight_table(grid, p * s, rel_tol)?;
        Ok(NonlocalAssembly {
            grid: grid.clone(),
            p,
            s,
            offsets,
            chunks,
            w_ext,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Unit-coefficient exterior weights `W_ext(x_i)` (multiply by `b`).
    pub fn exterior_weights(&self) -> &[f64] {
        &self.w_ext
    }

    /// Tabulated pair coefficient for an index offset, if it occurs on this
    /// grid (testing hook).
    pub fn offset_coeff(&self, di: isize, dj: isize) -> Option<f64> {
        self.offsets
            .iter()
            .find(|o| (o.di == di && o.dj == dj) || (o.di == -di && o.dj == -dj))
            .map(|o| o.coeff)
    }

    /// Nonlocal energy `b·[(1/2p) Σ_{i≠j} |u_i-u_j|^p A_ij +
    /// (1/p) Σ_i |u_i|^p W_ext(x_i) w_i]` and its exact gradient, added into
    /// `grad`. Deterministic for every rayon pool size.
    pub fn energy_and_grad(&self, u: &[f64], b: f64, grad: &mut [f64]) -> f64 {
        debug_assert_eq!(u.len(), self.grid.n_nodes());
        debug_assert_eq!(grad.len(), u.len());
        let p = self.p;
        let parts: Vec<(f64, Vec<f64>)> = self
            .chunks
            .par_iter()
            .map(|range| {
                let mut g = vec![0.0; u.len()];
                let mut e = 0.0;
                for off in &self.offsets[range.clone()] {
                    e += self.offset_sweep(u, off, &mut g);
                }
                (e, g)
            })
            .collect();
        let mut energy = 0.0;
        for (e, g) in &parts {
            energy += e;
            for (gi, pi) in grad.iter_mut().zip(g) {
                *gi += b * pi;
            }
        }
        let w = self.grid.node_weight();
        let mut ext = 0.0;
        for (i, (&ui, &we)) in u.iter().zip(&self.w_ext).enumerate() {
            ext += ui.abs().powf(p) * we;
            grad[i] += b * signed_power(ui, p - 1.0) * we * w;
        }
        b * (energy / p + ext * w / p)
    }

    /// Sum of `|u_i - u_j|^p A` over the pairs of one offset, with the pair
    /// gradient accumulated into `g`.
    fn offset_sweep(&self, u: &[f64], off: &Offset, g: &mut [f64]) -> f64 {
        let m = self.grid.node_counts();
        let (m0, m1) = (m[0], if self.grid.dim() == 2 { m[1] } else { 1 });
        let a = off.coeff;
        let p = self.p;
        let jump = off.dj * m0 as isize + off.di;
        let ix_lo = (-off.di).max(0) as usize;
        let ix_hi = m0 - off.di.max(0) as usize;
        let iy_hi = m1 - off.dj as usize;
        let mut e = 0.0;
        // The caller divides the energy sum by p, so the per-pair gradient
        // of (a/p)|d|^p is a·|d|^{p-1}·sgn(d).
        if p == 2.0 {
            for iy in 0..iy_hi {
                let row = iy * m0;
                for ix in ix_lo..ix_hi {
                    let i = row + ix;
                    let j = (i as isize + jump) as usize;
                    let d = u[i] - u[j];
                    e += a * d * d;
                    let t = a * d;
                    g[i] += t;
                    g[j] -= t;
                }
            }
        } else {
            for iy in 0..iy_hi {
                let row = iy * m0;
                for ix in ix_lo..ix_hi {
                    let i = row + ix;
                    let j = (i as isize + jump) as usize;
                    let d = u[i] - u[j];
                    e += a * d.abs().powf(p);
                    let t = a * signed_power(d, p - 1.0);
                    g[i] += t;
                    g[j] -= t;
                }
            }
        }
        e
    }

    /// Serial visit of every unordered interacting pair `(i, j, A_ij)` with
    /// both nodes selected by `mask` (for localized double sums).
    pub fn for_each_pair_in(&self, mask: &[bool], mut visit: impl FnMut(usize, usize, f64)) {
        debug_assert_eq!(mask.len(), self.grid.n_nodes());
        let m = self.grid.node_counts();
        let (m0, m1) = (m[0], if self.grid.dim() == 2 { m[1] } else { 1 });
        for off in &self.offsets {
            let jump = off.dj * m0 as isize + off.di;
            let ix_lo = (-off.di).max(0) as usize;
            let ix_hi = m0 - off.di.max(0) as usize;
            for iy in 0..m1 - off.dj as usize {
                let row = iy * m0;
                for ix in ix_lo..ix_hi {
                    let i = row + ix;
                    if !mask[i] {
                        continue;
                    }
                    let j = (i as isize + jump) as usize;
                    if mask[j] {
                        visit(i, j, off.coeff);
                    }
                }
            }
        }
    }
}

fn pair_count(m0: usize, m1: usize, off: &Offset) -> usize {
    (m0 - off.di.unsigned_abs()) * (m1 - off.dj.unsigned_abs())
}

/// Coefficient table indexed by `[|dj|][|di|]` (per-axis flips leave the
/// correlation integral invariant). Entry (0,0) is unused and left at 0.
fn coeff_table(grid: &Arc<Grid>, p: f64, s: f64, rel_tol: f64) -> Result<Vec<Vec<f64>>> {
    let m = grid.node_counts();
    let h = grid.spacings();
    let ps = p * s;
    if grid.dim() == 1 {
        let mut row = vec![0.0; m[0]];
        for (dm, slot) in row.iter_mut().enumerate().skip(1) {
            *slot = coeff_1d(dm, h[0], p, ps);
        }
        return Ok(vec![row]);
    }
    let (m0, m1) = (m[0], m[1]);
    let entries: Vec<(usize, usize)> = (0..m1)
        .flat_map(|dj| (0..m0).map(move |di| (di, dj)))
        .filter(|&(di, dj)| di + dj > 0)
        .collect();
    let computed: Vec<Result<f64>> = entries
        .par_iter()
        .map(|&(di, dj)| coeff_2d(di, dj, h[0], h[1], p, ps, rel_tol))
        .collect();
    let mut table = vec![vec![0.0; m0]; m1];
    for (&(di, dj), c) in entries.iter().zip(computed) {
        table[dj][di] = c?;
    }
    Ok(table)
}

/// 1D pair coefficient for index distance `dm ≥ 1`, all in closed form via
/// power integrals. The correlation weight of two length-`h` cells at
/// center distance `dm·h` is the triangle `(h - |z - dm·h|)⁺`.
fn coeff_1d(dm: usize, h: f64, p: f64, ps: f64) -> f64 {
    let d = dm as f64 * h;
    if dm == 1 {
        // Direction-weighted: ∫ (|z|/h)^p |z|^{-1-ps} tri(z-h) dz on (0, 2h).
        let rising = power_int(0.0, h, p - ps);
        let falling = 2.0 * h * power_int(h, 2.0 * h, p - ps - 1.0) - power_int(h, 2.0 * h, p - ps);
        (rising + falling) * h.powf(-p)
    } else if dm <= 3 {
        // Plain average: ∫ |z|^{-1-ps} tri(z - dm·h) dz.
        let (lo, hi) = (d - h, d + h);
        let rising = power_int(lo, d, -ps) - lo * power_int(lo, d, -1.0 - ps);
        let falling = hi * power_int(d, hi, -1.0 - ps) - power_int(d, hi, -ps);
        rising + falling
    } else {
        h * h * d.powf(-1.0 - ps)
    }
}

/// 2D pair coefficient for offset `(di, dj) ≥ 0`, `di + dj ≥ 1`.
fn coeff_2d(
    di: usize,
    dj: usize,
    h0: f64,
    h1: f64,
    p: f64,
    ps: f64,
    rel_tol: f64,
) -> Result<f64> {
    let delta = [di as f64 * h0, dj as f64 * h1];
    let weight = move |z0: f64, z1: f64| (h0 - (z0 - delta[0]).abs()) * (h1 - (z1 - delta[1]).abs());
    let touching = di <= 1 && dj <= 1;
    if touching {
        let d = delta[0].hypot(delta[1]);
        let e = [delta[0] / d, delta[1] / d];
        let f = move |z0: f64, z1: f64| {
            let r2 = z0 * z0 + z1 * z1;
            let proj = (z0 * e[0] + z1 * e[1]).abs() / d;
            proj.powf(p) * r2.powf(-0.5 * (2.0 + ps)) * weight(z0, z1)
        };
        singular_box_integral(&f, delta, [h0, h1], p - ps, rel_tol)
    } else if di <= 3 && dj <= 3 {
        let f = move |z0: f64, z1: f64| {
            let r2 = z0 * z0 + z1 * z1;
            r2.powf(-0.5 * (2.0 + ps)) * weight(z0, z1)
        };
        adaptive_rect(
            &f,
            [delta[0] - h0, delta[0] + h0, delta[1] - h1, delta[1] + h1],
            rel_tol,
        )
    } else {
        let r = delta[0].hypot(delta[1]);
        Ok((h0 * h1) * (h0 * h1) * r.powf(-2.0 - ps))
    }
}

/// Integral of `f` over the box `delta ± half` when `f` has an integrable
/// power singularity of order `decay > 0` at the origin (meaning the
/// integral over `{|z|∞ ≤ r}` scales like `r^decay`): splits the box at the
/// correlation-weight kink lines, then sums dyadic max-norm annuli around
/// the origin, each covered by at most four rectangles with a smooth
/// integrand. Ring sums decay geometrically with ratio `2^{-decay}`.
fn singular_box_integral(
    f: &(impl Fn(f64, f64) -> f64 + Sync),
    delta: [f64; 2],
    half: [f64; 2],
    decay: f64,
    rel_tol: f64,
) -> Result<f64> {
    debug_assert!(decay > 0.0);
    let ratio = 2f64.powf(-decay);
    // Sub-boxes on which the weight is a smooth bilinear function.
    let xs = [delta[0] - half[0], delta[0], delta[0] + half[0]];
    let ys = [delta[1] - half[1], delta[1], delta[1] + half[1]];
    let mut total = 0.0;
    for bx in 0..2 {
        for by in 0..2 {
            let sub = [xs[bx], xs[bx + 1], ys[by], ys[by + 1]];
            let rho = sub
                .iter()
                .map(|v| v.abs())
                .fold(0.0f64, f64::max);
            if rho == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            let mut r_out = rho;
            for k in 0..8000usize {
                let r_in = 0.5 * r_out;
                let mut ring = 0.0;
                for piece in frame_pieces(r_in, r_out) {
                    if let Some(r) = intersect(piece, sub) {
                        ring += gauss_rect(f, r[0], r[1], r[2], r[3]);
                    }
                }
                acc += ring;
                // Geometric tail bound: remainder ≤ ring · ratio/(1-ratio).
                if k >= 3 && ring.abs() * ratio / (1.0 - ratio) <= rel_tol * acc.abs() {
                    break;
                }
                if k == 7999 {
                    return Err(Error::QuadratureTolerance {
                        requested: rel_tol,
                        achieved: ring.abs() / acc.abs().max(1e-300),
                    });
                }
                r_out = r_in;
            }
            total += acc;
        }
    }
    Ok(total)
}

/// The max-norm annulus `{r_in ≤ |z|∞ ≤ r_out}` as four rectangles.
fn frame_pieces(r_in: f64, r_out: f64) -> [[f64; 4]; 4] {
    [
        [-r_out, r_out, r_in, r_out],
        [-r_out, r_out, -r_out, -r_in],
        [-r_out, -r_in, -r_in, r_in],
        [r_in, r_out, -r_in, r_in],
    ]
}

fn intersect(a: [f64; 4], b: [f64; 4]) -> Option<[f64; 4]> {
    let r = [a[0].max(b[0]), a[1].min(b[1]), a[2].max(b[2]), a[3].min(b[3])];
    (r[1] > r[0] && r[3] > r[2]).then_some(r)
}

/// Unit-coefficient exterior weights `W_ext(x_i) = ∫_{R^N∖Ω} |x_i-y|^{-N-ps} dy`
/// for every node.
pub(crate) fn exterior_weight_table(grid: &Arc<Grid>, ps: f64, rel_tol: f64) -> Result<Vec<f64>> {
    let n = grid.n_nodes();
    if grid.dim() == 1 {
        let l = grid.extents()[0];
        return Ok((0..n)
            .map(|i| {
                let x = grid.node_pos(i)[0];
                (x.powf(-ps) + (l - x).powf(-ps)) / ps
            })
            .collect());
    }
    let ext = [grid.extents()[0], grid.extents()[1]];
    (0..n)
        .into_par_iter()
        .map(|i| {
            let pos = grid.node_pos(i);
            exterior_weight_2d(pos, ext, ps, rel_tol)
        })
        .collect()
}

/// Polar-exact exterior weight in 2D: `∫_0^{2π} r_exit(θ)^{-ps} dθ / ps`,
/// with the angular integral split at the four corner directions (the only
/// kinks of the exit distance on a convex box).
fn exterior_weight_2d(x: [f64; 2], ext: [f64; 2], ps: f64, rel_tol: f64) -> Result<f64> {
    let corners = [[0.0, 0.0], [ext[0], 0.0], [ext[0], ext[1]], [0.0, ext[1]]];
    let mut angles: Vec<f64> = corners
        .iter()
        .map(|c| (c[1] - x[1]).atan2(c[0] - x[0]))
        .collect();
    angles.sort_by(f64::total_cmp);
    let exit = move |theta: f64| {
        let (sin, cos) = theta.sin_cos();
        let tx = if cos > 0.0 {
            (ext[0] - x[0]) / cos
        } else if cos < 0.0 {
            -x[0] / cos
        } else {
            f64::INFINITY
        };
        let ty = if sin > 0.0 {
            (ext[1] - x[1]) / sin
        } else if sin < 0.0 {
            -x[1] / sin
        } else {
            f64::INFINITY
        };
        tx.min(ty).powf(-ps)
    };
    let mut total = 0.0;
    for k in 0..4 {
        let a = angles[k];
        let b = if k == 3 {
            angles[0] + std::f64::consts::TAU
        } else {
            angles[k + 1]
        };
        if b > a + 1e-15 {
            total += adaptive_interval(&exit, a, b, rel_tol)?;
        }
    }
    Ok(total / ps)
}
