//! Discrete energies and derived quantities: the anisotropic local energy,
//! the nonlocal energy (through a [`NonlocalAssembly`]), Sobolev-type norms,
//! the nonlocal tail, and nodal ball statistics.

use std::sync::Arc;

use serde::Serialize;

use crate::assembly::{exterior_weight_table, NonlocalAssembly};
use crate::error::{Error, Result};
use crate::exponents::Exponents;
use crate::finsler::{flux, norm_q};
use crate::grid::{discrete_gradient, Grid, GridFunction};

/// Local energy `(a/p) Σ_cells H(∇u)^p · vol` and its exact gradient.
pub fn local_energy_grad(u: &GridFunction, exps: &Exponents) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; u.len()];
    let e = local_energy_into(u.grid(), u.values(), exps, &mut grad);
    (e, grad)
}

/// Core of [`local_energy_grad`] accumulating into a caller buffer.
///
/// The energy derivative distributes each cell's flux `B(∇u_cell)` onto the
/// (at most three) nodes entering the cell's forward differences.
pub(crate) fn local_energy_into(
    grid: &Arc<Grid>,
    u: &[f64],
    exps: &Exponents,
    grad: &mut [f64],
) -> f64 {
    let m = grid.node_counts();
    let h = grid.spacings();
    let (m0, h0) = (m[0], h[0]);
    let vol = grid.node_weight();
    let (p, q, a) = (exps.p, exps.q, exps.a);
    let mut energy = 0.0;
    if grid.dim() == 1 {
        for cx in 0..=m0 as isize {
            let lo = grid.value_at(u, cx - 1, 0);
            let gx = (grid.value_at(u, cx, 0) - lo) / h0;
            energy += gx.abs().powf(p);
            let b = flux([gx, 0.0], p, q, a)[0] * vol / h0;
            if cx < m0 as isize {
                grad[cx as usize] += b;
            }
            if cx > 0 {
                grad[cx as usize - 1] -= b;
            }
        }
        return a * vol * energy / p;
    }
    let (m1, h1) = (m[1], h[1]);
    for cy in 0..=m1 as isize {
        for cx in 0..=m0 as isize {
            let base = grid.value_at(u, cx - 1, cy - 1);
            let gx = (grid.value_at(u, cx, cy - 1) - base) / h0;
            let gy = (grid.value_at(u, cx - 1, cy) - base) / h1;
            energy += norm_q([gx, gy], q).powf(p);
            let b = flux([gx, gy], p, q, a);
            let (bx, by) = (b[0] * vol / h0, b[1] * vol / h1);
            if cx < m0 as isize && cy > 0 {
                grad[grid.node_index(cx as usize, cy as usize - 1)] += bx;
            }
            if cx > 0 && cy < m1 as isize {
                grad[grid.node_index(cx as usize - 1, cy as usize)] += by;
            }
            if cx > 0 && cy > 0 {
                grad[grid.node_index(cx as usize - 1, cy as usize - 1)] -= bx + by;
            }
        }
    }
    a * vol * energy / p
}

/// Nonlocal energy and gradient for the physical coefficient `exps.b`.
pub fn nonlocal_energy_grad(
    u: &GridFunction,
    assembly: &NonlocalAssembly,
    exps: &Exponents,
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; u.len()];
    let e = assembly.energy_and_grad(u.values(), exps.b, &mut grad);
    (e, grad)
}

/// The full energy model: local part always, nonlocal part when `b > 0`.
///
/// `b = 0` is the pure-local limit and carries no assembly; `b > 0` requires
/// an assembly built for the same grid and `(p, s)`.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    exps: Exponents,
    grid: Arc<Grid>,
    assembly: Option<Arc<NonlocalAssembly>>,
}

impl EnergyModel {
    pub fn new(
        grid: Arc<Grid>,
        exps: Exponents,
        assembly: Option<Arc<NonlocalAssembly>>,
    ) -> Result<Self> {
        if exps.dim != grid.dim() {
            return Err(Error::invalid("exponent dimension does not match grid"));
        }
        match (&assembly, exps.b > 0.0) {
            (None, true) => {
                return Err(Error::invalid("b > 0 requires a nonlocal assembly"));
            }
            (Some(_), false) => {
                return Err(Error::invalid("b = 0 admits no nonlocal assembly"));
            }
            (Some(asm), true) => {
                if !Arc::ptr_eq(asm.grid(), &grid) {
                    return Err(Error::invalid("assembly was built for a different grid"));
                }
                if asm.p() != exps.p || asm.s() != exps.s {
                    return Err(Error::invalid("assembly was built for different (p, s)"));
                }
            }
            (None, false) => {}
        }
        Ok(EnergyModel {
            exps,
            grid,
            assembly,
        })
    }

    pub fn exps(&self) -> &Exponents {
        &self.exps
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn assembly(&self) -> Option<&Arc<NonlocalAssembly>> {
        self.assembly.as_ref()
    }

    /// Total Dirichlet energy (local + nonlocal) with its exact gradient.
    pub fn energy_grad(&self, u: &GridFunction) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; u.len()];
        let e = self.energy_into(u.values(), &mut grad);
        (e, grad)
    }

    pub(crate) fn energy_into(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        let mut e = local_energy_into(&self.grid, u, &self.exps, grad);
        if let Some(asm) = &self.assembly {
            e += asm.energy_and_grad(u, self.exps.b, grad);
        }
        e
    }
}

/// `W_0^{1,p}` norm `(Σ_cells |∇u|₂^p · vol)^{1/p}` (Euclidean norm on the
/// cell gradients).
pub fn w1p_norm(u: &GridFunction, p: f64) -> f64 {
    let vol = u.grid().node_weight();
    let sum: f64 = discrete_gradient(u)
        .iter()
        .map(|g| g[0].hypot(g[1]).powf(p))
        .sum();
    (vol * sum).powf(1.0 / p)
}

/// Gagliardo seminorm (to the power `p`) of the zero extension,
/// `Σ_{i≠j} |u_i-u_j|^p A_ij + 2 Σ_i |u_i|^p W_ext(x_i) w_i`, i.e. `2p`
/// times the unit-coefficient nonlocal energy.
pub fn gagliardo_seminorm(u: &GridFunction, assembly: &NonlocalAssembly) -> f64 {
    let mut scratch = vec![0.0; u.len()];
    2.0 * assembly.p() * assembly.energy_and_grad(u.values(), 1.0, &mut scratch)
}

/// Nonlocal tail of `u` outside the ball `B_r(x0)`:
/// `(r^p Σ_{|y_i-x0| ≥ r} |u_i|^{p-1} |y_i-x0|^{-N-ps} w_i)^{1/(p-1)}`.
/// The exterior of `Ω` contributes nothing under the zero extension.
pub fn tail(u: &GridFunction, x0: [f64; 2], r: f64, exps: &Exponents) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid("tail radius must be positive"));
    }
    let grid = u.grid();
    let w = grid.node_weight();
    let power = -(exps.dim as f64 + exps.ps());
    let mut sum = 0.0;
    for (i, &ui) in u.values().iter().enumerate() {
        let d = grid.dist(grid.node_pos(i), x0);
        if d >= r {
            sum += ui.abs().powf(exps.p - 1.0) * d.powf(power) * w;
        }
    }
    Ok((r.powf(exps.p) * sum).powf(1.0 / (exps.p - 1.0)))
}

/// Nodal statistics over a ball (node-center membership).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BallStats {
    pub sup: f64,
    pub inf: f64,
    /// `(⨍_B |u|^l)^{1/l}` by nodal quadrature.
    pub lp_mean: f64,
    /// Fraction of ball nodes with `u ≥ k`.
    pub fraction_above: f64,
    pub node_count: usize,
}

/// Sup/inf, `l`-mean, and the level-set fraction `|B ∩ {u ≥ k}| / |B|` over
/// the nodes of `B_r(x0)`. Errors when the ball contains no node.
pub fn ball_stats(u: &GridFunction, x0: [f64; 2], r: f64, l: f64, k: f64) -> Result<BallStats> {
    if !(l > 0.0) {
        return Err(Error::invalid("mean exponent l must be positive"));
    }
    let nodes = u.grid().nodes_in_ball(x0, r);
    if nodes.is_empty() {
        return Err(Error::invalid(format!(
            "ball of radius {r} contains no grid node"
        )));
    }
    let mut sup = f64::NEG_INFINITY;
    let mut inf = f64::INFINITY;
    let mut mean = 0.0;
    let mut above = 0usize;
    for &i in &nodes {
        let v = u.values()[i];
        sup = sup.max(v);
        inf = inf.min(v);
        mean += v.abs().powf(l);
        if v >= k {
            above += 1;
        }
    }
    Ok(BallStats {
        sup,
        inf,
        lp_mean: (mean / nodes.len() as f64).powf(1.0 / l),
        fraction_above: above as f64 / nodes.len() as f64,
        node_count: nodes.len(),
    })
}

/// Exterior kernel weights `W_ext(x_i) = ∫_{R^N∖Ω} K(x_i, y) dy` with the
/// physical coefficient `b` (zeros when `b = 0`).
pub fn exterior_weight(grid: &Arc<Grid>, exps: &Exponents, rel_tol: f64) -> Result<Vec<f64>> {
    if exps.dim != grid.dim() {
        return Err(Error::invalid("exponent dimension does not match grid"));
    }
    if exps.b == 0.0 {
        return Ok(vec![0.0; grid.n_nodes()]);
    }
    let table = exterior_weight_table(grid, exps.ps(), rel_tol)?;
    Ok(table.into_iter().map(|w| exps.b * w).collect())
}

/// Potential contribution of a nodal source density: `-Σ G(x_i, u_i) w_i`
/// with gradient `-g(x_i, u_i) w_i`; used by the solver module.
pub(crate) fn source_term_into(
    grid: &Arc<Grid>,
    u: &[f64],
    g: impl Fn(usize, f64) -> f64,
    g_primitive: impl Fn(usize, f64) -> f64,
    grad: &mut [f64],
) -> f64 {
    let w = grid.node_weight();
    let mut e = 0.0;
    for (i, (&ui, gi)) in u.iter().zip(grad.iter_mut()).enumerate() {
        e -= g_primitive(i, ui) * w;
        *gi -= g(i, ui) * w;
    }
    e
}
