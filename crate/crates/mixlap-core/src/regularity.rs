//! Empirical verification of the regularity apparatus on computed fields:
//! cutoff bumps, sub/supersolution certification, and two-sided inequality
//! reports (energy estimates, tail bound, expansion of positivity, local
//! boundedness, Harnack and weak Harnack) with fitted constants.

use std::sync::Arc;

use serde::Serialize;

use crate::energy::{ball_stats, tail, EnergyModel};
use crate::error::{Error, Result};
use crate::exponents::Exponents;
use crate::grid::{discrete_gradient, Grid, GridFunction};
use crate::solver::Objective;

/// Sign classification of a field against a discrete equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Certificate {
    Solution,
    Subsolution,
    Supersolution,
    Indeterminate,
}

/// Classify `u` by the componentwise sign of the equation residual paired
/// with the nonnegative nodal basis functions, up to `1e-6` of the residual
/// density scale.
pub fn certify(u: &GridFunction, objective: &Objective) -> Certificate {
    let w = u.grid().node_weight();
    let densities: Vec<f64> = objective.residual(u).iter().map(|r| r / w).collect();
    let scale = densities.iter().fold(1.0f64, |m, d| m.max(d.abs()));
    let tol = 1e-6 * scale;
    let sub = densities.iter().all(|&d| d <= tol);
    let sup = densities.iter().all(|&d| d >= -tol);
    match (sub, sup) {
        (true, true) => Certificate::Solution,
        (true, false) => Certificate::Subsolution,
        (false, true) => Certificate::Supersolution,
        (false, false) => Certificate::Indeterminate,
    }
}

/// Which truncation enters an energy estimate: `(u-k)⁺` for subsolutions,
/// `(u-k)⁻` for supersolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TruncationSide {
    Upper,
    Lower,
}

impl TruncationSide {
    /// The truncation applied to a value (also used for the zero extension).
    pub fn apply(&self, v: f64, k: f64) -> f64 {
        match self {
            TruncationSide::Upper => (v - k).max(0.0),
            TruncationSide::Lower => (k - v).max(0.0),
        }
    }
}

/// Smooth radial bump: 1 on `B_ρ(x0)`, 0 outside `B_r(x0)`, quintic
/// smoothstep in between (`|∇ψ| ≤ 2/(r-ρ)`, checked on all cells).
#[derive(Debug, Clone)]
pub struct CutoffFunction {
    x0: [f64; 2],
    r: f64,
    rho: f64,
    values: GridFunction,
}

impl CutoffFunction {
    pub fn new(grid: Arc<Grid>, x0: [f64; 2], r: f64, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < r) {
            return Err(Error::invalid("cutoff needs 0 < ρ < r"));
        }
        if !ball_inside(&grid, x0, r) {
            return Err(Error::invalid("cutoff ball B_r(x0) must lie inside Ω"));
        }
        let width = r - rho;
        let values = GridFunction::new(
            grid.clone(),
            (0..grid.n_nodes())
                .map(|i| {
                    let d = grid.dist(grid.node_pos(i), x0);
                    if d <= rho {
                        1.0
                    } else if d >= r {
                        0.0
                    } else {
                        smoothstep_fall((d - rho) / width)
                    }
                })
                .collect(),
        )?;
        let bound = 2.0 / width;
        let worst = discrete_gradient(&values)
            .iter()
            .map(|g| g[0].hypot(g[1]))
            .fold(0.0f64, f64::max);
        if worst > bound {
            return Err(Error::invalid(format!(
                "cutoff gradient bound violated: {worst:.3e} > {bound:.3e} \
                 (grid too coarse for the transition width {width:.3e})"
            )));
        }
        Ok(CutoffFunction { x0, r, rho, values })
    }

    pub fn values(&self) -> &GridFunction {
        &self.values
    }

    pub fn center(&self) -> [f64; 2] {
        self.x0
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn plateau_radius(&self) -> f64 {
        self.rho
    }
}

/// Falling quintic smoothstep: 1 at τ = 0, 0 at τ = 1, C² at both ends,
/// maximum slope 15/8 at τ = 1/2.
fn smoothstep_fall(tau: f64) -> f64 {
    1.0 - tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau)
}

/// `B_r(x0) ⊂ Ω̄` componentwise.
fn ball_inside(grid: &Grid, x0: [f64; 2], r: f64) -> bool {
    let e = grid.extents();
    let mut ok = x0[0] - r >= 0.0 && x0[0] + r <= e[0];
    if grid.dim() == 2 {
        ok = ok && x0[1] - r >= 0.0 && x0[1] + r <= e[1];
    }
    ok
}

/// Two sides of a verified inequality with the fitted constant `lhs/rhs`.
///
/// `pass` means the inequality is checkable and non-degenerate: `rhs > 0`
/// with finite ratio, or both sides exactly zero. A non-empty `note` marks
/// vacuous or precondition-limited reports.
#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub kind: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub c_fit: f64,
    pub pass: bool,
    pub note: String,
    pub p: f64,
    pub s: f64,
    pub q: f64,
    pub r: f64,
    pub big_r: f64,
    pub k_or_l: f64,
    pub grid_m: usize,
}

struct ReportCtx {
    kind: &'static str,
    exps: Exponents,
    r: f64,
    big_r: f64,
    k_or_l: f64,
    grid_m: usize,
}

fn finish(ctx: ReportCtx, lhs: f64, rhs: f64, note: String) -> InequalityReport {
    let (c_fit, pass) = if rhs > 0.0 {
        let c = lhs / rhs;
        (c, c.is_finite())
    } else if lhs == 0.0 {
        (0.0, true)
    } else {
        (f64::INFINITY, false)
    };
    InequalityReport {
        kind: ctx.kind,
        lhs,
        rhs,
        c_fit,
        pass,
        note,
        p: ctx.exps.p,
        s: ctx.exps.s,
        q: ctx.exps.q,
        r: ctx.r,
        big_r: ctx.big_r,
        k_or_l: ctx.k_or_l,
        grid_m: ctx.grid_m,
    }
}

/// CSV serialization of a report sweep
/// (`report_kind,p,s,q,r,R,k_or_l,lhs,rhs,c_fit,grid_M,pass`).
pub fn sweep_csv(reports: &[InequalityReport]) -> String {
    let mut out = String::from("report_kind,p,s,q,r,R,k_or_l,lhs,rhs,c_fit,grid_M,pass\n");
    for rep in reports {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}\n",
            rep.kind,
            rep.p,
            rep.s,
            rep.q,
            rep.r,
            rep.big_r,
            rep.k_or_l,
            rep.lhs,
            rep.rhs,
            rep.c_fit,
            rep.grid_m,
            rep.pass
        ));
    }
    out
}

/// Visit every cell as `(cell_index, cx, cy)` in the canonical order of
/// [`discrete_gradient`].
fn for_each_cell(grid: &Grid, mut visit: impl FnMut(usize, isize, isize)) {
    let m = grid.node_counts();
    let rows = if grid.dim() == 2 { m[1] + 1 } else { 1 };
    let mut cell = 0usize;
    for cy in 0..rows as isize {
        for cx in 0..=m[0] as isize {
            visit(cell, cx, cy);
            cell += 1;
        }
    }
}

/// Average of a nodal field over a cell's corners (zero extension).
fn cell_avg(grid: &Grid, vals: &[f64], cx: isize, cy: isize) -> f64 {
    if grid.dim() == 1 {
        (grid.value_at(vals, cx - 1, 0) + grid.value_at(vals, cx, 0)) / 2.0
    } else {
        (grid.value_at(vals, cx - 1, cy - 1)
            + grid.value_at(vals, cx, cy - 1)
            + grid.value_at(vals, cx - 1, cy)
            + grid.value_at(vals, cx, cy)) / 4.0
    }
}

/// Plain kernel power `|x_i - x_j|^{-(N+ps)}` between two nodes.
fn plain_kernel(grid: &Grid, exps: &Exponents, i: usize, j: usize) -> f64 {
    grid.dist(grid.node_pos(i), grid.node_pos(j))
        .powf(-(exps.dim as f64 + exps.ps()))
}

/// Caccioppoli-type energy estimate for the truncation `w` of `u` at level
/// `k`: cutoff-weighted gradient energy of `w` plus the kernel seminorm of
/// `wψ` over `B_r × B_r`, against the gradient-of-ψ term, the
/// `max{w(x),w(y)}`-difference term, and the exterior-tail term.
///
/// `ball_r` is the radius of the kernel-split ball `B_r(x0)`; the cutoff
/// must be supported strictly inside it (the compact-support hypothesis).
/// Without that gap the exterior kernel sup is evaluated arbitrarily close
/// to the ball boundary and grows without bound under mesh refinement.
pub fn caccioppoli_report(
    u: &GridFunction,
    k: f64,
    side: TruncationSide,
    psi: &CutoffFunction,
    ball_r: f64,
    model: &EnergyModel,
) -> Result<InequalityReport> {
    let grid = u.grid().clone();
    if !Arc::ptr_eq(&grid, model.grid()) || !Arc::ptr_eq(&grid, psi.values().grid()) {
        return Err(Error::invalid("field, cutoff and model grids must agree"));
    }
    if ball_r <= psi.radius() {
        return Err(Error::invalid(
            "kernel ball must strictly contain the cutoff support",
        ));
    }
    if !ball_inside(&grid, psi.center(), ball_r) {
        return Err(Error::invalid("B_r(x0) must lie inside Ω"));
    }
    let exps = model.exps();
    let (p, b) = (exps.p, exps.b);
    let vol = grid.node_weight();

    let w: Vec<f64> = u.values().iter().map(|&v| side.apply(v, k)).collect();
    let w_exterior = side.apply(0.0, k);
    let psi_vals = psi.values().values();
    let w_grads = {
        let wf = GridFunction::new(grid.clone(), w.clone())?;
        discrete_gradient(&wf)
    };
    let psi_grads = discrete_gradient(psi.values());

    // Local terms: ∫ ψ^p |∇w|^p and ∫ w^p |∇ψ|^p over cells.
    let mut lhs_local = 0.0;
    let mut rhs_grad = 0.0;
    for_each_cell(&grid, |cell, cx, cy| {
        let psi_c = cell_avg(&grid, psi_vals, cx, cy);
        let w_c = cell_avg(&grid, &w, cx, cy);
        let gw = w_grads[cell];
        let gpsi = psi_grads[cell];
        lhs_local += psi_c.powf(p) * gw[0].hypot(gw[1]).powf(p) * vol;
        rhs_grad += w_c.powf(p) * gpsi[0].hypot(gpsi[1]).powf(p) * vol;
    });

    // Kernel measure terms over B_r × B_r (ordered pairs = 2 × unordered).
    let mut lhs_pair = 0.0;
    let mut rhs_pair = 0.0;
    let mut term3 = 0.0;
    if let Some(asm) = model.assembly() {
        let in_ball: Vec<bool> = (0..grid.n_nodes())
            .map(|i| grid.dist(grid.node_pos(i), psi.center()) < ball_r)
            .collect();
        asm.for_each_pair_in(&in_ball, |i, j, a| {
            let d = w[i] * psi_vals[i] - w[j] * psi_vals[j];
            lhs_pair += d.abs().powf(p) * a;
            rhs_pair += w[i].max(w[j]).powf(p) * (psi_vals[i] - psi_vals[j]).abs().powf(p) * a;
        });
        lhs_pair *= 2.0 * b;
        rhs_pair *= 2.0 * b;

        // sup over supp ψ of ∫_{R^N∖B_r} w(y)^{p-1} K(x,y) dy, times ∫ w ψ^p.
        let w_ext_tables = asm.exterior_weights();
        let mut sup_tail = 0.0f64;
        for i in 0..grid.n_nodes() {
            if psi_vals[i] == 0.0 {
                continue;
            }
            let mut t = w_exterior.powf(p - 1.0) * w_ext_tables[i];
            for j in 0..grid.n_nodes() {
                if !in_ball[j] && w[j] > 0.0 {
                    t += w[j].powf(p - 1.0) * plain_kernel(&grid, exps, i, j) * vol;
                }
            }
            sup_tail = sup_tail.max(t);
        }
        let mass: f64 = w
            .iter()
            .zip(psi_vals)
            .map(|(&wi, &pi)| wi * pi.powf(p) * vol)
            .sum();
        term3 = b * sup_tail * mass;
    }

    let lhs = lhs_local + lhs_pair;
    let rhs = rhs_grad + rhs_pair + term3;
    if rhs == 0.0 && lhs > 0.0 {
        return Err(Error::invalid(format!(
            "structural failure in the energy estimate: lhs {lhs:.6e} with zero rhs"
        )));
    }
    Ok(finish(
        ReportCtx {
            kind: "caccioppoli",
            exps: *exps,
            r: ball_r,
            big_r: ball_r,
            k_or_l: k,
            grid_m: grid.node_counts()[0],
        },
        lhs,
        rhs,
        String::new(),
    ))
}

/// Energy estimate for nonnegative supersolutions with the negative-power
/// transform `w = (u+d)^{(p-q)/p}`: cutoff-weighted gradient energy of `w`
/// against the three prefactored right-hand terms.
///
/// `ball_r` is the kernel-split ball `B_r(x0)` with `r ≤ 3R/4`; the cutoff
/// must be supported strictly inside it so the exterior kernel sup stays
/// bounded under mesh refinement (the compact-support hypothesis).
pub fn supersolution_energy_report(
    u: &GridFunction,
    q_exp: f64,
    d: f64,
    psi: &CutoffFunction,
    ball_r: f64,
    big_r: f64,
    model: &EnergyModel,
) -> Result<InequalityReport> {
    let grid = u.grid().clone();
    if !Arc::ptr_eq(&grid, model.grid()) || !Arc::ptr_eq(&grid, psi.values().grid()) {
        return Err(Error::invalid("field, cutoff and model grids must agree"));
    }
    let exps = model.exps();
    let (p, b) = (exps.p, exps.b);
    if !(q_exp > 1.0 && q_exp < p) {
        return Err(Error::invalid("supersolution estimate needs 1 < q < p"));
    }
    if !(d > 0.0) {
        return Err(Error::invalid("shift d must be positive"));
    }
    if ball_r <= psi.radius() {
        return Err(Error::invalid(
            "kernel ball must strictly contain the cutoff support",
        ));
    }
    if ball_r > 0.75 * big_r {
        return Err(Error::invalid("kernel ball must satisfy r ≤ 3R/4"));
    }
    if !ball_inside(&grid, psi.center(), big_r) {
        return Err(Error::invalid("B_R(x0) must lie inside Ω"));
    }
    let x0 = psi.center();
    for i in grid.nodes_in_ball(x0, big_r) {
        if u.values()[i] < 0.0 {
            return Err(Error::invalid("supersolution estimate needs u ≥ 0 on B_R"));
        }
    }
    let vol = grid.node_weight();
    let w: Vec<f64> = u
        .values()
        .iter()
        .map(|&v| (v + d).powf((p - q_exp) / p))
        .collect();
    let w_exterior = d.powf((p - q_exp) / p);
    let psi_vals = psi.values().values();
    let w_grads = {
        let wf = GridFunction::new(grid.clone(), w.clone())?;
        discrete_gradient(&wf)
    };
    let psi_grads = discrete_gradient(psi.values());

    let mut lhs = 0.0;
    let mut rhs_grad = 0.0;
    for_each_cell(&grid, |cell, cx, cy| {
        // The transform has nonzero exterior value d^{(p-q)/p}; cells
        // bordering the boundary must average against it, not 0.
        let psi_c = cell_avg(&grid, psi_vals, cx, cy);
        let w_c = cell_avg_shifted(&grid, &w, w_exterior, cx, cy);
        let gw = w_grads_shifted(&grid, &w, w_exterior, cx, cy, w_grads[cell]);
        let gpsi = psi_grads[cell];
        lhs += psi_c.powf(p) * gw[0].hypot(gw[1]).powf(p) * vol;
        rhs_grad += w_c.powf(p) * gpsi[0].hypot(gpsi[1]).powf(p) * vol;
    });

    let mut rhs_pair = 0.0;
    let mut kernel_sup = 0.0f64;
    if let Some(asm) = model.assembly() {
        let in_ball: Vec<bool> = (0..grid.n_nodes())
            .map(|i| grid.dist(grid.node_pos(i), x0) < ball_r)
            .collect();
        asm.for_each_pair_in(&in_ball, |i, j, a| {
            rhs_pair += w[i].max(w[j]).powf(p) * (psi_vals[i] - psi_vals[j]).abs().powf(p) * a;
        });
        rhs_pair *= 2.0 * b;

        let w_ext_tables = asm.exterior_weights();
        for i in 0..grid.n_nodes() {
            if psi_vals[i] == 0.0 {
                continue;
            }
            let mut t = w_ext_tables[i];
            for j in 0..grid.n_nodes() {
                if !in_ball[j] {
                    t += plain_kernel(&grid, exps, i, j) * vol;
                }
            }
            kernel_sup = kernel_sup.max(b * t);
        }
    }
    let tail_neg = tail(&u.neg_part(), x0, big_r, exps)?;
    let mass: f64 = w
        .iter()
        .zip(psi_vals)
        .map(|(&wi, &pi)| wi.powf(p) * pi.powf(p) * vol)
        .sum();
    let pre = (p - q_exp).powf(p);
    let rhs = pre / (q_exp - 1.0).powf(p / (p - 1.0)) * rhs_grad
        + pre / (q_exp - 1.0).powf(p) * rhs_pair
        + pre / (q_exp - 1.0)
            * (kernel_sup + d.powf(1.0 - p) * big_r.powf(-p) * tail_neg.powf(p - 1.0))
            * mass;
    if rhs == 0.0 && lhs > 0.0 {
        return Err(Error::invalid(format!(
            "structural failure in the supersolution estimate: lhs {lhs:.6e} with zero rhs"
        )));
    }
    Ok(finish(
        ReportCtx {
            kind: "supersolution-energy",
            exps: *exps,
            r: ball_r,
            big_r,
            k_or_l: q_exp,
            grid_m: grid.node_counts()[0],
        },
        lhs,
        rhs,
        String::new(),
    ))
}

/// Cell average against a nonzero exterior value.
fn cell_avg_shifted(grid: &Grid, vals: &[f64], ext: f64, cx: isize, cy: isize) -> f64 {
    let at = |ix: isize, iy: isize| -> f64 {
        if node_exists(grid, ix, iy) {
            grid.value_at(vals, ix, iy)
        } else {
            ext
        }
    };
    if grid.dim() == 1 {
        (at(cx - 1, 0) + at(cx, 0)) / 2.0
    } else {
        (at(cx - 1, cy - 1) + at(cx, cy - 1) + at(cx - 1, cy) + at(cx, cy)) / 4.0
    }
}

/// Cell gradient corrected for a nonzero exterior value: off-grid stencil
/// nodes contribute `ext` instead of 0.
fn w_grads_shifted(
    grid: &Grid,
    vals: &[f64],
    ext: f64,
    cx: isize,
    cy: isize,
    zero_ext: [f64; 2],
) -> [f64; 2] {
    let h = grid.spacings();
    let at = |ix: isize, iy: isize| -> f64 {
        if node_exists(grid, ix, iy) {
            grid.value_at(vals, ix, iy)
        } else {
            ext
        }
    };
    if ext == 0.0 {
        return zero_ext;
    }
    if grid.dim() == 1 {
        [(at(cx, 0) - at(cx - 1, 0)) / h[0], 0.0]
    } else {
        let base = at(cx - 1, cy - 1);
        [
            (at(cx, cy - 1) - base) / h[0],
            (at(cx - 1, cy) - base) / h[1],
        ]
    }
}

fn node_exists(grid: &Grid, ix: isize, iy: isize) -> bool {
    let m = grid.node_counts();
    ix >= 0
        && (ix as usize) < m[0]
        && if grid.dim() == 2 {
            iy >= 0 && (iy as usize) < m[1]
        } else {
            iy == 0
        }
}

/// Tail bound on solutions nonnegative in `B_R`:
/// `Tail(u⁺;x0,r) ≤ c·sup_{B_r} u + c(r/R)^{p/(p-1)}·Tail(u⁻;x0,R)`.
pub fn tail_estimate_report(
    u: &GridFunction,
    x0: [f64; 2],
    r: f64,
    big_r: f64,
    exps: &Exponents,
) -> Result<InequalityReport> {
    check_ball_pair(u, x0, r, big_r, true)?;
    let lhs = tail(&u.pos_part(), x0, r, exps)?;
    let sup = ball_stats(u, x0, r, 1.0, 0.0)?.sup;
    let tail_neg = tail(&u.neg_part(), x0, big_r, exps)?;
    let rhs = sup + (r / big_r).powf(exps.p / (exps.p - 1.0)) * tail_neg;
    Ok(finish(
        ReportCtx {
            kind: "tail-estimate",
            exps: *exps,
            r,
            big_r,
            k_or_l: 0.0,
            grid_m: u.grid().node_counts()[0],
        },
        lhs,
        rhs,
        String::new(),
    ))
}

/// Expansion of positivity: a measure bound `|B_r ∩ {u ≥ k}| ≥ τ|B_r|`
/// propagates to `inf_{B_4r} u ≥ δk - (r/R)^{p/(p-1)}·Tail(u⁻;x0,R)` for
/// some δ ∈ (0, 1/4); reports the fitted δ.
pub fn positivity_expansion_report(
    u: &GridFunction,
    x0: [f64; 2],
    r: f64,
    big_r: f64,
    k: f64,
    tau: f64,
    exps: &Exponents,
) -> Result<InequalityReport> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::invalid("measure fraction τ must be in (0, 1]"));
    }
    if !(16.0 * r < big_r) {
        return Err(Error::invalid("positivity expansion needs 16r < R"));
    }
    check_ball_pair(u, x0, r, big_r, true)?;
    let ctx = ReportCtx {
        kind: "positivity-expansion",
        exps: *exps,
        r,
        big_r,
        k_or_l: k,
        grid_m: u.grid().node_counts()[0],
    };
    if k <= 0.0 {
        return Ok(finish(
            ctx,
            0.0,
            0.0,
            "nonpositive level: inequality vacuous".to_string(),
        ));
    }
    let stats = ball_stats(u, x0, r, 1.0, k)?;
    if stats.fraction_above < tau {
        return Ok(finish(
            ctx,
            stats.fraction_above,
            tau,
            format!(
                "measure precondition not met: fraction {:.4} < τ {:.4}",
                stats.fraction_above, tau
            ),
        ));
    }
    let inf4 = ball_stats(u, x0, 4.0 * r, 1.0, 0.0)?.inf;
    let tail_neg = tail(&u.neg_part(), x0, big_r, exps)?;
    let lhs = inf4 + (r / big_r).powf(exps.p / (exps.p - 1.0)) * tail_neg;
    Ok(finish(ctx, lhs, k, String::new()))
}

/// Local boundedness of subsolutions: `sup_{B_{r/2}} u` against
/// `δ·Tail(u⁺;x0,r/2) + δ^{-(p-1)κ/(p(κ-1))}·(⨍_{B_r}(u⁺)^p)^{1/p}`.
pub fn local_boundedness_report(
    u: &GridFunction,
    x0: [f64; 2],
    r: f64,
    delta_param: f64,
    exps: &Exponents,
) -> Result<InequalityReport> {
    if !(delta_param > 0.0 && delta_param <= 1.0) {
        return Err(Error::invalid("interpolation parameter δ must be in (0, 1]"));
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::invalid("radius must satisfy 0 < r ≤ 1"));
    }
    if !ball_inside(u.grid(), x0, r) {
        return Err(Error::invalid("B_r(x0) must lie inside Ω"));
    }
    let plus = u.pos_part();
    let lhs = ball_stats(u, x0, r / 2.0, 1.0, 0.0)?.sup.max(0.0);
    let tail_plus = tail(&plus, x0, r / 2.0, exps)?;
    let mean = ball_stats(&plus, x0, r, exps.p, 0.0)?.lp_mean;
    let kappa = exps.critical().kappa;
    let exponent = -(exps.p - 1.0) * kappa / (exps.p * (kappa - 1.0));
    let rhs = delta_param * tail_plus + delta_param.powf(exponent) * mean;
    Ok(finish(
        ReportCtx {
            kind: "local-boundedness",
            exps: *exps,
            r,
            big_r: r,
            k_or_l: delta_param,
            grid_m: u.grid().node_counts()[0],
        },
        lhs,
        rhs,
        String::new(),
    ))
}

/// Harnack quotient for solutions nonnegative in `B_R`:
/// `sup_{B_{r/2}} u` against `inf_{B_r} u + (r/R)^{p/(p-1)}·Tail(u⁻;x0,R)`.
pub fn harnack_report(
    u: &GridFunction,
    x0: [f64; 2],
    r: f64,
    big_r: f64,
    exps: &Exponents,
) -> Result<InequalityReport> {
    if !(r <= big_r / 2.0) {
        return Err(Error::invalid("Harnack needs B_r ⊂ B_{R/2}"));
    }
    check_ball_pair(u, x0, r, big_r, true)?;
    let lhs = ball_stats(u, x0, r / 2.0, 1.0, 0.0)?.sup;
    let inf = ball_stats(u, x0, r, 1.0, 0.0)?.inf;
    let tail_neg = tail(&u.neg_part(), x0, big_r, exps)?;
    let rhs = inf + (r / big_r).powf(exps.p / (exps.p - 1.0)) * tail_neg;
    let note = if rhs == 0.0 && lhs > 0.0 {
        "Harnack violation: positive sup with zero inf and zero tail".to_string()
    } else {
        String::new()
    };
    Ok(finish(
        ReportCtx {
            kind: "harnack",
            exps: *exps,
            r,
            big_r,
            k_or_l: 0.0,
            grid_m: u.grid().node_counts()[0],
        },
        lhs,
        rhs,
        note,
    ))
}

/// Weak Harnack quotient: `(⨍_{B_{r/2}} u^l)^{1/l}` (over `B_r` for the
/// preliminary small-exponent version) against the Harnack right-hand side;
/// requires `0 < l < κ(p-1)`.
pub fn weak_harnack_report(
    u: &GridFunction,
    x0: [f64; 2],
    r: f64,
    big_r: f64,
    l: f64,
    preliminary: bool,
    exps: &Exponents,
) -> Result<InequalityReport> {
    let kappa = exps.critical().kappa;
    if !(l > 0.0 && l < kappa * (exps.p - 1.0)) {
        return Err(Error::invalid(format!(
            "weak Harnack exponent must satisfy 0 < l < κ(p-1) = {}",
            kappa * (exps.p - 1.0)
        )));
    }
    let max_r = if preliminary { big_r } else { big_r / 2.0 };
    if !(r <= max_r) {
        return Err(Error::invalid("weak Harnack ball containment violated"));
    }
    check_ball_pair(u, x0, r, big_r, true)?;
    let mean_radius = if preliminary { r } else { r / 2.0 };
    let lhs = ball_stats(u, x0, mean_radius, l, 0.0)?.lp_mean;
    let inf = ball_stats(u, x0, r, 1.0, 0.0)?.inf;
    let tail_neg = tail(&u.neg_part(), x0, big_r, exps)?;
    let rhs = inf + (r / big_r).powf(exps.p / (exps.p - 1.0)) * tail_neg;
    let note = if rhs == 0.0 && lhs > 0.0 {
        "weak Harnack violation: positive mean with zero inf and zero tail".to_string()
    } else {
        String::new()
    };
    Ok(finish(
        ReportCtx {
            kind: if preliminary {
                "weak-harnack-preliminary"
            } else {
                "weak-harnack"
            },
            exps: *exps,
            r,
            big_r,
            k_or_l: l,
            grid_m: u.grid().node_counts()[0],
        },
        lhs,
        rhs,
        note,
    ))
}

/// Shared preconditions: `0 < r < R`, `r ≤ 1`, `B_R(x0) ⊂ Ω`, and (when
/// `need_nonneg`) `u ≥ 0` on the nodes of `B_R`.
fn check_ball_pair(
    u: &GridFunction,
    x0: [f64; 2],
    r: f64,
    big_r: f64,
    need_nonneg: bool,
) -> Result<()> {
    if !(r > 0.0 && r < big_r) {
        return Err(Error::invalid("radii must satisfy 0 < r < R"));
    }
    if r > 1.0 {
        return Err(Error::invalid("inner radius must satisfy r ≤ 1"));
    }
    let grid = u.grid();
    if !ball_inside(grid, x0, big_r) {
        return Err(Error::invalid("B_R(x0) must lie inside Ω"));
    }
    if need_nonneg {
        for i in grid.nodes_in_ball(x0, big_r) {
            if u.values()[i] < 0.0 {
                return Err(Error::invalid("field must be nonnegative on B_R"));
            }
        }
    }
    Ok(())
}
