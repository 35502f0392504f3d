//! The approximation scheme for the singular problem: truncated sources,
//! the monotone solution sequence `(u_n)`, regime classification, and the
//! uniform-bound monitors that certify its structural properties.

use serde::Serialize;

use crate::energy::{w1p_norm, EnergyModel};
use crate::error::{Error, Result};
use crate::exponents::{integrability_requirement, RegimeKind, SourceIntegrability};
use crate::finsler::structure_constants;
use crate::grid::{discrete_gradient, GridFunction};
use crate::solver::{minimize, Objective, SolveReport, SolverOptions, SourceDensity};

/// A singular problem instance: energy model plus the (untruncated) source
/// `f ≥ 0` and absorption exponent `γ > 0`, both nodal.
#[derive(Debug, Clone)]
pub struct SingularProblem {
    model: EnergyModel,
    f: Vec<f64>,
    gamma: Vec<f64>,
}

impl SingularProblem {
    pub fn new(model: EnergyModel, f: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        let n = model.grid().n_nodes();
        if f.len() != n || gamma.len() != n {
            return Err(Error::invalid("source/exponent length does not match grid"));
        }
        if !f.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(Error::invalid("source must be finite and nonnegative"));
        }
        if !gamma.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::invalid("absorption exponent must be positive"));
        }
        Ok(SingularProblem { model, f, gamma })
    }

    pub fn model(&self) -> &EnergyModel {
        &self.model
    }

    pub fn source(&self) -> &[f64] {
        &self.f
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// `‖f‖_{L¹(Ω)}` by nodal quadrature.
    pub fn source_l1(&self) -> f64 {
        let w = self.model.grid().node_weight();
        self.f.iter().sum::<f64>() * w
    }
}

/// Nodewise truncation `min(f, n)`; nondecreasing in `n`.
pub fn truncated_source(f: &[f64], n: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("truncation level must be >= 1"));
    }
    if !f.iter().all(|v| v.is_finite() && *v >= 0.0) {
        return Err(Error::invalid("source must be finite and nonnegative"));
    }
    let cap = n as f64;
    Ok(f.iter().map(|&v| v.min(cap)).collect())
}

/// Solve the level-`n` regularized problem (source `min(f,n)`, density
/// `(t⁺ + 1/n)^{-γ}`) from a warm start; asserts nodewise nonnegativity.
pub fn approx_step(
    problem: &SingularProblem,
    n: u64,
    warm: &GridFunction,
    opts: &SolverOptions,
) -> Result<(GridFunction, SolveReport)> {
    let wrap = |e: Error| Error::Step {
        n,
        source: Box::new(e),
    };
    let source = SourceDensity::ShiftedSingular {
        f: truncated_source(&problem.f, n)?,
        gamma: problem.gamma.clone(),
        n,
    };
    let objective = Objective::new(problem.model.clone(), source).map_err(wrap)?;
    let (u, report) = minimize(&objective, warm, opts).map_err(wrap)?;
    let scale = u.sup_norm().max(1.0);
    let floor = -1e-8 * scale;
    if let Some((i, &v)) = u
        .values()
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
    {
        if v < floor {
            return Err(Error::SequenceViolation {
                n,
                property: "nodewise nonnegativity",
                details: format!("u({i}) = {v:.6e} below {floor:.1e}"),
            });
        }
    }
    Ok((u, report))
}

/// Source-singularity regime of a problem, with the strip bound γ* and the
/// integrability the source must satisfy.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Regime {
    pub kind: RegimeKind,
    /// The constant γ for constant regimes; the boundary-strip supremum
    /// otherwise.
    pub gamma_star: f64,
    pub integrability: SourceIntegrability,
}

/// Classify the absorption exponent field into its regime.
///
/// Constant regimes require exact nodewise equality; variable regimes
/// compare the supremum of γ over the boundary strip `Ω_δ` (falling back to
/// the outermost node ring when the strip contains no node) against 1.
/// A caller-supplied override is validated against the same hypotheses.
pub fn regime_classify(
    problem: &SingularProblem,
    override_kind: Option<RegimeKind>,
) -> Result<Regime> {
    let grid = problem.model().grid();
    let gamma = problem.gamma();
    let first = gamma[0];
    let constant = gamma.iter().all(|&g| g == first);
    let strip = grid.strip_mask();
    let strip_sup = if strip.iter().any(|&b| b) {
        gamma
            .iter()
            .zip(&strip)
            .filter(|(_, &m)| m)
            .map(|(&g, _)| g)
            .fold(f64::NEG_INFINITY, f64::max)
    } else {
        // No node falls inside the strip: use the outermost ring.
        let ring = (0..grid.n_nodes())
            .map(|i| grid.boundary_distance(i))
            .fold(f64::INFINITY, f64::min);
        gamma
            .iter()
            .enumerate()
            .filter(|(i, _)| grid.boundary_distance(*i) == ring)
            .map(|(_, &g)| g)
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let computed = if constant {
        if first < 1.0 {
            RegimeKind::ConstantMild
        } else if first == 1.0 {
            RegimeKind::ConstantUnit
        } else {
            RegimeKind::ConstantStrong
        }
    } else if strip_sup <= 1.0 {
        RegimeKind::VariableMild
    } else {
        RegimeKind::VariableStrong
    };

    let kind = match override_kind {
        None => computed,
        Some(k) => {
            // A constant exponent may legitimately be run under the variable
            // hypotheses; the converse and range mismatches are rejected.
            let compatible = match k {
                RegimeKind::VariableMild => strip_sup <= 1.0,
                RegimeKind::VariableStrong => strip_sup > 1.0,
                RegimeKind::ConstantMild => constant && first < 1.0,
                RegimeKind::ConstantUnit => constant && first == 1.0,
                RegimeKind::ConstantStrong => constant && first > 1.0,
            };
            if !compatible {
                return Err(Error::invalid(format!(
                    "regime override {} is incompatible with the exponent field \
                     (constant = {constant}, strip sup = {strip_sup}); classified as {}",
                    k.label(),
                    computed.label()
                )));
            }
            k
        }
    };

    let gamma_star = if constant { first } else { strip_sup };
    let gamma_arg = match kind {
        RegimeKind::VariableMild => None,
        _ => Some(gamma_star),
    };
    Ok(Regime {
        kind,
        gamma_star,
        integrability: integrability_requirement(kind, problem.model().exps(), gamma_arg)?,
    })
}

impl Regime {
    /// Exponent α such that `u^α` is the monitored field (1 for the mild
    /// and unit regimes, `(γ*+p−1)/p` for the strong ones).
    pub fn monitor_exponent(&self, p: f64) -> f64 {
        match self.kind {
            RegimeKind::VariableStrong | RegimeKind::ConstantStrong => {
                (self.gamma_star + p - 1.0) / p
            }
            _ => 1.0,
        }
    }
}

/// Per-level record of the sequence run.
#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub n: u64,
    /// `‖u_n‖_{W₀^{1,p}}`.
    pub w1p: f64,
    /// The regime's monitored norm `‖u_n^α‖_{W₀^{1,p}}`.
    pub monitored: f64,
    /// `min u_n` over the nested insets `{0.125, 0.25, 0.375}·diam`.
    pub min_on_subdomains: Vec<f64>,
    /// `sup |u_n - u_prev|` against the previous schedule level.
    pub sup_diff: Option<f64>,
    /// `sup |u_{n+1} - u_n|` from the extra unit-step solve (levels ≥ 4).
    pub cauchy_increment: Option<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub backtracks: usize,
}

/// Fractions of the domain diameter used as nested positivity insets.
pub const POSITIVITY_INSETS: [f64; 3] = [0.125, 0.25, 0.375];

/// Result of [`run_sequence`]: all levels' solutions and records plus the
/// post-hoc diagnostics.
#[derive(Debug, Clone)]
pub struct ApproxSequence {
    pub records: Vec<StepRecord>,
    pub solutions: Vec<GridFunction>,
    /// Whether `sup_diff` fell below the Cauchy tolerance before the
    /// schedule was exhausted.
    pub stopped_early: bool,
    /// First record index from which every inset minimum stays within 10%
    /// of its final value (`None` when that never happens).
    pub positivity_uniform_from: Option<usize>,
    /// Levels (report-only) where the cellwise gradient distance to the
    /// final solution failed to decrease.
    pub gradient_diag_violations: Vec<u64>,
}

impl ApproxSequence {
    /// The computed solution of the singular problem (last level's state).
    pub fn final_solution(&self) -> &GridFunction {
        self.solutions.last().expect("sequence is never empty")
    }
}

/// Tolerances of the sequence run, relative to `max(1, sup u)`.
#[derive(Debug, Clone, Copy)]
pub struct SequenceOptions {
    pub solver: SolverOptions,
    /// Monotonicity slack factor (`u_{n+1} ≥ u_n - tol_mono·scale`).
    pub tol_mono: f64,
    /// Early-stop threshold on `sup |u_n - u_prev|` per unit scale.
    pub tol_seq: f64,
    /// Compute `sup |u_{n+1} - u_n|` by an extra unit-step solve at
    /// schedule levels ≥ 4.
    pub cauchy_probes: bool,
}

impl Default for SequenceOptions {
    fn default() -> Self {
        SequenceOptions {
            solver: SolverOptions::default(),
            tol_mono: 1e-8,
            tol_seq: 1e-6,
            cauchy_probes: true,
        }
    }
}

/// Geometric default schedule `{1, 2, 4, …, 2^K}`.
pub fn geometric_schedule(k: u32) -> Vec<u64> {
    (0..=k).map(|i| 1u64 << i).collect()
}

/// Run the approximation schedule with warm starts, asserting nodewise
/// nonnegativity and monotonicity, recording norms, inset minima and
/// increments, and stopping early once consecutive levels agree to
/// `tol_seq·scale`.
pub fn run_sequence(
    problem: &SingularProblem,
    regime: &Regime,
    schedule: &[u64],
    opts: &SequenceOptions,
) -> Result<ApproxSequence> {
    if schedule.is_empty() {
        return Err(Error::invalid("schedule must be non-empty"));
    }
    if !schedule.windows(2).all(|w| w[0] < w[1]) || schedule[0] == 0 {
        return Err(Error::invalid("schedule must be strictly increasing and >= 1"));
    }
    let grid = problem.model().grid().clone();
    let p = problem.model().exps().p;
    let alpha = regime.monitor_exponent(p);
    let insets: Vec<f64> = POSITIVITY_INSETS
        .iter()
        .map(|f| f * grid.diameter())
        .collect();

    let mut records = Vec::new();
    let mut solutions: Vec<GridFunction> = Vec::new();
    let mut warm = GridFunction::zeros(grid.clone());
    let mut stopped_early = false;

    for (idx, &n) in schedule.iter().enumerate() {
        let (u, report) = approx_step(problem, n, &warm, &opts.solver)?;
        let scale = u.sup_norm().max(1.0);
        if let Some(prev) = solutions.last() {
            let tol = opts.tol_mono * scale;
            for (i, (&now, &before)) in u.values().iter().zip(prev.values()).enumerate() {
                if now < before - tol {
                    return Err(Error::SequenceViolation {
                        n,
                        property: "nodewise monotonicity",
                        details: format!(
                            "u({i}) dropped from {before:.6e} to {now:.6e} (tol {tol:.1e})"
                        ),
                    });
                }
            }
        }
        let sup_diff = match solutions.last() {
            Some(prev) => Some(u.sup_diff(prev)?),
            None => None,
        };
        let cauchy_increment = if opts.cauchy_probes && n >= 4 {
            let (u_next, _) = approx_step(problem, n + 1, &u, &opts.solver)?;
            let inc = u_next.sup_diff(&u)?;
            warm = u_next;
            Some(inc)
        } else {
            warm = u.clone();
            None
        };
        records.push(StepRecord {
            n,
            w1p: w1p_norm(&u, p),
            monitored: monitored_norm(&u, alpha, p)?,
            min_on_subdomains: insets
                .iter()
                .map(|&d| u.min_on(&grid.inset_mask(d)))
                .collect(),
            sup_diff,
            cauchy_increment,
            iterations: report.iterations,
            residual: report.residual,
            backtracks: report.backtracks,
        });
        solutions.push(u);
        if let Some(d) = sup_diff {
            let scale = solutions.last().unwrap().sup_norm().max(1.0);
            if d <= opts.tol_seq * scale && idx + 1 < schedule.len() {
                stopped_early = true;
                break;
            }
        }
    }

    let positivity_uniform_from = positivity_uniform_from(&records);
    let gradient_diag_violations = gradient_diag(&records, &solutions, p);

    Ok(ApproxSequence {
        records,
        solutions,
        stopped_early,
        positivity_uniform_from,
        gradient_diag_violations,
    })
}

/// `‖u^α‖_{W₀^{1,p}}` (plain `w1p_norm` when α = 1).
fn monitored_norm(u: &GridFunction, alpha: f64, p: f64) -> Result<f64> {
    if alpha == 1.0 {
        return Ok(w1p_norm(u, p));
    }
    // Nonnegative up to solver slack; clamp the roundoff before powering.
    let powered = u.map(|v| v.max(0.0).powf(alpha))?;
    Ok(w1p_norm(&powered, p))
}

fn positivity_uniform_from(records: &[StepRecord]) -> Option<usize> {
    let last = records.last()?;
    'outer: for start in 0..records.len() {
        for rec in &records[start..] {
            for (m, mf) in rec.min_on_subdomains.iter().zip(&last.min_on_subdomains) {
                if mf <= &0.0 || (m - mf).abs() > 0.10 * mf {
                    continue 'outer;
                }
            }
        }
        return Some(start);
    }
    None
}

/// Report-only check that the cellwise gradient distance to the final
/// solution decreases along the schedule.
fn gradient_diag(records: &[StepRecord], solutions: &[GridFunction], p: f64) -> Vec<u64> {
    let last = match solutions.last() {
        Some(l) => l,
        None => return Vec::new(),
    };
    let gl = discrete_gradient(last);
    let vol = last.grid().node_weight();
    let dist = |u: &GridFunction| -> f64 {
        let gu = discrete_gradient(u);
        let sum: f64 = gu
            .iter()
            .zip(&gl)
            .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]).powf(p))
            .sum();
        (vol * sum).powf(1.0 / p)
    };
    let mut out = Vec::new();
    let mut prev = f64::INFINITY;
    for (rec, u) in records.iter().zip(solutions).take(solutions.len() - 1) {
        let d = dist(u);
        if d > prev * (1.0 + 1e-12) {
            out.push(rec.n);
        }
        prev = d;
    }
    out
}

/// Explicit two-sided inequality evaluated by [`bound_monitor`].
#[derive(Debug, Clone, Serialize)]
pub struct ExplicitBound {
    pub description: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Outcome of [`bound_monitor`].
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub regime_label: &'static str,
    pub monitored: Vec<f64>,
    /// Last three monitored values lie within 5% of each other.
    pub plateau_ok: bool,
    /// No monitored value exceeds 1.2× the median of the last three.
    pub max_ok: bool,
    /// Closed-form bound where the theory provides one (unit and, in 1D,
    /// strong constant regimes).
    pub explicit: Option<ExplicitBound>,
    /// Interior `W^{1,p}` norms per level (strong regimes only).
    pub interior_w1p: Option<Vec<Vec<f64>>>,
}

/// Evaluate the regime's uniform-bound monitors over a finished sequence.
///
/// Errors when the monitored norm fails the plateau/ceiling criteria or a
/// regime's explicit inequality is violated beyond residual slack.
pub fn bound_monitor(
    seq: &ApproxSequence,
    problem: &SingularProblem,
    regime: &Regime,
) -> Result<BoundReport> {
    if seq.records.is_empty() {
        return Err(Error::invalid("sequence is empty"));
    }
    let monitored: Vec<f64> = seq.records.iter().map(|r| r.monitored).collect();
    let tail: Vec<f64> = monitored.iter().rev().take(3).cloned().collect();
    let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let plateau_ok = hi <= lo * 1.05 + 1e-300;
    let mut sorted = tail.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let max_all = monitored.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let max_ok = max_all <= 1.2 * median + 1e-300;
    let last_n = seq.records.last().unwrap().n;
    if !plateau_ok || !max_ok {
        return Err(Error::SequenceViolation {
            n: last_n,
            property: "uniform norm bound",
            details: format!(
                "monitored {} norm not plateaued: last three [{lo:.6e}, {hi:.6e}], \
                 max {max_all:.6e} vs median {median:.6e}",
                regime.kind.label()
            ),
        });
    }

    let exps = problem.model().exps();
    let c1 = structure_constants(exps).c1;
    let f_l1 = problem.source_l1();
    // Slack for the finite solver residual: the energy identity behind the
    // bounds is satisfied up to the residual times the state norm.
    let slack = 1e-6 * f_l1.max(1.0);
    let explicit = match regime.kind {
        RegimeKind::ConstantUnit => {
            let lhs = monitored
                .iter()
                .map(|m| c1 * m.powf(exps.p))
                .fold(f64::NEG_INFINITY, f64::max);
            Some(ExplicitBound {
                description: "C1 ‖u_n‖^p_{W^{1,p}} ≤ ‖f‖_{L¹}".to_string(),
                lhs,
                rhs: f_l1,
                ok: lhs <= f_l1 + slack,
            })
        }
        RegimeKind::ConstantStrong if exps.dim == 1 => {
            let g = regime.gamma_star;
            let pre = c1 * g * (exps.p / (g + exps.p - 1.0)).powf(exps.p);
            let lhs = monitored
                .iter()
                .map(|m| pre * m.powf(exps.p))
                .fold(f64::NEG_INFINITY, f64::max);
            Some(ExplicitBound {
                description: "C1 γ (p/(γ+p−1))^p ‖u_n^{(γ+p−1)/p}‖^p_{W^{1,p}} ≤ ‖f‖_{L¹}"
                    .to_string(),
                lhs,
                rhs: f_l1,
                ok: lhs <= f_l1 + slack,
            })
        }
        _ => None,
    };
    if let Some(b) = &explicit {
        if !b.ok {
            return Err(Error::SequenceViolation {
                n: last_n,
                property: "explicit norm bound",
                details: format!("{}: lhs {:.6e} > rhs {:.6e}", b.description, b.lhs, b.rhs),
            });
        }
    }

    let interior_w1p = match regime.kind {
        RegimeKind::VariableStrong | RegimeKind::ConstantStrong => {
            let grid = problem.model().grid();
            let insets: Vec<f64> = POSITIVITY_INSETS
                .iter()
                .map(|f| f * grid.diameter())
                .collect();
            Some(
                seq.solutions
                    .iter()
                    .map(|u| {
                        insets
                            .iter()
                            .map(|&d| masked_w1p(u, &grid.inset_mask(d), exps.p))
                            .collect()
                    })
                    .collect(),
            )
        }
        _ => None,
    };

    Ok(BoundReport {
        regime_label: regime.kind.label(),
        monitored,
        plateau_ok,
        max_ok,
        explicit,
        interior_w1p,
    })
}

/// `W^{1,p}` seminorm restricted to cells whose stencil nodes all lie in
/// the mask.
fn masked_w1p(u: &GridFunction, mask: &[bool], p: f64) -> f64 {
    let grid = u.grid();
    let m = grid.node_counts();
    let vol = grid.node_weight();
    let grads = discrete_gradient(u);
    let in_mask = |ix: isize, iy: isize| -> bool {
        if ix < 0 || iy < 0 || ix >= m[0] as isize || (grid.dim() == 2 && iy >= m[1] as isize) {
            return true; // off-grid: the zero extension has no nodes to test
        }
        mask[grid.node_index(ix as usize, if grid.dim() == 2 { iy as usize } else { 0 })]
    };
    let mut sum = 0.0;
    let mut cell = 0usize;
    let rows = if grid.dim() == 2 { m[1] + 1 } else { 1 };
    for cy in 0..rows as isize {
        for cx in 0..=m[0] as isize {
            let inside = if grid.dim() == 1 {
                in_mask(cx, 0) && in_mask(cx - 1, 0)
            } else {
                in_mask(cx, cy - 1) && in_mask(cx - 1, cy) && in_mask(cx - 1, cy - 1)
            };
            if inside {
                let g = grads[cell];
                sum += g[0].hypot(g[1]).powf(p);
            }
            cell += 1;
        }
    }
    (vol * sum).powf(1.0 / p)
}

/// One row of [`boundary_condition_check`].
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryRow {
    pub eps: f64,
    /// Smallest boundary distance over the support of `(u-ε)⁺`
    /// (`None` when the support is empty).
    pub support_min_distance: Option<f64>,
    /// `‖(u-ε)⁺‖_{W₀^{1,p}}`.
    pub w1p_truncated: f64,
}

/// Report of the zero-boundary-value verification.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryReport {
    pub rows: Vec<BoundaryRow>,
    /// Truncation norms are nondecreasing as ε decreases and stay finite.
    pub norms_converge: bool,
    /// `‖u^α‖_{W₀^{1,p}}` for the strong-regime exponent α > 1.
    pub alpha_norm: Option<f64>,
}

/// Verify the relaxed zero boundary condition: for a decreasing schedule of
/// ε the truncations `(u-ε)⁺` have finite, convergent `W^{1,p}` norms and
/// supports receding from the boundary; report-only.
pub fn boundary_condition_check(
    u: &GridFunction,
    p: f64,
    alpha: Option<f64>,
) -> Result<BoundaryReport> {
    if u.min_value() < 0.0 {
        return Err(Error::invalid("boundary check expects u >= 0"));
    }
    let grid = u.grid();
    let sup = u.sup_norm();
    let mut rows = Vec::new();
    for k in 1..=12 {
        let eps = sup * 0.5f64.powi(k);
        let trunc = u.map(|v| (v - eps).max(0.0))?;
        let support_min_distance = u
            .values()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > eps)
            .map(|(i, _)| grid.boundary_distance(i))
            .min_by(f64::total_cmp);
        rows.push(BoundaryRow {
            eps,
            support_min_distance,
            w1p_truncated: w1p_norm(&trunc, p),
        });
    }
    let norms_converge = rows
        .windows(2)
        .all(|w| w[1].w1p_truncated >= w[0].w1p_truncated - 1e-12)
        && rows.iter().all(|r| r.w1p_truncated.is_finite());
    let alpha_norm = match alpha {
        Some(a) if a != 1.0 => {
            let powered = u.map(|v| v.max(0.0).powf(a))?;
            Some(w1p_norm(&powered, p))
        }
        _ => None,
    };
    Ok(BoundaryReport {
        rows,
        norms_converge,
        alpha_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::NonlocalAssembly;
    use crate::exponents::Exponents;
    use crate::grid::make_grid;
    use std::sync::Arc;

    fn problem_1d(
        m: usize,
        p: f64,
        s: f64,
        b: f64,
        f: f64,
        gamma: impl Fn(f64) -> f64,
    ) -> SingularProblem {
        let grid = make_grid(1, &[1.0], &[m], 0.2).unwrap();
        let exps = Exponents::new(1, p, s, 2.0, 1.0, b).unwrap();
        let asm = if b > 0.0 {
            Some(Arc::new(NonlocalAssembly::build(&grid, &exps, 1e-10).unwrap()))
        } else {
            None
        };
        let n = grid.n_nodes();
        let gvals: Vec<f64> = (0..n).map(|i| gamma(grid.node_pos(i)[0])).collect();
        let model = EnergyModel::new(grid, exps, asm).unwrap();
        SingularProblem::new(model, vec![f; n], gvals).unwrap()
    }

    #[test]
    fn truncation_caps_and_is_monotone() {
        let f = vec![0.5, 3.0, 7.2];
        assert_eq!(truncated_source(&f, 1).unwrap(), vec![0.5, 1.0, 1.0]);
        assert_eq!(truncated_source(&f, 2).unwrap(), vec![0.5, 2.0, 2.0]);
        assert_eq!(truncated_source(&f, 8).unwrap(), vec![0.5, 3.0, 7.2]);
        for n in 1..8u64 {
            let a = truncated_source(&f, n).unwrap();
            let b = truncated_source(&f, n + 1).unwrap();
            assert!(a.iter().zip(&b).all(|(x, y)| x <= y));
        }
        assert!(truncated_source(&[-1.0], 1).is_err());
        assert!(truncated_source(&f, 0).is_err());
    }

    #[test]
    fn zero_source_yields_zero_sequence() {
        let prob = problem_1d(7, 2.0, 0.5, 1.0, 0.0, |_| 0.5);
        let regime = regime_classify(&prob, None).unwrap();
        let seq = run_sequence(
            &prob,
            &regime,
            &geometric_schedule(4),
            &SequenceOptions::default(),
        )
        .unwrap();
        assert!(seq.stopped_early);
        assert_eq!(seq.records.len(), 2); // first comparison already agrees
        assert!(seq.final_solution().sup_norm() == 0.0);
    }

    #[test]
    fn picard_oracle_matches_unit_gamma_step() {
        // p = 2, γ ≡ 1, f ≡ 1, n = 1, pure local: the step solves
        // A u = w·(u⁺+1)^{-1}. Independent oracle: Picard iteration with the
        // frozen-source quadratic solved by the same minimizer (linear f).
        let m = 15;
        let prob = problem_1d(m, 2.0, 0.5, 0.0, 1.0, |_| 1.0);
        let grid = prob.model().grid().clone();
        let opts = SolverOptions {
            tol: 1e-12,
            ..SolverOptions::default()
        };
        let (u, _) = approx_step(
            &prob,
            1,
            &GridFunction::zeros(grid.clone()),
            &opts,
        )
        .unwrap();
        let mut v = GridFunction::zeros(grid.clone());
        for _ in 0..60 {
            let frozen: Vec<f64> = v.values().iter().map(|&t| 1.0 / (t.max(0.0) + 1.0)).collect();
            let obj = Objective::new(
                prob.model().clone(),
                SourceDensity::Linear { f: frozen },
            )
            .unwrap();
            let (next, _) = minimize(&obj, &v, &opts).unwrap();
            v = next;
        }
        assert!(u.sup_diff(&v).unwrap() < 1e-6);
    }

    #[test]
    fn sequence_is_monotone_and_positive() {
        let prob = problem_1d(15, 2.0, 0.5, 1.0, 2.0, |x| 0.5 + 0.3 * x);
        let regime = regime_classify(&prob, None).unwrap();
        let seq = run_sequence(
            &prob,
            &regime,
            &geometric_schedule(6),
            &SequenceOptions::default(),
        )
        .unwrap();
        for pair in seq.solutions.windows(2) {
            let scale = pair[1].sup_norm().max(1.0);
            for (a, b) in pair[0].values().iter().zip(pair[1].values()) {
                assert!(b >= &(a - 1e-8 * scale));
            }
        }
        assert!(seq.final_solution().min_value() > 0.0);
        for rec in &seq.records {
            assert!(rec.min_on_subdomains.iter().all(|&v| v > 0.0));
        }
        // Successive sup-differences are eventually nonincreasing.
        let diffs: Vec<f64> = seq.records.iter().filter_map(|r| r.sup_diff).collect();
        for w in diffs.windows(2).skip(1) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "diffs not settling: {diffs:?}");
        }
    }

    #[test]
    fn regimes_classify_by_range_and_constancy() {
        let constant = |g: f64| problem_1d(9, 2.0, 0.5, 0.0, 1.0, move |_| g);
        assert_eq!(
            regime_classify(&constant(0.5), None).unwrap().kind,
            RegimeKind::ConstantMild
        );
        assert_eq!(
            regime_classify(&constant(1.0), None).unwrap().kind,
            RegimeKind::ConstantUnit
        );
        assert_eq!(
            regime_classify(&constant(2.0), None).unwrap().kind,
            RegimeKind::ConstantStrong
        );
        let mild = problem_1d(9, 2.0, 0.5, 0.0, 1.0, |x| {
            0.5 + 0.4 * (std::f64::consts::PI * x).sin().powi(2)
        });
        assert_eq!(
            regime_classify(&mild, None).unwrap().kind,
            RegimeKind::VariableMild
        );
        let strong = problem_1d(9, 2.0, 0.5, 0.0, 1.0, |x| 0.8 + 0.8 * x);
        let r = regime_classify(&strong, None).unwrap();
        assert_eq!(r.kind, RegimeKind::VariableStrong);
        assert!(r.gamma_star > 1.0 && r.gamma_star <= 1.6);
        // A constant exponent may run under the variable hypotheses, but not
        // the reverse.
        assert!(regime_classify(&constant(0.5), Some(RegimeKind::VariableMild)).is_ok());
        assert!(regime_classify(&mild, Some(RegimeKind::ConstantMild)).is_err());
        assert!(regime_classify(&constant(2.0), Some(RegimeKind::ConstantMild)).is_err());
    }

    #[test]
    fn unit_regime_explicit_bound_holds() {
        let prob = problem_1d(15, 2.0, 0.5, 1.0, 2.0, |_| 1.0);
        let regime = regime_classify(&prob, None).unwrap();
        assert_eq!(regime.kind, RegimeKind::ConstantUnit);
        let seq = run_sequence(
            &prob,
            &regime,
            &geometric_schedule(9),
            &SequenceOptions::default(),
        )
        .unwrap();
        let report = bound_monitor(&seq, &prob, &regime).unwrap();
        let explicit = report.explicit.expect("unit regime has a closed-form bound");
        assert!(explicit.ok);
        assert!(explicit.lhs <= explicit.rhs);
        assert!(report.plateau_ok && report.max_ok);
    }

    #[test]
    fn strong_regime_explicit_bound_and_interior_norms() {
        let prob = problem_1d(15, 2.0, 0.6, 1.0, 1.5, |_| 2.0);
        let regime = regime_classify(&prob, None).unwrap();
        assert_eq!(regime.kind, RegimeKind::ConstantStrong);
        assert!((regime.monitor_exponent(2.0) - 1.5).abs() < 1e-15);
        let seq = run_sequence(
            &prob,
            &regime,
            &geometric_schedule(9),
            &SequenceOptions::default(),
        )
        .unwrap();
        let report = bound_monitor(&seq, &prob, &regime).unwrap();
        assert!(report.explicit.expect("1D strong bound").ok);
        let interior = report.interior_w1p.expect("strong regime tracks interior norms");
        assert_eq!(interior.len(), seq.solutions.len());
        assert!(interior
            .iter()
            .flatten()
            .all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn bound_monitor_rejects_growing_norms() {
        let prob = problem_1d(9, 2.0, 0.5, 0.0, 1.0, |_| 1.0);
        let regime = regime_classify(&prob, None).unwrap();
        let mut seq = run_sequence(
            &prob,
            &regime,
            &geometric_schedule(5),
            &SequenceOptions::default(),
        )
        .unwrap();
        for (i, rec) in seq.records.iter_mut().enumerate() {
            rec.monitored = (i + 1) as f64 * 10.0;
        }
        match bound_monitor(&seq, &prob, &regime) {
            Err(Error::SequenceViolation { property, .. }) => {
                assert_eq!(property, "uniform norm bound")
            }
            other => panic!("expected a norm-bound violation, got {other:?}"),
        }
    }

    #[test]
    fn boundary_check_reports_support_and_norms() {
        let grid = make_grid(1, &[1.0], &[31], 0.2).unwrap();
        let u = GridFunction::from_fn(grid.clone(), |x, _| x * (1.0 - x)).unwrap();
        let report = boundary_condition_check(&u, 2.0, Some(1.5)).unwrap();
        assert!(report.norms_converge);
        assert!(report.alpha_norm.unwrap() > 0.0);
        // Supports recede towards the boundary as ε shrinks, never past it.
        let dists: Vec<f64> = report
            .rows
            .iter()
            .map(|r| r.support_min_distance.unwrap())
            .collect();
        for w in dists.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        // A boundary-adjacent spike is localized by the support distance.
        let spike = GridFunction::from_fn(grid.clone(), |x, _| {
            if x < 2.0 * grid.spacings()[0] { 1.0 } else { 0.0 }
        })
        .unwrap();
        let rep = boundary_condition_check(&spike, 2.0, None).unwrap();
        let first = &rep.rows[0];
        assert!(first.support_min_distance.unwrap() <= 2.0 * grid.spacings()[0]);
    }

    #[test]
    fn cauchy_probe_records_unit_increments() {
        let prob = problem_1d(9, 2.0, 0.5, 0.0, 1.0, |_| 0.5);
        let regime = regime_classify(&prob, None).unwrap();
        let seq = run_sequence(
            &prob,
            &regime,
            &geometric_schedule(5),
            &SequenceOptions::default(),
        )
        .unwrap();
        for rec in &seq.records {
            if rec.n >= 4 {
                let inc = rec.cauchy_increment.expect("probe expected at n >= 4");
                assert!(inc >= 0.0 && inc.is_finite());
                // The unit increment is far below the schedule difference.
                if let Some(d) = rec.sup_diff {
                    assert!(inc <= d.max(1e-12));
                }
            } else {
                assert!(rec.cauchy_increment.is_none());
            }
        }
    }
}
