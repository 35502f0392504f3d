//! JSON experiment configuration: fixed schema, coefficient expressions
//! evaluated eagerly on the grid, and construction of the library-level
//! model and problem objects.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mixlap_core::assembly::NonlocalAssembly;
use mixlap_core::energy::EnergyModel;
use mixlap_core::exponents::{Exponents, RegimeKind};
use mixlap_core::grid::{make_grid, Grid};
use mixlap_core::scheme::{SequenceOptions, SingularProblem};
use mixlap_core::solver::SolverOptions;

use crate::expr;

/// Box domain and grid resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub dim: usize,
    pub extents: Vec<f64>,
    pub m: Vec<usize>,
    /// Boundary strip width used for regime classification.
    pub delta: f64,
}

/// Exponents and structure coefficients of the energy.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentSpec {
    pub p: f64,
    pub s: f64,
    pub q: f64,
    pub a: f64,
    pub b: f64,
}

/// Solver and sequence tolerances (all optional, with library defaults).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub solver_tol: f64,
    pub max_iters: usize,
    pub tol_mono: f64,
    pub tol_seq: f64,
    pub kernel_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let solver = SolverOptions::default();
        let seq = SequenceOptions::default();
        Tolerances {
            solver_tol: solver.tol,
            max_iters: solver.max_iters,
            tol_mono: seq.tol_mono,
            tol_seq: seq.tol_seq,
            kernel_tol: 1e-10,
        }
    }
}

/// One experiment: domain, energy exponents, coefficient expressions,
/// regime handling, schedule and output plumbing.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    pub exponents: ExponentSpec,
    /// Expression for the singularity exponent γ(x); must be positive on
    /// all grid nodes.
    pub gamma: String,
    /// Expression for the source amplitude f(x); must be nonnegative on all
    /// grid nodes.
    pub f: String,
    /// Optional regime label to run under (`variable-mild`,
    /// `variable-strong`, `constant-mild`, `constant-unit`,
    /// `constant-strong`); validated against the classified regime.
    #[serde(default)]
    pub regime_override: Option<String>,
    /// Truncation schedule length: levels 2^0 .. 2^K.
    #[serde(default = "default_schedule_k")]
    pub schedule_k: u32,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_schedule_k() -> u32 {
    10
}

/// Parse the JSON text into the schema, with serde's line/column
/// diagnostics on failure.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    serde_json::from_str(text).context("parsing experiment config")
}

fn regime_from_label(label: &str) -> Result<RegimeKind> {
    const ALL: [RegimeKind; 5] = [
        RegimeKind::VariableMild,
        RegimeKind::VariableStrong,
        RegimeKind::ConstantMild,
        RegimeKind::ConstantUnit,
        RegimeKind::ConstantStrong,
    ];
    ALL.into_iter()
        .find(|k| k.label() == label)
        .ok_or_else(|| {
            let labels: Vec<&str> = ALL.iter().map(|k| k.label()).collect();
            anyhow::anyhow!(
                "unknown regime label `{label}` (expected one of {})",
                labels.join(", ")
            )
        })
}

/// A fully validated experiment: parsed config plus the grid, exponents and
/// node-evaluated coefficient fields.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    /// SHA-256 of the raw config text, carried into every output.
    pub config_sha256: String,
    pub grid: Arc<Grid>,
    pub exps: Exponents,
    pub gamma: Vec<f64>,
    pub f: Vec<f64>,
    pub override_kind: Option<RegimeKind>,
}

/// Parse, validate and node-evaluate a config, surfacing expression domain
/// errors at load time.
pub fn load_experiment(text: &str) -> Result<Experiment> {
    let config = parse_config(text)?;
    let config_sha256 = Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<String>();
    let d = &config.domain;
    let grid = make_grid(d.dim, &d.extents, &d.m, d.delta).context("building the grid")?;
    let e = config.exponents;
    let exps = Exponents::new(d.dim, e.p, e.s, e.q, e.a, e.b).context("validating exponents")?;

    let gamma_ast = expr::parse(&config.gamma)
        .with_context(|| format!("parsing gamma expression `{}`", config.gamma))?;
    let f_ast = expr::parse(&config.f)
        .with_context(|| format!("parsing f expression `{}`", config.f))?;
    let mut gamma = Vec::with_capacity(grid.n_nodes());
    let mut f = Vec::with_capacity(grid.n_nodes());
    for i in 0..grid.n_nodes() {
        let pos = grid.node_pos(i);
        let g = gamma_ast.eval(pos[0], pos[1]);
        if !(g.is_finite() && g > 0.0) {
            bail!(
                "gamma expression evaluates to {g} at node ({}, {}); must be finite and positive",
                pos[0],
                pos[1]
            );
        }
        let fv = f_ast.eval(pos[0], pos[1]);
        if !(fv.is_finite() && fv >= 0.0) {
            bail!(
                "f expression evaluates to {fv} at node ({}, {}); must be finite and nonnegative",
                pos[0],
                pos[1]
            );
        }
        gamma.push(g);
        f.push(fv);
    }

    let override_kind = config
        .regime_override
        .as_deref()
        .map(regime_from_label)
        .transpose()?;

    Ok(Experiment {
        config,
        config_sha256,
        grid,
        exps,
        gamma,
        f,
        override_kind,
    })
}

impl Experiment {
    /// Assemble the energy model (nonlocal tables included iff `b > 0`).
    pub fn build_model(&self) -> Result<EnergyModel> {
        let assembly = if self.exps.b > 0.0 {
            Some(Arc::new(
                NonlocalAssembly::build(&self.grid, &self.exps, self.config.tolerances.kernel_tol)
                    .context("assembling nonlocal coefficients")?,
            ))
        } else {
            None
        };
        EnergyModel::new(self.grid.clone(), self.exps, assembly)
            .context("building the energy model")
    }

    /// The singular problem with the node-evaluated coefficient fields.
    pub fn build_problem(&self) -> Result<SingularProblem> {
        SingularProblem::new(self.build_model()?, self.f.clone(), self.gamma.clone())
            .context("building the singular problem")
    }

    pub fn solver_options(&self) -> SolverOptions {
        let t = self.config.tolerances;
        SolverOptions {
            tol: t.solver_tol,
            max_iters: t.max_iters,
            ..SolverOptions::default()
        }
    }

    pub fn sequence_options(&self) -> SequenceOptions {
        let t = self.config.tolerances;
        SequenceOptions {
            solver: self.solver_options(),
            tol_mono: t.tol_mono,
            tol_seq: t.tol_seq,
            ..SequenceOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mixlap_core::scheme::regime_classify;

    fn minimal(gamma: &str, f: &str) -> String {
        format!(
            r#"{{
  "domain": {{ "dim": 1, "extents": [1.0], "m": [15], "delta": 0.2 }},
  "exponents": {{ "p": 2.0, "s": 0.5, "q": 2.0, "a": 1.0, "b": 1.0 }},
  "gamma": "{gamma}",
  "f": "{f}"
}}"#
        )
    }

    #[test]
    fn minimal_config_classifies_constant_mild() {
        let exp = load_experiment(&minimal("0.5", "1")).unwrap();
        assert_eq!(exp.config.schedule_k, 10);
        assert!(exp.gamma.iter().all(|&g| g == 0.5));
        let problem = exp.build_problem().unwrap();
        let regime = regime_classify(&problem, None).unwrap();
        assert_eq!(regime.kind, RegimeKind::ConstantMild);
    }

    #[test]
    fn expression_gamma_evaluates_on_nodes() {
        let exp =
            load_experiment(&minimal("0.5 + 0.4*sin(3.14159*x)^2", "1")).unwrap();
        assert!(exp.gamma.iter().all(|&g| g > 0.5 && g <= 0.9 + 1e-12));
        // independent hand value at the center node x = 0.5
        let mid = exp.gamma[7];
        assert!((mid - 0.9).abs() < 1e-11);
    }

    #[test]
    fn sign_violations_are_rejected_at_load() {
        let err = load_experiment(&minimal("-1", "1")).unwrap_err().to_string();
        assert!(err.contains("must be finite and positive"), "{err}");
        let err = load_experiment(&minimal("x - 1", "1"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("must be finite and positive"), "{err}");
        let err = load_experiment(&minimal("0.5", "0 - x"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("must be finite and nonnegative"), "{err}");
        let err = load_experiment(&minimal("1 / (x - x)", "1"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("must be finite"), "{err}");
    }

    #[test]
    fn schema_errors_carry_line_and_column() {
        let err = parse_config("{ \"domain\": 3 }").unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("line"), "{msg}");
        let err = parse_config(&minimal("0.5", "1").replace("\"f\"", "\"g\""))
            .unwrap_err();
        assert!(format!("{err:#}").contains("unknown field"), "{}", format!("{err:#}"));
    }

    #[test]
    fn override_labels_parse_and_reject() {
        let mut text = minimal("0.5", "1");
        text = text.replace(
            "\"gamma\"",
            "\"regime_override\": \"constant-mild\",\n  \"gamma\"",
        );
        let exp = load_experiment(&text).unwrap();
        assert_eq!(exp.override_kind, Some(RegimeKind::ConstantMild));
        let bad = text.replace("constant-mild", "mild");
        let err = load_experiment(&bad).unwrap_err().to_string();
        assert!(err.contains("unknown regime label"), "{err}");
    }

    #[test]
    fn config_hash_tracks_text() {
        let a = load_experiment(&minimal("0.5", "1")).unwrap();
        let b = load_experiment(&minimal("0.5", "1")).unwrap();
        let c = load_experiment(&minimal("0.5", "2")).unwrap();
        assert_eq!(a.config_sha256, b.config_sha256);
        assert_ne!(a.config_sha256, c.config_sha256);
        assert_eq!(a.config_sha256.len(), 64);
    }
}
