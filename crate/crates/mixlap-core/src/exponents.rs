//! Exponent bookkeeping: problem parameters, Sobolev exponents, and the
//! source-integrability requirement for each singularity regime.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structural parameters of the mixed operator.
///
/// The local part is `a · H(∇u)^{p-1} ∇H(∇u)` with `H` the l^`q` norm; the
/// nonlocal part uses the kernel `b · |x-y|^{-dim-p·s}`. `b = 0` is admitted
/// as the pure-local limit (the nonlocal part is skipped entirely); all
/// kernel-dependent quantities require `b > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    /// Spatial dimension, 1 or 2.
    pub dim: usize,
    /// Growth exponent, `p > 1`.
    pub p: f64,
    /// Fractional differentiability order, `0 < s < 1`.
    pub s: f64,
    /// Anisotropy exponent of the l^q norm, `q > 1`.
    pub q: f64,
    /// Local coefficient, `a > 0`.
    pub a: f64,
    /// Kernel coefficient, `b ≥ 0` (`0` disables the nonlocal part).
    pub b: f64,
}

impl Exponents {
    /// Validates parameter ranges and returns the bundle.
    pub fn new(dim: usize, p: f64, s: f64, q: f64, a: f64, b: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::invalid(format!("dim must be 1 or 2, got {dim}")));
        }
        for (name, v) in [("p", p), ("s", s), ("q", q), ("a", a), ("b", b)] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite, got {v}")));
            }
        }
        if p <= 1.0 {
            return Err(Error::invalid(format!("p must exceed 1, got {p}")));
        }
        if s <= 0.0 || s >= 1.0 {
            return Err(Error::invalid(format!("s must lie in (0, 1), got {s}")));
        }
        if q <= 1.0 {
            return Err(Error::invalid(format!("q must exceed 1, got {q}")));
        }
        if a <= 0.0 {
            return Err(Error::invalid(format!("a must be positive, got {a}")));
        }
        if b < 0.0 {
            return Err(Error::invalid(format!("b must be nonnegative, got {b}")));
        }
        Ok(Exponents { dim, p, s, q, a, b })
    }

    /// The fractional order `p·s` entering the kernel exponent `dim + p·s`.
    pub fn ps(&self) -> f64 {
        self.p * self.s
    }

    /// Two-sided comparability constant `Λ = max(b, 1/b)` of the kernel
    /// against the pure fractional kernel. Requires `b > 0`.
    pub fn kernel_comparability(&self) -> Result<f64> {
        if self.b <= 0.0 {
            return Err(Error::invalid(
                "kernel comparability is undefined for b = 0 (no nonlocal part)",
            ));
        }
        Ok(self.b.max(1.0 / self.b))
    }

    /// Sobolev critical exponent data for this `(dim, p)`.
    pub fn critical(&self) -> CriticalExponents {
        let n = self.dim as f64;
        if self.p < n {
            CriticalExponents {
                p_star: Some(n * self.p / (n - self.p)),
                kappa: n / (n - self.p),
            }
        } else {
            CriticalExponents {
                p_star: None,
                kappa: 2.0,
            }
        }
    }
}

/// Critical Sobolev exponent `p* = Np/(N-p)` (absent when `p ≥ N`) and the
/// iteration exponent `κ` (`N/(N-p)` below the critical dimension, `2`
/// otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalExponents {
    pub p_star: Option<f64>,
    pub kappa: f64,
}

/// Hölder conjugate `r / (r - 1)`; requires `r > 1`.
pub fn conjugate(r: f64) -> Result<f64> {
    if !(r > 1.0) {
        return Err(Error::invalid(format!(
            "conjugate exponent needs r > 1, got {r}"
        )));
    }
    Ok(r / (r - 1.0))
}

/// Singularity regimes of the source `f(x) u^{-γ(x)}`, split by whether γ
/// varies and how it compares to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeKind {
    /// Variable γ with γ ≤ 1 on the boundary strip.
    VariableMild,
    /// Variable γ exceeding 1 somewhere on the boundary strip; needs a
    /// strip bound γ*.
    VariableStrong,
    /// Constant γ < 1.
    ConstantMild,
    /// Constant γ = 1.
    ConstantUnit,
    /// Constant γ > 1.
    ConstantStrong,
}

impl RegimeKind {
    /// Human-readable label used in reports.
    pub fn label(&self) -> &'static str {
        match self {
            RegimeKind::VariableMild => "variable-mild",
            RegimeKind::VariableStrong => "variable-strong",
            RegimeKind::ConstantMild => "constant-mild",
            RegimeKind::ConstantUnit => "constant-unit",
            RegimeKind::ConstantStrong => "constant-strong",
        }
    }
}

/// Lebesgue integrability the source must satisfy: `f ∈ L^m`; when `strict`
/// is set the requirement is "any exponent strictly above `m`" (the
/// borderline case `p = dim`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceIntegrability {
    pub m: f64,
    pub strict: bool,
}

/// Lebesgue exponent required of `f` for the given regime.
///
/// `gamma` carries the constant γ for the constant regimes and the strip
/// bound γ* for [`RegimeKind::VariableStrong`]; it is ignored otherwise.
/// Below the critical dimension (`p < dim`) the exponents are Hölder
/// conjugates of the relevant Sobolev quotients; at `p = dim` any `m > 1`
/// works (returned as `m = 1` with `strict`); above it `L¹` suffices.
pub fn integrability_requirement(
    kind: RegimeKind,
    exps: &Exponents,
    gamma: Option<f64>,
) -> Result<SourceIntegrability> {
    let n = exps.dim as f64;
    let p = exps.p;
    // The two L¹ regimes do not look at the dimension at all.
    match kind {
        RegimeKind::ConstantUnit => {
            return Ok(SourceIntegrability {
                m: 1.0,
                strict: false,
            });
        }
        RegimeKind::ConstantStrong => {
            let g = gamma.ok_or_else(|| Error::invalid("constant-strong regime needs γ"))?;
            if g <= 1.0 {
                return Err(Error::invalid(format!(
                    "constant-strong regime needs γ > 1, got {g}"
                )));
            }
            return Ok(SourceIntegrability {
                m: 1.0,
                strict: false,
            });
        }
        _ => {}
    }
    if p > n {
        return Ok(SourceIntegrability {
            m: 1.0,
            strict: false,
        });
    }
    if p == n {
        return Ok(SourceIntegrability {
            m: 1.0,
            strict: true,
        });
    }
    let p_star = exps
        .critical()
        .p_star
        .expect("p < dim guarantees a critical exponent");
    let m = match kind {
        RegimeKind::VariableMild => conjugate(p_star)?,
        RegimeKind::ConstantMild => {
            let g = gamma.ok_or_else(|| Error::invalid("constant-mild regime needs γ"))?;
            if g <= 0.0 || g >= 1.0 {
                return Err(Error::invalid(format!(
                    "constant-mild regime needs γ in (0, 1), got {g}"
                )));
            }
            conjugate(p_star / (1.0 - g))?
        }
        RegimeKind::VariableStrong => {
            let gs = gamma.ok_or_else(|| Error::invalid("variable-strong regime needs γ*"))?;
            if gs <= 1.0 {
                return Err(Error::invalid(format!(
                    "variable-strong regime needs γ* > 1, got {gs}"
                )));
            }
            conjugate((gs + p - 1.0) * p_star / (p * gs))?
        }
        RegimeKind::ConstantUnit | RegimeKind::ConstantStrong => unreachable!(),
    };
    Ok(SourceIntegrability { m, strict: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exps(dim: usize, p: f64) -> Exponents {
        Exponents::new(dim, p, 0.5, 2.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn validation_rejects_out_of_range_parameters() {
        assert!(Exponents::new(3, 2.0, 0.5, 2.0, 1.0, 1.0).is_err());
        assert!(Exponents::new(2, 1.0, 0.5, 2.0, 1.0, 1.0).is_err());
        assert!(Exponents::new(2, 2.0, 1.0, 2.0, 1.0, 1.0).is_err());
        assert!(Exponents::new(2, 2.0, 0.5, 1.0, 1.0, 1.0).is_err());
        assert!(Exponents::new(2, 2.0, 0.5, 2.0, 0.0, 1.0).is_err());
        assert!(Exponents::new(2, 2.0, 0.5, 2.0, 1.0, -1.0).is_err());
        // b = 0 is the admitted pure-local limit.
        assert!(Exponents::new(2, 2.0, 0.5, 2.0, 1.0, 0.0).is_ok());
    }

    #[test]
    fn comparability_is_symmetric_in_b() {
        let lo = Exponents::new(1, 2.0, 0.5, 2.0, 1.0, 0.25).unwrap();
        let hi = Exponents::new(1, 2.0, 0.5, 2.0, 1.0, 4.0).unwrap();
        assert_eq!(lo.kernel_comparability().unwrap(), 4.0);
        assert_eq!(hi.kernel_comparability().unwrap(), 4.0);
        let none = Exponents::new(1, 2.0, 0.5, 2.0, 1.0, 0.0).unwrap();
        assert!(none.kernel_comparability().is_err());
    }

    #[test]
    fn critical_exponents_below_dimension() {
        let c = exps(2, 1.5).critical();
        assert_eq!(c.p_star, Some(6.0));
        assert_eq!(c.kappa, 4.0);
    }

    #[test]
    fn critical_exponents_at_and_above_dimension() {
        let c = exps(2, 2.0).critical();
        assert_eq!(c.p_star, None);
        assert_eq!(c.kappa, 2.0);
        let c = exps(1, 3.0).critical();
        assert_eq!(c.p_star, None);
        assert_eq!(c.kappa, 2.0);
    }

    #[test]
    fn conjugate_values() {
        assert!((conjugate(6.0).unwrap() - 1.2).abs() < 1e-15);
        assert!((conjugate(2.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(conjugate(1.0).is_err());
        assert!(conjugate(0.5).is_err());
    }

    #[test]
    fn integrability_variable_mild() {
        let r = integrability_requirement(RegimeKind::VariableMild, &exps(2, 1.5), None).unwrap();
        assert!((r.m - 1.2).abs() < 1e-15);
        assert!(!r.strict);
    }

    #[test]
    fn integrability_constant_mild() {
        let r =
            integrability_requirement(RegimeKind::ConstantMild, &exps(2, 1.5), Some(0.5)).unwrap();
        assert!((r.m - 12.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn integrability_variable_strong() {
        let r =
            integrability_requirement(RegimeKind::VariableStrong, &exps(2, 1.5), Some(2.0)).unwrap();
        assert!((r.m - 1.25).abs() < 1e-15);
    }

    #[test]
    fn integrability_l1_regimes() {
        let r = integrability_requirement(RegimeKind::ConstantUnit, &exps(2, 1.5), None).unwrap();
        assert_eq!(r.m, 1.0);
        assert!(!r.strict);
        let r =
            integrability_requirement(RegimeKind::ConstantStrong, &exps(2, 1.5), Some(2.0)).unwrap();
        assert_eq!(r.m, 1.0);
    }

    #[test]
    fn integrability_borderline_dimension_is_strict() {
        let r = integrability_requirement(RegimeKind::VariableMild, &exps(2, 2.0), None).unwrap();
        assert_eq!(r.m, 1.0);
        assert!(r.strict);
        // Above the dimension L¹ suffices outright.
        let r = integrability_requirement(RegimeKind::VariableMild, &exps(1, 1.5), None).unwrap();
        assert_eq!(r.m, 1.0);
        assert!(!r.strict);
    }

    #[test]
    fn integrability_rejects_inconsistent_gamma() {
        assert!(integrability_requirement(RegimeKind::ConstantMild, &exps(2, 1.5), Some(1.5)).is_err());
        assert!(integrability_requirement(RegimeKind::ConstantMild, &exps(2, 1.5), None).is_err());
        assert!(integrability_requirement(RegimeKind::VariableStrong, &exps(2, 1.5), Some(0.9)).is_err());
        assert!(integrability_requirement(RegimeKind::ConstantStrong, &exps(2, 1.5), Some(1.0)).is_err());
    }
}
