//! The anisotropic norm `H(ζ) = (Σ|ζ_i|^q)^{1/q}` and the flux
//! `B(ζ) = a · H(ζ)^{p-1} ∇H(ζ)` of the local operator, together with the
//! ellipticity/growth constants relating them to the Euclidean norm.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponents::Exponents;

/// l^q norm of a vector; zero iff the vector is zero.
pub fn lq_norm(zeta: &[f64], q: f64) -> Result<f64> {
    validate(zeta, q)?;
    Ok(norm_q_slice(zeta, q))
}

/// Gradient `∇H(ζ)` of the l^q norm, components `|ζ_i|^{q-1} sgn(ζ_i) / H^{q-1}`.
///
/// Undefined at the origin; callers that need a value there must use
/// [`aniso_flux`], which extends continuously by zero.
pub fn lq_grad(zeta: &[f64], q: f64) -> Result<Vec<f64>> {
    validate(zeta, q)?;
    let h = norm_q_slice(zeta, q);
    if h == 0.0 {
        return Err(Error::invalid("lq_grad is singular at the origin"));
    }
    Ok(zeta
        .iter()
        .map(|&z| (z.abs() / h).powf(q - 1.0) * z.signum())
        .collect())
}

/// Flux `B(ζ) = a · H(ζ)^{p-1} ∇H(ζ)`, extended by zero at the origin
/// (continuous since `p > 1`).
pub fn aniso_flux(zeta: &[f64], exps: &Exponents) -> Vec<f64> {
    let z = pad(zeta);
    let b = flux(z, exps.p, exps.q, exps.a);
    b[..zeta.len()].to_vec()
}

/// Ellipticity and growth constants: `c1 |ζ|^p ≤ B(ζ)·ζ` and
/// `|B(ζ)| ≤ c2 |ζ|^{p-1}` with the Euclidean norm on the right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantPair {
    pub c1: f64,
    pub c2: f64,
}

/// Structure constants of the flux, from the l^q/l^2 norm equivalence
/// `m_q |ζ|₂ ≤ H(ζ) ≤ M_q |ζ|₂` with `m_q = min(1, N^{1/q-1/2})`,
/// `M_q = max(1, N^{1/q-1/2})`: by the Euler identity `B(ζ)·ζ = a H(ζ)^p`,
/// so `c1 = a·m_q^p`; and `|∇H|₂ ≤ M_q` gives `c2 = a·M_q^p`.
pub fn structure_constants(exps: &Exponents) -> ConstantPair {
    let n = exps.dim as f64;
    let t = n.powf(1.0 / exps.q - 0.5);
    let m_low = t.min(1.0);
    let m_high = t.max(1.0);
    ConstantPair {
        c1: exps.a * m_low.powf(exps.p),
        c2: exps.a * m_high.powf(exps.p),
    }
}

fn validate(zeta: &[f64], q: f64) -> Result<()> {
    if zeta.is_empty() || zeta.len() > 2 {
        return Err(Error::invalid(format!(
            "vector must have 1 or 2 components, got {}",
            zeta.len()
        )));
    }
    if !zeta.iter().all(|z| z.is_finite()) {
        return Err(Error::invalid("vector components must be finite"));
    }
    if !(q > 1.0) || !q.is_finite() {
        return Err(Error::invalid(format!("q must exceed 1, got {q}")));
    }
    Ok(())
}

fn pad(zeta: &[f64]) -> [f64; 2] {
    match *zeta {
        [x] => [x, 0.0],
        [x, y] => [x, y],
        _ => panic!("vector must have 1 or 2 components"),
    }
}

fn norm_q_slice(zeta: &[f64], q: f64) -> f64 {
    norm_q(pad(zeta), q)
}

/// l^q norm on the padded pair; overflow-safe via scaling by the max entry.
pub(crate) fn norm_q(z: [f64; 2], q: f64) -> f64 {
    let (a0, a1) = (z[0].abs(), z[1].abs());
    if q == 2.0 {
        return a0.hypot(a1);
    }
    let m = a0.max(a1);
    if m == 0.0 {
        return 0.0;
    }
    m * ((a0 / m).powf(q) + (a1 / m).powf(q)).powf(1.0 / q)
}

/// Flux on the padded pair. Uses the ratio form
/// `B_i = a H^{p-1} (|ζ_i|/H)^{q-1} sgn(ζ_i)` so that no intermediate
/// over/underflows for extreme `H`.
pub(crate) fn flux(z: [f64; 2], p: f64, q: f64, a: f64) -> [f64; 2] {
    if q == 2.0 {
        let h = z[0].hypot(z[1]);
        if h == 0.0 {
            return [0.0, 0.0];
        }
        let scale = if p == 2.0 { a } else { a * h.powf(p - 2.0) };
        return [scale * z[0], scale * z[1]];
    }
    let h = norm_q(z, q);
    if h == 0.0 {
        return [0.0, 0.0];
    }
    let hp = a * h.powf(p - 1.0);
    [
        hp * (z[0].abs() / h).powf(q - 1.0) * z[0].signum(),
        hp * (z[1].abs() / h).powf(q - 1.0) * z[1].signum(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exps(p: f64, q: f64, a: f64) -> Exponents {
        Exponents::new(2, p, 0.5, q, a, 1.0).unwrap()
    }

    #[test]
    fn lq_norm_values() {
        assert_eq!(lq_norm(&[3.0, 4.0], 2.0).unwrap(), 5.0);
        let v = lq_norm(&[1.0, 1.0], 3.0).unwrap();
        assert!((v - 2f64.powf(1.0 / 3.0)).abs() < 1e-15);
        assert_eq!(lq_norm(&[0.0, 0.0], 1.5).unwrap(), 0.0);
        assert!(lq_norm(&[f64::NAN, 0.0], 2.0).is_err());
        assert!(lq_norm(&[1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn lq_grad_values() {
        let g = lq_grad(&[3.0, 4.0], 2.0).unwrap();
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        let g = lq_grad(&[1.0, 1.0], 3.0).unwrap();
        let want = 2f64.powf(-2.0 / 3.0);
        assert!((g[0] - want).abs() < 1e-15 && (g[1] - want).abs() < 1e-15);
        let g = lq_grad(&[-1.0, 0.0], 2.0).unwrap();
        assert_eq!(g, vec![-1.0, 0.0]);
        assert!(lq_grad(&[0.0, 0.0], 2.0).is_err());
    }

    #[test]
    fn flux_values() {
        let b = aniso_flux(&[3.0, 4.0], &exps(2.0, 2.0, 1.0));
        assert!((b[0] - 3.0).abs() < 1e-14 && (b[1] - 4.0).abs() < 1e-14);
        assert_eq!(aniso_flux(&[0.0, 0.0], &exps(3.0, 1.5, 2.0)), vec![0.0, 0.0]);
        let b = aniso_flux(&[1.0, 1.0], &exps(3.0, 3.0, 1.0));
        assert!((b[0] - 1.0).abs() < 1e-14 && (b[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn structure_constants_euclidean_case_is_unity() {
        let c = structure_constants(&exps(3.5, 2.0, 1.0));
        assert_eq!(c.c1, 1.0);
        assert_eq!(c.c2, 1.0);
    }

    #[test]
    fn structure_constants_q3_example() {
        let c = structure_constants(&exps(2.0, 3.0, 1.0));
        assert!((c.c1 - 2f64.powf(-1.0 / 3.0)).abs() < 1e-15);
        assert!(c.c2 >= 1.0 - 1e-15);
    }

    #[test]
    fn structure_constants_scale_linearly_in_a() {
        let c1 = structure_constants(&exps(3.0, 1.5, 1.0));
        let c2 = structure_constants(&exps(3.0, 1.5, 2.0));
        assert!((c2.c1 - 2.0 * c1.c1).abs() < 1e-15);
        assert!((c2.c2 - 2.0 * c1.c2).abs() < 1e-15);
    }

    proptest! {
        // H is positively 1-homogeneous and vanishes only at the origin.
        #[test]
        fn norm_homogeneity(x in -10.0f64..10.0, y in -10.0f64..10.0,
                            t in 1e-3f64..1e3, q in 1.1f64..6.0) {
            let h = lq_norm(&[x, y], q).unwrap();
            let ht = lq_norm(&[t * x, t * y], q).unwrap();
            prop_assert!((ht - t * h).abs() <= 1e-12 * (1.0 + ht));
        }

        // Euler identity ∇H(ζ)·ζ = H(ζ) away from the origin.
        #[test]
        fn euler_identity(x in -10.0f64..10.0, y in -10.0f64..10.0, q in 1.1f64..6.0) {
            prop_assume!(x != 0.0 || y != 0.0);
            let h = lq_norm(&[x, y], q).unwrap();
            let g = lq_grad(&[x, y], q).unwrap();
            prop_assert!((g[0] * x + g[1] * y - h).abs() <= 1e-12 * (1.0 + h));
        }

        // The structure constants bracket the flux on random samples:
        // c1 |ζ|^p ≤ B(ζ)·ζ and |B(ζ)| ≤ c2 |ζ|^{p-1}.
        #[test]
        fn structure_constants_bracket_flux(
            x in -10.0f64..10.0, y in -10.0f64..10.0,
            p in 1.1f64..4.0, q in 1.1f64..6.0,
        ) {
            prop_assume!(x != 0.0 || y != 0.0);
            let e = exps(p, q, 1.0);
            let c = structure_constants(&e);
            let b = aniso_flux(&[x, y], &e);
            let norm2 = x.hypot(y);
            let dot = b[0] * x + b[1] * y;
            prop_assert!(dot >= c.c1 * norm2.powf(p) * (1.0 - 1e-12));
            let bn = b[0].hypot(b[1]);
            prop_assert!(bn <= c.c2 * norm2.powf(p - 1.0) * (1.0 + 1e-12));
        }

        // Strict monotonicity of the flux for p ≥ 2 (the proved range).
        #[test]
        fn flux_monotonicity(
            x1 in -5.0f64..5.0, y1 in -5.0f64..5.0,
            x2 in -5.0f64..5.0, y2 in -5.0f64..5.0,
            p in 2.0f64..4.0, q in 1.2f64..5.0,
        ) {
            prop_assume!((x1 - x2).abs() > 1e-6 || (y1 - y2).abs() > 1e-6);
            let e = exps(p, q, 1.0);
            let b1 = aniso_flux(&[x1, y1], &e);
            let b2 = aniso_flux(&[x2, y2], &e);
            let dot = (b1[0] - b2[0]) * (x1 - x2) + (b1[1] - b2[1]) * (y1 - y2);
            prop_assert!(dot >= 0.0);
        }
    }
}
