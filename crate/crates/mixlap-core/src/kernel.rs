//! Pointwise kernel values, the difference nonlinearity of the nonlocal
//! operator, and the two-sided truncation.

use crate::error::{Error, Result};
use crate::exponents::Exponents;

/// Fractional kernel `K(x, y) = b |x - y|^{-dim - p s}` (Euclidean distance).
///
/// Symmetric, positive for `b > 0`, and comparable to the pure fractional
/// kernel with constant `Λ = max(b, 1/b)`.
pub fn frac_kernel(x: &[f64], y: &[f64], exps: &Exponents) -> Result<f64> {
    if x.len() != exps.dim || y.len() != exps.dim {
        return Err(Error::invalid("point dimension mismatch"));
    }
    if exps.b <= 0.0 {
        return Err(Error::invalid("kernel requires b > 0"));
    }
    let d = match exps.dim {
        1 => (x[0] - y[0]).abs(),
        _ => (x[0] - y[0]).hypot(x[1] - y[1]),
    };
    if d == 0.0 {
        return Err(Error::invalid("kernel is singular at x = y"));
    }
    Ok(exps.b * d.powf(-(exps.dim as f64 + exps.ps())))
}

/// The difference nonlinearity `|t|^{p-2} t` evaluated at `t = u_x - u_y`,
/// with the continuous extension `0` at `t = 0` (needed when `p < 2`).
pub fn diff_nonlinearity(u_x: f64, u_y: f64, p: f64) -> f64 {
    signed_power(u_x - u_y, p - 1.0)
}

/// `sgn(t) |t|^e` with `0` at `t = 0` for any exponent.
pub(crate) fn signed_power(t: f64, e: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else if e == 1.0 {
        t
    } else {
        t.signum() * t.abs().powf(e)
    }
}

/// Two-sided truncation at level `mu > 0`: identity on `[-mu, mu]`, clipped
/// outside; 1-Lipschitz.
pub fn truncate(s_val: f64, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::invalid(format!("truncation level must be positive, got {mu}")));
    }
    Ok(s_val.clamp(-mu, mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exps1(p: f64, s: f64, b: f64) -> Exponents {
        Exponents::new(1, p, s, 2.0, 1.0, b).unwrap()
    }

    #[test]
    fn kernel_values() {
        let e = exps1(2.0, 0.5, 1.0);
        assert!((frac_kernel(&[0.0], &[1.0], &e).unwrap() - 1.0).abs() < 1e-15);
        assert!((frac_kernel(&[0.0], &[0.5], &e).unwrap() - 4.0).abs() < 1e-14);
        assert!(frac_kernel(&[0.3], &[0.3], &e).is_err());
        assert!(frac_kernel(&[0.0], &[1.0], &exps1(2.0, 0.5, 0.0)).is_err());
    }

    #[test]
    fn diff_nonlinearity_values() {
        assert_eq!(diff_nonlinearity(5.0, 3.0, 2.0), 2.0);
        assert_eq!(diff_nonlinearity(2.0, 0.0, 3.0), 4.0);
        assert_eq!(diff_nonlinearity(0.0, 2.0, 3.0), -4.0);
        // The continuous extension at equal arguments, including p < 2 where
        // the raw power would blow up.
        assert_eq!(diff_nonlinearity(1.0, 1.0, 1.5), 0.0);
    }

    #[test]
    fn truncate_values() {
        assert_eq!(truncate(0.5, 1.0).unwrap(), 0.5);
        assert_eq!(truncate(2.0, 1.0).unwrap(), 1.0);
        assert_eq!(truncate(-2.0, 1.0).unwrap(), -1.0);
        assert!(truncate(0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn kernel_symmetry(x in -3.0f64..3.0, y in -3.0f64..3.0,
                           p in 1.1f64..4.0, s in 0.05f64..0.95, b in 0.1f64..10.0) {
            prop_assume!((x - y).abs() > 1e-9);
            let e = exps1(p, s, b);
            let k_xy = frac_kernel(&[x], &[y], &e).unwrap();
            let k_yx = frac_kernel(&[y], &[x], &e).unwrap();
            prop_assert_eq!(k_xy, k_yx);
            // Comparability against the unit-coefficient kernel.
            let lam = e.kernel_comparability().unwrap();
            let pure = (x - y).abs().powf(-(1.0 + p * s));
            prop_assert!(k_xy <= lam * pure * (1.0 + 1e-12));
            prop_assert!(k_xy >= pure / lam * (1.0 - 1e-12));
        }

        #[test]
        fn diff_nonlinearity_antisymmetry(ux in -10.0f64..10.0, uy in -10.0f64..10.0,
                                          p in 1.1f64..4.0) {
            let fwd = diff_nonlinearity(ux, uy, p);
            let bwd = diff_nonlinearity(uy, ux, p);
            prop_assert_eq!(fwd, -bwd);
        }

        #[test]
        fn truncate_is_1_lipschitz(s1 in -10.0f64..10.0, s2 in -10.0f64..10.0,
                                   mu in 0.01f64..10.0) {
            let t1 = truncate(s1, mu).unwrap();
            let t2 = truncate(s2, mu).unwrap();
            prop_assert!((t1 - t2).abs() <= (s1 - s2).abs() + 1e-15);
            prop_assert!(t1.abs() <= mu);
        }
    }
}
