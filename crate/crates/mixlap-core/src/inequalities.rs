//! Randomized verification of the two elementary inequalities behind the
//! energy estimates: the vector monotonicity inequality for `|t|^{p-2} t`
//! and the chain-rule inequality for increasing piecewise-linear functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::signed_power;

/// Outcome of sampling the monotonicity inequality
/// `(|a|^{p-2}a - |b|^{p-2}b)·(a-b) ≥ c |a-b|² (|a|+|b|)^{p-2}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AlgCheck {
    /// Sampled infimum of the ratio lhs/rhs — an empirical lower bound for c.
    pub c_fit: f64,
    /// Number of nonpositive ratios observed (must be 0).
    pub violations: u64,
    /// Samples actually used (degenerate a = b pairs are skipped).
    pub used: u64,
    pub seed: u64,
}

/// Samples random pairs in `R^dim` and returns the empirical constant of the
/// monotonicity inequality. Pairs with `|a - b|` at rounding level are
/// skipped rather than counted.
pub fn check_alg_inequality(p: f64, dim: usize, samples: u64, seed: u64) -> Result<AlgCheck> {
    if !(p > 1.0) {
        return Err(Error::invalid(format!("p must exceed 1, got {p}")));
    }
    if dim == 0 || dim > 2 {
        return Err(Error::invalid("dim must be 1 or 2"));
    }
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c_fit = f64::INFINITY;
    let mut violations = 0u64;
    let mut used = 0u64;
    for _ in 0..samples {
        let scale = 10f64.powf(rng.random_range(-1.0..1.0));
        let mut a = [0.0f64; 2];
        let mut b = [0.0f64; 2];
        for i in 0..dim {
            a[i] = scale * rng.sample::<f64, _>(StandardNormal);
            b[i] = scale * rng.sample::<f64, _>(StandardNormal);
        }
        let na = a[0].hypot(a[1]);
        let nb = b[0].hypot(b[1]);
        let diff = [a[0] - b[0], a[1] - b[1]];
        let nd = diff[0].hypot(diff[1]);
        if nd <= 1e-12 * (na + nb) || na + nb == 0.0 {
            continue;
        }
        used += 1;
        let fa = vector_power(a, na, p);
        let fb = vector_power(b, nb, p);
        let lhs = (fa[0] - fb[0]) * diff[0] + (fa[1] - fb[1]) * diff[1];
        let rhs = nd * nd * (na + nb).powf(p - 2.0);
        let ratio = lhs / rhs;
        if ratio <= 0.0 {
            violations += 1;
        }
        c_fit = c_fit.min(ratio);
    }
    if used == 0 {
        return Err(Error::invalid("all sampled pairs were degenerate"));
    }
    Ok(AlgCheck {
        c_fit,
        violations,
        used,
        seed,
    })
}

fn vector_power(v: [f64; 2], norm: f64, p: f64) -> [f64; 2] {
    if norm == 0.0 {
        return [0.0, 0.0];
    }
    let s = norm.powf(p - 2.0);
    [s * v[0], s * v[1]]
}

/// Nondecreasing piecewise-linear function, normalized to `g(0) = 0`
/// (only differences of `g` enter the inequality it is used for).
///
/// `slopes` has one more entry than `breaks`: slope before the first break,
/// between consecutive breaks, and after the last one.
#[derive(Debug, Clone)]
pub struct PiecewiseLinear {
    breaks: Vec<f64>,
    slopes: Vec<f64>,
}

impl PiecewiseLinear {
    /// Validates ordering, finiteness, and monotonicity (slopes ≥ 0).
    pub fn new(breaks: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if slopes.len() != breaks.len() + 1 {
            return Err(Error::invalid(format!(
                "need {} slopes for {} breaks, got {}",
                breaks.len() + 1,
                breaks.len(),
                slopes.len()
            )));
        }
        if !breaks.iter().all(|b| b.is_finite()) || !slopes.iter().all(|s| s.is_finite()) {
            return Err(Error::invalid("breaks and slopes must be finite"));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("breaks must be strictly increasing"));
        }
        if let Some(s) = slopes.iter().find(|s| **s < 0.0) {
            return Err(Error::invalid(format!(
                "function must be nondecreasing; found slope {s}"
            )));
        }
        Ok(PiecewiseLinear { breaks, slopes })
    }

    /// `g(t)` with the normalization `g(0) = 0`.
    pub fn eval(&self, t: f64) -> f64 {
        self.integrate(t, |s| s)
    }

    /// `G(t) = ∫₀ᵗ g'(τ)^{1/p} dτ`, closed-form per segment.
    pub fn root_primitive(&self, t: f64, p: f64) -> f64 {
        self.integrate(t, |s| s.powf(1.0 / p))
    }

    /// `∫₀ᵗ f(g'(τ)) dτ` for piecewise-constant `g'`.
    fn integrate(&self, t: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (lo, hi, sign) = if t >= 0.0 { (0.0, t, 1.0) } else { (t, 0.0, -1.0) };
        let mut acc = 0.0;
        for (k, &slope) in self.slopes.iter().enumerate() {
            let seg_lo = if k == 0 { f64::NEG_INFINITY } else { self.breaks[k - 1] };
            let seg_hi = if k == self.breaks.len() { f64::INFINITY } else { self.breaks[k] };
            let len = (hi.min(seg_hi) - lo.max(seg_lo)).max(0.0);
            if len > 0.0 {
                acc += f(slope) * len;
            }
        }
        sign * acc
    }
}

/// Outcome of sampling the chain-rule inequality
/// `|a-b|^{p-2}(a-b)(g(a)-g(b)) ≥ |G(a)-G(b)|^p`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IncreasingCheck {
    /// Deficits beyond tolerance `1e-12·scale` (must be 0).
    pub violations: u64,
    /// Largest relative deficit observed (≤ 0 when the inequality held with
    /// room on every sample).
    pub max_deficit: f64,
    pub used: u64,
    pub seed: u64,
}

/// Samples random scalar pairs and verifies the chain-rule inequality for a
/// nondecreasing piecewise-linear `g` with root-primitive `G`.
pub fn check_increasing_inequality(
    p: f64,
    g: &PiecewiseLinear,
    samples: u64,
    seed: u64,
) -> Result<IncreasingCheck> {
    if !(p > 1.0) {
        return Err(Error::invalid(format!("p must exceed 1, got {p}")));
    }
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0u64;
    let mut max_deficit = f64::NEG_INFINITY;
    let mut used = 0u64;
    for _ in 0..samples {
        let scale = 10f64.powf(rng.random_range(-1.0..1.0));
        let a = scale * rng.sample::<f64, _>(StandardNormal);
        let b = scale * rng.sample::<f64, _>(StandardNormal);
        if (a - b).abs() <= 1e-12 * (a.abs() + b.abs()) {
            continue;
        }
        used += 1;
        let lhs = signed_power(a - b, p - 1.0) * (g.eval(a) - g.eval(b));
        let rhs = (g.root_primitive(a, p) - g.root_primitive(b, p)).abs().powf(p);
        let tol = 1e-12 * lhs.abs().max(rhs).max(1.0);
        let deficit = (rhs - lhs) / lhs.abs().max(rhs).max(1.0);
        max_deficit = max_deficit.max(deficit);
        if rhs - lhs > tol {
            violations += 1;
        }
    }
    if used == 0 {
        return Err(Error::invalid("all sampled pairs were degenerate"));
    }
    Ok(IncreasingCheck {
        violations,
        max_deficit,
        used,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alg_p2_ratio_is_identically_one() {
        let r = check_alg_inequality(2.0, 2, 10_000, 7).unwrap();
        assert_eq!(r.violations, 0);
        assert!((r.c_fit - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alg_p3_has_positive_constant() {
        let r = check_alg_inequality(3.0, 2, 100_000, 42).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.c_fit > 0.0);
        assert!(r.used > 99_000);
    }

    #[test]
    fn alg_subquadratic_has_positive_constant() {
        let r = check_alg_inequality(1.5, 1, 100_000, 13).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.c_fit > 0.0);
    }

    #[test]
    fn alg_is_deterministic_in_the_seed() {
        let r1 = check_alg_inequality(2.5, 2, 5_000, 11).unwrap();
        let r2 = check_alg_inequality(2.5, 2, 5_000, 11).unwrap();
        assert_eq!(r1.c_fit, r2.c_fit);
        assert_eq!(r1.used, r2.used);
    }

    #[test]
    fn piecewise_linear_validation() {
        assert!(PiecewiseLinear::new(vec![0.0], vec![0.0, 1.0]).is_ok());
        assert!(PiecewiseLinear::new(vec![1.0, 0.0], vec![0.0, 1.0, 2.0]).is_err());
        assert!(PiecewiseLinear::new(vec![0.0], vec![1.0]).is_err());
        // Decreasing segment → not admissible.
        assert!(PiecewiseLinear::new(vec![0.0], vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn piecewise_linear_positive_part_values() {
        // g(t) = t⁺: zero slope below 0, unit slope above.
        let g = PiecewiseLinear::new(vec![0.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(g.eval(2.0), 2.0);
        assert_eq!(g.eval(-3.0), 0.0);
        // G = g for unit slopes regardless of p.
        assert_eq!(g.root_primitive(2.0, 3.0), 2.0);
        assert_eq!(g.root_primitive(-3.0, 3.0), 0.0);
    }

    #[test]
    fn increasing_inequality_identity_case_is_equality() {
        // g(t) = t gives G = t and lhs = rhs = |a-b|^p.
        let g = PiecewiseLinear::new(vec![], vec![1.0]).unwrap();
        let r = check_increasing_inequality(2.5, &g, 20_000, 3).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.max_deficit < 1e-12);
    }

    #[test]
    fn increasing_inequality_holds_for_kinked_functions() {
        let g = PiecewiseLinear::new(vec![-1.0, 0.5, 2.0], vec![0.0, 2.0, 0.25, 9.0]).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let r = check_increasing_inequality(p, &g, 50_000, 1234).unwrap();
            assert_eq!(r.violations, 0, "p = {p}");
        }
    }

    #[test]
    fn increasing_inequality_constant_function_is_trivial() {
        let g = PiecewiseLinear::new(vec![], vec![0.0]).unwrap();
        let r = check_increasing_inequality(2.0, &g, 1_000, 5).unwrap();
        assert_eq!(r.violations, 0);
    }
}
