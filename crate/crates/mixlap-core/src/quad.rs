//! Quadrature primitives used by the kernel-coefficient assembly and the
//! exterior weights: exact power integrals, fixed Gauss–Legendre rules, and
//! adaptive refinement on intervals and rectangles.

use crate::error::{Error, Result};

/// 16-point Gauss–Legendre abscissae on [-1, 1] (positive half).
const GL_X: [f64; 8] = [
    0.09501250983763744,
    0.28160355077925891,
    0.45801677765722739,
    0.61787624440264375,
    0.75540440835500303,
    0.86563120238783174,
    0.94457502307323258,
    0.98940093499164993,
];

/// Matching Gauss–Legendre weights.
const GL_W: [f64; 8] = [
    0.18945061045506850,
    0.18260341504492359,
    0.16915651939500254,
    0.14959598881657673,
    0.12462897125553387,
    0.09515851168249278,
    0.06225352393864789,
    0.02715245941175409,
];

/// `∫_a^b t^η dt` for `0 ≤ a < b`, including the logarithmic case η = −1.
/// `a = 0` requires `η > −1`. Written as `a^{η+1}·expm1((η+1)·ln(b/a))/(η+1)`
/// so the formula stays fully accurate arbitrarily close to the log branch
/// (the naive difference of powers cancels catastrophically there).
pub(crate) fn power_int(a: f64, b: f64, eta: f64) -> f64 {
    debug_assert!(a >= 0.0 && b > a);
    debug_assert!(a > 0.0 || eta > -1.0);
    let e1 = eta + 1.0;
    if a == 0.0 {
        return b.powf(e1) / e1;
    }
    if e1 == 0.0 {
        return (b / a).ln();
    }
    a.powf(e1) * (e1 * (b / a).ln()).exp_m1() / e1
}

/// Tensor 16×16 Gauss–Legendre rule on an axis-aligned rectangle.
pub(crate) fn gauss_rect<F: Fn(f64, f64) -> f64>(f: &F, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let (cx, rx) = (0.5 * (x0 + x1), 0.5 * (x1 - x0));
    let (cy, ry) = (0.5 * (y0 + y1), 0.5 * (y1 - y0));
    let mut total = 0.0;
    for i in 0..8 {
        for sx in [-1.0, 1.0] {
            let x = cx + sx * rx * GL_X[i];
            let mut row = 0.0;
            for j in 0..8 {
                for sy in [-1.0, 1.0] {
                    row += GL_W[j] * f(x, cy + sy * ry * GL_X[j]);
                }
            }
            total += GL_W[i] * row;
        }
    }
    total * rx * ry
}

/// 16-point Gauss–Legendre rule on an interval.
pub(crate) fn gauss_interval<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    let mut total = 0.0;
    for i in 0..8 {
        total += GL_W[i] * (f(c + r * GL_X[i]) + f(c - r * GL_X[i]));
    }
    total * r
}

/// Adaptive quadrature on a rectangle by recursive quadrant refinement with
/// the 16×16 rule; the coarse/fine discrepancy drives the error estimate.
pub(crate) fn adaptive_rect<F: Fn(f64, f64) -> f64>(
    f: &F,
    rect: [f64; 4],
    rel_tol: f64,
) -> Result<f64> {
    let coarse = gauss_rect(f, rect[0], rect[1], rect[2], rect[3]);
    let scale = coarse.abs().max(1e-300);
    let (value, err) = refine_rect(f, rect, rel_tol * scale, 22);
    let achieved = err / value.abs().max(1e-300);
    if achieved > 10.0 * rel_tol {
        return Err(Error::QuadratureTolerance {
            requested: rel_tol,
            achieved,
        });
    }
    Ok(value)
}

fn refine_rect<F: Fn(f64, f64) -> f64>(
    f: &F,
    [x0, x1, y0, y1]: [f64; 4],
    tol_abs: f64,
    depth: usize,
) -> (f64, f64) {
    let coarse = gauss_rect(f, x0, x1, y0, y1);
    let (mx, my) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let quads = [
        [x0, mx, y0, my],
        [mx, x1, y0, my],
        [x0, mx, my, y1],
        [mx, x1, my, y1],
    ];
    let fine: f64 = quads
        .iter()
        .map(|q| gauss_rect(f, q[0], q[1], q[2], q[3]))
        .sum();
    let err = (fine - coarse).abs();
    if err <= tol_abs || depth == 0 {
        return (fine, err);
    }
    let mut value = 0.0;
    let mut total_err = 0.0;
    for q in quads {
        let (v, e) = refine_rect(f, q, 0.25 * tol_abs, depth - 1);
        value += v;
        total_err += e;
    }
    (value, total_err)
}

/// Adaptive quadrature on an interval (recursive bisection of the 16-point
/// rule).
pub(crate) fn adaptive_interval<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
) -> Result<f64> {
    if !(b > a) {
        return Err(Error::invalid("empty integration interval"));
    }
    let coarse = gauss_interval(f, a, b);
    let scale = coarse.abs().max(1e-300);
    let (value, err) = refine_interval(f, a, b, rel_tol * scale, 40);
    let achieved = err / value.abs().max(1e-300);
    if achieved > 10.0 * rel_tol {
        return Err(Error::QuadratureTolerance {
            requested: rel_tol,
            achieved,
        });
    }
    Ok(value)
}

fn refine_interval<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol_abs: f64,
    depth: usize,
) -> (f64, f64) {
    let coarse = gauss_interval(f, a, b);
    let m = 0.5 * (a + b);
    let fine = gauss_interval(f, a, m) + gauss_interval(f, m, b);
    let err = (fine - coarse).abs();
    if err <= tol_abs || depth == 0 {
        return (fine, err);
    }
    let (v0, e0) = refine_interval(f, a, m, 0.5 * tol_abs, depth - 1);
    let (v1, e1) = refine_interval(f, m, b, 0.5 * tol_abs, depth - 1);
    (v0 + v1, e0 + e1)
}
