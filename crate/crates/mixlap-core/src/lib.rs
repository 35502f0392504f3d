//! Numerical core for mixed anisotropic/nonlocal p-Laplace problems with
//! singular absorption terms.
//!
//! The library discretizes the Dirichlet energy
//!
//! ```text
//!   J(u) = (a/p) ∫ H(∇u)^p dx
//!        + (1/2p) ∬ |u(x)-u(y)|^p K(x,y) dx dy
//!        - ∫ F(x, u(x)) dx
//! ```
//!
//! on a uniform tensor grid over a box in one or two dimensions, with zero
//! extension outside the box. `H` is an l^q norm (anisotropic local part),
//! `K` a fractional kernel comparable to `|x-y|^{-N-ps}`, and `F` a primitive
//! of a possibly singular source density `f(x) t^{-γ(x)}`. Minimizers are
//! discrete weak solutions of the corresponding Euler–Lagrange equation.
//!
//! Modules are layered bottom-up:
//!
//! * [`exponents`], [`finsler`], [`kernel`], [`inequalities`] — scalar
//!   calculus: exponent bookkeeping, the l^q norm and its flux, kernel
//!   pointwise values, and randomized checks of the elementary inequalities
//!   the energy estimates rest on.
//! * [`grid`], [`quad`], [`assembly`], [`energy`] — geometry and assembly:
//!   grid functions, quadrature for kernel coefficients and exterior
//!   weights, and evaluation of the energy pieces with gradients.
//! * [`solver`], [`scheme`] — a Barzilai–Borwein descent solver for the
//!   (convex) discrete energies, and the approximating sequence u_n for the
//!   singular problem with its monotonicity/positivity bookkeeping.
//! * [`regularity`] — numerical certificates for the structural estimates
//!   satisfied by discrete solutions: Caccioppoli-type bounds, tail bounds,
//!   local boundedness, expansion of positivity, and Harnack-type ratios.

pub mod assembly;
pub mod energy;
pub mod error;
pub mod exponents;
pub mod finsler;
pub mod grid;
pub mod inequalities;
pub mod kernel;
pub mod quad;
pub mod regularity;
pub mod scheme;
pub mod solver;

pub use error::{Error, Result};
