//! Squarefree integers in arithmetic progressions.
//!
//! The crate computes, for `x` up to about `10⁹`, the counts `S(x;q,a)` of
//! squarefree `n ≤ x` in each reduced residue class modulo `q`, their error
//! terms against `c_q x/q`, the variance `V(x;q)`, the pair count `T(x;q)`,
//! and cross-checks every exact identity linking them through independent
//! routes: a convolution expansion of `|μ|`, Dirichlet character sums, and
//! brute-force lattice and congruence counts.
//!
//! Modules:
//!
//! * [`arith`]: Möbius sieves, totient, unit groups, `c_q`.
//! * [`progressions`]: profiles, variance, `T`, twisted correlations.
//! * [`characters`]: Dirichlet character groups and character-sum variance.
//! * [`lemmas`]: primitive solutions of linear forms, linear congruence
//!   counts `N`, `N*`, and the weight `M(q,a₁,a₂)`.
//! * [`experiments`]: `(x, q)` sweeps, bound envelopes, exponent fits, CSV
//!   and JSON reports.
//! * [`selfcheck`]: the small-scale identity suite.
//! * [`cli`]: configuration and subcommands behind the `sqfree` binary.

pub mod arith;
pub mod characters;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod lemmas;
pub mod numeric;
pub mod progressions;
pub mod selfcheck;

pub use error::{Error, Result};
