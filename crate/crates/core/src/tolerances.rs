//! The working tolerance ladder.
//!
//! Three rungs, used everywhere a numerical comparison is made:
//!
//! | rung        | value  | applies to                                  |
//! |-------------|--------|---------------------------------------------|
//! | algebraic   | 1e-12  | exact identities (projections, dualities)   |
//! | fd          | 1e-6   | quantities built from finite differences    |
//! | cross-check | 1e-4   | Ritz values and flow/FD second derivatives  |

pub const ALGEBRAIC: f64 = 1e-12;
pub const FD: f64 = 1e-6;
pub const CROSS_CHECK: f64 = 1e-4;

/// Tangency residual allowed for stored sections and differentials.
pub const TANGENCY: f64 = 1e-10;

/// `L_X g` sup-norm below which a field is classified Killing or conformal.
pub const KILLING: f64 = 1e-8;

/// Smallest singular value of `dψ` below which a map counts as degenerate.
pub const NON_DEGENERATE: f64 = 1e-8;

/// Sup-norm of the alpha-tension below which a map is flagged alpha-harmonic.
pub const ALPHA_HARMONIC: f64 = 1e-6;

/// Relative eigenvalue threshold used when pruning a dependent Ritz basis.
pub const BASIS_PRUNE: f64 = 1e-10;

/// Relative threshold (scaled by the largest Rayleigh quotient on the basis
/// diagonal) below which a Ritz value certifies instability.
pub const RITZ_NEGATIVE: f64 = 1e-9;

/// Conjugate-gradient relative residual target.
pub const CG: f64 = 1e-10;
