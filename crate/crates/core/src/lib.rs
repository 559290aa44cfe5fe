//! Numerical laboratory for layered high-contrast elastic composites.
//!
//! The crate builds the explicit deformation families of eps-periodic
//! stiff/soft laminates (bending, wrinkling, layer rotation, laminates and
//! recovery sequences), measures layered rigidity energies and their
//! eps-scaling, runs a per-layer rotation-extraction pipeline, and evaluates
//! the homogenized energy density both in closed form and by cell-problem
//! minimization.
//!
//! Entry points by theme:
//! - [`mat`]: distance to SO(n), Procrustes fits, minors, the admissible
//!   splitting `F = R_F + d_F (x) e_n` and the map `F -> F_lambda`.
//! - [`geometry`]: layer phases, midsections, strips, layered quadrature.
//! - [`constructions`]: deformation builders and their limit fields.
//! - [`rigidity`]: stiff-phase energies, layerwise rotation extraction,
//!   shift moduli, scaling fits, the reverse Poincare check.
//! - [`homog`]: energy densities, the convex closed form, cell-problem
//!   minimization, rank-one lamination envelopes.
//! - [`experiments`]: batch drivers and deterministic CSV emission backing
//!   the `strata` command-line tool.

pub mod constructions;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod homog;
pub mod mat;
pub mod rigidity;
pub mod verification;

pub use error::{Error, Result};
