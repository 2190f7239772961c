//! Event-driven simulator and analysis library for crystalline (square
//! anisotropy) curvature flow of axis-aligned polygons in a 1-periodic layered
//! forcing medium: the epsilon-scale flow with calibrability checks, pinning
//! and facet breaking, the homogenized effective flow, brute-force oracles,
//! and a convergence/comparison harness.

// `!(x > 0.0)` guards are deliberate: they reject NaN along with
// non-positive values, which `x <= 0.0` would not.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod cli;
pub mod config;
pub mod facets;
pub mod flow_eff;
pub mod flow_eps;
pub mod forcing;
pub mod geometry;
pub mod harness;
pub mod oracle;
pub mod render;

/// CLI entry point; returns the process exit code.
pub fn run() -> i32 {
    cli::run()
}
