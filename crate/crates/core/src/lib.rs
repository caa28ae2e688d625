//! Symbolic control of Euler–Lagrange systems through virtual confinement
//! zones (VCZ).
//!
//! A VCZ is a ball of radius `lambda` whose center is a single integrator.
//! The task is tightened by the radius, a symbolic controller is synthesized
//! for the center on a grid, and a model-free saturated funnel law keeps the
//! real plant inside the moving ball.

pub mod abstraction;
pub mod baseline;
pub mod cli;
pub mod confinement;
pub mod geometry;
pub mod plants;
pub mod sim;
pub mod specification;
pub mod synthesis;
