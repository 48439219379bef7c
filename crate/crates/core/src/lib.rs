//! Stability analysis for scalar neutral delay differential equations
//!
//! ```text
//! (x(t) - a(t) x(g(t)))' = -b(t) x(h(t)),   t >= t0.
//! ```

pub mod cli;
pub mod corpus;
pub mod criteria;
pub mod eqspec;
pub mod grid;
pub mod params;
pub mod report;
pub mod series;
pub mod simulate;
