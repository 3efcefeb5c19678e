//! Monte-Carlo study of aggregated DER flexibility on synthetic low-voltage
//! feeders.
//!
//! The crate builds a family of radial 0.4 kV feeders that share the same
//! total installed DER power and the same average transformer–node distance,
//! samples DER active/reactive setpoints, solves an AC power flow per sample,
//! classifies each sample against grid and inverter constraints, and compares
//! the resulting interconnection-power-flow distribution with its analytic
//! prediction (a Bates distribution). Reports are written as CSV tables and
//! standalone SVG figures.
//!
//! Modules mirror the pipeline stages:
//!
//! * [`grid`] — feeder synthesis from a node count,
//! * [`powerflow`] — Newton-Raphson AC power flow in per-unit form,
//! * [`sampling`] — deterministic scenario generation (naive and successive),
//! * [`classify`] — feasibility labeling,
//! * [`stats`] — Bates density/CDF, histograms, KS distance,
//! * [`experiment`] — end-to-end orchestration with optional parallelism,
//! * [`report`] — SVG figure rendering.
//!
//! With the default `parallel` feature the per-sample solves run on a rayon
//! thread pool; without it every code path is sequential. Outputs are
//! byte-identical either way.

pub mod classify;
pub mod config;
pub mod experiment;
pub mod grid;
pub mod hull;
pub mod numfmt;
pub mod powerflow;
pub mod report;
pub mod sampling;
pub mod stats;
pub mod svg;
