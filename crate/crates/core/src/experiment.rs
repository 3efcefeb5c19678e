//! End-to-end experiment: sample, solve, classify, compare, render.
//!
//! [`run`] executes the full pipeline for every feeder in the configured
//! family and writes all artifacts below the configured output directory:
//!
//! ```text
//! out/
//!   feeder_N<k>/
//!     samples.csv                  independent (box) setpoint draws
//!     classified.csv               solved and classified scenarios
//!     samples_successive.csv       circle-constrained setpoint draws
//!     classified_successive.csv    solved and classified scenarios
//!     density.csv                  aggregate-power density vs prediction
//!     summary.txt                  human-readable statistics
//!   fig2_N<k>.svg                  PQ scatter, independent sampling
//!   fig3_N<k>.svg                  PQ scatter, circle-constrained sampling
//!   fig4.svg                       density overlay across the family
//! ```
//!
//! Both sampling schemes share the configured seed, so the
//! circle-constrained set equals the independent set except where a draw
//! violated its inverter circle and was redrawn. All computations and file
//! contents are deterministic: rerunning with a different worker count
//! yields byte-identical artifacts.

use crate::classify::{
    classify_batch, write_classified_csv, ClassTally, ClassifiedScenario, ConstraintPolicy,
};
use crate::config::{ConfigError, ExperimentConfig};
use crate::grid::{build_grid, GridError, GridModel};
use crate::hull::hull_area;
use crate::powerflow::{solve, ControlScenario, PowerFlowError, PowerFlowResult};
use crate::report::{
    render_density_overlay, render_scatter, DensitySeries, PlotSpec, ScatterScheme,
};
use crate::sampling::{
    sample_naive, sample_successive_with_stats, write_scenarios_csv, RejectionStats, SamplingError,
};
use crate::stats::{
    box_circle_acceptance, density_comparison, joint_pass_probability, ks_distance,
    predicted_ipf_distribution, sample_mean_std, write_density_csv, StatsError,
};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Worker threads for the scenario solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerCount {
    /// One worker per core (serial when the `parallel` feature is off).
    Auto,
    /// Exactly `n` workers; `Fixed(1)` always takes the serial path.
    Fixed(usize),
}

impl WorkerCount {
    pub fn from_option(workers: Option<usize>) -> Self {
        match workers {
            None => WorkerCount::Auto,
            Some(n) => WorkerCount::Fixed(n),
        }
    }
}

/// Errors from the experiment pipeline.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("grid construction: {0}")]
    Grid(#[from] GridError),
    #[error("sampling: {0}")]
    Sampling(#[from] SamplingError),
    #[error("power flow: {0}")]
    PowerFlow(#[from] PowerFlowError),
    #[error("statistics: {0}")]
    Stats(#[from] StatsError),
    #[error("failed to write {path}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Solves all scenarios, preserving input order.
///
/// With the `parallel` feature the scenarios are distributed over a rayon
/// pool (a dedicated one for [`WorkerCount::Fixed`], the global one for
/// [`WorkerCount::Auto`]); `Fixed(1)` and feature-less builds solve
/// sequentially. The first error in scenario order is reported.
pub fn solve_batch(
    grid: &GridModel,
    scenarios: &[ControlScenario],
    workers: WorkerCount,
) -> Result<Vec<PowerFlowResult>, PowerFlowError> {
    let outcomes = match workers {
        WorkerCount::Fixed(1) => solve_all_serial(grid, scenarios),
        #[cfg(feature = "parallel")]
        WorkerCount::Auto => solve_all_parallel(grid, scenarios, None),
        #[cfg(feature = "parallel")]
        WorkerCount::Fixed(n) => solve_all_parallel(grid, scenarios, Some(n)),
        #[cfg(not(feature = "parallel"))]
        _ => solve_all_serial(grid, scenarios),
    };
    outcomes.into_iter().collect()
}

fn solve_all_serial(
    grid: &GridModel,
    scenarios: &[ControlScenario],
) -> Vec<Result<PowerFlowResult, PowerFlowError>> {
    scenarios.iter().map(|s| solve(grid, s)).collect()
}

#[cfg(feature = "parallel")]
fn solve_all_parallel(
    grid: &GridModel,
    scenarios: &[ControlScenario],
    threads: Option<usize>,
) -> Vec<Result<PowerFlowResult, PowerFlowError>> {
    use rayon::prelude::*;
    let solve_all = || scenarios.par_iter().map(|s| solve(grid, s)).collect();
    match threads {
        None => solve_all(),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(solve_all),
            // A pool that cannot be spawned degrades to the serial path.
            Err(_) => solve_all_serial(grid, scenarios),
        },
    }
}

/// Statistics of one feeder run.
#[derive(Debug, Clone)]
pub struct FeederReport {
    pub n_nodes: usize,
    /// Directory holding this feeder's CSVs and summary.
    pub dir: PathBuf,
    pub naive_tally: ClassTally,
    pub successive_tally: ClassTally,
    pub rejection: RejectionStats,
    /// Mean and standard deviation of the aggregate active power under
    /// independent sampling.
    pub p_ipf_mean_kw: f64,
    pub p_ipf_std_kw: f64,
    /// Standard deviation predicted by the uniform-convolution model.
    pub predicted_std_kw: f64,
    /// Kolmogorov-Smirnov distance between the mean-centered aggregate
    /// power and the predicted density.
    pub ks_distance: f64,
    /// Convex-hull areas in the aggregate PQ plane, kW x kvar.
    pub hull_area_sampled: f64,
    pub hull_area_grid_feasible: f64,
    pub hull_area_full_feasible: f64,
    /// Predicted probability that all units respect their circles.
    pub predicted_inverter_pass: f64,
}

impl FeederReport {
    /// Fraction of the sampled hull covered by grid-feasible points.
    pub fn grid_hull_ratio(&self) -> f64 {
        ratio(self.hull_area_grid_feasible, self.hull_area_sampled)
    }

    /// Fraction of the sampled hull covered by fully feasible points.
    pub fn full_hull_ratio(&self) -> f64 {
        ratio(self.hull_area_full_feasible, self.hull_area_sampled)
    }
}

fn ratio(part: f64, whole: f64) -> f64 {
    if whole > 0.0 {
        part / whole
    } else {
        0.0
    }
}

/// Results of a full experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub feeders: Vec<FeederReport>,
    pub output_dir: PathBuf,
}

/// Runs the configured experiment and writes all artifacts.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    config.validate()?;
    let workers = WorkerCount::from_option(config.workers);
    create_dir(&config.output_dir)?;

    let mut feeders = Vec::with_capacity(config.node_counts.len());
    let mut overlay = Vec::with_capacity(config.node_counts.len());
    for &n in &config.node_counts {
        let (report, series) = run_feeder(config, n, workers)?;
        feeders.push(report);
        overlay.push(series);
    }

    let fig4 = render_density_overlay(&PlotSpec::density_overlay(), &overlay);
    write_file(&config.output_dir.join("fig4.svg"), fig4.as_bytes())?;

    Ok(ExperimentReport {
        feeders,
        output_dir: config.output_dir.clone(),
    })
}

fn run_feeder(
    config: &ExperimentConfig,
    n: usize,
    workers: WorkerCount,
) -> Result<(FeederReport, DensitySeries), ExperimentError> {
    let spec = config.feeder_spec(n);
    let grid = build_grid(&spec)?;
    let policy = ConstraintPolicy {
        include_trafo_loading: config.include_trafo_loading,
        ..ConstraintPolicy::from_spec(&spec)
    };
    let dir = config.output_dir.join(format!("feeder_N{n}"));
    create_dir(&dir)?;

    // Independent (box) sampling.
    let naive = sample_naive(&grid, config.seed, config.n_samples);
    write_csv(&dir.join("samples.csv"), |w| {
        write_scenarios_csv(w, &naive)
    })?;
    let results = solve_batch(&grid, &naive, workers)?;
    let rows = classify_batch(&grid, &policy, &naive, &results);
    write_csv(&dir.join("classified.csv"), |w| {
        write_classified_csv(w, &rows)
    })?;
    let naive_tally = ClassTally::from_rows(&rows);

    // Circle-constrained sampling of the same scenario ids.
    let (successive, rejection) =
        sample_successive_with_stats(&grid, config.seed, config.n_samples)?;
    write_csv(&dir.join("samples_successive.csv"), |w| {
        write_scenarios_csv(w, &successive)
    })?;
    let successive_results = solve_batch(&grid, &successive, workers)?;
    let successive_rows = classify_batch(&grid, &policy, &successive, &successive_results);
    write_csv(&dir.join("classified_successive.csv"), |w| {
        write_classified_csv(w, &successive_rows)
    })?;
    let successive_tally = ClassTally::from_rows(&successive_rows);

    // Aggregate-power density against the convolution prediction. Losses
    // shift the aggregate, so the samples are mean-centered first.
    let p_ipf: Vec<f64> = rows
        .iter()
        .filter(|r| r.classification.is_some())
        .map(|r| r.p_ipf_kw)
        .collect();
    let (mean, std) = sample_mean_std(&p_ipf)?;
    let centered: Vec<f64> = p_ipf.iter().map(|p| p - mean).collect();
    let predicted = predicted_ipf_distribution(&grid)?;
    let bins = density_comparison(&centered, &predicted, config.density_bins)?;
    write_csv(&dir.join("density.csv"), |w| write_density_csv(w, &bins))?;
    let ks = ks_distance(&centered, &predicted)?;

    // Hull coverage in the aggregate PQ plane.
    let pq = |r: &ClassifiedScenario| (r.p_ipf_kw, r.q_ipf_kvar);
    let classified: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.classification.is_some())
        .map(pq)
        .collect();
    let grid_feasible: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.classification.is_some_and(|c| c.grid_ok()))
        .map(pq)
        .collect();
    let full_feasible: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.classification.is_some_and(|c| c.all_ok()))
        .map(pq)
        .collect();

    let report = FeederReport {
        n_nodes: n,
        dir: dir.clone(),
        naive_tally,
        successive_tally,
        rejection,
        p_ipf_mean_kw: mean,
        p_ipf_std_kw: std,
        predicted_std_kw: predicted.std_dev(),
        ks_distance: ks,
        hull_area_sampled: hull_area(&classified),
        hull_area_grid_feasible: hull_area(&grid_feasible),
        hull_area_full_feasible: hull_area(&full_feasible),
        predicted_inverter_pass: joint_pass_probability(box_circle_acceptance(spec.cos_phi), n),
    };

    write_file(
        &dir.join("summary.txt"),
        summary_text(config, &grid, &report).as_bytes(),
    )?;

    let fig2 = render_scatter(&PlotSpec::independent_scatter(n), &rows, ScatterScheme::Full);
    write_file(
        &config.output_dir.join(format!("fig2_N{n}.svg")),
        fig2.as_bytes(),
    )?;
    let fig3 = render_scatter(
        &PlotSpec::constrained_scatter(n),
        &successive_rows,
        ScatterScheme::Grid,
    );
    write_file(
        &config.output_dir.join(format!("fig3_N{n}.svg")),
        fig3.as_bytes(),
    )?;

    let curve: Vec<(f64, f64)> = {
        let (lo, hi) = predicted.support();
        (0..=200)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / 200.0;
                (x, predicted.pdf(x))
            })
            .collect()
    };
    let series = DensitySeries {
        label: format!("N={n}"),
        bins,
        curve,
    };
    Ok((report, series))
}

/// Deterministic human-readable per-feeder summary. Keeps every number in
/// the six-significant-digit file format and mentions no paths, so output
/// trees from different runs stay comparable.
fn summary_text(config: &ExperimentConfig, grid: &GridModel, report: &FeederReport) -> String {
    use crate::numfmt::fmt_sig6 as f6;
    let spec = &grid.spec;
    let row = spec.summary_row();
    let mut s = String::new();
    let _ = writeln!(s, "feeder N={}", report.n_nodes);
    let _ = writeln!(s, "================");
    let _ = writeln!(s, "DER nodes:                  {}", spec.n_nodes);
    let _ = writeln!(s, "line segment length:        {} m", row.line_length_m);
    let _ = writeln!(s, "feeder length:              {} m", row.feeder_length_m);
    let _ = writeln!(s, "per-unit P installed:       {} kW", row.unit_p_kw);
    let _ = writeln!(s, "per-unit |S| max:           {} kVA", row.unit_s_max_kva);
    let _ = writeln!(
        s,
        "scenarios:                  {} (seed {})",
        config.n_samples, config.seed
    );
    let _ = writeln!(s);

    for (name, tally, heading) in [
        ("independent", &report.naive_tally, "independent sampling"),
        (
            "successive",
            &report.successive_tally,
            "circle-constrained sampling",
        ),
    ] {
        let _ = writeln!(s, "{heading}");
        let _ = writeln!(
            s,
            "  converged:                {}/{}",
            tally.total - tally.unclassified,
            tally.total
        );
        let _ = writeln!(
            s,
            "  grid verdicts:            feasible {}, voltage_only {}, overload_only {}, both {}",
            tally.grid_feasible, tally.grid_voltage_only, tally.grid_overload_only, tally.grid_both
        );
        let _ = writeln!(
            s,
            "  full verdicts:            feasible {}, grid_only {}, inverter_only {}, both {}",
            tally.full_feasible, tally.full_grid_only, tally.full_inverter_only, tally.full_both
        );
        if name == "independent" {
            let _ = writeln!(
                s,
                "  inverter pass rate:       {} (predicted {})",
                f6(tally.inverter_pass_rate()),
                f6(report.predicted_inverter_pass)
            );
        } else {
            let _ = writeln!(
                s,
                "  redraw rate:              {} (predicted {})",
                f6(report.rejection.redraw_rate()),
                f6(1.0 / box_circle_acceptance(spec.cos_phi) - 1.0)
            );
        }
        let _ = writeln!(s);
    }

    let _ = writeln!(s, "aggregate power, independent sampling");
    let _ = writeln!(
        s,
        "  mean:                     {} kW (losses shift the aggregate)",
        f6(report.p_ipf_mean_kw)
    );
    let _ = writeln!(
        s,
        "  std deviation:            {} kW (predicted {} kW)",
        f6(report.p_ipf_std_kw),
        f6(report.predicted_std_kw)
    );
    let _ = writeln!(
        s,
        "  KS distance to predicted: {}",
        f6(report.ks_distance)
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "hull areas in the PQ plane (kW x kvar)");
    let _ = writeln!(
        s,
        "  sampled:                  {}",
        f6(report.hull_area_sampled)
    );
    let _ = writeln!(
        s,
        "  grid-feasible:            {} (coverage {})",
        f6(report.hull_area_grid_feasible),
        f6(report.grid_hull_ratio())
    );
    let _ = writeln!(
        s,
        "  fully feasible:           {} (coverage {})",
        f6(report.hull_area_full_feasible),
        f6(report.full_hull_ratio())
    );
    s
}

fn create_dir(path: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    std::fs::write(path, bytes).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_csv<F>(path: &Path, emit: F) -> Result<(), ExperimentError>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    emit(&mut buf).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_file(path, &buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FeederSpec;

    fn mini_config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            n_samples: 120,
            node_counts: vec![1, 3],
            density_bins: 24,
            output_dir: dir.to_path_buf(),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn worker_count_maps_from_config_option() {
        assert_eq!(WorkerCount::from_option(None), WorkerCount::Auto);
        assert_eq!(WorkerCount::from_option(Some(4)), WorkerCount::Fixed(4));
    }

    #[test]
    fn serial_and_parallel_batches_agree_bitwise() {
        let grid = build_grid(&FeederSpec::canonical(3)).unwrap();
        let scenarios = sample_naive(&grid, 7, 64);
        let serial = solve_batch(&grid, &scenarios, WorkerCount::Fixed(1)).unwrap();
        let parallel = solve_batch(&grid, &scenarios, WorkerCount::Auto).unwrap();
        let fixed = solve_batch(&grid, &scenarios, WorkerCount::Fixed(3)).unwrap();
        assert_eq!(serial.len(), 64);
        for ((a, b), c) in serial.iter().zip(&parallel).zip(&fixed) {
            assert_eq!(a.p_ipf_kw, b.p_ipf_kw);
            assert_eq!(a.v_mag, b.v_mag);
            assert_eq!(a.p_ipf_kw, c.p_ipf_kw);
            assert_eq!(a.v_mag, c.v_mag);
        }
    }

    #[test]
    fn run_writes_the_full_artifact_tree() {
        let dir = tempfile::tempdir().unwrap();
        let config = mini_config(dir.path());
        let report = run(&config).unwrap();
        assert_eq!(report.feeders.len(), 2);

        for n in [1usize, 3] {
            let feeder_dir = dir.path().join(format!("feeder_N{n}"));
            for file in [
                "samples.csv",
                "classified.csv",
                "samples_successive.csv",
                "classified_successive.csv",
                "density.csv",
                "summary.txt",
            ] {
                assert!(feeder_dir.join(file).is_file(), "missing {file} for N={n}");
            }
            assert!(dir.path().join(format!("fig2_N{n}.svg")).is_file());
            assert!(dir.path().join(format!("fig3_N{n}.svg")).is_file());
        }
        assert!(dir.path().join("fig4.svg").is_file());

        let summary =
            std::fs::read_to_string(dir.path().join("feeder_N3").join("summary.txt")).unwrap();
        assert!(summary.contains("independent sampling"));
        assert!(summary.contains("circle-constrained sampling"));
        assert!(!summary.contains(dir.path().to_str().unwrap()));

        for feeder in &report.feeders {
            assert_eq!(feeder.naive_tally.total, 120);
            assert_eq!(feeder.successive_tally.total, 120);
            assert_eq!(feeder.successive_tally.inverter_ok, 120);
            assert!(feeder.hull_area_sampled >= feeder.hull_area_grid_feasible);
            assert!(feeder.hull_area_grid_feasible >= feeder.hull_area_full_feasible);
            assert!(feeder.ks_distance > 0.0 && feeder.ks_distance < 1.0);
            assert!(feeder.p_ipf_mean_kw < 0.0); // losses import on average
        }
    }

    #[test]
    fn reruns_are_byte_identical_across_worker_counts() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let mut config_a = mini_config(dir_a.path());
        config_a.n_samples = 60;
        config_a.workers = Some(1);
        let mut config_b = mini_config(dir_b.path());
        config_b.n_samples = 60;
        config_b.workers = Some(4);
        run(&config_a).unwrap();
        run(&config_b).unwrap();

        for n in [1usize, 3] {
            for file in [
                "samples.csv",
                "classified.csv",
                "samples_successive.csv",
                "classified_successive.csv",
                "density.csv",
                "summary.txt",
            ] {
                let rel = format!("feeder_N{n}/{file}");
                let a = std::fs::read(dir_a.path().join(&rel)).unwrap();
                let b = std::fs::read(dir_b.path().join(&rel)).unwrap();
                assert_eq!(a, b, "artifact {rel} differs across worker counts");
            }
        }
        let a = std::fs::read(dir_a.path().join("fig4.svg")).unwrap();
        let b = std::fs::read(dir_b.path().join("fig4.svg")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_configs_are_rejected_before_any_work() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = mini_config(dir.path());
        config.n_samples = 0;
        assert!(matches!(
            run(&config),
            Err(ExperimentError::Config(ConfigError::Invalid(_)))
        ));
        // Nothing was created.
        assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
    }
}
