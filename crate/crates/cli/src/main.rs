//! Command-line driver: describe the feeder family, draw setpoint samples,
//! run the full experiment, solve single scenarios, re-render figures.

mod artifacts;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use flexfor::classify::{classify, Classification, ConstraintPolicy};
use flexfor::config::ExperimentConfig;
use flexfor::experiment;
use flexfor::grid::build_grid;
use flexfor::numfmt::fmt_sig6;
use flexfor::powerflow::{solve, ControlScenario};
use flexfor::report::{render_density_overlay, render_scatter, PlotSpec, ScatterScheme};
use flexfor::sampling::{sample_naive, sample_successive_with_stats, write_scenarios_csv};
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "flexfor",
    version,
    about = "Monte-Carlo flexibility aggregation study on synthetic LV feeders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the feeder family parameters as a table
    Describe {
        #[command(flatten)]
        config: ConfigSource,
    },
    /// Draw setpoint scenarios for one feeder and write them as CSV
    Sample {
        #[command(flatten)]
        config: ConfigSource,
        /// Number of DER nodes on the feeder
        #[arg(long)]
        feeder: usize,
        /// Redraw setpoints that violate their inverter circle
        #[arg(long)]
        successive: bool,
        /// Override the configured seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured scenario count
        #[arg(long)]
        samples: Option<usize>,
        /// Output file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full experiment and write CSVs, summaries, and figures
    Run {
        #[command(flatten)]
        config: ConfigSource,
        /// Override the configured seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured scenario count
        #[arg(long)]
        samples: Option<usize>,
        /// Worker threads for the solves: a count or "auto"
        #[arg(long)]
        workers: Option<String>,
        /// Override the configured output directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one setpoint scenario and print the resulting grid state
    SolveOne {
        #[command(flatten)]
        config: ConfigSource,
        /// Number of DER nodes on the feeder
        #[arg(long)]
        feeder: usize,
        /// Active setpoints in kW: one per DER, or a single value for all
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        p_kw: Vec<f64>,
        /// Reactive setpoints in kvar: one per DER, or a single value for all
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        q_kvar: Vec<f64>,
        /// Emit one JSON object instead of text
        #[arg(long)]
        json: bool,
    },
    /// Re-render the SVG figures of an existing output directory
    Plot {
        /// Output directory of a previous run
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct ConfigSource {
    /// TOML configuration file (built-in defaults when omitted)
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigSource {
    fn load(&self) -> Result<ExperimentConfig> {
        match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("loading {}", path.display())),
            None => Ok(ExperimentConfig::default()),
        }
    }
}

fn main() {
    if let Err(err) = dispatch(Cli::parse()) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Describe { config } => describe(&config.load()?),
        Command::Sample {
            config,
            feeder,
            successive,
            seed,
            samples,
            out,
        } => {
            let mut config = config.load()?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(samples) = samples {
                config.n_samples = samples;
            }
            sample(&config, feeder, successive, out.as_deref())
        }
        Command::Run {
            config,
            seed,
            samples,
            workers,
            out,
        } => {
            let mut config = config.load()?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(samples) = samples {
                config.n_samples = samples;
            }
            if let Some(workers) = &workers {
                config.workers = parse_workers(workers)?;
            }
            if let Some(out) = out {
                config.output_dir = out;
            }
            run(&config)
        }
        Command::SolveOne {
            config,
            feeder,
            p_kw,
            q_kvar,
            json,
        } => solve_one(&config.load()?, feeder, p_kw, q_kvar, json),
        Command::Plot { dir } => plot(&dir),
    }
}

fn parse_workers(value: &str) -> Result<Option<usize>> {
    if value.eq_ignore_ascii_case("auto") {
        return Ok(None);
    }
    let n = value.parse().with_context(|| {
        format!("invalid worker count {value:?} (expected a number or \"auto\")")
    })?;
    Ok(Some(n))
}

fn describe(config: &ExperimentConfig) -> Result<()> {
    config.validate()?;
    println!(
        "{:>4}  {:>11}  {:>14}  {:>11}  {:>10}  {:<13}  transformer",
        "N", "unit P (kW)", "unit |S| (kVA)", "segment (m)", "feeder (m)", "line type"
    );
    for &n in &config.node_counts {
        let row = config.feeder_spec(n).summary_row();
        println!(
            "{:>4}  {:>11}  {:>14}  {:>11}  {:>10}  {:<13}  {}",
            row.n_nodes,
            row.unit_p_kw,
            row.unit_s_max_kva,
            row.line_length_m,
            row.feeder_length_m,
            row.line_type,
            row.trafo_label
        );
    }
    Ok(())
}

fn sample(
    config: &ExperimentConfig,
    feeder: usize,
    successive: bool,
    out: Option<&Path>,
) -> Result<()> {
    let grid = build_grid(&config.feeder_spec(feeder))?;
    let scenarios = if successive {
        let (scenarios, stats) =
            sample_successive_with_stats(&grid, config.seed, config.n_samples)?;
        eprintln!(
            "redraw rate {} ({} accepted, {} redrawn)",
            fmt_sig6(stats.redraw_rate()),
            stats.accepted,
            stats.redraws
        );
        scenarios
    } else {
        sample_naive(&grid, config.seed, config.n_samples)
    };
    let mut buf = Vec::new();
    write_scenarios_csv(&mut buf, &scenarios)?;
    match out {
        Some(path) => {
            std::fs::write(path, &buf).with_context(|| format!("writing {}", path.display()))?
        }
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}

fn run(config: &ExperimentConfig) -> Result<()> {
    let report = experiment::run(config)?;
    for feeder in &report.feeders {
        println!(
            "feeder N={:<3} grid-feasible {:>5.1}%  fully feasible {:>5.1}%  KS {:.3}  hull coverage {:.3}",
            feeder.n_nodes,
            100.0 * feeder.naive_tally.grid_feasible_rate(),
            100.0 * feeder.naive_tally.full_feasible_rate(),
            feeder.ks_distance,
            feeder.grid_hull_ratio(),
        );
    }
    println!("artifacts written to {}", report.output_dir.display());
    Ok(())
}

fn solve_one(
    config: &ExperimentConfig,
    feeder: usize,
    p_kw: Vec<f64>,
    q_kvar: Vec<f64>,
    json: bool,
) -> Result<()> {
    let spec = config.feeder_spec(feeder);
    let grid = build_grid(&spec)?;
    let scenario = ControlScenario {
        scenario_id: 0,
        setpoints: broadcast(p_kw, q_kvar, feeder)?,
    };
    let result = solve(&grid, &scenario)?;
    let policy = ConstraintPolicy {
        include_trafo_loading: config.include_trafo_loading,
        ..ConstraintPolicy::from_spec(&spec)
    };
    let classification = classify(&scenario, &result, &grid, &policy);

    if json {
        println!("{}", json_line(feeder, &scenario, &result, classification));
        return Ok(());
    }

    println!("feeder N={feeder}");
    println!(
        "setpoints (kW, kvar):  {}",
        scenario
            .setpoints
            .iter()
            .map(|(p, q)| format!("({p}, {q})"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    if result.converged {
        println!("converged:             yes, {} iterations", result.iterations);
    } else {
        println!("converged:             NO (iteration cap hit; values are the last iterate)");
    }
    println!("bus voltages (pu):     {}", join_sig6(&result.v_mag));
    println!("line loading (%):      {}", join_sig6(&result.line_loading_pct));
    println!("trafo loading (%):     {}", fmt_sig6(result.trafo_loading_pct));
    println!(
        "interconnection P:     {} kW (export-positive)",
        fmt_sig6(result.p_ipf_kw)
    );
    println!("interconnection Q:     {} kvar", fmt_sig6(result.q_ipf_kvar));
    println!(
        "network losses:        {} kW, {} kvar (dissipated)",
        fmt_sig6(-result.p_loss_kw),
        fmt_sig6(-result.q_loss_kvar)
    );
    match classification {
        Some(c) => println!(
            "verdict:               {} / {} (voltage {}, loading {}, inverter {})",
            c.grid_class().as_str(),
            c.full_class().as_str(),
            ok(c.volt_ok),
            ok(c.line_ok),
            ok(c.inverter_ok),
        ),
        None => println!("verdict:               unclassified (not converged)"),
    }
    Ok(())
}

fn json_line(
    feeder: usize,
    scenario: &ControlScenario,
    result: &flexfor::powerflow::PowerFlowResult,
    classification: Option<Classification>,
) -> String {
    let verdict = classification.map(|c| {
        serde_json::json!({
            "volt_ok": c.volt_ok,
            "line_ok": c.line_ok,
            "inverter_ok": c.inverter_ok,
            "grid_class": c.grid_class().as_str(),
            "full_class": c.full_class().as_str(),
        })
    });
    serde_json::json!({
        "feeder_n": feeder,
        "setpoints_kw_kvar": scenario.setpoints,
        "result": result,
        "verdict": verdict,
    })
    .to_string()
}

fn broadcast(p: Vec<f64>, q: Vec<f64>, n: usize) -> Result<Vec<(f64, f64)>> {
    let expand = |values: Vec<f64>, what: &str| -> Result<Vec<f64>> {
        if values.len() == 1 {
            Ok(vec![values[0]; n])
        } else if values.len() == n {
            Ok(values)
        } else {
            bail!("{what} needs 1 or {n} values, got {}", values.len());
        }
    };
    let p = expand(p, "--p-kw")?;
    let q = expand(q, "--q-kvar")?;
    Ok(p.into_iter().zip(q).collect())
}

fn plot(dir: &Path) -> Result<()> {
    let feeders = artifacts::find_feeder_dirs(dir)?;
    if feeders.is_empty() {
        bail!("no feeder_N* directories under {}", dir.display());
    }
    let mut overlay = Vec::with_capacity(feeders.len());
    for &(n, ref feeder_dir) in &feeders {
        let rows = artifacts::read_classified_csv(&feeder_dir.join("classified.csv"))?;
        let fig2 = render_scatter(&PlotSpec::independent_scatter(n), &rows, ScatterScheme::Full);
        write(&dir.join(format!("fig2_N{n}.svg")), &fig2)?;

        let rows =
            artifacts::read_classified_csv(&feeder_dir.join("classified_successive.csv"))?;
        let fig3 = render_scatter(&PlotSpec::constrained_scatter(n), &rows, ScatterScheme::Grid);
        write(&dir.join(format!("fig3_N{n}.svg")), &fig3)?;

        overlay.push(artifacts::read_density_series(
            n,
            &feeder_dir.join("density.csv"),
        )?);
    }
    let fig4 = render_density_overlay(&PlotSpec::density_overlay(), &overlay);
    write(&dir.join("fig4.svg"), &fig4)?;
    println!(
        "re-rendered {} figures in {}",
        2 * feeders.len() + 1,
        dir.display()
    );
    Ok(())
}

fn write(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn join_sig6(values: &[f64]) -> String {
    values
        .iter()
        .map(|&v| fmt_sig6(v))
        .collect::<Vec<_>>()
        .join("  ")
}

fn ok(flag: bool) -> &'static str {
    if flag {
        "ok"
    } else {
        "violated"
    }
}
