//! Command-line interface. Exit codes: 0 success, 1 input error,
//! 2 assertion (property) failure.

use clap::{Args, Parser, Subcommand};

use crate::calibrate::{is_calibrable, HorizontalEdge};
use crate::config::{ExperimentConfig, ShapeSpec};
use crate::flow_eff::{self, EffectiveLaw};
use crate::flow_eps;
use crate::forcing::ForcingField;
use crate::harness;
use crate::render::render_svg;

#[derive(Parser)]
#[command(
    name = "crystal-flow",
    about = "Crystalline curvature flow of polyrectangles under layered two-phase forcing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Path to a JSON experiment config.
    #[arg(long)]
    config: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run the oscillatory-forcing flow for the first epsilon in the config.
    SimulateEps(ConfigArg),
    /// Run the effective (homogenized) flow.
    SimulateEff(ConfigArg),
    /// Decide calibrability of one horizontal edge and print the report.
    Calibrate {
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, allow_negative_numbers = true)]
        p: f64,
        #[arg(long, allow_negative_numbers = true)]
        q: f64,
        #[arg(long, allow_negative_numbers = true)]
        chi: i8,
        #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
        n0: i8,
    },
    /// Randomized analytic-vs-variational calibrability agreement report.
    Oracle {
        #[arg(long, default_value_t = 500)]
        edges: usize,
        #[arg(long, default_value_t = 400)]
        m_per_period: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Epsilon-sweep convergence study against the effective flow.
    Converge(ConfigArg),
    /// Comparison-principle check for two nested shapes.
    Compare(ConfigArg),
    /// Phase portrait of the effective rectangle flow over a length grid.
    Portrait {
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        /// Comma-separated list of horizontal lengths.
        #[arg(long, value_delimiter = ',')]
        l1: Vec<f64>,
        /// Comma-separated list of vertical lengths.
        #[arg(long, value_delimiter = ',')]
        l2: Vec<f64>,
        #[arg(long, default_value_t = 10.0)]
        t_max: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Render sampled states of a flow to SVG files.
    Render {
        #[command(flatten)]
        config: ConfigArg,
        /// Sample times to render (comma-separated); empty renders nothing.
        #[arg(long, value_delimiter = ',')]
        times: Vec<f64>,
    },
}

fn load_config(path: &str) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
    ExperimentConfig::from_json(&text).map_err(|e| e.to_string())
}

fn first_field(cfg: &ExperimentConfig) -> Result<ForcingField, String> {
    let eps = *cfg
        .epsilons
        .first()
        .ok_or_else(|| "config needs at least one epsilon".to_string())?;
    ForcingField::new(cfg.alpha, cfg.beta, eps).map_err(|e| e.to_string())
}

fn cmd_simulate_eps(cfg: &ExperimentConfig) -> Result<i32, String> {
    let f = first_field(cfg)?;
    let shape = cfg.shape.to_polyrectangle().map_err(|e| e.to_string())?;
    let start = flow_eps::snap_to_c(&shape, &f).map_err(|e| e.to_string())?;
    let traj = flow_eps::eps_flow(&f, &start, cfg.t_max, cfg.dt, cfg.samples, cfg.branch_policy)
        .map_err(|e| e.to_string())?;
    if let Some(prefix) = &cfg.output_prefix {
        harness::write_traj_jsonl(prefix, &traj).map_err(|e| e.to_string())?;
        harness::write_events_json(prefix, &traj).map_err(|e| e.to_string())?;
        std::fs::write(format!("{prefix}.csv"), harness::traj_csv(&traj))
            .map_err(|e| e.to_string())?;
    }
    println!(
        "{}",
        serde_json::json!({
            "samples": traj.samples.len(),
            "events": traj.events.len(),
            "branch_events": traj.branch_event_count(),
            "extinction_time": traj.extinction_time,
        })
    );
    Ok(0)
}

fn cmd_simulate_eff(cfg: &ExperimentConfig) -> Result<i32, String> {
    let law = EffectiveLaw::new(cfg.alpha, cfg.beta).map_err(|e| e.to_string())?;
    match &cfg.shape {
        ShapeSpec::Circle { radius } => {
            let boundary = flow_eff::circle_polyline(0.0, 0.0, *radius, 2048);
            let traj = flow_eff::convex_flow(&law, &boundary, cfg.t_max, cfg.samples, 256)
                .map_err(|e| e.to_string())?;
            println!(
                "{}",
                serde_json::json!({
                    "samples": traj.samples.len(),
                    "final_facets": traj.samples.last().map(|s| s.facets.map(|f| f.length)),
                })
            );
        }
        _ => {
            let shape = cfg.shape.to_polyrectangle().map_err(|e| e.to_string())?;
            let traj = flow_eff::poly_flow(&law, &shape, cfg.t_max, cfg.dt, cfg.samples)
                .map_err(|e| e.to_string())?;
            if let Some(prefix) = &cfg.output_prefix {
                let eps_like = flow_eps::EpsTrajectory {
                    samples: traj.samples.clone(),
                    events: Vec::new(),
                    extinction_time: traj.extinction_time,
                };
                harness::write_traj_jsonl(prefix, &eps_like).map_err(|e| e.to_string())?;
                std::fs::write(format!("{prefix}.csv"), harness::traj_csv(&eps_like))
                    .map_err(|e| e.to_string())?;
            }
            println!(
                "{}",
                serde_json::json!({
                    "samples": traj.samples.len(),
                    "events": traj.events.len(),
                    "extinction_time": traj.extinction_time,
                })
            );
        }
    }
    Ok(0)
}

fn cmd_render(cfg: &ExperimentConfig, times: &[f64]) -> Result<i32, String> {
    let prefix = cfg
        .output_prefix
        .clone()
        .ok_or_else(|| "render needs output_prefix".to_string())?;
    let f = first_field(cfg)?;
    let shape = cfg.shape.to_polyrectangle().map_err(|e| e.to_string())?;
    let start = flow_eps::snap_to_c(&shape, &f).map_err(|e| e.to_string())?;
    let traj = flow_eps::eps_flow(&f, &start, cfg.t_max, cfg.dt, cfg.samples, cfg.branch_policy)
        .map_err(|e| e.to_string())?;
    let world = start.bounding_box();
    for (k, &t) in times.iter().enumerate() {
        let shape = traj.shape_at(t);
        let svg = render_svg(&[shape.vertices().to_vec()], world);
        std::fs::write(format!("{prefix}.{k:03}.svg"), svg).map_err(|e| e.to_string())?;
    }
    Ok(0)
}

/// Entry point returning the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version with success exits.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result: Result<i32, String> = match &cli.command {
        Command::SimulateEps(c) => load_config(&c.config).and_then(|cfg| cmd_simulate_eps(&cfg)),
        Command::SimulateEff(c) => load_config(&c.config).and_then(|cfg| cmd_simulate_eff(&cfg)),
        Command::Calibrate {
            alpha,
            beta,
            epsilon,
            p,
            q,
            chi,
            n0,
        } => (|| {
            if q <= p {
                return Err("need p < q".to_string());
            }
            let f = ForcingField::new(*alpha, *beta, *epsilon).map_err(|e| e.to_string())?;
            let edge = HorizontalEdge {
                p: *p,
                q: *q,
                chi: *chi,
                n0: *n0,
            };
            let rep = is_calibrable(&edge, &f);
            println!(
                "{}",
                serde_json::to_string_pretty(&rep).map_err(|e| e.to_string())?
            );
            Ok(0)
        })(),
        Command::Oracle {
            edges,
            m_per_period,
            seed,
        } => {
            let rep = harness::oracle_agreement(*edges, *m_per_period, *seed);
            println!(
                "{}",
                serde_json::to_string_pretty(&rep).unwrap_or_default()
            );
            Ok(if rep.pass { 0 } else { 2 })
        }
        Command::Converge(c) => load_config(&c.config).and_then(|cfg| {
            let rep = harness::converge_experiment(&cfg).map_err(|e| e.to_string())?;
            println!(
                "{}",
                serde_json::to_string_pretty(&rep).map_err(|e| e.to_string())?
            );
            Ok(if rep.pass { 0 } else { 2 })
        }),
        Command::Compare(c) => load_config(&c.config).and_then(|cfg| {
            let rep = harness::compare_experiment(&cfg).map_err(|e| e.to_string())?;
            println!(
                "{}",
                serde_json::to_string_pretty(&rep).map_err(|e| e.to_string())?
            );
            Ok(if rep.pass { 0 } else { 2 })
        }),
        Command::Portrait {
            alpha,
            beta,
            l1,
            l2,
            t_max,
            dt,
        } => (|| {
            let law = EffectiveLaw::new(*alpha, *beta).map_err(|e| e.to_string())?;
            if l1.is_empty() || l2.is_empty() {
                return Err("portrait needs nonempty l1 and l2 grids".to_string());
            }
            let rep =
                harness::portrait_experiment(&law, l1, l2, *t_max, *dt).map_err(|e| e.to_string())?;
            print!("{}", harness::portrait_csv(&rep));
            Ok(0)
        })(),
        Command::Render { config, times } => {
            load_config(&config.config).and_then(|cfg| cmd_render(&cfg, times))
        }
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    }
}
