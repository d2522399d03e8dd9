use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hvlab_harness::config::{parse_axis, ENV_PREFIX};
use hvlab_harness::{run, sweep, write_summary, ConfigError, ExperimentConfig, HarnessError, Scenario};

#[derive(Debug, Parser)]
#[command(name = "hvlab", version, about = "Weighted half-space elliptic problem laboratory")]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true, env = "HVLAB_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "HVLAB_SEED")]
    seed: Option<u64>,
    /// Output directory for reports and snapshots.
    #[arg(long, global = true, env = "HVLAB_OUT")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, env = "HVLAB_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InequalityCheck {
    Hardy,
    Trace,
    Ladder,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BestConstantKind {
    TraceCritical,
    Trace,
    Volume,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PohozaevProbe {
    Bubble,
    Nonexistence,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Hardy, trace-chain or Moser-ladder suite.
    VerifyInequality {
        #[arg(long, value_enum)]
        check: Option<InequalityCheck>,
    },
    /// Schwarz rearrangement property suite.
    RearrangeCheck,
    /// Rayleigh-quotient minimization.
    BestConstant {
        #[arg(long, value_enum)]
        kind: Option<BestConstantKind>,
    },
    /// Mountain-pass solve of a preset or custom problem.
    MountainPass {
        /// One of thm16, thm17, thm17i, thm17ii, thm18.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Closed-form Pohozaev balance or the critical nonexistence probe.
    PohozaevCheck {
        #[arg(long, value_enum)]
        probe: Option<PohozaevProbe>,
    },
    /// Refinement study of the bubble PDE residuals.
    InstantonResidual,
    /// Transformed Robin residuals under one grid doubling.
    RobinCheck,
    /// Cartesian sweep of the configured scenario.
    Sweep {
        /// Axis as `name=v1,v2,...`; repeatable, overrides `[sweep.axes]`.
        #[arg(long = "axis")]
        axes: Vec<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::VerifyInequality { .. } => "verify-inequality",
            Command::RearrangeCheck => "rearrange-check",
            Command::BestConstant { .. } => "best-constant",
            Command::MountainPass { .. } => "mountain-pass",
            Command::PohozaevCheck { .. } => "pohozaev-check",
            Command::InstantonResidual => "instanton-residual",
            Command::RobinCheck => "robin-check",
            Command::Sweep { .. } => "sweep",
        }
    }

    /// Scenario named by the subcommand's own options, if any.
    fn explicit_scenario(&self) -> Option<String> {
        match self {
            Command::VerifyInequality { check: Some(c) } => Some(match c {
                InequalityCheck::Hardy => "ineq-hardy".into(),
                InequalityCheck::Trace => "ineq-trace".into(),
                InequalityCheck::Ladder => "ineq-ladder".into(),
            }),
            Command::BestConstant { kind: Some(k) } => Some(match k {
                BestConstantKind::TraceCritical => "bestconst-trace-critical".into(),
                BestConstantKind::Trace => "bestconst-trace".into(),
                BestConstantKind::Volume => "bestconst-volume".into(),
            }),
            Command::MountainPass { preset: Some(p) } => Some(p.clone()),
            Command::PohozaevCheck { probe: Some(p) } => Some(match p {
                PohozaevProbe::Bubble => "pohozaev-bubble".into(),
                PohozaevProbe::Nonexistence => "nonexistence-critical".into(),
            }),
            _ => None,
        }
    }

    fn default_scenario(&self) -> &'static str {
        match self {
            Command::VerifyInequality { .. } => "ineq-hardy",
            Command::RearrangeCheck => "rearrange",
            Command::BestConstant { .. } => "bestconst-trace-critical",
            Command::MountainPass { .. } | Command::Sweep { .. } => "thm16",
            Command::PohozaevCheck { .. } => "pohozaev-bubble",
            Command::InstantonResidual => "instanton-residual",
            Command::RobinCheck => "robin-check",
        }
    }
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let (mut cfg, mut scenario_given) = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read { path: path.clone(), source: e })?;
            let table: toml::Table =
                toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.clone(), source: Box::new(e) })?;
            (ExperimentConfig::from_toml(&text, path)?, table.contains_key("scenario"))
        }
        None => (ExperimentConfig::default(), false),
    };
    let env: Vec<(String, String)> = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    scenario_given |= env.iter().any(|(k, _)| k == "HVLAB_SCENARIO");
    cfg.apply_env(env)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(w) = cli.workers {
        cfg.sweep.workers = w;
    }
    if let Some(s) = cli.command.explicit_scenario() {
        cfg.scenario = s;
    } else if !scenario_given {
        cfg.scenario = cli.command.default_scenario().to_string();
    }
    let scenario: Scenario = cfg.scenario()?;
    if !matches!(cli.command, Command::Sweep { .. }) && scenario.command() != cli.command.name() {
        return Err(ConfigError::ScenarioMismatch { scenario: cfg.scenario.clone(), command: cli.command.name().into() });
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match &cli.command {
        Command::Sweep { axes } => {
            let mut all = cfg.sweep.axes.clone();
            for spec in axes {
                match parse_axis(spec) {
                    Ok((name, values)) => {
                        all.insert(name, values);
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(2);
                    }
                }
            }
            let outcomes = match sweep(&cfg, &all, cfg.sweep.workers) {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            for o in &outcomes {
                let h = o.headline();
                let cell: Vec<String> = o.assignments.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!(
                    "cell {:3} [{}] {} value={} residual={}",
                    o.index,
                    cell.join(" "),
                    o.status(),
                    h.value.map_or("-".into(), |v| format!("{v:.6e}")),
                    h.residual.map_or("-".into(), |v| format!("{v:.3e}")),
                );
            }
            match write_summary(&cfg.output_dir, &outcomes) {
                Ok(paths) => {
                    for p in paths {
                        println!("wrote {}", p.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        _ => match run(&cfg) {
            Ok(report) => {
                let headline = report.payload.headline();
                println!("{} finished in {:.2} s", report.scenario, report.wall_time_s);
                println!("{}", serde_json::to_string(&headline).unwrap_or_default());
                for p in &report.artifacts {
                    println!("wrote {}", p.display());
                }
                ExitCode::SUCCESS
            }
            Err(e @ HarnessError::Config(_)) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
