//! `banditgap` command-line front end.
//!
//! Exit codes: 0 success, 1 validation or file error, 2 state-space capacity
//! exceeded, 64 usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use banditgap::analysis::{projection_gap, GapReport};
use banditgap::dp::DEFAULT_STATE_CAP;
use banditgap::generate::{self, GeneratorSpec, RandomSpec};
use banditgap::io::{load_instance, save_instance, to_json};
use banditgap::lp::Variant;
use banditgap::model::{validate, Mode};
use banditgap::reduce::reduce;
use banditgap::report::{self, PolicyConfig, PolicyKind, ProjectedPolicy};
use banditgap::sim::trace;
use banditgap::{Error, ExactInstance, Instance};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Parser)]
#[command(name = "banditgap", version, about = "LP-relaxation policies for bandits and stochastic knapsack")]
struct Cli {
    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance file against the model rules.
    Validate { instance: PathBuf },
    /// Expand multi-period transitions and layer every arm by depth.
    Reduce {
        instance: PathBuf,
        /// Write the reduced instance here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve an LP relaxation.
    Lp {
        instance: PathBuf,
        /// poly, poly-nopre or knapsack; defaults to the one matching the mode.
        #[arg(long)]
        variant: Option<Variant>,
        /// Write every nonzero variable to this JSON file.
        #[arg(long, value_name = "PATH")]
        dump_vars: Option<PathBuf>,
    },
    /// Flow-decompose the relaxation's solution.
    Decompose {
        instance: PathBuf,
        /// Write every group with its abandon mass to this JSON file.
        #[arg(long, value_name = "PATH")]
        dump: Option<PathBuf>,
    },
    /// Simulate a policy.
    Policy(PolicyArgs),
    /// Exact optimum by dynamic programming over joint states.
    Dp {
        instance: PathBuf,
        /// Solve in rational arithmetic.
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        cap: u128,
    },
    /// Ratio of the relaxation optimum to the exact optimum.
    Gap {
        instance: PathBuf,
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        cap: u128,
    },
    /// Verification checks.
    #[command(subcommand)]
    Check(CheckCommand),
    /// Write a built-in or random instance.
    #[command(subcommand)]
    Generate(GenerateCommand),
}

#[derive(Args)]
struct PolicyArgs {
    instance: PathBuf,
    /// priority27, priority12, half-exact or half-sampled.
    #[arg(long)]
    policy: PolicyKind,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    /// Root seed; defaults to $BANDITGAP_SEED or a fixed value.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Defaults to epsilon / (B n).
    #[arg(long)]
    delta: Option<f64>,
    /// Keep resolving statuses past the budget (reward still stops at B).
    #[arg(long)]
    virtual_continue: bool,
    /// Write play-by-play JSON lines to this file.
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    /// Number of trials to trace.
    #[arg(long, default_value_t = 10)]
    trace_trials: u64,
}

#[derive(Subcommand)]
enum CheckCommand {
    /// Project a joint-state policy onto the relaxation and check it.
    Projection {
        instance: PathBuf,
        /// optimal, idle or half-exact.
        #[arg(long, default_value = "optimal")]
        policy: ProjectedPolicy,
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        cap: u128,
    },
    /// Sweep the extremal tail bound over a grid of expectations.
    Grind {
        #[arg(long, default_value_t = 600)]
        resolution: usize,
    },
}

#[derive(Subcommand)]
enum GenerateCommand {
    /// Two-job family with budget N+1.
    Gap2 {
        #[arg(long)]
        n: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Three-item knapsack example with budget 10.
    KnapsackAppendix {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Random layered arms.
    Random {
        #[arg(long)]
        arms: usize,
        #[arg(long)]
        nodes_per_arm: usize,
        #[arg(long, default_value_t = 1)]
        actions: usize,
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "preemptive")]
        mode: Mode,
        #[arg(long, default_value_t = 1)]
        max_time: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(64) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Capacity { .. } => 2,
        Error::Argument(_) => 64,
        _ => 1,
    }
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce(&T) -> String) -> banditgap::Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(value)?);
    } else {
        print!("{}", text(value));
    }
    Ok(())
}

/// Twelve decimals at most, trailing zeros dropped.
fn num(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{v:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_owned() } else { s.to_owned() }
}

fn default_seed() -> u64 {
    std::env::var("BANDITGAP_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(DEFAULT_SEED)
}

fn write_or_print(text: &str, output: Option<PathBuf>) -> banditgap::Result<()> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(Error::from),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> banditgap::Result<ExitCode> {
    let json = cli.json;
    match cli.command {
        Command::Validate { instance } => {
            let inst: ExactInstance = load_instance(&instance)?;
            let violations = validate(&inst);
            emit(json, &violations, |v| {
                if v.is_empty() {
                    "valid\n".to_owned()
                } else {
                    v.iter().map(|x| format!("{x}\n")).collect()
                }
            })?;
            if !violations.is_empty() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Reduce { instance, output } => {
            let inst: ExactInstance = load_instance(&instance)?;
            let reduced = reduce(&inst)?;
            match output {
                Some(path) => save_instance(&reduced, path)?,
                None => println!("{}", to_json(&reduced)),
            }
        }
        Command::Lp { instance, variant, dump_vars } => {
            let inst: Instance = load_instance(&instance)?;
            let (rep, dump) = report::lp_report(&inst, variant)?;
            if let Some(path) = dump_vars {
                std::fs::write(path, serde_json::to_string_pretty(&dump)?)?;
            }
            emit(json, &rep, |r| {
                format!(
                    "variant    {}\nstatus     {:?}\nobjective  {}\ndual       {}\ncolumns    {}\nrows       {}\n",
                    serde_json::to_string(&r.variant).unwrap_or_default().trim_matches('"'),
                    r.status,
                    num(r.objective),
                    num(r.dual_objective),
                    r.columns,
                    r.rows
                )
            })?;
        }
        Command::Decompose { instance, dump } => {
            let inst: Instance = load_instance(&instance)?;
            let (rep, groups) = report::decompose_report(&inst)?;
            if let Some(path) = dump {
                std::fs::write(path, serde_json::to_string_pretty(&groups)?)?;
            }
            emit(json, &rep, |r| {
                format!(
                    "groups         {}\nsum residual   {:e}\nflow residual  {:e}\n",
                    r.groups, r.sum_residual, r.flow_residual
                )
            })?;
        }
        Command::Policy(args) => {
            let inst: Instance = load_instance(&args.instance)?;
            let config = PolicyConfig {
                kind: args.policy,
                trials: args.trials,
                seed: args.seed.unwrap_or_else(default_seed),
                epsilon: args.epsilon,
                delta: args.delta,
                virtual_continue: args.virtual_continue,
            };
            let (rep, policy) = report::policy_report(&inst, &config)?;
            if let Some(path) = args.trace {
                let opts = banditgap::policy::RunOptions { virtual_continue: config.virtual_continue };
                let mut text = String::new();
                for line in trace(policy.as_ref(), args.trace_trials, config.seed, opts) {
                    text.push_str(&serde_json::to_string(&line)?);
                    text.push('\n');
                }
                std::fs::write(path, text)?;
            }
            let actions = policy.instance().actions.clone();
            emit(json, &rep, |r| format!("lp       {}\n{}", num(r.lp_objective), r.simulation.render(&actions)))?;
        }
        Command::Dp { instance, exact, cap } => {
            let rep = if exact {
                report::dp_report_exact(&load_instance(&instance)?, cap)?
            } else {
                report::dp_report(&load_instance(&instance)?, cap)?
            };
            emit(json, &rep, |r| {
                let exact = r.exact.as_ref().map(|e| format!(" ({e})")).unwrap_or_default();
                format!("value   {}{exact}\nstates  {}\n", num(r.value), r.states)
            })?;
        }
        Command::Gap { instance, exact, cap } => {
            let rep: GapReport = if exact {
                projection_gap(&load_instance::<banditgap::Rational>(&instance)?, cap)?
            } else {
                projection_gap(&load_instance::<f64>(&instance)?, cap)?
            };
            emit(json, &rep, |r| {
                let name = serde_json::to_string(&r.variant).unwrap_or_default();
                format!(
                    "lp ({}) = {}\ndp = {}\ngap = {}{}\n",
                    name.trim_matches('"'),
                    num(r.lp_value),
                    num(r.dp_value),
                    num(r.ratio),
                    if r.infinite { " (dp value is zero)" } else { "" }
                )
            })?;
        }
        Command::Check(CheckCommand::Projection { instance, policy, cap }) => {
            let inst: Instance = load_instance(&instance)?;
            let rep = report::projection_report(&inst, policy, cap)?;
            let passed = rep.certificate.passed;
            emit(json, &rep, |r| {
                let c = &r.certificate;
                format!(
                    "projected objective  {}\npolicy value         {}\nmax violation        {:e}\nobjective match      {:e}\n{}\n",
                    num(c.projected_objective),
                    num(c.policy_value),
                    c.max_violation,
                    c.objective_match,
                    if c.passed { "PASS" } else { "FAIL" }
                )
            })?;
            if !passed {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Check(CheckCommand::Grind { resolution }) => {
            let rep = report::grind_report(resolution)?;
            let passed = rep.passed;
            emit(json, &rep, |r| {
                format!(
                    "max = {} at ({}, {}, {}) x t/{}\nbound 5/9 = {}\n{} grid points\n{}\n",
                    num(r.sweep.max),
                    r.sweep.argmax[0],
                    r.sweep.argmax[1],
                    r.sweep.argmax[2],
                    r.sweep.resolution,
                    num(r.bound),
                    r.sweep.evaluated,
                    if r.passed { "PASS" } else { "FAIL" }
                )
            })?;
            if !passed {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Generate(cmd) => {
            let (spec, output) = match cmd {
                GenerateCommand::Gap2 { n, output } => (GeneratorSpec::Gap2 { n }, output),
                GenerateCommand::KnapsackAppendix { output } => (GeneratorSpec::KnapsackAppendix, output),
                GenerateCommand::Random { arms, nodes_per_arm, actions, budget, seed, mode, max_time, output } => (
                    GeneratorSpec::Random(
                        RandomSpec::new(arms, nodes_per_arm, actions, budget, seed, mode).with_max_time(max_time),
                    ),
                    output,
                ),
            };
            let text = match spec {
                GeneratorSpec::Random(_) => to_json(&generate::generate::<f64>(&spec)?),
                _ => to_json(&generate::generate::<banditgap::Rational>(&spec)?),
            };
            write_or_print(&text, output)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
