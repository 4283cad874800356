//! Command-line front end: generate scenarios, run episodes, build reports,
//! replay traces, and inspect scenes.
//!
//! Exit codes: 0 success, 1 any failure (diagnostic on stderr), 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use kitchenplan::backend::BackendSpec;
use kitchenplan::harness::{aggregate, judge, load_run, replay_trace, run_batch};
use kitchenplan::planner::{EpisodeTrace, PipelineConfig};
use kitchenplan::scenarios::{
    generate_all, generate_with, load_scenarios, write_scenarios, GeneratorOptions, Scenario, TaskCategory,
};
use kitchenplan::world::{describe_scene, render_topdown, RenderConfig};

#[derive(Parser)]
#[command(name = "kitchenplan", version, about = "Closed-loop skill planning over a symbolic kitchen")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario set.
    Gen {
        /// A category name, or `all`.
        #[arg(long, default_value = "all")]
        category: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        /// Combine far and blocking bowls in reachability and collision scenarios.
        #[arg(long)]
        mixed: bool,
    },
    /// Run one pipeline configuration over a scenario directory.
    Run {
        #[arg(long)]
        scenarios: PathBuf,
        /// oracle | scripted:<path> | faulty:<inner>:<rules> | remote:<url>:<model>
        #[arg(long, default_value = "oracle")]
        backend: String,
        /// Preset (naive_llm, naive_mllm, cot, cot_sc, full) or flags obs,cot,sc,sa.
        #[arg(long, default_value = "full")]
        config: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_iterations: Option<u32>,
        /// Environment variable holding the remote credential.
        #[arg(long)]
        api_key_env: Option<String>,
        /// Only run scenarios whose id starts with this prefix.
        #[arg(long)]
        only: Option<String>,
    },
    /// Judge one or more run directories and write report.csv and report.txt.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Scenario directory, when a run manifest does not record one.
        #[arg(long)]
        scenarios: Option<PathBuf>,
        /// Output directory for the report files (default: the first run directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute a trace against the simulator and verify every state.
    Replay { trace: PathBuf },
    /// Print a scenario's instruction, scene description and reference plan.
    Inspect {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        id: String,
        /// Write a top-down P6 render to this file.
        #[arg(long)]
        render: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Gen {
            category,
            seed,
            count,
            out,
            mixed,
        } => gen(&category, seed, count, &out, GeneratorOptions { mixed }),
        Command::Run {
            scenarios,
            backend,
            config,
            out,
            max_iterations,
            api_key_env,
            only,
        } => {
            let mut spec: BackendSpec = backend.parse().map_err(anyhow::Error::msg)?;
            if let (BackendSpec::Remote(cfg), Some(var)) = (&mut spec, api_key_env) {
                cfg.api_key_env = var;
            }
            let mut config: PipelineConfig = config.parse().map_err(anyhow::Error::msg)?;
            if let Some(n) = max_iterations {
                config.max_iterations = n;
            }
            run(&scenarios, &spec, &config, &out, only.as_deref())
        }
        Command::Report { runs, scenarios, out } => report(&runs, scenarios.as_deref(), out.as_deref()),
        Command::Replay { trace } => replay(&trace),
        Command::Inspect { scenarios, id, render } => inspect(&scenarios, &id, render.as_deref()),
    }
}

fn gen(category: &str, seed: u64, count: usize, out: &Path, options: GeneratorOptions) -> Result<()> {
    let started = Instant::now();
    let scenarios = if category == "all" {
        generate_all(seed, count, options)?
    } else {
        let category: TaskCategory = category.parse().map_err(anyhow::Error::msg)?;
        generate_with(category, seed, count, options)?
    };
    write_scenarios(out, seed, &scenarios)?;
    println!(
        "wrote {} scenarios to {} in {:.2}s",
        scenarios.len(),
        out.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn run(dir: &Path, spec: &BackendSpec, config: &PipelineConfig, out: &Path, only: Option<&str>) -> Result<()> {
    let mut scenarios = load_scenarios(dir).with_context(|| format!("loading scenarios from {}", dir.display()))?;
    if let Some(prefix) = only {
        scenarios.retain(|s| s.id.starts_with(prefix));
    }
    if scenarios.is_empty() {
        bail!("no scenarios selected");
    }
    let (manifest, judgments) = run_batch(&scenarios, spec, config, out, Some(dir))?;
    let successes = judgments.iter().filter(|j| j.success).count();
    println!(
        "{} [{}]: {successes}/{} episodes succeeded; traces in {}",
        config.label(),
        manifest.backend,
        judgments.len(),
        out.display()
    );
    let errors = manifest.errors();
    if errors > 0 {
        for e in manifest.entries.iter().filter_map(|e| e.error.as_ref().map(|m| (&e.scenario_id, m))) {
            eprintln!("{}: {}", e.0, e.1);
        }
        bail!("{errors} episodes could not be run");
    }
    Ok(())
}

fn report(runs: &[PathBuf], scenario_override: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let mut judgments = Vec::new();
    for dir in runs {
        let (manifest, traces) = load_run(dir).with_context(|| format!("reading run {}", dir.display()))?;
        let scenario_dir = scenario_override
            .map(Path::to_path_buf)
            .or(manifest.scenario_dir.clone())
            .with_context(|| format!("{} records no scenario directory; pass --scenarios", dir.display()))?;
        let scenarios = load_scenarios(&scenario_dir)?;
        for trace in &traces {
            let scenario: &Scenario = scenarios
                .iter()
                .find(|s| s.id == trace.scenario_id)
                .with_context(|| format!("scenario {} not found in {}", trace.scenario_id, scenario_dir.display()))?;
            judgments.push(judge(trace, scenario)?);
        }
    }
    let report = aggregate(&judgments);
    let out = out.unwrap_or(&runs[0]);
    fs::create_dir_all(out)?;
    fs::write(out.join("report.csv"), report.to_csv())?;
    let table = report.to_table();
    fs::write(out.join("report.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn replay(path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let trace = EpisodeTrace::from_json(&text)?;
    let summary = replay_trace(&trace).with_context(|| format!("replaying {}", path.display()))?;
    println!(
        "{}: {} executed skills reproduced, termination {:?}",
        trace.scenario_id, summary.executed, trace.termination
    );
    Ok(())
}

fn inspect(dir: &Path, id: &str, render: Option<&Path>) -> Result<()> {
    let scenarios = load_scenarios(dir)?;
    let s = scenarios
        .iter()
        .find(|s| s.id == id)
        .with_context(|| format!("no scenario {id} in {}", dir.display()))?;
    println!("{} ({})", s.id, s.category);
    println!("instruction: {}", s.instruction);
    println!("scene:");
    for line in describe_scene(&s.initial_state).lines {
        println!("  {line}");
    }
    println!("reference plan:");
    for (i, skill) in s.reference_plan.iter().enumerate() {
        println!("  {:>2}. {}", i + 1, skill.snake_name());
    }
    if let Some(path) = render {
        fs::write(path, render_topdown(&s.initial_state, RenderConfig::default()))?;
        println!("render written to {}", path.display());
    }
    Ok(())
}
