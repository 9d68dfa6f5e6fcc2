//! `coldsched`: plan, simulate and inspect cold-inference schedules.
//!
//! Every command writes a single JSON (or CSV) payload to stdout or `--out`;
//! diagnostics go to stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use coldsched::oracle::{optimal_schedule, random_instance, sequential_baseline, OracleLimits};
use coldsched::sim::{self, SimOptions};
use coldsched::warm::{plan_warm_switch, second_inference_latency, third_inference_latency};
use coldsched::{
    build_operation_graph, gantt_csv, generate_plan, layer_fronts, load_profile, summarize,
    validate_feasibility, Choice, ComboStrategy, Error, LoadTrace, Mode, Plan, Platform, Profile,
    Report, SchedulerConfig, VariantOptions,
};

#[derive(Parser)]
#[command(
    name = "coldsched",
    version,
    about = "Kernel scheduling for cold DNN inference"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pick kernels and build per-core queues for a profile.
    Plan(PlanArgs),
    /// Run a plan through the simulator and summarize the timeline.
    Simulate(SimulateArgs),
    /// Makespans with kernel selection, caching and pipelining added in turn.
    Ablate(CommonArgs),
    /// Compare the heuristic with an exhaustive search on a small instance.
    Oracle(OracleArgs),
    /// Write the simulated timeline as CSV.
    ExportGantt(GanttArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        matches!(self, Switch::On)
    }
}

#[derive(Args)]
struct PlatformArgs {
    #[arg(long, default_value_t = 4)]
    little: usize,
    #[arg(long, default_value_t = 4)]
    big: usize,
    #[arg(long, default_value_t = 1.5)]
    disk_cap: f64,
    #[arg(long, default_value_t = 3.0)]
    mem_cap: f64,
    /// Background load trace (JSON keyed by core id).
    #[arg(long, value_name = "TRACE")]
    load: Option<PathBuf>,
    /// Require a GPU-mode profile.
    #[arg(long)]
    gpu: bool,
}

#[derive(Args)]
struct CommonArgs {
    profile: PathBuf,
    #[command(flatten)]
    platform: PlatformArgs,
    /// Never use cached post-transform weights.
    #[arg(long)]
    no_cache: bool,
    #[arg(long, value_enum, default_value = "on")]
    shader_cache: Switch,
    /// exhaustive, greedy or beam:K
    #[arg(long, default_value = "exhaustive", value_parser = parse_strategy)]
    combo_strategy: ComboStrategy,
    /// Accept unknown fields in the profile.
    #[arg(long)]
    lenient: bool,
    /// Write the payload here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also plan the switch to warm-optimal kernels for later inferences.
    #[arg(long)]
    continuous: bool,
    /// Include the per-layer variant fronts.
    #[arg(long)]
    explain: bool,
    /// Unused by planning, which is deterministic; accepted for uniformity.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Plan document to simulate; planned from scratch when absent.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "off")]
    steal: Switch,
    /// Also write the full report (timeline included) here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Profile to compare on; a random instance is generated when absent.
    profile: Option<PathBuf>,
    #[command(flatten)]
    platform: PlatformArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    lenient: bool,
    #[arg(long, default_value_t = 60_000)]
    budget_ms: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GanttArgs {
    /// Profile to plan and simulate; not needed with --report.
    profile: Option<PathBuf>,
    #[command(flatten)]
    platform: PlatformArgs,
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Previously written simulation report.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "off")]
    steal: Switch,
    #[arg(long)]
    no_cache: bool,
    #[arg(long, value_enum, default_value = "on")]
    shader_cache: Switch,
    #[arg(long)]
    lenient: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_strategy(s: &str) -> Result<ComboStrategy, String> {
    match s {
        "exhaustive" => Ok(ComboStrategy::Exhaustive),
        "greedy" => Ok(ComboStrategy::Greedy),
        _ => s
            .strip_prefix("beam:")
            .and_then(|k| k.parse().ok())
            .filter(|&k| k >= 1)
            .map(ComboStrategy::Beam)
            .ok_or_else(|| format!("expected exhaustive, greedy or beam:K, got '{s}'")),
    }
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::ComboSpaceExceeded { .. } => 3,
            Error::Io(_) => 4,
            _ => 2,
        };
        Failure {
            code,
            msg: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn read_input(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure {
        code: 2,
        msg: format!("cannot read {}: {e}", path.display()),
    })
}

fn emit(out: Option<&Path>, payload: &str) -> CliResult<()> {
    match out {
        Some(path) => write_file(path, payload),
        None => {
            print!("{payload}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, payload: &str) -> CliResult<()> {
    fs::write(path, payload).map_err(|e| Failure {
        code: 4,
        msg: format!("cannot write {}: {e}", path.display()),
    })
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn load(path: &Path, lenient: bool, platform: &PlatformArgs) -> CliResult<Profile> {
    let text = read_input(path)?;
    let profile: Profile = load_profile(text.as_bytes(), lenient)?;
    if platform.gpu && profile.mode != Mode::Gpu {
        return Err(Failure {
            code: 2,
            msg: "--gpu given but the profile is in cpu mode".into(),
        });
    }
    Ok(profile)
}

fn build_platform(args: &PlatformArgs) -> CliResult<Platform> {
    let mut p = Platform::new(args.little, args.big).with_capacities(args.disk_cap, args.mem_cap);
    if let Some(path) = &args.load {
        p = p.with_load(LoadTrace::from_json(&read_input(path)?)?);
    }
    p.validate()?;
    Ok(p)
}

fn variants(no_cache: bool, shader_cache: Switch) -> VariantOptions {
    VariantOptions {
        allow_weight_cache: !no_cache,
        shader_cache: shader_cache.on(),
    }
}

fn config(common: &CommonArgs) -> SchedulerConfig {
    SchedulerConfig {
        combo_strategy: common.combo_strategy,
        variants: variants(common.no_cache, common.shader_cache),
        ..Default::default()
    }
}

fn combo_json(profile: &Profile, combo: &[Choice]) -> CliResult<Value> {
    let entries = combo
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let v = profile.variant(i + 1, c)?;
            Ok(json!({ "layer": i + 1, "kernel": v.kernel_id, "cached": c.cached }))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Value::Array(entries))
}

fn plan_json(plan: &Plan<f64>) -> Value {
    serde_json::from_str(&plan.to_json()).expect("plan documents are valid json")
}

fn cmd_plan(args: &PlanArgs) -> CliResult<()> {
    let c = &args.common;
    let profile = load(&c.profile, c.lenient, &c.platform)?;
    let platform = build_platform(&c.platform)?;
    let cfg = config(c);
    let plan = generate_plan(&profile, &platform, &cfg)?;
    if !args.continuous && !args.explain {
        return emit(c.out.as_deref(), &format!("{}\n", plan.to_json()));
    }
    let mut out = json!({ "plan": plan_json(&plan) });
    if args.explain {
        let fronts: Vec<Value> = layer_fronts(&profile.layers, profile.mode, cfg.variants)
            .iter()
            .map(|front| {
                Value::Array(
                    front
                        .iter()
                        .map(|v| {
                            json!({
                                "layer": v.layer,
                                "kernel": v.kernel_id,
                                "cached": v.choice.cached,
                                "prep_little_ms": v.prep_little_ms,
                                "prep_big_ms": v.prep_big_ms,
                                "exec_ms": v.exec_ms,
                            })
                        })
                        .collect(),
                )
            })
            .collect();
        out["fronts"] = Value::Array(fronts);
    }
    if args.continuous {
        let graph = build_operation_graph(&profile, &plan.combo)?;
        let opts = SimOptions {
            stealing: false,
            shader_cache: cfg.variants.shader_cache,
        };
        let report = sim::run(&plan, &graph, &platform.without_load(), opts)?;
        let wsp = plan_warm_switch(
            &plan,
            &report,
            &profile,
            &platform.without_load(),
            cfg.variants,
        )?;
        out["warm_switch"] = wsp.to_json_value(&profile);
        out["first_inference_ms"] = json!(report.makespan_ms);
        out["second_inference_ms"] =
            json!(second_inference_latency(&wsp, &profile, &platform, &cfg)?);
        out["third_inference_ms"] = json!(third_inference_latency(&wsp, &profile)?);
    }
    emit(c.out.as_deref(), &pretty(&out))
}

/// Loads or plans, then simulates with the platform's load.
fn run_simulation(
    profile: &Profile,
    platform: &Platform,
    plan_path: Option<&Path>,
    cfg: &SchedulerConfig,
    stealing: bool,
) -> CliResult<(coldsched::Graph, Report)> {
    let plan = match plan_path {
        Some(path) => Plan::from_json(&read_input(path)?, profile)?,
        None => generate_plan(profile, platform, cfg)?,
    };
    let graph = build_operation_graph(profile, &plan.combo)?;
    let opts = SimOptions {
        stealing,
        shader_cache: cfg.variants.shader_cache,
    };
    let report = sim::run(&plan, &graph, platform, opts)?;
    Ok((graph, report))
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let c = &args.common;
    let profile = load(&c.profile, c.lenient, &c.platform)?;
    let platform = build_platform(&c.platform)?;
    let (graph, report) = run_simulation(
        &profile,
        &platform,
        args.plan.as_deref(),
        &config(c),
        args.steal.on(),
    )?;
    if let Some(path) = &args.report {
        let full = serde_json::to_value(&report).expect("reports serialize");
        write_file(path, &pretty(&full))?;
    }
    let out = json!({
        "summary": summarize(&report),
        "violations": validate_feasibility(&report, &graph, &platform),
    });
    emit(c.out.as_deref(), &pretty(&out))
}

fn cmd_ablate(c: &CommonArgs) -> CliResult<()> {
    let profile = load(&c.profile, c.lenient, &c.platform)?;
    let platform = build_platform(&c.platform)?;
    let rows = coldsched::ablation::run_ablation(&profile, &platform, &config(c))?;
    let rows = rows
        .iter()
        .map(|r| Ok(json!({ "stage": r.stage, "makespan_ms": r.makespan_ms, "combo": combo_json(&profile, &r.combo)? })))
        .collect::<CliResult<Vec<_>>>()?;
    emit(c.out.as_deref(), &pretty(&Value::Array(rows)))
}

fn cmd_oracle(args: &OracleArgs) -> CliResult<()> {
    let profile = match &args.profile {
        Some(path) => load(path, args.lenient, &args.platform)?,
        None => random_instance(
            args.seed,
            if args.platform.gpu {
                Mode::Gpu
            } else {
                Mode::Cpu
            },
        ),
    };
    let platform = build_platform(&args.platform)?;
    let cfg = SchedulerConfig::default();
    let heuristic = generate_plan(&profile, &platform, &cfg)?;
    let limits = OracleLimits {
        time_budget_ms: args.budget_ms,
        ..Default::default()
    };
    let shader_cache = cfg.variants.shader_cache;
    let opt = optimal_schedule(&profile, &heuristic.combo, &platform, &limits, shader_cache)?;
    let out = json!({
        "model": profile.model_name,
        "mode": profile.mode.as_str(),
        "layers": profile.n_layers(),
        "combo": combo_json(&profile, &heuristic.combo)?,
        "optimal_ms": opt.makespan_ms,
        "heuristic_ms": heuristic.predicted_makespan_ms,
        "sequential_ms": sequential_baseline(&profile, &heuristic.combo, shader_cache)?,
        "gap_ratio": heuristic.predicted_makespan_ms / opt.makespan_ms,
        "proven_optimal": opt.optimal,
        "explored": opt.explored,
    });
    emit(args.out.as_deref(), &pretty(&out))
}

fn cmd_export_gantt(args: &GanttArgs) -> CliResult<()> {
    let report: Report = match (&args.report, &args.profile) {
        (Some(path), _) => serde_json::from_str(&read_input(path)?).map_err(|e| Failure {
            code: 2,
            msg: format!("malformed report {}: {e}", path.display()),
        })?,
        (None, Some(profile_path)) => {
            let profile = load(profile_path, args.lenient, &args.platform)?;
            let platform = build_platform(&args.platform)?;
            let cfg = SchedulerConfig {
                variants: variants(args.no_cache, args.shader_cache),
                ..Default::default()
            };
            run_simulation(
                &profile,
                &platform,
                args.plan.as_deref(),
                &cfg,
                args.steal.on(),
            )?
            .1
        }
        (None, None) => {
            return Err(Failure {
                code: 2,
                msg: "give a profile or --report".into(),
            })
        }
    };
    emit(args.out.as_deref(), &gantt_csv(&report))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::ExportGantt(a) => cmd_export_gantt(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("coldsched: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
