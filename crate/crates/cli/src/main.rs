//! `popdyn`: run, inspect and certify closed-loop population game scenarios.

mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use popdyn_core::config::{self, AcceptanceConfig, RuleConfig, ScenarioConfig};
use popdyn_core::equilibrium::nash_for_mechanism;
use popdyn_core::mechanism::{GameKind, MemorylessGame};
use popdyn_core::passivity::{self, theorem1_gate, GateReport, GateSampling, Verdict};
use popdyn_core::simplex;
use popdyn_core::{batch, simulate, Error, Pdm, RunRecord};

#[derive(Parser)]
#[command(name = "popdyn", version, about = "Population game dynamics with payoff filters and passivity certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario and write CSV, JSON and SVG outputs.
    Simulate(SimulateArgs),
    /// Integrate several scenarios in parallel (default: the toll matrix).
    Batch(BatchArgs),
    /// Print the equilibria of the stationary game.
    Nash(ConfigArg),
    /// Report the static convergence gates and optional trajectory monitors.
    Check(CheckArgs),
    /// Print the TOML of a built-in scenario.
    EmitConfig {
        /// Built-in scenario name.
        name: String,
    },
}

#[derive(Args)]
struct ConfigArg {
    /// Scenario file, or the name of a built-in scenario.
    #[arg(long)]
    config: String,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    #[arg(long)]
    alpha: Option<f64>,
    /// Named rule: smith, bnn or hybrid1.
    #[arg(long)]
    rule: Option<String>,
    /// Initial state as comma-separated shares.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    x0: Option<Vec<f64>>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    emit_config: bool,
    /// Check the scenario's acceptance thresholds (exit 4 on failure).
    #[arg(long)]
    assert: bool,
}

#[derive(Args)]
struct BatchArgs {
    /// Scenario files or built-in names; repeatable.
    #[arg(long)]
    config: Vec<String>,
    /// Run every scenario with both alpha = 0 and alpha = 1.
    #[arg(long)]
    alpha_pair: bool,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long)]
    assert: bool,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Trajectory CSV written by `simulate`, for the running-integral monitors.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Where to write the JSON report.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Exit 4 unless the gate reports eligibility.
    #[arg(long)]
    assert: bool,
}

enum Failure {
    Config(String),
    Numeric(String),
    Assert(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Assert(_) => 4,
            Failure::Io(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numeric(m) | Failure::Assert(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Dimension { .. } | Error::Degenerate(_) => Failure::Config(e.to_string()),
            other => Failure::Numeric(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn load(spec: &str) -> CliResult<ScenarioConfig> {
    let path = Path::new(spec);
    if path.exists() {
        let text = fs::read_to_string(path)?;
        return ScenarioConfig::from_toml(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())));
    }
    config::builtin(spec).ok_or_else(|| {
        Failure::Config(format!(
            "'{spec}' is neither a file nor a built-in scenario ({})",
            config::BUILTIN_NAMES.join(", ")
        ))
    })
}

fn apply(cfg: &mut ScenarioConfig, o: &Overrides) {
    if let Some(a) = o.alpha {
        cfg.dynamics.alpha = a;
    }
    if let Some(r) = &o.rule {
        cfg.dynamics.rule = Some(RuleConfig::Named(r.clone()));
    }
    if let Some(x0) = &o.x0 {
        cfg.x0 = x0.clone();
    }
    if let Some(t) = o.horizon {
        cfg.horizon = t;
    }
    if let Some(h) = o.step {
        cfg.step = h;
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
}

fn stem(cfg: &ScenarioConfig) -> String {
    if cfg.dynamics.alpha > 0.0 {
        format!("{}-alpha{}", cfg.name, cfg.dynamics.alpha)
    } else {
        cfg.name.clone()
    }
}

fn write_run(record: &RunRecord, dir: &Path, stem: &str) -> CliResult {
    record.write_to(dir, stem)?;
    fs::write(dir.join(format!("{stem}.svg")), svg::run_chart(record))?;
    Ok(())
}

fn print_summary(record: &RunRecord, secs: f64) {
    let s = &record.summary;
    let fmt = |v: &[f64]| v.iter().map(|e| format!("{e:.6}")).collect::<Vec<_>>().join(", ");
    println!("{} ({} steps, {:.2}s)", s.scenario.name, s.steps, secs);
    println!("  final x   = ({})", fmt(&s.final_x));
    println!("  final p   = ({})", fmt(&s.final_p));
    println!("  rho       = {:.3e}   rho integral = {:.6}", s.final_rho, s.rho_integral);
    println!("  d_br      = {:.3e}", s.final_d_br);
    match s.final_d_ne {
        Some(d) => println!("  d_ne      = {d:.3e}"),
        None => println!("  d_ne      = unavailable"),
    }
    println!(
        "  running minima: ccw {:.4e}, inclusion delta {:.4e}, pdm delta-antipassive {:.4e}",
        s.ccw_running_min, s.edim_delta_running_min, s.pdm_antipassive_running_min
    );
}

fn late_growth(record: &RunRecord) -> f64 {
    let half = record.summary.final_time / 2.0;
    let k = record.times.iter().position(|&t| t >= half).unwrap_or(0);
    record.summary.rho_integral - record.rho_integral[k]
}

fn check_thresholds(record: &RunRecord, acc: &AcceptanceConfig) -> Vec<String> {
    let s = &record.summary;
    let mut failures = Vec::new();
    let mut test = |name: &str, value: f64, limit: Option<f64>| {
        if let Some(limit) = limit {
            if !(value < limit) {
                failures.push(format!("{}: {name} = {value:.3e} (limit {limit:e})", s.scenario.name));
            }
        }
    };
    test("final Nash distance", s.final_d_ne.unwrap_or(f64::INFINITY), acc.max_final_nash_distance);
    test("final best-response distance", s.final_d_br, acc.max_final_br_distance);
    test("final rho", s.final_rho, acc.max_final_rho);
    test("late rho integral growth", late_growth(record), acc.max_late_rho_integral_growth);
    failures
}

fn run_simulate(args: SimulateArgs) -> CliResult {
    let mut cfg = load(&args.config.config)?;
    apply(&mut cfg, &args.overrides);
    if args.emit_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let scenario = cfg.build()?;
    let stem = stem(&cfg);
    let start = Instant::now();
    match simulate(&scenario) {
        Ok(record) => {
            write_run(&record, &args.out_dir, &stem)?;
            print_summary(&record, start.elapsed().as_secs_f64());
            println!("  wrote {}/{stem}.{{csv,json,svg}}", args.out_dir.display());
            if args.assert {
                let acc = cfg.acceptance.unwrap_or_default();
                let failures = check_thresholds(&record, &acc);
                if !failures.is_empty() {
                    return Err(Failure::Assert(failures.join("\n")));
                }
                println!("  acceptance thresholds met");
            }
            Ok(())
        }
        Err(Error::Diverged { time, partial }) => {
            partial.write_to(&args.out_dir, &stem)?;
            Err(Failure::Numeric(format!(
                "simulation diverged at t = {time}; partial trajectory in {}/{stem}.csv",
                args.out_dir.display()
            )))
        }
        Err(e) => Err(e.into()),
    }
}

fn run_batch(args: BatchArgs) -> CliResult {
    let names: Vec<String> = if args.config.is_empty() {
        ["braess-toll-smith", "braess-toll-bnn", "braess-toll-hybrid1"]
            .map(String::from)
            .to_vec()
    } else {
        args.config.clone()
    };
    let alpha_pair = args.alpha_pair || args.config.is_empty();
    let mut configs = Vec::new();
    for name in &names {
        let mut cfg = load(name)?;
        apply(&mut cfg, &args.overrides);
        if alpha_pair {
            for alpha in [0.0, 1.0] {
                let mut c = cfg.clone();
                c.dynamics.alpha = alpha;
                configs.push(c);
            }
        } else {
            configs.push(cfg);
        }
    }
    let scenarios = configs.iter().map(|c| c.build()).collect::<Result<Vec<_>, _>>()?;
    let start = Instant::now();
    let results = batch(&scenarios);
    let secs = start.elapsed().as_secs_f64();
    let mut ok = Vec::new();
    let mut worst: Option<Failure> = None;
    let mut assert_failures = Vec::new();
    for (cfg, result) in configs.iter().zip(results) {
        let stem = stem(cfg);
        match result {
            Ok(record) => {
                write_run(&record, &args.out_dir, &stem)?;
                print_summary(&record, secs);
                if args.assert {
                    assert_failures.extend(check_thresholds(&record, &cfg.acceptance.unwrap_or_default()));
                }
                ok.push(record);
            }
            Err(Error::Diverged { time, partial }) => {
                partial.write_to(&args.out_dir, &stem)?;
                eprintln!("{stem}: diverged at t = {time}");
                worst = Some(Failure::Numeric(format!("{stem} diverged")));
            }
            Err(e) => {
                eprintln!("{stem}: {e}");
                worst = Some(Failure::from(e));
            }
        }
    }
    let refs: Vec<&RunRecord> = ok.iter().collect();
    if !refs.is_empty() {
        fs::write(args.out_dir.join("batch.svg"), svg::batch_chart(&refs))?;
    }
    println!("{} of {} runs completed in {secs:.2}s", ok.len(), configs.len());
    if let Some(f) = worst {
        return Err(f);
    }
    if !assert_failures.is_empty() {
        return Err(Failure::Assert(assert_failures.join("\n")));
    }
    Ok(())
}

fn is_braess(g: &MemorylessGame) -> bool {
    matches!(g.kind(), GameKind::Congestion(net) if *net == popdyn_core::mechanism::CongestionNetwork::braess())
}

fn run_nash(args: ConfigArg) -> CliResult {
    let cfg = load(&args.config)?;
    let mech = cfg.mechanism()?;
    let set = match nash_for_mechanism(&mech) {
        Ok(set) => set,
        Err(e) => {
            println!("Nash set unavailable: {e}");
            return Err(Failure::Numeric(format!("Nash set unavailable: {e}")));
        }
    };
    let average = |x: &[f64]| simplex::dot(x, &mech.stationary_game(x));
    let fmt = |v: &[f64]| v.iter().map(|e| format!("{e:.6}")).collect::<Vec<_>>().join(", ");
    println!("{}: Nash equilibria of the stationary game", cfg.name);
    for p in &set.points {
        println!("  ({})   average payoff {:.6}", fmt(p), average(p));
    }
    for f in &set.faces {
        println!(
            "  face on strategies {:?}, e.g. ({})   average payoff {:.6}",
            f.support.iter().map(|i| i + 1).collect::<Vec<_>>(),
            fmt(&f.representative),
            average(&f.representative)
        );
    }
    let braess = mech
        .parts()
        .iter()
        .any(|p| matches!(&p.pdm, Pdm::Game(g) if is_braess(g)));
    if braess {
        let reference = [0.5, 0.0, 0.5];
        println!(
            "  reference: (0.5, 0, 0.5) would yield an average payoff of {:.6}",
            average(&reference)
        );
    }
    Ok(())
}

fn verdict(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Fails => "fails",
        Verdict::Claimed => "claimed",
        Verdict::Undetermined => "undetermined",
    }
}

fn print_gate(name: &str, r: &GateReport) {
    println!("{name}: convergence gate");
    println!("  inclusion delta-passive: {}", verdict(r.edim_delta_passive));
    println!("  rule well-behaved:       {}", verdict(r.rule_well_behaved));
    for p in &r.parts {
        let filter = match &p.filter {
            Some(f) => format!(
                "filter mu={} gamma={} nu={} (gamma*nu={}, condition {})",
                f.mu,
                f.gamma,
                f.nu,
                f.gamma_nu,
                p.condition.unwrap_or(0)
            ),
            None => "direct".into(),
        };
        println!("  part {} [{}] {filter}", p.index + 1, p.pdm_kind);
        println!(
            "    ccw {}, delta-antipassive {}, delta-passive {}, requirements {}, output bound {}",
            verdict(p.ccw),
            verdict(p.delta_antipassive),
            verdict(p.delta_passive),
            verdict(p.requirements),
            p.bibo_bound
        );
        for e in &p.evidence {
            println!("    - {e}");
        }
    }
    let route = match r.route {
        Some(passivity::Route::Theorem) => "single filtered mechanism",
        Some(passivity::Route::CorollaryI) => "corollary (i): filtered mechanism plus direct PDMs",
        Some(passivity::Route::CorollaryII) => "corollary (ii): filtered parts with a shared mu",
        None => "none",
    };
    println!("  route: {route}");
    println!("  eligible: {}", verdict(r.eligible));
    println!(
        "  limit: {}",
        if r.nash_convergence {
            "Nash set"
        } else {
            "best responses of the payoff"
        }
    );
    for n in &r.notes {
        println!("  note: {n}");
    }
}

struct TrajectoryReport {
    samples: usize,
    ccw_min: f64,
    edim_min: f64,
    pdm_anti_min: f64,
}

fn read_trajectory(path: &Path, n: usize) -> CliResult<TrajectoryReport> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Failure::Config(format!("{}: missing column {name}", path.display())))
    };
    let t_col = col("t")?;
    let x_cols = (1..=n).map(|i| col(&format!("x{i}"))).collect::<CliResult<Vec<_>>>()?;
    let u_cols = (1..=n).map(|i| col(&format!("u{i}"))).collect::<CliResult<Vec<_>>>()?;
    let p_cols = (1..=n).map(|i| col(&format!("p{i}"))).collect::<CliResult<Vec<_>>>()?;
    let (mut t, mut x, mut u, mut p) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let num = |c: usize| -> CliResult<f64> {
            fields
                .get(c)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Failure::Config(format!("{}: bad value on row {}", path.display(), k + 2)))
        };
        t.push(num(t_col)?);
        x.push(x_cols.iter().map(|&c| num(c)).collect::<CliResult<Vec<_>>>()?);
        u.push(u_cols.iter().map(|&c| num(c)).collect::<CliResult<Vec<_>>>()?);
        p.push(p_cols.iter().map(|&c| num(c)).collect::<CliResult<Vec<_>>>()?);
    }
    let ccw = passivity::ccw_integral_series(&t, &u, &x)?;
    let xdot = passivity::finite_difference(&t, &x)?;
    let udot = passivity::finite_difference(&t, &u)?;
    let pdot = passivity::finite_difference(&t, &p)?;
    let edim = passivity::derivative_product_integral(&t, &xdot, &pdot, 1.0);
    let anti = passivity::derivative_product_integral(&t, &udot, &xdot, -1.0);
    Ok(TrajectoryReport {
        samples: t.len(),
        ccw_min: ccw.running_min,
        edim_min: edim.running_min,
        pdm_anti_min: anti.running_min,
    })
}

fn run_check(args: CheckArgs) -> CliResult {
    let cfg = load(&args.config.config)?;
    let mech = cfg.mechanism()?;
    let spec = cfg.edim()?;
    let report = theorem1_gate(&mech, &spec, GateSampling::default());
    print_gate(&cfg.name, &report);
    let mut json = serde_json::json!({ "scenario": cfg.name, "gate": report });
    if let Some(path) = &args.trajectory {
        let tr = read_trajectory(path, cfg.x0.len())?;
        println!("  trajectory {} ({} samples), running minima (consistent with a finite bound, not a proof):", path.display(), tr.samples);
        println!("    ccw {:.4e}, inclusion delta {:.4e}, pdm delta-antipassive {:.4e}", tr.ccw_min, tr.edim_min, tr.pdm_anti_min);
        json["trajectory"] = serde_json::json!({
            "file": path.display().to_string(),
            "samples": tr.samples,
            "ccw_running_min": tr.ccw_min,
            "edim_delta_running_min": tr.edim_min,
            "pdm_antipassive_running_min": tr.pdm_anti_min,
        });
    }
    fs::create_dir_all(&args.out_dir)?;
    let out = args.out_dir.join(format!("{}.check.json", cfg.name));
    fs::write(&out, serde_json::to_string_pretty(&json).expect("report serializes") + "\n")?;
    println!("  wrote {}", out.display());
    if args.assert && report.eligible != Verdict::Holds {
        return Err(Failure::Assert(format!("gate verdict: {}", verdict(report.eligible))));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Batch(a) => run_batch(a),
        Command::Nash(a) => run_nash(a),
        Command::Check(a) => run_check(a),
        Command::EmitConfig { name } => match config::builtin_text(&name) {
            Some(text) => {
                print!("{text}");
                Ok(())
            }
            None => Err(Failure::Config(format!(
                "unknown built-in '{name}' ({})",
                config::BUILTIN_NAMES.join(", ")
            ))),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
