use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use opacue_core::abstraction::{build_abstraction, AbstractionOptions, QuantizationParams};
use opacue_core::barrier::{check_lack_barrier, check_opacity_barrier, BarrierOptions, CheckStatus};
use opacue_core::compositional::{compose_barriers, compose_simulation, parse_interconnection, Interface};
use opacue_core::control::parse_control_system;
use opacue_core::dot::{estimator_to_dot, observer_to_dot};
use opacue_core::estimator::{build_initial_estimator, verify_initial_state_by_estimator};
use opacue_core::oracle::brute_force_opacity;
use opacue_core::polynomial::parse_certificate;
use opacue_core::simulation::{condition_tag, max_initsop_relation, opacity_via_abstraction};
use opacue_core::system::{parse_system, serialize_system};
use opacue_core::{build_observer, verify, Error, MetricSystem, ObserverConfig, OpacityNotion, Verdict, Verification};

const EXIT_PASS: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_USAGE: u8 = 3;
const EXIT_RESOURCE: u8 = 4;

/// Search depth handed to the brute-force oracle; the memoized search closes
/// long before this on any system that fits under the state cap.
const ORACLE_DEPTH: usize = 1 << 20;

/// Approximate opacity verification for finite and control systems.
#[derive(Parser)]
#[command(name = "opacue", version)]
struct Cli {
    /// Maximum number of materialized states.
    #[arg(long, global = true, env = "OPACUE_CAP")]
    cap: Option<usize>,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Include wall-clock timings in reports. Timed reports are not
    /// byte-reproducible.
    #[arg(long, global = true)]
    timing: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide δ-approximate opacity of a finite system.
    Verify(VerifyArgs),
    /// Build the forward observer and decide initial- or current-state opacity.
    Observer(ObserverArgs),
    /// Build the backward initial-state estimator and decide initial-state opacity.
    Estimator(EstimatorArgs),
    /// Compute the maximal ε-InitSOP relation between two finite systems.
    Simrel(SimrelArgs),
    /// Build a finite abstraction of a control system.
    Abstract(AbstractArgs),
    /// Check a barrier certificate on samples of the augmented state space.
    Barrier(BarrierArgs),
    /// Check local certificates of two interconnected subsystems.
    Compose(ComposeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NotionArg {
    InitialState,
    CurrentState,
    KStep,
    InfiniteStep,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long, value_enum, default_value = "initial-state")]
    notion: NotionArg,
    /// Horizon for k-step opacity.
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    delta: f64,
    /// Also run the brute-force oracle and compare verdicts.
    #[arg(long)]
    oracle: bool,
    /// Abstraction to verify through instead of the system itself.
    #[arg(long = "abstract", requires = "epsilon")]
    abstract_sys: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct ObserverArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long, value_enum, default_value = "initial-state")]
    notion: NotionArg,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    export_dot: Option<PathBuf>,
}

#[derive(Args)]
struct EstimatorArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    export_dot: Option<PathBuf>,
}

#[derive(Args)]
struct SimrelArgs {
    /// Concrete system.
    #[arg(long)]
    system: PathBuf,
    #[arg(long = "abstract")]
    abstract_sys: PathBuf,
    #[arg(long)]
    epsilon: f64,
}

#[derive(Args)]
struct AbstractArgs {
    /// Control-system file.
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    epsilon: f64,
    /// Build even if the quantization inequality fails.
    #[arg(long)]
    unsound: bool,
    /// Write the abstraction here instead of embedding it in the report.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Opacity,
    Lack,
}

#[derive(Args)]
struct BarrierArgs {
    /// Control-system file.
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    certificate: PathBuf,
    #[arg(long, value_enum, default_value = "opacity")]
    kind: KindArg,
    #[arg(long)]
    delta: f64,
    /// Sampling step of the state lattice.
    #[arg(long)]
    resolution: f64,
    /// Sampling step of the input lattice (default: the resolution).
    #[arg(long)]
    input_step: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Barrier,
    Simulation,
}

#[derive(Args)]
struct ComposeArgs {
    #[arg(long)]
    interconnection: PathBuf,
    #[arg(long, value_enum, default_value = "barrier")]
    mode: ModeArg,
    /// Local certificate of the first subsystem.
    #[arg(long)]
    certificate1: PathBuf,
    /// Local certificate of the second subsystem.
    #[arg(long)]
    certificate2: PathBuf,
    /// Opacity level; required in barrier mode.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    resolution: f64,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Resource { .. } => EXIT_RESOURCE,
            _ => EXIT_USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

type Outcome = Result<(Value, u8), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_PASS);
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let detail: Vec<&str> = rendered
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:"))
                .filter(|l| !l.is_empty())
                .collect();
            let line = detail.join(" ");
            eprintln!("opacue: {}", line.strip_prefix("error: ").unwrap_or(&line));
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(&cli) {
        Ok((report, code)) => {
            let mut out = std::io::stdout().lock();
            let text = serde_json::to_string_pretty(&report).expect("reports always serialize");
            if writeln!(out, "{text}").is_err() {
                return ExitCode::from(EXIT_USAGE);
            }
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("opacue: {}", f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    let mut config = ObserverConfig::default();
    if let Some(cap) = cli.cap {
        config.cap = cap;
    }
    let ctx = Context { config, timing: cli.timing };
    match &cli.command {
        Command::Verify(a) => ctx.verify(a),
        Command::Observer(a) => ctx.observer(a),
        Command::Estimator(a) => ctx.estimator(a),
        Command::Simrel(a) => ctx.simrel(a),
        Command::Abstract(a) => ctx.abstraction(a),
        Command::Barrier(a) => ctx.barrier(a),
        Command::Compose(a) => ctx.compose(a),
    }
}

struct Context {
    config: ObserverConfig,
    timing: bool,
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn load_system(path: &Path) -> Result<MetricSystem, Failure> {
    parse_system(&read(path)?).map_err(|e| Failure::from(e).context(path))
}

impl Failure {
    fn context(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

fn notion(arg: NotionArg, k: Option<u32>) -> Result<OpacityNotion, Failure> {
    match (arg, k) {
        (NotionArg::KStep, Some(k)) => Ok(OpacityNotion::KStep(k)),
        (NotionArg::KStep, None) => Err(usage("--notion k-step requires --k")),
        (_, Some(_)) => Err(usage("--k applies to --notion k-step only")),
        (NotionArg::InitialState, None) => Ok(OpacityNotion::InitialState),
        (NotionArg::CurrentState, None) => Ok(OpacityNotion::CurrentState),
        (NotionArg::InfiniteStep, None) => Ok(OpacityNotion::InfiniteStep),
    }
}

fn verdict_code(v: &Verdict) -> u8 {
    match v.opaque() {
        Some(true) => EXIT_PASS,
        Some(false) => EXIT_FAIL,
        None => EXIT_INCONCLUSIVE,
    }
}

fn check_code(status: CheckStatus) -> u8 {
    match status {
        CheckStatus::Falsified => EXIT_FAIL,
        CheckStatus::SamplePassed => EXIT_INCONCLUSIVE,
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports always serialize")
}

impl Context {
    fn verdict(&self, v: &Verification, sys: &MetricSystem) -> Value {
        let mut report = to_value(&v.report(sys));
        if !self.timing {
            if let Some(stats) = report.get_mut("stats").and_then(Value::as_object_mut) {
                stats.remove("wall_ms");
            }
        }
        report
    }

    fn verify(&self, a: &VerifyArgs) -> Outcome {
        let sys = load_system(&a.system)?;
        let notion = notion(a.notion, a.k)?;
        if let Some(path) = &a.abstract_sys {
            if notion != OpacityNotion::InitialState {
                return Err(usage("verification through an abstraction supports --notion initial-state only"));
            }
            if a.oracle {
                return Err(usage("--oracle cannot be combined with --abstract"));
            }
            let abs = load_system(path)?;
            let epsilon = a.epsilon.expect("clap enforces --epsilon with --abstract");
            let lifted = opacity_via_abstraction(&sys, &abs, epsilon, a.delta, &self.config)?;
            let mut report = self.verdict(&lifted.verification, &sys);
            report["epsilon"] = json!(epsilon);
            report["abstract_delta"] = json!(lifted.abstract_delta);
            report["relation"] = json!({
                "related": lifted.relation.related,
                "pairs": lifted.relation.relation.as_ref().map_or(0, |r| r.pairs.len()),
                "failed_condition": lifted.relation.failure.map(|f| condition_tag(f.condition)),
            });
            if let Some(v) = &lifted.abstract_verdict {
                report["abstract_verdict"] = self.verdict(v, &abs);
            }
            return Ok((report, verdict_code(&lifted.verification.verdict)));
        }
        let result = verify(&sys, a.delta, notion, &self.config)?;
        let mut report = self.verdict(&result, &sys);
        if a.oracle {
            let oracle = brute_force_opacity(&sys, a.delta, notion, ORACLE_DEPTH, &self.config)?;
            let agrees = !oracle.exhaustive || oracle.verdict.opaque() == result.verdict.opaque();
            report["oracle"] = json!({
                "opaque": oracle.verdict.opaque(),
                "exhaustive": oracle.exhaustive,
                "classes": oracle.classes,
                "explored_depth": oracle.explored_depth,
                "agrees": agrees,
            });
            if !agrees {
                return Err(Failure {
                    code: EXIT_USAGE,
                    message: format!(
                        "internal error: verdict {:?} disagrees with the brute-force oracle {:?}",
                        result.verdict.opaque(),
                        oracle.verdict.opaque()
                    ),
                });
            }
        }
        Ok((report, verdict_code(&result.verdict)))
    }

    fn observer(&self, a: &ObserverArgs) -> Outcome {
        let sys = load_system(&a.system)?;
        let notion = match a.notion {
            NotionArg::InitialState => OpacityNotion::InitialState,
            NotionArg::CurrentState => OpacityNotion::CurrentState,
            _ => return Err(usage("the observer decides initial-state and current-state opacity only")),
        };
        let result = verify(&sys, a.delta, notion, &self.config)?;
        if let Some(path) = &a.export_dot {
            let obs = build_observer(&sys, a.delta, &self.config)?;
            write(path, &observer_to_dot(&sys, &obs, notion))?;
        }
        Ok((self.verdict(&result, &sys), verdict_code(&result.verdict)))
    }

    fn estimator(&self, a: &EstimatorArgs) -> Outcome {
        let sys = load_system(&a.system)?;
        let result = verify_initial_state_by_estimator(&sys, a.delta, &self.config)?;
        if let Some(path) = &a.export_dot {
            let est = build_initial_estimator(&sys, a.delta, &self.config)?;
            write(path, &estimator_to_dot(&sys, &est))?;
        }
        Ok((self.verdict(&result, &sys), verdict_code(&result.verdict)))
    }

    fn simrel(&self, a: &SimrelArgs) -> Outcome {
        let concrete = load_system(&a.system)?;
        let abs = load_system(&a.abstract_sys)?;
        let report = max_initsop_relation(&concrete, &abs, a.epsilon)?;
        let code = if report.related { EXIT_PASS } else { EXIT_FAIL };
        Ok((to_value(&report.document(&concrete, &abs, a.epsilon)), code))
    }

    fn abstraction(&self, a: &AbstractArgs) -> Outcome {
        let sys = parse_control_system(&read(&a.system)?).map_err(|e| Failure::from(e).context(&a.system))?;
        let params = QuantizationParams { eta: a.eta, mu: a.mu, epsilon: a.epsilon };
        let options = AbstractionOptions { unsound: a.unsound, cap: self.config.cap };
        let abs = build_abstraction(&sys, &params, &options)?;
        if !abs.certified {
            eprintln!("opacue: warning: quantization check fails (slack {}); abstraction is certificate-free", abs.check.slack);
        }
        let mut report = json!({
            "certified": abs.certified,
            "quantization": abs.check,
            "params": params,
            "states": abs.system.num_states(),
            "inputs": abs.system.num_inputs(),
            "transitions": abs.system.transitions().len(),
        });
        let doc = serialize_system(&abs.system);
        match &a.output {
            Some(path) => {
                write(path, &doc)?;
                report["output"] = json!(path.display().to_string());
            }
            None => report["system"] = serde_json::from_str(&doc).expect("serialized systems are JSON"),
        }
        let code = if abs.certified { EXIT_PASS } else { EXIT_INCONCLUSIVE };
        Ok((report, code))
    }

    fn barrier(&self, a: &BarrierArgs) -> Outcome {
        let sys = parse_control_system(&read(&a.system)?).map_err(|e| Failure::from(e).context(&a.system))?;
        let cert = parse_certificate(&read(&a.certificate)?, sys.dim).map_err(|e| Failure::from(e).context(&a.certificate))?;
        let opts = BarrierOptions {
            input_step: a.input_step,
            cap: self.config.cap,
            ..BarrierOptions::new(a.resolution)
        };
        let report = match a.kind {
            KindArg::Opacity => check_opacity_barrier(&cert, &sys, a.delta, &opts)?,
            KindArg::Lack => check_lack_barrier(&cert, &sys, a.delta, &opts)?,
        };
        Ok((to_value(&report), check_code(report.status)))
    }

    fn compose(&self, a: &ComposeArgs) -> Outcome {
        let doc = parse_interconnection(&read(&a.interconnection)?).map_err(|e| Failure::from(e).context(&a.interconnection))?;
        let s1 = doc.sub1.build()?;
        let s2 = doc.sub2.build()?;
        let c1 = parse_certificate(&read(&a.certificate1)?, 1).map_err(|e| Failure::from(e).context(&a.certificate1))?;
        let c2 = parse_certificate(&read(&a.certificate2)?, 1).map_err(|e| Failure::from(e).context(&a.certificate2))?;
        let (_, report) = match a.mode {
            ModeArg::Barrier => {
                let delta = a.delta.ok_or_else(|| usage("--mode barrier requires --delta"))?;
                compose_barriers(c1, c2, &s1, &s2, delta, a.resolution)?
            }
            ModeArg::Simulation => {
                let iface = |i: Option<Interface>, n: usize| {
                    i.ok_or_else(|| usage(format!("sub{n} has no interface bounds; simulation mode needs them")))
                };
                let ifaces = [iface(doc.sub1.interface, 1)?, iface(doc.sub2.interface, 2)?];
                compose_simulation(c1, c2, &s1, &s2, ifaces, a.resolution)?
            }
        };
        Ok((to_value(&report), check_code(report.status)))
    }
}
