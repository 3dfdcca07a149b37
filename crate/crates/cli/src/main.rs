use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{ArgAction, CommandFactory, Parser, Subcommand, ValueEnum};
use convexpath::case::{parse_case, read_dispatch, read_fixture, Dispatch};
use convexpath::matrices::NetworkMatrices;
use convexpath::powerflow::{
    bus_voltages, check_feasibility, flat_start, intermediates, solve_pf, ControlMap, FeasibilityReport, PfOptions,
};
use convexpath::sequential::{
    certify_path, optimality_gap, run, straight_path, CertificationReport, ObjectiveMode, RunConfig, Target,
    Termination,
};
use convexpath::{FeasiblePath, Network};
use serde::Serialize;

mod config;
mod slice;

const SOLVE_SCHEMA: &str = "convexpath.solve/1";
const CERTIFY_SCHEMA: &str = "convexpath.certify/1";
const PF_SCHEMA: &str = "convexpath.pf/1";

#[derive(Parser, Debug)]
#[command(name = "convexpath", version, about = "Certified feasible transition paths for AC optimal power flow")]
struct Cli {
    /// Log more (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    /// TOML settings file. Falls back to $CONVEXPATH_CONFIG.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the sequential restriction loop from a start dispatch.
    SolvePath(SolvePathArgs),
    /// Check a path (or a straight transition) by sampling power flows.
    Certify(CertifyArgs),
    /// Classify a 2-D grid of control setpoints.
    RegionSlice(slice::SliceArgs),
    /// Solve one power flow and report limit margins.
    Pf(PfArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Objective {
    Cost,
    Distance,
}

#[derive(clap::Args, Debug)]
struct SolvePathArgs {
    /// MATPOWER case file.
    case: PathBuf,
    #[arg(long, value_enum)]
    objective: Option<Objective>,
    /// Start dispatch (JSON with `pg_mw` and `vg_pu`). Defaults to the case file dispatch.
    #[arg(long, value_name = "FILE")]
    start: Option<PathBuf>,
    /// Target dispatch for distance mode.
    #[arg(long, value_name = "FILE")]
    target: Option<PathBuf>,
    /// Fixture with `start` and `reference` dispatches; fills in start, target and reference cost.
    #[arg(long, value_name = "FILE")]
    fixture: Option<PathBuf>,
    /// Reference cost for the gap columns.
    #[arg(long)]
    reference_cost: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Certification samples per segment.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    no_certify: bool,
    #[arg(long, short, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct CertifyArgs {
    case: PathBuf,
    /// Path document written by solve-path.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["from", "to"], required_unless_present_all = ["from", "to"])]
    path: Option<PathBuf>,
    /// Start dispatch of a straight transition.
    #[arg(long, value_name = "FILE", requires = "to")]
    from: Option<PathBuf>,
    /// End dispatch of a straight transition.
    #[arg(long, value_name = "FILE", requires = "from")]
    to: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    /// Allowed limit violation, per-unit.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, short, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct PfArgs {
    case: PathBuf,
    /// Dispatch (JSON with `pg_mw` and `vg_pu`). Defaults to the case file dispatch.
    #[arg(long, value_name = "FILE")]
    dispatch: Option<PathBuf>,
    /// Extra injection `BUS:P:Q` in per-unit at a load bus. Repeatable.
    #[arg(long, value_name = "BUS:P:Q")]
    inject: Vec<String>,
    /// Multiplies every load.
    #[arg(long, default_value_t = 1.0)]
    load_scale: f64,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, short, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Failure with its exit code.
#[derive(Debug)]
pub enum Failure {
    Io(String),
    Parse(String),
    PowerFlow(String),
    Solver(String),
    Certification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Parse(_) => 3,
            Failure::PowerFlow(_) => 4,
            Failure::Solver(_) => 5,
            Failure::Certification(_) => 6,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Parse(m) | Failure::PowerFlow(m) | Failure::Solver(m) | Failure::Certification(m) => m,
        }
    }
}

/// Reports a usage error the way clap does (exit code 2).
pub fn usage_error(msg: impl std::fmt::Display) -> ! {
    Cli::command().error(clap::error::ErrorKind::ValueValidation, msg).exit()
}

pub fn load_case(path: &Path) -> Result<Network, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    parse_case(&text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

pub fn load_dispatch(net: &Network, path: &Path) -> Result<Dispatch, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    let d = read_dispatch(&text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    check_dispatch(net, &d).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    Ok(d)
}

fn check_dispatch(net: &Network, d: &Dispatch) -> Result<(), String> {
    if d.pg_mw.len() != net.n_gen() || d.vg_pu.len() != net.n_gen() {
        return Err(format!("dispatch has {}/{} entries, case has {} generators", d.pg_mw.len(), d.vg_pu.len(), net.n_gen()));
    }
    Ok(())
}

pub fn dispatch_u(net: &Network, ctl: &ControlMap, d: Option<&Dispatch>) -> Vec<f64> {
    match d {
        Some(d) => {
            let pg: Vec<f64> = d.pg_mw.iter().map(|p| p / net.base_mva).collect();
            ctl.u_from_dispatch(net, &pg, &d.vg_pu)
        }
        None => ctl.u_from_file(net),
    }
}

pub fn write_doc<S: Serialize>(path: &Path, doc: &S) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(doc).map_err(|e| Failure::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn run_config(file: &config::FileConfig) -> RunConfig {
    file.run.clone()
}

#[derive(Serialize)]
struct Summary {
    initial: f64,
    first_iteration: Option<f64>,
    #[serde(rename = "final")]
    final_cost: f64,
    iterations: usize,
    reference_cost: Option<f64>,
    first_iteration_gap: Option<f64>,
    final_gap: Option<f64>,
}

#[derive(Serialize)]
struct SolveStats {
    solve_times: Vec<f64>,
    solver_time: f64,
    wall_time: f64,
}

#[derive(Serialize)]
struct SolveDoc<'a> {
    schema: &'static str,
    case: &'a str,
    config: &'a RunConfig,
    summary: &'a Summary,
    path: &'a FeasiblePath,
    #[serde(skip_serializing_if = "Option::is_none")]
    certification: Option<&'a CertificationReport>,
    stats: SolveStats,
}

fn summarize(path: &FeasiblePath, reference: Option<f64>) -> Summary {
    let first = path.costs.get(1).copied();
    let gap = |c: f64| reference.and_then(|r| optimality_gap(c, r).ok());
    Summary {
        initial: path.costs[0],
        first_iteration: first,
        final_cost: path.final_cost(),
        iterations: path.iterations.len(),
        reference_cost: reference,
        first_iteration_gap: first.and_then(gap),
        final_gap: gap(path.final_cost()),
    }
}

fn print_summary(case: &str, s: &Summary, solver_time: f64) {
    let pct = |g: Option<f64>| g.map_or("-".to_string(), |g| format!("{:.2}", 100.0 * g));
    let first = s.first_iteration.map_or("-".to_string(), |c| format!("{c:.2}"));
    println!(
        "{:<28} {:>12} {:>12} {:>8} {:>12} {:>5} {:>8} {:>9}",
        "case", "initial", "1st iter", "gap %", "final", "iter", "gap %", "solver s"
    );
    println!(
        "{:<28} {:>12.2} {:>12} {:>8} {:>12.2} {:>5} {:>8} {:>9.3}",
        case,
        s.initial,
        first,
        pct(s.first_iteration_gap),
        s.final_cost,
        s.iterations,
        pct(s.final_gap),
        solver_time
    );
}

fn termination_failure(path: &FeasiblePath) -> Option<Failure> {
    let msg = format!("{:?}: {}", path.termination, path.message.clone().unwrap_or_default());
    match path.termination {
        Termination::Converged | Termination::MaxIterations => None,
        Termination::PowerFlowDiverged => Some(Failure::PowerFlow(msg)),
        _ => Some(Failure::Solver(msg)),
    }
}

fn solve_path(args: SolvePathArgs, file: &config::FileConfig) -> Result<(), Failure> {
    let t0 = Instant::now();
    let net = load_case(&args.case)?;
    let ctl = ControlMap::new(&net);
    let fixture = match &args.fixture {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Parse(format!("{}: {e}", p.display())))?;
            let f = read_fixture(&text).map_err(|e| Failure::Parse(format!("{}: {e}", p.display())))?;
            check_dispatch(&net, &f.start).map_err(Failure::Parse)?;
            check_dispatch(&net, &f.reference).map_err(Failure::Parse)?;
            Some(f)
        }
        None => None,
    };
    let mut cfg = run_config(file);
    if let Some(o) = args.objective {
        cfg.mode = if o == Objective::Cost { ObjectiveMode::Cost } else { ObjectiveMode::Distance };
    }
    if let Some(l) = args.lambda {
        cfg.lambda = l;
    }
    if let Some(e) = args.epsilon {
        cfg.epsilon = e;
    }
    if let Some(m) = args.max_iter {
        cfg.max_iterations = m;
    }
    if let Some(s) = args.samples {
        cfg.cert_samples = s;
    }
    if let Err(e) = cfg.check() {
        usage_error(e);
    }

    let start = match &args.start {
        Some(p) => Some(load_dispatch(&net, p)?),
        None => fixture.as_ref().map(|f| f.start.clone()),
    };
    let target = match &args.target {
        Some(p) => Some(load_dispatch(&net, p)?),
        None => fixture.as_ref().filter(|_| cfg.mode == ObjectiveMode::Distance).map(|f| f.reference.clone()),
    };
    if cfg.mode == ObjectiveMode::Distance && target.is_none() {
        usage_error("distance mode needs --target (or --fixture)");
    }
    let reference = args.reference_cost.or_else(|| fixture.as_ref().and_then(|f| f.reference.cost));

    let u0 = dispatch_u(&net, &ctl, start.as_ref());
    let target = target.map(|d| Target::from_u(&ctl, &dispatch_u(&net, &ctl, Some(&d))));
    let path = run(&net, &ctl, &u0, &cfg, target.as_ref()).map_err(|e| match e {
        convexpath::sequential::SequentialError::StartNotSolvable(_)
        | convexpath::sequential::SequentialError::StartInfeasible { .. } => Failure::PowerFlow(e.to_string()),
        _ => Failure::Solver(e.to_string()),
    })?;

    let cert = if args.no_certify {
        None
    } else {
        Some(certify_path(&net, &path, cfg.cert_samples, cfg.feas_tol).map_err(|e| Failure::Certification(e.to_string()))?)
    };
    let summary = summarize(&path, reference);
    let solve_times: Vec<f64> = path.iterations.iter().map(|r| r.solve_time).collect();
    let solver_time = solve_times.iter().sum();
    print_summary(&net.name, &summary, solver_time);
    if let Some(c) = &cert {
        println!("certification: {} samples, {}", c.samples, if c.certified { "passed" } else { "FAILED" });
    }
    if let Some(out) = &args.out {
        let doc = SolveDoc {
            schema: SOLVE_SCHEMA,
            case: &net.name,
            config: &cfg,
            summary: &summary,
            path: &path,
            certification: cert.as_ref(),
            stats: SolveStats { solve_times, solver_time, wall_time: t0.elapsed().as_secs_f64() },
        };
        write_doc(out, &doc)?;
    }
    if let Some(f) = termination_failure(&path) {
        return Err(f);
    }
    if let Some(c) = cert.filter(|c| !c.certified) {
        let f = c.first_failure().expect("failed report has a failure");
        return Err(Failure::Certification(format!(
            "segment {} alpha {:.3}: {:?} at {} (margin {:e})",
            f.segment, f.alpha, f.class, f.at, f.margin
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct CertifyDoc<'a> {
    schema: &'static str,
    case: &'a str,
    samples_per_segment: usize,
    tol: f64,
    report: &'a CertificationReport,
}

fn certify(args: CertifyArgs, file: &config::FileConfig) -> Result<(), Failure> {
    let net = load_case(&args.case)?;
    let samples = args.samples.unwrap_or(file.run.cert_samples);
    let tol = args.tol.unwrap_or(file.run.feas_tol);
    if samples < 2 {
        usage_error("--samples must be at least 2");
    }
    let path = match (&args.path, &args.from, &args.to) {
        (Some(p), _, _) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Parse(format!("{}: {e}", p.display())))?;
            read_path(&text).map_err(|e| Failure::Parse(format!("{}: {e}", p.display())))?
        }
        (None, Some(a), Some(b)) => {
            let ctl = ControlMap::new(&net);
            let ua = dispatch_u(&net, &ctl, Some(&load_dispatch(&net, a)?));
            let ub = dispatch_u(&net, &ctl, Some(&load_dispatch(&net, b)?));
            straight_path(&net, &ctl, &ua, &ub).map_err(|e| Failure::PowerFlow(e.to_string()))?
        }
        _ => unreachable!("clap enforces the argument groups"),
    };
    if path.control.len() != path.setpoints[0].len() {
        return Err(Failure::Parse("path setpoints do not match its control map".into()));
    }
    let rep = certify_path(&net, &path, samples, tol).map_err(|e| Failure::Parse(e.to_string()))?;
    println!("{:>7} {:>7} {:>9} {:>12} {:>12} {:>12}", "segment", "samples", "failures", "worst q", "worst flow", "worst v");
    for s in &rep.segments {
        let w = |c: convexpath::powerflow::ConstraintClass| {
            s.worst.iter().find(|w| w.0 == c).map_or("-".to_string(), |w| format!("{:.3e}", w.1))
        };
        use convexpath::powerflow::ConstraintClass as C;
        println!(
            "{:>7} {:>7} {:>9} {:>12} {:>12} {:>12}",
            s.segment,
            s.samples,
            s.failures.len(),
            w(C::ReactivePower),
            w(C::LineFlow),
            w(C::Voltage)
        );
    }
    println!("certification: {} samples, {}", rep.samples, if rep.certified { "passed" } else { "FAILED" });
    if let Some(out) = &args.out {
        write_doc(out, &CertifyDoc { schema: CERTIFY_SCHEMA, case: &net.name, samples_per_segment: samples, tol, report: &rep })?;
    }
    match rep.first_failure() {
        None => Ok(()),
        Some(f) => Err(Failure::Certification(format!(
            "segment {} alpha {:.3}: {} at {} (margin {:e})",
            f.segment,
            f.alpha,
            f.class.map_or("power flow".to_string(), |c| format!("{c:?}")),
            f.at,
            f.margin
        ))),
    }
}

/// Accepts a bare path document or a solve-path output document.
fn read_path(text: &str) -> Result<FeasiblePath, String> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let inner = match v.get("schema").and_then(|s| s.as_str()) {
        Some(SOLVE_SCHEMA) => v.get("path").cloned().ok_or("solve document without a path")?,
        _ => v,
    };
    let p = FeasiblePath::from_json(&inner.to_string()).map_err(|e| e.to_string())?;
    if p.is_empty() {
        return Err("path has no setpoints".into());
    }
    Ok(p)
}

fn parse_injection(net: &Network, s: &str) -> Result<(usize, f64, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [b, p, q] = parts[..] else { return Err(format!("`{s}`: expected BUS:P:Q")) };
    let id: usize = b.parse().map_err(|_| format!("`{s}`: bad bus number"))?;
    let k = net.bus_index(id).ok_or(format!("`{s}`: no bus {id}"))?;
    if net.buses[k].kind != convexpath::case::BusKind::PQ {
        return Err(format!("`{s}`: bus {id} is not a load bus"));
    }
    let p: f64 = p.parse().map_err(|_| format!("`{s}`: bad P"))?;
    let q: f64 = q.parse().map_err(|_| format!("`{s}`: bad Q"))?;
    Ok((k, p, q))
}

#[derive(Serialize)]
struct BusRow {
    bus: usize,
    vm: f64,
    va_deg: f64,
}

#[derive(Serialize)]
struct PfDoc<'a> {
    schema: &'static str,
    case: &'a str,
    converged: bool,
    iterations: usize,
    buses: Vec<BusRow>,
    pg: Vec<f64>,
    q_gen_bus: Vec<f64>,
    feasibility: &'a FeasibilityReport,
}

fn pf(args: PfArgs, file: &config::FileConfig) -> Result<(), Failure> {
    let mut net = load_case(&args.case)?;
    let tol = args.tol.unwrap_or(file.run.feas_tol);
    if !(args.load_scale.is_finite()) {
        usage_error("--load-scale must be finite");
    }
    for b in &mut net.buses {
        b.p_load *= args.load_scale;
        b.q_load *= args.load_scale;
    }
    let inj: Vec<(usize, f64, f64)> =
        args.inject.iter().map(|s| parse_injection(&net, s)).collect::<Result<_, _>>().unwrap_or_else(|e| usage_error(e));
    let buses: Vec<usize> = inj.iter().map(|i| i.0).collect();
    let ctl = ControlMap::with_injections(&net, &buses);
    let d = args.dispatch.as_ref().map(|p| load_dispatch(&net, p)).transpose()?;
    let mut u = dispatch_u(&net, &ctl, d.as_ref());
    for (i, &(_, p, q)) in inj.iter().enumerate() {
        u[ctl.pinj_offset() + i] = p;
        u[ctl.qinj_offset() + i] = q;
    }
    let mats = NetworkMatrices::new(&net, &vec![0.0; net.n_line()]);
    let op = solve_pf(&net, &mats, &ctl, &u, &flat_start(&mats.layout), PfOptions::default())
        .map_err(|e| Failure::PowerFlow(format!("{}: {e}", net.name)))?;
    let rep = check_feasibility(&net, &mats, &ctl, &op, tol);
    let (theta, v) = bus_voltages(&mats.layout, &ctl, &op.x, &op.u);
    let iv = intermediates(&net, &mats, &ctl, &op.x, &op.u);
    let pg = ctl.dispatch(&net, &op.u, iv.p_slack_gen);

    println!("{}: converged in {} iterations", net.name, op.iterations);
    println!("{:>6} {:>9} {:>10}", "bus", "vm", "va deg");
    let rows: Vec<BusRow> = net
        .buses
        .iter()
        .enumerate()
        .map(|(k, b)| BusRow { bus: b.id, vm: v[k], va_deg: theta[k].to_degrees() })
        .collect();
    for r in &rows {
        println!("{:>6} {:>9.5} {:>10.4}", r.bus, r.vm, r.va_deg);
    }
    println!("{:>6} {:>6} {:>10}", "gen", "bus", "pg MW");
    for (g, p) in pg.iter().enumerate() {
        println!("{:>6} {:>6} {:>10.3}", g + 1, net.buses[net.generators[g].bus].id, p * net.base_mva);
    }
    println!("{:<14} {:>12}  {}", "limit", "margin", "at");
    for m in &rep.margins {
        println!("{:<14} {:>12.4e}  {}", format!("{:?}", m.class), m.worst_margin, m.at);
    }
    println!("{}", if rep.feasible { "all limits satisfied" } else { "LIMITS VIOLATED" });
    if let Some(out) = &args.out {
        write_doc(
            out,
            &PfDoc {
                schema: PF_SCHEMA,
                case: &net.name,
                converged: op.solved,
                iterations: op.iterations,
                buses: rows,
                pg,
                q_gen_bus: iv.q_gen_bus.clone(),
                feasibility: &rep,
            },
        )?;
    }
    match rep.violated(tol).first() {
        None => Ok(()),
        Some(m) => Err(Failure::Certification(format!("{:?} limit violated at {} by {:e}", m.class, m.at, -m.worst_margin))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let file = match config::load(cli.config.as_deref()) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: config: {e}");
            return ExitCode::from(3);
        }
    };
    let res = match cli.command {
        Command::SolvePath(a) => solve_path(a, &file),
        Command::Certify(a) => certify(a, &file),
        Command::RegionSlice(a) => slice::region_slice(a, &file),
        Command::Pf(a) => pf(a, &file),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
