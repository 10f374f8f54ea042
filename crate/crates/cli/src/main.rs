mod model;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use linsde::law::generator_residual;
use linsde::oracle::simulate_terminal;
use linsde::portfolio::{h_identity_check, port_reach, port_regime, port_xi_tilde, tilde_h, x_star_path};
use linsde::reach::{support_numeric, DEFAULT_K_SCHEDULE};
use linsde::regime::{has_density, report_at, RegimeReport};
use linsde::{reachable_set, CaseTag, Error, LinearSde, Scheme, SimConfig, TransitionLaw};
use serde_json::{json, Value};

use crate::model::{load, LoadError, Model};

#[derive(Parser)]
#[command(name = "linsde", version, about = "Transition laws and reachable sets of scalar linear SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Euler,
    Log,
}

#[derive(Args)]
struct Common {
    /// Model file (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Echo the canonical model JSON instead of running the command.
    #[arg(long)]
    dump_model: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Monte Carlo paths.
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    /// Time steps per unit time.
    #[arg(long, default_value_t = 1_000)]
    steps: usize,
    #[arg(long, value_enum, default_value_t = SchemeArg::Euler)]
    scheme: SchemeArg,
    #[arg(long, value_enum, default_value_t = OutFormat::Json)]
    out: OutFormat,
}

impl Common {
    fn sim(&self) -> SimConfig {
        let scheme = match self.scheme {
            SchemeArg::Euler => Scheme::EulerMaruyama,
            SchemeArg::Log => Scheme::LogEulerWhereProportional,
        };
        SimConfig { n_paths: self.paths, steps_per_unit_time: self.steps, seed: self.seed, scheme }
    }
}

#[derive(Args)]
struct LawArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    t: f64,
    /// Starting state; defaults to x0 of the model.
    #[arg(long)]
    x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    y: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Evaluation grid `name:a:b:n` (n + 1 equally spaced points).
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
}

#[derive(Args)]
struct TimeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    x: Option<f64>,
}

#[derive(Args)]
struct GeneratorArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    t: f64,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    y: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1e-3)]
    dx: f64,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    common: Common,
    /// Time grid `t:a:b:n`; defaults to 100 points on [0, T).
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Subcommand)]
enum PortfolioCommand {
    /// Regime times from the strategy coefficients.
    Regime(TimeArgs),
    /// Reachable wealth levels at time t.
    Reach(TimeArgs),
    /// Residual of the h identity against the general computation.
    CheckH(GridArgs),
}

#[derive(Subcommand)]
enum Command {
    /// Regime times and the case of the transition law at t.
    Classify(TimeArgs),
    /// Transition CDF F(t, x, y).
    Cdf(LawArgs),
    /// Transition density.
    Pdf(LawArgs),
    /// Transition quantile G(t, x, alpha).
    Quantile(LawArgs),
    /// Simulate X(T) from X(t) = x.
    Simulate(TimeArgs),
    /// Reachable states and support of X(t) from x0.
    Reach(TimeArgs),
    /// Support of X(t) from the extremal controlled ODEs.
    Support(TimeArgs),
    /// Finite-difference residual of the backward equation.
    GeneratorCheck(GeneratorArgs),
    /// Portfolio wealth dynamics.
    #[command(subcommand)]
    Portfolio(PortfolioCommand),
    /// Run the invariant suite on the model.
    Verify(Common),
}

enum Failure {
    Load(LoadError),
    Lib(Error),
    Usage(String),
    Verification(Value),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Run = Result<Output, Failure>;

enum Output {
    Json(Value),
    Csv(String),
    Text(String),
}

struct Grid {
    name: String,
    points: Vec<f64>,
}

fn parse_grid(spec: &str) -> Result<Grid, Failure> {
    let bad = || Failure::Usage(format!("grid must look like name:a:b:n, got {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [name, a, b, n] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.parse().map_err(|_| bad())?;
    let b: f64 = b.parse().map_err(|_| bad())?;
    let n: usize = n.parse().map_err(|_| bad())?;
    if n == 0 || !(a.is_finite() && b.is_finite()) {
        return Err(bad());
    }
    let points = (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect();
    Ok(Grid { name: name.to_string(), points })
}

fn table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

fn open(common: &Common) -> Result<Model, Failure> {
    load(&common.model).map_err(Failure::Load)
}

fn sim_echo(cfg: &SimConfig) -> Value {
    json!({"seed": cfg.seed, "paths": cfg.n_paths, "steps": cfg.steps_per_unit_time, "scheme": cfg.scheme})
}

#[derive(Clone, Copy)]
enum Quantity {
    Cdf,
    Pdf,
    Quantile,
}

fn law_command(args: &LawArgs, what: Quantity) -> Run {
    let model = open(&args.common)?;
    let x = args.x.unwrap_or(model.x0);
    let cfg = args.common.sim();
    let law = TransitionLaw::with_config(&model.sde, args.t, x, cfg)?;
    let (arg_name, single) = match what {
        Quantity::Quantile => ("alpha", args.alpha),
        _ => ("y", args.y),
    };
    let eval = |v: f64| -> Result<linsde::Estimate, Error> {
        match what {
            Quantity::Cdf => Ok(law.cdf_estimate(v)),
            Quantity::Pdf => law.density_estimate(v),
            Quantity::Quantile => law.quantile_estimate(v),
        }
    };
    let value_name = match what {
        Quantity::Cdf => "F",
        Quantity::Pdf => "p",
        Quantity::Quantile => "G",
    };
    let seed = (!law.case().is_closed_form()).then(|| sim_echo(&cfg));
    match (&args.grid, single) {
        (Some(g), _) => {
            let grid = parse_grid(g)?;
            if grid.name != arg_name {
                return Err(Failure::Usage(format!("grid variable must be {arg_name}, got {}", grid.name)));
            }
            let ests = grid.points.iter().map(|&v| eval(v)).collect::<Result<Vec<_>, _>>()?;
            if args.common.out == OutFormat::Csv {
                let rows: Vec<Vec<f64>> = grid.points.iter().zip(&ests).map(|(&v, e)| vec![v, e.value]).collect();
                return Ok(Output::Csv(table(&[arg_name, value_name], &rows)));
            }
            let rows: Vec<Value> = grid
                .points
                .iter()
                .zip(&ests)
                .map(|(&v, e)| json!({arg_name: v, "value": e.value, "error_band": e.error_band}))
                .collect();
            Ok(Output::Json(json!({
                "case": law.case().name(),
                "provenance": law.provenance(),
                "simulation": seed,
                "rows": rows,
            })))
        }
        (None, Some(v)) => {
            let e = eval(v)?;
            if args.common.out == OutFormat::Csv {
                return Ok(Output::Csv(table(&[arg_name, value_name], &[vec![v, e.value]])));
            }
            let mut doc = serde_json::to_value(&e).expect("estimate serializes");
            if let Some(s) = seed {
                doc["simulation"] = s;
            }
            Ok(Output::Json(doc))
        }
        (None, None) => Err(Failure::Usage(format!("either --{arg_name} or --grid is required"))),
    }
}

/// At the horizon the transition is the identity, a point mass at `x`.
fn terminal_point_mass(sde: &LinearSde) -> Value {
    let reg = sde.regime();
    let report = RegimeReport {
        t_star: reg.t_star,
        t_lower_star: reg.t_lower_star,
        xi: reg.xi,
        case: CaseTag::Degenerate,
        warning: None,
    };
    json!({
        "case": report.case.name(),
        "t_star": report.t_star,
        "t_lower_star": report.t_lower_star,
        "xi": report.xi,
        "report": serde_json::to_value(&report).expect("report serializes"),
    })
}

fn classify(args: &TimeArgs) -> Run {
    let model = open(&args.common)?;
    if args.t == model.sde.horizon() {
        return Ok(Output::Json(terminal_point_mass(&model.sde)));
    }
    let report = report_at(&model.sde, args.t)?;
    let mut doc = json!({
        "case": report.case.name(),
        "t_star": report.t_star,
        "t_lower_star": report.t_lower_star,
        "xi": report.xi,
        "report": serde_json::to_value(&report).expect("report serializes"),
    });
    match report.case {
        CaseTag::Gaussian { b_t } => doc["b_t"] = json!(b_t),
        CaseTag::ShiftedLognormal { xi, a_bar, b_bar } => {
            doc["xi_tilde"] = json!(linsde::transform::xi_tilde(&model.sde, xi, args.t)?);
            doc["a_bar"] = json!(a_bar);
            doc["b_bar"] = json!(b_bar);
        }
        _ => {}
    }
    if let Some(x) = args.x {
        doc["x"] = json!(x);
        doc["has_density"] = json!(has_density(&model.sde, args.t, x)?);
    }
    if let Some(w) = report.warning {
        doc["warning"] = json!(w);
    }
    Ok(Output::Json(doc))
}

fn simulate(args: &TimeArgs) -> Run {
    let model = open(&args.common)?;
    let cfg = args.common.sim();
    let x = args.x.unwrap_or(model.x0);
    let pool = simulate_terminal(&model.sde, args.t, x, model.sde.horizon(), cfg)?;
    if args.common.out == OutFormat::Csv {
        let rows: Vec<Vec<f64>> = pool.values().iter().map(|&v| vec![v]).collect();
        return Ok(Output::Csv(table(&["x_T"], &rows)));
    }
    Ok(Output::Json(json!({
        "t": args.t,
        "x": x,
        "horizon": model.sde.horizon(),
        "simulation": sim_echo(&cfg),
        "mean": pool.mean(),
        "variance": pool.variance(),
        "min": pool.min(),
        "max": pool.max(),
        "dkw_band": linsde::oracle::dkw_band(pool.len()),
    })))
}

fn reach(args: &TimeArgs) -> Run {
    let model = open(&args.common)?;
    let x0 = args.x.unwrap_or(model.x0);
    let r = reachable_set(&model.sde, x0, args.t)?;
    Ok(Output::Json(serde_json::to_value(&r).expect("reach result serializes")))
}

fn support(args: &TimeArgs) -> Run {
    let model = open(&args.common)?;
    let x0 = args.x.unwrap_or(model.x0);
    let s = support_numeric(&model.sde, x0, args.t, &DEFAULT_K_SCHEDULE)?;
    Ok(Output::Json(serde_json::to_value(&s).expect("support estimate serializes")))
}

fn generator_check(args: &GeneratorArgs) -> Run {
    let model = open(&args.common)?;
    let x = args.x.unwrap_or(model.x0);
    let r = generator_residual(&model.sde, args.t, x, args.y, args.dt, args.dx)?;
    Ok(Output::Json(json!({"t": args.t, "x": x, "y": args.y, "dt": args.dt, "dx": args.dx, "residual": r})))
}

fn portfolio_model(common: &Common) -> Result<(Model, linsde::portfolio::PortfolioSpec), Failure> {
    let model = open(common)?;
    let spec = model
        .portfolio
        .clone()
        .ok_or_else(|| Failure::Lib(Error::InvalidModel("portfolio commands need a model of kind \"portfolio\"".into())))?;
    Ok((model, spec))
}

fn portfolio(cmd: &PortfolioCommand) -> Run {
    match cmd {
        PortfolioCommand::Regime(args) => {
            let (_, spec) = portfolio_model(&args.common)?;
            if !(0.0..=spec.horizon()).contains(&args.t) {
                return Err(Failure::Lib(Error::Domain(format!("time {} outside [0, {}]", args.t, spec.horizon()))));
            }
            let r = port_regime(&spec);
            Ok(Output::Json(json!({
                "t_star": r.t_star,
                "t_lower_star": r.t_lower_star,
                "xi": r.xi,
                "t": args.t,
                "xi_tilde": port_xi_tilde(&spec, args.t),
            })))
        }
        PortfolioCommand::Reach(args) => {
            let (model, spec) = portfolio_model(&args.common)?;
            let x0 = args.x.unwrap_or(model.x0);
            let r = port_reach(&spec, x0, args.t)?;
            Ok(Output::Json(serde_json::to_value(&r).expect("reach result serializes")))
        }
        PortfolioCommand::CheckH(args) => {
            let (model, spec) = portfolio_model(&args.common)?;
            let grid = match &args.grid {
                Some(g) => parse_grid(g)?.points,
                None => (0..100).map(|k| spec.horizon() * k as f64 / 100.0).collect(),
            };
            let resid = h_identity_check(&spec, model.x0, &grid)?;
            if args.common.out == OutFormat::Csv {
                let rows = grid
                    .iter()
                    .map(|&t| Ok(vec![t, tilde_h(&spec, t)?, x_star_path(&spec, model.x0, t)?]))
                    .collect::<Result<Vec<_>, Error>>()?;
                return Ok(Output::Csv(table(&["t", "tilde_h", "x_star"], &rows)));
            }
            Ok(Output::Json(json!({"points": grid.len(), "max_residual": resid})))
        }
    }
}

fn verify_command(common: &Common) -> Run {
    let model = open(common)?;
    let checks = verify::run(&model, common.sim());
    let mut text = String::new();
    for c in &checks {
        text.push_str(&format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    let doc = json!({"passed": checks.iter().all(|c| c.passed), "checks": checks});
    if checks.iter().all(|c| c.passed) {
        match common.out {
            OutFormat::Json => Ok(Output::Json(doc)),
            OutFormat::Csv => Ok(Output::Text(text)),
        }
    } else {
        eprint!("{text}");
        Err(Failure::Verification(doc))
    }
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Classify(a) | Command::Simulate(a) | Command::Reach(a) | Command::Support(a) => &a.common,
        Command::Cdf(a) | Command::Pdf(a) | Command::Quantile(a) => &a.common,
        Command::GeneratorCheck(a) => &a.common,
        Command::Portfolio(PortfolioCommand::Regime(a) | PortfolioCommand::Reach(a)) => &a.common,
        Command::Portfolio(PortfolioCommand::CheckH(a)) => &a.common,
        Command::Verify(c) => c,
    }
}

fn dispatch(cmd: &Command) -> Run {
    let c = common(cmd);
    if c.dump_model {
        let model = open(c)?;
        return Ok(Output::Text(model.file.canonical_json() + "\n"));
    }
    match cmd {
        Command::Classify(a) => classify(a),
        Command::Cdf(a) => law_command(a, Quantity::Cdf),
        Command::Pdf(a) => law_command(a, Quantity::Pdf),
        Command::Quantile(a) => law_command(a, Quantity::Quantile),
        Command::Simulate(a) => simulate(a),
        Command::Reach(a) => reach(a),
        Command::Support(a) => support(a),
        Command::GeneratorCheck(a) => generator_check(a),
        Command::Portfolio(p) => portfolio(p),
        Command::Verify(c) => verify_command(c),
    }
}

fn lib_exit(e: &Error) -> u8 {
    match e {
        Error::InvalidModel(_) | Error::DegreeOverflow { .. } | Error::AssumptionViolation(_) => 2,
        Error::Quadrature { .. } | Error::SimulationOverflow { .. } => 1,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match dispatch(&cli.command) {
        Ok(Output::Json(v)) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("json output"));
            ExitCode::SUCCESS
        }
        Ok(Output::Csv(s) | Output::Text(s)) => {
            print!("{s}");
            ExitCode::SUCCESS
        }
        Err(Failure::Load(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                LoadError::Io { .. } => 1,
                _ => 2,
            })
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(lib_exit(&e))
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Verification(doc)) => {
            println!("{}", serde_json::to_string_pretty(&doc).expect("json output"));
            ExitCode::from(4)
        }
    }
}
