//! `ccopt`: model I/O, global solves and certificate checks from the shell.
//!
//! Exit codes: 0 success or pass, 1 a fail (or undecided) verdict, 2 errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ccopt::enumeration::{check_mu_rule, DEFAULT_CAP};
use ccopt::schema::{DataFile, ModelFile, PointFile, SCHEMA_VERSION};
use ccopt::tol::ZERO_TOL_REL;
use ccopt::zoo::{self, Example, ExampleId};
use ccopt::{
    brute_force_grid, check_stationary_dual, check_stationary_primal, compute_thresholds, dual_to_primal,
    enumerate_global, existence_check_dual, existence_check_primal, primal_to_dual, select_mu, solve_restricted,
    svm_separability, Correspondence, Error, GlobalReport, PrimalModel, ProgramBase, RestrictedProgram, SolverConfig,
    Status, Subset, Verdict, Which,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "ccopt", version, about = "Composite cardinality optimization: global solves and certificates")]
struct Cli {
    #[command(flatten)]
    solver: SolverArgs,

    /// Write the JSON report here (and, for `solve`, the per-subset CSV next
    /// to it) instead of only printing it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolverArgs {
    /// Subsolver convergence tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Iteration budget per restricted program.
    #[arg(long, global = true)]
    max_iter: Option<usize>,

    /// Iterate norm beyond which a restricted program is declared unbounded.
    #[arg(long, global = true)]
    divergence_threshold: Option<f64>,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::default();
        if let Some(t) = self.tol {
            cfg.tol = t;
        }
        if let Some(k) = self.max_iter {
            cfg.max_iter = k;
        }
        if let Some(d) = self.divergence_threshold {
            cfg.divergence_threshold = d;
        }
        cfg
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    Primal,
    Dual,
}

impl From<Side> for Which {
    fn from(s: Side) -> Which {
        match s {
            Side::Primal => Which::Primal,
            Side::Dual => Which::Dual,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    P2d,
    D2p,
}

#[derive(Subcommand)]
enum Command {
    /// Global minimum of the primal or its stationary dual by support enumeration.
    Solve {
        #[arg(long, value_enum)]
        which: Side,
        /// Primal model JSON; dual commands derive the dual from it.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
    /// Stationarity certificate for a point.
    CheckStationary {
        #[arg(long, value_enum)]
        which: Side,
        /// Primal model JSON; dual commands derive the dual from it.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        point: PathBuf,
        /// Residual tolerance; defaults to 1e-7 (1 + data scale).
        #[arg(long)]
        stat_tol: Option<f64>,
    },
    /// Carry a stationary point to the other side.
    Correspond {
        #[arg(long, value_enum)]
        direction: Direction,
        /// Primal model JSON; dual commands derive the dual from it.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        point: PathBuf,
        #[arg(long)]
        stat_tol: Option<f64>,
    },
    /// Linear separability of a labelled point cloud.
    Separability {
        #[arg(long)]
        data: PathBuf,
    },
    /// Dual weights under which the solution on a given support is global.
    MuSelect {
        /// Primal model JSON; dual commands derive the dual from it.
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated 0-based indices, e.g. "0,2".
        #[arg(long, allow_hyphen_values = true)]
        support: String,
        #[arg(long, default_value_t = 0.25)]
        slack: f64,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
    /// Sufficient conditions for a global solution to exist.
    Exists {
        #[arg(long, value_enum)]
        which: Side,
        /// Primal model JSON; dual commands derive the dual from it.
        #[arg(long)]
        model: PathBuf,
    },
    /// Build, solve and cross-check a seeded example.
    Demo {
        #[arg(long)]
        example: ExampleId,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Outcome of a command: the report and whether its verdict passed.
struct Report {
    body: Value,
    passed: bool,
    csv: Option<Vec<u8>>,
}

fn envelope(command: &str, cfg: &SolverConfig, result: Value) -> Value {
    json!({
        "schema": SCHEMA_VERSION,
        "command": command,
        "config": cfg,
        "zero_tol_rel": ZERO_TOL_REL,
        "result": result,
    })
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, Error> {
    Ok(serde_json::to_value(v)?)
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::InvalidParams(format!("{}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidParams(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<ModelFile, Error> {
    parse_json(path)
}

fn load_point(path: &Path) -> Result<DVector<f64>, Error> {
    let p: PointFile = parse_json(path)?;
    ccopt::schema::check_schema(&p.schema)?;
    Ok(DVector::from_vec(p.point))
}

fn correspondence_json(c: &Correspondence) -> Result<Value, Error> {
    Ok(json!({
        "point": c.point.as_slice(),
        "value_residual": c.value_residual,
        "source": to_value(&c.source)?,
        "target": to_value(&c.target)?,
    }))
}

fn global_report(report: GlobalReport) -> Result<Report, Error> {
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    Ok(Report {
        passed: report.attained,
        body: to_value(&report)?,
        csv: Some(csv),
    })
}

fn run_solve(which: Side, model: &Path, cap: usize, cfg: &SolverConfig) -> Result<Report, Error> {
    let file = load_model(model)?;
    let report = match which {
        Side::Primal => enumerate_global(ProgramBase::Primal(&file.to_primal()?), cap, cfg)?,
        Side::Dual => enumerate_global(ProgramBase::Dual(&file.to_dual()?), cap, cfg)?,
    };
    global_report(report)
}

fn run_check(which: Side, model: &Path, point: &Path, tol: Option<f64>, cfg: &SolverConfig) -> Result<Report, Error> {
    let file = load_model(model)?;
    let x = load_point(point)?;
    let cert = match which {
        Side::Primal => check_stationary_primal(&file.to_primal()?, &x, tol, cfg)?,
        Side::Dual => check_stationary_dual(&file.to_dual()?, &x, tol, cfg)?,
    };
    Ok(Report {
        passed: cert.passed(),
        body: envelope("check-stationary", cfg, to_value(&cert)?),
        csv: None,
    })
}

fn run_correspond(
    direction: Direction,
    model: &Path,
    point: &Path,
    tol: Option<f64>,
    cfg: &SolverConfig,
) -> Result<Report, Error> {
    let file = load_model(model)?;
    let v = load_point(point)?;
    let outcome = match direction {
        Direction::P2d => {
            let p = file.to_primal()?;
            let d = file.to_dual()?;
            primal_to_dual(&p, &v, d.mu(), tol, cfg)
        }
        Direction::D2p => dual_to_primal(&file.to_dual()?, &v, tol, cfg),
    };
    let name = match direction {
        Direction::P2d => "p2d",
        Direction::D2p => "d2p",
    };
    match outcome {
        Ok(c) => Ok(Report {
            passed: true,
            body: envelope("correspond", cfg, json!({"direction": name, "correspondence": correspondence_json(&c)?})),
            csv: None,
        }),
        Err(Error::NotStationary { residual }) => Ok(Report {
            passed: false,
            body: envelope(
                "correspond",
                cfg,
                json!({"direction": name, "error": "point is not stationary", "residual": residual}),
            ),
            csv: None,
        }),
        Err(e) => Err(e),
    }
}

fn run_separability(data: &Path, cfg: &SolverConfig) -> Result<Report, Error> {
    let file: DataFile = parse_json(data)?;
    let points = file.matrix()?;
    let labels = DVector::from_vec(file.labels.clone());
    let cert = svm_separability(&points, &labels, cfg)?;
    Ok(Report {
        passed: cert.passed(),
        body: envelope("separability", cfg, to_value(&cert)?),
        csv: None,
    })
}

fn run_mu_select(model: &Path, support: &str, slack: f64, cap: usize, cfg: &SolverConfig) -> Result<Report, Error> {
    let file = load_model(model)?;
    let d = file.to_dual()?;
    let t_star = Subset::parse(support).map_err(Error::InvalidParams)?;
    if !t_star.fits(d.r()) {
        return Err(Error::InvalidParams(format!("support {t_star} is not contained in [{}]", d.r())));
    }
    let reference = solve_restricted(&RestrictedProgram::dual(&d, t_star)?, cfg)?;
    let w = match (reference.status, reference.point) {
        (Status::Optimal, Some(w)) => w,
        (status, _) => {
            return Ok(Report {
                passed: false,
                body: envelope(
                    "mu-select",
                    cfg,
                    json!({"error": format!("the program on {t_star} has no solution"), "status": to_value(&status)?}),
                ),
                csv: None,
            })
        }
    };
    let th = compute_thresholds(&d, t_star, Some(&w), cap, cfg)?;
    let mu = match select_mu(&th, slack) {
        Ok(mu) => mu,
        Err(Error::NoAdmissibleWeights(msg)) => {
            return Ok(Report {
                passed: false,
                body: envelope("mu-select", cfg, json!({"thresholds": to_value(&th)?, "error": msg})),
                csv: None,
            })
        }
        Err(e) => return Err(e),
    };
    let rule = check_mu_rule(&th, &mu);
    let dm = d.with_mu(&mu)?;
    let global = enumerate_global(ProgramBase::Dual(&dm), cap, cfg)?;
    let at_reference = dm.objective(&w, None)?.total;
    let gap = global.best_value.distance(at_reference);
    let verified = th.card_min_verified == Some(true);
    let body = json!({
        "thresholds": to_value(&th)?,
        "mu": mu.as_slice(),
        "rule_satisfied": rule,
        "reference": w.as_slice(),
        "reference_value": to_value(&at_reference)?,
        "global_value": to_value(&global.best_value)?,
        "global_gap": gap,
    });
    Ok(Report {
        passed: rule && verified && gap <= 1e-6 * (1.0 + at_reference.to_f64().abs()),
        body: envelope("mu-select", cfg, body),
        csv: None,
    })
}

fn run_exists(which: Side, model: &Path, cfg: &SolverConfig) -> Result<Report, Error> {
    let file = load_model(model)?;
    let p = file.to_primal()?;
    let cert = match which {
        Side::Primal => existence_check_primal(&p, cfg)?,
        Side::Dual => existence_check_dual(&p, p.variant(), cfg)?,
    };
    Ok(Report {
        passed: cert.verdict == Verdict::Pass,
        body: envelope("exists", cfg, to_value(&cert)?),
        csv: None,
    })
}

/// Lattice cross-check of a primal global value. The lattice is symmetric
/// about the origin, so rounding the minimizer to it keeps zero entries,
/// signs and coordinate ties; the convex part moves by at most `h L` per
/// coordinate, with `L` a finite-difference slope estimate.
fn grid_cross_check(p: &PrimalModel, report: &GlobalReport) -> Result<Value, Error> {
    let Some(best) = report.best_point.clone() else {
        return Ok(json!({"skipped": "no global minimizer"}));
    };
    let n = p.n();
    if n > 4 {
        return Ok(json!({"skipped": "dimension above 4"}));
    }
    let x = DVector::from_vec(best);
    let half_points: usize = if n <= 3 { 30 } else { 15 };
    let h = ((ccopt::tol::inf_norm(&x) + 1.0) / half_points as f64).max(0.05);
    let reach = h * half_points as f64;
    let grid = brute_force_grid(ProgramBase::Primal(p), -reach, reach, 2 * half_points + 1)?;
    let convex = |v: &DVector<f64>| p.objective(v, None).map(|o| o.convex);
    let fx = convex(&x)?.to_f64();
    let mut slope_sq = 0.0;
    for i in 0..n {
        let mut s = 0.0_f64;
        for sign in [-1.0, 1.0] {
            let mut y = x.clone();
            y[i] += sign * h;
            if let Some(fy) = convex(&y)?.finite() {
                s = s.max((fy - fx).abs() / h);
            }
        }
        slope_sq += s * s;
    }
    let lipschitz = slope_sq.sqrt() + (n as f64).sqrt() * h;
    let bound = 2.0 * h * lipschitz;
    let gap = report.best_value.to_f64() - grid.to_f64();
    let below_grid = gap <= 1e-9 * (1.0 + grid.to_f64().abs());
    Ok(json!({
        "grid_value": to_value(&grid)?,
        "spacing": h,
        "lipschitz_estimate": lipschitz,
        "bound": bound,
        "gap": gap.abs(),
        "passed": below_grid && gap.abs() <= bound,
    }))
}

fn run_demo(id: ExampleId, seed: u64, cfg: &SolverConfig) -> Result<Report, Error> {
    let example = zoo::build_example(id, seed)?;
    let mut checks = serde_json::Map::new();
    let mut passed = true;
    let report = match &example {
        Example::Primal(p) => {
            let report = enumerate_global(ProgramBase::Primal(p), DEFAULT_CAP, cfg)?;
            let grid = grid_cross_check(p, &report)?;
            passed &= grid.get("passed").and_then(Value::as_bool).unwrap_or(true);
            checks.insert("grid".into(), grid);
            if let Some(x) = &report.best_point {
                let x = DVector::from_vec(x.clone());
                let corr = match primal_to_dual(p, &x, &p.card.weights, None, cfg) {
                    Ok(c) => {
                        passed &= c.value_residual <= 1e-6;
                        json!({"value_residual": c.value_residual, "dual_point": c.point.as_slice()})
                    }
                    Err(e) => {
                        passed = false;
                        json!({"error": e.to_string()})
                    }
                };
                checks.insert("correspondence".into(), corr);
            }
            checks.insert("model".into(), to_value(&ModelFile::from_primal(p, None))?);
            report
        }
        Example::Dual(d) => {
            let report = enumerate_global(ProgramBase::Dual(d), DEFAULT_CAP, cfg)?;
            let data = zoo::separable_2class(2, 6, 1.0, seed)?;
            let sep = svm_separability(&data.points, &data.labels, cfg)?;
            let agree = sep.passed() == report.attained;
            passed &= agree;
            checks.insert(
                "separability".into(),
                json!({"verdict": to_value(&sep.verdict)?, "dual_attained": report.attained, "agree": agree}),
            );
            if let Some(w) = &report.best_point {
                let w = DVector::from_vec(w.clone());
                let corr = match dual_to_primal(d, &w, None, cfg) {
                    Ok(c) => {
                        passed &= c.value_residual <= 1e-6;
                        json!({"value_residual": c.value_residual, "primal_point": c.point.as_slice()})
                    }
                    Err(e) => {
                        passed = false;
                        json!({"error": e.to_string()})
                    }
                };
                checks.insert("correspondence".into(), corr);
            }
            report
        }
    };
    passed &= !report.indeterminate;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let body = json!({
        "example": id.as_str(),
        "seed": seed,
        "report": to_value(&report)?,
        "checks": Value::Object(checks),
        "passed": passed,
    });
    Ok(Report {
        passed,
        body: envelope("demo", cfg, body),
        csv: Some(csv),
    })
}

fn run(cli: &Cli) -> Result<Report, Error> {
    let cfg = cli.solver.config();
    match &cli.command {
        Command::Solve { which, model, cap } => run_solve(*which, model, *cap, &cfg),
        Command::CheckStationary { which, model, point, stat_tol } => run_check(*which, model, point, *stat_tol, &cfg),
        Command::Correspond { direction, model, point, stat_tol } => {
            run_correspond(*direction, model, point, *stat_tol, &cfg)
        }
        Command::Separability { data } => run_separability(data, &cfg),
        Command::MuSelect { model, support, slack, cap } => run_mu_select(model, support, *slack, *cap, &cfg),
        Command::Exists { which, model } => run_exists(*which, model, &cfg),
        Command::Demo { example, seed } => run_demo(*example, *seed, &cfg),
    }
}

fn emit(report: &Report, out: Option<&Path>) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(&report.body)? + "\n";
    match out {
        Some(path) => {
            fs::write(path, &text)?;
            if let Some(csv) = &report.csv {
                fs::write(path.with_extension("csv"), csv)?;
            }
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("CCOPT_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("CCOPT_THREADS must be a positive integer, got `{v}`"))?;
    if n == 0 {
        return Err("CCOPT_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = emit(&report, cli.out.as_deref()) {
        eprintln!("error: writing report: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(if report.passed { 0 } else { 1 })
}
