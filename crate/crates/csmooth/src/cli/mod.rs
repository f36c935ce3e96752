//! Command-line front end: dimension tables, smoothness checks, L2 fits and
//! convergence studies.

pub mod expr;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::fitting::{self, convergence_study, ConvergenceTable};
use crate::multipatch::{MultiPatchDomain, Point, Topology};
use crate::spacebuilder::{export_basis, import_basis, predicted_dims, Builder, Params, Strategy};
use crate::verify::{CheckOptions, Verifier, FD_TOL, JET_TOL};
use expr::Expr;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "CSMOOTH_THREADS";

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const CHECK_FAILED: u8 = 1;
    pub const PARAMETER: u8 = 2;
    pub const GEOMETRY: u8 = 3;
    pub const ABORTED: u8 = 4;
}

#[derive(Debug, Parser)]
#[command(name = "csmooth", version, about = "C^s-smooth spline spaces on bilinear multi-patch domains")]
pub struct Cli {
    /// Worker thread cap (also read from CSMOOTH_THREADS).
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dimensions of W^s per subspace over a range of levels.
    Dim(DimArgs),
    /// Smoothness verification of every basis function.
    Check(CheckArgs),
    /// L2 projection of a function on one or more levels.
    Fit(FitArgs),
    /// Convergence study over levels 0..=L.
    Converge(ConvergeArgs),
}

#[derive(Debug, Args)]
pub struct SpaceArgs {
    /// Geometry file (TOML list of bilinear patches).
    pub geometry: PathBuf,
    /// Spline degree p.
    #[arg(short = 'p', long = "degree")]
    pub p: usize,
    /// Spline regularity r (defaults to s).
    #[arg(short = 'r', long = "regularity")]
    pub r: Option<usize>,
    /// Smoothness s.
    #[arg(short = 's', long = "smoothness")]
    pub s: usize,
    /// Vertex strategy: nullspace or interp.
    #[arg(long, default_value = "interp")]
    pub strategy: String,
}

impl SpaceArgs {
    fn regularity(&self) -> usize {
        self.r.unwrap_or(self.s)
    }
}

#[derive(Debug, Args)]
pub struct DimArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Levels: a single L, a range a..b (inclusive) or a list a,b,c.
    #[arg(short = 'L', long = "levels", default_value = "0..3")]
    pub levels: String,
    /// CSV output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Level L (h = 2^-L).
    #[arg(short = 'L', long = "levels", default_value_t = 2)]
    pub level: u32,
    /// Also run the physical finite-difference oracle on a random subsample.
    #[arg(long)]
    pub fd: bool,
    /// Fraction of functions receiving the finite-difference check.
    #[arg(long, default_value_t = 0.1)]
    pub fd_fraction: f64,
    /// Samples per inner edge for the jet check.
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    /// Seed of the finite-difference subsample.
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    /// Check the basis stored in this dump instead of building it.
    #[arg(long)]
    pub basis: Option<PathBuf>,
    /// Write the basis dump of the built space to this file.
    #[arg(long)]
    pub export: Option<PathBuf>,
    /// CSV output file for the residual table.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Levels: a single L, a range a..b (inclusive) or a list a,b,c.
    #[arg(short = 'L', long = "levels", default_value = "3")]
    pub levels: String,
    /// Builtin id (trig, one, x1, x2, quadratic) or an expression in x1, x2.
    #[arg(short = 'f', long, default_value = "trig")]
    pub function: String,
    /// CSV output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Finest level; levels 0..=L are computed.
    #[arg(short = 'L', long = "levels")]
    pub max_level: u32,
    /// Builtin id (trig, one, x1, x2, quadratic) or an expression in x1, x2.
    #[arg(short = 'f', long, default_value = "trig")]
    pub function: String,
    /// CSV output file (the table is printed to standard output otherwise).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure of a command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parameter(_) => exit::PARAMETER,
            Error::Geometry(_) | Error::Topology(_) | Error::Parse(_) => exit::GEOMETRY,
            Error::Io(_) => exit::GEOMETRY,
            Error::Smoothness { .. } | Error::Singular(_) | Error::Solver(_) => exit::ABORTED,
        };
        Failure::new(code, e.to_string())
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Target field of a fit: a builtin or a parsed expression.
pub enum Target {
    Builtin(fn(Point) -> f64),
    Expr(Expr),
}

impl Target {
    pub fn parse(text: &str) -> std::result::Result<Target, Failure> {
        let builtin: Option<fn(Point) -> f64> = match text {
            "trig" => Some(fitting::trig_field),
            "one" => Some(|_| 1.0),
            "zero" => Some(|_| 0.0),
            "x1" => Some(|x| x[0]),
            "x2" => Some(|x| x[1]),
            "quadratic" => Some(|x| 1.0 + x[0] - 2.0 * x[1] + x[0] * x[0] + x[0] * x[1] - 0.5 * x[1] * x[1]),
            _ => None,
        };
        if let Some(f) = builtin {
            return Ok(Target::Builtin(f));
        }
        Expr::parse(text)
            .map(Target::Expr)
            .map_err(|e| Failure::new(exit::PARAMETER, format!("unknown function '{text}': {e}")))
    }

    pub fn eval(&self, x: Point) -> f64 {
        match self {
            Target::Builtin(f) => f(x),
            Target::Expr(e) => e.eval(x),
        }
    }
}

/// Parses `3`, `0..5` (inclusive) or `0,2,4`.
pub fn parse_levels(text: &str) -> std::result::Result<Vec<u32>, Failure> {
    let bad = || Failure::new(exit::PARAMETER, format!("invalid level specification '{text}'"));
    let num = |s: &str| s.trim().parse::<u32>().map_err(|_| bad());
    let levels = if let Some((a, b)) = text.split_once("..") {
        let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        text.split(',').map(num).collect::<std::result::Result<Vec<_>, _>>()?
    };
    if levels.is_empty() || levels.iter().any(|&l| l > MAX_LEVEL) {
        return Err(bad());
    }
    Ok(levels)
}

fn strategy(args: &SpaceArgs) -> std::result::Result<Strategy, Failure> {
    args.strategy.parse::<Strategy>().map_err(|e| Failure::new(exit::PARAMETER, e.to_string()))
}

fn load_domain(path: &Path) -> std::result::Result<(MultiPatchDomain, Topology), Failure> {
    let domain = MultiPatchDomain::load(path).map_err(|e| Failure::new(exit::GEOMETRY, e.to_string()))?;
    let topo = Topology::extract(&domain).map_err(|e| Failure::new(exit::GEOMETRY, e.to_string()))?;
    Ok((domain, topo))
}

fn write_output(path: &Option<PathBuf>, text: &str) -> CmdResult {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::new(exit::PARAMETER, format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_dim(a: &DimArgs) -> CmdResult {
    let levels = parse_levels(&a.levels)?;
    let strat = strategy(&a.space)?;
    let (domain, topo) = load_domain(&a.space.geometry)?;
    let (p, r, s) = (a.space.p, a.space.regularity(), a.space.s);
    for &level in &levels {
        Params::at_level(p, r, s, level)?;
    }
    let mut csv = String::from("level,h,patch,edge,vertex,total\n");
    println!("{:>5} {:>12} {:>8} {:>8} {:>8} {:>8}", "L", "h", "patch", "edge", "vertex", "total");
    for &level in &levels {
        let params = Params::at_level(p, r, s, level)?;
        let space = Builder::new(&domain, &topo, params)?.assemble(strat)?;
        let d = space.dims();
        if strat == Strategy::Interpolation && !params.is_coarse() {
            let pred = predicted_dims(&params, &topo);
            if pred.total_interp != d.total() as i64 {
                log::warn!("level {level}: built dimension {} differs from formula {}", d.total(), pred.total_interp);
            }
        }
        let h = format!("1/{}", params.k + 1);
        println!("{level:>5} {h:>12} {:>8} {:>8} {:>8} {:>8}", d.patch, d.edge, d.vertex, d.total());
        csv.push_str(&format!("{level},{:.16e},{},{},{},{}\n", params.h(), d.patch, d.edge, d.vertex, d.total()));
    }
    if a.out.is_some() {
        write_output(&a.out, &csv)?;
    }
    Ok(())
}

fn cmd_check(a: &CheckArgs) -> CmdResult {
    let strat = strategy(&a.space)?;
    let (domain, topo) = load_domain(&a.space.geometry)?;
    let params = Params::at_level(a.space.p, a.space.regularity(), a.space.s, a.level)?;
    let builder = Builder::new(&domain, &topo, params)?;
    let space = match &a.basis {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::new(exit::PARAMETER, format!("cannot read {}: {e}", path.display())))?;
            // A dump that cannot be read back counts as a failed check.
            let space = import_basis(&text)
                .map_err(|e| Failure::new(exit::CHECK_FAILED, format!("corrupted basis dump: {e}")))?;
            if space.params != params || space.num_patches != topo.num_patches {
                return Err(Failure::new(exit::CHECK_FAILED, "basis dump does not match the requested parameters"));
            }
            space
        }
        None => builder.assemble(strat)?,
    };
    if let Some(path) = &a.export {
        std::fs::write(path, export_basis(&space))
            .map_err(|e| Failure::new(exit::PARAMETER, format!("cannot write {}: {e}", path.display())))?;
    }
    let verifier = Verifier::new(&builder);
    let opts = CheckOptions {
        samples: a.samples,
        fd_fraction: if a.fd { a.fd_fraction } else { 0.0 },
        seed: a.seed,
        ..Default::default()
    };
    let report = verifier.check_space(&space, &opts);
    eprintln!(
        "checked {} functions: jet max {:.3e} (tol {JET_TOL:.0e})",
        report.num_functions,
        report.jet_max()
    );
    if a.fd {
        eprintln!(
            "finite differences on {} functions: max {:.3e} (tol {FD_TOL:.0e}), {} samples skipped",
            report.fd_checked,
            report.fd_max(),
            report.fd_skipped
        );
    }
    write_output(&a.out, &report.to_csv())?;
    let failures = report.failures();
    if failures.is_empty() {
        eprintln!("PASS");
        Ok(())
    } else {
        for (check, edge, order, r, f) in &failures {
            eprintln!(
                "FAIL {check} edge {edge} order {order}: residual {r:.3e}, function {f} ({})",
                space.functions[*f].tag
            );
        }
        Err(Failure::new(exit::CHECK_FAILED, format!("{} failing (check, edge, order) entries", failures.len())))
    }
}

fn report_table(table: &ConvergenceTable, out: &Option<PathBuf>) -> CmdResult {
    write_output(out, &table.to_csv())?;
    if let Some((level, e)) = &table.failure {
        return Err(Failure::new(exit::ABORTED, format!("level {level} aborted, partial table written: {e}")));
    }
    Ok(())
}

fn cmd_fit(a: &FitArgs) -> CmdResult {
    let levels = parse_levels(&a.levels)?;
    let strat = strategy(&a.space)?;
    let target = Target::parse(&a.function)?;
    let (domain, _) = load_domain(&a.space.geometry)?;
    let (p, r, s) = (a.space.p, a.space.regularity(), a.space.s);
    Params::at_level(p, r, s, levels[0])?;
    let table = convergence_study(&domain, p, r, s, &levels, strat, &|x| target.eval(x))?;
    for row in &table.rows {
        eprintln!(
            "L {} h {:.6} ndof {} relative L2 error {:.6e}{}",
            row.level,
            row.h,
            row.ndof,
            row.rel_error,
            row.order.map_or(String::new(), |o| format!(" order {o:.3}"))
        );
    }
    report_table(&table, &a.out)
}

fn cmd_converge(a: &ConvergeArgs) -> CmdResult {
    if a.max_level > MAX_LEVEL {
        return Err(Failure::new(exit::PARAMETER, format!("level {} exceeds the maximum {MAX_LEVEL}", a.max_level)));
    }
    let strat = strategy(&a.space)?;
    let target = Target::parse(&a.function)?;
    let (domain, _) = load_domain(&a.space.geometry)?;
    let (p, r, s) = (a.space.p, a.space.regularity(), a.space.s);
    Params::at_level(p, r, s, 0)?;
    let levels: Vec<u32> = (0..=a.max_level).collect();
    let table = convergence_study(&domain, p, r, s, &levels, strat, &|x| target.eval(x))?;
    if let Some(o) = table.final_order() {
        eprintln!("final empirical order {o:.3}");
    }
    report_table(&table, &a.out)
}

/// Finest supported refinement level.
const MAX_LEVEL: u32 = 12;

fn init_threads(threads: Option<usize>) -> CmdResult {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::new(exit::PARAMETER, "--threads must be positive"));
        }
        // Fails only if a pool already exists, which keeps that pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    init_threads(cli.threads)?;
    match &cli.command {
        Command::Dim(a) => cmd_dim(a),
        Command::Check(a) => cmd_check(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Converge(a) => cmd_converge(a),
    }
}

/// Entry point of the binary: parses arguments, runs, maps failures to
/// exit codes. Usage errors exit with code 2.
pub fn main_entry() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(f) => {
            let _ = std::io::stdout().flush();
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_specs() {
        assert_eq!(parse_levels("3").unwrap(), vec![3]);
        assert_eq!(parse_levels("0..3").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(parse_levels("1,4").unwrap(), vec![1, 4]);
        for bad in ["", "a", "3..1", "0..x", "40"] {
            assert_eq!(parse_levels(bad).unwrap_err().code, exit::PARAMETER);
        }
    }

    #[test]
    fn targets() {
        let x = [0.25, -0.5];
        assert_eq!(Target::parse("x1").unwrap().eval(x), 0.25);
        assert_eq!(Target::parse("trig").unwrap().eval(x), fitting::trig_field(x));
        assert!((Target::parse("x1*x2 + 1").unwrap().eval(x) - 0.875).abs() < 1e-15);
        assert_eq!(Target::parse("no-such-function").err().unwrap().code, exit::PARAMETER);
    }

    #[test]
    fn error_codes() {
        assert_eq!(Failure::from(Error::Parameter("x".into())).code, exit::PARAMETER);
        assert_eq!(Failure::from(Error::Geometry("x".into())).code, exit::GEOMETRY);
        assert_eq!(Failure::from(Error::Solver("x".into())).code, exit::ABORTED);
    }
}
