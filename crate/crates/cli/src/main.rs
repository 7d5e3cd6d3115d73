use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use momentlmi_core::gmp::liouville_constraints;
use momentlmi_core::poly::{rat, Exponent, Polynomial, VarSpace};
use momentlmi_core::problem::{format_constraint, read_problem, Problem};
use momentlmi_core::report::{pop_order, solve_problem, SolveConfig};
use momentlmi_core::sdp::{SdpStatus, SolveOptions};
use momentlmi_core::spectra::{circle_directions, shadow_support_points};
use momentlmi_core::textfile::fmt_num;
use momentlmi_core::Error;

#[derive(Parser)]
#[command(
    name = "momentlmi",
    version,
    about = "Moment relaxations of polynomial and measure optimization problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file (pop, gmp, sdp) or print the defining polynomials of a pencil
    Solve(SolveArgs),
    /// Support points of the order-r shadow of a pop file's feasible set
    Shadow(ShadowArgs),
    /// Print the Liouville rows generated for a gmp file with dynamics
    Liouville(LiouvilleArgs),
}

#[derive(Args)]
struct SolveArgs {
    file: PathBuf,
    /// relaxation order (default: the smallest valid one)
    #[arg(long)]
    order: Option<usize>,
    /// gap and feasibility tolerance of the interior-point solver
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// rank test and atom extraction on the moment matrices
    #[arg(long)]
    extract: bool,
    /// also write the report to this file
    #[arg(long)]
    out: Option<PathBuf>,
    /// seed of the random combination used by extraction
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// gmp only: among the optimal points, report the one with the least
    /// mass on this measure
    #[arg(long, value_name = "MEASURE")]
    min_mass: Option<String>,
}

#[derive(Args)]
struct ShadowArgs {
    file: PathBuf,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, default_value_t = 64)]
    directions: usize,
    /// projected coordinates, 1-based indices or names: `1,2` or `x1,x2`
    #[arg(long, default_value = "1,2")]
    proj: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LiouvilleArgs {
    file: PathBuf,
    #[arg(long)]
    order: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Input problems exit with 1, solver trouble with 2.
enum Failure {
    Input(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e.solver_status() {
            Some(_) => Failure::Solver(e.to_string()),
            None => Failure::Input(e.to_string()),
        }
    }
}

fn input<E: Into<Error>>(e: E) -> Failure {
    Failure::from(e.into())
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    print!("{text}");
    if let Some(p) = out {
        std::fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn cmd_solve(a: &SolveArgs) -> Result<SdpStatus, Failure> {
    let problem = read_problem(&a.file)?;
    let cfg = SolveConfig {
        order: a.order,
        options: SolveOptions {
            gap_tol: a.tol,
            feas_tol: a.tol,
            max_iter: a.max_iter,
            ..SolveOptions::default()
        },
        extract: a.extract,
        seed: a.seed,
        min_mass: a.min_mass.clone(),
    };
    let (rep, status) = solve_problem(&problem, &cfg)?;
    emit(&rep.to_text(), a.out.as_deref())?;
    Ok(status)
}

fn projection(arg: &str, vars: &VarSpace) -> Result<(usize, usize), Failure> {
    let parts: Vec<&str> = arg.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Failure::Input(format!(
            "--proj needs two coordinates such as `1,2`, got `{arg}`"
        )));
    }
    let one = |s: &str| -> Result<usize, Failure> {
        if let Ok(k) = s.parse::<usize>() {
            if k == 0 || k > vars.len() {
                return Err(Failure::Input(format!(
                    "--proj index {k} is outside 1..={}",
                    vars.len()
                )));
            }
            return Ok(k - 1);
        }
        vars.position(s)
            .ok_or_else(|| Failure::Input(format!("--proj: unknown variable `{s}`")))
    };
    Ok((one(parts[0])?, one(parts[1])?))
}

fn cmd_shadow(a: &ShadowArgs) -> Result<SdpStatus, Failure> {
    let Problem::Pop(pop) = read_problem(&a.file)? else {
        return Err(Failure::Input("shadow needs a pop file".into()));
    };
    if a.directions == 0 {
        return Err(Failure::Input("--directions must be positive".into()));
    }
    let r = pop_order(&pop, a.order).map_err(input)?;
    let proj = projection(&a.proj, &pop.set.space)?;
    let pts = shadow_support_points(
        &pop.set,
        r,
        &circle_directions(a.directions),
        proj,
        &SolveOptions::default(),
    )
    .map_err(input)?;
    let mut text = String::from("# cx cy sx sy value\n");
    let mut status = SdpStatus::Optimal;
    for p in &pts {
        let row = [
            p.direction[0],
            p.direction[1],
            p.point[0],
            p.point[1],
            p.value,
        ]
        .map(fmt_num);
        text.push_str(&row.join(" "));
        text.push('\n');
        if p.status != SdpStatus::Optimal {
            status = p.status;
        }
    }
    emit(&text, a.out.as_deref())?;
    Ok(status)
}

fn cmd_liouville(a: &LiouvilleArgs) -> Result<SdpStatus, Failure> {
    let Problem::Gmp(g) = read_problem(&a.file)? else {
        return Err(Failure::Input("liouville needs a gmp file".into()));
    };
    let Some(d) = &g.dynamics else {
        return Err(Failure::Input(
            "the problem has no [dynamics] section".into(),
        ));
    };
    let fam = liouville_constraints(d, &g.measures, a.order).map_err(input)?;
    let tx: Vec<String> = d.time.iter().chain(&d.states).cloned().collect();
    let tx = VarSpace::new(tx).map_err(input)?;
    let mut text = format!(
        "# test degree {}{}\n",
        fam.degree,
        if fam.trimmed { " (trimmed)" } else { "" }
    );
    for row in &fam.rows {
        let v = Polynomial::monomial(Exponent::new(row.test.powers().to_vec()), rat(1, 1));
        text.push_str(&format!(
            "{}: {}\n",
            v.to_string_with(&tx),
            format_constraint(&row.constraint, &g.measures)
        ));
    }
    emit(&text, a.out.as_deref())?;
    Ok(SdpStatus::Optimal)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Shadow(a) => cmd_shadow(a),
        Command::Liouville(a) => cmd_liouville(a),
    };
    match result {
        Ok(SdpStatus::Optimal) => ExitCode::SUCCESS,
        Ok(s) => {
            eprintln!("momentlmi: solver status {}", s.name());
            ExitCode::from(2)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("momentlmi: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("momentlmi: {msg}");
            ExitCode::from(2)
        }
    }
}
