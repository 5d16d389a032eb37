//! `ck`: model-problem solves and table generation.
//!
//! Exit codes: 0 when every solve converged, 2 when some did not, 1 on
//! configuration or I/O errors.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use contour_krylov::driver::{
    cg_history, cg_table, general_richardson_table, iterations_table, quadrature_table, richardson_table,
    solve_problem, IterationsOptions, MeshSource, Method, MuChoice, Problem, RunConfig, StopMode,
};
use contour_krylov::fem::{generate_trapezium_mesh, write_mesh, DEFAULT_DIFFUSIVITY};
use contour_krylov::precond::PrecondKind;
use contour_krylov::richardson::InvSegment;
use output::{write_json, write_rows, Format};

#[derive(Parser)]
#[command(name = "ck", version, about = "Contour-integral time stepping with Richardson and CG solvers")]
struct Cli {
    /// Worker threads for independent solves (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Clone)]
struct IntervalArgs {
    /// Smallest eigenvalue of M^{-1}S.
    #[arg(long, default_value_t = 1.01380)]
    lambda1: f64,
    /// Largest eigenvalue of M^{-1}S.
    #[arg(long = "lambdaN", default_value_t = 4006.79)]
    lambda_n: f64,
}

#[derive(Args, Clone)]
struct MeshArgs {
    /// Intervals per unit length of the generated trapezium mesh.
    #[arg(long, default_value_t = 40, conflicts_with = "mesh_files")]
    mesh_m: usize,
    /// Triangle-format `.node` and `.ele` files.
    #[arg(long, num_args = 2, value_names = ["NODE", "ELE"])]
    mesh_files: Option<Vec<PathBuf>>,
    /// Diffusivity.
    #[arg(long, default_value_t = DEFAULT_DIFFUSIVITY)]
    a: f64,
    /// Use the row-sum lumped mass matrix.
    #[arg(long)]
    lumped: bool,
    /// Override the estimated smallest eigenvalue (needs --lambdaN too).
    #[arg(long, requires = "lambda_n")]
    lambda1: Option<f64>,
    /// Override the estimated largest eigenvalue (needs --lambda1 too).
    #[arg(long = "lambdaN", requires = "lambda1")]
    lambda_n: Option<f64>,
}

impl MeshArgs {
    fn source(&self) -> MeshSource {
        match &self.mesh_files {
            Some(f) => MeshSource::Files {
                node: f[0].clone(),
                ele: f[1].clone(),
            },
            None => MeshSource::Generated(self.mesh_m),
        }
    }

    fn lambda_override(&self) -> Option<(f64, f64)> {
        self.lambda1.zip(self.lambda_n)
    }

    fn config(&self, q: usize) -> RunConfig {
        RunConfig {
            q,
            mesh: self.source(),
            diffusivity: self.a,
            lumped: self.lumped,
            lambda_override: self.lambda_override(),
            ..RunConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StopArg {
    /// True error against a direct solve.
    Error,
    /// Residual bound.
    Residual,
}

impl From<StopArg> for StopMode {
    fn from(s: StopArg) -> Self {
        match s {
            StopArg::Error => StopMode::TrueError,
            StopArg::Residual => StopMode::Residual,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SegmentArg {
    Finite,
    Unbounded,
}

/// `none`, `inv`, `ic0` or `sgs:K`.
#[derive(Debug, Clone, Copy)]
struct PrecondArg(Option<PrecondKind>);

fn parse_precond(s: &str) -> Result<PrecondArg, String> {
    if s == "none" {
        return Ok(PrecondArg(None));
    }
    s.parse::<PrecondKind>().map(|k| PrecondArg(Some(k))).map_err(|e| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: contour_krylov::Error| e.to_string())
}

fn parse_mu(s: &str) -> Result<MuChoice, String> {
    s.parse().map_err(|e: contour_krylov::Error| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Quadrature nodes and per-node solver tolerances.
    QuadTable {
        #[arg(long, default_value_t = 20)]
        q: usize,
        #[arg(long, default_value_t = 1e-5)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Richardson parameters: `--table 1` basic and INV, `--table 2` general-preconditioner bounds.
    RichardsonTable {
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        table: u8,
        #[arg(long, default_value_t = 20)]
        q: usize,
        /// Print every node instead of every second one.
        #[arg(long)]
        all: bool,
        /// Image of the spectrum used for the INV parameters (table 1).
        #[arg(long, value_enum, default_value_t = SegmentArg::Unbounded)]
        segment: SegmentArg,
        /// Add columns for this preconditioner built on the generated mesh (table 2).
        #[arg(long, value_parser = parse_precond)]
        precond: Option<PrecondArg>,
        #[arg(long, default_value_t = 40)]
        mesh_m: usize,
        #[command(flatten)]
        interval: IntervalArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// CG reduction factors with and without the INV preconditioner.
    CgTable {
        #[arg(long, default_value_t = 20)]
        q: usize,
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        interval: IntervalArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Iteration counts of several solvers at each quadrature point.
    IterationsTable {
        #[arg(long, default_value_t = 20)]
        q: usize,
        #[arg(long, default_value_t = 1e-5)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, value_enum, default_value_t = StopArg::Error)]
        stop: StopArg,
        /// Symmetric Gauss-Seidel steps for the cg_sgs column.
        #[arg(long, default_value_t = 1)]
        sgs_steps: usize,
        #[arg(long)]
        cold: bool,
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        mesh: MeshArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Solve the model problem and report the error at each time.
    Solve {
        #[arg(long, default_value_t = 20)]
        q: usize,
        /// Output time; repeat for several.
        #[arg(long = "t", default_values_t = [1.0])]
        times: Vec<f64>,
        #[arg(long, default_value = "cg", value_parser = parse_method)]
        method: Method,
        /// none, inv, ic0 or sgs:K.
        #[arg(long, default_value = "inv", value_parser = parse_precond)]
        precond: PrecondArg,
        /// auto or a fixed value.
        #[arg(long, default_value = "auto", value_parser = parse_mu)]
        mu: MuChoice,
        #[arg(long, default_value_t = 1e-5)]
        delta: f64,
        #[arg(long, value_enum, default_value_t = StopArg::Residual)]
        stop: StopArg,
        #[arg(long)]
        cold: bool,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
        /// Per-point CSV (iterations, tolerance, norm).
        #[arg(long)]
        points: Option<PathBuf>,
        #[command(flatten)]
        mesh: MeshArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// CG convergence history at one quadrature point.
    History {
        #[arg(long)]
        j: i64,
        #[arg(long, default_value_t = 20)]
        q: usize,
        /// Use the INV-preconditioned method.
        #[arg(long)]
        inv: bool,
        /// Stop when the error is below this fraction of the solution norm.
        #[arg(long, default_value_t = 1e-10)]
        rel_tol: f64,
        #[arg(long, default_value_t = 2000)]
        max_iter: usize,
        #[command(flatten)]
        mesh: MeshArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write the generated trapezium mesh in Triangle format.
    Mesh {
        #[arg(long, default_value_t = 40)]
        mesh_m: usize,
        #[arg(long)]
        node: PathBuf,
        #[arg(long)]
        ele: PathBuf,
    },
}

#[derive(Serialize)]
struct PointRow {
    j: i64,
    x: f64,
    y: f64,
    mu: Option<f64>,
    tolerance: f64,
    iterations: usize,
    converged: bool,
    norm_w: f64,
}

enum Outcome {
    Done,
    Partial,
}

fn stride(all: bool) -> usize {
    if all {
        1
    } else {
        2
    }
}

fn run(cli: Cli) -> Result<Outcome, String> {
    let err = |e: contour_krylov::Error| e.to_string();
    match cli.command {
        Command::QuadTable { q, delta, t, output } => {
            let rows = quadrature_table(q, delta, t).map_err(err)?;
            write_rows(&rows, output.out.as_deref(), output.format)?;
        }
        Command::RichardsonTable {
            table,
            q,
            all,
            segment,
            precond,
            mesh_m,
            interval,
            output,
        } => {
            let (l1, ln) = (interval.lambda1, interval.lambda_n);
            if table == 1 {
                let segment = match segment {
                    SegmentArg::Finite => InvSegment::Finite,
                    SegmentArg::Unbounded => InvSegment::Unbounded,
                };
                let rows = richardson_table(l1, ln, q, stride(all), segment).map_err(err)?;
                write_rows(&rows, output.out.as_deref(), output.format)?;
            } else {
                let kind = precond.and_then(|p| p.0);
                let problem = match kind {
                    Some(_) => Some(Problem::from_config(&RunConfig {
                        q,
                        mesh: MeshSource::Generated(mesh_m),
                        ..RunConfig::default()
                    }).map_err(err)?),
                    None => None,
                };
                let extra = problem.as_ref().zip(kind);
                let rows = general_richardson_table(l1, ln, q, stride(all), extra).map_err(err)?;
                write_rows(&rows, output.out.as_deref(), output.format)?;
            }
        }
        Command::CgTable { q, all, interval, output } => {
            let rows = cg_table(interval.lambda1, interval.lambda_n, q, stride(all)).map_err(err)?;
            write_rows(&rows, output.out.as_deref(), output.format)?;
        }
        Command::IterationsTable {
            q,
            delta,
            t,
            stop,
            sgs_steps,
            cold,
            all,
            mesh,
            output,
        } => {
            let problem = Problem::from_config(&mesh.config(q)).map_err(err)?;
            let opts = IterationsOptions {
                delta,
                t,
                stop_mode: stop.into(),
                sgs_steps,
                warm_start: !cold,
                ..IterationsOptions::default()
            };
            let rows = iterations_table(&problem, &opts).map_err(err)?;
            let partial = rows
                .iter()
                .any(|r| [r.richardson_inv, r.cg, r.cg_inv, r.cg_ic0, r.cg_sgs].iter().any(Option::is_none));
            let rows: Vec<_> = rows.into_iter().filter(|r| (r.j as usize).is_multiple_of(stride(all))).collect();
            write_rows(&rows, output.out.as_deref(), output.format)?;
            if partial {
                return Ok(Outcome::Partial);
            }
        }
        Command::Solve {
            q,
            times,
            method,
            precond,
            mu,
            delta,
            stop,
            cold,
            max_iter,
            points,
            mesh,
            output,
        } => {
            let cfg = RunConfig {
                times,
                method,
                precond: if method == Method::Direct { None } else { precond.0 },
                mu,
                delta,
                stop_mode: stop.into(),
                warm_start: !cold,
                max_iter,
                ..mesh.config(q)
            };
            let problem = Problem::from_config(&cfg).map_err(err)?;
            log::info!(
                "N = {}, lambda1 = {:.6}, lambdaN = {:.6}",
                problem.disc.dim(),
                problem.lambda1,
                problem.lambda_n
            );
            let sol = solve_problem(&problem, &cfg).map_err(err)?;
            match output.format {
                Format::Csv => write_rows(&sol.errors, output.out.as_deref(), output.format)?,
                Format::Json => write_json(&sol, output.out.as_deref())?,
            }
            if let Some(path) = points {
                let rows: Vec<PointRow> = sol
                    .points
                    .iter()
                    .map(|p| PointRow {
                        j: p.j,
                        x: p.z.re,
                        y: p.z.im,
                        mu: p.mu,
                        tolerance: p.tolerance,
                        iterations: p.iterations,
                        converged: p.converged,
                        norm_w: p.norm_w,
                    })
                    .collect();
                write_rows(&rows, Some(&path), Format::Csv)?;
            }
            if !sol.all_converged {
                return Ok(Outcome::Partial);
            }
        }
        Command::History {
            j,
            q,
            inv,
            rel_tol,
            max_iter,
            mesh,
            output,
        } => {
            let problem = Problem::from_config(&mesh.config(q)).map_err(err)?;
            let (rows, converged) = cg_history(&problem, j, inv, rel_tol, max_iter).map_err(err)?;
            write_rows(&rows, output.out.as_deref(), output.format)?;
            if !converged {
                return Ok(Outcome::Partial);
            }
        }
        Command::Mesh { mesh_m, node, ele } => {
            let mesh = generate_trapezium_mesh(mesh_m).map_err(err)?;
            write_mesh(&mesh, &node, &ele).map_err(err)?;
        }
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => {
            eprintln!("warning: some solves did not converge");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
