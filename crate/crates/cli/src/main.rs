//! `toricstab`: batch front end for the stability toolkit.

mod job;
mod output;
mod sweep;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use job::{parse_resolution, JobSpec};
use toricstab::Error;

#[derive(Parser)]
#[command(name = "toricstab", version, about = "Stability margins, destabilizers and Abreu solves on Delzant polytopes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// LP stability margin over convex PL functions
    Margin(JobArgs),
    /// Sign of L_A on one PL function
    Witness(JobArgs),
    /// L_A of the lattice roundings u_k for k = 1..k_max
    KhatScan(JobArgs),
    /// Optimal destabilizer on a mesh
    Destabilize(JobArgs),
    /// Abreu operator residual of a potential
    AbreuResidual(JobArgs),
    /// Closed-form 1-D Abreu solve
    #[command(name = "solve-1d")]
    Solve1d(JobArgs),
    /// Continuity-method 2-D Abreu solve
    #[command(name = "solve-2d")]
    Solve2d(JobArgs),
    /// L_A, Mabuchi, norms or the extremal affine function
    Functional(JobArgs),
    /// Legendre transform on a box grid
    Legendre(JobArgs),
    /// Truncation u_h at level h
    Truncate(JobArgs),
    /// Run a job file (or the `job` field of a report)
    Run(RunArgs),
    /// Run a templated job over a parameter grid and tabulate
    Sweep(SweepArgs),
}

#[derive(Args, Clone, Debug, Default)]
struct JobArgs {
    /// Polytope JSON file
    #[arg(long)]
    polytope: Option<String>,
    /// Target scalar field A
    #[arg(long = "A")]
    a: Option<String>,
    /// Positive weight 𝔻
    #[arg(long = "D")]
    d: Option<String>,
    /// Hessian weight h_G (A is then read as S/h_G)
    #[arg(long = "hG")]
    hg: Option<String>,
    /// Convex function or potential: pl:max(...), poly:<expr>, guillemin[+<expr>], JSON or @file
    #[arg(long)]
    u: Option<String>,
    /// Mesh resolution: 64, 1/64 or 0.015625
    #[arg(long, value_parser = parse_resolution)]
    mesh: Option<f64>,
    #[arg(long)]
    rays: Option<usize>,
    #[arg(long)]
    k_max: Option<u64>,
    /// Comma-separated seeds
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Comma-separated resolutions for the boundedness trace
    #[arg(long, value_delimiter = ',', value_parser = parse_resolution)]
    trace: Option<Vec<f64>>,
    #[arg(long)]
    path_steps: Option<usize>,
    /// Abreu grid intervals per axis
    #[arg(long)]
    cells: Option<usize>,
    /// Polynomial degree of the 2-D correction
    #[arg(long)]
    degree: Option<usize>,
    /// Truncation level
    #[arg(long)]
    h: Option<f64>,
    /// functional: linear, mabuchi, norm, plain-norm, w or extremal
    #[arg(long)]
    which: Option<String>,
    /// Legendre box half-width
    #[arg(long)]
    x_box: Option<f64>,
    /// Legendre nodes per axis
    #[arg(long)]
    x_count: Option<usize>,
    /// json or csv
    #[arg(long)]
    format: Option<String>,
    /// Report path (stdout when absent)
    #[arg(long, short)]
    output: Option<String>,
    /// CSV of w, det ∇²u and 𝒮(u) at the grid nodes
    #[arg(long)]
    dump_fields: Option<String>,
    /// Write the solved potential to this file
    #[arg(long)]
    potential_out: Option<String>,
}

impl JobArgs {
    fn into_job(self, command: &str) -> JobSpec {
        JobSpec {
            command: command.into(),
            polytope: self.polytope,
            polytope_data: None,
            a: self.a,
            d: self.d,
            hg: self.hg,
            u: self.u,
            mesh: self.mesh,
            rays: self.rays,
            k_max: self.k_max,
            seeds: self.seeds,
            trace: self.trace,
            path_steps: self.path_steps,
            cells: self.cells,
            degree: self.degree,
            h: self.h,
            which: self.which,
            x_box: self.x_box,
            x_count: self.x_count,
            quad_order: None,
            format: self.format,
            output: self.output,
            dump_fields: self.dump_fields,
            potential_out: self.potential_out,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Job JSON, or a report containing one
    #[arg(long)]
    job: String,
    /// Overrides the job's output path
    #[arg(long, short)]
    output: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// Parameter name: `{name}` in A/D/hG/u, or a numeric option (mesh, h, cells, ...)
    #[arg(long)]
    param: String,
    /// `start:stop:step` (inclusive) or a comma-separated list
    #[arg(long, allow_hyphen_values = true)]
    values: String,
    /// CSV table path (stdout when absent)
    #[arg(long, short)]
    output: Option<String>,
    #[command(subcommand)]
    template: Template,
}

#[derive(Subcommand)]
enum Template {
    Margin(JobArgs),
    Witness(JobArgs),
    KhatScan(JobArgs),
    Destabilize(JobArgs),
    AbreuResidual(JobArgs),
    #[command(name = "solve-1d")]
    Solve1d(JobArgs),
    #[command(name = "solve-2d")]
    Solve2d(JobArgs),
    Functional(JobArgs),
    Legendre(JobArgs),
    Truncate(JobArgs),
}

impl Template {
    fn into_job(self) -> JobSpec {
        match self {
            Template::Margin(a) => a.into_job("margin"),
            Template::Witness(a) => a.into_job("witness"),
            Template::KhatScan(a) => a.into_job("khat-scan"),
            Template::Destabilize(a) => a.into_job("destabilize"),
            Template::AbreuResidual(a) => a.into_job("abreu-residual"),
            Template::Solve1d(a) => a.into_job("solve-1d"),
            Template::Solve2d(a) => a.into_job("solve-2d"),
            Template::Functional(a) => a.into_job("functional"),
            Template::Legendre(a) => a.into_job("legendre"),
            Template::Truncate(a) => a.into_job("truncate"),
        }
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(1)
}

fn run_job(job: JobSpec) -> ExitCode {
    let job = match job.resolve() {
        Ok(j) => j,
        Err(e) => return fail(&e),
    };
    let outcome = job::run(&job);
    if let Some(e) = &outcome.error {
        eprintln!("error: {e}");
        // a failed continuation still has a history worth keeping
        if outcome.result.get("error").is_some() {
            return ExitCode::from(1);
        }
    }
    match output::write_report(&job, &outcome) {
        Ok(()) => ExitCode::from(outcome.exit as u8),
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Margin(a) => run_job(a.into_job("margin")),
        Command::Witness(a) => run_job(a.into_job("witness")),
        Command::KhatScan(a) => run_job(a.into_job("khat-scan")),
        Command::Destabilize(a) => run_job(a.into_job("destabilize")),
        Command::AbreuResidual(a) => run_job(a.into_job("abreu-residual")),
        Command::Solve1d(a) => run_job(a.into_job("solve-1d")),
        Command::Solve2d(a) => run_job(a.into_job("solve-2d")),
        Command::Functional(a) => run_job(a.into_job("functional")),
        Command::Legendre(a) => run_job(a.into_job("legendre")),
        Command::Truncate(a) => run_job(a.into_job("truncate")),
        Command::Run(r) => match output::load_job(&r.job) {
            Ok(mut job) => {
                if r.output.is_some() {
                    job.output = r.output;
                }
                run_job(job)
            }
            Err(e) => fail(&e),
        },
        Command::Sweep(s) => {
            let template = s.template.into_job();
            match sweep::sweep(template, &s.param, &s.values) {
                Ok(table) => match output::write_sweep(&table, s.output.as_deref()) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => fail(&e),
                },
                Err(e) => fail(&e),
            }
        }
    }
}
