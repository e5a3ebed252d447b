use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fmg_eig::eigsolver::SolverConfig;
use fmg_eig::harness::{run_study, write_csv, MeshSource, ProblemKind, ProblemSpec, StudyOptions};
use fmg_eig::mesh::build_hierarchy;
use fmg_eig::multigrid::build_mg_context;
use fmg_eig::Error;

#[derive(Parser)]
#[command(name = "fmg-eig", version, about = "Full multigrid finite element eigensolver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study and write a CSV table.
    Run(RunArgs),
    /// Write the finest-level stiffness and mass matrices as MatrixMarket files.
    Export(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Problem {
    Model,
    General,
}

impl From<Problem> for ProblemKind {
    fn from(p: Problem) -> Self {
        match p {
            Problem::Model => ProblemKind::Model,
            Problem::General => ProblemKind::General,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "model")]
    problem: Problem,
    /// Coarse mesh: a mesh file or `square:NX`.
    #[arg(long, default_value = "square:8")]
    mesh: String,
    #[arg(long, default_value_t = 5)]
    levels: usize,
    /// Number of eigenpairs.
    #[arg(long, default_value_t = 1)]
    nev: usize,
    /// Multigrid cycles per correction step.
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Correction steps per level.
    #[arg(long, default_value_t = 2)]
    p: usize,
    /// Pre- and post-smoothing steps.
    #[arg(long, default_value_t = 2)]
    smooth: usize,
    /// Level whose space is used as the coarse correction space.
    #[arg(long, default_value_t = 0)]
    coarse_index: usize,
    /// Also run the reference solver on every level.
    #[arg(long)]
    compare_direct: bool,
    /// Tolerance of the reference solver.
    #[arg(long, default_value_t = 1e-10)]
    direct_tol: f64,
    #[arg(long)]
    out: PathBuf,
    /// Write 0 in the wall-time column so repeated runs are byte-identical.
    #[arg(long)]
    seed_free: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long, value_enum, default_value = "model")]
    problem: Problem,
    #[arg(long, default_value = "square:8")]
    mesh: String,
    #[arg(long, default_value_t = 1)]
    levels: usize,
    /// Output directory for `stiffness.mtx` and `mass.mtx`.
    #[arg(long)]
    dir: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 4,
        Error::InvalidArgument(_) | Error::Parse { .. } | Error::Sizing { .. } | Error::LevelOutOfRange { .. } => 2,
        _ => 3,
    }
}

fn run(args: RunArgs) -> Result<(), Error> {
    let source: MeshSource = args.mesh.parse()?;
    let coarse = source.load()?;
    let spec = ProblemSpec::new(args.problem.into(), args.nev);
    let opts = StudyOptions {
        n_levels: args.levels,
        config: SolverConfig {
            q: args.nev,
            m: args.m,
            p: args.p,
            nu: args.smooth,
            coarse_index: args.coarse_index,
            ..SolverConfig::default()
        },
        compare_direct: args.compare_direct,
        direct_tol: args.direct_tol,
    };
    let study = run_study(&spec, coarse, &opts)?;
    if study.reference_missing {
        eprintln!("warning: no reference eigenvalues available; error columns left empty");
    }
    let file = File::create(&args.out)?;
    write_csv(BufWriter::new(file), &study.rows, !args.seed_free)?;
    Ok(())
}

fn export(args: ExportArgs) -> Result<(), Error> {
    let coarse = args.mesh.parse::<MeshSource>()?.load()?;
    let hierarchy = build_hierarchy(coarse, args.levels)?;
    let spec = ProblemSpec::new(args.problem.into(), 1);
    let ctx = build_mg_context(&hierarchy, spec.coefficients.as_ref(), 1)?;
    let finest = ctx.finest_level();
    std::fs::create_dir_all(&args.dir)?;
    std::fs::write(args.dir.join("stiffness.mtx"), ctx.stiffness(finest).to_matrix_market())?;
    std::fs::write(args.dir.join("mass.mtx"), ctx.mass(finest).to_matrix_market())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Export(args) => export(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
