use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use maxwell_eem::linsolve::{SolverKind, SolverOptions};
use maxwell_eem::study::acceptance::{run_all, run_criterion, AcceptanceConfig};
use maxwell_eem::study::{
    build, run_convergence_study, run_pollution_study, run_single, write_csv, write_study_outputs,
    PlotKind, RunConfig, StudyRecord, SweepOptions, DEFAULT_MAX_DOFS,
};
use maxwell_eem::Result;

/// Edge-element solver and study harness for time-harmonic Maxwell problems
/// with an impedance boundary condition on the unit cube.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One assemble-solve-measure cycle; prints a CSV row.
    Solve(SolveArgs),
    /// Parameter sweeps writing CSV and a gnuplot script.
    #[command(subcommand)]
    Study(StudyCommand),
    /// Runs the acceptance suite.
    Acceptance {
        /// Only these criteria (comma separated ids).
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
        #[arg(long, default_value_t = AcceptanceConfig::default().seed)]
        seed: u64,
    },
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value = "lu")]
    solver: SolverKind,
    /// GMRES relative residual tolerance.
    #[arg(long, default_value_t = 1e-10)]
    solver_tol: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Largest admissible number of unknowns.
    #[arg(long, default_value_t = DEFAULT_MAX_DOFS)]
    max_dofs: u128,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            kind: self.solver,
            tol: self.solver_tol,
            ..SolverOptions::default()
        }
    }

    fn sweep(&self) -> SweepOptions {
        SweepOptions {
            lambda: self.lambda,
            solver: self.options(),
            max_dofs: self.max_dofs,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    p: usize,
    #[arg(long = "M")]
    m: usize,
    #[arg(long)]
    kappa: f64,
    /// Quadrature degree for data and error integrals.
    #[arg(long)]
    quad_degree: Option<usize>,
    /// VTK file receiving |E_h| per element.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Matrix Market dump of the system matrix.
    #[arg(long)]
    matrix_market: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Subcommand)]
enum StudyCommand {
    /// Errors against the wave number at fixed points per wavelength.
    Pollution {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        p: Vec<usize>,
        #[arg(long, default_value_t = 10.0)]
        nlambda: f64,
        #[arg(long)]
        kappa_min: f64,
        #[arg(long)]
        kappa_max: f64,
        #[arg(long, default_value_t = 4.0)]
        kappa_step: f64,
        #[arg(long)]
        csv: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Errors against mesh refinement at fixed wave numbers.
    Convergence {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        p: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        kappa: Vec<f64>,
        #[arg(long = "M", value_delimiter = ',')]
        m: Vec<usize>,
        #[arg(long)]
        csv: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

fn kappa_sweep(min: f64, max: f64, step: f64) -> Vec<f64> {
    if step.is_nan() || step <= 0.0 || max.is_nan() || min.is_nan() || max < min {
        return Vec::new();
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| min + i as f64 * step).collect()
}

fn print_records(records: &[StudyRecord]) -> Result<()> {
    write_csv(records, io::stdout().lock())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve(a) => {
            let cfg = RunConfig {
                lambda: a.solver.lambda,
                quad_degree: a.quad_degree,
                solver: a.solver.options(),
                max_dofs: a.solver.max_dofs,
                ..RunConfig::new(a.p, a.m, a.kappa)
            };
            if let Some(path) = &a.matrix_market {
                let (_, _, sys) = build(&cfg)?;
                let mut out = BufWriter::new(File::create(path)?);
                sys.write_matrix_market(&mut out)?;
                out.flush()?;
            }
            let outcome = run_single(&cfg, a.out.as_deref())?;
            print_records(std::slice::from_ref(&outcome.record))?;
            Ok(!outcome.record.flagged)
        }
        Command::Study(StudyCommand::Pollution {
            p,
            nlambda,
            kappa_min,
            kappa_max,
            kappa_step,
            csv,
            solver,
        }) => {
            let kappas = kappa_sweep(kappa_min, kappa_max, kappa_step);
            let runs = run_pollution_study(&p, &kappas, nlambda, &solver.sweep())?;
            let recs: Vec<StudyRecord> = runs.into_iter().map(|r| r.record).collect();
            write_study_outputs(&recs, &csv, PlotKind::Pollution)?;
            print_records(&recs)?;
            Ok(true)
        }
        Command::Study(StudyCommand::Convergence {
            p,
            kappa,
            m,
            csv,
            solver,
        }) => {
            let runs = run_convergence_study(&p, &kappa, |_| m.clone(), &solver.sweep())?;
            let recs: Vec<StudyRecord> = runs.into_iter().map(|r| r.record).collect();
            write_study_outputs(&recs, &csv, PlotKind::Convergence)?;
            print_records(&recs)?;
            Ok(true)
        }
        Command::Acceptance { only, seed } => {
            let cfg = AcceptanceConfig {
                seed,
                ..AcceptanceConfig::default()
            };
            let results = if only.is_empty() {
                run_all(&cfg, |r| println!("{r}"))
            } else {
                only.iter()
                    .filter_map(|&id| run_criterion(id, &cfg))
                    .inspect(|r| println!("{r}"))
                    .collect()
            };
            let passed = results.iter().filter(|r| r.passed).count();
            println!("acceptance: {passed}/{} passed", results.len());
            Ok(passed == results.len())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
