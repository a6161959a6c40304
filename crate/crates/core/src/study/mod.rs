//! Experiment orchestration: single solves, pollution and convergence
//! sweeps, CSV and gnuplot output.

pub mod acceptance;

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{error_norms, interpolate, log_log_slope, stability_ratio, ErrorReport, FieldCoefficients};
use crate::assembly::{assemble, AssembledSystem, QuadPolicy};
use crate::error::{Error, Result};
use crate::fe_basis::{dof_formula, FeSpace};
use crate::linsolve::{solve, SolverOptions};
use crate::manufactured::{Manufactured, ProblemParams};
use crate::mesh::Mesh;

/// Default guard on the number of unknowns for a single solve.
pub const DEFAULT_MAX_DOFS: u128 = 300_000;

pub const CSV_HEADER: [&str; 18] = [
    "p",
    "M",
    "kappa",
    "lambda",
    "dof",
    "nlambda",
    "h",
    "rel_energy_sol",
    "rel_energy_interp",
    "rel_l2_sol",
    "rel_l2_interp",
    "rel_curl_sol",
    "rel_trace_sol",
    "stab_ratio",
    "residual",
    "assemble_s",
    "solve_s",
    "flagged",
];

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub p: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub kappa: f64,
    pub lambda: f64,
    pub dof: usize,
    pub nlambda: f64,
    pub h: f64,
    pub rel_energy_sol: f64,
    pub rel_energy_interp: f64,
    pub rel_l2_sol: f64,
    pub rel_l2_interp: f64,
    pub rel_curl_sol: f64,
    pub rel_trace_sol: f64,
    pub stab_ratio: f64,
    pub residual: f64,
    pub assemble_s: f64,
    pub solve_s: f64,
    pub flagged: bool,
}

impl StudyRecord {
    /// The record with timing columns zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        Self {
            assemble_s: 0.0,
            solve_s: 0.0,
            ..self.clone()
        }
    }
}

/// Parameters of one assemble-solve-measure cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub p: usize,
    pub m: usize,
    pub kappa: f64,
    pub lambda: f64,
    pub quad_degree: Option<usize>,
    pub solver: SolverOptions,
    pub max_dofs: u128,
}

impl RunConfig {
    pub fn new(p: usize, m: usize, kappa: f64) -> Self {
        Self {
            p,
            m,
            kappa,
            lambda: 1.0,
            quad_degree: None,
            solver: SolverOptions::default(),
            max_dofs: DEFAULT_MAX_DOFS,
        }
    }
}

/// Full result of a run; `record` is what goes to CSV.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: StudyRecord,
    pub policy: QuadPolicy,
    /// `None` when the solve failed outright.
    pub solution_errors: Option<ErrorReport>,
    pub interpolant_errors: ErrorReport,
}

/// `2 pi dof^{1/3} / k`.
pub fn nlambda(dof: f64, kappa: f64) -> f64 {
    2.0 * PI * dof.cbrt() / kappa
}

/// Smallest `M` whose DOF count reaches `target` points per wavelength.
pub fn choose_m_for_target_nlambda(kappa: f64, p: usize, target: f64, max_dofs: u128) -> Result<usize> {
    if target.is_nan() || target <= 0.0 || kappa.is_nan() || kappa <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "target N_lambda and wave number must be positive (got {target}, {kappa})"
        )));
    }
    let cap = (1..)
        .take_while(|&m| dof_formula(m as u128, p as u128) <= max_dofs)
        .last()
        .unwrap_or(0);
    // N_lambda is increasing in M; the target needs dof >= (target k / 2 pi)^3
    for m in 1..=cap {
        if nlambda(dof_formula(m as u128, p as u128) as f64, kappa) >= target {
            return Ok(m);
        }
    }
    let mut needed = cap.max(1);
    while nlambda(dof_formula(needed as u128, p as u128) as f64, kappa) < target {
        needed += 1;
    }
    Err(Error::MeshCap { needed, cap })
}

fn check_config(cfg: &RunConfig) -> Result<()> {
    if cfg.m == 0 {
        return Err(Error::ZeroSubdivision(0));
    }
    let dofs = dof_formula(cfg.m as u128, cfg.p as u128);
    if dofs > cfg.max_dofs {
        return Err(Error::InvalidConfig(format!(
            "{dofs} unknowns exceed the cap of {}",
            cfg.max_dofs
        )));
    }
    Ok(())
}

/// Builds the space and assembles the system for `cfg`.
pub fn build(cfg: &RunConfig) -> Result<(FeSpace, Manufactured, AssembledSystem)> {
    check_config(cfg)?;
    let space = FeSpace::new(Mesh::cube(cfg.m)?, cfg.p)?;
    let params = ProblemParams::new(cfg.kappa, cfg.lambda)?;
    let problem = Manufactured::bessel(params);
    let policy = QuadPolicy::standard(cfg.p, cfg.kappa, space.mesh.h).with_override(cfg.p, cfg.quad_degree);
    let sys = assemble(&space, &problem, policy, true)?;
    Ok((space, problem, sys))
}

/// One assemble-solve-measure cycle. Writes `|E_h|` per element to `vtk`
/// when a path is given.
pub fn run_single(cfg: &RunConfig, vtk: Option<&Path>) -> Result<RunOutcome> {
    check_config(cfg)?;
    let t0 = Instant::now();
    let (space, problem, sys) = build(cfg)?;
    let assemble_s = t0.elapsed().as_secs_f64();
    let policy = sys.policy;
    let params = problem.params;

    let interp = interpolate(problem.field(), &space, policy.load_degree)?;
    let interpolant_errors = error_norms(&interp, problem.field(), &params, policy.load_degree)?;

    let dof = space.total_dofs();
    let mut record = StudyRecord {
        p: cfg.p,
        m: cfg.m,
        kappa: cfg.kappa,
        lambda: cfg.lambda,
        dof,
        nlambda: nlambda(dof as f64, cfg.kappa),
        h: space.mesh.h,
        rel_energy_sol: f64::NAN,
        rel_energy_interp: interpolant_errors.rel.energy,
        rel_l2_sol: f64::NAN,
        rel_l2_interp: interpolant_errors.rel.l2,
        rel_curl_sol: f64::NAN,
        rel_trace_sol: f64::NAN,
        stab_ratio: f64::NAN,
        residual: f64::NAN,
        assemble_s,
        solve_s: f64::NAN,
        flagged: true,
    };

    let t1 = Instant::now();
    let report = match solve(&sys.a, &sys.b, &cfg.solver) {
        Ok(r) => r,
        Err(Error::SingularMatrix { .. } | Error::NotConverged { .. } | Error::Factorization(_)) => {
            record.solve_s = t1.elapsed().as_secs_f64();
            return Ok(RunOutcome {
                record,
                policy,
                solution_errors: None,
                interpolant_errors,
            });
        }
        Err(e) => return Err(e),
    };
    record.solve_s = report.wall_time.as_secs_f64();
    record.residual = report.relative_residual;
    record.flagged = !report.meets_gate();

    let uh = FieldCoefficients::new(&space, report.x)?;
    let errs = error_norms(&uh, problem.field(), &params, policy.load_degree)?;
    record.rel_energy_sol = errs.rel.energy;
    record.rel_l2_sol = errs.rel.l2;
    record.rel_curl_sol = errs.rel.curl;
    record.rel_trace_sol = errs.rel.trace;
    record.stab_ratio = stability_ratio(&uh, &problem, policy.load_degree)?;

    if let Some(path) = vtk {
        let mags = uh.centroid_magnitudes();
        let mut out = BufWriter::new(File::create(path)?);
        space.mesh.write_vtk(&mut out, Some(("E_h_magnitude", &mags)))?;
        out.flush()?;
    }
    Ok(RunOutcome {
        record,
        policy,
        solution_errors: Some(errs),
        interpolant_errors,
    })
}

/// Settings shared by the sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub lambda: f64,
    pub solver: SolverOptions,
    pub max_dofs: u128,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            solver: SolverOptions::default(),
            max_dofs: DEFAULT_MAX_DOFS,
        }
    }
}

impl SweepOptions {
    fn run(&self, p: usize, m: usize, kappa: f64) -> RunConfig {
        RunConfig {
            lambda: self.lambda,
            solver: self.solver,
            max_dofs: self.max_dofs,
            ..RunConfig::new(p, m, kappa)
        }
    }
}

/// One run per `(p, kappa)` with `M` chosen for the target points per
/// wavelength, in configuration order.
pub fn run_pollution_study(
    ps: &[usize],
    kappas: &[f64],
    target_nlambda: f64,
    opts: &SweepOptions,
) -> Result<Vec<RunOutcome>> {
    nonempty(ps, kappas)?;
    let mut out = Vec::new();
    for &p in ps {
        for &k in kappas {
            let m = choose_m_for_target_nlambda(k, p, target_nlambda, opts.max_dofs)?;
            out.push(run_single(&opts.run(p, m, k), None)?);
        }
    }
    Ok(out)
}

/// One run per `(p, kappa, M)`, in configuration order. `ms_for` gives the
/// `M` list for each order.
pub fn run_convergence_study(
    ps: &[usize],
    kappas: &[f64],
    ms_for: impl Fn(usize) -> Vec<usize>,
    opts: &SweepOptions,
) -> Result<Vec<RunOutcome>> {
    nonempty(ps, kappas)?;
    let mut out = Vec::new();
    for &p in ps {
        for &k in kappas {
            let ms = ms_for(p);
            if ms.is_empty() {
                return Err(Error::InvalidConfig("empty M list".into()));
            }
            for m in ms {
                out.push(run_single(&opts.run(p, m, k), None)?);
            }
        }
    }
    Ok(out)
}

fn nonempty(ps: &[usize], kappas: &[f64]) -> Result<()> {
    if ps.is_empty() || kappas.is_empty() {
        return Err(Error::InvalidConfig("empty order or wave number list".into()));
    }
    if let Some(k) = kappas.iter().find(|k| k.is_nan() || **k <= 0.0) {
        return Err(Error::InvalidConfig(format!("wave number must be positive, got {k}")));
    }
    Ok(())
}

/// Least-squares slope of `log(error)` against `log(h)` over unflagged
/// records; `metric` picks the error column.
pub fn fit_rate(records: &[StudyRecord], metric: impl Fn(&StudyRecord) -> f64) -> f64 {
    let (h, e): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter(|r| !r.flagged)
        .map(|r| (r.h, metric(r)))
        .unzip();
    log_log_slope(&h, &e)
}

pub fn write_csv<W: Write>(records: &[StudyRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<StudyRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::InvalidConfig(format!("unexpected CSV header: {headers:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_csv_file(records: &[StudyRecord], path: &Path) -> Result<()> {
    write_csv(records, BufWriter::new(File::create(path)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Relative errors against the wave number at fixed points per wavelength.
    Pollution,
    /// Relative errors against points per wavelength.
    Convergence,
}

/// Gnuplot script that plots `csv_name` (resolved relative to the script):
/// one solution and one interpolant curve per order, and per wave number
/// for convergence plots.
pub fn gnuplot_script(kind: PlotKind, csv_name: &str, ps: &[usize], kappas: &[f64]) -> String {
    let (x, xlabel, title) = match kind {
        PlotKind::Pollution => ("kappa", "wave number", "relative energy error at fixed N_lambda"),
        PlotKind::Convergence => ("nlambda", "N_lambda (DOFs per wavelength)", "relative energy error"),
    };
    let png = csv_name.trim_end_matches(".csv");
    let mut s = format!(
        "set datafile separator ','\nset key autotitle columnhead\nset logscale xy\nset key left bottom\nset grid\n\
         set xlabel '{xlabel}'\nset ylabel 'relative error'\nset title '{title}'\n\
         set terminal pngcairo size 900,650\nset output '{png}.png'\n"
    );
    let groups: Vec<(String, String)> = match kind {
        PlotKind::Pollution => ps
            .iter()
            .map(|p| (format!("column('p')=={p}"), format!("p={p}")))
            .collect(),
        PlotKind::Convergence => ps
            .iter()
            .flat_map(|p| {
                kappas
                    .iter()
                    .map(move |k| (format!("column('p')=={p} && column('kappa')=={k}"), format!("p={p}, k={k}")))
            })
            .collect(),
    };
    let mut curves = Vec::new();
    for (cond, label) in &groups {
        curves.push(format!(
            "'{csv_name}' using ({cond} ? column('{x}') : 1/0):(column('rel_energy_sol')) with linespoints title '{label}, FE solution'"
        ));
        curves.push(format!(
            "'{csv_name}' using ({cond} ? column('{x}') : 1/0):(column('rel_energy_interp')) with lines dt 2 title '{label}, interpolant'"
        ));
    }
    s.push_str("plot ");
    s.push_str(&curves.join(", \\\n     "));
    s.push('\n');
    s
}

/// Writes the CSV and a sibling `.gp` script.
pub fn write_study_outputs(records: &[StudyRecord], csv_path: &Path, kind: PlotKind) -> Result<()> {
    write_csv_file(records, csv_path)?;
    let mut ps: Vec<usize> = records.iter().map(|r| r.p).collect();
    ps.sort_unstable();
    ps.dedup();
    let mut kappas: Vec<f64> = Vec::new();
    for r in records {
        if !kappas.contains(&r.kappa) {
            kappas.push(r.kappa);
        }
    }
    let name = csv_path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::InvalidConfig(format!("bad CSV path {}", csv_path.display())))?;
    std::fs::write(csv_path.with_extension("gp"), gnuplot_script(kind, name, &ps, &kappas))?;
    Ok(())
}
