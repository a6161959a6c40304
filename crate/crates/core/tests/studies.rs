use maxwell_eem::analysis::{
    data_norms, error_norms, field_norms, interpolate, log_log_slope, stability_ratio, FieldCoefficients,
};
use maxwell_eem::fe_basis::FeSpace;
use maxwell_eem::linsolve::{solve, SolverKind, SolverOptions};
use maxwell_eem::manufactured::{BesselSolution, FieldJet, Manufactured, ProblemParams, VectorField};
use maxwell_eem::mesh::{Mesh, Point3};
use maxwell_eem::quadrature::load_degree;
use maxwell_eem::study::{
    build, choose_m_for_target_nlambda, fit_rate, gnuplot_script, read_csv, run_convergence_study,
    run_pollution_study, run_single, write_csv_file, write_study_outputs, PlotKind, RunConfig, SweepOptions,
    CSV_HEADER,
};
use maxwell_eem::Error;
use num_complex::Complex64;

/// `s * E` for a fixed complex scalar `s`.
struct Scaled<F>(F, Complex64);

impl<F: VectorField> VectorField for Scaled<F> {
    fn jet(&self, x: &Point3) -> FieldJet {
        let mut j = self.0.jet(x);
        j.value *= self.1;
        for row in &mut j.jac {
            for v in row {
                *v *= self.1;
            }
        }
        for m in &mut j.hess {
            for row in m {
                for v in row {
                    *v *= self.1;
                }
            }
        }
        j
    }
}

fn solved<'a>(space: &'a FeSpace, prob: &Manufactured) -> FieldCoefficients<'a> {
    let policy = maxwell_eem::assembly::QuadPolicy::standard(space.p(), prob.params.kappa, space.mesh.h);
    let sys = maxwell_eem::assembly::assemble(space, prob, policy, true).unwrap();
    let rep = solve(&sys.a, &sys.b, &SolverOptions::default()).unwrap();
    assert!(rep.meets_gate());
    FieldCoefficients::new(space, rep.x).unwrap()
}

#[test]
fn interpolation_error_decays_at_order_p() {
    let kappa = 5.0;
    let params = ProblemParams::new(kappa, 1.0).unwrap();
    let field = BesselSolution::new(kappa);
    for p in 1..=3 {
        let ms: &[usize] = if p == 3 { &[2, 4, 6] } else { &[2, 4, 8] };
        let (mut h, mut e) = (Vec::new(), Vec::new());
        for &m in ms {
            let space = FeSpace::new(Mesh::cube(m).unwrap(), p).unwrap();
            let deg = load_degree(p, kappa, space.mesh.h);
            let u = interpolate(&field, &space, deg).unwrap();
            h.push(space.mesh.h);
            e.push(error_norms(&u, &field, &params, deg).unwrap().rel.energy);
        }
        let slope = log_log_slope(&h, &e);
        assert!((slope - p as f64).abs() <= 0.3, "p={p}: slope {slope}, errors {e:?}");
    }
}

#[test]
fn solution_tracks_interpolant_at_low_wave_number() {
    let out = run_single(&RunConfig::new(2, 4, 5.0), None).unwrap();
    let r = &out.record;
    assert!(!r.flagged);
    let ratio = r.rel_energy_sol / r.rel_energy_interp;
    // the Galerkin solution is not the energy-best fit, so it may beat the interpolant
    assert!((0.5..=1.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn triangle_inequality_between_solution_and_interpolant() {
    let params = ProblemParams::new(6.0, 1.0).unwrap();
    let prob = Manufactured::bessel(params);
    let space = FeSpace::new(Mesh::cube(3).unwrap(), 2).unwrap();
    let deg = load_degree(2, 6.0, space.mesh.h);
    let uh = solved(&space, &prob);
    let pi = interpolate(prob.field(), &space, deg).unwrap();
    let diff: Vec<Complex64> = uh.values.iter().zip(&pi.values).map(|(a, b)| a - b).collect();
    let diff = FieldCoefficients::new(&space, diff).unwrap();
    let e_sol = error_norms(&uh, prob.field(), &params, deg).unwrap().abs.energy;
    let e_int = error_norms(&pi, prob.field(), &params, deg).unwrap().abs.energy;
    let gap = field_norms(&diff, &params, deg).unwrap().energy;
    assert!(e_sol <= e_int + gap + 1e-12);
    assert!(e_int <= e_sol + gap + 1e-12);
}

#[test]
fn stability_ratio_is_homogeneous() {
    let params = ProblemParams::new(4.0, 1.0).unwrap();
    let space = FeSpace::new(Mesh::cube(2).unwrap(), 1).unwrap();
    let deg = load_degree(1, 4.0, space.mesh.h);
    let base = Manufactured::bessel(params);
    let uh = solved(&space, &base);
    let r0 = stability_ratio(&uh, &base, deg).unwrap();
    assert!(r0.is_finite() && r0 > 0.0);

    let s = Complex64::new(-2.5, 3.75);
    let scaled = Manufactured::new(params, Scaled(BesselSolution::new(4.0), s));
    let us = FieldCoefficients::new(&space, uh.values.iter().map(|v| v * s).collect()).unwrap();
    let r1 = stability_ratio(&us, &scaled, deg).unwrap();
    assert!((r1 - r0).abs() <= 1e-12 * r0, "{r0} vs {r1}");

    // data scale linearly as well
    let (f0, g0) = data_norms(&space, &base, deg).unwrap();
    let (f1, g1) = data_norms(&space, &scaled, deg).unwrap();
    assert!((f1 - s.norm() * f0).abs() <= 1e-12 * f1);
    assert!((g1 - s.norm() * g0).abs() <= 1e-12 * g1);

    assert_eq!(stability_ratio(&FieldCoefficients::zero(&space), &base, deg).unwrap(), 0.0);
}

#[test]
fn stability_ratio_is_bounded_across_wave_numbers() {
    // p = 1 with about 12 points per wavelength; the largest case needs the
    // iterative solver to stay within memory.
    let mut ratios = Vec::new();
    for kappa in [5.0, 10.0, 20.0] {
        let m = choose_m_for_target_nlambda(kappa, 1, 12.0, 100_000).unwrap();
        let mut cfg = RunConfig::new(1, m, kappa);
        if kappa > 15.0 {
            cfg.solver.kind = SolverKind::Gmres;
        }
        let r = run_single(&cfg, None).unwrap().record;
        assert!(!r.flagged, "k={kappa}");
        assert!((r.nlambda - 12.0).abs() < 1.5);
        ratios.push(r.stab_ratio);
    }
    let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
    assert!(hi / lo <= 3.0, "ratios {ratios:?}");
}

#[test]
fn smallest_run_is_well_formed_and_deterministic() {
    let cfg = RunConfig::new(1, 1, 5.0);
    let a = run_single(&cfg, None).unwrap();
    let b = run_single(&cfg, None).unwrap();
    assert_eq!(a.record.dof, 38);
    assert!(a.record.stab_ratio.is_finite());
    assert!((a.record.nlambda - 2.0 * std::f64::consts::PI * 38f64.cbrt() / 5.0).abs() < 1e-12);
    assert_eq!(a.record.without_timings(), b.record.without_timings());
    let (space, _, sys) = build(&cfg).unwrap();
    assert_eq!((space.total_dofs(), sys.dim()), (38, 38));
}

#[test]
fn vtk_export_writes_one_value_per_element() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("field.vtk");
    run_single(&RunConfig::new(1, 2, 3.0), Some(&path)).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("CELL_DATA 48"));
    assert!(text.contains("E_h_magnitude"));
}

#[test]
fn csv_files_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("conv.csv");
    let runs = run_convergence_study(&[1, 2], &[3.3], |_| vec![1, 2], &SweepOptions::default()).unwrap();
    let recs: Vec<_> = runs.into_iter().map(|r| r.record).collect();
    write_study_outputs(&recs, &csv, PlotKind::Convergence).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    let back = read_csv(std::fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(back, recs);
    let gp = std::fs::read_to_string(dir.path().join("conv.gp")).unwrap();
    assert!(gp.contains("conv.csv"));
    assert!(gp.contains("logscale"));

    let single = dir.path().join("single.csv");
    write_csv_file(&recs[..1], &single).unwrap();
    assert_eq!(read_csv(std::fs::File::open(&single).unwrap()).unwrap(), recs[..1]);
}

#[test]
fn gnuplot_script_names_every_order() {
    let s = gnuplot_script(PlotKind::Pollution, "poll.csv", &[1, 2, 3], &[2.0, 6.0]);
    for p in 1..=3 {
        assert!(s.contains(&format!("p={p}")), "{s}");
    }
}

#[test]
fn mesh_choice_for_points_per_wavelength() {
    assert_eq!(choose_m_for_target_nlambda(10.0, 1, 10.0, 300_000).unwrap(), 7);
    assert_eq!(choose_m_for_target_nlambda(10.0, 1, 1e-9, 300_000).unwrap(), 1);
    let mut prev = 0;
    for k in [1.0, 2.0, 5.0, 9.0, 17.0, 30.0] {
        let m = choose_m_for_target_nlambda(k, 2, 8.0, 10_000_000).unwrap();
        assert!(m >= prev);
        prev = m;
    }
    assert!(matches!(
        choose_m_for_target_nlambda(200.0, 1, 10.0, 300_000),
        Err(Error::MeshCap { .. })
    ));
}

#[test]
fn pollution_sweep_keeps_configuration_order() {
    let runs = run_pollution_study(&[2, 1], &[4.0, 2.0], 6.0, &SweepOptions::default()).unwrap();
    let keys: Vec<_> = runs.iter().map(|r| (r.record.p, r.record.kappa)).collect();
    assert_eq!(keys, vec![(2, 4.0), (2, 2.0), (1, 4.0), (1, 2.0)]);
    for r in &runs {
        assert!(r.record.nlambda >= 6.0);
        let ratio = r.record.rel_energy_sol / r.record.rel_energy_interp;
        assert!(ratio <= 1.5, "{:?}", r.record);
    }
    assert!(run_pollution_study(&[], &[4.0], 6.0, &SweepOptions::default()).is_err());
    assert!(run_pollution_study(&[1], &[-1.0], 6.0, &SweepOptions::default()).is_err());
}

#[test]
fn rate_fit_ignores_flagged_rows() {
    let runs = run_convergence_study(&[1], &[2.0], |_| vec![2, 3, 4], &SweepOptions::default()).unwrap();
    let mut recs: Vec<_> = runs.into_iter().map(|r| r.record).collect();
    let slope = fit_rate(&recs, |r| r.rel_energy_sol);
    let mut bogus = recs[0].clone();
    bogus.h = 1e-6;
    bogus.rel_energy_sol = 1.0;
    bogus.flagged = true;
    recs.push(bogus);
    assert_eq!(fit_rate(&recs, |r| r.rel_energy_sol), slope);
}

#[test]
fn pollution_appears_at_moderate_wave_number() {
    // p = 1, k = 20, N_lambda about 7.5: the discrete solution already lags
    // its interpolant clearly.
    let r = run_single(&RunConfig::new(1, 10, 20.0), None).unwrap().record;
    assert!(!r.flagged);
    let ratio = r.rel_energy_sol / r.rel_energy_interp;
    assert!(ratio >= 1.5, "ratio {ratio}");
}

#[test]
#[ignore = "no feasible mesh shows the factor 3 gap at k = 50 within memory limits"]
fn pollution_at_high_wave_number_and_coarse_mesh() {
    // Meshes with M <= 10 leave both errors near 100 %; the gap opens only
    // once the interpolant resolves the wave (M of order 25 and above).
    let r = run_single(&RunConfig::new(1, 25, 50.0), None).unwrap().record;
    assert!(r.rel_energy_sol / r.rel_energy_interp >= 3.0);
}
