//! The acceptance suite: one check per criterion, each reporting pass/fail
//! with the measured quantities.

use std::time::Instant;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    build, fit_rate, run_convergence_study, run_pollution_study,
    run_single, write_csv, RunConfig, StudyRecord, SweepOptions, DEFAULT_MAX_DOFS,
};
use crate::analysis::{error_norms, interpolate, FieldCoefficients};
use crate::assembly::{assemble, QuadPolicy};
use crate::error::Result;
use crate::fe_basis::{dof_formula, CVec3, DofMap, FeSpace, Orientation, ReferenceBasis};
use crate::linsolve::{solve, SolverOptions};
use crate::manufactured::{
    tangential, BesselSolution, Manufactured, PolynomialField, ProblemParams, VectorField,
};
use crate::mesh::{entity_counts, Mesh, Point3};
use crate::quadrature::tri_rule;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    /// Set when the check could not be run within the resource caps; the
    /// criterion is then reported as failed.
    pub infeasible: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "criterion {:>2} [{status}] {} ({:.1} s): {}",
            self.id, self.title, self.seconds, self.detail
        )?;
        if self.infeasible {
            write!(f, " [infeasible within caps]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AcceptanceConfig {
    pub seed: u64,
    pub max_dofs: u128,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            max_dofs: DEFAULT_MAX_DOFS,
        }
    }
}

struct Check {
    passed: bool,
    infeasible: bool,
    detail: String,
}

impl Check {
    fn new(passed: bool, detail: String) -> Self {
        Self {
            passed,
            infeasible: false,
            detail,
        }
    }
}

type CheckFn = fn(&AcceptanceConfig) -> Result<Check>;

const CRITERIA: [(usize, &str, CheckFn); 11] = [
    (1, "DOF formula", dof_formula_check),
    (2, "entity counts", entity_count_check),
    (3, "duality and polynomial reproduction", duality_check),
    (4, "tangential continuity", continuity_check),
    (5, "matrix identities", matrix_identity_check),
    (6, "polynomial patch test", patch_check),
    (7, "manufactured data vs finite differences", fd_check),
    (8, "convergence rates at k=5", convergence_check),
    (9, "pollution growth at N_lambda=10", pollution_check),
    (10, "stability ratio under k^3 h^2 <= 1", stability_check),
    (11, "determinism", determinism_check),
];

/// Runs one criterion by id.
pub fn run_criterion(id: usize, cfg: &AcceptanceConfig) -> Option<CriterionResult> {
    let &(id, title, f) = CRITERIA.iter().find(|c| c.0 == id)?;
    let t = Instant::now();
    let check = f(cfg).unwrap_or_else(|e| Check::new(false, format!("error: {e}")));
    Some(CriterionResult {
        id,
        title,
        passed: check.passed,
        infeasible: check.infeasible,
        detail: check.detail,
        seconds: t.elapsed().as_secs_f64(),
    })
}

/// Runs every criterion, calling `report` as each one finishes.
pub fn run_all(cfg: &AcceptanceConfig, mut report: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .filter_map(|c| {
            let r = run_criterion(c.0, cfg)?;
            report(&r);
            Some(r)
        })
        .collect()
}

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_point(rng: &mut ChaCha8Rng) -> Point3 {
    Vector3::new(rng.random(), rng.random(), rng.random())
}

fn random_c(rng: &mut ChaCha8Rng) -> Complex64 {
    c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// A random complex field in `(P_p)^3` with every monomial present.
pub fn random_polynomial(p: u32, rng: &mut ChaCha8Rng) -> PolynomialField {
    let mut terms = Vec::new();
    for a in 0..=p {
        for b in 0..=p - a {
            for c in 0..=p - a - b {
                let v = CVec3::new(random_c(rng), random_c(rng), random_c(rng));
                terms.push(([a, b, c], v));
            }
        }
    }
    PolynomialField::new(terms)
}

fn dof_formula_check(_: &AcceptanceConfig) -> Result<Check> {
    let t = Instant::now();
    let mut bad = Vec::new();
    for m in 1..=4 {
        let mesh = Mesh::cube(m)?;
        for p in 1..=3 {
            let n = DofMap::new(&mesh, p)?.total_dofs as u128;
            if n != dof_formula(m as u128, p as u128) {
                bad.push((m, p, n));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Ok(Check::new(
        bad.is_empty() && secs < 1.0,
        format!("12 cases, mismatches {bad:?}, {secs:.3} s"),
    ))
}

fn entity_count_check(_: &AcceptanceConfig) -> Result<Check> {
    let c1 = entity_counts(&Mesh::cube(1)?);
    let c2 = entity_counts(&Mesh::cube(2)?);
    let ok = c1 == (8, 6, 19, 18, 12) && (c2.0, c2.1, c2.2, c2.4) == (27, 48, 98, 48);
    Ok(Check::new(ok, format!("M=1 {c1:?}, M=2 {c2:?}")))
}

fn duality_check(cfg: &AcceptanceConfig) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst_dual: f64 = 0.0;
    let mut worst_repro: f64 = 0.0;
    for p in 1..=3 {
        let basis = ReferenceBasis::new(p)?;
        for o in Orientation::all() {
            let d = basis.duality_matrix(o)?;
            let n = d.nrows();
            let dev = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| (d[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
                .fold(0.0, f64::max);
            worst_dual = worst_dual.max(dev);
        }
        let space = FeSpace::new(Mesh::cube(2)?, p)?;
        for _ in 0..5 {
            let field = random_polynomial(p as u32, &mut rng);
            let u = interpolate(&field, &space, 2 * p + 2)?;
            for _ in 0..20 {
                let e = rng.random_range(0..space.mesh.num_tets());
                let (a, b, c): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
                let s = a + b + c + rng.random::<f64>();
                let xh = [a / s, b / s, c / s];
                let x = space.mesh.element_maps[e].map(&xh);
                let exact = field.value(&x);
                let err = (u.eval(e, &xh).0 - exact).norm() / exact.norm().max(1.0);
                worst_repro = worst_repro.max(err);
            }
        }
    }
    Ok(Check::new(
        worst_dual <= 1e-12 && worst_repro <= 1e-10,
        format!("max |Gram - I| = {worst_dual:.2e}, max reproduction error = {worst_repro:.2e}"),
    ))
}

/// Largest jump of the tangential trace across interior faces, relative to
/// the largest trace magnitude, for coefficients `u`.
pub fn tangential_jump(space: &FeSpace, u: &[Complex64], degree: usize) -> Result<f64> {
    let mesh = &space.mesh;
    let rule = tri_rule(degree)?;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (f, nb) in mesh.face_neighbours().iter().enumerate() {
        if nb.len() != 2 {
            continue;
        }
        let [a, b, c] = mesh.faces[f].map(|v| mesh.vertices[v]);
        let normal = (b - a).cross(&(c - a)).normalize();
        for (st, _) in rule.iter() {
            let x = a + (b - a) * st[0] + (c - a) * st[1];
            let trace = |e: usize| {
                let xh: [f64; 3] = mesh.element_maps[e].inverse_map(&x).into();
                tangential(&space.eval_element(u, e, &xh).0, &normal)
            };
            let (t0, t1) = (trace(nb[0].0), trace(nb[1].0));
            worst = worst.max((t0 - t1).norm());
            scale = scale.max(t0.norm());
        }
    }
    Ok(worst / scale.max(1.0))
}

fn continuity_check(cfg: &AcceptanceConfig) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 4);
    let mut worst: f64 = 0.0;
    for p in 1..=3 {
        let space = FeSpace::new(Mesh::cube(2)?, p)?;
        for _ in 0..20 {
            let u: Vec<Complex64> = (0..space.total_dofs()).map(|_| random_c(&mut rng)).collect();
            worst = worst.max(tangential_jump(&space, &u, 2 * p + 2)?);
        }
    }
    Ok(Check::new(
        worst <= 1e-10,
        format!("60 random fields, max tangential jump {worst:.2e}"),
    ))
}

/// Returns `(decomposition defect, symmetry defect, worst Garding defect)`.
pub fn matrix_identities(space: &FeSpace, kappa: f64, samples: usize, seed: u64) -> Result<(f64, f64, f64)> {
    let params = ProblemParams::new(kappa, 1.0)?;
    let prob = Manufactured::bessel(params);
    let policy = QuadPolicy::standard(space.p(), kappa, space.mesh.h);
    let sys = assemble(space, &prob, policy, true)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let (k, l) = (params.kappa, params.lambda);
    for _ in 0..samples {
        let u: Vec<Complex64> = (0..space.total_dofs()).map(|_| random_c(&mut rng)).collect();
        let au = sys.a.matvec(&u);
        let q: Complex64 = u.iter().zip(&au).map(|(x, y)| x.conj() * y).sum();
        let s = sys.s.quadratic_form(&u);
        let m = sys.mv.quadratic_form(&u);
        let b = sys.bnd.quadratic_form(&u);
        let rhs = s - k * k * m + k * l * b;
        let scale = s.abs() + k * k * m.abs() + k * l * b.abs();
        worst = worst.max(((q.re - q.im) - rhs).abs() / scale);
    }
    Ok((sys.decomposition_defect(), sys.a.symmetry_defect(), worst))
}

fn matrix_identity_check(cfg: &AcceptanceConfig) -> Result<Check> {
    let mut detail = Vec::new();
    let mut ok = true;
    for p in 1..=3 {
        let space = FeSpace::new(Mesh::cube(2)?, p)?;
        let (d, s, g) = matrix_identities(&space, 7.0, 50, cfg.seed ^ p as u64)?;
        ok &= d <= 1e-12 && s <= 1e-12 && g <= 1e-10;
        detail.push(format!("p={p}: decomposition {d:.1e}, symmetry {s:.1e}, Garding {g:.1e}"));
    }
    Ok(Check::new(ok, detail.join("; ")))
}

/// Relative L2 error of the discrete solution for polynomial data.
pub fn patch_error(p: usize, m: usize, kappa: f64, field: PolynomialField) -> Result<f64> {
    let space = FeSpace::new(Mesh::cube(m)?, p)?;
    let params = ProblemParams::new(kappa, 1.0)?;
    let prob = Manufactured::new(params, field);
    let policy = QuadPolicy::standard(p, kappa, space.mesh.h);
    let sys = assemble(&space, &prob, policy, true)?;
    let rep = solve(&sys.a, &sys.b, &SolverOptions::default())?;
    let uh = FieldCoefficients::new(&space, rep.x)?;
    Ok(error_norms(&uh, prob.field(), &params, policy.load_degree)?.rel.l2)
}

fn patch_check(cfg: &AcceptanceConfig) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 6);
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for p in 1..=3 {
        for deg in 0..=p as u32 {
            let e = patch_error(p, 2, 3.0, random_polynomial(deg, &mut rng))?;
            worst = worst.max(e);
        }
        detail.push(format!("p={p} worst so far {worst:.1e}"));
    }
    Ok(Check::new(worst <= 1e-8, detail.join(", ")))
}

/// Central-difference curl of `field` with step `h`.
pub fn fd_curl(field: &dyn VectorField, x: &Point3, h: f64) -> CVec3 {
    let d = |i: usize, c: usize| {
        let mut e = Vector3::zeros();
        e[i] = h;
        (field.value(&(x + e))[c] - field.value(&(x - e))[c]) / c64(2.0 * h, 0.0)
    };
    CVec3::new(d(1, 2) - d(2, 1), d(2, 0) - d(0, 2), d(0, 1) - d(1, 0))
}

/// `curl curl E = grad div E - laplace E` from second differences of values.
pub fn fd_curl_curl(field: &dyn VectorField, x: &Point3, h: f64) -> CVec3 {
    let e = |i: usize| {
        let mut v = Vector3::zeros();
        v[i] = h;
        v
    };
    let f0 = field.value(x);
    // second derivative of component c in directions i, j
    let d2 = |c: usize, i: usize, j: usize| -> Complex64 {
        if i == j {
            (field.value(&(x + e(i)))[c] - f0[c] * 2.0 + field.value(&(x - e(i)))[c]) / (h * h)
        } else {
            (field.value(&(x + e(i) + e(j)))[c] - field.value(&(x + e(i) - e(j)))[c]
                - field.value(&(x - e(i) + e(j)))[c]
                + field.value(&(x - e(i) - e(j)))[c])
                / (4.0 * h * h)
        }
    };
    CVec3::from_fn(|i, _| (0..3).map(|j| d2(j, i, j) - d2(i, j, j)).sum())
}

/// Worst relative FD mismatches `(curl, f)` over `n` random points.
pub fn fd_mismatch(kappa: f64, n: usize, seed: u64) -> Result<(f64, f64)> {
    let params = ProblemParams::new(kappa, 1.0)?;
    let prob = Manufactured::bessel(params);
    let field = BesselSolution::new(kappa);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut wc, mut wf): (f64, f64) = (0.0, 0.0);
    for _ in 0..n {
        let x = random_point(&mut rng);
        let curl = prob.eval_curl_e(&x);
        let fd = fd_curl(&field, &x, 1e-4 / kappa);
        wc = wc.max((curl - fd).norm() / curl.norm().max(kappa));
        let f = prob.eval_f(&x);
        let k2 = c64(kappa * kappa, 0.0);
        let fd_f = fd_curl_curl(&field, &x, 1e-2 / kappa) - field.value(&x) * k2;
        wf = wf.max((f - fd_f).norm() / f.norm().max(kappa * kappa));
    }
    Ok((wc, wf))
}

fn fd_check(cfg: &AcceptanceConfig) -> Result<Check> {
    let mut ok = true;
    let mut detail = Vec::new();
    for kappa in [5.0, 50.0] {
        let (c, f) = fd_mismatch(kappa, 200, cfg.seed ^ kappa as u64)?;
        ok &= c <= 1e-5 && f <= 1e-3;
        detail.push(format!("k={kappa}: curl {c:.1e}, f {f:.1e}"));
    }
    Ok(Check::new(ok, detail.join("; ")))
}

/// M lists of the convergence study at `k = 5`.
pub fn convergence_meshes(p: usize) -> Vec<usize> {
    if p == 3 {
        vec![2, 3, 4]
    } else {
        vec![2, 3, 4, 6, 8]
    }
}

fn convergence_check(cfg: &AcceptanceConfig) -> Result<Check> {
    let opts = SweepOptions {
        max_dofs: cfg.max_dofs,
        ..SweepOptions::default()
    };
    let runs = run_convergence_study(&[1, 2, 3], &[5.0], convergence_meshes, &opts)?;
    let mut ok = true;
    let mut detail = Vec::new();
    for p in 1..=3 {
        let recs: Vec<StudyRecord> = runs.iter().filter(|r| r.record.p == p).map(|r| r.record.clone()).collect();
        let se = fit_rate(&recs, |r| r.rel_energy_sol);
        let sl = fit_rate(&recs, |r| r.rel_l2_sol);
        let finest = recs.last().expect("nonempty sweep");
        let ratio = finest.rel_energy_sol / finest.rel_energy_interp;
        let pf = p as f64;
        let good = (se - pf).abs() <= 0.3 && (sl - pf - 1.0).abs() <= 0.3 && ratio <= 1.5 && !finest.flagged;
        ok &= good;
        detail.push(format!(
            "p={p}: energy slope {se:.2}, L2 slope {sl:.2}, sol/interp at M={} {ratio:.2}",
            finest.m
        ));
    }
    Ok(Check::new(ok, detail.join("; ")))
}

fn pollution_check(cfg: &AcceptanceConfig) -> Result<Check> {
    let opts = SweepOptions {
        max_dofs: cfg.max_dofs,
        ..SweepOptions::default()
    };
    let runs = run_pollution_study(&[1, 2], &[10.0, 20.0], 10.0, &opts)?;
    let r = |p: usize, k: f64| {
        runs.iter()
            .find(|o| o.record.p == p && o.record.kappa == k)
            .map(|o| o.record.clone())
            .expect("run present")
    };
    let (a, b) = (r(1, 10.0), r(1, 20.0));
    let (c, d) = (r(2, 10.0), r(2, 20.0));
    let g1 = b.rel_energy_sol / a.rel_energy_sol;
    let i1 = b.rel_energy_interp / a.rel_energy_interp;
    let g2 = d.rel_energy_sol / c.rel_energy_sol;
    let flagged = runs.iter().any(|o| o.record.flagged);
    let ok = (1.3..=3.0).contains(&g1) && (0.7..=1.4).contains(&i1) && g2 < g1 && !flagged;
    Ok(Check::new(
        ok,
        format!(
            "p=1 (M={},{}; N_lambda {:.2},{:.2}): solution growth {g1:.3}, interpolant growth {i1:.3}; p=2 (M={},{}): solution growth {g2:.3}",
            a.m, b.m, a.nlambda, b.nlambda, c.m, d.m
        ),
    ))
}

/// Smallest `M` with `k^3 h^2 <= 1`, `h = sqrt(3) / M`.
pub fn mesh_for_stability_condition(kappa: f64) -> usize {
    let mut m = (3f64.sqrt() * kappa.powf(1.5)).floor().max(1.0) as usize;
    while kappa.powi(3) * 3.0 / (m * m) as f64 > 1.0 {
        m += 1;
    }
    m
}

fn stability_check(cfg: &AcceptanceConfig) -> Result<Check> {
    let kappas = [5.0, 10.0, 20.0];
    let plan: Vec<(f64, usize, u128)> = kappas
        .iter()
        .map(|&k| {
            let m = mesh_for_stability_condition(k);
            (k, m, dof_formula(m as u128, 1))
        })
        .collect();
    let desc: Vec<String> = plan.iter().map(|(k, m, n)| format!("k={k}: M={m}, {n} DOFs")).collect();
    if let Some((k, _, n)) = plan.iter().find(|(_, _, n)| *n > cfg.max_dofs) {
        return Ok(Check {
            passed: false,
            infeasible: true,
            detail: format!(
                "not run: k={k} needs {n} unknowns, above the cap of {} ({})",
                cfg.max_dofs,
                desc.join(", ")
            ),
        });
    }
    let mut ratios = Vec::new();
    for (k, m, _) in &plan {
        let rec = run_single(&RunConfig { max_dofs: cfg.max_dofs, ..RunConfig::new(1, *m, *k) }, None)?.record;
        ratios.push(rec.stab_ratio);
    }
    let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(Check::new(spread <= 3.0, format!("ratios {ratios:?}, spread {spread:.2}")))
}

fn determinism_check(_: &AcceptanceConfig) -> Result<Check> {
    let cfg = RunConfig::new(1, 2, 5.0);
    let (_, _, s1) = build(&cfg)?;
    let (_, _, s2) = build(&cfg)?;
    let same_matrix = s1.a == s2.a && s1.b == s2.b;
    let rows = |r: StudyRecord| -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_csv(&[r.without_timings()], &mut buf)?;
        Ok(buf)
    };
    let r1 = rows(run_single(&cfg, None)?.record)?;
    let r2 = rows(run_single(&cfg, None)?.record)?;
    Ok(Check::new(
        same_matrix && r1 == r2,
        format!("matrices identical: {same_matrix}, CSV rows identical: {}", r1 == r2),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stability_meshes() {
        assert_eq!(mesh_for_stability_condition(5.0), 20);
        assert_eq!(mesh_for_stability_condition(10.0), 55);
    }

    #[test]
    fn cheap_criteria_pass() {
        let cfg = AcceptanceConfig::default();
        for id in [1, 2, 7] {
            let r = run_criterion(id, &cfg).unwrap();
            assert!(r.passed, "{r}");
        }
        assert!(run_criterion(12, &cfg).is_none());
    }
}
