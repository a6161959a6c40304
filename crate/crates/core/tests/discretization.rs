use maxwell_eem::analysis::{error_norms, interpolate};
use maxwell_eem::assembly::{assemble, sparsity, QuadPolicy};
use maxwell_eem::fe_basis::{dof_formula, local_dimension, CVec3, DofMap, FeSpace};
use maxwell_eem::manufactured::{ConstantField, Manufactured, PolynomialField, ProblemParams, VectorField};
use maxwell_eem::mesh::{check_conformity, entity_counts, Mesh, Point3};
use maxwell_eem::quadrature::{interval_rule, tet_rule, tri_rule, MAX_DEGREE};
use maxwell_eem::study::acceptance::{matrix_identities, patch_error, random_polynomial, tangential_jump};
use maxwell_eem::study::nlambda;
use maxwell_eem::Error;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

#[test]
fn kuhn_mesh_entity_counts() {
    assert_eq!(entity_counts(&Mesh::cube(1).unwrap()), (8, 6, 19, 18, 12));
    let (v, t, e, f, b) = entity_counts(&Mesh::cube(2).unwrap());
    assert_eq!((v, t, e, b), (27, 48, 98, 48));
    // Euler characteristic of a ball
    assert_eq!(v as i64 - e as i64 + f as i64 - t as i64, 1);
}

#[test]
fn mesh_is_conforming_and_fills_the_cube() {
    for m in 1..=4 {
        let mesh = Mesh::cube(m).unwrap();
        check_conformity(&mesh).unwrap();
        let vol: f64 = (0..mesh.num_tets()).map(|e| mesh.signed_volume(e).abs()).sum();
        assert!((vol - 1.0).abs() < 1e-13);
        assert!((mesh.h - 3f64.sqrt() / m as f64).abs() < 1e-15);
        let area: f64 = mesh
            .boundary_faces
            .iter()
            .map(|bf| {
                let [a, b, c] = mesh.faces[bf.face].map(|v| mesh.vertices[v]);
                (b - a).cross(&(c - a)).norm() / 2.0
            })
            .sum();
        assert!((area - 6.0).abs() < 1e-13);
    }
    assert!(matches!(Mesh::cube(0), Err(Error::ZeroSubdivision(0))));
}

#[test]
fn boundary_normals_point_outwards() {
    let mesh = Mesh::cube(3).unwrap();
    for bf in &mesh.boundary_faces {
        let [a, b, c] = mesh.faces[bf.face].map(|v| mesh.vertices[v]);
        let centroid = (a + b + c) / 3.0;
        let inward = Point3::new(0.5, 0.5, 0.5) - centroid;
        assert!(bf.normal.dot(&inward) < 0.0);
        assert!((bf.normal.norm() - 1.0).abs() < 1e-15);
        assert!(bf.normal.iter().filter(|x| x.abs() == 1.0).count() == 1);
    }
}

#[test]
fn dof_count_matches_closed_form() {
    for m in 1..=5 {
        let mesh = Mesh::cube(m).unwrap();
        for p in 1..=3 {
            let n = DofMap::new(&mesh, p).unwrap().total_dofs as u128;
            assert_eq!(n, dof_formula(m as u128, p as u128), "M={m} p={p}");
        }
    }
    assert_eq!(dof_formula(1, 1), 38);
    assert_eq!(local_dimension(1), 12);
    assert_eq!(local_dimension(3), 60);
    assert!(matches!(FeSpace::new(Mesh::cube(1).unwrap(), 4), Err(Error::UnsupportedOrder(4))));
    assert!(matches!(FeSpace::new(Mesh::cube(1).unwrap(), 0), Err(Error::UnsupportedOrder(0))));
}

#[test]
fn quadrature_rejects_excessive_degree() {
    assert!(tet_rule(MAX_DEGREE).is_ok());
    assert!(matches!(
        tet_rule(MAX_DEGREE + 1),
        Err(Error::QuadratureDegree { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tet_rule_integrates_monomials(a in 0u32..8, b in 0u32..8, cc in 0u32..8, extra in 0usize..4) {
        let deg = (a + b + cc) as usize;
        let rule = tet_rule(deg + extra).unwrap();
        let got = rule.integrate(|x| x[0].powi(a as i32) * x[1].powi(b as i32) * x[2].powi(cc as i32));
        let exact = factorial(a) * factorial(b) * factorial(cc) / factorial(a + b + cc + 3);
        prop_assert!((got - exact).abs() <= 1e-14 * exact.max(1e-3), "{} vs {}", got, exact);
    }

    #[test]
    fn tri_and_line_rules_integrate_monomials(a in 0u32..12, b in 0u32..12) {
        let tri = tri_rule((a + b) as usize).unwrap();
        let got = tri.integrate(|x| x[0].powi(a as i32) * x[1].powi(b as i32));
        let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
        prop_assert!((got - exact).abs() <= 1e-14 * exact.max(1e-3));
        let line = interval_rule(a as usize).unwrap();
        let got = line.integrate(|x| x[0].powi(a as i32));
        prop_assert!((got - 1.0 / f64::from(a + 1)).abs() < 1e-15);
    }

    #[test]
    fn nlambda_inverts_dof_count(m in 1u128..200, p in 1u128..4, kappa in 1.0f64..100.0) {
        let dof = dof_formula(m, p) as f64;
        let nl = nlambda(dof, kappa);
        let back = (nl * kappa / (2.0 * std::f64::consts::PI)).powi(3);
        prop_assert!((back - dof).abs() <= 1e-9 * dof);
    }
}

#[test]
fn sparsity_is_symmetric_with_full_diagonal() {
    let space = FeSpace::new(Mesh::cube(2).unwrap(), 2).unwrap();
    let (row_ptr, cols) = sparsity(&space);
    let n = space.total_dofs();
    assert_eq!(row_ptr.len(), n + 1);
    let has = |i: usize, j: usize| cols[row_ptr[i]..row_ptr[i + 1]].binary_search(&j).is_ok();
    for i in 0..n {
        assert!(has(i, i));
        for &j in &cols[row_ptr[i]..row_ptr[i + 1]] {
            assert!(has(j, i));
        }
    }
}

#[test]
fn random_fields_are_tangentially_continuous() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for p in 1..=3 {
        let space = FeSpace::new(Mesh::cube(2).unwrap(), p).unwrap();
        for _ in 0..5 {
            let u: Vec<Complex64> = (0..space.total_dofs())
                .map(|i| c((i as f64 * 0.37).sin(), rand::Rng::random::<f64>(&mut rng)))
                .collect();
            let jump = tangential_jump(&space, &u, 2 * p + 2).unwrap();
            assert!(jump <= 1e-10, "p={p}: jump {jump:e}");
        }
    }
}

#[test]
fn interpolation_reproduces_full_polynomials() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = ProblemParams::new(2.0, 1.0).unwrap();
    for p in 1..=3 {
        let space = FeSpace::new(Mesh::cube(2).unwrap(), p).unwrap();
        let field = random_polynomial(p as u32, &mut rng);
        let u = interpolate(&field, &space, 2 * p + 2).unwrap();
        let rep = error_norms(&u, &field, &params, 2 * p + 2).unwrap();
        assert!(rep.rel.l2 < 1e-11, "p={p}: {:e}", rep.rel.l2);
        assert!(rep.rel.curl < 1e-10, "p={p}: {:e}", rep.rel.curl);
    }
}

#[test]
fn gradients_lie_in_the_curl_kernel() {
    // constant field and grad(x^2 y + y z) = (2xy, x^2 + z, y)
    let grad = PolynomialField::new(vec![
        ([1, 1, 0], CVec3::new(c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0))),
        ([2, 0, 0], CVec3::new(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))),
        ([0, 0, 1], CVec3::new(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))),
        ([0, 1, 0], CVec3::new(c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0))),
    ]);
    let constant = ConstantField(CVec3::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)));
    for p in 1..=3 {
        let space = FeSpace::new(Mesh::cube(2).unwrap(), p).unwrap();
        let prob = Manufactured::new(ProblemParams::new(3.0, 1.0).unwrap(), constant);
        let sys = assemble(&space, &prob, QuadPolicy::standard(p, 3.0, space.mesh.h), false).unwrap();
        let u = interpolate(&constant, &space, 2 * p + 2).unwrap();
        let s0 = sys.s.quadratic_form(&u.values);
        // The p = 3 dual basis has coefficients near 6e3, so entries of S and
        // the sum over ~1e5 products carry round-off above 1e-12 absolute.
        if p < 3 {
            assert!(s0.abs() <= 1e-12, "p={p}: constant field {s0:e}");
        }
        let fields: [&dyn VectorField; 2] = [&constant, &grad];
        for field in fields {
            let u = interpolate(field, &space, 2 * p + 2).unwrap();
            let s = sys.s.quadratic_form(&u.values);
            // round-off floor: |S|_max |u|^2
            let smax = sys.s.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let u2: f64 = u.values.iter().map(|v| v.norm_sqr()).sum();
            assert!(s.abs() <= 1e-13 * smax * u2, "p={p}: {s:e}");
        }
    }
}

#[test]
fn matrix_decomposition_symmetry_and_garding() {
    for p in 1..=3 {
        let space = FeSpace::new(Mesh::cube(2).unwrap(), p).unwrap();
        let (d, s, g) = matrix_identities(&space, 6.0, 20, 3).unwrap();
        assert!(d <= 1e-12 && s <= 1e-12 && g <= 1e-10, "p={p}: {d:e} {s:e} {g:e}");
    }
}

#[test]
fn mass_and_boundary_matrices_match_exact_integrals() {
    // E = (1, i, 0): ||E||^2 = 2, tangential trace norm^2 = 2 + 1 + 1 + 1 + 1 + 2 = 8
    let e = ConstantField(CVec3::new(c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)));
    let space = FeSpace::new(Mesh::cube(3).unwrap(), 1).unwrap();
    let prob = Manufactured::new(ProblemParams::new(1.0, 1.0).unwrap(), e);
    let sys = assemble(&space, &prob, QuadPolicy::standard(1, 1.0, space.mesh.h), false).unwrap();
    let u = interpolate(&e, &space, 4).unwrap();
    assert!((sys.mv.quadratic_form(&u.values) - 2.0).abs() < 1e-12);
    assert!((sys.bnd.quadratic_form(&u.values) - 8.0).abs() < 1e-12);
}

#[test]
fn polynomial_solutions_are_reproduced() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for p in 1..=3 {
        let err = patch_error(p, 2, 3.0, random_polynomial(p as u32, &mut rng)).unwrap();
        assert!(err <= 1e-8, "p={p}: {err:e}");
    }
}

#[test]
fn parallel_and_serial_assembly_agree_bitwise() {
    let space = FeSpace::new(Mesh::cube(3).unwrap(), 2).unwrap();
    let prob = Manufactured::bessel(ProblemParams::new(8.0, 1.5).unwrap());
    let policy = QuadPolicy::standard(2, 8.0, space.mesh.h);
    let a = assemble(&space, &prob, policy, true).unwrap();
    let b = assemble(&space, &prob, policy, false).unwrap();
    assert_eq!(a.a.values(), b.a.values());
    assert_eq!(a.b, b.b);
}

#[test]
fn quadrature_override_semantics() {
    let base = QuadPolicy::standard(2, 10.0, 0.5);
    assert_eq!(base.matrix_degree, 6);
    assert_eq!(base.load_degree, 14);
    let lo = base.with_override(2, Some(2));
    assert_eq!((lo.matrix_degree, lo.load_degree), (4, 2));
    let hi = base.with_override(2, Some(20));
    assert_eq!((hi.matrix_degree, hi.load_degree), (6, 20));
    assert_eq!(base.with_override(2, None), base);
}
