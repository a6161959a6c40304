#![allow(clippy::excessive_precision)]

use maxwell_eem::fe_basis::CVec3;
use maxwell_eem::manufactured::{tangential, Manufactured, PolynomialField, ProblemParams, VectorField};
use maxwell_eem::mesh::Point3;
use maxwell_eem::study::acceptance::{fd_curl, fd_mismatch};
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn close(a: &CVec3, b: &CVec3, tol: f64) -> bool {
    (a - b).norm() <= tol * b.norm().max(1.0)
}

// Values below were evaluated symbolically at 30 digits.

#[test]
fn field_and_curl_at_cube_centre() {
    let prob = Manufactured::bessel(ProblemParams::new(5.0, 1.0).unwrap());
    let x = Point3::new(0.5, 0.5, 0.5);
    let e = CVec3::new(
        c(-0.212869230655792625253598707057, 0.0),
        c(0.284956997190921476202939811866, 0.0),
        c(0.0, -1.77843891944632071516595965745),
    );
    let curl = CVec3::new(
        c(-0.644683971158171937334167790478, 2.619144520263645242327145934),
        c(0.313497007352062459034532410131, -2.619144520263645242327145934),
        c(-2.15794417542746102898305721427, 0.0),
    );
    assert!(close(&prob.eval_e(&x), &e, 1e-14), "{:?}", prob.eval_e(&x));
    assert!(close(&prob.eval_curl_e(&x), &curl, 1e-14), "{:?}", prob.eval_curl_e(&x));
}

#[test]
fn volume_source_at_cube_centre() {
    let prob = Manufactured::bessel(ProblemParams::new(5.0, 1.0).unwrap());
    let f = CVec3::new(
        c(-1.58428676662133919338049498886, 11.3281316350344789699468025668),
        c(7.70140627125527009937090591342, 11.328131635034478969946802567),
        c(-2.02666285819474774655144681116, 11.328131635034478969946802567),
    );
    let got = prob.eval_f(&Point3::new(0.5, 0.5, 0.5));
    assert!(close(&got, &f, 1e-13), "{got:?}");
}

#[test]
fn boundary_source_on_x_face() {
    let prob = Manufactured::bessel(ProblemParams::new(5.0, 1.0).unwrap());
    let g = CVec3::new(
        c(0.0, 0.0),
        c(-1.11983086518024018637483673714, 1.03310484725085660804002657275),
        c(4.92735640388710223820601013603, 4.21537903229242980985713280455),
    );
    let got = prob.eval_g(&Point3::new(1.0, 0.3, 0.7), &Point3::new(1.0, 0.0, 0.0));
    assert!(close(&got, &g, 1e-13), "{got:?}");
}

#[test]
fn boundary_source_is_tangential() {
    let prob = Manufactured::bessel(ProblemParams::new(7.0, 2.0).unwrap());
    let normals = [
        (Point3::new(0.0, 0.2, 0.9), Point3::new(-1.0, 0.0, 0.0)),
        (Point3::new(0.4, 1.0, 0.1), Point3::new(0.0, 1.0, 0.0)),
        (Point3::new(0.6, 0.3, 0.0), Point3::new(0.0, 0.0, -1.0)),
    ];
    for (x, nu) in normals {
        let g = prob.eval_g(&x, &nu);
        let nu_c = nu.map(|v| c(v, 0.0));
        assert!(g.dot(&nu_c).norm() < 1e-13);
        assert!((tangential(&g, &nu) - g).norm() < 1e-13);
    }
}

#[test]
fn derivatives_agree_with_finite_differences() {
    for kappa in [5.0, 50.0] {
        let (curl, f) = fd_mismatch(kappa, 200, 7).unwrap();
        assert!(curl <= 1e-5, "k={kappa}: curl mismatch {curl:e}");
        assert!(f <= 1e-3, "k={kappa}: source mismatch {f:e}");
    }
}

#[test]
fn polynomial_field_derivatives() {
    // E = (y^2 z, i x, x y z): curl = (x z, y^2 - y z, i - 2 y z)
    let field = PolynomialField::new(vec![
        ([0, 2, 1], CVec3::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0))),
        ([1, 0, 0], CVec3::new(c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.0))),
        ([1, 1, 1], CVec3::new(c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0))),
    ]);
    assert_eq!(field.degree(), 3);
    let x = Point3::new(0.3, -0.7, 1.1);
    let (a, b, z) = (x[0], x[1], x[2]);
    let want = CVec3::new(c(a * z, 0.0), c(b * b - b * z, 0.0), c(-2.0 * b * z, 1.0));
    assert!((field.curl(&x) - want).norm() < 1e-14);
    assert!((fd_curl(&field, &x, 1e-5) - want).norm() < 1e-8);
    // curl curl = grad div - laplace; div = x y, laplace = (2 z, 0, 0)
    let cc = CVec3::new(c(b - 2.0 * z, 0.0), c(a, 0.0), c(0.0, 0.0));
    assert!((field.curl_curl(&x) - cc).norm() < 1e-13);
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(ProblemParams::new(0.0, 1.0).is_err());
    assert!(ProblemParams::new(-3.0, 1.0).is_err());
    assert!(ProblemParams::new(f64::NAN, 1.0).is_err());
    assert!(ProblemParams::new(5.0, 0.0).is_err());
    assert!(ProblemParams::new(5.0, f64::INFINITY).is_err());
}
