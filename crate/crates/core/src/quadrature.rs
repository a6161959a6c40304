//! Gauss rules on the unit interval, the reference triangle
//! `{(x, y) : x, y >= 0, x + y <= 1}` and the reference tetrahedron
//! `{x, y, z >= 0, x + y + z <= 1}`.
//!
//! Simplex rules are collapsed-coordinate (Duffy) tensor products of
//! Gauss-Jacobi rules, so every degree is available and all weights are
//! positive.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest exactness degree served by the rule constructors.
pub const MAX_DEGREE: usize = 160;

/// A positive-weight quadrature rule in `D` reference coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl<const D: usize> QuadratureRule<D> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; D], f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// Applies the rule to `f`.
    pub fn integrate(&self, mut f: impl FnMut(&[f64; D]) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > MAX_DEGREE {
        return Err(Error::QuadratureDegree {
            requested: degree,
            max: MAX_DEGREE,
        });
    }
    Ok(())
}

/// Number of Gauss points needed for exactness `degree`.
fn points_for(degree: usize) -> usize {
    degree / 2 + 1
}

/// Gauss-Jacobi nodes and weights on `[0, 1]` for the weight `(1 - x)^alpha`
/// (Golub-Welsch on the monic Jacobi recurrence).
fn gauss_jacobi01(n: usize, alpha: u32) -> (Vec<f64>, Vec<f64>) {
    let a = f64::from(alpha);
    let mut t = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + a;
        // beta = 0: diagonal -alpha^2 / (s (s + 2))
        t[(k, k)] = if s == 0.0 { 0.0 } else { -a * a / (s * (s + 2.0)) };
        if k + 1 < n {
            let j = kf + 1.0;
            let s = 2.0 * j + a;
            let b = 4.0 * j * (j + a) * j * (j + a) / (s * s * (s + 1.0) * (s - 1.0));
            t[(k, k + 1)] = b.sqrt();
            t[(k + 1, k)] = b.sqrt();
        }
    }
    // integral of (1 - t)^alpha over [-1, 1]
    let mu0 = 2f64.powi(alpha as i32 + 1) / (a + 1.0);
    let eig = SymmetricEigen::new(t);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let scale = 2f64.powi(alpha as i32 + 1);
    pairs
        .into_iter()
        .map(|(t, w)| (0.5 * (1.0 + t), w / scale))
        .unzip()
}

/// Gauss-Legendre rule on `[0, 1]` exact for polynomials of degree `degree`.
pub fn interval_rule(degree: usize) -> Result<QuadratureRule<1>> {
    check_degree(degree)?;
    let (x, w) = gauss_jacobi01(points_for(degree), 0);
    Ok(QuadratureRule {
        points: x.into_iter().map(|x| [x]).collect(),
        weights: w,
        degree,
    })
}

/// Collapsed rule on the reference triangle; weights sum to 1/2.
pub fn tri_rule(degree: usize) -> Result<QuadratureRule<2>> {
    check_degree(degree)?;
    let n = points_for(degree);
    let (a, wa) = gauss_jacobi01(n, 0);
    let (b, wb) = gauss_jacobi01(n, 1);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&bj, &wbj) in b.iter().zip(&wb) {
        for (&ai, &wai) in a.iter().zip(&wa) {
            points.push([ai * (1.0 - bj), bj]);
            weights.push(wai * wbj);
        }
    }
    Ok(QuadratureRule {
        points,
        weights,
        degree,
    })
}

/// Collapsed rule on the reference tetrahedron; weights sum to 1/6.
pub fn tet_rule(degree: usize) -> Result<QuadratureRule<3>> {
    check_degree(degree)?;
    let n = points_for(degree);
    let (a, wa) = gauss_jacobi01(n, 0);
    let (b, wb) = gauss_jacobi01(n, 1);
    let (c, wc) = gauss_jacobi01(n, 2);
    let mut points = Vec::with_capacity(n * n * n);
    let mut weights = Vec::with_capacity(n * n * n);
    for (&ck, &wck) in c.iter().zip(&wc) {
        for (&bj, &wbj) in b.iter().zip(&wb) {
            for (&ai, &wai) in a.iter().zip(&wa) {
                points.push([ai * (1.0 - bj) * (1.0 - ck), bj * (1.0 - ck), ck]);
                weights.push(wai * wbj * wck);
            }
        }
    }
    Ok(QuadratureRule {
        points,
        weights,
        degree,
    })
}

/// Assembly degree for stiffness and mass terms: `2p + 2`.
pub fn assembly_degree(p: usize) -> usize {
    2 * p + 2
}

/// Load and error-norm degree: `max(2p + 2, ceil(2 kappa h) + 2p)`.
///
/// The `kappa h` term follows the oscillation of the data so that
/// quadrature error stays below discretization error.
pub fn load_degree(p: usize, kappa: f64, h: f64) -> usize {
    let bump = (2.0 * kappa * h).ceil().max(0.0) as usize + 2 * p;
    assembly_degree(p).max(bump)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Exact simplex moment `a! b! c! / (a + b + c + 3)!`.
    fn tet_moment(a: u32, b: u32, c: u32) -> f64 {
        factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3)
    }

    fn tri_moment(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn spec_values() {
        let t = tet_rule(4).unwrap();
        assert!((t.integrate(|_| 1.0) - 1.0 / 6.0).abs() < 1e-15);
        assert!((t.integrate(|x| x[0]) - 1.0 / 24.0).abs() < 1e-15);
        assert!((t.integrate(|x| x[0] * x[0] * x[1]) - 1.0 / 360.0).abs() < 1e-16);
        let tr = tri_rule(2).unwrap();
        assert!((tr.integrate(|_| 1.0) - 0.5).abs() < 1e-15);
        assert!((tr.integrate(|x| x[0] * x[1]) - 1.0 / 24.0).abs() < 1e-15);
        let i = interval_rule(3).unwrap();
        assert_eq!(i.len(), 2);
        assert!((i.integrate(|x| x[0].powi(3)) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn monomials_exact_to_degree() {
        for degree in [0, 1, 2, 5, 8, 14, 21, 30] {
            let t = tet_rule(degree).unwrap();
            let tr = tri_rule(degree).unwrap();
            let it = interval_rule(degree).unwrap();
            let d = degree as u32;
            for a in 0..=d {
                let exact = 1.0 / f64::from(a + 1);
                let got = it.integrate(|x| x[0].powi(a as i32));
                assert!(((got - exact) / exact).abs() < 1e-12, "interval deg {degree} a {a}");
                for b in 0..=d - a {
                    let exact = tri_moment(a, b);
                    let got = tr.integrate(|x| x[0].powi(a as i32) * x[1].powi(b as i32));
                    assert!(((got - exact) / exact).abs() < 1e-12, "tri deg {degree} ({a},{b})");
                    for c in 0..=d - a - b {
                        let exact = tet_moment(a, b, c);
                        let got = t.integrate(|x| {
                            x[0].powi(a as i32) * x[1].powi(b as i32) * x[2].powi(c as i32)
                        });
                        assert!(
                            ((got - exact) / exact).abs() < 1e-12,
                            "tet deg {degree} ({a},{b},{c}): {got} vs {exact}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn positive_weights_and_reference_measure() {
        for degree in [1, 7, 40, MAX_DEGREE] {
            let t = tet_rule(degree).unwrap();
            assert!(t.weights.iter().all(|&w| w > 0.0));
            assert!((t.weights.iter().sum::<f64>() - 1.0 / 6.0).abs() < 1e-13);
            let tr = tri_rule(degree).unwrap();
            assert!(tr.weights.iter().all(|&w| w > 0.0));
            assert!((tr.weights.iter().sum::<f64>() - 0.5).abs() < 1e-13);
            let i = interval_rule(degree).unwrap();
            assert!(i.weights.iter().all(|&w| w > 0.0));
            assert!((i.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn degree_beyond_table_is_rejected() {
        match tet_rule(MAX_DEGREE + 1) {
            Err(Error::QuadratureDegree { max, .. }) => assert_eq!(max, MAX_DEGREE),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_degree_policy() {
        assert_eq!(load_degree(1, 0.1, 0.1), 4);
        // kappa h = 5 sqrt(3)/8 -> ceil(2.165..) = 3, + 2p = 7
        assert_eq!(load_degree(2, 5.0, 3f64.sqrt() / 8.0), 7);
    }
}
