//! Exact fields and the data `f`, `g` they induce.
//!
//! For an exact field `E` the volume load is `f = curl curl E - k^2 E` and the
//! impedance data on a face with outward normal `nu` is
//! `g = curl E x nu - i k lambda E_T`, `E_T = E - (E . nu) nu`.

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fe_basis::CVec3;
use crate::mesh::Point3;
use crate::special_fn::{j0, j1_over_z, j2_over_z_sq};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Wave number and impedance constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    pub kappa: f64,
    pub lambda: f64,
}

impl ProblemParams {
    pub fn new(kappa: f64, lambda: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidConfig(format!("wave number must be positive, got {kappa}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "impedance constant must be positive, got {lambda}"
            )));
        }
        Ok(Self { kappa, lambda })
    }
}

/// Value, first and second derivatives of a complex vector field:
/// `jac[c][j] = d_j E_c`, `hess[c][i][j] = d_i d_j E_c`.
#[derive(Debug, Clone, Copy)]
pub struct FieldJet {
    pub value: CVec3,
    pub jac: [[Complex64; 3]; 3],
    pub hess: [[[Complex64; 3]; 3]; 3],
}

impl FieldJet {
    pub fn curl(&self) -> CVec3 {
        curl_of(&self.jac)
    }

    /// `curl curl E = grad div E - laplace E`.
    pub fn curl_curl(&self) -> CVec3 {
        let h = &self.hess;
        CVec3::from_fn(|c, _| {
            (0..3).map(|j| h[j][c][j]).sum::<Complex64>() - (0..3).map(|j| h[c][j][j]).sum::<Complex64>()
        })
    }
}

fn curl_of(jac: &[[Complex64; 3]; 3]) -> CVec3 {
    CVec3::new(
        jac[2][1] - jac[1][2],
        jac[0][2] - jac[2][0],
        jac[1][0] - jac[0][1],
    )
}

/// A smooth exact field on the closed unit cube.
pub trait VectorField: Send + Sync {
    fn jet(&self, x: &Point3) -> FieldJet;

    fn value(&self, x: &Point3) -> CVec3 {
        self.jet(x).value
    }

    fn curl(&self, x: &Point3) -> CVec3 {
        self.jet(x).curl()
    }

    fn curl_curl(&self, x: &Point3) -> CVec3 {
        self.jet(x).curl_curl()
    }
}

/// `E = (sin(k y) J0(k r), cos(k z) J0(k r), i k J0(k r))`, `r = |x|`.
///
/// With `z = k r`, `Q = J1(z)/z` and `W = J2(z)/z^2`:
/// `grad J0(k r) = -k^2 Q x` and
/// `d_i d_j J0(k r) = -k^2 Q delta_ij + k^4 W x_i x_j`.
/// Each component is `s_c(x) J0(k r)` with `s = (sin k y, cos k z, i k)`, and
/// derivatives follow from the product rule.
#[derive(Debug, Clone, Copy)]
pub struct BesselSolution {
    pub kappa: f64,
}

impl BesselSolution {
    pub fn new(kappa: f64) -> Self {
        Self { kappa }
    }

    /// Prefactors `s_c`, their gradients and Hessian diagonals (all other
    /// second derivatives vanish).
    fn prefactors(&self, x: &Point3) -> ([Complex64; 3], [[f64; 3]; 3], [[f64; 3]; 3]) {
        let k = self.kappa;
        let (sy, cy) = (k * x.y).sin_cos();
        let (sz, cz) = (k * x.z).sin_cos();
        let s = [Complex64::new(sy, 0.0), Complex64::new(cz, 0.0), I * k];
        let grad = [[0.0, k * cy, 0.0], [0.0, 0.0, -k * sz], [0.0; 3]];
        let hdiag = [[0.0, -k * k * sy, 0.0], [0.0, 0.0, -k * k * cz], [0.0; 3]];
        (s, grad, hdiag)
    }
}

impl VectorField for BesselSolution {
    fn value(&self, x: &Point3) -> CVec3 {
        let k = self.kappa;
        let j = j0(k * x.norm());
        CVec3::new(
            Complex64::new((k * x.y).sin() * j, 0.0),
            Complex64::new((k * x.z).cos() * j, 0.0),
            I * (k * j),
        )
    }

    fn curl(&self, x: &Point3) -> CVec3 {
        let k = self.kappa;
        let z = k * x.norm();
        let jv = j0(z);
        let gj = x * (-k * k * j1_over_z(z));
        let (s, grad, _) = self.prefactors(x);
        let jac: [[Complex64; 3]; 3] =
            std::array::from_fn(|c| std::array::from_fn(|d| s[c] * gj[d] + grad[c][d] * jv));
        curl_of(&jac)
    }

    fn jet(&self, x: &Point3) -> FieldJet {
        let k = self.kappa;
        let z = k * x.norm();
        let jv = j0(z);
        let q = j1_over_z(z);
        let w = j2_over_z_sq(z);
        let gj: Vector3<f64> = x * (-k * k * q);
        let hj = |i: usize, d: usize| {
            let delta = if i == d { 1.0 } else { 0.0 };
            -k * k * q * delta + k.powi(4) * w * x[i] * x[d]
        };
        let (s, grad, hdiag) = self.prefactors(x);
        let value = CVec3::from_fn(|c, _| s[c] * jv);
        let jac = std::array::from_fn(|c| std::array::from_fn(|d| s[c] * gj[d] + grad[c][d] * jv));
        let hess = std::array::from_fn(|c| {
            std::array::from_fn(|i| {
                std::array::from_fn(|d| {
                    let hs = if i == d { hdiag[c][i] } else { 0.0 };
                    s[c] * hj(i, d) + hs * jv + grad[c][i] * gj[d] + grad[c][d] * gj[i]
                })
            })
        });
        FieldJet { value, jac, hess }
    }
}

/// A complex vector polynomial `sum_e coeff_e x^e`.
#[derive(Debug, Clone, Default)]
pub struct PolynomialField {
    pub terms: Vec<([u32; 3], CVec3)>,
}

impl PolynomialField {
    pub fn new(terms: Vec<([u32; 3], CVec3)>) -> Self {
        Self { terms }
    }

    /// Total degree of the highest non-zero term.
    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(e, _)| e.iter().sum()).max().unwrap_or(0)
    }
}

/// `d^a/dx^a x^n` evaluated at `x`.
fn dpow(x: f64, n: u32, a: u32) -> f64 {
    if a > n {
        return 0.0;
    }
    let coef: f64 = (n - a + 1..=n).map(f64::from).product();
    coef * x.powi((n - a) as i32)
}

impl VectorField for PolynomialField {
    fn jet(&self, x: &Point3) -> FieldJet {
        let zero = Complex64::new(0.0, 0.0);
        let mut jet = FieldJet {
            value: CVec3::zeros(),
            jac: [[zero; 3]; 3],
            hess: [[[zero; 3]; 3]; 3],
        };
        for (e, coeff) in &self.terms {
            let deriv = |orders: [u32; 3]| -> f64 { (0..3).map(|i| dpow(x[i], e[i], orders[i])).product() };
            let m = deriv([0, 0, 0]);
            let mut g = [0.0; 3];
            let mut h = [[0.0; 3]; 3];
            for i in 0..3 {
                let mut o = [0; 3];
                o[i] += 1;
                g[i] = deriv(o);
                for d in 0..3 {
                    let mut o2 = o;
                    o2[d] += 1;
                    h[i][d] = deriv(o2);
                }
            }
            for c in 0..3 {
                jet.value[c] += coeff[c] * m;
                for i in 0..3 {
                    jet.jac[c][i] += coeff[c] * g[i];
                    for (dst, hv) in jet.hess[c][i].iter_mut().zip(&h[i]) {
                        *dst += coeff[c] * hv;
                    }
                }
            }
        }
        jet
    }
}

/// Spatially constant field; its curl vanishes.
#[derive(Debug, Clone, Copy)]
pub struct ConstantField(pub CVec3);

impl VectorField for ConstantField {
    fn jet(&self, _x: &Point3) -> FieldJet {
        let zero = Complex64::new(0.0, 0.0);
        FieldJet {
            value: self.0,
            jac: [[zero; 3]; 3],
            hess: [[[zero; 3]; 3]; 3],
        }
    }
}

/// An exact field together with the problem parameters it is posed for.
pub struct Manufactured {
    pub params: ProblemParams,
    field: Box<dyn VectorField>,
}

impl std::fmt::Debug for Manufactured {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Manufactured").field("params", &self.params).finish()
    }
}

impl Manufactured {
    pub fn new(params: ProblemParams, field: impl VectorField + 'static) -> Self {
        Self {
            params,
            field: Box::new(field),
        }
    }

    /// The Bessel-type solution at the given wave number.
    pub fn bessel(params: ProblemParams) -> Self {
        Self::new(params, BesselSolution::new(params.kappa))
    }

    pub fn field(&self) -> &dyn VectorField {
        self.field.as_ref()
    }

    pub fn eval_e(&self, x: &Point3) -> CVec3 {
        self.field.value(x)
    }

    pub fn eval_curl_e(&self, x: &Point3) -> CVec3 {
        self.field.curl(x)
    }

    /// `f = curl curl E - k^2 E`.
    pub fn eval_f(&self, x: &Point3) -> CVec3 {
        let jet = self.field.jet(x);
        let k2 = self.params.kappa * self.params.kappa;
        jet.curl_curl() - jet.value * Complex64::new(k2, 0.0)
    }

    /// `g = curl E x nu - i k lambda E_T`.
    pub fn eval_g(&self, x: &Point3, nu: &Point3) -> CVec3 {
        let e = self.field.value(x);
        let c = self.field.curl(x);
        let nu_c = nu.map(|v| Complex64::new(v, 0.0));
        let e_t = tangential(&e, nu);
        c.cross(&nu_c) - e_t * (I * self.params.kappa * self.params.lambda)
    }
}

/// `u - (u . nu) nu` for a real unit normal.
pub fn tangential(u: &CVec3, nu: &Point3) -> CVec3 {
    let nu_c = nu.map(|v| Complex64::new(v, 0.0));
    u - nu_c * u.dot(&nu_c)
}
