//! Edge interpolation of exact fields and error measurement.

use num_complex::Complex64;

use crate::assembly::{face_tables, for_each_ordered};
use crate::error::{Error, Result};
use crate::fe_basis::{CVec3, FeSpace, REF_VERTICES};
use crate::manufactured::{tangential, Manufactured, ProblemParams, VectorField};
use crate::mesh::LOCAL_FACES;
use crate::quadrature::{tet_rule, tri_rule};

/// A discrete field: global coefficients on a given space.
#[derive(Debug, Clone)]
pub struct FieldCoefficients<'a> {
    pub space: &'a FeSpace,
    pub values: Vec<Complex64>,
}

impl<'a> FieldCoefficients<'a> {
    pub fn new(space: &'a FeSpace, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != space.total_dofs() {
            return Err(Error::DimensionMismatch {
                expected: space.total_dofs(),
                got: values.len(),
            });
        }
        Ok(Self { space, values })
    }

    pub fn zero(space: &'a FeSpace) -> Self {
        Self {
            space,
            values: vec![Complex64::new(0.0, 0.0); space.total_dofs()],
        }
    }

    /// Value and curl at the physical point given by reference point `xh`
    /// of element `e`.
    pub fn eval(&self, e: usize, xh: &[f64; 3]) -> (CVec3, CVec3) {
        self.space.eval_element(&self.values, e, xh)
    }

    /// `|u_h|` at each element centroid.
    pub fn centroid_magnitudes(&self) -> Vec<f64> {
        (0..self.space.mesh.num_tets())
            .map(|e| self.eval(e, &[0.25; 3]).0.norm())
            .collect()
    }
}

/// Interpolant of `field`: every DOF functional applied on its entity.
pub fn interpolate<'a>(
    field: &dyn VectorField,
    space: &'a FeSpace,
    degree: usize,
) -> Result<FieldCoefficients<'a>> {
    let values = space.interpolate_with(degree, |x| field.value(x))?;
    FieldCoefficients::new(space, values)
}

/// Norm values of one field (or error).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub curl: f64,
    /// Tangential trace norm on the boundary.
    pub trace: f64,
    /// `(curl^2 + k^2 l2^2)^{1/2}`.
    pub energy: f64,
    /// `(energy^2 + k lambda trace^2)^{1/2}`.
    pub full_energy: f64,
}

impl Norms {
    fn from_squares(l2: f64, curl: f64, trace: f64, params: &ProblemParams) -> Self {
        let k = params.kappa;
        let energy_sq = curl + k * k * l2;
        Self {
            l2: l2.sqrt(),
            curl: curl.sqrt(),
            trace: trace.sqrt(),
            energy: energy_sq.sqrt(),
            full_energy: (energy_sq + k * params.lambda * trace).sqrt(),
        }
    }

    /// Component-wise ratio; components whose denominator is zero are NaN.
    fn relative_to(&self, d: &Norms) -> Norms {
        let r = |a: f64, b: f64| if b == 0.0 { f64::NAN } else { a / b };
        Norms {
            l2: r(self.l2, d.l2),
            curl: r(self.curl, d.curl),
            trace: r(self.trace, d.trace),
            energy: r(self.energy, d.energy),
            full_energy: r(self.full_energy, d.full_energy),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub abs: Norms,
    pub rel: Norms,
    /// Norms of the exact field, the denominators of `rel`.
    pub exact: Norms,
}

/// Squared volume norms `(|a|^2, |curl a|^2, |b|^2, |curl b|^2)` where `a`
/// is `exact - u_h` and `b` is `exact` (exact may be absent, i.e. zero).
fn volume_squares(
    u: &FieldCoefficients,
    exact: Option<&dyn VectorField>,
    degree: usize,
) -> Result<[f64; 4]> {
    let space = u.space;
    let rule = tet_rule(degree)?;
    let pts: Vec<[f64; 3]> = rule.iter().map(|(x, _)| *x).collect();
    let tables = space.tabulate_classes(&pts);
    let mut total = [0.0; 4];
    for_each_ordered(
        space.mesh.num_tets(),
        true,
        |e| {
            let map = &space.mesh.element_maps[e];
            let t = tables[space.dofs.orientation(e).index()].as_ref().expect("tabulated");
            let adet = map.det.abs();
            let mut acc = [0.0; 4];
            for (q, (xh, w)) in rule.iter().enumerate() {
                let (v, c) = space.combine(&u.values, e, t.values_at(q), t.curls_at(q));
                let (ev, ec) = match exact {
                    Some(f) => {
                        let x = map.map(xh);
                        (f.value(&x), f.curl(&x))
                    }
                    None => (CVec3::zeros(), CVec3::zeros()),
                };
                let wq = w * adet;
                acc[0] += wq * (ev - v).norm_squared();
                acc[1] += wq * (ec - c).norm_squared();
                acc[2] += wq * ev.norm_squared();
                acc[3] += wq * ec.norm_squared();
            }
            acc
        },
        |_, acc| {
            for (t, a) in total.iter_mut().zip(acc) {
                *t += a;
            }
        },
    );
    Ok(total)
}

/// Squared boundary tangential norms of `exact - u_h` and of `exact`.
fn trace_squares(
    u: &FieldCoefficients,
    exact: Option<&dyn VectorField>,
    degree: usize,
) -> Result<[f64; 2]> {
    let space = u.space;
    let rule = tri_rule(degree)?;
    let tables = face_tables(space, &rule);
    let mut total = [0.0; 2];
    for_each_ordered(
        space.mesh.boundary_faces.len(),
        true,
        |k| {
            let bf = &space.mesh.boundary_faces[k];
            let map = &space.mesh.element_maps[bf.tet];
            let t = &tables[&(space.dofs.orientation(bf.tet).index(), bf.local_face)];
            let [a, b, c] = LOCAL_FACES[bf.local_face].map(|v| map.map(&REF_VERTICES[v]));
            let area2 = (b - a).cross(&(c - a)).norm();
            let mut acc = [0.0; 2];
            for (q, (st, w)) in rule.iter().enumerate() {
                let (v, _) = space.combine(&u.values, bf.tet, t.values_at(q), t.curls_at(q));
                let x = a + (b - a) * st[0] + (c - a) * st[1];
                let ev = exact.map_or_else(CVec3::zeros, |f| f.value(&x));
                acc[0] += w * area2 * tangential(&(ev - v), &bf.normal).norm_squared();
                acc[1] += w * area2 * tangential(&ev, &bf.normal).norm_squared();
            }
            acc
        },
        |_, acc| {
            total[0] += acc[0];
            total[1] += acc[1];
        },
    );
    Ok(total)
}

/// Errors of `u_h` against `exact`, measured with quadrature of `degree`
/// on elements and boundary faces.
pub fn error_norms(
    u: &FieldCoefficients,
    exact: &dyn VectorField,
    params: &ProblemParams,
    degree: usize,
) -> Result<ErrorReport> {
    let v = volume_squares(u, Some(exact), degree)?;
    let t = trace_squares(u, Some(exact), degree)?;
    let abs = Norms::from_squares(v[0], v[1], t[0], params);
    let ex = Norms::from_squares(v[2], v[3], t[1], params);
    if ex.energy == 0.0 {
        return Err(Error::ZeroDenominator("relative error (exact field has zero norm)"));
    }
    Ok(ErrorReport {
        abs,
        rel: abs.relative_to(&ex),
        exact: ex,
    })
}

/// Norms of the discrete field itself.
pub fn field_norms(u: &FieldCoefficients, params: &ProblemParams, degree: usize) -> Result<Norms> {
    let v = volume_squares(u, None, degree)?;
    let t = trace_squares(u, None, degree)?;
    Ok(Norms::from_squares(v[0], v[1], t[0], params))
}

/// `(|f|, |g|_Gamma)` by quadrature.
pub fn data_norms(space: &FeSpace, problem: &Manufactured, degree: usize) -> Result<(f64, f64)> {
    let rule = tet_rule(degree)?;
    let mut f2 = 0.0;
    for map in &space.mesh.element_maps {
        let adet = map.det.abs();
        f2 += rule
            .iter()
            .map(|(xh, w)| w * adet * problem.eval_f(&map.map(xh)).norm_squared())
            .sum::<f64>();
    }
    let tri = tri_rule(degree)?;
    let mut g2 = 0.0;
    for bf in &space.mesh.boundary_faces {
        let map = &space.mesh.element_maps[bf.tet];
        let [a, b, c] = LOCAL_FACES[bf.local_face].map(|v| map.map(&REF_VERTICES[v]));
        let area2 = (b - a).cross(&(c - a)).norm();
        g2 += tri
            .iter()
            .map(|(st, w)| {
                let x = a + (b - a) * st[0] + (c - a) * st[1];
                w * area2 * problem.eval_g(&x, &bf.normal).norm_squared()
            })
            .sum::<f64>();
    }
    Ok((f2.sqrt(), g2.sqrt()))
}

/// `(|curl u_h| + k |u_h| + k |u_h,T|) / (|f| + |g|_Gamma)`.
pub fn stability_ratio(u: &FieldCoefficients, problem: &Manufactured, degree: usize) -> Result<f64> {
    let n = field_norms(u, &problem.params, degree)?;
    let (f, g) = data_norms(u.space, problem, degree)?;
    let den = f + g;
    if den == 0.0 {
        return Err(Error::ZeroDenominator("stability ratio (data norms vanish)"));
    }
    let k = problem.params.kappa;
    Ok((n.curl + k * n.l2 + k * n.trace) / den)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
