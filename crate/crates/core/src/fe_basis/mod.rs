//! Second-family Nedelec spaces on Kuhn meshes: reference basis, global
//! DOF numbering and the covariant transform.

mod reference;

pub use reference::{
    functionals, legendre01, local_dimension, Functional, Layout, Orientation, PointTabulation,
    ReferenceBasis, REF_VERTICES,
};

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mesh::{ElementMap, Mesh};
use crate::quadrature::{interval_rule, tet_rule, tri_rule};

pub type CVec3 = Vector3<Complex64>;

/// Closed-form global DOF count `M (p+1) (3M^2p^2 + 3M^2p + M^2 + 6Mp + 3M + 3)`.
pub fn dof_formula(m: u128, p: u128) -> u128 {
    m * (p + 1) * (3 * m * m * p * p + 3 * m * m * p + m * m + 6 * m * p + 3 * m + 3)
}

/// Covariant transform of a reference value and curl to the physical element:
/// `v = B^{-T} v_hat`, `curl v = B curl_hat v_hat / det B`.
pub fn push_forward(
    map: &ElementMap,
    value: &Vector3<f64>,
    curl: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    (
        map.jacobian_inv.transpose() * value,
        map.jacobian * curl / map.det,
    )
}

/// Global numbering: all edge DOFs first (edge-major), then face DOFs, then
/// element interiors.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub p: usize,
    pub layout: Layout,
    pub total_dofs: usize,
    n_local: usize,
    dofs: Vec<usize>,
    orientation: Vec<Orientation>,
    face_offset: usize,
    interior_offset: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh, p: usize) -> Result<Self> {
        if !(1..=3).contains(&p) {
            return Err(Error::UnsupportedOrder(p));
        }
        let layout = Layout::new(p);
        let n_local = layout.total();
        let face_offset = mesh.edges.len() * layout.per_edge;
        let interior_offset = face_offset + mesh.faces.len() * layout.per_face;
        let total_dofs = interior_offset + mesh.tets.len() * layout.interior;

        let mut dofs = Vec::with_capacity(mesh.tets.len() * n_local);
        let mut orientation = Vec::with_capacity(mesh.tets.len());
        for (e, tet) in mesh.tets.iter().enumerate() {
            orientation.push(Orientation::from_global(tet));
            for &g in &mesh.tet_edges[e] {
                dofs.extend((0..layout.per_edge).map(|k| g * layout.per_edge + k));
            }
            for &g in &mesh.tet_faces[e] {
                dofs.extend((0..layout.per_face).map(|k| face_offset + g * layout.per_face + k));
            }
            dofs.extend((0..layout.interior).map(|k| interior_offset + e * layout.interior + k));
        }
        let expected = dof_formula(mesh.m as u128, p as u128);
        if total_dofs as u128 != expected {
            return Err(Error::InconsistentDofMap(format!(
                "counted {total_dofs} DOFs, closed form gives {expected}"
            )));
        }
        Ok(Self {
            p,
            layout,
            total_dofs,
            n_local,
            dofs,
            orientation,
            face_offset,
            interior_offset,
        })
    }

    pub fn n_local(&self) -> usize {
        self.n_local
    }

    /// Global indices of the local DOFs of tetrahedron `e`.
    pub fn element(&self, e: usize) -> &[usize] {
        &self.dofs[e * self.n_local..(e + 1) * self.n_local]
    }

    /// Orientation class selecting the local dual basis of tetrahedron `e`.
    pub fn orientation(&self, e: usize) -> Orientation {
        self.orientation[e]
    }

    pub fn edge_dof(&self, edge: usize, k: usize) -> usize {
        edge * self.layout.per_edge + k
    }

    pub fn face_dof(&self, face: usize, k: usize) -> usize {
        self.face_offset + face * self.layout.per_face + k
    }

    pub fn interior_dof(&self, tet: usize, k: usize) -> usize {
        self.interior_offset + tet * self.layout.interior + k
    }
}

/// Basis values and curls of one orientation class tabulated at a list of
/// reference points; entry `q * n_basis + i`.
#[derive(Debug, Clone)]
pub struct RuleTable {
    pub n_basis: usize,
    pub values: Vec<Vector3<f64>>,
    pub curls: Vec<Vector3<f64>>,
}

impl RuleTable {
    pub fn values_at(&self, q: usize) -> &[Vector3<f64>] {
        &self.values[q * self.n_basis..(q + 1) * self.n_basis]
    }

    pub fn curls_at(&self, q: usize) -> &[Vector3<f64>] {
        &self.curls[q * self.n_basis..(q + 1) * self.n_basis]
    }
}

/// Mesh, reference element and DOF map bundled together.
#[derive(Debug, Clone)]
pub struct FeSpace {
    pub mesh: Mesh,
    pub basis: ReferenceBasis,
    pub dofs: DofMap,
}

impl FeSpace {
    pub fn new(mesh: Mesh, p: usize) -> Result<Self> {
        let basis = ReferenceBasis::new(p)?;
        let dofs = DofMap::new(&mesh, p)?;
        Ok(Self { mesh, basis, dofs })
    }

    pub fn p(&self) -> usize {
        self.basis.p
    }

    pub fn total_dofs(&self) -> usize {
        self.dofs.total_dofs
    }

    pub fn tabulate(&self, orient: Orientation, points: &[[f64; 3]]) -> RuleTable {
        let n_basis = self.basis.dim();
        let mut values = Vec::with_capacity(points.len() * n_basis);
        let mut curls = Vec::with_capacity(points.len() * n_basis);
        for x in points {
            let t = self.basis.tabulate(orient, x);
            values.extend(t.values);
            curls.extend(t.curls);
        }
        RuleTable {
            n_basis,
            values,
            curls,
        }
    }

    /// Tables for every orientation class used by the mesh, indexed by
    /// [`Orientation::index`].
    pub fn tabulate_classes(&self, points: &[[f64; 3]]) -> Vec<Option<RuleTable>> {
        let mut out: Vec<Option<RuleTable>> = vec![None; 24];
        for e in 0..self.mesh.num_tets() {
            let o = self.dofs.orientation(e);
            if out[o.index()].is_none() {
                out[o.index()] = Some(self.tabulate(o, points));
            }
        }
        out
    }

    /// Evaluates the discrete field with coefficients `u` and its curl at the
    /// reference point `xh` of tetrahedron `e`.
    pub fn eval_element(&self, u: &[Complex64], e: usize, xh: &[f64; 3]) -> (CVec3, CVec3) {
        let t = self.basis.tabulate(self.dofs.orientation(e), xh);
        self.combine(u, e, &t.values, &t.curls)
    }

    /// Combines tabulated reference values/curls with the coefficients of
    /// element `e` and maps the result to the physical element.
    pub fn combine(
        &self,
        u: &[Complex64],
        e: usize,
        values: &[Vector3<f64>],
        curls: &[Vector3<f64>],
    ) -> (CVec3, CVec3) {
        let mut v = CVec3::zeros();
        let mut c = CVec3::zeros();
        for ((&g, vh), ch) in self.dofs.element(e).iter().zip(values).zip(curls) {
            let coef = u[g];
            v += vh.map(|x| coef * x);
            c += ch.map(|x| coef * x);
        }
        let map = &self.mesh.element_maps[e];
        let bit = map.jacobian_inv.transpose().map(|x| Complex64::new(x, 0.0));
        let b = map.jacobian.map(|x| Complex64::new(x / map.det, 0.0));
        (bit * v, b * c)
    }

    /// Applies every global DOF functional to the field `field`, i.e. returns
    /// the coefficients of its interpolant. `degree` is the quadrature degree
    /// used on edges, faces and interiors (raised to at least `2p`).
    pub fn interpolate_with(
        &self,
        degree: usize,
        field: impl Fn(&Vector3<f64>) -> CVec3,
    ) -> Result<Vec<Complex64>> {
        let p = self.p();
        let degree = degree.max(2 * p);
        let layout = self.dofs.layout;
        let mesh = &self.mesh;
        let mut u = vec![Complex64::new(0.0, 0.0); self.total_dofs()];

        let line = interval_rule(degree)?;
        for (g, &[lo, hi]) in mesh.edges.iter().enumerate() {
            let (a, b) = (mesh.vertices[lo], mesh.vertices[hi]);
            let t = b - a;
            for (s, w) in line.iter() {
                let val = field(&(a + t * s[0])).dot(&t.map(|x| Complex64::new(x, 0.0)));
                for k in 0..layout.per_edge {
                    u[self.dofs.edge_dof(g, k)] += val * (w * legendre01(k, s[0]));
                }
            }
        }

        if layout.per_face > 0 {
            let tri = tri_rule(degree)?;
            let tests = reference::face_tests(p);
            for (g, &[ia, ib, ic]) in mesh.faces.iter().enumerate() {
                let a = mesh.vertices[ia];
                let t1 = mesh.vertices[ib] - a;
                let t2 = mesh.vertices[ic] - a;
                for (st, w) in tri.iter() {
                    let ev = field(&(a + t1 * st[0] + t2 * st[1]));
                    let e1 = ev.dot(&t1.map(|x| Complex64::new(x, 0.0)));
                    let e2 = ev.dot(&t2.map(|x| Complex64::new(x, 0.0)));
                    for (k, q) in tests.iter().enumerate() {
                        let qv = q(st);
                        u[self.dofs.face_dof(g, k)] += (e1 * qv[0] + e2 * qv[1]) * w;
                    }
                }
            }
        }

        if layout.interior > 0 {
            let tet = tet_rule(degree)?;
            let tests = reference::interior_tests(p);
            for e in 0..mesh.num_tets() {
                let map = &mesh.element_maps[e];
                let bt = map.jacobian.transpose().map(|x| Complex64::new(x, 0.0));
                for (xh, w) in tet.iter() {
                    let vh = bt * field(&map.map(xh));
                    for (k, q) in tests.iter().enumerate() {
                        let qv = q(xh);
                        u[self.dofs.interior_dof(e, k)] +=
                            (vh[0] * qv[0] + vh[1] * qv[1] + vh[2] * qv[2]) * w;
                    }
                }
            }
        }
        Ok(u)
    }
}
