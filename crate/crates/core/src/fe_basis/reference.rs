//! Second-family Nedelec element of order `p` on the reference tetrahedron.
//!
//! The local space is the full `(P_p)^3`. Degrees of freedom are
//! * edge moments `int_e (v . t) L_k ds`, `L_k` the Legendre polynomials on
//!   the edge parameter, `k = 0..=p`;
//! * face moments `int_f v . q dA` against the face Raviart-Thomas space of
//!   index `p - 1`;
//! * interior moments `int_K v . q dV` against the Raviart-Thomas space of
//!   index `p - 2`.
//!
//! The dual basis is obtained by inverting the Gram matrix of the functionals
//! against vector monomials. Edge and face functionals depend on the order
//! in which the entity's vertices are traversed; that order comes from the
//! global vertex numbering, so each of the 24 possible rankings of the four
//! local vertices has its own dual basis (an orientation class).

use nalgebra::{DMatrix, Vector3};

use crate::error::{Error, Result};
use crate::mesh::{LOCAL_EDGES, LOCAL_FACES};
use crate::quadrature::{interval_rule, tet_rule, tri_rule};

/// Reference vertices `(0,0,0), (1,0,0), (0,1,0), (0,0,1)`.
pub const REF_VERTICES: [[f64; 3]; 4] = [
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
];

/// `(p+1)(p+2)(p+3)/2`, the dimension of `(P_p)^3`.
pub fn local_dimension(p: usize) -> usize {
    (p + 1) * (p + 2) * (p + 3) / 2
}

/// Number of DOFs per edge, per face and per element interior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub per_edge: usize,
    pub per_face: usize,
    pub interior: usize,
}

impl Layout {
    pub fn new(p: usize) -> Self {
        Self {
            per_edge: p + 1,
            per_face: p * p - 1,
            interior: if p < 2 { 0 } else { (p - 2) * (p - 1) * (p + 1) / 2 },
        }
    }

    pub fn edge_block(&self) -> usize {
        6 * self.per_edge
    }

    pub fn face_block(&self) -> usize {
        4 * self.per_face
    }

    pub fn total(&self) -> usize {
        self.edge_block() + self.face_block() + self.interior
    }

    /// Local index of DOF `k` of local edge `e`.
    pub fn edge_dof(&self, e: usize, k: usize) -> usize {
        e * self.per_edge + k
    }

    pub fn face_dof(&self, f: usize, k: usize) -> usize {
        self.edge_block() + f * self.per_face + k
    }

    pub fn interior_dof(&self, k: usize) -> usize {
        self.edge_block() + self.face_block() + k
    }
}

/// Ranking of the four local vertices by global index: `ranks[v]` is the
/// position of local vertex `v` in ascending global order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Orientation(pub [u8; 4]);

impl Orientation {
    pub const IDENTITY: Self = Self([0, 1, 2, 3]);

    pub fn from_global(global: &[usize; 4]) -> Self {
        let mut ranks = [0u8; 4];
        for (v, r) in ranks.iter_mut().enumerate() {
            *r = global.iter().filter(|&&g| g < global[v]).count() as u8;
        }
        Self(ranks)
    }

    /// Lehmer code of the ranking, in `0..24`.
    pub fn index(&self) -> usize {
        let r = self.0;
        let mut code = 0;
        for i in 0..4 {
            let smaller_after = r[i + 1..].iter().filter(|&&x| x < r[i]).count();
            code = code * (4 - i) + smaller_after;
        }
        code
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..256u32)
            .map(|code| Self(std::array::from_fn(|i| ((code >> (2 * i)) & 3) as u8)))
            .filter(|o| (0..4u8).all(|r| o.0.contains(&r)))
    }

    /// Local edge vertices ordered from lower to higher rank.
    pub fn edge(&self, e: usize) -> [usize; 2] {
        let [a, b] = LOCAL_EDGES[e];
        if self.0[a] < self.0[b] {
            [a, b]
        } else {
            [b, a]
        }
    }

    /// Local face vertices ordered by rank.
    pub fn face(&self, f: usize) -> [usize; 3] {
        let mut v = LOCAL_FACES[f];
        v.sort_by_key(|&i| self.0[i]);
        v
    }

    /// `+1` if the local edge runs with the reference orientation.
    pub fn edge_sign(&self, e: usize) -> f64 {
        if self.edge(e) == LOCAL_EDGES[e] {
            1.0
        } else {
            -1.0
        }
    }
}

/// A linear functional `v -> sum_q w_q . v(x_q)`.
#[derive(Debug, Clone, Default)]
pub struct Functional {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<[f64; 3]>,
}

impl Functional {
    pub fn apply(&self, mut v: impl FnMut(&[f64; 3]) -> [f64; 3]) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| {
                let val = v(x);
                w[0] * val[0] + w[1] * val[1] + w[2] * val[2]
            })
            .sum()
    }
}

/// Shifted Legendre polynomial `P_k(2s - 1)`.
pub fn legendre01(k: usize, s: f64) -> f64 {
    let x = 2.0 * s - 1.0;
    let (mut p0, mut p1) = (1.0, x);
    if k == 0 {
        return p0;
    }
    for n in 1..k {
        let nf = n as f64;
        let p2 = ((2.0 * nf + 1.0) * x * p1 - nf * p0) / (nf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Scalar monomial exponents of total degree `<= p` in `dim` variables.
fn exponents(dim: usize, p: usize) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for total in 0..=p as u32 {
        for a in (0..=total).rev() {
            if dim == 1 {
                if a == total {
                    out.push([a, 0, 0]);
                }
                continue;
            }
            for b in (0..=total - a).rev() {
                let c = total - a - b;
                if dim == 2 && c != 0 {
                    continue;
                }
                out.push([a, b, c]);
            }
        }
    }
    out
}

fn monomial(e: &[u32; 3], x: &[f64]) -> f64 {
    let mut v = 1.0;
    for (i, &k) in e.iter().enumerate() {
        if k > 0 {
            v *= x[i].powi(k as i32);
        }
    }
    v
}

fn monomial_grad(e: &[u32; 3], x: &[f64; 3]) -> [f64; 3] {
    let mut g = [0.0; 3];
    for (i, gi) in g.iter_mut().enumerate() {
        if e[i] == 0 {
            continue;
        }
        let mut v = f64::from(e[i]) * x[i].powi(e[i] as i32 - 1);
        for j in 0..3 {
            if j != i && e[j] > 0 {
                v *= x[j].powi(e[j] as i32);
            }
        }
        *gi = v;
    }
    g
}

/// A vector test field on a reference simplex.
type TestField = Box<dyn Fn(&[f64]) -> [f64; 3]>;

/// Basis of the Raviart-Thomas space of index `m >= 1` in `dim` variables:
/// `(P_{m-1})^dim + x * homogeneous P_{m-1}`.
fn raviart_thomas(dim: usize, m: usize) -> Vec<TestField> {
    let mut out: Vec<TestField> = Vec::new();
    if m == 0 {
        return out;
    }
    let exps = exponents(dim, m - 1);
    for comp in 0..dim {
        for e in exps.clone() {
            out.push(Box::new(move |x: &[f64]| {
                let mut v = [0.0; 3];
                v[comp] = monomial(&e, x);
                v
            }));
        }
    }
    for e in exps.into_iter().filter(|e| (e[0] + e[1] + e[2]) as usize == m - 1) {
        out.push(Box::new(move |x: &[f64]| {
            let s = monomial(&e, x);
            let mut v = [0.0; 3];
            for (c, vc) in v.iter_mut().enumerate().take(dim) {
                *vc = s * x[c];
            }
            v
        }));
    }
    out
}

/// Face test fields in the face parameter `(s, t)`.
pub(crate) fn face_tests(p: usize) -> Vec<TestField> {
    raviart_thomas(2, p - 1)
}

/// Interior test fields in reference coordinates.
pub(crate) fn interior_tests(p: usize) -> Vec<TestField> {
    if p < 2 {
        Vec::new()
    } else {
        raviart_thomas(3, p - 2)
    }
}

/// Builds the DOF functionals for the given orientation, in layout order.
pub fn functionals(p: usize, orient: Orientation) -> Result<Vec<Functional>> {
    let edge_rule = interval_rule(2 * p)?;
    let face_rule = tri_rule(2 * p)?;
    let tet = tet_rule(2 * p)?;
    let mut out = Vec::with_capacity(local_dimension(p));

    for e in 0..6 {
        let [a, b] = orient.edge(e);
        let (xa, xb) = (REF_VERTICES[a], REF_VERTICES[b]);
        let t = [xb[0] - xa[0], xb[1] - xa[1], xb[2] - xa[2]];
        for k in 0..=p {
            let mut f = Functional::default();
            for (s, w) in edge_rule.iter() {
                let s = s[0];
                let l = w * legendre01(k, s);
                f.points.push([xa[0] + s * t[0], xa[1] + s * t[1], xa[2] + s * t[2]]);
                f.weights.push([l * t[0], l * t[1], l * t[2]]);
            }
            out.push(f);
        }
    }

    let face_tests = face_tests(p);
    for fi in 0..4 {
        let [a, b, c] = orient.face(fi);
        let xa = REF_VERTICES[a];
        let t1: [f64; 3] = std::array::from_fn(|i| REF_VERTICES[b][i] - xa[i]);
        let t2: [f64; 3] = std::array::from_fn(|i| REF_VERTICES[c][i] - xa[i]);
        for q in &face_tests {
            let mut f = Functional::default();
            for (st, w) in face_rule.iter() {
                let qv = q(st);
                f.points.push(std::array::from_fn(|i| xa[i] + st[0] * t1[i] + st[1] * t2[i]));
                f.weights.push(std::array::from_fn(|i| w * (qv[0] * t1[i] + qv[1] * t2[i])));
            }
            out.push(f);
        }
    }

    {
        for q in interior_tests(p) {
            let mut f = Functional::default();
            for (x, w) in tet.iter() {
                let qv = q(x);
                f.points.push(*x);
                f.weights.push([w * qv[0], w * qv[1], w * qv[2]]);
            }
            out.push(f);
        }
    }
    Ok(out)
}

/// Value and curl of every basis function at one reference point.
#[derive(Debug, Clone)]
pub struct PointTabulation {
    pub values: Vec<Vector3<f64>>,
    pub curls: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    pub p: usize,
    pub layout: Layout,
    /// Scalar monomial exponents; vector monomial `j` is
    /// `e_{j / n_mono} * m_{j % n_mono}`.
    exps: Vec<[u32; 3]>,
    /// Dual-basis coefficients per orientation class (indexed by
    /// [`Orientation::index`]); column `k` holds basis function `k`.
    coefficients: Vec<DMatrix<f64>>,
}

impl ReferenceBasis {
    pub fn new(p: usize) -> Result<Self> {
        if !(1..=3).contains(&p) {
            return Err(Error::UnsupportedOrder(p));
        }
        let layout = Layout::new(p);
        let exps = exponents(3, p);
        let n = local_dimension(p);
        debug_assert_eq!(3 * exps.len(), n);
        debug_assert_eq!(layout.total(), n);

        let mut coefficients = vec![DMatrix::zeros(0, 0); 24];
        for orient in Orientation::all() {
            let gram = gram_matrix(p, &exps, orient)?;
            let inv = gram
                .try_inverse()
                .ok_or(Error::SingularGram(orient.index()))?;
            coefficients[orient.index()] = inv;
        }
        Ok(Self {
            p,
            layout,
            exps,
            coefficients,
        })
    }

    pub fn dim(&self) -> usize {
        3 * self.exps.len()
    }

    pub fn coefficients(&self, orient: Orientation) -> &DMatrix<f64> {
        &self.coefficients[orient.index()]
    }

    /// Evaluates every basis function (reference frame) of the given
    /// orientation class at `xh`.
    pub fn tabulate(&self, orient: Orientation, xh: &[f64; 3]) -> PointTabulation {
        let nm = self.exps.len();
        let n = self.dim();
        let vals: Vec<f64> = self.exps.iter().map(|e| monomial(e, xh)).collect();
        let grads: Vec<[f64; 3]> = self.exps.iter().map(|e| monomial_grad(e, xh)).collect();
        let c = &self.coefficients[orient.index()];
        let mut values = vec![Vector3::zeros(); n];
        let mut curls = vec![Vector3::zeros(); n];
        for (k, (vk, ck)) in values.iter_mut().zip(curls.iter_mut()).enumerate() {
            for comp in 0..3 {
                for (mi, (&mv, g)) in vals.iter().zip(&grads).enumerate() {
                    let coef = c[(comp * nm + mi, k)];
                    if coef == 0.0 {
                        continue;
                    }
                    vk[comp] += coef * mv;
                    // curl(m e_c) = grad m x e_c
                    match comp {
                        0 => {
                            ck[1] += coef * g[2];
                            ck[2] -= coef * g[1];
                        }
                        1 => {
                            ck[0] -= coef * g[2];
                            ck[2] += coef * g[0];
                        }
                        _ => {
                            ck[0] += coef * g[1];
                            ck[1] -= coef * g[0];
                        }
                    }
                }
            }
        }
        PointTabulation { values, curls }
    }

    /// Value of the vector monomial `j` at `xh`.
    pub fn vector_monomial(&self, j: usize, xh: &[f64; 3]) -> [f64; 3] {
        let nm = self.exps.len();
        let mut v = [0.0; 3];
        v[j / nm] = monomial(&self.exps[j % nm], xh);
        v
    }

    /// `ell_i(phi_j)` for the orientation's functionals and dual basis.
    pub fn duality_matrix(&self, orient: Orientation) -> Result<DMatrix<f64>> {
        let fs = functionals(self.p, orient)?;
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for (i, f) in fs.iter().enumerate() {
            let tabs: Vec<PointTabulation> =
                f.points.iter().map(|x| self.tabulate(orient, x)).collect();
            for j in 0..n {
                out[(i, j)] = f
                    .weights
                    .iter()
                    .zip(&tabs)
                    .map(|(w, t)| w[0] * t.values[j][0] + w[1] * t.values[j][1] + w[2] * t.values[j][2])
                    .sum();
            }
        }
        Ok(out)
    }
}

fn gram_matrix(p: usize, exps: &[[u32; 3]], orient: Orientation) -> Result<DMatrix<f64>> {
    let fs = functionals(p, orient)?;
    let nm = exps.len();
    let n = 3 * nm;
    let mut g = DMatrix::zeros(n, n);
    for (i, f) in fs.iter().enumerate() {
        for (x, w) in f.points.iter().zip(&f.weights) {
            for (mi, e) in exps.iter().enumerate() {
                let m = monomial(e, x);
                for comp in 0..3 {
                    g[(i, comp * nm + mi)] += w[comp] * m;
                }
            }
        }
    }
    Ok(g)
}
