//! Galerkin system for the impedance problem:
//! `A = S - k^2 Mv - i k lambda B`, `b_i = (f, phi_i) + <g, phi_i,T>`.
//!
//! Volume matrices are built from reference tensors `int v_i^a v_j^b` and
//! `int c_i^a c_j^b` per orientation class, contracted with the element
//! metric. Element blocks are computed in parallel, in fixed-size chunks, and
//! scattered serially in element order so the result does not depend on the
//! thread count.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fe_basis::{FeSpace, RuleTable, REF_VERTICES};
use crate::manufactured::{Manufactured, ProblemParams};
use crate::mesh::LOCAL_FACES;
use crate::quadrature::{assembly_degree, load_degree, tet_rule, tri_rule, QuadratureRule};
use crate::sparse::{ComplexSparseMatrix, CsrMatrix, RealSparseMatrix};

const CHUNK: usize = 512;

/// Quadrature degrees used for bilinear terms and for data (load, errors).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadPolicy {
    pub matrix_degree: usize,
    pub load_degree: usize,
}

impl QuadPolicy {
    pub fn standard(p: usize, kappa: f64, h: f64) -> Self {
        Self {
            matrix_degree: assembly_degree(p),
            load_degree: load_degree(p, kappa, h),
        }
    }

    /// Replaces the data degree; the matrix degree never drops below `2p`,
    /// where products of basis functions stop being integrated exactly.
    pub fn with_override(self, p: usize, degree: Option<usize>) -> Self {
        match degree {
            Some(q) => Self {
                matrix_degree: self.matrix_degree.min(q).max(2 * p),
                load_degree: q,
            },
            None => self,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub a: ComplexSparseMatrix,
    pub b: Vec<Complex64>,
    pub s: RealSparseMatrix,
    pub mv: RealSparseMatrix,
    pub bnd: RealSparseMatrix,
    pub params: ProblemParams,
    pub policy: QuadPolicy,
}

impl AssembledSystem {
    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// Largest entrywise deviation from `A = S - k^2 Mv - i k lambda B`,
    /// relative to the largest entry of `A`.
    pub fn decomposition_defect(&self) -> f64 {
        let (k, l) = (self.params.kappa, self.params.lambda);
        let scale = self.a.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let worst = self
            .a
            .values()
            .iter()
            .zip(self.s.values())
            .zip(self.mv.values())
            .zip(self.bnd.values())
            .map(|(((a, s), m), b)| (a - Complex64::new(s - k * k * m, -k * l * b)).norm())
            .fold(0.0, f64::max);
        if scale == 0.0 {
            worst
        } else {
            worst / scale
        }
    }

    pub fn write_matrix_market<W: Write>(&self, out: &mut W) -> Result<()> {
        self.a.write_matrix_market(out)
    }
}

/// Sparsity of the global matrix: `(i, j)` is present when DOFs `i` and `j`
/// share a tetrahedron.
pub fn sparsity(space: &FeSpace) -> (Vec<usize>, Vec<usize>) {
    let n = space.total_dofs();
    let ne = space.mesh.num_tets();
    let mut count = vec![0usize; n + 1];
    for e in 0..ne {
        for &g in space.dofs.element(e) {
            count[g + 1] += 1;
        }
    }
    for i in 0..n {
        count[i + 1] += count[i];
    }
    let mut fill = count.clone();
    let mut elems = vec![0usize; count[n]];
    for e in 0..ne {
        for &g in space.dofs.element(e) {
            elems[fill[g]] = e;
            fill[g] += 1;
        }
    }
    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cols: Vec<usize> = elems[count[i]..count[i + 1]]
                .iter()
                .flat_map(|&e| space.dofs.element(e).iter().copied())
                .collect();
            cols.sort_unstable();
            cols.dedup();
            cols
        })
        .collect();
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut cols = Vec::with_capacity(rows.iter().map(Vec::len).sum());
    for r in rows {
        cols.extend(r);
        row_ptr.push(cols.len());
    }
    (row_ptr, cols)
}

/// `int v_i^a v_j^b` and `int c_i^a c_j^b` over the reference element for
/// one orientation class, laid out as `((i n + j) 3 + a) 3 + b`.
struct ReferenceTensors {
    mass: Vec<f64>,
    curl: Vec<f64>,
}

fn reference_tensors(table: &RuleTable, rule: &QuadratureRule<3>) -> ReferenceTensors {
    let n = table.n_basis;
    let mut mass = vec![0.0; n * n * 9];
    let mut curl = vec![0.0; n * n * 9];
    for (q, (_, w)) in rule.iter().enumerate() {
        let vals = table.values_at(q);
        let curls = table.curls_at(q);
        for i in 0..n {
            for j in 0..n {
                let base = (i * n + j) * 9;
                for a in 0..3 {
                    for b in 0..3 {
                        mass[base + a * 3 + b] += w * vals[i][a] * vals[j][b];
                        curl[base + a * 3 + b] += w * curls[i][a] * curls[j][b];
                    }
                }
            }
        }
    }
    ReferenceTensors { mass, curl }
}

/// Local contributions of one tetrahedron (or one boundary face).
struct Block {
    s: Vec<f64>,
    m: Vec<f64>,
    load: Vec<Complex64>,
}

fn contract(tensor: &[f64], metric: &Matrix3<f64>, scale: f64, n: usize) -> Vec<f64> {
    let g: [f64; 9] = std::array::from_fn(|k| metric[(k / 3, k % 3)]);
    (0..n * n)
        .map(|ij| {
            let t = &tensor[ij * 9..ij * 9 + 9];
            scale * t.iter().zip(&g).map(|(x, y)| x * y).sum::<f64>()
        })
        .collect()
}

fn volume_block(
    space: &FeSpace,
    problem: &Manufactured,
    e: usize,
    tensors: &[Option<ReferenceTensors>],
    load_tables: &[Option<RuleTable>],
    load_rule: &QuadratureRule<3>,
) -> Block {
    let n = space.dofs.n_local();
    let map = &space.mesh.element_maps[e];
    let o = space.dofs.orientation(e).index();
    let t = tensors[o].as_ref().expect("class tabulated");
    let adet = map.det.abs();
    let binv = map.jacobian_inv;
    let m = contract(&t.mass, &(binv * binv.transpose()), adet, n);
    let s = contract(&t.curl, &(map.jacobian.transpose() * map.jacobian), 1.0 / adet, n);

    // (f, B^{-T} v_i) = (B^{-1} f, v_i)
    let table = load_tables[o].as_ref().expect("class tabulated");
    let binv_c = binv.map(|x| Complex64::new(x, 0.0));
    let mut load = vec![Complex64::new(0.0, 0.0); n];
    for (q, (xh, w)) in load_rule.iter().enumerate() {
        let fh = binv_c * problem.eval_f(&map.map(xh)) * Complex64::from(w * adet);
        for (l, v) in load.iter_mut().zip(table.values_at(q)) {
            *l += fh[0] * v[0] + fh[1] * v[1] + fh[2] * v[2];
        }
    }
    Block { s, m, load }
}

/// Reference points of `rule` mapped onto local face `lf`.
fn face_points(lf: usize, rule: &QuadratureRule<2>) -> Vec<[f64; 3]> {
    let [a, b, c] = LOCAL_FACES[lf].map(|v| Vector3::from(REF_VERTICES[v]));
    rule.iter()
        .map(|(st, _)| (a + (b - a) * st[0] + (c - a) * st[1]).into())
        .collect()
}

pub(crate) type FaceTables = BTreeMap<(usize, usize), RuleTable>;

pub(crate) fn face_tables(space: &FeSpace, rule: &QuadratureRule<2>) -> FaceTables {
    let mut out = FaceTables::new();
    for bf in &space.mesh.boundary_faces {
        let o = space.dofs.orientation(bf.tet);
        out.entry((o.index(), bf.local_face))
            .or_insert_with(|| space.tabulate(o, &face_points(bf.local_face, rule)));
    }
    out
}

/// Physical tangential traces of all local basis functions at each point.
fn traces(space: &FeSpace, tet: usize, table: &RuleTable, nu: &Vector3<f64>) -> Vec<Vector3<f64>> {
    let bit = space.mesh.element_maps[tet].jacobian_inv.transpose();
    table
        .values
        .iter()
        .map(|v| {
            let phi = bit * v;
            phi - nu * phi.dot(nu)
        })
        .collect()
}

fn boundary_block(
    space: &FeSpace,
    problem: &Manufactured,
    k: usize,
    mat: (&FaceTables, &QuadratureRule<2>),
    data: (&FaceTables, &QuadratureRule<2>),
) -> Block {
    let bf = &space.mesh.boundary_faces[k];
    let n = space.dofs.n_local();
    let key = (space.dofs.orientation(bf.tet).index(), bf.local_face);
    let map = &space.mesh.element_maps[bf.tet];
    let [a, b, c] = LOCAL_FACES[bf.local_face].map(|v| map.map(&REF_VERTICES[v]));
    let area2 = (b - a).cross(&(c - a)).norm();

    let mut m = vec![0.0; n * n];
    let tr = traces(space, bf.tet, &mat.0[&key], &bf.normal);
    for (q, (_, w)) in mat.1.iter().enumerate() {
        let phi = &tr[q * n..(q + 1) * n];
        let wq = w * area2;
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] += wq * phi[i].dot(&phi[j]);
            }
        }
    }

    let mut load = vec![Complex64::new(0.0, 0.0); n];
    let tr = traces(space, bf.tet, &data.0[&key], &bf.normal);
    for (q, (st, w)) in data.1.iter().enumerate() {
        let x = a + (b - a) * st[0] + (c - a) * st[1];
        let g = problem.eval_g(&x, &bf.normal) * Complex64::from(w * area2);
        for (l, phi) in load.iter_mut().zip(&tr[q * n..(q + 1) * n]) {
            *l += g[0] * phi[0] + g[1] * phi[1] + g[2] * phi[2];
        }
    }
    Block {
        s: Vec::new(),
        m,
        load,
    }
}

fn class_tensors(space: &FeSpace, rule: &QuadratureRule<3>) -> Vec<Option<ReferenceTensors>> {
    let pts: Vec<[f64; 3]> = rule.iter().map(|(x, _)| *x).collect();
    space
        .tabulate_classes(&pts)
        .into_iter()
        .map(|t| t.map(|t| reference_tensors(&t, rule)))
        .collect()
}

/// Runs `f` over `0..count` in chunks, in parallel within a chunk when
/// requested, and hands every result to `sink` in index order.
pub(crate) fn for_each_ordered<T: Send>(
    count: usize,
    parallel: bool,
    f: impl Fn(usize) -> T + Sync,
    mut sink: impl FnMut(usize, T),
) {
    let mut start = 0;
    while start < count {
        let end = (start + CHUNK).min(count);
        let blocks: Vec<T> = if parallel {
            (start..end).into_par_iter().map(&f).collect()
        } else {
            (start..end).map(&f).collect()
        };
        for (k, blk) in blocks.into_iter().enumerate() {
            sink(start + k, blk);
        }
        start = end;
    }
}

fn scatter(target: &mut RealSparseMatrix, dofs: &[usize], local: &[f64]) -> Result<()> {
    let n = dofs.len();
    for (i, &gi) in dofs.iter().enumerate() {
        for (j, &gj) in dofs.iter().enumerate() {
            let pos = target.position(gi, gj).ok_or_else(|| {
                Error::InconsistentDofMap(format!("entry ({gi}, {gj}) missing from sparsity"))
            })?;
            target.values_mut()[pos] += local[i * n + j];
        }
    }
    Ok(())
}

/// Assembles matrix, load and diagnostic parts for `problem` on `space`.
pub fn assemble(
    space: &FeSpace,
    problem: &Manufactured,
    policy: QuadPolicy,
    parallel: bool,
) -> Result<AssembledSystem> {
    let n = space.total_dofs();
    let (row_ptr, cols) = sparsity(space);
    let mut s = CsrMatrix::<f64>::from_pattern(n, row_ptr, cols)?;
    let mut mv = s.clone();
    let mut bnd = s.clone();
    let mut b = vec![Complex64::new(0.0, 0.0); n];

    let mat_rule = tet_rule(policy.matrix_degree)?;
    let load_rule = tet_rule(policy.load_degree)?;
    let tensors = class_tensors(space, &mat_rule);
    let load_pts: Vec<[f64; 3]> = load_rule.iter().map(|(x, _)| *x).collect();
    let load_tables = space.tabulate_classes(&load_pts);

    let mut err = Ok(());
    for_each_ordered(
        space.mesh.num_tets(),
        parallel,
        |e| volume_block(space, problem, e, &tensors, &load_tables, &load_rule),
        |e, blk| {
            let dofs = space.dofs.element(e);
            if err.is_ok() {
                err = scatter(&mut s, dofs, &blk.s).and_then(|_| scatter(&mut mv, dofs, &blk.m));
            }
            for (&g, l) in dofs.iter().zip(&blk.load) {
                b[g] += l;
            }
        },
    );
    err?;

    let tri_mat = tri_rule(policy.matrix_degree)?;
    let tri_load = tri_rule(policy.load_degree)?;
    let ft_mat = face_tables(space, &tri_mat);
    let ft_load = face_tables(space, &tri_load);
    let mut err = Ok(());
    for_each_ordered(
        space.mesh.boundary_faces.len(),
        parallel,
        |k| boundary_block(space, problem, k, (&ft_mat, &tri_mat), (&ft_load, &tri_load)),
        |k, blk| {
            let dofs = space.dofs.element(space.mesh.boundary_faces[k].tet);
            if err.is_ok() {
                err = scatter(&mut bnd, dofs, &blk.m);
            }
            for (&g, l) in dofs.iter().zip(&blk.load) {
                b[g] += l;
            }
        },
    );
    err?;

    let (k, l) = (problem.params.kappa, problem.params.lambda);
    let mut a = s.map(|v| Complex64::new(v, 0.0));
    for (((av, sv), mvv), bv) in a
        .values_mut()
        .iter_mut()
        .zip(s.values())
        .zip(mv.values())
        .zip(bnd.values())
    {
        *av = Complex64::new(sv - k * k * mvv, -k * l * bv);
    }

    Ok(AssembledSystem {
        a,
        b,
        s,
        mv,
        bnd,
        params: problem.params,
        policy,
    })
}
