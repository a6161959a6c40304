//! Solvers for the complex sparse system `A x = b`.
//!
//! The default is a sparse LU factorization (COLAMD column ordering, partial
//! pivoting) run sequentially so results are reproducible, followed by a few
//! steps of iterative refinement when the residual misses the gate. The
//! fallback is restarted GMRES with an ILU(0) right preconditioner.

use std::str::FromStr;
use std::time::{Duration, Instant};

use faer::dyn_stack::{MemBuffer, MemStack, StackReq};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuSymbolicParams, NumericLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, Mat, Par};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sparse::ComplexSparseMatrix;

/// Acceptance threshold for the relative residual `|Ax - b| / |b|`.
pub const RESIDUAL_GATE: f64 = 1e-9;

const REFINEMENT_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Lu,
    Gmres,
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lu" => Ok(Self::Lu),
            "gmres" => Ok(Self::Gmres),
            other => Err(Error::InvalidConfig(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub kind: SolverKind,
    /// GMRES stopping tolerance on the relative residual.
    pub tol: f64,
    pub restart: usize,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            kind: SolverKind::Lu,
            tol: 1e-10,
            restart: 100,
            max_iterations: 5000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<Complex64>,
    pub relative_residual: f64,
    pub kind: SolverKind,
    /// GMRES iterations, or refinement steps after LU.
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub wall_time: Duration,
}

impl SolveReport {
    pub fn meets_gate(&self) -> bool {
        self.relative_residual <= RESIDUAL_GATE
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `|A x - b| / |b|` (or `|A x|` when `b = 0`).
pub fn relative_residual(a: &ComplexSparseMatrix, x: &[Complex64], b: &[Complex64]) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<Complex64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

pub fn solve(a: &ComplexSparseMatrix, b: &[Complex64], opts: &SolverOptions) -> Result<SolveReport> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.len(),
        });
    }
    let start = Instant::now();
    let mut report = match opts.kind {
        SolverKind::Lu => solve_lu(a, b)?,
        SolverKind::Gmres => gmres(a, b, opts)?,
    };
    report.wall_time = start.elapsed();
    Ok(report)
}

/// Column-compressed copy of a row-compressed matrix.
fn to_csc(a: &ComplexSparseMatrix) -> (Vec<usize>, Vec<usize>, Vec<Complex64>) {
    let n = a.dim();
    let mut col_ptr = vec![0usize; n + 1];
    for &c in a.col_indices() {
        col_ptr[c + 1] += 1;
    }
    for j in 0..n {
        col_ptr[j + 1] += col_ptr[j];
    }
    let mut fill = col_ptr.clone();
    let mut rows = vec![0usize; a.nnz()];
    let mut vals = vec![Complex64::new(0.0, 0.0); a.nnz()];
    for i in 0..n {
        let (cols, v) = a.row(i);
        for (&c, &x) in cols.iter().zip(v) {
            rows[fill[c]] = i;
            vals[fill[c]] = x;
            fill[c] += 1;
        }
    }
    (col_ptr, rows, vals)
}

fn solve_lu(a: &ComplexSparseMatrix, b: &[Complex64]) -> Result<SolveReport> {
    let n = a.dim();
    let (col_ptr, rows, vals) = to_csc(a);
    let symbolic = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &rows);
    let mat = SparseColMatRef::new(symbolic, &vals);

    let sym = factorize_symbolic_lu(symbolic, LuSymbolicParams::default())
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let par = Par::Seq;
    let mut numeric = NumericLu::<usize, Complex64>::new();
    let req = StackReq::any_of(&[
        sym.factorize_numeric_lu_scratch::<Complex64>(par, Default::default()),
        sym.solve_in_place_scratch::<Complex64>(1, par),
    ]);
    let mut buf = MemBuffer::new(req);
    let stack = MemStack::new(&mut buf);
    let lu = sym
        .factorize_numeric_lu(&mut numeric, mat, par, stack, Default::default())
        .map_err(|e| match e {
            LuError::SymbolicSingular { index } => Error::SingularMatrix { pivot: index },
            LuError::Generic(g) => Error::Factorization(format!("{g:?}")),
        })?;

    let lu_solve = |rhs: &[Complex64], stack: &mut MemStack| -> Vec<Complex64> {
        let mut m = Mat::<Complex64>::from_fn(n, 1, |i, _| rhs[i]);
        lu.solve_in_place_with_conj(Conj::No, m.as_mut(), par, stack);
        (0..n).map(|i| m[(i, 0)]).collect()
    };

    let mut x = lu_solve(b, stack);
    if let Some(i) = x.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Factorization(format!(
            "numerically singular matrix: non-finite solution entry {i}"
        )));
    }
    let mut res = relative_residual(a, &x, b);
    let mut history = vec![res];
    let mut steps = 0;
    while res > RESIDUAL_GATE && steps < REFINEMENT_STEPS {
        let ax = a.matvec(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let dx = lu_solve(&r, stack);
        let trial: Vec<Complex64> = x.iter().zip(&dx).map(|(p, q)| p + q).collect();
        let trial_res = relative_residual(a, &trial, b);
        steps += 1;
        if trial_res.is_nan() || trial_res >= res {
            break;
        }
        x = trial;
        res = trial_res;
        history.push(res);
    }
    Ok(SolveReport {
        x,
        relative_residual: res,
        kind: SolverKind::Lu,
        iterations: steps,
        residual_history: history,
        wall_time: Duration::ZERO,
    })
}

/// Incomplete LU on the pattern of `A`, stored in place (unit lower part).
pub struct Ilu0 {
    lu: ComplexSparseMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &ComplexSparseMatrix) -> Result<Self> {
        let n = a.dim();
        let mut lu = a.clone();
        let mut diag = Vec::with_capacity(n);
        for i in 0..n {
            diag.push(lu.position(i, i).ok_or(Error::SingularMatrix { pivot: i })?);
        }
        let row_ptr = lu.row_ptr().to_vec();
        let cols = lu.col_indices().to_vec();
        let vals = lu.values_mut();
        for i in 0..n {
            for kk in row_ptr[i]..row_ptr[i + 1] {
                let k = cols[kk];
                if k >= i {
                    break;
                }
                let pivot = vals[diag[k]];
                if pivot.norm() == 0.0 {
                    return Err(Error::SingularMatrix { pivot: k });
                }
                let lik = vals[kk] / pivot;
                vals[kk] = lik;
                // row_i -= l_ik * row_k over the upper part of row k, restricted to the pattern of row i
                let mut p = kk + 1;
                for kj in diag[k] + 1..row_ptr[k + 1] {
                    let j = cols[kj];
                    while p < row_ptr[i + 1] && cols[p] < j {
                        p += 1;
                    }
                    if p < row_ptr[i + 1] && cols[p] == j {
                        let u = vals[kj];
                        vals[p] -= lik * u;
                    }
                }
            }
            if vals[diag[i]].norm() == 0.0 {
                return Err(Error::SingularMatrix { pivot: i });
            }
        }
        Ok(Self { lu, diag })
    }

    /// Solves `L U z = r`.
    pub fn apply(&self, r: &[Complex64]) -> Vec<Complex64> {
        let n = r.len();
        let mut z = r.to_vec();
        for i in 0..n {
            let (cols, vals) = self.lu.row(i);
            let start = self.lu.row_ptr()[i];
            let mut s = z[i];
            for (&j, &v) in cols.iter().zip(vals).take(self.diag[i] - start) {
                s -= v * z[j];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let (cols, vals) = self.lu.row(i);
            let d = self.diag[i] - self.lu.row_ptr()[i];
            let mut s = z[i];
            for (&j, &v) in cols.iter().zip(vals).skip(d + 1) {
                s -= v * z[j];
            }
            z[i] = s / vals[d];
        }
        z
    }
}

/// Restarted GMRES with ILU(0) right preconditioning, zero initial guess.
fn gmres(a: &ComplexSparseMatrix, b: &[Complex64], opts: &SolverOptions) -> Result<SolveReport> {
    let n = a.dim();
    let zero = Complex64::new(0.0, 0.0);
    let nb = norm(b);
    if nb == 0.0 {
        return Ok(SolveReport {
            x: vec![zero; n],
            relative_residual: 0.0,
            kind: SolverKind::Gmres,
            iterations: 0,
            residual_history: vec![0.0],
            wall_time: Duration::ZERO,
        });
    }
    let ilu = Ilu0::new(a)?;
    let m = opts.restart.max(1);
    let mut x = vec![zero; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    loop {
        let ax = a.matvec(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm(&r);
        let rel = beta / nb;
        history.push(rel);
        if rel <= opts.tol {
            break;
        }
        if iterations >= opts.max_iterations {
            return Err(Error::NotConverged {
                iterations,
                final_residual: rel,
                history,
            });
        }

        let mut v: Vec<Vec<Complex64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut h = vec![vec![zero; m]; m + 1];
        let (mut cs, mut sn) = (vec![zero; m], vec![zero; m]);
        let mut g = vec![zero; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k = 0;
        while k < m && iterations < opts.max_iterations {
            let mut w = a.matvec(&ilu.apply(&v[k]));
            for (j, vj) in v.iter().enumerate() {
                let hjk: Complex64 = vj.iter().zip(&w).map(|(p, q)| p.conj() * q).sum();
                h[j][k] = hjk;
                for (wi, vi) in w.iter_mut().zip(vj) {
                    *wi -= hjk * vi;
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = Complex64::new(hn, 0.0);
            for j in 0..k {
                let t = cs[j].conj() * h[j][k] + sn[j].conj() * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let (c, s) = givens(h[k][k], h[k + 1][k]);
            cs[k] = c;
            sn[k] = s;
            h[k][k] = c.conj() * h[k][k] + s.conj() * h[k + 1][k];
            h[k + 1][k] = zero;
            g[k + 1] = -s * g[k];
            g[k] = c.conj() * g[k];
            k += 1;
            iterations += 1;
            let est = g[k].norm() / nb;
            if est <= opts.tol || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|z| z / hn).collect());
        }
        // back substitution for y, then x += M^{-1} V y
        let mut y = vec![zero; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![zero; n];
        for (vj, yj) in v.iter().zip(&y) {
            for (u, vi) in update.iter_mut().zip(vj) {
                *u += yj * vi;
            }
        }
        for (xi, di) in x.iter_mut().zip(ilu.apply(&update)) {
            *xi += di;
        }
    }
    let relative_residual = *history.last().expect("at least one residual");
    Ok(SolveReport {
        x,
        relative_residual,
        kind: SolverKind::Gmres,
        iterations,
        residual_history: history,
        wall_time: Duration::ZERO,
    })
}

/// Complex Givens rotation `(c, s)` with `[c* s*; -s c] [a; b] = [r; 0]`.
fn givens(a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    let (na, nb) = (a.norm(), b.norm());
    if nb == 0.0 {
        return (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    }
    if na == 0.0 {
        return (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
    }
    let r = na.hypot(nb);
    (a / r, b / r)
}
