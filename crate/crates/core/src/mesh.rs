//! Structured tetrahedral meshes of the unit cube.
//!
//! The cube is split into `M^3` cells of side `1/M`; every cell is cut into
//! the six Kuhn tetrahedra `{x_pi(1) >= x_pi(2) >= x_pi(3)}`. The
//! construction is translation invariant, so diagonals on shared cell faces
//! always match.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Point3 = Vector3<f64>;

/// Local vertex pairs of the six edges of a tetrahedron.
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Local vertex triples of the four faces; face `i` is opposite vertex `i`.
pub const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

/// Affine map `x = B x_hat + c` from the reference tetrahedron.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMap {
    pub jacobian: Matrix3<f64>,
    pub jacobian_inv: Matrix3<f64>,
    pub det: f64,
    pub origin: Point3,
}

impl ElementMap {
    pub fn from_vertices(v: &[Point3; 4]) -> Option<Self> {
        let jacobian = Matrix3::from_columns(&[v[1] - v[0], v[2] - v[0], v[3] - v[0]]);
        let det = jacobian.determinant();
        let jacobian_inv = jacobian.try_inverse()?;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Self {
            jacobian,
            jacobian_inv,
            det,
            origin: v[0],
        })
    }

    pub fn map(&self, xh: &[f64; 3]) -> Point3 {
        self.origin + self.jacobian * Vector3::new(xh[0], xh[1], xh[2])
    }

    pub fn inverse_map(&self, x: &Point3) -> Point3 {
        self.jacobian_inv * (x - self.origin)
    }
}

/// A boundary triangle with its outward unit normal and owning tetrahedron.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFace {
    pub face: usize,
    pub tet: usize,
    /// Index into [`LOCAL_FACES`] of the face inside `tet`.
    pub local_face: usize,
    pub normal: Point3,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub m: usize,
    pub h0: f64,
    pub h: f64,
    pub vertices: Vec<Point3>,
    pub tets: Vec<[usize; 4]>,
    /// `(lo, hi)` with `lo < hi`, sorted lexicographically.
    pub edges: Vec<[usize; 2]>,
    /// Ascending vertex triples, sorted lexicographically.
    pub faces: Vec<[usize; 3]>,
    pub tet_edges: Vec<[usize; 6]>,
    pub tet_faces: Vec<[usize; 4]>,
    pub boundary_faces: Vec<BoundaryFace>,
    pub element_maps: Vec<ElementMap>,
}

/// The six permutations of the coordinate axes with their parity.
const AXIS_PERMUTATIONS: [([usize; 3], bool); 6] = [
    ([0, 1, 2], true),
    ([0, 2, 1], false),
    ([1, 0, 2], false),
    ([1, 2, 0], true),
    ([2, 0, 1], true),
    ([2, 1, 0], false),
];

impl Mesh {
    /// Builds the Kuhn mesh with `m^3` cells.
    pub fn cube(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::ZeroSubdivision(m));
        }
        // Largest supported order is 3; its DOF count must fit in usize with headroom.
        if m > 1 << 20 || crate::fe_basis::dof_formula(m as u128, 3) > (usize::MAX as u128) / 64 {
            return Err(Error::DofOverflow { m, p: 3 });
        }

        let n = m + 1;
        let h0 = 1.0 / m as f64;
        let vid = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
        let mut vertices = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    vertices.push(Point3::new(
                        i as f64 / m as f64,
                        j as f64 / m as f64,
                        k as f64 / m as f64,
                    ));
                }
            }
        }

        let mut tets = Vec::with_capacity(6 * m * m * m);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for (perm, even) in AXIS_PERMUTATIONS {
                        let mut idx = [i, j, k];
                        let mut path = [vid(i, j, k); 4];
                        for (step, &axis) in perm.iter().enumerate() {
                            idx[axis] += 1;
                            path[step + 1] = vid(idx[0], idx[1], idx[2]);
                        }
                        if !even {
                            path.swap(2, 3);
                        }
                        tets.push(path);
                    }
                }
            }
        }

        let mut edge_set: Vec<[usize; 2]> = tets
            .iter()
            .flat_map(|t| LOCAL_EDGES.map(|[a, b]| sorted2(t[a], t[b])))
            .collect();
        edge_set.sort_unstable();
        edge_set.dedup();
        let mut face_set: Vec<[usize; 3]> = tets
            .iter()
            .flat_map(|t| LOCAL_FACES.map(|[a, b, c]| sorted3(t[a], t[b], t[c])))
            .collect();
        face_set.sort_unstable();
        face_set.dedup();

        let tet_edges: Vec<[usize; 6]> = tets
            .iter()
            .map(|t| {
                LOCAL_EDGES.map(|[a, b]| {
                    edge_set
                        .binary_search(&sorted2(t[a], t[b]))
                        .expect("edge present")
                })
            })
            .collect();
        let tet_faces: Vec<[usize; 4]> = tets
            .iter()
            .map(|t| {
                LOCAL_FACES.map(|[a, b, c]| {
                    face_set
                        .binary_search(&sorted3(t[a], t[b], t[c]))
                        .expect("face present")
                })
            })
            .collect();

        let mut element_maps = Vec::with_capacity(tets.len());
        for (e, t) in tets.iter().enumerate() {
            let v = t.map(|i| vertices[i]);
            element_maps.push(ElementMap::from_vertices(&v).ok_or(Error::SingularElementMap(e))?);
        }

        let mut mesh = Self {
            m,
            h0,
            h: h0 * 3f64.sqrt(),
            vertices,
            tets,
            edges: edge_set,
            faces: face_set,
            tet_edges,
            tet_faces,
            boundary_faces: Vec::new(),
            element_maps,
        };

        let mut boundary = Vec::with_capacity(12 * m * m);
        for (e, tf) in mesh.tet_faces.iter().enumerate() {
            for (lf, &f) in tf.iter().enumerate() {
                if let Ok(normal) = mesh.classify_boundary_face(mesh.faces[f]) {
                    boundary.push(BoundaryFace {
                        face: f,
                        tet: e,
                        local_face: lf,
                        normal,
                    });
                }
            }
        }
        boundary.sort_by_key(|b| b.face);
        mesh.boundary_faces = boundary;
        Ok(mesh)
    }

    /// Outward unit normal of a face lying in one of the planes `x_i = 0`
    /// or `x_i = 1`.
    pub fn classify_boundary_face(&self, face: [usize; 3]) -> Result<Point3> {
        let p = face.map(|i| self.vertices[i]);
        for axis in 0..3 {
            for (value, sign) in [(0.0, -1.0), (1.0, 1.0)] {
                if p.iter().all(|q| q[axis] == value) {
                    let mut nu = Point3::zeros();
                    nu[axis] = sign;
                    return Ok(nu);
                }
            }
        }
        Err(Error::NotBoundaryFace(face))
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_vertices(&self, e: usize) -> [Point3; 4] {
        self.tets[e].map(|i| self.vertices[i])
    }

    pub fn signed_volume(&self, e: usize) -> f64 {
        self.element_maps[e].det / 6.0
    }

    /// Number of tetrahedra incident to each face.
    pub fn face_incidence(&self) -> Vec<u32> {
        let mut count = vec![0u32; self.faces.len()];
        for tf in &self.tet_faces {
            for &f in tf {
                count[f] += 1;
            }
        }
        count
    }

    /// For every face, the incident `(tet, local_face)` pairs.
    pub fn face_neighbours(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::with_capacity(2); self.faces.len()];
        for (e, tf) in self.tet_faces.iter().enumerate() {
            for (lf, &f) in tf.iter().enumerate() {
                out[f].push((e, lf));
            }
        }
        out
    }

    /// Legacy ASCII VTK unstructured grid (cell type 10). `cell_data`, if
    /// given, is written as a scalar field with one value per tetrahedron.
    pub fn write_vtk<W: Write>(&self, out: &mut W, cell_data: Option<(&str, &[f64])>) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "# vtk DataFile Version 3.0");
        let _ = writeln!(s, "Kuhn mesh of the unit cube, M = {}", self.m);
        let _ = writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID");
        let _ = writeln!(s, "POINTS {} double", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
        }
        let _ = writeln!(s, "CELLS {} {}", self.tets.len(), 5 * self.tets.len());
        for t in &self.tets {
            let _ = writeln!(s, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
        }
        let _ = writeln!(s, "CELL_TYPES {}", self.tets.len());
        for _ in &self.tets {
            let _ = writeln!(s, "10");
        }
        if let Some((name, data)) = cell_data {
            let _ = writeln!(s, "CELL_DATA {}\nSCALARS {} double 1\nLOOKUP_TABLE default", data.len(), name);
            for d in data {
                let _ = writeln!(s, "{d}");
            }
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }
}

fn sorted2(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn sorted3(a: usize, b: usize, c: usize) -> [usize; 3] {
    let mut t = [a, b, c];
    t.sort_unstable();
    t
}

/// Entity counts `(vertices, tets, edges, faces, boundary faces)`.
pub fn entity_counts(mesh: &Mesh) -> (usize, usize, usize, usize, usize) {
    (
        mesh.vertices.len(),
        mesh.tets.len(),
        mesh.edges.len(),
        mesh.faces.len(),
        mesh.boundary_faces.len(),
    )
}

/// Checks that every interior face is shared by exactly two tetrahedra with
/// identical vertex triples, and every boundary face by exactly one.
pub fn check_conformity(mesh: &Mesh) -> std::result::Result<(), String> {
    let mut seen: HashMap<[usize; 3], Vec<usize>> = HashMap::new();
    for (e, t) in mesh.tets.iter().enumerate() {
        for [a, b, c] in LOCAL_FACES {
            seen.entry(sorted3(t[a], t[b], t[c])).or_default().push(e);
        }
    }
    for (face, owners) in &seen {
        let on_boundary = mesh.classify_boundary_face(*face).is_ok();
        let expected = if on_boundary { 1 } else { 2 };
        if owners.len() != expected {
            return Err(format!(
                "face {face:?} has {} owners, expected {expected}",
                owners.len()
            ));
        }
    }
    if seen.len() != mesh.faces.len() {
        return Err("face table size mismatch".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_counts() {
        let mesh = Mesh::cube(1).unwrap();
        assert_eq!(entity_counts(&mesh), (8, 6, 19, 18, 12));
    }

    #[test]
    fn two_cell_counts() {
        let mesh = Mesh::cube(2).unwrap();
        let (v, t, e, _, b) = entity_counts(&mesh);
        assert_eq!((v, t, e, b), (27, 48, 98, 48));
    }

    #[test]
    fn zero_subdivision_rejected() {
        assert!(matches!(Mesh::cube(0), Err(Error::ZeroSubdivision(0))));
    }

    #[test]
    fn huge_subdivision_rejected() {
        assert!(matches!(Mesh::cube(usize::MAX / 2), Err(Error::DofOverflow { .. })));
    }

    #[test]
    fn volumes_positive_and_equal() {
        for m in 1..=3 {
            let mesh = Mesh::cube(m).unwrap();
            let expected = 1.0 / (6.0 * (m * m * m) as f64);
            for e in 0..mesh.num_tets() {
                let vol = mesh.signed_volume(e);
                assert!((vol - expected).abs() < 1e-15, "tet {e}: {vol}");
            }
        }
    }

    #[test]
    fn element_maps_hit_vertices() {
        let mesh = Mesh::cube(2).unwrap();
        let refs = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for e in 0..mesh.num_tets() {
            let v = mesh.tet_vertices(e);
            for (r, want) in refs.iter().zip(v.iter()) {
                assert_eq!(mesh.element_maps[e].map(r), *want);
            }
        }
    }

    #[test]
    fn boundary_normals() {
        let mesh = Mesh::cube(1).unwrap();
        let z0 = mesh
            .faces
            .iter()
            .copied()
            .find(|f| f.iter().all(|&i| mesh.vertices[i].z == 0.0))
            .unwrap();
        assert_eq!(mesh.classify_boundary_face(z0).unwrap(), Point3::new(0.0, 0.0, -1.0));
        let x1 = mesh
            .faces
            .iter()
            .copied()
            .find(|f| f.iter().all(|&i| mesh.vertices[i].x == 1.0))
            .unwrap();
        assert_eq!(mesh.classify_boundary_face(x1).unwrap(), Point3::new(1.0, 0.0, 0.0));
        let interior = mesh
            .faces
            .iter()
            .copied()
            .find(|f| mesh.classify_boundary_face(*f).is_err())
            .unwrap();
        assert!(matches!(
            mesh.classify_boundary_face(interior),
            Err(Error::NotBoundaryFace(_))
        ));
    }

    #[test]
    fn conformity_and_incidence() {
        for m in 1..=3 {
            let mesh = Mesh::cube(m).unwrap();
            check_conformity(&mesh).unwrap();
            let inc = mesh.face_incidence();
            let interior = inc.iter().filter(|&&c| c == 2).count();
            let boundary = inc.iter().filter(|&&c| c == 1).count();
            assert_eq!(interior + boundary, mesh.faces.len());
            assert_eq!(4 * mesh.num_tets(), 2 * interior + boundary);
            assert_eq!(boundary, 12 * m * m);
        }
    }

    #[test]
    fn diameter_is_body_diagonal() {
        let mesh = Mesh::cube(3).unwrap();
        let mut hmax: f64 = 0.0;
        for e in 0..mesh.num_tets() {
            let v = mesh.tet_vertices(e);
            for [a, b] in LOCAL_EDGES {
                hmax = hmax.max((v[a] - v[b]).norm());
            }
        }
        assert!((hmax - mesh.h).abs() < 1e-15);
    }

    #[test]
    fn vtk_export_has_cells() {
        let mesh = Mesh::cube(1).unwrap();
        let mut buf = Vec::new();
        mesh.write_vtk(&mut buf, Some(("id", &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]))).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("CELLS 6 30"));
        assert!(text.contains("CELL_TYPES 6"));
    }
}
