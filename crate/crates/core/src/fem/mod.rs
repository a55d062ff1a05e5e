//! P2 finite elements on the visualization domain: assembly of the
//! weighted system matrices over node classes, and point evaluation of
//! discrete fields.
//!
//! The weak form carries the chart weight (1 - |X|^2)^{-1/2} and the
//! radial correction: with e_i the class basis,
//!
//! ```text
//! M_ij =  int w e_i e_j
//! K_ij =  int w grad(e_i) . grad(e_j)
//! D_ij = -int w (X . grad e_i)(X . grad e_j)
//! ```
//!
//! The stiffness operator of the evolution is K + D, which annihilates
//! constants. The weight never blows up: the whole domain sits strictly
//! inside the unit ball (|X| <= R_max ~ 0.378).

mod quadrature;
mod shape;
mod sparse;

pub use quadrature::{quadrature_31, QuadratureRule};
pub use shape::{node_barycentric, shape_eval, shape_hessians, LOCAL_EDGES};
pub use sparse::{cg_solve, cg_solve_with_diag, dot, norm, CsrMatrix};

use crate::mesh::TetMeshP2;
use std::collections::HashMap;

#[derive(Debug, thiserror::Error)]
pub enum FemError {
    #[error("quadrature point left the unit ball (|X|^2 = {r2}); the mesh is broken")]
    SingularWeight { r2: f64 },
    #[error("conjugate gradient stalled after {max_iters} iterations (relative residual {residual:e})")]
    CgStalled { max_iters: usize, residual: f64 },
    #[error("point {point:?} lies outside the mesh (barycentric defect {defect:e})")]
    PointOutsideMesh { point: [f64; 3], defect: f64 },
    #[error("field vector length {got} does not match the class count {expect}")]
    FieldLength { got: usize, expect: usize },
}

/// The assembled class-space matrices.
pub struct SystemMatrices {
    /// Weighted mass matrix, symmetric positive definite.
    pub mass: CsrMatrix,
    /// Weighted stiffness (gradient) matrix, positive semidefinite.
    pub stiffness: CsrMatrix,
    /// Radial correction; `stiffness + radial` annihilates constants.
    pub radial: CsrMatrix,
    /// Weighted volume of each tet, for the Norm diagnostic.
    pub tet_weighted_volume: Vec<f64>,
    /// Inverse row-sum lumped mass diagonal when lumping is requested.
    pub lumped_mass: Option<Vec<f64>>,
}

impl SystemMatrices {
    pub fn n(&self) -> usize {
        self.mass.n
    }

    /// Total weighted volume, the discrete counterpart of the quotient
    /// volume pi^2/60.
    pub fn weighted_volume(&self) -> f64 {
        self.tet_weighted_volume.iter().sum()
    }
}

/// Assembly options; lumping replaces the consistent mass matrix by its
/// row sums (off by default, kept as an experiment flag).
#[derive(Clone, Copy, Debug, Default)]
pub struct AssembleOptions {
    pub lump_mass: bool,
}

struct ElementGeometry {
    /// Columns of the affine map jacobian.
    jac: [[f64; 3]; 3],
    inv_t: [[f64; 3]; 3],
    det: f64,
}

fn element_geometry(v: [[f64; 3]; 4]) -> ElementGeometry {
    let mut jac = [[0.0; 3]; 3];
    for c in 0..3 {
        for r in 0..3 {
            jac[r][c] = v[c + 1][r] - v[0][r];
        }
    }
    let det = jac[0][0] * (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1])
        - jac[0][1] * (jac[1][0] * jac[2][2] - jac[1][2] * jac[2][0])
        + jac[0][2] * (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0]);
    let mut inv = [[0.0; 3]; 3];
    let cof = |r1: usize, c1: usize, r2: usize, c2: usize| {
        jac[r1][c1] * jac[r2][c2] - jac[r1][c2] * jac[r2][c1]
    };
    inv[0][0] = cof(1, 1, 2, 2) / det;
    inv[0][1] = -cof(0, 1, 2, 2) / det;
    inv[0][2] = cof(0, 1, 1, 2) / det;
    inv[1][0] = -cof(1, 0, 2, 2) / det;
    inv[1][1] = cof(0, 0, 2, 2) / det;
    inv[1][2] = -cof(0, 0, 1, 2) / det;
    inv[2][0] = cof(1, 0, 2, 1) / det;
    inv[2][1] = -cof(0, 0, 2, 1) / det;
    inv[2][2] = cof(0, 0, 1, 1) / det;
    // transpose of the inverse
    let inv_t = [
        [inv[0][0], inv[1][0], inv[2][0]],
        [inv[0][1], inv[1][1], inv[2][1]],
        [inv[0][2], inv[1][2], inv[2][2]],
    ];
    ElementGeometry { jac, inv_t, det }
}

struct ElementMatrices {
    mass: [[f64; 10]; 10],
    stiffness: [[f64; 10]; 10],
    radial: [[f64; 10]; 10],
    weighted_volume: f64,
}

fn element_matrices(
    verts: [[f64; 3]; 4],
    rule: &QuadratureRule,
) -> Result<ElementMatrices, FemError> {
    let geo = element_geometry(verts);
    let scale = geo.det.abs();
    let mut m = [[0.0; 10]; 10];
    let mut k = [[0.0; 10]; 10];
    let mut d = [[0.0; 10]; 10];
    let mut wvol = 0.0;
    for (pt, &qw) in rule.points.iter().zip(rule.weights.iter()) {
        let (values, ref_grads) = shape_eval(*pt);
        // physical position and gradients
        let mut x = [0.0f64; 3];
        for r in 0..3 {
            for i in 0..4 {
                x[r] += pt[i] * verts[i][r];
            }
        }
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        if r2 >= 1.0 {
            return Err(FemError::SingularWeight { r2 });
        }
        let weight = 1.0 / (1.0 - r2).sqrt();
        let c = qw * scale * weight;
        wvol += c;
        let mut grads = [[0.0f64; 3]; 10];
        let mut radials = [0.0f64; 10];
        for i in 0..10 {
            for r in 0..3 {
                grads[i][r] = geo.inv_t[r][0] * ref_grads[i][0]
                    + geo.inv_t[r][1] * ref_grads[i][1]
                    + geo.inv_t[r][2] * ref_grads[i][2];
            }
            radials[i] = x[0] * grads[i][0] + x[1] * grads[i][1] + x[2] * grads[i][2];
        }
        for i in 0..10 {
            for j in i..10 {
                let mm = c * values[i] * values[j];
                let kk = c
                    * (grads[i][0] * grads[j][0]
                        + grads[i][1] * grads[j][1]
                        + grads[i][2] * grads[j][2]);
                let dd = -c * radials[i] * radials[j];
                m[i][j] += mm;
                k[i][j] += kk;
                d[i][j] += dd;
                if i != j {
                    m[j][i] += mm;
                    k[j][i] += kk;
                    d[j][i] += dd;
                }
            }
        }
    }
    Ok(ElementMatrices { mass: m, stiffness: k, radial: d, weighted_volume: wvol })
}

/// Assemble the weighted system matrices over the node classes.
pub fn assemble(mesh: &TetMeshP2) -> Result<SystemMatrices, FemError> {
    assemble_with(mesh, AssembleOptions::default())
}

pub fn assemble_with(mesh: &TetMeshP2, options: AssembleOptions) -> Result<SystemMatrices, FemError> {
    let rule = quadrature_31();
    let n_tets = mesh.tets.len();
    // element matrices are independent; compute them in parallel and
    // scatter serially in tet order so the assembly is deterministic
    let compute = |t: usize| -> Result<ElementMatrices, FemError> {
        let tv = mesh.tets[t];
        element_matrices(
            [
                mesh.vertices[tv[0]],
                mesh.vertices[tv[1]],
                mesh.vertices[tv[2]],
                mesh.vertices[tv[3]],
            ],
            &rule,
        )
    };
    #[cfg(feature = "parallel")]
    let elements: Result<Vec<ElementMatrices>, FemError> = {
        use rayon::prelude::*;
        (0..n_tets).into_par_iter().map(compute).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let elements: Result<Vec<ElementMatrices>, FemError> = (0..n_tets).map(compute).collect();
    let elements = elements?;

    let n = mesh.n_classes();
    let cap = 100 * n_tets;
    let mut tm = Vec::with_capacity(cap);
    let mut tk = Vec::with_capacity(cap);
    let mut td = Vec::with_capacity(cap);
    let mut tet_weighted_volume = Vec::with_capacity(n_tets);
    for (t, elem) in elements.iter().enumerate() {
        let nodes = mesh.tet_nodes(t);
        let classes: Vec<usize> = nodes.iter().map(|&nd| mesh.node_class[nd]).collect();
        for i in 0..10 {
            for j in 0..10 {
                tm.push((classes[i], classes[j], elem.mass[i][j]));
                tk.push((classes[i], classes[j], elem.stiffness[i][j]));
                td.push((classes[i], classes[j], elem.radial[i][j]));
            }
        }
        tet_weighted_volume.push(elem.weighted_volume);
    }
    let mass = CsrMatrix::from_triplets(n, tm);
    let stiffness = CsrMatrix::from_triplets(n, tk);
    let radial = CsrMatrix::from_triplets(n, td);
    let lumped_mass = options.lump_mass.then(|| {
        let mut d = vec![0.0; n];
        for r in 0..n {
            for k in mass.row_ptr[r]..mass.row_ptr[r + 1] {
                d[r] += mass.values[k];
            }
        }
        d
    });
    Ok(SystemMatrices { mass, stiffness, radial, tet_weighted_volume, lumped_mass })
}

/// Barycentric slack accepted when clamping a point into a boundary
/// sliver between a straight boundary triangle and the curved face.
const SLIVER_TOL: f64 = 0.2;

/// Uniform-grid point locator over the mesh.
pub struct PointLocator {
    cell_size: f64,
    origin: [f64; 3],
    dims: [usize; 3],
    cells: Vec<Vec<u32>>,
}

impl PointLocator {
    pub fn new(mesh: &TetMeshP2) -> PointLocator {
        let r = crate::geometry::r_max() + 1e-6;
        let origin = [-r, -r, -r];
        let target = (mesh.tets.len() as f64).cbrt().ceil() as usize;
        let dims = [target.max(4); 3];
        let cell_size = 2.0 * r / dims[0] as f64;
        let mut cells = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        let clamp = |v: f64, hi: usize| -> usize { (v.max(0.0) as usize).min(hi - 1) };
        for (t, tet) in mesh.tets.iter().enumerate() {
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for &v in tet {
                for k in 0..3 {
                    lo[k] = lo[k].min(mesh.vertices[v][k]);
                    hi[k] = hi[k].max(mesh.vertices[v][k]);
                }
            }
            let il = [
                clamp(((lo[0] - origin[0]) / cell_size).floor(), dims[0]),
                clamp(((lo[1] - origin[1]) / cell_size).floor(), dims[1]),
                clamp(((lo[2] - origin[2]) / cell_size).floor(), dims[2]),
            ];
            let ih = [
                clamp(((hi[0] - origin[0]) / cell_size).floor(), dims[0]),
                clamp(((hi[1] - origin[1]) / cell_size).floor(), dims[1]),
                clamp(((hi[2] - origin[2]) / cell_size).floor(), dims[2]),
            ];
            for ix in il[0]..=ih[0] {
                for iy in il[1]..=ih[1] {
                    for iz in il[2]..=ih[2] {
                        cells[(ix * dims[1] + iy) * dims[2] + iz].push(t as u32);
                    }
                }
            }
        }
        PointLocator { cell_size, origin, dims, cells }
    }

    fn candidates(&self, p: [f64; 3]) -> impl Iterator<Item = u32> + '_ {
        let idx = |k: usize| -> i64 { ((p[k] - self.origin[k]) / self.cell_size).floor() as i64 };
        let (cx, cy, cz) = (idx(0), idx(1), idx(2));
        let dims = self.dims;
        (-1..=1).flat_map(move |dx| {
            (-1..=1).flat_map(move |dy| {
                (-1..=1).filter_map(move |dz| {
                    let (x, y, z) = (cx + dx, cy + dy, cz + dz);
                    if x < 0
                        || y < 0
                        || z < 0
                        || x >= dims[0] as i64
                        || y >= dims[1] as i64
                        || z >= dims[2] as i64
                    {
                        None
                    } else {
                        Some((x as usize * dims[1] + y as usize) * dims[2] + z as usize)
                    }
                })
            })
        })
        .flat_map(move |cell| self.cells[cell].iter().copied())
    }

    /// Containing tet and barycentric coordinates. Points in the thin
    /// sliver between the mesh hull and the curved boundary are clamped
    /// onto the nearest candidate tet.
    pub fn locate(
        &self,
        mesh: &TetMeshP2,
        p: [f64; 3],
    ) -> Result<(usize, [f64; 4]), FemError> {
        let mut best_tet = usize::MAX;
        let mut best_defect = f64::NEG_INFINITY;
        let mut best_bary = [0.0; 4];
        let mut seen = std::collections::HashSet::new();
        for t in self.candidates(p) {
            if !seen.insert(t) {
                continue;
            }
            let bary = barycentric(mesh, t as usize, p);
            let min = bary.iter().cloned().fold(f64::INFINITY, f64::min);
            if min > best_defect {
                best_defect = min;
                best_tet = t as usize;
                best_bary = bary;
            }
            if min >= 0.0 {
                break;
            }
        }
        if best_tet == usize::MAX || best_defect < -SLIVER_TOL {
            return Err(FemError::PointOutsideMesh { point: p, defect: -best_defect });
        }
        if best_defect < 0.0 {
            // clamp into the tet and renormalize
            let mut sum = 0.0;
            for lam in best_bary.iter_mut() {
                *lam = lam.max(0.0);
                sum += *lam;
            }
            for lam in best_bary.iter_mut() {
                *lam /= sum;
            }
        }
        Ok((best_tet, best_bary))
    }
}

fn barycentric(mesh: &TetMeshP2, tet: usize, p: [f64; 3]) -> [f64; 4] {
    let t = mesh.tets[tet];
    let v = [
        mesh.vertices[t[0]],
        mesh.vertices[t[1]],
        mesh.vertices[t[2]],
        mesh.vertices[t[3]],
    ];
    let geo = element_geometry(v);
    let rhs = [p[0] - v[0][0], p[1] - v[0][1], p[2] - v[0][2]];
    // lambda_{1..3} = J^{-1} (p - v0); inv_t is the transposed inverse
    let mut lam = [0.0f64; 4];
    for r in 0..3 {
        lam[r + 1] =
            geo.inv_t[0][r] * rhs[0] + geo.inv_t[1][r] * rhs[1] + geo.inv_t[2][r] * rhs[2];
    }
    lam[0] = 1.0 - lam[1] - lam[2] - lam[3];
    lam
}

/// Evaluate a class-space field at a point of the closed domain by P2
/// interpolation in the containing tet.
pub fn locate_and_eval(
    mesh: &TetMeshP2,
    locator: &PointLocator,
    field: &[f64],
    p: [f64; 3],
) -> Result<f64, FemError> {
    if field.len() != mesh.n_classes() {
        return Err(FemError::FieldLength { got: field.len(), expect: mesh.n_classes() });
    }
    let (tet, bary) = locator.locate(mesh, p)?;
    let (values, _) = shape_eval(bary);
    let nodes = mesh.tet_nodes(tet);
    let mut out = 0.0;
    for i in 0..10 {
        out += values[i] * field[mesh.node_class[nodes[i]]];
    }
    Ok(out)
}

/// The second-order elliptic operator of the chart applied to the P2
/// field on one tet, evaluated at the centroid:
///
/// ```text
/// (1-x^2) u_xx + (1-y^2) u_yy + (1-z^2) u_zz
///   - 2xy u_xy - 2xz u_xz - 2yz u_yz - 3x u_x - 3y u_y - 3z u_z
/// ```
///
/// Second derivatives of a quadratic are constant on the tet; the
/// variable coefficients are evaluated at the centroid.
pub fn eval_delav(mesh: &TetMeshP2, field: &[f64], tet: usize) -> f64 {
    let t = mesh.tets[tet];
    let v = [
        mesh.vertices[t[0]],
        mesh.vertices[t[1]],
        mesh.vertices[t[2]],
        mesh.vertices[t[3]],
    ];
    let geo = element_geometry(v);
    let nodes = mesh.tet_nodes(tet);
    let coeff: Vec<f64> = nodes.iter().map(|&n| field[mesh.node_class[n]]).collect();

    // physical Hessian: J^{-T} H_ref J^{-1}, constant over the tet
    let h_ref_all = shape_hessians();
    let mut h_ref = [[0.0f64; 3]; 3];
    for (i, h) in h_ref_all.iter().enumerate() {
        for r in 0..3 {
            for c in 0..3 {
                h_ref[r][c] += coeff[i] * h[r][c];
            }
        }
    }
    let mut tmp = [[0.0f64; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            for k in 0..3 {
                tmp[r][c] += geo.inv_t[r][k] * h_ref[k][c];
            }
        }
    }
    let mut hess = [[0.0f64; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            for k in 0..3 {
                // J^{-1} = (inv_t)^T
                hess[r][c] += tmp[r][k] * geo.inv_t[c][k];
            }
        }
    }

    // gradient at the centroid
    let centroid_bary = [0.25; 4];
    let (_, ref_grads) = shape_eval(centroid_bary);
    let mut grad = [0.0f64; 3];
    for i in 0..10 {
        for r in 0..3 {
            grad[r] += coeff[i]
                * (geo.inv_t[r][0] * ref_grads[i][0]
                    + geo.inv_t[r][1] * ref_grads[i][1]
                    + geo.inv_t[r][2] * ref_grads[i][2]);
        }
    }
    let mut g = [0.0f64; 3];
    for r in 0..3 {
        g[r] = (v[0][r] + v[1][r] + v[2][r] + v[3][r]) / 4.0;
    }
    let trace = hess[0][0] + hess[1][1] + hess[2][2];
    let mut xhx = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            xhx += g[r] * hess[r][c] * g[c];
        }
    }
    let xg = g[0] * grad[0] + g[1] * grad[1] + g[2] * grad[2];
    trace - xhx - 3.0 * xg
}

/// Interpolate a nodal function onto class values: every node of a class
/// is an equivalent quotient point, so any member's value represents the
/// class (the mesh guarantees members map to one quotient point).
pub fn interpolate_to_classes(mesh: &TetMeshP2, f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
    mesh.classes
        .iter()
        .map(|class| f(mesh.node_position(class.nodes[0])))
        .collect()
}

/// Nodewise assembly cross-check helper: expand a class matrix statement
/// A_class = P^T A_node P, with P the node-to-class indicator, by summing
/// the nodal matrix blocks over class members.
pub fn expand_class_matrix_entry(
    mesh: &TetMeshP2,
    nodal: &HashMap<(usize, usize), f64>,
    class_i: usize,
    class_j: usize,
) -> f64 {
    let mut sum = 0.0;
    for &ni in &mesh.classes[class_i].nodes {
        for &nj in &mesh.classes[class_j].nodes {
            if let Some(v) = nodal.get(&(ni, nj)) {
                sum += v;
            }
        }
    }
    sum
}
