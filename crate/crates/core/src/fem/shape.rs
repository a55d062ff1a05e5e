//! P2 Lagrange shape functions on the reference tetrahedron.
//!
//! Node order: the four vertices, then the midpoints of the local edges
//! (0,1),(0,2),(0,3),(1,2),(1,3),(2,3) — matching
//! [`crate::mesh::TetMeshP2::tet_nodes`].

/// Local edge list shared with the mesh layer.
pub const LOCAL_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Gradients of the barycentric coordinates with respect to the
/// reference coordinates (xi, eta, zeta).
const GRAD_L: [[f64; 3]; 4] = [
    [-1.0, -1.0, -1.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
];

/// Shape values and reference-coordinate gradients at a barycentric
/// point.
pub fn shape_eval(l: [f64; 4]) -> ([f64; 10], [[f64; 3]; 10]) {
    let mut values = [0.0; 10];
    let mut grads = [[0.0; 3]; 10];
    for i in 0..4 {
        values[i] = l[i] * (2.0 * l[i] - 1.0);
        for k in 0..3 {
            grads[i][k] = (4.0 * l[i] - 1.0) * GRAD_L[i][k];
        }
    }
    for (e, &(i, j)) in LOCAL_EDGES.iter().enumerate() {
        values[4 + e] = 4.0 * l[i] * l[j];
        for k in 0..3 {
            grads[4 + e][k] = 4.0 * (l[i] * GRAD_L[j][k] + l[j] * GRAD_L[i][k]);
        }
    }
    (values, grads)
}

/// Constant reference Hessians of the ten shape functions.
pub fn shape_hessians() -> [[[f64; 3]; 3]; 10] {
    let mut h = [[[0.0; 3]; 3]; 10];
    for i in 0..4 {
        for r in 0..3 {
            for c in 0..3 {
                h[i][r][c] = 4.0 * GRAD_L[i][r] * GRAD_L[i][c];
            }
        }
    }
    for (e, &(i, j)) in LOCAL_EDGES.iter().enumerate() {
        for r in 0..3 {
            for c in 0..3 {
                h[4 + e][r][c] = 4.0 * (GRAD_L[i][r] * GRAD_L[j][c] + GRAD_L[j][r] * GRAD_L[i][c]);
            }
        }
    }
    h
}

/// Barycentric coordinates of the ten P2 nodes.
pub fn node_barycentric() -> [[f64; 4]; 10] {
    let mut out = [[0.0; 4]; 10];
    for i in 0..4 {
        out[i][i] = 1.0;
    }
    for (e, &(i, j)) in LOCAL_EDGES.iter().enumerate() {
        out[4 + e][i] = 0.5;
        out[4 + e][j] = 0.5;
    }
    out
}
