//! Tetrahedral meshing of the visualization domain with P2 node
//! enumeration and the node equivalence classes realizing the twisted
//! periodic boundary identification.
//!
//! The base mesh fans each of the twelve curved pentagonal faces into
//! five triangles from the face barycenter and cones them to the domain
//! center: 60 tetrahedra. Refinement is 8-way red subdivision; a new
//! vertex born on a boundary edge is placed at the normalized R^4
//! midpoint of the lifted endpoints, which lies exactly on the curved
//! face and commutes with the gluing isometries, so partner vertices
//! exist pairwise by construction. P2 midpoint nodes are straight
//! segment midpoints and never touch the boundary (the faces are convex
//! toward the outside), so they are only equivalent to themselves.

use crate::geometry::{lift, project, FundamentalDomain, Location, Quaternion, BOUNDARY_TOL};
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

/// Refinement levels beyond this produce meshes past the desk-scale
/// budget this crate is tuned for.
pub const MAX_LEVEL: u32 = 6;

/// Tolerance for identifying boundary nodes with their gluing partners.
pub const PARTNER_TOL: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("refinement level {level} exceeds the cap {MAX_LEVEL}")]
    LevelTooDeep { level: u32 },
    #[error("tetrahedron {tet} is degenerate (volume {volume:e})")]
    DegenerateTet { tet: usize, volume: f64 },
    #[error("boundary vertex {vertex} has no mesh partner under the face gluing")]
    UnmatchedBoundaryVertex { vertex: usize },
    #[error("boundary vertex {vertex} strayed off the domain boundary by {distance:e}")]
    VertexOffBoundary { vertex: usize, distance: f64 },
    #[error("P2 midpoint node {node} lies on the domain boundary")]
    MidpointOnBoundary { node: usize },
    #[error("mesh file {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: crate::textio::ParseError,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// The five node-class kinds: interior vertex, domain vertex (class of
/// four), face vertex (class of two), edge vertex (class of three), and
/// edge midpoint (always a singleton).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassKind {
    InteriorVertex = 1,
    DomainVertex = 2,
    FaceVertex = 3,
    EdgeVertex = 4,
    Midpoint = 5,
}

impl ClassKind {
    pub fn from_code(code: u8) -> Option<ClassKind> {
        Some(match code {
            1 => ClassKind::InteriorVertex,
            2 => ClassKind::DomainVertex,
            3 => ClassKind::FaceVertex,
            4 => ClassKind::EdgeVertex,
            5 => ClassKind::Midpoint,
            _ => return None,
        })
    }
}

/// One equivalence class of P2 nodes.
#[derive(Clone, Debug)]
pub struct NodeClass {
    pub kind: ClassKind,
    /// Sorted node ids of the members.
    pub nodes: Vec<usize>,
}

/// Conforming P2 tetrahedral mesh of the visualization domain.
///
/// Nodes are numbered vertices first (0..n_vertices), then one midpoint
/// node per unique edge in lexicographic edge order.
pub struct TetMeshP2 {
    pub level: u32,
    pub vertices: Vec<[f64; 3]>,
    /// Face planes (0..12) each vertex lies on; empty for interior.
    pub vertex_faces: Vec<Vec<u8>>,
    pub tets: Vec<[usize; 4]>,
    /// Unique edges (a < b), sorted lexicographically.
    pub edges: Vec<(usize, usize)>,
    /// Straight midpoints of `edges`.
    pub midpoints: Vec<[f64; 3]>,
    /// Per tet, indices into `edges` for the local edges
    /// (0,1),(0,2),(0,3),(1,2),(1,3),(2,3).
    pub tet_edges: Vec<[usize; 6]>,
    /// node id -> class id
    pub node_class: Vec<usize>,
    pub classes: Vec<NodeClass>,
    pub domain: FundamentalDomain,
}

fn midpoint3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0]
}

fn tet_volume(a: [f64; 3], b: [f64; 3], c: [f64; 3], d: [f64; 3]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let w = [d[0] - a[0], d[1] - a[1], d[2] - a[2]];
    (u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0])
        + u[2] * (v[0] * w[1] - v[1] * w[0]))
        / 6.0
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Faces of the domain a lifted point lies on, within the boundary
/// tolerance.
fn faces_of_point(domain: &FundamentalDomain, q: Quaternion) -> Vec<u8> {
    let p = q.as_array();
    let mut out = Vec::new();
    for (i, n) in domain.face_normals().iter().enumerate() {
        let d = p[0] * n[0] + p[1] * n[1] + p[2] * n[2] + p[3] * n[3];
        if d.abs() <= BOUNDARY_TOL {
            out.push(i as u8);
        }
    }
    out
}

struct WorkMesh {
    vertices: Vec<[f64; 3]>,
    vertex_faces: Vec<Vec<u8>>,
    tets: Vec<[usize; 4]>,
}

fn level0(domain: &FundamentalDomain) -> WorkMesh {
    let mut vertices = vec![[0.0; 3]];
    let mut vertex_faces: Vec<Vec<u8>> = vec![Vec::new()];
    // the twenty domain vertices
    for (i, v) in domain.vertices().iter().enumerate() {
        vertices.push(project(*v));
        let mut on = Vec::new();
        for (f, cycle) in domain.faces().iter().enumerate() {
            if cycle.contains(&i) {
                on.push(f as u8);
            }
        }
        debug_assert_eq!(on.len(), 3);
        vertex_faces.push(on);
    }
    // one barycenter per face, the normalized R^4 vertex sum (it stays on
    // the face plane, which passes through the origin)
    let mut bary_id = [0usize; 12];
    for (f, cycle) in domain.faces().iter().enumerate() {
        let mut sum = [0.0f64; 4];
        for &v in cycle {
            let a = domain.vertices()[v].as_array();
            for k in 0..4 {
                sum[k] += a[k];
            }
        }
        let q = Quaternion::new(sum[0], sum[1], sum[2], sum[3]).normalized();
        bary_id[f] = vertices.len();
        vertices.push(project(q));
        vertex_faces.push(vec![f as u8]);
    }
    // five tets per face: center, barycenter, consecutive pentagon vertices
    let mut tets = Vec::with_capacity(60);
    for (f, cycle) in domain.faces().iter().enumerate() {
        for k in 0..5 {
            let a = 1 + cycle[k];
            let b = 1 + cycle[(k + 1) % 5];
            let mut tet = [0usize, bary_id[f], a, b];
            let vol = tet_volume(
                vertices[tet[0]],
                vertices[tet[1]],
                vertices[tet[2]],
                vertices[tet[3]],
            );
            if vol < 0.0 {
                tet.swap(2, 3);
            }
            tets.push(tet);
        }
    }
    WorkMesh { vertices, vertex_faces, tets }
}

/// Edges lying on boundary triangles (triangles owned by exactly one tet).
fn boundary_edges(tets: &[[usize; 4]]) -> std::collections::HashSet<(usize, usize)> {
    let mut face_count: HashMap<[usize; 3], u32> = HashMap::new();
    for t in tets {
        for skip in 0..4 {
            let mut tri: Vec<usize> = (0..4).filter(|&k| k != skip).map(|k| t[k]).collect();
            tri.sort_unstable();
            *face_count.entry([tri[0], tri[1], tri[2]]).or_insert(0) += 1;
        }
    }
    let mut out = std::collections::HashSet::new();
    for (tri, count) in face_count {
        if count == 1 {
            out.insert(edge_key(tri[0], tri[1]));
            out.insert(edge_key(tri[0], tri[2]));
            out.insert(edge_key(tri[1], tri[2]));
        }
    }
    out
}

fn refine(domain: &FundamentalDomain, mesh: &WorkMesh) -> WorkMesh {
    let on_boundary = boundary_edges(&mesh.tets);
    let mut vertices = mesh.vertices.clone();
    let mut vertex_faces = mesh.vertex_faces.clone();
    let mut mid_of: HashMap<(usize, usize), usize> = HashMap::new();
    let mut tets = Vec::with_capacity(8 * mesh.tets.len());

    let local_edges = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    for t in &mesh.tets {
        let mut m = [0usize; 6];
        for (e, &(i, j)) in local_edges.iter().enumerate() {
            let key = edge_key(t[i], t[j]);
            m[e] = *mid_of.entry(key).or_insert_with(|| {
                let id = vertices.len();
                if on_boundary.contains(&key) {
                    // normalized R^4 midpoint: stays on the common face
                    // planes and commutes with the gluing isometries
                    let qa = lift(mesh.vertices[key.0]).expect("mesh vertex inside unit ball");
                    let qb = lift(mesh.vertices[key.1]).expect("mesh vertex inside unit ball");
                    let q = Quaternion::new(qa.w + qb.w, qa.x + qb.x, qa.y + qb.y, qa.z + qb.z)
                        .normalized();
                    vertices.push(project(q));
                    vertex_faces.push(faces_of_point(domain, q));
                } else {
                    vertices.push(midpoint3(mesh.vertices[key.0], mesh.vertices[key.1]));
                    vertex_faces.push(Vec::new());
                }
                id
            });
        }
        // corner children
        let (m01, m02, m03, m12, m13, m23) = (m[0], m[1], m[2], m[3], m[4], m[5]);
        tets.push([t[0], m01, m02, m03]);
        tets.push([t[1], m01, m12, m13]);
        tets.push([t[2], m02, m12, m23]);
        tets.push([t[3], m03, m13, m23]);
        // central octahedron split along the shortest diagonal
        let dist2 = |a: usize, b: usize| -> f64 {
            let (p, q) = (vertices[a], vertices[b]);
            (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)
        };
        let diags = [
            (m01, m23, [m02, m12, m13, m03]),
            (m02, m13, [m01, m12, m23, m03]),
            (m03, m12, [m01, m13, m23, m02]),
        ];
        let best = diags
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                dist2(a.0, a.1)
                    .partial_cmp(&dist2(b.0, b.1))
                    .expect("edge lengths are finite")
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (d0, d1, ring) = diags[best];
        for k in 0..4 {
            tets.push([d0, d1, ring[k], ring[(k + 1) % 4]]);
        }
    }
    // restore positive orientation where subdivision flipped it
    for t in &mut tets {
        let vol = tet_volume(vertices[t[0]], vertices[t[1]], vertices[t[2]], vertices[t[3]]);
        if vol < 0.0 {
            t.swap(2, 3);
        }
    }
    WorkMesh { vertices, vertex_faces, tets }
}

/// Grid hash for matching boundary vertices with their gluing images.
struct VertexLookup {
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
    tol: f64,
}

impl VertexLookup {
    fn new(vertices: &[[f64; 3]], tol: f64) -> Self {
        let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, v) in vertices.iter().enumerate() {
            cells.entry(Self::key(v, tol)).or_default().push(i);
        }
        VertexLookup { cells, tol }
    }

    fn key(v: &[f64; 3], tol: f64) -> (i64, i64, i64) {
        (
            (v[0] / (4.0 * tol)).floor() as i64,
            (v[1] / (4.0 * tol)).floor() as i64,
            (v[2] / (4.0 * tol)).floor() as i64,
        )
    }

    fn find(&self, vertices: &[[f64; 3]], p: [f64; 3]) -> Option<usize> {
        let (kx, ky, kz) = Self::key(&p, self.tol);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.cells.get(&(kx + dx, ky + dy, kz + dz)) {
                        for &i in ids {
                            let v = vertices[i];
                            if (v[0] - p[0]).abs() <= self.tol
                                && (v[1] - p[1]).abs() <= self.tol
                                && (v[2] - p[2]).abs() <= self.tol
                            {
                                return Some(i);
                            }
                        }
                    }
                }
            }
        }
        None
    }
}

/// Group the P2 nodes into equivalence classes under the boundary gluing.
///
/// Vertex classes follow the face identifications; midpoint nodes are
/// singletons. Fails if a boundary vertex lacks a mesh partner, which
/// would mean the mesh violates the gluing symmetry.
pub fn classify_nodes(
    domain: &FundamentalDomain,
    vertices: &[[f64; 3]],
    vertex_faces: &[Vec<u8>],
    n_midpoints: usize,
) -> Result<(Vec<usize>, Vec<NodeClass>), MeshError> {
    let n_nodes = vertices.len() + n_midpoints;
    let lookup = VertexLookup::new(vertices, PARTNER_TOL);
    let mut node_class = vec![usize::MAX; n_nodes];
    let mut classes: Vec<NodeClass> = Vec::new();
    for v in 0..vertices.len() {
        if node_class[v] != usize::MAX {
            continue;
        }
        if vertex_faces[v].is_empty() {
            node_class[v] = classes.len();
            classes.push(NodeClass { kind: ClassKind::InteriorVertex, nodes: vec![v] });
            continue;
        }
        let q = lift(vertices[v]).expect("mesh vertex inside unit ball");
        let mut members = vec![v];
        for g in 1..=12 {
            let image = domain.clifford(g).mul(q);
            if domain.member(image, BOUNDARY_TOL) {
                let p = project(image);
                let partner = lookup
                    .find(vertices, p)
                    .ok_or(MeshError::UnmatchedBoundaryVertex { vertex: v })?;
                if !members.contains(&partner) {
                    members.push(partner);
                }
            }
        }
        members.sort_unstable();
        let kind = match vertex_faces[v].len() {
            1 => ClassKind::FaceVertex,
            2 => ClassKind::EdgeVertex,
            _ => ClassKind::DomainVertex,
        };
        let expected = match kind {
            ClassKind::FaceVertex => 2,
            ClassKind::EdgeVertex => 3,
            _ => 4,
        };
        if members.len() != expected {
            return Err(MeshError::UnmatchedBoundaryVertex { vertex: v });
        }
        let id = classes.len();
        for &m in &members {
            node_class[m] = id;
        }
        classes.push(NodeClass { kind, nodes: members });
    }
    for m in 0..n_midpoints {
        let node = vertices.len() + m;
        node_class[node] = classes.len();
        classes.push(NodeClass { kind: ClassKind::Midpoint, nodes: vec![node] });
    }
    Ok((node_class, classes))
}

/// Build the conforming P2 mesh at the requested refinement level.
pub fn build_mesh(level: u32) -> Result<TetMeshP2, MeshError> {
    if level > MAX_LEVEL {
        return Err(MeshError::LevelTooDeep { level });
    }
    let domain = FundamentalDomain::new();
    let mut work = level0(&domain);
    for _ in 0..level {
        work = refine(&domain, &work);
    }
    finalize(domain, work, level)
}

fn finalize(domain: FundamentalDomain, work: WorkMesh, level: u32) -> Result<TetMeshP2, MeshError> {
    let WorkMesh { vertices, vertex_faces, tets } = work;
    // unique edges in lexicographic order; midpoint node numbering
    // depends only on (vertices, tets), so a reader reproduces it
    let mut edge_set: Vec<(usize, usize)> = tets
        .iter()
        .flat_map(|t| {
            [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
                .into_iter()
                .map(move |(i, j)| edge_key(t[i], t[j]))
        })
        .collect();
    edge_set.sort_unstable();
    edge_set.dedup();
    let edge_index: HashMap<(usize, usize), usize> =
        edge_set.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let midpoints: Vec<[f64; 3]> = edge_set
        .iter()
        .map(|&(a, b)| midpoint3(vertices[a], vertices[b]))
        .collect();
    let tet_edges: Vec<[usize; 6]> = tets
        .iter()
        .map(|t| {
            let mut e = [0usize; 6];
            for (k, &(i, j)) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)].iter().enumerate()
            {
                e[k] = edge_index[&edge_key(t[i], t[j])];
            }
            e
        })
        .collect();

    // every tet positively oriented
    for (i, t) in tets.iter().enumerate() {
        let vol = tet_volume(vertices[t[0]], vertices[t[1]], vertices[t[2]], vertices[t[3]]);
        if vol <= 0.0 {
            return Err(MeshError::DegenerateTet { tet: i, volume: vol });
        }
    }
    // boundary vertices sit on their face planes
    for (v, faces) in vertex_faces.iter().enumerate() {
        if faces.is_empty() {
            continue;
        }
        let q = lift(vertices[v]).expect("vertex inside unit ball").as_array();
        for &f in faces {
            let n = domain.face_normals()[f as usize];
            let d = (0..4).map(|k| q[k] * n[k]).sum::<f64>().abs();
            if d > PARTNER_TOL {
                return Err(MeshError::VertexOffBoundary { vertex: v, distance: d });
            }
        }
    }
    // no midpoint node may lie on the boundary (convexity of the faces)
    for (m, p) in midpoints.iter().enumerate() {
        let q = lift(*p).expect("midpoint inside unit ball");
        if domain.contains(q, BOUNDARY_TOL) != Location::Interior {
            return Err(MeshError::MidpointOnBoundary { node: vertices.len() + m });
        }
    }

    let (node_class, classes) = classify_nodes(&domain, &vertices, &vertex_faces, midpoints.len())?;
    Ok(TetMeshP2 {
        level,
        vertices,
        vertex_faces,
        tets,
        edges: edge_set,
        midpoints,
        tet_edges,
        node_class,
        classes,
        domain,
    })
}

impl std::fmt::Debug for TetMeshP2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "TetMeshP2(level {}, {} vertices, {} tets, {} classes)",
            self.level,
            self.vertices.len(),
            self.tets.len(),
            self.classes.len()
        )
    }
}

impl TetMeshP2 {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.vertices.len() + self.midpoints.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn node_position(&self, node: usize) -> [f64; 3] {
        if node < self.vertices.len() {
            self.vertices[node]
        } else {
            self.midpoints[node - self.vertices.len()]
        }
    }

    /// The 10 P2 nodes of a tet: 4 vertices then the midpoints of the
    /// local edges (0,1),(0,2),(0,3),(1,2),(1,3),(2,3).
    pub fn tet_nodes(&self, tet: usize) -> [usize; 10] {
        let t = self.tets[tet];
        let e = self.tet_edges[tet];
        let nv = self.vertices.len();
        [
            t[0],
            t[1],
            t[2],
            t[3],
            nv + e[0],
            nv + e[1],
            nv + e[2],
            nv + e[3],
            nv + e[4],
            nv + e[5],
        ]
    }

    pub fn tet_volume(&self, tet: usize) -> f64 {
        let t = self.tets[tet];
        tet_volume(
            self.vertices[t[0]],
            self.vertices[t[1]],
            self.vertices[t[2]],
            self.vertices[t[3]],
        )
    }

    /// Longest edge of the mesh, the step-size scale of the refinement.
    pub fn h_max(&self) -> f64 {
        self.edges
            .iter()
            .map(|&(a, b)| {
                let (p, q) = (self.vertices[a], self.vertices[b]);
                ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Write the mesh in the deterministic text format.
    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "LEVEL {}", self.level)?;
        writeln!(w, "VERTICES {}", self.vertices.len())?;
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(
                w,
                "{} {} {} {}",
                i,
                crate::textio::fmt(v[0]),
                crate::textio::fmt(v[1]),
                crate::textio::fmt(v[2])
            )?;
        }
        writeln!(w, "TETS {}", self.tets.len())?;
        for (i, t) in self.tets.iter().enumerate() {
            writeln!(w, "{} {} {} {} {}", i, t[0], t[1], t[2], t[3])?;
        }
        writeln!(w, "CLASSES {}", self.classes.len())?;
        for (i, c) in self.classes.iter().enumerate() {
            write!(w, "{} {}", i, c.kind as u8)?;
            for &n in &c.nodes {
                write!(w, " {n}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|source| MeshError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut buf = std::io::BufWriter::new(file);
        self.write(&mut buf).map_err(|source| MeshError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Read a mesh written by [`TetMeshP2::write`]. Midpoints, edge tables
/// and vertex face sets are reconstructed; the classes are taken from the
/// file and cross-checked against a fresh classification.
pub fn read_mesh(reader: impl BufRead, path: &str) -> Result<TetMeshP2, MeshError> {
    use crate::textio::{parse_f64, parse_usize, ParseError};
    let wrap = |source: ParseError| MeshError::Parse { path: path.to_string(), source };
    let mut lines = reader.lines().enumerate();
    let mut next_line = |expect: &str| -> Result<(usize, String), MeshError> {
        for (no, line) in lines.by_ref() {
            let line = line.map_err(|source| MeshError::Io { path: path.to_string(), source })?;
            let trimmed = line.trim().to_string();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Ok((no + 1, trimmed));
        }
        Err(MeshError::Parse {
            path: path.to_string(),
            source: ParseError::new(0, format!("unexpected end of file, expected {expect}")),
        })
    };

    let (no, line) = next_line("LEVEL")?;
    let level: u32 = match line.strip_prefix("LEVEL ") {
        Some(rest) => rest
            .trim()
            .parse()
            .map_err(|_| wrap(ParseError::new(no, "bad LEVEL header")))?,
        None => return Err(wrap(ParseError::new(no, "expected LEVEL header"))),
    };
    let (no, line) = next_line("VERTICES")?;
    let n_vertices = match line.strip_prefix("VERTICES ") {
        Some(rest) => parse_usize(rest.trim(), no).map_err(wrap)?,
        None => return Err(wrap(ParseError::new(no, "expected VERTICES header"))),
    };
    let mut vertices = Vec::with_capacity(n_vertices);
    for i in 0..n_vertices {
        let (no, line) = next_line("vertex record")?;
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 4 {
            return Err(wrap(ParseError::new(no, "vertex record needs `id x y z`")));
        }
        if parse_usize(tok[0], no).map_err(wrap)? != i {
            return Err(wrap(ParseError::new(no, "vertex ids must be consecutive")));
        }
        vertices.push([
            parse_f64(tok[1], no).map_err(wrap)?,
            parse_f64(tok[2], no).map_err(wrap)?,
            parse_f64(tok[3], no).map_err(wrap)?,
        ]);
    }
    let (no, line) = next_line("TETS")?;
    let n_tets = match line.strip_prefix("TETS ") {
        Some(rest) => parse_usize(rest.trim(), no).map_err(wrap)?,
        None => return Err(wrap(ParseError::new(no, "expected TETS header"))),
    };
    let mut tets = Vec::with_capacity(n_tets);
    for i in 0..n_tets {
        let (no, line) = next_line("tet record")?;
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 5 {
            return Err(wrap(ParseError::new(no, "tet record needs `id v0 v1 v2 v3`")));
        }
        if parse_usize(tok[0], no).map_err(wrap)? != i {
            return Err(wrap(ParseError::new(no, "tet ids must be consecutive")));
        }
        let mut t = [0usize; 4];
        for k in 0..4 {
            t[k] = parse_usize(tok[k + 1], no).map_err(wrap)?;
            if t[k] >= n_vertices {
                return Err(wrap(ParseError::new(no, "tet vertex id out of range")));
            }
        }
        tets.push(t);
    }
    let (no, line) = next_line("CLASSES")?;
    let n_classes = match line.strip_prefix("CLASSES ") {
        Some(rest) => parse_usize(rest.trim(), no).map_err(wrap)?,
        None => return Err(wrap(ParseError::new(no, "expected CLASSES header"))),
    };
    let mut file_classes = Vec::with_capacity(n_classes);
    for i in 0..n_classes {
        let (no, line) = next_line("class record")?;
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() < 3 {
            return Err(wrap(ParseError::new(no, "class record needs `id kind node...`")));
        }
        if parse_usize(tok[0], no).map_err(wrap)? != i {
            return Err(wrap(ParseError::new(no, "class ids must be consecutive")));
        }
        let kind_code = parse_usize(tok[1], no).map_err(wrap)? as u8;
        let kind = ClassKind::from_code(kind_code)
            .ok_or_else(|| wrap(ParseError::new(no, "unknown class kind")))?;
        let nodes: Result<Vec<usize>, _> = tok[2..].iter().map(|t| parse_usize(t, no)).collect();
        file_classes.push(NodeClass { kind, nodes: nodes.map_err(wrap)? });
    }

    let domain = FundamentalDomain::new();
    let vertex_faces: Vec<Vec<u8>> = vertices
        .iter()
        .map(|&v| match lift(v) {
            Ok(q) => faces_of_point(&domain, q),
            Err(_) => Vec::new(),
        })
        .collect();
    let mesh = finalize(domain, WorkMesh { vertices, vertex_faces, tets }, level)?;
    // the stored classes must agree with the reconstruction
    if mesh.classes.len() != file_classes.len()
        || mesh
            .classes
            .iter()
            .zip(file_classes.iter())
            .any(|(a, b)| a.kind != b.kind || a.nodes != b.nodes)
    {
        return Err(wrap(ParseError::new(0, "stored classes disagree with the mesh geometry")));
    }
    Ok(mesh)
}

pub fn read_mesh_file(path: impl AsRef<Path>) -> Result<TetMeshP2, MeshError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_mesh(std::io::BufReader::new(file), &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::r_max;

    #[test]
    fn base_mesh_has_sixty_positive_tets() {
        let mesh = build_mesh(0).unwrap();
        assert_eq!(mesh.tets.len(), 60);
        assert_eq!(mesh.vertices.len(), 33);
        for t in 0..mesh.tets.len() {
            assert!(mesh.tet_volume(t) > 0.0);
        }
    }

    #[test]
    fn refinement_multiplies_tets_and_shrinks_edges() {
        let m0 = build_mesh(0).unwrap();
        let m1 = build_mesh(1).unwrap();
        let m2 = build_mesh(2).unwrap();
        assert_eq!(m1.tets.len(), 480);
        assert_eq!(m2.tets.len(), 3840);
        assert!(m1.h_max() < m0.h_max());
        assert!(m2.h_max() < m1.h_max());
        for t in 0..m2.tets.len() {
            assert!(m2.tet_volume(t) > 0.0);
        }
    }

    #[test]
    fn five_domain_vertex_classes() {
        for level in 0..=2 {
            let mesh = build_mesh(level).unwrap();
            let kind2 = mesh
                .classes
                .iter()
                .filter(|c| c.kind == ClassKind::DomainVertex)
                .count();
            assert_eq!(kind2, 5, "level {level}");
            // face-vertex classes pair up 12 faces -> multiples of 6,
            // edge-vertex classes triple up 30 edges -> multiples of 10
            let kind3 = mesh
                .classes
                .iter()
                .filter(|c| c.kind == ClassKind::FaceVertex)
                .count();
            let kind4 = mesh
                .classes
                .iter()
                .filter(|c| c.kind == ClassKind::EdgeVertex)
                .count();
            assert_eq!(kind3 % 6, 0, "level {level}");
            assert_eq!(kind4 % 10, 0, "level {level}");
        }
    }

    #[test]
    fn class_members_reduce_to_one_quotient_point() {
        let mesh = build_mesh(1).unwrap();
        for class in &mesh.classes {
            if class.nodes.len() < 2 {
                continue;
            }
            let reduced: Vec<[f64; 3]> = class
                .nodes
                .iter()
                .map(|&n| {
                    let q = lift(mesh.node_position(n)).unwrap();
                    let (r, _) = mesh.domain.reduce(q).unwrap();
                    project(r)
                })
                .collect();
            for pair in reduced.windows(2) {
                for k in 0..3 {
                    assert!(
                        (pair[0][k] - pair[1][k]).abs() < PARTNER_TOL,
                        "class members reduce to different quotient points"
                    );
                }
            }
        }
    }

    #[test]
    fn center_node_is_interior_singleton() {
        let mesh = build_mesh(0).unwrap();
        let class = &mesh.classes[mesh.node_class[0]];
        assert_eq!(class.kind, ClassKind::InteriorVertex);
        assert_eq!(class.nodes, vec![0]);
    }

    #[test]
    fn domain_vertex_class_of_s3() {
        let mesh = build_mesh(0).unwrap();
        // S_3 is mesh vertex 3 (the center occupies 0); its class holds
        // the projections of S_1, S_4, S_6, i.e. mesh vertices 1, 4, 6
        let class = &mesh.classes[mesh.node_class[3]];
        assert_eq!(class.kind, ClassKind::DomainVertex);
        assert_eq!(class.nodes, vec![1, 3, 4, 6]);
    }

    #[test]
    fn midpoints_are_interior_singletons() {
        let mesh = build_mesh(1).unwrap();
        for m in 0..mesh.midpoints.len() {
            let node = mesh.n_vertices() + m;
            let class = &mesh.classes[mesh.node_class[node]];
            assert_eq!(class.kind, ClassKind::Midpoint);
            assert_eq!(class.nodes, vec![node]);
        }
    }

    #[test]
    fn conformity_every_face_shared_by_at_most_two() {
        let mesh = build_mesh(1).unwrap();
        let mut count: HashMap<[usize; 3], u32> = HashMap::new();
        for t in &mesh.tets {
            for skip in 0..4 {
                let mut tri: Vec<usize> = (0..4).filter(|&k| k != skip).map(|k| t[k]).collect();
                tri.sort_unstable();
                *count.entry([tri[0], tri[1], tri[2]]).or_insert(0) += 1;
            }
        }
        for (&tri, &c) in &count {
            assert!(c <= 2, "face {tri:?} shared by {c} tets");
            if c == 1 {
                // boundary triangle: all three vertices on the boundary
                for v in tri {
                    assert!(!mesh.vertex_faces[v].is_empty());
                }
            }
        }
    }

    #[test]
    fn boundary_stays_inside_r_max() {
        let mesh = build_mesh(2).unwrap();
        let mut worst: f64 = 0.0;
        for (v, faces) in mesh.vertex_faces.iter().enumerate() {
            if !faces.is_empty() {
                let p = mesh.vertices[v];
                worst = worst.max((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt());
            }
        }
        assert!(worst <= r_max() + 1e-12);
    }

    #[test]
    fn rejects_deep_levels() {
        assert!(matches!(build_mesh(MAX_LEVEL + 1), Err(MeshError::LevelTooDeep { .. })));
    }

    #[test]
    fn write_read_round_trip() {
        let mesh = build_mesh(1).unwrap();
        let mut buf = Vec::new();
        mesh.write(&mut buf).unwrap();
        let back = read_mesh(std::io::Cursor::new(&buf), "buffer").unwrap();
        assert_eq!(back.level, mesh.level);
        assert_eq!(back.vertices, mesh.vertices);
        assert_eq!(back.tets, mesh.tets);
        assert_eq!(back.classes.len(), mesh.classes.len());
        for (a, b) in back.classes.iter().zip(mesh.classes.iter()) {
            assert_eq!(a.kind, b.kind);
            assert_eq!(a.nodes, b.nodes);
        }
        // a second write is byte-identical
        let mut buf2 = Vec::new();
        back.write(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn truncated_file_fails_with_line_number() {
        let mesh = build_mesh(0).unwrap();
        let mut buf = Vec::new();
        mesh.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(10).collect::<Vec<_>>().join("\n");
        let err = read_mesh(std::io::Cursor::new(cut.as_bytes()), "cut").unwrap_err();
        assert!(matches!(err, MeshError::Parse { .. }), "{err}");
    }

    #[test]
    fn level0_file_has_sixty_tet_records() {
        let mesh = build_mesh(0).unwrap();
        let mut buf = Vec::new();
        mesh.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("TETS 60"));
    }
}
