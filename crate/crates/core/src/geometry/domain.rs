//! The fundamental domain: a spherical regular dodecahedron whose 120
//! copies tile the 3-sphere, together with point classification,
//! reduction of arbitrary sphere points into the domain, and the boundary
//! identification induced by the twelve Clifford translations.

use super::group::BinaryIcosahedralGroup;
use super::quaternion::{lift, project, Quaternion};
use super::{GeometryError, GOLDEN_RATIO};
use std::io::Write;

/// Absolute tolerance on the supporting half-space dot products that
/// decides boundary membership.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// Classification of a sphere point against the closed domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Interior,
    /// On exactly one face plane; the index is 0-based (face 1 is 0).
    Face(usize),
    /// On exactly two face planes (a pentagon edge), not a vertex.
    Edge,
    /// On three face planes: one of the twenty vertices.
    Vertex,
    Outside,
}

/// The spherical dodecahedron F with its gluing data.
pub struct FundamentalDomain {
    /// S_1..S_20 in the order of the construction tables.
    vertices: [Quaternion; 20],
    /// Ordered vertex cycles of the faces F_1..F_12 (0-based vertex ids).
    faces: [[usize; 5]; 12],
    /// Unit R^4 normals of the hyperplanes through the origin containing
    /// each face, oriented so the domain satisfies n . x >= 0.
    normals: [[f64; 4]; 12],
    group: BinaryIcosahedralGroup,
    /// g_1..g_12 cached as quaternions.
    cliffords: [Quaternion; 12],
    /// Group indices of g_1..g_12.
    clifford_group_index: [usize; 12],
}

/// Face cycles from the edge tables: face i is glued onto face i+6 by g_i.
const FACE_CYCLES: [[usize; 5]; 12] = [
    [2, 17, 15, 4, 19],  // F1: S3 S18 S16 S5 S20
    [17, 11, 8, 6, 2],   // F2: S18 S12 S9 S7 S3
    [2, 6, 9, 13, 19],   // F3: S3 S7 S10 S14 S20
    [19, 13, 18, 3, 4],  // F4: S20 S14 S19 S4 S5
    [4, 3, 14, 12, 15],  // F5: S5 S4 S15 S13 S16
    [15, 12, 0, 11, 17], // F6: S16 S13 S1 S12 S18
    [5, 7, 10, 16, 1],   // F7: S6 S8 S11 S17 S2
    [14, 16, 1, 18, 3],  // F8: S15 S17 S2 S19 S4
    [0, 10, 16, 14, 12], // F9: S1 S11 S17 S15 S13
    [8, 7, 10, 0, 11],   // F10: S9 S8 S11 S1 S12
    [9, 5, 7, 8, 6],     // F11: S10 S6 S8 S9 S7
    [18, 1, 5, 9, 13],   // F12: S19 S2 S6 S10 S14
];

/// Vertex images g_i(S_j) = S_k from the construction tables, 0-based,
/// entries (i-1, j-1, k-1). Thirty identities pin the action side.
pub const VERTEX_IMAGES: [(usize, usize, usize); 30] = [
    (0, 2, 5),
    (0, 17, 7),
    (0, 15, 10),
    (0, 4, 16),
    (0, 19, 1),
    (1, 17, 14),
    (1, 11, 16),
    (1, 8, 1),
    (1, 6, 18),
    (1, 2, 3),
    (2, 2, 0),
    (2, 6, 10),
    (2, 9, 16),
    (2, 13, 14),
    (2, 19, 12),
    (3, 19, 8),
    (3, 13, 7),
    (3, 18, 10),
    (3, 3, 0),
    (3, 4, 11),
    (4, 4, 9),
    (4, 3, 5),
    (4, 14, 7),
    (4, 12, 8),
    (4, 15, 6),
    (5, 15, 18),
    (5, 12, 1),
    (5, 0, 5),
    (5, 11, 9),
    (5, 17, 13),
];

fn domain_vertices() -> [Quaternion; 20] {
    let s = GOLDEN_RATIO;
    let s2 = s * s;
    let u = 1.0 / s;
    let v = 1.0 / (s * s);
    let c = 1.0 / (2.0 * 2.0_f64.sqrt());
    let q = |a: f64, b: f64, d: f64, e: f64| Quaternion::new(c * a, c * b, c * d, c * e);
    [
        q(s2, -u, u, -u),   // S1
        q(s2, 1.0, v, 0.0), // S2
        q(s2, -u, -u, u),   // S3
        q(s2, u, -u, -u),   // S4
        q(s2, 0.0, -1.0, -v), // S5
        q(s2, u, u, u),     // S6
        q(s2, -v, 0.0, 1.0), // S7
        q(s2, 0.0, 1.0, v), // S8
        q(s2, -u, u, u),    // S9
        q(s2, v, 0.0, 1.0), // S10
        q(s2, 0.0, 1.0, -v), // S11
        q(s2, -1.0, v, 0.0), // S12
        q(s2, -v, 0.0, -1.0), // S13
        q(s2, u, -u, u),    // S14
        q(s2, v, 0.0, -1.0), // S15
        q(s2, -u, -u, -u),  // S16
        q(s2, u, u, -u),    // S17
        q(s2, -1.0, -v, 0.0), // S18
        q(s2, 1.0, -v, 0.0), // S19
        q(s2, 0.0, -1.0, v), // S20
    ]
}

/// Unit normal of the 3-space spanned by a face's five vertices, oriented
/// toward the domain center.
///
/// The supporting hyperplane passes through the origin, so the vertices
/// themselves (not their differences: the five points of a pentagon lie
/// on a circle, whose chords only span a plane) give three independent
/// directions of the hyperplane.
fn face_normal(vertices: &[Quaternion; 20], cycle: &[usize; 5]) -> [f64; 4] {
    let a = vertices[cycle[0]].as_array();
    let u = vertices[cycle[0]].as_array();
    let v = vertices[cycle[1]].as_array();
    let w = vertices[cycle[2]].as_array();
    // Generalized cross product via cofactor expansion.
    let mut n = [0.0f64; 4];
    for i in 0..4 {
        let mut m = [[0.0f64; 3]; 3];
        let mut col = 0;
        for j in 0..4 {
            if j == i {
                continue;
            }
            m[0][col] = u[j];
            m[1][col] = v[j];
            m[2][col] = w[j];
            col += 1;
        }
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        n[i] = if i % 2 == 0 { det } else { -det };
    }
    // The hyperplane passes through the origin, so a face vertex must be
    // orthogonal to n; orient so that the center (1,0,0,0) is positive.
    let norm = (n.iter().map(|x| x * x).sum::<f64>()).sqrt();
    let sign = if n[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = sign * n[i] / norm;
    }
    debug_assert!(a.iter().zip(out.iter()).map(|(x, y)| x * y).sum::<f64>().abs() < 1e-12);
    out
}

fn dot4(a: [f64; 4], b: [f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Lexicographic order on coordinates with a snap tolerance, so
/// floating noise between copies of the same point cannot flip the
/// comparison against a genuinely distinct class member.
fn lex_less(a: Quaternion, b: Quaternion) -> bool {
    let (a, b) = (a.as_array(), b.as_array());
    for k in 0..4 {
        if (a[k] - b[k]).abs() > 1e-9 {
            return a[k] < b[k];
        }
    }
    false
}

impl FundamentalDomain {
    pub fn new() -> Self {
        let vertices = domain_vertices();
        let mut normals = [[0.0; 4]; 12];
        for (i, cycle) in FACE_CYCLES.iter().enumerate() {
            normals[i] = face_normal(&vertices, cycle);
            // all five vertices must lie on the plane
            for &v in cycle {
                debug_assert!(dot4(vertices[v].as_array(), normals[i]).abs() < 1e-12);
            }
        }
        let group = BinaryIcosahedralGroup::new();
        let cliffords = group.cliffords();
        let mut clifford_group_index = [0usize; 12];
        for i in 0..12 {
            clifford_group_index[i] = group.clifford((i + 1) as u8).index;
        }
        FundamentalDomain {
            vertices,
            faces: FACE_CYCLES,
            normals,
            group,
            cliffords,
            clifford_group_index,
        }
    }

    pub fn vertices(&self) -> &[Quaternion; 20] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 5]; 12] {
        &self.faces
    }

    pub fn face_normals(&self) -> &[[f64; 4]; 12] {
        &self.normals
    }

    pub fn group(&self) -> &BinaryIcosahedralGroup {
        &self.group
    }

    /// The Clifford translation g_i (i in 1..=12) gluing face i onto face
    /// i+6 (and face i+6 onto face i for i > 6).
    pub fn clifford(&self, i: usize) -> Quaternion {
        self.cliffords[i - 1]
    }

    /// Partner of face index f (0-based) under the gluing: f+6 mod 12.
    pub fn face_partner(&self, f: usize) -> usize {
        (f + 6) % 12
    }

    /// The gluing map carrying points of face `f` to the partner face:
    /// left multiplication by g_{f+1}.
    pub fn face_gluing(&self, f: usize) -> Quaternion {
        self.cliffords[f]
    }

    /// Classify a unit quaternion against the closed domain using the
    /// twelve supporting half-spaces.
    pub fn contains(&self, q: Quaternion, tol: f64) -> Location {
        let p = q.as_array();
        let mut on_faces = 0usize;
        let mut face_id = 0usize;
        for (i, n) in self.normals.iter().enumerate() {
            let d = dot4(p, *n);
            if d < -tol {
                return Location::Outside;
            }
            if d <= tol {
                on_faces += 1;
                face_id = i;
            }
        }
        match on_faces {
            0 => Location::Interior,
            1 => Location::Face(face_id),
            2 => Location::Edge,
            _ => Location::Vertex,
        }
    }

    /// Membership in the closed domain.
    pub fn member(&self, q: Quaternion, tol: f64) -> bool {
        self.contains(q, tol) != Location::Outside
    }

    /// Reduce a unit quaternion into the closed domain: find tau in the
    /// group with tau q in F.
    ///
    /// A strictly interior image is unique and returned at once. On the
    /// boundary several members of the equivalence class are admissible;
    /// the lexicographically smallest image is chosen (smallest group
    /// index among elements reaching it), which is deterministic and,
    /// unlike an index-based tie-break, yields the same quotient point
    /// for every member of a boundary class.
    pub fn reduce(&self, q: Quaternion) -> Result<(Quaternion, usize), GeometryError> {
        if !q.is_unit() {
            return Err(GeometryError::NotUnit { norm: q.norm() });
        }
        let mut best: Option<(Quaternion, usize)> = None;
        for e in self.group.elements() {
            let image = e.q.mul(q);
            let p = image.as_array();
            let mut min_dot = f64::INFINITY;
            for n in &self.normals {
                min_dot = min_dot.min(dot4(p, *n));
            }
            if min_dot > BOUNDARY_TOL {
                return Ok((image, e.index));
            }
            if min_dot >= -BOUNDARY_TOL {
                let better = match &best {
                    None => true,
                    Some((cur, _)) => lex_less(image, *cur),
                };
                if better {
                    best = Some((image, e.index));
                }
            }
        }
        best.ok_or(GeometryError::ReductionFailed)
    }

    /// Equivalence class of a boundary point of the visualization domain:
    /// all images {p(g_i(lift X))} that land back in the domain. The class
    /// has 2, 3 or 4 members for face, edge and vertex points.
    pub fn boundary_partners(&self, point: [f64; 3]) -> Result<Vec<[f64; 3]>, GeometryError> {
        let q = lift(point)?;
        match self.contains(q, BOUNDARY_TOL) {
            Location::Interior => return Err(GeometryError::NotBoundary),
            Location::Outside => return Err(GeometryError::NotBoundary),
            _ => {}
        }
        let mut class = vec![point];
        for g in &self.cliffords {
            let image = g.mul(q);
            if self.member(image, BOUNDARY_TOL) {
                let x = project(image);
                if !class
                    .iter()
                    .any(|m| (m[0] - x[0]).abs() + (m[1] - x[1]).abs() + (m[2] - x[2]).abs() < 1e-9)
                {
                    class.push(x);
                }
            }
        }
        Ok(class)
    }

    /// Group indices of g_1..g_12.
    pub fn clifford_group_indices(&self) -> [usize; 12] {
        self.clifford_group_index
    }

    /// Write the group table: one line per element, "index w x y z".
    pub fn write_group_table(&self, mut w: impl Write) -> std::io::Result<()> {
        for e in self.group.elements() {
            writeln!(
                w,
                "{} {} {} {} {}",
                e.index,
                crate::textio::fmt(e.q.w),
                crate::textio::fmt(e.q.x),
                crate::textio::fmt(e.q.y),
                crate::textio::fmt(e.q.z)
            )?;
        }
        Ok(())
    }

    /// Write the vertex and face lists of the domain.
    pub fn write_geometry(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "VERTICES 20")?;
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(
                w,
                "{} {} {} {} {}",
                i,
                crate::textio::fmt(v.w),
                crate::textio::fmt(v.x),
                crate::textio::fmt(v.y),
                crate::textio::fmt(v.z)
            )?;
        }
        writeln!(w, "FACES 12")?;
        for (i, f) in self.faces.iter().enumerate() {
            writeln!(w, "{} {} {} {} {} {}", i, f[0], f[1], f[2], f[3], f[4])?;
        }
        Ok(())
    }
}

impl Default for FundamentalDomain {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{d_max, geodesic_distance, r_max};
    use rand::{Rng, SeedableRng};

    fn rng() -> rand_chacha::ChaCha12Rng {
        rand_chacha::ChaCha12Rng::seed_from_u64(0x0dec_a0ed)
    }

    fn random_unit(rng: &mut impl Rng) -> Quaternion {
        loop {
            let q = Quaternion::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let n = q.norm();
            if n > 1e-3 {
                return q.normalized();
            }
        }
    }

    #[test]
    fn vertices_are_unit_with_common_height() {
        let d = FundamentalDomain::new();
        let s = GOLDEN_RATIO;
        let height = s * s / (2.0 * 2.0_f64.sqrt());
        for v in d.vertices() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
            assert!((v.w - height).abs() < 1e-12);
        }
    }

    #[test]
    fn appendix_vertex_images_under_left_multiplication() {
        let d = FundamentalDomain::new();
        for &(gi, sj, sk) in VERTEX_IMAGES.iter() {
            let image = d.clifford(gi + 1).mul(d.vertices()[sj]);
            assert!(
                image.approx_eq(d.vertices()[sk], 1e-12),
                "g_{}(S_{}) != S_{}",
                gi + 1,
                sj + 1,
                sk + 1
            );
        }
    }

    #[test]
    fn gluing_maps_face_onto_partner_vertexwise() {
        let d = FundamentalDomain::new();
        for f in 0..6 {
            let g = d.face_gluing(f);
            let src = d.faces()[f];
            let dst = d.faces()[d.face_partner(f)];
            for &v in &src {
                let image = g.mul(d.vertices()[v]);
                assert!(
                    dst.iter().any(|&w| image.approx_eq(d.vertices()[w], 1e-12)),
                    "face {} vertex {} does not map onto face {}",
                    f + 1,
                    v + 1,
                    d.face_partner(f) + 1
                );
            }
        }
    }

    #[test]
    fn center_interior_vertices_on_three_planes() {
        let d = FundamentalDomain::new();
        assert_eq!(d.contains(Quaternion::ONE, BOUNDARY_TOL), Location::Interior);
        for v in d.vertices() {
            assert_eq!(d.contains(*v, BOUNDARY_TOL), Location::Vertex);
        }
        // barycenter of face 1's five vertices, normalized, sits on face 1
        let cycle = d.faces()[0];
        let mut b = [0.0; 4];
        for &v in &cycle {
            let a = d.vertices()[v].as_array();
            for i in 0..4 {
                b[i] += a[i];
            }
        }
        let q = Quaternion::new(b[0], b[1], b[2], b[3]).normalized();
        assert_eq!(d.contains(q, BOUNDARY_TOL), Location::Face(0));
    }

    #[test]
    fn paper_constants() {
        assert!((d_max() - 0.38813951537018876).abs() < 1e-12);
        assert!((r_max() - 0.37846697903356038).abs() < 1e-12);
        // rounded values quoted alongside the construction
        assert!((d_max() - 0.388).abs() < 5e-4);
        assert!((r_max() - 0.378).abs() < 5e-4);
        let d = FundamentalDomain::new();
        let north = Quaternion::ONE;
        let dist = geodesic_distance(north, d.vertices()[0]).unwrap();
        assert!((dist - d_max()).abs() < 1e-12);
    }

    #[test]
    fn reduce_interior_and_forward_images() {
        let d = FundamentalDomain::new();
        let mut rng = rng();
        let interior = [0.05, -0.08, 0.03];
        let q = lift(interior).unwrap();
        let (r, tau) = d.reduce(q).unwrap();
        assert!(r.approx_eq(q, 1e-12));
        assert_eq!(tau, d.group().identity());

        // x = g_7 y for interior y reduces back through g_1
        let g7 = d.clifford(7);
        let x = g7.mul(q);
        let (r, tau) = d.reduce(x).unwrap();
        assert!(r.approx_eq(q, 1e-12));
        assert_eq!(tau, d.clifford_group_indices()[0]);

        for _ in 0..1000 {
            let q = random_unit(&mut rng);
            let (r, tau) = d.reduce(q).unwrap();
            assert!(d.member(r, BOUNDARY_TOL));
            assert!(r.approx_eq(d.group().element(tau).q.mul(q), 1e-12));
        }
    }

    #[test]
    fn reduction_is_well_defined_on_the_quotient() {
        let d = FundamentalDomain::new();
        let mut rng = rng();
        for _ in 0..50 {
            let q = random_unit(&mut rng);
            let (r0, _) = d.reduce(q).unwrap();
            for step in 0..8 {
                let tau = d.group().element((step * 17 + 3) % 120).q;
                let (r1, _) = d.reduce(tau.mul(q)).unwrap();
                assert!(r1.approx_eq(r0, 1e-9));
            }
        }
    }

    #[test]
    fn boundary_class_sizes() {
        let d = FundamentalDomain::new();
        // vertex S_3: class of size 4 containing S_6, S_1, S_4
        let class = d.boundary_partners(project(d.vertices()[2])).unwrap();
        assert_eq!(class.len(), 4);
        for expect in [5usize, 0, 3] {
            let target = project(d.vertices()[expect]);
            assert!(
                class
                    .iter()
                    .any(|m| (m[0] - target[0]).abs() < 1e-9
                        && (m[1] - target[1]).abs() < 1e-9
                        && (m[2] - target[2]).abs() < 1e-9),
                "class of S_3 misses S_{}",
                expect + 1
            );
        }

        // face-interior point: class of size 2
        let cycle = d.faces()[0];
        let mut b = [0.0; 4];
        for &v in &cycle {
            let a = d.vertices()[v].as_array();
            for i in 0..4 {
                b[i] += a[i];
            }
        }
        let q = Quaternion::new(b[0], b[1], b[2], b[3]).normalized();
        assert_eq!(d.boundary_partners(project(q)).unwrap().len(), 2);

        // edge midpoint (non-vertex): class of size 3
        let a = d.vertices()[cycle[0]];
        let bb = d.vertices()[cycle[1]];
        let mid = Quaternion::new(
            a.w + bb.w,
            a.x + bb.x,
            a.y + bb.y,
            a.z + bb.z,
        )
        .normalized();
        assert_eq!(d.contains(mid, BOUNDARY_TOL), Location::Edge);
        assert_eq!(d.boundary_partners(project(mid)).unwrap().len(), 3);

        // interior point is rejected
        assert!(d.boundary_partners([0.01, 0.0, 0.0]).is_err());
    }

    #[test]
    fn boundary_sample_stays_inside_r_max() {
        let d = FundamentalDomain::new();
        let mut worst: f64 = 0.0;
        for f in 0..12 {
            let cycle = d.faces()[f];
            for i in 0..5 {
                for j in (i + 1)..5 {
                    for t in 0..=8 {
                        let lam = t as f64 / 8.0;
                        let a = d.vertices()[cycle[i]].as_array();
                        let b = d.vertices()[cycle[j]].as_array();
                        let mix = Quaternion::new(
                            (1.0 - lam) * a[0] + lam * b[0],
                            (1.0 - lam) * a[1] + lam * b[1],
                            (1.0 - lam) * a[2] + lam * b[2],
                            (1.0 - lam) * a[3] + lam * b[3],
                        )
                        .normalized();
                        let p = project(mix);
                        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                        worst = worst.max(r);
                    }
                }
            }
        }
        assert!(worst <= r_max() + 1e-12, "boundary sample {} escaped", worst);
    }
}
