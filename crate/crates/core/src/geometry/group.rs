//! Enumeration of the binary icosahedral group as 120 unit quaternions.
//!
//! The group is the union of the 8 basic quaternions, the 16 half-sum
//! quaternions (±1 ± i ± j ± k)/2, and the 96 icosians obtained from
//! (0, ±1, ±1/σ, ±σ)/2 by even permutations of the four coordinates,
//! σ the golden ratio. The twelve Clifford translations that glue
//! opposite faces of the fundamental domain all have scalar part σ/2.

use super::quaternion::Quaternion;
use super::GOLDEN_RATIO;

/// One of the 120 group elements.
#[derive(Clone, Copy, Debug)]
pub struct GroupElement {
    pub q: Quaternion,
    /// Position in the canonical enumeration (0..119).
    pub index: usize,
    /// 1..=12 when the element is the Clifford translation g_1..g_12.
    pub clifford: Option<u8>,
}

/// The binary icosahedral group with lookup tables.
pub struct BinaryIcosahedralGroup {
    elements: Vec<GroupElement>,
    /// index of g_1..g_12 in `elements`
    clifford_index: [usize; 12],
    inverse: Vec<usize>,
}

/// Matching tolerance when identifying a quaternion with a group element.
const MATCH_TOL: f64 = 1e-9;

fn clifford_quaternions() -> [Quaternion; 12] {
    let s = GOLDEN_RATIO;
    let t = 1.0 / s;
    let h = 0.5;
    let g = |w: f64, x: f64, y: f64, z: f64| Quaternion::new(h * w, h * x, h * y, h * z);
    [
        g(s, t, 1.0, 0.0),
        g(s, 1.0, 0.0, -t),
        g(s, 0.0, t, -1.0),
        g(s, -t, 1.0, 0.0),
        g(s, 0.0, t, 1.0),
        g(s, 1.0, 0.0, t),
        // g_7..g_12 are the inverses of g_1..g_6
        g(s, -t, -1.0, 0.0),
        g(s, -1.0, 0.0, t),
        g(s, 0.0, -t, 1.0),
        g(s, t, -1.0, 0.0),
        g(s, 0.0, -t, -1.0),
        g(s, -1.0, 0.0, -t),
    ]
}

/// The 12 even permutations of four slots.
fn even_permutations() -> Vec<[usize; 4]> {
    let mut perms = Vec::new();
    let mut items = [0usize, 1, 2, 3];
    heap_permutations(&mut items, 4, &mut perms);
    perms.into_iter().filter(|p| parity(p) == 0).collect()
}

fn heap_permutations(items: &mut [usize; 4], k: usize, out: &mut Vec<[usize; 4]>) {
    if k == 1 {
        out.push(*items);
        return;
    }
    for i in 0..k {
        heap_permutations(items, k - 1, out);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

fn parity(p: &[usize; 4]) -> usize {
    let mut swaps = 0;
    let mut p = *p;
    for i in 0..4 {
        while p[i] != i {
            let j = p[i];
            p.swap(i, j);
            swaps += 1;
        }
    }
    swaps % 2
}

fn enumerate_raw() -> Vec<Quaternion> {
    let s = GOLDEN_RATIO;
    let t = 1.0 / s;
    let mut out: Vec<Quaternion> = Vec::with_capacity(120);

    // +-1, +-i, +-j, +-k
    for b in [Quaternion::ONE, Quaternion::I, Quaternion::J, Quaternion::K] {
        out.push(b);
        out.push(b.neg());
    }
    // (+-1 +- i +- j +- k)/2
    for sw in [0.5, -0.5] {
        for sx in [0.5, -0.5] {
            for sy in [0.5, -0.5] {
                for sz in [0.5, -0.5] {
                    out.push(Quaternion::new(sw, sx, sy, sz));
                }
            }
        }
    }
    // even permutations of (0, 1, 1/sigma, sigma)/2, all sign choices on
    // the three nonzero entries
    let base = [0.0, 1.0, t, s];
    for perm in even_permutations() {
        for signs in 0..8u32 {
            let mut c = [0.0f64; 4];
            let mut bit = 0;
            for slot in 0..4 {
                let v = base[perm[slot]];
                if v == 0.0 {
                    c[slot] = 0.0;
                } else {
                    let sgn = if signs >> bit & 1 == 1 { -1.0 } else { 1.0 };
                    c[slot] = 0.5 * sgn * v;
                    bit += 1;
                }
            }
            out.push(Quaternion::new(c[0], c[1], c[2], c[3]));
        }
    }
    out
}

impl BinaryIcosahedralGroup {
    /// Enumerate the group and build the lookup tables.
    pub fn new() -> Self {
        let raw = enumerate_raw();
        assert_eq!(raw.len(), 120, "enumeration must produce 120 candidates");
        let cliffords = clifford_quaternions();
        let mut elements: Vec<GroupElement> = raw
            .into_iter()
            .enumerate()
            .map(|(index, q)| {
                let clifford = cliffords
                    .iter()
                    .position(|g| g.approx_eq(q, MATCH_TOL))
                    .map(|i| (i + 1) as u8);
                GroupElement { q, index, clifford }
            })
            .collect();
        // deterministic order: sort by coordinates, re-index
        elements.sort_by(|a, b| {
            a.q.as_array()
                .iter()
                .zip(b.q.as_array().iter())
                .find_map(|(x, y)| x.partial_cmp(y).filter(|o| o.is_ne()))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for (i, e) in elements.iter_mut().enumerate() {
            e.index = i;
        }
        let mut clifford_index = [usize::MAX; 12];
        for e in &elements {
            if let Some(c) = e.clifford {
                clifford_index[(c - 1) as usize] = e.index;
            }
        }
        assert!(
            clifford_index.iter().all(|&i| i != usize::MAX),
            "all twelve Clifford translations must appear in the group"
        );
        let mut group = BinaryIcosahedralGroup {
            elements,
            clifford_index,
            inverse: Vec::new(),
        };
        group.inverse = (0..120)
            .map(|i| {
                let inv = group.elements[i].q.conjugate();
                group
                    .find(inv)
                    .expect("group is closed under inversion")
            })
            .collect();
        group
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn element(&self, index: usize) -> &GroupElement {
        &self.elements[index]
    }

    /// The Clifford translation g_i, i in 1..=12.
    pub fn clifford(&self, i: u8) -> &GroupElement {
        assert!((1..=12).contains(&i));
        &self.elements[self.clifford_index[(i - 1) as usize]]
    }

    pub fn cliffords(&self) -> [Quaternion; 12] {
        let mut out = [Quaternion::ONE; 12];
        for i in 0..12 {
            out[i] = self.elements[self.clifford_index[i]].q;
        }
        out
    }

    /// Index of the inverse element.
    pub fn inverse(&self, index: usize) -> usize {
        self.inverse[index]
    }

    /// Locate a quaternion in the group within the matching tolerance.
    pub fn find(&self, q: Quaternion) -> Option<usize> {
        self.elements
            .iter()
            .position(|e| e.q.approx_eq(q, MATCH_TOL))
    }

    /// Index of the identity element.
    pub fn identity(&self) -> usize {
        self.find(Quaternion::ONE).expect("identity is a group element")
    }
}

impl Default for BinaryIcosahedralGroup {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hundred_twenty_distinct_unit_elements() {
        let g = BinaryIcosahedralGroup::new();
        assert_eq!(g.len(), 120);
        for e in g.elements() {
            assert!(e.q.is_unit(), "element {} not unit", e.index);
        }
        for (i, a) in g.elements().iter().enumerate() {
            for b in g.elements().iter().skip(i + 1) {
                assert!(!a.q.approx_eq(b.q, 1e-9), "duplicate elements");
            }
        }
        assert!(g.find(Quaternion::ONE).is_some());
        assert!(g.find(Quaternion::I.neg()).is_some());
    }

    #[test]
    fn closed_under_multiplication() {
        let g = BinaryIcosahedralGroup::new();
        for a in g.elements() {
            for b in g.elements() {
                assert!(
                    g.find(a.q.mul(b.q)).is_some(),
                    "product of {} and {} escaped the group",
                    a.index,
                    b.index
                );
            }
        }
    }

    #[test]
    fn clifford_translations_and_inverses() {
        let g = BinaryIcosahedralGroup::new();
        let s = GOLDEN_RATIO;
        for i in 1..=12u8 {
            let gi = g.clifford(i);
            assert!((gi.q.w - s / 2.0).abs() < 1e-15, "g_{i} scalar part");
            assert!((gi.q.norm() - 1.0).abs() < 1e-15);
        }
        for i in 1..=6u8 {
            let gi = g.clifford(i);
            let gi6 = g.clifford(i + 6);
            assert!(
                gi.q.mul(gi6.q).approx_eq(Quaternion::ONE, 1e-14),
                "g_{} * g_{} != 1",
                i,
                i + 6
            );
            assert_eq!(g.inverse(gi.index), gi6.index);
        }
        // g_2 = (sigma, 1, 0, -1/sigma)/2 as listed
        let g2 = g.clifford(2).q;
        assert!(g2.approx_eq(
            Quaternion::new(s / 2.0, 0.5, 0.0, -0.5 / s),
            1e-15
        ));
        // g_11 = g_5^{-1}
        assert!(g
            .clifford(11)
            .q
            .approx_eq(g.clifford(5).q.conjugate(), 1e-15));
    }
}
