//! Unit quaternions as points of the 3-sphere, with the Hamilton product
//! and the chart used for visualization.

use super::GeometryError;

/// Tolerance under which a quaternion counts as unit-norm.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// A quaternion w + x i + y j + z k, doubling as the point
/// (x0, x1, x2, x3) = (w, x, y, z) of R^4.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    /// Hamilton product. Norms are multiplicative, so unit inputs give a
    /// unit output up to rounding.
    pub fn mul(self, rhs: Quaternion) -> Quaternion {
        Quaternion {
            w: self.w * rhs.w - self.x * rhs.x - self.y * rhs.y - self.z * rhs.z,
            x: self.w * rhs.x + self.x * rhs.w + self.y * rhs.z - self.z * rhs.y,
            y: self.w * rhs.y + self.y * rhs.w + self.z * rhs.x - self.x * rhs.z,
            z: self.w * rhs.z + self.z * rhs.w + self.x * rhs.y - self.y * rhs.x,
        }
    }

    pub fn conjugate(self) -> Quaternion {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn dot(self, rhs: Quaternion) -> f64 {
        self.w * rhs.w + self.x * rhs.x + self.y * rhs.y + self.z * rhs.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Quaternion {
        let n = self.norm();
        Quaternion::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn neg(self) -> Quaternion {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_NORM_TOL
    }

    /// Component-wise comparison within `tol`.
    pub fn approx_eq(self, rhs: Quaternion, tol: f64) -> bool {
        (self.w - rhs.w).abs() <= tol
            && (self.x - rhs.x).abs() <= tol
            && (self.y - rhs.y).abs() <= tol
            && (self.z - rhs.z).abs() <= tol
    }

    pub fn as_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }
}

impl std::ops::Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, rhs: Quaternion) -> Quaternion {
        Quaternion::mul(self, rhs)
    }
}

/// Comoving geodesic distance on the unit sphere, d(x,y) = arccos(x . y).
pub fn geodesic_distance(a: Quaternion, b: Quaternion) -> Result<f64, GeometryError> {
    for q in [a, b] {
        if !q.is_unit() {
            return Err(GeometryError::NotUnit { norm: q.norm() });
        }
    }
    Ok(a.dot(b).clamp(-1.0, 1.0).acos())
}

/// Chart inverse: a point X of the closed unit ball lifts to the upper
/// hemisphere point (sqrt(1-|X|^2), X).
pub fn lift(point: [f64; 3]) -> Result<Quaternion, GeometryError> {
    let r2 = point[0] * point[0] + point[1] * point[1] + point[2] * point[2];
    if r2 > 1.0 + 1e-14 {
        return Err(GeometryError::OutsideBall { norm: r2.sqrt() });
    }
    Ok(Quaternion::new(
        (1.0 - r2).max(0.0).sqrt(),
        point[0],
        point[1],
        point[2],
    ))
}

/// Chart: drop the first coordinate.
pub fn project(q: Quaternion) -> [f64; 3] {
    [q.x, q.y, q.z]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basis_products() {
        assert!(Quaternion::I.mul(Quaternion::J).approx_eq(Quaternion::K, 0.0));
        assert!(Quaternion::J.mul(Quaternion::K).approx_eq(Quaternion::I, 0.0));
        assert!(Quaternion::K.mul(Quaternion::I).approx_eq(Quaternion::J, 0.0));
        assert!(Quaternion::I
            .mul(Quaternion::I)
            .approx_eq(Quaternion::ONE.neg(), 0.0));
    }

    #[test]
    fn distance_identity_and_antipode() {
        let q = Quaternion::new(0.5, 0.5, 0.5, 0.5);
        assert_eq!(geodesic_distance(q, q).unwrap(), 0.0);
        let d = geodesic_distance(q, q.neg()).unwrap();
        assert!((d - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn distance_rejects_non_unit() {
        let q = Quaternion::new(2.0, 0.0, 0.0, 0.0);
        assert!(geodesic_distance(q, Quaternion::ONE).is_err());
    }

    #[test]
    fn lift_project_round_trip() {
        let x = [0.1, 0.2, 0.05];
        let q = lift(x).unwrap();
        let back = project(q);
        for i in 0..3 {
            assert!((back[i] - x[i]).abs() < 1e-14);
        }
        assert!(lift([0.0; 3]).unwrap().approx_eq(Quaternion::ONE, 0.0));
        assert!(lift([0.9, 0.9, 0.9]).is_err());
    }

    proptest! {
        #[test]
        fn norm_is_multiplicative(a in prop::array::uniform4(-2.0f64..2.0),
                                  b in prop::array::uniform4(-2.0f64..2.0)) {
            let qa = Quaternion::new(a[0], a[1], a[2], a[3]);
            let qb = Quaternion::new(b[0], b[1], b[2], b[3]);
            let lhs = qa.mul(qb).norm();
            let rhs = qa.norm() * qb.norm();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
        }

        #[test]
        fn product_is_associative(a in prop::array::uniform4(-1.0f64..1.0),
                                  b in prop::array::uniform4(-1.0f64..1.0),
                                  c in prop::array::uniform4(-1.0f64..1.0)) {
            let qa = Quaternion::new(a[0], a[1], a[2], a[3]);
            let qb = Quaternion::new(b[0], b[1], b[2], b[3]);
            let qc = Quaternion::new(c[0], c[1], c[2], c[3]);
            let lhs = qa.mul(qb).mul(qc);
            let rhs = qa.mul(qb.mul(qc));
            prop_assert!(lhs.approx_eq(rhs, 1e-12));
        }
    }
}
