//! Rigid transforms and intensity-tagged points.

use nalgebra::{Matrix3, Quaternion, Rotation3, Unit, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Tolerance on `R·Rᵀ − I`, `det R − 1` and quaternion norm for inputs.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

/// A proper rigid motion `p ↦ R·p + t`.
///
/// The rotation is stored as a unit quaternion (the serialized form) together
/// with its matrix, which is what point transforms use.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    orientation: UnitQuaternion<f64>,
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self::from_unit_quaternion(UnitQuaternion::identity(), Vec3::zeros())
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::from_unit_quaternion(UnitQuaternion::identity(), translation)
    }

    pub fn from_unit_quaternion(orientation: UnitQuaternion<f64>, translation: Vec3) -> Self {
        Self {
            rotation: *orientation.to_rotation_matrix().matrix(),
            orientation,
            translation,
        }
    }

    /// Rotation of `angle` radians about `axis` followed by `translation`.
    pub fn from_axis_angle(axis: Vec3, angle: f64, translation: Vec3) -> Self {
        let q = UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle);
        Self::from_unit_quaternion(q, translation)
    }

    /// Builds a transform from a rotation matrix, rejecting anything that is
    /// not orthonormal with determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidTransform("non-finite entry".into()));
        }
        let ortho = (rotation * rotation.transpose() - Matrix3::identity()).abs().max();
        if ortho > ROTATION_TOLERANCE {
            return Err(Error::InvalidTransform(format!(
                "rotation is not orthonormal (max |R·Rᵀ−I| = {ortho:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::InvalidTransform(format!(
                "rotation determinant is {det}, expected +1"
            )));
        }
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rotation));
        Ok(Self::from_unit_quaternion(q, translation))
    }

    /// Builds a transform from quaternion components `(x, y, z, w)`.
    ///
    /// The quaternion must have unit norm within [`ROTATION_TOLERANCE`]. A
    /// quaternion that is already unit to within a few ulps is kept verbatim
    /// so that serialized poses reload bit-identically.
    pub fn from_quaternion(xyzw: [f64; 4], translation: Vec3) -> Result<Self> {
        let [x, y, z, w] = xyzw;
        if !xyzw.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidTransform("non-finite entry".into()));
        }
        let q = Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if (norm - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::InvalidTransform(format!(
                "quaternion norm {norm} is not 1"
            )));
        }
        let orientation = if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::new_normalize(q)
        };
        Ok(Self::from_unit_quaternion(orientation, translation))
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn orientation(&self) -> &UnitQuaternion<f64> {
        &self.orientation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// Quaternion components in `(x, y, z, w)` order.
    pub fn quaternion_xyzw(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.i, q.j, q.k, q.w]
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        Self::from_unit_quaternion(
            self.orientation * other.orientation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let inv = self.orientation.inverse();
        let rotation = *inv.to_rotation_matrix().matrix();
        Self {
            orientation: inv,
            translation: -(rotation * self.translation),
            rotation,
        }
    }
}

/// A 3D point with an 8-bit grayscale intensity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntensityPoint {
    pub position: Vec3,
    pub intensity: u8,
}

impl IntensityPoint {
    pub fn new(x: f64, y: f64, z: f64, intensity: u8) -> Self {
        Self {
            position: Vec3::new(x, y, z),
            intensity,
        }
    }

    pub fn range(&self) -> f64 {
        self.position.norm()
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            position: t.transform_point(&self.position),
            intensity: self.intensity,
        }
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;

    fn max_abs_diff(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
        (a - b).abs().max()
    }

    #[test]
    fn identity_leaves_points_alone() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(RigidTransform::identity().transform_point(&p), p);
    }

    #[test]
    fn pure_translation() {
        let t = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 5.0));
        assert_eq!(t.transform_point(&Vec3::new(1.0, 0.0, 0.0)), Vec3::new(1.0, 0.0, 5.0));
    }

    #[test]
    fn quarter_turn_about_z() {
        let t = RigidTransform::from_axis_angle(Vec3::z(), FRAC_PI_2, Vec3::zeros());
        let p = t.transform_point(&Vec3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(p, Vec3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn inverse_of_identity_and_translation() {
        let id = RigidTransform::identity().inverse();
        assert_eq!(*id.rotation(), Matrix3::identity());
        assert_eq!(*id.translation(), Vec3::zeros());

        let inv = RigidTransform::from_translation(Vec3::new(1.0, 2.0, 3.0)).inverse();
        assert_eq!(*inv.translation(), Vec3::new(-1.0, -2.0, -3.0));
        assert_eq!(*inv.rotation(), Matrix3::identity());
    }

    #[test]
    fn rejects_bad_rotations() {
        let scaled = Matrix3::identity() * 1.1;
        assert!(RigidTransform::new(scaled, Vec3::zeros()).is_err());
        let reflection = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(RigidTransform::new(reflection, Vec3::zeros()).is_err());
        assert!(RigidTransform::from_quaternion([0.0, 0.0, 0.0, 1.1], Vec3::zeros()).is_err());
        assert!(RigidTransform::from_quaternion([0.0, 0.0, 0.0, f64::NAN], Vec3::zeros()).is_err());
    }

    #[test]
    fn matrix_constructor_round_trips() {
        let t = RigidTransform::from_axis_angle(Vec3::new(1.0, 2.0, 3.0), 0.7, Vec3::new(4.0, 5.0, 6.0));
        let u = RigidTransform::new(*t.rotation(), *t.translation()).unwrap();
        assert!(max_abs_diff(t.rotation(), u.rotation()) < 1e-12);
    }

    fn arb_transform() -> impl Strategy<Value = RigidTransform> {
        (
            prop::array::uniform4(-1.0f64..1.0),
            prop::array::uniform3(-100.0f64..100.0),
        )
            .prop_filter("non-degenerate quaternion", |(q, _)| {
                q.iter().map(|v| v * v).sum::<f64>() > 1e-3
            })
            .prop_map(|(q, t)| {
                let unit = UnitQuaternion::new_normalize(Quaternion::new(q[3], q[0], q[1], q[2]));
                RigidTransform::from_unit_quaternion(unit, Vec3::new(t[0], t[1], t[2]))
            })
    }

    proptest! {
        #[test]
        fn compose_with_inverse_is_identity(t in arb_transform()) {
            let id = t.compose(&t.inverse());
            prop_assert!(max_abs_diff(id.rotation(), &Matrix3::identity()) < 1e-9);
            prop_assert!(id.translation().abs().max() < 1e-9);
            let id = t.inverse().compose(&t);
            prop_assert!(id.translation().abs().max() < 1e-9);
        }

        #[test]
        fn rotations_are_proper(t in arb_transform()) {
            let r = t.rotation();
            prop_assert!(max_abs_diff(&(r * r.transpose()), &Matrix3::identity()) < 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn composition_matches_sequential_application(
            a in arb_transform(),
            b in arb_transform(),
            p in prop::array::uniform3(-50.0f64..50.0),
        ) {
            let p = Vec3::new(p[0], p[1], p[2]);
            let lhs = a.compose(&b).transform_point(&p);
            let rhs = a.transform_point(&b.transform_point(&p));
            prop_assert!((lhs - rhs).abs().max() < 1e-9);
        }
    }
}
