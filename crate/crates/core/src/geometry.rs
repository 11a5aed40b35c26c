//! Geometric primitives shared by every stage of the pipeline.
//!
//! Table frame: z up with the table surface at z = 0, +x to the viewer's
//! right, +y from the table center toward the viewer. Angles are wrapped to
//! `[-π, π)`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, Rotation3, Vector3, SVD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Maximum deviation of `RᵀR` from identity (and of `det R` from 1)
/// tolerated for a rotation matrix.
pub const SO3_TOLERANCE: f64 = 1e-9;

/// Slack added around a box when testing containment.
pub const CONTAINMENT_SLACK: f64 = 1e-6;

/// Smallest half-extent a fitted box is given along a flat axis.
pub const MIN_HALF_EXTENT: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("cloud is degenerate: {0}")]
    DegenerateCloud(String),
    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),
    #[error("rotation is not in SO(3) (orthonormality error {orthonormality:e}, det {det})")]
    NotSO3 { orthonormality: f64, det: f64 },
    #[error("box half-extents must be strictly positive, got {0:?}")]
    NonPositiveExtent([f64; 3]),
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let wrapped = angle - 2.0 * PI * ((angle + PI) / (2.0 * PI)).floor();
    // floor can land exactly on the upper bound through rounding
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Wraps an axis direction (defined modulo π) into `[-π/2, π/2)`.
pub fn wrap_half_angle(angle: f64) -> f64 {
    let half = PI / 2.0;
    let wrapped = angle - PI * ((angle + half) / PI).floor();
    if wrapped >= half {
        wrapped - PI
    } else {
        wrapped
    }
}

pub fn rot_x(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Angle of the rotation `r`, `arccos((trace(r) - 1) / 2)`, clamped against
/// rounding outside `[-1, 1]`.
pub fn geodesic_angle(r: &Matrix3<f64>) -> f64 {
    ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Heading of the rotated x-axis projected on the table plane.
pub fn yaw_of(r: &Matrix3<f64>) -> f64 {
    wrap_angle(r[(1, 0)].atan2(r[(0, 0)]))
}

fn so3_error(r: &Matrix3<f64>) -> (f64, f64) {
    let ortho = (r.transpose() * r - Matrix3::identity()).amax();
    (ortho, r.determinant())
}

/// Nearest rotation matrix in the Frobenius sense.
pub fn project_to_so3(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = SVD::new(*m, true, true);
    let u = svd.u.expect("svd u requested");
    let v_t = svd.v_t.expect("svd v_t requested");
    let d = (u * v_t).determinant().signum();
    u * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * v_t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Camera,
    #[default]
    Table,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub frame: Frame,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, frame: Frame) -> Self {
        Self { points, frame }
    }

    pub fn table(points: Vec<Vec3>) -> Self {
        Self::new(points, Frame::Table)
    }

    /// Builds a cloud after checking every coordinate is finite.
    pub fn try_new(points: Vec<Vec3>, frame: Frame) -> Result<Self, GeometryError> {
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::NonFinite("point cloud"));
        }
        Ok(Self { points, frame })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Vec3> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
        Some(sum / self.points.len() as f64)
    }

    pub fn min_z(&self) -> Option<f64> {
        self.points.iter().map(|p| p.z).reduce(f64::min)
    }

    pub fn max_z(&self) -> Option<f64> {
        self.points.iter().map(|p| p.z).reduce(f64::max)
    }

    pub fn translated(&self, offset: &Vec3) -> Self {
        Self::new(self.points.iter().map(|p| p + offset).collect(), self.frame)
    }
}

/// A proper rigid motion `x ↦ R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
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
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self, GeometryError> {
        if !rotation
            .iter()
            .chain(translation.iter())
            .all(|c| c.is_finite())
        {
            return Err(GeometryError::NonFinite("rigid transform"));
        }
        let (orthonormality, det) = so3_error(&rotation);
        if orthonormality > SO3_TOLERANCE || (det - 1.0).abs() > SO3_TOLERANCE {
            return Err(GeometryError::NotSO3 {
                orthonormality,
                det,
            });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Constructor for matrices produced internally (products of exact
    /// rotations, SVD projections); re-projects only if drift is visible.
    pub(crate) fn from_parts(rotation: Matrix3<f64>, translation: Vec3) -> Self {
        let (ortho, det) = so3_error(&rotation);
        let rotation = if ortho > SO3_TOLERANCE || (det - 1.0).abs() > SO3_TOLERANCE {
            project_to_so3(&rotation)
        } else {
            rotation
        };
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_yaw(yaw: f64, translation: Vec3) -> Self {
        Self {
            rotation: rot_z(yaw),
            translation,
        }
    }

    /// Rotation given as 9 row-major values.
    pub fn from_row_major(
        rotation: &[f64; 9],
        translation: &[f64; 3],
    ) -> Result<Self, GeometryError> {
        Self::new(
            Matrix3::from_row_slice(rotation),
            Vec3::new(translation[0], translation[1], translation[2]),
        )
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Applies the transform to every point, keeping order and frame tag.
    pub fn apply(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud::new(
            cloud.points.iter().map(|p| self.apply_point(p)).collect(),
            cloud.frame,
        )
    }

    /// `self ∘ first`: the transform that applies `first`, then `self`.
    pub fn compose(&self, first: &RigidTransform) -> RigidTransform {
        Self::from_parts(
            self.rotation * first.rotation,
            self.rotation * first.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn rotation_angle(&self) -> f64 {
        geodesic_angle(&self.rotation)
    }

    pub fn yaw(&self) -> f64 {
        yaw_of(&self.rotation)
    }

    pub fn as_rotation3(&self) -> Rotation3<f64> {
        Rotation3::from_matrix_unchecked(self.rotation)
    }
}

/// An upright box: yaw about the table z-axis only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3 {
    pub center: Vec3,
    pub half_extents: Vec3,
    pub yaw: f64,
}

impl Box3 {
    pub fn new(center: Vec3, half_extents: Vec3, yaw: f64) -> Result<Self, GeometryError> {
        if !center
            .iter()
            .chain(half_extents.iter())
            .chain(std::iter::once(&yaw))
            .all(|c| c.is_finite())
        {
            return Err(GeometryError::NonFinite("box"));
        }
        if half_extents.iter().any(|&h| h <= 0.0) {
            return Err(GeometryError::NonPositiveExtent([
                half_extents.x,
                half_extents.y,
                half_extents.z,
            ]));
        }
        Ok(Self {
            center,
            half_extents,
            yaw: wrap_angle(yaw),
        })
    }

    pub fn bottom(&self) -> f64 {
        self.center.z - self.half_extents.z
    }

    pub fn top(&self) -> f64 {
        self.center.z + self.half_extents.z
    }

    /// Half-diagonal of the footprint rectangle.
    pub fn half_diagonal_xy(&self) -> f64 {
        self.half_extents.x.hypot(self.half_extents.y)
    }

    /// Half-extents of the axis-aligned hull of the yawed box.
    pub fn hull_half_extents(&self) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        let (s, c) = (s.abs(), c.abs());
        let h = &self.half_extents;
        Vec3::new(c * h.x + s * h.y, s * h.x + c * h.y, h.z)
    }

    pub fn hull_min(&self) -> Vec3 {
        self.center - self.hull_half_extents()
    }

    pub fn hull_max(&self) -> Vec3 {
        self.center + self.hull_half_extents()
    }

    /// Footprint corners in counter-clockwise order.
    pub fn footprint(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.yaw.sin_cos();
        let (hx, hy) = (self.half_extents.x, self.half_extents.y);
        let corner = |lx: f64, ly: f64| {
            [
                self.center.x + c * lx - s * ly,
                self.center.y + s * lx + c * ly,
            ]
        };
        [
            corner(-hx, -hy),
            corner(hx, -hy),
            corner(hx, hy),
            corner(-hx, hy),
        ]
    }

    pub fn footprint_area(&self) -> f64 {
        4.0 * self.half_extents.x * self.half_extents.y
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    pub fn contains(&self, p: &Vec3, slack: f64) -> bool {
        let local = rot_z(-self.yaw) * (p - self.center);
        (0..3).all(|k| local[k].abs() <= self.half_extents[k] + slack)
    }

    pub fn contains_cloud(&self, cloud: &PointCloud, slack: f64) -> bool {
        cloud.points.iter().all(|p| self.contains(p, slack))
    }

    /// The box carried by a rigid motion. Exact when the rotation is a pure
    /// yaw; otherwise the heading of the rotated x-axis is used.
    pub fn transformed(&self, t: &RigidTransform) -> Box3 {
        Box3 {
            center: t.apply_point(&self.center),
            half_extents: self.half_extents,
            yaw: wrap_angle(self.yaw + t.yaw()),
        }
    }

    /// Separation of the two axis-aligned hulls in the xy plane: positive
    /// when disjoint (the gap along the better axis), negative when they
    /// overlap (minus the smaller penetration depth).
    pub fn hull_clearance_xy(&self, other: &Box3) -> f64 {
        let a = self.hull_half_extents();
        let b = other.hull_half_extents();
        let gx = (self.center.x - other.center.x).abs() - (a.x + b.x);
        let gy = (self.center.y - other.center.y).abs() - (a.y + b.y);
        gx.max(gy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum YawMode {
    AxisAligned,
    #[default]
    PrincipalAxis,
}

/// Dominant xy direction of the points, in `[-π/2, π/2)`. `None` when the
/// xy spread has rank < 2.
pub fn principal_yaw(points: &[Vec3]) -> Option<f64> {
    let cov = xy_covariance(points);
    let (cxx, cxy, cyy) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 1)]);
    let trace = cxx + cyy;
    let spread = ((cxx - cyy) * (cxx - cyy) / 4.0 + cxy * cxy).sqrt();
    let minor = trace / 2.0 - spread;
    if trace <= 0.0 || minor <= 1e-12 * trace {
        return None;
    }
    if spread <= 1e-9 * trace {
        // isotropic footprint: every direction is principal
        return Some(0.0);
    }
    Some(wrap_half_angle(0.5 * (2.0 * cxy).atan2(cxx - cyy)))
}

fn xy_covariance(points: &[Vec3]) -> Matrix2<f64> {
    let n = points.len().max(1) as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    let (mx, my) = (mx / n, my / n);
    let mut cov = Matrix2::zeros();
    for p in points {
        let (dx, dy) = (p.x - mx, p.y - my);
        cov[(0, 0)] += dx * dx;
        cov[(0, 1)] += dx * dy;
        cov[(1, 1)] += dy * dy;
    }
    cov[(1, 0)] = cov[(0, 1)];
    cov / n
}

/// Tight upright box around a cloud.
pub fn box_from_cloud(cloud: &PointCloud, mode: YawMode) -> Result<Box3, GeometryError> {
    if cloud.len() < 3 {
        return Err(GeometryError::DegenerateCloud(format!(
            "{} points, need at least 3",
            cloud.len()
        )));
    }
    let yaw = principal_yaw(&cloud.points)
        .ok_or_else(|| GeometryError::DegenerateCloud("xy spread has rank < 2".into()))?;
    let yaw = match mode {
        YawMode::AxisAligned => 0.0,
        YawMode::PrincipalAxis => yaw,
    };
    let to_local = rot_z(-yaw);
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in &cloud.points {
        let q = to_local * p;
        lo = lo.inf(&q);
        hi = hi.sup(&q);
    }
    if !lo.iter().chain(hi.iter()).all(|c| c.is_finite()) {
        return Err(GeometryError::NonFinite("point cloud"));
    }
    let half = ((hi - lo) / 2.0).map(|h| h.max(MIN_HALF_EXTENT));
    let center = rot_z(yaw) * ((hi + lo) / 2.0);
    Box3::new(center, half, yaw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    fn unit_cube() -> PointCloud {
        let mut pts = Vec::new();
        for &x in &[-0.5, 0.5] {
            for &y in &[-0.5, 0.5] {
                for &z in &[-0.5, 0.5] {
                    pts.push(Vec3::new(x, y, z));
                }
            }
        }
        PointCloud::table(pts)
    }

    #[test]
    fn identity_leaves_cloud_untouched() {
        let cloud = unit_cube();
        assert_eq!(RigidTransform::identity().apply(&cloud), cloud);
    }

    #[test]
    fn pure_translation() {
        let t = RigidTransform::from_translation(Vec3::new(0.1, 0.0, 0.0));
        let out = t.apply(&PointCloud::table(vec![Vec3::zeros()]));
        assert_eq!(out.points, vec![Vec3::new(0.1, 0.0, 0.0)]);
    }

    #[test]
    fn quarter_turn_about_z() {
        let t = RigidTransform::from_yaw(PI / 2.0, Vec3::zeros());
        let out = t.apply(&PointCloud::table(vec![Vec3::new(1.0, 0.0, 0.0)]));
        assert_abs_diff_eq!(out.points[0], Vec3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
        assert_eq!(out.frame, Frame::Table);
    }

    #[test]
    fn compose_with_identity_and_inverse() {
        let t = RigidTransform::new(rot_z(0.4) * rot_x(-0.2), Vec3::new(0.3, -0.1, 0.05)).unwrap();
        assert_abs_diff_eq!(
            t.compose(&RigidTransform::identity()).rotation,
            t.rotation,
            epsilon = 1e-15
        );
        let id = t.inverse().compose(&t);
        assert_abs_diff_eq!(id.rotation, Matrix3::identity(), epsilon = 1e-9);
        assert_abs_diff_eq!(id.translation, Vec3::zeros(), epsilon = 1e-9);
    }

    #[test]
    fn yaw_composition_adds_angles() {
        for &(a, b) in &[(0.3, 0.4), (2.5, 1.5), (-3.0, -0.5), (PI - 0.01, 0.02)] {
            let c = RigidTransform::from_yaw(a, Vec3::zeros())
                .compose(&RigidTransform::from_yaw(b, Vec3::zeros()));
            let expected = wrap_angle(a + b);
            let diff = wrap_angle(c.yaw() - expected);
            assert!(diff.abs() < 1e-12, "{a} + {b}: {} vs {expected}", c.yaw());
            assert!((-PI..PI).contains(&c.yaw()));
        }
    }

    #[test]
    fn rejects_reflection() {
        let m = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            RigidTransform::new(m, Vec3::zeros()),
            Err(GeometryError::NotSO3 { .. })
        ));
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), -PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_eq!(wrap_half_angle(PI / 2.0), -PI / 2.0);
        assert_abs_diff_eq!(wrap_half_angle(2.0), 2.0 - PI, epsilon = 1e-15);
    }

    #[test]
    fn cube_box() {
        let b = box_from_cloud(&unit_cube(), YawMode::PrincipalAxis).unwrap();
        assert_abs_diff_eq!(b.center, Vec3::zeros(), epsilon = 1e-12);
        assert_abs_diff_eq!(b.half_extents, Vec3::repeat(0.5), epsilon = 1e-12);
        assert_eq!(b.yaw, 0.0);

        let moved = unit_cube().translated(&Vec3::new(1.0, 0.0, 0.0));
        let b = box_from_cloud(&moved, YawMode::AxisAligned).unwrap();
        assert_abs_diff_eq!(b.center, Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
        assert_abs_diff_eq!(b.half_extents, Vec3::repeat(0.5), epsilon = 1e-12);
    }

    #[test]
    fn elongated_cloud_yaw_matches_covariance_eigenvector() {
        let dir = Vec3::new(0.3f64.cos(), 0.3f64.sin(), 0.0);
        let side = Vec3::new(-dir.y, dir.x, 0.0);
        let pts: Vec<Vec3> = (0..200)
            .map(|i| {
                let s = i as f64 / 199.0 - 0.5;
                let w = ((i * 37) % 11) as f64 / 10.0 - 0.5;
                dir * (0.2 * s) + side * (0.01 * w) + Vec3::new(0.0, 0.0, 0.002 * (i % 3) as f64)
            })
            .collect();

        // oracle: eigenvector of the largest eigenvalue of the xy covariance
        let n = pts.len() as f64;
        let mean = pts.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
        let mut cov = Matrix2::zeros();
        for p in &pts {
            let d = nalgebra::Vector2::new(p.x - mean.x, p.y - mean.y);
            cov += d * d.transpose() / n;
        }
        let eig = SymmetricEigen::new(cov);
        let k = if eig.eigenvalues[0] > eig.eigenvalues[1] {
            0
        } else {
            1
        };
        let v = eig.eigenvectors.column(k);
        let oracle = wrap_half_angle(v[1].atan2(v[0]));

        let b = box_from_cloud(&PointCloud::table(pts.clone()), YawMode::PrincipalAxis).unwrap();
        assert_abs_diff_eq!(b.yaw, oracle, epsilon = 1e-9);
        assert!((b.yaw - 0.3).abs() < 0.01);
        assert!(b.contains_cloud(&PointCloud::table(pts), CONTAINMENT_SLACK));
    }

    #[test]
    fn degenerate_clouds() {
        let two = PointCloud::table(vec![Vec3::zeros(), Vec3::x()]);
        assert!(matches!(
            box_from_cloud(&two, YawMode::AxisAligned),
            Err(GeometryError::DegenerateCloud(_))
        ));
        let line = PointCloud::table(
            (0..5)
                .map(|i| Vec3::new(i as f64, 2.0 * i as f64, 0.3))
                .collect(),
        );
        assert!(matches!(
            box_from_cloud(&line, YawMode::PrincipalAxis),
            Err(GeometryError::DegenerateCloud(_))
        ));
    }

    #[test]
    fn hull_extents_of_quarter_turned_box() {
        let b = Box3::new(Vec3::zeros(), Vec3::new(0.3, 0.1, 0.05), PI / 2.0).unwrap();
        assert_abs_diff_eq!(
            b.hull_half_extents(),
            Vec3::new(0.1, 0.3, 0.05),
            epsilon = 1e-12
        );
    }

    fn arb_transform() -> impl Strategy<Value = RigidTransform> {
        (
            -PI..PI,
            -PI..PI,
            -PI..PI,
            prop::array::uniform3(-1.0f64..1.0),
        )
            .prop_map(|(a, b, c, t)| {
                RigidTransform::new(rot_z(a) * rot_y(b) * rot_x(c), Vec3::from(t)).unwrap()
            })
    }

    fn arb_cloud() -> impl Strategy<Value = Vec<Vec3>> {
        prop::collection::vec(
            prop::array::uniform3(-1.0f64..1.0).prop_map(Vec3::from),
            3..40,
        )
    }

    proptest! {
        #[test]
        fn rigid_motion_preserves_distances(t in arb_transform(), pts in arb_cloud()) {
            let cloud = PointCloud::table(pts);
            let moved = t.apply(&cloud);
            for i in 0..cloud.len() {
                for j in (i + 1)..cloud.len() {
                    let before = (cloud.points[i] - cloud.points[j]).norm();
                    let after = (moved.points[i] - moved.points[j]).norm();
                    prop_assert!((before - after).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn inverse_is_involution_and_compose_associates(
            a in arb_transform(), b in arb_transform(), c in arb_transform()
        ) {
            let back = a.inverse().inverse();
            prop_assert!((back.rotation - a.rotation).amax() < 1e-9);
            prop_assert!((back.translation - a.translation).amax() < 1e-9);
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!((left.rotation - right.rotation).amax() < 1e-9);
            prop_assert!((left.translation - right.translation).amax() < 1e-9);
        }

        #[test]
        fn fitted_box_contains_every_point(pts in arb_cloud(), axis in any::<bool>()) {
            let cloud = PointCloud::table(pts);
            let mode = if axis { YawMode::AxisAligned } else { YawMode::PrincipalAxis };
            if let Ok(b) = box_from_cloud(&cloud, mode) {
                prop_assert!(b.contains_cloud(&cloud, CONTAINMENT_SLACK));
            }
        }
    }
}
