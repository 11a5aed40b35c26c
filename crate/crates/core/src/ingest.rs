//! Depth-image back-projection.
//!
//! Depth rasters are row-major little-endian `f32` meters; label rasters
//! are row-major bytes where 0 is background and any other value names an
//! instance. A JSON sidecar carries the intrinsics, the camera pose and the
//! category of every label.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Frame, GeometryError, PointCloud, RigidTransform, Vec3};
use crate::graph::ObjectId;
use crate::scene::{ObjectInstance, SceneError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("no masked pixel has a valid depth")]
    EmptyMask,
    #[error("raster is {got} but the camera expects {expected}")]
    ShapeMismatch { expected: String, got: String },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid camera pose: {0}")]
    InvalidPose(#[from] GeometryError),
    #[error("raster file has {0} bytes, not a whole number of samples")]
    TruncatedRaster(usize),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), IngestError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(IngestError::InvalidIntrinsics(
                "focal lengths must be positive".into(),
            ));
        }
        if !(self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64)
        {
            return Err(IngestError::InvalidIntrinsics(
                "principal point outside the image".into(),
            ));
        }
        Ok(())
    }
}

/// A row-major raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Raster<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self, IngestError> {
        if data.len() != width * height {
            return Err(IngestError::ShapeMismatch {
                expected: format!("{width}x{height}"),
                got: format!("{} samples", data.len()),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn get(&self, u: usize, v: usize) -> T {
        self.data[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, value: T) {
        self.data[v * self.width + u] = value;
    }
}

pub type DepthImage = Raster<f32>;
pub type LabelImage = Raster<u8>;

pub fn depth_from_bytes(
    bytes: &[u8],
    width: usize,
    height: usize,
) -> Result<DepthImage, IngestError> {
    if !bytes.len().is_multiple_of(4) {
        return Err(IngestError::TruncatedRaster(bytes.len()));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Raster::new(width, height, data)
}

pub fn depth_to_bytes(depth: &DepthImage) -> Vec<u8> {
    depth.data.iter().flat_map(|d| d.to_le_bytes()).collect()
}

pub fn labels_from_bytes(
    bytes: &[u8],
    width: usize,
    height: usize,
) -> Result<LabelImage, IngestError> {
    Raster::new(width, height, bytes.to_vec())
}

fn check_shape<T>(r: &Raster<T>, k: &CameraIntrinsics) -> Result<(), IngestError> {
    if r.width != k.width || r.height != k.height {
        return Err(IngestError::ShapeMismatch {
            expected: format!("{}x{}", k.width, k.height),
            got: format!("{}x{}", r.width, r.height),
        });
    }
    Ok(())
}

/// Table-frame points for every pixel where `keep` holds and depth is
/// positive and finite.
fn project(
    depth: &DepthImage,
    k: &CameraIntrinsics,
    camera_pose: &RigidTransform,
    keep: impl Fn(usize, usize) -> bool,
) -> Vec<Vec3> {
    let mut points = Vec::new();
    for v in 0..depth.height {
        for u in 0..depth.width {
            let z = depth.get(u, v) as f64;
            if !(z > 0.0 && z.is_finite()) || !keep(u, v) {
                continue;
            }
            let cam = Vec3::new(
                (u as f64 - k.cx) * z / k.fx,
                (v as f64 - k.cy) * z / k.fy,
                z,
            );
            points.push(camera_pose.apply_point(&cam));
        }
    }
    points
}

/// Back-projects masked depth pixels through the pinhole model and maps
/// them into the table frame with `camera_pose`.
pub fn back_project(
    depth: &DepthImage,
    mask: &Raster<bool>,
    k: &CameraIntrinsics,
    camera_pose: &RigidTransform,
) -> Result<PointCloud, IngestError> {
    k.validate()?;
    check_shape(depth, k)?;
    check_shape(mask, k)?;
    let points = project(depth, k, camera_pose, |u, v| mask.get(u, v));
    if points.is_empty() {
        return Err(IngestError::EmptyMask);
    }
    Ok(PointCloud::new(points, Frame::Table))
}

/// Intrinsics, pose and label categories accompanying a depth raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSidecar {
    #[serde(flatten)]
    pub intrinsics: CameraIntrinsics,
    /// Camera-to-table pose.
    pub camera_pose: PoseDoc,
    /// Category of each nonzero label value.
    #[serde(default)]
    pub categories: BTreeMap<u8, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseDoc {
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl PoseDoc {
    pub fn from_transform(t: &RigidTransform) -> Self {
        Self {
            rotation: t.rotation_row_major(),
            translation: [t.translation().x, t.translation().y, t.translation().z],
        }
    }

    pub fn to_transform(&self) -> Result<RigidTransform, GeometryError> {
        RigidTransform::from_row_major(&self.rotation, &self.translation)
    }
}

/// One object per nonzero label with at least one valid depth pixel;
/// the label value becomes the object id.
pub fn ingest_labels(
    depth: &DepthImage,
    labels: &LabelImage,
    sidecar: &CameraSidecar,
) -> Result<Vec<ObjectInstance>, IngestError> {
    let k = &sidecar.intrinsics;
    k.validate()?;
    check_shape(depth, k)?;
    check_shape(labels, k)?;
    let pose = sidecar.camera_pose.to_transform()?;
    let mut ids: Vec<u8> = labels.data.iter().copied().filter(|&l| l != 0).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut objects = Vec::new();
    for label in ids {
        let points = project(depth, k, &pose, |u, v| labels.get(u, v) == label);
        if points.is_empty() {
            continue;
        }
        let category = sidecar
            .categories
            .get(&label)
            .cloned()
            .unwrap_or_else(|| "unknown".to_string());
        objects.push(ObjectInstance::from_cloud(
            label as ObjectId,
            category,
            PointCloud::new(points, Frame::Table),
        )?);
    }
    if objects.is_empty() {
        return Err(IngestError::EmptyMask);
    }
    Ok(objects)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rot_x, rot_z};
    use proptest::prelude::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics {
            fx: 100.0,
            fy: 120.0,
            cx: 8.0,
            cy: 6.0,
            width: 16,
            height: 12,
        }
    }

    #[test]
    fn principal_point_ray() {
        let mut depth = DepthImage::filled(16, 12, 0.0);
        depth.set(8, 6, 1.0);
        let mask = Raster::filled(16, 12, true);
        let c = back_project(&depth, &mask, &k(), &RigidTransform::identity()).unwrap();
        assert_eq!(c.points, vec![Vec3::new(0.0, 0.0, 1.0)]);
    }

    #[test]
    fn pinhole_offset() {
        let k = CameraIntrinsics {
            fx: 4.0,
            fy: 4.0,
            cx: 2.0,
            cy: 2.0,
            width: 8,
            height: 8,
        };
        let mut depth = DepthImage::filled(8, 8, 0.0);
        depth.set(6, 2, 2.0);
        let c = back_project(
            &depth,
            &Raster::filled(8, 8, true),
            &k,
            &RigidTransform::identity(),
        )
        .unwrap();
        assert_eq!(c.points, vec![Vec3::new(2.0, 0.0, 2.0)]);
    }

    #[test]
    fn zero_depth_is_empty() {
        let depth = DepthImage::filled(16, 12, 0.0);
        let mask = Raster::filled(16, 12, true);
        assert_eq!(
            back_project(&depth, &mask, &k(), &RigidTransform::identity()),
            Err(IngestError::EmptyMask)
        );
    }

    #[test]
    fn shape_mismatch() {
        let depth = DepthImage::filled(15, 12, 1.0);
        let mask = Raster::filled(16, 12, true);
        assert!(matches!(
            back_project(&depth, &mask, &k(), &RigidTransform::identity()),
            Err(IngestError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn point_count_matches_valid_masked_pixels() {
        let mut depth = DepthImage::filled(16, 12, 0.5);
        let mut mask = Raster::filled(16, 12, false);
        for u in 0..16 {
            mask.set(u, 3, true);
        }
        depth.set(2, 3, 0.0);
        depth.set(5, 3, f32::NAN);
        let c = back_project(&depth, &mask, &k(), &RigidTransform::identity()).unwrap();
        assert_eq!(c.len(), 14);
    }

    #[test]
    fn raster_bytes_round_trip() {
        let mut depth = DepthImage::filled(3, 2, 0.25);
        depth.set(1, 1, 1.5);
        let back = depth_from_bytes(&depth_to_bytes(&depth), 3, 2).unwrap();
        assert_eq!(back, depth);
        assert_eq!(
            depth_from_bytes(&[0; 7], 1, 1),
            Err(IngestError::TruncatedRaster(7))
        );
    }

    #[test]
    fn labels_become_objects() {
        let mut depth = DepthImage::filled(16, 12, 0.0);
        let mut labels = LabelImage::filled(16, 12, 0);
        for u in 2..6 {
            for v in 2..5 {
                depth.set(u, v, 1.0 + 0.01 * u as f32);
                labels.set(u, v, 3);
            }
        }
        for u in 9..12 {
            for v in 7..10 {
                depth.set(u, v, 1.2 + 0.02 * v as f32);
                labels.set(u, v, 7);
            }
        }
        let sidecar = CameraSidecar {
            intrinsics: k(),
            camera_pose: PoseDoc::from_transform(&RigidTransform::identity()),
            categories: BTreeMap::from([(3, "cup".to_string())]),
        };
        let objects = ingest_labels(&depth, &labels, &sidecar).unwrap();
        assert_eq!(objects.len(), 2);
        assert_eq!(
            (
                objects[0].id,
                objects[0].category.as_str(),
                objects[0].cloud.len()
            ),
            (3, "cup", 12)
        );
        assert_eq!(
            (
                objects[1].id,
                objects[1].category.as_str(),
                objects[1].cloud.len()
            ),
            (7, "unknown", 9)
        );
    }

    /// Projects table-frame points into a depth raster, one point per pixel.
    fn render(
        points: &[Vec3],
        k: &CameraIntrinsics,
        pose: &RigidTransform,
    ) -> (DepthImage, Raster<bool>) {
        let inv = pose.inverse();
        let mut depth = DepthImage::filled(k.width, k.height, 0.0);
        let mut mask = Raster::filled(k.width, k.height, false);
        for p in points {
            let c = inv.apply_point(p);
            let u = (k.fx * c.x / c.z + k.cx).round() as usize;
            let v = (k.fy * c.y / c.z + k.cy).round() as usize;
            depth.set(u, v, c.z as f32);
            mask.set(u, v, true);
        }
        (depth, mask)
    }

    proptest! {
        #[test]
        fn render_then_back_project(
            pixels in proptest::collection::btree_set((0usize..16, 0usize..12), 1..20),
            depths in proptest::collection::vec(0.5f32..2.0, 20),
            yaw in -3.0f64..3.0,
        ) {
            let k = k();
            let pose = RigidTransform::new(rot_z(yaw) * rot_x(2.5), Vec3::new(0.1, -0.2, 0.8)).unwrap();
            // points that land exactly on pixel centers at f32-representable depths
            let truth: Vec<Vec3> = pixels
                .iter()
                .zip(&depths)
                .map(|(&(u, v), &z)| {
                    let z = z as f64;
                    pose.apply_point(&Vec3::new((u as f64 - k.cx) * z / k.fx, (v as f64 - k.cy) * z / k.fy, z))
                })
                .collect();
            let (depth, mask) = render(&truth, &k, &pose);
            let cloud = back_project(&depth, &mask, &k, &pose).unwrap();
            prop_assert_eq!(cloud.len(), truth.len());
            for p in &truth {
                let best = cloud.points.iter().map(|q| (q - p).norm()).fold(f64::INFINITY, f64::min);
                prop_assert!(best < 1e-6);
            }
        }
    }
}
