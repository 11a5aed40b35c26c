//! Multi-start ICP.
//!
//! Both clouds are centered on their centroids, ICP is started from every
//! rotation of an `n × n × n` Euler grid with zero translation, and the
//! start with the lowest mean squared nearest-neighbour distance wins.

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::{Matrix3, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{rot_x, rot_y, rot_z, PointCloud, RigidTransform, Vec3};

/// Residual below which two clouds are considered coincident.
const EXACT_FIT: f64 = 1e-24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistrationError {
    #[error("registration needs non-empty source and target clouds")]
    EmptyCloud,
    #[error("invalid ICP configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpConfig {
    /// Euler-grid segments per axis; `n³` starts.
    pub n: usize,
    pub max_iters: usize,
    /// Stop when the relative change of the residual falls below this.
    pub tol: f64,
    /// Fraction of closest correspondences kept each iteration.
    pub trim_fraction: f64,
    /// Correspondences farther than this are ignored; `None` is unlimited.
    pub max_correspondence_distance: Option<f64>,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            n: 5,
            max_iters: 50,
            tol: 1e-6,
            trim_fraction: 0.9,
            max_correspondence_distance: None,
        }
    }
}

impl IcpConfig {
    pub fn validate(&self) -> Result<(), RegistrationError> {
        let bad = |msg: &str| Err(RegistrationError::InvalidConfig(msg.to_string()));
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad("tol must be positive");
        }
        if !(self.trim_fraction > 0.0 && self.trim_fraction <= 1.0) {
            return bad("trim_fraction must lie in (0, 1]");
        }
        if let Some(d) = self.max_correspondence_distance {
            if d.is_nan() || d <= 0.0 {
                return bad("max_correspondence_distance must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationResult {
    /// Maps the source cloud onto the target.
    pub transform: RigidTransform,
    /// Mean squared nearest-neighbour distance over all source points, m².
    pub residual: f64,
    pub iterations: usize,
    pub candidate_index: usize,
}

/// Euler-grid start rotations. Angles are segment midpoints of `[-π, π)`,
/// composed as `Rz·Ry·Rx`, enumerated with the x angle varying fastest.
pub fn candidate_rotations(n: usize) -> Vec<Matrix3<f64>> {
    let step = 2.0 * std::f64::consts::PI / n as f64;
    let angle = |k: usize| -std::f64::consts::PI + (k as f64 + 0.5) * step;
    let mut out = Vec::with_capacity(n * n * n);
    for kz in 0..n {
        for ky in 0..n {
            for kx in 0..n {
                out.push(rot_z(angle(kz)) * rot_y(angle(ky)) * rot_x(angle(kx)));
            }
        }
    }
    out
}

/// Static nearest-neighbour index over a target cloud.
pub struct TargetIndex {
    points: Vec<Vec3>,
    tree: ImmutableKdTree<f64, 3>,
}

impl TargetIndex {
    pub fn new(points: Vec<Vec3>) -> Result<Self, RegistrationError> {
        if points.is_empty() {
            return Err(RegistrationError::EmptyCloud);
        }
        let raw: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let tree = ImmutableKdTree::new_from_slice(&raw).map_err(|e| {
            RegistrationError::InvalidConfig(format!("kd-tree construction failed: {e:?}"))
        })?;
        Ok(Self { points, tree })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Index and squared distance of the closest target point.
    pub fn nearest(&self, p: &Vec3) -> (usize, f64) {
        let hit = self
            .tree
            .query(&[p.x, p.y, p.z])
            .nearest_one::<SquaredEuclidean<f64>>()
            .execute();
        let idx = hit.item as usize;
        (idx, (p - self.points[idx]).norm_squared())
    }

    /// Mean squared nearest-neighbour distance of the transformed source.
    pub fn mean_squared_residual(&self, source: &[Vec3], t: &RigidTransform) -> f64 {
        let sum: f64 = source
            .iter()
            .map(|p| self.nearest(&t.apply_point(p)).1)
            .sum();
        sum / source.len() as f64
    }
}

/// Least-squares rigid motion taking `src[k]` onto `dst[k]`, with the
/// determinant correction that keeps the rotation proper.
pub fn kabsch(src: &[Vec3], dst: &[Vec3]) -> RigidTransform {
    let n = src.len().min(dst.len()).max(1) as f64;
    let cs = src.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let cd = dst.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let mut h = Matrix3::zeros();
    for (p, q) in src.iter().zip(dst) {
        h += (p - cs) * (q - cd).transpose();
    }
    let svd = SVD::new(h, true, true);
    let u = svd.u.expect("svd u requested");
    let v = svd.v_t.expect("svd v_t requested").transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * u.transpose();
    RigidTransform::from_parts(r, cd - r * cs)
}

struct Workspace {
    matches: Vec<(f64, usize, usize)>,
    src: Vec<Vec3>,
    dst: Vec<Vec3>,
}

fn refine(
    index: &TargetIndex,
    source: &[Vec3],
    start: RigidTransform,
    cfg: &IcpConfig,
    mut history: Option<&mut Vec<f64>>,
) -> RegistrationResult {
    let n = source.len();
    let keep = ((cfg.trim_fraction * n as f64).ceil() as usize).clamp(3.min(n), n);
    let max_d2 = cfg.max_correspondence_distance.map(|d| d * d);
    let mut ws = Workspace {
        matches: Vec::with_capacity(n),
        src: Vec::with_capacity(keep),
        dst: Vec::with_capacity(keep),
    };

    let mut current = start;
    let mut best = (f64::INFINITY, start, 0usize);
    let mut previous: Option<f64> = None;
    let mut iterations = 0;
    loop {
        ws.matches.clear();
        let mut sum = 0.0;
        for (k, p) in source.iter().enumerate() {
            let (j, d2) = index.nearest(&current.apply_point(p));
            sum += d2;
            ws.matches.push((d2, k, j));
        }
        let residual = sum / n as f64;
        if let Some(h) = history.as_deref_mut() {
            h.push(residual);
        }
        if residual < best.0 {
            best = (residual, current, iterations);
        }
        let converged = residual <= EXACT_FIT
            || previous.is_some_and(|prev| (prev - residual).abs() <= cfg.tol * prev);
        if converged || iterations >= cfg.max_iters {
            break;
        }

        if keep < n {
            ws.matches
                .select_nth_unstable_by(keep - 1, |a, b| a.0.total_cmp(&b.0));
        }
        ws.src.clear();
        ws.dst.clear();
        for &(d2, k, j) in &ws.matches[..keep] {
            if max_d2.is_some_and(|m| d2 > m) {
                continue;
            }
            ws.src.push(source[k]);
            ws.dst.push(index.points[j]);
        }
        if ws.src.len() < 3.min(n) {
            break;
        }
        current = kabsch(&ws.src, &ws.dst);
        iterations += 1;
        previous = Some(residual);
    }
    RegistrationResult {
        transform: best.1,
        residual: best.0,
        iterations,
        candidate_index: 0,
    }
}

fn check_inputs(
    source: &PointCloud,
    target: &PointCloud,
    cfg: &IcpConfig,
) -> Result<(), RegistrationError> {
    if source.is_empty() || target.is_empty() {
        return Err(RegistrationError::EmptyCloud);
    }
    cfg.validate()
}

/// Single ICP run from `(rotation0, translation0)`.
pub fn icp_refine(
    source: &PointCloud,
    target: &PointCloud,
    rotation0: &Matrix3<f64>,
    translation0: &Vec3,
    cfg: &IcpConfig,
) -> Result<RegistrationResult, RegistrationError> {
    icp_refine_traced(source, target, rotation0, translation0, cfg).map(|(r, _)| r)
}

/// Like [`icp_refine`], also returning the residual after every update.
pub fn icp_refine_traced(
    source: &PointCloud,
    target: &PointCloud,
    rotation0: &Matrix3<f64>,
    translation0: &Vec3,
    cfg: &IcpConfig,
) -> Result<(RegistrationResult, Vec<f64>), RegistrationError> {
    check_inputs(source, target, cfg)?;
    let start = RigidTransform::new(*rotation0, *translation0)
        .map_err(|e| RegistrationError::InvalidConfig(e.to_string()))?;
    let index = TargetIndex::new(target.points.clone())?;
    let mut history = Vec::new();
    let result = refine(&index, &source.points, start, cfg, Some(&mut history));
    Ok((result, history))
}

/// Every single-start result, in candidate order, in the centered frames.
pub fn multistart_candidates(
    source: &PointCloud,
    target: &PointCloud,
    cfg: &IcpConfig,
) -> Result<Vec<RegistrationResult>, RegistrationError> {
    check_inputs(source, target, cfg)?;
    let cs = source.centroid().expect("non-empty");
    let ct = target.centroid().expect("non-empty");
    let src: Vec<Vec3> = source.points.iter().map(|p| p - cs).collect();
    let index = TargetIndex::new(target.points.iter().map(|p| p - ct).collect())?;
    let starts = candidate_rotations(cfg.n);
    let results = starts
        .par_iter()
        .enumerate()
        .map(|(k, r)| {
            let mut res = refine(
                &index,
                &src,
                RigidTransform::from_parts(*r, Vec3::zeros()),
                cfg,
                None,
            );
            res.candidate_index = k;
            // undo the centering: x ↦ R(x − cs) + t + ct
            let rot = *res.transform.rotation();
            let t = res.transform.translation() + ct - rot * cs;
            res.transform = RigidTransform::from_parts(rot, t);
            res
        })
        .collect();
    Ok(results)
}

/// Best ICP result over the full grid of starts; ties go to the lowest
/// candidate index.
pub fn multistart_register(
    source: &PointCloud,
    target: &PointCloud,
    cfg: &IcpConfig,
) -> Result<RegistrationResult, RegistrationError> {
    let results = multistart_candidates(source, target, cfg)?;
    Ok(results
        .into_iter()
        .reduce(|best, r| if r.residual < best.residual { r } else { best })
        .expect("at least one candidate"))
}
