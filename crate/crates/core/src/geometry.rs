//! 3D points, rotations, rigid transforms and radius search.
//!
//! All geometry is carried in `f64`. Rotations are plain row-major 3×3
//! matrices; [`RigidTransform`] maps a point `p` to `R·p + t`.

use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// Tolerance used when validating rotation matrices loaded from outside.
pub const ROTATION_TOLERANCE: f64 = 1e-6;
/// Tolerance on quaternion norms accepted by [`UnitQuaternion::new`].
pub const QUATERNION_TOLERANCE: f64 = 1e-6;
/// `|cos(pitch)|` below this value is reported as gimbal lock.
pub const GIMBAL_LOCK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Points and free vectors share one representation.
pub type Point3 = Vec3;

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn distance_squared(self, o: Vec3) -> f64 {
        (self - o).norm_squared()
    }

    /// `self / |self|`, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0).then(|| self / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Default for Mat3 {
    fn default() -> Self {
        Mat3::IDENTITY
    }
}

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);

    pub fn from_rows(r0: Vec3, r1: Vec3, r2: Vec3) -> Self {
        Mat3([r0.to_array(), r1.to_array(), r2.to_array()])
    }

    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        Mat3::from_rows(c0, c1, c2).transpose()
    }

    /// `a·bᵀ`.
    pub fn outer(a: Vec3, b: Vec3) -> Self {
        let (a, b) = (a.to_array(), b.to_array());
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i] * b[j];
            }
        }
        Mat3(m)
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::from_array(self.0[i])
    }

    pub fn col(&self, j: usize) -> Vec3 {
        Vec3::new(self.0[0][j], self.0[1][j], self.0[2][j])
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([[m[0][0], m[1][0], m[2][0]], [m[0][1], m[1][1], m[2][1]], [m[0][2], m[1][2], m[2][2]]])
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }

    pub fn mul_mat(&self, o: &Mat3) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.0[i][0] * o.0[0][j] + self.0[i][1] * o.0[1][j] + self.0[i][2] * o.0[2][j];
            }
        }
        Mat3(m)
    }

    pub fn add(&self, o: &Mat3) -> Mat3 {
        let mut m = self.0;
        for (row, orow) in m.iter_mut().zip(o.0.iter()) {
            for (v, w) in row.iter_mut().zip(orow.iter()) {
                *v += w;
            }
        }
        Mat3(m)
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        let mut m = self.0;
        m.iter_mut().flatten().for_each(|v| *v *= s);
        Mat3(m)
    }

    pub fn determinant(&self) -> f64 {
        self.row(0).dot(self.row(1).cross(self.row(2)))
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖MᵀM − I‖_F`.
    pub fn orthonormality_error(&self) -> f64 {
        self.transpose().mul_mat(self).add(&Mat3::IDENTITY.scale(-1.0)).frobenius_norm()
    }

    pub fn is_rotation(&self, tol: f64) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
            && self.orthonormality_error() <= tol
            && (self.determinant() - 1.0).abs() <= tol
    }

    /// Rotation by `angle` radians about the x axis.
    pub fn rot_x(angle: f64) -> Mat3 {
        let (s, c) = angle.sin_cos();
        Mat3([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn rot_y(angle: f64) -> Mat3 {
        let (s, c) = angle.sin_cos();
        Mat3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn rot_z(angle: f64) -> Mat3 {
        let (s, c) = angle.sin_cos();
        Mat3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Rotation of `angle` radians about the unit vector `axis`.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Mat3 {
        let half = angle * 0.5;
        let s = half.sin();
        UnitQuaternion::new_normalize(half.cos(), axis.x * s, axis.y * s, axis.z * s).to_rotation()
    }
}

/// Euler angles in radians under the intrinsic X-Y-Z convention:
/// `R = Rx(ax) · Ry(ay) · Rz(az)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerXyz {
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    /// Set when the decomposition hit gimbal lock; `az` is then forced to 0.
    pub gimbal_lock: bool,
}

/// Name of the Euler convention, echoed into evaluation reports.
pub const EULER_CONVENTION: &str = "intrinsic-XYZ (R = Rx*Ry*Rz)";

pub fn euler_to_rotation(ax: f64, ay: f64, az: f64) -> Mat3 {
    Mat3::rot_x(ax).mul_mat(&Mat3::rot_y(ay)).mul_mat(&Mat3::rot_z(az))
}

pub fn rotation_to_euler(r: &Mat3) -> EulerXyz {
    let m = &r.0;
    let cos_ay = (m[0][0] * m[0][0] + m[0][1] * m[0][1]).sqrt();
    let ay = m[0][2].clamp(-1.0, 1.0).asin();
    if cos_ay < GIMBAL_LOCK_TOLERANCE {
        // With az = 0 the second row reduces to (sx·sy, cx, ·) and the third to (·, sx, ·).
        let ax = m[2][1].atan2(m[1][1]);
        return EulerXyz { ax, ay, az: 0.0, gimbal_lock: true };
    }
    EulerXyz {
        ax: (-m[1][2]).atan2(m[2][2]),
        ay: m[0][2].atan2(cos_ay),
        az: (-m[0][1]).atan2(m[0][0]),
        gimbal_lock: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Accepts components whose norm is within [`QUATERNION_TOLERANCE`] of one
    /// and renormalises them.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > QUATERNION_TOLERANCE {
            return Err(Error::NonUnitQuaternion { norm });
        }
        Ok(UnitQuaternion { w: w / norm, x: x / norm, y: y / norm, z: z / norm })
    }

    /// Normalises arbitrary non-zero components.
    pub fn new_normalize(w: f64, x: f64, y: f64, z: f64) -> Self {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        UnitQuaternion { w: w / norm, x: x / norm, y: y / norm, z: z / norm }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn negated(&self) -> Self {
        UnitQuaternion { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Rotation matrix of the quaternion. Only products of component pairs
    /// appear, so `q` and `-q` give bit-identical matrices.
    pub fn to_rotation(&self) -> Mat3 {
        let UnitQuaternion { w, x, y, z } = *self;
        Mat3([
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ])
    }
}

/// Checked conversion for raw components: fails with `NonUnitQuaternion` when
/// the norm is off by more than 1e-6, otherwise renormalises.
pub fn quat_to_rotation(w: f64, x: f64, y: f64, z: f64) -> Result<Mat3> {
    Ok(UnitQuaternion::new(w, x, y, z)?.to_rotation())
}

/// Rigid motion `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        RigidTransform::IDENTITY
    }
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform { rotation: Mat3::IDENTITY, translation: Vec3::ZERO };

    /// Validates the rotation block against [`ROTATION_TOLERANCE`].
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        if !rotation.is_rotation(ROTATION_TOLERANCE) {
            return Err(Error::NotRigid(alloc::format!(
                "orthonormality error {:.3e}, determinant {}",
                rotation.orthonormality_error(),
                rotation.determinant()
            )));
        }
        if !translation.is_finite() {
            return Err(Error::NotRigid("translation is not finite".into()));
        }
        Ok(RigidTransform { rotation, translation })
    }

    pub fn from_parts_unchecked(rotation: Mat3, translation: Vec3) -> Self {
        RigidTransform { rotation, translation }
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        self.rotation.mul_vec(p) + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation.mul_mat(&other.rotation),
            translation: self.rotation.mul_vec(other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform { rotation: rt, translation: -rt.mul_vec(self.translation) }
    }

    pub fn to_homogeneous(&self) -> [[f64; 4]; 4] {
        let r = &self.rotation.0;
        let t = self.translation;
        [
            [r[0][0], r[0][1], r[0][2], t.x],
            [r[1][0], r[1][1], r[1][2], t.y],
            [r[2][0], r[2][1], r[2][2], t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    /// Parses a 4×4 homogeneous matrix. The last row must be `0 0 0 1`
    /// within 1e-9 and the rotation block must be proper.
    pub fn from_homogeneous(m: &[[f64; 4]; 4]) -> Result<Self> {
        let last = [0.0, 0.0, 0.0, 1.0];
        if m[3].iter().zip(last).any(|(a, b)| !((a - b).abs() <= 1e-9)) {
            return Err(Error::NotRigid("last row is not 0 0 0 1".into()));
        }
        let rotation = Mat3([[m[0][0], m[0][1], m[0][2]], [m[1][0], m[1][1], m[1][2]], [m[2][0], m[2][1], m[2][2]]]);
        RigidTransform::new(rotation, Vec3::new(m[0][3], m[1][3], m[2][3]))
    }
}

/// `apply_transform`: maps every point of `cloud` through `t`, keeping order.
pub fn apply_transform(t: &RigidTransform, cloud: &PointCloud) -> PointCloud {
    PointCloud::new(cloud.points().iter().map(|&p| t.apply(p)).collect())
}

/// Uniform voxel grid answering exact radius queries.
///
/// Points are bucketed by integer cell; cells are stored sorted by key with
/// the ids of each cell contiguous and ascending, so a query only needs a
/// binary search per visited cell.
#[derive(Debug, Clone)]
pub struct VoxelIndex {
    cell: f64,
    keys: Vec<[i64; 3]>,
    starts: Vec<u32>,
    ids: Vec<u32>,
}

impl VoxelIndex {
    pub fn build(points: &[Point3], cell: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if !(cell > 0.0 && cell.is_finite()) {
            return Err(Error::NonPositiveRadius(cell));
        }
        let mut keyed: Vec<([i64; 3], u32)> =
            points.iter().enumerate().map(|(i, p)| (cell_of(*p, cell), i as u32)).collect();
        keyed.sort_unstable();
        let mut keys = Vec::new();
        let mut starts = Vec::new();
        let mut ids = Vec::with_capacity(keyed.len());
        for (k, id) in keyed {
            if keys.last() != Some(&k) {
                keys.push(k);
                starts.push(ids.len() as u32);
            }
            ids.push(id);
        }
        starts.push(ids.len() as u32);
        Ok(VoxelIndex { cell, keys, starts, ids })
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn bucket(&self, key: &[i64; 3]) -> &[u32] {
        match self.keys.binary_search(key) {
            Ok(i) => &self.ids[self.starts[i] as usize..self.starts[i + 1] as usize],
            Err(_) => &[],
        }
    }

    /// Ids within `r` of `centre` in ascending order.
    pub fn query(&self, points: &[Point3], centre: Point3, r: f64) -> Vec<usize> {
        let r2 = r * r;
        // One extra cell on each side absorbs rounding in the range bounds.
        let lo = cell_of(centre - Vec3::new(r, r, r), self.cell);
        let hi = cell_of(centre + Vec3::new(r, r, r), self.cell);
        let span: i128 = (0..3).map(|a| (hi[a] - lo[a] + 3) as i128).product();
        if span > self.keys.len() as i128 {
            return brute_force_radius(points, centre, r);
        }
        let mut out = Vec::new();
        for cx in lo[0] - 1..=hi[0] + 1 {
            for cy in lo[1] - 1..=hi[1] + 1 {
                for cz in lo[2] - 1..=hi[2] + 1 {
                    for &id in self.bucket(&[cx, cy, cz]) {
                        if points[id as usize].distance_squared(centre) <= r2 {
                            out.push(id as usize);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

fn cell_of(p: Point3, cell: f64) -> [i64; 3] {
    [(p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64]
}

fn brute_force_radius(points: &[Point3], centre: Point3, r: f64) -> Vec<usize> {
    let r2 = r * r;
    points.iter().enumerate().filter(|(_, p)| p.distance_squared(centre) <= r2).map(|(i, _)| i).collect()
}

/// Ordered list of points with an optional radius-search index.
#[derive(Debug, Clone, Default)]
pub struct PointCloud {
    points: Vec<Point3>,
    index: Option<VoxelIndex>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        PointCloud { points, index: None }
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index(&self) -> Option<&VoxelIndex> {
        self.index.as_ref()
    }

    /// Builds a voxel index whose cell size is the expected query radius.
    pub fn build_spatial_index(mut self, radius_hint: f64) -> Result<Self> {
        self.index = Some(VoxelIndex::build(&self.points, radius_hint)?);
        Ok(self)
    }

    pub fn with_index(self, radius_hint: f64) -> Result<Self> {
        self.build_spatial_index(radius_hint)
    }

    /// Ids of all points with `‖p − centre‖ ≤ r`, ascending. Uses the index
    /// when one was built and a linear scan otherwise.
    pub fn radius_neighbors(&self, centre: Point3, r: f64) -> Result<Vec<usize>> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::NonPositiveRadius(r));
        }
        Ok(match &self.index {
            Some(index) => index.query(&self.points, centre, r),
            None => brute_force_radius(&self.points, centre, r),
        })
    }

    /// Index of the closest point, first index on ties.
    pub fn nearest(&self, q: Point3) -> Option<(usize, f64)> {
        nearest_in(&self.points, q)
    }

    /// Nearest point no farther than `r`; ties go to the lowest index.
    pub fn nearest_within(&self, q: Point3, r: f64) -> Result<Option<(usize, f64)>> {
        let ids = self.radius_neighbors(q, r)?;
        let best = ids
            .into_iter()
            .map(|i| (i, self.points[i].distance_squared(q)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        Ok(best.map(|(i, d)| (i, d.sqrt())))
    }

    pub fn centroid(&self) -> Option<Point3> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(Vec3::ZERO, |acc, &p| acc + p);
        Some(sum / self.points.len() as f64)
    }
}

pub(crate) fn nearest_in(points: &[Point3], q: Point3) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        let d = p.distance_squared(q);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, d)| (i, d.sqrt()))
}
