//! Exact rigid-body math: unit quaternions, rotation matrices, homogeneous
//! composition and point-cloud transformation.
//!
//! Everything here is plain `f64` value math shared by the differentiable
//! network path and the classical (scanner / ICP / metrics) paths. The
//! quaternion convention is scalar-first `(w, x, y, z)`, right-handed, acting
//! on column vectors as `p' = R p + t`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    /// Raw quaternion too close to zero to normalize.
    #[error("degenerate quaternion: norm {norm:.3e} <= 1e-12")]
    DegenerateQuaternion { norm: f64 },
    /// Input matrix failed the orthonormality / determinant check.
    #[error("not a rotation matrix: {reason}")]
    NotARotation { reason: String },
    /// A point cloud violated its invariants (empty or non-finite).
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),
    /// Pose string did not contain 7 parseable numbers.
    #[error("malformed pose string: {0}")]
    MalformedPose(String),
}

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];
pub type Mat4 = [[f64; 4]; 4];

/// A rotation as a unit quaternion, scalar-first.
///
/// `q` and `-q` denote the same rotation; nothing in this module ever
/// compares quaternions without accounting for the sign ambiguity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitQuaternion {
    pub fn identity() -> Self {
        Self { w: 1.0, x: 0.0, y: 0.0, z: 0.0 }
    }

    /// Normalize a raw 4-vector into a unit quaternion.
    pub fn from_raw(raw: [f64; 4]) -> Result<Self, GeometryError> {
        let norm = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2] + raw[3] * raw[3]).sqrt();
        if !(norm > 1e-12) {
            return Err(GeometryError::DegenerateQuaternion { norm });
        }
        Ok(Self {
            w: raw[0] / norm,
            x: raw[1] / norm,
            y: raw[2] / norm,
            z: raw[3] / norm,
        })
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n < 1e-15 {
            return Self::identity();
        }
        let half = 0.5 * angle;
        let s = half.sin() / n;
        Self { w: half.cos(), x: axis[0] * s, y: axis[1] * s, z: axis[2] * s }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn conjugate(&self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// Rotation matrix of the quaternion. `R(q) == R(-q)`.
    pub fn to_rotmat(&self) -> Mat3 {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }
}

/// Largest-diagonal-element branch of the standard matrix-to-quaternion
/// conversion; numerically stable for rotations near pi.
pub fn quat_from_rotmat(r: &Mat3) -> UnitQuaternion {
    let trace = r[0][0] + r[1][1] + r[2][2];
    let (w, x, y, z);
    if trace > r[0][0] && trace > r[1][1] && trace > r[2][2] {
        let s = (trace + 1.0).max(0.0).sqrt() * 2.0;
        w = 0.25 * s;
        x = (r[2][1] - r[1][2]) / s;
        y = (r[0][2] - r[2][0]) / s;
        z = (r[1][0] - r[0][1]) / s;
    } else if r[0][0] >= r[1][1] && r[0][0] >= r[2][2] {
        let s = (1.0 + r[0][0] - r[1][1] - r[2][2]).max(0.0).sqrt() * 2.0;
        w = (r[2][1] - r[1][2]) / s;
        x = 0.25 * s;
        y = (r[0][1] + r[1][0]) / s;
        z = (r[0][2] + r[2][0]) / s;
    } else if r[1][1] >= r[2][2] {
        let s = (1.0 + r[1][1] - r[0][0] - r[2][2]).max(0.0).sqrt() * 2.0;
        w = (r[0][2] - r[2][0]) / s;
        x = (r[0][1] + r[1][0]) / s;
        y = 0.25 * s;
        z = (r[1][2] + r[2][1]) / s;
    } else {
        let s = (1.0 + r[2][2] - r[0][0] - r[1][1]).max(0.0).sqrt() * 2.0;
        w = (r[1][0] - r[0][1]) / s;
        x = (r[0][2] + r[2][0]) / s;
        y = (r[1][2] + r[2][1]) / s;
        z = 0.25 * s;
    }
    // Renormalize to absorb rounding in the square roots above.
    UnitQuaternion::from_raw([w, x, y, z]).expect("matrix-to-quaternion produced zero quaternion")
}

/// Rigid transform `p' = R p + t` with a cached homogeneous matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    q: UnitQuaternion,
    t: Vec3,
    matrix: Mat4,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self::new(UnitQuaternion::identity(), [0.0; 3])
    }

    pub fn new(q: UnitQuaternion, t: Vec3) -> Self {
        let r = q.to_rotmat();
        let matrix = [
            [r[0][0], r[0][1], r[0][2], t[0]],
            [r[1][0], r[1][1], r[1][2], t[1]],
            [r[2][0], r[2][1], r[2][2], t[2]],
            [0.0, 0.0, 0.0, 1.0],
        ];
        Self { q, t, matrix }
    }

    pub fn from_raw_parts(raw_quat: [f64; 4], t: Vec3) -> Result<Self, GeometryError> {
        Ok(Self::new(UnitQuaternion::from_raw(raw_quat)?, t))
    }

    /// Build from an arbitrary rotation matrix (re-extracting the quaternion)
    /// and a translation.
    pub fn from_rotmat(r: &Mat3, t: Vec3) -> Self {
        Self::new(quat_from_rotmat(r), t)
    }

    pub fn quaternion(&self) -> UnitQuaternion {
        self.q
    }

    pub fn translation(&self) -> Vec3 {
        self.t
    }

    pub fn rotation(&self) -> Mat3 {
        let m = &self.matrix;
        [
            [m[0][0], m[0][1], m[0][2]],
            [m[1][0], m[1][1], m[1][2]],
            [m[2][0], m[2][1], m[2][2]],
        ]
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.matrix
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        let m = &self.matrix;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2] + m[0][3],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2] + m[1][3],
            m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2] + m[2][3],
        ]
    }

    /// Serialize as "qw qx qy qz tx ty tz" (7 whitespace-separated decimals).
    pub fn to_pose_string(&self) -> String {
        format!(
            "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
            self.q.w, self.q.x, self.q.y, self.q.z, self.t[0], self.t[1], self.t[2]
        )
    }

    pub fn from_pose_string(s: &str) -> Result<Self, GeometryError> {
        let vals: Vec<f64> = s
            .split_whitespace()
            .map(|tok| tok.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| GeometryError::MalformedPose(format!("{s:?}: {e}")))?;
        if vals.len() != 7 {
            return Err(GeometryError::MalformedPose(format!(
                "expected 7 numbers, got {}",
                vals.len()
            )));
        }
        Self::from_raw_parts([vals[0], vals[1], vals[2], vals[3]], [vals[4], vals[5], vals[6]])
    }
}

/// Unconstrained 3x3 linear map (the affine-transformer output). No
/// invariants beyond finiteness; may shear, scale or collapse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    pub a: Mat3,
}

impl AffineTransform {
    pub fn identity() -> Self {
        Self { a: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] }
    }

    /// Row-major reshape of 9 numbers into the matrix.
    pub fn from_row_major(v: [f64; 9]) -> Self {
        Self { a: [[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]] }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        let a = &self.a;
        [
            a[0][0] * p[0] + a[0][1] * p[1] + a[0][2] * p[2],
            a[1][0] * p[0] + a[1][1] * p[1] + a[1][2] * p[2],
            a[2][0] * p[0] + a[2][1] * p[1] + a[2][2] * p[2],
        ]
    }
}

/// Coordinate frame tag carried by a point cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Sensor,
    Canonical,
    Intermediate(u32),
}

impl std::fmt::Display for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Frame::Sensor => write!(f, "sensor"),
            Frame::Canonical => write!(f, "canonical"),
            Frame::Intermediate(i) => write!(f, "intermediate-{i}"),
        }
    }
}

/// Ordered list of 3D points in a named coordinate frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub frame: Frame,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, frame: Frame) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::InvalidCloud("empty point set".into()));
        }
        if let Some(p) = points.iter().find(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::InvalidCloud(format!("non-finite point {p:?}")));
        }
        Ok(Self { points, frame })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vec3 {
        let mut c = [0.0; 3];
        for p in &self.points {
            c[0] += p[0];
            c[1] += p[1];
            c[2] += p[2];
        }
        let n = self.points.len() as f64;
        [c[0] / n, c[1] / n, c[2] / n]
    }

    pub fn in_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }
}

pub fn quat_normalize(raw: [f64; 4]) -> Result<UnitQuaternion, GeometryError> {
    UnitQuaternion::from_raw(raw)
}

pub fn quat_to_rotmat(q: &UnitQuaternion) -> Mat3 {
    q.to_rotmat()
}

pub fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[i][k];
            for j in 0..4 {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

pub fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for k in 0..3 {
            let aik = a[i][k];
            for j in 0..3 {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

pub fn mat3_transpose(a: &Mat3) -> Mat3 {
    [
        [a[0][0], a[1][0], a[2][0]],
        [a[0][1], a[1][1], a[2][1]],
        [a[0][2], a[1][2], a[2][2]],
    ]
}

pub fn mat3_det(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Compose two rigid transforms as a 4x4 matrix product, then re-extract and
/// re-normalize the quaternion so repeated composition cannot drift off the
/// rotation manifold.
pub fn rigid_compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    let m = mat4_mul(a.matrix(), b.matrix());
    let r = [
        [m[0][0], m[0][1], m[0][2]],
        [m[1][0], m[1][1], m[1][2]],
        [m[2][0], m[2][1], m[2][2]],
    ];
    RigidTransform::from_rotmat(&r, [m[0][3], m[1][3], m[2][3]])
}

pub fn rigid_inverse(t: &RigidTransform) -> RigidTransform {
    let r = t.rotation();
    let rt = mat3_transpose(&r);
    let tr = t.translation();
    let ti = [
        -(rt[0][0] * tr[0] + rt[0][1] * tr[1] + rt[0][2] * tr[2]),
        -(rt[1][0] * tr[0] + rt[1][1] * tr[1] + rt[1][2] * tr[2]),
        -(rt[2][0] * tr[0] + rt[2][1] * tr[1] + rt[2][2] * tr[2]),
    ];
    RigidTransform::new(t.quaternion().conjugate(), ti)
}

/// Transform every point of a cloud, preserving order and count.
pub fn transform_points(t: &RigidTransform, cloud: &PointCloud) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|&p| t.apply(p)).collect(),
        frame: cloud.frame,
    }
}

/// Affine counterpart of [`transform_points`] (translation fixed at zero).
pub fn transform_points_affine(a: &AffineTransform, cloud: &PointCloud) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|&p| a.apply(p)).collect(),
        frame: cloud.frame,
    }
}

/// Axis-angle extraction with the angle in `[0, pi]`.
///
/// The angle always comes from `arccos((trace - 1) / 2)` with the argument
/// clamped to `[-1, 1]`. The axis uses the skew-symmetric part away from pi
/// and falls back to the quaternion conversion branch near pi; below 1e-7
/// radians the axis is arbitrary-but-unit.
pub fn rotation_to_axis_angle(r: &Mat3) -> Result<(Vec3, f64), GeometryError> {
    check_rotation(r, 1e-6)?;
    let trace = r[0][0] + r[1][1] + r[2][2];
    let angle = ((trace - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
    if angle < 1e-7 {
        return Ok(([1.0, 0.0, 0.0], angle));
    }
    let axis = if angle > std::f64::consts::PI - 1e-3 {
        let q = quat_from_rotmat(r);
        let n = (q.x * q.x + q.y * q.y + q.z * q.z).sqrt();
        [q.x / n, q.y / n, q.z / n]
    } else {
        let s = 2.0 * angle.sin();
        [
            (r[2][1] - r[1][2]) / s,
            (r[0][2] - r[2][0]) / s,
            (r[1][0] - r[0][1]) / s,
        ]
    };
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    Ok(([axis[0] / n, axis[1] / n, axis[2] / n], angle))
}

/// Check orthonormality (`R R^T = I`) and `det(R) = 1` within `tol`.
pub fn check_rotation(r: &Mat3, tol: f64) -> Result<(), GeometryError> {
    let rt = mat3_transpose(r);
    let rrt = mat3_mul(r, &rt);
    let mut dev: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((rrt[i][j] - target).abs());
        }
    }
    if dev > tol {
        return Err(GeometryError::NotARotation {
            reason: format!("R R^T deviates from I by {dev:.3e}"),
        });
    }
    let det = mat3_det(r);
    if (det - 1.0).abs() > 100.0 * tol {
        return Err(GeometryError::NotARotation {
            reason: format!("det(R) = {det:.6} != 1"),
        });
    }
    Ok(())
}
