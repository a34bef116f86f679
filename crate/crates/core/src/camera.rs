//! Pinhole camera, rigid poses and the small vector/matrix types they need.
//!
//! The camera frame is x-right, y-down, z-forward; depth is the camera-frame
//! z coordinate in meters. Poses are camera-to-world rigid transforms.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// 3D point or vector (meters; camera or world frame per context).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3<S> {
    pub x: S,
    pub y: S,
    pub z: S,
}

impl<S: Real> Point3<S> {
    pub fn new(x: S, y: S, z: S) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero(), S::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn scale(&self, s: S) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn dot(&self, o: &Self) -> S {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(&self) -> S {
        self.dot(self).sqrt()
    }

    pub fn distance(&self, o: &Self) -> S {
        self.sub(o).norm()
    }

    /// Unit-length copy, or `None` for a (near-)zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n <= S::zero() || !n.is_finite() {
            None
        } else {
            Some(self.scale(S::one() / n))
        }
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3<S> {
    pub rows: [[S; 3]; 3],
}

impl<S: Real> Mat3<S> {
    pub fn new(rows: [[S; 3]; 3]) -> Self {
        Self { rows }
    }

    pub fn identity() -> Self {
        let (o, z) = (S::one(), S::zero());
        Self::new([[o, z, z], [z, o, z], [z, z, o]])
    }

    pub fn mul_vec(&self, v: &Point3<S>) -> Point3<S> {
        let r = &self.rows;
        Point3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut out = [[S::zero(); 3]; 3];
        for (row, a_row) in out.iter_mut().zip(&self.rows) {
            for (j, cell) in row.iter_mut().enumerate() {
                let mut acc = S::zero();
                for (a, o_row) in a_row.iter().zip(&o.rows) {
                    acc = acc + *a * o_row[j];
                }
                *cell = acc;
            }
        }
        Self::new(out)
    }

    pub fn transpose(&self) -> Self {
        let r = &self.rows;
        Self::new([
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        ])
    }

    pub fn det(&self) -> S {
        let r = &self.rows;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }

    /// Inverse via the adjugate; `None` when the determinant is ~0.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.abs() < S::epsilon() {
            return None;
        }
        let r = &self.rows;
        let inv_d = S::one() / d;
        let cof = |a: S, b: S, c: S, e: S| (a * e - b * c) * inv_d;
        Some(Self::new([
            [
                cof(r[1][1], r[1][2], r[2][1], r[2][2]),
                cof(r[0][2], r[0][1], r[2][2], r[2][1]),
                cof(r[0][1], r[0][2], r[1][1], r[1][2]),
            ],
            [
                cof(r[1][2], r[1][0], r[2][2], r[2][0]),
                cof(r[0][0], r[0][2], r[2][0], r[2][2]),
                cof(r[0][2], r[0][0], r[1][2], r[1][0]),
            ],
            [
                cof(r[1][0], r[1][1], r[2][0], r[2][1]),
                cof(r[0][1], r[0][0], r[2][1], r[2][0]),
                cof(r[0][0], r[0][1], r[1][0], r[1][1]),
            ],
        ]))
    }

    /// Max absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> S {
        let mut m = S::zero();
        for i in 0..3 {
            for j in 0..3 {
                m = m.max((self.rows[i][j] - other.rows[i][j]).abs());
            }
        }
        m
    }

    /// Deviation from orthonormality: max entry of `RᵀR - I`.
    pub fn orthonormality_error(&self) -> S {
        self.transpose().mul_mat(self).max_abs_diff(&Self::identity())
    }
}

/// Projects a matrix onto the nearest rotation (Higham's polar iteration:
/// `X ← (X + X⁻ᵀ)/2`). Returns `None` if the input is singular or has a
/// negative determinant (a reflection, which no rotation approximates).
pub fn nearest_rotation<S: Real>(m: &Mat3<S>) -> Option<Mat3<S>> {
    if m.det() <= S::zero() {
        return None;
    }
    let half = S::of(0.5);
    let tol = S::epsilon() * S::of(16.0);
    let mut x = *m;
    for _ in 0..30 {
        let inv_t = x.inverse()?.transpose();
        let mut next = [[S::zero(); 3]; 3];
        for (row, (xr, ir)) in next.iter_mut().zip(x.rows.iter().zip(&inv_t.rows)) {
            for (cell, (a, b)) in row.iter_mut().zip(xr.iter().zip(ir)) {
                *cell = (*a + *b) * half;
            }
        }
        let next = Mat3::new(next);
        if next.max_abs_diff(&x) < tol {
            return Some(next);
        }
        x = next;
    }
    Some(x)
}

/// Pinhole intrinsics: focal lengths and principal point in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics<S> {
    pub fx: S,
    pub fy: S,
    pub cx: S,
    pub cy: S,
}

impl<S: Real> CameraIntrinsics<S> {
    pub fn new(fx: S, fy: S, cx: S, cy: S) -> Result<Self> {
        let bad_focal = |f: S| f <= S::zero() || !f.is_finite();
        if bad_focal(fx) || bad_focal(fy) {
            return Err(Error::InvalidInput(format!(
                "focal lengths must be positive and finite, got fx={fx} fy={fy}"
            )));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidInput(
                "principal point must be finite".into(),
            ));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// Lifts pixel `(u, v)` at the given depth into the camera frame:
    /// `((u-cx)·d/fx, (v-cy)·d/fy, d)`.
    pub fn back_project(&self, u: S, v: S, depth: S) -> Result<Point3<S>> {
        if depth <= S::zero() || !depth.is_finite() {
            return Err(Error::InvalidInput(format!(
                "depth must be positive and finite, got {depth}"
            )));
        }
        Ok(Point3::new(
            (u - self.cx) * depth / self.fx,
            (v - self.cy) * depth / self.fy,
            depth,
        ))
    }

    /// Projects a camera-frame point to `(u, v, depth)`; fails for z ≤ 0.
    pub fn project(&self, p: &Point3<S>) -> Result<(S, S, S)> {
        if p.z <= S::zero() || p.z.is_nan() {
            return Err(Error::BehindCamera { z: p.z.as_f64() });
        }
        Ok((
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
            p.z,
        ))
    }

    /// Unit-depth ray direction through pixel `(u, v)`: z component is 1.
    pub fn ray_direction(&self, u: S, v: S) -> Point3<S> {
        Point3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, S::one())
    }
}

/// Camera-to-world rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose<S> {
    rotation: Mat3<S>,
    translation: Point3<S>,
}

impl<S: Real> CameraPose<S> {
    /// Validates that `rotation` is orthonormal with determinant +1.
    pub fn new(rotation: Mat3<S>, translation: Point3<S>) -> Result<Self> {
        // 1e-9 is the contract tolerance at f64; widen for coarser scalars.
        let tol = S::of(1e-9).max(S::epsilon() * S::of(32.0));
        let ortho = rotation.orthonormality_error();
        if ortho > tol {
            return Err(Error::InvalidInput(format!(
                "rotation is not orthonormal (max deviation {ortho})"
            )));
        }
        let det_err = (rotation.det() - S::one()).abs();
        if det_err > tol {
            return Err(Error::InvalidInput(format!(
                "rotation determinant is not +1 (deviation {det_err})"
            )));
        }
        if !translation.is_finite() {
            return Err(Error::InvalidInput("translation must be finite".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Point3::zero(),
        }
    }

    pub fn rotation(&self) -> &Mat3<S> {
        &self.rotation
    }

    pub fn translation(&self) -> &Point3<S> {
        &self.translation
    }

    /// Maps a camera-frame point into the world frame: `R·p + t`.
    pub fn transform_to_world(&self, p: &Point3<S>) -> Point3<S> {
        self.rotation.mul_vec(p).add(&self.translation)
    }

    /// World-to-camera transform of the same rigid motion.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        let t = rt.mul_vec(&self.translation).scale(-S::one());
        Self {
            rotation: rt,
            translation: t,
        }
    }
}
