use nalgebra::{Matrix3, Point2, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use super::layout::{KEYBOARD_HEIGHT, KEYBOARD_WIDTH};
use super::GeometryError;

/// A point in normalized keyboard space: x in [0, 1024), y in [0, 125) on the keybed,
/// with y = 0 at the far (fallboard) edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyboardPoint {
    pub x: f64,
    pub y: f64,
}

impl KeyboardPoint {
    pub fn new(x: f64, y: f64) -> Self {
        KeyboardPoint { x, y }
    }

    pub fn on_keyboard(&self) -> bool {
        (0.0..KEYBOARD_WIDTH).contains(&self.x) && (0.0..KEYBOARD_HEIGHT).contains(&self.y)
    }
}

/// Projective map from undistorted pixels to keyboard space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    matrix: Matrix3<f64>,
}

/// Target rectangle corners in TL, TR, BR, BL order.
pub const TARGET_CORNERS: [(f64, f64); 4] =
    [(0.0, 0.0), (KEYBOARD_WIDTH, 0.0), (KEYBOARD_WIDTH, KEYBOARD_HEIGHT), (0.0, KEYBOARD_HEIGHT)];

impl Homography {
    pub fn from_matrix(matrix: Matrix3<f64>) -> Result<Self, GeometryError> {
        if !matrix.iter().all(|v| v.is_finite()) || matrix.determinant().abs() <= 1e-12 {
            return Err(GeometryError::SingularHomography);
        }
        let scale = matrix[(2, 2)];
        let matrix = if scale.abs() > 1e-300 { matrix / scale } else { matrix };
        Ok(Homography { matrix })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    /// Solves the 8-unknown linear system mapping four source points onto four
    /// destination points, with h33 fixed to 1.
    pub fn from_correspondences(src: &[Point2<f64>; 4], dst: &[Point2<f64>; 4]) -> Result<Self, GeometryError> {
        let mut a = SMatrix::<f64, 8, 8>::zeros();
        let mut b = SVector::<f64, 8>::zeros();
        for i in 0..4 {
            let (x, y) = (src[i].x, src[i].y);
            let (u, v) = (dst[i].x, dst[i].y);
            let r = 2 * i;
            a.row_mut(r).copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]);
            a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]);
            b[r] = u;
            b[r + 1] = v;
        }
        let h = a.lu().solve(&b).ok_or(GeometryError::DegenerateQuadrilateral)?;
        let m = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0);
        Homography::from_matrix(m)
    }

    pub fn apply(&self, pt: Point2<f64>) -> Result<KeyboardPoint, GeometryError> {
        let p = self.matrix * Vector3::new(pt.x, pt.y, 1.0);
        if p.z.abs() < 1e-12 {
            return Err(GeometryError::PointAtInfinity { x: pt.x, y: pt.y });
        }
        Ok(KeyboardPoint { x: p.x / p.z, y: p.y / p.z })
    }

    pub fn inverse(&self) -> Homography {
        // Invertibility is checked at construction.
        let inv = self.matrix.try_inverse().expect("homography is invertible");
        Homography { matrix: inv / inv[(2, 2)] }
    }

    /// Applies the inverse map: keyboard space -> undistorted pixel.
    pub fn apply_inverse(&self, kp: KeyboardPoint) -> Result<Point2<f64>, GeometryError> {
        let p = self.inverse().apply(Point2::new(kp.x, kp.y))?;
        Ok(Point2::new(p.x, p.y))
    }
}

/// Checks that four points in cyclic order form a strictly convex quadrilateral.
pub fn check_convex(corners: &[Point2<f64>; 4]) -> Result<(), GeometryError> {
    let scale = corners
        .iter()
        .flat_map(|c| [c.x.abs(), c.y.abs()])
        .fold(1.0_f64, f64::max);
    let eps = 1e-9 * scale * scale;
    let mut sign = 0.0;
    for i in 0..4 {
        let a = corners[i];
        let b = corners[(i + 1) % 4];
        let c = corners[(i + 2) % 4];
        let cross = (b - a).perp(&(c - b));
        if !cross.is_finite() || cross.abs() <= eps {
            return Err(GeometryError::DegenerateQuadrilateral);
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if cross.signum() != sign {
            return Err(GeometryError::DegenerateQuadrilateral);
        }
    }
    Ok(())
}

/// Homography taking four (undistorted) corners in TL, TR, BR, BL order onto the
/// 1024x125 keyboard rectangle.
pub fn homography_from_corners(corners: &[Point2<f64>; 4]) -> Result<Homography, GeometryError> {
    check_convex(corners)?;
    let dst = TARGET_CORNERS.map(|(x, y)| Point2::new(x, y));
    Homography::from_correspondences(corners, &dst)
}
