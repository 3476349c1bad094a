//! Pixel -> keyboard mapping: lens undistortion, corner homography and the key layout.

mod distortion;
mod homography;
pub mod layout;

use std::path::Path;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use distortion::{distort, undistort, DistortionCoeffs};
pub use homography::{check_convex, homography_from_corners, Homography, KeyboardPoint, TARGET_CORNERS};
pub use layout::{KeyLayout, KeyLocation, KeyRegion, KEYBOARD_HEIGHT, KEYBOARD_WIDTH, WHITE_KEY_WIDTH};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("lens undistortion did not converge for pixel ({x:.3}, {y:.3})")]
    UndistortDiverged { x: f64, y: f64 },
    #[error("keyboard corners do not form a strictly convex quadrilateral")]
    DegenerateQuadrilateral,
    #[error("homography is singular")]
    SingularHomography,
    #[error("pixel ({x:.3}, {y:.3}) maps to infinity")]
    PointAtInfinity { x: f64, y: f64 },
    #[error("invalid geometry: {0}")]
    Invalid(String),
    #[error("cannot read geometry file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse geometry JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Keyboard corners as seen in the (distorted) video, plus the lens model.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyboardGeometry {
    /// TL, TR, BR, BL; the top edge is the far edge of the keybed.
    pub corners: [Point2<f64>; 4],
    pub distortion: DistortionCoeffs,
    pub image_w: f64,
    pub image_h: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GeometryFile {
    corners: Vec<[f64; 2]>,
    #[serde(default)]
    distortion: DistortionCoeffs,
    image_size: [f64; 2],
    /// "ordered" (default, TL/TR/BR/BL) or "unordered".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    corner_order: Option<String>,
}

/// Sorts four points into TL, TR, BR, BL by angle around their centroid
/// (image coordinates, y down).
pub fn order_corners(points: [Point2<f64>; 4]) -> [Point2<f64>; 4] {
    let cx = points.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / 4.0;
    let mut sorted = points;
    sorted.sort_by(|a, b| (a.y - cy).atan2(a.x - cx).total_cmp(&(b.y - cy).atan2(b.x - cx)));
    // Ascending angle with y down is clockwise on screen; start from the top-left.
    let start = (0..4)
        .min_by(|&i, &j| (sorted[i].x + sorted[i].y).total_cmp(&(sorted[j].x + sorted[j].y)))
        .unwrap();
    [sorted[start], sorted[(start + 1) % 4], sorted[(start + 2) % 4], sorted[(start + 3) % 4]]
}

impl KeyboardGeometry {
    pub fn from_json_str(s: &str) -> Result<Self, GeometryError> {
        let file: GeometryFile = serde_json::from_str(s)?;
        if file.corners.len() != 4 {
            return Err(GeometryError::Invalid(format!("expected 4 corners, got {}", file.corners.len())));
        }
        let [w, h] = file.image_size;
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(GeometryError::Invalid(format!("bad image size {w}x{h}")));
        }
        if !file.distortion.is_finite() {
            return Err(GeometryError::Invalid("non-finite distortion coefficient".into()));
        }
        let pts: Vec<Point2<f64>> = file.corners.iter().map(|c| Point2::new(c[0], c[1])).collect();
        if pts.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(GeometryError::Invalid("non-finite corner".into()));
        }
        let mut corners = [pts[0], pts[1], pts[2], pts[3]];
        match file.corner_order.as_deref() {
            None | Some("ordered") => {}
            Some("unordered") => corners = order_corners(corners),
            Some(other) => return Err(GeometryError::Invalid(format!("unknown corner_order {other:?}"))),
        }
        Ok(KeyboardGeometry { corners, distortion: file.distortion, image_w: w, image_h: h })
    }

    pub fn load(path: &Path) -> Result<Self, GeometryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| GeometryError::Io { path: path.display().to_string(), source })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        let file = GeometryFile {
            corners: self.corners.iter().map(|c| [c.x, c.y]).collect(),
            distortion: self.distortion,
            image_size: [self.image_w, self.image_h],
            corner_order: None,
        };
        serde_json::to_string_pretty(&file).expect("geometry serializes")
    }

    pub fn undistort(&self, pt: Point2<f64>) -> Result<Point2<f64>, GeometryError> {
        undistort(pt, &self.distortion, self.image_w, self.image_h)
    }

    /// Undistorts the corners and fits the keyboard homography.
    pub fn compute_homography(&self) -> Result<Homography, GeometryError> {
        let mut undistorted = self.corners;
        for c in undistorted.iter_mut() {
            *c = self.undistort(*c)?;
        }
        homography_from_corners(&undistorted)
    }
}

/// Geometry, homography and key layout bundled for repeated lookups.
#[derive(Debug, Clone)]
pub struct KeyboardMapper {
    pub geometry: KeyboardGeometry,
    pub homography: Homography,
    pub layout: KeyLayout,
}

impl KeyboardMapper {
    pub fn new(geometry: KeyboardGeometry) -> Result<Self, GeometryError> {
        let homography = geometry.compute_homography()?;
        Ok(KeyboardMapper { geometry, homography, layout: KeyLayout::standard() })
    }

    /// Observed pixel -> keyboard space.
    pub fn to_keyboard_space(&self, px: Point2<f64>) -> Result<KeyboardPoint, GeometryError> {
        self.homography.apply(self.geometry.undistort(px)?)
    }

    /// Normalized image coordinates (u, v in [0, 1]) -> keyboard space.
    pub fn normalized_to_keyboard(&self, u: f64, v: f64) -> Result<KeyboardPoint, GeometryError> {
        self.to_keyboard_space(Point2::new(u * self.geometry.image_w, v * self.geometry.image_h))
    }

    /// Keyboard space -> observed (distorted) pixel.
    pub fn keyboard_to_pixel(&self, kp: KeyboardPoint) -> Result<Point2<f64>, GeometryError> {
        let ideal = self.homography.apply_inverse(kp)?;
        Ok(distort(ideal, &self.geometry.distortion, self.geometry.image_w, self.geometry.image_h))
    }
}
