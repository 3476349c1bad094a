use nalgebra::{Matrix2, Point2, Vector2};
use serde::{Deserialize, Serialize};

use super::GeometryError;

const MAX_ITERATIONS: usize = 50;

/// Brown–Conrady radial (k1, k2) and tangential (p1, p2) lens coefficients.
///
/// Coordinates are normalized about the image center with the image width
/// as focal scale, so the model is resolution independent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DistortionCoeffs {
    pub k1: f64,
    pub k2: f64,
    #[serde(default)]
    pub p1: f64,
    #[serde(default)]
    pub p2: f64,
}

impl DistortionCoeffs {
    pub fn is_identity(&self) -> bool {
        self.k1 == 0.0 && self.k2 == 0.0 && self.p1 == 0.0 && self.p2 == 0.0
    }

    pub fn is_finite(&self) -> bool {
        [self.k1, self.k2, self.p1, self.p2].iter().all(|c| c.is_finite())
    }

    fn apply_normalized(&self, p: Vector2<f64>) -> Vector2<f64> {
        let (x, y) = (p.x, p.y);
        let r2 = x * x + y * y;
        let radial = 1.0 + self.k1 * r2 + self.k2 * r2 * r2;
        Vector2::new(
            x * radial + 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x),
            y * radial + self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y,
        )
    }

    fn jacobian_normalized(&self, p: Vector2<f64>) -> Matrix2<f64> {
        let (x, y) = (p.x, p.y);
        let r2 = x * x + y * y;
        let radial = 1.0 + self.k1 * r2 + self.k2 * r2 * r2;
        let dradial = self.k1 + 2.0 * self.k2 * r2; // d(radial)/d(r2)
        let dxdx = radial + x * dradial * 2.0 * x + 2.0 * self.p1 * y + self.p2 * 6.0 * x;
        let dxdy = x * dradial * 2.0 * y + 2.0 * self.p1 * x + self.p2 * 2.0 * y;
        let dydx = y * dradial * 2.0 * x + self.p1 * 2.0 * x + 2.0 * self.p2 * y;
        let dydy = radial + y * dradial * 2.0 * y + self.p1 * 6.0 * y + 2.0 * self.p2 * x;
        Matrix2::new(dxdx, dxdy, dydx, dydy)
    }
}

fn to_normalized(pt: Point2<f64>, image_w: f64, image_h: f64) -> Vector2<f64> {
    Vector2::new((pt.x - image_w / 2.0) / image_w, (pt.y - image_h / 2.0) / image_w)
}

fn from_normalized(p: Vector2<f64>, image_w: f64, image_h: f64) -> Point2<f64> {
    Point2::new(p.x * image_w + image_w / 2.0, p.y * image_w + image_h / 2.0)
}

/// Forward lens model: ideal pixel -> observed (distorted) pixel.
pub fn distort(pt: Point2<f64>, d: &DistortionCoeffs, image_w: f64, image_h: f64) -> Point2<f64> {
    if d.is_identity() {
        return pt;
    }
    from_normalized(d.apply_normalized(to_normalized(pt, image_w, image_h)), image_w, image_h)
}

/// Inverse lens model: observed pixel -> ideal pixel, solved by Newton iteration.
pub fn undistort(
    pt: Point2<f64>,
    d: &DistortionCoeffs,
    image_w: f64,
    image_h: f64,
) -> Result<Point2<f64>, GeometryError> {
    if d.is_identity() {
        return Ok(pt);
    }
    let target = to_normalized(pt, image_w, image_h);
    let mut p = target;
    for _ in 0..MAX_ITERATIONS {
        let residual = d.apply_normalized(p) - target;
        if residual.norm() < 1e-14 {
            return Ok(from_normalized(p, image_w, image_h));
        }
        let step = d
            .jacobian_normalized(p)
            .lu()
            .solve(&residual)
            .ok_or(GeometryError::UndistortDiverged { x: pt.x, y: pt.y })?;
        p -= step;
        if !p.x.is_finite() || !p.y.is_finite() {
            break;
        }
    }
    let residual = d.apply_normalized(p) - target;
    if residual.norm() < 1e-12 {
        Ok(from_normalized(p, image_w, image_h))
    } else {
        Err(GeometryError::UndistortDiverged { x: pt.x, y: pt.y })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const W: f64 = 1920.0;
    const H: f64 = 1080.0;

    #[test]
    fn zero_coefficients_are_identity() {
        let d = DistortionCoeffs::default();
        let pt = Point2::new(123.456, 789.012);
        assert_eq!(undistort(pt, &d, W, H).unwrap(), pt);
        assert_eq!(distort(pt, &d, W, H), pt);
    }

    #[test]
    fn center_is_fixed() {
        let d = DistortionCoeffs { k1: -0.3, k2: 0.1, p1: 0.01, p2: -0.02 };
        let c = Point2::new(W / 2.0, H / 2.0);
        let u = undistort(c, &d, W, H).unwrap();
        assert!((u - c).norm() < 1e-12);
    }

    #[test]
    fn round_trip_on_grid() {
        let d = DistortionCoeffs { k1: -0.1, k2: 0.01, p1: 0.0, p2: 0.0 };
        for i in 0..10 {
            for j in 0..10 {
                let pt = Point2::new(W * (i as f64 + 0.5) / 10.0, H * (j as f64 + 0.5) / 10.0);
                let back = distort(undistort(pt, &d, W, H).unwrap(), &d, W, H);
                assert!((back - pt).norm() < 1e-6, "{pt:?} -> {back:?}");
            }
        }
    }

    #[test]
    fn round_trip_with_tangential_terms_beyond_frame() {
        let d = DistortionCoeffs { k1: 0.05, k2: -0.01, p1: 0.002, p2: -0.001 };
        for &(x, y) in &[(-0.2 * W, -0.2 * H), (1.2 * W, 1.2 * H), (0.0, H), (W, 0.0)] {
            let pt = Point2::new(x, y);
            let back = distort(undistort(pt, &d, W, H).unwrap(), &d, W, H);
            assert!((back - pt).norm() < 1e-6);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let d = DistortionCoeffs { k1: -0.2, k2: 0.05, p1: 0.01, p2: 0.02 };
        let p = Vector2::new(0.21, -0.13);
        let j = d.jacobian_normalized(p);
        let h = 1e-6;
        for k in 0..2 {
            let mut e = Vector2::zeros();
            e[k] = h;
            let fd = (d.apply_normalized(p + e) - d.apply_normalized(p - e)) / (2.0 * h);
            assert!((fd - j.column(k)).norm() < 1e-8);
        }
    }

    #[test]
    fn non_finite_coefficients_report_divergence() {
        let d = DistortionCoeffs { k1: f64::NAN, k2: 0.0, p1: 0.0, p2: 0.0 };
        assert!(undistort(Point2::new(10.0, 20.0), &d, W, H).is_err());
    }
}
