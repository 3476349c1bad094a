use nalgebra::{Matrix3, Point2, Vector3};

use super::{DepthError, ModelSkeleton};

pub const MAX_ITERATIONS: usize = 100;
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
pub const STEP_TOLERANCE: f64 = 1e-12;
/// A step-size stop is only accepted as a solution below this residual.
pub const ACCEPT_RESIDUAL: f64 = 1e-8;
const INITIAL_RADIUS: f64 = 1.0;

/// Depths along the viewing rays of I, W and R (t, u, v), their mean and the
/// floating decision.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HandDepthResult {
    pub t: f64,
    pub u: f64,
    pub v: f64,
    pub d: f64,
    pub floating: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub depths: Vector3<f64>,
    pub residual: f64,
    pub iterations: usize,
}

struct System {
    rays: [Vector3<f64>; 3],
    lengths: [f64; 3],
}

// Vertex pairs (I,W), (W,R), (R,I); unknown order (t, u, v).
const PAIRS: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

impl System {
    fn residuals(&self, x: &Vector3<f64>) -> Vector3<f64> {
        Vector3::from_fn(|k, _| {
            let (a, b) = PAIRS[k];
            (self.rays[a] * x[a] - self.rays[b] * x[b]).norm() - self.lengths[k]
        })
    }

    fn jacobian(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        let mut j = Matrix3::zeros();
        for (k, &(a, b)) in PAIRS.iter().enumerate() {
            let diff = self.rays[a] * x[a] - self.rays[b] * x[b];
            let n = diff.norm();
            if n > 0.0 {
                j[(k, a)] = self.rays[a].dot(&diff) / n;
                j[(k, b)] = -self.rays[b].dot(&diff) / n;
            }
        }
        j
    }
}

/// Powell's dog leg for the square 3x3 system, started at (1, 1, 1).
fn dog_leg(sys: &System) -> SolveReport {
    let mut x = Vector3::new(1.0, 1.0, 1.0);
    let mut f = sys.residuals(&x);
    let mut radius = INITIAL_RADIUS;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        if f.norm() < RESIDUAL_TOLERANCE {
            break;
        }
        iterations += 1;
        let j = sys.jacobian(&x);
        let g = j.transpose() * f;
        let jg = j * g;
        let cauchy = if jg.norm_squared() > 0.0 { -(g.norm_squared() / jg.norm_squared()) * g } else { Vector3::zeros() };
        let gauss_newton = j.lu().solve(&(-f));

        let step = match gauss_newton {
            Some(gn) if gn.norm() <= radius => gn,
            _ if cauchy.norm() >= radius => cauchy * (radius / cauchy.norm()),
            Some(gn) => {
                // Walk from the Cauchy point toward Gauss-Newton until the boundary.
                let d = gn - cauchy;
                let (a, b, c) = (d.norm_squared(), 2.0 * cauchy.dot(&d), cauchy.norm_squared() - radius * radius);
                let tau = (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a);
                cauchy + d * tau
            }
            None => cauchy,
        };

        let step_norm = step.norm();
        if step_norm < STEP_TOLERANCE {
            break;
        }
        let x_new = x + step;
        let f_new = sys.residuals(&x_new);
        let actual = f.norm_squared() - f_new.norm_squared();
        let predicted = f.norm_squared() - (f + j * step).norm_squared();
        let rho = if predicted > 0.0 { actual / predicted } else { -1.0 };

        if rho < 0.25 {
            radius *= 0.25;
        } else if rho > 0.75 {
            radius *= 2.0;
        }
        if actual > 0.0 {
            x = x_new;
            f = f_new;
        }
        if radius < STEP_TOLERANCE {
            break;
        }
    }
    SolveReport { depths: x, residual: f.norm(), iterations }
}

/// Runs the solver and returns its raw report, without acceptance checks.
pub fn solve_depths_report(observed: [Point2<f64>; 3], model: &ModelSkeleton) -> SolveReport {
    let rays = observed.map(|p| Vector3::new(p.x, p.y, 1.0));
    dog_leg(&System { rays, lengths: model.lengths() })
}

/// Recovers depths of the observed I, W, R camera-plane points so that the
/// 3-D triangle matches the model skeleton's side lengths.
pub fn solve_depths(observed: [Point2<f64>; 3], model: &ModelSkeleton, threshold: f64) -> Result<HandDepthResult, DepthError> {
    if !model.is_valid() {
        return Err(DepthError::InvalidSkeleton);
    }
    for (a, b) in PAIRS {
        if (observed[a] - observed[b]).norm() == 0.0 || !observed[a].x.is_finite() || !observed[a].y.is_finite() {
            return Err(DepthError::DegenerateObservation);
        }
    }
    let report = solve_depths_report(observed, model);
    let x = report.depths;
    if !x.iter().all(|v| v.is_finite()) || report.residual >= ACCEPT_RESIDUAL {
        return Err(DepthError::NotConverged { residual: report.residual, iterations: report.iterations });
    }
    if x.iter().any(|&v| v <= 0.0) {
        return Err(DepthError::NonPositiveDepth { t: x[0], u: x[1], v: x[2] });
    }
    let d = (x[0] + x[1] + x[2]) / 3.0;
    Ok(HandDepthResult { t: x[0], u: x[1], v: x[2], d, floating: super::classify_floating(d, threshold) })
}
