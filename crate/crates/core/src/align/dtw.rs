use super::cqt::{CqtConfig, FeatureSequence, DB_FLOOR};
use super::AlignError;

pub const DEFAULT_BAND_S: f64 = 2.5;

/// Band half-width in frames, rounded toward zero.
pub fn band_radius(band_s: f64, cfg: &CqtConfig) -> usize {
    (band_s * f64::from(cfg.sample_rate) / cfg.hop as f64).trunc() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpPath {
    pub n: usize,
    pub m: usize,
    pub points: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtwResult {
    pub path: WarpPath,
    pub cost: f64,
    pub radius: usize,
}

/// Whether `(i, j)` satisfies `|i*m/n - j| <= radius`, in exact integer arithmetic.
pub fn in_band(i: usize, j: usize, n: usize, m: usize, radius: usize) -> bool {
    let lhs = (i as i128 * m as i128 - j as i128 * n as i128).abs();
    lhs <= radius as i128 * n as i128
}

fn row_bounds(i: usize, n: usize, m: usize, radius: usize) -> Option<(usize, usize)> {
    let (im, rn, nn) = (i as i128 * m as i128, radius as i128 * n as i128, n as i128);
    let lo = (im - rn).max(0);
    let lo = (lo + nn - 1) / nn;
    let hi = ((im + rn) / nn).min(m as i128 - 1);
    (lo <= hi).then_some((lo as usize, hi as usize))
}

impl WarpPath {
    pub fn diagonal(n: usize) -> Self {
        WarpPath { n, m: n, points: (0..n).map(|i| (i, i)).collect() }
    }

    /// Checks endpoints, unit monotone steps and the band.
    pub fn validate(&self, radius: Option<usize>) -> Result<(), String> {
        let (first, last) = match (self.points.first(), self.points.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => return Err("empty path".into()),
        };
        if first != (0, 0) || last != (self.n - 1, self.m - 1) {
            return Err(format!("path runs {first:?} -> {last:?}"));
        }
        for w in self.points.windows(2) {
            let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
            if !matches!((di, dj), (1, 0) | (0, 1) | (1, 1)) {
                return Err(format!("illegal step {:?} -> {:?}", w[0], w[1]));
            }
        }
        if let Some(r) = radius {
            if let Some(p) = self.points.iter().find(|&&(i, j)| !in_band(i, j, self.n, self.m, r)) {
                return Err(format!("{p:?} outside band {r}"));
            }
        }
        Ok(())
    }
}

const DIAG: u8 = 1;
const UP: u8 = 2;
const LEFT: u8 = 3;

struct StepCodes {
    stride: usize,
    bytes: Vec<u8>,
}

impl StepCodes {
    fn new(rows: usize, width: usize) -> Self {
        let stride = width.div_ceil(4);
        StepCodes { stride, bytes: vec![0; rows * stride] }
    }

    fn set(&mut self, row: usize, col: usize, code: u8) {
        let b = &mut self.bytes[row * self.stride + col / 4];
        *b |= code << ((col % 4) * 2);
    }

    fn get(&self, row: usize, col: usize) -> u8 {
        (self.bytes[row * self.stride + col / 4] >> ((col % 4) * 2)) & 3
    }
}

/// Banded DTW over an arbitrary local cost. Steps (1,0), (0,1), (1,1), all
/// weighted 1; ties prefer the diagonal, then the vertical step.
pub fn banded_dtw_with<F: Fn(usize, usize) -> f64>(n: usize, m: usize, radius: usize, cost: F) -> Result<DtwResult, AlignError> {
    if n == 0 || m == 0 {
        return Err(AlignError::EmptyInput);
    }
    let unreachable = || AlignError::BandUnreachable { n, m, radius };
    if !in_band(n - 1, m - 1, n, m, radius) {
        return Err(unreachable());
    }
    let bounds: Vec<(usize, usize)> = (0..n).map(|i| row_bounds(i, n, m, radius).ok_or_else(unreachable)).collect::<Result<_, _>>()?;
    let width = bounds.iter().map(|(lo, hi)| hi - lo + 1).max().unwrap_or(1);
    let mut codes = StepCodes::new(n, width);
    let mut prev = vec![f64::INFINITY; width];
    let mut cur = vec![f64::INFINITY; width];

    for i in 0..n {
        let (lo, hi) = bounds[i];
        let (plo, phi) = if i > 0 { bounds[i - 1] } else { (1, 0) };
        let prev_at = |prev: &[f64], j: usize| if i > 0 && j >= plo && j <= phi { prev[j - plo] } else { f64::INFINITY };
        for j in lo..=hi {
            let c = j - lo;
            if i == 0 && j == 0 {
                cur[c] = cost(0, 0);
                continue;
            }
            let diag = if j > 0 { prev_at(&prev, j - 1) } else { f64::INFINITY };
            let up = prev_at(&prev, j);
            let left = if j > lo { cur[c - 1] } else { f64::INFINITY };
            let (best, code) = if diag <= up && diag <= left {
                (diag, DIAG)
            } else if up <= left {
                (up, UP)
            } else {
                (left, LEFT)
            };
            if best.is_finite() {
                cur[c] = best + cost(i, j);
                codes.set(i, c, code);
            } else {
                cur[c] = f64::INFINITY;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
        cur.iter_mut().for_each(|v| *v = f64::INFINITY);
    }

    let (lo_last, _) = bounds[n - 1];
    let total = prev[m - 1 - lo_last];
    if !total.is_finite() {
        return Err(unreachable());
    }

    let mut points = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n - 1, m - 1);
    points.push((i, j));
    while (i, j) != (0, 0) {
        match codes.get(i, j - bounds[i].0) {
            DIAG => (i, j) = (i - 1, j - 1),
            UP => i -= 1,
            LEFT => j -= 1,
            _ => return Err(unreachable()),
        }
        points.push((i, j));
    }
    points.reverse();
    Ok(DtwResult { path: WarpPath { n, m, points }, cost: total, radius })
}

/// Cosine distance between non-negative vectors; two zero vectors are at
/// distance 0, a zero and a non-zero vector at distance 1.
pub fn cosine_distance(a: &[f32], b: &[f32], na: f64, nb: f64) -> f64 {
    match (na == 0.0, nb == 0.0) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        _ => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
            (1.0 - dot / (na * nb)).clamp(0.0, 2.0)
        }
    }
}

fn lifted(f: &FeatureSequence) -> (Vec<f32>, Vec<f64>) {
    let data: Vec<f32> = f.data.iter().map(|v| v - DB_FLOOR).collect();
    let norms = data.chunks(f.n_bins).map(|r| r.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt()).collect();
    (data, norms)
}

/// DTW between two feature sequences with cosine frame distance on dB values
/// shifted above the floor.
pub fn banded_dtw(x: &FeatureSequence, y: &FeatureSequence, radius: usize) -> Result<DtwResult, AlignError> {
    if x.n_bins != y.n_bins {
        return Err(AlignError::Features(format!("bin counts differ: {} vs {}", x.n_bins, y.n_bins)));
    }
    let (xd, xn) = lifted(x);
    let (yd, yn) = lifted(y);
    let b = x.n_bins;
    banded_dtw_with(x.n_frames, y.n_frames, radius, |i, j| {
        cosine_distance(&xd[i * b..(i + 1) * b], &yd[j * b..(j + 1) * b], xn[i], yn[j])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive minimum over every monotone path inside the band.
    fn brute_force(c: &[Vec<f64>], radius: usize) -> Option<(f64, Vec<(usize, usize)>)> {
        fn walk(c: &[Vec<f64>], r: usize, i: usize, j: usize, acc: f64, path: &mut Vec<(usize, usize)>, best: &mut Option<(f64, Vec<(usize, usize)>)>) {
            let (n, m) = (c.len(), c[0].len());
            if !in_band(i, j, n, m, r) {
                return;
            }
            let acc = acc + c[i][j];
            path.push((i, j));
            if (i, j) == (n - 1, m - 1) {
                if best.as_ref().map_or(true, |(b, _)| acc < *b) {
                    *best = Some((acc, path.clone()));
                }
            } else {
                if i + 1 < n && j + 1 < m {
                    walk(c, r, i + 1, j + 1, acc, path, best);
                }
                if i + 1 < n {
                    walk(c, r, i + 1, j, acc, path, best);
                }
                if j + 1 < m {
                    walk(c, r, i, j + 1, acc, path, best);
                }
            }
            path.pop();
        }
        let mut best = None;
        walk(c, radius, 0, 0, 0.0, &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn radius_for_default_band() {
        // 2.5 * 22050 / 64 = 861.33
        assert_eq!(band_radius(2.5, &CqtConfig::default()), 861);
    }

    #[test]
    fn matches_exhaustive_search_on_small_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..400 {
            let n = rng.gen_range(1..=8);
            let m = rng.gen_range(1..=8);
            let radius = rng.gen_range(0..=8);
            let c: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.gen::<f64>()).collect()).collect();
            let got = banded_dtw_with(n, m, radius, |i, j| c[i][j]);
            match brute_force(&c, radius) {
                Some((cost, path)) => {
                    let got = got.unwrap();
                    assert!((got.cost - cost).abs() < 1e-12, "{n}x{m} r={radius}: {} vs {cost}", got.cost);
                    assert_eq!(got.path.points, path);
                    got.path.validate(Some(radius)).unwrap();
                }
                None => assert!(matches!(got, Err(AlignError::BandUnreachable { .. }))),
            }
        }
    }

    #[test]
    fn five_by_five_toy() {
        let c = [
            [0.0, 5.0, 5.0, 5.0, 5.0],
            [5.0, 0.0, 0.0, 5.0, 5.0],
            [5.0, 5.0, 5.0, 0.0, 5.0],
            [5.0, 5.0, 5.0, 0.0, 5.0],
            [5.0, 5.0, 5.0, 5.0, 0.0],
        ];
        let got = banded_dtw_with(5, 5, 5, |i, j| c[i][j]).unwrap();
        assert_eq!(got.cost, 0.0);
        assert_eq!(got.path.points, vec![(0, 0), (1, 1), (1, 2), (2, 3), (3, 3), (4, 4)]);
    }

    #[test]
    fn identical_sequences_give_diagonal() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).sin()).collect();
        let got = banded_dtw_with(50, 50, 10, |i, j| (x[i] - x[j]).abs()).unwrap();
        assert_eq!(got.path, WarpPath::diagonal(50));
        assert_eq!(got.cost, 0.0);
    }

    #[test]
    fn pathological_ratio_is_rejected() {
        assert!(matches!(banded_dtw_with(2, 100, 3, |_, _| 0.0), Err(AlignError::BandUnreachable { .. })));
        assert!(matches!(banded_dtw_with(0, 3, 3, |_, _| 0.0), Err(AlignError::EmptyInput)));
    }

    #[test]
    fn cosine_zero_vector_convention() {
        assert_eq!(cosine_distance(&[0.0, 0.0], &[0.0, 0.0], 0.0, 0.0), 0.0);
        assert_eq!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0], 0.0, 1.0), 1.0);
        assert!(cosine_distance(&[1.0, 2.0], &[2.0, 4.0], 5f64.sqrt(), 20f64.sqrt()).abs() < 1e-6);
        assert!((cosine_distance(&[1.0, 0.0], &[0.0, 3.0], 1.0, 3.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn step_codes_pack_four_per_byte() {
        let mut s = StepCodes::new(2, 9);
        assert_eq!(s.stride, 3);
        for (c, code) in [(0, DIAG), (3, LEFT), (4, UP), (8, LEFT)] {
            s.set(1, c, code);
        }
        assert_eq!((s.get(1, 0), s.get(1, 3), s.get(1, 4), s.get(1, 8), s.get(1, 1), s.get(0, 0)), (DIAG, LEFT, UP, LEFT, 0, 0));
    }
}
