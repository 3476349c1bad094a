use nalgebra::{Point2, Vector3};
use pianotrace_core::align::{banded_dtw_with, warp_midi, WarpDirection, WarpPath};
use pianotrace_core::depth::{select_model_skeleton, solve_depths, solve_depths_report, CalibrationConfig, CalibrationSample, ModelSkeleton, TriangleMetrics};
use pianotrace_core::geometry::{homography_from_corners, KeyboardPoint, TARGET_CORNERS};
use pianotrace_core::hand::Hand;
use pianotrace_core::loudness::compute_targets;
use pianotrace_core::metrics::{cohens_d, max_matching, note_metrics, MatchMode};
use pianotrace_core::midi::{apply_sustain_extension, parse_midi, write_midi, NoteEvent, Performance};
use pianotrace_core::synth::random_performance;
use proptest::prelude::*;

fn by_pitch(notes: &[NoteEvent]) -> Vec<NoteEvent> {
    let mut v = notes.to_vec();
    v.sort_by(|a, b| a.pitch.cmp(&b.pitch).then(a.onset_s.total_cmp(&b.onset_s)));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn midi_round_trip_on_large_performances(seed in any::<u64>()) {
        let p = random_performance(seed, 1000);
        let back = parse_midi(&write_midi(&p).unwrap()).unwrap();
        let tempo = p.tempo();
        prop_assert_eq!(back.notes.len(), p.notes.len());
        for (a, b) in by_pitch(&p.notes).iter().zip(by_pitch(&back.notes).iter()) {
            prop_assert_eq!((a.pitch, a.velocity), (b.pitch, b.velocity));
            prop_assert!((a.onset_s - b.onset_s).abs() <= tempo.tick_quantum_at(a.onset_s));
            prop_assert!((a.offset_s - b.offset_s).abs() <= tempo.tick_quantum_at(a.offset_s));
        }
        prop_assert_eq!(back.pedals.len(), p.pedals.len());
        for (a, b) in p.pedals.iter().zip(&back.pedals) {
            prop_assert_eq!(a.value, b.value);
            prop_assert!((a.time_s - b.time_s).abs() <= tempo.tick_quantum_at(a.time_s));
        }
    }
}

proptest! {
    #[test]
    fn sustain_extension_bounds(seed in any::<u64>(), threshold in 1u8..=127) {
        let p = random_performance(seed, 60);
        let ext = apply_sustain_extension(&p, threshold);
        let end = p.end_time();
        for (i, (a, b)) in p.notes.iter().zip(&ext).enumerate() {
            prop_assert_eq!((a.note_id, a.pitch, a.velocity, a.onset_s), (b.note_id, b.pitch, b.velocity, b.onset_s));
            let next_same = p.notes[i + 1..].iter().filter(|n| n.pitch == a.pitch && n.onset_s > a.onset_s).map(|n| n.onset_s).fold(f64::INFINITY, f64::min);
            prop_assert!(b.offset_s >= a.offset_s.min(next_same));
            prop_assert!(b.offset_s <= a.offset_s.max(end));
            prop_assert!(b.offset_s <= next_same.max(a.offset_s));
        }
        let no_pedal = Performance { pedals: Vec::new(), ..p.clone() };
        prop_assert_eq!(apply_sustain_extension(&no_pedal, threshold), p.notes);
    }

    #[test]
    fn homography_maps_corners_and_inverts(
        jitter in prop::array::uniform8(-60.0f64..60.0),
        u in 0.0f64..1024.0, v in 0.0f64..125.0,
    ) {
        let base = [(300.0, 500.0), (1600.0, 520.0), (1650.0, 700.0), (260.0, 690.0)];
        let corners = [0, 1, 2, 3].map(|k| Point2::new(base[k].0 + jitter[2 * k], base[k].1 + jitter[2 * k + 1] * 0.3));
        let h = homography_from_corners(&corners).unwrap();
        for (c, t) in corners.iter().zip(TARGET_CORNERS.iter()) {
            let kp = h.apply(*c).unwrap();
            prop_assert!((kp.x - t.0).abs() < 1e-6 && (kp.y - t.1).abs() < 1e-6);
        }
        let px = h.apply_inverse(KeyboardPoint::new(u, v)).unwrap();
        let back = h.apply(px).unwrap();
        prop_assert!((back.x - u).abs() < 1e-6 && (back.y - v).abs() < 1e-6);
    }
}

fn triangle(center: (f64, f64), size: f64, theta: f64, shape: [(f64, f64); 2]) -> [Point2<f64>; 3] {
    let pts = [(0.0, 0.0), shape[0], shape[1]];
    pts.map(|(x, y)| {
        let (xr, yr) = (x * theta.cos() - y * theta.sin(), x * theta.sin() + y * theta.cos());
        Point2::new(center.0 + size * xr, center.1 + size * yr)
    })
}

fn lifted(tri: &[Point2<f64>; 3], depths: [f64; 3]) -> [Vector3<f64>; 3] {
    [0, 1, 2].map(|k| Vector3::new(tri[k].x * depths[k], tri[k].y * depths[k], depths[k]))
}

fn model_of(p: &[Vector3<f64>; 3]) -> ModelSkeleton {
    ModelSkeleton::from_lengths(Hand::Right, (p[0] - p[1]).norm(), (p[1] - p[2]).norm(), (p[2] - p[0]).norm())
}

fn project(p: &[Vector3<f64>; 3]) -> [Point2<f64>; 3] {
    p.map(|q| Point2::new(q.x / q.z, q.y / q.z))
}

fn tri_strategy() -> impl Strategy<Value = [Point2<f64>; 3]> {
    ((-0.6f64..0.6, -0.4f64..0.4), 0.05f64..0.3, 0.0f64..6.28, (0.5f64..1.5, -0.5f64..0.5), (-0.5f64..0.5, 0.5f64..1.5))
        .prop_map(|(c, s, th, a, b)| triangle(c, s, th, [a, b]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn depth_recovered_for_level_triangles(tri in tri_strategy(), z in 0.5f64..1.5) {
        let world = lifted(&tri, [z; 3]);
        let r = solve_depths(project(&world), &model_of(&world), 0.9).unwrap();
        prop_assert!((r.t - z).abs() < 1e-6 && (r.u - z).abs() < 1e-6 && (r.v - z).abs() < 1e-6);
    }

    #[test]
    fn accepted_solutions_reproduce_the_model(tri in tri_strategy(), d in prop::array::uniform3(0.5f64..1.5)) {
        // With tilt the system can have several exact roots; any accepted one
        // must still be an exact, positive solution.
        let world = lifted(&tri, d);
        let model = model_of(&world);
        let obs = project(&world);
        if let Ok(r) = solve_depths(obs, &model, 0.9) {
            let rec = lifted(&obs, [r.t, r.u, r.v]);
            let lens = model_of(&rec).lengths();
            for (a, b) in lens.iter().zip(model.lengths()) {
                prop_assert!((a - b).abs() < 1e-8);
            }
            prop_assert!(r.t > 0.0 && r.u > 0.0 && r.v > 0.0);
            prop_assert!(solve_depths_report(obs, &model).residual < 1e-8);
        }
    }

    #[test]
    fn scaling_scene_scales_depths(tri in tri_strategy(), z in 0.5f64..1.5, z_scaled in 0.5f64..1.5) {
        // Both scenes stay in the physical depth range the solver starts from.
        let lambda = z_scaled / z;
        let world = lifted(&tri, [z; 3]);
        let base = solve_depths(project(&world), &model_of(&world), 0.9).unwrap();
        let scaled_world = world.map(|p| p * lambda);
        let scaled = solve_depths(project(&scaled_world), &model_of(&world).scaled(lambda), 0.9).unwrap();
        prop_assert!((scaled.t - lambda * base.t).abs() < 1e-6);
        prop_assert!((scaled.u - lambda * base.u).abs() < 1e-6);
        prop_assert!((scaled.v - lambda * base.v).abs() < 1e-6);
    }
}

fn sample(frame_idx: u64, angle: f64, r: f64, area: f64) -> CalibrationSample {
    CalibrationSample {
        frame_idx,
        metrics: TriangleMetrics { angle_deg: angle, r, area, self_intersecting: false },
        skeleton: ModelSkeleton::from_lengths(Hand::Left, area, 1.0, 1.0),
    }
}

proptest! {
    #[test]
    fn calibration_ignores_frame_order(
        values in prop::collection::vec((20.0f64..36.0, 0.05f64..0.5, 0.001f64..0.01), 20..80),
        seed in any::<u64>(),
    ) {
        let samples: Vec<CalibrationSample> = values.iter().enumerate().map(|(i, &(a, r, ar))| sample(i as u64, (a * 4.0).round() / 4.0, r, ar)).collect();
        let mut shuffled = samples.clone();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        let cfg = CalibrationConfig::default();
        let a = select_model_skeleton(&samples, Hand::Left, &cfg).unwrap();
        let b = select_model_skeleton(&shuffled, Hand::Left, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn dtw_paths_are_valid(n in 1usize..60, m in 1usize..60, radius in 0usize..40, seed in any::<u64>()) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let c: Vec<f64> = (0..n * m).map(|_| rand::Rng::gen::<f64>(&mut rng)).collect();
        if let Ok(res) = banded_dtw_with(n, m, radius, |i, j| c[i * m + j]) {
            prop_assert!(res.path.validate(Some(radius)).is_ok());
            let sum: f64 = res.path.points.iter().map(|&(i, j)| c[i * m + j]).sum();
            prop_assert!((sum - res.cost).abs() < 1e-9);
        }
    }

    #[test]
    fn warped_onsets_stay_sorted(steps in prop::collection::vec(0u8..3, 1..400), seed in any::<u64>()) {
        let mut points = vec![(0usize, 0usize)];
        for s in steps {
            let (i, j) = *points.last().unwrap();
            points.push(match s { 0 => (i + 1, j), 1 => (i, j + 1), _ => (i + 1, j + 1) });
        }
        let (n, m) = (points.last().unwrap().0 + 1, points.last().unwrap().1 + 1);
        let path = WarpPath { n, m, points };
        let p = random_performance(seed, 40);
        let frame_s = p.end_time() / n as f64;
        let out = warp_midi(&p, &path, WarpDirection::RenditionIsX, frame_s.max(1e-3)).performance;
        for w in out.notes.windows(2) {
            prop_assert!(w[0].onset_s <= w[1].onset_s);
        }
        prop_assert_eq!(out.notes.len(), p.notes.len());
        for b in &out.notes {
            prop_assert!(b.offset_s > b.onset_s);
            prop_assert_eq!(p.note(b.note_id).map(|a| a.pitch), Some(b.pitch));
        }
    }

    #[test]
    fn targets_average_to_global(values in prop::collection::vec(-60.0f64..-5.0, 1..50)) {
        let t = compute_targets(&values, -23.0).unwrap();
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        prop_assert!((mean + 23.0).abs() < 1e-9);
        for k in 1..values.len() {
            prop_assert!(((t[k] - t[0]) - (values[k] - values[0])).abs() < 1e-9);
        }
    }
}

fn notes_strategy(max: usize) -> impl Strategy<Value = Vec<NoteEvent>> {
    prop::collection::vec((0u8..4, 60u8..63, 0u8..=127), 0..=max).prop_map(|v| {
        v.into_iter()
            .map(|(slot, pitch, velocity)| {
                let onset = f64::from(slot) * 0.03;
                NoteEvent { note_id: 0, onset_s: onset, offset_s: onset + 0.2, pitch, velocity }
            })
            .collect()
    })
}

fn brute_force_matching(n: usize, m: usize, ok: &dyn Fn(usize, usize) -> bool) -> usize {
    fn go(r: usize, n: usize, m: usize, used: &mut Vec<bool>, ok: &dyn Fn(usize, usize) -> bool) -> usize {
        if r == n {
            return 0;
        }
        let mut best = go(r + 1, n, m, used, ok);
        for e in 0..m {
            if !used[e] && ok(r, e) {
                used[e] = true;
                best = best.max(1 + go(r + 1, n, m, used, ok));
                used[e] = false;
            }
        }
        best
    }
    go(0, n, m, &mut vec![false; m], ok)
}

proptest! {
    #[test]
    fn matching_is_maximum(r in notes_strategy(8), e in notes_strategy(8)) {
        let ok = |i: usize, j: usize| r[i].pitch == e[j].pitch && (r[i].onset_s - e[j].onset_s).abs() <= 0.05;
        let got = max_matching(r.len(), e.len(), ok);
        prop_assert_eq!(got.len(), brute_force_matching(r.len(), e.len(), &ok));
        let mut used_e: Vec<usize> = got.iter().map(|p| p.1).collect();
        used_e.sort_unstable();
        used_e.dedup();
        prop_assert_eq!(used_e.len(), got.len());
        prop_assert_eq!(note_metrics(&r, &e, MatchMode::Onset, 0.05).pairs.len(), got.len());
    }

    #[test]
    fn onset_metrics_are_symmetric(r in notes_strategy(8), e in notes_strategy(8)) {
        let a = note_metrics(&r, &e, MatchMode::Onset, 0.05);
        let b = note_metrics(&e, &r, MatchMode::Onset, 0.05);
        prop_assert!((a.precision - b.recall).abs() < 1e-12);
        prop_assert!((a.f1 - b.f1).abs() < 1e-12);
    }

    #[test]
    fn cohens_d_is_antisymmetric(a in prop::collection::vec(-10.0f64..10.0, 2..20), b in prop::collection::vec(-10.0f64..10.0, 2..20)) {
        if let Ok(d) = cohens_d(&a, &b) {
            prop_assert!((d + cohens_d(&b, &a).unwrap()).abs() < 1e-12);
        }
    }
}
