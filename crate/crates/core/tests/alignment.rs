use pianotrace_core::align::{align_performance, band_radius, render_sinusoidal, CqtConfig, DEFAULT_BAND_S, FEATURE_SAMPLE_RATE};
use pianotrace_core::synth::random_melody;

fn shifted(x: &[f32], shift_s: f64) -> Vec<f32> {
    let pad = (shift_s * f64::from(FEATURE_SAMPLE_RATE)).round() as usize;
    let mut y = vec![0.0; pad];
    y.extend_from_slice(x);
    y
}

#[test]
fn shift_of_point_eight_seconds_is_recovered() {
    let cfg = CqtConfig::default();
    let p = random_melody(11, 14);
    let rendition = render_sinusoidal(&p, cfg.sample_rate);
    let recording = shifted(&rendition, 0.8);
    let out = align_performance(&p, &recording, Some(&rendition), &cfg, DEFAULT_BAND_S).unwrap();
    out.dtw.path.validate(Some(band_radius(DEFAULT_BAND_S, &cfg))).unwrap();

    let frame = cfg.frame_seconds();
    for (w, n) in out.warped.performance.notes.iter().zip(&p.notes) {
        let err = (w.onset_s - n.onset_s - 0.8).abs();
        assert!(err <= frame, "note {} onset off by {:.2} frames", n.note_id, err / frame);
    }
}

#[test]
fn self_alignment_is_diagonal() {
    let cfg = CqtConfig::default();
    let p = random_melody(5, 6);
    let x = render_sinusoidal(&p, cfg.sample_rate);
    let out = align_performance(&p, &x, None, &cfg, DEFAULT_BAND_S).unwrap();
    assert!(out.dtw.path.points.iter().all(|&(i, j)| i == j));
    assert!(out.dtw.cost.abs() < 1e-9);
}
