//! Scripted synthetic recordings: a pinhole camera above a keyboard, rigid
//! hand models placed over keys, and the matching MIDI performance.
//!
//! Used as ground truth by tests and by the `synth` CLI subcommand.

use nalgebra::{Point2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{distort, DistortionCoeffs, KeyLayout, KeyboardGeometry, KeyboardPoint, KEYBOARD_HEIGHT, KEYBOARD_WIDTH, WHITE_KEY_WIDTH};
use crate::hand::{FingerId, Hand};
use crate::landmarks::{HandObservation, LandmarkFrame, LANDMARK_COUNT};
use crate::midi::{NoteEvent, PedalEvent, Performance, TempoChange, DEFAULT_TEMPO_US};

/// Camera looking down the +z axis at a keyboard lying in the z = 1 plane.
/// Camera-plane coordinates follow x = 2u - 1, y = AR (2v - 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCamera {
    pub image_w: f64,
    pub image_h: f64,
    pub distortion: DistortionCoeffs,
    pub keyboard_left: f64,
    pub keyboard_right: f64,
    /// Camera-plane y of the far edge of the keybed.
    pub keyboard_top: f64,
}

impl Default for SyntheticCamera {
    fn default() -> Self {
        SyntheticCamera {
            image_w: 1920.0,
            image_h: 1080.0,
            distortion: DistortionCoeffs { k1: -0.02, k2: 0.0, p1: 0.0, p2: 0.0 },
            keyboard_left: -0.9,
            keyboard_right: 0.9,
            keyboard_top: -0.05,
        }
    }
}

impl SyntheticCamera {
    /// Camera-plane units per keyboard-space unit (the keyboard is isotropic).
    pub fn scale(&self) -> f64 {
        (self.keyboard_right - self.keyboard_left) / KEYBOARD_WIDTH
    }

    pub fn white_key_width(&self) -> f64 {
        WHITE_KEY_WIDTH * self.scale()
    }

    pub fn keyboard_to_camera(&self, kp: KeyboardPoint) -> Point2<f64> {
        Point2::new(self.keyboard_left + kp.x * self.scale(), self.keyboard_top + kp.y * self.scale())
    }

    /// Observed normalized image coordinates of a 3-D camera-space point.
    pub fn project(&self, p: Vector3<f64>) -> [f64; 2] {
        let (x, y) = (p.x / p.z, p.y / p.z);
        let ideal = Point2::new(x * self.image_w / 2.0 + self.image_w / 2.0, y * self.image_w / 2.0 + self.image_h / 2.0);
        let px = distort(ideal, &self.distortion, self.image_w, self.image_h);
        [px.x / self.image_w, px.y / self.image_h]
    }

    pub fn geometry(&self) -> KeyboardGeometry {
        let corners = [(0.0, 0.0), (KEYBOARD_WIDTH, 0.0), (KEYBOARD_WIDTH, KEYBOARD_HEIGHT), (0.0, KEYBOARD_HEIGHT)].map(|(x, y)| {
            let c = self.keyboard_to_camera(KeyboardPoint::new(x, y));
            let uv = self.project(Vector3::new(c.x, c.y, 1.0));
            Point2::new(uv[0] * self.image_w, uv[1] * self.image_h)
        });
        KeyboardGeometry { corners, distortion: self.distortion, image_w: self.image_w, image_h: self.image_h }
    }
}

/// Keyboard-space y where resting fingertips touch the keys (front part).
pub const FINGERTIP_ROW: f64 = 100.0;

const WRIST_BACK: f64 = 0.19;
const MCP_BACK: f64 = 0.07;
/// Index and ring MCP offsets from the middle finger; 0.12 * tan(14 deg) gives a 28 deg wrist angle.
const MCP_SPREAD: f64 = 0.029_919;

/// A rigid flat hand. `anchor_white` is the (fractional) white-key index under
/// the middle finger; fingers rest on neighboring white keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandState {
    pub side: Hand,
    pub anchor_white: f64,
    /// Depth of the whole hand; 1 is resting on the keys.
    pub z: f64,
    /// Per-finger fingertip shifts along the keyboard, in white keys.
    pub tip_offsets: [f64; 5],
    pub score: f64,
}

impl HandState {
    pub fn resting(side: Hand, anchor_white: f64) -> Self {
        HandState { side, anchor_white, z: 1.0, tip_offsets: [0.0; 5], score: 0.95 }
    }

    /// Hand placed so that `finger` rests on the white key `white_index`.
    pub fn finger_on(side: Hand, finger: u8, white_index: usize) -> Self {
        let offset = (f64::from(finger) - 3.0) * Self::direction(side);
        Self::resting(side, white_index as f64 - offset)
    }

    pub fn lifted(mut self, z: f64) -> Self {
        self.z = z;
        self
    }

    /// Spreads the fingertips apart by `amount` white keys per finger step,
    /// as a relaxed hand does off the keys.
    pub fn spread(mut self, amount: f64) -> Self {
        let s = Self::direction(self.side);
        for (k, o) in self.tip_offsets.iter_mut().enumerate() {
            *o += s * (k as f64 - 2.0) * amount;
        }
        self
    }

    /// +1 when finger numbers increase to the right (right hand).
    fn direction(side: Hand) -> f64 {
        match side {
            Hand::Right => 1.0,
            Hand::Left => -1.0,
        }
    }

    /// White-key position (fractional index) of a fingertip.
    pub fn fingertip_white(&self, finger: u8) -> f64 {
        self.anchor_white + (f64::from(finger) - 3.0) * Self::direction(self.side) + self.tip_offsets[usize::from(finger - 1)]
    }

    /// Fingertip location in keyboard space when resting (z = 1).
    pub fn fingertip_keyboard(&self, finger: u8) -> KeyboardPoint {
        KeyboardPoint::new((self.fingertip_white(finger) + 0.5) * WHITE_KEY_WIDTH, FINGERTIP_ROW)
    }

    /// 21 landmarks in camera space.
    pub fn landmarks_3d(&self, cam: &SyntheticCamera) -> [Vector3<f64>; LANDMARK_COUNT] {
        let s = Self::direction(self.side);
        let mid = cam.keyboard_to_camera(KeyboardPoint::new((self.anchor_white + 0.5) * WHITE_KEY_WIDTH, FINGERTIP_ROW));
        let (xb, yt) = (mid.x, mid.y);
        let tip = |f: u8| cam.keyboard_to_camera(self.fingertip_keyboard(f));
        let mut pts = [Point2::new(0.0, 0.0); LANDMARK_COUNT];
        pts[0] = Point2::new(xb, yt + WRIST_BACK);
        // Thumb: CMC, MCP, IP, tip.
        pts[1] = Point2::new(xb - s * 0.045, yt + 0.15);
        pts[2] = Point2::new(xb - s * 0.06, yt + 0.10);
        pts[4] = tip(1);
        pts[3] = Point2::from((pts[2].coords + pts[4].coords) / 2.0);
        let mcp_x = [-MCP_SPREAD, 0.0, MCP_SPREAD, 0.055];
        for (k, finger) in (2..=5u8).enumerate() {
            let base = 5 + 4 * k;
            let mcp = Point2::new(xb + s * mcp_x[k], yt + MCP_BACK + if finger == 5 { 0.01 } else { 0.0 });
            let t = tip(finger);
            pts[base] = mcp;
            pts[base + 1] = mcp + (t - mcp) / 3.0;
            pts[base + 2] = mcp + (t - mcp) * (2.0 / 3.0);
            pts[base + 3] = t;
        }
        // Lifting moves the hand straight toward the camera.
        pts.map(|p| Vector3::new(p.x, p.y, self.z))
    }

    pub fn observe(&self, cam: &SyntheticCamera) -> HandObservation {
        HandObservation { side: self.side, score: self.score, landmarks: self.landmarks_3d(cam).map(|p| cam.project(p)) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_s: f64,
    pub end_s: f64,
    pub hands: Vec<HandState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptedNote {
    pub onset_s: f64,
    pub offset_s: f64,
    pub pitch: u8,
    pub velocity: u8,
    /// The finger the scene places on the key, if exactly one.
    pub finger: Option<FingerId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub camera: SyntheticCamera,
    pub fps: f64,
    pub duration_s: f64,
    pub segments: Vec<Segment>,
    pub notes: Vec<ScriptedNote>,
    /// Uniform landmark noise amplitude, pixels.
    pub noise_px: f64,
    pub seed: u64,
}

impl Scene {
    pub fn new(duration_s: f64) -> Self {
        Scene {
            camera: SyntheticCamera::default(),
            fps: 60.0,
            duration_s,
            segments: Vec::new(),
            notes: Vec::new(),
            noise_px: 0.3,
            seed: 17,
        }
    }

    pub fn n_frames(&self) -> usize {
        (self.duration_s * self.fps).round() as usize
    }

    pub fn frame_time(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.fps
    }

    /// Hand states at time `t` (last segment containing `t` wins).
    pub fn hands_at(&self, t: f64) -> &[HandState] {
        self.segments.iter().rev().find(|s| s.start_s <= t && t < s.end_s).map_or(&[], |s| &s.hands)
    }

    pub fn frames(&self) -> Vec<LandmarkFrame> {
        (0..self.n_frames())
            .map(|i| {
                let t = self.frame_time(i);
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ i as u64);
                let hands = self
                    .hands_at(t)
                    .iter()
                    .map(|h| {
                        let mut obs = h.observe(&self.camera);
                        if self.noise_px > 0.0 {
                            for p in obs.landmarks.iter_mut() {
                                p[0] += rng.gen_range(-self.noise_px..=self.noise_px) / self.camera.image_w;
                                p[1] += rng.gen_range(-self.noise_px..=self.noise_px) / self.camera.image_h;
                            }
                        }
                        obs
                    })
                    .collect();
                LandmarkFrame { frame_idx: i as u64, t_s: t, hands }
            })
            .collect()
    }

    fn sorted_notes(&self) -> Vec<ScriptedNote> {
        let mut notes = self.notes.clone();
        notes.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s).then(a.pitch.cmp(&b.pitch)).then(a.offset_s.total_cmp(&b.offset_s)));
        notes
    }

    pub fn performance(&self) -> Performance {
        let notes = self
            .sorted_notes()
            .iter()
            .map(|n| NoteEvent { note_id: 0, onset_s: n.onset_s, offset_s: n.offset_s, pitch: n.pitch, velocity: n.velocity })
            .collect();
        Performance::new(notes, Vec::new(), 480, vec![TempoChange { tick: 0, us_per_quarter: DEFAULT_TEMPO_US }])
    }

    /// Scripted finger of each note, indexed by `note_id` of [`Scene::performance`].
    pub fn expected_fingers(&self) -> Vec<Option<FingerId>> {
        self.sorted_notes().iter().map(|n| n.finger).collect()
    }

    pub fn geometry(&self) -> KeyboardGeometry {
        self.camera.geometry()
    }

    /// Places `finger` of `side` on the white key `pitch` for `[onset, onset + dur)`;
    /// the note sounds for 90% of that span.
    pub fn play(&mut self, side: Hand, finger: u8, pitch: u8, onset_s: f64, dur_s: f64, others: &[HandState]) {
        let layout = KeyLayout::standard();
        let white = layout.white_index_of(pitch).expect("scripted notes are white keys");
        let mut hands = vec![HandState::finger_on(side, finger, white)];
        hands.extend_from_slice(others);
        self.segments.push(Segment { start_s: onset_s, end_s: onset_s + dur_s, hands });
        self.notes.push(ScriptedNote {
            onset_s,
            offset_s: onset_s + dur_s * 0.9,
            pitch,
            velocity: 80,
            finger: FingerId::new(side, finger),
        });
    }
}

/// C-major scale fingering over one octave up and back down (15 notes).
pub fn scale_fingering(side: Hand) -> Vec<(i32, u8)> {
    // (white-key step from the starting C, finger)
    let up: [u8; 8] = match side {
        Hand::Right => [1, 2, 3, 1, 2, 3, 4, 5],
        Hand::Left => [5, 4, 3, 2, 1, 3, 2, 1],
    };
    let down: [u8; 7] = match side {
        Hand::Right => [4, 3, 2, 1, 3, 2, 1],
        Hand::Left => [2, 3, 1, 2, 3, 4, 5],
    };
    let mut seq: Vec<(i32, u8)> = up.iter().enumerate().map(|(i, &f)| (i as i32, f)).collect();
    seq.extend(down.iter().enumerate().map(|(i, &f)| (6 - i as i32, f)));
    seq
}

fn white_pitch(layout: &KeyLayout, start: u8, steps: i32) -> u8 {
    let idx = layout.white_index_of(start).expect("white start") as i32 + steps;
    layout.white_pitch(idx as usize)
}

/// Both hands playing C-major scales in parallel octaves (left from C3, right
/// from C4), `cycles` times, with `note_s` per note.
pub fn c_major_scale_scene(cycles: usize, note_s: f64) -> Scene {
    let seq_r = scale_fingering(Hand::Right);
    let seq_l = scale_fingering(Hand::Left);
    let layout = KeyLayout::standard();
    let cycle_s = note_s * seq_r.len() as f64;
    let mut scene = Scene::new(cycle_s * cycles as f64);
    for c in 0..cycles {
        for (k, (&(step_r, f_r), &(step_l, f_l))) in seq_r.iter().zip(&seq_l).enumerate() {
            let t = c as f64 * cycle_s + k as f64 * note_s;
            add_two_hand_step(&mut scene, &layout, t, note_s, (step_l, f_l), (step_r, f_r));
        }
    }
    scene
}

fn add_two_hand_step(scene: &mut Scene, layout: &KeyLayout, t: f64, dur: f64, left: (i32, u8), right: (i32, u8)) {
    let pl = white_pitch(layout, 48, left.0);
    let pr = white_pitch(layout, 60, right.0);
    let left_state = HandState::finger_on(Hand::Left, left.1, layout.white_index_of(pl).unwrap());
    scene.play(Hand::Right, right.1, pr, t, dur, &[left_state]);
    scene.notes.push(ScriptedNote {
        onset_s: t,
        offset_s: t + dur * 0.9,
        pitch: pl,
        velocity: 72,
        finger: FingerId::new(Hand::Left, left.1),
    });
}

/// Right hand resting on the keys, lifted to `lift_z` in the middle of the
/// recording with linear ramps in and out. No notes are played.
pub fn lift_trajectory_scene(lift_z: f64) -> Scene {
    let mut scene = Scene::new(8.0);
    let base = HandState::resting(Hand::Right, 30.0);
    let left = HandState::resting(Hand::Left, 18.0);
    let frame = 1.0 / scene.fps;
    let mut push = |start: f64, end: f64, z: f64| {
        let right = if z < 1.0 { base.lifted(z).spread(0.3) } else { base };
        scene.segments.push(Segment { start_s: start, end_s: end, hands: vec![left, right] });
    };
    push(0.0, 3.0, 1.0);
    let ramp_frames = 30;
    for k in 0..ramp_frames {
        let a = (k as f64 + 0.5) / ramp_frames as f64;
        push(3.0 + k as f64 * frame, 3.0 + (k + 1) as f64 * frame, 1.0 + a * (lift_z - 1.0));
    }
    push(3.5, 5.0, lift_z);
    for k in 0..ramp_frames {
        let a = (k as f64 + 0.5) / ramp_frames as f64;
        push(5.0 + k as f64 * frame, 5.0 + (k + 1) as f64 * frame, lift_z + a * (1.0 - lift_z));
    }
    push(5.5, 8.0, 1.0);
    scene
}

/// Options for [`practice_scene`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PracticeOptions {
    pub duration_s: f64,
    pub note_s: f64,
    /// Pause after each scale with the right hand lifted.
    pub pause_s: f64,
    pub lift_z: f64,
    /// Append a two-finger hover note and a note with no hands in view.
    pub ambiguous_tail: bool,
}

impl Default for PracticeOptions {
    fn default() -> Self {
        PracticeOptions { duration_s: 180.0, note_s: 0.25, pause_s: 1.0, lift_z: 0.85, ambiguous_tail: false }
    }
}

/// Repeated two-hand scales separated by pauses in which the right hand is
/// lifted off the keys; optionally followed by ambiguous notes.
pub fn practice_scene(opts: &PracticeOptions) -> Scene {
    let layout = KeyLayout::standard();
    let seq_r = scale_fingering(Hand::Right);
    let seq_l = scale_fingering(Hand::Left);
    let scale_s = opts.note_s * seq_r.len() as f64;
    let cycle_s = scale_s + opts.pause_s;
    let tail_s = if opts.ambiguous_tail { 4.0 * opts.note_s } else { 0.0 };
    let cycles = (((opts.duration_s - tail_s) / cycle_s).floor() as usize).max(1);
    let mut scene = Scene::new(opts.duration_s.max(cycles as f64 * cycle_s + tail_s));

    for c in 0..cycles {
        let t0 = c as f64 * cycle_s;
        for (k, (&r, &l)) in seq_r.iter().zip(&seq_l).enumerate() {
            add_two_hand_step(&mut scene, &layout, t0 + k as f64 * opts.note_s, opts.note_s, l, r);
        }
        if opts.pause_s > 0.0 {
            let pause = Segment {
                start_s: t0 + scale_s,
                end_s: t0 + cycle_s,
                hands: vec![
                    HandState::finger_on(Hand::Left, 5, layout.white_index_of(48).unwrap()),
                    HandState::finger_on(Hand::Right, 1, layout.white_index_of(60).unwrap()).lifted(opts.lift_z).spread(0.3),
                ],
            };
            scene.segments.push(pause);
        }
    }
    if opts.ambiguous_tail {
        let t = cycles as f64 * cycle_s;
        add_hover_note(&mut scene, t, opts.note_s, 67);
        add_unseen_note(&mut scene, t + 2.0 * opts.note_s, opts.note_s, 69);
    }
    scene
}

/// Right hand playing ascending scales while the left hand first rests on
/// the low keys, then hovers at `lift_z` so that its fingertips project onto
/// the keys the right hand plays. The left hand rests for `rest_fraction` of
/// the recording.
pub fn floating_hand_scene(cycles: usize, note_s: f64, lift_z: f64, rest_fraction: f64) -> Scene {
    let layout = KeyLayout::standard();
    let seq = scale_fingering(Hand::Right);
    let cycle_s = note_s * seq.len() as f64;
    let mut scene = Scene::new(cycle_s * cycles as f64);
    let rest_until = scene.duration_s * rest_fraction;
    let cam = scene.camera;
    for c in 0..cycles {
        for (k, &(step, finger)) in seq.iter().enumerate() {
            let t = c as f64 * cycle_s + k as f64 * note_s;
            let pitch = white_pitch(&layout, 60, step);
            let left = if t < rest_until {
                HandState::resting(Hand::Left, 10.0)
            } else {
                // Middle fingertip projects onto the played key.
                let target = cam.keyboard_to_camera(KeyboardPoint::new(
                    (layout.white_index_of(pitch).unwrap() as f64 + 0.5) * WHITE_KEY_WIDTH,
                    FINGERTIP_ROW,
                ));
                let anchor = (target.x * lift_z - cam.keyboard_left) / cam.white_key_width() - 0.5;
                HandState::resting(Hand::Left, anchor).lifted(lift_z).spread(0.3)
            };
            scene.play(Hand::Right, finger, pitch, t, note_s, &[left]);
        }
    }
    scene
}

/// Right-hand fingers 2 and 3 both hovering over `pitch` (a white key).
pub fn add_hover_note(scene: &mut Scene, onset_s: f64, dur_s: f64, pitch: u8) {
    let layout = KeyLayout::standard();
    let white = layout.white_index_of(pitch).expect("white key");
    let mut hand = HandState::finger_on(Hand::Right, 3, white);
    // Finger 2 sits 0.2 white keys left of the key center, finger 3 0.2 right.
    hand.tip_offsets[1] = 0.8;
    hand.tip_offsets[2] = 0.2;
    let left = HandState::finger_on(Hand::Left, 5, layout.white_index_of(36).unwrap());
    scene.segments.push(Segment { start_s: onset_s, end_s: onset_s + dur_s, hands: vec![hand, left] });
    scene.notes.push(ScriptedNote { onset_s, offset_s: onset_s + dur_s * 0.9, pitch, velocity: 70, finger: None });
}

/// A note sounding while no hand is in view.
pub fn add_unseen_note(scene: &mut Scene, onset_s: f64, dur_s: f64, pitch: u8) {
    scene.segments.push(Segment { start_s: onset_s, end_s: onset_s + dur_s, hands: Vec::new() });
    scene.notes.push(ScriptedNote { onset_s, offset_s: onset_s + dur_s * 0.9, pitch, velocity: 70, finger: None });
}

/// Random multi-voice performance with tempo changes and pedal events. Notes
/// of the same pitch never overlap, so note pairing is unambiguous.
pub fn random_performance(seed: u64, n_notes: usize) -> Performance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut free_at = [0.0f64; 128];
    let mut notes = Vec::with_capacity(n_notes);
    let mut t = 0.0f64;
    while notes.len() < n_notes {
        t += rng.gen_range(0.0..0.08);
        let pitch = rng.gen_range(21u8..=108);
        let onset = t.max(free_at[usize::from(pitch)] + 0.01);
        let offset = onset + rng.gen_range(0.02..1.5);
        free_at[usize::from(pitch)] = offset;
        notes.push(NoteEvent { note_id: 0, onset_s: onset, offset_s: offset, pitch, velocity: rng.gen_range(1u8..=127) });
    }
    let end = notes.iter().map(|n| n.offset_s).fold(0.0, f64::max);
    let mut pedals = Vec::new();
    let mut pt = rng.gen_range(0.0..2.0);
    while pt < end {
        pedals.push(PedalEvent { time_s: pt, value: rng.gen_range(0u8..=127) });
        pt += rng.gen_range(0.05..2.0);
    }
    let tempo_map = vec![
        TempoChange { tick: 0, us_per_quarter: rng.gen_range(300_000..900_000) },
        TempoChange { tick: rng.gen_range(1_000..20_000), us_per_quarter: rng.gen_range(300_000..900_000) },
    ];
    Performance::new(notes, pedals, 480, tempo_map)
}

/// Random monophonic-ish melody with occasional dyads, for audio tests.
pub fn random_melody(seed: u64, n_notes: usize) -> Performance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0.2;
    let mut notes = Vec::with_capacity(n_notes);
    while notes.len() < n_notes {
        let dur = rng.gen_range(0.15..0.6);
        let pitch = rng.gen_range(48u8..=84);
        let velocity = rng.gen_range(50u8..=110);
        notes.push(NoteEvent { note_id: 0, onset_s: t, offset_s: t + dur, pitch, velocity });
        if rng.gen_bool(0.2) && notes.len() < n_notes {
            let p2 = (pitch + rng.gen_range(3..=7)).min(96);
            notes.push(NoteEvent { note_id: 0, onset_s: t, offset_s: t + dur, pitch: p2, velocity });
        }
        t += dur + rng.gen_range(0.0..0.1);
    }
    Performance::new(notes, Vec::new(), 480, vec![TempoChange { tick: 0, us_per_quarter: DEFAULT_TEMPO_US }])
}

/// Seeded pink noise (Kellet's filter over white noise), roughly unit peak scaled by `amplitude`.
pub fn pink_noise(seed: u64, n: usize, amplitude: f32) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = [0.0f64; 7];
    (0..n)
        .map(|_| {
            let w: f64 = rng.gen_range(-1.0..1.0);
            b[0] = 0.99886 * b[0] + w * 0.0555179;
            b[1] = 0.99332 * b[1] + w * 0.0750759;
            b[2] = 0.96900 * b[2] + w * 0.1538520;
            b[3] = 0.86650 * b[3] + w * 0.3104856;
            b[4] = 0.55000 * b[4] + w * 0.5329522;
            b[5] = -0.7616 * b[5] - w * 0.0168980;
            let pink = b[..6].iter().sum::<f64>() + b[6] + w * 0.5362;
            b[6] = w * 0.115926;
            (pink * 0.11) as f32 * amplitude
        })
        .collect()
}
