//! 88-key layout in normalized keyboard space.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::homography::KeyboardPoint;

pub const KEYBOARD_WIDTH: f64 = 1024.0;
pub const KEYBOARD_HEIGHT: f64 = 125.0;
pub const WHITE_KEY_COUNT: usize = 52;
pub const BLACK_KEY_COUNT: usize = 36;
pub const WHITE_KEY_WIDTH: f64 = KEYBOARD_WIDTH / WHITE_KEY_COUNT as f64;
/// Black-key width relative to a white key (13.7 mm vs 23.5 mm).
pub const BLACK_WIDTH_RATIO: f64 = 13.7 / 23.5;
/// Black keys cover this fraction of the keybed depth, from the far edge.
pub const BLACK_DEPTH_RATIO: f64 = 0.6;

const LOWEST: u8 = 21;
const HIGHEST: u8 = 108;

pub fn is_black_pitch(pitch: u8) -> bool {
    matches!(pitch % 12, 1 | 3 | 6 | 8 | 10)
}

const NAMES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

/// Scientific pitch name, e.g. 60 -> "C4".
pub fn pitch_name(pitch: u8) -> String {
    let octave = i32::from(pitch) / 12 - 1;
    format!("{}{}", NAMES[usize::from(pitch % 12)], octave)
}

/// Axis-aligned rectangle, closed on all sides for distance purposes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn distance(&self, p: KeyboardPoint) -> f64 {
        let dx = (self.x0 - p.x).max(0.0).max(p.x - self.x1);
        let dy = (self.y0 - p.y).max(0.0).max(p.y - self.y1);
        dx.hypot(dy)
    }

    pub fn center(&self) -> KeyboardPoint {
        KeyboardPoint::new((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }
}

/// One key's footprint. White keys are the union of a notched upper part and
/// a full-width front part; black keys are a single rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRegion {
    pub pitch: u8,
    pub black: bool,
    pub parts: Vec<Rect>,
}

impl KeyRegion {
    /// Euclidean distance from `p` to the key footprint (0 inside).
    pub fn distance(&self, p: KeyboardPoint) -> f64 {
        self.parts.iter().map(|r| r.distance(p)).fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: KeyboardPoint) -> bool {
        self.distance(p) == 0.0
    }

    /// A point guaranteed to lie inside the key (front part of white keys).
    pub fn anchor(&self) -> KeyboardPoint {
        self.parts.last().map(Rect::center).expect("key has at least one part")
    }
}

/// Where a keyboard point falls relative to the key strips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyLocation {
    pub white_index: usize,
    pub containing_key: Option<u8>,
    /// Distance to the nearest boundary of the white strip `white_index`, in
    /// white-key widths; negative when the point lies outside that strip.
    pub boundary_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyLayout {
    keys: Vec<KeyRegion>,
    white_pitches: Vec<u8>,
}

impl Default for KeyLayout {
    fn default() -> Self {
        KeyLayout::standard()
    }
}

impl KeyLayout {
    pub fn standard() -> Self {
        let white_pitches: Vec<u8> = (LOWEST..=HIGHEST).filter(|&p| !is_black_pitch(p)).collect();
        let black_w = WHITE_KEY_WIDTH * BLACK_WIDTH_RATIO;
        let black_h = KEYBOARD_HEIGHT * BLACK_DEPTH_RATIO;

        let mut keys = Vec::with_capacity(88);
        for pitch in LOWEST..=HIGHEST {
            if is_black_pitch(pitch) {
                // Centered on the boundary with the next white key.
                let right_white = white_pitches.iter().position(|&w| w == pitch + 1).expect("black key below a white key");
                let boundary = right_white as f64 * WHITE_KEY_WIDTH;
                keys.push(KeyRegion {
                    pitch,
                    black: true,
                    parts: vec![Rect { x0: boundary - black_w / 2.0, y0: 0.0, x1: boundary + black_w / 2.0, y1: black_h }],
                });
            } else {
                let idx = white_pitches.iter().position(|&w| w == pitch).unwrap();
                let x0 = idx as f64 * WHITE_KEY_WIDTH;
                let x1 = x0 + WHITE_KEY_WIDTH;
                let left_notch = if pitch > LOWEST && is_black_pitch(pitch - 1) { black_w / 2.0 } else { 0.0 };
                let right_notch = if pitch < HIGHEST && is_black_pitch(pitch + 1) { black_w / 2.0 } else { 0.0 };
                keys.push(KeyRegion {
                    pitch,
                    black: false,
                    parts: vec![
                        Rect { x0: x0 + left_notch, y0: 0.0, x1: x1 - right_notch, y1: black_h },
                        Rect { x0, y0: black_h, x1, y1: KEYBOARD_HEIGHT },
                    ],
                });
            }
        }
        KeyLayout { keys, white_pitches }
    }

    pub fn keys(&self) -> &[KeyRegion] {
        &self.keys
    }

    pub fn key(&self, pitch: u8) -> Option<&KeyRegion> {
        if (LOWEST..=HIGHEST).contains(&pitch) {
            Some(&self.keys[usize::from(pitch - LOWEST)])
        } else {
            None
        }
    }

    pub fn white_pitches(&self) -> &[u8] {
        &self.white_pitches
    }

    pub fn white_pitch(&self, white_index: usize) -> u8 {
        self.white_pitches[white_index]
    }

    /// White-key index of a pitch; black keys report the white key to their left.
    pub fn white_index_of(&self, pitch: u8) -> Option<usize> {
        let pitch = if is_black_pitch(pitch) { pitch.checked_sub(1)? } else { pitch };
        self.white_pitches.iter().position(|&w| w == pitch)
    }

    pub fn white_index_at(&self, x: f64) -> usize {
        let idx = (x / WHITE_KEY_WIDTH).floor();
        if idx.is_nan() || idx < 0.0 {
            0
        } else {
            (idx as usize).min(WHITE_KEY_COUNT - 1)
        }
    }

    pub fn locate_key(&self, pt: KeyboardPoint) -> KeyLocation {
        let white_index = self.white_index_at(pt.x);
        let left = white_index as f64 * WHITE_KEY_WIDTH;
        let boundary_distance = (pt.x - left).min(left + WHITE_KEY_WIDTH - pt.x) / WHITE_KEY_WIDTH;

        let containing_key = if pt.on_keyboard() {
            let black = self.keys.iter().filter(|k| k.black).find(|k| {
                let r = k.parts[0];
                pt.x >= r.x0 && pt.x < r.x1 && pt.y >= r.y0 && pt.y < r.y1
            });
            Some(black.map(|k| k.pitch).unwrap_or(self.white_pitches[white_index]))
        } else {
            None
        };
        KeyLocation { white_index, containing_key, boundary_distance }
    }

    /// White keys within `range` of `white_index`, plus the black keys that sit
    /// between two consecutive selected white keys.
    pub fn candidate_pitches(&self, white_index: usize, range: usize) -> BTreeSet<u8> {
        let lo = white_index.saturating_sub(range);
        let hi = (white_index + range).min(WHITE_KEY_COUNT - 1);
        let mut out = BTreeSet::new();
        for idx in lo..=hi.max(lo) {
            let w = self.white_pitches[idx];
            out.insert(w);
            if idx < hi && is_black_pitch(w + 1) {
                out.insert(w + 1);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_pitch_range() {
        let layout = KeyLayout::standard();
        assert_eq!(layout.keys().len(), 88);
        assert_eq!(layout.keys().iter().filter(|k| !k.black).count(), WHITE_KEY_COUNT);
        assert_eq!(layout.keys().iter().filter(|k| k.black).count(), BLACK_KEY_COUNT);
        let pitches: BTreeSet<u8> = layout.keys().iter().map(|k| k.pitch).collect();
        assert_eq!(pitches, (21..=108).collect());
    }

    #[test]
    fn locate_examples() {
        let layout = KeyLayout::standard();
        let mid = layout.locate_key(KeyboardPoint::new(512.0, 100.0));
        assert_eq!(mid.white_index, 26);
        assert_eq!(mid.containing_key, Some(65));
        let first = layout.locate_key(KeyboardPoint::new(0.0, 100.0));
        assert_eq!((first.white_index, first.containing_key), (0, Some(21)));
        let last = layout.locate_key(KeyboardPoint::new(1023.9, 100.0));
        assert_eq!((last.white_index, last.containing_key), (51, Some(108)));
    }

    #[test]
    fn locate_black_key_and_off_keyboard() {
        let layout = KeyLayout::standard();
        // Boundary between C4 (index 23) and D4 (index 24), upper region -> C#4.
        let p = KeyboardPoint::new(24.0 * WHITE_KEY_WIDTH, 30.0);
        assert_eq!(layout.locate_key(p).containing_key, Some(61));
        // Same x near the player -> white key D4 (boundary belongs to the right strip).
        let p = KeyboardPoint::new(24.0 * WHITE_KEY_WIDTH, 110.0);
        assert_eq!(layout.locate_key(p).containing_key, Some(62));
        let off = layout.locate_key(KeyboardPoint::new(-40.0, 50.0));
        assert_eq!((off.white_index, off.containing_key), (0, None));
        assert!(off.boundary_distance < 0.0);
        let below = layout.locate_key(KeyboardPoint::new(500.0, 130.0));
        assert_eq!(below.containing_key, None);
    }

    #[test]
    fn white_sequence_oracle() {
        // Enumerate white keys by walking the chromatic scale from A0.
        let mut whites = Vec::new();
        let mut p = 21u8;
        while p <= 108 {
            if ![1, 3, 6, 8, 10].contains(&(p % 12)) {
                whites.push(p);
            }
            p += 1;
        }
        assert_eq!(whites.len(), 52);
        assert_eq!(whites[26], 65);
        assert_eq!(KeyLayout::standard().white_pitches(), &whites[..]);
        assert_eq!(pitch_name(65), "F4");
        assert_eq!(pitch_name(21), "A0");
        assert_eq!(pitch_name(108), "C8");
    }

    #[test]
    fn candidates_examples() {
        let layout = KeyLayout::standard();
        let c: Vec<u8> = layout.candidate_pitches(26, 2).into_iter().collect();
        assert_eq!(c, vec![62, 63, 64, 65, 66, 67, 68, 69]);
        // Clamped at the bottom: indices 0..=2 are A0, B0, C1 with A#0 between A0 and B0.
        let c: Vec<u8> = layout.candidate_pitches(0, 2).into_iter().collect();
        assert_eq!(c, vec![21, 22, 23, 24]);
        for idx in 0..52 {
            let c: Vec<u8> = layout.candidate_pitches(idx, 0).into_iter().collect();
            assert_eq!(c, vec![layout.white_pitch(idx)]);
        }
        let top: Vec<u8> = layout.candidate_pitches(51, 1).into_iter().collect();
        assert_eq!(top, vec![107, 108]);
    }

    #[test]
    fn white_strips_partition_the_keyboard() {
        let layout = KeyLayout::standard();
        for i in 0..10_000 {
            let x = i as f64 * KEYBOARD_WIDTH / 10_000.0;
            let idx = layout.white_index_at(x);
            let lo = idx as f64 * WHITE_KEY_WIDTH;
            assert!(x >= lo && x < lo + WHITE_KEY_WIDTH);
        }
    }

    #[test]
    fn white_key_footprint_has_notches() {
        let layout = KeyLayout::standard();
        let c4 = layout.key(60).unwrap();
        let x_boundary = 24.0 * WHITE_KEY_WIDTH;
        // Upper part stops short of the C#4 key, front part reaches the boundary.
        assert!(c4.distance(KeyboardPoint::new(x_boundary - 1.0, 10.0)) > 0.0);
        assert_eq!(c4.distance(KeyboardPoint::new(x_boundary - 1.0, 100.0)), 0.0);
        assert!(c4.contains(c4.anchor()));
        let cs4 = layout.key(61).unwrap();
        assert!(cs4.contains(KeyboardPoint::new(x_boundary, 10.0)));
        assert_eq!(layout.white_index_of(61), Some(23));
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn candidates_monotone_in_range(idx in 0usize..52, r in 0usize..10) {
            let layout = KeyLayout::standard();
            let small = layout.candidate_pitches(idx, r);
            let big = layout.candidate_pitches(idx, r + 1);
            prop_assert!(small.is_subset(&big));
        }

        #[test]
        fn every_on_keyboard_point_has_one_key(x in 0.0..1024.0f64, y in 0.0..125.0f64) {
            let layout = KeyLayout::standard();
            let loc = layout.locate_key(KeyboardPoint::new(x, y));
            let key = loc.containing_key.unwrap();
            prop_assert!(layout.key(key).unwrap().contains(KeyboardPoint::new(x, y)));
        }
    }
}
