use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hand {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

impl Hand {
    pub const BOTH: [Hand; 2] = [Hand::Left, Hand::Right];

    pub fn as_char(self) -> char {
        match self {
            Hand::Left => 'L',
            Hand::Right => 'R',
        }
    }

    pub fn other(self) -> Hand {
        match self {
            Hand::Left => Hand::Right,
            Hand::Right => Hand::Left,
        }
    }
}

impl fmt::Display for Hand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for Hand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "L" | "l" | "left" | "Left" => Ok(Hand::Left),
            "R" | "r" | "right" | "Right" => Ok(Hand::Right),
            other => Err(format!("unknown hand {other:?} (expected L or R)")),
        }
    }
}

/// A finger of a specific hand, numbered 1 (thumb) to 5 (little finger).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FingerId {
    pub hand: Hand,
    pub finger: u8,
}

impl FingerId {
    pub fn new(hand: Hand, finger: u8) -> Option<FingerId> {
        (1..=5).contains(&finger).then_some(FingerId { hand, finger })
    }

    /// All ten fingers, left thumb first.
    pub fn all() -> impl Iterator<Item = FingerId> {
        Hand::BOTH.into_iter().flat_map(|hand| (1..=5).map(move |finger| FingerId { hand, finger }))
    }

    /// Dense index 0..10 (left 1-5, then right 1-5).
    pub fn index(self) -> usize {
        let base = match self.hand {
            Hand::Left => 0,
            Hand::Right => 5,
        };
        base + usize::from(self.finger - 1)
    }
}

impl fmt::Display for FingerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.hand, self.finger)
    }
}
