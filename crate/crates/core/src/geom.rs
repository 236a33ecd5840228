//! Grid geometry: cell vectors, cardinal directions, quarter rotations.
//!
//! The coordinate convention is x east, y south: north is `(0, -1)` and
//! south is `(0, 1)`. Task requirements at `(0, 1)` therefore sit directly
//! south of an agent.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A 2D integer vector, used both for absolute cells and relative offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: i32,
    pub y: i32,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0, y: 0 };

    pub const fn new(x: i32, y: i32) -> Self {
        Vec2 { x, y }
    }

    /// Manhattan length.
    pub fn manhattan(self) -> u32 {
        self.x.unsigned_abs() + self.y.unsigned_abs()
    }

    pub fn manhattan_to(self, other: Vec2) -> u32 {
        (self - other).manhattan()
    }

    /// 4-connected neighbours in `Direction::ALL` order.
    pub fn neighbours(self) -> [Vec2; 4] {
        [
            self + Direction::North.delta(),
            self + Direction::East.delta(),
            self + Direction::South.delta(),
            self + Direction::West.delta(),
        ]
    }
}

// Ordering is row-major (y, then x); every deterministic tie-break in the
// crate leans on this.
impl Ord for Vec2 {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Vec2 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Cardinal movement direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    pub fn delta(self) -> Vec2 {
        match self {
            Direction::North => Vec2::new(0, -1),
            Direction::East => Vec2::new(1, 0),
            Direction::South => Vec2::new(0, 1),
            Direction::West => Vec2::new(-1, 0),
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::North => Direction::South,
            Direction::East => Direction::West,
            Direction::South => Direction::North,
            Direction::West => Direction::East,
        }
    }

    /// Direction whose delta equals `v`, if `v` is a unit offset.
    pub fn from_delta(v: Vec2) -> Option<Direction> {
        Direction::ALL.into_iter().find(|d| d.delta() == v)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Direction::North => "north",
            Direction::East => "east",
            Direction::South => "south",
            Direction::West => "west",
        };
        f.write_str(s)
    }
}

/// Quarter-turn rotation sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rotation {
    #[serde(rename = "cw")]
    Clockwise,
    #[serde(rename = "ccw")]
    CounterClockwise,
}

impl Rotation {
    /// Rotate an offset by a quarter turn. With north at -y, clockwise maps
    /// `(x, y)` to `(-y, x)`: a block hanging south swings to the west.
    pub fn rotate(self, v: Vec2) -> Vec2 {
        match self {
            Rotation::Clockwise => Vec2::new(-v.y, v.x),
            Rotation::CounterClockwise => Vec2::new(v.y, -v.x),
        }
    }

    pub fn opposite(self) -> Rotation {
        match self {
            Rotation::Clockwise => Rotation::CounterClockwise,
            Rotation::CounterClockwise => Rotation::Clockwise,
        }
    }
}

/// Serde adapter for maps keyed by [`Vec2`]: JSON objects need string keys,
/// so these maps travel as arrays of pairs.
pub mod serde_vec2_map {
    use std::collections::BTreeMap;

    use serde::de::Deserializer;
    use serde::ser::Serializer;
    use serde::{Deserialize, Serialize};

    use super::Vec2;

    pub fn serialize<V: Serialize, S: Serializer>(
        map: &BTreeMap<Vec2, V>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        let pairs: Vec<(&Vec2, &V)> = map.iter().collect();
        pairs.serialize(serializer)
    }

    pub fn deserialize<'de, V: Deserialize<'de>, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<BTreeMap<Vec2, V>, D::Error> {
        let pairs: Vec<(Vec2, V)> = Vec::deserialize(deserializer)?;
        Ok(pairs.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clockwise_sends_south_to_west() {
        let south = Vec2::new(0, 1);
        assert_eq!(Rotation::Clockwise.rotate(south), Vec2::new(-1, 0));
        assert_eq!(Rotation::CounterClockwise.rotate(south), Vec2::new(1, 0));
    }

    #[test]
    fn four_quarter_turns_are_identity() {
        let mut v = Vec2::new(2, 3);
        for _ in 0..4 {
            v = Rotation::Clockwise.rotate(v);
        }
        assert_eq!(v, Vec2::new(2, 3));
    }

    #[test]
    fn ordering_is_row_major() {
        assert!(Vec2::new(5, 0) < Vec2::new(0, 1));
        assert!(Vec2::new(0, 1) < Vec2::new(1, 1));
    }

    #[test]
    fn opposite_rotations_cancel() {
        let v = Vec2::new(-1, 2);
        let r = Rotation::Clockwise;
        assert_eq!(r.opposite().rotate(r.rotate(v)), v);
    }
}
