use rand::Rng;

use super::Dims;
use crate::rng::{stream, StreamRng};

pub(super) const DIMS: Dims = Dims { m: 3, n: 1, o: 3 };

pub(super) const TO_REGULAR: usize = 0;
pub(super) const TO_NOISE: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Room {
    Junction,
    Regular,
    Noise,
}

/// Quantize to 16-bit resolution on [-1, 1].
fn quantize(x: f64) -> f64 {
    (x * 32767.0).round() / 32767.0
}

/// A junction between two rooms. The regular room replays a fixed cycle of
/// `period` patterns (fixed per environment seed); the noise room shows
/// fresh uniform noise every step. Every step costs `step_cost`.
///
/// Actions: 0 enters or stays in the regular room, 1 the noise room, 2 goes
/// to the junction. Switching rooms requires passing the junction.
///
/// Observation: three values and nothing else, all zero at the junction.
/// The agent is never told which room it is in.
#[derive(Debug, Clone)]
pub(super) struct TwoRoom {
    pattern: Vec<[f64; 3]>,
    cost: f64,
    room: Room,
    phase: usize,
}

impl TwoRoom {
    pub fn new(seed: u64, period: usize, cost: f64) -> Self {
        let mut rng = stream(seed, "two-room-pattern", &[]);
        let pattern = (0..period)
            .map(|_| std::array::from_fn(|_| quantize(rng.random_range(-1.0..=1.0))))
            .collect();
        Self {
            pattern,
            cost,
            room: Room::Junction,
            phase: 0,
        }
    }

    pub fn room(&self) -> Room {
        self.room
    }

    pub fn pattern(&self) -> &[[f64; 3]] {
        &self.pattern
    }

    fn observe(&self, rng: &mut StreamRng) -> Vec<f64> {
        match self.room {
            Room::Junction => vec![0.0; 3],
            Room::Regular => self.pattern[self.phase % self.pattern.len()].to_vec(),
            Room::Noise => (0..3).map(|_| quantize(rng.random_range(-1.0..=1.0))).collect(),
        }
    }

    pub fn reset(&mut self) -> Vec<f64> {
        self.room = Room::Junction;
        self.phase = 0;
        vec![0.0; 3]
    }

    pub fn step(&mut self, action: usize, rng: &mut StreamRng) -> (Vec<f64>, f64, bool) {
        self.room = match (self.room, action) {
            (Room::Junction, TO_REGULAR) => {
                self.phase = 0;
                Room::Regular
            }
            (Room::Junction, TO_NOISE) => Room::Noise,
            (Room::Regular, TO_REGULAR) => {
                self.phase += 1;
                Room::Regular
            }
            (Room::Noise, TO_NOISE) => Room::Noise,
            _ => Room::Junction,
        };
        (self.observe(rng), -self.cost, false)
    }
}
