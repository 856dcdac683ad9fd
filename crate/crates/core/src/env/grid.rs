use super::Dims;

pub(super) const DIMS: Dims = Dims { m: 2, n: 1, o: 4 };

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Goal {
    /// Top-left corner.
    A,
    /// Bottom-right corner.
    B,
}

/// 3x3 grid starting in the centre. Reaching the goal corner pays +1 and
/// ends the trial; every other step costs 0.05. Actions: N, S, E, W.
///
/// Observation: `[x - 1, y - 1]`.
#[derive(Debug, Clone)]
pub(super) struct Grid {
    goal: (i32, i32),
    pos: (i32, i32),
}

impl Grid {
    pub fn new(goal: Goal) -> Self {
        let goal = match goal {
            Goal::A => (0, 0),
            Goal::B => (2, 2),
        };
        Self { goal, pos: (1, 1) }
    }

    fn observe(&self) -> Vec<f64> {
        vec![(self.pos.0 - 1) as f64, (self.pos.1 - 1) as f64]
    }

    pub fn reset(&mut self) -> Vec<f64> {
        self.pos = (1, 1);
        self.observe()
    }

    pub fn step(&mut self, action: usize) -> (Vec<f64>, f64, bool) {
        let (dx, dy) = [(0, -1), (0, 1), (1, 0), (-1, 0)][action];
        self.pos = ((self.pos.0 + dx).clamp(0, 2), (self.pos.1 + dy).clamp(0, 2));
        if self.pos == self.goal {
            (self.observe(), 1.0, true)
        } else {
            (self.observe(), -0.05, false)
        }
    }
}
