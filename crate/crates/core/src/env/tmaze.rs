use super::Dims;

pub(super) const DIMS: Dims = Dims { m: 4, n: 1, o: 3 };

pub(super) const FORWARD: usize = 0;
pub(super) const LEFT: usize = 1;
pub(super) const RIGHT: usize = 2;

/// Corridor of `length` moves ending at a junction. The cue (+1 means left)
/// is visible only in the first observation. Turning at the junction ends
/// the trial with +1 toward the cued arm and -1 otherwise; turning inside
/// the corridor and moving forward at the junction do nothing. Running out
/// of `patience` steps also ends the trial with -1, so stalling is never
/// safer than guessing (otherwise a memoryless agent could encode the cue
/// as "stall forever" and still average 0.5).
///
/// Observation: `[cue, at_start, in_corridor, at_junction]`.
#[derive(Debug, Clone)]
pub(super) struct TMaze {
    length: usize,
    patience: usize,
    t: usize,
    pos: usize,
    cue: f64,
}

impl TMaze {
    pub fn new(length: usize, patience: usize) -> Self {
        Self {
            length,
            patience,
            t: 0,
            pos: 0,
            cue: 1.0,
        }
    }

    fn observe(&self, cue: f64) -> Vec<f64> {
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        vec![
            cue,
            flag(self.pos == 0),
            flag(self.pos > 0 && self.pos < self.length),
            flag(self.pos == self.length),
        ]
    }

    pub fn reset(&mut self, latent: u64) -> Vec<f64> {
        self.pos = 0;
        self.t = 0;
        self.cue = if latent == 0 { 1.0 } else { -1.0 };
        self.observe(self.cue)
    }

    pub fn step(&mut self, action: usize) -> (Vec<f64>, f64, bool) {
        self.t += 1;
        let at_junction = self.pos == self.length;
        match action {
            FORWARD if !at_junction => self.pos += 1,
            LEFT | RIGHT if at_junction => {
                let went_left = action == LEFT;
                let cued_left = self.cue > 0.0;
                let r = if went_left == cued_left { 1.0 } else { -1.0 };
                return (self.observe(0.0), r, true);
            }
            _ => {}
        }
        if self.t >= self.patience {
            return (self.observe(0.0), -1.0, true);
        }
        (self.observe(0.0), 0.0, false)
    }
}
