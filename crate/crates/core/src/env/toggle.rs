use super::Dims;

pub(super) const DIMS: Dims = Dims { m: 1, n: 1, o: 2 };

/// A hidden bit that flips every step. It is shown only at t = 1 (as +1 for
/// bit 1, -1 for bit 0). Choosing the action equal to the current bit pays
/// `+1/len`, otherwise `-1/len`, so the best trial return is 1.
#[derive(Debug, Clone)]
pub(super) struct Toggle {
    len: usize,
    bit: usize,
}

impl Toggle {
    pub fn new(len: usize) -> Self {
        Self { len, bit: 0 }
    }

    pub fn reset(&mut self, latent: u64) -> Vec<f64> {
        self.bit = latent as usize;
        vec![if self.bit == 1 { 1.0 } else { -1.0 }]
    }

    pub fn step(&mut self, action: usize) -> (Vec<f64>, f64, bool) {
        let unit = 1.0 / self.len as f64;
        let r = if action == self.bit { unit } else { -unit };
        self.bit = 1 - self.bit;
        (vec![0.0], r, false)
    }
}
