use super::Dims;

pub(super) const DIMS: Dims = Dims { m: 4, n: 1, o: 2 };

/// `(next state, reward)` for every `(state, action)`.
pub const ORACLE_MDP_TABLE: [[(usize, f64); 2]; 4] = [
    [(1, 0.0), (2, 0.2)],
    [(3, 0.0), (0, 0.1)],
    [(0, 0.3), (3, 0.0)],
    [(3, 0.5), (0, 1.0)],
];

pub const ORACLE_MDP_START: usize = 0;

/// Four fully observed states (one-hot), two actions, no terminal state.
#[derive(Debug, Clone)]
pub(super) struct OracleMdp {
    state: usize,
}

impl OracleMdp {
    pub fn new() -> Self {
        Self {
            state: ORACLE_MDP_START,
        }
    }

    fn observe(&self) -> Vec<f64> {
        super::one_hot(self.state, 4)
    }

    pub fn reset(&mut self) -> Vec<f64> {
        self.state = ORACLE_MDP_START;
        self.observe()
    }

    pub fn step(&mut self, action: usize) -> (Vec<f64>, f64, bool) {
        let (next, r) = ORACLE_MDP_TABLE[self.state][action];
        self.state = next;
        (self.observe(), r, false)
    }
}
