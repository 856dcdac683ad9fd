use super::Dims;

pub(super) const DIMS: Dims = Dims { m: 2, n: 1, o: 2 };

/// Shows a bit at t = 1 and a go signal at t = delay + 1, where the action
/// must name the bit (action 0 for +1, action 1 for -1). Reward +1 or -1.
///
/// Observation: `[cue, go]`.
#[derive(Debug, Clone)]
pub(super) struct DelayedRecall {
    delay: usize,
    t: usize,
    bit: f64,
}

impl DelayedRecall {
    pub fn new(delay: usize) -> Self {
        Self {
            delay,
            t: 1,
            bit: 1.0,
        }
    }

    fn go(&self) -> f64 {
        if self.t == self.delay + 1 {
            1.0
        } else {
            0.0
        }
    }

    pub fn reset(&mut self, latent: u64) -> Vec<f64> {
        self.t = 1;
        self.bit = if latent == 0 { 1.0 } else { -1.0 };
        vec![self.bit, self.go()]
    }

    pub fn step(&mut self, action: usize) -> (Vec<f64>, f64, bool) {
        if self.t == self.delay + 1 {
            let named = if action == 0 { 1.0 } else { -1.0 };
            let r = if named == self.bit { 1.0 } else { -1.0 };
            self.t += 1;
            return (vec![0.0, 0.0], r, true);
        }
        self.t += 1;
        (vec![0.0, self.go()], 0.0, false)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{optimal_return, Env, EnvSpec};

    #[test]
    fn optimal_return_is_one() {
        for d in [0, 3, 8] {
            assert_eq!(optimal_return(&EnvSpec::delayed_recall(d)).unwrap(), 1.0);
        }
    }

    #[test]
    fn go_signal_arrives_after_the_delay() {
        let mut env = Env::new(&EnvSpec::delayed_recall(3)).unwrap();
        let first = env.reset(0);
        assert_eq!(first.in_vec[1], 0.0);
        let gos: Vec<f64> = (0..3).map(|_| env.step_action(1).unwrap().obs.in_vec[1]).collect();
        assert_eq!(gos, vec![0.0, 0.0, 1.0]);
        assert!(env.step_action(0).unwrap().done);
    }

    #[test]
    fn later_observations_do_not_depend_on_the_bit() {
        let mut a = Env::new(&EnvSpec::delayed_recall(4)).unwrap();
        let mut b = a.clone();
        let ca = (0..).map(|s| a.reset(s)).find(|o| o.in_vec[0] > 0.0).unwrap();
        let cb = (0..).map(|s| b.reset(s)).find(|o| o.in_vec[0] < 0.0).unwrap();
        assert_ne!(ca.in_vec, cb.in_vec);
        for _ in 0..4 {
            assert_eq!(a.step_action(0).unwrap().obs.in_vec, b.step_action(0).unwrap().obs.in_vec);
        }
    }
}
