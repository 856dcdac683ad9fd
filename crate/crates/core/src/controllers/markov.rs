use crate::error::{Error, Result};
use crate::world_model::WorldModel;

/// `(sense(t), hidden(t), pred(t))`: M used as a preprocessor for a flat
/// reinforcement learner.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovState(pub Vec<f64>);

impl MarkovState {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Assemble the Markov state from the current sense vector and M's state
/// (zeros at a trial start).
pub fn markov_state(model: &WorldModel, sense_t: &[f64], m_state: &[f64]) -> Result<MarkovState> {
    let d = model.dims();
    if sense_t.len() != d.sense() {
        return Err(Error::Dimension {
            context: "sense vector",
            expected: d.sense(),
            got: sense_t.len(),
        });
    }
    if m_state.len() != model.network().n_units() {
        return Err(Error::Dimension {
            context: "model state",
            expected: model.network().n_units(),
            got: m_state.len(),
        });
    }
    let mut v = sense_t.to_vec();
    v.extend(model.hidden(m_state));
    v.extend(model.pred(m_state));
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("markov state component {i}")));
    }
    Ok(MarkovState(v))
}

/// Length `2m + 2n + h` of a Markov state.
pub fn markov_len(model: &WorldModel) -> usize {
    2 * model.dims().sense() + model.h()
}

/// Map feature indices of a Markov state built with `new_h` hidden units to
/// those of one built with `old_h`: sense and pred keep their meaning, hidden
/// features keep their slot when it still exists.
pub fn remap_features(sense: usize, old_h: usize, new_h: usize) -> Vec<Option<usize>> {
    let mut map: Vec<Option<usize>> = (0..sense).map(Some).collect();
    map.extend((0..new_h).map(|j| (j < old_h).then_some(sense + j)));
    map.extend((0..sense).map(|i| Some(sense + old_h + i)));
    map
}
