use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnitKind {
    Input,
    Hidden,
    Output,
    /// Constant activation 1.
    Bias,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative expressed through the activation value `y = f(x)`.
    #[inline]
    pub fn derivative(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

/// Net function of a unit, or the way a link enters its target's net.
///
/// A multiplicative unit takes the product of its (multiplicative) inputs; the
/// empty product is 1. An additive unit sums its additive inputs and, if it
/// also has multiplicative links, scales that sum by their product (gating).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Combine {
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Delay {
    /// Reads the source's activation from the current step.
    Zero,
    /// Reads the source's activation from the previous step.
    One,
}

/// A link weight: an index into the learnable weight vector or a constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightRef {
    Learnable(usize),
    Fixed(f64),
}

impl WeightRef {
    #[inline]
    pub fn value(self, weights: &[f64]) -> f64 {
        match self {
            WeightRef::Learnable(i) => weights[i],
            WeightRef::Fixed(v) => v,
        }
    }

    pub fn index(self) -> Option<usize> {
        match self {
            WeightRef::Learnable(i) => Some(i),
            WeightRef::Fixed(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSpec {
    pub kind: UnitKind,
    pub activation: Activation,
    pub net: Combine,
}

impl UnitSpec {
    pub fn input() -> Self {
        Self {
            kind: UnitKind::Input,
            activation: Activation::Identity,
            net: Combine::Additive,
        }
    }

    pub fn bias() -> Self {
        Self {
            kind: UnitKind::Bias,
            activation: Activation::Identity,
            net: Combine::Additive,
        }
    }

    pub fn hidden(activation: Activation) -> Self {
        Self {
            kind: UnitKind::Hidden,
            activation,
            net: Combine::Additive,
        }
    }

    pub fn output(activation: Activation) -> Self {
        Self {
            kind: UnitKind::Output,
            activation,
            net: Combine::Additive,
        }
    }

    pub fn with_net(mut self, net: Combine) -> Self {
        self.net = net;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSpec {
    pub source: usize,
    pub target: usize,
    pub weight: WeightRef,
    pub delay: Delay,
    pub combine: Combine,
}

impl LinkSpec {
    pub fn new(source: usize, target: usize, weight: WeightRef, delay: Delay) -> Self {
        Self {
            source,
            target,
            weight,
            delay,
            combine: Combine::Additive,
        }
    }

    pub fn multiplicative(mut self) -> Self {
        self.combine = Combine::Multiplicative;
        self
    }
}

/// Network topology: units, links, and the number of learnable weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetSpec {
    pub units: Vec<UnitSpec>,
    pub links: Vec<LinkSpec>,
    pub n_weights: usize,
}

impl NetSpec {
    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn add_unit(&mut self, unit: UnitSpec) -> usize {
        self.units.push(unit);
        self.units.len() - 1
    }

    /// Add a link with a fresh learnable weight; returns the weight index.
    pub fn add_learnable_link(&mut self, source: usize, target: usize, delay: Delay) -> usize {
        let idx = self.n_weights;
        self.n_weights += 1;
        self.links
            .push(LinkSpec::new(source, target, WeightRef::Learnable(idx), delay));
        idx
    }

    pub fn add_fixed_link(&mut self, source: usize, target: usize, value: f64, delay: Delay) {
        self.links
            .push(LinkSpec::new(source, target, WeightRef::Fixed(value), delay));
    }

    pub fn units_of(&self, kind: UnitKind) -> Vec<usize> {
        self.units
            .iter()
            .enumerate()
            .filter(|(_, u)| u.kind == kind)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn inputs(&self) -> Vec<usize> {
        self.units_of(UnitKind::Input)
    }

    pub fn outputs(&self) -> Vec<usize> {
        self.units_of(UnitKind::Output)
    }

    pub fn hidden(&self) -> Vec<usize> {
        self.units_of(UnitKind::Hidden)
    }

    /// Check every structural invariant, returning the within-step
    /// evaluation order of non-input, non-bias units on success.
    pub fn validate(&self) -> Result<Vec<usize>> {
        let n_u = self.units.len();
        let mut referenced = vec![false; self.n_weights];
        for (li, l) in self.links.iter().enumerate() {
            if l.source >= n_u || l.target >= n_u {
                return Err(Error::InvalidSpec(format!(
                    "link {li} refers to unit outside 0..{n_u}"
                )));
            }
            let tgt = &self.units[l.target];
            if matches!(tgt.kind, UnitKind::Input | UnitKind::Bias) {
                return Err(Error::InvalidSpec(format!(
                    "link {li} targets {:?} unit {}",
                    tgt.kind, l.target
                )));
            }
            if tgt.net == Combine::Multiplicative && l.combine == Combine::Additive {
                return Err(Error::InvalidSpec(format!(
                    "link {li}: additive link into multiplicative unit {}",
                    l.target
                )));
            }
            match l.weight {
                WeightRef::Learnable(i) => {
                    if i >= self.n_weights {
                        return Err(Error::InvalidSpec(format!(
                            "link {li} weight index {i} >= n_w = {}",
                            self.n_weights
                        )));
                    }
                    referenced[i] = true;
                }
                WeightRef::Fixed(v) => {
                    if !v.is_finite() {
                        return Err(Error::InvalidSpec(format!("link {li} fixed weight {v}")));
                    }
                }
            }
        }
        if let Some(i) = referenced.iter().position(|r| !r) {
            return Err(Error::InvalidSpec(format!(
                "weight index {i} is not used by any link"
            )));
        }
        self.topological_order()
            .ok_or_else(|| Error::InvalidSpec("zero-delay links contain a cycle".into()))
    }

    /// Kahn's algorithm over delay-0 links, lowest unit index first.
    pub(crate) fn topological_order(&self) -> Option<Vec<usize>> {
        let n_u = self.units.len();
        let mut indegree = vec![0usize; n_u];
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n_u];
        for l in &self.links {
            if l.delay == Delay::Zero {
                indegree[l.target] += 1;
                succ[l.source].push(l.target);
            }
        }
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n_u).filter(|&u| indegree[u] == 0).collect();
        let mut order = Vec::with_capacity(n_u);
        while let Some(u) = ready.pop_first() {
            order.push(u);
            for &v in &succ[u] {
                indegree[v] -= 1;
                if indegree[v] == 0 {
                    ready.insert(v);
                }
            }
        }
        if order.len() != n_u {
            return None;
        }
        Some(
            order
                .into_iter()
                .filter(|&u| !matches!(self.units[u].kind, UnitKind::Input | UnitKind::Bias))
                .collect(),
        )
    }

    /// Whether every output unit can be reached from some input unit along
    /// links of any delay.
    pub fn inputs_reach_outputs(&self) -> bool {
        let n_u = self.units.len();
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n_u];
        for l in &self.links {
            succ[l.source].push(l.target);
        }
        let mut seen = vec![false; n_u];
        let mut queue: VecDeque<usize> = self.inputs().into_iter().collect();
        for &u in &queue {
            seen[u] = true;
        }
        while let Some(u) = queue.pop_front() {
            for &v in &succ[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        self.outputs().iter().all(|&o| seen[o])
    }

    /// Learnable weight indices used by links touching `unit`.
    pub fn weights_touching(&self, unit: usize) -> Vec<usize> {
        self.links
            .iter()
            .filter(|l| l.source == unit || l.target == unit)
            .filter_map(|l| l.weight.index())
            .collect()
    }

    /// Remove the given links, dropping weight indices that become unused and
    /// renumbering the rest. Returns the old index of every surviving weight.
    pub fn remove_links(&mut self, doomed: &[usize]) -> Vec<usize> {
        let mut keep = vec![true; self.links.len()];
        for &i in doomed {
            keep[i] = false;
        }
        let mut idx = 0;
        self.links.retain(|_| {
            let k = keep[idx];
            idx += 1;
            k
        });
        self.compact_weights()
    }

    /// Renumber learnable weights densely in order of first use by index.
    pub(crate) fn compact_weights(&mut self) -> Vec<usize> {
        let mut used = vec![false; self.n_weights];
        for l in &self.links {
            if let WeightRef::Learnable(i) = l.weight {
                used[i] = true;
            }
        }
        let mut remap = vec![usize::MAX; self.n_weights];
        let mut survivors = Vec::new();
        for (old, u) in used.iter().enumerate() {
            if *u {
                remap[old] = survivors.len();
                survivors.push(old);
            }
        }
        for l in &mut self.links {
            if let WeightRef::Learnable(i) = &mut l.weight {
                *i = remap[*i];
            }
        }
        self.n_weights = survivors.len();
        survivors
    }

    /// Remove a unit and its links, shifting higher unit ids down by one.
    /// Returns the old index of every surviving weight.
    pub fn remove_unit(&mut self, unit: usize) -> Vec<usize> {
        self.units.remove(unit);
        self.links.retain(|l| l.source != unit && l.target != unit);
        for l in &mut self.links {
            if l.source > unit {
                l.source -= 1;
            }
            if l.target > unit {
                l.target -= 1;
            }
        }
        self.compact_weights()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> NetSpec {
        let mut s = NetSpec::default();
        let i = s.add_unit(UnitSpec::input());
        let h = s.add_unit(UnitSpec::hidden(Activation::Tanh));
        let o = s.add_unit(UnitSpec::output(Activation::Identity));
        s.add_learnable_link(i, h, Delay::Zero);
        s.add_learnable_link(h, o, Delay::Zero);
        s
    }

    #[test]
    fn valid_chain_orders_hidden_before_output() {
        assert_eq!(chain().validate().unwrap(), vec![1, 2]);
    }

    #[test]
    fn zero_delay_cycle_is_rejected_but_delayed_cycle_is_fine() {
        let mut s = chain();
        s.add_learnable_link(2, 1, Delay::One);
        assert!(s.validate().is_ok());
        s.add_learnable_link(2, 1, Delay::Zero);
        assert!(matches!(s.validate(), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn unused_weight_index_is_rejected() {
        let mut s = chain();
        s.n_weights += 1;
        assert!(s.validate().is_err());
    }

    #[test]
    fn links_into_inputs_are_rejected() {
        let mut s = chain();
        s.add_learnable_link(1, 0, Delay::One);
        assert!(s.validate().is_err());
    }

    #[test]
    fn removing_a_unit_renumbers_links_and_weights() {
        let mut s = chain();
        let extra = s.add_unit(UnitSpec::hidden(Activation::Tanh));
        s.add_learnable_link(0, extra, Delay::Zero);
        s.add_learnable_link(extra, 2, Delay::Zero);
        let survivors = s.remove_unit(1);
        assert_eq!(survivors, vec![2, 3]);
        assert_eq!(s.n_units(), 3);
        assert!(s.validate().is_ok());
        assert!(s.links.iter().all(|l| l.source < 3 && l.target < 3));
    }

    #[test]
    fn reachability_detects_disconnection() {
        let mut s = chain();
        assert!(s.inputs_reach_outputs());
        s.remove_links(&[0]);
        assert!(!s.inputs_reach_outputs());
    }
}
