use rand::seq::IndexedRandom;
use rand::Rng;

use super::{SleepConfig, WorldModel};
use crate::error::Result;
use crate::history::StepRecord;
use crate::nn::{Activation, Combine, Delay, LinkSpec, NetParams, NetSpec, UnitKind, UnitSpec, WeightRef};

/// Hidden units whose weights all fall below this may be pruned.
const SMALL_WEIGHT: f64 = 0.05;
const NEW_WEIGHT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    AddUnit,
    AddLink,
    PruneLink,
    PruneUnit,
}

fn keep_weights(params: &NetParams, survivors: &[usize]) -> NetParams {
    NetParams {
        weights: survivors.iter().map(|&i| params.weights[i]).collect(),
    }
}

/// Link sources allowed for a new delay-0 link into the hidden layer.
fn feed_sources(spec: &NetSpec) -> Vec<usize> {
    let mut v = spec.inputs();
    v.extend(spec.units_of(UnitKind::Bias));
    v
}

fn has_link(spec: &NetSpec, src: usize, dst: usize, delay: Delay) -> bool {
    spec.links.iter().any(|l| l.source == src && l.target == dst && l.delay == delay)
}

fn link_candidates(spec: &NetSpec) -> Vec<(usize, usize, Delay)> {
    let sources: Vec<usize> = (0..spec.n_units())
        .filter(|&u| spec.units[u].kind != UnitKind::Output)
        .collect();
    let targets: Vec<usize> = (0..spec.n_units())
        .filter(|&u| {
            matches!(spec.units[u].kind, UnitKind::Hidden | UnitKind::Output)
                && spec.units[u].net == Combine::Additive
        })
        .collect();
    let mut out = Vec::new();
    for &dst in &targets {
        for &src in &sources {
            for delay in [Delay::Zero, Delay::One] {
                if has_link(spec, src, dst, delay) {
                    continue;
                }
                let mut trial = spec.clone();
                trial.add_learnable_link(src, dst, delay);
                if trial.validate().is_ok() {
                    out.push((src, dst, delay));
                }
            }
        }
    }
    out
}

/// The learnable link to prune: smallest `|w|`, lowest link index on ties,
/// among links whose removal keeps every output reachable.
fn prune_link_choice(spec: &NetSpec, weights: &[f64]) -> Option<usize> {
    let mut ranked: Vec<(usize, f64)> = spec
        .links
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.weight.index().map(|w| (i, weights[w].abs())))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().map(|(i, _)| i).find(|&i| {
        let shared = spec.links[i].weight;
        let uses = spec.links.iter().filter(|l| l.weight == shared).count();
        if uses != 1 {
            return false;
        }
        let mut trial = spec.clone();
        trial.remove_links(&[i]);
        trial.inputs_reach_outputs() && trial.validate().is_ok()
    })
}

fn prunable_units(spec: &NetSpec, weights: &[f64]) -> Vec<usize> {
    let hidden = spec.units_of(UnitKind::Hidden);
    if hidden.len() <= 1 {
        return Vec::new();
    }
    hidden
        .into_iter()
        .filter(|&u| {
            let touching: Vec<&LinkSpec> =
                spec.links.iter().filter(|l| l.source == u || l.target == u).collect();
            if touching.iter().any(|l| matches!(l.weight, WeightRef::Fixed(_))) {
                return false;
            }
            if !touching.iter().all(|l| weights[l.weight.index().unwrap_or(0)].abs() < SMALL_WEIGHT) {
                return false;
            }
            let mut trial = spec.clone();
            trial.remove_unit(u);
            trial.inputs_reach_outputs() && trial.validate().is_ok()
        })
        .collect()
}

impl WorldModel {
    /// Mutations that can be applied to this model.
    pub fn applicable_mutations(&self) -> Vec<Mutation> {
        let spec = self.spec();
        let w = &self.params.weights;
        let mut v = vec![Mutation::AddUnit];
        if !link_candidates(spec).is_empty() {
            v.push(Mutation::AddLink);
        }
        if prune_link_choice(spec, w).is_some() {
            v.push(Mutation::PruneLink);
        }
        if !prunable_units(spec, w).is_empty() {
            v.push(Mutation::PruneUnit);
        }
        v
    }

    /// Apply one mutation drawn uniformly from the applicable ones.
    pub fn propose_structural_change(&self, rng: &mut impl Rng) -> Result<(WorldModel, Mutation)> {
        let options = self.applicable_mutations();
        let choice = *options.choose(rng).expect("add-unit is always applicable");
        Ok((self.apply_mutation(choice, rng)?, choice))
    }

    pub fn apply_mutation(&self, mutation: Mutation, rng: &mut impl Rng) -> Result<WorldModel> {
        let mut spec = self.spec().clone();
        let mut weights = self.params.weights.clone();
        let small = |rng: &mut dyn rand::RngCore| rng.random_range(-NEW_WEIGHT_SCALE..=NEW_WEIGHT_SCALE);
        match mutation {
            Mutation::AddUnit => {
                let feeds = feed_sources(&spec);
                let hidden = spec.units_of(UnitKind::Hidden);
                let outputs = spec.outputs();
                let u = spec.add_unit(UnitSpec::hidden(Activation::Tanh));
                let mut incoming: Vec<(usize, Delay)> = feeds
                    .iter()
                    .filter(|_| rng.random_bool(0.5))
                    .map(|&s| (s, Delay::Zero))
                    .collect();
                if incoming.is_empty() {
                    incoming.push((*feeds.choose(rng).expect("model has inputs"), Delay::Zero));
                }
                incoming.extend(
                    hidden
                        .iter()
                        .chain([&u])
                        .filter(|_| rng.random_bool(0.5))
                        .map(|&s| (s, Delay::One)),
                );
                let mut outgoing: Vec<usize> = outputs.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
                if outgoing.is_empty() {
                    outgoing.push(*outputs.choose(rng).expect("model has outputs"));
                }
                for (s, d) in incoming {
                    spec.add_learnable_link(s, u, d);
                    weights.push(small(rng));
                }
                for o in outgoing {
                    spec.add_learnable_link(u, o, Delay::Zero);
                    weights.push(small(rng));
                }
            }
            Mutation::AddLink => {
                let cands = link_candidates(&spec);
                if let Some(&(s, d, delay)) = cands.choose(rng) {
                    spec.add_learnable_link(s, d, delay);
                    weights.push(small(rng));
                }
            }
            Mutation::PruneLink => {
                if let Some(i) = prune_link_choice(&spec, &weights) {
                    let survivors = spec.remove_links(&[i]);
                    weights = keep_weights(&self.params, &survivors).weights;
                }
            }
            Mutation::PruneUnit => {
                let units = prunable_units(&spec, &weights);
                if let Some(&u) = units.choose(rng) {
                    let survivors = spec.remove_unit(u);
                    weights = keep_weights(&self.params, &survivors).weights;
                }
            }
        }
        WorldModel::from_parts(self.dims(), spec, NetParams::new(weights)?, self.coding)
    }
}

/// Result of one structural acceptance test.
#[derive(Debug, Clone)]
pub struct Acceptance {
    /// The adopted model: the retrained candidate if accepted, else the
    /// unchanged incumbent.
    pub model: WorldModel,
    pub accepted: bool,
    pub incumbent_total: f64,
    /// Incumbent after the same retraining budget (control arm).
    pub control_total: f64,
    pub candidate_total: f64,
}

/// Retrain the candidate and keep it only if its total code length on the
/// scoring episodes is strictly below both the incumbent's and that of the
/// incumbent retrained with the same budget. The control arm keeps plain
/// extra training from being credited to the structural change.
pub fn accept_if_shorter(
    incumbent: &WorldModel,
    candidate: &WorldModel,
    scoring: &[&[StepRecord]],
    retrain: &SleepConfig,
) -> Result<Acceptance> {
    let incumbent_total = incumbent.code_length_episodes(scoring)?.total;
    let cand = candidate.sleep_train_episodes(scoring, retrain)?;
    let control = incumbent.sleep_train_episodes(scoring, retrain)?;
    let candidate_total = if cand.diverged { f64::INFINITY } else { cand.after.total };
    let control_total = control.after.total;
    let accepted = candidate_total < incumbent_total && candidate_total < control_total;
    Ok(Acceptance {
        model: if accepted { cand.model } else { incumbent.clone() },
        accepted,
        incumbent_total,
        control_total,
        candidate_total,
    })
}
