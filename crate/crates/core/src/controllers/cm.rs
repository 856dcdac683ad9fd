use rand::seq::SliceRandom;
use rand::Rng;

use super::Genome;
use crate::env::{argmax, one_hot};
use crate::error::{Error, Result};
use crate::nn::{Activation, Combine, Delay, Injection, NetSpec, Network, UnitKind, UnitSpec, WeightRef};
use crate::world_model::{ModelState, WorldModel};

/// Shape of the controller network C and its interface to M.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CmConfig {
    pub c_hidden: usize,
    /// Delay-1 links among C's hidden units.
    pub recurrent: bool,
    /// Number of M-hidden -> C links (answers read by C).
    pub k_in: usize,
    /// Number of C -> M-hidden links (queries written into M).
    pub k_out: usize,
    /// How C's writes enter M's hidden units.
    pub injection: Combine,
}

impl Default for CmConfig {
    fn default() -> Self {
        Self {
            c_hidden: 4,
            recurrent: true,
            k_in: 4,
            k_out: 4,
            injection: Combine::Additive,
        }
    }
}

/// A C -> M link: C unit `c_unit` writes into M's hidden unit number
/// `m_hidden` (taken modulo M's hidden count).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceLink {
    pub c_unit: usize,
    pub m_hidden: usize,
    /// `Learnable(k)` indexes the interface segment of the genome.
    pub weight: WeightRef,
}

/// The coupled controller: C's network, its read links from M (modelled as
/// extra C inputs carrying M's previous hidden activations), its write links
/// into M, and the gate unit scaling M's environmental input.
#[derive(Debug, Clone)]
pub struct CmSpec {
    c_net: Network,
    pub cfg: CmConfig,
    pub sense_len: usize,
    pub n_actions: usize,
    /// `(C input unit, M hidden index)` for each answer channel.
    pub answer_inputs: Vec<(usize, usize)>,
    /// C weight indices of the M -> C links.
    pub interface_in: Vec<usize>,
    pub interface_out: Vec<InterfaceLink>,
    pub action_units: Vec<usize>,
    pub gate_unit: usize,
    pub hidden_units: Vec<usize>,
    n_interface_weights: usize,
}

/// Joint activations of C and M.
#[derive(Debug, Clone, PartialEq)]
pub struct CmState {
    pub c: Vec<f64>,
    pub m: ModelState,
}

impl CmSpec {
    pub fn new(sense_len: usize, n_actions: usize, cfg: CmConfig) -> Result<Self> {
        if cfg.c_hidden == 0 && (cfg.k_in > 0 || cfg.k_out > 0) {
            return Err(Error::Config("interface links need C hidden units".into()));
        }
        let mut s = NetSpec::default();
        let sense: Vec<usize> = (0..sense_len).map(|_| s.add_unit(UnitSpec::input())).collect();
        let answers: Vec<usize> = (0..cfg.k_in).map(|_| s.add_unit(UnitSpec::input())).collect();
        let bias = s.add_unit(UnitSpec::bias());
        let hidden: Vec<usize> = (0..cfg.c_hidden)
            .map(|_| s.add_unit(UnitSpec::hidden(Activation::Tanh)))
            .collect();
        let actions: Vec<usize> = (0..n_actions)
            .map(|_| s.add_unit(UnitSpec::output(Activation::Identity)))
            .collect();
        let gate = s.add_unit(UnitSpec::output(Activation::Sigmoid));
        for &h in &hidden {
            for &i in sense.iter().chain([&bias]) {
                s.add_learnable_link(i, h, Delay::Zero);
            }
            if cfg.recurrent {
                for &k in &hidden {
                    s.add_learnable_link(k, h, Delay::One);
                }
            }
        }
        let interface_in = answers
            .iter()
            .enumerate()
            .map(|(i, &a)| s.add_learnable_link(a, hidden[i % hidden.len()], Delay::Zero))
            .collect();
        for &a in &actions {
            for &i in hidden.iter().chain(&sense).chain([&bias]) {
                s.add_learnable_link(i, a, Delay::Zero);
            }
        }
        for &i in hidden.iter().chain([&bias]) {
            s.add_learnable_link(i, gate, Delay::Zero);
        }
        let interface_out = (0..cfg.k_out)
            .map(|k| InterfaceLink {
                c_unit: hidden[k % hidden.len()],
                m_hidden: k,
                weight: WeightRef::Learnable(k),
            })
            .collect();
        Ok(Self {
            c_net: Network::new(s)?,
            cfg,
            sense_len,
            n_actions,
            answer_inputs: answers.iter().enumerate().map(|(i, &a)| (a, i)).collect(),
            interface_in,
            interface_out,
            action_units: actions,
            gate_unit: gate,
            hidden_units: hidden,
            n_interface_weights: cfg.k_out,
        })
    }

    pub fn c_spec(&self) -> &NetSpec {
        self.c_net.spec()
    }

    pub fn c_network(&self) -> &Network {
        &self.c_net
    }

    /// Number of searchable weights.
    pub fn genome_len(&self) -> usize {
        self.c_net.n_weights() + self.n_interface_weights
    }

    fn split<'g>(&self, genome: &'g [f64]) -> Result<(&'g [f64], &'g [f64])> {
        if genome.len() != self.genome_len() {
            return Err(Error::Dimension {
                context: "CM genome",
                expected: self.genome_len(),
                got: genome.len(),
            });
        }
        Ok(genome.split_at(self.c_net.n_weights()))
    }

    /// Genome indices of the M -> C read weights.
    pub fn interface_in_genes(&self) -> &[usize] {
        &self.interface_in
    }

    /// Genome indices of the C -> M write weights.
    pub fn interface_out_genes(&self) -> Vec<usize> {
        let base = self.c_net.n_weights();
        self.interface_out.iter().filter_map(|l| l.weight.index().map(|k| base + k)).collect()
    }

    pub fn zero_state(&self, model: &WorldModel) -> CmState {
        CmState {
            c: self.c_net.zero_state(),
            m: model.zero_state(),
        }
    }

    /// C's input: sense followed by the answers read from M's state.
    pub fn c_input(&self, model: &WorldModel, sense_t: &[f64], m_state: &[f64]) -> Vec<f64> {
        let mut input = sense_t.to_vec();
        let hidden = model.hidden_units();
        input.extend(self.answer_inputs.iter().map(|&(_, j)| m_state[hidden[j % hidden.len()]]));
        input
    }

    /// Injection vector for M given C's new activations.
    pub fn injection_values(&self, genome_iface: &[f64], model: &WorldModel, c_act: &[f64]) -> Vec<f64> {
        let neutral = match self.cfg.injection {
            Combine::Additive => 0.0,
            Combine::Multiplicative => 1.0,
        };
        let mut values = vec![neutral; model.network().n_units()];
        let hidden = model.hidden_units();
        for l in &self.interface_out {
            let target = hidden[l.m_hidden % hidden.len()];
            let x = l.weight.value(genome_iface) * c_act[l.c_unit];
            match self.cfg.injection {
                Combine::Additive => values[target] += x,
                Combine::Multiplicative => values[target] *= x,
            }
        }
        values
    }
}

/// Result of one joint CM step.
#[derive(Debug, Clone, PartialEq)]
pub struct CmStep {
    pub state: CmState,
    pub action: usize,
    pub gate: f64,
}

/// One step of the coupled system. C reads `sense_t` and M's previous hidden
/// activations and picks an action; M then reads `gate * all(t)` plus C's
/// writes. M's weights are only read.
pub fn cm_forward(
    cm: &CmSpec,
    genome: &[f64],
    model: &WorldModel,
    state: &CmState,
    sense_t: &[f64],
    force_gate: Option<f64>,
) -> Result<CmStep> {
    let (c_w, iface) = cm.split(genome)?;
    if sense_t.len() != cm.sense_len {
        return Err(Error::Dimension {
            context: "CM sense",
            expected: cm.sense_len,
            got: sense_t.len(),
        });
    }
    let c_in = cm.c_input(model, sense_t, &state.m);
    let c = cm.c_net.forward_step(c_w, &state.c, &c_in)?;
    let scores: Vec<f64> = cm.action_units.iter().map(|&u| c[u]).collect();
    let action = argmax(&scores);
    let gate = force_gate.unwrap_or(c[cm.gate_unit]);
    let mut all_t = sense_t.to_vec();
    all_t.extend(one_hot(action, cm.n_actions));
    all_t.iter_mut().for_each(|x| *x *= gate);
    let m = if cm.interface_out.is_empty() && cm.cfg.injection == Combine::Additive {
        model.step(&state.m, &all_t)?
    } else {
        let values = cm.injection_values(iface, model, &c);
        let inj = Injection {
            values: &values,
            combine: cm.cfg.injection,
        };
        model.step_injected(&state.m, &all_t, &inj)?
    };
    Ok(CmStep {
        state: CmState { c, m },
        action,
        gate,
    })
}

/// `k` internal steps with the environmental input held at `last_sense` and
/// the proposed actions fed to M but never executed.
pub fn think_steps(
    cm: &CmSpec,
    genome: &[f64],
    model: &WorldModel,
    k: usize,
    state: &CmState,
    last_sense: &[f64],
    force_gate: Option<f64>,
) -> Result<CmState> {
    let mut s = state.clone();
    for _ in 0..k {
        s = cm_forward(cm, genome, model, &s, last_sense, force_gate)?.state;
    }
    Ok(s)
}

/// Freeze every current weight of C (including its interface weights) at
/// its genome value and append `extra_units` fresh hidden units plus
/// `extra_links` fresh links. The returned template is all zeros, so the
/// grown controller starts out behaving exactly like the frozen one.
pub fn freeze_and_grow(
    cm: &CmSpec,
    genome: &[f64],
    extra_units: usize,
    extra_links: usize,
    rng: &mut impl Rng,
) -> Result<(CmSpec, Genome)> {
    let (c_w, iface) = cm.split(genome)?;
    let mut s = cm.c_spec().clone();
    for l in &mut s.links {
        if let WeightRef::Learnable(i) = l.weight {
            l.weight = WeightRef::Fixed(c_w[i]);
        }
    }
    s.n_weights = 0;
    let interface_out: Vec<InterfaceLink> = cm
        .interface_out
        .iter()
        .map(|l| InterfaceLink {
            weight: WeightRef::Fixed(l.weight.value(iface)),
            ..*l
        })
        .collect();
    let inputs = s.inputs();
    let bias = s.units_of(UnitKind::Bias);
    let outputs = s.outputs();
    let mut hidden = cm.hidden_units.clone();
    for _ in 0..extra_units {
        let u = s.add_unit(UnitSpec::hidden(Activation::Tanh));
        for &i in inputs.iter().chain(&bias) {
            s.add_learnable_link(i, u, Delay::Zero);
        }
        if cm.cfg.recurrent {
            s.add_learnable_link(u, u, Delay::One);
        }
        for &o in &outputs {
            s.add_learnable_link(u, o, Delay::Zero);
        }
        hidden.push(u);
    }
    let mut candidates = Vec::new();
    for dst in hidden.iter().chain(&outputs).copied() {
        for src in 0..s.n_units() {
            if s.units[src].kind == UnitKind::Output {
                continue;
            }
            for delay in [Delay::Zero, Delay::One] {
                if s.links.iter().any(|l| l.source == src && l.target == dst && l.delay == delay) {
                    continue;
                }
                let mut trial = s.clone();
                trial.add_learnable_link(src, dst, delay);
                if trial.validate().is_ok() {
                    candidates.push((src, dst, delay));
                }
            }
        }
    }
    if candidates.len() < extra_links {
        return Err(Error::Config(format!(
            "only {} new links possible, {extra_links} requested",
            candidates.len()
        )));
    }
    candidates.shuffle(rng);
    for &(src, dst, delay) in &candidates[..extra_links] {
        s.add_learnable_link(src, dst, delay);
    }
    let grown = CmSpec {
        c_net: Network::new(s)?,
        interface_out,
        hidden_units: hidden,
        n_interface_weights: 0,
        ..cm.clone()
    };
    let template = Genome::new(vec![0.0; grown.genome_len()]);
    Ok((grown, template))
}
