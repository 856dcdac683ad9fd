use super::spec::{Combine, Delay, LinkSpec, NetSpec, UnitKind, WeightRef};
use crate::error::{Error, Result};

/// Per-step loss on a network's output units (in output-unit index order).
pub trait StepLoss {
    /// Return the loss at `step` and write dL/d(output) into `d_outputs`,
    /// which arrives zeroed.
    fn step_loss(&self, step: usize, outputs: &[f64], d_outputs: &mut [f64]) -> f64;
}

/// Sum of squared errors against optional per-step targets.
pub struct SquaredError<'a> {
    pub targets: &'a [Option<Vec<f64>>],
}

impl StepLoss for SquaredError<'_> {
    fn step_loss(&self, step: usize, outputs: &[f64], d_outputs: &mut [f64]) -> f64 {
        let Some(Some(target)) = self.targets.get(step) else {
            return 0.0;
        };
        let mut loss = 0.0;
        for ((y, d), g) in outputs.iter().zip(target).zip(d_outputs.iter_mut()) {
            let diff = y - d;
            loss += diff * diff;
            *g = 2.0 * diff;
        }
        loss
    }
}

/// Extra per-unit contribution to net sums, applied after the links.
///
/// `Additive` adds `values[u]` to unit `u`'s net; `Multiplicative` scales it.
#[derive(Debug, Clone, Copy)]
pub struct Injection<'a> {
    pub values: &'a [f64],
    pub combine: Combine,
}

/// Activation vectors of every unit for each step since reset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActivationTrace {
    pub steps: Vec<Vec<f64>>,
}

impl ActivationTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// A validated spec with its evaluation plan.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetSpec,
    order: Vec<usize>,
    incoming: Vec<Vec<LinkSpec>>,
    has_mul: Vec<bool>,
    inputs: Vec<usize>,
    outputs: Vec<usize>,
    biases: Vec<usize>,
}

fn canonical_key(l: &LinkSpec) -> (u8, Delay, usize, u8, u64) {
    let (wk, wv) = match l.weight {
        WeightRef::Learnable(i) => (0, i as u64),
        WeightRef::Fixed(v) => (1, v.to_bits()),
    };
    (l.combine as u8, l.delay, l.source, wk, wv)
}

impl Network {
    pub fn new(spec: NetSpec) -> Result<Self> {
        let order = spec.validate()?;
        let n_u = spec.n_units();
        let mut incoming: Vec<Vec<LinkSpec>> = vec![Vec::new(); n_u];
        for l in &spec.links {
            incoming[l.target].push(*l);
        }
        // Fixed summation order makes results independent of link list order.
        for list in &mut incoming {
            list.sort_by_key(canonical_key);
        }
        let has_mul = incoming
            .iter()
            .map(|ls| ls.iter().any(|l| l.combine == Combine::Multiplicative))
            .collect();
        Ok(Self {
            inputs: spec.inputs(),
            outputs: spec.outputs(),
            biases: spec.units_of(UnitKind::Bias),
            spec,
            order,
            incoming,
            has_mul,
        })
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn into_spec(self) -> NetSpec {
        self.spec
    }

    pub fn n_units(&self) -> usize {
        self.spec.n_units()
    }

    pub fn n_weights(&self) -> usize {
        self.spec.n_weights
    }

    pub fn input_units(&self) -> &[usize] {
        &self.inputs
    }

    pub fn output_units(&self) -> &[usize] {
        &self.outputs
    }

    pub fn zero_state(&self) -> Vec<f64> {
        vec![0.0; self.n_units()]
    }

    pub fn read_outputs(&self, activations: &[f64]) -> Vec<f64> {
        self.outputs.iter().map(|&u| activations[u]).collect()
    }

    fn check_dims(&self, weights: &[f64], prev: &[f64], input: &[f64]) -> Result<()> {
        if weights.len() != self.spec.n_weights {
            return Err(Error::Dimension {
                context: "weights",
                expected: self.spec.n_weights,
                got: weights.len(),
            });
        }
        if prev.len() != self.n_units() {
            return Err(Error::Dimension {
                context: "previous activations",
                expected: self.n_units(),
                got: prev.len(),
            });
        }
        if input.len() != self.inputs.len() {
            return Err(Error::Dimension {
                context: "input vector",
                expected: self.inputs.len(),
                got: input.len(),
            });
        }
        Ok(())
    }

    /// One step of activation spreading from `prev` given `input`.
    pub fn forward_step(&self, weights: &[f64], prev: &[f64], input: &[f64]) -> Result<Vec<f64>> {
        let mut act = vec![0.0; self.n_units()];
        let mut net = vec![0.0; self.n_units()];
        self.step_into(weights, prev, input, None, &mut act, &mut net)?;
        Ok(act)
    }

    /// Like [`forward_step`](Self::forward_step) with extra net contributions.
    pub fn forward_step_injected(
        &self,
        weights: &[f64],
        prev: &[f64],
        input: &[f64],
        injection: &Injection<'_>,
    ) -> Result<Vec<f64>> {
        if injection.values.len() != self.n_units() {
            return Err(Error::Dimension {
                context: "injection",
                expected: self.n_units(),
                got: injection.values.len(),
            });
        }
        let mut act = vec![0.0; self.n_units()];
        let mut net = vec![0.0; self.n_units()];
        self.step_into(weights, prev, input, Some(injection), &mut act, &mut net)?;
        Ok(act)
    }

    fn step_into(
        &self,
        weights: &[f64],
        prev: &[f64],
        input: &[f64],
        injection: Option<&Injection<'_>>,
        act: &mut [f64],
        net: &mut [f64],
    ) -> Result<()> {
        self.check_dims(weights, prev, input)?;
        for (&u, &x) in self.inputs.iter().zip(input) {
            act[u] = x;
        }
        for &b in &self.biases {
            act[b] = 1.0;
        }
        for &u in &self.order {
            let unit = self.spec.units[u];
            let mut sum = 0.0;
            let mut prod = 1.0;
            for l in &self.incoming[u] {
                let x = match l.delay {
                    Delay::Zero => act[l.source],
                    Delay::One => prev[l.source],
                };
                let term = x * l.weight.value(weights);
                match l.combine {
                    Combine::Additive => sum += term,
                    Combine::Multiplicative => prod *= term,
                }
            }
            let mut s = match unit.net {
                Combine::Multiplicative => prod,
                Combine::Additive if self.has_mul[u] => sum * prod,
                Combine::Additive => sum,
            };
            if let Some(inj) = injection {
                match inj.combine {
                    Combine::Additive => s += inj.values[u],
                    Combine::Multiplicative => s *= inj.values[u],
                }
            }
            let y = unit.activation.apply(s);
            if !y.is_finite() {
                return Err(Error::NumericOverflow { unit: u });
            }
            net[u] = s;
            act[u] = y;
        }
        Ok(())
    }

    /// Run an episode from the zero state.
    pub fn run(&self, weights: &[f64], inputs: &[Vec<f64>]) -> Result<ActivationTrace> {
        let mut prev = self.zero_state();
        let mut net = self.zero_state();
        let mut steps = Vec::with_capacity(inputs.len());
        for input in inputs {
            let mut act = self.zero_state();
            self.step_into(weights, &prev, input, None, &mut act, &mut net)?;
            prev.clone_from(&act);
            steps.push(act);
        }
        Ok(ActivationTrace { steps })
    }

    /// Total loss and its exact gradient w.r.t. the learnable weights,
    /// by backpropagation through time from the zero state.
    pub fn bptt_gradient(
        &self,
        weights: &[f64],
        inputs: &[Vec<f64>],
        loss: &dyn StepLoss,
    ) -> Result<(f64, Vec<f64>)> {
        let n_u = self.n_units();
        let steps = inputs.len();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(steps);
        let zero = self.zero_state();
        let mut net = self.zero_state();
        for (t, input) in inputs.iter().enumerate() {
            let mut act = self.zero_state();
            let prev = if t == 0 { &zero } else { &acts[t - 1] };
            self.step_into(weights, prev, input, None, &mut act, &mut net)?;
            acts.push(act);
        }

        let n_out = self.outputs.len();
        let mut total = 0.0;
        let mut grad = vec![0.0; self.spec.n_weights];
        let mut carry = vec![0.0; n_u];
        let mut next_carry = vec![0.0; n_u];
        let mut d_out = vec![0.0; n_out];
        let mut outs = vec![0.0; n_out];
        let mut terms: Vec<f64> = Vec::new();
        let mut xs: Vec<f64> = Vec::new();
        let mut partial: Vec<f64> = Vec::new();

        for t in (0..steps).rev() {
            let act = &acts[t];
            let prev = if t == 0 { &zero } else { &acts[t - 1] };
            for (o, &u) in outs.iter_mut().zip(&self.outputs) {
                *o = act[u];
            }
            d_out.iter_mut().for_each(|g| *g = 0.0);
            total += loss.step_loss(t, &outs, &mut d_out);

            let mut dx = std::mem::take(&mut carry);
            for (&u, g) in self.outputs.iter().zip(&d_out) {
                dx[u] += g;
            }
            next_carry.iter_mut().for_each(|c| *c = 0.0);

            for &u in self.order.iter().rev() {
                if dx[u] == 0.0 {
                    continue;
                }
                let unit = self.spec.units[u];
                let dnet = dx[u] * unit.activation.derivative(act[u]);
                if dnet == 0.0 {
                    continue;
                }
                let links = &self.incoming[u];
                terms.clear();
                xs.clear();
                for l in links {
                    let x = match l.delay {
                        Delay::Zero => act[l.source],
                        Delay::One => prev[l.source],
                    };
                    xs.push(x);
                    terms.push(x * l.weight.value(weights));
                }
                net_partials(unit.net, self.has_mul[u], links, &terms, &mut partial);
                for (k, l) in links.iter().enumerate() {
                    let dterm = dnet * partial[k];
                    if let WeightRef::Learnable(wi) = l.weight {
                        grad[wi] += dterm * xs[k];
                    }
                    let dsrc = dterm * l.weight.value(weights);
                    match l.delay {
                        Delay::Zero => dx[l.source] += dsrc,
                        Delay::One => next_carry[l.source] += dsrc,
                    }
                }
            }
            carry = dx;
            std::mem::swap(&mut carry, &mut next_carry);
        }
        if !total.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        Ok((total, grad))
    }
}

/// d(net)/d(term_k) for every incoming link term.
fn net_partials(
    net: Combine,
    has_mul: bool,
    links: &[LinkSpec],
    terms: &[f64],
    out: &mut Vec<f64>,
) {
    out.clear();
    out.resize(terms.len(), 0.0);
    if net == Combine::Additive && !has_mul {
        out.iter_mut().for_each(|p| *p = 1.0);
        return;
    }
    // Products of the multiplicative terms excluding each one, via prefix and
    // suffix products so that zero factors are handled exactly.
    let mul_idx: Vec<usize> = (0..links.len())
        .filter(|&k| links[k].combine == Combine::Multiplicative)
        .collect();
    let m = mul_idx.len();
    let mut prefix = vec![1.0; m + 1];
    for (j, &k) in mul_idx.iter().enumerate() {
        prefix[j + 1] = prefix[j] * terms[k];
    }
    let mut suffix = vec![1.0; m + 1];
    for j in (0..m).rev() {
        suffix[j] = suffix[j + 1] * terms[mul_idx[j]];
    }
    let full_prod = prefix[m];
    let sum: f64 = (0..links.len())
        .filter(|&k| links[k].combine == Combine::Additive)
        .map(|k| terms[k])
        .sum();
    let scale = match net {
        Combine::Multiplicative => 1.0,
        Combine::Additive => sum,
    };
    for (j, &k) in mul_idx.iter().enumerate() {
        out[k] = scale * prefix[j] * suffix[j + 1];
    }
    if net == Combine::Additive {
        for (k, l) in links.iter().enumerate() {
            if l.combine == Combine::Additive {
                out[k] = full_prod;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::spec::{Activation, UnitSpec};

    fn two_inputs_into(unit: UnitSpec, combine: Combine) -> NetSpec {
        let mut s = NetSpec::default();
        let a = s.add_unit(UnitSpec::input());
        let b = s.add_unit(UnitSpec::input());
        let o = s.add_unit(unit);
        let mut la = LinkSpec::new(a, o, WeightRef::Learnable(0), Delay::Zero);
        let mut lb = LinkSpec::new(b, o, WeightRef::Learnable(1), Delay::Zero);
        la.combine = combine;
        lb.combine = combine;
        s.links = vec![la, lb];
        s.n_weights = 2;
        s
    }

    #[test]
    fn identity_passthrough() {
        let mut s = NetSpec::default();
        let i = s.add_unit(UnitSpec::input());
        let o = s.add_unit(UnitSpec::output(Activation::Identity));
        s.add_learnable_link(i, o, Delay::Zero);
        let net = Network::new(s).unwrap();
        let act = net.forward_step(&[1.0], &[0.0, 0.0], &[0.7]).unwrap();
        assert_eq!(act[o], 0.7);
    }

    #[test]
    fn symmetric_inputs_cancel_in_tanh_unit() {
        let s = two_inputs_into(UnitSpec::output(Activation::Tanh), Combine::Additive);
        let net = Network::new(s).unwrap();
        let act = net.forward_step(&[1.0, 1.0], &[0.0; 3], &[0.5, -0.5]).unwrap();
        assert_eq!(act[2], 0.0);
    }

    #[test]
    fn multiplicative_unit_takes_product() {
        let unit = UnitSpec::output(Activation::Identity).with_net(Combine::Multiplicative);
        let s = two_inputs_into(unit, Combine::Multiplicative);
        let net = Network::new(s).unwrap();
        let act = net.forward_step(&[1.0, 1.0], &[0.0; 3], &[2.0, 3.0]).unwrap();
        assert_eq!(act[2], 6.0);
    }

    #[test]
    fn multiplicative_unit_without_links_sees_empty_product() {
        let mut s = NetSpec::default();
        s.add_unit(UnitSpec::input());
        s.add_unit(UnitSpec::output(Activation::Sigmoid).with_net(Combine::Multiplicative));
        let net = Network::new(s).unwrap();
        let act = net.forward_step(&[], &[0.0; 2], &[3.0]).unwrap();
        assert_eq!(act[1], Activation::Sigmoid.apply(1.0));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let s = two_inputs_into(UnitSpec::output(Activation::Tanh), Combine::Additive);
        let net = Network::new(s).unwrap();
        assert!(matches!(
            net.forward_step(&[1.0, 1.0], &[0.0; 3], &[0.5]),
            Err(Error::Dimension { .. })
        ));
        assert!(net.forward_step(&[1.0], &[0.0; 3], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn overflow_names_the_unit() {
        let unit = UnitSpec::output(Activation::Identity).with_net(Combine::Multiplicative);
        let s = two_inputs_into(unit, Combine::Multiplicative);
        let net = Network::new(s).unwrap();
        let err = net
            .forward_step(&[1e200, 1e200], &[0.0; 3], &[1e10, 1e10])
            .unwrap_err();
        assert!(matches!(err, Error::NumericOverflow { unit: 2 }));
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        struct Constant;
        impl StepLoss for Constant {
            fn step_loss(&self, _: usize, _: &[f64], _: &mut [f64]) -> f64 {
                3.0
            }
        }
        let s = two_inputs_into(UnitSpec::output(Activation::Tanh), Combine::Additive);
        let net = Network::new(s).unwrap();
        let (loss, g) = net
            .bptt_gradient(&[0.3, -0.2], &[vec![1.0, 2.0], vec![0.5, 0.1]], &Constant)
            .unwrap();
        assert_eq!(loss, 6.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn linear_chain_gradient_closed_form() {
        let mut s = NetSpec::default();
        let i = s.add_unit(UnitSpec::input());
        let o = s.add_unit(UnitSpec::output(Activation::Identity));
        s.add_learnable_link(i, o, Delay::Zero);
        let net = Network::new(s).unwrap();
        let (w, x, d) = (0.8, 1.5, 0.4);
        let targets = vec![Some(vec![d])];
        let (loss, g) = net
            .bptt_gradient(&[w], &[vec![x]], &SquaredError { targets: &targets })
            .unwrap();
        assert!((loss - (w * x - d).powi(2)).abs() < 1e-15);
        assert!((g[0] - 2.0 * (w * x - d) * x).abs() < 1e-15);
    }

    #[test]
    fn shared_weight_accumulates_over_duplicate_links() {
        // in -> out twice with the same weight index: net = 2 w x.
        let mut s = NetSpec::default();
        let i = s.add_unit(UnitSpec::input());
        let h = s.add_unit(UnitSpec::hidden(Activation::Identity));
        let o = s.add_unit(UnitSpec::output(Activation::Identity));
        s.n_weights = 2;
        s.links.push(LinkSpec::new(i, h, WeightRef::Learnable(0), Delay::Zero));
        s.links.push(LinkSpec::new(h, o, WeightRef::Learnable(1), Delay::Zero));
        let single = Network::new(s.clone()).unwrap();
        s.links.push(LinkSpec::new(i, h, WeightRef::Learnable(0), Delay::Zero));
        let double = Network::new(s).unwrap();

        // Loss linear in the output isolates the connection-site contribution.
        struct Linear;
        impl StepLoss for Linear {
            fn step_loss(&self, _: usize, out: &[f64], d: &mut [f64]) -> f64 {
                d[0] = 1.0;
                out[0]
            }
        }
        let w = [0.7, 1.3];
        let (_, g1) = single.bptt_gradient(&w, &[vec![2.0]], &Linear).unwrap();
        let (_, g2) = double.bptt_gradient(&w, &[vec![2.0]], &Linear).unwrap();
        assert_eq!(g2[0], 2.0 * g1[0]);
    }
}
