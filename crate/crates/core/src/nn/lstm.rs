use rand::Rng;

use super::params::NetParams;
use super::spec::{Activation, Combine, Delay, LinkSpec, NetSpec, UnitSpec, WeightRef};

/// Where the interesting pieces of a generated LSTM live.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayout {
    /// Cell-state units, one per cell; each carries a fixed delay-1 self-link.
    pub cell_states: Vec<usize>,
    /// Gated cell outputs, one per cell.
    pub cell_outputs: Vec<usize>,
    /// Weight index of each cell's forget-gate bias.
    pub forget_biases: Vec<usize>,
}

impl LstmLayout {
    /// Uniform [-0.1, 0.1] weights with forget-gate biases set to +1.
    pub fn init_params(&self, spec: &NetSpec, rng: &mut impl Rng) -> NetParams {
        let mut p = NetParams::init(spec, rng);
        for &i in &self.forget_biases {
            p.weights[i] = 1.0;
        }
        p
    }
}

/// LSTM with forget gates and identity output units.
pub fn make_lstm_spec(n_in: usize, n_cells: usize, n_out: usize) -> NetSpec {
    make_lstm_spec_with_output(n_in, n_cells, n_out, Activation::Identity).0
}

/// Build an LSTM layer from plain units.
///
/// Per cell: sigmoid input/forget/output gates and a tanh candidate, each fed
/// by the inputs, the bias, and every cell output of the previous step. The
/// cell state `c` keeps a fixed delay-1 self-link of weight 1 (the carousel)
/// and receives `i*g` plus `-(1-f)*c_prev`, which gives the usual
/// `c = f*c_prev + i*g`. The cell output is `o * tanh(c)`.
pub fn make_lstm_spec_with_output(
    n_in: usize,
    n_cells: usize,
    n_out: usize,
    out_activation: Activation,
) -> (NetSpec, LstmLayout) {
    assert!(n_in >= 1 && n_cells >= 1 && n_out >= 1, "LSTM counts must be >= 1");
    let mut s = NetSpec::default();
    let inputs: Vec<usize> = (0..n_in).map(|_| s.add_unit(UnitSpec::input())).collect();
    let bias = s.add_unit(UnitSpec::bias());

    let mul = |act| UnitSpec::hidden(act).with_net(Combine::Multiplicative);
    struct Cell {
        gates: [usize; 4],
        comp: usize,
        ig: usize,
        ez: usize,
        c: usize,
        squash: usize,
        h: usize,
    }
    let cells: Vec<Cell> = (0..n_cells)
        .map(|_| {
            let i = s.add_unit(UnitSpec::hidden(Activation::Sigmoid));
            let f = s.add_unit(UnitSpec::hidden(Activation::Sigmoid));
            let o = s.add_unit(UnitSpec::hidden(Activation::Sigmoid));
            let g = s.add_unit(UnitSpec::hidden(Activation::Tanh));
            Cell {
                gates: [i, f, o, g],
                comp: s.add_unit(UnitSpec::hidden(Activation::Identity)),
                ig: s.add_unit(mul(Activation::Identity)),
                ez: s.add_unit(mul(Activation::Identity)),
                c: s.add_unit(UnitSpec::hidden(Activation::Identity)),
                squash: s.add_unit(UnitSpec::hidden(Activation::Tanh)),
                h: s.add_unit(mul(Activation::Identity)),
            }
        })
        .collect();
    let outputs: Vec<usize> = (0..n_out)
        .map(|_| s.add_unit(UnitSpec::output(out_activation)))
        .collect();

    let mut forget_biases = Vec::with_capacity(n_cells);
    for cell in &cells {
        for (gi, &gate) in cell.gates.iter().enumerate() {
            for &x in &inputs {
                s.add_learnable_link(x, gate, Delay::Zero);
            }
            let b = s.add_learnable_link(bias, gate, Delay::Zero);
            if gi == 1 {
                forget_biases.push(b);
            }
            for other in &cells {
                s.add_learnable_link(other.h, gate, Delay::One);
            }
        }
        let [i, f, o, g] = cell.gates;
        let mul_link = |src, dst, delay| {
            LinkSpec::new(src, dst, WeightRef::Fixed(1.0), delay).multiplicative()
        };
        // comp = 1 - f
        s.add_fixed_link(bias, cell.comp, 1.0, Delay::Zero);
        s.add_fixed_link(f, cell.comp, -1.0, Delay::Zero);
        s.links.push(mul_link(i, cell.ig, Delay::Zero));
        s.links.push(mul_link(g, cell.ig, Delay::Zero));
        s.links.push(mul_link(cell.comp, cell.ez, Delay::Zero));
        s.links.push(mul_link(cell.c, cell.ez, Delay::One));
        s.add_fixed_link(cell.c, cell.c, 1.0, Delay::One);
        s.add_fixed_link(cell.ig, cell.c, 1.0, Delay::Zero);
        s.add_fixed_link(cell.ez, cell.c, -1.0, Delay::Zero);
        s.add_fixed_link(cell.c, cell.squash, 1.0, Delay::Zero);
        s.links.push(mul_link(o, cell.h, Delay::Zero));
        s.links.push(mul_link(cell.squash, cell.h, Delay::Zero));
    }
    for &out in &outputs {
        for cell in &cells {
            s.add_learnable_link(cell.h, out, Delay::Zero);
        }
        s.add_learnable_link(bias, out, Delay::Zero);
    }
    let layout = LstmLayout {
        cell_states: cells.iter().map(|c| c.c).collect(),
        cell_outputs: cells.iter().map(|c| c.h).collect(),
        forget_biases,
    };
    (s, layout)
}
