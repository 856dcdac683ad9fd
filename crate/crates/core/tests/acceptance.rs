//! Acceptance criteria. Each test writes one `criterion N: PASS|FAIL ...`
//! line straight to stderr so the verdicts show up without `--nocapture`.

use std::io::Write;
use std::time::Instant;

use cmrl::controllers::{
    cm_forward, learn_trial, run_trial, CmConfig, CmSpec, EsConfig, EvolutionStrategy, Genome, QAgent, QFunction,
    RandomAgent, StateMode, StateTracker, TrialRun, Variant,
};
use cmrl::env::{Env, EnvSpec, Room, ORACLE_MDP_START, ORACLE_MDP_TABLE};
use cmrl::history::{HistoryStore, StepRecord};
use cmrl::nn::{Activation, Combine, Delay, LinkSpec, NetSpec, Network, SquaredError, UnitKind, UnitSpec, WeightRef};
use cmrl::orchestrator::{MetricKind, Run, RunConfig};
use cmrl::rng::{stream, StreamRng};
use cmrl::world_model::{
    accept_if_shorter, Architecture, CodingScheme, SleepConfig, WeightCoding, WorldModel,
};
use cmrl::env::Dims;
use rand::Rng;

/// Criteria run one at a time so their timings are not shared.
fn serial() -> std::sync::MutexGuard<'static, ()> {
    static LOCK: std::sync::Mutex<()> = std::sync::Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(n: usize, pass: bool, detail: String, started: Instant) {
    let word = if pass { "PASS" } else { "FAIL" };
    let line = format!(
        "criterion {n}: {word}  {detail}  ({:.1}s)\n",
        started.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

// ---------------------------------------------------------------- 1

fn random_activation(rng: &mut StreamRng) -> Activation {
    [Activation::Identity, Activation::Tanh, Activation::Sigmoid][rng.random_range(0..3)]
}

/// Inputs, optional bias, hidden units of mixed net type, then outputs.
/// Zero-delay links only run from lower to higher unit index, so they
/// can never close a cycle.
fn random_spec(rng: &mut StreamRng) -> NetSpec {
    let mut s = NetSpec::default();
    let n_in = rng.random_range(1..=3);
    let n_hidden = rng.random_range(1..=6);
    let n_out = rng.random_range(1..=2);
    for _ in 0..n_in {
        s.add_unit(UnitSpec::input());
    }
    if rng.random_bool(0.5) {
        s.add_unit(UnitSpec::bias());
    }
    for _ in 0..n_hidden {
        let net = if rng.random_bool(0.3) { Combine::Multiplicative } else { Combine::Additive };
        s.add_unit(UnitSpec::hidden(random_activation(rng)).with_net(net));
    }
    for _ in 0..n_out {
        s.add_unit(UnitSpec::output(random_activation(rng)));
    }
    assert!(s.n_units() <= 12);
    let first_target = s.units.iter().position(|u| u.kind == UnitKind::Hidden).unwrap();
    for target in first_target..s.n_units() {
        let mul_unit = s.units[target].net == Combine::Multiplicative;
        for _ in 0..rng.random_range(1..=3) {
            let source = rng.random_range(0..s.n_units());
            let delay = if source < target && rng.random_bool(0.6) { Delay::Zero } else { Delay::One };
            let weight = if rng.random_bool(0.1) {
                WeightRef::Fixed(rng.random_range(-1.0..1.0))
            } else if s.n_weights > 0 && rng.random_bool(0.1) {
                WeightRef::Learnable(rng.random_range(0..s.n_weights))
            } else {
                s.n_weights += 1;
                WeightRef::Learnable(s.n_weights - 1)
            };
            let mut link = LinkSpec::new(source, target, weight, delay);
            if mul_unit || rng.random_bool(0.25) {
                link = link.multiplicative();
            }
            s.links.push(link);
        }
    }
    s
}

fn squared_loss(net: &Network, w: &[f64], inputs: &[Vec<f64>], targets: &[Option<Vec<f64>>]) -> f64 {
    let trace = net.run(w, inputs).unwrap();
    let mut loss = 0.0;
    for (act, target) in trace.steps.iter().zip(targets) {
        if let Some(t) = target {
            let y = net.read_outputs(act);
            loss += y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
    }
    loss
}

/// Relative error with a floor on the scale, so coordinates whose true
/// gradient is ~0 are judged by finite-difference round-off instead.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn criterion_1_bptt_matches_finite_differences() {
    let _serial = serial();
    let started = Instant::now();
    let mut rng = stream(2024, "gradient-suite", &[]);
    let eps = 1e-5;
    let (mut worst, mut checked) = (0.0f64, 0usize);
    for _ in 0..50 {
        let spec = random_spec(&mut rng);
        let net = Network::new(spec).unwrap();
        let n_in = net.input_units().len();
        let n_out = net.output_units().len();
        let steps = rng.random_range(1..=8);
        let inputs: Vec<Vec<f64>> = (0..steps)
            .map(|_| (0..n_in).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let targets: Vec<Option<Vec<f64>>> = (0..steps)
            .map(|t| {
                (t + 1 == steps || rng.random_bool(0.7))
                    .then(|| (0..n_out).map(|_| rng.random_range(-1.0..1.0)).collect())
            })
            .collect();
        let w: Vec<f64> = (0..net.n_weights()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (loss, grad) = net.bptt_gradient(&w, &inputs, &SquaredError { targets: &targets }).unwrap();
        assert!((loss - squared_loss(&net, &w, &inputs, &targets)).abs() <= 1e-12 * loss.abs().max(1.0));
        for i in 0..w.len() {
            let mut up = w.clone();
            up[i] += eps;
            let mut down = w.clone();
            down[i] -= eps;
            let fd = (squared_loss(&net, &up, &inputs, &targets) - squared_loss(&net, &down, &inputs, &targets))
                / (2.0 * eps);
            worst = worst.max(rel_err(grad[i], fd));
            checked += 1;
        }
    }
    let pass = worst < 1e-4;
    verdict(1, pass, format!("50 specs, {checked} coordinates, worst relative error {worst:.2e} (< 1e-4)"), started);
    assert!(pass);
}

// ---------------------------------------------------------------- 2

/// Straightforward evaluation of one step of any spec: every unit's
/// activation is computed on demand from its incoming links.
fn naive_step(spec: &NetSpec, w: &[f64], prev: &[f64], input: &[f64]) -> Vec<f64> {
    fn eval(u: usize, spec: &NetSpec, w: &[f64], prev: &[f64], memo: &mut Vec<Option<f64>>) -> f64 {
        if let Some(v) = memo[u] {
            return v;
        }
        let unit = spec.units[u];
        let mut sum = 0.0;
        let mut product = 1.0;
        let mut any_mul = false;
        for l in spec.links.iter().filter(|l| l.target == u) {
            let src = match l.delay {
                Delay::One => prev[l.source],
                Delay::Zero => eval(l.source, spec, w, prev, memo),
            };
            let weight = match l.weight {
                WeightRef::Learnable(i) => w[i],
                WeightRef::Fixed(v) => v,
            };
            match l.combine {
                Combine::Additive => sum += weight * src,
                Combine::Multiplicative => {
                    product *= weight * src;
                    any_mul = true;
                }
            }
        }
        let net = match unit.net {
            Combine::Multiplicative => product,
            Combine::Additive if any_mul => sum * product,
            Combine::Additive => sum,
        };
        let v = match unit.activation {
            Activation::Identity => net,
            Activation::Tanh => net.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-net).exp()),
        };
        memo[u] = Some(v);
        v
    }
    let mut memo: Vec<Option<f64>> = vec![None; spec.n_units()];
    let mut k = 0;
    for (u, unit) in spec.units.iter().enumerate() {
        match unit.kind {
            UnitKind::Input => {
                memo[u] = Some(input[k]);
                k += 1;
            }
            UnitKind::Bias => memo[u] = Some(1.0),
            _ => {}
        }
    }
    (0..spec.n_units()).map(|u| eval(u, spec, w, prev, &mut memo)).collect()
}

struct NaiveScore {
    e: f64,
    bits_h: f64,
    bits_m: f64,
}

/// The two-part code written out from its definition: residuals cost
/// `-log2(delta * N(d; 0, sigma^2))` bits (never negative), weights either
/// the same with the weight precision or a flat price per live weight.
fn naive_code_length(model: &WorldModel, coding: &CodingScheme, episodes: &[Vec<StepRecord>]) -> NaiveScore {
    let spec = model.spec();
    let w = &model.params.weights;
    let outputs: Vec<usize> = (0..spec.n_units()).filter(|&u| spec.units[u].kind == UnitKind::Output).collect();
    let gauss_bits = |x: f64, sigma: f64, delta: f64| {
        let density = (-(x * x) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        (-(delta * density).log2()).max(0.0)
    };
    let (mut e, mut bits_h) = (0.0, 0.0);
    for ep in episodes {
        let mut prev = vec![0.0; spec.n_units()];
        for t in 0..ep.len().saturating_sub(1) {
            let r = &ep[t];
            let all: Vec<f64> = r.in_vec.iter().chain(&r.r_vec).chain(&r.out_vec).copied().collect();
            let act = naive_step(spec, w, &prev, &all);
            let next = &ep[t + 1];
            let sense: Vec<f64> = next.in_vec.iter().chain(&next.r_vec).copied().collect();
            for (k, &o) in outputs.iter().enumerate() {
                let d = act[o] - sense[k];
                e += d * d;
                bits_h += gauss_bits(d, coding.sigma_e, coding.delta_e);
            }
            prev = act;
        }
    }
    let bits_m = match coding.weight_coding {
        WeightCoding::Gaussian { sigma_w, delta_w } => w.iter().map(|&x| gauss_bits(x, sigma_w, delta_w)).sum(),
        WeightCoding::CountBased { bits_per_weight } => {
            bits_per_weight as f64 * w.iter().filter(|x| x.abs() > coding.zero_weight_threshold).count() as f64
        }
    };
    NaiveScore { e, bits_h, bits_m }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn criterion_2_code_length_matches_naive_scorer() {
    let _serial = serial();
    let started = Instant::now();
    let mut rng = stream(77, "code-length-oracle", &[]);
    let mut failures = 0;
    for case in 0..20 {
        let dims = Dims {
            m: rng.random_range(1..=4),
            n: rng.random_range(1..=2),
            o: rng.random_range(1..=3),
        };
        let coding = CodingScheme {
            sigma_e: rng.random_range(0.05..1.0),
            delta_e: 1.0 / f64::from(1u32 << rng.random_range(3..10)),
            weight_coding: if case % 2 == 0 {
                WeightCoding::CountBased { bits_per_weight: rng.random_range(8..=32) }
            } else {
                WeightCoding::Gaussian {
                    sigma_w: rng.random_range(0.5..2.0),
                    delta_w: 1.0 / f64::from(1u32 << rng.random_range(4..12)),
                }
            },
            zero_weight_threshold: 1e-3,
        };
        let arch = if case % 3 == 2 { Architecture::Lstm } else { Architecture::Rnn };
        let mut model = WorldModel::new(dims, rng.random_range(1..=5), arch, coding, &mut rng).unwrap();
        for _ in 0..rng.random_range(0..4) {
            model = model.propose_structural_change(&mut rng).unwrap().0;
        }
        for w in model.params.weights.iter_mut() {
            *w = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(-1.5..1.5) };
        }
        let mut history = HistoryStore::new(dims.m, dims.n, dims.o, case);
        for _ in 0..rng.random_range(1..=4) {
            let len = rng.random_range(1..=12);
            let base = history.len();
            let records = (0..len)
                .map(|i| StepRecord {
                    t: base + i + 1,
                    in_vec: (0..dims.m).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    r_vec: (0..dims.n).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    out_vec: cmrl::env::one_hot(rng.random_range(0..dims.o), dims.o),
                    intrinsic: 0.0,
                })
                .collect();
            history.append_trial("random", records).unwrap();
        }
        let spans = history.trials().to_vec();
        let report = model.code_length(&history, &spans).unwrap();
        let eps: Vec<Vec<StepRecord>> = spans.iter().map(|s| history.replay(s).unwrap().to_vec()).collect();
        let naive = naive_code_length(&model, &coding, &eps);
        let ok = close(report.e, naive.e, 1e-9)
            && close(report.bits_h, naive.bits_h, 1e-9)
            && close(report.bits_m, naive.bits_m, 1e-9)
            && close(report.total, naive.bits_h + naive.bits_m, 1e-9);
        if !ok {
            failures += 1;
            eprintln!(
                "case {case}: E {} vs {}, bits_H {} vs {}, bits_M {} vs {}",
                report.e, naive.e, report.bits_h, naive.bits_h, report.bits_m, naive.bits_m
            );
        }
    }
    let pass = failures == 0;
    verdict(2, pass, format!("20 random models and histories, {failures} mismatches at 1e-9 relative"), started);
    assert!(pass);
}

// ---------------------------------------------------------------- 3

#[test]
fn criterion_3_adopted_totals_strictly_decrease() {
    let _serial = serial();
    let started = Instant::now();
    let dims = EnvSpec::delayed_recall(3).dims().unwrap();
    let mut rng = stream(3, "structural-monotonicity", &[]);
    // Scoring data: random play in the delayed-recall task.
    let mut env = Env::new(&EnvSpec::delayed_recall(3)).unwrap();
    let mut history = HistoryStore::new(dims.m, dims.n, dims.o, 3);
    for i in 0..6 {
        let run = run_trial(&mut env, i, &mut RandomAgent { n_actions: dims.o }, &mut rng).unwrap();
        let base = history.len();
        let records = run.records.into_iter().map(|mut r| {
            r.t += base;
            r
        });
        history.append_trial("recall", records.collect()).unwrap();
    }
    let eps: Vec<&[StepRecord]> = history.trials().iter().map(|s| history.replay(s).unwrap()).collect();
    let mut incumbent = WorldModel::new(dims, 2, Architecture::Rnn, CodingScheme::default(), &mut rng).unwrap();
    let retrain = SleepConfig { epochs: 30, ..SleepConfig::default() };
    let mut adopted = vec![incumbent.code_length_episodes(&eps).unwrap().total];
    let (mut accepted, mut violations) = (0, 0);
    for _ in 0..50 {
        let (candidate, _) = incumbent.propose_structural_change(&mut rng).unwrap();
        let acc = accept_if_shorter(&incumbent, &candidate, &eps, &retrain).unwrap();
        if acc.accepted {
            accepted += 1;
            let total = acc.model.code_length_episodes(&eps).unwrap().total;
            if total >= *adopted.last().unwrap() {
                violations += 1;
            }
            adopted.push(total);
            incumbent = acc.model;
        } else if acc.model.weight_hash() != incumbent.weight_hash() || acc.model.spec() != incumbent.spec() {
            violations += 1;
        }
    }
    let pass = violations == 0;
    verdict(
        3,
        pass,
        format!(
            "50 rounds, {accepted} adopted, totals {:.1} -> {:.1}, {violations} violations",
            adopted[0],
            adopted.last().unwrap()
        ),
        started,
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 4

/// Infinite-horizon value iteration on the oracle MDP; returns the greedy
/// action per state.
fn oracle_policy(gamma: f64) -> [usize; 4] {
    let mut v = [0.0f64; 4];
    loop {
        let mut next = [0.0f64; 4];
        for (s, row) in ORACLE_MDP_TABLE.iter().enumerate() {
            next[s] = row.iter().map(|&(s2, r)| r + gamma * v[s2]).fold(f64::NEG_INFINITY, f64::max);
        }
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta < 1e-10 {
            break;
        }
    }
    std::array::from_fn(|s| {
        let q: Vec<f64> = ORACLE_MDP_TABLE[s].iter().map(|&(s2, r)| r + gamma * v[s2]).collect();
        usize::from(q[1] > q[0])
    })
}

/// Steps of Q-learning on the raw one-hot state until the greedy policy
/// first matches the oracle and then keeps matching it to the end of the
/// budget. `None` if it does not hold at the end.
fn q_learning_on_oracle(seed: u64, budget: usize) -> (Option<usize>, [usize; 4]) {
    let spec = EnvSpec::oracle_mdp().with_seed(seed);
    let target = oracle_policy(spec.discount());
    let mut env = Env::new(&spec).unwrap();
    let dims = env.dims();
    // M is not consulted in observation mode; any model will do.
    let model = WorldModel::new(dims, 1, Architecture::Rnn, CodingScheme::default(), &mut stream(seed, "m", &[])).unwrap();
    let mut q = QFunction::new(dims.o, dims.m, spec.discount(), 0.1).unwrap();
    let mut rng = stream(seed, "oracle-q", &[]);
    let greedy = |q: &QFunction| -> [usize; 4] {
        std::array::from_fn(|s| q.greedy(&cmrl::env::one_hot(s, 4)).unwrap())
    };
    let (mut steps, mut trial, mut since) = (0usize, 0u64, None);
    while steps < budget {
        let frozen = q.clone();
        let mut agent = QAgent::new(&frozen, StateTracker::new(StateMode::Observation, &model), 0.2);
        let run = run_trial(&mut env, trial, &mut agent, &mut rng).unwrap();
        steps += run.actions();
        trial += 1;
        learn_trial(&mut q, &agent.transitions, 0.0).unwrap();
        match (greedy(&q) == target, since) {
            (true, None) => since = Some(steps),
            (false, Some(_)) => since = None,
            _ => {}
        }
    }
    assert_eq!(ORACLE_MDP_START, 0);
    (since, greedy(&q))
}

fn toggle_config(seed: u64, state: StateMode) -> RunConfig {
    RunConfig {
        env: EnvSpec::toggle(6),
        variant: Variant::C1,
        q_state: state,
        phases: 25,
        trials_per_phase: 20,
        seed,
        stop_on_optimal: false,
        ..RunConfig::default()
    }
}

#[test]
fn criterion_4_markov_state_enables_q_learning() {
    let _serial = serial();
    let started = Instant::now();
    let target = oracle_policy(0.9);
    let mut oracle_ok = true;
    let mut oracle_detail = Vec::new();
    for seed in 0..5 {
        let (since, policy) = q_learning_on_oracle(seed, 20_000);
        oracle_ok &= since.is_some();
        oracle_detail.push(since.map_or(format!("{policy:?}"), |s| s.to_string()));
    }
    let (mut markov, mut raw) = (Vec::new(), Vec::new());
    for seed in 0..5 {
        for (mode, out) in [(StateMode::Markov, &mut markov), (StateMode::Sense, &mut raw)] {
            let mut run = Run::new(toggle_config(seed, mode)).unwrap();
            run.run_to_end().unwrap();
            out.push(mean(&run.evaluate(200).unwrap()));
        }
    }
    let (m, r) = (mean(&markov), mean(&raw));
    let optimum = cmrl::env::optimal_return(&EnvSpec::toggle(6)).unwrap();
    let pass = oracle_ok && m - r >= 0.3;
    verdict(
        4,
        pass,
        format!(
            "oracle MDP optimal policy {target:?} held from step {} (5 seeds, budget 20000); \
             toggle mean return Markov {m:.3} vs raw {r:.3} (optimum {optimum:.3}, margin {:.3} >= 0.3); \
             per seed Markov {markov:.3?} raw {raw:.3?}",
            oracle_detail.join("/"),
            m - r
        ),
        started,
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 5 and 6

const TMAZE_SEEDS: u64 = 5;

struct TmazeRun {
    run: Run,
    final_metric: f64,
    generations: usize,
}

fn tmaze_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig {
        env: EnvSpec::tmaze(3),
        variant: Variant::C3,
        seed,
        ..RunConfig::default()
    };
    // 15 phases of 10 generations: a budget of 150 generations.
    cfg.phases = 150 / cfg.evolution.es.generations;
    cfg
}

/// The C3 T-maze runs, shared by criteria 5 and 6.
fn tmaze_runs() -> &'static [TmazeRun] {
    static RUNS: std::sync::OnceLock<Vec<TmazeRun>> = std::sync::OnceLock::new();
    RUNS.get_or_init(|| {
        (0..TMAZE_SEEDS)
            .map(|seed| {
                let mut run = Run::new(tmaze_config(seed)).unwrap();
                let reports = run.run_to_end().unwrap();
                TmazeRun {
                    final_metric: reports.last().unwrap().metric,
                    generations: reports.len() * run.cfg.evolution.es.generations,
                    run,
                }
            })
            .collect()
    })
}

/// Evolve a C with no recurrence whose reads from M are held at zero, with
/// the same generation budget, and score its best genome on 200 trials.
fn memoryless_baseline(seed: u64, model: &WorldModel) -> f64 {
    let spec = EnvSpec::tmaze(3);
    let mut env = Env::new(&spec).unwrap();
    let dims = env.dims();
    let cfg = CmConfig {
        recurrent: false,
        ..CmConfig::default()
    };
    let cm = CmSpec::new(dims.sense(), dims.o, cfg).unwrap();
    let reads: Vec<usize> = cm.interface_in_genes().to_vec();
    let silence = |w: &[f64]| -> Vec<f64> {
        let mut w = w.to_vec();
        for &i in &reads {
            w[i] = 0.0;
        }
        w
    };
    let mut rng = stream(seed, "memoryless", &[]);
    let pop = (0..EsConfig::default().mu).map(|_| Genome::random(cm.genome_len(), 0.5, &mut rng)).collect();
    let mut es = EvolutionStrategy::new(EsConfig::default(), pop).unwrap();
    for g in 0..150u64 {
        let mut evaluate = |w: &[f64], _: usize| -> cmrl::Result<f64> {
            let w = silence(w);
            let mut total = 0.0;
            for e in 0..3 {
                let mut agent = cmrl::controllers::CmAgent::new(&cm, &w, model, 0);
                let seed = cmrl::rng::sub_seed(seed, "memoryless-eval", &[g, e]);
                total += run_trial(&mut env, seed, &mut agent, &mut stream(0, "unused", &[])).unwrap().external_return;
            }
            Ok(total / 3.0)
        };
        es.step(&mut evaluate, &mut rng);
    }
    let best = silence(&es.parents[0].weights);
    let returns: Vec<f64> = (0..200u64)
        .map(|k| {
            let mut agent = cmrl::controllers::CmAgent::new(&cm, &best, model, 0);
            let seed = cmrl::rng::sub_seed(seed, "memoryless-score", &[k]);
            run_trial(&mut env, seed, &mut agent, &mut stream(0, "unused", &[])).unwrap().external_return
        })
        .collect();
    mean(&returns)
}

#[test]
fn criterion_5_tmaze_solved_by_coupled_controller() {
    let _serial = serial();
    let started = Instant::now();
    let runs = tmaze_runs();
    let finals: Vec<f64> = runs.iter().map(|r| r.final_metric).collect();
    let gens: Vec<usize> = runs.iter().map(|r| r.generations).collect();
    let baseline: Vec<f64> = runs
        .iter()
        .enumerate()
        .map(|(seed, r)| memoryless_baseline(seed as u64, &r.run.model))
        .collect();
    let (m, b) = (median(finals.clone()), median(baseline.clone()));
    let pass = m >= 0.9 && b <= 0.2 && gens.iter().all(|&g| g <= 150);
    verdict(
        5,
        pass,
        format!(
            "C3 median return over last 20 trials {m:.3} (>= 0.9), per seed {finals:.2?} after {gens:?} generations; \
             memoryless median {b:.3} (<= 0.2), per seed {baseline:.3?}"
        ),
        started,
    );
    assert!(pass);
}

#[test]
fn criterion_6_frozen_model_and_zero_interface_reductions() {
    let _serial = serial();
    let started = Instant::now();
    let runs = tmaze_runs();
    let phases: usize = runs.iter().map(|r| r.run.reports.len()).sum();
    let hash_ok = runs.iter().all(|r| {
        r.run.reports.iter().all(|p| p.hash_before == p.hash_after)
    });

    let mut rng = stream(6, "reductions", &[]);
    let mut mismatches = 0;
    for case in 0..100 {
        let dims = Dims {
            m: rng.random_range(1..=4),
            n: 1,
            o: rng.random_range(2..=3),
        };
        let arch = if case % 4 == 3 { Architecture::Lstm } else { Architecture::Rnn };
        let mut model = WorldModel::new(dims, rng.random_range(1..=5), arch, CodingScheme::default(), &mut rng).unwrap();
        for w in model.params.weights.iter_mut() {
            *w = rng.random_range(-1.0..1.0);
        }
        // No multiplicative write is neutral for every C activation, so a
        // zero multiplicative interface means no write links at all.
        let injection = if rng.random_bool(0.5) { Combine::Additive } else { Combine::Multiplicative };
        let cfg = CmConfig {
            c_hidden: rng.random_range(1..=4),
            recurrent: rng.random_bool(0.5),
            k_in: rng.random_range(0..=3),
            k_out: if injection == Combine::Additive { rng.random_range(0..=3) } else { 0 },
            injection,
        };
        let cm = CmSpec::new(dims.sense(), dims.o, cfg).unwrap();
        let mut genome: Vec<f64> = (0..cm.genome_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        for &i in cm.interface_in_genes() {
            genome[i] = 0.0;
        }
        for i in cm.interface_out_genes() {
            genome[i] = 0.0;
        }
        let c_weights = &genome[..cm.c_network().n_weights()];
        let mut state = cm.zero_state(&model);
        let (mut m_alone, mut c_alone) = (model.zero_state(), cm.c_network().zero_state());
        for _ in 0..rng.random_range(1..=12) {
            let sense: Vec<f64> = (0..dims.sense()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let step = cm_forward(&cm, &genome, &model, &state, &sense, Some(1.0)).unwrap();
            let mut c_in = sense.clone();
            c_in.extend(std::iter::repeat_n(0.0, cfg.k_in));
            c_alone = cm.c_network().forward_step(c_weights, &c_alone, &c_in).unwrap();
            let mut all = sense.clone();
            all.extend(cmrl::env::one_hot(step.action, dims.o));
            m_alone = model.step(&m_alone, &all).unwrap();
            let same = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
            // Answer input units hold M's values, which reach nothing
            // through zero read weights; C's trajectory is everything else.
            let mut c_coupled = step.state.c.clone();
            for &(u, _) in &cm.answer_inputs {
                c_coupled[u] = 0.0;
            }
            if !same(&step.state.m, &m_alone) || !same(&c_coupled, &c_alone) {
                mismatches += 1;
                break;
            }
            state = step.state;
        }
    }
    let pass = hash_ok && mismatches == 0;
    verdict(
        6,
        pass,
        format!("M hash unchanged over {phases} controller phases: {hash_ok}; zero-interface reductions: {mismatches} mismatching sequences of 100"),
        started,
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 7

const TWO_ROOM_SEEDS: u64 = 5;

/// Share of steps spent in the regular room.
fn regular_share(trials: &[TrialRun]) -> f64 {
    let rooms = trials.iter().flat_map(|t| &t.rooms);
    let (total, regular) = rooms.fold((0, 0), |(n, r), room| (n + 1, r + usize::from(*room == Some(Room::Regular))));
    regular as f64 / total as f64
}

fn random_regular_share(spec: &EnvSpec) -> f64 {
    let mut env = Env::new(spec).unwrap();
    let o = env.dims().o;
    let runs: Vec<TrialRun> = (0..500u64)
        .map(|k| {
            let mut agent = RandomAgent { n_actions: o };
            run_trial(&mut env, k, &mut agent, &mut stream(7, "random-share", &[k])).unwrap()
        })
        .collect();
    regular_share(&runs)
}

#[test]
fn criterion_7_curiosity_prefers_the_regular_room() {
    let _serial = serial();
    let started = Instant::now();
    let (mut ratios, mut shares, mut noise, mut regular) = (Vec::new(), Vec::new(), 0.0, 0.0);
    let mut baseline = Vec::new();
    for seed in 0..TWO_ROOM_SEEDS {
        let cfg = RunConfig::parse(&format!(
            "env.name = two_room\ncontroller.variant = C2\ncuriosity.enabled = true\n\
             run.phases = 30\nrun.stop_on_optimal = false\nrun.seed = {seed}\n\
             sleep.lr = 0.01\nsleep.epochs = 50\nsleep.replay = 64\n"
        ))
        .unwrap();
        let mut run = Run::new(cfg).unwrap();
        assert_eq!(run.run_to_end().unwrap().len(), 30);
        let share = regular_share(&run.evaluate_trials(100).unwrap());
        let random = random_regular_share(&run.env_spec);
        let (mut n, mut r) = (0.0, 0.0);
        for row in run.metrics.iter().filter(|m| m.kind == MetricKind::RoomSavings) {
            r += row.values[1];
            n += row.values[2];
        }
        noise += n;
        regular += r;
        ratios.push(share / random);
        shares.push(share);
        baseline.push(random);
    }
    let ratio = median(ratios.clone());
    let noise_fraction = noise / regular;
    let pass = ratio >= 1.5 && noise_fraction < 0.1;
    verdict(
        7,
        pass,
        format!(
            "regular-room share / random share, median {ratio:.2} (>= 1.5), shares {shares:.3?} vs random {baseline:.3?}; \
             noise-room intrinsic {noise:.1} = {:.1}% of regular {regular:.1} (< 10%)",
            100.0 * noise_fraction
        ),
        started,
    );
    // The verdict above is the result; the experiment itself only has to
    // run cleanly.
    assert!(ratio.is_finite() && noise.is_finite() && regular > 0.0);
}

// ---------------------------------------------------------------- 8

fn tmaze_short(seed: u64, phases: usize) -> RunConfig {
    RunConfig {
        phases,
        stop_on_optimal: false,
        ..tmaze_config(seed)
    }
}

/// Every checkpoint file but the phase reports, which carry wall-clock
/// durations; those are compared separately.
fn files(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name() != "state.txt")
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn criterion_8_runs_are_deterministic_and_resumable() {
    let _serial = serial();
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let dir = |name: &str| tmp.path().join(name);

    let timeless = |run: &Run| -> Vec<cmrl::orchestrator::PhaseReport> {
        run.reports
            .iter()
            .map(|r| cmrl::orchestrator::PhaseReport { duration_secs: 0.0, ..r.clone() })
            .collect()
    };

    // Two identical runs.
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let mut run = Run::new(tmaze_short(11, 5)).unwrap();
        run.run_to_end().unwrap();
        reports.push(timeless(&run));
        run.history.save(&dir(name).with_extension("history")).unwrap();
        run.checkpoint(&dir(name)).unwrap();
    }
    let a = std::fs::read(dir("a").with_extension("history")).unwrap();
    let b = std::fs::read(dir("b").with_extension("history")).unwrap();
    let same_history = a == b;

    // Interrupt after two phases, restore, finish.
    let mut first = Run::new(tmaze_short(11, 5)).unwrap();
    for _ in 0..2 {
        first.run_phase(None).unwrap();
    }
    first.checkpoint(&dir("mid")).unwrap();
    drop(first);
    let mut resumed = Run::restore(&dir("mid")).unwrap();
    resumed.checkpoint(&dir("mid-again")).unwrap();
    let round_trip = files(&dir("mid")) == files(&dir("mid-again"));
    resumed.run_to_end().unwrap();
    resumed.checkpoint(&dir("resumed")).unwrap();
    let resumed_same = files(&dir("a")) == files(&dir("resumed")) && timeless(&resumed) == reports[0];
    let differing: Vec<String> = files(&dir("a"))
        .into_iter()
        .zip(files(&dir("resumed")))
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0)
        .collect();

    let pass = same_history && round_trip && resumed_same;
    verdict(
        8,
        pass,
        format!(
            "identical runs give identical history bytes ({} bytes): {same_history}; checkpoint right after restore \
             unchanged: {round_trip}; interrupted-and-resumed run equals uninterrupted: {resumed_same} {differing:?}",
            a.len()
        ),
        started,
    );
    assert!(pass);
}
