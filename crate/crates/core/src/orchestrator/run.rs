use std::time::Instant;

use super::config::RunConfig;
use super::metrics::{MetricKind, MetricRow};
use crate::controllers::{
    learn_trial, run_trial, CmAgent, CmSpec, EvolutionStrategy, Genome, LinearPolicy, PolicyAgent, QAgent,
    QFunction, StateTracker, TrialRun, Variant, remap_features,
};
use crate::curiosity::{intrinsic_reward, probe, room_rewards};
use crate::env::{optimal_return, Dims, Env, EnvSpec};
use crate::error::{Error, Result};
use crate::history::{HistoryStore, SampleRule, TrialSpan};
use crate::rng::{stream, sub_seed};
use crate::world_model::{accept_if_shorter, episodes, CodeLengthReport, Mutation, SleepConfig, WorldModel};

/// Trained controller parameters carried between phases.
#[derive(Debug, Clone, PartialEq)]
pub enum ControllerState {
    Q(QFunction),
    Policy { policy: LinearPolicy, es: EvolutionStrategy },
    Cm { es: EvolutionStrategy },
}

/// Summary of one completed phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseReport {
    /// 1-based.
    pub phase: usize,
    /// Mean external return of the phase's scoring trials.
    pub metric: f64,
    /// Code length of the post-sleep model on `scored_trials`.
    pub code_length: CodeLengthReport,
    pub scored_trials: Vec<usize>,
    pub intrinsic_total: f64,
    pub duration_secs: f64,
    /// M's weight hash when the controller phase began and ended.
    pub hash_before: String,
    pub hash_after: String,
    pub h: usize,
    pub first_trial: usize,
    pub last_trial: usize,
    pub mutation: Option<Mutation>,
    pub accepted: bool,
    pub diverged: bool,
}

/// The complete state of a run between phases.
#[derive(Debug, Clone)]
pub struct Run {
    pub cfg: RunConfig,
    pub env_spec: EnvSpec,
    pub history: HistoryStore,
    pub model: WorldModel,
    pub controller: ControllerState,
    pub reports: Vec<PhaseReport>,
    pub metrics: Vec<MetricRow>,
    pub next_phase: usize,
    pub stopped: bool,
}

/// Scratch state shared by the trials of one controller phase.
struct PhaseScratch {
    phase: usize,
    intrinsic_total: f64,
    savings: [f64; 3],
    has_rooms: bool,
    rows: Vec<MetricRow>,
}

pub(super) fn resolve_env(cfg: &RunConfig) -> EnvSpec {
    let seed = cfg.env_seed.unwrap_or_else(|| sub_seed(cfg.seed, "env", &[]));
    cfg.env.clone().with_seed(seed)
}

fn initial_population(cfg: &RunConfig, len: usize) -> Vec<Genome> {
    let mut rng = stream(cfg.seed, "init-controller", &[]);
    (0..cfg.evolution.es.mu)
        .map(|_| Genome::random(len, cfg.evolution.init_scale, &mut rng))
        .collect()
}

pub(super) fn cm_spec(cfg: &RunConfig, dims: Dims) -> Result<CmSpec> {
    CmSpec::new(dims.sense(), dims.o, cfg.cm)
}

/// Record a finished trial: probe it for curiosity, credit the intrinsic
/// reward on its last step and append it to the history.
fn record_trial(
    history: &mut HistoryStore,
    model: &WorldModel,
    cfg: &RunConfig,
    scratch: &mut PhaseScratch,
    mut run: TrialRun,
    tag: &str,
) -> Result<(TrialSpan, f64)> {
    let trial_id = history.trials().len() + 1;
    let mut intrinsic = 0.0;
    if cfg.curiosity.enabled {
        let p = probe(model, &run.records, &cfg.curiosity)?;
        intrinsic = p.intrinsic;
        if scratch.has_rooms {
            let rr = room_rewards(&p.step_savings, &run.rooms, intrinsic);
            for (acc, v) in scratch.savings.iter_mut().zip(rr) {
                *acc += v;
            }
        }
        scratch.rows.push(MetricRow::new(
            MetricKind::Curiosity,
            scratch.phase,
            trial_id,
            [p.before.total, p.after.total, intrinsic],
        ));
    }
    scratch.intrinsic_total += intrinsic;
    let base = history.len();
    for r in &mut run.records {
        r.t += base;
    }
    if let Some(last) = run.records.last_mut() {
        last.intrinsic = intrinsic;
    }
    let span = history.append_trial(tag, run.records)?;
    Ok((span, intrinsic))
}

impl Run {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let env_spec = resolve_env(&cfg);
        let dims = Env::new(&env_spec)?.dims();
        let history = HistoryStore::new(dims.m, dims.n, dims.o, cfg.seed);
        let mut rng = stream(cfg.seed, "init-model", &[]);
        let model = WorldModel::new(dims, cfg.model_hidden, cfg.model_arch, cfg.coding, &mut rng)?;
        let controller = match cfg.variant {
            Variant::C1 => {
                let len = StateTracker::new(cfg.q_state, &model).state_len();
                ControllerState::Q(QFunction::new(dims.o, len, cfg.q.gamma, cfg.q.alpha)?)
            }
            Variant::C2 => {
                let policy = LinearPolicy {
                    n_actions: dims.o,
                    state_len: StateTracker::new(cfg.policy_state, &model).state_len(),
                };
                let pop = initial_population(&cfg, policy.genome_len());
                ControllerState::Policy {
                    policy,
                    es: EvolutionStrategy::new(cfg.evolution.es, pop)?,
                }
            }
            Variant::C3 => {
                let cm = cm_spec(&cfg, dims)?;
                let pop = initial_population(&cfg, cm.genome_len());
                ControllerState::Cm {
                    es: EvolutionStrategy::new(cfg.evolution.es, pop)?,
                }
            }
        };
        Ok(Self {
            cfg,
            env_spec,
            history,
            model,
            controller,
            reports: Vec::new(),
            metrics: Vec::new(),
            next_phase: 0,
            stopped: false,
        })
    }

    pub fn dims(&self) -> Dims {
        self.model.dims()
    }

    pub fn is_finished(&self) -> bool {
        self.stopped || self.next_phase >= self.cfg.phases
    }

    /// Target for the stopping rule, when the optimum can be computed.
    pub fn optimum(&self) -> Option<f64> {
        optimal_return(&self.env_spec).ok()
    }

    /// Run phases until the budget is spent or the stopping rule fires,
    /// checkpointing after each phase when an output directory is set.
    pub fn run_to_end(&mut self) -> Result<Vec<PhaseReport>> {
        let optimum = if self.cfg.stop_on_optimal { self.optimum() } else { None };
        while !self.is_finished() {
            if let Err(e) = self.run_phase(optimum) {
                if let Some(dir) = self.cfg.out.clone() {
                    let _ = std::fs::create_dir_all(&dir);
                    let _ = self.history.save(&dir.join("history.partial.txt"));
                }
                return Err(e);
            }
            if let Some(dir) = self.cfg.out.clone() {
                self.checkpoint(&dir)?;
            }
        }
        Ok(self.reports.clone())
    }

    /// One iteration of the alternating loop.
    pub fn run_phase(&mut self, optimum: Option<f64>) -> Result<PhaseReport> {
        let started = Instant::now();
        let phase = self.next_phase;
        let first_trial = self.history.trials().len() + 1;
        let mut scratch = PhaseScratch {
            phase: phase + 1,
            intrinsic_total: 0.0,
            savings: [0.0; 3],
            has_rooms: self.env_spec.name == "two_room",
            rows: Vec::new(),
        };

        // Controller phase with M frozen.
        let hash_before = self.model.weight_hash();
        let metric = self.controller_phase(phase, &mut scratch)?;
        let hash_after = self.model.weight_hash();
        if hash_before != hash_after {
            return Err(Error::Contract(format!("M changed during controller phase {}", phase + 1)));
        }

        // Sleep phase.
        let latest = self.history.latest_trial().cloned().ok_or(Error::EmptyHistory)?;
        let mut rng = stream(self.cfg.seed, "replay", &[phase as u64]);
        let spans = self
            .history
            .sample_trials(self.cfg.sleep_replay.max(1), SampleRule::AlwaysIncludeLatest, &mut rng)?;
        let pre_sleep = self.model.clone();
        let outcome = self.model.sleep_train(&self.history, &spans, &self.cfg.sleep)?;
        self.model = outcome.model;

        // Structural search.
        let (mut mutation, mut accepted) = (None, false);
        if self.cfg.structure.enabled && (phase + 1) % self.cfg.structure.every == 0 {
            let mut rng = stream(self.cfg.seed, "scoring", &[phase as u64]);
            let scoring = self.history.sample_trials(
                self.cfg.structure.scoring_trials.max(1),
                SampleRule::AlwaysIncludeLatest,
                &mut rng,
            )?;
            let mut rng = stream(self.cfg.seed, "structure", &[phase as u64]);
            let (candidate, m) = self.model.propose_structural_change(&mut rng)?;
            let retrain = SleepConfig {
                epochs: self.cfg.structure.retrain_epochs,
                ..self.cfg.sleep
            };
            let eps = episodes(&self.history, &scoring)?;
            let acc = accept_if_shorter(&self.model, &candidate, &eps, &retrain)?;
            mutation = Some(m);
            accepted = acc.accepted;
            if accepted {
                let old_h = self.model.h();
                self.model = acc.model;
                self.adapt_controller(old_h);
            }
        }

        // Compression progress on the latest trial across this sleep.
        let before = pre_sleep.code_length(&self.history, std::slice::from_ref(&latest))?;
        let after = self.model.code_length(&self.history, std::slice::from_ref(&latest))?;
        let phase_intrinsic = intrinsic_reward(&before, &after, &self.cfg.curiosity)?;
        scratch.rows.push(MetricRow::new(
            MetricKind::CuriosityPhase,
            phase + 1,
            latest.trial_id,
            [before.total, after.total, phase_intrinsic],
        ));

        let report_cl = self.model.code_length(&self.history, &spans)?;
        scratch.rows.push(MetricRow::new(
            MetricKind::Model,
            phase + 1,
            self.model.h(),
            [report_cl.bits_m, report_cl.bits_h, report_cl.e],
        ));
        if scratch.has_rooms {
            scratch
                .rows
                .push(MetricRow::new(MetricKind::RoomSavings, phase + 1, 0, scratch.savings));
        }
        let report = PhaseReport {
            phase: phase + 1,
            metric,
            code_length: report_cl,
            scored_trials: spans.iter().map(|s| s.trial_id).collect(),
            intrinsic_total: scratch.intrinsic_total,
            duration_secs: started.elapsed().as_secs_f64(),
            hash_before,
            hash_after,
            h: self.model.h(),
            first_trial,
            last_trial: self.history.trials().len(),
            mutation,
            accepted,
            diverged: outcome.diverged,
        };
        scratch.rows.push(MetricRow::new(
            MetricKind::Phase,
            phase + 1,
            report.last_trial + 1 - first_trial,
            [metric, report.intrinsic_total, report_cl.total],
        ));
        self.metrics.extend(scratch.rows);
        self.reports.push(report.clone());
        self.next_phase += 1;
        if let Some(opt) = optimum {
            if metric >= opt - 0.05 * opt.abs() {
                self.stopped = true;
            }
        }
        Ok(report)
    }

    /// Play `trials` fresh trials with the current controller (greedy for
    /// C1, the best parent for C2/C3) without recording them. Returns the
    /// external return of each.
    pub fn evaluate(&self, trials: usize) -> Result<Vec<f64>> {
        Ok(self.evaluate_trials(trials)?.iter().map(|r| r.external_return).collect())
    }

    /// The evaluation trials behind [`Run::evaluate`], in full.
    pub fn evaluate_trials(&self, trials: usize) -> Result<Vec<TrialRun>> {
        let mut env = Env::new(&self.env_spec)?;
        let cfg = &self.cfg;
        let model = &self.model;
        let mut out = Vec::with_capacity(trials);
        for k in 0..trials {
            let seed = sub_seed(cfg.seed, "evaluate", &[k as u64]);
            let mut rng = stream(cfg.seed, "evaluate-explore", &[k as u64]);
            let run = match &self.controller {
                ControllerState::Q(q) => {
                    let mut agent = QAgent::new(q, StateTracker::new(cfg.q_state, model), 0.0);
                    run_trial(&mut env, seed, &mut agent, &mut rng)?
                }
                ControllerState::Policy { policy, es } => {
                    let mut agent = PolicyAgent {
                        policy: *policy,
                        genome: &es.parents[0].weights,
                        tracker: StateTracker::new(cfg.policy_state, model),
                    };
                    run_trial(&mut env, seed, &mut agent, &mut rng)?
                }
                ControllerState::Cm { es } => {
                    let cm = cm_spec(cfg, model.dims())?;
                    let mut agent = CmAgent::new(&cm, &es.parents[0].weights, model, cfg.think_k);
                    run_trial(&mut env, seed, &mut agent, &mut rng)?
                }
            };
            out.push(run);
        }
        Ok(out)
    }

    /// Keep controller inputs aligned after M's hidden layer changed size.
    fn adapt_controller(&mut self, old_h: usize) {
        let new_h = self.model.h();
        if new_h == old_h {
            return;
        }
        let sense = self.dims().sense();
        let map = remap_features(sense, old_h, new_h);
        match &mut self.controller {
            ControllerState::Q(q) if self.cfg.q_state == crate::controllers::StateMode::Markov => {
                *q = q.remap(&map);
            }
            ControllerState::Policy { policy, es } if self.cfg.policy_state == crate::controllers::StateMode::Markov => {
                let old = *policy;
                for g in es.parents.iter_mut() {
                    let (p, w) = old.remap(&g.weights, &map);
                    *policy = p;
                    g.weights = w;
                }
                if let Some(b) = es.best.as_mut() {
                    b.weights = old.remap(&b.weights, &map).1;
                }
            }
            _ => {}
        }
    }

    /// Returns the phase's controller metric.
    fn controller_phase(&mut self, phase: usize, scratch: &mut PhaseScratch) -> Result<f64> {
        let mut env = Env::new(&self.env_spec)?;
        let cfg = self.cfg.clone();
        let model = self.model.clone();
        match &mut self.controller {
            ControllerState::Q(q) => {
                let total = (cfg.phases * cfg.trials_per_phase).max(2) - 1;
                let tag = format!("{}:learn", self.env_spec.name);
                for i in 0..cfg.trials_per_phase {
                    let k = phase * cfg.trials_per_phase + i;
                    let eps = cfg.q.epsilon(k as f64 / total as f64);
                    let seed = sub_seed(cfg.seed, "trial", &[phase as u64, i as u64]);
                    let mut rng = stream(cfg.seed, "explore", &[phase as u64, i as u64]);
                    let frozen = q.clone();
                    let mut agent = QAgent::new(&frozen, StateTracker::new(cfg.q_state, &model), eps);
                    let run = run_trial(&mut env, seed, &mut agent, &mut rng)?;
                    let transitions = std::mem::take(&mut agent.transitions);
                    let (_, intrinsic) = record_trial(&mut self.history, &model, &cfg, scratch, run, &tag)?;
                    learn_trial(q, &transitions, intrinsic)?;
                }
                // Mean external return of the last 20 trials.
                let trials = self.history.trials();
                let recent = &trials[trials.len().saturating_sub(20)..];
                Ok(recent.iter().map(|s| s.external_return).sum::<f64>() / recent.len() as f64)
            }
            ControllerState::Policy { policy, es } => {
                let policy = *policy;
                let mut play = |env: &mut Env, genome: &[f64], seed: u64| -> Result<TrialRun> {
                    let mut agent = PolicyAgent {
                        policy,
                        genome,
                        tracker: StateTracker::new(cfg.policy_state, &model),
                    };
                    let mut rng = stream(cfg.seed, "policy", &[seed]);
                    run_trial(env, seed, &mut agent, &mut rng)
                };
                evolve_phase(&cfg, phase, es, &mut env, &mut self.history, &model, scratch, &mut play, &self.env_spec.name)
            }
            ControllerState::Cm { es } => {
                let cm = cm_spec(&cfg, model.dims())?;
                let mut play = |env: &mut Env, genome: &[f64], seed: u64| -> Result<TrialRun> {
                    let mut agent = CmAgent::new(&cm, genome, &model, cfg.think_k);
                    let mut rng = stream(cfg.seed, "policy", &[seed]);
                    run_trial(env, seed, &mut agent, &mut rng)
                };
                evolve_phase(&cfg, phase, es, &mut env, &mut self.history, &model, scratch, &mut play, &self.env_spec.name)
            }
        }
    }
}

type Player<'a> = dyn FnMut(&mut Env, &[f64], u64) -> Result<TrialRun> + 'a;

/// Evolve for one phase, then score the best parent on fresh trials.
#[allow(clippy::too_many_arguments)]
fn evolve_phase(
    cfg: &RunConfig,
    phase: usize,
    es: &mut EvolutionStrategy,
    env: &mut Env,
    history: &mut HistoryStore,
    model: &WorldModel,
    scratch: &mut PhaseScratch,
    play: &mut Player<'_>,
    env_name: &str,
) -> Result<f64> {
    let eval_tag = format!("{env_name}:eval");
    let mut fatal: Option<Error> = None;
    for g in 0..cfg.evolution.es.generations {
        let generation = es.generation;
        let mut evaluate = |weights: &[f64], _gen: usize| -> Result<f64> {
            let mut total = 0.0;
            for e in 0..cfg.evolution.eval_trials {
                let seed = sub_seed(cfg.seed, "eval", &[phase as u64, g as u64, e as u64]);
                let run = play(env, weights, seed)?;
                match record_trial(history, model, cfg, scratch, run, &eval_tag) {
                    Ok((span, intrinsic)) => total += span.external_return + intrinsic,
                    Err(err) => {
                        let msg = err.to_string();
                        fatal.get_or_insert(err);
                        return Err(Error::Contract(msg));
                    }
                }
            }
            Ok(total / cfg.evolution.eval_trials as f64)
        };
        let mut rng = stream(cfg.seed, "es", &[phase as u64, g as u64]);
        let stats = es.step(&mut evaluate, &mut rng);
        if let Some(err) = fatal.take() {
            return Err(err);
        }
        scratch.rows.push(MetricRow::new(
            MetricKind::Generation,
            phase + 1,
            generation,
            [stats.best_fitness, stats.mean_fitness, stats.sigma],
        ));
    }
    let best = es.parents[0].weights.clone();
    let metric_tag = format!("{env_name}:metric");
    let n = cfg.evolution.metric_trials.max(1);
    let mut total = 0.0;
    for k in 0..n {
        let seed = sub_seed(cfg.seed, "metric", &[phase as u64, k as u64]);
        let run = play(env, &best, seed)?;
        total += run.external_return;
        record_trial(history, model, cfg, scratch, run, &metric_tag)?;
    }
    Ok(total / n as f64)
}
