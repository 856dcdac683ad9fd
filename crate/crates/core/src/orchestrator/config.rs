use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::controllers::{CmConfig, EsConfig, QConfig, StateMode, Variant};
use crate::curiosity::CuriosityConfig;
use crate::env::EnvSpec;
use crate::error::{Error, Result};
use crate::nn::Combine;
use crate::world_model::{Architecture, CodingScheme, SleepConfig, WeightCoding};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureConfig {
    pub enabled: bool,
    /// Propose a change after every `every`-th sleep phase.
    pub every: usize,
    pub retrain_epochs: usize,
    pub scoring_trials: usize,
}

impl Default for StructureConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            every: 2,
            retrain_epochs: 50,
            scoring_trials: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionConfig {
    /// `generations` is the budget per controller phase.
    pub es: EsConfig,
    pub eval_trials: usize,
    pub metric_trials: usize,
    pub init_scale: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            es: EsConfig::default(),
            eval_trials: 3,
            metric_trials: 20,
            init_scale: 0.5,
        }
    }
}

/// Everything a run needs. Parsed from `key = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvSpec,
    /// Environment seed; derived from the master seed when absent.
    pub env_seed: Option<u64>,
    pub variant: Variant,
    pub think_k: usize,
    pub model_hidden: usize,
    pub model_arch: Architecture,
    pub coding: CodingScheme,
    pub sleep: SleepConfig,
    pub sleep_replay: usize,
    pub structure: StructureConfig,
    pub evolution: EvolutionConfig,
    pub q: QConfig,
    pub q_state: StateMode,
    pub policy_state: StateMode,
    pub cm: CmConfig,
    pub curiosity: CuriosityConfig,
    pub phases: usize,
    pub trials_per_phase: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub stop_on_optimal: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvSpec::tmaze(3),
            env_seed: None,
            variant: Variant::C3,
            think_k: 0,
            model_hidden: 6,
            model_arch: Architecture::Rnn,
            coding: CodingScheme::default(),
            sleep: SleepConfig::default(),
            sleep_replay: 8,
            structure: StructureConfig::default(),
            evolution: EvolutionConfig::default(),
            q: QConfig::default(),
            q_state: StateMode::Markov,
            policy_state: StateMode::Markov,
            cm: CmConfig::default(),
            curiosity: CuriosityConfig::default(),
            phases: 5,
            trials_per_phase: 8,
            seed: 0,
            out: None,
            stop_on_optimal: true,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true/false, got {v:?}"))),
    }
}

fn parse_state(key: &str, v: &str) -> Result<StateMode> {
    match v {
        "observation" => Ok(StateMode::Observation),
        "sense" => Ok(StateMode::Sense),
        "markov" => Ok(StateMode::Markov),
        _ => Err(Error::Config(format!("{key}: unknown state mode {v:?}"))),
    }
}

fn state_name(s: StateMode) -> &'static str {
    match s {
        StateMode::Observation => "observation",
        StateMode::Sense => "sense",
        StateMode::Markov => "markov",
    }
}

/// Default spec for a named environment.
fn env_defaults(name: &str) -> Result<EnvSpec> {
    Ok(match name {
        "tmaze" => EnvSpec::tmaze(3),
        "recall" => EnvSpec::delayed_recall(5),
        "toggle" => EnvSpec::toggle(6),
        "two_room" => EnvSpec::two_room(),
        "oracle_mdp" => EnvSpec::oracle_mdp(),
        "grid" => EnvSpec::gridworld(crate::env::Goal::A),
        other => return Err(Error::Config(format!("unknown environment {other:?}"))),
    })
}

impl RunConfig {
    /// Parse a config file body. Unknown keys are errors; keys not given
    /// keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            pairs.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let mut cfg = RunConfig::default();
        if let Some((_, _, name)) = pairs.iter().find(|(_, k, _)| k == "env.name") {
            cfg.env = env_defaults(name)?;
        }
        let mut env_params: BTreeMap<String, f64> = BTreeMap::new();
        let mut env_max_steps: Option<usize> = None;
        let mut weights_kind: Option<String> = None;
        let (mut bits_per_weight, mut sigma_w, mut delta_w) = (16u32, 1.0, 1.0 / 256.0);
        if let WeightCoding::CountBased { bits_per_weight: b } = cfg.coding.weight_coding {
            bits_per_weight = b;
        }
        for (line, key, v) in &pairs {
            let k = key.as_str();
            let v = v.as_str();
            match k {
                "env.name" => {}
                "env.seed" => cfg.env_seed = Some(parse(k, v)?),
                "env.max_steps" => env_max_steps = Some(parse(k, v)?),
                _ if k.starts_with("env.") => {
                    env_params.insert(k["env.".len()..].to_string(), parse(k, v)?);
                }
                "controller.variant" => {
                    cfg.variant = match v {
                        "C1" | "c1" => Variant::C1,
                        "C2" | "c2" => Variant::C2,
                        "C3" | "c3" => Variant::C3,
                        _ => return Err(Error::Config(format!("{k}: unknown variant {v:?}"))),
                    }
                }
                "controller.think_k" => cfg.think_k = parse(k, v)?,
                "controller.state" => cfg.policy_state = parse_state(k, v)?,
                "model.hidden" => cfg.model_hidden = parse(k, v)?,
                "model.arch" => {
                    cfg.model_arch = match v {
                        "rnn" => Architecture::Rnn,
                        "lstm" => Architecture::Lstm,
                        _ => return Err(Error::Config(format!("{k}: unknown architecture {v:?}"))),
                    }
                }
                "coding.sigma_e" => cfg.coding.sigma_e = parse(k, v)?,
                "coding.delta_e" => cfg.coding.delta_e = parse(k, v)?,
                "coding.zero_threshold" => cfg.coding.zero_weight_threshold = parse(k, v)?,
                "coding.weights" => weights_kind = Some(v.to_string()),
                "coding.bits_per_weight" => bits_per_weight = parse(k, v)?,
                "coding.sigma_w" => sigma_w = parse(k, v)?,
                "coding.delta_w" => delta_w = parse(k, v)?,
                "sleep.epochs" => cfg.sleep.epochs = parse(k, v)?,
                "sleep.lr" => cfg.sleep.lr = parse(k, v)?,
                "sleep.l2" => cfg.sleep.l2 = parse(k, v)?,
                "sleep.clip" => cfg.sleep.clip = parse(k, v)?,
                "sleep.replay" => cfg.sleep_replay = parse(k, v)?,
                "structure.enabled" => cfg.structure.enabled = parse_bool(k, v)?,
                "structure.every" => cfg.structure.every = parse(k, v)?,
                "structure.retrain_epochs" => cfg.structure.retrain_epochs = parse(k, v)?,
                "structure.scoring_trials" => cfg.structure.scoring_trials = parse(k, v)?,
                "evolution.mu" => cfg.evolution.es.mu = parse(k, v)?,
                "evolution.lambda" => cfg.evolution.es.lambda = parse(k, v)?,
                "evolution.sigma" => cfg.evolution.es.sigma = parse(k, v)?,
                "evolution.generations" => cfg.evolution.es.generations = parse(k, v)?,
                "evolution.eval_trials" => cfg.evolution.eval_trials = parse(k, v)?,
                "evolution.metric_trials" => cfg.evolution.metric_trials = parse(k, v)?,
                "evolution.init_scale" => cfg.evolution.init_scale = parse(k, v)?,
                "q.gamma" => cfg.q.gamma = parse(k, v)?,
                "q.alpha" => cfg.q.alpha = parse(k, v)?,
                "q.epsilon_start" => cfg.q.epsilon_start = parse(k, v)?,
                "q.epsilon_end" => cfg.q.epsilon_end = parse(k, v)?,
                "q.state" => cfg.q_state = parse_state(k, v)?,
                "cm.hidden" => cfg.cm.c_hidden = parse(k, v)?,
                "cm.recurrent" => cfg.cm.recurrent = parse_bool(k, v)?,
                "cm.k_in" => cfg.cm.k_in = parse(k, v)?,
                "cm.k_out" => cfg.cm.k_out = parse(k, v)?,
                "cm.injection" => {
                    cfg.cm.injection = match v {
                        "additive" => Combine::Additive,
                        "multiplicative" => Combine::Multiplicative,
                        _ => return Err(Error::Config(format!("{k}: unknown injection {v:?}"))),
                    }
                }
                "curiosity.enabled" => cfg.curiosity.enabled = parse_bool(k, v)?,
                "curiosity.eta" => cfg.curiosity.eta = parse(k, v)?,
                "curiosity.clip_negative" => cfg.curiosity.clip_negative = parse_bool(k, v)?,
                "curiosity.probe_epochs" => cfg.curiosity.probe_epochs = parse(k, v)?,
                "curiosity.probe_lr" => cfg.curiosity.probe_lr = parse(k, v)?,
                "run.phases" => cfg.phases = parse(k, v)?,
                "run.trials_per_phase" => cfg.trials_per_phase = parse(k, v)?,
                "run.seed" => cfg.seed = parse(k, v)?,
                "run.out" => cfg.out = Some(PathBuf::from(v)),
                "run.stop_on_optimal" => cfg.stop_on_optimal = parse_bool(k, v)?,
                _ => return Err(Error::Config(format!("line {line}: unknown key {k:?}"))),
            }
        }
        if let Some(kind) = weights_kind {
            cfg.coding.weight_coding = match kind.as_str() {
                "count" => WeightCoding::CountBased { bits_per_weight },
                "gaussian" => WeightCoding::Gaussian { sigma_w, delta_w },
                other => return Err(Error::Config(format!("coding.weights: unknown scheme {other:?}"))),
            };
        } else if let WeightCoding::CountBased { .. } = cfg.coding.weight_coding {
            cfg.coding.weight_coding = WeightCoding::CountBased { bits_per_weight };
        }
        // Parameters that set the trial cap of their environment.
        let name = cfg.env.name.clone();
        for (k, v) in env_params {
            cfg.env.params.insert(k, v);
        }
        let count = |key: &str| cfg.env.param(key).map(|v| v as usize);
        match name.as_str() {
            "tmaze" => {
                if let Some(l) = count("corridor_length") {
                    cfg.env.max_steps = 2 * l + 2;
                }
            }
            "recall" => {
                if let Some(d) = count("delay") {
                    cfg.env.max_steps = d + 1;
                }
            }
            "toggle" => {
                if let Some(t) = count("length") {
                    cfg.env.max_steps = t;
                    cfg.env.params.remove("length");
                }
            }
            _ => {}
        }
        if let Some(m) = env_max_steps {
            cfg.env.max_steps = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases == 0 {
            return Err(Error::Config("run.phases must be >= 1".into()));
        }
        if self.trials_per_phase == 0 {
            return Err(Error::Config("run.trials_per_phase must be >= 1".into()));
        }
        if self.model_hidden == 0 {
            return Err(Error::Config("model.hidden must be >= 1".into()));
        }
        if self.structure.every == 0 {
            return Err(Error::Config("structure.every must be >= 1".into()));
        }
        if self.evolution.eval_trials == 0 {
            return Err(Error::Config("evolution.eval_trials must be >= 1".into()));
        }
        if !(self.evolution.init_scale > 0.0) {
            return Err(Error::Config("evolution.init_scale must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.q.gamma) {
            return Err(Error::Config("q.gamma must be in [0, 1)".into()));
        }
        self.coding.validate()?;
        self.evolution.es.validate()?;
        self.curiosity.validate()?;
        crate::env::Env::new(&self.env)?;
        Ok(())
    }

    /// Serialize every setting; [`parse`](Self::parse) reads it back exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("env.name", self.env.name.clone());
        kv("env.max_steps", self.env.max_steps.to_string());
        if let Some(seed) = self.env_seed {
            kv("env.seed", seed.to_string());
        }
        for (k, v) in &self.env.params {
            kv(&format!("env.{k}"), v.to_string());
        }
        let variant = match self.variant {
            Variant::C1 => "C1",
            Variant::C2 => "C2",
            Variant::C3 => "C3",
        };
        kv("controller.variant", variant.into());
        kv("controller.think_k", self.think_k.to_string());
        kv("controller.state", state_name(self.policy_state).into());
        kv("model.hidden", self.model_hidden.to_string());
        let arch = match self.model_arch {
            Architecture::Rnn => "rnn",
            Architecture::Lstm => "lstm",
        };
        kv("model.arch", arch.into());
        kv("coding.sigma_e", self.coding.sigma_e.to_string());
        kv("coding.delta_e", self.coding.delta_e.to_string());
        kv("coding.zero_threshold", self.coding.zero_weight_threshold.to_string());
        match self.coding.weight_coding {
            WeightCoding::CountBased { bits_per_weight } => {
                kv("coding.weights", "count".into());
                kv("coding.bits_per_weight", bits_per_weight.to_string());
            }
            WeightCoding::Gaussian { sigma_w, delta_w } => {
                kv("coding.weights", "gaussian".into());
                kv("coding.sigma_w", sigma_w.to_string());
                kv("coding.delta_w", delta_w.to_string());
            }
        }
        kv("sleep.epochs", self.sleep.epochs.to_string());
        kv("sleep.lr", self.sleep.lr.to_string());
        kv("sleep.l2", self.sleep.l2.to_string());
        kv("sleep.clip", self.sleep.clip.to_string());
        kv("sleep.replay", self.sleep_replay.to_string());
        kv("structure.enabled", self.structure.enabled.to_string());
        kv("structure.every", self.structure.every.to_string());
        kv("structure.retrain_epochs", self.structure.retrain_epochs.to_string());
        kv("structure.scoring_trials", self.structure.scoring_trials.to_string());
        let e = &self.evolution;
        kv("evolution.mu", e.es.mu.to_string());
        kv("evolution.lambda", e.es.lambda.to_string());
        kv("evolution.sigma", e.es.sigma.to_string());
        kv("evolution.generations", e.es.generations.to_string());
        kv("evolution.eval_trials", e.eval_trials.to_string());
        kv("evolution.metric_trials", e.metric_trials.to_string());
        kv("evolution.init_scale", e.init_scale.to_string());
        kv("q.gamma", self.q.gamma.to_string());
        kv("q.alpha", self.q.alpha.to_string());
        kv("q.epsilon_start", self.q.epsilon_start.to_string());
        kv("q.epsilon_end", self.q.epsilon_end.to_string());
        kv("q.state", state_name(self.q_state).into());
        kv("cm.hidden", self.cm.c_hidden.to_string());
        kv("cm.recurrent", self.cm.recurrent.to_string());
        kv("cm.k_in", self.cm.k_in.to_string());
        kv("cm.k_out", self.cm.k_out.to_string());
        let inj = match self.cm.injection {
            Combine::Additive => "additive",
            Combine::Multiplicative => "multiplicative",
        };
        kv("cm.injection", inj.into());
        let c = &self.curiosity;
        kv("curiosity.enabled", c.enabled.to_string());
        kv("curiosity.eta", c.eta.to_string());
        kv("curiosity.clip_negative", c.clip_negative.to_string());
        kv("curiosity.probe_epochs", c.probe_epochs.to_string());
        kv("curiosity.probe_lr", c.probe_lr.to_string());
        kv("run.phases", self.phases.to_string());
        kv("run.trials_per_phase", self.trials_per_phase.to_string());
        kv("run.seed", self.seed.to_string());
        if let Some(out) = &self.out {
            kv("run.out", out.display().to_string());
        }
        kv("run.stop_on_optimal", self.stop_on_optimal.to_string());
        s
    }
}
