//! Checkpoint directory layout:
//!
//! ```text
//! config.txt      run configuration
//! history.txt     the full history store
//! model.txt       the world model
//! controller.txt  controller parameters and search state
//! state.txt       phase counter and phase reports
//! metrics.csv     metric rows
//! ```
//!
//! All per-phase randomness is derived from the master seed and the phase
//! index, so no generator state needs saving.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::config::RunConfig;
use super::metrics::{read_csv, write_csv};
use super::run::{resolve_env, ControllerState, PhaseReport, Run};
use crate::controllers::{EvolutionStrategy, Genome, LinearPolicy, QFunction};
use crate::env::Env;
use crate::error::{parse_err, Error, Result};
use crate::history::HistoryStore;
use crate::textfmt::{fmt_f64, header_value, parse_f64, parse_usize};
use crate::world_model::{CodeLengthReport, Mutation, WorldModel};

const CONTROLLER: &str = "controller";
const STATE: &str = "run state";

fn mutation_str(m: Option<Mutation>) -> &'static str {
    match m {
        None => "none",
        Some(Mutation::AddUnit) => "add_unit",
        Some(Mutation::AddLink) => "add_link",
        Some(Mutation::PruneLink) => "prune_link",
        Some(Mutation::PruneUnit) => "prune_unit",
    }
}

fn parse_mutation(s: &str, line: usize) -> Result<Option<Mutation>> {
    Ok(match s {
        "none" => None,
        "add_unit" => Some(Mutation::AddUnit),
        "add_link" => Some(Mutation::AddLink),
        "prune_link" => Some(Mutation::PruneLink),
        "prune_unit" => Some(Mutation::PruneUnit),
        other => return Err(parse_err(STATE, line, format!("mutation {other:?}"))),
    })
}

fn header_usize(line: &str, key: &str, what: &'static str, n: usize) -> Result<usize> {
    let v = header_value(line, key).ok_or_else(|| parse_err(what, n, format!("header lacks {key}=")))?;
    parse_usize(v, what, n)
}

fn write_es(out: &mut String, es: &EvolutionStrategy) {
    let _ = writeln!(
        out,
        "es sigma={} generation={} parents={} best={}",
        fmt_f64(es.sigma),
        es.generation,
        es.parents.len(),
        usize::from(es.best.is_some())
    );
    for g in es.parents.iter().chain(es.best.iter()) {
        let fit = g.fitness.map_or("none".to_string(), fmt_f64);
        let ws: Vec<String> = g.weights.iter().map(|w| fmt_f64(*w)).collect();
        let _ = writeln!(out, "genome,{fit},{}", ws.join(","));
    }
}

fn read_es(lines: &[String], pos: &mut usize, cfg: &RunConfig) -> Result<EvolutionStrategy> {
    let n = *pos + 1;
    let head = lines.get(*pos).ok_or_else(|| parse_err(CONTROLLER, n, "missing es block"))?;
    if !head.starts_with("es ") {
        return Err(parse_err(CONTROLLER, n, "expected es block"));
    }
    let sigma = parse_f64(header_value(head, "sigma").unwrap_or(""), CONTROLLER, n)?;
    let generation = header_usize(head, "generation", CONTROLLER, n)?;
    let n_parents = header_usize(head, "parents", CONTROLLER, n)?;
    let has_best = header_usize(head, "best", CONTROLLER, n)? == 1;
    *pos += 1;
    let mut genomes = Vec::new();
    for _ in 0..n_parents + usize::from(has_best) {
        let n = *pos + 1;
        let line = lines.get(*pos).ok_or_else(|| parse_err(CONTROLLER, n, "missing genome"))?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 2 || f[0] != "genome" {
            return Err(parse_err(CONTROLLER, n, "expected genome"));
        }
        let fitness = match f[1] {
            "none" => None,
            s => Some(parse_f64(s, CONTROLLER, n)?),
        };
        let weights = f[2..].iter().map(|s| parse_f64(s, CONTROLLER, n)).collect::<Result<Vec<_>>>()?;
        genomes.push(Genome { weights, fitness });
        *pos += 1;
    }
    let best = if has_best { genomes.pop() } else { None };
    let mut es = EvolutionStrategy::new(cfg.evolution.es, genomes)?;
    es.sigma = sigma;
    es.generation = generation;
    es.best = best;
    Ok(es)
}

pub fn controller_text(c: &ControllerState) -> String {
    let mut out = String::new();
    match c {
        ControllerState::Q(q) => {
            let _ = writeln!(
                out,
                "controller v1 kind=q actions={} state_len={} gamma={} alpha={}",
                q.n_actions(),
                q.state_len(),
                fmt_f64(q.gamma),
                fmt_f64(q.alpha)
            );
            for row in &q.weights {
                let ws: Vec<String> = row.iter().map(|w| fmt_f64(*w)).collect();
                let _ = writeln!(out, "row,{}", ws.join(","));
            }
        }
        ControllerState::Policy { policy, es } => {
            let _ = writeln!(
                out,
                "controller v1 kind=policy actions={} state_len={}",
                policy.n_actions, policy.state_len
            );
            write_es(&mut out, es);
        }
        ControllerState::Cm { es } => {
            let _ = writeln!(out, "controller v1 kind=cm");
            write_es(&mut out, es);
        }
    }
    out
}

pub fn parse_controller(text: &str, cfg: &RunConfig) -> Result<ControllerState> {
    let lines: Vec<String> = text.lines().map(str::to_string).collect();
    let head = lines.first().ok_or_else(|| parse_err(CONTROLLER, 1, "empty file"))?;
    if !head.starts_with("controller v1") {
        return Err(parse_err(CONTROLLER, 1, "missing `controller v1` header"));
    }
    let mut pos = 1;
    let state = match header_value(head, "kind") {
        Some("q") => {
            let actions = header_usize(head, "actions", CONTROLLER, 1)?;
            let len = header_usize(head, "state_len", CONTROLLER, 1)?;
            let gamma = parse_f64(header_value(head, "gamma").unwrap_or(""), CONTROLLER, 1)?;
            let alpha = parse_f64(header_value(head, "alpha").unwrap_or(""), CONTROLLER, 1)?;
            let mut q = QFunction::new(actions, len, gamma, alpha)?;
            for a in 0..actions {
                let n = pos + 1;
                let line = lines.get(pos).ok_or_else(|| parse_err(CONTROLLER, n, "missing row"))?;
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != len + 2 || f[0] != "row" {
                    return Err(parse_err(CONTROLLER, n, format!("expected row of {} weights", len + 1)));
                }
                q.weights[a] = f[1..].iter().map(|s| parse_f64(s, CONTROLLER, n)).collect::<Result<_>>()?;
                pos += 1;
            }
            ControllerState::Q(q)
        }
        Some("policy") => {
            let policy = LinearPolicy {
                n_actions: header_usize(head, "actions", CONTROLLER, 1)?,
                state_len: header_usize(head, "state_len", CONTROLLER, 1)?,
            };
            ControllerState::Policy {
                policy,
                es: read_es(&lines, &mut pos, cfg)?,
            }
        }
        Some("cm") => ControllerState::Cm {
            es: read_es(&lines, &mut pos, cfg)?,
        },
        other => return Err(parse_err(CONTROLLER, 1, format!("controller kind {other:?}"))),
    };
    if pos != lines.len() {
        return Err(parse_err(CONTROLLER, pos + 1, "trailing lines"));
    }
    Ok(state)
}

fn report_line(r: &PhaseReport) -> String {
    let c = &r.code_length;
    let scored: Vec<String> = r.scored_trials.iter().map(usize::to_string).collect();
    [
        "report".to_string(),
        r.phase.to_string(),
        fmt_f64(r.metric),
        fmt_f64(c.e),
        fmt_f64(c.bits_h),
        fmt_f64(c.bits_m),
        fmt_f64(c.total),
        c.steps_scored.to_string(),
        fmt_f64(r.intrinsic_total),
        fmt_f64(r.duration_secs),
        r.hash_before.clone(),
        r.hash_after.clone(),
        r.h.to_string(),
        r.first_trial.to_string(),
        r.last_trial.to_string(),
        mutation_str(r.mutation).to_string(),
        usize::from(r.accepted).to_string(),
        usize::from(r.diverged).to_string(),
        scored.join(";"),
    ]
    .join(",")
}

fn parse_report(line: &str, n: usize) -> Result<PhaseReport> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 19 || f[0] != "report" {
        return Err(parse_err(STATE, n, "expected report with 18 fields"));
    }
    let num = |i: usize| parse_f64(f[i], STATE, n);
    let int = |i: usize| parse_usize(f[i], STATE, n);
    let scored = if f[18].is_empty() {
        Vec::new()
    } else {
        f[18].split(';').map(|s| parse_usize(s, STATE, n)).collect::<Result<_>>()?
    };
    Ok(PhaseReport {
        phase: int(1)?,
        metric: num(2)?,
        code_length: CodeLengthReport {
            e: num(3)?,
            bits_h: num(4)?,
            bits_m: num(5)?,
            total: num(6)?,
            steps_scored: int(7)?,
        },
        intrinsic_total: num(8)?,
        duration_secs: num(9)?,
        hash_before: f[10].to_string(),
        hash_after: f[11].to_string(),
        h: int(12)?,
        first_trial: int(13)?,
        last_trial: int(14)?,
        mutation: parse_mutation(f[15], n)?,
        accepted: int(16)? == 1,
        diverged: int(17)? == 1,
        scored_trials: scored,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

impl Run {
    /// Write every part of the run state into `dir`.
    pub fn checkpoint(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_file(&dir.join("config.txt"), &self.cfg.to_text())?;
        self.history.save(&dir.join("history.txt"))?;
        self.model.save(&dir.join("model.txt"))?;
        write_file(&dir.join("controller.txt"), &controller_text(&self.controller))?;
        let mut state = format!(
            "state v1 next_phase={} stopped={} reports={}\n",
            self.next_phase,
            usize::from(self.stopped),
            self.reports.len()
        );
        for r in &self.reports {
            state.push_str(&report_line(r));
            state.push('\n');
        }
        write_file(&dir.join("state.txt"), &state)?;
        let mut w = BufWriter::new(File::create(dir.join("metrics.csv"))?);
        write_csv(&mut w, &self.metrics)?;
        w.flush()?;
        Ok(())
    }

    /// Rebuild a run from a checkpoint directory. Refuses a history or
    /// model whose dimensions do not match the configured environment.
    pub fn restore(dir: &Path) -> Result<Self> {
        let cfg = RunConfig::load(&dir.join("config.txt"))?;
        let env_spec = resolve_env(&cfg);
        let dims = Env::new(&env_spec)?.dims();
        let history = HistoryStore::load(&dir.join("history.txt"))?;
        if history.dims() != (dims.m, dims.n, dims.o) {
            return Err(Error::Contract(format!(
                "history dimensions {:?} do not match environment {:?}",
                history.dims(),
                (dims.m, dims.n, dims.o)
            )));
        }
        let model = WorldModel::load(&dir.join("model.txt"))?;
        if model.dims() != dims {
            return Err(Error::Contract("model dimensions do not match environment".into()));
        }
        let controller = parse_controller(&fs::read_to_string(dir.join("controller.txt"))?, &cfg)?;
        let state = fs::read_to_string(dir.join("state.txt"))?;
        let mut lines = state.lines();
        let head = lines.next().ok_or_else(|| parse_err(STATE, 1, "empty file"))?;
        if !head.starts_with("state v1") {
            return Err(parse_err(STATE, 1, "missing `state v1` header"));
        }
        let next_phase = header_usize(head, "next_phase", STATE, 1)?;
        let stopped = header_usize(head, "stopped", STATE, 1)? == 1;
        let n_reports = header_usize(head, "reports", STATE, 1)?;
        let reports = lines
            .enumerate()
            .map(|(i, l)| parse_report(l, i + 2))
            .collect::<Result<Vec<_>>>()?;
        if reports.len() != n_reports {
            return Err(parse_err(STATE, 1, format!("expected {n_reports} reports, found {}", reports.len())));
        }
        let metrics = read_csv(BufReader::new(File::open(dir.join("metrics.csv"))?))?;
        Ok(Self {
            cfg,
            env_spec,
            history,
            model,
            controller,
            reports,
            metrics,
            next_phase,
            stopped,
        })
    }
}
