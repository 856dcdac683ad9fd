//! Append-only lifelong interaction history.
//!
//! Every step of every trial is stored as a [`StepRecord`] and never altered
//! or deleted. Completed trials are indexed by [`TrialSpan`]s which partition
//! the stored time range.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{parse_err, Error, Result};
use crate::textfmt::{fmt_f64, header_value, join_f64s, parse_f64, parse_u64, parse_usize};

/// One time step: observation, reward channels, emitted action, and the
/// curiosity reward credited to this step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Global 1-based time index.
    pub t: u64,
    pub in_vec: Vec<f64>,
    pub r_vec: Vec<f64>,
    pub out_vec: Vec<f64>,
    pub intrinsic: f64,
}

impl StepRecord {
    /// `sense(t)`: observation followed by reward channels.
    pub fn sense(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.in_vec.len() + self.r_vec.len());
        v.extend_from_slice(&self.in_vec);
        v.extend_from_slice(&self.r_vec);
        v
    }

    /// `all(t)`: sense followed by the action.
    pub fn all(&self) -> Vec<f64> {
        let mut v = self.sense();
        v.extend_from_slice(&self.out_vec);
        v
    }

    /// Total reward `R(t)`.
    pub fn total_reward(&self) -> f64 {
        self.r_vec.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpan {
    pub trial_id: usize,
    pub t_a: u64,
    pub t_b: u64,
    pub task_tag: String,
    pub external_return: f64,
}

impl TrialSpan {
    pub fn len(&self) -> usize {
        (self.t_b - self.t_a + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// How [`HistoryStore::sample_trials`] picks trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleRule {
    UniformRandom,
    AlwaysIncludeLatest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryStore {
    m: usize,
    n: usize,
    o: usize,
    seed: u64,
    records: Vec<StepRecord>,
    trials: Vec<TrialSpan>,
    cumulative: Vec<f64>,
}

impl HistoryStore {
    pub fn new(m: usize, n: usize, o: usize, seed: u64) -> Self {
        Self {
            m,
            n,
            o,
            seed,
            records: Vec::new(),
            trials: Vec::new(),
            cumulative: Vec::new(),
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.m, self.n, self.o)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Current time `t` (number of stored steps).
    pub fn len(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn record(&self, t: u64) -> Result<&StepRecord> {
        self.check_t(t)?;
        Ok(&self.records[t as usize - 1])
    }

    pub fn trials(&self) -> &[TrialSpan] {
        &self.trials
    }

    pub fn latest_trial(&self) -> Option<&TrialSpan> {
        self.trials.last()
    }

    fn check_t(&self, t: u64) -> Result<()> {
        if t == 0 || t > self.len() {
            return Err(Error::OutOfRange { t, len: self.len() });
        }
        Ok(())
    }

    pub fn append(&mut self, record: StepRecord) -> Result<()> {
        let expected = self.len() + 1;
        if record.t != expected {
            return Err(Error::Sequencing {
                expected,
                got: record.t,
            });
        }
        for (ctx, want, got) in [
            ("in(t)", self.m, record.in_vec.len()),
            ("r(t)", self.n, record.r_vec.len()),
            ("out(t)", self.o, record.out_vec.len()),
        ] {
            if want != got {
                return Err(Error::Dimension {
                    context: ctx,
                    expected: want,
                    got,
                });
            }
        }
        let finite = record
            .in_vec
            .iter()
            .chain(&record.r_vec)
            .chain(&record.out_vec)
            .chain(std::iter::once(&record.intrinsic))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite(format!("record t = {}", record.t)));
        }
        let prev = self.cumulative.last().copied().unwrap_or(0.0);
        self.cumulative.push(prev + record.total_reward());
        self.records.push(record);
        Ok(())
    }

    /// First time index not yet covered by a closed trial.
    fn open_start(&self) -> u64 {
        self.trials.last().map_or(1, |s| s.t_b + 1)
    }

    /// Close the records appended since the previous trial into a new trial.
    pub fn close_trial(&mut self, task_tag: &str) -> Result<TrialSpan> {
        let t_a = self.open_start();
        let t_b = self.len();
        if t_b < t_a {
            return Err(Error::Contract("close_trial with no new records".into()));
        }
        let external_return = self.records[t_a as usize - 1..t_b as usize]
            .iter()
            .map(StepRecord::total_reward)
            .sum();
        let span = TrialSpan {
            trial_id: self.trials.len() + 1,
            t_a,
            t_b,
            task_tag: task_tag.to_string(),
            external_return,
        };
        self.trials.push(span.clone());
        Ok(span)
    }

    /// Append a whole trial whose records are numbered from `len() + 1`.
    pub fn append_trial(&mut self, task_tag: &str, records: Vec<StepRecord>) -> Result<TrialSpan> {
        if self.open_start() != self.len() + 1 {
            return Err(Error::Contract("an unfinished trial is open".into()));
        }
        for r in records {
            self.append(r)?;
        }
        self.close_trial(task_tag)
    }

    /// `R(t)`.
    pub fn total_reward(&self, t: u64) -> Result<f64> {
        Ok(self.record(t)?.total_reward())
    }

    /// `CR(t)`.
    pub fn cumulative_reward(&self, t: u64) -> Result<f64> {
        self.check_t(t)?;
        Ok(self.cumulative[t as usize - 1])
    }

    pub fn trial(&self, trial_id: usize) -> Result<&TrialSpan> {
        trial_id
            .checked_sub(1)
            .and_then(|i| self.trials.get(i))
            .ok_or(Error::UnknownTrial(trial_id))
    }

    /// The stored steps of a completed trial, in order.
    pub fn replay(&self, span: &TrialSpan) -> Result<&[StepRecord]> {
        let stored = self.trial(span.trial_id)?;
        if stored.t_a != span.t_a || stored.t_b != span.t_b {
            return Err(Error::UnknownTrial(span.trial_id));
        }
        Ok(&self.records[span.t_a as usize - 1..span.t_b as usize])
    }

    pub fn intrinsic_return(&self, span: &TrialSpan) -> Result<f64> {
        Ok(self.replay(span)?.iter().map(|r| r.intrinsic).sum())
    }

    /// Pick `min(k, #trials)` distinct completed trials, in trial order.
    pub fn sample_trials(
        &self,
        k: usize,
        rule: SampleRule,
        rng: &mut impl Rng,
    ) -> Result<Vec<TrialSpan>> {
        let total = self.trials.len();
        if total == 0 {
            return Err(Error::EmptyHistory);
        }
        let k = k.min(total);
        let mut picked: Vec<usize> = match rule {
            SampleRule::UniformRandom => sample(rng, total, k).into_vec(),
            SampleRule::AlwaysIncludeLatest => {
                let mut v = if k > 1 {
                    sample(rng, total - 1, k - 1).into_vec()
                } else {
                    Vec::new()
                };
                if k > 0 {
                    v.push(total - 1);
                }
                v
            }
        };
        picked.sort_unstable();
        Ok(picked.into_iter().map(|i| self.trials[i].clone()).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        writeln!(
            w,
            "history v1 m={} n={} o={} seed={} steps={} trials={}",
            self.m,
            self.n,
            self.o,
            self.seed,
            self.records.len(),
            self.trials.len()
        )?;
        let mut next_trial = self.trials.iter().peekable();
        for r in &self.records {
            writeln!(
                w,
                "step,{},{},{},{},{}",
                r.t,
                join_f64s(&r.in_vec),
                join_f64s(&r.r_vec),
                join_f64s(&r.out_vec),
                fmt_f64(r.intrinsic)
            )?;
            while let Some(span) = next_trial.next_if(|s| s.t_b == r.t) {
                writeln!(
                    w,
                    "trial,{},{},{},{},{}",
                    span.trial_id,
                    span.t_a,
                    span.t_b,
                    span.task_tag,
                    fmt_f64(span.external_return)
                )?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    pub fn read_from(reader: impl BufRead) -> Result<Self> {
        const WHAT: &str = "history";
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| parse_err(WHAT, 1, "empty file"))??;
        if !header.starts_with("history v1") {
            return Err(parse_err(WHAT, 1, "missing `history v1` header"));
        }
        let field = |k: &str| -> Result<u64> {
            let v = header_value(&header, k)
                .ok_or_else(|| parse_err(WHAT, 1, format!("header lacks {k}=")))?;
            parse_u64(v, WHAT, 1)
        };
        let (m, n, o) = (
            field("m")? as usize,
            field("n")? as usize,
            field("o")? as usize,
        );
        let mut store = Self::new(m, n, o, field("seed")?);
        let (want_steps, want_trials) = (field("steps")?, field("trials")? as usize);
        for (i, line) in lines.enumerate() {
            let ln = i + 2;
            let line = line?;
            let f: Vec<&str> = line.split(',').collect();
            match f.first().copied() {
                Some("step") => {
                    if f.len() != 3 + m + n + o {
                        return Err(parse_err(WHAT, ln, "wrong field count in step"));
                    }
                    let nums = f[2..]
                        .iter()
                        .map(|s| parse_f64(s, WHAT, ln))
                        .collect::<Result<Vec<_>>>()?;
                    let rec = StepRecord {
                        t: parse_u64(f[1], WHAT, ln)?,
                        in_vec: nums[..m].to_vec(),
                        r_vec: nums[m..m + n].to_vec(),
                        out_vec: nums[m + n..m + n + o].to_vec(),
                        intrinsic: nums[m + n + o],
                    };
                    store
                        .append(rec)
                        .map_err(|e| parse_err(WHAT, ln, e.to_string()))?;
                }
                Some("trial") => {
                    if f.len() != 6 {
                        return Err(parse_err(WHAT, ln, "wrong field count in trial"));
                    }
                    let span = store
                        .close_trial(f[4])
                        .map_err(|e| parse_err(WHAT, ln, e.to_string()))?;
                    let ret = parse_f64(f[5], WHAT, ln)?;
                    if span.trial_id != parse_usize(f[1], WHAT, ln)?
                        || span.t_a != parse_u64(f[2], WHAT, ln)?
                        || span.t_b != parse_u64(f[3], WHAT, ln)?
                        || span.external_return.to_bits() != ret.to_bits()
                    {
                        return Err(parse_err(WHAT, ln, "trial line disagrees with steps"));
                    }
                }
                _ => return Err(parse_err(WHAT, ln, format!("unexpected line {line:?}"))),
            }
        }
        if store.len() != want_steps || store.trials.len() != want_trials {
            return Err(parse_err(WHAT, 0, "file is truncated"));
        }
        Ok(store)
    }

    /// Rows of `trial_id,external_return,intrinsic_return`.
    pub fn export_returns(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "trial_id,external_return,intrinsic_return")?;
        for span in &self.trials {
            writeln!(
                w,
                "{},{},{}",
                span.trial_id,
                span.external_return,
                self.intrinsic_return(span)?
            )?;
        }
        Ok(())
    }
}
