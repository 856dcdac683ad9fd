//! Intrinsic reward from compression progress.
//!
//! A trial is worth the bits M would save on it by learning from it. The
//! saving is estimated by cross-fitting on a private copy of M: train on the
//! first half of the trial and score the second, then the other way round.
//! Regularities carry over between halves; memorized noise does not, so a
//! noise trial earns (about) nothing. The frozen M used by the controller is
//! never touched.

use crate::env::Room;
use crate::error::{Error, Result};
use crate::history::StepRecord;
use crate::world_model::{CodeLengthReport, SleepConfig, WorldModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CuriosityConfig {
    pub enabled: bool,
    pub eta: f64,
    pub clip_negative: bool,
    /// Training budget of each cross-fitting pass.
    pub probe_epochs: usize,
    pub probe_lr: f64,
}

impl Default for CuriosityConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            eta: 0.01,
            clip_negative: true,
            probe_epochs: 5,
            probe_lr: 0.05,
        }
    }
}

impl CuriosityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("curiosity.eta = {} must be >= 0", self.eta)));
        }
        if !(self.probe_lr > 0.0 && self.probe_lr.is_finite()) {
            return Err(Error::Config(format!("curiosity.probe_lr = {} must be positive", self.probe_lr)));
        }
        Ok(())
    }
}

/// `eta * (before.total - after.total)`, clipped at zero if configured.
pub fn intrinsic_reward(before: &CodeLengthReport, after: &CodeLengthReport, cfg: &CuriosityConfig) -> Result<f64> {
    if before.steps_scored != after.steps_scored {
        return Err(Error::Contract(format!(
            "reports scored on different spans ({} vs {} steps)",
            before.steps_scored, after.steps_scored
        )));
    }
    if !cfg.enabled {
        return Ok(0.0);
    }
    let r = cfg.eta * (before.total - after.total);
    Ok(if cfg.clip_negative { r.max(0.0) } else { r })
}

/// Outcome of probing one trial. `before` and `after` score every
/// prediction of the trial, each under the copy of M that never trained on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub before: CodeLengthReport,
    pub after: CodeLengthReport,
    /// Residual bits saved on each predicted step of the trial.
    pub step_savings: Vec<f64>,
    pub intrinsic: f64,
}

/// Cross-fitted compression progress of `model` on `trial`.
pub fn probe(model: &WorldModel, trial: &[StepRecord], cfg: &CuriosityConfig) -> Result<Probe> {
    let before = model.code_length_episodes(&[trial])?;
    let base = model.step_costs(trial)?;
    let n = base.len();
    let mut tuned = base.clone();
    let sleep = SleepConfig {
        epochs: cfg.probe_epochs,
        lr: cfg.probe_lr,
        ..SleepConfig::default()
    };
    if n >= 2 {
        let half = n / 2;
        for first in [true, false] {
            let fit: Vec<bool> = (0..n).map(|i| (i < half) == first).collect();
            let costs = model.fit_steps(trial, &fit, &sleep)?.step_costs(trial)?;
            for i in (0..n).filter(|&i| !fit[i]) {
                tuned[i] = costs[i];
            }
        }
    }
    let (e, bits_h) = tuned.iter().fold((0.0, 0.0), |(e, b), c| (e + c.0, b + c.1));
    let after = CodeLengthReport::new(e, bits_h, before.bits_m, n);
    let step_savings = base.iter().zip(&tuned).map(|(b, a)| b.1 - a.1).collect();
    let intrinsic = intrinsic_reward(&before, &after, cfg)?;
    Ok(Probe {
        before,
        after,
        step_savings,
        intrinsic,
    })
}

/// Bits saved per room: `(junction, regular, noise)`. Step `i` predicts the
/// observation of record `i + 1`, so it is credited to that record's room.
pub fn room_savings(step_savings: &[f64], rooms: &[Option<Room>]) -> (f64, f64, f64) {
    let mut out = (0.0, 0.0, 0.0);
    for (i, s) in step_savings.iter().enumerate() {
        match rooms.get(i + 1).copied().flatten() {
            Some(Room::Junction) => out.0 += s,
            Some(Room::Regular) => out.1 += s,
            Some(Room::Noise) => out.2 += s,
            None => {}
        }
    }
    out
}

/// A trial's intrinsic reward split by room, `[junction, regular, noise]`,
/// in proportion to each room's positive savings. The parts sum to
/// `intrinsic` whenever it is positive; a trial that earned nothing credits
/// nothing.
pub fn room_rewards(step_savings: &[f64], rooms: &[Option<Room>], intrinsic: f64) -> [f64; 3] {
    let (j, r, n) = room_savings(step_savings, rooms);
    let parts = [j, r, n].map(|s| s.max(0.0));
    let total: f64 = parts.iter().sum();
    if intrinsic <= 0.0 || total <= 0.0 {
        return [0.0; 3];
    }
    parts.map(|p| intrinsic * p / total)
}

/// One row of the curiosity metrics stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CuriosityRow {
    pub trial_id: usize,
    pub bits_before: f64,
    pub bits_after: f64,
    pub intrinsic: f64,
}
