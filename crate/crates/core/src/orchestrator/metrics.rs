use std::io::{BufRead, Write};

use crate::error::{parse_err, Result};
use crate::textfmt::{fmt_f64, parse_f64, parse_usize};

const WHAT: &str = "metrics";

/// Kinds of rows in `metrics.csv`. The meaning of `v1..v3` depends on it:
///
/// | kind | index | v1 | v2 | v3 |
/// |---|---|---|---|---|
/// | model | h | bits_m | bits_h | E |
/// | generation | generation | best fitness | mean fitness | sigma |
/// | curiosity | trial id | bits before | bits after | intrinsic |
/// | curiosity_phase | trial id | bits before sleep | bits after sleep | intrinsic |
/// | room_savings | 0 | junction | regular | noise |
/// | phase | trials | metric | intrinsic total | code length |
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Model,
    Generation,
    Curiosity,
    CuriosityPhase,
    RoomSavings,
    Phase,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Model => "model",
            MetricKind::Generation => "generation",
            MetricKind::Curiosity => "curiosity",
            MetricKind::CuriosityPhase => "curiosity_phase",
            MetricKind::RoomSavings => "room_savings",
            MetricKind::Phase => "phase",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "model" => MetricKind::Model,
            "generation" => MetricKind::Generation,
            "curiosity" => MetricKind::Curiosity,
            "curiosity_phase" => MetricKind::CuriosityPhase,
            "room_savings" => MetricKind::RoomSavings,
            "phase" => MetricKind::Phase,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub kind: MetricKind,
    pub phase: usize,
    pub index: usize,
    pub values: [f64; 3],
}

impl MetricRow {
    pub fn new(kind: MetricKind, phase: usize, index: usize, values: [f64; 3]) -> Self {
        Self {
            kind,
            phase,
            index,
            values,
        }
    }
}

pub const CSV_HEADER: &str = "kind,phase,index,v1,v2,v3";

pub fn write_csv(out: &mut impl Write, rows: &[MetricRow]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.kind.as_str(),
            r.phase,
            r.index,
            fmt_f64(r.values[0]),
            fmt_f64(r.values[1]),
            fmt_f64(r.values[2])
        )?;
    }
    Ok(())
}

pub fn read_csv(reader: impl BufRead) -> Result<Vec<MetricRow>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if n == 1 {
            if line != CSV_HEADER {
                return Err(parse_err(WHAT, n, "missing header"));
            }
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(parse_err(WHAT, n, "expected 6 fields"));
        }
        let kind = MetricKind::parse(f[0]).ok_or_else(|| parse_err(WHAT, n, format!("kind {:?}", f[0])))?;
        rows.push(MetricRow::new(
            kind,
            parse_usize(f[1], WHAT, n)?,
            parse_usize(f[2], WHAT, n)?,
            [parse_f64(f[3], WHAT, n)?, parse_f64(f[4], WHAT, n)?, parse_f64(f[5], WHAT, n)?],
        ));
    }
    Ok(rows)
}
