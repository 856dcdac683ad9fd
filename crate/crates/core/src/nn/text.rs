//! Line-delimited text form of a spec plus its weights.
//!
//! ```text
//! netspec v1 units=3 links=2 weights=2
//! unit,0,input,identity,add
//! link,0,1,w,0,0,add
//! link,1,2,fixed,1.0000000000000000e0,1,mul
//! weight,0,1.2500000000000000e-1
//! end
//! ```

use std::io::{BufRead, Write};

use super::params::NetParams;
use super::spec::{Activation, Combine, Delay, LinkSpec, NetSpec, UnitKind, UnitSpec, WeightRef};
use crate::error::{parse_err, Result};
use crate::textfmt::{fmt_f64, header_value, parse_f64, parse_usize};

const WHAT: &str = "network";

fn kind_str(k: UnitKind) -> &'static str {
    match k {
        UnitKind::Input => "input",
        UnitKind::Hidden => "hidden",
        UnitKind::Output => "output",
        UnitKind::Bias => "bias",
    }
}

fn act_str(a: Activation) -> &'static str {
    match a {
        Activation::Identity => "identity",
        Activation::Tanh => "tanh",
        Activation::Sigmoid => "sigmoid",
    }
}

fn combine_str(c: Combine) -> &'static str {
    match c {
        Combine::Additive => "add",
        Combine::Multiplicative => "mul",
    }
}

pub fn write_net(out: &mut impl Write, spec: &NetSpec, params: &NetParams) -> Result<()> {
    writeln!(
        out,
        "netspec v1 units={} links={} weights={}",
        spec.units.len(),
        spec.links.len(),
        spec.n_weights
    )?;
    for (i, u) in spec.units.iter().enumerate() {
        writeln!(
            out,
            "unit,{i},{},{},{}",
            kind_str(u.kind),
            act_str(u.activation),
            combine_str(u.net)
        )?;
    }
    for l in &spec.links {
        let (wk, wv) = match l.weight {
            WeightRef::Learnable(i) => ("w", i.to_string()),
            WeightRef::Fixed(v) => ("fixed", fmt_f64(v)),
        };
        let delay = match l.delay {
            Delay::Zero => 0,
            Delay::One => 1,
        };
        writeln!(
            out,
            "link,{},{},{wk},{wv},{delay},{}",
            l.source,
            l.target,
            combine_str(l.combine)
        )?;
    }
    for (i, w) in params.weights.iter().enumerate() {
        writeln!(out, "weight,{i},{}", fmt_f64(*w))?;
    }
    writeln!(out, "end")?;
    Ok(())
}

/// Read one network block. `line_no` tracks the caller's position for
/// diagnostics when the block is embedded in a larger file.
pub fn read_net(
    lines: &mut impl Iterator<Item = std::io::Result<String>>,
    line_no: &mut usize,
) -> Result<(NetSpec, NetParams)> {
    let mut next = |line_no: &mut usize| -> Result<String> {
        *line_no += 1;
        match lines.next() {
            Some(l) => Ok(l?),
            None => Err(parse_err(WHAT, *line_no, "unexpected end of input")),
        }
    };
    let header = next(line_no)?;
    if !header.starts_with("netspec v1") {
        return Err(parse_err(WHAT, *line_no, "missing `netspec v1` header"));
    }
    let count = |key: &str, line: usize| -> Result<usize> {
        let v = header_value(&header, key)
            .ok_or_else(|| parse_err(WHAT, line, format!("header lacks {key}=")))?;
        parse_usize(v, WHAT, line)
    };
    let hl = *line_no;
    let (n_units, n_links, n_weights) = (count("units", hl)?, count("links", hl)?, count("weights", hl)?);

    let mut spec = NetSpec {
        units: Vec::with_capacity(n_units),
        links: Vec::with_capacity(n_links),
        n_weights,
    };
    for i in 0..n_units {
        let line = next(line_no)?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 || f[0] != "unit" || parse_usize(f[1], WHAT, *line_no)? != i {
            return Err(parse_err(WHAT, *line_no, format!("expected unit {i}")));
        }
        let kind = match f[2] {
            "input" => UnitKind::Input,
            "hidden" => UnitKind::Hidden,
            "output" => UnitKind::Output,
            "bias" => UnitKind::Bias,
            other => return Err(parse_err(WHAT, *line_no, format!("unit kind {other:?}"))),
        };
        let activation = match f[3] {
            "identity" => Activation::Identity,
            "tanh" => Activation::Tanh,
            "sigmoid" => Activation::Sigmoid,
            other => return Err(parse_err(WHAT, *line_no, format!("activation {other:?}"))),
        };
        spec.units.push(UnitSpec {
            kind,
            activation,
            net: parse_combine(f[4], *line_no)?,
        });
    }
    for _ in 0..n_links {
        let line = next(line_no)?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 || f[0] != "link" {
            return Err(parse_err(WHAT, *line_no, "expected link"));
        }
        let weight = match f[3] {
            "w" => WeightRef::Learnable(parse_usize(f[4], WHAT, *line_no)?),
            "fixed" => WeightRef::Fixed(parse_f64(f[4], WHAT, *line_no)?),
            other => return Err(parse_err(WHAT, *line_no, format!("weight kind {other:?}"))),
        };
        let delay = match f[5] {
            "0" => Delay::Zero,
            "1" => Delay::One,
            other => return Err(parse_err(WHAT, *line_no, format!("delay {other:?}"))),
        };
        spec.links.push(LinkSpec {
            source: parse_usize(f[1], WHAT, *line_no)?,
            target: parse_usize(f[2], WHAT, *line_no)?,
            weight,
            delay,
            combine: parse_combine(f[6], *line_no)?,
        });
    }
    let mut weights = Vec::with_capacity(n_weights);
    for i in 0..n_weights {
        let line = next(line_no)?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 || f[0] != "weight" || parse_usize(f[1], WHAT, *line_no)? != i {
            return Err(parse_err(WHAT, *line_no, format!("expected weight {i}")));
        }
        weights.push(parse_f64(f[2], WHAT, *line_no)?);
    }
    if next(line_no)? != "end" {
        return Err(parse_err(WHAT, *line_no, "expected `end`"));
    }
    spec.validate()
        .map_err(|e| parse_err(WHAT, *line_no, e.to_string()))?;
    let params = NetParams::new(weights).map_err(|e| parse_err(WHAT, *line_no, e.to_string()))?;
    Ok((spec, params))
}

fn parse_combine(s: &str, line: usize) -> Result<Combine> {
    match s {
        "add" => Ok(Combine::Additive),
        "mul" => Ok(Combine::Multiplicative),
        other => Err(parse_err(WHAT, line, format!("combine {other:?}"))),
    }
}

/// Convenience: read a network from any buffered reader.
pub fn read_net_from(reader: impl BufRead) -> Result<(NetSpec, NetParams)> {
    let mut lines = reader.lines();
    let mut n = 0;
    read_net(&mut lines, &mut n)
}
