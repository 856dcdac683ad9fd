use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{CodingScheme, WeightCoding, WorldModel};
use crate::env::Dims;
use crate::error::{parse_err, Result};
use crate::nn::{read_net, write_net};
use crate::textfmt::{fmt_f64, header_value, parse_f64, parse_usize};

const WHAT: &str = "model checkpoint";

impl WorldModel {
    /// Text checkpoint: a dimension header, a coding header, then the
    /// network block.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let d = self.dims();
        writeln!(w, "worldmodel v1 m={} n={} o={}", d.m, d.n, d.o)?;
        let c = &self.coding;
        write!(
            w,
            "coding sigma_e={} delta_e={} threshold={}",
            fmt_f64(c.sigma_e),
            fmt_f64(c.delta_e),
            fmt_f64(c.zero_weight_threshold)
        )?;
        match c.weight_coding {
            WeightCoding::Gaussian { sigma_w, delta_w } => {
                writeln!(w, " weights=gaussian sigma_w={} delta_w={}", fmt_f64(sigma_w), fmt_f64(delta_w))?
            }
            WeightCoding::CountBased { bits_per_weight } => {
                writeln!(w, " weights=count bits_per_weight={bits_per_weight}")?
            }
        }
        write_net(w, self.spec(), &self.params)
    }

    pub fn read_from(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines();
        let mut take = |no: usize| -> Result<String> {
            match lines.next() {
                Some(l) => Ok(l?),
                None => Err(parse_err(WHAT, no, "unexpected end of input")),
            }
        };
        let header = take(1)?;
        let coding_line = take(2)?;
        if !header.starts_with("worldmodel v1") {
            return Err(parse_err(WHAT, 1, "missing `worldmodel v1` header"));
        }
        let field = |line: &'_ str, key: &str, no: usize| -> Result<String> {
            header_value(line, key)
                .map(str::to_string)
                .ok_or_else(|| parse_err(WHAT, no, format!("missing {key}=")))
        };
        let dims = Dims {
            m: parse_usize(&field(&header, "m", 1)?, WHAT, 1)?,
            n: parse_usize(&field(&header, "n", 1)?, WHAT, 1)?,
            o: parse_usize(&field(&header, "o", 1)?, WHAT, 1)?,
        };
        if !coding_line.starts_with("coding ") {
            return Err(parse_err(WHAT, 2, "missing coding line"));
        }
        let real = |key: &str| -> Result<f64> { parse_f64(&field(&coding_line, key, 2)?, WHAT, 2) };
        let weight_coding = match field(&coding_line, "weights", 2)?.as_str() {
            "gaussian" => WeightCoding::Gaussian {
                sigma_w: real("sigma_w")?,
                delta_w: real("delta_w")?,
            },
            "count" => WeightCoding::CountBased {
                bits_per_weight: field(&coding_line, "bits_per_weight", 2)?
                    .parse()
                    .map_err(|e| parse_err(WHAT, 2, format!("bits_per_weight: {e}")))?,
            },
            other => return Err(parse_err(WHAT, 2, format!("unknown weight coding {other:?}"))),
        };
        let coding = CodingScheme {
            sigma_e: real("sigma_e")?,
            delta_e: real("delta_e")?,
            weight_coding,
            zero_weight_threshold: real("threshold")?,
        };
        let mut line_no = 2;
        let (spec, params) = read_net(&mut lines, &mut line_no)?;
        WorldModel::from_parts(dims, spec, params, coding)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::world_model::Architecture;

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let dims = Dims { m: 3, n: 1, o: 2 };
        for (arch, coding) in [
            (Architecture::Rnn, CodingScheme::default()),
            (
                Architecture::Lstm,
                CodingScheme {
                    weight_coding: WeightCoding::Gaussian {
                        sigma_w: 1.0,
                        delta_w: 0.01,
                    },
                    ..CodingScheme::default()
                },
            ),
        ] {
            let mut rng = stream(4, "init", &[]);
            let m = WorldModel::new(dims, 2, arch, coding, &mut rng).unwrap();
            let mut buf = Vec::new();
            m.write_to(&mut buf).unwrap();
            let back = WorldModel::read_from(buf.as_slice()).unwrap();
            assert_eq!(back.params, m.params);
            assert_eq!(back.spec(), m.spec());
            assert_eq!(back.coding, m.coding);
            assert_eq!(back.dims(), dims);
            let mut again = Vec::new();
            back.write_to(&mut again).unwrap();
            assert_eq!(buf, again);
        }
    }

    #[test]
    fn truncated_checkpoint_is_refused() {
        let mut rng = stream(4, "init", &[]);
        let m = WorldModel::new(Dims { m: 1, n: 1, o: 1 }, 1, Architecture::Rnn, CodingScheme::default(), &mut rng)
            .unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(WorldModel::read_from(cut.as_bytes()).is_err());
        assert!(WorldModel::read_from("garbage\n".as_bytes()).is_err());
    }
}
