//! Path serialization.
//!
//! CSV layout (one row per grid time):
//!
//! ```text
//! # interpolation: linear
//! t,v1,v2,...,vM
//! 0,1,0,...,0
//! ...
//! ```
//!
//! Floats are written in shortest round-trip form, so reading back a written
//! path reproduces it bit for bit. The JSON record is
//! `{"params": <any>, "path": {"interpolation", "times", "values"}}`.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::occupancy::{Interpolation, PiecewisePath};

const INTERP_PREFIX: &str = "# interpolation:";

pub fn write_path_csv<W: Write>(path: &PiecewisePath, out: W) -> Result<()> {
    let mut out = out;
    let tag = match path.interpolation() {
        Interpolation::Step => "step",
        Interpolation::Linear => "linear",
    };
    writeln!(out, "{INTERP_PREFIX} {tag}")?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=path.dim()).map(|i| format!("v{i}")));
    w.write_record(&header)?;
    for (t, row) in path.times().iter().zip(path.values()) {
        let mut rec = vec![t.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_path_csv<R: Read>(input: R) -> Result<PiecewisePath> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let interpolation = match first.trim().strip_prefix(INTERP_PREFIX).map(str::trim) {
        Some("step") => Interpolation::Step,
        Some("linear") => Interpolation::Linear,
        _ => {
            return Err(Error::InvalidPath(format!(
                "expected '{INTERP_PREFIX} step|linear', found {:?}",
                first.trim()
            )))
        }
    };
    let mut rdr = csv::Reader::from_reader(reader);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let mut fields = rec.iter().map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidPath(format!("bad number {f:?}: {e}")))
        });
        let t = fields
            .next()
            .ok_or_else(|| Error::InvalidPath("empty row".into()))??;
        times.push(t);
        values.push(fields.collect::<Result<Vec<_>>>()?);
    }
    PiecewisePath::new(times, values, interpolation)
}

/// Parameters plus a path, as stored in JSON result files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord<P> {
    pub params: P,
    pub path: PiecewisePath,
}

pub fn write_path_json<P: Serialize, W: Write>(record: &PathRecord<P>, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, record)?;
    Ok(())
}

pub fn read_path_json<P: for<'de> Deserialize<'de>, R: Read>(input: R) -> Result<PathRecord<P>> {
    Ok(serde_json::from_reader(input)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_path() -> impl Strategy<Value = PiecewisePath> {
        (1usize..5, 1usize..20, any::<bool>()).prop_flat_map(|(dim, len, linear)| {
            (
                proptest::collection::vec(1e-6f64..10.0, len - 1),
                proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, dim), len),
            )
                .prop_map(move |(gaps, values)| {
                    let mut times = vec![0.0];
                    for g in gaps {
                        let last = *times.last().unwrap();
                        times.push(last + g);
                    }
                    let interp = if linear {
                        Interpolation::Linear
                    } else {
                        Interpolation::Step
                    };
                    PiecewisePath::new(times, values, interp).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn csv_is_lossless(path in arb_path()) {
            let mut buf = Vec::new();
            write_path_csv(&path, &mut buf).unwrap();
            prop_assert_eq!(read_path_csv(buf.as_slice()).unwrap(), path);
        }

        #[test]
        fn json_is_lossless(path in arb_path()) {
            let rec = PathRecord { params: serde_json::json!({"n": 10}), path };
            let mut buf = Vec::new();
            write_path_json(&rec, &mut buf).unwrap();
            let back: PathRecord<serde_json::Value> = read_path_json(buf.as_slice()).unwrap();
            prop_assert_eq!(back, rec);
        }
    }

    #[test]
    fn csv_layout() {
        let p = PiecewisePath::new(
            vec![0.0, 0.5],
            vec![vec![1.0, 0.0], vec![1.0, 0.25]],
            Interpolation::Step,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_path_csv(&p, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# interpolation: step\nt,v1,v2\n0,1,0\n0.5,1,0.25\n"
        );
    }

    #[test]
    fn csv_rejects_missing_tag() {
        assert!(read_path_csv("t,v1\n0,1\n".as_bytes()).is_err());
    }
}
