//! File formats: model and parameter JSON, overlap CSV, binary disorder
//! dumps, and JSON output with 17 significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{validate_model, DisorderMatrix, ModelSpec, RawModel};
use crate::parisi::{RawParams, RsbParams};
use crate::replica::{OverlapDraw, OverlapSample};

const DISORDER_MAGIC: &[u8; 4] = b"MSPK";
const DISORDER_VERSION: u32 = 1;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse { path: path.display().to_string(), message: message.into() }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))
}

/// Reads and validates a model file.
pub fn read_model(path: &Path) -> Result<ModelSpec> {
    let raw: RawModel = read_json(path)?;
    validate_model(&raw)
}

/// Reads parameters keyed by the model's species labels.
pub fn read_params(path: &Path, spec: &ModelSpec) -> Result<RsbParams> {
    let raw: RawParams = read_json(path)?;
    RsbParams::from_raw(&raw, spec)
}

/// Shortest text with 17 significant digits, which round-trips every `f64`.
pub fn format_f64(x: f64) -> String {
    if !x.is_finite() {
        return "null".to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let s = format!("{x:.16e}");
    let (mant, exp) = s.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        // positional notation with exactly 17 significant digits
        let decimals = (16 - exp).max(1) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{mant}e{exp}")
    }
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(i), _, _) => out.push_str(&i.to_string()),
            (_, Some(u), _) => out.push_str(&u.to_string()),
            (_, _, Some(f)) => out.push_str(&format_f64(f)),
            _ => out.push_str("null"),
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            if a.is_empty() {
                out.push_str("[]");
                return;
            }
            let flat = a.iter().all(|x| !x.is_array() && !x.is_object());
            out.push('[');
            for (k, x) in a.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                    if flat {
                        out.push(' ');
                    }
                }
                if !flat {
                    out.push('\n');
                    out.push_str(&pad(indent + 1));
                }
                write_value(out, x, indent + 1);
            }
            if !flat {
                out.push('\n');
                out.push_str(&pad(indent));
            }
            out.push(']');
        }
        Value::Object(m) => {
            if m.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (k, (key, x)) in m.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(out, x, indent + 1);
            }
            out.push('\n');
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Pretty JSON with every float printed by [`format_f64`].
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::config(format!("serialization failed: {e}")))?;
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_string(value)?)
}

/// Writes a CSV with a header row; numeric cells should already be formatted.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| parse_err(path, e.to_string()))?;
    w.write_record(header).map_err(|e| parse_err(path, e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| parse_err(path, e.to_string()))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Overlap rows `sample,l,lp,species,value`: 1-based replicas, upper
/// triangle with diagonal, species label or `ALL` for the combined array.
pub fn overlap_rows(sample: &OverlapSample) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (k, d) in sample.draws().iter().enumerate() {
        for l in 0..d.n() {
            for lp in l..d.n() {
                for (s, label) in sample.species().iter().enumerate() {
                    rows.push(vec![
                        (k + 1).to_string(),
                        (l + 1).to_string(),
                        (lp + 1).to_string(),
                        label.clone(),
                        format_f64(d.rs(s, l, lp)),
                    ]);
                }
                rows.push(vec![
                    (k + 1).to_string(),
                    (l + 1).to_string(),
                    (lp + 1).to_string(),
                    "ALL".into(),
                    format_f64(d.r(l, lp)),
                ]);
            }
        }
    }
    rows
}

pub const OVERLAP_HEADER: [&str; 5] = ["sample", "l", "lp", "species", "value"];

pub fn write_overlap_csv(path: &Path, sample: &OverlapSample) -> Result<()> {
    write_csv(path, &OVERLAP_HEADER, &overlap_rows(sample))
}

/// Reads an overlap CSV. Species labels must match `spec`; the combined
/// proportions are taken from `lambda` (model or realized).
pub fn read_overlap_csv(path: &Path, species: &[String], lambda: &[f64]) -> Result<OverlapSample> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| parse_err(path, e.to_string()))?;
    let headers = rdr.headers().map_err(|e| parse_err(path, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != OVERLAP_HEADER {
        return Err(parse_err(path, format!("expected header {}", OVERLAP_HEADER.join(","))));
    }
    // (sample, l, lp, array index, value); array index S is the combined array
    let mut entries = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, e.to_string()))?;
        let at = |i: usize| rec.get(i).unwrap_or("");
        let int = |i: usize| {
            at(i).parse::<usize>().ok().filter(|&v| v >= 1).ok_or_else(|| {
                parse_err(path, format!("row {}: column {} is not a positive integer", line + 2, OVERLAP_HEADER[i]))
            })
        };
        let (k, l, lp) = (int(0)?, int(1)?, int(2)?);
        let label = at(3);
        let a = if label == "ALL" {
            species.len()
        } else {
            species
                .iter()
                .position(|s| s == label)
                .ok_or_else(|| parse_err(path, format!("row {}: unknown species {label:?}", line + 2)))?
        };
        let v: f64 = at(4)
            .parse()
            .map_err(|_| parse_err(path, format!("row {}: value is not a number", line + 2)))?;
        entries.push((k, l.min(lp), l.max(lp), a, v));
    }
    let n_draws = entries.iter().map(|e| e.0).max().unwrap_or(0);
    let mut sizes = vec![0usize; n_draws];
    for e in &entries {
        sizes[e.0 - 1] = sizes[e.0 - 1].max(e.2);
    }
    let mut arrays: Vec<Vec<Vec<f64>>> =
        sizes.iter().map(|&n| vec![vec![f64::NAN; n * n]; species.len() + 1]).collect();
    for &(k, l, lp, a, v) in &entries {
        let n = sizes[k - 1];
        arrays[k - 1][a][(l - 1) * n + lp - 1] = v;
        arrays[k - 1][a][(lp - 1) * n + l - 1] = v;
    }
    let mut draws = Vec::with_capacity(n_draws);
    for (k, mut arr) in arrays.into_iter().enumerate() {
        if arr.iter().flatten().any(|v| v.is_nan()) {
            return Err(parse_err(path, format!("sample {} is missing entries", k + 1)));
        }
        let combined = arr.pop().expect("combined array");
        draws.push(OverlapDraw::new(sizes[k], combined, arr, 1.0));
    }
    OverlapSample::new(species.to_vec(), lambda.to_vec(), draws)
}

/// Binary disorder dump: `MSPK`, u32 version, u64 N, u64 seed, u64 draw,
/// then `N²` little-endian f64 couplings in row-major order.
pub fn write_disorder(path: &Path, d: &DisorderMatrix) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + 8 * d.couplings().len());
    buf.extend_from_slice(DISORDER_MAGIC);
    buf.extend_from_slice(&DISORDER_VERSION.to_le_bytes());
    buf.extend_from_slice(&(d.n() as u64).to_le_bytes());
    buf.extend_from_slice(&d.seed().to_le_bytes());
    buf.extend_from_slice(&d.draw().to_le_bytes());
    for g in d.couplings() {
        buf.extend_from_slice(&g.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(&buf).map_err(|e| io_err(path, e))
}

pub fn read_disorder(path: &Path) -> Result<DisorderMatrix> {
    let buf = fs::read(path).map_err(|e| io_err(path, e))?;
    if buf.len() < 32 || &buf[..4] != DISORDER_MAGIC {
        return Err(parse_err(path, "not a disorder file (bad magic)"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().expect("4 bytes"));
    let u64_at = |o: usize| u64::from_le_bytes(buf[o..o + 8].try_into().expect("8 bytes"));
    let version = u32_at(4);
    if version != DISORDER_VERSION {
        return Err(parse_err(path, format!("unsupported disorder version {version}")));
    }
    let n = u64_at(8) as usize;
    let (seed, draw) = (u64_at(16), u64_at(24));
    let expected = n.checked_mul(n).and_then(|m| m.checked_mul(8)).and_then(|m| m.checked_add(32));
    if expected != Some(buf.len()) {
        return Err(parse_err(path, format!("length {} does not match N = {n}", buf.len())));
    }
    let couplings = buf[32..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DisorderMatrix::from_parts(n, couplings, seed, draw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assign_species, sample_disorder};
    use proptest::prelude::*;

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(format_f64(std::f64::consts::LN_2), "0.69314718055994529");
        assert_eq!(format_f64(1.0), "1.0000000000000000");
        assert_eq!(format_f64(0.0), "0.0");
        assert_eq!(format_f64(f64::NAN), "null");
        assert_eq!(format_f64(2.0e-300), "2.0000000000000001e-300");
    }

    proptest! {
        #[test]
        fn float_format_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            prop_assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_output_round_trips() {
        let v = serde_json::json!({"P": 0.1 + 0.2, "n": 3, "xs": [1.0/3.0, -2.5e-7], "s": "a\"b"});
        let text = to_json_string(&v).unwrap();
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["P"].as_f64().unwrap(), 0.1 + 0.2);
        assert_eq!(back["xs"][0].as_f64().unwrap(), 1.0 / 3.0);
        assert_eq!(back["n"].as_u64().unwrap(), 3);
        assert_eq!(back["s"], "a\"b");
    }

    #[test]
    fn disorder_round_trip_and_corruption() {
        let dir = std::env::temp_dir().join(format!("mspk-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let m = ModelSpec::single(1.0).unwrap();
        let d = sample_disorder(&m, &assign_species(&m, 5).unwrap(), 42).unwrap();
        let p = dir.join("d.bin");
        write_disorder(&p, &d).unwrap();
        assert_eq!(read_disorder(&p).unwrap(), d);
        let mut bytes = fs::read(&p).unwrap();
        bytes.truncate(40);
        fs::write(&p, &bytes).unwrap();
        assert!(read_disorder(&p).is_err());
        bytes[0] = b'X';
        fs::write(&p, &bytes).unwrap();
        assert!(read_disorder(&p).unwrap_err().to_string().contains("magic"));
    }

    #[test]
    fn overlap_csv_round_trip() {
        let dir = std::env::temp_dir().join(format!("mspk-csv-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let m = ModelSpec::new(vec!["a", "b"], vec![0.5, 0.5], vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let p = RsbParams::new(vec![0.4, 0.8], vec![vec![0.0, 0.3, 1.0], vec![0.0, 0.5, 1.0]]).unwrap();
        let s = crate::cascades::cascade_overlap_sample(
            &m,
            &p,
            None,
            &crate::cascades::CascadeConfig::uniform(5),
            3,
            4,
            1,
        )
        .unwrap();
        let path = dir.join("o.csv");
        write_overlap_csv(&path, &s).unwrap();
        let back = read_overlap_csv(&path, m.species(), m.lambda()).unwrap();
        assert_eq!(back, s);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("sample,l,lp,species,value\n1,1,1,a,"));
        assert_eq!(text.lines().count(), 1 + 4 * 6 * 3);
    }

    #[test]
    fn malformed_model_names_the_file() {
        let dir = std::env::temp_dir().join(format!("mspk-bad-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("broken.json");
        fs::write(&p, "{\"species\": [\"a\"], ").unwrap();
        let e = read_model(&p).unwrap_err().to_string();
        assert!(e.contains("broken.json"), "{e}");
    }
}
