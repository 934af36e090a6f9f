//! CIR stream dumps.
//!
//! CSV: an optional `# paths=<L> beams=<N>` comment, the header
//! `t,path,bp,re,im`, then one row per nonzero cell. Rows of one snapshot are
//! contiguous. Without the comment the dimensions are inferred from the
//! largest indices present.
//!
//! Binary: a flat sequence of little-endian `f64`s,
//! `[L, N, count, (t, re_00, im_00, re_01, im_01, ...) × count]`, with cells in
//! path-major order.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::synth::{CirSample, CirStream, GainMatrix};
use crate::error::{Error, Result};

pub const CIR_CSV_HEADER: &str = "t,path,bp,re,im";

pub fn write_cir_csv<W: Write>(stream: &CirStream, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    if let Some((p, b)) = stream.dims() {
        writeln!(out, "# paths={p} beams={b}")?;
    }
    writeln!(out, "{CIR_CSV_HEADER}")?;
    for s in stream.samples() {
        for path in 0..s.gains.paths() {
            for bp in 0..s.gains.beams() {
                let z = s.gains.get(path, bp);
                if z.re != 0.0 || z.im != 0.0 {
                    writeln!(out, "{},{},{},{},{}", s.t, path, bp, z.re, z.im)?;
                }
            }
        }
    }
    out.flush()
}

fn parse_dims(comment: &str) -> Option<(usize, usize)> {
    let mut paths = None;
    let mut beams = None;
    for tok in comment.trim_start_matches('#').split_whitespace() {
        if let Some(v) = tok.strip_prefix("paths=") {
            paths = v.parse().ok();
        } else if let Some(v) = tok.strip_prefix("beams=") {
            beams = v.parse().ok();
        }
    }
    Some((paths?, beams?))
}

pub fn read_cir_csv<R: Read>(reader: R, name: &Path) -> Result<CirStream> {
    let mut dims = None;
    let mut rows: Vec<(f64, usize, usize, Complex64)> = Vec::new();
    let mut saw_header = false;
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(format!("reading {}", name.display()), e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if dims.is_none() {
                dims = parse_dims(line);
            }
            continue;
        }
        let perr = |msg: String| Error::Parse {
            path: name.to_path_buf(),
            line: lineno,
            msg,
        };
        if !saw_header {
            if line.replace(' ', "") != CIR_CSV_HEADER {
                return Err(perr(format!("expected header `{CIR_CSV_HEADER}`")));
            }
            saw_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(perr(format!("expected 5 fields, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| perr(format!("`{s}`: {e}")));
        let idx = |s: &str| s.parse::<usize>().map_err(|e| perr(format!("`{s}`: {e}")));
        rows.push((
            num(f[0])?,
            idx(f[1])?,
            idx(f[2])?,
            Complex64::new(num(f[3])?, num(f[4])?),
        ));
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile(name.to_path_buf()));
    }
    let (paths, beams) = dims.unwrap_or_else(|| {
        let p = rows.iter().map(|r| r.1).max().unwrap_or(0) + 1;
        let b = rows.iter().map(|r| r.2).max().unwrap_or(0) + 1;
        (p, b)
    });
    let mut samples: Vec<CirSample> = Vec::new();
    for (t, path, bp, z) in rows {
        if path >= paths || bp >= beams {
            return Err(Error::invalid(format!(
                "cell ({path},{bp}) outside {paths}x{beams} CIR"
            )));
        }
        if samples.last().is_none_or(|s| s.t != t) {
            samples.push(CirSample {
                t,
                gains: GainMatrix::zeros(paths, beams),
            });
        }
        *samples.last_mut().unwrap().gains.get_mut(path, bp) = z;
    }
    CirStream::new(samples)
}

pub fn write_cir_bin<W: Write>(stream: &CirStream, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    let (p, b) = stream.dims().unwrap_or((0, 0));
    for v in [p as f64, b as f64, stream.len() as f64] {
        out.write_all(&v.to_le_bytes())?;
    }
    for s in stream.samples() {
        out.write_all(&s.t.to_le_bytes())?;
        for z in s.gains.as_slice() {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
    }
    out.flush()
}

pub fn read_cir_bin<R: Read>(reader: R, name: &Path) -> Result<CirStream> {
    let mut bytes = Vec::new();
    BufReader::new(reader)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(format!("reading {}", name.display()), e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::invalid("binary CIR dump is not a whole number of f64s"));
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if vals.len() < 3 {
        return Err(Error::EmptyFile(name.to_path_buf()));
    }
    let as_count = |v: f64| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 && v < 1e12 {
            Ok(v as usize)
        } else {
            Err(Error::invalid(format!("bad count {v} in binary CIR header")))
        }
    };
    let (paths, beams, count) = (as_count(vals[0])?, as_count(vals[1])?, as_count(vals[2])?);
    let cells = paths * beams;
    let expected = 3 + count * (1 + 2 * cells);
    if vals.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: vals.len(),
        });
    }
    let samples = vals[3..]
        .chunks_exact(1 + 2 * cells)
        .map(|rec| {
            let data = rec[1..]
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect();
            Ok(CirSample {
                t: rec[0],
                gains: GainMatrix::from_vec(paths, beams, data)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    CirStream::new(samples)
}
