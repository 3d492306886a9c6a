//! Artifact writers: trace and rank-profile CSVs, JSON sidecars, and a
//! minimal SVG line plot. All files are written atomically.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde_json::{json, Value};
use tempfile::NamedTempFile;

use crate::graph::PartialSmoothCertificate;
use crate::linalg::Vector;
use crate::prox::ManifoldPattern;
use crate::saddle::{IterateRecord, Trace};

/// Writes `contents` to a temporary file in the target directory and
/// renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:?}")
}

/// JSON number, or a string (`"inf"`, `"-inf"`, `"NaN"`) for non-finite values.
pub fn json_float(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::String(fmt_float(x))
    }
}

pub fn json_vector(v: &Vector) -> Value {
    Value::Array(v.iter().map(|&x| json_float(x)).collect())
}

/// Pretty-printed JSON with a trailing newline.
pub fn json_bytes(value: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    s.push('\n');
    s.into_bytes()
}

pub fn trace_csv(trace: &Trace) -> String {
    let first = &trace.records[0];
    let (n, m) = (first.x.len(), first.y.len());
    let mut out = String::from("k,residual,pattern_x,pattern_y");
    for i in 0..n {
        write!(out, ",x{i}").unwrap();
    }
    for j in 0..m {
        write!(out, ",y{j}").unwrap();
    }
    out.push('\n');
    for r in &trace.records {
        write!(out, "{},{},{},{}", r.k, fmt_float(r.residual), r.pattern_x, r.pattern_y).unwrap();
        for x in r.x.iter().chain(r.y.iter()) {
            write!(out, ",{}", fmt_float(*x)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Writes `k,residual,pattern_x,pattern_y,x0..,y0..`, one row per record.
pub fn emit_trace_csv(trace: &Trace, path: &Path) -> io::Result<()> {
    if trace.records.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "empty trace"));
    }
    write_atomic(path, trace_csv(trace).as_bytes())
}

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

/// Inverse of [`trace_csv`] for the iterate records.
pub fn parse_trace_csv(text: &str) -> io::Result<Vec<IterateRecord>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("missing header"))?.split(',').collect();
    if header.len() < 4 || header[..4] != ["k", "residual", "pattern_x", "pattern_y"] {
        return Err(bad("unexpected trace header"));
    }
    let n = header[4..].iter().filter(|h| h.starts_with('x')).count();
    let m = header.len() - 4 - n;
    let float = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("bad float `{s}`: {e}")));
    let pattern = |s: &str| s.parse::<ManifoldPattern>().map_err(|e| bad(format!("bad pattern `{s}`: {e}")));
    lines
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != header.len() {
                return Err(bad(format!("expected {} columns, got {}", header.len(), cols.len())));
            }
            let values = cols[4..].iter().map(|s| float(s)).collect::<io::Result<Vec<f64>>>()?;
            Ok(IterateRecord {
                k: cols[0].parse().map_err(|e| bad(format!("bad index: {e}")))?,
                residual: float(cols[1])?,
                pattern_x: pattern(cols[2])?,
                pattern_y: pattern(cols[3])?,
                x: Vector::from_column_slice(&values[..n]),
                y: Vector::from_column_slice(&values[n..n + m]),
            })
        })
        .collect()
}

pub fn rank_profile_csv(cert: &PartialSmoothCertificate) -> String {
    let dim = cert.profile.samples.first().map_or(0, |s| s.param.len());
    let mut out = String::from("sample_index");
    for i in 0..dim {
        write!(out, ",p{i}").unwrap();
    }
    out.push_str(",rank\n");
    for s in &cert.profile.samples {
        write!(out, "{}", s.index).unwrap();
        for x in s.param.iter() {
            write!(out, ",{}", fmt_float(*x)).unwrap();
        }
        writeln!(out, ",{}", s.rank).unwrap();
    }
    out
}

pub fn certificate_json(cert: &PartialSmoothCertificate) -> Value {
    json!({
        "verdict": cert.verdict.to_string(),
        "graph_dim": cert.graph_dim,
        "manifold_dim": cert.manifold_dim,
        "coderiv_dim": cert.coderiv_dim,
        "u_dim": cert.u_dim,
        "radius": json_float(cert.profile.radius),
        "seed": cert.profile.seed,
        "n_points": cert.profile.samples.len(),
        "distinct_ranks": cert.profile.distinct_ranks(),
        "reason": cert.reason,
    })
}

/// Writes `rank_profile.csv` (`sample_index,p0..,rank`) and the
/// `certificate.json` sidecar into `dir`.
pub fn emit_rank_profile(cert: &PartialSmoothCertificate, dir: &Path) -> io::Result<Vec<String>> {
    write_atomic(&dir.join("rank_profile.csv"), rank_profile_csv(cert).as_bytes())?;
    write_atomic(&dir.join("certificate.json"), &json_bytes(&certificate_json(cert)))?;
    Ok(vec!["rank_profile.csv".into(), "certificate.json".into()])
}

/// `log10(residual)` against iteration as a standalone SVG document.
pub fn residual_svg(trace: &Trace) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 48.0;
    let points: Vec<(f64, f64)> = trace
        .records
        .iter()
        .filter(|r| r.residual > 0.0 && r.residual.is_finite())
        .map(|r| (r.k as f64, r.residual.log10()))
        .collect();
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - PAD,
        W - PAD,
        H - PAD,
        H - PAD
    );
    if let (Some(first), Some(last)) = (points.first(), points.last()) {
        let (k0, k1) = (first.0, last.0.max(first.0 + 1.0));
        let lo = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor();
        let hi = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil().max(lo + 1.0);
        let sx = |k: f64| PAD + (k - k0) / (k1 - k0) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y - lo) / (hi - lo) * (H - 2.0 * PAD);
        out.push_str("<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"");
        for (i, (k, y)) in points.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            write!(out, "{:.2},{:.2}", sx(*k), sy(*y)).unwrap();
        }
        out.push_str("\"/>\n");
        writeln!(
            out,
            "<text x=\"{PAD}\" y=\"{:.2}\" font-size=\"12\">1e{hi}</text>\n\
             <text x=\"{PAD}\" y=\"{:.2}\" font-size=\"12\">1e{lo}</text>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">k = {}</text>",
            PAD - 6.0,
            H - PAD + 16.0,
            W - PAD,
            H - PAD + 16.0,
            last.0
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::PatternBlock;

    fn record(k: usize, x: Vec<f64>, signs: Vec<i8>) -> IterateRecord {
        IterateRecord {
            k,
            x: Vector::from_vec(x),
            y: Vector::from_vec(vec![0.25]),
            residual: 1.0 / (k as f64 + 3.0),
            pattern_x: ManifoldPattern::single(PatternBlock::SignedSupport(signs)),
            pattern_y: ManifoldPattern::single(PatternBlock::FullSpace(1)),
        }
    }

    fn sample_trace() -> Trace {
        Trace::from_records(
            vec![
                record(0, vec![0.1, -3.0, 1e-300], vec![1, -1, 1]),
                record(1, vec![0.0, -1.0 / 3.0, 0.0], vec![0, -1, 0]),
                record(2, vec![0.0, -2.5e-17, 0.0], vec![0, -1, 0]),
            ],
            true,
        )
    }

    #[test]
    fn three_records_four_lines() {
        let csv = trace_csv(&sample_trace());
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(csv.lines().next().unwrap(), "k,residual,pattern_x,pattern_y,x0,x1,x2,y0");
        assert!(csv.lines().nth(2).unwrap().starts_with("1,0.25,0-0,R1,"));
    }

    #[test]
    fn pattern_encoding() {
        let p = ManifoldPattern::single(PatternBlock::SignedSupport(vec![0, -1, 1]));
        assert_eq!(p.to_string(), "0-+");
    }

    #[test]
    fn csv_round_trip() {
        let trace = sample_trace();
        let parsed = parse_trace_csv(&trace_csv(&trace)).unwrap();
        assert_eq!(parsed, trace.records);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn svg_is_deterministic() {
        let a = residual_svg(&sample_trace());
        assert_eq!(a, residual_svg(&sample_trace()));
        assert!(a.contains("<polyline"));
    }
}
