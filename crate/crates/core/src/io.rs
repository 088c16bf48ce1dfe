//! Point clouds as CSV or the little-endian "TSTL" binary format, report JSON and CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dorronsoro::SampledFunction;
use crate::error::{Result, TstError};
use crate::geometry::{Point, PointCloud};
use crate::multiscale::TstReport;
use crate::reifenberg::SurfaceIterate;

pub const SCHEMA_VERSION: u32 = 1;
pub const BINARY_MAGIC: &[u8; 4] = b"TSTL";

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn header(prefix: &str, n: usize) -> String {
    (0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(",")
}

/// Header `x0,..,x{n-1}`, then one point per row.
pub fn cloud_to_csv(cloud: &PointCloud) -> String {
    let mut s = header("x", cloud.dim());
    s.push('\n');
    for p in cloud.iter() {
        s.push_str(&p.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(v),
            // a non-numeric first row is a header
            Err(_) if i == 0 => continue,
            Err(e) => return Err(TstError::Format(format!("row {}: {e}", i + 1))),
        }
    }
    Ok(rows)
}

pub fn cloud_from_csv(text: &str) -> Result<PointCloud> {
    let rows = parse_rows(text)?;
    if rows.is_empty() {
        return Err(TstError::Format("no points".into()));
    }
    PointCloud::from_points(&rows)
}

/// "TSTL", u32 n, u64 count, then n·count f64, all little-endian.
pub fn cloud_to_binary(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * cloud.raw().len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(cloud.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(cloud.len() as u64).to_le_bytes());
    for v in cloud.raw() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn cloud_from_binary(bytes: &[u8]) -> Result<PointCloud> {
    if bytes.len() < 16 || &bytes[..4] != BINARY_MAGIC {
        return Err(TstError::Format("missing TSTL header".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = &bytes[16..];
    let want = n.checked_mul(count).and_then(|t| t.checked_mul(8));
    if want != Some(body.len()) {
        return Err(TstError::Format(format!("body has {} bytes, header promises {n}×{count} values", body.len())));
    }
    let data: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    PointCloud::new(n, data)
}

/// Reads either format, by magic.
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| TstError::Io(format!("{}: {e}", path.display())))?;
    if bytes.starts_with(BINARY_MAGIC) {
        cloud_from_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|e| TstError::Format(e.to_string()))?;
        cloud_from_csv(&text)
    }
}

/// Binary when the extension is `.tstl` or `.bin`, CSV otherwise.
pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let binary = matches!(path.extension().and_then(|e| e.to_str()), Some("tstl") | Some("bin"));
    if binary {
        fs::write(path, cloud_to_binary(cloud))?;
    } else {
        fs::write(path, cloud_to_csv(cloud))?;
    }
    Ok(())
}

/// Columns `x0..x{d-1}` then `f0..f{m-1}`; the header is required.
pub fn sampled_function_from_csv(text: &str, lipschitz: Option<f64>) -> Result<SampledFunction> {
    let first = text.lines().find(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let Some(first) = first else {
        return Err(TstError::Format("empty input".into()));
    };
    let names: Vec<&str> = first.split(',').map(|s| s.trim()).collect();
    let d = names.iter().filter(|s| s.starts_with('x')).count();
    let m = names.iter().filter(|s| s.starts_with('f')).count();
    if d == 0 || m == 0 || d + m != names.len() || names[..d].iter().any(|s| !s.starts_with('x')) {
        return Err(TstError::Format("header must be x0..x{d-1},f0..f{m-1}".into()));
    }
    let rows = parse_rows(text)?;
    let mut xs = Vec::with_capacity(rows.len());
    let mut vs = Vec::with_capacity(rows.len());
    for (i, r) in rows.into_iter().enumerate() {
        if r.len() != d + m {
            return Err(TstError::Format(format!("row {} has {} fields, expected {}", i + 2, r.len(), d + m)));
        }
        xs.push(r[..d].to_vec());
        vs.push(r[d..].to_vec());
    }
    SampledFunction::new(d, xs, vs, lipschitz)
}

pub fn sampled_function_to_csv(f: &SampledFunction) -> String {
    let mut s = format!("{},{}\n", header("x", f.d), header("f", f.m));
    for (x, v) in f.xs.iter().zip(&f.values) {
        let row: Vec<String> = x.iter().chain(v).map(|&t| fmt_f64(t)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Deserialize)]
struct VersionedOwned<T> {
    schema_version: u32,
    #[serde(flatten)]
    body: T,
}

/// Pretty JSON carrying `schema_version` next to the fields of `value`.
pub fn to_versioned_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Versioned { schema_version: SCHEMA_VERSION, body: value })?)
}

pub fn from_versioned_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    let v: VersionedOwned<T> = serde_json::from_str(text)?;
    if v.schema_version != SCHEMA_VERSION {
        return Err(TstError::Format(format!("schema_version {} not supported", v.schema_version)));
    }
    Ok(v.body)
}

pub const CUBE_CSV_HEADER: &str = "level,id,beta,bbeta,bwgl_flag,ell_d,term";

/// One row per cube of the report, in id order.
pub fn cube_table_csv(r: &TstReport) -> String {
    let mut s = String::from(CUBE_CSV_HEADER);
    s.push('\n');
    let dd = r.params.d as i32;
    for c in &r.cubes {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            c.level,
            c.id,
            fmt_f64(c.beta),
            fmt_f64(c.bbeta),
            u8::from(c.bwgl),
            fmt_f64(c.ell.powi(dd)),
            fmt_f64(c.term)
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeRow {
    pub level: usize,
    pub id: usize,
    pub beta: f64,
    pub bbeta: f64,
    pub bwgl_flag: u8,
    pub ell_d: f64,
    pub term: f64,
}

pub fn read_cube_table(text: &str) -> Result<Vec<CubeRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
    if headers != CUBE_CSV_HEADER {
        return Err(TstError::Format(format!("unexpected cube table header `{headers}`")));
    }
    rdr.deserialize().map(|r| r.map_err(TstError::from)).collect()
}

/// `level,index,c0..c{n-1}` for every f_k.
pub fn surface_csv(s: &SurfaceIterate) -> String {
    let n = s.images.first().and_then(|l| l.first()).map(|p| p.len()).unwrap_or(0);
    let mut out = format!("level,index,{}\n", header("c", n));
    for (k, img) in s.images.iter().enumerate() {
        for (i, p) in img.iter().enumerate() {
            let row: Vec<String> = p.iter().map(|&v| fmt_f64(v)).collect();
            let _ = writeln!(out, "{k},{i},{}", row.join(","));
        }
    }
    out
}

pub fn points_to_csv(points: &[Point], prefix: &str) -> String {
    let n = points.first().map(|p| p.len()).unwrap_or(0);
    let mut out = header(prefix, n);
    out.push('\n');
    for p in points {
        out.push_str(&p.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_roundtrip_exact() {
        let c = PointCloud::from_points(&[vec![0.1, -2.5], vec![1e-300, 3.0]]).unwrap();
        let back = cloud_from_binary(&cloud_to_binary(&c)).unwrap();
        assert_eq!(back.raw(), c.raw());
    }

    #[test]
    fn csv_roundtrip_exact() {
        let c = PointCloud::from_points(&[vec![0.1, 1.0 / 3.0], vec![-7.25e-12, 2.0]]).unwrap();
        let back = cloud_from_csv(&cloud_to_csv(&c)).unwrap();
        assert_eq!(back.raw(), c.raw());
    }

    #[test]
    fn truncated_binary_rejected() {
        let c = PointCloud::from_points(&[vec![0.1, -2.5]]).unwrap();
        let mut b = cloud_to_binary(&c);
        b.pop();
        assert!(cloud_from_binary(&b).is_err());
    }
}
