//! Snapshot files, their JSON sidecars, and the diagnostics CSV.
//!
//! A snapshot is the byte string `"LPNS"`, version `0x01`, `n` as a
//! little-endian `u32`, the time as a little-endian `f64`, then the `3n³`
//! physical velocity values as little-endian `f64`, component-major with the
//! last index fastest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::PSI_PROFILE_ID;
use crate::solver::TrajectoryRow;
use crate::spectral::{
    dealias, forward_transform, leray_project, synthesize, GridSpec, PhysicalVelocity,
    SpectralVelocity,
};

pub const MAGIC: &[u8; 4] = b"LPNS";
pub const VERSION: u8 = 0x01;
const HEADER_LEN: usize = 4 + 1 + 4 + 8;

/// Fixed leading columns of the diagnostics CSV.
pub const CSV_COLUMNS: [&str; 12] = [
    "t",
    "E",
    "enstrophy",
    "H1",
    "H32",
    "y",
    "riccati_lhs",
    "riccati_rhs",
    "A",
    "B",
    "C",
    "flux_sum",
];

/// Snapshot bytes for a physical field.
pub fn encode_snapshot(field: &PhysicalVelocity, time: f64) -> Vec<u8> {
    let grid = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 3 * grid.len() * 8);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    out.extend_from_slice(&time.to_le_bytes());
    for c in field.components() {
        for v in c {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Decode snapshot bytes; the dealias fraction defaults to
/// the two-thirds rule when not given.
pub fn decode_snapshot(bytes: &[u8], dealias_fraction: Option<(u32, u32)>) -> Result<(PhysicalVelocity, f64)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "snapshot too short for its header ({} bytes)",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format("bad magic, not an LPNS snapshot".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {}", bytes[4])));
    }
    let n = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let time = f64::from_le_bytes(bytes[9..17].try_into().expect("8 bytes"));
    let grid = match dealias_fraction {
        Some((num, den)) => GridSpec::with_dealias(n, num, den),
        None => GridSpec::new(n),
    }
    .map_err(|e| Error::Format(format!("snapshot grid: {e}")))?;
    let expected = HEADER_LEN + 3 * grid.len() * 8;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "snapshot has {} bytes, expected {expected} for n = {n}",
            bytes.len()
        )));
    }
    let mut values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let comps: [Vec<f64>; 3] = std::array::from_fn(|_| values.by_ref().take(grid.len()).collect());
    Ok((PhysicalVelocity::new(grid, comps)?, time))
}

/// Provenance record stored next to each snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub n: usize,
    pub dealias: (u32, u32),
    pub time: f64,
    pub nu: Option<f64>,
    pub seed: Option<u64>,
    pub generator: String,
    pub psi_profile: String,
}

impl SnapshotMeta {
    pub fn new(grid: GridSpec, time: f64, generator: impl Into<String>) -> Self {
        SnapshotMeta {
            n: grid.n(),
            dealias: grid.dealias_fraction(),
            time,
            nu: None,
            seed: None,
            generator: generator.into(),
            psi_profile: PSI_PROFILE_ID.to_string(),
        }
    }
}

/// Path of the sidecar belonging to `path`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Write the snapshot and its sidecar.
pub fn write_snapshot(path: &Path, u: &SpectralVelocity, meta: &SnapshotMeta) -> Result<()> {
    fs::write(path, encode_snapshot(&synthesize(u), u.time))?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(meta)? + "\n")?;
    Ok(())
}

/// Load a snapshot as a dealiased, divergence-free spectral field.
///
/// A sidecar, when present, supplies the dealias fraction.
pub fn read_snapshot(path: &Path) -> Result<(SpectralVelocity, Option<SnapshotMeta>)> {
    let bytes = fs::read(path)?;
    let side = sidecar_path(path);
    let meta: Option<SnapshotMeta> = if side.exists() && side != path {
        Some(serde_json::from_str(&fs::read_to_string(&side)?)?)
    } else {
        None
    };
    let (phys, time) = decode_snapshot(&bytes, meta.as_ref().map(|m| m.dealias))?;
    let mut u = leray_project(&dealias(&forward_transform(&phys)?));
    u.time = time;
    Ok((u, meta))
}

fn fmt_num(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("writing to a String");
}

/// Header line for `shells` shell-energy columns.
pub fn csv_header(shells: usize) -> String {
    let mut cols: Vec<String> = CSV_COLUMNS.iter().map(|s| s.to_string()).collect();
    cols.extend((0..shells).map(|q| format!("Eq{q}")));
    cols.join(",")
}

/// Diagnostics CSV text, numbers with 17 significant digits.
pub fn diagnostics_csv(rows: &[TrajectoryRow]) -> String {
    let shells = rows.first().map_or(0, |r| r.shell_energies.len());
    let mut out = csv_header(shells);
    out.push('\n');
    for r in rows {
        let fixed = [
            r.t,
            r.energy,
            r.enstrophy,
            r.h1,
            r.h32,
            r.y,
            r.riccati_lhs,
            r.riccati_rhs,
            r.a,
            r.b,
            r.c,
            r.flux_sum,
        ];
        for (i, v) in fixed.iter().chain(&r.shell_energies).enumerate() {
            if i > 0 {
                out.push(',');
            }
            fmt_num(&mut out, *v);
        }
        out.push('\n');
    }
    out
}

/// Numeric CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<CsvTable> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Format("empty CSV".into()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Format(format!("row {}: bad number '{}'", i + 1, s.trim())))
                })
                .collect::<Result<_>>()?;
            if row.len() != header.len() {
                return Err(Error::Format(format!(
                    "row {} has {} fields, header has {}",
                    i + 1,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(CsvTable { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("CSV has no '{name}' column")))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_taylor_green;

    #[test]
    fn snapshot_round_trip() {
        let g = GridSpec::new(16).unwrap();
        let mut u = make_taylor_green(g, 1.3).unwrap();
        u.time = 0.25;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tg.lpns");
        let mut meta = SnapshotMeta::new(g, u.time, "taylor_green");
        meta.nu = Some(0.1);
        write_snapshot(&path, &u, &meta).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..5], b"LPNS\x01");
        assert_eq!(bytes.len(), 17 + 3 * 4096 * 8);
        let (v, m) = read_snapshot(&path).unwrap();
        assert_eq!(m.unwrap(), meta);
        assert_eq!(v.time, 0.25);
        assert!(v.sub(&u).max_coeff() < 1e-15);
    }

    #[test]
    fn corrupt_snapshots_are_rejected() {
        let g = GridSpec::new(16).unwrap();
        let good = encode_snapshot(&PhysicalVelocity::zeros(g), 0.0);
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        let mut bad_version = good.clone();
        bad_version[4] = 2;
        for b in [&bad_magic[..], &bad_version[..], &good[..good.len() - 8], &good[..10]] {
            assert!(matches!(decode_snapshot(b, None), Err(Error::Format(_))));
        }
        assert!(decode_snapshot(&good, None).is_ok());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let row = TrajectoryRow {
            t: 0.1,
            energy: 1.0 / 3.0,
            enstrophy: std::f64::consts::PI,
            h1: 1e-300,
            h32: 2.5,
            y: 6.25,
            riccati_lhs: -1.0,
            riccati_rhs: 39.0625,
            a: 0.0,
            b: 1.0,
            c: 2.0,
            flux_sum: -0.0,
            shell_energies: vec![0.5, 0.25],
        };
        let text = diagnostics_csv(&[row.clone()]);
        assert!(text.starts_with(
            "t,E,enstrophy,H1,H32,y,riccati_lhs,riccati_rhs,A,B,C,flux_sum,Eq0,Eq1\n"
        ));
        let table = CsvTable::parse(&text).unwrap();
        assert_eq!(table.column("E").unwrap(), vec![1.0 / 3.0]);
        assert_eq!(table.column("enstrophy").unwrap(), vec![std::f64::consts::PI]);
        assert_eq!(table.column("H1").unwrap(), vec![1e-300]);
        assert_eq!(table.column("Eq1").unwrap(), vec![0.25]);
        assert!(table.column("nope").is_err());
        assert!(CsvTable::parse("t,y\n1,2,3\n").is_err());
        assert!(CsvTable::parse("t,y\n1,x\n").is_err());
    }
}
