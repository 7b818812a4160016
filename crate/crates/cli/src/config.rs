//! `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lpns_core::solver::SolverParams;
use lpns_core::spectral::{make_random_field, make_taylor_green, GridSpec, SpectralVelocity};
use lpns_core::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    TaylorGreen { amplitude: f64 },
    Random { seed: u64, spectrum: BTreeMap<i32, f64> },
    Snapshot { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub nu: f64,
    pub dt: f64,
    pub t_end: f64,
    pub initial: Initial,
    pub s: f64,
    pub out: PathBuf,
    pub diag_every: usize,
    pub snapshot_every: usize,
    pub nonlinear: bool,
}

const KEYS: [&str; 14] = [
    "n",
    "nu",
    "dt",
    "t_end",
    "initial",
    "amplitude",
    "seed",
    "spectrum",
    "snapshot",
    "s",
    "out",
    "diag_every",
    "snapshot_every",
    "nonlinear",
];

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| config_err(format!("invalid value '{raw}' for '{key}'")))
}

/// `"0:1.0, 1:0.5"` → `{0: 1.0, 1: 0.5}`.
pub fn parse_spectrum(raw: &str) -> Result<BTreeMap<i32, f64>> {
    let mut out = BTreeMap::new();
    for item in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (q, e) = item
            .split_once(':')
            .ok_or_else(|| config_err(format!("spectrum entry '{item}' is not 'band:energy'")))?;
        let q: i32 = parse_value("spectrum", q.trim())?;
        let e: f64 = parse_value("spectrum", e.trim())?;
        if out.insert(q, e).is_some() {
            return Err(config_err(format!("spectrum band {q} given twice")));
        }
    }
    Ok(out)
}

impl RunConfig {
    /// Parse config text; relative snapshot paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<RunConfig> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected 'key = value'", lineno + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(config_err(format!("line {}: unknown key '{key}'", lineno + 1)));
            }
            if map.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(config_err(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        let required = |k: &str| get(k).ok_or_else(|| config_err(format!("missing required key '{k}'")));

        let initial = match get("initial").unwrap_or("taylor_green") {
            "taylor_green" => Initial::TaylorGreen {
                amplitude: get("amplitude").map_or(Ok(1.0), |v| parse_value("amplitude", v))?,
            },
            "random" => Initial::Random {
                seed: get("seed").map_or(Ok(0), |v| parse_value("seed", v))?,
                spectrum: parse_spectrum(required("spectrum")?)?,
            },
            "snapshot" => Initial::Snapshot {
                path: base.join(required("snapshot")?),
            },
            other => return Err(config_err(format!("unknown initial condition '{other}'"))),
        };
        let cfg = RunConfig {
            n: get("n").map_or(Ok(32), |v| parse_value("n", v))?,
            nu: parse_value("nu", required("nu")?)?,
            dt: parse_value("dt", required("dt")?)?,
            t_end: parse_value("t_end", required("t_end")?)?,
            initial,
            s: get("s").map_or(Ok(1.5), |v| parse_value("s", v))?,
            out: PathBuf::from(get("out").unwrap_or("run")),
            diag_every: get("diag_every").map_or(Ok(1), |v| parse_value("diag_every", v))?,
            snapshot_every: get("snapshot_every").map_or(Ok(0), |v| parse_value("snapshot_every", v))?,
            nonlinear: get("nonlinear").map_or(Ok(true), |v| parse_value("nonlinear", v))?,
        };
        cfg.params().validate()?;
        GridSpec::new(cfg.n)?;
        Ok(cfg)
    }

    pub fn params(&self) -> SolverParams {
        SolverParams {
            nu: self.nu,
            dt: self.dt,
            t_end: self.t_end,
            diag_every: self.diag_every,
            snapshot_every: self.snapshot_every,
            nonlinear: self.nonlinear,
            diag_s: self.s,
        }
    }

    /// Initial field on the configured grid.
    pub fn initial_field(&self) -> Result<SpectralVelocity> {
        let grid = GridSpec::new(self.n)?;
        match &self.initial {
            Initial::TaylorGreen { amplitude } => make_taylor_green(grid, *amplitude),
            Initial::Random { seed, spectrum } => make_random_field(grid, *seed, spectrum),
            Initial::Snapshot { path } => {
                let (u, _) = lpns_core::io::read_snapshot(path)?;
                if u.grid().n() != self.n {
                    return Err(config_err(format!(
                        "snapshot grid n = {} does not match n = {}",
                        u.grid().n(),
                        self.n
                    )));
                }
                Ok(u)
            }
        }
    }

    /// Configuration echo for the run manifest.
    pub fn to_json(&self) -> serde_json::Value {
        let initial = match &self.initial {
            Initial::TaylorGreen { amplitude } => {
                serde_json::json!({ "kind": "taylor_green", "amplitude": amplitude })
            }
            Initial::Random { seed, spectrum } => {
                let spectrum: BTreeMap<String, f64> =
                    spectrum.iter().map(|(q, e)| (q.to_string(), *e)).collect();
                serde_json::json!({ "kind": "random", "seed": seed, "spectrum": spectrum })
            }
            Initial::Snapshot { path } => {
                serde_json::json!({ "kind": "snapshot", "path": path.display().to_string() })
            }
        };
        serde_json::json!({
            "n": self.n,
            "nu": self.nu,
            "dt": self.dt,
            "t_end": self.t_end,
            "initial": initial,
            "s": self.s,
            "diag_every": self.diag_every,
            "snapshot_every": self.snapshot_every,
            "nonlinear": self.nonlinear,
        })
    }
}
