use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use lpns_core::bounds::{blowup_floor, eval_lower_bound, fit_rate, BoundKind, BoundSpec, NormSeries};
use lpns_core::flux::shell_flux_report;
use lpns_core::io::{diagnostics_csv, read_snapshot, write_snapshot, CsvTable, SnapshotMeta};
use lpns_core::lp::{FilterBank, PSI_PROFILE_ID};
use lpns_core::solver::{admissible_dt, simulate_with};
use lpns_core::verify::{run_suite, Suite, VerifyOptions};
use lpns_core::Error;

mod config;

use config::{Initial, RunConfig};

#[derive(Parser)]
#[command(name = "lpns", version, about = "Periodic Navier-Stokes runs and Littlewood-Paley diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `out` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the shell flux report of a snapshot as JSON.
    Analyze {
        snapshot: PathBuf,
        #[arg(long, default_value_t = 1.5)]
        s: f64,
        /// Viscosity; defaults to the sidecar value, then 1.
        #[arg(long)]
        nu: Option<f64>,
    },
    /// Run one verification suite.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        ensemble: usize,
        #[arg(long)]
        inject_nonsolenoidal: bool,
    },
    /// Blow-up floor, rate fit and bound envelopes for a diagnostics CSV.
    Bounds {
        csv: PathBuf,
        #[arg(long, default_value_t = 1.5)]
        s: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Bound kinds as `kind` or `kind=param`, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "main_h32")]
        kinds: Vec<String>,
        /// Blow-up time for the fit and envelopes; defaults to the floor.
        #[arg(long)]
        t_star: Option<f64>,
        /// `‖u₀‖₂`, needed by rss_high_s.
        #[arg(long)]
        u0_norm: Option<f64>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Divergence { .. }
            | Error::StepSize { .. }
            | Error::Invariant(_)
            | Error::UndefinedRatio(_)
            | Error::Fit(_) => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = std::result::Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Simulate { config, out } => cmd_simulate(&config, out),
        Command::Analyze { snapshot, s, nu } => cmd_analyze(&snapshot, s, nu),
        Command::Verify {
            suite,
            seed,
            n,
            ensemble,
            inject_nonsolenoidal,
        } => cmd_verify(&suite, seed, n, ensemble, inject_nonsolenoidal),
        Command::Bounds {
            csv,
            s,
            c,
            kinds,
            t_star,
            u0_norm,
        } => cmd_bounds(&csv, s, c, &kinds, t_star, u0_norm),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("lpns: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> std::result::Result<(), Failure> {
    let Ok(raw) = std::env::var("LPNS_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::config(format!("LPNS_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::config(format!("thread pool: {e}")))
}

fn write_file(path: &Path, contents: &str) -> std::result::Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn cmd_simulate(config_path: &Path, out: Option<PathBuf>) -> CmdResult {
    let text = fs::read_to_string(config_path)
        .map_err(|e| Failure::config(format!("{}: {e}", config_path.display())))?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let cfg = RunConfig::parse(&text, base)?;
    let out = out.unwrap_or_else(|| cfg.out.clone());
    let params = cfg.params();
    let u0 = cfg.initial_field()?;
    if cfg.nonlinear {
        let admissible = admissible_dt(&u0);
        if params.dt > admissible {
            return Err(Failure::config(format!(
                "dt = {} violates the CFL limit; admissible dt <= {admissible:e}",
                params.dt
            )));
        }
    }

    let snap_dir = out.join("snapshots");
    fs::create_dir_all(if params.snapshot_every > 0 { &snap_dir } else { &out })
        .map_err(|e| Failure::config(format!("{}: {e}", out.display())))?;

    let (generator, seed) = match &cfg.initial {
        Initial::TaylorGreen { .. } => ("taylor_green", None),
        Initial::Random { seed, .. } => ("random", Some(*seed)),
        Initial::Snapshot { .. } => ("snapshot", None),
    };
    let mut snapshots = Vec::new();
    let rows = simulate_with(&u0, &params, |u| {
        let name = format!("snap_{:06}.lpns", snapshots.len());
        let mut meta = SnapshotMeta::new(u.grid(), u.time, generator);
        meta.nu = Some(cfg.nu);
        meta.seed = seed;
        write_snapshot(&snap_dir.join(&name), u, &meta)?;
        snapshots.push(format!("snapshots/{name}"));
        Ok(())
    })?;

    write_file(&out.join("diagnostics.csv"), &diagnostics_csv(&rows))?;
    let manifest = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "psi_profile": PSI_PROFILE_ID,
        "config": cfg.to_json(),
        "steps": params.steps(),
        "diagnostics": "diagnostics.csv",
        "snapshots": snapshots,
    });
    write_file(&out.join("manifest.json"), &pretty(&manifest))?;
    eprintln!(
        "lpns: {} steps, {} diagnostic rows, output in {}",
        params.steps(),
        rows.len(),
        out.display()
    );
    Ok(0)
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values serialize") + "\n"
}

fn cmd_analyze(path: &Path, s: f64, nu: Option<f64>) -> CmdResult {
    let (u, meta) = read_snapshot(path)?;
    let nu = nu.or(meta.as_ref().and_then(|m| m.nu)).unwrap_or(1.0);
    let bank = FilterBank::new(u.grid())?;
    let report = shell_flux_report(&u, &bank, s, nu)?;
    let out = json!({
        "n": u.grid().n(),
        "time": u.time,
        "s": s,
        "nu": nu,
        "psi_profile": PSI_PROFILE_ID,
        "sobolev_norm": bank.sobolev_norm(&u, s)?,
        "energy": u.l2_norm_sq(),
        "enstrophy": u.enstrophy(),
        "report": report,
    });
    print!("{}", pretty(&out));
    Ok(0)
}

fn cmd_verify(suite: &str, seed: u64, n: usize, ensemble: usize, inject: bool) -> CmdResult {
    let suite: Suite = suite.parse()?;
    let mut opts = VerifyOptions::new(seed, n);
    opts.ensemble = ensemble;
    opts.inject_nonsolenoidal = inject;
    let report = run_suite(suite, &opts)?;
    println!("suite {} n={} seed={}", report.suite, report.n, report.seed);
    for c in &report.checks {
        let status = match (c.gating, c.passed()) {
            (false, _) => "INFO",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        if c.gating {
            println!("{status} {} = {:.6e} (limit {:.1e})", c.name, c.value, c.limit);
        } else {
            println!("{status} {} = {:.6e}", c.name, c.value);
        }
    }
    if report.passed() {
        println!("suite {} passed", report.suite);
        Ok(0)
    } else {
        println!("suite {} FAILED", report.suite);
        Ok(1)
    }
}

fn parse_kind(raw: &str, s: f64) -> std::result::Result<(BoundKind, f64), Failure> {
    let (name, param) = match raw.split_once('=') {
        Some((k, p)) => {
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|_| Failure::config(format!("bad parameter in '{raw}'")))?;
            (k.trim(), p)
        }
        None => (raw.trim(), s),
    };
    let kind: BoundKind = name.parse()?;
    Ok((kind, if kind.takes_param() { param } else { f64::NAN }))
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn cmd_bounds(
    csv: &Path,
    s: f64,
    c: f64,
    kinds: &[String],
    t_star: Option<f64>,
    u0_norm: Option<f64>,
) -> CmdResult {
    let text = fs::read_to_string(csv).map_err(|e| Failure::config(format!("{}: {e}", csv.display())))?;
    let table = CsvTable::parse(&text)?;
    let ts = table.column("t")?;
    let ys = table.column("y")?;
    let kinds = kinds
        .iter()
        .filter(|k| !k.trim().is_empty())
        .map(|k| parse_kind(k, s))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let series = NormSeries::new(ts.iter().copied().zip(ys.iter().copied()).collect())?;
    let floor = blowup_floor(&series, c)?;
    let t_end = series.samples().last().map_or(0.0, |&(t, _)| t);
    let no_blowup_signal = floor > t_end;
    let t_ref = t_star.unwrap_or(floor);

    let (fit, fit_error) = if t_ref.is_finite() {
        match fit_rate(&series, t_ref) {
            Ok(f) => (json!({ "alpha": f.alpha, "c_fit": f.c_fit }), Value::Null),
            Err(e) => (Value::Null, json!(e.to_string())),
        }
    } else {
        (Value::Null, json!("no finite blow-up time to fit against"))
    };

    let mut bounds = Vec::new();
    for (kind, param) in kinds {
        let spec = BoundSpec::new(kind, param, c, if t_ref.is_finite() { t_ref } else { 1.0 }, u0_norm)?;
        let mut envelope = Vec::new();
        if t_ref.is_finite() {
            for &(t, y) in series.samples() {
                if let Ok(v) = eval_lower_bound(&spec, t) {
                    envelope.push(json!({ "t": t, "bound": v, "norm": y.sqrt() }));
                }
            }
        }
        bounds.push(json!({
            "kind": kind.name(),
            "params": {
                "param": finite_or_null(param),
                "c": c,
                "t_star": finite_or_null(t_ref),
                "aux": u0_norm,
            },
            "rate": spec.rate(),
            "envelope": envelope,
        }));
    }

    let out = json!({
        "s": s,
        "c": c,
        "samples": series.len(),
        "t_end": t_end,
        "blowup_floor": finite_or_null(floor),
        "no_blowup_signal": no_blowup_signal,
        "t_star": finite_or_null(t_ref),
        "fit_rate": fit,
        "fit_error": fit_error,
        "bounds": bounds,
    });
    if no_blowup_signal {
        eprintln!("lpns: no blow-up signal (floor {floor} exceeds t_end {t_end})");
    }
    print!("{}", pretty(&out));
    Ok(0)
}
