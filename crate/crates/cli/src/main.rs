//! fracflow: run scenarios, solve expanders, refinement studies, pin oracle values.
//!
//! Exit codes: 0 success, 1 scenario failure or runtime error, 2 usage or
//! config error. Errors end with one JSON line on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracflow::experiments::{convergence_study, run_scenario, run_scenario_to, ScenarioConfig, ScenarioName, CURVATURE_STUDIES};
use fracflow::gridfield::{FarFieldModel, GridSpec};
use fracflow::kernel::KernelParams;
use fracflow::selfsimilar::{solve_expander, ExpanderOptions};
use fracflow::Error;

#[derive(Parser, Debug)]
#[command(name = "fracflow", version, about = "Fractional mean curvature flow of Lipschitz graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write report.json, monitors.csv, snapshots/.
    Simulate(Common),
    /// Solve the expander of C|x| and write its profile.
    Expander {
        #[command(flatten)]
        common: Common,
        /// Cone slope C.
        #[arg(long, default_value_t = 0.5)]
        slope: f64,
        /// Stop once sup|ũ_τ| falls below this.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Refinement study at h, h/2, ..., h/2^{k-1}.
    Study {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Write the oracle reference values as JSON.
    PinOracles {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Scenario name (study: also gaussian_curvature, plane_curvature).
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    h: Option<f64>,
    /// Window half-width.
    #[arg(long = "L")]
    l: Option<f64>,
    /// Horizon.
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
    /// Outer truncation radius of the curvature integral.
    #[arg(long)]
    rout: Option<f64>,
    /// Number of samples/snapshots after the initial one.
    #[arg(long)]
    snapshots: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML file with any scenario field; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Failure with its exit code.
struct Fail {
    code: u8,
    kind: &'static str,
    message: String,
}

fn usage(message: impl Into<String>) -> Fail {
    Fail {
        code: 2,
        kind: "usage",
        message: message.into(),
    }
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidArgument(_) | Error::UnknownScenario(_) | Error::Resolution(_) => 2,
            Error::Scenario { source, .. } if matches!(**source, Error::InvalidArgument(_)) => 2,
            _ => 1,
        };
        Fail {
            code,
            kind: if code == 2 { "config" } else { "runtime" },
            message: e.to_string(),
        }
    }
}

/// Settings resolved from the config file and the flags.
struct Resolved {
    cfg: ScenarioConfig,
    name: String,
    threads: Option<usize>,
    out: Option<PathBuf>,
}

fn read_table(path: &Path) -> Result<toml::Table, Fail> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    text.parse::<toml::Table>()
        .map_err(|e| usage(format!("bad config {}: {e}", path.display())))
}

fn resolve(common: &Common, need_scenario: bool) -> Result<Resolved, Fail> {
    let mut table = match &common.config {
        Some(p) => read_table(p)?,
        None => toml::Table::new(),
    };
    let take_str = |t: &mut toml::Table, k: &str| -> Result<Option<String>, Fail> {
        match t.remove(k) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s)),
            Some(other) => Err(usage(format!("`{k}` must be a string, got {other}"))),
        }
    };
    let file_name = take_str(&mut table, "scenario")?;
    let file_out = take_str(&mut table, "out")?;
    let file_threads = match table.remove("threads") {
        None => None,
        Some(toml::Value::Integer(i)) if i > 0 => Some(i as usize),
        Some(other) => return Err(usage(format!("`threads` must be a positive integer, got {other}"))),
    };
    table.remove("name");
    let name = common.scenario.clone().or(file_name);
    let name = match (name, need_scenario) {
        (Some(n), _) => n,
        (None, true) => return Err(usage("--scenario is required")),
        (None, false) => "cone_convergence".to_string(),
    };
    let study = CURVATURE_STUDIES.contains(&name.as_str());
    let base_name = if study {
        ScenarioName::PlaneStability
    } else {
        name.parse::<ScenarioName>().map_err(Fail::from)?
    };
    let base = ScenarioConfig::new(base_name);
    let mut merged = toml::Table::try_from(&base).map_err(|e| usage(e.to_string()))?;
    for (k, v) in table {
        if !merged.contains_key(&k) && !matches!(k.as_str(), "outer_radius" | "expander_half_width" | "expander_h") {
            return Err(usage(format!("unknown config key `{k}`")));
        }
        merged.insert(k, v);
    }
    let mut cfg: ScenarioConfig = toml::Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| usage(format!("bad config: {e}")))?;
    if let Some(v) = common.s {
        cfg.s = v;
    }
    if let Some(v) = common.n {
        cfg.n = v;
    }
    if let Some(v) = common.h {
        cfg.h = v;
    }
    if let Some(v) = common.l {
        cfg.half_width = v;
    }
    if let Some(v) = common.t {
        cfg.horizon = v;
    }
    if let Some(v) = common.cfl {
        cfg.cfl = v;
    }
    if let Some(v) = common.rout {
        cfg.outer_radius = Some(v);
    }
    if let Some(v) = common.snapshots {
        cfg.snapshots = v;
    }
    if !study {
        cfg.validate().map_err(Fail::from)?;
    }
    Ok(Resolved {
        cfg,
        name,
        threads: common.threads.or(file_threads),
        out: common.out.clone().or(file_out.map(PathBuf::from)),
    })
}

fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> Result<T, Fail> + Send) -> Result<T, Fail>
where
    T: Send,
{
    match threads {
        None => f(),
        Some(0) => Err(usage("--threads must be positive")),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| usage(format!("thread pool: {e}")))?;
            pool.install(f)
        }
    }
}

fn io(e: impl std::fmt::Display) -> Fail {
    Fail {
        code: 1,
        kind: "io",
        message: e.to_string(),
    }
}

fn simulate(common: &Common) -> Result<u8, Fail> {
    let r = resolve(common, true)?;
    if CURVATURE_STUDIES.contains(&r.name.as_str()) {
        return Err(usage(format!("`{}` is a study, not a scenario", r.name)));
    }
    let verdict = with_threads(r.threads, || {
        Ok(match &r.out {
            Some(dir) => run_scenario_to(&r.cfg, dir)?,
            None => run_scenario(&r.cfg)?,
        })
    })?;
    println!("{}", verdict.to_json().map_err(Fail::from)?);
    if verdict.pass {
        Ok(0)
    } else {
        eprintln!("{}", serde_json::json!({"error": "scenario failed", "kind": "verdict", "failed": verdict.failures()}));
        Ok(1)
    }
}

fn expander(common: &Common, slope: f64, tol: f64) -> Result<u8, Fail> {
    let r = resolve(common, false)?;
    let cfg = &r.cfg;
    let params = KernelParams::new(cfg.n, cfg.s).map_err(Fail::from)?;
    let grid = GridSpec::new(cfg.n, cfg.half_width, cfg.h).map_err(Fail::from)?;
    let mut opts = ExpanderOptions::new(grid);
    opts.tol = tol;
    opts.cfl = cfg.cfl;
    opts.quad = cfg.quad();
    opts.scheme = cfg.scheme;
    let cone = FarFieldModel::symmetric_cone(cfg.n, slope);
    let p = with_threads(r.threads, || Ok(solve_expander(params, &cone, &opts)?))?;
    if let Some(dir) = &r.out {
        std::fs::create_dir_all(dir).map_err(io)?;
        p.write(dir, "expander").map_err(Fail::from)?;
    }
    println!("{}", serde_json::to_string_pretty(&p.summary()).map_err(io)?);
    Ok(0)
}

fn study(common: &Common, k: usize) -> Result<u8, Fail> {
    let r = resolve(common, true)?;
    if k < 2 {
        return Err(usage("--k must be at least 2"));
    }
    let report = with_threads(r.threads, || Ok(convergence_study(&r.name, &r.cfg, k)?))?;
    let text = serde_json::to_string_pretty(&report).map_err(io)?;
    if let Some(dir) = &r.out {
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(dir.join("study.json"), &text).map_err(io)?;
    }
    println!("{text}");
    Ok(0)
}

#[cfg(feature = "oracle")]
fn pin_oracles(out: &Path) -> Result<u8, Fail> {
    let pins = fracflow_oracle::pins::compute_pins().map_err(|e| Fail {
        code: 1,
        kind: "oracle",
        message: e.to_string(),
    })?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(out, serde_json::to_string_pretty(&pins).map_err(io)?).map_err(io)?;
    eprintln!("wrote {} pins to {}", pins.gs.len() + pins.gs_infinity.len() + pins.cbar.len() + pins.hs.len(), out.display());
    Ok(0)
}

#[cfg(not(feature = "oracle"))]
fn pin_oracles(_out: &Path) -> Result<u8, Fail> {
    Err(usage("built without the `oracle` feature"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Expander { common, slope, tol } => expander(common, *slope, *tol),
        Command::Study { common, k } => study(common, *k),
        Command::PinOracles { out } => pin_oracles(out),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            eprintln!("{}", serde_json::json!({"error": f.message, "kind": f.kind, "code": f.code}));
            ExitCode::from(f.code)
        }
    }
}
