//! The `abm` command line.
//!
//! ```text
//! abm models
//! abm run flocking --steps 500 --seed 7 --param min_dis=0.25 --out runs/f7
//! abm animate runs/f7 --fps 10 --format gif
//! abm export runs/f7 --agent 1
//! abm serve --port 8080
//! ```
//!
//! Exit status: 0 on success, 2 on usage errors (bad flags, unknown model or
//! parameter, unparsable value), 1 on runtime failures.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use abm::datacollect::Format;
use abm::gallery::{self, GalleryModel};
use abm::render::{AnimOpts, Projection, ViewOpts};
use abm::rundir::{self, AnimFormat, Manifest, Query};
use abm::{Error, PropValue};

use crate::api::{router, AppState, ServiceConfig};

/// Default parent of run directories when `--out` is not given.
pub const OUT_DIR_ENV: &str = "ABM_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "abm", version, about = "Run, animate, export and serve agent-based models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List gallery models and their parameters.
    Models,
    /// Run a gallery model and store its tapes.
    Run(RunArgs),
    /// Render a stored run.
    Animate(AnimateArgs),
    /// Evaluate a query over a stored run.
    Export(ExportArgs),
    /// Start the interactive service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Gallery model (flocking, schelling3d, ising). Optional with --config.
    pub model: Option<String>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Parameter override, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Run directory [default: $ABM_OUT_DIR/<model>-s<seed>, or runs/...]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// A manifest.json or `{model, seed, steps, params}` file; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AnimFormatArg {
    Gif,
    Frames,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ProjectionArg {
    Xy,
    Xz,
    Yz,
}

#[derive(Debug, Args)]
pub struct AnimateArgs {
    pub run_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub fps: u32,
    #[arg(long, value_enum, default_value = "gif")]
    pub format: AnimFormatArg,
    /// Glyph size multiplier.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Axis pair shown for 3D runs.
    #[arg(long, value_enum, default_value = "xy")]
    pub projection: ProjectionArg,
    /// Longer canvas side in pixels.
    #[arg(long, default_value_t = 400)]
    pub canvas: u32,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("query").required(true)))]
pub struct ExportArgs {
    pub run_dir: PathBuf,
    /// Recorded properties of one agent per tick.
    #[arg(long, group = "query")]
    pub agent: Option<u64>,
    /// Recorded properties of one node per tick.
    #[arg(long, group = "query")]
    pub node: Option<u64>,
    /// Mean of an agent property per tick.
    #[arg(long, group = "query", value_name = "KEY")]
    pub avg: Option<String>,
    /// Mean of a node property per tick.
    #[arg(long = "nodes-avg", group = "query", value_name = "KEY")]
    pub nodes_avg: Option<String>,
    /// Per-tick counts of the model's named predicates, comma separated.
    #[arg(long, group = "query", value_name = "NAMES")]
    pub counts: Option<String>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Restrict the offered models; repeatable.
    #[arg(long = "model")]
    pub models: Vec<String>,
    /// Serve this directory at `/` instead of the built-in page.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub step_delay_ms: u64,
}

/// Failure of a command, carrying its exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::UnknownModel { .. } | Error::UnknownParam { .. } | Error::InvalidArgument(_) | Error::Parse { .. } => 2,
            _ => 1,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn runtime(message: impl Into<String>) -> CliError {
    CliError {
        code: 1,
        message: message.into(),
    }
}

/// Parses `std::env::args`, runs the command, and reports errors on stderr.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Models => {
            models();
            Ok(())
        }
        Command::Run(a) => run(a).map(|_| ()),
        Command::Animate(a) => animate(a),
        Command::Export(a) => export(a),
        Command::Serve(a) => serve(a),
    }
}

fn models() {
    for m in gallery::all() {
        println!("{}  {}", m.name(), m.description());
        for p in m.params() {
            let kind = if p.structural { "structural" } else { "dynamic" };
            println!("    {:<15} {:<10} {kind}", p.key, p.default.to_string());
        }
    }
}

#[derive(serde::Deserialize)]
struct RunConfig {
    model: String,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    steps: Option<u64>,
    #[serde(default)]
    params: serde_json::Map<String, serde_json::Value>,
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

/// Runs a model and writes its run directory, returning the directory.
pub fn run(a: RunArgs) -> Result<PathBuf, CliError> {
    let config = a.config.as_deref().map(load_config).transpose()?;
    let name = match (&a.model, &config) {
        (Some(m), _) => m.clone(),
        (None, Some(c)) => c.model.clone(),
        (None, None) => {
            return Err(CliError {
                code: 2,
                message: "a model name or --config is required".into(),
            })
        }
    };
    let entry: &dyn GalleryModel = gallery::lookup(&name)?;
    let mut overrides: BTreeMap<String, PropValue> = BTreeMap::new();
    let mut seed = abm::DEFAULT_SEED;
    let mut steps = entry.default_steps();
    if let Some(c) = &config {
        if c.model != name {
            return Err(CliError {
                code: 2,
                message: format!("config is for `{}`, not `{name}`", c.model),
            });
        }
        overrides = gallery::params_from_json(entry, &c.params)?;
        if let Some(PropValue::Int(s)) = overrides.remove("seed") {
            seed = u64::try_from(s).map_err(|_| Error::InvalidArgument("seed must be non-negative".into()))?;
        }
        seed = c.seed.unwrap_or(seed);
        steps = c.steps.unwrap_or(steps);
    }
    for (k, v) in gallery::parse_overrides(entry, &a.params)? {
        if k == "seed" {
            seed = v.as_int().and_then(|s| u64::try_from(s).ok()).ok_or_else(|| {
                Error::InvalidArgument("seed must be non-negative".into())
            })?;
        } else {
            overrides.insert(k, v);
        }
    }
    seed = a.seed.unwrap_or(seed);
    steps = a.steps.unwrap_or(steps);
    if steps == 0 {
        return Err(Error::InvalidArgument("--steps must be at least 1".into()).into());
    }
    let (manifest, model) = rundir::run_gallery(&name, &overrides, seed, steps)?;
    let dir = a.out.unwrap_or_else(|| {
        let base = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| "runs".into());
        base.join(format!("{name}-s{seed}"))
    });
    rundir::write_run(&dir, &manifest, &model)?;
    println!("{}", serde_json::to_string_pretty(&manifest).map_err(Error::from)?);
    eprintln!("wrote {}", dir.display());
    Ok(dir)
}

fn animate(a: AnimateArgs) -> Result<(), CliError> {
    if a.fps == 0 || a.scale.is_nan() || a.scale <= 0.0 || a.canvas == 0 {
        return Err(Error::InvalidArgument("--fps, --scale and --canvas must be positive".into()).into());
    }
    let projection = match a.projection {
        ProjectionArg::Xy => Projection::Xy,
        ProjectionArg::Xz => Projection::Xz,
        ProjectionArg::Yz => Projection::Yz,
    };
    let opts = AnimOpts {
        fps: a.fps,
        view: ViewOpts {
            agent_scale: a.scale,
            projection,
            canvas: a.canvas,
            ..ViewOpts::default()
        },
    };
    let format = match a.format {
        AnimFormatArg::Gif => AnimFormat::Gif,
        AnimFormatArg::Frames => AnimFormat::Frames,
    };
    let (path, n) = rundir::animate_run(&a.run_dir, format, &opts)?;
    println!("{} ({n} frames)", path.display());
    Ok(())
}

fn export(a: ExportArgs) -> Result<(), CliError> {
    let query = if let Some(i) = a.agent {
        Query::Agent(i)
    } else if let Some(i) = a.node {
        Query::Node(i)
    } else if let Some(k) = a.avg {
        Query::Avg(k)
    } else if let Some(k) = a.nodes_avg {
        Query::NodesAvg(k)
    } else if let Some(names) = a.counts {
        Query::parse(&format!("counts:{names}"))?
    } else {
        unreachable!("clap requires one query")
    };
    let format = match a.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    // fail on a missing run before touching exports/
    Manifest::load(&a.run_dir)?;
    let path = rundir::export_query(&a.run_dir, &query, format)?;
    println!("{}", path.display());
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let state = AppState::new(ServiceConfig {
        step_delay: Duration::from_millis(a.step_delay_ms),
        models: a.models,
        static_dir: a.static_dir.clone(),
    })?;
    if let Some(dir) = &a.static_dir {
        if !dir.join("index.html").is_file() {
            return Err(CliError {
                code: 2,
                message: format!("{} has no index.html", dir.display()),
            });
        }
    }
    let addr: SocketAddr = format!("{}:{}", a.host, a.port).parse().map_err(|e| CliError {
        code: 2,
        message: format!("bad address {}:{}: {e}", a.host, a.port),
    })?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| runtime(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| {
            if e.kind() == std::io::ErrorKind::AddrInUse {
                runtime(format!("port {} is already in use on {}", a.port, a.host))
            } else {
                runtime(format!("cannot listen on {addr}: {e}"))
            }
        })?;
        let local = listener.local_addr().map_err(|e| runtime(e.to_string()))?;
        println!("serving on http://{local}/");
        let app = router(state.clone());
        let result = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await;
        state.shutdown();
        result.map_err(|e| runtime(e.to_string()))
    })
}
