//! Argument parsing and dispatch.
//!
//! Exit codes: 0 success, 2 domain error (JSON diagnostic on stdout), 1 usage
//! or I/O error (message on stderr).

use std::io::Write;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use cusp_atlas::atlas::Window;
use cusp_atlas::motion::JointTrajectory;
use cusp_atlas::planner::{PlanRequest, DEFAULT_MARGIN, DEFAULT_WEIGHTS};
use cusp_atlas::{JointVector, Pose};

use crate::cache::Cache;
use crate::config::ProjectConfig;
use crate::ops::{self, ClassifyParams, Context, CurvesParams, CuspsParams, DkParams, Format, IkParams, MeshParams, PlanParams, TraceParams, Wait};
use crate::{plot, repro, service, Failure, OpResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cusp-atlas", version, about = "Singularities, cusps and assembly-mode changes of planar 3-RPR manipulators")]
pub struct Cli {
    /// Project file (JSON) with geometry path, defaults and tolerance overrides.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Geometry file (JSON); overrides the project's.
    #[arg(long, global = true)]
    pub geometry: Option<PathBuf>,
    /// Write the artifact to this file instead of stdout.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assembly modes at a joint vector.
    Dk {
        /// rho1,rho2,rho3
        #[arg(long, value_parser = triple, allow_hyphen_values = true)]
        q: [f64; 3],
    },
    /// Leg lengths of a pose.
    Ik {
        /// rho1,theta1,alpha
        #[arg(long, value_parser = triple, allow_hyphen_values = true)]
        pose: [f64; 3],
    },
    /// Singular curves of a slice: workspace contour and its joint-plane image.
    SingularCurves {
        #[arg(long)]
        rho1: Option<f64>,
        /// Contour grid resolution.
        #[arg(long)]
        n: Option<usize>,
        /// Also write CSV tables and SVG plots into this directory.
        #[arg(long)]
        plots: Option<PathBuf>,
    },
    /// Cusp points of a slice.
    Cusps {
        #[arg(long)]
        rho1: Option<f64>,
    },
    /// Configuration-space mesh of one aspect.
    CsMesh {
        #[arg(long)]
        rho1: Option<f64>,
        #[arg(long, default_value_t = 1)]
        aspect: u8,
        #[arg(long)]
        n: Option<usize>,
        /// lo,hi for both rho2 and rho3.
        #[arg(long, value_parser = pair)]
        window: Option<[f64; 2]>,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
    /// Continuation of one assembly mode along a joint trajectory.
    Trace {
        /// Trajectory file: {"rho1": .., "closed": .., "waypoints": [[rho2, rho3], ..]}.
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long, conflicts_with = "start_pose")]
        start_mode: Option<usize>,
        /// rho1,theta1,alpha
        #[arg(long, value_parser = triple, allow_hyphen_values = true)]
        start_pose: Option<[f64; 3]>,
        /// Keep every n-th sample.
        #[arg(long)]
        every: Option<usize>,
        /// Also write the samples as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Outcome of every mode in both directions around a closed trajectory.
    ClassifyLoop {
        #[arg(long, required_unless_present = "fixture")]
        trajectory: Option<PathBuf>,
        /// Use the reference loop around the cusp nearest to (19, 17).
        #[arg(long)]
        fixture: bool,
        #[arg(long)]
        rho1: Option<f64>,
    },
    /// Non-singular path between two assembly modes at one joint vector.
    Plan {
        #[arg(long, value_parser = triple, allow_hyphen_values = true)]
        q: [f64; 3],
        #[arg(long)]
        from: usize,
        #[arg(long)]
        to: usize,
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        margin: f64,
        /// w_rho2,w_rho3,w_theta1
        #[arg(long, value_parser = triple)]
        weights: Option<[f64; 3]>,
        #[arg(long)]
        smooth: bool,
        /// Mesh resolution.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Local HTTP JSON service.
    Serve {
        #[arg(long, default_value_t = service::DEFAULT_PORT)]
        port: u16,
        /// Address to bind; loopback unless given.
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        bind: IpAddr,
    },
    /// Regenerate every figure analogue and check the reproduced claims.
    Repro {
        /// Output directory; the project's output_dir when absent.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FormatArg {
    Json,
    Obj,
}

fn numbers<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"))).collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn triple(s: &str) -> Result<[f64; 3], String> {
    numbers::<3>(s)
}

fn pair(s: &str) -> Result<[f64; 2], String> {
    numbers::<2>(s)
}

fn read_trajectory(path: &PathBuf) -> OpResult<JointTrajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> OpResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn context(cli: &Cli) -> OpResult<Context> {
    let mut config = match &cli.config {
        Some(p) => ProjectConfig::load(p)?,
        None => ProjectConfig::default(),
    };
    if let Some(g) = &cli.geometry {
        config.geometry = Some(g.clone());
    }
    Context::new(config, Arc::new(Cache::from_env()))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(&cli) {
        Ok(bytes) => {
            let written = match &cli.out {
                Some(p) => write_file(p, &bytes),
                None => stdout.write_all(&bytes).map_err(|e| Failure::Usage(e.to_string())),
            };
            match written {
                Ok(()) => EXIT_OK,
                Err(f) => {
                    let _ = writeln!(stderr, "error: {f}");
                    EXIT_USAGE
                }
            }
        }
        Err(f @ Failure::Domain(_)) => {
            let _ = stdout.write_all(&f.diagnostic());
            let _ = writeln!(stderr, "error: {f}");
            EXIT_DOMAIN
        }
        Err(f @ Failure::Usage(_)) => {
            let _ = writeln!(stderr, "error: {f}");
            EXIT_USAGE
        }
    }
}

/// Runs the parsed command and returns the primary artifact.
pub fn execute(cli: &Cli) -> OpResult<Vec<u8>> {
    let ctx = context(cli)?;
    let rho1 = |r: &Option<f64>| r.unwrap_or(ctx.config.rho1);
    Ok(match &cli.command {
        Command::Dk { q } => ops::dk_doc(&ctx, &DkParams { q: *q })?,
        Command::Ik { pose } => ops::ik_doc(&ctx, &IkParams { pose: *pose })?,
        Command::SingularCurves { rho1: r, n, plots } => {
            let bytes = ops::curves_doc(&ctx, &CurvesParams { rho1: rho1(r), n: *n })?;
            if let Some(dir) = plots {
                repro::write_curve_plots(&bytes, dir, &[])?;
            }
            bytes.to_vec()
        }
        Command::Cusps { rho1: r } => ops::cusps_doc(&ctx, &CuspsParams { rho1: rho1(r) })?.to_vec(),
        Command::CsMesh { rho1: r, aspect, n, window, format } => {
            let format = if *format == FormatArg::Obj { Format::Obj } else { Format::Json };
            let window = window.map(|[lo, hi]| Window::square(lo, hi));
            ops::mesh_doc(&ctx, &MeshParams { rho1: rho1(r), aspect: *aspect, n: *n, window, format }, Wait::Block)?.ready().to_vec()
        }
        Command::Trace { trajectory, start_mode, start_pose, every, csv } => {
            let trajectory = read_trajectory(trajectory)?;
            let start_pose = start_pose.map(|p| Pose::new(p[0], p[1], p[2]));
            let start_mode = if start_mode.is_none() && start_pose.is_none() { Some(0) } else { *start_mode };
            let bytes = ops::trace_doc(&ctx, &TraceParams { trajectory, start_mode, start_pose, every: *every })?;
            if let Some(path) = csv {
                let r: cusp_atlas::motion::TraceResult = serde_json::from_slice(&bytes).expect("trace documents parse");
                write_file(path, &plot::trace_csv(&r))?;
            }
            bytes.to_vec()
        }
        Command::ClassifyLoop { trajectory, fixture, rho1: r } => {
            let trajectory = match (trajectory, fixture) {
                (Some(p), false) => read_trajectory(p)?,
                (None, true) => ops::fixture_loop(&ctx, rho1(r))?.0,
                _ => return Err(Failure::Usage("give either --trajectory or --fixture".into())),
            };
            ops::classify_doc(&ctx, &ClassifyParams { trajectory })?.to_vec()
        }
        Command::Plan { q, from, to, margin, weights, smooth, n } => {
            let joint = JointVector::new(q[0], q[1], q[2]).map_err(Failure::Domain)?;
            let request = PlanRequest { joint, from_mode: *from, to_mode: *to, margin: *margin, weights: weights.unwrap_or(DEFAULT_WEIGHTS), smooth: *smooth };
            ops::plan_doc(&ctx, &PlanParams { request, n: *n, window: None }, Wait::Block)?.ready().to_vec()
        }
        Command::Serve { port, bind } => {
            let addr = SocketAddr::new(*bind, *port);
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Usage(e.to_string()))?;
            rt.block_on(service::serve(Arc::new(ctx), addr)).map_err(|e| Failure::Usage(format!("cannot serve on {addr}: {e}")))?;
            vec![]
        }
        Command::Repro { dir } => {
            let dir = dir.clone().unwrap_or_else(|| ctx.config.output_dir.clone());
            repro::run(&ctx, &dir)?
        }
    })
}
