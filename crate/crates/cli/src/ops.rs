//! Artifact renderers shared by the CLI and the service.
//!
//! Every artifact is a JSON document tagged with the schema version (or OBJ
//! text for meshes), serialized with fixed 17-digit floats and terminated by
//! a newline. Expensive artifacts go through the cache keyed on geometry,
//! tolerances and the fully defaulted parameters.

use std::sync::Arc;

use cusp_atlas::atlas::{joint_slice_curves, workspace_singular_contour, JointSliceCurve, Window, WorkspaceContour};
use cusp_atlas::cs::{build_cs_observed, export_mesh, import_mesh_json, MeshFormat};
use cusp_atlas::cusp::{find_cusps_with, CuspDiagnostic, CuspOptions, CuspPoint};
use cusp_atlas::dk::{solve_dk, solve_dk_with, Solution};
use cusp_atlas::export::{to_json_bytes, SCHEMA};
use cusp_atlas::geometry::{inverse_kinematics, signed_singularity};
use cusp_atlas::motion::{classify_loop, cusp_loop, enclosed_cusps, trace_with, JointTrajectory, LoopRun, Outcome, TraceOptions, TraceResult};
use cusp_atlas::planner::{plan_with_cusps, EnclosedCusp, PlanRequest, PlannedPath};
use cusp_atlas::{AspectLabel, Error, Geometry, JointVector, Pose};
use serde::{Deserialize, Serialize};

use crate::cache::{Builder, Cache, Poll};
use crate::config::{GeometryConfig, ProjectConfig, Tolerances};
use crate::{Failure, OpResult};

/// Joint point the loop fixture starts from.
pub const FIXTURE_START: [f64; 2] = [19.0, 17.0];
/// Singular-curve crossings the loop fixture is built to have.
pub const FIXTURE_CROSSINGS: usize = 4;

/// Immutable snapshot every operation runs against.
#[derive(Debug)]
pub struct Context {
    pub geometry: Geometry,
    pub config: ProjectConfig,
    pub cache: Arc<Cache>,
}

impl Context {
    pub fn new(config: ProjectConfig, cache: Arc<Cache>) -> OpResult<Self> {
        config.validate()?;
        Ok(Context { geometry: config.geometry()?, config, cache })
    }

    /// Reference design, project defaults, cache from the environment.
    pub fn reference() -> Self {
        Context::new(ProjectConfig::default(), Arc::new(Cache::from_env())).expect("defaults are valid")
    }

    fn key<P: Serialize>(&self, kind: &str, params: &P) -> String {
        #[derive(Serialize)]
        struct Material<'a, P> {
            schema: &'static str,
            geometry: GeometryConfig,
            tolerances: &'a Tolerances,
            params: &'a P,
        }
        Cache::key(kind, &Material { schema: SCHEMA, geometry: GeometryConfig::of(&self.geometry), tolerances: &self.config.tolerances, params })
    }

    fn cached<P: Serialize>(&self, kind: &str, params: &P, build: Builder) -> OpResult<Arc<Vec<u8>>> {
        self.cache.get(kind, &self.key(kind, params), build)
    }
}

/// Whether a caller waits for slow builds or gets their progress back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wait {
    Block,
    Poll,
}

/// An artifact, or the progress of the build it waits for.
#[derive(Debug, Clone)]
pub enum Fetched {
    Ready(Arc<Vec<u8>>),
    Building(f64),
}

impl Fetched {
    pub fn ready(self) -> Arc<Vec<u8>> {
        match self {
            Fetched::Ready(b) => b,
            Fetched::Building(_) => unreachable!("blocking fetches always finish"),
        }
    }
}

pub fn render<T: Serialize>(doc: &T) -> Vec<u8> {
    let mut out = to_json_bytes(doc).expect("artifacts serialize");
    out.push(b'\n');
    out
}

fn domain(msg: impl Into<String>) -> Failure {
    Failure::Domain(Error::InvalidRequest(msg.into()))
}

// ---- geometry, dk, ik ----

#[derive(Serialize)]
struct GeometryDoc {
    schema: &'static str,
    #[serde(flatten)]
    geometry: GeometryConfig,
    singularity_scale: f64,
}

pub fn geometry_doc(ctx: &Context) -> Vec<u8> {
    render(&GeometryDoc { schema: SCHEMA, geometry: GeometryConfig::of(&ctx.geometry), singularity_scale: ctx.geometry.singularity_scale() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DkParams {
    pub q: [f64; 3],
}

#[derive(Serialize)]
struct DkDoc<'a> {
    schema: &'static str,
    joint: JointVector,
    count: usize,
    aspect_counts: [usize; 2],
    near_discriminant: bool,
    residual: f64,
    solutions: &'a [Solution],
}

pub fn dk_doc(ctx: &Context, p: &DkParams) -> OpResult<Vec<u8>> {
    let q = JointVector::new(p.q[0], p.q[1], p.q[2])?;
    let set = solve_dk_with(&ctx.geometry, &q, &ctx.config.tolerances.dk())?;
    Ok(render(&DkDoc {
        schema: SCHEMA,
        joint: q,
        count: set.len(),
        aspect_counts: [set.count_in(AspectLabel::Aspect1), set.count_in(AspectLabel::Aspect2)],
        near_discriminant: set.near_discriminant,
        residual: set.residual,
        solutions: &set.solutions,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IkParams {
    /// `(rho1, theta1, alpha)`.
    pub pose: [f64; 3],
}

#[derive(Serialize)]
struct IkDoc {
    schema: &'static str,
    pose: Pose,
    joint: JointVector,
    singularity: f64,
    aspect: AspectLabel,
}

pub fn ik_doc(ctx: &Context, p: &IkParams) -> OpResult<Vec<u8>> {
    let pose = Pose::new(p.pose[0], p.pose[1], p.pose[2]);
    if !(pose.rho1 > 0.0) {
        return Err(Failure::Domain(Error::InvalidJoint));
    }
    let joint = inverse_kinematics(&ctx.geometry, &pose)?;
    let s = signed_singularity(&ctx.geometry, &pose)?;
    let aspect = AspectLabel::from_value(s, ctx.config.tolerances.dk().tol_sing);
    Ok(render(&IkDoc { schema: SCHEMA, pose, joint, singularity: s, aspect }))
}

// ---- singular curves ----

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvesParams {
    pub rho1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

#[derive(Serialize, Deserialize)]
pub struct CurvesDoc {
    pub schema: String,
    pub rho1: f64,
    pub workspace: WorkspaceContour,
    pub joint: JointSliceCurve,
}

pub fn curves_doc(ctx: &Context, p: &CurvesParams) -> OpResult<Arc<Vec<u8>>> {
    let n = p.n.unwrap_or(ctx.config.contour_grid);
    if n < 8 || !(p.rho1 > 0.0) {
        return Err(Failure::Usage("rho1 must be positive and the contour grid at least 8".into()));
    }
    let (g, rho1) = (ctx.geometry, p.rho1);
    ctx.cached(
        "contour",
        &CurvesParams { rho1, n: Some(n) },
        Box::new(move |_| {
            let workspace = workspace_singular_contour(&g, rho1, n);
            let joint = joint_slice_curves(&g, &workspace);
            Ok(render(&CurvesDoc { schema: SCHEMA.into(), rho1, workspace, joint }))
        }),
    )
}

// ---- cusps ----

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CuspsParams {
    pub rho1: f64,
}

#[derive(Serialize, Deserialize)]
pub struct CuspsDoc {
    pub schema: String,
    pub rho1: f64,
    pub count: usize,
    pub cusps: Vec<CuspPoint>,
    pub diagnostics: Vec<CuspDiagnostic>,
    pub traced_loops: usize,
}

pub fn cusps_doc(ctx: &Context, p: &CuspsParams) -> OpResult<Arc<Vec<u8>>> {
    if !(p.rho1 > 0.0) {
        return Err(Failure::Usage("rho1 must be positive".into()));
    }
    let (g, rho1) = (ctx.geometry, p.rho1);
    ctx.cached(
        "cusps",
        p,
        Box::new(move |_| {
            let r = find_cusps_with(&g, rho1, &CuspOptions::default())?;
            Ok(render(&CuspsDoc {
                schema: SCHEMA.into(),
                rho1,
                count: r.cusps.len(),
                cusps: r.cusps,
                diagnostics: r.diagnostics,
                traced_loops: r.traced_loops,
            }))
        }),
    )
}

pub fn cusps(ctx: &Context, rho1: f64) -> OpResult<Vec<CuspPoint>> {
    let bytes = cusps_doc(ctx, &CuspsParams { rho1 })?;
    let doc: CuspsDoc = serde_json::from_slice(&bytes).expect("cached cusp documents parse");
    Ok(doc.cusps)
}

// ---- configuration-space meshes ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Obj,
}

impl Format {
    fn mesh(self) -> MeshFormat {
        match self {
            Format::Json => MeshFormat::Json,
            Format::Obj => MeshFormat::Obj,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshParams {
    pub rho1: f64,
    /// 1 or 2.
    pub aspect: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
    #[serde(default)]
    pub format: Format,
}

impl MeshParams {
    fn resolved(&self, ctx: &Context) -> MeshParams {
        MeshParams { n: Some(self.n.unwrap_or(ctx.config.cs_grid)), window: Some(self.window.unwrap_or(ctx.config.cs_window)), ..*self }
    }
}

pub fn mesh_doc(ctx: &Context, p: &MeshParams, wait: Wait) -> OpResult<Fetched> {
    if !matches!(p.aspect, 1 | 2) {
        return Err(Failure::Usage("aspect must be 1 or 2".into()));
    }
    let p = p.resolved(ctx);
    let key = ctx.key("mesh", &p);
    let (g, opts, cache) = (ctx.geometry, ctx.config.tolerances.cs(), ctx.cache.clone());
    // one build yields both aspects in both formats; the siblings are seeded
    let siblings: Vec<(String, MeshParams)> = [1u8, 2]
        .iter()
        .flat_map(|&a| [Format::Json, Format::Obj].map(|f| MeshParams { aspect: a, format: f, ..p }))
        .filter(|s| *s != p)
        .map(|s| (ctx.key("mesh", &s), s))
        .collect();
    let build: Builder = Box::new(move |progress| {
        let (m1, m2) = build_cs_observed(&g, p.rho1, p.window.unwrap(), p.n.unwrap(), &opts, progress)?;
        for (k, s) in siblings {
            let m = if s.aspect == 1 { &m1 } else { &m2 };
            cache.insert("mesh", &k, export_mesh(m, s.format.mesh()));
        }
        Ok(export_mesh(if p.aspect == 1 { &m1 } else { &m2 }, p.format.mesh()))
    });
    match wait {
        Wait::Block => Ok(Fetched::Ready(ctx.cache.get("mesh", &key, build)?)),
        Wait::Poll => match ctx.cache.poll("mesh", &key, build) {
            Poll::Ready(b) => Ok(Fetched::Ready(b)),
            Poll::Building(f) => Ok(Fetched::Building(f)),
            Poll::Failed(e) => Err(e),
        },
    }
}

// ---- continuation ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceParams {
    pub trajectory: JointTrajectory,
    /// Index into the solution set at the first waypoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_mode: Option<usize>,
    /// Explicit start pose instead of a mode index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_pose: Option<Pose>,
    /// Keep every `every`-th sample (and the last).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub every: Option<usize>,
}

#[derive(Serialize)]
struct TraceDoc {
    schema: &'static str,
    #[serde(flatten)]
    result: TraceResult,
    max_oracle_gap: f64,
}

pub fn trace_doc(ctx: &Context, p: &TraceParams) -> OpResult<Arc<Vec<u8>>> {
    let start = match (p.start_mode, p.start_pose) {
        (Some(i), None) => {
            p.trajectory.validate()?;
            let q = p.trajectory.joint(p.trajectory.start())?;
            let set = solve_dk(&ctx.geometry, &q)?;
            set.solutions.get(i).map(|s| s.pose).ok_or_else(|| domain(format!("start_mode {i} out of range: {} modes at the first waypoint", set.len())))?
        }
        (None, Some(pose)) => pose,
        _ => return Err(Failure::Usage("give exactly one of start_mode and start_pose".into())),
    };
    let (g, traj, every) = (ctx.geometry, p.trajectory.clone(), p.every.unwrap_or(1));
    ctx.cached(
        "trace",
        p,
        Box::new(move |_| {
            let r = trace_with(&g, &traj, start, &TraceOptions::default())?;
            let gap = r.max_oracle_gap();
            Ok(render(&TraceDoc { schema: SCHEMA, result: r.downsampled(every), max_oracle_gap: gap }))
        }),
    )
}

/// The reference loop: a triangle from [`FIXTURE_START`] around the nearest
/// cusp that meets the singular curve [`FIXTURE_CROSSINGS`] times.
pub fn fixture_loop(ctx: &Context, rho1: f64) -> OpResult<(JointTrajectory, CuspPoint)> {
    let cs = cusps(ctx, rho1)?;
    Ok(cusp_loop(&ctx.geometry, rho1, FIXTURE_START, &cs, FIXTURE_CROSSINGS)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyParams {
    pub trajectory: JointTrajectory,
}

#[derive(Serialize)]
struct Counts {
    #[serde(rename = "SINGULAR_STOP")]
    singular_stop: usize,
    #[serde(rename = "LOOP_SAME_MODE")]
    loop_same_mode: usize,
    #[serde(rename = "MODE_CHANGE")]
    mode_change: usize,
}

#[derive(Serialize)]
struct ClassifyDoc {
    schema: &'static str,
    trajectory: JointTrajectory,
    counts: Counts,
    crossings: Vec<f64>,
    runs: Vec<LoopRun>,
    enclosed: Vec<EnclosedCusp>,
}

pub fn classify_doc(ctx: &Context, p: &ClassifyParams) -> OpResult<Arc<Vec<u8>>> {
    p.trajectory.validate()?;
    let cs = cusps(ctx, p.trajectory.rho1)?;
    let (g, traj) = (ctx.geometry, p.trajectory.clone());
    ctx.cached(
        "classify",
        p,
        Box::new(move |_| {
            let t = classify_loop(&g, &traj)?;
            let enclosed = enclosed_cusps(&traj, &cs)?.into_iter().map(|(cusp, winding)| EnclosedCusp { cusp, winding }).collect();
            let counts = Counts {
                singular_stop: t.count(Outcome::SingularStop),
                loop_same_mode: t.count(Outcome::LoopSameMode),
                mode_change: t.count(Outcome::ModeChange),
            };
            Ok(render(&ClassifyDoc { schema: SCHEMA, trajectory: traj, counts, crossings: t.crossings, runs: t.runs, enclosed }))
        }),
    )
}

// ---- planning ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanParams {
    #[serde(flatten)]
    pub request: PlanRequest,
    /// Mesh resolution and window; project defaults when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
}

#[derive(Serialize)]
struct PlanDoc {
    schema: &'static str,
    request: PlanRequest,
    #[serde(flatten)]
    path: PlannedPath,
}

pub fn plan_doc(ctx: &Context, p: &PlanParams, wait: Wait) -> OpResult<Fetched> {
    let req = p.request;
    let set = solve_dk(&ctx.geometry, &req.joint)?;
    let Some(from) = set.solutions.get(req.from_mode) else {
        return Err(domain(format!("mode index out of range: {} modes at this joint", set.len())));
    };
    let aspect = from.aspect.number();
    if aspect == 0 {
        return Err(domain("modes must share a non-singular aspect"));
    }
    let mp = MeshParams { rho1: req.joint.rho1(), aspect, n: p.n, window: p.window, format: Format::Json };
    let mesh = match mesh_doc(ctx, &mp, wait)? {
        Fetched::Ready(b) => b,
        building => return Ok(building),
    };
    let resolved = PlanParams { n: mp.resolved(ctx).n, window: mp.resolved(ctx).window, ..p.clone() };
    let cs = cusps(ctx, req.joint.rho1())?;
    let g = ctx.geometry;
    let bytes = ctx.cached(
        "plan",
        &resolved,
        Box::new(move |_| {
            let m = import_mesh_json(&mesh)?;
            let path = plan_with_cusps(&g, &m, &req, &cs)?;
            Ok(render(&PlanDoc { schema: SCHEMA, request: req, path }))
        }),
    )?;
    Ok(Fetched::Ready(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> Context {
        Context::new(ProjectConfig::default(), Arc::new(Cache::new(None))).unwrap()
    }

    #[test]
    fn dk_document_lists_six_modes() {
        let v: serde_json::Value = serde_json::from_slice(&dk_doc(&ctx(), &DkParams { q: [17.0, 19.0, 17.0] }).unwrap()).unwrap();
        assert_eq!(v["schema"], SCHEMA);
        assert_eq!(v["count"], 6);
        assert_eq!(v["solutions"].as_array().unwrap().len(), 6);
        assert_eq!(v["aspect_counts"], serde_json::json!([3, 3]));
    }

    #[test]
    fn ik_inverts_dk() {
        let c = ctx();
        let v: serde_json::Value = serde_json::from_slice(&dk_doc(&c, &DkParams { q: [17.0, 19.0, 17.0] }).unwrap()).unwrap();
        let p = &v["solutions"][0]["pose"];
        let pose = [p["rho1"].as_f64().unwrap(), p["theta1"].as_f64().unwrap(), p["alpha"].as_f64().unwrap()];
        let w: serde_json::Value = serde_json::from_slice(&ik_doc(&c, &IkParams { pose }).unwrap()).unwrap();
        let j: Vec<f64> = w["joint"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert!((j[1] - 19.0).abs() < 1e-9 && (j[2] - 17.0).abs() < 1e-9, "{j:?}");
    }

    #[test]
    fn documents_are_newline_terminated_and_stable() {
        let c = ctx();
        let a = dk_doc(&c, &DkParams { q: [17.0, 19.0, 17.0] }).unwrap();
        assert_eq!(a.last(), Some(&b'\n'));
        assert_eq!(a, dk_doc(&c, &DkParams { q: [17.0, 19.0, 17.0] }).unwrap());
    }

    #[test]
    fn trace_needs_exactly_one_start() {
        let t = JointTrajectory::new(17.0, vec![[19.0, 17.0], [19.5, 17.5]], false).unwrap();
        let p = TraceParams { trajectory: t, start_mode: None, start_pose: None, every: None };
        assert!(matches!(trace_doc(&ctx(), &p), Err(Failure::Usage(_))));
    }

    #[test]
    fn mesh_aspect_is_checked() {
        let p = MeshParams { rho1: 17.0, aspect: 3, n: None, window: None, format: Format::Json };
        assert!(matches!(mesh_doc(&ctx(), &p, Wait::Block), Err(Failure::Usage(_))));
    }
}
