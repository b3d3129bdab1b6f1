//! One-shot regeneration of the reference figures and the claims they back.
//!
//! Everything written is a pure function of geometry, tolerances and project
//! defaults, so two runs produce byte-identical files.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use cusp_atlas::cs::import_mesh_json;
use cusp_atlas::cusp::CuspPoint;
use cusp_atlas::dk::solve_dk;
use cusp_atlas::export::{format_f64, SCHEMA};
use cusp_atlas::planner::{PlanRequest, PlannedPath};
use cusp_atlas::JointVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ops::{self, render, ClassifyParams, Context, CurvesDoc, CurvesParams, DkParams, Format, MeshParams, PlanParams, TraceParams, Wait};
use crate::plot::{self, Figure, Marker, Series};
use crate::{Failure, OpResult};

/// Joint vector the assembly modes and plans are computed at.
pub const REFERENCE_Q: [f64; 3] = [17.0, 19.0, 17.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    pub claim: String,
    pub observed: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub rho1: f64,
    pub claims: Vec<Claim>,
    pub files: Vec<FileEntry>,
}

impl Summary {
    pub fn all_pass(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }
}

struct Out {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Out {
    fn write(&mut self, name: &str, bytes: &[u8]) -> OpResult<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(FileEntry { name: name.into(), bytes: bytes.len(), sha256: hex::encode(Sha256::digest(bytes)) });
        Ok(())
    }
}

fn claim(id: &str, text: &str, pass: bool, observed: String) -> Claim {
    Claim { id: id.into(), claim: text.into(), observed, pass }
}

fn cusp_markers(cusps: &[CuspPoint]) -> Vec<Marker> {
    cusps.iter().map(|c| Marker { at: [c.rho2, c.rho3], color: "crimson", label: format!("({:.2}, {:.2})", c.rho2, c.rho3) }).collect()
}

/// Joint-plane bounds covering the singular curves with a small pad.
fn joint_bounds(doc: &CurvesDoc) -> [[f64; 2]; 2] {
    let pts = doc.joint.polylines.iter().flat_map(|p| p.points.iter());
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    if !lo[0].is_finite() {
        return [[0.0, 40.0], [0.0, 40.0]];
    }
    let pad = 0.05 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
    [[lo[0] - pad, hi[0] + pad], [lo[1] - pad, hi[1] + pad]]
}

fn joint_figure(title: &str, doc: &CurvesDoc) -> Figure {
    let mut f = Figure::new(title, "rho2", "rho3", joint_bounds(doc));
    for p in &doc.joint.polylines {
        f.series.push(Series { points: p.points.clone(), closed: p.closed, color: "steelblue", width: 1.0 });
    }
    f
}

/// Writes the workspace contour and its joint-plane image as CSV and SVG.
pub fn write_curve_plots(curves: &[u8], dir: &Path, markers: &[Marker]) -> OpResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
    let mut out = Out { dir: dir.into(), files: vec![] };
    curve_plots(&mut out, curves, markers)
}

fn curve_plots(out: &mut Out, curves: &[u8], markers: &[Marker]) -> OpResult<()> {
    let doc: CurvesDoc = serde_json::from_slice(curves).expect("curve documents parse");
    out.write("workspace_contour.csv", &plot::contour_csv(&doc.workspace))?;
    let mut f = Figure::new(&format!("Singular contour, rho1 = {}", doc.rho1), "alpha", "theta1", [[-PI, PI], [-PI, PI]]);
    for p in &doc.workspace.polylines {
        f.series.push(Series { points: p.vertices.clone(), closed: p.closed, color: "black", width: 1.0 });
    }
    out.write("workspace_contour.svg", f.svg().as_bytes())?;
    out.write("joint_curves.csv", &plot::joint_curves_csv(&doc.joint))?;
    let mut f = joint_figure(&format!("Singular curves in the joint plane, rho1 = {}", doc.rho1), &doc);
    f.markers = markers.to_vec();
    out.write("joint_curves.svg", f.svg().as_bytes())
}

fn plan_csv(p: &PlannedPath) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["rho2", "rho3", "theta1", "layer"]).expect("in-memory CSV");
    for (v, l) in p.cs_polyline.iter().zip(&p.layers) {
        w.write_record([format_f64(v[0]), format_f64(v[1]), format_f64(v[2]), l.to_string()]).expect("in-memory CSV");
    }
    w.into_inner().expect("in-memory CSV")
}

#[derive(Deserialize)]
struct PlanDocIn {
    #[serde(flatten)]
    path: PlannedPath,
}

/// Regenerates every artifact into `dir` and returns `summary.json`.
pub fn run(ctx: &Context, dir: &Path) -> OpResult<Vec<u8>> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
    let mut out = Out { dir: dir.into(), files: vec![] };
    let rho1 = REFERENCE_Q[0];
    let mut claims = vec![];

    out.write("geometry.json", &ops::geometry_doc(ctx))?;

    // assembly modes
    let dk = ops::dk_doc(ctx, &DkParams { q: REFERENCE_Q })?;
    out.write("dk_reference.json", &dk)?;
    let set = solve_dk(&ctx.geometry, &JointVector::new(REFERENCE_Q[0], REFERENCE_Q[1], REFERENCE_Q[2])?)?;
    let split = [set.count_in(cusp_atlas::AspectLabel::Aspect1), set.count_in(cusp_atlas::AspectLabel::Aspect2)];
    claims.push(claim(
        "six_modes",
        "six assembly modes at (17, 19, 17), three per aspect",
        set.len() == 6 && split == [3, 3] && set.residual < 1e-9,
        format!("{} modes, split {:?}, residual {:.1e}", set.len(), split, set.residual),
    ));

    // singular curves and cusps
    let cusps = ops::cusps(ctx, rho1)?;
    out.write("cusps.json", &ops::cusps_doc(ctx, &ops::CuspsParams { rho1 })?)?;
    let worst = cusps.iter().flat_map(|c| c.residuals).fold(0.0f64, f64::max);
    claims.push(claim(
        "six_cusps",
        "six cusp points on the rho1 = 17 slice",
        cusps.len() == 6 && worst < 1e-8,
        format!("{} cusps, largest residual {worst:.1e}", cusps.len()),
    ));
    let curves = ops::curves_doc(ctx, &CurvesParams { rho1, n: None })?;
    out.write("singular_curves.json", &curves)?;
    let markers = cusp_markers(&cusps);
    curve_plots(&mut out, &curves, &markers)?;
    let curves_doc: CurvesDoc = serde_json::from_slice(&curves).expect("curve documents parse");
    claims.push(claim(
        "two_aspects",
        "the singular contour splits the slice into two aspects",
        curves_doc.workspace.components == 2,
        format!("{} components", curves_doc.workspace.components),
    ));

    // the loop around a cusp
    let (traj, centre) = ops::fixture_loop(ctx, rho1)?;
    out.write("loop.json", &render(&traj))?;
    let classified = ops::classify_doc(ctx, &ClassifyParams { trajectory: traj.clone() })?;
    out.write("loop_classification.json", &classified)?;
    let v: serde_json::Value = serde_json::from_slice(&classified).expect("classification parses");
    let count = |k: &str| v["counts"][k].as_u64().unwrap_or(0);
    let taxonomy = [count("SINGULAR_STOP"), count("LOOP_SAME_MODE"), count("MODE_CHANGE")];
    claims.push(claim(
        "loop_taxonomy",
        "around one cusp: 8 runs stop at a singularity, 2 return to their mode, 2 change mode",
        taxonomy == [8, 2, 2],
        format!("stop/same/change = {taxonomy:?} around ({:.2}, {:.2})", centre.rho2, centre.rho3),
    ));
    for mode in 0..set.len() {
        let t = ops::trace_doc(ctx, &TraceParams { trajectory: traj.clone(), start_mode: Some(mode), start_pose: None, every: Some(4) })?;
        let r: cusp_atlas::motion::TraceResult = serde_json::from_slice(&t).expect("trace documents parse");
        out.write(&format!("loop_trace_mode{mode}.csv"), &plot::trace_csv(&r))?;
    }
    let mut f = joint_figure("Loop around a cusp", &curves_doc);
    f.series.push(Series { points: traj.waypoints.clone(), closed: traj.closed, color: "darkorange", width: 2.0 });
    f.markers = markers.clone();
    out.write("loop.svg", f.svg().as_bytes())?;

    // configuration-space meshes
    let mut meshes = vec![];
    for aspect in [1u8, 2] {
        for format in [Format::Json, Format::Obj] {
            let p = MeshParams { rho1, aspect, n: None, window: None, format };
            let bytes = ops::mesh_doc(ctx, &p, Wait::Block)?.ready();
            let ext = if format == Format::Json { "json" } else { "obj" };
            out.write(&format!("cs_aspect{aspect}.{ext}"), &bytes)?;
            if format == Format::Json {
                meshes.push(import_mesh_json(&bytes)?);
            }
        }
    }
    let sheet_jump = ctx.config.tolerances.cs().sheet_jump;
    // modes at the reference joint by aspect and layer
    let layer_of = |mode: usize| -> (u8, u8) {
        let s = &set.solutions[mode];
        let a = s.aspect.number();
        let l = if a == 0 { 0 } else { meshes[a as usize - 1].layer_at(REFERENCE_Q[1], REFERENCE_Q[2], s.pose.theta1, sheet_jump) };
        (a, l)
    };
    let find = |aspect: u8, layer: u8| (0..set.len()).find(|&m| layer_of(m) == (aspect, layer));
    let labelled: Vec<(u8, u8)> = (0..set.len()).map(layer_of).collect();
    claims.push(claim(
        "three_layers",
        "each aspect's three modes at (17, 19, 17) lie on three different layers",
        [1u8, 2].iter().all(|&a| (1..=3).all(|l| find(a, l).is_some())),
        format!("(aspect, layer) per mode: {labelled:?}"),
    ));

    // non-singular assembly-mode changes
    let plans = [("plan_aspect1_L1_L2", 1u8, 1u8, 2u8, 1usize), ("plan_aspect1_L1_L3", 1, 1, 3, 2), ("plan_aspect2_L1_L3", 2, 1, 3, 2)];
    for (name, aspect, la, lb, expected) in plans {
        let (Some(from), Some(to)) = (find(aspect, la), find(aspect, lb)) else {
            claims.push(claim(name, "plan between two layers", false, "layer not found at the reference joint".into()));
            continue;
        };
        let req = PlanRequest::new(JointVector::new(REFERENCE_Q[0], REFERENCE_Q[1], REFERENCE_Q[2])?, from, to);
        let outcome = ops::plan_doc(ctx, &PlanParams { request: req, n: None, window: None }, Wait::Block);
        let observed = match outcome {
            Ok(fetched) => {
                let bytes = fetched.ready();
                out.write(&format!("{name}.json"), &bytes)?;
                let p = serde_json::from_slice::<PlanDocIn>(&bytes).expect("plan documents parse").path;
                out.write(&format!("{name}.csv"), &plan_csv(&p))?;
                let mut f = joint_figure(&format!("Aspect {aspect}: layer {la} to layer {lb}, modes {from} to {to}"), &curves_doc);
                f.series.push(Series { points: p.joint_projection.waypoints.clone(), closed: true, color: "darkgreen", width: 2.0 });
                f.markers = markers.clone();
                out.write(&format!("{name}.svg"), f.svg().as_bytes())?;
                let at: Vec<String> = p.enclosed.iter().map(|e| format!("({:.2}, {:.2})", e.cusp.rho2, e.cusp.rho3)).collect();
                Ok((p.validated && p.enclosed.len() == expected, format!("modes {from}->{to}, validated {}, encloses {}", p.validated, at.join(" "))))
            }
            Err(Failure::Domain(e)) => Ok((false, format!("modes {from}->{to}: {e}"))),
            Err(e) => Err(e),
        }?;
        let text = format!("aspect {aspect}: the layer {la} to layer {lb} change winds around {expected} cusp(s)");
        claims.push(claim(name, &text, observed.0, observed.1));
    }

    let summary = Summary { schema: SCHEMA.into(), rho1, claims, files: out.files.clone() };
    let bytes = render(&summary);
    out.write("summary.json", &bytes)?;
    Ok(bytes)
}
