//! Non-singular assembly-mode changes planned on a configuration-space mesh.
//!
//! The search runs A* over the mesh edge graph with vertices closer than
//! `margin` to the singular set removed; the two modes are spliced in as
//! extra vertices. A graph path is only reported once continuation along its
//! joint-plane shadow confirms that it really carries one mode to the other.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use crate::cs::{CsMesh, SHEET_JUMP};
use crate::cusp::{find_cusps, CuspPoint};
use crate::dk::{pose_distance, solve_dk, Solution};
use crate::geometry::signed_singularity;
use crate::motion::{enclosed_cusps, trace, JointTrajectory, Outcome};
use crate::scalar::angle_diff;
use crate::{AspectLabel, Error, Geometry, JointVector, Pose, Result};

pub const DEFAULT_MARGIN: f64 = 0.02;
pub const DEFAULT_WEIGHTS: [f64; 3] = [1.0, 1.0, 5.0];
/// Mesh vertices a mode is linked to when spliced into the graph.
pub const MAX_MODE_LINKS: usize = 6;
/// Searches rerun after dropping an edge that failed continuation.
pub const MAX_REPAIRS: usize = 64;

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

fn default_weights() -> [f64; 3] {
    DEFAULT_WEIGHTS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub joint: JointVector,
    /// Indices into the solution set at `joint`.
    pub from_mode: usize,
    pub to_mode: usize,
    /// Smallest `|S|` allowed at path vertices.
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Scaling of `(rho2, rho3, theta1)` in the path length.
    #[serde(default = "default_weights")]
    pub weights: [f64; 3],
    /// Shortcut the mesh path, keeping only shortcuts that continuation confirms.
    #[serde(default)]
    pub smooth: bool,
}

impl PlanRequest {
    pub fn new(joint: JointVector, from_mode: usize, to_mode: usize) -> Self {
        PlanRequest { joint, from_mode, to_mode, margin: DEFAULT_MARGIN, weights: DEFAULT_WEIGHTS, smooth: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnclosedCusp {
    pub cusp: CuspPoint,
    pub winding: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPath {
    pub aspect: AspectLabel,
    pub from_pose: Pose,
    pub to_pose: Pose,
    /// `(rho2, rho3, theta1)` from the first mode to the second.
    pub cs_polyline: Vec<[f64; 3]>,
    /// Layer label per polyline vertex (0 outside three-solution regions).
    pub layers: Vec<u8>,
    /// Shadow of the path in the joint plane; closed since both ends project to the same joint.
    pub joint_projection: JointTrajectory,
    pub enclosed: Vec<EnclosedCusp>,
    pub validated: bool,
    /// Weighted length of `cs_polyline`.
    pub length: f64,
    /// Smallest `|S|` over the polyline vertices.
    pub vertex_margin: f64,
}

impl PlannedPath {
    pub fn is_trivial(&self) -> bool {
        self.cs_polyline.len() < 2
    }
}

#[derive(Clone, Copy)]
struct Node {
    f: f64,
    g: f64,
    id: usize,
}

impl PartialEq for Node {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Node {
    // min-heap on f, ties broken by id for determinism
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then_with(|| o.id.cmp(&self.id))
    }
}

fn weighted(w: &[f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [w[0] * (a[0] - b[0]), w[1] * (a[1] - b[1]), w[2] * angle_diff(a[2], b[2])];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn position(rho2: f64, rho3: f64, p: &Pose) -> [f64; 3] {
    [rho2, rho3, p.theta1]
}

/// Mesh vertices the mode at `pos` is linked to: per node around its cell,
/// the nearest-`theta1` vertex on the same sheet, closest first.
fn mode_links(m: &CsMesh, pos: [f64; 3], allowed: &[bool], w: &[f64; 3]) -> Vec<(usize, f64)> {
    let Some([i, j]) = m.locate(pos[0], pos[1]) else { return vec![] };
    let mut links = vec![];
    for b in j.saturating_sub(1)..=(j + 2).min(m.n - 1) {
        for a in i.saturating_sub(1)..=(i + 2).min(m.n - 1) {
            let best = m
                .node_vertices(a, b)
                .iter()
                .map(|&v| (v, angle_diff(m.vertices[v].theta1, pos[2]).abs()))
                .min_by(|x, y| x.1.total_cmp(&y.1));
            if let Some((v, d)) = best {
                if d < SHEET_JUMP && allowed[v] {
                    links.push((v, weighted(w, pos, m.vertices[v].position())));
                }
            }
        }
    }
    links.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
    links.truncate(MAX_MODE_LINKS);
    links
}

/// Plans with the cusps of the mesh's slice computed on the fly.
pub fn plan(g: &Geometry, m: &CsMesh, req: &PlanRequest) -> Result<PlannedPath> {
    let cusps = find_cusps(g, m.rho1)?;
    plan_with_cusps(g, m, req, &cusps)
}

pub fn plan_with_cusps(g: &Geometry, m: &CsMesh, req: &PlanRequest, cusps: &[CuspPoint]) -> Result<PlannedPath> {
    if !(req.margin >= 0.0) || req.weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidRequest("margin must be non-negative and weights positive".into()));
    }
    if (req.joint.rho1() - m.rho1).abs() > 1e-12 {
        return Err(Error::InvalidRequest("joint rho1 differs from the mesh slice".into()));
    }
    let set = solve_dk(g, &req.joint)?;
    let n_modes = set.len();
    let (Some(from), Some(to)) = (set.solutions.get(req.from_mode), set.solutions.get(req.to_mode)) else {
        return Err(Error::InvalidRequest(format!("mode index out of range: {n_modes} modes at this joint")));
    };
    if from.aspect != to.aspect || from.aspect == AspectLabel::Singular {
        return Err(Error::InvalidRequest("modes must share a non-singular aspect".into()));
    }
    if from.aspect != m.aspect {
        return Err(Error::InvalidRequest("mesh aspect differs from the modes' aspect".into()));
    }
    let (r2, r3) = (req.joint.rho2(), req.joint.rho3());
    if m.locate(r2, r3).is_none() {
        return Err(Error::InvalidRequest("joint lies outside the mesh window".into()));
    }
    let no_path = Error::NoPath { from: req.from_mode, to: req.to_mode, margin: req.margin };
    if from.singularity.abs() < req.margin || to.singularity.abs() < req.margin {
        return Err(no_path);
    }
    let (p_from, p_to) = (position(r2, r3, &from.pose), position(r2, r3, &to.pose));
    let layer = |p: [f64; 3]| m.layer_at(p[0], p[1], p[2], SHEET_JUMP);
    let projection = |pts: &[[f64; 3]]| {
        let mut w: Vec<[f64; 2]> = vec![];
        for p in &pts[..pts.len() - 1] {
            if w.last() != Some(&[p[0], p[1]]) {
                w.push([p[0], p[1]]);
            }
        }
        JointTrajectory { rho1: m.rho1, waypoints: w, closed: true }
    };

    if req.from_mode == req.to_mode {
        return Ok(PlannedPath {
            aspect: m.aspect,
            from_pose: from.pose,
            to_pose: to.pose,
            cs_polyline: vec![p_from],
            layers: vec![layer(p_from)],
            joint_projection: JointTrajectory { rho1: m.rho1, waypoints: vec![[r2, r3], [r2, r3]], closed: true },
            enclosed: vec![],
            validated: true,
            length: 0.0,
            vertex_margin: from.singularity.abs(),
        });
    }

    // A mesh edge between two regular vertices can still cut a fold near a
    // cusp; such edges are dropped and the search rerun.
    let mut banned = HashSet::new();
    let mut last_err = String::new();
    let mut found = None;
    for _ in 0..MAX_REPAIRS {
        let ids = search(m, req, p_from, p_to, &banned).ok_or_else(|| no_path.clone())?;
        let gp = graph_path(m, &req.weights, &ids, p_from, p_to, from.singularity.abs(), to.singularity.abs());
        let joint_projection = projection(&gp.cs_polyline);
        let run = trace(g, &joint_projection, from.pose)
            .map_err(|e| Error::ValidationFailed(format!("continuation failed: {e}")))?;
        if run.outcome == Outcome::ModeChange && run.end_mode_index == Some(req.to_mode) {
            found = Some((gp, joint_projection));
            break;
        }
        last_err = format!("continuation ended with {:?} at mode {:?}, expected mode {}", run.outcome, run.end_mode_index, req.to_mode);
        match run.stop_s.and_then(|s| edge_at(&gp.cs_polyline, s)) {
            Some(k) => {
                banned.insert(edge_key(ids[k], ids[k + 1]));
            }
            None => break,
        }
    }
    let Some((mut gp, mut joint_projection)) = found else {
        return Err(Error::ValidationFailed(last_err));
    };
    if req.smooth {
        if let Some(short) = shortcut(g, m, req, &gp.cs_polyline, from, to) {
            let proj = projection(&short.cs_polyline);
            let run = trace(g, &proj, from.pose)?;
            if run.outcome == Outcome::ModeChange && run.end_mode_index == Some(req.to_mode) {
                gp = short;
                joint_projection = proj;
            }
        }
    }
    let GraphPath { cs_polyline, layers, length, vertex_margin } = gp;
    let enclosed = enclosed_cusps(&joint_projection, cusps)?.into_iter().map(|(cusp, winding)| EnclosedCusp { cusp, winding }).collect();
    Ok(PlannedPath {
        aspect: m.aspect,
        from_pose: from.pose,
        to_pose: to.pose,
        cs_polyline,
        layers,
        joint_projection,
        enclosed,
        validated: true,
        length,
        vertex_margin,
    })
}

/// Longest run of polyline vertices a single shortcut may skip.
const SHORTCUT_SPAN: usize = 24;

/// Greedy shortcutting: from each kept vertex, jump to the farthest later
/// vertex whose straight joint segment carries the pose there by continuation
/// while `|S|` stays above the margin. `None` if nothing could be skipped.
fn shortcut(g: &Geometry, m: &CsMesh, req: &PlanRequest, pts: &[[f64; 3]], from: &Solution, to: &Solution) -> Option<GraphPath> {
    let last = pts.len() - 1;
    let pose_at = |k: usize| -> Option<Pose> {
        match k {
            0 => Some(from.pose),
            _ if k == last => Some(to.pose),
            _ => {
                let q = JointVector::new(m.rho1, pts[k][0], pts[k][1]).ok()?;
                let set = solve_dk(g, &q).ok()?;
                set.solutions
                    .iter()
                    .filter(|x| x.aspect == m.aspect)
                    .min_by(|a, b| angle_diff(a.pose.theta1, pts[k][2]).abs().total_cmp(&angle_diff(b.pose.theta1, pts[k][2]).abs()))
                    .map(|x| x.pose)
            }
        }
    };
    let reaches = |i: usize, j: usize, start: &Pose| -> Option<Pose> {
        let (a, b) = ([pts[i][0], pts[i][1]], [pts[j][0], pts[j][1]]);
        if a == b {
            return None;
        }
        let run = trace(g, &JointTrajectory { rho1: m.rho1, waypoints: vec![a, b], closed: false }, *start).ok()?;
        let target = pose_at(j)?;
        let ok = run.outcome == Outcome::OpenEnd
            && pose_distance(&run.end_pose, &target) < 1e-6
            && run.samples.iter().all(|x| x.singularity.abs() >= req.margin);
        ok.then_some(target)
    };

    let mut kept = vec![0];
    let mut poses = vec![from.pose];
    let mut i = 0;
    while i < last {
        let cur = *poses.last().unwrap();
        let hop = ((i + 2)..=(i + SHORTCUT_SPAN).min(last)).rev().find_map(|j| reaches(i, j, &cur).map(|p| (j, p)));
        let (j, p) = match hop {
            Some(h) => h,
            None => (i + 1, pose_at(i + 1)?),
        };
        kept.push(j);
        poses.push(p);
        i = j;
    }
    if kept.len() == pts.len() {
        return None;
    }
    let cs_polyline: Vec<[f64; 3]> = kept.iter().map(|&k| pts[k]).collect();
    let layers = cs_polyline.iter().map(|p| m.layer_at(p[0], p[1], p[2], SHEET_JUMP)).collect();
    let length = cs_polyline.windows(2).map(|w| weighted(&req.weights, w[0], w[1])).sum();
    let vertex_margin = poses.iter().filter_map(|p| signed_singularity(g, p).ok()).map(f64::abs).fold(f64::INFINITY, f64::min);
    Some(GraphPath { cs_polyline, layers, length, vertex_margin })
}

/// Shortest mesh path between two spliced-in modes, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPath {
    pub cs_polyline: Vec<[f64; 3]>,
    pub layers: Vec<u8>,
    pub length: f64,
    pub vertex_margin: f64,
}

/// A* between the mesh points `p_from` and `p_to` (`(rho2, rho3, theta1)`)
/// whose own `|S|` are `from_margin` and `to_margin`; `None` if disconnected.
pub fn graph_search(m: &CsMesh, req: &PlanRequest, p_from: [f64; 3], p_to: [f64; 3], from_margin: f64, to_margin: f64) -> Option<GraphPath> {
    search(m, req, p_from, p_to, &HashSet::new()).map(|ids| graph_path(m, &req.weights, &ids, p_from, p_to, from_margin, to_margin))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Index of the polyline edge whose joint-plane shadow holds arclength `s`.
fn edge_at(pts: &[[f64; 3]], s: f64) -> Option<usize> {
    let mut acc = 0.0;
    for k in 0..pts.len().saturating_sub(1) {
        let l = (pts[k + 1][0] - pts[k][0]).hypot(pts[k + 1][1] - pts[k][1]);
        if l > 0.0 && acc + l >= s - 1e-9 {
            return Some(k);
        }
        acc += l;
    }
    None
}

/// Vertex ids of the cheapest path; the modes are `nv` and `nv + 1`.
fn search(m: &CsMesh, req: &PlanRequest, p_from: [f64; 3], p_to: [f64; 3], banned: &HashSet<(usize, usize)>) -> Option<Vec<usize>> {
    let nv = m.vertices.len();
    let allowed: Vec<bool> = m.vertices.iter().map(|v| v.s.abs() >= req.margin).collect();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![vec![]; nv + 2];
    for [a, b] in m.edges() {
        if allowed[a] && allowed[b] && !banned.contains(&edge_key(a, b)) {
            let c = weighted(&req.weights, m.vertices[a].position(), m.vertices[b].position());
            adj[a].push((b, c));
            adj[b].push((a, c));
        }
    }
    let (src, dst) = (nv, nv + 1);
    for (v, c) in mode_links(m, p_from, &allowed, &req.weights) {
        if !banned.contains(&edge_key(src, v)) {
            adj[src].push((v, c));
        }
    }
    for (v, c) in mode_links(m, p_to, &allowed, &req.weights) {
        if !banned.contains(&edge_key(v, dst)) {
            adj[v].push((dst, c));
        }
    }
    let pos = |id: usize| if id == src { p_from } else if id == dst { p_to } else { m.vertices[id].position() };
    let h = |id: usize| weighted(&req.weights, pos(id), p_to);

    let mut best = vec![f64::INFINITY; nv + 2];
    let mut prev = vec![usize::MAX; nv + 2];
    let mut heap = BinaryHeap::new();
    best[src] = 0.0;
    heap.push(Node { f: h(src), g: 0.0, id: src });
    while let Some(Node { g: gc, id, .. }) = heap.pop() {
        if id == dst {
            break;
        }
        if gc > best[id] {
            continue;
        }
        for &(nb, c) in &adj[id] {
            let gn = gc + c;
            if gn < best[nb] {
                best[nb] = gn;
                prev[nb] = id;
                heap.push(Node { f: gn + h(nb), g: gn, id: nb });
            }
        }
    }
    if !best[dst].is_finite() {
        return None;
    }
    let mut ids = vec![dst];
    while let Some(&last) = ids.last() {
        if last == src {
            break;
        }
        ids.push(prev[last]);
    }
    ids.reverse();
    Some(ids)
}

fn graph_path(m: &CsMesh, weights: &[f64; 3], ids: &[usize], p_from: [f64; 3], p_to: [f64; 3], from_margin: f64, to_margin: f64) -> GraphPath {
    let (nv, src, dst) = (m.vertices.len(), m.vertices.len(), m.vertices.len() + 1);
    let pos = |id: usize| if id == src { p_from } else if id == dst { p_to } else { m.vertices[id].position() };
    let cs_polyline: Vec<[f64; 3]> = ids.iter().map(|&id| pos(id)).collect();
    let layers = ids
        .iter()
        .map(|&id| if id >= nv { m.layer_at(pos(id)[0], pos(id)[1], pos(id)[2], SHEET_JUMP) } else { m.vertices[id].layer })
        .collect();
    let vertex_margin = ids
        .iter()
        .map(|&id| match id {
            _ if id == src => from_margin,
            _ if id == dst => to_margin,
            _ => m.vertices[id].s.abs(),
        })
        .fold(f64::INFINITY, f64::min);
    let length = cs_polyline.windows(2).map(|w| weighted(weights, w[0], w[1])).sum();
    GraphPath { cs_polyline, layers, length, vertex_margin }
}

/// Smallest `|S|` along the path, with poses rebuilt by continuation over the
/// joint projection refined to `samples_per_seg` pieces per segment.
pub fn min_singularity_margin(g: &Geometry, path: &PlannedPath, samples_per_seg: usize) -> Result<f64> {
    if path.is_trivial() {
        return Ok(signed_singularity(g, &path.from_pose)?.abs());
    }
    let k = samples_per_seg.max(1);
    let mut waypoints = vec![];
    for (a, b) in path.joint_projection.segments() {
        for i in 0..k {
            let u = i as f64 / k as f64;
            waypoints.push([a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])]);
        }
    }
    let dense = JointTrajectory { rho1: path.joint_projection.rho1, waypoints, closed: true };
    let run = trace(g, &dense, path.from_pose)?;
    Ok(run.samples.iter().map(|s| s.singularity.abs()).fold(f64::INFINITY, f64::min))
}
