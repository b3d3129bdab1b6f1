//! Per-aspect configuration-space surfaces of a fixed-`rho1` slice, meshed
//! over a `(rho2, rho3)` grid with `theta1` as the height coordinate.
//!
//! Every grid node is solved independently; vertices of the same aspect at
//! the four corners of a cell are grouped into sheets by mutual nearest
//! `theta1`, and a sheet that ends inside a cell is closed off by a fold
//! vertex found by bisection along the cell edge.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atlas::Window;
use crate::dk::{pose_distance, solve_dk, SolutionSet, DEDUP_TOL};
use crate::export::{format_f64, to_json_bytes, SCHEMA};
use crate::scalar::angle_diff;
use crate::{AspectLabel, Error, Geometry, JointVector, Result};

pub const SHEET_JUMP: f64 = 0.3;
pub const BOUNDARY_BAND: f64 = 1e-3;
pub const MIN_CS_GRID: usize = 64;
pub const DEFAULT_CS_GRID: usize = 128;
/// Covers all six cusps of the reference slice with some room around them.
pub const DEFAULT_CS_WINDOW: [f64; 2] = [1.0, 36.0];

#[derive(Debug, Clone, Copy)]
pub struct CsOptions {
    /// Largest `theta1` step allowed between vertices of one face.
    pub sheet_jump: f64,
    pub boundary_band: f64,
    pub dedup_tol: f64,
    pub bisect_iters: usize,
}

impl Default for CsOptions {
    fn default() -> Self {
        CsOptions { sheet_jump: SHEET_JUMP, boundary_band: BOUNDARY_BAND, dedup_tol: DEDUP_TOL, bisect_iters: 36 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsVertex {
    pub rho2: f64,
    pub rho3: f64,
    pub theta1: f64,
    pub alpha: f64,
    /// Signed normalized singularity value.
    pub s: f64,
    /// 1..=3 inside three-solution regions, 0 elsewhere.
    pub layer: u8,
    /// Grid node `(i, j)`; `None` for fold vertices on cell edges.
    pub node: Option<[usize; 2]>,
}

impl CsVertex {
    pub fn position(&self) -> [f64; 3] {
        [self.rho2, self.rho3, self.theta1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsMesh {
    pub rho1: f64,
    pub aspect: AspectLabel,
    pub window: Window,
    pub n: usize,
    pub vertices: Vec<CsVertex>,
    pub faces: Vec<[usize; 3]>,
    /// Fold polylines as vertex-index chains (closed chains repeat the first index).
    pub boundary: Vec<Vec<usize>>,
    node_index: Vec<Vec<usize>>,
}

impl CsMesh {
    fn empty(rho1: f64, aspect: AspectLabel, window: Window, n: usize) -> Self {
        CsMesh { rho1, aspect, window, n, vertices: vec![], faces: vec![], boundary: vec![], node_index: vec![vec![]; n * n] }
    }

    /// Vertex indices at grid node `(i, j)`, ascending `theta1`.
    pub fn node_vertices(&self, i: usize, j: usize) -> &[usize] {
        &self.node_index[j * self.n + i]
    }

    /// Undirected edges of all faces, sorted and deduplicated.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut set = BTreeSet::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                set.insert([a.min(b), a.max(b)]);
            }
        }
        set.into_iter().collect()
    }

    /// Cell `(i, j)` whose closed square contains `(rho2, rho3)`.
    pub fn locate(&self, rho2: f64, rho3: f64) -> Option<[usize; 2]> {
        let w = &self.window;
        if rho2 < w.rho2[0] || rho2 > w.rho2[1] || rho3 < w.rho3[0] || rho3 > w.rho3[1] {
            return None;
        }
        let [h2, h3] = w.spacing(self.n);
        let i = (((rho2 - w.rho2[0]) / h2).floor() as usize).min(self.n - 2);
        let j = (((rho3 - w.rho3[0]) / h3).floor() as usize).min(self.n - 2);
        Some([i, j])
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Layer of the sheet through `(rho2, rho3, theta1)`: the most common
    /// nonzero label among the nearest-`theta1` vertices at the four corners
    /// of the containing cell, 0 if none is within `sheet_jump`.
    pub fn layer_at(&self, rho2: f64, rho3: f64, theta1: f64, sheet_jump: f64) -> u8 {
        let Some([i, j]) = self.locate(rho2, rho3) else { return 0 };
        let mut votes = [0usize; 4];
        for (a, b) in [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)] {
            let best = self
                .node_vertices(a, b)
                .iter()
                .map(|&v| (v, angle_diff(self.vertices[v].theta1, theta1).abs()))
                .min_by(|x, y| x.1.total_cmp(&y.1));
            if let Some((v, d)) = best {
                if d < sheet_jump {
                    votes[self.vertices[v].layer as usize] += 1;
                }
            }
        }
        (1..4).max_by_key(|&l| (votes[l], std::cmp::Reverse(l))).filter(|&l| votes[l] > 0).unwrap_or(0) as u8
    }
}

struct NodeSolve {
    set: Option<SolutionSet>,
}

pub fn default_window() -> Window {
    Window::square(DEFAULT_CS_WINDOW[0], DEFAULT_CS_WINDOW[1])
}

/// Builds the aspect-1 and aspect-2 meshes of the slice, layers included.
pub fn build_cs(g: &Geometry, rho1: f64, window: Window, grid_n: usize) -> Result<(CsMesh, CsMesh)> {
    build_cs_with(g, rho1, window, grid_n, &CsOptions::default())
}

pub fn build_cs_with(g: &Geometry, rho1: f64, window: Window, grid_n: usize, opts: &CsOptions) -> Result<(CsMesh, CsMesh)> {
    build_cs_observed(g, rho1, window, grid_n, opts, &|_| {})
}

/// As [`build_cs_with`], reporting the solved fraction of grid nodes to `progress`
/// (from worker threads, roughly once per grid row).
pub fn build_cs_observed(
    g: &Geometry,
    rho1: f64,
    window: Window,
    grid_n: usize,
    opts: &CsOptions,
    progress: &(dyn Fn(f64) + Sync),
) -> Result<(CsMesh, CsMesh)> {
    if !window.is_valid() || !(rho1 > 0.0) {
        return Err(Error::InvalidRequest("window must be positive and non-empty".into()));
    }
    if grid_n < MIN_CS_GRID {
        return Err(Error::InvalidRequest(format!("grid_n must be at least {MIN_CS_GRID}")));
    }
    let total = grid_n * grid_n;
    let done = AtomicUsize::new(0);
    let solves: Vec<NodeSolve> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let [r2, r3] = window.node(grid_n, idx % grid_n, idx / grid_n);
            let set = JointVector::new(rho1, r2, r3).ok().and_then(|q| solve_dk(g, &q).ok());
            let k = done.fetch_add(1, AtomicOrdering::Relaxed) + 1;
            if k % grid_n == 0 {
                progress(k as f64 / total as f64);
            }
            NodeSolve { set }
        })
        .collect();
    for (idx, ns) in solves.iter().enumerate() {
        let Some(set) = &ns.set else { continue };
        for aspect in [AspectLabel::Aspect1, AspectLabel::Aspect2] {
            let th: Vec<f64> = set.solutions.iter().filter(|s| s.aspect == aspect).map(|s| s.pose.theta1).collect();
            for a in 0..th.len() {
                for b in a + 1..th.len() {
                    if angle_diff(th[a], th[b]).abs() < opts.dedup_tol {
                        let [r2, r3] = window.node(grid_n, idx % grid_n, idx / grid_n);
                        return Err(Error::DegenerateCoordinate { rho2: r2, rho3: r3 });
                    }
                }
            }
        }
    }
    let m1 = build_aspect(g, rho1, window, grid_n, &solves, AspectLabel::Aspect1, opts);
    let m2 = build_aspect(g, rho1, window, grid_n, &solves, AspectLabel::Aspect2, opts);
    Ok((extract_layers_with(m1, opts.sheet_jump), extract_layers_with(m2, opts.sheet_jump)))
}

/// Pairs `(a, b)` of mutual nearest neighbours in `theta1` within `jump`.
fn mutual_matches(verts: &[CsVertex], a: &[usize], b: &[usize], jump: f64) -> Vec<(usize, usize)> {
    let nearest = |v: usize, pool: &[usize]| {
        pool.iter()
            .map(|&w| (w, angle_diff(verts[v].theta1, verts[w].theta1).abs()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
    };
    a.iter()
        .filter_map(|&va| {
            let (vb, d) = nearest(va, b)?;
            (d < jump && nearest(vb, a).map(|x| x.0) == Some(va)).then_some((va, vb))
        })
        .collect()
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = x;
    while parent[c] != r {
        let next = parent[c];
        parent[c] = r;
        c = next;
    }
    r
}

/// One sheet inside a cell: at most one vertex per corner.
#[derive(Debug, Clone)]
struct Cluster {
    corners: [Option<usize>; 4],
}

const CELL_EDGES: [(usize, usize); 4] = [(0, 1), (1, 2), (2, 3), (3, 0)];

fn cell_nodes(n: usize, i: usize, j: usize) -> [usize; 4] {
    [j * n + i, j * n + i + 1, (j + 1) * n + i + 1, (j + 1) * n + i]
}

fn cell_clusters(mesh: &CsMesh, i: usize, j: usize, jump: f64) -> Vec<Cluster> {
    let nodes = cell_nodes(mesh.n, i, j);
    let lists: Vec<&[usize]> = nodes.iter().map(|&k| mesh.node_index[k].as_slice()).collect();
    let mut local: Vec<(usize, usize)> = vec![];
    for (c, l) in lists.iter().enumerate() {
        for &v in l.iter() {
            local.push((c, v));
        }
    }
    if local.is_empty() {
        return vec![];
    }
    let pos: HashMap<usize, usize> = local.iter().enumerate().map(|(k, &(_, v))| (v, k)).collect();
    let mut parent: Vec<usize> = (0..local.len()).collect();
    for (a, b) in [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3)] {
        for (va, vb) in mutual_matches(&mesh.vertices, lists[a], lists[b], jump) {
            let (ra, rb) = (find(&mut parent, pos[&va]), find(&mut parent, pos[&vb]));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for k in 0..local.len() {
        let r = find(&mut parent, k);
        groups.entry(r).or_default().push(local[k]);
    }
    groups
        .into_values()
        .filter_map(|members| {
            let mut corners = [None; 4];
            for (c, v) in members {
                if corners[c].replace(v).is_some() {
                    return None; // two vertices of one node on one sheet: ambiguous
                }
            }
            Some(Cluster { corners })
        })
        .collect()
}

/// Fold vertex between a node carrying the sheet and a neighbour that does not.
fn bisect_fold(
    g: &Geometry,
    mesh: &CsMesh,
    from_vertex: usize,
    to: [f64; 2],
    opts: &CsOptions,
) -> Option<CsVertex> {
    let v0 = mesh.vertices[from_vertex];
    let from = [v0.rho2, v0.rho3];
    let len = (to[0] - from[0]).hypot(to[1] - from[1]);
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut pose = crate::Pose::new(mesh.rho1, v0.theta1, v0.alpha);
    let mut best: Option<CsVertex> = None;
    for _ in 0..opts.bisect_iters {
        let mid = 0.5 * (lo + hi);
        // a branch ending at a fold moves like sqrt(distance): a neighbouring
        // sheet of the same aspect must not be mistaken for it
        let tol = opts.sheet_jump.min(2.0 * ((mid - lo) * len).sqrt());
        let q = [from[0] + mid * (to[0] - from[0]), from[1] + mid * (to[1] - from[1])];
        let hit = JointVector::new(mesh.rho1, q[0], q[1]).ok().and_then(|jv| solve_dk(g, &jv).ok()).and_then(|set| {
            set.solutions
                .iter()
                .filter(|s| s.aspect == mesh.aspect)
                .map(|s| (s, pose_distance(&s.pose, &pose)))
                .filter(|(_, d)| *d < tol)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(s, _)| {
                    (s.pose, CsVertex {
                        rho2: q[0],
                        rho3: q[1],
                        theta1: s.pose.theta1,
                        alpha: s.pose.alpha,
                        s: s.singularity,
                        layer: 0,
                        node: None,
                    })
                })
        });
        match hit {
            Some((p, v)) => {
                lo = mid;
                pose = p;
                best = Some(v);
            }
            None => hi = mid,
        }
    }
    // the sheet never ended: the neighbour carries it but nearest matching failed
    if hi == 1.0 {
        return None;
    }
    best
}

type Crossing = ([usize; 2], usize);

fn build_aspect(
    g: &Geometry,
    rho1: f64,
    window: Window,
    n: usize,
    solves: &[NodeSolve],
    aspect: AspectLabel,
    opts: &CsOptions,
) -> CsMesh {
    let mut mesh = CsMesh::empty(rho1, aspect, window, n);
    for (idx, ns) in solves.iter().enumerate() {
        let Some(set) = &ns.set else { continue };
        for s in set.solutions.iter().filter(|s| s.aspect == aspect) {
            let (i, j) = (idx % n, idx / n);
            let [r2, r3] = window.node(n, i, j);
            mesh.node_index[idx].push(mesh.vertices.len());
            mesh.vertices.push(CsVertex {
                rho2: r2,
                rho3: r3,
                theta1: s.pose.theta1,
                alpha: s.pose.alpha,
                s: s.singularity,
                layer: 0,
                node: Some([i, j]),
            });
        }
    }
    let cells: Vec<(usize, usize, Vec<Cluster>)> = (0..(n - 1) * (n - 1))
        .into_par_iter()
        .map(|c| {
            let (i, j) = (c % (n - 1), c / (n - 1));
            (i, j, cell_clusters(&mesh, i, j, opts.sheet_jump))
        })
        .collect();

    // sheet ends on cell edges, keyed by (edge, vertex carrying the sheet)
    let mut requests: BTreeSet<Crossing> = BTreeSet::new();
    for (i, j, clusters) in &cells {
        let nodes = cell_nodes(n, *i, *j);
        for cl in clusters {
            for (a, b) in CELL_EDGES {
                match (cl.corners[a], cl.corners[b]) {
                    (Some(v), None) | (None, Some(v)) => {
                        let other = if cl.corners[a].is_some() { nodes[b] } else { nodes[a] };
                        let here = if cl.corners[a].is_some() { nodes[a] } else { nodes[b] };
                        requests.insert(([here, other], v));
                    }
                    _ => {}
                }
            }
        }
    }
    let requests: Vec<Crossing> = requests.into_iter().collect();
    let folds: Vec<Option<CsVertex>> = requests
        .par_iter()
        .map(|([_, other], v)| bisect_fold(g, &mesh, *v, window.node(n, other % n, other / n), opts))
        .collect();
    let mut fold_index: HashMap<Crossing, usize> = HashMap::new();
    for (req, f) in requests.iter().zip(folds) {
        if let Some(v) = f {
            fold_index.insert(*req, mesh.vertices.len());
            mesh.vertices.push(v);
        }
    }

    let mut segments: BTreeSet<[usize; 2]> = BTreeSet::new();
    for (i, j, clusters) in &cells {
        let nodes = cell_nodes(n, *i, *j);
        for cl in clusters {
            // walk the cell boundary: (vertex, is_fold)
            let mut ring: Vec<(usize, bool)> = vec![];
            for (a, b) in CELL_EDGES {
                if let Some(v) = cl.corners[a] {
                    ring.push((v, false));
                }
                let key = match (cl.corners[a], cl.corners[b]) {
                    (Some(v), None) => Some(([nodes[a], nodes[b]], v)),
                    (None, Some(v)) => Some(([nodes[b], nodes[a]], v)),
                    _ => None,
                };
                if let Some(f) = key.and_then(|k| fold_index.get(&k)) {
                    ring.push((*f, true));
                }
            }
            if ring.len() < 3 {
                continue;
            }
            for k in 1..ring.len() - 1 {
                let tri = [ring[0].0, ring[k].0, ring[k + 1].0];
                let ok = (0..3).all(|e| {
                    angle_diff(mesh.vertices[tri[e]].theta1, mesh.vertices[tri[(e + 1) % 3]].theta1).abs() <= opts.sheet_jump
                });
                if ok {
                    mesh.faces.push(tri);
                }
            }
            for k in 0..ring.len() {
                let (a, b) = (ring[k], ring[(k + 1) % ring.len()]);
                let in_band = |v: usize| mesh.vertices[v].s.abs() < opts.boundary_band;
                if a.1 && b.1 && a.0 != b.0 && in_band(a.0) && in_band(b.0) {
                    segments.insert([a.0.min(b.0), a.0.max(b.0)]);
                }
            }
        }
    }
    mesh.boundary = chain_segments(&segments);
    mesh
}

/// Joins segments sharing endpoints into maximal chains; deterministic order.
fn chain_segments(segments: &BTreeSet<[usize; 2]>) -> Vec<Vec<usize>> {
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &[a, b] in segments {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut used: BTreeSet<[usize; 2]> = BTreeSet::new();
    let mut out = vec![];
    let starts: Vec<usize> = adj.iter().filter(|(_, v)| v.len() != 2).map(|(k, _)| *k).chain(adj.keys().copied()).collect();
    for s in starts {
        loop {
            let Some(&next) = adj[&s].iter().find(|&&w| !used.contains(&[s.min(w), s.max(w)])) else { break };
            let mut chain = vec![s];
            let (mut prev, mut cur) = (s, next);
            used.insert([s.min(next), s.max(next)]);
            chain.push(cur);
            while let Some(&w) = adj[&cur].iter().find(|&&w| w != prev && !used.contains(&[cur.min(w), cur.max(w)])) {
                used.insert([cur.min(w), cur.max(w)]);
                prev = cur;
                cur = w;
                chain.push(cur);
                if cur == s {
                    break;
                }
            }
            out.push(chain);
        }
    }
    out
}

fn ascending_theta(verts: &[CsVertex], ids: &[usize]) -> Vec<usize> {
    let mut sorted: Vec<usize> = ids.to_vec();
    sorted.sort_by(|a, b| verts[*a].theta1.total_cmp(&verts[*b].theta1));
    sorted
}

/// Labels layers 1..=3 inside regions of nodes carrying three solutions of the
/// mesh's aspect.
///
/// Labels are carried along the sheets from node to node, so their cyclic
/// order is fixed within a region; what "ascending `theta1`" leaves open on
/// the circle is where to start counting. Layer 2 is the sheet that meets
/// both others at the folds bounding the region, so the two outer layers are
/// only joined through it.
pub fn extract_layers(m: CsMesh) -> CsMesh {
    extract_layers_with(m, SHEET_JUMP)
}

pub fn extract_layers_with(mut m: CsMesh, sheet_jump: f64) -> CsMesh {
    let n = m.n;
    for v in m.vertices.iter_mut() {
        v.layer = 0;
    }
    let mut adj = vec![vec![]; m.vertices.len()];
    for [a, b] in m.edges() {
        adj[a].push(b);
        adj[b].push(a);
    }
    let triple = |m: &CsMesh, idx: usize| m.node_index[idx].len() == 3;
    let mut seen = vec![false; n * n];
    for start in 0..n * n {
        if seen[start] || !triple(&m, start) {
            continue;
        }
        seen[start] = true;
        for (k, v) in ascending_theta(&m.vertices, &m.node_index[start]).into_iter().enumerate() {
            m.vertices[v].layer = k as u8 + 1;
        }
        let mut region = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(cur) = queue.pop_front() {
            let (i, j) = (cur % n, cur / n);
            let mut nbrs = vec![];
            if i > 0 {
                nbrs.push(cur - 1);
            }
            if i + 1 < n {
                nbrs.push(cur + 1);
            }
            if j > 0 {
                nbrs.push(cur - n);
            }
            if j + 1 < n {
                nbrs.push(cur + n);
            }
            for nb in nbrs {
                if seen[nb] || !triple(&m, nb) {
                    continue;
                }
                seen[nb] = true;
                let pairs = mutual_matches(&m.vertices, &m.node_index[nb], &m.node_index[cur], sheet_jump);
                let labels: BTreeSet<u8> = pairs.iter().map(|(_, c)| m.vertices[*c].layer).collect();
                if pairs.len() == 3 && labels.len() == 3 {
                    for (v, c) in pairs {
                        m.vertices[v].layer = m.vertices[c].layer;
                    }
                } else {
                    for (k, v) in ascending_theta(&m.vertices, &m.node_index[nb]).into_iter().enumerate() {
                        m.vertices[v].layer = k as u8 + 1;
                    }
                }
                queue.push_back(nb);
                region.push(nb);
            }
        }
        rotate_layers(&mut m, &region, &adj);
    }
    m
}

/// Gap (between layers `k + 1` and `k + 2`, cyclically) where counting starts.
///
/// At a fold bounding the region two adjacent sheets merge; the sheet that
/// merges with both others is the middle one, so the cut goes between the
/// pair never seen merging. Without any fold in reach, the gap that stays
/// widest over the region is used instead.
fn seam_gap(m: &CsMesh, region: &[usize], adj: &[Vec<usize>]) -> usize {
    let mut in_region = vec![false; m.n * m.n];
    for &nd in region {
        in_region[nd] = true;
    }
    let node_of = |v: usize| m.vertices[v].node.map(|[i, j]| j * m.n + i);
    let mut merges = [0usize; 3];
    for (f, nbrs) in adj.iter().enumerate() {
        if m.vertices[f].node.is_some() {
            continue;
        }
        let Some(nd) = nbrs.iter().filter_map(|&w| node_of(w)).find(|&nd| in_region[nd]) else { continue };
        // the two sheets meeting at the fold are the ones closing in on it
        let fv = &m.vertices[f];
        let mut near: Vec<(f64, u8)> = m.node_index[nd]
            .iter()
            .map(|&w| {
                let v = &m.vertices[w];
                (angle_diff(v.theta1, fv.theta1).hypot(angle_diff(v.alpha, fv.alpha)), v.layer)
            })
            .collect();
        near.sort_by(|x, y| x.0.total_cmp(&y.0));
        if near.len() == 3 && near[2].0 > 2.0 * near[1].0 {
            let (lo, hi) = (near[0].1.min(near[1].1), near[0].1.max(near[1].1));
            // gap k sits between layers k + 1 and (k + 1) % 3 + 1
            let k = if (lo, hi) == (1, 3) { 2 } else { lo as usize - 1 };
            merges[k] += 1;
        }
    }
    let merged = merges.iter().filter(|c| **c > 0).count();
    if merged == 2 {
        return merges.iter().position(|c| *c == 0).unwrap();
    }

    let two_pi = 2.0 * std::f64::consts::PI;
    let mut clearance = [f64::INFINITY; 3];
    for &nd in region {
        let mut theta = [f64::NAN; 3];
        for &v in &m.node_index[nd] {
            theta[m.vertices[v].layer as usize - 1] = m.vertices[v].theta1;
        }
        for k in 0..3 {
            clearance[k] = clearance[k].min((theta[(k + 1) % 3] - theta[k]).rem_euclid(two_pi));
        }
    }
    let mut cut = 2;
    for k in 0..3 {
        if clearance[k] > clearance[cut] {
            cut = k;
        }
    }
    cut
}

fn rotate_layers(m: &mut CsMesh, region: &[usize], adj: &[Vec<usize>]) {
    let cut = seam_gap(m, region, adj);
    if cut == 2 {
        return;
    }
    for &nd in region {
        for &v in &m.node_index[nd] {
            let old = m.vertices[v].layer as usize - 1;
            m.vertices[v].layer = ((old + 3 - (cut + 1)) % 3) as u8 + 1;
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GridJson {
    window: [[f64; 2]; 2],
    n: usize,
}

#[derive(Serialize, Deserialize)]
struct MeshJson {
    schema: String,
    rho1: f64,
    aspect: u8,
    grid: GridJson,
    vertices: Vec<[f64; 6]>,
    faces: Vec<[usize; 3]>,
    boundary: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeshFormat {
    Json,
    Obj,
}

pub fn export_mesh(m: &CsMesh, format: MeshFormat) -> Vec<u8> {
    match format {
        MeshFormat::Json => {
            let doc = MeshJson {
                schema: SCHEMA.into(),
                rho1: m.rho1,
                aspect: m.aspect.number(),
                grid: GridJson { window: [m.window.rho2, m.window.rho3], n: m.n },
                vertices: m.vertices.iter().map(|v| [v.rho2, v.rho3, v.theta1, v.alpha, v.s, v.layer as f64]).collect(),
                faces: m.faces.clone(),
                boundary: m.boundary.clone(),
            };
            to_json_bytes(&doc).expect("mesh serializes")
        }
        MeshFormat::Obj => {
            let mut s = format!("# cs mesh rho1 {} aspect {}\n", format_f64(m.rho1), m.aspect.number());
            for v in &m.vertices {
                s.push_str(&format!("v {} {} {}\n", format_f64(v.rho2), format_f64(v.rho3), format_f64(v.theta1)));
            }
            for f in &m.faces {
                s.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
            }
            for b in &m.boundary {
                let ids: Vec<String> = b.iter().map(|i| (i + 1).to_string()).collect();
                s.push_str(&format!("l {}\n", ids.join(" ")));
            }
            s.into_bytes()
        }
    }
}

/// Reads a mesh written by [`export_mesh`] in JSON form.
pub fn import_mesh_json(bytes: &[u8]) -> Result<CsMesh> {
    let doc: MeshJson = serde_json::from_slice(bytes).map_err(|e| Error::InvalidRequest(format!("mesh JSON: {e}")))?;
    let aspect = AspectLabel::from_number(doc.aspect).ok_or_else(|| Error::InvalidRequest("aspect must be 1 or 2".into()))?;
    let window = Window { rho2: doc.grid.window[0], rho3: doc.grid.window[1] };
    let n = doc.grid.n;
    if n < 2 || !window.is_valid() {
        return Err(Error::InvalidRequest("mesh grid is malformed".into()));
    }
    let mut m = CsMesh::empty(doc.rho1, aspect, window, n);
    let [h2, h3] = window.spacing(n);
    for (k, v) in doc.vertices.iter().enumerate() {
        let i = ((v[0] - window.rho2[0]) / h2).round();
        let j = ((v[1] - window.rho3[0]) / h3).round();
        let node = (i >= 0.0 && j >= 0.0 && (i as usize) < n && (j as usize) < n)
            .then(|| [i as usize, j as usize])
            .filter(|&[i, j]| window.node(n, i, j) == [v[0], v[1]]);
        if let Some([i, j]) = node {
            m.node_index[j * n + i].push(k);
        }
        m.vertices.push(CsVertex { rho2: v[0], rho3: v[1], theta1: v[2], alpha: v[3], s: v[4], layer: v[5] as u8, node });
    }
    m.faces = doc.faces;
    m.boundary = doc.boundary;
    let nv = m.vertices.len();
    if m.faces.iter().flatten().chain(m.boundary.iter().flatten()).any(|&i| i >= nv) {
        return Err(Error::InvalidRequest("mesh index out of range".into()));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_chain_into_paths_and_loops() {
        let segs: BTreeSet<[usize; 2]> = [[0, 1], [1, 2], [5, 6], [6, 7], [5, 7]].into_iter().collect();
        let chains = chain_segments(&segs);
        assert_eq!(chains.len(), 2);
        assert_eq!(chains[0], vec![0, 1, 2]);
        assert_eq!(chains[1].first(), chains[1].last());
        assert_eq!(chains[1].len(), 4);
    }

    #[test]
    fn small_grid_is_rejected() {
        let g = Geometry::canonical();
        assert!(matches!(build_cs(&g, 17.0, Window::square(10.0, 30.0), 16), Err(Error::InvalidRequest(_))));
    }
}
