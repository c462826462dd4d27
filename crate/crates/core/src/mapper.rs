//! Temporal Mapper graphs.
//!
//! The lens is covered by overlapping hypercubes; points inside each cube are
//! clustered by single linkage that refuses any merge whose time span would
//! exceed `tau`; clusters become nodes, joined when they share a point and
//! their union still fits within `tau`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex::Tau;
use crate::data::DistanceMatrix;
use crate::embed::Embedding;
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

pub const DEFAULT_INTERVALS: usize = 10;
pub const DEFAULT_OVERLAP: f64 = 0.5;
pub const DEFAULT_HISTOGRAM_BINS: usize = 10;
pub const DEFAULT_LAYOUT_ITERATIONS: usize = 300;

/// Per lens dimension, `R` closed intervals; consecutive ones share a
/// fraction `g` of their length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cover {
    pub intervals: usize,
    pub overlap: f64,
    /// `bounds[dim][k] = (lo, hi)`.
    pub bounds: Vec<Vec<(f64, f64)>>,
}

pub fn build_cover(lens: &Embedding, intervals: usize, overlap: f64) -> Result<Cover> {
    if intervals == 0 {
        return Err(Error::invalid("a cover needs at least one interval"));
    }
    if !(overlap > 0.0 && overlap < 1.0) {
        return Err(Error::invalid(format!("overlap {overlap} must lie strictly between 0 and 1")));
    }
    if lens.is_empty() {
        return Err(Error::invalid("cannot cover an empty lens"));
    }
    let bounds = (0..lens.dim())
        .map(|c| {
            let col = lens.column(c);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi <= lo {
                return vec![(lo, hi)];
            }
            let r = intervals as f64;
            let len = (hi - lo) / (r - (r - 1.0) * overlap);
            let step = len * (1.0 - overlap);
            (0..intervals)
                .map(|k| {
                    let a = lo + k as f64 * step;
                    let b = if k + 1 == intervals { hi } else { a + len };
                    (a, b)
                })
                .collect()
        })
        .collect();
    Ok(Cover {
        intervals,
        overlap,
        bounds,
    })
}

impl Cover {
    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    /// Intervals of dimension `dim` containing `x`.
    pub fn intervals_containing(&self, dim: usize, x: f64) -> Vec<usize> {
        self.bounds[dim]
            .iter()
            .enumerate()
            .filter(|(_, (a, b))| *a <= x && x <= *b)
            .map(|(k, _)| k)
            .collect()
    }

    /// Mixed-radix cube id, first lens dimension most significant.
    pub fn cube_id(&self, per_dim: &[usize]) -> usize {
        per_dim
            .iter()
            .zip(&self.bounds)
            .fold(0, |acc, (&k, b)| acc * b.len() + k)
    }

    /// Cubes holding at least one point, ascending by id; members ascending.
    pub fn cube_members(&self, lens: &Embedding) -> Vec<(usize, Vec<usize>)> {
        let mut cubes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..lens.len() {
            let p = lens.point(i);
            let mut ids = vec![Vec::new()];
            for (dim, &x) in p.iter().enumerate() {
                let hits = self.intervals_containing(dim, x);
                ids = ids
                    .into_iter()
                    .flat_map(|prefix| {
                        hits.iter().map(move |&k| {
                            let mut v = prefix.clone();
                            v.push(k);
                            v
                        })
                    })
                    .collect();
            }
            for per_dim in ids {
                cubes.entry(self.cube_id(&per_dim)).or_default().push(i);
            }
        }
        cubes.into_iter().collect()
    }
}

/// Where to cut the within-cube dendrogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterCut {
    /// Keep merges below the first empty bin of a histogram of merge heights.
    HistogramGap { bins: usize },
    /// Keep merges at heights `<= h`.
    Threshold(f64),
    /// Keep every admissible merge.
    Connected,
}

impl Default for ClusterCut {
    fn default() -> Self {
        ClusterCut::HistogramGap {
            bins: DEFAULT_HISTOGRAM_BINS,
        }
    }
}

struct Components {
    parent: Vec<usize>,
    tmin: Vec<u32>,
    tmax: Vec<u32>,
}

impl Components {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// One merge of the constrained single-linkage run, in local indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkageMerge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

/// Single linkage over `points` where a merge is refused if the merged
/// cluster's time span would exceed `tau`. Merges come out by height.
pub fn constrained_single_linkage(
    points: &[usize],
    d: &DistanceMatrix,
    timestamps: &[u32],
    tau: Tau,
) -> Vec<LinkageMerge> {
    let n = points.len();
    let t = |i: usize| timestamps.get(points[i]).copied().unwrap_or(0);
    let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            if tau.admits(t(i), t(j)) {
                pairs.push((d.get(points[i], points[j]), i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut comp = Components {
        parent: (0..n).collect(),
        tmin: (0..n).map(t).collect(),
        tmax: (0..n).map(t).collect(),
    };
    let mut merges = Vec::new();
    for (h, i, j) in pairs {
        let (ri, rj) = (comp.find(i), comp.find(j));
        if ri == rj {
            continue;
        }
        let lo = comp.tmin[ri].min(comp.tmin[rj]);
        let hi = comp.tmax[ri].max(comp.tmax[rj]);
        if !tau.admits(lo, hi) {
            continue;
        }
        comp.parent[rj] = ri;
        comp.tmin[ri] = lo;
        comp.tmax[ri] = hi;
        merges.push(LinkageMerge { a: i, b: j, height: h });
        if merges.len() + 1 == n {
            break;
        }
    }
    merges
}

/// Number of leading merges the cut keeps.
pub fn merges_kept(heights: &[f64], cut: ClusterCut) -> usize {
    match cut {
        ClusterCut::Connected => heights.len(),
        ClusterCut::Threshold(h) => heights.iter().take_while(|&&x| x <= h).count(),
        ClusterCut::HistogramGap { bins } => {
            let (Some(&lo), Some(&hi)) = (heights.first(), heights.last()) else {
                return 0;
            };
            if hi <= lo || bins == 0 {
                return heights.len();
            }
            let bin = |x: f64| (((x - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1);
            let mut counts = vec![0usize; bins];
            for &x in heights {
                counts[bin(x)] += 1;
            }
            match counts.iter().position(|&c| c == 0) {
                None => heights.len(),
                Some(gap) => heights.iter().take_while(|&&x| bin(x) < gap).count(),
            }
        }
    }
}

/// Clusters of `points` (global indices), each ascending, ordered by their
/// smallest member.
pub fn cluster_cube(
    points: &[usize],
    d: &DistanceMatrix,
    timestamps: &[u32],
    tau: Tau,
    cut: ClusterCut,
) -> Vec<Vec<usize>> {
    let merges = constrained_single_linkage(points, d, timestamps, tau);
    let heights: Vec<f64> = merges.iter().map(|m| m.height).collect();
    let keep = merges_kept(&heights, cut);
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for m in &merges[..keep] {
        let (a, b) = (find(&mut parent, m.a), find(&mut parent, m.b));
        parent[a.max(b)] = a.min(b);
    }
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        by_root.entry(r).or_default().push(points[i]);
    }
    let mut clusters: Vec<Vec<usize>> = by_root
        .into_values()
        .map(|mut c| {
            c.sort_unstable();
            c
        })
        .collect();
    clusters.sort_by_key(|c| c[0]);
    clusters
}

/// A cluster found in one cube.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubeCluster {
    pub cube: usize,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapperNode {
    pub id: usize,
    pub cube: usize,
    pub members: Vec<usize>,
    pub time_min: u32,
    pub time_max: u32,
}

impl MapperNode {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn span(&self) -> u32 {
        self.time_max - self.time_min
    }

    /// Most frequent member timestamp; ties go to the earliest.
    pub fn modal_time(&self, timestamps: &[u32]) -> u32 {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for &m in &self.members {
            *counts.entry(timestamps[m]).or_default() += 1;
        }
        let best = counts.values().copied().max().unwrap_or(0);
        counts
            .into_iter()
            .find(|&(_, c)| c == best)
            .map_or(0, |(t, _)| t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MapperEdge {
    pub source: usize,
    pub target: usize,
    pub shared: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapperGraph {
    pub nodes: Vec<MapperNode>,
    pub edges: Vec<MapperEdge>,
    pub tau: Tau,
    pub layout: Option<Vec<[f64; 2]>>,
}

fn span_of(members: &[usize], timestamps: &[u32]) -> (u32, u32) {
    members.iter().fold((u32::MAX, 0), |(lo, hi), &m| {
        let t = timestamps.get(m).copied().unwrap_or(0);
        (lo.min(t), hi.max(t))
    })
}

fn shared_count(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Nodes in input order; edge `(u, v)` when they share a member and the
/// union of their time spans fits within `tau`.
pub fn assemble_graph(clusters: &[CubeCluster], timestamps: &[u32], tau: Tau) -> MapperGraph {
    let nodes: Vec<MapperNode> = clusters
        .iter()
        .enumerate()
        .map(|(id, c)| {
            let mut members = c.members.clone();
            members.sort_unstable();
            members.dedup();
            let (time_min, time_max) = span_of(&members, timestamps);
            MapperNode {
                id,
                cube: c.cube,
                members,
                time_min,
                time_max,
            }
        })
        .collect();
    let mut by_point: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for n in &nodes {
        for &m in &n.members {
            by_point.entry(m).or_default().push(n.id);
        }
    }
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for ids in by_point.values() {
        for (k, &u) in ids.iter().enumerate() {
            candidates.extend(ids[k + 1..].iter().map(|&v| (u.min(v), u.max(v))));
        }
    }
    candidates.sort_unstable();
    candidates.dedup();
    let edges = candidates
        .into_iter()
        .filter_map(|(u, v)| {
            let (a, b) = (&nodes[u], &nodes[v]);
            let lo = a.time_min.min(b.time_min);
            let hi = a.time_max.max(b.time_max);
            tau.admits(lo, hi).then(|| MapperEdge {
                source: u,
                target: v,
                shared: shared_count(&a.members, &b.members),
            })
        })
        .collect();
    MapperGraph {
        nodes,
        edges,
        tau,
        layout: None,
    }
}

/// Fruchterman-Reingold with unit rest length, seeded start and a fixed
/// number of cooling steps. The result is centered on the origin.
pub fn layout_graph(g: &MapperGraph, seed: u64, iterations: usize) -> Vec<[f64; 2]> {
    let n = g.nodes.len();
    let mut rng = seed::derived_rng(seed, Stream::Layout, 0);
    let mut pos: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0])
        .collect();
    let start_temp = 0.1 * (n as f64).sqrt().max(1.0);
    let mut disp = vec![[0.0f64; 2]; n];
    for it in 0..iterations {
        let temp = start_temp * (1.0 - it as f64 / iterations as f64);
        disp.iter_mut().for_each(|d| *d = [0.0, 0.0]);
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = pos[i][0] - pos[j][0];
                let dy = pos[i][1] - pos[j][1];
                let dist = (dx * dx + dy * dy).sqrt().max(1e-9);
                let f = 1.0 / dist;
                let (ux, uy) = (dx / dist, dy / dist);
                disp[i][0] += ux * f;
                disp[i][1] += uy * f;
                disp[j][0] -= ux * f;
                disp[j][1] -= uy * f;
            }
        }
        for e in &g.edges {
            let (i, j) = (e.source, e.target);
            let dx = pos[i][0] - pos[j][0];
            let dy = pos[i][1] - pos[j][1];
            let dist = (dx * dx + dy * dy).sqrt().max(1e-9);
            let f = dist * dist;
            let (ux, uy) = (dx / dist, dy / dist);
            disp[i][0] -= ux * f;
            disp[i][1] -= uy * f;
            disp[j][0] += ux * f;
            disp[j][1] += uy * f;
        }
        for i in 0..n {
            let len = (disp[i][0] * disp[i][0] + disp[i][1] * disp[i][1]).sqrt();
            if len > 0.0 {
                let step = len.min(temp);
                pos[i][0] += disp[i][0] / len * step;
                pos[i][1] += disp[i][1] / len * step;
            }
        }
    }
    if n > 0 {
        let cx = pos.iter().map(|p| p[0]).sum::<f64>() / n as f64;
        let cy = pos.iter().map(|p| p[1]).sum::<f64>() / n as f64;
        for p in &mut pos {
            p[0] -= cx;
            p[1] -= cy;
        }
    }
    pos
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapperConfig {
    pub intervals: usize,
    pub overlap: f64,
    pub tau: Tau,
    pub cut: ClusterCut,
    pub layout_iterations: usize,
    pub seed: u64,
}

impl Default for MapperConfig {
    fn default() -> Self {
        Self {
            intervals: DEFAULT_INTERVALS,
            overlap: DEFAULT_OVERLAP,
            tau: Tau::Infinite,
            cut: ClusterCut::default(),
            layout_iterations: DEFAULT_LAYOUT_ITERATIONS,
            seed: 0,
        }
    }
}

/// Clusters of every nonempty cube, cubes ascending, clusters by rank.
pub fn cover_clusters(
    cover: &Cover,
    lens: &Embedding,
    d: &DistanceMatrix,
    timestamps: &[u32],
    tau: Tau,
    cut: ClusterCut,
) -> Vec<CubeCluster> {
    cover
        .cube_members(lens)
        .par_iter()
        .map(|(cube, pts)| {
            cluster_cube(pts, d, timestamps, tau, cut)
                .into_iter()
                .map(|members| CubeCluster { cube: *cube, members })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Cover, cluster, assemble and lay out.
pub fn mapper(lens: &Embedding, d: &DistanceMatrix, timestamps: &[u32], cfg: &MapperConfig) -> Result<MapperGraph> {
    if d.len() != lens.len() || timestamps.len() != lens.len() {
        return Err(Error::invalid("lens, distances and timestamps disagree in size"));
    }
    let cover = build_cover(lens, cfg.intervals, cfg.overlap)?;
    let clusters = cover_clusters(&cover, lens, d, timestamps, cfg.tau, cfg.cut);
    let mut g = assemble_graph(&clusters, timestamps, cfg.tau);
    g.layout = Some(layout_graph(&g, cfg.seed, cfg.layout_iterations));
    Ok(g)
}

impl MapperGraph {
    /// Component label of every node, numbered by smallest node id.
    pub fn components(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.source), find(&mut parent, e.target));
            parent[a.max(b)] = a.min(b);
        }
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut out = vec![0; n];
        for i in 0..n {
            let r = find(&mut parent, i);
            if label[r] == usize::MAX {
                label[r] = next;
                next += 1;
            }
            out[i] = label[r];
        }
        out
    }

    pub fn to_json(&self, cell_ids: &[String], timestamps: &[u32]) -> serde_json::Value {
        let nodes: Vec<serde_json::Value> = self
            .nodes
            .iter()
            .map(|n| {
                let xy = self.layout.as_ref().map(|l| l[n.id]);
                serde_json::json!({
                    "id": n.id,
                    "cube": n.cube,
                    "size": n.size(),
                    "time_min": n.time_min,
                    "time_max": n.time_max,
                    "modal_time": n.modal_time(timestamps),
                    "members": n.members.iter().map(|&m| cell_ids.get(m).cloned().unwrap_or_else(|| m.to_string())).collect::<Vec<_>>(),
                    "x": xy.map(|p| p[0]),
                    "y": xy.map(|p| p[1]),
                })
            })
            .collect();
        serde_json::json!({
            "schema_version": 1,
            "tau": self.tau,
            "nodes": nodes,
            "links": self.edges,
        })
    }

    /// DOT text; fill color runs from red (earliest modal time) to blue.
    pub fn to_dot(&self, timestamps: &[u32]) -> String {
        let modal: Vec<u32> = self.nodes.iter().map(|n| n.modal_time(timestamps)).collect();
        let lo = modal.iter().copied().min().unwrap_or(0);
        let hi = modal.iter().copied().max().unwrap_or(0);
        let mut out = String::from("graph mapper {\n  node [style=filled];\n");
        for (n, &t) in self.nodes.iter().zip(&modal) {
            let hue = if hi > lo { 0.66 * (t - lo) as f64 / (hi - lo) as f64 } else { 0.0 };
            let _ = write!(
                out,
                "  n{} [label=\"{}\", fillcolor=\"{:.3} 0.7 0.95\", size={}, modal_time={}",
                n.id, n.id, hue, n.size(), t
            );
            if let Some(l) = &self.layout {
                let _ = write!(out, ", pos=\"{:.4},{:.4}\"", l[n.id][0], l[n.id][1]);
            }
            out.push_str("];\n");
        }
        for e in &self.edges {
            let _ = writeln!(out, "  n{} -- n{} [weight={}];", e.source, e.target, e.shared);
        }
        out.push_str("}\n");
        out
    }

    pub fn write_nodes_csv<W: Write>(&self, timestamps: &[u32], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["id", "cube", "size", "time_min", "time_max", "modal_time", "x", "y"])?;
        for n in &self.nodes {
            let (x, y) = self
                .layout
                .as_ref()
                .map_or((String::new(), String::new()), |l| (l[n.id][0].to_string(), l[n.id][1].to_string()));
            w.write_record([
                n.id.to_string(),
                n.cube.to_string(),
                n.size().to_string(),
                n.time_min.to_string(),
                n.time_max.to_string(),
                n.modal_time(timestamps).to_string(),
                x,
                y,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_edges_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["source", "target", "shared"])?;
        for e in &self.edges {
            w.write_record([e.source.to_string(), e.target.to_string(), e.shared.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
