//! Temporally constrained flag-complex filtrations.
//!
//! An edge `(i, j)` exists at threshold `eps` iff `d(i, j) <= eps` and the
//! two timestamps differ by at most `tau`; higher simplices follow the flag
//! rule. Counts are tracked per dimension along a threshold grid.

mod bitset;
mod cliques;
mod witness;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::DistanceMatrix;
use crate::embed::{euclidean_distances, Embedding};
use crate::error::{Error, Result};

pub use bitset::BitSet;
pub use cliques::{
    clique_census, count_cliques, for_each_clique, CliqueCensus, IncrementalCounter, NeighborhoodGraph,
};
pub use witness::{
    lazy_witness_curve, lazy_witness_edge_births, maxmin_landmarks, maxmin_landmarks_from,
    LandmarkSet,
};

/// Time-delay limit between two points that may share an edge.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Tau {
    Finite(u32),
    #[default]
    Infinite,
}

impl Tau {
    #[inline]
    pub fn admits(self, a: u32, b: u32) -> bool {
        match self {
            Tau::Infinite => true,
            Tau::Finite(t) => a.abs_diff(b) <= t,
        }
    }
}

impl fmt::Display for Tau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tau::Finite(t) => write!(f, "{t}"),
            Tau::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Tau {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") || s == "∞" {
            return Ok(Tau::Infinite);
        }
        s.parse()
            .map(Tau::Finite)
            .map_err(|_| Error::invalid(format!("tau must be a non-negative integer or `inf`, got `{s}`")))
    }
}

impl Serialize for Tau {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Tau::Finite(t) => s.serialize_u32(*t),
            Tau::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Tau {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u32),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(t) => Ok(Tau::Finite(t)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Threshold grid, time limit and top simplex dimension for a filtration.
#[derive(Debug, Clone, PartialEq)]
pub struct FiltrationParams {
    grid: Vec<f64>,
    pub tau: Tau,
    pub max_dim: usize,
}

pub const DEFAULT_MAX_DIM: usize = 7;
pub const DEFAULT_GRID_STEPS: usize = 100;

impl FiltrationParams {
    pub fn new(grid: Vec<f64>, tau: Tau, max_dim: usize) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::invalid("filtration grid is empty"));
        }
        if grid.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::invalid("filtration thresholds must be finite and non-negative"));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("filtration grid must be strictly increasing"));
        }
        if max_dim < 1 {
            return Err(Error::invalid("max_dim must be at least 1"));
        }
        Ok(Self { grid, tau, max_dim })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }
}

/// How a pipeline stage picks thresholds for a matrix it has not seen yet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    /// `steps` uniform thresholds up to each matrix's own maximum distance.
    Uniform(usize),
    Fixed(Vec<f64>),
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Uniform(DEFAULT_GRID_STEPS)
    }
}

impl GridSpec {
    pub fn resolve(&self, d: &DistanceMatrix) -> Result<Vec<f64>> {
        match self {
            GridSpec::Uniform(steps) => default_grid(d, *steps),
            GridSpec::Fixed(g) => Ok(g.clone()),
        }
    }

    pub fn params(&self, d: &DistanceMatrix, tau: Tau, max_dim: usize) -> Result<FiltrationParams> {
        FiltrationParams::new(self.resolve(d)?, tau, max_dim)
    }
}

/// `steps` uniform thresholds from 0 (exclusive) to the largest off-diagonal
/// distance (inclusive). An all-zero matrix gives `{0}`.
pub fn default_grid(d: &DistanceMatrix, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::invalid(format!("grid needs at least 2 steps, got {steps}")));
    }
    let max = d.max_off_diagonal();
    if max == 0.0 {
        return Ok(vec![0.0]);
    }
    Ok((1..=steps)
        .map(|s| max * (s as f64 / steps as f64))
        .collect())
}

/// Points in an embedding together with their ordinal timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedPointCloud {
    pub points: Embedding,
    pub timestamps: Vec<u32>,
}

impl TimedPointCloud {
    pub fn new(points: Embedding, timestamps: Vec<u32>) -> Result<Self> {
        if timestamps.len() != points.len() {
            return Err(Error::invalid(format!(
                "{} timestamps for {} points",
                timestamps.len(),
                points.len()
            )));
        }
        Ok(Self { points, timestamps })
    }

    pub fn distances(&self) -> DistanceMatrix {
        euclidean_distances(&self.points)
    }
}

fn check_timestamps(n: usize, timestamps: &[u32], tau: Tau) -> Result<()> {
    if timestamps.len() != n && !(timestamps.is_empty() && tau == Tau::Infinite) {
        return Err(Error::invalid(format!(
            "{} timestamps for {n} points",
            timestamps.len()
        )));
    }
    Ok(())
}

/// Graph of all admissible pairs within `eps`.
pub fn neighborhood_graph(d: &DistanceMatrix, timestamps: &[u32], eps: f64, tau: Tau) -> NeighborhoodGraph {
    EdgeFiltration::rips(d, timestamps, tau)
        .expect("timestamps must match the distance matrix")
        .graph_at(eps)
}

/// Birth value of every vertex pair; `+inf` marks pairs that never connect.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFiltration {
    n: usize,
    /// `(birth, i, j)` with `i < j`, sorted by birth then indices.
    edges: Vec<(f64, usize, usize)>,
}

impl EdgeFiltration {
    /// Vietoris-Rips births: `d(i, j)` when the time limit admits the pair.
    pub fn rips(d: &DistanceMatrix, timestamps: &[u32], tau: Tau) -> Result<Self> {
        let n = d.len();
        check_timestamps(n, timestamps, tau)?;
        let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                if tau == Tau::Infinite || tau.admits(timestamps[i], timestamps[j]) {
                    edges.push((d.get(i, j), i, j));
                }
            }
        }
        Ok(Self::from_edges(n, edges))
    }

    pub fn from_edges(n: usize, mut edges: Vec<(f64, usize, usize)>) -> Self {
        edges.retain(|e| e.0.is_finite());
        for e in &mut edges {
            if e.1 > e.2 {
                std::mem::swap(&mut e.1, &mut e.2);
            }
        }
        edges.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        Self { n, edges }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn edges(&self) -> &[(f64, usize, usize)] {
        &self.edges
    }

    pub fn birth(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges
            .iter()
            .find(|e| e.1 == a && e.2 == b)
            .map_or(f64::INFINITY, |e| e.0)
    }

    pub fn graph_at(&self, eps: f64) -> NeighborhoodGraph {
        let mut g = NeighborhoodGraph::empty(self.n);
        for &(b, i, j) in &self.edges {
            if b > eps {
                break;
            }
            g.add_edge(i, j);
        }
        g
    }

    /// Per-dimension simplex counts at every threshold of `fp`, by
    /// incremental edge insertion.
    pub fn count_curve(&self, fp: &FiltrationParams) -> SimplexCountCurve {
        let mut counter = IncrementalCounter::new(self.n, fp.max_dim);
        let mut per_step: Vec<Vec<u128>> = Vec::with_capacity(fp.grid.len());
        let mut next = 0;
        for &eps in &fp.grid {
            while next < self.edges.len() && self.edges[next].0 <= eps {
                counter.add_edge(self.edges[next].1, self.edges[next].2);
                next += 1;
            }
            per_step.push(counter.counts().to_vec());
        }
        SimplexCountCurve::from_steps(fp.grid.clone(), &per_step, fp.max_dim)
    }
}

/// `counts[n][s]`: number of `n`-simplices present at threshold `grid[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexCountCurve {
    grid: Vec<f64>,
    pub counts: Vec<Vec<u128>>,
    /// Sum over the grid of each dimension's counts.
    pub cumulative: Vec<u128>,
}

impl SimplexCountCurve {
    fn from_steps(grid: Vec<f64>, per_step: &[Vec<u128>], max_dim: usize) -> Self {
        let counts: Vec<Vec<u128>> = (0..=max_dim)
            .map(|n| per_step.iter().map(|c| c[n]).collect())
            .collect();
        let cumulative = counts.iter().map(|row| row.iter().sum()).collect();
        Self {
            grid,
            counts,
            cumulative,
        }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn max_dim(&self) -> usize {
        self.counts.len() - 1
    }

    /// Long form: `dim,step,epsilon,count`.
    pub fn write_long_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["dim", "step", "epsilon", "count"])?;
        for (n, row) in self.counts.iter().enumerate() {
            for (s, c) in row.iter().enumerate() {
                w.write_record([n.to_string(), s.to_string(), self.grid[s].to_string(), c.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `dim,cumulative`.
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["dim", "cumulative"])?;
        for (n, c) in self.cumulative.iter().enumerate() {
            w.write_record([n.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Vietoris-Rips count curve of a distance matrix under the time limit.
pub fn distance_count_curve(d: &DistanceMatrix, timestamps: &[u32], fp: &FiltrationParams) -> Result<SimplexCountCurve> {
    Ok(EdgeFiltration::rips(d, timestamps, fp.tau)?.count_curve(fp))
}

/// Vietoris-Rips count curve of an embedded, timestamped point cloud.
pub fn simplex_count_curve(pc: &TimedPointCloud, fp: &FiltrationParams) -> Result<SimplexCountCurve> {
    distance_count_curve(&pc.distances(), &pc.timestamps, fp)
}
