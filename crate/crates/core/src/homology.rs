//! Persistent homology over Z/2 for temporally constrained flag filtrations,
//! plus Betti curves and summary features derived from the barcode.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::complex::{for_each_clique, EdgeFiltration, FiltrationParams, TimedPointCloud};
use crate::data::DistanceMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_HOMOLOGY_MAX_DIM: usize = 2;
pub const DEFAULT_SIMPLEX_BUDGET: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    /// Sorted ascending.
    pub vertices: Vec<usize>,
    pub birth: f64,
}

impl Simplex {
    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }
}

/// Simplices ordered by `(birth, dimension, vertices)`; faces precede cofaces.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredComplex {
    simplices: Vec<Simplex>,
    homology_max_dim: usize,
}

impl FilteredComplex {
    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn homology_max_dim(&self) -> usize {
        self.homology_max_dim
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    /// Assemble from arbitrary simplices; sorts and checks the face condition.
    pub fn from_simplices(mut simplices: Vec<Simplex>, homology_max_dim: usize) -> Result<Self> {
        for s in &mut simplices {
            s.vertices.sort_unstable();
        }
        sort_filtration(&mut simplices);
        let index = face_index(&simplices);
        for s in &simplices {
            if s.vertices.len() < 2 {
                continue;
            }
            for face in faces(&s.vertices) {
                match index.get(&face) {
                    Some(&f) if simplices[f].birth <= s.birth => {}
                    _ => {
                        return Err(Error::invalid(format!(
                            "face {face:?} of {:?} is missing or born later",
                            s.vertices
                        )))
                    }
                }
            }
        }
        Ok(Self {
            simplices,
            homology_max_dim,
        })
    }
}

fn sort_filtration(simplices: &mut [Simplex]) {
    simplices.sort_by(|a, b| {
        a.birth
            .total_cmp(&b.birth)
            .then(a.vertices.len().cmp(&b.vertices.len()))
            .then_with(|| a.vertices.cmp(&b.vertices))
    });
}

fn face_index(simplices: &[Simplex]) -> HashMap<Vec<usize>, usize> {
    simplices
        .iter()
        .enumerate()
        .map(|(i, s)| (s.vertices.clone(), i))
        .collect()
}

fn faces(vertices: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    (0..vertices.len()).map(move |skip| {
        vertices
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != skip)
            .map(|(_, v)| *v)
            .collect()
    })
}

/// Flag filtration of `d` up to dimension `homology_max_dim + 1`, truncated
/// at the last grid threshold. A simplex is born at its longest edge.
pub fn filtered_complex_from_distances(
    d: &DistanceMatrix,
    timestamps: &[u32],
    fp: &FiltrationParams,
    homology_max_dim: usize,
    budget: usize,
) -> Result<FilteredComplex> {
    let edges = EdgeFiltration::rips(d, timestamps, fp.tau)?;
    let eps_max = *fp.grid().last().expect("grid is nonempty");
    let graph = edges.graph_at(eps_max);
    let mut simplices = Vec::new();
    let mut over = 0usize;
    for_each_clique(&graph, homology_max_dim + 1, |c| {
        if simplices.len() >= budget {
            over += 1;
            return;
        }
        let mut birth = 0.0f64;
        for (a, &i) in c.iter().enumerate() {
            for &j in &c[a + 1..] {
                birth = birth.max(d.get(i, j));
            }
        }
        simplices.push(Simplex {
            vertices: c.to_vec(),
            birth,
        });
    });
    if over > 0 {
        return Err(Error::SimplexBudget {
            count: budget + over,
            limit: budget,
        });
    }
    sort_filtration(&mut simplices);
    Ok(FilteredComplex {
        simplices,
        homology_max_dim,
    })
}

pub fn build_filtered_complex(
    pc: &TimedPointCloud,
    fp: &FiltrationParams,
    homology_max_dim: usize,
    budget: usize,
) -> Result<FilteredComplex> {
    filtered_complex_from_distances(&pc.distances(), &pc.timestamps, fp, homology_max_dim, budget)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub dim: usize,
    pub birth: f64,
    /// `f64::INFINITY` for classes that never die.
    pub death: f64,
}

impl Interval {
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }

    /// Half-open `[birth, death)`.
    pub fn alive_at(&self, eps: f64) -> bool {
        self.birth <= eps && eps < self.death
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Barcode {
    pub intervals: Vec<Interval>,
}

/// Boundary matrix as sorted row-index columns.
pub fn boundary_columns(fc: &FilteredComplex) -> Vec<Vec<usize>> {
    let index = face_index(&fc.simplices);
    fc.simplices
        .iter()
        .map(|s| {
            if s.vertices.len() < 2 {
                return Vec::new();
            }
            let mut col: Vec<usize> = faces(&s.vertices).map(|f| index[&f]).collect();
            col.sort_unstable();
            col
        })
        .collect()
}

/// `a += b` over Z/2 for sorted columns.
fn add_column(a: &mut Vec<usize>, b: &[usize], scratch: &mut Vec<usize>) {
    scratch.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                scratch.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                scratch.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    scratch.extend_from_slice(&a[i..]);
    scratch.extend_from_slice(&b[j..]);
    std::mem::swap(a, scratch);
}

/// Persistence pairs `(birth simplex, death simplex)` and essential simplices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Pairing {
    pub pairs: Vec<(usize, usize)>,
    pub essential: Vec<usize>,
}

/// Column reduction with clearing, highest dimension first.
pub fn reduce_boundary(fc: &FilteredComplex) -> Pairing {
    let mut columns = boundary_columns(fc);
    let n = columns.len();
    let max_dim = fc.simplices.iter().map(Simplex::dim).max().unwrap_or(0);
    // pivot_owner[row] = column whose lowest one is `row`.
    let mut pivot_owner = vec![usize::MAX; n];
    let mut cleared = vec![false; n];
    let mut paired = vec![false; n];
    let mut pairs = Vec::new();
    let mut scratch = Vec::new();
    for dim in (1..=max_dim).rev() {
        for j in 0..n {
            if fc.simplices[j].dim() != dim || cleared[j] {
                continue;
            }
            let mut col = std::mem::take(&mut columns[j]);
            while let Some(&low) = col.last() {
                let owner = pivot_owner[low];
                if owner == usize::MAX {
                    break;
                }
                add_column(&mut col, &columns[owner], &mut scratch);
            }
            if let Some(&low) = col.last() {
                pivot_owner[low] = j;
                cleared[low] = true;
                paired[low] = true;
                paired[j] = true;
                pairs.push((low, j));
            }
            columns[j] = col;
        }
    }
    pairs.sort_unstable();
    let essential = (0..n).filter(|&i| !paired[i]).collect();
    Pairing { pairs, essential }
}

/// Barcode over Z/2. Zero-length intervals are dropped unless `keep_zero`.
pub fn reduce_persistence_with(fc: &FilteredComplex, keep_zero: bool) -> Barcode {
    let pairing = reduce_boundary(fc);
    let hmax = fc.homology_max_dim;
    let mut intervals = Vec::new();
    for (b, d) in pairing.pairs {
        let sb = &fc.simplices[b];
        if sb.dim() > hmax {
            continue;
        }
        let death = fc.simplices[d].birth;
        if keep_zero || death > sb.birth {
            intervals.push(Interval {
                dim: sb.dim(),
                birth: sb.birth,
                death,
            });
        }
    }
    for e in pairing.essential {
        let s = &fc.simplices[e];
        if s.dim() <= hmax {
            intervals.push(Interval {
                dim: s.dim(),
                birth: s.birth,
                death: f64::INFINITY,
            });
        }
    }
    intervals.sort_by(|a, b| {
        a.dim
            .cmp(&b.dim)
            .then(a.birth.total_cmp(&b.birth))
            .then(a.death.total_cmp(&b.death))
    });
    Barcode { intervals }
}

pub fn reduce_persistence(fc: &FilteredComplex) -> Barcode {
    reduce_persistence_with(fc, false)
}

fn fmt_death(d: f64) -> String {
    if d.is_infinite() {
        "inf".into()
    } else {
        d.to_string()
    }
}

impl Barcode {
    pub fn in_dim(&self, dim: usize) -> impl Iterator<Item = &Interval> {
        self.intervals.iter().filter(move |i| i.dim == dim)
    }

    /// `dim,birth,death` with `inf` for essential classes.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["dim", "birth", "death"])?;
        for i in &self.intervals {
            w.write_record([i.dim.to_string(), i.birth.to_string(), fmt_death(i.death)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Plot-ready `{"schema_version":1,"intervals":[{"dim","birth","death"}]}`;
    /// essential deaths are the string `"inf"`.
    pub fn to_json(&self) -> serde_json::Value {
        let intervals: Vec<_> = self
            .intervals
            .iter()
            .map(|i| {
                let death = if i.death.is_infinite() {
                    serde_json::Value::from("inf")
                } else {
                    serde_json::Value::from(i.death)
                };
                serde_json::json!({"dim": i.dim, "birth": i.birth, "death": death})
            })
            .collect();
        serde_json::json!({"schema_version": 1, "intervals": intervals})
    }
}

/// `betti[k][s]` = intervals of dimension `k` alive at `grid[s]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BettiCurve {
    pub grid: Vec<f64>,
    pub betti: Vec<Vec<u64>>,
}

pub fn betti_curve(b: &Barcode, grid: &[f64], homology_max_dim: usize) -> BettiCurve {
    let mut betti = vec![vec![0u64; grid.len()]; homology_max_dim + 1];
    for iv in &b.intervals {
        if iv.dim > homology_max_dim {
            continue;
        }
        for (s, &eps) in grid.iter().enumerate() {
            if iv.alive_at(eps) {
                betti[iv.dim][s] += 1;
            }
        }
    }
    BettiCurve {
        grid: grid.to_vec(),
        betti,
    }
}

/// Per-dimension summary of a Betti curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BettiFeatures {
    /// `sum_s betti[s] * (grid[s] - grid[s-1])`, with `grid[-1] = 0`.
    pub integral: f64,
    pub max: u64,
    pub last: u64,
}

pub fn betti_features(bc: &BettiCurve) -> Vec<BettiFeatures> {
    bc.betti
        .iter()
        .map(|row| {
            let mut prev = 0.0;
            let mut integral = 0.0;
            for (s, &b) in row.iter().enumerate() {
                let step = bc.grid[s] - prev;
                integral += b as f64 * step;
                prev = bc.grid[s];
            }
            BettiFeatures {
                integral,
                max: row.iter().copied().max().unwrap_or(0),
                last: row.last().copied().unwrap_or(0),
            }
        })
        .collect()
}

impl BettiCurve {
    /// Long form `dim,step,epsilon,betti`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["dim", "step", "epsilon", "betti"])?;
        for (k, row) in self.betti.iter().enumerate() {
            for (s, b) in row.iter().enumerate() {
                w.write_record([k.to_string(), s.to_string(), self.grid[s].to_string(), b.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
