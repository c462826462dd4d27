//! Slow reference implementations. Plain std, square row-major matrices.
#![allow(dead_code)]

use std::collections::HashMap;

pub fn at(d: &[f64], n: usize, i: usize, j: usize) -> f64 {
    d[i * n + j]
}

/// Every vertex subset, checked pair by pair. `counts[k]` = k-simplices.
pub fn subset_clique_counts(n: usize, adj: impl Fn(usize, usize) -> bool, max_dim: usize) -> Vec<u128> {
    assert!(n <= 20);
    let mut counts = vec![0u128; max_dim + 1];
    for mask in 1u32..(1u32 << n) {
        let k = mask.count_ones() as usize;
        if k > max_dim + 1 {
            continue;
        }
        let vs: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        let ok = vs.iter().enumerate().all(|(a, &i)| vs[a + 1..].iter().all(|&j| adj(i, j)));
        if ok {
            counts[k - 1] += 1;
        }
    }
    counts
}

/// `curve[s][k]`, rebuilding the graph at every threshold.
pub fn naive_curve(
    d: &[f64],
    n: usize,
    ts: Option<&[u32]>,
    tau: Option<u32>,
    grid: &[f64],
    max_dim: usize,
) -> Vec<Vec<u128>> {
    grid.iter()
        .map(|&eps| {
            subset_clique_counts(
                n,
                |i, j| {
                    let time_ok = match (ts, tau) {
                        (Some(t), Some(lim)) => t[i].abs_diff(t[j]) <= lim,
                        _ => true,
                    };
                    at(d, n, i, j) <= eps && time_ok
                },
                max_dim,
            )
        })
        .collect()
}

pub fn euler_from_counts(counts: &[u128]) -> i128 {
    counts
        .iter()
        .enumerate()
        .map(|(k, &c)| if k % 2 == 0 { c as i128 } else { -(c as i128) })
        .sum()
}

pub fn euler_from_betti(betti: &[u64]) -> i128 {
    betti
        .iter()
        .enumerate()
        .map(|(k, &b)| if k % 2 == 0 { b as i128 } else { -(b as i128) })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub vertices: Vec<usize>,
    pub birth: f64,
}

/// Flag complex up to `top_dim`, births at the longest edge, ordered by
/// birth, dimension, then vertices.
pub fn flag_cells(d: &[f64], n: usize, ts: Option<&[u32]>, tau: Option<u32>, eps_max: f64, top_dim: usize) -> Vec<Cell> {
    let mut cells = Vec::new();
    for mask in 1u32..(1u32 << n) {
        let k = mask.count_ones() as usize;
        if k > top_dim + 1 {
            continue;
        }
        let vs: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        let mut birth = 0.0f64;
        let mut ok = true;
        for (a, &i) in vs.iter().enumerate() {
            for &j in &vs[a + 1..] {
                let dij = at(d, n, i, j);
                let time_ok = match (ts, tau) {
                    (Some(t), Some(lim)) => t[i].abs_diff(t[j]) <= lim,
                    _ => true,
                };
                if dij > eps_max || !time_ok {
                    ok = false;
                }
                birth = birth.max(dij);
            }
        }
        if ok {
            cells.push(Cell { vertices: vs, birth });
        }
    }
    cells.sort_by(|a, b| {
        a.birth
            .total_cmp(&b.birth)
            .then(a.vertices.len().cmp(&b.vertices.len()))
            .then(a.vertices.cmp(&b.vertices))
    });
    cells
}

/// `(dim, birth, death)`, positive-length and essential bars in dims
/// `<= hmax`, sorted.
pub fn naive_barcode(cells: &[Cell], hmax: usize) -> Vec<(usize, f64, f64)> {
    let index: HashMap<&[usize], usize> = cells.iter().enumerate().map(|(i, c)| (c.vertices.as_slice(), i)).collect();
    let mut cols: Vec<Vec<usize>> = cells
        .iter()
        .map(|c| {
            if c.vertices.len() < 2 {
                return Vec::new();
            }
            let mut col: Vec<usize> = (0..c.vertices.len())
                .map(|skip| {
                    let face: Vec<usize> = c.vertices.iter().enumerate().filter(|(k, _)| *k != skip).map(|(_, v)| *v).collect();
                    index[face.as_slice()]
                })
                .collect();
            col.sort_unstable();
            col
        })
        .collect();
    let mut paired = vec![false; cells.len()];
    let mut bars = Vec::new();
    for j in 0..cells.len() {
        loop {
            let Some(&low) = cols[j].last() else { break };
            let Some(k) = (0..j).find(|&k| cols[k].last() == Some(&low)) else { break };
            let other = cols[k].clone();
            let mut merged: Vec<usize> = cols[j].iter().copied().filter(|x| !other.contains(x)).collect();
            merged.extend(other.iter().copied().filter(|x| !cols[j].contains(x)));
            merged.sort_unstable();
            cols[j] = merged;
        }
        if let Some(&low) = cols[j].last() {
            paired[low] = true;
            paired[j] = true;
            let dim = cells[low].vertices.len() - 1;
            if dim <= hmax && cells[j].birth > cells[low].birth {
                bars.push((dim, cells[low].birth, cells[j].birth));
            }
        }
    }
    for (i, c) in cells.iter().enumerate() {
        let dim = c.vertices.len() - 1;
        if !paired[i] && dim <= hmax {
            bars.push((dim, c.birth, f64::INFINITY));
        }
    }
    bars.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    bars
}

fn rank_gf2(mut rows: Vec<Vec<u64>>) -> usize {
    let mut rank = 0;
    let width = rows.first().map_or(0, Vec::len) * 64;
    for bit in 0..width {
        let (w, b) = (bit / 64, bit % 64);
        let Some(p) = (rank..rows.len()).find(|&r| rows[r][w] >> b & 1 == 1) else { continue };
        rows.swap(rank, p);
        let pivot = rows[rank].clone();
        for r in 0..rows.len() {
            if r != rank && rows[r][w] >> b & 1 == 1 {
                for (x, y) in rows[r].iter_mut().zip(&pivot) {
                    *x ^= y;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Betti numbers of the cells born at or before `eps`, by boundary ranks.
pub fn betti_by_rank(cells: &[Cell], eps: f64) -> Vec<u64> {
    let live: Vec<&Cell> = cells.iter().filter(|c| c.birth <= eps).collect();
    let top = live.iter().map(|c| c.vertices.len() - 1).max().unwrap_or(0);
    let by_dim: Vec<Vec<&Cell>> = (0..=top).map(|k| live.iter().copied().filter(|c| c.vertices.len() == k + 1).collect()).collect();
    let rank_of = |k: usize| -> usize {
        if k == 0 || k > top || by_dim[k].is_empty() || by_dim[k - 1].is_empty() {
            return 0;
        }
        let idx: HashMap<&[usize], usize> = by_dim[k - 1].iter().enumerate().map(|(i, c)| (c.vertices.as_slice(), i)).collect();
        let words = by_dim[k - 1].len().div_ceil(64);
        let rows = by_dim[k]
            .iter()
            .map(|c| {
                let mut row = vec![0u64; words];
                for skip in 0..c.vertices.len() {
                    let face: Vec<usize> = c.vertices.iter().enumerate().filter(|(s, _)| *s != skip).map(|(_, v)| *v).collect();
                    let f = idx[face.as_slice()];
                    row[f / 64] |= 1 << (f % 64);
                }
                row
            })
            .collect();
        rank_gf2(rows)
    };
    (0..=top).map(|k| (by_dim[k].len() - rank_of(k) - rank_of(k + 1)) as u64).collect()
}

/// Lazy witness births by scanning every witness for every landmark pair.
pub fn witness_births(d: &[f64], n: usize, landmarks: &[usize], nu: usize) -> Vec<(usize, usize, f64)> {
    let slack: Vec<f64> = (0..n)
        .map(|x| {
            if nu == 0 {
                return 0.0;
            }
            let mut row: Vec<f64> = landmarks.iter().map(|&l| at(d, n, l, x)).collect();
            row.sort_by(f64::total_cmp);
            row[nu - 1]
        })
        .collect();
    let m = landmarks.len();
    let mut out = Vec::new();
    for a in 0..m {
        for b in (a + 1)..m {
            let best = (0..n)
                .map(|x| at(d, n, landmarks[a], x).max(at(d, n, landmarks[b], x)) - slack[x])
                .fold(f64::INFINITY, f64::min);
            out.push((a, b, best.max(0.0)));
        }
    }
    out
}

/// Maxmin from `first`, recomputing every candidate's distance to the
/// chosen set each round. Ties go to the lowest index.
pub fn maxmin(d: &[f64], n: usize, first: usize, m: usize) -> (Vec<usize>, Vec<f64>) {
    let mut chosen = vec![first];
    let mut radii = vec![f64::INFINITY];
    while chosen.len() < m {
        let mut best: Option<(usize, f64)> = None;
        for x in 0..n {
            if chosen.contains(&x) {
                continue;
            }
            let r = chosen.iter().map(|&c| at(d, n, c, x)).fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((x, r));
            }
        }
        let (x, r) = best.unwrap();
        chosen.push(x);
        radii.push(r);
    }
    (chosen, radii)
}

/// Two-pass Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean and sample standard deviation, two passes.
pub fn zscore_params(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Single,
    Average,
    Complete,
}

/// Agglomerative clustering recomputing every cluster distance from the
/// leaves each round. Returns `(left leaves, right leaves, height)`, each
/// side sorted, left holding the smaller leaf.
pub fn naive_agglomerative(d: &[f64], n: usize, link: Link) -> Vec<(Vec<usize>, Vec<usize>, f64)> {
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut out = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let pairs: Vec<f64> = clusters[a].iter().flat_map(|&i| clusters[b].iter().map(move |&j| at(d, n, i, j))).collect();
                let h = match link {
                    Link::Single => pairs.iter().copied().fold(f64::INFINITY, f64::min),
                    Link::Complete => pairs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    Link::Average => pairs.iter().sum::<f64>() / pairs.len() as f64,
                };
                let lo = clusters[a][0].min(clusters[b][0]);
                let hi = clusters[a][0].max(clusters[b][0]);
                let better = match best {
                    None => true,
                    Some((bh, blo, bhi, _, _)) => h < bh || (h == bh && (lo, hi) < (blo, bhi)),
                };
                if better {
                    best = Some((h, lo, hi, a, b));
                }
            }
        }
        let (h, _, _, a, b) = best.unwrap();
        let right = clusters.remove(b);
        let left = clusters[a].clone();
        let (l, r) = if left[0] < right[0] { (left.clone(), right.clone()) } else { (right.clone(), left.clone()) };
        out.push((l, r, h));
        clusters[a].extend(right);
        clusters[a].sort_unstable();
    }
    out
}

/// Prim's MST weights, ascending.
pub fn mst_weights(d: &[f64], n: usize) -> Vec<f64> {
    let mut inside = vec![false; n];
    let mut dist = vec![f64::INFINITY; n];
    dist[0] = 0.0;
    let mut weights = Vec::new();
    for step in 0..n {
        let v = (0..n).filter(|&v| !inside[v]).min_by(|&a, &b| dist[a].total_cmp(&dist[b])).unwrap();
        inside[v] = true;
        if step > 0 {
            weights.push(dist[v]);
        }
        for u in 0..n {
            if !inside[u] {
                dist[u] = dist[u].min(at(d, n, v, u));
            }
        }
    }
    weights.sort_by(f64::total_cmp);
    weights
}

/// Intervals of `[lo, hi]` containing `x` for `r` intervals with overlap `g`.
pub fn stab(lo: f64, hi: f64, r: usize, g: f64, x: f64) -> Vec<usize> {
    if hi <= lo {
        return vec![0];
    }
    let len = (hi - lo) / (r as f64 - (r as f64 - 1.0) * g);
    (0..r)
        .filter(|&k| {
            let a = lo + k as f64 * len * (1.0 - g);
            let b = if k + 1 == r { hi } else { a + len };
            a <= x && x <= b
        })
        .collect()
}
