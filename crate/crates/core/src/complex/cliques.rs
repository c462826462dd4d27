//! Clique enumeration and counting on neighborhood graphs.
//!
//! Counting uses the pivoting recursion over a degeneracy ordering: every
//! clique is represented by exactly one root-to-leaf path as a set of
//! "held" vertices (always in the clique) plus a set of "pivot" vertices
//! (each optionally in the clique), so a leaf with `h` held and `p` pivot
//! vertices accounts for `C(p, k - h)` cliques of size `k` without listing
//! them. Dense graphs collapse into a handful of leaves.

use rayon::prelude::*;

use super::bitset::{words_for, BitSet};

/// Undirected simple graph stored as adjacency bit sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodGraph {
    adj: Vec<BitSet>,
}

impl NeighborhoodGraph {
    pub fn empty(n: usize) -> Self {
        Self {
            adj: vec![BitSet::new(n); n],
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                g.add_edge(i, j);
            }
        }
        g
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = Self::empty(n);
        for (a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    /// Self-loops are ignored.
    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a != b {
            self.adj[a].insert(b);
            self.adj[b].insert(a);
        }
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(b)
    }

    pub fn neighbors(&self, v: usize) -> &BitSet {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BitSet::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, nb) in self.adj.iter().enumerate() {
            out.extend(nb.iter().filter(|&b| b > a).map(|b| (a, b)));
        }
        out
    }

    /// Smallest-last ordering; ties go to the lowest index.
    pub fn degeneracy_order(&self) -> Vec<usize> {
        let n = self.len();
        let mut deg: Vec<usize> = (0..n).map(|v| self.degree(v)).collect();
        let mut removed = vec![false; n];
        let mut order = Vec::with_capacity(n);
        for _ in 0..n {
            let v = (0..n)
                .filter(|&v| !removed[v])
                .min_by_key(|&v| (deg[v], v))
                .expect("vertices remain");
            removed[v] = true;
            order.push(v);
            for u in self.adj[v].iter() {
                if !removed[u] {
                    deg[u] -= 1;
                }
            }
        }
        order
    }

    /// For each vertex in degeneracy order, its neighbors later in that order.
    fn forward_neighborhoods(&self) -> Vec<(usize, BitSet)> {
        let order = self.degeneracy_order();
        let mut later = BitSet::new(self.len());
        let mut out = Vec::with_capacity(order.len());
        for &v in order.iter().rev() {
            let mut fwd = BitSet::new(self.len());
            self.adj[v].intersect_into(&later, &mut fwd);
            out.push((v, fwd));
            later.insert(v);
        }
        out.reverse();
        out
    }
}

/// Binomial coefficients `C(p, j)` for `p <= n`, `j <= kmax`.
struct Binomials {
    kmax: usize,
    table: Vec<u128>,
}

impl Binomials {
    fn new(n: usize, kmax: usize) -> Self {
        let w = kmax + 1;
        let mut table = vec![0u128; (n + 1) * w];
        for p in 0..=n {
            table[p * w] = 1;
            for j in 1..=kmax.min(p) {
                let above = if j < p { table[(p - 1) * w + j] } else { 0 };
                table[p * w + j] = table[(p - 1) * w + j - 1] + above;
            }
        }
        Self { kmax, table }
    }

    #[inline]
    fn get(&self, p: usize, j: usize) -> u128 {
        self.table[p * (self.kmax + 1) + j]
    }
}

struct PivotCounter<'a> {
    adj: &'a [BitSet],
    binom: &'a Binomials,
    /// Largest clique size of interest (`max_dim + 1`).
    kmax: usize,
    /// `counts[k - 1]` = number of `k`-cliques.
    counts: Vec<u128>,
    words: usize,
    /// Spare sets, reused across recursion nodes.
    pool: Vec<BitSet>,
}

impl PivotCounter<'_> {
    fn take(&mut self) -> BitSet {
        self.pool.pop().unwrap_or_else(|| BitSet::with_words(self.words))
    }

    fn leaf(&mut self, held: usize, pivots: usize) {
        for j in 0..=pivots {
            let k = held + j;
            if k > self.kmax {
                break;
            }
            self.counts[k - 1] += self.binom.get(pivots, j);
        }
    }

    fn recurse(&mut self, mut cand: BitSet, held: usize, pivots: usize) {
        if held == self.kmax {
            self.counts[held - 1] += 1;
            self.pool.push(cand);
            return;
        }
        if cand.is_empty() {
            self.leaf(held, pivots);
            self.pool.push(cand);
            return;
        }
        let mut pivot = usize::MAX;
        let mut best = 0;
        for u in cand.iter() {
            let d = self.adj[u].intersection_len(&cand);
            if pivot == usize::MAX || d > best {
                pivot = u;
                best = d;
            }
        }
        let mut rest = self.take();
        cand.difference_into(&self.adj[pivot], &mut rest);
        rest.remove(pivot);

        let mut inner = self.take();
        cand.intersect_into(&self.adj[pivot], &mut inner);
        self.recurse(inner, held, pivots + 1);

        if held + 1 == self.kmax {
            self.counts[held] += rest.len() as u128;
        } else {
            for v in rest.iter() {
                let mut child = self.take();
                cand.intersect_into(&self.adj[v], &mut child);
                self.recurse(child, held + 1, pivots);
                cand.remove(v);
            }
        }
        self.pool.push(rest);
        self.pool.push(cand);
    }
}

const PARALLEL_MIN_VERTICES: usize = 48;

/// Number of `(n + 1)`-cliques (`n`-simplices of the flag complex) for
/// `n = 0..=max_dim`.
pub fn count_cliques(g: &NeighborhoodGraph, max_dim: usize) -> Vec<u128> {
    let kmax = max_dim + 1;
    let n = g.len();
    let binom = Binomials::new(n, kmax);
    let roots = g.forward_neighborhoods();
    let count_root = |(_, fwd): &(usize, BitSet)| {
        let mut c = PivotCounter {
            adj: &g.adj,
            binom: &binom,
            kmax,
            counts: vec![0; kmax],
            words: words_for(n),
            pool: Vec::new(),
        };
        c.recurse(fwd.clone(), 1, 0);
        c.counts
    };
    let add = |mut a: Vec<u128>, b: Vec<u128>| {
        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        a
    };
    if n >= PARALLEL_MIN_VERTICES {
        roots
            .par_iter()
            .map(count_root)
            .reduce(|| vec![0; kmax], add)
    } else {
        roots.iter().map(count_root).fold(vec![0; kmax], add)
    }
}

/// Clique counts of a graph that only gains edges.
///
/// Every clique is born with its last edge, so adding `(u, v)` adds exactly
/// the cliques of the common neighborhood of `u` and `v`, each extended by
/// the pair.
pub struct IncrementalCounter {
    graph: NeighborhoodGraph,
    binom: Binomials,
    kmax: usize,
    counts: Vec<u128>,
}

impl IncrementalCounter {
    pub fn new(n: usize, max_dim: usize) -> Self {
        let kmax = max_dim + 1;
        let mut counts = vec![0; kmax];
        counts[0] = n as u128;
        Self {
            graph: NeighborhoodGraph::empty(n),
            binom: Binomials::new(n, kmax),
            kmax,
            counts,
        }
    }

    /// Returns false if the edge was already present or is a loop.
    pub fn add_edge(&mut self, u: usize, v: usize) -> bool {
        if u == v || self.graph.has_edge(u, v) {
            return false;
        }
        let words = words_for(self.graph.len());
        let mut common = BitSet::with_words(words);
        self.graph.adj[u].intersect_into(&self.graph.adj[v], &mut common);
        let mut c = PivotCounter {
            adj: &self.graph.adj,
            binom: &self.binom,
            kmax: self.kmax,
            counts: std::mem::take(&mut self.counts),
            words,
            pool: Vec::new(),
        };
        c.recurse(common, 2, 0);
        self.counts = c.counts;
        self.graph.add_edge(u, v);
        true
    }

    /// `counts()[n]` = number of `n`-simplices.
    pub fn counts(&self) -> &[u128] {
        &self.counts
    }

    pub fn graph(&self) -> &NeighborhoodGraph {
        &self.graph
    }
}

/// Visit every clique with at most `max_dim + 1` vertices. Vertices are
/// passed sorted ascending.
pub fn for_each_clique(g: &NeighborhoodGraph, max_dim: usize, mut f: impl FnMut(&[usize])) {
    fn extend(
        g: &NeighborhoodGraph,
        clique: &mut Vec<usize>,
        cand: &BitSet,
        kmax: usize,
        scratch: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]),
    ) {
        scratch.clear();
        scratch.extend_from_slice(clique);
        scratch.sort_unstable();
        f(scratch);
        if clique.len() == kmax {
            return;
        }
        for u in cand.iter() {
            let mut next = BitSet::new(g.len());
            cand.intersect_into(g.neighbors(u), &mut next);
            next.retain_above(u);
            clique.push(u);
            extend(g, clique, &next, kmax, scratch, f);
            clique.pop();
        }
    }
    let kmax = max_dim + 1;
    let mut clique = Vec::with_capacity(kmax);
    let mut scratch = Vec::with_capacity(kmax);
    for (v, fwd) in g.forward_neighborhoods() {
        clique.push(v);
        extend(g, &mut clique, &fwd, kmax, &mut scratch, &mut f);
        clique.pop();
    }
}

/// Per-dimension counts, with simplices up to a cutoff dimension also listed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliqueCensus {
    pub counts: Vec<u128>,
    /// Every simplex of dimension `<= materialize_dim`, vertices sorted.
    pub simplices: Vec<Vec<usize>>,
}

/// Count cliques up to `max_dim`, listing only those up to `materialize_dim`.
pub fn clique_census(g: &NeighborhoodGraph, max_dim: usize, materialize_dim: usize) -> CliqueCensus {
    let mut simplices = Vec::new();
    for_each_clique(g, materialize_dim.min(max_dim), |c| simplices.push(c.to_vec()));
    simplices.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    CliqueCensus {
        counts: count_cliques(g, max_dim),
        simplices,
    }
}
