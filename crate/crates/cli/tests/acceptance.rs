//! End-to-end acceptance checks. Each prints one PASS/FAIL line with its
//! runtime; a lock keeps them from running concurrently so the runtime
//! limits measure one check at a time.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sctsa_cli::run_from;
use sctsa_core::complex::{distance_count_curve, lazy_witness_curve, lazy_witness_edge_births, EdgeFiltration};
use sctsa_core::complexity::{mean_sc, null_ensemble};
use sctsa_core::homology::{betti_curve, filtered_complex_from_distances, reduce_persistence};
use sctsa_core::lineage::{hierarchical_cluster, row_distances, Dendrogram, FeatureTable, Linkage, Metric};
use sctsa_core::mapper::{assemble_graph, build_cover, cover_clusters, mapper, MapperConfig, MapperGraph};
use sctsa_core::synth::{generate, SynthConfig};
use sctsa_core::{
    classical_mds, complexity_by_group, correlation_distance, count_cliques, default_grid, euclidean_distances,
    maxmin_landmarks, normalized_complexity, permute_distances, ComplexityConfig, Correlation, CountPipeline,
    DistanceMatrix, FiltrationParams, FiltrationSource, GridSpec, NeighborhoodGraph, Tau,
};

static SERIAL: Mutex<()> = Mutex::new(());

/// Run `check` alone, print its verdict line and fail on a bad verdict or
/// an exceeded runtime.
fn criterion(id: &str, name: &str, limit: Option<Duration>, check: impl FnOnce() -> Result<String, String>) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let verdict = check();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed < l);
    let limit_text = limit.map_or_else(String::new, |l| format!(" / limit {:.0} s", l.as_secs_f64()));
    let (ok, detail) = match verdict {
        Ok(d) if in_time => (true, d),
        Ok(d) => (false, format!("{d}; too slow")),
        Err(d) => (false, d),
    };
    // Written past the test harness capture so passing checks report too.
    let _ = writeln!(
        std::io::stderr(),
        "{} criterion {id} ({name}): {detail} [{:.2} s{limit_text}]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    assert!(ok, "criterion {id} failed: {detail}");
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cloud(rng: &mut impl Rng, n: usize, dim: usize) -> DistanceMatrix {
    let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    DistanceMatrix::from_fn(n, |i, j| oracles::euclid(&pts[i], &pts[j])).unwrap()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn c01_clique_counts_match_subset_enumeration() {
    criterion("1", "clique-count oracle", secs(60), || {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for g in 0..200 {
            let n = rng.random_range(1..=15);
            let p = rng.random_range(0.1..0.95);
            let mut graph = NeighborhoodGraph::empty(n);
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random::<f64>() < p {
                        graph.add_edge(i, j);
                    }
                }
            }
            let got = count_cliques(&graph, 7);
            let want = oracles::subset_clique_counts(n, |i, j| graph.has_edge(i, j), 7);
            ensure(got == want, || format!("graph {g} (n={n}): {got:?} vs {want:?}"))?;
        }
        Ok("200 graphs, dims 0..=7 exact".into())
    });
}

#[test]
fn c02_euler_characteristic_consistency() {
    criterion("2", "Euler characteristic", secs(120), || {
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        let mut thresholds = 0;
        for c in 0..50 {
            let n = rng.random_range(2..=10);
            let d = cloud(&mut rng, n, 3);
            let top = (n - 1).max(1);
            let grid = default_grid(&d, 25).unwrap();
            let fp = FiltrationParams::new(grid.clone(), Tau::Infinite, top).unwrap();
            let counts = distance_count_curve(&d, &[], &fp).unwrap();
            let fc = filtered_complex_from_distances(&d, &[], &fp, top, 1 << 20).map_err(|e| e.to_string())?;
            let betti = betti_curve(&reduce_persistence(&fc), &grid, top);
            for s in 0..grid.len() {
                let cs: Vec<u128> = counts.counts.iter().map(|r| r[s]).collect();
                let bs: Vec<u64> = betti.betti.iter().map(|r| r[s]).collect();
                let (a, b) = (oracles::euler_from_counts(&cs), oracles::euler_from_betti(&bs));
                ensure(a == b, || format!("cloud {c} step {s}: counts {a} vs betti {b}"))?;
                thresholds += 1;
            }
        }
        Ok(format!("50 clouds, {thresholds} thresholds exact"))
    });
}

#[test]
fn c03_barcode_oracle() {
    criterion("3", "barcode oracle", secs(5), || {
        let pts: Vec<Vec<f64>> = (0..8)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 8.0;
                vec![a.cos(), a.sin()]
            })
            .collect();
        let d = DistanceMatrix::from_fn(8, |i, j| oracles::euclid(&pts[i], &pts[j])).unwrap();
        let fp = FiltrationParams::new(vec![d.max_off_diagonal()], Tau::Infinite, 2).unwrap();
        let b = reduce_persistence(&filtered_complex_from_distances(&d, &[], &fp, 1, 1 << 20).unwrap());
        let h1: Vec<_> = b.in_dim(1).filter(|i| i.persistence() > 0.0).collect();
        ensure(h1.len() == 1, || format!("{} positive H1 intervals", h1.len()))?;
        let want_birth = 2.0 * (PI / 8.0).sin();
        ensure((h1[0].birth - want_birth).abs() <= 1e-9, || format!("H1 birth {}", h1[0].birth))?;
        let cells = oracles::flag_cells(d.as_slice(), 8, None, None, d.max_off_diagonal(), 2);
        let naive: Vec<_> = oracles::naive_barcode(&cells, 1).into_iter().filter(|b| b.0 == 1).collect();
        ensure(naive.len() == 1 && naive[0].2 == h1[0].death, || {
            format!("H1 death {} vs naive {naive:?}", h1[0].death)
        })?;

        let line = DistanceMatrix::from_fn(5, |i, j| (i as f64 - j as f64).abs()).unwrap();
        let fp = FiltrationParams::new(vec![4.0], Tau::Infinite, 2).unwrap();
        let b = reduce_persistence(&filtered_complex_from_distances(&line, &[], &fp, 1, 1 << 20).unwrap());
        let deaths: Vec<f64> = b.in_dim(0).map(|i| i.death).collect();
        ensure(deaths == [1.0, 1.0, 1.0, 1.0, f64::INFINITY], || format!("collinear H0 deaths {deaths:?}"))?;
        Ok(format!("circle H1 [{:.12}, {:.12}); line H0 deaths {deaths:?}", h1[0].birth, h1[0].death))
    });
}

#[test]
fn c04_temporal_limits() {
    criterion("4", "temporal reductions", secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(104);
        for c in 0..20 {
            let n = 14;
            let d = cloud(&mut rng, n, 2);
            let ts: Vec<u32> = (0..n).map(|_| rng.random_range(0..5)).collect();
            let grid = default_grid(&d, 30).unwrap();
            let fp = FiltrationParams::new(grid.clone(), Tau::Infinite, 7).unwrap();
            let got = distance_count_curve(&d, &ts, &fp).unwrap();
            let rips = oracles::naive_curve(d.as_slice(), n, None, None, &grid, 7);
            for (s, row) in rips.iter().enumerate() {
                for k in 0..=7 {
                    ensure(got.counts[k][s] == row[k], || format!("cloud {c} tau=inf dim {k} step {s}"))?;
                }
            }
            let distinct: Vec<u32> = (0..n as u32).map(|i| i * 3 + 1).collect();
            let fp0 = FiltrationParams::new(grid, Tau::Finite(0), 7).unwrap();
            let zero = distance_count_curve(&d, &distinct, &fp0).unwrap();
            ensure(zero.counts[1..].iter().flatten().all(|&x| x == 0), || format!("cloud {c}: tau=0 has edges"))?;
            ensure(zero.counts[0].iter().all(|&x| x == n as u128), || format!("cloud {c}: tau=0 vertices"))?;
        }
        Ok("20 clouds: tau=inf equals Rips oracle, tau=0 vertices only".into())
    });
}

#[test]
fn c05_null_calibration() {
    criterion("5", "null calibration", secs(600), || {
        let n = 20;
        let reps = 50;
        let pipeline = CountPipeline {
            grid: GridSpec::default(),
            tau: Tau::Infinite,
            max_dim: 7,
            embed_dim: 2,
            source: FiltrationSource::Embedding,
            complex: Default::default(),
        };
        let mut sc: Vec<Vec<f64>> = vec![Vec::new(); 8];
        for r in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + r);
            let upper: Vec<f64> = (0..n * (n - 1) / 2).map(|_| rng.random_range(0.1..1.0)).collect();
            let d = DistanceMatrix::from_upper(n, &upper).unwrap();
            let data = pipeline.curve(&d, &[]).unwrap();
            let ens = null_ensemble(&d, &[], &pipeline, 20, 9000 + r).unwrap();
            let p = normalized_complexity("x", &data.cumulative, &ens, n).unwrap();
            for k in 1..=7 {
                if let Some(v) = p.sc[k] {
                    sc[k].push(v);
                }
            }
        }
        let mut parts = Vec::new();
        for (k, v) in sc.iter().enumerate().skip(1) {
            if v.is_empty() {
                parts.push(format!("SC_{k} undefined"));
                continue;
            }
            let m = v.len() as f64;
            let mean = v.iter().sum::<f64>() / m;
            let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0)).sqrt();
            let se = sd / m.sqrt();
            parts.push(format!("SC_{k} {mean:.3}±{se:.3}"));
            ensure((mean - 1.0).abs() <= 3.0 * se, || format!("SC_{k} mean {mean} outside 1 ± 3·{se}"))?;
        }
        Ok(parts.join(", "))
    });
}

#[test]
fn c06_permutation_preserves_multiset() {
    criterion("6", "permutation-null integrity", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(106);
        let d = cloud(&mut rng, 40, 3);
        let want = sorted(d.upper_triangle());
        for seed in 0..100 {
            let p = permute_distances(&d, seed);
            ensure(sorted(p.upper_triangle()) == want, || format!("seed {seed} changed the multiset"))?;
            ensure(p != d, || format!("seed {seed} left the matrix unchanged"))?;
        }
        Ok("100 permutations, sorted off-diagonal arrays equal".into())
    });
}

#[test]
fn c07_lazy_witness_oracle() {
    criterion("7a", "lazy-witness scan oracle", secs(30), || {
        let mut rng = ChaCha8Rng::seed_from_u64(107);
        let mut edges = 0;
        for c in 0..20 {
            let d = cloud(&mut rng, 25, 2);
            for nu in 0..=2 {
                let lm = maxmin_landmarks(&d, 6, nu, c).unwrap();
                let (idx, _) = oracles::maxmin(d.as_slice(), 25, lm.indices[0], 6);
                ensure(lm.indices == idx, || format!("cloud {c} nu {nu}: landmarks {:?} vs {idx:?}", lm.indices))?;
                let e = lazy_witness_edge_births(&d, &lm, &[], Tau::Infinite).unwrap();
                for (a, b, birth) in oracles::witness_births(d.as_slice(), 25, &lm.indices, nu) {
                    let got = e.birth(a, b);
                    ensure((got - birth).abs() <= 1e-12, || format!("cloud {c} nu {nu} edge ({a},{b}): {got} vs {birth}"))?;
                    edges += 1;
                }
            }
        }
        Ok(format!("{edges} edge births within 1e-12"))
    });
}

#[test]
fn c07_all_landmarks_reproduce_rips() {
    criterion("7b", "lazy witness with m = N, nu = 0 equals Rips", secs(30), || {
        let mut rng = ChaCha8Rng::seed_from_u64(117);
        let mut bad = Vec::new();
        for c in 0..20 {
            let n = 25;
            let d = cloud(&mut rng, n, 2);
            let lm = maxmin_landmarks(&d, n, 0, c).unwrap();
            let fp = FiltrationParams::new(default_grid(&d, 50).unwrap(), Tau::Infinite, 7).unwrap();
            let lw = lazy_witness_curve(&d, &lm, &fp, &[]).unwrap();
            let rips = distance_count_curve(&d, &[], &fp).unwrap();
            if lw.counts != rips.counts {
                let e = lazy_witness_edge_births(&d, &lm, &[], Tau::Infinite).unwrap();
                let r = EdgeFiltration::rips(&d, &[], Tau::Infinite).unwrap();
                let earlier = (0..n)
                    .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
                    .filter(|&(a, b)| e.birth(lm.indices[a], lm.indices[b]) != r.birth(lm.indices[a], lm.indices[b]))
                    .count();
                bad.push(format!("cloud {c}: {earlier} of {} edges born earlier than in Rips", n * (n - 1) / 2));
            }
        }
        ensure(bad.is_empty(), || {
            format!(
                "{} of 20 clouds differ ({}); a third point between two landmarks witnesses their edge before their distance",
                bad.len(),
                bad[0]
            )
        })?;
        Ok("20 clouds equal".into())
    });
}

fn member_sets(g: &MapperGraph) -> Vec<Vec<usize>> {
    g.nodes.iter().map(|n| n.members.clone()).collect()
}

fn edge_sets(g: &MapperGraph) -> BTreeSet<(Vec<usize>, Vec<usize>)> {
    g.edges
        .iter()
        .map(|e| {
            let (a, b) = (g.nodes[e.source].members.clone(), g.nodes[e.target].members.clone());
            if a < b { (a, b) } else { (b, a) }
        })
        .collect()
}

#[test]
fn c08_mapper_contracts() {
    criterion("8", "Mapper contracts", secs(60), || {
        let m = generate(&SynthConfig::default()).unwrap();
        let corr = correlation_distance(&m, Correlation::Pearson).unwrap();
        let lens = classical_mds(&corr, 2).unwrap();
        let d = euclidean_distances(&lens);
        let ts = m.timestamps();

        let cfg = MapperConfig::default();
        let full = mapper(&lens, &d, ts, &cfg).unwrap();
        let cover = build_cover(&lens, cfg.intervals, cfg.overlap).unwrap();
        let clusters = cover_clusters(&cover, &lens, &d, ts, Tau::Infinite, cfg.cut);
        let mut nerve_nodes: Vec<Vec<usize>> = clusters.iter().map(|c| c.members.clone()).collect();
        let mut nerve_edges = BTreeSet::new();
        for (i, a) in nerve_nodes.iter().enumerate() {
            for b in &nerve_nodes[i + 1..] {
                if a.iter().any(|x| b.binary_search(x).is_ok()) {
                    nerve_edges.insert(if a < b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) });
                }
            }
        }
        let mut got_nodes = member_sets(&full);
        got_nodes.sort();
        nerve_nodes.sort();
        ensure(got_nodes == nerve_nodes, || "tau=inf nodes differ from the cover clusters".into())?;
        ensure(edge_sets(&full) == nerve_edges, || "tau=inf edges differ from the nerve".into())?;
        ensure(
            edge_sets(&assemble_graph(&clusters, ts, Tau::Infinite)) == nerve_edges,
            || "assembled graph differs from the nerve".into(),
        )?;

        let g = mapper(&lens, &d, ts, &MapperConfig { tau: Tau::Finite(1), ..cfg }).unwrap();
        ensure(g.nodes.iter().all(|n| n.span() <= 1), || "a tau=1 node spans more than 1".into())?;
        for e in &g.edges {
            let (a, b) = (&g.nodes[e.source], &g.nodes[e.target]);
            let span = a.time_max.max(b.time_max) - a.time_min.min(b.time_min);
            ensure(span <= 1, || format!("edge {}-{} spans {span}", e.source, e.target))?;
        }
        // Downstream of the branch point: nodes from timestamp 5 on, linked
        // only through downstream nodes.
        let branch = |i: usize| m.cell_types()[i].strip_prefix("branch_").and_then(|s| s.chars().next());
        let majority: Vec<Option<char>> = g
            .nodes
            .iter()
            .map(|n| {
                let a = n.members.iter().filter(|&&i| branch(i) == Some('a')).count();
                let b = n.members.iter().filter(|&&i| branch(i) == Some('b')).count();
                match (a + b == 0, a >= b) {
                    (true, _) => None,
                    (false, true) => Some('a'),
                    (false, false) => Some('b'),
                }
            })
            .collect();
        let down: Vec<usize> = (0..g.nodes.len()).filter(|&i| g.nodes[i].time_min >= 5).collect();
        let mut parent: Vec<usize> = (0..g.nodes.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &g.edges {
            if g.nodes[e.source].time_min >= 5 && g.nodes[e.target].time_min >= 5 {
                let (ra, rb) = (find(&mut parent, e.source), find(&mut parent, e.target));
                parent[ra] = rb;
            }
        }
        let mut comps: BTreeMap<usize, BTreeSet<char>> = BTreeMap::new();
        for &i in &down {
            let r = find(&mut parent, i);
            let entry = comps.entry(r).or_default();
            entry.extend(majority[i]);
        }
        let mixed = comps.values().filter(|s| s.len() > 1).count();
        let a_comps = comps.values().filter(|s| s.contains(&'a')).count();
        let b_comps = comps.values().filter(|s| s.contains(&'b')).count();
        ensure(a_comps > 0 && b_comps > 0, || "a branch is missing downstream".into())?;
        ensure(mixed == 0, || format!("{mixed} downstream components hold both branches"))?;
        Ok(format!(
            "nerve equal ({} nodes, {} edges); tau=1: {} nodes, spans <= 1, {} downstream components ({a_comps} a, {b_comps} b, 0 mixed)",
            full.nodes.len(),
            full.edges.len(),
            g.nodes.len(),
            comps.len()
        ))
    });
}

#[test]
fn c09_complexity_shift_after_branch_point() {
    criterion("9", "complexity shift on synthetic data", secs(1800), || {
        let mut wins = 0;
        let mut margins = Vec::new();
        for run in 0..50u64 {
            let m = generate(&SynthConfig { seed: run, ..SynthConfig::default() }).unwrap();
            let cfg = ComplexityConfig { seed: run, ..ComplexityConfig::default() };
            assert_eq!((cfg.m_points, cfg.pipeline.embed_dim, cfg.pipeline.max_dim), (100, 2, 7));
            let out = complexity_by_group(&m, &cfg).unwrap();
            let groups = sctsa_core::complexity::group_labels(&out.profiles);
            let avg = |range: std::ops::Range<usize>| {
                let v: Vec<f64> = groups[range]
                    .iter()
                    .flat_map(|g| (4..=7).filter_map(|n| mean_sc(&out.profiles, g, n)))
                    .collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            let (early, late) = (avg(0..5), avg(5..12));
            margins.push(late - early);
            wins += usize::from(late > early);
        }
        let lo = margins.iter().copied().fold(f64::INFINITY, f64::min);
        ensure(wins >= 45, || format!("{wins} of 50 runs show the shift"))?;
        Ok(format!("{wins} of 50 runs; smallest margin {lo:.3}"))
    });
}

/// Every file under `root` by relative path; manifest timings zeroed.
fn artifact_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            let mut bytes = fs::read(&p).unwrap();
            if rel == "manifest.json" {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                for stage in v["stages"].as_object_mut().unwrap().values_mut() {
                    stage["wall_clock_s"] = 0.into();
                }
                bytes = serde_json::to_vec(&v).unwrap();
            }
            out.insert(rel, bytes);
        }
    }
    out
}

#[test]
fn c10_complexity_runs_are_byte_identical() {
    criterion("10", "determinism", None, || {
        let tmp = tempfile::TempDir::new().unwrap();
        let input = tmp.path().join("cells.csv");
        ensure(run_from(["sctsa", "synth", "--output", input.to_str().unwrap()]) == 0, || "synth failed".into())?;
        let mut trees = Vec::new();
        for (name, threads) in [("a", "1"), ("b", "2")] {
            let out = tmp.path().join(name);
            let out = out.to_str().unwrap();
            let base = ["sctsa", "-o", out, "--threads", threads, "--seed", "42"];
            let ingest: Vec<&str> = base.iter().copied().chain(["ingest", "-i", input.to_str().unwrap()]).collect();
            let complexity: Vec<&str> = base.iter().copied().chain(["complexity"]).collect();
            ensure(run_from(ingest) == 0 && run_from(complexity) == 0, || format!("run {name} failed"))?;
            trees.push(artifact_tree(&tmp.path().join(name)));
        }
        ensure(trees[0].keys().eq(trees[1].keys()), || "file lists differ".into())?;
        for (rel, bytes) in &trees[0] {
            ensure(&trees[1][rel] == bytes, || format!("{rel} differs"))?;
        }
        Ok(format!("{} files identical (manifest timings excluded)", trees[0].len()))
    });
}

fn leaf_sides(dg: &Dendrogram) -> Vec<(Vec<usize>, Vec<usize>, f64)> {
    let n = dg.n_leaves();
    let mut sets: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut out = Vec::new();
    for m in &dg.merges {
        let (a, b) = (sets[m.a].clone(), sets[m.b].clone());
        let mut u = a.clone();
        u.extend(&b);
        u.sort_unstable();
        sets.push(u);
        out.push(if a[0] < b[0] { (a, b, m.height) } else { (b, a, m.height) });
    }
    out
}

#[test]
fn c11_clustering_matches_naive_agglomeration() {
    criterion("11", "clustering oracle", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(111);
        for t in 0..50 {
            let cols = rng.random_range(2..6);
            let values: Vec<Option<f64>> = (0..10 * cols).map(|_| Some(rng.random_range(-3.0..3.0))).collect();
            let table = FeatureTable::new(
                (0..10).map(|r| format!("g{r}")).collect(),
                (0..cols).map(|c| format!("f{c}")).collect(),
                values,
            )
            .unwrap();
            let d = row_distances(&table, Metric::Euclidean).unwrap();
            for (linkage, link) in [
                (Linkage::Single, oracles::Link::Single),
                (Linkage::Average, oracles::Link::Average),
                (Linkage::Complete, oracles::Link::Complete),
            ] {
                let got = leaf_sides(&hierarchical_cluster(&table, linkage, Metric::Euclidean).unwrap());
                let want = oracles::naive_agglomerative(&d, 10, link);
                for (k, (g, w)) in got.iter().zip(&want).enumerate() {
                    ensure(g.0 == w.0 && g.1 == w.1, || format!("table {t} {linkage:?} merge {k}: {g:?} vs {w:?}"))?;
                    let tol = if linkage == Linkage::Average { 1e-12 * w.2.max(1.0) } else { 0.0 };
                    ensure((g.2 - w.2).abs() <= tol, || {
                        format!("table {t} {linkage:?} merge {k}: height {} vs {}", g.2, w.2)
                    })?;
                }
            }
        }
        Ok("50 tables x 3 linkages, merge order exact, single/complete heights exact, average within 1e-12".into())
    });
}
