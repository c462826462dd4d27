//! Permuted-distance null models and normalized simplicial complexity.
//!
//! `SC_n` is the cumulative `n`-simplex count of the data filtration divided
//! by the mean cumulative count over null replicates, where each replicate
//! shuffles the off-diagonal distances and is then pushed through the same
//! embedding and filtration as the data.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex::{distance_count_curve, lazy_witness_curve, maxmin_landmarks, GridSpec, SimplexCountCurve, Tau};
use crate::data::{bootstrap_rows, correlation_distance, Correlation, DistanceMatrix, ExpressionMatrix, GroupBy, Sampling};
use crate::embed::{classical_mds, euclidean_distances, pca, EmbedMethod};
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

pub const DEFAULT_NULL_REPLICATES: usize = 20;

/// Uniform shuffle of the upper-triangle entries, mirrored.
pub fn permute_distances(d: &DistanceMatrix, seed: u64) -> DistanceMatrix {
    let mut upper = d.upper_triangle();
    upper.shuffle(&mut seed::rng(seed));
    DistanceMatrix::from_upper(d.len(), &upper).expect("a permutation keeps entries valid")
}

/// What a filtration is computed on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiltrationSource {
    /// Euclidean distances of a low-dimensional embedding.
    #[default]
    Embedding,
    /// The distance matrix itself.
    Raw,
}

/// Which complex is counted on the filtrated matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ComplexKind {
    #[default]
    Rips,
    /// Lazy witness complex on `landmarks` maxmin landmarks; the first
    /// landmark is drawn from `seed`.
    Witness { landmarks: usize, nu: usize, seed: u64 },
}

/// Everything that turns a distance matrix into cumulative counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CountPipeline {
    pub grid: GridSpec,
    pub tau: Tau,
    pub max_dim: usize,
    pub embed_dim: usize,
    pub source: FiltrationSource,
    pub complex: ComplexKind,
}

impl CountPipeline {
    /// MDS (unless raw), Euclidean distances, then the count curve on the
    /// matrix's own grid.
    pub fn curve(&self, d: &DistanceMatrix, timestamps: &[u32]) -> Result<SimplexCountCurve> {
        let filtrated = match self.source {
            FiltrationSource::Raw => d.clone(),
            FiltrationSource::Embedding => euclidean_distances(&classical_mds(d, self.embed_dim)?),
        };
        self.count(&filtrated, timestamps)
    }

    /// Count curve of an already filtrated matrix on its own grid.
    pub fn count(&self, filtrated: &DistanceMatrix, timestamps: &[u32]) -> Result<SimplexCountCurve> {
        let fp = self.grid.params(filtrated, self.tau, self.max_dim)?;
        match self.complex {
            ComplexKind::Rips => distance_count_curve(filtrated, timestamps, &fp),
            ComplexKind::Witness { landmarks, nu, seed } => {
                let lm = maxmin_landmarks(filtrated, landmarks, nu, seed)?;
                lazy_witness_curve(filtrated, &lm, &fp, timestamps)
            }
        }
    }
}

/// Test hook for the replicate permutation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum NullPermutation {
    #[default]
    Shuffle,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullEnsemble {
    pub seed: u64,
    /// `cumulative[b][n]` for replicate `b`.
    pub cumulative: Vec<Vec<u128>>,
}

impl NullEnsemble {
    pub fn replicates(&self) -> usize {
        self.cumulative.len()
    }

    pub fn mean(&self, n: usize) -> f64 {
        self.cumulative.iter().map(|c| c[n] as f64).sum::<f64>() / self.replicates() as f64
    }

    /// Sample standard deviation; zero for a single replicate.
    pub fn std(&self, n: usize) -> f64 {
        let b = self.replicates();
        if b < 2 {
            return 0.0;
        }
        let mean = self.mean(n);
        let ss: f64 = self.cumulative.iter().map(|c| (c[n] as f64 - mean).powi(2)).sum();
        (ss / (b - 1) as f64).sqrt()
    }
}

/// Seed of replicate `b` in an ensemble keyed by `seed`.
pub fn replicate_seed(seed: u64, b: usize) -> u64 {
    seed::derive(seed, Stream::NullReplicate, b as u64)
}

pub fn null_ensemble(
    d: &DistanceMatrix,
    timestamps: &[u32],
    pipeline: &CountPipeline,
    replicates: usize,
    seed: u64,
) -> Result<NullEnsemble> {
    null_ensemble_with(d, timestamps, pipeline, replicates, seed, NullPermutation::Shuffle)
}

pub fn null_ensemble_with(
    d: &DistanceMatrix,
    timestamps: &[u32],
    pipeline: &CountPipeline,
    replicates: usize,
    seed: u64,
    permutation: NullPermutation,
) -> Result<NullEnsemble> {
    if replicates == 0 {
        return Err(Error::invalid("the null ensemble needs at least one replicate"));
    }
    let cumulative = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let shuffled = match permutation {
                NullPermutation::Shuffle => permute_distances(d, replicate_seed(seed, b)),
                NullPermutation::Identity => d.clone(),
            };
            Ok(pipeline.curve(&shuffled, timestamps)?.cumulative)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NullEnsemble { seed, cumulative })
}

/// Per-dimension complexity of one group in one bootstrap repetition.
///
/// Vectors are indexed by simplex dimension `0..=max_dim`; `sc[n]` is `None`
/// when the null mean is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityProfile {
    pub group: String,
    pub repetition: usize,
    pub sc: Vec<Option<f64>>,
    pub data_counts: Vec<u128>,
    pub null_mean: Vec<f64>,
    pub null_std: Vec<f64>,
    pub m: usize,
    pub seed: u64,
}

impl ComplexityProfile {
    pub fn max_dim(&self) -> usize {
        self.sc.len() - 1
    }
}

pub fn normalized_complexity(
    group: &str,
    data_counts: &[u128],
    ens: &NullEnsemble,
    m: usize,
) -> Result<ComplexityProfile> {
    if ens.cumulative.iter().any(|c| c.len() != data_counts.len()) {
        return Err(Error::invalid("null and data counts have different dimensions"));
    }
    let dims = data_counts.len();
    let null_mean: Vec<f64> = (0..dims).map(|n| ens.mean(n)).collect();
    let sc = (0..dims)
        .map(|n| (null_mean[n] > 0.0).then(|| data_counts[n] as f64 / null_mean[n]))
        .collect();
    Ok(ComplexityProfile {
        group: group.to_string(),
        repetition: 0,
        sc,
        data_counts: data_counts.to_vec(),
        null_mean,
        null_std: (0..dims).map(|n| ens.std(n)).collect(),
        m,
        seed: ens.seed,
    })
}

/// Settings for the per-group protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityConfig {
    pub group_by: GroupBy,
    pub m_points: usize,
    pub sampling: Sampling,
    pub embed: EmbedMethod,
    pub correlation: Correlation,
    pub pipeline: CountPipeline,
    pub replicates: usize,
    /// Independent bootstrap draws.
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for ComplexityConfig {
    fn default() -> Self {
        Self {
            group_by: GroupBy::Timestamp,
            m_points: 100,
            sampling: Sampling::WithoutReplacement,
            embed: EmbedMethod::Mds,
            correlation: Correlation::Pearson,
            pipeline: CountPipeline {
                grid: GridSpec::default(),
                tau: Tau::Infinite,
                max_dim: crate::complex::DEFAULT_MAX_DIM,
                embed_dim: 2,
                source: FiltrationSource::Embedding,
                complex: ComplexKind::Rips,
            },
            replicates: DEFAULT_NULL_REPLICATES,
            repetitions: 1,
            seed: 0,
        }
    }
}

/// Seed used for the bootstrap draw of repetition `r`.
pub fn repetition_seed(master: u64, r: usize) -> u64 {
    seed::derive(master, Stream::Repetition, r as u64)
}

/// Seed of the null ensemble for group `g` within a repetition.
pub fn group_null_seed(repetition_seed: u64, g: usize) -> u64 {
    seed::derive(repetition_seed, Stream::Group, g as u64)
}

/// Data curve and null ensemble for one sampled group.
pub fn group_complexity(
    sample: &ExpressionMatrix,
    cfg: &ComplexityConfig,
    label: &str,
    null_seed: u64,
) -> Result<(SimplexCountCurve, ComplexityProfile)> {
    let corr = correlation_distance(sample, cfg.correlation)?;
    let ts = sample.timestamps();
    let data_curve = match (cfg.pipeline.source, cfg.embed) {
        (FiltrationSource::Embedding, EmbedMethod::Pca) => {
            let filtrated = euclidean_distances(&pca(sample, cfg.pipeline.embed_dim)?);
            cfg.pipeline.count(&filtrated, ts)?
        }
        _ => cfg.pipeline.curve(&corr, ts)?,
    };
    let ens = null_ensemble(&corr, ts, &cfg.pipeline, cfg.replicates, null_seed)?;
    let profile = normalized_complexity(label, &data_curve.cumulative, &ens, sample.n_cells())?;
    Ok((data_curve, profile))
}

/// Output of [`complexity_by_group`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRun {
    /// Repetition-major, groups in their natural order.
    pub profiles: Vec<ComplexityProfile>,
    /// Data count curves aligned with `profiles`.
    pub curves: Vec<SimplexCountCurve>,
}

pub fn complexity_by_group(m: &ExpressionMatrix, cfg: &ComplexityConfig) -> Result<ComplexityRun> {
    if cfg.repetitions == 0 {
        return Err(Error::invalid("at least one repetition is required"));
    }
    let mut jobs = Vec::new();
    for r in 0..cfg.repetitions {
        let rs = repetition_seed(cfg.seed, r);
        let draws = bootstrap_rows(m, cfg.group_by, cfg.m_points, rs, cfg.sampling)?;
        for (g, (label, rows)) in draws.into_iter().enumerate() {
            jobs.push((r, rs, g, label, rows));
        }
    }
    let results = jobs
        .into_par_iter()
        .map(|(r, rs, g, label, rows)| {
            let sample = m.select(&rows);
            let (curve, mut profile) = group_complexity(&sample, cfg, &label, group_null_seed(rs, g))?;
            profile.repetition = r;
            Ok((curve, profile))
        })
        .collect::<Result<Vec<_>>>()?;
    let (curves, profiles) = results.into_iter().unzip();
    Ok(ComplexityRun { profiles, curves })
}

/// Group labels in first-appearance order.
pub fn group_labels(profiles: &[ComplexityProfile]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for p in profiles {
        if !out.contains(&p.group) {
            out.push(p.group.clone());
        }
    }
    out
}

/// Mean of the defined `sc[n]` values of a group across repetitions.
pub fn mean_sc(profiles: &[ComplexityProfile], group: &str, n: usize) -> Option<f64> {
    let vals: Vec<f64> = profiles
        .iter()
        .filter(|p| p.group == group)
        .filter_map(|p| p.sc.get(n).copied().flatten())
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

const PROFILE_COLUMNS: [&str; 9] = [
    "group", "repetition", "dim", "sc", "data_count", "null_mean", "null_std", "m", "seed",
];

/// Tidy table, one row per (repetition, group, dim) for dims `1..=max_dim`.
pub fn write_profiles_csv<W: Write>(profiles: &[ComplexityProfile], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(PROFILE_COLUMNS)?;
    for p in profiles {
        for n in 1..=p.max_dim() {
            w.write_record([
                p.group.clone(),
                p.repetition.to_string(),
                n.to_string(),
                fmt_opt(p.sc[n]),
                p.data_counts[n].to_string(),
                p.null_mean[n].to_string(),
                p.null_std[n].to_string(),
                p.m.to_string(),
                p.seed.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_profiles_csv`] for dims `1..`. Rows of one profile must
/// be contiguous with dims ascending from 1. Dimension 0 is not stored and
/// comes back as `SC_0 = 1` with zero counts.
pub fn read_profiles_csv<R: std::io::Read>(reader: R, path: &std::path::Path) -> Result<Vec<ComplexityProfile>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out: Vec<ComplexityProfile> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 9 {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("line {line}: expected 9 fields, found {}", rec.len()),
            });
        }
        let bad = |c: usize| Error::Parse {
            path: path.to_path_buf(),
            line,
            column: PROFILE_COLUMNS[c].to_string(),
            message: format!("cannot parse `{}`", &rec[c]),
        };
        let repetition: usize = rec[1].parse().map_err(|_| bad(1))?;
        let dim: usize = rec[2].parse().map_err(|_| bad(2))?;
        let sc = match &rec[3] {
            "NA" => None,
            v => Some(v.parse().map_err(|_| bad(3))?),
        };
        let data_count: u128 = rec[4].parse().map_err(|_| bad(4))?;
        let null_mean: f64 = rec[5].parse().map_err(|_| bad(5))?;
        let null_std: f64 = rec[6].parse().map_err(|_| bad(6))?;
        let m: usize = rec[7].parse().map_err(|_| bad(7))?;
        let seed: u64 = rec[8].parse().map_err(|_| bad(8))?;
        let continues = out
            .last()
            .is_some_and(|p| p.group == rec[0] && p.repetition == repetition && p.max_dim() + 1 == dim);
        if !continues {
            if dim != 1 {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    message: format!("line {line}: profile of group `{}` starts at dim {dim}", &rec[0]),
                });
            }
            out.push(ComplexityProfile {
                group: rec[0].to_string(),
                repetition,
                sc: vec![Some(1.0)],
                data_counts: vec![0],
                null_mean: vec![0.0],
                null_std: vec![0.0],
                m,
                seed,
            });
        }
        let p = out.last_mut().expect("pushed above");
        p.sc.push(sc);
        p.data_counts.push(data_count);
        p.null_mean.push(null_mean);
        p.null_std.push(null_std);
    }
    Ok(out)
}

/// Groups × dims matrix of repetition-averaged `SC_n`, undefined as `null`.
pub fn heatmap_json(profiles: &[ComplexityProfile]) -> serde_json::Value {
    let groups = group_labels(profiles);
    let max_dim = profiles.first().map_or(0, ComplexityProfile::max_dim);
    let values: Vec<Vec<Option<f64>>> = groups
        .iter()
        .map(|g| (1..=max_dim).map(|n| mean_sc(profiles, g, n)).collect())
        .collect();
    serde_json::json!({
        "schema_version": 1,
        "rows": groups,
        "columns": (1..=max_dim).map(|n| format!("SC_{n}")).collect::<Vec<_>>(),
        "values": values,
    })
}

/// Per-group centroid of `(SC_x, SC_y)` across repetitions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub group: String,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub repetitions: usize,
}

pub fn trajectory(profiles: &[ComplexityProfile], x_dim: usize, y_dim: usize) -> Vec<TrajectoryPoint> {
    group_labels(profiles)
        .into_iter()
        .map(|g| TrajectoryPoint {
            x: mean_sc(profiles, &g, x_dim),
            y: mean_sc(profiles, &g, y_dim),
            repetitions: profiles.iter().filter(|p| p.group == g).count(),
            group: g,
        })
        .collect()
}

pub fn write_trajectory_csv<W: Write>(
    points: &[TrajectoryPoint],
    x_dim: usize,
    y_dim: usize,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group".to_string(), format!("sc_{x_dim}"), format!("sc_{y_dim}"), "repetitions".into()])?;
    for p in points {
        w.write_record([p.group.clone(), fmt_opt(p.x), fmt_opt(p.y), p.repetitions.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
