//! Synthetic bifurcating trajectories.
//!
//! Genes are Gaussian pulses along a pseudotime. Trunk genes pulse along the
//! trunk. After the branch point every cell commits to one of two branches
//! (unevenly, by default): a broad late program is shared by both, and each
//! branch adds its own marker genes scaled by a heavy-tailed per-cell
//! commitment intensity, so committed groups are a dense majority core, a
//! distinct minority branch, and a sparse halo of strongly committed cells.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::ExpressionMatrix;
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub groups: usize,
    pub cells_per_group: usize,
    /// Number of leading groups on the trunk.
    pub branch_after: usize,
    pub stem_genes: usize,
    pub late_genes: usize,
    /// Marker genes per branch.
    pub marker_genes: usize,
    /// Peak marker amplitude at unit intensity.
    pub marker_amplitude: f64,
    /// Width multiplier of the shared late pulses.
    pub late_width: f64,
    /// Probability that a committing cell takes branch a.
    pub branch_bias: f64,
    /// Pseudotime jitter within a trunk group.
    pub stem_spread: f64,
    /// Pseudotime jitter within a branch group.
    pub branch_spread: f64,
    /// Upper end of the commitment intensity multiplier.
    pub commitment: f64,
    /// Tail exponent of the intensity; larger means a thinner halo.
    pub commitment_tail: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            groups: 12,
            cells_per_group: 150,
            branch_after: 5,
            stem_genes: 12,
            late_genes: 10,
            marker_genes: 8,
            marker_amplitude: 15.0,
            late_width: 5.0,
            branch_bias: 0.75,
            stem_spread: 1.0,
            branch_spread: 0.3,
            commitment: 10.0,
            commitment_tail: 16.0,
            noise: 0.3,
            seed: 0,
        }
    }
}

struct Pulse {
    center: f64,
    width: f64,
    amplitude: f64,
}

impl Pulse {
    fn at(&self, s: f64) -> f64 {
        let z = (s - self.center) / self.width;
        self.amplitude * (-0.5 * z * z).exp()
    }
}

fn pulses(rng: &mut impl Rng, count: usize, span: f64, amplitude: (f64, f64), width: f64) -> Vec<Pulse> {
    (0..count)
        .map(|k| Pulse {
            center: span * (k as f64 + 0.5) / count as f64,
            width: width * (1.0 + rng.random::<f64>()),
            amplitude: amplitude.0 + (amplitude.1 - amplitude.0) * rng.random::<f64>(),
        })
        .collect()
}

/// Cell type label for a cell at `t` on `branch` (`None` on the trunk).
fn cell_type(cfg: &SynthConfig, t: usize, branch: Option<usize>) -> String {
    match branch {
        None => "stem".to_string(),
        Some(b) => {
            let name = if b == 0 { "a" } else { "b" };
            let late = t >= cfg.branch_after + (cfg.groups - cfg.branch_after).div_ceil(2);
            format!("branch_{name}_{}", if late { "late" } else { "early" })
        }
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<ExpressionMatrix> {
    if cfg.groups == 0 || cfg.cells_per_group == 0 {
        return Err(Error::invalid("synthetic data needs groups and cells"));
    }
    let n_genes = cfg.stem_genes + cfg.late_genes + 2 * cfg.marker_genes;
    if n_genes < 2 {
        return Err(Error::invalid("synthetic data needs at least two genes"));
    }
    if !(0.0..=1.0).contains(&cfg.branch_bias) {
        return Err(Error::invalid("branch_bias must lie in [0, 1]"));
    }
    if !(cfg.noise > 0.0) || !(cfg.commitment >= 0.0) || !(cfg.commitment_tail > 0.0) {
        return Err(Error::invalid("noise and commitment tail must be positive"));
    }
    let mut rng = seed::derived_rng(cfg.seed, Stream::Synth, 0);
    let trunk_len = cfg.branch_after.max(1) as f64;
    let branch_len = cfg.groups.saturating_sub(cfg.branch_after).max(1) as f64 + 1.0;
    let stem = pulses(&mut rng, cfg.stem_genes, trunk_len, (5.0, 15.0), 1.0);
    let late = pulses(&mut rng, cfg.late_genes, branch_len, (5.0, 15.0), cfg.late_width);
    let markers = [
        pulses(&mut rng, cfg.marker_genes, branch_len, (cfg.marker_amplitude / 2.0, cfg.marker_amplitude), 1.0),
        pulses(&mut rng, cfg.marker_genes, branch_len, (cfg.marker_amplitude / 2.0, cfg.marker_amplitude), 1.0),
    ];
    let noise = Normal::new(0.0, cfg.noise).map_err(|e| Error::invalid(e.to_string()))?;
    let mut genes: Vec<String> = (0..cfg.stem_genes).map(|k| format!("stem{k}")).collect();
    genes.extend((0..cfg.late_genes).map(|k| format!("late{k}")));
    for arm in ["a", "b"] {
        genes.extend((0..cfg.marker_genes).map(|k| format!("{arm}{k}")));
    }

    let n = cfg.groups * cfg.cells_per_group;
    let mut values = Vec::with_capacity(n * n_genes);
    let mut ids = Vec::with_capacity(n);
    let mut times = Vec::with_capacity(n);
    let mut types = Vec::with_capacity(n);
    for t in 0..cfg.groups {
        for c in 0..cfg.cells_per_group {
            let jitter = rng.random::<f64>() - 0.5;
            let branch = (t >= cfg.branch_after).then(|| usize::from(rng.random::<f64>() >= cfg.branch_bias));
            let intensity = 1.0 + cfg.commitment * rng.random::<f64>().powf(cfg.commitment_tail);
            let trunk_s = match branch {
                None => t as f64 + 0.5 + jitter * 2.0 * cfg.stem_spread,
                Some(_) => trunk_len,
            };
            let branch_s = (t + 1).saturating_sub(cfg.branch_after) as f64 + jitter * 2.0 * cfg.branch_spread;
            values.extend(stem.iter().map(|p| p.at(trunk_s)));
            values.extend(late.iter().map(|p| if branch.is_some() { p.at(branch_s) } else { 0.0 }));
            for (b, arm) in markers.iter().enumerate() {
                values.extend(arm.iter().map(|p| {
                    if branch == Some(b) {
                        intensity * p.at(branch_s)
                    } else {
                        0.0
                    }
                }));
            }
            let row = values.len() - n_genes;
            for v in &mut values[row..] {
                *v = (*v + 1.0 + noise.sample(&mut rng)).max(0.0);
            }
            ids.push(format!("c{t}_{c}"));
            times.push(t as u32);
            types.push(cell_type(cfg, t, branch));
        }
    }
    ExpressionMatrix::new(genes, ids, times, types, values)
}
