//! Run configuration: a TOML file, then `section.key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sctsa_core::complex::DEFAULT_GRID_STEPS;
use sctsa_core::complexity::DEFAULT_NULL_REPLICATES;
use sctsa_core::homology::{DEFAULT_HOMOLOGY_MAX_DIM, DEFAULT_SIMPLEX_BUDGET};
use sctsa_core::lineage::{Linkage, Metric};
use sctsa_core::mapper::{ClusterCut, MapperConfig, DEFAULT_HISTOGRAM_BINS, DEFAULT_LAYOUT_ITERATIONS};
use sctsa_core::seed::{self, Stream};
use sctsa_core::synth::SynthConfig;
use sctsa_core::{
    ColumnSchema, ComplexKind, ComplexityConfig, Correlation, CountPipeline, EmbedMethod, FiltrationSource,
    GridSpec, GroupBy, Sampling, Tau,
};

use crate::CliError;

pub const DEFAULT_OUT: &str = "sctsa-run";
pub const OUT_ENV: &str = "SCTSA_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Run directory; falls back to `$SCTSA_OUT`, then `sctsa-run`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Worker cap. Results do not depend on it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub seed: u64,
    pub input: InputConfig,
    pub embed: EmbedConfig,
    pub filtration: FiltrationConfig,
    pub complexity: ComplexitySection,
    pub barcode: BarcodeConfig,
    pub mapper: MapperSection,
    pub lineage: LineageConfig,
    pub synth: SynthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub cell_id: String,
    pub time: String,
    pub cell_type: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delimiter: Option<char>,
    pub correlation: Correlation,
    /// Also write the cell-by-cell distance matrix as CSV.
    pub distance_csv: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    pub method: EmbedMethod,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexName {
    #[default]
    Rips,
    Witness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiltrationConfig {
    /// Thresholds per filtration, uniform up to each matrix's largest distance.
    pub grid: usize,
    pub tau: Tau,
    pub max_dim: usize,
    pub source: FiltrationSource,
    pub complex: ComplexName,
    pub landmarks: usize,
    pub nu: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComplexitySection {
    pub group_by: GroupBy,
    pub m_points: usize,
    pub sampling: Sampling,
    pub replicates: usize,
    pub repetitions: usize,
    /// `(x, y)` dimensions of the trajectory table.
    pub trajectory: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarcodeConfig {
    pub m_points: usize,
    pub homology_max_dim: usize,
    pub budget: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutName {
    #[default]
    HistogramGap,
    Threshold,
    Connected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapperSection {
    pub intervals: usize,
    pub overlap: f64,
    pub tau: Tau,
    pub lens: EmbedMethod,
    /// Within-cube distances: the lens coordinates or the correlation matrix.
    pub distances: FiltrationSource,
    pub cut: CutName,
    pub histogram_bins: usize,
    pub threshold: f64,
    pub layout_iterations: usize,
    /// Layout seed; the run seed when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    #[default]
    Complexity,
    Betti,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineageConfig {
    pub features: FeatureSource,
    pub linkage: Linkage,
    pub metric: Metric,
    pub standardize: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: None,
            threads: None,
            seed: 0,
            input: InputConfig::default(),
            embed: EmbedConfig::default(),
            filtration: FiltrationConfig::default(),
            complexity: ComplexitySection::default(),
            barcode: BarcodeConfig::default(),
            mapper: MapperSection::default(),
            lineage: LineageConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl Default for InputConfig {
    fn default() -> Self {
        let s = ColumnSchema::default();
        Self {
            path: None,
            cell_id: s.cell_id,
            time: s.timestamp,
            cell_type: s.cell_type,
            delimiter: None,
            correlation: Correlation::Pearson,
            distance_csv: false,
        }
    }
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            method: EmbedMethod::Mds,
            dim: 2,
        }
    }
}

impl Default for FiltrationConfig {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID_STEPS,
            tau: Tau::Infinite,
            max_dim: sctsa_core::complex::DEFAULT_MAX_DIM,
            source: FiltrationSource::Embedding,
            complex: ComplexName::Rips,
            landmarks: 0,
            nu: 0,
        }
    }
}

impl Default for ComplexitySection {
    fn default() -> Self {
        Self {
            group_by: GroupBy::Timestamp,
            m_points: 100,
            sampling: Sampling::WithoutReplacement,
            replicates: DEFAULT_NULL_REPLICATES,
            repetitions: 1,
            trajectory: [1, 3],
        }
    }
}

impl Default for BarcodeConfig {
    fn default() -> Self {
        Self {
            m_points: 40,
            homology_max_dim: DEFAULT_HOMOLOGY_MAX_DIM,
            budget: DEFAULT_SIMPLEX_BUDGET,
        }
    }
}

impl Default for MapperSection {
    fn default() -> Self {
        let m = MapperConfig::default();
        Self {
            intervals: m.intervals,
            overlap: m.overlap,
            tau: Tau::Infinite,
            lens: EmbedMethod::Mds,
            distances: FiltrationSource::Embedding,
            cut: CutName::HistogramGap,
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
            threshold: 0.0,
            layout_iterations: DEFAULT_LAYOUT_ITERATIONS,
            seed: None,
        }
    }
}

impl Default for LineageConfig {
    fn default() -> Self {
        Self {
            features: FeatureSource::Complexity,
            linkage: Linkage::Average,
            metric: Metric::Euclidean,
            standardize: true,
        }
    }
}

/// Set `path` (dotted) in `table` to `raw`, read as a TOML value when it
/// parses as a finite one and as a string otherwise, so `inf` stays `"inf"`.
pub fn apply_override(table: &mut toml::Table, path: &str, raw: &str) -> Result<(), CliError> {
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => match t.remove("v").expect("key was written") {
            toml::Value::Float(x) if !x.is_finite() => toml::Value::String(raw.to_string()),
            v => v,
        },
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("bad override key `{path}`")));
    }
    let (last, parents) = keys.split_last().expect("split yields one key");
    let mut cur = table;
    for k in parents {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{k}` in `{path}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// `KEY=VALUE` into its halves.
pub fn split_assignment(s: &str) -> Result<(&str, &str), CliError> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| CliError::Config(format!("override `{s}` is not KEY=VALUE")))
}

impl RunConfig {
    /// Defaults, then the file, then the overrides in order.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut table = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            apply_override(&mut table, k, v)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every precondition that does not need the data.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut errs = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                errs.push(msg);
            }
        };
        let f = &self.filtration;
        let c = &self.complexity;
        let m = &self.mapper;
        need(self.threads != Some(0), "threads must be at least 1".into());
        need(self.embed.dim >= 1, "embed.dim must be at least 1".into());
        need(f.grid >= 2, format!("filtration.grid must be at least 2, got {}", f.grid));
        need(f.max_dim >= 1, "filtration.max_dim must be at least 1".into());
        if f.complex == ComplexName::Witness {
            need(f.landmarks >= 1, "filtration.landmarks must be set for the witness complex".into());
            need(
                f.landmarks <= c.m_points,
                format!("filtration.landmarks ({}) exceeds complexity.m_points ({})", f.landmarks, c.m_points),
            );
        }
        need(
            c.m_points > self.embed.dim,
            format!("complexity.m_points ({}) must exceed embed.dim ({})", c.m_points, self.embed.dim),
        );
        need(c.replicates >= 1, "complexity.replicates must be at least 1".into());
        need(c.repetitions >= 1, "complexity.repetitions must be at least 1".into());
        for d in c.trajectory {
            need(
                (1..=f.max_dim).contains(&d),
                format!("complexity.trajectory dimension {d} outside 1..={}", f.max_dim),
            );
        }
        need(
            self.barcode.m_points > self.embed.dim,
            format!("barcode.m_points ({}) must exceed embed.dim ({})", self.barcode.m_points, self.embed.dim),
        );
        need(self.barcode.budget >= 1, "barcode.budget must be at least 1".into());
        need(m.intervals >= 1, "mapper.intervals must be at least 1".into());
        need(
            (0.0..1.0).contains(&m.overlap),
            format!("mapper.overlap must lie in [0, 1), got {}", m.overlap),
        );
        need(m.histogram_bins >= 1, "mapper.histogram_bins must be at least 1".into());
        need(
            m.threshold.is_finite() && m.threshold >= 0.0,
            "mapper.threshold must be finite and non-negative".into(),
        );
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(errs.join("; ")))
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    /// The settings that determine results, without run-location keys.
    pub fn snapshot(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.out = None;
        c.threads = None;
        serde_json::to_value(c).expect("config serializes")
    }

    pub fn schema(&self) -> ColumnSchema {
        ColumnSchema {
            cell_id: self.input.cell_id.clone(),
            timestamp: self.input.time.clone(),
            cell_type: self.input.cell_type.clone(),
            delimiter: self.input.delimiter.map(|c| c as u8),
        }
    }

    pub fn pipeline(&self) -> CountPipeline {
        let f = &self.filtration;
        CountPipeline {
            grid: GridSpec::Uniform(f.grid),
            tau: f.tau,
            max_dim: f.max_dim,
            embed_dim: self.embed.dim,
            source: f.source,
            complex: match f.complex {
                ComplexName::Rips => ComplexKind::Rips,
                ComplexName::Witness => ComplexKind::Witness {
                    landmarks: f.landmarks,
                    nu: f.nu,
                    seed: seed::derive(self.seed, Stream::Landmarks, 0),
                },
            },
        }
    }

    pub fn complexity_config(&self) -> ComplexityConfig {
        let c = &self.complexity;
        ComplexityConfig {
            group_by: c.group_by,
            m_points: c.m_points,
            sampling: c.sampling,
            embed: self.embed.method,
            correlation: self.input.correlation,
            pipeline: self.pipeline(),
            replicates: c.replicates,
            repetitions: c.repetitions,
            seed: self.seed,
        }
    }

    pub fn mapper_config(&self) -> MapperConfig {
        let m = &self.mapper;
        MapperConfig {
            intervals: m.intervals,
            overlap: m.overlap,
            tau: m.tau,
            cut: match m.cut {
                CutName::HistogramGap => ClusterCut::HistogramGap { bins: m.histogram_bins },
                CutName::Threshold => ClusterCut::Threshold(m.threshold),
                CutName::Connected => ClusterCut::Connected,
            },
            layout_iterations: m.layout_iterations,
            seed: m.seed.unwrap_or(self.seed),
        }
    }
}
