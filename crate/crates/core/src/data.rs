//! Expression tables, dissimilarity matrices and per-group bootstrap sampling.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed::{self, Stream};

/// Cells × genes matrix of non-negative expression values with per-cell metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    genes: Vec<String>,
    cell_ids: Vec<String>,
    timestamps: Vec<u32>,
    cell_types: Vec<String>,
    /// Row-major, `cell_ids.len() * genes.len()`.
    values: Vec<f64>,
}

impl ExpressionMatrix {
    pub fn new(
        genes: Vec<String>,
        cell_ids: Vec<String>,
        timestamps: Vec<u32>,
        cell_types: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let n = cell_ids.len();
        if timestamps.len() != n || cell_types.len() != n {
            return Err(Error::invalid(format!(
                "metadata lengths differ: {} ids, {} timestamps, {} types",
                n,
                timestamps.len(),
                cell_types.len()
            )));
        }
        if values.len() != n * genes.len() {
            return Err(Error::invalid(format!(
                "expected {} values for {} cells x {} genes, got {}",
                n * genes.len(),
                n,
                genes.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            let g = genes.len().max(1);
            return Err(Error::invalid(format!(
                "cell `{}`, gene `{}`: expression must be finite and non-negative, got {}",
                cell_ids[pos / g],
                genes[pos % g],
                values[pos]
            )));
        }
        Ok(Self {
            genes,
            cell_ids,
            timestamps,
            cell_types,
            values,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.cell_ids.len()
    }

    pub fn n_genes(&self) -> usize {
        self.genes.len()
    }

    pub fn genes(&self) -> &[String] {
        &self.genes
    }

    pub fn cell_ids(&self) -> &[String] {
        &self.cell_ids
    }

    pub fn timestamps(&self) -> &[u32] {
        &self.timestamps
    }

    pub fn cell_types(&self) -> &[String] {
        &self.cell_types
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let g = self.genes.len();
        &self.values[i * g..(i + 1) * g]
    }

    /// Rows in the given order. Repeated rows get their ids suffixed `#2`, `#3`, ...
    pub fn select(&self, rows: &[usize]) -> Self {
        let mut seen: HashMap<usize, usize> = HashMap::new();
        let mut cell_ids = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len() * self.n_genes());
        for &r in rows {
            let k = seen.entry(r).or_insert(0);
            *k += 1;
            if *k == 1 {
                cell_ids.push(self.cell_ids[r].clone());
            } else {
                cell_ids.push(format!("{}#{}", self.cell_ids[r], k));
            }
            values.extend_from_slice(self.row(r));
        }
        Self {
            genes: self.genes.clone(),
            cell_ids,
            timestamps: rows.iter().map(|&r| self.timestamps[r]).collect(),
            cell_types: rows.iter().map(|&r| self.cell_types[r].clone()).collect(),
            values,
        }
    }

    /// SHA-256 over ids, metadata and the little-endian values.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for g in &self.genes {
            h.update(g.as_bytes());
            h.update([0u8]);
        }
        for i in 0..self.n_cells() {
            h.update(self.cell_ids[i].as_bytes());
            h.update([0u8]);
            h.update(self.timestamps[i].to_le_bytes());
            h.update(self.cell_types[i].as_bytes());
            h.update([0u8]);
        }
        for v in &self.values {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Which columns of an expression table carry metadata. Everything else is a gene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub cell_id: String,
    pub timestamp: String,
    pub cell_type: String,
    /// Field delimiter; inferred from the file extension when `None`.
    pub delimiter: Option<u8>,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            cell_id: "cell_id".into(),
            timestamp: "time".into(),
            cell_type: "cell_type".into(),
            delimiter: None,
        }
    }
}

fn infer_delimiter(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("tsv") || ext.eq_ignore_ascii_case("tab") => b'\t',
        _ => b',',
    }
}

/// Read a delimited expression table with a header row. Row order is preserved.
pub fn load_expression(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<ExpressionMatrix> {
    let path = path.as_ref();
    let delimiter = schema.delimiter.unwrap_or_else(|| infer_delimiter(path));
    let file = File::open(path)?;
    read_expression(BufReader::new(file), delimiter, schema, path)
}

pub fn read_expression<R: Read>(
    reader: R,
    delimiter: u8,
    schema: &ColumnSchema,
    path: &Path,
) -> Result<ExpressionMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let id_col = find(&schema.cell_id)?;
    let time_col = find(&schema.timestamp)?;
    let type_col = find(&schema.cell_type)?;
    let gene_cols: Vec<usize> = (0..header.len())
        .filter(|c| *c != id_col && *c != time_col && *c != type_col)
        .collect();
    let genes: Vec<String> = gene_cols.iter().map(|&c| header[c].to_string()).collect();

    let mut cell_ids = Vec::new();
    let mut timestamps = Vec::new();
    let mut cell_types = Vec::new();
    let mut values = Vec::new();
    let mut first_seen: HashMap<String, u64> = HashMap::new();

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |column: &str, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            column: column.to_string(),
            message,
        };
        let id = record[id_col].to_string();
        if let Some(&first_line) = first_seen.get(&id) {
            return Err(Error::DuplicateCell {
                path: path.to_path_buf(),
                id,
                line,
                first_line,
            });
        }
        first_seen.insert(id.clone(), line);
        let t: u32 = record[time_col].trim().parse().map_err(|_| {
            parse_err(
                &schema.timestamp,
                format!("timestamp `{}` is not a non-negative integer", &record[time_col]),
            )
        })?;
        for &c in &gene_cols {
            let raw = record[c].trim();
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_err(&header[c], format!("`{raw}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(&header[c], format!("`{raw}` is not finite")));
            }
            if v < 0.0 {
                return Err(parse_err(&header[c], format!("negative expression value {v}")));
            }
            values.push(v);
        }
        cell_ids.push(id);
        timestamps.push(t);
        cell_types.push(record[type_col].to_string());
    }
    ExpressionMatrix::new(genes, cell_ids, timestamps, cell_types, values)
}

/// Write the table back out with `cell_id,time,cell_type` leading columns.
pub fn write_expression<W: Write>(m: &ExpressionMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["cell_id".to_string(), "time".into(), "cell_type".into()];
    header.extend(m.genes.iter().cloned());
    w.write_record(&header)?;
    for i in 0..m.n_cells() {
        let mut rec = vec![
            m.cell_ids[i].clone(),
            m.timestamps[i].to_string(),
            m.cell_types[i].clone(),
        ];
        rec.extend(m.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Symmetric, zero-diagonal, non-negative dissimilarities. The triangle
/// inequality is not required.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

pub const DISTANCE_MAGIC: &[u8; 8] = b"SCTSA-DM";

impl DistanceMatrix {
    pub fn from_square(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidDistance(format!(
                "expected {} entries for n = {n}, got {}",
                n * n,
                data.len()
            )));
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(Error::InvalidDistance(format!("nonzero diagonal at {i}")));
            }
            for j in (i + 1)..n {
                let a = data[i * n + j];
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::InvalidDistance(format!(
                        "entry ({i}, {j}) = {a} is not finite and non-negative"
                    )));
                }
                if a != data[j * n + i] {
                    return Err(Error::InvalidDistance(format!(
                        "not symmetric at ({i}, {j}): {a} vs {}",
                        data[j * n + i]
                    )));
                }
            }
        }
        Ok(Self { n, data })
    }

    /// Build from the strict upper triangle in row-major order.
    pub fn from_upper(n: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::InvalidDistance(format!(
                "expected {} upper-triangle entries for n = {n}, got {}",
                n * n.saturating_sub(1) / 2,
                upper.len()
            )));
        }
        let mut data = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                data[i * n + j] = upper[k];
                data[j * n + i] = upper[k];
                k += 1;
            }
        }
        Self::from_square(n, data)
    }

    /// Fill from `f(i, j)` for `i < j`, mirrored.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self::from_square(n, data)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn upper_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n.saturating_sub(1) / 2);
        for i in 0..self.n {
            out.extend_from_slice(&self.data[i * self.n + i + 1..(i + 1) * self.n]);
        }
        out
    }

    pub fn max_off_diagonal(&self) -> f64 {
        self.upper_triangle().into_iter().fold(0.0, f64::max)
    }

    /// Multiply every entry by `factor` (must be finite and > 0).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_square(self.n, self.data.iter().map(|v| v * factor).collect())
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        for v in &self.data {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Little-endian binary: magic, `u64` n, then the upper triangle as `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DISTANCE_MAGIC)?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * self.n * self.n.saturating_sub(1) / 2);
        for v in self.upper_triangle() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R, path: &Path) -> Result<Self> {
        let bad = |message: String| Error::Format {
            path: path.to_path_buf(),
            message,
        };
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| bad("truncated header".into()))?;
        if &magic != DISTANCE_MAGIC {
            return Err(bad("bad magic".into()));
        }
        let mut nb = [0u8; 8];
        r.read_exact(&mut nb)
            .map_err(|_| bad("truncated header".into()))?;
        let n = u64::from_le_bytes(nb) as usize;
        let count = n * n.saturating_sub(1) / 2;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * count {
            return Err(bad(format!(
                "expected {} payload bytes for n = {n}, found {}",
                8 * count,
                bytes.len()
            )));
        }
        let upper: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Self::from_upper(n, &upper).map_err(|e| bad(e.to_string()))
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_binary(BufWriter::new(File::create(path)?))
    }

    pub fn load_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::read_binary(BufReader::new(File::open(path)?), path)
    }

    /// Square matrix, no header, shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(writer);
        for i in 0..self.n {
            w.write_record(self.row(i).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(reader);
        let mut data = Vec::new();
        let mut rows = 0;
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            for (c, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    column: c.to_string(),
                    message: format!("`{field}` is not a number"),
                })?;
                data.push(v);
            }
            rows += 1;
        }
        Self::from_square(rows, data)
    }
}

/// Pearson or Spearman (rank-transformed Pearson) correlation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correlation {
    #[default]
    Pearson,
    Spearman,
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(row: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; row.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && row[order[j + 1]] == row[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// `1 - corr(row_i, row_j)` for every pair of cells, clamped to `[0, 2]`.
pub fn correlation_distance(m: &ExpressionMatrix, kind: Correlation) -> Result<DistanceMatrix> {
    let n = m.n_cells();
    let g = m.n_genes();
    if g < 2 {
        return Err(Error::invalid(format!(
            "correlation needs at least 2 genes, table has {g}"
        )));
    }
    // Centered, unit-norm rows. Each pair is then a single dot product with a
    // fixed summation order, independent of how rows are scheduled.
    let mut unit = Vec::with_capacity(n * g);
    for i in 0..n {
        let row: Vec<f64> = match kind {
            Correlation::Pearson => m.row(i).to_vec(),
            Correlation::Spearman => ranks(m.row(i)),
        };
        let mean = row.iter().sum::<f64>() / g as f64;
        let dev: Vec<f64> = row.iter().map(|v| v - mean).collect();
        let norm = dev.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroVariance {
                cell: m.cell_ids()[i].clone(),
            });
        }
        unit.extend(dev.iter().map(|d| d / norm));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ui = &unit[i * g..(i + 1) * g];
            ((i + 1)..n)
                .map(|j| {
                    let uj = &unit[j * g..(j + 1) * g];
                    let r: f64 = ui.iter().zip(uj).map(|(a, b)| a * b).sum();
                    (1.0 - r).clamp(0.0, 2.0)
                })
                .collect()
        })
        .collect();
    let mut data = vec![0.0; n * n];
    for (i, row) in rows.into_iter().enumerate() {
        for (k, v) in row.into_iter().enumerate() {
            let j = i + 1 + k;
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    DistanceMatrix::from_square(n, data)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    #[default]
    Timestamp,
    CellType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub label: String,
    pub rows: Vec<usize>,
}

/// Partition rows into groups: timestamps ascending, cell types by first appearance.
pub fn groups(m: &ExpressionMatrix, by: GroupBy) -> Vec<Group> {
    let mut out: Vec<Group> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for i in 0..m.n_cells() {
        let label = match by {
            GroupBy::Timestamp => m.timestamps()[i].to_string(),
            GroupBy::CellType => m.cell_types()[i].clone(),
        };
        let slot = *index.entry(label.clone()).or_insert_with(|| {
            out.push(Group {
                label,
                rows: Vec::new(),
            });
            out.len() - 1
        });
        out[slot].rows.push(i);
    }
    if by == GroupBy::Timestamp {
        out.sort_by_key(|g| g.label.parse::<u32>().unwrap_or(u32::MAX));
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    WithoutReplacement,
    WithReplacement,
}

/// Row indices of a per-group sample, concatenated in group order.
///
/// Without replacement the chosen rows of each group are sorted ascending.
pub fn bootstrap_rows(
    m: &ExpressionMatrix,
    by: GroupBy,
    m_points: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<Vec<(String, Vec<usize>)>> {
    if m_points == 0 {
        return Err(Error::invalid("m_points must be positive"));
    }
    let groups = groups(m, by);
    if sampling == Sampling::WithoutReplacement {
        if let Some(g) = groups.iter().find(|g| g.rows.len() < m_points) {
            return Err(Error::GroupTooSmall {
                group: g.label.clone(),
                size: g.rows.len(),
                requested: m_points,
            });
        }
    }
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(gi, g)| {
            let mut rng = seed::derived_rng(seed, Stream::Bootstrap, gi as u64);
            let rows = match sampling {
                Sampling::WithoutReplacement => {
                    let mut picked: Vec<usize> = index::sample(&mut rng, g.rows.len(), m_points)
                        .into_iter()
                        .map(|k| g.rows[k])
                        .collect();
                    picked.sort_unstable();
                    picked
                }
                Sampling::WithReplacement => (0..m_points)
                    .map(|_| g.rows[rng.random_range(0..g.rows.len())])
                    .collect(),
            };
            (g.label, rows)
        })
        .collect())
}

/// Uniform sample of `m_points` cells from every group, concatenated.
pub fn bootstrap_sample(
    m: &ExpressionMatrix,
    by: GroupBy,
    m_points: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<ExpressionMatrix> {
    let rows: Vec<usize> = bootstrap_rows(m, by, m_points, seed, sampling)?
        .into_iter()
        .flat_map(|(_, r)| r)
        .collect();
    Ok(m.select(&rows))
}
