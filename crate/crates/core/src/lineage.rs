//! Hierarchical clustering of groups by their summary statistics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::complexity::{group_labels, mean_sc, ComplexityProfile};
use crate::error::{Error, Result};
use crate::homology::BettiFeatures;

/// Rows are groups, columns named features; `None` marks an undefined entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureTable {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    values: Vec<Option<f64>>,
    /// Human-readable notes about dropped columns.
    pub warnings: Vec<String>,
}

impl FeatureTable {
    /// Columns with no defined entry are dropped with a warning.
    pub fn new(rows: Vec<String>, columns: Vec<String>, values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() != rows.len() * columns.len() {
            return Err(Error::invalid(format!(
                "{} values for a {} x {} table",
                values.len(),
                rows.len(),
                columns.len()
            )));
        }
        for (k, c) in columns.iter().enumerate() {
            if columns[..k].contains(c) {
                return Err(Error::invalid(format!("duplicate feature column {c:?}")));
            }
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature values must be finite"));
        }
        let mut t = Self {
            rows,
            columns,
            values,
            warnings: Vec::new(),
        };
        let empty: Vec<usize> = (0..t.columns.len())
            .filter(|&c| t.column(c).iter().all(Option::is_none))
            .collect();
        for &c in &empty {
            let msg = format!("dropped column {}: no defined values", t.columns[c]);
            t.warnings.push(msg);
        }
        t.drop_columns(&empty);
        Ok(t)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        self.values[r * self.n_cols() + c]
    }

    pub fn row(&self, r: usize) -> &[Option<f64>] {
        &self.values[r * self.n_cols()..(r + 1) * self.n_cols()]
    }

    pub fn column(&self, c: usize) -> Vec<Option<f64>> {
        (0..self.n_rows()).map(|r| self.get(r, c)).collect()
    }

    fn drop_columns(&mut self, drop: &[usize]) {
        if drop.is_empty() {
            return;
        }
        let keep: Vec<usize> = (0..self.n_cols()).filter(|c| !drop.contains(c)).collect();
        let values = (0..self.n_rows())
            .flat_map(|r| keep.iter().map(move |&c| (r, c)))
            .map(|(r, c)| self.get(r, c))
            .collect();
        self.columns = keep.iter().map(|&c| self.columns[c].clone()).collect();
        self.values = values;
    }

    /// Z-score each column over its defined entries with the sample standard
    /// deviation. Columns without spread are dropped with a warning.
    pub fn standardized(&self) -> Self {
        let mut t = self.clone();
        let mut flat = Vec::new();
        for c in 0..t.n_cols() {
            let col: Vec<f64> = t.column(c).into_iter().flatten().collect();
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = if col.len() > 1 {
                col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            if var <= 0.0 {
                flat.push(c);
                continue;
            }
            let sd = var.sqrt();
            for r in 0..t.n_rows() {
                let k = r * t.n_cols() + c;
                t.values[k] = t.values[k].map(|x| (x - mean) / sd);
            }
        }
        for &c in &flat {
            let msg = format!("dropped column {}: zero variance", t.columns[c]);
            t.warnings.push(msg);
        }
        t.drop_columns(&flat);
        t
    }
}

/// One row per group with repetition-averaged `SC_1..SC_max`.
pub fn feature_table_from_profiles(profiles: &[ComplexityProfile], standardize: bool) -> Result<FeatureTable> {
    let rows = group_labels(profiles);
    let max_dim = profiles.first().map_or(0, ComplexityProfile::max_dim);
    if profiles.iter().any(|p| p.max_dim() != max_dim) {
        return Err(Error::invalid("profiles disagree on max_dim"));
    }
    let columns = (1..=max_dim).map(|n| format!("SC_{n}")).collect();
    let values = rows
        .iter()
        .flat_map(|g| (1..=max_dim).map(move |n| mean_sc(profiles, g, n)))
        .collect();
    let t = FeatureTable::new(rows, columns, values)?;
    Ok(if standardize { t.standardized() } else { t })
}

/// One row per group with integral, max and last per homology dimension.
pub fn feature_table_from_betti(
    labels: &[String],
    features: &[Vec<BettiFeatures>],
    standardize: bool,
) -> Result<FeatureTable> {
    if labels.len() != features.len() {
        return Err(Error::invalid("one feature vector per label is required"));
    }
    let dims = features.first().map_or(0, Vec::len);
    if features.iter().any(|f| f.len() != dims) {
        return Err(Error::invalid("Betti features disagree on dimension count"));
    }
    let columns = (0..dims)
        .flat_map(|k| [format!("H{k}_integral"), format!("H{k}_max"), format!("H{k}_last")])
        .collect();
    let values = features
        .iter()
        .flat_map(|f| f.iter().flat_map(|b| [Some(b.integral), Some(b.max as f64), Some(b.last as f64)]))
        .collect();
    let t = FeatureTable::new(labels.to_vec(), columns, values)?;
    Ok(if standardize { t.standardized() } else { t })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    Single,
    #[default]
    Average,
    Complete,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
    Correlation,
}

/// Row distances over the features both rows define. Euclidean distances
/// are scaled by `sqrt(p / shared)`; correlation falls back to 1 when either
/// row is flat on the shared features.
pub fn row_distance(t: &FeatureTable, a: usize, b: usize, metric: Metric) -> Result<f64> {
    let pairs: Vec<(f64, f64)> = t
        .row(a)
        .iter()
        .zip(t.row(b))
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::invalid(format!(
            "rows {} and {} share no defined feature",
            t.rows[a], t.rows[b]
        )));
    }
    Ok(match metric {
        Metric::Euclidean => {
            let ss: f64 = pairs.iter().map(|(x, y)| (x - y).powi(2)).sum();
            (ss * t.n_cols() as f64 / pairs.len() as f64).sqrt()
        }
        Metric::Correlation => {
            let n = pairs.len() as f64;
            let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pairs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = pairs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
            let syy: f64 = pairs.iter().map(|(_, y)| (y - my).powi(2)).sum();
            if sxx <= 0.0 || syy <= 0.0 {
                1.0
            } else {
                (1.0 - sxy / (sxx * syy).sqrt()).clamp(0.0, 2.0)
            }
        }
    })
}

/// Square matrix of row distances, row-major.
pub fn row_distances(t: &FeatureTable, metric: Metric) -> Result<Vec<f64>> {
    let n = t.n_rows();
    let mut d = vec![0.0; n * n];
    for a in 0..n {
        for b in (a + 1)..n {
            let v = row_distance(t, a, b, metric)?;
            d[a * n + b] = v;
            d[b * n + a] = v;
        }
    }
    Ok(d)
}

/// Merge `i` creates cluster `n + i`; `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dendrogram {
    pub labels: Vec<String>,
    pub merges: Vec<Merge>,
    pub leaf_order: Vec<usize>,
}

/// Agglomerative clustering of a precomputed `n x n` distance matrix.
///
/// Among equally close pairs the one whose smaller leaf index, then larger
/// leaf index, is smallest merges first.
pub fn cluster_distances(n: usize, dist: &[f64], linkage: Linkage, labels: Vec<String>) -> Result<Dendrogram> {
    if n < 2 {
        return Err(Error::invalid("clustering needs at least two rows"));
    }
    if dist.len() != n * n || labels.len() != n {
        return Err(Error::invalid("distance matrix and labels disagree in size"));
    }
    let mut d = dist.to_vec();
    let mut active: Vec<bool> = vec![true; n];
    let mut id: Vec<usize> = (0..n).collect();
    let mut size: Vec<usize> = vec![1; n];
    let mut min_leaf: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !active[j] {
                    continue;
                }
                let (lo, hi) = (min_leaf[i].min(min_leaf[j]), min_leaf[i].max(min_leaf[j]));
                let cand = (d[i * n + j], lo, hi, i, j);
                let better = match best {
                    None => true,
                    Some(b) => cand.0 < b.0 || (cand.0 == b.0 && (cand.1, cand.2) < (b.1, b.2)),
                };
                if better {
                    best = Some(cand);
                }
            }
        }
        let (h, _, _, i, j) = best.expect("two active clusters remain");
        let (si, sj) = (size[i] as f64, size[j] as f64);
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let (dik, djk) = (d[i * n + k], d[j * n + k]);
            let v = match linkage {
                Linkage::Single => dik.min(djk),
                Linkage::Complete => dik.max(djk),
                Linkage::Average => (si * dik + sj * djk) / (si + sj),
            };
            d[i * n + k] = v;
            d[k * n + i] = v;
        }
        merges.push(Merge {
            a: id[i].min(id[j]),
            b: id[i].max(id[j]),
            height: h,
            size: size[i] + size[j],
        });
        active[j] = false;
        id[i] = n + step;
        size[i] += size[j];
        min_leaf[i] = min_leaf[i].min(min_leaf[j]);
    }
    let leaf_order = leaf_order(n, &merges);
    Ok(Dendrogram {
        labels,
        merges,
        leaf_order,
    })
}

/// Children visited smaller subtree first, ties by smaller leaf.
fn leaf_order(n: usize, merges: &[Merge]) -> Vec<usize> {
    let total = n + merges.len();
    let mut size = vec![1usize; total];
    let mut min_leaf: Vec<usize> = (0..total).map(|c| if c < n { c } else { usize::MAX }).collect();
    for (i, m) in merges.iter().enumerate() {
        size[n + i] = m.size;
        min_leaf[n + i] = min_leaf[m.a].min(min_leaf[m.b]);
    }
    let mut out = Vec::with_capacity(n);
    let mut stack = vec![total - 1];
    while let Some(c) = stack.pop() {
        if c < n {
            out.push(c);
            continue;
        }
        let m = merges[c - n];
        let (first, second) = if (size[m.a], min_leaf[m.a]) <= (size[m.b], min_leaf[m.b]) {
            (m.a, m.b)
        } else {
            (m.b, m.a)
        };
        stack.push(second);
        stack.push(first);
    }
    out
}

pub fn hierarchical_cluster(t: &FeatureTable, linkage: Linkage, metric: Metric) -> Result<Dendrogram> {
    if t.n_rows() < 2 {
        return Err(Error::invalid("clustering needs at least two rows"));
    }
    if t.n_cols() == 0 {
        return Err(Error::invalid("feature table has no columns left"));
    }
    let d = row_distances(t, metric)?;
    cluster_distances(t.n_rows(), &d, linkage, t.rows.clone())
}

fn newick_label(s: &str) -> String {
    if s.chars().any(|c| "()[]':;, \t".contains(c)) {
        format!("'{}'", s.replace('\'', "''"))
    } else {
        s.to_string()
    }
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.labels.len()
    }

    fn height(&self, c: usize) -> f64 {
        if c < self.n_leaves() {
            0.0
        } else {
            self.merges[c - self.n_leaves()].height
        }
    }

    pub fn to_newick(&self) -> String {
        let n = self.n_leaves();
        fn render(dg: &Dendrogram, c: usize, out: &mut String) {
            let n = dg.n_leaves();
            if c < n {
                out.push_str(&newick_label(&dg.labels[c]));
                return;
            }
            let m = dg.merges[c - n];
            out.push('(');
            for (k, child) in [m.a, m.b].into_iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                render(dg, child, out);
                out.push_str(&format!(":{}", m.height - dg.height(child)));
            }
            out.push(')');
        }
        let mut out = String::new();
        render(self, n + self.merges.len() - 1, &mut out);
        out.push_str(";\n");
        out
    }

    pub fn write_merges_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["step", "a", "b", "height", "size"])?;
        for (i, m) in self.merges.iter().enumerate() {
            w.write_record([
                i.to_string(),
                m.a.to_string(),
                m.b.to_string(),
                m.height.to_string(),
                m.size.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rows in dendrogram leaf order, columns as in the table.
pub fn heatmap_json(t: &FeatureTable, dg: &Dendrogram) -> serde_json::Value {
    let rows: Vec<&String> = dg.leaf_order.iter().map(|&r| &t.rows[r]).collect();
    let values: Vec<&[Option<f64>]> = dg.leaf_order.iter().map(|&r| t.row(r)).collect();
    serde_json::json!({
        "schema_version": 1,
        "rows": rows,
        "columns": t.columns,
        "values": values,
        "warnings": t.warnings,
    })
}
