//! Low-dimensional embeddings: classical MDS on a dissimilarity matrix and PCA
//! on an expression table.
//!
//! Both use a fixed sign convention (the largest-magnitude entry of each
//! eigen/singular direction is made positive) so repeated runs produce
//! bit-identical coordinates.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{DistanceMatrix, ExpressionMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedMethod {
    #[default]
    Mds,
    Pca,
}

impl std::fmt::Display for EmbedMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EmbedMethod::Mds => "mds",
            EmbedMethod::Pca => "pca",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    n: usize,
    k: usize,
    /// Row-major `n * k`.
    coords: Vec<f64>,
    pub method: EmbedMethod,
    pub source_hash: String,
    /// MDS: retained eigenvalues of the double-centered matrix (before
    /// clamping). PCA: explained variance per component.
    pub spectrum: Vec<f64>,
}

impl Embedding {
    pub fn from_coords(n: usize, k: usize, coords: Vec<f64>, method: EmbedMethod) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("embedding dimension must be at least 1"));
        }
        if coords.len() != n * k {
            return Err(Error::invalid(format!(
                "expected {} coordinates for {n} points in {k} dimensions, got {}",
                n * k,
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("embedding coordinates must be finite"));
        }
        let mut h = Sha256::new();
        for c in &coords {
            h.update(c.to_le_bytes());
        }
        Ok(Self {
            n,
            k,
            coords,
            method,
            source_hash: hex::encode(h.finalize()),
            spectrum: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.k..(i + 1) * self.k]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Values of one coordinate across all points.
    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.coords[i * self.k + c]).collect()
    }
}

/// Flip `v` so its largest-magnitude entry (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending (index order on ties).
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Classical (Torgerson) MDS into `k` dimensions. Negative eigenvalues are
/// clamped to zero, so non-Euclidean inputs are accepted.
pub fn classical_mds(d: &DistanceMatrix, k: usize) -> Result<Embedding> {
    let n = d.len();
    if k == 0 || k + 1 > n {
        return Err(Error::invalid(format!(
            "MDS dimension {k} must lie in 1..={}",
            n.saturating_sub(1)
        )));
    }
    let sq: Vec<f64> = d.as_slice().iter().map(|x| x * x).collect();
    let row_mean: Vec<f64> = (0..n)
        .map(|i| sq[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64)
        .collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (sq[i * n + j] - (row_mean[i] + row_mean[j]) + grand)
    });
    let (values, vectors) = sorted_eigen(b);
    let mut coords = vec![0.0; n * k];
    for c in 0..k {
        let mut v: Vec<f64> = vectors.column(c).iter().copied().collect();
        fix_sign(&mut v);
        let scale = values[c].max(0.0).sqrt();
        for i in 0..n {
            coords[i * k + c] = v[i] * scale;
        }
    }
    let mut e = Embedding::from_coords(n, k, coords, EmbedMethod::Mds)?;
    e.source_hash = d.digest();
    e.spectrum = values[..k].to_vec();
    Ok(e)
}

/// Principal components of the column-centered expression values.
pub fn pca(m: &ExpressionMatrix, k: usize) -> Result<Embedding> {
    let n = m.n_cells();
    let g = m.n_genes();
    if k == 0 || k > n.min(g) {
        return Err(Error::invalid(format!(
            "PCA dimension {k} must lie in 1..={}",
            n.min(g)
        )));
    }
    let means: Vec<f64> = (0..g)
        .map(|c| (0..n).map(|i| m.row(i)[c]).sum::<f64>() / n as f64)
        .collect();
    let x = DMatrix::from_fn(n, g, |i, c| m.row(i)[c] - means[c]);
    let svd = x.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let mut coords = vec![0.0; n * k];
    let mut spectrum = Vec::with_capacity(k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let mut dir: Vec<f64> = v_t.row(idx).iter().copied().collect();
        fix_sign(&mut dir);
        for i in 0..n {
            let row = x.row(i);
            coords[i * k + c] = row.iter().zip(&dir).map(|(a, b)| a * b).sum();
        }
        let s = svd.singular_values[idx];
        spectrum.push(s * s / denom);
    }
    let mut e = Embedding::from_coords(n, k, coords, EmbedMethod::Pca)?;
    e.source_hash = m.digest();
    e.spectrum = spectrum;
    Ok(e)
}

/// Pairwise Euclidean distances between embedded points.
pub fn euclidean_distances(e: &Embedding) -> DistanceMatrix {
    let n = e.len();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        let p = e.point(i);
        for j in (i + 1)..n {
            let q = e.point(j);
            let s: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            let v = s.sqrt();
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    DistanceMatrix::from_square(n, data).expect("euclidean distances are valid")
}

/// `cell_id,t,type,x1..xk` with one row per point.
pub fn write_embedding_csv<W: Write>(
    e: &Embedding,
    cell_ids: &[String],
    timestamps: &[u32],
    cell_types: &[String],
    writer: W,
) -> Result<()> {
    if cell_ids.len() != e.len() || timestamps.len() != e.len() || cell_types.len() != e.len() {
        return Err(Error::invalid("metadata length does not match embedding"));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["cell_id".to_string(), "t".into(), "type".into()];
    header.extend((1..=e.dim()).map(|c| format!("x{c}")));
    w.write_record(&header)?;
    for i in 0..e.len() {
        let mut rec = vec![
            cell_ids[i].clone(),
            timestamps[i].to_string(),
            cell_types[i].clone(),
        ];
        rec.extend(e.point(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Embedded points with their cell metadata, as read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedCells {
    pub embedding: Embedding,
    pub cell_ids: Vec<String>,
    pub timestamps: Vec<u32>,
    pub cell_types: Vec<String>,
}

pub fn read_embedding_csv<R: Read>(reader: R, method: EmbedMethod, path: &Path) -> Result<EmbeddedCells> {
    let mut rdr = csv::Reader::from_reader(reader);
    let k = rdr.headers()?.len().saturating_sub(3);
    let mut ids = Vec::new();
    let mut ts = Vec::new();
    let mut types = Vec::new();
    let mut coords = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |column: &str, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            column: column.to_string(),
            message,
        };
        ids.push(rec[0].to_string());
        ts.push(rec[1].parse().map_err(|_| bad("t", format!("bad timestamp `{}`", &rec[1])))?);
        types.push(rec[2].to_string());
        for c in 0..k {
            coords.push(
                rec[3 + c]
                    .parse()
                    .map_err(|_| bad(&format!("x{}", c + 1), format!("bad coordinate `{}`", &rec[3 + c])))?,
            );
        }
    }
    Ok(EmbeddedCells {
        embedding: Embedding::from_coords(ids.len(), k, coords, method)?,
        cell_ids: ids,
        timestamps: ts,
        cell_types: types,
    })
}
