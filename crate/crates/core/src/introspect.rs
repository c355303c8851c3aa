//! PCA projections of learned embedding tables.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::IndexNet;
use crate::numeric::DenseMatrix;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-12;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching unit eigenvectors
/// as rows.
pub fn symmetric_eigen(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::shape("symmetric_eigen columns", n, a.cols()));
    }
    let mut m = a.clone();
    let mut v = DenseMatrix::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }
    let scale: f64 = m.as_slice().iter().map(|x| x * x).sum();
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m.get(p, q) * m.get(p, q);
            }
        }
        if off == 0.0 || off <= 1e-32 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (kp, kq) = (m.get(k, p), m.get(k, q));
                    m.set(k, p, c * kp - s * kq);
                    m.set(k, q, s * kp + c * kq);
                }
                for k in 0..n {
                    let (pk, qk) = (m.get(p, k), m.get(q, k));
                    m.set(p, k, c * pk - s * qk);
                    m.set(q, k, s * pk + c * qk);
                }
                for k in 0..n {
                    let (kp, kq) = (v.get(k, p), v.get(k, q));
                    v.set(k, p, c * kp - s * kq);
                    v.set(k, q, s * kp + c * kq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (r, &i) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(r, k, v.get(k, i));
        }
    }
    Ok((values, vectors))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub labels: Vec<usize>,
    /// `R × k` projected coordinates.
    pub coords: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
    /// `k × D` unit principal directions.
    pub components: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
}

/// Top-`k` principal components of the rows of `table`.
///
/// Signs are fixed so that each component's first non-negligible coordinate is
/// non-negative. Components beyond the rank of the centered rows project to
/// zero with zero explained variance.
pub fn pca_project(table: &DenseMatrix, k: usize) -> Result<ProjectionResult> {
    let (r, d) = (table.rows(), table.cols());
    if r < 2 {
        return Err(Error::Config(format!("PCA needs at least 2 rows, got {r}")));
    }
    if d < k {
        return Err(Error::Config(format!("cannot take {k} components of {d}-dimensional rows")));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| table.iter_rows().map(|row| row[j]).sum::<f64>() / r as f64)
        .collect();
    let centered: Vec<Vec<f64>> = table
        .iter_rows()
        .map(|row| row.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let mut cov = DenseMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let c = centered.iter().map(|row| row[i] * row[j]).sum::<f64>() / (r - 1) as f64;
            cov.set(i, j, c);
            cov.set(j, i, c);
        }
    }
    let (values, vectors) = symmetric_eigen(&cov)?;
    let values: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
    let top = values.first().copied().unwrap_or(0.0);
    let total: f64 = values.iter().sum();

    let mut coords = vec![vec![0.0; k]; r];
    let mut components = Vec::with_capacity(k);
    let mut evr = Vec::with_capacity(k);
    for c in 0..k {
        let mut dir = vectors.row(c).to_vec();
        if values[c] <= RANK_TOL * top || total == 0.0 {
            components.push(dir);
            evr.push(0.0);
            continue;
        }
        let mut col: Vec<f64> = centered
            .iter()
            .map(|row| row.iter().zip(&dir).map(|(x, w)| x * w).sum())
            .collect();
        let peak = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if let Some(first) = col.iter().find(|v| v.abs() > 1e-9 * peak) {
            if *first < 0.0 {
                col.iter_mut().for_each(|v| *v = -*v);
                dir.iter_mut().for_each(|v| *v = -*v);
            }
        }
        for (row, v) in coords.iter_mut().zip(col) {
            row[c] = v;
        }
        components.push(dir);
        evr.push(values[c] / total);
    }
    Ok(ProjectionResult {
        labels: (0..r).collect(),
        coords,
        explained_variance_ratio: evr,
        components,
        mean,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaSummary {
    pub coords: Vec<Vec<f64>>,
    pub evr: Vec<f64>,
}

/// One exported table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingExport {
    pub table: String,
    pub dim: usize,
    pub labels: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
    pub pca: PcaSummary,
}

const EXPORT_COMPONENTS: usize = 3;

/// Natural labels: minute slot, hour 0–23 and weekday 0–6 (Monday = 0) from
/// zero, day of month, month and channel from one.
fn labels_for(table: &str, rows: usize) -> Vec<usize> {
    match table {
        "te.dom" | "te.month" | "ce.identity" => (1..=rows).collect(),
        _ => (0..rows).collect(),
    }
}

/// A table's rows with a three-component projection. Tables narrower than
/// three columns are padded with zero components; single-row tables get zero
/// coordinates.
pub fn export_table(name: &str, table: &DenseMatrix) -> Result<EmbeddingExport> {
    let (r, d) = (table.rows(), table.cols());
    let k = EXPORT_COMPONENTS.min(d);
    let (mut coords, mut evr) = if r >= 2 {
        let p = pca_project(table, k)?;
        (p.coords, p.explained_variance_ratio)
    } else {
        log::warn!("{name} has a single row; PCA coordinates set to zero");
        (vec![vec![0.0; k]; r], vec![0.0; k])
    };
    for row in coords.iter_mut() {
        row.resize(EXPORT_COMPONENTS, 0.0);
    }
    evr.resize(EXPORT_COMPONENTS, 0.0);
    Ok(EmbeddingExport {
        table: name.to_string(),
        dim: d,
        labels: labels_for(name, r),
        rows: table.to_rows(),
        pca: PcaSummary { coords, evr },
    })
}

/// Every active table of a model, in parameter order.
pub fn embedding_exports(model: &IndexNet) -> Result<Vec<EmbeddingExport>> {
    let mut out = Vec::new();
    if let Some(t) = &model.embedding.timestamp {
        for (name, table) in t.tables() {
            out.push(export_table(&format!("te.{name}"), table)?);
        }
    }
    if let Some(c) = &model.embedding.channel {
        out.push(export_table("ce.identity", &c.table)?);
    }
    Ok(out)
}

/// Writes one `<table>.json` per active table into `dir` and returns the paths.
pub fn export_embeddings(model: &IndexNet, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for export in embedding_exports(model)? {
        let path = dir.join(format!("{}.json", export.table.replace('.', "_")));
        let text = serde_json::to_string_pretty(&export)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonalizes_a_known_matrix() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let (vals, vecs) = symmetric_eigen(&a).unwrap();
        assert!((vals[0] - 3.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((vecs.get(0, 0).abs() - s).abs() < 1e-12);
        assert!((vecs.get(0, 0) - vecs.get(0, 1)).abs() < 1e-12);
    }

    #[test]
    fn line_in_five_dimensions() {
        let rows: Vec<Vec<f64>> = [1.0, -1.0, 0.0]
            .iter()
            .map(|&x| vec![x, 0.0, 0.0, 0.0, 0.0])
            .collect();
        let p = pca_project(&DenseMatrix::from_rows(&rows).unwrap(), 3).unwrap();
        assert!((p.components[0][0] - 1.0).abs() < 1e-12);
        assert_eq!(p.coords[0][0], 1.0);
        assert_eq!(p.coords[1][0], -1.0);
        assert_eq!(p.explained_variance_ratio, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn identical_rows_project_to_zero() {
        let table = DenseMatrix::from_rows(&vec![vec![0.5, -2.0, 3.0, 1.0]; 6]).unwrap();
        let p = pca_project(&table, 3).unwrap();
        assert!(p.coords.iter().flatten().all(|&c| c == 0.0));
        assert_eq!(p.explained_variance_ratio, vec![0.0; 3]);
    }

    #[test]
    fn low_rank_ratios_sum_to_one() {
        let basis = [
            [1.0, 0.0, 2.0, 0.0, -1.0, 0.0, 0.5, 0.0],
            [0.0, 1.0, 0.0, -1.0, 0.0, 3.0, 0.0, 0.2],
            [0.3, 0.3, -0.3, 0.3, 0.3, 0.0, 1.0, 1.0],
        ];
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let w = [(i as f64).sin(), (i as f64 * 0.7).cos(), (i as f64 * 1.3).sin() * 0.5];
                (0..8).map(|j| (0..3).map(|b| w[b] * basis[b][j]).sum()).collect()
            })
            .collect();
        let p = pca_project(&DenseMatrix::from_rows(&rows).unwrap(), 3).unwrap();
        let sum: f64 = p.explained_variance_ratio.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(p.explained_variance_ratio.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn preconditions() {
        assert!(pca_project(&DenseMatrix::zeros(1, 4), 3).is_err());
        assert!(pca_project(&DenseMatrix::zeros(4, 2), 3).is_err());
    }

    #[test]
    fn narrow_tables_are_padded() {
        let table = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0]]).unwrap();
        let e = export_table("te.hour", &table).unwrap();
        assert!(e.pca.coords.iter().all(|c| c.len() == 3 && c[2] == 0.0));
        assert_eq!(e.pca.evr.len(), 3);
        let single = export_table("ce.identity", &DenseMatrix::zeros(1, 4)).unwrap();
        assert_eq!(single.labels, vec![1]);
    }
}
