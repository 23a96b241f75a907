use std::path::Path;

use super::parse_error;
use crate::error::{Error, Result};
use crate::graph::SplitResult;
use crate::linalg::DenseMatrix;
use crate::metrics::{summarize, MetricsRecord, Stat};
use crate::model::Embeddings;

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn csv_bytes(build: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    build(&mut w).map_err(|e| Error::invalid(format!("csv encoding: {e}")))?;
    w.into_inner()
        .map_err(|e| Error::invalid(format!("csv encoding: {e}")))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_error(path, line, e.to_string())
}

/// Embeddings as read back from an export.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub node_ids: Vec<String>,
    pub groups: Vec<usize>,
    pub embeddings: Embeddings,
}

/// One row per node: `node,sensitive,e0,…,e{d-1}`, values with 17
/// significant digits so parsing restores them exactly.
pub fn export_embeddings(phi: &Embeddings, groups: &[usize], node_ids: &[String], path: &Path) -> Result<()> {
    let n = phi.num_nodes();
    if groups.len() != n || node_ids.len() != n {
        return Err(Error::invalid(format!(
            "{n} embeddings, {} groups, {} ids",
            groups.len(),
            node_ids.len()
        )));
    }
    let bytes = csv_bytes(|w| {
        let mut header = vec!["node".to_string(), "sensitive".to_string()];
        header.extend((0..phi.dim()).map(|j| format!("e{j}")));
        w.write_record(&header)?;
        for v in 0..n {
            let mut row = vec![node_ids[v].clone(), groups[v].to_string()];
            row.extend(phi.row(v).iter().map(|x| format!("{x:.16e}")));
            w.write_record(&row)?;
        }
        Ok(())
    })?;
    write_atomic(path, &bytes)
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() < 2 || &headers[0] != "node" || &headers[1] != "sensitive" {
        return Err(Error::Schema {
            path: path.into(),
            message: "header must start with node,sensitive".into(),
        });
    }
    let d = headers.len() - 2;
    let mut ids = Vec::new();
    let mut groups = Vec::new();
    let mut data = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        ids.push(record[0].to_string());
        groups.push(
            record[1]
                .parse()
                .map_err(|_| parse_error(path, line, format!("bad class '{}'", &record[1])))?,
        );
        for t in record.iter().skip(2) {
            data.push(
                t.parse::<f64>()
                    .map_err(|_| parse_error(path, line, format!("bad value '{t}'")))?,
            );
        }
    }
    let embeddings = Embeddings::new(DenseMatrix::new(ids.len(), d, data)?);
    Ok(EmbeddingTable {
        node_ids: ids,
        groups,
        embeddings,
    })
}

/// One (dataset, model, split) line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub model: String,
    pub record: MetricsRecord,
}

fn dp_header(rows: &[ResultRow]) -> Result<Vec<usize>> {
    let ks: Vec<usize> = rows
        .first()
        .map(|r| r.record.dp.iter().map(|d| d.0).collect())
        .unwrap_or_else(|| crate::metrics::DEFAULT_KS.to_vec());
    if rows.iter().any(|r| r.record.dp.iter().map(|d| d.0).ne(ks.iter().copied())) {
        return Err(Error::invalid("rows disagree on the DP@k list"));
    }
    Ok(ks)
}

/// Columns `dataset,model,seed,L_R,L_D_sum,L_D_mean,auroc,f1,dp<k>…`; each
/// (dataset, model) group with two or more runs is followed by a `mean` and
/// a `std` row.
pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    let ks = dp_header(rows)?;
    let mut groups: Vec<(&str, &str)> = Vec::new();
    for r in rows {
        let key = (r.dataset.as_str(), r.model.as_str());
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    let mut summary_rows = Vec::new();
    for (dataset, model) in groups {
        let recs: Vec<MetricsRecord> = rows
            .iter()
            .filter(|r| r.dataset == dataset && r.model == model)
            .map(|r| r.record.clone())
            .collect();
        if recs.len() >= 2 {
            let s = summarize(&recs)?;
            let pick = |f: fn(&Stat) -> f64| {
                let mut v = vec![
                    f(&s.reconstruction),
                    f(&s.divergence_sum),
                    f(&s.divergence_mean),
                    f(&s.auroc),
                    f(&s.f1),
                ];
                v.extend(s.dp.iter().map(|(_, st)| f(st)));
                v
            };
            summary_rows.push((dataset, model, "mean", pick(|s| s.mean)));
            summary_rows.push((dataset, model, "std", pick(|s| s.std)));
        }
    }
    let bytes = csv_bytes(|w| {
        let mut header: Vec<String> = ["dataset", "model", "seed", "L_R", "L_D_sum", "L_D_mean", "auroc", "f1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(ks.iter().map(|k| format!("dp{k}")));
        w.write_record(&header)?;
        for r in rows {
            let m = &r.record;
            let mut line = vec![r.dataset.clone(), r.model.clone(), m.seed.to_string()];
            line.extend(
                [m.reconstruction, m.divergence_sum, m.divergence_mean, m.auroc, m.f1]
                    .iter()
                    .chain(m.dp.iter().map(|d| &d.1))
                    .map(|x| x.to_string()),
            );
            w.write_record(&line)?;
        }
        for (dataset, model, kind, values) in &summary_rows {
            let mut line = vec![dataset.to_string(), model.to_string(), kind.to_string()];
            line.extend(values.iter().map(|x| x.to_string()));
            w.write_record(&line)?;
        }
        Ok(())
    })?;
    write_atomic(path, &bytes)
}

/// Reads the per-split rows of a results table, skipping summary rows.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let ks = headers
        .iter()
        .skip(8)
        .map(|h| {
            h.strip_prefix("dp").and_then(|k| k.parse().ok()).ok_or_else(|| Error::Schema {
                path: path.into(),
                message: format!("unexpected column '{h}'"),
            })
        })
        .collect::<Result<Vec<usize>>>()?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let Ok(seed) = record[2].parse::<u64>() else {
            continue;
        };
        let num = |j: usize| -> Result<f64> {
            record[j]
                .parse()
                .map_err(|_| parse_error(path, line, format!("bad number '{}'", &record[j])))
        };
        out.push(ResultRow {
            dataset: record[0].to_string(),
            model: record[1].to_string(),
            record: MetricsRecord {
                seed,
                reconstruction: num(3)?,
                divergence_sum: num(4)?,
                divergence_mean: num(5)?,
                auroc: num(6)?,
                f1: num(7)?,
                dp: ks.iter().enumerate().map(|(i, &k)| Ok((k, num(8 + i)?))).collect::<Result<_>>()?,
            },
        });
    }
    Ok(out)
}

/// A train/test split in original node identifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitFiles {
    pub train_nodes: Vec<String>,
    pub train_edges: Vec<(String, String)>,
    pub test_edges: Vec<(String, String)>,
}

impl SplitFiles {
    pub fn from_split(split: &SplitResult, node_ids: &[String]) -> Self {
        let id = |v: usize| node_ids[split.train_to_original[v]].clone();
        Self {
            train_nodes: (0..split.train.num_nodes()).map(id).collect(),
            train_edges: split.train.edges().iter().map(|&(u, v)| (id(u), id(v))).collect(),
            test_edges: split.test_pos.iter().map(|&(u, v)| (id(u), id(v))).collect(),
        }
    }
}

/// Writes `train_nodes.csv`, `train_edges.csv` and `test_edges.csv` into `dir`.
pub fn write_split(split: &SplitFiles, dir: &Path) -> Result<()> {
    let nodes = csv_bytes(|w| {
        w.write_record(["index", "node"])?;
        for (i, id) in split.train_nodes.iter().enumerate() {
            w.write_record([i.to_string(), id.clone()])?;
        }
        Ok(())
    })?;
    write_atomic(&dir.join("train_nodes.csv"), &nodes)?;
    for (name, edges) in [("train_edges.csv", &split.train_edges), ("test_edges.csv", &split.test_edges)] {
        let bytes = csv_bytes(|w| {
            w.write_record(["source", "target"])?;
            for (a, b) in edges {
                w.write_record([a, b])?;
            }
            Ok(())
        })?;
        write_atomic(&dir.join(name), &bytes)?;
    }
    Ok(())
}

pub fn read_split(dir: &Path) -> Result<SplitFiles> {
    let pairs = |name: &str| -> Result<Vec<(String, String)>> {
        let path = dir.join(name);
        let mut reader = csv::Reader::from_path(&path).map_err(|e| csv_error(&path, e))?;
        reader
            .records()
            .map(|r| {
                let r = r.map_err(|e| csv_error(&path, e))?;
                Ok((r[0].to_string(), r[1].to_string()))
            })
            .collect()
    };
    Ok(SplitFiles {
        train_nodes: pairs("train_nodes.csv")?.into_iter().map(|(_, id)| id).collect(),
        train_edges: pairs("train_edges.csv")?,
        test_edges: pairs("test_edges.csv")?,
    })
}
