use std::collections::HashMap;
use std::path::Path;

use super::{finish, label_classes, parse_error, read_text, sort_ids, Dataset, EdgeCollector};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_error(path, line, e.to_string())
}

/// Reads `nodes.csv` with header `id,sensitive,<feature…>` and `edges.csv`
/// with header `source,target`. Sensitive values are arbitrary labels
/// mapped to classes in sorted order.
pub fn load_csv(nodes_path: &Path, edges_path: &Path) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(nodes_path).map_err(|e| csv_error(nodes_path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(nodes_path, e))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::Schema {
            path: nodes_path.into(),
            message: format!("missing '{name}' column"),
        })
    };
    let id_col = col("id")?;
    let sens_col = col("sensitive")?;
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&j| j != id_col && j != sens_col).collect();

    let mut rows: HashMap<String, (Vec<f64>, String)> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(nodes_path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let feats = feature_cols
            .iter()
            .map(|&j| {
                let t = record[j].trim();
                t.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_error(nodes_path, line, format!("bad feature '{t}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let id = record[id_col].trim().to_string();
        if rows.insert(id.clone(), (feats, record[sens_col].trim().to_string())).is_some() {
            return Err(parse_error(nodes_path, line, format!("duplicate node id '{id}'")));
        }
    }

    let mut ids: Vec<String> = rows.keys().cloned().collect();
    sort_ids(&mut ids);
    let index: HashMap<String, usize> = ids.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    let mut data = Vec::with_capacity(ids.len() * feature_cols.len());
    let mut labels = Vec::with_capacity(ids.len());
    for id in &ids {
        let (f, l) = &rows[id];
        data.extend_from_slice(f);
        labels.push(l.clone());
    }
    let features = DenseMatrix::new(ids.len(), feature_cols.len(), data)?;
    let (groups, names) = label_classes(&labels);

    let mut reader = csv::Reader::from_path(edges_path).map_err(|e| csv_error(edges_path, e))?;
    let mut collector = EdgeCollector::new(&index);
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(edges_path, e))?;
        if record.len() < 2 {
            let line = record.position().map_or(0, |p| p.line() as usize);
            return Err(parse_error(edges_path, line, "expected source,target"));
        }
        collector.push(record[0].trim(), record[1].trim());
    }
    let edges = collector.edges();
    finish(ids, edges, features, groups, names.len(), collector.report)
}

/// Reads the tab-separated release of a citation network: a node file whose
/// second line declares `numeric:<name>:<default>` columns and whose rows
/// are `<id> label=<c> <name>=<value>… summary=…`, and an edge file with
/// rows `<edge id> paper:<a> | paper:<b>`.
pub fn load_pubmed_tab(nodes_path: &Path, cites_path: &Path) -> Result<Dataset> {
    let text = read_text(nodes_path)?;
    let mut lines = text.lines().enumerate();
    lines.next();
    let (_, schema) = lines
        .next()
        .ok_or_else(|| parse_error(nodes_path, 2, "missing column declaration line"))?;
    let mut columns: HashMap<String, usize> = HashMap::new();
    let mut defaults = Vec::new();
    for field in schema.split('\t') {
        let mut parts = field.splitn(3, ':');
        if parts.next() == Some("numeric") {
            let name = parts.next().unwrap_or_default().to_string();
            let default = parts
                .next()
                .and_then(|d| d.parse::<f64>().ok())
                .ok_or_else(|| parse_error(nodes_path, 2, format!("bad column '{field}'")))?;
            columns.insert(name, defaults.len());
            defaults.push(default);
        }
    }

    let mut rows: HashMap<String, (Vec<f64>, String)> = HashMap::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let mut fields = line.split('\t').filter(|f| !f.is_empty());
        let Some(id) = fields.next() else { continue };
        let mut feats = defaults.clone();
        let mut label = None;
        for field in fields {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| parse_error(nodes_path, lineno, format!("expected key=value, got '{field}'")))?;
            match key {
                "label" => label = Some(value.to_string()),
                "summary" => {}
                _ => {
                    let j = *columns
                        .get(key)
                        .ok_or_else(|| parse_error(nodes_path, lineno, format!("undeclared column '{key}'")))?;
                    feats[j] = value
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| parse_error(nodes_path, lineno, format!("bad value '{value}'")))?;
                }
            }
        }
        let label = label.ok_or_else(|| parse_error(nodes_path, lineno, "no label field"))?;
        if rows.insert(id.to_string(), (feats, label)).is_some() {
            return Err(parse_error(nodes_path, lineno, format!("duplicate node id '{id}'")));
        }
    }

    let mut ids: Vec<String> = rows.keys().cloned().collect();
    sort_ids(&mut ids);
    let index: HashMap<String, usize> = ids.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    let m = defaults.len();
    let mut data = Vec::with_capacity(ids.len() * m);
    let mut labels = Vec::with_capacity(ids.len());
    for id in &ids {
        let (f, l) = &rows[id];
        data.extend_from_slice(f);
        labels.push(l.clone());
    }
    let features = DenseMatrix::new(ids.len(), m, data)?;
    let (groups, names) = label_classes(&labels);

    let cites = read_text(cites_path)?;
    let mut collector = EdgeCollector::new(&index);
    for (i, line) in cites.lines().enumerate().skip(2) {
        let fields: Vec<&str> = line.split('\t').filter(|f| !f.is_empty() && *f != "|").collect();
        match fields.as_slice() {
            [] => continue,
            [_, a, b] => {
                let strip = |s: &str| s.strip_prefix("paper:").unwrap_or(s).to_string();
                collector.push(&strip(a), &strip(b));
            }
            _ => return Err(parse_error(cites_path, i + 1, "expected '<id> paper:<a> | paper:<b>'")),
        }
    }
    let edges = collector.edges();
    finish(ids, edges, features, groups, names.len(), collector.report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let nodes = dir.path().join("nodes.csv");
        let edges = dir.path().join("edges.csv");
        std::fs::write(&nodes, "id,sensitive,x,y\n2,f,0.5,1\n1,m,1.5,0\n3,f,0,0\n").unwrap();
        std::fs::write(&edges, "source,target\n1,2\n2,3\n3,2\n4,1\n").unwrap();
        let ds = load_csv(&nodes, &edges).unwrap();
        assert_eq!(ds.node_ids, ["1", "2", "3"]);
        assert_eq!(ds.graph.groups(), &[1, 0, 0]);
        assert_eq!(ds.graph.features().row(1), &[0.5, 1.0]);
        assert_eq!(ds.graph.num_edges(), 2);
        assert_eq!(ds.report.unknown_endpoint, 1);
        assert_eq!(ds.report.duplicates, 1);
    }

    #[test]
    fn csv_errors() {
        let dir = tempfile::tempdir().unwrap();
        let nodes = dir.path().join("nodes.csv");
        let edges = dir.path().join("edges.csv");
        std::fs::write(&edges, "source,target\n").unwrap();
        std::fs::write(&nodes, "id,x\n1,0\n").unwrap();
        assert!(matches!(load_csv(&nodes, &edges), Err(Error::Schema { .. })));
        std::fs::write(&nodes, "id,sensitive,x\n1,a,0\n2,b,zz\n").unwrap();
        assert!(matches!(load_csv(&nodes, &edges), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn pubmed_tab_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let nodes = dir.path().join("P.NODE.paper.tab");
        let cites = dir.path().join("P.DIRECTED.cites.tab");
        std::fs::write(
            &nodes,
            "NODE\tpaper\ncat=1,2,3:label\tnumeric:w-a:0.0\tnumeric:w-b:0.0\tsummary:string\n\
             20\tlabel=1\tw-a=0.5\tsummary=w-a\n\
             10\tlabel=3\tw-b=0.25\tw-a=0.1\tsummary=w-b,w-a\n",
        )
        .unwrap();
        std::fs::write(
            &cites,
            "DIRECTED\tcites\nNO_FEATURES\n1\tpaper:10\t|\tpaper:20\n2\tpaper:20\t|\tpaper:30\n",
        )
        .unwrap();
        let ds = load_pubmed_tab(&nodes, &cites).unwrap();
        assert_eq!(ds.node_ids, ["10", "20"]);
        assert_eq!(ds.graph.features().row(0), &[0.1, 0.25]);
        assert_eq!(ds.graph.features().row(1), &[0.5, 0.0]);
        assert_eq!(ds.graph.groups(), &[1, 0]);
        assert_eq!(ds.graph.num_edges(), 1);
        assert_eq!(ds.report.unknown_endpoint, 1);
    }
}
