use std::collections::HashMap;
use std::path::Path;

use super::{finish, label_classes, parse_error, read_text, sort_ids, Dataset, EdgeCollector};
use crate::error::Result;
use crate::linalg::DenseMatrix;

/// Reads a citation network: `<id> <f_0> … <f_{m-1}> <label>` per content
/// line and `<cited> <citing>` per cites line. The label becomes the
/// sensitive class (sorted label order).
pub fn load_content_cites(content_path: &Path, cites_path: &Path) -> Result<Dataset> {
    let content = read_text(content_path)?;
    let mut rows: HashMap<String, (Vec<f64>, String)> = HashMap::new();
    let mut width = None;
    for (i, line) in content.lines().enumerate() {
        let lineno = i + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() < 2 {
            return Err(parse_error(content_path, lineno, "expected an id and a label"));
        }
        let m = tokens.len() - 2;
        match width {
            None => width = Some(m),
            Some(w) if w != m => {
                return Err(parse_error(
                    content_path,
                    lineno,
                    format!("{m} features, earlier lines have {w}"),
                ))
            }
            _ => {}
        }
        let feats = tokens[1..tokens.len() - 1]
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_error(content_path, lineno, format!("bad feature '{t}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let id = tokens[0].to_string();
        let label = tokens[tokens.len() - 1].to_string();
        if rows.insert(id.clone(), (feats, label)).is_some() {
            return Err(parse_error(content_path, lineno, format!("duplicate node id '{id}'")));
        }
    }

    let mut ids: Vec<String> = rows.keys().cloned().collect();
    sort_ids(&mut ids);
    let index: HashMap<String, usize> = ids.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    let m = width.unwrap_or(0);
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
    for (i, line) in cites.lines().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => continue,
            [a, b] => collector.push(a, b),
            _ => return Err(parse_error(cites_path, i + 1, "expected '<cited> <citing>'")),
        }
    }
    let edges = collector.edges();
    finish(ids, edges, features, groups, names.len(), collector.report)
}
