use std::collections::HashMap;
use std::path::{Path, PathBuf};

use super::{finish, parse_error, read_text, sort_ids, Dataset, EdgeCollector};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Substring of a feature name that marks the binary gender columns.
pub const GENDER_MARKER: &str = "gender";

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Reads a SNAP ego network (`<prefix>.edges`, `.feat`, `.featnames`).
///
/// Only nodes with a feature row are kept. The sensitive class is the argmax
/// of the two gender columns (class 0 on a tie), and those columns are
/// removed from the features.
pub fn load_snap_ego(prefix: &Path) -> Result<Dataset> {
    let names_path = with_suffix(prefix, ".featnames");
    let feat_path = with_suffix(prefix, ".feat");
    let edges_path = with_suffix(prefix, ".edges");

    let names = read_text(&names_path)?;
    let mut num_names = 0;
    let mut gender = Vec::new();
    for (i, line) in names.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (idx, name) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let idx: usize = idx
            .parse()
            .map_err(|_| parse_error(&names_path, i + 1, format!("bad column index '{idx}'")))?;
        if name.contains(GENDER_MARKER) {
            gender.push(idx);
        }
        num_names += 1;
    }
    if gender.len() != 2 {
        return Err(Error::Schema {
            path: names_path,
            message: format!(
                "expected exactly two '{GENDER_MARKER}' columns, found {}",
                gender.len()
            ),
        });
    }

    let feat = read_text(&feat_path)?;
    let mut rows: HashMap<String, Vec<f64>> = HashMap::new();
    for (i, line) in feat.lines().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != num_names + 1 {
            return Err(parse_error(
                &feat_path,
                i + 1,
                format!("{} values, featnames lists {num_names}", tokens.len() - 1),
            ));
        }
        let values = tokens[1..]
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_error(&feat_path, i + 1, format!("bad value '{t}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.insert(tokens[0].to_string(), values).is_some() {
            return Err(parse_error(&feat_path, i + 1, format!("duplicate node '{}'", tokens[0])));
        }
    }
    if let Some(&bad) = gender.iter().find(|&&g| g >= num_names) {
        return Err(Error::Schema {
            path: names_path,
            message: format!("gender column {bad} outside the {num_names} feature columns"),
        });
    }

    let mut ids: Vec<String> = rows.keys().cloned().collect();
    sort_ids(&mut ids);
    let index: HashMap<String, usize> = ids.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    let kept: Vec<usize> = (0..num_names).filter(|j| !gender.contains(j)).collect();
    let mut data = Vec::with_capacity(ids.len() * kept.len());
    let mut groups = Vec::with_capacity(ids.len());
    let mut fallbacks = 0;
    for id in &ids {
        let r = &rows[id];
        data.extend(kept.iter().map(|&j| r[j]));
        let (a, b) = (r[gender[0]], r[gender[1]]);
        if a == b {
            fallbacks += 1;
            groups.push(0);
        } else {
            groups.push(usize::from(b > a));
        }
    }
    let features = DenseMatrix::new(ids.len(), kept.len(), data)?;

    let edges_text = read_text(&edges_path)?;
    let mut collector = EdgeCollector::new(&index);
    for (i, line) in edges_text.lines().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => continue,
            [a, b] => collector.push(a, b),
            _ => return Err(parse_error(&edges_path, i + 1, "expected '<u> <v>'")),
        }
    }
    let edges = collector.edges();
    let mut report = collector.report;
    report.sensitive_fallbacks = fallbacks;
    finish(ids, edges, features, groups, 2, report)
}
