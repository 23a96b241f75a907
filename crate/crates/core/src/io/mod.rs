//! Dataset loaders, embedding export and results tables.

mod content_cites;
mod export;
mod snap;
mod tabular;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use content_cites::load_content_cites;
pub use export::{
    export_embeddings, read_embeddings, read_results, read_split, write_results, write_split,
    EmbeddingTable, ResultRow, SplitFiles,
};
pub use snap::{load_snap_ego, GENDER_MARKER};
pub use tabular::{load_csv, load_pubmed_tab};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::linalg::DenseMatrix;

/// On-disk layout of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    /// `<prefix>.content` and `<prefix>.cites`, whitespace separated.
    ContentCites,
    /// `<prefix>.edges`, `<prefix>.feat`, `<prefix>.featnames`.
    SnapEgo,
    /// `nodes.csv` (`id,sensitive,<features…>`) and `edges.csv` (`source,target`).
    GenericCsv,
    /// `*.NODE.paper.tab` and `*.DIRECTED.cites.tab`.
    PubmedTab,
    /// Planted-partition generator; the path holds `key=value` pairs.
    Synthetic,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::ContentCites => "content-cites",
            DatasetKind::SnapEgo => "snap-ego",
            DatasetKind::GenericCsv => "generic-csv",
            DatasetKind::PubmedTab => "pubmed-tab",
            DatasetKind::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "content-cites" | "planetoid" => Ok(DatasetKind::ContentCites),
            "snap-ego" | "snap" => Ok(DatasetKind::SnapEgo),
            "generic-csv" | "csv" => Ok(DatasetKind::GenericCsv),
            "pubmed-tab" | "pubmed" => Ok(DatasetKind::PubmedTab),
            "synthetic" => Ok(DatasetKind::Synthetic),
            _ => Err(Error::invalid(format!("unknown dataset kind '{s}'"))),
        }
    }
}

/// Where a dataset lives and how to read it, written `kind:path`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub path: String,
}

impl DatasetSpec {
    pub fn new(kind: DatasetKind, path: impl Into<String>) -> Self {
        Self {
            kind,
            path: path.into(),
        }
    }

    /// Short name used in results tables: the file stem or directory name.
    pub fn display_name(&self) -> String {
        if self.kind == DatasetKind::Synthetic {
            return "synthetic".into();
        }
        let p = Path::new(&self.path);
        p.file_stem()
            .or_else(|| p.file_name())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.path.clone())
    }
}

impl fmt::Display for DatasetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.path)
    }
}

impl FromStr for DatasetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, path) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("dataset '{s}' is not of the form kind:path")))?;
        Ok(Self::new(kind.parse()?, path))
    }
}

/// Counts gathered while loading, for reporting deviations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub nodes: usize,
    /// Edge lines read, before any filtering.
    pub raw_edges: usize,
    /// Undirected edges kept.
    pub edges: usize,
    pub unknown_endpoint: usize,
    pub self_loops: usize,
    /// Lines that repeat an already seen undirected pair.
    pub duplicates: usize,
    /// Nodes whose sensitive value fell back to class 0.
    pub sensitive_fallbacks: usize,
    pub feature_dim: usize,
    pub num_groups: usize,
}

/// A loaded graph plus the original node identifiers, in index order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub node_ids: Vec<String>,
    pub report: LoadReport,
}

impl Dataset {
    pub fn index_of(&self) -> HashMap<&str, usize> {
        self.node_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
    }
}

pub fn load_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    let path = Path::new(&spec.path);
    let mut ds = match spec.kind {
        DatasetKind::ContentCites => {
            let prefix = resolve_prefix(path, "content")?;
            load_content_cites(&prefix.with_extension("content"), &prefix.with_extension("cites"))?
        }
        DatasetKind::SnapEgo => load_snap_ego(path)?,
        DatasetKind::GenericCsv => load_csv(&path.join("nodes.csv"), &path.join("edges.csv"))?,
        DatasetKind::PubmedTab => {
            let nodes = find_with_suffix(path, ".NODE.paper.tab")?;
            let cites = find_with_suffix(path, ".DIRECTED.cites.tab")?;
            load_pubmed_tab(&nodes, &cites)?
        }
        DatasetKind::Synthetic => crate::synthetic::PlantedPartition::from_spec(&spec.path)?.generate()?,
    };
    ds.name = spec.display_name();
    Ok(ds)
}

/// `dir` holding exactly one `*.<ext>` file, or a path prefix.
fn resolve_prefix(path: &Path, ext: &str) -> Result<PathBuf> {
    if path.is_dir() {
        let found = list_dir(path)?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e == ext))
            .collect::<Vec<_>>();
        return match found.as_slice() {
            [one] => Ok(one.with_extension("")),
            [] => Err(Error::Schema {
                path: path.into(),
                message: format!("no .{ext} file"),
            }),
            _ => Err(Error::Schema {
                path: path.into(),
                message: format!("several .{ext} files"),
            }),
        };
    }
    if path.extension().is_some_and(|e| e == ext) {
        return Ok(path.with_extension(""));
    }
    Ok(path.to_path_buf())
}

fn find_with_suffix(dir: &Path, suffix: &str) -> Result<PathBuf> {
    list_dir(dir)?
        .into_iter()
        .find(|p| p.to_string_lossy().ends_with(suffix))
        .ok_or_else(|| Error::Schema {
            path: dir.into(),
            message: format!("no file ending in {suffix}"),
        })
}

fn list_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?;
    out.sort();
    Ok(out)
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        line,
        message: message.into(),
    }
}

/// Numeric ascending when every id is an integer, lexicographic otherwise.
pub(crate) fn sort_ids(ids: &mut [String]) {
    let numeric: Option<Vec<i128>> = ids.iter().map(|s| s.parse().ok()).collect();
    if numeric.is_some() {
        ids.sort_by_key(|s| s.parse::<i128>().expect("checked numeric"));
    } else {
        ids.sort();
    }
}

/// Collects raw id pairs into undirected edges, tallying what gets dropped.
pub(crate) struct EdgeCollector<'a> {
    index: &'a HashMap<String, usize>,
    seen: std::collections::HashSet<Edge>,
    pub report: LoadReport,
}

impl<'a> EdgeCollector<'a> {
    pub fn new(index: &'a HashMap<String, usize>) -> Self {
        Self {
            index,
            seen: Default::default(),
            report: LoadReport::default(),
        }
    }

    pub fn push(&mut self, a: &str, b: &str) {
        self.report.raw_edges += 1;
        let (Some(&u), Some(&v)) = (self.index.get(a), self.index.get(b)) else {
            self.report.unknown_endpoint += 1;
            return;
        };
        if u == v {
            self.report.self_loops += 1;
            return;
        }
        if !self.seen.insert(crate::graph::canonical(u, v)) {
            self.report.duplicates += 1;
        }
    }

    pub fn edges(&self) -> Vec<Edge> {
        let mut e: Vec<Edge> = self.seen.iter().copied().collect();
        e.sort_unstable();
        e
    }
}

/// Maps sorted distinct labels to class indices.
pub(crate) fn label_classes(labels: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut names: Vec<String> = labels.to_vec();
    names.sort();
    names.dedup();
    let pos: HashMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    (labels.iter().map(|l| pos[l.as_str()]).collect(), names)
}

pub(crate) fn finish(
    ids: Vec<String>,
    edges: Vec<Edge>,
    features: DenseMatrix,
    groups: Vec<usize>,
    num_groups: usize,
    mut report: LoadReport,
) -> Result<Dataset> {
    if ids.is_empty() {
        return Err(Error::invalid("dataset has no nodes"));
    }
    report.nodes = ids.len();
    report.edges = edges.len();
    report.feature_dim = features.cols();
    report.num_groups = num_groups;
    let graph = Graph::new(ids.len(), edges, features, groups, num_groups)?;
    Ok(Dataset {
        name: String::new(),
        graph,
        node_ids: ids,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing() {
        let s: DatasetSpec = "content-cites:data/cora".parse().unwrap();
        assert_eq!(s.kind, DatasetKind::ContentCites);
        assert_eq!(s.path, "data/cora");
        assert_eq!(s.display_name(), "cora");
        assert_eq!(s.to_string(), "content-cites:data/cora");
        assert!("nope".parse::<DatasetSpec>().is_err());
        assert!("weird:x".parse::<DatasetSpec>().is_err());
        let f: DatasetSpec = "snap-ego:facebook/1684".parse().unwrap();
        assert_eq!(f.display_name(), "1684");
    }

    #[test]
    fn id_ordering() {
        let mut ids: Vec<String> = ["10", "9", "100"].iter().map(|s| s.to_string()).collect();
        sort_ids(&mut ids);
        assert_eq!(ids, ["9", "10", "100"]);
        let mut ids: Vec<String> = ["b10", "a", "b9"].iter().map(|s| s.to_string()).collect();
        sort_ids(&mut ids);
        assert_eq!(ids, ["a", "b10", "b9"]);
    }

    #[test]
    fn content_cites_via_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("toy.content"), "1 1 0 A\n2 0 1 B\n").unwrap();
        std::fs::write(dir.path().join("toy.cites"), "1 2\n").unwrap();
        let spec = DatasetSpec::new(DatasetKind::ContentCites, dir.path().to_string_lossy());
        let ds = load_dataset(&spec).unwrap();
        assert_eq!(ds.graph.num_edges(), 1);
        let spec = DatasetSpec::new(
            DatasetKind::ContentCites,
            dir.path().join("toy.content").to_string_lossy(),
        );
        assert_eq!(load_dataset(&spec).unwrap().name, "toy");
    }
}
