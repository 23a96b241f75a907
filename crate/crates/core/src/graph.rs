//! Attributed undirected graphs, symmetric normalization and the
//! edge-holdout split used for link-prediction evaluation.

use std::collections::{HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Rng, SparseMatrix};

pub type Edge = (usize, usize);

/// Orders an unordered pair as `(min, max)`.
#[inline]
pub fn canonical(u: usize, v: usize) -> Edge {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Undirected graph with node features and one categorical sensitive
/// attribute.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted; self-loops are
/// never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    features: DenseMatrix,
    groups: Vec<usize>,
    num_groups: usize,
}

impl Graph {
    /// `groups[v]` is the sensitive class of `v`, in `0..num_groups`.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = Edge>,
        features: DenseMatrix,
        groups: Vec<usize>,
        num_groups: usize,
    ) -> Result<Self> {
        if features.rows() != n {
            return Err(Error::invalid(format!(
                "feature matrix has {} rows for {n} nodes",
                features.rows()
            )));
        }
        if groups.len() != n {
            return Err(Error::invalid(format!(
                "{} sensitive labels for {n} nodes",
                groups.len()
            )));
        }
        if let Some(&g) = groups.iter().find(|&&g| g >= num_groups) {
            return Err(Error::invalid(format!(
                "sensitive class {g} outside 0..{num_groups}"
            )));
        }
        let mut list = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::invalid(format!("edge ({u}, {v}) outside 0..{n}")));
            }
            if u == v {
                return Err(Error::invalid(format!("self-pair ({u}, {u})")));
            }
            list.push(canonical(u, v));
        }
        list.sort_unstable();
        list.dedup();
        Ok(Self {
            n,
            edges: list,
            features,
            groups,
            num_groups,
        })
    }

    /// Builds from a one-hot `n × k` sensitive matrix.
    pub fn with_sensitive_matrix(
        n: usize,
        edges: impl IntoIterator<Item = Edge>,
        features: DenseMatrix,
        sensitive: &DenseMatrix,
    ) -> Result<Self> {
        if sensitive.rows() != n {
            return Err(Error::invalid("sensitive matrix row count differs from n"));
        }
        let mut groups = Vec::with_capacity(n);
        for v in 0..n {
            let row = sensitive.row(v);
            let ones: Vec<usize> = (0..row.len()).filter(|&j| row[j] == 1.0).collect();
            if ones.len() != 1 || row.iter().any(|&x| x != 0.0 && x != 1.0) {
                return Err(Error::invalid(format!("sensitive row {v} is not one-hot")));
            }
            groups.push(ones[0]);
        }
        Self::new(n, edges, features, groups, sensitive.cols())
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn group_of(&self, v: usize) -> usize {
        self.groups[v]
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    /// One-hot `n × k` sensitive matrix.
    pub fn sensitive(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n, self.num_groups, |v, j| {
            if self.groups[v] == j {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Sorted adjacency lists, both directions.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&canonical(u, v)).is_ok()
    }

    /// Induced subgraph on `keep` (in the given order, which becomes the new
    /// indexing).
    pub fn induced(&self, keep: &[usize]) -> Result<(Graph, Vec<Option<usize>>)> {
        let mut map = vec![None; self.n];
        for (new, &old) in keep.iter().enumerate() {
            if old >= self.n || map[old].is_some() {
                return Err(Error::invalid(format!("bad or repeated node {old}")));
            }
            map[old] = Some(new);
        }
        let edges = self
            .edges
            .iter()
            .filter_map(|&(u, v)| Some((map[u]?, map[v]?)));
        let mut data = Vec::with_capacity(keep.len() * self.feature_dim());
        for &old in keep {
            data.extend_from_slice(self.features.row(old));
        }
        let features = DenseMatrix::new(keep.len(), self.feature_dim(), data)?;
        let groups = keep.iter().map(|&v| self.groups[v]).collect();
        let g = Graph::new(keep.len(), edges, features, groups, self.num_groups)?;
        Ok((g, map))
    }
}

/// `Â = D̂^{-1/2} (A + I) D̂^{-1/2}` with `d̂_v = 1 + deg(v)`.
pub fn normalize_adjacency(g: &Graph) -> SparseMatrix {
    let deg_hat: Vec<f64> = g.degrees().iter().map(|&d| (1 + d) as f64).collect();
    let mut triplets = Vec::with_capacity(g.num_nodes() + 2 * g.num_edges());
    for (v, &d) in deg_hat.iter().enumerate() {
        triplets.push((v, v, 1.0 / d));
    }
    for &(u, v) in g.edges() {
        let w = 1.0 / (deg_hat[u] * deg_hat[v]).sqrt();
        triplets.push((u, v, w));
        triplets.push((v, u, w));
    }
    SparseMatrix::from_triplets(g.num_nodes(), g.num_nodes(), triplets)
        .expect("graph invariants keep indices in range")
}

/// Fraction of nodes in each sensitive class.
pub fn sensitive_distribution(g: &Graph) -> Vec<f64> {
    let mut counts = vec![0usize; g.num_groups()];
    for &c in g.groups() {
        counts[c] += 1;
    }
    let n = g.num_nodes() as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

/// Output of [`train_test_split`].
#[derive(Debug, Clone)]
pub struct SplitResult {
    pub train: Graph,
    /// Held-out positive edges in training-graph indices.
    pub test_pos: Vec<Edge>,
    /// `node_map[original] = Some(train_index)` for nodes kept in training.
    pub node_map: Vec<Option<usize>>,
    /// Inverse of `node_map`.
    pub train_to_original: Vec<usize>,
}

/// `⌈fraction · total⌉`, robust to representation error in the product
/// (`0.2 · 5` must give 1, not 2).
pub fn holdout_count(fraction: f64, total: usize) -> usize {
    let x = fraction * total as f64;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Holds out `⌈test_fraction·|E|⌉` edges chosen uniformly without
/// replacement, keeps the largest connected component of what remains as the
/// training graph, and drops held-out edges that touch discarded nodes.
///
/// Components of equal size are ranked by their smallest node id.
pub fn train_test_split(g: &Graph, test_fraction: f64, rng: &mut Rng) -> Result<SplitResult> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} outside [0, 1)"
        )));
    }
    if g.num_edges() == 0 {
        return Err(Error::invalid("cannot split a graph without edges"));
    }
    let m = g.num_edges();
    let count = holdout_count(test_fraction, m);
    let mut order: Vec<usize> = (0..m).collect();
    rng.partial_shuffle(&mut order, count);
    let mut held = vec![false; m];
    for &i in &order[..count] {
        held[i] = true;
    }

    let n = g.num_nodes();
    let mut adj = vec![Vec::new(); n];
    for (i, &(u, v)) in g.edges().iter().enumerate() {
        if !held[i] {
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    let mut component = vec![usize::MAX; n];
    let mut best: Option<(usize, usize)> = None; // (size, id)
    let mut queue = VecDeque::new();
    let mut next_id = 0;
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let id = next_id;
        next_id += 1;
        component[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(u) = queue.pop_front() {
            size += 1;
            for &w in &adj[u] {
                if component[w] == usize::MAX {
                    component[w] = id;
                    queue.push_back(w);
                }
            }
        }
        // Components are discovered in order of their smallest node, so a
        // strict comparison keeps the earliest on ties.
        if best.map_or(true, |(s, _)| size > s) {
            best = Some((size, id));
        }
    }
    let (_, keep_id) = best.expect("graph has at least one node");
    let keep: Vec<usize> = (0..n).filter(|&v| component[v] == keep_id).collect();

    let kept_edges = g
        .edges()
        .iter()
        .zip(&held)
        .filter(|(_, &h)| !h)
        .map(|(&e, _)| e);
    let mut node_map = vec![None; n];
    for (new, &old) in keep.iter().enumerate() {
        node_map[old] = Some(new);
    }
    let edges = kept_edges.filter_map(|(u, v)| Some((node_map[u]?, node_map[v]?)));
    let mut data = Vec::with_capacity(keep.len() * g.feature_dim());
    for &old in &keep {
        data.extend_from_slice(g.features().row(old));
    }
    let features = DenseMatrix::new(keep.len(), g.feature_dim(), data)?;
    let groups = keep.iter().map(|&v| g.group_of(v)).collect();
    let train = Graph::new(keep.len(), edges, features, groups, g.num_groups())?;

    let mut test_pos: Vec<Edge> = order[..count]
        .iter()
        .filter_map(|&i| {
            let (u, v) = g.edges()[i];
            Some(canonical(node_map[u]?, node_map[v]?))
        })
        .collect();
    test_pos.sort_unstable();

    Ok(SplitResult {
        train,
        test_pos,
        node_map,
        train_to_original: keep,
    })
}

/// Samples `count` distinct unordered non-adjacent pairs `u ≠ v` that are
/// also absent from `exclude`, uniformly without replacement.
pub fn sample_negative_edges(
    g: &Graph,
    count: usize,
    rng: &mut Rng,
    exclude: &HashSet<Edge>,
) -> Result<Vec<Edge>> {
    let n = g.num_nodes();
    let total = n * n.saturating_sub(1) / 2;
    let extra = exclude
        .iter()
        .filter(|&&(u, v)| u != v && u < n && v < n && !g.has_edge(u, v))
        .map(|&(u, v)| canonical(u, v))
        .collect::<HashSet<_>>()
        .len();
    let available = total - g.num_edges() - extra;
    if count > available {
        return Err(Error::Capacity(format!(
            "requested {count} negative pairs but only {available} are available"
        )));
    }
    let forbidden = |u: usize, v: usize| {
        g.has_edge(u, v) || exclude.contains(&(u, v)) || exclude.contains(&(v, u))
    };

    if count * 2 > available {
        // Dense regime: enumerate the candidates and sample exactly.
        let mut candidates: Vec<Edge> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !forbidden(u, v))
            .collect();
        return Ok(rng.partial_shuffle(&mut candidates, count).to_vec());
    }

    let mut chosen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = rng.below(n);
        let v = rng.below(n);
        if u == v || forbidden(u, v) {
            continue;
        }
        let e = canonical(u, v);
        if chosen.insert(e) {
            out.push(e);
        }
    }
    Ok(out)
}

/// Whether all nodes are reachable from node 0.
pub fn is_connected(g: &Graph) -> bool {
    let n = g.num_nodes();
    if n == 0 {
        return true;
    }
    let adj = g.neighbors();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == n
}
