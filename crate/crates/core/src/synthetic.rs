//! Planted-partition graphs whose links and features both follow the
//! sensitive groups, so an unconstrained encoder learns group-segregated
//! embeddings.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{canonical, Edge, Graph};
use crate::io::{Dataset, LoadReport};
use crate::linalg::{DenseMatrix, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPartition {
    pub nodes: usize,
    pub groups: usize,
    pub edges: usize,
    /// Probability that an edge joins two members of the same group.
    pub homophily: f64,
    pub features: usize,
    /// Probability that a group-indicator feature is set for a member.
    pub signal: f64,
    pub seed: u64,
}

impl Default for PlantedPartition {
    fn default() -> Self {
        Self {
            nodes: 200,
            groups: 2,
            edges: 800,
            homophily: 0.9,
            features: 16,
            signal: 0.8,
            seed: 0,
        }
    }
}

impl PlantedPartition {
    /// Parses `key=value` pairs separated by commas, e.g.
    /// `nodes=500,groups=3,edges=2000,seed=4`. Unlisted keys keep defaults.
    pub fn from_spec(spec: &str) -> Result<Self> {
        let mut p = Self::default();
        for pair in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("expected key=value, got '{pair}'")))?;
            let bad = || Error::invalid(format!("bad value for {key}: '{value}'"));
            match key {
                "nodes" | "n" => p.nodes = value.parse().map_err(|_| bad())?,
                "groups" | "k" => p.groups = value.parse().map_err(|_| bad())?,
                "edges" | "e" => p.edges = value.parse().map_err(|_| bad())?,
                "homophily" => p.homophily = value.parse().map_err(|_| bad())?,
                "features" | "m" => p.features = value.parse().map_err(|_| bad())?,
                "signal" => p.signal = value.parse().map_err(|_| bad())?,
                "seed" => p.seed = value.parse().map_err(|_| bad())?,
                _ => return Err(Error::invalid(format!("unknown synthetic key '{key}'"))),
            }
        }
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.groups == 0 || self.nodes < 2 * self.groups {
            return Err(Error::invalid("need at least two nodes per group"));
        }
        if self.features < self.groups {
            return Err(Error::invalid("need at least one feature column per group"));
        }
        if !(0.0..=1.0).contains(&self.homophily) || !(0.0..=1.0).contains(&self.signal) {
            return Err(Error::invalid("homophily and signal are probabilities"));
        }
        let pairs = self.nodes * (self.nodes - 1) / 2;
        if self.edges * 2 > pairs {
            return Err(Error::Capacity(format!(
                "{} edges exceed half of the {pairs} node pairs",
                self.edges
            )));
        }
        if self.groups == 1 && self.homophily < 1.0 {
            return Err(Error::invalid("a single group cannot have cross-group edges"));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Dataset> {
        self.validate()?;
        let (n, k) = (self.nodes, self.groups);
        let mut rng = Rng::new(self.seed);
        let groups: Vec<usize> = (0..n).map(|v| v % k).collect();
        let members: Vec<Vec<usize>> = (0..k).map(|c| (c..n).step_by(k).collect()).collect();

        let within_capacity: usize = members.iter().map(|m| m.len() * (m.len() - 1) / 2).sum();
        let cross_capacity = n * (n - 1) / 2 - within_capacity;
        let mut seen: HashSet<Edge> = HashSet::with_capacity(self.edges);
        let (mut within, mut cross) = (0, 0);
        while seen.len() < self.edges {
            let mut want_within = rng.uniform() < self.homophily;
            if want_within && within * 2 >= within_capacity {
                want_within = false;
            } else if !want_within && cross * 2 >= cross_capacity {
                want_within = true;
            }
            loop {
                let u = rng.below(n);
                let v = if want_within {
                    let pool = &members[groups[u]];
                    pool[rng.below(pool.len())]
                } else {
                    rng.below(n)
                };
                if u == v || (groups[u] == groups[v]) != want_within {
                    continue;
                }
                if seen.insert(canonical(u, v)) {
                    if want_within {
                        within += 1;
                    } else {
                        cross += 1;
                    }
                    break;
                }
            }
        }
        let mut edges: Vec<Edge> = seen.into_iter().collect();
        edges.sort_unstable();

        let features = DenseMatrix::from_fn(n, self.features, |v, j| {
            let p = if j < k {
                if groups[v] == j {
                    self.signal
                } else {
                    (1.0 - self.signal) / k as f64
                }
            } else {
                0.1
            };
            f64::from(u8::from(rng.uniform() < p))
        });
        let graph = Graph::new(n, edges, features, groups, k)?;
        let report = LoadReport {
            nodes: n,
            raw_edges: graph.num_edges(),
            edges: graph.num_edges(),
            feature_dim: self.features,
            num_groups: k,
            ..LoadReport::default()
        };
        Ok(Dataset {
            name: "synthetic".into(),
            graph,
            node_ids: (0..n).map(|v| v.to_string()).collect(),
            report,
        })
    }
}
