//! Fixtures shared by the benchmarks.

use fairegm::synthetic::PlantedPartition;
use fairegm::{DenseMatrix, Graph, Rng};

/// Planted-partition graph with `n` nodes, `edges` edges and `features`
/// feature columns, fixed seed.
pub fn planted(n: usize, edges: usize, features: usize) -> Graph {
    PlantedPartition { nodes: n, groups: 2, edges, features, ..PlantedPartition::default() }
        .generate()
        .expect("benchmark sizes are valid")
        .graph
}

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = Rng::new(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.normal())
}
