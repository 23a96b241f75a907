//! Training objectives: the class-balanced reconstruction loss and the
//! demographic-parity link divergence.
//!
//! Both are evaluated over row blocks of the similarity matrix `ΦΦᵀ`; block
//! partial sums are combined in block order, so the result does not depend on
//! the thread count. The block height is the only knob that changes rounding.

use rayon::prelude::*;

use crate::autodiff::ScalarLoss;
use crate::error::{Error, Result};
use crate::graph::{sensitive_distribution, Graph};
use crate::linalg::{sigmoid, DenseMatrix};
use crate::model::Embeddings;

/// Clamp for probabilities inside logarithms.
pub const PROB_CLAMP: f64 = 1e-12;

/// Default number of similarity rows materialized at once.
pub const DEFAULT_BLOCK_ROWS: usize = 128;

/// Weight applied to positive entries of the adjacency target; negatives
/// weigh 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosWeight(pub f64);

/// `(n² − 2|E|) / (2|E|)`: total positive weight equals total negative weight.
pub fn pos_weight(g: &Graph) -> Result<PosWeight> {
    let e = g.num_edges();
    if e == 0 {
        return Err(Error::invalid("positive weight undefined for an edgeless graph"));
    }
    let n = g.num_nodes() as f64;
    let twice = 2.0 * e as f64;
    Ok(PosWeight((n * n - twice) / twice))
}

fn block_starts(n: usize, block_rows: usize) -> Vec<usize> {
    (0..n).step_by(block_rows.max(1)).collect()
}

/// Similarity logits `Φ[rows] · Φᵀ`.
fn logits_block(phi: &DenseMatrix, start: usize, end: usize) -> Result<DenseMatrix> {
    phi.slice_rows(start, end)?.matmul_nt(phi)
}

/// Weighted binary cross-entropy between `σ(ΦΦᵀ)` and the loop-free
/// adjacency, averaged over all `n²` entries.
#[derive(Debug, Clone)]
pub struct ReconstructionLoss {
    neighbors: Vec<Vec<usize>>,
    pos_weight: f64,
    block_rows: usize,
}

impl ReconstructionLoss {
    pub fn new(g: &Graph, pw: PosWeight) -> Self {
        Self {
            neighbors: g.neighbors(),
            pos_weight: pw.0,
            block_rows: DEFAULT_BLOCK_ROWS,
        }
    }

    pub fn with_block_rows(mut self, rows: usize) -> Self {
        self.block_rows = rows.max(1);
        self
    }

    fn check(&self, phi: &DenseMatrix) -> Result<()> {
        if phi.rows() != self.neighbors.len() {
            return Err(Error::invalid(format!(
                "embeddings have {} rows, graph has {} nodes",
                phi.rows(),
                self.neighbors.len()
            )));
        }
        Ok(())
    }

    /// Sum of weighted BCE terms for rows `start..end` (not yet averaged).
    fn block_value(&self, phi: &DenseMatrix, start: usize, end: usize) -> Result<f64> {
        let z = logits_block(phi, start, end)?;
        let mut total = 0.0;
        for (i, u) in (start..end).enumerate() {
            let row = z.row(i);
            let mut negatives = 0.0;
            for &x in row {
                let p = sigmoid(x).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                negatives -= (1.0 - p).ln();
            }
            // Swap the negative term for the weighted positive one on edges.
            let mut correction = 0.0;
            for &v in &self.neighbors[u] {
                let p = sigmoid(row[v]).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                correction += (1.0 - p).ln() - self.pos_weight * p.ln();
            }
            total += negatives + correction;
        }
        Ok(total)
    }

    /// Value terms and `G[rows] · Φ` from one evaluation of the logits.
    fn block_fused(&self, phi: &DenseMatrix, start: usize, end: usize) -> Result<(f64, DenseMatrix)> {
        let mut coeff = logits_block(phi, start, end)?;
        let mut total = 0.0;
        for (i, u) in (start..end).enumerate() {
            let row = coeff.row_mut(i);
            let mut negatives = 0.0;
            for x in row.iter_mut() {
                *x = sigmoid(*x);
                negatives -= (1.0 - x.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)).ln();
            }
            let mut correction = 0.0;
            for &v in &self.neighbors[u] {
                let p = row[v].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                correction += (1.0 - p).ln() - self.pos_weight * p.ln();
            }
            total += negatives + correction;
            for x in row.iter_mut() {
                if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(x) {
                    *x = 0.0;
                }
            }
            for &v in &self.neighbors[u] {
                if row[v] != 0.0 {
                    row[v] = self.pos_weight * (row[v] - 1.0);
                }
            }
        }
        Ok((total, coeff.matmul(phi)?))
    }

    fn block_gradient(&self, phi: &DenseMatrix, start: usize, end: usize) -> Result<DenseMatrix> {
        let mut coeff = logits_block(phi, start, end)?;
        for (i, u) in (start..end).enumerate() {
            let row = coeff.row_mut(i);
            let mut edges = self.neighbors[u].iter().peekable();
            for (v, x) in row.iter_mut().enumerate() {
                let p = sigmoid(*x);
                let positive = edges.peek() == Some(&&v);
                if positive {
                    edges.next();
                }
                *x = if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                    0.0
                } else if positive {
                    self.pos_weight * (p - 1.0)
                } else {
                    p
                };
            }
        }
        coeff.matmul(phi)
    }
}

impl ScalarLoss for ReconstructionLoss {
    fn name(&self) -> &str {
        "reconstruction"
    }

    fn value(&self, phi: &DenseMatrix) -> Result<f64> {
        self.check(phi)?;
        let n = phi.rows();
        let parts = block_starts(n, self.block_rows)
            .par_iter()
            .map(|&s| self.block_value(phi, s, (s + self.block_rows).min(n)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(parts.iter().sum::<f64>() / (n * n) as f64)
    }

    /// `(2/n²) · G Φ` where `G_uv = w_uv (σ(z_uv) − A_uv)`, symmetric.
    fn gradient(&self, phi: &DenseMatrix) -> Result<DenseMatrix> {
        self.check(phi)?;
        let n = phi.rows();
        let blocks = block_starts(n, self.block_rows)
            .par_iter()
            .map(|&s| self.block_gradient(phi, s, (s + self.block_rows).min(n)))
            .collect::<Result<Vec<_>>>()?;
        let factor = 2.0 / (n * n) as f64;
        let mut data = Vec::with_capacity(n * phi.cols());
        for b in blocks {
            data.extend(b.into_data().into_iter().map(|v| v * factor));
        }
        DenseMatrix::new(n, phi.cols(), data)
    }

    fn value_and_gradient(&self, phi: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
        self.check(phi)?;
        let n = phi.rows();
        let blocks = block_starts(n, self.block_rows)
            .par_iter()
            .map(|&s| self.block_fused(phi, s, (s + self.block_rows).min(n)))
            .collect::<Result<Vec<_>>>()?;
        let factor = 2.0 / (n * n) as f64;
        let mut total = 0.0;
        let mut data = Vec::with_capacity(n * phi.cols());
        for (value, b) in blocks {
            total += value;
            data.extend(b.into_data().into_iter().map(|v| v * factor));
        }
        Ok((total / (n * n) as f64, DenseMatrix::new(n, phi.cols(), data)?))
    }
}

/// `Σ_v KL(P_S ‖ f(v))` where `f(v)` is the normalized, similarity-weighted
/// distribution of sensitive classes among the other nodes.
#[derive(Debug, Clone)]
pub struct LinkDivergenceLoss {
    groups: Vec<usize>,
    population: Vec<f64>,
    block_rows: usize,
}

impl LinkDivergenceLoss {
    pub fn new(g: &Graph) -> Self {
        Self {
            groups: g.groups().to_vec(),
            population: sensitive_distribution(g),
            block_rows: DEFAULT_BLOCK_ROWS,
        }
    }

    pub fn with_block_rows(mut self, rows: usize) -> Self {
        self.block_rows = rows.max(1);
        self
    }

    fn check(&self, phi: &DenseMatrix) -> Result<()> {
        if phi.rows() != self.groups.len() {
            return Err(Error::invalid(format!(
                "embeddings have {} rows, graph has {} nodes",
                phi.rows(),
                self.groups.len()
            )));
        }
        if phi.rows() < 2 {
            return Err(Error::invalid("link divergence needs at least two nodes"));
        }
        Ok(())
    }

    /// Unnormalized class mass `r_v[j] = Σ_{u≠v} σ(z_vu)·[c(u) = j]` for the
    /// rows of one block.
    fn block_mass(&self, phi: &DenseMatrix, start: usize, end: usize) -> Result<Vec<Vec<f64>>> {
        let z = logits_block(phi, start, end)?;
        let k = self.population.len();
        Ok((start..end)
            .enumerate()
            .map(|(i, v)| {
                let mut mass = vec![0.0; k];
                for (u, &x) in z.row(i).iter().enumerate() {
                    if u != v {
                        mass[self.groups[u]] += sigmoid(x);
                    }
                }
                mass
            })
            .collect())
    }

    fn masses(&self, phi: &DenseMatrix) -> Result<Vec<Vec<f64>>> {
        let n = phi.rows();
        let blocks = block_starts(n, self.block_rows)
            .par_iter()
            .map(|&s| self.block_mass(phi, s, (s + self.block_rows).min(n)))
            .collect::<Result<Vec<_>>>()?;
        Ok(blocks.into_iter().flatten().collect())
    }

    /// Per-node divergences.
    pub fn per_node(&self, phi: &DenseMatrix) -> Result<Vec<f64>> {
        self.check(phi)?;
        Ok(self
            .masses(phi)?
            .iter()
            .map(|mass| kl_from_mass(&self.population, mass))
            .collect())
    }

    /// `∂KL_v/∂r_v[i]` for the normalized-with-clamp divergence.
    fn mass_gradient(&self, mass: &[f64]) -> Vec<f64> {
        let total: f64 = mass.iter().sum();
        let active: Vec<bool> = mass
            .iter()
            .zip(&self.population)
            .map(|(&r, &p)| p > 0.0 && r / total >= PROB_CLAMP)
            .collect();
        let shared: f64 = self
            .population
            .iter()
            .zip(&active)
            .filter(|(_, &a)| a)
            .map(|(p, _)| p)
            .sum::<f64>()
            / total;
        mass.iter()
            .zip(&self.population)
            .zip(&active)
            .map(|((&r, &p), &a)| if a { shared - p / r } else { shared })
            .collect()
    }
}

/// `KL(P ‖ normalize(mass))` with natural log, clamped denominators and
/// zero-probability terms of `P` skipped.
fn kl_from_mass(population: &[f64], mass: &[f64]) -> f64 {
    let total: f64 = mass.iter().sum();
    population
        .iter()
        .zip(mass)
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, &r)| p * (p.ln() - (r / total).max(PROB_CLAMP).ln()))
        .sum()
}

impl ScalarLoss for LinkDivergenceLoss {
    fn name(&self) -> &str {
        "link-divergence"
    }

    fn value(&self, phi: &DenseMatrix) -> Result<f64> {
        Ok(self.per_node(phi)?.iter().sum())
    }

    fn gradient(&self, phi: &DenseMatrix) -> Result<DenseMatrix> {
        self.check(phi)?;
        let masses = self.masses(phi)?;
        self.gradient_from_masses(phi, &masses)
    }

    fn value_and_gradient(&self, phi: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
        self.check(phi)?;
        let masses = self.masses(phi)?;
        let value = masses.iter().map(|m| kl_from_mass(&self.population, m)).sum();
        Ok((value, self.gradient_from_masses(phi, &masses)?))
    }
}

impl LinkDivergenceLoss {
    fn gradient_from_masses(&self, phi: &DenseMatrix, masses: &[Vec<f64>]) -> Result<DenseMatrix> {
        let n = phi.rows();
        let dmass: Vec<Vec<f64>> = masses.iter().map(|m| self.mass_gradient(m)).collect();
        // dΦ_u = Σ_{v≠u} (g_u[c(v)] + g_v[c(u)]) · s_uv (1 − s_uv) · Φ_v,
        // using the symmetry of s = σ(ΦΦᵀ).
        let blocks = block_starts(n, self.block_rows)
            .par_iter()
            .map(|&s| {
                let end = (s + self.block_rows).min(n);
                let mut coeff = logits_block(phi, s, end)?;
                for (i, u) in (s..end).enumerate() {
                    let cu = self.groups[u];
                    for (v, x) in coeff.row_mut(i).iter_mut().enumerate() {
                        *x = if v == u {
                            0.0
                        } else {
                            let sv = sigmoid(*x);
                            (dmass[u][self.groups[v]] + dmass[v][cu]) * sv * (1.0 - sv)
                        };
                    }
                }
                coeff.matmul(phi)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut data = Vec::with_capacity(n * phi.cols());
        for b in blocks {
            data.extend(b.into_data());
        }
        DenseMatrix::new(n, phi.cols(), data)
    }
}

pub fn reconstruction_loss(phi: &Embeddings, g: &Graph, pw: PosWeight) -> Result<f64> {
    ReconstructionLoss::new(g, pw).value(phi.matrix())
}

/// Normalized similarity-weighted class distribution seen from node `v`.
pub fn group_similarity(phi: &Embeddings, g: &Graph, v: usize) -> Result<Vec<f64>> {
    let n = g.num_nodes();
    let phi = phi.matrix();
    if n < 2 {
        return Err(Error::invalid("group similarity needs at least two nodes"));
    }
    if v >= n || phi.rows() != n {
        return Err(Error::invalid(format!("node {v} / embedding rows {} vs n={n}", phi.rows())));
    }
    let mut raw = vec![0.0; g.num_groups()];
    let norm = 1.0 / (n - 1) as f64;
    for u in (0..n).filter(|&u| u != v) {
        raw[g.group_of(u)] += norm * sigmoid(crate::linalg::dot(phi.row(v), phi.row(u)));
    }
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|r| r / total).collect())
}

/// Sum over nodes of the per-node divergence.
pub fn link_divergence(phi: &Embeddings, g: &Graph) -> Result<f64> {
    LinkDivergenceLoss::new(g).value(phi.matrix())
}

/// Mean over nodes of the per-node divergence.
pub fn link_divergence_mean(phi: &Embeddings, g: &Graph) -> Result<f64> {
    Ok(link_divergence(phi, g)? / g.num_nodes() as f64)
}

/// `L_R + λ·L_D`.
pub fn augmented_loss(phi: &Embeddings, g: &Graph, pw: PosWeight, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("augmented weight {lambda} must be ≥ 0")));
    }
    let lr = reconstruction_loss(phi, g, pw)?;
    if lambda == 0.0 {
        return Ok(lr);
    }
    Ok(lr + lambda * link_divergence(phi, g)?)
}
