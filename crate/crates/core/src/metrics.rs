//! Link-prediction utility (AUROC, F1 of a logistic-regression edge
//! classifier) and the DP@k fairness metric.

use std::cmp::Ordering;
use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{canonical, sample_negative_edges, sensitive_distribution, Edge, Graph};
use crate::linalg::{dot, sigmoid, DenseMatrix, Rng};
use crate::losses::{link_divergence, pos_weight, reconstruction_loss};
use crate::model::Embeddings;

/// Pseudo-count added to every group before normalizing a kNN distribution.
pub const DP_SMOOTHING: f64 = 1e-4;

pub const DEFAULT_KS: [usize; 3] = [10, 20, 40];

/// Binary operator turning two endpoint embeddings into an edge feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeFeatureOp {
    #[default]
    Hadamard,
    Average,
    L1,
    L2,
    Concat,
}

impl EdgeFeatureOp {
    fn width(self, d: usize) -> usize {
        match self {
            EdgeFeatureOp::Concat => 2 * d,
            _ => d,
        }
    }

    fn fill(self, a: &[f64], b: &[f64], out: &mut [f64]) {
        let d = a.len();
        match self {
            EdgeFeatureOp::Hadamard => out.iter_mut().enumerate().for_each(|(i, o)| *o = a[i] * b[i]),
            EdgeFeatureOp::Average => out.iter_mut().enumerate().for_each(|(i, o)| *o = 0.5 * (a[i] + b[i])),
            EdgeFeatureOp::L1 => out.iter_mut().enumerate().for_each(|(i, o)| *o = (a[i] - b[i]).abs()),
            EdgeFeatureOp::L2 => out.iter_mut().enumerate().for_each(|(i, o)| *o = (a[i] - b[i]).powi(2)),
            EdgeFeatureOp::Concat => {
                out[..d].copy_from_slice(a);
                out[d..].copy_from_slice(b);
            }
        }
    }
}

/// Hadamard edge features, one row per edge.
pub fn edge_features(phi: &Embeddings, edges: &[Edge]) -> Result<DenseMatrix> {
    edge_features_with(phi, edges, EdgeFeatureOp::Hadamard)
}

pub fn edge_features_with(phi: &Embeddings, edges: &[Edge], op: EdgeFeatureOp) -> Result<DenseMatrix> {
    let n = phi.num_nodes();
    let width = op.width(phi.dim());
    let mut out = DenseMatrix::zeros(edges.len(), width);
    for (r, &(u, v)) in edges.iter().enumerate() {
        if u >= n || v >= n {
            return Err(Error::invalid(format!("edge ({u}, {v}) outside 0..{n}")));
        }
        op.fill(phi.row(u), phi.row(v), out.row_mut(r));
    }
    Ok(out)
}

/// Logistic-regression weights in the original feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl EdgeClassifier {
    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, x) + self.bias)
    }

    pub fn predict(&self, features: &DenseMatrix) -> Result<Vec<f64>> {
        if features.cols() != self.weights.len() {
            return Err(Error::invalid(format!(
                "classifier expects {} features, got {}",
                self.weights.len(),
                features.cols()
            )));
        }
        Ok((0..features.rows()).map(|r| self.probability(features.row(r))).collect())
    }
}

/// Full-batch gradient descent on the mean log-loss.
///
/// Features are standardized internally and the scaling is folded back into
/// the returned weights. Starts from zero, so the result is deterministic.
pub fn fit_classifier(features: &DenseMatrix, labels: &[bool], iters: usize, lr: f64) -> Result<EdgeClassifier> {
    let (rows, d) = features.shape();
    if labels.len() != rows {
        return Err(Error::invalid(format!("{rows} feature rows but {} labels", labels.len())));
    }
    if iters == 0 || !(lr > 0.0) {
        return Err(Error::invalid("classifier needs iters ≥ 1 and lr > 0"));
    }
    let positives = labels.iter().filter(|&&y| y).count();
    if positives == 0 || positives == rows {
        return Err(Error::invalid("classifier needs both classes"));
    }
    let count = rows as f64;
    let mean: Vec<f64> = (0..d)
        .map(|j| (0..rows).map(|r| features.get(r, j)).sum::<f64>() / count)
        .collect();
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            let var = (0..rows).map(|r| (features.get(r, j) - mean[j]).powi(2)).sum::<f64>() / count;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let x = DenseMatrix::from_fn(rows, d, |r, j| (features.get(r, j) - mean[j]) / scale[j]);
    let y: Vec<f64> = labels.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut grad_w = vec![0.0; d];
    for _ in 0..iters {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for r in 0..rows {
            let xr = x.row(r);
            let err = sigmoid(dot(&w, xr) + b) - y[r];
            grad_b += err;
            for (g, &xi) in grad_w.iter_mut().zip(xr) {
                *g += err * xi;
            }
        }
        for (wi, g) in w.iter_mut().zip(&grad_w) {
            *wi -= lr * g / count;
        }
        b -= lr * grad_b / count;
    }
    let weights: Vec<f64> = w.iter().zip(&scale).map(|(wi, s)| wi / s).collect();
    let bias = b - weights.iter().zip(&mean).map(|(wi, m)| wi * m).sum::<f64>();
    if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::invalid("classifier weights are not finite"));
    }
    Ok(EdgeClassifier { weights, bias })
}

fn check_binary(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let pos = labels.iter().filter(|&&y| y).count();
    Ok((pos, labels.len() - pos))
}

/// Area under the ROC curve as the Mann–Whitney statistic, ties counting ½.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("AUROC needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of (1-based, tie-averaged) ranks of the positives, doubled to stay integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u128;
        let tied_pos = order[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        twice_rank_sum += twice_mid * tied_pos;
        i = j + 1;
    }
    let p = pos as u128;
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2.0 * pos as f64 * neg as f64))
}

/// F1 of the predictions `score ≥ threshold`; 0 when nothing is predicted positive.
pub fn f1(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64> {
    check_binary(scores, labels)?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

fn kl_smoothed(population: &[f64], counts: &[usize], k: usize) -> f64 {
    let total = k as f64 + DP_SMOOTHING * counts.len() as f64;
    population
        .iter()
        .zip(counts)
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, &c)| p * (p / ((c as f64 + DP_SMOOTHING) / total)).ln())
        .sum()
}

/// Mean over nodes of `KL(P_S ‖ π(kNN(u)))`, neighbors ranked by decoded
/// similarity with ties going to the lower index.
pub fn dp_at_k(phi: &Embeddings, g: &Graph, k: usize) -> Result<f64> {
    Ok(dp_at_ks(phi, g, &[k])?[0].1)
}

/// DP@k for several `k` from a single ranking pass.
pub fn dp_at_ks(phi: &Embeddings, g: &Graph, ks: &[usize]) -> Result<Vec<(usize, f64)>> {
    let n = g.num_nodes();
    if phi.num_nodes() != n {
        return Err(Error::invalid(format!(
            "{} embeddings for {n} nodes",
            phi.num_nodes()
        )));
    }
    if ks.is_empty() {
        return Err(Error::invalid("no k requested"));
    }
    if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k >= n) {
        return Err(Error::invalid(format!("k = {bad} must lie in 1..{n}")));
    }
    let kmax = *ks.iter().max().expect("non-empty");
    let population = sensitive_distribution(g);
    let groups = g.groups();
    let num_groups = g.num_groups();
    let m = phi.matrix();

    let per_node: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|u| {
            let mut ranked: Vec<(f64, usize)> = (0..n)
                .filter(|&v| v != u)
                .map(|v| (sigmoid(dot(m.row(u), m.row(v))), v))
                .collect();
            let by_rank = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
                b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
            };
            if kmax < ranked.len() {
                ranked.select_nth_unstable_by(kmax - 1, by_rank);
                ranked.truncate(kmax);
            }
            ranked.sort_unstable_by(by_rank);
            let mut counts = vec![0usize; num_groups];
            let mut taken = 0;
            let mut sorted_ks: Vec<(usize, usize)> = ks.iter().copied().enumerate().collect();
            sorted_ks.sort_by_key(|&(_, k)| k);
            let mut values = vec![0.0; ks.len()];
            for (slot, k) in sorted_ks {
                while taken < k {
                    counts[groups[ranked[taken].1]] += 1;
                    taken += 1;
                }
                values[slot] = kl_smoothed(&population, &counts, k);
            }
            values
        })
        .collect();

    Ok(ks
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, per_node.iter().map(|row| row[i]).sum::<f64>() / n as f64))
        .collect())
}

/// Metrics of one trained model on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub seed: u64,
    pub reconstruction: f64,
    pub divergence_sum: f64,
    pub divergence_mean: f64,
    pub auroc: f64,
    pub f1: f64,
    pub dp: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and sample standard deviation, independent of input order.
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("summary needs at least two values"));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let mut dev: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
        dev.sort_by(f64::total_cmp);
        let std = (dev.iter().sum::<f64>() / (n - 1.0)).sqrt();
        Ok(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub runs: usize,
    pub reconstruction: Stat,
    pub divergence_sum: Stat,
    pub divergence_mean: Stat,
    pub auroc: Stat,
    pub f1: Stat,
    pub dp: Vec<(usize, Stat)>,
}

pub fn summarize(records: &[MetricsRecord]) -> Result<SummaryRecord> {
    if records.len() < 2 {
        return Err(Error::invalid("summary needs at least two records"));
    }
    let ks: Vec<usize> = records[0].dp.iter().map(|&(k, _)| k).collect();
    if records
        .iter()
        .any(|r| r.dp.iter().map(|&(k, _)| k).ne(ks.iter().copied()))
    {
        return Err(Error::invalid("records disagree on the DP@k list"));
    }
    let col = |f: &dyn Fn(&MetricsRecord) -> f64| -> Result<Stat> {
        Stat::of(&records.iter().map(f).collect::<Vec<_>>())
    };
    Ok(SummaryRecord {
        runs: records.len(),
        reconstruction: col(&|r| r.reconstruction)?,
        divergence_sum: col(&|r| r.divergence_sum)?,
        divergence_mean: col(&|r| r.divergence_mean)?,
        auroc: col(&|r| r.auroc)?,
        f1: col(&|r| r.f1)?,
        dp: ks
            .iter()
            .enumerate()
            .map(|(i, &k)| Ok((k, col(&|r| r.dp[i].1)?)))
            .collect::<Result<_>>()?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    pub classifier_iters: usize,
    pub classifier_lr: f64,
    pub edge_op: EdgeFeatureOp,
    pub threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ks: DEFAULT_KS.to_vec(),
            classifier_iters: 2000,
            classifier_lr: 0.1,
            edge_op: EdgeFeatureOp::Hadamard,
            threshold: 0.5,
        }
    }
}

/// Fits the edge classifier on every training edge plus as many sampled
/// non-edges, then scores the held-out edges against as many fresh
/// non-edges. Losses and DP@k are measured on the training graph.
pub fn evaluate(
    train: &Graph,
    test_pos: &[Edge],
    phi: &Embeddings,
    seed: u64,
    rng: &mut Rng,
    cfg: &EvalConfig,
) -> Result<MetricsRecord> {
    if test_pos.is_empty() {
        return Err(Error::invalid("evaluation needs at least one held-out edge"));
    }
    let held_out: HashSet<Edge> = test_pos.iter().map(|&(u, v)| canonical(u, v)).collect();
    let train_pos = train.edges().to_vec();
    let train_neg = sample_negative_edges(train, train_pos.len(), rng, &held_out)?;
    let mut exclude = held_out.clone();
    exclude.extend(train_neg.iter().copied());
    let test_neg = sample_negative_edges(train, test_pos.len(), rng, &exclude)?;

    let labelled = |pos: &[Edge], neg: &[Edge]| -> Result<(DenseMatrix, Vec<bool>)> {
        let edges: Vec<Edge> = pos.iter().chain(neg).copied().collect();
        let labels = std::iter::repeat(true)
            .take(pos.len())
            .chain(std::iter::repeat(false).take(neg.len()))
            .collect();
        Ok((edge_features_with(phi, &edges, cfg.edge_op)?, labels))
    };
    let (x_train, y_train) = labelled(&train_pos, &train_neg)?;
    let clf = fit_classifier(&x_train, &y_train, cfg.classifier_iters, cfg.classifier_lr)?;
    let (x_test, y_test) = labelled(test_pos, &test_neg)?;
    let scores = clf.predict(&x_test)?;

    let divergence_sum = link_divergence(phi, train)?;
    Ok(MetricsRecord {
        seed,
        reconstruction: reconstruction_loss(phi, train, pos_weight(train)?)?,
        divergence_sum,
        divergence_mean: divergence_sum / train.num_nodes() as f64,
        auroc: auroc(&scores, &y_test)?,
        f1: f1(&scores, &y_test, cfg.threshold)?,
        dp: dp_at_ks(phi, train, &cfg.ks)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;
    use proptest::prelude::*;

    fn emb(rows: &[&[f64]]) -> Embeddings {
        Embeddings::new(DenseMatrix::from_rows(rows).unwrap())
    }

    fn random_graph(n: usize, k: usize, rng: &mut Rng) -> Graph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.uniform() < 0.1 {
                    edges.push((u, v));
                }
            }
        }
        let groups = (0..n).map(|v| v % k).collect();
        Graph::new(n, edges, DenseMatrix::zeros(n, 1), groups, k).unwrap()
    }

    fn random_embeddings(n: usize, d: usize, rng: &mut Rng, quantize: bool) -> Embeddings {
        Embeddings::new(DenseMatrix::from_fn(n, d, |_, _| {
            let x = rng.normal();
            if quantize {
                (x * 2.0).round() / 2.0
            } else {
                x
            }
        }))
    }

    /// Full n×n similarity, full sort of every row.
    fn dp_brute_force(phi: &Embeddings, g: &Graph, k: usize) -> f64 {
        let n = g.num_nodes();
        let m = phi.matrix();
        let sim = m.matmul(&m.transpose()).unwrap().sigmoid();
        let mut pop = vec![0.0; g.num_groups()];
        for &c in g.groups() {
            pop[c] += 1.0;
        }
        pop.iter_mut().for_each(|p| *p /= n as f64);
        let mut total = 0.0;
        for u in 0..n {
            let mut others: Vec<usize> = (0..n).filter(|&v| v != u).collect();
            others.sort_by(|&a, &b| {
                sim.get(u, b)
                    .partial_cmp(&sim.get(u, a))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut counts = vec![0.0; g.num_groups()];
            for &v in &others[..k] {
                counts[g.group_of(v)] += 1.0;
            }
            let denom = k as f64 + 1e-4 * g.num_groups() as f64;
            total += pop
                .iter()
                .zip(&counts)
                .filter(|(&p, _)| p > 0.0)
                .map(|(&p, &c)| p * (p / ((c + 1e-4) / denom)).ln())
                .sum::<f64>();
        }
        total / n as f64
    }

    #[test]
    fn edge_feature_cases() {
        let phi = emb(&[&[1.0, 1.0], &[1.0, 1.0], &[0.0, 0.0], &[1.0, 2.0], &[3.0, -1.0]]);
        let f = edge_features(&phi, &[(0, 1), (2, 4), (3, 4)]).unwrap();
        assert_eq!(f.row(0), &[1.0, 1.0]);
        assert_eq!(f.row(1), &[0.0, 0.0]);
        assert_eq!(f.row(2), &[3.0, -2.0]);
        assert!(edge_features(&phi, &[(0, 5)]).is_err());
        let c = edge_features_with(&phi, &[(3, 4)], EdgeFeatureOp::Concat).unwrap();
        assert_eq!(c.row(0), &[1.0, 2.0, 3.0, -1.0]);
    }

    #[test]
    fn auroc_cases() {
        assert_eq!(auroc(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3; 6], &[true, false, true, false, true, false]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.9, 0.4, 0.6, 0.2], &[true, true, false, false]).unwrap(), 0.75);
        assert!(auroc(&[0.1, 0.2], &[true, true]).is_err());
        assert!(auroc(&[0.1], &[true, false]).is_err());
    }

    fn auroc_pairs(scores: &[f64], labels: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &yi) in labels.iter().enumerate() {
            for (j, &yj) in labels.iter().enumerate() {
                if yi && !yj {
                    pairs += 1.0;
                    wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                        Ordering::Greater => 1.0,
                        Ordering::Equal => 0.5,
                        Ordering::Less => 0.0,
                    };
                }
            }
        }
        wins / pairs
    }

    proptest! {
        #[test]
        fn auroc_matches_pair_enumeration(
            data in prop::collection::vec((0i32..6, any::<bool>()), 2..40)
        ) {
            let scores: Vec<f64> = data.iter().map(|&(s, _)| s as f64 / 5.0).collect();
            let labels: Vec<bool> = data.iter().map(|&(_, y)| y).collect();
            prop_assume!(labels.iter().any(|&y| y) && labels.iter().any(|&y| !y));
            let fast = auroc(&scores, &labels).unwrap();
            prop_assert!((fast - auroc_pairs(&scores, &labels)).abs() < 1e-12);
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            prop_assert_eq!(fast, auroc(&transformed, &labels).unwrap());
        }
    }

    #[test]
    fn f1_cases() {
        let y = [true, false, true, false];
        assert_eq!(f1(&[0.9, 0.1, 0.8, 0.2], &y, 0.5).unwrap(), 1.0);
        assert_eq!(f1(&[0.1, 0.1, 0.2, 0.2], &y, 0.5).unwrap(), 0.0);
        // TP=2, FP=1, FN=1
        let y = [true, true, true, false, false];
        let f = f1(&[0.9, 0.7, 0.1, 0.6, 0.2], &y, 0.5).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1(&[0.5, 0.4], &[true, false], 0.5).unwrap(), 1.0);
    }

    #[test]
    fn classifier_separates_one_dimensional_data() {
        let x = DenseMatrix::from_rows(&[[-3.0], [-2.0], [-1.0], [1.0], [2.0], [3.0]]).unwrap();
        let y = [false, false, false, true, true, true];
        let clf = fit_classifier(&x, &y, 500, 0.5).unwrap();
        let p = clf.predict(&x).unwrap();
        let acc = p.iter().zip(&y).filter(|(&s, &l)| (s >= 0.5) == l).count();
        assert_eq!(acc, 6);
        assert!(fit_classifier(&x, &[true; 6], 10, 0.1).is_err());
    }

    #[test]
    fn classifier_ignores_row_duplication() {
        let mut rng = Rng::new(5);
        let x = DenseMatrix::from_fn(40, 3, |_, _| rng.normal());
        let y: Vec<bool> = (0..40).map(|r| x.get(r, 0) + 0.5 * rng.normal() > 0.0).collect();
        let doubled = DenseMatrix::from_fn(80, 3, |r, c| x.get(r % 40, c));
        let y2: Vec<bool> = (0..80).map(|r| y[r % 40]).collect();
        let a = fit_classifier(&x, &y, 300, 0.1).unwrap();
        let b = fit_classifier(&doubled, &y2, 300, 0.1).unwrap();
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            assert!((wa - wb).abs() < 1e-10);
        }
        assert!((a.bias - b.bias).abs() < 1e-10);
    }

    #[test]
    fn classifier_on_noise_is_near_chance() {
        let mut rng = Rng::new(17);
        let x = DenseMatrix::from_fn(500, 4, |_, _| rng.normal());
        let y: Vec<bool> = (0..500).map(|_| rng.uniform() < 0.5).collect();
        let clf = fit_classifier(&x, &y, 500, 0.1).unwrap();
        let xt = DenseMatrix::from_fn(500, 4, |_, _| rng.normal());
        let yt: Vec<bool> = (0..500).map(|_| rng.uniform() < 0.5).collect();
        let a = auroc(&clf.predict(&xt).unwrap(), &yt).unwrap();
        assert!((a - 0.5).abs() <= 0.1, "{a}");
    }

    #[test]
    fn dp_zero_when_neighborhoods_match_population() {
        // Points on a circle with groups in runs of two: each node's two
        // nearest neighbors are one from each group.
        let n = 8;
        let phi = Embeddings::new(DenseMatrix::from_fn(n, 2, |v, j| {
            let a = v as f64 * std::f64::consts::TAU / n as f64;
            if j == 0 {
                a.cos()
            } else {
                a.sin()
            }
        }));
        let g = Graph::new(n, [], DenseMatrix::zeros(n, 1), (0..n).map(|v| (v / 2) % 2).collect(), 2).unwrap();
        let dp = dp_at_k(&phi, &g, 2).unwrap();
        assert!(dp <= 1e-3, "{dp}");
    }

    #[test]
    fn dp_single_group_neighborhoods_closed_form() {
        let n = 22;
        // Two far-apart clusters of 11, one per group.
        let phi = Embeddings::new(DenseMatrix::from_fn(n, 2, |v, j| {
            if (v < 11) == (j == 0) {
                5.0
            } else {
                0.0
            }
        }));
        let groups = (0..n).map(|v| usize::from(v >= 11)).collect();
        let g = Graph::new(n, [], DenseMatrix::zeros(n, 1), groups, 2).unwrap();
        let e: f64 = 1e-4;
        let expect = 0.5 * (0.5 / ((10.0 + e) / (10.0 + 2.0 * e))).ln()
            + 0.5 * (0.5 / (e / (10.0 + 2.0 * e))).ln();
        let dp = dp_at_k(&phi, &g, 10).unwrap();
        assert!((dp - expect).abs() < 1e-12, "{dp} vs {expect}");
        assert!((dp - 5.063330551750171).abs() < 1e-12);
    }

    #[test]
    fn dp_matches_brute_force() {
        let mut rng = Rng::new(8);
        for (n, k, quantize) in [(30, 2, false), (60, 3, true), (200, 4, false), (120, 5, true)] {
            let g = random_graph(n, k, &mut rng);
            let phi = random_embeddings(n, 3, &mut rng, quantize);
            let ks = [1, 5, 10, 20];
            let fast = dp_at_ks(&phi, &g, &ks).unwrap();
            for (kk, value) in fast {
                assert_eq!(value, dp_brute_force(&phi, &g, kk), "n={n} k={kk}");
            }
        }
    }

    #[test]
    fn dp_rejects_large_k() {
        let g = Graph::new(3, [], DenseMatrix::zeros(3, 1), vec![0, 1, 0], 2).unwrap();
        let phi = Embeddings::new(DenseMatrix::zeros(3, 2));
        assert!(dp_at_k(&phi, &g, 3).is_err());
        assert!(dp_at_k(&phi, &g, 0).is_err());
        assert!(dp_at_k(&phi, &g, 2).is_ok());
    }

    #[test]
    fn dp_invariant_to_within_group_relabeling() {
        let mut rng = Rng::new(21);
        let n = 40;
        let g = random_graph(n, 2, &mut rng);
        let phi = random_embeddings(n, 3, &mut rng, false);
        // Swap nodes 0 and 2 (same group) in the embedding rows and groups.
        let mut perm: Vec<usize> = (0..n).collect();
        perm.swap(0, 2);
        let permuted = Embeddings::new(DenseMatrix::from_fn(n, 3, |v, j| phi.matrix().get(perm[v], j)));
        let g2 = Graph::new(
            n,
            [],
            DenseMatrix::zeros(n, 1),
            (0..n).map(|v| g.group_of(perm[v])).collect(),
            2,
        )
        .unwrap();
        let a = dp_at_k(&phi, &g, 7).unwrap();
        let b = dp_at_k(&permuted, &g2, 7).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    fn record(seed: u64, x: f64) -> MetricsRecord {
        MetricsRecord {
            seed,
            reconstruction: x,
            divergence_sum: 2.0 * x,
            divergence_mean: x / 10.0,
            auroc: 0.5,
            f1: 0.5,
            dp: vec![(10, x), (20, x)],
        }
    }

    #[test]
    fn summary_cases() {
        let same = summarize(&[record(0, 1.5), record(1, 1.5)]).unwrap();
        assert_eq!(same.reconstruction.std, 0.0);
        let s = summarize(&[record(0, 1.0), record(1, 3.0)]).unwrap();
        assert_eq!(s.reconstruction.mean, 2.0);
        assert!((s.reconstruction.std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.dp[1].0, 20);
        let recs = [record(0, 0.1), record(1, 0.7), record(2, 0.3), record(3, 1e-9)];
        let rev: Vec<_> = recs.iter().rev().cloned().collect();
        assert_eq!(summarize(&recs).unwrap(), summarize(&rev).unwrap());
        assert!(summarize(&recs[..1]).is_err());
    }

    #[test]
    fn evaluate_end_to_end() {
        let mut rng = Rng::new(1);
        let n = 40;
        let groups: Vec<usize> = (0..n).map(|v| v % 2).collect();
        let mut edges = vec![(9, 10), (19, 20), (29, 30)];
        for u in 0..n {
            for v in (u + 1)..n {
                if (u / 10 == v / 10) && rng.uniform() < 0.6 {
                    edges.push((u, v));
                }
            }
        }
        let g = Graph::new(n, edges, DenseMatrix::zeros(n, 1), groups, 2).unwrap();
        let split = crate::graph::train_test_split(&g, 0.2, &mut rng).unwrap();
        // Embeddings that encode the planted blocks.
        let m = split.train.num_nodes();
        let phi = Embeddings::new(DenseMatrix::from_fn(m, 4, |v, j| {
            if split.train_to_original[v] / 10 == j {
                2.0
            } else {
                0.0
            }
        }));
        let cfg = EvalConfig {
            ks: vec![5, 10, 20],
            ..EvalConfig::default()
        };
        let rec = evaluate(&split.train, &split.test_pos, &phi, 7, &mut Rng::new(3), &cfg).unwrap();
        assert!(rec.auroc > 0.9, "{}", rec.auroc);
        assert!((0.0..=1.0).contains(&rec.f1));
        assert_eq!(rec.dp.iter().map(|d| d.0).collect::<Vec<_>>(), vec![5, 10, 20]);
        assert_eq!(rec.seed, 7);
        let again = evaluate(&split.train, &split.test_pos, &phi, 7, &mut Rng::new(3), &cfg).unwrap();
        assert_eq!(rec, again);
    }
}
