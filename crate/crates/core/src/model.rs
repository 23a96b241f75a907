//! Two-layer graph convolutional encoder and its fairness variants.
//!
//! Every variant shares the second layer `Φ = act₁(Â H W¹)` and differs only
//! in the first-layer pre-activation:
//!
//! | variant | first-layer pre-activation |
//! |---------|----------------------------|
//! | Base, AUG | `Â F W⁰` |
//! | GFO | `(Â F + W_f) W⁰` |
//! | CFO(c) | `(Â F + A* F*) W⁰`, `A*` is `n × c`, `F*` is `c × m` |
//! | FEW | `((Â ∘ W_f) F) W⁰`, `W_f` on stored entries of `Â` only |
//!
//! Products are associated as `Â (F W⁰)` and `A* (F* W⁰)`: identical in exact
//! arithmetic and much cheaper when `m` is large.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, Graph};
use crate::linalg::{glorot_normal_init, sigmoid, DenseMatrix, Rng, SparseMatrix};

/// Model family member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Variant {
    Base,
    Gfo,
    Cfo { c: usize },
    Few,
    /// Single-objective `L_R + λ·L_D` baseline.
    Aug { lambda: f64 },
}

impl Variant {
    pub fn has_fairness_params(&self) -> bool {
        matches!(self, Variant::Gfo | Variant::Cfo { .. } | Variant::Few)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Base => write!(f, "Base"),
            Variant::Gfo => write!(f, "GFO"),
            Variant::Cfo { c } => write!(f, "CFO{c}"),
            Variant::Few => write!(f, "FEW"),
            Variant::Aug { lambda } => write!(f, "AUG{lambda}"),
        }
    }
}

/// Parses `Base`, `GFO`, `FEW`, `CFO:<c>` / `CFO<c>` and `AUG:<λ>` / `AUG<λ>`
/// (case-insensitive).
impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let arg = |prefix: &str| lower[prefix.len()..].trim_start_matches([':', '=', '(']).trim_end_matches(')').to_string();
        let bad = || Error::invalid(format!("unknown model '{s}'"));
        match lower.as_str() {
            "base" | "gae" => Ok(Variant::Base),
            "gfo" => Ok(Variant::Gfo),
            "few" => Ok(Variant::Few),
            _ if lower.starts_with("cfo") => {
                let c: usize = arg("cfo").parse().map_err(|_| bad())?;
                if c == 0 {
                    return Err(Error::invalid("CFO needs c ≥ 1"));
                }
                Ok(Variant::Cfo { c })
            }
            _ if lower.starts_with("aug") => {
                let lambda: f64 = arg("aug").parse().map_err(|_| bad())?;
                if !(lambda >= 0.0) {
                    return Err(Error::invalid("AUG needs λ ≥ 0"));
                }
                Ok(Variant::Aug { lambda })
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    fn record(self, tape: &mut Tape<'_>, v: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(v),
            Activation::Sigmoid => tape.sigmoid(v),
            Activation::Identity => v,
        }
    }
}

/// Layer widths and activations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden_dim: 32,
            embed_dim: 16,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
        }
    }
}

/// Names of the trainable tensors, also used as tape parameter ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ParamKey {
    W0,
    W1,
    GfoOffset,
    CfoEdges,
    CfoFeatures,
    FewWeights,
}

impl ParamKey {
    pub const ALL: [ParamKey; 6] = [
        ParamKey::W0,
        ParamKey::W1,
        ParamKey::GfoOffset,
        ParamKey::CfoEdges,
        ParamKey::CfoFeatures,
        ParamKey::FewWeights,
    ];

    pub fn id(self) -> ParamId {
        ParamId(self as u32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub w0: DenseMatrix,
    pub w1: DenseMatrix,
    pub variant: Variant,
    pub arch: Architecture,
    /// GFO `W_f`, `n × m`.
    pub fair_gfo: Option<DenseMatrix>,
    /// CFO `A*`, `n × c`.
    pub fair_cfo_a: Option<DenseMatrix>,
    /// CFO `F*`, `c × m`.
    pub fair_cfo_f: Option<DenseMatrix>,
    /// FEW weights, `1 × nnz(Â)` in `Â` storage order (self-loops included).
    pub fair_few: Option<DenseMatrix>,
}

impl ModelParams {
    /// Glorot-normal weights; FEW weights start at 1 so FEW starts at Base.
    pub fn init(
        variant: Variant,
        arch: Architecture,
        n: usize,
        m: usize,
        a_hat_nnz: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let w0 = glorot_normal_init(m, arch.hidden_dim, rng)?;
        let w1 = glorot_normal_init(arch.hidden_dim, arch.embed_dim, rng)?;
        let mut p = Self {
            w0,
            w1,
            variant,
            arch,
            fair_gfo: None,
            fair_cfo_a: None,
            fair_cfo_f: None,
            fair_few: None,
        };
        match variant {
            Variant::Base | Variant::Aug { .. } => {}
            Variant::Gfo => p.fair_gfo = Some(glorot_normal_init(n, m, rng)?),
            Variant::Cfo { c } => {
                if c == 0 {
                    return Err(Error::invalid("CFO needs c ≥ 1"));
                }
                p.fair_cfo_a = Some(glorot_normal_init(n, c, rng)?);
                p.fair_cfo_f = Some(glorot_normal_init(c, m, rng)?);
            }
            Variant::Few => p.fair_few = Some(DenseMatrix::filled(1, a_hat_nnz, 1.0)),
        }
        Ok(p)
    }

    pub fn get(&self, key: ParamKey) -> Option<&DenseMatrix> {
        match key {
            ParamKey::W0 => Some(&self.w0),
            ParamKey::W1 => Some(&self.w1),
            ParamKey::GfoOffset => self.fair_gfo.as_ref(),
            ParamKey::CfoEdges => self.fair_cfo_a.as_ref(),
            ParamKey::CfoFeatures => self.fair_cfo_f.as_ref(),
            ParamKey::FewWeights => self.fair_few.as_ref(),
        }
    }

    pub fn get_mut(&mut self, key: ParamKey) -> Option<&mut DenseMatrix> {
        match key {
            ParamKey::W0 => Some(&mut self.w0),
            ParamKey::W1 => Some(&mut self.w1),
            ParamKey::GfoOffset => self.fair_gfo.as_mut(),
            ParamKey::CfoEdges => self.fair_cfo_a.as_mut(),
            ParamKey::CfoFeatures => self.fair_cfo_f.as_mut(),
            ParamKey::FewWeights => self.fair_few.as_mut(),
        }
    }

    /// GNN weights, trained on the reconstruction loss.
    pub fn utility_keys(&self) -> Vec<ParamKey> {
        vec![ParamKey::W0, ParamKey::W1]
    }

    /// Emulated-modification tensors, trained on the link divergence.
    pub fn fairness_keys(&self) -> Vec<ParamKey> {
        match self.variant {
            Variant::Gfo => vec![ParamKey::GfoOffset],
            Variant::Cfo { .. } => vec![ParamKey::CfoEdges, ParamKey::CfoFeatures],
            Variant::Few => vec![ParamKey::FewWeights],
            Variant::Base | Variant::Aug { .. } => vec![],
        }
    }

    pub fn all_keys(&self) -> Vec<ParamKey> {
        let mut keys = self.utility_keys();
        keys.extend(self.fairness_keys());
        keys
    }

    /// Checks that exactly the variant's tensors exist with consistent shapes.
    pub fn validate(&self, n: usize, m: usize, a_hat_nnz: usize) -> Result<()> {
        let shape = |key: ParamKey, want: (usize, usize)| -> Result<()> {
            match self.get(key) {
                Some(t) if t.shape() == want => Ok(()),
                Some(t) => Err(Error::invalid(format!(
                    "{key:?} is {:?}, expected {want:?}",
                    t.shape()
                ))),
                None => Err(Error::invalid(format!("{} requires {key:?}", self.variant))),
            }
        };
        let (h, d) = (self.arch.hidden_dim, self.arch.embed_dim);
        shape(ParamKey::W0, (m, h))?;
        shape(ParamKey::W1, (h, d))?;
        let expected = self.fairness_keys();
        for key in [
            ParamKey::GfoOffset,
            ParamKey::CfoEdges,
            ParamKey::CfoFeatures,
            ParamKey::FewWeights,
        ] {
            if !expected.contains(&key) && self.get(key).is_some() {
                return Err(Error::invalid(format!(
                    "{} must not carry {key:?}",
                    self.variant
                )));
            }
        }
        match self.variant {
            Variant::Gfo => shape(ParamKey::GfoOffset, (n, m))?,
            Variant::Cfo { c } => {
                if c == 0 {
                    return Err(Error::invalid("CFO needs c ≥ 1"));
                }
                shape(ParamKey::CfoEdges, (n, c))?;
                shape(ParamKey::CfoFeatures, (c, m))?;
            }
            Variant::Few => shape(ParamKey::FewWeights, (1, a_hat_nnz))?,
            Variant::Base | Variant::Aug { .. } => {}
        }
        Ok(())
    }
}

/// Node embeddings `Φ`, `n × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings(DenseMatrix);

impl Embeddings {
    pub fn new(phi: DenseMatrix) -> Self {
        Self(phi)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.0
    }

    pub fn num_nodes(&self) -> usize {
        self.0.rows()
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, v: usize) -> &[f64] {
        self.0.row(v)
    }
}

/// Graph-bound inputs of the encoder: `Â` and `F`.
#[derive(Debug, Clone)]
pub struct Encoder<'g> {
    a_hat: SparseMatrix,
    features: &'g DenseMatrix,
}

impl<'g> Encoder<'g> {
    pub fn new(g: &'g Graph) -> Self {
        Self {
            a_hat: normalize_adjacency(g),
            features: g.features(),
        }
    }

    pub fn from_parts(a_hat: SparseMatrix, features: &'g DenseMatrix) -> Result<Self> {
        if a_hat.rows() != a_hat.cols() || a_hat.rows() != features.rows() {
            return Err(Error::invalid(format!(
                "Â is {}x{}, F is {:?}",
                a_hat.rows(),
                a_hat.cols(),
                features.shape()
            )));
        }
        Ok(Self { a_hat, features })
    }

    pub fn a_hat(&self) -> &SparseMatrix {
        &self.a_hat
    }

    pub fn num_nodes(&self) -> usize {
        self.a_hat.rows()
    }

    pub fn init_params(&self, variant: Variant, arch: Architecture, rng: &mut Rng) -> Result<ModelParams> {
        ModelParams::init(
            variant,
            arch,
            self.num_nodes(),
            self.features.cols(),
            self.a_hat.nnz(),
            rng,
        )
    }

    /// Records the forward pass on `tape`, registering every tensor of the
    /// variant as a parameter, and returns the embedding node.
    pub fn record<'t>(&'t self, tape: &mut Tape<'t>, params: &'t ModelParams) -> Result<Var> {
        params.validate(self.num_nodes(), self.features.cols(), self.a_hat.nnz())?;
        let arch = params.arch;
        let w0 = tape.param(ParamKey::W0.id(), &params.w0)?;
        let w1 = tape.param(ParamKey::W1.id(), &params.w1)?;
        let f = tape.constant(self.features);
        let fw = tape.matmul(f, w0)?;
        let pre = match params.variant {
            Variant::Base | Variant::Aug { .. } => tape.spmm(&self.a_hat, fw)?,
            Variant::Gfo => {
                let wf = tape.param(ParamKey::GfoOffset.id(), param(params, ParamKey::GfoOffset)?)?;
                let conv = tape.spmm(&self.a_hat, fw)?;
                let offset = tape.matmul(wf, w0)?;
                tape.add(conv, offset)?
            }
            Variant::Cfo { .. } => {
                let a = tape.param(ParamKey::CfoEdges.id(), param(params, ParamKey::CfoEdges)?)?;
                let fs = tape.param(ParamKey::CfoFeatures.id(), param(params, ParamKey::CfoFeatures)?)?;
                let conv = tape.spmm(&self.a_hat, fw)?;
                let fsw = tape.matmul(fs, w0)?;
                let offset = tape.matmul(a, fsw)?;
                tape.add(conv, offset)?
            }
            Variant::Few => {
                let w = tape.param(ParamKey::FewWeights.id(), param(params, ParamKey::FewWeights)?)?;
                tape.edge_spmm(&self.a_hat, w, fw)?
            }
        };
        let h = arch.hidden_activation.record(tape, pre);
        let hw = tape.matmul(h, w1)?;
        let z = tape.spmm(&self.a_hat, hw)?;
        Ok(arch.output_activation.record(tape, z))
    }

    pub fn forward(&self, params: &ModelParams) -> Result<Embeddings> {
        let mut tape = Tape::new();
        let phi = self.record(&mut tape, params)?;
        Ok(Embeddings(tape.value(phi).clone()))
    }
}

fn param(params: &ModelParams, key: ParamKey) -> Result<&DenseMatrix> {
    params
        .get(key)
        .ok_or_else(|| Error::invalid(format!("{} requires {key:?}", params.variant)))
}

/// Embeddings of every node for the given `Â` and features.
pub fn forward(params: &ModelParams, a_hat: &SparseMatrix, f: &DenseMatrix) -> Result<Embeddings> {
    Encoder::from_parts(a_hat.clone(), f)?.forward(params)
}

/// Rows `rows` of the decoded similarity matrix `σ(ΦΦᵀ)`.
pub fn decode_block(phi: &Embeddings, rows: Range<usize>) -> Result<DenseMatrix> {
    let m = phi.matrix();
    if rows.start > rows.end || rows.end > m.rows() {
        return Err(Error::invalid(format!(
            "rows {rows:?} outside 0..{}",
            m.rows()
        )));
    }
    Ok(m.slice_rows(rows.start, rows.end)?.matmul_nt(m)?.sigmoid())
}

/// Relative singular-value cutoff for [`cfo_rank_witness`].
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Numerical rank of `A* F*`: singular values above `1e-10 · σ_max`.
pub fn cfo_rank_witness(params: &ModelParams) -> Result<usize> {
    let Variant::Cfo { .. } = params.variant else {
        return Err(Error::invalid(format!(
            "rank witness is defined for CFO, got {}",
            params.variant
        )));
    };
    let a = param(params, ParamKey::CfoEdges)?;
    let f = param(params, ParamKey::CfoFeatures)?;
    numerical_rank(&a.matmul(f)?)
}

fn numerical_rank(m: &DenseMatrix) -> Result<usize> {
    let dm = DMatrix::from_row_slice(m.rows(), m.cols(), m.data());
    let sv = dm.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > RANK_TOLERANCE * max).count())
}

/// Factors an arbitrary `n × m` offset as `A* F*` with inner width `c`,
/// possible whenever `c ≥ min(n, m)`.
pub fn cfo_factors_for_offset(offset: &DenseMatrix, c: usize) -> Result<(DenseMatrix, DenseMatrix)> {
    let (n, m) = offset.shape();
    if c < n.min(m) {
        return Err(Error::invalid(format!(
            "c = {c} is below min(n, m) = {}",
            n.min(m)
        )));
    }
    if c >= m {
        // A* = [W_f | 0], F* = [I; 0]
        let a = DenseMatrix::from_fn(n, c, |i, j| if j < m { offset.get(i, j) } else { 0.0 });
        let f = DenseMatrix::from_fn(c, m, |i, j| if i == j { 1.0 } else { 0.0 });
        Ok((a, f))
    } else {
        // A* = [I | 0], F* = [W_f; 0]
        let a = DenseMatrix::from_fn(n, c, |i, j| if i == j { 1.0 } else { 0.0 });
        let f = DenseMatrix::from_fn(c, m, |i, j| if i < n { offset.get(i, j) } else { 0.0 });
        Ok((a, f))
    }
}

/// Layer-by-layer evaluation without the tape, used for cross-checks.
pub fn forward_dense(params: &ModelParams, a_hat: &SparseMatrix, f: &DenseMatrix) -> Result<Embeddings> {
    let a = a_hat.to_dense();
    let first = match params.variant {
        Variant::Base | Variant::Aug { .. } => a.matmul(f)?,
        Variant::Gfo => a.matmul(f)?.add(param(params, ParamKey::GfoOffset)?)?,
        Variant::Cfo { .. } => {
            let offset = param(params, ParamKey::CfoEdges)?.matmul(param(params, ParamKey::CfoFeatures)?)?;
            a.matmul(f)?.add(&offset)?
        }
        Variant::Few => a_hat
            .reweighted(param(params, ParamKey::FewWeights)?.data())?
            .to_dense()
            .matmul(f)?,
    };
    let h = first.matmul(&params.w0)?.map(|x| params.arch.hidden_activation.apply(x));
    let z = a.matmul(&h)?.matmul(&params.w1)?;
    Ok(Embeddings(z.map(|x| params.arch.output_activation.apply(x))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_graph() -> Graph {
        let f = DenseMatrix::from_rows(&[
            [1.0, 0.0, 1.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
        ])
        .unwrap();
        Graph::new(5, [(0, 1), (1, 2), (2, 3), (0, 4)], f, vec![0, 1, 0, 1, 0], 2).unwrap()
    }

    fn arch() -> Architecture {
        Architecture {
            hidden_dim: 4,
            embed_dim: 2,
            ..Architecture::default()
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [
            Variant::Base,
            Variant::Gfo,
            Variant::Cfo { c: 10 },
            Variant::Few,
            Variant::Aug { lambda: 100.0 },
        ] {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("cfo:3".parse::<Variant>().unwrap(), Variant::Cfo { c: 3 });
        assert_eq!("AUG(1e4)".parse::<Variant>().unwrap(), Variant::Aug { lambda: 1e4 });
        assert!("CFO0".parse::<Variant>().is_err());
        assert!("nope".parse::<Variant>().is_err());
    }

    #[test]
    fn gfo_with_zero_offset_equals_base() {
        let g = toy_graph();
        let enc = Encoder::new(&g);
        let base = enc.init_params(Variant::Base, arch(), &mut Rng::new(1)).unwrap();
        let mut gfo = base.clone();
        gfo.variant = Variant::Gfo;
        gfo.fair_gfo = Some(DenseMatrix::zeros(5, 3));
        assert_eq!(enc.forward(&base).unwrap(), enc.forward(&gfo).unwrap());
    }

    #[test]
    fn few_with_unit_weights_equals_base() {
        let g = toy_graph();
        let enc = Encoder::new(&g);
        let few = enc.init_params(Variant::Few, arch(), &mut Rng::new(2)).unwrap();
        let mut base = few.clone();
        base.variant = Variant::Base;
        base.fair_few = None;
        assert_eq!(enc.forward(&few).unwrap(), enc.forward(&base).unwrap());
    }

    #[test]
    fn two_node_pencil_forward() {
        let f = DenseMatrix::from_rows(&[[1.0], [1.0]]).unwrap();
        let g = Graph::new(2, [(0, 1)], f, vec![0, 1], 2).unwrap();
        let enc = Encoder::new(&g);
        let one = DenseMatrix::scalar(1.0);
        let params = ModelParams {
            w0: one.clone(),
            w1: one,
            variant: Variant::Base,
            arch: Architecture {
                hidden_dim: 1,
                embed_dim: 1,
                ..Architecture::default()
            },
            fair_gfo: None,
            fair_cfo_a: None,
            fair_cfo_f: None,
            fair_few: None,
        };
        // Â = [[.5,.5],[.5,.5]]; ÂF = (1,1); relu → (1,1); Â·(1,1) = (1,1).
        let phi = enc.forward(&params).unwrap();
        assert_eq!(phi.matrix().data(), &[1.0, 1.0]);
        let a_f = enc.a_hat().spmm(g.features()).unwrap();
        assert_eq!(a_f.data(), &[1.0, 1.0]);
    }

    #[test]
    fn tape_forward_matches_dense_reference() {
        let g = toy_graph();
        let enc = Encoder::new(&g);
        for (i, v) in [Variant::Base, Variant::Gfo, Variant::Cfo { c: 2 }, Variant::Few]
            .into_iter()
            .enumerate()
        {
            let mut p = enc.init_params(v, arch(), &mut Rng::new(10 + i as u64)).unwrap();
            if let Some(w) = p.fair_few.as_mut() {
                for (j, x) in w.data_mut().iter_mut().enumerate() {
                    *x = 0.5 + 0.1 * j as f64;
                }
            }
            let a = enc.forward(&p).unwrap();
            let b = forward_dense(&p, enc.a_hat(), g.features()).unwrap();
            assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-12, "{v}");
            assert_eq!(a.matrix().shape(), (5, 2));
        }
    }

    #[test]
    fn validation_rejects_foreign_tensors() {
        let g = toy_graph();
        let enc = Encoder::new(&g);
        let mut p = enc.init_params(Variant::Base, arch(), &mut Rng::new(1)).unwrap();
        p.fair_gfo = Some(DenseMatrix::zeros(5, 3));
        assert!(enc.forward(&p).is_err());
        let mut p = enc.init_params(Variant::Gfo, arch(), &mut Rng::new(1)).unwrap();
        p.fair_gfo = Some(DenseMatrix::zeros(4, 3));
        assert!(enc.forward(&p).is_err());
    }

    #[test]
    fn decode_cases() {
        let zero = Embeddings::new(DenseMatrix::zeros(3, 2));
        assert_eq!(decode_block(&zero, 0..3).unwrap(), DenseMatrix::filled(3, 3, 0.5));
        let phi = Embeddings::new(DenseMatrix::from_rows(&[[1.0], [2.0]]).unwrap());
        let d = decode_block(&phi, 0..2).unwrap();
        let expect = [sigmoid(1.0), sigmoid(2.0), sigmoid(2.0), sigmoid(4.0)];
        assert_eq!(d.data(), &expect);
        let same = Embeddings::new(DenseMatrix::from_rows(&[[0.3, 0.4], [0.3, 0.4]]).unwrap());
        let d = decode_block(&same, 0..2).unwrap();
        assert_eq!(d.get(0, 1), d.get(1, 0));
        assert_eq!(d.get(0, 1), sigmoid(0.25));
        assert!(decode_block(&phi, 1..3).is_err());
    }

    #[test]
    fn rank_witness_cases() {
        let mut rng = Rng::new(3);
        let one = ModelParams::init(Variant::Cfo { c: 1 }, arch(), 8, 6, 0, &mut rng).unwrap();
        assert_eq!(cfo_rank_witness(&one).unwrap(), 1);
        let base = ModelParams::init(Variant::Base, arch(), 8, 6, 0, &mut rng).unwrap();
        assert!(cfo_rank_witness(&base).is_err());
    }

    #[test]
    fn offset_factorization_reconstructs() {
        let mut rng = Rng::new(9);
        for (n, m, c) in [(6, 4, 4), (6, 4, 9), (3, 7, 3), (3, 7, 5)] {
            let wf = DenseMatrix::from_fn(n, m, |_, _| rng.normal());
            let (a, f) = cfo_factors_for_offset(&wf, c).unwrap();
            assert_eq!(a.shape(), (n, c));
            assert_eq!(f.shape(), (c, m));
            assert!(a.matmul(&f).unwrap().max_abs_diff(&wf) <= 1e-12);
        }
        assert!(cfo_factors_for_offset(&DenseMatrix::zeros(5, 5), 4).is_err());
    }
}
