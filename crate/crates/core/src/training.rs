//! Adam and the joint two-gradient training loop.
//!
//! Each epoch first updates the GNN weights `{W⁰, W¹}` with the gradient of
//! the reconstruction loss, then updates the fairness tensors with `λ_f`
//! times the gradient of the link divergence. The two groups keep separate
//! optimizer states and never receive each other's gradients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::{GradientSet, Tape};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{DenseMatrix, Rng};
use crate::losses::{
    pos_weight, LinkDivergenceLoss, ReconstructionLoss, DEFAULT_BLOCK_ROWS,
};
use crate::model::{Architecture, Embeddings, Encoder, ModelParams, ParamKey, Variant};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: DenseMatrix,
    v: DenseMatrix,
    t: u64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            m: DenseMatrix::zeros(rows, cols),
            v: DenseMatrix::zeros(rows, cols),
            t: 0,
        }
    }

    pub fn for_param(p: &DenseMatrix) -> Self {
        Self::new(p.rows(), p.cols())
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &DenseMatrix {
        &self.m
    }

    pub fn second_moment(&self) -> &DenseMatrix {
        &self.v
    }
}

/// One bias-corrected Adam update of `param` in place.
pub fn adam_step(
    state: &mut AdamState,
    param: &mut DenseMatrix,
    grad: &DenseMatrix,
    learning_rate: f64,
) -> Result<()> {
    if param.shape() != grad.shape() || state.m.shape() != param.shape() {
        return Err(Error::invalid(format!(
            "adam shapes differ: param {:?}, grad {:?}, state {:?}",
            param.shape(),
            grad.shape(),
            state.m.shape()
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    let m = state.m.data_mut();
    let v = state.v.data_mut();
    for (((p, &g), m), v) in param
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Scale applied to the link-divergence gradient of the fairness tensors.
    pub lambda_f: f64,
    pub variant: Variant,
    pub seed: u64,
    /// Worker threads for the linear-algebra kernels; 0 uses the ambient pool.
    pub threads: usize,
    pub arch: Architecture,
    pub block_rows: usize,
}

impl TrainConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            learning_rate: 1e-4,
            epochs: 300,
            lambda_f: 1.0,
            variant,
            seed: 0,
            threads: 0,
            arch: Architecture::default(),
            block_rows: DEFAULT_BLOCK_ROWS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.lambda_f >= 0.0 && self.lambda_f.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda_f must be a finite non-negative number, got {}",
                self.lambda_f
            )));
        }
        if self.block_rows == 0 {
            return Err(Error::invalid("block_rows must be at least 1"));
        }
        if self.arch.hidden_dim == 0 || self.arch.embed_dim == 0 {
            return Err(Error::invalid("layer widths must be positive"));
        }
        match self.variant {
            Variant::Cfo { c: 0 } => Err(Error::invalid("CFO needs c ≥ 1")),
            Variant::Aug { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => {
                Err(Error::invalid(format!("AUG needs λ ≥ 0, got {lambda}")))
            }
            _ => Ok(()),
        }
    }
}

/// Which objective produced a parameter update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateSource {
    Reconstruction,
    ScaledDivergence,
    Augmented,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub epoch: usize,
    pub source: UpdateSource,
    pub params: Vec<ParamKey>,
}

/// Per-epoch loss values and the provenance of every update.
///
/// `reconstruction[e]` is measured before the epoch's utility update and
/// `divergence[e]` between the utility and fairness updates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub reconstruction: Vec<f64>,
    pub divergence: Vec<f64>,
    pub updates: Vec<UpdateRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.reconstruction.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reconstruction.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub embeddings: Embeddings,
    pub history: TrainHistory,
}

/// Trains from a fresh Glorot initialization seeded by `cfg.seed`.
pub fn joint_train(g: &Graph, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let encoder = Encoder::new(g);
    let params = encoder.init_params(cfg.variant, cfg.arch, &mut Rng::new(cfg.seed))?;
    train_from(g, cfg, params)
}

/// Trains starting from the given parameters.
pub fn train_from(g: &Graph, cfg: &TrainConfig, params: ModelParams) -> Result<TrainOutcome> {
    cfg.validate()?;
    if params.variant != cfg.variant {
        return Err(Error::invalid(format!(
            "parameters are for {}, config asks for {}",
            params.variant, cfg.variant
        )));
    }
    if cfg.threads == 0 {
        return run(g, cfg, params);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| run(g, cfg, params))
}

struct Optimizer {
    states: BTreeMap<ParamKey, AdamState>,
}

impl Optimizer {
    fn new(params: &ModelParams, keys: &[ParamKey]) -> Self {
        let states = keys
            .iter()
            .filter_map(|&k| params.get(k).map(|p| (k, AdamState::for_param(p))))
            .collect();
        Self { states }
    }

    fn keys(&self) -> Vec<ParamKey> {
        self.states.keys().copied().collect()
    }

    fn step(
        &mut self,
        params: &mut ModelParams,
        grads: &mut GradientSet,
        scale: f64,
        lr: f64,
        epoch: usize,
    ) -> Result<()> {
        for (&key, state) in self.states.iter_mut() {
            let mut grad = grads
                .remove(key.id())
                .ok_or_else(|| Error::invalid(format!("no gradient for {key:?}")))?;
            if scale != 1.0 {
                grad = grad.scale(scale);
            }
            if !grad.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    what: format!("gradient of {key:?}"),
                });
            }
            let p = params
                .get_mut(key)
                .ok_or_else(|| Error::invalid(format!("missing parameter {key:?}")))?;
            adam_step(state, p, &grad, lr)?;
        }
        Ok(())
    }
}

fn finite(value: f64, epoch: usize, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Divergence {
            epoch,
            what: what.to_string(),
        })
    }
}

fn run(g: &Graph, cfg: &TrainConfig, mut params: ModelParams) -> Result<TrainOutcome> {
    let encoder = Encoder::new(g);
    let recon = ReconstructionLoss::new(g, pos_weight(g)?).with_block_rows(cfg.block_rows);
    let div = LinkDivergenceLoss::new(g).with_block_rows(cfg.block_rows);
    let lr = cfg.learning_rate;
    let mut history = TrainHistory::default();

    if let Variant::Aug { lambda } = cfg.variant {
        let mut opt = Optimizer::new(&params, &params.all_keys());
        let keys = opt.keys();
        let ids: Vec<_> = keys.iter().map(|k| k.id()).collect();
        for epoch in 0..cfg.epochs {
            let (lr_value, ld_value, mut grads) = {
                let mut tape = Tape::new();
                let phi = encoder.record(&mut tape, &params)?;
                let lr_node = tape.loss(phi, &recon)?;
                let ld_node = tape.loss(phi, &div)?;
                let scaled = tape.scale(ld_node, lambda);
                let total = tape.add(lr_node, scaled)?;
                let grads = tape.backward(total, &ids)?;
                (tape.scalar(lr_node)?, tape.scalar(ld_node)?, grads)
            };
            history.reconstruction.push(finite(lr_value, epoch, "reconstruction loss")?);
            history.divergence.push(finite(ld_value, epoch, "link divergence")?);
            opt.step(&mut params, &mut grads, 1.0, lr, epoch)?;
            history.updates.push(UpdateRecord {
                epoch,
                source: UpdateSource::Augmented,
                params: keys.clone(),
            });
        }
    } else {
        let mut utility = Optimizer::new(&params, &params.utility_keys());
        let mut fairness = Optimizer::new(&params, &params.fairness_keys());
        let utility_keys = utility.keys();
        let fairness_keys = fairness.keys();
        let utility_ids: Vec<_> = utility_keys.iter().map(|k| k.id()).collect();
        let fairness_ids: Vec<_> = fairness_keys.iter().map(|k| k.id()).collect();
        for epoch in 0..cfg.epochs {
            let (value, mut grads) = {
                let mut tape = Tape::new();
                let phi = encoder.record(&mut tape, &params)?;
                let node = tape.loss(phi, &recon)?;
                (tape.scalar(node)?, tape.backward(node, &utility_ids)?)
            };
            history.reconstruction.push(finite(value, epoch, "reconstruction loss")?);
            utility.step(&mut params, &mut grads, 1.0, lr, epoch)?;
            history.updates.push(UpdateRecord {
                epoch,
                source: UpdateSource::Reconstruction,
                params: utility_keys.clone(),
            });

            if fairness_keys.is_empty() {
                let phi = encoder.forward(&params)?;
                let value = crate::autodiff::ScalarLoss::value(&div, phi.matrix())?;
                history.divergence.push(finite(value, epoch, "link divergence")?);
                continue;
            }
            let (value, mut grads) = {
                let mut tape = Tape::new();
                let phi = encoder.record(&mut tape, &params)?;
                let node = tape.loss(phi, &div)?;
                (tape.scalar(node)?, tape.backward(node, &fairness_ids)?)
            };
            history.divergence.push(finite(value, epoch, "link divergence")?);
            fairness.step(&mut params, &mut grads, cfg.lambda_f, lr, epoch)?;
            history.updates.push(UpdateRecord {
                epoch,
                source: UpdateSource::ScaledDivergence,
                params: fairness_keys.clone(),
            });
        }
    }

    let embeddings = encoder.forward(&params)?;
    if !embeddings.matrix().is_finite() {
        return Err(Error::Divergence {
            epoch: cfg.epochs,
            what: "final embeddings".into(),
        });
    }
    Ok(TrainOutcome {
        params,
        embeddings,
        history,
    })
}
