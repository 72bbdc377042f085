//! Supervised variant of the joint pipeline. The decoder no longer rebuilds
//! the aggregated vector; it predicts the label column instead, so the code
//! bits are pushed toward whatever separates the classes. Unseen images carry
//! no label, so training also fits a linear map P that sends a plain
//! aggregation to where the supervised phi solutions live; encoding is then
//! sign(W1 (P phi0) + c1).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::binary::{sgn, SignMatrix};
use crate::error::{Error, Result};
use crate::gmp::{gmp_aggregate, gmp_batch, gmp_system};
use crate::itq::{itq_train, ItqConfig};
use crate::linalg::{add_scaled_identity, affine_map, right_solve_spd, solve_spd_vec};
use crate::rba::{encoder_solve_factor, fit_affine_autoencoder, wc_update, AeParams, HashModel};
use crate::types::{AggregatedVector, FeatureMatrix, LocalFeatureSet};
use crate::DEFAULT_SEED;

/// Class assignments, one column per sample. Single-label data is one-hot;
/// multi-label data sets every held label positive.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    data: DMatrix<f64>,
}

impl LabelMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidInput("label matrix is empty".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "label matrix contains a non-finite value".into(),
            ));
        }
        for j in 0..data.ncols() {
            if !data.column(j).iter().any(|&v| v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "sample {j} has no positive label entry"
                )));
            }
        }
        Ok(Self { data })
    }

    /// Number of classes.
    pub fn c(&self) -> usize {
        self.data.nrows()
    }

    /// Number of samples.
    pub fn m(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Dominant class of a column; ties go to the lowest class id.
    pub fn class_of_column(&self, j: usize) -> usize {
        let col = self.data.column(j);
        let mut best = 0;
        for i in 1..col.len() {
            if col[i] > col[best] {
                best = i;
            }
        }
        best
    }

    /// All classes marked positive in a column, ascending.
    pub fn label_set(&self, j: usize) -> Vec<usize> {
        self.data
            .column(j)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// One-hot columns from 0-indexed class ids.
pub fn one_hot(classes: &[usize], c: usize) -> Result<LabelMatrix> {
    if c == 0 || classes.is_empty() {
        return Err(Error::InvalidInput(
            "one_hot needs at least one class and one sample".into(),
        ));
    }
    let mut data = DMatrix::zeros(c, classes.len());
    for (j, &k) in classes.iter().enumerate() {
        if k >= c {
            return Err(Error::InvalidInput(format!(
                "sample {j} has class id {k}, only {c} classes"
            )));
        }
        data[(k, j)] = 1.0;
    }
    LabelMatrix::new(data)
}

/// Multi-hot columns; every sample must hold at least one label.
pub fn multi_hot(labels: &[Vec<usize>], c: usize) -> Result<LabelMatrix> {
    if c == 0 || labels.is_empty() {
        return Err(Error::InvalidInput(
            "multi_hot needs at least one class and one sample".into(),
        ));
    }
    let mut data = DMatrix::zeros(c, labels.len());
    for (j, ids) in labels.iter().enumerate() {
        if ids.is_empty() {
            return Err(Error::InvalidInput(format!("sample {j} has no labels")));
        }
        for &k in ids {
            if k >= c {
                return Err(Error::InvalidInput(format!(
                    "sample {j} has class id {k}, only {c} classes"
                )));
            }
            data[(k, j)] = 1.0;
        }
    }
    LabelMatrix::new(data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SashConfig {
    pub l: usize,
    pub t: usize,
    pub t1: usize,
    pub lambda: f64,
    pub beta: f64,
    /// Weight of the aggregation terms against the label reconstruction.
    pub gamma: f64,
    /// Ridge inside the aggregation terms.
    pub mu: f64,
    /// Regularizer for plain aggregation (initialization and unseen images).
    pub gmp_mu: f64,
    /// Ridge of the phi0 -> phi mapping fit.
    pub alpha: f64,
    pub sweeps: usize,
    pub seed: u64,
}

impl SashConfig {
    pub fn new(l: usize) -> Self {
        Self {
            l,
            t: 5,
            t1: 10,
            lambda: 1e-4,
            beta: 1e-3,
            gamma: 1.0,
            mu: 1e2,
            gmp_mu: 1e2,
            alpha: 0.5,
            sweeps: 1,
            seed: DEFAULT_SEED,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.l == 0 || self.t == 0 || self.t1 == 0 || self.sweeps == 0 {
            return Err(Error::InvalidConfig(
                "l, t, t1 and sweeps must all be at least 1".into(),
            ));
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("mu", self.mu),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [("gmp_mu", self.gmp_mu), ("alpha", self.alpha)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SashModel {
    /// Encoder into bits plus decoder from bits to label space.
    pub hash: HashModel,
    /// Plain aggregation -> supervised aggregation map, D x D.
    pub p: DMatrix<f64>,
    /// Plain aggregations of the training images.
    pub phi0: DMatrix<f64>,
    /// Supervised aggregations after the final alternation.
    pub phi_t: DMatrix<f64>,
    pub config: SashConfig,
}

#[derive(Debug, Clone)]
pub struct SashOutcome {
    pub model: SashModel,
    /// Objective value after each outer alternation.
    pub objective_log: Vec<f64>,
}

/// Model-dependent pieces of the supervised phi system, M = W2 W1.
struct PhiCache {
    /// M^T M / gamma.
    mtm: DMatrix<f64>,
    /// M^T / gamma.
    mt: DMatrix<f64>,
    /// W2 c1 + c2.
    u: DVector<f64>,
}

fn phi_cache(model: &HashModel, gamma: f64) -> PhiCache {
    let m = &model.w2 * &model.w1;
    PhiCache {
        mtm: m.transpose() * &m / gamma,
        mt: m.transpose() / gamma,
        u: &model.w2 * &model.c1 + &model.c2,
    }
}

fn phi_step_cached(
    v: &LocalFeatureSet,
    y: &DVector<f64>,
    cache: &PhiCache,
    mu: f64,
) -> Result<AggregatedVector> {
    let (mut a, mut rhs) = gmp_system(v, mu);
    a += &cache.mtm;
    rhs += &cache.mt * (y - &cache.u);
    AggregatedVector::new(solve_spd_vec(&a, &rhs, "phi system")?)
}

fn check_model(model: &HashModel, d: usize, c: usize) -> Result<()> {
    model.validate()?;
    if model.d_in() != d || model.d_out() != c {
        return Err(Error::DimensionMismatch(format!(
            "model maps {} -> {}, expected {d} -> {c}",
            model.d_in(),
            model.d_out()
        )));
    }
    Ok(())
}

/// Closed-form minimizer of the per-image relaxed problem
/// 1/2 ||y - (W2 (W1 phi + c1) + c2)||^2 + gamma/2 (||V^T phi - 1||^2 + mu ||phi||^2).
pub fn sash_phi_step(
    v: &LocalFeatureSet,
    y: &DVector<f64>,
    model: &HashModel,
    cfg: &SashConfig,
) -> Result<AggregatedVector> {
    cfg.validate()?;
    check_model(model, v.d(), y.len())?;
    phi_step_cached(v, y, &phi_cache(model, cfg.gamma), cfg.mu)
}

/// Closed-form (W, c) refresh against label targets; same update as the
/// unsupervised fit with the decoder aimed at Y instead of the input.
pub fn supervised_wc_step(
    phi: &FeatureMatrix,
    labels: &LabelMatrix,
    b: &SignMatrix,
    c1_prev: &DVector<f64>,
    c2_prev: &DVector<f64>,
    cfg: &SashConfig,
) -> Result<HashModel> {
    cfg.validate()?;
    if b.l() != cfg.l || b.m() != phi.m() || labels.m() != phi.m() {
        return Err(Error::DimensionMismatch(format!(
            "codes {}x{}, labels {}x{}, samples {}x{} do not agree",
            b.l(),
            b.m(),
            labels.c(),
            labels.m(),
            phi.d(),
            phi.m()
        )));
    }
    if c1_prev.len() != cfg.l || c2_prev.len() != labels.c() {
        return Err(Error::DimensionMismatch(format!(
            "bias lengths {} and {} do not match {} bits and {} classes",
            c1_prev.len(),
            c2_prev.len(),
            cfg.l,
            labels.c()
        )));
    }
    let factor = encoder_solve_factor(phi.data(), cfg.lambda, cfg.beta)?;
    wc_update(
        phi.data(),
        labels.data(),
        &b.to_real(),
        c1_prev,
        c2_prev,
        &factor,
        cfg.lambda,
        cfg.beta,
    )
}

/// Joint objective with hard-assigned codes sign(W1 Phi + c1 1^T): label
/// reconstruction, map ridge, and the aggregation terms.
fn objective(
    sets: &[LocalFeatureSet],
    labels: &LabelMatrix,
    phi: &DMatrix<f64>,
    model: &HashModel,
    cfg: &SashConfig,
) -> f64 {
    let bf = affine_map(&model.w1, phi, &model.c1).map(sgn);
    let recon = labels.data() - affine_map(&model.w2, &bf, &model.c2);
    let reg = 0.5 * cfg.beta * (model.w1.norm_squared() + model.w2.norm_squared());
    let mut agg = 0.0;
    for (i, v) in sets.iter().enumerate() {
        let p = phi.column(i);
        let r = v.data().transpose() * p - DVector::repeat(v.n(), 1.0);
        agg += r.norm_squared() + cfg.mu * p.norm_squared();
    }
    0.5 * recon.norm_squared() + reg + 0.5 * cfg.gamma * agg
}

/// Ridge fit of phi against phi0: P = Phi Phi0^T (Phi0 Phi0^T + alpha I)^-1.
pub fn learn_mapping(phi0: &DMatrix<f64>, phi: &DMatrix<f64>, alpha: f64) -> Result<DMatrix<f64>> {
    if phi0.shape() != phi.shape() || phi0.ncols() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "phi0 is {}x{}, phi is {}x{}; need identical nonempty shapes",
            phi0.nrows(),
            phi0.ncols(),
            phi.nrows(),
            phi.ncols()
        )));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "alpha must be nonnegative, got {alpha}"
        )));
    }
    let mut g = phi0 * phi0.transpose();
    add_scaled_identity(&mut g, alpha);
    right_solve_spd(
        &(phi * phi0.transpose()),
        &g,
        "mapping Gram system (alpha = 0 needs full-rank phi0)",
    )
}

fn common_d(sets: &[LocalFeatureSet]) -> Result<usize> {
    let first = sets
        .first()
        .ok_or_else(|| Error::InvalidInput("need at least one local feature set".into()))?;
    let d = first.d();
    for (i, s) in sets.iter().enumerate() {
        if s.d() != d {
            return Err(Error::DimensionMismatch(format!(
                "set {i} has {} rows, set 0 has {d}",
                s.d()
            )));
        }
    }
    Ok(d)
}

fn phi_step_all(
    sets: &[LocalFeatureSet],
    labels: &LabelMatrix,
    cache: &PhiCache,
    mu: f64,
) -> Result<DMatrix<f64>> {
    let results: Vec<Result<DVector<f64>>> = sets
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let y = DVector::from(labels.data().column(i));
            phi_step_cached(v, &y, cache, mu)
                .map(AggregatedVector::into_inner)
                .map_err(|e| e.prefixed(&format!("set {i}")))
        })
        .collect();
    let mut cols = Vec::with_capacity(results.len());
    for r in results {
        cols.push(r?);
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Alternating supervised training, then a one-shot fit of the mapping P from
/// the plain aggregations to the final supervised ones.
pub fn sash_train(
    sets: &[LocalFeatureSet],
    labels: &LabelMatrix,
    cfg: &SashConfig,
) -> Result<SashOutcome> {
    cfg.validate()?;
    let d = common_d(sets)?;
    if labels.m() != sets.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} label columns for {} sets",
            labels.m(),
            sets.len()
        )));
    }
    let phi0 = gmp_batch(d, sets, cfg.gmp_mu)?;
    let mut phi = phi0.clone();
    let params = AeParams {
        l: cfg.l,
        t1: cfg.t1,
        lambda: cfg.lambda,
        beta: cfg.beta,
        sweeps: cfg.sweeps,
    };
    let mut warm: Option<SignMatrix> = None;
    let mut model: Option<HashModel> = None;
    let mut log = Vec::with_capacity(cfg.t);
    for _ in 0..cfg.t {
        let b0 = match warm.take() {
            Some(b) => b,
            None => {
                let phi_fm = FeatureMatrix::new(phi.clone())?;
                itq_train(
                    &phi_fm,
                    &ItqConfig {
                        l: cfg.l,
                        iters: 50,
                        seed: cfg.seed,
                    },
                )?
                .1
            }
        };
        let fit = fit_affine_autoencoder(&phi, labels.data(), &params, b0)?;
        warm = Some(fit.codes);
        phi = phi_step_all(sets, labels, &phi_cache(&fit.model, cfg.gamma), cfg.mu)?;
        log.push(objective(sets, labels, &phi, &fit.model, cfg));
        model = Some(fit.model);
    }
    let p = learn_mapping(&phi0, &phi, cfg.alpha)?;
    Ok(SashOutcome {
        model: SashModel {
            hash: model.expect("t >= 1"),
            p,
            phi0,
            phi_t: phi,
            config: cfg.clone(),
        },
        objective_log: log,
    })
}

fn encode_phi0(model: &SashModel, phi0: &DMatrix<f64>) -> SignMatrix {
    let mapped = &model.p * phi0;
    SignMatrix::from_real_unchecked(&affine_map(&model.hash.w1, &mapped, &model.hash.c1).map(sgn))
}

/// Encode an unseen image: plain aggregation, map through P, sign the encoder
/// output. No label is needed. Returns an L x 1 sign matrix.
pub fn sash_encode(model: &SashModel, v: &LocalFeatureSet, cfg: &SashConfig) -> Result<SignMatrix> {
    cfg.validate()?;
    check_model(&model.hash, v.d(), model.hash.d_out())?;
    if model.p.nrows() != v.d() || model.p.ncols() != v.d() {
        return Err(Error::DimensionMismatch(format!(
            "mapping is {}x{}, expected {}x{}",
            model.p.nrows(),
            model.p.ncols(),
            v.d(),
            v.d()
        )));
    }
    let phi0 = gmp_aggregate(v, cfg.gmp_mu)?;
    let m = DMatrix::from_column_slice(v.d(), 1, phi0.data().as_slice());
    Ok(encode_phi0(model, &m))
}

/// Batch encode; column i is `sash_encode` of set i.
pub fn sash_encode_batch(
    model: &SashModel,
    sets: &[LocalFeatureSet],
    cfg: &SashConfig,
) -> Result<SignMatrix> {
    cfg.validate()?;
    let d = common_d(sets)?;
    check_model(&model.hash, d, model.hash.d_out())?;
    if model.p.nrows() != d || model.p.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "mapping is {}x{}, expected {d}x{d}",
            model.p.nrows(),
            model.p.ncols()
        )));
    }
    let phi0 = gmp_batch(d, sets, cfg.gmp_mu)?;
    Ok(encode_phi0(model, &phi0))
}
