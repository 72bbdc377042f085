//! Joint aggregation and hashing. The per-image aggregates Phi become free
//! variables: each outer iteration refits the autoencoder on the current Phi,
//! then re-solves every phi_i in closed form so that it is simultaneously easy
//! to autoencode through the binary bottleneck and still equalizes its
//! descriptor similarities.
//!
//! Per-image phi system (written here scaled by 1/gamma):
//!   (M^T M / gamma + V V^T + mu I) phi = V 1 + M^T (W2 c1 + c2) / gamma,
//! with M = I - W2 W1. The base (V V^T + mu I, V 1) is assembled by the same
//! code as plain aggregation, so when M = 0 the two paths agree bit for bit.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::binary::{sgn, SignMatrix};
use crate::error::{Error, Result};
use crate::gmp::{gmp_batch, gmp_system};
use crate::itq::{itq_train, ItqConfig};
use crate::linalg::{affine_map, solve_spd_vec};
use crate::rba::{fit_affine_autoencoder, AeParams, HashModel};
use crate::types::{AggregatedVector, FeatureMatrix, LocalFeatureSet};
use crate::DEFAULT_SEED;

#[derive(Debug, Clone, PartialEq)]
pub struct SahConfig {
    pub l: usize,
    /// Outer alternations between the hash fit and the phi updates.
    pub t: usize,
    /// Inner autoencoder iterations per outer alternation.
    pub t1: usize,
    pub lambda: f64,
    pub beta: f64,
    /// Weight of the aggregation terms against the autoencoder terms.
    pub gamma: f64,
    /// Ridge inside the aggregation terms.
    pub mu: f64,
    /// Regularizer for the initial plain aggregation.
    pub gmp_mu: f64,
    pub sweeps: usize,
    pub seed: u64,
}

impl SahConfig {
    pub fn new(l: usize) -> Self {
        Self {
            l,
            t: 5,
            t1: 10,
            lambda: 1e-2,
            beta: 1e-1,
            gamma: 10.0,
            mu: 1e2,
            gmp_mu: 1e2,
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
        if !(self.gmp_mu >= 0.0 && self.gmp_mu.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "gmp_mu must be nonnegative, got {}",
                self.gmp_mu
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SahModel {
    pub hash: HashModel,
    pub config: SahConfig,
}

#[derive(Debug, Clone)]
pub struct SahOutcome {
    pub model: SahModel,
    /// Final aggregated training vectors, one column per image.
    pub phi: DMatrix<f64>,
    /// Objective value after each outer alternation.
    pub objective_log: Vec<f64>,
}

/// Model-dependent, set-independent pieces of the phi system.
pub(crate) struct PhiCache {
    /// M^T M / gamma.
    mtm: DMatrix<f64>,
    /// M^T (W2 c1 + c2) / gamma.
    shift: DVector<f64>,
}

fn phi_cache(model: &HashModel, gamma: f64) -> PhiCache {
    let d = model.d_in();
    let m = DMatrix::identity(d, d) - &model.w2 * &model.w1;
    let u = &model.w2 * &model.c1 + &model.c2;
    PhiCache {
        mtm: m.transpose() * &m / gamma,
        shift: m.transpose() * u / gamma,
    }
}

pub(crate) fn phi_step_cached(
    v: &LocalFeatureSet,
    cache: &PhiCache,
    mu: f64,
) -> Result<AggregatedVector> {
    let (mut a, mut rhs) = gmp_system(v, mu);
    a += &cache.mtm;
    rhs += &cache.shift;
    AggregatedVector::new(solve_spd_vec(&a, &rhs, "phi system")?)
}

fn check_model_square(model: &HashModel, d: usize) -> Result<()> {
    model.validate()?;
    if model.d_in() != d || model.d_out() != d {
        return Err(Error::DimensionMismatch(format!(
            "model maps {} -> {}, expected {d} -> {d}",
            model.d_in(),
            model.d_out()
        )));
    }
    Ok(())
}

/// Closed-form minimizer of the per-image relaxed problem
/// 1/2 ||phi - (W2 (W1 phi + c1) + c2)||^2 + gamma/2 (||V^T phi - 1||^2 + mu ||phi||^2).
pub fn sah_phi_step(
    v: &LocalFeatureSet,
    model: &HashModel,
    cfg: &SahConfig,
) -> Result<AggregatedVector> {
    cfg.validate()?;
    check_model_square(model, v.d())?;
    phi_step_cached(v, &phi_cache(model, cfg.gamma), cfg.mu)
}

/// Reported joint objective: autoencoder reconstruction of Phi through the
/// hard-assigned codes sign(W1 Phi + c1 1^T), the ridge on the maps, and the
/// aggregation terms.
pub fn sah_objective(
    sets: &[LocalFeatureSet],
    phi: &DMatrix<f64>,
    model: &HashModel,
    cfg: &SahConfig,
) -> Result<f64> {
    cfg.validate()?;
    if phi.ncols() != sets.len() {
        return Err(Error::DimensionMismatch(format!(
            "phi has {} columns for {} sets",
            phi.ncols(),
            sets.len()
        )));
    }
    check_model_square(model, phi.nrows())?;
    let bf = affine_map(&model.w1, phi, &model.c1).map(sgn);
    let recon = phi - affine_map(&model.w2, &bf, &model.c2);
    let reg = 0.5 * cfg.beta * (model.w1.norm_squared() + model.w2.norm_squared());
    let mut agg = 0.0;
    for (i, v) in sets.iter().enumerate() {
        if v.d() != phi.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "set {i} has {} rows, phi has {}",
                v.d(),
                phi.nrows()
            )));
        }
        let p = phi.column(i);
        let r = v.data().transpose() * p - DVector::repeat(v.n(), 1.0);
        agg += r.norm_squared() + cfg.mu * p.norm_squared();
    }
    Ok(0.5 * recon.norm_squared() + reg + 0.5 * cfg.gamma * agg)
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

fn phi_step_all(sets: &[LocalFeatureSet], cache: &PhiCache, mu: f64) -> Result<DMatrix<f64>> {
    let results: Vec<Result<DVector<f64>>> = sets
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            phi_step_cached(v, cache, mu)
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

/// Alternating training: Phi starts from plain aggregation, each outer round
/// refits the autoencoder on the current Phi (codes warm-started from the
/// previous round) and then re-solves every phi.
pub fn sah_train(sets: &[LocalFeatureSet], cfg: &SahConfig) -> Result<SahOutcome> {
    cfg.validate()?;
    let d = common_d(sets)?;
    let mut phi = gmp_batch(d, sets, cfg.gmp_mu)?;
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
        let fit = fit_affine_autoencoder(&phi, &phi, &params, b0)?;
        warm = Some(fit.codes);
        phi = phi_step_all(sets, &phi_cache(&fit.model, cfg.gamma), cfg.mu)?;
        log.push(sah_objective(sets, &phi, &fit.model, cfg)?);
        model = Some(fit.model);
    }
    Ok(SahOutcome {
        model: SahModel {
            hash: model.expect("t >= 1"),
            config: cfg.clone(),
        },
        phi,
        objective_log: log,
    })
}

/// Encode one image: solve its phi against the trained maps, then sign the
/// encoder output. Returns an L x 1 sign matrix.
pub fn sah_encode(model: &SahModel, v: &LocalFeatureSet, cfg: &SahConfig) -> Result<SignMatrix> {
    let phi = sah_phi_step(v, &model.hash, cfg)?;
    let z = &model.hash.w1 * phi.data() + &model.hash.c1;
    Ok(SignMatrix::from_real_unchecked(
        &DMatrix::from_column_slice(z.len(), 1, z.map(sgn).as_slice()),
    ))
}

/// Batch encode; column i is `sah_encode` of set i.
pub fn sah_encode_batch(
    model: &SahModel,
    sets: &[LocalFeatureSet],
    cfg: &SahConfig,
) -> Result<SignMatrix> {
    cfg.validate()?;
    let d = common_d(sets)?;
    check_model_square(&model.hash, d)?;
    let phi = phi_step_all(sets, &phi_cache(&model.hash, cfg.gamma), cfg.mu)?;
    Ok(SignMatrix::from_real_unchecked(
        &affine_map(&model.hash.w1, &phi, &model.hash.c1).map(sgn),
    ))
}
