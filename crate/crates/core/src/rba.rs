//! Autoencoder with a sign-matrix bottleneck, trained under a quadratic
//! relaxation of the binary constraint:
//!
//! J = 1/2 ||X - (W2 B + c2 1^T)||^2
//!   + lambda/2 ||B - (W1 X + c1 1^T)||^2
//!   + beta/2 (||W1||^2 + ||W2||^2),      B in {-1, +1}^(L x m).
//!
//! Each outer iteration solves (W, c) in closed form (W given the previous
//! biases, then the biases given the new W) and then descends B one row at a
//! time; every row update is the exact conditional argmin, so J never
//! increases. One full B sweep costs O(m L^2) after precomputing W2^T W2.

use nalgebra::{DMatrix, DVector};

use crate::binary::{sgn, SignMatrix};
use crate::error::{Error, Result};
use crate::itq::{itq_train, ItqConfig};
use crate::linalg::{
    add_scaled_identity, affine_map, cholesky, mean_cols, right_solve_spd, sub_col_broadcast,
};
use crate::types::FeatureMatrix;
use crate::DEFAULT_SEED;

/// Linear encoder (w1, c1) and decoder (w2, c2). The decoder target space may
/// differ from the encoder input space (label decoding reuses this type).
#[derive(Debug, Clone, PartialEq)]
pub struct HashModel {
    pub w1: DMatrix<f64>,
    pub c1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub c2: DVector<f64>,
}

impl HashModel {
    pub fn new(
        w1: DMatrix<f64>,
        c1: DVector<f64>,
        w2: DMatrix<f64>,
        c2: DVector<f64>,
    ) -> Result<Self> {
        let model = Self { w1, c1, w2, c2 };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w1.nrows() == 0 || self.w1.ncols() == 0 {
            return Err(Error::InvalidInput("encoder weight is empty".into()));
        }
        if self.w2.ncols() != self.l() || self.c1.len() != self.l() || self.c2.len() != self.d_out()
        {
            return Err(Error::DimensionMismatch(format!(
                "inconsistent model shapes: w1 {}x{}, c1 {}, w2 {}x{}, c2 {}",
                self.w1.nrows(),
                self.w1.ncols(),
                self.c1.len(),
                self.w2.nrows(),
                self.w2.ncols(),
                self.c2.len()
            )));
        }
        let finite = self.w1.iter().all(|v| v.is_finite())
            && self.w2.iter().all(|v| v.is_finite())
            && self.c1.iter().all(|v| v.is_finite())
            && self.c2.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput(
                "model contains a non-finite entry".into(),
            ));
        }
        Ok(())
    }

    /// Code length.
    pub fn l(&self) -> usize {
        self.w1.nrows()
    }

    /// Encoder input dimensionality.
    pub fn d_in(&self) -> usize {
        self.w1.ncols()
    }

    /// Decoder target dimensionality.
    pub fn d_out(&self) -> usize {
        self.w2.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbaConfig {
    pub l: usize,
    /// Outer iterations.
    pub t1: usize,
    /// Weight of the code-vs-encoder quadratic penalty.
    pub lambda: f64,
    /// Ridge weight on both linear maps.
    pub beta: f64,
    /// B-step coordinate sweeps per outer iteration.
    pub sweeps: usize,
    pub seed: u64,
}

impl RbaConfig {
    pub fn new(l: usize) -> Self {
        Self {
            l,
            t1: 10,
            lambda: 1e-2,
            beta: 1.0,
            sweeps: 1,
            seed: DEFAULT_SEED,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return Err(Error::InvalidConfig("l must be at least 1".into()));
        }
        if self.t1 == 0 || self.sweeps == 0 {
            return Err(Error::InvalidConfig(
                "t1 and sweeps must be at least 1".into(),
            ));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "beta must be nonnegative, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Shared solver parameters for the generalized (encoder input, decoder
/// target) problem; the supervised variant reuses everything below.
pub(crate) struct AeParams {
    pub l: usize,
    pub t1: usize,
    pub lambda: f64,
    pub beta: f64,
    pub sweeps: usize,
}

pub(crate) fn objective_general(
    enc: &DMatrix<f64>,
    dec: &DMatrix<f64>,
    bf: &DMatrix<f64>,
    model: &HashModel,
    lambda: f64,
    beta: f64,
) -> f64 {
    let recon = dec - affine_map(&model.w2, bf, &model.c2);
    let quant = bf - affine_map(&model.w1, enc, &model.c1);
    0.5 * recon.norm_squared()
        + 0.5 * lambda * quant.norm_squared()
        + 0.5 * beta * (model.w1.norm_squared() + model.w2.norm_squared())
}

/// enc^T (lambda enc enc^T + beta I)^-1, the constant factor of the encoder
/// update. Computed once per training run.
pub(crate) fn encoder_solve_factor(
    enc: &DMatrix<f64>,
    lambda: f64,
    beta: f64,
) -> Result<DMatrix<f64>> {
    let mut a = enc * enc.transpose() * lambda;
    add_scaled_identity(&mut a, beta);
    let chol = cholesky(&a, "encoder ridge system (beta = 0 needs full-rank input)")?;
    Ok(chol.solve(enc).transpose())
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn wc_update(
    enc: &DMatrix<f64>,
    dec: &DMatrix<f64>,
    bf: &DMatrix<f64>,
    c1_prev: &DVector<f64>,
    c2_prev: &DVector<f64>,
    enc_factor: &DMatrix<f64>,
    lambda: f64,
    beta: f64,
) -> Result<HashModel> {
    let w1 = (sub_col_broadcast(bf, c1_prev) * enc_factor) * lambda;
    let mut bb = bf * bf.transpose();
    add_scaled_identity(&mut bb, beta);
    let w2 = right_solve_spd(
        &(sub_col_broadcast(dec, c2_prev) * bf.transpose()),
        &bb,
        "decoder ridge system (beta = 0 needs full-rank codes)",
    )?;
    let c1 = mean_cols(&(bf - &w1 * enc));
    let c2 = mean_cols(&(dec - &w2 * bf));
    Ok(HashModel { w1, c1, w2, c2 })
}

pub(crate) fn b_step_inplace(
    enc: &DMatrix<f64>,
    dec: &DMatrix<f64>,
    bf: &mut DMatrix<f64>,
    model: &HashModel,
    lambda: f64,
    sweeps: usize,
) {
    let xt = sub_col_broadcast(dec, &model.c2);
    let h = affine_map(&model.w1, enc, &model.c1);
    let q = model.w2.transpose() * xt + h * lambda;
    let g = model.w2.transpose() * &model.w2;
    let (l, m) = (bf.nrows(), bf.ncols());
    for _ in 0..sweeps {
        for k in 0..l {
            // row k of W2^T W2 times B, with the diagonal term removed per
            // column, leaves exactly the cross terms of the other rows
            let t = g.row(k) * &*bf;
            let gkk = g[(k, k)];
            for j in 0..m {
                let v = q[(k, j)] - (t[j] - gkk * bf[(k, j)]);
                bf[(k, j)] = sgn(v);
            }
        }
    }
}

/// Value of the training objective at (X, B, model).
pub fn rba_objective(
    x: &FeatureMatrix,
    b: &SignMatrix,
    model: &HashModel,
    cfg: &RbaConfig,
) -> Result<f64> {
    cfg.validate()?;
    check_pair(x, b, model, x.d())?;
    Ok(objective_general(
        x.data(),
        x.data(),
        &b.to_real(),
        model,
        cfg.lambda,
        cfg.beta,
    ))
}

fn check_pair(x: &FeatureMatrix, b: &SignMatrix, model: &HashModel, d_out: usize) -> Result<()> {
    model.validate()?;
    if b.m() != x.m() {
        return Err(Error::DimensionMismatch(format!(
            "codes have {} columns, samples have {}",
            b.m(),
            x.m()
        )));
    }
    if b.l() != model.l() || model.d_in() != x.d() || model.d_out() != d_out {
        return Err(Error::DimensionMismatch(format!(
            "model ({} bits, {} -> {}) does not match codes ({} bits) and samples ({} rows)",
            model.l(),
            model.d_in(),
            model.d_out(),
            b.l(),
            x.d()
        )));
    }
    Ok(())
}

/// Closed-form (W, c) update: each W uses the previous bias, each bias the new
/// W. Returns the refreshed model.
pub fn wc_step(
    x: &FeatureMatrix,
    b: &SignMatrix,
    c1_prev: &DVector<f64>,
    c2_prev: &DVector<f64>,
    cfg: &RbaConfig,
) -> Result<HashModel> {
    cfg.validate()?;
    if b.l() != cfg.l || b.m() != x.m() {
        return Err(Error::DimensionMismatch(format!(
            "codes are {}x{}, expected {}x{}",
            b.l(),
            b.m(),
            cfg.l,
            x.m()
        )));
    }
    if c1_prev.len() != cfg.l || c2_prev.len() != x.d() {
        return Err(Error::DimensionMismatch(format!(
            "bias lengths {} / {} do not match L = {} / D = {}",
            c1_prev.len(),
            c2_prev.len(),
            cfg.l,
            x.d()
        )));
    }
    let factor = encoder_solve_factor(x.data(), cfg.lambda, cfg.beta)?;
    wc_update(
        x.data(),
        x.data(),
        &b.to_real(),
        c1_prev,
        c2_prev,
        &factor,
        cfg.lambda,
        cfg.beta,
    )
}

/// One or more exact coordinate sweeps over the rows of B; the objective never
/// increases across any row update.
pub fn b_step(
    x: &FeatureMatrix,
    b: &SignMatrix,
    model: &HashModel,
    cfg: &RbaConfig,
) -> Result<SignMatrix> {
    cfg.validate()?;
    check_pair(x, b, model, x.d())?;
    let mut bf = b.to_real();
    b_step_inplace(x.data(), x.data(), &mut bf, model, cfg.lambda, cfg.sweeps);
    Ok(SignMatrix::from_real_unchecked(&bf))
}

#[derive(Debug, Clone)]
pub struct RbaOutcome {
    pub model: HashModel,
    /// Final training codes.
    pub codes: SignMatrix,
    /// Objective value after each outer iteration; non-increasing.
    pub objective_log: Vec<f64>,
}

pub(crate) fn fit_affine_autoencoder(
    enc: &DMatrix<f64>,
    dec: &DMatrix<f64>,
    p: &AeParams,
    b0: SignMatrix,
) -> Result<RbaOutcome> {
    let mut bf = b0.to_real();
    let mut c1 = DVector::zeros(p.l);
    let mut c2 = DVector::zeros(dec.nrows());
    let enc_factor = encoder_solve_factor(enc, p.lambda, p.beta)?;
    let mut log = Vec::with_capacity(p.t1);
    let mut model = None;
    for _ in 0..p.t1 {
        let next = wc_update(enc, dec, &bf, &c1, &c2, &enc_factor, p.lambda, p.beta)?;
        b_step_inplace(enc, dec, &mut bf, &next, p.lambda, p.sweeps);
        log.push(objective_general(enc, dec, &bf, &next, p.lambda, p.beta));
        c1 = next.c1.clone();
        c2 = next.c2.clone();
        model = Some(next);
    }
    Ok(RbaOutcome {
        model: model.expect("t1 >= 1"),
        codes: SignMatrix::from_real_unchecked(&bf),
        objective_log: log,
    })
}

/// Alternating training. Codes start from `b_init` when given, otherwise from
/// an ITQ run seeded by `cfg.seed`; both biases start at zero.
pub fn rba_train(
    x: &FeatureMatrix,
    cfg: &RbaConfig,
    b_init: Option<&SignMatrix>,
) -> Result<RbaOutcome> {
    cfg.validate()?;
    let b0 = match b_init {
        Some(b) => {
            if b.l() != cfg.l || b.m() != x.m() {
                return Err(Error::DimensionMismatch(format!(
                    "initial codes are {}x{}, expected {}x{}",
                    b.l(),
                    b.m(),
                    cfg.l,
                    x.m()
                )));
            }
            b.clone()
        }
        None => {
            itq_train(
                x,
                &ItqConfig {
                    l: cfg.l,
                    iters: 50,
                    seed: cfg.seed,
                },
            )?
            .1
        }
    };
    fit_affine_autoencoder(
        x.data(),
        x.data(),
        &AeParams {
            l: cfg.l,
            t1: cfg.t1,
            lambda: cfg.lambda,
            beta: cfg.beta,
            sweeps: cfg.sweeps,
        },
        b0,
    )
}

/// sign(W1 X + c1 1^T).
pub fn rba_encode(model: &HashModel, x: &FeatureMatrix) -> Result<SignMatrix> {
    model.validate()?;
    if x.d() != model.d_in() {
        return Err(Error::DimensionMismatch(format!(
            "encode expects {} rows, got {}",
            model.d_in(),
            x.d()
        )));
    }
    Ok(SignMatrix::from_real_unchecked(
        &affine_map(&model.w1, x.data(), &model.c1).map(sgn),
    ))
}

/// W2 B + c2 1^T.
pub fn rba_reconstruct(model: &HashModel, b: &SignMatrix) -> Result<FeatureMatrix> {
    model.validate()?;
    if b.l() != model.l() {
        return Err(Error::DimensionMismatch(format!(
            "reconstruct expects {} code bits, got {}",
            model.l(),
            b.l()
        )));
    }
    FeatureMatrix::new(affine_map(&model.w2, &b.to_real(), &model.c2))
}
