//! Iterative quantization: project centered data onto the top-L principal
//! directions, then alternate code assignment with an orthogonal rotation
//! solved as a Procrustes problem. Used both as a code initializer for the
//! autoencoder and as a retrieval baseline.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::binary::{sgn, SignMatrix};
use crate::error::{Error, Result};
use crate::linalg::{mean_cols, sub_col_broadcast};
use crate::types::FeatureMatrix;
use crate::DEFAULT_SEED;

#[derive(Debug, Clone, PartialEq)]
pub struct ItqConfig {
    pub l: usize,
    pub iters: usize,
    pub seed: u64,
}

impl ItqConfig {
    pub fn new(l: usize) -> Self {
        Self {
            l,
            iters: 50,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItqModel {
    /// L x D, rows are orthonormal principal directions (descending variance).
    pub pca: DMatrix<f64>,
    /// L x L orthogonal rotation.
    pub rotation: DMatrix<f64>,
    /// Training mean, subtracted before projection.
    pub mean: DVector<f64>,
}

/// Orthogonal matrix from the QR of a seeded Gaussian draw. The Q columns are
/// sign-fixed against the R diagonal so the draw is canonical.
fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Top-L principal directions of the column samples, as rows. Eigenvectors are
/// sorted by descending eigenvalue and sign-fixed on their largest component.
fn pca_rows(xc: &DMatrix<f64>, l: usize, m: usize) -> DMatrix<f64> {
    let cov = xc * xc.transpose() / m as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let d = xc.nrows();
    let mut pca = DMatrix::zeros(l, d);
    for (row, &idx) in order.iter().take(l).enumerate() {
        let v = eig.eigenvectors.column(idx);
        let mut lead = 0;
        for i in 0..d {
            if v[i].abs() > v[lead].abs() {
                lead = i;
            }
        }
        let flip = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            pca[(row, i)] = flip * v[i];
        }
    }
    pca
}

pub fn itq_train(x: &FeatureMatrix, cfg: &ItqConfig) -> Result<(ItqModel, SignMatrix)> {
    let (model, codes, _) = itq_train_logged(x, cfg)?;
    Ok((model, codes))
}

/// Same as [`itq_train`] but also returns the quantization loss
/// ||B - R P||^2 recorded at each iteration (non-increasing).
pub fn itq_train_logged(
    x: &FeatureMatrix,
    cfg: &ItqConfig,
) -> Result<(ItqModel, SignMatrix, Vec<f64>)> {
    if cfg.l == 0 || cfg.iters == 0 {
        return Err(Error::InvalidConfig(
            "itq needs l >= 1 and iters >= 1".into(),
        ));
    }
    if cfg.l > x.d().min(x.m()) {
        return Err(Error::InvalidConfig(format!(
            "code length {} exceeds min(D, m) = {}",
            cfg.l,
            x.d().min(x.m())
        )));
    }
    let mean = mean_cols(x.data());
    let xc = sub_col_broadcast(x.data(), &mean);
    let pca = pca_rows(&xc, cfg.l, x.m());
    let p = &pca * &xc;
    let mut rotation = random_orthogonal(cfg.l, cfg.seed);
    let mut log = Vec::with_capacity(cfg.iters);
    for _ in 0..cfg.iters {
        let rp = &rotation * &p;
        let b = rp.map(sgn);
        log.push((&b - &rp).norm_squared());
        let svd = SVD::new(&b * p.transpose(), true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        rotation = u * v_t;
    }
    // Re-assign after the last rotation update so the returned codes equal
    // what encode() produces on the training data.
    let codes = SignMatrix::from_real_unchecked(&(&rotation * &p).map(sgn));
    Ok((
        ItqModel {
            pca,
            rotation,
            mean,
        },
        codes,
        log,
    ))
}

pub fn itq_encode(model: &ItqModel, x: &FeatureMatrix) -> Result<SignMatrix> {
    if x.d() != model.pca.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "encode expects {} rows, got {}",
            model.pca.ncols(),
            x.d()
        )));
    }
    let xc = sub_col_broadcast(x.data(), &model.mean);
    let p = &model.pca * &xc;
    Ok(SignMatrix::from_real_unchecked(
        &(&model.rotation * &p).map(sgn),
    ))
}
