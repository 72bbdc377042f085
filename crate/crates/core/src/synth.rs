//! Deterministic synthetic data: Gaussian class clusters, either as plain
//! feature columns or as bags of local descriptors around a per-image center.
//! Used by the test suites and the command line demo pipeline.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::types::{FeatureMatrix, LocalFeatureSet};

fn check_counts(d: usize, m: usize, classes: usize, noise: f64) -> Result<()> {
    if d == 0 || m == 0 || classes == 0 {
        return Err(Error::InvalidInput(
            "d, m and classes must all be at least 1".into(),
        ));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "noise must be nonnegative, got {noise}"
        )));
    }
    Ok(())
}

fn gaussian_vec(d: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(d, |_, _| StandardNormal.sample(rng))
}

/// Columns clustered around `classes` standard normal centers; sample i
/// belongs to class i % classes and sits at its center plus `noise` times a
/// standard normal draw. Returns the matrix and the class of each column.
pub fn clustered_matrix(
    d: usize,
    m: usize,
    classes: usize,
    noise: f64,
    seed: u64,
) -> Result<(FeatureMatrix, Vec<usize>)> {
    check_counts(d, m, classes, noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<DVector<f64>> = (0..classes).map(|_| gaussian_vec(d, &mut rng)).collect();
    let mut x = DMatrix::zeros(d, m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let k = i % classes;
        labels.push(k);
        x.set_column(i, &(&centers[k] + gaussian_vec(d, &mut rng) * noise));
    }
    Ok((FeatureMatrix::new(x)?, labels))
}

/// Bags of local descriptors with the same class layout: image i gets a
/// center near its class center (half the noise), and each of its `set_size`
/// descriptors scatters around that image center with the full noise.
pub fn clustered_sets(
    d: usize,
    m: usize,
    classes: usize,
    set_size: usize,
    noise: f64,
    seed: u64,
) -> Result<(Vec<LocalFeatureSet>, Vec<usize>)> {
    check_counts(d, m, classes, noise)?;
    if set_size == 0 {
        return Err(Error::InvalidInput("set_size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<DVector<f64>> = (0..classes).map(|_| gaussian_vec(d, &mut rng)).collect();
    let mut sets = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let k = i % classes;
        labels.push(k);
        let image_center = &centers[k] + gaussian_vec(d, &mut rng) * (0.5 * noise);
        let mut v = DMatrix::zeros(d, set_size);
        for j in 0..set_size {
            v.set_column(j, &(&image_center + gaussian_vec(d, &mut rng) * noise));
        }
        sets.push(LocalFeatureSet::new(v)?);
    }
    Ok((sets, labels))
}
