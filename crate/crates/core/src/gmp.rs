//! Aggregation by similarity equalization: the aggregate phi of a descriptor
//! set V solves min ||V^T phi - 1||^2 + mu ||phi||^2, so every descriptor's dot
//! product with phi is pushed toward the same value. The minimizer is the
//! ridge solution (V V^T + mu I)^-1 V 1.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{add_scaled_identity, solve_spd_vec};
use crate::types::{AggregatedVector, LocalFeatureSet};

/// (V V^T + mu I, V 1). Shared with the joint phi-steps so their collapse to
/// plain aggregation is bit-exact.
pub(crate) fn gmp_system(v: &LocalFeatureSet, mu: f64) -> (DMatrix<f64>, DVector<f64>) {
    let vd = v.data();
    let mut a = vd * vd.transpose();
    add_scaled_identity(&mut a, mu);
    (a, vd.column_sum())
}

pub fn gmp_aggregate(v: &LocalFeatureSet, mu: f64) -> Result<AggregatedVector> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "aggregation regularizer mu must be finite and nonnegative, got {mu}"
        )));
    }
    let (a, rhs) = gmp_system(v, mu);
    let phi = solve_spd_vec(&a, &rhs, "aggregation system").map_err(|_| {
        Error::SingularSystem(
            "aggregation Gram matrix is singular; mu = 0 requires full row rank".into(),
        )
    })?;
    AggregatedVector::new(phi)
}

/// Aggregates every set into the columns of a D x m matrix. `d` is passed
/// explicitly so an empty list still yields a D x 0 result.
pub fn gmp_batch(d: usize, sets: &[LocalFeatureSet], mu: f64) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(Error::InvalidInput("d must be at least 1".into()));
    }
    let results: Vec<Result<DVector<f64>>> = sets
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            if s.d() != d {
                return Err(Error::DimensionMismatch(format!(
                    "set {i}: expected {d} rows, got {}",
                    s.d()
                )));
            }
            gmp_aggregate(s, mu)
                .map(AggregatedVector::into_inner)
                .map_err(|e| e.prefixed(&format!("set {i}")))
        })
        .collect();
    let mut cols = Vec::with_capacity(results.len());
    for r in results {
        cols.push(r?);
    }
    if cols.is_empty() {
        Ok(DMatrix::zeros(d, 0))
    } else {
        Ok(DMatrix::from_columns(&cols))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: usize, cols: usize, vals: &[f64]) -> LocalFeatureSet {
        LocalFeatureSet::new(DMatrix::from_row_slice(rows, cols, vals)).unwrap()
    }

    #[test]
    fn identity_set_equalizes_exactly() {
        let v = set(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let phi = gmp_aggregate(&v, 0.0).unwrap();
        assert!((phi.data() - DVector::from_vec(vec![1.0, 1.0])).amax() < 1e-12);
    }

    #[test]
    fn single_unit_column_halves() {
        // (v v^T + I)^-1 v = v / (1 + ||v||^2) = v / 2 for a unit v
        let v = set(3, 1, &[0.6, 0.8, 0.0]);
        let phi = gmp_aggregate(&v, 1.0).unwrap();
        let expect = DVector::from_vec(vec![0.3, 0.4, 0.0]);
        assert!((phi.data() - expect).amax() < 1e-12);
    }

    #[test]
    fn normal_equations_hold() {
        let v = set(
            3,
            5,
            &[
                0.3, -1.2, 0.7, 0.1, 0.9, 1.1, 0.4, -0.5, 0.2, -0.8, -0.2, 0.6, 0.3, -1.0, 0.5,
            ],
        );
        for &mu in &[0.0, 0.1, 3.0] {
            let phi = gmp_aggregate(&v, mu).unwrap();
            let (a, rhs) = gmp_system(&v, mu);
            assert!((a * phi.data() - rhs).amax() < 1e-8);
        }
    }

    #[test]
    fn shrinkage_is_monotone_in_mu() {
        let v = set(2, 3, &[1.0, 0.2, -0.4, 0.5, -1.3, 0.8]);
        let mut prev = f64::INFINITY;
        for &mu in &[0.0, 0.5, 1.0, 5.0, 50.0] {
            let n = gmp_aggregate(&v, mu).unwrap().data().norm();
            assert!(n <= prev + 1e-12);
            prev = n;
        }
    }

    #[test]
    fn negative_mu_is_rejected() {
        let v = set(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            gmp_aggregate(&v, -1.0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn singular_gram_with_zero_mu_errors() {
        // rank-1 in 2-d: VV^T singular
        let v = set(2, 2, &[1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(
            gmp_aggregate(&v, 0.0),
            Err(Error::SingularSystem(_))
        ));
    }

    #[test]
    fn batch_matches_loop_bit_for_bit() {
        let sets = vec![
            set(2, 3, &[0.3, -0.1, 0.8, 1.0, 0.4, -0.6]),
            set(2, 1, &[0.9, -0.2]),
            set(2, 2, &[0.1, 0.2, 0.3, 0.4]),
        ];
        let batch = gmp_batch(2, &sets, 0.7).unwrap();
        for (i, s) in sets.iter().enumerate() {
            let one = gmp_aggregate(s, 0.7).unwrap();
            assert_eq!(batch.column(i), one.data().column(0));
        }
    }

    #[test]
    fn identical_sets_give_identical_columns() {
        let s = set(2, 2, &[0.4, -0.3, 0.7, 0.9]);
        let batch = gmp_batch(2, &[s.clone(), s.clone(), s], 0.5).unwrap();
        assert_eq!(batch.column(0), batch.column(1));
        assert_eq!(batch.column(0), batch.column(2));
    }

    #[test]
    fn empty_batch_keeps_row_count() {
        let out = gmp_batch(4, &[], 1.0).unwrap();
        assert_eq!((out.nrows(), out.ncols()), (4, 0));
    }

    #[test]
    fn batch_error_names_offending_set() {
        let sets = vec![set(2, 1, &[1.0, 0.0]), set(3, 1, &[1.0, 0.0, 0.0])];
        let err = gmp_batch(2, &sets, 1.0).unwrap_err();
        assert!(err.to_string().contains("set 1"));
    }
}
