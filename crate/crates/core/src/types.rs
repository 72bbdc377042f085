use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) fn ensure_finite_mat(data: &DMatrix<f64>, what: &str) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{what} contains a non-finite entry"
        )))
    }
}

/// Dense sample matrix: one column per sample, D rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidInput(
                "feature matrix needs at least one row and one column".into(),
            ));
        }
        ensure_finite_mat(&data, "feature matrix")?;
        Ok(Self { data })
    }

    pub fn d(&self) -> usize {
        self.data.nrows()
    }

    pub fn m(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }
}

/// The local descriptors of a single image: D rows, one column per descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFeatureSet {
    data: DMatrix<f64>,
}

impl LocalFeatureSet {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::InvalidInput(
                "local feature set needs at least one row".into(),
            ));
        }
        if data.ncols() == 0 {
            return Err(Error::InvalidInput(
                "local feature set needs at least one descriptor".into(),
            ));
        }
        ensure_finite_mat(&data, "local feature set")?;
        Ok(Self { data })
    }

    pub fn d(&self) -> usize {
        self.data.nrows()
    }

    /// Number of local descriptors.
    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }
}

/// One image's aggregated representation.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedVector {
    data: DVector<f64>,
}

impl AggregatedVector {
    pub fn new(data: DVector<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidInput("aggregated vector is empty".into()));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(
                "aggregated vector contains a non-finite entry".into(),
            ));
        }
        Ok(Self { data })
    }

    pub fn d(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.data
    }
}
