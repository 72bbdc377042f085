//! Python bindings. Matrices cross the boundary as 2D float64 numpy arrays
//! with one column per sample (the library's layout); binary codes are int8
//! arrays of +1/-1. All entry points release no state between calls and are
//! deterministic for a fixed seed.

use agghash::io::{load_model, save_model, ModelFile};
use agghash::{
    euclidean_knn, gmp_batch, hamming_rank, itq_encode, itq_train_logged, label_ground_truth,
    mean_average_precision, rba_encode, rba_train, sah_encode_batch, sah_train, sash_encode_batch,
    sash_train, Error, FeatureMatrix, GroundTruth, ItqConfig, LabelMatrix, LocalFeatureSet,
    PackedCodes, Ranking, RbaConfig, SahConfig, SashConfig, SignMatrix, DEFAULT_SEED,
};
use nalgebra::DMatrix;
use numpy::ndarray::Array2;
use numpy::{IntoPyArray, PyArray2, PyReadonlyArray2};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_dmatrix(a: &PyReadonlyArray2<'_, f64>) -> DMatrix<f64> {
    let v = a.as_array();
    DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)])
}

fn features(a: &PyReadonlyArray2<'_, f64>) -> PyResult<FeatureMatrix> {
    FeatureMatrix::new(to_dmatrix(a)).map_err(py_err)
}

fn labels(a: &PyReadonlyArray2<'_, f64>) -> PyResult<LabelMatrix> {
    LabelMatrix::new(to_dmatrix(a)).map_err(py_err)
}

fn sets(arrays: &[PyReadonlyArray2<'_, f64>]) -> PyResult<Vec<LocalFeatureSet>> {
    arrays
        .iter()
        .map(|a| LocalFeatureSet::new(to_dmatrix(a)).map_err(py_err))
        .collect()
}

fn common_d(sets: &[LocalFeatureSet]) -> PyResult<usize> {
    sets.first()
        .map(|s| s.d())
        .ok_or_else(|| PyValueError::new_err("need at least one descriptor set"))
}

fn mat_to_py<'py>(py: Python<'py>, m: &DMatrix<f64>) -> Bound<'py, PyArray2<f64>> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)]).into_pyarray(py)
}

fn signs_to_py<'py>(py: Python<'py>, s: &SignMatrix) -> Bound<'py, PyArray2<i8>> {
    let d = s.data();
    Array2::from_shape_fn((d.nrows(), d.ncols()), |(i, j)| d[(i, j)]).into_pyarray(py)
}

fn signs_from_py(a: &PyReadonlyArray2<'_, i8>) -> PyResult<SignMatrix> {
    let v = a.as_array();
    SignMatrix::new(DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)])).map_err(py_err)
}

fn load_kind(path: &str, want: &'static str) -> PyResult<ModelFile> {
    let model = load_model(path).map_err(py_err)?;
    if model.kind() != want {
        return Err(PyValueError::new_err(format!(
            "{path}: holds a {} model, expected {want}",
            model.kind()
        )));
    }
    Ok(model)
}

/// Rotation-based quantizer: PCA projection plus a learned orthogonal
/// rotation, encoding by sign.
#[pyclass(frozen)]
struct ItqModel {
    inner: agghash::ItqModel,
}

#[pymethods]
impl ItqModel {
    /// Encode a feature matrix (D x m) into +1/-1 codes (bits x m).
    fn encode<'py>(
        &self,
        py: Python<'py>,
        x: PyReadonlyArray2<'py, f64>,
    ) -> PyResult<Bound<'py, PyArray2<i8>>> {
        let codes = itq_encode(&self.inner, &features(&x)?).map_err(py_err)?;
        Ok(signs_to_py(py, &codes))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_model(path, &ModelFile::Itq(self.inner.clone())).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        match load_kind(path, "itq")? {
            ModelFile::Itq(inner) => Ok(Self { inner }),
            _ => unreachable!(),
        }
    }

    #[getter]
    fn bits(&self) -> usize {
        self.inner.pca.nrows()
    }
}

/// Linear encoder/decoder pair around a sign bottleneck.
#[pyclass(frozen)]
struct RbaModel {
    inner: agghash::HashModel,
}

#[pymethods]
impl RbaModel {
    /// Encode a feature matrix (D x m) into +1/-1 codes (bits x m).
    fn encode<'py>(
        &self,
        py: Python<'py>,
        x: PyReadonlyArray2<'py, f64>,
    ) -> PyResult<Bound<'py, PyArray2<i8>>> {
        let codes = rba_encode(&self.inner, &features(&x)?).map_err(py_err)?;
        Ok(signs_to_py(py, &codes))
    }

    /// Decode +1/-1 codes back into feature space.
    fn reconstruct<'py>(
        &self,
        py: Python<'py>,
        codes: PyReadonlyArray2<'py, i8>,
    ) -> PyResult<Bound<'py, PyArray2<f64>>> {
        let b = signs_from_py(&codes)?;
        let x = agghash::rba_reconstruct(&self.inner, &b).map_err(py_err)?;
        Ok(mat_to_py(py, x.data()))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_model(path, &ModelFile::Rba(self.inner.clone())).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        match load_kind(path, "rba")? {
            ModelFile::Rba(inner) => Ok(Self { inner }),
            _ => unreachable!(),
        }
    }

    #[getter]
    fn bits(&self) -> usize {
        self.inner.l()
    }
}

/// Joint aggregation + hashing model for sets of local descriptors.
#[pyclass(frozen)]
struct SahModel {
    inner: agghash::SahModel,
}

#[pymethods]
impl SahModel {
    /// Encode descriptor sets (list of D x n_i arrays) into codes (bits x m).
    fn encode<'py>(
        &self,
        py: Python<'py>,
        descriptor_sets: Vec<PyReadonlyArray2<'py, f64>>,
    ) -> PyResult<Bound<'py, PyArray2<i8>>> {
        let s = sets(&descriptor_sets)?;
        let codes = sah_encode_batch(&self.inner, &s, &self.inner.config).map_err(py_err)?;
        Ok(signs_to_py(py, &codes))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_model(path, &ModelFile::Sah(self.inner.clone())).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        match load_kind(path, "sah")? {
            ModelFile::Sah(inner) => Ok(Self { inner }),
            _ => unreachable!(),
        }
    }

    #[getter]
    fn bits(&self) -> usize {
        self.inner.hash.l()
    }
}

/// Label-supervised aggregation + hashing model; unseen sets are encoded
/// through the learned plain-to-supervised aggregation mapping.
#[pyclass(frozen)]
struct SashModel {
    inner: agghash::SashModel,
}

#[pymethods]
impl SashModel {
    /// Encode descriptor sets (list of D x n_i arrays) into codes (bits x m).
    fn encode<'py>(
        &self,
        py: Python<'py>,
        descriptor_sets: Vec<PyReadonlyArray2<'py, f64>>,
    ) -> PyResult<Bound<'py, PyArray2<i8>>> {
        let s = sets(&descriptor_sets)?;
        let codes = sash_encode_batch(&self.inner, &s, &self.inner.config).map_err(py_err)?;
        Ok(signs_to_py(py, &codes))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_model(path, &ModelFile::Sash(self.inner.clone())).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        match load_kind(path, "sash")? {
            ModelFile::Sash(inner) => Ok(Self { inner }),
            _ => unreachable!(),
        }
    }

    #[getter]
    fn bits(&self) -> usize {
        self.inner.hash.l()
    }
}

/// Aggregate each descriptor set (D x n_i) into one column of a D x m matrix
/// by ridge-regularized dot-product equalization.
#[pyfunction]
#[pyo3(signature = (descriptor_sets, mu=None))]
fn aggregate<'py>(
    py: Python<'py>,
    descriptor_sets: Vec<PyReadonlyArray2<'py, f64>>,
    mu: Option<f64>,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let s = sets(&descriptor_sets)?;
    let d = common_d(&s)?;
    let mu = mu.unwrap_or_else(|| SahConfig::new(1).gmp_mu);
    let phi = gmp_batch(d, &s, mu).map_err(py_err)?;
    Ok(mat_to_py(py, &phi))
}

/// Train the rotation quantizer. Returns (model, training codes, loss log).
#[pyfunction]
#[pyo3(signature = (x, bits, iters=None, seed=None))]
fn train_itq<'py>(
    py: Python<'py>,
    x: PyReadonlyArray2<'py, f64>,
    bits: usize,
    iters: Option<usize>,
    seed: Option<u64>,
) -> PyResult<(ItqModel, Bound<'py, PyArray2<i8>>, Vec<f64>)> {
    let d = ItqConfig::new(bits);
    let cfg = ItqConfig {
        l: bits,
        iters: iters.unwrap_or(d.iters),
        seed: seed.unwrap_or(DEFAULT_SEED),
    };
    let (model, codes, log) = itq_train_logged(&features(&x)?, &cfg).map_err(py_err)?;
    Ok((ItqModel { inner: model }, signs_to_py(py, &codes), log))
}

/// Train the binary autoencoder. Returns (model, training codes, objective log).
#[pyfunction]
#[pyo3(signature = (x, bits, iters=None, lambda_=None, beta=None, sweeps=None, seed=None))]
#[allow(clippy::too_many_arguments)]
fn train_rba<'py>(
    py: Python<'py>,
    x: PyReadonlyArray2<'py, f64>,
    bits: usize,
    iters: Option<usize>,
    lambda_: Option<f64>,
    beta: Option<f64>,
    sweeps: Option<usize>,
    seed: Option<u64>,
) -> PyResult<(RbaModel, Bound<'py, PyArray2<i8>>, Vec<f64>)> {
    let d = RbaConfig::new(bits);
    let cfg = RbaConfig {
        l: bits,
        t1: iters.unwrap_or(d.t1),
        lambda: lambda_.unwrap_or(d.lambda),
        beta: beta.unwrap_or(d.beta),
        sweeps: sweeps.unwrap_or(d.sweeps),
        seed: seed.unwrap_or(d.seed),
    };
    let out = rba_train(&features(&x)?, &cfg, None).map_err(py_err)?;
    Ok((
        RbaModel { inner: out.model },
        signs_to_py(py, &out.codes),
        out.objective_log,
    ))
}

/// Jointly train aggregation and the binary autoencoder on descriptor sets.
/// Returns (model, final aggregated vectors, objective log).
#[pyfunction]
#[pyo3(signature = (
    descriptor_sets, bits, rounds=None, iters=None, lambda_=None, beta=None, gamma=None,
    mu=None, gmp_mu=None, sweeps=None, seed=None
))]
#[allow(clippy::too_many_arguments)]
fn train_sah<'py>(
    py: Python<'py>,
    descriptor_sets: Vec<PyReadonlyArray2<'py, f64>>,
    bits: usize,
    rounds: Option<usize>,
    iters: Option<usize>,
    lambda_: Option<f64>,
    beta: Option<f64>,
    gamma: Option<f64>,
    mu: Option<f64>,
    gmp_mu: Option<f64>,
    sweeps: Option<usize>,
    seed: Option<u64>,
) -> PyResult<(SahModel, Bound<'py, PyArray2<f64>>, Vec<f64>)> {
    let s = sets(&descriptor_sets)?;
    let d = SahConfig::new(bits);
    let cfg = SahConfig {
        l: bits,
        t: rounds.unwrap_or(d.t),
        t1: iters.unwrap_or(d.t1),
        lambda: lambda_.unwrap_or(d.lambda),
        beta: beta.unwrap_or(d.beta),
        gamma: gamma.unwrap_or(d.gamma),
        mu: mu.unwrap_or(d.mu),
        gmp_mu: gmp_mu.unwrap_or(d.gmp_mu),
        sweeps: sweeps.unwrap_or(d.sweeps),
        seed: seed.unwrap_or(d.seed),
    };
    let out = sah_train(&s, &cfg).map_err(py_err)?;
    Ok((
        SahModel { inner: out.model },
        mat_to_py(py, &out.phi),
        out.objective_log,
    ))
}

/// Jointly train aggregation and a label-supervised encoder. Labels are a
/// classes x m one-hot or multi-hot matrix. Returns (model, objective log).
#[pyfunction]
#[pyo3(signature = (
    descriptor_sets, labels, bits, rounds=None, iters=None, lambda_=None, beta=None,
    gamma=None, mu=None, gmp_mu=None, alpha=None, sweeps=None, seed=None
))]
#[allow(clippy::too_many_arguments)]
fn train_sash<'py>(
    descriptor_sets: Vec<PyReadonlyArray2<'py, f64>>,
    labels: PyReadonlyArray2<'py, f64>,
    bits: usize,
    rounds: Option<usize>,
    iters: Option<usize>,
    lambda_: Option<f64>,
    beta: Option<f64>,
    gamma: Option<f64>,
    mu: Option<f64>,
    gmp_mu: Option<f64>,
    alpha: Option<f64>,
    sweeps: Option<usize>,
    seed: Option<u64>,
) -> PyResult<(SashModel, Vec<f64>)> {
    let s = sets(&descriptor_sets)?;
    let y = self::labels(&labels)?;
    let d = SashConfig::new(bits);
    let cfg = SashConfig {
        l: bits,
        t: rounds.unwrap_or(d.t),
        t1: iters.unwrap_or(d.t1),
        lambda: lambda_.unwrap_or(d.lambda),
        beta: beta.unwrap_or(d.beta),
        gamma: gamma.unwrap_or(d.gamma),
        mu: mu.unwrap_or(d.mu),
        gmp_mu: gmp_mu.unwrap_or(d.gmp_mu),
        alpha: alpha.unwrap_or(d.alpha),
        sweeps: sweeps.unwrap_or(d.sweeps),
        seed: seed.unwrap_or(d.seed),
    };
    let out = sash_train(&s, &y, &cfg).map_err(py_err)?;
    Ok((SashModel { inner: out.model }, out.objective_log))
}

type SearchResult<'py> = (Bound<'py, PyArray2<i64>>, Bound<'py, PyArray2<u32>>);

/// Rank database codes for each query by packed Hamming distance. Codes are
/// +1/-1 int8 arrays (bits x m). Returns (indices, distances), each
/// queries x database, ordered best first.
#[pyfunction]
fn search<'py>(
    py: Python<'py>,
    queries: PyReadonlyArray2<'py, i8>,
    database: PyReadonlyArray2<'py, i8>,
) -> PyResult<SearchResult<'py>> {
    let q = PackedCodes::pack(&signs_from_py(&queries)?);
    let db = PackedCodes::pack(&signs_from_py(&database)?);
    let ranking = hamming_rank(&q, &db).map_err(py_err)?;
    let (nq, nd) = (ranking.len(), ranking.db_size());
    let mut idx = Array2::<i64>::zeros((nq, nd));
    let mut dist = Array2::<u32>::zeros((nq, nd));
    for qi in 0..nq {
        for (pos, &(j, d)) in ranking.entry(qi).iter().enumerate() {
            idx[(qi, pos)] = j as i64;
            dist[(qi, pos)] = d;
        }
    }
    Ok((idx.into_pyarray(py), dist.into_pyarray(py)))
}

/// Mean average precision of a search result against per-query relevant
/// index sets. `top_k` defaults to the full database.
#[pyfunction]
#[pyo3(signature = (indices, distances, relevant, top_k=None))]
fn map_score(
    indices: PyReadonlyArray2<'_, i64>,
    distances: PyReadonlyArray2<'_, u32>,
    relevant: Vec<Vec<usize>>,
    top_k: Option<usize>,
) -> PyResult<f64> {
    let iv = indices.as_array();
    let dv = distances.as_array();
    if iv.shape() != dv.shape() {
        return Err(PyValueError::new_err(
            "indices and distances differ in shape",
        ));
    }
    let db_size = iv.ncols();
    let entries = (0..iv.nrows())
        .map(|q| {
            (0..db_size)
                .map(|p| {
                    let j = iv[(q, p)];
                    if j < 0 {
                        return Err(PyValueError::new_err(format!(
                            "query {q}: negative database index {j}"
                        )));
                    }
                    Ok((j as usize, dv[(q, p)]))
                })
                .collect::<PyResult<Vec<_>>>()
        })
        .collect::<PyResult<Vec<_>>>()?;
    let ranking = Ranking::new(db_size, entries).map_err(py_err)?;
    let gt = GroundTruth::new(db_size, relevant).map_err(py_err)?;
    mean_average_precision(&ranking, &gt, top_k.unwrap_or(db_size)).map_err(py_err)
}

/// Exact k nearest database columns per query under Euclidean distance,
/// as sorted index lists (the retrieval ground truth).
#[pyfunction]
#[pyo3(signature = (queries, database, k, exclude_self=false))]
fn knn_ground_truth(
    queries: PyReadonlyArray2<'_, f64>,
    database: PyReadonlyArray2<'_, f64>,
    k: usize,
    exclude_self: bool,
) -> PyResult<Vec<Vec<usize>>> {
    let gt = euclidean_knn(&features(&queries)?, &features(&database)?, k, exclude_self)
        .map_err(py_err)?;
    Ok((0..gt.len()).map(|q| gt.relevant(q).to_vec()).collect())
}

/// Per-query relevant index lists from label matrices: same dominant class,
/// or any shared positive label with `multi=True`.
#[pyfunction]
#[pyo3(signature = (query_labels, db_labels, multi=false))]
fn label_relevance(
    query_labels: PyReadonlyArray2<'_, f64>,
    db_labels: PyReadonlyArray2<'_, f64>,
    multi: bool,
) -> PyResult<Vec<Vec<usize>>> {
    let gt =
        label_ground_truth(&labels(&query_labels)?, &labels(&db_labels)?, multi).map_err(py_err)?;
    Ok((0..gt.len()).map(|q| gt.relevant(q).to_vec()).collect())
}

#[pymodule]
fn agghash_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DEFAULT_SEED", DEFAULT_SEED)?;
    m.add_class::<ItqModel>()?;
    m.add_class::<RbaModel>()?;
    m.add_class::<SahModel>()?;
    m.add_class::<SashModel>()?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(train_itq, m)?)?;
    m.add_function(wrap_pyfunction!(train_rba, m)?)?;
    m.add_function(wrap_pyfunction!(train_sah, m)?)?;
    m.add_function(wrap_pyfunction!(train_sash, m)?)?;
    m.add_function(wrap_pyfunction!(search, m)?)?;
    m.add_function(wrap_pyfunction!(map_score, m)?)?;
    m.add_function(wrap_pyfunction!(knn_ground_truth, m)?)?;
    m.add_function(wrap_pyfunction!(label_relevance, m)?)?;
    Ok(())
}
