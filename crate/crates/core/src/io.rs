//! Binary file formats. Every file starts with a four-byte magic and a u32
//! version, then fixed-width little-endian fields; headers are validated
//! before any payload is touched. Dense matrix payloads are row-major;
//! ragged descriptor payloads keep each descriptor (column) contiguous.
//! Exact layouts are documented in docs/FORMATS.md at the repository root.
//!
//! Generic `write_*` / `read_*` functions work over any `Write` / `Read`
//! (handy for byte-level comparisons in tests); `save_*` / `load_*` wrap them
//! with buffered files and prefix errors with the offending path.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::binary::PackedCodes;
use crate::error::{Error, Result};
use crate::itq::ItqModel;
use crate::rba::HashModel;
use crate::retrieval::Ranking;
use crate::sah::{SahConfig, SahModel};
use crate::sash::{SashConfig, SashModel};
use crate::types::LocalFeatureSet;

const VERSION: u32 = 1;
const MAGIC_MATRIX: [u8; 4] = *b"AGMX";
const MAGIC_RAGGED: [u8; 4] = *b"AGRG";
const MAGIC_MODEL: [u8; 4] = *b"AGHM";
const MAGIC_CODES: [u8; 4] = *b"AGPC";
const MAGIC_RANKING: [u8; 4] = *b"AGRK";

fn truncated() -> Error {
    Error::FileFormat("file is truncated".into())
}

fn w_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn w_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn w_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn r_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            truncated()
        } else {
            Error::Io(e)
        }
    })?;
    Ok(buf)
}

fn r_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(r_exact(r)?))
}

fn r_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(r_exact(r)?))
}

fn r_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(r_exact(r)?))
}

fn r_count<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    usize::try_from(r_u64(r)?)
        .map_err(|_| Error::FileFormat(format!("{what} does not fit in memory")))
}

fn r_dim<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let n = r_count(r, what)?;
    if n == 0 {
        return Err(Error::FileFormat(format!("{what} must be at least 1")));
    }
    Ok(n)
}

fn check_header<R: Read>(r: &mut R, magic: [u8; 4], what: &str) -> Result<()> {
    let got: [u8; 4] = r_exact(r)?;
    if got != magic {
        return Err(Error::FileFormat(format!(
            "bad magic {:?}, expected {:?} ({what})",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(&magic)
        )));
    }
    let ver = r_u32(r)?;
    if ver != VERSION {
        return Err(Error::FileFormat(format!(
            "unsupported {what} version {ver}, expected {VERSION}"
        )));
    }
    Ok(())
}

/// Read `count` floats of the given byte width, widening f32 to f64. The
/// buffer grows with the bytes actually present, so a header lying about the
/// payload size fails cleanly instead of allocating it up front.
fn r_floats<R: Read>(r: &mut R, count: usize, width: u32) -> Result<Vec<f64>> {
    let per = match width {
        4 | 8 => width as usize,
        _ => {
            return Err(Error::FileFormat(format!(
                "unsupported float width {width}, expected 4 or 8"
            )))
        }
    };
    let bytes = count
        .checked_mul(per)
        .ok_or_else(|| Error::FileFormat("payload size overflows".into()))?;
    let mut buf = Vec::new();
    r.take(bytes as u64).read_to_end(&mut buf)?;
    if buf.len() != bytes {
        return Err(truncated());
    }
    let vals = if per == 8 {
        buf.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect()
    } else {
        buf.chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect()
    };
    Ok(vals)
}

fn w_f64_slice<W: Write>(w: &mut W, vals: &[f64]) -> Result<()> {
    for &v in vals {
        w_f64(w, v)?;
    }
    Ok(())
}

fn r_mat<R: Read>(r: &mut R, rows: usize, cols: usize, width: u32) -> Result<DMatrix<f64>> {
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::FileFormat("matrix size overflows".into()))?;
    Ok(DMatrix::from_column_slice(
        rows,
        cols,
        &r_floats(r, count, width)?,
    ))
}

fn r_vec<R: Read>(r: &mut R, n: usize) -> Result<DVector<f64>> {
    Ok(DVector::from_vec(r_floats(r, n, 8)?))
}

fn open_reader(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn create_writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn at_path<T>(res: Result<T>, path: &Path) -> Result<T> {
    res.map_err(|e| e.prefixed(&path.display().to_string()))
}

// ---- dense matrices ----

fn write_matrix_width<W: Write>(w: &mut W, m: &DMatrix<f64>, width: u32) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidInput(
            "refusing to write an empty matrix".into(),
        ));
    }
    w.write_all(&MAGIC_MATRIX)?;
    w_u32(w, VERSION)?;
    w_u32(w, width)?;
    w_u64(w, m.nrows() as u64)?;
    w_u64(w, m.ncols() as u64)?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if width == 8 {
                w_f64(w, m[(i, j)])?;
            } else {
                w.write_all(&(m[(i, j)] as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Write a matrix with full f64 precision.
pub fn write_matrix<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<()> {
    write_matrix_width(w, m, 8)
}

/// Write a matrix narrowed to f32 (loads widen it back to f64).
pub fn write_matrix_f32<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<()> {
    write_matrix_width(w, m, 4)
}

pub fn read_matrix<R: Read>(r: &mut R) -> Result<DMatrix<f64>> {
    check_header(r, MAGIC_MATRIX, "matrix file")?;
    let width = r_u32(r)?;
    let rows = r_dim(r, "matrix row count")?;
    let cols = r_dim(r, "matrix column count")?;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::FileFormat("matrix size overflows".into()))?;
    Ok(DMatrix::from_row_slice(
        rows,
        cols,
        &r_floats(r, count, width)?,
    ))
}

pub fn save_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    at_path(
        create_writer(path).and_then(|mut w| {
            write_matrix(&mut w, m)?;
            Ok(w.flush()?)
        }),
        path,
    )
}

pub fn save_matrix_f32(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    at_path(
        create_writer(path).and_then(|mut w| {
            write_matrix_f32(&mut w, m)?;
            Ok(w.flush()?)
        }),
        path,
    )
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    at_path(
        open_reader(path).and_then(|mut r| read_matrix(&mut r)),
        path,
    )
}

// ---- ragged descriptor sets ----

pub fn write_ragged<W: Write>(w: &mut W, sets: &[LocalFeatureSet]) -> Result<()> {
    let first = sets
        .first()
        .ok_or_else(|| Error::InvalidInput("refusing to write zero sets".into()))?;
    let d = first.d();
    for (i, s) in sets.iter().enumerate() {
        if s.d() != d {
            return Err(Error::DimensionMismatch(format!(
                "set {i} has {} rows, set 0 has {d}",
                s.d()
            )));
        }
    }
    w.write_all(&MAGIC_RAGGED)?;
    w_u32(w, VERSION)?;
    w_u32(w, 8)?;
    w_u64(w, d as u64)?;
    w_u64(w, sets.len() as u64)?;
    for s in sets {
        w_u64(w, s.n() as u64)?;
    }
    for s in sets {
        w_f64_slice(w, s.data().as_slice())?;
    }
    Ok(())
}

pub fn read_ragged<R: Read>(r: &mut R) -> Result<Vec<LocalFeatureSet>> {
    check_header(r, MAGIC_RAGGED, "descriptor set file")?;
    let width = r_u32(r)?;
    let d = r_dim(r, "descriptor dimensionality")?;
    let m = r_dim(r, "set count")?;
    let mut counts = Vec::with_capacity(m);
    for i in 0..m {
        let n = r_count(r, "descriptor count")?;
        if n == 0 {
            return Err(Error::FileFormat(format!("set {i} holds zero descriptors")));
        }
        counts.push(n);
    }
    let mut sets = Vec::with_capacity(m);
    for (i, &n) in counts.iter().enumerate() {
        let mat = r_mat(r, d, n, width).map_err(|e| e.prefixed(&format!("set {i}")))?;
        sets.push(LocalFeatureSet::new(mat).map_err(|e| e.prefixed(&format!("set {i}")))?);
    }
    Ok(sets)
}

pub fn save_ragged(path: impl AsRef<Path>, sets: &[LocalFeatureSet]) -> Result<()> {
    let path = path.as_ref();
    at_path(
        create_writer(path).and_then(|mut w| {
            write_ragged(&mut w, sets)?;
            Ok(w.flush()?)
        }),
        path,
    )
}

pub fn load_ragged(path: impl AsRef<Path>) -> Result<Vec<LocalFeatureSet>> {
    let path = path.as_ref();
    at_path(
        open_reader(path).and_then(|mut r| read_ragged(&mut r)),
        path,
    )
}

// ---- trained models ----

/// Any trained model the pipeline can write or read back.
#[derive(Debug, Clone)]
pub enum ModelFile {
    Rba(HashModel),
    Itq(ItqModel),
    Sah(SahModel),
    Sash(SashModel),
}

impl ModelFile {
    /// Human-readable kind tag, used in error messages and CLI output.
    pub fn kind(&self) -> &'static str {
        match self {
            ModelFile::Rba(_) => "rba",
            ModelFile::Itq(_) => "itq",
            ModelFile::Sah(_) => "sah",
            ModelFile::Sash(_) => "sash",
        }
    }
}

fn w_hash<W: Write>(w: &mut W, h: &HashModel) -> Result<()> {
    w_f64_slice(w, h.w1.as_slice())?;
    w_f64_slice(w, h.c1.as_slice())?;
    w_f64_slice(w, h.w2.as_slice())?;
    w_f64_slice(w, h.c2.as_slice())
}

fn r_hash<R: Read>(r: &mut R, l: usize, d_in: usize, d_out: usize) -> Result<HashModel> {
    let w1 = r_mat(r, l, d_in, 8)?;
    let c1 = r_vec(r, l)?;
    let w2 = r_mat(r, d_out, l, 8)?;
    let c2 = r_vec(r, d_out)?;
    HashModel::new(w1, c1, w2, c2)
}

pub fn write_model<W: Write>(w: &mut W, model: &ModelFile) -> Result<()> {
    w.write_all(&MAGIC_MODEL)?;
    w_u32(w, VERSION)?;
    match model {
        ModelFile::Rba(h) => {
            w_u32(w, 0)?;
            w_u64(w, h.l() as u64)?;
            w_u64(w, h.d_in() as u64)?;
            w_hash(w, h)?;
        }
        ModelFile::Itq(m) => {
            w_u32(w, 1)?;
            w_u64(w, m.pca.nrows() as u64)?;
            w_u64(w, m.pca.ncols() as u64)?;
            w_f64_slice(w, m.pca.as_slice())?;
            w_f64_slice(w, m.rotation.as_slice())?;
            w_f64_slice(w, m.mean.as_slice())?;
        }
        ModelFile::Sah(m) => {
            let cfg = &m.config;
            w_u32(w, 2)?;
            w_u64(w, m.hash.l() as u64)?;
            w_u64(w, m.hash.d_in() as u64)?;
            w_hash(w, &m.hash)?;
            for v in [cfg.t, cfg.t1, cfg.sweeps] {
                w_u64(w, v as u64)?;
            }
            w_u64(w, cfg.seed)?;
            for v in [cfg.lambda, cfg.beta, cfg.gamma, cfg.mu, cfg.gmp_mu] {
                w_f64(w, v)?;
            }
        }
        ModelFile::Sash(m) => {
            let cfg = &m.config;
            w_u32(w, 3)?;
            w_u64(w, m.hash.l() as u64)?;
            w_u64(w, m.hash.d_in() as u64)?;
            w_u64(w, m.hash.d_out() as u64)?;
            w_hash(w, &m.hash)?;
            for v in [cfg.t, cfg.t1, cfg.sweeps] {
                w_u64(w, v as u64)?;
            }
            w_u64(w, cfg.seed)?;
            for v in [
                cfg.lambda, cfg.beta, cfg.gamma, cfg.mu, cfg.gmp_mu, cfg.alpha,
            ] {
                w_f64(w, v)?;
            }
            w_f64_slice(w, m.p.as_slice())?;
        }
    }
    Ok(())
}

pub fn read_model<R: Read>(r: &mut R) -> Result<ModelFile> {
    check_header(r, MAGIC_MODEL, "model file")?;
    let kind = r_u32(r)?;
    match kind {
        0 => {
            let l = r_dim(r, "code length")?;
            let d = r_dim(r, "input dimensionality")?;
            Ok(ModelFile::Rba(r_hash(r, l, d, d)?))
        }
        1 => {
            let l = r_dim(r, "code length")?;
            let d = r_dim(r, "input dimensionality")?;
            Ok(ModelFile::Itq(ItqModel {
                pca: r_mat(r, l, d, 8)?,
                rotation: r_mat(r, l, l, 8)?,
                mean: r_vec(r, d)?,
            }))
        }
        2 => {
            let l = r_dim(r, "code length")?;
            let d = r_dim(r, "input dimensionality")?;
            let hash = r_hash(r, l, d, d)?;
            let t = r_dim(r, "outer iteration count")?;
            let t1 = r_dim(r, "inner iteration count")?;
            let sweeps = r_dim(r, "sweep count")?;
            let seed = r_u64(r)?;
            let mut cfg = SahConfig::new(l);
            cfg.t = t;
            cfg.t1 = t1;
            cfg.sweeps = sweeps;
            cfg.seed = seed;
            cfg.lambda = r_f64(r)?;
            cfg.beta = r_f64(r)?;
            cfg.gamma = r_f64(r)?;
            cfg.mu = r_f64(r)?;
            cfg.gmp_mu = r_f64(r)?;
            Ok(ModelFile::Sah(SahModel { hash, config: cfg }))
        }
        3 => {
            let l = r_dim(r, "code length")?;
            let d = r_dim(r, "input dimensionality")?;
            let c = r_dim(r, "class count")?;
            let hash = r_hash(r, l, d, c)?;
            let t = r_dim(r, "outer iteration count")?;
            let t1 = r_dim(r, "inner iteration count")?;
            let sweeps = r_dim(r, "sweep count")?;
            let seed = r_u64(r)?;
            let mut cfg = SashConfig::new(l);
            cfg.t = t;
            cfg.t1 = t1;
            cfg.sweeps = sweeps;
            cfg.seed = seed;
            cfg.lambda = r_f64(r)?;
            cfg.beta = r_f64(r)?;
            cfg.gamma = r_f64(r)?;
            cfg.mu = r_f64(r)?;
            cfg.gmp_mu = r_f64(r)?;
            cfg.alpha = r_f64(r)?;
            let p = r_mat(r, d, d, 8)?;
            // Training aggregations are run artifacts, not part of the model
            // file; loaded models carry empty placeholders.
            Ok(ModelFile::Sash(SashModel {
                hash,
                p,
                phi0: DMatrix::zeros(d, 0),
                phi_t: DMatrix::zeros(d, 0),
                config: cfg,
            }))
        }
        other => Err(Error::FileFormat(format!("unknown model kind {other}"))),
    }
}

pub fn save_model(path: impl AsRef<Path>, model: &ModelFile) -> Result<()> {
    let path = path.as_ref();
    at_path(
        create_writer(path).and_then(|mut w| {
            write_model(&mut w, model)?;
            Ok(w.flush()?)
        }),
        path,
    )
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    at_path(open_reader(path).and_then(|mut r| read_model(&mut r)), path)
}

// ---- packed codes ----

pub fn write_codes<W: Write>(w: &mut W, codes: &PackedCodes) -> Result<()> {
    w.write_all(&MAGIC_CODES)?;
    w_u32(w, VERSION)?;
    w_u64(w, codes.l() as u64)?;
    w_u64(w, codes.m() as u64)?;
    for &word in codes.words() {
        w_u64(w, word)?;
    }
    Ok(())
}

pub fn read_codes<R: Read>(r: &mut R) -> Result<PackedCodes> {
    check_header(r, MAGIC_CODES, "code file")?;
    let l = r_dim(r, "code length")?;
    let m = r_dim(r, "code count")?;
    let per = l.div_ceil(64);
    let total = per
        .checked_mul(m)
        .ok_or_else(|| Error::FileFormat("code payload size overflows".into()))?;
    let bytes = total
        .checked_mul(8)
        .ok_or_else(|| Error::FileFormat("code payload size overflows".into()))?;
    let mut buf = Vec::new();
    r.take(bytes as u64).read_to_end(&mut buf)?;
    if buf.len() != bytes {
        return Err(truncated());
    }
    let words: Vec<u64> = buf
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    PackedCodes::from_words(l, m, words)
}

pub fn save_codes(path: impl AsRef<Path>, codes: &PackedCodes) -> Result<()> {
    let path = path.as_ref();
    at_path(
        create_writer(path).and_then(|mut w| {
            write_codes(&mut w, codes)?;
            Ok(w.flush()?)
        }),
        path,
    )
}

pub fn load_codes(path: impl AsRef<Path>) -> Result<PackedCodes> {
    let path = path.as_ref();
    at_path(open_reader(path).and_then(|mut r| read_codes(&mut r)), path)
}

// ---- rankings ----

/// Write a ranking along with the code length that produced it.
pub fn write_ranking<W: Write>(w: &mut W, bits: usize, ranking: &Ranking) -> Result<()> {
    w.write_all(&MAGIC_RANKING)?;
    w_u32(w, VERSION)?;
    w_u64(w, bits as u64)?;
    w_u64(w, ranking.len() as u64)?;
    w_u64(w, ranking.db_size() as u64)?;
    for q in 0..ranking.len() {
        let list = ranking.entry(q);
        w_u64(w, list.len() as u64)?;
        for &(idx, dist) in list {
            w_u64(w, idx as u64)?;
            w_u32(w, dist)?;
        }
    }
    Ok(())
}

pub fn read_ranking<R: Read>(r: &mut R) -> Result<(usize, Ranking)> {
    check_header(r, MAGIC_RANKING, "ranking file")?;
    let bits = r_dim(r, "code length")?;
    let n_queries = r_count(r, "query count")?;
    let db_size = r_count(r, "database size")?;
    let mut entries = Vec::with_capacity(n_queries);
    for _ in 0..n_queries {
        let len = r_count(r, "entry count")?;
        if len > db_size {
            return Err(Error::FileFormat(format!(
                "a query ranks {len} items in a database of {db_size}"
            )));
        }
        let mut list = Vec::with_capacity(len);
        for _ in 0..len {
            let idx = r_count(r, "database index")?;
            let dist = r_u32(r)?;
            list.push((idx, dist));
        }
        entries.push(list);
    }
    Ok((bits, Ranking::new(db_size, entries)?))
}

pub fn save_ranking(path: impl AsRef<Path>, bits: usize, ranking: &Ranking) -> Result<()> {
    let path = path.as_ref();
    at_path(
        create_writer(path).and_then(|mut w| {
            write_ranking(&mut w, bits, ranking)?;
            Ok(w.flush()?)
        }),
        path,
    )
}

pub fn load_ranking(path: impl AsRef<Path>) -> Result<(usize, Ranking)> {
    let path = path.as_ref();
    at_path(
        open_reader(path).and_then(|mut r| read_ranking(&mut r)),
        path,
    )
}
