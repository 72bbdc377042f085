//! Self-contained numeric toolbox for the oracle tests. Nothing here touches
//! the library's linear algebra: matrices are plain row-major Vec storage,
//! the solver is textbook Gaussian elimination, and minimizers are recovered
//! from objective closures alone via finite differences. That keeps every
//! check independent of the code paths it validates.

// Index loops here deliberately mirror element-wise formulas.
#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub r: usize,
    pub c: usize,
    pub v: Vec<f64>,
}

impl Mat {
    pub fn zeros(r: usize, c: usize) -> Mat {
        Mat {
            r,
            c,
            v: vec![0.0; r * c],
        }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Mat {
        let r = rows.len();
        let c = rows[0].len();
        let mut v = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c);
            v.extend_from_slice(row);
        }
        Mat { r, c, v }
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Mat {
        let mut out = Mat::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                *out.at_mut(i, j) = m[(i, j)];
            }
        }
        out
    }

    pub fn random(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Mat {
        let mut m = Mat::zeros(r, c);
        for e in m.v.iter_mut() {
            *e = rng.random::<f64>() * 2.0 - 1.0;
        }
        m
    }

    pub fn random_signs(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Mat {
        let mut m = Mat::zeros(r, c);
        for e in m.v.iter_mut() {
            *e = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
        }
        m
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.v[i * self.c + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.v[i * self.c + j]
    }

    pub fn mul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.c, rhs.r);
        let mut out = Mat::zeros(self.r, rhs.c);
        for i in 0..self.r {
            for k in 0..self.c {
                let a = self.at(i, k);
                for j in 0..rhs.c {
                    *out.at_mut(i, j) += a * rhs.at(k, j);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.c, self.r);
        for i in 0..self.r {
            for j in 0..self.c {
                *out.at_mut(j, i) = self.at(i, j);
            }
        }
        out
    }

    pub fn sub(&self, rhs: &Mat) -> Mat {
        assert_eq!((self.r, self.c), (rhs.r, rhs.c));
        let mut out = self.clone();
        for (a, b) in out.v.iter_mut().zip(&rhs.v) {
            *a -= b;
        }
        out
    }

    /// Subtract a column vector from every column.
    pub fn sub_col(&self, col: &[f64]) -> Mat {
        assert_eq!(self.r, col.len());
        let mut out = self.clone();
        for i in 0..self.r {
            for j in 0..self.c {
                *out.at_mut(i, j) -= col[i];
            }
        }
        out
    }

    /// Add a column vector to every column.
    pub fn add_col(&self, col: &[f64]) -> Mat {
        assert_eq!(self.r, col.len());
        let mut out = self.clone();
        for i in 0..self.r {
            for j in 0..self.c {
                *out.at_mut(i, j) += col[i];
            }
        }
        out
    }

    /// Squared Frobenius norm.
    pub fn frob2(&self) -> f64 {
        self.v.iter().map(|v| v * v).sum()
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.r).map(|i| self.at(i, j)).collect()
    }

    pub fn max_abs_diff(&self, rhs: &Mat) -> f64 {
        assert_eq!((self.r, self.c), (rhs.r, rhs.c));
        self.v
            .iter()
            .zip(&rhs.v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Solve A x = b by Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &Mat, b: &[f64]) -> Vec<f64> {
    assert_eq!(a.r, a.c);
    assert_eq!(a.r, b.len());
    let n = a.r;
    let mut m = a.clone();
    let mut x: Vec<f64> = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m.at(i, col).abs().partial_cmp(&m.at(j, col).abs()).unwrap())
            .unwrap();
        assert!(m.at(pivot, col).abs() > 1e-13, "singular oracle system");
        if pivot != col {
            for j in 0..n {
                let t = m.at(col, j);
                *m.at_mut(col, j) = m.at(pivot, j);
                *m.at_mut(pivot, j) = t;
            }
            x.swap(col, pivot);
        }
        let d = m.at(col, col);
        for i in col + 1..n {
            let f = m.at(i, col) / d;
            if f != 0.0 {
                for j in col..n {
                    *m.at_mut(i, j) -= f * m.at(col, j);
                }
                x[i] -= f * x[col];
            }
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= m.at(i, j) * x[j];
        }
        x[i] = s / m.at(i, i);
    }
    x
}

/// Central-difference gradient of a scalar function. Exact (up to rounding)
/// for quadratics, whatever the step.
pub fn fd_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut p = x.to_vec();
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let up = f(&p);
        p[i] = x[i] - h;
        let dn = f(&p);
        p[i] = x[i];
        g[i] = (up - dn) / (2.0 * h);
    }
    g
}

/// Minimizer of a quadratic objective given only its value closure. The
/// gradient of a quadratic is affine, so probing it along the axes recovers
/// the exact system A x = -grad(0), solved by Gaussian elimination. The
/// recovered Hessian is symmetrized to cancel probe rounding.
pub fn quad_minimizer(f: &dyn Fn(&[f64]) -> f64, n: usize) -> Vec<f64> {
    let h = 0.5;
    let probe = 1.0;
    let g0 = fd_grad(f, &vec![0.0; n], h);
    let mut a = Mat::zeros(n, n);
    let mut x = vec![0.0; n];
    for j in 0..n {
        x[j] = probe;
        let gj = fd_grad(f, &x, h);
        x[j] = 0.0;
        for i in 0..n {
            *a.at_mut(i, j) = (gj[i] - g0[i]) / probe;
        }
    }
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (a.at(i, j) + a.at(j, i));
            *a.at_mut(i, j) = s;
            *a.at_mut(j, i) = s;
        }
    }
    let rhs: Vec<f64> = g0.iter().map(|g| -g).collect();
    gauss_solve(&a, &rhs)
}

/// Training objective evaluated with explicit loops:
/// 1/2 ||dec - (W2 B + c2 1^T)||^2 + lambda/2 ||B - (W1 enc + c1 1^T)||^2
/// + beta/2 (||W1||^2 + ||W2||^2).
#[allow(clippy::too_many_arguments)]
pub fn naive_ae_objective(
    enc: &Mat,
    dec: &Mat,
    b: &Mat,
    w1: &Mat,
    c1: &[f64],
    w2: &Mat,
    c2: &[f64],
    lambda: f64,
    beta: f64,
) -> f64 {
    let recon = dec.sub(&w2.mul(b).add_col(c2));
    let quant = b.sub(&w1.mul(enc).add_col(c1));
    0.5 * recon.frob2() + 0.5 * lambda * quant.frob2() + 0.5 * beta * (w1.frob2() + w2.frob2())
}

/// Aggregation residual sum ||V^T phi - 1||^2 + mu ||phi||^2, explicit loops.
pub fn naive_agg_terms(v: &Mat, phi: &[f64], mu: f64) -> f64 {
    assert_eq!(v.r, phi.len());
    let mut total = 0.0;
    for j in 0..v.c {
        let mut dot = 0.0;
        for i in 0..v.r {
            dot += v.at(i, j) * phi[i];
        }
        total += (dot - 1.0) * (dot - 1.0);
    }
    total + mu * phi.iter().map(|p| p * p).sum::<f64>()
}

/// Worst coordinate gap between the library's closed-form encoder/decoder
/// refresh and per-parameter minimizers recovered from the objective slices.
/// `dec` is the decoder target (the input itself, or a label matrix).
#[allow(clippy::too_many_arguments)]
pub fn wc_oracle_gap(
    x: &Mat,
    b: &Mat,
    dec: &Mat,
    c1_prev: &[f64],
    c2_prev: &[f64],
    lambda: f64,
    beta: f64,
    w1_got: &Mat,
    c1_got: &[f64],
    w2_got: &Mat,
    c2_got: &[f64],
) -> f64 {
    let (l, d_in, d_out) = (b.r, x.r, dec.r);
    let w1_oracle = quad_minimizer(
        &|w: &[f64]| {
            let w1 = Mat {
                r: l,
                c: d_in,
                v: w.to_vec(),
            };
            let quant = b.sub(&w1.mul(x).add_col(c1_prev));
            0.5 * lambda * quant.frob2() + 0.5 * beta * w1.frob2()
        },
        l * d_in,
    );
    let mut gap = max_abs_diff_slice(&w1_got.v, &w1_oracle);
    let w2_oracle = quad_minimizer(
        &|w: &[f64]| {
            let w2 = Mat {
                r: d_out,
                c: l,
                v: w.to_vec(),
            };
            let recon = dec.sub(&w2.mul(b).add_col(c2_prev));
            0.5 * recon.frob2() + 0.5 * beta * w2.frob2()
        },
        d_out * l,
    );
    gap = gap.max(max_abs_diff_slice(&w2_got.v, &w2_oracle));
    let c1_oracle = quad_minimizer(
        &|c: &[f64]| {
            let quant = b.sub(&w1_got.mul(x).add_col(c));
            0.5 * lambda * quant.frob2()
        },
        l,
    );
    gap = gap.max(max_abs_diff_slice(c1_got, &c1_oracle));
    let c2_oracle = quad_minimizer(
        &|c: &[f64]| {
            let recon = dec.sub(&w2_got.mul(b).add_col(c));
            0.5 * recon.frob2()
        },
        d_out,
    );
    gap.max(max_abs_diff_slice(c2_got, &c2_oracle))
}

/// Per-image joint objective written with plain loops. `target` is what the
/// decoder should reproduce: the aggregate itself when `None`, a label
/// column otherwise.
#[allow(clippy::too_many_arguments)]
pub fn naive_phi_objective(
    v: &Mat,
    target: Option<&[f64]>,
    w1: &Mat,
    c1: &[f64],
    w2: &Mat,
    c2: &[f64],
    gamma: f64,
    mu: f64,
    phi: &[f64],
) -> f64 {
    let p = Mat {
        r: phi.len(),
        c: 1,
        v: phi.to_vec(),
    };
    let decoded = w2.mul(&w1.mul(&p).add_col(c1)).add_col(c2);
    let t = Mat {
        r: decoded.r,
        c: 1,
        v: target.unwrap_or(phi).to_vec(),
    };
    let recon = t.sub(&decoded);
    0.5 * recon.frob2() + 0.5 * gamma * naive_agg_terms(v, phi, mu)
}

/// Replay the row-by-row code update independently of the library: each row
/// in order becomes the exhaustive argmin over its 2^m sign patterns, other
/// rows held at their current values. Returns the final matrix and whether
/// the naive objective was non-increasing across every row replacement.
#[allow(clippy::too_many_arguments)]
pub fn replay_rows_exhaustively(
    x: &Mat,
    b0: &Mat,
    w1: &Mat,
    c1: &[f64],
    w2: &Mat,
    c2: &[f64],
    lambda: f64,
    beta: f64,
) -> (Mat, bool) {
    let j = |b: &Mat| naive_ae_objective(x, x, b, w1, c1, w2, c2, lambda, beta);
    let mut cur = b0.clone();
    let mut monotone = true;
    let m = cur.c;
    assert!(m <= 16, "exhaustive replay needs tiny instances");
    for k in 0..cur.r {
        let before = j(&cur);
        let mut best = f64::INFINITY;
        let mut best_pattern = vec![0.0; m];
        for mask in 0..(1u32 << m) {
            let mut trial = cur.clone();
            for jcol in 0..m {
                *trial.at_mut(k, jcol) = if mask >> jcol & 1 == 1 { 1.0 } else { -1.0 };
            }
            let val = j(&trial);
            if val < best {
                best = val;
                best_pattern = (0..m).map(|jcol| trial.at(k, jcol)).collect();
            }
        }
        for jcol in 0..m {
            *cur.at_mut(k, jcol) = best_pattern[jcol];
        }
        if j(&cur) > before + 1e-9 {
            monotone = false;
        }
    }
    (cur, monotone)
}

/// Sign disagreements between two +-1 columns.
pub fn naive_hamming(a: &[i8], b: &[i8]) -> u32 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u32
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform random matrix in [-1, 1) as the library type.
pub fn random_dmatrix(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

pub fn max_abs_diff_slice(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
