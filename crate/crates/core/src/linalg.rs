//! Small dense-matrix helpers over `Vec<Vec<f64>>` (row-major, square).

use nalgebra::{DMatrix, DVector};

pub type Matrix = Vec<Vec<f64>>;

pub fn zeros(n: usize) -> Matrix {
    vec![vec![0.0; n]; n]
}

pub fn identity(n: usize) -> Matrix {
    let mut m = zeros(n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn mat_vec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum()).collect()
}

/// `a^T x`.
pub fn mat_t_vec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j] += v * x[i];
        }
    }
    out
}

pub fn transpose(a: &Matrix) -> Matrix {
    let n = a.len();
    let mut t = zeros(n);
    for i in 0..n {
        for j in 0..n {
            t[j][i] = a[i][j];
        }
    }
    t
}

/// Maximum absolute row sum.
pub fn norm_inf(a: &Matrix) -> f64 {
    a.iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Upper estimate of the spectral radius of `a` from Gelfand's formula,
/// `min_s ||a^(2^s)||^(1/2^s)` over up to 64 squarings. Every term is an
/// upper bound and the sequence converges to the spectral radius.
pub fn spectral_radius_bound(a: &Matrix) -> f64 {
    let mut m = a.clone();
    let mut best = f64::INFINITY;
    let mut power = 1.0f64;
    for _ in 0..64 {
        let nrm = norm_inf(&m);
        if !nrm.is_finite() {
            break;
        }
        if nrm == 0.0 {
            return 0.0;
        }
        best = best.min(nrm.powf(1.0 / power));
        if nrm < 1e-100 || nrm > 1e100 {
            break;
        }
        m = mat_mul(&m, &m);
        power *= 2.0;
    }
    best
}

/// Solves `(I - a) x = b`.
pub fn solve_identity_minus(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let m = DMatrix::from_fn(n, n, |i, j| f64::from(i == j) - a[i][j]);
    let rhs = DVector::from_column_slice(b);
    m.lu().solve(&rhs).map(|x| x.iter().copied().collect())
}

pub fn quad_form(z: &Matrix, x: &[f64]) -> f64 {
    z.iter()
        .zip(x)
        .map(|(row, xi)| xi * row.iter().zip(x).map(|(zij, xj)| zij * xj).sum::<f64>())
        .sum()
}
