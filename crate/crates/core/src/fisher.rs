//! Fisher information in its block structure, and the closed-form
//! approximate inverse `S`.
//!
//! The `(2n-1) × (2n-1)` information matrix is
//!
//! ```text
//!     V = [ D₁  W  ]      D₁ = diag(row sums of C)        (n × n)
//!         [ Wᵀ  D₂ ]      D₂ = diag(column sums of C)     (n-1 × n-1)
//!                         W  = C[:, 0..n-1]
//! ```
//!
//! where `C` is the `n × n` matrix of per-edge variances with zero diagonal.
//! Only `C` and its margins are stored. `S` keeps the reciprocal diagonal of
//! `V` plus the corner term `1 / v_{2n,2n}`, with `v_{2n,2n}` the last column
//! sum of `C`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::family::WeightFamily;
use crate::model::{pair_map, ParamVector};

/// Largest `n` for which dense `(2n-1)²` operations are attempted.
pub const DENSE_LIMIT: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredFisher {
    n: usize,
    cross: Vec<f64>,
    row_sums: Vec<f64>,
    col_sums: Vec<f64>,
    m: f64,
    big_m: f64,
}

impl StructuredFisher {
    /// Builds from a row-major `n × n` cross block with zero diagonal and
    /// strictly positive off-diagonal entries.
    pub fn from_cross(n: usize, cross: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 vertices, got {n}")));
        }
        if cross.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: cross.len(),
            });
        }
        let mut row_sums = vec![0.0; n];
        let mut col_sums = vec![0.0; n];
        let (mut m, mut big_m) = (f64::INFINITY, 0.0_f64);
        for i in 0..n {
            for j in 0..n {
                let v = cross[i * n + j];
                if i == j {
                    if v != 0.0 {
                        return Err(Error::InvalidConfig(format!("cross block diagonal ({}, {}) must be zero", i + 1, j + 1)));
                    }
                    continue;
                }
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "cross entry ({}, {}) = {v} must be positive and finite",
                        i + 1,
                        j + 1
                    )));
                }
                row_sums[i] += v;
                col_sums[j] += v;
                m = m.min(v);
                big_m = big_m.max(v);
            }
        }
        Ok(Self {
            n,
            cross,
            row_sums,
            col_sums,
            m,
            big_m,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n - 1
    }

    /// `v_{i,n+j}`, 0-based vertex indices.
    #[inline]
    pub fn cross(&self, i: usize, j: usize) -> f64 {
        self.cross[i * self.n + j]
    }

    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    /// All `n` column sums; the last one is `v_{2n,2n}`.
    pub fn col_sums(&self) -> &[f64] {
        &self.col_sums
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    pub fn corner(&self) -> f64 {
        self.col_sums[self.n - 1]
    }

    /// Diagonal of `V` followed by `v_{2n,2n}` (length `2n`).
    pub fn diagonal_with_corner(&self) -> Vec<f64> {
        let mut out = self.row_sums.clone();
        out.extend_from_slice(&self.col_sums);
        out
    }

    pub fn s_approx(&self) -> SApprox {
        let n = self.n;
        let inv_diag = self
            .row_sums
            .iter()
            .chain(&self.col_sums[..n - 1])
            .map(|v| 1.0 / v)
            .collect();
        SApprox {
            n,
            inv_diag,
            inv_corner: 1.0 / self.corner(),
        }
    }

    /// `V x`, in `O(n²)`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        check_len(x, self.dim())?;
        let (xa, xb) = x.split_at(n);
        let mut y = vec![0.0; self.dim()];
        let (ya, yb) = y.split_at_mut(n);
        for i in 0..n {
            let row = &self.cross[i * n..i * n + n - 1];
            let mut acc = self.row_sums[i] * xa[i];
            for (c, xv) in row.iter().zip(xb) {
                acc += c * xv;
            }
            ya[i] = acc;
            for (yv, c) in yb.iter_mut().zip(row) {
                *yv += c * xa[i];
            }
        }
        for (j, yv) in yb.iter_mut().enumerate() {
            *yv += self.col_sums[j] * xb[j];
        }
        Ok(y)
    }

    /// Dense `(2n-1) × (2n-1)` copy.
    pub fn materialize(&self) -> DMatrix<f64> {
        let n = self.n;
        let dim = self.dim();
        let mut v = DMatrix::zeros(dim, dim);
        for i in 0..n {
            v[(i, i)] = self.row_sums[i];
            for j in 0..n - 1 {
                let c = self.cross(i, j);
                v[(i, n + j)] = c;
                v[(n + j, i)] = c;
            }
        }
        for j in 0..n - 1 {
            v[(n + j, n + j)] = self.col_sums[j];
        }
        v
    }

    /// Solves `V x = rhs` through the Schur complement of the diagonal
    /// out-degree block: `(D₂ - Wᵀ D₁⁻¹ W) x₂ = r₂ - Wᵀ D₁⁻¹ r₁`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        check_len(rhs, self.dim())?;
        let k = n - 1;
        // W scaled by D₁^{-1/2} so that Wᵀ D₁⁻¹ W = WsᵀWs
        let mut ws = DMatrix::<f64>::zeros(n, k);
        for i in 0..n {
            let scale = 1.0 / self.row_sums[i].sqrt();
            for j in 0..k {
                ws[(i, j)] = self.cross(i, j) * scale;
            }
        }
        let mut schur = -(ws.transpose() * &ws);
        for j in 0..k {
            schur[(j, j)] += self.col_sums[j];
        }
        let (r1, r2) = rhs.split_at(n);
        let mut reduced = DVector::from_column_slice(r2);
        for i in 0..n {
            let t = r1[i] / self.row_sums[i];
            for j in 0..k {
                reduced[j] -= self.cross(i, j) * t;
            }
        }
        let chol = schur.cholesky().ok_or(Error::Singular)?;
        let x2 = chol.solve(&reduced);
        let mut x = vec![0.0; self.dim()];
        for i in 0..n {
            let mut acc = r1[i];
            for j in 0..k {
                acc -= self.cross(i, j) * x2[j];
            }
            x[i] = acc / self.row_sums[i];
        }
        x[n..].copy_from_slice(x2.as_slice());
        Ok(x)
    }

    /// Solves `V x = rhs` by conjugate gradients preconditioned with `S`.
    ///
    /// `S V` has its spectrum clustered near one apart from a single
    /// eigenvalue of exactly two (the uniform shift of all out-degree
    /// parameters), so a few iterations suffice; each costs one `O(n²)`
    /// product with `V`.
    pub fn solve_preconditioned(&self, rhs: &[f64], rel_tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        check_len(rhs, self.dim())?;
        let s = self.s_approx();
        let scale = inf_norm(rhs);
        if scale == 0.0 {
            return Ok(vec![0.0; self.dim()]);
        }
        let mut x = s.apply(rhs)?;
        let vx = self.matvec(&x)?;
        let mut res: Vec<f64> = rhs.iter().zip(&vx).map(|(r, v)| r - v).collect();
        let mut z = s.apply(&res)?;
        let mut p = z.clone();
        let mut rz = dot(&res, &z);
        for _ in 0..max_iter {
            if inf_norm(&res) <= rel_tol * scale {
                return Ok(x);
            }
            let vp = self.matvec(&p)?;
            let pvp = dot(&p, &vp);
            if !(pvp > 0.0) {
                return Err(Error::LinearSolve("preconditioned CG lost positive curvature".into()));
            }
            let step = rz / pvp;
            for k in 0..x.len() {
                x[k] += step * p[k];
                res[k] -= step * vp[k];
            }
            z = s.apply(&res)?;
            let rz_next = dot(&res, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for k in 0..p.len() {
                p[k] = z[k] + beta * p[k];
            }
        }
        if inf_norm(&res) <= rel_tol * scale {
            Ok(x)
        } else {
            Err(Error::LinearSolve(format!(
                "preconditioned CG did not reach relative residual {rel_tol:e} in {max_iter} iterations"
            )))
        }
    }
}

/// The closed-form approximate inverse of a [`StructuredFisher`].
#[derive(Debug, Clone, PartialEq)]
pub struct SApprox {
    n: usize,
    inv_diag: Vec<f64>,
    inv_corner: f64,
}

impl SApprox {
    pub fn inv_diag(&self) -> &[f64] {
        &self.inv_diag
    }

    pub fn inv_corner(&self) -> f64 {
        self.inv_corner
    }

    /// `S x` in `O(n)`: `x_i / v_{i,i} ± x_{2n} / v_{2n,2n}`, with `+` on the
    /// out-degree block, `-` on the in-degree block and
    /// `x_{2n} = Σ_{i≤n} x_i - Σ_{i>n} x_i`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        check_len(x, 2 * n - 1)?;
        let x2n = x[..n].iter().sum::<f64>() - x[n..].iter().sum::<f64>();
        let corner = x2n * self.inv_corner;
        Ok(x.iter()
            .zip(&self.inv_diag)
            .enumerate()
            .map(|(k, (xv, d))| xv * d + if k < n { corner } else { -corner })
            .collect())
    }

    pub fn materialize(&self) -> DMatrix<f64> {
        let n = self.n;
        let dim = 2 * n - 1;
        DMatrix::from_fn(dim, dim, |i, j| {
            let same_block = (i < n) == (j < n);
            let corner = if same_block { self.inv_corner } else { -self.inv_corner };
            corner + if i == j { self.inv_diag[i] } else { 0.0 }
        })
    }
}

/// Fisher information of the stored parameters, `cross[i][j] = Var(a_ij)`.
///
/// The returned matrix is positive: it equals `-F'(θ)` for natural
/// orientation and `+F'(θ̄)` for negated orientation.
pub fn fisher_info(theta: &ParamVector, family: &WeightFamily) -> Result<StructuredFisher> {
    theta.validate(family)?;
    StructuredFisher::from_cross(theta.n(), pair_map(theta, |s| family.variance(s)))
}

/// `S x`.
pub fn s_apply(s: &SApprox, x: &[f64]) -> Result<Vec<f64>> {
    s.apply(x)
}

/// Inverse of a symmetric positive-definite matrix through its Cholesky factor.
pub fn spd_inverse(matrix: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !matrix.is_square() {
        return Err(Error::DimensionMismatch {
            expected: matrix.nrows(),
            got: matrix.ncols(),
        });
    }
    let chol = matrix.cholesky().ok_or(Error::Singular)?;
    Ok(chol.inverse())
}

/// Exact `V⁻¹` of the materialized matrix.
pub fn dense_inverse(v: &StructuredFisher) -> Result<DMatrix<f64>> {
    if v.n > DENSE_LIMIT {
        return Err(Error::TooLarge {
            n: v.n,
            limit: DENSE_LIMIT,
        });
    }
    spd_inverse(v.materialize())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxError {
    /// `max_{ij} |(V⁻¹ - S)_{ij}|`.
    pub max_abs_err: f64,
    /// `M² / (m³ (n-1)²)`; the ratio `max_abs_err / bound_shape` estimates `c₁`.
    pub bound_shape: f64,
}

impl ApproxError {
    pub fn fitted_c1(&self) -> f64 {
        self.max_abs_err / self.bound_shape
    }
}

pub fn approx_error(v: &StructuredFisher) -> Result<ApproxError> {
    let inv = dense_inverse(v)?;
    let s = v.s_approx().materialize();
    let max_abs_err = (inv - s).amax();
    let n1 = (v.n - 1) as f64;
    Ok(ApproxError {
        max_abs_err,
        bound_shape: v.big_m * v.big_m / (v.m.powi(3) * n1 * n1),
    })
}

fn check_len(x: &[f64], expected: usize) -> Result<()> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        })
    }
}

pub(crate) fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
