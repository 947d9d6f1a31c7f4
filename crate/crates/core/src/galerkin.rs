//! Galerkin problems with a boundary-condition correction step.
//!
//! The trial space `V` is the common null space of a few linear functionals
//! (a [`ConstraintSet`]) inside the coefficient space `W`. To solve
//! `P_V(B v - f) = 0, v ∈ V` one:
//!
//! 1. builds an orthonormal basis `s_i` of the weighted complement `V⊥` and
//!    splits each `s_i = q_i + q̃_i` with `P_V B q_i = 0`, `q̃_i ∈ V`
//!    ([`prepare_correction`], done once per operator);
//! 2. finds any `w ∈ W` with `P_V(B w - f) = 0` (problem specific, cheap);
//! 3. returns `v = w - Σ (w, s_i) q_i` ([`correct`]).
//!
//! [`galerkin_solve_dense`] assembles the traditional `dim V × dim V` system
//! and is used as the reference solution.

use nalgebra::{DMatrix, DVector};

use crate::chebyshev::weight;
use crate::{Error, Result, Scalar};

/// Relative tolerance for rank decisions.
pub const RANK_TOL: f64 = 1e-13;

/// Linear operator acting on Chebyshev coefficient vectors of a fixed length.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// Identifier used to bind a [`CorrectionBasis`] to its operator.
    fn id(&self) -> String;
}

#[derive(Clone, Copy, Debug)]
pub struct IdentityOperator {
    pub dim: usize,
}

impl LinearOperator for IdentityOperator {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
    fn id(&self) -> String {
        format!("identity({})", self.dim)
    }
}

/// Explicit matrix acting on coefficient vectors.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    pub matrix: DMatrix<f64>,
    pub name: String,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<f64>, name: impl Into<String>) -> Self {
        assert!(matrix.is_square(), "operator matrix must be square");
        Self {
            matrix,
            name: name.into(),
        }
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let y = &self.matrix * DVector::from_column_slice(x);
        out.copy_from_slice(y.as_slice());
    }
    fn id(&self) -> String {
        format!("dense:{}", self.name)
    }
}

/// Column-by-column matrix of an operator.
pub fn assemble(op: &dyn LinearOperator) -> DMatrix<f64> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        m.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    m
}

/// Linear functionals (rows over coefficient space) whose common null space
/// is the trial space `V`.
#[derive(Clone, Debug)]
pub struct ConstraintSet {
    rows: Vec<Vec<f64>>,
    dim: usize,
    /// Euclidean-orthonormal basis of the null space, one column per vector.
    null_basis: DMatrix<f64>,
}

impl ConstraintSet {
    pub fn new(rows: Vec<Vec<f64>>, dim: usize) -> Result<Self> {
        let k = rows.len();
        if k > dim {
            return Err(Error::TooManyConstraints { rows: k, dim });
        }
        for r in &rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
        }
        // QR of [Cᵀ | I]: the leading k columns of Q span the row space, the
        // remaining ones the null space. Rows are normalised first so that
        // the rank test does not depend on their scaling.
        let mut aug = DMatrix::zeros(dim, k + dim);
        for (i, r) in rows.iter().enumerate() {
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::RankDeficient { rank: 0, rows: k });
            }
            for (j, &x) in r.iter().enumerate() {
                aug[(j, i)] = x / norm;
            }
        }
        for j in 0..dim {
            aug[(j, k + j)] = 1.0;
        }
        let qr = aug.qr();
        let r = qr.r();
        let rank = (0..k).filter(|&i| r[(i, i)].abs() > RANK_TOL).count();
        if rank < k {
            return Err(Error::RankDeficient { rank, rows: k });
        }
        let q = qr.q();
        let null_basis = q.columns(k, dim - k).into_owned();
        Ok(Self {
            rows,
            dim,
            null_basis,
        })
    }

    pub fn unconstrained(dim: usize) -> Self {
        Self::new(Vec::new(), dim).expect("empty constraint set is always valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn null_basis(&self) -> &DMatrix<f64> {
        &self.null_basis
    }

    /// `c_i · v` for every row; `v` is zero-padded or truncated to `dim`.
    pub fn evaluate<T: Scalar>(&self, v: &[T]) -> Vec<T> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(v).fold(T::zero(), |acc, (&c, &x)| acc + x * c))
            .collect()
    }

    /// `max_i |c_i · v| / (‖c_i‖ ‖v‖)` with Euclidean norms; 0 for `v = 0`.
    pub fn max_relative_residual<T: Scalar>(&self, v: &[T]) -> f64 {
        let vnorm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            return 0.0;
        }
        self.rows
            .iter()
            .zip(self.evaluate(v))
            .map(|(r, val)| {
                let rnorm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
                val.abs() / (rnorm * vnorm)
            })
            .fold(0.0, f64::max)
    }
}

fn weighted_dot(a: &[f64], b: &[f64], weights: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(weights)
        .map(|((x, y), w)| x * y * w)
        .sum()
}

/// Orthonormal basis of `V⊥` under the weighted inner product.
///
/// Each row `c_i` is mapped to its Riesz representer `c_i / w` and the
/// representers are orthonormalised by modified Gram–Schmidt with one
/// reorthogonalisation pass.
pub fn complement_basis(c: &ConstraintSet, weights: &[f64]) -> Result<Vec<Vec<f64>>> {
    if weights.len() != c.dim() {
        return Err(Error::DimensionMismatch {
            expected: c.dim(),
            found: weights.len(),
        });
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(c.len());
    for row in c.rows() {
        let mut r: Vec<f64> = row.iter().zip(weights).map(|(x, w)| x / w).collect();
        let initial = weighted_dot(&r, &r, weights).sqrt();
        for _pass in 0..2 {
            for s in &basis {
                let p = weighted_dot(&r, s, weights);
                r.iter_mut().zip(s).for_each(|(x, y)| *x -= p * y);
            }
        }
        let norm = weighted_dot(&r, &r, weights).sqrt();
        if !(norm > RANK_TOL * initial) {
            return Err(Error::RankDeficient {
                rank: basis.len(),
                rows: c.len(),
            });
        }
        r.iter_mut().for_each(|x| *x /= norm);
        basis.push(r);
    }
    Ok(basis)
}

/// Output of the preliminary step for one operator and one constraint set.
#[derive(Clone, Debug)]
pub struct CorrectionBasis {
    /// Orthonormal basis of `V⊥`.
    pub s: Vec<Vec<f64>>,
    /// `P_V B q_i = 0`.
    pub q: Vec<Vec<f64>>,
    /// `q̃_i = s_i - q_i ∈ V`.
    pub q_tilde: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub operator_id: String,
}

impl CorrectionBasis {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Orthogonal projection onto `V`: `x - Σ (x, s_i) s_i`.
    pub fn project_to_v<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let mut out = x.to_vec();
        for s in &self.s {
            let b = weighted_product(x, s, &self.weights);
            out.iter_mut().zip(s).for_each(|(o, &y)| *o -= b * y);
        }
        out
    }

    pub(crate) fn check_operator(&self, requested: &str) -> Result<()> {
        if self.operator_id != requested {
            return Err(Error::OperatorMismatch {
                prepared: self.operator_id.clone(),
                requested: requested.to_string(),
            });
        }
        Ok(())
    }
}

fn weighted_product<T: Scalar>(x: &[T], s: &[f64], weights: &[f64]) -> T {
    x.iter()
        .zip(s)
        .zip(weights)
        .fold(T::zero(), |acc, ((&a, &b), &w)| acc + a * (b * w))
}

fn check_singular(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, name: &str) -> Result<()> {
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].abs()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if diag.is_empty() {
        return Ok(());
    }
    if !(min > RANK_TOL * max) || !max.is_finite() {
        return Err(Error::SingularOperator {
            operator: name.to_string(),
        });
    }
    Ok(())
}

/// Matrix `Φᵀ D B Φ` of `P_V B` on the null-space basis `Φ` (up to the Gram
/// factor, which does not affect the solution).
fn projected_system(c: &ConstraintSet, b: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let phi = c.null_basis();
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(weights));
    phi.transpose() * d * b * phi
}

/// Preliminary step: complement basis and its split with respect to `op`.
pub fn prepare_correction(
    c: &ConstraintSet,
    op: &dyn LinearOperator,
    weights: &[f64],
) -> Result<CorrectionBasis> {
    let n = c.dim();
    if op.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: op.dim(),
        });
    }
    let s = complement_basis(c, weights)?;
    let operator_id = op.id();
    if s.is_empty() {
        return Ok(CorrectionBasis {
            s,
            q: Vec::new(),
            q_tilde: Vec::new(),
            weights: weights.to_vec(),
            operator_id,
        });
    }
    let b = assemble(op);
    let phi = c.null_basis();
    let lu = projected_system(c, &b, weights).lu();
    check_singular(&lu, &operator_id)?;

    let d = DVector::from_column_slice(weights);
    let mut q = Vec::with_capacity(s.len());
    let mut q_tilde = Vec::with_capacity(s.len());
    for si in &s {
        let bs = &b * DVector::from_column_slice(si);
        let rhs = phi.transpose() * bs.component_mul(&d);
        let y = lu.solve(&rhs).ok_or_else(|| Error::SingularOperator {
            operator: operator_id.clone(),
        })?;
        let qt = phi * y;
        q.push(si.iter().zip(qt.iter()).map(|(a, b)| a - b).collect());
        q_tilde.push(qt.as_slice().to_vec());
    }
    Ok(CorrectionBasis {
        s,
        q,
        q_tilde,
        weights: weights.to_vec(),
        operator_id,
    })
}

/// Correction step: `v = w - Σ (w, s_i) q_i`.
pub fn correct<T: Scalar>(w: &[T], cb: &CorrectionBasis) -> Result<Vec<T>> {
    if w.len() != cb.dim() {
        return Err(Error::DimensionMismatch {
            expected: cb.dim(),
            found: w.len(),
        });
    }
    let mut v = w.to_vec();
    for (s, q) in cb.s.iter().zip(&cb.q) {
        let b = weighted_product(w, s, &cb.weights);
        v.iter_mut().zip(q).for_each(|(x, &y)| *x -= b * y);
    }
    Ok(v)
}

/// Traditional Galerkin solve on a basis of `V`; `f` is truncated or
/// zero-padded to the dimension of `W`.
pub fn galerkin_solve_dense<T: Scalar>(
    b: &DMatrix<f64>,
    c: &ConstraintSet,
    weights: &[f64],
    f: &[T],
) -> Result<Vec<T>> {
    let n = c.dim();
    if b.nrows() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.nrows(),
        });
    }
    let phi = c.null_basis();
    let lu = projected_system(c, b, weights).lu();
    check_singular(&lu, "dense Galerkin system")?;
    let mut re = DVector::zeros(n);
    let mut im = DVector::zeros(n);
    for (j, x) in f.iter().take(n).enumerate() {
        re[j] = x.re() * weights[j];
        im[j] = x.im() * weights[j];
    }
    let solve = |rhs: DVector<f64>| -> Result<DVector<f64>> {
        let y = lu
            .solve(&(phi.transpose() * rhs))
            .ok_or_else(|| Error::SingularOperator {
                operator: "dense Galerkin system".into(),
            })?;
        Ok(phi * y)
    };
    let vr = solve(re)?;
    let vi = solve(im)?;
    Ok(vr
        .iter()
        .zip(vi.iter())
        .map(|(&a, &b)| T::from_parts(a, b))
        .collect())
}

/// Real matrix `M` with `M f` equal to [`galerkin_solve_dense`] of `f`.
pub fn solution_operator(b: &DMatrix<f64>, c: &ConstraintSet, weights: &[f64]) -> Result<DMatrix<f64>> {
    let n = c.dim();
    let phi = c.null_basis();
    let lu = projected_system(c, b, weights).lu();
    check_singular(&lu, "dense Galerkin system")?;
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(weights));
    let rhs = phi.transpose() * d;
    let y = lu.solve(&rhs).ok_or_else(|| Error::SingularOperator {
        operator: "dense Galerkin system".into(),
    })?;
    let m = phi * y;
    debug_assert_eq!(m.shape(), (n, n));
    Ok(m)
}

/// Weighted norm of `P_V(B v - f)`.
pub fn galerkin_residual<T: Scalar>(
    op: &dyn LinearOperator,
    cb: &CorrectionBasis,
    v: &[T],
    f: &[T],
) -> f64 {
    let n = op.dim();
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    let vr: Vec<f64> = v.iter().map(|x| x.re()).collect();
    let vi: Vec<f64> = v.iter().map(|x| x.im()).collect();
    op.apply(&vr, &mut re);
    op.apply(&vi, &mut im);
    let r: Vec<T> = (0..n)
        .map(|j| {
            let fj = f.get(j).copied().unwrap_or_else(T::zero);
            T::from_parts(re[j], im[j]) - fj
        })
        .collect();
    let p = cb.project_to_v(&r);
    p.iter()
        .enumerate()
        .map(|(k, x)| x.norm_sqr() * weight(k))
        .sum::<f64>()
        .sqrt()
}
