//! Operator subspaces, the dual norm pair, and the linear minimization oracle.
//!
//! Three subspaces of self-adjoint operators are supported, each inducing a
//! different instance of the optimizer:
//!
//! * `Scalar`: multiples of the identity on `R^d`, norm `||x||_2 / sqrt(d)`
//!   (normalized SGD);
//! * `Diagonal`: diagonal operators on `R^d`, norm `||x||_inf` (SignSGD);
//! * `LeftMatrix`: left multipliers `X -> B X` on `R^{m x n}`, norm
//!   `||X||_op / sqrt(n)` (orthogonalized / Muon steps).
//!
//! All functions here are pure; concurrent use needs no synchronization.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{Point, Shape};

/// Relative threshold below which singular values are treated as zero when
/// orthogonalizing a matrix gradient.
pub const SVD_RANK_TOL: f64 = 1e-10;

/// One of the three supported subspaces of self-adjoint operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpace {
    Scalar { dim: usize },
    Diagonal { dim: usize },
    LeftMatrix { rows: usize, cols: usize },
}

impl OperatorSpace {
    pub fn point_shape(&self) -> Shape {
        match *self {
            OperatorSpace::Scalar { dim } | OperatorSpace::Diagonal { dim } => Shape::Vector(dim),
            OperatorSpace::LeftMatrix { rows, cols } => Shape::Matrix(rows, cols),
        }
    }

    /// Dimension of the ambient space (`d` or `m * n`).
    pub fn ambient_dim(&self) -> usize {
        match *self {
            OperatorSpace::Scalar { dim } | OperatorSpace::Diagonal { dim } => dim,
            OperatorSpace::LeftMatrix { rows, cols } => rows * cols,
        }
    }

    pub fn check_point(&self, x: &Point) -> Result<()> {
        if x.shape() != self.point_shape() {
            return Err(Error::ShapeMismatch {
                expected: self.point_shape().to_string(),
                got: x.shape().to_string(),
            });
        }
        Ok(())
    }

    /// Identity operator of this space.
    pub fn identity(&self) -> StructuredOperator {
        self.scaled_identity(1.0)
    }

    /// `s * I` as a structured operator.
    pub fn scaled_identity(&self, s: f64) -> StructuredOperator {
        let payload = match *self {
            OperatorSpace::Scalar { .. } => Payload::Scalar(s),
            OperatorSpace::Diagonal { dim } => Payload::Diagonal(DVector::from_element(dim, s)),
            OperatorSpace::LeftMatrix { rows, .. } => {
                Payload::LeftMatrix(DMatrix::identity(rows, rows) * s)
            }
        };
        StructuredOperator {
            space: *self,
            payload,
        }
    }
}

/// Parameterization of an element of the operator subspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Scalar(f64),
    Diagonal(DVector<f64>),
    LeftMatrix(DMatrix<f64>),
}

/// An element of `H ∩ S_+` (positive semidefinite; the certificate roles
/// require strict definiteness, enforced by [`StructuredOperator::positive`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredOperator {
    space: OperatorSpace,
    payload: Payload,
}

impl StructuredOperator {
    /// Builds a strictly positive definite operator; this is the constructor
    /// for the certificate roles L, M, Sigma, T and for B.
    pub fn positive(space: OperatorSpace, payload: Payload) -> Result<Self> {
        let op = Self::semidefinite(space, payload)?;
        if op.min_eig() <= 0.0 {
            return Err(Error::SingularPayload);
        }
        Ok(op)
    }

    /// Builds a positive semidefinite operator (projections may be singular).
    pub fn semidefinite(space: OperatorSpace, payload: Payload) -> Result<Self> {
        match (&space, &payload) {
            (OperatorSpace::Scalar { .. }, Payload::Scalar(_)) => {}
            (OperatorSpace::Diagonal { dim }, Payload::Diagonal(h)) => {
                if h.len() != *dim {
                    return Err(Error::ShapeMismatch {
                        expected: format!("diagonal payload of length {dim}"),
                        got: format!("length {}", h.len()),
                    });
                }
            }
            (OperatorSpace::LeftMatrix { rows, .. }, Payload::LeftMatrix(b)) => {
                if b.nrows() != *rows || b.ncols() != *rows {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{rows}x{rows} payload"),
                        got: format!("{}x{}", b.nrows(), b.ncols()),
                    });
                }
                let asym = (b - b.transpose()).amax();
                if asym > 1e-10 * (1.0 + b.amax()) {
                    return Err(Error::NonSymmetric);
                }
            }
            _ => {
                return Err(Error::ShapeMismatch {
                    expected: "payload matching the operator space".into(),
                    got: "mismatched payload kind".into(),
                })
            }
        }
        Ok(StructuredOperator { space, payload })
    }

    pub fn space(&self) -> OperatorSpace {
        self.space
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    /// Smallest eigenvalue of the payload (equals the smallest eigenvalue of
    /// the operator on the ambient space).
    pub fn min_eig(&self) -> f64 {
        match &self.payload {
            Payload::Scalar(b) => *b,
            Payload::Diagonal(h) => h.min(),
            Payload::LeftMatrix(b) => {
                let sym = (b + b.transpose()) * 0.5;
                sym.symmetric_eigenvalues().min()
            }
        }
    }

    pub fn is_positive_definite(&self) -> bool {
        self.min_eig() > 0.0
    }

    /// Nuclear norm of the operator on the ambient space. For a PSD operator
    /// this is its trace: `beta * d`, `sum h_i`, or `n * tr(B)`.
    pub fn trace_norm(&self) -> f64 {
        match (&self.space, &self.payload) {
            (OperatorSpace::Scalar { dim }, Payload::Scalar(b)) => b * *dim as f64,
            (_, Payload::Diagonal(h)) => h.sum(),
            (OperatorSpace::LeftMatrix { cols, .. }, Payload::LeftMatrix(b)) => {
                b.trace() * *cols as f64
            }
            _ => unreachable!("constructor enforces matching payload"),
        }
    }

    /// Applies the operator: `beta x`, `h ⊙ x`, or `B X`.
    pub fn apply(&self, x: &Point) -> Result<Point> {
        self.space.check_point(x)?;
        Ok(match (&self.payload, x) {
            (Payload::Scalar(b), _) => x.scale(*b),
            (Payload::Diagonal(h), Point::Vector(v)) => Point::Vector(v.component_mul(h)),
            (Payload::LeftMatrix(b), Point::Matrix(m)) => Point::Matrix(b * m),
            _ => unreachable!(),
        })
    }

    /// Applies the inverse operator; errors on a singular payload.
    pub fn apply_inv(&self, x: &Point) -> Result<Point> {
        self.space.check_point(x)?;
        if self.min_eig() <= 0.0 {
            return Err(Error::SingularPayload);
        }
        Ok(match (&self.payload, x) {
            (Payload::Scalar(b), _) => x.scale(1.0 / b),
            (Payload::Diagonal(h), Point::Vector(v)) => {
                Point::Vector(v.component_div(h))
            }
            (Payload::LeftMatrix(b), Point::Matrix(m)) => {
                let chol = b
                    .clone()
                    .cholesky()
                    .ok_or(Error::SingularPayload)?;
                Point::Matrix(chol.solve(m))
            }
            _ => unreachable!(),
        })
    }

    /// Symmetric positive square root, staying inside the subspace.
    pub fn sqrt(&self) -> Result<StructuredOperator> {
        if self.min_eig() < -1e-12 {
            return Err(Error::SingularPayload);
        }
        let payload = match &self.payload {
            Payload::Scalar(b) => Payload::Scalar(b.max(0.0).sqrt()),
            Payload::Diagonal(h) => Payload::Diagonal(h.map(|v| v.max(0.0).sqrt())),
            Payload::LeftMatrix(b) => {
                let sym = (b + b.transpose()) * 0.5;
                let eig = sym.symmetric_eigen();
                let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
                let root = &eig.eigenvectors
                    * DMatrix::from_diagonal(&sqrt_vals)
                    * eig.eigenvectors.transpose();
                Payload::LeftMatrix(root)
            }
        };
        StructuredOperator::semidefinite(self.space, payload)
    }

    /// `self + s * other` within the same space.
    pub fn axpy(&self, s: f64, other: &StructuredOperator) -> Result<StructuredOperator> {
        if self.space != other.space {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.space),
                got: format!("{:?}", other.space),
            });
        }
        let payload = match (&self.payload, &other.payload) {
            (Payload::Scalar(a), Payload::Scalar(b)) => Payload::Scalar(a + s * b),
            (Payload::Diagonal(a), Payload::Diagonal(b)) => Payload::Diagonal(a + b * s),
            (Payload::LeftMatrix(a), Payload::LeftMatrix(b)) => Payload::LeftMatrix(a + b * s),
            _ => unreachable!(),
        };
        StructuredOperator::semidefinite(self.space, payload)
    }

    pub fn scale(&self, s: f64) -> StructuredOperator {
        let payload = match &self.payload {
            Payload::Scalar(b) => Payload::Scalar(b * s),
            Payload::Diagonal(h) => Payload::Diagonal(h * s),
            Payload::LeftMatrix(b) => Payload::LeftMatrix(b * s),
        };
        StructuredOperator {
            space: self.space,
            payload,
        }
    }

    /// Dense representation on the flattened ambient space (column-major for
    /// matrix points). Only intended for desk-scale verification.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.space.ambient_dim();
        match (&self.space, &self.payload) {
            (_, Payload::Scalar(b)) => DMatrix::identity(n, n) * *b,
            (_, Payload::Diagonal(h)) => DMatrix::from_diagonal(h),
            (OperatorSpace::LeftMatrix { rows, cols }, Payload::LeftMatrix(b)) => {
                let (m, nc) = (*rows, *cols);
                let mut dense = DMatrix::zeros(n, n);
                for j in 0..nc {
                    for a in 0..m {
                        for c in 0..m {
                            dense[(a + j * m, c + j * m)] = b[(a, c)];
                        }
                    }
                }
                dense
            }
            _ => unreachable!(),
        }
    }
}

/// Orthogonal projection of the rank-1 outer square `x <x, .>` onto the
/// subspace. The result is positive semidefinite; its operator norm square
/// root gives `R(x)` and its nuclear norm square root gives `R*(x)`.
pub fn project_rank1(space: OperatorSpace, x: &Point) -> Result<StructuredOperator> {
    space.check_point(x)?;
    let payload = match (space, x) {
        (OperatorSpace::Scalar { dim }, Point::Vector(v)) => {
            Payload::Scalar(v.norm_squared() / dim as f64)
        }
        (OperatorSpace::Diagonal { .. }, Point::Vector(v)) => {
            Payload::Diagonal(v.map(|t| t * t))
        }
        (OperatorSpace::LeftMatrix { cols, .. }, Point::Matrix(m)) => {
            Payload::LeftMatrix(m * m.transpose() / cols as f64)
        }
        _ => unreachable!(),
    };
    StructuredOperator::semidefinite(space, payload)
}

/// Orthogonal projection of a dense symmetric operator onto the subspace.
///
/// The dense operator acts on the flattened ambient space (column-major for
/// matrix points). Defined only at desk scale for the matrix case
/// (`m * n <= 64`).
pub fn project_general(space: OperatorSpace, dense: &DMatrix<f64>) -> Result<StructuredOperator> {
    let n = space.ambient_dim();
    if dense.nrows() != n || dense.ncols() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n}x{n} dense operator"),
            got: format!("{}x{}", dense.nrows(), dense.ncols()),
        });
    }
    let asym = (dense - dense.transpose()).amax();
    if asym > 1e-10 * (1.0 + dense.amax()) {
        return Err(Error::NonSymmetric);
    }
    let payload = match space {
        OperatorSpace::Scalar { dim } => Payload::Scalar(dense.trace() / dim as f64),
        OperatorSpace::Diagonal { .. } => Payload::Diagonal(dense.diagonal()),
        OperatorSpace::LeftMatrix { rows, cols } => {
            if rows * cols > 64 {
                return Err(Error::InvalidParameter(
                    "project_general on LeftMatrix is defined only for m*n <= 64".into(),
                ));
            }
            // Partial trace over the column blocks, divided by n.
            let mut b = DMatrix::zeros(rows, rows);
            for j in 0..cols {
                for a in 0..rows {
                    for c in 0..rows {
                        b[(a, c)] += dense[(a + j * rows, c + j * rows)];
                    }
                }
            }
            Payload::LeftMatrix(b / cols as f64)
        }
    };
    StructuredOperator::semidefinite(space, payload)
}

/// The primal norm `R(x)`: operator norm of the square root of the projected
/// outer square. Closed forms per space.
pub fn norm_r(space: OperatorSpace, x: &Point) -> Result<f64> {
    space.check_point(x)?;
    Ok(match (space, x) {
        (OperatorSpace::Scalar { dim }, Point::Vector(v)) => v.norm() / (dim as f64).sqrt(),
        (OperatorSpace::Diagonal { .. }, Point::Vector(v)) => v.amax(),
        (OperatorSpace::LeftMatrix { cols, .. }, Point::Matrix(m)) => {
            let sv = m.clone().singular_values();
            sv.max() / (cols as f64).sqrt()
        }
        _ => unreachable!(),
    })
}

/// The dual norm `R*(x)`: nuclear norm of the square root of the projected
/// outer square. Satisfies `sup_{R(y) <= 1} <x, y> = R*(x)`.
pub fn norm_r_star(space: OperatorSpace, x: &Point) -> Result<f64> {
    space.check_point(x)?;
    Ok(match (space, x) {
        (OperatorSpace::Scalar { dim }, Point::Vector(v)) => v.norm() * (dim as f64).sqrt(),
        (OperatorSpace::Diagonal { .. }, Point::Vector(v)) => v.iter().map(|t| t.abs()).sum(),
        (OperatorSpace::LeftMatrix { cols, .. }, Point::Matrix(m)) => {
            let sv = m.clone().singular_values();
            sv.sum() * (cols as f64).sqrt()
        }
        _ => unreachable!(),
    })
}

/// Linear minimization oracle over the unit `R`-ball:
/// `lmo(g) = argmax { <g, u> : R(u) <= 1 }`, with `lmo(0) = 0` by convention.
///
/// Closed forms: `sqrt(d) g / ||g||_2` (Scalar), entrywise sign with
/// `sign(0) = 0` (Diagonal), `sqrt(n) U V^T` from the rank-truncated SVD
/// (LeftMatrix).
pub fn lmo(space: OperatorSpace, g: &Point) -> Result<Point> {
    space.check_point(g)?;
    Ok(match (space, g) {
        (OperatorSpace::Scalar { dim }, Point::Vector(v)) => {
            let norm = v.norm();
            if norm == 0.0 {
                g.zeros_like()
            } else {
                Point::Vector(v * ((dim as f64).sqrt() / norm))
            }
        }
        (OperatorSpace::Diagonal { .. }, Point::Vector(v)) => {
            Point::Vector(v.map(|t| {
                if t > 0.0 {
                    1.0
                } else if t < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }))
        }
        (OperatorSpace::LeftMatrix { cols, .. }, Point::Matrix(m)) => {
            let svd = m.clone().svd(true, true);
            let u = svd.u.as_ref().expect("svd with u");
            let v_t = svd.v_t.as_ref().expect("svd with v_t");
            let smax = svd.singular_values.max();
            if smax == 0.0 {
                return Ok(g.zeros_like());
            }
            let mut out = DMatrix::zeros(m.nrows(), m.ncols());
            for (i, &s) in svd.singular_values.iter().enumerate() {
                if s > SVD_RANK_TOL * smax {
                    out += u.column(i) * v_t.row(i);
                }
            }
            Point::Matrix(out * (cols as f64).sqrt())
        }
        _ => unreachable!(),
    })
}

/// Weighted squared norm `<x, H x>` (or `<x, H^{-1} x>` with `inverse`).
pub fn weighted_sqnorm(h: &StructuredOperator, x: &Point, inverse: bool) -> Result<f64> {
    let hx = if inverse {
        h.apply_inv(x)?
    } else {
        h.apply(x)?
    };
    x.dot(&hx)
}

/// Trace norm of a structured operator (free-function alias).
pub fn trace_norm(h: &StructuredOperator) -> f64 {
    h.trace_norm()
}

/// The trace-normalized convex combination
/// `B = (1/4) sum_H H / trace_norm(H)` over `H in {L, M, Sigma, T}`.
/// The result has unit trace norm.
pub fn combine_b(
    l: &StructuredOperator,
    m: &StructuredOperator,
    sigma: &StructuredOperator,
    t: &StructuredOperator,
) -> Result<StructuredOperator> {
    let parts = [l, m, sigma, t];
    let space = l.space();
    let mut acc = space.scaled_identity(0.0);
    for h in parts {
        if h.space() != space {
            return Err(Error::ShapeMismatch {
                expected: format!("{space:?}"),
                got: format!("{:?}", h.space()),
            });
        }
        let tn = h.trace_norm();
        if !(tn > 0.0) {
            return Err(Error::SingularPayload);
        }
        acc = acc.axpy(0.25 / tn, h)?;
    }
    StructuredOperator::positive(space, acc.payload)
}

/// Standard Gaussian point of the space's shape.
pub fn sample_gaussian_point<R: Rng>(space: OperatorSpace, rng: &mut R) -> Point {
    match space.point_shape() {
        Shape::Vector(d) => Point::Vector(DVector::from_fn(d, |_, _| rng.sample(StandardNormal))),
        Shape::Matrix(m, n) => {
            Point::Matrix(DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal)))
        }
    }
}

/// Random strictly positive definite element of the subspace, with payload
/// eigenvalues in roughly `[0.1, 2.1]`.
pub fn sample_pd_operator<R: Rng>(space: OperatorSpace, rng: &mut R) -> StructuredOperator {
    let payload = match space {
        OperatorSpace::Scalar { .. } => Payload::Scalar(0.1 + 2.0 * rng.gen::<f64>()),
        OperatorSpace::Diagonal { dim } => {
            Payload::Diagonal(DVector::from_fn(dim, |_, _| 0.1 + 2.0 * rng.gen::<f64>()))
        }
        OperatorSpace::LeftMatrix { rows, .. } => {
            let a = DMatrix::from_fn(rows, rows, |_, _| rng.sample::<f64, _>(StandardNormal));
            let b = &a * a.transpose() / rows as f64 + DMatrix::identity(rows, rows) * 0.1;
            Payload::LeftMatrix(b)
        }
    };
    StructuredOperator::positive(space, payload).expect("construction is positive definite")
}

/// Random point on or inside the unit `R`-ball: a Gaussian direction scaled
/// to `R`-norm `radius_fraction`.
pub fn sample_ball_point<R: Rng>(
    space: OperatorSpace,
    radius_fraction: f64,
    rng: &mut R,
) -> Point {
    let g = sample_gaussian_point(space, rng);
    let r = norm_r(space, &g).expect("shape matches");
    if r == 0.0 {
        g
    } else {
        g.scale(radius_fraction / r)
    }
}
