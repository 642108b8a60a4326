//! Points of the ambient space: vectors in `R^d` or matrices in `R^{m x n}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An element of the ambient Euclidean space, either a vector or a matrix.
///
/// Binary operations require identical shapes; all entries must stay finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Point {
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
}

impl Point {
    pub fn vector(entries: impl Into<Vec<f64>>) -> Self {
        Point::Vector(DVector::from_vec(entries.into()))
    }

    pub fn matrix(rows: usize, cols: usize, row_major: &[f64]) -> Self {
        Point::Matrix(DMatrix::from_row_slice(rows, cols, row_major))
    }

    pub fn zeros_like(&self) -> Self {
        match self {
            Point::Vector(v) => Point::Vector(DVector::zeros(v.len())),
            Point::Matrix(m) => Point::Matrix(DMatrix::zeros(m.nrows(), m.ncols())),
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            Point::Vector(v) => Shape::Vector(v.len()),
            Point::Matrix(m) => Shape::Matrix(m.nrows(), m.ncols()),
        }
    }

    /// Total number of scalar coordinates (`d` or `m * n`).
    pub fn dim(&self) -> usize {
        match self {
            Point::Vector(v) => v.len(),
            Point::Matrix(m) => m.nrows() * m.ncols(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        match self {
            Point::Vector(v) => Iter::Vector(v.iter()),
            Point::Matrix(m) => Iter::Matrix(m.iter()),
        }
    }

    pub fn dot(&self, other: &Point) -> Result<f64> {
        check_same_shape(self, other)?;
        Ok(match (self, other) {
            (Point::Vector(a), Point::Vector(b)) => a.dot(b),
            (Point::Matrix(a), Point::Matrix(b)) => a.dot(b),
            _ => unreachable!(),
        })
    }

    pub fn norm2(&self) -> f64 {
        match self {
            Point::Vector(v) => v.norm(),
            Point::Matrix(m) => m.norm(),
        }
    }

    pub fn scale(&self, s: f64) -> Point {
        match self {
            Point::Vector(v) => Point::Vector(v * s),
            Point::Matrix(m) => Point::Matrix(m * s),
        }
    }

    pub fn add(&self, other: &Point) -> Result<Point> {
        check_same_shape(self, other)?;
        Ok(match (self, other) {
            (Point::Vector(a), Point::Vector(b)) => Point::Vector(a + b),
            (Point::Matrix(a), Point::Matrix(b)) => Point::Matrix(a + b),
            _ => unreachable!(),
        })
    }

    pub fn sub(&self, other: &Point) -> Result<Point> {
        check_same_shape(self, other)?;
        Ok(match (self, other) {
            (Point::Vector(a), Point::Vector(b)) => Point::Vector(a - b),
            (Point::Matrix(a), Point::Matrix(b)) => Point::Matrix(a - b),
            _ => unreachable!(),
        })
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Point) -> Result<Point> {
        self.add(&other.scale(s))
    }

    pub fn as_vector(&self) -> Option<&DVector<f64>> {
        match self {
            Point::Vector(v) => Some(v),
            Point::Matrix(_) => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            Point::Matrix(m) => Some(m),
            Point::Vector(_) => None,
        }
    }

    /// Column-major flattening, matching the dense-operator representation
    /// used by [`crate::geometry::project_general`].
    pub fn flatten(&self) -> DVector<f64> {
        match self {
            Point::Vector(v) => v.clone(),
            Point::Matrix(m) => DVector::from_column_slice(m.as_slice()),
        }
    }
}

enum Iter<'a> {
    Vector(nalgebra::base::iter::MatrixIter<'a, f64, nalgebra::Dyn, nalgebra::U1, nalgebra::VecStorage<f64, nalgebra::Dyn, nalgebra::U1>>),
    Matrix(nalgebra::base::iter::MatrixIter<'a, f64, nalgebra::Dyn, nalgebra::Dyn, nalgebra::VecStorage<f64, nalgebra::Dyn, nalgebra::Dyn>>),
}

impl Iterator for Iter<'_> {
    type Item = f64;
    fn next(&mut self) -> Option<f64> {
        match self {
            Iter::Vector(it) => it.next().copied(),
            Iter::Matrix(it) => it.next().copied(),
        }
    }
}

/// Shape of a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Vector(usize),
    Matrix(usize, usize),
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shape::Vector(d) => write!(f, "vector({d})"),
            Shape::Matrix(m, n) => write!(f, "matrix({m}x{n})"),
        }
    }
}

pub(crate) fn check_same_shape(a: &Point, b: &Point) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            expected: a.shape().to_string(),
            got: b.shape().to_string(),
        });
    }
    Ok(())
}
