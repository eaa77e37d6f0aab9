//! Implicit space separation between the two superquadrics of a pair, and
//! the derived child label sets.
//!
//! Inside the union of the pair a point goes to the superquadric with the
//! larger `F^ε₁`; a point inside exactly one of them goes to that one.
//! Outside both, the smaller radial distance wins. Ties go to `A`.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::superquadric::Superquadric;

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("label count {labels} does not match assignment length {assignment}")]
    LengthMismatch { labels: usize, assignment: usize },
    #[error("slice resolution must be at least 2x2, got {0}x{1}")]
    Resolution(usize, usize),
    #[error("slice range must be finite and non-empty")]
    Range,
}

/// Which superquadric of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::A => "A",
            Side::B => "B",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment(Vec<Side>);

impl SplitAssignment {
    pub fn new(sides: Vec<Side>) -> Self {
        Self(sides)
    }

    pub fn sides(&self) -> &[Side] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Assigns one point to a side of the pair.
pub fn assign_point(sq_a: &Superquadric, sq_b: &Superquadric, x: &Vector3<f64>) -> Side {
    let fa = sq_a.inside_outside_stable(x);
    let fb = sq_b.inside_outside_stable(x);
    match (fa < 1.0, fb < 1.0) {
        (true, false) => Side::A,
        (false, true) => Side::B,
        (true, true) => {
            if fb > fa {
                Side::B
            } else {
                Side::A
            }
        }
        (false, false) => {
            if sq_b.radial_distance(x) < sq_a.radial_distance(x) {
                Side::B
            } else {
                Side::A
            }
        }
    }
}

pub fn split_pair(sq_a: &Superquadric, sq_b: &Superquadric, points: &[Vector3<f64>]) -> SplitAssignment {
    SplitAssignment(points.par_iter().map(|x| assign_point(sq_a, sq_b, x)).collect())
}

/// Parent labels restricted to the region assigned to `which`.
pub fn child_labels(parent: &[bool], assignment: &SplitAssignment, which: Side) -> Result<Vec<bool>, SplitError> {
    if parent.len() != assignment.len() {
        return Err(SplitError::LengthMismatch {
            labels: parent.len(),
            assignment: assignment.len(),
        });
    }
    Ok(parent
        .iter()
        .zip(assignment.sides())
        .map(|(&l, &s)| l && s == which)
        .collect())
}

/// Coordinate plane of a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Plane {
    Xy,
    Xz,
    Yz,
}

impl FromStr for Plane {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "xy" => Ok(Plane::Xy),
            "xz" => Ok(Plane::Xz),
            "yz" => Ok(Plane::Yz),
            other => Err(format!("unknown plane {other:?}, expected xy, xz or yz")),
        }
    }
}

/// Regular grid on an axis-aligned plane. `u` and `v` are the two in-plane
/// coordinates in axis order; `offset` is the value of the third axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slice {
    pub plane: Plane,
    pub offset: f64,
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    pub width: usize,
    pub height: usize,
}

impl Slice {
    pub fn square(plane: Plane, offset: f64, half_extent: f64, resolution: usize) -> Self {
        Self {
            plane,
            offset,
            u_range: (-half_extent, half_extent),
            v_range: (-half_extent, half_extent),
            width: resolution,
            height: resolution,
        }
    }

    fn validate(&self) -> Result<(), SplitError> {
        if self.width < 2 || self.height < 2 {
            return Err(SplitError::Resolution(self.width, self.height));
        }
        let ok = [self.u_range.0, self.u_range.1, self.v_range.0, self.v_range.1, self.offset]
            .iter()
            .all(|v| v.is_finite())
            && self.u_range.1 > self.u_range.0
            && self.v_range.1 > self.v_range.0;
        if ok {
            Ok(())
        } else {
            Err(SplitError::Range)
        }
    }

    pub fn coords(&self, col: usize, row: usize) -> (f64, f64) {
        let lerp = |(lo, hi): (f64, f64), k: usize, n: usize| lo + (hi - lo) * k as f64 / (n - 1) as f64;
        (lerp(self.u_range, col, self.width), lerp(self.v_range, row, self.height))
    }

    pub fn point(&self, u: f64, v: f64) -> Vector3<f64> {
        match self.plane {
            Plane::Xy => Vector3::new(u, v, self.offset),
            Plane::Xz => Vector3::new(u, self.offset, v),
            Plane::Yz => Vector3::new(self.offset, u, v),
        }
    }
}

/// Both implicit fields of a pair at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub u: f64,
    pub v: f64,
    /// `F^ε₁` of each superquadric
    pub f_a: f64,
    pub f_b: f64,
    /// radial distances
    pub d_a: f64,
    pub d_b: f64,
    /// combined rule of [`assign_point`]
    pub side: Side,
}

impl FieldSample {
    /// Split using `argmax F^ε₁` everywhere.
    pub fn side_by_stable(&self) -> Side {
        if self.f_b > self.f_a {
            Side::B
        } else {
            Side::A
        }
    }

    /// Split using `argmin d` everywhere.
    pub fn side_by_radial(&self) -> Side {
        if self.d_b < self.d_a {
            Side::B
        } else {
            Side::A
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitField {
    pub slice: Slice,
    /// Row-major: `v` outer, `u` inner.
    pub samples: Vec<FieldSample>,
}

pub fn split_field_2d(sq_a: &Superquadric, sq_b: &Superquadric, slice: &Slice) -> Result<SplitField, SplitError> {
    slice.validate()?;
    let samples = (0..slice.width * slice.height)
        .into_par_iter()
        .map(|k| {
            let (u, v) = slice.coords(k % slice.width, k / slice.width);
            let x = slice.point(u, v);
            FieldSample {
                u,
                v,
                f_a: sq_a.inside_outside_stable(&x),
                f_b: sq_b.inside_outside_stable(&x),
                d_a: sq_a.radial_distance(&x),
                d_b: sq_b.radial_distance(&x),
                side: assign_point(sq_a, sq_b, &x),
            }
        })
        .collect();
    Ok(SplitField { slice: *slice, samples })
}
