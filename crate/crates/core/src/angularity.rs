//! The angularity data model: vertices, ordered angle triplets and a
//! planar embedding.
//!
//! Vertex ids are zero-based in the library. The JSON formats in [`crate::io`]
//! use one-based ids.

use std::f64::consts::TAU;
use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::{circular_distance, signed_angle, Point, COINCIDENCE_EPS};

/// Default tolerance for equivalence and congruence checks, in radians.
pub const DEFAULT_ANGLE_TOL: f64 = 1e-6;

/// The signed angle `∠ijk` at vertex `j`, optionally carrying a target value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleTriplet {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub target: Option<f64>,
}

impl AngleTriplet {
    pub fn new(i: usize, j: usize, k: usize) -> Self {
        Self {
            i,
            j,
            k,
            target: None,
        }
    }

    pub fn with_target(mut self, target: f64) -> Self {
        self.target = Some(target);
        self
    }

    pub fn vertices(&self) -> [usize; 3] {
        [self.i, self.j, self.k]
    }

    pub fn contains(&self, v: usize) -> bool {
        self.i == v || self.j == v || self.k == v
    }

    /// Same ordered vertex triple, ignoring any target.
    pub fn same_corner(&self, other: &AngleTriplet) -> bool {
        self.vertices() == other.vertices()
    }

    /// `(i,j,k)` versus `(k,j,i)`.
    pub fn is_explementary_to(&self, other: &AngleTriplet) -> bool {
        self.i == other.k && self.j == other.j && self.k == other.i
    }

    pub fn evaluate(&self, positions: &[Point]) -> Result<f64> {
        signed_angle(&positions[self.i], &positions[self.j], &positions[self.k])
    }
}

impl fmt::Display for AngleTriplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.i + 1, self.j + 1, self.k + 1)
    }
}

/// Values of the angle function, ordered as the angle set.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleVector(Vec<f64>);

impl AngleVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for AngleVector {
    type Output = f64;
    fn index(&self, m: usize) -> &f64 {
        &self.0[m]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ValidationIssue {
    TooFewVertices(usize),
    NonFinitePosition(usize),
    CoincidentPoints(usize, usize),
    IndexOutOfRange { triplet: usize },
    RepeatedVertex { triplet: usize },
    TargetOutOfRange { triplet: usize, value: f64 },
    DuplicateTriplet(usize, usize),
    ExplementaryPair(usize, usize),
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ValidationIssue::*;
        match self {
            TooFewVertices(n) => write!(f, "angularity needs at least 3 vertices, got {n}"),
            NonFinitePosition(v) => write!(f, "vertex {} has a non-finite position", v + 1),
            CoincidentPoints(a, b) => write!(f, "vertices {} and {} coincide", a + 1, b + 1),
            IndexOutOfRange { triplet } => {
                write!(f, "angle {} references a missing vertex", triplet + 1)
            }
            RepeatedVertex { triplet } => write!(f, "angle {} repeats a vertex", triplet + 1),
            TargetOutOfRange { triplet, value } => {
                write!(f, "angle {} target {value} is outside [0, 2π)", triplet + 1)
            }
            DuplicateTriplet(a, b) => write!(f, "angles {} and {} are identical", a + 1, b + 1),
            ExplementaryPair(a, b) => write!(f, "angles {} and {} are explementary", a + 1, b + 1),
        }
    }
}

/// Checks every structural invariant; an empty report means the parts form
/// a valid angularity.
pub fn validate(positions: &[Point], angles: &[AngleTriplet]) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    let n = positions.len();
    if n < 3 {
        issues.push(ValidationIssue::TooFewVertices(n));
    }
    for (v, p) in positions.iter().enumerate() {
        if !(p.x.is_finite() && p.y.is_finite()) {
            issues.push(ValidationIssue::NonFinitePosition(v));
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            if (positions[a] - positions[b]).norm() < COINCIDENCE_EPS {
                issues.push(ValidationIssue::CoincidentPoints(a, b));
            }
        }
    }
    for (m, t) in angles.iter().enumerate() {
        if t.vertices().iter().any(|&v| v >= n) {
            issues.push(ValidationIssue::IndexOutOfRange { triplet: m });
        }
        if t.i == t.j || t.j == t.k || t.i == t.k {
            issues.push(ValidationIssue::RepeatedVertex { triplet: m });
        }
        if let Some(value) = t.target {
            if !(0.0..TAU).contains(&value) {
                issues.push(ValidationIssue::TargetOutOfRange { triplet: m, value });
            }
        }
        for (o, u) in angles.iter().enumerate().skip(m + 1) {
            if t.same_corner(u) {
                issues.push(ValidationIssue::DuplicateTriplet(m, o));
            } else if t.is_explementary_to(u) {
                issues.push(ValidationIssue::ExplementaryPair(m, o));
            }
        }
    }
    issues
}

/// A vertex set, an angle set and an embedding of the vertices in the plane.
#[derive(Clone, Debug, PartialEq)]
pub struct Angularity {
    positions: Vec<Point>,
    angles: Vec<AngleTriplet>,
}

impl Angularity {
    pub fn new(positions: Vec<Point>, angles: Vec<AngleTriplet>) -> Result<Self> {
        let issues = validate(&positions, &angles);
        if !issues.is_empty() {
            return Err(Error::Invalid(issues));
        }
        Ok(Self { positions, angles })
    }

    /// Uses the realized angles as targets for every triplet without one.
    pub fn with_realized_targets(mut self) -> Result<Self> {
        for t in &mut self.angles {
            if t.target.is_none() {
                t.target = Some(t.evaluate(&self.positions)?);
            }
        }
        Ok(self)
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn angle_count(&self) -> usize {
        self.angles.len()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn angles(&self) -> &[AngleTriplet] {
        &self.angles
    }

    /// Same structure, new embedding.
    pub fn with_positions(&self, positions: Vec<Point>) -> Result<Self> {
        Self::new(positions, self.angles.clone())
    }

    /// Applies `f` to every position.
    pub fn map_positions(&self, f: impl Fn(&Point) -> Point) -> Result<Self> {
        self.with_positions(self.positions.iter().map(f).collect())
    }

    pub(crate) fn push_vertex(&mut self, p: Point, new_angles: &[AngleTriplet]) -> Result<()> {
        let mut positions = self.positions.clone();
        positions.push(p);
        let mut angles = self.angles.clone();
        angles.extend_from_slice(new_angles);
        *self = Self::new(positions, angles)?;
        Ok(())
    }

    pub fn angle_function(&self) -> Result<AngleVector> {
        self.angles
            .iter()
            .map(|t| t.evaluate(&self.positions))
            .collect::<Result<Vec<_>>>()
            .map(AngleVector)
    }

    /// Largest circular deviation of a realized angle from its target.
    pub fn max_target_error(&self) -> Result<f64> {
        let values = self.angle_function()?;
        Ok(self
            .angles
            .iter()
            .zip(values.values())
            .filter_map(|(t, v)| t.target.map(|b| circular_distance(*v, b)))
            .fold(0.0, f64::max))
    }
}

/// Every constrained angle agrees within `tol` on the circle.
pub fn is_equivalent(a: &Angularity, b: &Angularity, tol: f64) -> Result<bool> {
    if a.vertex_count() != b.vertex_count() {
        return Err(Error::MismatchedStructure(format!(
            "{} vs {} vertices",
            a.vertex_count(),
            b.vertex_count()
        )));
    }
    if a.angle_count() != b.angle_count()
        || a.angles
            .iter()
            .zip(&b.angles)
            .any(|(s, t)| !s.same_corner(t))
    {
        return Err(Error::MismatchedStructure("angle sets differ".into()));
    }
    let fa = a.angle_function()?;
    let fb = b.angle_function()?;
    Ok(fa
        .values()
        .iter()
        .zip(fb.values())
        .all(|(x, y)| circular_distance(*x, *y) <= tol))
}

/// Largest circular difference over all `N(N−1)(N−2)` ordered triples.
pub fn max_triple_deviation(a: &Angularity, b: &Angularity) -> Result<f64> {
    let n = a.vertex_count();
    if n != b.vertex_count() {
        return Err(Error::MismatchedStructure(format!(
            "{} vs {} vertices",
            n,
            b.vertex_count()
        )));
    }
    let (pa, pb) = (a.positions(), b.positions());
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i == j || j == k || i == k {
                    continue;
                }
                let x = signed_angle(&pa[i], &pa[j], &pa[k])?;
                let y = signed_angle(&pb[i], &pb[j], &pb[k])?;
                worst = worst.max(circular_distance(x, y));
            }
        }
    }
    Ok(worst)
}

pub fn is_congruent(a: &Angularity, b: &Angularity, tol: f64) -> Result<bool> {
    Ok(max_triple_deviation(a, b)? <= tol)
}
