//! Angle rigidity matrix, trivial motions, numerical rank and the
//! infinitesimal rigidity classification.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::angularity::{AngleTriplet, Angularity};
use crate::dependency::{detect_dependent_structures, DependencyFinding, DetectOptions};
use crate::error::{Error, Result};
use crate::geometry::{corner_sine, perp, Point, COINCIDENCE_EPS};

/// Sine threshold below which a constrained corner counts as collinear for
/// the genericity surrogate.
pub const GENERIC_SINE_EPS: f64 = 1e-6;

/// Dense `M × 2N` matrix; columns are vertex-major, `x` then `y`.
#[derive(Clone, Debug)]
pub struct RigidityMatrix {
    pub entries: DMatrix<f64>,
    pub rows: Vec<AngleTriplet>,
}

impl RigidityMatrix {
    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    /// The 2-vector block of row `r` at `vertex`.
    pub fn block(&self, r: usize, vertex: usize) -> Point {
        Point::new(
            self.entries[(r, 2 * vertex)],
            self.entries[(r, 2 * vertex + 1)],
        )
    }
}

/// `((p_i − p_j)^⊥ / l_ij²)`.
fn normal_block(pi: &Point, pj: &Point) -> Result<Point> {
    let d = pi - pj;
    let l2 = d.norm_squared();
    if l2.sqrt() < COINCIDENCE_EPS {
        return Err(Error::CoincidentPoints);
    }
    Ok(perp(&d) / l2)
}

/// Row `(i,j,k)` carries `N_ij` at `i`, `N_ji + N_kj` at `j` and `N_jk` at `k`.
///
/// Each row equals minus the gradient of the signed angle `∠ijk`.
pub fn rigidity_matrix(a: &Angularity) -> Result<RigidityMatrix> {
    let p = a.positions();
    let mut entries = DMatrix::zeros(a.angle_count(), 2 * a.vertex_count());
    for (r, t) in a.angles().iter().enumerate() {
        let (pi, pj, pk) = (&p[t.i], &p[t.j], &p[t.k]);
        let n_ij = normal_block(pi, pj)?;
        let n_kj = normal_block(pk, pj)?;
        let blocks = [(t.i, n_ij), (t.j, -n_ij + n_kj), (t.k, -n_kj)];
        for (v, b) in blocks {
            entries[(r, 2 * v)] += b.x;
            entries[(r, 2 * v + 1)] += b.y;
        }
    }
    Ok(RigidityMatrix {
        entries,
        rows: a.angles().to_vec(),
    })
}

/// Translations, rotation and scaling stacked as `2N` vectors.
#[derive(Clone, Debug)]
pub struct TrivialMotionBasis {
    pub translation_x: DVector<f64>,
    pub translation_y: DVector<f64>,
    pub rotation: DVector<f64>,
    pub scaling: DVector<f64>,
}

impl TrivialMotionBasis {
    pub fn vectors(&self) -> [&DVector<f64>; 4] {
        [
            &self.translation_x,
            &self.translation_y,
            &self.rotation,
            &self.scaling,
        ]
    }
}

/// The rotation generator stacks `Q₀ p_i` with `Q₀ = [[0, 1], [−1, 0]]`;
/// scaling uses factor one.
pub fn trivial_motion_basis(positions: &[Point]) -> TrivialMotionBasis {
    let n = positions.len();
    let mut q1 = DVector::zeros(2 * n);
    let mut q2 = DVector::zeros(2 * n);
    let mut q3 = DVector::zeros(2 * n);
    let mut q4 = DVector::zeros(2 * n);
    for (v, p) in positions.iter().enumerate() {
        q1[2 * v] = 1.0;
        q2[2 * v + 1] = 1.0;
        q3[2 * v] = p.y;
        q3[2 * v + 1] = -p.x;
        q4[2 * v] = p.x;
        q4[2 * v + 1] = p.y;
    }
    TrivialMotionBasis {
        translation_x: q1,
        translation_y: q2,
        rotation: q3,
        scaling: q4,
    }
}

/// Largest `‖B q‖ / (‖B‖ ‖q‖)` over the four trivial motions, Frobenius norms.
pub fn trivial_motion_residual(b: &RigidityMatrix, positions: &[Point]) -> f64 {
    let basis = trivial_motion_basis(positions);
    let bn = b.entries.norm();
    if bn == 0.0 {
        return 0.0;
    }
    basis
        .vectors()
        .iter()
        .filter(|q| q.norm() > 0.0)
        .map(|q| (&b.entries * *q).norm() / (bn * q.norm()))
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RankTolerance {
    /// `τ = σ_max · max(rows, cols) · ε · safety`.
    Relative {
        safety: f64,
    },
    Absolute(f64),
}

impl Default for RankTolerance {
    fn default() -> Self {
        RankTolerance::Relative { safety: 1e3 }
    }
}

impl RankTolerance {
    pub fn threshold(&self, sigma_max: f64, rows: usize, cols: usize) -> f64 {
        match *self {
            RankTolerance::Relative { safety } => {
                sigma_max * rows.max(cols) as f64 * f64::EPSILON * safety
            }
            RankTolerance::Absolute(t) => t,
        }
    }
}

pub fn singular_values(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure(
            "matrix has non-finite entries".into(),
        ));
    }
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    m.clone()
        .try_svd(false, false, f64::EPSILON, 10_000)
        .map(|svd| svd.singular_values)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))
}

pub fn numerical_rank(m: &DMatrix<f64>, tol: RankTolerance) -> Result<usize> {
    let sv = singular_values(m)?;
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    let tau = tol.threshold(sigma_max, m.nrows(), m.ncols());
    Ok(sv.iter().filter(|&&s| s > tau).count())
}

#[derive(Clone, Debug, Serialize)]
pub struct RigidityReport {
    pub rank: usize,
    pub max_rank: usize,
    pub infinitesimally_rigid: bool,
    pub minimally_rigid: bool,
    pub independent_angles: bool,
    pub nullspace_dim: usize,
    pub dependency_findings: Vec<DependencyFinding>,
    pub min_involvement: usize,
    /// Every constrained corner passes the collinearity surrogate.
    pub generic: bool,
    pub trivial_motion_residual: f64,
    /// False when the subset enumeration was skipped for budget reasons.
    pub subset_search_complete: bool,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ClassifyOptions {
    pub rank_tolerance: RankTolerance,
    pub detect: DetectOptions,
}

pub fn classify(a: &Angularity) -> Result<RigidityReport> {
    classify_with(a, &ClassifyOptions::default())
}

pub fn classify_with(a: &Angularity, opts: &ClassifyOptions) -> Result<RigidityReport> {
    let b = rigidity_matrix(a)?;
    let rank = numerical_rank(&b.entries, opts.rank_tolerance)?;
    let n = a.vertex_count();
    let m = a.angle_count();
    let max_rank = 2 * n - 4;
    let values = a.angle_function()?;
    let (dependency_findings, subset_search_complete) =
        match detect_dependent_structures(a.angles(), n, Some(values.values()), &opts.detect) {
            Ok(f) => (f, true),
            Err(Error::SubsetSearchBudgetExceeded { partial, .. }) => (partial, false),
            Err(e) => return Err(e),
        };
    let infinitesimally_rigid = rank == max_rank;
    Ok(RigidityReport {
        rank,
        max_rank,
        infinitesimally_rigid,
        minimally_rigid: infinitesimally_rigid && m == max_rank,
        independent_angles: rank == m,
        nullspace_dim: 2 * n - rank,
        dependency_findings,
        min_involvement: min_constraint_involvement(a),
        generic: is_generic(a),
        trivial_motion_residual: trivial_motion_residual(&b, a.positions()),
        subset_search_complete,
    })
}

/// Smallest number of triplets any single vertex takes part in.
pub fn min_constraint_involvement(a: &Angularity) -> usize {
    let mut counts = vec![0usize; a.vertex_count()];
    for t in a.angles() {
        for v in t.vertices() {
            counts[v] += 1;
        }
    }
    counts.into_iter().min().unwrap_or(0)
}

/// Numerical stand-in for genericity: no constrained corner is collinear.
pub fn is_generic(a: &Angularity) -> bool {
    let p = a.positions();
    a.angles().iter().all(|t| {
        corner_sine(&p[t.i], &p[t.j], &p[t.k])
            .map(|s| s >= GENERIC_SINE_EPS)
            .unwrap_or(false)
    })
}
