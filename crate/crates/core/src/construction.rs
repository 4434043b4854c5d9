//! Linear (ray) and quadratic (inscribed-arc) constraint loci, vertex
//! additions and construction plans.

use std::f64::consts::{PI, TAU};

use crate::angularity::{AngleTriplet, Angularity};
use crate::error::{Error, Result};
use crate::geometry::{
    circular_distance, cross, perp, rotate, signed_angle, Point, COINCIDENCE_EPS,
};
use crate::rigidity::{classify, RigidityReport};

/// Intersections this close to a chord endpoint or a ray origin are dropped.
pub const ENDPOINT_EPS: f64 = 1e-9;
/// Normalized discriminants below this are treated as tangency.
pub const TANGENT_EPS: f64 = 1e-10;
const PARALLEL_EPS: f64 = 1e-12;
/// Seed positions must realize their targets this closely.
pub const SEED_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Point,
    pub direction: Point,
}

impl Ray {
    pub fn new(origin: Point, direction: Point) -> Result<Self> {
        let n = direction.norm();
        if n < COINCIDENCE_EPS {
            return Err(Error::CoincidentPoints);
        }
        Ok(Self {
            origin,
            direction: direction / n,
        })
    }

    pub fn at(&self, t: f64) -> Point {
        self.origin + self.direction * t
    }
}

/// Side of the directed chord `a → b` the arc lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArcSide {
    Left,
    Right,
}

/// Points `q` seeing the chord under a fixed inscribed angle, on one side.
///
/// On a `Left` arc the signed angle `∠(a, q, b)` equals the inscribed angle;
/// on a `Right` arc it equals its explement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InscribedArc {
    pub chord_a: Point,
    pub chord_b: Point,
    pub inscribed_angle: f64,
    pub center: Point,
    pub radius: f64,
    pub side: ArcSide,
}

impl InscribedArc {
    fn side_normal(&self) -> Point {
        let n = perp(&(self.chord_b - self.chord_a)).normalize();
        match self.side {
            ArcSide::Left => n,
            ArcSide::Right => -n,
        }
    }

    /// Signed value of `∠(chord_a, q, chord_b)` along the arc.
    pub fn signed_target(&self) -> f64 {
        match self.side {
            ArcSide::Left => self.inscribed_angle,
            ArcSide::Right => TAU - self.inscribed_angle,
        }
    }

    /// Point of the arc on the chord's perpendicular bisector.
    pub fn midpoint(&self) -> Point {
        self.center + self.side_normal() * self.radius
    }

    /// Walks the arc from `chord_a` (`s = 0`) to `chord_b` (`s = 1`).
    pub fn point_at(&self, s: f64) -> Point {
        let ang = |p: Point| (p.y - self.center.y).atan2(p.x - self.center.x);
        let (ta, tb, tm) = (ang(self.chord_a), ang(self.chord_b), ang(self.midpoint()));
        let ccw = (tb - ta).rem_euclid(TAU);
        let sweep = if (tm - ta).rem_euclid(TAU) < ccw {
            ccw
        } else {
            ccw - TAU
        };
        let th = ta + s * sweep;
        self.center + Point::new(th.cos(), th.sin()) * self.radius
    }

    /// Strictly on the arc's side of the chord line and away from both
    /// endpoints; does not test the circle equation.
    fn admits(&self, q: &Point) -> bool {
        if (q - self.chord_a).norm() <= ENDPOINT_EPS || (q - self.chord_b).norm() <= ENDPOINT_EPS {
            return false;
        }
        let c = cross(&(self.chord_b - self.chord_a), &(q - self.chord_a));
        match self.side {
            ArcSide::Left => c > 0.0,
            ArcSide::Right => c < 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Locus {
    Ray(Ray),
    Arc(InscribedArc),
}

/// Ray from `anchor`, rotated counterclockwise by `beta` from the direction
/// of `reference`.
pub fn constraint_ray(anchor: &Point, reference: &Point, beta: f64) -> Result<Ray> {
    let d = reference - anchor;
    if d.norm() < COINCIDENCE_EPS {
        return Err(Error::CoincidentPoints);
    }
    Ray::new(*anchor, rotate(&d, beta))
}

pub fn inscribed_arc(a: &Point, b: &Point, beta: f64, side: ArcSide) -> Result<InscribedArc> {
    let chord = b - a;
    let l = chord.norm();
    if l < COINCIDENCE_EPS {
        return Err(Error::DegenerateChord);
    }
    if !(beta > 0.0 && beta < PI) {
        return Err(Error::InvalidAngle(beta));
    }
    let left = perp(&chord) / l;
    let normal = match side {
        ArcSide::Left => left,
        ArcSide::Right => -left,
    };
    let mid = (a + b) * 0.5;
    Ok(InscribedArc {
        chord_a: *a,
        chord_b: *b,
        inscribed_angle: beta,
        center: mid + normal * (0.5 * l / beta.tan()),
        radius: l / (2.0 * beta.sin()),
        side,
    })
}

/// The arc on which `∠(a, q, b)` takes the signed value `beta`.
pub fn arc_for_signed_target(a: &Point, b: &Point, beta: f64) -> Result<InscribedArc> {
    if !(beta > 0.0 && beta < TAU) || (beta - PI).abs() < 1e-12 {
        return Err(Error::InvalidAngle(beta));
    }
    if beta < PI {
        inscribed_arc(a, b, beta, ArcSide::Left)
    } else {
        inscribed_arc(a, b, TAU - beta, ArcSide::Right)
    }
}

/// Intersection points of two loci, chord endpoints and ray origins excluded.
pub fn intersect(l1: &Locus, l2: &Locus) -> Result<Vec<Point>> {
    let pts = match (l1, l2) {
        (Locus::Ray(r1), Locus::Ray(r2)) => ray_ray(r1, r2)?,
        (Locus::Ray(r), Locus::Arc(a)) | (Locus::Arc(a), Locus::Ray(r)) => ray_arc(r, a),
        (Locus::Arc(a1), Locus::Arc(a2)) => arc_arc(a1, a2)?,
    };
    let mut out: Vec<Point> = Vec::with_capacity(pts.len());
    for p in pts {
        if !out.iter().any(|q| (q - p).norm() <= ENDPOINT_EPS) {
            out.push(p);
        }
    }
    Ok(out)
}

fn ray_ray(r1: &Ray, r2: &Ray) -> Result<Vec<Point>> {
    let denom = cross(&r1.direction, &r2.direction);
    if denom.abs() < PARALLEL_EPS {
        return Err(Error::AlignedRays);
    }
    let w = r2.origin - r1.origin;
    let t = cross(&w, &r2.direction) / denom;
    let s = cross(&w, &r1.direction) / denom;
    Ok(if t > ENDPOINT_EPS && s > ENDPOINT_EPS {
        vec![r1.at(t)]
    } else {
        vec![]
    })
}

fn ray_arc(r: &Ray, arc: &InscribedArc) -> Vec<Point> {
    let w = r.origin - arc.center;
    let b = r.direction.dot(&w);
    let c = w.norm_squared() - arc.radius * arc.radius;
    let disc = b * b - c;
    let scaled = disc / (arc.radius * arc.radius);
    let roots = if scaled.abs() <= TANGENT_EPS {
        vec![-b]
    } else if disc < 0.0 {
        vec![]
    } else {
        let s = disc.sqrt();
        vec![-b - s, -b + s]
    };
    roots
        .into_iter()
        .filter(|&t| t > ENDPOINT_EPS)
        .map(|t| r.at(t))
        .filter(|q| arc.admits(q))
        .collect()
}

fn arc_arc(a1: &InscribedArc, a2: &InscribedArc) -> Result<Vec<Point>> {
    let d_vec = a2.center - a1.center;
    let d = d_vec.norm();
    let (r1, r2) = (a1.radius, a2.radius);
    if d < COINCIDENCE_EPS {
        if (r1 - r2).abs() < COINCIDENCE_EPS {
            return Err(Error::CoincidentLoci);
        }
        return Ok(vec![]);
    }
    let u = d_vec / d;
    let along = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
    let h2 = r1 * r1 - along * along;
    let base = a1.center + u * along;
    let pts = if (h2 / (r1 * r1)).abs() <= TANGENT_EPS {
        vec![base]
    } else if h2 < 0.0 {
        vec![]
    } else {
        let h = h2.sqrt();
        vec![base + perp(&u) * h, base - perp(&u) * h]
    };
    Ok(pts
        .into_iter()
        .filter(|q| a1.admits(q) && a2.admits(q))
        .collect())
}

/// One constraint on a new vertex, with respect to already placed vertices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConstraintSpec {
    /// Realizes `∠(reference, anchor, new) = beta`.
    Linear {
        anchor: usize,
        reference: usize,
        beta: f64,
    },
    /// Realizes `∠(chord.0, new, chord.1) = beta`.
    Quadratic { chord: (usize, usize), beta: f64 },
}

impl ConstraintSpec {
    pub fn triplet(&self, new: usize) -> AngleTriplet {
        match *self {
            ConstraintSpec::Linear {
                anchor,
                reference,
                beta,
            } => AngleTriplet::new(reference, anchor, new).with_target(beta),
            ConstraintSpec::Quadratic { chord, beta } => {
                AngleTriplet::new(chord.0, new, chord.1).with_target(beta)
            }
        }
    }

    pub fn locus(&self, positions: &[Point]) -> Result<Locus> {
        match *self {
            ConstraintSpec::Linear {
                anchor,
                reference,
                beta,
            } => Ok(Locus::Ray(constraint_ray(
                &positions[anchor],
                &positions[reference],
                beta,
            )?)),
            ConstraintSpec::Quadratic { chord, beta } => Ok(Locus::Arc(arc_for_signed_target(
                &positions[chord.0],
                &positions[chord.1],
                beta,
            )?)),
        }
    }

    fn referenced(&self) -> Vec<usize> {
        match *self {
            ConstraintSpec::Linear {
                anchor, reference, ..
            } => vec![anchor, reference],
            ConstraintSpec::Quadratic { chord, .. } => vec![chord.0, chord.1],
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.referenced().iter().any(|&v| v >= n) {
            return Err(Error::CaseViolation(
                "constraint references a vertex that is not yet placed".into(),
            ));
        }
        match *self {
            ConstraintSpec::Linear {
                anchor,
                reference,
                beta,
            } => {
                if anchor == reference {
                    return Err(Error::CaseViolation(
                        "ray anchor equals its reference".into(),
                    ));
                }
                if !(0.0..TAU).contains(&beta) {
                    return Err(Error::InvalidAngle(beta));
                }
            }
            ConstraintSpec::Quadratic { chord, beta } => {
                if chord.0 == chord.1 {
                    return Err(Error::DegenerateChord);
                }
                if !(beta > 0.0 && beta < TAU) || (beta - PI).abs() < 1e-12 {
                    return Err(Error::InvalidAngle(beta));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdditionKind {
    /// Two rays from distinct anchors.
    TypeI1,
    /// A ray anchored at an endpoint of the arc's chord.
    TypeI2,
    /// Two arcs whose chords share exactly one endpoint.
    TypeI3,
    /// A ray and an arc over three distinct vertices.
    TypeII1,
    /// Two arcs over disjoint chords.
    TypeII2,
}

impl AdditionKind {
    pub fn is_type_one(self) -> bool {
        matches!(self, Self::TypeI1 | Self::TypeI2 | Self::TypeI3)
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::TypeI1 => "I-1",
            Self::TypeI2 => "I-2",
            Self::TypeI3 => "I-3",
            Self::TypeII1 => "II-1",
            Self::TypeII2 => "II-2",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Some(match s {
            "I-1" => Self::TypeI1,
            "I-2" => Self::TypeI2,
            "I-3" => Self::TypeI3,
            "II-1" => Self::TypeII1,
            "II-2" => Self::TypeII2,
            _ => return None,
        })
    }
}

/// The case a constraint pair falls into, from its vertex multiplicities.
pub fn infer_kind(constraints: &[ConstraintSpec; 2]) -> Result<AdditionKind> {
    use ConstraintSpec::*;
    match (constraints[0], constraints[1]) {
        (Linear { anchor: a1, .. }, Linear { anchor: a2, .. }) => {
            if a1 == a2 {
                Err(Error::CaseViolation("both rays share one anchor".into()))
            } else {
                Ok(AdditionKind::TypeI1)
            }
        }
        (Linear { anchor, .. }, Quadratic { chord, .. })
        | (Quadratic { chord, .. }, Linear { anchor, .. }) => {
            if anchor == chord.0 || anchor == chord.1 {
                Ok(AdditionKind::TypeI2)
            } else {
                Ok(AdditionKind::TypeII1)
            }
        }
        (Quadratic { chord: c1, .. }, Quadratic { chord: c2, .. }) => {
            let shared = [c1.0, c1.1]
                .iter()
                .filter(|v| **v == c2.0 || **v == c2.1)
                .count();
            match shared {
                0 => Ok(AdditionKind::TypeII2),
                1 => Ok(AdditionKind::TypeI3),
                _ => Err(Error::CaseViolation("both arcs use the same chord".into())),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdditionStep {
    pub kind: AdditionKind,
    pub constraints: [ConstraintSpec; 2],
    /// Type-II only: the candidate nearest to this point is placed.
    pub branch_hint: Option<Point>,
}

impl AdditionStep {
    /// Infers the case from the constraints.
    pub fn new(constraints: [ConstraintSpec; 2]) -> Result<Self> {
        Ok(Self {
            kind: infer_kind(&constraints)?,
            constraints,
            branch_hint: None,
        })
    }

    pub fn with_hint(mut self, hint: Point) -> Self {
        self.branch_hint = Some(hint);
        self
    }

    fn check(&self, n: usize) -> Result<()> {
        for c in &self.constraints {
            c.check(n)?;
        }
        let inferred = infer_kind(&self.constraints)?;
        if inferred != self.kind {
            return Err(Error::CaseViolation(format!(
                "step declared {} but its constraints form case {}",
                self.kind.label(),
                inferred.label()
            )));
        }
        Ok(())
    }

    /// All placements satisfying both constraints.
    pub fn candidates(&self, a: &Angularity) -> Result<Vec<Point>> {
        self.check(a.vertex_count())?;
        let l1 = self.constraints[0].locus(a.positions())?;
        let l2 = self.constraints[1].locus(a.positions())?;
        intersect(&l1, &l2)
    }

    fn place(&self, a: &Angularity, p: Point) -> Result<Angularity> {
        let new = a.vertex_count();
        let triplets = self.constraints.map(|c| c.triplet(new));
        let mut out = a.clone();
        out.push_vertex(p, &triplets)?;
        Ok(out)
    }
}

pub fn add_vertex_type1(a: &Angularity, step: &AdditionStep) -> Result<Angularity> {
    if !step.kind.is_type_one() {
        return Err(Error::CaseViolation(format!(
            "{} is not a Type-I case",
            step.kind.label()
        )));
    }
    let pts = step.candidates(a)?;
    match pts.as_slice() {
        [] => Err(Error::NoIntersection),
        [p] => step.place(a, *p),
        _ => Err(Error::CaseViolation(format!(
            "Type-I step produced {} placements",
            pts.len()
        ))),
    }
}

/// Places the vertex at the branch-selected candidate and returns every
/// candidate.
///
/// Without a hint the candidate nearest to the midpoint of the (first) arc is
/// chosen.
pub fn add_vertex_type2(a: &Angularity, step: &AdditionStep) -> Result<(Angularity, Vec<Point>)> {
    if step.kind.is_type_one() {
        return Err(Error::CaseViolation(format!(
            "{} is not a Type-II case",
            step.kind.label()
        )));
    }
    let pts = step.candidates(a)?;
    if pts.is_empty() {
        return Err(Error::NoIntersection);
    }
    let reference = match step.branch_hint {
        Some(h) => h,
        None => step
            .constraints
            .iter()
            .find_map(|c| match c.locus(a.positions()) {
                Ok(Locus::Arc(arc)) => Some(arc.midpoint()),
                _ => None,
            })
            .ok_or(Error::AmbiguousBranch)?,
    };
    let chosen = select_nearest(&pts, &reference)?;
    Ok((step.place(a, chosen)?, pts))
}

fn select_nearest(pts: &[Point], reference: &Point) -> Result<Point> {
    let mut order: Vec<(f64, Point)> = pts.iter().map(|p| ((p - reference).norm(), *p)).collect();
    order.sort_by(|x, y| x.0.total_cmp(&y.0));
    if order.len() > 1 && (order[1].0 - order[0].0).abs() <= ENDPOINT_EPS {
        return Err(Error::AmbiguousBranch);
    }
    Ok(order[0].1)
}

/// A generically rigid triangle with two constrained corners.
#[derive(Clone, Debug, PartialEq)]
pub struct Seed {
    pub positions: [Point; 3],
    /// Two corners of the triangle, each carrying its target.
    pub triplets: [AngleTriplet; 2],
}

impl Seed {
    pub fn new(positions: [Point; 3], triplets: [AngleTriplet; 2]) -> Result<Self> {
        let seed = Self {
            positions,
            triplets,
        };
        seed.check()?;
        Ok(seed)
    }

    /// Corners `(3,1,2) = a1` and `(1,2,3) = a2`; vertex 3 is placed by
    /// intersecting the two constraint rays from vertices 1 and 2.
    pub fn from_interior_angles(p1: Point, p2: Point, a1: f64, a2: f64) -> Result<Self> {
        if !(a1 > 0.0 && a2 > 0.0 && a1 + a2 < PI) {
            return Err(Error::SeedMismatch(
                "interior angles must be positive with sum below π".into(),
            ));
        }
        let r1 = constraint_ray(&p1, &p2, TAU - a1)?;
        let r2 = constraint_ray(&p2, &p1, a2)?;
        let p3 = *intersect(&Locus::Ray(r1), &Locus::Ray(r2))?
            .first()
            .ok_or(Error::NoIntersection)?;
        Self::new(
            [p1, p2, p3],
            [
                AngleTriplet::new(2, 0, 1).with_target(a1),
                AngleTriplet::new(0, 1, 2).with_target(a2),
            ],
        )
    }

    fn check(&self) -> Result<()> {
        let mut middles = Vec::new();
        for t in &self.triplets {
            let mut v = t.vertices();
            v.sort_unstable();
            if v != [0, 1, 2] {
                return Err(Error::SeedMismatch(format!(
                    "{t} is not a corner of the seed triangle"
                )));
            }
            middles.push(t.j);
            let beta = t
                .target
                .ok_or_else(|| Error::SeedMismatch(format!("{t} has no target")))?;
            if !(beta > 0.0 && beta < PI) {
                return Err(Error::SeedMismatch(format!(
                    "target of {t} must lie in (0, π)"
                )));
            }
            let realized = t.evaluate(&self.positions)?;
            if circular_distance(realized, beta) > SEED_TOL {
                return Err(Error::SeedMismatch(format!(
                    "{t} realizes {realized} rad, target {beta} rad"
                )));
            }
        }
        if middles[0] == middles[1] {
            return Err(Error::SeedMismatch(
                "both seed corners sit at one vertex".into(),
            ));
        }
        let sum: f64 = self.triplets.iter().filter_map(|t| t.target).sum();
        if sum >= PI {
            return Err(Error::SeedMismatch(
                "implied third angle is not positive".into(),
            ));
        }
        Ok(())
    }

    pub fn angularity(&self) -> Result<Angularity> {
        Angularity::new(self.positions.to_vec(), self.triplets.to_vec())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstructionPlan {
    pub seed: Seed,
    pub steps: Vec<AdditionStep>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepAlternatives {
    pub step: usize,
    pub vertex: usize,
    pub chosen: Point,
    pub candidates: Vec<Point>,
}

#[derive(Clone, Debug)]
pub struct BuildOutcome {
    pub angularity: Angularity,
    pub report: RigidityReport,
    /// Every step was a Type-I addition, so the result is globally rigid.
    pub globally_rigid_certificate: bool,
    pub alternatives: Vec<StepAlternatives>,
}

/// Realizes the seed and every step in order, then classifies the result.
pub fn build(plan: &ConstructionPlan) -> Result<BuildOutcome> {
    let mut a = plan.seed.angularity()?;
    let mut alternatives = Vec::new();
    for (index, step) in plan.steps.iter().enumerate() {
        if step.kind.is_type_one() {
            a = add_vertex_type1(&a, step).map_err(|e| e.at_step(index))?;
        } else {
            let vertex = a.vertex_count();
            let (next, candidates) = add_vertex_type2(&a, step).map_err(|e| e.at_step(index))?;
            alternatives.push(StepAlternatives {
                step: index,
                vertex,
                chosen: next.positions()[vertex],
                candidates,
            });
            a = next;
        }
    }
    let report = classify(&a)?;
    Ok(BuildOutcome {
        angularity: a,
        report,
        globally_rigid_certificate: plan.steps.iter().all(|s| s.kind.is_type_one()),
        alternatives,
    })
}

/// Angular distance of `q` from satisfying the locus' angle equation.
pub fn locus_residual(locus: &Locus, q: &Point) -> Result<f64> {
    match locus {
        Locus::Ray(r) => {
            let v = signed_angle(&(r.origin + r.direction), &r.origin, q)?;
            Ok(circular_distance(v, 0.0))
        }
        Locus::Arc(arc) => {
            let v = signed_angle(&arc.chord_a, q, &arc.chord_b)?;
            Ok(circular_distance(v, arc.signed_target()))
        }
    }
}
