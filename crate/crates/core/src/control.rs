//! Angle-only formation control: bearing measurements, the bisector laws,
//! closed-loop error dynamics and linearized stability checks.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Matrix3, Rotation2};
use serde::Serialize;

use crate::construction::{
    arc_for_signed_target, intersect, AdditionKind, ConstraintSpec, ConstructionPlan, Locus,
};
use crate::error::{Error, Result};
use crate::geometry::{cross, interior_angle, point, Point, COINCIDENCE_EPS};

/// Controlled corners with `|sin α|` below this are rejected.
pub const COLLINEAR_SINE_EPS: f64 = 1e-8;
/// Tolerance on the triangle targets summing to π.
const TRIANGLE_SUM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct AgentState {
    pub id: usize,
    /// Global-frame position; only differences of positions reach the law.
    pub position: Point,
    /// Local frame of the agent relative to the global one.
    pub frame: Rotation2<f64>,
}

impl AgentState {
    pub fn new(id: usize, position: Point) -> Self {
        Self {
            id,
            position,
            frame: Rotation2::identity(),
        }
    }

    pub fn with_frame(mut self, angle: f64) -> Self {
        self.frame = Rotation2::new(angle);
        self
    }
}

/// Wraps positions into states with identity frames.
pub fn states_from_positions(positions: &[Point]) -> Vec<AgentState> {
    positions
        .iter()
        .enumerate()
        .map(|(i, p)| AgentState::new(i, *p))
        .collect()
}

/// An agent added after the triangle, controlling the two angles it sees
/// between consecutive anchors.
#[derive(Clone, Debug, PartialEq)]
pub struct AddedAgent {
    pub agent: usize,
    pub anchors: [usize; 3],
    /// Interior targets of `(j1, i, j2)` and `(j2, i, j3)`.
    pub targets: [f64; 2],
}

/// One controlled interior angle `α_{j agent k}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlTerm {
    pub agent: usize,
    pub j: usize,
    pub k: usize,
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FormationSpec {
    n: usize,
    triangle_targets: [f64; 3],
    added: Vec<AddedAgent>,
}

impl FormationSpec {
    pub fn new(n: usize, triangle_targets: [f64; 3], added: Vec<AddedAgent>) -> Result<Self> {
        if n < 3 {
            return Err(Error::DegenerateSpec(
                "a formation needs at least 3 agents".into(),
            ));
        }
        let open = |x: f64| x > 0.0 && x < PI;
        if !triangle_targets.iter().all(|&a| open(a)) {
            return Err(Error::DegenerateSpec(
                "triangle targets must lie in (0, π)".into(),
            ));
        }
        let sum: f64 = triangle_targets.iter().sum();
        if (sum - PI).abs() > TRIANGLE_SUM_TOL {
            return Err(Error::DegenerateSpec(format!(
                "triangle targets sum to {sum}, not π"
            )));
        }
        if added.len() != n - 3 {
            return Err(Error::DegenerateSpec(format!(
                "{} added agents listed for N = {n}",
                added.len()
            )));
        }
        let mut added = added;
        added.sort_by_key(|a| a.agent);
        for (slot, a) in added.iter().enumerate() {
            let i = a.agent;
            if i != slot + 3 {
                return Err(Error::DegenerateSpec(format!(
                    "added agents must be 4..N, each once (found {})",
                    i + 1
                )));
            }
            let [j1, j2, j3] = a.anchors;
            if j1 >= i || j2 >= i || j3 >= i {
                return Err(Error::DegenerateSpec(format!(
                    "agent {} has an anchor not below it",
                    i + 1
                )));
            }
            if j1 == j2 || j2 == j3 || j1 == j3 {
                return Err(Error::DegenerateSpec(format!(
                    "agent {} repeats an anchor",
                    i + 1
                )));
            }
            if !a.targets.iter().all(|&t| open(t)) {
                return Err(Error::DegenerateSpec(format!(
                    "targets of agent {} must lie in (0, π)",
                    i + 1
                )));
            }
        }
        Ok(Self {
            n,
            triangle_targets,
            added,
        })
    }

    /// Uses the interior angles of `positions[0..3]` as triangle targets.
    pub fn triangle_from_positions(positions: &[Point]) -> Result<[f64; 3]> {
        let (p1, p2, p3) = (positions[0], positions[1], positions[2]);
        let a1 = interior_angle(&p3, &p1, &p2)?;
        let a2 = interior_angle(&p1, &p2, &p3)?;
        Ok([a1, a2, PI - a1 - a2])
    }

    /// Formation driven by a plan of Type-I case-3 additions: each added
    /// vertex controls the two arc angles it was placed with.
    pub fn from_plan(plan: &ConstructionPlan) -> Result<Self> {
        let n = plan.steps.len() + 3;
        let triangle = Self::triangle_from_positions(&plan.seed.positions)?;
        let mut added = Vec::with_capacity(plan.steps.len());
        for (idx, step) in plan.steps.iter().enumerate() {
            let agent = idx + 3;
            let (c1, b1, c2, b2) = match (step.kind, step.constraints) {
                (
                    AdditionKind::TypeI3,
                    [ConstraintSpec::Quadratic {
                        chord: c1,
                        beta: b1,
                    }, ConstraintSpec::Quadratic {
                        chord: c2,
                        beta: b2,
                    }],
                ) => (c1, b1, c2, b2),
                _ => {
                    return Err(Error::DegenerateSpec(format!(
                        "step {idx} is not a Type-I case-3 addition"
                    )))
                }
            };
            let shared = if c1.0 == c2.0 || c1.0 == c2.1 {
                c1.0
            } else {
                c1.1
            };
            let other = |c: (usize, usize)| if c.0 == shared { c.1 } else { c.0 };
            added.push(AddedAgent {
                agent,
                anchors: [other(c1), shared, other(c2)],
                targets: [
                    crate::geometry::to_interior(b1),
                    crate::geometry::to_interior(b2),
                ],
            });
        }
        Self::new(n, triangle, added)
    }

    pub fn agent_count(&self) -> usize {
        self.n
    }

    pub fn triangle_targets(&self) -> [f64; 3] {
        self.triangle_targets
    }

    pub fn added(&self) -> &[AddedAgent] {
        &self.added
    }

    /// The `3 + 2(N − 3)` controlled angles: `α1, α2, α3` then two per added
    /// agent, in agent order.
    pub fn control_terms(&self) -> Vec<ControlTerm> {
        let t = self.triangle_targets;
        let mut terms = vec![
            ControlTerm {
                agent: 0,
                j: 1,
                k: 2,
                target: t[0],
            },
            ControlTerm {
                agent: 1,
                j: 2,
                k: 0,
                target: t[1],
            },
            ControlTerm {
                agent: 2,
                j: 0,
                k: 1,
                target: t[2],
            },
        ];
        for a in &self.added {
            let [j1, j2, j3] = a.anchors;
            terms.push(ControlTerm {
                agent: a.agent,
                j: j1,
                k: j2,
                target: a.targets[0],
            });
            terms.push(ControlTerm {
                agent: a.agent,
                j: j2,
                k: j3,
                target: a.targets[1],
            });
        }
        terms
    }

    /// Unit-scale realization with agent 1 at the origin, agent 2 at `(1, 0)`
    /// and agent 3 above the x-axis.
    ///
    /// Each added agent is placed so that both of its signed angles turn the
    /// same way; the counterclockwise placement is tried first.
    pub fn canonical_realization(&self) -> Result<Vec<Point>> {
        let [a1, a2, _] = self.triangle_targets;
        let p1 = point(0.0, 0.0);
        let p2 = point(1.0, 0.0);
        // law of sines with |p1 p2| = 1
        let l13 = a2.sin() / (a1 + a2).sin();
        let p3 = point(l13 * a1.cos(), l13 * a1.sin());
        let mut pts = vec![p1, p2, p3];
        for a in &self.added {
            let [j1, j2, j3] = a.anchors;
            let [b1, b2] = a.targets;
            let choices = [
                (b1, b2),
                (TAU - b1, TAU - b2),
                (b1, TAU - b2),
                (TAU - b1, b2),
            ];
            let placed = choices.iter().find_map(|&(s1, s2)| {
                let l1 = arc_for_signed_target(&pts[j1], &pts[j2], s1).ok()?;
                let l2 = arc_for_signed_target(&pts[j2], &pts[j3], s2).ok()?;
                let cands = intersect(&Locus::Arc(l1), &Locus::Arc(l2)).ok()?;
                cands
                    .into_iter()
                    .find(|q| pts.iter().all(|p| (p - q).norm() > 1e-9))
            });
            match placed {
                Some(q) => pts.push(q),
                None => {
                    return Err(Error::DegenerateSpec(format!(
                        "targets of agent {} admit no placement",
                        a.agent + 1
                    )))
                }
            }
        }
        Ok(pts)
    }
}

/// Bearing from `pi` towards `pj`.
pub fn bearing(pi: &Point, pj: &Point) -> Result<Point> {
    let d = pj - pi;
    let n = d.norm();
    if n < COINCIDENCE_EPS {
        return Err(Error::CoincidentAgents { a: 0, b: 0 });
    }
    Ok(d / n)
}

fn bearing_between(states: &[AgentState], i: usize, j: usize) -> Result<Point> {
    bearing(&states[i].position, &states[j].position)
        .map_err(|_| Error::CoincidentAgents { a: i, b: j })
}

/// `arccos` of the bearing dot product, clamped to `[-1, 1]`.
pub fn measured_angle(zj: &Point, zk: &Point) -> f64 {
    zj.dot(zk).clamp(-1.0, 1.0).acos()
}

fn term_velocity(zj: Point, zk: Point, target: f64, agent: usize) -> Result<(Point, f64)> {
    if cross(&zj, &zk).abs() < COLLINEAR_SINE_EPS {
        return Err(Error::CollinearConfiguration { agent });
    }
    let e = measured_angle(&zj, &zk) - target;
    Ok((-(zj + zk) * e, e))
}

/// Triangle law for agent `i ∈ {0, 1, 2}`.
pub fn control_triangle(i: usize, states: &[AgentState], spec: &FormationSpec) -> Result<Point> {
    if i > 2 {
        return Err(Error::DegenerateSpec(format!(
            "agent {} is not a triangle agent",
            i + 1
        )));
    }
    let next = (i + 1) % 3;
    let prev = (i + 2) % 3;
    let zn = bearing_between(states, i, next)?;
    let zp = bearing_between(states, i, prev)?;
    Ok(term_velocity(zn, zp, spec.triangle_targets[i], i)?.0)
}

/// Two-term law for an added agent `i ≥ 3`.
pub fn control_added(i: usize, states: &[AgentState], spec: &FormationSpec) -> Result<Point> {
    let a =
        spec.added.iter().find(|a| a.agent == i).ok_or_else(|| {
            Error::DegenerateSpec(format!("agent {} is not an added agent", i + 1))
        })?;
    let [j1, j2, j3] = a.anchors;
    let z1 = bearing_between(states, i, j1)?;
    let z2 = bearing_between(states, i, j2)?;
    let z3 = bearing_between(states, i, j3)?;
    let (u1, _) = term_velocity(z1, z2, a.targets[0], i)?;
    let (u2, _) = term_velocity(z2, z3, a.targets[1], i)?;
    Ok(u1 + u2)
}

/// Sum over every term whose middle vertex is `i`, in the global frame.
pub fn control_unified(i: usize, states: &[AgentState], terms: &[ControlTerm]) -> Result<Point> {
    let mut u = Point::zeros();
    for t in terms.iter().filter(|t| t.agent == i) {
        let zj = bearing_between(states, i, t.j)?;
        let zk = bearing_between(states, i, t.k)?;
        u += term_velocity(zj, zk, t.target, i)?.0;
    }
    Ok(u)
}

/// The unified law evaluated on bearings expressed in agent `i`'s own frame,
/// mapped back to the global frame through `R_i`.
pub fn control_unified_local(
    i: usize,
    states: &[AgentState],
    terms: &[ControlTerm],
) -> Result<Point> {
    let r = states[i].frame;
    let mut ub = Point::zeros();
    for t in terms.iter().filter(|t| t.agent == i) {
        let zj = r.inverse() * bearing_between(states, i, t.j)?;
        let zk = r.inverse() * bearing_between(states, i, t.k)?;
        ub += term_velocity(zj, zk, t.target, i)?.0;
    }
    Ok(r * ub)
}

/// Angle errors `α − α*` in term order.
pub fn angle_errors(positions: &[Point], terms: &[ControlTerm]) -> Result<Vec<f64>> {
    terms
        .iter()
        .map(|t| {
            let zj = bearing(&positions[t.agent], &positions[t.j])
                .map_err(|_| Error::CoincidentAgents { a: t.agent, b: t.j })?;
            let zk = bearing(&positions[t.agent], &positions[t.k])
                .map_err(|_| Error::CoincidentAgents { a: t.agent, b: t.k })?;
            Ok(measured_angle(&zj, &zk) - t.target)
        })
        .collect()
}

/// Smallest `|sin α|` over the controlled corners.
pub fn min_controlled_sine(positions: &[Point], terms: &[ControlTerm]) -> Result<f64> {
    let mut m = f64::INFINITY;
    for t in terms {
        let zj = bearing(&positions[t.agent], &positions[t.j])
            .map_err(|_| Error::CoincidentAgents { a: t.agent, b: t.j })?;
        let zk = bearing(&positions[t.agent], &positions[t.k])
            .map_err(|_| Error::CoincidentAgents { a: t.agent, b: t.k })?;
        m = m.min(cross(&zj, &zk).abs());
    }
    Ok(m)
}

/// Closed-loop matrix `F` with `ė = F e` for the triangle, given the current
/// interior angles and side lengths `[l12, l23, l31]`.
pub fn error_dynamics_triangle(angles: [f64; 3], lengths: [f64; 3]) -> Result<Matrix3<f64>> {
    for (i, a) in angles.iter().enumerate() {
        if a.sin().abs() < COLLINEAR_SINE_EPS {
            return Err(Error::CollinearConfiguration { agent: i });
        }
    }
    if lengths.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::DegenerateSpec(
            "side lengths must be positive".into(),
        ));
    }
    let l = |i: usize, j: usize| {
        let (a, b) = (i.min(j), i.max(j));
        match (a, b) {
            (0, 1) => lengths[0],
            (1, 2) => lengths[1],
            _ => lengths[2],
        }
    };
    let mut f = Matrix3::zeros();
    for i in 0..3 {
        let (next, prev) = ((i + 1) % 3, (i + 2) % 3);
        f[(i, i)] = -angles[i].sin() * (1.0 / l(i, next) + 1.0 / l(i, prev));
        for j in [next, prev] {
            f[(i, j)] = angles[j].sin() / l(i, j);
        }
    }
    Ok(f)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearizationReport {
    pub matrix: [[f64; 2]; 2],
    pub trace: f64,
    pub determinant: f64,
    /// `(re, im)` pairs.
    pub eigenvalues: [(f64, f64); 2],
    pub hurwitz: bool,
    /// Added agents: closed-form determinant expansion in sines and lengths.
    pub det_expansion: Option<f64>,
    /// Added agents: `l_{i j1} > l_{i j2}` and `l_{i j3} > l_{i j2}`.
    pub length_condition: Option<bool>,
    /// Added agents: the ray to `j2` lies between those to `j1` and `j3`, so
    /// the sine-and-length entries apply.
    pub closed_form_entries: Option<bool>,
}

impl LinearizationReport {
    fn from_matrix(m: Matrix2<f64>) -> Self {
        let trace = m.trace();
        let determinant = m.determinant();
        let disc = 0.25 * trace * trace - determinant;
        let eigenvalues = if disc >= 0.0 {
            let s = disc.sqrt();
            [(0.5 * trace - s, 0.0), (0.5 * trace + s, 0.0)]
        } else {
            let s = (-disc).sqrt();
            [(0.5 * trace, -s), (0.5 * trace, s)]
        };
        Self {
            matrix: [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]],
            trace,
            determinant,
            hurwitz: eigenvalues.iter().all(|e| e.0 < 0.0),
            eigenvalues,
            det_expansion: None,
            length_condition: None,
            closed_form_entries: None,
        }
    }

    pub fn min_abs_real(&self) -> f64 {
        self.eigenvalues[0].0.abs().min(self.eigenvalues[1].0.abs())
    }
}

fn side(desired: &[Point], i: usize, j: usize) -> Result<f64> {
    let l = (desired[i] - desired[j]).norm();
    if l < COINCIDENCE_EPS {
        return Err(Error::DegenerateSpec(format!(
            "agents {} and {} coincide",
            i + 1,
            j + 1
        )));
    }
    Ok(l)
}

/// Reduced 2×2 linearization of the triangle error dynamics at the targets,
/// with lengths taken from `desired`.
pub fn linearize_triangle(spec: &FormationSpec, desired: &[Point]) -> Result<LinearizationReport> {
    if desired.len() < 3 {
        return Err(Error::DegenerateSpec(
            "desired geometry needs three agents".into(),
        ));
    }
    let a = spec.triangle_targets;
    let (l12, l23, l13) = (
        side(desired, 0, 1)?,
        side(desired, 1, 2)?,
        side(desired, 0, 2)?,
    );
    let g1 = a[0].sin() * (1.0 / l12 + 1.0 / l13);
    let g2 = a[1].sin() * (1.0 / l23 + 1.0 / l12);
    let f12 = a[1].sin() / l12;
    let f13 = a[2].sin() / l13;
    let f21 = a[0].sin() / l12;
    let f23 = a[2].sin() / l23;
    let m = Matrix2::new(-(g1 + f13), f12 - f13, f21 - f23, -(g2 + f23));
    let report = LinearizationReport::from_matrix(m);
    if !report.hurwitz {
        return Err(Error::NotHurwitz {
            trace: report.trace,
            determinant: report.determinant,
        });
    }
    Ok(report)
}

/// Gradient of the interior angle at `pi` between `pj` and `pk`, with
/// respect to `pi`.
pub fn interior_gradient(pi: &Point, pj: &Point, pk: &Point) -> Result<Point> {
    let (u, v) = (pj - pi, pk - pi);
    let (lu, lv) = (u.norm(), v.norm());
    if lu < COINCIDENCE_EPS || lv < COINCIDENCE_EPS {
        return Err(Error::CoincidentPoints);
    }
    let (uh, vh) = (u / lu, v / lv);
    let c = uh.dot(&vh);
    let s = cross(&uh, &vh).abs();
    if s < COLLINEAR_SINE_EPS {
        return Err(Error::CollinearConfiguration { agent: 0 });
    }
    Ok((vh - uh * c) / (lu * s) + (uh - vh * c) / (lv * s))
}

/// Linearization of an added agent's two errors with its anchors held at
/// `desired`.
pub fn linearize_added(
    spec: &FormationSpec,
    agent: usize,
    desired: &[Point],
) -> Result<LinearizationReport> {
    let a = spec
        .added
        .iter()
        .find(|a| a.agent == agent)
        .ok_or_else(|| {
            Error::DegenerateSpec(format!("agent {} is not an added agent", agent + 1))
        })?;
    if desired.len() <= agent {
        return Err(Error::DegenerateSpec(
            "desired geometry is missing agents".into(),
        ));
    }
    let i = agent;
    let [j1, j2, j3] = a.anchors;
    let (l1, l2, l3) = (
        side(desired, i, j1)?,
        side(desired, i, j2)?,
        side(desired, i, j3)?,
    );
    let (s12, s23) = (a.targets[0].sin(), a.targets[1].sin());
    let outer = interior_angle(&desired[j1], &desired[i], &desired[j3])
        .map_err(|_| Error::DegenerateSpec("anchor coincides with the agent".into()))?;
    let s13 = outer.sin();
    let between = (outer - (a.targets[0] + a.targets[1])).abs() < 1e-9;

    let m = if between {
        Matrix2::new(
            -s12 / l1 - s12 / l2,
            -(s12 + s13) / l1 + s23 / l2,
            -(s23 + s13) / l3 + s12 / l2,
            -s23 / l3 - s23 / l2,
        )
    } else {
        let pi = desired[i];
        let z = |j: usize| (desired[j] - pi) / (desired[j] - pi).norm();
        let g1 = interior_gradient(&pi, &desired[j1], &desired[j2]).map_err(|_| {
            Error::DegenerateSpec(format!("agent {} sees collinear anchors", i + 1))
        })?;
        let g2 = interior_gradient(&pi, &desired[j2], &desired[j3]).map_err(|_| {
            Error::DegenerateSpec(format!("agent {} sees collinear anchors", i + 1))
        })?;
        let b1 = z(j1) + z(j2);
        let b2 = z(j2) + z(j3);
        -Matrix2::new(g1.dot(&b1), g1.dot(&b2), g2.dot(&b1), g2.dot(&b2))
    };
    let mut report = LinearizationReport::from_matrix(m);
    report.det_expansion = Some(
        (l1 * (s12 * s23 + s23 * s23 + s23 * s13) + l3 * (s12 * s23 + s12 * s12 + s12 * s13)
            - l2 * (s12 * s13 + s13 * s23 + s13 * s13))
            / (l1 * l2 * l3),
    );
    report.length_condition = Some(l1 > l2 && l3 > l2);
    report.closed_form_entries = Some(between);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn equilateral() -> Vec<Point> {
        vec![
            point(0.0, 0.0),
            point(1.0, 0.0),
            point(0.5, 3f64.sqrt() / 2.0),
        ]
    }

    fn triangle_spec() -> FormationSpec {
        FormationSpec::new(3, [PI / 3.0; 3], vec![]).unwrap()
    }

    #[test]
    fn bearing_examples() {
        assert_eq!(
            bearing(&point(0.0, 0.0), &point(1.0, 0.0)).unwrap(),
            point(1.0, 0.0)
        );
        let z = bearing(&point(0.0, 0.0), &point(3.0, 4.0)).unwrap();
        assert_abs_diff_eq!((z - point(0.6, 0.8)).norm(), 0.0, epsilon = 1e-15);
        let p = equilateral();
        let a = measured_angle(
            &bearing(&p[0], &p[1]).unwrap(),
            &bearing(&p[0], &p[2]).unwrap(),
        );
        assert_abs_diff_eq!(a, PI / 3.0, epsilon = 1e-12);
        assert!(matches!(
            bearing(&p[0], &p[0]),
            Err(Error::CoincidentAgents { .. })
        ));
    }

    #[test]
    fn triangle_law_at_rest_and_perturbed() {
        let spec = triangle_spec();
        let states = states_from_positions(&equilateral());
        for i in 0..3 {
            assert!(control_triangle(i, &states, &spec).unwrap().norm() < 1e-12);
        }
        let perturbed = FormationSpec::new(
            3,
            [PI / 3.0 - 0.1, PI / 3.0 + 0.05, PI / 3.0 + 0.05],
            vec![],
        )
        .unwrap();
        let u = control_triangle(0, &states, &perturbed).unwrap();
        let p = equilateral();
        let bis = bearing(&p[0], &p[1]).unwrap() + bearing(&p[0], &p[2]).unwrap();
        // α1 − α1* = +0.1, so the agent moves against the bisector
        assert_abs_diff_eq!((u + bis * 0.1).norm(), 0.0, epsilon = 1e-12);
        assert!(u.norm() <= 2.0 * 0.1 + 1e-15);
    }

    #[test]
    fn unified_matches_specific_laws() {
        let spec = FormationSpec::new(
            4,
            [PI / 3.0; 3],
            vec![AddedAgent {
                agent: 3,
                anchors: [0, 1, 2],
                targets: [0.7, 0.9],
            }],
        )
        .unwrap();
        let mut p = equilateral();
        p.push(point(0.4, -0.6));
        let states = states_from_positions(&p);
        let terms = spec.control_terms();
        assert_eq!(terms.len(), 5);
        for i in 0..3 {
            let a = control_triangle(i, &states, &spec).unwrap();
            let b = control_unified(i, &states, &terms).unwrap();
            assert!((a - b).norm() <= 1e-12);
        }
        let a = control_added(3, &states, &spec).unwrap();
        let b = control_unified(3, &states, &terms).unwrap();
        assert!((a - b).norm() <= 1e-12);
        let errs = angle_errors(&p, &terms).unwrap();
        assert!(a.norm() <= 2.0 * (errs[3].abs() + errs[4].abs()) + 1e-12);
    }

    #[test]
    fn local_frames_reproduce_global_law() {
        let spec = triangle_spec();
        let p = vec![point(0.1, 0.0), point(1.2, 0.3), point(0.4, 0.9)];
        let terms = spec.control_terms();
        let global = states_from_positions(&p);
        let local: Vec<_> = global
            .iter()
            .cloned()
            .zip([0.3, 2.0, -1.1])
            .map(|(s, th)| s.with_frame(th))
            .collect();
        for i in 0..3 {
            let a = control_unified(i, &global, &terms).unwrap();
            let b = control_unified_local(i, &local, &terms).unwrap();
            assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn collinear_triangle_is_flagged() {
        let spec = triangle_spec();
        let states = states_from_positions(&[point(0.0, 0.0), point(1.0, 0.0), point(2.0, 0.0)]);
        assert!(matches!(
            control_triangle(0, &states, &spec),
            Err(Error::CollinearConfiguration { agent: 0 })
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(FormationSpec::new(3, [1.0, 1.0, 1.0], vec![]).is_err());
        let bad_anchor = AddedAgent {
            agent: 3,
            anchors: [0, 3, 1],
            targets: [0.5, 0.5],
        };
        assert!(FormationSpec::new(4, [PI / 3.0; 3], vec![bad_anchor]).is_err());
        let bad_target = AddedAgent {
            agent: 3,
            anchors: [0, 1, 2],
            targets: [0.5, PI],
        };
        assert!(FormationSpec::new(4, [PI / 3.0; 3], vec![bad_target]).is_err());
        assert!(FormationSpec::new(4, [PI / 3.0; 3], vec![]).is_err());
    }

    #[test]
    fn error_dynamics_equilateral_entries() {
        let f = error_dynamics_triangle([PI / 3.0; 3], [1.0; 3]).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(f[(i, i)], -3f64.sqrt(), epsilon = 1e-12);
            for j in 0..3 {
                if i != j {
                    assert_abs_diff_eq!(f[(i, j)], 3f64.sqrt() / 2.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn error_dynamics_match_finite_differences() {
        let spec = triangle_spec();
        let terms = spec.control_terms();
        let p = vec![point(0.0, 0.0), point(1.1, 0.1), point(0.45, 0.8)];
        let states = states_from_positions(&p);
        let u: Vec<Point> = (0..3)
            .map(|i| control_unified(i, &states, &terms).unwrap())
            .collect();
        let e = angle_errors(&p, &terms).unwrap();
        let h = 1e-6;
        let fwd: Vec<Point> = p.iter().zip(&u).map(|(x, v)| x + v * h).collect();
        let bwd: Vec<Point> = p.iter().zip(&u).map(|(x, v)| x - v * h).collect();
        let (ef, eb) = (
            angle_errors(&fwd, &terms).unwrap(),
            angle_errors(&bwd, &terms).unwrap(),
        );
        let angles = [e[0] + PI / 3.0, e[1] + PI / 3.0, e[2] + PI / 3.0];
        let lengths = [
            (p[0] - p[1]).norm(),
            (p[1] - p[2]).norm(),
            (p[2] - p[0]).norm(),
        ];
        let f = error_dynamics_triangle(angles, lengths).unwrap();
        let pred = f * nalgebra::Vector3::new(e[0], e[1], e[2]);
        for i in 0..3 {
            let fd = (ef[i] - eb[i]) / (2.0 * h);
            assert_abs_diff_eq!(fd, pred[i], epsilon = 1e-7);
        }
    }

    #[test]
    fn equilateral_linearization() {
        let spec = triangle_spec();
        let r = linearize_triangle(&spec, &equilateral()).unwrap();
        let d = -3.0 * 3f64.sqrt() / 2.0;
        assert_abs_diff_eq!(r.matrix[0][0], d, epsilon = 1e-12);
        assert_abs_diff_eq!(r.matrix[1][1], d, epsilon = 1e-12);
        assert_abs_diff_eq!(r.matrix[0][1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.matrix[1][0], 0.0, epsilon = 1e-12);
        assert!(r.hurwitz);
        assert_abs_diff_eq!(r.min_abs_real(), 2.598076211353316, epsilon = 1e-12);
    }

    #[test]
    fn canonical_realization_meets_targets() {
        let spec = FormationSpec::new(
            5,
            [0.9, 1.2, PI - 2.1],
            vec![
                AddedAgent {
                    agent: 3,
                    anchors: [0, 1, 2],
                    targets: [0.6, 0.8],
                },
                AddedAgent {
                    agent: 4,
                    anchors: [3, 2, 1],
                    targets: [0.5, 0.7],
                },
            ],
        )
        .unwrap();
        let p = spec.canonical_realization().unwrap();
        assert_eq!(p[0], point(0.0, 0.0));
        assert_eq!(p[1], point(1.0, 0.0));
        assert!(p[2].y > 0.0);
        let e = angle_errors(&p, &spec.control_terms()).unwrap();
        assert!(e.iter().all(|x| x.abs() < 1e-9), "{e:?}");
    }

    fn exact_added_jacobian(desired: &[Point], i: usize, anchors: [usize; 3]) -> Matrix2<f64> {
        let [j1, j2, j3] = anchors;
        let pi = desired[i];
        let z = |j: usize| (desired[j] - pi).normalize();
        let g1 = interior_gradient(&pi, &desired[j1], &desired[j2]).unwrap();
        let g2 = interior_gradient(&pi, &desired[j2], &desired[j3]).unwrap();
        let (b1, b2) = (z(j1) + z(j2), z(j2) + z(j3));
        -Matrix2::new(g1.dot(&b1), g1.dot(&b2), g2.dot(&b1), g2.dot(&b2))
    }

    #[test]
    fn closed_form_entries_match_the_exact_jacobian() {
        // agent 4 below agent 2, anchors 1 and 3 at distance 2, 40° apart from 2
        let d = |deg: f64| point(2.0 * deg.to_radians().cos(), 2.0 * deg.to_radians().sin());
        let desired = vec![d(130.0), point(0.0, 1.0), d(50.0), point(0.0, 0.0)];
        let tri = FormationSpec::triangle_from_positions(&desired).unwrap();
        let spec = FormationSpec::new(
            4,
            tri,
            vec![AddedAgent {
                agent: 3,
                anchors: [2, 1, 0],
                targets: [40f64.to_radians(); 2],
            }],
        )
        .unwrap();
        let r = linearize_added(&spec, 3, &desired).unwrap();
        assert_eq!(r.closed_form_entries, Some(true));
        assert_eq!(r.length_condition, Some(true));
        let exact = exact_added_jacobian(&desired, 3, [2, 1, 0]);
        for a in 0..2 {
            for b in 0..2 {
                assert_abs_diff_eq!(r.matrix[a][b], exact[(a, b)], epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(r.det_expansion.unwrap(), r.determinant, epsilon = 1e-12);
        assert!(r.trace < 0.0 && r.determinant > 0.0 && r.hurwitz);
    }

    #[test]
    fn linearization_signs_are_scale_invariant() {
        let spec = triangle_spec();
        let p = equilateral();
        let big: Vec<Point> = p.iter().map(|x| x * 7.5).collect();
        let a = linearize_triangle(&spec, &p).unwrap();
        let b = linearize_triangle(&spec, &big).unwrap();
        assert_eq!(a.hurwitz, b.hurwitz);
        assert_abs_diff_eq!(a.trace / 7.5, b.trace, epsilon = 1e-12);
    }
}
