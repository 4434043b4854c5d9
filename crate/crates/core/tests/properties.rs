use std::f64::consts::{PI, TAU};

use angle_rigidity::angularity::{is_congruent, is_equivalent};
use angle_rigidity::construction::*;
use angle_rigidity::control::*;
use angle_rigidity::dependency::{detect_dependent_structures, DetectOptions};
use angle_rigidity::geometry::{interior_angle, rotate, signed_angle};
use angle_rigidity::io::AngularityFile;
use angle_rigidity::rigidity::{
    numerical_rank, rigidity_matrix, singular_values, trivial_motion_basis, RankTolerance,
};
use angle_rigidity::{classify, point, AngleTriplet, Angularity, Point};
use proptest::prelude::*;

fn pt() -> impl Strategy<Value = Point> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y)| point(x, y))
}

fn pts(n: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec(pt(), n)
}

fn well_separated(p: &[Point], d: f64) -> bool {
    p.iter()
        .enumerate()
        .all(|(a, x)| p[a + 1..].iter().all(|y| (x - y).norm() > d))
}

fn not_collinear(a: &Point, b: &Point, c: &Point, s: f64) -> bool {
    let (u, v) = (b - a, c - a);
    (u.x * v.y - u.y * v.x).abs() / (u.norm() * v.norm()) > s
}

/// Random angle sets: up to `2N − 4` distinct corners.
fn angularity_strategy() -> impl Strategy<Value = Angularity> {
    (3usize..=8)
        .prop_flat_map(|n| {
            (
                pts(n),
                prop::collection::vec((0..n, 0..n, 0..n), 1..=2 * n - 4),
            )
        })
        .prop_filter_map("invalid", |(p, raw)| {
            let mut angles: Vec<AngleTriplet> = Vec::new();
            for (i, j, k) in raw {
                let t = AngleTriplet::new(i, j, k);
                if i != j
                    && j != k
                    && i != k
                    && !angles
                        .iter()
                        .any(|u| u.same_corner(&t) || u.is_explementary_to(&t))
                {
                    angles.push(t);
                }
            }
            if angles.is_empty() || !well_separated(&p, 1e-3) {
                return None;
            }
            Angularity::new(p, angles).ok()
        })
}

#[derive(Debug)]
struct Similarity {
    angle: f64,
    scale: f64,
    shift: Point,
}

fn similarity() -> impl Strategy<Value = Similarity> {
    (0.0..TAU, 0.1f64..10.0, pt()).prop_map(|(angle, scale, shift)| Similarity {
        angle,
        scale,
        shift: shift * 5.0,
    })
}

impl Similarity {
    fn apply(&self, p: &Point) -> Point {
        rotate(p, self.angle) * self.scale + self.shift
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn conjugate_angles_sum_to_a_turn(i in pt(), j in pt(), k in pt()) {
        prop_assume!((i - j).norm() > 1e-6 && (k - j).norm() > 1e-6);
        let a = signed_angle(&i, &j, &k).unwrap();
        let b = signed_angle(&k, &j, &i).unwrap();
        if a == 0.0 && b == 0.0 {
            return Ok(());
        }
        prop_assert!((a + b - TAU).abs() < 1e-12, "{a} + {b}");
    }

    #[test]
    fn interior_angles_of_a_triangle_sum_to_pi(a in pt(), b in pt(), c in pt()) {
        prop_assume!(well_separated(&[a, b, c], 1e-3) && not_collinear(&a, &b, &c, 1e-6));
        let s = interior_angle(&c, &a, &b).unwrap() + interior_angle(&a, &b, &c).unwrap() + interior_angle(&b, &c, &a).unwrap();
        prop_assert!((s - PI).abs() < 1e-9);
    }

    #[test]
    fn angle_function_is_similarity_invariant(a in angularity_strategy(), s in similarity()) {
        let b = a.map_positions(|p| s.apply(p)).unwrap();
        let (fa, fb) = (a.angle_function().unwrap(), b.angle_function().unwrap());
        for (x, y) in fa.values().iter().zip(fb.values()) {
            let d = (x - y).abs();
            prop_assert!(d.min(TAU - d) < 1e-9);
        }
        prop_assert!(is_congruent(&a, &b, 1e-9).unwrap());
    }

    #[test]
    fn congruence_implies_equivalence(a in angularity_strategy(), other in pts(8), s in similarity(), shuffle in any::<bool>()) {
        let n = a.vertex_count();
        let b = if shuffle {
            match a.with_positions(other[..n].to_vec()) {
                Ok(b) => b,
                Err(_) => return Ok(()),
            }
        } else {
            a.map_positions(|p| s.apply(p)).unwrap()
        };
        if is_congruent(&a, &b, 1e-6).unwrap() {
            prop_assert!(is_equivalent(&a, &b, 1e-6).unwrap());
        }
    }

    #[test]
    fn rigidity_rows_are_negated_angle_gradients(i in pt(), j in pt(), k in pt()) {
        prop_assume!((i - j).norm() > 0.1 && (k - j).norm() > 0.1);
        let p = vec![i, j, k];
        let a = Angularity::new(p.clone(), vec![AngleTriplet::new(0, 1, 2)]).unwrap();
        let b = rigidity_matrix(&a).unwrap();
        let h = 1e-6;
        let (mut err, mut norm) = (0.0, 0.0);
        for v in 0..3 {
            for c in 0..2 {
                let (mut f, mut g) = (p.clone(), p.clone());
                f[v][c] += h;
                g[v][c] -= h;
                let fd = (signed_angle(&f[0], &f[1], &f[2]).unwrap() - signed_angle(&g[0], &g[1], &g[2]).unwrap()) / (2.0 * h);
                let e = b.entries[(0, 2 * v + c)];
                err += (e + fd).powi(2);
                norm += e * e;
            }
        }
        prop_assert!((err / norm).sqrt() <= 1e-5);
    }

    #[test]
    fn trivial_motions_span_the_null_space_floor(a in angularity_strategy()) {
        let b = rigidity_matrix(&a).unwrap();
        let n = a.vertex_count();
        let rank = numerical_rank(&b.entries, RankTolerance::default()).unwrap();
        prop_assert!(rank <= 2 * n - 4);
        let sigma = singular_values(&b.entries).unwrap().max();
        for q in trivial_motion_basis(a.positions()).vectors() {
            prop_assert!((&b.entries * q).norm() <= 1e-8 * sigma * q.norm());
        }
    }

    #[test]
    fn findings_imply_rank_deficiency(a in angularity_strategy()) {
        let values = a.angle_function().unwrap();
        let f = detect_dependent_structures(a.angles(), a.vertex_count(), Some(values.values()), &DetectOptions::default()).unwrap();
        let r = classify(&a).unwrap();
        if !f.is_empty() && r.generic {
            prop_assert!(r.rank < a.angle_count(), "findings {:?} rank {}", f, r.rank);
        }
    }

    #[test]
    fn json_round_trip_preserves_angles(a in angularity_strategy()) {
        let a = a.with_realized_targets().unwrap();
        let text = serde_json::to_string(&AngularityFile::from_angularity(&a)).unwrap();
        let back = serde_json::from_str::<AngularityFile>(&text).unwrap().to_angularity().unwrap();
        prop_assert_eq!(back.positions(), a.positions());
        for (x, y) in a.angles().iter().zip(back.angles()) {
            prop_assert_eq!(x.vertices(), y.vertices());
            prop_assert!((x.target.unwrap() - y.target.unwrap()).abs() < 1e-12);
        }
    }
}

fn seed_triangle(p: &[Point]) -> Option<Angularity> {
    if !well_separated(&p[..3], 0.1) || !not_collinear(&p[0], &p[1], &p[2], 0.2) {
        return None;
    }
    let t = [(2, 0, 1), (0, 1, 2), (1, 0, 2), (2, 1, 0)];
    let (c1, c2) = if signed_angle(&p[2], &p[0], &p[1]).unwrap() < PI {
        (t[0], t[1])
    } else {
        (t[2], t[3])
    };
    let corner = |(i, j, k): (usize, usize, usize)| {
        AngleTriplet::new(i, j, k).with_target(signed_angle(&p[i], &p[j], &p[k]).unwrap())
    };
    Seed::new([p[0], p[1], p[2]], [corner(c1), corner(c2)])
        .ok()?
        .angularity()
        .ok()
}

/// A constraint on vertex 3 that `q` satisfies.
fn constraint_through(p: &[Point], q: &Point, linear: bool, a: usize, b: usize) -> ConstraintSpec {
    if linear {
        ConstraintSpec::Linear {
            anchor: a,
            reference: b,
            beta: signed_angle(&p[b], &p[a], q).unwrap(),
        }
    } else {
        ConstraintSpec::Quadratic {
            chord: (a, b),
            beta: signed_angle(&p[a], q, &p[b]).unwrap(),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn type_one_steps_have_at_most_one_placement(p in pts(4), kind in 0usize..3, rot in 0usize..3) {
        let Some(a) = seed_triangle(&p) else { return Ok(()) };
        let q = p[3];
        prop_assume!(p[..3].iter().all(|x| (x - q).norm() > 0.05));
        let (u, v, w) = (rot, (rot + 1) % 3, (rot + 2) % 3);
        let pos = a.positions();
        let cs = match kind {
            0 => [constraint_through(pos, &q, true, u, w), constraint_through(pos, &q, true, v, w)],
            1 => [constraint_through(pos, &q, true, u, w), constraint_through(pos, &q, false, u, v)],
            _ => [constraint_through(pos, &q, false, u, v), constraint_through(pos, &q, false, v, w)],
        };
        let Ok(step) = AdditionStep::new(cs) else { return Ok(()) };
        prop_assert!(step.kind.is_type_one());
        match step.candidates(&a) {
            Ok(c) => {
                prop_assert!(c.len() <= 1, "{} candidates", c.len());
                for x in &c {
                    for k in &step.constraints {
                        prop_assert!(locus_residual(&k.locus(pos).unwrap(), x).unwrap() <= 1e-9);
                    }
                }
            }
            Err(e) => prop_assert!(matches!(e, angle_rigidity::Error::AlignedRays | angle_rigidity::Error::InvalidAngle(_)), "{e}"),
        }
    }

    #[test]
    fn intersections_satisfy_both_loci(a in pt(), b in pt(), c in pt(), d in pt(), beta1 in 0.05f64..(TAU - 0.05), beta2 in 0.05f64..(TAU - 0.05), ray in any::<bool>()) {
        prop_assume!(well_separated(&[a, b, c, d], 0.05));
        prop_assume!((beta1 - PI).abs() > 1e-3 && (beta2 - PI).abs() > 1e-3);
        let l1 = if ray {
            Locus::Ray(constraint_ray(&a, &b, beta1).unwrap())
        } else {
            Locus::Arc(arc_for_signed_target(&a, &b, beta1).unwrap())
        };
        let l2 = Locus::Arc(arc_for_signed_target(&c, &d, beta2).unwrap());
        if let Ok(pts) = intersect(&l1, &l2) {
            prop_assert!(pts.len() <= 2);
            for q in &pts {
                prop_assert!(locus_residual(&l1, q).unwrap() <= 1e-9);
                prop_assert!(locus_residual(&l2, q).unwrap() <= 1e-9);
            }
        }
    }

    #[test]
    fn type_two_alternatives_are_equivalent_not_congruent(p in pts(4)) {
        let Some(a) = seed_triangle(&p) else { return Ok(()) };
        let q = p[3];
        prop_assume!(p[..3].iter().all(|x| (x - q).norm() > 0.05));
        let pos = a.positions().to_vec();
        let step = AdditionStep::new([
            constraint_through(&pos, &q, true, 2, 1),
            constraint_through(&pos, &q, false, 0, 1),
        ]).unwrap();
        prop_assert_eq!(step.kind, AdditionKind::TypeII1);
        let c = step.candidates(&a).unwrap();
        prop_assert!(c.iter().any(|x| (x - q).norm() < 1e-7));
        if c.len() == 2 && (c[0] - c[1]).norm() > 1e-3 {
            let r: Vec<Angularity> = c.iter().map(|x| {
                let mut v = pos.clone();
                v.push(*x);
                Angularity::new(v, [a.angles(), &step.constraints.map(|k| k.triplet(3))].concat()).unwrap()
            }).collect();
            prop_assert!(is_equivalent(&r[0], &r[1], 1e-7).unwrap());
            prop_assert!(!is_congruent(&r[0], &r[1], 1e-7).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn type_one_builds_are_minimally_rigid(p in pts(7), steps in prop::collection::vec((0usize..3, 0usize..64, 0usize..64, 0usize..64), 4)) {
        let Some(seed) = seed_triangle(&p) else { return Ok(()) };
        prop_assume!(well_separated(&p, 0.05));
        let mut a = seed;
        for (kind, r1, r2, r3) in steps {
            let v = a.vertex_count();
            let q = p[v];
            let pos = a.positions().to_vec();
            let x = r1 % v;
            let y = (x + 1 + r2 % (v - 1)) % v;
            let rest: Vec<usize> = (0..v).filter(|&u| u != x && u != y).collect();
            let z = rest[r3 % rest.len()];
            let cs = match kind {
                0 => [constraint_through(&pos, &q, true, x, z), constraint_through(&pos, &q, true, y, z)],
                1 => [constraint_through(&pos, &q, true, x, z), constraint_through(&pos, &q, false, x, y)],
                _ => [constraint_through(&pos, &q, false, x, y), constraint_through(&pos, &q, false, y, z)],
            };
            let step = AdditionStep::new(cs).unwrap();
            match add_vertex_type1(&a, &step) {
                Ok(b) => a = b,
                    Err(e) => prop_assert!(matches!(e, angle_rigidity::Error::AlignedRays), "{e}"),
            }
        }
        let r = classify(&a).unwrap();
        prop_assert_eq!(a.angle_count(), 2 * a.vertex_count() - 4);
        if r.generic {
            prop_assert_eq!(r.rank, 2 * a.vertex_count() - 4);
        }
    }

    #[test]
    fn unified_law_is_similarity_equivariant(p in pts(4), s in similarity(), t in (0.3f64..1.2, 0.3f64..1.2), w in (0.3f64..1.2, 0.3f64..1.2)) {
        prop_assume!(well_separated(&p, 0.05));
        for (a, b, c) in [(0, 1, 2), (0, 3, 1), (3, 1, 2)] {
            prop_assume!(not_collinear(&p[a], &p[b], &p[c], 1e-3));
        }
        let spec = FormationSpec::new(4, [t.0, t.1, PI - t.0 - t.1], vec![AddedAgent { agent: 3, anchors: [0, 1, 2], targets: [w.0, w.1] }]);
        let Ok(spec) = spec else { return Ok(()) };
        let terms = spec.control_terms();
        let moved: Vec<Point> = p.iter().map(|x| s.apply(x)).collect();
        let (sa, sb) = (states_from_positions(&p), states_from_positions(&moved));
        for i in 0..4 {
            let u = control_unified(i, &sa, &terms).unwrap();
            let v = control_unified(i, &sb, &terms).unwrap();
            prop_assert!((rotate(&u, s.angle) - v).norm() <= 1e-9 * (1.0 + u.norm()));
        }
    }

    #[test]
    fn local_frames_reproduce_the_global_law(p in pts(4), frames in prop::collection::vec(0.0..TAU, 4)) {
        prop_assume!(well_separated(&p, 0.05));
        let spec = FormationSpec::new(4, [1.0, 1.0, PI - 2.0], vec![AddedAgent { agent: 3, anchors: [2, 0, 1], targets: [0.6, 0.9] }]).unwrap();
        let terms = spec.control_terms();
        let global = states_from_positions(&p);
        let local: Vec<AgentState> = global.iter().cloned().zip(&frames).map(|(s, f)| s.with_frame(*f)).collect();
        for i in 0..4 {
            match (control_unified(i, &global, &terms), control_unified_local(i, &local, &terms)) {
                (Ok(u), Ok(v)) => prop_assert!((u - v).norm() <= 1e-12),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "frames changed the outcome"),
            }
        }
    }

    #[test]
    fn triangle_errors_sum_to_zero_and_bound_the_law(p in pts(3), t in (0.2f64..1.4, 0.2f64..1.4)) {
        prop_assume!(well_separated(&p, 0.05) && not_collinear(&p[0], &p[1], &p[2], 1e-3));
        let spec = FormationSpec::new(3, [t.0, t.1, PI - t.0 - t.1], vec![]).unwrap();
        let e = angle_errors(&p, &spec.control_terms()).unwrap();
        prop_assert!((e[0] + e[1] + e[2]).abs() <= 1e-9);
        let states = states_from_positions(&p);
        for i in 0..3 {
            let u = control_triangle(i, &states, &spec).unwrap();
            prop_assert!(u.norm() <= 2.0 * e[i].abs() + 1e-12);
        }
    }
}
