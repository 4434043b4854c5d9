//! Combinatorial structures that force angle dependencies: closed cycles of
//! corners, fans of angles around one vertex, and overconstrained subsets.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use serde::Serialize;

use crate::angularity::AngleTriplet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DependencyKind {
    TripletCycle,
    FanAroundVertex,
    OverconstrainedSubset,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SubsetDetail {
    pub vertices: usize,
    pub constraints: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DependencyFinding {
    pub kind: DependencyKind,
    /// Indices into the angle set, ascending.
    pub members: Vec<usize>,
    pub detail: Option<SubsetDetail>,
}

#[derive(Clone, Copy, Debug)]
pub struct DetectOptions {
    /// Largest `M` for which all subsets are enumerated.
    pub subset_cap: usize,
    /// Fan angle sums must sit this close to a multiple of 2π.
    pub fan_tolerance: f64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            subset_cap: 20,
            fan_tolerance: 1e-6,
        }
    }
}

/// Runs all three searches.
///
/// `values` supplies target or realized angles, ordered as `angles`. When
/// present, a fan is only reported if its oriented angle sum is a whole
/// number of turns.
///
/// When `M` exceeds the subset cap the cycle and fan findings are returned
/// inside [`Error::SubsetSearchBudgetExceeded`].
pub fn detect_dependent_structures(
    angles: &[AngleTriplet],
    n: usize,
    values: Option<&[f64]>,
    opts: &DetectOptions,
) -> Result<Vec<DependencyFinding>> {
    let mut findings = find_triplet_cycles(angles);
    findings.extend(find_fans(angles, n, values, opts.fan_tolerance));
    if angles.len() > opts.subset_cap {
        return Err(Error::SubsetSearchBudgetExceeded {
            m: angles.len(),
            cap: opts.subset_cap,
            partial: findings,
        });
    }
    findings.extend(find_overconstrained_subsets(angles)?);
    Ok(findings)
}

/// A corner `(a, b, c)` read in either orientation of its triplet.
#[derive(Clone, Copy)]
struct Corner {
    triplet: usize,
    a: usize,
    b: usize,
    c: usize,
}

/// Closed polygons `v0 → v1 → … → v0` whose every corner `(v_{t−1}, v_t, v_{t+1})`
/// is constrained, in either orientation.
pub fn find_triplet_cycles(angles: &[AngleTriplet]) -> Vec<DependencyFinding> {
    let corners: Vec<Corner> = angles
        .iter()
        .enumerate()
        .flat_map(|(m, t)| {
            [
                Corner {
                    triplet: m,
                    a: t.i,
                    b: t.j,
                    c: t.k,
                },
                Corner {
                    triplet: m,
                    a: t.k,
                    b: t.j,
                    c: t.i,
                },
            ]
        })
        .collect();
    let next: Vec<Vec<usize>> = corners
        .iter()
        .map(|u| {
            corners
                .iter()
                .enumerate()
                .filter(|(_, v)| v.triplet != u.triplet && v.a == u.b && v.b == u.c)
                .map(|(id, _)| id)
                .collect()
        })
        .collect();

    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for start in 0..corners.len() {
        let mut path = vec![start];
        cycle_dfs(&corners, &next, start, &mut path, &mut seen, &mut out);
    }
    out
}

fn cycle_dfs(
    corners: &[Corner],
    next: &[Vec<usize>],
    start: usize,
    path: &mut Vec<usize>,
    seen: &mut BTreeSet<Vec<usize>>,
    out: &mut Vec<DependencyFinding>,
) {
    let last = *path.last().unwrap();
    for &v in &next[last] {
        if v == start && path.len() >= 3 {
            let mut members: Vec<usize> = path.iter().map(|&c| corners[c].triplet).collect();
            members.sort_unstable();
            if seen.insert(members.clone()) {
                out.push(DependencyFinding {
                    kind: DependencyKind::TripletCycle,
                    members,
                    detail: None,
                });
            }
            continue;
        }
        if v <= start {
            continue;
        }
        let middle = corners[v].b;
        if path.iter().any(|&c| corners[c].b == middle) {
            continue;
        }
        path.push(v);
        cycle_dfs(corners, next, start, path, seen, out);
        path.pop();
    }
}

/// Cycles of rays around a common vertex `m`: every triplet `(a, m, c)`
/// links ray targets `a` and `c`.
pub fn find_fans(
    angles: &[AngleTriplet],
    n: usize,
    values: Option<&[f64]>,
    tol: f64,
) -> Vec<DependencyFinding> {
    let mut out = Vec::new();
    for m in 0..n {
        // directed ray edges at m: (from, to, triplet, oriented angle)
        let mut edges: Vec<(usize, usize, usize, Option<f64>)> = Vec::new();
        for (idx, t) in angles.iter().enumerate().filter(|(_, t)| t.j == m) {
            let v = values.map(|vals| vals[idx]);
            edges.push((t.i, t.k, idx, v));
            edges.push((t.k, t.i, idx, v.map(|x| TAU - x)));
        }
        if edges.len() < 6 {
            continue;
        }
        let mut seen = BTreeSet::new();
        let mut targets: Vec<usize> = edges.iter().map(|e| e.0).collect();
        targets.sort_unstable();
        targets.dedup();
        for &s in &targets {
            let mut path: Vec<usize> = Vec::new();
            fan_dfs(&edges, s, s, &mut vec![s], &mut path, &mut |path| {
                let mut members: Vec<usize> = path.iter().map(|&e| edges[e].2).collect();
                members.sort_unstable();
                if values.is_some() {
                    let sum: f64 = path.iter().map(|&e| edges[e].3.unwrap()).sum();
                    let turns = (sum / TAU).round();
                    if turns < 1.0 || (sum - turns * TAU).abs() > tol {
                        return;
                    }
                }
                if seen.insert(members.clone()) {
                    out.push(DependencyFinding {
                        kind: DependencyKind::FanAroundVertex,
                        members,
                        detail: None,
                    });
                }
            });
        }
    }
    out
}

fn fan_dfs(
    edges: &[(usize, usize, usize, Option<f64>)],
    start: usize,
    at: usize,
    visited: &mut Vec<usize>,
    path: &mut Vec<usize>,
    found: &mut impl FnMut(&[usize]),
) {
    for (e, &(from, to, triplet, _)) in edges.iter().enumerate() {
        if from != at || path.iter().any(|&p| edges[p].2 == triplet) {
            continue;
        }
        if to == start {
            if path.len() >= 2 {
                path.push(e);
                found(path);
                path.pop();
            }
            continue;
        }
        if to < start || visited.contains(&to) {
            continue;
        }
        visited.push(to);
        path.push(e);
        fan_dfs(edges, start, to, visited, path, found);
        path.pop();
        visited.pop();
    }
}

/// Inclusion-minimal subsets `𝒜′` with `|𝒜′| > 2N′ − 4`, found by exhaustive
/// enumeration.
pub fn find_overconstrained_subsets(angles: &[AngleTriplet]) -> Result<Vec<DependencyFinding>> {
    let m = angles.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    if m >= usize::BITS as usize - 1 {
        return Err(Error::InvalidConfig(format!(
            "subset search over {m} constraints"
        )));
    }
    let max_vertex = angles.iter().flat_map(|t| t.vertices()).max().unwrap_or(0);
    if max_vertex >= 128 {
        return Err(Error::InvalidConfig(
            "subset search supports at most 128 vertices".into(),
        ));
    }
    let vertex_masks: Vec<u128> = angles
        .iter()
        .map(|t| {
            t.vertices()
                .iter()
                .fold(0u128, |acc, &v| acc | (1u128 << v))
        })
        .collect();

    let total = 1usize << m;
    let mut union = vec![0u128; total];
    // contains[s]: s or one of its subsets is overconstrained
    let mut contains = vec![false; total];
    let mut out = Vec::new();
    for s in 1..total {
        let low = s.trailing_zeros() as usize;
        union[s] = union[s & (s - 1)] | vertex_masks[low];
        let size = s.count_ones() as usize;
        let verts = union[s].count_ones() as usize;
        let violates = size + 4 > 2 * verts;
        let mut inherited = false;
        let mut rest = s;
        while rest != 0 {
            let bit = rest & rest.wrapping_neg();
            rest ^= bit;
            if contains[s ^ bit] {
                inherited = true;
                break;
            }
        }
        contains[s] = violates || inherited;
        if violates && !inherited {
            out.push(DependencyFinding {
                kind: DependencyKind::OverconstrainedSubset,
                members: (0..m).filter(|b| s & (1 << b) != 0).collect(),
                detail: Some(SubsetDetail {
                    vertices: verts,
                    constraints: size,
                }),
            });
        }
    }
    Ok(out)
}
