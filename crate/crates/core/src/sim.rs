//! Fixed-step closed-loop simulation, event monitoring and convergence-rate
//! estimation.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::control::{
    angle_errors, control_unified, control_unified_local, min_controlled_sine, AgentState,
    ControlTerm, FormationSpec,
};
use crate::error::{Error, Result};
use crate::geometry::Point;

/// Default bound on every final error for a run to count as converged.
pub const CONVERGENCE_TOL: f64 = 1e-6;
/// Any coordinate beyond this aborts the run.
pub const BLOWUP_LIMIT: f64 = 1e12;
const RATE_FLOOR: f64 = 1e-10;
const RATE_MIN_SAMPLES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameMode {
    Global,
    RandomLocalFrames,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub step_size: f64,
    pub duration: f64,
    pub integrator: Integrator,
    pub collision_epsilon: f64,
    pub collinearity_epsilon: f64,
    pub seed: u64,
    pub frame_mode: FrameMode,
    pub convergence_tol: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            step_size: 1e-3,
            duration: 20.0,
            integrator: Integrator::Rk4,
            collision_epsilon: 1e-4,
            collinearity_epsilon: 1e-8,
            seed: 0,
            frame_mode: FrameMode::Global,
            convergence_tol: CONVERGENCE_TOL,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidConfig("step size must be positive".into()));
        }
        if !(self.duration >= self.step_size) || !self.duration.is_finite() {
            return Err(Error::InvalidConfig(
                "duration must be at least one step".into(),
            ));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidConfig(
                "convergence tolerance must be positive".into(),
            ));
        }
        if !(self.collision_epsilon >= 0.0 && self.collinearity_epsilon >= 0.0) {
            return Err(Error::InvalidConfig(
                "event thresholds must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Two agents sharing a controlled angle came too close; halts the run.
    Collision,
    /// Two unrelated agents came too close; logged only.
    ProximityWarning,
    /// A controlled corner became (nearly) collinear; halts the run.
    Collinearity,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    /// Zero-based agent indices.
    pub agents: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub rate: f64,
    pub r_squared: f64,
    pub samples: usize,
    pub window_start: f64,
    pub window_end: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<Point>>,
    /// Per logged step, one error per control term.
    pub angle_errors: Vec<Vec<f64>>,
    pub events: Vec<Event>,
    pub converged: bool,
    /// Per error series; `None` when the series has too little decay to fit.
    pub fitted_rates: Vec<Option<RateFit>>,
    /// Frames used for the run, one angle per agent.
    pub frame_angles: Vec<f64>,
}

impl Trajectory {
    pub fn final_positions(&self) -> &[Point] {
        self.positions.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn final_errors(&self) -> &[f64] {
        self.angle_errors.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Simulated horizon over which the events were checked.
    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// `|e|` over time for one control term.
    pub fn error_series(&self, term: usize) -> Vec<f64> {
        self.angle_errors.iter().map(|e| e[term].abs()).collect()
    }
}

/// Pairs of agents appearing together in some controlled angle.
fn constrained_pairs(terms: &[ControlTerm]) -> BTreeSet<(usize, usize)> {
    let mut s = BTreeSet::new();
    for t in terms {
        for (a, b) in [(t.agent, t.j), (t.agent, t.k), (t.j, t.k)] {
            s.insert((a.min(b), a.max(b)));
        }
    }
    s
}

fn frames_for(cfg: &SimConfig, n: usize) -> Vec<f64> {
    match cfg.frame_mode {
        FrameMode::Global => vec![0.0; n],
        FrameMode::RandomLocalFrames => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..n).map(|_| rng.gen_range(0.0..TAU)).collect()
        }
    }
}

struct Dynamics<'a> {
    terms: &'a [ControlTerm],
    frames: Vec<AgentState>,
    local: bool,
}

impl Dynamics<'_> {
    fn velocity(&mut self, x: &[Point]) -> Result<Vec<Point>> {
        for (s, p) in self.frames.iter_mut().zip(x) {
            s.position = *p;
        }
        (0..x.len())
            .map(|i| {
                if self.local {
                    control_unified_local(i, &self.frames, self.terms)
                } else {
                    control_unified(i, &self.frames, self.terms)
                }
            })
            .collect()
    }

    fn step(&mut self, x: &[Point], h: f64, integrator: Integrator) -> Result<Vec<Point>> {
        let axpy = |x: &[Point], k: &[Point], s: f64| -> Vec<Point> {
            x.iter().zip(k).map(|(p, v)| p + v * s).collect()
        };
        match integrator {
            Integrator::Euler => {
                let k1 = self.velocity(x)?;
                Ok(axpy(x, &k1, h))
            }
            Integrator::Rk4 => {
                let k1 = self.velocity(x)?;
                let k2 = self.velocity(&axpy(x, &k1, 0.5 * h))?;
                let k3 = self.velocity(&axpy(x, &k2, 0.5 * h))?;
                let k4 = self.velocity(&axpy(x, &k3, h))?;
                Ok(x.iter()
                    .enumerate()
                    .map(|(i, p)| p + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0))
                    .collect())
            }
        }
    }
}

fn check_start(spec: &FormationSpec, initial: &[Point], cfg: &SimConfig) -> Result<()> {
    cfg.validate()?;
    if initial.len() != spec.agent_count() {
        return Err(Error::InvalidConfig(format!(
            "{} initial positions for {} agents",
            initial.len(),
            spec.agent_count()
        )));
    }
    if initial.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(Error::InvalidConfig(
            "initial positions must be finite".into(),
        ));
    }
    for a in 0..initial.len() {
        for b in a + 1..initial.len() {
            if (initial[a] - initial[b]).norm() <= cfg.collision_epsilon.max(1e-12) {
                return Err(Error::CoincidentAgents { a, b });
            }
        }
    }
    let terms = spec.control_terms();
    if let Some(t) = terms.iter().find(|t| {
        min_controlled_sine(initial, std::slice::from_ref(*t))
            .map_or(true, |s| s < cfg.collinearity_epsilon)
    }) {
        return Err(Error::CollinearConfiguration { agent: t.agent });
    }
    Ok(())
}

/// Integrates all agents synchronously under the unified law, logging every
/// step.
///
/// Collisions between agents sharing a constraint and collinear controlled
/// corners halt the run with [`Error::EventHalt`].
pub fn simulate(spec: &FormationSpec, initial: &[Point], cfg: &SimConfig) -> Result<Trajectory> {
    check_start(spec, initial, cfg)?;
    let terms = spec.control_terms();
    let n = initial.len();
    let pairs = constrained_pairs(&terms);
    let frame_angles = frames_for(cfg, n);
    let mut dynamics = Dynamics {
        terms: &terms,
        frames: frame_angles
            .iter()
            .enumerate()
            .map(|(i, th)| AgentState::new(i, initial[i]).with_frame(*th))
            .collect(),
        local: cfg.frame_mode == FrameMode::RandomLocalFrames,
    };

    let steps = (cfg.duration / cfg.step_size).round() as usize;
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        positions: Vec::with_capacity(steps + 1),
        angle_errors: Vec::with_capacity(steps + 1),
        events: Vec::new(),
        converged: false,
        fitted_rates: Vec::new(),
        frame_angles,
    };
    traj.times.push(0.0);
    traj.positions.push(initial.to_vec());
    traj.angle_errors.push(angle_errors(initial, &terms)?);
    let mut warned: BTreeSet<(usize, usize)> = BTreeSet::new();

    let mut x = initial.to_vec();
    for s in 1..=steps {
        let t = s as f64 * cfg.step_size;
        x = match dynamics.step(&x, cfg.step_size, cfg.integrator) {
            Ok(next) => next,
            Err(Error::CollinearConfiguration { agent }) => {
                traj.events.push(Event {
                    t,
                    kind: EventKind::Collinearity,
                    agents: vec![agent],
                });
                return Err(Error::EventHalt(Box::new(finish(
                    traj,
                    cfg.convergence_tol,
                ))));
            }
            Err(Error::CoincidentAgents { a, b }) => {
                traj.events.push(Event {
                    t,
                    kind: EventKind::Collision,
                    agents: vec![a, b],
                });
                return Err(Error::EventHalt(Box::new(finish(
                    traj,
                    cfg.convergence_tol,
                ))));
            }
            Err(e) => return Err(e),
        };
        if x.iter()
            .any(|p| p.iter().any(|c| !c.is_finite() || c.abs() > BLOWUP_LIMIT))
        {
            return Err(Error::NumericalBlowup { t });
        }

        let mut halt = false;
        for a in 0..n {
            for b in a + 1..n {
                if (x[a] - x[b]).norm() < cfg.collision_epsilon {
                    if pairs.contains(&(a, b)) {
                        traj.events.push(Event {
                            t,
                            kind: EventKind::Collision,
                            agents: vec![a, b],
                        });
                        halt = true;
                    } else if warned.insert((a, b)) {
                        traj.events.push(Event {
                            t,
                            kind: EventKind::ProximityWarning,
                            agents: vec![a, b],
                        });
                    }
                }
            }
        }
        if !halt {
            for term in &terms {
                let sin = min_controlled_sine(&x, std::slice::from_ref(term)).unwrap_or(0.0);
                if sin < cfg.collinearity_epsilon {
                    traj.events.push(Event {
                        t,
                        kind: EventKind::Collinearity,
                        agents: vec![term.j, term.agent, term.k],
                    });
                    halt = true;
                    break;
                }
            }
        }
        traj.times.push(t);
        traj.positions.push(x.clone());
        traj.angle_errors
            .push(angle_errors(&x, &terms).unwrap_or_else(|_| vec![f64::NAN; terms.len()]));
        if halt {
            return Err(Error::EventHalt(Box::new(finish(
                traj,
                cfg.convergence_tol,
            ))));
        }
    }
    Ok(finish(traj, cfg.convergence_tol))
}

fn finish(mut traj: Trajectory, tol: f64) -> Trajectory {
    traj.converged = traj.final_errors().iter().all(|e| e.abs() < tol);
    let k = traj.angle_errors.first().map_or(0, Vec::len);
    traj.fitted_rates = (0..k)
        .map(|term| fit_exponential_rate(&traj.times, &traj.error_series(term)).ok())
        .collect();
    traj
}

/// Least-squares decay rate of `ln|e|` over the window where
/// `|e| ∈ [1e-10, |e(0)| / 2]`.
pub fn fit_exponential_rate(times: &[f64], abs_errors: &[f64]) -> Result<RateFit> {
    let initial = abs_errors.first().copied().unwrap_or(0.0).abs();
    let (ts, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(abs_errors)
        .map(|(t, e)| (*t, e.abs()))
        .filter(|(_, e)| e.is_finite() && *e >= RATE_FLOOR && *e <= 0.5 * initial)
        .map(|(t, e)| (t, e.ln()))
        .unzip();
    let n = ts.len();
    if n < RATE_MIN_SAMPLES {
        return Err(Error::InsufficientData { usable: n });
    }
    let nf = n as f64;
    let mt = ts.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData { usable: n });
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 {
        (sxy * sxy) / (sxx * syy)
    } else {
        1.0
    };
    Ok(RateFit {
        rate: -slope,
        r_squared,
        samples: n,
        window_start: ts[0],
        window_end: ts[n - 1],
    })
}

/// Runs once in the global frame and once with seeded random per-agent
/// frames; returns both runs and the largest position deviation between them.
pub fn local_frame_experiment(
    spec: &FormationSpec,
    initial: &[Point],
    cfg: &SimConfig,
    frame_seed: u64,
) -> Result<(Trajectory, Trajectory, f64)> {
    let global = simulate(
        spec,
        initial,
        &SimConfig {
            frame_mode: FrameMode::Global,
            ..cfg.clone()
        },
    )?;
    let local = simulate(
        spec,
        initial,
        &SimConfig {
            frame_mode: FrameMode::RandomLocalFrames,
            seed: frame_seed,
            ..cfg.clone()
        },
    )?;
    let deviation = max_position_deviation(&global, &local);
    Ok((global, local, deviation))
}

pub fn max_position_deviation(a: &Trajectory, b: &Trajectory) -> f64 {
    a.positions
        .iter()
        .zip(&b.positions)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).norm()))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantReport {
    /// Largest `|e1 + e2 + e3|` over the run.
    pub max_triangle_error_sum: f64,
    /// Smallest distance between agents sharing a controlled angle.
    pub min_constrained_distance: f64,
    /// Smallest `|sin α|` over controlled corners.
    pub min_controlled_sine: f64,
    pub horizon: f64,
    pub violations: Vec<String>,
}

/// Checks the triangle error-sum identity and the collision- and
/// collinearity-free claims along a finished run.
pub fn monitor_invariants(traj: &Trajectory, spec: &FormationSpec) -> InvariantReport {
    let terms = spec.control_terms();
    let pairs = constrained_pairs(&terms);
    let max_sum = traj
        .angle_errors
        .iter()
        .map(|e| (e[0] + e[1] + e[2]).abs())
        .fold(0.0, f64::max);
    let mut min_dist = f64::INFINITY;
    let mut min_sine = f64::INFINITY;
    for x in &traj.positions {
        for &(a, b) in &pairs {
            min_dist = min_dist.min((x[a] - x[b]).norm());
        }
        min_sine = min_sine.min(min_controlled_sine(x, &terms).unwrap_or(0.0));
    }
    let mut violations = Vec::new();
    if max_sum > 1e-9 {
        violations.push(format!("triangle error sum reached {max_sum:e}"));
    }
    if min_dist < 1e-4 {
        violations.push(format!("constrained agents came within {min_dist:e}"));
    }
    if min_sine < 1e-8 {
        violations.push(format!("controlled corner sine dropped to {min_sine:e}"));
    }
    InvariantReport {
        max_triangle_error_sum: max_sum,
        min_constrained_distance: min_dist,
        min_controlled_sine: min_sine,
        horizon: traj.horizon(),
        violations,
    }
}
