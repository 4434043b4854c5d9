//! File formats: JSON documents with 1-based ids and angles in degrees, and
//! the trajectory CSV with its JSON sidecar.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::angularity::{AngleTriplet, Angularity};
use crate::construction::{
    AdditionKind, AdditionStep, BuildOutcome, ConstraintSpec, ConstructionPlan, Seed,
};
use crate::control::{AddedAgent, FormationSpec};
use crate::dependency::{DependencyFinding, DependencyKind};
use crate::error::{Error, Result};
use crate::geometry::{point, Point};
use crate::rigidity::RigidityReport;
use crate::sim::{EventKind, FrameMode, Integrator, RateFit, SimConfig, Trajectory};

fn xy(p: &Point) -> [f64; 2] {
    [p.x, p.y]
}

fn from_xy(a: &[f64; 2]) -> Point {
    point(a[0], a[1])
}

fn zero_based(id: usize, field: &str) -> Result<usize> {
    id.checked_sub(1)
        .ok_or_else(|| Error::InvalidConfig(format!("{field}: ids are 1-based, found 0")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleDto {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    #[serde(default)]
    pub target_deg: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngularityFile {
    pub vertices: usize,
    pub positions: Vec<[f64; 2]>,
    pub angles: Vec<AngleDto>,
}

impl AngularityFile {
    pub fn to_angularity(&self) -> Result<Angularity> {
        if self.positions.len() != self.vertices {
            return Err(Error::InvalidConfig(format!(
                "vertices is {} but {} positions are listed",
                self.vertices,
                self.positions.len()
            )));
        }
        let angles = self
            .angles
            .iter()
            .enumerate()
            .map(|(m, a)| {
                let field = format!("angles[{m}]");
                let mut t = AngleTriplet::new(
                    zero_based(a.i, &field)?,
                    zero_based(a.j, &field)?,
                    zero_based(a.k, &field)?,
                );
                t.target = a.target_deg.map(f64::to_radians);
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()?;
        Angularity::new(self.positions.iter().map(from_xy).collect(), angles)
    }

    pub fn from_angularity(a: &Angularity) -> Self {
        Self {
            vertices: a.vertex_count(),
            positions: a.positions().iter().map(xy).collect(),
            angles: a
                .angles()
                .iter()
                .map(|t| AngleDto {
                    i: t.i + 1,
                    j: t.j + 1,
                    k: t.k + 1,
                    target_deg: t.target.map(f64::to_degrees),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FindingDto {
    pub kind: DependencyKind,
    /// 1-based positions in the angle set.
    pub members: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vertices: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraints: Option<usize>,
}

impl From<&DependencyFinding> for FindingDto {
    fn from(f: &DependencyFinding) -> Self {
        Self {
            kind: f.kind,
            members: f.members.iter().map(|m| m + 1).collect(),
            vertices: f.detail.map(|d| d.vertices),
            constraints: f.detail.map(|d| d.constraints),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportDto {
    pub rank: usize,
    pub max_rank: usize,
    pub infinitesimally_rigid: bool,
    pub minimally_rigid: bool,
    pub independent_angles: bool,
    pub findings: Vec<FindingDto>,
    pub min_involvement: usize,
    pub nullspace_dim: usize,
    pub generic: bool,
    pub trivial_motion_residual: f64,
    pub subset_search_complete: bool,
}

impl From<&RigidityReport> for ReportDto {
    fn from(r: &RigidityReport) -> Self {
        Self {
            rank: r.rank,
            max_rank: r.max_rank,
            infinitesimally_rigid: r.infinitesimally_rigid,
            minimally_rigid: r.minimally_rigid,
            independent_angles: r.independent_angles,
            findings: r.dependency_findings.iter().map(FindingDto::from).collect(),
            min_involvement: r.min_involvement,
            nullspace_dim: r.nullspace_dim,
            generic: r.generic,
            trivial_motion_residual: r.trivial_motion_residual,
            subset_search_complete: r.subset_search_complete,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ConstraintDto {
    Linear {
        anchor: usize,
        reference: usize,
        beta_deg: f64,
    },
    Quadratic {
        chord: [usize; 2],
        beta_deg: f64,
    },
}

impl ConstraintDto {
    fn to_spec(&self, field: &str) -> Result<ConstraintSpec> {
        Ok(match *self {
            ConstraintDto::Linear {
                anchor,
                reference,
                beta_deg,
            } => ConstraintSpec::Linear {
                anchor: zero_based(anchor, field)?,
                reference: zero_based(reference, field)?,
                beta: beta_deg.to_radians(),
            },
            ConstraintDto::Quadratic { chord, beta_deg } => ConstraintSpec::Quadratic {
                chord: (zero_based(chord[0], field)?, zero_based(chord[1], field)?),
                beta: beta_deg.to_radians(),
            },
        })
    }

    fn from_spec(c: &ConstraintSpec) -> Self {
        match *c {
            ConstraintSpec::Linear {
                anchor,
                reference,
                beta,
            } => ConstraintDto::Linear {
                anchor: anchor + 1,
                reference: reference + 1,
                beta_deg: beta.to_degrees(),
            },
            ConstraintSpec::Quadratic { chord, beta } => ConstraintDto::Quadratic {
                chord: [chord.0 + 1, chord.1 + 1],
                beta_deg: beta.to_degrees(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedDto {
    pub positions: [[f64; 2]; 3],
    pub targets_deg: [f64; 2],
    /// Defaults to `[[3,1,2],[1,2,3]]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triplets: Option<[[usize; 3]; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDto {
    #[serde(rename = "type")]
    pub kind: String,
    pub constraints: [ConstraintDto; 2],
    #[serde(default)]
    pub branch_hint: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub seed: SeedDto,
    pub steps: Vec<StepDto>,
}

impl PlanFile {
    pub fn to_plan(&self) -> Result<ConstructionPlan> {
        let ids = self.seed.triplets.unwrap_or([[3, 1, 2], [1, 2, 3]]);
        let mut triplets = Vec::with_capacity(2);
        for (n, (ijk, deg)) in ids.iter().zip(self.seed.targets_deg).enumerate() {
            let field = format!("seed.triplets[{n}]");
            triplets.push(
                AngleTriplet::new(
                    zero_based(ijk[0], &field)?,
                    zero_based(ijk[1], &field)?,
                    zero_based(ijk[2], &field)?,
                )
                .with_target(deg.to_radians()),
            );
        }
        let seed = Seed::new(
            self.seed.positions.map(|p| from_xy(&p)),
            [triplets[0], triplets[1]],
        )?;
        let steps = self
            .steps
            .iter()
            .enumerate()
            .map(|(n, s)| {
                let kind = AdditionKind::from_label(&s.kind).ok_or_else(|| {
                    Error::InvalidConfig(format!("steps[{n}].type: unknown case {:?}", s.kind))
                })?;
                let field = format!("steps[{n}].constraints");
                Ok(AdditionStep {
                    kind,
                    constraints: [
                        s.constraints[0].to_spec(&field)?,
                        s.constraints[1].to_spec(&field)?,
                    ],
                    branch_hint: s.branch_hint.as_ref().map(from_xy),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ConstructionPlan { seed, steps })
    }

    pub fn from_plan(plan: &ConstructionPlan) -> Self {
        let t = &plan.seed.triplets;
        Self {
            seed: SeedDto {
                positions: plan.seed.positions.map(|p| xy(&p)),
                targets_deg: t.map(|x| x.target.unwrap_or(0.0).to_degrees()),
                triplets: Some(t.map(|x| [x.i + 1, x.j + 1, x.k + 1])),
            },
            steps: plan
                .steps
                .iter()
                .map(|s| StepDto {
                    kind: s.kind.label().to_string(),
                    constraints: s.constraints.map(|c| ConstraintDto::from_spec(&c)),
                    branch_hint: s.branch_hint.as_ref().map(xy),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AlternativeDto {
    pub step: usize,
    pub vertex: usize,
    pub chosen: [f64; 2],
    pub candidates: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BuildDto {
    pub angularity: AngularityFile,
    pub report: ReportDto,
    pub globally_rigid_certificate: bool,
    pub generic: bool,
    pub alternatives: Vec<AlternativeDto>,
}

impl From<&BuildOutcome> for BuildDto {
    fn from(o: &BuildOutcome) -> Self {
        Self {
            angularity: AngularityFile::from_angularity(&o.angularity),
            report: ReportDto::from(&o.report),
            globally_rigid_certificate: o.globally_rigid_certificate,
            generic: o.report.generic,
            alternatives: o
                .alternatives
                .iter()
                .map(|a| AlternativeDto {
                    step: a.step + 1,
                    vertex: a.vertex + 1,
                    chosen: xy(&a.chosen),
                    candidates: a.candidates.iter().map(xy).collect(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddedDto {
    pub i: usize,
    pub anchors: [usize; 3],
    pub targets_deg: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormationFile {
    #[serde(rename = "N")]
    pub n: usize,
    pub triangle_targets_deg: [f64; 3],
    #[serde(default)]
    pub added: Vec<AddedDto>,
}

impl FormationFile {
    pub fn to_spec(&self) -> Result<FormationSpec> {
        let added = self
            .added
            .iter()
            .enumerate()
            .map(|(n, a)| {
                let field = format!("added[{n}]");
                Ok(AddedAgent {
                    agent: zero_based(a.i, &field)?,
                    anchors: [
                        zero_based(a.anchors[0], &field)?,
                        zero_based(a.anchors[1], &field)?,
                        zero_based(a.anchors[2], &field)?,
                    ],
                    targets: a.targets_deg.map(f64::to_radians),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        FormationSpec::new(
            self.n,
            self.triangle_targets_deg.map(f64::to_radians),
            added,
        )
    }

    pub fn from_spec(spec: &FormationSpec) -> Self {
        Self {
            n: spec.agent_count(),
            triangle_targets_deg: spec.triangle_targets().map(f64::to_degrees),
            added: spec
                .added()
                .iter()
                .map(|a| AddedDto {
                    i: a.agent + 1,
                    anchors: a.anchors.map(|j| j + 1),
                    targets_deg: a.targets.map(f64::to_degrees),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfigDto {
    pub step_size: Option<f64>,
    pub duration: Option<f64>,
    pub integrator: Option<String>,
    pub collision_epsilon: Option<f64>,
    pub collinearity_epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub frame_mode: Option<String>,
}

impl SimConfigDto {
    pub fn to_config(&self) -> Result<SimConfig> {
        let d = SimConfig::default();
        let integrator = match self.integrator.as_deref() {
            None | Some("rk4") => Integrator::Rk4,
            Some("euler") => Integrator::Euler,
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "config.integrator: unknown {other:?}"
                )))
            }
        };
        let frame_mode = match self.frame_mode.as_deref() {
            None | Some("global") => FrameMode::Global,
            Some("random_local_frames") => FrameMode::RandomLocalFrames,
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "config.frame_mode: unknown {other:?}"
                )))
            }
        };
        Ok(SimConfig {
            step_size: self.step_size.unwrap_or(d.step_size),
            duration: self.duration.unwrap_or(d.duration),
            integrator,
            collision_epsilon: self.collision_epsilon.unwrap_or(d.collision_epsilon),
            collinearity_epsilon: self.collinearity_epsilon.unwrap_or(d.collinearity_epsilon),
            seed: self.seed.unwrap_or(d.seed),
            frame_mode,
            convergence_tol: d.convergence_tol,
        })
    }
}

/// Formation spec, initial positions and optional run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationFile {
    pub spec: FormationFile,
    pub initial_positions: Vec<[f64; 2]>,
    #[serde(default)]
    pub config: SimConfigDto,
}

impl SimulationFile {
    pub fn initial(&self) -> Vec<Point> {
        self.initial_positions.iter().map(from_xy).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EventDto {
    pub t: f64,
    pub kind: EventKind,
    pub agents: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateDto {
    /// 1-based error index.
    pub error: usize,
    #[serde(flatten)]
    pub fit: RateFit,
}

#[derive(Clone, Debug, Serialize)]
pub struct Sidecar {
    pub events: Vec<EventDto>,
    pub rates: Vec<Option<RateDto>>,
    pub converged: bool,
    /// Events were only checked up to this time.
    pub horizon: f64,
    pub step_size: f64,
    pub integrator: Integrator,
    pub frame_mode: FrameMode,
    /// Stability results for added agents presume slowly moving anchors;
    /// runs take this as met when initial triangle errors are small.
    pub small_anchor_motion_assumed: bool,
}

impl Sidecar {
    pub fn new(traj: &Trajectory, cfg: &SimConfig) -> Self {
        Self {
            events: traj
                .events
                .iter()
                .map(|e| EventDto {
                    t: e.t,
                    kind: e.kind,
                    agents: e.agents.iter().map(|a| a + 1).collect(),
                })
                .collect(),
            rates: traj
                .fitted_rates
                .iter()
                .enumerate()
                .map(|(n, r)| r.map(|fit| RateDto { error: n + 1, fit }))
                .collect(),
            converged: traj.converged,
            horizon: traj.horizon(),
            step_size: cfg.step_size,
            integrator: cfg.integrator,
            frame_mode: cfg.frame_mode,
            small_anchor_motion_assumed: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryJson<'a> {
    pub times: &'a [f64],
    pub positions: Vec<Vec<[f64; 2]>>,
    pub angle_errors: &'a [Vec<f64>],
    #[serde(flatten)]
    pub sidecar: Sidecar,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

/// `t,x_1,y_1,…,x_N,y_N,e_1,…,e_K`, one row per logged step.
pub fn write_trajectory_csv<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    let n = traj.positions.first().map_or(0, Vec::len);
    let k = traj.angle_errors.first().map_or(0, Vec::len);
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    for a in 1..=n {
        header.push(format!("x_{a}"));
        header.push(format!("y_{a}"));
    }
    header.extend((1..=k).map(|e| format!("e_{e}")));
    out.write_record(&header)?;
    for ((t, x), e) in traj
        .times
        .iter()
        .zip(&traj.positions)
        .zip(&traj.angle_errors)
    {
        let mut row = Vec::with_capacity(1 + 2 * n + k);
        row.push(t.to_string());
        for p in x {
            row.push(p.x.to_string());
            row.push(p.y.to_string());
        }
        row.extend(e.iter().map(f64::to_string));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
