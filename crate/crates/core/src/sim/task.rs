//! Task definitions: seeded layouts, success predicates, scene features.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::world::{
    Effector, GoalRegion, Held, ObjectState, Obstacle, Vec2, WorldState,
};
use crate::util::derive_seed;

/// Fixed length of the scene feature vector fed to the models.
pub const OBS_FEATURES_LEN: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    PickPlace,
    Handover,
    BimanualLift,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::PickPlace => "pick_place",
            TaskKind::Handover => "handover",
            TaskKind::BimanualLift => "bimanual_lift",
        }
    }

    pub fn parse(s: &str) -> Result<TaskKind> {
        Ok(match s {
            "pick_place" => TaskKind::PickPlace,
            "handover" => TaskKind::Handover,
            "bimanual_lift" => TaskKind::BimanualLift,
            other => return Err(Error::Config(format!("unknown task kind {other:?}"))),
        })
    }

    pub fn instruction(self) -> &'static str {
        match self {
            TaskKind::PickPlace => "place the disc on the target pad",
            TaskKind::Handover => "hand the disc across and set it on the right pad",
            TaskKind::BimanualLift => "lift the basket with both effectors",
        }
    }

    pub fn max_steps(self) -> usize {
        match self {
            TaskKind::PickPlace => 160,
            TaskKind::Handover => 192,
            TaskKind::BimanualLift => 160,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub kind: TaskKind,
    pub layout_seed: u64,
    pub max_steps: usize,
    pub instruction: String,
}

/// Where the basket lift must end up, relative to the basket's start height.
const LIFT_RISE: f64 = 0.30;
const LIFT_HEIGHT_TOL: f64 = 0.05;
const LIFT_STRETCH_TOL: f64 = 0.04;
/// Basket half-width: handles sit at center +- this in x.
pub const BASKET_HALF_WIDTH: f64 = 0.12;

impl TaskSpec {
    pub fn new(kind: TaskKind, layout_seed: u64) -> TaskSpec {
        TaskSpec {
            task_id: format!("{}-{:05}", kind.name(), layout_seed),
            kind,
            layout_seed,
            max_steps: kind.max_steps(),
            instruction: kind.instruction().to_string(),
        }
    }

    pub fn parse_task_id(task_id: &str) -> Result<TaskSpec> {
        let (kind, seed) = task_id
            .rsplit_once('-')
            .ok_or_else(|| Error::Config(format!("malformed task id {task_id:?}")))?;
        let layout_seed: u64 = seed
            .parse()
            .map_err(|_| Error::Config(format!("malformed layout seed in {task_id:?}")))?;
        Ok(TaskSpec::new(TaskKind::parse(kind)?, layout_seed))
    }

    /// Canonical initial world for this task, deterministic in the layout
    /// seed. The obstacle is placed beside the expert's carry corridor,
    /// rejected against every nominal path segment: clear of clean
    /// demonstrations but inside the excursion range of drifty ones.
    pub fn initial_state(&self) -> WorldState {
        let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(self.layout_seed, "layout", 0));
        let u = |rng: &mut ChaCha20Rng, lo: f64, hi: f64| rng.gen_range(lo..hi);
        let (mut state, corridor) = match self.kind {
            TaskKind::PickPlace => {
                let object = Vec2::new(u(&mut rng, 0.55, 0.78), u(&mut rng, 0.28, 0.42));
                let goal = Vec2::new(u(&mut rng, 0.58, 0.85), u(&mut rng, 0.66, 0.84));
                let decoy = Vec2::new(u(&mut rng, 0.44, 0.54), u(&mut rng, 0.62, 0.80));
                let state = WorldState {
                    effectors: [
                        Effector {
                            pos: Vec2::new(0.20, 0.15),
                            grip: 1.0,
                        },
                        Effector {
                            pos: Vec2::new(0.70, 0.12),
                            grip: 1.0,
                        },
                    ],
                    objects: vec![disc("disc", object)],
                    obstacles: vec![],
                    goals: vec![
                        GoalRegion {
                            id: "pad".into(),
                            center: goal,
                            radius: 0.07,
                        },
                        GoalRegion {
                            id: "decoy".into(),
                            center: decoy,
                            radius: 0.07,
                        },
                    ],
                    step_count: 0,
                    collision_latched: false,
                };
                (state, (object, goal))
            }
            TaskKind::Handover => {
                let object = Vec2::new(u(&mut rng, 0.12, 0.28), u(&mut rng, 0.35, 0.55));
                let meet_y = u(&mut rng, 0.45, 0.55);
                let goal = Vec2::new(u(&mut rng, 0.74, 0.90), u(&mut rng, 0.30, 0.60));
                let meet = Vec2::new(0.46, meet_y);
                let state = WorldState {
                    effectors: [
                        Effector {
                            pos: Vec2::new(0.15, 0.15),
                            grip: 1.0,
                        },
                        Effector {
                            pos: Vec2::new(0.85, 0.15),
                            grip: 1.0,
                        },
                    ],
                    objects: vec![disc("disc", object)],
                    obstacles: vec![],
                    goals: vec![
                        GoalRegion {
                            id: "pad".into(),
                            center: goal,
                            radius: 0.07,
                        },
                        GoalRegion {
                            id: "meet".into(),
                            center: meet,
                            radius: 0.05,
                        },
                    ],
                    step_count: 0,
                    collision_latched: false,
                };
                (state, (meet, goal))
            }
            TaskKind::BimanualLift => {
                let center = Vec2::new(0.5, u(&mut rng, 0.22, 0.36));
                let left_handle = Vec2::new(center.x - BASKET_HALF_WIDTH, center.y);
                let right_handle = Vec2::new(center.x + BASKET_HALF_WIDTH, center.y);
                let lift_y = center.y + LIFT_RISE;
                let state = WorldState {
                    effectors: [
                        Effector {
                            pos: Vec2::new(0.25, 0.12),
                            grip: 1.0,
                        },
                        Effector {
                            pos: Vec2::new(0.75, 0.12),
                            grip: 1.0,
                        },
                    ],
                    objects: vec![
                        disc("basket-left", left_handle),
                        disc("basket-right", right_handle),
                    ],
                    obstacles: vec![],
                    goals: vec![GoalRegion {
                        id: "lift".into(),
                        center: Vec2::new(center.x, lift_y),
                        radius: LIFT_HEIGHT_TOL,
                    }],
                    step_count: 0,
                    collision_latched: false,
                };
                (state, (right_handle, Vec2::new(right_handle.x, lift_y)))
            }
        };
        let segments = crate::sim::expert::clean_segments(&state, self.kind);
        let obstacle = place_obstacle(&mut rng, corridor, &segments, 0.04);
        state.obstacles.push(obstacle);
        state
    }

    /// Pure success predicate over a world state.
    pub fn success(&self, state: &WorldState) -> bool {
        match self.kind {
            TaskKind::PickPlace | TaskKind::Handover => {
                let (Some(obj), Some(goal)) = (state.object("disc"), state.goal("pad")) else {
                    return false;
                };
                obj.held_by == Held::None && obj.pos.dist(goal.center) <= goal.radius
            }
            TaskKind::BimanualLift => {
                let (Some(l), Some(r), Some(goal)) = (
                    state.object("basket-left"),
                    state.object("basket-right"),
                    state.goal("lift"),
                ) else {
                    return false;
                };
                l.held_by == Held::Left
                    && r.held_by == Held::Right
                    && l.pos.y.min(r.pos.y) >= goal.center.y - LIFT_HEIGHT_TOL
                    && (l.pos.y - r.pos.y).abs() <= LIFT_HEIGHT_TOL
                    && (l.pos.dist(r.pos) - 2.0 * BASKET_HALF_WIDTH).abs() <= LIFT_STRETCH_TOL
            }
        }
    }

    /// Fixed-length scene features from the initial layout: object, goal and
    /// obstacle geometry. The per-step joint state is carried separately.
    pub fn obs_features(&self) -> Vec<f64> {
        let state = self.initial_state();
        let mut out = vec![0.0; OBS_FEATURES_LEN];
        for (i, obj) in state.objects.iter().take(2).enumerate() {
            out[2 * i] = obj.pos.x;
            out[2 * i + 1] = obj.pos.y;
        }
        for (i, goal) in state.goals.iter().take(2).enumerate() {
            out[4 + 2 * i] = goal.center.x;
            out[4 + 2 * i + 1] = goal.center.y;
        }
        if let Some(obs) = state.obstacles.first() {
            out[8] = obs.pos.x;
            out[9] = obs.pos.y;
            out[10] = obs.radius;
        }
        out[11] = self.max_steps as f64 / 256.0;
        out
    }
}

fn disc(id: &str, pos: Vec2) -> ObjectState {
    ObjectState {
        id: id.into(),
        pos,
        radius: 0.03,
        held_by: Held::None,
    }
}

/// Clearance required between an obstacle and every nominal path segment:
/// effector body plus a carried disc plus margin.
const OBSTACLE_CLEARANCE: f64 = 0.045;

/// An obstacle next to the `(a, b)` carry corridor: perpendicular offset
/// from a point along the segment, rejected until it clears every expert
/// path segment, yet close enough that drifting trajectories can hit it.
fn place_obstacle(
    rng: &mut ChaCha20Rng,
    (a, b): (Vec2, Vec2),
    segments: &[(Vec2, Vec2)],
    radius: f64,
) -> Obstacle {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len = (dx * dx + dy * dy).sqrt().max(1e-9);
    let (nx, ny) = (-dy / len, dx / len);
    for _ in 0..200 {
        let t: f64 = rng.gen_range(0.3..0.7);
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let gap: f64 = rng.gen_range(0.055..0.10);
        let offset = radius + gap;
        let pos = Vec2::new(
            (a.x + t * dx + side * nx * offset).clamp(0.05, 0.95),
            (a.y + t * dy + side * ny * offset).clamp(0.05, 0.95),
        );
        let clear = segments.iter().all(|&(s0, s1)| {
            crate::sim::world::segment_point_distance(s0, s1, pos)
                >= radius + OBSTACLE_CLEARANCE
        });
        if clear {
            return Obstacle { pos, radius };
        }
    }
    // no valid near-path spot on this layout; park it out of the way
    Obstacle {
        pos: Vec2::new(0.03, 0.97),
        radius,
    }
}
