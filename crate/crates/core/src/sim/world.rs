//! Planar dual-effector world: two point effectors with grippers, circular
//! objects and obstacles, fully deterministic stepping.
//!
//! Coordinates live in the unit square. The left effector works in
//! x <= 0.58 and the right in x >= 0.42; the overlap strip is where
//! handovers happen. Collisions are latched: any contact between a moving
//! effector (or the object it carries) and an obstacle marks the whole
//! episode.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Toy embodiment: 2 effectors x (dx, dy, grip).
pub const TOY_DIMS: usize = 6;
/// Per-step positional command is clipped to this magnitude per axis.
pub const MAX_STEP_DELTA: f64 = 0.05;
/// A closing gripper captures a free object within this distance.
pub const CAPTURE_RADIUS: f64 = 0.06;
/// Grip command below this is "closed", at or above is "open".
pub const GRIP_THRESHOLD: f64 = 0.5;
/// Effector body radius used for obstacle contact.
pub const EFFECTOR_RADIUS: f64 = 0.01;

/// Workspace x-bounds per effector: (left max, right min).
pub const LEFT_X_MAX: f64 = 0.58;
pub const RIGHT_X_MIN: f64 = 0.42;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dist(self, other: Vec2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Held {
    None,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    fn held(self) -> Held {
        match self {
            Side::Left => Held::Left,
            Side::Right => Held::Right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Effector {
    pub pos: Vec2,
    /// Grip openness in [0, 1]; below [`GRIP_THRESHOLD`] counts as closed.
    pub grip: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub id: String,
    pub pos: Vec2,
    pub radius: f64,
    pub held_by: Held,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub pos: Vec2,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalRegion {
    pub id: String,
    pub center: Vec2,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    /// `[left, right]`.
    pub effectors: [Effector; 2],
    pub objects: Vec<ObjectState>,
    pub obstacles: Vec<Obstacle>,
    pub goals: Vec<GoalRegion>,
    pub step_count: u64,
    pub collision_latched: bool,
}

impl WorldState {
    pub fn effector(&self, side: Side) -> &Effector {
        &self.effectors[side.index()]
    }

    pub fn object(&self, id: &str) -> Option<&ObjectState> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn goal(&self, id: &str) -> Option<&GoalRegion> {
        self.goals.iter().find(|g| g.id == id)
    }

    /// Joint-state vector logged into episodes:
    /// `[xL, yL, gripL, xR, yR, gripR]`.
    pub fn joint_vector(&self) -> Vec<f64> {
        let l = &self.effectors[0];
        let r = &self.effectors[1];
        vec![l.pos.x, l.pos.y, l.grip, r.pos.x, r.pos.y, r.grip]
    }

    fn holding(&self, side: Side) -> Option<usize> {
        self.objects.iter().position(|o| o.held_by == side.held())
    }
}

fn clamp_to_workspace(side: Side, p: Vec2) -> Vec2 {
    let (lo, hi) = match side {
        Side::Left => (0.0, LEFT_X_MAX),
        Side::Right => (RIGHT_X_MIN, 1.0),
    };
    Vec2::new(p.x.clamp(lo, hi), p.y.clamp(0.0, 1.0))
}

/// Shortest distance from point `p` to the segment `a`-`b`.
pub(crate) fn segment_point_distance(a: Vec2, b: Vec2, p: Vec2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len_sq = dx * dx + dy * dy;
    if len_sq == 0.0 {
        return a.dist(p);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len_sq).clamp(0.0, 1.0);
    Vec2::new(a.x + t * dx, a.y + t * dy).dist(p)
}

/// Whether a body of `radius` sweeping from `a` to `b` touches any obstacle.
fn sweep_hits_obstacle(state: &WorldState, a: Vec2, b: Vec2, radius: f64) -> bool {
    state
        .obstacles
        .iter()
        .any(|o| segment_point_distance(a, b, o.pos) <= o.radius + radius)
}

/// Advance the world by one command.
///
/// Order of effects is fixed: both effectors move (deltas clipped, positions
/// clamped to each side's workspace), collisions are checked on the swept
/// paths, grips update, then grab/release resolves left before right.
pub fn step(state: &WorldState, action: &[f64]) -> Result<WorldState> {
    if action.len() != TOY_DIMS {
        return Err(Error::DimMismatch {
            expected: TOY_DIMS,
            got: action.len(),
            context: "simulator action".into(),
        });
    }
    if let Some(i) = action.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteAction(i));
    }

    let mut next = state.clone();
    for (idx, side) in [Side::Left, Side::Right].into_iter().enumerate() {
        let base = idx * 3;
        let dx = action[base].clamp(-MAX_STEP_DELTA, MAX_STEP_DELTA);
        let dy = action[base + 1].clamp(-MAX_STEP_DELTA, MAX_STEP_DELTA);
        let grip_cmd = action[base + 2].clamp(0.0, 1.0);

        let from = next.effectors[idx].pos;
        let to = clamp_to_workspace(side, Vec2::new(from.x + dx, from.y + dy));

        if sweep_hits_obstacle(&next, from, to, EFFECTOR_RADIUS) {
            next.collision_latched = true;
        }
        if let Some(obj_idx) = next.holding(side) {
            let r = next.objects[obj_idx].radius;
            if sweep_hits_obstacle(&next, from, to, r) {
                next.collision_latched = true;
            }
        }

        next.effectors[idx].pos = to;
        next.effectors[idx].grip = grip_cmd;
    }

    // Grab/release, left effector first so simultaneous grabs are
    // deterministic.
    for (idx, side) in [Side::Left, Side::Right].into_iter().enumerate() {
        let closed = next.effectors[idx].grip < GRIP_THRESHOLD;
        let pos = next.effectors[idx].pos;
        if closed {
            if next.holding(side).is_none() {
                let candidate = next
                    .objects
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| o.held_by == Held::None && o.pos.dist(pos) <= CAPTURE_RADIUS)
                    .min_by(|(ai, a), (bi, b)| {
                        a.pos.dist(pos).total_cmp(&b.pos.dist(pos)).then(ai.cmp(bi))
                    })
                    .map(|(i, _)| i);
                if let Some(i) = candidate {
                    next.objects[i].held_by = side.held();
                }
            }
        } else if let Some(i) = next.holding(side) {
            next.objects[i].held_by = Held::None;
        }
    }

    // Held objects track their effector exactly.
    for obj in &mut next.objects {
        match obj.held_by {
            Held::Left => obj.pos = next.effectors[0].pos,
            Held::Right => obj.pos = next.effectors[1].pos,
            Held::None => {}
        }
    }

    next.step_count += 1;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bare_state() -> WorldState {
        WorldState {
            effectors: [
                Effector {
                    pos: Vec2::new(0.2, 0.2),
                    grip: 0.0,
                },
                Effector {
                    pos: Vec2::new(0.8, 0.2),
                    grip: 0.0,
                },
            ],
            objects: vec![],
            obstacles: vec![],
            goals: vec![],
            step_count: 0,
            collision_latched: false,
        }
    }

    #[test]
    fn zero_action_only_advances_step_count() {
        let s0 = bare_state();
        let s1 = step(&s0, &[0.0; 6]).unwrap();
        assert_eq!(s1.step_count, 1);
        assert_eq!(s1.effectors, s0.effectors);
        assert_eq!(s1.objects, s0.objects);
        assert!(!s1.collision_latched);
    }

    #[test]
    fn non_finite_action_rejected() {
        let s0 = bare_state();
        assert!(matches!(
            step(&s0, &[0.0, f64::NAN, 0.0, 0.0, 0.0, 0.0]),
            Err(Error::NonFiniteAction(1))
        ));
    }

    #[test]
    fn closing_grip_near_object_grabs_it() {
        let mut s0 = bare_state();
        s0.effectors[1].grip = 1.0;
        s0.objects.push(ObjectState {
            id: "disc".into(),
            pos: Vec2::new(0.83, 0.2),
            radius: 0.03,
            held_by: Held::None,
        });
        // within capture radius (0.03 < 0.06), close the right grip
        let s1 = step(&s0, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(s1.objects[0].held_by, Held::Right);
        assert_eq!(s1.objects[0].pos, s1.effectors[1].pos);

        // carried object tracks the effector, then release drops it in place
        let s2 = step(&s1, &[0.0, 0.0, 0.0, 0.02, 0.03, 0.0]).unwrap();
        assert_eq!(s2.objects[0].pos, s2.effectors[1].pos);
        let s3 = step(&s2, &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(s3.objects[0].held_by, Held::None);
        assert_eq!(s3.objects[0].pos, s2.objects[0].pos);
    }

    #[test]
    fn far_object_is_not_grabbed() {
        let mut s0 = bare_state();
        s0.objects.push(ObjectState {
            id: "disc".into(),
            pos: Vec2::new(0.5, 0.5),
            radius: 0.03,
            held_by: Held::None,
        });
        let s1 = step(&s0, &[0.0; 6]).unwrap();
        assert_eq!(s1.objects[0].held_by, Held::None);
    }

    #[test]
    fn path_through_obstacle_latches_collision() {
        let mut s0 = bare_state();
        s0.obstacles.push(Obstacle {
            pos: Vec2::new(0.225, 0.2),
            radius: 0.02,
        });
        // left effector sweeps straight through the obstacle
        let s1 = step(&s0, &[0.05, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(s1.collision_latched);
        // latched: staying away does not clear it
        let s2 = step(&s1, &[0.0; 6]).unwrap();
        assert!(s2.collision_latched);
    }

    #[test]
    fn deltas_are_clipped_and_workspace_clamped() {
        let s0 = bare_state();
        let s1 = step(&s0, &[10.0, 0.0, 0.0, 0.0, -10.0, 0.0]).unwrap();
        assert!((s1.effectors[0].pos.x - 0.25).abs() < 1e-12);
        assert!((s1.effectors[1].pos.y - 0.15).abs() < 1e-12);
        // left effector cannot cross its workspace bound
        let mut s = s1;
        for _ in 0..20 {
            s = step(&s, &[0.05, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        }
        assert!(s.effectors[0].pos.x <= LEFT_X_MAX + 1e-12);
    }

    #[test]
    fn segment_distance_handles_degenerate_segment() {
        let a = Vec2::new(0.3, 0.3);
        assert!((segment_point_distance(a, a, Vec2::new(0.3, 0.5)) - 0.2).abs() < 1e-12);
    }
}
