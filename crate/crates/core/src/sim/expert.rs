//! Scripted expert demonstrations: minimum-jerk point-to-point segments
//! through task waypoints, with short grip dwells at transitions.

use crate::episode::DEFAULT_DT;
use crate::sim::task::{TaskKind, TaskSpec};
use crate::sim::world::{Side, Vec2, WorldState};

/// Quintic minimum-jerk time scaling on [0, 1].
pub fn min_jerk_s(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

/// Segment duration: distance-proportional with a floor, sized so the peak
/// per-step delta (15/8 * dist * dt / T) stays well under the simulator clip.
fn segment_steps(dist: f64, dt: f64) -> usize {
    let duration = (2.7 * dist).max(0.6);
    (duration / dt).ceil() as usize
}

/// One timeline phase: optional new targets per effector plus the grip
/// commands held throughout the phase. `steps = 0` means a 2-step dwell.
struct Phase {
    left: Option<Vec2>,
    right: Option<Vec2>,
    grips: (f64, f64),
    dwell: usize,
}

impl Phase {
    fn movement(left: Option<Vec2>, right: Option<Vec2>, grips: (f64, f64)) -> Self {
        Phase {
            left,
            right,
            grips,
            dwell: 0,
        }
    }

    fn dwell(grips: (f64, f64), steps: usize) -> Self {
        Phase {
            left: None,
            right: None,
            grips,
            dwell: steps,
        }
    }
}

/// The expert plan: per-step commands, plus the step indices of segment
/// boundaries (where velocity is zero and pauses may be inserted).
pub struct ExpertPlan {
    pub actions: Vec<[f64; 6]>,
    pub boundaries: Vec<usize>,
}

/// Build the scripted expert action sequence for a task. With `fail_goal`
/// the carry phase targets the wrong region, modelling an operator who
/// completes a confident motion to the wrong place.
pub fn expert_plan(spec: &TaskSpec, fail_goal: bool) -> ExpertPlan {
    let state = spec.initial_state();
    let phases = build_phases(&state, spec.kind, fail_goal);
    render_phases(&state, &phases)
}

fn build_phases(state: &WorldState, kind: TaskKind, fail_goal: bool) -> Vec<Phase> {
    match kind {
        TaskKind::PickPlace => pick_place_phases(state, fail_goal),
        TaskKind::Handover => handover_phases(state, fail_goal),
        TaskKind::BimanualLift => bimanual_phases(state, fail_goal),
    }
}

/// Straight-line movement segments of the clean expert, per effector, used
/// by layout generation to keep obstacles off the nominal path.
pub(crate) fn clean_segments(state: &WorldState, kind: TaskKind) -> Vec<(Vec2, Vec2)> {
    let phases = build_phases(state, kind, false);
    let mut left = state.effector(Side::Left).pos;
    let mut right = state.effector(Side::Right).pos;
    let mut segments = Vec::new();
    for phase in &phases {
        if let Some(target) = phase.left {
            segments.push((left, target));
            left = target;
        }
        if let Some(target) = phase.right {
            segments.push((right, target));
            right = target;
        }
    }
    segments
}

fn pick_place_phases(state: &WorldState, fail_goal: bool) -> Vec<Phase> {
    let object = state.object("disc").expect("pick_place object").pos;
    let goal_id = if fail_goal { "decoy" } else { "pad" };
    let goal = state.goal(goal_id).expect("pick_place goal").center;
    let retreat = Vec2::new(goal.x, (goal.y - 0.18).max(0.05));
    vec![
        Phase::movement(None, Some(object), (1.0, 1.0)),
        Phase::dwell((1.0, 0.0), 2),
        Phase::movement(None, Some(goal), (1.0, 0.0)),
        Phase::dwell((1.0, 1.0), 2),
        Phase::movement(None, Some(retreat), (1.0, 1.0)),
    ]
}

fn handover_phases(state: &WorldState, fail_goal: bool) -> Vec<Phase> {
    let object = state.object("disc").expect("handover object").pos;
    let meet = state.goal("meet").expect("meet point").center;
    let goal = if fail_goal {
        // wrong goal: park the disc short of the pad, outside its radius
        let pad = state.goal("pad").expect("pad").center;
        Vec2::new(pad.x, (pad.y - 0.22).max(0.05))
    } else {
        state.goal("pad").expect("pad").center
    };
    let right_wait = Vec2::new(0.54, meet.y);
    let right_touch = Vec2::new(meet.x + 0.01, meet.y);
    let left_park = Vec2::new(0.18, 0.15);
    let retreat = Vec2::new(goal.x, (goal.y - 0.15).max(0.05));
    vec![
        Phase::movement(Some(object), Some(right_wait), (1.0, 1.0)),
        Phase::dwell((0.0, 1.0), 2),
        Phase::movement(Some(meet), None, (0.0, 1.0)),
        Phase::dwell((1.0, 1.0), 2),
        Phase::movement(Some(left_park), Some(right_touch), (1.0, 1.0)),
        Phase::dwell((1.0, 0.0), 2),
        Phase::movement(None, Some(goal), (1.0, 0.0)),
        Phase::dwell((1.0, 1.0), 2),
        Phase::movement(None, Some(retreat), (1.0, 1.0)),
    ]
}

fn bimanual_phases(state: &WorldState, fail_goal: bool) -> Vec<Phase> {
    let left_handle = state.object("basket-left").expect("left handle").pos;
    let right_handle = state.object("basket-right").expect("right handle").pos;
    let lift = state.goal("lift").expect("lift goal").center;
    // wrong goal: stop the lift well below the required height
    let rise = if fail_goal {
        (lift.y - left_handle.y) * 0.4
    } else {
        lift.y - left_handle.y + 0.02
    };
    let left_up = Vec2::new(left_handle.x, left_handle.y + rise);
    let right_up = Vec2::new(right_handle.x, right_handle.y + rise);
    vec![
        Phase::movement(Some(left_handle), Some(right_handle), (1.0, 1.0)),
        Phase::dwell((0.0, 0.0), 2),
        Phase::movement(Some(left_up), Some(right_up), (0.0, 0.0)),
        Phase::dwell((0.0, 0.0), 6),
    ]
}

fn render_phases(state: &WorldState, phases: &[Phase]) -> ExpertPlan {
    let mut left = state.effector(Side::Left).pos;
    let mut right = state.effector(Side::Right).pos;
    let mut actions: Vec<[f64; 6]> = Vec::new();
    let mut boundaries = Vec::new();
    for phase in phases {
        let (gl, gr) = phase.grips;
        if phase.dwell > 0 {
            for _ in 0..phase.dwell {
                actions.push([0.0, 0.0, gl, 0.0, 0.0, gr]);
            }
        } else {
            let l_target = phase.left.unwrap_or(left);
            let r_target = phase.right.unwrap_or(right);
            let dist = left.dist(l_target).max(right.dist(r_target));
            let steps = segment_steps(dist, DEFAULT_DT);
            let mut s_prev = 0.0;
            for i in 0..steps {
                let s = min_jerk_s((i + 1) as f64 / steps as f64);
                let ds = s - s_prev;
                s_prev = s;
                actions.push([
                    (l_target.x - left.x) * ds,
                    (l_target.y - left.y) * ds,
                    gl,
                    (r_target.x - right.x) * ds,
                    (r_target.y - right.y) * ds,
                    gr,
                ]);
            }
            left = l_target;
            right = r_target;
        }
        boundaries.push(actions.len());
    }
    boundaries.pop(); // the episode end is not an insertion point
    ExpertPlan { actions, boundaries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::world::{step, MAX_STEP_DELTA};

    #[test]
    fn min_jerk_endpoints_and_monotonicity() {
        assert_eq!(min_jerk_s(0.0), 0.0);
        assert_eq!(min_jerk_s(1.0), 1.0);
        let mut prev = 0.0;
        for i in 1..=100 {
            let s = min_jerk_s(i as f64 / 100.0);
            assert!(s >= prev);
            prev = s;
        }
    }

    #[test]
    fn expert_deltas_respect_simulator_clip() {
        for kind in [TaskKind::PickPlace, TaskKind::Handover, TaskKind::BimanualLift] {
            for seed in 0..20 {
                let spec = TaskSpec::new(kind, seed);
                let plan = expert_plan(&spec, false);
                for row in &plan.actions {
                    for &d in &[row[0], row[1], row[3], row[4]] {
                        assert!(d.abs() < MAX_STEP_DELTA, "{} delta {d}", spec.task_id);
                    }
                }
            }
        }
    }

    #[test]
    fn expert_completes_every_task_without_collisions() {
        for kind in [TaskKind::PickPlace, TaskKind::Handover, TaskKind::BimanualLift] {
            for seed in 0..25 {
                let spec = TaskSpec::new(kind, seed);
                let plan = expert_plan(&spec, false);
                let mut state = spec.initial_state();
                let mut success = false;
                for row in &plan.actions {
                    state = step(&state, row).unwrap();
                    success |= spec.success(&state);
                }
                assert!(success, "{} expert failed", spec.task_id);
                assert!(!state.collision_latched, "{} expert collided", spec.task_id);
            }
        }
    }

    #[test]
    fn fail_goal_plan_misses_the_task() {
        for kind in [TaskKind::PickPlace, TaskKind::Handover, TaskKind::BimanualLift] {
            for seed in 0..10 {
                let spec = TaskSpec::new(kind, seed);
                let plan = expert_plan(&spec, true);
                let mut state = spec.initial_state();
                let mut success = false;
                for row in &plan.actions {
                    state = step(&state, row).unwrap();
                    success |= spec.success(&state);
                }
                assert!(!success, "{} fail_goal plan still succeeded", spec.task_id);
            }
        }
    }
}
