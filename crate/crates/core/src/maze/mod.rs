//! Deterministic 2D point-mass maze environments.
//!
//! The agent is a point mass controlled by acceleration, observing its
//! position, velocity, and a 32-beam LIDAR scan (distance to the nearest wall
//! in each direction). Reward is sparse: `1 - t/T` on reaching the goal
//! within the goal threshold, 0 everywhere else. Dynamics are fully
//! deterministic, so a rollout is a pure function of the maze and the policy
//! weights.

mod format;

pub use format::parse_maze;

use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::nn::Network;

/// Number of LIDAR beams in the observation.
pub const LIDAR_BEAMS: usize = 32;
/// Observation dimension: x, y, v_x, v_y, then the beams.
pub const STATE_DIM: usize = 4 + LIDAR_BEAMS;
/// Action dimension: acceleration in x and y.
pub const ACTION_DIM: usize = 2;

/// Integration step.
pub const DT: f64 = 1.0;
/// Acceleration clamp per component.
pub const A_MAX: f64 = 1.0;
/// Velocity clamp per component.
pub const V_MAX: f64 = 3.0;
/// LIDAR beams report at most this distance.
pub const LIDAR_MAX_RANGE: f64 = 100.0;
/// Collision response stops the agent this far before the contact point.
pub const COLLISION_EPS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Vec2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// A wall: a 2D line segment in world units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub const fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    /// Euclidean distance from a point to this segment.
    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        let dx = self.b.x - self.a.x;
        let dy = self.b.y - self.a.y;
        let len2 = dx * dx + dy * dy;
        if len2 == 0.0 {
            return self.a.distance(p);
        }
        let t = (((p.x - self.a.x) * dx + (p.y - self.a.y) * dy) / len2).clamp(0.0, 1.0);
        p.distance(Vec2::new(self.a.x + t * dx, self.a.y + t * dy))
    }
}

/// Axis-aligned world bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// The four boundary edges as segments.
    pub fn edges(&self) -> [Segment; 4] {
        let (lo, hi) = (self.min, self.max);
        [
            Segment::new(Vec2::new(lo.x, lo.y), Vec2::new(hi.x, lo.y)),
            Segment::new(Vec2::new(hi.x, lo.y), Vec2::new(hi.x, hi.y)),
            Segment::new(Vec2::new(hi.x, hi.y), Vec2::new(lo.x, hi.y)),
            Segment::new(Vec2::new(lo.x, hi.y), Vec2::new(lo.x, lo.y)),
        ]
    }
}

/// Full description of one maze task.
#[derive(Debug, Clone)]
pub struct MazeSpec {
    pub name: String,
    pub walls: Vec<Segment>,
    pub start: Vec2,
    pub goal: Vec2,
    /// Goal threshold delta: the episode ends in success when the agent is
    /// strictly closer than this to the goal.
    pub goal_threshold: f64,
    /// Episode horizon T in steps.
    pub horizon: usize,
    pub bounds: Rect,
    /// Walls plus bounds edges, cached for the collision / LIDAR loops.
    blockers: Vec<Segment>,
}

impl MazeSpec {
    pub fn new(
        name: impl Into<String>,
        walls: Vec<Segment>,
        start: Vec2,
        goal: Vec2,
        goal_threshold: f64,
        horizon: usize,
        bounds: Rect,
    ) -> Result<Self> {
        if goal_threshold <= 0.0 {
            return Err(Error::InvalidMaze("goal threshold must be positive".into()));
        }
        if horizon == 0 {
            return Err(Error::InvalidMaze("horizon must be >= 1".into()));
        }
        if bounds.min.x >= bounds.max.x || bounds.min.y >= bounds.max.y {
            return Err(Error::InvalidMaze("bounds must have positive area".into()));
        }
        for (label, p) in [("start", start), ("goal", goal)] {
            if !bounds.contains(p) {
                return Err(Error::InvalidMaze(format!("{label} lies outside bounds")));
            }
            if walls.iter().any(|w| w.distance_to_point(p) < 1e-6) {
                return Err(Error::InvalidMaze(format!("{label} lies inside a wall")));
            }
        }
        let mut blockers = walls.clone();
        blockers.extend_from_slice(&bounds.edges());
        Ok(Self {
            name: name.into(),
            walls,
            start,
            goal,
            goal_threshold,
            horizon,
            bounds,
            blockers,
        })
    }

    /// Loads one of the mazes shipped with the crate: "snake", "us", "hard".
    pub fn builtin(name: &str) -> Result<Self> {
        let text = match name.to_ascii_lowercase().as_str() {
            "snake" => include_str!("mazes/snake.maze"),
            "us" => include_str!("mazes/us.maze"),
            "hard" => include_str!("mazes/hard.maze"),
            other => {
                return Err(Error::InvalidMaze(format!(
                    "unknown builtin maze '{other}' (expected snake, us, or hard)"
                )))
            }
        };
        format::parse_maze_named(text, name)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "maze".into());
        format::parse_maze_named(&text, &name)
    }

    /// Serializes back to the text format (parse round-trips).
    pub fn to_text(&self) -> String {
        format::maze_to_text(self)
    }

    pub fn blockers(&self) -> &[Segment] {
        &self.blockers
    }
}

/// Acceleration command; components are clamped to `[-A_MAX, A_MAX]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub ax: f64,
    pub ay: f64,
}

impl Action {
    pub fn clamped(ax: f64, ay: f64) -> Self {
        Self {
            ax: ax.clamp(-A_MAX, A_MAX),
            ay: ay.clamp(-A_MAX, A_MAX),
        }
    }
}

/// Instantaneous environment state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub lidar: [f64; LIDAR_BEAMS],
    pub step_index: usize,
}

impl EnvState {
    /// The 36-dimensional observation vector fed to the policy and the ICM.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(STATE_DIM);
        v.push(self.position.x);
        v.push(self.position.y);
        v.push(self.velocity.x);
        v.push(self.velocity.y);
        v.extend_from_slice(&self.lidar);
        v
    }
}

fn cross(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    ax * by - ay * bx
}

/// Parametric ray / segment intersection: returns the ray parameter `t >= 0`
/// of the hit, if any.
fn ray_segment(origin: Vec2, dir: Vec2, seg: &Segment) -> Option<f64> {
    let sx = seg.b.x - seg.a.x;
    let sy = seg.b.y - seg.a.y;
    let denom = cross(dir.x, dir.y, sx, sy);
    if denom.abs() < 1e-12 {
        return None; // parallel (collinear grazes are ignored)
    }
    let ex = seg.a.x - origin.x;
    let ey = seg.a.y - origin.y;
    let t = cross(ex, ey, sx, sy) / denom;
    let u = cross(ex, ey, dir.x, dir.y) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

fn beam_directions() -> &'static [Vec2; LIDAR_BEAMS] {
    static DIRS: OnceLock<[Vec2; LIDAR_BEAMS]> = OnceLock::new();
    DIRS.get_or_init(|| {
        std::array::from_fn(|i| {
            let angle = 2.0 * std::f64::consts::PI * i as f64 / LIDAR_BEAMS as f64;
            Vec2::new(angle.cos(), angle.sin())
        })
    })
}

/// Casts the 32 LIDAR beams from `position`. Beam `i` points at angle
/// `2*pi*i/32` from the +x axis; each distance is capped at
/// [`LIDAR_MAX_RANGE`].
pub fn lidar_scan(spec: &MazeSpec, position: Vec2) -> Result<[f64; LIDAR_BEAMS]> {
    if !spec.bounds.contains(position) {
        return Err(Error::InvalidParameter(format!(
            "lidar position ({}, {}) outside bounds",
            position.x, position.y
        )));
    }
    if spec.walls.iter().any(|w| w.distance_to_point(position) < 1e-12) {
        return Err(Error::InvalidParameter(
            "lidar position lies inside a wall".into(),
        ));
    }
    let mut out = [LIDAR_MAX_RANGE; LIDAR_BEAMS];
    for (i, dir) in beam_directions().iter().enumerate() {
        let mut best = LIDAR_MAX_RANGE;
        for seg in spec.blockers() {
            if let Some(t) = ray_segment(position, *dir, seg) {
                if t < best {
                    best = t;
                }
            }
        }
        out[i] = best;
    }
    Ok(out)
}

/// The initial state: at the start position with zero velocity.
pub fn initial_state(spec: &MazeSpec) -> Result<EnvState> {
    Ok(EnvState {
        position: spec.start,
        velocity: Vec2::new(0.0, 0.0),
        lidar: lidar_scan(spec, spec.start)?,
        step_index: 0,
    })
}

/// Advances the environment by one step.
///
/// The action is clamped, velocity integrated and clamped per component, and
/// the motion segment tested against every wall and bounds edge. On contact
/// the agent stops [`COLLISION_EPS`] before the hit point with velocity
/// zeroed. Returns the new state, the reward, and the done flag.
pub fn step(spec: &MazeSpec, state: &EnvState, action: Action) -> Result<(EnvState, f64, bool)> {
    let t = state.step_index;
    if t >= spec.horizon {
        return Err(Error::EpisodeDone(t));
    }
    if state.position.distance(spec.goal) < spec.goal_threshold {
        return Err(Error::EpisodeDone(t));
    }
    if !action.ax.is_finite() || !action.ay.is_finite() {
        return Err(Error::NonFinite("action"));
    }

    let action = Action::clamped(action.ax, action.ay);
    let vx = (state.velocity.x + action.ax * DT).clamp(-V_MAX, V_MAX);
    let vy = (state.velocity.y + action.ay * DT).clamp(-V_MAX, V_MAX);
    let from = state.position;
    let tentative = Vec2::new(from.x + vx * DT, from.y + vy * DT);

    let (new_pos, new_vel) = resolve_motion(spec, from, tentative, Vec2::new(vx, vy));

    let lidar = lidar_scan(spec, new_pos)?;
    let reached = new_pos.distance(spec.goal) < spec.goal_threshold;
    let reward = if reached {
        1.0 - t as f64 / spec.horizon as f64
    } else {
        0.0
    };
    let done = reached || t + 1 == spec.horizon;

    Ok((
        EnvState {
            position: new_pos,
            velocity: new_vel,
            lidar,
            step_index: t + 1,
        },
        reward,
        done,
    ))
}

/// Minimum perpendicular clearance kept from a wall after a collision stop.
const MIN_CLEARANCE: f64 = 1e-6;

/// Stop-and-zero-velocity collision response along the motion segment.
fn resolve_motion(spec: &MazeSpec, from: Vec2, to: Vec2, vel: Vec2) -> (Vec2, Vec2) {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let len = (dx * dx + dy * dy).sqrt();
    if len == 0.0 {
        return (from, vel);
    }
    let dir = Vec2::new(dx / len, dy / len);
    let mut hit: Option<(f64, &Segment)> = None;
    for seg in spec.blockers() {
        if let Some(t) = ray_segment(from, dir, seg) {
            if t <= len && hit.map_or(true, |(h, _)| t < h) {
                hit = Some((t, seg));
            }
        }
    }
    match hit {
        None => (to, vel),
        Some((t, seg)) => {
            // Perpendicular clearance from the wall grows as (t - tau) *
            // sin(theta); for grazing hits the along-ray backoff must grow
            // accordingly or the agent is left effectively on the wall.
            let wx = seg.b.x - seg.a.x;
            let wy = seg.b.y - seg.a.y;
            let wall_len = (wx * wx + wy * wy).sqrt();
            let sin_theta = if wall_len > 0.0 {
                cross(dir.x, dir.y, wx / wall_len, wy / wall_len).abs()
            } else {
                1.0
            };
            let backoff = if sin_theta > 0.0 {
                COLLISION_EPS.max(MIN_CLEARANCE / sin_theta)
            } else {
                t
            };
            let back = (t - backoff).max(0.0);
            (
                Vec2::new(from.x + back * dir.x, from.y + back * dir.y),
                Vec2::new(0.0, 0.0),
            )
        }
    }
}

/// One episode's record: states (length `len + 1`), actions and rewards
/// (length `len`).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<Vec<f64>>,
    actions: Vec<[f64; 2]>,
    rewards: Vec<f64>,
    terminal: bool,
}

impl Trajectory {
    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn actions(&self) -> &[[f64; 2]] {
        &self.actions
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Whether the episode ended by reaching the goal.
    pub fn reached_goal(&self) -> bool {
        self.terminal
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// Transition `i` as (state, action, next_state).
    pub fn transition(&self, i: usize) -> (&[f64], [f64; 2], &[f64]) {
        (&self.states[i], self.actions[i], &self.states[i + 1])
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has states")
    }

    pub fn final_position(&self) -> Vec2 {
        let s = self.final_state();
        Vec2::new(s[0], s[1])
    }

    /// CSV export: `t,x,y,v_x,v_y,a_x,a_y,reward`, one row per transition.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y,v_x,v_y,a_x,a_y,reward\n");
        for i in 0..self.len() {
            let s = &self.states[i];
            let a = self.actions[i];
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                i, s[0], s[1], s[2], s[3], a[0], a[1], self.rewards[i]
            ));
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn from_parts(
        states: Vec<Vec<f64>>,
        actions: Vec<[f64; 2]>,
        rewards: Vec<f64>,
        terminal: bool,
    ) -> Self {
        Self {
            states,
            actions,
            rewards,
            terminal,
        }
    }
}

/// Runs one deterministic episode from the maze start with the given policy
/// network (input dim 36, output dim 2; outputs clamped to the action box).
/// Returns the trajectory and the extrinsic fitness (sum of rewards).
pub fn rollout(spec: &MazeSpec, policy: &Network) -> Result<(Trajectory, f64)> {
    if policy.input_dim() != STATE_DIM {
        return Err(Error::Dimension {
            context: "policy input",
            expected: STATE_DIM,
            actual: policy.input_dim(),
        });
    }
    if policy.output_dim() != ACTION_DIM {
        return Err(Error::Dimension {
            context: "policy output",
            expected: ACTION_DIM,
            actual: policy.output_dim(),
        });
    }

    let mut state = initial_state(spec)?;
    let mut states = Vec::with_capacity(spec.horizon + 1);
    let mut actions = Vec::with_capacity(spec.horizon);
    let mut rewards = Vec::with_capacity(spec.horizon);
    states.push(state.to_vector());
    let terminal;

    loop {
        let raw = policy.forward(states.last().expect("state"))?;
        let action = Action::clamped(raw[0], raw[1]);
        let (next, reward, done) = step(spec, &state, action)?;
        states.push(next.to_vector());
        actions.push([action.ax, action.ay]);
        rewards.push(reward);
        state = next;
        if done {
            terminal = reward > 0.0;
            break;
        }
    }

    let trajectory = Trajectory {
        states,
        actions,
        rewards,
        terminal,
    };
    let fitness = trajectory.total_reward();
    Ok((trajectory, fitness))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn empty_room(side: f64) -> MazeSpec {
        MazeSpec::new(
            "room",
            vec![],
            Vec2::new(side / 2.0, side / 2.0),
            Vec2::new(side - 2.0, side / 2.0),
            2.0,
            500,
            Rect {
                min: Vec2::new(0.0, 0.0),
                max: Vec2::new(side, side),
            },
        )
        .unwrap()
    }

    /// Ray-marching oracle: walks the beam in coarse steps, detecting the
    /// first sub-segment that crosses any blocker with an orientation test,
    /// then refines the bracket at `fine` resolution. Independent of the
    /// parametric intersection used by `lidar_scan`.
    pub(crate) fn lidar_marching_oracle(spec: &MazeSpec, position: Vec2, beam: usize) -> f64 {
        let dir = beam_directions()[beam];
        let coarse = 0.05;
        let fine = 1e-4;

        let orient = |a: Vec2, b: Vec2, c: Vec2| -> f64 {
            (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
        };
        let crosses = |p: Vec2, q: Vec2, seg: &Segment| -> bool {
            let d1 = orient(p, q, seg.a);
            let d2 = orient(p, q, seg.b);
            let d3 = orient(seg.a, seg.b, p);
            let d4 = orient(seg.a, seg.b, q);
            (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0)
        };
        let any_cross = |t0: f64, t1: f64| -> bool {
            let p = Vec2::new(position.x + t0 * dir.x, position.y + t0 * dir.y);
            let q = Vec2::new(position.x + t1 * dir.x, position.y + t1 * dir.y);
            spec.blockers().iter().any(|seg| crosses(p, q, seg))
        };

        let mut t = 0.0;
        while t < LIDAR_MAX_RANGE {
            let t_next = (t + coarse).min(LIDAR_MAX_RANGE);
            if any_cross(t, t_next) {
                // refine inside the bracket
                let mut f = t;
                while f < t_next {
                    let f_next = (f + fine).min(t_next);
                    if any_cross(f, f_next) {
                        return f + fine / 2.0;
                    }
                    f = f_next;
                }
                return t_next;
            }
            t = t_next;
        }
        LIDAR_MAX_RANGE
    }

    #[test]
    fn beam_zero_in_empty_room_hits_right_wall() {
        let room = empty_room(20.0);
        let scan = lidar_scan(&room, Vec2::new(10.0, 10.0)).unwrap();
        assert_relative_eq!(scan[0], 10.0, epsilon = 1e-12); // +x beam
        assert_relative_eq!(scan[8], 10.0, epsilon = 1e-12); // +y beam
        assert_relative_eq!(scan[16], 10.0, epsilon = 1e-12); // -x beam
        assert_relative_eq!(scan[24], 10.0, epsilon = 1e-12); // -y beam

        let oracle = lidar_marching_oracle(&room, Vec2::new(10.0, 10.0), 0);
        assert!((scan[0] - oracle).abs() < 1e-3);
    }

    #[test]
    fn beam_next_to_wall_reports_gap_width() {
        let mut room = empty_room(20.0);
        room.walls.push(Segment::new(Vec2::new(12.0, 0.0), Vec2::new(12.0, 20.0)));
        room = MazeSpec::new(
            "walled",
            room.walls.clone(),
            Vec2::new(1.0, 10.0),
            Vec2::new(5.0, 10.0),
            2.0,
            500,
            room.bounds,
        )
        .unwrap();
        let gap = 0.5;
        let scan = lidar_scan(&room, Vec2::new(12.0 - gap, 10.0)).unwrap();
        assert!((scan[0] - gap).abs() < 1e-9);
        let oracle = lidar_marching_oracle(&room, Vec2::new(12.0 - gap, 10.0), 0);
        assert!((scan[0] - oracle).abs() < 1e-3);
    }

    #[test]
    fn scan_is_symmetric_under_quarter_rotation_at_room_center() {
        let room = empty_room(30.0);
        let scan = lidar_scan(&room, Vec2::new(15.0, 15.0)).unwrap();
        for i in 0..LIDAR_BEAMS {
            let rotated = (i + LIDAR_BEAMS / 4) % LIDAR_BEAMS;
            assert_relative_eq!(scan[i], scan[rotated], epsilon = 1e-9);
        }
    }

    #[test]
    fn lidar_rejects_position_outside_bounds() {
        let room = empty_room(20.0);
        assert!(lidar_scan(&room, Vec2::new(-1.0, 10.0)).is_err());
    }

    #[test]
    fn reaching_goal_on_first_step_pays_full_reward() {
        let mut spec = empty_room(20.0);
        spec.goal = Vec2::new(12.5, 10.0); // 2.5 units from start at (10, 10)
        let state = initial_state(&spec).unwrap();
        let (next, reward, done) = step(&spec, &state, Action::clamped(1.0, 0.0)).unwrap();
        assert!(done);
        assert_eq!(reward, 1.0); // 1 - 0/T
        assert!(next.position.distance(spec.goal) < spec.goal_threshold);
    }

    #[test]
    fn full_horizon_without_goal_pays_zero() {
        let spec = empty_room(20.0);
        let policy = Network::zeros(vec![LayerSpec::new(STATE_DIM, ACTION_DIM, Activation::Linear)]).unwrap();
        let (traj, fitness) = rollout(&spec, &policy).unwrap();
        assert_eq!(fitness, 0.0);
        assert_eq!(traj.len(), spec.horizon);
        assert!(!traj.reached_goal());
        assert!(traj.rewards().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn goal_at_half_horizon_pays_half_reward() {
        let mut spec = empty_room(20.0);
        spec.horizon = 10;
        // Hand-drive the env: sit still for 4 steps, then jump to the goal
        // region on the step with t = 5.
        let mut state = initial_state(&spec).unwrap();
        for _ in 0..5 {
            let (next, r, done) = step(&spec, &state, Action::clamped(0.0, 0.0)).unwrap();
            assert_eq!(r, 0.0);
            assert!(!done);
            state = next;
        }
        // Teleport-style setup: place the agent just short of the goal and
        // step into it at t = 5.
        state.position = Vec2::new(spec.goal.x - 2.5, spec.goal.y);
        state.velocity = Vec2::new(0.0, 0.0);
        let (_, reward, done) = step(&spec, &state, Action::clamped(1.0, 0.0)).unwrap();
        assert!(done);
        assert_relative_eq!(reward, 0.5, epsilon = 1e-12); // 1 - 5/10
    }

    #[test]
    fn stepping_a_terminated_episode_errors() {
        let mut spec = empty_room(20.0);
        spec.horizon = 2;
        let mut state = initial_state(&spec).unwrap();
        for _ in 0..2 {
            let (next, _, _) = step(&spec, &state, Action::clamped(0.0, 0.0)).unwrap();
            state = next;
        }
        assert!(matches!(
            step(&spec, &state, Action::clamped(0.0, 0.0)),
            Err(Error::EpisodeDone(_))
        ));
    }

    #[test]
    fn zero_policy_never_moves() {
        let spec = empty_room(20.0);
        let policy = Network::zeros(
            Network::mlp(&[STATE_DIM, 8, ACTION_DIM], Activation::Tanh, Activation::Linear).unwrap(),
        )
        .unwrap();
        let (traj, fitness) = rollout(&spec, &policy).unwrap();
        assert_eq!(fitness, 0.0);
        assert_eq!(traj.len(), spec.horizon);
        let last = traj.final_state();
        assert_eq!((last[0], last[1]), (spec.start.x, spec.start.y));
    }

    #[test]
    fn rollouts_are_bit_identical() {
        let spec = MazeSpec::builtin("snake").unwrap();
        let policy = Network::uniform_init(
            Network::mlp(&[STATE_DIM, 16, ACTION_DIM], Activation::Tanh, Activation::Linear)
                .unwrap(),
            1234,
        )
        .unwrap();
        let (a, fa) = rollout(&spec, &policy).unwrap();
        let (b, fb) = rollout(&spec, &policy).unwrap();
        assert_eq!(fa, fb);
        assert_eq!(a, b);
    }

    #[test]
    fn straight_line_policy_matches_closed_form_kinematics() {
        // Empty room, goal straight ahead on +x. Constant full acceleration:
        // v(t) = min(t, 3), x(t) - x0 = 1, 3, 6, 9, ... = 3t - 3 for t >= 2.
        let spec = MazeSpec::new(
            "line",
            vec![],
            Vec2::new(5.0, 10.0),
            Vec2::new(25.0, 10.0),
            2.0,
            500,
            Rect {
                min: Vec2::new(0.0, 0.0),
                max: Vec2::new(40.0, 20.0),
            },
        )
        .unwrap();
        // Policy with zero weights and bias (1, 0): constant acceleration +x.
        let mut policy =
            Network::zeros(vec![LayerSpec::new(STATE_DIM, ACTION_DIM, Activation::Linear)]).unwrap();
        let n = policy.num_params();
        let mut w = vec![0.0; n];
        w[n - 2] = 1.0; // bias ax
        policy.set_weights(&w).unwrap();

        // Distance needed: > 18 (goal at +20, threshold 2). x(t) = 3t - 3 > 18
        // first at t = 8 (x = 21, dist = 1 < 2), i.e. the 8th step has index 7.
        let (traj, fitness) = rollout(&spec, &policy).unwrap();
        assert!(traj.reached_goal());
        assert_eq!(traj.len(), 8);
        assert_relative_eq!(fitness, 1.0 - 7.0 / 500.0, epsilon = 1e-12);
    }

    #[test]
    fn motion_cannot_tunnel_through_walls() {
        // Random-action walks in the snake maze; verify post hoc that no
        // recorded motion segment crosses a wall.
        let spec = MazeSpec::builtin("snake").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut state = initial_state(&spec).unwrap();
        let mut crossings = 0;
        for _ in 0..20_000 {
            if state.step_index >= spec.horizon
                || state.position.distance(spec.goal) < spec.goal_threshold
            {
                state = initial_state(&spec).unwrap();
            }
            let action = Action::clamped(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let prev = state.position;
            let (next, _, done) = step(&spec, &state, action).unwrap();
            let dir = Vec2::new(next.position.x - prev.x, next.position.y - prev.y);
            let len = (dir.x * dir.x + dir.y * dir.y).sqrt();
            if len > 0.0 {
                let unit = Vec2::new(dir.x / len, dir.y / len);
                for wall in &spec.walls {
                    if let Some(t) = ray_segment(prev, unit, wall) {
                        if t < len - 1e-9 {
                            crossings += 1;
                        }
                    }
                }
            }
            state = if done { initial_state(&spec).unwrap() } else { next };
        }
        assert_eq!(crossings, 0);
    }

    #[test]
    fn reward_is_sparse() {
        let spec = MazeSpec::builtin("us").unwrap();
        let policy = Network::uniform_init(
            Network::mlp(&[STATE_DIM, 16, ACTION_DIM], Activation::Tanh, Activation::Linear)
                .unwrap(),
            5,
        )
        .unwrap();
        let (traj, _) = rollout(&spec, &policy).unwrap();
        let positive: Vec<_> = traj.rewards().iter().filter(|&&r| r != 0.0).collect();
        assert!(positive.len() <= 1);
        for &r in traj.rewards() {
            assert!(r == 0.0 || (0.0 < r && r <= 1.0));
        }
        // Only the final step may pay.
        for &r in &traj.rewards()[..traj.len().saturating_sub(1)] {
            assert_eq!(r, 0.0);
        }
    }

    #[test]
    fn builtin_mazes_are_valid_and_distinct() {
        for name in ["snake", "us", "hard"] {
            let spec = MazeSpec::builtin(name).unwrap();
            assert!(spec.bounds.contains(spec.start));
            assert!(spec.bounds.contains(spec.goal));
            assert!(!spec.walls.is_empty());
            assert_eq!(spec.horizon, 500);
            assert_eq!(spec.goal_threshold, 2.0);
        }
        assert!(MazeSpec::builtin("nope").is_err());
    }

    #[test]
    fn lidar_matches_marching_oracle_on_random_positions() {
        let spec = MazeSpec::builtin("hard").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut checked = 0;
        while checked < 40 {
            let p = Vec2::new(rng.gen_range(0.5..69.5), rng.gen_range(0.5..69.5));
            if spec.walls.iter().any(|w| w.distance_to_point(p) < 0.05) {
                continue;
            }
            let scan = lidar_scan(&spec, p).unwrap();
            let beam = rng.gen_range(0..LIDAR_BEAMS);
            let oracle = lidar_marching_oracle(&spec, p, beam);
            assert!(
                (scan[beam] - oracle).abs() < 1e-3,
                "beam {beam} at ({}, {}): analytic {} vs oracle {oracle}",
                p.x,
                p.y,
                scan[beam]
            );
            checked += 1;
        }
    }
}
