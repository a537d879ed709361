//! Planar point-mass reacher with goal capture.
//!
//! A unit-mass point agent accelerates under a bounded 2-D force
//! `f ∈ [-1, 1]²` toward a fixed goal. Observation:
//! `[agent_x, agent_y, goal_x, goal_y, vel_x, vel_y]`. Reward: the negative
//! Euclidean distance to the goal each step, plus a `+1` bonus on the
//! capture step. Capture (distance ≤ 0.1 after the tick) is terminal;
//! otherwise episodes truncate at 200 steps.
//!
//! One explicit-Euler tick at `dt = 0.1` updates position from the current
//! velocity and velocity from the applied force. Positions are confined to
//! the arena square `[-1.5, 1.5]²` (the agent slides along the walls) and
//! speed is clamped to 2 per axis, so states stay bounded.
//!
//! Initial distribution: agent and goal positions uniform over the centered
//! square `[-1, 1]²`, redrawing the goal until it is at least 0.25 away
//! from the agent; initial velocity is zero.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

use super::{clamp_action, Env, EnvSpec, StepResult};

const DT: f64 = 0.1;
const MAX_FORCE: f64 = 1.0;
const MAX_STEPS: usize = 200;
const ARENA_HALF_WIDTH: f64 = 1.5;
const INIT_HALF_WIDTH: f64 = 1.0;
const MAX_SPEED: f64 = 2.0;
const CAPTURE_RADIUS: f64 = 0.1;
const MIN_INITIAL_SEPARATION: f64 = 0.25;

pub struct PointReacher {
    spec: EnvSpec,
    agent: [f64; 2],
    goal: [f64; 2],
    vel: [f64; 2],
    steps_taken: usize,
    needs_reset: bool,
    action_buf: Vec<f64>,
}

impl PointReacher {
    pub fn new() -> Self {
        PointReacher {
            spec: EnvSpec {
                state_dim: 6,
                action_dim: 2,
                action_bound: MAX_FORCE,
                max_episode_steps: MAX_STEPS,
            },
            agent: [0.0; 2],
            goal: [0.0; 2],
            vel: [0.0; 2],
            steps_taken: 0,
            needs_reset: true,
            action_buf: Vec::with_capacity(2),
        }
    }

    fn observation(&self) -> Vec<f64> {
        vec![
            self.agent[0],
            self.agent[1],
            self.goal[0],
            self.goal[1],
            self.vel[0],
            self.vel[1],
        ]
    }

    fn distance_to_goal(&self) -> f64 {
        let dx = self.agent[0] - self.goal[0];
        let dy = self.agent[1] - self.goal[1];
        (dx * dx + dy * dy).sqrt()
    }
}

impl Default for PointReacher {
    fn default() -> Self {
        PointReacher::new()
    }
}

impl Env for PointReacher {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let draw_pair =
            |rng: &mut ChaCha12Rng| -> [f64; 2] {
                [
                    rng.random_range(-INIT_HALF_WIDTH..INIT_HALF_WIDTH),
                    rng.random_range(-INIT_HALF_WIDTH..INIT_HALF_WIDTH),
                ]
            };
        self.agent = draw_pair(&mut rng);
        loop {
            self.goal = draw_pair(&mut rng);
            if self.distance_to_goal() >= MIN_INITIAL_SEPARATION {
                break;
            }
        }
        self.vel = [0.0; 2];
        self.steps_taken = 0;
        self.needs_reset = false;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.needs_reset {
            return Err(Error::Usage(
                "reacher episode already finished; call reset before stepping".into(),
            ));
        }
        if action.len() != 2 {
            return Err(Error::Shape(format!(
                "reacher takes a 2-dimensional action, got {}",
                action.len()
            )));
        }
        let mut buf = std::mem::take(&mut self.action_buf);
        clamp_action(action, MAX_FORCE, &mut buf);
        let force = [buf[0], buf[1]];
        self.action_buf = buf;

        for axis in 0..2 {
            self.agent[axis] = (self.agent[axis] + self.vel[axis] * DT)
                .clamp(-ARENA_HALF_WIDTH, ARENA_HALF_WIDTH);
            self.vel[axis] = (self.vel[axis] + force[axis] * DT).clamp(-MAX_SPEED, MAX_SPEED);
        }

        self.steps_taken += 1;
        let dist = self.distance_to_goal();
        let captured = dist <= CAPTURE_RADIUS;
        let mut reward = -dist;
        if captured {
            reward += 1.0;
        }
        let truncated = !captured && self.steps_taken >= MAX_STEPS;
        if captured || truncated {
            self.needs_reset = true;
        }
        Ok(StepResult {
            next_state: self.observation(),
            reward,
            done: captured,
            truncated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_positions_lie_in_documented_box_and_are_separated() {
        let mut env = PointReacher::new();
        for seed in 0..1000 {
            let s = env.reset(seed);
            assert!(s[0].abs() <= INIT_HALF_WIDTH && s[1].abs() <= INIT_HALF_WIDTH);
            assert!(s[2].abs() <= INIT_HALF_WIDTH && s[3].abs() <= INIT_HALF_WIDTH);
            let d = ((s[0] - s[2]).powi(2) + (s[1] - s[3]).powi(2)).sqrt();
            assert!(d >= MIN_INITIAL_SEPARATION, "seed {seed}: separation {d}");
            assert_eq!(&s[4..6], &[0.0, 0.0]);
        }
    }

    #[test]
    fn agent_placed_on_goal_captures_with_unit_bonus() {
        let mut env = PointReacher::new();
        env.reset(0);
        env.agent = env.goal;
        env.vel = [0.0; 2];
        let r = env.step(&[0.0, 0.0]).unwrap();
        assert!(r.done);
        assert!(!r.truncated);
        assert_eq!(r.reward, 1.0);
        assert!(matches!(env.step(&[0.0, 0.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn dense_reward_is_negative_distance() {
        let mut env = PointReacher::new();
        env.reset(0);
        env.agent = [0.0, 0.0];
        env.goal = [1.0, 0.0];
        env.vel = [0.0; 2];
        let r = env.step(&[0.0, 0.0]).unwrap();
        assert!((r.reward + 1.0).abs() < 1e-12);
        assert!(!r.done);
    }

    #[test]
    fn constant_force_moves_agent_toward_goal() {
        let mut env = PointReacher::new();
        env.reset(0);
        env.agent = [-1.0, 0.0];
        env.goal = [1.0, 0.0];
        env.vel = [0.0; 2];
        let before = env.distance_to_goal();
        for _ in 0..30 {
            let r = env.step(&[1.0, 0.0]).unwrap();
            if r.done {
                break;
            }
        }
        assert!(env.distance_to_goal() < before);
    }

    #[test]
    fn arena_walls_confine_the_agent() {
        let mut env = PointReacher::new();
        env.reset(0);
        env.goal = [-1.0, -1.0];
        env.agent = [1.0, 1.0];
        for _ in 0..MAX_STEPS {
            let r = match env.step(&[1.0, 1.0]) {
                Ok(r) => r,
                Err(_) => break,
            };
            assert!(r.next_state[0].abs() <= ARENA_HALF_WIDTH);
            assert!(r.next_state[1].abs() <= ARENA_HALF_WIDTH);
            if r.done || r.truncated {
                break;
            }
        }
    }

    #[test]
    fn truncates_at_step_limit_without_capture() {
        let mut env = PointReacher::new();
        env.reset(0);
        env.agent = [-1.0, -1.0];
        env.goal = [1.0, 1.0];
        env.vel = [0.0; 2];
        // Drive away from the goal so capture never happens.
        for i in 1..=MAX_STEPS {
            let r = env.step(&[-1.0, -1.0]).unwrap();
            assert!(!r.done);
            assert_eq!(r.truncated, i == MAX_STEPS);
        }
    }

    #[test]
    fn trajectories_are_bit_deterministic() {
        let mut a = PointReacher::new();
        let mut b = PointReacher::new();
        assert_eq!(a.reset(17), b.reset(17));
        for i in 0..100 {
            let act = [(i as f64 * 0.2).sin(), (i as f64 * 0.3).cos()];
            match (a.step(&act), b.step(&act)) {
                (Ok(ra), Ok(rb)) => {
                    assert_eq!(ra, rb);
                    if ra.done || ra.truncated {
                        break;
                    }
                }
                (Err(_), Err(_)) => break,
                _ => panic!("divergent trajectories"),
            }
        }
    }
}
