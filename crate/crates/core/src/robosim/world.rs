//! Discrete-event robot world and the bridge between controller ports and
//! bus topics.
//!
//! The controller VM owns the clock. Every port access first lets the world
//! catch up to the VM's time, processing odometry publications and message
//! deliveries in time order. A controller that overruns its control period
//! (through `SLEEP` or slow data) therefore sees stale inputs while the robot
//! keeps executing its last command.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bus::{Bus, BusError, Payload};
use super::delay::{insert_sleeps, DelayConfig, DelayError};
use super::mission::{Mission, Trajectory, TrajectorySample};
use crate::instrument::{InstrumentError, InstrumentationMode, InstrumenterRegistry, SummaryStream};
use crate::time::SimTime;
use crate::vm::{ExitKind, Limits, Port, PortIo, PortRead, Program, RunOutcome};

/// Controller port map.
pub mod ports {
    use crate::vm::Port;
    /// Blocks until the next control tick; returns the tick number.
    pub const TICK: Port = 0;
    pub const ODOM_X: Port = 1;
    pub const ODOM_Y: Port = 2;
    pub const ODOM_COS: Port = 3;
    pub const ODOM_SIN: Port = 4;
    pub const GOAL_INDEX: Port = 5;
    pub const GOAL_X: Port = 6;
    pub const GOAL_Y: Port = 7;
    pub const GOAL_COUNT: Port = 8;
    /// Latches the linear velocity (mm/s) for the next command.
    pub const CMD_V: Port = 10;
    /// Publishes `/cmd_vel` with the latched velocity and this turn rate (mrad/s).
    pub const CMD_W: Port = 11;
    /// Asks the mission node for waypoint `value`.
    pub const GOAL_REQUEST: Port = 13;
}

pub const TOPIC_ODOM: &str = "/odom";
pub const TOPIC_CMD_VEL: &str = "/cmd_vel";
pub const TOPIC_GOAL: &str = "/goal";
pub const TOPIC_GOAL_REQUEST: &str = "/goal_req";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub control_period: SimTime,
    pub odom_period: SimTime,
    /// Standard deviation of the positional odometry noise, metres.
    pub odom_noise_m: f64,
    pub max_speed: f64,
    pub max_turn_rate: f64,
    pub limits: Limits,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            control_period: SimTime::from_millis(100),
            odom_period: SimTime::from_millis(100),
            odom_noise_m: 0.05,
            max_speed: 1.0,
            max_turn_rate: 2.0,
            limits: Limits::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pose {
    x: f64,
    y: f64,
    theta: f64,
}

/// The simulated robot, its sensors and the mission node, exposed to the
/// controller as a [`PortIo`].
pub struct World {
    config: WorldConfig,
    bus: Bus,
    mission: Mission,
    now: SimTime,
    pose: Pose,
    /// Applied (v m/s, w rad/s).
    command: (f64, f64),
    rng: ChaCha8Rng,
    noise: Normal<f64>,
    next_odom: SimTime,
    last_tick: Option<u64>,
    odom_cache: [i64; 4],
    goal_cache: [i64; 4],
    latched_v: i64,
    samples: Vec<TrajectorySample>,
}

fn mm(m: f64) -> i64 {
    (m * 1000.0).round() as i64
}

impl World {
    pub fn new(mission: &Mission, seed: u64, config: WorldConfig) -> Self {
        let mut bus = Bus::new();
        bus.declare(TOPIC_ODOM, "Odometry", &["base"], &["controller"])
            .expect("fresh bus");
        bus.declare(TOPIC_CMD_VEL, "Twist", &["controller"], &["base"])
            .expect("fresh bus");
        bus.declare(TOPIC_GOAL, "Waypoint", &["mission"], &["controller"])
            .expect("fresh bus");
        bus.declare(TOPIC_GOAL_REQUEST, "WaypointRequest", &["controller"], &["mission"])
            .expect("fresh bus");
        let (hx, hy) = mission.home();
        World {
            config,
            bus,
            mission: mission.clone(),
            now: SimTime::ZERO,
            pose: Pose { x: hx, y: hy, theta: 0.0 },
            command: (0.0, 0.0),
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise: Normal::new(0.0, config.odom_noise_m.max(0.0)).expect("finite sigma"),
            next_odom: SimTime::ZERO,
            last_tick: None,
            odom_cache: [0; 4],
            goal_cache: [-1, 0, 0, 0],
            latched_v: 0,
            samples: Vec::new(),
        }
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn intercept_topic(&mut self, topic: &str, delay: SimTime) -> Result<(), BusError> {
        self.bus.intercept_topic(topic, delay)
    }

    fn integrate(&mut self, to: SimTime) {
        if to <= self.now {
            return;
        }
        let dt = (to - self.now).as_secs_f64();
        let (v, w) = self.command;
        let p = &mut self.pose;
        if w == 0.0 {
            p.x += v * p.theta.cos() * dt;
            p.y += v * p.theta.sin() * dt;
        } else {
            let theta1 = p.theta + w * dt;
            p.x += v / w * (theta1.sin() - p.theta.sin());
            p.y -= v / w * (theta1.cos() - p.theta.cos());
            p.theta = theta1;
        }
        self.now = to;
    }

    fn publish_odom(&mut self) {
        self.samples.push(TrajectorySample {
            time: self.now,
            x: self.pose.x,
            y: self.pose.y,
        });
        let nx = self.noise.sample(&mut self.rng);
        let ny = self.noise.sample(&mut self.rng);
        let payload = Payload::Odom {
            x_mm: mm(self.pose.x + nx),
            y_mm: mm(self.pose.y + ny),
            cos_milli: mm(self.pose.theta.cos()),
            sin_milli: mm(self.pose.theta.sin()),
        };
        self.bus
            .publish(TOPIC_ODOM, self.now, payload)
            .expect("declared topic");
    }

    fn deliver(&mut self, payload: Payload) {
        match payload {
            Payload::Odom { x_mm, y_mm, cos_milli, sin_milli } => {
                self.odom_cache = [x_mm, y_mm, cos_milli, sin_milli];
            }
            Payload::CmdVel { v_mm_s, w_mrad_s } => {
                let v = (v_mm_s as f64 / 1000.0).clamp(-self.config.max_speed, self.config.max_speed);
                let w = (w_mrad_s as f64 / 1000.0)
                    .clamp(-self.config.max_turn_rate, self.config.max_turn_rate);
                self.command = (v, w);
            }
            Payload::Goal { index, x_mm, y_mm, count } => {
                self.goal_cache = [index, x_mm, y_mm, count];
            }
            Payload::GoalRequest { index } => {
                let count = self.mission.waypoints.len() as i64;
                let (x, y) = usize::try_from(index)
                    .ok()
                    .and_then(|i| self.mission.waypoints.get(i).copied())
                    .unwrap_or_else(|| self.mission.final_waypoint());
                let goal = Payload::Goal { index, x_mm: mm(x), y_mm: mm(y), count };
                self.bus
                    .publish(TOPIC_GOAL, self.now, goal)
                    .expect("declared topic");
            }
        }
    }

    /// Processes every event up to and including `t`.
    pub fn advance_to(&mut self, t: SimTime) {
        loop {
            let next = match self.bus.next_delivery() {
                Some(b) => b.min(self.next_odom),
                None => self.next_odom,
            };
            if next > t {
                break;
            }
            self.integrate(next);
            if self.next_odom == next {
                self.publish_odom();
                self.next_odom += self.config.odom_period;
            }
            while let Some(msg) = self.bus.pop_due(next) {
                self.deliver(msg.payload);
            }
        }
        self.integrate(t);
    }

    fn next_tick(&self, now: SimTime) -> u64 {
        let period = self.config.control_period.as_nanos();
        let due = now.as_nanos().div_ceil(period);
        match self.last_tick {
            Some(last) => due.max(last + 1),
            None => due,
        }
    }

    /// Ends the run at `t`, recording the final pose. Samples the world
    /// produced past `t` (a blocking tick read can run ahead of the VM
    /// clock) are dropped.
    pub fn finish(mut self, t: SimTime, exit: ExitKind) -> Trajectory {
        self.advance_to(t);
        self.samples.retain(|s| s.time <= t);
        if self.now == t && self.samples.last().is_none_or(|s| s.time < self.now) {
            self.samples.push(TrajectorySample {
                time: self.now,
                x: self.pose.x,
                y: self.pose.y,
            });
        }
        Trajectory::from_samples(self.samples, &self.mission, exit)
    }
}

impl PortIo for World {
    fn read(&mut self, port: Port, now: SimTime) -> PortRead {
        if port == ports::TICK {
            let k = self.next_tick(now);
            self.last_tick = Some(k);
            let at = SimTime::from_nanos(k * self.config.control_period.as_nanos());
            self.advance_to(at);
            return PortRead { value: k as i64, ready_at: at };
        }
        self.advance_to(now);
        let value = match port {
            ports::ODOM_X => self.odom_cache[0],
            ports::ODOM_Y => self.odom_cache[1],
            ports::ODOM_COS => self.odom_cache[2],
            ports::ODOM_SIN => self.odom_cache[3],
            ports::GOAL_INDEX => self.goal_cache[0],
            ports::GOAL_X => self.goal_cache[1],
            ports::GOAL_Y => self.goal_cache[2],
            ports::GOAL_COUNT => self.goal_cache[3],
            _ => 0,
        };
        PortRead::immediate(value, now)
    }

    fn write(&mut self, port: Port, value: i64, now: SimTime) {
        self.advance_to(now);
        let payload = match port {
            ports::CMD_V => {
                self.latched_v = value;
                return;
            }
            ports::CMD_W => (
                TOPIC_CMD_VEL,
                Payload::CmdVel { v_mm_s: self.latched_v, w_mrad_s: value },
            ),
            ports::GOAL_REQUEST => (TOPIC_GOAL_REQUEST, Payload::GoalRequest { index: value }),
            _ => return,
        };
        self.bus
            .publish(payload.0, now, payload.1)
            .expect("declared topic");
        self.advance_to(now);
    }
}

#[derive(Debug, Error)]
pub enum MissionRunError {
    #[error(transparent)]
    Delay(#[from] DelayError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Instrument(#[from] InstrumentError),
}

/// Per-run settings for [`run_mission`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionConfig {
    pub seed: u64,
    pub mode: InstrumentationMode,
    pub interval: u64,
    pub delay: Option<DelayConfig>,
    pub world: WorldConfig,
}

impl MissionConfig {
    pub fn new(seed: u64) -> Self {
        MissionConfig {
            seed,
            mode: InstrumentationMode::None,
            interval: crate::instrument::DEFAULT_INTERVAL,
            delay: None,
            world: WorldConfig::default(),
        }
    }

    pub fn with_mode(mut self, mode: InstrumentationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_interval(mut self, interval: u64) -> Self {
        self.interval = interval;
        self
    }

    pub fn with_delay(mut self, delay: DelayConfig) -> Self {
        self.delay = Some(delay);
        self
    }
}

#[derive(Debug, Clone)]
pub struct MissionRun {
    pub trajectory: Trajectory,
    pub stream: Option<SummaryStream>,
    pub exit: ExitKind,
    pub outcome: RunOutcome,
    pub topology: String,
}

/// Runs `program` as the robot controller for `mission`.
pub fn run_mission(
    program: &Program,
    mission: &Mission,
    config: &MissionConfig,
) -> Result<MissionRun, MissionRunError> {
    let mut world = World::new(mission, config.seed, config.world);
    let delayed;
    let mut program = program;
    match &config.delay {
        Some(d @ DelayConfig::TopicIntercept { topic, delay }) => {
            d.validate()?;
            world.intercept_topic(topic, *delay)?;
        }
        Some(d @ DelayConfig::SleepInsertion { weight, delay, seed }) => {
            d.validate()?;
            delayed = insert_sleeps(program, *weight, *delay, *seed)?;
            program = &delayed;
        }
        None => {}
    }
    let topology = world.bus().topology();
    let collected = InstrumenterRegistry::default().get(config.mode).execute(
        program,
        &mut world,
        &config.world.limits,
        config.interval,
    )?;
    let exit = collected.outcome.exit;
    let end = collected.outcome.state.sim_clock.min(config.world.limits.max_sim_time);
    let trajectory = world.finish(end, exit);
    Ok(MissionRun {
        trajectory,
        stream: collected.stream,
        exit,
        outcome: collected.outcome,
        topology,
    })
}
