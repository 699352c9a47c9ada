//! Planar robot world: message bus, unicycle kinematics with noisy
//! odometry, waypoint missions and delay injection.

mod bus;
mod delay;
mod lab;
mod mission;
mod world;

pub use bus::{Bus, BusError, BusMessage, Payload, Topic};
pub use delay::{
    insert_sleeps, intercept_grid, sleep_grid, terminator_count, weight_grid, DelayConfig,
    DelayError,
};
pub use lab::{delay_lab, intercepts, sign_test_p, LabCell, LabReport, LabRun};
pub use mission::{
    crash_rate, is_crash, trajectory_metrics, Mission, MissionError, Trajectory, TrajectoryMetrics,
    TrajectorySample, DEFAULT_TOLERANCE_M,
};
pub use world::{
    ports, run_mission, MissionConfig, MissionRun, MissionRunError, World, WorldConfig,
    TOPIC_CMD_VEL, TOPIC_GOAL, TOPIC_GOAL_REQUEST, TOPIC_ODOM,
};
