//! Timing-delay injection: topic interception and sleep insertion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;
use crate::vm::{Instruction, Program};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DelayConfig {
    TopicIntercept { topic: String, delay: SimTime },
    SleepInsertion { weight: f64, delay: SimTime, seed: u64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum DelayError {
    #[error("intercept delay {0} s is not 0 or 2^k for k in [-8, 0]")]
    InterceptDelay(f64),
    #[error("sleep delay {0} s is not 2^k for k in [-9, 3]")]
    SleepDelay(f64),
    #[error("insertion weight {0} is outside [{1}, 1.0]")]
    Weight(f64, f64),
}

fn power_of_two_exponent(t: SimTime) -> Option<i32> {
    let secs = t.as_secs_f64();
    (-9..=3).find(|&k| SimTime::from_secs_f64(2f64.powi(k)) == Some(t) && secs > 0.0)
}

/// Topic-interception delays: 2^-8 .. 2^0 seconds.
pub fn intercept_grid() -> Vec<SimTime> {
    (-8..=0)
        .map(|k| SimTime::from_secs_f64(2f64.powi(k)).expect("positive"))
        .collect()
}

/// Sleep-insertion delays: 2^-9 .. 2^3 seconds.
pub fn sleep_grid() -> Vec<SimTime> {
    (-9..=3)
        .map(|k| SimTime::from_secs_f64(2f64.powi(k)).expect("positive"))
        .collect()
}

/// Coin-flip weights 0.1, 0.2, ..., 1.0.
pub fn weight_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

impl DelayConfig {
    pub fn intercept(topic: impl Into<String>, delay: SimTime) -> Self {
        DelayConfig::TopicIntercept {
            topic: topic.into(),
            delay,
        }
    }

    pub fn delay(&self) -> SimTime {
        match self {
            DelayConfig::TopicIntercept { delay, .. } | DelayConfig::SleepInsertion { delay, .. } => {
                *delay
            }
        }
    }

    pub fn validate(&self) -> Result<(), DelayError> {
        match self {
            DelayConfig::TopicIntercept { delay, .. } => {
                let ok = *delay == SimTime::ZERO
                    || power_of_two_exponent(*delay).is_some_and(|k| (-8..=0).contains(&k));
                if ok {
                    Ok(())
                } else {
                    Err(DelayError::InterceptDelay(delay.as_secs_f64()))
                }
            }
            DelayConfig::SleepInsertion { weight, delay, .. } => {
                if !(0.1..=1.0).contains(weight) {
                    return Err(DelayError::Weight(*weight, 0.1));
                }
                if power_of_two_exponent(*delay).is_some_and(|k| (-9..=3).contains(&k)) {
                    Ok(())
                } else {
                    Err(DelayError::SleepDelay(delay.as_secs_f64()))
                }
            }
        }
    }
}

/// Flips a seeded coin with heads-probability `weight` for every block
/// ending in `JMP`, `BR` or `HALT`, and on heads inserts `SLEEP delay`
/// right before the terminator.
pub fn insert_sleeps(
    program: &Program,
    weight: f64,
    delay: SimTime,
    seed: u64,
) -> Result<Program, DelayError> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(DelayError::Weight(weight, 0.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = program.clone();
    for block in &mut out.blocks {
        if block.terminator().is_none() {
            continue;
        }
        if rng.random_bool(weight) {
            let at = block.instructions.len() - 1;
            block
                .instructions
                .insert(at, Instruction::Sleep { duration: delay });
        }
    }
    out.relayout();
    Ok(out)
}

/// Number of blocks that end in a terminator.
pub fn terminator_count(program: &Program) -> usize {
    program
        .blocks
        .iter()
        .filter(|b| b.terminator().is_some())
        .count()
}
