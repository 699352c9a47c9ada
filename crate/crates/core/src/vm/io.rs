use super::isa::Port;
use crate::time::SimTime;

/// Value returned by a port read and the simulated time at which it became
/// available. A handler may block the reader by returning `ready_at > now`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortRead {
    pub value: i64,
    pub ready_at: SimTime,
}

impl PortRead {
    pub fn immediate(value: i64, now: SimTime) -> Self {
        PortRead { value, ready_at: now }
    }
}

/// Environment seen by the VM through `IN` and `OUT`.
pub trait PortIo {
    fn read(&mut self, port: Port, now: SimTime) -> PortRead;
    fn write(&mut self, port: Port, value: i64, now: SimTime);
}

impl<T: PortIo + ?Sized> PortIo for &mut T {
    fn read(&mut self, port: Port, now: SimTime) -> PortRead {
        (**self).read(port, now)
    }
    fn write(&mut self, port: Port, value: i64, now: SimTime) {
        (**self).write(port, value, now)
    }
}

/// Reads return zero; writes are dropped.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullIo;

impl PortIo for NullIo {
    fn read(&mut self, _port: Port, now: SimTime) -> PortRead {
        PortRead::immediate(0, now)
    }
    fn write(&mut self, _port: Port, _value: i64, _now: SimTime) {}
}

/// Deterministic pseudo-random input stream with a per-read latency, for
/// exercising programs outside the robot world. Writes are recorded.
#[derive(Debug, Clone)]
pub struct ScriptedIo {
    seed: u64,
    reads: u64,
    latency: SimTime,
    range: i64,
    pub writes: Vec<(SimTime, Port, i64)>,
}

impl ScriptedIo {
    pub fn new(seed: u64) -> Self {
        ScriptedIo {
            seed,
            reads: 0,
            latency: SimTime::ZERO,
            range: 1000,
            writes: Vec::new(),
        }
    }

    pub fn with_latency(mut self, latency: SimTime) -> Self {
        self.latency = latency;
        self
    }

    /// Values are drawn uniformly-ish from `[-range, range]`.
    pub fn with_range(mut self, range: i64) -> Self {
        self.range = range.max(0);
        self
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl PortIo for ScriptedIo {
    fn read(&mut self, port: Port, now: SimTime) -> PortRead {
        self.reads += 1;
        let raw = splitmix64(self.seed ^ (self.reads << 16) ^ port as u64);
        let span = (2 * self.range + 1) as u64;
        let value = (raw % span) as i64 - self.range;
        PortRead {
            value,
            ready_at: now + self.latency,
        }
    }

    fn write(&mut self, port: Port, value: i64, now: SimTime) {
        self.writes.push((now, port, value));
    }
}
