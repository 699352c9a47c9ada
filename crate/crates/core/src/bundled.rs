//! Controller programs and missions shipped with the crate.

use crate::robosim::Mission;
use crate::vm::{asm, Program};

pub const CONTROLLER_V1: &str = include_str!("../assets/controller_v1.asm");
pub const CONTROLLER_V2: &str = include_str!("../assets/controller_v2.asm");

const MISSIONS: [(&str, &str); 3] = [
    ("M1", include_str!("../assets/missions/m1.txt")),
    ("M2", include_str!("../assets/missions/m2.txt")),
    ("M3", include_str!("../assets/missions/m3.txt")),
];

pub fn controller_v1() -> Program {
    asm::load(CONTROLLER_V1).expect("bundled controller v1 is valid")
}

pub fn controller_v2() -> Program {
    asm::load(CONTROLLER_V2).expect("bundled controller v2 is valid")
}

/// The three bundled missions, `M1`..`M3`.
pub fn missions() -> Vec<Mission> {
    MISSIONS
        .iter()
        .map(|(name, text)| Mission::parse(*name, text).expect("bundled mission is valid"))
        .collect()
}

pub fn mission(name: &str) -> Option<Mission> {
    missions().into_iter().find(|m| m.name == name)
}
