pub mod time;
pub mod vm;
pub mod instrument;
pub mod robosim;
pub mod bundled;
pub mod corpus;
pub mod learn;
