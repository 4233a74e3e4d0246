pub mod constants;
pub mod flow;
pub mod gap;
pub mod region;
pub mod transform;
pub mod verify;
