//! Std side of the simulator: loading suites from disk, persisting traces,
//! the session server, the external policy backend and the benchmark runner.

pub mod bench;
pub mod external;
pub mod files;
pub mod image;
pub mod protocol;
pub mod server;
pub mod store;

pub use files::World;
