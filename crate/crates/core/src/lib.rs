//! Hybrid DTN-MANET routing (HYMAD) with Epidemic and Spray-and-Wait baselines,
//! on a deterministic discrete-event simulator.

pub mod batch;
pub mod engine;
pub mod group;
pub mod message;
pub mod metrics;
pub mod net;
pub mod rng;
pub mod router;
pub mod scenario;
pub mod sim;
pub mod time;
pub mod topology;

pub use time::SimTime;
pub use topology::NodeId;
