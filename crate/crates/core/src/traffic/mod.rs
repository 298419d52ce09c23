//! Vehicle mobility: lane topology, trace frames, synthetic grid traffic and
//! per-block density monitoring.

mod density;
mod grid;
mod network;
mod trace;

pub use density::{block_density, detect_shortage};
pub use grid::{generate_grid_traces, GridSpec, SPEED_LIMIT_60_KMH};
pub use network::{Intersection, Lane, LaneNetwork};
pub use trace::{
    frames_from_rows, read_trace_csv, rows_from_frames, write_trace_csv, TraceFrame, TraceRow,
    VehicleSample,
};

/// Duration of one simulation slot, seconds.
pub const SLOT_SECONDS: f64 = 1.0;
