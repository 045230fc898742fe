//! Coincidence-series generators: the i.i.d. reference generator and the
//! deterministic nonlocal hidden-variable engine.

mod iid;
pub mod wqm;

pub use iid::{generate_iid, thin_detections};
pub use wqm::{
    wqm_calibrate, wqm_generate, CalibrationReport, CalibrationRow, Engine, MemoryInit, Station,
    VProcess, WqmConfig,
};
