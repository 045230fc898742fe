//! Scalar abstraction for the numeric kernels.
//!
//! The closed-form predictions and the hidden-variable engine are generic
//! over the floating-point type so they can run in `f32` or `f64`; concrete
//! `f64` aliases live at the crate root.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the numeric kernels: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + core::fmt::Debug
    + core::fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Cast from `f64`, used for constants and parameter conversion.
    fn from_f64_c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to Real")
    }

    /// Cast to `f64` for reporting.
    fn to_f64_c(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
