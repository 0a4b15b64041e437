//! The per-frame state solve: repeated association plus quasi-Newton
//! minimization of the registration loss.

mod bfgs;
mod frame;

pub use bfgs::{minimize, Minimum, SolverConfig};
pub use frame::{
    frame_estimate, FrameDiagnostics, FrameEstimate, FrameInputs, FrameSettings, OuterIteration,
};
