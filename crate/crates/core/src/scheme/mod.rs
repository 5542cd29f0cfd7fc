//! Achievability schemes as explicit layered plans, and their finite-SNR
//! simulation with successive interference cancellation.

mod layout;
mod simulate;

pub use layout::{
    build_layout, build_layout_k, normalize_instance, CaseId, LayerPower, LayerSpec, Message,
    PrecoderRule, SchemeLayout, Transform,
};
pub use simulate::{
    estimate_gdof_slope, simulate, validate_p_grid, LayerExponent, LeakageExponent, LinkSnapshot,
    SimResult, Snapshot, COND_LIMIT, DECODE_MARGIN, POWER_TOL,
};
