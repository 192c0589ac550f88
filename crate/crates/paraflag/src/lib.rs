//! Spectral toolkit for paraproducts, flag kernels, dyadic model operators,
//! and AKNS scattering experiments on periodic grids.
//!
//! Everything lives on a uniform grid of `n` points over a period-`l` torus,
//! with the transform normalized as a Riemann sum so coefficients approximate
//! continuum Fourier integrals. Frequency-side objects (cutoff families,
//! multiplier symbols) are functions of the physical frequency `j / l`.

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod akns;
pub mod bump;
pub mod dyadic;
pub mod error;
pub mod exactsum;
pub mod flag;
pub mod funcgen;
pub mod grid;
pub mod jet;
pub mod littlewood;
pub mod model;
pub mod multiplier;
pub mod packets;
pub mod sizeenergy;
pub mod symbol;

pub use akns::{
    gauge_transform, integrate, iterated_integral, iterated_integral_profile, lambda_scan,
    ordered_frequency_form, upper_triangular_closed_form, AknsConfig, CouplingEntry,
    EntryProfile, GaugeData, ScanRow, Trajectory,
};
pub use bump::{BumpFamily, BumpKind, FamilyShape, FamilySpec, ProfileKind};
pub use dyadic::{CoefficientTree, DyadicInterval};
pub use error::{Error, Result};
pub use exactsum::{exact_total, ExactSum};
pub use flag::{
    apply_flag_nls, apply_flag_tab, combined_nls_symbol, combined_tab_symbol, restrict_gap,
    split_scale_cases, standard_nls_symbols, standard_tab_symbols, taylor_reduce, FlagForm,
    ScaleCases, TaylorTerm,
};
pub use funcgen::{make_function, FunctionSpec};
pub use grid::{
    forward_transform, fractional_derivative, inverse_transform, lp_norm, pairing, pure_mode,
    Grid, SampledFunction, Spectrum,
};
pub use littlewood::{
    apply_frequency_symbol, maximal_function, project, reconstruct, square_function,
};
pub use model::{four_linear_form, model_op_24, model_op_25, ModelPackets};
pub use multiplier::{
    apply_multiplier, decompose_product, decompose_triple_product, flag_part_symbol,
    paraproduct_pi, verify_commutation, PiFamilies, ProductParts, TripleParts,
};
pub use packets::{PacketSet, WavePacket};
pub use sizeenergy::{check_size_energy, energy, size};
pub use symbol::{
    build_flag_symbol, mihlin_report, tensor_kernel_symbol, Factor, MihlinReport, SymbolExpr,
};
