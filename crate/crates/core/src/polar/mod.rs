//! Binary polar codes: the `G_N = B_N F^{⊗n}` transform, successive
//! cancellation decoding and code profiles (information / frozen /
//! deterministic index sets).

mod bec;
mod decoder;
mod profile;
mod transform;

pub use bec::bec_exact_z;
pub use decoder::{clamp_llr, encode, genie_errors, sc_decode, ScDecoder, LLR_MAX};
pub use profile::{select_sets, BitClass, CodeProfile, ReliabilityMethod, ReliabilityVector};
pub use transform::{bit_reversal_permutation, polar_transform};

pub(crate) fn log2_exact(n: usize) -> Option<u32> {
    n.is_power_of_two().then(|| n.trailing_zeros())
}
