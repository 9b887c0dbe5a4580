use super::log2_exact;
use super::profile::{ReliabilityMethod, ReliabilityVector};
use crate::error::{Error, Result};

/// Exact Bhattacharyya parameters of the synthesized channels of a BEC.
///
/// Index order is the `u` order used by [`super::sc_decode`]: the most
/// significant bit of an index selects the first polarization step
/// (`Z- = 2Z - Z^2` for 0, `Z+ = Z^2` for 1).
pub fn bec_exact_z(epsilon: f64, n: usize) -> Result<ReliabilityVector> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid(format!("erasure probability {epsilon} outside [0, 1]")));
    }
    let levels = log2_exact(n).ok_or_else(|| Error::invalid(format!("length {n} is not a power of two")))?;
    let mut z = vec![epsilon];
    for _ in 0..levels {
        z = z.iter().flat_map(|&v| [2.0 * v - v * v, v * v]).collect();
    }
    ReliabilityVector::new(z, 0, ReliabilityMethod::BecExact)
}
