use super::log2_exact;
use crate::error::{Error, Result};

/// Index permutation of `[2^n]` that reverses the `n`-bit binary
/// representation of each index.
pub fn bit_reversal_permutation(n: u32) -> Vec<usize> {
    let len = 1usize << n;
    (0..len).map(|i| reverse_bits(i, n)).collect()
}

#[inline]
pub(crate) fn reverse_bits(i: usize, n: u32) -> usize {
    if n == 0 {
        0
    } else {
        i.reverse_bits() >> (usize::BITS - n)
    }
}

/// `x = u G_N` over GF(2) with `G_N = B_N F^{⊗n}`.
///
/// `B_N` and `F^{⊗n}` commute, so this is the butterfly `u F^{⊗n}` followed by
/// a bit-reversal of positions. The map is an involution.
pub fn polar_transform(u: &[u8]) -> Result<Vec<u8>> {
    let n = log2_exact(u.len())
        .ok_or_else(|| Error::invalid(format!("length {} is not a power of two", u.len())))?;
    let mut v: Vec<u8> = u.iter().map(|b| b & 1).collect();
    butterfly(&mut v);
    Ok(permute_bit_reversed(&v, n))
}

/// In-place `v <- v F^{⊗n}`.
pub(crate) fn butterfly(v: &mut [u8]) {
    let len = v.len();
    let mut half = 1;
    while half < len {
        for block in v.chunks_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter()) {
                *a ^= *b;
            }
        }
        half *= 2;
    }
}

pub(crate) fn permute_bit_reversed<T: Copy>(v: &[T], n: u32) -> Vec<T> {
    (0..v.len()).map(|k| v[reverse_bits(k, n)]).collect()
}
