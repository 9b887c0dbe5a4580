//! Successive cancellation decoding in the LLR domain.
//!
//! Channel LLRs use the convention `log P(x=0|y) / P(x=1|y)`. Check-node
//! updates use the exact `boxplus`, not the min-sum approximation.

use super::profile::{BitClass, CodeProfile};
use super::transform::{permute_bit_reversed, polar_transform};
use crate::error::{Error, Result};
use crate::numeric::boxplus;

/// Magnitude at which channel LLRs are clamped.
pub const LLR_MAX: f64 = 40.0;

/// Clamp to `[-LLR_MAX, LLR_MAX]`; NaN is treated as an erasure.
#[inline]
pub fn clamp_llr(l: f64) -> f64 {
    if l.is_nan() {
        0.0
    } else {
        l.clamp(-LLR_MAX, LLR_MAX)
    }
}

#[inline]
fn hard(l: f64) -> u8 {
    u8::from(l < 0.0)
}

/// Recursive SC over `L` LLR lanes that share the same bit decisions.
///
/// `llr_in` holds one subtree's LLRs in butterfly order; on return `out`
/// holds the subtree codeword `u_sub F^{⊗k}`. `decide` receives the absolute
/// `u` index and the per-lane LLRs and returns the bit to commit.
fn sc_run<const L: usize, D>(
    llr_in: &[[f64; L]],
    scratch: &mut [[f64; L]],
    out: &mut [u8],
    offset: usize,
    decide: &mut D,
) where
    D: FnMut(usize, &[f64; L]) -> u8,
{
    let m = llr_in.len();
    if m == 1 {
        out[0] = decide(offset, &llr_in[0]);
        return;
    }
    let h = m / 2;
    let (child, rest) = scratch.split_at_mut(h);
    let (lo, hi) = llr_in.split_at(h);
    for k in 0..h {
        for l in 0..L {
            child[k][l] = boxplus(lo[k][l], hi[k][l]);
        }
    }
    let (out_lo, out_hi) = out.split_at_mut(h);
    sc_run(child, rest, out_lo, offset, decide);
    for k in 0..h {
        let sign = if out_lo[k] == 0 { 1.0 } else { -1.0 };
        for l in 0..L {
            child[k][l] = hi[k][l] + sign * lo[k][l];
        }
    }
    sc_run(child, rest, out_hi, offset + h, decide);
    for (a, b) in out_lo.iter_mut().zip(out_hi.iter()) {
        *a ^= *b;
    }
}

/// Runs SC on LLRs given in channel (`x`) order; returns the estimate of `x`.
fn run_channel_order<const L: usize, D>(lanes_x: Vec<[f64; L]>, mut decide: D) -> Vec<u8>
where
    D: FnMut(usize, &[f64; L]) -> u8,
{
    let len = lanes_x.len();
    let n = len.trailing_zeros();
    let lanes = permute_bit_reversed(&lanes_x, n);
    let mut scratch = vec![[0.0; L]; len.max(1)];
    let mut v = vec![0u8; len];
    sc_run(&lanes, &mut scratch, &mut v, 0, &mut decide);
    permute_bit_reversed(&v, n)
}

fn check_length(llrs: &[f64], n: usize) -> Result<()> {
    if llrs.len() != n {
        return Err(Error::invalid(format!(
            "LLR vector has length {}, code length is {}",
            llrs.len(),
            n
        )));
    }
    Ok(())
}

/// Successive cancellation decoder bound to one code profile.
///
/// Deterministic bits are decided by the argmax of the input prior given the
/// decoded prefix. `input_prior_llr` is `log P(X=0)/P(X=1)` of each coded
/// bit; for the default uniform input it is 0, every prior decision ties and
/// resolves to 0.
#[derive(Debug, Clone)]
pub struct ScDecoder<'a> {
    profile: &'a CodeProfile,
    classes: Vec<BitClass>,
    input_prior_llr: f64,
}

impl<'a> ScDecoder<'a> {
    pub fn new(profile: &'a CodeProfile) -> Self {
        ScDecoder {
            profile,
            classes: profile.classes(),
            input_prior_llr: 0.0,
        }
    }

    pub fn with_input_prior(mut self, llr: f64) -> Self {
        self.input_prior_llr = llr;
        self
    }

    pub fn profile(&self) -> &CodeProfile {
        self.profile
    }

    /// Returns `(u_hat, x_hat)`.
    pub fn decode(&self, channel_llrs: &[f64]) -> Result<(Vec<u8>, Vec<u8>)> {
        let n = self.profile.block_length();
        check_length(channel_llrs, n)?;
        let mut u = vec![0u8; n];
        let classes = &self.classes;
        let x = if self.profile.det_set().is_empty() || self.input_prior_llr == 0.0 {
            let lanes = channel_llrs.iter().map(|&l| [clamp_llr(l)]).collect();
            run_channel_order(lanes, |i, l: &[f64; 1]| {
                let bit = match classes[i] {
                    BitClass::Frozen(b) => b,
                    BitClass::Deterministic => 0,
                    BitClass::Info => hard(l[0]),
                };
                u[i] = bit;
                bit
            })
        } else {
            let prior = self.input_prior_llr;
            let lanes = channel_llrs.iter().map(|&l| [clamp_llr(l), prior]).collect();
            run_channel_order(lanes, |i, l: &[f64; 2]| {
                let bit = match classes[i] {
                    BitClass::Frozen(b) => b,
                    BitClass::Deterministic => hard(l[1]),
                    BitClass::Info => hard(l[0]),
                };
                u[i] = bit;
                bit
            })
        };
        Ok((u, x))
    }

    /// Extracts the information bits of `u` in increasing index order.
    pub fn info_bits(&self, u: &[u8]) -> Vec<u8> {
        self.profile.info_set().iter().map(|&i| u[i]).collect()
    }
}

/// Decodes `channel_llrs` with `profile`; returns `(u_hat, x_hat)`.
pub fn sc_decode(channel_llrs: &[f64], profile: &CodeProfile) -> Result<(Vec<u8>, Vec<u8>)> {
    ScDecoder::new(profile).decode(channel_llrs)
}

/// Assembles `u` from information bits and computes `x = u G_N`.
///
/// Frozen positions take their profile values; deterministic positions are
/// filled by the prior-argmax rule, the same rule the decoder applies.
pub fn encode(profile: &CodeProfile, info_bits: &[u8], input_prior_llr: f64) -> Result<(Vec<u8>, Vec<u8>)> {
    if info_bits.len() != profile.info_set().len() {
        return Err(Error::invalid(format!(
            "{} information bits supplied, profile carries {}",
            info_bits.len(),
            profile.info_set().len()
        )));
    }
    let n = profile.block_length();
    let classes = profile.classes();
    let mut info_at = vec![0u8; n];
    for (&i, &b) in profile.info_set().iter().zip(info_bits) {
        info_at[i] = b & 1;
    }
    let mut u = vec![0u8; n];
    if profile.det_set().is_empty() || input_prior_llr == 0.0 {
        for i in 0..n {
            u[i] = match classes[i] {
                BitClass::Frozen(b) => b,
                BitClass::Deterministic => 0,
                BitClass::Info => info_at[i],
            };
        }
    } else {
        let lanes = vec![[input_prior_llr]; n];
        run_channel_order(lanes, |i, l: &[f64; 1]| {
            let bit = match classes[i] {
                BitClass::Frozen(b) => b,
                BitClass::Deterministic => hard(l[0]),
                BitClass::Info => info_at[i],
            };
            u[i] = bit;
            bit
        });
    }
    let x = polar_transform(&u)?;
    Ok((u, x))
}

/// Genie-aided SC: at each index, records whether the hard decision from the
/// LLR differs from `u_true[i]`, then commits `u_true[i]`.
pub fn genie_errors(channel_llrs: &[f64], u_true: &[u8]) -> Result<Vec<bool>> {
    let n = u_true.len();
    if !n.is_power_of_two() {
        return Err(Error::invalid(format!("length {n} is not a power of two")));
    }
    check_length(channel_llrs, n)?;
    let mut errors = vec![false; n];
    let lanes = channel_llrs.iter().map(|&l| [clamp_llr(l)]).collect();
    run_channel_order(lanes, |i, l: &[f64; 1]| {
        errors[i] = hard(l[0]) != u_true[i];
        u_true[i]
    });
    Ok(errors)
}
