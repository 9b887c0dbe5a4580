//! Genie-aided Monte Carlo construction of code profiles.
//!
//! The reliability of index `i` is the frequency with which SC, fed the true
//! `u_1..u_{i-1}`, decides `u_i` wrongly. Frames carry uniformly random data,
//! so an erased position (LLR exactly 0, decided as 0) counts as an error
//! half of the time.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{bpsk, csir_llr, observe_block, FadingSpec};
use crate::error::{Error, Result};
use crate::mi::{cdi_rates, DEFAULT_SAMPLES};
use crate::polar::{
    genie_errors, polar_transform, select_sets, CodeProfile, ReliabilityMethod, ReliabilityVector, LLR_MAX,
};
use crate::rng::Streams;
use crate::subchannel::{BlockModel, QuadratureRule, DEFAULT_NODES};

pub const DEFAULT_CONSTRUCTION_SAMPLES: u64 = 50_000;
pub const MIN_GENIE_SAMPLES: u64 = 100;

const FRAMES_PER_STREAM: u64 = 64;
const MI_STREAM_TAG: u64 = 0x4d49;

/// Produces channel LLRs (codeword order) for a known transmitted codeword.
pub trait LlrSampler: Sync {
    fn sample(&self, codeword: &[u8], rng: &mut ChaCha8Rng, llrs: &mut [f64]);
}

/// Binary erasure channel with erasure probability `epsilon`.
#[derive(Debug, Clone, Copy)]
pub struct BecSampler {
    pub epsilon: f64,
}

impl LlrSampler for BecSampler {
    fn sample(&self, codeword: &[u8], rng: &mut ChaCha8Rng, llrs: &mut [f64]) {
        for (l, &b) in llrs.iter_mut().zip(codeword) {
            *l = if rng.random::<f64>() < self.epsilon {
                0.0
            } else {
                bpsk(b) * LLR_MAX
            };
        }
    }
}

/// The interleaved channel seen after deinterleaving: one independent gain
/// per symbol, known to the receiver.
#[derive(Debug, Clone, Copy)]
pub struct CsirSampler {
    pub spec: FadingSpec,
}

impl LlrSampler for CsirSampler {
    fn sample(&self, codeword: &[u8], rng: &mut ChaCha8Rng, llrs: &mut [f64]) {
        let mut y = [0.0];
        for (l, &b) in llrs.iter_mut().zip(codeword) {
            let h = observe_block(&[bpsk(b)], &self.spec, rng, &mut y);
            *l = csir_llr(y[0], h, &self.spec);
        }
    }
}

/// Level `level` (0-based) of the multilevel scheme: the codeword occupies
/// that row of the frame, the other rows carry uniform symbols, and the
/// stage LLR conditions on the true symbols of the earlier rows.
#[derive(Debug, Clone)]
pub struct StageSampler {
    spec: FadingSpec,
    model: BlockModel,
    level: usize,
}

impl StageSampler {
    pub fn new(spec: &FadingSpec, quad: &QuadratureRule, level: usize) -> Result<Self> {
        if level >= spec.coherent_time() {
            return Err(Error::invalid(format!(
                "level {level} outside 0..{}",
                spec.coherent_time()
            )));
        }
        Ok(StageSampler {
            spec: *spec,
            model: BlockModel::new(spec, quad),
            level,
        })
    }
}

impl LlrSampler for StageSampler {
    fn sample(&self, codeword: &[u8], rng: &mut ChaCha8Rng, llrs: &mut [f64]) {
        let tc = self.spec.coherent_time();
        let mut x = vec![0.0; tc];
        let mut y = vec![0.0; tc];
        for (l, &b) in llrs.iter_mut().zip(codeword) {
            let bits: u32 = rng.random();
            for (m, v) in x.iter_mut().enumerate() {
                *v = bpsk((bits >> m) as u8);
            }
            x[self.level] = bpsk(b);
            observe_block(&x, &self.spec, rng, &mut y);
            *l = self.model.stage_llr(&y, &x[..self.level]);
        }
    }
}

/// Per-index genie-aided error frequencies over `samples` random frames.
pub fn genie_reliability<S: LlrSampler>(
    sampler: &S,
    n: usize,
    samples: u64,
    streams: &Streams,
) -> Result<ReliabilityVector> {
    if samples < MIN_GENIE_SAMPLES {
        return Err(Error::invalid(format!(
            "{samples} construction samples requested, at least {MIN_GENIE_SAMPLES} are needed"
        )));
    }
    if !n.is_power_of_two() {
        return Err(Error::invalid(format!("length {n} is not a power of two")));
    }
    let chunks: Vec<(u64, u64)> = (0..samples.div_ceil(FRAMES_PER_STREAM))
        .map(|c| (c, FRAMES_PER_STREAM.min(samples - c * FRAMES_PER_STREAM)))
        .collect();
    let counts: Vec<Vec<u32>> = chunks
        .into_par_iter()
        .map(|(c, frames)| -> Result<Vec<u32>> {
            let mut rng = streams.stream(c);
            let mut counts = vec![0u32; n];
            let mut llrs = vec![0.0; n];
            let mut u = vec![0u8; n];
            for _ in 0..frames {
                u.iter_mut().for_each(|b| *b = rng.random::<bool>() as u8);
                let x = polar_transform(&u)?;
                sampler.sample(&x, &mut rng, &mut llrs);
                for (acc, err) in counts.iter_mut().zip(genie_errors(&llrs, &u)?) {
                    *acc += u32::from(err);
                }
            }
            Ok(counts)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![0u64; n];
    for c in &counts {
        for (t, &v) in total.iter_mut().zip(c) {
            *t += u64::from(v);
        }
    }
    let z = total.iter().map(|&c| c as f64 / samples as f64).collect();
    ReliabilityVector::new(z, samples, ReliabilityMethod::MonteCarloGenie)
}

/// Splits `total` information bits across levels in proportion to
/// `weights` by the largest-remainder rule. Levels are capped at `cap`.
pub fn allocate_info_bits(total: usize, weights: &[f64], cap: usize) -> Result<Vec<usize>> {
    if total > cap * weights.len() {
        return Err(Error::Infeasible(format!(
            "{total} information bits do not fit in {} levels of length {cap}",
            weights.len()
        )));
    }
    let clean: Vec<f64> = weights.iter().map(|w| w.max(0.0)).collect();
    let sum: f64 = clean.iter().sum();
    if total == 0 {
        return Ok(vec![0; weights.len()]);
    }
    if sum <= 0.0 {
        return Err(Error::Infeasible("all levels have zero estimated rate".into()));
    }
    let ideal: Vec<f64> = clean.iter().map(|w| total as f64 * w / sum).collect();
    let mut k: Vec<usize> = ideal.iter().map(|v| (v.floor() as usize).min(cap)).collect();
    let mut order: Vec<usize> = (0..k.len()).collect();
    order.sort_by(|&a, &b| (ideal[b] - ideal[b].floor()).total_cmp(&(ideal[a] - ideal[a].floor())).then(a.cmp(&b)));
    let mut remaining = total - k.iter().sum::<usize>();
    // a full pass may be needed more than once when caps bind
    while remaining > 0 {
        let before = remaining;
        for &i in &order {
            if remaining == 0 {
                break;
            }
            if k[i] < cap {
                k[i] += 1;
                remaining -= 1;
            }
        }
        if remaining == before {
            break;
        }
    }
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstructionOptions {
    /// Genie-aided frames per level.
    pub genie_samples: u64,
    /// Samples for the sub-channel rate estimates that drive rate allocation.
    pub mi_samples: u64,
    pub quadrature_nodes: usize,
}

impl Default for ConstructionOptions {
    fn default() -> Self {
        ConstructionOptions {
            genie_samples: DEFAULT_CONSTRUCTION_SAMPLES,
            mi_samples: DEFAULT_SAMPLES,
            quadrature_nodes: DEFAULT_NODES,
        }
    }
}

fn info_count(rate: f64, length: usize, exact: bool) -> Result<usize> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::invalid(format!("rate {rate} outside [0, 1]")));
    }
    let target = rate * length as f64;
    let k = target.round();
    if exact && (target - k).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "rate {rate} does not give an integer number of information bits at length {length}"
        )));
    }
    Ok(k as usize)
}

/// Code for the interleaved (BICM) scheme: one length-`T_c N` polar code over
/// the i.i.d. fading channel with receiver CSI. Carries `round(rate * total_length)`
/// information bits.
pub fn construct_bicm(
    spec: &FadingSpec,
    total_length: usize,
    rate: f64,
    samples: u64,
    streams: &Streams,
) -> Result<CodeProfile> {
    if !total_length.is_power_of_two() {
        return Err(Error::invalid(format!(
            "total length {total_length} is not a power of two"
        )));
    }
    let k = info_count(rate, total_length, false)?;
    let rel = genie_reliability(&CsirSampler { spec: *spec }, total_length, samples, streams)?;
    select_sets(&rel, &vec![true; total_length], k)?
        .with_design(&format!("bicm-n{total_length}-k{k}"), spec.snr_db())
}

/// Row code of the parallel scheme. Every row of the frame sees the same
/// i.i.d. fading channel, so one profile serves all rows.
pub fn construct_parallel(spec: &FadingSpec, n: usize, rate: f64, samples: u64, streams: &Streams) -> Result<CodeProfile> {
    let p = construct_bicm(spec, n, rate, samples, streams)?;
    let label = format!("parallel-n{n}-k{}", p.info_set().len());
    p.with_design(&label, spec.snr_db())
}

/// Component codes of the multilevel scheme, one per sub-channel.
///
/// `total_rate` is bits per channel use; `total_rate * T_c * N` must be an
/// integer. Information bits are split across levels in proportion to the
/// estimated sub-channel rates.
pub fn construct_mlc(
    spec: &FadingSpec,
    n: usize,
    total_rate: f64,
    options: &ConstructionOptions,
    streams: &Streams,
) -> Result<Vec<CodeProfile>> {
    if !n.is_power_of_two() {
        return Err(Error::invalid(format!("length {n} is not a power of two")));
    }
    let tc = spec.coherent_time();
    let total_bits = info_count(total_rate, tc * n, true)?;
    let quad = QuadratureRule::for_spec(spec, options.quadrature_nodes)?;
    let rates = cdi_rates(spec, &quad, options.mi_samples, &streams.fork(MI_STREAM_TAG))?;
    let capacity = rates.per_symbol.value_bits;
    if total_rate > capacity {
        return Err(Error::Infeasible(format!(
            "rate {total_rate} exceeds the estimated capacity {capacity:.4} bits at {:.2} dB",
            spec.snr_db()
        )));
    }
    let weights: Vec<f64> = rates.subchannels.iter().map(|e| e.value_bits).collect();
    let ks = allocate_info_bits(total_bits, &weights, n)?;
    ks.iter()
        .enumerate()
        .map(|(level, &k)| {
            let sampler = StageSampler::new(spec, &quad, level)?;
            let rel = genie_reliability(&sampler, n, options.genie_samples, &streams.fork(level as u64))?;
            select_sets(&rel, &vec![true; n], k)?
                .with_design(&format!("mlc-tc{tc}-n{n}-level{}", level + 1), spec.snr_db())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::CsiMode;
    use crate::polar::bec_exact_z;

    struct Fixed(f64);

    impl LlrSampler for Fixed {
        fn sample(&self, codeword: &[u8], _: &mut ChaCha8Rng, llrs: &mut [f64]) {
            for (l, &b) in llrs.iter_mut().zip(codeword) {
                *l = bpsk(b) * self.0;
            }
        }
    }

    #[test]
    fn noiseless_sampler_gives_zero() {
        let z = genie_reliability(&Fixed(f64::INFINITY), 16, 200, &Streams::new(1)).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_llr_sampler_is_a_coin_flip() {
        let samples = 4000;
        let z = genie_reliability(&Fixed(0.0), 8, samples, &Streams::new(2)).unwrap();
        let sd = (0.25 / samples as f64).sqrt();
        for &v in z.values() {
            assert!((v - 0.5).abs() < 4.0 * sd, "{v}");
        }
    }

    #[test]
    fn too_few_samples_refused() {
        assert!(genie_reliability(&Fixed(1.0), 8, 99, &Streams::new(3)).is_err());
    }

    #[test]
    fn bec_small_code_matches_half_the_exact_parameters() {
        let samples = 20_000;
        let z = genie_reliability(&BecSampler { epsilon: 0.5 }, 8, samples, &Streams::new(4)).unwrap();
        let exact = bec_exact_z(0.5, 8).unwrap();
        for (&est, &zi) in z.values().iter().zip(exact.values()) {
            let p = zi / 2.0;
            let sd = (p * (1.0 - p) / samples as f64).sqrt();
            assert!((est - p).abs() <= 4.0 * sd + 1e-12, "est {est} expected {p}");
        }
    }

    #[test]
    fn allocation_sums_exactly() {
        assert_eq!(allocate_info_bits(10, &[0.2, 0.3, 0.5], 8).unwrap(), vec![2, 3, 5]);
        let k = allocate_info_bits(7, &[0.33, 0.33, 0.34], 8).unwrap();
        assert_eq!(k.iter().sum::<usize>(), 7);
        let capped = allocate_info_bits(12, &[0.1, 0.9], 8).unwrap();
        assert_eq!(capped, vec![4, 8]);
        assert_eq!(allocate_info_bits(0, &[0.0, 0.0], 8).unwrap(), vec![0, 0]);
        assert!(allocate_info_bits(17, &[0.5, 0.5], 8).is_err());
        assert!(allocate_info_bits(3, &[0.0, 0.0], 8).is_err());
    }

    #[test]
    fn zero_rate_freezes_everything() {
        let spec = FadingSpec::rayleigh_snr_db(2, 3.0, CsiMode::Cdi).unwrap();
        let options = ConstructionOptions {
            genie_samples: 100,
            mi_samples: 2_000,
            quadrature_nodes: DEFAULT_NODES,
        };
        let levels = construct_mlc(&spec, 16, 0.0, &options, &Streams::new(5)).unwrap();
        assert_eq!(levels.len(), 2);
        assert!(levels.iter().all(|p| p.info_set().is_empty() && p.frozen_set().len() == 16));
        let bicm = construct_bicm(&spec.with_csi_mode(CsiMode::CsiR), 32, 0.0, 100, &Streams::new(5)).unwrap();
        assert!(bicm.info_set().is_empty());
    }

    #[test]
    fn mlc_argument_checks() {
        let spec = FadingSpec::rayleigh_snr_db(2, 0.0, CsiMode::Cdi).unwrap();
        let options = ConstructionOptions {
            genie_samples: 100,
            mi_samples: 2_000,
            quadrature_nodes: DEFAULT_NODES,
        };
        assert!(matches!(
            construct_mlc(&spec, 16, 0.875, &options, &Streams::new(6)),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            construct_mlc(&spec, 16, 0.1, &options, &Streams::new(6)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(construct_mlc(&spec, 12, 0.25, &options, &Streams::new(6)).is_err());
        assert!(construct_bicm(&spec, 24, 0.5, 100, &Streams::new(6)).is_err());
    }

    #[test]
    fn single_level_mlc_is_a_single_channel_construction() {
        let spec = FadingSpec::rayleigh_snr_db(1, 2.0, CsiMode::Cdi).unwrap();
        let options = ConstructionOptions {
            genie_samples: 500,
            mi_samples: 4_000,
            quadrature_nodes: DEFAULT_NODES,
        };
        let streams = Streams::new(7);
        let levels = construct_mlc(&spec, 32, 0.25, &options, &streams).unwrap();
        assert_eq!(levels.len(), 1);
        let quad = QuadratureRule::for_spec(&spec, DEFAULT_NODES).unwrap();
        let sampler = StageSampler::new(&spec, &quad, 0).unwrap();
        let rel = genie_reliability(&sampler, 32, 500, &streams.fork(0)).unwrap();
        let direct = select_sets(&rel, &[true; 32], 8).unwrap();
        assert_eq!(levels[0].info_set(), direct.info_set());
        assert_eq!(levels[0].reliability(), direct.reliability());
    }

    #[test]
    fn lower_rates_select_nested_sets() {
        let spec = FadingSpec::rayleigh_snr_db(1, 1.0, CsiMode::CsiR).unwrap();
        let rel = genie_reliability(&CsirSampler { spec }, 64, 2_000, &Streams::new(8)).unwrap();
        let mut previous: Option<Vec<usize>> = None;
        for k in (0..=64).rev().step_by(8) {
            let p = select_sets(&rel, &[true; 64], k).unwrap();
            if let Some(prev) = &previous {
                assert!(p.info_set().iter().all(|i| prev.contains(i)));
            }
            previous = Some(p.info_set().to_vec());
        }
    }
}
