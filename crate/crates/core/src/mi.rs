//! Mutual-information estimators for the achievable-rate curves.
//!
//! Monte Carlo estimators split their samples into fixed-size batches, each
//! drawn from its own stream of a [`Streams`] family, and merge batch sums in
//! batch order. Results depend only on the seed, never on the worker count.
//! Estimators fed the same streams see the same `(x, h, w)` draws, so the
//! chain-rule identity holds to rounding between them.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use rand::Rng;
use rayon::prelude::*;

use crate::channel::{bpsk, observe_block, FadingSpec};
use crate::error::{Error, Result};
use crate::numeric::{gauss_hermite, log1p_exp};
use crate::rng::Streams;
use crate::subchannel::{BlockModel, QuadratureRule};

pub const DEFAULT_SAMPLES: u64 = 200_000;

const BATCH: u64 = 2048;
const Z95: f64 = 1.959_963_984_540_054;
const HERMITE_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiKind {
    CdiPerSymbol,
    /// 1-based sub-channel index.
    CdiSubchannel(usize),
    Csir,
    Biawgn,
}

impl fmt::Display for MiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MiKind::CdiPerSymbol => f.write_str("cdi-per-symbol"),
            MiKind::CdiSubchannel(j) => write!(f, "cdi-subchannel({j})"),
            MiKind::Csir => f.write_str("csir"),
            MiKind::Biawgn => f.write_str("biawgn"),
        }
    }
}

/// A rate estimate in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiEstimate {
    pub value_bits: f64,
    pub samples: u64,
    pub ci95_halfwidth: f64,
    pub kind: MiKind,
    pub snr_db: f64,
    pub coherent_time: usize,
}

impl MiEstimate {
    pub fn lower(&self) -> f64 {
        self.value_bits - self.ci95_halfwidth
    }

    pub fn upper(&self) -> f64 {
        self.value_bits + self.ci95_halfwidth
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    sum: f64,
    sumsq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sumsq += v * v;
    }

    fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sumsq += other.sumsq;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn ci95(&self) -> f64 {
        if self.n < 2 {
            return f64::INFINITY;
        }
        let n = self.n as f64;
        let var = ((self.sumsq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        Z95 * (var / n).sqrt()
    }
}

fn batches(samples: u64) -> Vec<(u64, u64)> {
    (0..samples.div_ceil(BATCH))
        .map(|b| (b, BATCH.min(samples - b * BATCH)))
        .collect()
}

fn check_samples(samples: u64) -> Result<()> {
    if samples < 2 {
        return Err(Error::invalid("at least two Monte Carlo samples are required"));
    }
    Ok(())
}

/// Noncoherent (CDI) rates that share one set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CdiRates {
    /// `I(X_{1..T_c}; Y_{1..T_c}) / T_c`.
    pub per_symbol: MiEstimate,
    /// `I(X_j; Y_{1..T_c} | X_{1..j-1})` for `j = 1..=T_c`.
    pub subchannels: Vec<MiEstimate>,
}

/// Estimates the per-symbol CDI rate and every sub-channel rate.
///
/// Each sample draws a uniform block `x`, a gain and noise; `p(y)` and the
/// prefix likelihoods `p(y | x_{1..j})` are exact sums over all inputs via
/// the factorized likelihood.
pub fn cdi_rates(spec: &FadingSpec, quad: &QuadratureRule, samples: u64, streams: &Streams) -> Result<CdiRates> {
    check_samples(samples)?;
    let tc = spec.coherent_time();
    let model = BlockModel::new(spec, quad);
    let parts: Vec<(Moments, Vec<Moments>)> = batches(samples)
        .into_par_iter()
        .map(|(b, count)| {
            let mut rng = streams.stream(b);
            let mut total = Moments::default();
            let mut levels = vec![Moments::default(); tc];
            let mut x = vec![0.0; tc];
            let mut y = vec![0.0; tc];
            let mut logs = vec![0.0; tc + 1];
            for _ in 0..count {
                let bits: u32 = rng.random();
                for (m, v) in x.iter_mut().enumerate() {
                    *v = bpsk((bits >> m) as u8);
                }
                observe_block(&x, spec, &mut rng, &mut y);
                model.log_prefix_likelihoods(&y, &x, &mut logs);
                total.push((logs[tc] - logs[0]) / (LN_2 * tc as f64));
                for (j, lv) in levels.iter_mut().enumerate() {
                    lv.push((logs[j + 1] - logs[j]) / LN_2);
                }
            }
            (total, levels)
        })
        .collect();
    let mut total = Moments::default();
    let mut levels = vec![Moments::default(); tc];
    for (t, ls) in &parts {
        total.merge(t);
        for (acc, l) in levels.iter_mut().zip(ls) {
            acc.merge(l);
        }
    }
    let estimate = |m: &Moments, kind| MiEstimate {
        value_bits: m.mean(),
        samples,
        ci95_halfwidth: m.ci95(),
        kind,
        snr_db: spec.snr_db(),
        coherent_time: tc,
    };
    Ok(CdiRates {
        per_symbol: estimate(&total, MiKind::CdiPerSymbol),
        subchannels: levels
            .iter()
            .enumerate()
            .map(|(j, m)| estimate(m, MiKind::CdiSubchannel(j + 1)))
            .collect(),
    })
}

/// Average CDI mutual information per channel use.
pub fn mi_cdi_per_symbol(
    spec: &FadingSpec,
    quad: &QuadratureRule,
    samples: u64,
    streams: &Streams,
) -> Result<MiEstimate> {
    Ok(cdi_rates(spec, quad, samples, streams)?.per_symbol)
}

/// Rate of the `j`-th (1-based) multilevel sub-channel.
pub fn mi_cdi_subchannel(
    j: usize,
    spec: &FadingSpec,
    quad: &QuadratureRule,
    samples: u64,
    streams: &Streams,
) -> Result<MiEstimate> {
    if j == 0 || j > spec.coherent_time() {
        return Err(Error::invalid(format!(
            "sub-channel {j} outside 1..={}",
            spec.coherent_time()
        )));
    }
    Ok(cdi_rates(spec, quad, samples, streams)?.subchannels[j - 1])
}

/// Gauss–Hermite evaluation of the coherent BPSK-AWGN rate at gain `h`.
struct CoherentRate {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl CoherentRate {
    fn new(order: usize) -> Self {
        let (t, w) = gauss_hermite(order);
        CoherentRate {
            nodes: t.iter().map(|t| t * std::f64::consts::SQRT_2).collect(),
            weights: w.iter().map(|w| w / PI.sqrt()).collect(),
        }
    }

    /// `1 - E[log2(1 + exp(-L))]`, `L = 2 h (h + sigma n) / sigma^2`, `n ~ N(0,1)`.
    fn bits(&self, h: f64, sigma: f64) -> f64 {
        let var = sigma * sigma;
        let loss: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&n, &w)| w * log1p_exp(-2.0 * h * (h + sigma * n) / var))
            .sum();
        1.0 - loss / LN_2
    }
}

/// Ergodic rate of the interleaved channel with receiver CSI, `I(X; Y | H)`.
pub fn mi_csir(spec: &FadingSpec, samples: u64, streams: &Streams) -> Result<MiEstimate> {
    check_samples(samples)?;
    let rule = CoherentRate::new(HERMITE_NODES);
    let sigma = spec.noise_sigma();
    let parts: Vec<Moments> = batches(samples)
        .into_par_iter()
        .map(|(b, count)| {
            let mut rng = streams.stream(b);
            let mut m = Moments::default();
            for _ in 0..count {
                let h = spec.sample_gain(&mut rng);
                m.push(rule.bits(h, sigma));
            }
            m
        })
        .collect();
    let mut total = Moments::default();
    parts.iter().for_each(|p| total.merge(p));
    Ok(MiEstimate {
        value_bits: total.mean(),
        samples,
        ci95_halfwidth: total.ci95(),
        kind: MiKind::Csir,
        snr_db: spec.snr_db(),
        coherent_time: 1,
    })
}

/// Binary-input AWGN capacity at noise standard deviation `sigma` (unit gain).
///
/// The half-width is the difference between 64- and 96-node Gauss–Hermite
/// evaluations.
pub fn mi_biawgn(sigma: f64) -> Result<MiEstimate> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("noise sigma {sigma} must be positive")));
    }
    let coarse = CoherentRate::new(HERMITE_NODES).bits(1.0, sigma);
    let fine = CoherentRate::new(96).bits(1.0, sigma);
    Ok(MiEstimate {
        value_bits: fine,
        samples: 0,
        ci95_halfwidth: (fine - coarse).abs().max(1e-15),
        kind: MiKind::Biawgn,
        snr_db: -20.0 * sigma.log10(),
        coherent_time: 1,
    })
}

/// SNR (dB) at which a rate curve sampled on `snr_db` first reaches
/// `target`, by linear interpolation between bracketing grid points.
pub fn snr_at_rate(snr_db: &[f64], rates: &[f64], target: f64) -> Option<f64> {
    snr_db
        .windows(2)
        .zip(rates.windows(2))
        .find(|(_, r)| r[0] <= target && target <= r[1] && r[1] > r[0])
        .map(|(s, r)| s[0] + (target - r[0]) / (r[1] - r[0]) * (s[1] - s[0]))
}

/// SNR (dB) in `[lo, hi]` at which the increasing curve `rate_at` reaches
/// `target`, by bisection to `tol` dB. Evaluations should share random
/// numbers so the sampled curve stays monotone.
pub fn snr_for_rate(
    mut rate_at: impl FnMut(f64) -> Result<f64>,
    target: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::invalid("bisection needs lo < hi and a positive tolerance"));
    }
    if rate_at(lo)? > target || rate_at(hi)? < target {
        return Err(Error::Infeasible(format!(
            "rate {target} is not reached between {lo} and {hi} dB"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if rate_at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
