//! Noncoherent block likelihoods and the multilevel sub-channel LLRs.
//!
//! For a block with gain `h`, `prod_k N(y_k; h x_k, sigma^2)` depends on `x`
//! only through `s = <x, y>` because `x_k^2 = 1`. Averaging a uniform suffix
//! `x_{p..T_c}` out of that product factorizes:
//!
//! ```text
//! 2^-(T_c-p) sum_{suffix} exp(h <x, y>_suffix / sigma^2) = prod_{m >= p} cosh(h y_m / sigma^2)
//! ```
//!
//! so every prefix likelihood costs `O(T_c)` per quadrature node instead of
//! `2^(T_c-p)` block integrals. The gain integral is a fixed quadrature rule
//! whose weights already include `f(h)`.

use std::f64::consts::PI;

use crate::channel::{FadingSpec, GainLaw};
use crate::error::{Error, Result};
use crate::numeric::{gauss_legendre, log_cosh, log_sum_exp};
use crate::polar::clamp_llr;

/// Gauss–Legendre order of each panel of the Rayleigh rule.
pub const PANEL_ORDER: usize = 8;

/// Default number of quadrature nodes.
pub const DEFAULT_NODES: usize = 64;

/// Rayleigh tail cut: the rule covers `h^2 / (2 sigma_h^2) <= TAIL_EXPONENT`.
const TAIL_EXPONENT: f64 = 40.0;

/// Discretization of `integral g(h) f(h) dh` as `sum_k w_k g(h_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
}

impl QuadratureRule {
    /// A rule for the gain law of `spec`.
    ///
    /// Rayleigh gains use composite Gauss–Legendre in `h` over
    /// `[0, sigma_h sqrt(2 * 40)]` with panels of eight nodes; `nodes` must be
    /// a positive multiple of eight. Constant gains give a one-node rule.
    pub fn for_spec(spec: &FadingSpec, nodes: usize) -> Result<Self> {
        match spec.gain_law() {
            GainLaw::Constant(g) => Ok(Self::point(g)),
            GainLaw::Rayleigh { sigma_h } => Self::rayleigh(sigma_h, nodes),
        }
    }

    pub fn rayleigh(sigma_h: f64, nodes: usize) -> Result<Self> {
        if nodes == 0 || nodes % PANEL_ORDER != 0 {
            return Err(Error::invalid(format!(
                "quadrature node count {nodes} must be a positive multiple of {PANEL_ORDER}"
            )));
        }
        let panels = nodes / PANEL_ORDER;
        let upper = sigma_h * (2.0 * TAIL_EXPONENT).sqrt();
        let width = upper / panels as f64;
        let (x, w) = gauss_legendre(PANEL_ORDER);
        let var = sigma_h * sigma_h;
        let mut hs = Vec::with_capacity(nodes);
        let mut ws = Vec::with_capacity(nodes);
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * width;
            for (xi, wi) in x.iter().zip(&w) {
                let h = mid + 0.5 * width * xi;
                let density = h / var * (-h * h / (2.0 * var)).exp();
                hs.push(h);
                ws.push(0.5 * width * wi * density);
            }
        }
        Ok(Self::from_parts(hs, ws))
    }

    /// The degenerate rule `h = gain` with weight one.
    pub fn point(gain: f64) -> Self {
        Self::from_parts(vec![gain], vec![1.0])
    }

    fn from_parts(nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        QuadratureRule {
            nodes,
            weights,
            log_weights,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn count(&self) -> usize {
        self.nodes.len()
    }
}

/// `s = <x, y>` and `||y||^2` of one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SufficientStat {
    pub inner: f64,
    pub energy: f64,
}

impl SufficientStat {
    pub fn new(y: &[f64], x: &[f64]) -> Self {
        SufficientStat {
            inner: y.iter().zip(x).map(|(a, b)| a * b).sum(),
            energy: y.iter().map(|v| v * v).sum(),
        }
    }
}

/// Precomputed per-node constants for one `(spec, rule)` pair.
#[derive(Debug, Clone)]
pub struct BlockModel {
    coherent_time: usize,
    inv_var: f64,
    log_norm: f64,
    /// `log w_k - h_k^2 T_c / (2 sigma^2)`
    base: Vec<f64>,
    /// `h_k / sigma^2`
    slope: Vec<f64>,
}

impl BlockModel {
    pub fn new(spec: &FadingSpec, quad: &QuadratureRule) -> Self {
        let tc = spec.coherent_time();
        let var = spec.noise_variance();
        let inv_var = 1.0 / var;
        BlockModel {
            coherent_time: tc,
            inv_var,
            log_norm: -0.5 * tc as f64 * (2.0 * PI * var).ln(),
            base: quad
                .nodes
                .iter()
                .zip(&quad.log_weights)
                .map(|(h, lw)| lw - h * h * tc as f64 * 0.5 * inv_var)
                .collect(),
            slope: quad.nodes.iter().map(|h| h * inv_var).collect(),
        }
    }

    pub fn coherent_time(&self) -> usize {
        self.coherent_time
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.coherent_time {
            return Err(Error::invalid(format!(
                "block has {} samples, coherent time is {}",
                y.len(),
                self.coherent_time
            )));
        }
        Ok(())
    }

    fn outer(&self, y: &[f64]) -> f64 {
        self.log_norm - 0.5 * self.inv_var * y.iter().map(|v| v * v).sum::<f64>()
    }

    /// `log p(y | x_{1..p})` with the remaining symbols uniform, for a prefix
    /// of any length `p <= T_c`.
    pub fn log_prefix_likelihood(&self, y: &[f64], prefix: &[f64]) -> Result<f64> {
        self.check_len(y)?;
        if prefix.len() > self.coherent_time {
            return Err(Error::invalid(format!(
                "prefix of length {} exceeds coherent time {}",
                prefix.len(),
                self.coherent_time
            )));
        }
        let p = prefix.len();
        let s: f64 = prefix.iter().zip(y).map(|(x, y)| x * y).sum();
        let terms: Vec<f64> = self
            .base
            .iter()
            .zip(&self.slope)
            .map(|(&b, &a)| b + a * s + y[p..].iter().map(|&v| log_cosh(a * v)).sum::<f64>())
            .collect();
        Ok(self.outer(y) + log_sum_exp(&terms))
    }

    /// `log p(y | x_{1..p})` for every `p` in `0..=T_c` at once, where `x` is
    /// the full block; `out[p]` receives the value for prefix length `p`.
    pub fn log_prefix_likelihoods(&self, y: &[f64], x: &[f64], out: &mut [f64]) {
        let tc = self.coherent_time;
        let q = self.base.len();
        debug_assert!(y.len() == tc && x.len() == tc && out.len() == tc + 1);
        let mut prefix_inner = vec![0.0; tc + 1];
        for m in 0..tc {
            prefix_inner[m + 1] = prefix_inner[m] + x[m] * y[m];
        }
        // terms[p * q + k]
        let mut terms = vec![0.0; (tc + 1) * q];
        for k in 0..q {
            let a = self.slope[k];
            let mut suffix = 0.0;
            for p in (0..=tc).rev() {
                terms[p * q + k] = self.base[k] + a * prefix_inner[p] + suffix;
                if p > 0 {
                    suffix += log_cosh(a * y[p - 1]);
                }
            }
        }
        let outer = self.outer(y);
        for p in 0..=tc {
            out[p] = outer + log_sum_exp(&terms[p * q..(p + 1) * q]);
        }
    }

    /// LLR of the symbol after `decided` (bit 0 ↔ `+1`), given the whole block
    /// and the decided prefix, clamped.
    pub fn stage_llr(&self, y: &[f64], decided: &[f64]) -> f64 {
        let p = decided.len();
        debug_assert!(p < self.coherent_time && y.len() == self.coherent_time);
        let s: f64 = decided.iter().zip(y).map(|(x, y)| x * y).sum();
        let q = self.base.len();
        let mut plus = Vec::with_capacity(q);
        let mut minus = Vec::with_capacity(q);
        let (sp, sm) = (s + y[p], s - y[p]);
        for (&b, &a) in self.base.iter().zip(&self.slope) {
            let suffix: f64 = y[p + 1..].iter().map(|&v| log_cosh(a * v)).sum();
            plus.push(b + a * sp + suffix);
            minus.push(b + a * sm + suffix);
        }
        clamp_llr(log_sum_exp(&plus) - log_sum_exp(&minus))
    }
}

/// `p(y | x) = integral prod_k N(y_k; h x_k, sigma^2) f(h) dh`.
///
/// Evaluated in the log domain; underflow returns the smallest positive
/// normal `f64`.
pub fn block_likelihood(y: &[f64], x: &[f64], spec: &FadingSpec, quad: &QuadratureRule) -> Result<f64> {
    if x.len() != spec.coherent_time() {
        return Err(Error::invalid("symbol block length differs from coherent time"));
    }
    let model = BlockModel::new(spec, quad);
    Ok(floor_exp(model.log_prefix_likelihood(y, x)?))
}

/// `p(y | x_{1..j})` with the remaining `T_c - j` symbols uniform.
pub fn prefix_likelihood(y: &[f64], x_prefix: &[f64], spec: &FadingSpec, quad: &QuadratureRule) -> Result<f64> {
    let model = BlockModel::new(spec, quad);
    Ok(floor_exp(model.log_prefix_likelihood(y, x_prefix)?))
}

/// `p(y | x_{1..j})` by explicit enumeration of all `2^(T_c - j)` suffixes.
/// Exponential in `T_c`; kept as a cross-check of the factorized form.
pub fn prefix_likelihood_enumerated(
    y: &[f64],
    x_prefix: &[f64],
    spec: &FadingSpec,
    quad: &QuadratureRule,
) -> Result<f64> {
    let tc = spec.coherent_time();
    if x_prefix.len() > tc {
        return Err(Error::invalid("prefix longer than coherent time"));
    }
    let free = tc - x_prefix.len();
    let model = BlockModel::new(spec, quad);
    let mut logs = Vec::with_capacity(1 << free);
    let mut x = x_prefix.to_vec();
    x.resize(tc, 1.0);
    for pattern in 0..(1usize << free) {
        for m in 0..free {
            x[x_prefix.len() + m] = if pattern >> m & 1 == 0 { 1.0 } else { -1.0 };
        }
        logs.push(model.log_prefix_likelihood(y, &x)?);
    }
    Ok(floor_exp(log_sum_exp(&logs) - (free as f64) * std::f64::consts::LN_2))
}

/// LLR of `x_j` given the whole block and the decided `x_{1..j-1}`.
pub fn stage_llr(y: &[f64], decided_prefix: &[f64], spec: &FadingSpec, quad: &QuadratureRule) -> Result<f64> {
    let model = BlockModel::new(spec, quad);
    model.check_len(y)?;
    if decided_prefix.len() >= spec.coherent_time() {
        return Err(Error::invalid("decided prefix must be shorter than the coherent time"));
    }
    Ok(model.stage_llr(y, decided_prefix))
}

fn floor_exp(log_value: f64) -> f64 {
    log_value.exp().max(f64::MIN_POSITIVE)
}
