//! Block Rayleigh fading channel `y = h x + w` with BPSK inputs.
//!
//! A frame is a `T_c x N` matrix; column `i` is one coherent block sharing
//! the gain `h_i`. Bit 0 maps to symbol `+1`. SNR is `E[h^2] / sigma^2`
//! (unit symbol energy); with the default `sigma_h^2 = 1/2`, `E[h^2] = 1`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::polar::clamp_llr;

/// Largest supported coherent time.
pub const MAX_COHERENT_TIME: usize = 16;

/// Default Rayleigh scale, giving `E[h^2] = 1`.
pub const DEFAULT_SIGMA_H: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsiMode {
    /// Only the fading distribution is known.
    Cdi,
    /// The receiver knows each block gain.
    CsiR,
    /// Both ends know the gains; no power control.
    Full,
}

impl CsiMode {
    pub fn receiver_knows_gains(self) -> bool {
        !matches!(self, CsiMode::Cdi)
    }
}

impl fmt::Display for CsiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CsiMode::Cdi => "CDI",
            CsiMode::CsiR => "CSI-R",
            CsiMode::Full => "FULL",
        })
    }
}

impl FromStr for CsiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CDI" => Ok(CsiMode::Cdi),
            "CSI-R" | "CSIR" => Ok(CsiMode::CsiR),
            "FULL" => Ok(CsiMode::Full),
            _ => Err(Error::invalid(format!("unknown CSI mode {s:?}"))),
        }
    }
}

/// Distribution of the block gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainLaw {
    /// `f(h) = h / sigma_h^2 * exp(-h^2 / (2 sigma_h^2))`.
    Rayleigh { sigma_h: f64 },
    /// Degenerate law `h = gain` with probability one.
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingSpec {
    coherent_time: usize,
    gain: GainLaw,
    noise_sigma: f64,
    csi_mode: CsiMode,
}

impl FadingSpec {
    pub fn new(coherent_time: usize, gain: GainLaw, noise_sigma: f64, csi_mode: CsiMode) -> Result<Self> {
        if coherent_time == 0 || coherent_time > MAX_COHERENT_TIME {
            return Err(Error::invalid(format!(
                "coherent time {coherent_time} outside 1..={MAX_COHERENT_TIME}"
            )));
        }
        if !(noise_sigma > 0.0 && noise_sigma.is_finite()) {
            return Err(Error::invalid(format!("noise sigma {noise_sigma} must be positive")));
        }
        match gain {
            GainLaw::Rayleigh { sigma_h } if !(sigma_h > 0.0 && sigma_h.is_finite()) => {
                return Err(Error::invalid(format!("Rayleigh scale {sigma_h} must be positive")));
            }
            GainLaw::Constant(g) if !(g >= 0.0 && g.is_finite()) => {
                return Err(Error::invalid(format!("constant gain {g} must be nonnegative")));
            }
            _ => {}
        }
        Ok(FadingSpec {
            coherent_time,
            gain,
            noise_sigma,
            csi_mode,
        })
    }

    /// Rayleigh fading with `E[h^2] = 1` at the given SNR.
    pub fn rayleigh_snr_db(coherent_time: usize, snr_db: f64, csi_mode: CsiMode) -> Result<Self> {
        let sigma = 10f64.powf(-snr_db / 20.0);
        Self::new(coherent_time, GainLaw::Rayleigh { sigma_h: DEFAULT_SIGMA_H }, sigma, csi_mode)
    }

    pub fn coherent_time(&self) -> usize {
        self.coherent_time
    }

    pub fn gain_law(&self) -> GainLaw {
        self.gain
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_sigma * self.noise_sigma
    }

    pub fn csi_mode(&self) -> CsiMode {
        self.csi_mode
    }

    pub fn with_csi_mode(mut self, mode: CsiMode) -> Self {
        self.csi_mode = mode;
        self
    }

    pub fn with_coherent_time(self, coherent_time: usize) -> Result<Self> {
        Self::new(coherent_time, self.gain, self.noise_sigma, self.csi_mode)
    }

    pub fn mean_square_gain(&self) -> f64 {
        match self.gain {
            GainLaw::Rayleigh { sigma_h } => 2.0 * sigma_h * sigma_h,
            GainLaw::Constant(g) => g * g,
        }
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (self.mean_square_gain() / self.noise_variance()).log10()
    }

    /// Draws one block gain.
    pub fn sample_gain<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.gain {
            GainLaw::Rayleigh { sigma_h } => {
                let u = 1.0 - rng.random::<f64>();
                rayleigh_from_uniform(u, sigma_h)
            }
            GainLaw::Constant(g) => g,
        }
    }
}

/// Inverse-CDF Rayleigh sample `sigma_h * sqrt(-2 ln u)` for `u` in `(0, 1]`.
pub fn rayleigh_from_uniform(u: f64, sigma_h: f64) -> f64 {
    sigma_h * (-2.0 * u.ln()).max(0.0).sqrt()
}

#[inline]
pub fn bpsk(bit: u8) -> f64 {
    if bit & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::default(); rows * cols],
        }
    }
}

impl<T: Copy> Matrix<T> {
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("rows have different lengths"));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }
}

/// One transmitted and received frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub tx_bits: Matrix<u8>,
    pub tx_symbols: Matrix<f64>,
    pub rx: Matrix<f64>,
    /// One gain per block column; present only when the receiver has CSI.
    pub gains: Option<Vec<f64>>,
}

/// Passes one block of symbols through the channel; returns the gain.
///
/// Draw order is the gain, then one noise sample per symbol.
pub fn observe_block<R: Rng + ?Sized>(symbols: &[f64], spec: &FadingSpec, rng: &mut R, out: &mut [f64]) -> f64 {
    let h = spec.sample_gain(rng);
    for (y, &x) in out.iter_mut().zip(symbols) {
        let w: f64 = rng.sample(StandardNormal);
        *y = h * x + spec.noise_sigma * w;
    }
    h
}

/// Sends a `T_c x N` bit matrix block by block.
pub fn transmit_frame<R: Rng + ?Sized>(bits: &Matrix<u8>, spec: &FadingSpec, rng: &mut R) -> Result<Frame> {
    if bits.rows() != spec.coherent_time() {
        return Err(Error::invalid(format!(
            "frame has {} rows, coherent time is {}",
            bits.rows(),
            spec.coherent_time()
        )));
    }
    let (tc, n) = (bits.rows(), bits.cols());
    let mut tx_symbols = Matrix::zeros(tc, n);
    let mut rx = Matrix::zeros(tc, n);
    let mut gains = Vec::with_capacity(n);
    let mut sym = vec![0.0; tc];
    let mut y = vec![0.0; tc];
    for i in 0..n {
        for j in 0..tc {
            sym[j] = bpsk(bits.get(j, i));
            tx_symbols.set(j, i, sym[j]);
        }
        gains.push(observe_block(&sym, spec, rng, &mut y));
        for (j, &v) in y.iter().enumerate() {
            rx.set(j, i, v);
        }
    }
    Ok(Frame {
        tx_bits: bits.clone(),
        tx_symbols,
        rx,
        gains: spec.csi_mode().receiver_knows_gains().then_some(gains),
    })
}

/// Coherent BPSK LLR `2 h y / sigma^2`, clamped.
#[inline]
pub fn csir_llr(y: f64, h: f64, spec: &FadingSpec) -> f64 {
    clamp_llr(2.0 * h * y / spec.noise_variance())
}
