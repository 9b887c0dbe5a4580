//! End-to-end pipelines: multilevel (CDI), parallel per-row and interleaved
//! (CSI at the receiver) transmission of polar codes over a fading frame.
//!
//! A frame is a `T_c x N` bit matrix sent column by column; column `i` sees
//! one gain.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{bpsk, csir_llr, transmit_frame, FadingSpec, Frame, Matrix};
use crate::error::{Error, Result};
use crate::polar::{encode, CodeProfile, ScDecoder};
use crate::rng::Streams;
use crate::subchannel::{BlockModel, QuadratureRule};

/// Seeded Fisher-Yates permutation. `interleave` maps `v` to `w` with
/// `w[k] = v[perm[k]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterleaverSpec {
    seed: u64,
    permutation: Vec<usize>,
    inverse: Vec<usize>,
}

impl InterleaverSpec {
    pub fn new(length: usize, seed: u64) -> Self {
        let mut permutation: Vec<usize> = (0..length).collect();
        permutation.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self::from_permutation(permutation, seed)
    }

    pub fn identity(length: usize) -> Self {
        Self::from_permutation((0..length).collect(), 0)
    }

    fn from_permutation(permutation: Vec<usize>, seed: u64) -> Self {
        let mut inverse = vec![0; permutation.len()];
        for (k, &p) in permutation.iter().enumerate() {
            inverse[p] = k;
        }
        InterleaverSpec {
            seed,
            permutation,
            inverse,
        }
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn interleave<T: Copy>(&self, v: &[T]) -> Result<Vec<T>> {
        self.check(v.len())?;
        Ok(self.permutation.iter().map(|&p| v[p]).collect())
    }

    pub fn deinterleave<T: Copy>(&self, w: &[T]) -> Result<Vec<T>> {
        self.check(w.len())?;
        Ok(self.inverse.iter().map(|&k| w[k]).collect())
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::invalid(format!(
                "interleaver of length {} applied to {len} symbols",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Outcome of one decoded frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameResult {
    pub decoded_bits: Vec<Vec<u8>>,
    pub frame_error: bool,
    pub level_errors: Vec<bool>,
    pub bit_errors: usize,
}

impl FrameResult {
    pub fn score(decoded_bits: Vec<Vec<u8>>, sent: &[Vec<u8>]) -> Result<Self> {
        if decoded_bits.len() != sent.len() {
            return Err(Error::invalid("decoded and sent level counts differ"));
        }
        let mut bit_errors = 0;
        let mut level_errors = Vec::with_capacity(sent.len());
        for (d, s) in decoded_bits.iter().zip(sent) {
            if d.len() != s.len() {
                return Err(Error::invalid("decoded and sent lengths differ"));
            }
            let e = d.iter().zip(s).filter(|(a, b)| a != b).count();
            bit_errors += e;
            level_errors.push(e > 0);
        }
        Ok(FrameResult {
            decoded_bits,
            frame_error: level_errors.iter().any(|&e| e),
            level_errors,
            bit_errors,
        })
    }
}

fn check_profiles(profiles: &[CodeProfile], rows: usize, cols: usize) -> Result<()> {
    if profiles.len() != rows {
        return Err(Error::invalid(format!("{} profiles for {rows} rows", profiles.len())));
    }
    if let Some(p) = profiles.iter().find(|p| p.block_length() != cols) {
        return Err(Error::invalid(format!(
            "profile length {} does not match row length {cols}",
            p.block_length()
        )));
    }
    Ok(())
}

fn stack_rows(info: &[Vec<u8>], profiles: &[CodeProfile]) -> Result<Matrix<u8>> {
    if info.len() != profiles.len() {
        return Err(Error::invalid(format!(
            "{} information vectors for {} levels",
            info.len(),
            profiles.len()
        )));
    }
    let rows = info
        .iter()
        .zip(profiles)
        .map(|(b, p)| encode(p, b, 0.0).map(|(_, x)| x))
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(&rows)
}

/// Row `j` of the frame is the codeword of level `j`.
pub fn mlc_encode(info: &[Vec<u8>], profiles: &[CodeProfile]) -> Result<Matrix<u8>> {
    stack_rows(info, profiles)
}

/// Multistage decoding; stage `j` conditions on the re-encoded decisions of
/// the earlier levels. Gains in `frame` are ignored.
pub fn mlc_decode(frame: &Frame, profiles: &[CodeProfile], spec: &FadingSpec, quad: &QuadratureRule) -> Result<Vec<Vec<u8>>> {
    multistage(frame, profiles, spec, quad, false)
}

/// As [`mlc_decode`], but every stage conditions on the transmitted rows.
pub fn mlc_decode_genie(
    frame: &Frame,
    profiles: &[CodeProfile],
    spec: &FadingSpec,
    quad: &QuadratureRule,
) -> Result<Vec<Vec<u8>>> {
    multistage(frame, profiles, spec, quad, true)
}

fn multistage(
    frame: &Frame,
    profiles: &[CodeProfile],
    spec: &FadingSpec,
    quad: &QuadratureRule,
    genie: bool,
) -> Result<Vec<Vec<u8>>> {
    let (tc, n) = (frame.rx.rows(), frame.rx.cols());
    if tc != spec.coherent_time() {
        return Err(Error::invalid(format!(
            "frame has {tc} rows, coherent time is {}",
            spec.coherent_time()
        )));
    }
    check_profiles(profiles, tc, n)?;
    let model = BlockModel::new(spec, quad);
    let y: Vec<Vec<f64>> = (0..n).map(|i| frame.rx.column(i)).collect();
    // symbols decided so far, one vector per column
    let mut xhat: Vec<Vec<f64>> = vec![Vec::with_capacity(tc); n];
    let mut out = Vec::with_capacity(tc);
    for (j, profile) in profiles.iter().enumerate() {
        let llrs: Vec<f64> = y.iter().zip(&xhat).map(|(yc, xc)| model.stage_llr(yc, xc)).collect();
        let dec = ScDecoder::new(profile);
        let (u, x) = dec.decode(&llrs)?;
        out.push(dec.info_bits(&u));
        let row: Vec<u8> = if genie { frame.tx_bits.row(j).to_vec() } else { x };
        for (xc, &b) in xhat.iter_mut().zip(&row) {
            xc.push(bpsk(b));
        }
    }
    Ok(out)
}

/// Each row carries an independent codeword of the same length.
pub fn parallel_encode(info: &[Vec<u8>], profiles: &[CodeProfile]) -> Result<Matrix<u8>> {
    stack_rows(info, profiles)
}

fn require_gains(frame: &Frame) -> Result<&[f64]> {
    frame
        .gains
        .as_deref()
        .ok_or_else(|| Error::InvalidState("receiver has no channel gains".into()))
}

/// Decodes one row of a parallel frame.
pub fn parallel_decode_row(frame: &Frame, profile: &CodeProfile, spec: &FadingSpec, row: usize) -> Result<Vec<u8>> {
    let gains = require_gains(frame)?;
    if row >= frame.rx.rows() || profile.block_length() != frame.rx.cols() {
        return Err(Error::invalid("row or profile does not fit the frame"));
    }
    let llrs: Vec<f64> = frame
        .rx
        .row(row)
        .iter()
        .zip(gains)
        .map(|(&y, &h)| csir_llr(y, h, spec))
        .collect();
    let dec = ScDecoder::new(profile);
    let (u, _) = dec.decode(&llrs)?;
    Ok(dec.info_bits(&u))
}

pub fn parallel_decode(frame: &Frame, profiles: &[CodeProfile], spec: &FadingSpec) -> Result<Vec<Vec<u8>>> {
    require_gains(frame)?;
    check_profiles(profiles, frame.rx.rows(), frame.rx.cols())?;
    profiles
        .iter()
        .enumerate()
        .map(|(j, p)| parallel_decode_row(frame, p, spec, j))
        .collect()
}

/// One codeword of length `T_c N`, interleaved and written column-major so
/// that `v[i * T_c + j]` lands in row `j`, column `i`.
pub fn bicm_encode(info: &[u8], profile: &CodeProfile, il: &InterleaverSpec, tc: usize) -> Result<Matrix<u8>> {
    let len = profile.block_length();
    if il.len() != len || tc == 0 || !len.is_multiple_of(tc) {
        return Err(Error::invalid(format!(
            "code length {len}, interleaver length {} and coherent time {tc} are inconsistent",
            il.len()
        )));
    }
    let (_, x) = encode(profile, info, 0.0)?;
    let v = il.interleave(&x)?;
    let n = len / tc;
    let mut m = Matrix::zeros(tc, n);
    for (k, &b) in v.iter().enumerate() {
        m.set(k % tc, k / tc, b);
    }
    Ok(m)
}

pub fn bicm_decode(frame: &Frame, profile: &CodeProfile, il: &InterleaverSpec, spec: &FadingSpec) -> Result<Vec<u8>> {
    let gains = require_gains(frame)?;
    let (tc, n) = (frame.rx.rows(), frame.rx.cols());
    if profile.block_length() != tc * n || il.len() != tc * n {
        return Err(Error::invalid(format!(
            "frame of {tc}x{n} symbols does not match code length {}",
            profile.block_length()
        )));
    }
    let mut v = vec![0.0; tc * n];
    for (k, l) in v.iter_mut().enumerate() {
        let (j, i) = (k % tc, k / tc);
        *l = csir_llr(frame.rx.get(j, i), gains[i], spec);
    }
    let llrs = il.deinterleave(&v)?;
    let dec = ScDecoder::new(profile);
    let (u, _) = dec.decode(&llrs)?;
    Ok(dec.info_bits(&u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Mlc,
    Parallel,
    Bicm,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Mlc => "mlc",
            Scheme::Parallel => "parallel",
            Scheme::Bicm => "bicm",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlc" => Ok(Scheme::Mlc),
            "parallel" => Ok(Scheme::Parallel),
            "bicm" => Ok(Scheme::Bicm),
            _ => Err(Error::invalid(format!("unknown scheme '{s}'"))),
        }
    }
}

/// The codes of one scheme, ready for simulation.
#[derive(Debug, Clone)]
pub enum CodeSet {
    Mlc(Vec<CodeProfile>),
    Parallel(Vec<CodeProfile>),
    Bicm {
        profile: CodeProfile,
        interleaver: InterleaverSpec,
        coherent_time: usize,
    },
}

impl CodeSet {
    pub fn scheme(&self) -> Scheme {
        match self {
            CodeSet::Mlc(_) => Scheme::Mlc,
            CodeSet::Parallel(_) => Scheme::Parallel,
            CodeSet::Bicm { .. } => Scheme::Bicm,
        }
    }

    pub fn profiles(&self) -> Vec<&CodeProfile> {
        match self {
            CodeSet::Mlc(p) | CodeSet::Parallel(p) => p.iter().collect(),
            CodeSet::Bicm { profile, .. } => vec![profile],
        }
    }

    pub fn coherent_time(&self) -> usize {
        match self {
            CodeSet::Mlc(p) | CodeSet::Parallel(p) => p.len(),
            CodeSet::Bicm { coherent_time, .. } => *coherent_time,
        }
    }

    /// Columns per frame.
    pub fn block_count(&self) -> usize {
        match self {
            CodeSet::Mlc(p) | CodeSet::Parallel(p) => p.first().map_or(0, |p| p.block_length()),
            CodeSet::Bicm {
                profile, coherent_time, ..
            } => profile.block_length() / coherent_time,
        }
    }

    pub fn info_bits_per_frame(&self) -> usize {
        self.profiles().iter().map(|p| p.info_set().len()).sum()
    }

    /// Information bits per channel use.
    pub fn rate(&self) -> f64 {
        self.info_bits_per_frame() as f64 / (self.coherent_time() * self.block_count()) as f64
    }

    /// Sum of the per-index error estimates over all information sets.
    pub fn union_bound(&self) -> f64 {
        self.profiles().iter().map(|p| p.union_bound()).sum()
    }

    /// Encodes, transmits and decodes one frame of random data.
    pub fn run_frame<R: Rng>(&self, spec: &FadingSpec, quad: &QuadratureRule, rng: &mut R) -> Result<FrameResult> {
        let sent: Vec<Vec<u8>> = self
            .profiles()
            .iter()
            .map(|p| (0..p.info_set().len()).map(|_| rng.random::<bool>() as u8).collect())
            .collect();
        let decoded = match self {
            CodeSet::Mlc(p) => {
                let frame = transmit_frame(&mlc_encode(&sent, p)?, spec, rng)?;
                mlc_decode(&frame, p, spec, quad)?
            }
            CodeSet::Parallel(p) => {
                let frame = transmit_frame(&parallel_encode(&sent, p)?, spec, rng)?;
                parallel_decode(&frame, p, spec)?
            }
            CodeSet::Bicm {
                profile,
                interleaver,
                coherent_time,
            } => {
                let bits = bicm_encode(&sent[0], profile, interleaver, *coherent_time)?;
                let frame = transmit_frame(&bits, spec, rng)?;
                vec![bicm_decode(&frame, profile, interleaver, spec)?]
            }
        };
        FrameResult::score(decoded, &sent)
    }
}

/// Error counts of a frame-error simulation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FerStats {
    pub frames: u64,
    pub frame_errors: u64,
    pub bit_errors: u64,
    pub level_errors: Vec<u64>,
}

impl FerStats {
    pub fn fer(&self) -> f64 {
        self.frame_errors as f64 / self.frames as f64
    }

    /// Binomial standard error of [`FerStats::fer`].
    pub fn std_error(&self) -> f64 {
        let p = self.fer();
        (p * (1.0 - p) / self.frames as f64).sqrt()
    }

    fn merge(mut self, other: FerStats) -> FerStats {
        if self.level_errors.len() < other.level_errors.len() {
            self.level_errors.resize(other.level_errors.len(), 0);
        }
        for (a, b) in self.level_errors.iter_mut().zip(&other.level_errors) {
            *a += b;
        }
        self.frames += other.frames;
        self.frame_errors += other.frame_errors;
        self.bit_errors += other.bit_errors;
        self
    }
}

/// Simulates `frames` frames; frame `f` draws from stream `f`, so the counts
/// do not depend on the worker count.
pub fn simulate_fer(
    codes: &CodeSet,
    spec: &FadingSpec,
    quad: &QuadratureRule,
    frames: u64,
    streams: &Streams,
) -> Result<FerStats> {
    if frames == 0 {
        return Err(Error::invalid("at least one frame is required"));
    }
    if spec.coherent_time() != codes.coherent_time() {
        return Err(Error::invalid(format!(
            "codes built for coherent time {}, channel has {}",
            codes.coherent_time(),
            spec.coherent_time()
        )));
    }
    (0..frames)
        .into_par_iter()
        .map(|f| -> Result<FerStats> {
            let r = codes.run_frame(spec, quad, &mut streams.stream(f))?;
            Ok(FerStats {
                frames: 1,
                frame_errors: u64::from(r.frame_error),
                bit_errors: r.bit_errors as u64,
                level_errors: r.level_errors.iter().map(|&e| u64::from(e)).collect(),
            })
        })
        .try_reduce(FerStats::default, |a, b| Ok(a.merge(b)))
}
