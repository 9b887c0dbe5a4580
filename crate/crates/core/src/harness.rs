//! Experiment configuration and the CSV-producing runners behind the CLI.
//!
//! A configuration is a flat list of `key=value` pairs. Files use one pair
//! per line with `#` comments; command-line flags are applied on top.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::channel::{CsiMode, FadingSpec, GainLaw};
use crate::construction::{construct_bicm, construct_mlc, construct_parallel, ConstructionOptions};
use crate::error::{Error, Result};
use crate::mi::{cdi_rates, mi_biawgn, mi_csir, MiEstimate};
use crate::polar::CodeProfile;
use crate::rng::Streams;
use crate::schemes::{simulate_fer, CodeSet, FerStats, InterleaverSpec, Scheme};
use crate::subchannel::QuadratureRule;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Noise level of the `noiseless` override.
pub const NOISELESS_SIGMA: f64 = 1e-3;

/// Standard errors of slack allowed by the bound check.
pub const BOUND_SLACK_SE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    RateCurves,
    SubchannelRates,
    Construct,
    FerSweep,
    BoundCheck,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::RateCurves => "rate-curves",
            Experiment::SubchannelRates => "subchannel-rates",
            Experiment::Construct => "construct",
            Experiment::FerSweep => "fer-sweep",
            Experiment::BoundCheck => "bound-check",
        })
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rate-curves" | "rates" => Ok(Experiment::RateCurves),
            "subchannel-rates" | "subrates" => Ok(Experiment::SubchannelRates),
            "construct" => Ok(Experiment::Construct),
            "fer-sweep" | "fer" => Ok(Experiment::FerSweep),
            "bound-check" => Ok(Experiment::BoundCheck),
            _ => Err(Error::Config(format!("unknown experiment '{s}'"))),
        }
    }
}

/// Every key accepted in a configuration file or as a `--key` flag.
pub const KEYS: &[&str] = &[
    "experiment",
    "tc",
    "n",
    "snr_grid_db",
    "rate",
    "samples",
    "seed",
    "csi_mode",
    "quadrature_nodes",
    "output_path",
    "scheme",
    "frames",
    "construct_samples",
    "profile_dir",
    "construct",
    "noiseless",
    "label",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub coherent_times: Vec<usize>,
    pub n: usize,
    pub snr_grid_db: Vec<f64>,
    pub rate: f64,
    pub samples: u64,
    pub seed: u64,
    pub csi_mode: Option<CsiMode>,
    pub quadrature_nodes: usize,
    pub output_path: Option<PathBuf>,
    pub scheme: Scheme,
    pub frames: u64,
    pub construct_samples: u64,
    pub profile_dir: Option<PathBuf>,
    pub construct: bool,
    pub noiseless: bool,
    pub label: String,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            coherent_times: vec![2],
            n: 1024,
            snr_grid_db: vec![0.0],
            rate: 0.5,
            samples: crate::mi::DEFAULT_SAMPLES,
            seed: 1,
            csi_mode: None,
            quadrature_nodes: crate::subchannel::DEFAULT_NODES,
            output_path: None,
            scheme: Scheme::Bicm,
            frames: 1000,
            construct_samples: crate::construction::DEFAULT_CONSTRUCTION_SAMPLES,
            profile_dir: None,
            construct: false,
            noiseless: false,
            label: "code".into(),
        }
    }

    /// Applies `pairs` in order on top of the defaults, then validates.
    pub fn from_pairs(experiment: Experiment, pairs: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::defaults(experiment);
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (if any) and applies `overrides` after it.
    pub fn load(experiment: Experiment, path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut pairs = match path {
            Some(p) => parse_config_text(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
            None => Vec::new(),
        };
        pairs.extend_from_slice(overrides);
        Self::from_pairs(experiment, &pairs)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = |what: &str| Error::Config(format!("{key}: cannot parse '{value}' as {what}"));
        match key {
            "experiment" => {
                let e: Experiment = value.parse()?;
                if e != self.experiment {
                    return Err(Error::Config(format!(
                        "configuration is for '{e}' but '{}' was requested",
                        self.experiment
                    )));
                }
            }
            "tc" => {
                self.coherent_times = value
                    .split(',')
                    .map(|s| s.trim().parse().map_err(|_| bad("a list of integers")))
                    .collect::<Result<_>>()?
            }
            "n" => self.n = value.parse().map_err(|_| bad("an integer"))?,
            "snr_grid_db" => self.snr_grid_db = parse_grid(value).ok_or_else(|| bad("a grid"))?,
            "rate" => self.rate = value.parse().map_err(|_| bad("a number"))?,
            "samples" => self.samples = value.parse().map_err(|_| bad("an integer"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("an integer"))?,
            "csi_mode" => self.csi_mode = Some(value.parse().map_err(|_| bad("a CSI mode"))?),
            "quadrature_nodes" => self.quadrature_nodes = value.parse().map_err(|_| bad("an integer"))?,
            "output_path" => self.output_path = Some(PathBuf::from(value)),
            "scheme" => self.scheme = value.parse().map_err(|_| bad("a scheme"))?,
            "frames" => self.frames = value.parse().map_err(|_| bad("an integer"))?,
            "construct_samples" => self.construct_samples = value.parse().map_err(|_| bad("an integer"))?,
            "profile_dir" => self.profile_dir = Some(PathBuf::from(value)),
            "construct" => self.construct = parse_bool(value).ok_or_else(|| bad("a boolean"))?,
            "noiseless" => self.noiseless = parse_bool(value).ok_or_else(|| bad("a boolean"))?,
            "label" => {
                if value.is_empty() || value.contains(char::is_whitespace) || value.contains('/') {
                    return Err(bad("a label without spaces or slashes"));
                }
                self.label = value.to_string()
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.snr_grid_db.is_empty() {
            return fail("snr_grid_db is empty".into());
        }
        if self.snr_grid_db.windows(2).any(|w| !(w[1] > w[0])) || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return fail("snr_grid_db must be strictly increasing".into());
        }
        if self.samples == 0 {
            return fail("samples must be positive".into());
        }
        if self.frames == 0 {
            return fail("frames must be positive".into());
        }
        if self.coherent_times.is_empty() || self.coherent_times.iter().any(|&t| t == 0 || t > crate::channel::MAX_COHERENT_TIME) {
            return fail(format!("tc values must lie in 1..={}", crate::channel::MAX_COHERENT_TIME));
        }
        if !self.n.is_power_of_two() {
            return fail(format!("n = {} is not a power of two", self.n));
        }
        if !(0.0..=1.0).contains(&self.rate) {
            return fail(format!("rate {} outside [0, 1]", self.rate));
        }
        if self.quadrature_nodes == 0 {
            return fail("quadrature_nodes must be positive".into());
        }
        if let Some(mode) = self.csi_mode {
            let ok = match self.scheme {
                Scheme::Mlc => mode == CsiMode::Cdi,
                Scheme::Parallel | Scheme::Bicm => mode != CsiMode::Cdi,
            };
            if !ok && matches!(self.experiment, Experiment::Construct | Experiment::FerSweep | Experiment::BoundCheck) {
                return fail(format!("scheme {} cannot run with CSI mode {mode}", self.scheme));
            }
        }
        if self.experiment == Experiment::Construct {
            if self.profile_dir.is_none() {
                return fail("construct needs profile_dir".into());
            }
            if self.snr_grid_db.len() != 1 {
                return fail("construct takes a single design SNR".into());
            }
        }
        if matches!(self.experiment, Experiment::FerSweep | Experiment::BoundCheck) && !self.construct && self.profile_dir.is_none() {
            return fail("set profile_dir or construct=true".into());
        }
        Ok(())
    }

    /// Canonical `key=value` rendering of every setting except the output
    /// path.
    pub fn canonical(&self) -> String {
        let mut m = BTreeMap::new();
        m.insert("experiment", self.experiment.to_string());
        m.insert("tc", join(&self.coherent_times));
        m.insert("n", self.n.to_string());
        m.insert("snr_grid_db", join(&self.snr_grid_db));
        m.insert("rate", self.rate.to_string());
        m.insert("samples", self.samples.to_string());
        m.insert("seed", self.seed.to_string());
        m.insert("csi_mode", self.csi_mode.map_or("default".into(), |c| c.to_string()));
        m.insert("quadrature_nodes", self.quadrature_nodes.to_string());
        m.insert("scheme", self.scheme.to_string());
        m.insert("frames", self.frames.to_string());
        m.insert("construct_samples", self.construct_samples.to_string());
        m.insert(
            "profile_dir",
            self.profile_dir.as_ref().map_or(String::new(), |p| p.display().to_string()),
        );
        m.insert("construct", self.construct.to_string());
        m.insert("noiseless", self.noiseless.to_string());
        m.insert("label", self.label.clone());
        m.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn header(&self) -> String {
        format!("# blockfade {VERSION} config_hash={} seed={}\n", self.hash(), self.seed)
    }

    fn streams(&self) -> Streams {
        Streams::new(self.seed)
    }

    fn first_tc(&self) -> usize {
        self.coherent_times[0]
    }

    /// Channel for the configured scheme at `snr_db`.
    pub fn channel(&self, tc: usize, snr_db: f64) -> Result<FadingSpec> {
        let mode = self.csi_mode.unwrap_or(match self.scheme {
            Scheme::Mlc => CsiMode::Cdi,
            _ => CsiMode::CsiR,
        });
        if self.noiseless {
            FadingSpec::new(tc, GainLaw::Constant(1.0), NOISELESS_SIGMA, mode)
        } else {
            FadingSpec::rayleigh_snr_db(tc, snr_db, mode)
        }
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

/// Parses `a,b,c` or `start:step:stop` (inclusive, step > 0).
pub fn parse_grid(s: &str) -> Option<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop): (f64, f64, f64) = (start.parse().ok()?, step.parse().ok()?, stop.parse().ok()?);
            if !(step > 0.0) || !(stop >= start) {
                return None;
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            Some((0..count).map(|k| round_grid(start + k as f64 * step)).collect())
        }
        [_] => s.split(',').map(|v| v.trim().parse().ok()).collect(),
        _ => None,
    }
}

fn round_grid(v: f64) -> f64 {
    let r = (v * 1e9).round() / 1e9;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Splits configuration text into `(key, value)` pairs.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key=value, found '{line}'", i + 1))
        })?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(Error::Config(format!("line {}: unknown key '{k}'", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn rate_row(csv: &mut String, e: &MiEstimate, kind: &str, tc: usize, snr: f64, seed: u64) {
    let _ = writeln!(
        csv,
        "{kind},{tc},{snr},{},{},{},{seed}",
        e.value_bits, e.ci95_halfwidth, e.samples
    );
}

const RATE_COLUMNS: &str = "kind,T_c,snr_db,value_bits,ci95,samples,seed\n";

/// BI-AWGN, CSI-R and CDI curves over the SNR grid, one row per kind and
/// point. Every point of a curve reuses the same random streams.
pub fn run_rate_curves(cfg: &ExperimentConfig) -> Result<String> {
    let mut csv = cfg.header();
    csv.push_str(RATE_COLUMNS);
    let streams = cfg.streams();
    for &snr in &cfg.snr_grid_db {
        let base = FadingSpec::rayleigh_snr_db(1, snr, CsiMode::Cdi)?;
        rate_row(&mut csv, &mi_biawgn(base.noise_sigma())?, "biawgn", 1, snr, cfg.seed);
        let csir = mi_csir(&base.with_csi_mode(CsiMode::CsiR), cfg.samples, &streams.fork(0))?;
        rate_row(&mut csv, &csir, "csir", 1, snr, cfg.seed);
        for &tc in &cfg.coherent_times {
            let spec = base.with_coherent_time(tc)?;
            let quad = QuadratureRule::for_spec(&spec, cfg.quadrature_nodes)?;
            let r = cdi_rates(&spec, &quad, cfg.samples, &streams.fork(tc as u64))?;
            rate_row(&mut csv, &r.per_symbol, "cdi", tc, snr, cfg.seed);
        }
    }
    Ok(csv)
}

/// Per-level CDI rates, their average and the CSI-R reference.
pub fn run_subchannel_rates(cfg: &ExperimentConfig) -> Result<String> {
    let mut csv = cfg.header();
    csv.push_str(RATE_COLUMNS);
    let streams = cfg.streams();
    for &tc in &cfg.coherent_times {
        for &snr in &cfg.snr_grid_db {
            let spec = FadingSpec::rayleigh_snr_db(tc, snr, CsiMode::Cdi)?;
            let quad = QuadratureRule::for_spec(&spec, cfg.quadrature_nodes)?;
            let r = cdi_rates(&spec, &quad, cfg.samples, &streams.fork(tc as u64))?;
            for e in &r.subchannels {
                rate_row(&mut csv, e, &e.kind.to_string(), tc, snr, cfg.seed);
            }
            rate_row(&mut csv, &r.per_symbol, "cdi-per-symbol", tc, snr, cfg.seed);
            let csir = mi_csir(&spec.with_csi_mode(CsiMode::CsiR), cfg.samples, &streams.fork(0))?;
            rate_row(&mut csv, &csir, "csir", tc, snr, cfg.seed);
        }
    }
    Ok(csv)
}

/// Builds the configured scheme's codes at `snr_db`.
pub fn build_codes(cfg: &ExperimentConfig, snr_db: f64, grid_index: usize) -> Result<CodeSet> {
    let tc = cfg.first_tc();
    let spec = cfg.channel(tc, snr_db)?;
    let streams = cfg.streams().fork(0x1000 + grid_index as u64);
    let samples = cfg.construct_samples;
    Ok(match cfg.scheme {
        Scheme::Mlc => {
            let options = ConstructionOptions {
                genie_samples: samples,
                mi_samples: cfg.samples,
                quadrature_nodes: cfg.quadrature_nodes,
            };
            CodeSet::Mlc(construct_mlc(&spec, cfg.n, cfg.rate, &options, &streams)?)
        }
        Scheme::Parallel => CodeSet::Parallel(vec![construct_parallel(&spec, cfg.n, cfg.rate, samples, &streams)?; tc]),
        Scheme::Bicm => CodeSet::Bicm {
            profile: construct_bicm(&spec, tc * cfg.n, cfg.rate, samples, &streams)?,
            interleaver: interleaver(cfg),
            coherent_time: tc,
        },
    })
}

fn interleaver(cfg: &ExperimentConfig) -> InterleaverSpec {
    InterleaverSpec::new(cfg.first_tc() * cfg.n, cfg.seed)
}

/// Profile file names for the configured scheme: one per level for MLC,
/// otherwise a single file.
pub fn profile_paths(cfg: &ExperimentConfig, dir: &Path) -> Vec<PathBuf> {
    match cfg.scheme {
        Scheme::Mlc => (1..=cfg.first_tc())
            .map(|j| dir.join(format!("{}.level{j}.profile", cfg.label)))
            .collect(),
        _ => vec![dir.join(format!("{}.profile", cfg.label))],
    }
}

fn save_codes(cfg: &ExperimentConfig, codes: &CodeSet, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = profile_paths(cfg, dir);
    let profiles = codes.profiles();
    for (p, path) in profiles.iter().zip(&paths) {
        p.write(path)?;
    }
    Ok(paths)
}

/// Loads codes saved by [`run_construct`].
pub fn load_codes(cfg: &ExperimentConfig, dir: &Path) -> Result<CodeSet> {
    let profiles = profile_paths(cfg, dir)
        .iter()
        .map(|p| CodeProfile::read(p))
        .collect::<Result<Vec<_>>>()?;
    let tc = cfg.first_tc();
    let codes = match cfg.scheme {
        Scheme::Mlc => CodeSet::Mlc(profiles),
        Scheme::Parallel => CodeSet::Parallel(vec![profiles[0].clone(); tc]),
        Scheme::Bicm => {
            let profile = profiles.into_iter().next().expect("one path");
            if profile.block_length() != tc * cfg.n {
                return Err(Error::Config(format!(
                    "stored code has length {}, configuration needs {}",
                    profile.block_length(),
                    tc * cfg.n
                )));
            }
            CodeSet::Bicm {
                profile,
                interleaver: interleaver(cfg),
                coherent_time: tc,
            }
        }
    };
    if codes.block_count() != cfg.n {
        return Err(Error::Config(format!(
            "stored codes have {} blocks per frame, configuration needs {}",
            codes.block_count(),
            cfg.n
        )));
    }
    Ok(codes)
}

/// Constructs and saves the codes; returns a summary CSV.
pub fn run_construct(cfg: &ExperimentConfig) -> Result<String> {
    let dir = cfg.profile_dir.as_deref().ok_or_else(|| Error::Config("profile_dir is not set".into()))?;
    let snr = cfg.snr_grid_db[0];
    let codes = build_codes(cfg, snr, 0)?;
    let paths = save_codes(cfg, &codes, dir)?;
    let mut csv = cfg.header();
    csv.push_str("scheme,T_c,N,rate,snr_db,level,info_bits,union_bound,path\n");
    for (level, (p, path)) in codes.profiles().iter().zip(&paths).enumerate() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{snr},{},{},{},{}",
            cfg.scheme,
            cfg.first_tc(),
            cfg.n,
            codes.rate(),
            level + 1,
            p.info_set().len(),
            p.union_bound(),
            path.display()
        );
    }
    Ok(csv)
}

/// One simulated operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct FerPoint {
    pub snr_db: f64,
    pub rate: f64,
    pub union_bound: f64,
    pub stats: FerStats,
}

impl FerPoint {
    pub fn within_bound(&self) -> bool {
        self.stats.fer() <= self.union_bound + BOUND_SLACK_SE * self.stats.std_error()
    }
}

pub fn fer_points(cfg: &ExperimentConfig) -> Result<Vec<FerPoint>> {
    let tc = cfg.first_tc();
    let stored = if cfg.construct {
        None
    } else {
        let dir = cfg.profile_dir.as_deref().ok_or_else(|| Error::Config("profile_dir is not set".into()))?;
        Some(load_codes(cfg, dir)?)
    };
    cfg.snr_grid_db
        .iter()
        .enumerate()
        .map(|(i, &snr)| {
            let codes = match &stored {
                Some(c) => c.clone(),
                None => build_codes(cfg, snr, i)?,
            };
            let spec = cfg.channel(tc, snr)?;
            let quad = QuadratureRule::for_spec(&spec, cfg.quadrature_nodes)?;
            let stats = simulate_fer(&codes, &spec, &quad, cfg.frames, &cfg.streams().fork(0x2000 + i as u64))?;
            Ok(FerPoint {
                snr_db: snr,
                rate: codes.rate(),
                union_bound: codes.union_bound(),
                stats,
            })
        })
        .collect()
}

const FER_COLUMNS: &str = "scheme,T_c,N,rate,snr_db,frames,frame_errors,bit_errors,union_bound,seed";

fn fer_row(cfg: &ExperimentConfig, p: &FerPoint) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        cfg.scheme,
        cfg.first_tc(),
        cfg.n,
        p.rate,
        p.snr_db,
        p.stats.frames,
        p.stats.frame_errors,
        p.stats.bit_errors,
        p.union_bound,
        cfg.seed
    )
}

pub fn run_fer_sweep(cfg: &ExperimentConfig) -> Result<String> {
    let mut csv = cfg.header();
    csv.push_str(FER_COLUMNS);
    csv.push('\n');
    for p in fer_points(cfg)? {
        csv.push_str(&fer_row(cfg, &p));
        csv.push('\n');
    }
    Ok(csv)
}

/// FER sweep with a per-row verdict on `FER <= union bound + 3 SE`.
/// Returns the CSV and the number of rows that violate it.
pub fn run_bound_check(cfg: &ExperimentConfig) -> Result<(String, usize)> {
    let mut csv = cfg.header();
    csv.push_str(FER_COLUMNS);
    csv.push_str(",fer_std_error,bound_holds\n");
    let mut violations = 0;
    for p in fer_points(cfg)? {
        let ok = p.within_bound();
        violations += usize::from(!ok);
        let _ = writeln!(csv, "{},{},{ok}", fer_row(cfg, &p), p.stats.std_error());
    }
    Ok((csv, violations))
}

/// Writes `csv` to the configured output path, or to stdout when none is set.
pub fn write_output(cfg: &ExperimentConfig, csv: &str) -> Result<()> {
    match &cfg.output_path {
        Some(path) => fs::write(path, csv).map_err(|e| Error::io(path, e)),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(csv.as_bytes())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}
