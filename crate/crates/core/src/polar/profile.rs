use std::fmt::Write as _;
use std::path::Path;

use super::log2_exact;
use crate::error::{Error, Result};

/// Role of one `u` index in a constructed code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitClass {
    Info,
    Frozen(u8),
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReliabilityMethod {
    MonteCarloGenie,
    BecExact,
}

/// Per-index reliability estimates in `u` (decoding) order.
///
/// Small values mean reliable. Exact BEC vectors hold Bhattacharyya
/// parameters; Monte Carlo vectors hold genie-aided error frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityVector {
    z: Vec<f64>,
    samples_per_index: u64,
    method: ReliabilityMethod,
}

impl ReliabilityVector {
    pub fn new(z: Vec<f64>, samples_per_index: u64, method: ReliabilityMethod) -> Result<Self> {
        if let Some(bad) = z.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("reliability entry {bad} outside [0, 1]")));
        }
        Ok(ReliabilityVector {
            z,
            samples_per_index,
            method,
        })
    }

    pub fn bec_exact(epsilon: f64, n: usize) -> Result<Self> {
        super::bec_exact_z(epsilon, n)
    }

    pub fn values(&self) -> &[f64] {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn samples_per_index(&self) -> u64 {
        self.samples_per_index
    }

    pub fn method(&self) -> ReliabilityMethod {
        self.method
    }
}

/// A constructed polar code.
///
/// Invariant: the information, frozen and deterministic sets are sorted and
/// partition `0..block_length`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeProfile {
    block_length: usize,
    info_set: Vec<usize>,
    frozen_set: Vec<usize>,
    det_set: Vec<usize>,
    frozen_values: Vec<u8>,
    reliability: Vec<f64>,
    design_snr_db: f64,
    design_label: String,
}

fn check_sorted(name: &str, set: &[usize], n: usize) -> Result<()> {
    if set.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!("{name} set is not strictly increasing")));
    }
    if set.last().is_some_and(|&i| i >= n) {
        return Err(Error::invalid(format!("{name} set has an index outside 0..{n}")));
    }
    Ok(())
}

fn check_label(label: &str) -> Result<()> {
    if label.is_empty() || label.chars().any(char::is_whitespace) {
        return Err(Error::invalid(format!("design label {label:?} must be non-empty without whitespace")));
    }
    Ok(())
}

impl CodeProfile {
    pub fn new(
        block_length: usize,
        info_set: Vec<usize>,
        frozen_set: Vec<usize>,
        det_set: Vec<usize>,
        frozen_values: Vec<u8>,
        reliability: Vec<f64>,
    ) -> Result<Self> {
        if log2_exact(block_length).is_none() {
            return Err(Error::invalid(format!("block length {block_length} is not a power of two")));
        }
        check_sorted("information", &info_set, block_length)?;
        check_sorted("frozen", &frozen_set, block_length)?;
        check_sorted("deterministic", &det_set, block_length)?;
        let mut seen = vec![false; block_length];
        for &i in info_set.iter().chain(&frozen_set).chain(&det_set) {
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!("index {i} belongs to more than one set")));
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("index {i} is not assigned to any set")));
        }
        if frozen_values.len() != frozen_set.len() || frozen_values.iter().any(|&b| b > 1) {
            return Err(Error::invalid("frozen values must be one bit per frozen index"));
        }
        if reliability.len() != block_length {
            return Err(Error::invalid("reliability vector length differs from block length"));
        }
        if let Some(bad) = reliability.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("reliability entry {bad} outside [0, 1]")));
        }
        Ok(CodeProfile {
            block_length,
            info_set,
            frozen_set,
            det_set,
            frozen_values,
            reliability,
            design_snr_db: 0.0,
            design_label: "unnamed".to_string(),
        })
    }

    pub fn with_design(mut self, label: &str, snr_db: f64) -> Result<Self> {
        check_label(label)?;
        if !snr_db.is_finite() {
            return Err(Error::invalid("design SNR must be finite"));
        }
        self.design_label = label.to_string();
        self.design_snr_db = snr_db;
        Ok(self)
    }

    pub fn block_length(&self) -> usize {
        self.block_length
    }

    pub fn info_set(&self) -> &[usize] {
        &self.info_set
    }

    pub fn frozen_set(&self) -> &[usize] {
        &self.frozen_set
    }

    pub fn det_set(&self) -> &[usize] {
        &self.det_set
    }

    pub fn frozen_values(&self) -> &[u8] {
        &self.frozen_values
    }

    pub fn reliability(&self) -> &[f64] {
        &self.reliability
    }

    pub fn design_snr_db(&self) -> f64 {
        self.design_snr_db
    }

    pub fn design_label(&self) -> &str {
        &self.design_label
    }

    pub fn rate(&self) -> f64 {
        self.info_set.len() as f64 / self.block_length as f64
    }

    /// Sum of the reliability estimates over the information set: an upper
    /// bound on the block error probability of SC decoding.
    pub fn union_bound(&self) -> f64 {
        self.info_set.iter().map(|&i| self.reliability[i]).sum()
    }

    pub fn classes(&self) -> Vec<BitClass> {
        let mut classes = vec![BitClass::Info; self.block_length];
        for (&i, &b) in self.frozen_set.iter().zip(&self.frozen_values) {
            classes[i] = BitClass::Frozen(b);
        }
        for &i in &self.det_set {
            classes[i] = BitClass::Deterministic;
        }
        classes
    }

    /// Serializes to the line-oriented `polarprofile v1` text format.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "polarprofile v1 N={} design={} snr_db={}\n",
            self.block_length, self.design_label, self.design_snr_db
        );
        for (i, class) in self.classes().iter().enumerate() {
            let (tag, bit) = match class {
                BitClass::Info => ('I', "-".to_string()),
                BitClass::Frozen(b) => ('F', b.to_string()),
                BitClass::Deterministic => ('D', "-".to_string()),
            };
            let _ = writeln!(s, "{i} {tag} {bit} {}", self.reliability[i]);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let fail = |line: usize, message: String| Error::Format { line, message };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| fail(1, "empty file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "polarprofile" || fields[1] != "v1" {
            return Err(fail(1, format!("unrecognized header {header:?}")));
        }
        let value = |field: &str, key: &str| -> Result<String> {
            field
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| fail(1, format!("expected {key}=..., found {field:?}")))
        };
        let n: usize = value(fields[2], "N")?.parse().map_err(|_| fail(1, "bad N".into()))?;
        let label = value(fields[3], "design")?;
        let snr_db: f64 = value(fields[4], "snr_db")?.parse().map_err(|_| fail(1, "bad snr_db".into()))?;

        let mut classes = Vec::with_capacity(n);
        let mut reliability = Vec::with_capacity(n);
        for (lineno, line) in lines {
            let lineno = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(fail(lineno, format!("expected 4 fields, found {}", parts.len())));
            }
            let index: usize = parts[0].parse().map_err(|_| fail(lineno, "bad index".into()))?;
            if index != classes.len() {
                return Err(fail(lineno, format!("expected index {}, found {index}", classes.len())));
            }
            let class = match (parts[1], parts[2]) {
                ("I", "-") => BitClass::Info,
                ("D", "-") => BitClass::Deterministic,
                ("F", "0") => BitClass::Frozen(0),
                ("F", "1") => BitClass::Frozen(1),
                (c, b) => return Err(fail(lineno, format!("bad class/bit pair {c} {b}"))),
            };
            let z: f64 = parts[3].parse().map_err(|_| fail(lineno, "bad reliability value".into()))?;
            classes.push(class);
            reliability.push(z);
        }
        if classes.len() != n {
            return Err(fail(n + 1, format!("expected {n} index lines, found {}", classes.len())));
        }
        let mut info = Vec::new();
        let mut frozen = Vec::new();
        let mut values = Vec::new();
        let mut det = Vec::new();
        for (i, c) in classes.into_iter().enumerate() {
            match c {
                BitClass::Info => info.push(i),
                BitClass::Frozen(b) => {
                    frozen.push(i);
                    values.push(b);
                }
                BitClass::Deterministic => det.push(i),
            }
        }
        CodeProfile::new(n, info, frozen, det, values, reliability)?.with_design(&label, snr_db)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Rank-based finite-length set selection.
///
/// Among the high-entropy indices, the `target_info_count` with the smallest
/// reliability estimates carry information and the rest are frozen to 0;
/// indices outside the mask are deterministic. Equal estimates prefer the
/// larger index.
pub fn select_sets(
    reliability: &ReliabilityVector,
    high_entropy_mask: &[bool],
    target_info_count: usize,
) -> Result<CodeProfile> {
    let n = reliability.len();
    if high_entropy_mask.len() != n {
        return Err(Error::invalid("high-entropy mask length differs from reliability length"));
    }
    let mut candidates: Vec<usize> = (0..n).filter(|&i| high_entropy_mask[i]).collect();
    if target_info_count > candidates.len() {
        return Err(Error::invalid(format!(
            "{target_info_count} information bits requested, only {} high-entropy indices",
            candidates.len()
        )));
    }
    let z = reliability.values();
    candidates.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(b.cmp(&a)));
    let mut info = candidates[..target_info_count].to_vec();
    let mut frozen = candidates[target_info_count..].to_vec();
    info.sort_unstable();
    frozen.sort_unstable();
    let det: Vec<usize> = (0..n).filter(|&i| !high_entropy_mask[i]).collect();
    let values = vec![0; frozen.len()];
    CodeProfile::new(n, info, frozen, det, values, z.to_vec())
}
