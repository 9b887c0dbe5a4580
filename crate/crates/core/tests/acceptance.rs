//! Acceptance criteria. Runs as a plain binary so that every criterion
//! prints its verdict; pass criterion numbers as arguments to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use blockfade::channel::{bpsk, CsiMode, FadingSpec, GainLaw, DEFAULT_SIGMA_H};
use blockfade::construction::{construct_bicm, construct_mlc, genie_reliability, BecSampler, ConstructionOptions};
use blockfade::mi::{cdi_rates, mi_biawgn, mi_cdi_per_symbol, mi_cdi_subchannel, mi_csir, snr_at_rate, snr_for_rate, CdiRates, MiEstimate};
use blockfade::polar::{bec_exact_z, polar_transform, select_sets, CodeProfile, ReliabilityVector};
use blockfade::rng::Streams;
use blockfade::schemes::{simulate_fer, CodeSet, FerStats, InterleaverSpec};
use blockfade::subchannel::{block_likelihood, stage_llr, QuadratureRule, DEFAULT_NODES};

const RATE_SAMPLES: u64 = 200_000;
const FER_FRAMES: u64 = 10_000;
const CODE_RATE: f64 = 0.5;
const RATE_GAP: f64 = 0.1;
const BICM_TC: usize = 2;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn at_least(a: &MiEstimate, b: &MiEstimate) -> bool {
    a.value_bits >= b.value_bits - (a.ci95_halfwidth + b.ci95_halfwidth)
}

fn rayleigh(tc: usize, snr: f64, mode: CsiMode) -> FadingSpec {
    FadingSpec::rayleigh_snr_db(tc, snr, mode).unwrap()
}

fn grid(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9).collect()
}

struct CurvePoint {
    snr: f64,
    biawgn: MiEstimate,
    csir: MiEstimate,
    cdi: Vec<(usize, CdiRates)>,
}

/// Rate curves over -3..3 dB, shared by the ordering and monotonicity checks.
fn rate_curves() -> &'static Vec<CurvePoint> {
    static CURVES: OnceLock<Vec<CurvePoint>> = OnceLock::new();
    CURVES.get_or_init(|| {
        let streams = Streams::new(101);
        grid(-3.0, 0.3, 21)
            .into_iter()
            .map(|snr| {
                let base = rayleigh(1, snr, CsiMode::Cdi);
                let cdi = [1, 2, 5]
                    .iter()
                    .map(|&tc| {
                        let spec = base.with_coherent_time(tc).unwrap();
                        let quad = QuadratureRule::for_spec(&spec, DEFAULT_NODES).unwrap();
                        (tc, cdi_rates(&spec, &quad, RATE_SAMPLES, &streams.fork(tc as u64)).unwrap())
                    })
                    .collect();
                CurvePoint {
                    snr,
                    biawgn: mi_biawgn(base.noise_sigma()).unwrap(),
                    csir: mi_csir(&base.with_csi_mode(CsiMode::CsiR), RATE_SAMPLES, &streams.fork(0)).unwrap(),
                    cdi,
                }
            })
            .collect()
    })
}

fn criterion_1() -> Outcome {
    let mut violations = Vec::new();
    for p in rate_curves() {
        let cdi = |tc: usize| &p.cdi.iter().find(|(t, _)| *t == tc).unwrap().1.per_symbol;
        let chain = [&p.biawgn, &p.csir, cdi(5), cdi(2), cdi(1)];
        for (k, w) in chain.windows(2).enumerate() {
            if !at_least(w[0], w[1]) {
                violations.push(format!("{} dB link {k}", p.snr));
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!("21 SNR points, {} ordering violations {:?}", violations.len(), violations),
    )
}

fn criterion_2() -> Outcome {
    let snrs = grid(1.2, 0.1, 21);
    let streams = Streams::new(202);
    let csir: Vec<f64> = snrs
        .iter()
        .map(|&s| mi_csir(&rayleigh(1, s, CsiMode::CsiR), RATE_SAMPLES, &streams.fork(0)).unwrap().value_bits)
        .collect();
    let cdi = |tc: usize| -> Vec<f64> {
        snrs.iter()
            .map(|&s| {
                let spec = rayleigh(tc, s, CsiMode::Cdi);
                let quad = QuadratureRule::for_spec(&spec, DEFAULT_NODES).unwrap();
                mi_cdi_per_symbol(&spec, &quad, RATE_SAMPLES, &streams.fork(tc as u64)).unwrap().value_bits
            })
            .collect()
    };
    let (cdi1, cdi5) = (cdi(1), cdi(5));
    let at = |r: &[f64]| snr_at_rate(&snrs, r, 0.5);
    match (at(&cdi1), at(&cdi5), at(&csir)) {
        (Some(s1), Some(s5), Some(sr)) => {
            let gain = s1 - s5;
            let loss = s5 - sr;
            let ok = (gain - 0.25).abs() <= 0.15 && (loss - 0.5).abs() <= 0.15;
            outcome(
                ok,
                format!(
                    "rate 0.5 reached at cdi1 {s1:.3} dB, cdi5 {s5:.3} dB, csir {sr:.3} dB; gain {gain:.3} dB (0.25 +/- 0.15), loss {loss:.3} dB (0.5 +/- 0.15)"
                ),
            )
        }
        other => outcome(false, format!("rate 0.5 not bracketed by the grid: {other:?}")),
    }
}

fn criterion_3() -> Outcome {
    let streams = Streams::new(303);
    let mut worst_crn: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut ok = true;
    for tc in [2, 3, 5] {
        for snr in [-2.0, 0.0, 2.0] {
            let spec = rayleigh(tc, snr, CsiMode::Cdi);
            let quad = QuadratureRule::for_spec(&spec, DEFAULT_NODES).unwrap();
            let shared = cdi_rates(&spec, &quad, RATE_SAMPLES, &streams.fork(tc as u64)).unwrap();
            let sum: f64 = shared.subchannels.iter().map(|e| e.value_bits).sum();
            let crn = (sum - tc as f64 * shared.per_symbol.value_bits).abs();
            worst_crn = worst_crn.max(crn);
            ok &= crn <= 1e-9;

            let samples = 50_000;
            let per = mi_cdi_per_symbol(&spec, &quad, samples, &streams.fork(1000 + tc as u64)).unwrap();
            let subs: Vec<MiEstimate> = (1..=tc)
                .map(|j| mi_cdi_subchannel(j, &spec, &quad, samples, &streams.fork(2000 + 10 * tc as u64 + j as u64)).unwrap())
                .collect();
            let sum: f64 = subs.iter().map(|e| e.value_bits).sum();
            let ci = tc as f64 * per.ci95_halfwidth + subs.iter().map(|e| e.ci95_halfwidth).sum::<f64>();
            let diff = (sum - tc as f64 * per.value_bits).abs();
            worst_ratio = worst_ratio.max(diff / ci);
            ok &= diff <= ci;
        }
    }
    outcome(
        ok,
        format!("worst shared-sample mismatch {worst_crn:.2e} (limit 1e-9); worst independent mismatch {worst_ratio:.2} of combined CI"),
    )
}

fn criterion_4() -> Outcome {
    let mut violations = Vec::new();
    for p in rate_curves() {
        let subs = &p.cdi.iter().find(|(t, _)| *t == 5).unwrap().1.subchannels;
        for j in 1..subs.len() {
            if !at_least(&subs[j], &subs[j - 1]) {
                violations.push(format!("{} dB level {}", p.snr, j + 1));
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!("T_c = 5 over 21 SNR points, {} monotonicity violations {:?}", violations.len(), violations),
    )
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Pearson correlation of average ranks.
fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn criterion_5() -> Outcome {
    let trials = 50_000;
    let sampler = BecSampler { epsilon: 0.5 };
    let mut ok = true;
    let mut notes = Vec::new();
    for n in [8, 256] {
        let est = genie_reliability(&sampler, n, trials, &Streams::new(505 + n as u64)).unwrap();
        let exact = bec_exact_z(0.5, n).unwrap();
        let rho = spearman(est.values(), exact.values());
        ok &= rho > 0.99;
        notes.push(format!("N={n} spearman {rho:.4}"));
        if n == 8 {
            let mut outside = 0;
            for (&e, &z) in est.values().iter().zip(exact.values()) {
                let p = z / 2.0;
                let half = 2.576 * (p * (1.0 - p) / trials as f64).sqrt();
                if (e - p).abs() > half + 1e-12 {
                    outside += 1;
                }
            }
            ok &= outside == 0;
            notes.push(format!("N=8 {outside}/8 indices outside the 99% binomial interval"));
        }
    }
    outcome(ok, notes.join("; "))
}

struct FerRun {
    snr: f64,
    union_bound: f64,
    stats: FerStats,
}

impl FerRun {
    fn bound_holds(&self) -> bool {
        self.stats.fer() <= self.union_bound + 3.0 * self.stats.std_error()
    }

    fn describe(&self) -> String {
        format!(
            "{:.3} dB FER {:.4} ({} / {}) bound {:.4} + 3 SE {:.4}",
            self.snr,
            self.stats.fer(),
            self.stats.frame_errors,
            self.stats.frames,
            self.union_bound,
            3.0 * self.stats.std_error()
        )
    }
}

/// SNR at which the CSI-R rate equals the code rate plus the gap.
fn bicm_snr() -> f64 {
    static SNR: OnceLock<f64> = OnceLock::new();
    *SNR.get_or_init(|| {
        let streams = Streams::new(606);
        snr_for_rate(
            |s| mi_csir(&rayleigh(1, s, CsiMode::CsiR), RATE_SAMPLES, &streams).map(|e| e.value_bits),
            CODE_RATE + RATE_GAP,
            -5.0,
            15.0,
            1e-3,
        )
        .unwrap()
    })
}

fn bicm_run(total_length: usize) -> FerRun {
    let snr = bicm_snr();
    let spec = rayleigh(BICM_TC, snr, CsiMode::CsiR);
    let streams = Streams::new(607 + total_length as u64);
    let profile = construct_bicm(&spec, total_length, CODE_RATE, 50_000, &streams.fork(1)).unwrap();
    let codes = CodeSet::Bicm {
        profile,
        interleaver: InterleaverSpec::new(total_length, 608),
        coherent_time: BICM_TC,
    };
    let stats = simulate_fer(&codes, &spec, &QuadratureRule::point(1.0), FER_FRAMES, &streams.fork(2)).unwrap();
    FerRun {
        snr,
        union_bound: codes.union_bound(),
        stats,
    }
}

fn bicm_4096() -> &'static FerRun {
    static RUN: OnceLock<FerRun> = OnceLock::new();
    RUN.get_or_init(|| bicm_run(4096))
}

fn mlc_1024() -> FerRun {
    let tc = 2;
    let streams = Streams::new(616);
    let snr = snr_for_rate(
        |s| {
            let spec = rayleigh(tc, s, CsiMode::Cdi);
            let quad = QuadratureRule::for_spec(&spec, DEFAULT_NODES)?;
            mi_cdi_per_symbol(&spec, &quad, RATE_SAMPLES, &streams).map(|e| e.value_bits)
        },
        CODE_RATE + RATE_GAP,
        -5.0,
        15.0,
        1e-3,
    )
    .unwrap();
    let spec = rayleigh(tc, snr, CsiMode::Cdi);
    let quad = QuadratureRule::for_spec(&spec, DEFAULT_NODES).unwrap();
    let profiles = construct_mlc(&spec, 1024, CODE_RATE, &ConstructionOptions::default(), &streams.fork(1)).unwrap();
    let codes = CodeSet::Mlc(profiles);
    let stats = simulate_fer(&codes, &spec, &quad, FER_FRAMES, &streams.fork(2)).unwrap();
    FerRun {
        snr,
        union_bound: codes.union_bound(),
        stats,
    }
}

fn criterion_6() -> Outcome {
    let bicm = bicm_4096();
    let mlc = mlc_1024();
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, run) in [("BICM N=4096", bicm), ("MLC T_c=2 N=1024", &mlc)] {
        let bound = run.bound_holds();
        let low = run.stats.fer() < 1e-2;
        ok &= bound && low;
        notes.push(format!(
            "{name}: {} [bound {}, FER < 1e-2 {}]",
            run.describe(),
            if bound { "ok" } else { "violated" },
            if low { "ok" } else { "no" }
        ));
    }
    outcome(ok, notes.join("; "))
}

fn criterion_7() -> Outcome {
    let runs = [bicm_run(1024), bicm_run(2048)];
    let fers = [runs[0].stats.fer(), runs[1].stats.fer(), bicm_4096().stats.fer()];
    let ok = fers[0] > fers[1] && fers[1] > fers[2];
    outcome(
        ok,
        format!(
            "BICM at {:.3} dB, FER 1024: {:.4}, 2048: {:.4}, 4096: {:.4}",
            bicm_snr(),
            fers[0],
            fers[1],
            fers[2]
        ),
    )
}

fn bec_profile(n: usize, k: usize) -> CodeProfile {
    select_sets(&ReliabilityVector::bec_exact(0.5, n).unwrap(), &vec![true; n], k).unwrap()
}

fn cli(args: &[&str], threads: &str) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_blockfade"))
        .args(args)
        .env("BLOCKFADE_THREADS", threads)
        .output()
        .expect("run blockfade");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut failures = Vec::new();
    let mut checks = 0;
    let mut check = |cond: bool, what: &str| {
        checks += 1;
        if !cond {
            failures.push(what.to_string());
        }
    };

    for m in 1..=12 {
        for _ in 0..10 {
            let n = 1usize << m;
            let a: Vec<u8> = (0..n).map(|_| rng.random::<bool>() as u8).collect();
            let b: Vec<u8> = (0..n).map(|_| rng.random::<bool>() as u8).collect();
            let ta = polar_transform(&a).unwrap();
            let tb = polar_transform(&b).unwrap();
            let sum: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let tsum: Vec<u8> = ta.iter().zip(&tb).map(|(x, y)| x ^ y).collect();
            check(polar_transform(&ta).unwrap() == a, "transform involution");
            check(polar_transform(&sum).unwrap() == tsum, "transform linearity");
        }
    }

    for len in [1, 2, 7, 64, 1000, 4096] {
        let il = InterleaverSpec::new(len, rng.random());
        let v: Vec<u32> = (0..len).map(|_| rng.random()).collect();
        check(il.deinterleave(&il.interleave(&v).unwrap()).unwrap() == v, "interleaver round trip");
    }

    let noiseless = |tc, mode| FadingSpec::new(tc, GainLaw::Constant(1.0), 1e-3, mode).unwrap();
    for tc in [1, 2, 4] {
        let n = 64;
        let profiles: Vec<CodeProfile> = (0..tc).map(|j| bec_profile(n, 8 + 16 * j)).collect();
        let sets = [
            (CodeSet::Mlc(profiles.clone()), noiseless(tc, CsiMode::Cdi)),
            (CodeSet::Parallel(profiles), noiseless(tc, CsiMode::CsiR)),
            (
                CodeSet::Bicm {
                    profile: bec_profile(tc * n, tc * n / 2),
                    interleaver: InterleaverSpec::new(tc * n, 3),
                    coherent_time: tc,
                },
                noiseless(tc, CsiMode::Full),
            ),
        ];
        for (codes, spec) in &sets {
            let quad = QuadratureRule::for_spec(spec, DEFAULT_NODES).unwrap();
            let stats = simulate_fer(codes, spec, &quad, 20, &Streams::new(tc as u64)).unwrap();
            check(stats.frame_errors == 0 && stats.bit_errors == 0, "noiseless round trip");
        }
    }

    for _ in 0..200 {
        let tc = rng.random_range(1..=8);
        let spec = rayleigh(tc, rng.random_range(-5.0..10.0), CsiMode::Cdi);
        let quad = QuadratureRule::for_spec(&spec, DEFAULT_NODES).unwrap();
        let y: Vec<f64> = (0..tc).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let prefix: Vec<f64> = (0..rng.random_range(0..tc)).map(|_| bpsk(rng.random::<bool>() as u8)).collect();
        let neg_y: Vec<f64> = y.iter().map(|v| -v).collect();
        let neg_p: Vec<f64> = prefix.iter().map(|v| -v).collect();
        let a = stage_llr(&y, &prefix, &spec, &quad).unwrap();
        let b = stage_llr(&neg_y, &neg_p, &spec, &quad).unwrap();
        check(a == -b, "stage LLR sign symmetry");
    }

    let dir = tempfile::tempdir().unwrap();
    let profiles = dir.path().join("profiles");
    let profiles = profiles.to_str().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["rates", "--tc", "1,2", "--snr-grid-db", "-1:1:1", "--samples", "4000", "--seed", "5"],
        vec!["subrates", "--tc", "3", "--snr-grid-db", "0,2", "--samples", "4000", "--seed", "5"],
        vec![
            "construct", "--scheme", "mlc", "--tc", "2", "--n", "64", "--rate", "0.25", "--snr-grid-db", "3",
            "--construct-samples", "500", "--samples", "4000", "--profile-dir", profiles, "--label", "m",
        ],
        vec![
            "fer", "--scheme", "mlc", "--tc", "2", "--n", "64", "--snr-grid-db", "3", "--frames", "200",
            "--profile-dir", profiles, "--label", "m",
        ],
        vec![
            "bound-check", "--scheme", "bicm", "--tc", "2", "--n", "64", "--rate", "0.25", "--snr-grid-db", "2,4",
            "--construct", "true", "--construct-samples", "500", "--frames", "200",
        ],
    ];
    for args in &runs {
        let (code_a, out_a) = cli(args, "1");
        let (code_b, out_b) = cli(args, "2");
        check(code_a == 0 && code_b == 0, &format!("cli {} exit status", args[0]));
        check(!out_a.is_empty() && out_a == out_b, &format!("cli {} determinism", args[0]));
    }

    outcome(failures.is_empty(), format!("{checks} checks, failures: {failures:?}"))
}

/// Monte Carlo over the Rayleigh gain with the Gaussian likelihood in
/// closed form; returns the log of the estimate.
fn log_likelihood_mc(y: &[f64], x: &[f64], sigma: f64, draws: u64, rng: &mut ChaCha8Rng) -> f64 {
    let tc = y.len() as f64;
    let var = sigma * sigma;
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let yx: f64 = y.iter().zip(x).map(|(a, b)| a * b).sum();
    let log_gauss = |h: f64| -(yy - 2.0 * h * yx + h * h * tc) / (2.0 * var) - tc / 2.0 * (2.0 * std::f64::consts::PI * var).ln();
    let peak = log_gauss((yx / tc).max(0.0));
    let mut acc = 0.0;
    for _ in 0..draws {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        let h = DEFAULT_SIGMA_H * (a * a + b * b).sqrt();
        acc += (log_gauss(h) - peak).exp();
    }
    (acc / draws as f64).ln() + peak
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut worst: f64 = 0.0;
    for tc in [1, 2, 5, 8] {
        for snr in [-3.0, 0.0, 6.0] {
            let spec = rayleigh(tc, snr, CsiMode::Cdi);
            let quad = QuadratureRule::for_spec(&spec, DEFAULT_NODES).unwrap();
            let x: Vec<f64> = (0..tc).map(|_| bpsk(rng.random::<bool>() as u8)).collect();
            let h = spec.sample_gain(&mut rng);
            let y: Vec<f64> = x
                .iter()
                .map(|&s| h * s + spec.noise_sigma() * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let quadrature = block_likelihood(&y, &x, &spec, &quad).unwrap().ln();
            let mc = log_likelihood_mc(&y, &x, spec.noise_sigma(), 10_000_000, &mut rng);
            worst = worst.max(((quadrature - mc).exp() - 1.0).abs());
        }
    }
    outcome(worst <= 0.005, format!("worst relative deviation {worst:.2e} over 12 cases (limit 5e-3)"))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "rate curve ordering", criterion_1),
        (2, "rate-0.5 SNR gaps", criterion_2),
        (3, "chain rule", criterion_3),
        (4, "sub-channel monotonicity", criterion_4),
        (5, "erasure channel oracle", criterion_5),
        (6, "union bound and low FER", criterion_6),
        (7, "FER falls with length", criterion_7),
        (8, "structural invariants", criterion_8),
        (9, "quadrature accuracy", criterion_9),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| outcome(false, "panicked"));
        failed += usize::from(!result.pass);
        println!(
            "criterion {id} ({name}): {} | {} [{:.1}s]",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
