//! Timing sweep over parameter presets for the batched, element-wise and
//! unencrypted matching paths.

use std::io::Write;
use std::time::{Duration, Instant};

use hematch_core::codec::{quantize, QuantizedTemplate};
use hematch_core::fv::{
    gen_evaluation_key, gen_galois_keys, gen_public_key, gen_secret_key, power_of_two_steps,
    FvContext, Preset, TABLE_PRESETS,
};
use hematch_core::matcher::{
    check_template_params, decrypt_raw_score, encrypt_template, plaintext_score, score, MatchPath,
};
use hematch_core::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::random_unit_vector;

pub const MIN_REPETITIONS: usize = 10;
pub const WARMUP: usize = 3;
/// Unencrypted scores are too fast to time one at a time; each repetition
/// times this many and reports the per-pair figure.
pub const PLAINTEXT_BATCH: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchPath {
    Batched,
    Elementwise,
    Plaintext,
}

impl BenchPath {
    pub const ALL: [BenchPath; 3] = [Self::Batched, Self::Elementwise, Self::Plaintext];

    pub fn name(self) -> &'static str {
        match self {
            Self::Batched => "batched",
            Self::Elementwise => "elementwise",
            Self::Plaintext => "plaintext",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub presets: Vec<Preset>,
    pub repetitions: usize,
    pub paths: Vec<BenchPath>,
    pub delta: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            presets: TABLE_PRESETS.to_vec(),
            repetitions: MIN_REPETITIONS,
            paths: BenchPath::ALL.to_vec(),
            delta: 0.01,
            seed: 42,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timings {
    pub encrypt_ms: f64,
    pub score_ms: f64,
    pub decrypt_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub preset: String,
    pub security: u16,
    pub dim: usize,
    pub n: usize,
    pub log_q: u32,
    pub plain_moduli: String,
    pub path: BenchPath,
    pub repetitions: usize,
    /// `None` when the row was skipped.
    pub timings: Option<Timings>,
    pub template_bytes: usize,
    pub key_bytes: usize,
    pub skip_reason: Option<String>,
}

impl BenchRow {
    fn new(preset: &Preset, path: BenchPath, repetitions: usize) -> Self {
        Self {
            preset: preset.name(),
            security: preset.security.bits(),
            dim: preset.dim,
            n: preset.n,
            log_q: preset.log_q,
            plain_moduli: preset
                .plain_moduli()
                .iter()
                .map(u128::to_string)
                .collect::<Vec<_>>()
                .join("*"),
            path,
            repetitions,
            timings: None,
            template_bytes: 0,
            key_bytes: 0,
            skip_reason: None,
        }
    }

    pub fn is_skipped(&self) -> bool {
        self.skip_reason.is_some()
    }
}

pub const CSV_HEADER: [&str; 15] = [
    "preset",
    "security",
    "dim",
    "n",
    "log_q",
    "plain_moduli",
    "path",
    "repetitions",
    "encrypt_ms",
    "score_ms",
    "decrypt_ms",
    "total_ms",
    "template_bytes",
    "key_bytes",
    "skip_reason",
];

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        let t = |f: fn(&Timings) -> f64| {
            r.timings
                .as_ref()
                .map(|t| format!("{:.6}", f(t)))
                .unwrap_or_default()
        };
        w.write_record([
            r.preset.clone(),
            r.security.to_string(),
            r.dim.to_string(),
            r.n.to_string(),
            r.log_q.to_string(),
            r.plain_moduli.clone(),
            r.path.name().to_string(),
            r.repetitions.to_string(),
            t(|t| t.encrypt_ms),
            t(|t| t.score_ms),
            t(|t| t.decrypt_ms),
            t(|t| t.total_ms),
            r.template_bytes.to_string(),
            r.key_bytes.to_string(),
            r.skip_reason.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Run warm-ups, then `reps` timed repetitions of `f`, which returns the
/// (encrypt, score, decrypt) split of one repetition; total is the wall time
/// of the whole repetition.
fn measure(reps: usize, mut f: impl FnMut() -> Result<[Duration; 3]>) -> Result<Timings> {
    for _ in 0..WARMUP {
        f()?;
    }
    let mut samples = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for _ in 0..reps {
        let start = Instant::now();
        let parts = f()?;
        let total = start.elapsed();
        for (s, d) in samples.iter_mut().zip(parts.iter().chain([&total])) {
            s.push(ms(*d));
        }
    }
    let [e, s, d, t] = samples.map(median);
    Ok(Timings {
        encrypt_ms: e,
        score_ms: s,
        decrypt_ms: d,
        total_ms: t,
    })
}

fn quantized_pair(
    dim: usize,
    delta: f64,
    rng: &mut ChaCha20Rng,
) -> Result<(QuantizedTemplate, QuantizedTemplate)> {
    Ok((
        quantize(&random_unit_vector(dim, rng), delta)?,
        quantize(&random_unit_vector(dim, rng), delta)?,
    ))
}

fn bench_encrypted(
    preset: &Preset,
    path: MatchPath,
    cfg: &BenchConfig,
    row: &mut BenchRow,
) -> Result<()> {
    let ctx = FvContext::new(preset.params()?)?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    check_template_params(&ctx, path, cfg.delta, preset.dim)?;
    let sk = gen_secret_key(&ctx, &mut rng)?;
    let pk = gen_public_key(&sk, &mut rng)?;
    let ek = gen_evaluation_key(&sk, &mut rng)?;
    let gks = match path {
        MatchPath::Batched => Some(gen_galois_keys(
            &sk,
            &power_of_two_steps(ctx.n()),
            &mut rng,
        )?),
        MatchPath::Elementwise => None,
    };
    let (qx, qy) = quantized_pair(preset.dim, cfg.delta, &mut rng)?;
    let expected = qx.dot(&qy)?;
    let enrolled = encrypt_template(&qx, &pk, path, &mut rng)?;
    row.template_bytes = enrolled.to_bytes().len();
    row.key_bytes =
        pk.to_bytes().len() + ek.to_bytes().len() + gks.as_ref().map_or(0, |g| g.to_bytes().len());

    let timings = measure(cfg.repetitions, || {
        let t0 = Instant::now();
        let probe = encrypt_template(&qy, &pk, path, &mut rng)?;
        let t1 = Instant::now();
        let ct = score(&enrolled, &probe, &ek, gks.as_ref())?;
        let t2 = Instant::now();
        let raw = decrypt_raw_score(&ct, &sk, path)?;
        let t3 = Instant::now();
        if raw != expected {
            return Err(Error::Integrity(format!(
                "{} score decrypted to {raw}, expected {expected}",
                path.name()
            )));
        }
        Ok([t1 - t0, t2 - t1, t3 - t2])
    })?;
    row.timings = Some(timings);
    Ok(())
}

fn bench_plaintext(preset: &Preset, cfg: &BenchConfig, row: &mut BenchRow) -> Result<()> {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let pairs = (0..PLAINTEXT_BATCH)
        .map(|_| quantized_pair(preset.dim, cfg.delta, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    row.template_bytes = preset.dim * std::mem::size_of::<f64>();
    let timings = measure(cfg.repetitions, || {
        let t0 = Instant::now();
        let mut acc = 0.0;
        for (x, y) in &pairs {
            acc += plaintext_score(x, y)?.dissimilarity;
        }
        std::hint::black_box(acc);
        Ok([
            Duration::ZERO,
            t0.elapsed() / PLAINTEXT_BATCH as u32,
            Duration::ZERO,
        ])
    })?;
    // The wall time covers the whole batch; report the per-pair figure.
    row.timings = Some(Timings {
        total_ms: timings.score_ms,
        ..timings
    });
    Ok(())
}

/// Benchmark one preset on one path. Infeasible combinations come back as
/// skipped rows carrying the reason.
pub fn bench_row(preset: &Preset, path: BenchPath, cfg: &BenchConfig) -> Result<BenchRow> {
    if cfg.repetitions < MIN_REPETITIONS {
        return Err(Error::InvalidParameter(format!(
            "at least {MIN_REPETITIONS} repetitions required"
        )));
    }
    let mut row = BenchRow::new(preset, path, cfg.repetitions);
    let outcome = match path {
        BenchPath::Batched => bench_encrypted(preset, MatchPath::Batched, cfg, &mut row),
        BenchPath::Elementwise => bench_encrypted(preset, MatchPath::Elementwise, cfg, &mut row),
        BenchPath::Plaintext => bench_plaintext(preset, cfg, &mut row),
    };
    match outcome {
        Ok(()) => Ok(row),
        Err(
            e @ (Error::Overflow(_)
            | Error::Capacity(_)
            | Error::Unsupported(_)
            | Error::InvalidParameter(_)),
        ) => {
            row.timings = None;
            row.skip_reason = Some(e.to_string());
            Ok(row)
        }
        Err(e) => Err(e),
    }
}

/// The full sweep, single-threaded on the calling thread. `progress` sees
/// each row as it completes.
pub fn run_bench(cfg: &BenchConfig, mut progress: impl FnMut(&BenchRow)) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for preset in &cfg.presets {
        for &path in &cfg.paths {
            let row = bench_row(preset, path, cfg)?;
            progress(&row);
            rows.push(row);
        }
    }
    Ok(rows)
}
