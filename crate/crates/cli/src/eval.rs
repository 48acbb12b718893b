//! Verification accuracy (TAR at fixed FAR) of the unencrypted, encrypted and
//! PCA-reduced encrypted pipelines.
//!
//! Encrypted-pipeline scores are the integers the encrypted circuit decrypts
//! to, computed for every pair by exact integer arithmetic. A sample of pairs
//! per cell is also run through real encryption, scoring and decryption, and
//! any disagreement aborts the evaluation.

use std::io::Write;

use hematch_core::codec::{integer_dot, quantize, score_range_fits, QuantizedTemplate};
use hematch_core::fv::{
    gen_evaluation_key, gen_galois_keys, gen_public_key, gen_secret_key, power_of_two_steps,
    FvContext, Preset, SecurityLevel, DEFAULT_PLAIN_MODULUS, TABLE_PRESETS,
};
use hematch_core::matcher::{
    cosine_dissimilarity, decrypt_raw_score, encrypt_template, evaluate_tar_far, pca_fit,
    pca_project, score, Dataset, MatchPath, MatchScore, VerificationReport, FAR_POINTS,
};
use hematch_core::{Error, Result};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pipeline {
    Plaintext,
    Encrypted,
    PcaEncrypted,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Self::Plaintext => "plaintext",
            Self::Encrypted => "encrypted",
            Self::PcaEncrypted => "pca-encrypted",
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub deltas: Vec<f64>,
    /// Reduce to this many components for the PCA pipeline.
    pub pca_k: Option<usize>,
    /// Pairs per encrypted cell run through real encryption.
    pub fhe_pairs: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            deltas: hematch_core::codec::STANDARD_STEPS.to_vec(),
            pca_k: Some(64),
            fhe_pairs: 32,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub pipeline: Pipeline,
    pub delta: Option<f64>,
    pub dim: usize,
    pub preset: Option<String>,
    pub far: f64,
    pub threshold: f64,
    pub tar: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub genuine_pairs: usize,
    pub impostor_pairs: usize,
    /// Pairs whose encrypted score was checked against the exact integer.
    pub fhe_verified: usize,
}

impl EvalReport {
    pub fn tar(&self, pipeline: Pipeline, delta: Option<f64>, far: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.pipeline == pipeline && r.delta == delta && (r.far - far).abs() < 1e-12)
            .map(|r| r.tar)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record([
            "pipeline",
            "delta",
            "dim",
            "preset",
            "far",
            "threshold",
            "tar",
        ])
        .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.pipeline.name().to_string(),
                r.delta.map(|d| d.to_string()).unwrap_or_default(),
                r.dim.to_string(),
                r.preset.clone().unwrap_or_default(),
                r.far.to_string(),
                format!("{:.9}", r.threshold),
                format!("{:.6}", r.tar),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Smallest 128-bit table preset whose ring holds `dim` slots, switched to
/// the two-prime plaintext modulus when scores at `delta` need it.
pub fn preset_for(dim: usize, delta: f64) -> Result<Preset> {
    let base = TABLE_PRESETS
        .iter()
        .filter(|p| p.security == SecurityLevel::Bits128 && p.n >= dim)
        .min_by_key(|p| p.n)
        .copied()
        .ok_or_else(|| Error::Capacity(format!("no preset holds dimension {dim}")))?;
    Ok(if score_range_fits(delta, DEFAULT_PLAIN_MODULUS) {
        base
    } else {
        base.two_prime()
    })
}

fn push_rows(
    report: &mut EvalReport,
    pipeline: Pipeline,
    delta: Option<f64>,
    dim: usize,
    preset: Option<String>,
    v: &VerificationReport,
) {
    for p in &v.points {
        report.rows.push(EvalRow {
            pipeline,
            delta,
            dim,
            preset: preset.clone(),
            far: p.far,
            threshold: p.threshold,
            tar: p.tar,
        });
    }
}

type Pairs = [(usize, usize)];

fn quantize_all(features: &[Vec<f64>], delta: f64) -> Result<Vec<QuantizedTemplate>> {
    features.iter().map(|f| quantize(f, delta)).collect()
}

fn integer_scores(q: &[QuantizedTemplate], pairs: &Pairs) -> Vec<i128> {
    pairs
        .iter()
        .map(|&(i, j)| integer_dot(q[i].values(), q[j].values()))
        .collect()
}

/// Encrypt, score and decrypt a sample of pairs; every result must equal
/// the exact integer used for that pair.
fn verify_encrypted(
    q: &[QuantizedTemplate],
    pairs: &Pairs,
    expected: &[i128],
    preset: &Preset,
    count: usize,
    rng: &mut ChaCha20Rng,
) -> Result<usize> {
    let count = count.min(pairs.len());
    if count == 0 {
        return Ok(0);
    }
    let ctx = FvContext::new(preset.params()?)?;
    let sk = gen_secret_key(&ctx, rng)?;
    let pk = gen_public_key(&sk, rng)?;
    let ek = gen_evaluation_key(&sk, rng)?;
    let gks = gen_galois_keys(&sk, &power_of_two_steps(ctx.n()), rng)?;
    for k in sample(rng, pairs.len(), count) {
        let (i, j) = pairs[k];
        let ex = encrypt_template(&q[i], &pk, MatchPath::Batched, rng)?;
        let ey = encrypt_template(&q[j], &pk, MatchPath::Batched, rng)?;
        let ct = score(&ex, &ey, &ek, Some(&gks))?;
        let raw = decrypt_raw_score(&ct, &sk, MatchPath::Batched)?;
        if raw != expected[k] {
            return Err(Error::Integrity(format!(
                "encrypted score {raw} differs from exact {} for pair ({i}, {j})",
                expected[k]
            )));
        }
    }
    Ok(count)
}

struct Split<'a> {
    genuine: &'a Pairs,
    impostor: &'a Pairs,
}

fn encrypted_cell(
    report: &mut EvalReport,
    pipeline: Pipeline,
    features: &[Vec<f64>],
    split: &Split<'_>,
    delta: f64,
    cfg: &EvalConfig,
    rng: &mut ChaCha20Rng,
) -> Result<()> {
    let dim = features[0].len();
    let preset = preset_for(dim, delta)?;
    let q = quantize_all(features, delta)?;
    let gen_raw = integer_scores(&q, split.genuine);
    let imp_raw = integer_scores(&q, split.impostor);
    let half = cfg.fhe_pairs / 2;
    report.fhe_verified += verify_encrypted(&q, split.genuine, &gen_raw, &preset, half, rng)?;
    report.fhe_verified += verify_encrypted(
        &q,
        split.impostor,
        &imp_raw,
        &preset,
        cfg.fhe_pairs - half,
        rng,
    )?;
    let to_scores = |raw: &[i128]| -> Vec<f64> {
        raw.iter()
            .map(|&s| MatchScore::from_raw(s, delta).dissimilarity)
            .collect()
    };
    let v = evaluate_tar_far(&to_scores(&gen_raw), &to_scores(&imp_raw), &FAR_POINTS)?;
    push_rows(report, pipeline, Some(delta), dim, Some(preset.name()), &v);
    Ok(())
}

/// All pipelines on `data`: the unencrypted baseline once, then the encrypted
/// and (with `pca_k`) PCA-reduced encrypted pipelines at each step.
pub fn run_eval(data: &Dataset, cfg: &EvalConfig) -> Result<EvalReport> {
    if data.identity_count() < 2 {
        return Err(Error::InvalidParameter(
            "evaluation needs at least two identities".into(),
        ));
    }
    let (genuine, impostor) = data.pairs();
    if genuine.is_empty() {
        return Err(Error::InvalidParameter(
            "evaluation needs an identity with two samples".into(),
        ));
    }
    let split = Split {
        genuine: &genuine,
        impostor: &impostor,
    };
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut report = EvalReport {
        genuine_pairs: genuine.len(),
        impostor_pairs: impostor.len(),
        ..EvalReport::default()
    };

    let features = data
        .features()
        .iter()
        .map(|f| hematch_core::matcher::normalize(f))
        .collect::<Result<Vec<_>>>()?;
    let cos = |pairs: &Pairs| -> Result<Vec<f64>> {
        pairs
            .iter()
            .map(|&(i, j)| cosine_dissimilarity(&features[i], &features[j]))
            .collect()
    };
    let v = evaluate_tar_far(&cos(&genuine)?, &cos(&impostor)?, &FAR_POINTS)?;
    push_rows(&mut report, Pipeline::Plaintext, None, data.dim(), None, &v);

    let reduced = match cfg.pca_k {
        Some(k) => {
            let model = pca_fit(&features, k)?;
            Some(
                features
                    .iter()
                    .map(|f| pca_project(f, &model))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
        None => None,
    };
    for &delta in &cfg.deltas {
        encrypted_cell(
            &mut report,
            Pipeline::Encrypted,
            &features,
            &split,
            delta,
            cfg,
            &mut rng,
        )?;
        if let Some(reduced) = &reduced {
            encrypted_cell(
                &mut report,
                Pipeline::PcaEncrypted,
                reduced,
                &split,
                delta,
                cfg,
                &mut rng,
            )?;
        }
    }
    Ok(report)
}
