//! End-to-end acceptance suite. Runs every criterion, prints one PASS/FAIL
//! line per criterion and exits non-zero if any failed.
//!
//! `HEMATCH_FUZZ_SECS` sets the malformed-frame fuzz duration (default 10).

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::net::{Shutdown, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use hematch::bench::{bench_row, BenchConfig, BenchPath};
use hematch::eval::{preset_for, run_eval, EvalConfig, Pipeline};
use hematch::random_unit_vector;
use hematch_core::codec::{
    decode_slots, encode_slots, integer_dot, quantization_error_bound, quantize, QuantizedTemplate,
    STANDARD_STEPS,
};
use hematch_core::fv::{
    decrypt, encrypt, export_secret_key, galois_exponent, gen_evaluation_key, gen_galois_keys,
    gen_key_switch_key, gen_public_key, gen_secret_key, hom_add, hom_multiply, key_switch,
    noise_budget, power_of_two_steps, rotate_slots, row_swap, row_swap_exponent, sum_slots,
    Ciphertext, FvContext, ObjectTag, Plaintext, Preset, TABLE_PRESETS,
};
use hematch_core::matcher::{
    decrypt_raw_score, decrypt_score, encrypt_template, normalize, score, MatchPath, SyntheticSpec,
    FAR_POINTS,
};
use hematch_core::protocol::{
    Client, ClientKeys, ClientSession, ErrorCode, Frame, Message, Server, ServerConfig,
    TemplateStore,
};
use hematch_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T>(r: hematch_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn context(p: &Preset) -> Result<Arc<FvContext>, String> {
    ok(p.params().and_then(FvContext::new))
}

fn t_of(ctx: &FvContext) -> u128 {
    ctx.params().t().value()
}

/// Schoolbook product in `Z_t[x]/(x^n + 1)`.
fn negacyclic(a: &[u128], b: &[u128], t: u128) -> Vec<u128> {
    let n = a.len();
    let mut acc = vec![0u128; n];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            let p = x * y % t;
            let k = i + j;
            if k < n {
                acc[k] = (acc[k] + p) % t;
            } else {
                acc[k - n] = (acc[k - n] + t - p) % t;
            }
        }
    }
    acc
}

fn random_poly(n: usize, t: u128, r: &mut ChaCha20Rng) -> Vec<u128> {
    (0..n).map(|_| r.random_range(0..t)).collect()
}

fn random_quantized(
    dim: usize,
    delta: f64,
    r: &mut ChaCha20Rng,
) -> Result<QuantizedTemplate, String> {
    ok(quantize(&random_unit_vector(dim, r), delta))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut checks = 0usize;
    for (k, preset) in TABLE_PRESETS.iter().enumerate() {
        let ctx = context(preset)?;
        let t = t_of(&ctx);
        let n = ctx.n();
        let mut r = rng(100 + k as u64);
        let sk = ok(gen_secret_key(&ctx, &mut r))?;
        let pk = ok(gen_public_key(&sk, &mut r))?;
        let ek = ok(gen_evaluation_key(&sk, &mut r))?;
        let plain = |c: Vec<u128>| ok(Plaintext::new(&ctx, c));
        for i in 0..1000 {
            let m = random_poly(n, t, &mut r);
            let ct = ok(encrypt(&plain(m.clone())?, &pk, &mut r))?;
            let got = ok(decrypt(&ct, &sk))?;
            ensure(got.coeffs() == m.as_slice(), || {
                format!("{}: round trip {i} differs", preset.name())
            })?;
        }
        for i in 0..500 {
            let a = random_poly(n, t, &mut r);
            let b = random_poly(n, t, &mut r);
            let ca = ok(encrypt(&plain(a.clone())?, &pk, &mut r))?;
            let cb = ok(encrypt(&plain(b.clone())?, &pk, &mut r))?;
            let sum = ok(decrypt(&ok(hom_add(&ca, &cb))?, &sk))?;
            let want: Vec<u128> = a.iter().zip(&b).map(|(x, y)| (x + y) % t).collect();
            ensure(sum.coeffs() == want.as_slice(), || {
                format!("{}: addition {i} differs", preset.name())
            })?;
        }
        for i in 0..500 {
            let a = random_poly(n, t, &mut r);
            let b = random_poly(n, t, &mut r);
            let ca = ok(encrypt(&plain(a.clone())?, &pk, &mut r))?;
            let cb = ok(encrypt(&plain(b.clone())?, &pk, &mut r))?;
            let prod = ok(decrypt(&ok(hom_multiply(&ca, &cb, &ek))?, &sk))?;
            ensure(prod.coeffs() == negacyclic(&a, &b, t).as_slice(), || {
                format!("{}: multiplication {i} differs", preset.name())
            })?;
        }
        checks += 2000;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 600.0, || format!("took {secs:.0} s"))?;
    Ok(format!(
        "{checks} checks over 10 presets, 0 failures, {secs:.1} s"
    ))
}

fn criterion_2() -> Outcome {
    let delta = 0.01;
    let mut r = rng(2);
    let scalar_ctx = context(&Preset::by_name("l128-n128").unwrap())?;
    let ssk = ok(gen_secret_key(&scalar_ctx, &mut r))?;
    let spk = ok(gen_public_key(&ssk, &mut r))?;
    let sek = ok(gen_evaluation_key(&ssk, &mut r))?;
    let mut pairs = 0;
    for dim in [64usize, 128, 512, 1024] {
        let preset = preset_for(dim, delta).map_err(|e| e.to_string())?;
        let ctx = context(&preset)?;
        let sk = ok(gen_secret_key(&ctx, &mut r))?;
        let pk = ok(gen_public_key(&sk, &mut r))?;
        let ek = ok(gen_evaluation_key(&sk, &mut r))?;
        let gks = ok(gen_galois_keys(&sk, &power_of_two_steps(ctx.n()), &mut r))?;
        for i in 0..100 {
            let qx = random_quantized(dim, delta, &mut r)?;
            let qy = random_quantized(dim, delta, &mut r)?;
            // Brute-force oracle.
            let want: i128 = qx
                .values()
                .iter()
                .zip(qy.values())
                .map(|(&a, &b)| a as i128 * b as i128)
                .sum();
            let ex = ok(encrypt_template(&qx, &pk, MatchPath::Batched, &mut r))?;
            let ey = ok(encrypt_template(&qy, &pk, MatchPath::Batched, &mut r))?;
            let batched = ok(decrypt_raw_score(
                &ok(score(&ex, &ey, &ek, Some(&gks)))?,
                &sk,
                MatchPath::Batched,
            ))?;
            ensure(batched == want, || {
                format!("d={dim} pair {i}: batched {batched} vs {want}")
            })?;
            let ex = ok(encrypt_template(&qx, &spk, MatchPath::Elementwise, &mut r))?;
            let ey = ok(encrypt_template(&qy, &spk, MatchPath::Elementwise, &mut r))?;
            let elementwise = ok(decrypt_raw_score(
                &ok(score(&ex, &ey, &sek, None))?,
                &ssk,
                MatchPath::Elementwise,
            ))?;
            ensure(elementwise == batched, || {
                format!("d={dim} pair {i}: element-wise {elementwise} vs batched {batched}")
            })?;
            pairs += 1;
        }
    }
    Ok(format!(
        "{pairs} pairs exact on both layouts at d in {{64, 128, 512, 1024}}"
    ))
}

fn criterion_3() -> Outcome {
    let mut trials = 0;
    for (k, preset) in TABLE_PRESETS.iter().enumerate() {
        let ctx = context(preset)?;
        let (n, t) = (ctx.n(), t_of(&ctx));
        let half = n / 2;
        let mut r = rng(300 + k as u64);
        let sk = ok(gen_secret_key(&ctx, &mut r))?;
        let pk = ok(gen_public_key(&sk, &mut r))?;
        let steps = power_of_two_steps(n);
        let gks = ok(gen_galois_keys(&sk, &steps, &mut r))?;
        let mut expected: BTreeSet<usize> = steps.iter().map(|&s| galois_exponent(s, n)).collect();
        expected.insert(row_swap_exponent(n));
        let have: BTreeSet<usize> = gks.exponents().collect();
        ensure(have == expected, || {
            format!("{}: key set {have:?}", preset.name())
        })?;
        for _ in 0..20 {
            let slots: Vec<u128> = random_poly(n, t, &mut r);
            let signed: Vec<i128> = slots
                .iter()
                .map(|&v| {
                    if v > t / 2 {
                        v as i128 - t as i128
                    } else {
                        v as i128
                    }
                })
                .collect();
            let ct = ok(encrypt(&ok(encode_slots(&signed, &ctx))?, &pk, &mut r))?;
            let read = |c: hematch_core::Result<Ciphertext>| -> Result<Vec<u128>, String> {
                let vals = ok(decode_slots(&ok(decrypt(&ok(c)?, &sk))?, &ctx))?;
                Ok(vals
                    .iter()
                    .map(|&v| v.rem_euclid(t as i128) as u128)
                    .collect())
            };
            for &step in &steps {
                let s = step as usize;
                let want: Vec<u128> = (0..n)
                    .map(|j| {
                        let row = j / half;
                        slots[row * half + (j % half + s) % half]
                    })
                    .collect();
                ensure(read(rotate_slots(&ct, step, &gks))? == want, || {
                    format!("{}: rotation by {step}", preset.name())
                })?;
            }
            let want: Vec<u128> = (0..n).map(|j| slots[(j + half) % n]).collect();
            ensure(read(row_swap(&ct, &gks))? == want, || {
                format!("{}: row swap", preset.name())
            })?;
            let total = slots.iter().fold(0u128, |a, &v| (a + v) % t);
            ensure(
                read(sum_slots(&ct, &gks))?.iter().all(|&v| v == total),
                || format!("{}: slot sum", preset.name()),
            )?;
            trials += 1;
        }
    }
    Ok(format!(
        "{trials} trials, every rotation key, row swap and slot sum exact"
    ))
}

fn samples(identities: usize, per: usize, dim: usize, seed: u64) -> Vec<Vec<Vec<f64>>> {
    let data = SyntheticSpec {
        identities,
        samples_per_identity: per,
        dim,
        sigma_within: 0.35,
        seed,
        intrinsic_dim: None,
    }
    .generate()
    .unwrap();
    data.features().chunks(per).map(|c| c.to_vec()).collect()
}

fn raw_scores(v: &hematch_core::protocol::Verification) -> Vec<i128> {
    v.scores.iter().map(|s| s.raw).collect()
}

fn criterion_4() -> Outcome {
    let mut switched = 0;
    for (k, preset) in TABLE_PRESETS.iter().enumerate() {
        let ctx = context(preset)?;
        let (n, t) = (ctx.n(), t_of(&ctx));
        let mut r = rng(400 + k as u64);
        let sk_a = ok(gen_secret_key(&ctx, &mut r))?;
        let sk_b = ok(gen_secret_key(&ctx, &mut r))?;
        let pk_a = ok(gen_public_key(&sk_a, &mut r))?;
        let ksk = ok(gen_key_switch_key(&sk_a, &sk_b, &mut r))?;
        for i in 0..20 {
            let m = random_poly(n, t, &mut r);
            let ct = ok(encrypt(
                &ok(Plaintext::new(&ctx, m.clone()))?,
                &pk_a,
                &mut r,
            ))?;
            let moved = ok(key_switch(&ct, &ksk))?;
            ensure(moved.key_id() == sk_b.id(), || "wrong key id".into())?;
            let got = ok(decrypt(&moved, &sk_b))?;
            ensure(got.coeffs() == m.as_slice(), || {
                format!("{}: switch {i} differs", preset.name())
            })?;
            ensure(decrypt(&moved, &sk_a).is_err(), || {
                "switched ciphertext still opens under the source key".into()
            })?;
            switched += 1;
        }
    }

    // Enroll under key B; probe under B and under A with switch keys.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let server = Server::new(
        ok(TemplateStore::open(dir.path().join("store.log")))?,
        ServerConfig::default(),
    );
    let handle = ok(server.spawn("127.0.0.1:0"))?;
    let ctx = context(&Preset::by_name("l128-n128").unwrap())?;
    let mut r = rng(41);
    let keys_b = ok(ClientKeys::generate(&ctx, &mut r))?;
    let keys_a = ok(ClientKeys::generate(&ctx, &mut r))?;
    let a_to_b = ok(gen_key_switch_key(
        keys_a.secret_key(),
        keys_b.secret_key(),
        &mut r,
    ))?;
    let b_to_a = ok(gen_key_switch_key(
        keys_b.secret_key(),
        keys_a.secret_key(),
        &mut r,
    ))?;
    let ids = samples(4, 3, 64, 42);
    let mut s =
        ClientSession::new(TcpStream::connect(handle.local_addr()).map_err(|e| e.to_string())?);
    let owner = Client::new(keys_b, 0.01);
    let other = Client::new(keys_a, 0.01).with_switch_keys(vec![a_to_b, b_to_a]);
    let mut compared = 0;
    for (i, id) in ids.iter().enumerate() {
        let who = format!("id{i}");
        ok(owner.enroll(&mut s, &who, id, &mut r))?;
        for probe in ids.iter().map(|p| &p[0]) {
            let single = ok(owner.verify(&mut s, &who, probe, 0.5, &mut r))?;
            let multi = ok(other.verify(&mut s, &who, probe, 0.5, &mut r))?;
            ensure(raw_scores(&single) == raw_scores(&multi), || {
                format!("{who}: multi-key scores differ")
            })?;
            compared += single.scores.len();
        }
    }
    handle.shutdown();
    Ok(format!(
        "{switched} ciphertexts switched exactly; {compared} multi-key scores equal single-key"
    ))
}

fn criterion_5() -> Outcome {
    let dim = 512;
    let mut details = Vec::new();
    for (k, &delta) in STANDARD_STEPS.iter().enumerate() {
        let preset = preset_for(dim, delta).map_err(|e| e.to_string())?;
        let ctx = context(&preset)?;
        let mut r = rng(500 + k as u64);
        let sk = ok(gen_secret_key(&ctx, &mut r))?;
        let pk = ok(gen_public_key(&sk, &mut r))?;
        let ek = ok(gen_evaluation_key(&sk, &mut r))?;
        let gks = ok(gen_galois_keys(&sk, &power_of_two_steps(ctx.n()), &mut r))?;
        let bound = quantization_error_bound(delta, dim);
        let (mut total, mut worst) = (0.0f64, 0.0f64);
        for i in 0..1000 {
            let x = random_unit_vector(dim, &mut r);
            let y = random_unit_vector(dim, &mut r);
            let exact = 1.0 - x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
            let ex = ok(encrypt_template(
                &ok(quantize(&x, delta))?,
                &pk,
                MatchPath::Batched,
                &mut r,
            ))?;
            let ey = ok(encrypt_template(
                &ok(quantize(&y, delta))?,
                &pk,
                MatchPath::Batched,
                &mut r,
            ))?;
            let got = ok(decrypt_score(
                &ok(score(&ex, &ey, &ek, Some(&gks)))?,
                &sk,
                MatchPath::Batched,
                delta,
            ))?;
            let err = (got.dissimilarity - exact).abs();
            ensure(err <= bound, || {
                format!("delta {delta} pair {i}: error {err} above bound {bound}")
            })?;
            total += err;
            worst = worst.max(err);
        }
        let mean = total / 1000.0;
        if delta == 0.01 {
            ensure(mean < 0.01, || format!("mean error {mean} at delta 0.01"))?;
        }
        details.push(format!(
            "delta {delta}: mean {mean:.5} max {worst:.5} bound {bound:.4}"
        ));
    }
    Ok(details.join("; "))
}

fn criterion_6() -> Outcome {
    let data = ok(SyntheticSpec::default().generate())?;
    let report = run_eval(&data, &EvalConfig::default()).map_err(|e| e.to_string())?;
    let tar = |p, d, far| {
        report
            .tar(p, d, far)
            .ok_or_else(|| format!("missing TAR for {p:?} {d:?} {far}"))
    };
    let mut parts = Vec::new();
    for far in FAR_POINTS {
        let plain = tar(Pipeline::Plaintext, None, far)?;
        let enc = tar(Pipeline::Encrypted, Some(0.0025), far)?;
        ensure((plain - enc).abs() <= 0.005, || {
            format!("FAR {far}: plaintext {plain} vs encrypted {enc}")
        })?;
        parts.push(format!(
            "FAR {far}: {:.1}% vs {:.1}%",
            plain * 100.0,
            enc * 100.0
        ));
    }
    // Compare at 0.1-point resolution.
    let tenth = |v: f64| (v * 1000.0).round() as i64;
    let at = |d| tar(Pipeline::Encrypted, Some(d), 1e-4).map(tenth);
    let (fine, mid, coarse) = (at(0.0025)?, at(0.01)?, at(0.1)?);
    ensure(fine >= mid && mid >= coarse, || {
        format!("ordering at FAR 0.01%: {fine} {mid} {coarse} (tenths of a point)")
    })?;
    parts.push(format!(
        "TAR@0.01% by step 0.0025/0.01/0.1: {:.1}/{:.1}/{:.1}%; {} encrypted scores cross-checked",
        fine as f64 / 10.0,
        mid as f64 / 10.0,
        coarse as f64 / 10.0,
        report.fhe_verified
    ));
    Ok(parts.join("; "))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let preset = Preset::by_name("l128-n1024").unwrap();
    let cfg = BenchConfig {
        presets: vec![preset],
        ..BenchConfig::default()
    };
    let b = bench_row(&preset, BenchPath::Batched, &cfg).map_err(|e| e.to_string())?;
    let e = bench_row(&preset, BenchPath::Elementwise, &cfg).map_err(|e| e.to_string())?;
    let (bt, et) = match (&b.timings, &e.timings) {
        (Some(bt), Some(et)) => (bt.total_ms, et.total_ms),
        _ => return Err(format!("skipped: {:?} {:?}", b.skip_reason, e.skip_reason)),
    };
    let time_ratio = et / bt;
    let size_ratio = e.template_bytes as f64 / b.template_bytes as f64;
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "d={} time {et:.1} ms vs {bt:.1} ms ({time_ratio:.0}x), template {} vs {} bytes ({size_ratio:.0}x), {secs:.0} s",
        b.dim, e.template_bytes, b.template_bytes
    );
    ensure(
        time_ratio >= 10.0 && size_ratio >= 100.0 && secs < 900.0,
        || detail.clone(),
    )?;
    Ok(detail)
}

static PANICS: AtomicUsize = AtomicUsize::new(0);

fn fuzz_input(r: &mut ChaCha20Rng, seeds: &[Vec<u8>]) -> Vec<u8> {
    match r.random_range(0..4) {
        0 => {
            let len = r.random_range(0..64);
            (0..len).map(|_| r.random()).collect()
        }
        1 => {
            let mut f = seeds[r.random_range(0..seeds.len())].clone();
            for _ in 0..r.random_range(1..8) {
                let i = r.random_range(0..f.len());
                f[i] ^= 1 << r.random_range(0..8);
            }
            f
        }
        2 => {
            let f = &seeds[r.random_range(0..seeds.len())];
            f[..r.random_range(0..f.len())].to_vec()
        }
        _ => {
            let len = r.random_range(0..40usize);
            let mut f = ((len + 1) as u32).to_le_bytes().to_vec();
            f.push(r.random_range(0..8u8));
            f.extend((0..len).map(|_| r.random::<u8>()));
            f
        }
    }
}

fn criterion_8() -> Outcome {
    let fuzz_secs: u64 = std::env::var("HEMATCH_FUZZ_SECS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(10);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store_path = dir.path().join("store.log");
    let ctx = context(&Preset::by_name("l128-n128").unwrap())?;
    let mut r = rng(8);
    let keys = ok(ClientKeys::generate(&ctx, &mut r))?;
    let client = Client::new(keys.clone(), 0.01);
    let ids = samples(3, 3, 64, 8);

    let server = Server::new(
        ok(TemplateStore::open(&store_path))?,
        ServerConfig::default(),
    );
    let handle = ok(server.spawn("127.0.0.1:0"))?;
    let addr = handle.local_addr();
    let connect = || TcpStream::connect(addr).map_err(|e| e.to_string());
    let mut s = ClientSession::new(connect()?);

    // Wire scores against the in-process matcher on the same keys.
    let mut compared = 0;
    for (i, id) in ids.iter().enumerate() {
        let who = format!("id{i}");
        ok(client.enroll(&mut s, &who, id, &mut r))?;
        let probe = &ids[(i + 1) % ids.len()][0];
        let wire = ok(client.verify(&mut s, &who, probe, 0.5, &mut r))?;
        let qp = ok(quantize(&ok(normalize(probe))?, 0.01))?;
        let ep = ok(encrypt_template(
            &qp,
            keys.public_key(),
            MatchPath::Batched,
            &mut r,
        ))?;
        let bundle = keys.bundle();
        for (score_got, enrolled) in wire.scores.iter().zip(id) {
            let qe = ok(quantize(&ok(normalize(enrolled))?, 0.01))?;
            let ee = ok(encrypt_template(
                &qe,
                keys.public_key(),
                MatchPath::Batched,
                &mut r,
            ))?;
            let local = ok(decrypt_raw_score(
                &ok(score(&ee, &ep, &bundle.ek, bundle.gks.as_ref()))?,
                keys.secret_key(),
                MatchPath::Batched,
            ))?;
            ensure(
                score_got.raw == local && local == integer_dot(qe.values(), qp.values()),
                || format!("{who}: wire {} vs in-process {local}", score_got.raw),
            )?;
            compared += 1;
        }
    }

    // Nothing secret was decoded; a smuggled secret key is refused.
    let decoded = server.audit().decoded();
    ensure(server.audit().is_clean(), || {
        format!("audit saw {decoded:?}")
    })?;
    ensure(
        !decoded.contains(&ObjectTag::SecretKey) && !decoded.contains(&ObjectTag::Plaintext),
        || format!("audit saw {decoded:?}"),
    )?;
    let mut rec = ok(client.enrollment_record("mallory", &ids[0], &mut r))?;
    rec.switch_keys = vec![export_secret_key(keys.secret_key())];
    match s.enroll(&rec) {
        Err(Error::Protocol {
            code: ErrorCode::Forbidden,
            ..
        }) => {}
        other => return Err(format!("smuggled secret key: {other:?}")),
    }
    ensure(!server.store().contains("mallory"), || {
        "mallory stored".into()
    })?;

    // Malformed-frame fuzz over TCP.
    let enroll = Message::Enroll(ok(client.enrollment_record("f", &ids[0][..1], &mut r))?);
    let auth = Message::AuthRequest(ok(client.auth_request("id0", &ids[0][0], &mut r))?);
    let seeds = vec![
        enroll.to_frame().encode(),
        auth.to_frame().encode(),
        Frame::error(ErrorCode::Internal, "x").encode(),
    ];
    let previous = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {
        PANICS.fetch_add(1, Ordering::SeqCst);
    }));
    let deadline = Instant::now() + Duration::from_secs(fuzz_secs);
    let mut cases = 0u64;
    let mut fuzz_rng = rng(88);
    let fuzz_result = (|| -> Result<(), String> {
        while Instant::now() < deadline {
            let mut c = connect()?;
            c.set_read_timeout(Some(Duration::from_secs(10)))
                .map_err(|e| e.to_string())?;
            let _ = c.write_all(&fuzz_input(&mut fuzz_rng, &seeds));
            let _ = c.shutdown(Shutdown::Write);
            let mut sink = Vec::new();
            if let Err(e) = c.read_to_end(&mut sink) {
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut
                {
                    return Err(format!("server hung on case {cases}"));
                }
            }
            cases += 1;
        }
        Ok(())
    })();
    // Let in-flight connection threads finish before reading the counter.
    std::thread::sleep(Duration::from_millis(200));
    std::panic::set_hook(previous);
    fuzz_result?;
    let panics = PANICS.load(Ordering::SeqCst);
    ensure(panics == 0, || format!("{panics} panics during fuzz"))?;
    let still = ok(client.verify(
        &mut ClientSession::new(connect()?),
        "id0",
        &ids[0][0],
        0.5,
        &mut r,
    ))?;
    ensure(still.accepted, || "server unusable after fuzz".into())?;

    // Restart: same records byte for byte, and they still authenticate.
    let before: Vec<Vec<u8>> = (0..3)
        .map(|i| server.store().get(&format!("id{i}")))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let file_before = std::fs::read(&store_path).map_err(|e| e.to_string())?;
    handle.shutdown();
    drop(server);
    let server = Server::new(
        ok(TemplateStore::open(&store_path))?,
        ServerConfig::default(),
    );
    for (i, rec) in before.iter().enumerate() {
        ensure(&ok(server.store().get(&format!("id{i}")))? == rec, || {
            format!("id{i} changed across restart")
        })?;
    }
    ensure(
        std::fs::read(&store_path).map_err(|e| e.to_string())? == file_before,
        || "store file rewritten on open".into(),
    )?;
    let handle = ok(server.spawn("127.0.0.1:0"))?;
    let mut s =
        ClientSession::new(TcpStream::connect(handle.local_addr()).map_err(|e| e.to_string())?);
    ensure(
        ok(client.verify(&mut s, "id1", &ids[1][1], 0.5, &mut r))?.accepted,
        || "restarted server rejects genuine probe".into(),
    )?;
    handle.shutdown();
    Ok(format!(
        "{compared} wire scores bit-exact; audit clean, secret key refused; restart byte-identical; {cases} fuzz cases in {fuzz_secs} s, 0 panics"
    ))
}

fn criterion_9() -> Outcome {
    let mut worst: Option<(u32, String)> = None;
    let presets = TABLE_PRESETS.iter().flat_map(|p| [*p, p.two_prime()]);
    for (k, preset) in presets.enumerate() {
        let ctx = context(&preset)?;
        let mut r = rng(900 + k as u64);
        let sk = ok(gen_secret_key(&ctx, &mut r))?;
        let pk = ok(gen_public_key(&sk, &mut r))?;
        let ek = ok(gen_evaluation_key(&sk, &mut r))?;
        let gks = ok(gen_galois_keys(&sk, &power_of_two_steps(ctx.n()), &mut r))?;
        let delta = if preset.two_prime_plaintext {
            0.0025
        } else {
            0.01
        };
        let qx = random_quantized(preset.dim, delta, &mut r)?;
        let qy = random_quantized(preset.dim, delta, &mut r)?;
        let ex = ok(encrypt_template(&qx, &pk, MatchPath::Batched, &mut r))?;
        let ey = ok(encrypt_template(&qy, &pk, MatchPath::Batched, &mut r))?;
        let ct = ok(score(&ex, &ey, &ek, Some(&gks)))?;
        let budget = ok(noise_budget(&ct, &sk))?;
        let raw = ok(decrypt_raw_score(&ct, &sk, MatchPath::Batched))?;
        ensure(
            budget >= 1 && raw == integer_dot(qx.values(), qy.values()),
            || format!("{}: budget {budget} bits", preset.name()),
        )?;
        if worst.as_ref().is_none_or(|(b, _)| budget < *b) {
            worst = Some((budget, preset.name()));
        }
    }
    let (b, name) = worst.unwrap();
    Ok(format!("20 presets, lowest budget {b} bits at {name}"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("FHE correctness at every preset", criterion_1),
        ("batched inner-product exactness", criterion_2),
        ("rotation and slot-sum correctness", criterion_3),
        ("key switching", criterion_4),
        ("quantization fidelity", criterion_5),
        ("accuracy preservation", criterion_6),
        ("batching performance ratio", criterion_7),
        ("protocol end-to-end", criterion_8),
        ("noise-budget guard", criterion_9),
    ];
    let filter: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !filter.is_empty() && !filter.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {number} PASS ({name}, {secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {number} FAIL ({name}, {secs:.1} s): {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
