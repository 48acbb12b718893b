use std::net::TcpListener;
use std::os::unix::fs::PermissionsExt;
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use hematch_core::matcher::SyntheticSpec;

const BIN: &str = env!("CARGO_BIN_EXE_hematch");

fn hematch(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

struct ServerProcess(Child);

impl Drop for ServerProcess {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn start_server(db: &Path, port: u16) -> ServerProcess {
    let child = Command::new(BIN)
        .args([
            "serve",
            "--db",
            db.to_str().unwrap(),
            "--port",
            &port.to_string(),
        ])
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(10);
    while std::net::TcpStream::connect(("127.0.0.1", port)).is_err() {
        assert!(Instant::now() < deadline, "server did not start");
        std::thread::sleep(Duration::from_millis(20));
    }
    ServerProcess(child)
}

/// Three rows of one synthetic identity plus one row of another.
fn write_features(dir: &Path) -> (String, String) {
    let data = SyntheticSpec {
        identities: 2,
        samples_per_identity: 3,
        dim: 64,
        sigma_within: 0.35,
        seed: 5,
        intrinsic_dim: None,
    }
    .generate()
    .unwrap();
    let rows: Vec<String> = data
        .features()
        .iter()
        .map(|f| {
            let vals: Vec<String> = f.iter().map(|x| x.to_string()).collect();
            format!("alice,{}", vals.join(","))
        })
        .collect();
    let enroll = dir.join("enroll.csv");
    let probe = dir.join("probe.csv");
    std::fs::write(&enroll, rows[..3].join("\n")).unwrap();
    std::fs::write(&probe, format!("{}\n{}", rows[0], rows[3])).unwrap();
    (
        enroll.to_str().unwrap().to_string(),
        probe.to_str().unwrap().to_string(),
    )
}

#[test]
fn keygen_enroll_auth_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let keys = dir.path().join("keys");
    let keys_s = keys.to_str().unwrap();
    let out = hematch(&[
        "keygen",
        "--params",
        "l128-n128",
        "--keys",
        keys_s,
        "--seed",
        "1",
    ]);
    assert!(out.status.success(), "{out:?}");
    for f in ["secret.key", "public.bundle", "params.bin"] {
        assert!(keys.join(f).is_file(), "{f}");
    }
    let mode = std::fs::metadata(keys.join("secret.key"))
        .unwrap()
        .permissions()
        .mode();
    assert_eq!(mode & 0o777, 0o600);

    let port = free_port();
    let db = dir.path().join("db.log");
    let _server = start_server(&db, port);
    let (enroll, probe) = write_features(dir.path());
    let port_s = port.to_string();

    let out = hematch(&[
        "enroll",
        "--keys",
        keys_s,
        "--features",
        &enroll,
        "--port",
        &port_s,
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("enrolled alice: 3 templates"));

    let out = hematch(&[
        "auth",
        "--keys",
        keys_s,
        "--features",
        &probe,
        "--port",
        &port_s,
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "identity,decision,dissimilarity");
    assert!(lines[1].starts_with("alice,accept,"), "{text}");
    assert!(lines[2].starts_with("alice,reject,"), "{text}");

    // A second enrollment of the same identity is a runtime error.
    let out = hematch(&[
        "enroll",
        "--keys",
        keys_s,
        "--features",
        &enroll,
        "--port",
        &port_s,
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("already enrolled"));
}

#[test]
fn exit_codes() {
    assert_eq!(hematch(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        hematch(&["keygen", "--params", "l128-n999"]).status.code(),
        Some(1)
    );
    assert_eq!(hematch(&["bench", "--reps", "3"]).status.code(), Some(1));
    assert_eq!(hematch(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let keys = dir.path().join("k");
    let out = hematch(&[
        "keygen",
        "--params",
        "l128-n128",
        "--keys",
        keys.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let (enroll, _) = write_features(dir.path());
    // Nothing listening.
    let out = hematch(&[
        "enroll",
        "--keys",
        keys.to_str().unwrap(),
        "--features",
        &enroll,
        "--port",
        &free_port().to_string(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(
        hematch(&["eval", "--features", "/nonexistent.csv"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn bench_and_eval_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let bench = dir.path().join("bench.csv");
    let out = hematch(&[
        "bench",
        "--params",
        "l128-n128,l192-n128",
        "--out",
        bench.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = std::fs::read_to_string(&bench).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    assert!(text.starts_with("preset,"));

    let eval = dir.path().join("eval.csv");
    let out = hematch(&[
        "eval",
        "--synthetic",
        "20x3x32",
        "--pca-k",
        "8",
        "--fhe-pairs",
        "4",
        "--out",
        eval.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = std::fs::read_to_string(&eval).unwrap();
    // Plaintext block plus two pipelines at three steps, three FAR points each.
    assert_eq!(text.lines().count(), 1 + 3 * 7);
}
