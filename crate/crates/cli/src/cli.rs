//! Command-line surface. Exit codes: 0 success, 1 usage error, 2 runtime
//! error.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::net::TcpStream;
use std::os::unix::fs::OpenOptionsExt;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use hematch_core::fv::{
    export_secret_key, import_secret_key, EncryptionParams, FvContext, Preset, TABLE_PRESETS,
};
use hematch_core::matcher::{Dataset, MatchPath, SyntheticSpec};
use hematch_core::protocol::{
    Client, ClientKeys, ClientSession, PublicBundle, Server, ServerConfig, TemplateStore,
};
use hematch_core::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::bench::{run_bench, write_csv, BenchConfig, BenchPath};
use crate::eval::{run_eval, EvalConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const SECRET_FILE: &str = "secret.key";
pub const BUNDLE_FILE: &str = "public.bundle";
pub const PARAMS_FILE: &str = "params.bin";

#[derive(Debug, Parser)]
#[command(
    name = "hematch",
    version,
    about = "Encrypted template matching with FV homomorphic encryption"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a key set: secret key, public bundle and parameters.
    Keygen(KeygenArgs),
    /// Encrypt feature rows and enroll them with a server.
    Enroll(ClientArgs),
    /// Authenticate feature rows against enrolled identities.
    Auth(AuthArgs),
    /// Run the matching server.
    Serve(ServeArgs),
    /// Time the batched, element-wise and unencrypted paths per preset.
    Bench(BenchArgs),
    /// Measure TAR at fixed FAR for the plaintext and encrypted pipelines.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct KeygenArgs {
    /// Preset name (e.g. l128-n1024, l128-n1024-t2) or a serialized params file.
    #[arg(long, default_value = "l128-n1024")]
    pub params: String,
    /// Directory receiving the key files.
    #[arg(long, default_value = "keys")]
    pub keys: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct Endpoint {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 7878)]
    pub port: u16,
}

#[derive(Debug, Args)]
pub struct ClientArgs {
    #[arg(long, default_value = "keys")]
    pub keys: PathBuf,
    /// CSV of `label,f1,...,fD` rows.
    #[arg(long)]
    pub features: PathBuf,
    /// Use this identity for every row instead of the row labels.
    #[arg(long)]
    pub identity: Option<String>,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Encrypt coefficient-wise instead of into slots.
    #[arg(long)]
    pub elementwise: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub endpoint: Endpoint,
}

#[derive(Debug, Args)]
pub struct AuthArgs {
    #[command(flatten)]
    pub client: ClientArgs,
    /// Accept when the smallest dissimilarity is at most this.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "hematch.db")]
    pub db: PathBuf,
    #[command(flatten)]
    pub endpoint: Endpoint,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated preset names, or `all`.
    #[arg(long, default_value = "all")]
    pub params: String,
    /// Comma-separated subset of batched,elementwise,plaintext.
    #[arg(long, default_value = "batched,elementwise,plaintext")]
    pub paths: String,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// CSV of `label,f1,...,fD` rows.
    #[arg(long, conflicts_with = "synthetic")]
    pub features: Option<PathBuf>,
    /// Synthetic set `<ids>x<samples>x<dim>`; the default when no features
    /// are given is 200x5x512.
    #[arg(long)]
    pub synthetic: Option<String>,
    /// Comma-separated quantization steps.
    #[arg(long, default_value = "0.1,0.01,0.0025")]
    pub delta: String,
    /// Components for the PCA pipeline; 0 disables it.
    #[arg(long, default_value_t = 64)]
    pub pca_k: usize,
    /// Pairs per encrypted cell verified with real encryption.
    #[arg(long, default_value_t = 32)]
    pub fhe_pairs: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Runtime(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::Runtime(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Keygen(a) => keygen(&a),
        Command::Enroll(a) => enroll(&a),
        Command::Auth(a) => auth(&a),
        Command::Serve(a) => serve(&a),
        Command::Bench(a) => bench(&a),
        Command::Eval(a) => eval(&a),
    }
}

fn rng_from(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_rng(&mut rand::rng()),
    }
}

fn preset(name: &str) -> CliResult<Preset> {
    Preset::by_name(name).ok_or_else(|| {
        let known: Vec<String> = TABLE_PRESETS.iter().map(Preset::name).collect();
        CliError::Usage(format!(
            "unknown preset {name:?}; known: {} (append -t2 for two plaintext primes)",
            known.join(", ")
        ))
    })
}

fn load_params(spec: &str) -> CliResult<EncryptionParams> {
    if Path::new(spec).is_file() {
        Ok(EncryptionParams::from_bytes(&fs::read(spec)?)?)
    } else {
        Ok(preset(spec)?.params()?)
    }
}

fn write_private(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut f = OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(true)
        .mode(0o600)
        .open(path)?;
    f.write_all(bytes)?;
    f.sync_all()
}

/// Write the three key files into `dir`.
pub fn save_keys(dir: &Path, keys: &ClientKeys) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_private(
        &dir.join(SECRET_FILE),
        &export_secret_key(keys.secret_key()),
    )?;
    fs::write(dir.join(BUNDLE_FILE), keys.bundle().to_bytes())?;
    fs::write(dir.join(PARAMS_FILE), keys.context().params().to_bytes())?;
    Ok(())
}

pub fn load_keys(dir: &Path) -> Result<ClientKeys> {
    let params = EncryptionParams::from_bytes(&fs::read(dir.join(PARAMS_FILE))?)?;
    let ctx = FvContext::new(params)?;
    let sk = import_secret_key(&ctx, &fs::read(dir.join(SECRET_FILE))?)?;
    let bundle = PublicBundle::from_bytes(&ctx, &fs::read(dir.join(BUNDLE_FILE))?)?;
    ClientKeys::from_parts(sk, bundle)
}

fn keygen(a: &KeygenArgs) -> CliResult<()> {
    let params = load_params(&a.params)?;
    let ctx = FvContext::new(params)?;
    let keys = ClientKeys::generate(&ctx, &mut rng_from(a.seed))?;
    save_keys(&a.keys, &keys)?;
    println!("key {} written to {}", keys.key_id(), a.keys.display());
    Ok(())
}

/// Rows grouped by identity, in first-appearance order.
fn grouped(a: &ClientArgs) -> CliResult<Vec<(String, Vec<Vec<f64>>)>> {
    let data = Dataset::from_csv_path(&a.features)?;
    let mut order = Vec::new();
    let mut groups: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (label, f) in data.labels().iter().zip(data.features()) {
        let id = a.identity.clone().unwrap_or_else(|| label.clone());
        if !groups.contains_key(&id) {
            order.push(id.clone());
        }
        groups.entry(id).or_default().push(f.clone());
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let rows = groups.remove(&id).unwrap_or_default();
            (id, rows)
        })
        .collect())
}

fn connect(a: &ClientArgs) -> CliResult<(Client, ClientSession<TcpStream>)> {
    let keys = load_keys(&a.keys)?;
    let mut client = Client::new(keys, a.delta);
    if a.elementwise {
        client = client.with_path(MatchPath::Elementwise);
    }
    let stream = TcpStream::connect((a.endpoint.host.as_str(), a.endpoint.port))?;
    stream.set_nodelay(true)?;
    Ok((client, ClientSession::new(stream)))
}

fn enroll(a: &ClientArgs) -> CliResult<()> {
    let groups = grouped(a)?;
    let (client, mut session) = connect(a)?;
    let mut rng = rng_from(a.seed);
    for (id, rows) in groups {
        let ack = client.enroll(&mut session, &id, &rows, &mut rng)?;
        println!("enrolled {}: {} templates", ack.identity, ack.stored);
    }
    Ok(())
}

fn auth(a: &AuthArgs) -> CliResult<()> {
    let groups = grouped(&a.client)?;
    let (client, mut session) = connect(&a.client)?;
    let mut rng = rng_from(a.client.seed);
    println!("identity,decision,dissimilarity");
    for (id, rows) in groups {
        for probe in rows {
            let v = client.verify(&mut session, &id, &probe, a.threshold, &mut rng)?;
            println!(
                "{id},{},{:.6}",
                if v.accepted { "accept" } else { "reject" },
                v.aggregate
            );
        }
    }
    Ok(())
}

fn serve(a: &ServeArgs) -> CliResult<()> {
    let store = TemplateStore::open(&a.db)?;
    let server = Server::new(store, ServerConfig::default());
    let listener = std::net::TcpListener::bind((a.endpoint.host.as_str(), a.endpoint.port))?;
    eprintln!(
        "serving {} identities from {} on {}",
        server.store().len(),
        a.db.display(),
        listener.local_addr()?
    );
    server.serve(listener, Arc::new(AtomicBool::new(false)))?;
    Ok(())
}

fn output(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn bench(a: &BenchArgs) -> CliResult<()> {
    let presets = if a.params == "all" {
        TABLE_PRESETS.to_vec()
    } else {
        a.params
            .split(',')
            .map(|s| preset(s.trim()))
            .collect::<CliResult<Vec<_>>>()?
    };
    let paths = a
        .paths
        .split(',')
        .map(|s| {
            BenchPath::parse(s.trim()).ok_or_else(|| CliError::Usage(format!("unknown path {s:?}")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if a.reps < crate::bench::MIN_REPETITIONS {
        return Err(CliError::Usage(format!(
            "--reps must be at least {}",
            crate::bench::MIN_REPETITIONS
        )));
    }
    let cfg = BenchConfig {
        presets,
        repetitions: a.reps,
        paths,
        delta: a.delta,
        seed: a.seed,
    };
    let rows = run_bench(&cfg, |r| match (&r.timings, &r.skip_reason) {
        (Some(t), _) => eprintln!("{} {}: {:.3} ms", r.preset, r.path.name(), t.total_ms),
        (None, Some(why)) => eprintln!("{} {}: skipped ({why})", r.preset, r.path.name()),
        _ => {}
    })?;
    write_csv(&rows, output(&a.out)?)?;
    Ok(())
}

fn parse_deltas(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|d| {
            d.trim()
                .parse::<f64>()
                .ok()
                .filter(|&x| x > 0.0 && x <= 1.0)
                .ok_or_else(|| CliError::Usage(format!("bad quantization step {d:?}")))
        })
        .collect()
}

fn eval(a: &EvalArgs) -> CliResult<()> {
    let data = match (&a.features, &a.synthetic) {
        (Some(path), _) => Dataset::from_csv_path(path)?,
        (None, Some(spec)) => {
            let spec: SyntheticSpec = spec
                .parse()
                .map_err(|e: Error| CliError::Usage(e.to_string()))?;
            SyntheticSpec {
                seed: a.seed,
                ..spec
            }
            .generate()?
        }
        (None, None) => SyntheticSpec {
            seed: a.seed,
            ..SyntheticSpec::default()
        }
        .generate()?,
    };
    let cfg = EvalConfig {
        deltas: parse_deltas(&a.delta)?,
        pca_k: (a.pca_k > 0).then_some(a.pca_k),
        fhe_pairs: a.fhe_pairs,
        seed: a.seed,
    };
    let report = run_eval(&data, &cfg)?;
    eprintln!(
        "{} genuine / {} impostor pairs; {} encrypted scores verified",
        report.genuine_pairs, report.impostor_pairs, report.fhe_verified
    );
    report.write_csv(output(&a.out)?)?;
    Ok(())
}
