//! `koopman`: command-line front end for the koopman-core checks and the
//! coincidence simulator.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use koopman_core::bell::{self, CatState, ChshPattern, CountTable};
use koopman_core::coincidence::{self, Model, SimConfig};
use koopman_core::fock::{self, FockRep};
use koopman_core::measurement::{self, InstrumentSetup};
use koopman_core::weyl::{CanonicalGenerators, FVector};
use koopman_core::{gibbs, verify, Error};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const SCHEMA_VERSION: u32 = 1;

const EXIT_UNKNOWN_COMMAND: u8 = 2;
const EXIT_INVALID_FLAG: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_DATA: u8 = 5;
const EXIT_VERIFY: u8 = 6;

const DEFAULT_CYCLE_NS: u64 = 1_000_000;

#[derive(Parser)]
#[command(name = "koopman", version, about = "Operator-algebra checks, Bell analysis and coincidence simulation")]
struct Cli {
    /// Output format for result artifacts.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed (overrides a config file seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Temperature kT.
    #[arg(long, global = true, default_value_t = 1.0, allow_negative_numbers = true)]
    kt: f64,
    /// Fock truncation.
    #[arg(short = 'N', global = true, default_value_t = 32)]
    n: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum GnsCheck {
    Inner,
    Hermite,
    Lowering,
    Translate,
    Projection,
    Polarization,
    Modulation,
}

#[derive(Subcommand)]
enum Command {
    /// Gibbs moments rho(q^2m p^2n): closed form against symbolic evaluation.
    Moments {
        /// Largest m + n.
        #[arg(long, default_value_t = 4)]
        max_degree: u32,
    },
    /// Taylor coefficients of the generating function against symbolic products.
    GenfunCheck {
        #[arg(long, default_value_t = 6)]
        order: u32,
        #[arg(long, default_value_t = 20)]
        configs: usize,
        /// Factors per product.
        #[arg(long, default_value_t = 2)]
        factors: usize,
    },
    /// GNS representation on the truncated Fock space.
    Gns {
        /// Longest generator word in the inner-product check.
        #[arg(long, default_value_t = 3)]
        max_degree: usize,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        /// Also diagonalize j L (N <= 48).
        #[arg(long)]
        spectrum: bool,
        /// Emit the residual table of a single check instead of the summary.
        #[arg(long, value_enum)]
        check: Option<GnsCheck>,
    },
    /// One random (A, X, rho) triple through the Lueders identities.
    LudersDemo {
        #[arg(long, default_value_t = 4)]
        dim: usize,
    },
    /// Pointer-coupling model of two successive measurements.
    Instrument {
        /// JSON setup with bases and `psi`.
        #[arg(long, alias = "setup")]
        config: PathBuf,
    },
    /// Correlations and S from a 4x4 count table (bundled fixture by default).
    BellCounts {
        /// CSV or JSON count table.
        #[arg(long, alias = "counts")]
        file: Option<PathBuf>,
    },
    /// Identities of the extremal 4x4 model.
    BellAppendix,
    /// Superposition/mixture discrimination for a two-level state.
    Cat {
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
        beta_re: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        beta_im: f64,
    },
    /// Simulate timestamped events from both stations.
    SimEvents {
        /// JSON or TOML SimConfig.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        #[arg(long)]
        duration_ns: Option<u64>,
        #[arg(long)]
        pair_rate: Option<f64>,
        /// Blanking-flagged stream instead of the raw detector stream.
        #[arg(long)]
        compressed: bool,
    },
    /// Coincidence counting over recorded event files.
    Coincide {
        #[arg(long)]
        alice: PathBuf,
        #[arg(long)]
        bob: PathBuf,
        #[arg(long, default_value_t = 4)]
        window_ns: u64,
        /// Reject files violating this dead time.
        #[arg(long)]
        dead_time_ns: Option<u64>,
    },
    /// Per-slice statistics over repeated power-on cycles (1 ms cycles without a config).
    TimeResolved {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        cycles: u64,
        #[arg(long, default_value_t = 100)]
        slice_ns: u64,
    },
    /// Runs the full acceptance suite.
    VerifyAll,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Quantum,
    Lhv,
}

struct CliError {
    code: u8,
    kind: &'static str,
    message: String,
}

impl CliError {
    fn flag(message: impl Into<String>) -> Self {
        Self { code: EXIT_INVALID_FLAG, kind: "invalid_flag", message: message.into() }
    }

    fn data(message: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, kind: "data", message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => Self { code: EXIT_IO, kind: "io", message: e.to_string() },
            Error::InvalidInput(_) => Self::flag(e.to_string()),
            _ => Self::data(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError { code: EXIT_IO, kind: "io", message: format!("{}: {e}", path.display()) }
}

/// A result both as JSON and as a CSV table.
struct Artifact {
    json: Value,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    /// `Some(false)` makes the command exit with the verification code.
    verdict: Option<bool>,
}

impl Artifact {
    fn table(json: Value, header: &[&str], rows: Vec<Vec<String>>) -> Self {
        Self { json, header: header.iter().map(|s| s.to_string()).collect(), rows, verdict: None }
    }

    fn key_values(json: Value, pairs: Vec<(&str, String)>) -> Self {
        let rows = pairs.into_iter().map(|(k, v)| vec![k.to_string(), v]).collect();
        Self::table(json, &["key", "value"], rows)
    }

    fn with_verdict(mut self, pass: bool) -> Self {
        self.verdict = Some(pass);
        self
    }
}

fn f(x: f64) -> String {
    format!("{x}")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    return ExitCode::SUCCESS;
                }
                ErrorKind::InvalidSubcommand | ErrorKind::MissingSubcommand | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    EXIT_UNKNOWN_COMMAND
                }
                _ => EXIT_INVALID_FLAG,
            };
            let kind = if code == EXIT_UNKNOWN_COMMAND { "unknown_subcommand" } else { "invalid_flag" };
            return report(CliError { code, kind, message: e.to_string().trim().to_string() });
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    let body = json!({
        "schema_version": SCHEMA_VERSION,
        "error": { "code": e.code, "kind": e.kind, "message": e.message },
    });
    eprintln!("{body}");
    ExitCode::from(e.code)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("KOOPMAN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::flag(format!("KOOPMAN_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::flag(format!("KOOPMAN_THREADS: {e}")))
}

fn run(cli: &Cli) -> Result<ExitCode, CliError> {
    if !(cli.kt > 0.0 && cli.kt.is_finite()) {
        return Err(CliError::flag(format!("--kt must be positive, got {}", cli.kt)));
    }
    if cli.n < 4 {
        return Err(CliError::flag(format!("-N must be at least 4, got {}", cli.n)));
    }
    configure_threads()?;
    let (name, artifact) = match &cli.command {
        Command::Moments { max_degree } => ("moments", moments(cli, *max_degree)?),
        Command::GenfunCheck { order, configs, factors } => ("genfun-check", genfun_check(cli, *order, *configs, *factors)?),
        Command::Gns { max_degree, kappa, spectrum, check: None } => ("gns", gns(cli, *max_degree, *kappa, *spectrum)?),
        Command::Gns { max_degree, kappa, check: Some(check), .. } => ("gns", gns_check(cli, *check, *max_degree, *kappa)?),
        Command::LudersDemo { dim } => ("luders-demo", luders_demo(cli, *dim)?),
        Command::Instrument { config } => ("instrument", instrument(config)?),
        Command::BellCounts { file } => ("bell-counts", bell_counts(file.as_deref())?),
        Command::BellAppendix => ("bell-appendix", bell_appendix()),
        Command::Cat { alpha, beta_re, beta_im } => ("cat", cat(*alpha, Complex64::new(*beta_re, *beta_im))?),
        Command::SimEvents { config, model, duration_ns, pair_rate, compressed } => {
            let out = cli.out.as_deref().ok_or_else(|| CliError::flag("sim-events needs --out <events file>"))?;
            let mut cfg = load_config(config.as_deref(), cli.seed)?;
            if let Some(m) = model {
                cfg.model = match m {
                    ModelArg::Quantum => Model::Quantum,
                    ModelArg::Lhv => Model::Lhv,
                };
            }
            cfg.duration_ns = duration_ns.unwrap_or(cfg.duration_ns);
            cfg.pair_rate = pair_rate.unwrap_or(cfg.pair_rate);
            cfg.validate()?;
            let summary = sim_events(&cfg, out, *compressed)?;
            println!("{}", envelope("sim-events", summary));
            return Ok(ExitCode::SUCCESS);
        }
        Command::Coincide { alice, bob, window_ns, dead_time_ns } => ("coincide", coincide(alice, bob, *window_ns, *dead_time_ns)?),
        Command::TimeResolved { config, cycles, slice_ns } => {
            let mut cfg = load_config(config.as_deref(), cli.seed)?;
            if config.is_none() {
                cfg.duration_ns = DEFAULT_CYCLE_NS;
            }
            ("time-resolved", time_resolved(&cfg, *cycles, *slice_ns)?)
        }
        Command::VerifyAll => ("verify-all", verify_all()),
    };
    emit(cli, name, &artifact)?;
    Ok(match artifact.verdict {
        Some(false) => ExitCode::from(EXIT_VERIFY),
        _ => ExitCode::SUCCESS,
    })
}

fn envelope(command: &str, result: Value) -> Value {
    json!({ "schema_version": SCHEMA_VERSION, "command": command, "result": result })
}

fn emit(cli: &Cli, name: &str, a: &Artifact) -> Result<(), CliError> {
    let bytes = match cli.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&envelope(name, a.json.clone())).map_err(|e| CliError::data(e.to_string()))?;
            s.push('\n');
            s.into_bytes()
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| CliError::data(e.to_string());
            w.write_record(&a.header).map_err(csv_err)?;
            for r in &a.rows {
                w.write_record(r).map_err(csv_err)?;
            }
            w.into_inner().map_err(|e| CliError::data(e.to_string()))?
        }
    };
    match &cli.out {
        Some(path) => fs::write(path, bytes).map_err(|e| io_error(path, e)),
        None => std::io::stdout().write_all(&bytes).map_err(|e| CliError { code: EXIT_IO, kind: "io", message: e.to_string() }),
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<SimConfig, CliError> {
    let mut cfg = match path {
        None => SimConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_error(p, e))?;
            let is_toml = p.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
            let parsed: SimConfig = if is_toml {
                toml::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?
            } else {
                serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?
            };
            parsed.validate().map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
            parsed
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn moments(cli: &Cli, max_degree: u32) -> Result<Artifact, CliError> {
    let rows = gibbs::moments_table(cli.kt, max_degree)?;
    let pass = rows.iter().all(|r| r.abs_error <= 1e-9 * r.closed_form.abs().max(1.0));
    let table = rows.iter().map(|r| vec![r.m.to_string(), r.n.to_string(), f(r.closed_form), f(r.symbolic_eval), f(r.abs_error)]).collect();
    let json = json!({ "kt": cli.kt, "rows": rows });
    Ok(Artifact::table(json, &["m", "n", "closed_form", "symbolic_eval", "abs_error"], table).with_verdict(pass))
}

fn genfun_check(cli: &Cli, order: u32, configs: usize, factors: usize) -> Result<Artifact, CliError> {
    if factors == 0 || configs == 0 {
        return Err(CliError::flag("--configs and --factors must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(0));
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for k in 0..configs {
        let fs: Vec<FVector> = (0..factors)
            .map(|_| FVector::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        for c in gibbs::genfun_taylor_check(&fs, cli.kt, order)? {
            worst = worst.max(c.abs_error);
            let index = c.index.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
            rows.push(vec![k.to_string(), index, f(c.closed_form.re), f(c.closed_form.im), f(c.symbolic.re), f(c.symbolic.im), f(c.abs_error)]);
        }
    }
    let pass = worst <= 1e-12;
    let json = json!({ "order": order, "configs": configs, "factors": factors, "max_abs_error": worst, "pass": pass, "coefficients": rows.len() });
    Ok(Artifact::table(json, &["config", "index", "closed_re", "closed_im", "symbolic_re", "symbolic_im", "abs_error"], rows).with_verdict(pass))
}

fn gns(cli: &Cli, max_degree: usize, kappa: f64, spectrum: bool) -> Result<Artifact, CliError> {
    let rep = FockRep::build(cli.n, cli.kt)?;
    let g = CanonicalGenerators::new(cli.kt)?;
    let words = verify::generator_words(&g, max_degree);
    let vectors = words.iter().map(|w| rep.gns_vector(w)).collect::<Result<Vec<_>, _>>()?;
    let mut gns_error = 0.0f64;
    for (x, u) in words.iter().zip(&vectors) {
        let xd = x.adjoint();
        for (y, v) in words.iter().zip(&vectors) {
            gns_error = gns_error.max((fock::inner(u, v) - gibbs::eval(&xd.multiply(y))).norm());
        }
    }
    let order = cli.n / 2;
    let hermite = rep.hermite_basis(order)?.orthonormality_error();
    let low = rep.lowering_q(order - 1)?;
    let window = rep.window_residual();
    let t = rep.translate_check(kappa)?;
    let mut pairs = vec![
        ("N", cli.n.to_string()),
        ("kt", f(cli.kt)),
        ("word_pairs", (words.len() * words.len()).to_string()),
        ("gns_max_error", f(gns_error)),
        ("hermite_orthonormality_error", f(hermite)),
        ("lowering_on_gibbs", f(low.annihilates_gibbs)),
        ("lowering_ccr_residual", f(low.ccr_residual)),
        ("commutator_window_residual", f(window)),
        ("kappa", f(kappa)),
        ("translated_mean", f(t.mean)),
        ("translated_variance", f(t.variance)),
        ("realized_sign", t.realized_sign.to_string()),
    ];
    let mut json = json!({
        "N": cli.n, "kt": cli.kt, "gns_max_error": gns_error, "hermite_orthonormality_error": hermite,
        "lowering_on_gibbs": low.annihilates_gibbs, "lowering_ccr_residual": low.ccr_residual,
        "commutator_window_residual": window, "translation": t,
    });
    if spectrum {
        let ev = rep.liouvillian_spectrum()?;
        let asym = ev.iter().zip(ev.iter().rev()).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
        pairs.push(("spectrum_min", f(ev[0])));
        pairs.push(("spectrum_max", f(ev[ev.len() - 1])));
        pairs.push(("spectrum_asymmetry", f(asym)));
        json["spectrum"] = json!({ "min": ev[0], "max": ev[ev.len() - 1], "asymmetry": asym, "eigenvalues": ev });
    }
    Ok(Artifact::key_values(json, pairs))
}

fn word_labels(max_len: usize) -> Vec<String> {
    let mut out = vec!["1".to_string()];
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        layer = layer.iter().flat_map(|w| ["q", "p", "Q", "P"].map(|x| format!("{w}{x}"))).collect();
        out.extend(layer.iter().cloned());
    }
    out
}

fn cx(z: Complex64) -> [String; 2] {
    [f(z.re), f(z.im)]
}

fn gns_check(cli: &Cli, check: GnsCheck, max_degree: usize, kappa: f64) -> Result<Artifact, CliError> {
    let rep = FockRep::build(cli.n, cli.kt)?;
    let g = CanonicalGenerators::new(cli.kt)?;
    let tol = 1e-9;
    let (header, rows, worst): (&[&str], Vec<Vec<String>>, f64) = match check {
        GnsCheck::Inner | GnsCheck::Projection => {
            let words = verify::generator_words(&g, max_degree);
            let labels = word_labels(max_degree);
            let mut rows = Vec::new();
            let mut worst = 0.0f64;
            for (x, lx) in words.iter().zip(&labels) {
                for (y, ly) in words.iter().zip(&labels) {
                    let (lhs, rhs) = if matches!(check, GnsCheck::Inner) {
                        (rep.gns_inner(x, y)?, gibbs::eval(&x.adjoint().multiply(y)))
                    } else {
                        let r = rep.gibbs_projection_check(x, y)?;
                        (r.lhs, r.rhs)
                    };
                    let err = (lhs - rhs).norm();
                    worst = worst.max(err);
                    let [lr, li] = cx(lhs);
                    let [rr, ri] = cx(rhs);
                    rows.push(vec![lx.clone(), ly.clone(), lr, li, rr, ri, f(err)]);
                }
            }
            (&["x", "y", "fock_re", "fock_im", "symbolic_re", "symbolic_im", "abs_error"], rows, worst)
        }
        GnsCheck::Hermite => {
            let basis = rep.hermite_basis(cli.n / 2)?;
            let mut rows = Vec::new();
            let mut worst = 0.0f64;
            for (m, u) in basis.vectors.iter().enumerate() {
                for (n, v) in basis.vectors.iter().enumerate() {
                    let overlap = u.dot(v);
                    let err = (overlap - if m == n { 1.0 } else { 0.0 }).abs();
                    worst = worst.max(err);
                    rows.push(vec![m.to_string(), n.to_string(), f(overlap), f(err)]);
                }
            }
            (&["m", "n", "overlap", "abs_error"], rows, worst)
        }
        GnsCheck::Lowering => {
            let low = rep.lowering_q(cli.n / 2 - 1)?;
            let mut rows: Vec<Vec<String>> = low
                .number_expectations
                .iter()
                .enumerate()
                .map(|(m, v)| vec![format!("number_H{m}"), f(*v), f(m as f64), f((v - m as f64).abs())])
                .collect();
            rows.push(vec!["a_q_on_gibbs".into(), f(low.annihilates_gibbs), f(0.0), f(low.annihilates_gibbs)]);
            rows.push(vec!["ccr".into(), f(low.ccr_residual), f(0.0), f(low.ccr_residual)]);
            let worst = rows.iter().map(|r| r[3].parse::<f64>().unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
            (&["quantity", "numeric", "target", "abs_error"], rows, worst)
        }
        GnsCheck::Translate => {
            let mut rows = Vec::new();
            let mut worst = 0.0f64;
            for k in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                let t = rep.translate_check(k * kappa)?;
                worst = worst.max(t.mean_abs_error).max(t.variance_error);
                rows.push(vec![
                    f(t.kappa),
                    f(t.mean),
                    f(t.variance),
                    t.realized_sign.to_string(),
                    f(t.mean_abs_error),
                    f(t.variance_error),
                ]);
            }
            (&["kappa", "mean", "variance", "realized_sign", "mean_abs_error", "variance_error"], rows, worst)
        }
        GnsCheck::Polarization => {
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(0));
            let mut rows = Vec::new();
            let mut worst = 0.0f64;
            for trial in 0..20 {
                let mut v = || {
                    measurement::CVector::from_fn(cli.n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                };
                let (v1, v2) = (v(), v());
                let r = fock::polarization_check(&v1, &v2)?;
                worst = worst.max(r.residual);
                rows.push(vec![trial.to_string(), r.lhs_rank.to_string(), f(r.residual)]);
            }
            (&["trial", "rank", "residual"], rows, worst)
        }
        GnsCheck::Modulation => {
            let grid: Vec<f64> = (-8..=8).map(|i| i as f64 * 0.5 * cli.kt.sqrt()).collect();
            let mut rows = Vec::new();
            let mut worst = 0.0f64;
            for n in 0..=3.min(cli.n / 2) {
                let Ok(r) = rep.modulated_density_check(n, &grid) else { break };
                for m in &r.moments {
                    worst = worst.max(m.abs_error);
                    rows.push(vec![n.to_string(), format!("moment_q{}", 2 * m.k), f(m.numeric), f(m.analytic), f(m.abs_error)]);
                }
                for d in &r.rows {
                    worst = worst.max(d.abs_error);
                    rows.push(vec![n.to_string(), format!("density_at_{}", d.q), f(d.numeric), f(d.target), f(d.abs_error)]);
                }
            }
            (&["n", "quantity", "numeric", "target", "abs_error"], rows, worst)
        }
    };
    let json = json!({
        "check": check.to_possible_value().map(|v| v.get_name().to_string()),
        "columns": header,
        "N": cli.n,
        "kt": cli.kt,
        "max_abs_error": worst,
        "rows": rows,
    });
    Ok(Artifact::table(json, header, rows).with_verdict(worst <= tol))
}

fn luders_demo(cli: &Cli, dim: usize) -> Result<Artifact, CliError> {
    let r = measurement::luders_demo(dim, cli.seed.unwrap_or(0))?;
    let pass = r.identity_residual <= 1e-11 && r.commutant_residual <= 1e-11 && r.idempotence_residual <= 1e-11;
    let pairs = vec![
        ("dim", r.dim.to_string()),
        ("measurement_side", f(r.measurement_side)),
        ("state_side", f(r.state_side)),
        ("identity_residual", f(r.identity_residual)),
        ("commutant_residual", f(r.commutant_residual)),
        ("idempotence_residual", f(r.idempotence_residual)),
        ("trace_error", f(r.trace_error)),
        ("min_eigenvalue", f(r.min_eigenvalue)),
    ];
    Ok(Artifact::key_values(serde_json::to_value(&r).map_err(|e| CliError::data(e.to_string()))?, pairs).with_verdict(pass))
}

fn instrument(path: &Path) -> Result<Artifact, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let setup: InstrumentSetup = serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let psi = setup.psi.as_ref().ok_or_else(|| CliError::data("setup needs a `psi` state vector"))?;
    let r = measurement::instrument_joint(&setup, &measurement::vector_from_json(psi)).map_err(|e| CliError::data(e.to_string()))?;
    let rows = r
        .b_outcomes
        .iter()
        .enumerate()
        .map(|(j, b)| {
            vec![
                f(*b),
                f(r.p_b_without_a[j]),
                f(r.p_b_with_a[j]),
                f(r.p_b_luders_measurement[j]),
                f(r.p_b_luders_state[j]),
                f(r.p_b_bullet[j]),
            ]
        })
        .collect();
    let json = serde_json::to_value(&r).map_err(|e| CliError::data(e.to_string()))?;
    Ok(Artifact::table(json, &["b", "p_without_a", "p_with_a", "luders_measurement", "luders_state", "bullet"], rows))
}

fn bell_counts(path: Option<&Path>) -> Result<Artifact, CliError> {
    let table = match path {
        None => CountTable::table1(),
        Some(p) => CountTable::from_path(p).map_err(|e| match e {
            Error::Io(io) => io_error(p, io),
            other => CliError::data(format!("{}: {other}", p.display())),
        })?,
    };
    let c = bell::correlations_from_counts(&table).map_err(|e| CliError::data(e.to_string()))?;
    let mut rows = Vec::new();
    for (name, (a, b), e) in [("E00", (0, 0), c.e00), ("E10", (1, 0), c.e10), ("E01", (0, 1), c.e01), ("E11", (1, 1), c.e11)] {
        rows.push(vec![name.to_string(), f(e), table.block_total(a, b).to_string()]);
    }
    rows.push(vec!["S".into(), f(c.s), table.total().to_string()]);
    let json = json!({ "counts": table, "correlations": c, "pattern": "E00 + E01 + E11 - E10" });
    Ok(Artifact::table(json, &["quantity", "value", "events"], rows))
}

fn bell_appendix() -> Artifact {
    let m = bell::appendix_b_model();
    let r = bell::landau_c(&m.ops);
    let id = measurement::CMatrix::identity(4, 4);
    let r2 = 2f64.sqrt();
    let e = m.ops.correlations(&m.rho);
    let s = ChshPattern::default().s(e);
    let inv = [&m.ops.a, &m.ops.a_prime, &m.ops.b, &m.ops.b_prime].iter().map(|x| measurement::max_abs(&(*x * *x - &id))).fold(0.0, f64::max);
    let checks: Vec<(&str, f64, f64, f64)> = vec![
        ("S", s, 2.0 * r2, 1e-12),
        ("Tr[C rho]", m.ops.chsh_value(&m.rho), -2.0 * r2, 1e-12),
        ("Tr[C rho+]", m.ops.chsh_value(&m.rho_plus), 2.0 * r2, 1e-12),
        ("max |x^2 - 1|", inv, 0.0, 0.0),
        ("max |C - printed|", measurement::max_abs(&(&r.c - measurement::real_matrix(4, 4, &verify::PRINTED_C))), 0.0, 0.0),
        ("max |C^2 - printed|", measurement::max_abs(&(&r.c_squared - measurement::real_matrix(4, 4, &verify::PRINTED_C2))), 0.0, 0.0),
        ("max |C^3 - 8C|", r.cube_residual, 0.0, 0.0),
        ("Tr[C]", r.trace_c.re, 0.0, 0.0),
        ("Tr[C^2]", r.trace_c_squared.re, 16.0, 0.0),
        ("max |C^2 - 4 - [a,a'][b,b']|", r.identity_residual, 0.0, 1e-11),
        ("max |psi psi^+ - rho|", measurement::max_abs(&(&m.psi * m.psi.adjoint() - &m.rho)), 0.0, 1e-12),
        ("E00", e[0], -r2 / 2.0, 1e-12),
        ("E10", e[1], r2 / 2.0, 1e-12),
        ("E01", e[2], -r2 / 2.0, 1e-12),
        ("E11", e[3], -r2 / 2.0, 1e-12),
    ];
    let mut all = true;
    let mut rows = Vec::new();
    let mut list = Vec::new();
    for (name, value, expected, tol) in checks {
        let ok = (value - expected).abs() <= tol;
        all &= ok;
        let status = if ok { "PASS" } else { "FAIL" };
        rows.push(vec![name.to_string(), f(value), f(expected), status.to_string()]);
        list.push(json!({ "check": name, "value": value, "expected": expected, "tolerance": tol, "status": status }));
    }
    let json = json!({ "S": s, "checks": list, "pass": all, "matrices": {
        "C": measurement::matrix_to_json(&r.c), "C2": measurement::matrix_to_json(&r.c_squared),
    }});
    Artifact::table(json, &["check", "value", "expected", "status"], rows).with_verdict(all)
}

fn cat(alpha: f64, beta: Complex64) -> Result<Artifact, CliError> {
    let state = CatState::new(alpha, beta).map_err(|e| CliError::flag(e.to_string()))?;
    let est = bell::cat_discriminate(&state.matrix())?;
    let class = serde_json::to_value(est.class).map_err(|e| CliError::data(e.to_string()))?;
    let pairs = vec![
        ("alpha", f(est.alpha)),
        ("c1", f(est.c1)),
        ("c2", f(est.c2)),
        ("beta_re", f(est.beta.re)),
        ("beta_im", f(est.beta.im)),
        ("class", class.as_str().unwrap_or_default().to_string()),
    ];
    Ok(Artifact::key_values(json!({ "planted_beta": beta, "estimate": est }), pairs))
}

fn sim_events(cfg: &SimConfig, out: &Path, compressed: bool) -> Result<Value, CliError> {
    let s = coincidence::generate(cfg)?;
    let (alice, bob) = if compressed {
        (
            coincidence::compress(&s.alice, &s.alice_eom, cfg.eom_blanking_ns),
            coincidence::compress(&s.bob, &s.bob_eom, cfg.eom_blanking_ns),
        )
    } else {
        (s.alice, s.bob)
    };
    let events = coincidence::merge_streams(&alice, &bob);
    coincidence::write_events_path(out, &events).map_err(|e| match e {
        Error::Io(io) => io_error(out, io),
        other => other.into(),
    })?;
    let seconds = cfg.duration_ns as f64 * 1e-9;
    Ok(json!({
        "config": cfg,
        "events_file": out.display().to_string(),
        "pairs_emitted": s.pairs_emitted,
        "alice_events": alice.len(),
        "bob_events": bob.len(),
        "alice_singles_rate": alice.len() as f64 / seconds,
        "bob_singles_rate": bob.len() as f64 / seconds,
        "expected_singles_rate": cfg.expected_singles_rate(),
    }))
}

fn read_station(path: &Path, dead_time: Option<u64>, alice: bool) -> Result<Vec<coincidence::EventRecord>, CliError> {
    let (a, b) = coincidence::ingest(path, dead_time).map_err(|e| match e {
        Error::Io(io) => io_error(path, io),
        other => CliError::data(format!("{}: {other}", path.display())),
    })?;
    Ok(if alice { a } else { b })
}

fn correlation_rows(table: &CountTable) -> (Vec<Vec<String>>, Value) {
    let c = bell::correlations_from_counts(table).ok();
    let errs = coincidence::correlation_errors(table);
    let mut rows = Vec::new();
    for (k, name) in ["E00", "E10", "E01", "E11"].iter().enumerate() {
        let e = c.map(|c| f(c.as_array()[k])).unwrap_or_default();
        let s = errs.map(|e| f(e.0[k])).unwrap_or_default();
        rows.push(vec![name.to_string(), e, s]);
    }
    rows.push(vec!["S".into(), c.map(|c| f(c.s)).unwrap_or_default(), errs.map(|e| f(e.1)).unwrap_or_default()]);
    (rows, json!({ "correlations": c, "sigma_e": errs.map(|e| e.0), "sigma_s": errs.map(|e| e.1) }))
}

fn coincide(alice: &Path, bob: &Path, window_ns: u64, dead_time: Option<u64>) -> Result<Artifact, CliError> {
    if window_ns == 0 {
        return Err(CliError::flag("--window-ns must be positive"));
    }
    let a = read_station(alice, dead_time, true)?;
    let b = read_station(bob, dead_time, false)?;
    let m = coincidence::match_events(&a, &b, window_ns);
    let (rows, stats) = correlation_rows(&m.table);
    let json = json!({
        "window_ns": window_ns,
        "alice_events": a.len(),
        "bob_events": b.len(),
        "coincidences": m.pairs.len(),
        "counts": m.table,
        "statistics": stats,
    });
    Ok(Artifact::table(json, &["quantity", "value", "sigma"], rows))
}

fn time_resolved(cfg: &SimConfig, cycles: u64, slice_ns: u64) -> Result<Artifact, CliError> {
    if cycles == 0 || slice_ns == 0 {
        return Err(CliError::flag("--cycles and --slice-ns must be positive"));
    }
    let r = coincidence::time_resolved(cfg, cycles, slice_ns)?;
    let opt = |x: Option<f64>| x.map(f).unwrap_or_default();
    let rows = r
        .slices
        .iter()
        .map(|s| {
            let e = s.correlations.map(|c| c.as_array());
            let mut row = vec![s.start_ns.to_string(), s.width_ns.to_string()];
            row.extend(s.singles_rate.iter().flatten().map(|x| f(*x)));
            row.push(s.coincidences.to_string());
            row.extend((0..4).map(|k| opt(e.map(|e| e[k]))));
            row.push(opt(s.correlations.map(|c| c.s)));
            row.push(opt(s.sigma_s));
            row
        })
        .collect();
    let json = serde_json::to_value(&r).map_err(|e| CliError::data(e.to_string()))?;
    Ok(Artifact::table(
        json!({ "config": cfg, "consistent_totals": r.totals_consistent(), "report": json }),
        &["start_ns", "width_ns", "rate_a1", "rate_a2", "rate_b1", "rate_b2", "coincidences", "E00", "E10", "E01", "E11", "S", "sigma_S"],
        rows,
    ))
}

fn verify_all() -> Artifact {
    let results = verify::run_all();
    for r in &results {
        eprintln!("{}", r.line());
    }
    let pass = results.iter().all(|r| r.pass);
    let rows = results
        .iter()
        .map(|r| vec![r.id.to_string(), r.name.to_string(), if r.pass { "PASS" } else { "FAIL" }.to_string(), f(r.elapsed_s), f(r.budget_s), r.detail.clone()])
        .collect();
    Artifact::table(json!({ "pass": pass, "criteria": results }), &["id", "criterion", "status", "elapsed_s", "budget_s", "detail"], rows)
        .with_verdict(pass)
}
