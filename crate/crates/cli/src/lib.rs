//! Command-line front end: `certify`, `verify`, `factor`, `order` and
//! `distribution`.
//!
//! [`run`] takes the argument list and two writers and returns the process
//! exit status, so the whole surface can be driven from tests.

pub mod document;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use num_traits::One;
use qprime::ntheory::{self, nat};
use qprime::order_finding::default_max_attempts;
use qprime::qsim::{self, QuantumState, DEFAULT_WIDTH_CAP};
use qprime::{
    certify, find_order, verify_certificate, CertifyConfig, CertifyOutcome, CostLedger,
    EngineKind, Error, FactorConfig, Natural, ShorConfig, Verdict, WitnessMode,
};

use crate::document::{engine_name, CertificateDocument};

pub mod exit {
    pub const OK: i32 = 0;
    /// Composite target, or a certificate that does not verify.
    pub const NEGATIVE: i32 = 1;
    pub const INCONCLUSIVE: i32 = 2;
    pub const USAGE: i32 = 64;
    pub const DATA: i32 = 65;
    /// Missing input file, or a register wider than the simulator allows.
    pub const NO_INPUT_OR_CAPACITY: i32 = 66;
    pub const SOFTWARE: i32 = 70;
}

#[derive(Parser, Debug)]
#[command(name = "qprime", version, about = "Primality certificates from simulated order finding")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Order-finding engine; defaults to `sim` when the register fits, else `sample`.
    #[arg(long, global = true, value_enum)]
    engine: Option<EngineArg>,

    /// Trial-division bound used before any order finding.
    #[arg(long, global = true)]
    trial_bound: Option<String>,

    /// Random bases tried per splitting step.
    #[arg(long, global = true)]
    max_retries: Option<u32>,

    /// Witness form for certificates: one base (1) or one per prime (2).
    #[arg(long, global = true, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    theorem: u8,

    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,

    /// Smallest probability listed by `distribution` (exclusive).
    #[arg(long, global = true, default_value_t = 1e-9)]
    min_prob: f64,

    /// Print every sampled measurement to standard error.
    #[arg(long, global = true)]
    trace: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify N prime, or show it composite.
    Certify { n: String },
    /// Check a certificate file.
    Verify { path: PathBuf },
    /// Factor M completely.
    Factor { m: String },
    /// Multiplicative order of BASE modulo M.
    Order { m: String, base: String },
    /// Output distribution of the period-finding register for BASE modulo M.
    Distribution {
        m: String,
        base: String,
        /// Post-select the second register on this value instead of measuring it.
        #[arg(long)]
        residue: Option<u64>,
        /// First-register width; defaults to the smallest L with 2^L >= M^2.
        #[arg(long)]
        width: Option<u32>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    Sim,
    Sample,
    Oracle,
}

impl From<EngineArg> for EngineKind {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Sim => EngineKind::StateVector,
            EngineArg::Sample => EngineKind::AnalyticSampling,
            EngineArg::Oracle => EngineKind::ClassicalOracle,
        }
    }
}

/// Engine used when `--engine` is absent.
pub fn default_engine(m: &Natural) -> EngineKind {
    match qsim::register_width_for(m) {
        Ok(w) if w <= DEFAULT_WIDTH_CAP => EngineKind::StateVector,
        _ => EngineKind::AnalyticSampling,
    }
}

/// Parses, dispatches and returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let mut ctx = Ctx { cli: &cli, out, err };
    let result = match &cli.command {
        Command::Certify { n } => ctx.certify(n),
        Command::Verify { path } => ctx.verify(path),
        Command::Factor { m } => ctx.factor(m),
        Command::Order { m, base } => ctx.order(m, base),
        Command::Distribution {
            m,
            base,
            residue,
            width,
        } => ctx.distribution(m, base, *residue, *width),
    };
    match result {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(ctx.err, "qprime: {msg}");
            code
        }
    }
}

struct Failure(i32, String);

type CmdResult = Result<i32, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure(exit::USAGE, msg.into())
}

fn io_fail(e: std::io::Error) -> Failure {
    Failure(exit::SOFTWARE, format!("write failed: {e}"))
}

fn lib_fail(e: Error) -> Failure {
    let code = match &e {
        Error::Domain(_) => exit::USAGE,
        Error::Capacity { .. } => exit::NO_INPUT_OR_CAPACITY,
        Error::Inconclusive { .. } => exit::INCONCLUSIVE,
        Error::Usage(_) => exit::SOFTWARE,
    };
    Failure(code, e.to_string())
}

fn parse_natural(name: &str, s: &str) -> Result<Natural, Failure> {
    document::parse_decimal(s).map_err(|_| usage(format!("{name} must be a non-negative decimal integer, got {s:?}")))
}

struct Ctx<'a> {
    cli: &'a Cli,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn engine_for(&self, m: &Natural) -> EngineKind {
        self.cli.engine.map(Into::into).unwrap_or_else(|| default_engine(m))
    }

    fn trial_bound(&self) -> Result<Option<Natural>, Failure> {
        self.cli
            .trial_bound
            .as_deref()
            .map(|s| parse_natural("--trial-bound", s))
            .transpose()
    }

    fn shor_config(&self) -> ShorConfig {
        let mut cfg = ShorConfig::default();
        if let Some(r) = self.cli.max_retries {
            cfg.max_base_retries = r.max(1);
        }
        cfg
    }

    fn certify(&mut self, n: &str) -> CmdResult {
        let n = parse_natural("N", n)?;
        if n < nat(2) {
            return Err(usage(format!("N must be at least 2, got {n}")));
        }
        let engine = self.engine_for(&n);
        let mode = if self.cli.theorem == 1 {
            WitnessMode::Theorem1
        } else {
            WitnessMode::Theorem2
        };
        let shor = self.shor_config();
        let config = CertifyConfig {
            engine,
            seed: self.cli.seed,
            mode,
            trial_bound_override: self.trial_bound()?,
            max_base_retries: shor.max_base_retries,
            ..CertifyConfig::default()
        };
        let run = certify(&n, &config).map_err(lib_fail)?;
        match run.outcome {
            CertifyOutcome::Prime(cert) => {
                let doc = CertificateDocument::new(&cert, self.cli.seed, engine, mode, Some(&run.report));
                writeln!(self.out, "{}", doc.to_json()).map_err(io_fail)?;
                Ok(exit::OK)
            }
            CertifyOutcome::Composite { witness } => {
                if self.cli.json {
                    let v = serde_json::json!({
                        "target": n.to_string(),
                        "verdict": "composite",
                        "witness": witness.to_string(),
                    });
                    writeln!(self.out, "{v:#}").map_err(io_fail)?;
                } else {
                    writeln!(self.out, "composite: {n} fails the test to base {witness}")
                        .map_err(io_fail)?;
                }
                Ok(exit::NEGATIVE)
            }
            CertifyOutcome::Inconclusive { reason } => {
                writeln!(self.err, "qprime: inconclusive: {reason}").map_err(io_fail)?;
                Ok(exit::INCONCLUSIVE)
            }
        }
    }

    fn verify(&mut self, path: &std::path::Path) -> CmdResult {
        let text = std::fs::read_to_string(path).map_err(|e| {
            let code = if e.kind() == std::io::ErrorKind::InvalidData {
                exit::DATA
            } else {
                exit::NO_INPUT_OR_CAPACITY
            };
            Failure(code, format!("cannot read {}: {e}", path.display()))
        })?;
        let cert = CertificateDocument::from_json(&text)
            .and_then(|doc| doc.certificate())
            .map_err(|e| Failure(exit::DATA, format!("{}: {e}", path.display())))?;
        match verify_certificate(&cert) {
            Verdict::Valid => {
                writeln!(self.out, "valid: {} is prime", cert.target).map_err(io_fail)?;
                Ok(exit::OK)
            }
            invalid @ Verdict::Invalid { .. } => {
                writeln!(self.out, "{invalid}").map_err(io_fail)?;
                Ok(exit::NEGATIVE)
            }
        }
    }

    fn factor(&mut self, m: &str) -> CmdResult {
        let m = parse_natural("M", m)?;
        if m < nat(2) {
            return Err(usage(format!("M must be at least 2, got {m}")));
        }
        let engine = self.engine_for(&m);
        let config = FactorConfig {
            shor: self.shor_config(),
            trial_bound: self.trial_bound()?,
            max_quantum_calls: None,
        };
        let ledger = CostLedger::new();
        let mut rng = qprime::seeded_rng(self.cli.seed);
        match qprime::factor_completely(&m, engine, &mut rng, &config, &ledger) {
            Ok(f) => {
                if self.cli.json {
                    let pairs: Vec<_> = f
                        .prime_powers()
                        .iter()
                        .map(|pp| serde_json::json!([pp.prime.to_string(), pp.exponent]))
                        .collect();
                    let v = serde_json::json!({ "target": m.to_string(), "factorization": pairs });
                    writeln!(self.out, "{v}").map_err(io_fail)?;
                } else {
                    writeln!(self.out, "{f}").map_err(io_fail)?;
                }
                Ok(exit::OK)
            }
            Err(Error::Inconclusive { reason, partial }) => {
                let unresolved: Vec<String> = partial
                    .unresolved
                    .iter()
                    .map(|(x, e)| if *e == 1 { x.to_string() } else { format!("({x})^{e}") })
                    .collect();
                writeln!(
                    self.err,
                    "qprime: inconclusive: {reason}; found [{}], unresolved [{}]",
                    partial.primes,
                    unresolved.join(" ")
                )
                .map_err(io_fail)?;
                Ok(exit::INCONCLUSIVE)
            }
            Err(e) => Err(lib_fail(e)),
        }
    }

    fn order(&mut self, m: &str, base: &str) -> CmdResult {
        let m = parse_natural("M", m)?;
        let base = parse_natural("BASE", base)?;
        if m < nat(3) || base <= Natural::one() || base >= m {
            return Err(usage(format!("order needs 1 < BASE < M, got BASE={base}, M={m}")));
        }
        let g = ntheory::gcd(&base, &m).map_err(lib_fail)?;
        if !g.is_one() {
            writeln!(self.out, "{g}").map_err(io_fail)?;
            return Err(usage(format!("{base} and {m} share the factor {g}")));
        }
        let engine = self.engine_for(&m);
        let attempts = match engine {
            EngineKind::ClassicalOracle => 1,
            _ => default_max_attempts(qsim::register_width_for(&m).map_err(lib_fail)?),
        };
        let ledger = CostLedger::new();
        let mut rng = qprime::seeded_rng(self.cli.seed);
        let found = find_order(&m, &base, engine, &mut rng, attempts, DEFAULT_WIDTH_CAP, &ledger)
            .map_err(lib_fail)?;
        let Some(found) = found else {
            writeln!(self.err, "qprime: order not recovered in {attempts} attempts").map_err(io_fail)?;
            return Ok(exit::INCONCLUSIVE);
        };
        if self.cli.trace {
            for (i, c) in found.sampled_cs.iter().enumerate() {
                writeln!(self.err, "attempt {}: c = {c}", i + 1).map_err(io_fail)?;
            }
        }
        if self.cli.json {
            let v = serde_json::json!({
                "modulus": m.to_string(),
                "base": base.to_string(),
                "order": found.order.to_string(),
                "engine": engine_name(engine),
                "attempts": found.attempts_used,
            });
            writeln!(self.out, "{v}").map_err(io_fail)?;
        } else {
            writeln!(self.out, "{}", found.order).map_err(io_fail)?;
        }
        Ok(exit::OK)
    }

    fn distribution(
        &mut self,
        m: &str,
        base: &str,
        residue: Option<u64>,
        width: Option<u32>,
    ) -> CmdResult {
        let m = parse_natural("M", m)?;
        let base = parse_natural("BASE", base)?;
        if m < nat(3) || base <= Natural::one() || base >= m {
            return Err(usage(format!("distribution needs 1 < BASE < M, got BASE={base}, M={m}")));
        }
        let width = match width {
            Some(w) => w,
            None => qsim::register_width_for(&m).map_err(lib_fail)?,
        };
        let state = QuantumState::prepare_uniform_capped(width, DEFAULT_WIDTH_CAP)
            .and_then(|s| s.apply_modular_exponentiation(&base, &m))
            .map_err(lib_fail)?;
        let outcome = match residue {
            Some(r) => state.collapse_second_register(r),
            None => state.measure_second_register(&mut qprime::seeded_rng(self.cli.seed)),
        }
        .map_err(lib_fail)?;
        if residue.is_none() {
            writeln!(self.err, "measured residue {}", outcome.observed_value).map_err(io_fail)?;
        }
        let dist = outcome.collapsed_state.apply_qft().map_err(lib_fail)?.output_distribution();
        let mut rows: Vec<(usize, f64)> = dist
            .into_iter()
            .enumerate()
            .filter(|&(_, p)| p > self.cli.min_prob)
            .collect();
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        if self.cli.json {
            let v: Vec<_> = rows
                .iter()
                .map(|&(c, p)| serde_json::json!({ "c": c.to_string(), "probability": p }))
                .collect();
            writeln!(self.out, "{}", serde_json::Value::Array(v)).map_err(io_fail)?;
        } else {
            for (c, p) in rows {
                writeln!(self.out, "{c}\t{p:.12}").map_err(io_fail)?;
            }
        }
        Ok(exit::OK)
    }
}
