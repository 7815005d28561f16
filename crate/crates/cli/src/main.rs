use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use qlwave_cli::config::{ConfigError, NullFormSection, RunConfig};
use qlwave_cli::experiment::{audit_checks, audit_reports, run_config_file, validate_metric, RunError};
use qlwave_cli::suites::{suite_names, Acceptance};
use qlwave_core::decay::{default_window, fit_exponent};
use qlwave_core::diagnostics::EnergyLedger;
use qlwave_core::geometry::{check_null_condition, NullFormTensor};

const PASS: u8 = 0;
const FAIL: u8 = 1;
const CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "qlwave", version, about = "Quasilinear wave evolution and decay diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifact directory.
    Run {
        config: PathBuf,
        /// Output directory, overriding the config and the environment.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an acceptance suite by name, or `all`.
    Accept {
        suite: String,
        #[arg(long, default_value = "qlwave-acceptance")]
        out: PathBuf,
    },
    /// Audit the multiplier identities described by a config's `[audit]` table.
    Audit {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a power law to one quantity of a ledger CSV.
    Fit {
        ledger: PathBuf,
        #[arg(long, default_value = "energy")]
        quantity: String,
        /// Window in tau, e.g. `--window 8 32`.
        #[arg(long, num_args = 2)]
        window: Option<Vec<f64>>,
        /// Fail unless the exponent is at most this.
        #[arg(long)]
        max_exponent: Option<f64>,
    },
    /// Check the null condition of a tensor given as JSON.
    CheckNull {
        tensor: PathBuf,
        #[arg(long, default_value_t = 400)]
        samples: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Check a config's metric against the decay envelopes.
    ValidateMetric { config: PathBuf },
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("reports serialize"));
}

fn run_error(e: RunError) -> u8 {
    eprintln!("error: {e}");
    match e {
        RunError::Config(_) => CONFIG,
        RunError::Runtime(_) => FAIL,
    }
}

fn config_error(e: ConfigError) -> u8 {
    eprintln!("error: {e}");
    CONFIG
}

fn verdict_code(pass: bool) -> u8 {
    if pass {
        PASS
    } else {
        FAIL
    }
}

fn run(config: &Path, out: Option<&Path>) -> u8 {
    match run_config_file(config, out) {
        Ok(o) => {
            print_json(&o.verdict);
            eprintln!("artifacts in {}", o.dir.display());
            verdict_code(o.verdict.pass())
        }
        Err(e) => run_error(e),
    }
}

fn accept(suite: &str, out: &Path) -> u8 {
    let mut acc = Acceptance::new(out);
    let names: Vec<&str> = if suite == "all" { suite_names() } else { vec![suite] };
    let mut pass = true;
    let mut results = Vec::new();
    for name in names {
        match acc.run(name) {
            Ok(r) => {
                eprintln!("{}", r.line());
                pass &= r.pass;
                results.push(r);
            }
            Err(e) => {
                eprintln!("error: {e}");
                return CONFIG;
            }
        }
    }
    print_json(&results);
    verdict_code(pass)
}

fn audit(config: &Path, out: Option<&Path>) -> u8 {
    let cfg = match RunConfig::load(config) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    if cfg.audit.is_none() {
        return config_error(ConfigError::field("audit", "the config has no [audit] table"));
    }
    let reports = match rayon_scope(&cfg, || audit_reports(&cfg)) {
        Ok(r) => r,
        Err(e) => return run_error(e),
    };
    let mut checks = Vec::new();
    for rep in &reports {
        match audit_checks(&cfg, rep) {
            Ok(c) => checks.extend(c),
            Err(e) => return run_error(e),
        }
    }
    let dir = cfg.resolve_output(out);
    let body = serde_json::json!({ "reports": reports, "checks": checks });
    if std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(dir.join("audit.json"), body.to_string())).is_err() {
        eprintln!("warning: could not write {}", dir.display());
    }
    print_json(&body);
    verdict_code(checks.iter().all(|c| c.pass))
}

fn rayon_scope<T>(cfg: &RunConfig, f: impl FnOnce() -> Result<T, RunError> + Send) -> Result<T, RunError>
where
    T: Send,
{
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.resolve_threads()? {
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| RunError::Runtime(e.into()))?;
    pool.install(f)
}

fn fit(ledger: &Path, quantity: &str, window: Option<Vec<f64>>, max_exponent: Option<f64>) -> u8 {
    let text = match std::fs::read_to_string(ledger) {
        Ok(t) => t,
        Err(e) => return config_error(ConfigError::Read { path: ledger.into(), source: e }),
    };
    let table = match EnergyLedger::parse_csv(&text) {
        Ok(t) => t,
        Err(e) => return config_error(ConfigError::Parse(e.to_string())),
    };
    let Some(series) = table.get(quantity) else {
        let known: Vec<&str> = table.keys().map(String::as_str).collect();
        return config_error(ConfigError::field("quantity", format!("`{quantity}` not in ledger ({})", known.join(", "))));
    };
    let window = window.map(|w| (w[0], w[1])).unwrap_or_else(|| default_window(series));
    match fit_exponent(series, window) {
        Ok(f) => {
            print_json(&f);
            verdict_code(max_exponent.map_or(true, |m| f.exponent <= m))
        }
        Err(e) => {
            eprintln!("error: {e}");
            FAIL
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TensorFile {
    Tensor(NullFormTensor),
    Section(NullFormSection),
}

fn check_null(path: &Path, samples: usize, tol: f64) -> u8 {
    let parsed = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Read { path: path.into(), source: e })
        .and_then(|t| serde_json::from_str::<TensorFile>(&t).map_err(|e| ConfigError::Parse(e.to_string())))
        .and_then(|f| match f {
            TensorFile::Tensor(t) => Ok(t),
            TensorFile::Section(s) => s.base_tensor(),
        });
    match parsed {
        Ok(nf) => {
            let rep = check_null_condition(&nf, samples, tol);
            print_json(&rep);
            verdict_code(rep.pass)
        }
        Err(e) => config_error(e),
    }
}

fn validate(config: &Path) -> u8 {
    match RunConfig::load(config) {
        Ok(cfg) => {
            let rep = validate_metric(&cfg);
            print_json(&rep);
            verdict_code(rep.pass)
        }
        Err(e) => config_error(e),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out } => run(&config, out.as_deref()),
        Command::Accept { suite, out } => accept(&suite, &out),
        Command::Audit { config, out } => audit(&config, out.as_deref()),
        Command::Fit { ledger, quantity, window, max_exponent } => fit(&ledger, &quantity, window, max_exponent),
        Command::CheckNull { tensor, samples, tol } => check_null(&tensor, samples, tol),
        Command::ValidateMetric { config } => validate(&config),
    };
    ExitCode::from(code)
}
