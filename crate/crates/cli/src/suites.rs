//! Registered acceptance suites, one per acceptance criterion.
//!
//! Suites that look at the same evolutions share them through
//! [`Acceptance`], which runs each evolution at most once.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use qlwave_core::decay::check_lweight_identity;
use qlwave_core::diagnostics::{lemma_checks, LemmaReport};
use qlwave_core::evolve::{InitialData, Profile};
use qlwave_core::foliation::GridSpec;
use qlwave_core::geometry::{check_null_condition, sphere_directions, DecayParams, MetricSpec, NullFormTensor};
use qlwave_core::multipliers::{deformation, stress_energy, AuditReport, MultiplierSpec};
use qlwave_core::tensor;

use crate::config::{AuditSection, ConvergenceSection, Mode, NullFormSection, RunConfig};
use crate::experiment::{audit_checks, audit_reports, convergence_table, run_experiment, Check, Outcome, RunError};

pub struct SuiteInfo {
    pub name: &'static str,
    pub criterion: u32,
    pub about: &'static str,
}

pub const SUITES: [SuiteInfo; 11] = [
    SuiteInfo { name: "oracle-convergence", criterion: 1, about: "solver against the exact spherical wave under refinement" },
    SuiteInfo { name: "identity-audit", criterion: 2, about: "energy identity for d_t over a slab, with refinement" },
    SuiteInfo { name: "morawetz", criterion: 3, about: "Morawetz multiplier identity, bulk sign and size" },
    SuiteInfo { name: "hardy", criterion: 4, about: "sharp-constant sphere and Hardy ratios" },
    SuiteInfo { name: "null-condition", criterion: 5, about: "null-condition checker on known tensors" },
    SuiteInfo { name: "killing", criterion: 6, about: "deformation of d_t on time-independent metrics" },
    SuiteInfo { name: "decay", criterion: 7, about: "energy decay rates of the desk-scale runs" },
    SuiteInfo { name: "envelope-monitor", criterion: 8, about: "bootstrap ratios of the desk-scale runs" },
    SuiteInfo { name: "lweight", criterion: 9, about: "weighted time-integration identity over a beta battery" },
    SuiteInfo { name: "pigeonhole", criterion: 10, about: "dyadic density of the pigeonhole set" },
    SuiteInfo { name: "determinism", criterion: 11, about: "byte-identical ledgers across thread counts" },
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.name).collect()
}

#[derive(Debug, thiserror::Error)]
#[error("unknown suite `{name}`; available: {}", available.join(", "))]
pub struct UnknownSuite {
    pub name: String,
    pub available: Vec<&'static str>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub suite: String,
    pub criterion: u32,
    pub pass: bool,
    pub summary: String,
    pub checks: Vec<Check>,
}

impl SuiteResult {
    fn new(info: &SuiteInfo, checks: Vec<Check>) -> Self {
        let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
        let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        let summary = if pass {
            format!("{} checks pass", checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        };
        Self { suite: info.name.into(), criterion: info.criterion, pass, summary, checks }
    }

    /// One line: criterion, suite, verdict and the failing checks.
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<20} {} ({})",
            self.criterion,
            self.suite,
            if self.pass { "PASS" } else { "FAIL" },
            self.summary
        )
    }
}

fn failure(name: &str, e: &RunError) -> Check {
    Check::new(name, false, None, None, e.to_string())
}

// ---------------------------------------------------------------------------
// Run configurations
// ---------------------------------------------------------------------------

/// Data of the desk-scale runs: a smooth bump off the origin at rest, so
/// rotations act nontrivially, small enough for the bootstrap envelopes.
pub fn desk_data() -> InitialData {
    InitialData::OffCenter { amplitude: 3e-5, center: [1.5, 1.0, 0.5], width: 3.0 }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeskRun {
    LinearFlat,
    Perturbed,
    Quasilinear,
}

impl DeskRun {
    pub const ALL: [DeskRun; 3] = [Self::LinearFlat, Self::Perturbed, Self::Quasilinear];

    pub fn label(self) -> &'static str {
        match self {
            Self::LinearFlat => "linear-flat",
            Self::Perturbed => "perturbed",
            Self::Quasilinear => "quasilinear",
        }
    }

    pub fn config(self) -> RunConfig {
        let mut cfg = match self {
            Self::LinearFlat => RunConfig::preset(Mode::LinearFlat, desk_data()),
            Self::Perturbed => {
                let mut c = RunConfig::preset(Mode::LinearPerturbed, desk_data());
                c.metric = MetricSpec::InteriorOscillator { delta0: 0.01, alpha: 0.1, radius: 10.0 };
                c
            }
            Self::Quasilinear => {
                let mut c = RunConfig::preset(Mode::QuasilinearNull, desk_data());
                c.nullform = NullFormSection { margin_fraction: Some(1e-2), ..NullFormSection::named("q0-dt") };
                c.diagnostics.monotone_from = Some(8.0);
                c
            }
        };
        cfg.diagnostics.fit_window = Some([8.0, 32.0]);
        cfg
    }
}

/// The flat slab run shared by the two audit suites.
pub fn audit_config() -> RunConfig {
    let mut cfg = RunConfig::preset(Mode::Audit, InitialData::Radial { profile: Profile::new(1.0, -6.0, 4.0) });
    cfg.tau_final = 15.5;
    cfg.grid = GridSpec { half_width: 28.0, n_per_axis: 56 };
    cfg.audit = Some(AuditSection {
        multipliers: vec!["dt".into(), "morawetz".into()],
        tau1: 5.0,
        tau2: 15.0,
        v_max: Some(13.0),
        spacings: vec![0.5, 0.25],
        ..AuditSection::default()
    });
    cfg
}

pub fn convergence_config() -> RunConfig {
    let mut cfg = RunConfig::preset(Mode::Convergence, InitialData::Radial { profile: Profile::new(1.0, 4.2, 3.8) });
    cfg.params = DecayParams { radius: 8.0, ..DecayParams::default() };
    cfg.tau_final = 10.0;
    cfg.grid = GridSpec { half_width: 20.0, n_per_axis: 80 };
    cfg.convergence = Some(ConvergenceSection { spacings: vec![0.5, 0.25, 0.125], t_check: 10.0, min_order: None });
    cfg
}

/// Small flat run for the sharp-constant refinement pair, at grid spacing `dx`.
pub fn refinement_config(dx: f64) -> RunConfig {
    let data = InitialData::OffCenter { amplitude: 1.0, center: [1.0, 0.5, 0.0], width: 3.0 };
    let mut cfg = RunConfig::preset(Mode::LinearFlat, data);
    cfg.params = DecayParams { radius: 5.0, ..DecayParams::default() };
    cfg.tau_final = 10.0;
    let half_width = 17.0;
    cfg.grid = GridSpec::with_spacing(half_width, dx).expect("valid spacing");
    cfg.diagnostics.k_max = 0;
    cfg
}

/// Small run compared across thread counts.
pub fn determinism_config(threads: usize) -> RunConfig {
    let mut cfg = refinement_config(0.5);
    cfg.tau_final = 4.0;
    cfg.grid = GridSpec { half_width: 11.0, n_per_axis: 44 };
    cfg.diagnostics.k_max = 1;
    cfg.threads = Some(threads);
    cfg
}

// ---------------------------------------------------------------------------
// Suite runner
// ---------------------------------------------------------------------------

/// Runs suites, caching the evolutions that several of them inspect.
pub struct Acceptance {
    out: PathBuf,
    desk: Vec<(DeskRun, Result<Outcome, String>)>,
    audit: Option<Result<Vec<AuditReport>, String>>,
}

impl Acceptance {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Self { out: out.into(), desk: Vec::new(), audit: None }
    }

    pub fn output(&self) -> &Path {
        &self.out
    }

    pub fn run(&mut self, name: &str) -> Result<SuiteResult, UnknownSuite> {
        let info = SUITES
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| UnknownSuite { name: name.into(), available: suite_names() })?;
        log::info!("suite {name}");
        let checks = match name {
            "oracle-convergence" => self.oracle_convergence(),
            "identity-audit" => self.audit_suite("dt"),
            "morawetz" => self.audit_suite("morawetz"),
            "hardy" => self.hardy(),
            "null-condition" => null_condition(),
            "killing" => killing(),
            "decay" => self.decay(),
            "envelope-monitor" => self.desk_check("envelope-monitor"),
            "lweight" => lweight(),
            "pigeonhole" => self.desk_check("pigeonhole"),
            "determinism" => self.determinism(),
            _ => unreachable!("registered suite without a runner"),
        };
        Ok(SuiteResult::new(info, checks))
    }

    pub fn run_all(&mut self) -> Vec<SuiteResult> {
        suite_names().into_iter().map(|n| self.run(n).expect("registered")).collect()
    }

    fn desk_outcome(&mut self, run: DeskRun) -> &Result<Outcome, String> {
        if let Some(i) = self.desk.iter().position(|(r, _)| *r == run) {
            return &self.desk[i].1;
        }
        let dir = self.out.join(format!("desk-{}", run.label()));
        let res = run_experiment(&run.config(), &dir).map_err(|e| e.to_string());
        self.desk.push((run, res));
        &self.desk.last().expect("just pushed").1
    }

    /// The named verdict check of every desk run, prefixed with the run label.
    fn desk_check(&mut self, name: &str) -> Vec<Check> {
        let mut out = Vec::new();
        for run in DeskRun::ALL {
            let label = format!("{}:{name}", run.label());
            match self.desk_outcome(run) {
                Ok(o) => match o.verdict.check(name) {
                    Some(c) => out.push(Check { name: label, ..c.clone() }),
                    None => out.push(Check::new(&label, false, None, None, "check missing from verdict")),
                },
                Err(e) => out.push(Check::new(&label, false, None, None, e.clone())),
            }
        }
        out
    }

    fn oracle_convergence(&mut self) -> Vec<Check> {
        let cfg = convergence_config();
        match convergence_table(&cfg) {
            Ok(t) => {
                let rows: Vec<String> = t.rows.iter().map(|r| format!("dx {} err {:.3e}", r.dx, r.l2_error)).collect();
                vec![Check::at_least("oracle-order", t.min_order, t.threshold, rows.join(", "))]
            }
            Err(e) => vec![failure("oracle-order", &e)],
        }
    }

    fn audit_suite(&mut self, multiplier: &str) -> Vec<Check> {
        let cfg = audit_config();
        let reports = self.audit.get_or_insert_with(|| audit_reports(&cfg).map_err(|e| e.to_string()));
        let reports = match reports {
            Ok(r) => r.clone(),
            Err(e) => return vec![Check::new(&format!("audit-{multiplier}"), false, None, None, e.clone())],
        };
        let Some(rep) = reports.iter().find(|r| r.multiplier.split('(').next() == Some(multiplier)) else {
            return vec![Check::new(&format!("audit-{multiplier}"), false, None, None, "no report")];
        };
        let _ = std::fs::create_dir_all(&self.out);
        let _ = std::fs::write(
            self.out.join(format!("audit_{multiplier}.json")),
            serde_json::to_string_pretty(rep).unwrap_or_default(),
        );
        audit_checks(&cfg, rep).unwrap_or_else(|e| vec![failure(&format!("audit-{multiplier}"), &e)])
    }

    fn hardy(&mut self) -> Vec<Check> {
        let slack = 0.05;
        let mut out = Vec::new();
        for run in DeskRun::ALL {
            let label = format!("{}:lemmas", run.label());
            match self.desk_outcome(run) {
                Ok(Outcome { ledger: Some(l), .. }) => out.push(lemma_check(&label, &lemma_checks(l, slack), slack)),
                Ok(_) => out.push(Check::new(&label, false, None, None, "no ledger")),
                Err(e) => out.push(Check::new(&label, false, None, None, e.clone())),
            }
        }
        // One refinement: the admitted slack halves at the finer spacing.
        for (dx, slack) in [(0.5, slack), (0.25, slack / 2.0)] {
            let label = format!("refinement-dx{dx}:lemmas");
            let dir = self.out.join(format!("hardy-dx{dx}"));
            match run_experiment(&refinement_config(dx), &dir) {
                Ok(Outcome { ledger: Some(l), .. }) => out.push(lemma_check(&label, &lemma_checks(&l, slack), slack)),
                Ok(_) => out.push(Check::new(&label, false, None, None, "no ledger")),
                Err(e) => out.push(failure(&label, &e)),
            }
        }
        out
    }

    fn decay(&mut self) -> Vec<Check> {
        let mut out = Vec::new();
        let wanted: [(DeskRun, &[&str]); 3] = [
            (DeskRun::LinearFlat, &["decay"]),
            (DeskRun::Perturbed, &["decay", "lemmas", "envelope-monitor"]),
            (DeskRun::Quasilinear, &["hyperbolicity", "energy-nonincreasing", "decay"]),
        ];
        for (run, names) in wanted {
            match self.desk_outcome(run) {
                Ok(o) => {
                    for name in names {
                        let label = format!("{}:{name}", run.label());
                        match o.verdict.check(name) {
                            Some(c) => out.push(Check { name: label, ..c.clone() }),
                            None => out.push(Check::new(&label, false, None, None, "check missing from verdict")),
                        }
                    }
                }
                Err(e) => out.push(Check::new(&format!("{}:run", run.label()), false, None, None, e.clone())),
            }
        }
        out
    }

    fn determinism(&mut self) -> Vec<Check> {
        let mut ledgers = Vec::new();
        let mut finals = Vec::new();
        for threads in [1, 3] {
            let dir = self.out.join(format!("determinism-t{threads}"));
            match run_experiment(&determinism_config(threads), &dir) {
                Ok(_) => {
                    ledgers.push(std::fs::read(dir.join("ledger.csv")).unwrap_or_default());
                    finals.push(std::fs::read(dir.join("checkpoints").join("final.bin")).unwrap_or_default());
                }
                Err(e) => return vec![failure("determinism", &e)],
            }
        }
        vec![
            Check::new(
                "ledger-bytes",
                !ledgers[0].is_empty() && ledgers[0] == ledgers[1],
                None,
                None,
                format!("{} bytes, 1 vs 3 threads", ledgers[0].len()),
            ),
            Check::new(
                "checkpoint-bytes",
                !finals[0].is_empty() && finals[0] == finals[1],
                None,
                None,
                format!("{} bytes, 1 vs 3 threads", finals[0].len()),
            ),
        ]
    }
}

fn lemma_check(label: &str, rep: &LemmaReport, slack: f64) -> Check {
    let worst = rep.max_sphere.max(rep.max_hardy).max(rep.max_hardy_disc);
    Check::new(
        label,
        rep.pass,
        Some(worst),
        Some(1.0 + slack),
        format!("{} leaves, sphere {:.4}, hardy {:.4}, disc {:.4}", rep.rows.len(), rep.max_sphere, rep.max_hardy, rep.max_hardy_disc),
    )
}

fn null_condition() -> Vec<Check> {
    let tol = 1e-12;
    let n = 400;
    let dt_box = check_null_condition(&NullFormTensor::dt_box(), n, tol);
    let quad = check_null_condition(&NullFormTensor::minkowski_quadratic(), n, tol);
    let ttt = check_null_condition(&NullFormTensor::cubic_tt_only(), n, tol);
    vec![
        Check::new("dt-box", dt_box.pass, Some(dt_box.worst_residual), Some(dt_box.tolerance), "d_t phi (d_tt phi - Laplacian phi)"),
        Check::new("minkowski-quadratic", quad.pass, Some(quad.worst_residual), Some(quad.tolerance), "A = m0"),
        Check::new(
            "ttt-only",
            !ttt.pass && ttt.worst_residual >= 0.5,
            Some(ttt.worst_residual),
            Some(0.5),
            "must fail with residual at least 0.5",
        ),
    ]
}

/// `T^{mu nu} pi_{mu nu}` for `X = d_t` at one point.
fn killing_density(metric: &MetricSpec, t: f64, x: &[f64; 3], dphi: &[f64; 4]) -> Result<(f64, bool), qlwave_core::Error> {
    let sample = metric.eval(t, x);
    let jet = MultiplierSpec::Dt.eval(t, x, &sample)?;
    let pi = deformation(&jet, &sample, t, x)?;
    let stress = stress_energy(dphi, &sample, t, x)?;
    let ginv = sample.inverse_metric();
    let raised = tensor::mat_mul(&tensor::mat_mul(&ginv, &stress), &ginv);
    let k: f64 = (0..4).flat_map(|m| (0..4).map(move |n| (m, n))).map(|(m, n)| raised[m][n] * pi[m][n]).sum();
    Ok((k, pi.iter().flatten().all(|&c| c == 0.0)))
}

fn killing() -> Vec<Check> {
    let families = [
        MetricSpec::Flat,
        MetricSpec::StaticBump { delta0: 0.01, alpha: 0.1, radius: 10.0, c_time: 1.0, c_space: -0.5 },
        MetricSpec::StaticTail { delta0: 0.01, alpha: 0.1 },
        MetricSpec::ConstantTime { value: -0.05 },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let dirs = sphere_directions(26);
    let mut out = Vec::new();
    for metric in families {
        let mut worst = 0.0_f64;
        let mut exact = true;
        let mut err = None;
        'outer: for t in [0.0, 1.7, 5.0, 20.0] {
            for r in [0.0, 0.3, 1.0, 4.5, 8.0, 9.5, 15.0, 40.0] {
                for w in &dirs {
                    let x = [r * w[0], r * w[1], r * w[2]];
                    let dphi: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                    let norm = dphi.iter().map(|c| c * c).sum::<f64>();
                    match killing_density(&metric, t, &x, &dphi) {
                        Ok((k, zero)) => {
                            worst = worst.max(k.abs() / norm);
                            exact &= zero;
                        }
                        Err(e) => {
                            err = Some(e.to_string());
                            break 'outer;
                        }
                    }
                }
            }
        }
        let name = metric.name();
        match err {
            Some(e) => out.push(Check::new(&format!("{name}:K"), false, None, None, e)),
            None => {
                out.push(Check::at_most(&format!("{name}:K"), worst, 1e-10, "max |K| / |d phi|^2"));
                out.push(Check::new(&format!("{name}:pi-exact"), exact, None, None, "deformation tensor identically zero"));
            }
        }
    }
    out
}

fn lweight() -> Vec<Check> {
    let f = |s: f64| (2.0 + s.cos()) * (1.0 + s).powf(-2.3);
    [-2.0, -1.1, 0.0, 1.0, 2.5]
        .into_iter()
        .map(|beta| {
            let name = format!("beta={beta}");
            match check_lweight_identity(&f, beta, 1.0, 30.0) {
                Ok(r) => Check::at_most(&name, r.residual, 1e-8, format!("lhs {:.12e}", r.lhs)),
                Err(e) => Check::new(&name, false, None, None, e.to_string()),
            }
        })
        .collect()
}
