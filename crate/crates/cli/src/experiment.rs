//! Runs one configured experiment and writes its artifact directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use qlwave_core::decay::{default_window, fit_exponent, loglog_csv, pigeonhole_report, tail_integral_constant, DecayFit};
use qlwave_core::diagnostics::{envelope_monitor, lemma_checks, pointwise_probe, probe_ordering, DiagnosticsConfig, EnergyLedger, LeafRecorder};
use qlwave_core::evolve::{exact_spherical, run, BoundaryMode, EquationSpec, InitialData, RunSummary, Solver, SolverConfig};
use qlwave_core::evolve::hyperbolicity_check;
use qlwave_core::foliation::GridSpec;
use qlwave_core::geometry::{sphere_directions, validate_envelope, EnvelopeReport, EnvelopeSamplePlan, Generator};
use qlwave_core::multipliers::{audit_identities, morawetz_multiplier, AuditConfig, AuditRegion, AuditReport};

use crate::config::{ConfigError, Mode, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0:#}")]
    Runtime(#[from] anyhow::Error),
}

impl From<qlwave_core::Error> for RunError {
    fn from(e: qlwave_core::Error) -> Self {
        Self::Runtime(e.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// Every series vanished identically, so every check holds trivially.
    AllTrivialPass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, value: Option<f64>, threshold: Option<f64>, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, value, threshold, detail: detail.into() }
    }

    /// `value <= threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self::new(name, value <= threshold, Some(value), Some(threshold), detail)
    }

    /// `value >= threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self::new(name, value >= threshold, Some(value), Some(threshold), detail)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub mode: Mode,
    pub status: Status,
    pub checks: Vec<Check>,
}

impl Verdict {
    fn from_checks(mode: Mode, checks: Vec<Check>, trivial: bool) -> Self {
        let status = if !checks.iter().all(|c| c.pass) {
            Status::Fail
        } else if trivial {
            Status::AllTrivialPass
        } else {
            Status::Pass
        };
        Self { mode, status, checks }
    }

    pub fn pass(&self) -> bool {
        self.status != Status::Fail
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// What a finished experiment left behind.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub dir: PathBuf,
    pub verdict: Verdict,
    pub ledger: Option<EnergyLedger>,
    pub summary: Option<RunSummary>,
    pub audits: Vec<AuditReport>,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    write(path, serde_json::to_string_pretty(value)? + "\n")
}

/// Loads, validates and runs a config file.
pub fn run_config_file(path: &Path, output: Option<&Path>) -> Result<Outcome, RunError> {
    let cfg = RunConfig::load(path)?;
    let dir = cfg.resolve_output(output);
    run_experiment(&cfg, &dir)
}

/// Runs `cfg` in a pool of the configured size and writes the artifacts to `dir`.
pub fn run_experiment(cfg: &RunConfig, dir: &Path) -> Result<Outcome, RunError> {
    cfg.validate()?;
    let threads = cfg.resolve_threads()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("building the thread pool")?;
    pool.install(|| run_in_pool(cfg, dir))
}

fn run_in_pool(cfg: &RunConfig, dir: &Path) -> Result<Outcome, RunError> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write(&dir.join("config.toml"), cfg.to_toml())?;
    let mut out = match cfg.mode {
        Mode::Convergence => convergence_study(cfg, dir)?,
        Mode::Audit => {
            let (checks, audits) = audit_run(cfg, dir)?;
            Outcome { dir: dir.into(), verdict: Verdict::from_checks(cfg.mode, checks, false), ledger: None, summary: None, audits }
        }
        _ => evolve(cfg, dir)?,
    };
    if cfg.mode.evolves_ledger() && cfg.audit.is_some() {
        let (checks, audits) = audit_run(cfg, dir)?;
        let trivial = out.verdict.status == Status::AllTrivialPass;
        let mut all = out.verdict.checks;
        all.extend(checks);
        out.verdict = Verdict::from_checks(cfg.mode, all, trivial);
        out.audits = audits;
    }
    write_json(&dir.join("verdict.json"), &out.verdict)?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Equation assembly
// ---------------------------------------------------------------------------

/// Applied rescaling of the cubic coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginScaling {
    pub fraction: f64,
    /// Largest `|gcube d phi| / margin` of the unscaled tensor on the data.
    pub unscaled_ratio: f64,
    pub scale: f64,
}

/// Largest Frobenius norm of the principal shift of `spec` on the initial
/// data, relative to the hyperbolicity margin of the background metric.
pub fn principal_shift_ratio(spec: &EquationSpec, data: &InitialData, grid: &GridSpec) -> f64 {
    let n = grid.n();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let x = grid.position(i, j, k);
                let r = qlwave_core::tensor::norm3(&x);
                if r > data.support_radius() {
                    continue;
                }
                let (_, phi1) = data.eval(&x);
                let h = 1e-6 * (1.0 + r);
                let mut dphi = [phi1, 0.0, 0.0, 0.0];
                for a in 0..3 {
                    let (mut xp, mut xm) = (x, x);
                    xp[a] += h;
                    xm[a] -= h;
                    dphi[a + 1] = (data.eval(&xp).0 - data.eval(&xm).0) / (2.0 * h);
                }
                let shift = spec.nullform.principal_shift(&dphi);
                let norm = shift.iter().flatten().map(|c| c * c).sum::<f64>().sqrt();
                if norm == 0.0 {
                    continue;
                }
                let margin = hyperbolicity_check(&spec.metric.eval(0.0, &x).inverse_metric()).margin;
                worst = worst.max(norm / margin);
            }
        }
    }
    worst
}

/// The configured equation with the cubic part rescaled to the requested
/// fraction of the hyperbolicity margin.
pub fn effective_equation(cfg: &RunConfig) -> Result<(EquationSpec, Option<MarginScaling>), RunError> {
    let mut spec = cfg.base_equation()?;
    let Some(fraction) = cfg.nullform.margin_fraction else {
        return Ok((spec, None));
    };
    if !spec.nullform.has_quasilinear() {
        return Ok((spec, None));
    }
    let ratio = principal_shift_ratio(&spec, &cfg.data, &cfg.grid);
    if ratio == 0.0 {
        return Ok((spec, None));
    }
    let scale = fraction / ratio;
    spec.nullform.gcube.iter_mut().flatten().flatten().for_each(|c| *c *= scale);
    Ok((spec, Some(MarginScaling { fraction, unscaled_ratio: ratio, scale })))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackgroundEnvelope {
    /// `sup (|d^2 Phi| + sum_{|w| <= 1} |Z^w d Phi|) / delta0` over the samples.
    pub max_ratio: f64,
    pub argmax_point: [f64; 4],
    pub pass: bool,
}

/// Samples the stability background on spheres for `t` in `[0, t_final]`.
pub fn background_envelope(cfg: &RunConfig) -> Option<BackgroundEnvelope> {
    let bg = cfg.equation.background?;
    let dirs = sphere_directions(26);
    let mut best = BackgroundEnvelope { max_ratio: 0.0, argmax_point: [0.0; 4], pass: true };
    let n_t = (cfg.tau_final / 0.5).ceil() as usize;
    for it in 0..=n_t {
        let t = (it as f64 * 0.5).min(cfg.tau_final);
        let r_end = bg.support_radius(t);
        let n_r = (r_end / 0.1).ceil() as usize;
        for ir in 1..=n_r {
            let r = ir as f64 * 0.1;
            for w in &dirs {
                let x = [r * w[0], r * w[1], r * w[2]];
                let (d, hess) = bg.jet(t, &x);
                let second = hess.iter().flatten().fold(0.0_f64, |m, c| m.max(c.abs()));
                let mut first = d.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
                for g in Generator::ALL {
                    let z = g.vector(&x);
                    let zd = (0..4).map(|mu| (0..4).map(|a| z[a] * hess[a][mu]).sum::<f64>().abs()).fold(0.0, f64::max);
                    first += zd;
                }
                let ratio = (second + first) / cfg.params.delta0;
                if ratio > best.max_ratio {
                    best.max_ratio = ratio;
                    best.argmax_point = [t, x[0], x[1], x[2]];
                }
            }
        }
    }
    best.pass = best.max_ratio <= 1.0;
    Some(best)
}

pub fn validate_metric(cfg: &RunConfig) -> EnvelopeReport {
    validate_envelope(&cfg.metric, &cfg.params, &EnvelopeSamplePlan::standard(cfg.params.radius, cfg.tau_final))
}

// ---------------------------------------------------------------------------
// Evolution with diagnostics
// ---------------------------------------------------------------------------

pub fn solver_config(cfg: &RunConfig, grid: GridSpec, dir: Option<&Path>) -> SolverConfig {
    SolverConfig {
        grid,
        fd_order: cfg.solver.fd_order,
        courant: cfg.solver.courant,
        boundary: cfg.solver.boundary,
        t_final: cfg.tau_final,
        leaf_spacing: cfg.diagnostics.leaf_spacing,
        dt: cfg.solver.dt,
        checkpoint_dir: dir.map(|d| d.join("checkpoints")),
        checkpoint_every: cfg.solver.snapshot_every,
    }
}

pub fn diagnostics_config(cfg: &RunConfig) -> DiagnosticsConfig {
    let d = &cfg.diagnostics;
    DiagnosticsConfig {
        params: cfg.params,
        leaf_spacing: d.leaf_spacing,
        tau_max: cfg.tau_final,
        dv: d.dv,
        quad_degree: d.quad_degree,
        k_max: d.k_max,
        t_available: cfg.tau_final,
        tilde_approximate: cfg.solver.boundary != BoundaryMode::CausalDomain,
        ..DiagnosticsConfig::default()
    }
}

fn ledger_is_zero(ledger: &EnergyLedger) -> bool {
    ledger.quantity_names().iter().all(|q| ledger.series(q).map_or(true, |s| s.iter().all(|p| p.1 == 0.0)))
}

fn evolve(cfg: &RunConfig, dir: &Path) -> Result<Outcome, RunError> {
    if let Some(env) = background_envelope(cfg) {
        write_json(&dir.join("background_envelope.json"), &env)?;
        if !env.pass {
            return Err(ConfigError::field(
                "equation.background",
                format!("background exceeds its envelope: ratio {:.3e} at {:?}", env.max_ratio, env.argmax_point),
            )
            .into());
        }
    }
    let (spec, scaling) = effective_equation(cfg)?;
    write_json(&dir.join("equation.json"), &serde_json::json!({ "equation": spec, "margin_scaling": scaling }))?;

    let scfg = solver_config(cfg, cfg.grid, Some(dir));
    let mut rec = LeafRecorder::new(diagnostics_config(cfg), cfg.grid, spec.source.clone())?;
    log::info!("evolving {:?} on {} cells to t = {}", cfg.mode, cfg.grid.len(), cfg.tau_final);
    let (summary, _) = match run(&spec, &scfg, &cfg.data, &mut [&mut rec]) {
        Ok(r) => r,
        Err(e) => {
            write_json(&dir.join("error.json"), &serde_json::json!({ "error": e.to_string() }))?;
            return Err(e.into());
        }
    };
    write_json(&dir.join("summary.json"), &summary)?;
    let ledger = rec.finish();
    write(&dir.join("ledger.csv"), ledger.to_csv())?;
    write_json(&dir.join("ledger.json"), &ledger.to_json_by_quantity())?;

    let trivial = ledger_is_zero(&ledger);
    let mut checks = ledger_checks(cfg, &ledger, dir, trivial)?;
    if !spec.is_linear() || spec.background.is_some() {
        checks.push(Check::new(
            "hyperbolicity",
            summary.min_margin > 0.0,
            Some(summary.min_margin),
            Some(0.0),
            "smallest hyperbolicity margin met by the solver",
        ));
    }
    Ok(Outcome {
        dir: dir.into(),
        verdict: Verdict::from_checks(cfg.mode, checks, trivial),
        ledger: Some(ledger),
        summary: Some(summary),
        audits: Vec::new(),
    })
}

/// Largest relative growth of `series` between consecutive leaves after `from`.
pub fn worst_growth(series: &[(f64, f64)], from: f64) -> f64 {
    let tail: Vec<(f64, f64)> = series.iter().copied().filter(|p| p.0 >= from - 1e-9).collect();
    let Some(&(_, base)) = tail.first() else { return 0.0 };
    if base <= 0.0 {
        return 0.0;
    }
    tail.windows(2).map(|w| (w[1].1 - w[0].1) / base).fold(f64::NEG_INFINITY, f64::max).max(0.0)
}

fn ledger_checks(cfg: &RunConfig, ledger: &EnergyLedger, dir: &Path, trivial: bool) -> anyhow::Result<Vec<Check>> {
    let d = &cfg.diagnostics;
    let mut checks = Vec::new();

    let lemmas = lemma_checks(ledger, d.lemma_slack);
    write_json(&dir.join("lemmas.json"), &lemmas)?;
    let worst = lemmas.max_sphere.max(lemmas.max_hardy).max(lemmas.max_hardy_disc);
    checks.push(Check::new(
        "lemmas",
        lemmas.pass,
        Some(worst),
        Some(1.0 + d.lemma_slack),
        format!("sphere {:.4}, hardy {:.4}, hardy disc {:.4}, weighted {:.4}", lemmas.max_sphere, lemmas.max_hardy, lemmas.max_hardy_disc, lemmas.max_weighted),
    ));

    let monitor = envelope_monitor(ledger, d.monitor_from, cfg.tau_final);
    write_json(&dir.join("monitor.json"), &monitor)?;
    checks.push(Check::at_most(
        "envelope-monitor",
        monitor.worst.max(),
        1.0,
        format!("tau in [{}, {}], {}", d.monitor_from, cfg.tau_final, monitor.truncation),
    ));

    let probe = pointwise_probe(ledger);
    let ordering = probe_ordering(ledger, 4, 1e-6);
    write_json(&dir.join("probe.json"), &serde_json::json!({ "table": probe, "ordering": ordering }))?;

    let mut fits = serde_json::Map::new();
    for q in ["energy", "energy_tilde", "s_alpha", "s_epsilon", "bulk_i", "g[1]", "g[1+alpha1]"] {
        if let Some(series) = ledger.series(q) {
            let window = d.fit_window.map(|w| (w[0], w[1])).unwrap_or_else(|| default_window(&series));
            let fit = fit_exponent(&series, window).map_err(|e| e.to_string());
            fits.insert(q.to_string(), serde_json::to_value(&fit)?);
        }
    }
    write_json(&dir.join("fits.json"), &fits)?;
    let series = ledger
        .series(&d.fit_quantity)
        .with_context(|| format!("ledger has no quantity `{}`", d.fit_quantity))?;
    write(&dir.join("loglog.csv"), loglog_csv(&series))?;
    let threshold = d.decay_threshold.unwrap_or_else(|| cfg.mode.default_decay_threshold());
    if trivial {
        checks.push(Check::new("decay", true, None, Some(threshold), "series vanish identically"));
    } else {
        let window = d.fit_window.map(|w| (w[0], w[1])).unwrap_or_else(|| default_window(&series));
        match fit_exponent(&series, window) {
            Ok(DecayFit { exponent, r_squared, points, .. }) => checks.push(Check::at_most(
                "decay",
                exponent,
                threshold,
                format!("{} over [{}, {}], {points} points, r^2 = {r_squared:.4}", d.fit_quantity, window.0, window.1),
            )),
            Err(e) => checks.push(Check::new("decay", false, None, Some(threshold), e.to_string())),
        }
    }

    let monotone_from = d.monotone_from.or(match cfg.mode {
        Mode::QuasilinearNull | Mode::QuasilinearInterior => Some(8.0),
        _ => None,
    });
    if let (Some(from), Some(energy)) = (monotone_from, ledger.series("energy")) {
        checks.push(Check::at_most(
            "energy-nonincreasing",
            worst_growth(&energy, from),
            d.monotone_tolerance,
            format!("largest leaf-to-leaf growth after tau = {from}, relative to E({from})"),
        ));
    }

    let s_eps = ledger.series("s_epsilon").context("ledger has no s_epsilon series")?;
    let constant = tail_integral_constant(&s_eps, d.pigeonhole_beta);
    let ph = pigeonhole_report(&s_eps, d.pigeonhole_beta, d.pigeonhole_factor * constant);
    write_json(&dir.join("pigeonhole.json"), &ph)?;
    let ok = trivial || (ph.min_density >= 0.5 && ph.companion_ok);
    checks.push(Check::new(
        "pigeonhole",
        ok,
        Some(ph.min_density),
        Some(0.5),
        format!(
            "{} blocks, {} members, companion property {}",
            ph.blocks.len(),
            ph.members.len(),
            if ph.companion_ok { "holds" } else { "fails" }
        ),
    ));
    Ok(checks)
}

// ---------------------------------------------------------------------------
// Oracle refinement study
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub dx: f64,
    pub n_per_axis: usize,
    pub l2_error: f64,
    /// Order against the previous row.
    pub order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub fd_order: usize,
    pub t_check: f64,
    pub rows: Vec<ConvergenceRow>,
    pub min_order: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// L² error against the exact radial solution after evolving to `t_check`.
pub fn oracle_error(cfg: &RunConfig, dx: f64, t_check: f64) -> Result<(GridSpec, f64), RunError> {
    let InitialData::Radial { profile } = cfg.data else {
        return Err(ConfigError::field("data", "needs radial data").into());
    };
    let grid = GridSpec::with_spacing(cfg.grid.half_width, dx)?;
    let spec = EquationSpec::flat_linear();
    let mut solver = Solver::new(spec, grid, cfg.solver.fd_order, cfg.solver.boundary, cfg.data.support_radius(), 1.02)?;
    let mut state = cfg.data.sample(&grid);
    let steps = (t_check / (cfg.solver.courant * grid.dx())).ceil() as usize;
    let dt = t_check / steps as f64;
    for s in 0..steps {
        solver.step(&mut state, dt)?;
        state.t = (s + 1) as f64 * dt;
    }
    let n = grid.n();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let x = grid.position(i, j, k);
                let r = qlwave_core::tensor::norm3(&x);
                let e = state.phi[grid.index(i, j, k)] - exact_spherical(&profile, state.t, r);
                sum += e * e;
            }
        }
    }
    Ok((grid, (sum * grid.dx().powi(3)).sqrt()))
}

pub fn convergence_table(cfg: &RunConfig) -> Result<ConvergenceTable, RunError> {
    let c = cfg.convergence.clone().ok_or_else(|| ConfigError::field("convergence", "required"))?;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &dx in &c.spacings {
        let (grid, err) = oracle_error(cfg, dx, c.t_check)?;
        log::info!("convergence dx = {}: L2 error {err:e}", grid.dx());
        let order = rows.last().map(|p| (p.l2_error / err).ln() / (p.dx / grid.dx()).ln());
        rows.push(ConvergenceRow { dx: grid.dx(), n_per_axis: grid.n(), l2_error: err, order });
    }
    let min_order = rows.iter().filter_map(|r| r.order).fold(f64::INFINITY, f64::min);
    let threshold = c.min_order.unwrap_or(if cfg.solver.fd_order == 4 { 3.5 } else { 1.9 });
    Ok(ConvergenceTable { fd_order: cfg.solver.fd_order, t_check: c.t_check, pass: min_order >= threshold, rows, min_order, threshold })
}

fn convergence_study(cfg: &RunConfig, dir: &Path) -> Result<Outcome, RunError> {
    let table = convergence_table(cfg)?;
    write_json(&dir.join("convergence.json"), &table)?;
    let mut csv = String::from("dx,n_per_axis,l2_error,order\n");
    for r in &table.rows {
        let order = r.order.map(|o| format!("{o:.6}")).unwrap_or_default();
        csv.push_str(&format!("{:e},{},{:.17e},{order}\n", r.dx, r.n_per_axis, r.l2_error));
    }
    write(&dir.join("convergence.csv"), csv)?;
    let check = Check::at_least("oracle-order", table.min_order, table.threshold, format!("fd order {}", table.fd_order));
    Ok(Outcome {
        dir: dir.into(),
        verdict: Verdict::from_checks(cfg.mode, vec![check], false),
        ledger: None,
        summary: None,
        audits: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Identity audits
// ---------------------------------------------------------------------------

/// Largest deviation of the Morawetz structure identity on `[0, r_max]`.
pub fn morawetz_identity_error(alpha: f64, r_max: f64) -> Result<f64, RunError> {
    let mut worst = 0.0_f64;
    for i in 0..=10_000 {
        let r = r_max * i as f64 / 10_000.0;
        worst = worst.max(morawetz_multiplier(alpha, r)?.identity_residual);
    }
    Ok(worst)
}

pub fn audit_reports(cfg: &RunConfig) -> Result<Vec<AuditReport>, RunError> {
    let a = cfg.audit.clone().ok_or_else(|| ConfigError::field("audit", "required"))?;
    let (spec, _) = effective_equation(cfg)?;
    let mults = a.multiplier_specs(cfg.params.radius)?;
    let acfg = AuditConfig {
        radius: cfg.params.radius,
        region: AuditRegion { tau1: a.tau1, tau2: a.tau2, v_max: a.v_max },
        gauss_points: a.gauss_points,
        weight_alpha: a.alpha,
        ..AuditConfig::default()
    };
    let mut scfg = solver_config(cfg, cfg.grid, None);
    scfg.dt = None;
    Ok(audit_identities(&spec, &cfg.data, &scfg, &a.spacings, &mults, &acfg)?)
}

/// Checks of one audit report against the configured thresholds.
pub fn audit_checks(cfg: &RunConfig, rep: &AuditReport) -> Result<Vec<Check>, RunError> {
    let a = cfg.audit.clone().unwrap_or_default();
    let name = rep.multiplier.split('(').next().unwrap_or_default().to_string();
    let finest = rep.terms.last().ok_or_else(|| anyhow::anyhow!("audit without resolutions"))?;
    let mut checks = Vec::new();
    match name.as_str() {
        "dt" => {
            checks.push(Check::at_most("audit-dt-residual", finest.residual, a.max_residual, format!("dx = {}", finest.dx)));
            if rep.terms.len() >= 2 {
                let order = rep.order.unwrap_or(f64::NAN);
                checks.push(Check::new(
                    "audit-dt-order",
                    order >= a.min_order,
                    Some(order),
                    Some(a.min_order),
                    format!("residuals {:?}", rep.residuals),
                ));
            }
        }
        "morawetz" => {
            let id = morawetz_identity_error(a.alpha, 4.0 * cfg.params.radius)?;
            checks.push(Check::at_most("morawetz-identity", id, 1e-14, "chi - f/r + f'/2 against (1+r)^(-1-alpha)"));
            checks.push(Check::at_most("audit-morawetz-residual", finest.residual, a.max_weighted_residual, format!("dx = {}", finest.dx)));
            checks.push(Check::new(
                "morawetz-bulk-positive",
                finest.weighted_bulk > 0.0,
                Some(finest.weighted_bulk),
                Some(0.0),
                "weighted bulk of the derivative density",
            ));
            let bound = (1.0 + a.max_weighted_residual) * finest.boundary.abs();
            checks.push(Check::at_most(
                "morawetz-bulk-bounded",
                finest.weighted_bulk,
                bound,
                format!("boundary terms {:.6e}", finest.boundary),
            ));
        }
        _ => checks.push(Check::at_most(
            &format!("audit-{name}-residual"),
            finest.residual,
            a.max_weighted_residual,
            format!("dx = {}", finest.dx),
        )),
    }
    Ok(checks)
}

fn audit_run(cfg: &RunConfig, dir: &Path) -> Result<(Vec<Check>, Vec<AuditReport>), RunError> {
    let reports = audit_reports(cfg)?;
    let mut checks = Vec::new();
    let mut csv = String::from("multiplier,dx,bulk,weighted_bulk,flux_lower,flux_upper,flux_incoming,flux_cylinder,boundary,residual\n");
    for rep in &reports {
        let name = rep.multiplier.split('(').next().unwrap_or_default();
        write_json(&dir.join(format!("audit_{name}.json")), rep)?;
        for t in &rep.terms {
            csv.push_str(&format!(
                "{},{:e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                name, t.dx, t.bulk, t.weighted_bulk, t.flux_lower, t.flux_upper, t.flux_incoming, t.flux_cylinder, t.boundary, t.residual
            ));
        }
        checks.extend(audit_checks(cfg, rep)?);
    }
    write(&dir.join("audit.csv"), csv)?;
    Ok((checks, reports))
}
