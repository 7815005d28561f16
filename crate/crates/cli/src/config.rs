//! Run configuration: a TOML document with one table per concern.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qlwave_core::evolve::{Background, BoundaryMode, EquationSpec, InitialData, InteriorQuadratic, SourceSpec};
use qlwave_core::foliation::GridSpec;
use qlwave_core::geometry::{check_null_condition, validate_params, DecayParams, MetricSpec, NullFormTensor};
use qlwave_core::multipliers::MultiplierSpec;

/// Overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "QLWAVE_OUTPUT_DIR";
/// Overrides the configured thread count.
pub const THREADS_ENV: &str = "QLWAVE_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config does not parse: {0}")]
    Parse(String),
    #[error("config field `{field}`: {reason}")]
    Field { field: String, reason: String },
}

impl ConfigError {
    pub fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Field { field: field.into(), reason: reason.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    LinearFlat,
    LinearPerturbed,
    QuasilinearNull,
    /// A non-null quadratic confined to the interior disc.
    QuasilinearInterior,
    Stability,
    Convergence,
    Audit,
}

impl Mode {
    pub fn evolves_ledger(self) -> bool {
        !matches!(self, Self::Convergence | Self::Audit)
    }

    /// Largest admissible fitted energy exponent.
    pub fn default_decay_threshold(self) -> f64 {
        match self {
            Self::LinearFlat => -1.0,
            Self::Stability => 0.0,
            _ => -0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub fd_order: usize,
    pub courant: f64,
    pub boundary: BoundaryMode,
    /// Fixed step overriding the CFL choice.
    pub dt: Option<f64>,
    /// Checkpoint cadence in `t`; only the final state when absent.
    pub snapshot_every: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { fd_order: 4, courant: 0.5, boundary: BoundaryMode::CausalDomain, dt: None, snapshot_every: None }
    }
}

/// Either a named tensor or explicit coefficients, optionally rescaled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NullFormSection {
    pub name: Option<String>,
    pub tensor: Option<NullFormTensor>,
    pub scale: f64,
    /// Rescales the cubic part so the largest principal shift of the initial
    /// data is this fraction of the background hyperbolicity margin.
    pub margin_fraction: Option<f64>,
}

impl Default for NullFormSection {
    fn default() -> Self {
        Self { name: None, tensor: None, scale: 1.0, margin_fraction: None }
    }
}

impl NullFormSection {
    pub fn named(name: &str) -> Self {
        Self { name: Some(name.to_string()), ..Self::default() }
    }

    /// The tensor before any margin rescaling.
    pub fn base_tensor(&self) -> Result<NullFormTensor, ConfigError> {
        let nf = match (&self.name, &self.tensor) {
            (Some(_), Some(_)) => return Err(ConfigError::field("nullform", "give either `name` or `tensor`, not both")),
            (Some(n), None) => NullFormTensor::by_name(n).ok_or_else(|| {
                ConfigError::field(
                    "nullform.name",
                    format!("unknown tensor `{n}` (known: none, dt-box, q0-dt, minkowski-quadratic, ttt-only)"),
                )
            })?,
            (None, Some(t)) => t.clone(),
            (None, None) => NullFormTensor::zero(),
        };
        Ok(nf.scaled(self.scale))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquationSection {
    pub semilinear: Option<bool>,
    pub source: SourceSpec,
    pub interior_quadratic: Option<InteriorQuadratic>,
    pub background: Option<Background>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub leaf_spacing: f64,
    pub k_max: usize,
    pub quad_degree: usize,
    pub dv: Option<f64>,
    pub lemma_slack: f64,
    /// First leaf checked by the envelope monitor.
    pub monitor_from: f64,
    pub fit_quantity: String,
    /// Fit window in `tau`; drops `tau < 5` and the last tenth when absent.
    pub fit_window: Option<[f64; 2]>,
    pub decay_threshold: Option<f64>,
    pub pigeonhole_beta: f64,
    /// Multiple of the measured tail-integral constant used as threshold.
    pub pigeonhole_factor: f64,
    /// Leaves after which the energy must not grow.
    pub monotone_from: Option<f64>,
    /// Allowed growth between leaves, relative to the energy at `monotone_from`.
    pub monotone_tolerance: f64,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            leaf_spacing: 0.5,
            k_max: 2,
            quad_degree: 11,
            dv: None,
            lemma_slack: 0.05,
            monitor_from: 5.0,
            fit_quantity: "energy".into(),
            fit_window: None,
            decay_threshold: None,
            pigeonhole_beta: 1.0,
            pigeonhole_factor: 10.0,
            monotone_from: None,
            monotone_tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSection {
    /// Any of `dt`, `morawetz`, `pweight`.
    pub multipliers: Vec<String>,
    pub tau1: f64,
    pub tau2: f64,
    pub v_max: Option<f64>,
    pub spacings: Vec<f64>,
    pub gauss_points: usize,
    /// Exponent of the Morawetz multiplier and of the weighted bulk.
    pub alpha: f64,
    /// Exponent of the `r^p` multiplier.
    pub p: f64,
    pub min_order: f64,
    /// Largest finest-level residual accepted for `dt`.
    pub max_residual: f64,
    /// Largest residual accepted for the weighted multipliers.
    pub max_weighted_residual: f64,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self {
            multipliers: vec!["dt".into()],
            tau1: 5.0,
            tau2: 15.0,
            v_max: None,
            spacings: vec![0.5, 0.25],
            gauss_points: 5,
            alpha: 0.1,
            p: 1.0,
            min_order: 1.9,
            max_residual: 1e-3,
            max_weighted_residual: 0.05,
        }
    }
}

impl AuditSection {
    pub fn multiplier_specs(&self, radius: f64) -> Result<Vec<MultiplierSpec>, ConfigError> {
        self.multipliers
            .iter()
            .map(|m| match m.as_str() {
                "dt" => Ok(MultiplierSpec::Dt),
                "morawetz" => Ok(MultiplierSpec::Morawetz { alpha: self.alpha }),
                "pweight" => Ok(MultiplierSpec::PWeight { p: self.p, radius }),
                other => Err(ConfigError::field(
                    "audit.multipliers",
                    format!("unknown multiplier `{other}` (known: dt, morawetz, pweight)"),
                )),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSection {
    pub spacings: Vec<f64>,
    /// Time at which the error is measured.
    pub t_check: f64,
    /// Smallest accepted observed order; by stencil order when absent.
    pub min_order: Option<f64>,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self { spacings: vec![0.5, 0.25, 0.125], t_check: 10.0, min_order: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub tau_final: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub params: DecayParams,
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub data: InitialData,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default)]
    pub nullform: NullFormSection,
    #[serde(default)]
    pub equation: EquationSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub audit: Option<AuditSection>,
    #[serde(default)]
    pub convergence: Option<ConvergenceSection>,
}

impl RunConfig {
    /// Desk-scale preset: 192 cells per axis on `[-48, 48]^3`, `R = 10`,
    /// `tau_final = 36`, fourth-order stencil, causal-domain boundary.
    pub fn preset(mode: Mode, data: InitialData) -> Self {
        Self {
            mode,
            tau_final: 36.0,
            seed: 0,
            threads: None,
            output_dir: None,
            params: DecayParams::default(),
            grid: GridSpec { half_width: 48.0, n_per_axis: 192 },
            solver: SolverSection::default(),
            data,
            metric: MetricSpec::Flat,
            nullform: NullFormSection::default(),
            equation: EquationSection::default(),
            diagnostics: DiagnosticsSection::default(),
            audit: None,
            convergence: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs serialize")
    }

    pub fn base_nullform(&self) -> Result<NullFormTensor, ConfigError> {
        self.nullform.base_tensor()
    }

    /// Equation before the margin rescaling of the cubic part.
    pub fn base_equation(&self) -> Result<EquationSpec, ConfigError> {
        let nf = self.base_nullform()?;
        Ok(EquationSpec {
            metric: self.metric.clone(),
            semilinear: self.equation.semilinear.unwrap_or(true),
            nullform: nf,
            source: self.equation.source.clone(),
            interior_quadratic: self.equation.interior_quadratic,
            background: self.equation.background,
        })
    }

    /// Output directory: the override, then the environment, then the config,
    /// then `qlwave-out/<mode>`.
    pub fn resolve_output(&self, cli: Option<&Path>) -> PathBuf {
        if let Some(p) = cli {
            return p.to_path_buf();
        }
        if let Ok(p) = std::env::var(OUTPUT_DIR_ENV) {
            if !p.is_empty() {
                return PathBuf::from(p);
            }
        }
        self.output_dir.clone().unwrap_or_else(|| {
            let mode = serde_json::to_value(self.mode).ok().and_then(|v| v.as_str().map(String::from));
            PathBuf::from("qlwave-out").join(mode.unwrap_or_default())
        })
    }

    /// Thread count: the environment, then the config, then one per core.
    pub fn resolve_threads(&self) -> Result<Option<usize>, ConfigError> {
        match std::env::var(THREADS_ENV) {
            Ok(s) if !s.is_empty() => match s.parse::<usize>() {
                Ok(n) if n > 0 => Ok(Some(n)),
                _ => Err(ConfigError::field(THREADS_ENV, format!("`{s}` is not a positive integer"))),
            },
            _ => Ok(self.threads),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = validate_params(&self.params);
        if !bad.is_empty() {
            return Err(ConfigError::field("params", format!("violated: {}", bad.join("; "))));
        }
        let p = &self.params;
        if !(self.tau_final > 0.0) {
            return Err(ConfigError::field("tau_final", "must be positive"));
        }
        if self.threads == Some(0) {
            return Err(ConfigError::field("threads", "must be at least 1"));
        }
        if !(self.grid.half_width > 0.0) {
            return Err(ConfigError::field("grid.half_width", "must be positive"));
        }
        if !matches!(self.mode, Mode::Convergence | Mode::Audit) && self.grid.n_per_axis < 16 {
            return Err(ConfigError::field("grid.n_per_axis", format!("{} is below the minimum of 16", self.grid.n_per_axis)));
        }
        let s = &self.solver;
        if s.fd_order != 2 && s.fd_order != 4 {
            return Err(ConfigError::field("solver.fd_order", format!("{} is not 2 or 4", s.fd_order)));
        }
        if !(s.courant > 0.0 && s.courant <= 1.0) {
            return Err(ConfigError::field("solver.courant", format!("{} is outside (0, 1]", s.courant)));
        }
        if matches!(s.dt, Some(dt) if !(dt > 0.0)) {
            return Err(ConfigError::field("solver.dt", "must be positive"));
        }
        if matches!(s.snapshot_every, Some(e) if !(e > 0.0)) {
            return Err(ConfigError::field("solver.snapshot_every", "must be positive"));
        }
        if s.boundary == BoundaryMode::CausalDomain && self.grid.half_width < self.tau_final + p.radius + 2.0 {
            return Err(ConfigError::field(
                "grid.half_width",
                format!(
                    "causal-domain mode needs half_width >= tau_final + R + 2 = {} (got {})",
                    self.tau_final + p.radius + 2.0,
                    self.grid.half_width
                ),
            ));
        }
        let support = self.data.support_radius();
        if support > p.radius {
            return Err(ConfigError::field("data", format!("support radius {support} exceeds R = {}", p.radius)));
        }
        let d = &self.diagnostics;
        if !(d.leaf_spacing > 0.0) {
            return Err(ConfigError::field("diagnostics.leaf_spacing", "must be positive"));
        }
        if d.k_max > 2 {
            return Err(ConfigError::field("diagnostics.k_max", "commuted fields are available up to order 2"));
        }
        if !(d.lemma_slack >= 0.0) {
            return Err(ConfigError::field("diagnostics.lemma_slack", "must be non-negative"));
        }
        if let Some([a, b]) = d.fit_window {
            if !(a < b) {
                return Err(ConfigError::field("diagnostics.fit_window", "needs start < end"));
            }
        }
        if !(d.pigeonhole_factor > 0.0) {
            return Err(ConfigError::field("diagnostics.pigeonhole_factor", "must be positive"));
        }
        if matches!(self.nullform.margin_fraction, Some(f) if !(f > 0.0 && f < 1.0)) {
            return Err(ConfigError::field("nullform.margin_fraction", "must lie in (0, 1)"));
        }
        let spec = self.base_equation()?;
        self.validate_mode(&spec)?;
        if let Some(a) = &self.audit {
            self.validate_audit(a)?;
        }
        Ok(())
    }

    fn validate_mode(&self, spec: &EquationSpec) -> Result<(), ConfigError> {
        let nf = &spec.nullform;
        let need_linear = |mode: &str| -> Result<(), ConfigError> {
            if !nf.is_zero() {
                return Err(ConfigError::field("nullform", format!("{mode} mode takes no nonlinearity")));
            }
            if spec.interior_quadratic.is_some() || spec.background.is_some() {
                return Err(ConfigError::field("equation", format!("{mode} mode takes no interior quadratic or background")));
            }
            Ok(())
        };
        match self.mode {
            Mode::LinearFlat => {
                if !self.metric.is_flat() {
                    return Err(ConfigError::field("metric", "linear-flat mode needs the flat metric"));
                }
                need_linear("linear-flat")?;
            }
            Mode::LinearPerturbed => {
                if self.metric.is_flat() {
                    return Err(ConfigError::field("metric", "linear-perturbed mode needs a non-flat metric family"));
                }
                need_linear("linear-perturbed")?;
            }
            Mode::QuasilinearNull => {
                if nf.is_zero() {
                    return Err(ConfigError::field("nullform", "quasilinear-null mode needs a nonzero tensor"));
                }
                let rep = check_null_condition(nf, 200, 1e-12);
                if !rep.pass {
                    return Err(ConfigError::field(
                        "nullform",
                        format!("tensor violates the null condition (worst residual {:e})", rep.worst_residual),
                    ));
                }
            }
            Mode::QuasilinearInterior => {
                let Some(q) = spec.interior_quadratic else {
                    return Err(ConfigError::field("equation.interior_quadratic", "required in quasilinear-interior mode"));
                };
                if q.radius > self.params.radius {
                    return Err(ConfigError::field("equation.interior_quadratic.radius", "must not exceed R"));
                }
            }
            Mode::Stability => {
                if spec.background.is_none() {
                    return Err(ConfigError::field("equation.background", "required in stability mode"));
                }
            }
            Mode::Convergence => {
                if !matches!(self.data, InitialData::Radial { .. }) {
                    return Err(ConfigError::field("data", "convergence mode needs radial data with an exact solution"));
                }
                if !self.metric.is_flat() {
                    return Err(ConfigError::field("metric", "convergence mode needs the flat metric"));
                }
                need_linear("convergence")?;
                let c = self.convergence.as_ref().ok_or_else(|| ConfigError::field("convergence", "required in convergence mode"))?;
                if c.spacings.len() < 2 || c.spacings.iter().any(|d| !(*d > 0.0)) {
                    return Err(ConfigError::field("convergence.spacings", "needs at least two positive spacings"));
                }
                if !(c.t_check > 0.0 && c.t_check <= self.tau_final) {
                    return Err(ConfigError::field("convergence.t_check", "must lie in (0, tau_final]"));
                }
            }
            Mode::Audit => {
                if self.audit.is_none() {
                    return Err(ConfigError::field("audit", "required in audit mode"));
                }
            }
        }
        Ok(())
    }

    fn validate_audit(&self, a: &AuditSection) -> Result<(), ConfigError> {
        a.multiplier_specs(self.params.radius)?;
        if a.multipliers.is_empty() {
            return Err(ConfigError::field("audit.multipliers", "is empty"));
        }
        if !(a.tau1 >= 0.0 && a.tau1 < a.tau2 && a.tau2 <= self.tau_final) {
            return Err(ConfigError::field("audit", "needs 0 <= tau1 < tau2 <= tau_final"));
        }
        if a.spacings.is_empty() || a.spacings.iter().any(|d| !(*d > 0.0)) {
            return Err(ConfigError::field("audit.spacings", "needs positive spacings"));
        }
        if a.gauss_points == 0 {
            return Err(ConfigError::field("audit.gauss_points", "must be at least 1"));
        }
        if !(a.alpha > 0.0 && a.alpha < 1.0) {
            return Err(ConfigError::field("audit.alpha", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qlwave_core::evolve::Profile;

    fn minimal() -> &'static str {
        r#"
mode = "linear-flat"
tau_final = 4.0

[params]
radius = 5.0

[grid]
half_width = 12.0
n_per_axis = 24

[data]
kind = "radial"
profile = { amplitude = 1.0, center = 2.0, width = 1.5 }
"#
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::parse(minimal()).unwrap();
        assert_eq!(cfg.solver.fd_order, 4);
        assert_eq!(cfg.params.alpha, 0.1);
        assert_eq!(cfg.diagnostics.k_max, 2);
        assert_eq!(cfg.data, InitialData::Radial { profile: Profile::new(1.0, 2.0, 1.5) });
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::parse(minimal()).unwrap();
        cfg.audit = Some(AuditSection { tau1: 1.0, tau2: 3.0, ..AuditSection::default() });
        cfg.nullform = NullFormSection { margin_fraction: Some(0.01), ..NullFormSection::named("none") };
        let back = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn explicit_tensor_round_trips() {
        let mut cfg = RunConfig::parse(minimal()).unwrap();
        cfg.mode = Mode::QuasilinearNull;
        cfg.nullform = NullFormSection { tensor: Some(NullFormTensor::q0_dt()), ..NullFormSection::default() };
        let back = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(back.base_nullform().unwrap(), NullFormTensor::q0_dt());
    }

    fn field_of(text: &str) -> String {
        match RunConfig::parse(text) {
            Err(ConfigError::Field { field, .. }) => field,
            other => panic!("expected a field error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        let base = minimal();
        assert_eq!(field_of(&base.replace("radius = 5.0", "radius = 3.0")), "params");
        assert_eq!(field_of(&base.replace("half_width = 12.0", "half_width = 8.0")), "grid.half_width");
        assert_eq!(field_of(&base.replace("center = 2.0", "center = 4.0")), "data");
        assert_eq!(field_of(&format!("{base}\n[solver]\nfd_order = 3\n")), "solver.fd_order");
        assert_eq!(field_of(&format!("{base}\n[nullform]\nname = \"dt-box\"\n")), "nullform");
        assert_eq!(field_of(&format!("{base}\n[nullform]\nname = \"cubic\"\n")), "nullform.name");
        assert_eq!(field_of(&base.replace("linear-flat", "linear-perturbed")), "metric");
        assert_eq!(field_of(&base.replace("linear-flat", "stability")), "equation.background");
        assert_eq!(field_of(&base.replace("linear-flat", "audit")), "audit");
    }

    #[test]
    fn null_mode_rejects_a_non_null_tensor() {
        let text = format!("{}\n[nullform]\nname = \"ttt-only\"\n", minimal().replace("linear-flat", "quasilinear-null"));
        assert_eq!(field_of(&text), "nullform");
        let ok = format!("{}\n[nullform]\nname = \"q0-dt\"\n", minimal().replace("linear-flat", "quasilinear-null"));
        RunConfig::parse(&ok).unwrap();
    }

    #[test]
    fn unknown_keys_and_modes_are_parse_errors() {
        assert!(matches!(RunConfig::parse(&format!("speed = 2\n{}", minimal())), Err(ConfigError::Parse(_))));
        assert!(matches!(RunConfig::parse(&minimal().replace("linear-flat", "nonlinear")), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn sommerfeld_lifts_the_domain_requirement() {
        let text = format!("{}\n[solver]\nboundary = \"sommerfeld\"\n", minimal().replace("half_width = 12.0", "half_width = 8.0"));
        RunConfig::parse(&text).unwrap();
    }

    #[test]
    fn preset_is_valid() {
        let data = InitialData::Radial { profile: Profile::new(1e-3, 3.0, 2.0) };
        RunConfig::preset(Mode::LinearFlat, data).validate().unwrap();
    }
}
