//! Discrete check of the divergence identity
//! `int_D div Jtilde = F(Sigma_tau2) - F(Sigma_tau1) + F_in(v_max)`
//! over the region between two leaves, truncated by an incoming cone.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{currents, MultiplierSpec};
use crate::diagnostics::jet::TimeView;
use crate::error::{Error, Result};
use crate::evolve::{run, EquationSpec, InitialData, Observer, SolverConfig, Window};
use crate::foliation::{gauss_legendre, v_max_limit, GridSpec, SphereQuadrature};
use crate::geometry::MetricSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRegion {
    pub tau1: f64,
    pub tau2: f64,
    /// Incoming cone closing the region; the largest admissible value when absent.
    pub v_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    /// Disc radius `R` of the leaves.
    pub radius: f64,
    pub region: AuditRegion,
    /// Panel width of the composite Gauss rules in `tau`, `r`, `v` and `u`;
    /// twice the grid spacing when absent.
    pub panel: Option<f64>,
    pub gauss_points: usize,
    pub quad_degree: usize,
    /// Last time the solver reaches.
    pub t_available: f64,
    /// Exponent of the weight `(1+r)^{-1-alpha}` in the reported weighted bulk.
    pub weight_alpha: f64,
    /// Lower bound of the residual denominator.
    pub floor: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            radius: 10.0,
            region: AuditRegion { tau1: 0.0, tau2: 1.0, v_max: None },
            panel: None,
            gauss_points: 5,
            quad_degree: 11,
            t_available: 1.0,
            weight_alpha: 0.1,
            floor: 1e-300,
        }
    }
}

/// Integrals of one audited run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditTerms {
    pub dx: f64,
    pub v_max: f64,
    /// `int_D div Jtilde sqrt|G| d^4x`.
    pub bulk: f64,
    /// `int_D (1+r)^{-1-alpha} (phi_t^2 + |grad phi|^2) sqrt|G| d^4x`.
    pub weighted_bulk: f64,
    pub flux_lower: f64,
    pub flux_upper: f64,
    pub flux_incoming: f64,
    /// Flux through `r = R` when the multiplier is only defined outside the disc.
    pub flux_cylinder: f64,
    /// `F(Sigma_tau2) - F(Sigma_tau1) + F_in + F_cyl`.
    pub boundary: f64,
    /// `|bulk - boundary| / max(|bulk|, sum of |boundary pieces|, floor)`.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub multiplier: String,
    pub region: AuditRegion,
    pub resolutions: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Least-squares slope of `log residual` against `log dx`.
    pub order: Option<f64>,
    pub terms: Vec<AuditTerms>,
}

impl AuditReport {
    pub fn from_terms(multiplier: String, region: AuditRegion, terms: Vec<AuditTerms>) -> Self {
        let resolutions: Vec<f64> = terms.iter().map(|t| t.dx).collect();
        let residuals: Vec<f64> = terms.iter().map(|t| t.residual).collect();
        let pts: Vec<(f64, f64)> = resolutions
            .iter()
            .zip(&residuals)
            .filter(|(_, r)| **r > 0.0)
            .map(|(d, r)| (d.ln(), r.ln()))
            .collect();
        let order = if pts.len() >= 2 {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            (sxx > 0.0).then(|| sxy / sxx)
        } else {
            None
        };
        Self { multiplier, region, resolutions, residuals, order, terms }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Piece {
    Bulk,
    Lower,
    Upper,
    Incoming,
    Cylinder,
}

/// Which normal the sphere integrand contracts with.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Normal {
    /// Bulk density.
    Volume,
    /// `dt`.
    Time,
    /// `d(t - r)`.
    Outgoing,
    /// `d(t + r)`.
    Incoming,
    /// `-dr`.
    Inward,
}

#[derive(Clone, Copy, Debug)]
struct Task {
    t: f64,
    r: f64,
    /// Radial/null measure times the Gauss weights, without the sphere weight.
    weight: f64,
    piece: Piece,
    normal: Normal,
}

/// Composite Gauss-Legendre nodes on `[a, b]` with panels no wider than `width`.
fn panels(a: f64, b: f64, width: f64, gl: &(Vec<f64>, Vec<f64>)) -> Vec<(f64, f64)> {
    if b <= a {
        return Vec::new();
    }
    let n = ((b - a) / width - 1e-9).ceil().max(1.0) as usize;
    let h = (b - a) / n as f64;
    let mut out = Vec::with_capacity(n * gl.0.len());
    for p in 0..n {
        let c = a + (p as f64 + 0.5) * h;
        for (x, w) in gl.0.iter().zip(&gl.1) {
            out.push((c + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

/// Observer integrating the identity's bulk and boundary terms while the
/// solver runs.
pub struct IdentityAuditor {
    mult: MultiplierSpec,
    metric: MetricSpec,
    quad: SphereQuadrature,
    weight_alpha: f64,
    floor: f64,
    dx: f64,
    v_max: f64,
    tasks: Vec<Task>,
    cursor: usize,
    sums: [f64; 6],
}

impl IdentityAuditor {
    pub fn new(cfg: &AuditConfig, grid: &GridSpec, metric: MetricSpec, mult: MultiplierSpec) -> Result<Self> {
        let AuditRegion { tau1, tau2, v_max } = cfg.region;
        let radius = cfg.radius;
        let outside = |m: String| Err(Error::RegionOutsideTrajectory(m));
        if !(tau1 >= 0.0 && tau2 > tau1) {
            return outside(format!("slab [{tau1}, {tau2}] is empty or starts before t = 0"));
        }
        if tau2 > cfg.t_available + 1e-9 {
            return outside(format!("slab ends at {tau2} after the last time {}", cfg.t_available));
        }
        let u = |tau: f64| 0.5 * (tau - radius);
        let limit = v_max_limit(tau1, radius, grid, cfg.t_available).min(v_max_limit(tau2, radius, grid, cfg.t_available));
        let v_max = v_max.unwrap_or(limit);
        let v2 = 0.5 * (tau2 + radius);
        if v_max > limit + 1e-9 || v_max <= v2 {
            return outside(format!("v_max = {v_max} must lie in ({v2}, {limit}]"));
        }
        let r_min = mult.min_radius();
        let with_disc = r_min == 0.0;
        if !with_disc && (r_min - radius).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "multiplier defined for r >= {r_min}, but the region boundary sits at R = {radius}"
            )));
        }
        if cfg.gauss_points == 0 {
            return Err(Error::InvalidArgument("gauss_points must be positive".into()));
        }

        let width = cfg.panel.unwrap_or(2.0 * grid.dx());
        let gl = gauss_legendre(cfg.gauss_points);
        let mut tasks = Vec::new();
        let leaf = |tau: f64, scale: f64, piece: Piece, bulk: bool, tasks: &mut Vec<Task>| {
            let (n_disc, n_cone) = if bulk { (Normal::Volume, Normal::Volume) } else { (Normal::Time, Normal::Outgoing) };
            if with_disc {
                for (r, w) in panels(0.0, radius, width, &gl) {
                    tasks.push(Task { t: tau, r, weight: scale * w * r * r, piece, normal: n_disc });
                }
            }
            let ut = u(tau);
            for (v, w) in panels(0.5 * (tau + radius), v_max, width, &gl) {
                let r = v - ut;
                tasks.push(Task { t: v + ut, r, weight: scale * w * r * r, piece, normal: n_cone });
            }
        };
        for (tau, w) in panels(tau1, tau2, width, &gl) {
            leaf(tau, w, Piece::Bulk, true, &mut tasks);
        }
        leaf(tau1, 1.0, Piece::Lower, false, &mut tasks);
        leaf(tau2, 1.0, Piece::Upper, false, &mut tasks);
        for (uu, w) in panels(u(tau1), u(tau2), width, &gl) {
            let r = v_max - uu;
            tasks.push(Task { t: v_max + uu, r, weight: w * r * r, piece: Piece::Incoming, normal: Normal::Incoming });
        }
        if !with_disc {
            for (t, w) in panels(tau1, tau2, width, &gl) {
                tasks.push(Task {
                    t,
                    r: radius,
                    weight: w * radius * radius,
                    piece: Piece::Cylinder,
                    normal: Normal::Inward,
                });
            }
        }
        tasks.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(Self {
            mult,
            metric,
            quad: SphereQuadrature::new(cfg.quad_degree),
            weight_alpha: cfg.weight_alpha,
            floor: cfg.floor,
            dx: grid.dx(),
            v_max,
            tasks,
            cursor: 0,
            sums: [0.0; 6],
        })
    }

    /// `(identity term, weighted bulk)` of one sphere.
    fn sphere(&self, w: &Window<'_>, task: &Task) -> Result<(f64, f64)> {
        let view = TimeView::new(w, task.t)?;
        let (mut main, mut weighted) = (0.0, 0.0);
        for (om, wk) in self.quad.nodes.iter().zip(&self.quad.weights) {
            let x = [task.r * om[0], task.r * om[1], task.r * om[2]];
            let jet = view.jet_at(&x)?;
            let metric = self.metric.eval(task.t, &x);
            let b = currents(&self.mult, &jet, &metric, task.t, &x)?;
            let j = b.j_upper;
            let radial = om[0] * j[1] + om[1] * j[2] + om[2] * j[3];
            let density = match task.normal {
                Normal::Volume => b.divergence,
                Normal::Time => j[0],
                Normal::Outgoing => j[0] - radial,
                Normal::Incoming => j[0] + radial,
                Normal::Inward => -radial,
            };
            main += wk * b.volume * density;
            if task.normal == Normal::Volume {
                let g = jet.grad();
                let e = g[0] * g[0] + g[1] * g[1] + g[2] * g[2] + g[3] * g[3];
                weighted += wk * b.volume * (1.0 + task.r).powf(-1.0 - self.weight_alpha) * e;
            }
        }
        Ok((task.weight * main, task.weight * weighted))
    }

    pub fn finish(self) -> Result<AuditTerms> {
        if self.cursor < self.tasks.len() {
            return Err(Error::RegionOutsideTrajectory(format!(
                "{} audit samples lie beyond the observed run",
                self.tasks.len() - self.cursor
            )));
        }
        let [bulk, weighted_bulk, lower, upper, incoming, cylinder] = self.sums;
        let boundary = upper - lower + incoming + cylinder;
        let scale = bulk.abs().max(upper.abs() + lower.abs() + incoming.abs() + cylinder.abs()).max(self.floor);
        Ok(AuditTerms {
            dx: self.dx,
            v_max: self.v_max,
            bulk,
            weighted_bulk,
            flux_lower: lower,
            flux_upper: upper,
            flux_incoming: incoming,
            flux_cylinder: cylinder,
            boundary,
            residual: (bulk - boundary).abs() / scale,
        })
    }
}

impl Observer for IdentityAuditor {
    fn observe(&mut self, w: &Window<'_>) -> Result<()> {
        let eps = 1e-9 * (1.0 + w.cur.t.abs());
        let mut end = self.cursor;
        while end < self.tasks.len() {
            let t = self.tasks[end].t;
            let due = match w.next {
                Some(n) => t < n.t - eps,
                None => t <= w.cur.t + eps,
            };
            if !due {
                break;
            }
            end += 1;
        }
        if end == self.cursor {
            return Ok(());
        }
        let batch = &self.tasks[self.cursor..end];
        let parts: Vec<(f64, f64)> = batch.par_iter().map(|t| self.sphere(w, t)).collect::<Result<Vec<_>>>()?;
        for (task, (main, weighted)) in batch.iter().zip(parts) {
            let slot = match task.piece {
                Piece::Bulk => {
                    self.sums[1] += weighted;
                    0
                }
                Piece::Lower => 2,
                Piece::Upper => 3,
                Piece::Incoming => 4,
                Piece::Cylinder => 5,
            };
            self.sums[slot] += main;
        }
        self.cursor = end;
        Ok(())
    }
}

/// Runs the solver once per grid spacing and audits the identity on each run.
/// `solver.grid` fixes the half width; `cfg.t_available` is taken from
/// `solver.t_final`.
pub fn audit_identity(
    spec: &EquationSpec,
    data: &InitialData,
    solver: &SolverConfig,
    spacings: &[f64],
    mult: &MultiplierSpec,
    cfg: &AuditConfig,
) -> Result<AuditReport> {
    let mut reports = audit_identities(spec, data, solver, spacings, std::slice::from_ref(mult), cfg)?;
    Ok(reports.remove(0))
}

/// [`audit_identity`] for several multipliers sharing one run per spacing.
pub fn audit_identities(
    spec: &EquationSpec,
    data: &InitialData,
    solver: &SolverConfig,
    spacings: &[f64],
    mults: &[MultiplierSpec],
    cfg: &AuditConfig,
) -> Result<Vec<AuditReport>> {
    let mut terms: Vec<Vec<AuditTerms>> = vec![Vec::with_capacity(spacings.len()); mults.len()];
    let cfg = AuditConfig { t_available: solver.t_final, ..cfg.clone() };
    for &dx in spacings {
        let grid = GridSpec::with_spacing(solver.grid.half_width, dx)?;
        let scfg = SolverConfig { grid, ..solver.clone() };
        let mut auditors = mults
            .iter()
            .map(|m| IdentityAuditor::new(&cfg, &grid, spec.metric.clone(), m.clone()))
            .collect::<Result<Vec<_>>>()?;
        let mut observers: Vec<&mut dyn Observer> = auditors.iter_mut().map(|a| a as &mut dyn Observer).collect();
        run(spec, &scfg, data, &mut observers)?;
        for ((auditor, out), m) in auditors.into_iter().zip(&mut terms).zip(mults) {
            let t = auditor.finish()?;
            log::info!("audit {} dx = {dx}: residual {:e}", m.name(), t.residual);
            out.push(t);
        }
    }
    Ok(mults.iter().zip(terms).map(|(m, t)| AuditReport::from_terms(m.name(), cfg.region, t)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composite_gauss_integrates_cubics_exactly() {
        let gl = gauss_legendre(2);
        let nodes = panels(0.5, 3.2, 0.4, &gl);
        let s: f64 = nodes.iter().map(|(x, w)| w * x * x * x).sum();
        assert!((s - (3.2f64.powi(4) - 0.5f64.powi(4)) / 4.0).abs() < 1e-12);
        assert!(panels(1.0, 1.0, 0.5, &gl).is_empty());
    }

    #[test]
    fn zero_field_audit_is_floor_regularized() {
        let grid = GridSpec::new(8.0, 32).unwrap();
        let mut solver = SolverConfig::new(grid, 3.0);
        solver.leaf_spacing = 0.5;
        let cfg = AuditConfig {
            radius: 2.0,
            region: AuditRegion { tau1: 0.5, tau2: 2.0, v_max: None },
            ..AuditConfig::default()
        };
        let rep = audit_identity(&EquationSpec::flat_linear(), &InitialData::Zero, &solver, &[0.5], &MultiplierSpec::Dt, &cfg)
            .unwrap();
        assert_eq!(rep.terms[0].bulk, 0.0);
        assert_eq!(rep.terms[0].boundary, 0.0);
        assert_eq!(rep.residuals, vec![0.0]);
        assert_eq!(rep.order, None);
    }

    #[test]
    fn region_must_lie_in_the_run() {
        let grid = GridSpec::new(8.0, 32).unwrap();
        let mut cfg = AuditConfig {
            radius: 2.0,
            region: AuditRegion { tau1: 0.5, tau2: 5.0, v_max: None },
            t_available: 3.0,
            ..AuditConfig::default()
        };
        let e = IdentityAuditor::new(&cfg, &grid, MetricSpec::Flat, MultiplierSpec::Dt);
        assert!(matches!(e, Err(Error::RegionOutsideTrajectory(_))));
        cfg.region = AuditRegion { tau1: 0.5, tau2: 2.0, v_max: Some(50.0) };
        let e = IdentityAuditor::new(&cfg, &grid, MetricSpec::Flat, MultiplierSpec::Dt);
        assert!(matches!(e, Err(Error::RegionOutsideTrajectory(_))));
    }

    #[test]
    fn order_is_the_log_log_slope() {
        let mk = |dx: f64, res: f64| AuditTerms { dx, residual: res, ..Default::default() };
        let rep = AuditReport::from_terms(
            "dt".into(),
            AuditRegion { tau1: 0.0, tau2: 1.0, v_max: None },
            vec![mk(0.5, 4e-2), mk(0.25, 1e-2), mk(0.125, 2.5e-3)],
        );
        assert!((rep.order.unwrap() - 2.0).abs() < 1e-12);
    }
}
