//! Divergence-identity audit on flat linear runs. The data converge on the
//! origin, reflect and cross the slab `tau in [5, 15]` outward.

use std::f64::consts::PI;

use qlwave_core::evolve::{radial_jet, replay, EquationSpec, InitialData, Level, Profile, SolverConfig};
use qlwave_core::foliation::GridSpec;
use qlwave_core::multipliers::{audit_identity, AuditConfig, AuditRegion, IdentityAuditor, MultiplierSpec};

fn profile() -> Profile {
    Profile::new(1.0, -6.0, 4.0)
}

fn setup() -> (InitialData, SolverConfig, AuditConfig) {
    let data = InitialData::Radial { profile: profile() };
    let mut solver = SolverConfig::new(GridSpec::with_spacing(16.0, 0.5).unwrap(), 17.0);
    solver.courant = 0.5;
    let cfg = AuditConfig {
        radius: 5.0,
        region: AuditRegion { tau1: 5.0, tau2: 15.0, v_max: Some(11.5) },
        ..AuditConfig::default()
    };
    (data, solver, cfg)
}

/// `E = 2 pi int F'(s)^2 ds` for `phi = [F(r - t) - F(-r - t)] / 2r`.
fn exact_energy() -> f64 {
    let p = profile();
    let n = 20000;
    let (a, b) = (p.center - p.width, p.center + p.width);
    let h = (b - a) / n as f64;
    2.0 * PI * (0..n).map(|i| p.derivative(a + (i as f64 + 0.5) * h, 1).powi(2)).sum::<f64>() * h
}

#[test]
fn exact_solution_fluxes_match_the_energy() {
    let (_, _, cfg) = setup();
    let p = profile();
    let dx = 0.5;
    let grid = GridSpec::with_spacing(16.0, dx).unwrap();
    let dt = 0.25;
    let cfg = AuditConfig { t_available: 17.0, ..cfg };
    let mut aud = IdentityAuditor::new(&cfg, &grid, Default::default(), MultiplierSpec::Dt).unwrap();
    let levels = |i: usize| {
        let t = i as f64 * dt;
        let mut level =
            Level { t, step: i, phi: vec![0.0; grid.len()], pi: vec![0.0; grid.len()], accel: vec![0.0; grid.len()] };
        for c in 0..grid.len() {
            let (a, b, k) = grid.unravel(c);
            let x = grid.position(a, b, k);
            let j = radial_jet(&p, t, (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt());
            level.phi[c] = j.phi;
            level.pi[c] = j.phi_t;
            level.accel[c] = j.phi_tt;
        }
        Ok(level)
    };
    let n_levels = (17.0 / dt).round() as usize + 1;
    replay(&grid, &EquationSpec::flat_linear(), 4, dt, n_levels, levels, &mut [&mut aud]).unwrap();
    let t = aud.finish().unwrap();
    let half = 0.5 * exact_energy();
    // Everything on the lower leaf leaves through the closing cone.
    assert!((t.flux_lower + half).abs() < 2e-3 * half, "{t:?}");
    assert!((t.flux_incoming + half).abs() < 2e-3 * half, "{t:?}");
    assert!(t.flux_upper.abs() < 1e-6 * half);
    assert!(t.residual < 1e-2, "{t:?}");
}

#[test]
fn time_translation_residual_shrinks_under_refinement() {
    let (data, solver, cfg) = setup();
    let rep = audit_identity(&EquationSpec::flat_linear(), &data, &solver, &[0.5, 0.25], &MultiplierSpec::Dt, &cfg)
        .unwrap();
    assert!(rep.order.unwrap() >= 1.9, "{rep:?}");
    assert!(rep.residuals[1] <= 1e-3, "{rep:?}");
    let json = serde_json::to_value(&rep).unwrap();
    for key in ["multiplier", "region", "resolutions", "residuals", "order"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn morawetz_bulk_is_positive_and_controlled_by_the_boundary() {
    let (data, solver, cfg) = setup();
    let mult = MultiplierSpec::Morawetz { alpha: 0.1 };
    let rep = audit_identity(&EquationSpec::flat_linear(), &data, &solver, &[0.5], &mult, &cfg).unwrap();
    let t = &rep.terms[0];
    assert!(t.residual <= 0.05, "{t:?}");
    assert!(t.weighted_bulk > 0.0);
    assert!(t.weighted_bulk <= 1.05 * t.boundary.abs(), "{t:?}");
}
