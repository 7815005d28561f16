//! Property tests for the structural invariants of each module.

use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use statrs::function::gamma::gamma;

use qlwave_core::decay::{check_lweight_identity, fit_exponent, pigeonhole_report};
use qlwave_core::diagnostics::jet::Jet;
use qlwave_core::diagnostics::{weighted_time_integral, DiagnosticsConfig, LeafRecorder};
use qlwave_core::evolve::{radial_jet, replay, EquationSpec, Level, Profile, SourceSpec};
use qlwave_core::foliation::{cone_integral, make_leaf, DiscNodes, GridSpec, SphereQuadrature};
use qlwave_core::geometry::{
    check_null_condition, frame_component, minkowski_pairing, null_frame_at, validate_envelope, validate_params,
    DecayParams, EnvelopeH, EnvelopeSamplePlan, Leg, MetricSpec, NullFormTensor, SpacetimePoint,
};
use qlwave_core::multipliers::{currents, pweight_vector, MultiplierSpec};

fn point() -> impl Strategy<Value = [f64; 3]> {
    [-20.0..20.0f64, -20.0..20.0f64, -20.0..20.0f64].prop_filter("away from the origin", |x| {
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() > 1e-3
    })
}

/// `int_{S^2} x^a y^b z^c`.
fn sphere_moment(a: u32, b: u32, c: u32) -> f64 {
    if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
        return 0.0;
    }
    let h = |k: u32| gamma((k as f64 + 1.0) / 2.0);
    2.0 * h(a) * h(b) * h(c) / gamma((a + b + c) as f64 / 2.0 + 1.5)
}

fn random_jet(vals: &[f64]) -> Jet {
    let mut j = Jet::zero(2);
    let mut it = vals.iter();
    for t in 0..=2usize {
        for x in 0..=(2 - t) {
            for y in 0..=(2 - t - x) {
                for z in 0..=(2 - t - x - y) {
                    j.set([t, x, y, z], *it.next().unwrap());
                }
            }
        }
    }
    j
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn params_verdict_matches_the_chain(
        alpha in 0.02..0.12f64,
        eps_frac in 0.1..1.5f64,
        a1_off in -0.01..0.02f64,
        a2_off in -0.01..0.03f64,
        radius in 3.0..12.0f64,
    ) {
        let epsilon = eps_frac * alpha * alpha / 4.0;
        let alpha1 = (2.0 * alpha + alpha * epsilon) / (2.0 - alpha) + a1_off;
        let alpha2 = alpha1 + a2_off;
        let p = DecayParams { delta0: 0.01, alpha, epsilon, alpha1, alpha2, radius };
        let chain = 0.0 < epsilon
            && epsilon < alpha * alpha / 4.0
            && alpha * alpha / 4.0 < alpha
            && alpha < (2.0 * alpha + alpha * epsilon) / (2.0 - alpha)
            && (2.0 * alpha + alpha * epsilon) / (2.0 - alpha) <= alpha1
            && alpha1 < alpha2
            && alpha2 <= 7.0 / 3.0 * alpha - alpha1 - epsilon
            && alpha <= 0.1
            && radius > 4.0;
        prop_assert_eq!(validate_params(&p).is_empty(), chain);
    }

    #[test]
    fn null_coordinates_are_consistent(t in -10.0..50.0f64, x in point()) {
        let p = SpacetimePoint::new(t, x);
        prop_assert!(p.r() >= 0.0);
        prop_assert!((p.u() + p.v() - t).abs() <= 1e-12 * (1.0 + t.abs()));
        prop_assert!((p.v() - p.u() - p.r()).abs() <= 1e-12 * (1.0 + p.r()));
    }

    #[test]
    fn frame_legs_are_null_and_paired(t in 0.0..10.0f64, x in point()) {
        let f = null_frame_at(&SpacetimePoint::new(t, x)).unwrap();
        prop_assert!(minkowski_pairing(&f.l, &f.l).abs() < 1e-12);
        prop_assert!(minkowski_pairing(&f.lbar, &f.lbar).abs() < 1e-12);
        prop_assert!((minkowski_pairing(&f.l, &f.lbar) + 2.0).abs() < 1e-12);
        for s in [f.s1, f.s2] {
            prop_assert!((minkowski_pairing(&s, &s) - 1.0).abs() < 1e-12);
            prop_assert!(minkowski_pairing(&s, &f.l).abs() < 1e-12);
            prop_assert!(minkowski_pairing(&s, &f.lbar).abs() < 1e-12);
        }
        prop_assert!(minkowski_pairing(&f.s1, &f.s2).abs() < 1e-12);
    }

    #[test]
    fn gauge_rotation_leaves_null_components_unchanged(
        x in point(),
        entries in proptest::collection::vec(-1.0..1.0f64, 10),
        angle in 0.0..(2.0 * PI),
    ) {
        let mut k = [[0.0; 4]; 4];
        let mut it = entries.iter();
        for mu in 0..4 {
            for nu in mu..4 {
                let v = *it.next().unwrap();
                k[mu][nu] = v;
                k[nu][mu] = v;
            }
        }
        let f = null_frame_at(&SpacetimePoint::new(0.0, x)).unwrap();
        let g = f.rotate_tangents(angle);
        for (a, b) in [(Leg::Lbar, Leg::Lbar), (Leg::L, Leg::Lbar), (Leg::L, Leg::L)] {
            prop_assert!((frame_component(&k, &f, a, b) - frame_component(&k, &g, a, b)).abs() < 1e-12);
        }
        let trace = |fr| frame_component(&k, fr, Leg::S1, Leg::S1) + frame_component(&k, fr, Leg::S2, Leg::S2);
        prop_assert!((trace(&f) - trace(&g)).abs() < 1e-12);
    }

    #[test]
    fn null_verdict_is_scale_invariant(s in -3.0..3.0f64) {
        let s = 10f64.powf(s);
        for (nf, expect) in [
            (NullFormTensor::dt_box(), true),
            (NullFormTensor::minkowski_quadratic(), true),
            (NullFormTensor::cubic_tt_only(), false),
        ] {
            let rep = check_null_condition(&nf.scaled(s), 256, 1e-12);
            prop_assert_eq!(rep.pass, expect);
        }
    }

    #[test]
    fn envelopes_decrease_outward(tau in 0.0..100.0f64, r in 0.0..100.0f64, dr in 0.0..10.0f64) {
        let e = EnvelopeH::new(0.01, 0.1);
        prop_assert!(e.h_bar(r + dr) <= e.h_bar(r));
        prop_assert!(e.h(tau, r + dr) <= e.h(tau, r));
        // Hbar <= H once r_+^{1/2} >= tau_+^{(1+alpha)/2}.
        let r_far = (1.0 + tau).powf(1.1) - 1.0 + r;
        prop_assert!(e.h_bar(r_far) <= e.h(tau, r_far) * (1.0 + 1e-12));
    }

    #[test]
    fn sphere_rule_is_exact_to_its_degree(degree in 1usize..16, a in 0u32..8, b in 0u32..8, c in 0u32..8) {
        let q = SphereQuadrature::new(degree);
        prop_assert!((q.weights.iter().sum::<f64>() - 4.0 * PI).abs() < 1e-12);
        prop_assume!((a + b + c) as usize <= degree);
        let got = q.integrate(|w| w[0].powi(a as i32) * w[1].powi(b as i32) * w[2].powi(c as i32));
        prop_assert!((got - sphere_moment(a, b, c)).abs() < 1e-12, "{got} vs {}", sphere_moment(a, b, c));
    }

    #[test]
    fn cone_samples_lie_on_the_cone(tau in 0.0..20.0f64, radius in 4.5..8.0f64, dv in 0.2..1.0f64) {
        let grid = GridSpec::new(16.0, 32).unwrap();
        let params = DecayParams { radius, ..DecayParams::default() };
        let disc = Arc::new(DiscNodes::new(&grid, radius));
        let quad = Arc::new(SphereQuadrature::new(5));
        let leaf = make_leaf(tau, &params, &grid, disc, quad, dv, 30.0).unwrap();
        for s in leaf.samples() {
            prop_assert!((s.t - s.r - (tau - radius)).abs() < 1e-12 * (1.0 + s.t.abs()));
            prop_assert!(s.r >= radius);
            prop_assert!(s.v >= leaf.v_start && s.v <= leaf.v_max());
        }
        let f = |s: &qlwave_core::foliation::ConeSample| s.x[0].sin() + s.r;
        let g = |s: &qlwave_core::foliation::ConeSample| s.x[2] * s.x[1];
        let sum = cone_integral(&leaf, |s| f(s) + g(s));
        let split = cone_integral(&leaf, f) + cone_integral(&leaf, g);
        prop_assert!((sum - split).abs() <= 1e-12 * (1.0 + sum.abs()));
    }

    #[test]
    fn currents_are_quadratic_in_the_field(
        vals in proptest::collection::vec(-1.0..1.0f64, 15),
        x in point(),
        a in -5.0..5.0f64,
    ) {
        let spec = MetricSpec::StaticBump { delta0: 0.01, alpha: 0.1, radius: 10.0, c_time: 1.0, c_space: -0.5 };
        let s = spec.eval(0.3, &x);
        let jet = random_jet(&vals);
        let scaled = random_jet(&vals.iter().map(|v| a * v).collect::<Vec<_>>());
        for m in [MultiplierSpec::Dt, MultiplierSpec::Morawetz { alpha: 0.1 }] {
            let c1 = currents(&m, &jet, &s, 0.3, &x).unwrap();
            let c2 = currents(&m, &scaled, &s, 0.3, &x).unwrap();
            let tol = 1e-12 * (1.0 + a * a);
            prop_assert!((c2.divergence - a * a * c1.divergence).abs() <= tol * (1.0 + c1.divergence.abs()));
            for mu in 0..4 {
                prop_assert!((c2.j_upper[mu] - a * a * c1.j_upper[mu]).abs() <= tol * (1.0 + c1.j_upper[mu].abs()));
            }
        }
    }

    #[test]
    fn modified_current_is_linear_in_the_multiplier(
        vals in proptest::collection::vec(-1.0..1.0f64, 15),
        x in point(),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
    ) {
        let s = MetricSpec::Flat.eval(0.0, &x);
        let jet = random_jet(&vals);
        let one = |t: f64, y: &[f64; 3]| ([1.0 + 0.1 * t, y[1], 0.2 * y[0] * y[2], 0.0], 0.5 + 0.1 * y[0]);
        let two = |_t: f64, y: &[f64; 3]| ([y[2], 0.0, 1.0, y[0] * y[1] * 0.01], (0.1 * y[1]).sin());
        let custom = |name: &str, f: Arc<dyn Fn(f64, &[f64; 3]) -> ([f64; 4], f64) + Send + Sync>| {
            MultiplierSpec::Custom { name: name.into(), field: f }
        };
        let sum = custom("sum", Arc::new(move |t, y| {
            let (p, c) = one(t, y);
            let (q, d) = two(t, y);
            ([a * p[0] + b * q[0], a * p[1] + b * q[1], a * p[2] + b * q[2], a * p[3] + b * q[3]], a * c + b * d)
        }));
        let c1 = currents(&custom("one", Arc::new(one)), &jet, &s, 0.0, &x).unwrap();
        let c2 = currents(&custom("two", Arc::new(two)), &jet, &s, 0.0, &x).unwrap();
        let cs = currents(&sum, &jet, &s, 0.0, &x).unwrap();
        for mu in 0..4 {
            let lin = a * c1.j_lower[mu] + b * c2.j_lower[mu];
            prop_assert!((cs.j_lower[mu] - lin).abs() <= 1e-10 * (1.0 + lin.abs()));
        }
        // The divergence needs derivatives of the multiplier, taken by differences.
        let lin = a * c1.divergence + b * c2.divergence;
        prop_assert!((cs.divergence - lin).abs() <= 1e-5 * (1.0 + lin.abs()));
    }

    #[test]
    fn pweight_reduces_to_a_power_of_l_in_flat_space(p in 0.5..2.0f64, x in point()) {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        prop_assume!(r >= 1.0);
        let v = pweight_vector(p, 1.0, &x, &MetricSpec::Flat.eval(0.0, &x)).unwrap();
        let rp = r.powf(p);
        let expect = [rp, rp * x[0] / r, rp * x[1] / r, rp * x[2] / r];
        for mu in 0..4 {
            prop_assert!((v[mu] - expect[mu]).abs() <= 1e-14 * rp);
        }
    }

    #[test]
    fn fit_exponent_is_shift_equivariant(k in -3.0..0.0f64, c in -5.0..5.0f64) {
        let series: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let tau = 1.0 + i as f64;
                (tau, (1.0 + tau).powf(k) * (1.0 + 0.1 * (tau * 0.7).sin()))
            })
            .collect();
        let scaled: Vec<(f64, f64)> = series.iter().map(|&(t, y)| (t, y * c.exp())).collect();
        let f1 = fit_exponent(&series, (5.0, 35.0)).unwrap();
        let f2 = fit_exponent(&scaled, (5.0, 35.0)).unwrap();
        prop_assert!((f1.exponent - f2.exponent).abs() < 1e-10);
        prop_assert!((f2.intercept - f1.intercept - c).abs() < 1e-10);
    }

    #[test]
    fn pigeonhole_set_grows_with_the_threshold(c1 in 0.01..10.0f64, factor in 1.0..10.0f64, seed in 0u64..1000) {
        let series: Vec<(f64, f64)> = (0..64)
            .map(|i| {
                let tau = 0.5 * i as f64;
                let wobble = 1.0 + 0.5 * ((tau + seed as f64) * 1.3).sin();
                (tau, wobble * (1.0 + tau).powf(-1.8))
            })
            .collect();
        let small = pigeonhole_report(&series, 1.0, c1);
        let large = pigeonhole_report(&series, 1.0, c1 * factor);
        for m in &small.members {
            prop_assert!(large.members.contains(m));
        }
    }

    #[test]
    fn slab_integrals_are_additive(beta in -1.0..2.0f64, cut in 1usize..15) {
        let series: Vec<(f64, f64)> = (0..=16).map(|i| (0.5 * i as f64, 1.0 / (1.0 + i as f64))).collect();
        let (t1, t2, t3) = (0.0, series[cut].0, 8.0);
        let whole = weighted_time_integral(&series, t1, t3, beta).unwrap();
        let parts = weighted_time_integral(&series, t1, t2, beta).unwrap()
            + weighted_time_integral(&series, t2, t3, beta).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-12 * whole.abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lweight_identity_holds_across_the_beta_battery(a in 0.1..2.0f64, b in 0.05..1.0f64, c in -1.0..1.0f64) {
        let f = move |s: f64| a * (-b * s).exp() + c * (s * 0.5).sin() + 1.0;
        for beta in [-2.0, -1.1, 0.0, 1.0, 2.5] {
            let r = check_lweight_identity(&f, beta, 0.5, 6.0).unwrap();
            prop_assert!(r.residual <= 1e-8, "beta {beta}: {r:?}");
        }
    }

    #[test]
    fn flat_metric_always_meets_the_envelope(alpha in 0.03..0.1f64, radius in 4.5..12.0f64) {
        let epsilon = 0.5 * alpha * alpha / 4.0;
        let alpha1 = (2.0 * alpha + alpha * epsilon) / (2.0 - alpha) + 0.001;
        let p = DecayParams { delta0: 0.01, alpha, epsilon, alpha1, alpha2: alpha1 + 0.001, radius };
        let rep = validate_envelope(&MetricSpec::Flat, &p, &EnvelopeSamplePlan::standard(radius, 20.0));
        prop_assert!(rep.pass);
    }
}

/// The exact spherical wave built from `profile`, level by level.
fn exact_levels(grid: GridSpec, dt: f64, profile: Profile) -> impl FnMut(usize) -> qlwave_core::Result<Level> {
    move |i| {
        let t = i as f64 * dt;
        let mut level =
            Level { t, step: i, phi: vec![0.0; grid.len()], pi: vec![0.0; grid.len()], accel: vec![0.0; grid.len()] };
        for c in 0..grid.len() {
            let (a, b, k) = grid.unravel(c);
            let x = grid.position(a, b, k);
            let j = radial_jet(&profile, t, (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt());
            level.phi[c] = j.phi;
            level.pi[c] = j.phi_t;
            level.accel[c] = j.phi_tt;
        }
        Ok(level)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3))]

    #[test]
    fn ledger_entries_scale_quadratically(amp in 0.1..10.0f64) {
        let grid = GridSpec::with_spacing(6.0, 0.5).unwrap();
        let dt = 0.25;
        let cfg = DiagnosticsConfig {
            params: DecayParams { radius: 3.0, ..DecayParams::default() },
            leaf_spacing: 0.5,
            tau_max: 2.0,
            t_available: 3.0,
            k_max: 1,
            ..DiagnosticsConfig::default()
        };
        let run = |a: f64| {
            let mut rec = LeafRecorder::new(cfg.clone(), grid, SourceSpec::None).unwrap();
            let n = (3.0 / dt) as usize + 1;
            replay(&grid, &EquationSpec::flat_linear(), 4, dt, n, exact_levels(grid, dt, Profile::new(a, 1.5, 1.0)), &mut [&mut rec])
                .unwrap();
            rec.finish()
        };
        let (l1, la) = (run(1.0), run(amp));
        for name in l1.quantity_names() {
            for ((_, v1), (_, va)) in l1.series(&name).unwrap().into_iter().zip(la.series(&name).unwrap()) {
                prop_assert!((va - amp * amp * v1).abs() <= 1e-10 * amp * amp * v1.abs() + 1e-300, "{name}: {va} vs {v1}");
            }
        }
        for (r1, ra) in l1.leaves.iter().zip(&la.leaves) {
            // Weights (1+r)^{-1-alpha} <= (1+r)^{-1-epsilon}.
            prop_assert!(r1.s_alpha <= r1.s_epsilon * (1.0 + 1e-12));
            prop_assert!(ra.s_alpha <= ra.s_epsilon * (1.0 + 1e-12));
        }
    }
}
