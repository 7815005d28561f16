//! Decay-rate fits, the dyadic pigeonhole diagnostic and the weighted
//! time-integration identity.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub window: (f64, f64),
    /// Slope of `log y` against `log(1 + tau)`.
    pub exponent: f64,
    /// Intercept of the same line, so `y ~ exp(intercept) (1+tau)^exponent`.
    pub intercept: f64,
    /// 95% confidence interval of the exponent (indicative only: the
    /// residuals of a time series are serially correlated).
    pub ci95: (f64, f64),
    pub r_squared: f64,
    pub points: usize,
    /// Points in the window skipped because their value was exactly zero.
    pub zeros_excluded: usize,
}

/// Least-squares power-law fit over the points with `tau` in `window`.
pub fn fit_exponent(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut zeros = 0;
    for &(tau, y) in series {
        if tau < window.0 || tau > window.1 {
            continue;
        }
        if y == 0.0 {
            zeros += 1;
            continue;
        }
        if !(y > 0.0) {
            return Err(Error::NonPositiveValue { tau, value: y });
        }
        xs.push((1.0 + tau).ln());
        ys.push(y.ln());
    }
    let n = xs.len();
    if n < 5 {
        return Err(Error::InsufficientPoints { needed: 5, got: n });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("fit window contains a single abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let dof = nf - 2.0;
    let se = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).expect("dof >= 3").inverse_cdf(0.975);
    Ok(DecayFit {
        window,
        exponent: slope,
        intercept,
        ci95: (slope - t * se, slope + t * se),
        r_squared,
        points: n,
        zeros_excluded: zeros,
    })
}

/// Default window: drop `tau < 5` and the last tenth of the run.
pub fn default_window(series: &[(f64, f64)]) -> (f64, f64) {
    let t_end = series.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let t_start = series.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    (t_start.max(5.0), t_end - 0.1 * (t_end - t_start))
}

/// Fits on several windows; exposes intermediate-time rates without a verdict.
pub fn fit_windows(series: &[(f64, f64)], windows: &[(f64, f64)]) -> Vec<Result<DecayFit>> {
    windows.iter().map(|&w| fit_exponent(series, w)).collect()
}

/// Plot-ready rows `log(1+tau), log y` for positive values.
pub fn loglog_csv(series: &[(f64, f64)]) -> String {
    let mut out = String::from("log1p_tau,log_y\n");
    for &(tau, y) in series {
        if y > 0.0 {
            out.push_str(&format!("{:.17e},{:.17e}\n", (1.0 + tau).ln(), y.ln()));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Pigeonhole set
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicBlock {
    pub start: f64,
    pub end: f64,
    pub samples: usize,
    pub in_set: usize,
    pub density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PigeonholeReport {
    pub beta: f64,
    pub threshold_constant: f64,
    pub members: Vec<f64>,
    pub blocks: Vec<DyadicBlock>,
    pub min_density: f64,
    /// Whether every member `tau1` with `4 tau1 <= tau_max` has another member in `[2 tau1, 4 tau1]`.
    pub companion_ok: bool,
    /// Members that lack a companion.
    pub companion_failures: Vec<f64>,
}

/// Marks the leaf times where `value <= c (1 + tau)^{-1-beta}` and reports
/// the density of that set in each dyadic block `[2^j, 2^{j+1})` lying
/// inside the sampled range.
pub fn pigeonhole_report(series: &[(f64, f64)], beta: f64, c: f64) -> PigeonholeReport {
    let in_set: Vec<bool> =
        series.iter().map(|&(tau, y)| y <= c * (1.0 + tau).powf(-1.0 - beta)).collect();
    let members: Vec<f64> = series.iter().zip(&in_set).filter(|(_, &m)| m).map(|(p, _)| p.0).collect();
    let t_min = series.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t_max = series.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);

    let mut blocks = Vec::new();
    let mut start = 1.0_f64;
    while 2.0 * start <= t_max {
        if start >= t_min {
            let end = 2.0 * start;
            let mut samples = 0;
            let mut hits = 0;
            for (p, &m) in series.iter().zip(&in_set) {
                if p.0 >= start && p.0 < end {
                    samples += 1;
                    hits += m as usize;
                }
            }
            if samples > 0 {
                blocks.push(DyadicBlock {
                    start,
                    end,
                    samples,
                    in_set: hits,
                    density: hits as f64 / samples as f64,
                });
            }
        }
        start *= 2.0;
    }
    let min_density = blocks.iter().map(|b| b.density).fold(1.0_f64, f64::min);

    let mut failures = Vec::new();
    for &t1 in &members {
        if 4.0 * t1 > t_max {
            continue;
        }
        let found = members.iter().any(|&t2| t2 >= 2.0 * t1 && t2 <= 4.0 * t1);
        if !found {
            failures.push(t1);
        }
    }
    PigeonholeReport {
        beta,
        threshold_constant: c,
        members,
        blocks,
        min_density,
        companion_ok: failures.is_empty(),
        companion_failures: failures,
    }
}

/// Smallest constant `C` with `int_{tau1}^{tau_end} d(tau) dtau <= C (1 + tau1)^{-beta}`
/// for every sampled `tau1`, integrating the sampled density by the trapezoid rule.
pub fn tail_integral_constant(series: &[(f64, f64)], beta: f64) -> f64 {
    let n = series.len();
    let mut tail = 0.0;
    let mut best = 0.0_f64;
    for i in (0..n).rev() {
        if i + 1 < n {
            let (t0, y0) = series[i];
            let (t1, y1) = series[i + 1];
            tail += 0.5 * (t1 - t0) * (y0 + y1);
        }
        best = best.max(tail * (1.0 + series[i].0).powf(beta));
    }
    best
}

// ---------------------------------------------------------------------------
// Weighted time-integration identity
// ---------------------------------------------------------------------------

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
/// Gauss weights for the odd-indexed Kronrod nodes (and the centre).
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = K15_WEIGHTS[7] * fc;
    let mut g = G7_WEIGHTS[3] * fc;
    for j in 0..7 {
        let dx = h * GK_NODES[j];
        let s = f(c - dx) + f(c + dx);
        k += K15_WEIGHTS[j] * s;
        if j % 2 == 1 {
            g += G7_WEIGHTS[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) integration to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut stack = vec![(a, b, tol, 0u32)];
    let mut total = 0.0;
    while let Some((lo, hi, t, depth)) = stack.pop() {
        let (val, err) = gk15(f, lo, hi);
        if !val.is_finite() {
            return Err(Error::QuadratureFailure { a, b, estimate: val });
        }
        if err <= t.max(1e-15 * val.abs()) {
            total += val;
        } else if depth >= 40 {
            return Err(Error::QuadratureFailure { a, b, estimate: total + val });
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, 0.5 * t, depth + 1));
            stack.push((lo, mid, 0.5 * t, depth + 1));
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LweightResidual {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Compares `int (1+s)^beta f(s) ds` over `[tau1, tau2]` with the integrated
/// by parts form
/// `beta int (1+tau)^{beta-1} int_tau^{tau2} f ds dtau + (1+tau1)^beta int f`.
pub fn check_lweight_identity<F: Fn(f64) -> f64>(f: &F, beta: f64, tau1: f64, tau2: f64) -> Result<LweightResidual> {
    let tol = 1e-13;
    let lhs = integrate(&|s: f64| (1.0 + s).powf(beta) * f(s), tau1, tau2, tol)?;
    let tail = |tau: f64| integrate(f, tau, tau2, tol * 0.01);
    let inner_failed = std::cell::Cell::new(false);
    let outer = integrate(
        &|tau: f64| match tail(tau) {
            Ok(v) => (1.0 + tau).powf(beta - 1.0) * v,
            Err(_) => {
                inner_failed.set(true);
                f64::NAN
            }
        },
        tau1,
        tau2,
        tol,
    );
    if inner_failed.get() {
        return Err(Error::QuadratureFailure { a: tau1, b: tau2, estimate: f64::NAN });
    }
    let rhs = beta * outer? + (1.0 + tau1).powf(beta) * tail(tau1)?;
    let floor = 1e-300;
    Ok(LweightResidual { lhs, rhs, residual: (lhs - rhs).abs() / (lhs.abs() + floor) })
}
