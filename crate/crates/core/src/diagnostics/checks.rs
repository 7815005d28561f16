//! Checks built on a finished ledger: lemma ratios, the bootstrap monitor and
//! the pointwise decay table.

use serde::{Deserialize, Serialize};

use super::ledger::{EnergyLedger, MonitorRecord, ProbeRow};

/// `num / den` with `0 / 0 = 0`.
pub fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaRow {
    pub tau: f64,
    /// `max_r r int phi^2 dw / (4 Etilde)`.
    pub sphere: f64,
    /// `[int_disc (phi/(1+r))^2 + int_cone (phi/(1+r))^2] / (12 Etilde)`.
    pub hardy: f64,
    /// `int_disc phi^2 / (12 (1+R)^2 Etilde)`.
    pub hardy_disc: f64,
    /// `int r^{1-alpha1} phi^2 / [R^{1-alpha1} Etilde + int r^{1+alpha2} (d_v psi)^2]`.
    pub weighted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub slack: f64,
    pub rows: Vec<LemmaRow>,
    pub max_sphere: f64,
    pub max_hardy: f64,
    pub max_hardy_disc: f64,
    pub max_weighted: f64,
    /// The three ratios with explicit constants stay below `1 + slack` and the
    /// fourth is finite.
    pub pass: bool,
}

pub fn lemma_checks(ledger: &EnergyLedger, slack: f64) -> LemmaReport {
    let p = &ledger.params;
    let rows: Vec<LemmaRow> = ledger
        .leaves
        .iter()
        .filter(|l| l.complete)
        .map(|l| {
            let et = l.energy_tilde;
            LemmaRow {
                tau: l.tau,
                sphere: ratio(l.sphere_max, 4.0 * et),
                hardy: ratio(l.hardy_disc + l.hardy_cone, 12.0 * et),
                hardy_disc: ratio(l.plain_disc, 12.0 * (1.0 + p.radius).powi(2) * et),
                weighted: ratio(l.pphi_lhs, p.radius.powf(1.0 - p.alpha1) * et + l.pphi_weighted),
            }
        })
        .collect();
    let max = |f: fn(&LemmaRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let (ms, mh, md, mw) = (max(|r| r.sphere), max(|r| r.hardy), max(|r| r.hardy_disc), max(|r| r.weighted));
    let lim = 1.0 + slack;
    LemmaReport {
        slack,
        pass: ms <= lim && mh <= lim && md <= lim && mw.is_finite(),
        max_sphere: ms,
        max_hardy: mh,
        max_hardy_disc: md,
        max_weighted: mw,
        rows,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub tau_min: f64,
    pub tau_max: f64,
    pub k_max: usize,
    pub truncation: String,
    pub rows: Vec<(f64, MonitorRecord)>,
    pub worst: MonitorRecord,
    /// Every ratio is at most one.
    pub pass: bool,
}

/// Bootstrap ratios of the complete leaves with `tau` in `[tau_min, tau_max]`.
pub fn envelope_monitor(ledger: &EnergyLedger, tau_min: f64, tau_max: f64) -> MonitorReport {
    let eps = 1e-9 * (1.0 + tau_max.abs());
    let rows: Vec<(f64, MonitorRecord)> = ledger
        .leaves
        .iter()
        .filter(|l| l.complete && l.tau >= tau_min - eps && l.tau <= tau_max + eps)
        .map(|l| (l.tau, l.monitor))
        .collect();
    let mut worst = MonitorRecord::default();
    for (_, m) in &rows {
        worst.cone_lbar = worst.cone_lbar.max(m.cone_lbar);
        worst.cone_good = worst.cone_good.max(m.cone_good);
        worst.middle = worst.middle.max(m.middle);
        worst.inner = worst.inner.max(m.inner);
    }
    MonitorReport {
        tau_min,
        tau_max,
        k_max: ledger.k_max,
        truncation: ledger.truncation.clone(),
        pass: worst.max() <= 1.0,
        worst,
        rows,
    }
}

/// A probe row divided by its predicted decay rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedProbe {
    pub row: ProbeRow,
    pub value: f64,
    pub lbar: f64,
    pub good: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeTable {
    pub rows: Vec<NormalizedProbe>,
    pub sup_value: f64,
    pub sup_lbar: f64,
    pub sup_good: f64,
}

/// Normalizes each cone row by `(1+r)^{-1/2} (1+|t-r+R|)^{-1/2-alpha/2}`,
/// `(1+r)^{-1+eps} (1+|t-r+R|)^{-1/2-alpha/2}` and `(1+r)^{-3/2+eps}`.
pub fn pointwise_probe(ledger: &EnergyLedger) -> ProbeTable {
    let p = &ledger.params;
    let rows: Vec<NormalizedProbe> = ledger
        .probe
        .iter()
        .map(|row| {
            let s = 1.0 + row.r;
            let q = (1.0 + (row.t - row.r + p.radius).abs()).powf(0.5 + 0.5 * p.alpha);
            NormalizedProbe {
                row: *row,
                value: row.value * s.sqrt() * q,
                lbar: row.lbar * s.powf(1.0 - p.epsilon) * q,
                good: row.good * s.powf(1.5 - p.epsilon),
            }
        })
        .collect();
    let sup = |f: fn(&NormalizedProbe) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    ProbeTable { sup_value: sup(|r| r.value), sup_lbar: sup(|r| r.lbar), sup_good: sup(|r| r.good), rows }
}

/// Median over leaves of the log-log slope in `1+r` of the bad and good
/// derivative columns along each cone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub leaves_used: usize,
    pub lbar_slope: f64,
    pub good_slope: f64,
    /// Good derivatives decay faster.
    pub pass: bool,
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `None` when no leaf has at least `min_rows` rows above the noise floor
/// `floor * max`.
pub fn probe_ordering(ledger: &EnergyLedger, min_rows: usize, floor: f64) -> Option<OrderingReport> {
    let peak_l = ledger.probe.iter().map(|r| r.lbar).fold(0.0, f64::max);
    let peak_g = ledger.probe.iter().map(|r| r.good).fold(0.0, f64::max);
    let mut taus: Vec<f64> = ledger.probe.iter().map(|r| r.tau).collect();
    taus.dedup();
    let (mut sl, mut sg) = (Vec::new(), Vec::new());
    for tau in taus {
        let rows: Vec<&ProbeRow> = ledger
            .probe
            .iter()
            .filter(|r| r.tau == tau && r.lbar > floor * peak_l && r.good > floor * peak_g)
            .collect();
        if rows.len() < min_rows {
            continue;
        }
        let lp: Vec<(f64, f64)> = rows.iter().map(|r| ((1.0 + r.r).ln(), r.lbar.ln())).collect();
        let gp: Vec<(f64, f64)> = rows.iter().map(|r| ((1.0 + r.r).ln(), r.good.ln())).collect();
        sl.push(slope(&lp));
        sg.push(slope(&gp));
    }
    if sl.is_empty() {
        return None;
    }
    let (l, g) = (median(sl.clone()), median(sg));
    Some(OrderingReport { leaves_used: sl.len(), lbar_slope: l, good_slope: g, pass: g < l })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::ledger::LeafRecord;

    #[test]
    fn zero_over_zero_is_zero() {
        assert_eq!(ratio(0.0, 0.0), 0.0);
        assert_eq!(ratio(1.0, 0.0), f64::INFINITY);
        assert_eq!(ratio(1.0, 4.0), 0.25);
    }

    #[test]
    fn lemma_ratios_use_explicit_constants() {
        let mut l = EnergyLedger::default();
        l.params.radius = 1.0;
        l.leaves.push(LeafRecord {
            complete: true,
            energy_tilde: 1.0,
            sphere_max: 2.0,
            hardy_disc: 3.0,
            hardy_cone: 3.0,
            plain_disc: 24.0,
            ..Default::default()
        });
        let rep = lemma_checks(&l, 0.05);
        assert_eq!(rep.max_sphere, 0.5);
        assert_eq!(rep.max_hardy, 0.5);
        assert_eq!(rep.max_hardy_disc, 0.5);
        assert!(rep.pass);
    }

    #[test]
    fn ordering_detects_faster_good_decay() {
        let mut l = EnergyLedger::default();
        for i in 0..20 {
            let r = 10.0 + i as f64;
            l.probe.push(ProbeRow { tau: 1.0, t: 0.0, r, value: 1.0, lbar: 1.0 / r, good: 1.0 / (r * r) });
        }
        let o = probe_ordering(&l, 5, 1e-8).unwrap();
        assert!(o.pass);
        assert!((o.good_slope - 2.0 * o.lbar_slope).abs() < 0.3);
    }
}
