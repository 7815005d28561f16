//! Per-leaf records of a run and their time integrals over slabs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DecayParams;

/// Largest bootstrap ratios met on one leaf, by regime.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    /// `sum int |Lbar Z^k phi|^2 + int |d Lbar Z^k phi|^2` over `2 H^2`, on the cone.
    pub cone_lbar: f64,
    /// Same with the good derivatives, over `2 Hbar^2`, on the cone.
    pub cone_good: f64,
    /// `sum int |d Z^k phi|^2 + int |d^2 Z^k phi|^2` over `2 Hbar^2`, spheres `1 <= r <= R`.
    pub middle: f64,
    /// Pointwise version over `2 delta0^2`, `|x| <= 1`.
    pub inner: f64,
}

impl MonitorRecord {
    pub fn max(&self) -> f64 {
        self.cone_lbar.max(self.cone_good).max(self.middle).max(self.inner)
    }
}

/// Everything measured on one leaf `Sigma_tau`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LeafRecord {
    pub tau: f64,
    /// False when part of the leaf lay beyond the stored history.
    pub complete: bool,
    /// Outer radius of the sampled cone.
    pub cone_end: f64,
    pub energy: f64,
    pub energy_disc: f64,
    pub energy_cone: f64,
    /// Flux through the incoming cone closing the truncated region.
    pub incoming_flux: f64,
    pub energy_tilde: f64,
    /// `E[Z^w phi]` for each commuted field of the ledger.
    pub word_energy: Vec<f64>,
    /// `sum_{|w| = k} E[Z^w phi]`.
    pub order_energy: Vec<f64>,
    pub s_alpha: f64,
    pub s_epsilon: f64,
    /// `g^p` for each exponent of the ledger.
    pub g: Vec<f64>,
    pub g_bar: Vec<f64>,
    /// `int_{Sigma_tau} |d phi|^2 (1+r)^{-1-alpha}`.
    pub bulk_i: f64,
    /// `int_{Sigma_tau} (1+r)^{1+alpha} F^2`.
    pub bulk_d: f64,
    /// `int_{r <= R} (phi / (1+r))^2 dx`.
    pub hardy_disc: f64,
    /// `int_{S_tau} (phi / (1+r))^2 r^2 dv dw`.
    pub hardy_cone: f64,
    /// `int_{r <= R} phi^2 dx`.
    pub plain_disc: f64,
    /// `max_r r int_w phi^2 dw` over cone shells.
    pub sphere_max: f64,
    /// `int_{S_tau} r^{1-alpha1} phi^2 dv dw`.
    pub pphi_lhs: f64,
    /// `int_{S_tau} r^{1+alpha2} |d_v (r phi)|^2 dv dw`.
    pub pphi_weighted: f64,
    pub monitor: MonitorRecord,
}

/// Sup over each cone shell of the pointwise decay quantities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub tau: f64,
    pub t: f64,
    pub r: f64,
    /// `sum |Z^k phi|`.
    pub value: f64,
    /// `sum |Lbar Z^k phi| + sum |d Lbar Z^k phi|`.
    pub lbar: f64,
    /// `sum |dbar_v Z^k phi| + sum |d dbar_v Z^k phi|`.
    pub good: f64,
}

/// All weighted functionals of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub params: DecayParams,
    pub k_max: usize,
    pub words: Vec<String>,
    pub word_orders: Vec<usize>,
    /// Exponents `p` of `g^p`: `1`, `1 + alpha1`, `1 - epsilon`.
    pub p_values: Vec<f64>,
    pub dv: f64,
    pub quad_degree: usize,
    /// True when the far-cone flux may miss radiation (non-causal boundary).
    pub tilde_approximate: bool,
    /// How the commuted monitors were truncated.
    pub truncation: String,
    pub leaves: Vec<LeafRecord>,
    pub probe: Vec<ProbeRow>,
}

/// Names accepted by [`EnergyLedger::series`].
pub const SCALAR_QUANTITIES: [&str; 14] = [
    "energy",
    "energy_disc",
    "energy_cone",
    "incoming_flux",
    "energy_tilde",
    "s_alpha",
    "s_epsilon",
    "bulk_i",
    "bulk_d",
    "hardy_disc",
    "hardy_cone",
    "plain_disc",
    "sphere_max",
    "pphi_lhs",
];

impl EnergyLedger {
    pub fn g_label(i: usize) -> &'static str {
        ["1", "1+alpha1", "1-epsilon"][i]
    }

    fn scalar(rec: &LeafRecord, name: &str) -> Option<f64> {
        Some(match name {
            "energy" => rec.energy,
            "energy_disc" => rec.energy_disc,
            "energy_cone" => rec.energy_cone,
            "incoming_flux" => rec.incoming_flux,
            "energy_tilde" => rec.energy_tilde,
            "s_alpha" => rec.s_alpha,
            "s_epsilon" => rec.s_epsilon,
            "bulk_i" => rec.bulk_i,
            "bulk_d" => rec.bulk_d,
            "hardy_disc" => rec.hardy_disc,
            "hardy_cone" => rec.hardy_cone,
            "plain_disc" => rec.plain_disc,
            "sphere_max" => rec.sphere_max,
            "pphi_lhs" => rec.pphi_lhs,
            "pphi_weighted" => rec.pphi_weighted,
            _ => return None,
        })
    }

    /// Every quantity name present in this ledger.
    pub fn quantity_names(&self) -> Vec<String> {
        let mut out: Vec<String> = SCALAR_QUANTITIES.iter().map(|s| s.to_string()).collect();
        out.push("pphi_weighted".into());
        for i in 0..self.p_values.len() {
            out.push(format!("g[{}]", Self::g_label(i)));
            out.push(format!("g_bar[{}]", Self::g_label(i)));
        }
        for k in 0..=self.k_max {
            out.push(format!("energy_order[{k}]"));
        }
        for w in &self.words {
            out.push(format!("energy[{w}]"));
        }
        out
    }

    fn value(&self, rec: &LeafRecord, name: &str) -> Option<f64> {
        if let Some(v) = Self::scalar(rec, name) {
            return Some(v);
        }
        let inner = |prefix: &str| name.strip_prefix(prefix).and_then(|s| s.strip_suffix(']'));
        if let Some(lbl) = inner("g[") {
            let i = (0..self.p_values.len()).find(|&i| Self::g_label(i) == lbl)?;
            return rec.g.get(i).copied();
        }
        if let Some(lbl) = inner("g_bar[") {
            let i = (0..self.p_values.len()).find(|&i| Self::g_label(i) == lbl)?;
            return rec.g_bar.get(i).copied();
        }
        if let Some(k) = inner("energy_order[") {
            return rec.order_energy.get(k.parse::<usize>().ok()?).copied();
        }
        if let Some(w) = inner("energy[") {
            let i = self.words.iter().position(|x| x == w)?;
            return rec.word_energy.get(i).copied();
        }
        None
    }

    /// `(tau, value)` over the complete leaves.
    pub fn series(&self, name: &str) -> Option<Vec<(f64, f64)>> {
        let mut out = Vec::with_capacity(self.leaves.len());
        for rec in self.leaves.iter().filter(|l| l.complete) {
            out.push((rec.tau, self.value(rec, name)?));
        }
        Some(out)
    }

    /// One row per leaf and quantity: `tau,quantity,value`.
    pub fn to_csv(&self) -> String {
        let names = self.quantity_names();
        let mut s = String::from("tau,quantity,value\n");
        for rec in self.leaves.iter().filter(|l| l.complete) {
            for n in &names {
                if let Some(v) = self.value(rec, n) {
                    let _ = writeln!(s, "{},{},{}", rec.tau, n, v);
                }
            }
        }
        s
    }

    /// `{quantity: [[tau, value], ...]}`.
    pub fn to_json_by_quantity(&self) -> serde_json::Value {
        let mut map = BTreeMap::new();
        for n in self.quantity_names() {
            if let Some(series) = self.series(&n) {
                map.insert(n, series.into_iter().map(|(t, v)| [t, v]).collect::<Vec<_>>());
            }
        }
        serde_json::to_value(map).expect("plain numbers serialize")
    }

    /// Parses a CSV produced by [`Self::to_csv`] into `quantity -> series`.
    pub fn parse_csv(text: &str) -> Result<BTreeMap<String, Vec<(f64, f64)>>> {
        let mut out: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            let bad = || Error::InvalidArgument(format!("ledger CSV line {}: `{line}`", i + 1));
            if parts.len() != 3 {
                return Err(bad());
            }
            let tau: f64 = parts[0].parse().map_err(|_| bad())?;
            let v: f64 = parts[2].parse().map_err(|_| bad())?;
            out.entry(parts[1].to_string()).or_default().push((tau, v));
        }
        Ok(out)
    }
}

/// `int_a^b (1+s)^{-beta} ds` and `int_a^b (1+s)^{-beta} (s - a) ds`.
fn power_moments(a: f64, b: f64, beta: f64) -> (f64, f64) {
    let anti = |e: f64, s: f64| if e.abs() < 1e-14 { s.ln() } else { s.powf(e) / e };
    let (sa, sb) = (1.0 + a, 1.0 + b);
    let w0 = anti(1.0 - beta, sb) - anti(1.0 - beta, sa);
    let w1 = anti(2.0 - beta, sb) - anti(2.0 - beta, sa) - sa * w0;
    (w0, w1)
}

/// `int_{tau1}^{tau2} (1+tau)^{-beta} y(tau) dtau` with `y` linear between
/// samples and the weight integrated exactly. `tau1` and `tau2` must be
/// sample times.
pub fn weighted_time_integral(series: &[(f64, f64)], tau1: f64, tau2: f64, beta: f64) -> Result<f64> {
    let eps = 1e-9 * (1.0 + tau2.abs());
    let find = |t: f64| series.iter().position(|p| (p.0 - t).abs() <= eps);
    let (i1, i2) = match (find(tau1), find(tau2)) {
        (Some(a), Some(b)) if a <= b => (a, b),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "slab [{tau1}, {tau2}] does not start and end on recorded leaves"
            )))
        }
    };
    let mut total = 0.0;
    for i in i1..i2 {
        let (a, ya) = series[i];
        let (b, yb) = series[i + 1];
        let h = b - a;
        let (w0, w1) = power_moments(a, b, beta);
        total += ya * (w0 - w1 / h) + yb * w1 / h;
    }
    Ok(total)
}

/// Slab integrals `I^alpha`, `D^alpha[F]`, `E^beta`, `G^{p,beta}`, `Gbar^{p,beta}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlabTotals {
    pub tau1: f64,
    pub tau2: f64,
    pub beta: f64,
    pub i_alpha: f64,
    pub d_alpha: f64,
    pub e_beta: f64,
    pub e_tilde_beta: f64,
    pub g_beta: Vec<f64>,
    pub g_bar_beta: Vec<f64>,
}

pub fn slab_accumulate(ledger: &EnergyLedger, tau1: f64, tau2: f64, beta: f64) -> Result<SlabTotals> {
    let get = |name: &str| ledger.series(name).expect("known quantity");
    let integ = |name: &str, b: f64| weighted_time_integral(&get(name), tau1, tau2, b);
    let mut g_beta = Vec::new();
    let mut g_bar_beta = Vec::new();
    for i in 0..ledger.p_values.len() {
        let lbl = EnergyLedger::g_label(i);
        g_beta.push(integ(&format!("g[{lbl}]"), beta)?);
        g_bar_beta.push(integ(&format!("g_bar[{lbl}]"), beta)?);
    }
    Ok(SlabTotals {
        tau1,
        tau2,
        beta,
        i_alpha: integ("bulk_i", 0.0)?,
        d_alpha: integ("bulk_d", 0.0)?,
        e_beta: integ("energy", beta)?,
        e_tilde_beta: integ("energy_tilde", beta)?,
        g_beta,
        g_bar_beta,
    })
}
