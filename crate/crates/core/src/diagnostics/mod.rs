//! Energy, flux and weighted-norm diagnostics on the leaves of the null
//! foliation, sampled while the solver runs.

pub mod checks;
pub mod commuted;
pub mod jet;
pub mod ledger;
pub mod recorder;

use serde::{Deserialize, Serialize};

pub use checks::{
    envelope_monitor, lemma_checks, pointwise_probe, probe_ordering, ratio, LemmaReport, MonitorReport,
    OrderingReport, ProbeTable,
};
pub use ledger::{slab_accumulate, weighted_time_integral, EnergyLedger, LeafRecord, SlabTotals};
pub use recorder::LeafRecorder;

use crate::error::{Error, Result};
use crate::geometry::DecayParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsConfig {
    pub params: DecayParams,
    /// Spacing of the recorded leaves in `tau`.
    pub leaf_spacing: f64,
    pub tau_max: f64,
    /// Cone shell width; the grid spacing when absent.
    pub dv: Option<f64>,
    /// Polynomial degree integrated exactly on each sphere.
    pub quad_degree: usize,
    /// Highest order of commuted fields, at most 2.
    pub k_max: usize,
    /// Samples of the closing incoming cone per `dv` in `u`.
    pub incoming_refine: usize,
    /// Last time the solver will reach.
    pub t_available: f64,
    /// Set when the boundary can let radiation escape before the far cone,
    /// making the closing flux (and so `Etilde`) approximate.
    pub tilde_approximate: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            params: DecayParams::default(),
            leaf_spacing: 0.5,
            tau_max: 0.0,
            dv: None,
            quad_degree: 11,
            k_max: 0,
            incoming_refine: 4,
            t_available: 0.0,
            tilde_approximate: false,
        }
    }
}

impl DiagnosticsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.leaf_spacing > 0.0) {
            return bad(format!("leaf_spacing = {} must be positive", self.leaf_spacing));
        }
        if !(self.tau_max >= 0.0) || self.tau_max > self.t_available + 1e-9 {
            return bad(format!("tau_max = {} must lie in [0, t_available = {}]", self.tau_max, self.t_available));
        }
        if let Some(dv) = self.dv {
            if !(dv > 0.0) {
                return bad(format!("dv = {dv} must be positive"));
            }
        }
        if self.k_max > 2 {
            return bad(format!("k_max = {} exceeds the supported order 2", self.k_max));
        }
        if self.incoming_refine == 0 {
            return bad("incoming_refine must be positive".into());
        }
        if self.quad_degree == 0 {
            return bad("quad_degree must be positive".into());
        }
        Ok(())
    }
}
