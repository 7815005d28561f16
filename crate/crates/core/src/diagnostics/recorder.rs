//! The observer that samples every leaf while the solver runs.

use std::sync::Arc;

use rayon::prelude::*;

use super::jet::{commuted_family, null_derivative_gradient, rotate_by, Jet, TimeView, Word};
use super::ledger::{EnergyLedger, LeafRecord, MonitorRecord, ProbeRow};
use super::DiagnosticsConfig;
use crate::error::{Error, Result};
use crate::evolve::{Observer, SourceSpec, Window};
use crate::foliation::{make_leaf, DiscNodes, FoliationLeaf, GridSpec, SphereQuadrature};
use crate::geometry::{EnvelopeH, Generator};

const DISC_CHUNK: usize = 1024;
const ROTATIONS: [Generator; 3] = [Generator::Omega12, Generator::Omega13, Generator::Omega23];

#[derive(Clone, Copy, Debug)]
enum Task {
    Disc { start: usize, end: usize },
    Middle { r: f64 },
    Shell { j: usize },
    Incoming { u: f64, du: f64 },
}

#[derive(Clone, Copy, Debug)]
struct Scheduled {
    t: f64,
    leaf: usize,
    task: Task,
}

#[derive(Clone, Debug, Default)]
struct Accum {
    done: usize,
    energy_disc: Vec<f64>,
    energy_cone: Vec<f64>,
    incoming: f64,
    s_alpha: f64,
    s_epsilon: f64,
    i_disc: f64,
    d_disc: f64,
    d_cone: f64,
    g: [f64; 3],
    g_bar: [f64; 3],
    hardy_disc: f64,
    hardy_cone: f64,
    plain_disc: f64,
    sphere_max: f64,
    pphi_lhs: f64,
    pphi_weighted: f64,
    monitor: MonitorRecord,
    probe: Vec<ProbeRow>,
}

impl Accum {
    fn new(n_words: usize) -> Self {
        Self { energy_disc: vec![0.0; n_words], energy_cone: vec![0.0; n_words], ..Default::default() }
    }

    fn merge(&mut self, o: Accum) {
        self.done += o.done;
        for (a, b) in self.energy_disc.iter_mut().zip(&o.energy_disc) {
            *a += b;
        }
        for (a, b) in self.energy_cone.iter_mut().zip(&o.energy_cone) {
            *a += b;
        }
        self.incoming += o.incoming;
        self.s_alpha += o.s_alpha;
        self.s_epsilon += o.s_epsilon;
        self.i_disc += o.i_disc;
        self.d_disc += o.d_disc;
        self.d_cone += o.d_cone;
        for i in 0..3 {
            self.g[i] += o.g[i];
            self.g_bar[i] += o.g_bar[i];
        }
        self.hardy_disc += o.hardy_disc;
        self.hardy_cone += o.hardy_cone;
        self.plain_disc += o.plain_disc;
        self.sphere_max = self.sphere_max.max(o.sphere_max);
        self.pphi_lhs += o.pphi_lhs;
        self.pphi_weighted += o.pphi_weighted;
        let (m, n) = (&mut self.monitor, o.monitor);
        m.cone_lbar = m.cone_lbar.max(n.cone_lbar);
        m.cone_good = m.cone_good.max(n.cone_good);
        m.middle = m.middle.max(n.middle);
        m.inner = m.inner.max(n.inner);
        self.probe.extend(o.probe);
    }
}

/// Fixed inputs shared by every task.
struct Context {
    words: Vec<Word>,
    k_max: usize,
    alpha: f64,
    epsilon: f64,
    alpha1: f64,
    alpha2: f64,
    p_values: [f64; 3],
    env: EnvelopeH,
    source: SourceSpec,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// `(f_t, x_hat . grad f, |grad f|^2)`.
fn split(j: &Jet, xh: &[f64; 3]) -> (f64, f64, f64) {
    let g = j.grad();
    let radial = xh[0] * g[1] + xh[1] * g[2] + xh[2] * g[3];
    (g[0], radial, g[1] * g[1] + g[2] * g[2] + g[3] * g[3])
}

/// `sum_{i<j} |d (Omega_ij f / r)|^2` from the jet of `f`.
fn rotated_over_r(j: &Jet, x: &[f64; 3], r: f64) -> f64 {
    ROTATIONS
        .iter()
        .map(|g| {
            let o = rotate_by(j, *g, x);
            let gr = o.grad();
            let v = o.value();
            let r3 = r * r * r;
            let d = [gr[0] / r, gr[1] / r - v * x[0] / r3, gr[2] / r - v * x[1] / r3, gr[3] / r - v * x[2] / r3];
            norm2(&d)
        })
        .sum()
}

/// Commuted quantities at one cone point, already summed over words.
struct ConePoint {
    /// `(L Z phi)^2 + |angular grad Z phi|^2` per word.
    energy: Vec<f64>,
    lbar_sq: f64,
    good_sq: f64,
    value_abs: f64,
    lbar_abs: f64,
    good_abs: f64,
}

fn cone_point(ctx: &Context, phi: &Jet, x: &[f64; 3], r: f64) -> ConePoint {
    let xh = [x[0] / r, x[1] / r, x[2] / r];
    let mut p = ConePoint {
        energy: Vec::with_capacity(ctx.words.len()),
        lbar_sq: 0.0,
        good_sq: 0.0,
        value_abs: 0.0,
        lbar_abs: 0.0,
        good_abs: 0.0,
    };
    for w in &ctx.words {
        let j = w.apply(phi, x);
        let (ft, fr, grad2) = split(&j, &xh);
        let ang2 = (grad2 - fr * fr).max(0.0);
        let (l, lb) = (ft + fr, ft - fr);
        let good = l * l + ang2;
        p.energy.push(good);
        p.lbar_sq += lb * lb;
        p.good_sq += good;
        p.value_abs += j.value().abs();
        p.lbar_abs += lb.abs();
        p.good_abs += l.abs();
        if w.len() < ctx.k_max {
            let dl = norm2(&null_derivative_gradient(&j, x, r, 1.0));
            let dlb = norm2(&null_derivative_gradient(&j, x, r, -1.0));
            p.lbar_sq += dlb;
            p.lbar_abs += dlb.sqrt();
            p.good_sq += dl + rotated_over_r(&j, x, r);
            p.good_abs += dl.sqrt();
        }
    }
    p
}

/// `sum_{|w| <= k} |d Z phi|^2 + sum_{|w| < k} |d^2 Z phi|^2` at a point.
fn full_derivative_sum(ctx: &Context, phi: &Jet, x: &[f64; 3], energy: Option<&mut Vec<f64>>) -> f64 {
    let mut total = 0.0;
    let mut per_word = Vec::with_capacity(ctx.words.len());
    for w in &ctx.words {
        let j = w.apply(phi, x);
        let d = norm2(&j.grad());
        per_word.push(d);
        total += d;
        if w.len() < ctx.k_max {
            total += j.hess().iter().map(|row| norm2(row)).sum::<f64>();
        }
    }
    if let Some(e) = energy {
        *e = per_word;
    }
    total
}

fn out_of_domain(e: Error, what: &str) -> Error {
    match e {
        Error::OutOfDomain { t, x, reason } => Error::OutOfDomain { t, x, reason: format!("{what}: {reason}") },
        other => other,
    }
}

/// Samples each leaf's disc, cone and closing incoming cone as the solver
/// passes the corresponding times, then assembles an [`EnergyLedger`].
pub struct LeafRecorder {
    cfg: DiagnosticsConfig,
    grid: GridSpec,
    leaves: Vec<FoliationLeaf>,
    ctx: Context,
    accum: Vec<Accum>,
    totals: Vec<usize>,
    tasks: Vec<Scheduled>,
    cursor: usize,
}

impl LeafRecorder {
    pub fn new(cfg: DiagnosticsConfig, grid: GridSpec, source: SourceSpec) -> Result<Self> {
        cfg.validate()?;
        let p = cfg.params;
        let dv = cfg.dv.unwrap_or_else(|| grid.dx());
        let disc = Arc::new(DiscNodes::new(&grid, p.radius));
        let quad = Arc::new(SphereQuadrature::new(cfg.quad_degree));
        let words = commuted_family(cfg.k_max);
        let n_leaves = (cfg.tau_max / cfg.leaf_spacing + 1e-9).floor() as usize + 1;

        let mut leaves = Vec::with_capacity(n_leaves);
        let mut tasks = Vec::new();
        let mut totals = Vec::with_capacity(n_leaves);
        for li in 0..n_leaves {
            let tau = li as f64 * cfg.leaf_spacing;
            let leaf = make_leaf(tau, &p, &grid, disc.clone(), quad.clone(), dv, cfg.t_available)?;
            let before = tasks.len();
            let mut push = |t: f64, task: Task| tasks.push(Scheduled { t, leaf: li, task });
            let mut start = 0;
            while start < disc.cells.len() {
                let end = (start + DISC_CHUNK).min(disc.cells.len());
                push(tau, Task::Disc { start, end });
                start = end;
            }
            let mut m = 0;
            while 1.0 + m as f64 * dv <= p.radius + 1e-12 {
                push(tau, Task::Middle { r: 1.0 + m as f64 * dv });
                m += 1;
            }
            for j in 0..leaf.n_shells {
                push(leaf.shell_t(j), Task::Shell { j });
            }
            // The incoming cone at v = v_max closes the region between the
            // initial leaf and this one.
            let u0 = -0.5 * p.radius;
            if leaf.u > u0 {
                let du_max = dv / cfg.incoming_refine as f64;
                let n_in = ((leaf.u - u0) / du_max - 1e-9).ceil().max(1.0) as usize;
                let du = (leaf.u - u0) / n_in as f64;
                let v = leaf.v_max();
                for i in 0..n_in {
                    let u = u0 + (i as f64 + 0.5) * du;
                    push(v + u, Task::Incoming { u, du });
                }
            }
            totals.push(tasks.len() - before);
            leaves.push(leaf);
        }
        tasks.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.leaf.cmp(&b.leaf)));

        let ctx = Context {
            k_max: cfg.k_max,
            alpha: p.alpha,
            epsilon: p.epsilon,
            alpha1: p.alpha1,
            alpha2: p.alpha2,
            p_values: [1.0, 1.0 + p.alpha1, 1.0 - p.epsilon],
            env: EnvelopeH::new(p.delta0, p.alpha),
            source,
            words,
        };
        let accum = vec![Accum::new(ctx.words.len()); n_leaves];
        Ok(Self { cfg, grid, leaves, ctx, accum, totals, tasks, cursor: 0 })
    }

    pub fn leaves(&self) -> &[FoliationLeaf] {
        &self.leaves
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn run_task(&self, w: &Window<'_>, s: &Scheduled) -> Result<Accum> {
        let view = TimeView::new(w, s.t)?;
        let leaf = &self.leaves[s.leaf];
        let ctx = &self.ctx;
        let mut a = Accum::new(ctx.words.len());
        a.done = 1;
        match s.task {
            Task::Disc { start, end } => {
                let disc = &leaf.disc;
                for idx in start..end {
                    let c = disc.cells[idx];
                    let wt = disc.weights[idx];
                    let (i, j, k) = self.grid.unravel(c);
                    let x = self.grid.position(i, j, k);
                    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                    let phi = view.jet_at_cell(c).map_err(|e| out_of_domain(e, "disc"))?;
                    let mut per_word = Vec::new();
                    let total = full_derivative_sum(ctx, &phi, &x, Some(&mut per_word));
                    for (e, d) in a.energy_disc.iter_mut().zip(&per_word) {
                        *e += wt * d;
                    }
                    let full = per_word[0];
                    let v = phi.value();
                    let f = ctx.source.eval(s.t, &x);
                    a.i_disc += wt * full * (1.0 + r).powf(-1.0 - ctx.alpha);
                    a.d_disc += wt * (1.0 + r).powf(1.0 + ctx.alpha) * f * f;
                    a.hardy_disc += wt * (v / (1.0 + r)).powi(2);
                    a.plain_disc += wt * v * v;
                    if r <= 1.0 {
                        let ratio = total / (2.0 * ctx.env.delta0 * ctx.env.delta0);
                        a.monitor.inner = a.monitor.inner.max(ratio);
                    }
                }
            }
            Task::Middle { r } => {
                let mut total = 0.0;
                for (om, wk) in leaf.quad.nodes.iter().zip(&leaf.quad.weights) {
                    let x = [r * om[0], r * om[1], r * om[2]];
                    let phi = view.jet_at(&x).map_err(|e| out_of_domain(e, "interior sphere"))?;
                    total += wk * full_derivative_sum(ctx, &phi, &x, None);
                }
                let hb = ctx.env.h_bar(r);
                a.monitor.middle = total / (2.0 * hb * hb);
            }
            Task::Shell { j } => {
                let r = leaf.shell_r(j);
                let mut sphere = 0.0;
                let (mut lbar_int, mut good_int) = (0.0, 0.0);
                let mut row = ProbeRow { tau: leaf.tau, t: s.t, r, ..Default::default() };
                for k in 0..leaf.quad.len() {
                    let smp = leaf.sample(j, k);
                    let wk = leaf.quad.weights[k];
                    let wt = smp.weight;
                    let phi = view.jet_at(&smp.x).map_err(|e| out_of_domain(e, "cone"))?;
                    let p = cone_point(ctx, &phi, &smp.x, r);
                    for (e, d) in a.energy_cone.iter_mut().zip(&p.energy) {
                        *e += wt * d;
                    }
                    lbar_int += wk * p.lbar_sq;
                    good_int += wk * p.good_sq;
                    row.value = row.value.max(p.value_abs);
                    row.lbar = row.lbar.max(p.lbar_abs);
                    row.good = row.good.max(p.good_abs);

                    let v = phi.value();
                    let (ft, fr, grad2) = split(&phi, &smp.omega);
                    let full = ft * ft + grad2;
                    let ang2 = (grad2 - fr * fr).max(0.0);
                    let dpsi = r * (ft + fr) + v;
                    let f = ctx.source.eval(s.t, &smp.x);
                    a.s_alpha += wt * full * (1.0 + r).powf(-1.0 - ctx.alpha);
                    a.s_epsilon += wt * full * (1.0 + r).powf(-1.0 - ctx.epsilon);
                    a.d_cone += wt * (1.0 + r).powf(1.0 + ctx.alpha) * f * f;
                    for (i, pv) in ctx.p_values.iter().enumerate() {
                        let rp = r.powf(pv - 2.0);
                        a.g[i] += wt * rp * dpsi * dpsi;
                        a.g_bar[i] += wt * rp * (dpsi * dpsi + r * r * ang2);
                    }
                    a.hardy_cone += wt * (v / (1.0 + r)).powi(2);
                    a.pphi_lhs += wt * r.powf(-1.0 - ctx.alpha1) * v * v;
                    a.pphi_weighted += wt * r.powf(ctx.alpha2 - 1.0) * dpsi * dpsi;
                    sphere += wk * v * v;
                }
                a.sphere_max = r * sphere;
                let h = ctx.env.h(leaf.tau, r);
                let hb = ctx.env.h_bar(r);
                a.monitor.cone_lbar = lbar_int / (2.0 * h * h);
                a.monitor.cone_good = good_int / (2.0 * hb * hb);
                a.probe.push(row);
            }
            Task::Incoming { u, du } => {
                let r = leaf.v_max() - u;
                for (om, wk) in leaf.quad.nodes.iter().zip(&leaf.quad.weights) {
                    let x = [r * om[0], r * om[1], r * om[2]];
                    let phi = view.jet_at(&x).map_err(|e| out_of_domain(e, "incoming cone"))?;
                    let (ft, fr, grad2) = split(&phi, om);
                    let lb = ft - fr;
                    a.incoming += r * r * wk * du * (lb * lb + (grad2 - fr * fr).max(0.0));
                }
            }
        }
        Ok(a)
    }

    /// Assembles the ledger from everything recorded so far.
    pub fn finish(self) -> EnergyLedger {
        let ctx = &self.ctx;
        let word_orders: Vec<usize> = ctx.words.iter().map(Word::len).collect();
        let mut ledger = EnergyLedger {
            params: self.cfg.params,
            k_max: ctx.k_max,
            words: ctx.words.iter().map(Word::label).collect(),
            word_orders: word_orders.clone(),
            p_values: ctx.p_values.to_vec(),
            dv: self.leaves.first().map_or(0.0, |l| l.dv),
            quad_degree: self.cfg.quad_degree,
            tilde_approximate: self.cfg.tilde_approximate,
            truncation: format!(
                "first-order sums over |k| <= {}, second-order sums over |k| <= {}",
                ctx.k_max,
                ctx.k_max as isize - 1
            ),
            leaves: Vec::new(),
            probe: Vec::new(),
        };
        for ((leaf, a), total) in self.leaves.iter().zip(self.accum).zip(&self.totals) {
            let word_energy: Vec<f64> = a.energy_disc.iter().zip(&a.energy_cone).map(|(d, c)| d + c).collect();
            let mut order_energy = vec![0.0; ctx.k_max + 1];
            for (e, k) in word_energy.iter().zip(&word_orders) {
                order_energy[*k] += e;
            }
            let energy = word_energy[0];
            let complete = a.done == *total;
            if complete {
                ledger.probe.extend(a.probe.iter().copied());
            }
            ledger.leaves.push(LeafRecord {
                tau: leaf.tau,
                complete,
                cone_end: leaf.v_max() - leaf.u,
                energy,
                energy_disc: a.energy_disc[0],
                energy_cone: a.energy_cone[0],
                incoming_flux: a.incoming,
                energy_tilde: energy + a.incoming,
                word_energy,
                order_energy,
                s_alpha: a.s_alpha,
                s_epsilon: a.s_epsilon,
                g: a.g.to_vec(),
                g_bar: a.g_bar.to_vec(),
                bulk_i: a.i_disc + a.s_alpha,
                bulk_d: a.d_disc + a.d_cone,
                hardy_disc: a.hardy_disc,
                hardy_cone: a.hardy_cone,
                plain_disc: a.plain_disc,
                sphere_max: a.sphere_max,
                pphi_lhs: a.pphi_lhs,
                pphi_weighted: a.pphi_weighted,
                monitor: a.monitor,
            });
        }
        ledger.probe.sort_by(|a, b| a.tau.total_cmp(&b.tau).then(a.r.total_cmp(&b.r)));
        ledger
    }
}

impl Observer for LeafRecorder {
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
            if t < w.cur.t - eps {
                return Err(Error::OutOfDomain {
                    t,
                    x: [0.0; 3],
                    reason: format!("leaf sample before the observed level at {}", w.cur.t),
                });
            }
            end += 1;
        }
        if end == self.cursor {
            return Ok(());
        }
        let batch = &self.tasks[self.cursor..end];
        let parts: Vec<Accum> =
            batch.par_iter().map(|s| self.run_task(w, s)).collect::<Result<Vec<_>>>()?;
        for (s, part) in batch.iter().zip(parts) {
            self.accum[s.leaf].merge(part);
        }
        self.cursor = end;
        Ok(())
    }
}
