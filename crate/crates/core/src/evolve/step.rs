//! Classical RK4 on the active box and the CFL time step.

use rayon::prelude::*;

use super::rhs::{effective_principal, hyperbolicity_check, rhs, speed_bound, RhsContext};
use super::stencil::Stencil;
use super::{BoundaryMode, EquationSpec, FieldState};
use crate::error::{Error, Result};
use crate::foliation::GridSpec;
use crate::tensor;

/// Active region: the box `lo..hi` on each axis, intersected with a ball.
#[derive(Clone, Copy, Debug)]
struct Region {
    lo: usize,
    hi: usize,
    ball: Option<f64>,
}

/// `dst[c] = f(c, dst[c])` for every cell of the region.
fn box_apply<F>(grid: &GridSpec, reg: Region, dst: &mut [f64], f: F)
where
    F: Fn(usize, f64) -> f64 + Sync,
{
    let n = grid.n();
    let plane = n * n;
    let (lo, hi) = (reg.lo, reg.hi);
    dst.par_chunks_mut(plane).enumerate().for_each(|(i, p)| {
        if i < lo || i >= hi {
            return;
        }
        let x0 = grid.coord(i);
        for j in lo..hi {
            let row = (i * n + j) * n;
            let (klo, khi) = match reg.ball {
                None => (lo, hi),
                Some(rb) => {
                    let x1 = grid.coord(j);
                    let rem = rb * rb - x0 * x0 - x1 * x1;
                    if rem < 0.0 {
                        continue;
                    }
                    let (a, b) = grid.axis_range(rem.sqrt(), 0);
                    (a.max(lo), b.min(hi))
                }
            };
            for k in klo..khi {
                let c = row + k;
                p[c - i * plane] = f(c, p[c - i * plane]);
            }
        }
    });
}

/// Evolution engine with its scratch storage.
#[derive(Clone, Debug)]
pub struct Solver {
    pub spec: EquationSpec,
    pub grid: GridSpec,
    pub stencil: Stencil,
    pub boundary: BoundaryMode,
    /// Radius containing the support of the data at `t = 0`.
    pub support: f64,
    /// Propagation speed used for the causal clamp.
    pub c_bound: f64,
    /// Smallest hyperbolicity margin met so far.
    pub min_margin: f64,
    /// `d_t pi` of the state before the last step (first RK4 stage).
    pub accel: Vec<f64>,
    k_phi: Vec<f64>,
    k_pi: Vec<f64>,
    tmp_phi: Vec<f64>,
    tmp_pi: Vec<f64>,
    acc_phi: Vec<f64>,
    acc_pi: Vec<f64>,
}

impl Solver {
    pub fn new(
        spec: EquationSpec,
        grid: GridSpec,
        fd_order: usize,
        boundary: BoundaryMode,
        support: f64,
        c_bound: f64,
    ) -> Result<Self> {
        grid.validate()?;
        let stencil = Stencil::new(fd_order, grid.dx())?;
        let len = grid.len();
        Ok(Self {
            spec,
            grid,
            stencil,
            boundary,
            support,
            c_bound,
            min_margin: f64::INFINITY,
            accel: vec![0.0; len],
            k_phi: vec![0.0; len],
            k_pi: vec![0.0; len],
            tmp_phi: vec![0.0; len],
            tmp_pi: vec![0.0; len],
            acc_phi: vec![0.0; len],
            acc_pi: vec![0.0; len],
        })
    }

    /// Beyond this radius the causal-domain solution vanishes at time `t`.
    pub fn clamp_radius(&self, t: f64) -> f64 {
        self.support + self.c_bound * t.abs() + 3.0 * self.grid.dx()
    }

    /// Index range of the cubic box on which the fields may be nonzero.
    pub fn active_range(&self, t: f64) -> (usize, usize) {
        match self.boundary {
            BoundaryMode::Sommerfeld => (0, self.grid.n()),
            BoundaryMode::CausalDomain => {
                let reach = self.stencil.reach;
                let r = self.clamp_radius(t) + (reach + 1) as f64 * self.grid.dx();
                self.grid.axis_range(r, reach)
            }
        }
    }

    /// Radius of the ball holding every cell with a nonzero right-hand side.
    fn ball(&self, t: f64) -> Option<f64> {
        match self.boundary {
            BoundaryMode::Sommerfeld => None,
            BoundaryMode::CausalDomain => {
                Some(self.clamp_radius(t) + (self.stencil.reach as f64 + 1.0) * self.grid.dx() * 3f64.sqrt())
            }
        }
    }

    fn context(&self, lo: usize, hi: usize, t: f64) -> RhsContext<'_> {
        let (lo, hi) = match self.boundary {
            BoundaryMode::Sommerfeld => (self.stencil.reach, self.grid.n() - self.stencil.reach),
            BoundaryMode::CausalDomain => (lo, hi),
        };
        RhsContext {
            spec: &self.spec,
            grid: self.grid,
            stencil: self.stencil,
            boundary: self.boundary,
            lo,
            hi,
            ball: self.ball(t),
        }
    }

    /// `d_t pi` of a state on the whole active box.
    pub fn acceleration_of(&self, state: &FieldState) -> Result<Vec<f64>> {
        let (lo, hi) = self.active_range(state.t);
        let mut a = vec![0.0; self.grid.len()];
        let mut b = vec![0.0; self.grid.len()];
        rhs(&self.context(lo, hi, state.t), state.t, &state.phi, &state.pi, &mut a, &mut b)?;
        Ok(b)
    }

    /// One RK4 step of size `dt` (negative steps are allowed).
    pub fn step(&mut self, state: &mut FieldState, dt: f64) -> Result<()> {
        let t = state.t;
        let (lo, hi) = self.active_range(t.abs().max((t + dt).abs()));
        let grid = self.grid;
        let reg = Region { lo, hi, ball: self.ball(t.abs().max((t + dt).abs())) };
        let stages = [(0.0, 0.5, 1.0 / 6.0), (0.5, 0.5, 1.0 / 3.0), (0.5, 1.0, 1.0 / 3.0), (1.0, 0.0, 1.0 / 6.0)];
        for (s, &(c_time, next, weight)) in stages.iter().enumerate() {
            let (clo, chi) = match self.boundary {
                BoundaryMode::Sommerfeld => (self.stencil.reach, grid.n() - self.stencil.reach),
                BoundaryMode::CausalDomain => (lo, hi),
            };
            let ctx = RhsContext {
                spec: &self.spec,
                grid,
                stencil: self.stencil,
                boundary: self.boundary,
                lo: clo,
                hi: chi,
                ball: self.ball(t.abs().max((t + dt).abs())),
            };
            let (src_phi, src_pi) = if s == 0 { (&state.phi, &state.pi) } else { (&self.tmp_phi, &self.tmp_pi) };
            let margin = rhs(&ctx, t + c_time * dt, src_phi, src_pi, &mut self.k_phi, &mut self.k_pi)?;
            self.min_margin = self.min_margin.min(margin);
            let (kp, kq) = (&self.k_phi, &self.k_pi);
            let (y0, y1) = (&state.phi, &state.pi);
            let w = weight * dt;
            if s == 0 {
                box_apply(&grid, reg, &mut self.acc_phi, |c, _| y0[c] + w * kp[c]);
                box_apply(&grid, reg, &mut self.acc_pi, |c, _| y1[c] + w * kq[c]);
            } else {
                box_apply(&grid, reg, &mut self.acc_phi, |c, v| v + w * kp[c]);
                box_apply(&grid, reg, &mut self.acc_pi, |c, v| v + w * kq[c]);
            }
            if next > 0.0 {
                let a = next * dt;
                box_apply(&grid, reg, &mut self.tmp_phi, |c, _| y0[c] + a * kp[c]);
                box_apply(&grid, reg, &mut self.tmp_pi, |c, _| y1[c] + a * kq[c]);
            }
            if s == 0 {
                std::mem::swap(&mut self.accel, &mut self.k_pi);
                // k_pi now holds stale values; the next stage overwrites the whole box.
            }
        }
        std::mem::swap(&mut state.phi, &mut self.acc_phi);
        std::mem::swap(&mut state.pi, &mut self.acc_pi);
        state.t = t + dt;
        if self.boundary == BoundaryMode::CausalDomain {
            self.clamp(state, reg);
        }
        self.check_finite(state, lo, hi)
    }

    fn clamp(&self, state: &mut FieldState, reg: Region) {
        let rc = self.clamp_radius(state.t.abs());
        let g = self.grid;
        let r2 = rc * rc;
        let outside = |c: usize| {
            let (i, j, k) = g.unravel(c);
            let x = g.position(i, j, k);
            x[0] * x[0] + x[1] * x[1] + x[2] * x[2] > r2
        };
        box_apply(&g, reg, &mut state.phi, |c, v| if outside(c) { 0.0 } else { v });
        box_apply(&g, reg, &mut state.pi, |c, v| if outside(c) { 0.0 } else { v });
    }

    fn check_finite(&self, state: &FieldState, lo: usize, hi: usize) -> Result<()> {
        let n = self.grid.n();
        for (name, f) in [("phi", &state.phi), ("pi", &state.pi)] {
            let bad = (lo..hi).into_par_iter().any(|i| {
                (lo..hi).any(|j| {
                    let row = (i * n + j) * n;
                    f[row + lo..row + hi].iter().any(|v| !v.is_finite())
                })
            });
            if bad {
                return Err(Error::NonFinite { t: state.t, field: name });
            }
        }
        Ok(())
    }
}

/// Largest characteristic speed over the cells where the principal part is
/// not flat, and the resulting step `courant * dx / c_max`.
pub fn cfl_dt(spec: &EquationSpec, grid: &GridSpec, state: &FieldState, courant: f64, support: f64) -> Result<(f64, f64)> {
    let mut c_max: f64 = 1.0;
    let metric_radius = spec.metric.support_radius().unwrap_or(f64::INFINITY);
    let needs_scan = spec.nullform.has_quasilinear() || !spec.metric.is_flat();
    if needs_scan {
        let mut radius: f64 = if spec.nullform.has_quasilinear() { support } else { 0.0 };
        if !spec.metric.is_flat() {
            radius = radius.max(metric_radius);
        }
        if let Some(b) = &spec.background {
            radius = radius.max(b.support_radius(state.t));
        }
        let st = Stencil::new(2, grid.dx())?;
        let (lo, hi) = grid.axis_range(radius.min(2.0 * grid.half_width), 1);
        let n = grid.n();
        let speeds: Vec<Result<f64>> = (lo..hi)
            .into_par_iter()
            .map(|i| {
                let mut c: f64 = 1.0;
                for j in lo..hi {
                    for k in lo..hi {
                        let x = grid.position(i, j, k);
                        let idx = grid.index(i, j, k);
                        let h = if tensor::norm3(&x) <= metric_radius { spec.metric.eval(state.t, &x).h } else { tensor::ZERO4 };
                        let g3 = st.gradient(&state.phi, idx, n);
                        let dphi = [state.pi[idx], g3[0], g3[1], g3[2]];
                        let db = spec.background.map(|b| b.jet(state.t, &x).0);
                        let g = effective_principal(spec, &h, &dphi, db.as_ref());
                        let hy = hyperbolicity_check(&g);
                        if !hy.pass {
                            return Err(Error::HyperbolicityLoss { t: state.t, x, margin: hy.margin });
                        }
                        c = c.max(speed_bound(&g));
                    }
                }
                Ok(c)
            })
            .collect();
        for s in speeds {
            c_max = c_max.max(s?);
        }
    }
    if !spec.metric.is_time_independent() {
        // Entries bounded by s at all times: |G^tt| >= 1 - s, |G^{t.}| <= sqrt(3) s,
        // lambda_max(G^{ij}) <= 1 + 3 s.
        let s = spec.metric.sup_bound();
        let b = 3f64.sqrt() * s;
        c_max = c_max.max((b + (b * b + (1.0 + s) * (1.0 + 3.0 * s)).sqrt()) / (1.0 - s));
    }
    Ok((courant * grid.dx() / c_max, c_max))
}
