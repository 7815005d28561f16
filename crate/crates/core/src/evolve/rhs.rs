//! Pointwise principal part, hyperbolicity test, and the right-hand side of
//! the first-order system `d_t phi = pi`, `d_t pi = accel`.

use rayon::prelude::*;

use super::stencil::{d1_edge, Stencil};
use super::{BoundaryMode, EquationSpec};
use crate::error::{Error, Result};
use crate::foliation::GridSpec;
use crate::geometry::MetricSample;
use crate::tensor::{self, Mat4, Vec4, MINKOWSKI};

/// `G^{mu nu} = m0 + h + gcube d phi (+ gcube d Phi)`.
pub fn effective_principal(spec: &EquationSpec, h: &Mat4, dphi: &Vec4, dbackground: Option<&Vec4>) -> Mat4 {
    let mut g = tensor::add(&MINKOWSKI, h);
    if spec.nullform.has_quasilinear() {
        g = tensor::add(&g, &spec.nullform.principal_shift(dphi));
        if let Some(db) = dbackground {
            g = tensor::add(&g, &spec.nullform.principal_shift(db));
        }
    }
    g
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperbolicity {
    pub pass: bool,
    /// `min(-G^{tt}, smallest eigenvalue of G^{ij})`.
    pub margin: f64,
}

/// `G^{tt} < 0` and the spatial block positive definite.
pub fn hyperbolicity_check(g: &Mat4) -> Hyperbolicity {
    let eig = tensor::sym3_eigenvalues(&tensor::spatial_block(g));
    let margin = (-g[0][0]).min(eig[0]);
    Hyperbolicity { pass: g[0][0] < 0.0 && sylvester(g), margin }
}

/// Leading principal minors of the spatial block are positive.
#[inline]
fn sylvester(g: &Mat4) -> bool {
    let (a, b, c) = (g[1][1], g[1][2], g[1][3]);
    let (d, e, f) = (g[2][2], g[2][3], g[3][3]);
    let m2 = a * d - b * b;
    let m3 = a * (d * f - e * e) - b * (b * f - e * c) + c * (b * e - d * c);
    a > 0.0 && m2 > 0.0 && m3 > 0.0
}

/// Cheap lower bound for the hyperbolicity margin (Gershgorin on the
/// spatial block). Falls back to the exact test when the bound is not positive.
#[inline]
fn margin_bound(g: &Mat4) -> (bool, f64) {
    let mut lam: f64 = f64::INFINITY;
    for i in 1..4 {
        let mut off = 0.0;
        for j in 1..4 {
            if j != i {
                off += g[i][j].abs();
            }
        }
        lam = lam.min(g[i][i] - off);
    }
    let m = (-g[0][0]).min(lam);
    if m > 0.0 {
        (true, m)
    } else {
        let h = hyperbolicity_check(g);
        (h.pass, h.margin)
    }
}

/// Largest characteristic speed of the principal symbol of `g`, bounded by
/// `(|G^{t.}| + sqrt(|G^{t.}|^2 + |G^{tt}| lambda_max)) / |G^{tt}|`.
pub fn speed_bound(g: &Mat4) -> f64 {
    let b = (g[0][1] * g[0][1] + g[0][2] * g[0][2] + g[0][3] * g[0][3]).sqrt();
    let lmax = tensor::sym3_eigenvalues(&tensor::spatial_block(g))[2].max(0.0);
    let a = g[0][0].abs();
    (b + (b * b + a * lmax).sqrt()) / a
}

/// `N^nu = d_mu g^{mu nu} - 1/2 g^{mu nu} g_{ab} d_mu g^{ab}`, the first-order
/// part of `Box_g` in Cartesian coordinates.
pub fn lower_order_vector(sample: &MetricSample) -> Option<Vec4> {
    let ginv = sample.inverse_metric();
    let glow = tensor::inverse4(&ginv)?;
    let mut trace = [0.0; 4];
    for (mu, tr) in trace.iter_mut().enumerate() {
        let mut s = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                s += glow[a][b] * sample.dh[mu][a][b];
            }
        }
        *tr = s;
    }
    let mut n = [0.0; 4];
    for nu in 0..4 {
        let mut s = 0.0;
        for mu in 0..4 {
            s += sample.dh[mu][mu][nu] - 0.5 * ginv[mu][nu] * trace[mu];
        }
        n[nu] = s;
    }
    Some(n)
}

/// Derivatives of the unknown at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointDerivs {
    /// `(pi, d_1 phi, d_2 phi, d_3 phi)`.
    pub dphi: Vec4,
    pub hess: [[f64; 3]; 3],
    pub dpi: [f64; 3],
}

/// Everything the acceleration needs that does not depend on the unknown.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointBackground {
    pub metric: MetricSample,
    pub lower: Vec4,
    pub source: f64,
    pub quad_weight: f64,
    pub dbg: Option<(Vec4, Mat4)>,
}

/// `d_t pi` at a point and the effective principal part used.
#[inline]
pub fn acceleration(spec: &EquationSpec, bg: &PointBackground, d: &PointDerivs) -> (f64, Mat4) {
    let dbg = bg.dbg.as_ref().map(|b| &b.0);
    let g = effective_principal(spec, &bg.metric.h, &d.dphi, dbg);
    let mut num = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            num += g[i + 1][j + 1] * d.hess[i][j];
        }
        num += 2.0 * g[0][i + 1] * d.dpi[i];
    }
    num += tensor::dot4(&bg.lower, &d.dphi);
    if let Some((dphi_bg, hess_bg)) = &bg.dbg {
        let gc = &spec.nullform.gcube;
        let mut s = 0.0;
        for mu in 0..4 {
            for nu in 0..4 {
                for ga in 0..4 {
                    s += gc[mu][nu][ga] * hess_bg[mu][nu] * d.dphi[ga];
                }
            }
        }
        num += s;
        if spec.semilinear && spec.nullform.has_semilinear() {
            num -= 2.0 * tensor::contract(&spec.nullform.aquad, dphi_bg, &d.dphi);
        }
    }
    if spec.semilinear && spec.nullform.has_semilinear() {
        num -= tensor::contract(&spec.nullform.aquad, &d.dphi, &d.dphi);
    }
    num -= bg.quad_weight * d.dphi[0] * d.dphi[0];
    num -= bg.source;
    (num / (-g[0][0]), g)
}

/// Background data at a grid point.
pub fn point_background(spec: &EquationSpec, t: f64, x: &[f64; 3], metric_radius: f64) -> Result<PointBackground> {
    let r = tensor::norm3(x);
    let (metric, lower) = if spec.metric.is_flat() || r > metric_radius {
        (MetricSample::ZERO, [0.0; 4])
    } else {
        let m = spec.metric.eval(t, x);
        let n = lower_order_vector(&m).ok_or(Error::MetricInversion { t, x: *x })?;
        (m, n)
    };
    Ok(PointBackground {
        metric,
        lower,
        source: spec.source.eval(t, x),
        quad_weight: spec.interior_quadratic.map_or(0.0, |q| q.weight(r)),
        dbg: spec.background.map(|b| b.jet(t, x)),
    })
}

/// Nonzero coefficients of the nonlinear terms, for cells where the metric,
/// source, background and interior quadratic all vanish.
#[derive(Clone, Debug, Default)]
struct FastKernel {
    gcube: Vec<(usize, usize, usize, f64)>,
    aquad: Vec<(usize, usize, f64)>,
    /// Spatial off-diagonal entries of `G` can be nonzero.
    mixed: bool,
}

impl FastKernel {
    fn new(spec: &EquationSpec) -> Self {
        let mut k = Self::default();
        for mu in 0..4 {
            for nu in 0..4 {
                for ga in 0..4 {
                    let c = spec.nullform.gcube[mu][nu][ga];
                    if c != 0.0 {
                        k.gcube.push((mu, nu, ga, c));
                        if mu != nu && mu > 0 && nu > 0 {
                            k.mixed = true;
                        }
                    }
                }
                let a = spec.nullform.aquad[mu][nu];
                if spec.semilinear && a != 0.0 {
                    k.aquad.push((mu, nu, a));
                }
            }
        }
        k
    }

    /// Acceleration at flat index `c` and the margin bound of `G`.
    #[inline(always)]
    fn eval(&self, st: &Stencil, phi: &[f64], pi: &[f64], c: usize, n: usize) -> (f64, f64, bool) {
        let s = [n * n, n, 1];
        let g3 = st.gradient(phi, c, n);
        let dphi = [pi[c], g3[0], g3[1], g3[2]];
        let mut g = MINKOWSKI;
        for &(mu, nu, ga, v) in &self.gcube {
            g[mu][nu] += v * dphi[ga];
        }
        let mut num = 0.0;
        for i in 0..3 {
            num += g[i + 1][i + 1] * st.d2(phi, c, s[i]);
            if g[0][i + 1] != 0.0 {
                num += 2.0 * g[0][i + 1] * st.d1(pi, c, s[i]);
            }
        }
        if self.mixed {
            for i in 0..3 {
                for j in i + 1..3 {
                    if g[i + 1][j + 1] != 0.0 {
                        num += 2.0 * g[i + 1][j + 1] * st.d11(phi, c, s[i], s[j]);
                    }
                }
            }
        }
        for &(mu, nu, v) in &self.aquad {
            num -= v * dphi[mu] * dphi[nu];
        }
        let (ok, m) = margin_bound(&g);
        (num / (-g[0][0]), m, ok)
    }
}

/// Fixed data of a right-hand-side evaluation.
#[derive(Clone, Debug)]
pub struct RhsContext<'a> {
    pub spec: &'a EquationSpec,
    pub grid: GridSpec,
    pub stencil: Stencil,
    pub boundary: BoundaryMode,
    /// Cells `lo..hi` on each axis carry nonzero data.
    pub lo: usize,
    pub hi: usize,
    /// Cells farther than this from the origin are skipped (their data and
    /// that of their stencil neighbours vanish).
    pub ball: Option<f64>,
}

impl RhsContext<'_> {
    /// Range of `k` on the row `(i, j)` that needs evaluation.
    #[inline]
    fn row_range(&self, x0: f64, x1: f64) -> (usize, usize) {
        match self.ball {
            None => (self.lo, self.hi),
            Some(rb) => {
                let rem = rb * rb - x0 * x0 - x1 * x1;
                if rem < 0.0 {
                    return (self.lo, self.lo);
                }
                let (a, b) = self.grid.axis_range(rem.sqrt(), 0);
                (a.max(self.lo), b.min(self.hi).max(a.max(self.lo)))
            }
        }
    }
}

impl RhsContext<'_> {
    fn metric_radius(&self) -> f64 {
        if self.spec.metric.is_flat() {
            0.0
        } else {
            self.spec.metric.support_radius().unwrap_or(f64::INFINITY)
        }
    }

    /// Outside this radius only the constant-coefficient nonlinear terms act.
    fn general_radius(&self, t: f64) -> f64 {
        let mut r: f64 = -1.0;
        if !self.spec.metric.is_flat() {
            r = r.max(self.metric_radius());
        }
        if !self.spec.source.is_none() {
            r = r.max(self.spec.source.support_radius());
        }
        if let Some(b) = &self.spec.background {
            r = r.max(b.support_radius(t));
        }
        if let Some(q) = &self.spec.interior_quadratic {
            r = r.max(q.radius);
        }
        r
    }

    fn flat_fast_path(&self) -> bool {
        self.spec.is_flat_linear()
    }
}

/// Writes `(d_t phi, d_t pi)` on the active box. Returns the smallest
/// hyperbolicity margin met (infinite on the flat fast path).
pub fn rhs(ctx: &RhsContext<'_>, t: f64, phi: &[f64], pi: &[f64], out_phi: &mut [f64], out_pi: &mut [f64]) -> Result<f64> {
    let n = ctx.grid.n();
    let plane = n * n;
    let (lo, hi) = (ctx.lo, ctx.hi);
    let st = &ctx.stencil;
    let flat = ctx.flat_fast_path();
    let metric_radius = ctx.metric_radius();
    let reach = st.reach;
    let sommerfeld = ctx.boundary == BoundaryMode::Sommerfeld;
    let fast = FastKernel::new(ctx.spec);
    let general_r = ctx.general_radius(t);
    let general_r2 = if general_r < 0.0 { -1.0 } else { general_r * general_r };

    let results: Vec<Result<f64>> = out_phi
        .par_chunks_mut(plane)
        .zip(out_pi.par_chunks_mut(plane))
        .enumerate()
        .map(|(i, (op, opi))| -> Result<f64> {
            let mut margin = f64::INFINITY;
            if sommerfeld && (i < reach || i >= n - reach) {
                for j in 0..n {
                    for k in 0..n {
                        sommerfeld_cell(ctx, phi, pi, op, opi, i, j, k);
                    }
                }
                return Ok(margin);
            }
            if i < lo || i >= hi {
                return Ok(margin);
            }
            let x0 = ctx.grid.coord(i);
            for j in lo..hi {
                let row = (i * n + j) * n;
                let x1 = ctx.grid.coord(j);
                let (klo, khi) = ctx.row_range(x0, x1);
                if flat {
                    for k in klo..khi {
                        let c = row + k;
                        op[c - i * plane] = pi[c];
                        let mut a = st.laplacian(phi, c, n);
                        if !ctx.spec.source.is_none() {
                            a -= ctx.spec.source.eval(t, &[x0, x1, ctx.grid.coord(k)]);
                        }
                        opi[c - i * plane] = a;
                    }
                    continue;
                }
                for k in klo..khi {
                    let c = row + k;
                    let x = [x0, x1, ctx.grid.coord(k)];
                    if x0 * x0 + x1 * x1 + x[2] * x[2] > general_r2 {
                        let (a, m, ok) = fast.eval(st, phi, pi, c, n);
                        if !ok {
                            return Err(Error::HyperbolicityLoss { t, x, margin: m });
                        }
                        margin = margin.min(m);
                        op[c - i * plane] = pi[c];
                        opi[c - i * plane] = a;
                        continue;
                    }
                    let bg = point_background(ctx.spec, t, &x, metric_radius)?;
                    let g = st.gradient(phi, c, n);
                    let d = PointDerivs {
                        dphi: [pi[c], g[0], g[1], g[2]],
                        hess: st.hessian(phi, c, n),
                        dpi: st.gradient(pi, c, n),
                    };
                    let (a, gm) = acceleration(ctx.spec, &bg, &d);
                    if ctx.spec.nullform.has_quasilinear() || !ctx.spec.metric.is_flat() {
                        let (ok, m) = margin_bound(&gm);
                        if !ok {
                            return Err(Error::HyperbolicityLoss { t, x, margin: m });
                        }
                        margin = margin.min(m);
                    }
                    op[c - i * plane] = pi[c];
                    opi[c - i * plane] = a;
                }
            }
            if sommerfeld {
                for j in 0..n {
                    for k in 0..n {
                        if j < reach || j >= n - reach || k < reach || k >= n - reach {
                            sommerfeld_cell(ctx, phi, pi, op, opi, i, j, k);
                        }
                    }
                }
            }
            Ok(margin)
        })
        .collect();
    let mut margin = f64::INFINITY;
    for r in results {
        margin = margin.min(r?);
    }
    if flat {
        margin = 1.0;
    }
    Ok(margin)
}

/// `d_t f = -x.grad f / r - f / r` for both fields at an edge cell.
#[allow(clippy::too_many_arguments)]
fn sommerfeld_cell(
    ctx: &RhsContext<'_>,
    phi: &[f64],
    pi: &[f64],
    op: &mut [f64],
    opi: &mut [f64],
    i: usize,
    j: usize,
    k: usize,
) {
    let n = ctx.grid.n();
    let dx = ctx.grid.dx();
    let c = ctx.grid.index(i, j, k);
    let x = ctx.grid.position(i, j, k);
    let r = tensor::norm3(&x);
    let strides = [n * n, n, 1];
    let pos = [i, j, k];
    let mut dr_phi = 0.0;
    let mut dr_pi = 0.0;
    for a in 0..3 {
        dr_phi += x[a] / r * d1_edge(phi, c, strides[a], pos[a], n, dx);
        dr_pi += x[a] / r * d1_edge(pi, c, strides[a], pos[a], n, dx);
    }
    let local = c - i * n * n;
    op[local] = -dr_phi - phi[c] / r;
    opi[local] = -dr_pi - pi[c] / r;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MetricSpec, NullFormTensor};

    #[test]
    fn principal_part_examples() {
        let flat = EquationSpec::flat_linear();
        assert_eq!(effective_principal(&flat, &crate::tensor::ZERO4, &[0.0; 4], None), MINKOWSKI);
        let mut spec = EquationSpec::flat_linear();
        spec.nullform = NullFormTensor::cubic_tt_only();
        let g = effective_principal(&spec, &crate::tensor::ZERO4, &[0.1, 0.0, 0.0, 0.0], None);
        assert!((g[0][0] + 0.9).abs() < 1e-15);
        // A background equal to the field doubles the shift.
        let g2 = effective_principal(&spec, &crate::tensor::ZERO4, &[0.1, 0.0, 0.0, 0.0], Some(&[0.1, 0.0, 0.0, 0.0]));
        assert!((g2[0][0] + 0.8).abs() < 1e-15);
    }

    #[test]
    fn hyperbolicity_examples() {
        let h = hyperbolicity_check(&MINKOWSKI);
        assert!(h.pass);
        assert!((h.margin - 1.0).abs() < 1e-15);
        let mut g = MINKOWSKI;
        g[0][0] = 0.1;
        assert!(!hyperbolicity_check(&g).pass);
        let mut g = MINKOWSKI;
        g[1][1] = 0.0;
        assert!(!hyperbolicity_check(&g).pass);
        assert!(!margin_bound(&g).0);
    }

    #[test]
    fn speed_of_stretched_symbol() {
        assert!((speed_bound(&MINKOWSKI) - 1.0).abs() < 1e-15);
        let mut g = MINKOWSKI;
        g[1][1] = 4.0;
        assert!((speed_bound(&g) - 2.0).abs() < 1e-15);
        // Plane wave along x: -w^2 + 4 k^2 = 0 gives |w/k| = 2.
    }

    #[test]
    fn lower_order_terms_vanish_for_flat_and_match_divergence_form() {
        assert_eq!(lower_order_vector(&MetricSample::ZERO).unwrap(), [0.0; 4]);
        // Compare Box_g f computed as (1/sqrt|G|) d_mu(g^{mu nu} sqrt|G| d_nu f)
        // by nested differences against g^{mu nu} f_{mu nu} + N^nu f_nu.
        let spec = MetricSpec::InteriorOscillator { delta0: 0.3, alpha: 0.1, radius: 10.0 };
        let f = |t: f64, x: &[f64; 3]| (0.3 * t).sin() * x[0] + x[1] * x[1] * x[2] + 0.1 * t * x[2];
        let (t0, x0) = (0.7, [1.1, -0.8, 2.0]);
        let h = 1e-3;
        let shift = |t: f64, x: &[f64; 3], mu: usize, s: f64| {
            let (mut t, mut x) = (t, *x);
            if mu == 0 {
                t += s;
            } else {
                x[mu - 1] += s;
            }
            (t, x)
        };
        let sqrt_g = |t: f64, x: &[f64; 3]| {
            let ginv = spec.eval(t, x).inverse_metric();
            (1.0 / crate::tensor::det4(&ginv)).abs().sqrt()
        };
        let flux = |t: f64, x: &[f64; 3], mu: usize| {
            let ginv = spec.eval(t, x).inverse_metric();
            let mut s = 0.0;
            for nu in 0..4 {
                let (tp, xp) = shift(t, x, nu, h);
                let (tm, xm) = shift(t, x, nu, -h);
                s += ginv[mu][nu] * (f(tp, &xp) - f(tm, &xm)) / (2.0 * h);
            }
            s * sqrt_g(t, x)
        };
        let mut div = 0.0;
        for mu in 0..4 {
            let (tp, xp) = shift(t0, &x0, mu, h);
            let (tm, xm) = shift(t0, &x0, mu, -h);
            div += (flux(tp, &xp, mu) - flux(tm, &xm, mu)) / (2.0 * h);
        }
        let box_div = div / sqrt_g(t0, &x0);

        let m = spec.eval(t0, &x0);
        let n = lower_order_vector(&m).unwrap();
        let ginv = m.inverse_metric();
        let mut box_nd = 0.0;
        for mu in 0..4 {
            let (tp, xp) = shift(t0, &x0, mu, h);
            let (tm, xm) = shift(t0, &x0, mu, -h);
            box_nd += n[mu] * (f(tp, &xp) - f(tm, &xm)) / (2.0 * h);
            for nu in 0..4 {
                let d2 = {
                    let (a, b) = shift(tp, &xp, nu, h);
                    let (c, d) = shift(tp, &xp, nu, -h);
                    let (e, g) = shift(tm, &xm, nu, h);
                    let (p, q) = shift(tm, &xm, nu, -h);
                    (f(a, &b) - f(c, &d) - f(e, &g) + f(p, &q)) / (4.0 * h * h)
                };
                box_nd += ginv[mu][nu] * d2;
            }
        }
        assert!((box_div - box_nd).abs() < 1e-5, "{box_div} vs {box_nd}");
    }

    #[test]
    fn source_enters_with_negative_sign() {
        let mut spec = EquationSpec::flat_linear();
        spec.source = crate::evolve::SourceSpec::Bump { amplitude: 1.0, center: [0.0; 3], width: 1.0, duration: 2.0 };
        let bg = point_background(&spec, 1.0, &[0.0; 3], 0.0).unwrap();
        let (a, _) = acceleration(&spec, &bg, &PointDerivs::default());
        assert!((a + 1.0).abs() < 1e-14);
    }
}
