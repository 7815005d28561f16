//! Local spacetime jets of the solution and of its commuted fields.
//!
//! A [`Jet`] stores all partial derivatives of a scalar up to third order in
//! `(t, x, y, z)` at one point. Spatial derivatives come from tensor-product
//! polynomial weights on the grid (degree 5 off the grid, the centred
//! fourth-order stencils on it); time derivatives come from the stored time
//! tower `phi, d_t phi, d_t^2 phi, d_t^3 phi`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::Window;
use crate::foliation::GridSpec;
use crate::geometry::{word_label, Generator};
use crate::tensor::{Mat4, Vec4};

/// Highest derivative order carried by a jet.
pub const MAX_ORDER: usize = 3;
/// Number of multi-indices in four variables with total degree <= 3.
pub const N_COEF: usize = 35;

const fn build_tables() -> ([[u8; 4]; N_COEF], [u8; 256]) {
    let mut list = [[0u8; 4]; N_COEF];
    let mut table = [u8::MAX; 256];
    let mut n = 0;
    let mut deg = 0u8;
    while deg <= 3 {
        // Descending in t, then x, then y, so first-order slots read t, x, y, z.
        let mut t = deg + 1;
        while t > 0 {
            t -= 1;
            let mut x = deg - t + 1;
            while x > 0 {
                x -= 1;
                let mut y = deg - t - x + 1;
                while y > 0 {
                    y -= 1;
                    let z = deg - t - x - y;
                    list[n] = [t, x, y, z];
                    table[(t as usize) * 64 + (x as usize) * 16 + (y as usize) * 4 + z as usize] = n as u8;
                    n += 1;
                }
            }
        }
        deg += 1;
    }
    (list, table)
}

const TABLES: ([[u8; 4]; N_COEF], [u8; 256]) = build_tables();

#[inline]
fn slot(b: [usize; 4]) -> usize {
    TABLES.1[b[0] * 64 + b[1] * 16 + b[2] * 4 + b[3]] as usize
}

/// Partial derivatives `D^b f` at a point for `|b| <= order`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub order: usize,
    d: [f64; N_COEF],
}

impl Jet {
    pub fn zero(order: usize) -> Self {
        Self { order, d: [0.0; N_COEF] }
    }

    #[inline]
    pub fn get(&self, b: [usize; 4]) -> f64 {
        debug_assert!(b.iter().sum::<usize>() <= self.order);
        self.d[slot(b)]
    }

    #[inline]
    pub fn set(&mut self, b: [usize; 4], v: f64) {
        self.d[slot(b)] = v;
    }

    pub fn value(&self) -> f64 {
        self.d[0]
    }

    /// `(d_t, d_x, d_y, d_z)`; needs order >= 1.
    pub fn grad(&self) -> Vec4 {
        assert!(self.order >= 1, "jet of order {} has no gradient", self.order);
        [self.d[1], self.d[2], self.d[3], self.d[4]]
    }

    /// Spacetime Hessian; needs order >= 2.
    pub fn hess(&self) -> Mat4 {
        assert!(self.order >= 2, "jet of order {} has no Hessian", self.order);
        let mut h = [[0.0; 4]; 4];
        for (mu, row) in h.iter_mut().enumerate() {
            for (nu, e) in row.iter_mut().enumerate() {
                let mut b = [0; 4];
                b[mu] += 1;
                b[nu] += 1;
                *e = self.get(b);
            }
        }
        h
    }

    /// Jet of `d_t^m f`.
    pub fn shift_t(&self, m: usize) -> Self {
        assert!(m <= self.order);
        let mut out = Self::zero(self.order - m);
        for b in TABLES.0.iter().take(N_COEF) {
            let b = [b[0] as usize, b[1] as usize, b[2] as usize, b[3] as usize];
            if b.iter().sum::<usize>() > out.order {
                break;
            }
            out.set(b, self.get([b[0] + m, b[1], b[2], b[3]]));
        }
        out
    }

    /// Jet of `x_a d_b f - x_b d_a f` (spatial axes `a, b` in `0..3`) at the
    /// point `x`, by the Leibniz rule.
    pub fn rotate(&self, a: usize, b: usize, x: &[f64; 3]) -> Self {
        assert!(self.order >= 1);
        let (ia, ib) = (a + 1, b + 1);
        let mut out = Self::zero(self.order - 1);
        for m in TABLES.0.iter() {
            let beta = [m[0] as usize, m[1] as usize, m[2] as usize, m[3] as usize];
            if beta.iter().sum::<usize>() > out.order {
                break;
            }
            let mut up_a = beta;
            up_a[ia] += 1;
            let mut up_b = beta;
            up_b[ib] += 1;
            let mut v = x[a] * self.get(up_b) - x[b] * self.get(up_a);
            if beta[ia] > 0 {
                let mut s = beta;
                s[ia] -= 1;
                s[ib] += 1;
                v += beta[ia] as f64 * self.get(s);
            }
            if beta[ib] > 0 {
                let mut s = beta;
                s[ib] -= 1;
                s[ia] += 1;
                v -= beta[ib] as f64 * self.get(s);
            }
            out.set(beta, v);
        }
        out
    }

    /// Assembles the spacetime jet of `phi` from spatial derivatives of the
    /// time tower `d_t^m phi`, `m = 0..=3`; `tower[m]` must be valid up to
    /// spatial order `3 - m`.
    pub fn from_tower(tower: &[SpatialDerivs; 4]) -> Self {
        let mut out = Self::zero(MAX_ORDER);
        for m in TABLES.0.iter() {
            let b = [m[0] as usize, m[1] as usize, m[2] as usize, m[3] as usize];
            out.set(b, tower[b[0]][b[1]][b[2]][b[3]]);
        }
        out
    }
}

/// `[ox][oy][oz]` spatial derivatives of one grid field at a point.
pub type SpatialDerivs = [[[f64; 4]; 4]; 4];

/// Per-axis derivative weights over up to six consecutive grid nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisWeights {
    pub base: usize,
    pub len: usize,
    /// `w[o][i]`: weight of node `base + i` in the `o`-th derivative.
    pub w: [[f64; 6]; 4],
}

impl AxisWeights {
    /// Degree-5 Lagrange weights and their derivatives at coordinate `x`.
    pub fn off_grid(grid: &GridSpec, x: f64) -> Option<Self> {
        let dx = grid.dx();
        let p = (x + grid.half_width) / dx - 0.5;
        let base = p.floor() as i64 - 2;
        if base < 0 || base + 5 >= grid.n() as i64 {
            return None;
        }
        let xi = p - base as f64;
        let mut w = [[0.0; 6]; 4];
        for i in 0..6 {
            // Taylor coefficients in e of prod_{j != i} (xi - j + e) / (i - j).
            let mut poly = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
            let mut denom = 1.0;
            for j in 0..6 {
                if j == i {
                    continue;
                }
                let c = xi - j as f64;
                for d in (1..6).rev() {
                    poly[d] = poly[d] * c + poly[d - 1];
                }
                poly[0] *= c;
                denom *= i as f64 - j as f64;
            }
            let mut fact = 1.0;
            let mut scale = 1.0;
            for o in 0..4 {
                if o > 0 {
                    fact *= o as f64;
                    scale /= dx;
                }
                w[o][i] = poly[o] * fact * scale / denom;
            }
        }
        Some(Self { base: base as usize, len: 6, w })
    }

    /// Centred fourth-order stencils at grid index `i` (third derivative to
    /// second order).
    pub fn on_grid(grid: &GridSpec, i: usize) -> Option<Self> {
        if i < 2 || i + 2 >= grid.n() {
            return None;
        }
        let dx = grid.dx();
        let mut w = [[0.0; 6]; 4];
        w[0][..5].copy_from_slice(&[0.0, 0.0, 1.0, 0.0, 0.0]);
        let d1 = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        let d2 = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
        let d3 = [-0.5, 1.0, 0.0, -1.0, 0.5];
        for k in 0..5 {
            w[1][k] = d1[k] / dx;
            w[2][k] = d2[k] / (dx * dx);
            w[3][k] = d3[k] / (dx * dx * dx);
        }
        Some(Self { base: i - 2, len: 5, w })
    }
}

/// Tensor-product derivatives of `field` up to total spatial order `order`.
pub fn spatial_derivs<F: Fn(usize) -> f64>(
    field: &F,
    n: usize,
    ax: &[AxisWeights; 3],
    order: usize,
) -> SpatialDerivs {
    let [wx, wy, wz] = ax;
    let mut out = [[[0.0; 4]; 4]; 4];
    let mut acc_y = [[[0.0; 4]; 4]; 6];
    for (a, acc) in acc_y.iter_mut().enumerate().take(wx.len) {
        let i = wx.base + a;
        for b in 0..wy.len {
            let j = wy.base + b;
            let row = (i * n + j) * n + wz.base;
            let mut vals = [0.0; 6];
            for (c, v) in vals.iter_mut().enumerate().take(wz.len) {
                *v = field(row + c);
            }
            let mut dz = [0.0; 4];
            for (oz, d) in dz.iter_mut().enumerate().take(order + 1) {
                let w = &wz.w[oz];
                *d = (0..wz.len).map(|c| w[c] * vals[c]).sum();
            }
            for oy in 0..=order {
                let wyb = wy.w[oy][b];
                if wyb == 0.0 {
                    continue;
                }
                for oz in 0..=(order - oy) {
                    acc[oy][oz] += wyb * dz[oz];
                }
            }
        }
    }
    for ox in 0..=order {
        for oy in 0..=(order - ox) {
            for oz in 0..=(order - ox - oy) {
                out[ox][oy][oz] = (0..wx.len).map(|a| wx.w[ox][a] * acc_y[a][oy][oz]).sum();
            }
        }
    }
    out
}

/// The time tower `d_t^m phi` at one instant, evaluated cell by cell.
pub struct TimeView<'a> {
    pub grid: &'a GridSpec,
    pub t: f64,
    source: Source<'a>,
}

enum Source<'a> {
    Level(&'a Window<'a>),
    Blend { w: &'a Window<'a>, theta: f64, h: f64 },
}

impl<'a> TimeView<'a> {
    /// The view at time `t`, which must lie in `[cur.t, next.t]`. Times
    /// matching the current level use it directly; others use cubic Hermite
    /// interpolation between the current and next levels.
    pub fn new(w: &'a Window<'a>, t: f64) -> Result<Self> {
        let eps = 1e-9 * (1.0 + t.abs());
        if (t - w.cur.t).abs() <= eps {
            return Ok(Self { grid: w.grid, t, source: Source::Level(w) });
        }
        match w.next {
            Some(nx) if t > w.cur.t && t <= nx.t + eps => {
                let h = nx.t - w.cur.t;
                Ok(Self { grid: w.grid, t, source: Source::Blend { w, theta: (t - w.cur.t) / h, h } })
            }
            _ => Err(Error::OutOfDomain {
                t,
                x: [0.0; 3],
                reason: format!("time outside the stored window starting at {}", w.cur.t),
            }),
        }
    }

    /// `d_t^m phi` at cell `c`, `m <= 3`.
    #[inline]
    pub fn tower(&self, m: usize, c: usize) -> f64 {
        match self.source {
            Source::Level(w) => match m {
                0 => w.cur.phi[c],
                1 => w.cur.pi[c],
                2 => w.cur.accel[c],
                _ => w.accel_dot(c),
            },
            Source::Blend { w, theta, h } => {
                let (a, b) = (w.cur, w.next.expect("blend needs a next level"));
                let hermite = |fa: f64, da: f64, fb: f64, db: f64| {
                    let t2 = theta * theta;
                    let t3 = t2 * theta;
                    (2.0 * t3 - 3.0 * t2 + 1.0) * fa
                        + (t3 - 2.0 * t2 + theta) * h * da
                        + (-2.0 * t3 + 3.0 * t2) * fb
                        + (t3 - t2) * h * db
                };
                match m {
                    0 => hermite(a.phi[c], a.pi[c], b.phi[c], b.pi[c]),
                    1 => hermite(a.pi[c], a.accel[c], b.pi[c], b.accel[c]),
                    // Quadratic through the previous level when there is one.
                    _ => match w.prev {
                        Some(p) => {
                            let s = (p.t - a.t) / h;
                            let (fp, fa, fb) = (p.accel[c], a.accel[c], b.accel[c]);
                            // q(x) = fa + c1 x + c2 x^2 with q(1) = fb, q(s) = fp.
                            let c2 = ((fp - fa) - s * (fb - fa)) / (s * s - s);
                            let c1 = fb - fa - c2;
                            if m == 2 {
                                fa + theta * (c1 + theta * c2)
                            } else {
                                (c1 + 2.0 * theta * c2) / h
                            }
                        }
                        None if m == 2 => (1.0 - theta) * a.accel[c] + theta * b.accel[c],
                        None => (b.accel[c] - a.accel[c]) / h,
                    },
                }
            }
        }
    }

    fn assemble(&self, ax: &[AxisWeights; 3]) -> Jet {
        let n = self.grid.n();
        let mut tower = [[[[0.0; 4]; 4]; 4]; 4];
        for (m, slot) in tower.iter_mut().enumerate() {
            *slot = spatial_derivs(&|c| self.tower(m, c), n, ax, MAX_ORDER - m);
        }
        Jet::from_tower(&tower)
    }

    /// Jet of `phi` at an arbitrary point.
    pub fn jet_at(&self, x: &[f64; 3]) -> Result<Jet> {
        let ax = (|| {
            Some([
                AxisWeights::off_grid(self.grid, x[0])?,
                AxisWeights::off_grid(self.grid, x[1])?,
                AxisWeights::off_grid(self.grid, x[2])?,
            ])
        })()
        .ok_or_else(|| Error::OutOfDomain {
            t: self.t,
            x: *x,
            reason: "interpolation stencil leaves the grid".into(),
        })?;
        Ok(self.assemble(&ax))
    }

    /// Jet of `phi` at the centre of grid cell `c` from centred differences.
    pub fn jet_at_cell(&self, c: usize) -> Result<Jet> {
        let (i, j, k) = self.grid.unravel(c);
        let ax = (|| {
            Some([
                AxisWeights::on_grid(self.grid, i)?,
                AxisWeights::on_grid(self.grid, j)?,
                AxisWeights::on_grid(self.grid, k)?,
            ])
        })()
        .ok_or_else(|| Error::OutOfDomain {
            t: self.t,
            x: self.grid.position(i, j, k),
            reason: "difference stencil leaves the grid".into(),
        })?;
        Ok(self.assemble(&ax))
    }
}

/// A commuted field `Omega_{a_1} ... Omega_{a_j} d_t^m phi`. Rotations commute
/// with `d_t`, so every word over the generators reduces to this form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word {
    /// Rotations, outermost first.
    pub rotations: Vec<Generator>,
    pub time: usize,
}

impl Word {
    pub fn identity() -> Self {
        Self { rotations: Vec::new(), time: 0 }
    }

    /// Canonical form of `Z_1 ... Z_k` (rightmost applied first).
    pub fn canonical(gens: &[Generator]) -> Self {
        let rotations: Vec<Generator> = gens.iter().copied().filter(|g| *g != Generator::Dt).collect();
        let time = gens.len() - rotations.len();
        Self { rotations, time }
    }

    pub fn len(&self) -> usize {
        self.rotations.len() + self.time
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn generators(&self) -> Vec<Generator> {
        let mut g = self.rotations.clone();
        g.extend(std::iter::repeat(Generator::Dt).take(self.time));
        g
    }

    pub fn label(&self) -> String {
        word_label(&self.generators())
    }

    /// The word applied to the jet of `phi` at `x`.
    pub fn apply(&self, phi: &Jet, x: &[f64; 3]) -> Jet {
        let mut j = phi.shift_t(self.time);
        for g in self.rotations.iter().rev() {
            j = rotate_by(&j, *g, x);
        }
        j
    }
}

pub fn rotate_by(j: &Jet, g: Generator, x: &[f64; 3]) -> Jet {
    match g {
        Generator::Omega12 => j.rotate(0, 1, x),
        Generator::Omega13 => j.rotate(0, 2, x),
        Generator::Omega23 => j.rotate(1, 2, x),
        Generator::Dt => j.shift_t(1),
    }
}

/// Distinct commuted fields of order `<= k_max`, shortest first.
pub fn commuted_family(k_max: usize) -> Vec<Word> {
    let rot = [Generator::Omega12, Generator::Omega13, Generator::Omega23];
    let mut out = Vec::new();
    for k in 0..=k_max {
        for time in (0..=k).rev() {
            let nrot = k - time;
            let mut seqs: Vec<Vec<Generator>> = vec![Vec::new()];
            for _ in 0..nrot {
                seqs = seqs
                    .into_iter()
                    .flat_map(|s| {
                        rot.iter().map(move |g| {
                            let mut s2 = s.clone();
                            s2.push(*g);
                            s2
                        })
                    })
                    .collect();
            }
            for rotations in seqs {
                out.push(Word { rotations, time });
            }
        }
    }
    out
}

/// Spacetime gradient of `f_t + s x_hat . grad f` (`s = +1` for `L`, `-1`
/// for `Lbar`) from a jet of order >= 2.
pub fn null_derivative_gradient(j: &Jet, x: &[f64; 3], r: f64, s: f64) -> Vec4 {
    let h = j.hess();
    let g = j.grad();
    let xh = [x[0] / r, x[1] / r, x[2] / r];
    let mut out = [0.0; 4];
    for (mu, o) in out.iter_mut().enumerate() {
        let mut v = h[mu][0];
        for k in 0..3 {
            v += s * xh[k] * h[mu][k + 1];
        }
        if mu > 0 {
            // d_j x_hat_k = (delta_jk - x_hat_j x_hat_k) / r
            let jx = mu - 1;
            let radial: f64 = (0..3).map(|k| xh[k] * g[k + 1]).sum();
            v += s * (g[jx + 1] - xh[jx] * radial) / r;
        }
        *o = v;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly_jet(x0: &[f64; 3], t0: f64) -> (Jet, impl Fn(f64, &[f64; 3]) -> f64) {
        // f = t^2 x + y^3 + x y z + t z^2
        let f = |t: f64, x: &[f64; 3]| t * t * x[0] + x[1].powi(3) + x[0] * x[1] * x[2] + t * x[2] * x[2];
        let mut j = Jet::zero(3);
        let (x, y, z, t) = (x0[0], x0[1], x0[2], t0);
        j.set([0, 0, 0, 0], f(t, x0));
        j.set([1, 0, 0, 0], 2.0 * t * x + z * z);
        j.set([0, 1, 0, 0], t * t + y * z);
        j.set([0, 0, 1, 0], 3.0 * y * y + x * z);
        j.set([0, 0, 0, 1], x * y + 2.0 * t * z);
        j.set([2, 0, 0, 0], 2.0 * x);
        j.set([1, 1, 0, 0], 2.0 * t);
        j.set([1, 0, 0, 1], 2.0 * z);
        j.set([0, 0, 2, 0], 6.0 * y);
        j.set([0, 1, 1, 0], z);
        j.set([0, 1, 0, 1], y);
        j.set([0, 0, 1, 1], x);
        j.set([0, 0, 0, 2], 2.0 * t);
        j.set([2, 1, 0, 0], 2.0);
        j.set([1, 0, 0, 2], 2.0);
        j.set([0, 0, 3, 0], 6.0);
        j.set([0, 1, 1, 1], 1.0);
        (j, f)
    }

    #[test]
    fn table_is_a_bijection() {
        for (n, b) in TABLES.0.iter().enumerate() {
            let b = [b[0] as usize, b[1] as usize, b[2] as usize, b[3] as usize];
            assert_eq!(slot(b), n);
        }
        assert_eq!(slot([0, 0, 0, 0]), 0);
        assert_eq!(slot([1, 0, 0, 0]), 1);
        assert_eq!(slot([0, 0, 0, 1]), 4);
    }

    #[test]
    fn rotation_matches_direct_formula() {
        let x0 = [0.7, -1.3, 0.4];
        let (j, f) = poly_jet(&x0, 0.9);
        let r = j.rotate(0, 1, &x0);
        // Omega_12 f = x f_y - y f_x evaluated directly, with a gradient by differences.
        let om = |t: f64, x: &[f64; 3]| {
            let e = 1e-5;
            let fy = (f(t, &[x[0], x[1] + e, x[2]]) - f(t, &[x[0], x[1] - e, x[2]])) / (2.0 * e);
            let fx = (f(t, &[x[0] + e, x[1], x[2]]) - f(t, &[x[0] - e, x[1], x[2]])) / (2.0 * e);
            x[0] * fy - x[1] * fx
        };
        assert!((r.value() - om(0.9, &x0)).abs() < 1e-8);
        let e = 1e-4;
        let dz = (om(0.9, &[x0[0], x0[1], x0[2] + e]) - om(0.9, &[x0[0], x0[1], x0[2] - e])) / (2.0 * e);
        assert!((r.grad()[3] - dz).abs() < 1e-6, "{} vs {}", r.grad()[3], dz);
        let dt = (om(0.9 + e, &x0) - om(0.9 - e, &x0)) / (2.0 * e);
        assert!((r.grad()[0] - dt).abs() < 1e-6);
    }

    #[test]
    fn rotation_of_radial_function_vanishes() {
        let x0 = [0.3, 0.5, -0.2];
        let r2 = x0.iter().map(|v| v * v).sum::<f64>();
        let mut j = Jet::zero(3);
        // f = |x|^2: gradient 2x, Hessian 2 I.
        j.set([0, 0, 0, 0], r2);
        for a in 0..3 {
            let mut b = [0; 4];
            b[a + 1] = 1;
            j.set(b, 2.0 * x0[a]);
            b[a + 1] = 2;
            j.set(b, 2.0);
        }
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let r = j.rotate(a, b, &x0);
            assert!(r.value().abs() < 1e-15);
            assert!(r.grad().iter().all(|g| g.abs() < 1e-15));
            let rr = r.rotate(a, b, &x0);
            assert!(rr.value().abs() < 1e-15);
        }
    }

    #[test]
    fn family_sizes() {
        assert_eq!(commuted_family(0).len(), 1);
        assert_eq!(commuted_family(1).len(), 5);
        assert_eq!(commuted_family(2).len(), 18);
        let fam = commuted_family(2);
        assert_eq!(fam[0], Word::identity());
        let w = Word::canonical(&[Generator::Dt, Generator::Omega13, Generator::Dt]);
        assert_eq!(w.rotations, vec![Generator::Omega13]);
        assert_eq!(w.time, 2);
        assert_eq!(w.label(), "O13.T.T");
    }

    #[test]
    fn off_grid_weights_reproduce_quintics() {
        let grid = GridSpec::new(4.0, 32).unwrap();
        let x = 0.3712;
        let a = AxisWeights::off_grid(&grid, x).unwrap();
        let f = |s: f64| 1.0 - 2.0 * s + 0.5 * s.powi(3) - 0.1 * s.powi(5);
        let df = [
            f(x),
            -2.0 + 1.5 * x * x - 0.5 * x.powi(4),
            3.0 * x - 2.0 * x.powi(3),
            3.0 - 6.0 * x * x,
        ];
        for o in 0..4 {
            let v: f64 = (0..6).map(|i| a.w[o][i] * f(grid.coord(a.base + i))).sum();
            assert!((v - df[o]).abs() < 1e-9, "order {o}: {v} vs {}", df[o]);
        }
    }

    #[test]
    fn sine_derivative_off_grid() {
        let grid = GridSpec::new(8.0, 64).unwrap();
        let mut worst: f64 = 0.0;
        for s in 0..50 {
            let x = -3.0 + 0.1237 * s as f64;
            let a = AxisWeights::off_grid(&grid, x).unwrap();
            let d: f64 = (0..6).map(|i| a.w[1][i] * grid.coord(a.base + i).sin()).sum();
            worst = worst.max((d - x.cos()).abs());
        }
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn null_gradient_of_linear_function() {
        // f = t + 2x: L f = 1 + 2 x_hat_1, whose gradient is 2 d(x_hat_1).
        let mut j = Jet::zero(3);
        j.set([1, 0, 0, 0], 1.0);
        j.set([0, 1, 0, 0], 2.0);
        let x = [1.0, 2.0, 2.0];
        let r = 3.0;
        let g = null_derivative_gradient(&j, &x, r, 1.0);
        let xh = [1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0];
        for jx in 0..3 {
            let expect = 2.0 * ((jx == 0) as u8 as f64 - xh[jx] * xh[0]) / r;
            assert!((g[jx + 1] - expect).abs() < 1e-15);
        }
        assert_eq!(g[0], 0.0);
    }
}
