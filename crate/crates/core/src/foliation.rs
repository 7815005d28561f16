//! The hybrid leaves (a spacelike disc glued to an outgoing null cone),
//! sampling of grid fields on them and the integrals with their measures.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::stencil::Stencil;
use crate::geometry::DecayParams;

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

/// Uniform cell-centred Cartesian grid on `[-half_width, half_width]^3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub n_per_axis: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, n_per_axis: usize) -> Result<Self> {
        let g = Self { half_width, n_per_axis };
        g.validate()?;
        Ok(g)
    }

    /// Grid with the given cell size, rounding the count to an even number.
    pub fn with_spacing(half_width: f64, dx: f64) -> Result<Self> {
        let n = (2.0 * half_width / dx).round() as usize;
        Self::new(half_width, n + n % 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_per_axis < 16 {
            return Err(Error::GridTooSmall(format!("n_per_axis = {} < 16", self.n_per_axis)));
        }
        if !(self.half_width > 0.0) {
            return Err(Error::GridTooSmall(format!("half_width = {}", self.half_width)));
        }
        Ok(())
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n_per_axis as f64
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n_per_axis
    }

    pub fn len(&self) -> usize {
        self.n_per_axis.pow(3)
    }

    pub fn is_empty(&self) -> bool {
        self.n_per_axis == 0
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.dx()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n_per_axis + j) * self.n_per_axis + k
    }

    #[inline]
    pub fn position(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n_per_axis;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    /// Index range of cells whose centre lies within `radius` of the origin
    /// along one axis, clamped to `[pad, n - pad)`.
    pub fn axis_range(&self, radius: f64, pad: usize) -> (usize, usize) {
        let n = self.n_per_axis;
        let dx = self.dx();
        let lo = ((self.half_width - radius) / dx - 0.5).floor().max(0.0) as usize;
        let hi = (((self.half_width + radius) / dx - 0.5).ceil() as usize + 1).min(n);
        (lo.max(pad), hi.min(n.saturating_sub(pad)))
    }
}

// ---------------------------------------------------------------------------
// Sphere quadrature
// ---------------------------------------------------------------------------

/// Product rule on the unit sphere: Gauss-Legendre in `cos(theta)` times the
/// trapezoid rule in the azimuth. Exact for spherical harmonics up to `degree`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereQuadrature {
    pub degree: usize,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

impl SphereQuadrature {
    pub fn new(degree: usize) -> Self {
        let n_theta = (degree + 2) / 2;
        let n_phi = degree + 1;
        let (ct, wt) = gauss_legendre(n_theta);
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
        for (c, wc) in ct.iter().zip(&wt) {
            let s = (1.0 - c * c).max(0.0).sqrt();
            for k in 0..n_phi {
                // Half-step offset keeps nodes off the coordinate planes.
                let ph = (k as f64 + 0.5) * dphi;
                nodes.push([s * ph.cos(), s * ph.sin(), *c]);
                weights.push(wc * dphi);
            }
        }
        Self { degree, nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(&[f64; 3]) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(w, q)| q * f(w)).sum()
    }
}

impl Default for SphereQuadrature {
    fn default() -> Self {
        Self::new(11)
    }
}

// ---------------------------------------------------------------------------
// Tricubic interpolation
// ---------------------------------------------------------------------------

/// Four-point Lagrange weights along one axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisStencil {
    pub base: usize,
    pub w: [f64; 4],
}

impl AxisStencil {
    /// Stencil for coordinate `x` on `grid`, covering cells `base..base+4`,
    /// with `pad` further cells required on each side.
    pub fn new(grid: &GridSpec, x: f64, pad: usize) -> Option<Self> {
        let p = (x + grid.half_width) / grid.dx() - 0.5;
        let i0 = p.floor();
        let s = p - i0;
        let base = i0 as i64 - 1;
        if base < pad as i64 || base + 3 + pad as i64 >= grid.n_per_axis as i64 {
            return None;
        }
        let w = [
            -s * (s - 1.0) * (s - 2.0) / 6.0,
            (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
            -(s + 1.0) * s * (s - 2.0) / 2.0,
            (s + 1.0) * s * (s - 1.0) / 6.0,
        ];
        Some(Self { base: base as usize, w })
    }
}

/// Value, gradient and Hessian of an interpolated spatial field.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SpatialJet {
    pub value: f64,
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
}

/// Tricubic interpolation of a field stored on a cube of side `side` (the
/// full grid or a local patch whose first cell is grid cell `origin`).
/// Derivatives are interpolated centred differences.
#[derive(Clone, Copy, Debug)]
pub struct Tricubic {
    pub sx: AxisStencil,
    pub sy: AxisStencil,
    pub sz: AxisStencil,
}

impl Tricubic {
    pub fn at(grid: &GridSpec, x: &[f64; 3], pad: usize) -> Option<Self> {
        Some(Self {
            sx: AxisStencil::new(grid, x[0], pad)?,
            sy: AxisStencil::new(grid, x[1], pad)?,
            sz: AxisStencil::new(grid, x[2], pad)?,
        })
    }

    /// Smallest grid index touched on each axis and the (common) node count per axis.
    pub fn base(&self) -> [usize; 3] {
        [self.sx.base, self.sy.base, self.sz.base]
    }

    #[inline]
    fn node(&self, side: usize, origin: [usize; 3], a: usize, b: usize, c: usize) -> usize {
        let i = self.sx.base + a - origin[0];
        let j = self.sy.base + b - origin[1];
        let k = self.sz.base + c - origin[2];
        (i * side + j) * side + k
    }

    pub fn value(&self, field: &[f64], side: usize, origin: [usize; 3]) -> f64 {
        let mut acc = 0.0;
        for a in 0..4 {
            let mut ay = 0.0;
            for b in 0..4 {
                let row = self.node(side, origin, a, b, 0);
                let f = &field[row..row + 4];
                let az = f[0] * self.sz.w[0] + f[1] * self.sz.w[1] + f[2] * self.sz.w[2] + f[3] * self.sz.w[3];
                ay += self.sy.w[b] * az;
            }
            acc += self.sx.w[a] * ay;
        }
        acc
    }

    pub fn jet(&self, field: &[f64], side: usize, origin: [usize; 3], st: &Stencil, hessian: bool) -> SpatialJet {
        let mut out = SpatialJet { value: self.value(field, side, origin), ..Default::default() };
        for a in 0..4 {
            for b in 0..4 {
                let wab = self.sx.w[a] * self.sy.w[b];
                for c in 0..4 {
                    let w = wab * self.sz.w[c];
                    let idx = self.node(side, origin, a, b, c);
                    let g = st.gradient(field, idx, side);
                    for m in 0..3 {
                        out.grad[m] += w * g[m];
                    }
                    if hessian {
                        let h = st.hessian(field, idx, side);
                        for m in 0..3 {
                            for l in m..3 {
                                out.hess[m][l] += w * h[m][l];
                            }
                        }
                    }
                }
            }
        }
        if hessian {
            out.hess[1][0] = out.hess[0][1];
            out.hess[2][0] = out.hess[0][2];
            out.hess[2][1] = out.hess[1][2];
        }
        out
    }
}

/// `(phi, d_t phi, d_1 phi, d_2 phi, d_3 phi)` at a spacetime point, from the
/// grid fields `(phi, pi)` at one or two bracketing time levels.
pub struct FieldSlice<'a> {
    pub t: f64,
    pub phi: &'a [f64],
    pub pi: &'a [f64],
}

/// Interpolates `phi` and its four first derivatives. Between two levels the
/// spatial interpolants are blended linearly in `t`.
pub fn interp(grid: &GridSpec, levels: &[FieldSlice<'_>], t: f64, x: &[f64; 3]) -> Result<(f64, [f64; 4])> {
    let out_of_domain = |reason: &str| Error::OutOfDomain { t, x: *x, reason: reason.to_string() };
    let st = Stencil::new(4, grid.dx())?;
    let tri = Tricubic::at(grid, x, st.reach).ok_or_else(|| out_of_domain("stencil leaves the grid"))?;
    let eval = |s: &FieldSlice<'_>| {
        let j = tri.jet(s.phi, grid.n(), [0; 3], &st, false);
        let p = tri.value(s.pi, grid.n(), [0; 3]);
        (j.value, [p, j.grad[0], j.grad[1], j.grad[2]])
    };
    let eps = 1e-9 * (1.0 + t.abs());
    for s in levels {
        if (s.t - t).abs() <= eps {
            return Ok(eval(s));
        }
    }
    for pair in levels.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if t > a.t && t < b.t {
            let th = (t - a.t) / (b.t - a.t);
            let (va, ga) = eval(a);
            let (vb, gb) = eval(b);
            let mut g = [0.0; 4];
            for m in 0..4 {
                g[m] = (1.0 - th) * ga[m] + th * gb[m];
            }
            return Ok(((1.0 - th) * va + th * vb, g));
        }
    }
    Err(out_of_domain("time outside the stored window"))
}

// ---------------------------------------------------------------------------
// Leaves
// ---------------------------------------------------------------------------

/// Grid cells of the disc `r <= R` with fractional boundary weights.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscNodes {
    pub radius: f64,
    pub cells: Vec<usize>,
    pub weights: Vec<f64>,
}

impl DiscNodes {
    /// Weights are `dx^3` times the fraction of `8^3` sub-cell points inside the ball.
    pub fn new(grid: &GridSpec, radius: f64) -> Self {
        let dx = grid.dx();
        let n_sub = 8;
        let reach = radius + dx;
        let (lo, hi) = grid.axis_range(reach, 0);
        let half_diag = 0.5 * dx * 3f64.sqrt();
        let mut cells = Vec::new();
        let mut weights = Vec::new();
        for i in lo..hi {
            for j in lo..hi {
                for k in lo..hi {
                    let x = grid.position(i, j, k);
                    let rc = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                    let frac = if rc + half_diag <= radius {
                        1.0
                    } else if rc - half_diag > radius {
                        0.0
                    } else {
                        let mut inside = 0usize;
                        for a in 0..n_sub {
                            let xa = x[0] + ((a as f64 + 0.5) / n_sub as f64 - 0.5) * dx;
                            for b in 0..n_sub {
                                let yb = x[1] + ((b as f64 + 0.5) / n_sub as f64 - 0.5) * dx;
                                for c in 0..n_sub {
                                    let zc = x[2] + ((c as f64 + 0.5) / n_sub as f64 - 0.5) * dx;
                                    if xa * xa + yb * yb + zc * zc <= radius * radius {
                                        inside += 1;
                                    }
                                }
                            }
                        }
                        inside as f64 / (n_sub * n_sub * n_sub) as f64
                    };
                    if frac > 0.0 {
                        cells.push(grid.index(i, j, k));
                        weights.push(frac * dx * dx * dx);
                    }
                }
            }
        }
        Self { radius, cells, weights }
    }
}

/// A sample of the outgoing cone `S_tau`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeSample {
    pub shell: usize,
    pub node: usize,
    pub t: f64,
    pub v: f64,
    pub r: f64,
    pub x: [f64; 3],
    pub omega: [f64; 3],
    /// `r^2 w_k dv`.
    pub weight: f64,
}

/// The leaf `Sigma_tau`: the disc `{t = tau, r <= R}` and the cone
/// `{u = (tau - R)/2, v >= (tau + R)/2}` truncated at `v_max`.
#[derive(Clone, Debug)]
pub struct FoliationLeaf {
    pub tau: f64,
    pub radius: f64,
    /// `u_tau = (tau - R)/2`.
    pub u: f64,
    /// `v_tau = (tau + R)/2`, where the cone meets the disc.
    pub v_start: f64,
    pub dv: f64,
    pub n_shells: usize,
    pub disc: Arc<DiscNodes>,
    pub quad: Arc<SphereQuadrature>,
}

impl FoliationLeaf {
    pub fn v_max(&self) -> f64 {
        self.v_start + self.n_shells as f64 * self.dv
    }

    /// Midpoint of shell `j`.
    pub fn shell_v(&self, j: usize) -> f64 {
        self.v_start + (j as f64 + 0.5) * self.dv
    }

    pub fn shell_r(&self, j: usize) -> f64 {
        self.shell_v(j) - self.u
    }

    pub fn shell_t(&self, j: usize) -> f64 {
        self.shell_v(j) + self.u
    }

    pub fn sample(&self, j: usize, k: usize) -> ConeSample {
        let v = self.shell_v(j);
        let r = v - self.u;
        let w = self.quad.nodes[k];
        ConeSample {
            shell: j,
            node: k,
            t: v + self.u,
            v,
            r,
            x: [r * w[0], r * w[1], r * w[2]],
            omega: w,
            weight: r * r * self.quad.weights[k] * self.dv,
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = ConeSample> + '_ {
        (0..self.n_shells).flat_map(move |j| (0..self.quad.len()).map(move |k| self.sample(j, k)))
    }
}

/// Builds the leaf at `tau`. Cone shells have width `dv`; the cone stops
/// where either the stored time range (`t_available`) or the usable grid
/// (three cells inside the edge, leaving room for the far incoming cone)
/// ends.
pub fn make_leaf(
    tau: f64,
    params: &DecayParams,
    grid: &GridSpec,
    disc: Arc<DiscNodes>,
    quad: Arc<SphereQuadrature>,
    dv: f64,
    t_available: f64,
) -> Result<FoliationLeaf> {
    let radius = params.radius;
    if tau < 0.0 {
        return Err(Error::InvalidArgument(format!("tau = {tau} < 0")));
    }
    if radius + 3.0 * grid.dx() >= grid.half_width {
        return Err(Error::GridTooSmall(format!(
            "disc radius {radius} does not fit in half_width {}",
            grid.half_width
        )));
    }
    let u = 0.5 * (tau - radius);
    let v_start = 0.5 * (tau + radius);
    let v_lim = v_max_limit(tau, radius, grid, t_available);
    let n_shells = if v_lim > v_start { ((v_lim - v_start) / dv + 1e-9).floor() as usize } else { 0 };
    Ok(FoliationLeaf { tau, radius, u, v_start, dv, n_shells, disc, quad })
}

/// Largest admissible `v` on the cone of the leaf at `tau`.
pub fn v_max_limit(tau: f64, radius: f64, grid: &GridSpec, t_available: f64) -> f64 {
    let r_lim = grid.half_width - 3.0 * grid.dx();
    let u = 0.5 * (tau - radius);
    (t_available - u).min(r_lim - 0.5 * radius)
}

/// `sum f * r^2 w_k dv` over the cone samples.
pub fn cone_integral<F: Fn(&ConeSample) -> f64>(leaf: &FoliationLeaf, f: F) -> f64 {
    let mut total = 0.0;
    for j in 0..leaf.n_shells {
        let mut shell = 0.0;
        for k in 0..leaf.quad.len() {
            let s = leaf.sample(j, k);
            shell += f(&s) * s.weight;
        }
        total += shell;
    }
    total
}

/// Weighted sum over the disc cells; `f` receives the flat cell index.
pub fn disc_integral<F: Fn(usize) -> f64>(leaf: &FoliationLeaf, f: F) -> f64 {
    leaf.disc.cells.iter().zip(&leaf.disc.weights).map(|(&c, &w)| w * f(c)).sum()
}

/// CSV dump of the cone sampling plan: `v, omega, r, t, weight`.
pub fn leaf_plan_csv(leaf: &FoliationLeaf) -> String {
    let mut out = String::from("v,omega_x,omega_y,omega_z,r,t,weight\n");
    for s in leaf.samples() {
        let _ = writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            s.v, s.omega[0], s.omega[1], s.omega[2], s.r, s.t, s.weight
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf_for(tau: f64, grid: &GridSpec, dv: f64, t_avail: f64) -> FoliationLeaf {
        let p = DecayParams::default();
        let disc = Arc::new(DiscNodes::new(grid, p.radius));
        make_leaf(tau, &p, grid, disc, Arc::new(SphereQuadrature::default()), dv, t_avail).unwrap()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m10: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((m10 - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_weights_sum_to_area() {
        let q = SphereQuadrature::new(11);
        assert_eq!(q.len(), 72);
        let s: f64 = q.weights.iter().sum();
        assert!((s - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        // Degree-10 monomial z^10 integrates to 4 pi / 11.
        let v = q.integrate(|w| w[2].powi(10));
        assert!((v - 4.0 * std::f64::consts::PI / 11.0).abs() < 1e-12);
        let v = q.integrate(|w| w[0].powi(4) * w[1].powi(2) * w[2].powi(4));
        // int x^4 y^2 z^4 = 4 pi * 3 * 1 * 3 / (3*5*7*9*11) ... via the beta-function formula.
        let exact = 2.0 * std::f64::consts::PI * 3.0 * 1.0 * 3.0 / (11.0 * 9.0 * 7.0 * 5.0 * 3.0) * 2.0;
        assert!((v - exact).abs() < 1e-12, "{v} {exact}");
    }

    #[test]
    fn leaf_coordinates() {
        let grid = GridSpec::new(32.0, 128).unwrap();
        let leaf = leaf_for(0.0, &grid, 0.5, 20.0);
        assert_eq!(leaf.u, -5.0);
        assert_eq!(leaf.v_start, 5.0);
        // The cone begins at r = R, t = 0.
        assert_eq!(leaf.v_start - leaf.u, 10.0);
        assert_eq!(leaf.v_start + leaf.u, 0.0);
        let leaf = leaf_for(20.0, &grid, 0.5, 40.0);
        assert_eq!(leaf.u, 5.0);
        assert_eq!(20.0 - leaf.u, 15.0);
        assert_eq!(20.0 + leaf.u, 25.0);
        for s in leaf.samples() {
            assert!(((s.t - s.r) - (20.0 - 10.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_too_small() {
        let grid = GridSpec::new(8.0, 32).unwrap();
        let p = DecayParams::default();
        let disc = Arc::new(DiscNodes::new(&grid, 5.0));
        let r = make_leaf(0.0, &p, &grid, disc, Arc::new(SphereQuadrature::default()), 0.5, 10.0);
        assert!(matches!(r, Err(Error::GridTooSmall(_))));
    }

    #[test]
    fn cone_integrals_match_closed_forms() {
        let grid = GridSpec::new(40.0, 160).unwrap();
        let leaf = leaf_for(0.0, &grid, 0.25, 100.0);
        let r0: f64 = 10.0;
        let r1 = leaf.v_max() - leaf.u;
        let pi4 = 4.0 * std::f64::consts::PI;
        let vol = cone_integral(&leaf, |_| 1.0);
        let exact = pi4 * (r1.powi(3) - r0.powi(3)) / 3.0;
        assert!((vol - exact).abs() < 1e-4 * exact);
        assert_eq!(cone_integral(&leaf, |_| 0.0), 0.0);
        let lin = cone_integral(&leaf, |s| 1.0 / (s.r * s.r));
        assert!((lin - pi4 * (r1 - r0)).abs() < 1e-10 * lin);
    }

    #[test]
    fn disc_volumes() {
        let grid = GridSpec::new(16.0, 128).unwrap();
        let leaf = leaf_for(0.0, &grid, 0.25, 1.0);
        let pi = std::f64::consts::PI;
        let ball = disc_integral(&leaf, |_| 1.0);
        assert!((ball - 4.0 * pi * 1000.0 / 3.0).abs() < 0.01 * ball);
        let inner = disc_integral(&leaf, |c| {
            let (i, j, k) = grid.unravel(c);
            let x = grid.position(i, j, k);
            if x[0] * x[0] + x[1] * x[1] + x[2] * x[2] <= 25.0 {
                1.0
            } else {
                0.0
            }
        });
        assert!((inner / ball - 0.125).abs() < 0.02 * 0.125);
        assert_eq!(disc_integral(&leaf, |_| 0.0), 0.0);
    }

    fn fill<F: Fn(&[f64; 3]) -> f64>(grid: &GridSpec, f: F) -> Vec<f64> {
        let n = grid.n();
        let mut out = vec![0.0; grid.len()];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out[grid.index(i, j, k)] = f(&grid.position(i, j, k));
                }
            }
        }
        out
    }

    #[test]
    fn interpolation_reproduces_constants_and_linears() {
        let grid = GridSpec::new(4.0, 32).unwrap();
        let c = fill(&grid, |_| 2.5);
        let lin = fill(&grid, |x| x[0]);
        let zero = vec![0.0; grid.len()];
        let pt = [0.37, -1.21, 0.9];
        let (v, g) = interp(&grid, &[FieldSlice { t: 0.0, phi: &c, pi: &zero }], 0.0, &pt).unwrap();
        assert!((v - 2.5).abs() < 1e-14);
        assert!(g.iter().all(|d| d.abs() < 1e-13));
        let (v, g) = interp(&grid, &[FieldSlice { t: 0.0, phi: &lin, pi: &zero }], 0.0, &pt).unwrap();
        assert!((v - 0.37).abs() < 1e-14);
        assert!((g[1] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn interpolated_derivative_of_sine() {
        let grid = GridSpec::new(4.0, 32).unwrap();
        assert_eq!(grid.dx(), 0.25);
        let s = fill(&grid, |x| x[0].sin());
        let zero = vec![0.0; grid.len()];
        let mut worst = 0.0_f64;
        for m in 0..50 {
            let x0 = -2.0 + 0.0813 * m as f64;
            let (_, g) = interp(&grid, &[FieldSlice { t: 0.0, phi: &s, pi: &zero }], 0.0, &[x0, 0.1, 0.2]).unwrap();
            worst = worst.max((g[1] - x0.cos()).abs());
        }
        assert!(worst <= 1e-3, "{worst}");
    }

    #[test]
    fn interpolation_outside_grid_fails() {
        let grid = GridSpec::new(4.0, 32).unwrap();
        let z = vec![0.0; grid.len()];
        let r = interp(&grid, &[FieldSlice { t: 0.0, phi: &z, pi: &z }], 0.0, &[3.95, 0.0, 0.0]);
        assert!(matches!(r, Err(Error::OutOfDomain { .. })));
        let r = interp(&grid, &[FieldSlice { t: 0.0, phi: &z, pi: &z }], 1.0, &[0.0, 0.0, 0.0]);
        assert!(matches!(r, Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn hessian_of_quadratic_is_exact() {
        let grid = GridSpec::new(4.0, 32).unwrap();
        let q = fill(&grid, |x| x[0] * x[1] + 0.5 * x[2] * x[2]);
        let tri = Tricubic::at(&grid, &[0.3, 0.2, -0.4], 2).unwrap();
        let st = Stencil::new(4, grid.dx()).unwrap();
        let j = tri.jet(&q, grid.n(), [0; 3], &st, true);
        assert!((j.hess[0][1] - 1.0).abs() < 1e-12);
        assert!((j.hess[2][2] - 1.0).abs() < 1e-12);
        assert!(j.hess[0][0].abs() < 1e-12);
    }
}
