//! Metric backgrounds, null frames, frame components, the null-condition
//! check and validation of parameter and metric decay assumptions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{self, Mat4, Vec4, MINKOWSKI, ZERO4};

/// Frames are not constructed closer than this to the origin.
pub const R_FLOOR: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecayParams {
    pub delta0: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Radius of the spacelike disc of every leaf.
    #[serde(alias = "R")]
    pub radius: f64,
}

impl Default for DecayParams {
    fn default() -> Self {
        Self {
            delta0: 0.01,
            alpha: 0.1,
            epsilon: 0.002,
            alpha1: 0.107,
            alpha2: 0.12,
            radius: 10.0,
        }
    }
}

/// Checks the ordering chain on the small exponents. Returns the name of
/// every violated inequality; an empty list means the parameters are valid.
///
/// The upper bound on `alpha` admits the endpoint 1/10 so that the reference
/// parameter set (`alpha = 0.1`) validates.
pub fn validate_params(p: &DecayParams) -> Vec<String> {
    let mut bad = Vec::new();
    let fields = [p.delta0, p.alpha, p.epsilon, p.alpha1, p.alpha2, p.radius];
    if fields.iter().any(|v| !v.is_finite()) {
        bad.push("all fields finite".to_string());
        return bad;
    }
    let a = p.alpha;
    let e = p.epsilon;
    let lower1 = (2.0 * a + a * e) / (2.0 - a);
    let upper2 = 7.0 / 3.0 * a - p.alpha1 - e;
    let checks: [(bool, &str); 10] = [
        (p.delta0 >= 0.0, "delta0 >= 0"),
        (a > 0.0, "alpha > 0"),
        (a <= 0.1, "alpha < 1/10"),
        (p.radius > 4.0, "R > 4"),
        (e > 0.0, "epsilon > 0"),
        (e < a * a / 4.0, "epsilon < alpha²/4"),
        (a * a / 4.0 < a, "alpha²/4 < alpha"),
        (a < lower1, "alpha < (2·alpha + alpha·epsilon)/(2 − alpha)"),
        (lower1 <= p.alpha1, "(2·alpha + alpha·epsilon)/(2 − alpha) <= alpha1"),
        (p.alpha1 < p.alpha2, "alpha1 < alpha2"),
    ];
    for (ok, name) in checks {
        if !ok {
            bad.push(name.to_string());
        }
    }
    if p.alpha2 > upper2 {
        bad.push("alpha2 <= (7/3)·alpha − alpha1 − epsilon".to_string());
    }
    bad
}

// ---------------------------------------------------------------------------
// Points and frames
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacetimePoint {
    pub t: f64,
    pub x: [f64; 3],
}

impl SpacetimePoint {
    pub fn new(t: f64, x: [f64; 3]) -> Self {
        Self { t, x }
    }

    pub fn r(&self) -> f64 {
        tensor::norm3(&self.x)
    }

    pub fn u(&self) -> f64 {
        0.5 * (self.t - self.r())
    }

    pub fn v(&self) -> f64 {
        0.5 * (self.t + self.r())
    }

    /// Foliation parameter `t - max(r - R, 0)`.
    pub fn tau(&self, radius: f64) -> f64 {
        self.t - (self.r() - radius).max(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NullFrame {
    /// Outgoing null vector (1, x/r).
    pub l: Vec4,
    /// Incoming null vector (1, -x/r).
    pub lbar: Vec4,
    pub s1: Vec4,
    pub s2: Vec4,
    pub radial: [f64; 3],
}

/// Labels of frame legs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Leg {
    L,
    Lbar,
    S1,
    S2,
}

impl NullFrame {
    /// Covector used when contracting an upper-index tensor against `leg`.
    ///
    /// The null legs carry a factor one half, so that `k^{Lbar Lbar}` is one
    /// quarter of `k^{mu nu} Lbar_mu Lbar_nu` with `Lbar_mu = (1, -x/r)`.
    pub fn covector(&self, leg: Leg) -> Vec4 {
        let w = self.radial;
        match leg {
            Leg::L => [0.5, 0.5 * w[0], 0.5 * w[1], 0.5 * w[2]],
            Leg::Lbar => [0.5, -0.5 * w[0], -0.5 * w[1], -0.5 * w[2]],
            Leg::S1 => self.s1,
            Leg::S2 => self.s2,
        }
    }

    pub fn vector(&self, leg: Leg) -> Vec4 {
        match leg {
            Leg::L => self.l,
            Leg::Lbar => self.lbar,
            Leg::S1 => self.s1,
            Leg::S2 => self.s2,
        }
    }

    /// Same frame with the tangent pair rotated by `angle` in its plane.
    pub fn rotate_tangents(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let mut out = *self;
        for mu in 0..4 {
            out.s1[mu] = c * self.s1[mu] + s * self.s2[mu];
            out.s2[mu] = -s * self.s1[mu] + c * self.s2[mu];
        }
        out
    }
}

pub fn null_frame_at(pt: &SpacetimePoint) -> Result<NullFrame> {
    null_frame_with_floor(pt, R_FLOOR)
}

pub fn null_frame_with_floor(pt: &SpacetimePoint, floor: f64) -> Result<NullFrame> {
    let r = pt.r();
    if !(r >= floor) {
        return Err(Error::DegeneratePoint { r, floor });
    }
    let w = [pt.x[0] / r, pt.x[1] / r, pt.x[2] / r];
    // Project the two coordinate axes least aligned with the radial
    // direction, then orthonormalize.
    let mut axes = [0usize, 1, 2];
    axes.sort_by(|&a, &b| w[a].abs().partial_cmp(&w[b].abs()).unwrap().then(a.cmp(&b)));
    let project = |axis: usize| {
        let mut e = [0.0; 3];
        e[axis] = 1.0;
        let d = w[axis];
        [e[0] - d * w[0], e[1] - d * w[1], e[2] - d * w[2]]
    };
    let a = project(axes[0]);
    let na = tensor::norm3(&a);
    let a = [a[0] / na, a[1] / na, a[2] / na];
    let b = project(axes[1]);
    let ab = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let b = [b[0] - ab * a[0], b[1] - ab * a[1], b[2] - ab * a[2]];
    let nb = tensor::norm3(&b);
    let b = [b[0] / nb, b[1] / nb, b[2] / nb];
    Ok(NullFrame {
        l: [1.0, w[0], w[1], w[2]],
        lbar: [1.0, -w[0], -w[1], -w[2]],
        s1: [0.0, a[0], a[1], a[2]],
        s2: [0.0, b[0], b[1], b[2]],
        radial: w,
    })
}

/// Frame component `k^{AB}` of an upper-index symmetric tensor.
pub fn frame_component(k: &Mat4, fr: &NullFrame, a: Leg, b: Leg) -> f64 {
    tensor::contract(k, &fr.covector(a), &fr.covector(b))
}

/// Lower-index metric contraction `m0(X, Y)` of two vectors.
pub fn minkowski_pairing(x: &Vec4, y: &Vec4) -> f64 {
    -x[0] * y[0] + x[1] * y[1] + x[2] * y[2] + x[3] * y[3]
}

// ---------------------------------------------------------------------------
// Null forms
// ---------------------------------------------------------------------------

/// Constant coefficients of the quadratic nonlinearities: the quasilinear
/// `gcube[mu][nu][gamma]` (symmetric in the first pair) and the semilinear
/// `aquad[mu][nu]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullFormTensor {
    pub gcube: [[[f64; 4]; 4]; 4],
    pub aquad: Mat4,
}

impl Default for NullFormTensor {
    fn default() -> Self {
        Self::zero()
    }
}

impl NullFormTensor {
    pub fn zero() -> Self {
        Self { gcube: [[[0.0; 4]; 4]; 4], aquad: ZERO4 }
    }

    /// `d_t phi * (d_tt phi - Laplacian phi)`.
    pub fn dt_box() -> Self {
        let mut nf = Self::zero();
        nf.gcube[0][0][0] = 1.0;
        for i in 1..4 {
            nf.gcube[i][i][0] = -1.0;
        }
        nf
    }

    /// Semilinear `m0(d phi, d phi)`.
    pub fn minkowski_quadratic() -> Self {
        let mut nf = Self::zero();
        nf.aquad = MINKOWSKI;
        nf
    }

    /// `gcube^{ttt} = 1` only; violates the null condition.
    pub fn cubic_tt_only() -> Self {
        let mut nf = Self::zero();
        nf.gcube[0][0][0] = 1.0;
        nf
    }

    /// `m0(d phi, d d_t phi)`, i.e. `gcube^{mu nu gamma} = (m0^{mu gamma} delta^nu_t + m0^{nu gamma} delta^mu_t) / 2`.
    pub fn q0_dt() -> Self {
        let mut nf = Self::zero();
        for mu in 0..4 {
            for nu in 0..4 {
                for ga in 0..4 {
                    let a = if nu == 0 { MINKOWSKI[mu][ga] } else { 0.0 };
                    let b = if mu == 0 { MINKOWSKI[nu][ga] } else { 0.0 };
                    nf.gcube[mu][nu][ga] = 0.5 * (a + b);
                }
            }
        }
        nf
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "none" => Some(Self::zero()),
            "dt-box" => Some(Self::dt_box()),
            "q0-dt" => Some(Self::q0_dt()),
            "minkowski-quadratic" => Some(Self::minkowski_quadratic()),
            "ttt-only" => Some(Self::cubic_tt_only()),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.gcube.iter().flatten().flatten().all(|&c| c == 0.0)
            && self.aquad.iter().flatten().all(|&c| c == 0.0)
    }

    pub fn has_quasilinear(&self) -> bool {
        self.gcube.iter().flatten().flatten().any(|&c| c != 0.0)
    }

    pub fn has_semilinear(&self) -> bool {
        self.aquad.iter().flatten().any(|&c| c != 0.0)
    }

    pub fn max_coefficient(&self) -> f64 {
        self.gcube
            .iter()
            .flatten()
            .flatten()
            .chain(self.aquad.iter().flatten())
            .fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.gcube.iter_mut().flatten().flatten().for_each(|c| *c *= s);
        out.aquad.iter_mut().flatten().for_each(|c| *c *= s);
        out
    }

    /// `gcube^{mu nu gamma} d_gamma phi`, the quasilinear shift of the
    /// principal part.
    pub fn principal_shift(&self, dphi: &Vec4) -> Mat4 {
        let mut out = ZERO4;
        for mu in 0..4 {
            for nu in 0..4 {
                let c = &self.gcube[mu][nu];
                out[mu][nu] = c[0] * dphi[0] + c[1] * dphi[1] + c[2] * dphi[2] + c[3] * dphi[3];
            }
        }
        out
    }

    pub fn cubic_symbol(&self, xi: &Vec4) -> f64 {
        let mut s = 0.0;
        for mu in 0..4 {
            for nu in 0..4 {
                for ga in 0..4 {
                    s += self.gcube[mu][nu][ga] * xi[mu] * xi[nu] * xi[ga];
                }
            }
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullConditionReport {
    pub pass: bool,
    pub worst_residual: f64,
    pub worst_covector: Vec4,
    pub tolerance: f64,
    pub samples: usize,
}

/// Unit directions on the sphere from a Fibonacci lattice, followed by the
/// six coordinate directions.
pub fn sphere_directions(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut out = Vec::with_capacity(n + 6);
    for k in 0..n {
        let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
        let rho = (1.0 - z * z).max(0.0).sqrt();
        let th = golden * k as f64;
        out.push([rho * th.cos(), rho * th.sin(), z]);
    }
    for axis in 0..3 {
        for s in [1.0, -1.0] {
            let mut e = [0.0; 3];
            e[axis] = s;
            out.push(e);
        }
    }
    out
}

pub fn check_null_condition(nf: &NullFormTensor, n_samples: usize, tol: f64) -> NullConditionReport {
    let n = n_samples.max(1);
    let mut worst = 0.0_f64;
    let mut worst_xi = [1.0, 1.0, 0.0, 0.0];
    for w in sphere_directions(n) {
        let xi = [1.0, w[0], w[1], w[2]];
        let res = nf.cubic_symbol(&xi).abs().max(tensor::contract(&nf.aquad, &xi, &xi).abs());
        if res > worst {
            worst = res;
            worst_xi = xi;
        }
    }
    let bound = tol * (1.0 + nf.max_coefficient());
    NullConditionReport {
        pass: worst <= bound,
        worst_residual: worst,
        worst_covector: worst_xi,
        tolerance: bound,
        samples: n + 6,
    }
}

// ---------------------------------------------------------------------------
// Metric backgrounds
// ---------------------------------------------------------------------------

/// Inverse-metric perturbation `h^{mu nu}` and its coordinate gradient
/// `dh[gamma][mu][nu] = d_gamma h^{mu nu}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricSample {
    pub h: Mat4,
    pub dh: [Mat4; 4],
}

impl MetricSample {
    pub const ZERO: Self = Self { h: ZERO4, dh: [ZERO4; 4] };

    pub fn inverse_metric(&self) -> Mat4 {
        tensor::add(&MINKOWSKI, &self.h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum MetricSpec {
    Flat,
    /// `delta0 sin(t) w(r) e^{mu nu}` with `w` vanishing for `r >= radius - 1`.
    InteriorOscillator { delta0: f64, alpha: f64, radius: f64 },
    /// Static, spherically symmetric and compactly supported in `r <= radius - 1`.
    StaticBump { delta0: f64, alpha: f64, radius: f64, c_time: f64, c_space: f64 },
    /// Static `h^{tt} = -0.4 delta0 (1+r)^{-1-2 alpha}` with no compact support.
    StaticTail { delta0: f64, alpha: f64 },
    /// `h^{tt}` equal to a constant everywhere.
    ConstantTime { value: f64 },
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self::Flat
    }
}

/// Fixed symmetric polarization of the oscillating family; its largest entry is 1.
const POLARIZATION: Mat4 = [
    [1.0, 0.5, 0.0, 0.0],
    [0.5, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.5, 0.0],
    [0.0, 0.0, 0.0, -0.5],
];

/// Smooth transition `S(x)`, 0 for `x <= 0` and 1 for `x >= 1`, and `S'(x)`.
fn smooth_step(x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0);
    }
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    let da = a / (x * x);
    let db = -b / ((1.0 - x) * (1.0 - x));
    let s = a / (a + b);
    let ds = (da * (a + b) - a * (da + db)) / ((a + b) * (a + b));
    (s, ds)
}

/// Cutoff equal to 1 for `r <= radius - 3` and 0 for `r >= radius - 1`.
pub fn interior_cutoff(r: f64, radius: f64) -> f64 {
    smooth_step((radius - 1.0 - r) / 2.0).0
}

/// Radial profile `0.25 (1+r)^{-1-2 alpha} b(r)` with `b = 1` for
/// `r <= radius - 3` and `b = 0` for `r >= radius - 1`. Returns value and
/// `d/dr`.
fn interior_profile(r: f64, alpha: f64, radius: f64) -> (f64, f64) {
    let (b, db) = smooth_step((radius - 1.0 - r) / 2.0);
    if b == 0.0 {
        return (0.0, 0.0);
    }
    let p = 1.0 + 2.0 * alpha;
    let decay = 0.25 * (1.0 + r).powf(-p);
    let ddecay = -p * decay / (1.0 + r);
    (decay * b, ddecay * b - 0.5 * decay * db)
}

impl MetricSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Flat => "flat",
            Self::InteriorOscillator { .. } => "interior-oscillator",
            Self::StaticBump { .. } => "static-bump",
            Self::StaticTail { .. } => "static-tail",
            Self::ConstantTime { .. } => "constant-time",
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, Self::Flat)
    }

    pub fn is_time_independent(&self) -> bool {
        !matches!(self, Self::InteriorOscillator { .. })
    }

    pub fn is_spherically_symmetric(&self) -> bool {
        !matches!(self, Self::InteriorOscillator { .. })
    }

    /// Radius beyond which `h` vanishes identically, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Self::Flat => Some(0.0),
            Self::InteriorOscillator { radius, .. } | Self::StaticBump { radius, .. } => Some(radius - 1.0),
            Self::StaticTail { .. } | Self::ConstantTime { .. } => None,
        }
    }

    /// Exact `h` and first derivatives at a point.
    pub fn eval(&self, t: f64, x: &[f64; 3]) -> MetricSample {
        let r = tensor::norm3(x);
        // Radial derivative to Cartesian: d_i w(r) = w'(r) x_i / r; at r = 0
        // every profile here has w'(0) x_i / r -> finite, and the products
        // below vanish with x_i.
        let unit = |i: usize| if r > 0.0 { x[i] / r } else { 0.0 };
        match *self {
            Self::Flat => MetricSample::ZERO,
            Self::InteriorOscillator { delta0, alpha, radius } => {
                let (w, dw) = interior_profile(r, alpha, radius);
                if w == 0.0 && dw == 0.0 {
                    return MetricSample::ZERO;
                }
                let (s, c) = t.sin_cos();
                let mut out = MetricSample::ZERO;
                for mu in 0..4 {
                    for nu in 0..4 {
                        let e = delta0 * POLARIZATION[mu][nu];
                        out.h[mu][nu] = e * s * w;
                        out.dh[0][mu][nu] = e * c * w;
                        for i in 0..3 {
                            out.dh[i + 1][mu][nu] = e * s * dw * unit(i);
                        }
                    }
                }
                out
            }
            Self::StaticBump { delta0, alpha, radius, c_time, c_space } => {
                let (w, dw) = interior_profile(r, alpha, radius);
                let mut out = MetricSample::ZERO;
                if w == 0.0 && dw == 0.0 {
                    return out;
                }
                let coeff = [delta0 * c_time, delta0 * c_space, delta0 * c_space, delta0 * c_space];
                for mu in 0..4 {
                    out.h[mu][mu] = coeff[mu] * w;
                    for i in 0..3 {
                        out.dh[i + 1][mu][mu] = coeff[mu] * dw * unit(i);
                    }
                }
                out
            }
            Self::StaticTail { delta0, alpha } => {
                let p = 1.0 + 2.0 * alpha;
                let w = -0.4 * delta0 * (1.0 + r).powf(-p);
                let dw = -p * w / (1.0 + r);
                let mut out = MetricSample::ZERO;
                out.h[0][0] = w;
                for i in 0..3 {
                    out.dh[i + 1][0][0] = dw * unit(i);
                }
                out
            }
            Self::ConstantTime { value } => {
                let mut out = MetricSample::ZERO;
                out.h[0][0] = value;
                out
            }
        }
    }

    /// `max_{mu nu} |h^{mu nu}|` anywhere, used to bound characteristic speeds.
    pub fn sup_bound(&self) -> f64 {
        match *self {
            Self::Flat => 0.0,
            Self::InteriorOscillator { delta0, .. } => 0.25 * delta0.abs(),
            Self::StaticBump { delta0, c_time, c_space, .. } => {
                0.25 * delta0.abs() * c_time.abs().max(c_space.abs())
            }
            Self::StaticTail { delta0, .. } => 0.4 * delta0.abs(),
            Self::ConstantTime { value } => value.abs(),
        }
    }
}

// ---------------------------------------------------------------------------
// Z-derivatives of a scalar function of spacetime
// ---------------------------------------------------------------------------

/// Generators of the commuting family: the three rotations and `d_t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Generator {
    Omega12,
    Omega13,
    Omega23,
    Dt,
}

impl Generator {
    pub const ALL: [Generator; 4] = [Self::Omega12, Self::Omega13, Self::Omega23, Self::Dt];

    /// Vector field components at `(t, x)`; `Omega_ij = x_i d_j - x_j d_i`.
    pub fn vector(&self, x: &[f64; 3]) -> Vec4 {
        match self {
            Self::Omega12 => [0.0, -x[1], x[0], 0.0],
            Self::Omega13 => [0.0, -x[2], 0.0, x[0]],
            Self::Omega23 => [0.0, 0.0, -x[2], x[1]],
            Self::Dt => [1.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Omega12 => "O12",
            Self::Omega13 => "O13",
            Self::Omega23 => "O23",
            Self::Dt => "T",
        }
    }
}

/// All words of length exactly `k` over the generators.
pub fn words_of_length(k: usize) -> Vec<Vec<Generator>> {
    let mut out: Vec<Vec<Generator>> = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::with_capacity(out.len() * 4);
        for w in &out {
            for g in Generator::ALL {
                let mut w2 = w.clone();
                w2.push(g);
                next.push(w2);
            }
        }
        out = next;
    }
    out
}

pub fn word_label(word: &[Generator]) -> String {
    if word.is_empty() {
        return "id".to_string();
    }
    word.iter().map(|g| g.label()).collect::<Vec<_>>().join(".")
}

/// Applies `Z_1 ... Z_k` (rightmost first) to a scalar function. The
/// innermost generator uses the supplied exact gradient; outer ones use
/// centered differences along the generator with step `1e-5 (1 + r)`.
pub fn apply_word<F>(word: &[Generator], t: f64, x: &[f64; 3], f: &F) -> f64
where
    F: Fn(f64, &[f64; 3]) -> (f64, Vec4),
{
    match word.split_first() {
        None => f(t, x).0,
        Some((g, rest)) if rest.is_empty() => {
            let (_, grad) = f(t, x);
            tensor::dot4(&g.vector(x), &grad)
        }
        Some((g, rest)) => {
            let v = g.vector(x);
            let step = 1e-5 * (1.0 + tensor::norm3(x));
            let shifted = |s: f64| {
                let xs = [x[0] + s * v[1], x[1] + s * v[2], x[2] + s * v[3]];
                apply_word(rest, t + s * v[0], &xs, f)
            };
            (shifted(step) - shifted(-step)) / (2.0 * step)
        }
    }
}

// ---------------------------------------------------------------------------
// Envelopes
// ---------------------------------------------------------------------------

/// Decay envelopes `H(tau, r)` and `Hbar(r)` of the bootstrap argument.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeH {
    pub delta0: f64,
    pub alpha: f64,
}

impl EnvelopeH {
    pub fn new(delta0: f64, alpha: f64) -> Self {
        Self { delta0, alpha }
    }

    /// `delta0 (1+r)^{-1-2 alpha}`.
    pub fn h_bar(&self, r: f64) -> f64 {
        self.delta0 * (1.0 + r).powf(-1.0 - 2.0 * self.alpha)
    }

    /// The slowly decaying product `delta0 (1+r)^{-1/2-2 alpha} (1+tau)^{-1/2-alpha/2}`.
    pub fn h_core(&self, tau: f64, r: f64) -> f64 {
        self.delta0
            * (1.0 + r).powf(-0.5 - 2.0 * self.alpha)
            * (1.0 + tau.max(0.0)).powf(-0.5 - 0.5 * self.alpha)
    }

    /// `H = Hbar + h_core`, the form used by the bootstrap assumptions.
    pub fn h(&self, tau: f64, r: f64) -> f64 {
        self.h_bar(r) + self.h_core(tau, r)
    }

    /// Right side of the improved angular bound on `h^{Lbar Lbar}`.
    pub fn angular_improved(&self, tau: f64, r: f64) -> f64 {
        self.delta0
            * ((1.0 + r).powf(-1.5 - 2.0 * self.alpha)
                + (1.0 + r).powf(-1.0 - self.alpha) * (1.0 + tau.max(0.0)).powf(-0.5 - 0.5 * self.alpha))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityResult {
    pub name: String,
    pub max_ratio: f64,
    pub argmax_point: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub pass: bool,
    pub k_max: usize,
    pub inequalities: Vec<InequalityResult>,
}

/// Where the metric bounds are sampled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSamplePlan {
    /// Times at which the disc `r <= R` is sampled.
    pub disc_times: Vec<f64>,
    /// Radii (all `<= R`) for the disc samples.
    pub disc_radii: Vec<f64>,
    /// Leaf parameters of the cone band.
    pub leaf_taus: Vec<f64>,
    /// Radii (all `>= R`) sampled on each cone.
    pub cone_radii: Vec<f64>,
    /// Sphere directions per radius.
    pub directions: usize,
    /// Highest Z-derivative order checked.
    pub k_max: usize,
}

impl EnvelopeSamplePlan {
    pub fn standard(radius: f64, tau_max: f64) -> Self {
        let disc_radii: Vec<f64> = (0..=20).map(|i| radius * i as f64 / 20.0).collect();
        let cone_radii: Vec<f64> = (0..=24).map(|i| radius * (1.0 + 0.25 * i as f64)).collect();
        let n_t = 12;
        Self {
            disc_times: (0..=n_t).map(|i| tau_max * i as f64 / n_t as f64).collect(),
            disc_radii,
            leaf_taus: (0..=n_t).map(|i| tau_max * i as f64 / n_t as f64).collect(),
            cone_radii,
            directions: 26,
            k_max: 2,
        }
    }
}

struct Tracker {
    name: &'static str,
    max: f64,
    arg: [f64; 4],
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Self { name, max: 0.0, arg: [0.0; 4] }
    }

    fn offer(&mut self, lhs: f64, env: f64, t: f64, x: &[f64; 3]) {
        let ratio = if env > 0.0 { lhs / env } else if lhs == 0.0 { 0.0 } else { f64::INFINITY };
        if ratio > self.max || ratio.is_nan() {
            self.max = ratio;
            self.arg = [t, x[0], x[1], x[2]];
        }
    }

    fn finish(self) -> InequalityResult {
        InequalityResult { name: self.name.to_string(), max_ratio: self.max, argmax_point: self.arg }
    }
}

fn grad_norm(dh: &[Mat4; 4], mu: usize, nu: usize) -> f64 {
    (0..4).map(|g| dh[g][mu][nu].powi(2)).sum::<f64>().sqrt()
}

/// Checks the decay assumptions on the background at every point of the
/// plan and reports the worst ratio for each inequality.
pub fn validate_envelope(spec: &MetricSpec, p: &DecayParams, plan: &EnvelopeSamplePlan) -> EnvelopeReport {
    let env = EnvelopeH::new(p.delta0, p.alpha);
    let dirs = sphere_directions(plan.directions.max(1));
    let words: Vec<Vec<Generator>> = (1..=plan.k_max).flat_map(words_of_length).collect();

    let mut interior = Tracker::new("interior: |h| + |dh| <= Hbar");
    let mut cone = Tracker::new("cone: |h| + |dh| + |Z^k h| <= H");
    let mut good = Tracker::new("cone: |good-derivative h| + |d h^LbLb| + |Z^k h^LbLb| <= Hbar");
    let mut angular = Tracker::new("cone: |angular-derivative h^LbLb| <= improved envelope");

    for &t in &plan.disc_times {
        for &r in &plan.disc_radii {
            for w in &dirs {
                let x = [r * w[0], r * w[1], r * w[2]];
                let s = spec.eval(t, &x);
                let mut lhs = 0.0_f64;
                for mu in 0..4 {
                    for nu in 0..4 {
                        lhs = lhs.max(s.h[mu][nu].abs() + grad_norm(&s.dh, mu, nu));
                    }
                }
                interior.offer(lhs, env.h_bar(r), t, &x);
            }
        }
    }

    for &tau in &plan.leaf_taus {
        let u = 0.5 * (tau - p.radius);
        for &r in &plan.cone_radii {
            let t = u + (u + r);
            for w in &dirs {
                let x = [r * w[0], r * w[1], r * w[2]];
                let pt = SpacetimePoint::new(t, x);
                let Ok(fr) = null_frame_at(&pt) else { continue };
                let s = spec.eval(t, &x);

                let mut cone_lhs = 0.0_f64;
                let mut good_lhs = 0.0_f64;
                for mu in 0..4 {
                    for nu in 0..4 {
                        let comp = |tt: f64, xx: &[f64; 3]| {
                            let ss = spec.eval(tt, xx);
                            let g = [ss.dh[0][mu][nu], ss.dh[1][mu][nu], ss.dh[2][mu][nu], ss.dh[3][mu][nu]];
                            (ss.h[mu][nu], g)
                        };
                        let zmax = words
                            .iter()
                            .map(|wd| apply_word(wd, t, &x, &comp).abs())
                            .fold(0.0_f64, f64::max);
                        cone_lhs = cone_lhs.max(s.h[mu][nu].abs() + grad_norm(&s.dh, mu, nu) + zmax);

                        let g = [s.dh[0][mu][nu], s.dh[1][mu][nu], s.dh[2][mu][nu], s.dh[3][mu][nu]];
                        let lh = tensor::dot4(&fr.l, &g);
                        let ang = angular_gradient_sq(&g, &x, r);
                        good_lhs = good_lhs.max((lh * lh + ang).sqrt());
                    }
                }

                let lblb = |tt: f64, xx: &[f64; 3]| {
                    let ss = spec.eval(tt, xx);
                    let fr = null_frame_at(&SpacetimePoint::new(tt, *xx)).expect("r >= R > 0");
                    let val = frame_component(&ss.h, &fr, Leg::Lbar, Leg::Lbar);
                    // Gradient of the contracted component: the covector
                    // depends on x, so differentiate numerically.
                    let step = 1e-5 * (1.0 + tensor::norm3(xx));
                    let mut grad = [0.0; 4];
                    for gamma in 0..4 {
                        let mut tp = tt;
                        let mut tm = tt;
                        let mut xp = *xx;
                        let mut xm = *xx;
                        if gamma == 0 {
                            tp += step;
                            tm -= step;
                        } else {
                            xp[gamma - 1] += step;
                            xm[gamma - 1] -= step;
                        }
                        let fp = frame_component(
                            &spec.eval(tp, &xp).h,
                            &null_frame_at(&SpacetimePoint::new(tp, xp)).expect("r > 0"),
                            Leg::Lbar,
                            Leg::Lbar,
                        );
                        let fm = frame_component(
                            &spec.eval(tm, &xm).h,
                            &null_frame_at(&SpacetimePoint::new(tm, xm)).expect("r > 0"),
                            Leg::Lbar,
                            Leg::Lbar,
                        );
                        grad[gamma] = (fp - fm) / (2.0 * step);
                    }
                    (val, grad)
                };
                let (_, glb) = lblb(t, &x);
                let dlb = tensor::dot4(&glb, &glb).sqrt();
                let zlb = words.iter().map(|wd| apply_word(wd, t, &x, &lblb).abs()).fold(0.0_f64, f64::max);
                good_lhs += dlb + zlb;

                cone.offer(cone_lhs, env.h(tau, r), t, &x);
                good.offer(good_lhs, env.h_bar(r), t, &x);
                angular.offer(angular_gradient_sq(&glb, &x, r).sqrt(), env.angular_improved(tau, r), t, &x);
            }
        }
    }

    let inequalities: Vec<InequalityResult> =
        vec![interior.finish(), cone.finish(), good.finish(), angular.finish()];
    let pass = inequalities.iter().all(|q| q.max_ratio <= 1.0);
    EnvelopeReport { pass, k_max: plan.k_max, inequalities }
}

/// `|angular gradient|^2 = sum_{i<j} (Omega_ij f)^2 / r^2` from a Cartesian gradient.
pub fn angular_gradient_sq(grad: &Vec4, x: &[f64; 3], r: f64) -> f64 {
    let g = [grad[1], grad[2], grad[3]];
    let o12 = x[0] * g[1] - x[1] * g[0];
    let o13 = x[0] * g[2] - x[2] * g[0];
    let o23 = x[1] * g[2] - x[2] * g[1];
    (o12 * o12 + o13 * o13 + o23 * o23) / (r * r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_params_are_valid() {
        assert!(validate_params(&DecayParams::default()).is_empty());
    }

    #[test]
    fn large_alpha_is_rejected_by_name() {
        let p = DecayParams { alpha: 0.2, ..DecayParams::default() };
        assert!(validate_params(&p).iter().any(|v| v == "alpha < 1/10"));
    }

    #[test]
    fn large_epsilon_is_rejected_by_name() {
        let p = DecayParams { epsilon: 0.1 * 0.1 / 2.0, ..DecayParams::default() };
        assert!(validate_params(&p).iter().any(|v| v == "epsilon < alpha²/4"));
    }

    #[test]
    fn frame_on_axis() {
        let fr = null_frame_at(&SpacetimePoint::new(0.0, [1.0, 0.0, 0.0])).unwrap();
        assert_eq!(fr.l, [1.0, 1.0, 0.0, 0.0]);
        assert_eq!(fr.lbar, [1.0, -1.0, 0.0, 0.0]);
        let fr = null_frame_at(&SpacetimePoint::new(0.0, [0.0, 0.0, 2.0])).unwrap();
        assert_eq!(&fr.lbar[1..], &[0.0, 0.0, -1.0]);
        assert!(matches!(
            null_frame_at(&SpacetimePoint::new(0.0, [0.0; 3])),
            Err(Error::DegeneratePoint { .. })
        ));
    }

    #[test]
    fn frame_components_of_simple_tensors() {
        let fr = null_frame_at(&SpacetimePoint::new(0.0, [1.0, 0.0, 0.0])).unwrap();
        assert_eq!(frame_component(&MINKOWSKI, &fr, Leg::Lbar, Leg::Lbar), 0.0);
        let mut k = ZERO4;
        k[0][0] = 1.0;
        assert_eq!(frame_component(&k, &fr, Leg::Lbar, Leg::Lbar), 0.25);
        // 1/4 (-1 - |x|^2/r^2) by hand.
        let fr = null_frame_at(&SpacetimePoint::new(0.0, [0.3, -1.2, 0.7])).unwrap();
        assert!((frame_component(&MINKOWSKI, &fr, Leg::Lbar, Leg::L) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn null_form_examples() {
        let r = check_null_condition(&NullFormTensor::dt_box(), 1024, 1e-12);
        assert!(r.pass, "{r:?}");
        assert!(check_null_condition(&NullFormTensor::minkowski_quadratic(), 1024, 1e-12).pass);
        let bad = check_null_condition(&NullFormTensor::cubic_tt_only(), 1024, 1e-12);
        assert!(!bad.pass);
        // xi_0^3 = 1 on every sampled covector.
        assert!((bad.worst_residual - 1.0).abs() < 1e-12);
        assert!(check_null_condition(&NullFormTensor::q0_dt(), 1024, 1e-12).pass);
    }

    #[test]
    fn q0_dt_principal_shift() {
        // The shift is m0(d phi, .) placed in the t-row and t-column.
        let s = NullFormTensor::q0_dt().principal_shift(&[0.2, 0.1, 0.0, -0.3]);
        assert!((s[0][0] + 0.2).abs() < 1e-15);
        assert!((s[0][1] - 0.05).abs() < 1e-15);
        assert!((s[3][0] + 0.15).abs() < 1e-15);
        assert_eq!(s[1][2], 0.0);
    }

    #[test]
    fn smooth_step_derivative_matches_difference_quotient() {
        for &x in &[0.1, 0.3, 0.5, 0.77, 0.95] {
            let h = 1e-6;
            let fd = (smooth_step(x + h).0 - smooth_step(x - h).0) / (2.0 * h);
            assert!((fd - smooth_step(x).1).abs() < 1e-7);
        }
        assert!((smooth_step(0.5).1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn metric_derivatives_match_difference_quotients() {
        let specs = [
            MetricSpec::InteriorOscillator { delta0: 0.01, alpha: 0.1, radius: 10.0 },
            MetricSpec::StaticBump { delta0: 0.02, alpha: 0.1, radius: 10.0, c_time: 1.0, c_space: -0.5 },
            MetricSpec::StaticTail { delta0: 0.01, alpha: 0.1 },
        ];
        let pts = [(0.7, [1.0, 2.0, 3.0]), (2.1, [-6.0, 1.5, 2.0]), (5.0, [0.2, -0.1, 0.3])];
        for spec in &specs {
            for (t, x) in pts {
                let s = spec.eval(t, &x);
                let h = 1e-6;
                for gamma in 0..4 {
                    let (mut tp, mut tm, mut xp, mut xm) = (t, t, x, x);
                    if gamma == 0 {
                        tp += h;
                        tm -= h;
                    } else {
                        xp[gamma - 1] += h;
                        xm[gamma - 1] -= h;
                    }
                    let hp = spec.eval(tp, &xp).h;
                    let hm = spec.eval(tm, &xm).h;
                    for mu in 0..4 {
                        for nu in 0..4 {
                            let fd = (hp[mu][nu] - hm[mu][nu]) / (2.0 * h);
                            assert!((fd - s.dh[gamma][mu][nu]).abs() < 1e-9, "{spec:?} {gamma} {mu}{nu}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn envelope_checks() {
        let p = DecayParams::default();
        let plan = EnvelopeSamplePlan::standard(p.radius, 40.0);
        let flat = validate_envelope(&MetricSpec::Flat, &p, &plan);
        assert!(flat.pass);
        assert!(flat.inequalities.iter().all(|q| q.max_ratio == 0.0));

        let osc = MetricSpec::InteriorOscillator { delta0: p.delta0, alpha: p.alpha, radius: p.radius };
        let rep = validate_envelope(&osc, &p, &plan);
        assert!(rep.pass, "{rep:?}");

        let tail = MetricSpec::StaticTail { delta0: p.delta0, alpha: p.alpha };
        let rep = validate_envelope(&tail, &p, &plan);
        assert!(rep.pass, "{rep:?}");

        let constant = MetricSpec::ConstantTime { value: p.delta0 };
        let rep = validate_envelope(&constant, &p, &plan);
        assert!(!rep.pass);
        let r_max = p.radius;
        let expected = (1.0 + r_max).powf(1.0 + 2.0 * p.alpha);
        assert!((rep.inequalities[0].max_ratio - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn words_enumerate_all_generators() {
        assert_eq!(words_of_length(0).len(), 1);
        assert_eq!(words_of_length(2).len(), 16);
        assert_eq!(word_label(&[Generator::Dt, Generator::Omega12]), "T.O12");
    }

    #[test]
    fn rotation_word_on_linear_function() {
        // Omega_12 x_2 = x_1.
        let f = |_t: f64, x: &[f64; 3]| (x[1], [0.0, 0.0, 1.0, 0.0]);
        let v = apply_word(&[Generator::Omega12], 0.0, &[0.4, 0.9, 0.1], &f);
        assert_eq!(v, 0.4);
    }
}
