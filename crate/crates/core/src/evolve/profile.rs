//! Compactly supported polynomial bumps and the exact spherically symmetric
//! solution of the flat wave equation built from them.

use serde::{Deserialize, Serialize};

/// Coefficients of `(1 - y^2)^8` in ascending powers of `y`.
fn bump_coefficients() -> [f64; 17] {
    let mut c = [0.0; 17];
    // Binomial expansion of (1 - y^2)^8.
    let mut binom = 1.0;
    for k in 0..=8 {
        c[2 * k] = if k % 2 == 0 { binom } else { -binom };
        binom = binom * (8 - k) as f64 / (k + 1) as f64;
    }
    c
}

/// `d^k/dy^k` of the bump polynomial at `y`, zero outside `|y| < 1`.
fn bump_derivative(y: f64, k: usize) -> f64 {
    if y.abs() >= 1.0 || k > 16 {
        return 0.0;
    }
    let c = bump_coefficients();
    // Horner on the k-th derivative coefficients.
    let mut acc = 0.0;
    for p in (k..=16).rev() {
        let mut fall = 1.0;
        for q in 0..k {
            fall *= (p - q) as f64;
        }
        acc = acc * y + c[p] * fall;
    }
    acc
}

/// One-dimensional profile `a (1 - ((x-c)/w)^2)^8`, optionally made odd by
/// subtracting its reflection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    #[serde(default)]
    pub odd: bool,
}

impl Profile {
    pub fn new(amplitude: f64, center: f64, width: f64) -> Self {
        Self { amplitude, center, width, odd: false }
    }

    pub fn odd(mut self) -> Self {
        self.odd = true;
        self
    }

    fn raw(&self, x: f64, k: usize) -> f64 {
        let y = (x - self.center) / self.width;
        self.amplitude * bump_derivative(y, k) / self.width.powi(k as i32)
    }

    /// k-th derivative of the profile at `x`.
    pub fn derivative(&self, x: f64, k: usize) -> f64 {
        if self.odd {
            // d^k/dx^k [F(-x)] = (-1)^k F^(k)(-x)
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            self.raw(x, k) - sign * self.raw(-x, k)
        } else {
            self.raw(x, k)
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }

    /// Largest `|x|` where the profile is nonzero.
    pub fn support_end(&self) -> f64 {
        (self.center.abs() + self.width).max((self.center - self.width).abs())
    }
}

/// Value and radial/time derivatives of the exact solution at `(t, r)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RadialJet {
    pub phi: f64,
    pub phi_t: f64,
    pub phi_r: f64,
    pub phi_tt: f64,
    pub phi_tr: f64,
    pub phi_rr: f64,
    /// `phi_r / r`, finite at the origin.
    pub phi_r_over_r: f64,
}

/// `phi(t, r) = [F(r - t) - F(-r - t)] / (2 r)`, continued to `r = 0` by `F'(-t)`.
pub fn exact_spherical(profile: &Profile, t: f64, r: f64) -> f64 {
    radial_jet(profile, t, r).phi
}

/// Exact solution together with its first and second derivatives.
pub fn radial_jet(profile: &Profile, t: f64, r: f64) -> RadialJet {
    let f = |x: f64, k: usize| profile.derivative(x, k);
    if r < 0.01 * profile.width {
        // Odd-part Taylor series: phi = sum_{m odd} F^(m)(-t) r^{m-1} / m!.
        let mut j = RadialJet::default();
        let mut fact = 1.0;
        for m in 1..=11usize {
            fact *= m as f64;
            if m % 2 == 0 {
                continue;
            }
            let mf = m as f64;
            let (c0, c1, c2) = (f(-t, m) / fact, f(-t, m + 1) / fact, f(-t, m + 2) / fact);
            let rp = r.powi(m as i32 - 1);
            j.phi += c0 * rp;
            j.phi_t -= c1 * rp;
            j.phi_tt += c2 * rp;
            if m >= 3 {
                let rq = r.powi(m as i32 - 3);
                j.phi_r_over_r += (mf - 1.0) * c0 * rq;
                j.phi_rr += (mf - 1.0) * (mf - 2.0) * c0 * rq;
                j.phi_tr -= (mf - 1.0) * c1 * r.powi(m as i32 - 2);
            }
        }
        j.phi_r = j.phi_r_over_r * r;
        return j;
    }
    let (a, b) = (r - t, -r - t);
    let g = f(a, 0) - f(b, 0);
    let g_r = f(a, 1) + f(b, 1);
    let g_t = -f(a, 1) + f(b, 1);
    let g_rr = f(a, 2) - f(b, 2);
    let g_tt = f(a, 2) - f(b, 2);
    let g_tr = -f(a, 2) - f(b, 2);
    let phi = g / (2.0 * r);
    let phi_r = g_r / (2.0 * r) - g / (2.0 * r * r);
    RadialJet {
        phi,
        phi_t: g_t / (2.0 * r),
        phi_r,
        phi_tt: g_tt / (2.0 * r),
        phi_tr: g_tr / (2.0 * r) - g_t / (2.0 * r * r),
        phi_rr: g_rr / (2.0 * r) - g_r / (r * r) + g / (r * r * r),
        phi_r_over_r: phi_r / r,
    }
}

/// Cartesian gradient `(d_t, d_1, d_2, d_3)` and Hessian of a radial jet at `x`.
pub fn cartesian_derivatives(jet: &RadialJet, x: &[f64; 3]) -> ([f64; 4], [[f64; 4]; 4]) {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let w = if r > 0.0 { [x[0] / r, x[1] / r, x[2] / r] } else { [0.0; 3] };
    let mut grad = [jet.phi_t, 0.0, 0.0, 0.0];
    let mut hess = [[0.0; 4]; 4];
    hess[0][0] = jet.phi_tt;
    for i in 0..3 {
        grad[i + 1] = jet.phi_r_over_r * x[i];
        hess[0][i + 1] = jet.phi_tr * w[i];
        hess[i + 1][0] = hess[0][i + 1];
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            hess[i + 1][j + 1] = (jet.phi_rr - jet.phi_r_over_r) * w[i] * w[j] + jet.phi_r_over_r * delta;
        }
    }
    (grad, hess)
}
