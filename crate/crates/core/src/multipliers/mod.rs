//! Stress-energy, deformation tensors, modified currents and the two
//! multiplier constructions (Morawetz and `r^p`-weighted), plus an auditor
//! for the divergence identity over a region of the foliation.

pub mod audit;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use audit::{audit_identities, audit_identity, AuditConfig, AuditRegion, AuditReport, AuditTerms, IdentityAuditor};

use crate::diagnostics::jet::Jet;
use crate::error::{Error, Result};
use crate::evolve::rhs::lower_order_vector;
use crate::geometry::MetricSample;
use crate::tensor::{self, Mat4, Vec4, ZERO4};

/// A vector field `X` with its companion scalar `chi`.
#[derive(Clone)]
pub enum MultiplierSpec {
    /// `X = d_t`, `chi = 0`.
    Dt,
    /// `X = f(r) d_r`, `chi = f / r`, `f = 2/alpha (1 - (1+r)^{-alpha})`.
    Morawetz { alpha: f64 },
    /// `X = r^p (-2 d^{Lbar} + g^{Lbar Lbar} Lbar)`, `chi = 0`, for `r >= radius`.
    PWeight { p: f64, radius: f64 },
    /// Arbitrary `(X, chi)`; derivatives by centred differences.
    Custom { name: String, field: Arc<dyn Fn(f64, &[f64; 3]) -> (Vec4, f64) + Send + Sync> },
}

impl fmt::Debug for MultiplierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// `X`, `dX[nu][mu] = d_nu X^mu`, `chi` and its first two derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiplierJet {
    pub x: Vec4,
    pub dx: Mat4,
    pub chi: f64,
    pub dchi: Vec4,
    pub ddchi: Mat4,
}

/// Radial functions of the Morawetz multiplier at one radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorawetzValues {
    pub f: f64,
    pub df: f64,
    pub ddf: f64,
    pub chi: f64,
    pub dchi: f64,
    pub ddchi: f64,
    /// `chi - f/r + f'/2`, which should equal `(1+r)^{-1-alpha}`.
    pub identity: f64,
    /// `|identity - (1+r)^{-1-alpha}|`.
    pub identity_residual: f64,
}

pub fn morawetz_multiplier(alpha: f64, r: f64) -> Result<MorawetzValues> {
    if !(alpha > 0.0 && alpha < 1.0) || !(r >= 0.0) {
        return Err(Error::InvalidArgument(format!("Morawetz multiplier needs 0 < alpha < 1, r >= 0 (alpha = {alpha}, r = {r})")));
    }
    let s = 1.0 + r;
    let f = 2.0 / alpha * (1.0 - s.powf(-alpha));
    let df = 2.0 * s.powf(-1.0 - alpha);
    let ddf = -2.0 * (1.0 + alpha) * s.powf(-2.0 - alpha);
    let (chi, dchi, ddchi) = if r < 1e-3 {
        // Taylor coefficients of f: c_k = 2 (-1)^{k-1} (1+alpha)...(k-1+alpha) / k!.
        let a = alpha;
        let c = [
            2.0,
            -(1.0 + a),
            (1.0 + a) * (2.0 + a) / 3.0,
            -(1.0 + a) * (2.0 + a) * (3.0 + a) / 12.0,
            (1.0 + a) * (2.0 + a) * (3.0 + a) * (4.0 + a) / 60.0,
        ];
        (
            c[0] + r * (c[1] + r * (c[2] + r * (c[3] + r * c[4]))),
            c[1] + r * (2.0 * c[2] + r * (3.0 * c[3] + r * 4.0 * c[4])),
            2.0 * c[2] + r * (6.0 * c[3] + r * 12.0 * c[4]),
        )
    } else {
        (f / r, df / r - f / (r * r), ddf / r - 2.0 * df / (r * r) + 2.0 * f / (r * r * r))
    };
    // chi = f / r, so the identity reduces to f'/2 up to rounding.
    let identity = chi - if r > 0.0 { f / r } else { 2.0 } + 0.5 * df;
    let target = s.powf(-1.0 - alpha);
    Ok(MorawetzValues { f, df, ddf, chi, dchi, ddchi, identity, identity_residual: (identity - target).abs() })
}

/// `x_hat` and `d_j x_hat_i = (delta_ij - x_hat_i x_hat_j) / r`.
fn unit_and_derivative(x: &[f64; 3], r: f64) -> ([f64; 3], [[f64; 3]; 3]) {
    let xh = [x[0] / r, x[1] / r, x[2] / r];
    let mut d = [[0.0; 3]; 3];
    for (i, row) in d.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = (if i == j { 1.0 } else { 0.0 } - xh[i] * xh[j]) / r;
        }
    }
    (xh, d)
}

/// `X = r^p (-g^{mu nu} Lbar_mu d_nu + g^{Lbar Lbar} Lbar)` with
/// `Lbar_mu = (1, -x_hat)` and `g^{Lbar Lbar} = g^{mu nu} Lbar_mu Lbar_nu / 4`.
pub fn pweight_vector(p: f64, radius: f64, x: &[f64; 3], metric: &MetricSample) -> Result<Vec4> {
    Ok(pweight_jet(p, radius, x, metric)?.0)
}

fn pweight_jet(p: f64, radius: f64, x: &[f64; 3], metric: &MetricSample) -> Result<(Vec4, Mat4)> {
    let r = tensor::norm3(x);
    if r < radius {
        return Err(Error::MultiplierDomain { r, min: radius });
    }
    let g = metric.inverse_metric();
    let (xh, dxh) = unit_and_derivative(x, r);
    let lb = [1.0, -xh[0], -xh[1], -xh[2]];
    // d_gamma Lbar_mu (Lbar^mu has the same components).
    let mut dlb = ZERO4;
    for j in 0..3 {
        for i in 0..3 {
            dlb[j + 1][i + 1] = -dxh[i][j];
        }
    }
    let glb = tensor::mat_vec(&g, &lb);
    let gll = 0.25 * tensor::dot4(&lb, &glb);
    let rp = r.powf(p);
    let mut xv = [0.0; 4];
    for nu in 0..4 {
        xv[nu] = rp * (-glb[nu] + gll * lb[nu]);
    }
    let mut dx = ZERO4;
    for gam in 0..4 {
        let drp = if gam == 0 { 0.0 } else { p * r.powf(p - 1.0) * xh[gam - 1] };
        let dg = &metric.dh[gam];
        let mut dgll = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                dgll += dg[a][b] * lb[a] * lb[b] + 2.0 * g[a][b] * dlb[gam][a] * lb[b];
            }
        }
        dgll *= 0.25;
        for nu in 0..4 {
            let mut dglb = 0.0;
            for mu in 0..4 {
                dglb += dg[mu][nu] * lb[mu] + g[mu][nu] * dlb[gam][mu];
            }
            let inner = -glb[nu] + gll * lb[nu];
            let dinner = -dglb + dgll * lb[nu] + gll * dlb[gam][nu];
            dx[gam][nu] = drp * inner + rp * dinner;
        }
    }
    Ok((xv, dx))
}

impl MultiplierSpec {
    pub fn name(&self) -> String {
        match self {
            Self::Dt => "dt".into(),
            Self::Morawetz { alpha } => format!("morawetz({alpha})"),
            Self::PWeight { p, .. } => format!("pweight({p})"),
            Self::Custom { name, .. } => format!("custom({name})"),
        }
    }

    /// Smallest radius where the field is defined.
    pub fn min_radius(&self) -> f64 {
        match self {
            Self::PWeight { radius, .. } => *radius,
            _ => 0.0,
        }
    }

    pub fn eval(&self, t: f64, x: &[f64; 3], metric: &MetricSample) -> Result<MultiplierJet> {
        let zero = MultiplierJet { x: [0.0; 4], dx: ZERO4, chi: 0.0, dchi: [0.0; 4], ddchi: ZERO4 };
        match self {
            Self::Dt => Ok(MultiplierJet { x: [1.0, 0.0, 0.0, 0.0], ..zero }),
            Self::Morawetz { alpha } => {
                let r = tensor::norm3(x);
                let m = morawetz_multiplier(*alpha, r)?;
                if r == 0.0 {
                    return Err(Error::DegeneratePoint { r, floor: 0.0 });
                }
                let (xh, _) = unit_and_derivative(x, r);
                let mut out = zero;
                for i in 0..3 {
                    out.x[i + 1] = m.f * xh[i];
                    out.dchi[i + 1] = m.dchi * xh[i];
                    for j in 0..3 {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        let proj = delta - xh[i] * xh[j];
                        out.dx[j + 1][i + 1] = m.df * xh[i] * xh[j] + m.f / r * proj;
                        out.ddchi[i + 1][j + 1] = m.ddchi * xh[i] * xh[j] + m.dchi / r * proj;
                    }
                }
                out.chi = m.chi;
                Ok(out)
            }
            Self::PWeight { p, radius } => {
                let (xv, dx) = pweight_jet(*p, *radius, x, metric)?;
                Ok(MultiplierJet { x: xv, dx, ..zero })
            }
            Self::Custom { field, .. } => {
                let r = tensor::norm3(x);
                let h = 1e-4 * (1.0 + r);
                let at = |d: &Vec4| {
                    let p = [x[0] + d[1], x[1] + d[2], x[2] + d[3]];
                    field(t + d[0], &p)
                };
                let (xv, chi) = at(&[0.0; 4]);
                let mut out = MultiplierJet { x: xv, chi, ..zero };
                for a in 0..4 {
                    let mut e = [0.0; 4];
                    e[a] = h;
                    let (xp, cp) = at(&e);
                    e[a] = -h;
                    let (xm, cm) = at(&e);
                    for mu in 0..4 {
                        out.dx[a][mu] = (xp[mu] - xm[mu]) / (2.0 * h);
                    }
                    out.dchi[a] = (cp - cm) / (2.0 * h);
                    for b in 0..4 {
                        let mut e = [0.0; 4];
                        e[a] += h;
                        e[b] += h;
                        let pp = at(&e).1;
                        e[b] -= 2.0 * h;
                        let pm = at(&e).1;
                        e[a] -= 2.0 * h;
                        let mm = at(&e).1;
                        e[b] += 2.0 * h;
                        let mp = at(&e).1;
                        out.ddchi[a][b] = (pp - pm - mp + mm) / (4.0 * h * h);
                    }
                }
                Ok(out)
            }
        }
    }
}

fn lower_metric(metric: &MetricSample, t: f64, x: &[f64; 3]) -> Result<Mat4> {
    tensor::inverse4(&metric.inverse_metric()).ok_or(Error::MetricInversion { t, x: *x })
}

/// `T_{mu nu} = d_mu phi d_nu phi - 1/2 g_{mu nu} g^{ab} d_a phi d_b phi`.
pub fn stress_energy(dphi: &Vec4, metric: &MetricSample, t: f64, x: &[f64; 3]) -> Result<Mat4> {
    let glow = lower_metric(metric, t, x)?;
    Ok(stress_with(dphi, &metric.inverse_metric(), &glow))
}

fn stress_with(dphi: &Vec4, ginv: &Mat4, glow: &Mat4) -> Mat4 {
    let q = tensor::contract(ginv, dphi, dphi);
    let mut out = ZERO4;
    for mu in 0..4 {
        for nu in 0..4 {
            out[mu][nu] = dphi[mu] * dphi[nu] - 0.5 * glow[mu][nu] * q;
        }
    }
    out
}

/// `pi_{mu nu} = 1/2 (X^g d_g g_{mu nu} + g_{g nu} d_mu X^g + g_{mu g} d_nu X^g)`.
pub fn deformation(m: &MultiplierJet, metric: &MetricSample, t: f64, x: &[f64; 3]) -> Result<Mat4> {
    let glow = lower_metric(metric, t, x)?;
    Ok(deformation_with(m, metric, &glow))
}

fn deformation_with(m: &MultiplierJet, metric: &MetricSample, glow: &Mat4) -> Mat4 {
    // d_g g_{mu nu} = -g_{mu a} d_g g^{ab} g_{b nu}
    let mut xdg = ZERO4;
    for gam in 0..4 {
        if m.x[gam] == 0.0 {
            continue;
        }
        let prod = tensor::mat_mul(&tensor::mat_mul(glow, &metric.dh[gam]), glow);
        for mu in 0..4 {
            for nu in 0..4 {
                xdg[mu][nu] -= m.x[gam] * prod[mu][nu];
            }
        }
    }
    let mut out = ZERO4;
    for mu in 0..4 {
        for nu in 0..4 {
            let mut s = xdg[mu][nu];
            for gam in 0..4 {
                s += glow[gam][nu] * m.dx[mu][gam] + glow[mu][gam] * m.dx[nu][gam];
            }
            out[mu][nu] = 0.5 * s;
        }
    }
    out
}

/// Currents of one multiplier at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurrentBundle {
    pub stress: Mat4,
    /// `Jtilde_mu = T_{mu nu} X^nu - 1/2 d_mu chi phi^2 + chi phi d_mu phi`.
    pub j_lower: Vec4,
    /// `g^{mu nu} Jtilde_nu`.
    pub j_upper: Vec4,
    /// `K^X = T^{mu nu} pi_{mu nu}`.
    pub k: f64,
    pub box_phi: f64,
    /// `Box phi (X phi + chi phi) + K^X + chi d^g phi d_g phi - 1/2 Box chi phi^2`.
    pub divergence: f64,
    /// `sqrt|det g_{mu nu}|`.
    pub volume: f64,
}

/// Currents from the jet of `phi` (order >= 2 for the divergence).
pub fn currents(mult: &MultiplierSpec, phi: &Jet, metric: &MetricSample, t: f64, x: &[f64; 3]) -> Result<CurrentBundle> {
    let ginv = metric.inverse_metric();
    let glow = lower_metric(metric, t, x)?;
    let n = lower_order_vector(metric).ok_or(Error::MetricInversion { t, x: *x })?;
    let m = mult.eval(t, x, metric)?;
    let v = phi.value();
    let d = phi.grad();
    let hess = phi.hess();
    let stress = stress_with(&d, &ginv, &glow);
    let mut j_lower = tensor::mat_vec(&stress, &m.x);
    for mu in 0..4 {
        j_lower[mu] += -0.5 * m.dchi[mu] * v * v + m.chi * v * d[mu];
    }
    let j_upper = tensor::mat_vec(&ginv, &j_lower);

    let pi = deformation_with(&m, metric, &glow);
    let t_up = tensor::mat_mul(&tensor::mat_mul(&ginv, &stress), &ginv);
    let mut k = 0.0;
    for mu in 0..4 {
        for nu in 0..4 {
            k += t_up[mu][nu] * pi[mu][nu];
        }
    }
    let box_of = |h: &Mat4, g1: &Vec4| {
        let mut s = tensor::dot4(&n, g1);
        for mu in 0..4 {
            for nu in 0..4 {
                s += ginv[mu][nu] * h[mu][nu];
            }
        }
        s
    };
    let box_phi = box_of(&hess, &d);
    let box_chi = box_of(&m.ddchi, &m.dchi);
    let q = tensor::contract(&ginv, &d, &d);
    let divergence = box_phi * (tensor::dot4(&m.x, &d) + m.chi * v) + k + m.chi * q - 0.5 * box_chi * v * v;
    let volume = tensor::det4(&glow).abs().sqrt();
    Ok(CurrentBundle { stress, j_lower, j_upper, k, box_phi, divergence, volume })
}
