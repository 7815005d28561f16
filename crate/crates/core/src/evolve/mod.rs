//! Explicit time evolution of the quasilinear wave equation on a uniform
//! Cartesian grid: centred finite differences in space, classical RK4 in time.

pub mod checkpoint;
pub mod profile;
pub mod rhs;
pub mod run;
pub mod stencil;
pub mod step;

use serde::{Deserialize, Serialize};

use crate::foliation::GridSpec;
use crate::geometry::{interior_cutoff, MetricSpec, NullFormTensor};
use crate::tensor::{Mat4, Vec4};

pub use profile::{cartesian_derivatives, exact_spherical, radial_jet, Profile, RadialJet};
pub use rhs::{effective_principal, hyperbolicity_check, Hyperbolicity};
pub use run::{replay, run, Level, Observer, RunSummary, SolverConfig, Window};
pub use step::{cfl_dt, Solver};

/// `(phi, d_t phi)` on the grid at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub phi: Vec<f64>,
    pub pi: Vec<f64>,
}

impl FieldState {
    pub fn zeros(grid: &GridSpec, t: f64) -> Self {
        Self { t, phi: vec![0.0; grid.len()], pi: vec![0.0; grid.len()] }
    }

    pub fn is_finite(&self) -> bool {
        self.phi.iter().chain(&self.pi).all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMode {
    /// Fields vanish outside the domain of influence of the data.
    #[default]
    CausalDomain,
    /// First-order outgoing condition `d_t f + d_r f + f / r = 0` at the edge.
    Sommerfeld,
}

/// Compactly supported forcing `F(t, x)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SourceSpec {
    #[default]
    None,
    /// `a (1 - |x-c|^2/w^2)^8 sin^2(pi t / duration)` for `t < duration`, else 0.
    Bump { amplitude: f64, center: [f64; 3], width: f64, duration: f64 },
}

impl SourceSpec {
    pub fn is_none(&self) -> bool {
        matches!(self, Self::None)
    }

    pub fn eval(&self, t: f64, x: &[f64; 3]) -> f64 {
        match *self {
            Self::None => 0.0,
            Self::Bump { amplitude, center, width, duration } => {
                if t < 0.0 || t >= duration {
                    return 0.0;
                }
                let d2 = (0..3).map(|i| (x[i] - center[i]).powi(2)).sum::<f64>() / (width * width);
                if d2 >= 1.0 {
                    return 0.0;
                }
                let time = (std::f64::consts::PI * t / duration).sin();
                amplitude * (1.0 - d2).powi(8) * time * time
            }
        }
    }

    /// Radius of a ball containing the spatial support.
    pub fn support_radius(&self) -> f64 {
        match *self {
            Self::None => 0.0,
            Self::Bump { center, width, .. } => crate::tensor::norm3(&center) + width,
        }
    }
}

/// Background solution `Phi` for the perturbation equation: the exact
/// spherical flat solution built from `profile`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub profile: Profile,
}

impl Background {
    /// `d Phi` and the spacetime Hessian of `Phi`.
    pub fn jet(&self, t: f64, x: &[f64; 3]) -> (Vec4, Mat4) {
        let r = crate::tensor::norm3(x);
        let j = radial_jet(&self.profile, t, r);
        cartesian_derivatives(&j, x)
    }

    /// Radius outside which `Phi` vanishes at time `t`.
    pub fn support_radius(&self, t: f64) -> f64 {
        self.profile.support_end() + t.abs()
    }
}

/// Non-null quadratic `c b(r) (d_t phi)^2` confined to the interior by the
/// cutoff `b` (1 for `r <= radius - 3`, 0 for `r >= radius - 1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteriorQuadratic {
    pub coefficient: f64,
    pub radius: f64,
}

impl InteriorQuadratic {
    pub fn weight(&self, r: f64) -> f64 {
        self.coefficient * interior_cutoff(r, self.radius)
    }
}

/// `Box_g phi + gcube d phi d^2 phi = A d phi d phi + F`, optionally about a
/// background `Phi` and with an interior-only non-null quadratic on the right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquationSpec {
    pub metric: MetricSpec,
    pub nullform: NullFormTensor,
    #[serde(default = "default_true")]
    pub semilinear: bool,
    #[serde(default)]
    pub source: SourceSpec,
    #[serde(default)]
    pub interior_quadratic: Option<InteriorQuadratic>,
    #[serde(default)]
    pub background: Option<Background>,
}

fn default_true() -> bool {
    true
}

impl Default for EquationSpec {
    fn default() -> Self {
        Self {
            metric: MetricSpec::Flat,
            nullform: NullFormTensor::zero(),
            semilinear: true,
            source: SourceSpec::None,
            interior_quadratic: None,
            background: None,
        }
    }
}

impl EquationSpec {
    pub fn flat_linear() -> Self {
        Self::default()
    }

    /// True when the equation is `-d_t^2 phi + Laplacian phi = F`.
    pub fn is_flat_linear(&self) -> bool {
        self.metric.is_flat()
            && !self.nullform.has_quasilinear()
            && !(self.semilinear && self.nullform.has_semilinear())
            && self.interior_quadratic.is_none()
            && self.background.is_none()
    }

    pub fn is_linear(&self) -> bool {
        !self.nullform.has_quasilinear()
            && !(self.semilinear && self.nullform.has_semilinear())
            && self.interior_quadratic.is_none()
    }
}

/// Named families of smooth compactly supported data.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialData {
    #[default]
    Zero,
    /// The exact spherical solution built from `profile`, sampled at `t = 0`.
    Radial { profile: Profile },
    /// `a (1 - |x-c|^2/w^2)^8` at rest.
    OffCenter { amplitude: f64, center: [f64; 3], width: f64 },
    /// Radial shell `a (1 - ((r-c)/w)^2)^8` times a real spherical harmonic of
    /// degree `l` (1 or 2), at rest.
    AngularMode { amplitude: f64, l: u32, center: f64, width: f64 },
}

impl InitialData {
    pub fn support_radius(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Radial { profile } => profile.support_end(),
            Self::OffCenter { center, width, .. } => crate::tensor::norm3(center) + width,
            Self::AngularMode { center, width, .. } => center + width,
        }
    }

    /// `(phi_0, phi_1)` at a point.
    pub fn eval(&self, x: &[f64; 3]) -> (f64, f64) {
        let r = crate::tensor::norm3(x);
        match self {
            Self::Zero => (0.0, 0.0),
            Self::Radial { profile } => {
                let j = radial_jet(profile, 0.0, r);
                (j.phi, j.phi_t)
            }
            Self::OffCenter { amplitude, center, width } => {
                let d2 = (0..3).map(|i| (x[i] - center[i]).powi(2)).sum::<f64>() / (width * width);
                if d2 >= 1.0 {
                    (0.0, 0.0)
                } else {
                    (amplitude * (1.0 - d2).powi(8), 0.0)
                }
            }
            Self::AngularMode { amplitude, l, center, width } => {
                let y = (r - center) / width;
                if y.abs() >= 1.0 || r == 0.0 {
                    return (0.0, 0.0);
                }
                let shell = amplitude * (1.0 - y * y).powi(8);
                let harmonic = match l {
                    1 => x[2] / r,
                    _ => (3.0 * x[2] * x[2] - r * r) / (2.0 * r * r),
                };
                (shell * harmonic, 0.0)
            }
        }
    }

    pub fn sample(&self, grid: &GridSpec) -> FieldState {
        let mut st = FieldState::zeros(grid, 0.0);
        let n = grid.n();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (a, b) = self.eval(&grid.position(i, j, k));
                    let c = grid.index(i, j, k);
                    st.phi[c] = a;
                    st.pi[c] = b;
                }
            }
        }
        st
    }

    /// The same data multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::Zero => {}
            Self::Radial { profile } => profile.amplitude *= s,
            Self::OffCenter { amplitude, .. } | Self::AngularMode { amplitude, .. } => *amplitude *= s,
        }
        out
    }
}
