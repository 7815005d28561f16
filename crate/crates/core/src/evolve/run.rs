//! The time loop. Every stored level is handed once to each observer together
//! with its neighbours, so observers can form time differences.

use std::collections::VecDeque;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::checkpoint::{write_checkpoint, SnapshotRecord, TrajectoryIndex};
use super::step::{cfl_dt, Solver};
use super::{BoundaryMode, EquationSpec, FieldState, InitialData};
use crate::error::Result;
use crate::foliation::{FieldSlice, GridSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid: GridSpec,
    #[serde(default = "default_order")]
    pub fd_order: usize,
    #[serde(default = "default_courant")]
    pub courant: f64,
    #[serde(default)]
    pub boundary: BoundaryMode,
    pub t_final: f64,
    /// Spacing of the times that must fall on a step; `dt` divides it.
    #[serde(default = "default_spacing")]
    pub leaf_spacing: f64,
    /// Fixed step overriding the CFL choice.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub checkpoint_dir: Option<PathBuf>,
    /// Write a checkpoint whenever `t` crosses a multiple of this.
    #[serde(default)]
    pub checkpoint_every: Option<f64>,
}

fn default_order() -> usize {
    4
}

fn default_courant() -> f64 {
    0.25
}

fn default_spacing() -> f64 {
    0.5
}

impl SolverConfig {
    pub fn new(grid: GridSpec, t_final: f64) -> Self {
        Self {
            grid,
            fd_order: default_order(),
            courant: default_courant(),
            boundary: BoundaryMode::CausalDomain,
            t_final,
            leaf_spacing: default_spacing(),
            dt: None,
            checkpoint_dir: None,
            checkpoint_every: None,
        }
    }
}

/// One stored time level: `phi`, `pi = d_t phi` and `accel = d_t pi`.
#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub t: f64,
    pub step: usize,
    pub phi: Vec<f64>,
    pub pi: Vec<f64>,
    pub accel: Vec<f64>,
}

impl Level {
    pub fn slice(&self) -> FieldSlice<'_> {
        FieldSlice { t: self.t, phi: &self.phi, pi: &self.pi }
    }
}

/// A level with its stored neighbours.
pub struct Window<'a> {
    pub grid: &'a GridSpec,
    pub spec: &'a EquationSpec,
    pub fd_order: usize,
    pub dt: f64,
    pub prev: Option<&'a Level>,
    pub cur: &'a Level,
    pub next: Option<&'a Level>,
}

impl Window<'_> {
    /// `d_t accel` at cell `c` by a centred (or one-sided) difference.
    pub fn accel_dot(&self, c: usize) -> f64 {
        match (self.prev, self.next) {
            (Some(p), Some(n)) => (n.accel[c] - p.accel[c]) / (n.t - p.t),
            (None, Some(n)) => (n.accel[c] - self.cur.accel[c]) / (n.t - self.cur.t),
            (Some(p), None) => (self.cur.accel[c] - p.accel[c]) / (self.cur.t - p.t),
            (None, None) => 0.0,
        }
    }

    /// The current level and, if present, the next one, for interpolation in
    /// `[cur.t, next.t]`.
    pub fn slices(&self) -> Vec<FieldSlice<'_>> {
        let mut v = vec![self.cur.slice()];
        if let Some(n) = self.next {
            v.push(n.slice());
        }
        v
    }

    pub fn is_last(&self) -> bool {
        self.next.is_none()
    }
}

pub trait Observer {
    fn observe(&mut self, w: &Window<'_>) -> Result<()>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub dt: f64,
    pub c_max: f64,
    pub t_final: f64,
    /// Smallest hyperbolicity margin seen; 1 for the flat linear equation.
    pub min_margin: f64,
    pub trajectory: TrajectoryIndex,
}

fn aligned_dt(cfg: &SolverConfig, dt_cfl: f64) -> f64 {
    if let Some(dt) = cfg.dt {
        return dt;
    }
    let spacing = cfg.leaf_spacing;
    spacing / (spacing / dt_cfl).ceil()
}

/// Evolves `data` to `cfg.t_final`, feeding every level to `observers`.
/// Returns the summary and the final state.
pub fn run(
    spec: &EquationSpec,
    cfg: &SolverConfig,
    data: &InitialData,
    observers: &mut [&mut dyn Observer],
) -> Result<(RunSummary, FieldState)> {
    let grid = cfg.grid;
    let mut state = data.sample(&grid);
    let support = data.support_radius().max(spec.source.support_radius());
    let (dt_cfl, c_max) = cfl_dt(spec, &grid, &state, cfg.courant, support)?;
    let dt = aligned_dt(cfg, dt_cfl);
    let n_steps = (cfg.t_final / dt).round() as usize;
    // A small allowance over the largest speed keeps the clamp conservative.
    let mut solver = Solver::new(spec.clone(), grid, cfg.fd_order, cfg.boundary, support, c_max + 0.02)?;

    let mut index = TrajectoryIndex { grid: Some(grid), dt, snapshots: Vec::new() };
    let checkpoint = |state: &FieldState, step: usize, name: &str, index: &mut TrajectoryIndex| -> Result<()> {
        if let Some(dir) = &cfg.checkpoint_dir {
            std::fs::create_dir_all(dir)?;
            let file = PathBuf::from(name);
            write_checkpoint(&dir.join(&file), &grid, state)?;
            index.snapshots.push(SnapshotRecord { t: state.t, step, file });
        }
        Ok(())
    };
    let due = |t: f64| match cfg.checkpoint_every {
        Some(every) => ((t / every).round() * every - t).abs() < 1e-9 * (1.0 + t.abs()),
        None => false,
    };

    let mut levels: VecDeque<Level> = VecDeque::with_capacity(3);
    let mut spare: Option<Level> = None;
    let observe = |levels: &VecDeque<Level>, observers: &mut [&mut dyn Observer], cur: usize| -> Result<()> {
        let w = Window {
            grid: &grid,
            spec,
            fd_order: cfg.fd_order,
            dt,
            prev: if cur > 0 { levels.get(cur - 1) } else { None },
            cur: &levels[cur],
            next: levels.get(cur + 1),
        };
        for o in observers.iter_mut() {
            o.observe(&w)?;
        }
        Ok(())
    };

    for step in 0..n_steps {
        let mut level = spare.take().unwrap_or_else(|| Level {
            t: 0.0,
            step: 0,
            phi: vec![0.0; grid.len()],
            pi: vec![0.0; grid.len()],
            accel: vec![0.0; grid.len()],
        });
        level.t = state.t;
        level.step = step;
        level.phi.copy_from_slice(&state.phi);
        level.pi.copy_from_slice(&state.pi);
        if due(state.t) {
            checkpoint(&state, step, &format!("step{step:06}.bin"), &mut index)?;
        }
        if let Err(e) = solver.step(&mut state, dt) {
            let last_good = FieldState { t: level.t, phi: level.phi.clone(), pi: level.pi.clone() };
            checkpoint(&last_good, step, "last_good.bin", &mut index)?;
            if let Some(dir) = &cfg.checkpoint_dir {
                index.save(&dir.join("trajectory.json"))?;
            }
            return Err(e);
        }
        // Keep `t` an exact multiple of `dt` so level times do not drift.
        state.t = (step + 1) as f64 * dt;
        level.accel.copy_from_slice(&solver.accel);
        levels.push_back(level);
        if levels.len() >= 2 {
            let cur = levels.len() - 2;
            observe(&levels, observers, cur)?;
        }
        if levels.len() == 3 {
            spare = levels.pop_front();
        }
    }

    let accel = solver.acceleration_of(&state)?;
    levels.push_back(Level {
        t: state.t,
        step: n_steps,
        phi: state.phi.clone(),
        pi: state.pi.clone(),
        accel,
    });
    if levels.len() >= 2 {
        observe(&levels, observers, levels.len() - 2)?;
    }
    observe(&levels, observers, levels.len() - 1)?;
    checkpoint(&state, n_steps, "final.bin", &mut index)?;
    if let Some(dir) = &cfg.checkpoint_dir {
        index.save(&dir.join("trajectory.json"))?;
    }

    let min_margin = if spec.is_flat_linear() { 1.0 } else { solver.min_margin };
    Ok((RunSummary { steps: n_steps, dt, c_max, t_final: state.t, min_margin, trajectory: index }, state))
}

/// Feeds `n_levels` externally produced levels, spaced `dt` apart, to
/// `observers` with the same windows [`run`] would build.
#[allow(clippy::too_many_arguments)]
pub fn replay<F>(
    grid: &GridSpec,
    spec: &EquationSpec,
    fd_order: usize,
    dt: f64,
    n_levels: usize,
    mut level: F,
    observers: &mut [&mut dyn Observer],
) -> Result<()>
where
    F: FnMut(usize) -> Result<Level>,
{
    let mut levels: VecDeque<Level> = VecDeque::with_capacity(3);
    let mut observe = |levels: &VecDeque<Level>, cur: usize| -> Result<()> {
        let w = Window {
            grid,
            spec,
            fd_order,
            dt,
            prev: if cur > 0 { levels.get(cur - 1) } else { None },
            cur: &levels[cur],
            next: levels.get(cur + 1),
        };
        for o in observers.iter_mut() {
            o.observe(&w)?;
        }
        Ok(())
    };
    for i in 0..n_levels {
        levels.push_back(level(i)?);
        if levels.len() >= 2 {
            observe(&levels, levels.len() - 2)?;
        }
        if levels.len() == 3 {
            levels.pop_front();
        }
    }
    if !levels.is_empty() {
        observe(&levels, levels.len() - 1)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::Profile;

    struct Times(Vec<(f64, bool, bool)>);

    impl Observer for Times {
        fn observe(&mut self, w: &Window<'_>) -> Result<()> {
            self.0.push((w.cur.t, w.prev.is_some(), w.next.is_some()));
            Ok(())
        }
    }

    #[test]
    fn every_level_is_observed_once() {
        let grid = GridSpec::new(4.0, 32).unwrap();
        let mut cfg = SolverConfig::new(grid, 1.0);
        cfg.leaf_spacing = 0.25;
        let mut obs = Times(Vec::new());
        let (sum, _) = run(&EquationSpec::flat_linear(), &cfg, &InitialData::Zero, &mut [&mut obs]).unwrap();
        assert_eq!(sum.dt, 0.0625);
        assert_eq!(obs.0.len(), sum.steps + 1);
        assert_eq!(obs.0[0], (0.0, false, true));
        assert_eq!(*obs.0.last().unwrap(), (1.0, true, false));
        for (i, (t, _, _)) in obs.0.iter().enumerate() {
            assert_eq!(*t, i as f64 * sum.dt);
        }
    }

    #[test]
    fn accel_matches_laplacian_of_level() {
        let grid = GridSpec::new(4.0, 32).unwrap();
        let cfg = SolverConfig::new(grid, 0.25);
        struct Check(f64);
        impl Observer for Check {
            fn observe(&mut self, w: &Window<'_>) -> Result<()> {
                let st = crate::evolve::stencil::Stencil::new(4, w.grid.dx()).unwrap();
                let n = w.grid.n();
                let c = w.grid.index(n / 2, n / 2 + 3, n / 2);
                self.0 = self.0.max((w.cur.accel[c] - st.laplacian(&w.cur.phi, c, n)).abs());
                Ok(())
            }
        }
        let data = InitialData::Radial { profile: Profile::new(1.0, 1.5, 1.0) };
        let mut obs = Check(0.0);
        run(&EquationSpec::flat_linear(), &cfg, &data, &mut [&mut obs]).unwrap();
        assert!(obs.0 < 1e-12);
    }
}
