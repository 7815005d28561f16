//! Commuted fields `Z^k phi` on the whole grid.

use rayon::prelude::*;

use super::jet::Word;
use crate::error::{Error, Result};
use crate::evolve::stencil::Stencil;
use crate::evolve::Window;
use crate::foliation::GridSpec;
use crate::geometry::Generator;

/// `Z^k phi` and `d_t Z^k phi` on the grid. Cells within the stencil reach of
/// the edge (per applied rotation) are set to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct CommutedField {
    pub word: Word,
    pub phi: Vec<f64>,
    pub pi: Vec<f64>,
}

/// `x_a d_b f - x_b d_a f` by centred differences.
pub fn rotate_grid(f: &[f64], grid: &GridSpec, st: &Stencil, g: Generator) -> Vec<f64> {
    let (a, b) = match g {
        Generator::Omega12 => (0, 1),
        Generator::Omega13 => (0, 2),
        Generator::Omega23 => (1, 2),
        Generator::Dt => panic!("d_t is not a spatial rotation"),
    };
    let n = grid.n();
    let strides = [n * n, n, 1];
    let reach = st.reach;
    let mut out = vec![0.0; f.len()];
    out.par_chunks_mut(n * n).enumerate().for_each(|(i, plane)| {
        if i < reach || i + reach >= n {
            return;
        }
        for j in reach..n - reach {
            for k in reach..n - reach {
                let c = grid.index(i, j, k);
                let x = grid.position(i, j, k);
                plane[j * n + k] = x[a] * st.d1(f, c, strides[b]) - x[b] * st.d1(f, c, strides[a]);
            }
        }
    });
    out
}

fn tower_field(w: &Window<'_>, m: usize) -> Result<Vec<f64>> {
    Ok(match m {
        0 => w.cur.phi.clone(),
        1 => w.cur.pi.clone(),
        2 => w.cur.accel.clone(),
        3 => {
            if w.prev.is_none() && w.next.is_none() {
                return Err(Error::InsufficientTimeLevels { needed: 2, available: 1 });
            }
            (0..w.cur.accel.len()).map(|c| w.accel_dot(c)).collect()
        }
        _ => {
            return Err(Error::InsufficientTimeLevels { needed: m, available: 3 });
        }
    })
}

/// Applies `word` to the solution at the current level of `w`.
pub fn commuted(w: &Window<'_>, word: &Word) -> Result<CommutedField> {
    let st = Stencil::new(w.fd_order, w.grid.dx())?;
    let mut phi = tower_field(w, word.time)?;
    let mut pi = tower_field(w, word.time + 1)?;
    for g in word.rotations.iter().rev() {
        phi = rotate_grid(&phi, w.grid, &st, *g);
        pi = rotate_grid(&pi, w.grid, &st, *g);
    }
    Ok(CommutedField { word: word.clone(), phi, pi })
}
