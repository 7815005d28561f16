//! Centred finite-difference stencils of order 2 and 4.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stencil {
    pub order: usize,
    /// Cells on each side of the centre.
    pub reach: usize,
    d1: [f64; 5],
    d2: [f64; 5],
    inv_dx: f64,
    inv_dx2: f64,
}

impl Stencil {
    pub fn new(order: usize, dx: f64) -> Result<Self> {
        let (reach, d1, d2) = match order {
            2 => (1, [0.0, -0.5, 0.0, 0.5, 0.0], [0.0, 1.0, -2.0, 1.0, 0.0]),
            4 => (
                2,
                [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0],
                [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0],
            ),
            _ => return Err(Error::InvalidArgument(format!("finite-difference order {order} (use 2 or 4)"))),
        };
        Ok(Self { order, reach, d1, d2, inv_dx: 1.0 / dx, inv_dx2: 1.0 / (dx * dx) })
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.inv_dx
    }

    /// First derivative at flat index `c` along the axis with stride `s`.
    #[inline(always)]
    pub fn d1(&self, f: &[f64], c: usize, s: usize) -> f64 {
        if self.reach == 1 {
            0.5 * (f[c + s] - f[c - s]) * self.inv_dx
        } else {
            (self.d1[0] * f[c - 2 * s] + self.d1[1] * f[c - s] + self.d1[3] * f[c + s] + self.d1[4] * f[c + 2 * s])
                * self.inv_dx
        }
    }

    #[inline(always)]
    pub fn d2(&self, f: &[f64], c: usize, s: usize) -> f64 {
        if self.reach == 1 {
            (f[c + s] - 2.0 * f[c] + f[c - s]) * self.inv_dx2
        } else {
            (self.d2[0] * (f[c - 2 * s] + f[c + 2 * s]) + self.d2[1] * (f[c - s] + f[c + s]) + self.d2[2] * f[c])
                * self.inv_dx2
        }
    }

    /// Mixed derivative as the product of first-derivative stencils.
    #[inline(always)]
    pub fn d11(&self, f: &[f64], c: usize, s1: usize, s2: usize) -> f64 {
        let mut acc = 0.0;
        let r = self.reach as isize;
        for a in -r..=r {
            let wa = self.d1[(a + 2) as usize];
            if wa == 0.0 {
                continue;
            }
            let ca = (c as isize + a * s1 as isize) as usize;
            for b in -r..=r {
                let wb = self.d1[(b + 2) as usize];
                if wb == 0.0 {
                    continue;
                }
                acc += wa * wb * f[(ca as isize + b * s2 as isize) as usize];
            }
        }
        acc * self.inv_dx2
    }

    #[inline(always)]
    pub fn laplacian(&self, f: &[f64], c: usize, n: usize) -> f64 {
        self.d2(f, c, n * n) + self.d2(f, c, n) + self.d2(f, c, 1)
    }

    /// `(d_1 f, d_2 f, d_3 f)` for the grid layout `(i n + j) n + k`.
    #[inline(always)]
    pub fn gradient(&self, f: &[f64], c: usize, n: usize) -> [f64; 3] {
        [self.d1(f, c, n * n), self.d1(f, c, n), self.d1(f, c, 1)]
    }

    /// Spatial Hessian.
    #[inline(always)]
    pub fn hessian(&self, f: &[f64], c: usize, n: usize) -> [[f64; 3]; 3] {
        let s = [n * n, n, 1];
        let mut h = [[0.0; 3]; 3];
        for a in 0..3 {
            h[a][a] = self.d2(f, c, s[a]);
            for b in a + 1..3 {
                let v = self.d11(f, c, s[a], s[b]);
                h[a][b] = v;
                h[b][a] = v;
            }
        }
        h
    }
}

/// Second-order derivative along one axis that falls back to one-sided
/// differences at the ends of the line. `pos` is the index along the axis.
#[inline]
pub fn d1_edge(f: &[f64], c: usize, s: usize, pos: usize, n: usize, dx: f64) -> f64 {
    if pos >= 1 && pos + 1 < n {
        0.5 * (f[c + s] - f[c - s]) / dx
    } else if pos == 0 {
        (-3.0 * f[c] + 4.0 * f[c + s] - f[c + 2 * s]) / (2.0 * dx)
    } else {
        (3.0 * f[c] - 4.0 * f[c - s] + f[c - 2 * s]) / (2.0 * dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foliation::GridSpec;

    fn fill(grid: &GridSpec, f: impl Fn(&[f64; 3]) -> f64) -> Vec<f64> {
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
    fn polynomials_are_differentiated_exactly() {
        let grid = GridSpec::new(2.0, 16).unwrap();
        let f = fill(&grid, |x| x[0] * x[0] * x[1] + 3.0 * x[2]);
        let n = grid.n();
        let c = grid.index(7, 8, 9);
        let x = grid.position(7, 8, 9);
        for order in [2, 4] {
            let st = Stencil::new(order, grid.dx()).unwrap();
            let g = st.gradient(&f, c, n);
            assert!((g[0] - 2.0 * x[0] * x[1]).abs() < 1e-12);
            assert!((g[1] - x[0] * x[0]).abs() < 1e-12);
            assert!((g[2] - 3.0).abs() < 1e-12);
            let h = st.hessian(&f, c, n);
            assert!((h[0][0] - 2.0 * x[1]).abs() < 1e-11);
            assert!((h[0][1] - 2.0 * x[0]).abs() < 1e-11);
            assert!(h[2][2].abs() < 1e-11);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let mut errs = Vec::new();
        for n in [16, 32] {
            let grid = GridSpec::new(2.0, n).unwrap();
            let f = fill(&grid, |x| x[0].sin());
            let st = Stencil::new(4, grid.dx()).unwrap();
            let c = grid.index(n / 2, n / 2, n / 2);
            let x = grid.position(n / 2, n / 2, n / 2);
            errs.push((st.laplacian(&f, c, n) + x[0].sin()).abs());
        }
        let rate = (errs[0] / errs[1]).log2();
        assert!(rate > 3.7, "rate {rate}");
    }

    #[test]
    fn bad_order() {
        assert!(Stencil::new(3, 0.1).is_err());
    }

    #[test]
    fn one_sided_edges() {
        let f: Vec<f64> = (0..5).map(|i| (i as f64).powi(2)).collect();
        assert!((d1_edge(&f, 0, 1, 0, 5, 1.0) - 0.0).abs() < 1e-14);
        assert!((d1_edge(&f, 4, 1, 4, 5, 1.0) - 8.0).abs() < 1e-14);
        assert!((d1_edge(&f, 2, 1, 2, 5, 1.0) - 4.0).abs() < 1e-14);
    }
}
