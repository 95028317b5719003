use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::symbol::{SemiclassicalSymbol, Structure};
use crate::error::{Error, Result};
use crate::grid::{ifft, PeriodicGrid};
use crate::linalg::OperatorMatrix;

/// Largest `|a|` allowed at the frequency edge `|ξ| = h n / 2`.
pub const BAND_TOL: f64 = 1e-12;

/// `g[r] = (1/n) Σ_k e^{2πi k r/n} a(x, h k)` for one midpoint `x`.
fn kernel_row(a: &SemiclassicalSymbol, g: &PeriodicGrid, x: f64) -> Vec<C64> {
    let n = g.n();
    let mut row: Vec<C64> = (0..n).map(|j| a.value(x, a.h * g.freq(j) as f64)).collect();
    ifft(&mut row);
    let s = 1.0 / n as f64;
    row.iter_mut().for_each(|v| *v *= s);
    row
}

/// Discrete Weyl quantization on the grid:
/// `M_ij = (1/n) Σ_k e^{ik(x_i - x_j)} a(m_ij, h k)` with `m_ij` the midpoint
/// along the shorter arc. Antipodal pairs average both midpoints.
pub fn quantize(a: &SemiclassicalSymbol, g: &PeriodicGrid) -> OperatorMatrix {
    let n = g.n();
    match a.structure {
        Structure::XOnly => {
            let d: Vec<C64> = (0..n).map(|i| a.value(g.node(i), 0.0)).collect();
            return OperatorMatrix::diagonal(&d);
        }
        Structure::XiOnly => {
            let row = kernel_row(a, g, 0.0);
            return OperatorMatrix::from_fn(n, |i, j| row[(i + n - j) % n]);
        }
        Structure::General => {}
    }
    // Half-grid midpoints π s / n, s = 0..2n.
    let rows: Vec<Vec<C64>> = (0..2 * n)
        .into_par_iter()
        .map(|s| kernel_row(a, g, PI * s as f64 / n as f64))
        .collect();
    let half = n / 2;
    let mut data = vec![C64::new(0.0, 0.0); n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
        for (j, v) in out.iter_mut().enumerate() {
            let d = (j + n - i) % n;
            let r = (i + n - j) % n;
            *v = if d == half {
                let s1 = (2 * i + half) % (2 * n);
                let s2 = (2 * i + 2 * n - half) % (2 * n);
                0.5 * (rows[s1][r] + rows[s2][r])
            } else {
                let delta = if d < half { d as i64 } else { d as i64 - n as i64 };
                let s = (2 * i as i64 + delta).rem_euclid(2 * n as i64) as usize;
                rows[s][r]
            };
        }
    });
    OperatorMatrix::from_row_major(n, &data)
}

/// Precondition of the aliasing-free regime: `|a| < BAND_TOL` at `|ξ| = h n/2`.
pub fn check_band_limit(a: &SemiclassicalSymbol, g: &PeriodicGrid) -> Result<()> {
    let edge = a.h * (g.n() / 2) as f64;
    let m = 4 * g.n();
    for i in 0..m {
        let x = 2.0 * PI * i as f64 / m as f64;
        for xi in [edge, -edge] {
            let v = a.value(x, xi).norm();
            if v >= BAND_TOL {
                return Err(Error::Precondition(format!(
                    "symbol '{}' is {v:.2e} at the frequency edge |ξ| = {edge:.4} (n = {}, h = {})",
                    a.name,
                    g.n(),
                    a.h
                )));
            }
        }
    }
    Ok(())
}

/// Smallest even `n ≥ 2 ξ_max / h + pad` for a symbol with ξ-support hint.
pub fn grid_size_for(xi_max: f64, h: f64, pad: usize) -> usize {
    let n = 2 * (xi_max / h).ceil() as usize + pad;
    (n + 1) / 2 * 2
}
