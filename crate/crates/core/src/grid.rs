//! Equispaced periodic grids on [0, 2π) with Fourier-spectral calculus.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unnormalized forward DFT, `X_k = Σ_j x_j e^{-2πijk/n}`.
pub fn fft(buf: &mut [C64]) {
    plan(buf.len(), false).process(buf);
}

/// Unnormalized inverse DFT, `x_j = Σ_k X_k e^{2πijk/n}`.
pub fn ifft(buf: &mut [C64]) {
    plan(buf.len(), true).process(buf);
}

/// Periodic representative of `x` in [-π, π).
pub fn wrap(x: f64) -> f64 {
    if (-PI..PI).contains(&x) {
        return x;
    }
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y >= PI {
        y - 2.0 * PI
    } else {
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PeriodicGrid {
    n: usize,
}

impl PeriodicGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "grid size must be even and at least 8, got {n}"
            )));
        }
        Ok(PeriodicGrid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Signed frequency stored at DFT index `j`, in `-n/2..n/2`.
    pub fn freq(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    pub fn freqs(&self) -> Vec<i64> {
        (0..self.n).map(|j| self.freq(j)).collect()
    }

    /// Fourier multiplier of `d^m/dx^m`. The Nyquist mode is a cosine, so odd
    /// orders annihilate it and even orders act by `(i n/2)^m`.
    pub fn derivative_multiplier(&self, m: u32) -> Vec<C64> {
        let nyq = -(self.n as i64) / 2;
        self.freqs()
            .into_iter()
            .map(|k| {
                if k == nyq && m % 2 == 1 {
                    C64::new(0.0, 0.0)
                } else {
                    C64::new(0.0, k as f64).powu(m)
                }
            })
            .collect()
    }

    /// Dense circulant matrix of a Fourier multiplier, row-major.
    pub fn multiplier_matrix(&self, mult: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut c = mult.to_vec();
        ifft(&mut c);
        let scale = 1.0 / n as f64;
        let mut m = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = c[(i + n - j) % n] * scale;
            }
        }
        m
    }

    /// Real spectral second-derivative matrix, row-major.
    pub fn d2_matrix(&self) -> Vec<f64> {
        self.multiplier_matrix(&self.derivative_multiplier(2))
            .into_iter()
            .map(|z| z.re)
            .collect()
    }

    /// Real spectral first-derivative matrix, row-major.
    pub fn d1_matrix(&self) -> Vec<f64> {
        self.multiplier_matrix(&self.derivative_multiplier(1))
            .into_iter()
            .map(|z| z.re)
            .collect()
    }
}

pub fn make_grid(n: usize) -> Result<PeriodicGrid> {
    PeriodicGrid::new(n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: PeriodicGrid,
    pub values: Vec<C64>,
}

impl GridFunction {
    pub fn new(grid: PeriodicGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch(values.len(), grid.n()));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        GridFunction { grid, values: vec![C64::new(0.0, 0.0); grid.n()] }
    }

    pub fn from_real(grid: PeriodicGrid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    /// Discrete Fourier coefficients `û_k = (1/n) Σ_j u_j e^{-ikx_j}`, in DFT order.
    pub fn coefficients(&self) -> Vec<C64> {
        let mut c = self.values.clone();
        fft(&mut c);
        let s = 1.0 / self.grid.n() as f64;
        c.iter_mut().for_each(|z| *z *= s);
        c
    }

    pub fn from_coefficients(grid: PeriodicGrid, coef: &[C64]) -> Result<Self> {
        if coef.len() != grid.n() {
            return Err(Error::GridMismatch(coef.len(), grid.n()));
        }
        let mut v = coef.to_vec();
        ifft(&mut v);
        Ok(GridFunction { grid, values: v })
    }

    pub fn apply_multiplier(&self, mult: &[C64]) -> GridFunction {
        let mut c = self.values.clone();
        fft(&mut c);
        let s = 1.0 / self.grid.n() as f64;
        for (z, m) in c.iter_mut().zip(mult) {
            *z *= m * s;
        }
        ifft(&mut c);
        GridFunction { grid: self.grid, values: c }
    }

    pub fn norm(&self) -> f64 {
        l2_inner(self, self).map(|z| z.re.max(0.0).sqrt()).unwrap_or(0.0)
    }

    pub fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(self.grid.n(), other.grid.n()));
        }
        Ok(())
    }
}

pub fn sample<F: Fn(f64) -> C64>(f: F, g: PeriodicGrid) -> GridFunction {
    GridFunction { grid: g, values: g.nodes().into_iter().map(f).collect() }
}

pub fn sample_real<F: Fn(f64) -> f64>(f: F, g: PeriodicGrid) -> GridFunction {
    sample(|x| C64::new(f(x), 0.0), g)
}

pub fn derivative(u: &GridFunction, m: u32) -> Result<GridFunction> {
    if m == 0 {
        return Err(Error::InvalidParameter("derivative order must be at least 1".into()));
    }
    Ok(u.apply_multiplier(&u.grid.derivative_multiplier(m)))
}

/// Rectangle-rule pairing `(2π/n) Σ u_j conj(v_j)`.
pub fn l2_inner(u: &GridFunction, v: &GridFunction) -> Result<C64> {
    u.check_same_grid(v)?;
    let s: C64 = u.values.iter().zip(&v.values).map(|(a, b)| a * b.conj()).sum();
    Ok(s * u.grid.spacing())
}

/// `(2π Σ_k (1+k²)^s |û_k|²)^{1/2}`.
pub fn sobolev_norm(u: &GridFunction, s: f64) -> f64 {
    sobolev_norm_shifted(u, s, 0.0)
}

/// Sobolev norm with weight `(1 + k² + shift)^s`; a y-mode of frequency `m`
/// uses `shift = m²`.
pub fn sobolev_norm_shifted(u: &GridFunction, s: f64, shift: f64) -> f64 {
    let c = u.coefficients();
    let sum: f64 = c
        .iter()
        .zip(u.grid.freqs())
        .map(|(z, k)| (1.0 + (k * k) as f64 + shift).powf(s) * z.norm_sqr())
        .sum();
    (2.0 * PI * sum).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trig_poly(g: PeriodicGrid, coef: &[(i64, C64)]) -> GridFunction {
        sample(|x| coef.iter().map(|&(k, c)| c * C64::new(0.0, k as f64 * x).exp()).sum(), g)
    }

    #[test]
    fn grid_construction() {
        let g = make_grid(8).unwrap();
        assert!((g.node(2) - PI / 2.0).abs() < 1e-15);
        assert!((g.node(7) - 7.0 * PI / 4.0).abs() < 1e-15);
        assert!(make_grid(7).is_err());
        assert!(make_grid(6).is_err());
        let g = make_grid(512).unwrap();
        let f = g.freqs();
        assert_eq!(*f.iter().min().unwrap(), -256);
        assert_eq!(*f.iter().max().unwrap(), 255);
    }

    #[test]
    fn sampling() {
        let g = make_grid(8).unwrap();
        let s = sample_real(f64::sin, g);
        let r = 0.5f64.sqrt();
        let want = [0.0, r, 1.0, r, 0.0, -r, -1.0, -r];
        for (a, b) in s.values.iter().zip(want) {
            assert!((a.re - b).abs() < 1e-15 && a.im == 0.0);
        }
        let ones = sample_real(|_| 1.0, g);
        assert!(ones.values.iter().all(|z| *z == C64::new(1.0, 0.0)));
    }

    #[test]
    fn derivatives_of_pure_modes() {
        let g = make_grid(64).unwrap();
        let u = sample_real(f64::sin, g);
        let du = derivative(&u, 1).unwrap();
        for (x, d) in g.nodes().iter().zip(&du.values) {
            assert!((d - C64::new(x.cos(), 0.0)).norm() < 1e-12);
        }
        let g = make_grid(16).unwrap();
        let e3 = sample(|x| C64::new(0.0, 3.0 * x).exp(), g);
        let d2 = derivative(&e3, 2).unwrap();
        for (a, b) in d2.values.iter().zip(&e3.values) {
            assert!((a + 9.0 * b).norm() < 1e-12);
        }
        for k in -31i64..32 {
            let g = make_grid(64).unwrap();
            let u = sample(|x| C64::new(0.0, k as f64 * x).exp(), g);
            let d = derivative(&u, 1).unwrap();
            for (a, b) in d.values.iter().zip(&u.values) {
                assert!((a - C64::new(0.0, k as f64) * b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn inner_products() {
        let g = make_grid(32).unwrap();
        let one = sample_real(|_| 1.0, g);
        assert!((l2_inner(&one, &one).unwrap().re - 2.0 * PI).abs() < 1e-13);
        let s = sample_real(f64::sin, g);
        let c = sample_real(f64::cos, g);
        assert!(l2_inner(&s, &c).unwrap().norm() < 1e-14);
        let e = sample(|x| C64::new(0.0, x).exp(), g);
        assert!((l2_inner(&e, &e).unwrap() - 2.0 * PI).norm() < 1e-13);
        let other = GridFunction::zeros(make_grid(16).unwrap());
        assert!(l2_inner(&one, &other).is_err());
    }

    #[test]
    fn sobolev_examples() {
        let g = make_grid(32).unwrap();
        let one = sample_real(|_| 1.0, g);
        assert!((sobolev_norm(&one, 2.0) - (2.0 * PI).sqrt()).abs() < 1e-13);
        let e3 = sample(|x| C64::new(0.0, 3.0 * x).exp(), g);
        assert!((sobolev_norm(&e3, 1.0) - (20.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn d2_matrix_matches_multiplier() {
        let g = make_grid(16).unwrap();
        let d2 = g.d2_matrix();
        let u = sample(|x| C64::new((2.0 * x).cos(), (5.0 * x).sin()), g);
        let v = derivative(&u, 2).unwrap();
        for i in 0..16 {
            let s: C64 = (0..16).map(|j| u.values[j] * d2[i * 16 + j]).sum();
            assert!((s - v.values[i]).norm() < 1e-11);
        }
    }

    fn coef_strategy() -> impl Strategy<Value = Vec<(i64, C64)>> {
        prop::collection::vec((-16i64..=16, -1.0f64..1.0, -1.0f64..1.0), 1..8)
            .prop_map(|v| v.into_iter().map(|(k, a, b)| (k, C64::new(a, b))).collect())
    }

    proptest! {
        #[test]
        fn derivative_matches_symbolic(coef in coef_strategy()) {
            let g = make_grid(64).unwrap();
            let u = trig_poly(g, &coef);
            let d = derivative(&u, 1).unwrap();
            let want = sample(|x| coef.iter().map(|&(k, c)| C64::new(0.0, k as f64) * c * C64::new(0.0, k as f64 * x).exp()).sum(), g);
            for (a, b) in d.values.iter().zip(&want.values) {
                prop_assert!((a - b).norm() < 1e-11);
            }
        }

        #[test]
        fn parseval_and_composition(coef in coef_strategy()) {
            let g = make_grid(64).unwrap();
            let u = trig_poly(g, &coef);
            let ip = l2_inner(&u, &u).unwrap();
            prop_assert!(ip.re >= 0.0 && ip.im.abs() < 1e-12 * (1.0 + ip.re));
            let s0 = sobolev_norm(&u, 0.0);
            prop_assert!((ip.re - s0 * s0).abs() <= 1e-12 * ip.re.max(1e-300));
            let direct: f64 = 2.0 * PI * u.coefficients().iter().map(|z| z.norm_sqr()).sum::<f64>();
            prop_assert!((ip.re - direct).abs() <= 1e-12 * direct.max(1e-300));
            let dd = derivative(&derivative(&u, 1).unwrap(), 1).unwrap();
            let d2 = derivative(&u, 2).unwrap();
            for (a, b) in dd.values.iter().zip(&d2.values) {
                prop_assert!((a - b).norm() < 1e-10);
            }
        }

        #[test]
        fn sobolev_matches_frequency_sum(coef in coef_strategy(), s in 0.0f64..3.0) {
            let g = make_grid(64).unwrap();
            let u = trig_poly(g, &coef);
            let mut acc = std::collections::BTreeMap::<i64, C64>::new();
            for &(k, c) in &coef {
                *acc.entry(k).or_insert(C64::new(0.0, 0.0)) += c;
            }
            let want: f64 = acc.iter().map(|(k, c)| (1.0 + (k * k) as f64).powf(s) * c.norm_sqr()).sum::<f64>();
            let want = (2.0 * PI * want).sqrt();
            prop_assert!((sobolev_norm(&u, s) - want).abs() <= 1e-10 * want.max(1e-300));
        }
    }
}
