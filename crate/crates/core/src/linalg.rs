//! Dense complex operators on grid functions, backed by faer.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Point, Result};

/// Above this dimension, operator norms use power iteration.
pub const DENSE_SVD_LIMIT: usize = 1024;

#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub m: Mat<C64>,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| y.conj() * x).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(a: &mut [C64]) -> f64 {
    let s = norm(a);
    if s > 0.0 {
        a.iter_mut().for_each(|z| *z /= s);
    }
    s
}

/// Deterministic complex start vector for iterative methods.
pub fn start_vector(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<C64> =
        (0..n).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    normalize(&mut v);
    v
}

impl OperatorMatrix {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        OperatorMatrix { m: Mat::from_fn(n, n, f) }
    }

    pub fn from_row_major(n: usize, data: &[C64]) -> Self {
        Self::from_fn(n, |i, j| data[i * n + j])
    }

    pub fn from_real_row_major(n: usize, data: &[f64]) -> Self {
        Self::from_fn(n, |i, j| C64::new(data[i * n + j], 0.0))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { C64::new(1.0, 0.0) } else { zero() })
    }

    pub fn diagonal(d: &[C64]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { d[i] } else { zero() })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim();
        let col = Mat::from_fn(n, 1, |i, _| v[i]);
        let r = &self.m * &col;
        (0..n).map(|i| r[(i, 0)]).collect()
    }

    pub fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim();
        let col = Mat::from_fn(n, 1, |i, _| v[i]);
        let r = self.m.adjoint() * &col;
        (0..n).map(|i| r[(i, 0)]).collect()
    }

    pub fn matmul(&self, o: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix { m: &self.m * &o.m }
    }

    pub fn add(&self, o: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix { m: &self.m + &o.m }
    }

    pub fn sub(&self, o: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix { m: &self.m - &o.m }
    }

    pub fn scale(&self, s: C64) -> OperatorMatrix {
        let n = self.dim();
        Self::from_fn(n, |i, j| self.m[(i, j)] * s)
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix { m: self.m.adjoint().to_owned() }
    }

    /// Hermitian part `(M + M*)/2`.
    pub fn hermitian_part(&self) -> OperatorMatrix {
        let n = self.dim();
        Self::from_fn(n, |i, j| (self.m[(i, j)] + self.m[(j, i)].conj()) * 0.5)
    }

    /// `(M - M*)/(2i)`, so that `M = Re M + i Im M` with both Hermitian.
    pub fn imaginary_part(&self) -> OperatorMatrix {
        let n = self.dim();
        Self::from_fn(n, |i, j| (self.m[(i, j)] - self.m[(j, i)].conj()) / C64::new(0.0, 2.0))
    }

    /// Largest entry of `|M - M*|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim();
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                d = d.max((self.m[(i, j)] - self.m[(j, i)].conj()).norm());
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        let n = self.dim();
        let mut d: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                d = d.max(self.m[(i, j)].norm());
            }
        }
        d
    }

    pub fn frobenius(&self) -> f64 {
        self.m.norm_l2()
    }

    pub fn singular_values(&self) -> Result<Vec<f64>> {
        self.m
            .singular_values()
            .map_err(|e| Error::Numeric { at: Point::default(), msg: format!("SVD failed: {e:?}") })
    }

    pub fn sigma_min(&self) -> Result<f64> {
        Ok(*self.singular_values()?.last().unwrap())
    }

    /// Largest singular value: dense SVD up to `DENSE_SVD_LIMIT`, power
    /// iteration (relative tolerance 1e-8) beyond.
    pub fn norm2(&self) -> Result<f64> {
        if self.dim() <= DENSE_SVD_LIMIT {
            Ok(self.singular_values()?[0])
        } else {
            Ok(self.norm2_power(1e-8, 2000).0)
        }
    }

    /// Power iteration on `M*M`; returns (estimate, converged).
    pub fn norm2_power(&self, tol: f64, max_iter: usize) -> (f64, bool) {
        let n = self.dim();
        let s0 = start_vector(n, 17);
        let mut x = Mat::from_fn(n, 1, |i, _| s0[i]);
        let mut est = 0.0;
        for _ in 0..max_iter {
            let y = &self.m * &x;
            let z = self.m.adjoint() * &y;
            let ny = y.norm_l2();
            let nz = z.norm_l2();
            if nz == 0.0 {
                return (0.0, true);
            }
            let new = ny;
            x = Mat::from_fn(n, 1, |i, _| z[(i, 0)] / nz);
            if (new - est).abs() <= tol * new {
                return (new, true);
            }
            est = new;
        }
        (est, false)
    }

    pub fn lu(&self) -> PartialPivLu<C64> {
        self.m.partial_piv_lu()
    }

    /// `σ_min` by inverse iteration on `(M*M)^{-1}`; returns (estimate, converged).
    pub fn sigma_min_inverse_iteration(&self, tol: f64, max_iter: usize) -> (f64, bool) {
        let lu = self.lu();
        sigma_min_from_lu(&lu, self.dim(), tol, max_iter)
    }

    /// Hager–Higham estimate of the 1-norm condition number.
    pub fn condition_estimate(&self, lu: &PartialPivLu<C64>) -> f64 {
        let n = self.dim();
        let mut norm1: f64 = 0.0;
        for j in 0..n {
            norm1 = norm1.max((0..n).map(|i| self.m[(i, j)].norm()).sum());
        }
        let mut x = Mat::from_fn(n, 1, |_, _| C64::new(1.0 / n as f64, 0.0));
        let mut est: f64 = 0.0;
        for _ in 0..5 {
            let y = lu.solve(&x);
            let ny: f64 = (0..n).map(|i| y[(i, 0)].norm()).sum();
            if !ny.is_finite() {
                return f64::INFINITY;
            }
            if ny <= est {
                break;
            }
            est = ny;
            let xi = Mat::from_fn(n, 1, |i, _| {
                let v = y[(i, 0)];
                if v.norm() > 0.0 {
                    v / v.norm()
                } else {
                    C64::new(1.0, 0.0)
                }
            });
            let mut z = xi.clone();
            lu.solve_adjoint_in_place(&mut z);
            let (jmax, zmax) = (0..n)
                .map(|i| (i, z[(i, 0)].norm()))
                .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
            let zx: f64 = (0..n).map(|i| (z[(i, 0)].conj() * x[(i, 0)]).re).sum();
            if zmax <= zx {
                break;
            }
            x = Mat::from_fn(n, 1, |i, _| if i == jmax { C64::new(1.0, 0.0) } else { zero() });
        }
        norm1 * est
    }

    /// Solve `M u = f`, rejecting near-singular systems and large residuals.
    pub fn solve(&self, f: &[C64]) -> Result<Vec<C64>> {
        let n = self.dim();
        let lu = self.lu();
        let cond = self.condition_estimate(&lu);
        if !(cond < 1e14) {
            return Err(Error::Singular { at: Point::default(), cond });
        }
        let rhs = Mat::from_fn(n, 1, |i, _| f[i]);
        let x = lu.solve(&rhs);
        let u: Vec<C64> = (0..n).map(|i| x[(i, 0)]).collect();
        let r = self.apply(&u);
        let res: Vec<C64> = r.iter().zip(f).map(|(a, b)| a - b).collect();
        let nf = norm(f);
        let rel = if nf > 0.0 { norm(&res) / nf } else { norm(&res) };
        if !(rel <= 1e-9) {
            return Err(Error::Residual { at: Point::default(), residual: rel });
        }
        Ok(u)
    }
}

pub fn sigma_min_from_lu(lu: &PartialPivLu<C64>, n: usize, tol: f64, max_iter: usize) -> (f64, bool) {
    let s0 = start_vector(n, 29);
    let mut x = Mat::from_fn(n, 1, |i, _| s0[i]);
    let mut est = f64::INFINITY;
    for _ in 0..max_iter {
        let mut y = x.clone();
        lu.solve_in_place(&mut y);
        let ny = y.norm_l2();
        if !ny.is_finite() || ny == 0.0 {
            return (0.0, false);
        }
        let mut z = Mat::from_fn(n, 1, |i, _| y[(i, 0)] / ny);
        lu.solve_adjoint_in_place(&mut z);
        let nz = z.norm_l2();
        // ‖P^{-*} P^{-1} x‖ → σ_min^{-2}
        let new = 1.0 / (nz * ny).sqrt();
        x = Mat::from_fn(n, 1, |i, _| z[(i, 0)] / nz);
        if (new - est).abs() <= tol * new {
            return (new, true);
        }
        est = new;
    }
    (est, false)
}

/// Real-matrix exponential by degree-13 Padé scaling and squaring.
pub fn expm_real(a: &Mat<f64>) -> Result<Mat<f64>> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let mut norm1: f64 = 0.0;
    for j in 0..n {
        norm1 = norm1.max((0..n).map(|i| a[(i, j)].abs()).sum());
    }
    let s = if norm1 > THETA13 { (norm1 / THETA13).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(s);
    let a = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let comb = |c6: f64, c4: f64, c2: f64, c0: f64| {
        Mat::from_fn(n, n, |i, j| {
            c6 * a6[(i, j)] + c4 * a4[(i, j)] + c2 * a2[(i, j)] + if i == j { c0 } else { 0.0 }
        })
    };
    let u_inner = &a6 * &comb(B[13], B[11], B[9], 0.0) + comb(B[7], B[5], B[3], B[1]);
    let u = &a * &u_inner;
    let v = &a6 * &comb(B[12], B[10], B[8], 0.0) + comb(B[6], B[4], B[2], B[0]);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    if r.norm_l2().is_nan() {
        return Err(Error::Numeric { at: Point::default(), msg: "matrix exponential diverged".into() });
    }
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    dot(a, b)
}

pub fn vec_norm(a: &[C64]) -> f64 {
    norm(a)
}
