//! The reduced stationary problem `-u'' + iqWu - βu = f` on the circle.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutoff::step_jet;
use crate::error::{Error, Point, Result};
use crate::fit::{fit_loglog, logspace, ExponentFit};
use crate::grid::{fft, ifft, wrap, GridFunction, PeriodicGrid};
use crate::jet::Jet;
use crate::linalg::{sigma_min_from_lu, OperatorMatrix};
use crate::profiles::DampingProfile;

pub const DEFAULT_EPS1: f64 = 0.1;
pub const DEFAULT_EPS2: f64 = 0.1;
pub const DEFAULT_MARGIN: f64 = 10.0;
const INVIT_TOL: f64 = 1e-12;
const INVIT_MAX: usize = 3000;

#[derive(Debug, Clone)]
pub struct StationaryProblem {
    pub profile: DampingProfile,
    pub q: f64,
    pub beta: f64,
    pub grid: PeriodicGrid,
}

impl StationaryProblem {
    pub fn new(profile: DampingProfile, q: f64, beta: f64, grid: PeriodicGrid) -> Result<Self> {
        if !(q > 0.0) {
            return Err(Error::InvalidParameter(format!("q must be positive, got {q}")));
        }
        Ok(StationaryProblem { profile, q, beta, grid })
    }

    fn point(&self) -> Point {
        Point::q_beta(self.q, self.beta)
    }
}

/// `H = -D² + iq·diag(W)`; shifted copies give `P = H - β`.
pub struct Assembler {
    pub grid: PeriodicGrid,
    pub q: f64,
    pub w: Vec<f64>,
    base: Mat<C64>,
}

impl Assembler {
    pub fn new(profile: &DampingProfile, q: f64, grid: PeriodicGrid) -> Self {
        let n = grid.n();
        let d2 = grid.d2_matrix();
        let w = profile.sample(grid);
        let base = Mat::from_fn(n, n, |i, j| {
            let mut z = C64::new(-d2[i * n + j], 0.0);
            if i == j {
                z.im += q * w[i];
            }
            z
        });
        Assembler { grid, q, w, base }
    }

    pub fn operator(&self, beta: f64) -> OperatorMatrix {
        let mut m = self.base.clone();
        for i in 0..self.grid.n() {
            m[(i, i)].re -= beta;
        }
        OperatorMatrix { m }
    }

    pub fn base(&self) -> OperatorMatrix {
        OperatorMatrix { m: self.base.clone() }
    }

    /// `1/σ_min(H - β)` by inverse iteration, with dense SVD as fallback.
    pub fn norm_at(&self, beta: f64) -> Result<f64> {
        let p = self.operator(beta);
        let (s, ok) = sigma_min_from_lu(&p.lu(), p.dim(), INVIT_TOL, INVIT_MAX);
        let s = if ok && s > 0.0 { s } else { p.sigma_min()? };
        norm_from_sigma(s, &p).map_err(|e| e.at(Point::q_beta(self.q, beta)))
    }

    fn rough_norm_at(&self, beta: f64) -> f64 {
        let p = self.operator(beta);
        let (s, _) = sigma_min_from_lu(&p.lu(), p.dim(), 1e-6, 60);
        if s > 0.0 {
            1.0 / s
        } else {
            f64::INFINITY
        }
    }
}

fn norm_from_sigma(s: f64, p: &OperatorMatrix) -> Result<f64> {
    let scale = p.max_abs();
    if !(s > 1e-14 * scale) {
        return Err(Error::Singular { at: Point::default(), cond: scale / s.max(f64::MIN_POSITIVE) });
    }
    Ok(1.0 / s)
}

pub fn assemble(sp: &StationaryProblem) -> OperatorMatrix {
    Assembler::new(&sp.profile, sp.q, sp.grid).operator(sp.beta)
}

pub fn solve(p: &OperatorMatrix, f: &GridFunction) -> Result<GridFunction> {
    if p.dim() != f.grid.n() {
        return Err(Error::GridMismatch(p.dim(), f.grid.n()));
    }
    Ok(GridFunction { grid: f.grid, values: p.solve(&f.values)? })
}

pub fn solve_problem(sp: &StationaryProblem, f: &GridFunction) -> Result<GridFunction> {
    solve(&assemble(sp), f).map_err(|e| e.at(sp.point()))
}

/// `‖P^{-1}‖_{L²→L²}` from the dense singular values.
pub fn resolvent_norm(sp: &StationaryProblem) -> Result<f64> {
    let p = assemble(sp);
    norm_from_sigma(p.sigma_min()?, &p).map_err(|e| e.at(sp.point()))
}

/// Same quantity by shifted inverse iteration.
pub fn resolvent_norm_iterative(sp: &StationaryProblem) -> Result<f64> {
    let p = assemble(sp);
    let (s, ok) = p.sigma_min_inverse_iteration(INVIT_TOL, INVIT_MAX);
    if !ok {
        return Err(Error::Numeric { at: sp.point(), msg: "inverse iteration did not converge".into() });
    }
    norm_from_sigma(s, &p).map_err(|e| e.at(sp.point()))
}

pub fn beta_sweep(
    profile: &DampingProfile,
    q: f64,
    betas: &[f64],
    grid: PeriodicGrid,
) -> Result<Vec<(f64, f64)>> {
    let a = Assembler::new(profile, q, grid);
    betas.par_iter().map(|&b| a.norm_at(b).map(|r| (b, r))).collect()
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if (b - a).abs() <= 1e-13 * b.abs().max(1.0) {
            break;
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Maximize the resolvent norm over `β ∈ [eps2, q²]`: log-spaced scan plus
/// the real parts of the least-damped eigenvalues of `H`, refined by
/// golden-section search.
pub fn worst_beta(
    profile: &DampingProfile,
    q: f64,
    grid: PeriodicGrid,
    eps2: f64,
) -> Result<(f64, f64)> {
    let a = Assembler::new(profile, q, grid);
    let hi = q * q;
    let lo = eps2.min(hi);
    let scan = logspace(lo, hi, 64);
    let eig = a
        .base()
        .m
        .eigenvalues()
        .map_err(|e| Error::Numeric { at: Point::q_beta(q, f64::NAN), msg: format!("{e:?}") })?;
    let mut modes: Vec<C64> = eig.into_iter().filter(|z| z.re >= lo && z.re <= hi).collect();
    modes.sort_by(|x, y| x.im.abs().total_cmp(&y.im.abs()));
    modes.truncate(8);

    let mut brackets: Vec<(f64, f64, f64)> = Vec::new();
    let scan_vals: Vec<f64> = scan.par_iter().map(|&b| a.rough_norm_at(b)).collect();
    for i in 0..scan.len() {
        let l = scan[i.saturating_sub(1)];
        let r = scan[(i + 1).min(scan.len() - 1)];
        brackets.push((l, r, scan_vals[i]));
    }
    for z in &modes {
        let w = 2.0 * z.im.abs() + 1e-9 * z.re.abs().max(1.0);
        let v = a.rough_norm_at(z.re);
        brackets.push(((z.re - w).max(lo), (z.re + w).min(hi), v));
    }
    brackets.sort_by(|x, y| y.2.total_cmp(&x.2));
    brackets.truncate(4);
    let refined: Vec<(f64, f64)> = brackets
        .par_iter()
        .map(|&(l, r, _)| golden_max(|b| a.rough_norm_at(b), l, r, 80))
        .collect();
    let (b, _) = refined.into_iter().fold((lo, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let norm = a.norm_at(b)?;
    Ok((b, norm))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeNorm {
    pub k: i64,
    pub beta: f64,
    pub norm: f64,
    /// `false` when the value is an analytic upper bound.
    pub computed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Resolvent2d {
    pub norm: f64,
    pub k_at_max: i64,
    pub beta_at_max: f64,
    pub modes: Vec<ModeNorm>,
    /// Undamped resonance: some `β_k` makes `P` singular.
    pub resonant: bool,
}

/// Norm of the full 2D resolvent: the largest 1D resolvent norm over y-modes
/// `k`, each taken at `β = q² − k²`.
///
/// Modes with `k² > q² + margin` are bounded by `1/(k² − q²)`. Modes with
/// `β > (n/2)² + margin` sit above the discrete spectrum of `-D²` and use
/// `1/(β − (n/2)²)`.
pub fn resolvent_2d_norm(
    profile: &DampingProfile,
    q: f64,
    grid: PeriodicGrid,
    margin: f64,
) -> Result<Resolvent2d> {
    if !(margin >= 0.0) {
        return Err(Error::InvalidParameter(format!("margin must be nonnegative, got {margin}")));
    }
    let a = Assembler::new(profile, q, grid);
    let top = ((grid.n() / 2) as f64).powi(2);
    let kmax = (q * q + margin).sqrt().floor() as i64;
    let mut exact = Vec::new();
    let mut modes = Vec::new();
    for k in 0..=kmax {
        let beta = q * q - (k * k) as f64;
        if beta > top + margin {
            modes.push(ModeNorm { k, beta, norm: 1.0 / (beta - top), computed: false });
        } else {
            exact.push((k, beta));
        }
    }
    let mut resonant = false;
    let computed: Vec<Result<ModeNorm>> = exact
        .par_iter()
        .map(|&(k, beta)| match a.norm_at(beta) {
            Ok(norm) => Ok(ModeNorm { k, beta, norm, computed: true }),
            Err(Error::Singular { .. }) => Ok(ModeNorm { k, beta, norm: f64::INFINITY, computed: true }),
            Err(e) => Err(e.at(Point { q: Some(q), beta: Some(beta), k: Some(k), h: None })),
        })
        .collect();
    for m in computed {
        let m = m?;
        resonant |= m.norm.is_infinite();
        modes.push(m);
    }
    let kt = kmax + 1;
    modes.push(ModeNorm { k: kt, beta: q * q - (kt * kt) as f64, norm: 1.0 / ((kt * kt) as f64 - q * q), computed: false });
    modes.sort_by_key(|m| m.k);
    let best = modes.iter().fold(&modes[0], |b, m| if m.norm > b.norm { m } else { b });
    Ok(Resolvent2d { norm: best.norm, k_at_max: best.k, beta_at_max: best.beta, resonant, modes: modes.clone() })
}

/// Move `q` so that some integer `k` hits the worst `β` of the 1D problem
/// exactly: `q' = (k*² + β*)^{1/2}` with `k* = ⌊(q² − β*)^{1/2}⌋`.
pub fn snap_q(profile: &DampingProfile, q: f64, grid: PeriodicGrid, eps2: f64) -> Result<f64> {
    let mut qs = q;
    for _ in 0..2 {
        let (b, _) = worst_beta(profile, qs, grid, eps2)?;
        let k = (q * q - b).max(0.0).sqrt().floor();
        qs = (k * k + b).sqrt();
    }
    Ok(qs)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DampingCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub identity_residual: f64,
}

/// `∫W|u|² ≤ q^{-1}∫|fu|` together with `Im⟨Pu,u⟩ = q∫W|u|²`.
pub fn damping_identity_check(sp: &StationaryProblem, u: &GridFunction, f: &GridFunction) -> Result<DampingCheck> {
    u.check_same_grid(f)?;
    let a = Assembler::new(&sp.profile, sp.q, sp.grid);
    let p = a.operator(sp.beta);
    let pu = p.apply(&u.values);
    let dx = sp.grid.spacing();
    let pu_u: C64 = pu.iter().zip(&u.values).map(|(a, b)| a * b.conj()).sum::<C64>() * dx;
    let wu2: f64 = a.w.iter().zip(&u.values).map(|(w, z)| w * z.norm_sqr()).sum::<f64>() * dx;
    let fu: f64 = f.values.iter().zip(&u.values).map(|(a, b)| a.norm() * b.norm()).sum::<f64>() * dx;
    let scale = pu_u.norm() + sp.q * wu2;
    let identity_residual = if scale > 0.0 { (pu_u.im - sp.q * wu2).abs() / scale } else { 0.0 };
    let rhs = fu / sp.q;
    Ok(DampingCheck { lhs: wu2, rhs, slack: rhs - wu2, identity_residual })
}

/// The multiplier `b_{ε₁}`: `cos(πx/(2(σ+ε₁)))` on `|x̃| < σ + ε₁/2`,
/// zero beyond `σ + ε₁`.
pub fn b_eps1_jet(x: f64, sigma: f64, eps1: f64, degree: usize) -> Jet {
    let xt = Jet::variable(wrap(x), degree);
    let edge = sigma + eps1;
    if xt.value().abs() >= edge {
        return Jet::constant(0.0, degree);
    }
    let c = xt.scale(PI / (2.0 * edge)).cos();
    let t = xt.abs().scale(-1.0).add_const(edge).scale(2.0 / eps1);
    c * step_jet(&t)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowEnergyReport {
    pub gradient_term: f64,
    pub potential_term: f64,
    pub source_term: f64,
    /// `q Im∫b (Wu)ū` for the interpolants; zero in the continuum.
    pub aliasing_term: f64,
    pub identity_residual: f64,
    pub u_norm: f64,
    pub f_norm: f64,
    pub constant: f64,
}

/// Minimum refinement factor of the quadrature grid for the multiplier identity.
pub const LOW_ENERGY_REFINE: usize = 32;

/// Refinement so that the fine spacing is at most `ε₁/400`.
fn refine_factor(n: usize, eps1: f64) -> usize {
    let want = (2.0 * PI * 400.0 / (eps1 * n as f64)).ceil() as usize;
    want.max(LOW_ENERGY_REFINE)
}

fn interpolate(values: &[C64], factor: usize) -> (Vec<C64>, Vec<C64>) {
    let n = values.len();
    let m = n * factor;
    let mut c = values.to_vec();
    fft(&mut c);
    let mut v = vec![C64::new(0.0, 0.0); m];
    for j in 0..n / 2 {
        v[j] = c[j] / n as f64;
    }
    for j in n / 2 + 1..n {
        v[m - n + j] = c[j] / n as f64;
    }
    let nyq = c[n / 2] / (2.0 * n as f64);
    v[n / 2] = nyq;
    v[m - n / 2] = nyq;
    let mut dv: Vec<C64> = v
        .iter()
        .enumerate()
        .map(|(j, z)| {
            let k = if j < m / 2 { j as f64 } else { j as f64 - m as f64 };
            z * C64::new(0.0, k)
        })
        .collect();
    ifft(&mut v);
    ifft(&mut dv);
    (v, dv)
}

/// Solve and assemble the terms of the multiplier identity
/// `∫b|u'|² + ∫(−b''/2 − βb)|u|² = Re∫ b f ū`.
///
/// The integrals are taken over the trigonometric interpolants on a refined
/// grid, since `b_{ε₁}` is not resolved at the solver's grid spacing.
pub fn low_energy_certificate(
    profile: &DampingProfile,
    q: f64,
    beta: f64,
    eps1: f64,
    grid: PeriodicGrid,
    f: &GridFunction,
) -> Result<LowEnergyReport> {
    let sigma = profile.sigma;
    let limit = PI * PI / (16.0 * (sigma + eps1).powi(2));
    if !(beta < limit) {
        return Err(Error::Precondition(format!(
            "beta = {beta} must be below π²/(16(σ+ε₁)²) = {limit}"
        )));
    }
    let sp = StationaryProblem::new(profile.clone(), q, beta, grid)?;
    let u = solve_problem(&sp, f)?;
    let w = profile.sample(grid);
    let wu: Vec<C64> = u.values.iter().zip(&w).map(|(z, w)| z * *w).collect();
    let factor = refine_factor(grid.n(), eps1);
    let (ui, dui) = interpolate(&u.values, factor);
    let (fi, _) = interpolate(&f.values, factor);
    let (wui, _) = interpolate(&wu, factor);
    let m = grid.n() * factor;
    let dx = 2.0 * PI / m as f64;
    let (mut g, mut p, mut s, mut al) = (0.0, 0.0, 0.0, 0.0);
    for j in 0..m {
        let x = 2.0 * PI * j as f64 / m as f64;
        let b = b_eps1_jet(x, sigma, eps1, 2);
        let (b0, b2) = (b.value(), b.deriv(2));
        if b0 == 0.0 && b2 == 0.0 {
            continue;
        }
        g += b0 * dui[j].norm_sqr();
        p += (-b2 / 2.0 - beta * b0) * ui[j].norm_sqr();
        s += b0 * (fi[j] * ui[j].conj()).re;
        al += b0 * (wui[j] * ui[j].conj()).im;
    }
    let (g, p, s, al) = (g * dx, p * dx, s * dx, q * al * dx);
    let scale = (g.abs() + p.abs()).max(s.abs());
    let identity_residual = if scale > 0.0 { (g + p - s - al).abs() / scale } else { 0.0 };
    let u_norm = u.norm();
    let f_norm = f.norm();
    Ok(LowEnergyReport {
        gradient_term: g,
        potential_term: p,
        source_term: s,
        aliasing_term: al,
        identity_residual,
        u_norm,
        f_norm,
        constant: u_norm / f_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub tau: f64,
    pub gamma: u32,
}

/// Split of `[ε₂, q²]` into the semiclassical regimes with assigned `(τ, γ)`.
pub fn regime_table(q: f64, tau_min: f64, eps2: f64) -> Result<Vec<Regime>> {
    if !(tau_min > 0.5 && tau_min <= 1.0) {
        return Err(Error::InvalidParameter(format!("tau_min must lie in (1/2, 1], got {tau_min}")));
    }
    let t1 = q.powf(tau_min);
    let mut out = vec![Regime { beta_lo: eps2, beta_hi: t1, tau: tau_min, gamma: 2 }];
    if 3.0 * tau_min >= 2.0 {
        out.push(Regime { beta_lo: t1 / 2.0, beta_hi: q * q, tau: 1.0, gamma: 1 });
    } else {
        let t3 = q.powf(3.0 * tau_min);
        out.push(Regime { beta_lo: t1 / 2.0, beta_hi: t3, tau: 3.0 * tau_min, gamma: 2 });
        out.push(Regime { beta_lo: t3 / 2.0, beta_hi: q * q, tau: 1.0, gamma: 1 });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BetaStrategy {
    /// 2D norm over y-modes with the given margin.
    Modes { margin: f64 },
    /// Worst β of the 1D problem on `[ε₂, q²]`.
    Worst { eps2: f64 },
    /// Largest norm over a fixed β list.
    List(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridRule {
    Fixed(usize),
    /// `n = max(min, mult·⌈q^{1/2}⌉)`, rounded up to even.
    Scaled { mult: usize, min: usize },
}

impl GridRule {
    pub fn grid_for(&self, q: f64) -> Result<PeriodicGrid> {
        let n = match *self {
            GridRule::Fixed(n) => n,
            GridRule::Scaled { mult, min } => (mult * q.sqrt().ceil() as usize).max(min),
        };
        PeriodicGrid::new(n + n % 2)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolventPoint {
    pub q: f64,
    pub beta: f64,
    pub k: Option<i64>,
    pub norm: f64,
}

pub fn resolvent_measure(
    profile: &DampingProfile,
    q: f64,
    grid: PeriodicGrid,
    strategy: &BetaStrategy,
) -> Result<ResolventPoint> {
    match strategy {
        BetaStrategy::Modes { margin } => {
            let r = resolvent_2d_norm(profile, q, grid, *margin)?;
            Ok(ResolventPoint { q, beta: r.beta_at_max, k: Some(r.k_at_max), norm: r.norm })
        }
        BetaStrategy::Worst { eps2 } => {
            let (beta, norm) = worst_beta(profile, q, grid, *eps2)?;
            Ok(ResolventPoint { q, beta, k: None, norm })
        }
        BetaStrategy::List(list) => {
            let v = beta_sweep(profile, q, list, grid)?;
            let (beta, norm) = v.into_iter().fold((f64::NAN, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            Ok(ResolventPoint { q, beta, k: None, norm })
        }
    }
}

/// Slope of `log(measure)` against `log q`.
pub fn fit_resolvent_exponent(
    profile: &DampingProfile,
    q_list: &[f64],
    grid: GridRule,
    strategy: &BetaStrategy,
    snap: bool,
) -> Result<(ExponentFit, Vec<ResolventPoint>)> {
    if q_list.len() < 5 {
        return Err(Error::InvalidParameter(format!("need at least 5 q values, got {}", q_list.len())));
    }
    let mut pts = Vec::with_capacity(q_list.len());
    for &q0 in q_list {
        let g = grid.grid_for(q0)?;
        let q = if snap { snap_q(profile, q0, g, DEFAULT_EPS2)? } else { q0 };
        pts.push(resolvent_measure(profile, q, g, strategy)?);
    }
    let qs: Vec<f64> = pts.iter().map(|p| p.q).collect();
    let ns: Vec<f64> = pts.iter().map(|p| p.norm).collect();
    Ok((fit_loglog(&qs, &ns)?, pts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample, sample_real};
    use crate::linalg::start_vector;

    fn g(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(n).unwrap()
    }

    #[test]
    fn assembled_structure() {
        let grid = g(32);
        let sp = StationaryProblem::new(DampingProfile::strip(1.0, 0.2).unwrap(), 7.0, 0.3, grid).unwrap();
        let p = assemble(&sp);
        let im = p.imaginary_part();
        let w = sp.profile.sample(grid);
        for i in 0..32 {
            for j in 0..32 {
                let want = if i == j { 7.0 * w[i] } else { 0.0 };
                assert!((im.get(i, j) - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
        let re = p.hermitian_part();
        let u = sample_real(|x| (3.0 * x).cos(), grid);
        let r = re.apply(&u.values);
        for (a, b) in r.iter().zip(&u.values) {
            assert!((a - b * (9.0 - 0.3)).norm() < 1e-10);
        }
    }

    #[test]
    fn constant_damping_eigenvalues() {
        let grid = g(16);
        let sp = StationaryProblem::new(DampingProfile::constant(0.5).unwrap(), 3.0, 1.0, grid).unwrap();
        let p = assemble(&sp);
        for k in -7i64..8 {
            let e = sample(|x| C64::new(0.0, k as f64 * x).exp(), grid);
            let r = p.apply(&e.values);
            let lam = C64::new((k * k) as f64 - 1.0, 1.5);
            for (a, b) in r.iter().zip(&e.values) {
                assert!((a - lam * b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn solve_examples() {
        let grid = g(32);
        let sp = StationaryProblem::new(DampingProfile::constant(0.0).unwrap(), 1.0, -1.0, grid).unwrap();
        let one = sample_real(|_| 1.0, grid);
        let u = solve_problem(&sp, &one).unwrap();
        assert!(u.values.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-12));
        let sp = StationaryProblem::new(DampingProfile::constant(1.0).unwrap(), 10.0, 0.5, grid).unwrap();
        let f = sample(|x| C64::new(0.0, x).exp(), grid);
        let u = solve_problem(&sp, &f).unwrap();
        let d = C64::new(0.5, 10.0);
        for (a, b) in u.values.iter().zip(&f.values) {
            assert!((a - b / d).norm() < 1e-12);
        }
        let sp = StationaryProblem::new(DampingProfile::strip(1.0, 0.0).unwrap(), 30.0, 4.0, grid).unwrap();
        let f = GridFunction::new(grid, start_vector(32, 9)).unwrap();
        let u = solve_problem(&sp, &f).unwrap();
        let pu = assemble(&sp).apply(&u.values);
        let res: f64 = pu.iter().zip(&f.values).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(res / f.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() <= 1e-9);
    }

    #[test]
    fn norm_examples() {
        let grid = g(32);
        let sp = StationaryProblem::new(DampingProfile::constant(0.0).unwrap(), 1.0, -1.0, grid).unwrap();
        assert!((resolvent_norm(&sp).unwrap() - 1.0).abs() < 1e-12);
        let sp = StationaryProblem::new(DampingProfile::constant(1.0).unwrap(), 10.0, 0.5, grid).unwrap();
        assert!((resolvent_norm(&sp).unwrap() - 100.25f64.powf(-0.5)).abs() < 1e-12);
        let sp = StationaryProblem::new(DampingProfile::constant(0.0).unwrap(), 1.0, 4.0, grid).unwrap();
        assert!(matches!(resolvent_norm(&sp), Err(Error::Singular { .. })));
    }

    #[test]
    fn svd_and_inverse_iteration_agree() {
        let sp = StationaryProblem::new(DampingProfile::strip(1.0, 0.0).unwrap(), 100.0, 1.0, g(128)).unwrap();
        let a = resolvent_norm(&sp).unwrap();
        let b = resolvent_norm_iterative(&sp).unwrap();
        assert!((a - b).abs() <= 1e-6 * a, "{a} {b}");
    }

    #[test]
    fn worst_beta_constant_damping() {
        // W ≡ c: ‖P^{-1}‖ = 1/min_k |k² − β + iqc|, maximal at β = k² with value 1/(qc)
        let grid = g(32);
        let p = DampingProfile::constant(0.2).unwrap();
        let (b, r) = worst_beta(&p, 5.0, grid, 0.1).unwrap();
        assert!((r - 1.0).abs() < 1e-9, "{b} {r}");
        assert!((b - b.round()).abs() < 1e-5 && (b.sqrt() - b.sqrt().round()).abs() < 1e-5);
        let sp = StationaryProblem::new(p, 5.0, -25.0, grid).unwrap();
        assert!(resolvent_norm(&sp).unwrap() <= r);
    }

    #[test]
    fn sweep_length() {
        let v = beta_sweep(&DampingProfile::strip(1.0, 0.0).unwrap(), 10.0, &[0.5, 1.0, 2.0, 3.5], g(32)).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v[2].0, 2.0);
    }

    #[test]
    fn two_dimensional_norm() {
        let r = resolvent_2d_norm(&DampingProfile::constant(0.0).unwrap(), 5.0, g(32), 10.0).unwrap();
        assert!(r.resonant && r.norm.is_infinite());
        let c = DampingProfile::constant(1.0).unwrap();
        let q = 6.3;
        let r = resolvent_2d_norm(&c, q, g(64), 10.0).unwrap();
        let mut want: f64 = 0.0;
        for k in 0..=7i64 {
            let beta = q * q - (k * k) as f64;
            let m = (-32i64..32).map(|j| C64::new((j * j) as f64 - beta, q).norm()).fold(f64::INFINITY, f64::min);
            want = want.max(1.0 / m);
        }
        assert!((r.norm - want).abs() < 1e-10 * want);
        let s = DampingProfile::strip(1.0, 0.0).unwrap();
        let grid = g(64);
        let r = resolvent_2d_norm(&s, 50.0, grid, 10.0).unwrap();
        let k = (50.0f64 * 0.9).round();
        let sp = StationaryProblem::new(s, 50.0, 2500.0 - k * k, grid).unwrap();
        assert!(r.norm >= resolvent_norm(&sp).unwrap() * (1.0 - 1e-9));
    }

    #[test]
    fn damping_identity() {
        let grid = g(64);
        let sp = StationaryProblem::new(DampingProfile::strip(1.0, 0.2).unwrap(), 40.0, 3.0, grid).unwrap();
        let f = GridFunction::new(grid, start_vector(64, 11)).unwrap();
        let u = solve_problem(&sp, &f).unwrap();
        let c = damping_identity_check(&sp, &u, &f).unwrap();
        assert!(c.identity_residual < 1e-12);
        assert!(c.slack >= -1e-8 * c.rhs);
        let sp0 = StationaryProblem::new(DampingProfile::constant(0.0).unwrap(), 40.0, -3.0, grid).unwrap();
        let u = solve_problem(&sp0, &f).unwrap();
        let c = damping_identity_check(&sp0, &u, &f).unwrap();
        assert_eq!(c.lhs, 0.0);
        assert!(c.identity_residual < 1e-12);
    }

    #[test]
    fn low_energy_identity_and_range() {
        let grid = g(128);
        let p = DampingProfile::strip(1.0, 0.0).unwrap();
        let f = sample_real(|x| (-wrap(x).powi(2) / 0.1).exp(), grid);
        let r = low_energy_certificate(&p, 50.0, 0.3, 0.1, grid, &f).unwrap();
        assert!(r.identity_residual < 1e-8, "{r:?}");
        assert!(r.constant > 0.0);
        let z = DampingProfile::constant(0.0).unwrap();
        let lim = PI * PI / (16.0 * 0.01);
        assert!(low_energy_certificate(&z, 1.0, lim + 1.0, 0.1, grid, &f).is_err());
    }

    #[test]
    fn b_eps1_plateaus() {
        let (s, e) = (1.0, 0.1);
        assert!((b_eps1_jet(0.3, s, e, 0).value() - (PI * 0.3 / 2.2).cos()).abs() < 1e-15);
        assert!((b_eps1_jet(1.04, s, e, 0).value() - (PI * 1.04 / 2.2).cos()).abs() < 1e-15);
        assert_eq!(b_eps1_jet(1.1, s, e, 0).value(), 0.0);
        assert_eq!(b_eps1_jet(2.0, s, e, 2).deriv(2), 0.0);
        assert!(b_eps1_jet(1.07, s, e, 0).value() >= 0.0);
    }

    #[test]
    fn regimes() {
        let r = regime_table(100.0, 0.875, 0.1).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!((r[0].tau, r[0].gamma, r[1].tau, r[1].gamma), (0.875, 2, 1.0, 1));
        assert!((r[0].beta_hi - 100f64.powf(0.875)).abs() < 1e-9);
        assert!((r[1].beta_lo - r[0].beta_hi / 2.0).abs() < 1e-9);
        let r = regime_table(100.0, 0.55, 0.1).unwrap();
        assert_eq!(r.len(), 3);
        assert!((r[1].tau - 1.65).abs() < 1e-12 && r[2].gamma == 1);
        assert_eq!(r[0].beta_lo, 0.1);
        assert_eq!(r[2].beta_hi, 1e4);
        for w in r.windows(2) {
            assert!(w[1].beta_lo <= w[0].beta_hi);
        }
        assert!(regime_table(100.0, 0.4, 0.1).is_err());
    }

    #[test]
    fn grid_rule() {
        assert_eq!(GridRule::Scaled { mult: 8, min: 128 }.grid_for(1e4).unwrap().n(), 800);
        assert_eq!(GridRule::Scaled { mult: 8, min: 128 }.grid_for(100.0).unwrap().n(), 128);
    }
}
