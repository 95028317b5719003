//! Time-domain damped waves on the 2-torus, one y-Fourier mode at a time.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_loglog, ExponentFit};
use crate::grid::{derivative, l2_inner, sobolev_norm_shifted, GridFunction, PeriodicGrid};
use crate::linalg::expm_real;
use crate::profiles::DampingProfile;

/// Eigenbasis condition above which the matrix exponential is used instead.
pub const EIGEN_COND_LIMIT: f64 = 1e12;

/// Eigendecompositions with a larger relative residual are rejected.
pub const EIGEN_RESIDUAL_LIMIT: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ModeState {
    pub k: i64,
    pub t: f64,
    pub v: GridFunction,
    pub vt: GridFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Auto,
    Eigen,
    Expm,
}

/// Propagator `e^{tG}` for `G = [[0, I], [∂ₓ² − k², −W]]`.
pub struct ModePropagator {
    pub k: i64,
    grid: PeriodicGrid,
    generator: Mat<f64>,
    eigen: Option<(Vec<C64>, Mat<C64>, PartialPivLu<C64>)>,
    /// Condition number of the eigenbasis, when computed.
    pub eigen_condition: Option<f64>,
    pub used_fallback: bool,
}

pub fn generator(profile: &DampingProfile, k: i64, grid: PeriodicGrid) -> Mat<f64> {
    let n = grid.n();
    let d2 = grid.d2_matrix();
    let w = profile.sample(grid);
    let kk = (k * k) as f64;
    Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, true) => 0.0,
        (true, false) => {
            if j - n == i {
                1.0
            } else {
                0.0
            }
        }
        (false, true) => d2[(i - n) * n + j] - if i - n == j { kk } else { 0.0 },
        (false, false) => {
            if i == j {
                -w[i - n]
            } else {
                0.0
            }
        }
    })
}

impl ModePropagator {
    pub fn new(profile: &DampingProfile, k: i64, grid: PeriodicGrid, method: Method) -> Result<Self> {
        let generator = generator(profile, k, grid);
        let mut p = ModePropagator { k, grid, generator, eigen: None, eigen_condition: None, used_fallback: false };
        if method == Method::Expm {
            p.used_fallback = true;
            return Ok(p);
        }
        let attempt = p.generator.eigen().ok().and_then(|e| {
            let u: Mat<C64> = Mat::from_fn(2 * grid.n(), 2 * grid.n(), |i, j| {
                let z = e.U()[(i, j)];
                C64::new(z.re, z.im)
            });
            let lam: Vec<C64> = (0..2 * grid.n())
                .map(|i| {
                    let z = e.S()[i];
                    C64::new(z.re, z.im)
                })
                .collect();
            let s = u.singular_values().ok()?;
            let bad = nearly_defective(&lam, &u) || eigen_residual(&p.generator, &lam, &u) > EIGEN_RESIDUAL_LIMIT;
            let cond = if bad { f64::INFINITY } else { s.first()? / s.last()? };
            Some((lam, u, cond))
        });
        match attempt {
            Some((lam, u, cond)) if cond.is_finite() && cond <= EIGEN_COND_LIMIT => {
                let lu = u.partial_piv_lu();
                p.eigen = Some((lam, u, lu));
                p.eigen_condition = Some(cond);
            }
            other => {
                p.eigen_condition = other.map(|o| o.2);
                if method == Method::Eigen {
                    return Err(Error::Numeric {
                        at: Default::default(),
                        msg: format!("eigenbasis condition {:?} above {EIGEN_COND_LIMIT:e}", p.eigen_condition),
                    });
                }
                p.used_fallback = true;
            }
        }
        Ok(p)
    }

    pub fn evolve(&self, v0: &GridFunction, v1: &GridFunction, t_list: &[f64]) -> Result<Vec<ModeState>> {
        v0.check_same_grid(v1)?;
        if v0.grid != self.grid {
            return Err(Error::GridMismatch(self.grid.n(), v0.grid.n()));
        }
        if t_list.first().is_some_and(|t| *t < 0.0) || t_list.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("times must be nonnegative and increasing".into()));
        }
        let n = self.grid.n();
        let x0: Vec<C64> = v0.values.iter().chain(&v1.values).copied().collect();
        let split = |x: Vec<C64>, t: f64| -> Result<ModeState> {
            Ok(ModeState {
                k: self.k,
                t,
                v: GridFunction::new(self.grid, x[..n].to_vec())?,
                vt: GridFunction::new(self.grid, x[n..].to_vec())?,
            })
        };
        match &self.eigen {
            Some((lam, u, lu)) => {
                let c = lu.solve(Mat::from_fn(2 * n, 1, |i, _| x0[i]));
                t_list
                    .iter()
                    .map(|&t| {
                        let e = Mat::from_fn(2 * n, 1, |i, _| (lam[i] * t).exp() * c[(i, 0)]);
                        let y = u * &e;
                        split((0..2 * n).map(|i| y[(i, 0)]).collect(), t)
                    })
                    .collect()
            }
            None => t_list
                .iter()
                .map(|&t| {
                    let e = expm_real(&Mat::from_fn(2 * n, 2 * n, |i, j| self.generator[(i, j)] * t))?;
                    let y: Vec<C64> = (0..2 * n)
                        .map(|i| (0..2 * n).map(|j| x0[j] * e[(i, j)]).sum())
                        .collect();
                    split(y, t)
                })
                .collect(),
        }
    }
}

/// Relative residual `‖GU − UΛ‖_F / (‖G‖_F ‖U‖_F)`.
fn eigen_residual(g: &Mat<f64>, lam: &[C64], u: &Mat<C64>) -> f64 {
    let m = lam.len();
    let gc: Mat<C64> = Mat::from_fn(m, m, |i, j| C64::new(g[(i, j)], 0.0));
    let gu = &gc * u;
    let r = Mat::from_fn(m, m, |i, j| gu[(i, j)] - u[(i, j)] * lam[j]);
    r.norm_l2() / (gc.norm_l2() * u.norm_l2()).max(f64::MIN_POSITIVE)
}

/// Nearly equal eigenvalues with nearly parallel eigenvectors: a Jordan
/// block that the condition number alone may not expose.
fn nearly_defective(lam: &[C64], u: &Mat<C64>) -> bool {
    let m = lam.len();
    let norms: Vec<f64> = (0..m).map(|j| (0..m).map(|i| u[(i, j)].norm_sqr()).sum::<f64>().sqrt()).collect();
    for a in 0..m {
        for b in a + 1..m {
            if (lam[a] - lam[b]).norm() > 1e-6 * lam[a].norm().max(1.0) {
                continue;
            }
            let dot: C64 = (0..m).map(|i| u[(i, a)].conj() * u[(i, b)]).sum();
            if dot.norm() > 0.99 * norms[a] * norms[b] {
                return true;
            }
        }
    }
    false
}

/// Exact semigroup evolution of one y-mode.
pub fn evolve_mode(
    profile: &DampingProfile,
    k: i64,
    v0: &GridFunction,
    v1: &GridFunction,
    t_list: &[f64],
) -> Result<(Vec<ModeState>, bool)> {
    let p = ModePropagator::new(profile, k, v0.grid, Method::Auto)?;
    Ok((p.evolve(v0, v1, t_list)?, p.used_fallback))
}

/// `½(‖∂ₓv‖² + k²‖v‖² + ‖∂ₜv‖²)`, with `‖∂ₓv‖² = ⟨−∂ₓ²v, v⟩` so the
/// Nyquist mode is counted consistently with the generator.
pub fn mode_energy(s: &ModeState) -> Result<f64> {
    let grad = -l2_inner(&derivative(&s.v, 2)?, &s.v)?.re;
    let kk = (s.k * s.k) as f64;
    Ok(0.5 * (grad + kk * s.v.norm().powi(2) + s.vt.norm().powi(2)))
}

pub fn total_energy(states: &[ModeState]) -> Result<f64> {
    if let Some(first) = states.first() {
        for s in states {
            first.v.check_same_grid(&s.v)?;
        }
    }
    states.iter().map(mode_energy).sum()
}

/// `‖v₀‖_{H²} + ‖v₁‖_{H¹}` for a y-mode of frequency `k`.
pub fn data_norm(k: i64, v0: &GridFunction, v1: &GridFunction) -> f64 {
    let kk = (k * k) as f64;
    sobolev_norm_shifted(v0, 2.0, kk) + sobolev_norm_shifted(v1, 1.0, kk)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayTrace {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub data_norm: f64,
}

impl DecayTrace {
    pub fn from_states(states: &[ModeState], data_norm: f64) -> Result<Self> {
        Ok(DecayTrace {
            times: states.iter().map(|s| s.t).collect(),
            energies: states.iter().map(mode_energy).collect::<Result<_>>()?,
            data_norm,
        })
    }

    pub fn is_monotone(&self, tol: f64) -> bool {
        self.energies.windows(2).all(|w| w[1] <= w[0] + tol)
    }

    /// `E^{1/2} / data_norm` per time.
    pub fn normalized(&self) -> Vec<f64> {
        self.energies.iter().map(|e| e.max(0.0).sqrt() / self.data_norm).collect()
    }

    /// First time at which `E ≤ factor · E(0)`.
    pub fn drop_time(&self, factor: f64) -> Option<f64> {
        let e0 = *self.energies.first()?;
        self.times.iter().zip(&self.energies).find(|(_, e)| **e <= factor * e0).map(|(t, _)| *t)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    pub alpha: f64,
    pub fit: ExponentFit,
    /// α on the early and late halves of the window (log scale).
    pub alpha_early: f64,
    pub alpha_late: f64,
    pub super_polynomial: bool,
}

fn alpha_on(t: &[f64], y: &[f64]) -> Result<ExponentFit> {
    let one_plus: Vec<f64> = t.iter().map(|t| 1.0 + t).collect();
    fit_loglog(&one_plus, y)
}

/// Fits `E^{1/2}/data_norm ≈ C (1+t)^{−α}` on the window.
pub fn fit_decay_exponent(trace: &DecayTrace, window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    let tmax = trace.times.last().copied().unwrap_or(0.0);
    if !(lo < hi) || lo < 0.0 || hi > tmax * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!("window ({lo}, {hi}) not inside the trace (0, {tmax})")));
    }
    let norm = trace.normalized();
    let (mut t, mut y) = (Vec::new(), Vec::new());
    for ((ti, ei), yi) in trace.times.iter().zip(&trace.energies).zip(&norm) {
        if *ti >= lo && *ti <= hi {
            if !(*ei > 0.0) {
                return Err(Error::DegenerateFit(format!("nonpositive energy {ei:e} at t = {ti}")));
            }
            t.push(*ti);
            y.push(*yi);
        }
    }
    let fit = alpha_on(&t, &y)?;
    let mid = ((1.0 + lo) * (1.0 + hi)).sqrt() - 1.0;
    let split = t.iter().position(|v| *v > mid).unwrap_or(t.len());
    let (alpha_early, alpha_late) = if split >= 2 && t.len() - split >= 2 {
        (-alpha_on(&t[..split], &y[..split])?.slope, -alpha_on(&t[split..], &y[split..])?.slope)
    } else {
        (-fit.slope, -fit.slope)
    };
    let super_polynomial = alpha_late > 1.0 && alpha_late > 1.5 * alpha_early.max(0.0);
    Ok(DecayFit { alpha: -fit.slope, fit, alpha_early, alpha_late, super_polynomial })
}

/// Default fit window `[T/4, T]`, `T` the first time `E` falls by 10³.
pub fn default_window(trace: &DecayTrace) -> (f64, f64) {
    let tmax = *trace.times.last().unwrap_or(&1.0);
    let t = trace.drop_time(1e-3).filter(|t| *t > 0.0).unwrap_or(tmax);
    (t / 4.0, t)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub label: String,
    pub k: i64,
    pub trace: DecayTrace,
    pub fit: Option<DecayFit>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ensemble {
    /// Pointwise max of `E^{1/2}/data_norm`, stored as energies with unit data norm.
    pub envelope: DecayTrace,
    pub window: (f64, f64),
    pub fit: DecayFit,
    pub members: Vec<EnsembleMember>,
    /// Label of the member attaining the envelope at the end of the window.
    pub slowest: String,
}

/// `exp(−1/(1−y²))` bump of half-width `w` centred at 0.
pub fn strip_bump(grid: PeriodicGrid, w: f64) -> GridFunction {
    let vals: Vec<f64> = grid
        .nodes()
        .into_iter()
        .map(|x| {
            let y = crate::grid::wrap(x) / w;
            if y.abs() < 1.0 {
                (-1.0 / (1.0 - y * y)).exp()
            } else {
                0.0
            }
        })
        .collect();
    GridFunction::from_real(grid, &vals).expect("grid length")
}

/// Random real trigonometric polynomial with frequencies `|m| ≤ band`.
pub fn random_band_limited(grid: PeriodicGrid, band: usize, rng: &mut ChaCha8Rng) -> GridFunction {
    let mut coef = vec![C64::new(0.0, 0.0); grid.n()];
    for m in 1..=band {
        let c = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) / (1.0 + (m * m) as f64);
        coef[m] = c;
        coef[grid.n() - m] = c.conj();
    }
    coef[0] = C64::new(rng.random::<f64>() - 0.5, 0.0);
    GridFunction::from_coefficients(grid, &coef).expect("grid length")
}

/// Modes `1, 2, 4, …, k_max`.
pub fn dyadic_modes(k_max: i64) -> Vec<i64> {
    std::iter::successors(Some(1i64), |k| Some(k * 2)).take_while(|k| *k <= k_max).collect()
}

/// Strip-concentrated bumps and random band-limited data on each dyadic
/// y-mode; returns the pointwise-slowest envelope and its fit.
pub fn worst_case_ensemble(
    profile: &DampingProfile,
    k_max: i64,
    grid: PeriodicGrid,
    t_list: &[f64],
    seed: u64,
) -> Result<Ensemble> {
    if k_max < 1 || k_max as usize > grid.n() / 4 {
        return Err(Error::InvalidParameter(format!("k_max = {k_max} must lie in 1..={}", grid.n() / 4)));
    }
    let width = if profile.zero_halfwidth > 0.0 { 0.9 * profile.zero_halfwidth } else { 0.5 };
    let modes = dyadic_modes(k_max);
    let per_mode: Vec<Result<Vec<EnsembleMember>>> = modes
        .par_iter()
        .map(|&k| {
            let prop = ModePropagator::new(profile, k, grid, Method::Auto)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let zero = GridFunction::zeros(grid);
            let data = vec![
                (format!("bump k={k}"), strip_bump(grid, width), zero.clone()),
                (
                    format!("random k={k}"),
                    random_band_limited(grid, grid.n() / 8, &mut rng),
                    random_band_limited(grid, grid.n() / 8, &mut rng),
                ),
            ];
            data.into_iter()
                .map(|(label, v0, v1)| {
                    let dn = data_norm(k, &v0, &v1);
                    let states = prop.evolve(&v0, &v1, t_list)?;
                    Ok(EnsembleMember { label, k, trace: DecayTrace::from_states(&states, dn)?, fit: None })
                })
                .collect()
        })
        .collect();
    let mut members: Vec<EnsembleMember> = Vec::new();
    for m in per_mode {
        members.extend(m?);
    }
    let normalized: Vec<Vec<f64>> = members.iter().map(|m| m.trace.normalized()).collect();
    let env: Vec<f64> =
        (0..t_list.len()).map(|i| normalized.iter().map(|v| v[i]).fold(0.0, f64::max)).collect();
    let envelope =
        DecayTrace { times: t_list.to_vec(), energies: env.iter().map(|v| v * v).collect(), data_norm: 1.0 };
    let window = default_window(&envelope);
    let fit = fit_decay_exponent(&envelope, window)?;
    for m in members.iter_mut() {
        m.fit = fit_decay_exponent(&m.trace, window).ok();
    }
    let end = t_list.iter().rposition(|t| *t <= window.1).unwrap_or(0);
    let slowest = (0..members.len())
        .max_by(|&a, &b| normalized[a][end].total_cmp(&normalized[b][end]))
        .map(|i| members[i].label.clone())
        .unwrap_or_default();
    Ok(Ensemble { envelope, window, fit, members, slowest })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaCrossCheck {
    pub resolvent_slope: f64,
    pub predicted_alpha: f64,
    pub fitted_alpha: f64,
    pub difference: f64,
    pub pass: bool,
}

pub const ALPHA_TOLERANCE: f64 = 0.1;

/// Resolvent growth `q^s` corresponds to decay rate `α = 1/(1+s)`.
pub fn cross_check_alpha(resolvent_slope: f64, fitted_alpha: f64) -> Result<AlphaCrossCheck> {
    if !(resolvent_slope > 0.0) {
        return Err(Error::InvalidParameter(format!("resolvent slope {resolvent_slope} must be positive")));
    }
    let predicted_alpha = 1.0 / (1.0 + resolvent_slope);
    let difference = (predicted_alpha - fitted_alpha).abs();
    Ok(AlphaCrossCheck {
        resolvent_slope,
        predicted_alpha,
        fitted_alpha,
        difference,
        pass: difference <= ALPHA_TOLERANCE,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyIdentity {
    pub energy_loss: f64,
    pub dissipated: f64,
    pub relative_error: f64,
}

/// `E(0) − E(T)` against `∫₀ᵀ ∫ W |∂ₜv|²` by composite Simpson on `steps`
/// (even) uniform intervals.
pub fn energy_identity_check(
    profile: &DampingProfile,
    k: i64,
    v0: &GridFunction,
    v1: &GridFunction,
    t_end: f64,
    steps: usize,
) -> Result<EnergyIdentity> {
    let steps = steps + steps % 2;
    let times: Vec<f64> = (0..=steps).map(|i| t_end * i as f64 / steps as f64).collect();
    let (states, _) = evolve_mode(profile, k, v0, v1, &times)?;
    let w = profile.sample(v0.grid);
    let dx = v0.grid.spacing();
    let rate: Vec<f64> = states
        .iter()
        .map(|s| s.vt.values.iter().zip(&w).map(|(v, w)| w * v.norm_sqr()).sum::<f64>() * dx)
        .collect();
    let hstep = t_end / steps as f64;
    let dissipated = hstep / 3.0
        * rate
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let c = if i == 0 || i == steps { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                c * r
            })
            .sum::<f64>();
    let e0 = mode_energy(&states[0])?;
    let e1 = mode_energy(&states[steps])?;
    let energy_loss = e0 - e1;
    let relative_error = (energy_loss - dissipated).abs() / energy_loss.abs().max(f64::MIN_POSITIVE);
    Ok(EnergyIdentity { energy_loss, dissipated, relative_error })
}
