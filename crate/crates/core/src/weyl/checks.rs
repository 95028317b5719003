use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::quantize::{check_band_limit, grid_size_for, quantize};
use super::symbol::{commutator_symbol, plateau_holds, SemiclassicalSymbol, Structure};
use crate::error::{Error, Result};
use crate::fit::fit_loglog;
use crate::grid::{make_grid, GridFunction, PeriodicGrid};
use crate::jet::MAX_DEGREE;
use crate::linalg::{inner, OperatorMatrix};
use crate::profiles::DampingProfile;
use crate::resolvent::Assembler;

/// Extra grid points beyond the frequency support `2 ξ_max / h`.
pub const GRID_PAD: usize = 64;

/// Below this a remainder norm counts as rounding noise.
pub const ROUNDING_FLOOR: f64 = 1e-13;

/// Operator norms of a remainder family over decreasing `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderScaling {
    pub h_values: Vec<f64>,
    pub norms: Vec<f64>,
    pub grid_sizes: Vec<usize>,
    /// `None` when every norm sits at rounding level.
    pub fitted_slope: Option<f64>,
    /// `f64::INFINITY` for superpolynomial predictions.
    pub predicted_slope: f64,
    pub r_squared: Option<f64>,
}

impl RemainderScaling {
    pub fn from_norms(h_values: Vec<f64>, norms: Vec<f64>, grid_sizes: Vec<usize>, predicted_slope: f64) -> Self {
        let fit = if norms.iter().all(|v| *v > ROUNDING_FLOOR) {
            fit_loglog(&h_values, &norms).ok()
        } else {
            None
        };
        RemainderScaling {
            h_values,
            norms,
            grid_sizes,
            fitted_slope: fit.map(|f| f.slope),
            predicted_slope,
            r_squared: fit.map(|f| f.r_squared),
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.norms.iter().cloned().fold(0.0, f64::max)
    }

    /// Whether the norm at the smallest `h` is below the norm at the largest.
    pub fn improves(&self) -> bool {
        self.norms.last() < self.norms.first()
    }
}

pub fn validate_h_list(h_list: &[f64]) -> Result<()> {
    if h_list.len() < 4 {
        return Err(Error::InvalidParameter(format!("need at least 4 h values, got {}", h_list.len())));
    }
    if h_list.iter().any(|h| !(*h > 0.0 && *h <= 1.0)) {
        return Err(Error::InvalidParameter("h values must lie in (0, 1]".into()));
    }
    if h_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("h values must be strictly decreasing".into()));
    }
    Ok(())
}

/// `h = 2^{-k}` for `k` in `from..=to`.
pub fn dyadic(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(-k)).collect()
}

/// The k-th Weyl composition term
/// `(h/(2i))^k/k! (∂_ξ∂_y − ∂_x∂_η)^k a(x,ξ) b(y,η)|_{y=x, η=ξ}`.
pub fn moyal_term(a: &SemiclassicalSymbol, b: &SemiclassicalSymbol, k: usize) -> Result<SemiclassicalSymbol> {
    for s in [a, b] {
        if let Some(m) = s.max_order {
            if m < k {
                return Err(Error::Regularity { requested: k, available: m });
            }
        }
    }
    let (fa, fb) = (a.jet_fn(), b.jet_fn());
    let h = a.h;
    let kf: f64 = (1..=k).map(|i| i as f64).product();
    let c = C64::new(0.0, -h / 2.0).powu(k as u32) / kf;
    let binom: Vec<f64> = (0..=k).map(|r| (0..r).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)).collect();
    let mut out = SemiclassicalSymbol::new(&format!("moyal{k}({},{})", a.name, b.name), h, move |x, xi, d| {
        let deg = (k + d).min(MAX_DEGREE);
        let (ja, jb) = (fa(x, xi, deg), fb(x, xi, deg));
        let mut acc: Option<crate::jet::Jet2> = None;
        for r in 0..=k {
            let sign = if (k - r) % 2 == 0 { 1.0 } else { -1.0 };
            let t = (ja.partial_jet(k - r, r) * jb.partial_jet(r, k - r)).scale(C64::new(sign * binom[r], 0.0));
            acc = Some(match acc {
                None => t,
                Some(s) => s + t,
            });
        }
        acc.expect("k + 1 terms").scale(c).truncate(d)
    });
    out.max_order = match (a.max_order, b.max_order) {
        (Some(x), Some(y)) => Some(x.min(y) - k),
        (Some(x), None) | (None, Some(x)) => Some(x - k),
        (None, None) => Some(MAX_DEGREE - k),
    };
    out.support.x_max = match (a.support.x_max, b.support.x_max) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    };
    out.support.xi_max = match (a.support.xi_max, b.support.xi_max) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    };
    out.structure = if a.structure == b.structure { a.structure } else { Structure::General };
    out.tau = a.tau;
    out.gamma = a.gamma;
    Ok(out)
}

/// Grid size that resolves every ξ-dependent symbol of the list.
fn grid_for(symbols: &[&SemiclassicalSymbol], h: f64) -> Result<PeriodicGrid> {
    let mut xi_max: f64 = 0.0;
    for s in symbols {
        if s.structure == Structure::XOnly {
            continue;
        }
        match s.support.xi_max {
            Some(v) => xi_max = xi_max.max(v),
            None => {
                return Err(Error::Precondition(format!("symbol '{}' has no ξ-support bound", s.name)));
            }
        }
    }
    let n = if xi_max > 0.0 { grid_size_for(xi_max, h, GRID_PAD).max(64) } else { 64 };
    let g = make_grid(n)?;
    for s in symbols {
        if s.structure != Structure::XOnly {
            check_band_limit(s, &g)?;
        }
    }
    Ok(g)
}

/// `‖Op(a)Op(b) − Σ_{k<N} Op(a #_k b)‖` over `h_list`; predicted slope
/// `N(1−ρ)`.
pub fn composition_remainder(
    a: &dyn Fn(f64) -> SemiclassicalSymbol,
    b: &dyn Fn(f64) -> SemiclassicalSymbol,
    n_terms: usize,
    rho: f64,
    h_list: &[f64],
) -> Result<RemainderScaling> {
    validate_h_list(h_list)?;
    if n_terms == 0 || n_terms > MAX_DEGREE {
        return Err(Error::InvalidParameter(format!("number of terms must be in 1..={MAX_DEGREE}")));
    }
    let mut norms = Vec::new();
    let mut sizes = Vec::new();
    for &h in h_list {
        let (sa, sb) = (a(h), b(h));
        let terms = (0..n_terms).map(|k| moyal_term(&sa, &sb, k)).collect::<Result<Vec<_>>>()?;
        let expansion = SemiclassicalSymbol::sum(&terms);
        let g = grid_for(&[&sa, &sb], h)?;
        let r = quantize(&sa, &g).matmul(&quantize(&sb, &g)).sub(&quantize(&expansion, &g));
        norms.push(r.norm2()?);
        sizes.push(g.n());
    }
    Ok(RemainderScaling::from_norms(h_list.to_vec(), norms, sizes, n_terms as f64 * (1.0 - rho)))
}

/// `‖Op(t)Op(b)Op(t) − Op(b)‖` over `h_list` for `t ≡ 1` on the support of `b`.
pub fn cutoff_conjugation_error(
    t: &dyn Fn(f64) -> SemiclassicalSymbol,
    b: &dyn Fn(f64) -> SemiclassicalSymbol,
    h_list: &[f64],
) -> Result<RemainderScaling> {
    validate_h_list(h_list)?;
    let mut norms = Vec::new();
    let mut sizes = Vec::new();
    for &h in h_list {
        let (st, sb) = (t(h), b(h));
        let g = grid_for(&[&st, &sb], h)?;
        let edge = h * (g.n() / 2) as f64;
        if !plateau_holds(&st, &sb, edge, 1e-14) {
            return Err(Error::Precondition(format!(
                "'{}' is not identically 1 on the support of '{}' (h = {h})",
                st.name, sb.name
            )));
        }
        let ot = quantize(&st, &g);
        let ob = quantize(&sb, &g);
        let r = ot.matmul(&ob).matmul(&ot).sub(&ob);
        norms.push(r.norm2()?);
        sizes.push(g.n());
    }
    Ok(RemainderScaling::from_norms(h_list.to_vec(), norms, sizes, f64::INFINITY))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommutatorReport {
    /// `h^{1−τ}⟨[h²∂², A]u, u⟩`
    pub laplacian_term: C64,
    /// `i h^{3−γ−τ}⟨(AW + WA)u, u⟩`
    pub damping_term: C64,
    /// `2i h^{3−τ} Im⟨f, Au⟩`
    pub source_term: C64,
    pub residual: f64,
}

impl CommutatorReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.residual <= tol
    }
}

/// Discrete semiclassical operator `P_h = −h²∂² + i h^{2−γ} W − h² β`.
pub fn semiclassical_operator(profile: &DampingProfile, h: f64, gamma: u32, beta: f64, g: PeriodicGrid) -> OperatorMatrix {
    let q = h.powi(-(gamma as i32));
    Assembler::new(profile, q, g).operator(beta).scale(C64::new(h * h, 0.0))
}

fn check_scaling(h: f64, tau: f64, gamma: u32) -> Result<()> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::InvalidParameter(format!("h = {h} outside (0, 1]")));
    }
    if !(tau > 0.5 && tau <= 1.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} outside (1/2, 1]")));
    }
    if gamma != 1 && gamma != 2 {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must be 1 or 2")));
    }
    Ok(())
}

/// Evaluates both sides of the commutator identity for a given `u`; the
/// identity holds exactly when `P_h u = h² f`.
pub fn commutator_identity_residual(
    profile: &DampingProfile,
    h: f64,
    tau: f64,
    gamma: u32,
    f: &GridFunction,
    u: &GridFunction,
) -> Result<CommutatorReport> {
    check_scaling(h, tau, gamma)?;
    f.check_same_grid(u)?;
    let g = f.grid;
    let n = g.n();
    let a = quantize(&commutator_symbol(h, tau, profile.sigma, profile.sigma1), &g);
    let d2 = OperatorMatrix::from_real_row_major(n, &g.d2_matrix()).scale(C64::new(h * h, 0.0));
    let w: Vec<C64> = profile.sample(g).into_iter().map(|v| C64::new(v, 0.0)).collect();
    let wm = OperatorMatrix::diagonal(&w);
    let comm = d2.matmul(&a).sub(&a.matmul(&d2));
    let anti = a.matmul(&wm).add(&wm.matmul(&a));
    let uv = &u.values;
    let i = C64::new(0.0, 1.0);
    let laplacian_term = inner(&comm.apply(uv), uv) * h.powf(1.0 - tau);
    let damping_term = i * inner(&anti.apply(uv), uv) * h.powf(3.0 - gamma as f64 - tau);
    let source_term = i * 2.0 * h.powf(3.0 - tau) * inner(&f.values, &a.apply(uv)).im;
    let scale = laplacian_term.norm() + damping_term.norm() + source_term.norm();
    let residual = if scale > 0.0 { (laplacian_term + damping_term - source_term).norm() / scale } else { 0.0 };
    Ok(CommutatorReport { laplacian_term, damping_term, source_term, residual })
}

/// Solves `P_h u = h² f` and checks the commutator identity.
pub fn commutator_identity_check(
    profile: &DampingProfile,
    h: f64,
    tau: f64,
    gamma: u32,
    beta: f64,
    f: &GridFunction,
) -> Result<CommutatorReport> {
    check_scaling(h, tau, gamma)?;
    let p = semiclassical_operator(profile, h, gamma, beta, f.grid);
    let rhs: Vec<C64> = f.values.iter().map(|v| v * (h * h)).collect();
    let u = GridFunction::new(f.grid, p.solve(&rhs)?)?;
    commutator_identity_residual(profile, h, tau, gamma, f, &u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sample;
    use crate::jet::Jet;
    use crate::cutoff::step_jet;
    use crate::weyl::symbol::{chi_x, psi, x_tilde};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth_f(g: PeriodicGrid) -> GridFunction {
        sample(|x| C64::new((x).cos() + 0.3 * (2.0 * x).sin(), 0.2 * (3.0 * x).cos()), g)
    }

    #[test]
    fn commutator_identity_holds_for_solutions() {
        let p = DampingProfile::strip(1.0, 0.3).unwrap();
        let g = make_grid(256).unwrap();
        let rep = commutator_identity_check(&p, 0.05, 0.875, 2, 1.0, &smooth_f(g)).unwrap();
        assert!(rep.residual <= 1e-10, "{rep:?}");

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = GridFunction::new(g, (0..256).map(|_| C64::new(rng.random(), rng.random())).collect()).unwrap();
        let bad = commutator_identity_residual(&p, 0.05, 0.875, 2, &smooth_f(g), &u).unwrap();
        assert!(bad.residual > 1e-3, "{bad:?}");
    }

    #[test]
    fn xi_only_and_x_only_pairs_compose_exactly() {
        let hs = dyadic(3, 6);
        let a = |h: f64| SemiclassicalSymbol::xi_only("a", h, psi).with_support(None, Some(3.0));
        let b = |h: f64| {
            SemiclassicalSymbol::xi_only("b", h, |xi| psi(xi) * (*xi * *xi).add_const(1.0)).with_support(None, Some(3.0))
        };
        let r = composition_remainder(&a, &b, 2, 0.0, &hs).unwrap();
        assert!(r.max_norm() < 1e-12, "{r:?}");
        assert!(r.fitted_slope.is_none());
        let c = |h: f64| SemiclassicalSymbol::x_only("c", h, |x| x.sin());
        let d = |h: f64| SemiclassicalSymbol::x_only("d", h, |x| x.cos().add_const(2.0));
        let r = composition_remainder(&c, &d, 1, 0.0, &hs).unwrap();
        assert_eq!(r.max_norm(), 0.0);
    }

    #[test]
    fn moyal_first_term_is_half_poisson_bracket() {
        let h = 0.1;
        let a = SemiclassicalSymbol::separable("a", h, |x| x.sin(), |xi| *xi * *xi);
        let b = SemiclassicalSymbol::separable("b", h, |x| x.cos(), |xi| *xi);
        let m1 = moyal_term(&a, &b, 1).unwrap();
        let (x, xi) = (0.7f64, 1.3f64);
        // (h/2i)(∂_ξa ∂_x b − ∂_x a ∂_ξ b)
        let want = C64::new(0.0, -h / 2.0)
            * (2.0 * xi * x.sin() * (-x.sin() * xi) - x.cos() * xi * xi * x.cos());
        assert!((m1.value(x, xi) - want).norm() < 1e-14);
    }

    #[test]
    fn cutoff_conjugation_smooth_case() {
        let hs = dyadic(2, 5);
        let t = |h: f64| {
            SemiclassicalSymbol::separable(
                "t",
                h,
                |x| step_jet(&x_tilde(x).abs().scale(-1.0).add_const(3.0).scale(1.0 / 1.5)),
                |xi| step_jet(&xi.abs().scale(-1.0).add_const(8.0).scale(1.0 / 5.0)),
            )
            .with_support(Some(3.0), Some(8.0))
        };
        let b = |h: f64| {
            SemiclassicalSymbol::separable(
                "b",
                h,
                |x| step_jet(&x_tilde(x).abs().scale(-1.0 / 0.7).add_const(1.0)),
                |xi| step_jet(&xi.abs().scale(-1.0 / 1.5).add_const(1.0)),
            )
            .with_support(Some(0.7), Some(1.5))
        };
        let r = cutoff_conjugation_error(&t, &b, &hs).unwrap();
        assert!(r.norms[3] < 1e-8, "{r:?}");
        let one = |h: f64| SemiclassicalSymbol::constant("one", h, C64::new(1.0, 0.0));
        let r = cutoff_conjugation_error(&one, &b, &hs).unwrap();
        assert_eq!(r.max_norm(), 0.0);
        let narrow = |h: f64| SemiclassicalSymbol::x_only("narrow", h, |x| chi_x(x, 0.3, 0.2));
        assert!(matches!(cutoff_conjugation_error(&narrow, &b, &hs), Err(Error::Precondition(_))));
        let _ = Jet::constant(0.0, 0);
    }

    #[test]
    fn h_list_validation() {
        assert!(validate_h_list(&[0.5, 0.25, 0.125]).is_err());
        assert!(validate_h_list(&[0.5, 0.25, 0.25, 0.1]).is_err());
        assert!(validate_h_list(&dyadic(1, 4)).is_ok());
    }
}
