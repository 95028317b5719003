use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::cutoff::{step_jet, step_sqrt_jet};
use crate::error::{Error, Result};
use crate::grid::wrap;
use crate::jet::{Jet, Jet2, MAX_DEGREE};
use crate::resolvent::b_eps1_jet;

pub type SymbolFn = Arc<dyn Fn(f64, f64, usize) -> Jet2 + Send + Sync>;
pub type UniFn = Arc<dyn Fn(&Jet) -> Jet + Send + Sync>;

/// Symmetric support bounds: the symbol vanishes for `|x̃| > x_max` or
/// `|ξ| > xi_max`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SupportHint {
    pub x_max: Option<f64>,
    pub xi_max: Option<f64>,
}

/// Dependence pattern, used by the quantizer to take exact shortcuts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    General,
    XOnly,
    XiOnly,
}

/// A symbol `a(x, ξ)` with Taylor-jet access, plus its scaling metadata.
#[derive(Clone)]
pub struct SemiclassicalSymbol {
    pub name: String,
    f: SymbolFn,
    pub h: f64,
    pub tau: f64,
    pub gamma: u32,
    pub support: SupportHint,
    /// Highest derivative order available, if limited.
    pub max_order: Option<usize>,
    pub structure: Structure,
}

impl fmt::Debug for SemiclassicalSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SemiclassicalSymbol")
            .field("name", &self.name)
            .field("h", &self.h)
            .field("tau", &self.tau)
            .field("gamma", &self.gamma)
            .field("support", &self.support)
            .finish()
    }
}

impl SemiclassicalSymbol {
    pub fn new(name: &str, h: f64, f: impl Fn(f64, f64, usize) -> Jet2 + Send + Sync + 'static) -> Self {
        SemiclassicalSymbol {
            name: name.to_string(),
            f: Arc::new(f),
            h,
            tau: 1.0,
            gamma: 2,
            support: SupportHint::default(),
            max_order: None,
            structure: Structure::General,
        }
    }

    /// `a(x, ξ) = fx(x) · fxi(ξ)` with univariate jet maps.
    pub fn separable(
        name: &str,
        h: f64,
        fx: impl Fn(&Jet) -> Jet + Send + Sync + 'static,
        fxi: impl Fn(&Jet) -> Jet + Send + Sync + 'static,
    ) -> Self {
        Self::new(name, h, move |x, xi, d| {
            Jet2::from_x(&fx(&Jet::variable(x, d))) * Jet2::from_xi(&fxi(&Jet::variable(xi, d)))
        })
    }

    pub fn x_only(name: &str, h: f64, fx: impl Fn(&Jet) -> Jet + Send + Sync + 'static) -> Self {
        let mut s = Self::separable(name, h, fx, |j| Jet::constant(1.0, j.degree()));
        s.structure = Structure::XOnly;
        s
    }

    pub fn xi_only(name: &str, h: f64, fxi: impl Fn(&Jet) -> Jet + Send + Sync + 'static) -> Self {
        let mut s = Self::separable(name, h, |j| Jet::constant(1.0, j.degree()), fxi);
        s.structure = Structure::XiOnly;
        s
    }

    pub fn constant(name: &str, h: f64, c: C64) -> Self {
        let mut s = Self::new(name, h, move |_, _, d| Jet2::constant(c, d));
        s.structure = Structure::XOnly;
        s
    }

    pub fn with_scaling(mut self, tau: f64, gamma: u32) -> Self {
        self.tau = tau;
        self.gamma = gamma;
        self
    }

    pub fn with_support(mut self, x_max: Option<f64>, xi_max: Option<f64>) -> Self {
        self.support = SupportHint { x_max, xi_max };
        self
    }

    pub fn with_max_order(mut self, order: usize) -> Self {
        self.max_order = Some(order);
        self
    }

    pub fn value(&self, x: f64, xi: f64) -> C64 {
        (self.f)(x, xi, 0).value()
    }

    pub fn jet(&self, x: f64, xi: f64, degree: usize) -> Result<Jet2> {
        let avail = self.max_order.unwrap_or(MAX_DEGREE);
        if degree > avail {
            return Err(Error::Regularity { requested: degree, available: avail });
        }
        Ok((self.f)(x, xi, degree))
    }

    pub fn product(&self, other: &SemiclassicalSymbol) -> SemiclassicalSymbol {
        let (a, b) = (self.f.clone(), other.f.clone());
        let mut s = SemiclassicalSymbol::new(&format!("{}*{}", self.name, other.name), self.h, move |x, xi, d| {
            a(x, xi, d) * b(x, xi, d)
        });
        s.max_order = min_order(self.max_order, other.max_order);
        s.support = SupportHint {
            x_max: min_opt(self.support.x_max, other.support.x_max),
            xi_max: min_opt(self.support.xi_max, other.support.xi_max),
        };
        s.tau = self.tau;
        s.gamma = self.gamma;
        s.structure = join(self.structure, other.structure);
        s
    }

    pub fn scaled(&self, c: C64) -> SemiclassicalSymbol {
        let a = self.f.clone();
        let mut s = self.clone();
        s.f = Arc::new(move |x, xi, d| a(x, xi, d).scale(c));
        s
    }

    pub fn sum(parts: &[SemiclassicalSymbol]) -> SemiclassicalSymbol {
        let fs: Vec<SymbolFn> = parts.iter().map(|p| p.f.clone()).collect();
        let mut s = SemiclassicalSymbol::new("sum", parts[0].h, move |x, xi, d| {
            fs.iter().skip(1).fold(fs[0](x, xi, d), |acc, f| acc + f(x, xi, d))
        });
        s.max_order = parts.iter().fold(None, |m, p| min_order(m, p.max_order));
        s.support = SupportHint {
            x_max: parts.iter().map(|p| p.support.x_max).try_fold(0.0f64, |m, v| v.map(|v| m.max(v))),
            xi_max: parts.iter().map(|p| p.support.xi_max).try_fold(0.0f64, |m, v| v.map(|v| m.max(v))),
        };
        s.tau = parts[0].tau;
        s.gamma = parts[0].gamma;
        s.structure = parts.iter().skip(1).fold(parts[0].structure, |a, p| join(a, p.structure));
        s
    }

    /// Raw access to the jet map.
    pub fn jet_fn(&self) -> SymbolFn {
        self.f.clone()
    }
}

fn join(a: Structure, b: Structure) -> Structure {
    if a == b {
        a
    } else {
        Structure::General
    }
}

fn min_order(a: Option<usize>, b: Option<usize>) -> Option<usize> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn min_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Periodic representative `x̃ ∈ [-π, π)` as a jet variable.
pub fn x_tilde(x: &Jet) -> Jet {
    let shift = wrap(x.value()) - x.value();
    x.add_const(shift)
}

/// `z₁`: 0 on `|η| < 1.25`, 1 on `|η| > 1.5`.
pub fn z1(eta: &Jet) -> Jet {
    step_jet(&eta.abs().add_const(-1.25).scale(4.0))
}

/// `z₂ = ψ`: 1 on `|ξ| < 2`, 0 on `|ξ| > 3`.
pub fn z2(xi: &Jet) -> Jet {
    step_jet(&xi.abs().scale(-1.0).add_const(3.0))
}

pub fn psi(xi: &Jet) -> Jet {
    z2(xi)
}

pub fn psi_sqrt(xi: &Jet) -> Jet {
    step_sqrt_jet(&xi.abs().scale(-1.0).add_const(3.0))
}

/// 0 on `|ξ| < 1`, 1 on `|ξ| > 1.5`.
pub fn z_tilde(xi: &Jet) -> Jet {
    step_jet(&xi.abs().add_const(-1.0).scale(2.0))
}

/// 1 on `|ξ| < 3.5`, 0 on `|ξ| > 4`.
pub fn chi_xi(xi: &Jet) -> Jet {
    step_jet(&xi.abs().scale(-1.0).add_const(4.0).scale(2.0))
}

/// `z(ξ) = z₁(h^{τ-1}ξ) z₂(ξ)`.
pub fn z_elliptic(xi: &Jet, h: f64, tau: f64) -> Jet {
    z1(&xi.scale(h.powf(tau - 1.0))) * z2(xi)
}

/// 1 on `|x̃| < σ + σ₁/2`, 0 on `|x̃| > σ + σ₁`.
pub fn chi_x(x: &Jet, sigma: f64, sigma1: f64) -> Jet {
    step_jet(&chi_arg(x, sigma, sigma1))
}

pub fn chi_x_sqrt(x: &Jet, sigma: f64, sigma1: f64) -> Jet {
    step_sqrt_jet(&chi_arg(x, sigma, sigma1))
}

fn chi_arg(x: &Jet, sigma: f64, sigma1: f64) -> Jet {
    x_tilde(x).abs().scale(-1.0).add_const(sigma + sigma1).scale(2.0 / sigma1)
}

/// 0 on `|x̃| < σ`, 1 on `|x̃| > σ + σ₁/2`.
pub fn s_x(x: &Jet, sigma: f64, sigma1: f64) -> Jet {
    step_jet(&x_tilde(x).abs().add_const(-sigma).scale(2.0 / sigma1))
}

pub const LIBRARY: [&str; 8] = ["z", "z_tilde", "chi", "psi", "a", "J_symbol", "s", "b_eps1"];

/// Named symbols with the plateau geometry of the elliptic, propagation and
/// multiplier arguments. `params` supplies `sigma`, `sigma1` and `eps1` where
/// needed.
pub fn symbol_library(
    name: &str,
    h: f64,
    tau: f64,
    params: &BTreeMap<String, f64>,
) -> Result<SemiclassicalSymbol> {
    let get = |k: &str| {
        params
            .get(k)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("symbol '{name}' needs parameter '{k}'")))
    };
    let r = h.powf(tau - 1.0);
    let s = match name {
        "z" => SemiclassicalSymbol::xi_only("z", h, move |xi| z_elliptic(xi, h, tau)).with_support(None, Some(3.0)),
        "z_tilde" => SemiclassicalSymbol::xi_only("z_tilde", h, z_tilde),
        "psi" => SemiclassicalSymbol::xi_only("psi", h, move |xi| psi(&xi.scale(r)))
            .with_support(None, Some(3.0 / r)),
        "chi" => {
            let (sg, s1) = (get("sigma")?, get("sigma1")?);
            SemiclassicalSymbol::x_only("chi", h, move |x| chi_x(x, sg, s1)).with_support(Some(sg + s1), None)
        }
        "s" => {
            let (sg, s1) = (get("sigma")?, get("sigma1")?);
            SemiclassicalSymbol::x_only("s", h, move |x| s_x(x, sg, s1))
        }
        "a" => {
            let (sg, s1) = (get("sigma")?, get("sigma1")?);
            SemiclassicalSymbol::separable(
                "a",
                h,
                move |x| x_tilde(x) * chi_x(x, sg, s1),
                move |xi| {
                    let e = xi.scale(r);
                    e * psi(&e)
                },
            )
            .with_support(Some(sg + s1), Some(3.0 / r))
        }
        "J_symbol" => {
            let (sg, s1) = (get("sigma")?, get("sigma1")?);
            SemiclassicalSymbol::separable(
                "J_symbol",
                h,
                move |x| chi_x_sqrt(x, sg, s1),
                move |xi| psi_sqrt(&xi.scale(r)),
            )
            .with_support(Some(sg + s1), Some(3.0 / r))
        }
        "b_eps1" => {
            let (sg, e1) = (get("sigma")?, get("eps1")?);
            SemiclassicalSymbol::x_only("b_eps1", h, move |x| b_eps1_jet(x.value(), sg, e1, x.degree()))
                .with_support(Some(sg + e1), None)
        }
        other => return Err(Error::UnknownName(format!("symbol '{other}'"))),
    };
    Ok(s.with_scaling(tau, 2))
}

/// The symbol `a` of the positive-commutator argument, for a profile geometry.
pub fn commutator_symbol(h: f64, tau: f64, sigma: f64, sigma1: f64) -> SemiclassicalSymbol {
    let mut p = BTreeMap::new();
    p.insert("sigma".to_string(), sigma);
    p.insert("sigma1".to_string(), sigma1);
    symbol_library("a", h, tau, &p).expect("parameters supplied")
}

/// Sample-based check that `|t - 1| ≤ tol` on the support hint of `b`;
/// `xi_cap` bounds the ξ-range when `b` has no ξ-support hint.
pub fn plateau_holds(t: &SemiclassicalSymbol, b: &SemiclassicalSymbol, xi_cap: f64, tol: f64) -> bool {
    let xm = b.support.x_max.unwrap_or(PI).min(PI);
    let xim = b.support.xi_max.unwrap_or(xi_cap);
    let m = 97;
    for i in 0..=m {
        let x = -xm + 2.0 * xm * i as f64 / m as f64;
        for j in 0..=m {
            let xi = -xim + 2.0 * xim * j as f64 / m as f64;
            if (t.value(x, xi) - 1.0).norm() > tol {
                return false;
            }
        }
    }
    true
}
