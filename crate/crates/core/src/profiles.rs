//! Damping functions `W ≥ 0` on the circle, their square-root factors and
//! geometric metadata.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::cutoff::step_jet;
use crate::error::{Error, Result};
use crate::grid::{derivative, sample_real, wrap, PeriodicGrid};
use crate::jet::Jet;

/// Regularity class of the square-root factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularity {
    Finite(u32),
    Infinite,
}

impl fmt::Display for Regularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regularity::Finite(k) => write!(f, "{k}"),
            Regularity::Infinite => write!(f, "infinite"),
        }
    }
}

type Sampler = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Shape {
    Strip { smoothing: f64 },
    Polynomial { exponent: f64 },
    Oscillating,
    Constant { c: f64 },
    Custom { w: Sampler },
}

/// Transition from the raw factor to a constant near `|x̃| = π`.
#[derive(Debug, Clone, Copy)]
struct Blend {
    start: f64,
    width: f64,
    level: f64,
}

#[derive(Clone)]
pub struct DampingProfile {
    pub name: String,
    shape: Shape,
    /// `W` vanishes on `|x̃| ≤ zero_halfwidth`.
    pub zero_halfwidth: f64,
    /// Half-width outside of which `W ≥ floor`.
    pub sigma: f64,
    pub sigma1: f64,
    pub k0: Option<Regularity>,
    pub floor: f64,
    blend: Option<Blend>,
    jet_order: Option<usize>,
}

impl fmt::Debug for DampingProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DampingProfile")
            .field("name", &self.name)
            .field("zero_halfwidth", &self.zero_halfwidth)
            .field("sigma", &self.sigma)
            .field("sigma1", &self.sigma1)
            .field("k0", &self.k0)
            .field("floor", &self.floor)
            .finish()
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma < PI) {
        return Err(Error::InvalidParameter(format!("sigma must lie in (0, π), got {sigma}")));
    }
    Ok(())
}

fn abs_wrapped(x: f64, degree: usize) -> Jet {
    Jet::variable(wrap(x), degree).abs()
}

impl DampingProfile {
    pub fn strip(sigma: f64, smoothing: f64) -> Result<Self> {
        check_sigma(sigma)?;
        if !(smoothing >= 0.0 && smoothing < PI - sigma) {
            return Err(Error::InvalidParameter(format!(
                "smoothing must lie in [0, π - sigma), got {smoothing}"
            )));
        }
        let sh = sigma + smoothing / 2.0;
        Ok(DampingProfile {
            name: format!("strip(sigma={sigma}, smoothing={smoothing})"),
            shape: Shape::Strip { smoothing },
            zero_halfwidth: sigma,
            sigma: sh,
            sigma1: (PI - sh) / 2.0,
            k0: None,
            floor: 0.5,
            blend: None,
            jet_order: None,
        })
    }

    pub fn polynomial(sigma: f64, exponent: f64) -> Result<Self> {
        check_sigma(sigma)?;
        if !(exponent > 0.0) {
            return Err(Error::InvalidParameter(format!("exponent must be positive, got {exponent}")));
        }
        let half = exponent / 2.0;
        let k0 = if half.fract() == 0.0 { half as u32 } else { half.floor() as u32 };
        let p = DampingProfile {
            name: format!("polynomial(sigma={sigma}, beta={exponent})"),
            shape: Shape::Polynomial { exponent },
            zero_halfwidth: sigma,
            sigma,
            sigma1: 0.0,
            k0: Some(Regularity::Finite(k0)),
            floor: 0.0,
            blend: None,
            jet_order: None,
        };
        Ok(p.with_blend())
    }

    pub fn oscillating(sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        let p = DampingProfile {
            name: format!("oscillating(sigma={sigma})"),
            shape: Shape::Oscillating,
            zero_halfwidth: sigma,
            sigma,
            sigma1: 0.0,
            k0: Some(Regularity::Infinite),
            floor: 0.0,
            blend: None,
            jet_order: None,
        };
        Ok(p.with_blend())
    }

    /// `W ≡ c`; used as a Fourier-diagonal oracle.
    pub fn constant(c: f64) -> Result<Self> {
        if !(c >= 0.0) {
            return Err(Error::InvalidParameter(format!("constant damping must be nonnegative, got {c}")));
        }
        Ok(DampingProfile {
            name: format!("constant(c={c})"),
            shape: Shape::Constant { c },
            zero_halfwidth: 0.0,
            sigma: 0.0,
            sigma1: PI / 2.0,
            k0: None,
            floor: c,
            blend: None,
            jet_order: None,
        })
    }

    /// A profile given only by point values; no derivatives are available.
    pub fn custom(
        name: &str,
        w: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sigma: f64,
        sigma1: f64,
        floor: f64,
    ) -> Self {
        DampingProfile {
            name: name.to_string(),
            shape: Shape::Custom { w: Arc::new(w) },
            zero_halfwidth: sigma,
            sigma,
            sigma1,
            k0: None,
            floor,
            blend: None,
            jet_order: Some(0),
        }
    }

    /// Look up a built-in profile by name.
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |key: &str, default: Option<f64>| -> Result<f64> {
            params.get(key).copied().or(default).ok_or_else(|| {
                Error::InvalidParameter(format!("profile '{name}' needs parameter '{key}'"))
            })
        };
        match name {
            "strip" => Self::strip(get("sigma", None)?, get("smoothing", Some(0.0))?),
            "polynomial" => Self::polynomial(get("sigma", None)?, get("beta", None)?),
            "oscillating" => Self::oscillating(get("sigma", None)?),
            "constant" => Self::constant(get("c", None)?),
            other => Err(Error::UnknownName(format!("profile '{other}'"))),
        }
    }

    fn with_blend(mut self) -> Self {
        let s0 = self.zero_halfwidth;
        let len = PI - s0;
        let start = s0 + 0.6 * len;
        let level = self.raw_factor(&Jet::constant(start, 0)).value();
        self.blend = Some(Blend { start, width: 0.3 * len, level });
        let m = 4000;
        let floor = (0..=m)
            .map(|i| start + (PI - start) * i as f64 / m as f64)
            .map(|r| self.w_abs(r))
            .fold(f64::INFINITY, f64::min)
            / 2.0;
        self.floor = floor;
        self.sigma = self.floor_crossing();
        self.sigma1 = (PI - self.sigma) / 2.0;
        self
    }

    /// Smallest `r` such that `W ≥ floor` on `[r, π]`.
    fn floor_crossing(&self) -> f64 {
        let s0 = self.zero_halfwidth;
        let m = 20000;
        let mut lo = s0;
        for i in (0..m).rev() {
            let r = s0 + (PI - s0) * i as f64 / m as f64;
            if self.w_abs(r) < self.floor {
                lo = r;
                break;
            }
        }
        let mut hi = (lo + (PI - s0) / m as f64).min(PI);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.w_abs(mid) < self.floor {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    fn raw_factor(&self, r: &Jet) -> Jet {
        let d = r.degree();
        let dist = r.add_const(-self.zero_halfwidth);
        if dist.value() <= 0.0 {
            return Jet::constant(0.0, d);
        }
        match &self.shape {
            Shape::Polynomial { exponent } => dist.powf(exponent / 2.0),
            Shape::Oscillating => {
                let inv = dist.recip();
                if inv.value() > 1400.0 {
                    return Jet::constant(0.0, d);
                }
                inv.scale(-0.5).exp() * inv.sin()
            }
            _ => unreachable!("raw factor only exists for blended shapes"),
        }
    }

    fn factor_of_abs(&self, r: &Jet) -> Jet {
        let b = self.blend.expect("blended profile");
        let d = r.degree();
        if r.value() >= b.start + b.width {
            return Jet::constant(b.level, d);
        }
        let raw = self.raw_factor(r);
        if r.value() <= b.start {
            return raw;
        }
        let t = step_jet(&r.add_const(-b.start).scale(1.0 / b.width));
        raw * t.scale(-1.0).add_const(1.0) + t.scale(b.level)
    }

    fn w_abs(&self, r: f64) -> f64 {
        self.w_jet_abs(&Jet::constant(r, 0)).value()
    }

    fn w_jet_abs(&self, r: &Jet) -> Jet {
        let d = r.degree();
        match &self.shape {
            Shape::Strip { smoothing } => {
                if *smoothing == 0.0 {
                    let v = if r.value() > self.zero_halfwidth { 1.0 } else { 0.0 };
                    Jet::constant(v, d)
                } else {
                    step_jet(&r.add_const(-self.zero_halfwidth).scale(1.0 / smoothing))
                }
            }
            Shape::Constant { c } => Jet::constant(*c, d),
            Shape::Polynomial { .. } | Shape::Oscillating => {
                let v = self.factor_of_abs(r);
                v * v
            }
            Shape::Custom { w } => Jet::constant(w(r.value()), d),
        }
    }

    pub fn w(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Custom { w } => w(x),
            _ => self.w_abs(wrap(x).abs()),
        }
    }

    /// Taylor jet of `W` at `x`. Piecewise-analytic built-ins give exact
    /// one-sided jets; sampled profiles only carry values.
    pub fn w_jet(&self, x: f64, degree: usize) -> Result<Jet> {
        self.check_order(degree)?;
        if let Shape::Custom { w } = &self.shape {
            return Ok(Jet::constant(w(x), degree));
        }
        Ok(self.w_jet_abs(&abs_wrapped(x, degree)))
    }

    pub fn check_order(&self, degree: usize) -> Result<()> {
        match self.jet_order {
            Some(avail) if degree > avail => {
                Err(Error::Regularity { requested: degree, available: avail })
            }
            _ => Ok(()),
        }
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.jet_order.is_none()
    }

    pub fn factor_count(&self) -> usize {
        match self.shape {
            Shape::Polynomial { .. } | Shape::Oscillating => 1,
            Shape::Constant { .. } => 1,
            _ => 0,
        }
    }

    /// Jet of the j-th square-root factor `v_j` (so that `W = Σ v_j²`).
    pub fn factor_jet(&self, j: usize, x: f64, degree: usize) -> Option<Jet> {
        if j >= self.factor_count() {
            return None;
        }
        match &self.shape {
            Shape::Constant { c } => Some(Jet::constant(c.sqrt(), degree)),
            _ => Some(self.factor_of_abs(&abs_wrapped(x, degree))),
        }
    }

    pub fn factor(&self, j: usize, x: f64) -> Option<f64> {
        self.factor_jet(j, x, 0).map(|v| v.value())
    }

    pub fn sample(&self, g: PeriodicGrid) -> Vec<f64> {
        g.nodes().into_iter().map(|x| self.w(x)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub min_outside: f64,
    pub floor: f64,
    pub floor_ok: bool,
    /// `None` when the profile has no factors.
    pub factor_residual: Option<f64>,
    pub negative_points: Vec<(f64, f64)>,
}

impl HypothesisReport {
    pub fn nonnegative(&self) -> bool {
        self.negative_points.is_empty()
    }

    pub fn factors_ok(&self) -> bool {
        self.factor_residual.map_or(true, |r| r <= 1e-12)
    }

    pub fn passed(&self) -> bool {
        self.floor_ok && self.nonnegative() && self.factors_ok()
    }
}

pub fn check_hypotheses(p: &DampingProfile, g: PeriodicGrid) -> HypothesisReport {
    let nodes = g.nodes();
    let mut min_outside = f64::INFINITY;
    let mut negative_points = Vec::new();
    let mut residual: Option<f64> = None;
    let band = p.sigma + p.sigma1;
    for &x in &nodes {
        let w = p.w(x);
        if w < 0.0 {
            negative_points.push((x, w));
        }
        let r = wrap(x).abs();
        if r > p.sigma + 1e-9 {
            min_outside = min_outside.min(w);
        }
        if p.factor_count() > 0 && r < band {
            let s: f64 = (0..p.factor_count()).map(|j| p.factor(j, x).unwrap().powi(2)).sum();
            let e = (w - s).abs();
            residual = Some(residual.map_or(e, |m: f64| m.max(e)));
        }
    }
    if p.factor_count() > 0 && residual.is_none() {
        residual = Some(0.0);
    }
    HypothesisReport {
        min_outside,
        floor: p.floor,
        floor_ok: min_outside >= p.floor,
        factor_residual: residual,
        negative_points,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GradientBound {
    Finite(f64),
    /// Sup values at n, 2n, 4n, 8n.
    Divergent(Vec<f64>),
}

fn gradient_sup(p: &DampingProfile, g: PeriodicGrid) -> f64 {
    let w = p.sample(g);
    let dw: Vec<f64> = if p.has_analytic_derivatives() {
        g.nodes().into_iter().map(|x| p.w_jet(x, 1).unwrap().deriv(1)).collect()
    } else {
        let u = sample_real(|x| p.w(x), g);
        derivative(&u, 1).unwrap().values.iter().map(|z| z.re).collect()
    };
    w.iter()
        .zip(&dw)
        .filter(|(w, _)| **w > 1e-12)
        .map(|(w, d)| d.abs() / w.sqrt())
        .fold(0.0, f64::max)
}

/// `sup |W'|/W^{1/2}` over nodes with `W > 1e-12`, with a refinement study
/// over n, 2n, 4n, 8n to detect growth.
pub fn gradient_bound_constant(p: &DampingProfile, g: PeriodicGrid) -> GradientBound {
    let sups: Vec<f64> = (0..4)
        .map(|i| gradient_sup(p, PeriodicGrid::new(g.n() << i).unwrap()))
        .collect();
    let first = sups[0];
    let last = sups[3];
    if last > 1.25 * first && last > 1e-12 {
        GradientBound::Divergent(sups)
    } else {
        GradientBound::Finite(sups.into_iter().fold(0.0, f64::max))
    }
}

pub fn tau_min(k0: u32) -> Result<f64> {
    if k0 < 9 {
        return Err(Error::InvalidParameter(format!("k0 must be at least 9, got {k0}")));
    }
    let k = k0 as f64;
    Ok(((k + 2.0) / (2.0 * k - 4.0)).max(7.0 / (k - 1.0)))
}

pub fn alpha_of_tau(tau: f64) -> f64 {
    2.0 / (tau + 2.0)
}

/// Decay exponents implied by `k0`: from the threshold formula, and from
/// taking `τ = 1` as in the strip remark. The two disagree at `k0 = 9`.
pub fn alpha_candidates(k0: u32) -> Result<(f64, f64)> {
    Ok((alpha_of_tau(tau_min(k0)?), alpha_of_tau(1.0)))
}
