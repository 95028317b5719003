//! Smooth monotone transitions built from `ψ₀(t) = e^{-1/t}`.

use crate::jet::Jet;

/// Beyond this exponent `e^{-g}` is below the smallest normal double.
const FLAT: f64 = 700.0;

pub fn psi0(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// `g = 1/t - 1/(1-t)` so that `S = 1/(1 + e^{g})`.
fn exponent(t: &Jet) -> Jet {
    t.recip() - t.scale(-1.0).add_const(1.0).recip()
}

/// `S(t) = ψ₀(t)/(ψ₀(t)+ψ₀(1-t))`: 0 for t ≤ 0, 1 for t ≥ 1.
pub fn step_jet(t: &Jet) -> Jet {
    let t0 = t.value();
    let d = t.degree();
    if t0 <= 0.0 {
        return Jet::constant(0.0, d);
    }
    if t0 >= 1.0 {
        return Jet::constant(1.0, d);
    }
    let g = exponent(t);
    if g.value() > FLAT {
        return Jet::constant(0.0, d);
    }
    if g.value() < -FLAT {
        return Jet::constant(1.0, d);
    }
    g.exp().add_const(1.0).recip()
}

/// Smooth square root of `S`, `(1 + e^{g})^{-1/2}`.
pub fn step_sqrt_jet(t: &Jet) -> Jet {
    let t0 = t.value();
    let d = t.degree();
    if t0 <= 0.0 {
        return Jet::constant(0.0, d);
    }
    if t0 >= 1.0 {
        return Jet::constant(1.0, d);
    }
    let g = exponent(t);
    if g.value() > 2.0 * FLAT {
        return Jet::constant(0.0, d);
    }
    if g.value() < -FLAT {
        return Jet::constant(1.0, d);
    }
    if g.value() > FLAT {
        // (1+e^g)^{-1/2} ≈ e^{-g/2} without overflow
        return g.scale(-0.5).exp();
    }
    g.exp().add_const(1.0).powf(-0.5)
}

pub fn step(t: f64) -> f64 {
    step_jet(&Jet::constant(t, 0)).value()
}

pub fn step_sqrt(t: f64) -> f64 {
    step_sqrt_jet(&Jet::constant(t, 0)).value()
}
