//! Truncated Taylor arithmetic. `Jet` is univariate and real, `Jet2` is
//! bivariate (x, ξ) and complex with total-degree truncation.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64 as C64;

pub const MAX_DEGREE: usize = 7;
const SLOTS: usize = MAX_DEGREE + 1;

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `c[k] = f^{(k)}(x₀)/k!` for `k ≤ degree`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    degree: usize,
    c: [f64; SLOTS],
}

impl Jet {
    pub fn constant(v: f64, degree: usize) -> Self {
        assert!(degree <= MAX_DEGREE, "jet degree {degree} above {MAX_DEGREE}");
        let mut c = [0.0; SLOTS];
        c[0] = v;
        Jet { degree, c }
    }

    pub fn variable(x0: f64, degree: usize) -> Self {
        let mut j = Jet::constant(x0, degree);
        if degree >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    pub fn from_coeffs(coeffs: &[f64]) -> Self {
        let mut j = Jet::constant(0.0, coeffs.len().saturating_sub(1));
        j.c[..coeffs.len()].copy_from_slice(coeffs);
        j
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeff(&self, k: usize) -> f64 {
        if k <= self.degree {
            self.c[k]
        } else {
            0.0
        }
    }

    /// k-th derivative at the expansion point.
    pub fn deriv(&self, k: usize) -> f64 {
        self.coeff(k) * factorial(k)
    }

    pub fn scale(mut self, s: f64) -> Self {
        self.c.iter_mut().for_each(|v| *v *= s);
        self
    }

    pub fn add_const(mut self, s: f64) -> Self {
        self.c[0] += s;
        self
    }

    pub fn recip(&self) -> Self {
        let f0 = self.c[0];
        let mut g = Jet::constant(1.0 / f0, self.degree);
        for k in 1..=self.degree {
            let s: f64 = (1..=k).map(|i| self.c[i] * g.c[k - i]).sum();
            g.c[k] = -s / f0;
        }
        g
    }

    pub fn exp(&self) -> Self {
        let mut e = Jet::constant(self.c[0].exp(), self.degree);
        for k in 1..=self.degree {
            let s: f64 = (1..=k).map(|i| i as f64 * self.c[i] * e.c[k - i]).sum();
            e.c[k] = s / k as f64;
        }
        e
    }

    pub fn ln(&self) -> Self {
        let f0 = self.c[0];
        let mut l = Jet::constant(f0.ln(), self.degree);
        for k in 1..=self.degree {
            let s: f64 = (1..k).map(|i| i as f64 * l.c[i] * self.c[k - i]).sum();
            l.c[k] = (self.c[k] - s / k as f64) / f0;
        }
        l
    }

    pub fn powf(&self, a: f64) -> Self {
        let f0 = self.c[0];
        let mut p = Jet::constant(f0.powf(a), self.degree);
        for k in 1..=self.degree {
            let s: f64 = (1..=k)
                .map(|i| ((a + 1.0) * i as f64 - k as f64) * self.c[i] * p.c[k - i])
                .sum();
            p.c[k] = s / (k as f64 * f0);
        }
        p
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn sin_cos(&self) -> (Self, Self) {
        let mut s = Jet::constant(self.c[0].sin(), self.degree);
        let mut c = Jet::constant(self.c[0].cos(), self.degree);
        for k in 1..=self.degree {
            let mut ss = 0.0;
            let mut cc = 0.0;
            for i in 1..=k {
                ss += i as f64 * self.c[i] * c.c[k - i];
                cc -= i as f64 * self.c[i] * s.c[k - i];
            }
            s.c[k] = ss / k as f64;
            c.c[k] = cc / k as f64;
        }
        (s, c)
    }

    pub fn sin(&self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Self {
        self.sin_cos().1
    }

    /// `|f|` away from zeros of `f`.
    pub fn abs(&self) -> Self {
        if self.c[0] < 0.0 {
            -*self
        } else {
            *self
        }
    }

    /// Jet of the m-th derivative, degree lowered by m.
    pub fn derivative(&self, m: usize) -> Self {
        let d = self.degree.saturating_sub(m);
        let mut out = Jet::constant(0.0, d);
        if m > self.degree {
            return out;
        }
        for a in 0..=d {
            out.c[a] = self.c[a + m] * factorial(a + m) / factorial(a);
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, o: Jet) -> Jet {
        let d = self.degree.min(o.degree);
        self.degree = d;
        for k in 0..=d {
            self.c[k] += o.c[k];
        }
        for k in d + 1..SLOTS {
            self.c[k] = 0.0;
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let d = self.degree.min(o.degree);
        let mut out = Jet::constant(0.0, d);
        for k in 0..=d {
            out.c[k] = (0..=k).map(|i| self.c[i] * o.c[k - i]).sum();
        }
        out
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        self.scale(s)
    }
}

/// `t[a][b] = ∂ₓᵃ∂_ξᵇ f / (a! b!)` for `a + b ≤ degree`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    degree: usize,
    t: [[C64; SLOTS]; SLOTS],
}

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

impl Jet2 {
    pub fn constant(v: C64, degree: usize) -> Self {
        assert!(degree <= MAX_DEGREE, "jet degree {degree} above {MAX_DEGREE}");
        let mut t = [[ZERO; SLOTS]; SLOTS];
        t[0][0] = v;
        Jet2 { degree, t }
    }

    pub fn from_x(j: &Jet) -> Self {
        let mut out = Jet2::constant(ZERO, j.degree);
        for a in 0..=j.degree {
            out.t[a][0] = C64::new(j.c[a], 0.0);
        }
        out
    }

    pub fn from_xi(j: &Jet) -> Self {
        let mut out = Jet2::constant(ZERO, j.degree);
        for b in 0..=j.degree {
            out.t[0][b] = C64::new(j.c[b], 0.0);
        }
        out
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn value(&self) -> C64 {
        self.t[0][0]
    }

    pub fn coeff(&self, a: usize, b: usize) -> C64 {
        if a + b <= self.degree {
            self.t[a][b]
        } else {
            ZERO
        }
    }

    /// `∂ₓᵃ ∂_ξᵇ f` at the expansion point.
    pub fn partial(&self, a: usize, b: usize) -> C64 {
        self.coeff(a, b) * (factorial(a) * factorial(b))
    }

    pub fn truncate(mut self, degree: usize) -> Self {
        let d = degree.min(self.degree);
        for a in 0..SLOTS {
            for b in 0..SLOTS {
                if a + b > d {
                    self.t[a][b] = ZERO;
                }
            }
        }
        self.degree = d;
        self
    }

    pub fn scale(mut self, s: C64) -> Self {
        for row in self.t.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        self
    }

    pub fn recip(&self) -> Self {
        let d = self.degree;
        let f0 = self.t[0][0];
        let inv = 1.0 / f0;
        let mut g = Jet2::constant(inv, d);
        for total in 1..=d {
            for a in 0..=total {
                let b = total - a;
                let mut s = ZERO;
                for i in 0..=a {
                    for j in 0..=b {
                        if i + j == 0 {
                            continue;
                        }
                        s += self.t[i][j] * g.t[a - i][b - j];
                    }
                }
                g.t[a][b] = -s * inv;
            }
        }
        g
    }

    /// Jet of `∂ₓᵐ ∂_ξˡ f`, degree lowered by `m + l`.
    pub fn partial_jet(&self, m: usize, l: usize) -> Self {
        let d = self.degree.saturating_sub(m + l);
        let mut out = Jet2::constant(ZERO, d);
        if m + l > self.degree {
            return out;
        }
        for a in 0..=d {
            for b in 0..=d - a {
                let w = factorial(a + m) / factorial(a) * factorial(b + l) / factorial(b);
                out.t[a][b] = self.t[a + m][b + l] * w;
            }
        }
        out
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        let d = self.degree.min(o.degree);
        let mut out = self.truncate(d);
        for a in 0..=d {
            for b in 0..=d - a {
                out.t[a][b] += o.t[a][b];
            }
        }
        out
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self + o.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        let d = self.degree.min(o.degree);
        let mut out = Jet2::constant(ZERO, d);
        for a in 0..=d {
            for b in 0..=d - a {
                let mut s = ZERO;
                for i in 0..=a {
                    for j in 0..=b {
                        s += self.t[i][j] * o.t[a - i][b - j];
                    }
                }
                out.t[a][b] = s;
            }
        }
        out
    }
}
