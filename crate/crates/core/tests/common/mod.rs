//! Test-only double-double arithmetic (about 106 bits of mantissa) used as an
//! independent oracle for the f64 kernels.

#![allow(dead_code)]

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn from_pair((hi, lo): (f64, f64)) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }

    fn scale(self, p: f64) -> Self {
        // p is a power of two: exact.
        Dd {
            hi: self.hi * p,
            lo: self.lo * p,
        }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            assert!(self.hi == 0.0, "sqrt of negative {self:?}");
            return Dd::ZERO;
        }
        let y = Dd::new(self.hi.sqrt());
        y + (self - y * y) / (y * Dd::new(2.0))
    }

    pub fn exp(self) -> Self {
        if self.hi == 0.0 {
            return Dd::ONE;
        }
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * Dd::new(k)).scale(1.0 / 1024.0);
        // Taylor series of e^r - 1 for |r| < 4e-4.
        let mut term = r;
        let mut sum = r;
        for n in 2..=20 {
            term = term * r / Dd::new(n as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        // (1 + s)^2 - 1 = s (2 + s), ten times.
        for _ in 0..10 {
            sum = sum * (sum + Dd::new(2.0));
        }
        (sum + Dd::ONE).scale(2f64.powi(k as i32))
    }

    pub fn ln(self) -> Self {
        assert!(self.hi > 0.0, "ln of nonpositive {self:?}");
        let mut y = Dd::new(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::ONE;
        }
        y
    }

    pub fn powi(self, n: u32) -> Self {
        (0..n).fold(Dd::ONE, |acc, _| acc * self)
    }

    pub fn max(self, other: Dd) -> Dd {
        if self > other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Dd) -> Dd {
        if self < other {
            self
        } else {
            other
        }
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::new(x)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Dd::from_pair((s, e + f))
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        Dd::from_pair((p, e + (self.hi * o.lo + self.lo * o.hi)))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::new(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::new(q2);
        let q3 = r.hi / o.hi;
        Dd::from_pair((q1, q2)) + Dd::new(q3)
    }
}

pub fn dd(x: f64) -> Dd {
    Dd::new(x)
}

/// `mu^n / n!` for `n = 0..count`, accumulated in double-double.
pub fn poisson_terms(mu: f64, count: usize) -> Vec<Dd> {
    let mut out = Vec::with_capacity(count);
    let mut t = Dd::ONE;
    for n in 0..count {
        if n > 0 {
            t = t * dd(mu) / dd(n as f64);
        }
        out.push(t);
    }
    out
}

pub fn ln_factorial(n: u64) -> Dd {
    (2..=n).fold(Dd::ZERO, |acc, i| acc + dd(i as f64).ln())
}

pub fn binary_entropy(x: Dd) -> Dd {
    if x.hi == 0.0 || x.hi == 1.0 {
        return Dd::ZERO;
    }
    let y = Dd::ONE - x;
    -(x * x.ln() + y * y.ln()) / LN2
}

/// `x + beta + sqrt(2 beta x + beta^2)`.
pub fn phi_upper(x: Dd, beta: Dd) -> Dd {
    x + beta + (dd(2.0) * beta * x + beta * beta).sqrt()
}

/// `x + beta/2 + sqrt(2 beta x + beta^2 / 4)`.
pub fn phi_observed(x: Dd, beta: Dd) -> Dd {
    x + beta / dd(2.0) + (dd(2.0) * beta * x + beta * beta / dd(4.0)).sqrt()
}

/// Kato coefficients `(a, b, delta)` straight from the closed forms.
pub fn kato(n: f64, lambda: f64, eps_ka: f64) -> (Dd, Dd, Dd) {
    let (n_, l) = (dd(n), dd(lambda));
    let le = dd(eps_ka).ln();
    let sn = n_.sqrt();
    let spread = dd(9.0) * l * (n_ - l) - dd(2.0) * n_ * le;
    let a1 = (-(n_ * n_) * le * spread).sqrt();
    let num = dd(3.0)
        * (dd(72.0) * sn * l * (n_ - l) * le - dd(16.0) * n_ * sn * le * le
            + dd(9.0) * dd(2.0).sqrt() * (n_ - dd(2.0) * l) * a1);
    let den = dd(4.0) * (dd(9.0) * n_ - dd(8.0) * le) * spread;
    let a = num / den;
    let b = (dd(18.0) * a * a * n_ - (dd(16.0) * a * a + dd(24.0) * a * sn + dd(9.0) * n_) * le).sqrt()
        / (dd(3.0) * (dd(2.0) * n_).sqrt());
    let delta = (b + a * (dd(2.0) * l / n_ - Dd::ONE)) * sn;
    (a, b, delta)
}

/// Right-hand side of the Kato tail bound with the squared denominator.
pub fn kato_tail(a: Dd, b: Dd, n: f64) -> Dd {
    let d = Dd::ONE + dd(4.0) * a / (dd(3.0) * dd(n).sqrt());
    (-(dd(2.0) * (b * b - a * a)) / (d * d)).exp()
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

#[track_caller]
pub fn assert_rel(got: f64, want: f64, tol: f64, what: &str) {
    let e = rel_err(got, want);
    assert!(e <= tol, "{what}: got {got:e}, want {want:e}, rel err {e:e} > {tol:e}");
}
