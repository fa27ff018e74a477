//! Double-double arithmetic (about 29 significant digits here) for the
//! finite-difference oracle.
//!
//! A central difference at step `1e-5` cancels roughly five of the sixteen
//! digits an `f64` loss carries, which swamps gradients near `1e-6`. Running
//! the oracle's forward passes in double-double removes that roundoff floor
//! while leaving the difference formula itself unchanged.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub(crate) struct Dd {
    hi: f64,
    lo: f64,
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub(crate) const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub(crate) const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub(crate) fn new(v: f64) -> Dd {
        Dd { hi: v, lo: 0.0 }
    }

    pub(crate) fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn renorm(hi: f64, lo: f64) -> Dd {
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }

    fn ldexp(self, k: i32) -> Dd {
        let s = 2f64.powi(k);
        Dd {
            hi: self.hi * s,
            lo: self.lo * s,
        }
    }

    pub(crate) fn exp(self) -> Dd {
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        if self.hi > 709.0 {
            return Dd::new(f64::INFINITY);
        }
        // x = k ln2 + r, |r| <= ln2 / 2; then exp(r) = exp(r / 512)^512
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * Dd::new(k)).ldexp(-9);
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for n in 1..=14 {
            term = term * r / Dd::new(n as f64);
            sum = sum + term;
        }
        for _ in 0..9 {
            sum = sum * sum;
        }
        sum.ldexp(k as i32)
    }

    pub(crate) fn ln(self) -> Dd {
        // one Newton step on exp(y) = x doubles the f64 estimate's digits
        let y = Dd::new(self.hi.ln());
        y + self * (-y).exp() - Dd::ONE
    }
}

impl Add for Dd {
    type Output = Dd;

    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Dd::renorm(s, e + f)
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

impl Sub for Dd {
    type Output = Dd;

    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;

    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        Dd::renorm(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Div for Dd {
    type Output = Dd;

    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::new(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::new(q2);
        let q3 = r.hi / b.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        Dd { hi: q1, lo: q2 } + Dd::new(q3)
    }
}

pub(crate) fn sigmoid(z: Dd) -> Dd {
    Dd::ONE / (Dd::ONE + (-z).exp())
}

/// `logsumexp(scores) - scores[label]`.
pub(crate) fn cross_entropy(scores: &[Dd], label: usize) -> Dd {
    let max = scores.iter().copied().fold(scores[0], |m, s| if s > m { s } else { m });
    let sum = scores.iter().fold(Dd::ZERO, |acc, &s| acc + (s - max).exp());
    sum.ln() - (scores[label] - max)
}
