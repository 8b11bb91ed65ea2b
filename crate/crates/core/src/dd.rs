//! Minimal double-double arithmetic.
//!
//! Return-time partition elements contract like `exp(-lambda * R)` along the
//! orbit, so for moderate return times their endpoints cannot be resolved in
//! plain `f64`: one ulp of endpoint motion moves the forward image by
//! `|d f^R| * ulp`, which quickly exceeds the tolerances the tower checks are
//! pinned at.  A double-double (roughly 32 significant digits) pushes the
//! usable return-time range far past anything the element widths themselves
//! allow, at a small constant-factor cost.  Only the handful of operations the
//! tower needs are implemented.

use std::cmp::Ordering;

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    /// pi to double-double precision.
    pub const PI: Dd = Dd {
        hi: 3.141592653589793,
        lo: 1.2246467991473532e-16,
    };
    /// 2*pi to double-double precision.
    pub const TWO_PI: Dd = Dd {
        hi: 6.283185307179586,
        lo: 2.4492935982947064e-16,
    };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn new(hi: f64, lo: f64) -> Dd {
        let (s, e) = quick_two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add(self, other: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, other.hi);
        let (t1, t2) = two_sum(self.lo, other.lo);
        let (s1, s2b) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2b + t2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn add_f64(self, other: f64) -> Dd {
        let (s1, s2) = two_sum(self.hi, other);
        let (hi, lo) = quick_two_sum(s1, s2 + self.lo);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sub(self, other: Dd) -> Dd {
        self.add(other.neg())
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    pub fn mul(self, other: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, other.hi);
        let p2 = p2 + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn mul_f64(self, other: f64) -> Dd {
        let (p1, p2) = two_prod(self.hi, other);
        let p2 = p2 + self.lo * other;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn div_f64(self, other: f64) -> Dd {
        let q1 = self.hi / other;
        let (p1, p2) = two_prod(q1, other);
        let r = ((self.hi - p1) - p2 + self.lo) / other;
        let (hi, lo) = quick_two_sum(q1, r);
        Dd { hi, lo }
    }

    #[inline]
    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            self.neg()
        } else {
            self
        }
    }

    /// Nearest integer (ties rounded via f64 `round` on the hi word).
    pub fn round(self) -> f64 {
        let r = self.hi.round();
        // hi exactly halfway: lo decides the side
        if (self.hi - r).abs() == 0.5 {
            if self.lo > 0.0 {
                return self.hi + 0.5;
            } else if self.lo < 0.0 {
                return self.hi - 0.5;
            }
        }
        r
    }

    pub fn floor(self) -> f64 {
        let f = self.hi.floor();
        if self.hi == f && self.lo < 0.0 {
            f - 1.0
        } else {
            f
        }
    }

    /// Reduce to [0, 1).
    pub fn rem_1(self) -> Dd {
        self.add_f64(-self.floor())
    }

    pub fn cmp_dd(self, other: Dd) -> Ordering {
        let d = self.sub(other);
        if d.hi > 0.0 || (d.hi == 0.0 && d.lo > 0.0) {
            Ordering::Greater
        } else if d.hi < 0.0 || (d.hi == 0.0 && d.lo < 0.0) {
            Ordering::Less
        } else {
            Ordering::Equal
        }
    }

    pub fn lt(self, other: Dd) -> bool {
        self.cmp_dd(other) == Ordering::Less
    }

    pub fn gt(self, other: Dd) -> bool {
        self.cmp_dd(other) == Ordering::Greater
    }

    /// Midpoint of two values, exact to double-double.
    pub fn midpoint(self, other: Dd) -> Dd {
        self.add(other).mul_f64(0.5)
    }
}

/// sin and cos of a double-double argument.
///
/// Argument is reduced by multiples of pi/2 (exact in dd for the magnitudes
/// the lab produces, |x| comfortably below 2^40) and the core series is a
/// plain Taylor expansion on [-pi/4, pi/4]; 15 terms leave the truncation
/// error below 1e-33.
pub fn sincos(x: Dd) -> (Dd, Dd) {
    // k = round(x / (pi/2))
    let half_pi = Dd::PI.mul_f64(0.5);
    let approx = x.to_f64() / half_pi.to_f64();
    let k = approx.round();
    let y = x.sub(half_pi.mul_f64(k));
    let (s, c) = sincos_taylor(y);
    let q = (k as i64).rem_euclid(4);
    match q {
        0 => (s, c),
        1 => (c, s.neg()),
        2 => (s.neg(), c.neg()),
        _ => (c.neg(), s),
    }
}

fn sincos_taylor(y: Dd) -> (Dd, Dd) {
    let y2 = y.mul(y);
    // sin(y) = y * sum_{k>=0} (-1)^k y^{2k} / (2k+1)!
    let mut s = Dd::ZERO;
    let mut term = Dd::ONE;
    let mut sign = 1.0;
    for k in 0..16 {
        if k > 0 {
            let denom = (2 * k) as f64 * (2 * k + 1) as f64;
            term = term.mul(y2).div_f64(denom);
        }
        s = s.add(term.mul_f64(sign));
        sign = -sign;
    }
    let s = y.mul(s);
    // cos(y) = sum_{k>=0} (-1)^k y^{2k} / (2k)!
    let mut c = Dd::ZERO;
    let mut term = Dd::ONE;
    let mut sign = 1.0;
    for k in 0..16 {
        if k > 0 {
            let denom = (2 * k - 1) as f64 * (2 * k) as f64;
            term = term.mul(y2).div_f64(denom);
        }
        c = c.add(term.mul_f64(sign));
        sign = -sign;
    }
    (s, c)
}

/// sin(2*pi*x) with the argument first reduced mod 1 in double-double.
pub fn sin_2pi(x: Dd) -> Dd {
    let u = x.rem_1();
    sincos(Dd::TWO_PI.mul(u)).0
}

/// (sin(2*pi*x), cos(2*pi*x)) with mod-1 reduction.
pub fn sincos_2pi(x: Dd) -> (Dd, Dd) {
    let u = x.rem_1();
    sincos(Dd::TWO_PI.mul(u))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_identities() {
        let a = Dd::from_f64(0.1).add_f64(1e-20);
        let b = Dd::from_f64(0.3);
        let c = a.add(b).sub(b);
        assert!((c.sub(a)).to_f64().abs() < 1e-32);
        let p = a.mul(b);
        // 0.1*0.3 to dd precision: compare against mul of exact decomposition
        assert!((p.to_f64() - 0.03).abs() < 1e-16);
    }

    #[test]
    fn sincos_pythagoras() {
        for i in 0..200 {
            let x = Dd::from_f64(i as f64 * 0.037 - 3.0);
            let (s, c) = sincos(x);
            let one = s.mul(s).add(c.mul(c));
            assert!(
                (one.to_f64() - 1.0).abs() < 1e-30,
                "s^2+c^2 = {} at i={}",
                one.to_f64(),
                i
            );
        }
    }

    #[test]
    fn sincos_matches_reference() {
        // Frozen from 40-digit evaluation at the f64 value of 0.11:
        // sin(2*pi*fl(0.11)) = 0.6374239897486897128641616784521685...
        let s = sin_2pi(Dd::from_f64(0.11));
        assert!((s.to_f64() - 0.6374239897486897128).abs() < 1e-16);
        // lo word should refine the f64 value
        let f64_only = (2.0 * std::f64::consts::PI * 0.11).sin();
        assert!((s.to_f64() - f64_only).abs() < 1e-15);
        // sin(2*pi*0.25) = 1 exactly
        let s1 = sin_2pi(Dd::from_f64(0.25));
        assert!((s1.to_f64() - 1.0).abs() < 1e-31);
    }

    #[test]
    fn periodic_reduction_is_consistent() {
        // shifts built in dd so the argument is exactly x + k
        let x = Dd::from_f64(0.3);
        let a = sin_2pi(x);
        let b = sin_2pi(x.add_f64(7.0));
        assert!(a.sub(b).to_f64().abs() < 1e-30);
        let c = sin_2pi(x.add_f64(-1.0));
        assert!(a.sub(c).to_f64().abs() < 1e-30);
    }

    #[test]
    fn rounding_helpers() {
        assert_eq!(Dd::from_f64(2.5).add_f64(1e-18).round(), 3.0);
        assert_eq!(Dd::from_f64(2.5).add_f64(-1e-18).round(), 2.0);
        assert_eq!(Dd::from_f64(3.0).add_f64(-1e-18).floor(), 2.0);
        let r = Dd::from_f64(1.25).rem_1();
        assert!((r.to_f64() - 0.25).abs() < 1e-30);
    }
}
