//! Minimal double-double arithmetic.
//!
//! A [`Dd`] value represents `hi + lo` with `|lo| <= ulp(hi)/2`, giving
//! roughly 106 bits of significand. Only the operations needed by the
//! log-factorial table live here: error-free add/mul, division, `exp` and
//! `ln`. Everything is deterministic and branch-stable.

/// Unevaluated two-float sum `hi + lo`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

/// ln 2 to double-double precision.
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

// Dekker product via FMA: a*b = p + e exactly.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    #[inline]
    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sub(self, other: Dd) -> Dd {
        self.add(Dd {
            hi: -other.hi,
            lo: -other.lo,
        })
    }

    #[inline]
    pub fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div(self, other: Dd) -> Dd {
        let q1 = self.hi / other.hi;
        let r = self.sub(Dd::from_f64(q1).mul(other));
        let q2 = r.hi / other.hi;
        let r = r.sub(Dd::from_f64(q2).mul(other));
        let q3 = r.hi / other.hi;
        let (s, e) = quick_two_sum(q1, q2);
        Dd { hi: s, lo: e }.add(Dd::from_f64(q3))
    }

    /// `exp(self)` for arguments in the comfortable range `|x| < 700`.
    ///
    /// Argument reduction `x = m ln2 + r`, then `exp(r/512)` by Taylor
    /// series and nine repeated squarings of `exp(t) - 1`.
    pub fn exp(self) -> Dd {
        let m = (self.hi / LN2.hi).round();
        let r = self.sub(LN2.mul(Dd::from_f64(m)));
        let r = Dd {
            hi: r.hi / 512.0,
            lo: r.lo / 512.0,
        };

        // s = exp(r) - 1 by Taylor; |r| <= ln2/1024 keeps the series short.
        let mut p = r.mul(r);
        let mut s = r.add(Dd {
            hi: p.hi * 0.5,
            lo: p.lo * 0.5,
        });
        p = p.mul(r);
        let mut fact = 6.0;
        let mut i = 3u32;
        let mut term = p.div(Dd::from_f64(fact));
        while term.hi.abs() > 1e-40 {
            s = s.add(term);
            p = p.mul(r);
            i += 1;
            fact *= i as f64;
            term = p.div(Dd::from_f64(fact));
        }

        for _ in 0..9 {
            // (1+s)^2 - 1 = s^2 + 2s
            s = s.mul(s).add(Dd {
                hi: 2.0 * s.hi,
                lo: 2.0 * s.lo,
            });
        }
        let s = s.add(Dd::from_f64(1.0));
        let scale = f64::powi(2.0, m as i32);
        Dd {
            hi: s.hi * scale,
            lo: s.lo * scale,
        }
    }

    /// `ln(x)` for `x >= 1`, by one Newton step from the f64 seed:
    /// `y1 = y0 + (x - exp(y0)) / exp(y0)`.
    pub fn ln_f64(x: f64) -> Dd {
        debug_assert!(x >= 1.0);
        if x == 1.0 {
            return ZERO;
        }
        let y0 = x.ln();
        let e = Dd::from_f64(y0).exp();
        let d = Dd::from_f64(x).sub(e).div(e);
        Dd::from_f64(y0).add(d)
    }
}
