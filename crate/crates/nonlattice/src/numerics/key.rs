//! Exact support keys for values of the form `sign * sqrt(num/den)`.
//!
//! Distinct lattice outcomes `(d, t)` and `(2d, 4t)` represent the same
//! real number `d/sqrt(t)`; aggregating by the reduced pair `(d^2, t)`
//! merges exactly those collisions and no others. Keys order and compare
//! by the real value they denote, via integer cross-multiplication.

use std::cmp::Ordering;

use num_bigint::BigUint;
use num_integer::Integer;

use crate::{Error, Result};

/// Canonical exact representation of `w = d / sqrt(t)`:
/// `sign * sqrt(num / den)` with `gcd(num, den) = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RationalKey {
    sign: i8,
    num: BigUint,
    den: BigUint,
}

impl RationalKey {
    /// The key of the value zero.
    pub fn zero() -> Self {
        RationalKey {
            sign: 0,
            num: BigUint::ZERO,
            den: BigUint::from(1u8),
        }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn num(&self) -> &BigUint {
        &self.num
    }

    pub fn den(&self) -> &BigUint {
        &self.den
    }

    /// Float image of the represented real number.
    pub fn to_f64(&self) -> f64 {
        if self.sign == 0 {
            return 0.0;
        }
        let num = biguint_to_f64(&self.num);
        let den = biguint_to_f64(&self.den);
        self.sign as f64 * (num / den).sqrt()
    }

    pub(crate) fn from_reduced_parts(sign: i8, num: u64, den: u64) -> Self {
        debug_assert!(den >= 1);
        debug_assert!((sign == 0) == (num == 0));
        RationalKey {
            sign,
            num: BigUint::from(num),
            den: BigUint::from(den),
        }
    }

    /// `(sign, num, den)` as machine words when they fit.
    pub(crate) fn small_parts(&self) -> Option<(i8, u64, u64)> {
        let num = u64::try_from(&self.num).ok()?;
        let den = u64::try_from(&self.den).ok()?;
        Some((self.sign, num, den))
    }
}

fn biguint_to_f64(x: &BigUint) -> f64 {
    let mut acc = 0.0f64;
    for d in x.to_u64_digits().iter().rev() {
        acc = acc * 1.844_674_407_370_955_2e19 + *d as f64; // base 2^64
    }
    acc
}

/// Build the exact key of `d / sqrt(t)`.
///
/// `t = 0` is rejected; the zero statistic maps to [`RationalKey::zero`]
/// at the aggregation layer, not here.
pub fn rational_key(d: i64, t: i64) -> Result<RationalKey> {
    if t <= 0 {
        return Err(Error::domain(format!("rational_key: t = {t} must be >= 1")));
    }
    if d.unsigned_abs() > t as u64 {
        return Err(Error::domain(format!(
            "rational_key: |d| = {} exceeds t = {t}",
            d.unsigned_abs()
        )));
    }
    if d == 0 {
        return Ok(RationalKey::zero());
    }
    let (num, den) = reduce_u128((d.unsigned_abs() as u128).pow(2), t as u128);
    Ok(RationalKey {
        sign: d.signum() as i8,
        num: biguint_from_u128(num),
        den: biguint_from_u128(den),
    })
}

pub(crate) fn reduce_u128(num: u128, den: u128) -> (u128, u128) {
    let g = num.gcd(&den);
    (num / g, den / g)
}

fn biguint_from_u128(x: u128) -> BigUint {
    BigUint::from(x)
}

/// Total order consistent with the real values `sign * sqrt(num/den)`.
///
/// Same-sign keys compare by exact cross-multiplication `num_a * den_b`
/// against `num_b * den_a`; a `u128` fast path covers every sample size
/// this crate can enumerate, with big-integer fallback beyond.
pub fn compare_keys(a: &RationalKey, b: &RationalKey) -> Ordering {
    match a.sign.cmp(&b.sign) {
        Ordering::Equal => {}
        other => return other,
    }
    if a.sign == 0 {
        return Ordering::Equal;
    }
    let magnitude = match (a.small_parts(), b.small_parts()) {
        (Some((_, an, ad)), Some((_, bn, bd))) => {
            let left = an as u128 * bd as u128;
            let right = bn as u128 * ad as u128;
            left.cmp(&right)
        }
        _ => (&a.num * &b.den).cmp(&(&b.num * &a.den)),
    };
    if a.sign > 0 {
        magnitude
    } else {
        magnitude.reverse()
    }
}

impl PartialOrd for RationalKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RationalKey {
    fn cmp(&self, other: &Self) -> Ordering {
        compare_keys(self, other)
    }
}

/// Exact comparison of the key's value against an arbitrary finite float.
///
/// A float is a dyadic rational, so `key <=> w` reduces to comparing
/// `num / den` with `w^2` by integer cross-multiplication.
pub fn compare_key_to_f64(key: &RationalKey, w: f64) -> Ordering {
    debug_assert!(w.is_finite());
    let w_sign = if w > 0.0 {
        1i8
    } else if w < 0.0 {
        -1
    } else {
        0
    };
    match key.sign.cmp(&w_sign) {
        Ordering::Equal => {}
        other => return other,
    }
    if key.sign == 0 {
        return Ordering::Equal;
    }

    // decompose |w| = mant * 2^exp with integer mant
    let (mant, exp) = decompose(w.abs());
    // compare num/den vs mant^2 * 2^(2 exp)
    let mant_sq = BigUint::from(mant) * BigUint::from(mant);
    let (mut lhs, mut rhs) = (key.num.clone(), mant_sq * &key.den);
    if exp >= 0 {
        rhs <<= 2 * exp as usize;
    } else {
        lhs <<= 2 * (-exp) as usize;
    }
    let magnitude = lhs.cmp(&rhs);
    if key.sign > 0 {
        magnitude
    } else {
        magnitude.reverse()
    }
}

fn decompose(x: f64) -> (u64, i64) {
    debug_assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if raw_exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), raw_exp - 1075)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_values_collide() {
        let a = rational_key(1, 1).unwrap();
        let b = rational_key(2, 4).unwrap();
        assert_eq!(a, b);
        let c = rational_key(1, 2).unwrap();
        let d = rational_key(2, 8).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn sign_distinguishes() {
        let neg = rational_key(-3, 5).unwrap();
        assert_eq!(neg.sign(), -1);
        assert_eq!(u64::try_from(neg.num()).unwrap(), 9);
        assert_eq!(u64::try_from(neg.den()).unwrap(), 5);
        assert_ne!(neg, rational_key(3, 5).unwrap());
    }

    #[test]
    fn ordering_matches_reals() {
        let one = rational_key(1, 1).unwrap();
        let inv_sqrt2 = rational_key(1, 2).unwrap();
        assert_eq!(compare_keys(&inv_sqrt2, &one), Ordering::Less);

        let neg = rational_key(-1, 1).unwrap();
        let zero = RationalKey::zero();
        assert!(neg < zero && zero < one);

        // 7/sqrt(50) < 1 since 49 < 50
        let k = rational_key(7, 50).unwrap();
        assert_eq!(compare_keys(&k, &one), Ordering::Less);
    }

    #[test]
    fn domain_errors() {
        assert!(rational_key(1, 0).is_err());
        assert!(rational_key(1, -3).is_err());
        assert!(rational_key(5, 3).is_err());
    }

    #[test]
    fn float_comparison_is_exact() {
        let k = rational_key(1, 2).unwrap(); // 1/sqrt(2)
        let w = k.to_f64();
        // float image of an irrational value can never equal it exactly
        assert_ne!(compare_key_to_f64(&k, w), Ordering::Equal);
        assert_eq!(compare_key_to_f64(&k, 0.8), Ordering::Less);
        assert_eq!(compare_key_to_f64(&k, 0.7), Ordering::Greater);

        let one = rational_key(1, 1).unwrap();
        assert_eq!(compare_key_to_f64(&one, 1.0), Ordering::Equal);
        assert_eq!(
            compare_key_to_f64(&RationalKey::zero(), 0.0),
            Ordering::Equal
        );
        assert_eq!(
            compare_key_to_f64(&rational_key(-1, 1).unwrap(), -1.0),
            Ordering::Equal
        );
    }

    // keys equal <=> d^2 t' = d'^2 t and signum(d) = signum(d'),
    // exhaustively over 1 <= t, t' <= 200.
    #[test]
    fn collision_characterization_exhaustive() {
        use std::collections::HashMap;

        let t_max: i64 = 200;
        let mut by_key: HashMap<(i8, u64, u64), Vec<(i64, i64)>> = HashMap::new();
        for t in 1..=t_max {
            for d in -t..=t {
                let key = rational_key(d, t).unwrap();
                let (s, n, den) = key.small_parts().unwrap();
                by_key.entry((s, n, den)).or_default().push((d, t));
            }
        }
        // within a bucket, the cross relation must hold for all pairs
        for ((s, _, _), members) in &by_key {
            for &(d, t) in members {
                for &(d2, t2) in members {
                    assert_eq!(d.signum() as i8, *s);
                    assert_eq!(
                        (d as i128 * d as i128) * t2 as i128,
                        (d2 as i128 * d2 as i128) * t as i128
                    );
                }
            }
        }
        // conversely, every (d,t), (d',t') satisfying the relation lands
        // in the same bucket: enumerate the relation directly.
        for t in 1..=t_max {
            for d in 1..=t {
                let lhs = rational_key(d, t).unwrap();
                let d2t = d as i128 * d as i128;
                for t2 in 1..=t_max {
                    let num = d2t * t2 as i128;
                    if num % t as i128 != 0 {
                        continue;
                    }
                    let d2_sq = num / t as i128;
                    let d2 = (d2_sq as f64).sqrt().round() as i128;
                    if d2 * d2 != d2_sq || d2 > t2 as i128 {
                        continue;
                    }
                    assert_eq!(lhs, rational_key(d2 as i64, t2).unwrap());
                }
            }
        }
    }

    // strict total order: antisymmetric and transitive on sampled triples
    #[test]
    fn order_is_total_on_sampled_triples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut keys = Vec::new();
        for _ in 0..300 {
            let t = rng.random_range(1..=400i64);
            let d = rng.random_range(-t..=t);
            keys.push(rational_key(d, t).unwrap());
        }
        for _ in 0..10_000 {
            let a = &keys[rng.random_range(0..keys.len())];
            let b = &keys[rng.random_range(0..keys.len())];
            let c = &keys[rng.random_range(0..keys.len())];
            // antisymmetry
            assert_eq!(compare_keys(a, b), compare_keys(b, a).reverse());
            // transitivity
            if compare_keys(a, b) != Ordering::Greater && compare_keys(b, c) != Ordering::Greater {
                assert_ne!(compare_keys(a, c), Ordering::Greater);
            }
        }
    }
}
