//! Precision-carrying dyadic scalars.
//!
//! `RealScalar` is a big-integer mantissa times a power of two together with
//! a declared precision in bits. Addition, subtraction and multiplication are
//! exact (the mantissa grows); division, square roots and logarithms round to
//! a requested precision. Exactness of ring operations is what makes
//! distance-to-nearest-integer and the record comparisons reproducible.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{Signed, ToPrimitive, Zero};
use std::cmp::Ordering;

/// Minimum declared precision accepted anywhere.
pub const MIN_PRECISION_BITS: u32 = 64;

/// Default working precision for evaluations.
pub const DEFAULT_PRECISION_BITS: u32 = 128;

#[derive(Debug, Clone)]
pub struct RealScalar {
    mantissa: BigInt,
    exponent: i64,
    precision_bits: u32,
    downgraded: bool,
}

fn round_shift_nearest(mag: &BigUint, shift: u64) -> BigUint {
    if shift == 0 {
        return mag.clone();
    }
    let q: BigUint = mag >> shift;
    let rem: BigUint = mag - (&q << shift);
    let half: BigUint = BigUint::from(1u8) << (shift - 1);
    match rem.cmp(&half) {
        Ordering::Less => q,
        Ordering::Greater => q + 1u8,
        Ordering::Equal => {
            // ties to even
            if (&q & BigUint::from(1u8)).is_zero() {
                q
            } else {
                q + 1u8
            }
        }
    }
}

impl RealScalar {
    fn normalized(mut mantissa: BigInt, mut exponent: i64, precision_bits: u32, downgraded: bool) -> Self {
        if mantissa.is_zero() {
            exponent = 0;
        } else {
            let tz = mantissa.trailing_zeros().unwrap_or(0);
            if tz > 0 {
                mantissa >>= tz;
                exponent += tz as i64;
            }
        }
        RealScalar {
            mantissa,
            exponent,
            precision_bits: precision_bits.max(MIN_PRECISION_BITS),
            downgraded,
        }
    }

    pub fn zero(precision_bits: u32) -> Self {
        Self::normalized(BigInt::zero(), 0, precision_bits, false)
    }

    pub fn from_bigint(v: BigInt, precision_bits: u32) -> Self {
        Self::normalized(v, 0, precision_bits, false)
    }

    pub fn from_i64(v: i64, precision_bits: u32) -> Self {
        Self::from_bigint(BigInt::from(v), precision_bits)
    }

    /// `num/den` rounded to `precision_bits` significant bits (nearest, ties to even).
    pub fn from_ratio(num: &BigInt, den: &BigInt, precision_bits: u32) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return Self::zero(precision_bits);
        }
        let neg = num.is_negative() ^ den.is_negative();
        let n = num.magnitude().clone();
        let d = den.magnitude().clone();
        let nb = n.bits() as i64;
        let db = d.bits() as i64;
        // shift so the integer quotient carries precision_bits + 2 significant bits
        let s = (precision_bits as i64 + 2) - (nb - db) + 1;
        let (shifted, exp) = if s >= 0 {
            (n << (s as u64), -s)
        } else {
            (n >> ((-s) as u64), -s) // quotient already wide enough; cheap truncation
        };
        let q = &shifted / &d;
        let rem = &shifted - &q * &d;
        let twice: BigUint = &rem << 1u8;
        let q = match twice.cmp(&d) {
            Ordering::Less => q,
            Ordering::Greater => q + 1u8,
            Ordering::Equal => {
                if (&q & BigUint::from(1u8)).is_zero() {
                    q
                } else {
                    q + 1u8
                }
            }
        };
        let v = Self::normalized(BigInt::from(q), exp, precision_bits, false);
        v.round_to_precision(precision_bits).with_sign(neg)
    }

    fn with_sign(mut self, neg: bool) -> Self {
        if neg {
            self.mantissa = -self.mantissa;
        }
        self
    }

    /// Round to `bits` significant bits (nearest, ties to even); exact if already narrower.
    pub fn round_to_precision(&self, bits: u32) -> Self {
        let width = self.mantissa.bits();
        if width <= bits as u64 {
            let mut v = self.clone();
            v.precision_bits = bits.max(MIN_PRECISION_BITS);
            return v;
        }
        let shift = width - bits as u64;
        let mag = round_shift_nearest(self.mantissa.magnitude(), shift);
        let m = BigInt::from_biguint(if self.mantissa.is_negative() { Sign::Minus } else { Sign::Plus }, mag);
        Self::normalized(m, self.exponent + shift as i64, bits, self.downgraded)
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    pub fn downgraded(&self) -> bool {
        self.downgraded
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    fn meta(a: &Self, b: &Self) -> (u32, bool) {
        let p = a.precision_bits.min(b.precision_bits);
        let flag = a.downgraded || b.downgraded || a.precision_bits != b.precision_bits;
        (p, flag)
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let (p, flag) = Self::meta(self, rhs);
        let (a, b) = (self, rhs);
        let (m, e) = if a.exponent >= b.exponent {
            ((&a.mantissa << (a.exponent - b.exponent) as u64) + &b.mantissa, b.exponent)
        } else {
            (&a.mantissa + (&b.mantissa << (b.exponent - a.exponent) as u64), a.exponent)
        };
        Self::normalized(m, e, p, flag)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        Self::normalized(-self.mantissa.clone(), self.exponent, self.precision_bits, self.downgraded)
    }

    pub fn abs(&self) -> Self {
        Self::normalized(self.mantissa.abs(), self.exponent, self.precision_bits, self.downgraded)
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let (p, flag) = Self::meta(self, rhs);
        Self::normalized(&self.mantissa * &rhs.mantissa, self.exponent + rhs.exponent, p, flag)
    }

    pub fn mul_i64(&self, k: i64) -> Self {
        Self::normalized(&self.mantissa * k, self.exponent, self.precision_bits, self.downgraded)
    }

    pub fn div(&self, rhs: &Self, bits: u32) -> Self {
        assert!(!rhs.is_zero(), "division by zero");
        let q = Self::from_ratio(&self.mantissa, &rhs.mantissa, bits);
        let (_, flag) = Self::meta(self, rhs);
        let mut q = Self::normalized(q.mantissa, q.exponent + self.exponent - rhs.exponent, bits, flag);
        q.downgraded = flag;
        q
    }

    /// `sqrt(c)` for a nonnegative integer, rounded to `bits` significant bits
    /// (within one ulp of the true value).
    pub fn sqrt_of_uint(c: &BigUint, bits: u32) -> Self {
        if c.is_zero() {
            return Self::zero(bits);
        }
        let s = bits as u64 + 8;
        let scaled: BigUint = c << (2 * s);
        let r = scaled.sqrt();
        Self::normalized(BigInt::from(r), -(s as i64), bits, false).round_to_precision(bits)
    }

    /// Numeric ordering (independent of precision metadata).
    pub fn cmp_value(&self, rhs: &Self) -> Ordering {
        let ls = self.mantissa.sign();
        let rs = rhs.mantissa.sign();
        if ls != rs {
            return if ls == Sign::Minus || rs == Sign::Plus {
                Ordering::Less
            } else {
                Ordering::Greater
            };
        }
        if ls == Sign::NoSign {
            return Ordering::Equal;
        }
        // same nonzero sign: compare magnitudes by (bit length + exponent) first
        let la = self.mantissa.bits() as i64 + self.exponent;
        let lb = rhs.mantissa.bits() as i64 + rhs.exponent;
        let mag = if la != lb {
            la.cmp(&lb)
        } else {
            // align within one bit-length: shifts stay small
            let (a, b) = (self, rhs);
            if a.exponent >= b.exponent {
                (a.mantissa.magnitude().clone() << (a.exponent - b.exponent) as u64).cmp(b.mantissa.magnitude())
            } else {
                a.mantissa
                    .magnitude()
                    .cmp(&(b.mantissa.magnitude().clone() << (b.exponent - a.exponent) as u64))
            }
        };
        if ls == Sign::Minus {
            mag.reverse()
        } else {
            mag
        }
    }

    /// Nearest integer (ties to even).
    pub fn round_to_int(&self) -> BigInt {
        if self.exponent >= 0 {
            return &self.mantissa << self.exponent as u64;
        }
        let shift = (-self.exponent) as u64;
        let mag = round_shift_nearest(self.mantissa.magnitude(), shift);
        BigInt::from_biguint(if self.mantissa.is_negative() { Sign::Minus } else { Sign::Plus }, mag)
    }

    /// Distance to the nearest integer, exact; the result lies in [0, 1/2].
    pub fn dist_to_nearest_int(&self) -> Self {
        let m = self.round_to_int();
        self.sub(&Self::from_bigint(m, self.precision_bits)).abs()
    }

    pub fn to_f64(&self) -> f64 {
        if self.mantissa.is_zero() {
            return 0.0;
        }
        let bits = self.mantissa.bits();
        let (top, e_adj) = if bits > 54 {
            let shift = bits - 54;
            let mag: BigUint = self.mantissa.magnitude() >> shift;
            (mag.to_u64().unwrap() as f64, self.exponent + shift as i64)
        } else {
            (self.mantissa.magnitude().to_u64().unwrap() as f64, self.exponent)
        };
        let signed = if self.mantissa.is_negative() { -top } else { top };
        if e_adj > 1024 {
            return if signed < 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
        }
        libm_ldexp(signed, e_adj)
    }

    /// Floor of log2(|self|); `None` for zero.
    pub fn log2_floor(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.mantissa.bits() as i64 - 1 + self.exponent)
        }
    }

    /// Fast log2(|self|) in f64, never under- or overflowing; `None` for zero.
    /// Accurate to ~1e-15 relative; scans use this and re-derive the few
    /// extremal values through `log2_fixed`.
    pub fn log2_approx(&self) -> Option<f64> {
        if self.is_zero() {
            return None;
        }
        let bits = self.mantissa.bits();
        let top = if bits > 53 {
            (self.mantissa.magnitude() >> (bits - 53)).to_u64().unwrap()
        } else {
            self.mantissa.magnitude().to_u64().unwrap() << (53 - bits)
        };
        // top in [2^52, 2^53)
        let frac = (top as f64 / 2f64.powi(52)).log2();
        Some((bits as i64 - 1 + self.exponent) as f64 + frac)
    }

    /// log2(|self|) with `frac_bits` fractional bits, by squaring bit
    /// extraction. The result is exact dyadic with absolute error
    /// below 2^(1 - frac_bits). `None` for zero input.
    pub fn log2_fixed(&self, frac_bits: u32) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let width = self.mantissa.bits();
        let int_part = width as i64 - 1 + self.exponent;
        // x = mantissa normalized into [1, 2) as a fixed-point with w fractional bits
        let w = frac_bits as u64 + 16;
        let mut x: BigUint = if width <= w + 1 {
            self.mantissa.magnitude() << (w + 1 - width)
        } else {
            round_shift_nearest(self.mantissa.magnitude(), width - (w + 1))
        };
        let one: BigUint = BigUint::from(1u8) << w;
        let two: BigUint = &one << 1u8;
        let mut frac = BigUint::zero();
        for _ in 0..frac_bits {
            // square, rescale back to w fractional bits
            let sq = &x * &x;
            x = round_shift_nearest(&sq, w);
            frac <<= 1u8;
            if x >= two {
                x = round_shift_nearest(&x, 1);
                frac += 1u8;
            }
        }
        let total = BigInt::from(int_part) * (BigInt::from(1u8) << frac_bits) + BigInt::from(frac);
        Some(Self::normalized(total, -(frac_bits as i64), self.precision_bits, false))
    }
}

fn libm_ldexp(x: f64, e: i64) -> f64 {
    // f64 exponent range fits in i32 after clamping
    let e = e.clamp(-2200, 2200) as i32;
    let mut v = x;
    let mut rem = e;
    while rem > 1000 {
        v *= f64::powi(2.0, 1000);
        rem -= 1000;
    }
    while rem < -1000 {
        v *= f64::powi(2.0, -1000);
        rem += 1000;
    }
    v * f64::powi(2.0, rem)
}

impl PartialEq for RealScalar {
    fn eq(&self, other: &Self) -> bool {
        self.mantissa == other.mantissa && self.exponent == other.exponent
    }
}
impl Eq for RealScalar {}

impl PartialOrd for RealScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp_value(other))
    }
}

/// Distance from `v` to the nearest integer; exact, in [0, 1/2].
pub fn nearest_integer_distance(v: &RealScalar) -> RealScalar {
    v.dist_to_nearest_int()
}

/// log(1/err) / log(|q|), both logarithms taken in extended precision and the
/// quotient correctly rounded to f64. Requires 0 < err and |q| >= 2.
pub fn local_exponent(err: &RealScalar, q_abs: u64) -> Option<f64> {
    if err.is_zero() || q_abs < 2 {
        return None;
    }
    let le = err.log2_fixed(96)?;
    let lq = RealScalar::from_i64(q_abs as i64, DEFAULT_PRECISION_BITS).log2_fixed(96)?;
    Some(le.neg().div(&lq, 160).to_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn rs(v: i64) -> RealScalar {
        RealScalar::from_i64(v, 64)
    }

    #[test]
    fn ratio_matches_f64() {
        let v = RealScalar::from_ratio(&BigInt::from(1), &BigInt::from(3), 128);
        assert!((v.to_f64() - 1.0 / 3.0).abs() < 1e-15);
        let w = RealScalar::from_ratio(&BigInt::from(-7), &BigInt::from(2), 64);
        assert_eq!(w.to_f64(), -3.5);
    }

    #[test]
    fn dist_to_nearest_int_basics() {
        assert_eq!(rs(5).dist_to_nearest_int().to_f64(), 0.0);
        let half = RealScalar::from_ratio(&BigInt::from(5), &BigInt::from(2), 64);
        assert_eq!(half.dist_to_nearest_int().to_f64(), 0.5);
        // pi at 128 bits -> 0.14159...
        let pi = RealScalar::from_ratio(
            &BigInt::parse_bytes(b"31415926535897932384626433832795028842", 10).unwrap(),
            &BigInt::parse_bytes(b"10000000000000000000000000000000000000", 10).unwrap(),
            128,
        );
        let d = pi.dist_to_nearest_int().to_f64();
        assert!((d - 0.14159265358979324).abs() < 1e-15);
    }

    #[test]
    fn sqrt_of_small_ints() {
        let s2 = RealScalar::sqrt_of_uint(&2u32.into(), 128);
        assert!((s2.to_f64() - 2f64.sqrt()).abs() < 1e-15);
        let s5 = RealScalar::sqrt_of_uint(&5u32.into(), 256);
        assert!((s5.to_f64() - 5f64.sqrt()).abs() < 1e-15);
        assert!(RealScalar::sqrt_of_uint(&0u32.into(), 64).is_zero());
    }

    #[test]
    fn mixed_precision_flags() {
        let a = RealScalar::from_i64(1, 64);
        let b = RealScalar::from_i64(2, 128);
        let c = a.add(&b);
        assert_eq!(c.precision_bits(), 64);
        assert!(c.downgraded());
        let d = rs(1).add(&rs(2));
        assert!(!d.downgraded());
    }

    #[test]
    fn log2_fixed_known_values() {
        let v = rs(1024);
        let l = v.log2_fixed(96).unwrap();
        assert_eq!(l.to_f64(), 10.0);
        let v = RealScalar::from_ratio(&BigInt::from(1), &BigInt::from(1_000_000), 192);
        let l = v.log2_fixed(96).unwrap().to_f64();
        assert!((l - (-19.931568569324174)).abs() < 1e-12);
    }

    #[test]
    fn local_exponent_liouville_boundary() {
        // err = 10^-18 at q = 10^6 must give exactly 3.0 after rounding
        let err = RealScalar::from_ratio(
            &BigInt::from(1),
            &BigInt::parse_bytes(b"1000000000000000000", 10).unwrap(),
            192,
        );
        assert_eq!(local_exponent(&err, 1_000_000), Some(3.0));
    }

    proptest! {
        #[test]
        fn dist_is_periodic_and_bounded(num in -2_000_000i64..2_000_000, den in 1i64..10_000, m in -50i64..50) {
            let v = RealScalar::from_ratio(&BigInt::from(num), &BigInt::from(den), 96);
            let shifted = v.add(&RealScalar::from_i64(m, 96));
            let d1 = v.dist_to_nearest_int();
            let d2 = shifted.dist_to_nearest_int();
            prop_assert_eq!(&d1, &d2);
            prop_assert!(d1.to_f64() <= 0.5 && d1.to_f64() >= 0.0);
        }

        #[test]
        fn refinement_agrees(num in -1_000_000i64..1_000_000, den in 1i64..1_000_000) {
            let lo = RealScalar::from_ratio(&BigInt::from(num), &BigInt::from(den), 64);
            let hi = RealScalar::from_ratio(&BigInt::from(num), &BigInt::from(den), 256);
            let diff = lo.sub(&hi).abs().to_f64();
            // one ulp of the 64-bit evaluation
            let scale = (num as f64 / den as f64).abs().max(1.0);
            prop_assert!(diff <= scale * 2f64.powi(-63));
        }

        #[test]
        fn ring_ops_match_f64(a in -1000i64..1000, b in -1000i64..1000) {
            let x = RealScalar::from_ratio(&BigInt::from(a), &BigInt::from(7), 96);
            let y = RealScalar::from_ratio(&BigInt::from(b), &BigInt::from(13), 96);
            prop_assert!((x.add(&y).to_f64() - (a as f64 / 7.0 + b as f64 / 13.0)).abs() < 1e-9);
            prop_assert!((x.mul(&y).to_f64() - (a as f64 / 7.0 * (b as f64 / 13.0))).abs() < 1e-9);
        }

        #[test]
        fn refinement_in_unit_range(num in 0i64..1_000_000, den in 1_000_000i64..2_000_000) {
            // coordinates of typical size: 64 vs 256 bit evaluations agree to < 2^-60
            let lo = RealScalar::from_ratio(&BigInt::from(num), &BigInt::from(den), 64);
            let hi = RealScalar::from_ratio(&BigInt::from(num), &BigInt::from(den), 256);
            prop_assert!(lo.sub(&hi).abs().to_f64() < 2f64.powi(-60));
        }
    }
}
