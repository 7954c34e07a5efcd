//! Point and shift descriptors.
//!
//! Coordinates are symbolic: rationals, quadratic surds (a + b*sqrt(c))/d,
//! decimal literals, or named series truncations. Every descriptor can be
//! re-evaluated at any precision and supports exact arithmetic on integer
//! linear combinations, which is how exact zeros of ||q x + theta|| are
//! detected without ever comparing floats to zero.
//!
//! Textual grammar (config files and CLI):
//!   `rat:1/3`  `surd:(-1+1*sqrt5)/2`  `dec:0.7071067811865475`  `series:liouville10:4`
//! Vectors are comma-joined coordinate descriptors.

use crate::scalar::{RealScalar, MIN_PRECISION_BITS};
use crate::{Error, Result};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;

/// Largest surd radicand accepted; keeps the square-free check exact and fast.
const MAX_RADICAND: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoordDescriptor {
    Rational { num: BigInt, den: BigInt },
    /// (a + b*sqrt(c)) / d with c >= 0 square-free, d != 0.
    QuadraticSurd { a: BigInt, b: BigInt, c: BigUint, d: BigInt },
    DecimalLiteral(String),
    /// Named series truncation; only the base-10 factorial (Liouville) series for now.
    SeriesGenerator { series: SeriesKind, truncation: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    Liouville10,
}

impl CoordDescriptor {
    pub fn rational(num: i64, den: i64) -> Result<Self> {
        Self::validate(CoordDescriptor::Rational {
            num: num.into(),
            den: den.into(),
        })
    }

    pub fn validate(d: CoordDescriptor) -> Result<Self> {
        match &d {
            CoordDescriptor::Rational { den, .. } => {
                if den.is_zero() {
                    return Err(Error::Descriptor("rational with denominator 0".into()));
                }
            }
            CoordDescriptor::QuadraticSurd { c, d: den, .. } => {
                if den.is_zero() {
                    return Err(Error::Descriptor("surd with denominator 0".into()));
                }
                if *c > BigUint::from(MAX_RADICAND) {
                    return Err(Error::Descriptor(format!("surd radicand {c} exceeds {MAX_RADICAND}")));
                }
                if !is_square_free(c) {
                    return Err(Error::Descriptor(format!("surd radicand {c} is not square-free")));
                }
            }
            CoordDescriptor::DecimalLiteral(s) => {
                parse_decimal(s)?;
            }
            CoordDescriptor::SeriesGenerator { truncation, .. } => {
                if *truncation == 0 || *truncation > 8 {
                    return Err(Error::Descriptor("series truncation must be in 1..=8".into()));
                }
            }
        }
        Ok(d)
    }

    /// Exact value as rational part plus surd part: value = rat + coeff * sqrt(c).
    pub fn exact_form(&self) -> ExactForm {
        match self {
            CoordDescriptor::Rational { num, den } => ExactForm::from_rational(BigRational::new(num.clone(), den.clone())),
            CoordDescriptor::QuadraticSurd { a, b, c, d } => {
                let rat = BigRational::new(a.clone(), d.clone());
                if b.is_zero() || c.is_zero() {
                    return ExactForm::from_rational(rat);
                }
                if c.is_one() {
                    return ExactForm::from_rational(rat + BigRational::new(b.clone(), d.clone()));
                }
                let mut surd = BTreeMap::new();
                surd.insert(c.clone(), BigRational::new(b.clone(), d.clone()));
                ExactForm { rat, surd }
            }
            CoordDescriptor::DecimalLiteral(s) => ExactForm::from_rational(parse_decimal(s).expect("validated")),
            CoordDescriptor::SeriesGenerator { series, truncation } => {
                ExactForm::from_rational(series_value(*series, *truncation))
            }
        }
    }

    pub fn evaluate(&self, precision_bits: u32) -> Result<RealScalar> {
        if precision_bits < MIN_PRECISION_BITS {
            return Err(Error::Precondition(format!(
                "precision {precision_bits} below the {MIN_PRECISION_BITS}-bit floor"
            )));
        }
        Ok(self.exact_form().evaluate(precision_bits))
    }

    pub fn is_exact_zero(&self) -> bool {
        self.exact_form().is_zero()
    }

    pub fn grammar(&self) -> String {
        match self {
            CoordDescriptor::Rational { num, den } => format!("rat:{num}/{den}"),
            CoordDescriptor::QuadraticSurd { a, b, c, d } => {
                if b.is_negative() {
                    format!("surd:({a}-{}*sqrt{c})/{d}", b.magnitude())
                } else {
                    format!("surd:({a}+{b}*sqrt{c})/{d}")
                }
            }
            CoordDescriptor::DecimalLiteral(s) => format!("dec:{s}"),
            CoordDescriptor::SeriesGenerator { series: SeriesKind::Liouville10, truncation } => {
                format!("series:liouville10:{truncation}")
            }
        }
    }
}

fn is_square_free(c: &BigUint) -> bool {
    let mut n = match c.to_u64_digits().as_slice() {
        [] => return true, // 0
        [lo] => *lo,
        _ => unreachable!("radicand capped"),
    };
    if n < 2 {
        return true;
    }
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return false;
            }
        }
        p += 1;
    }
    true
}

fn series_value(kind: SeriesKind, truncation: u32) -> BigRational {
    match kind {
        SeriesKind::Liouville10 => {
            // sum_{k=1..truncation} 10^(-k!)
            let mut acc = BigRational::zero();
            let mut fact = 1u64;
            for k in 1..=truncation as u64 {
                fact *= k;
                let den = BigInt::from(10u8).pow(fact as u32);
                acc += BigRational::new(BigInt::one(), den);
            }
            acc
        }
    }
}

pub fn parse_decimal(s: &str) -> Result<BigRational> {
    let t = s.trim();
    let err = || Error::Descriptor(format!("malformed decimal literal `{s}`"));
    if t.is_empty() {
        return Err(err());
    }
    let (sign, rest) = match t.strip_prefix('-') {
        Some(r) => (-1, r),
        None => (1, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = match rest.split_once('.') {
        Some((i, f)) => (i, f),
        None => (rest, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{int_part}{frac_part}");
    let num = BigInt::parse_bytes(digits.as_bytes(), 10).ok_or_else(err)?;
    let den = BigInt::from(10u8).pow(frac_part.len() as u32);
    Ok(BigRational::new(num * sign, den))
}

/// Exact value of the form `rat + sum_c coeff_c * sqrt(c)` with square-free
/// distinct radicands. Closed under integer scaling and addition, which is all
/// the approximation machinery ever does to coordinates.
#[derive(Debug, Clone)]
pub struct ExactForm {
    rat: BigRational,
    surd: BTreeMap<BigUint, BigRational>,
}

impl ExactForm {
    pub fn zero() -> Self {
        ExactForm {
            rat: BigRational::zero(),
            surd: BTreeMap::new(),
        }
    }

    pub fn from_rational(rat: BigRational) -> Self {
        ExactForm {
            rat,
            surd: BTreeMap::new(),
        }
    }

    pub fn is_rational(&self) -> bool {
        self.surd.values().all(|c| c.is_zero())
    }

    /// sqrt(c) terms with distinct square-free c >= 2 are linearly independent
    /// over the rationals, so zero and integrality tests are coefficient-wise.
    pub fn is_zero(&self) -> bool {
        self.rat.is_zero() && self.is_rational()
    }

    /// The exact rational value, when no surd term survives.
    pub fn as_rational(&self) -> Option<&BigRational> {
        self.is_rational().then_some(&self.rat)
    }

    pub fn is_integer(&self) -> bool {
        self.rat.is_integer() && self.is_rational()
    }

    pub fn add_assign(&mut self, other: &ExactForm) {
        self.rat += &other.rat;
        for (c, coeff) in &other.surd {
            let e = self.surd.entry(c.clone()).or_insert_with(BigRational::zero);
            *e += coeff;
        }
        self.surd.retain(|_, v| !v.is_zero());
    }

    pub fn add_scaled(&mut self, other: &ExactForm, k: &BigInt) {
        if k.is_zero() {
            return;
        }
        let kr = BigRational::from_integer(k.clone());
        self.rat += &other.rat * &kr;
        for (c, coeff) in &other.surd {
            let e = self.surd.entry(c.clone()).or_insert_with(BigRational::zero);
            *e += coeff * &kr;
        }
        self.surd.retain(|_, v| !v.is_zero());
    }

    pub fn sub_integer(&mut self, m: &BigInt) {
        self.rat -= BigRational::from_integer(m.clone());
    }

    /// Evaluate to a dyadic scalar at `bits` precision. Surd terms are combined
    /// at an escalated working precision so massive cancellation between the
    /// rational and surd parts cannot corrupt the leading `bits` bits. A value
    /// with a surviving surd term is irrational, hence nonzero, so escalation
    /// terminates.
    pub fn evaluate(&self, bits: u32) -> RealScalar {
        if self.is_rational() {
            return RealScalar::from_ratio(self.rat.numer(), self.rat.denom(), bits);
        }
        let mut work = bits + 64;
        loop {
            let (acc, mag_log2) = self.evaluate_raw(work);
            // absolute error of acc is below 2^(mag_log2 + 6 - work)
            let err_log2 = mag_log2 + 6 - work as i64;
            if let Some(l) = acc.log2_floor() {
                if l > err_log2 + bits as i64 + 2 {
                    return acc.round_to_precision(bits);
                }
            }
            work *= 2;
            assert!(work <= 1 << 22, "surd evaluation failed to separate from zero");
        }
    }

    // sum the terms at `work` bits; returns (value, log2 upper bound of term magnitudes)
    fn evaluate_raw(&self, work: u32) -> (RealScalar, i64) {
        let mut acc = RealScalar::from_ratio(self.rat.numer(), self.rat.denom(), work);
        let mut mag_log2 = acc.log2_floor().unwrap_or(i64::MIN / 2) + 1;
        for (c, coeff) in &self.surd {
            if coeff.is_zero() {
                continue;
            }
            let root = RealScalar::sqrt_of_uint(c, work);
            let term = RealScalar::from_ratio(coeff.numer(), coeff.denom(), work).mul(&root);
            mag_log2 = mag_log2.max(term.log2_floor().unwrap_or(i64::MIN / 2) + 1);
            acc = acc.add(&term);
        }
        (acc, mag_log2)
    }

    /// Nearest integer, decided exactly (rational part exact; surd part
    /// bracketed at escalating precision; a tie against a half-integer is
    /// impossible while a surd term is present).
    pub fn nearest_integer(&self) -> BigInt {
        if self.is_rational() {
            // round half to even on exact rationals
            let twice = &self.rat + &self.rat;
            if twice.is_integer() && !self.rat.is_integer() {
                let below = self.rat.floor().to_integer();
                let above = &below + 1;
                return if (below.clone() % BigInt::from(2)).is_zero() { below } else { above };
            }
            return self.rat.round().to_integer();
        }
        let mut work: u32 = 192;
        loop {
            let (v, mag_log2) = self.evaluate_raw(work);
            let m = v.round_to_int();
            let err_log2 = mag_log2 + 6 - work as i64;
            let d = v.sub(&RealScalar::from_bigint(m.clone(), work)).abs();
            if let Some(l) = d.log2_floor() {
                if l > err_log2 + 2 {
                    return m;
                }
            }
            work *= 2;
            assert!(work <= 1 << 22, "nearest integer failed to certify");
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSpec {
    coords: Vec<CoordDescriptor>,
}

impl PointSpec {
    pub fn new(coords: Vec<CoordDescriptor>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Descriptor("point needs at least one coordinate".into()));
        }
        Ok(PointSpec { coords })
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[CoordDescriptor] {
        &self.coords
    }

    pub fn evaluate(&self, precision_bits: u32) -> Result<Vec<RealScalar>> {
        self.coords.iter().map(|c| c.evaluate(precision_bits)).collect()
    }

    pub fn parse(input: &str) -> Result<Self> {
        let coords = input
            .split(',')
            .map(|tok| parse_descriptor(tok.trim()))
            .collect::<Result<Vec<_>>>()?;
        PointSpec::new(coords)
    }

    pub fn grammar(&self) -> String {
        self.coords.iter().map(|c| c.grammar()).collect::<Vec<_>>().join(",")
    }
}

impl fmt::Display for PointSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.grammar())
    }
}

/// Inhomogeneous shift vector; the all-zero shift is the homogeneous case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shift {
    coords: Vec<CoordDescriptor>,
}

impl Shift {
    pub fn new(coords: Vec<CoordDescriptor>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Descriptor("shift needs at least one coordinate".into()));
        }
        Ok(Shift { coords })
    }

    pub fn zero(dimension: usize) -> Self {
        Shift {
            coords: vec![
                CoordDescriptor::Rational {
                    num: BigInt::zero(),
                    den: BigInt::one(),
                };
                dimension.max(1)
            ],
        }
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[CoordDescriptor] {
        &self.coords
    }

    /// Exact, descriptor-level homogeneity test.
    pub fn is_homogeneous(&self) -> bool {
        self.coords.iter().all(|c| c.is_exact_zero())
    }

    pub fn parse(input: &str) -> Result<Self> {
        let coords = input
            .split(',')
            .map(|tok| parse_descriptor(tok.trim()))
            .collect::<Result<Vec<_>>>()?;
        Shift::new(coords)
    }

    pub fn grammar(&self) -> String {
        self.coords.iter().map(|c| c.grammar()).collect::<Vec<_>>().join(",")
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.coords
            .iter()
            .map(|c| c.evaluate(MIN_PRECISION_BITS).expect("validated descriptor").to_f64())
            .collect()
    }
}

impl fmt::Display for Shift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.grammar())
    }
}

pub fn parse_descriptor(tok: &str) -> Result<CoordDescriptor> {
    let gram = |token: &str| Error::Grammar {
        input: tok.to_string(),
        token: token.to_string(),
    };
    let (kind, rest) = tok.split_once(':').ok_or_else(|| gram(tok))?;
    match kind {
        "rat" => {
            let (n, d) = match rest.split_once('/') {
                Some((n, d)) => (n, d),
                None => (rest, "1"),
            };
            let num = BigInt::parse_bytes(n.trim().as_bytes(), 10).ok_or_else(|| gram(n))?;
            let den = BigInt::parse_bytes(d.trim().as_bytes(), 10).ok_or_else(|| gram(d))?;
            CoordDescriptor::validate(CoordDescriptor::Rational { num, den })
        }
        "dec" => CoordDescriptor::validate(CoordDescriptor::DecimalLiteral(rest.trim().to_string())),
        "surd" => parse_surd(rest).map_err(|_| gram(rest)).and_then(CoordDescriptor::validate),
        "series" => {
            let (name, trunc) = rest.split_once(':').ok_or_else(|| gram(rest))?;
            if name != "liouville10" {
                return Err(gram(name));
            }
            let truncation: u32 = trunc.trim().parse().map_err(|_| gram(trunc))?;
            CoordDescriptor::validate(CoordDescriptor::SeriesGenerator {
                series: SeriesKind::Liouville10,
                truncation,
            })
        }
        other => Err(gram(other)),
    }
}

// `(a+b*sqrtc)/d`
fn parse_surd(rest: &str) -> std::result::Result<CoordDescriptor, ()> {
    let rest = rest.trim();
    let inner_end = rest.find(')').ok_or(())?;
    if !rest.starts_with('(') {
        return Err(());
    }
    let inner = &rest[1..inner_end];
    let after = &rest[inner_end + 1..];
    let d = match after.strip_prefix('/') {
        Some(ds) => BigInt::parse_bytes(ds.trim().as_bytes(), 10).ok_or(())?,
        None if after.trim().is_empty() => BigInt::one(),
        None => return Err(()),
    };
    // inner: a+b*sqrtc (a may be signed, b may be signed)
    let star = inner.find("*sqrt").ok_or(())?;
    let c: BigUint = inner[star + 5..].trim().parse().map_err(|_| ())?;
    let ab = &inner[..star];
    // split the b term off: last '+' or '-' not at position 0
    let mut split = None;
    for (i, ch) in ab.char_indices().skip(1) {
        if ch == '+' || ch == '-' {
            split = Some(i);
        }
    }
    let i = split.ok_or(())?;
    let a = BigInt::parse_bytes(ab[..i].trim().as_bytes(), 10).ok_or(())?;
    let bsign = if ab.as_bytes()[i] == b'-' { -1 } else { 1 };
    let btxt = ab[i + 1..].trim();
    let b = BigInt::parse_bytes(btxt.as_bytes(), 10).ok_or(())? * bsign;
    Ok(CoordDescriptor::QuadraticSurd { a, b, c, d })
}
