//! Continued fractions of rationals and quadratic surds, exact.
//!
//! Used as an independent best-approximation oracle: for an irrational x the
//! denominators of the convergents are precisely the record-setting q of the
//! scan ||q x|| (best approximations of the second kind).

use crate::point::CoordDescriptor;
use crate::{Error, Result};
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// A convergent p/q of the expansion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Convergent {
    pub p: BigInt,
    pub q: BigInt,
}

/// Continued-fraction expansion state for (P + sqrt(D)) / Q over the integers.
struct SurdCf {
    p: BigInt,
    q: BigInt,
    d: BigUint,
    sqrt_d_floor: BigInt,
}

impl SurdCf {
    fn new(mut p: BigInt, mut q: BigInt, d: BigUint) -> Self {
        // maintain Q | D - P^2 by scaling if needed
        let dd = BigInt::from(d.clone());
        if !((&dd - &p * &p) % &q).is_zero() {
            let scale = q.abs();
            p *= &scale;
            let d_scaled = (&dd * &scale * &scale).magnitude().clone();
            q *= &scale;
            let sqrt_d_floor = BigInt::from(d_scaled.sqrt());
            return SurdCf {
                p,
                q,
                d: d_scaled,
                sqrt_d_floor,
            };
        }
        let sqrt_d_floor = BigInt::from(d.sqrt());
        SurdCf { p, q, d, sqrt_d_floor }
    }

    // floor((P + sqrt(D)) / Q); sqrt(D) irrational here
    fn next_digit(&mut self) -> BigInt {
        let num = &self.p + &self.sqrt_d_floor;
        let a = if self.q.is_positive() {
            num.div_floor(&self.q)
        } else {
            -(num.div_floor(&(-self.q.clone()))) - 1
        };
        let p_next = &a * &self.q - &self.p;
        let q_next = (BigInt::from(self.d.clone()) - &p_next * &p_next) / &self.q;
        self.p = p_next;
        self.q = q_next;
        a
    }
}

enum Expansion {
    Rational { num: BigInt, den: BigInt },
    Surd(SurdCf),
}

/// Convergents of a coordinate descriptor, in order, while q <= qmax.
/// For rational inputs the expansion is finite and the last convergent is the
/// value itself (error exactly zero).
pub fn convergents(desc: &CoordDescriptor, qmax: &BigInt) -> Result<Vec<Convergent>> {
    let form = desc.exact_form();
    let mut exp = if form.is_rational() {
        let (num, den) = rational_of(desc)?;
        Expansion::Rational { num, den }
    } else {
        match desc {
            CoordDescriptor::QuadraticSurd { a, b, c, d } => {
                // (a + b sqrt(c))/d = (P + sqrt(b^2 c)) / Q with a sign flip when b or d is negative
                let dd = (b * b * BigInt::from(c.clone())).magnitude().clone();
                let (p0, q0) = if b.is_negative() {
                    (-a.clone(), -d.clone())
                } else {
                    (a.clone(), d.clone())
                };
                Expansion::Surd(SurdCf::new(p0, q0, dd))
            }
            _ => unreachable!("only surds are irrational among descriptors"),
        }
    };

    let mut out = Vec::new();
    let (mut h2, mut h1) = (BigInt::zero(), BigInt::one()); // h_{-2}, h_{-1}
    let (mut k2, mut k1) = (BigInt::one(), BigInt::zero());
    loop {
        let digit = match &mut exp {
            Expansion::Rational { num, den } => {
                if den.is_zero() {
                    break;
                }
                let a = num.div_floor(den);
                let rem = &*num - &a * &*den;
                *num = std::mem::replace(den, rem);
                a
            }
            Expansion::Surd(cf) => cf.next_digit(),
        };
        let h = &digit * &h1 + &h2;
        let k = &digit * &k1 + &k2;
        if &k > qmax {
            break;
        }
        out.push(Convergent { p: h.clone(), q: k.clone() });
        h2 = std::mem::replace(&mut h1, h);
        k2 = std::mem::replace(&mut k1, k);
        if out.len() > 4096 {
            return Err(Error::Budget("continued fraction expansion too long".into()));
        }
    }
    Ok(out)
}

fn rational_of(desc: &CoordDescriptor) -> Result<(BigInt, BigInt)> {
    let f = desc.exact_form();
    if !f.is_rational() {
        return Err(Error::Descriptor("not rational".into()));
    }
    // evaluate the exact rational through a probe: descriptors expose it via grammar forms
    match desc {
        CoordDescriptor::Rational { num, den } => Ok((num.clone(), den.clone())),
        CoordDescriptor::DecimalLiteral(s) => {
            let r = crate::point::parse_decimal(s)?;
            Ok((r.numer().clone(), r.denom().clone()))
        }
        CoordDescriptor::SeriesGenerator { .. } => series_rational(desc),
        CoordDescriptor::QuadraticSurd { a, b, c, d } => {
            // rational despite surd syntax (b = 0 or c in {0,1})
            let num = if c.is_zero() {
                a.clone()
            } else {
                a + b * BigInt::from(c.clone()).sqrt()
            };
            Ok((num, d.clone()))
        }
    }
}

fn series_rational(desc: &CoordDescriptor) -> Result<(BigInt, BigInt)> {
    if let CoordDescriptor::SeriesGenerator { truncation, .. } = desc {
        let mut num = BigInt::zero();
        let mut fact = 1u64;
        let mut max_fact = 1u64;
        for k in 1..=*truncation as u64 {
            max_fact *= k;
        }
        let den = BigInt::from(10u8).pow(max_fact as u32);
        for k in 1..=*truncation as u64 {
            fact *= k;
            num += BigInt::from(10u8).pow((max_fact - fact) as u32);
        }
        Ok((num, den))
    } else {
        Err(Error::Descriptor("not a series".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::parse_descriptor;

    #[test]
    fn golden_ratio_gives_fibonacci_denominators() {
        let d = parse_descriptor("surd:(-1+1*sqrt5)/2").unwrap();
        let cs = convergents(&d, &BigInt::from(100)).unwrap();
        let denoms: Vec<i64> = cs.iter().map(|c| i64::try_from(&c.q).unwrap()).collect();
        assert_eq!(denoms, vec![1, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89]);
    }

    #[test]
    fn sqrt2_expansion() {
        let d = parse_descriptor("surd:(0+1*sqrt2)/1").unwrap();
        let cs = convergents(&d, &BigInt::from(1000)).unwrap();
        // 1, 3/2, 7/5, 17/12, 41/29, 99/70, ...
        assert_eq!(cs[1], Convergent { p: 3.into(), q: 2.into() });
        assert_eq!(cs[3], Convergent { p: 17.into(), q: 12.into() });
        let last = cs.last().unwrap();
        let v = last.p.to_string().parse::<f64>().unwrap() / last.q.to_string().parse::<f64>().unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn rational_expansion_terminates_exactly() {
        let d = parse_descriptor("rat:355/113").unwrap();
        let cs = convergents(&d, &BigInt::from(1000)).unwrap();
        let last = cs.last().unwrap();
        assert_eq!(last, &Convergent { p: 355.into(), q: 113.into() });
    }

    #[test]
    fn negative_surd_coefficient() {
        // 1 - sqrt2 = -0.4142...; floor -1, then expansion of 0.5857...
        let d = parse_descriptor("surd:(1-1*sqrt2)/1").unwrap();
        let cs = convergents(&d, &BigInt::from(100)).unwrap();
        let approx = cs
            .last()
            .map(|c| c.p.to_string().parse::<f64>().unwrap() / c.q.to_string().parse::<f64>().unwrap())
            .unwrap();
        assert!((approx - (1.0 - 2f64.sqrt())).abs() < 1e-3);
    }
}
