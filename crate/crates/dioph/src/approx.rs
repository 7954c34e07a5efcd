//! Certified evaluation of the approximation forms q*x + theta.
//!
//! Coordinates are evaluated once per scan to a working precision chosen from
//! the declared precision and the largest multiplier (at least 4*log2|q| bits,
//! plus guard bits). Per-q work is then exact dyadic arithmetic on the rounded
//! coordinates, with an explicit error exponent carried alongside. A distance
//! that does not clear the error bound is decided symbolically (exact zero or
//! not) and, if nonzero, the whole evaluator escalates its precision.

use crate::point::{ExactForm, PointSpec, Shift};
use crate::scalar::RealScalar;
use crate::{Error, Result};
use num_bigint::BigInt;

/// Hard ceiling for escalation; beyond this the offending q is reported.
pub const MAX_WORK_BITS: u32 = 1 << 16;

/// Distance of one evaluated linear form to its nearest integer.
#[derive(Debug, Clone)]
pub struct FormDistance {
    /// Exact distance of the rounded form; within 2^err_log2 of the true one.
    pub dist: RealScalar,
    /// Nearest integer of the form (the approximation vector entry is its negation).
    pub nearest: BigInt,
    /// True iff q*x + theta is an integer, decided by exact descriptor arithmetic.
    pub exact_zero: bool,
}

pub struct PointEvaluator {
    coord_forms: Vec<ExactForm>,
    shift_forms: Vec<ExactForm>,
    coord_hats: Vec<RealScalar>,
    shift_hats: Vec<RealScalar>,
    /// log2 magnitude bound per coordinate / shift entry (0 for zero entries).
    coord_mag: Vec<i64>,
    shift_mag: Vec<i64>,
    work_bits: u32,
    declared_bits: u32,
}

/// Working precision for a scan: at least the declared precision, at least
/// 4*log2(qmax), plus 64 guard bits.
pub fn required_work_bits(declared_bits: u32, qmax: i64) -> u32 {
    let qbits = 64 - (qmax.unsigned_abs().max(1)).leading_zeros();
    (declared_bits + 64).max(4 * qbits + 64)
}

impl PointEvaluator {
    pub fn new(point: &PointSpec, shift: &Shift, declared_bits: u32, qmax: i64) -> Result<Self> {
        if shift.dimension() != point.dimension() {
            return Err(Error::Precondition(format!(
                "shift dimension {} does not match point dimension {}",
                shift.dimension(),
                point.dimension()
            )));
        }
        let coord_forms: Vec<ExactForm> = point.coords().iter().map(|c| c.exact_form()).collect();
        let shift_forms: Vec<ExactForm> = shift.coords().iter().map(|c| c.exact_form()).collect();
        let mut ev = PointEvaluator {
            coord_forms,
            shift_forms,
            coord_hats: vec![],
            shift_hats: vec![],
            coord_mag: vec![],
            shift_mag: vec![],
            work_bits: required_work_bits(declared_bits, qmax),
            declared_bits,
        };
        ev.refresh();
        Ok(ev)
    }

    /// For dual forms: evaluator over an n-dim point with a scalar shift.
    pub fn new_dual(point: &PointSpec, shift0: &Shift, declared_bits: u32, qmax: i64) -> Result<Self> {
        if shift0.dimension() != 1 {
            return Err(Error::Precondition("dual form takes a scalar shift".into()));
        }
        let coord_forms: Vec<ExactForm> = point.coords().iter().map(|c| c.exact_form()).collect();
        let shift_forms: Vec<ExactForm> = shift0.coords().iter().map(|c| c.exact_form()).collect();
        let mut ev = PointEvaluator {
            coord_forms,
            shift_forms,
            coord_hats: vec![],
            shift_hats: vec![],
            coord_mag: vec![],
            shift_mag: vec![],
            work_bits: required_work_bits(declared_bits, qmax),
            declared_bits,
        };
        ev.refresh();
        Ok(ev)
    }

    pub fn dimension(&self) -> usize {
        self.coord_forms.len()
    }

    pub fn declared_bits(&self) -> u32 {
        self.declared_bits
    }

    pub fn work_bits(&self) -> u32 {
        self.work_bits
    }

    /// The cached coordinate evaluation at the current working precision.
    pub fn coord_value(&self, i: usize) -> RealScalar {
        self.coord_hats[i].clone()
    }

    fn refresh(&mut self) {
        let w = self.work_bits;
        self.coord_hats = self.coord_forms.iter().map(|f| f.evaluate(w)).collect();
        self.shift_hats = self.shift_forms.iter().map(|f| f.evaluate(w)).collect();
        self.coord_mag = self.coord_hats.iter().map(|h| h.log2_floor().unwrap_or(0) + 1).collect();
        self.shift_mag = self.shift_hats.iter().map(|h| h.log2_floor().unwrap_or(0) + 1).collect();
    }

    fn escalate(&mut self, q_desc: &str) -> Result<()> {
        let next = self.work_bits * 2;
        if next > MAX_WORK_BITS {
            return Err(Error::Precision {
                q: q_desc.to_string(),
                needed: next as u64,
                max: MAX_WORK_BITS as u64,
            });
        }
        self.work_bits = next;
        self.refresh();
        Ok(())
    }

    /// Distance of q*x_i + theta_i to its nearest integer (simultaneous form,
    /// one coordinate).
    pub fn sim_coord_distance(&mut self, q: i64, i: usize) -> Result<FormDistance> {
        loop {
            let v = self.coord_hats[i].mul_i64(q).add(&self.shift_hats[i]);
            let nearest = v.round_to_int();
            let dist = v.sub(&RealScalar::from_bigint(nearest.clone(), self.work_bits)).abs();
            let qbits = 64 - q.unsigned_abs().leading_zeros();
            let err_log2 = self.coord_mag[i].max(0) + qbits as i64 + 3 - self.work_bits as i64;
            match dist.log2_floor() {
                Some(l) if l > err_log2 + 2 => {
                    return Ok(FormDistance {
                        dist: dist.round_to_precision(self.declared_bits),
                        nearest,
                        exact_zero: false,
                    });
                }
                _ => {
                    // suspiciously close to an integer: decide exactly
                    let mut lf = ExactForm::zero();
                    lf.add_scaled(&self.coord_forms[i], &BigInt::from(q));
                    lf.add_assign(&self.shift_forms[i]);
                    if lf.is_integer() {
                        return Ok(FormDistance {
                            dist: RealScalar::zero(self.declared_bits),
                            nearest: lf.nearest_integer(),
                            exact_zero: true,
                        });
                    }
                    self.escalate(&q.to_string())?;
                }
            }
        }
    }

    /// Sup-norm distance ||q x + theta|| with per-coordinate nearest integers.
    pub fn sim_distance(&mut self, q: i64) -> Result<(RealScalar, Vec<BigInt>, bool)> {
        let n = self.dimension();
        let mut max_dist = RealScalar::zero(self.declared_bits);
        let mut nearest = Vec::with_capacity(n);
        let mut all_zero = true;
        for i in 0..n {
            let fd = self.sim_coord_distance(q, i)?;
            if !fd.exact_zero {
                all_zero = false;
                if fd.dist.cmp_value(&max_dist) == std::cmp::Ordering::Greater {
                    max_dist = fd.dist;
                }
            }
            nearest.push(fd.nearest);
        }
        Ok((max_dist, nearest, all_zero))
    }

    /// Distance of the dual form q . x + theta_0 to its nearest integer.
    pub fn dual_distance(&mut self, qvec: &[i64]) -> Result<FormDistance> {
        assert_eq!(qvec.len(), self.dimension());
        loop {
            let mut v = self.shift_hats[0].clone();
            let mut err_mag = self.shift_mag[0].max(0);
            for (i, &qi) in qvec.iter().enumerate() {
                if qi == 0 {
                    continue;
                }
                v = v.add(&self.coord_hats[i].mul_i64(qi));
                let qbits = 64 - qi.unsigned_abs().leading_zeros();
                err_mag = err_mag.max(self.coord_mag[i].max(0) + qbits as i64);
            }
            let nearest = v.round_to_int();
            let dist = v.sub(&RealScalar::from_bigint(nearest.clone(), self.work_bits)).abs();
            let err_log2 = err_mag + 4 + qvec.len() as i64 - self.work_bits as i64;
            match dist.log2_floor() {
                Some(l) if l > err_log2 + 2 => {
                    return Ok(FormDistance {
                        dist: dist.round_to_precision(self.declared_bits),
                        nearest,
                        exact_zero: false,
                    });
                }
                _ => {
                    let mut lf = self.shift_forms[0].clone();
                    for (i, &qi) in qvec.iter().enumerate() {
                        lf.add_scaled(&self.coord_forms[i], &BigInt::from(qi));
                    }
                    if lf.is_integer() {
                        return Ok(FormDistance {
                            dist: RealScalar::zero(self.declared_bits),
                            nearest: lf.nearest_integer(),
                            exact_zero: true,
                        });
                    }
                    self.escalate(&format!("{qvec:?}"))?;
                }
            }
        }
    }
}
