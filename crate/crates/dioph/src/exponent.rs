//! Finite-height estimators for the simultaneous and dual Diophantine
//! exponents, ordinary and uniform, homogeneous and shifted.
//!
//! Conventions:
//! - `running_sup` is the sup of per-q local exponents log(1/err)/log|q| over
//!   the whole scan (|q| = 1 recorded but never scored).
//! - `tail_sup` is the window exponent log(1/m)/log(Q) where m is the smallest
//!   error with |q| in [sqrt(Q), Q]. The per-q sup is biased upward by
//!   c/log q at badly approximable points; normalizing by the window height
//!   is what converges to the limsup exponent at these heights.
//! - uniform kinds evaluate the dyadic grid Q' in {16, 32, ...} <= Q and take
//!   the inf of log(1/m(Q'))/log(Q') over Q' in [sqrt(Q), Q].
//! - an exact zero error (decided symbolically) sets `rational_flag`, reports
//!   every sup as +inf and stops the scan.

use crate::approx::PointEvaluator;
use crate::point::{PointSpec, Shift};
use crate::scalar::{local_exponent, RealScalar};
use crate::{Error, Result};
use num_bigint::BigInt;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExponentKind {
    SimOrdinary,
    SimUniform,
    DualOrdinary,
    DualUniform,
}

impl ExponentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExponentKind::SimOrdinary => "sim",
            ExponentKind::SimUniform => "sim_uniform",
            ExponentKind::DualOrdinary => "dual",
            ExponentKind::DualUniform => "dual_uniform",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Multiplier {
    Scalar(i64),
    Vector(Vec<i64>),
}

impl Multiplier {
    pub fn sup_norm(&self) -> u64 {
        match self {
            Multiplier::Scalar(q) => q.unsigned_abs(),
            Multiplier::Vector(v) => v.iter().map(|q| q.unsigned_abs()).max().unwrap_or(0),
        }
    }
}

/// One approximation event: the multiplier, the nearest-integer vector it
/// lands on (negated, so q x + p + theta is the small quantity), the error and
/// the local exponent when defined.
#[derive(Debug, Clone)]
pub struct ApproxRecord {
    pub multiplier: Multiplier,
    pub p: Vec<BigInt>,
    pub error: RealScalar,
    pub local_exponent: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExponentEstimate {
    pub kind: ExponentKind,
    pub dimension: usize,
    pub shift: Shift,
    pub qmax: i64,
    pub precision_bits: u32,
    pub running_sup: f64,
    pub tail_sup: f64,
    pub tail_inf_uniform: Option<f64>,
    pub rational_flag: bool,
    pub records: Vec<ApproxRecord>,
}

fn int_sqrt_ceil(q: i64) -> i64 {
    let mut r = (q as f64).sqrt() as i64;
    while r * r < q {
        r += 1;
    }
    while r > 1 && (r - 1) * (r - 1) >= q {
        r -= 1;
    }
    r
}

/// log(1/err)/log(denom) with both logarithms in extended precision.
fn window_exponent(err: &RealScalar, denom: i64) -> f64 {
    if err.is_zero() {
        return f64::INFINITY;
    }
    let le = err.log2_fixed(96).expect("nonzero");
    let ld = RealScalar::from_i64(denom, 128).log2_fixed(96).expect("positive");
    le.neg().div(&ld, 160).to_f64()
}

struct ScanState {
    best: Option<RealScalar>,
    window_min: Option<RealScalar>,
    records: Vec<ApproxRecord>,
    rational_flag: bool,
    // (approx local exponent, |q|, error) argmax over every scored q
    approx_best: Option<(f64, u64, RealScalar)>,
    // per-Q' minima on the dyadic grid: (Q', m(Q'))
    checkpoints: Vec<(i64, RealScalar)>,
}

impl ScanState {
    fn new() -> Self {
        ScanState {
            best: None,
            window_min: None,
            records: vec![],
            rational_flag: false,
            approx_best: None,
            checkpoints: vec![],
        }
    }

    /// Returns true when the scan should stop (exact zero found).
    fn observe(&mut self, mult: Multiplier, p: Vec<BigInt>, err: RealScalar, exact_zero: bool, in_window: bool) -> bool {
        let h = mult.sup_norm();
        if exact_zero {
            self.records.push(ApproxRecord {
                multiplier: mult,
                p,
                error: err,
                local_exponent: None,
            });
            self.rational_flag = true;
            return true;
        }
        if h >= 2 {
            if let Some(a) = err.log2_approx() {
                let le = -a / (h as f64).log2();
                if self.approx_best.as_ref().is_none_or(|(b, _, _)| le > *b) {
                    self.approx_best = Some((le, h, err.clone()));
                }
            }
        }
        if in_window
            && self.window_min.as_ref().is_none_or(|m| err.cmp_value(m).is_lt()) {
                self.window_min = Some(err.clone());
            }
        let is_record = self.best.as_ref().is_none_or(|b| err.cmp_value(b).is_lt());
        if is_record {
            self.best = Some(err.clone());
            let le = if h >= 2 { local_exponent(&err, h) } else { None };
            self.records.push(ApproxRecord {
                multiplier: mult,
                p,
                error: err,
                local_exponent: le,
            });
        }
        false
    }

    fn checkpoint(&mut self, qprime: i64) {
        if self.rational_flag {
            self.checkpoints.push((qprime, RealScalar::zero(64)));
            return;
        }
        if let Some(b) = &self.best {
            self.checkpoints.push((qprime, b.clone()));
        }
    }

    fn finish(self, kind: ExponentKind, dimension: usize, shift: Shift, qmax: i64, bits: u32) -> ExponentEstimate {
        if self.rational_flag {
            return ExponentEstimate {
                kind,
                dimension,
                shift,
                qmax,
                precision_bits: bits,
                running_sup: f64::INFINITY,
                tail_sup: f64::INFINITY,
                tail_inf_uniform: matches!(kind, ExponentKind::SimUniform | ExponentKind::DualUniform)
                    .then_some(f64::INFINITY),
                rational_flag: true,
                records: self.records,
            };
        }
        let mut running_sup: f64 = 0.0;
        for r in &self.records {
            if let Some(le) = r.local_exponent {
                running_sup = running_sup.max(le);
            }
        }
        // the sup over all q is attained at a record except in degenerate
        // short scans; the cheap per-q tracking catches those
        if let Some((approx, h, err)) = &self.approx_best {
            if *approx > running_sup + 1e-9 {
                if let Some(le) = local_exponent(err, *h) {
                    running_sup = running_sup.max(le);
                }
            }
        }
        let tail_sup = self
            .window_min
            .as_ref()
            .map(|m| window_exponent(m, qmax))
            .unwrap_or(0.0);
        let win_lo = int_sqrt_ceil(qmax);
        let tail_inf_uniform = matches!(kind, ExponentKind::SimUniform | ExponentKind::DualUniform).then(|| {
            self.checkpoints
                .iter()
                .filter(|(qp, _)| *qp >= win_lo)
                .map(|(qp, m)| window_exponent(m, *qp))
                .fold(f64::INFINITY, f64::min)
        });
        ExponentEstimate {
            kind,
            dimension,
            shift,
            qmax,
            precision_bits: bits,
            running_sup,
            tail_sup,
            tail_inf_uniform,
            rational_flag: false,
            records: self.records,
        }
    }
}

fn scan_sim(x: &PointSpec, shift: &Shift, qmax: i64, bits: u32, kind: ExponentKind) -> Result<ExponentEstimate> {
    let mut ev = PointEvaluator::new(x, shift, bits, qmax)?;
    let win_lo = int_sqrt_ceil(qmax);
    let mut st = ScanState::new();
    let mut next_checkpoint: i64 = 16;
    'scan: for m in 1..=qmax {
        for q in [m, -m] {
            let (err, nearest, zero) = ev.sim_distance(q)?;
            let p = nearest.iter().map(|v| -v.clone()).collect();
            if st.observe(Multiplier::Scalar(q), p, err, zero, m >= win_lo) {
                break 'scan;
            }
        }
        if m == next_checkpoint {
            st.checkpoint(m);
            next_checkpoint *= 2;
        }
    }
    Ok(st.finish(kind, x.dimension(), shift.clone(), qmax, bits))
}

// vectors with sup norm exactly m, lexicographically descending
fn shell_vectors(n: usize, m: i64, out: &mut Vec<Vec<i64>>) {
    out.clear();
    fn fill(n: usize, m: i64, prefix: &mut Vec<i64>, has_face: bool, out: &mut Vec<Vec<i64>>) {
        if prefix.len() == n {
            if has_face {
                out.push(prefix.clone());
            }
            return;
        }
        for v in (-m..=m).rev() {
            prefix.push(v);
            fill(n, m, prefix, has_face || v.abs() == m, out);
            prefix.pop();
        }
    }
    let mut prefix = Vec::with_capacity(n);
    fill(n, m, &mut prefix, false, out);
}

fn scan_dual(x: &PointSpec, shift0: &Shift, qmax: i64, bits: u32, kind: ExponentKind) -> Result<ExponentEstimate> {
    let n = x.dimension();
    let budget = (qmax as f64).powi(n as i32);
    if budget > 1e9 {
        return Err(Error::Budget(format!(
            "dual enumeration size Q^n = {budget:.2e} exceeds 1e9; use a smaller Q"
        )));
    }
    let mut ev = PointEvaluator::new_dual(x, shift0, bits, qmax)?;
    let win_lo = int_sqrt_ceil(qmax);
    let mut st = ScanState::new();
    let mut next_checkpoint: i64 = 16;
    let mut shell = Vec::new();
    'scan: for m in 1..=qmax {
        shell_vectors(n, m, &mut shell);
        for v in &shell {
            let fd = ev.dual_distance(v)?;
            if st.observe(
                Multiplier::Vector(v.clone()),
                vec![-fd.nearest.clone()],
                fd.dist,
                fd.exact_zero,
                m >= win_lo,
            ) {
                break 'scan;
            }
        }
        if m == next_checkpoint {
            st.checkpoint(m);
            next_checkpoint *= 2;
        }
    }
    Ok(st.finish(kind, n, shift0.clone(), qmax, bits))
}

/// Simultaneous ordinary exponent scan over q = ±1..±Q.
pub fn estimate_w0(x: &PointSpec, shift: &Shift, qmax: i64, bits: u32) -> Result<ExponentEstimate> {
    if qmax < 4 {
        return Err(Error::Precondition("estimate_w0 needs Q >= 4".into()));
    }
    scan_sim(x, shift, qmax, bits, ExponentKind::SimOrdinary)
}

/// Simultaneous uniform exponent on the dyadic grid up to Q.
pub fn estimate_w0_uniform(x: &PointSpec, shift: &Shift, qmax: i64, bits: u32) -> Result<ExponentEstimate> {
    if qmax < 16 {
        return Err(Error::Precondition("estimate_w0_uniform needs Q >= 16".into()));
    }
    scan_sim(x, shift, qmax, bits, ExponentKind::SimUniform)
}

/// Dual ordinary exponent over the box |q|_inf <= Q.
pub fn estimate_w_dual(x: &PointSpec, shift0: &Shift, qmax: i64, bits: u32) -> Result<ExponentEstimate> {
    if qmax < 2 {
        return Err(Error::Precondition("estimate_w_dual needs Q >= 2".into()));
    }
    scan_dual(x, shift0, qmax, bits, ExponentKind::DualOrdinary)
}

/// Dual uniform exponent on the dyadic grid up to Q.
pub fn estimate_w_dual_uniform(x: &PointSpec, shift0: &Shift, qmax: i64, bits: u32) -> Result<ExponentEstimate> {
    if qmax < 16 {
        return Err(Error::Precondition("estimate_w_dual_uniform needs Q >= 16".into()));
    }
    scan_dual(x, shift0, qmax, bits, ExponentKind::DualUniform)
}
