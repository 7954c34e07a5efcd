//! Dyadic ball families on a curve: traces, the two-sided measure bounds,
//! the comparison lemma, disjoint/non-disjoint classification, disjoint-sum
//! decay, and the non-disjoint difference-vector dichotomy.
//!
//! A ball B_{p,q}(eps) is the set |q y + p + theta|_inf < |q|^(-1/n-eps); its
//! trace on a Monge curve is computed from the exact first-coordinate interval
//! and refined against the remaining coordinates by bisection. Families
//! enumerate q > 0 in one dyadic block: the signed balls of the limsup set
//! satisfy B^theta_{p,-q} = B^{-theta}_{-p,q}, i.e. they are the positive-q
//! family of the mirrored shift, so nothing is lost and the homogeneous family
//! avoids listing every ball twice.

#![allow(clippy::needless_range_loop)] // coordinate index drives eval_coord alongside p and theta

use crate::curve::{arc_measure, CurvePatch};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

/// Sorted list of disjoint open intervals.
pub type IntervalSet = Vec<(f64, f64)>;

pub fn set_measure_len(s: &IntervalSet) -> f64 {
    s.iter().map(|(l, h)| h - l).sum()
}

pub fn set_intersect(a: &IntervalSet, b: &IntervalSet) -> IntervalSet {
    let mut out = vec![];
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let l = a[i].0.max(b[j].0);
        let h = a[i].1.min(b[j].1);
        if l < h {
            out.push((l, h));
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Length of A \ B.
pub fn set_minus_len(a: &IntervalSet, b: &IntervalSet) -> f64 {
    set_measure_len(a) - set_measure_len(&set_intersect(a, b))
}

/// One approximation ball, positive q, with the shift carried separately.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxBall {
    pub q: i64,
    pub p: Vec<i64>,
    pub eps: f64,
}

impl ApproxBall {
    /// Predicate threshold |q|^(-1/n - eps'), optionally scaled (lambda B).
    pub fn threshold(&self, n: usize, eps_eff: f64, scale: f64) -> f64 {
        scale * (self.q.abs() as f64).powf(-1.0 / n as f64 - eps_eff)
    }

    /// Ball radius |q|^(-1 - 1/n - eps).
    pub fn radius(&self, n: usize) -> f64 {
        (self.q.abs() as f64).powf(-1.0 - 1.0 / n as f64 - self.eps)
    }

    pub fn center(&self, theta: &[f64]) -> Vec<f64> {
        self.p
            .iter()
            .zip(theta)
            .map(|(&pi, &ti)| (pi as f64 + ti) / self.q as f64)
            .collect()
    }

    /// Membership in predicate form: |q y + p + theta|_inf < scale * q^(-1/n-eps_eff).
    pub fn contains_predicate(&self, y: &[f64], theta: &[f64], eps_eff: f64, scale: f64) -> bool {
        let thr = self.threshold(y.len(), eps_eff, scale);
        y.iter()
            .zip(&self.p)
            .zip(theta)
            .all(|((&yi, &pi), &ti)| (self.q as f64 * yi + pi as f64 + ti).abs() < thr)
    }

    /// Membership in center/radius form: |y + (p + theta)/q|_inf < scale * radius.
    pub fn contains_ball_form(&self, y: &[f64], theta: &[f64], scale: f64) -> bool {
        let c = self.center(theta);
        let r = scale * self.radius(y.len());
        y.iter().zip(&c).all(|(&yi, &ci)| (yi + ci).abs() < r)
    }
}

/// Trace {x in I : f(x) in scale*B(eps_eff)} as a union of intervals.
/// The first coordinate gives an exact interval (Monge form); the remaining
/// coordinates are refined by sampling plus bisection to 1e-12 in x.
pub fn ball_trace(ball: &ApproxBall, curve: &CurvePatch, theta: &[f64], eps_eff: f64, scale: f64) -> IntervalSet {
    let n = curve.dimension();
    let (a, b) = curve.interval();
    let thr = ball.threshold(n, eps_eff, scale);
    let q = ball.q as f64;
    let c1 = -(ball.p[0] as f64) - theta[0];
    let (mut lo, mut hi) = ((c1 - thr) / q, (c1 + thr) / q);
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let (lo, hi) = (lo.max(a), hi.min(b));
    if lo >= hi {
        return vec![];
    }
    if n == 1 {
        return vec![(lo, hi)];
    }
    // margin over the remaining coordinates; positive inside the trace
    let margin = |x: f64| {
        let mut worst = f64::INFINITY;
        for i in 1..n {
            let g = q * curve.eval_coord(i, x) + ball.p[i] as f64 + theta[i];
            worst = worst.min(thr - g.abs());
        }
        worst
    };
    let samples = (64.0 * curve.derivative_bound().max(1.0)).min(4096.0) as usize;
    let step = (hi - lo) / samples as f64;
    let xtol = 1e-12;
    let bisect = |mut neg: f64, mut pos: f64| {
        // margin(neg) <= 0 < margin(pos); return the crossing
        while (neg - pos).abs() > xtol {
            let mid = 0.5 * (neg + pos);
            if margin(mid) > 0.0 {
                pos = mid;
            } else {
                neg = mid;
            }
        }
        0.5 * (neg + pos)
    };
    let mut out = vec![];
    let mut open_at: Option<f64> = None;
    let mut prev_x = lo;
    let mut prev_m = margin(lo);
    if prev_m > 0.0 {
        open_at = Some(lo);
    }
    for i in 1..=samples {
        let x = if i == samples { hi } else { lo + step * i as f64 };
        let m = margin(x);
        if prev_m <= 0.0 && m > 0.0 {
            open_at = Some(bisect(prev_x, x));
        } else if prev_m > 0.0 && m <= 0.0 {
            let start = open_at.take().expect("open region");
            let end = bisect(x, prev_x);
            if start < end {
                out.push((start, end));
            }
        }
        prev_x = x;
        prev_m = m;
    }
    if let Some(start) = open_at {
        if start < hi {
            out.push((start, hi));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureBoundsAudit {
    pub measure: f64,
    pub upper: f64,
    pub lower: Option<f64>,
    pub ok: bool,
}

/// Trace measure against the proven two-sided bounds: measure <= 2nC r always,
/// and measure >= (1/2) min(1/C, |I|) r whenever the half ball meets the curve.
pub fn measure_bounds(ball: &ApproxBall, curve: &CurvePatch, theta: &[f64]) -> Result<MeasureBoundsAudit> {
    let n = curve.dimension();
    let c = curve.derivative_bound();
    let r = ball.radius(n);
    let trace = ball_trace(ball, curve, theta, ball.eps, 1.0);
    let mut measure = 0.0;
    for &(l, h) in &trace {
        measure += arc_measure(curve, l, h)?;
    }
    let mut upper = 2.0 * n as f64 * c * r;
    if std::env::var_os("DIOPH_FAULT_MEASURE_BOUND").is_some() {
        upper = 0.0; // test hook: force an audit violation
    }
    let half_hit = !ball_trace(ball, curve, theta, ball.eps, 0.5).is_empty();
    let lower = half_hit.then(|| 0.5 * (1.0 / c).min(curve.interval_length()) * r);
    let tol = 1e-8;
    let mut ok = measure <= upper * (1.0 + tol) + 1e-300;
    if let Some(low) = lower {
        ok = ok && measure >= low * (1.0 - tol) - 1e-300;
    }
    Ok(MeasureBoundsAudit {
        measure,
        upper,
        lower,
        ok,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BallTag {
    Disjoint,
    NonDisjoint,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyBall {
    pub ball: ApproxBall,
    pub tag: BallTag,
    /// Deepest-overlap partner for non-disjoint balls.
    pub partner: Option<(i64, Vec<i64>)>,
    /// A point of the pairwise eps/2 overlap, as a curve parameter.
    pub witness_x: Option<f64>,
    pub trace_eps: IntervalSet,
    pub trace_half_param: IntervalSet,
    pub measure_eps: f64,
    pub bounds_audit: MeasureBoundsAudit,
}

#[derive(Debug, Clone, Serialize)]
pub struct DyadicBallFamily {
    pub t: u32,
    pub eps: f64,
    pub theta: Vec<f64>,
    pub balls: Vec<FamilyBall>,
    /// Balls whose eps/2 trace is nonempty but whose eps trace is empty; they
    /// classify family members without being members themselves.
    pub n_colliders: usize,
}

struct RawBall {
    q: i64,
    p: Vec<i64>,
    trace_eps: IntervalSet,
    trace_half_param: IntervalSet,
}

fn enumerate_q(curve: &CurvePatch, theta: &[f64], eps: f64, q: i64) -> Vec<RawBall> {
    let n = curve.dimension();
    let (a, b) = curve.interval();
    let qf = q as f64;
    let thr_half = qf.powf(-1.0 / n as f64 - eps / 2.0);
    let mut out = vec![];
    // p1 range from the eps/2 condition (the widest trace needed anywhere)
    let lo = (-qf * b - theta[0] - thr_half).ceil() as i64;
    let hi = (-qf * a - theta[0] + thr_half).floor() as i64;
    let c = curve.derivative_bound();
    let extra = (thr_half * (1.0 + c)).ceil() as i64 + 1;
    for p1 in lo..=hi {
        let c1 = -(p1 as f64) - theta[0];
        let (xl, xh) = ((c1 - thr_half) / qf, (c1 + thr_half) / qf);
        let (xl, xh) = (xl.max(a), xh.min(b));
        if xl >= xh {
            continue;
        }
        let mid = 0.5 * (xl + xh);
        // the other coordinates are pinned near round(-q f_i(mid) - theta_i):
        // over the base interval q f_i moves by at most qC * 2 thr_half / q
        let mut stack: Vec<Vec<i64>> = vec![vec![p1]];
        for i in 1..n {
            let center = (-qf * curve.eval_coord(i, mid) - theta[i]).round() as i64;
            let mut next = Vec::with_capacity(stack.len() * (2 * extra as usize + 1));
            for prefix in &stack {
                for d in -extra..=extra {
                    let mut v = prefix.clone();
                    v.push(center + d);
                    next.push(v);
                }
            }
            stack = next;
        }
        for p in stack {
            let ball = ApproxBall { q, p, eps };
            let trace_half_param = ball_trace(&ball, curve, theta, eps / 2.0, 1.0);
            if trace_half_param.is_empty() {
                continue;
            }
            let trace_eps = ball_trace(&ball, curve, theta, eps, 1.0);
            out.push(RawBall {
                q,
                p: ball.p,
                trace_eps,
                trace_half_param,
            });
        }
    }
    out
}

/// All balls with 2^t <= q < 2^(t+1) whose eps/2 trace meets the curve,
/// classified disjoint/non-disjoint by pairwise eps/2 trace intersection.
/// Family members are the balls whose eps trace is nonempty; every member is
/// audited against the two-sided measure bounds on construction.
pub fn enumerate_family(curve: &CurvePatch, theta: &[f64], eps: f64, t: u32) -> Result<DyadicBallFamily> {
    if theta.len() != curve.dimension() {
        return Err(Error::Precondition("shift dimension must match the curve".into()));
    }
    if eps <= 0.0 {
        return Err(Error::Precondition("eps must be positive".into()));
    }
    if t >= 26 {
        return Err(Error::Budget(format!("dyadic level t = {t} exceeds the enumeration budget")));
    }
    let slots = 2f64.powi(t as i32 + 1)
        * (curve.value_bound() + theta.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0)
        * curve.interval_length().max(1.0);
    if slots > 1e9 {
        return Err(Error::Budget(format!("family at t = {t} needs {slots:.2e} candidate slots")));
    }

    let q_range: Vec<i64> = ((1i64 << t)..(1i64 << (t + 1))).collect();
    let mut raw: Vec<RawBall> = q_range
        .par_iter()
        .flat_map_iter(|&q| enumerate_q(curve, theta, eps, q))
        .collect();
    raw.sort_by(|x, y| (x.q, &x.p).cmp(&(y.q, &y.p)));
    raw.dedup_by(|x, y| x.q == y.q && x.p == y.p);

    // classification sweep over the eps/2 traces
    let mut events: Vec<(f64, f64, usize)> = vec![];
    for (i, rb) in raw.iter().enumerate() {
        for &(l, h) in &rb.trace_half_param {
            events.push((l, h, i));
        }
    }
    events.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    // best partner per ball: deepest overlap, then smallest |dq|, then lex p
    let mut partner: Vec<Option<(f64, i64, usize)>> = vec![None; raw.len()];
    let mut witness: Vec<Option<f64>> = vec![None; raw.len()];
    let mut active: Vec<(f64, f64, usize)> = vec![];
    let n = curve.dimension();
    for &(l, h, i) in &events {
        active.retain(|&(_, ah, _)| ah > l);
        for &(al, ah, j) in active.iter() {
            if j == i {
                continue;
            }
            let (ol, oh) = (l.max(al), h.min(ah));
            if ol >= oh {
                continue;
            }
            let (depth, at) = overlap_depth(&raw[i], &raw[j], curve, theta, eps, (ol, oh), n);
            for (me, other) in [(i, j), (j, i)] {
                let dq = (raw[me].q - raw[other].q).abs();
                let better = match &partner[me] {
                    None => true,
                    Some((d0, dq0, j0)) => (depth, dq, &raw[other].p) < (*d0, *dq0, &raw[*j0].p),
                };
                if better {
                    partner[me] = Some((depth, dq, other));
                    witness[me] = Some(at);
                }
            }
        }
        active.push((l, h, i));
    }

    let mut balls = vec![];
    let mut n_colliders = 0usize;
    for (i, rb) in raw.iter().enumerate() {
        if rb.trace_eps.is_empty() {
            n_colliders += 1;
            continue;
        }
        let ball = ApproxBall {
            q: rb.q,
            p: rb.p.clone(),
            eps,
        };
        let audit = measure_bounds(&ball, curve, theta)?;
        if !audit.ok {
            return Err(Error::Invariant(format!(
                "two-sided measure bound failed for q={} p={:?}: measure {} vs upper {} / lower {:?}",
                rb.q, rb.p, audit.measure, audit.upper, audit.lower
            )));
        }
        let mut measure_eps = 0.0;
        for &(l, h) in &rb.trace_eps {
            measure_eps += arc_measure(curve, l, h)?;
        }
        let (tag, partner_ids, wx) = match partner[i] {
            Some((_, _, j)) => (BallTag::NonDisjoint, Some((raw[j].q, raw[j].p.clone())), witness[i]),
            None => (BallTag::Disjoint, None, None),
        };
        balls.push(FamilyBall {
            ball,
            tag,
            partner: partner_ids,
            witness_x: wx,
            trace_eps: rb.trace_eps.clone(),
            trace_half_param: rb.trace_half_param.clone(),
            measure_eps,
            bounds_audit: audit,
        });
    }
    Ok(DyadicBallFamily {
        t,
        eps,
        theta: theta.to_vec(),
        balls,
        n_colliders,
    })
}

fn overlap_depth(
    a: &RawBall,
    b: &RawBall,
    curve: &CurvePatch,
    theta: &[f64],
    eps: f64,
    span: (f64, f64),
    n: usize,
) -> (f64, f64) {
    let margin = |rb: &RawBall, x: f64| {
        let thr = (rb.q as f64).powf(-1.0 / n as f64 - eps / 2.0);
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            let g = rb.q as f64 * curve.eval_coord(i, x) + rb.p[i] as f64 + theta[i];
            worst = worst.max(g.abs() - thr);
        }
        worst
    };
    let mut best = f64::INFINITY;
    let mut at = 0.5 * (span.0 + span.1);
    for k in 0..=32 {
        let x = span.0 + (span.1 - span.0) * k as f64 / 32.0;
        let v = margin(a, x).max(margin(b, x));
        if v < best {
            best = v;
            at = x;
        }
    }
    (best, at)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayRow {
    pub t: u32,
    pub s_disjoint: f64,
    pub s_all: f64,
    pub bound: f64,
    pub n_disjoint: usize,
    pub n_nondisjoint: usize,
    pub bound_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub k_constant: f64,
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of log2 S(t) against t over rows with S(t) > 0.
    pub slope: Option<f64>,
}

/// Disjoint-sum decay over a range of dyadic levels. Requires 2^t > 2/eps for
/// every level (the comparison-lemma threshold).
pub fn disjoint_sum_decay(
    curve: &CurvePatch,
    theta: &[f64],
    eps: f64,
    t_range: std::ops::RangeInclusive<u32>,
) -> Result<(DecayReport, Vec<DyadicBallFamily>)> {
    let c = curve.derivative_bound();
    let mu_total = arc_measure(curve, curve.interval().0, curve.interval().1)?;
    let k_constant = 4.0 * curve.dimension() as f64 * c / (1.0 / c).min(curve.interval_length()) * mu_total;
    for t in t_range.clone() {
        if 2f64.powi(t as i32) <= 2.0 / eps {
            return Err(Error::Precondition(format!(
                "level t = {t} violates the threshold 2^t > 2/eps = {}",
                2.0 / eps
            )));
        }
    }
    let mut rows = vec![];
    let mut families = vec![];
    for t in t_range {
        let fam = enumerate_family(curve, theta, eps, t)?;
        let mut s_disjoint = 0.0;
        let mut s_all = 0.0;
        let (mut nd, mut nn) = (0usize, 0usize);
        for b in &fam.balls {
            s_all += b.measure_eps;
            match b.tag {
                BallTag::Disjoint => {
                    s_disjoint += b.measure_eps;
                    nd += 1;
                }
                BallTag::NonDisjoint => nn += 1,
            }
        }
        let bound = k_constant * 2f64.powf(-(t as f64) * eps / 2.0);
        rows.push(DecayRow {
            t,
            s_disjoint,
            s_all,
            bound,
            n_disjoint: nd,
            n_nondisjoint: nn,
            bound_ok: s_disjoint <= bound * (1.0 + 1e-8),
        });
        families.push(fam);
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.s_disjoint > 0.0)
        .map(|r| (r.t as f64, r.s_disjoint.log2()))
        .collect();
    let slope = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    });
    Ok((
        DecayReport {
            k_constant,
            rows,
            slope,
        },
        families,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub q: i64,
    pub p: Vec<i64>,
    pub containment_defect: f64,
    pub measure_eps: f64,
    pub measure_half: f64,
    pub ratio_bound: f64,
    pub ok: bool,
}

/// Containment B(eps) inside (1/2)B(eps/2) and the measure comparison, for
/// balls with q >= 2^(2/eps). The containment needs q^(eps/2) >= 2; the
/// weaker gate 2/eps would not provide it.
pub fn comparison_audit(family: &DyadicBallFamily, curve: &CurvePatch) -> Result<Vec<ComparisonRow>> {
    let n = curve.dimension();
    let c = curve.derivative_bound();
    let gate = 2f64.powf(2.0 / family.eps);
    let kf = 4.0 * n as f64 * c / (1.0 / c).min(curve.interval_length());
    let mut rows = vec![];
    for b in &family.balls {
        let q = b.ball.q;
        if (q as f64) < gate {
            continue;
        }
        let half_scaled = ball_trace(&b.ball, curve, &family.theta, family.eps / 2.0, 0.5);
        let defect = set_minus_len(&b.trace_eps, &half_scaled);
        let mut measure_half = 0.0;
        for &(l, h) in &b.trace_half_param {
            measure_half += arc_measure(curve, l, h)?;
        }
        let ratio_bound = kf * (q as f64).powf(-family.eps / 2.0) * measure_half;
        let containment_ok = defect <= 1e-9;
        let ratio_ok = measure_half <= 0.0 || b.measure_eps <= ratio_bound * (1.0 + 1e-8);
        rows.push(ComparisonRow {
            q,
            p: b.ball.p.clone(),
            containment_defect: defect,
            measure_eps: b.measure_eps,
            measure_half,
            ratio_bound,
            ok: containment_ok && ratio_ok,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub enum DichotomyBranch {
    /// t below the crossover where the eps/3 classification applies.
    BelowCrossover,
    /// t at or above the crossover; records whether the witness lands in the
    /// homogeneous set S_n(eps/3).
    Eps3 { in_set: bool },
}

#[derive(Debug, Clone, Serialize)]
pub struct DichotomyRecord {
    pub t: u32,
    pub q: i64,
    pub p: Vec<i64>,
    pub partner_q: i64,
    pub partner_p: Vec<i64>,
    /// canonical difference (q - q', p - p'), sign-normalized to q_diff > 0
    pub q_diff: i64,
    pub p_diff: Vec<i64>,
    pub witness_x: f64,
    pub combination_lhs: f64,
    pub combination_bound: f64,
    pub combination_ok: bool,
    pub q_diff_in_range: bool,
    pub branch: DichotomyBranch,
}

/// Smallest t with 2*2^(t(-1/n-eps/2)) < 2^((t+2)(-1/n-eps/3)).
pub fn dichotomy_crossover_t(n: usize, eps: f64) -> u32 {
    let nf = n as f64;
    for t in 0..4096u32 {
        let tf = t as f64;
        let lhs = 1.0 + tf * (-1.0 / nf - eps / 2.0);
        let rhs = (tf + 2.0) * (-1.0 / nf - eps / 3.0);
        if lhs < rhs {
            return t;
        }
    }
    4096
}

/// Difference-vector records for every non-disjoint ball of the family.
pub fn nondisjoint_dichotomy(family: &DyadicBallFamily, curve: &CurvePatch) -> Result<Vec<DichotomyRecord>> {
    let n = curve.dimension();
    let t = family.t;
    let crossover = dichotomy_crossover_t(n, family.eps);
    let mut out = vec![];
    for b in &family.balls {
        if b.tag != BallTag::NonDisjoint {
            continue;
        }
        let (pq, pp) = b.partner.clone().expect("non-disjoint ball has a partner");
        let wx = b.witness_x.expect("non-disjoint ball has a witness");
        let q_diff_raw = b.ball.q - pq;
        if q_diff_raw == 0 {
            return Err(Error::Invariant(format!(
                "non-disjoint pair with equal q = {}: p {:?} vs {:?}",
                b.ball.q, b.ball.p, pp
            )));
        }
        let sign = if q_diff_raw < 0 { -1 } else { 1 };
        let q_diff = sign * q_diff_raw;
        let p_diff: Vec<i64> = b.ball.p.iter().zip(&pp).map(|(&x, &y)| sign * (x - y)).collect();
        let y = curve.eval(wx);
        let lhs = y
            .iter()
            .zip(&p_diff)
            .map(|(&yi, &pi)| (q_diff as f64 * yi + pi as f64).abs())
            .fold(0.0f64, f64::max);
        let bound = 2.0 * 2f64.powf(t as f64 * (-1.0 / n as f64 - family.eps / 2.0));
        let branch = if t >= crossover {
            let thr = (q_diff.abs() as f64).powf(-1.0 / n as f64 - family.eps / 3.0);
            DichotomyBranch::Eps3 { in_set: lhs < thr }
        } else {
            DichotomyBranch::BelowCrossover
        };
        out.push(DichotomyRecord {
            t,
            q: b.ball.q,
            p: b.ball.p.clone(),
            partner_q: pq,
            partner_p: pp,
            q_diff,
            p_diff,
            witness_x: wx,
            combination_lhs: lhs,
            combination_bound: bound,
            combination_ok: lhs < bound,
            q_diff_in_range: q_diff > 0 && q_diff <= 1i64 << (t + 2),
            branch,
        });
    }
    Ok(out)
}

/// (q'', p'') pairs repeated across dyadic levels; a pair recurring at three
/// or more levels is the rational-point branch of the dichotomy.
pub fn repeated_difference_pairs(records: &[DichotomyRecord]) -> HashMap<(i64, Vec<i64>), Vec<u32>> {
    let mut map: HashMap<(i64, Vec<i64>), Vec<u32>> = HashMap::new();
    for r in records {
        let e = map.entry((r.q_diff, r.p_diff.clone())).or_default();
        if !e.contains(&r.t) {
            e.push(r.t);
        }
    }
    map.retain(|_, ts| ts.len() >= 3);
    for ts in map.values_mut() {
        ts.sort_unstable();
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::veronese;

    #[test]
    fn trace_matches_linear_formula_dim_one() {
        let curve = veronese(1, 0.0, 1.0).unwrap();
        let ball = ApproxBall { q: 7, p: vec![-3], eps: 0.1 };
        let tr = ball_trace(&ball, &curve, &[0.0], 0.1, 1.0);
        let r = 7f64.powf(-1.1);
        let lo = (3.0 - r) / 7.0;
        let hi = (3.0 + r) / 7.0;
        assert_eq!(tr.len(), 1);
        assert!((tr[0].0 - lo).abs() < 1e-12 && (tr[0].1 - hi).abs() < 1e-12);
    }

    #[test]
    fn trace_diameter_bound() {
        // |x - x'| < 2 q^(-1-1/n-eps) for any two trace points
        let curve = veronese(2, 0.0, 1.0).unwrap();
        let ball = ApproxBall { q: 7, p: vec![-3, -1], eps: 0.1 };
        let tr = ball_trace(&ball, &curve, &[0.0, 0.0], 0.1, 1.0);
        if let (Some(first), Some(last)) = (tr.first(), tr.last()) {
            assert!(last.1 - first.0 <= 2.0 * ball.radius(2) + 1e-12);
        }
    }

    #[test]
    fn trace_against_dense_sampling_oracle() {
        let curve = veronese(2, 0.0, 1.0).unwrap();
        let theta = [0.0, 0.0];
        let ball = ApproxBall { q: 7, p: vec![-3, -1], eps: 0.1 };
        let tr = ball_trace(&ball, &curve, &theta, 0.1, 1.0);
        let inside = |x: f64| {
            let y = curve.eval(x);
            ball.contains_predicate(&y, &theta, 0.1, 1.0)
        };
        for k in 0..10_000 {
            let x = k as f64 / 9_999.0;
            let claimed = tr.iter().any(|&(l, h)| l < x && x < h);
            if inside(x) != claimed {
                let near_edge = tr.iter().any(|&(l, h)| (x - l).abs() < 1e-9 || (x - h).abs() < 1e-9);
                assert!(near_edge, "trace disagrees with the oracle at x={x}");
            }
        }
    }

    #[test]
    fn membership_forms_agree() {
        let ball = ApproxBall { q: 9, p: vec![-4, -2], eps: 0.25 };
        let theta = [0.13, 0.41];
        let mut state = 7u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..5000 {
            let y = [rnd() * 1.2 - 0.1, rnd() * 1.2 - 0.1];
            let a = ball.contains_predicate(&y, &theta, 0.25, 1.0);
            let b = ball.contains_ball_form(&y, &theta, 1.0);
            if a != b {
                let c = ball.center(&theta);
                let r = ball.radius(2);
                let d = y.iter().zip(&c).map(|(&yi, &ci)| (yi + ci).abs()).fold(0.0f64, f64::max);
                assert!((d - r).abs() < 1e-9, "forms disagree away from the boundary");
            }
        }
    }

    #[test]
    fn half_ball_has_half_radius() {
        let ball = ApproxBall { q: 12, p: vec![-5, -3], eps: 0.4 };
        assert!((ball.threshold(2, 0.4, 0.5) - 0.5 * ball.threshold(2, 0.4, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn small_family_enumerates_and_classifies() {
        // t = 0, n = 1, curve x on [0,1], theta = 0, eps = 0.1: q = 1 and the
        // endpoint balls p = 0 and p = -1
        let curve = veronese(1, 0.0, 1.0).unwrap();
        let fam = enumerate_family(&curve, &[0.0], 0.1, 0).unwrap();
        assert!(fam.balls.len() >= 2);
        let ps: Vec<i64> = fam.balls.iter().map(|b| b.ball.p[0]).collect();
        assert!(ps.contains(&0) && ps.contains(&-1));
        // brute-force oracle over p in [-3, 3]
        for p in -3..=3i64 {
            let ball = ApproxBall { q: 1, p: vec![p], eps: 0.1 };
            let nonempty = !ball_trace(&ball, &curve, &[0.0], 0.1, 1.0).is_empty();
            assert_eq!(nonempty, ps.contains(&p), "p = {p}");
        }
    }

    #[test]
    fn classification_is_symmetric() {
        let curve = veronese(2, 0.0, 1.0).unwrap();
        let fam = enumerate_family(&curve, &[0.3, 0.7], 0.4, 5).unwrap();
        let by_key: HashMap<(i64, Vec<i64>), &FamilyBall> =
            fam.balls.iter().map(|b| ((b.ball.q, b.ball.p.clone()), b)).collect();
        let mut seen_nondisjoint = false;
        for b in &fam.balls {
            if let Some((pq, pp)) = &b.partner {
                seen_nondisjoint = true;
                if let Some(other) = by_key.get(&(*pq, pp.clone())) {
                    assert_eq!(other.tag, BallTag::NonDisjoint);
                }
            }
        }
        assert!(seen_nondisjoint, "expected collisions at this density");
    }

    #[test]
    fn far_apart_balls_are_disjoint() {
        // large eps shrinks the balls far below the center gaps, and a
        // badly-approximable shift keeps centers of different q separated
        // (the q=4..7 block has center gaps >= ||k theta|| / 42 for k <= 3)
        let curve = veronese(1, 0.0, 1.0).unwrap();
        let theta = [0.6180339887498949];
        let fam = enumerate_family(&curve, &theta, 8.0, 2).unwrap();
        assert!(!fam.balls.is_empty());
        for b in &fam.balls {
            assert_eq!(b.tag, BallTag::Disjoint, "q={} p={:?}", b.ball.q, b.ball.p);
        }
        for (i, a) in fam.balls.iter().enumerate() {
            for (j, b) in fam.balls.iter().enumerate() {
                if i < j {
                    assert!(set_intersect(&a.trace_half_param, &b.trace_half_param).is_empty());
                }
            }
        }
    }

    #[test]
    fn decomposition_is_complete() {
        let curve = veronese(2, 0.0, 1.0).unwrap();
        let fam = enumerate_family(&curve, &[0.3, 0.7], 0.4, 4).unwrap();
        let nd = fam.balls.iter().filter(|b| b.tag == BallTag::Disjoint).count();
        let nn = fam.balls.iter().filter(|b| b.tag == BallTag::NonDisjoint).count();
        assert_eq!(nd + nn, fam.balls.len());
        assert!(!fam.balls.is_empty());
    }

    #[test]
    fn empty_trace_bounds_are_trivially_ok() {
        let curve = veronese(2, 0.0, 1.0).unwrap();
        let ball = ApproxBall { q: 64, p: vec![500, 500], eps: 0.4 };
        let audit = measure_bounds(&ball, &curve, &[0.0, 0.0]).unwrap();
        assert_eq!(audit.measure, 0.0);
        assert!(audit.ok);
        assert!(audit.lower.is_none());
    }

    #[test]
    fn measure_bound_constants_veronese_q100() {
        // upper = 2*2*2*100^(-1.6); lower = (1/2) min(1/2, 1) 100^(-1.6)
        let curve = veronese(2, 0.0, 1.0).unwrap();
        let r = 100f64.powf(-1.6);
        // both coordinates of 100 f(0.3) = (30, 9) are integers, so the ball
        // with p = (-30, -9) is centered on the curve and the half ball hits
        let x0 = 0.3;
        let p: Vec<i64> = curve.eval(x0).iter().map(|&v| (-100.0 * v).round() as i64).collect();
        let ball = ApproxBall { q: 100, p, eps: 0.1 };
        let audit = measure_bounds(&ball, &curve, &[0.0, 0.0]).unwrap();
        assert!(audit.ok);
        assert!((audit.upper - 8.0 * r).abs() < 1e-15);
        let lower = audit.lower.expect("half ball hit by construction");
        assert!((lower - 0.25 * r).abs() < 1e-15);
        assert!(audit.measure <= audit.upper && audit.measure >= lower);
    }

    #[test]
    fn crossover_threshold_matches_formula() {
        let t = dichotomy_crossover_t(2, 0.4);
        let f = |t: f64| 1.0 + t * (-0.5 - 0.2) - (t + 2.0) * (-0.5 - 0.4 / 3.0);
        assert!(f(t as f64) < 0.0);
        assert!(f(t as f64 - 1.0) >= 0.0);
    }

    #[test]
    fn planted_rational_point_repeats_difference_pair() {
        // y = (1/2, 1/4) on the veronese curve: balls centered exactly at y
        // exist for every q divisible by 4 and collide pairwise
        let curve = veronese(2, 0.3, 0.7).unwrap();
        let mut all = vec![];
        for t in 4..=7 {
            let fam = enumerate_family(&curve, &[0.0, 0.0], 0.4, t).unwrap();
            let recs = nondisjoint_dichotomy(&fam, &curve).unwrap();
            for r in &recs {
                assert!(r.combination_ok, "combination bound failed at t={t}");
                assert!(r.q_diff_in_range);
            }
            all.extend(recs);
        }
        let repeated = repeated_difference_pairs(&all);
        let hit = repeated
            .iter()
            .any(|((qd, pd), ts)| *qd == 4 && pd == &vec![-2, -1] && ts.len() >= 3);
        assert!(hit, "planted rational pair (4, [-2,-1]) not found: {repeated:?}");
    }
}
