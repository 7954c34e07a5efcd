//! Monge-form curve patches, the Veronese curve, certified derivative bounds,
//! arc-length quadrature, and slicing of 2-D surface patches into curves.
//!
//! Coordinate functions come from a closed family so that sup |f'| can be
//! certified: identity (always the first coordinate), monomials, polynomials
//! with rational coefficients, exp, and scaled sine. Curve numerics run in
//! f64; the enumerated heights keep every tolerance far above rounding noise.

use crate::{Error, Result};
use serde::Serialize;

/// Coordinate function on a finite interval.
#[derive(Debug, Clone, PartialEq)]
pub enum CoordFn {
    Identity,
    Monomial(u32),
    /// coefficients c_0 + c_1 x + ... (parsed from exact rationals)
    Poly(Vec<f64>),
    Exp,
    SinScaled { amp: f64, freq: f64, phase: f64 },
}

impl CoordFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            CoordFn::Identity => x,
            CoordFn::Monomial(k) => x.powi(*k as i32),
            CoordFn::Poly(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
            CoordFn::Exp => x.exp(),
            CoordFn::SinScaled { amp, freq, phase } => amp * (freq * x + phase).sin(),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            CoordFn::Identity => 1.0,
            CoordFn::Monomial(k) => *k as f64 * x.powi(*k as i32 - 1),
            CoordFn::Poly(c) => {
                let mut acc = 0.0;
                for (k, &ck) in c.iter().enumerate().skip(1).rev() {
                    acc = acc * x + k as f64 * ck;
                }
                acc
            }
            CoordFn::Exp => x.exp(),
            CoordFn::SinScaled { amp, freq, phase } => amp * freq * (freq * x + phase).cos(),
        }
    }

    /// Certified sup of |f'| on [a, b]: exact for monotone derivatives
    /// (endpoint evaluation) and closed-form families; critical points of the
    /// derivative are located by sign changes of the second derivative.
    fn deriv_sup(&self, a: f64, b: f64) -> f64 {
        match self {
            CoordFn::Identity => 1.0,
            CoordFn::Monomial(_) => {
                // |k x^(k-1)| is maximal at an endpoint
                let va = self.deriv(a).abs();
                let vb = self.deriv(b).abs();
                va.max(vb)
            }
            CoordFn::Exp => b.exp(),
            CoordFn::SinScaled { amp, freq, .. } => (amp * freq).abs(),
            CoordFn::Poly(c) => {
                let mut best = self.deriv(a).abs().max(self.deriv(b).abs());
                // second derivative sign changes bracket the critical points of f'
                let dd = |x: f64| {
                    let mut acc = 0.0;
                    for (k, &ck) in c.iter().enumerate().skip(2).rev() {
                        acc = acc * x + (k * (k - 1)) as f64 * ck;
                    }
                    acc
                };
                let m = 512;
                let mut prev_x = a;
                let mut prev = dd(a);
                for i in 1..=m {
                    let x = a + (b - a) * i as f64 / m as f64;
                    let cur = dd(x);
                    if prev == 0.0 || prev.signum() != cur.signum() {
                        let (mut lo, mut hi) = (prev_x, x);
                        for _ in 0..80 {
                            let mid = 0.5 * (lo + hi);
                            if dd(lo).signum() == dd(mid).signum() {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        best = best.max(self.deriv(0.5 * (lo + hi)).abs());
                    }
                    prev_x = x;
                    prev = cur;
                }
                best
            }
        }
    }

    fn value_sup(&self, a: f64, b: f64) -> f64 {
        // coarse but certified: endpoint and critical values of f come from
        // sign changes of f'
        let mut best = self.eval(a).abs().max(self.eval(b).abs());
        let m = 512;
        let mut prev_x = a;
        let mut prev = self.deriv(a);
        for i in 1..=m {
            let x = a + (b - a) * i as f64 / m as f64;
            let cur = self.deriv(x);
            if prev == 0.0 || prev.signum() != cur.signum() {
                let (mut lo, mut hi) = (prev_x, x);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if self.deriv(lo).signum() == self.deriv(mid).signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                best = best.max(self.eval(0.5 * (lo + hi)).abs());
            }
            prev_x = x;
            prev = cur;
        }
        best
    }
}

/// Monge-form curve f = (x, f_2(x), ..., f_n(x)) on a finite interval [a, b].
#[derive(Debug, Clone)]
pub struct CurvePatch {
    coords: Vec<CoordFn>,
    a: f64,
    b: f64,
    derivative_bound: f64,
    value_bound: f64,
}

impl CurvePatch {
    pub fn new(coords: Vec<CoordFn>, a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Precondition("curve interval must be finite with a < b".into()));
        }
        if coords.is_empty() {
            return Err(Error::Precondition("curve needs at least one coordinate".into()));
        }
        if coords[0] != CoordFn::Identity {
            return Err(Error::Precondition("first coordinate must be the identity (Monge form)".into()));
        }
        let derivative_bound = coords.iter().map(|f| f.deriv_sup(a, b)).fold(0.0f64, f64::max);
        let value_bound = coords.iter().map(|f| f.value_sup(a, b)).fold(0.0f64, f64::max);
        Ok(CurvePatch {
            coords,
            a,
            b,
            derivative_bound,
            value_bound,
        })
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn interval_length(&self) -> f64 {
        self.b - self.a
    }

    /// Certified sup of |f'|_inf on the interval; at least 1 since f_1' = 1.
    pub fn derivative_bound(&self) -> f64 {
        self.derivative_bound
    }

    /// Certified sup of |f|_inf (boundedness certificate).
    pub fn value_bound(&self) -> f64 {
        self.value_bound
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        self.coords.iter().map(|f| f.eval(x)).collect()
    }

    pub fn eval_coord(&self, i: usize, x: f64) -> f64 {
        self.coords[i].eval(x)
    }

    /// Euclidean speed |f'(x)|_2.
    pub fn speed(&self, x: f64) -> f64 {
        self.coords.iter().map(|f| f.deriv(x).powi(2)).sum::<f64>().sqrt()
    }

    pub fn coord_fns(&self) -> &[CoordFn] {
        &self.coords
    }
}

/// The Veronese curve (x, x^2, ..., x^n) on [a, b].
pub fn veronese(n: usize, a: f64, b: f64) -> Result<CurvePatch> {
    if n < 1 {
        return Err(Error::Precondition("veronese needs n >= 1".into()));
    }
    let coords = (1..=n)
        .map(|k| if k == 1 { CoordFn::Identity } else { CoordFn::Monomial(k as u32) })
        .collect();
    CurvePatch::new(coords, a, b)
}

/// Arc measure of a subinterval: integral of |f'|_2 by adaptive Simpson to
/// 1e-8 relative tolerance.
pub fn arc_measure(curve: &CurvePatch, lo: f64, hi: f64) -> Result<f64> {
    if lo > hi {
        return Err(Error::Precondition("arc_measure needs lo <= hi".into()));
    }
    let (a, b) = curve.interval();
    if lo < a - 1e-12 || hi > b + 1e-12 {
        return Err(Error::Precondition("subinterval leaves the curve domain".into()));
    }
    if lo == hi {
        return Ok(0.0);
    }
    adaptive_simpson(&|x| curve.speed(x), lo, hi, 1e-8)
}

/// Adaptive Simpson quadrature with a relative tolerance on the whole integral.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
        worst: &mut f64,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol || depth >= 40 {
            if depth >= 40 {
                *worst = worst.max(delta.abs());
            }
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth + 1, worst)
            + rec(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth + 1, worst)
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    let scale = whole.abs().max((b - a) * 1e-30).max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    let v = rec(f, a, fa, b, fb, whole, m, fm, rel_tol * scale, 0, &mut worst);
    if worst > rel_tol * scale * 64.0 {
        return Err(Error::Quadrature {
            achieved: worst / scale,
        });
    }
    Ok(v)
}

/// 2-D surface patch g: U -> R^n with bivariate-polynomial coordinates.
#[derive(Debug, Clone)]
pub struct SurfacePatch2D {
    /// terms (i, j, c): c * x^i * y^j per coordinate
    coords: Vec<Vec<(u32, u32, f64)>>,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub enum SliceOutcome {
    Accepted { y: f64, derivative_bound: f64, arc: f64 },
    Rejected { y: f64, reason: String },
}

impl SurfacePatch2D {
    pub fn new(coords: Vec<Vec<(u32, u32, f64)>>, x_range: (f64, f64), y_range: (f64, f64)) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::Precondition("surface needs n >= 2 coordinates".into()));
        }
        if !(x_range.0 < x_range.1 && y_range.0 < y_range.1) {
            return Err(Error::Precondition("surface box must be nondegenerate".into()));
        }
        Ok(SurfacePatch2D { coords, x_range, y_range })
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    pub fn eval(&self, x: f64, y: f64) -> Vec<f64> {
        self.coords
            .iter()
            .map(|terms| terms.iter().map(|&(i, j, c)| c * x.powi(i as i32) * y.powi(j as i32)).sum())
            .collect()
    }

    /// |d g / d x|_2 at (x, y): the quantity x-slicing reproduces.
    pub fn x_speed(&self, x: f64, y: f64) -> f64 {
        self.coords
            .iter()
            .map(|terms| {
                let d: f64 = terms
                    .iter()
                    .filter(|&&(i, _, _)| i > 0)
                    .map(|&(i, j, c)| c * i as f64 * x.powi(i as i32 - 1) * y.powi(j as i32))
                    .sum();
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Freeze y; the slice is a valid Monge patch iff the first coordinate
    /// restricts to the identity in x.
    pub fn slice_at(&self, y: f64) -> std::result::Result<CurvePatch, String> {
        if y < self.y_range.0 - 1e-12 || y > self.y_range.1 + 1e-12 {
            return Err("slice parameter outside the surface box".into());
        }
        let polys: Vec<Vec<f64>> = self
            .coords
            .iter()
            .map(|terms| {
                let deg = terms.iter().map(|&(i, _, _)| i).max().unwrap_or(0) as usize;
                let mut c = vec![0.0; deg + 1];
                for &(i, j, coef) in terms {
                    c[i as usize] += coef * y.powi(j as i32);
                }
                c
            })
            .collect();
        let first_is_identity = {
            let c = &polys[0];
            c.len() == 2 && c[0] == 0.0 && c[1] == 1.0
        };
        if !first_is_identity {
            return Err("first coordinate does not restrict to the identity on this slice".into());
        }
        let mut coords = vec![CoordFn::Identity];
        for p in polys.iter().skip(1) {
            coords.push(CoordFn::Poly(p.clone()));
        }
        CurvePatch::new(coords, self.x_range.0, self.x_range.1).map_err(|e| e.to_string())
    }

    /// Slice at `count` midpoint-equispaced parameter values.
    pub fn slice_grid(&self, count: usize) -> Result<Vec<SliceOutcome>> {
        if count == 0 {
            return Err(Error::Precondition("slice count must be positive".into()));
        }
        let (ylo, yhi) = self.y_range;
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            let y = ylo + (yhi - ylo) * (k as f64 + 0.5) / count as f64;
            match self.slice_at(y) {
                Ok(patch) => {
                    let arc = arc_measure(&patch, patch.a, patch.b)?;
                    out.push(SliceOutcome::Accepted {
                        y,
                        derivative_bound: patch.derivative_bound(),
                        arc,
                    });
                }
                Err(reason) => out.push(SliceOutcome::Rejected { y, reason }),
            }
        }
        Ok(out)
    }
}

/// Compare the Riemann sum of slice arc measures against an independent 2-D
/// quadrature of |dg/dx|_2 over the box. Returns (slice_sum, quadrature).
pub fn fubini_consistency(surface: &SurfacePatch2D, slices: usize) -> Result<(f64, f64)> {
    let outcomes = surface.slice_grid(slices)?;
    let (ylo, yhi) = surface.y_range;
    let dy = (yhi - ylo) / slices as f64;
    let mut sum = 0.0;
    for o in &outcomes {
        match o {
            SliceOutcome::Accepted { arc, .. } => sum += arc * dy,
            SliceOutcome::Rejected { reason, .. } => {
                return Err(Error::Precondition(format!("fubini check hit a rejected slice: {reason}")))
            }
        }
    }
    // independent route: iterated Simpson in y of the x-line integrals
    let inner = |y: f64| adaptive_simpson(&|x| surface.x_speed(x, y), surface.x_range.0, surface.x_range.1, 1e-9).unwrap();
    let total = adaptive_simpson(&inner, ylo, yhi, 1e-9)?;
    Ok((sum, total))
}

// ---------------------------------------------------------------------------
// textual grammar: veronese:n=2:I=[0,1] | poly:(x, x^2-0.5x):I=[0,1]
//                  | surface:(x,y,x^2+y^2):U=[0,1]x[0,1]

fn gram(input: &str, token: &str) -> Error {
    Error::Grammar {
        input: input.to_string(),
        token: token.to_string(),
    }
}

fn parse_interval(input: &str, s: &str) -> Result<(f64, f64)> {
    let body = s
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| gram(input, s))?;
    let (a, b) = body.split_once(',').ok_or_else(|| gram(input, body))?;
    let a: f64 = a.trim().parse().map_err(|_| gram(input, a))?;
    let b: f64 = b.trim().parse().map_err(|_| gram(input, b))?;
    Ok((a, b))
}

/// Polynomial term parser over variables x (and y for surfaces). Terms are
/// sign-separated; coefficients are decimals or a/b rationals; products may
/// drop the '*' (0.5x, x^2y).
fn parse_terms(input: &str, expr: &str) -> Result<Vec<(u32, u32, f64)>> {
    let expr: String = expr.chars().filter(|c| !c.is_whitespace()).collect();
    if expr.is_empty() {
        return Err(gram(input, "<empty polynomial>"));
    }
    let mut terms = vec![];
    let mut rest = expr.as_str();
    while !rest.is_empty() {
        let sign = if let Some(r) = rest.strip_prefix('-') {
            rest = r;
            -1.0
        } else {
            if let Some(r) = rest.strip_prefix('+') {
                rest = r;
            }
            1.0
        };
        // term ends at the next top-level + or -
        let end = rest.find(['+', '-']).unwrap_or(rest.len());
        let (term, tail) = rest.split_at(end);
        rest = tail;
        if term.is_empty() {
            return Err(gram(input, "<empty term>"));
        }
        terms.push(parse_single_term(input, term, sign)?);
    }
    Ok(terms)
}

fn parse_single_term(input: &str, term: &str, sign: f64) -> Result<(u32, u32, f64)> {
    let mut coeff = sign;
    let mut xexp = 0u32;
    let mut yexp = 0u32;
    let mut s = term;
    // leading numeric coefficient (decimal or a/b)
    let numlen = s
        .char_indices()
        .take_while(|(_, c)| c.is_ascii_digit() || *c == '.' || *c == '/')
        .last()
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    if numlen > 0 {
        let numtxt = &s[..numlen];
        let v = if let Some((a, b)) = numtxt.split_once('/') {
            let a: f64 = a.parse().map_err(|_| gram(input, numtxt))?;
            let b: f64 = b.parse().map_err(|_| gram(input, numtxt))?;
            if b == 0.0 {
                return Err(gram(input, numtxt));
            }
            a / b
        } else {
            numtxt.parse().map_err(|_| gram(input, numtxt))?
        };
        coeff *= v;
        s = &s[numlen..];
    }
    while !s.is_empty() {
        s = s.strip_prefix('*').unwrap_or(s);
        let var = s.chars().next().ok_or_else(|| gram(input, term))?;
        if var != 'x' && var != 'y' {
            return Err(gram(input, &s[..var.len_utf8()]));
        }
        s = &s[1..];
        let mut e = 1u32;
        if let Some(r) = s.strip_prefix('^') {
            let dlen = r.chars().take_while(|c| c.is_ascii_digit()).count();
            if dlen == 0 {
                return Err(gram(input, r));
            }
            e = r[..dlen].parse().map_err(|_| gram(input, r))?;
            s = &r[dlen..];
        }
        if var == 'x' {
            xexp += e;
        } else {
            yexp += e;
        }
    }
    Ok((xexp, yexp, coeff))
}

fn terms_to_coord_fn(input: &str, terms: &[(u32, u32, f64)]) -> Result<CoordFn> {
    if terms.iter().any(|&(_, j, _)| j > 0) {
        return Err(gram(input, "y"));
    }
    let deg = terms.iter().map(|&(i, _, _)| i).max().unwrap_or(0) as usize;
    let mut c = vec![0.0; deg + 1];
    for &(i, _, coef) in terms {
        c[i as usize] += coef;
    }
    if c.len() == 2 && c[0] == 0.0 && c[1] == 1.0 {
        return Ok(CoordFn::Identity);
    }
    Ok(CoordFn::Poly(c))
}

/// Parse the curve grammar.
pub fn parse_curve(input: &str) -> Result<CurvePatch> {
    let (kind, rest) = input.split_once(':').ok_or_else(|| gram(input, input))?;
    match kind {
        "veronese" => {
            let (npart, ipart) = rest.split_once(":I=").ok_or_else(|| gram(input, rest))?;
            let n: usize = npart
                .strip_prefix("n=")
                .ok_or_else(|| gram(input, npart))?
                .parse()
                .map_err(|_| gram(input, npart))?;
            let (a, b) = parse_interval(input, ipart)?;
            veronese(n, a, b)
        }
        "poly" => {
            let (list, ipart) = rest.split_once(":I=").ok_or_else(|| gram(input, rest))?;
            let body = list
                .strip_prefix('(')
                .and_then(|t| t.strip_suffix(')'))
                .ok_or_else(|| gram(input, list))?;
            let (a, b) = parse_interval(input, ipart)?;
            let mut coords = vec![];
            for expr in body.split(',') {
                let terms = parse_terms(input, expr)?;
                coords.push(terms_to_coord_fn(input, &terms)?);
            }
            CurvePatch::new(coords, a, b)
        }
        other => Err(gram(input, other)),
    }
}

/// Parse the surface grammar.
pub fn parse_surface(input: &str) -> Result<SurfacePatch2D> {
    let rest = input.strip_prefix("surface:").ok_or_else(|| gram(input, input))?;
    let (list, upart) = rest.split_once(":U=").ok_or_else(|| gram(input, rest))?;
    let body = list
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| gram(input, list))?;
    let (xr, yr) = upart.split_once('x').ok_or_else(|| gram(input, upart))?;
    let x_range = parse_interval(input, xr)?;
    let y_range = parse_interval(input, yr)?;
    let mut coords = vec![];
    for expr in body.split(',') {
        coords.push(parse_terms(input, expr)?);
    }
    SurfacePatch2D::new(coords, x_range, y_range)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_parses_the_advertised_forms() {
        let c = parse_curve("veronese:n=2:I=[0,1]").unwrap();
        assert_eq!(c.dimension(), 2);
        assert_eq!(c.derivative_bound(), 2.0);

        let c = parse_curve("poly:(x, x^2-0.5x):I=[0,1]").unwrap();
        assert_eq!(c.dimension(), 2);
        let v = c.eval(0.5);
        assert_eq!(v[0], 0.5);
        assert!((v[1] - 0.0).abs() < 1e-15);

        let s = parse_surface("surface:(x,y,x^2+y^2):U=[0,1]x[0,1]").unwrap();
        assert_eq!(s.dimension(), 3);
        let g = s.eval(0.5, 0.25);
        assert_eq!(g, vec![0.5, 0.25, 0.3125]);
    }

    #[test]
    fn grammar_rejects_bad_tokens() {
        assert!(parse_curve("veronese:n=two:I=[0,1]").is_err());
        assert!(parse_curve("poly:(z):I=[0,1]").is_err());
        assert!(parse_curve("poly:(y):I=[0,1]").is_err());
        assert!(parse_curve("spiral:n=2:I=[0,1]").is_err());
        assert!(parse_surface("surface:(x,y):U=[0,1]").is_err());
    }

    #[test]
    fn rational_coefficients_parse_exactly() {
        let c = parse_curve("poly:(x, 1/4x^2+1/2):I=[0,2]").unwrap();
        let v = c.eval(2.0);
        assert_eq!(v[1], 1.5);
    }

    #[test]
    fn veronese_derivative_bounds_are_exact() {
        assert_eq!(veronese(2, 0.0, 1.0).unwrap().derivative_bound(), 2.0);
        assert_eq!(veronese(1, -3.0, 5.0).unwrap().derivative_bound(), 1.0);
        assert_eq!(veronese(3, 0.0, 1.0).unwrap().derivative_bound(), 3.0);
    }

    #[test]
    fn monge_identity_enforced() {
        assert!(CurvePatch::new(vec![CoordFn::Monomial(2)], 0.0, 1.0).is_err());
        let c = veronese(2, 0.0, 1.0).unwrap();
        for k in 0..100 {
            let x = k as f64 / 99.0;
            assert_eq!(c.eval(x)[0], x);
        }
    }

    #[test]
    fn arc_measure_veronese_closed_form() {
        // integral of sqrt(1+4x^2) over [0,1] = sqrt5/2 + asinh(2)/4
        let c = veronese(2, 0.0, 1.0).unwrap();
        let v = arc_measure(&c, 0.0, 1.0).unwrap();
        let exact = 5f64.sqrt() / 2.0 + 2f64.asinh() / 4.0;
        assert!((v - exact).abs() < 1e-8 * exact, "{v} vs {exact}");
    }

    #[test]
    fn arc_measure_identity_line() {
        let c = veronese(1, 0.0, 1.0).unwrap();
        let v = arc_measure(&c, 0.2, 0.5).unwrap();
        assert!((v - 0.3).abs() < 1e-10);
    }

    #[test]
    fn arc_measure_sandwich_and_additivity() {
        let c = veronese(2, 0.0, 1.0).unwrap();
        let n = c.dimension() as f64;
        let cbound = c.derivative_bound();
        let mut state = 123456789u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let (u, v) = (rnd(), rnd());
            let (lo, hi) = if u < v { (u, v) } else { (v, u) };
            let m = arc_measure(&c, lo, hi).unwrap();
            assert!(m >= (hi - lo) - 1e-10);
            assert!(m <= n * cbound * (hi - lo) + 1e-10);
            let mid = 0.5 * (lo + hi);
            let split = arc_measure(&c, lo, mid).unwrap() + arc_measure(&c, mid, hi).unwrap();
            assert!((split - m).abs() <= 1e-8 * m.max(1e-30));
        }
    }

    #[test]
    fn certified_bound_holds_on_random_samples() {
        let curves = [
            veronese(3, -1.0, 2.0).unwrap(),
            CurvePatch::new(
                vec![CoordFn::Identity, CoordFn::Poly(vec![0.0, -0.5, 1.0]), CoordFn::SinScaled { amp: 0.3, freq: 4.0, phase: 0.5 }],
                0.0,
                1.0,
            )
            .unwrap(),
            CurvePatch::new(vec![CoordFn::Identity, CoordFn::Exp], -1.0, 1.5).unwrap(),
        ];
        let mut state = 42u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for c in &curves {
            let (a, b) = c.interval();
            for _ in 0..1000 {
                let x = a + (b - a) * rnd();
                let d = c.coord_fns().iter().map(|f| f.deriv(x).abs()).fold(0.0f64, f64::max);
                assert!(d <= c.derivative_bound() + 1e-9 * c.derivative_bound());
            }
        }
    }

    fn paraboloid() -> SurfacePatch2D {
        // g(x, y) = (x, y, x^2 + y^2) on [0,1]^2
        SurfacePatch2D::new(
            vec![
                vec![(1, 0, 1.0)],
                vec![(0, 1, 1.0)],
                vec![(2, 0, 1.0), (0, 2, 1.0)],
            ],
            (0.0, 1.0),
            (0.0, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn slicing_paraboloid_gives_monge_patches() {
        let s = paraboloid();
        let outcomes = s.slice_grid(3).unwrap();
        assert_eq!(outcomes.len(), 3);
        for o in &outcomes {
            assert!(matches!(o, SliceOutcome::Accepted { .. }));
        }
        // the slice at y: curve (x, y, x^2 + y^2); coordinate 2 is constant
        let patch = s.slice_at(0.5).unwrap();
        assert_eq!(patch.dimension(), 3);
        let v = patch.eval(0.25);
        assert_eq!(v[0], 0.25);
        assert_eq!(v[1], 0.5);
        assert!((v[2] - (0.0625 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_surface_slices_rejected() {
        // g(x, y) = (y, x, xy): first coordinate constant in x on every slice
        let s = SurfacePatch2D::new(
            vec![vec![(0, 1, 1.0)], vec![(1, 0, 1.0)], vec![(1, 1, 1.0)]],
            (0.0, 1.0),
            (0.0, 1.0),
        )
        .unwrap();
        let outcomes = s.slice_grid(4).unwrap();
        for o in &outcomes {
            assert!(matches!(o, SliceOutcome::Rejected { .. }));
        }
    }

    #[test]
    fn single_slice_hits_midline() {
        let s = paraboloid();
        let outcomes = s.slice_grid(1).unwrap();
        match &outcomes[0] {
            SliceOutcome::Accepted { y, .. } => assert_eq!(*y, 0.5),
            _ => panic!("midline slice rejected"),
        }
    }

    #[test]
    fn fubini_consistency_within_five_percent() {
        let s = paraboloid();
        let (sum, total) = fubini_consistency(&s, 16).unwrap();
        assert!((sum - total).abs() <= 0.05 * total, "{sum} vs {total}");
    }
}
