//! Exact continuous piecewise-linear functions with integer slopes.
//!
//! A function lives on a half-line `[q0, ∞)` or a finite interval
//! `[q0, q0+Σlen]`.  Continuity is structural: only the start value is
//! stored and values propagate through the segment list.  All arithmetic
//! is exact rational arithmetic.

use crate::rat::{self, Rat};
use num::{Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlError {
    #[error("q = {0} outside function domain")]
    OutOfDomain(String),
    #[error("window not contained in both domains")]
    DomainMismatch,
    #[error("discontinuity when concatenating at q = {0}")]
    Discontinuous(String),
    #[error("no PL function with the allowed slopes fits sample {index} within tolerance")]
    SnapInfeasible { index: usize },
    #[error("samples must be strictly increasing in q")]
    SamplesNotIncreasing,
    #[error("slope {0} not in the allowed slope set")]
    SlopeNotAllowed(i64),
}

/// One linear segment: `len == None` marks the final, unbounded segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Seg {
    pub len: Option<Rat>,
    pub slope: i64,
}

impl Serialize for Seg {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let len = match &self.len {
            None => "inf".to_string(),
            Some(l) => rat::fmt_rat(l),
        };
        (len, self.slope).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Seg {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (len, slope) = <(String, i64)>::deserialize(d)?;
        let len = if len == "inf" {
            None
        } else {
            let l = rat::parse_rat(&len).map_err(D::Error::custom)?;
            if !l.is_positive() {
                return Err(D::Error::custom("segment length must be positive"));
            }
            Some(l)
        };
        Ok(Seg { len, slope })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PLFun {
    #[serde(with = "rat::serde_str")]
    pub q0: Rat,
    #[serde(with = "rat::serde_str")]
    pub v0: Rat,
    pub segments: Vec<Seg>,
    /// Declared slope alphabet; not serialized, defaults to {-1,0,1}.
    #[serde(skip, default = "default_slopes")]
    pub allowed_slopes: Vec<i64>,
}

fn default_slopes() -> Vec<i64> {
    vec![-1, 0, 1]
}

// The slope alphabet is metadata, not part of the function's identity.
impl PartialEq for PLFun {
    fn eq(&self, other: &Self) -> bool {
        self.q0 == other.q0 && self.v0 == other.v0 && self.segments == other.segments
    }
}

impl PLFun {
    /// Build and canonicalize: drop empty segments, merge equal adjacent
    /// slopes.  Panics on negative lengths or a non-final infinite segment.
    pub fn new(q0: Rat, v0: Rat, segments: Vec<Seg>) -> Self {
        let mut out: Vec<Seg> = Vec::with_capacity(segments.len());
        let last = segments.len();
        for (i, seg) in segments.into_iter().enumerate() {
            match &seg.len {
                None => assert!(i + 1 == last, "infinite segment must be last"),
                Some(l) => {
                    assert!(!l.is_negative(), "negative segment length");
                    if l.is_zero() {
                        continue;
                    }
                }
            }
            match out.last_mut() {
                Some(prev) if prev.slope == seg.slope && prev.len.is_some() => {
                    prev.len = match (&prev.len, &seg.len) {
                        (Some(a), Some(b)) => Some(a + b),
                        _ => None,
                    };
                }
                _ => out.push(seg),
            }
        }
        PLFun { q0, v0, segments: out, allowed_slopes: default_slopes() }
    }

    pub fn with_slopes(mut self, allowed: Vec<i64>) -> Result<Self, PlError> {
        for s in &self.segments {
            if !allowed.contains(&s.slope) {
                return Err(PlError::SlopeNotAllowed(s.slope));
            }
        }
        self.allowed_slopes = allowed;
        Ok(self)
    }

    pub fn constant(q0: Rat, v: Rat) -> Self {
        PLFun::new(q0, v, vec![Seg { len: None, slope: 0 }])
    }

    pub fn ray(q0: Rat, v0: Rat, slope: i64) -> Self {
        PLFun::new(q0, v0, vec![Seg { len: None, slope }])
    }

    /// The identity function `q ↦ q` on `[q0, ∞)`.
    pub fn identity(q0: Rat) -> Self {
        PLFun::ray(q0.clone(), q0, 1)
    }

    pub fn is_unbounded_domain(&self) -> bool {
        matches!(self.segments.last(), Some(Seg { len: None, .. })) || self.segments.is_empty()
    }

    /// End of a finite domain, `None` for a half-line.
    pub fn domain_end(&self) -> Option<Rat> {
        let mut q = self.q0.clone();
        for s in &self.segments {
            match &s.len {
                None => return None,
                Some(l) => q += l,
            }
        }
        Some(q)
    }

    pub fn in_domain(&self, q: &Rat) -> bool {
        if q < &self.q0 {
            return false;
        }
        match self.domain_end() {
            None => true,
            Some(e) => q <= &e,
        }
    }

    pub fn eval(&self, q: &Rat) -> Result<Rat, PlError> {
        if q < &self.q0 {
            return Err(PlError::OutOfDomain(rat::fmt_rat(q)));
        }
        let mut x = self.q0.clone();
        let mut v = self.v0.clone();
        for s in &self.segments {
            match &s.len {
                None => return Ok(v + rat::rat_i64(s.slope) * (q - x)),
                Some(l) => {
                    let end = &x + l;
                    if q <= &end {
                        return Ok(v + rat::rat_i64(s.slope) * (q - x));
                    }
                    v += rat::rat_i64(s.slope) * l;
                    x = end;
                }
            }
        }
        if q == &x {
            return Ok(v);
        }
        Err(PlError::OutOfDomain(rat::fmt_rat(q)))
    }

    /// Interior joints plus both domain endpoints, strictly increasing.
    pub fn breakpoints(&self) -> Vec<Rat> {
        let mut out = vec![self.q0.clone()];
        let mut q = self.q0.clone();
        for s in &self.segments {
            if let Some(l) = &s.len {
                q += l;
                out.push(q.clone());
            }
        }
        out
    }

    /// Slope valid immediately to the right of `q` (in-domain, not the
    /// finite right endpoint).
    pub fn slope_right(&self, q: &Rat) -> Option<i64> {
        if q < &self.q0 {
            return None;
        }
        let mut x = self.q0.clone();
        for s in &self.segments {
            match &s.len {
                None => return Some(s.slope),
                Some(l) => {
                    let end = &x + l;
                    if q < &end {
                        return Some(s.slope);
                    }
                    x = end;
                }
            }
        }
        None
    }

    /// Slope immediately to the left of `q` (q > q0).
    pub fn slope_left(&self, q: &Rat) -> Option<i64> {
        if q <= &self.q0 {
            return None;
        }
        let mut x = self.q0.clone();
        for s in &self.segments {
            match &s.len {
                None => return Some(s.slope),
                Some(l) => {
                    x += l;
                    if q <= &x {
                        return Some(s.slope);
                    }
                }
            }
        }
        None
    }

    pub fn final_slope(&self) -> Option<i64> {
        if self.is_unbounded_domain() {
            self.segments.last().map(|s| s.slope)
        } else {
            None
        }
    }

    /// Pointwise combination on the common domain.
    fn zip_with(&self, other: &PLFun, op: impl Fn(i64, i64) -> i64) -> PLFun {
        let q0 = self.q0.clone().max(other.q0.clone());
        let end = match (self.domain_end(), other.domain_end()) {
            (None, None) => None,
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (Some(a), Some(b)) => Some(a.min(b)),
        };
        let mut cuts: Vec<Rat> = self
            .breakpoints()
            .into_iter()
            .chain(other.breakpoints())
            .filter(|q| q > &q0 && end.as_ref().map_or(true, |e| q < e))
            .collect();
        cuts.sort();
        cuts.dedup();

        let v0 = op_val(&op, self, other, &q0);
        let mut segs = Vec::new();
        let mut prev = q0.clone();
        for c in cuts {
            let s = op(
                self.slope_right(&prev).unwrap(),
                other.slope_right(&prev).unwrap(),
            );
            segs.push(Seg { len: Some(&c - &prev), slope: s });
            prev = c;
        }
        let s_last = op(
            self.slope_right(&prev).unwrap_or_else(|| self.slope_left(&prev).unwrap()),
            other.slope_right(&prev).unwrap_or_else(|| other.slope_left(&prev).unwrap()),
        );
        match end {
            None => segs.push(Seg { len: None, slope: s_last }),
            Some(e) => {
                if e > prev {
                    segs.push(Seg { len: Some(&e - &prev), slope: s_last });
                }
            }
        }
        PLFun::new(q0, v0, segs)
    }

    pub fn add(&self, other: &PLFun) -> PLFun {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &PLFun) -> PLFun {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add_const(&self, c: &Rat) -> PLFun {
        let mut f = self.clone();
        f.v0 += c;
        f
    }

    /// Domain translation: `g(q) = f(q - c)`.
    pub fn shift_q(&self, c: &Rat) -> PLFun {
        let mut f = self.clone();
        f.q0 += c;
        f
    }

    /// `g(q) = f(q·s)/s` for `s > 0`; integer slopes are preserved.
    pub fn rescale(&self, s: &Rat) -> PLFun {
        assert!(s.is_positive());
        PLFun::new(
            &self.q0 / s,
            &self.v0 / s,
            self.segments
                .iter()
                .map(|seg| Seg { len: seg.len.as_ref().map(|l| l / s), slope: seg.slope })
                .collect(),
        )
    }

    /// Restrict to `[a, b]` (or `[a, ∞)` when `b = None`).
    pub fn restrict(&self, a: &Rat, b: Option<&Rat>) -> Result<PLFun, PlError> {
        if !self.in_domain(a) || b.map_or(false, |b| !self.in_domain(b) || b < a) {
            return Err(PlError::DomainMismatch);
        }
        if b.is_none() && !self.is_unbounded_domain() {
            return Err(PlError::DomainMismatch);
        }
        let v0 = self.eval(a)?;
        let mut segs = Vec::new();
        let mut x = self.q0.clone();
        for s in &self.segments {
            let end = s.len.as_ref().map(|l| &x + l);
            // Intersect [x, end) with [a, b].
            let lo = x.clone().max(a.clone());
            let hi = match (&end, b) {
                (None, None) => None,
                (None, Some(b)) => Some(b.clone()),
                (Some(e), None) => Some(e.clone()),
                (Some(e), Some(b)) => Some(e.clone().min(b.clone())),
            };
            match hi {
                None => segs.push(Seg { len: None, slope: s.slope }),
                Some(h) => {
                    if h > lo {
                        segs.push(Seg { len: Some(&h - &lo), slope: s.slope });
                    }
                }
            }
            match end {
                None => break,
                Some(e) => {
                    if let Some(b) = b {
                        if &e >= b {
                            break;
                        }
                    }
                    x = e;
                }
            }
        }
        Ok(PLFun::new(a.clone(), v0, segs))
    }

    /// Append `other`, which must start where `self` ends with the same value.
    pub fn concat(&self, other: &PLFun) -> Result<PLFun, PlError> {
        let end = self.domain_end().ok_or(PlError::DomainMismatch)?;
        if other.q0 != end {
            return Err(PlError::Discontinuous(rat::fmt_rat(&other.q0)));
        }
        if other.v0 != self.eval(&end)? {
            return Err(PlError::Discontinuous(rat::fmt_rat(&end)));
        }
        let mut segs = self.segments.clone();
        segs.extend(other.segments.iter().cloned());
        Ok(PLFun::new(self.q0.clone(), self.v0.clone(), segs))
    }

    /// Replace a finite final segment by an unbounded one of the same slope.
    pub fn extend_to_infinity(&self) -> PLFun {
        let mut segs = self.segments.clone();
        if let Some(last) = segs.last_mut() {
            last.len = None;
        }
        PLFun::new(self.q0.clone(), self.v0.clone(), segs)
    }

    /// `q ↦ max over [q0, q] of f`; slopes land in {0, max(slope,0)}.
    pub fn running_max(&self) -> PLFun {
        let mut best = self.v0.clone();
        let mut v = self.v0.clone();
        let mut segs = Vec::new();
        let mut x = self.q0.clone();
        for s in &self.segments {
            match &s.len {
                None => {
                    if s.slope <= 0 {
                        segs.push(Seg { len: None, slope: 0 });
                    } else {
                        // Flat until f re-attains best, then climbs.
                        if v < best {
                            let wait = (&best - &v) / rat::rat_i64(s.slope);
                            segs.push(Seg { len: Some(wait), slope: 0 });
                        }
                        segs.push(Seg { len: None, slope: s.slope });
                    }
                    return PLFun::new(self.q0.clone(), self.v0.clone(), segs);
                }
                Some(l) => {
                    let v_end = &v + rat::rat_i64(s.slope) * l;
                    if s.slope <= 0 || v_end <= best {
                        segs.push(Seg { len: Some(l.clone()), slope: 0 });
                    } else if v >= best {
                        segs.push(Seg { len: Some(l.clone()), slope: s.slope });
                        best = v_end.clone();
                    } else {
                        let wait = (&best - &v) / rat::rat_i64(s.slope);
                        segs.push(Seg { len: Some(wait.clone()), slope: 0 });
                        segs.push(Seg { len: Some(l - &wait), slope: s.slope });
                        best = v_end.clone();
                    }
                    v = v_end;
                    x += l;
                }
            }
        }
        let _ = x;
        PLFun::new(self.q0.clone(), self.v0.clone(), segs)
    }
}

fn op_val(op: &impl Fn(i64, i64) -> i64, f: &PLFun, g: &PLFun, q: &Rat) -> Rat {
    // Value of the combined function at q when op is linear on values
    // (add/sub): apply to the evaluated values.
    let a = f.eval(q).expect("common domain");
    let b = g.eval(q).expect("common domain");
    // Reconstruct from slopes: op on values for +/- is determined by
    // op(1,0)*a + op(0,1)*b.
    rat::rat_i64(op(1, 0)) * a + rat::rat_i64(op(0, 1)) * b
}

/// Result of a supremum-distance query.
#[derive(Debug, Clone, PartialEq)]
pub enum SupDist {
    /// Finite supremum and an abscissa attaining it.
    Finite { value: Rat, at: Rat },
    /// Unbounded difference on an infinite tail (final slopes differ).
    Infinite,
}

impl SupDist {
    pub fn finite(&self) -> Option<(&Rat, &Rat)> {
        match self {
            SupDist::Finite { value, at } => Some((value, at)),
            SupDist::Infinite => None,
        }
    }
}

/// Exact `sup |f-g|` over `[a, b]` or the tail `[a, ∞)`.
///
/// The difference is PL, so the supremum is attained at a breakpoint of
/// either function or at a window endpoint.
pub fn sup_dist(f: &PLFun, g: &PLFun, a: &Rat, b: Option<&Rat>) -> Result<SupDist, PlError> {
    if !f.in_domain(a) || !g.in_domain(a) {
        return Err(PlError::DomainMismatch);
    }
    if let Some(b) = b {
        if !f.in_domain(b) || !g.in_domain(b) || b < a {
            return Err(PlError::DomainMismatch);
        }
    } else {
        return sup_dist_tail(f, g, a);
    }
    let mut cands: Vec<Rat> = vec![a.clone()];
    for q in f.breakpoints().into_iter().chain(g.breakpoints()) {
        if &q > a && b.map_or(true, |b| &q < b) {
            cands.push(q);
        }
    }
    if let Some(b) = b {
        cands.push(b.clone());
    }
    let mut best_v = Rat::zero();
    let mut best_q = a.clone();
    let mut first = true;
    for q in cands {
        let d = (f.eval(&q)? - g.eval(&q)?).abs();
        if first || d > best_v {
            best_v = d;
            best_q = q;
            first = false;
        }
    }
    Ok(SupDist::Finite { value: best_v, at: best_q })
}

/// Tail-aware variant: over `[a, ∞)` with differing final slopes returns
/// `SupDist::Infinite` instead of an error.
pub fn sup_dist_tail(f: &PLFun, g: &PLFun, a: &Rat) -> Result<SupDist, PlError> {
    if !f.in_domain(a) || !g.in_domain(a) {
        return Err(PlError::DomainMismatch);
    }
    if !f.is_unbounded_domain() || !g.is_unbounded_domain() {
        return Err(PlError::DomainMismatch);
    }
    if f.final_slope() != g.final_slope() {
        return Ok(SupDist::Infinite);
    }
    let mut cands: Vec<Rat> = vec![a.clone()];
    for q in f.breakpoints().into_iter().chain(g.breakpoints()) {
        if &q > a {
            cands.push(q);
        }
    }
    let mut best_v = Rat::zero();
    let mut best_q = a.clone();
    let mut first = true;
    for q in cands {
        let d = (f.eval(&q)? - g.eval(&q)?).abs();
        if first || d > best_v {
            best_v = d;
            best_q = q;
            first = false;
        }
    }
    Ok(SupDist::Finite { value: best_v, at: best_q })
}

/// Pointwise sorting of an n-tuple of PL functions: output `j` is the
/// j-th smallest value at every q.  Crossing abscissae become breakpoints.
pub fn phi_merge(fs: &[PLFun]) -> Vec<PLFun> {
    assert!(!fs.is_empty());
    let q0 = fs.iter().map(|f| f.q0.clone()).max().unwrap();
    let end = fs.iter().filter_map(|f| f.domain_end()).min();

    // Elementary cuts: all breakpoints, then pairwise crossings inside
    // each elementary interval of linearity.
    let mut cuts: Vec<Rat> = vec![q0.clone()];
    for f in fs {
        for q in f.breakpoints() {
            if q > q0 && end.as_ref().map_or(true, |e| &q < e) {
                cuts.push(q);
            }
        }
    }
    cuts.sort();
    cuts.dedup();

    let mut all_cuts = cuts.clone();
    let crossings_in = |a: &Rat, b: Option<&Rat>, out: &mut Vec<Rat>| {
        for (i, f) in fs.iter().enumerate() {
            for g in &fs[i + 1..] {
                let sf = f.slope_right(a).unwrap();
                let sg = g.slope_right(a).unwrap();
                if sf == sg {
                    continue;
                }
                let vf = f.eval(a).unwrap();
                let vg = g.eval(a).unwrap();
                // vf + sf (t-a) = vg + sg (t-a)
                let t = a + (vg - vf) / rat::rat_i64(sf - sg);
                if &t > a && b.map_or(true, |b| &t < b) {
                    out.push(t);
                }
            }
        }
    };
    let mut extra = Vec::new();
    for w in cuts.windows(2) {
        crossings_in(&w[0], Some(&w[1]), &mut extra);
    }
    match (&end, cuts.last()) {
        (None, Some(last)) => crossings_in(last, None, &mut extra),
        (Some(e), Some(last)) if last < e => crossings_in(last, Some(e), &mut extra),
        _ => {}
    }
    all_cuts.extend(extra);
    if let Some(e) = &end {
        all_cuts.push(e.clone());
    }
    all_cuts.sort();
    all_cuts.dedup();

    let sorted_at = |q: &Rat| -> Vec<Rat> {
        let mut vs: Vec<Rat> = fs.iter().map(|f| f.eval(q).unwrap()).collect();
        vs.sort();
        vs
    };

    let n = fs.len();
    let v_start = sorted_at(&q0);
    let mut per_fun: Vec<Vec<Seg>> = vec![Vec::new(); n];
    let mut prev_q = q0.clone();
    let mut prev_v = v_start.clone();
    for q in all_cuts.iter().skip(1) {
        let v = sorted_at(q);
        let len = q - &prev_q;
        for j in 0..n {
            let slope_r = (&v[j] - &prev_v[j]) / &len;
            let slope = num_traits::ToPrimitive::to_i64(&slope_r.to_integer())
                .expect("integer slope");
            debug_assert!(slope_r == rat::rat_i64(slope));
            per_fun[j].push(Seg { len: Some(len.clone()), slope });
        }
        prev_q = q.clone();
        prev_v = v;
    }
    if end.is_none() {
        // Beyond the last cut the order is frozen: rank functions by
        // (value, slope) slightly past prev_q.
        let mut keyed: Vec<(Rat, i64)> = fs
            .iter()
            .map(|f| (f.eval(&prev_q).unwrap(), f.slope_right(&prev_q).unwrap()))
            .collect();
        keyed.sort_by(|a, b| match a.0.cmp(&b.0) {
            Ordering::Equal => a.1.cmp(&b.1),
            o => o,
        });
        for (j, (_, slope)) in keyed.into_iter().enumerate() {
            per_fun[j].push(Seg { len: None, slope });
        }
    }
    per_fun
        .into_iter()
        .zip(v_start)
        .map(|(segs, v0)| PLFun::new(q0.clone(), v0, segs))
        .collect()
}

/// Fit a slopes-{0,1} PL function through `(q, v)` tubes of radius `tol`.
///
/// Greedy left-to-right: within each sample cell the single-breakpoint
/// fit keeping the incoming slope first is used, so data sampled exactly
/// from a slopes-{0,1} function (with at most one generator breakpoint
/// per cell) is reconstructed verbatim.
pub fn snap_to_pl(samples: &[(Rat, Rat)], tol: &Rat) -> Result<PLFun, PlError> {
    assert!(!samples.is_empty());
    for w in samples.windows(2) {
        if w[0].0 >= w[1].0 {
            return Err(PlError::SamplesNotIncreasing);
        }
    }
    let q0 = samples[0].0.clone();
    let v0 = samples[0].1.clone();
    let mut segs: Vec<Seg> = Vec::new();
    let mut cur_q = q0.clone();
    let mut cur_v = v0.clone();
    let mut cur_slope: i64 = 0;
    for (index, (q, v)) in samples.iter().enumerate().skip(1) {
        let len = q - &cur_q;
        let lo = cur_v.clone();
        let hi = &cur_v + &len;
        // Clamp the target into the reachable band.
        let target = v.clone().max(lo.clone()).min(hi.clone());
        if (&target - v).abs() > *tol {
            return Err(PlError::SnapInfeasible { index });
        }
        let rise = &target - &cur_v;
        if rise.is_zero() {
            segs.push(Seg { len: Some(len), slope: 0 });
            cur_slope = 0;
        } else if rise == len {
            segs.push(Seg { len: Some(len), slope: 1 });
            cur_slope = 1;
        } else if cur_slope == 1 {
            segs.push(Seg { len: Some(rise.clone()), slope: 1 });
            segs.push(Seg { len: Some(&len - &rise), slope: 0 });
            cur_slope = 0;
        } else {
            segs.push(Seg { len: Some(&len - &rise), slope: 0 });
            segs.push(Seg { len: Some(rise.clone()), slope: 1 });
            cur_slope = 1;
        }
        cur_q = q.clone();
        cur_v = target;
    }
    PLFun::new(q0, v0, segs).with_slopes(vec![0, 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat_frac, rat_i64};

    fn seg(len: i64, slope: i64) -> Seg {
        Seg { len: Some(rat_i64(len)), slope }
    }

    fn inf(slope: i64) -> Seg {
        Seg { len: None, slope }
    }

    #[test]
    fn eval_identity_constant_and_kink() {
        let id = PLFun::identity(rat_i64(0));
        assert_eq!(id.eval(&rat_frac(7, 2)).unwrap(), rat_frac(7, 2));
        let c = PLFun::constant(rat_i64(0), rat_i64(3));
        assert_eq!(c.eval(&rat_i64(100)).unwrap(), rat_i64(3));
        let f = PLFun::new(rat_i64(0), rat_i64(0), vec![seg(2, 0), inf(1)]);
        assert_eq!(f.eval(&rat_i64(5)).unwrap(), rat_i64(3));
        assert!(f.eval(&rat_i64(-1)).is_err());
    }

    #[test]
    fn canonical_form_merges_and_drops() {
        let f = PLFun::new(
            rat_i64(0),
            rat_i64(0),
            vec![seg(1, 1), seg(2, 1), Seg { len: Some(Rat::zero()), slope: 0 }, seg(1, 0)],
        );
        assert_eq!(f.segments, vec![seg(3, 1), seg(1, 0)]);
    }

    #[test]
    fn sup_dist_basics() {
        let id = PLFun::identity(rat_i64(0));
        let z = PLFun::constant(rat_i64(0), rat_i64(0));
        match sup_dist(&id, &id, &rat_i64(0), Some(&rat_i64(9))).unwrap() {
            SupDist::Finite { value, .. } => assert_eq!(value, rat_i64(0)),
            _ => panic!(),
        }
        match sup_dist(&id, &z, &rat_i64(0), Some(&rat_i64(4))).unwrap() {
            SupDist::Finite { value, at } => {
                assert_eq!(value, rat_i64(4));
                assert_eq!(at, rat_i64(4));
            }
            _ => panic!(),
        }
        assert_eq!(sup_dist_tail(&id, &z, &rat_i64(0)).unwrap(), SupDist::Infinite);
        match sup_dist_tail(&id, &id.add_const(&rat_i64(2)), &rat_i64(0)).unwrap() {
            SupDist::Finite { value, .. } => assert_eq!(value, rat_i64(2)),
            _ => panic!(),
        }
    }

    #[test]
    fn phi_merge_sorted_inputs_unchanged() {
        let a = PLFun::constant(rat_i64(0), rat_i64(1));
        let b = PLFun::constant(rat_i64(0), rat_i64(5));
        let out = phi_merge(&[a.clone(), b.clone()]);
        assert_eq!(out, vec![a, b]);
    }

    #[test]
    fn phi_merge_crossing_lines() {
        // Constant 1 and slope-1 from 0 cross at q = 1.
        let c = PLFun::constant(rat_i64(0), rat_i64(1));
        let l = PLFun::identity(rat_i64(0));
        let out = phi_merge(&[c, l]);
        // min: slope 1 up to 1, then constant 1; max: constant then slope 1.
        assert_eq!(out[0].eval(&rat_frac(1, 2)).unwrap(), rat_frac(1, 2));
        assert_eq!(out[0].eval(&rat_i64(7)).unwrap(), rat_i64(1));
        assert_eq!(out[1].eval(&rat_frac(1, 2)).unwrap(), rat_i64(1));
        assert_eq!(out[1].eval(&rat_i64(7)).unwrap(), rat_i64(7));
        assert_eq!(out[0].breakpoints(), vec![rat_i64(0), rat_i64(1)]);
    }

    #[test]
    fn phi_merge_preserves_multiset() {
        let fs = vec![
            PLFun::new(rat_i64(0), rat_i64(2), vec![seg(3, 1), inf(0)]),
            PLFun::new(rat_i64(0), rat_i64(4), vec![seg(1, 0), inf(1)]),
            PLFun::identity(rat_i64(0)),
        ];
        let out = phi_merge(&fs);
        for k in 0..60 {
            let q = rat_frac(k, 7);
            let mut a: Vec<Rat> = fs.iter().map(|f| f.eval(&q).unwrap()).collect();
            let b: Vec<Rat> = out.iter().map(|f| f.eval(&q).unwrap()).collect();
            a.sort();
            assert_eq!(a, b, "at q = {q}");
            for w in b.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn snap_recovers_generator() {
        let gen = PLFun::new(rat_i64(0), rat_i64(1), vec![seg(2, 0), seg(3, 1), seg(1, 0), seg(4, 1)]);
        let samples: Vec<(Rat, Rat)> = (0..=20)
            .map(|k| {
                let q = rat_frac(k, 2);
                (q.clone(), gen.eval(&q).unwrap())
            })
            .collect();
        let fit = snap_to_pl(&samples, &rat_frac(1, 100)).unwrap();
        assert_eq!(fit, gen);
    }

    #[test]
    fn snap_identity_and_noise() {
        let id = PLFun::identity(rat_i64(0));
        let id10 = id.restrict(&rat_i64(0), Some(&rat_i64(10))).unwrap();
        let samples: Vec<(Rat, Rat)> =
            (0..=10).map(|k| (rat_i64(k), rat_i64(k))).collect();
        assert_eq!(snap_to_pl(&samples, &rat_frac(1, 10)).unwrap(), id10);

        // Noise below tol/2 keeps the fit within 2 tol of the generator.
        let tol = rat_frac(1, 8);
        let noisy: Vec<(Rat, Rat)> = (0..=10)
            .map(|k| {
                let eps = rat_frac(if k % 2 == 0 { 1 } else { -1 }, 20);
                (rat_i64(k), rat_i64(k) + eps)
            })
            .collect();
        let fit = snap_to_pl(&noisy, &tol).unwrap();
        match sup_dist(&fit, &id.restrict(&rat_i64(0), Some(&rat_i64(10))).unwrap(), &rat_i64(0), Some(&rat_i64(10))).unwrap() {
            SupDist::Finite { value, .. } => assert!(value <= rat_i64(2) * tol),
            _ => panic!(),
        }
    }

    #[test]
    fn snap_infeasible_reported() {
        let samples = vec![
            (rat_i64(0), rat_i64(0)),
            (rat_i64(1), rat_i64(5)), // cannot rise 5 over length 1 with slope <= 1
        ];
        assert_eq!(
            snap_to_pl(&samples, &rat_frac(1, 10)),
            Err(PlError::SnapInfeasible { index: 1 })
        );
    }

    #[test]
    fn add_sub_and_rescale() {
        let f = PLFun::new(rat_i64(0), rat_i64(1), vec![seg(2, 1), inf(0)]);
        let g = PLFun::new(rat_i64(0), rat_i64(2), vec![seg(1, 0), inf(1)]);
        let s = f.add(&g);
        for k in 0..20 {
            let q = rat_frac(k, 3);
            assert_eq!(s.eval(&q).unwrap(), f.eval(&q).unwrap() + g.eval(&q).unwrap());
        }
        let d = s.sub(&g);
        for k in 0..20 {
            let q = rat_frac(k, 3);
            assert_eq!(d.eval(&q).unwrap(), f.eval(&q).unwrap());
        }
        let two = rat_i64(2);
        let r = f.rescale(&two);
        for k in 0..10 {
            let q = rat_frac(k, 3);
            assert_eq!(r.eval(&q).unwrap(), f.eval(&(&q * &two)).unwrap() / &two);
        }
    }

    #[test]
    fn running_max_flattens_dips() {
        let f = PLFun::new(rat_i64(0), rat_i64(2), vec![seg(2, -1), seg(4, 1), inf(0)]);
        let m = f.running_max();
        assert_eq!(m.eval(&rat_i64(1)).unwrap(), rat_i64(2));
        assert_eq!(m.eval(&rat_i64(4)).unwrap(), rat_i64(2));
        assert_eq!(m.eval(&rat_i64(6)).unwrap(), rat_i64(4));
        assert_eq!(m.eval(&rat_i64(100)).unwrap(), rat_i64(4));
    }

    #[test]
    fn json_round_trip() {
        let f = PLFun::new(rat_i64(20), rat_frac(1, 2), vec![seg(2, 0), inf(1)]);
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"q0\":\"20\""));
        assert!(s.contains("\"inf\""));
        let back: PLFun = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
    }
}
