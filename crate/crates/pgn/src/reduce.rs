//! Reduction of (n,γ)-systems.
//!
//! Constancy of the transformed sum function M̃_j is pushed down level by
//! level: wherever M̃_j is constant on [a,b], the level below is replaced
//! by max{M_{j−1}(a), M_{j−1}(b)+q−b}.  The output is an (n,2nγ)-system
//! that is (n,2nγ)-reduced and stays within nγ of the input.

use crate::plfun::{sup_dist_tail, PLFun, Seg, SupDist};
use crate::rat::{self, Rat};
use crate::systems::{validate_ngamma, NGammaSystem};
use num::Zero;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReduceError {
    #[error("input failed (n,γ)-system validation: {0}")]
    InvalidInput(String),
    #[error("input must be defined on an unbounded half-line")]
    BoundedDomain,
}

/// A maximal constancy interval; `end == None` marks a final unbounded one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstInterval {
    #[serde(with = "rat::serde_str")]
    pub start: Rat,
    #[serde(
        serialize_with = "serialize_opt_rat",
    )]
    pub end: Option<Rat>,
}

fn serialize_opt_rat<S: serde::Serializer>(x: &Option<Rat>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        None => s.serialize_str("inf"),
        Some(r) => s.serialize_str(&rat::fmt_rat(r)),
    }
}

/// Maximal intervals with nonempty interior on which `f` is constant.
pub fn constancy_intervals(f: &PLFun) -> Vec<ConstInterval> {
    let mut out = Vec::new();
    let mut q = f.q0.clone();
    for s in &f.segments {
        match &s.len {
            None => {
                if s.slope == 0 {
                    out.push(ConstInterval { start: q.clone(), end: None });
                }
                break;
            }
            Some(l) => {
                let end = &q + l;
                if s.slope == 0 {
                    out.push(ConstInterval { start: q.clone(), end: Some(end.clone()) });
                }
                q = end;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionTrace {
    pub input: NGammaSystem,
    pub tilde_m: Vec<PLFun>,
    /// Constancy-interval sets indexed by the level whose transform they
    /// drove: entry j (0-based) lists the intervals of tilde_M_{j+1} used
    /// to rebuild level j.
    pub interval_sets: Vec<Vec<ConstInterval>>,
}

/// Apply the constancy transform of one level: rebuild `m` (the original
/// function one level below) on each interval of `e`.
fn transform_level(m: &PLFun, e: &[ConstInterval]) -> PLFun {
    let mut acc: Option<PLFun> = None;
    let mut cursor = m.q0.clone();
    let push = |piece: PLFun, acc: &mut Option<PLFun>| {
        *acc = Some(match acc.take() {
            None => piece,
            Some(f) => f.concat(&piece).expect("transform continuity"),
        });
    };
    for iv in e {
        if iv.start > cursor {
            push(m.restrict(&cursor, Some(&iv.start)).unwrap(), &mut acc);
        }
        let a = iv.start.clone().max(cursor.clone());
        match &iv.end {
            None => {
                // Constant forever at M(a).
                let va = m.eval(&a).unwrap();
                push(PLFun::constant(a, va), &mut acc);
                return acc.unwrap();
            }
            Some(b) => {
                let va = m.eval(&a).unwrap();
                let vb = m.eval(b).unwrap();
                // max{M(a), M(b)+q-b}: flat then slope 1, kink at b-(vb-va).
                let kink = b - (&vb - &va);
                debug_assert!(kink >= a && &kink <= b);
                let mut segs = Vec::new();
                if kink > a {
                    segs.push(Seg { len: Some(&kink - &a), slope: 0 });
                }
                if &kink < b {
                    segs.push(Seg { len: Some(b - &kink), slope: 1 });
                }
                if segs.is_empty() {
                    // a == b cannot happen (nonempty interior), but stay safe.
                    continue;
                }
                push(PLFun::new(a, va, segs), &mut acc);
                cursor = b.clone();
            }
        }
    }
    // Tail beyond the last finite interval.
    if m.is_unbounded_domain() {
        push(m.restrict(&cursor, None).unwrap(), &mut acc);
    } else if let Some(end) = m.domain_end() {
        if end > cursor {
            push(m.restrict(&cursor, Some(&end)).unwrap(), &mut acc);
        }
    }
    acc.unwrap()
}

/// Reduce an (n,γ)-system to an (n,2nγ)-reduced system within nγ.
pub fn reduce(sys: &NGammaSystem) -> Result<(NGammaSystem, ReductionTrace), ReduceError> {
    let rep = validate_ngamma(sys);
    if !rep.ok() {
        return Err(ReduceError::InvalidInput(format!("{:?}", rep.violations)));
    }
    if sys.m.iter().any(|f| !f.is_unbounded_domain()) {
        return Err(ReduceError::BoundedDomain);
    }
    let n = sys.n;
    let mut tilde = sys.m.clone();
    let mut interval_sets: Vec<Vec<ConstInterval>> = vec![Vec::new(); n];
    // Levels n and n-1 are kept; below that, each level is rebuilt from
    // the constancy intervals of the (already transformed) level above.
    for t in (0..n.saturating_sub(2)).rev() {
        let e = constancy_intervals(&tilde[t + 1]);
        tilde[t] = transform_level(&sys.m[t], &e);
        interval_sets[t] = e;
    }
    let gamma_out = rat::rat_i64(2 * n as i64) * &sys.gamma;
    let out = NGammaSystem { n, gamma: gamma_out, m: tilde.clone() };
    let trace = ReductionTrace { input: sys.clone(), tilde_m: tilde, interval_sets };
    Ok((out, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedViolation {
    pub level: usize,
    #[serde(with = "rat::serde_str")]
    pub interval_start: Rat,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedReport {
    pub violations: Vec<ReducedViolation>,
}

impl ReducedReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Is the system (n,γ)-reduced?  For every j < n and maximal constancy
/// interval [a,b] of M_j with b ≥ a+nγ, the components P_1…P_j must be
/// constant on [a, b−nγ].
pub fn is_reduced(sys: &NGammaSystem, gamma: &Rat) -> ReducedReport {
    let n = sys.n;
    let ngam = rat::rat_i64(n as i64) * gamma;
    let ps = sys.p_components();
    let mut violations = Vec::new();
    for j in 0..n - 1 {
        for iv in constancy_intervals(&sys.m[j]) {
            let a = &iv.start;
            let cut = match &iv.end {
                None => None,
                Some(b) => {
                    if b < &(a + &ngam) {
                        continue; // vacuous clause
                    }
                    Some(b - &ngam)
                }
            };
            for (pi, p) in ps.iter().take(j + 1).enumerate() {
                let window = match &cut {
                    None => p.restrict(a, None),
                    Some(c) => p.restrict(a, Some(c)),
                };
                let window = window.expect("domain");
                if window.segments.iter().any(|s| s.slope != 0) {
                    violations.push(ReducedViolation {
                        level: j + 1,
                        interval_start: a.clone(),
                        detail: format!("P_{} moves inside the trimmed interval", pi + 1),
                    });
                }
            }
        }
    }
    ReducedReport { violations }
}

/// Componentwise sup distance between two systems of equal n over the
/// common domain tail; None when some pair diverges.
pub fn system_sup_dist(a: &NGammaSystem, b: &NGammaSystem) -> Option<Rat> {
    let pa = a.p_components();
    let pb = b.p_components();
    let start = a.q0().clone().max(b.q0().clone());
    let mut best = Rat::zero();
    for (f, g) in pa.iter().zip(&pb) {
        match sup_dist_tail(f, g, &start).ok()? {
            SupDist::Infinite => return None,
            SupDist::Finite { value, .. } => {
                if value > best {
                    best = value;
                }
            }
        }
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat_frac, rat_i64};
    use crate::systems::{
        minimal_gamma, perturb_rigid, random_rigid, rigid_from_canvas, validate_ngamma,
    };

    fn seg(len: i64, slope: i64) -> Seg {
        Seg { len: Some(rat_i64(len)), slope }
    }

    fn inf(slope: i64) -> Seg {
        Seg { len: None, slope }
    }

    #[test]
    fn constancy_interval_shapes() {
        let id = PLFun::identity(rat_i64(0));
        assert!(constancy_intervals(&id).is_empty());
        let c = PLFun::constant(rat_i64(0), rat_i64(3));
        assert_eq!(
            constancy_intervals(&c),
            vec![ConstInterval { start: rat_i64(0), end: None }]
        );
        let f = PLFun::new(rat_i64(0), rat_i64(0), vec![seg(2, 1), seg(4, 0), inf(1)]);
        assert_eq!(
            constancy_intervals(&f),
            vec![ConstInterval { start: rat_i64(2), end: Some(rat_i64(6)) }]
        );
    }

    #[test]
    fn worked_three_level_transform() {
        // M_2 constant on [2,6]; M_1 flat/rise/flat moves inside it.
        let m2 = PLFun::new(rat_i64(0), rat_i64(0), vec![seg(2, 1), seg(4, 0), inf(1)]);
        let m1 = PLFun::new(rat_i64(0), rat_i64(0), vec![seg(3, 0), seg(1, 1), inf(0)]);
        let e = constancy_intervals(&m2);
        let t1 = transform_level(&m1, &e);
        let expect = PLFun::new(rat_i64(0), rat_i64(0), vec![seg(5, 0), seg(1, 1), inf(0)]);
        assert_eq!(t1, expect);
        // Shift is 1 <= n*gamma = 3 for gamma = 1.
        match sup_dist_tail(&t1, &m1, &rat_i64(0)).unwrap() {
            SupDist::Finite { value, at } => {
                assert_eq!(value, rat_i64(1));
                assert!(at >= rat_i64(3) && at <= rat_i64(6));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn reduce_identity_on_rigid_systems() {
        for seed in 0..20u64 {
            for n in 2..=5 {
                let c = random_rigid(n, &rat_i64(1), 12, seed);
                let sys = rigid_from_canvas(&c).unwrap().to_ngamma();
                let (out, _) = reduce(&sys).unwrap();
                assert_eq!(out.m, sys.m, "seed {seed} n {n}");
                assert!(is_reduced(&sys, &Rat::zero()).ok());
            }
        }
    }

    #[test]
    fn reduce_perturbed_systems() {
        for seed in 0..30u64 {
            let c = random_rigid(3, &rat_i64(1), 12, seed);
            let r = rigid_from_canvas(&c).unwrap();
            let sys = perturb_rigid(&r, &rat_frac(1, 8), seed);
            assert!(validate_ngamma(&sys).ok(), "seed {seed}");
            let (out, _) = reduce(&sys).unwrap();
            assert!(validate_ngamma(&out).ok(), "seed {seed}: output validation");
            assert!(is_reduced(&out, &out.gamma).ok(), "seed {seed}: reducedness");
            let d = system_sup_dist(&out, &sys).unwrap();
            assert!(
                d <= rat_i64(3) * &sys.gamma,
                "seed {seed}: distance {d} > nγ"
            );
        }
    }

    #[test]
    fn sandwich_bound_at_breakpoints() {
        for seed in [3u64, 17, 99] {
            let c = random_rigid(4, &rat_i64(1), 10, seed);
            let r = rigid_from_canvas(&c).unwrap();
            let sys = perturb_rigid(&r, &rat_frac(1, 8), seed + 1000);
            let (_, trace) = reduce(&sys).unwrap();
            let n = sys.n as i64;
            for (j0, tm) in trace.tilde_m.iter().enumerate() {
                let slack = rat_i64((n - j0 as i64 - 2).max(0)) * &sys.gamma;
                for q in sys.m[j0].breakpoints().iter().chain(tm.breakpoints().iter()) {
                    let a = tm.eval(q).unwrap();
                    let b = sys.m[j0].eval(q).unwrap();
                    assert!(a <= b, "tilde must sit below");
                    assert!(b <= &a + &slack, "sandwich violated at {q}");
                }
            }
        }
    }

    #[test]
    fn idempotent_on_reduced_inputs() {
        for seed in 0..10u64 {
            let c = random_rigid(3, &rat_i64(1), 10, seed);
            let r = rigid_from_canvas(&c).unwrap();
            let sys = perturb_rigid(&r, &rat_frac(1, 8), seed);
            let (out, _) = reduce(&sys).unwrap();
            // Re-reduce with the same gamma as the (already reduced) output.
            let again = NGammaSystem { n: out.n, gamma: out.gamma.clone(), m: out.m.clone() };
            let (out2, _) = reduce(&again).unwrap();
            assert_eq!(out2.m, out.m, "seed {seed}");
        }
    }

    #[test]
    fn commutes_with_translation() {
        let c = random_rigid(3, &rat_i64(1), 8, 5);
        let r = rigid_from_canvas(&c).unwrap();
        let sys = perturb_rigid(&r, &rat_frac(1, 8), 5);
        let (out, _) = reduce(&sys).unwrap();
        let shift = rat_frac(7, 3);
        let shifted = NGammaSystem {
            n: sys.n,
            gamma: sys.gamma.clone(),
            m: sys.m.iter().map(|f| f.shift_q(&shift)).collect(),
        };
        // A translated M_n is no longer the identity; compare via direct
        // transform instead of the validating entry point.
        let mut tilde = shifted.m.clone();
        for t in (0..shifted.n - 2).rev() {
            let e = constancy_intervals(&tilde[t + 1]);
            tilde[t] = transform_level(&shifted.m[t], &e);
        }
        for (a, b) in tilde.iter().zip(&out.m) {
            assert_eq!(a, &b.shift_q(&shift));
        }
    }

    #[test]
    fn minimal_gamma_zero_for_rigid() {
        let c = random_rigid(4, &rat_i64(1), 10, 11);
        let sys = rigid_from_canvas(&c).unwrap().to_ngamma();
        assert_eq!(minimal_gamma(&sys), Some(Rat::zero()));
    }
}
