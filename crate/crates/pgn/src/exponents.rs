//! Diophantine exponent quadruples: the θ bijection between
//! (τ, τ̂, λ̂, λ) and the ratio quadruple
//! (liminf P₁/q, limsup P₁/q, liminf Pₙ/q, limsup Pₙ/q),
//! plus finite-horizon extrema of the ratios P_j(q)/q.

use crate::plfun::PLFun;
use crate::rat::{self, Rat};
use crate::systems::RigidSystem;
use num::{One, Zero};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExponentError {
    #[error("negative component in exponent quadruple")]
    Negative,
    #[error("ratio component outside [0,1]")]
    RatioRange,
    #[error("window is empty or ends before it starts")]
    EmptyWindow,
    #[error("evaluation failed: {0}")]
    Eval(#[from] crate::plfun::PlError),
}

/// An extended real: a rational number or +∞.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtReal {
    Finite(Rat),
    Infinity,
}

impl Serialize for ExtReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string_exact())
    }
}

impl ExtReal {
    pub fn finite_i64(x: i64) -> ExtReal {
        ExtReal::Finite(rat::rat_i64(x))
    }

    pub fn is_negative(&self) -> bool {
        matches!(self, ExtReal::Finite(x) if x < &Rat::zero())
    }

    pub fn as_finite(&self) -> Option<&Rat> {
        match self {
            ExtReal::Finite(x) => Some(x),
            ExtReal::Infinity => None,
        }
    }

    pub fn to_string_exact(&self) -> String {
        match self {
            ExtReal::Finite(x) => rat::fmt_rat(x),
            ExtReal::Infinity => "inf".to_string(),
        }
    }
}

/// A role-tagged quadruple: either exponent-side (τ, τ̂, λ̂, λ) or
/// ratio-side (liminf P₁/q, limsup P₁/q, liminf Pₙ/q, limsup Pₙ/q).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Quadruple(pub [ExtReal; 4]);

impl Quadruple {
    pub fn finite(a: Rat, b: Rat, c: Rat, d: Rat) -> Quadruple {
        Quadruple([
            ExtReal::Finite(a),
            ExtReal::Finite(b),
            ExtReal::Finite(c),
            ExtReal::Finite(d),
        ])
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.0.iter().map(|x| x.to_string_exact()).collect()
    }
}

/// x ↦ 1/(x+1); +∞ ↦ 0.
fn recip_succ(x: &ExtReal) -> ExtReal {
    match x {
        ExtReal::Finite(v) => ExtReal::Finite((v + Rat::one()).recip()),
        ExtReal::Infinity => ExtReal::Finite(Rat::zero()),
    }
}

/// x ↦ x/(x+1); +∞ ↦ 1.
fn self_over_succ(x: &ExtReal) -> ExtReal {
    match x {
        ExtReal::Finite(v) => ExtReal::Finite(v / (v + Rat::one())),
        ExtReal::Infinity => ExtReal::Finite(Rat::one()),
    }
}

/// θ(τ, τ̂, λ̂, λ) = (1/(τ+1), 1/(τ̂+1), λ̂/(λ̂+1), λ/(λ+1)).
pub fn theta(q: &Quadruple) -> Result<Quadruple, ExponentError> {
    if q.0.iter().any(|x| x.is_negative()) {
        return Err(ExponentError::Negative);
    }
    Ok(Quadruple([
        recip_succ(&q.0[0]),
        recip_succ(&q.0[1]),
        self_over_succ(&q.0[2]),
        self_over_succ(&q.0[3]),
    ]))
}

/// Inverse of [`theta`]: first two components r ↦ 1/r − 1 (0 ↦ +∞),
/// last two r ↦ r/(1−r) (1 ↦ +∞).  Requires all components in [0,1].
pub fn theta_inv(r: &Quadruple) -> Result<Quadruple, ExponentError> {
    for x in &r.0 {
        match x {
            ExtReal::Finite(v) if v >= &Rat::zero() && v <= &Rat::one() => {}
            _ => return Err(ExponentError::RatioRange),
        }
    }
    let inv_first = |x: &ExtReal| match x.as_finite().unwrap() {
        v if v.is_zero() => ExtReal::Infinity,
        v => ExtReal::Finite(v.recip() - Rat::one()),
    };
    let inv_last = |x: &ExtReal| match x.as_finite().unwrap() {
        v if v == &Rat::one() => ExtReal::Infinity,
        v => ExtReal::Finite(v / (Rat::one() - v)),
    };
    Ok(Quadruple([
        inv_first(&r.0[0]),
        inv_first(&r.0[1]),
        inv_last(&r.0[2]),
        inv_last(&r.0[3]),
    ]))
}

/// One extremum of P(q)/q with the parameter where it is attained.
#[derive(Debug, Clone)]
pub struct RatioExtremum {
    pub value: Rat,
    pub at: Rat,
}

impl Serialize for RatioExtremum {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("RatioExtremum", 2)?;
        st.serialize_field("value", &rat::fmt_rat(&self.value))?;
        st.serialize_field("at", &rat::fmt_rat(&self.at))?;
        st.end()
    }
}

/// Exact extrema of P(q)/q over [a, b].  Since P is piecewise linear with
/// slopes in {0,1} and 0 ≤ P(q) ≤ q, the ratio is monotone on every
/// segment (decreasing on slope 0, nondecreasing on slope 1), so the
/// extrema are attained at breakpoints or the window endpoints.
pub fn ratio_extrema(
    p: &PLFun,
    a: &Rat,
    b: &Rat,
) -> Result<(RatioExtremum, RatioExtremum), ExponentError> {
    if b < a || a <= &Rat::zero() {
        return Err(ExponentError::EmptyWindow);
    }
    let mut points: Vec<Rat> = vec![a.clone(), b.clone()];
    for q in p.breakpoints() {
        if &q > a && &q < b {
            points.push(q);
        }
    }
    let mut min: Option<RatioExtremum> = None;
    let mut max: Option<RatioExtremum> = None;
    for q in points {
        let r = p.eval(&q)? / &q;
        if min.as_ref().is_none_or(|m| r < m.value) {
            min = Some(RatioExtremum { value: r.clone(), at: q.clone() });
        }
        if max.as_ref().is_none_or(|m| r > m.value) {
            max = Some(RatioExtremum { value: r, at: q });
        }
    }
    Ok((min.unwrap(), max.unwrap()))
}

/// Ratio quadruple of a rigid system over one window, with the values at
/// successive halvings of the window start as a convergence diagnostic.
#[derive(Debug, Clone)]
pub struct QuadrupleEstimate {
    /// (min P₁/q, max P₁/q, min Pₙ/q, max Pₙ/q) over [tail_start, horizon].
    pub ratios: Quadruple,
    /// Where each extremum is attained.
    pub attained: [Rat; 4],
    /// Values over windows [tail_start, horizon/2^k] for k = 2, 1, 0 (those
    /// that are nonempty, widest last): stable entries suggest convergence.
    pub convergence: Vec<Quadruple>,
    /// True when the three windows agree exactly.
    pub converged: bool,
}

impl QuadrupleEstimate {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "ratios": self.ratios,
            "attained": self.attained.iter().map(rat::fmt_rat).collect::<Vec<_>>(),
            "convergence": self.convergence,
            "converged": self.converged,
        })
    }
}

fn window_quadruple(
    p1: &PLFun,
    pn: &PLFun,
    a: &Rat,
    b: &Rat,
) -> Result<(Quadruple, [Rat; 4]), ExponentError> {
    let (lo1, hi1) = ratio_extrema(p1, a, b)?;
    let (lon, hin) = ratio_extrema(pn, a, b)?;
    Ok((
        Quadruple::finite(lo1.value, hi1.value, lon.value, hin.value),
        [lo1.at, hi1.at, lon.at, hin.at],
    ))
}

/// Finite-horizon surrogate for the tail quadruple
/// (liminf P₁/q, limsup P₁/q, liminf Pₙ/q, limsup Pₙ/q).
///
/// True tail limits are certified only for inputs known to be
/// self-similar (e.g. the geometric generator); for everything else this
/// is a window estimate, and `convergence` records how the values move as
/// the horizon doubles toward its final value.
pub fn quadruple_estimate(
    r: &RigidSystem,
    tail_start: &Rat,
    horizon: &Rat,
) -> Result<QuadrupleEstimate, ExponentError> {
    if horizon <= tail_start {
        return Err(ExponentError::EmptyWindow);
    }
    let clamp = |f: &PLFun| -> PLFun {
        if f.is_unbounded_domain() {
            f.clone()
        } else {
            f.extend_to_infinity()
        }
    };
    let p1 = clamp(&r.components[0]);
    let pn = clamp(&r.components[r.canvas.n - 1]);
    let mut convergence = Vec::new();
    for k in [4i64, 2, 1] {
        let b = tail_start + (horizon - tail_start) / rat::rat_i64(k);
        if &b > tail_start {
            convergence.push(window_quadruple(&p1, &pn, tail_start, &b)?.0);
        }
    }
    let (ratios, attained) = window_quadruple(&p1, &pn, tail_start, horizon)?;
    let converged = convergence.iter().all(|q| q == &ratios);
    Ok(QuadrupleEstimate { ratios, attained, convergence, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat_frac, rat_i64};
    use crate::systems::{generate_geometric_canvas, random_rigid, rigid_from_canvas};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quad_i64(a: i64, b: i64, c: i64, d: i64) -> Quadruple {
        Quadruple::finite(rat_i64(a), rat_i64(b), rat_i64(c), rat_i64(d))
    }

    #[test]
    fn theta_example_values() {
        let out = theta(&quad_i64(2, 1, 1, 2)).unwrap();
        assert_eq!(
            out,
            Quadruple::finite(rat_frac(1, 3), rat_frac(1, 2), rat_frac(1, 2), rat_frac(2, 3))
        );
        let out = theta(&quad_i64(0, 0, 0, 0)).unwrap();
        assert_eq!(out, quad_i64(1, 1, 0, 0));
        let inf = Quadruple([
            ExtReal::Infinity,
            ExtReal::finite_i64(1),
            ExtReal::finite_i64(1),
            ExtReal::Infinity,
        ]);
        let out = theta(&inf).unwrap();
        assert_eq!(out.0[0], ExtReal::Finite(Rat::zero()));
        assert_eq!(out.0[3], ExtReal::Finite(Rat::one()));
    }

    #[test]
    fn theta_rejects_negative() {
        assert!(theta(&quad_i64(-1, 0, 0, 0)).is_err());
        assert!(theta_inv(&quad_i64(2, 0, 0, 0)).is_err());
    }

    #[test]
    fn theta_roundtrip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut parts = Vec::new();
            for _ in 0..4 {
                let num = rng.gen_range(0..1000i64);
                let den = rng.gen_range(1..50i64);
                parts.push(rat_frac(num, den));
            }
            let q = Quadruple::finite(
                parts[0].clone(),
                parts[1].clone(),
                parts[2].clone(),
                parts[3].clone(),
            );
            let back = theta_inv(&theta(&q).unwrap()).unwrap();
            assert_eq!(back, q);
        }
        // Infinities round-trip too.
        let q = Quadruple([
            ExtReal::Infinity,
            ExtReal::finite_i64(3),
            ExtReal::finite_i64(0),
            ExtReal::Infinity,
        ]);
        assert_eq!(theta_inv(&theta(&q).unwrap()).unwrap(), q);
    }

    #[test]
    fn geometric_ratio_extrema() {
        let canvas = generate_geometric_canvas(2, 40, &rat_i64(1));
        let r = rigid_from_canvas(&canvas).unwrap();
        let tail = r.switch_numbers[4].clone();
        let horizon = r.switch_numbers[r.switch_numbers.len() - 2].clone();
        let est = quadruple_estimate(&r, &tail, &horizon).unwrap();
        assert_eq!(
            est.ratios,
            Quadruple::finite(rat_frac(1, 3), rat_frac(1, 2), rat_frac(1, 2), rat_frac(2, 3))
        );
        assert!(est.converged);
        let back = theta_inv(&est.ratios).unwrap();
        assert_eq!(back, quad_i64(2, 1, 1, 2));
    }

    #[test]
    fn degenerate_axis_ratio_is_constant() {
        // P = (0, q): the analogue of u = e_n.
        let p1 = PLFun::constant(rat_i64(1), rat_i64(0));
        let (lo, hi) = ratio_extrema(&p1, &rat_i64(1), &rat_i64(100)).unwrap();
        assert!(lo.value.is_zero() && hi.value.is_zero());
        let pn = PLFun::identity(rat_i64(1));
        let (lo, hi) = ratio_extrema(&pn, &rat_i64(1), &rat_i64(100)).unwrap();
        assert_eq!(lo.value, Rat::one());
        assert_eq!(hi.value, Rat::one());
    }

    #[test]
    fn min_first_ratio_at_most_one_over_n() {
        // Pigeonhole from ΣP_j = q: min_j min P_j/q ≤ 1/n at every q, so
        // in particular the first component's window minimum obeys it.
        for seed in 0..5 {
            let canvas = random_rigid(3, &rat_i64(2), 6, seed);
            let r = rigid_from_canvas(&canvas).unwrap();
            let a = r.switch_numbers[1].clone();
            let b = r.switch_numbers.last().unwrap().clone();
            let (lo, _) = ratio_extrema(&r.components[0], &a, &b).unwrap();
            assert!(lo.value <= rat_frac(1, 3));
            // And the global range bounds 0 ≤ P₁/q, Pₙ/q ≤ 1.
            let est = quadruple_estimate(&r, &a, &b).unwrap();
            for x in &est.ratios.0 {
                let v = x.as_finite().unwrap();
                assert!(v >= &Rat::zero() && v <= &Rat::one());
            }
        }
    }

    #[test]
    fn extrema_stable_under_redundant_points() {
        // Refining the evaluation set cannot change exact extrema: check
        // against a dense scan of rational sample points.
        let canvas = random_rigid(2, &rat_i64(3), 5, 9);
        let r = rigid_from_canvas(&canvas).unwrap();
        let a = r.switch_numbers[0].clone();
        let b = r.switch_numbers.last().unwrap().clone();
        let (lo, hi) = ratio_extrema(&r.components[1], &a, &b).unwrap();
        let steps = 400i64;
        for t in 0..=steps {
            let q = &a + (&b - &a) * rat_frac(t, steps);
            let v = r.components[1].eval(&q).unwrap() / &q;
            assert!(v >= lo.value && v <= hi.value);
        }
        // The extrema themselves appear in the scan up to segment ends.
        assert!(lo.value <= hi.value);
    }

    #[test]
    fn empty_window_rejected() {
        let p = PLFun::identity(rat_i64(1));
        assert!(ratio_extrema(&p, &rat_i64(5), &rat_i64(4)).is_err());
        let canvas = random_rigid(2, &rat_i64(3), 4, 1);
        let r = rigid_from_canvas(&canvas).unwrap();
        assert!(quadruple_estimate(&r, &rat_i64(10), &rat_i64(10)).is_err());
    }
}
