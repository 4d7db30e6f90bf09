//! Certified rational interval arithmetic.
//!
//! Every operation returns an interval that is guaranteed to contain the
//! exact real result; endpoints are rounded outward to dyadics of bounded
//! size so repeated operations do not blow up denominators.  `exp` and
//! `ln` are evaluated by Taylor / atanh series with explicit tail bounds,
//! so the enclosures are rigorous, not heuristic.

use crate::rat::{self, Rat};
use num::bigint::BigInt;
use num::{One, Signed, Zero};
use num_traits::ToPrimitive;

const GUARD: u32 = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub lo: Rat,
    pub hi: Rat,
}

impl Interval {
    pub fn new(lo: Rat, hi: Rat) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn point(x: Rat) -> Self {
        Interval { lo: x.clone(), hi: x }
    }

    pub fn zero() -> Self {
        Interval::point(Rat::zero())
    }

    pub fn width(&self) -> Rat {
        &self.hi - &self.lo
    }

    pub fn mid(&self) -> Rat {
        (&self.lo + &self.hi) / rat::rat_i64(2)
    }

    pub fn contains(&self, x: &Rat) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn is_positive(&self) -> bool {
        self.lo.is_positive()
    }

    /// Outward rounding to ~`prec` significant bits per endpoint.
    pub fn compress(&self, prec: u32) -> Self {
        Interval {
            lo: rat::compress(&self.lo, prec, false),
            hi: rat::compress(&self.hi, prec, true),
        }
    }

    pub fn add(&self, o: &Interval) -> Self {
        Interval { lo: &self.lo + &o.lo, hi: &self.hi + &o.hi }
    }

    pub fn sub(&self, o: &Interval) -> Self {
        Interval { lo: &self.lo - &o.hi, hi: &self.hi - &o.lo }
    }

    pub fn neg(&self) -> Self {
        Interval { lo: -self.hi.clone(), hi: -self.lo.clone() }
    }

    pub fn mul(&self, o: &Interval) -> Self {
        let cands = [
            &self.lo * &o.lo,
            &self.lo * &o.hi,
            &self.hi * &o.lo,
            &self.hi * &o.hi,
        ];
        let lo = cands.iter().min().unwrap().clone();
        let hi = cands.iter().max().unwrap().clone();
        Interval { lo, hi }
    }

    pub fn scale(&self, c: &Rat) -> Self {
        if c.is_negative() {
            Interval { lo: &self.hi * c, hi: &self.lo * c }
        } else {
            Interval { lo: &self.lo * c, hi: &self.hi * c }
        }
    }

    /// Reciprocal; the interval must not contain zero.
    pub fn recip(&self) -> Self {
        assert!(
            self.lo.is_positive() || self.hi.is_negative(),
            "recip of interval containing zero"
        );
        Interval { lo: self.hi.recip(), hi: self.lo.recip() }
    }

    pub fn div(&self, o: &Interval) -> Self {
        self.mul(&o.recip())
    }

    /// Integer power with per-step compression; `n` may be negative.
    pub fn powi(&self, n: i64, prec: u32) -> Self {
        if n == 0 {
            return Interval::point(Rat::one());
        }
        let base = if n < 0 { self.recip() } else { self.clone() };
        let mut acc = Interval::point(Rat::one());
        let mut sq = base;
        let mut k = n.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&sq).compress(prec + GUARD);
            }
            k >>= 1;
            if k > 0 {
                sq = sq.mul(&sq).compress(prec + GUARD);
            }
        }
        acc
    }

    /// Enclosure of the square root; `self.lo` must be `>= 0`.
    pub fn sqrt(&self, prec: u32) -> Self {
        assert!(!self.lo.is_negative(), "sqrt of negative interval");
        Interval { lo: sqrt_down(&self.lo, prec), hi: sqrt_up(&self.hi, prec) }
    }

    pub fn to_f64(&self) -> f64 {
        rat::rat_to_f64(&self.mid())
    }
}

/// Largest dyadic `d` with `d^2 <= x`, at `prec` fractional bits.
pub fn sqrt_down(x: &Rat, prec: u32) -> Rat {
    if x.is_zero() {
        return Rat::zero();
    }
    // floor(sqrt(n * 4^p / d)) / 2^p  <= sqrt(n/d)
    let scaled = (x.numer() << (2 * prec as u64)) / x.denom();
    Rat::new(scaled.sqrt(), BigInt::one() << prec)
}

/// Dyadic upper bound for the square root.
pub fn sqrt_up(x: &Rat, prec: u32) -> Rat {
    if x.is_zero() {
        return Rat::zero();
    }
    let scaled = (x.numer() << (2 * prec as u64)) / x.denom();
    let r = scaled.sqrt();
    let r = if &r * &r >= scaled { r } else { r + BigInt::one() };
    let cand = Rat::new(r, BigInt::one() << prec);
    // One ulp of headroom covers the floor division above.
    &cand + rat::pow2_neg(prec)
}

/// `e^f` for `0 <= f <= 1` by Taylor series with a certified tail.
fn exp_frac(f: &Rat, prec: u32) -> Interval {
    debug_assert!(!f.is_negative() && f <= &Rat::one());
    let eps = rat::pow2_neg(prec + GUARD);
    let mut term = Interval::point(Rat::one());
    let mut sum = Interval::point(Rat::one());
    let fi = Interval::point(f.clone());
    let mut k: i64 = 1;
    loop {
        term = term
            .mul(&fi)
            .scale(&rat::rat_frac(1, k))
            .compress(prec + 2 * GUARD);
        sum = sum.add(&term).compress(prec + 2 * GUARD);
        // Tail after this term is < 2 * next term since f <= 1, k >= 1.
        let next_hi = &term.hi * f / rat::rat_i64(k + 1);
        if &next_hi * rat::rat_i64(2) < eps {
            sum.hi += &next_hi * rat::rat_i64(2);
            return sum.compress(prec + GUARD);
        }
        k += 1;
    }
}

/// Enclosure of Euler's number.
pub fn euler(prec: u32) -> Interval {
    exp_frac(&Rat::one(), prec)
}

/// Certified enclosure of `e^x` for rational `x`.
pub fn exp_rat(x: &Rat, prec: u32) -> Interval {
    let n = rat::floor_int(x);
    let f = x - Rat::from_integer(n.clone());
    let frac = exp_frac(&f, prec);
    let n_i64 = n.to_i64().expect("exponent magnitude out of range");
    let en = euler(prec + GUARD).powi(n_i64, prec + GUARD);
    frac.mul(&en).compress(prec)
}

/// `atanh(t)` for `0 <= t < 1/2` with a certified tail.
fn atanh_small(t: &Interval, prec: u32) -> Interval {
    let eps = rat::pow2_neg(prec + GUARD);
    let t2 = t.mul(t).compress(prec + 2 * GUARD);
    let mut pow = t.clone();
    let mut sum = t.clone();
    let mut k: i64 = 1;
    loop {
        pow = pow.mul(&t2).compress(prec + 2 * GUARD);
        let term = pow.scale(&rat::rat_frac(1, 2 * k + 1));
        sum = sum.add(&term).compress(prec + 2 * GUARD);
        // Tail is a geometric-dominated series: sum_{j>k} t^(2j+1)/(2j+1)
        // <= pow_hi * t2_hi / (1 - t2_hi).
        let tail = &pow.hi * &t2.hi / (Rat::one() - &t2.hi);
        if tail < eps {
            sum.hi += tail;
            return sum.compress(prec + GUARD);
        }
        k += 1;
    }
}

/// Enclosure of `ln 2 = 2 atanh(1/3)`.
pub fn ln2(prec: u32) -> Interval {
    atanh_small(&Interval::point(rat::rat_frac(1, 3)), prec + GUARD)
        .scale(&rat::rat_i64(2))
        .compress(prec)
}

/// Certified enclosure of `ln x` for rational `x > 0`.
pub fn ln_rat(x: &Rat, prec: u32) -> Interval {
    assert!(x.is_positive(), "ln of non-positive rational");
    // Write x = 2^k * m with m in [1, 2).
    let mut k: i64 = x.numer().bits() as i64 - x.denom().bits() as i64;
    let two = rat::rat_i64(2);
    let mut m = x / pow2(k);
    while m >= two {
        m /= &two;
        k += 1;
    }
    while m < Rat::one() {
        m *= &two;
        k -= 1;
    }
    // ln m = 2 atanh((m-1)/(m+1)), argument in [0, 1/3].
    let t = (&m - Rat::one()) / (&m + Rat::one());
    let t = Interval::point(t).compress(prec + 2 * GUARD);
    let ln_m = atanh_small(&t, prec + GUARD).scale(&rat::rat_i64(2));
    ln_m.add(&ln2(prec + GUARD).scale(&rat::rat_i64(k))).compress(prec)
}

/// Enclosure of `ln x` over a positive rational interval.
pub fn ln_interval(x: &Interval, prec: u32) -> Interval {
    assert!(x.lo.is_positive());
    Interval {
        lo: ln_rat(&x.lo, prec).lo,
        hi: ln_rat(&x.hi, prec).hi,
    }
}

fn pow2(k: i64) -> Rat {
    if k >= 0 {
        Rat::from_integer(BigInt::one() << k as u64)
    } else {
        Rat::new(BigInt::one(), BigInt::one() << (-k) as u64)
    }
}

/// Rational point approximation of `e^x`, within `2^-prec` relatively.
pub fn exp_approx(x: &Rat, prec: u32) -> Rat {
    exp_rat(x, prec).mid()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat_frac, rat_i64, rat_to_f64};

    fn assert_encloses(iv: &Interval, x: f64, max_width: f64) {
        // x is itself an f64 approximation, so allow its rounding slack.
        let slack = max_width + x.abs() * 1e-14;
        let (lo, hi) = (rat_to_f64(&iv.lo), rat_to_f64(&iv.hi));
        assert!(lo - slack <= x && x <= hi + slack, "{x} not in [{lo}, {hi}]");
        assert!(hi - lo <= max_width, "width {} too large", hi - lo);
    }

    #[test]
    fn exp_matches_f64() {
        for (num, den) in [(0, 1), (1, 1), (3, 2), (-7, 3), (10, 1), (-10, 1), (41, 7)] {
            let x = rat_frac(num, den);
            let iv = exp_rat(&x, 64);
            assert_encloses(&iv, (num as f64 / den as f64).exp(), 1e-12);
        }
    }

    #[test]
    fn exp_large_argument_stays_tight() {
        let iv = exp_rat(&rat_i64(200), 64);
        // Relative width must stay ~2^-64; compare in log scale.
        let rel = rat_to_f64(&(&iv.width() / &iv.lo));
        assert!(rel < 1e-15);
        let l = ln_rat(&iv.mid(), 64);
        assert_encloses(&l, 200.0, 1e-12);
    }

    #[test]
    fn ln_matches_f64() {
        for (num, den) in [(1, 1), (2, 1), (1, 2), (10, 3), (1000000, 1), (3, 1000)] {
            let x = rat_frac(num, den);
            let iv = ln_rat(&x, 64);
            assert_encloses(&iv, (num as f64 / den as f64).ln(), 1e-12);
        }
    }

    #[test]
    fn ln_exp_round_trip_exact_enclosure() {
        let x = rat_frac(137, 11);
        let e = exp_rat(&x, 96);
        let back = ln_interval(&e, 96);
        assert!(back.contains(&x));
        assert!(back.width() < rat_frac(1, 1 << 30));
    }

    #[test]
    fn sqrt_brackets() {
        for n in [2i64, 3, 5, 1 << 40] {
            let x = rat_i64(n);
            let lo = sqrt_down(&x, 64);
            let hi = sqrt_up(&x, 64);
            assert!(&lo * &lo <= x && x <= &hi * &hi);
            assert!(&hi - &lo < rat_frac(1, 1 << 60));
        }
    }

    #[test]
    fn interval_mul_signs() {
        let a = Interval::new(rat_i64(-2), rat_i64(3));
        let b = Interval::new(rat_i64(-5), rat_i64(1));
        let p = a.mul(&b);
        assert_eq!(p.lo, rat_i64(-15));
        assert_eq!(p.hi, rat_i64(10));
    }

    #[test]
    fn ln2_value() {
        assert_encloses(&ln2(64), std::f64::consts::LN_2, 1e-15);
    }
}
