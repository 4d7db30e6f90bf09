//! Exact geometry-of-numbers engine.
//!
//! Heights and projective distances are Gram determinants over the
//! integers; successive minima of the bodies max{‖x‖, Q|x·u|} ≤ λ are
//! computed exactly by LLL + enumeration when the search region is
//! tractable, and otherwise bracketed by certified intervals derived
//! from a greedy (Minkowski) reduced basis of the associated ellipsoid.
//! All decisions happen on integer squares; logarithms appear only in
//! reporting, as certified intervals.

use crate::arb::{self, Interval};
use crate::plfun::{snap_to_pl, PLFun};
use crate::rat::{self, Rat};
use crate::systems::NGammaSystem;
use num::bigint::BigInt;
use num::{Integer, One, Signed, Zero};
use num_traits::ToPrimitive;
use std::collections::HashSet;
use thiserror::Error;

pub type IntVec = Vec<BigInt>;

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("direction vector is zero")]
    ZeroDirection,
    #[error("Q must be ≥ 1")]
    QTooSmall,
    #[error("vectors are linearly dependent")]
    Dependent,
    #[error("inputs do not have the required shape: {0}")]
    Shape(String),
    #[error("dimension {0} above configured cap")]
    DimensionCap(usize),
    #[error("enumeration budget exhausted and no certified fallback in dimension {0}")]
    Budget(usize),
    #[error("snap failed: {0}")]
    Snap(String),
}

pub fn iv(coords: &[i64]) -> IntVec {
    coords.iter().map(|&c| BigInt::from(c)).collect()
}

pub fn dot(a: &IntVec, b: &IntVec) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &IntVec) -> BigInt {
    dot(a, a)
}

pub fn is_zero_vec(a: &IntVec) -> bool {
    a.iter().all(|c| c.is_zero())
}

/// Divide out the gcd and orient so the first nonzero coordinate is > 0.
pub fn primitive(a: &IntVec) -> IntVec {
    let mut g = BigInt::zero();
    for c in a {
        g = g.gcd(c);
    }
    if g.is_zero() {
        return a.clone();
    }
    let mut out: IntVec = a.iter().map(|c| c / &g).collect();
    if let Some(first) = out.iter().find(|c| !c.is_zero()) {
        if first.is_negative() {
            for c in &mut out {
                *c = -&*c;
            }
        }
    }
    out
}

fn normalize_sign(a: &IntVec) -> IntVec {
    if let Some(first) = a.iter().find(|c| !c.is_zero()) {
        if first.is_negative() {
            return a.iter().map(|c| -c).collect();
        }
    }
    a.clone()
}

/// Exact Gram determinant det(v_i·v_j) = ‖v₁∧⋯∧v_m‖².
pub fn wedge_height_sq(vs: &[IntVec]) -> Rat {
    Rat::from_integer(gram_det(vs))
}

fn gram_det(vs: &[IntVec]) -> BigInt {
    let m = vs.len();
    if m == 0 {
        return BigInt::one();
    }
    let mut g: Vec<Vec<Rat>> = (0..m)
        .map(|i| (0..m).map(|j| Rat::from_integer(dot(&vs[i], &vs[j]))).collect())
        .collect();
    // Gaussian elimination; the Gram determinant of integer vectors is a
    // non-negative integer.
    let mut det = Rat::one();
    for c in 0..m {
        let piv = match (c..m).find(|&r| !g[r][c].is_zero()) {
            None => return BigInt::zero(),
            Some(p) => p,
        };
        if piv != c {
            g.swap(piv, c);
            det = -det;
        }
        det *= g[c][c].clone();
        for r in c + 1..m {
            let f = &g[r][c] / &g[c][c];
            for k in c..m {
                let s = &f * &g[c][k];
                g[r][k] -= s;
            }
        }
    }
    debug_assert!(det.is_integer());
    det.to_integer()
}

/// Exact determinant of a square integer matrix given by rows.
pub fn det_int(rows: &[IntVec]) -> BigInt {
    let m = rows.len();
    assert!(rows.iter().all(|r| r.len() == m), "matrix must be square");
    let mut a: Vec<Vec<Rat>> = rows
        .iter()
        .map(|r| r.iter().map(|c| Rat::from_integer(c.clone())).collect())
        .collect();
    let mut det = Rat::one();
    for c in 0..m {
        let piv = match (c..m).find(|&r| !a[r][c].is_zero()) {
            None => return BigInt::zero(),
            Some(p) => p,
        };
        if piv != c {
            a.swap(piv, c);
            det = -det;
        }
        det *= a[c][c].clone();
        for r in c + 1..m {
            let f = &a[r][c] / &a[c][c];
            for k in c..m {
                let s = &f * &a[c][k];
                a[r][k] -= s;
            }
        }
    }
    debug_assert!(det.is_integer());
    det.to_integer()
}

/// Rank of the span of the given integer vectors.
pub fn rank_of(vs: &[IntVec]) -> usize {
    independent_subset(vs).len()
}

/// Exact membership of x in the real span of vs.
pub fn in_span(x: &IntVec, vs: &[IntVec]) -> bool {
    let base = independent_subset(vs);
    let mut with = base.clone();
    with.push(x.clone());
    gram_det(&with).is_zero()
}

/// dist(x, span V)² = H(V ∪ {x})² / (H(V)²‖x‖²); dist to the zero space
/// is 1.
pub fn proj_dist_sq(x: &IntVec, v: &[IntVec]) -> Rat {
    assert!(!is_zero_vec(x), "x must be nonzero");
    if v.is_empty() {
        return Rat::one();
    }
    let hv = gram_det(v);
    if hv.is_zero() {
        // Drop dependent rows first.
        let basis = independent_subset(v);
        return proj_dist_sq(x, &basis);
    }
    let mut all = v.to_vec();
    all.push(x.clone());
    let hvx = gram_det(&all);
    Rat::new(hvx, hv * norm_sq(x))
}

fn independent_subset(v: &[IntVec]) -> Vec<IntVec> {
    let mut out: Vec<IntVec> = Vec::new();
    for x in v {
        let mut trial = out.clone();
        trial.push(x.clone());
        if !gram_det(&trial).is_zero() {
            out = trial;
        }
    }
    out
}

/// dist(V₁,V₂)² for hyperplane-like pairs: V₁, V₂ each omit one row of a
/// common basis of U.
pub fn subspace_dist_sq(
    v1: &[IntVec],
    v2: &[IntVec],
    u: &[IntVec],
) -> Result<Rat, LatticeError> {
    let find_missing = |v: &[IntVec]| -> Result<usize, LatticeError> {
        let missing: Vec<usize> =
            (0..u.len()).filter(|&i| !v.contains(&u[i])).collect();
        if missing.len() != 1 || v.len() + 1 != u.len() {
            return Err(LatticeError::Shape(
                "each V must be the basis of U with exactly one row removed".into(),
            ));
        }
        Ok(missing[0])
    };
    let m1 = find_missing(v1)?;
    let m2 = find_missing(v2)?;
    if m1 == m2 {
        return Ok(Rat::zero());
    }
    let inter: Vec<IntVec> = (0..u.len())
        .filter(|&i| i != m1 && i != m2)
        .map(|i| u[i].clone())
        .collect();
    let num = gram_det(&inter) * gram_det(u);
    let den = gram_det(v1) * gram_det(v2);
    if den.is_zero() {
        return Err(LatticeError::Dependent);
    }
    Ok(Rat::new(num, den))
}

/// Check dist(x_j, ⟨x₁,…,x_{j−1}⟩) ≥ 1 − 2^{1−j} for all j; on failure
/// reports the first offending 1-based index.
pub fn almost_orthogonal(vs: &[IntVec]) -> Result<(), usize> {
    for (j0, x) in vs.iter().enumerate() {
        if is_zero_vec(x) {
            return Err(j0 + 1);
        }
        if j0 == 0 {
            continue;
        }
        if !gram_det(&vs[..j0]).is_positive() {
            return Err(j0 + 1);
        }
        let d2 = proj_dist_sq(x, &vs[..j0]);
        // threshold 1 - 2^{1-j} with j = j0+1, so 2^{1-j} = 2^{-j0}
        let thr = Rat::one() - rat::pow2_neg(j0 as u32);
        if d2 < &thr * &thr {
            return Err(j0 + 1);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Quadratic forms and reduction

/// Positive-definite integer form F̃(x) = s·‖x‖² + a²·Σ_r (row_r·x)².
/// The max-norm body value is λ̃²(x) = max(s·‖x‖², a²·Σ_r(row_r·x)²),
/// with the true λ² = λ̃²/s and the sandwich λ̃² ≤ F̃ ≤ 2λ̃².
#[derive(Debug, Clone)]
pub struct BodyForm {
    pub dim: usize,
    /// s = b²·w where Q = a/b and w is the normal's squared norm.
    pub s: BigInt,
    pub a_sq: BigInt,
    pub rows: Vec<IntVec>,
}

impl BodyForm {
    pub fn f_value(&self, x: &IntVec) -> BigInt {
        &self.s * norm_sq(x) + &self.a_sq * self.rows_sq(x)
    }

    fn rows_sq(&self, x: &IntVec) -> BigInt {
        self.rows
            .iter()
            .map(|r| {
                let d = dot(r, x);
                &d * &d
            })
            .sum()
    }

    pub fn lambda_sq_scaled(&self, x: &IntVec) -> BigInt {
        let a = &self.s * norm_sq(x);
        let b = &self.a_sq * self.rows_sq(x);
        a.max(b)
    }

    pub fn inner(&self, x: &IntVec, y: &IntVec) -> BigInt {
        let mut acc = &self.s * dot(x, y);
        for r in &self.rows {
            acc += &self.a_sq * dot(r, x) * dot(r, y);
        }
        acc
    }
}

/// Exact LLL (δ = 3/4) on `basis` with respect to the inner product of
/// `form`; returns the reduced basis (the transform is implicit in the
/// returned vectors, which stay a basis of the same lattice).
pub fn lll_reduce(basis: &[IntVec], form: &BodyForm) -> Result<Vec<IntVec>, LatticeError> {
    let d = basis.len();
    let mut b = basis.to_vec();
    // Rational Gram–Schmidt data, recomputed after structural changes.
    let gso = |b: &Vec<IntVec>| -> Option<(Vec<Rat>, Vec<Vec<Rat>>)> {
        let mut bstar_sq = vec![Rat::zero(); d];
        let mut mu = vec![vec![Rat::zero(); d]; d];
        // Represent b*_i via coefficients over b (exact): maintain inner
        // products instead of vectors.  ⟨b_i, b*_j⟩ = ⟨b_i,b_j⟩ − Σ_{k<j} μ_jk ⟨b_i,b*_k⟩.
        let mut ip_star = vec![vec![Rat::zero(); d]; d]; // ⟨b_i, b*_j⟩
        for j in 0..d {
            for i in 0..d {
                let mut v = Rat::from_integer(form.inner(&b[i], &b[j]));
                for k in 0..j {
                    v -= &mu[j][k] * &ip_star[i][k];
                }
                ip_star[i][j] = v;
            }
            bstar_sq[j] = ip_star[j][j].clone();
            if bstar_sq[j].is_zero() {
                return None;
            }
            for i in j + 1..d {
                mu[i][j] = &ip_star[i][j] / &bstar_sq[j];
            }
        }
        Some((bstar_sq, mu))
    };
    let (mut bstar_sq, mut mu) = gso(&b).ok_or(LatticeError::Dependent)?;
    let half = rat::rat_frac(1, 2);
    let delta = rat::rat_frac(3, 4);
    let mut k = 1usize;
    let mut guard = 0usize;
    while k < d {
        guard += 1;
        if guard > 100_000 {
            return Err(LatticeError::Budget(d));
        }
        // Size-reduce b_k against b_{k-1}, …, b_0.
        let mut changed = false;
        for j in (0..k).rev() {
            if mu[k][j].clone().abs() > half {
                let r = rat::floor_int(&(&mu[k][j] + &half));
                let bj = b[j].clone();
                for (c, v) in b[k].iter_mut().zip(&bj) {
                    *c -= &r * v;
                }
                changed = true;
                let (bs, m) = gso(&b).ok_or(LatticeError::Dependent)?;
                bstar_sq = bs;
                mu = m;
            }
        }
        let _ = changed;
        let lhs = &bstar_sq[k];
        let rhs = (&delta - &mu[k][k - 1] * &mu[k][k - 1]) * &bstar_sq[k - 1];
        if lhs >= &rhs {
            k += 1;
        } else {
            b.swap(k, k - 1);
            let (bs, m) = gso(&b).ok_or(LatticeError::Dependent)?;
            bstar_sq = bs;
            mu = m;
            k = k.max(2) - 1;
        }
    }
    Ok(b)
}

/// Closest vector to `t` in the lattice spanned by `basis` (rank ≤ 3):
/// Babai rounding plus an exhaustive ±2 window.
fn cvp_small(basis: &[IntVec], t: &IntVec, form: &BodyForm) -> IntVec {
    let m = basis.len();
    let n = t.len();
    if m == 0 {
        return vec![BigInt::zero(); n];
    }
    // Solve Gram · c = ⟨b_i, t⟩ exactly.
    let mut a: Vec<Vec<Rat>> = (0..m)
        .map(|i| {
            let mut row: Vec<Rat> = (0..m)
                .map(|j| Rat::from_integer(form.inner(&basis[i], &basis[j])))
                .collect();
            row.push(Rat::from_integer(form.inner(&basis[i], t)));
            row
        })
        .collect();
    for c in 0..m {
        let piv = (c..m).find(|&r| !a[r][c].is_zero()).expect("independent basis");
        a.swap(piv, c);
        for r in 0..m {
            if r != c {
                let f = &a[r][c] / &a[c][c];
                for k in c..=m {
                    let s = &f * &a[c][k];
                    a[r][k] -= s;
                }
            }
        }
    }
    let coeffs: Vec<Rat> = (0..m).map(|i| &a[i][m] / &a[i][i]).collect();
    let centers: Vec<BigInt> =
        coeffs.iter().map(|c| rat::floor_int(&(c + rat::rat_frac(1, 2)))).collect();
    let mut best: Option<(BigInt, IntVec)> = None;
    let mut offs = vec![-2i64; m];
    loop {
        let mut cand = vec![BigInt::zero(); n];
        for (i, bvec) in basis.iter().enumerate() {
            let z = &centers[i] + BigInt::from(offs[i]);
            for (c, v) in cand.iter_mut().zip(bvec) {
                *c += &z * v;
            }
        }
        let diff: IntVec = t.iter().zip(&cand).map(|(a, b)| a - b).collect();
        let val = form.f_value(&diff);
        if best.as_ref().map_or(true, |(bv, _)| &val < bv) {
            best = Some((val, cand));
        }
        // Increment the offset counter.
        let mut i = 0;
        loop {
            if i == m {
                return best.unwrap().1;
            }
            offs[i] += 1;
            if offs[i] <= 2 {
                break;
            }
            offs[i] = -2;
            i += 1;
        }
    }
}

/// Approximate closest vector in the lattice spanned by `basis` (small
/// rank) for the Euclidean norm; used for norm reduction of coset
/// representatives.
pub fn cvp_euclid(basis: &[IntVec], t: &IntVec) -> IntVec {
    let form = BodyForm {
        dim: t.len(),
        s: BigInt::one(),
        a_sq: BigInt::zero(),
        rows: vec![],
    };
    cvp_small(basis, t, &form)
}

/// Greedy (Minkowski) reduction; for rank ≤ 4 the sorted output basis
/// attains the successive minima of the form.
fn greedy_reduce(basis: &[IntVec], form: &BodyForm) -> Vec<IntVec> {
    let d = basis.len();
    let mut b = basis.to_vec();
    loop {
        b.sort_by_key(|x| form.f_value(x));
        let mut improved = false;
        for i in 1..d {
            let prefix: Vec<IntVec> = b[..i].to_vec();
            let c = cvp_small(&prefix, &b[i], form);
            let reduced: IntVec = b[i].iter().zip(&c).map(|(a, b)| a - b).collect();
            if form.f_value(&reduced) < form.f_value(&b[i]) {
                b[i] = reduced;
                improved = true;
            }
        }
        if !improved {
            return b;
        }
    }
}

// ---------------------------------------------------------------------------
// Enumeration

const NODE_BUDGET: usize = 20_000_000;
/// Tighter a-priori ceiling on the estimated tree size: leaf acceptance
/// is big-integer work, so trees this large cost seconds; beyond it the
/// certified-interval fallback is the better trade.
const NODE_ESTIMATE_CAP: usize = 1_000_000;

/// All lattice vectors (up to sign) with F̃(x) ≤ bound, enumerated over
/// the given basis with floating-point pruning (slackened outward) and
/// exact acceptance.  None when the node budget is exceeded or the
/// numbers are too large for safe floating-point pruning.
fn enumerate_below(
    basis: &[IntVec],
    form: &BodyForm,
    bound: &BigInt,
) -> Option<Vec<IntVec>> {
    let d = basis.len();
    // Scale so the f64 Cholesky stays in range.
    let max_bits = basis
        .iter()
        .map(|x| form.f_value(x).bits())
        .chain(std::iter::once(bound.bits()))
        .max()
        .unwrap_or(0) as i64;
    let shift = (max_bits - 52).max(0) as u64;
    let scale = |v: &BigInt| -> f64 { (v >> shift).to_f64().unwrap_or(f64::MAX) };
    let mut g = vec![vec![0f64; d]; d];
    for i in 0..d {
        for j in 0..d {
            let ip = form.inner(&basis[i], &basis[j]);
            let neg = ip.is_negative();
            let m = scale(&ip.abs());
            g[i][j] = if neg { -m } else { m };
        }
    }
    // Fincke–Pohst elimination: q[i][i] pivots, q[i][j] (j>i) become μ_ij.
    let mut q = g;
    for i in 0..d {
        if q[i][i] <= 0.0 {
            return None;
        }
        for j in i + 1..d {
            q[j][i] = q[i][j] / q[i][i];
        }
        for k in i + 1..d {
            for l in k..d {
                q[k][l] -= q[k][i] * q[i][l];
                q[l][k] = q[k][l];
            }
        }
        for j in i + 1..d {
            q[i][j] /= q[i][i];
        }
    }
    let c64 = scale(bound) * 1.000001 + 1e-9;
    // Cheap a-priori node estimate: Π_i (2√(c/q_ii)+1) bounds the search
    // tree; bail out before burning the budget when it cannot fit.
    let mut log_nodes = 0f64;
    for i in 0..d {
        log_nodes += (2.0 * (c64 / q[i][i]).max(0.0).sqrt() + 1.0).ln();
    }
    if log_nodes > (NODE_ESTIMATE_CAP as f64).ln() {
        return None;
    }
    let mut out = Vec::new();
    let mut zs = vec![0i64; d];
    let mut nodes = 0usize;
    let mut seen: HashSet<IntVec> = HashSet::new();

    // Iterative depth-first over levels d-1 .. 0.
    fn rec(
        level: isize,
        cost: f64,
        zs: &mut Vec<i64>,
        q: &Vec<Vec<f64>>,
        c64: f64,
        d: usize,
        basis: &[IntVec],
        form: &BodyForm,
        bound: &BigInt,
        out: &mut Vec<IntVec>,
        seen: &mut HashSet<IntVec>,
        nodes: &mut usize,
    ) -> bool {
        if level < 0 {
            let n = basis[0].len();
            let mut x = vec![BigInt::zero(); n];
            for (i, b) in basis.iter().enumerate() {
                for (c, v) in x.iter_mut().zip(b) {
                    *c += BigInt::from(zs[i]) * v;
                }
            }
            if is_zero_vec(&x) {
                return true;
            }
            if form.f_value(&x) <= *bound {
                let xn = normalize_sign(&x);
                if seen.insert(xn.clone()) {
                    out.push(xn);
                }
            }
            return true;
        }
        let l = level as usize;
        let center: f64 = (l + 1..d).map(|j| q[l][j] * zs[j] as f64).sum();
        let room = (c64 - cost).max(0.0);
        let radius = (room / q[l][l]).sqrt() + 1.0;
        let lo = (-center - radius).floor() as i64;
        let hi = (-center + radius).ceil() as i64;
        for z in lo..=hi {
            *nodes += 1;
            if *nodes > NODE_BUDGET {
                return false;
            }
            let t = z as f64 + center;
            let new_cost = cost + q[l][l] * t * t;
            if new_cost > c64 {
                continue;
            }
            zs[l] = z;
            if !rec(level - 1, new_cost, zs, q, c64, d, basis, form, bound, out, seen, nodes) {
                return false;
            }
        }
        zs[l] = 0;
        true
    }

    if rec(d as isize - 1, 0.0, &mut zs, &q, c64, d, basis, form, bound, &mut out, &mut seen, &mut nodes) {
        Some(out)
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Directions and successive minima

#[derive(Debug, Clone, PartialEq)]
pub enum Direction {
    /// u = N/‖N‖ for a primitive integer vector N.
    ExactNormal(IntVec),
    /// Rational coordinate approximation of a unit vector.
    FloatVec(Vec<Rat>),
}

impl Direction {
    pub fn dim(&self) -> usize {
        match self {
            Direction::ExactNormal(n) => n.len(),
            Direction::FloatVec(v) => v.len(),
        }
    }

    /// Integer vector proportional to the direction (denominators cleared).
    pub fn int_normal(&self) -> Result<IntVec, LatticeError> {
        let v = match self {
            Direction::ExactNormal(n) => n.clone(),
            Direction::FloatVec(v) => {
                let mut den = BigInt::one();
                for c in v {
                    den = den.lcm(c.denom());
                }
                v.iter().map(|c| (c * Rat::from_integer(den.clone())).to_integer()).collect()
            }
        };
        if is_zero_vec(&v) {
            return Err(LatticeError::ZeroDirection);
        }
        Ok(primitive(&v))
    }
}

#[derive(Debug, Clone)]
pub struct MinimaResult {
    /// The dilation parameter Q.
    pub q: Rat,
    /// Certified brackets λ_j² ∈ [lo, hi]; lo = hi when exact.
    pub lambda_sq_lo: Vec<Rat>,
    pub lambda_sq_hi: Vec<Rat>,
    /// Independent integer vectors; the j-th attains λ_j when exact, and
    /// otherwise certifies the upper bracket.
    pub vectors: Vec<IntVec>,
    pub exact: bool,
}

impl MinimaResult {
    pub fn lambda_sq(&self) -> Option<&[Rat]> {
        if self.exact {
            Some(&self.lambda_sq_lo)
        } else {
            None
        }
    }

    /// L_j = ½·log λ_j² as certified intervals.
    pub fn l_values(&self, prec: u32) -> Vec<Interval> {
        self.lambda_sq_lo
            .iter()
            .zip(&self.lambda_sq_hi)
            .map(|(lo, hi)| {
                let a = arb::ln_interval(&Interval::new(lo.clone(), hi.clone()), prec);
                a.scale(&rat::rat_frac(1, 2))
            })
            .collect()
    }
}

/// Build the scaled integer form for the body max{‖x‖, Q|x·u|} ≤ λ.
fn direction_form(u: &Direction, q: &Rat) -> Result<BodyForm, LatticeError> {
    let n = u.int_normal()?;
    let w = norm_sq(&n);
    let a = q.numer().clone();
    let b = q.denom().clone();
    Ok(BodyForm { dim: n.len(), s: &b * &b * w, a_sq: &a * &a, rows: vec![n] })
}

/// Greedy-select independent vectors from candidates sorted by
/// (λ̃², lexicographic order).
fn select_independent(
    cands: &mut Vec<IntVec>,
    form: &BodyForm,
    n: usize,
) -> Option<Vec<(BigInt, IntVec)>> {
    cands.sort_by(|a, b| {
        form.lambda_sq_scaled(a)
            .cmp(&form.lambda_sq_scaled(b))
            .then_with(|| a.cmp(b))
    });
    let mut picked: Vec<(BigInt, IntVec)> = Vec::new();
    let mut span: Vec<IntVec> = Vec::new();
    for x in cands.iter() {
        let mut trial = span.clone();
        trial.push(x.clone());
        if !gram_det(&trial).is_zero() {
            picked.push((form.lambda_sq_scaled(x), x.clone()));
            span = trial;
            if picked.len() == n {
                return Some(picked);
            }
        }
    }
    None
}

fn minima_for_form(form: &BodyForm, q: &Rat, want: usize) -> Result<MinimaResult, LatticeError> {
    let d = form.dim;
    let identity: Vec<IntVec> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect();
    let reduced = lll_reduce(&identity, form)?;

    // Exact path: enumerate everything with λ̃² below the want-th
    // smallest reduced λ̃², which dominates λ̃_want² (the want smallest
    // basis vectors are independent).
    let cap: BigInt = {
        let mut vals: Vec<BigInt> =
            reduced.iter().map(|x| form.lambda_sq_scaled(x)).collect();
        vals.sort();
        vals[want - 1].clone()
    };
    let bound = &cap * BigInt::from(2); // λ̃² ≤ cap ⇒ F̃ ≤ 2·cap
    if let Some(mut cands) = enumerate_below(&reduced, form, &bound) {
        if let Some(picked) = select_independent(&mut cands, form, want) {
            let lam: Vec<Rat> = picked
                .iter()
                .map(|(l, _)| Rat::new(l.clone(), form.s.clone()))
                .collect();
            return Ok(MinimaResult {
                q: q.clone(),
                lambda_sq_lo: lam.clone(),
                lambda_sq_hi: lam,
                vectors: picked.into_iter().map(|(_, v)| v).collect(),
                exact: true,
            });
        }
    }

    // Fallback: exact ellipsoid minima from a greedy-reduced basis (rank
    // ≤ 4), λ_j² ∈ [ν_j/(2s), ν_j/s].
    if d > 4 {
        return Err(LatticeError::Budget(d));
    }
    let g = greedy_reduce(&reduced, form);
    let mut nus: Vec<(BigInt, IntVec)> =
        g.iter().map(|x| (form.f_value(x), normalize_sign(x))).collect();
    nus.sort();
    let nus = nus.into_iter().take(want).collect::<Vec<_>>();
    Ok(MinimaResult {
        q: q.clone(),
        lambda_sq_lo: nus
            .iter()
            .map(|(v, _)| Rat::new(v.clone(), &form.s * BigInt::from(2)))
            .collect(),
        lambda_sq_hi: nus.iter().map(|(v, _)| Rat::new(v.clone(), form.s.clone())).collect(),
        vectors: nus.into_iter().map(|(_, v)| v).collect(),
        exact: false,
    })
}

/// Successive minima of C_u(Q) = {‖x‖ ≤ 1, |x·u| ≤ 1/Q} scaled so that
/// λ(x) = max{‖x‖, Q|x·u|}.
pub fn successive_minima(u: &Direction, q: &Rat) -> Result<MinimaResult, LatticeError> {
    if q < &Rat::one() {
        return Err(LatticeError::QTooSmall);
    }
    let form = direction_form(u, q)?;
    minima_for_form(&form, q, form.dim)
}

/// Test oracle: plain box scan with growing radius; complete once the
/// selected λ_n does not exceed the scanned radius.
pub fn minima_box_oracle(u: &Direction, q: &Rat) -> Result<MinimaResult, LatticeError> {
    if q < &Rat::one() {
        return Err(LatticeError::QTooSmall);
    }
    let form = direction_form(u, q)?;
    let nvec = u.int_normal()?;
    let n = form.dim;
    // Pivot on the largest normal coordinate: for λ(x) ≤ r we need both
    // ‖x‖∞ ≤ r and (x·N)² ≤ s·r²/a², which pins the pivot coordinate to
    // a short range once the other coordinates are fixed.
    let pivot = (0..n).max_by_key(|&i| nvec[i].abs()).unwrap();
    let np = nvec[pivot].clone();
    let mut r: i64 = 2;
    loop {
        // (x·N)² ≤ proj_cap
        let proj_cap = rat::floor_int(&Rat::new(
            &form.s * BigInt::from(r) * BigInt::from(r),
            form.a_sq.clone().max(BigInt::one()),
        ));
        let proj_rad = if form.a_sq.is_zero() {
            BigInt::from(r) * nvec.iter().map(|c| c.abs()).sum::<BigInt>()
        } else {
            proj_cap.max(BigInt::zero()).sqrt()
        };
        let mut cands = Vec::new();
        let mut x = vec![-r; n];
        x[pivot] = 0;
        'scan: loop {
            let t: BigInt = (0..n)
                .filter(|&i| i != pivot)
                .map(|i| BigInt::from(x[i]) * &nvec[i])
                .sum();
            // x_p range from |t + x_p·N_p| ≤ proj_rad, clipped to [−r, r].
            let lo_r = Rat::new(-&proj_rad - &t, np.clone());
            let hi_r = Rat::new(&proj_rad - &t, np.clone());
            let (lo_r, hi_r) = if np.is_negative() { (hi_r, lo_r) } else { (lo_r, hi_r) };
            let lo = rat::ceil_int(&lo_r).max(BigInt::from(-r));
            let hi = rat::floor_int(&hi_r).min(BigInt::from(r));
            let mut xp = lo.clone();
            while xp <= hi {
                let mut v: IntVec = x.iter().map(|&c| BigInt::from(c)).collect();
                v[pivot] = xp.clone();
                if !is_zero_vec(&v) {
                    cands.push(normalize_sign(&v));
                }
                xp += 1;
            }
            let mut i = 0;
            loop {
                if i == n {
                    break 'scan;
                }
                if i == pivot {
                    i += 1;
                    continue;
                }
                x[i] += 1;
                if x[i] <= r {
                    break;
                }
                x[i] = -r;
                i += 1;
            }
        }
        cands.sort();
        cands.dedup();
        if let Some(picked) = select_independent(&mut cands, &form, n) {
            // Complete iff λ_n ≤ r: any x outside the box has ‖x‖ > r.
            let lam_n = Rat::new(picked.last().unwrap().0.clone(), form.s.clone());
            if lam_n <= rat::rat_i64(r * r) {
                let lam: Vec<Rat> = picked
                    .iter()
                    .map(|(l, _)| Rat::new(l.clone(), form.s.clone()))
                    .collect();
                return Ok(MinimaResult {
                    q: q.clone(),
                    lambda_sq_lo: lam.clone(),
                    lambda_sq_hi: lam,
                    vectors: picked.into_iter().map(|(_, v)| v).collect(),
                    exact: true,
                });
            }
        }
        r *= 2;
        if r > 1 << 22 {
            return Err(LatticeError::Budget(n));
        }
    }
}

// ---------------------------------------------------------------------------
// Trajectories

/// L_x(q) = max{log‖x‖, q + log|x·u|} at the given abscissae, as
/// certified intervals.
pub fn trajectory_values(
    x: &IntVec,
    u: &Direction,
    qs: &[Rat],
    prec: u32,
) -> Result<Vec<Interval>, LatticeError> {
    assert!(!is_zero_vec(x));
    let n = u.int_normal()?;
    let w = norm_sq(&n);
    let half = rat::rat_frac(1, 2);
    let log_norm = arb::ln_rat(&Rat::from_integer(norm_sq(x)), prec).scale(&half);
    let d = dot(x, &n);
    let proj_sq = Rat::new(&d * &d, w);
    let log_proj = if d.is_zero() {
        None
    } else {
        Some(arb::ln_rat(&proj_sq, prec).scale(&half))
    };
    Ok(qs
        .iter()
        .map(|q| match &log_proj {
            None => log_norm.clone(),
            Some(lp) => {
                let rising = lp.add(&Interval::point(q.clone()));
                // max of two intervals, outward.
                Interval::new(
                    log_norm.lo.clone().max(rising.lo.clone()),
                    log_norm.hi.clone().max(rising.hi),
                )
            }
        })
        .collect())
}

/// Breakpoint q* = log‖x‖ − log|x·u| of the trajectory, None when x ⊥ u.
pub fn trajectory_breakpoint(
    x: &IntVec,
    u: &Direction,
    prec: u32,
) -> Result<Option<Interval>, LatticeError> {
    assert!(!is_zero_vec(x));
    let n = u.int_normal()?;
    let d = dot(x, &n);
    if d.is_zero() {
        return Ok(None);
    }
    let w = norm_sq(&n);
    // q* = ½ log( ‖x‖²·w / (x·N)² )
    let ratio = Rat::new(norm_sq(x) * w, &d * &d);
    Ok(Some(arb::ln_rat(&ratio, prec).scale(&rat::rat_frac(1, 2))))
}

// ---------------------------------------------------------------------------
// Compound bodies

/// Sorted k-subsets of {0,…,n−1} in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k == 0 {
        return vec![vec![]];
    }
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        // Advance.
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] != i + n - k {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Matrix of the contraction ι_N: ∧^k Zⁿ → ∧^{k−1} Zⁿ,
/// (ι_N ω)_T = Σ_{j∉T} sign·N_j·ω_{T∪{j}}.
pub fn contraction_matrix(n_vec: &IntVec, k: usize) -> Vec<IntVec> {
    let n = n_vec.len();
    let cols = k_subsets(n, k);
    let rows_idx = k_subsets(n, k - 1);
    let mut rows = Vec::with_capacity(rows_idx.len());
    for t in &rows_idx {
        let mut row = vec![BigInt::zero(); cols.len()];
        for j in 0..n {
            if t.contains(&j) {
                continue;
            }
            let mut s: Vec<usize> = t.clone();
            let pos = s.iter().position(|&e| e > j).unwrap_or(s.len());
            s.insert(pos, j);
            let col = cols.iter().position(|c| c == &s).unwrap();
            let sign = if pos % 2 == 0 { 1 } else { -1 };
            row[col] = BigInt::from(sign) * &n_vec[j];
        }
        rows.push(row);
    }
    rows
}

pub const COMPOUND_DIM_CAP: usize = 20;

/// First minimum of the pseudo-compound body max{‖ω‖, Q‖ι_u ω‖} over
/// ∧^k Zⁿ∖{0}: returns (½·log λ₁², attaining wedge); λ² brackets are
/// certified, exact when enumeration succeeds.
pub fn compound_minima(
    u: &Direction,
    q: &Rat,
    k: usize,
    want: usize,
) -> Result<MinimaResult, LatticeError> {
    let n = u.dim();
    assert!(k >= 1 && k <= n);
    let dim = k_subsets(n, k).len();
    if dim > COMPOUND_DIM_CAP {
        return Err(LatticeError::DimensionCap(dim));
    }
    if q < &Rat::one() {
        return Err(LatticeError::QTooSmall);
    }
    let nv = u.int_normal()?;
    let w = norm_sq(&nv);
    let a = q.numer().clone();
    let b = q.denom().clone();
    let form = BodyForm {
        dim,
        s: &b * &b * w,
        a_sq: &a * &a,
        rows: contraction_matrix(&nv, k),
    };
    minima_for_form(&form, q, want)
}

/// L^(k)_{u,1}(q) for Q ≈ e^q (rational inner approximation at `prec`
/// bits), as a certified interval.
pub fn compound_first_min(
    u: &Direction,
    q: &Rat,
    k: usize,
    prec: u32,
) -> Result<(Interval, IntVec), LatticeError> {
    let qq = exp_param(q, prec);
    let res = compound_minima(u, &qq, k, 1)?;
    let mut l = res.l_values(prec).remove(0);
    // Absorb the |log Q̃ − q| ≤ 2^{1−prec} parameter slack.
    let slack = rat::pow2_neg(prec - 1);
    l = Interval::new(&l.lo - &slack, &l.hi + &slack);
    Ok((l, res.vectors[0].clone()))
}

/// Rational Q with |log Q − q| ≤ 2^{1−prec}, Q ≥ 1 for q ≥ 0.
pub fn exp_param(q: &Rat, prec: u32) -> Rat {
    let e = arb::exp_rat(q, prec + 8);
    let mid = e.mid();
    if mid < Rat::one() {
        Rat::one()
    } else {
        mid
    }
}

// ---------------------------------------------------------------------------
// The approximating (n,γ)-system of a direction

/// γ = 6n·2ⁿ·log n as an exact rational upper bound.
pub fn gamma_for(n: usize, prec: u32) -> Rat {
    let ln = arb::ln_rat(&rat::rat_i64(n as i64), prec);
    let f = rat::rat_i64(6 * n as i64 * (1i64 << n));
    rat::compress(&(f * ln.hi), prec, true)
}

/// Sample M_k = L^(k)_{u,1} on the grid {0, step, …, steps·step}, snap
/// each to a slopes-{0,1} PL function, force M_n to the identity, and
/// return the (n,γ)-system with γ = 6n2ⁿlog n.
pub fn ss_system_from_u(
    u: &Direction,
    step: &Rat,
    steps: usize,
    tol: &Rat,
    prec: u32,
) -> Result<NGammaSystem, LatticeError> {
    let n = u.dim();
    let mut m = Vec::with_capacity(n);
    for k in 1..n {
        let mut samples = Vec::with_capacity(steps + 1);
        for i in 0..=steps {
            let q = rat::rat_i64(i as i64) * step;
            let (l, _) = compound_first_min(u, &q, k, prec)?;
            samples.push((q, rat::compress(&l.mid(), prec, false)));
        }
        let f = snap_to_pl(&samples, tol).map_err(|e| LatticeError::Snap(e.to_string()))?;
        m.push(f.extend_to_infinity());
    }
    m.push(PLFun::identity(Rat::zero()));
    Ok(NGammaSystem { n, gamma: gamma_for(n, prec), m })
}
