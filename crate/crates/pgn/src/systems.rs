//! Canvases, rigid n-systems and (n,γ)-systems.
//!
//! A canvas is the combinatorial datum (integer rows, indices k_i, ℓ_i,
//! mesh δ) from which a rigid system is induced; an (n,γ)-system is the
//! relaxed analytic object carrying the sum functions M_1 ≤ … ≤ M_n.

use crate::plfun::{phi_merge, PLFun, Seg};
use crate::rat::{self, Rat};
use num::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Canvas {
    pub n: usize,
    #[serde(with = "rat::serde_str")]
    pub mesh: Rat,
    /// Row i holds the integer multiples m_{i,1} < … < m_{i,n}; the
    /// actual coordinates are a_j^(i) = m_{i,j}·mesh.
    pub points: Vec<Vec<i64>>,
    /// 1-based indices k_0, …, k_{s-1}.
    pub k: Vec<usize>,
    /// 1-based indices ℓ_0 = n, ℓ_1, …, ℓ_{s-1}.
    pub l: Vec<usize>,
    /// true ⇒ the induced system ends with a perpetual slope-1 ray on
    /// coordinate k_{s-1}; false ⇒ the rows are a truncated prefix of an
    /// infinite canvas.
    pub finite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanvasViolation {
    /// "C1", "C2", "C3" or "shape".
    pub clause: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanvasReport {
    pub violations: Vec<CanvasViolation>,
}

impl CanvasReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("canvas invalid: {0}")]
    InvalidCanvas(String),
    #[error("system is not rigid at q = {0}: {1}")]
    NotRigidAt(String, String),
    #[error("system validation failed: {0}")]
    InvalidSystem(String),
}

impl Canvas {
    pub fn steps(&self) -> usize {
        self.points.len()
    }

    /// Coordinate a_j^(i) as a rational (j is 1-based).
    pub fn coord(&self, i: usize, j: usize) -> Rat {
        rat::rat_i64(self.points[i][j - 1]) * &self.mesh
    }

    /// Switch number q_i = Σ_j a_j^(i).
    pub fn switch_number(&self, i: usize) -> Rat {
        let s: i64 = self.points[i].iter().sum();
        rat::rat_i64(s) * &self.mesh
    }

    /// Reinterpret with mesh δ/f by scaling all multiples by f.
    pub fn refine_mesh(&self, f: i64) -> Canvas {
        assert!(f >= 1);
        Canvas {
            n: self.n,
            mesh: &self.mesh / rat::rat_i64(f),
            points: self
                .points
                .iter()
                .map(|row| row.iter().map(|m| m * f).collect())
                .collect(),
            k: self.k.clone(),
            l: self.l.clone(),
            finite: self.finite,
        }
    }
}

pub fn validate_canvas(c: &Canvas) -> CanvasReport {
    let mut v = Vec::new();
    let s = c.points.len();
    let mut shape_ok = true;
    if c.n < 2 {
        v.push(CanvasViolation { clause: "shape".into(), detail: "n must be >= 2".into() });
        shape_ok = false;
    }
    if s == 0 {
        v.push(CanvasViolation { clause: "shape".into(), detail: "no rows".into() });
        shape_ok = false;
    }
    if c.k.len() != s || c.l.len() != s {
        v.push(CanvasViolation {
            clause: "shape".into(),
            detail: format!("k/l length {}/{} != number of rows {}", c.k.len(), c.l.len(), s),
        });
        shape_ok = false;
    }
    for (i, row) in c.points.iter().enumerate() {
        if row.len() != c.n {
            v.push(CanvasViolation {
                clause: "shape".into(),
                detail: format!("row {i} has length {} != n", row.len()),
            });
            shape_ok = false;
        }
    }
    if !shape_ok {
        return CanvasReport { violations: v };
    }
    if !c.mesh.is_positive() {
        v.push(CanvasViolation { clause: "shape".into(), detail: "mesh must be positive".into() });
    }
    // C1: rows strictly increasing, entries >= 1.
    for (i, row) in c.points.iter().enumerate() {
        for j in 0..c.n {
            if row[j] < 1 {
                v.push(CanvasViolation {
                    clause: "C1".into(),
                    detail: format!("entry (i={i}, j={}) = {} < 1", j + 1, row[j]),
                });
            }
            if j + 1 < c.n && row[j] >= row[j + 1] {
                v.push(CanvasViolation {
                    clause: "C1".into(),
                    detail: format!("row {i} not strictly increasing at j={}", j + 2),
                });
            }
        }
    }
    // C2: 1 <= k_0 <= l_0 = n; 1 <= k_i < l_i <= n for i >= 1.
    if c.l[0] != c.n {
        v.push(CanvasViolation { clause: "C2".into(), detail: format!("l_0 = {} != n", c.l[0]) });
    }
    if c.k[0] < 1 || c.k[0] > c.n {
        v.push(CanvasViolation { clause: "C2".into(), detail: format!("k_0 = {} out of range", c.k[0]) });
    }
    for i in 1..s {
        if !(1 <= c.k[i] && c.k[i] < c.l[i] && c.l[i] <= c.n) {
            v.push(CanvasViolation {
                clause: "C2".into(),
                detail: format!("need 1 <= k_{i} < l_{i} <= n, got k={}, l={}", c.k[i], c.l[i]),
            });
        }
    }
    // C3 between consecutive rows.
    for i in 0..s.saturating_sub(1) {
        let (ki, li1) = (c.k[i], c.l[i + 1]);
        if ki > li1 {
            v.push(CanvasViolation {
                clause: "C3".into(),
                detail: format!("k_{i} = {ki} > l_{} = {li1}", i + 1),
            });
            continue;
        }
        if li1 < 1 || li1 > c.n {
            continue; // already reported by C2
        }
        if c.points[i][li1 - 1] + 1 > c.points[i + 1][li1 - 1] {
            v.push(CanvasViolation {
                clause: "C3".into(),
                detail: format!(
                    "coordinate l_{} = {li1} must grow by at least the mesh between rows {i} and {}",
                    i + 1,
                    i + 1
                ),
            });
        }
        let mut a: Vec<i64> = c.points[i].clone();
        a.remove(ki - 1);
        let mut b: Vec<i64> = c.points[i + 1].clone();
        b.remove(li1 - 1);
        if a != b {
            v.push(CanvasViolation {
                clause: "C3".into(),
                detail: format!(
                    "row {i} minus entry k_{i}={ki} differs from row {} minus entry l_{}={li1}",
                    i + 1,
                    i + 1
                ),
            });
        }
    }
    CanvasReport { violations: v }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RigidSystem {
    pub canvas: Canvas,
    /// Components P_1 <= … <= P_n as functions of q on [q_0, ∞).
    pub components: Vec<PLFun>,
    #[serde(with = "rat::serde_vec")]
    pub switch_numbers: Vec<Rat>,
}

impl RigidSystem {
    pub fn n(&self) -> usize {
        self.canvas.n
    }

    pub fn q0(&self) -> &Rat {
        &self.switch_numbers[0]
    }

    pub fn eval(&self, q: &Rat) -> Result<Vec<Rat>, crate::plfun::PlError> {
        self.components.iter().map(|f| f.eval(q)).collect()
    }

    /// The associated (n,0)-system with M_j = P_1 + … + P_j.
    pub fn to_ngamma(&self) -> NGammaSystem {
        let mut m = Vec::with_capacity(self.n());
        let mut acc: Option<PLFun> = None;
        for p in &self.components {
            acc = Some(match acc {
                None => p.clone(),
                Some(a) => a.add(p),
            });
            m.push(acc.clone().unwrap());
        }
        NGammaSystem { n: self.n(), gamma: Rat::zero(), m }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NGammaSystem {
    pub n: usize,
    #[serde(with = "rat::serde_str")]
    pub gamma: Rat,
    #[serde(rename = "M")]
    pub m: Vec<PLFun>,
}

impl NGammaSystem {
    pub fn q0(&self) -> &Rat {
        &self.m[0].q0
    }

    /// P_j = M_j − M_{j−1} (j is 1-based).
    pub fn p_component(&self, j: usize) -> PLFun {
        if j == 1 {
            self.m[0].clone()
        } else {
            self.m[j - 1].sub(&self.m[j - 2])
        }
    }

    pub fn p_components(&self) -> Vec<PLFun> {
        (1..=self.n).map(|j| self.p_component(j)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NgViolation {
    /// "S1" … "S5" or "structure".
    pub clause: String,
    /// Witnessing abscissa when applicable.
    pub at: Option<String>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NgReport {
    pub violations: Vec<NgViolation>,
}

impl NgReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check S1–S5 of the (n,γ)-system definition at all breakpoints plus
/// tail slopes.  PL functions attain extrema of differences at
/// breakpoints, so the finite check is complete.
pub fn validate_ngamma(sys: &NGammaSystem) -> NgReport {
    let mut v = Vec::new();
    let n = sys.n;
    let gamma = &sys.gamma;
    if sys.m.len() != n {
        v.push(NgViolation {
            clause: "structure".into(),
            at: None,
            detail: format!("{} sum functions, expected n = {n}", sys.m.len()),
        });
        return NgReport { violations: v };
    }
    let q0 = sys.m[0].q0.clone();
    for (idx, mj) in sys.m.iter().enumerate() {
        if mj.q0 != q0 {
            v.push(NgViolation {
                clause: "structure".into(),
                at: None,
                detail: format!("M_{} starts at {} != {}", idx + 1, mj.q0, q0),
            });
        }
        for s in &mj.segments {
            if s.slope != 0 && s.slope != 1 {
                v.push(NgViolation {
                    clause: "S3".into(),
                    at: None,
                    detail: format!("M_{} has slope {} outside {{0,1}}", idx + 1, s.slope),
                });
            }
        }
    }
    // S4: M_n is the identity.
    let mn = &sys.m[n - 1];
    if mn.v0 != mn.q0 || mn.segments.iter().any(|s| s.slope != 1) {
        v.push(NgViolation {
            clause: "S4".into(),
            at: None,
            detail: "M_n must equal q identically".into(),
        });
    }
    if !v.is_empty() {
        return NgReport { violations: v };
    }

    let ps = sys.p_components();
    let mut bks: Vec<Rat> = sys.m.iter().flat_map(|f| f.breakpoints()).collect();
    bks.sort();
    bks.dedup();

    // S1 at breakpoints.
    for q in &bks {
        for j in 0..n {
            let pj = ps[j].eval(q).unwrap();
            if &pj < &(-gamma.clone()) {
                v.push(NgViolation {
                    clause: "S1".into(),
                    at: Some(rat::fmt_rat(q)),
                    detail: format!("P_{}({}) = {} < -γ", j + 1, q, pj),
                });
            }
            if j + 1 < n {
                let pj1 = ps[j + 1].eval(q).unwrap();
                if pj > &pj1 + gamma {
                    v.push(NgViolation {
                        clause: "S1".into(),
                        at: Some(rat::fmt_rat(q)),
                        detail: format!("P_{}({}) > P_{}({}) + γ", j + 1, q, j + 2, q),
                    });
                }
            }
        }
    }
    // S1/S2 tails: a final slope of -1 eventually violates both bounds.
    for (j, p) in ps.iter().enumerate() {
        if let Some(s) = p.final_slope() {
            if s < 0 {
                v.push(NgViolation {
                    clause: "S2".into(),
                    at: None,
                    detail: format!("P_{} decreases on its final ray", j + 1),
                });
            }
        }
        if j + 1 < n {
            let (a, b) = (ps[j].final_slope(), ps[j + 1].final_slope());
            if let (Some(a), Some(b)) = (a, b) {
                if a > b {
                    v.push(NgViolation {
                        clause: "S1".into(),
                        at: None,
                        detail: format!("P_{} outgrows P_{} on the final ray", j + 1, j + 2),
                    });
                }
            }
        }
    }
    // S2: running max vs current value at breakpoints.
    for (j, p) in ps.iter().enumerate() {
        let mut running: Option<Rat> = None;
        for q in &bks {
            let val = p.eval(q).unwrap();
            if let Some(r) = &running {
                if r > &(&val + gamma) {
                    v.push(NgViolation {
                        clause: "S2".into(),
                        at: Some(rat::fmt_rat(q)),
                        detail: format!("P_{} drops by more than γ before q = {}", j + 1, q),
                    });
                }
            }
            running = Some(match running {
                None => val,
                Some(r) => r.max(val),
            });
        }
    }
    // S5: slope changes 1 -> 0 of M_j, j < n.
    for j in 0..n - 1 {
        for q in sys.m[j].breakpoints() {
            let (sl, sr) = (sys.m[j].slope_left(&q), sys.m[j].slope_right(&q));
            if sl == Some(1) && sr == Some(0) {
                let pj = ps[j].eval(&q).unwrap();
                let pj1 = ps[j + 1].eval(&q).unwrap();
                if pj1 > &pj + gamma {
                    v.push(NgViolation {
                        clause: "S5".into(),
                        at: Some(rat::fmt_rat(&q)),
                        detail: format!(
                            "M_{} switches slope 1→0 at q = {} but P_{} > P_{} + γ",
                            j + 1,
                            q,
                            j + 2,
                            j + 1
                        ),
                    });
                }
            }
        }
    }
    NgReport { violations: v }
}

/// Induce the rigid system of a valid canvas: on each switch interval the
/// components are the pointwise ordering of the n−1 resting coordinates
/// and the one rising line.
pub fn rigid_from_canvas(c: &Canvas) -> Result<RigidSystem, SystemError> {
    let report = validate_canvas(c);
    if !report.ok() {
        return Err(SystemError::InvalidCanvas(format!("{:?}", report.violations)));
    }
    let s = c.steps();
    let switch: Vec<Rat> = (0..s).map(|i| c.switch_number(i)).collect();
    let mut per_comp: Vec<Option<PLFun>> = vec![None; c.n];

    let append = |pieces: Vec<PLFun>, acc: &mut Vec<Option<PLFun>>| {
        for (j, piece) in pieces.into_iter().enumerate() {
            acc[j] = Some(match acc[j].take() {
                None => piece,
                Some(f) => f.concat(&piece).expect("switch continuity"),
            });
        }
    };

    for i in 0..s {
        let qi = &switch[i];
        let last = i + 1 == s;
        let end = if last { None } else { Some(&switch[i + 1]) };
        let ki = c.k[i];
        let mut inputs = Vec::with_capacity(c.n);
        for j in 1..=c.n {
            let f = if j == ki {
                match end {
                    None => PLFun::ray(qi.clone(), c.coord(i, j), 1),
                    Some(e) => PLFun::new(
                        qi.clone(),
                        c.coord(i, j),
                        vec![Seg { len: Some(e - qi), slope: 1 }],
                    ),
                }
            } else {
                match end {
                    None => PLFun::constant(qi.clone(), c.coord(i, j)),
                    Some(e) => PLFun::new(
                        qi.clone(),
                        c.coord(i, j),
                        vec![Seg { len: Some(e - qi), slope: 0 }],
                    ),
                }
            };
            inputs.push(f);
        }
        append(phi_merge(&inputs), &mut per_comp);
    }
    Ok(RigidSystem {
        canvas: c.clone(),
        components: per_comp.into_iter().map(|f| f.unwrap()).collect(),
        switch_numbers: switch,
    })
}

/// Recover the canvas of an (n,0)-system that is rigid of mesh δ, or
/// report the first abscissa where the values fail to be n distinct
/// positive multiples of δ.
pub fn canvas_from_rigid(sys: &NGammaSystem, delta: &Rat) -> Result<Canvas, SystemError> {
    if !sys.gamma.is_zero() {
        return Err(SystemError::InvalidSystem("gamma must be 0".into()));
    }
    let rep = validate_ngamma(sys);
    if !rep.ok() {
        return Err(SystemError::InvalidSystem(format!("{:?}", rep.violations)));
    }
    let n = sys.n;
    let ps = sys.p_components();
    // Candidate switch abscissae: q0 and every 0→1 slope change of any M_j.
    let mut cands: Vec<Rat> = vec![sys.q0().clone()];
    for mj in &sys.m {
        for q in mj.breakpoints() {
            if mj.slope_left(&q) == Some(0) && mj.slope_right(&q) == Some(1) {
                cands.push(q);
            }
        }
    }
    cands.sort();
    cands.dedup();

    let mut points: Vec<Vec<i64>> = Vec::new();
    let mut ks: Vec<usize> = Vec::new();
    let mut ls: Vec<usize> = vec![n];
    for (i, q) in cands.iter().enumerate() {
        let vals: Vec<Rat> = ps.iter().map(|p| p.eval(q).unwrap()).collect();
        let mut row = Vec::with_capacity(n);
        for val in &vals {
            let m = val / delta;
            if !m.is_integer() || m <= Rat::zero() {
                return Err(SystemError::NotRigidAt(
                    rat::fmt_rat(q),
                    format!("value {} is not a positive multiple of δ", val),
                ));
            }
            row.push(num_traits::ToPrimitive::to_i64(&m.to_integer()).ok_or_else(|| {
                SystemError::NotRigidAt(rat::fmt_rat(q), "multiple out of range".into())
            })?);
        }
        for w in row.windows(2) {
            if w[0] >= w[1] {
                return Err(SystemError::NotRigidAt(
                    rat::fmt_rat(q),
                    "values are not n distinct multiples of δ".into(),
                ));
            }
        }
        // k_i: the component rising just after q; ℓ_i (i>=1): rising into q.
        let rising_right = (0..n).find(|&j| {
            ps[j].slope_right(q) == Some(1)
        });
        match rising_right {
            Some(j) => ks.push(j + 1),
            None => {
                return Err(SystemError::NotRigidAt(
                    rat::fmt_rat(q),
                    "no component rises after a switch abscissa".into(),
                ))
            }
        }
        if i >= 1 {
            let rising_left = (0..n).find(|&j| ps[j].slope_left(q) == Some(1));
            match rising_left {
                Some(j) => ls.push(j + 1),
                None => {
                    return Err(SystemError::NotRigidAt(
                        rat::fmt_rat(q),
                        "no component rises into a switch abscissa".into(),
                    ))
                }
            }
        }
        points.push(row);
    }
    let canvas = Canvas {
        n,
        mesh: delta.clone(),
        points,
        k: ks,
        l: ls,
        finite: true,
    };
    let rep = validate_canvas(&canvas);
    if !rep.ok() {
        return Err(SystemError::InvalidSystem(format!(
            "recovered canvas invalid: {:?}",
            rep.violations
        )));
    }
    // The recovered canvas must induce the input exactly; this rules out
    // (n,0)-systems that merely look rigid at the candidate abscissae.
    let induced = rigid_from_canvas(&canvas)?;
    if induced.components != ps {
        return Err(SystemError::InvalidSystem(
            "values between switch numbers do not follow the rigid formula".into(),
        ));
    }
    Ok(canvas)
}

/// The n = 2 self-similar canvas with rows (ρ^i, ρ^{i+1}).
pub fn generate_geometric_canvas(rho: i64, steps: usize, delta: &Rat) -> Canvas {
    assert!(rho >= 2 && steps >= 1);
    let points: Vec<Vec<i64>> = (0..steps)
        .map(|i| vec![rho.pow(i as u32), rho.pow(i as u32 + 1)])
        .collect();
    Canvas {
        n: 2,
        mesh: delta.clone(),
        points,
        k: vec![1; steps],
        l: {
            let mut l = vec![2; steps];
            l[0] = 2;
            l
        },
        finite: false,
    }
}

/// Deterministic random canvas: at each step a legal (ℓ, growth, k)
/// transition is sampled uniformly among canvas-legal moves.
pub fn random_rigid(n: usize, delta: &Rat, steps: usize, seed: u64) -> Canvas {
    assert!(n >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Row 0: strictly increasing values from a small window.
    let mut row0: Vec<i64> = Vec::with_capacity(n);
    let mut next = 1i64;
    for _ in 0..n {
        let v = next + rng.gen_range(0..3);
        row0.push(v);
        next = v + 1;
    }
    let mut points = vec![row0];
    let mut ks = vec![rng.gen_range(1..=n)];
    let mut ls = vec![n];
    for _ in 1..steps.max(1) {
        let row = points.last().unwrap().clone();
        let k_prev = *ks.last().unwrap();
        let mut deleted = row.clone();
        deleted.remove(k_prev - 1);
        // Candidate ℓ values; ℓ = n is always feasible.
        let lo_l = k_prev.max(2);
        let mut cands: Vec<(usize, i64, i64)> = Vec::new(); // (ℓ, lb, ub)
        for l in lo_l..=n {
            let mut lb = row[l - 1] + 1; // C3 growth
            if l >= 2 {
                lb = lb.max(deleted[l - 2] + 1);
            }
            let ub = if l - 1 < deleted.len() {
                deleted[l - 1] - 1
            } else {
                lb + 9
            };
            if lb <= ub {
                cands.push((l, lb, ub));
            }
        }
        let (l, lb, ub) = cands[rng.gen_range(0..cands.len())];
        let v = rng.gen_range(lb..=ub.min(lb + 9));
        let mut new_row = deleted.clone();
        new_row.insert(l - 1, v);
        let k = rng.gen_range(1..l);
        points.push(new_row);
        ks.push(k);
        ls.push(l);
    }
    Canvas { n, mesh: delta.clone(), points, k: ks, l: ls, finite: true }
}

/// Smallest γ at which the system passes S1/S2/S5 (tails must already be
/// monotone; returns None when no finite γ works).
pub fn minimal_gamma(sys: &NGammaSystem) -> Option<Rat> {
    let n = sys.n;
    let ps = sys.p_components();
    // Tail feasibility.
    for (j, p) in ps.iter().enumerate() {
        if let Some(s) = p.final_slope() {
            if s < 0 {
                return None;
            }
        }
        if j + 1 < n {
            if let (Some(a), Some(b)) = (ps[j].final_slope(), ps[j + 1].final_slope()) {
                if a > b {
                    return None;
                }
            }
        }
    }
    let mut bks: Vec<Rat> = sys.m.iter().flat_map(|f| f.breakpoints()).collect();
    bks.sort();
    bks.dedup();
    let mut need = Rat::zero();
    let mut bump = |x: Rat| {
        if x > need {
            need = x;
        }
    };
    for q in &bks {
        for j in 0..n {
            let pj = ps[j].eval(q).unwrap();
            bump(-pj.clone());
            if j + 1 < n {
                bump(&pj - &ps[j + 1].eval(q).unwrap());
            }
        }
    }
    for p in &ps {
        let mut running: Option<Rat> = None;
        for q in &bks {
            let val = p.eval(q).unwrap();
            if let Some(r) = &running {
                bump(r - &val);
            }
            running = Some(match running {
                None => val,
                Some(r) => r.max(val),
            });
        }
    }
    for j in 0..n - 1 {
        for q in sys.m[j].breakpoints() {
            if sys.m[j].slope_left(&q) == Some(1) && sys.m[j].slope_right(&q) == Some(0) {
                bump(ps[j + 1].eval(&q).unwrap() - ps[j].eval(&q).unwrap());
            }
        }
    }
    Some(need)
}

/// Extend an (n,0)-system from [q₀,∞) to [0,∞): on [0,q₀] the components
/// start at zero and rise one at a time up to their values at q₀.
pub fn extend_to_zero(sys: &NGammaSystem) -> Result<NGammaSystem, SystemError> {
    if !sys.gamma.is_zero() {
        return Err(SystemError::InvalidSystem("extension requires γ = 0".into()));
    }
    let q0 = sys.q0().clone();
    if q0.is_zero() {
        return Ok(sys.clone());
    }
    if q0.is_negative() {
        return Err(SystemError::InvalidSystem("domain starts left of 0".into()));
    }
    let n = sys.n;
    // t_i = M_i(q0); on [t_{i-1}, t_i] the i-th component value rises from
    // 0 to P_i(q0) while the others sit at 0,…,0,P_1(q0),…,P_{i-1}(q0).
    let mut t = vec![Rat::zero()];
    for f in &sys.m {
        t.push(f.eval(&q0).map_err(|e| SystemError::InvalidSystem(e.to_string()))?);
    }
    let mut p_at = Vec::with_capacity(n);
    for i in 0..n {
        p_at.push(&t[i + 1] - &t[i]);
    }
    let mut acc: Vec<Option<PLFun>> = vec![None; n];
    for i in 0..n {
        let (a, b) = (&t[i], &t[i + 1]);
        if a == b {
            continue;
        }
        let len = b - a;
        let mut inputs = Vec::with_capacity(n);
        for v in std::iter::repeat(Rat::zero()).take(n - i - 1).chain(p_at[..i].iter().cloned()) {
            inputs.push(PLFun::new(a.clone(), v, vec![Seg { len: Some(len.clone()), slope: 0 }]));
        }
        inputs.push(PLFun::new(a.clone(), Rat::zero(), vec![Seg { len: Some(len.clone()), slope: 1 }]));
        let sorted = phi_merge(&inputs);
        let mut run = PLFun::constant(a.clone(), Rat::zero())
            .restrict(a, Some(b))
            .unwrap();
        for (j, comp) in sorted.iter().enumerate() {
            run = if j == 0 { comp.clone() } else { run.add(comp) };
            acc[j] = Some(match acc[j].take() {
                None => run.clone(),
                Some(f) => f.concat(&run).expect("extension continuity"),
            });
        }
    }
    let mut m = Vec::with_capacity(n);
    for (j, pre) in acc.into_iter().enumerate() {
        let tail = &sys.m[j];
        m.push(match pre {
            None => tail.clone(),
            Some(f) => f.concat(tail).map_err(|e| SystemError::InvalidSystem(e.to_string()))?,
        });
    }
    Ok(NGammaSystem { n, gamma: Rat::zero(), m })
}

/// Jitter the segment lengths of M_1,…,M_{n-1} to produce an
/// (n,γ)-system with small positive γ; gamma is set to the measured
/// minimum.
pub fn perturb_system(base: &NGammaSystem, h: &Rat, seed: u64) -> NGammaSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Vec::with_capacity(base.n);
    for (j, f) in base.m.iter().enumerate() {
        if j + 1 == base.n {
            m.push(f.clone()); // M_n stays the identity
            continue;
        }
        let mut segs = Vec::with_capacity(f.segments.len());
        for s in &f.segments {
            match &s.len {
                None => segs.push(s.clone()),
                Some(l) => {
                    // Shift the right endpoint by a random dyadic in [-h, h],
                    // clamped to keep the length positive.
                    let t = rat::rat_frac(rng.gen_range(-8i64..=8), 8);
                    let d = t * h;
                    let nl = if &(l + &d) > &Rat::zero() { l + &d } else { l.clone() };
                    segs.push(Seg { len: Some(nl), slope: s.slope });
                }
            }
        }
        m.push(PLFun::new(f.q0.clone(), f.v0.clone(), segs));
    }
    let mut sys = NGammaSystem { n: base.n, gamma: Rat::zero(), m };
    sys.gamma = minimal_gamma(&sys).expect("perturbation keeps tails monotone");
    sys
}

pub fn perturb_rigid(r: &RigidSystem, h: &Rat, seed: u64) -> NGammaSystem {
    perturb_system(&r.to_ngamma(), h, seed)
}

/// The Figure-style 5-row example used across tests.
pub fn example_canvas() -> Canvas {
    Canvas {
        n: 5,
        mesh: Rat::from_integer(1.into()),
        points: vec![
            vec![1, 2, 4, 5, 8],
            vec![1, 2, 4, 7, 8],
            vec![1, 4, 5, 7, 8],
        ],
        k: vec![4, 2, 1],
        l: vec![5, 4, 3],
        finite: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plfun::sup_dist;
    use crate::rat::{rat_frac, rat_i64};

    #[test]
    fn example_canvas_validates() {
        assert!(validate_canvas(&example_canvas()).ok());
    }

    #[test]
    fn c1_violation_detected() {
        let mut c = example_canvas();
        c.points[0] = vec![1, 2, 4, 4, 8];
        let rep = validate_canvas(&c);
        assert!(rep.violations.iter().any(|v| v.clause == "C1"));
    }

    #[test]
    fn c3_no_growth_detected() {
        let mut c = example_canvas();
        c.points[1] = vec![1, 2, 4, 5, 8];
        let rep = validate_canvas(&c);
        assert!(rep.violations.iter().any(|v| v.clause == "C3"));
    }

    #[test]
    fn switch_numbers_of_example() {
        let r = rigid_from_canvas(&example_canvas()).unwrap();
        assert_eq!(r.switch_numbers, vec![rat_i64(20), rat_i64(22), rat_i64(25)]);
    }

    #[test]
    fn example_eval_inside_first_interval() {
        let r = rigid_from_canvas(&example_canvas()).unwrap();
        let vals = r.eval(&rat_i64(21)).unwrap();
        let expect: Vec<Rat> = [1, 2, 4, 6, 8].iter().map(|&x| rat_i64(x)).collect();
        assert_eq!(vals, expect);
    }

    #[test]
    fn example_eval_at_switch_equals_row() {
        let r = rigid_from_canvas(&example_canvas()).unwrap();
        let vals = r.eval(&rat_i64(25)).unwrap();
        let expect: Vec<Rat> = [1, 4, 5, 7, 8].iter().map(|&x| rat_i64(x)).collect();
        assert_eq!(vals, expect);
    }

    #[test]
    fn sum_identity_exact() {
        let r = rigid_from_canvas(&example_canvas()).unwrap();
        for k in 0..200 {
            let q = rat_i64(20) + rat_frac(k, 7);
            let s: Rat = r.eval(&q).unwrap().into_iter().sum();
            assert_eq!(s, q);
        }
    }

    #[test]
    fn rigid_system_is_n0_system() {
        let r = rigid_from_canvas(&example_canvas()).unwrap();
        let sys = r.to_ngamma();
        let rep = validate_ngamma(&sys);
        assert!(rep.ok(), "{:?}", rep.violations);
    }

    #[test]
    fn s4_violation_detected() {
        let r = rigid_from_canvas(&example_canvas()).unwrap();
        let mut sys = r.to_ngamma();
        sys.m[4] = PLFun::constant(rat_i64(20), rat_i64(20));
        assert!(validate_ngamma(&sys)
            .violations
            .iter()
            .any(|v| v.clause == "S4"));
    }

    #[test]
    fn round_trip_canvas() {
        let c = example_canvas();
        let r = rigid_from_canvas(&c).unwrap();
        let back = canvas_from_rigid(&r.to_ngamma(), &rat_i64(1)).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn round_trip_with_refined_mesh() {
        let c = example_canvas();
        let r = rigid_from_canvas(&c).unwrap();
        let back = canvas_from_rigid(&r.to_ngamma(), &rat_frac(1, 2)).unwrap();
        assert_eq!(back, c.refine_mesh(2));
        // The refined canvas induces the identical system.
        let r2 = rigid_from_canvas(&back).unwrap();
        assert_eq!(r2.components, r.components);
    }

    #[test]
    fn non_multiple_rejected() {
        // A (2,0)-system with P(q0) = (1, 3/2) is not rigid of mesh 1.
        let q0 = rat_frac(5, 2);
        let p1 = PLFun::constant(q0.clone(), rat_i64(1));
        let m2 = PLFun::identity(q0.clone());
        let sys = NGammaSystem { n: 2, gamma: Rat::zero(), m: vec![p1, m2] };
        match canvas_from_rigid(&sys, &rat_i64(1)) {
            Err(SystemError::NotRigidAt(q, _)) => assert_eq!(q, "5/2"),
            other => panic!("expected rigidity rejection, got {other:?}"),
        }
    }

    #[test]
    fn geometric_canvas() {
        let c = generate_geometric_canvas(2, 3, &rat_i64(1));
        assert!(validate_canvas(&c).ok());
        assert_eq!(c.points, vec![vec![1, 2], vec![2, 4], vec![4, 8]]);
        let r = rigid_from_canvas(&c).unwrap();
        assert_eq!(r.switch_numbers, vec![rat_i64(3), rat_i64(6), rat_i64(12)]);
    }

    #[test]
    fn random_rigid_validates_and_is_deterministic() {
        for seed in 0..20 {
            for n in 2..=6 {
                let c = random_rigid(n, &rat_i64(1), 15, seed);
                assert!(validate_canvas(&c).ok(), "seed {seed} n {n}");
                assert_eq!(c, random_rigid(n, &rat_i64(1), 15, seed));
            }
        }
    }

    #[test]
    fn random_rigid_sum_identity_and_round_trip() {
        for seed in [1u64, 7, 42] {
            let c = random_rigid(4, &rat_i64(1), 30, seed);
            let r = rigid_from_canvas(&c).unwrap();
            for i in 0..r.switch_numbers.len() {
                let q = r.switch_numbers[i].clone();
                let s: Rat = r.eval(&q).unwrap().into_iter().sum();
                assert_eq!(s, q);
            }
            let back = canvas_from_rigid(&r.to_ngamma(), &rat_i64(1)).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn perturbed_system_needs_positive_gamma() {
        // (2,0)-system: M_1 flat on [0,2], rises on [2,4], flat after.
        // Delaying the rise by 1/4 keeps slopes {0,1} but now violates
        // S5 at the 1→0 switch unless γ >= 1/4.
        let seg = |len: i64, slope: i64| crate::plfun::Seg { len: Some(rat_i64(len)), slope };
        let m2 = PLFun::identity(rat_i64(0));
        let m1 = PLFun::new(
            rat_i64(0),
            rat_i64(0),
            vec![seg(2, 0), seg(2, 1), crate::plfun::Seg { len: None, slope: 0 }],
        );
        let base = NGammaSystem { n: 2, gamma: Rat::zero(), m: vec![m1, m2.clone()] };
        assert!(validate_ngamma(&base).ok());

        let m1_shift = PLFun::new(
            rat_i64(0),
            rat_i64(0),
            vec![
                crate::plfun::Seg { len: Some(rat_frac(9, 4)), slope: 0 },
                seg(2, 1),
                crate::plfun::Seg { len: None, slope: 0 },
            ],
        );
        let mut pert = NGammaSystem { n: 2, gamma: Rat::zero(), m: vec![m1_shift, m2] };
        let rep0 = validate_ngamma(&pert);
        assert!(rep0.violations.iter().any(|v| v.clause == "S5"), "{:?}", rep0.violations);
        pert.gamma = rat_frac(1, 2);
        assert!(validate_ngamma(&pert).ok());
    }

    #[test]
    fn canvas_json_round_trip() {
        let c = example_canvas();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"mesh\":\"1\""));
        let back: Canvas = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn final_ray_single_slope_one() {
        let r = rigid_from_canvas(&example_canvas()).unwrap();
        let q_last = r.switch_numbers.last().unwrap();
        let rising: Vec<usize> = (0..5)
            .filter(|&j| r.components[j].final_slope() == Some(1))
            .collect();
        assert_eq!(rising.len(), 1);
        // Sum of final slopes is 1 beyond the last switch number.
        let s: i64 = r
            .components
            .iter()
            .map(|f| f.slope_right(&(q_last + rat_i64(1))).unwrap())
            .sum();
        assert_eq!(s, 1);
    }

    #[test]
    fn sup_dist_p1_constant_on_example() {
        let r = rigid_from_canvas(&example_canvas()).unwrap();
        let one = PLFun::constant(rat_i64(20), rat_i64(1));
        match sup_dist(&r.components[0], &one, &rat_i64(20), Some(&rat_i64(25))).unwrap() {
            crate::plfun::SupDist::Finite { value, .. } => assert_eq!(value, rat_i64(0)),
            _ => panic!(),
        }
    }
}
