//! Approximation of reduced (n,γ)-systems by rigid integer systems.
//!
//! Pipeline (in mesh-1 units): shift the running suprema of the
//! components by γ, quantize them into strictly increasing integer step
//! functions E_1 < … < E_n, then read a canvas off the clusters of jump
//! points.  The induced rigid system stays within 3n² of the input.

use crate::plfun::PLFun;
use crate::rat::{self, Rat};
use crate::reduce::is_reduced;
use crate::systems::{rigid_from_canvas, validate_ngamma, Canvas, NGammaSystem, RigidSystem};
use num::{Signed, Zero};
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RigidifyError {
    #[error("input failed (n,γ)-system validation: {0}")]
    InvalidInput(String),
    #[error("input is not (n,γ)-reduced: {0}")]
    NotReduced(String),
    #[error("domain must start at 0")]
    DomainStart,
    #[error("mesh precondition violated: need γ < δ/(2n²)")]
    MeshPrecondition,
    #[error("horizon too small: no full jump cluster inside it")]
    HorizonTooSmall,
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("assembled canvas rejected: {0}")]
    Canvas(String),
}

/// Right-continuous integer step function with unit jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    #[serde(with = "rat::serde_str")]
    pub q: Rat,
    pub value: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFun {
    #[serde(with = "rat::serde_str")]
    pub start: Rat,
    pub init: i64,
    pub jumps: Vec<Jump>,
}

impl StepFun {
    pub fn eval(&self, q: &Rat) -> i64 {
        let idx = self.jumps.partition_point(|j| &j.q <= q);
        if idx == 0 {
            self.init
        } else {
            self.jumps[idx - 1].value
        }
    }

    /// Left limit: value just before `q`.
    pub fn eval_left(&self, q: &Rat) -> i64 {
        let idx = self.jumps.partition_point(|j| &j.q < q);
        if idx == 0 {
            self.init
        } else {
            self.jumps[idx - 1].value
        }
    }

    fn shift_value(&self, d: i64) -> StepFun {
        StepFun {
            start: self.start.clone(),
            init: self.init + d,
            jumps: self.jumps.iter().map(|j| Jump { q: j.q.clone(), value: j.value + d }).collect(),
        }
    }
}

/// `q ↦ ⌊f(q)⌋ + 1` for a non-decreasing PL function with slopes {0,1},
/// with jumps enumerated up to `limit`.
fn floor_plus_one(f: &PLFun, limit: &Rat) -> StepFun {
    let mut level = rat::floor_int(&f.v0).to_i64().expect("small integer values");
    let init = level + 1;
    let mut jumps = Vec::new();
    let mut q = f.q0.clone();
    let mut v = f.v0.clone();
    for s in &f.segments {
        if s.slope == 1 {
            let v_end = s.len.as_ref().map(|l| &v + l);
            loop {
                let m = level + 1;
                if let Some(ve) = &v_end {
                    if &rat::rat_i64(m) > ve {
                        break;
                    }
                }
                let pos = &q + (rat::rat_i64(m) - &v);
                if &pos > limit {
                    return StepFun { start: f.q0.clone(), init, jumps };
                }
                jumps.push(Jump { q: pos, value: m + 1 });
                level = m;
            }
            if let Some(ve) = v_end {
                v = ve;
            }
        }
        match &s.len {
            None => break,
            Some(l) => q += l,
        }
    }
    StepFun { start: f.q0.clone(), init, jumps }
}

/// Pointwise max of two step functions over a common start.
fn max_step(a: &StepFun, b: &StepFun) -> StepFun {
    let mut qs: Vec<Rat> =
        a.jumps.iter().chain(b.jumps.iter()).map(|j| j.q.clone()).collect();
    qs.sort();
    qs.dedup();
    let init = a.init.max(b.init);
    let mut cur = init;
    let mut jumps = Vec::new();
    for q in qs {
        let v = a.eval(&q).max(b.eval(&q));
        if v > cur {
            jumps.push(Jump { q, value: v });
            cur = v;
        }
    }
    StepFun { start: a.start.clone(), init, jumps }
}

/// P̄_j = γ + running sup of P_j on [0, ·].
pub fn running_sup_shift(p: &NGammaSystem) -> Vec<PLFun> {
    p.p_components()
        .iter()
        .map(|f| f.running_max().add_const(&p.gamma))
        .collect()
}

/// E_1 = ⌊P̄_1⌋+1, E_j = max{E_{j-1}+1, ⌊P̄_j − 2(j−1)γ⌋+1}; jumps are
/// enumerated up to `limit`.
pub fn quantize(pbar: &[PLFun], gamma: &Rat, limit: &Rat) -> Vec<StepFun> {
    let mut es: Vec<StepFun> = Vec::with_capacity(pbar.len());
    for (j0, pb) in pbar.iter().enumerate() {
        let g = pb.add_const(&(-rat::rat_i64(2 * j0 as i64) * gamma));
        let fl = floor_plus_one(&g, limit);
        let e = match es.last() {
            None => fl,
            Some(prev) => max_step(&prev.shift_value(1), &fl),
        };
        es.push(e);
    }
    es
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    #[serde(with = "rat::serde_str")]
    pub c: Rat,
    #[serde(with = "rat::serde_str")]
    pub d: Rat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaInfo {
    /// 1-based indices j for which E_j jumps inside this component.
    pub indices: Vec<usize>,
    /// Maximal runs of consecutive indices with consecutive values,
    /// ordered so that each block sits above the next.
    pub blocks: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RigidifyTrace {
    /// Everything below is in mesh-1 units (input rescaled by 1/δ).
    pub pbar: Vec<PLFun>,
    pub e: Vec<StepFun>,
    #[serde(with = "rat::serde_vec")]
    pub sigma: Vec<Rat>,
    pub components: Vec<Component>,
    pub omega: Vec<OmegaInfo>,
    /// Retained (k_i, ℓ_i) pairs of the assembled canvas.
    pub kl: Vec<(usize, usize)>,
    /// t_i = E_1(c_i)+⋯+E_n(c_i) per retained component.
    #[serde(with = "rat::serde_vec")]
    pub t: Vec<Rat>,
}

pub struct AssembleOut {
    pub canvas: Canvas,
    pub sigma: Vec<Rat>,
    pub components: Vec<Component>,
    pub omega: Vec<OmegaInfo>,
    pub kl: Vec<(usize, usize)>,
    pub t: Vec<Rat>,
    pub safe_horizon: Rat,
}

/// Build a mesh-1 canvas from the quantized step functions, keeping only
/// jump clusters fully inside the horizon.
pub fn assemble_canvas(
    e: &[StepFun],
    gamma: &Rat,
    horizon: &Rat,
) -> Result<AssembleOut, RigidifyError> {
    let n = e.len();
    let ngam = rat::rat_i64(n as i64) * gamma;
    let mut sigma: Vec<Rat> = e.iter().flat_map(|f| f.jumps.iter().map(|j| j.q.clone())).collect();
    sigma.sort();
    sigma.dedup();
    if sigma.is_empty() {
        return Err(RigidifyError::HorizonTooSmall);
    }
    // Connected components of Σ + [−nγ, nγ]: cluster points with gap ≤ 2nγ.
    let two_ngam = rat::rat_i64(2) * &ngam;
    let mut components = Vec::new();
    let mut first = sigma[0].clone();
    let mut last = sigma[0].clone();
    for q in sigma.iter().skip(1) {
        if q - &last <= two_ngam {
            last = q.clone();
        } else {
            components.push(Component { c: &first - &ngam, d: &last + &ngam });
            first = q.clone();
            last = q.clone();
        }
    }
    components.push(Component { c: &first - &ngam, d: &last + &ngam });
    components.retain(|comp| &comp.d <= horizon);
    if components.is_empty() {
        return Err(RigidifyError::HorizonTooSmall);
    }

    let mut omega = Vec::with_capacity(components.len());
    let mut t = Vec::with_capacity(components.len());
    // Global block sequence with, per block, the component it came from.
    let mut blocks_flat: Vec<Vec<usize>> = Vec::new();
    let mut first_block_of_comp = Vec::with_capacity(components.len());
    for comp in &components {
        let mut indices = Vec::new();
        for (j0, f) in e.iter().enumerate() {
            let cnt =
                f.jumps.iter().filter(|j| j.q >= comp.c && j.q <= comp.d).count();
            if cnt > 1 {
                return Err(RigidifyError::Invariant(format!(
                    "E_{} jumps {} times inside one cluster",
                    j0 + 1,
                    cnt
                )));
            }
            if cnt == 1 {
                indices.push(j0 + 1);
            }
        }
        if indices.is_empty() {
            return Err(RigidifyError::Invariant("empty cluster".into()));
        }
        let val = |j: usize| e[j - 1].eval_left(&comp.c);
        for &j in &indices {
            if e[j - 1].eval(&comp.d) != val(j) + 1 {
                return Err(RigidifyError::Invariant(format!(
                    "E_{} jump inside a cluster is not +1",
                    j
                )));
            }
        }
        // Ascending runs of consecutive indices with consecutive values.
        let mut runs: Vec<Vec<usize>> = Vec::new();
        for &j in &indices {
            match runs.last_mut() {
                Some(run)
                    if *run.last().unwrap() + 1 == j && val(*run.last().unwrap()) + 1 == val(j) =>
                {
                    run.push(j)
                }
                _ => runs.push(vec![j]),
            }
        }
        runs.reverse(); // min of each block exceeds max of the next
        t.push(
            (1..=n)
                .map(|j| rat::rat_i64(e[j - 1].eval_left(&comp.c)))
                .fold(Rat::zero(), |a, b| a + b),
        );
        first_block_of_comp.push(blocks_flat.len());
        omega.push(OmegaInfo { indices, blocks: runs.clone() });
        blocks_flat.extend(runs);
    }
    // Reduced inputs guarantee that consecutive clusters overlap in index
    // range: max(last block of i) ≥ min(first block of i+1).
    for w in 0..components.len().saturating_sub(1) {
        let li = *omega[w].blocks.last().unwrap().iter().max().unwrap();
        let ki = *omega[w + 1].blocks.first().unwrap().iter().min().unwrap();
        if li < ki {
            return Err(RigidifyError::Invariant(format!(
                "cluster {} ends at index {} below the start {} of cluster {}",
                w,
                li,
                ki,
                w + 1
            )));
        }
    }

    // Rows: a^(0) = E(c_0) = (1,…,n); each block bumps its indices by 1.
    let row0: Vec<i64> = (1..=n).map(|j| e[j - 1].eval_left(&components[0].c)).collect();
    if row0 != (1..=n as i64).collect::<Vec<_>>() {
        return Err(RigidifyError::Invariant(format!("first row is {:?}, not (1..n)", row0)));
    }
    let nb = blocks_flat.len();
    let mut rows = vec![row0];
    for b in &blocks_flat {
        let mut r = rows.last().unwrap().clone();
        for &j in b {
            r[j - 1] += 1;
        }
        rows.push(r);
    }
    // k_i = min Ω_i, ℓ_{i+1} = max Ω_i, ℓ_0 = n; the final row gets k = 1
    // so that C2 can hold (or is dropped when its ℓ is 1).
    let mut k_raw: Vec<usize> = blocks_flat.iter().map(|b| *b.iter().min().unwrap()).collect();
    let mut l_raw = vec![n];
    l_raw.extend(blocks_flat.iter().map(|b| *b.iter().max().unwrap()));
    k_raw.push(1);
    let mut keep = Vec::new();
    for i in 0..=nb {
        let retain = i == 0 || (k_raw[i] < l_raw[i] && (i < nb || l_raw[i] >= 2));
        if retain {
            keep.push(i);
        }
    }
    let canvas = Canvas {
        n,
        mesh: rat::rat_i64(1),
        points: keep.iter().map(|&i| rows[i].clone()).collect(),
        k: keep.iter().map(|&i| k_raw[i]).collect(),
        l: keep.iter().map(|&i| l_raw[i]).collect(),
        finite: true,
    };
    let kl = canvas.k.iter().cloned().zip(canvas.l.iter().cloned()).collect();
    let safe_horizon = t.last().unwrap().clone();
    Ok(AssembleOut { canvas, sigma, components, omega, kl, t, safe_horizon })
}

pub struct RigidifyOutput {
    pub canvas: Canvas,
    pub system: RigidSystem,
    /// Largest abscissa (input units) up to which the 3n²δ bound is
    /// certified; beyond it the canvas is extrapolated.
    pub safe_horizon: Rat,
    pub trace: RigidifyTrace,
}

/// Approximate a reduced (n,γ)-system on [0,∞) by a rigid system of mesh
/// δ within 3n²δ on [n(n+1)δ/2, safe_horizon].
pub fn rigidify(
    p: &NGammaSystem,
    delta: &Rat,
    horizon: &Rat,
) -> Result<RigidifyOutput, RigidifyError> {
    let n = p.n;
    if !delta.is_positive() {
        return Err(RigidifyError::MeshPrecondition);
    }
    let rep = validate_ngamma(p);
    if !rep.ok() {
        return Err(RigidifyError::InvalidInput(format!("{:?}", rep.violations)));
    }
    if !p.q0().is_zero() {
        return Err(RigidifyError::DomainStart);
    }
    if &(rat::rat_i64(2 * (n * n) as i64) * &p.gamma) >= delta {
        return Err(RigidifyError::MeshPrecondition);
    }
    let red = is_reduced(p, &p.gamma);
    if !red.ok() {
        return Err(RigidifyError::NotReduced(format!("{:?}", red.violations)));
    }
    // Rescale to mesh-1 units.
    let hat = NGammaSystem {
        n,
        gamma: &p.gamma / delta,
        m: p.m.iter().map(|f| f.rescale(delta)).collect(),
    };
    let horizon_hat = horizon / delta;
    let pbar = running_sup_shift(&hat);
    let limit = &horizon_hat + rat::rat_i64(2);
    let e = quantize(&pbar, &hat.gamma, &limit);
    let asm = assemble_canvas(&e, &hat.gamma, &horizon_hat)?;
    let mut canvas = asm.canvas;
    canvas.mesh = delta.clone();
    let system =
        rigid_from_canvas(&canvas).map_err(|e| RigidifyError::Canvas(e.to_string()))?;
    Ok(RigidifyOutput {
        canvas,
        system,
        safe_horizon: asm.safe_horizon * delta,
        trace: RigidifyTrace {
            pbar,
            e,
            sigma: asm.sigma,
            components: asm.components,
            omega: asm.omega,
            kl: asm.kl,
            t: asm.t,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plfun::{sup_dist, SupDist};
    use crate::rat::{rat_frac, rat_i64};
    use crate::reduce::reduce;
    use crate::systems::{extend_to_zero, perturb_system, random_rigid, rigid_from_canvas};

    fn flat_system(n: usize, seed: u64) -> NGammaSystem {
        let c = random_rigid(n, &rat_i64(1), 14, seed);
        let sys = rigid_from_canvas(&c).unwrap().to_ngamma();
        extend_to_zero(&sys).unwrap()
    }

    #[test]
    fn extension_is_valid_n0_system() {
        for seed in 0..10 {
            let sys = flat_system(3, seed);
            assert!(sys.q0().is_zero());
            assert!(validate_ngamma(&sys).ok(), "seed {seed}");
        }
    }

    #[test]
    fn pbar_extremes_match() {
        let sys = flat_system(3, 2);
        let pbar = running_sup_shift(&sys);
        let ps = sys.p_components();
        assert_eq!(pbar[0], ps[0].add_const(&sys.gamma));
        assert_eq!(pbar[2], ps[2].add_const(&sys.gamma));
    }

    #[test]
    fn pbar_sandwich_on_reduced_inputs() {
        for seed in 0..10u64 {
            let base = flat_system(3, seed);
            let pert = perturb_system(&base, &rat_frac(1, 512), seed);
            let (red, _) = reduce(&pert).unwrap();
            let pbar = running_sup_shift(&red);
            let ps = red.p_components();
            let two_gamma = rat_i64(2) * &red.gamma;
            for (pb, p) in pbar.iter().zip(&ps) {
                for q in pb.breakpoints().iter().chain(p.breakpoints().iter()) {
                    let hi = pb.eval(q).unwrap();
                    let lo = p.eval(q).unwrap();
                    assert!(hi >= &lo + &red.gamma);
                    assert!(hi <= &lo + &two_gamma, "P̄ too far above P at {q}");
                }
            }
        }
    }

    #[test]
    fn e_starts_at_identity_tuple() {
        let sys = flat_system(4, 7);
        let pbar = running_sup_shift(&sys);
        let e = quantize(&pbar, &sys.gamma, &rat_i64(50));
        for q in [rat_i64(0), rat_frac(1, 4), rat_frac(1, 2)] {
            let vals: Vec<i64> = e.iter().map(|f| f.eval(&q)).collect();
            assert_eq!(vals, vec![1, 2, 3, 4], "at {q}");
        }
    }

    #[test]
    fn e_tracks_p_within_n_plus_one() {
        for seed in 0..10u64 {
            let sys = flat_system(3, seed);
            let pbar = running_sup_shift(&sys);
            let e = quantize(&pbar, &sys.gamma, &rat_i64(62));
            let ps = sys.p_components();
            let bound = rat_i64(sys.n as i64 + 1);
            let mut q = Rat::zero();
            while q <= rat_i64(60) {
                for (f, p) in e.iter().zip(&ps) {
                    let d = (rat_i64(f.eval(&q)) - p.eval(&q).unwrap()).abs();
                    assert!(d <= bound, "seed {seed} at {q}: gap {d}");
                }
                q += rat_frac(1, 3);
            }
        }
    }

    #[test]
    fn e_sum_stays_near_q() {
        let sys = flat_system(4, 3);
        let pbar = running_sup_shift(&sys);
        let e = quantize(&pbar, &sys.gamma, &rat_i64(60));
        let bound = rat_i64((sys.n * (sys.n + 1)) as i64);
        let mut qs: Vec<Rat> = e.iter().flat_map(|f| f.jumps.iter().map(|j| j.q.clone())).collect();
        qs.push(Rat::zero());
        for q in qs {
            if q > rat_i64(58) {
                continue;
            }
            for v in [
                e.iter().map(|f| rat_i64(f.eval(&q))).fold(Rat::zero(), |a, b| a + b),
                e.iter().map(|f| rat_i64(f.eval_left(&q))).fold(Rat::zero(), |a, b| a + b),
            ] {
                assert!((&v - &q).abs() <= bound, "sum {v} vs q {q}");
            }
        }
    }

    #[test]
    fn rigidify_n0_within_bound() {
        for seed in 0..8u64 {
            let sys = flat_system(3, seed);
            let n = sys.n as i64;
            let out = rigidify(&sys, &rat_i64(1), &rat_i64(60)).unwrap();
            let q0 = rat_frac(n * (n + 1), 2);
            assert_eq!(out.system.q0(), &q0);
            // Zero-gamma clusters are single points.
            for comp in &out.trace.components {
                assert_eq!(comp.c, comp.d);
            }
            assert_eq!(out.trace.t[0], q0);
            let bound = rat_i64(3 * n * n);
            let rsys = out.system.to_ngamma();
            for (pj, rj) in sys.p_components().iter().zip(rsys.p_components().iter()) {
                match sup_dist(pj, rj, &q0, Some(&out.safe_horizon)).unwrap() {
                    SupDist::Finite { value, at } => {
                        assert!(value <= bound, "seed {seed}: {value} at {at}")
                    }
                    SupDist::Infinite => panic!(),
                }
            }
        }
    }

    #[test]
    fn rigidify_interpolates_e_at_cluster_sums() {
        let sys = flat_system(3, 5);
        let out = rigidify(&sys, &rat_i64(1), &rat_i64(60)).unwrap();
        for (ti, comp) in out.trace.t.iter().zip(&out.trace.components) {
            let want: Vec<Rat> =
                out.trace.e.iter().map(|f| rat_i64(f.eval_left(&comp.c))).collect();
            let got = out.system.eval(ti).unwrap();
            assert_eq!(got, want, "R(t_i) != E(c_i) at {ti}");
        }
    }

    #[test]
    fn rigidify_perturbed_reduced_inputs() {
        for seed in 0..8u64 {
            let base = flat_system(3, seed);
            let pert = perturb_system(&base, &rat_frac(1, 4096), seed + 50);
            let (red, _) = reduce(&pert).unwrap();
            let n = red.n as i64;
            assert!(
                &red.gamma * rat_i64(2 * n * n) < rat_i64(1),
                "seed {seed}: gamma {} too big for mesh 1",
                red.gamma
            );
            let out = rigidify(&red, &rat_i64(1), &rat_i64(60)).unwrap();
            let q0 = rat_frac(n * (n + 1), 2);
            let bound = rat_i64(3 * n * n);
            let rsys = out.system.to_ngamma();
            for (pj, rj) in red.p_components().iter().zip(rsys.p_components().iter()) {
                match sup_dist(pj, rj, &q0, Some(&out.safe_horizon)).unwrap() {
                    SupDist::Finite { value, .. } => assert!(value <= bound, "seed {seed}"),
                    SupDist::Infinite => panic!(),
                }
            }
        }
    }

    #[test]
    fn scale_equivariance() {
        let sys = flat_system(3, 9);
        let two = rat_i64(2);
        let coarse = rigidify(&sys, &two, &rat_i64(120)).unwrap();
        let hat = NGammaSystem {
            n: sys.n,
            gamma: Rat::zero(),
            m: sys.m.iter().map(|f| f.rescale(&two)).collect(),
        };
        let fine = rigidify(&hat, &rat_i64(1), &rat_i64(60)).unwrap();
        assert_eq!(coarse.canvas.points, fine.canvas.points);
        assert_eq!(coarse.canvas.k, fine.canvas.k);
        assert_eq!(coarse.canvas.l, fine.canvas.l);
        assert_eq!(coarse.canvas.mesh, two);
        assert_eq!(coarse.safe_horizon, fine.safe_horizon * &two);
    }

    #[test]
    fn rejects_bad_preconditions() {
        let sys = flat_system(3, 1);
        // Domain not starting at 0.
        let c = random_rigid(3, &rat_i64(1), 8, 1);
        let raw = rigid_from_canvas(&c).unwrap().to_ngamma();
        assert!(matches!(
            rigidify(&raw, &rat_i64(1), &rat_i64(60)),
            Err(RigidifyError::DomainStart)
        ));
        // Mesh too small for the gamma.
        let fat = NGammaSystem { n: sys.n, gamma: rat_i64(1), m: sys.m.clone() };
        assert!(matches!(
            rigidify(&fat, &rat_i64(1), &rat_i64(60)),
            Err(RigidifyError::MeshPrecondition)
        ));
        // Horizon inside the flat initial stretch.
        assert!(matches!(
            rigidify(&sys, &rat_i64(1), &rat_i64(1)),
            Err(RigidifyError::HorizonTooSmall)
        ));
    }
}
