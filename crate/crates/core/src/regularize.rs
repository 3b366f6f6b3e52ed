//! Energy-increment regularity lemmas, the regular model and regularity
//! recoloring. Every public entry point measures its own conclusions on the
//! output before returning it.

use std::collections::BTreeMap;

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{
    coset_energy, decomp_initial, decomp_refine, energy, increment_from_norm, Decomposition,
    Partition,
};
use crate::error::{Error, Result};
use crate::fourier::{forward, regularity_norm_of, RegularityNorm};
use crate::space::{Coloring, DenseFunction, Space};
use crate::subspace::Subspace;
use crate::TOL;

pub const DEFAULT_RETRY_CAP: usize = 64;

/// Smallest `c ≥ 0` with `p^c ≥ x`.
pub fn ceil_log(p: u32, x: f64) -> usize {
    let mut c = 0;
    let mut acc = 1.0f64;
    while acc < x - TOL {
        acc *= p as f64;
        c += 1;
    }
    c
}

/// Mean and regularity norm of every function on one coset.
#[derive(Clone, Debug)]
struct CosetScan {
    rep: usize,
    means: Vec<f64>,
    norms: Vec<RegularityNorm>,
}

fn scan_one(space: &Space, fs: &[&DenseFunction], rep: usize, w: &Subspace) -> CosetScan {
    let sub = space.sibling(w.dim()).expect("subspace of a valid space");
    let idx = space.coset_indices(rep, w);
    let mut means = Vec::with_capacity(fs.len());
    let mut norms = Vec::with_capacity(fs.len());
    for f in fs {
        let g = f.gather(sub, &idx);
        let s = forward(&g);
        means.push(s.get(0).re);
        norms.push(regularity_norm_of(&s));
    }
    CosetScan { rep, means, norms }
}

fn scan_cosets(
    space: &Space,
    fs: &[&DenseFunction],
    reps: &[usize],
    w: &Subspace,
) -> Vec<CosetScan> {
    reps.par_iter()
        .map(|&rep| scan_one(space, fs, rep, w))
        .collect()
}

fn check_inputs(fs: &[&DenseFunction], subspaces: &[&Subspace]) -> Result<Space> {
    let Some(first) = fs.first() else {
        return Err(Error::InvalidInput("at least one function required".into()));
    };
    let space = *first.space();
    if fs.iter().any(|f| *f.space() != space) {
        return Err(Error::DimensionMismatch(
            "functions on different spaces".into(),
        ));
    }
    for s in subspaces {
        space.check_subspace(s)?;
    }
    Ok(space)
}

fn check_eps(name: &str, eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput(format!(
            "{name} must be positive, got {eps}"
        )));
    }
    Ok(())
}

/// Fractions of cosets of `w` on which each `f_i` fails to be `eps`-regular.
fn bad_fractions(scans: &[CosetScan], k: usize, eps: f64) -> Vec<f64> {
    (0..k)
        .map(|i| {
            let bad = scans.iter().filter(|s| !s.norms[i].is_regular(eps)).count();
            bad as f64 / scans.len() as f64
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Green's lemma

#[derive(Clone, Debug, Serialize)]
pub struct GreenRound {
    pub codim: usize,
    pub energy: f64,
    pub bad_fractions: Vec<f64>,
    /// Function whose bad cosets supplied the cuts (absent on the final round).
    pub cut_function: Option<usize>,
    pub cuts: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GreenResult {
    pub v1: Subspace,
    pub rounds: Vec<GreenRound>,
    /// Measured bad-coset fraction per function for the returned `v1`.
    pub bad_fractions: Vec<f64>,
}

/// Whether, for each `i`, at most an `eps`-fraction of cosets `x + w` carry an
/// `eps`-irregular `f_i`. Returns the measured fractions.
pub fn verify_green(fs: &[&DenseFunction], w: &Subspace, eps: f64) -> Result<(bool, Vec<f64>)> {
    let space = check_inputs(fs, &[w])?;
    let reps = space.coset_reps(w);
    let scans = scan_cosets(&space, fs, &reps, w);
    let fr = bad_fractions(&scans, fs.len(), eps);
    let ok = fr.iter().all(|&f| f <= eps + TOL);
    Ok((ok, fr))
}

/// Green's arithmetic regularity lemma by energy increment, starting at `v0`.
pub fn green_regularize(fs: &[&DenseFunction], v0: &Subspace, eps: f64) -> Result<GreenResult> {
    check_eps("eps", eps)?;
    let space = check_inputs(fs, &[v0])?;
    let k = fs.len();
    let mut vm = v0.clone();
    let mut rounds = Vec::new();
    loop {
        let reps = space.coset_reps(&vm);
        let scans = scan_cosets(&space, fs, &reps, &vm);
        let fr = bad_fractions(&scans, k, eps);
        let e_now = coset_energy(&space, &vm, fs);
        let failing = fr.iter().position(|&f| f > eps + TOL);
        let Some(i) = failing else {
            rounds.push(GreenRound {
                codim: vm.codim(),
                energy: e_now,
                bad_fractions: fr.clone(),
                cut_function: None,
                cuts: 0,
            });
            return Ok(GreenResult {
                v1: vm,
                rounds,
                bad_fractions: fr,
            });
        };
        if vm.dim() == 0 {
            return Err(Error::SpaceExhausted(
                "green: irregular cosets of the zero subspace".into(),
            ));
        }
        let sub = space.sibling(vm.dim())?;
        let mut duals = Vec::new();
        for s in scans.iter().filter(|s| !s.norms[i].is_regular(eps)) {
            let g = fs[i].gather(sub, &space.coset_indices(s.rep, &vm));
            let inc = increment_from_norm(&g, eps, s.norms[i])?
                .expect("irregular coset yields an increment");
            duals.push(sub.decode(inc.z));
        }
        let next = vm.cut_by(&duals);
        let e_next = coset_energy(&space, &next, fs);
        let gain = e_next - e_now;
        debug!(
            "green: codim {} -> {}, gain {gain:.3e}",
            vm.codim(),
            next.codim()
        );
        if gain <= eps.powi(3) - TOL {
            return Err(Error::VerifierFailed(format!(
                "green: round gain {gain} does not exceed eps^3 = {}",
                eps.powi(3)
            )));
        }
        rounds.push(GreenRound {
            codim: vm.codim(),
            energy: e_now,
            bad_fractions: fr,
            cut_function: Some(i),
            cuts: duals.len(),
        });
        vm = next;
    }
}

// ---------------------------------------------------------------------------
// Strong regularity

#[derive(Clone, Debug, Serialize)]
pub struct StrongResult {
    pub v1: Subspace,
    pub v2: Subspace,
    /// Energies of `P(V^{(0)}), P(V^{(1)}), …`.
    pub energies: Vec<f64>,
    pub codims: Vec<usize>,
    /// Regularity parameter `ε_{codim V_1}` used for the last step.
    pub eps_final: f64,
    pub bad_fractions: Vec<f64>,
}

/// Strong arithmetic regularity: iterates Green's lemma with parameter
/// `eps_seq(codim)` until the energy gap drops to `delta`.
pub fn strong_regularize(
    fs: &[&DenseFunction],
    v0: &Subspace,
    delta: f64,
    eps_seq: &dyn Fn(usize) -> f64,
) -> Result<StrongResult> {
    check_eps("delta", delta)?;
    let space = check_inputs(fs, &[v0])?;
    let mut chain = vec![v0.clone()];
    let mut energies = vec![coset_energy(&space, v0, fs)];
    loop {
        let cur = chain.last().unwrap().clone();
        let eps = eps_seq(cur.codim());
        check_eps("eps_seq value", eps)?;
        let g = green_regularize(fs, &cur, eps)?;
        let e = coset_energy(&space, &g.v1, fs);
        let prev = *energies.last().unwrap();
        if e < prev - TOL {
            return Err(Error::VerifierFailed(format!(
                "strong: energy decreased from {prev} to {e}"
            )));
        }
        chain.push(g.v1.clone());
        energies.push(e);
        if e - prev <= delta + TOL {
            let codims = chain.iter().map(|s| s.codim()).collect();
            let result = StrongResult {
                v1: cur,
                v2: g.v1,
                energies,
                codims,
                eps_final: eps,
                bad_fractions: g.bad_fractions,
            };
            verify_strong(fs, &result, delta)?;
            return Ok(result);
        }
        let rounds = chain.len() - 1;
        if rounds as f64 > fs.len() as f64 / delta + 1.0 {
            return Err(Error::VerifierFailed(format!(
                "strong: {rounds} rounds exceed k/delta"
            )));
        }
    }
}

fn verify_strong(fs: &[&DenseFunction], r: &StrongResult, delta: f64) -> Result<()> {
    let space = check_inputs(fs, &[&r.v1, &r.v2])?;
    if !r.v2.is_subspace_of(&r.v1) {
        return Err(Error::VerifierFailed(
            "strong: V_2 is not inside V_1".into(),
        ));
    }
    let gap = coset_energy(&space, &r.v2, fs) - coset_energy(&space, &r.v1, fs);
    if gap > delta + TOL {
        return Err(Error::VerifierFailed(format!(
            "strong: energy gap {gap} exceeds delta {delta}"
        )));
    }
    let (ok, fr) = verify_green(fs, &r.v2, r.eps_final)?;
    if !ok {
        return Err(Error::VerifierFailed(format!(
            "strong: bad fractions {fr:?} exceed {}",
            r.eps_final
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Decomposition regularity

#[derive(Clone, Debug, Serialize)]
pub struct WeakRound {
    pub codim: usize,
    pub energy: f64,
    pub bad_fractions: Vec<f64>,
    pub cut_function: Option<usize>,
    pub targets: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakResult {
    pub d: Decomposition,
    pub rounds: Vec<WeakRound>,
    pub bad_fractions: Vec<f64>,
}

/// Per part of `d` and per function: is every coset `x + (W ∩ U)`, `x ∈ W ∖ U`, `eps`-regular?
fn decomposition_regularity(
    space: &Space,
    fs: &[&DenseFunction],
    d: &Decomposition,
    eps: f64,
) -> (Vec<Vec<bool>>, Vec<(usize, CosetScan, Subspace)>) {
    let cosets = d.cosets(space);
    let scans: Vec<(usize, CosetScan, Subspace)> = cosets
        .into_par_iter()
        .map(|(j, rep, k)| {
            let s = scan_one(space, fs, rep, &k);
            (j, s, k)
        })
        .collect();
    let mut good = vec![vec![true; fs.len()]; d.len()];
    for (j, s, _) in &scans {
        for (i, n) in s.norms.iter().enumerate() {
            if !n.is_regular(eps) {
                good[*j][i] = false;
            }
        }
    }
    (good, scans)
}

fn part_bad_fractions(good: &[Vec<bool>], k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| good.iter().filter(|g| !g[i]).count() as f64 / good.len() as f64)
        .collect()
}

/// Whether, for each `i`, all but an `eps`-fraction of parts `W` have every
/// coset `x + (W ∩ U)` in `W ∖ U` `eps`-regular for `f_i`.
pub fn verify_weak(fs: &[&DenseFunction], d: &Decomposition, eps: f64) -> Result<(bool, Vec<f64>)> {
    let space = check_inputs(fs, &[&d.u])?;
    d.check(&space)?;
    let (good, _) = decomposition_regularity(&space, fs, d, eps);
    let fr = part_bad_fractions(&good, fs.len());
    Ok((fr.iter().all(|&f| f <= eps + TOL), fr))
}

fn decomposition_energy(space: &Space, fs: &[&DenseFunction], d: &Decomposition) -> f64 {
    energy(&d.partition(space), fs)
}

/// Weak decomposition regularity relative to `u`, starting from the initial
/// line-family decomposition and refining the parts that carry irregular cosets.
pub fn weak_decomp_regularize(fs: &[&DenseFunction], u: &Subspace, eps: f64) -> Result<WeakResult> {
    check_eps("eps", eps)?;
    let space = check_inputs(fs, &[u])?;
    let k = fs.len();
    let mut d = decomp_initial(&space, u)?;
    let mut rounds = Vec::new();
    let p = space.p() as f64;
    let min_gain = eps.powi(3) * p.powi(-(u.codim() as i32));
    let max_rounds = p.powi(u.codim() as i32) * k as f64 / eps.powi(3);
    loop {
        let (good, scans) = decomposition_regularity(&space, fs, &d, eps);
        let fr = part_bad_fractions(&good, k);
        let e_now = decomposition_energy(&space, fs, &d);
        let Some(i) = fr.iter().position(|&f| f > eps + TOL) else {
            rounds.push(WeakRound {
                codim: d.codim,
                energy: e_now,
                bad_fractions: fr.clone(),
                cut_function: None,
                targets: 0,
            });
            return Ok(WeakResult {
                d,
                rounds,
                bad_fractions: fr,
            });
        };
        if rounds.len() as f64 > max_rounds {
            return Err(Error::VerifierFailed(format!(
                "weak: more than {max_rounds} rounds"
            )));
        }
        let mut targets = BTreeMap::new();
        for (j, s, kk) in &scans {
            if targets.contains_key(j) || s.norms[i].is_regular(eps) {
                continue;
            }
            let sub = space.sibling(kk.dim())?;
            let g = fs[i].gather(sub, &space.coset_indices(s.rep, kk));
            let inc = increment_from_norm(&g, eps, s.norms[i])?
                .expect("irregular coset yields an increment");
            targets.insert(*j, kk.from_coords(&inc.v2));
        }
        let next = match decomp_refine(&space, &d, &targets) {
            Ok(n) => n,
            Err(Error::DimensionPrecondition(msg)) => {
                return Err(Error::SpaceExhausted(format!("weak: cannot refine: {msg}")))
            }
            Err(e) => return Err(e),
        };
        let e_next = decomposition_energy(&space, fs, &next);
        let gain = e_next - e_now;
        debug!("weak: codim {} -> {}, gain {gain:.3e}", d.codim, next.codim);
        if gain <= min_gain - TOL {
            return Err(Error::VerifierFailed(format!(
                "weak: round gain {gain} does not exceed eps^3 p^-codim U = {min_gain}"
            )));
        }
        rounds.push(WeakRound {
            codim: d.codim,
            energy: e_now,
            bad_fractions: fr,
            cut_function: Some(i),
            targets: targets.len(),
        });
        d = next;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StrongDecompResult {
    pub v1: Subspace,
    pub d: Decomposition,
    /// Energies of `P(V_0), P(V_1), …` along the chain `V_{m+1} = V(D_{m+1})`.
    pub energies: Vec<f64>,
    /// Set when the dimension was too small for the iteration and the
    /// trivial answer `V_1 = {0}`, `D = {V}` was returned.
    pub fallback: bool,
    pub checks: StrongDecompCheck,
}

#[derive(Clone, Debug, Serialize)]
pub struct StrongDecompCheck {
    /// `E(P(V_1 | V∖V_1))`.
    pub coarse_energy: f64,
    /// `E(P(D))`.
    pub decomposition_energy: f64,
    pub bad_fractions: Vec<f64>,
    pub ok: bool,
    pub failures: Vec<String>,
}

/// Checks the three conclusions of strong decomposition regularity. The
/// energy comparison is checked in both directions; the direction
/// `E(P(D)) ≤ E(P(V_1|V∖V_1)) + ε` is the one with content.
pub fn verify_strong_decomp(
    fs: &[&DenseFunction],
    v0: &Subspace,
    v1: &Subspace,
    d: &Decomposition,
    eps: f64,
) -> Result<StrongDecompCheck> {
    let space = check_inputs(fs, &[v0, v1, &d.u])?;
    let mut failures = Vec::new();
    if !v1.is_subspace_of(v0) {
        failures.push("V_1 is not inside V_0".to_string());
    }
    if d.u != *v1 {
        failures.push("decomposition is not relative to V_1".to_string());
    }
    d.check(&space)?;
    let outside: Vec<bool> = {
        let mut m = vec![true; space.size()];
        for i in space.subspace_indices(v1) {
            m[i] = false;
        }
        m
    };
    let coarse = Partition::cosets_on(&space, v1, &outside)?;
    let fine = d.partition(&space);
    if !fine.refines(&coarse) {
        failures.push("P(D) does not refine P(V_1 | V∖V_1)".to_string());
    }
    let e_coarse = energy(&coarse, fs);
    let e_fine = energy(&fine, fs);
    if e_coarse > e_fine + eps + TOL {
        failures.push(format!("E(P(V_1|V∖V_1)) = {e_coarse} > E(P(D)) + eps"));
    }
    if e_fine > e_coarse + eps + TOL {
        failures.push(format!("E(P(D)) = {e_fine} > E(P(V_1|V∖V_1)) + eps"));
    }
    let (ok_reg, fr) = verify_weak(fs, d, eps)?;
    if !ok_reg {
        failures.push(format!("bad part fractions {fr:?} exceed eps"));
    }
    Ok(StrongDecompCheck {
        coarse_energy: e_coarse,
        decomposition_energy: e_fine,
        bad_fractions: fr,
        ok: failures.is_empty(),
        failures,
    })
}

/// Replaces `v0` by a subspace of codimension at least `⌈log_p(4/ε)⌉`, so
/// that `|V_0| ≤ (ε/4)|V|`. `None` when the space is too small for that.
fn shrink_v0(v0: &Subspace, eps: f64) -> Option<Subspace> {
    let need = ceil_log(v0.p(), 4.0 / eps);
    let n = v0.ambient_dim();
    if need > n {
        return None;
    }
    if v0.codim() >= need {
        return Some(v0.clone());
    }
    Some(v0.trailing(n - need))
}

/// Strong decomposition regularity: iterates the weak lemma along
/// `V_{m+1} = V(D_{m+1})` until the energy gap drops to `ε/2`.
pub fn strong_decomp_regularize(
    fs: &[&DenseFunction],
    v0: &Subspace,
    eps: f64,
) -> Result<StrongDecompResult> {
    check_eps("eps", eps)?;
    let space = check_inputs(fs, &[v0])?;
    let trivial = |v0: &Subspace| -> Result<StrongDecompResult> {
        let zero = Subspace::zero(space.field(), space.dim());
        let d = Decomposition::trivial(&zero);
        let checks = verify_strong_decomp(fs, v0, &zero, &d, eps)?;
        Ok(StrongDecompResult {
            v1: zero,
            d,
            energies: Vec::new(),
            fallback: true,
            checks,
        })
    };
    let Some(start) = shrink_v0(v0, eps) else {
        return trivial(v0);
    };
    let k = fs.len();
    let mut vm = start;
    let mut energies = vec![coset_energy(&space, &vm, fs)];
    loop {
        let weak = match weak_decomp_regularize(fs, &vm, eps) {
            Ok(w) => w,
            Err(Error::SpaceExhausted(msg)) | Err(Error::DimensionPrecondition(msg)) => {
                debug!("strong decomposition: falling back ({msg})");
                return trivial(v0);
            }
            Err(e) => return Err(e),
        };
        let next = weak.d.intersection();
        let e = coset_energy(&space, &next, fs);
        let prev = *energies.last().unwrap();
        if e < prev - TOL {
            return Err(Error::VerifierFailed(format!(
                "strong decomposition: energy decreased from {prev} to {e}"
            )));
        }
        energies.push(e);
        if e - prev <= eps / 2.0 + TOL {
            let checks = verify_strong_decomp(fs, v0, &vm, &weak.d, eps)?;
            if !checks.ok {
                return Err(Error::VerifierFailed(format!(
                    "strong decomposition: {}",
                    checks.failures.join("; ")
                )));
            }
            return Ok(StrongDecompResult {
                v1: vm,
                d: weak.d,
                energies,
                fallback: false,
                checks,
            });
        }
        if (energies.len() - 1) as f64 > 2.0 * k as f64 / eps + 1.0 {
            return Err(Error::VerifierFailed(
                "strong decomposition: too many rounds".into(),
            ));
        }
        vm = next;
    }
}

// ---------------------------------------------------------------------------
// Regular model

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Strong,
    Decomposition,
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strong" => Ok(Backend::Strong),
            "decomposition" | "decomp" => Ok(Backend::Decomposition),
            _ => Err(Error::InvalidInput(format!("unknown backend {s:?}"))),
        }
    }
}

/// Regularity parameter as a constant or as a function of `codim V_1`
/// (the last listed value repeats).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum EpsSchedule {
    Constant(f64),
    Sequence(Vec<f64>),
}

impl EpsSchedule {
    pub fn at(&self, m: usize) -> f64 {
        match self {
            EpsSchedule::Constant(e) => *e,
            EpsSchedule::Sequence(v) => v[m.min(v.len() - 1)],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            EpsSchedule::Constant(e) => check_eps("eps", *e),
            EpsSchedule::Sequence(v) => {
                if v.is_empty() {
                    return Err(Error::InvalidInput("empty eps sequence".into()));
                }
                for (a, b) in v.iter().zip(v.iter().skip(1)) {
                    if b > a {
                        return Err(Error::InvalidInput(
                            "eps sequence must be nonincreasing".into(),
                        ));
                    }
                }
                v.iter().try_for_each(|&e| check_eps("eps", e))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CosetRow {
    /// Point index of `x ∈ U`.
    pub x: usize,
    /// `|E_{V_1} f_i(x+·) − E_{V_2} f_i(x+·)|` per function.
    pub gaps: Vec<f64>,
    /// Regularity norm of `f_i` on `x + V_2` per function.
    pub norms: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelCheck {
    pub ok: bool,
    pub failures: Vec<String>,
    /// Fraction of `x ∈ U` with some gap above the density tolerance.
    pub gap_fail_fraction: f64,
    pub max_norm: f64,
    pub rows: Vec<CosetRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularModel {
    pub backend: Backend,
    pub v0: Subspace,
    pub v1: Subspace,
    pub v2: Subspace,
    pub u: Subspace,
    pub eps_gap: f64,
    pub eps_reg: f64,
    pub attempts: usize,
    /// `V_1 = V_2 = {0}` because the space is too small for the preprocessing.
    pub fallback: bool,
    pub check: ModelCheck,
}

/// Checks the three regular-model conclusions: `V_2 ≤ V_1 ≤ V_0` with
/// `U ⊕ V_1 = V`; the density gap is at most `eps_gap` for all but an
/// `eps_gap`-fraction of `x ∈ U`; and every `f_i|_{x+V_2}` is
/// `eps_reg`-regular for `x ∈ U ∖ {0}`.
pub fn verify_regular_model(
    fs: &[&DenseFunction],
    v0: &Subspace,
    v1: &Subspace,
    v2: &Subspace,
    u: &Subspace,
    eps_gap: f64,
    eps_reg: f64,
) -> Result<ModelCheck> {
    let space = check_inputs(fs, &[v0, v1, v2, u])?;
    let mut failures = Vec::new();
    if !v2.is_subspace_of(v1) || !v1.is_subspace_of(v0) {
        failures.push("subspaces are not nested V_2 ≤ V_1 ≤ V_0".to_string());
    }
    if u.dim() + v1.dim() != space.dim() || !u.intersect(v1).is_zero() {
        failures.push("U is not a complement of V_1".to_string());
    }
    let reps = space.subspace_indices(u);
    let rows: Vec<CosetRow> = reps
        .par_iter()
        .map(|&x| {
            let s2 = scan_one(&space, fs, x, v2);
            let means1: Vec<f64> = {
                let idx = space.coset_indices(x, v1);
                fs.iter()
                    .map(|f| idx.iter().map(|&i| f.re(i)).sum::<f64>() / idx.len() as f64)
                    .collect()
            };
            CosetRow {
                x,
                gaps: means1
                    .iter()
                    .zip(&s2.means)
                    .map(|(a, b)| (a - b).abs())
                    .collect(),
                norms: s2.norms.iter().map(|n| n.norm).collect(),
            }
        })
        .collect();
    let gap_fail = rows
        .iter()
        .filter(|r| r.gaps.iter().any(|&g| g > eps_gap + TOL))
        .count();
    let gap_fail_fraction = gap_fail as f64 / rows.len() as f64;
    if gap_fail_fraction > eps_gap + TOL {
        failures.push(format!(
            "density gap fails on a {gap_fail_fraction} fraction of U"
        ));
    }
    let max_norm = rows
        .iter()
        .filter(|r| r.x != 0)
        .flat_map(|r| r.norms.iter().cloned())
        .fold(0.0, f64::max);
    if max_norm > eps_reg + TOL {
        failures.push(format!(
            "regularity norm {max_norm} on some x + V_2 exceeds {eps_reg}"
        ));
    }
    Ok(ModelCheck {
        ok: failures.is_empty(),
        failures,
        gap_fail_fraction,
        max_norm,
        rows,
    })
}

/// Regular model with a single parameter `eps` for both the gap and the regularity.
pub fn regular_model(
    fs: &[&DenseFunction],
    v0: &Subspace,
    eps: f64,
    backend: Backend,
    seed: u64,
) -> Result<RegularModel> {
    regular_model_with(
        fs,
        v0,
        eps,
        &EpsSchedule::Constant(eps),
        backend,
        seed,
        DEFAULT_RETRY_CAP,
    )
}

/// Regular model whose regularity level may depend on `codim V_1`:
/// conclusion (3) holds with `min(eps, reg(codim V_1))`.
pub fn regular_model_with(
    fs: &[&DenseFunction],
    v0: &Subspace,
    eps: f64,
    reg: &EpsSchedule,
    backend: Backend,
    seed: u64,
    retry_cap: usize,
) -> Result<RegularModel> {
    check_eps("eps", eps)?;
    reg.validate()?;
    let space = check_inputs(fs, &[v0])?;
    let k = fs.len();
    let p = space.p();
    let Some(v0s) = shrink_v0(v0, eps) else {
        let zero = Subspace::zero(space.field(), space.dim());
        let full = Subspace::full(space.field(), space.dim());
        let eps_reg = eps.min(reg.at(space.dim()));
        let check = verify_regular_model(fs, v0, &zero, &zero, &full, eps, eps_reg)?;
        return finish(RegularModel {
            backend,
            v0: v0.clone(),
            v1: zero.clone(),
            v2: zero,
            u: full,
            eps_gap: eps,
            eps_reg,
            attempts: 0,
            fallback: true,
            check,
        });
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match backend {
        Backend::Strong => {
            let seq = |m: usize| {
                eps.min(reg.at(m))
                    .min((p as f64).powi(-(m as i32)) / (2.0 * k as f64))
            };
            let s = strong_regularize(fs, &v0s, eps.powi(3) / 4.0, &seq)?;
            let eps_reg = eps.min(reg.at(s.v1.codim()));
            let mut last = None;
            for attempt in 1..=retry_cap {
                let u = s.v1.random_complement(&mut rng);
                let check = verify_regular_model(fs, &v0s, &s.v1, &s.v2, &u, eps, eps_reg)?;
                if check.ok {
                    return finish(RegularModel {
                        backend,
                        v0: v0s,
                        v1: s.v1,
                        v2: s.v2,
                        u,
                        eps_gap: eps,
                        eps_reg,
                        attempts: attempt,
                        fallback: false,
                        check,
                    });
                }
                last = Some(check);
            }
            Err(retry_error(retry_cap, last))
        }
        Backend::Decomposition => {
            let mut param = (eps.powi(3) / 4.0)
                .min(1.0 / (4.0 * k as f64))
                .min(reg.at(v0s.codim()));
            let mut sd = strong_decomp_regularize(fs, &v0s, param)?;
            // the regularity level depends on codim V_1, which is only known
            // after the run; shrink the parameter until it is consistent
            for _ in 0..=space.dim() {
                let want = param.min(reg.at(sd.v1.codim()));
                if want >= param {
                    break;
                }
                param = want;
                sd = strong_decomp_regularize(fs, &v0s, param)?;
            }
            let eps_reg = eps.min(reg.at(sd.v1.codim()));
            let mut last = None;
            for attempt in 1..=retry_cap {
                let j = rand::Rng::gen_range(&mut rng, 0..sd.d.len());
                let w = &sd.d.parts[j];
                let v2 = sd.v1.intersect(w);
                let u = w.complement_within(&v2)?;
                let check = verify_regular_model(fs, &v0s, &sd.v1, &v2, &u, eps, eps_reg)?;
                if check.ok {
                    return finish(RegularModel {
                        backend,
                        v0: v0s,
                        v1: sd.v1,
                        v2,
                        u,
                        eps_gap: eps,
                        eps_reg,
                        attempts: attempt,
                        fallback: sd.fallback,
                        check,
                    });
                }
                last = Some(check);
            }
            Err(retry_error(retry_cap, last))
        }
    }
}

fn finish(m: RegularModel) -> Result<RegularModel> {
    if !m.check.ok {
        return Err(Error::VerifierFailed(format!(
            "regular model: {}",
            m.check.failures.join("; ")
        )));
    }
    Ok(m)
}

fn retry_error(cap: usize, last: Option<ModelCheck>) -> Error {
    let detail = match last {
        Some(c) => format!(
            "last attempt: gap failure fraction {}, max norm {}; {}",
            c.gap_fail_fraction,
            c.max_norm,
            c.failures.join("; ")
        ),
        None => "no attempts made".to_string(),
    };
    Error::RetryCapExceeded {
        attempts: cap,
        detail,
    }
}

// ---------------------------------------------------------------------------
// Regularity recoloring

#[derive(Clone, Debug, Serialize)]
pub struct ColorRow {
    /// Point index of `x ∈ U`.
    pub x: usize,
    /// Color counts in `x + V_1` under the original coloring, color 1 first.
    pub counts_v1: Vec<usize>,
    /// Color counts in `x + V_2` under the original coloring.
    pub counts_v2: Vec<usize>,
    /// Replacement color for the sub-threshold colors of this coset.
    pub fill: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct RecolorCheck {
    pub ok: bool,
    pub failures: Vec<String>,
    pub max_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RecoloringReport {
    #[serde(skip)]
    pub old: Coloring,
    #[serde(skip)]
    pub new: Coloring,
    pub eps: f64,
    pub eps_reg: f64,
    pub changed_count: usize,
    pub v0: Subspace,
    pub v1: Subspace,
    pub v2: Subspace,
    pub u: Subspace,
    /// `codim V_0` had to be capped at `n`.
    pub v0_clamped: bool,
    pub model: RegularModel,
    pub table: Vec<ColorRow>,
    pub check: RecolorCheck,
}

fn color_counts(phi: &Coloring, idx: &[usize]) -> Vec<usize> {
    let mut c = vec![0usize; phi.r() as usize];
    for &i in idx {
        c[phi.get(i) as usize - 1] += 1;
    }
    c
}

fn dense_enough(count: usize, size: usize, threshold: f64) -> bool {
    count as f64 / size as f64 >= threshold - TOL
}

/// Checks the recoloring conclusions: codimension bounds, that every color
/// present in `x + V_1` after recoloring fills at least an `eps/(2r)`-fraction
/// of `x + V_2` before it, regularity of the original coloring on each
/// `x + V_2` with `x ∈ U ∖ {0}`, and the budget `changed ≤ eps |V|`.
#[allow(clippy::too_many_arguments)]
pub fn verify_recoloring(
    old: &Coloring,
    new: &Coloring,
    v1: &Subspace,
    v2: &Subspace,
    u: &Subspace,
    eps: f64,
    eps_reg: f64,
    min_codim_v1: usize,
) -> Result<RecolorCheck> {
    let space = *old.space();
    let mut failures = Vec::new();
    if v1.codim() < min_codim_v1 || v2.codim() < v1.codim() || !v2.is_subspace_of(v1) {
        failures.push(format!(
            "codimensions {} / {} violate {min_codim_v1} ≤ codim V_1 ≤ codim V_2",
            v1.codim(),
            v2.codim()
        ));
    }
    if u.dim() + v1.dim() != space.dim() || !u.intersect(v1).is_zero() {
        failures.push("U is not a complement of V_1".into());
    }
    let r = old.r();
    let threshold = eps / (2.0 * r as f64);
    let fs = old.indicators();
    let refs: Vec<&DenseFunction> = fs.iter().collect();
    let reps = space.subspace_indices(u);
    let per: Vec<(Vec<String>, f64)> = reps
        .par_iter()
        .map(|&x| {
            let mut fails = Vec::new();
            let i1 = space.coset_indices(x, v1);
            let i2 = space.coset_indices(x, v2);
            let after = color_counts(new, &i1);
            let before2 = color_counts(old, &i2);
            for c in 0..r as usize {
                if after[c] > 0 && !dense_enough(before2[c], i2.len(), threshold) {
                    fails.push(format!(
                        "color {} appears in coset {x} but is sparse in x+V_2",
                        c + 1
                    ));
                }
            }
            let mut worst = 0.0f64;
            if x != 0 {
                let s = scan_one(&space, &refs, x, v2);
                worst = s.norms.iter().map(|n| n.norm).fold(0.0, f64::max);
                if worst > eps_reg + TOL {
                    fails.push(format!("coloring not {eps_reg}-regular on {x} + V_2"));
                }
            }
            (fails, worst)
        })
        .collect();
    let mut max_norm = 0.0f64;
    for (f, w) in per {
        failures.extend(f);
        max_norm = max_norm.max(w);
    }
    let changed = old.hamming(new);
    if changed as f64 > eps * space.size() as f64 + TOL {
        failures.push(format!(
            "changed {changed} points, budget {}",
            eps * space.size() as f64
        ));
    }
    Ok(RecolorCheck {
        ok: failures.is_empty(),
        failures,
        max_norm,
    })
}

/// Regularity recoloring with the constant or codimension-dependent
/// regularity parameter `eps_prime`.
pub fn regularity_recolor(
    phi: &Coloring,
    eps: f64,
    eps_prime: &EpsSchedule,
    backend: Backend,
    seed: u64,
) -> Result<RecoloringReport> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "eps must lie in (0, 1], got {eps}"
        )));
    }
    eps_prime.validate()?;
    let space = *phi.space();
    let r = phi.r();
    let fs = phi.indicators();
    let refs: Vec<&DenseFunction> = fs.iter().collect();
    let want = (1.0 / eps - TOL).ceil().max(1.0) as usize;
    let v0_clamped = want > space.dim();
    let codim0 = want.min(space.dim());
    let v0 = Subspace::trailing_coordinates(space.field(), space.dim(), codim0);
    let eps2 = eps / (4.0 * r as f64);
    let model = match eps_prime {
        EpsSchedule::Constant(e) => {
            let e2 = eps2.min(*e);
            regular_model_with(
                &refs,
                &v0,
                e2,
                &EpsSchedule::Constant(e2),
                backend,
                seed,
                DEFAULT_RETRY_CAP,
            )?
        }
        EpsSchedule::Sequence(_) => regular_model_with(
            &refs,
            &v0,
            eps2,
            eps_prime,
            backend,
            seed,
            DEFAULT_RETRY_CAP,
        )?,
    };
    let eps_reg = model.eps_reg;
    let threshold = eps / (2.0 * r as f64);
    let reps = space.subspace_indices(&model.u);
    let rows: Vec<(ColorRow, Vec<usize>)> = reps
        .par_iter()
        .map(|&x| {
            let i1 = space.coset_indices(x, &model.v1);
            let i2 = space.coset_indices(x, &model.v2);
            let counts_v1 = color_counts(phi, &i1);
            let counts_v2 = color_counts(phi, &i2);
            let fill = (0..r as usize)
                .find(|&c| dense_enough(counts_v2[c], i2.len(), threshold))
                .map(|c| c as u32 + 1)
                .expect("some color fills a 1/r fraction of every coset");
            (
                ColorRow {
                    x,
                    counts_v1,
                    counts_v2,
                    fill,
                },
                i1,
            )
        })
        .collect();
    let mut new = phi.clone();
    let mut table = Vec::with_capacity(rows.len());
    for (row, i1) in rows {
        let sparse: Vec<bool> = (0..r as usize)
            .map(|c| !dense_enough(row.counts_v2[c], model.v2.size(), threshold))
            .collect();
        for &i in &i1 {
            let c = phi.get(i);
            if sparse[c as usize - 1] {
                new.set(i, row.fill);
            }
        }
        table.push(row);
    }
    let changed_count = phi.hamming(&new);
    let check = verify_recoloring(
        phi, &new, &model.v1, &model.v2, &model.u, eps, eps_reg, codim0,
    )?;
    if !check.ok {
        return Err(Error::VerifierFailed(format!(
            "recoloring: {}",
            check.failures.join("; ")
        )));
    }
    Ok(RecoloringReport {
        old: phi.clone(),
        new,
        eps,
        eps_reg,
        changed_count,
        v0,
        v1: model.v1.clone(),
        v2: model.v2.clone(),
        u: model.u.clone(),
        v0_clamped,
        model,
        table,
        check,
    })
}
