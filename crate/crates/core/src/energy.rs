//! Partitions and their energy, the single-step energy increment, and
//! decompositions of `V` relative to a subspace `U`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ext_field::ExtensionField;
use crate::fourier::{regularity_norm, RegularityNorm};
use crate::space::{DenseFunction, Space};
use crate::subspace::Subspace;

const OUTSIDE: usize = usize::MAX;

/// A partition of a carrier `S ⊆ V`, stored as a part id per point
/// (points outside `S` carry no id). Parts are numbered by their smallest index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    parts: usize,
    carrier: usize,
}

impl Partition {
    /// Builds a partition from arbitrary labels; `None` marks points outside the carrier.
    pub fn from_labels(labels: &[Option<usize>]) -> Self {
        let mut remap = std::collections::HashMap::new();
        let mut out = Vec::with_capacity(labels.len());
        let mut carrier = 0;
        for l in labels {
            match l {
                Some(l) => {
                    let next = remap.len();
                    out.push(*remap.entry(*l).or_insert(next));
                    carrier += 1;
                }
                None => out.push(OUTSIDE),
            }
        }
        Partition {
            labels: out,
            parts: remap.len(),
            carrier,
        }
    }

    fn from_raw(raw: Vec<usize>) -> Self {
        let opt: Vec<Option<usize>> = raw
            .into_iter()
            .map(|l| (l != OUTSIDE).then_some(l))
            .collect();
        Self::from_labels(&opt)
    }

    /// `P(W)`: cosets of `W` covering all of `V`.
    pub fn cosets(space: &Space, w: &Subspace) -> Self {
        Self::from_raw(space.coset_labels(w))
    }

    /// `P(W | S)` for `S` given by a membership mask; `S` must be a union of cosets of `W`.
    pub fn cosets_on(space: &Space, w: &Subspace, carrier: &[bool]) -> Result<Self> {
        let labels = space.coset_labels(w);
        let mut state: Vec<Option<bool>> = vec![None; space.size()];
        for (i, &l) in labels.iter().enumerate() {
            match state[l] {
                None => state[l] = Some(carrier[i]),
                Some(s) if s != carrier[i] => {
                    return Err(Error::InvalidInput(
                        "carrier is not a union of cosets".into(),
                    ))
                }
                _ => {}
            }
        }
        let raw = labels
            .iter()
            .zip(carrier)
            .map(|(&l, &inside)| if inside { l } else { OUTSIDE })
            .collect();
        Ok(Self::from_raw(raw))
    }

    /// Trivial partition `{S}`.
    pub fn trivial(carrier: &[bool]) -> Self {
        let opt: Vec<Option<usize>> = carrier.iter().map(|&c| c.then_some(0)).collect();
        Self::from_labels(&opt)
    }

    /// Partition of `S` into singletons.
    pub fn singletons(carrier: &[bool]) -> Self {
        let opt: Vec<Option<usize>> = carrier
            .iter()
            .enumerate()
            .map(|(i, &c)| c.then_some(i))
            .collect();
        Self::from_labels(&opt)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_parts(&self) -> usize {
        self.parts
    }

    pub fn carrier_size(&self) -> usize {
        self.carrier
    }

    pub fn part_of(&self, idx: usize) -> Option<usize> {
        let l = self.labels[idx];
        (l != OUTSIDE).then_some(l)
    }

    pub fn in_carrier(&self, idx: usize) -> bool {
        self.labels[idx] != OUTSIDE
    }

    pub fn parts(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.parts];
        for (i, &l) in self.labels.iter().enumerate() {
            if l != OUTSIDE {
                out[l].push(i);
            }
        }
        out
    }

    /// Whether every part of `self` lies inside a part of `coarser` (same carrier).
    pub fn refines(&self, coarser: &Partition) -> bool {
        if self.labels.len() != coarser.labels.len() {
            return false;
        }
        let mut owner = vec![OUTSIDE; self.parts];
        for (&a, &b) in self.labels.iter().zip(&coarser.labels) {
            if (a == OUTSIDE) != (b == OUTSIDE) {
                return false;
            }
            if a == OUTSIDE {
                continue;
            }
            if owner[a] == OUTSIDE {
                owner[a] = b;
            } else if owner[a] != b {
                return false;
            }
        }
        true
    }
}

#[derive(Clone, Debug)]
pub struct Projection {
    /// Part-averaged functions; zero outside the carrier.
    pub projections: Vec<DenseFunction>,
    pub energy: f64,
}

/// Averages of one function over each part.
fn part_means(part: &Partition, f: &DenseFunction) -> Vec<Complex64> {
    let mut sums = vec![Complex64::new(0.0, 0.0); part.parts];
    let mut counts = vec![0usize; part.parts];
    for (i, &l) in part.labels.iter().enumerate() {
        if l != OUTSIDE {
            sums[l] += f.get(i);
            counts[l] += 1;
        }
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect()
}

/// Energy contributed by one function: `‖f_P‖²` in normalized `L²(S)`.
fn function_energy(part: &Partition, f: &DenseFunction) -> f64 {
    if part.carrier == 0 {
        return 0.0;
    }
    let means = part_means(part, f);
    let mut counts = vec![0usize; part.parts];
    for &l in &part.labels {
        if l != OUTSIDE {
            counts[l] += 1;
        }
    }
    let total: f64 = means
        .iter()
        .zip(&counts)
        .map(|(m, &c)| m.norm_sqr() * c as f64)
        .sum();
    total / part.carrier as f64
}

/// Part-average projections of each `f_i` and the energy `Σ_i ‖(f_i)_P‖²_{L²(S)}`.
pub fn project_energy(part: &Partition, fs: &[&DenseFunction]) -> Result<Projection> {
    let mut projections = Vec::with_capacity(fs.len());
    let mut energy = 0.0;
    for f in fs {
        if f.values().len() != part.labels.len() {
            return Err(Error::DimensionMismatch(
                "function and partition sizes differ".into(),
            ));
        }
        let means = part_means(part, f);
        let vals: Vec<Complex64> = part
            .labels
            .iter()
            .map(|&l| {
                if l == OUTSIDE {
                    Complex64::new(0.0, 0.0)
                } else {
                    means[l]
                }
            })
            .collect();
        energy += function_energy(part, f);
        projections.push(DenseFunction::new(*f.space(), vals)?);
    }
    Ok(Projection {
        projections,
        energy,
    })
}

/// Energy only, skipping the projections.
pub fn energy(part: &Partition, fs: &[&DenseFunction]) -> f64 {
    fs.iter().map(|f| function_energy(part, f)).sum()
}

/// `Σ_i ‖(f_i)_Q − (f_i)_P‖²_{L²(S)}`.
pub fn projection_distance(q: &Partition, p: &Partition, fs: &[&DenseFunction]) -> Result<f64> {
    let pq = project_energy(q, fs)?;
    let pp = project_energy(p, fs)?;
    let carrier = q.carrier.max(1) as f64;
    let mut total = 0.0;
    for (a, b) in pq.projections.iter().zip(&pp.projections) {
        for (i, (x, y)) in a.values().iter().zip(b.values()).enumerate() {
            if q.in_carrier(i) {
                total += (x - y).norm_sqr();
            }
        }
    }
    Ok(total / carrier)
}

/// Energy of the coset partition `P(W)` of all of `V`, computed directly.
pub fn coset_energy(space: &Space, w: &Subspace, fs: &[&DenseFunction]) -> f64 {
    let labels = space.coset_labels(w);
    let parts = space.size() / w.size();
    let inv = 1.0 / w.size() as f64;
    let mut total = 0.0;
    for f in fs {
        let mut sums = vec![Complex64::new(0.0, 0.0); parts];
        for (i, &l) in labels.iter().enumerate() {
            sums[l] += f.get(i);
        }
        total += sums.iter().map(|s| (s * inv).norm_sqr()).sum::<f64>() / parts as f64;
    }
    total
}

#[derive(Clone, Debug, Serialize)]
pub struct Increment {
    /// Witness character, as an index in the coordinates of the coset.
    pub z: usize,
    /// `{y : y·z = 0}` in coset coordinates.
    pub v2: Subspace,
    pub norm: f64,
    pub gain: f64,
}

/// Energy-increment step for a function given on the coordinates of a coset.
///
/// Returns `None` exactly when `f` is `eps`-regular. Otherwise the returned
/// hyperplane raises the energy of `f` by more than `eps²`; this is checked.
pub fn increment_subspace(f: &DenseFunction, eps: f64) -> Result<Option<Increment>> {
    let rn: RegularityNorm = regularity_norm(f);
    increment_from_norm(f, eps, rn)
}

pub(crate) fn increment_from_norm(
    f: &DenseFunction,
    eps: f64,
    rn: RegularityNorm,
) -> Result<Option<Increment>> {
    if rn.is_regular(eps) {
        return Ok(None);
    }
    let z = rn.witness.expect("irregular function has a witness");
    let space = *f.space();
    let zv = space.decode(z);
    let full = Subspace::full(space.field(), space.dim());
    let v2 = full.hyperplane(&zv);
    let before = {
        let m = f.mean();
        m.norm_sqr()
    };
    let after = coset_energy(&space, &v2, &[f]);
    let gain = after - before;
    if gain <= eps * eps - crate::TOL {
        return Err(Error::VerifierFailed(format!(
            "energy increment {gain} does not exceed eps^2 = {}",
            eps * eps
        )));
    }
    Ok(Some(Increment {
        z,
        v2,
        norm: rn.norm,
        gain,
    }))
}

/// Family of subspaces of equal codimension, all transverse to `U`, whose
/// differences with `U` partition `V ∖ U`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Decomposition {
    pub u: Subspace,
    pub parts: Vec<Subspace>,
    pub codim: usize,
}

impl Decomposition {
    /// `{V}`.
    pub fn trivial(u: &Subspace) -> Self {
        Decomposition {
            u: u.clone(),
            parts: vec![Subspace::full(u.field(), u.ambient_dim())],
            codim: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// `V(D) = ∩ W`.
    pub fn intersection(&self) -> Subspace {
        let mut acc = Subspace::full(self.u.field(), self.u.ambient_dim());
        for w in &self.parts {
            acc = acc.intersect(w);
        }
        acc
    }

    /// Exhaustive check of every structural invariant.
    pub fn check(&self, space: &Space) -> Result<()> {
        let fail = |msg: String| Err(Error::VerifierFailed(format!("decomposition: {msg}")));
        space.check_subspace(&self.u)?;
        let p = space.p() as usize;
        if Some(self.parts.len()) != p.checked_pow(self.codim as u32) {
            return fail(format!(
                "{} parts but codim {} needs p^codim",
                self.parts.len(),
                self.codim
            ));
        }
        let mut hits = vec![0u32; space.size()];
        for (j, w) in self.parts.iter().enumerate() {
            space.check_subspace(w)?;
            if w.codim() != self.codim {
                return fail(format!("part {j} has codim {}", w.codim()));
            }
            if !w.sum(&self.u).is_full() {
                return fail(format!("part {j} is not transverse to U"));
            }
            for idx in space.subspace_indices(w) {
                if !self.u.contains(&space.decode(idx)) {
                    hits[idx] += 1;
                }
            }
        }
        let in_u: Vec<bool> = {
            let mut m = vec![false; space.size()];
            for idx in space.subspace_indices(&self.u) {
                m[idx] = true;
            }
            m
        };
        for (idx, (&h, &u)) in hits.iter().zip(&in_u).enumerate() {
            if !u && h != 1 {
                return fail(format!("point {idx} outside U covered {h} times"));
            }
        }
        Ok(())
    }

    /// The partition `P(D)` of `V ∖ U` into cosets of `W ∩ U` inside each `W ∖ U`.
    pub fn partition(&self, space: &Space) -> Partition {
        let mut raw = vec![OUTSIDE; space.size()];
        let mut next = 0;
        for w in &self.parts {
            let k = w.intersect(&self.u);
            let comp = w.complement_within(&k).expect("W ∩ U ≤ W");
            let members = space.subspace_indices(&k);
            for rep in space.subspace_indices(&comp).into_iter().skip(1) {
                for &m in &members {
                    raw[space.add_idx(rep, m)] = next;
                }
                next += 1;
            }
        }
        Partition::from_raw(raw)
    }

    /// Cosets `x + (W ∩ U)` for `x ∈ W ∖ U`, as (part index, representative, `W ∩ U`).
    pub fn cosets(&self, space: &Space) -> Vec<(usize, usize, Subspace)> {
        let mut out = Vec::new();
        for (j, w) in self.parts.iter().enumerate() {
            let k = w.intersect(&self.u);
            let comp = w.complement_within(&k).expect("W ∩ U ≤ W");
            for rep in space.subspace_indices(&comp).into_iter().skip(1) {
                out.push((j, rep, k.clone()));
            }
        }
        out
    }
}

/// Decomposition of `W` relative to `K = W ∩ U` built from the line family
/// `{(x, a x)}` over `F_{p^c}` after quotienting by a subspace `U′ ≤ K`
/// (taken from the trailing canonical rows of `target`, or of `K`).
fn line_family(w: &Subspace, k: &Subspace, target: Option<&Subspace>) -> Result<Vec<Subspace>> {
    let c = w.dim() - k.dim();
    if c == 0 {
        return Ok(vec![w.clone()]);
    }
    if c > k.dim() {
        return Err(Error::DimensionPrecondition(format!(
            "codimension {c} exceeds dim(W ∩ U) = {}",
            k.dim()
        )));
    }
    let base = target.unwrap_or(k);
    let keep = k.dim() - c;
    if keep > base.dim() {
        return Err(Error::DimensionPrecondition(format!(
            "target of dim {} cannot host U′ of dim {keep}",
            base.dim()
        )));
    }
    let u_prime = base.trailing(keep);
    let cs = w.complement_within(k)?;
    let us = k.complement_within(&u_prime)?;
    debug_assert_eq!(cs.dim(), c);
    debug_assert_eq!(us.dim(), c);
    let field = w.field();
    let ext = ExtensionField::new(field, c)?;
    let mut out = Vec::with_capacity(ext.order());
    for code in 0..ext.order() {
        let a = ext.element(code);
        let mut gens: Vec<Vec<u32>> = u_prime.basis().row_vecs();
        for j in 0..c {
            let img = ext.mul(&a, &ext.monomial(j));
            let mut v = cs.basis().row(j).to_vec();
            for (l, &coef) in img.iter().enumerate() {
                if coef == 0 {
                    continue;
                }
                for (o, &b) in v.iter_mut().zip(us.basis().row(l)) {
                    *o = field.add(*o, field.mul(coef, b));
                }
            }
            gens.push(v);
        }
        out.push(Subspace::span(field, w.ambient_dim(), &gens));
    }
    Ok(out)
}

/// Initial decomposition of `V` relative to `U`, of codimension `codim U`.
pub fn decomp_initial(space: &Space, u: &Subspace) -> Result<Decomposition> {
    space.check_subspace(u)?;
    if u.codim() > u.dim() {
        return Err(Error::DimensionPrecondition(format!(
            "codim U = {} exceeds dim U = {}",
            u.codim(),
            u.dim()
        )));
    }
    decomp_refine(space, &Decomposition::trivial(u), &BTreeMap::new())
}

/// Refines every part of `D`; a part with a target `W′ ≤ W ∩ U` (of
/// codimension 1 there) is split so that its cosets refine the cosets of `W′`.
pub fn decomp_refine(
    space: &Space,
    d: &Decomposition,
    targets: &BTreeMap<usize, Subspace>,
) -> Result<Decomposition> {
    for (&j, t) in targets {
        let Some(w) = d.parts.get(j) else {
            return Err(Error::InvalidInput(format!("no part {j} to target")));
        };
        let k = w.intersect(&d.u);
        if !t.is_subspace_of(&k) || t.dim() + 1 != k.dim() {
            return Err(Error::DimensionPrecondition(format!(
                "target for part {j} is not a hyperplane of W ∩ U"
            )));
        }
    }
    let mut parts = Vec::new();
    for (j, w) in d.parts.iter().enumerate() {
        let k = w.intersect(&d.u);
        parts.extend(line_family(w, &k, targets.get(&j))?);
    }
    let out = Decomposition {
        u: d.u.clone(),
        codim: d.codim + d.u.codim(),
        parts,
    };
    if space.size() <= 4096 {
        out.check(space)?;
    }
    Ok(out)
}
