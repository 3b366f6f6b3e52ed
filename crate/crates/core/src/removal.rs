//! The induced removal pipeline: regularity recoloring, selection of sparse
//! subpatterns, a canonical patch around the origin and an exhaustive
//! freeness check of the result.

use log::info;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pattern::{
    complexity1_check, density, pattern_stats, subpattern, ColoredPattern, Density, PatternFamily,
    SolutionSpace,
};
use crate::ramsey::{decide_dichotomy, CanonicalSpec, Case, Certificate, DichotomyResult};
use crate::regularize::{regularity_recolor, Backend, EpsSchedule, RecoloringReport};
use crate::space::{Coloring, Space};
use crate::subspace::Subspace;
use crate::TOL;

/// Every subpattern of every member, deduplicated by row space and colors.
pub fn subpattern_closure(family: &PatternFamily) -> Result<PatternFamily> {
    let mut out: Vec<ColoredPattern> = Vec::new();
    for h in family.patterns() {
        let k = h.k();
        for mask in 1u64..(1 << k) {
            let vars: Vec<usize> = (0..k).filter(|&i| mask >> i & 1 == 1).collect();
            let s = subpattern(h, &vars)?.canonical();
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    PatternFamily::new(family.p(), family.r(), out)
}

#[derive(Clone, Debug, Serialize)]
pub struct RemovalParams {
    pub eps: f64,
    pub eps_rado: f64,
    pub eps_reg: f64,
    pub seed: u64,
    pub backend: Backend,
    /// Skip the complexity-1 requirement (needed for `p = 2`, where it is not decided).
    pub assume_complexity_one: bool,
}

impl RemovalParams {
    pub fn new(eps: f64) -> Self {
        RemovalParams {
            eps,
            eps_rado: 0.01,
            eps_reg: 0.05,
            seed: 0,
            backend: Backend::Strong,
            assume_complexity_one: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "eps must lie in (0, 1], got {}",
                self.eps
            )));
        }
        if !(self.eps_rado > 0.0) || !(self.eps_reg > 0.0) {
            return Err(Error::InvalidInput(
                "eps_rado and eps_reg must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PatternVerdict {
    pub pattern: usize,
    pub density: Density,
    pub nonzero_instances: u128,
    /// First remaining instance, as coordinate vectors.
    pub instance: Option<Vec<Vec<u32>>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RemovalReport {
    #[serde(skip)]
    pub phi_prime: Coloring,
    pub params: RemovalParams,
    pub changed_count: usize,
    /// `(ε/2)|V| + p^{−codim V_1}|V|`.
    pub change_bound: f64,
    pub v1: Subspace,
    pub v2: Subspace,
    pub u: Subspace,
    pub recolor_changed: usize,
    /// Patterns dropped because no solution avoids zero at this dimension.
    pub dropped: Vec<usize>,
    pub closure_size: usize,
    /// Indices into the closure of the patterns sparse in `φ|_{V_2}`.
    pub sparse_subpatterns: Vec<usize>,
    pub sparse_densities: Vec<Density>,
    pub patch: CanonicalSpec,
    pub verdicts: Vec<PatternVerdict>,
    pub free: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AbortStage {
    /// The sparse subpatterns admit no free canonical patch.
    Patch,
    /// The patched coloring still has an instance and the input family is Case A.
    Residual,
}

#[derive(Clone, Debug, Serialize)]
pub enum Evidence {
    CaseA {
        stage: AbortStage,
        family: PatternFamily,
        certificate: Certificate,
        dichotomy: DichotomyResult,
        /// Remaining instance in the patched coloring (residual stage).
        instance: Option<(usize, Vec<Vec<u32>>)>,
    },
    /// The patched coloring has an instance although the input family is Case B.
    ResidualInstance {
        pattern: usize,
        instance: Vec<Vec<u32>>,
        counting: CountingDiagnostic,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct Aborted {
    pub evidence: Evidence,
    /// Everything computed up to the abort, if the patch was built.
    pub partial: Option<RemovalReport>,
    pub recoloring: Option<RecolorSummary>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RecolorSummary {
    pub changed_count: usize,
    pub codim_v1: usize,
    pub codim_v2: usize,
}

impl From<&RecoloringReport> for RecolorSummary {
    fn from(r: &RecoloringReport) -> Self {
        RecolorSummary {
            changed_count: r.changed_count,
            codim_v1: r.v1.codim(),
            codim_v2: r.v2.codim(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
#[allow(clippy::large_enum_variant)]
pub enum Outcome {
    Free(RemovalReport),
    Aborted(Aborted),
}

fn check_family(phi: &Coloring, family: &PatternFamily, params: &RemovalParams) -> Result<()> {
    if family.p() != phi.space().p() {
        return Err(Error::DimensionMismatch(format!(
            "family over F_{} against a coloring over F_{}",
            family.p(),
            phi.space().p()
        )));
    }
    if family.r() != phi.r() {
        return Err(Error::InvalidInput(format!(
            "family has r = {} but the coloring has r = {}",
            family.r(),
            phi.r()
        )));
    }
    if params.assume_complexity_one {
        return Ok(());
    }
    for (j, h) in family.patterns().iter().enumerate() {
        if !complexity1_check(h.matrix())? {
            return Err(Error::InvalidInput(format!(
                "pattern {j} does not have complexity 1"
            )));
        }
    }
    Ok(())
}

fn has_nonzero_solution(h: &ColoredPattern, space: &Space) -> Result<bool> {
    let sol = SolutionSpace::new(h.matrix(), space)?;
    Ok(sol.find_first(|x| x.iter().all(|&xi| xi != 0)).is_some())
}

/// Recolors the nonzero points of `v1` by the canonical coloring taken in the
/// coordinates of its RREF basis.
fn patch(phi: &mut Coloring, v1: &Subspace, spec: &CanonicalSpec) {
    let space = *phi.space();
    for idx in space.subspace_indices(v1) {
        if idx == 0 {
            continue;
        }
        let t = v1.coords(&space.decode(idx));
        phi.set(
            idx,
            spec.color_of(&t)
                .expect("nonzero point has nonzero coordinates"),
        );
    }
}

/// Exhaustive freeness check, one verdict per pattern.
pub fn freeness_verdicts(
    phi: &Coloring,
    family: &PatternFamily,
    skip: &[usize],
) -> Result<Vec<PatternVerdict>> {
    let space = *phi.space();
    let mut out = Vec::new();
    for (j, h) in family.patterns().iter().enumerate() {
        if skip.contains(&j) {
            continue;
        }
        let st = pattern_stats(h, phi)?;
        let instance = if st.is_free {
            None
        } else {
            crate::pattern::find_nonzero_instance(h, phi)?
                .map(|x| x.iter().map(|&i| space.decode(i)).collect())
        };
        out.push(PatternVerdict {
            pattern: j,
            density: st.density,
            nonzero_instances: st.nonzero_instance_count,
            instance,
        });
    }
    Ok(out)
}

/// Induced arithmetic removal for a finite family of colored patterns.
pub fn induced_removal(
    phi: &Coloring,
    family: &PatternFamily,
    params: &RemovalParams,
) -> Result<Outcome> {
    params.validate()?;
    check_family(phi, family, params)?;
    let space = *phi.space();
    let (p, r) = (space.p(), phi.r());

    let mut dropped = Vec::new();
    let mut kept = Vec::new();
    for (j, h) in family.patterns().iter().enumerate() {
        if has_nonzero_solution(h, &space)? {
            kept.push(h.clone());
        } else {
            dropped.push(j);
        }
    }
    let active = PatternFamily::new(p, r, kept)?;

    info!("removal: regularity recoloring");
    let rec = regularity_recolor(
        phi,
        params.eps / 2.0,
        &EpsSchedule::Constant(params.eps_reg),
        params.backend,
        params.seed,
    )?;
    let summary = RecolorSummary::from(&rec);

    info!("removal: selecting sparse subpatterns");
    let closure = subpattern_closure(&active)?;
    let on_v2 = phi.restrict(0, &rec.v2)?;
    let mut sparse = Vec::new();
    let mut sparse_densities = Vec::new();
    let mut sparse_patterns = Vec::new();
    for (j, h) in closure.patterns().iter().enumerate() {
        let d = density(h, &on_v2)?;
        if d.value() < params.eps_rado {
            sparse.push(j);
            sparse_densities.push(d);
            sparse_patterns.push(h.clone());
        }
    }
    let h_prime = PatternFamily::new(p, r, sparse_patterns)?;

    info!(
        "removal: deciding the patch ({} sparse subpatterns)",
        h_prime.len()
    );
    let dich = decide_dichotomy(&h_prime)?;
    let Some(spec) = dich.witness.clone() else {
        let certificate = dich.certificates[0].clone();
        return Ok(Outcome::Aborted(Aborted {
            evidence: Evidence::CaseA {
                stage: AbortStage::Patch,
                family: h_prime,
                certificate,
                dichotomy: dich,
                instance: None,
            },
            partial: None,
            recoloring: Some(summary),
        }));
    };
    let mut phi_prime = rec.new.clone();
    patch(&mut phi_prime, &rec.v1, &spec);

    let size = space.size() as f64;
    let changed_count = phi.hamming(&phi_prime);
    let change_bound = params.eps / 2.0 * size + (p as f64).powi(-(rec.v1.codim() as i32)) * size;
    if changed_count as f64 > change_bound + TOL {
        return Err(Error::VerifierFailed(format!(
            "removal changed {changed_count} points, bound {change_bound}"
        )));
    }
    if rec.v1.codim() as f64 >= (2.0 / params.eps).ln() / (p as f64).ln() - TOL
        && changed_count as f64 > params.eps * size + TOL
    {
        return Err(Error::VerifierFailed(format!(
            "removal changed {changed_count} points, budget {}",
            params.eps * size
        )));
    }

    info!("removal: exhaustive freeness check");
    let verdicts = freeness_verdicts(&phi_prime, family, &dropped)?;
    let free = verdicts.iter().all(|v| v.nonzero_instances == 0);
    let report = RemovalReport {
        phi_prime,
        params: params.clone(),
        changed_count,
        change_bound,
        v1: rec.v1.clone(),
        v2: rec.v2.clone(),
        u: rec.u.clone(),
        recolor_changed: rec.changed_count,
        dropped,
        closure_size: closure.len(),
        sparse_subpatterns: sparse,
        sparse_densities,
        patch: spec,
        verdicts,
        free,
    };
    if free {
        return Ok(Outcome::Free(report));
    }

    let bad = report
        .verdicts
        .iter()
        .find(|v| v.nonzero_instances > 0)
        .expect("not free");
    let (j, inst) = (
        bad.pattern,
        bad.instance.clone().expect("instance recorded"),
    );
    let whole = decide_dichotomy(family)?;
    if whole.case == Case::A {
        let certificate = whole.certificates[0].clone();
        return Ok(Outcome::Aborted(Aborted {
            evidence: Evidence::CaseA {
                stage: AbortStage::Residual,
                family: family.clone(),
                certificate,
                dichotomy: whole,
                instance: Some((j, inst)),
            },
            partial: Some(report),
            recoloring: Some(summary),
        }));
    }
    let h = &family.patterns()[j];
    let split = crate::subspace::Splitting::new(&report.u, &report.v1)?;
    let u_points: Vec<Vec<u32>> = inst.iter().map(|x| split.split(x).0).collect();
    let counting = certify_counting(phi, h, &u_points, &report.v2)?;
    Ok(Outcome::Aborted(Aborted {
        evidence: Evidence::ResidualInstance {
            pattern: j,
            instance: inst,
            counting,
        },
        partial: Some(report),
        recoloring: Some(summary),
    }))
}

/// Measured quantities of the counting chain for one shift `u` and subspace `V_2`.
#[derive(Clone, Debug, Serialize)]
pub struct CountingDiagnostic {
    /// `Λ_A(f_1..f_k)` on `V` for the color-class indicators.
    pub lambda_v: Density,
    /// `Λ_A(g_1..g_k)` on `V_2` with `g_i(y) = f_i(y + u_i)`.
    pub lambda_v2: Density,
    /// `p^{−(k − rank A)·codim V_2}`.
    pub scale: f64,
    /// `Λ_V ≥ scale · Λ_{V_2}`, checked in exact integer arithmetic.
    pub restriction_holds: bool,
    /// Indices `i` with `u_i = 0`.
    pub zero_indices: Vec<usize>,
    /// `Λ_{A′}(g_i : u_i = 0)`, or 1 when no `u_i` is zero.
    pub subpattern_lambda: f64,
    /// `E g_i` for each `i`.
    pub means: Vec<f64>,
    /// `(∏_{u_i ≠ 0} E g_i) · Λ_{A′}(g_i : u_i = 0)`; reported, not asserted.
    pub product_bound: f64,
}

/// The counting chain behind removal: restricting instances to `u + V_2^k`
/// can only lose instances, and the product heuristic is reported.
pub fn certify_counting(
    phi: &Coloring,
    h: &ColoredPattern,
    u: &[Vec<u32>],
    v2: &Subspace,
) -> Result<CountingDiagnostic> {
    let space = *phi.space();
    space.check_subspace(v2)?;
    if u.len() != h.k() || u.iter().any(|x| x.len() != space.dim()) {
        return Err(Error::DimensionMismatch(
            "u must be a k-tuple of vectors in V".into(),
        ));
    }
    let f = space.field();
    let a = h.matrix();
    for row in 0..a.rows() {
        for c in 0..space.dim() {
            let s = u
                .iter()
                .enumerate()
                .fold(0, |s, (i, x)| f.add(s, f.mul(a.get(row, i), x[c])));
            if s != 0 {
                return Err(Error::InvalidInput("A u must vanish".into()));
            }
        }
    }
    let lambda_v = density(h, phi)?;
    let sub = space.sibling(v2.dim())?;
    let shifted: Vec<Coloring> = u
        .iter()
        .map(|ui| {
            let rep = space.encode(ui);
            phi.restrict(rep, v2)
        })
        .collect::<Result<_>>()?;
    let masks: Vec<Vec<bool>> = h
        .psi()
        .iter()
        .zip(&shifted)
        .map(|(&c, g)| g.colors().iter().map(|&x| x == c).collect())
        .collect();
    let refs: Vec<&[bool]> = masks.iter().map(|m| m.as_slice()).collect();
    let lambda_v2 = crate::pattern::lambda_indicators(a, &sub, &refs)?;
    let m = (h.k() - h.rank()) as i32;
    let scale = (space.p() as f64).powi(-m * v2.codim() as i32);
    // Λ_V = c_V / p^{nm} and Λ_{V_2} = c_2 / p^{dm}, so the inequality is c_V ≥ c_2.
    let restriction_holds = lambda_v.count >= lambda_v2.count;
    let means: Vec<f64> = masks
        .iter()
        .map(|m| m.iter().filter(|&&b| b).count() as f64 / m.len() as f64)
        .collect();
    let zero_indices: Vec<usize> = (0..h.k())
        .filter(|&i| u[i].iter().all(|&v| v == 0))
        .collect();
    let subpattern_lambda = if zero_indices.is_empty() {
        1.0
    } else {
        let hp = subpattern(h, &zero_indices)?;
        let sub_refs: Vec<&[bool]> = zero_indices.iter().map(|&i| masks[i].as_slice()).collect();
        crate::pattern::lambda_indicators(hp.matrix(), &sub, &sub_refs)?.value()
    };
    let product_bound = (0..h.k())
        .filter(|i| !zero_indices.contains(i))
        .map(|i| means[i])
        .product::<f64>()
        * subpattern_lambda;
    Ok(CountingDiagnostic {
        lambda_v,
        lambda_v2,
        scale,
        restriction_holds,
        zero_indices,
        subpattern_lambda,
        means,
        product_bound,
    })
}
