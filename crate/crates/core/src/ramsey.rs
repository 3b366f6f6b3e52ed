//! Canonical colorings and the finite check deciding the density Ramsey dichotomy.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pattern::{find_nonzero_instance, is_nonzero_instance, PatternFamily};
use crate::space::{Coloring, Space};

/// A map `χ: F_p ∖ {0} → [r]`, stored as `chi[a − 1] = χ(a)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct CanonicalSpec {
    pub p: u32,
    pub r: u32,
    pub chi: Vec<u32>,
}

impl CanonicalSpec {
    pub fn new(p: u32, r: u32, chi: Vec<u32>) -> Result<Self> {
        if chi.len() + 1 != p as usize {
            return Err(Error::InvalidInput(format!(
                "chi needs {} values, got {}",
                p - 1,
                chi.len()
            )));
        }
        if let Some(c) = chi.iter().find(|&&c| c == 0 || c > r) {
            return Err(Error::InvalidInput(format!(
                "chi value {c} outside [1, {r}]"
            )));
        }
        Ok(CanonicalSpec { p, r, chi })
    }

    pub fn identity(p: u32) -> Self {
        CanonicalSpec {
            p,
            r: p - 1,
            chi: (1..p).collect(),
        }
    }

    pub fn constant(p: u32, r: u32, c: u32) -> Result<Self> {
        Self::new(p, r, vec![c; p as usize - 1])
    }

    /// Spec number `code` in lexicographic order, `χ(1)` most significant.
    pub fn from_code(p: u32, r: u32, mut code: u64) -> Self {
        let mut chi = vec![1u32; p as usize - 1];
        for slot in chi.iter_mut().rev() {
            *slot = (code % r as u64) as u32 + 1;
            code /= r as u64;
        }
        CanonicalSpec { p, r, chi }
    }

    #[inline]
    pub fn color(&self, a: u32) -> u32 {
        self.chi[a as usize - 1]
    }

    /// Color of a nonzero vector given by its coordinates; `None` for zero.
    pub fn color_of(&self, x: &[u32]) -> Option<u32> {
        x.iter().find(|&&v| v != 0).map(|&v| self.color(v))
    }
}

/// `Φ_{n,χ}` on `F_p^n`. The zero vector is uncolored in the definition; it
/// gets color 1 here and is ignored by every nonzero-instance search.
pub fn canonical_coloring(space: &Space, spec: &CanonicalSpec) -> Result<Coloring> {
    if space.p() != spec.p {
        return Err(Error::DimensionMismatch(format!(
            "spec over F_{} used on {space:?}",
            spec.p
        )));
    }
    Coloring::from_fn(*space, spec.r, |i| {
        spec.color_of(&space.decode(i)).unwrap_or(1)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Case {
    A,
    B,
}

/// An instance of pattern `pattern` inside `Φ_{n,χ}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Certificate {
    pub spec: CanonicalSpec,
    pub pattern: usize,
    pub instance: Vec<Vec<u32>>,
}

/// Outcome of the exhaustive search for one pattern under one spec.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SearchRecord {
    pub pattern: usize,
    pub solutions_searched: u128,
    pub found: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DichotomyResult {
    pub case: Case,
    /// Dimension `k_max` of the search space.
    pub dim: usize,
    pub witness: Option<CanonicalSpec>,
    /// One certificate per spec examined before the answer was known.
    pub certificates: Vec<Certificate>,
    /// Exhaustive-search transcript for the witness (Case B only).
    pub transcript: Vec<SearchRecord>,
}

enum SpecOutcome {
    Found(Certificate),
    Free(Vec<SearchRecord>),
}

fn examine(family: &PatternFamily, space: &Space, spec: CanonicalSpec) -> Result<SpecOutcome> {
    let phi = canonical_coloring(space, &spec)?;
    let mut transcript = Vec::new();
    for (j, h) in family.patterns().iter().enumerate() {
        if let Some(x) = find_nonzero_instance(h, &phi)? {
            let instance = x.iter().map(|&i| space.decode(i)).collect();
            return Ok(SpecOutcome::Found(Certificate {
                spec,
                pattern: j,
                instance,
            }));
        }
        let m = h.k() - h.rank();
        transcript.push(SearchRecord {
            pattern: j,
            solutions_searched: (space.size() as u128).pow(m as u32),
            found: false,
        });
    }
    Ok(SpecOutcome::Free(transcript))
}

/// Decides the dichotomy for a finite family by searching every canonical
/// coloring of `F_p^{k_max}` for a nonzero instance.
pub fn decide_dichotomy(family: &PatternFamily) -> Result<DichotomyResult> {
    let (p, r) = (family.p(), family.r());
    let k = family.k_max();
    let space = Space::new(p, k)?;
    let specs = (r as u128).checked_pow(p - 1).unwrap_or(u128::MAX);
    let cap = space.limits().enum_cap;
    if specs > cap {
        return Err(Error::resource("canonical specs", specs, cap));
    }
    if family.is_empty() {
        return Ok(DichotomyResult {
            case: Case::B,
            dim: k,
            witness: Some(CanonicalSpec::from_code(p, r, 0)),
            certificates: Vec::new(),
            transcript: Vec::new(),
        });
    }
    let outcomes: Vec<Result<SpecOutcome>> = (0..specs as u64)
        .into_par_iter()
        .map(|code| examine(family, &space, CanonicalSpec::from_code(p, r, code)))
        .collect();
    let mut certificates = Vec::new();
    for o in outcomes {
        match o? {
            SpecOutcome::Found(c) => certificates.push(c),
            SpecOutcome::Free(transcript) => {
                let witness = CanonicalSpec::from_code(p, r, certificates.len() as u64);
                return Ok(DichotomyResult {
                    case: Case::B,
                    dim: k,
                    witness: Some(witness),
                    certificates,
                    transcript,
                });
            }
        }
    }
    Ok(DichotomyResult {
        case: Case::A,
        dim: k,
        witness: None,
        certificates,
        transcript: Vec::new(),
    })
}

/// Re-checks a certificate from scratch against `Φ_{n,χ}`.
pub fn verify_certificate(family: &PatternFamily, cert: &Certificate) -> Result<bool> {
    let Some(h) = family.patterns().get(cert.pattern) else {
        return Ok(false);
    };
    let n = cert.instance.first().map_or(0, |x| x.len());
    let space = Space::new(family.p(), n)?;
    let phi = canonical_coloring(&space, &cert.spec)?;
    Ok(is_nonzero_instance(h, &phi, &cert.instance))
}

/// Whether `Φ_{n,χ}` is free of every pattern in the family.
pub fn canonical_is_free(family: &PatternFamily, spec: &CanonicalSpec, n: usize) -> Result<bool> {
    let space = Space::new(family.p(), n)?;
    let phi = canonical_coloring(&space, spec)?;
    for h in family.patterns() {
        if find_nonzero_instance(h, &phi)?.is_some() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::pattern_stats;

    #[test]
    fn spec_order() {
        assert_eq!(CanonicalSpec::from_code(5, 4, 0).chi, vec![1, 1, 1, 1]);
        assert_eq!(CanonicalSpec::from_code(5, 4, 1).chi, vec![1, 1, 1, 2]);
        assert_eq!(CanonicalSpec::from_code(5, 4, 4).chi, vec![1, 1, 2, 1]);
        assert_eq!(CanonicalSpec::from_code(5, 4, 255).chi, vec![4, 4, 4, 4]);
    }

    #[test]
    fn first_nonzero_coordinate() {
        let space = Space::new(3, 3).unwrap();
        let spec = CanonicalSpec::new(3, 2, vec![2, 1]).unwrap();
        let phi = canonical_coloring(&space, &spec).unwrap();
        assert_eq!(phi.get(space.encode(&[0, 2, 1])), spec.color(2));
        assert_eq!(phi.get(space.encode(&[1, 2, 1])), 2);
        let c = canonical_coloring(&space, &CanonicalSpec::constant(3, 2, 2).unwrap()).unwrap();
        assert!((1..space.size()).all(|i| c.get(i) == 2));
    }

    #[test]
    fn schur_over_f5_is_case_b() {
        let fam = PatternFamily::monochromatic(5, 4, &[vec![1, 1, 1]], 3).unwrap();
        let res = decide_dichotomy(&fam).unwrap();
        assert_eq!(res.case, Case::B);
        let w = res.witness.unwrap();
        for n in 3..=4 {
            assert!(canonical_is_free(&fam, &w, n).unwrap());
        }
        for c in &res.certificates {
            assert!(verify_certificate(&fam, c).unwrap());
        }
        // identity is also a valid witness
        let id = CanonicalSpec::identity(5);
        let space = Space::new(5, 3).unwrap();
        let phi = canonical_coloring(&space, &id).unwrap();
        for h in fam.patterns() {
            assert!(pattern_stats(h, &phi).unwrap().is_free);
        }
    }

    #[test]
    fn schur_over_f2_is_case_a() {
        let fam = PatternFamily::monochromatic(2, 1, &[vec![1, 1, 1]], 3).unwrap();
        let res = decide_dichotomy(&fam).unwrap();
        assert_eq!(res.case, Case::A);
        assert_eq!(res.certificates.len(), 1);
        assert!(verify_certificate(&fam, &res.certificates[0]).unwrap());
    }

    #[test]
    fn empty_family_is_case_b() {
        let fam = PatternFamily::empty(3, 2).unwrap();
        let res = decide_dichotomy(&fam).unwrap();
        assert_eq!(res.case, Case::B);
        assert!(res.witness.is_some());
    }
}
