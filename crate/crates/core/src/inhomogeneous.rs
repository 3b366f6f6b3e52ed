//! Reduction of inhomogeneous patterns `A x = b` to homogeneous patterns over
//! a complement of the span of the offsets, with a lifted color alphabet.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::pattern::{ColoredPattern, PatternFamily};
use crate::space::{Coloring, Space};
use crate::subspace::{increment, Subspace};

/// A colored pattern `H = (A, ψ)` with one offset vector per row of `A`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OffsetPattern {
    pub pattern: ColoredPattern,
    pub offsets: Vec<Vec<u32>>,
}

#[derive(serde::Deserialize)]
struct OffsetFile {
    p: u32,
    r: u32,
    rows: Vec<Vec<i64>>,
    psi: Vec<u32>,
    offsets: Vec<Vec<i64>>,
}

impl OffsetPattern {
    pub fn new(pattern: ColoredPattern, offsets: Vec<Vec<u32>>) -> Result<Self> {
        if offsets.len() != pattern.matrix().rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} offsets for {} rows",
                offsets.len(),
                pattern.matrix().rows()
            )));
        }
        Ok(OffsetPattern { pattern, offsets })
    }

    /// Parses a list of `{"p","r","rows","psi","offsets"}` objects.
    pub fn list_from_json(text: &str) -> Result<Vec<Self>> {
        let files: Vec<OffsetFile> = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("offset patterns: {e}")))?;
        files
            .into_iter()
            .map(|f| {
                let field = PrimeField::new(f.p)?;
                let pattern = ColoredPattern::from_rows(f.p, f.r, &f.rows, f.psi)?;
                let offsets = f
                    .offsets
                    .iter()
                    .map(|b| b.iter().map(|&v| field.reduce(v)).collect())
                    .collect();
                Self::new(pattern, offsets)
            })
            .collect()
    }
}

/// Where a generated homogeneous pattern came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Origin {
    /// Index of the source `(H, b)`.
    pub source: usize,
    /// The shift tuple `u ∈ B^k` (point indices in `V`) with `A u = b`.
    pub shift: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Reduction {
    /// `B`, the span of all offsets.
    pub b: Subspace,
    /// The complement `C` of `B` on which the lifted coloring lives.
    pub c: Subspace,
    /// Elements of `B` in coordinate order; lifted color digit `s` refers to `b_elements[s]`.
    pub b_elements: Vec<usize>,
    #[serde(skip)]
    pub lifted: Coloring,
    pub family: PatternFamily,
    pub origins: Vec<Origin>,
    /// Pattern count per source, `|B|^{k − rank A} r^{k(|B| − 1)}` when solvable.
    pub counts: Vec<u128>,
    #[serde(skip)]
    space: Space,
}

impl Reduction {
    /// Maps an instance of generated pattern `g` in the lifted coloring
    /// (point indices of `F_p^{dim C}`) to the corresponding `(H, b)`-instance in `V`.
    pub fn instance_map(&self, g: usize, y: &[usize]) -> Vec<usize> {
        let small = self.lifted.space();
        let o = &self.origins[g];
        y.iter()
            .zip(&o.shift)
            .map(|(&yi, &ui)| {
                let x = self.c.point(&small.decode(yi));
                self.space.add_idx(self.space.encode(&x), ui)
            })
            .collect()
    }

    pub fn space(&self) -> &Space {
        &self.space
    }
}

/// `1 + Σ_s (φ(x + β_s) − 1) r^s` over the elements `β_s` of `B`.
fn lift_color(phi: &Coloring, x: usize, b_elements: &[usize]) -> u32 {
    let space = phi.space();
    let r = phi.r();
    let mut code = 0u32;
    for &beta in b_elements.iter().rev() {
        code = code * r + (phi.get(space.add_idx(x, beta)) - 1);
    }
    code + 1
}

/// Reduces inhomogeneous patterns to a homogeneous family over `C ≅ V/B`.
pub fn inhomogeneous_reduce(patterns: &[OffsetPattern], phi: &Coloring) -> Result<Reduction> {
    let space = *phi.space();
    let (p, n, r) = (space.p(), space.dim(), phi.r());
    let field = space.field();
    let mut gens = Vec::new();
    for op in patterns {
        if op.pattern.p() != p || op.pattern.r() != r {
            return Err(Error::DimensionMismatch(
                "pattern field or colors differ from the coloring".into(),
            ));
        }
        for b in &op.offsets {
            if b.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "offset of length {} in dimension {n}",
                    b.len()
                )));
            }
            gens.push(b.clone());
        }
    }
    let b_sub = Subspace::span(field, n, &gens);
    let c_sub = b_sub.complement();
    let b_size = b_sub.size();
    let cap = space.limits().enum_cap;
    let alphabet = (r as u128).checked_pow(b_size as u32).unwrap_or(u128::MAX);
    if alphabet > u32::MAX as u128 || alphabet > cap {
        return Err(Error::resource(
            "lifted colors",
            alphabet,
            cap.min(u32::MAX as u128),
        ));
    }
    let b_elements = space.subspace_indices(&b_sub);
    let small = space.sibling(c_sub.dim())?;
    let lifted = Coloring::from_fn(small, alphabet as u32, |y| {
        let x = space.encode(&c_sub.point(&small.decode(y)));
        lift_color(phi, x, &b_elements)
    })?;

    let mut out = Vec::new();
    let mut origins = Vec::new();
    let mut counts = Vec::new();
    for (source, op) in patterns.iter().enumerate() {
        let h = &op.pattern;
        let k = h.k();
        let a = h.matrix();
        let tuples = (b_size as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
        if tuples > cap {
            return Err(Error::resource("shift tuples", tuples, cap));
        }
        let per_shift = (r as u128).pow((k * (b_size - 1)) as u32);
        let mut shifts = 0u128;
        let mut t = vec![0u32; k];
        loop {
            let shift: Vec<usize> = t.iter().map(|&s| b_elements[s as usize]).collect();
            let ok = (0..a.rows()).all(|row| {
                let mut acc = 0usize;
                for (i, &ui) in shift.iter().enumerate() {
                    acc = space.add_idx(acc, space.scale_idx(a.get(row, i), ui));
                }
                acc == space.encode(&op.offsets[row])
            });
            if ok {
                shifts += 1;
                if out.len() as u128 + per_shift > cap {
                    return Err(Error::resource(
                        "generated patterns",
                        out.len() as u128 + per_shift,
                        cap,
                    ));
                }
                expand(h, &t, r, b_size, alphabet as u32, &mut out)?;
                for _ in 0..per_shift {
                    origins.push(Origin {
                        source,
                        shift: shift.clone(),
                    });
                }
            }
            if !increment(&mut t, b_size as u32) {
                break;
            }
        }
        counts.push(shifts * per_shift);
    }
    let family = PatternFamily::new(p, alphabet as u32, out)?;
    Ok(Reduction {
        b: b_sub,
        c: c_sub,
        b_elements,
        lifted,
        family,
        origins,
        counts,
        space,
    })
}

/// Appends every lifted coloring `ψ̃` whose digit at `slot[i]` is `ψ(i)`.
fn expand(
    h: &ColoredPattern,
    slot: &[u32],
    r: u32,
    b_size: usize,
    alphabet: u32,
    out: &mut Vec<ColoredPattern>,
) -> Result<()> {
    let k = h.k();
    let free = k * (b_size - 1);
    let mut digits = vec![0u32; free];
    loop {
        let mut it = digits.iter();
        let psi: Vec<u32> = (0..k)
            .map(|i| {
                let mut code = 0u32;
                for s in (0..b_size).rev() {
                    let d = if s == slot[i] as usize {
                        h.psi()[i] - 1
                    } else {
                        *it.next().expect("enough free digits")
                    };
                    code = code * r + d;
                }
                code + 1
            })
            .collect();
        out.push(ColoredPattern::new(h.matrix().clone(), psi, alphabet)?);
        if !increment(&mut digits, r) {
            return Ok(());
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::pattern::solutions;

    #[test]
    fn zero_offsets_are_identity() {
        let space = Space::new(2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi = Coloring::random(space, 2, &mut rng);
        let h = ColoredPattern::from_rows(2, 2, &[vec![1, 1, 1]], vec![1, 2, 1]).unwrap();
        let op = OffsetPattern::new(h.clone(), vec![vec![0, 0, 0]]).unwrap();
        let red = inhomogeneous_reduce(&[op], &phi).unwrap();
        assert_eq!(red.b.dim(), 0);
        assert_eq!(red.family.len(), 1);
        assert_eq!(red.family.patterns()[0], h);
        assert_eq!(red.lifted.colors(), phi.colors());
    }

    #[test]
    fn pair_count_formula() {
        let space = Space::new(2, 3).unwrap();
        let phi = Coloring::constant(space, 3, 1).unwrap();
        let h = ColoredPattern::from_rows(2, 3, &[vec![1, 1]], vec![1, 2]).unwrap();
        let op = OffsetPattern::new(h, vec![vec![1, 0, 0]]).unwrap();
        let red = inhomogeneous_reduce(&[op], &phi).unwrap();
        assert_eq!(red.b.size(), 2);
        assert_eq!(red.family.len(), 2 * 9);
        assert_eq!(red.counts, vec![18]);
    }

    #[test]
    fn instances_correspond() {
        let space = Space::new(2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let phi = Coloring::random(space, 2, &mut rng);
        let h = ColoredPattern::from_rows(2, 2, &[vec![1, 1, 1]], vec![1, 1, 2]).unwrap();
        let op = OffsetPattern::new(h.clone(), vec![vec![0, 1, 0]]).unwrap();
        let red = inhomogeneous_reduce(&[op], &phi).unwrap();
        let mut mapped = Vec::new();
        for (g, hp) in red.family.patterns().iter().enumerate() {
            for y in solutions(hp.matrix(), red.lifted.space()).unwrap() {
                if y.iter()
                    .zip(hp.psi())
                    .all(|(&yi, &c)| red.lifted.get(yi) == c)
                {
                    mapped.push(red.instance_map(g, &y));
                }
            }
        }
        let mut direct = Vec::new();
        let b = space.encode(&[0, 1, 0]);
        for x0 in 0..8 {
            for x1 in 0..8 {
                let x2 = space.add_idx(space.add_idx(x0, x1), b);
                let x = vec![x0, x1, x2];
                if x.iter().zip(h.psi()).all(|(&xi, &c)| phi.get(xi) == c) {
                    direct.push(x);
                }
            }
        }
        mapped.sort();
        direct.sort();
        assert_eq!(mapped, direct);
    }
}
