//! Subspaces of F_p^n stored by their canonical (RREF) basis, so that equal
//! subspaces are structurally equal.

use std::fmt;

use rand::Rng;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::field::{dot, FpMatrix, PrimeField};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Subspace {
    ambient: usize,
    basis: FpMatrix,
    pivots: Vec<usize>,
}

impl fmt::Debug for Subspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Subspace<F_{}^{}>(dim {}) {:?}",
            self.p(),
            self.ambient,
            self.dim(),
            self.basis.row_vecs()
        )
    }
}

impl Serialize for Subspace {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            p: u32,
            n: usize,
            dim: usize,
            basis: Vec<Vec<u32>>,
        }
        Repr {
            p: self.p(),
            n: self.ambient,
            dim: self.dim(),
            basis: self.basis.row_vecs(),
        }
        .serialize(s)
    }
}

impl Subspace {
    /// Span of the given generators (need not be independent).
    pub fn span(field: PrimeField, ambient: usize, generators: &[Vec<u32>]) -> Self {
        let m = FpMatrix::from_reduced_rows(field, ambient, generators);
        Self::row_space(&m)
    }

    pub fn row_space(m: &FpMatrix) -> Self {
        let res = m.rref_rank_null();
        Subspace {
            ambient: m.cols(),
            basis: res.rref,
            pivots: res.pivots,
        }
    }

    /// `{x : M x = 0}`.
    pub fn kernel(m: &FpMatrix) -> Self {
        Self::row_space(&m.null_basis())
    }

    pub fn zero(field: PrimeField, ambient: usize) -> Self {
        Subspace {
            ambient,
            basis: FpMatrix::zeros(field, 0, ambient),
            pivots: Vec::new(),
        }
    }

    pub fn full(field: PrimeField, ambient: usize) -> Self {
        Subspace {
            ambient,
            basis: FpMatrix::identity(field, ambient),
            pivots: (0..ambient).collect(),
        }
    }

    /// `{x : x_0 = … = x_{c-1} = 0}`, the deterministic codimension-`c` subspace.
    pub fn trailing_coordinates(field: PrimeField, ambient: usize, codim: usize) -> Self {
        let codim = codim.min(ambient);
        let gens: Vec<Vec<u32>> = (codim..ambient).map(|j| unit(ambient, j)).collect();
        Self::span(field, ambient, &gens)
    }

    #[inline]
    pub fn field(&self) -> PrimeField {
        self.basis.field()
    }

    #[inline]
    pub fn p(&self) -> u32 {
        self.basis.p()
    }

    #[inline]
    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    #[inline]
    pub fn codim(&self) -> usize {
        self.ambient - self.dim()
    }

    pub fn basis(&self) -> &FpMatrix {
        &self.basis
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.ambient
    }

    /// Number of elements, `p^dim`.
    pub fn size(&self) -> usize {
        (self.p() as usize).pow(self.dim() as u32)
    }

    /// Canonical coset representative: `v` with every pivot coordinate cleared.
    pub fn reduce(&self, v: &[u32]) -> Vec<u32> {
        let f = self.field();
        let mut out = v.to_vec();
        for (r, &pc) in self.pivots.iter().enumerate() {
            let c = out[pc];
            if c == 0 {
                continue;
            }
            for (o, &b) in out.iter_mut().zip(self.basis.row(r)) {
                *o = f.sub(*o, f.mul(c, b));
            }
        }
        out
    }

    pub fn contains(&self, v: &[u32]) -> bool {
        self.reduce(v).iter().all(|&a| a == 0)
    }

    /// Coordinates of a member with respect to the canonical basis.
    pub fn coords(&self, v: &[u32]) -> Vec<u32> {
        debug_assert!(self.contains(v));
        self.pivots.iter().map(|&pc| v[pc]).collect()
    }

    /// `Σ t_j b_j`.
    pub fn point(&self, t: &[u32]) -> Vec<u32> {
        assert_eq!(t.len(), self.dim());
        let f = self.field();
        let mut out = vec![0; self.ambient];
        for (j, &c) in t.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for (o, &b) in out.iter_mut().zip(self.basis.row(j)) {
                *o = f.add(*o, f.mul(c, b));
            }
        }
        out
    }

    pub fn is_subspace_of(&self, other: &Subspace) -> bool {
        self.ambient == other.ambient && (0..self.dim()).all(|r| other.contains(self.basis.row(r)))
    }

    pub fn sum(&self, other: &Subspace) -> Subspace {
        Self::row_space(&self.basis.stack(&other.basis))
    }

    pub fn intersect(&self, other: &Subspace) -> Subspace {
        let constraints = self.annihilator().stack(&other.annihilator());
        Self::kernel(&constraints)
    }

    /// Matrix `A` with `{x : Ax = 0}` equal to this subspace; canonical RREF rows.
    pub fn annihilator(&self) -> FpMatrix {
        self.basis.null_basis().row_space_rref()
    }

    /// Complement spanned by the standard unit vectors at non-pivot positions.
    pub fn complement(&self) -> Subspace {
        let gens: Vec<Vec<u32>> = (0..self.ambient)
            .filter(|c| !self.pivots.contains(c))
            .map(|c| unit(self.ambient, c))
            .collect();
        Subspace::span(self.field(), self.ambient, &gens)
    }

    /// Uniformly random complement.
    ///
    /// Complements of `S` are exactly the graphs `{c + L(c)}` of linear maps
    /// `L` from the deterministic complement into `S`, so drawing the matrix of
    /// `L` uniformly draws the complement uniformly.
    pub fn random_complement<R: Rng + ?Sized>(&self, rng: &mut R) -> Subspace {
        let f = self.field();
        let p = self.p();
        let gens: Vec<Vec<u32>> = (0..self.ambient)
            .filter(|c| !self.pivots.contains(c))
            .map(|c| {
                let mut v = unit(self.ambient, c);
                for r in 0..self.dim() {
                    let coef = rng.gen_range(0..p);
                    for (o, &b) in v.iter_mut().zip(self.basis.row(r)) {
                        *o = f.add(*o, f.mul(coef, b));
                    }
                }
                v
            })
            .collect();
        Subspace::span(f, self.ambient, &gens)
    }

    /// Expresses a subspace `inner ≤ self` in the coordinates of `self`.
    pub fn in_coords(&self, inner: &Subspace) -> Result<Subspace> {
        if !inner.is_subspace_of(self) {
            return Err(Error::InvalidInput(
                "in_coords: argument is not a subspace".into(),
            ));
        }
        let gens: Vec<Vec<u32>> = (0..inner.dim())
            .map(|r| self.coords(inner.basis.row(r)))
            .collect();
        Ok(Subspace::span(self.field(), self.dim(), &gens))
    }

    /// Image of a subspace of `F_p^{dim self}` under the coordinate map of `self`.
    pub fn from_coords(&self, coord_sub: &Subspace) -> Subspace {
        assert_eq!(coord_sub.ambient, self.dim());
        let gens: Vec<Vec<u32>> = (0..coord_sub.dim())
            .map(|r| self.point(coord_sub.basis.row(r)))
            .collect();
        Subspace::span(self.field(), self.ambient, &gens)
    }

    /// Deterministic complement of `inner` inside `self`.
    pub fn complement_within(&self, inner: &Subspace) -> Result<Subspace> {
        let c = self.in_coords(inner)?.complement();
        Ok(self.from_coords(&c))
    }

    /// Span of the last `k` canonical basis rows.
    pub fn trailing(&self, k: usize) -> Subspace {
        assert!(k <= self.dim());
        let gens: Vec<Vec<u32>> = (self.dim() - k..self.dim())
            .map(|r| self.basis.row(r).to_vec())
            .collect();
        Subspace::span(self.field(), self.ambient, &gens)
    }

    /// `{y ∈ self : coords(y) · z = 0}` for a nonzero dual vector `z` in
    /// the coordinates of `self`.
    pub fn hyperplane(&self, z: &[u32]) -> Subspace {
        assert_eq!(z.len(), self.dim());
        let f = self.field();
        let m = FpMatrix::from_reduced_rows(f, self.dim(), &[z.to_vec()]);
        self.from_coords(&Subspace::kernel(&m))
    }

    /// `{y ∈ self : coords(y) · z = 0 for every row z}`.
    pub fn cut_by(&self, duals: &[Vec<u32>]) -> Subspace {
        let m = FpMatrix::from_reduced_rows(self.field(), self.dim(), duals);
        self.from_coords(&Subspace::kernel(&m))
    }

    /// All elements, ordered by the little-endian index of their coordinate vector.
    pub fn elements(&self) -> Vec<Vec<u32>> {
        let p = self.p();
        let d = self.dim();
        let mut t = vec![0u32; d];
        let mut out = Vec::with_capacity(self.size());
        loop {
            out.push(self.point(&t));
            if !increment(&mut t, p) {
                break;
            }
        }
        out
    }

    pub fn orthogonal_dot(&self, a: &[u32], b: &[u32]) -> u32 {
        dot(self.field(), a, b)
    }
}

/// Unit vector `e_j` of length `n`.
pub fn unit(n: usize, j: usize) -> Vec<u32> {
    let mut v = vec![0; n];
    v[j] = 1;
    v
}

/// Little-endian odometer step over `F_p^len`; returns `false` after wrapping to zero.
pub fn increment(t: &mut [u32], p: u32) -> bool {
    for d in t.iter_mut() {
        *d += 1;
        if *d < p {
            return true;
        }
        *d = 0;
    }
    false
}

/// Helper for splitting `V = U ⊕ W` into components.
#[derive(Clone, Debug)]
pub struct Splitting {
    u: Subspace,
    w: Subspace,
    inverse: FpMatrix,
}

impl Splitting {
    pub fn new(u: &Subspace, w: &Subspace) -> Result<Self> {
        if u.ambient_dim() != w.ambient_dim() || u.dim() + w.dim() != u.ambient_dim() {
            return Err(Error::DimensionMismatch(
                "splitting needs complementary dimensions".into(),
            ));
        }
        let stacked = u.basis().stack(w.basis());
        // rows of `stacked` form a basis of V; x = coeffs · stacked
        let inverse = stacked
            .inverse()
            .ok_or_else(|| Error::InvalidInput("subspaces are not complementary".into()))?;
        Ok(Splitting {
            u: u.clone(),
            w: w.clone(),
            inverse,
        })
    }

    /// Returns `(u, w)` with `x = u + w`.
    pub fn split(&self, x: &[u32]) -> (Vec<u32>, Vec<u32>) {
        let du = self.u.dim();
        // coefficient row vector c with c · stacked = x, i.e. c = x · stacked^{-1}
        let coeffs = self.inverse.transpose().mul_vec(x);
        let u = self.u.point(&coeffs[..du]);
        let w = self.w.point(&coeffs[du..]);
        (u, w)
    }
}
