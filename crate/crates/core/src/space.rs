//! The ambient space F_p^n as an indexed point set, plus dense colorings and
//! functions stored by little-endian point index.

use std::fmt;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::subspace::Subspace;

pub const DEFAULT_POINT_CAP: u128 = 1 << 20;
pub const DEFAULT_ENUM_CAP: u128 = 100_000_000;
pub const POINT_CAP_ENV: &str = "REMOVAL_LAB_CAP";

/// Size limits applied to point sets and solution enumerations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub point_cap: u128,
    pub enum_cap: u128,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            point_cap: DEFAULT_POINT_CAP,
            enum_cap: DEFAULT_ENUM_CAP,
        }
    }
}

impl Limits {
    /// Defaults, with the point cap taken from `REMOVAL_LAB_CAP` when set.
    pub fn from_env() -> Self {
        let mut lim = Limits::default();
        if let Some(cap) = std::env::var(POINT_CAP_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<u128>().ok())
        {
            lim.point_cap = cap;
        }
        lim
    }
}

#[derive(Clone, Copy)]
pub struct Space {
    field: PrimeField,
    n: usize,
    size: usize,
    limits: Limits,
}

impl PartialEq for Space {
    fn eq(&self, other: &Self) -> bool {
        self.field == other.field && self.n == other.n
    }
}

impl Eq for Space {}

impl fmt::Debug for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}^{}", self.p(), self.n)
    }
}

impl Space {
    pub fn new(p: u32, n: usize) -> Result<Self> {
        Self::with_limits(PrimeField::new(p)?, n, Limits::from_env())
    }

    pub fn with_limits(field: PrimeField, n: usize, limits: Limits) -> Result<Self> {
        let size = (field.p() as u128).checked_pow(n as u32);
        match size {
            Some(s) if s <= limits.point_cap => Ok(Space {
                field,
                n,
                size: s as usize,
                limits,
            }),
            _ => Err(Error::resource(
                format!("space F_{}^{}", field.p(), n),
                size.unwrap_or(u128::MAX),
                limits.point_cap,
            )),
        }
    }

    /// The space of the same characteristic and limits with dimension `n`.
    pub fn sibling(&self, n: usize) -> Result<Self> {
        Self::with_limits(self.field, n, self.limits)
    }

    #[inline]
    pub fn field(&self) -> PrimeField {
        self.field
    }

    #[inline]
    pub fn p(&self) -> u32 {
        self.field.p()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn limits(&self) -> Limits {
        self.limits
    }

    pub fn set_limits(&mut self, limits: Limits) {
        self.limits = limits;
    }

    pub fn encode(&self, x: &[u32]) -> usize {
        debug_assert_eq!(x.len(), self.n);
        let p = self.p() as usize;
        x.iter().rev().fold(0, |acc, &c| acc * p + c as usize)
    }

    pub fn try_encode(&self, x: &[u32]) -> Result<usize> {
        if x.len() != self.n || x.iter().any(|&c| c >= self.p()) {
            return Err(Error::InvalidInput(format!(
                "{x:?} is not a point of {self:?}"
            )));
        }
        Ok(self.encode(x))
    }

    pub fn decode(&self, mut idx: usize) -> Vec<u32> {
        debug_assert!(idx < self.size);
        let p = self.p() as usize;
        let mut out = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            out.push((idx % p) as u32);
            idx /= p;
        }
        out
    }

    pub fn try_decode(&self, idx: usize) -> Result<Vec<u32>> {
        if idx >= self.size {
            return Err(Error::InvalidInput(format!(
                "index {idx} out of range for {self:?}"
            )));
        }
        Ok(self.decode(idx))
    }

    /// Index of `x + y`.
    #[inline]
    pub fn add_idx(&self, a: usize, b: usize) -> usize {
        let p = self.p() as usize;
        if p == 2 {
            return a ^ b;
        }
        let (mut a, mut b) = (a, b);
        let mut out = 0;
        let mut place = 1;
        while a > 0 || b > 0 {
            let d = (a % p + b % p) % p;
            out += d * place;
            place *= p;
            a /= p;
            b /= p;
        }
        out
    }

    /// Index of `c · x`.
    #[inline]
    pub fn scale_idx(&self, c: u32, a: usize) -> usize {
        let p = self.p() as usize;
        let c = c as usize % p;
        if c == 0 {
            return 0;
        }
        if c == 1 {
            return a;
        }
        let mut a = a;
        let mut out = 0;
        let mut place = 1;
        while a > 0 {
            out += (a % p) * c % p * place;
            place *= p;
            a /= p;
        }
        out
    }

    /// Indices of `rep + Σ t_j b_j` in little-endian order of `t`, where `b_j`
    /// are the canonical basis rows of `w`.
    pub fn coset_indices(&self, rep: usize, w: &Subspace) -> Vec<usize> {
        let p = self.p() as usize;
        let mut out = Vec::with_capacity(w.size());
        out.push(rep);
        for j in 0..w.dim() {
            let b = self.encode(w.basis().row(j));
            let len = out.len();
            let mut step = b;
            for _ in 1..p {
                for s in 0..len {
                    let v = self.add_idx(out[s], step);
                    out.push(v);
                }
                step = self.add_idx(step, b);
            }
        }
        out
    }

    /// Indices of the elements of `w` (the coset through zero).
    pub fn subspace_indices(&self, w: &Subspace) -> Vec<usize> {
        self.coset_indices(0, w)
    }

    /// Canonical representative indices of the cosets of `w`, one per coset,
    /// ordered by the little-endian index of the complement coordinate vector.
    pub fn coset_reps(&self, w: &Subspace) -> Vec<usize> {
        self.coset_indices(0, &w.complement())
    }

    /// Labels every point with the index (in [`Space::coset_reps`] order) of its coset of `w`.
    pub fn coset_labels(&self, w: &Subspace) -> Vec<usize> {
        let mut labels = vec![usize::MAX; self.size];
        let members = self.subspace_indices(w);
        for (c, rep) in self.coset_reps(w).into_iter().enumerate() {
            for &m in &members {
                labels[self.add_idx(rep, m)] = c;
            }
        }
        labels
    }

    pub fn check_subspace(&self, w: &Subspace) -> Result<()> {
        if w.p() != self.p() || w.ambient_dim() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "subspace of F_{}^{} used in {self:?}",
                w.p(),
                w.ambient_dim()
            )));
        }
        Ok(())
    }
}

/// A map `V → [r]` stored densely; the zero point's entry is kept but never
/// consulted by freeness checks.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Coloring {
    space: Space,
    r: u32,
    colors: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct ColoringHeader {
    p: u32,
    n: usize,
    r: u32,
}

#[derive(Serialize, Deserialize)]
struct FunctionHeader {
    p: u32,
    n: usize,
}

impl Coloring {
    pub fn new(space: Space, r: u32, colors: Vec<u32>) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidInput("a coloring needs r >= 1".into()));
        }
        if colors.len() != space.size() {
            return Err(Error::DimensionMismatch(format!(
                "{} colors for {} points",
                colors.len(),
                space.size()
            )));
        }
        if let Some(bad) = colors.iter().find(|&&c| c == 0 || c > r) {
            return Err(Error::InvalidInput(format!("color {bad} outside [1, {r}]")));
        }
        Ok(Coloring { space, r, colors })
    }

    pub fn constant(space: Space, r: u32, c: u32) -> Result<Self> {
        Self::new(space, r, vec![c; space.size()])
    }

    pub fn from_fn(space: Space, r: u32, f: impl Fn(usize) -> u32) -> Result<Self> {
        Self::new(space, r, (0..space.size()).map(f).collect())
    }

    pub fn random<R: rand::Rng + ?Sized>(space: Space, r: u32, rng: &mut R) -> Self {
        let colors = (0..space.size()).map(|_| rng.gen_range(1..=r)).collect();
        Coloring { space, r, colors }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn colors(&self) -> &[u32] {
        &self.colors
    }

    #[inline]
    pub fn get(&self, idx: usize) -> u32 {
        self.colors[idx]
    }

    pub fn set(&mut self, idx: usize, c: u32) {
        assert!(c >= 1 && c <= self.r);
        self.colors[idx] = c;
    }

    /// `1_{φ^{-1}(c)}` as a dense function.
    pub fn indicator(&self, c: u32) -> DenseFunction {
        DenseFunction::from_real(
            self.space,
            self.colors
                .iter()
                .map(|&x| if x == c { 1.0 } else { 0.0 })
                .collect(),
        )
    }

    /// All `r` color-class indicators, color 1 first.
    pub fn indicators(&self) -> Vec<DenseFunction> {
        (1..=self.r).map(|c| self.indicator(c)).collect()
    }

    pub fn restrict(&self, rep: usize, w: &Subspace) -> Result<Coloring> {
        self.space.check_subspace(w)?;
        let sub = self.space.sibling(w.dim())?;
        let colors = self
            .space
            .coset_indices(rep, w)
            .into_iter()
            .map(|i| self.colors[i])
            .collect();
        Ok(Coloring {
            space: sub,
            r: self.r,
            colors,
        })
    }

    /// Number of points whose color differs, zero point included.
    pub fn hamming(&self, other: &Coloring) -> usize {
        self.colors
            .iter()
            .zip(&other.colors)
            .filter(|(a, b)| a != b)
            .count()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = ColoringHeader {
            p: self.space.p(),
            n: self.space.dim(),
            r: self.r,
        };
        writeln!(w, "{}", serde_json::to_string(&header)?)?;
        for c in &self.colors {
            writeln!(w, "{c}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_from<R: BufRead>(reader: R, limits: Limits) -> Result<Self> {
        let mut lines = reader.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::Parse("empty coloring file".into()))??;
        let header: ColoringHeader = serde_json::from_str(header_line.trim())
            .map_err(|e| Error::Parse(format!("coloring header: {e}")))?;
        let space = Space::with_limits(PrimeField::new(header.p)?, header.n, limits)?;
        let mut colors = Vec::with_capacity(space.size());
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let c: u32 = t
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad color {t:?}", lineno + 2)))?;
            colors.push(c);
        }
        Coloring::new(space, header.r, colors)
    }

    pub fn from_text(text: &str, limits: Limits) -> Result<Self> {
        Self::read_from(text.as_bytes(), limits)
    }
}

/// A complex-valued function on `V`, stored densely.
#[derive(Clone, PartialEq, Debug)]
pub struct DenseFunction {
    space: Space,
    values: Vec<Complex64>,
}

impl DenseFunction {
    pub fn new(space: Space, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != space.size() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} points",
                values.len(),
                space.size()
            )));
        }
        Ok(DenseFunction { space, values })
    }

    pub fn from_real(space: Space, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), space.size());
        DenseFunction {
            space,
            values: values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn constant(space: Space, c: f64) -> Self {
        Self::from_real(space, vec![c; space.size()])
    }

    pub fn from_fn(space: Space, f: impl Fn(usize) -> f64) -> Self {
        Self::from_real(space, (0..space.size()).map(f).collect())
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, idx: usize) -> Complex64 {
        self.values[idx]
    }

    #[inline]
    pub fn re(&self, idx: usize) -> f64 {
        self.values[idx].re
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// `g(t) = f(rep + Σ t_j b_j)` on `F_p^{dim W}`.
    pub fn restrict(&self, rep: usize, w: &Subspace) -> Result<DenseFunction> {
        self.space.check_subspace(w)?;
        let sub = self.space.sibling(w.dim())?;
        let values = self
            .space
            .coset_indices(rep, w)
            .into_iter()
            .map(|i| self.values[i])
            .collect();
        Ok(DenseFunction { space: sub, values })
    }

    /// Restriction to a precomputed list of coset indices.
    pub fn gather(&self, sub: Space, indices: &[usize]) -> DenseFunction {
        assert_eq!(indices.len(), sub.size());
        DenseFunction {
            space: sub,
            values: indices.iter().map(|&i| self.values[i]).collect(),
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        if !self.is_real() {
            return Err(Error::InvalidInput(
                "only real-valued functions can be written".into(),
            ));
        }
        let header = FunctionHeader {
            p: self.space.p(),
            n: self.space.dim(),
        };
        writeln!(w, "{}", serde_json::to_string(&header)?)?;
        for v in &self.values {
            writeln!(w, "{}", v.re)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(reader: R, limits: Limits) -> Result<Self> {
        let mut lines = reader.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::Parse("empty function file".into()))??;
        let header: FunctionHeader = serde_json::from_str(header_line.trim())
            .map_err(|e| Error::Parse(format!("function header: {e}")))?;
        let space = Space::with_limits(PrimeField::new(header.p)?, header.n, limits)?;
        let mut values = Vec::with_capacity(space.size());
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let v: f64 = t
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad value {t:?}", lineno + 2)))?;
            values.push(v);
        }
        if values.len() != space.size() {
            return Err(Error::Parse(format!(
                "expected {} values, found {}",
                space.size(),
                values.len()
            )));
        }
        Ok(Self::from_real(space, values))
    }
}
