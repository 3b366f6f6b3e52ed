//! Colored linear patterns: solution enumeration, Λ averages, instance
//! statistics, subpatterns and the complexity-1 test.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{rank_of_vectors, FpMatrix, PrimeField};
use crate::space::{Coloring, DenseFunction, Space};
use crate::subspace::Subspace;

/// Exact rational `count / total`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Density {
    pub count: u128,
    pub total: u128,
}

impl Density {
    pub fn value(&self) -> f64 {
        self.count as f64 / self.total as f64
    }

    /// `count/total >= threshold`, up to [`crate::TOL`].
    pub fn at_least(&self, threshold: f64) -> bool {
        self.value() >= threshold - crate::TOL
    }
}

impl std::fmt::Display for Density {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.count, self.total)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ColoredPattern {
    matrix: FpMatrix,
    psi: Vec<u32>,
    r: u32,
}

#[derive(Serialize, Deserialize)]
struct PatternFile {
    p: u32,
    r: u32,
    rows: Vec<Vec<i64>>,
    psi: Vec<u32>,
}

impl ColoredPattern {
    pub fn new(matrix: FpMatrix, psi: Vec<u32>, r: u32) -> Result<Self> {
        if psi.is_empty() {
            return Err(Error::InvalidInput(
                "a pattern needs k >= 1 variables".into(),
            ));
        }
        if matrix.cols() != psi.len() {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} columns but psi has {} entries",
                matrix.cols(),
                psi.len()
            )));
        }
        if let Some(c) = psi.iter().find(|&&c| c == 0 || c > r) {
            return Err(Error::InvalidInput(format!(
                "psi color {c} outside [1, {r}]"
            )));
        }
        Ok(ColoredPattern { matrix, psi, r })
    }

    pub fn from_rows(p: u32, r: u32, rows: &[Vec<i64>], psi: Vec<u32>) -> Result<Self> {
        let field = PrimeField::new(p)?;
        let matrix = FpMatrix::from_rows(field, psi.len(), rows)?;
        Self::new(matrix, psi, r)
    }

    /// Monochromatic pattern of color `c`.
    pub fn monochromatic(p: u32, r: u32, rows: &[Vec<i64>], k: usize, c: u32) -> Result<Self> {
        Self::from_rows(p, r, rows, vec![c; k])
    }

    pub fn matrix(&self) -> &FpMatrix {
        &self.matrix
    }

    pub fn psi(&self) -> &[u32] {
        &self.psi
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn p(&self) -> u32 {
        self.matrix.p()
    }

    pub fn k(&self) -> usize {
        self.psi.len()
    }

    pub fn rank(&self) -> usize {
        self.matrix.rank()
    }

    /// Canonical form: row space in RREF; used for deduplication.
    pub fn canonical(&self) -> ColoredPattern {
        ColoredPattern {
            matrix: self.matrix.row_space_rref(),
            psi: self.psi.clone(),
            r: self.r,
        }
    }

    fn to_file(&self) -> PatternFile {
        PatternFile {
            p: self.p(),
            r: self.r,
            rows: self.matrix.to_int_rows(),
            psi: self.psi.clone(),
        }
    }

    fn from_file(pf: PatternFile) -> Result<Self> {
        Self::from_rows(pf.p, pf.r, &pf.rows, pf.psi)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("pattern serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let pf: PatternFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("pattern: {e}")))?;
        Self::from_file(pf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl Serialize for ColoredPattern {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_file().serialize(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternFamily {
    p: u32,
    r: u32,
    patterns: Vec<ColoredPattern>,
}

impl PatternFamily {
    pub fn new(p: u32, r: u32, patterns: Vec<ColoredPattern>) -> Result<Self> {
        PrimeField::new(p)?;
        for h in &patterns {
            if h.p() != p || h.r() != r {
                return Err(Error::InvalidInput(format!(
                    "pattern over F_{} with {} colors in a family over F_{p} with {r} colors",
                    h.p(),
                    h.r()
                )));
            }
        }
        Ok(PatternFamily { p, r, patterns })
    }

    pub fn empty(p: u32, r: u32) -> Result<Self> {
        Self::new(p, r, Vec::new())
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn patterns(&self) -> &[ColoredPattern] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn k_max(&self) -> usize {
        self.patterns.iter().map(|h| h.k()).max().unwrap_or(0)
    }

    /// The family of monochromatic copies of one equation, one per color.
    pub fn monochromatic(p: u32, r: u32, rows: &[Vec<i64>], k: usize) -> Result<Self> {
        let pats = (1..=r)
            .map(|c| ColoredPattern::monochromatic(p, r, rows, k, c))
            .collect::<Result<Vec<_>>>()?;
        Self::new(p, r, pats)
    }

    pub fn to_json(&self) -> String {
        let files: Vec<PatternFile> = self.patterns.iter().map(|h| h.to_file()).collect();
        serde_json::to_string(&files).expect("family serializes")
    }

    /// Parses a family file (a list of pattern objects) or a single pattern object.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("family: {e}")))?;
        let files: Vec<PatternFile> = if value.is_array() {
            serde_json::from_value(value)
        } else {
            serde_json::from_value(value).map(|one| vec![one])
        }
        .map_err(|e| Error::Parse(format!("family: {e}")))?;
        let Some(first) = files.first() else {
            return Err(Error::Parse(
                "an empty family file carries no field; use PatternFamily::empty".into(),
            ));
        };
        let (p, r) = (first.p, first.r);
        let pats = files
            .into_iter()
            .map(ColoredPattern::from_file)
            .collect::<Result<Vec<_>>>()?;
        Self::new(p, r, pats)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl Serialize for PatternFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.patterns.serialize(s)
    }
}

/// Parametrization of the solution set of `A x = 0` in `V^k`:
/// `x_i = Σ_j N_j[i] · t_j` for `t ∈ V^m`.
#[derive(Clone, Debug)]
pub struct SolutionSpace {
    space: Space,
    k: usize,
    m: usize,
    /// `coef[i][j] = N_j[i]`.
    coef: Vec<Vec<u32>>,
}

impl SolutionSpace {
    pub fn new(a: &FpMatrix, space: &Space) -> Result<Self> {
        if a.p() != space.p() {
            return Err(Error::DimensionMismatch(format!(
                "matrix over F_{} used on {space:?}",
                a.p()
            )));
        }
        let null = a.null_basis();
        let k = a.cols();
        let m = null.rows();
        let coef = (0..k)
            .map(|i| (0..m).map(|j| null.get(j, i)).collect())
            .collect();
        let sol = SolutionSpace {
            space: *space,
            k,
            m,
            coef,
        };
        let needed = sol.count_u128();
        let cap = space.limits().enum_cap;
        if needed.map_or(true, |c| c > cap) {
            return Err(Error::resource(
                "solution enumeration",
                needed.unwrap_or(u128::MAX),
                cap,
            ));
        }
        Ok(sol)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of free vector parameters, `k − rank A`.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    fn count_u128(&self) -> Option<u128> {
        (self.space.size() as u128).checked_pow(self.m as u32)
    }

    /// Number of solutions, `p^{n(k − rank A)}`.
    pub fn count(&self) -> u128 {
        self.count_u128().expect("checked at construction")
    }

    /// Writes the solution for parameter vector `t` into `x`.
    #[inline]
    pub fn eval(&self, t: &[usize], x: &mut [usize]) {
        let sp = &self.space;
        for (xi, ci) in x.iter_mut().zip(&self.coef) {
            let mut acc = 0usize;
            for (&c, &tj) in ci.iter().zip(t) {
                if c != 0 && tj != 0 {
                    acc = sp.add_idx(acc, sp.scale_idx(c, tj));
                }
            }
            *xi = acc;
        }
    }

    /// Solution number `code` in enumeration order (little-endian in `t`).
    pub fn solution(&self, mut code: u128) -> Vec<usize> {
        let size = self.space.size() as u128;
        let t: Vec<usize> = (0..self.m)
            .map(|_| {
                let d = (code % size) as usize;
                code /= size;
                d
            })
            .collect();
        let mut x = vec![0; self.k];
        self.eval(&t, &mut x);
        x
    }

    /// Visits every solution exactly once. Work is split on the last
    /// parameter; partial results are combined in split order, so the result
    /// is independent of thread scheduling.
    pub fn fold<T, I, F>(&self, init: I, visit: F) -> Vec<T>
    where
        T: Send,
        I: Fn() -> T + Sync,
        F: Fn(&mut T, &[usize]) + Sync,
    {
        let size = self.space.size();
        if self.m == 0 {
            let mut acc = init();
            visit(&mut acc, &vec![0; self.k]);
            return vec![acc];
        }
        (0..size)
            .into_par_iter()
            .map(|last| {
                let mut acc = init();
                let mut t = vec![0usize; self.m];
                t[self.m - 1] = last;
                let mut x = vec![0usize; self.k];
                loop {
                    self.eval(&t, &mut x);
                    visit(&mut acc, &x);
                    if !step(&mut t[..self.m - 1], size) {
                        break;
                    }
                }
                acc
            })
            .collect()
    }

    /// First solution (in enumeration order) satisfying `pred`.
    pub fn find_first<F>(&self, pred: F) -> Option<Vec<usize>>
    where
        F: Fn(&[usize]) -> bool + Sync,
    {
        let size = self.space.size();
        if self.m == 0 {
            let x = vec![0; self.k];
            return pred(&x).then_some(x);
        }
        (0..size).into_par_iter().find_map_first(|last| {
            let mut t = vec![0usize; self.m];
            t[self.m - 1] = last;
            let mut x = vec![0usize; self.k];
            loop {
                self.eval(&t, &mut x);
                if pred(&x) {
                    return Some(x.clone());
                }
                if !step(&mut t[..self.m - 1], size) {
                    return None;
                }
            }
        })
    }
}

fn step(t: &mut [usize], base: usize) -> bool {
    for d in t.iter_mut() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// All solutions of `A x = 0` in `V^k`, as point-index tuples.
pub fn solutions(a: &FpMatrix, space: &Space) -> Result<Vec<Vec<usize>>> {
    let sol = SolutionSpace::new(a, space)?;
    let parts = sol.fold(Vec::new, |acc: &mut Vec<Vec<usize>>, x| {
        acc.push(x.to_vec())
    });
    Ok(parts.into_iter().flatten().collect())
}

/// `Λ_A(f_1, …, f_k)`, the average of `∏ f_i(x_i)` over solutions of `A x = 0`.
pub fn lambda(a: &FpMatrix, fs: &[&DenseFunction]) -> Result<Complex64> {
    let space = check_functions(a, fs)?;
    let sol = SolutionSpace::new(a, &space)?;
    let parts = sol.fold(
        || Complex64::new(0.0, 0.0),
        |acc, x| {
            let mut prod = Complex64::new(1.0, 0.0);
            for (f, &xi) in fs.iter().zip(x) {
                prod *= f.get(xi);
                if prod == Complex64::new(0.0, 0.0) {
                    return;
                }
            }
            *acc += prod;
        },
    );
    let total: Complex64 = parts.into_iter().sum();
    Ok(total / sol.count() as f64)
}

/// `Λ_A` of indicator functions given as membership masks, computed exactly.
pub fn lambda_indicators(a: &FpMatrix, space: &Space, masks: &[&[bool]]) -> Result<Density> {
    if masks.len() != a.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} masks for {} variables",
            masks.len(),
            a.cols()
        )));
    }
    let sol = SolutionSpace::new(a, space)?;
    let parts = sol.fold(
        || 0u128,
        |acc, x| {
            if masks.iter().zip(x).all(|(m, &xi)| m[xi]) {
                *acc += 1;
            }
        },
    );
    Ok(Density {
        count: parts.into_iter().sum(),
        total: sol.count(),
    })
}

/// Exact `Λ_A` when every function is `{0,1}`-valued; `None` otherwise.
pub fn lambda_exact(a: &FpMatrix, fs: &[&DenseFunction]) -> Result<Option<Density>> {
    let space = check_functions(a, fs)?;
    let mut masks = Vec::with_capacity(fs.len());
    for f in fs {
        let mut mask = Vec::with_capacity(space.size());
        for v in f.values() {
            if *v == Complex64::new(1.0, 0.0) {
                mask.push(true);
            } else if *v == Complex64::new(0.0, 0.0) {
                mask.push(false);
            } else {
                return Ok(None);
            }
        }
        masks.push(mask);
    }
    let refs: Vec<&[bool]> = masks.iter().map(|m| m.as_slice()).collect();
    lambda_indicators(a, &space, &refs).map(Some)
}

fn check_functions(a: &FpMatrix, fs: &[&DenseFunction]) -> Result<Space> {
    if fs.len() != a.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} functions for {} variables",
            fs.len(),
            a.cols()
        )));
    }
    let Some(first) = fs.first() else {
        return Err(Error::InvalidInput("at least one function required".into()));
    };
    let space = *first.space();
    if fs.iter().any(|f| *f.space() != space) {
        return Err(Error::DimensionMismatch(
            "functions live on different spaces".into(),
        ));
    }
    Ok(space)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PatternStats {
    pub instance_count: u128,
    pub density: Density,
    pub nonzero_instance_count: u128,
    pub generic_count: u128,
    pub is_free: bool,
}

#[derive(Default, Clone, Copy)]
struct Counts {
    all: u128,
    nonzero: u128,
    generic: u128,
}

fn check_coloring(h: &ColoredPattern, phi: &Coloring) -> Result<()> {
    if h.p() != phi.space().p() {
        return Err(Error::DimensionMismatch(format!(
            "pattern over F_{} against a coloring of {:?}",
            h.p(),
            phi.space()
        )));
    }
    if let Some(c) = h.psi().iter().find(|&&c| c > phi.r()) {
        return Err(Error::InvalidInput(format!(
            "pattern color {c} exceeds the coloring's r = {}",
            phi.r()
        )));
    }
    Ok(())
}

/// Instance statistics of `H` in `φ`.
///
/// Generic instances are counted among the instances avoiding zero, so
/// `generic ≤ nonzero ≤ all` holds even when some variable is forced to zero.
pub fn pattern_stats(h: &ColoredPattern, phi: &Coloring) -> Result<PatternStats> {
    check_coloring(h, phi)?;
    let space = *phi.space();
    let sol = SolutionSpace::new(h.matrix(), &space)?;
    let m = sol.m();
    let field = space.field();
    let psi = h.psi();
    let parts = sol.fold(Counts::default, |acc, x| {
        if !x.iter().zip(psi).all(|(&xi, &c)| phi.get(xi) == c) {
            return;
        }
        acc.all += 1;
        if x.iter().any(|&xi| xi == 0) {
            return;
        }
        acc.nonzero += 1;
        let vecs: Vec<Vec<u32>> = x.iter().map(|&xi| space.decode(xi)).collect();
        if rank_of_vectors(field, space.dim(), &vecs) == m {
            acc.generic += 1;
        }
    });
    let c = parts.into_iter().fold(Counts::default(), |a, b| Counts {
        all: a.all + b.all,
        nonzero: a.nonzero + b.nonzero,
        generic: a.generic + b.generic,
    });
    Ok(PatternStats {
        instance_count: c.all,
        density: Density {
            count: c.all,
            total: sol.count(),
        },
        nonzero_instance_count: c.nonzero,
        generic_count: c.generic,
        is_free: c.nonzero == 0,
    })
}

/// `H`-density of `φ` (zero-touching instances included).
pub fn density(h: &ColoredPattern, phi: &Coloring) -> Result<Density> {
    check_coloring(h, phi)?;
    let space = *phi.space();
    let masks: Vec<Vec<bool>> = h
        .psi()
        .iter()
        .map(|&c| phi.colors().iter().map(|&x| x == c).collect())
        .collect();
    let refs: Vec<&[bool]> = masks.iter().map(|m| m.as_slice()).collect();
    lambda_indicators(h.matrix(), &space, &refs)
}

/// First instance of `H` in `φ` with every coordinate nonzero, in enumeration order.
pub fn find_nonzero_instance(h: &ColoredPattern, phi: &Coloring) -> Result<Option<Vec<usize>>> {
    check_coloring(h, phi)?;
    let sol = SolutionSpace::new(h.matrix(), phi.space())?;
    let psi = h.psi();
    Ok(sol.find_first(|x| {
        x.iter()
            .zip(psi)
            .all(|(&xi, &c)| xi != 0 && phi.get(xi) == c)
    }))
}

/// Whether `x` is an `H`-instance in `φ` with all coordinates nonzero.
pub fn is_nonzero_instance(h: &ColoredPattern, phi: &Coloring, x: &[Vec<u32>]) -> bool {
    let space = phi.space();
    if x.len() != h.k() || x.iter().any(|v| v.len() != space.dim()) {
        return false;
    }
    let f = space.field();
    for row in 0..h.matrix().rows() {
        for coord in 0..space.dim() {
            let mut s = 0;
            for (i, xi) in x.iter().enumerate() {
                s = f.add(s, f.mul(h.matrix().get(row, i), xi[coord]));
            }
            if s != 0 {
                return false;
            }
        }
    }
    x.iter()
        .zip(h.psi())
        .all(|(xi, &c)| xi.iter().any(|&v| v != 0) && phi.get(space.encode(xi)) == c)
}

/// The subpattern of `H` on the variables `vars` (0-based, any order, no repeats).
pub fn subpattern(h: &ColoredPattern, vars: &[usize]) -> Result<ColoredPattern> {
    if vars.is_empty() {
        return Err(Error::InvalidInput(
            "subpattern needs a nonempty variable set".into(),
        ));
    }
    let mut seen = vec![false; h.k()];
    for &v in vars {
        if v >= h.k() || std::mem::replace(&mut seen[v], true) {
            return Err(Error::InvalidInput(format!(
                "bad variable set {vars:?} for k = {}",
                h.k()
            )));
        }
    }
    let null = h.matrix().null_basis();
    let projected = null.select_columns(vars);
    let s = Subspace::row_space(&projected);
    let a_prime = s.annihilator();
    let psi = vars.iter().map(|&v| h.psi()[v]).collect();
    ColoredPattern::new(a_prime, psi, h.r())
}

/// Complexity-1 test: the squares of the linear forms `L_i` (columns of the
/// null basis) must be linearly independent as quadratic forms.
pub fn complexity1_check(a: &FpMatrix) -> Result<bool> {
    let p = a.p();
    if p == 2 {
        return Err(Error::UnsupportedCharacteristic(p));
    }
    let field = a.field();
    let null = a.null_basis();
    let m = null.rows();
    let k = a.cols();
    let forms: Vec<Vec<u32>> = (0..k)
        .map(|i| {
            let l = null.column(i);
            let mut q = Vec::with_capacity(m * m);
            for s in 0..m {
                for t in 0..m {
                    q.push(field.mul(l[s], l[t]));
                }
            }
            q
        })
        .collect();
    Ok(rank_of_vectors(field, m * m, &forms) == k)
}
