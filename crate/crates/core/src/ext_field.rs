//! Small extension fields F_{p^m} with elements stored as coefficient vectors
//! `c_0 + c_1 X + … + c_{m-1} X^{m-1}`.

use crate::error::{Error, Result};
use crate::field::PrimeField;

/// Largest field order `p^m` accepted by [`ExtensionField::new`].
pub const MAX_EXT_ORDER: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtensionField {
    base: PrimeField,
    degree: usize,
    /// Coefficients of the monic modulus, constant term first, leading 1 included.
    modulus: Vec<u32>,
}

impl ExtensionField {
    /// Builds F_{p^m} using the lexicographically smallest monic irreducible
    /// modulus (coefficients compared from the constant term upward, as a
    /// little-endian base-p number). For `m = 1` the modulus is `x`.
    pub fn new(base: PrimeField, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidInput("extension degree must be >= 1".into()));
        }
        let p = base.p() as u64;
        let order = checked_pow(p, degree).filter(|&o| o <= MAX_EXT_ORDER);
        let Some(order) = order else {
            return Err(Error::resource(
                format!("extension field F_{}^{}", p, degree),
                (p as u128).saturating_pow(degree as u32),
                MAX_EXT_ORDER as u128,
            ));
        };
        if degree == 1 {
            return Ok(ExtensionField {
                base,
                degree,
                modulus: vec![0, 1],
            });
        }
        for code in 0..order {
            let mut poly = digits(code, base.p(), degree);
            poly.push(1);
            if is_irreducible(base, &poly) {
                return Ok(ExtensionField {
                    base,
                    degree,
                    modulus: poly,
                });
            }
        }
        // every degree has an irreducible polynomial over a finite field
        unreachable!("no irreducible polynomial of degree {degree} over F_{p}")
    }

    pub fn base(&self) -> PrimeField {
        self.base
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    pub fn order(&self) -> usize {
        (self.base.p() as usize).pow(self.degree as u32)
    }

    pub fn zero(&self) -> Vec<u32> {
        vec![0; self.degree]
    }

    pub fn one(&self) -> Vec<u32> {
        let mut v = self.zero();
        v[0] = 1;
        v
    }

    /// The basis element `X^j` (for `m = 1` only `j = 0` exists).
    pub fn monomial(&self, j: usize) -> Vec<u32> {
        let mut v = self.zero();
        v[j] = 1;
        v
    }

    /// Element with little-endian index `code`.
    pub fn element(&self, code: usize) -> Vec<u32> {
        digits(code as u64, self.base.p(), self.degree)
    }

    pub fn index_of(&self, a: &[u32]) -> usize {
        let p = self.base.p() as usize;
        a.iter().rev().fold(0, |acc, &c| acc * p + c as usize)
    }

    pub fn add(&self, a: &[u32], b: &[u32]) -> Vec<u32> {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| self.base.add(x, y))
            .collect()
    }

    pub fn mul(&self, a: &[u32], b: &[u32]) -> Vec<u32> {
        let f = self.base;
        let m = self.degree;
        let mut prod = vec![0u32; 2 * m - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                prod[i + j] = f.add(prod[i + j], f.mul(x, y));
            }
        }
        for d in (m..prod.len()).rev() {
            let c = prod[d];
            if c == 0 {
                continue;
            }
            prod[d] = 0;
            for (t, &mc) in self.modulus[..m].iter().enumerate() {
                prod[d - m + t] = f.sub(prod[d - m + t], f.mul(c, mc));
            }
        }
        prod.truncate(m);
        prod
    }

    pub fn pow(&self, a: &[u32], mut e: u64) -> Vec<u32> {
        let mut base = a.to_vec();
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: &[u32]) -> Option<Vec<u32>> {
        if a.iter().all(|&c| c == 0) {
            return None;
        }
        Some(self.pow(a, self.order() as u64 - 2))
    }
}

fn checked_pow(base: u64, exp: usize) -> Option<u64> {
    let mut acc: u64 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

fn digits(mut code: u64, p: u32, len: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(len + 1);
    for _ in 0..len {
        out.push((code % p as u64) as u32);
        code /= p as u64;
    }
    out
}

fn trim(poly: &mut Vec<u32>) {
    while poly.last() == Some(&0) {
        poly.pop();
    }
}

/// Remainder of `a` modulo the monic polynomial `m`.
fn poly_rem(f: PrimeField, a: &[u32], m: &[u32]) -> Vec<u32> {
    let mut r = a.to_vec();
    trim(&mut r);
    let dm = m.len() - 1;
    while r.len() > dm {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - dm;
        for (t, &mc) in m.iter().enumerate() {
            r[shift + t] = f.sub(r[shift + t], f.mul(lead, mc));
        }
        trim(&mut r);
    }
    r
}

/// Exhaustive check: no monic factor of degree `1..=deg/2` divides `poly`.
pub fn is_irreducible(f: PrimeField, poly: &[u32]) -> bool {
    let deg = poly.len() - 1;
    if deg == 0 {
        return false;
    }
    if deg == 1 {
        return true;
    }
    let p = f.p() as u64;
    for d in 1..=deg / 2 {
        let count = p.pow(d as u32);
        for code in 0..count {
            let mut factor = digits(code, f.p(), d);
            factor.push(1);
            if poly_rem(f, poly, &factor).is_empty() {
                return false;
            }
        }
    }
    true
}
