//! Fourier analysis on F_p^n with characters `γ_z(x) = e^{2πi (x·z)/p}`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::space::{DenseFunction, Space};

/// Values within this distance of the maximum count as ties when picking a witness.
const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct Spectrum {
    space: Space,
    coefficients: Vec<Complex64>,
}

impl Spectrum {
    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    #[inline]
    pub fn get(&self, z: usize) -> Complex64 {
        self.coefficients[z]
    }

    /// `Σ_z |f̂(z)|²`.
    pub fn energy(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,re,im\n");
        for (i, c) in self.coefficients.iter().enumerate() {
            writeln!(out, "{i},{},{}", c.re, c.im).unwrap();
        }
        out
    }
}

fn roots(p: usize, sign: f64) -> Vec<Complex64> {
    (0..p)
        .map(|t| Complex64::from_polar(1.0, sign * 2.0 * PI * t as f64 / p as f64))
        .collect()
}

/// In-place radix-p butterflies, one pass per coordinate.
fn butterfly(data: &mut [Complex64], p: usize, n: usize, tw: &[Complex64]) {
    let mut stride = 1;
    for _ in 0..n {
        let block = stride * p;
        data.par_chunks_mut(block).for_each(|chunk| {
            let mut buf = vec![Complex64::new(0.0, 0.0); p];
            for lo in 0..stride {
                for (k, slot) in buf.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j in 0..p {
                        acc += chunk[lo + j * stride] * tw[(j * k) % p];
                    }
                    *slot = acc;
                }
                for (k, v) in buf.iter().enumerate() {
                    chunk[lo + k * stride] = *v;
                }
            }
        });
        stride = block;
    }
}

/// `f̂(z) = E_x f(x) e^{−2πi (x·z)/p}` for every `z`.
pub fn forward(f: &DenseFunction) -> Spectrum {
    let space = *f.space();
    let p = space.p() as usize;
    let mut data = f.values().to_vec();
    butterfly(&mut data, p, space.dim(), &roots(p, -1.0));
    let scale = 1.0 / space.size() as f64;
    for v in &mut data {
        *v *= scale;
    }
    Spectrum {
        space,
        coefficients: data,
    }
}

/// `f(x) = Σ_z f̂(z) e^{2πi (x·z)/p}`.
pub fn inverse(s: &Spectrum) -> DenseFunction {
    let space = s.space;
    let p = space.p() as usize;
    let mut data = s.coefficients.clone();
    butterfly(&mut data, p, space.dim(), &roots(p, 1.0));
    DenseFunction::new(space, data).expect("length preserved")
}

/// Direct `O(p^{2n})` evaluation of the forward transform.
pub fn naive_forward(f: &DenseFunction) -> Spectrum {
    let space = *f.space();
    let p = space.p();
    let tw = roots(p as usize, -1.0);
    let field = space.field();
    let points: Vec<Vec<u32>> = (0..space.size()).map(|i| space.decode(i)).collect();
    let coefficients = points
        .par_iter()
        .map(|z| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, v) in points.iter().zip(f.values()) {
                let d = crate::field::dot(field, x, z);
                acc += v * tw[d as usize];
            }
            acc / space.size() as f64
        })
        .collect();
    Spectrum {
        space,
        coefficients,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegularityNorm {
    pub norm: f64,
    /// Smallest index attaining the maximum over nonzero `z`.
    pub witness: Option<usize>,
}

impl RegularityNorm {
    /// `ε`-regularity, allowing [`crate::TOL`] of floating slack.
    pub fn is_regular(&self, eps: f64) -> bool {
        self.norm <= eps + crate::TOL
    }
}

/// `max_{z≠0} |f̂(z)|` with its witness, from a precomputed spectrum.
pub fn regularity_norm_of(s: &Spectrum) -> RegularityNorm {
    let mags: Vec<f64> = s.coefficients.iter().map(|c| c.norm()).collect();
    let max = mags.iter().skip(1).cloned().fold(0.0, f64::max);
    if mags.len() <= 1 || max <= TIE_TOL {
        return RegularityNorm {
            norm: max,
            witness: None,
        };
    }
    let witness = (1..mags.len()).find(|&z| mags[z] >= max - TIE_TOL);
    RegularityNorm { norm: max, witness }
}

pub fn regularity_norm(f: &DenseFunction) -> RegularityNorm {
    regularity_norm_of(&forward(f))
}

/// `Σ_z ∏_i f̂_i(a_i z)` for the single equation `Σ a_i x_i = 0`.
pub fn lambda_fourier(a: &[u32], fs: &[&DenseFunction]) -> Result<Complex64> {
    if a.len() != fs.len() || fs.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} functions",
            a.len(),
            fs.len()
        )));
    }
    let space = *fs[0].space();
    if fs.iter().any(|f| *f.space() != space) {
        return Err(Error::DimensionMismatch(
            "functions on different spaces".into(),
        ));
    }
    if a.iter().all(|&c| c % space.p() == 0) {
        return Err(Error::InvalidInput(
            "coefficient vector must be nonzero".into(),
        ));
    }
    let spectra: Vec<Spectrum> = fs.iter().map(|f| forward(f)).collect();
    let mut total = Complex64::new(0.0, 0.0);
    for z in 0..space.size() {
        let mut prod = Complex64::new(1.0, 0.0);
        for (s, &c) in spectra.iter().zip(a) {
            prod *= s.get(space.scale_idx(c, z));
        }
        total += prod;
    }
    Ok(total)
}

/// [`lambda_fourier`] for a one-row matrix.
pub fn lambda_fourier_matrix(
    a: &crate::field::FpMatrix,
    fs: &[&DenseFunction],
) -> Result<Complex64> {
    if a.rows() != 1 {
        return Err(Error::InvalidInput(format!(
            "Fourier-side evaluation needs a single equation, got {} rows",
            a.rows()
        )));
    }
    lambda_fourier(a.row(0), fs)
}
