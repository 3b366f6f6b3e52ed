//! Acceptance suite. Each test prints one `[acceptance] #N ...: PASS|FAIL` line.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use removal_lab::energy::{
    coset_energy, energy, increment_subspace, projection_distance, Partition,
};
use removal_lab::fourier::{forward, inverse, lambda_fourier, naive_forward};
use removal_lab::inhomogeneous::{inhomogeneous_reduce, OffsetPattern};
use removal_lab::pattern::{complexity1_check, lambda, pattern_stats, subpattern};
use removal_lab::ramsey::{
    canonical_coloring, canonical_is_free, decide_dichotomy, verify_certificate, CanonicalSpec,
    Case,
};
use removal_lab::regularize::{
    green_regularize, regular_model, regularity_recolor, strong_decomp_regularize,
    strong_regularize, verify_green, verify_recoloring, verify_regular_model, verify_strong_decomp,
    verify_weak, weak_decomp_regularize, Backend, EpsSchedule,
};
use removal_lab::removal::{induced_removal, Evidence, Outcome, RemovalParams};
use removal_lab::{
    ColoredPattern, Coloring, DenseFunction, Error, FpMatrix, PatternFamily, PrimeField, Space,
    Subspace,
};

const EXACT_TOL: f64 = 1e-9;

fn report(n: u32, name: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("[acceptance] #{n} {name}: {verdict} ({detail})");
}

fn field(p: u32) -> PrimeField {
    PrimeField::new(p).unwrap()
}

fn mat(p: u32, k: usize, rows: &[Vec<i64>]) -> FpMatrix {
    FpMatrix::from_rows(field(p), k, rows).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, p: u32, len: usize) -> Vec<u32> {
    (0..len).map(|_| rng.gen_range(0..p)).collect()
}

fn random_function(rng: &mut ChaCha8Rng, space: Space) -> DenseFunction {
    let kind = rng.gen_range(0..3);
    let vals: Vec<f64> = (0..space.size())
        .map(|_| match kind {
            0 => {
                if rng.gen_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
            1 => {
                if rng.gen_bool(0.3) {
                    1.0
                } else {
                    0.0
                }
            }
            _ => rng.gen_range(0.0..1.0),
        })
        .collect();
    DenseFunction::from_real(space, vals)
}

fn random_complex_function(rng: &mut ChaCha8Rng, space: Space) -> DenseFunction {
    let vals = (0..space.size())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    DenseFunction::new(space, vals).unwrap()
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_01_golden_freeness() {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    let id = CanonicalSpec::identity(5);
    for n in 2..=4 {
        let t = Instant::now();
        let space = Space::new(5, n).unwrap();
        let phi = canonical_coloring(&space, &id).unwrap();
        for c in 1..=4 {
            let h = ColoredPattern::monochromatic(5, 4, &[vec![1, 1, 1]], 3, c).unwrap();
            let st = pattern_stats(&h, &phi).unwrap();
            ok &= st.nonzero_instance_count == 0 && st.is_free;
        }
        if n == 4 {
            ok &= t.elapsed() < Duration::from_secs(10);
            detail.push(format!("n=4 in {:.2}s", t.elapsed().as_secs_f64()));
        }
    }
    detail.push(format!("total {:.2}s", start.elapsed().as_secs_f64()));
    report(1, "golden freeness", ok, &detail.join(", "));
    assert!(ok);
}

#[test]
fn criterion_02_complexity_goldens() {
    let schur = complexity1_check(&mat(5, 3, &[vec![1, 1, 1]])).unwrap();
    let four_ap = complexity1_check(&mat(5, 4, &[vec![1, -2, 1, 0], vec![0, 1, -2, 1]])).unwrap();
    let ex = complexity1_check(&mat(
        7,
        6,
        &[
            vec![2, 1, 1, -1, 0, 0],
            vec![1, 2, 1, 0, -1, 0],
            vec![1, 1, 2, 0, 0, -1],
        ],
    ))
    .unwrap();
    let ok = schur && !four_ap && ex;
    report(
        2,
        "complexity-1 goldens",
        ok,
        &format!("(1 1 1)/F5={schur}, 4-AP/F5={four_ap}, 3x6/F7={ex}"),
    );
    assert!(ok);
}

/// All of `F_p^k` as coordinate vectors.
fn all_vectors(p: u32, k: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut t = vec![0u32; k];
    loop {
        out.push(t.clone());
        if !removal_lab::subspace::increment(&mut t, p) {
            return out;
        }
    }
}

fn satisfies(a: &FpMatrix, x: &[u32]) -> bool {
    let f = a.field();
    (0..a.rows()).all(|r| {
        x.iter()
            .enumerate()
            .fold(0, |s, (i, &v)| f.add(s, f.mul(a.get(r, i), v)))
            == 0
    })
}

/// Projection of the solution set onto `vars` equals the solution set of
/// the subpattern, by brute force over `F_p^k`.
fn extendability_holds(a: &FpMatrix, vars: &[usize]) -> bool {
    let p = a.p();
    let k = a.cols();
    let h = ColoredPattern::new(a.clone(), vec![1; k], 1).unwrap();
    let sp = subpattern(&h, vars).unwrap();
    let projected: BTreeSet<Vec<u32>> = all_vectors(p, k)
        .into_iter()
        .filter(|y| satisfies(a, y))
        .map(|y| vars.iter().map(|&i| y[i]).collect())
        .collect();
    let sub_solutions: BTreeSet<Vec<u32>> = all_vectors(p, vars.len())
        .into_iter()
        .filter(|x| satisfies(sp.matrix(), x))
        .collect();
    projected == sub_solutions
}

#[test]
fn criterion_03_subpattern_goldens() {
    let h =
        ColoredPattern::monochromatic(5, 1, &[vec![1, -2, 1, 0], vec![0, 1, -2, 1]], 4, 1).unwrap();
    let s = subpattern(&h, &[0, 1, 2]).unwrap();
    let want = Subspace::row_space(&mat(5, 3, &[vec![1, -2, 1]]));
    let g1 = Subspace::row_space(s.matrix()) == want;

    let h = ColoredPattern::monochromatic(5, 1, &[vec![1, 1, 1, 0, 0], vec![0, 0, 1, 1, 1]], 5, 1)
        .unwrap();
    let s = subpattern(&h, &[0, 1, 3, 4]).unwrap();
    let want = Subspace::row_space(&mat(5, 4, &[vec![1, 1, -1, -1]]));
    let g2 = Subspace::row_space(s.matrix()) == want;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    let mut ext = true;
    for p in [2u32, 3, 5] {
        for k in 1..=5usize {
            for _ in 0..4 {
                let rows = rng.gen_range(0..=k);
                let a_rows: Vec<Vec<i64>> = (0..rows)
                    .map(|_| {
                        random_vec(&mut rng, p, k)
                            .into_iter()
                            .map(i64::from)
                            .collect()
                    })
                    .collect();
                let a = mat(p, k, &a_rows);
                for mask in 1u32..(1 << k) {
                    let vars: Vec<usize> = (0..k).filter(|&i| mask >> i & 1 == 1).collect();
                    ext &= extendability_holds(&a, &vars);
                    checked += 1;
                }
            }
        }
    }
    let ok = g1 && g2 && ext;
    report(
        3,
        "subpattern goldens",
        ok,
        &format!("4-AP to 3-AP={g1}, I={{1,2,4,5}} on two 3-term sums={g2}, extendability over {checked} (A, I) pairs={ext}"),
    );
    assert!(ok);
}

#[test]
fn criterion_04_fourier_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let shapes: Vec<(u32, usize)> = vec![
        (2, 1),
        (2, 4),
        (2, 8),
        (2, 11),
        (3, 2),
        (3, 5),
        (3, 7),
        (5, 1),
        (5, 3),
        (5, 5),
    ];
    let mut max_fft = 0.0f64;
    let mut max_parseval = 0.0f64;
    let mut max_inverse = 0.0f64;
    for i in 0..100 {
        let (p, n) = shapes[i % shapes.len()];
        let space = Space::new(p, n).unwrap();
        let f = random_complex_function(&mut rng, space);
        let fast = forward(&f);
        let slow = naive_forward(&f);
        for (a, b) in fast.coefficients().iter().zip(slow.coefficients()) {
            max_fft = max_fft.max((a - b).norm());
        }
        let l2 = f.values().iter().map(|v| v.norm_sqr()).sum::<f64>() / space.size() as f64;
        max_parseval = max_parseval.max((fast.energy() - l2).abs());
        let back = inverse(&fast);
        for (a, b) in back.values().iter().zip(f.values()) {
            max_inverse = max_inverse.max((a - b).norm());
        }
    }
    let mut max_lambda = 0.0f64;
    for _ in 0..50 {
        let p = [2u32, 3, 5][rng.gen_range(0..3)];
        let k = rng.gen_range(2..=4usize);
        let n = match (p, k) {
            (2, _) => 3,
            (3, 4) => 1,
            (3, _) => 2,
            (5, 2) => 2,
            _ => 1,
        };
        let space = Space::new(p, n).unwrap();
        let a: Vec<u32> = (0..k).map(|_| rng.gen_range(1..p)).collect();
        let fs: Vec<DenseFunction> = (0..k)
            .map(|_| random_complex_function(&mut rng, space))
            .collect();
        let refs: Vec<&DenseFunction> = fs.iter().collect();
        let am = FpMatrix::from_reduced_rows(field(p), k, &[a.clone()]);
        let direct = lambda(&am, &refs).unwrap();
        let four = lambda_fourier(&a, &refs).unwrap();
        max_lambda = max_lambda.max((direct - four).norm());
    }
    let elapsed = start.elapsed();
    let ok = max_fft <= EXACT_TOL
        && max_parseval <= EXACT_TOL
        && max_inverse <= EXACT_TOL
        && max_lambda <= EXACT_TOL
        && elapsed < Duration::from_secs(60);
    report(
        4,
        "Fourier suite",
        ok,
        &format!(
            "fft {max_fft:.1e}, parseval {max_parseval:.1e}, inverse {max_inverse:.1e}, lambda {max_lambda:.1e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_05_energy_laws() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_mono = 0.0f64;
    let mut worst_pyth = 0.0f64;
    for _ in 0..200 {
        let p = [2u32, 3][rng.gen_range(0..2)];
        let n = if p == 2 {
            rng.gen_range(2..=6)
        } else {
            rng.gen_range(1..=4)
        };
        let space = Space::new(p, n).unwrap();
        let size = space.size();
        let coarse_parts = rng.gen_range(1..=size.min(6));
        let with_carrier = rng.gen_bool(0.3);
        let labels_p: Vec<Option<usize>> = (0..size)
            .map(|_| {
                if with_carrier && rng.gen_bool(0.2) {
                    None
                } else {
                    Some(rng.gen_range(0..coarse_parts))
                }
            })
            .collect();
        let labels_q: Vec<Option<usize>> = labels_p
            .iter()
            .map(|l| l.map(|c| c * 4 + rng.gen_range(0..4)))
            .collect();
        if labels_p.iter().all(|l| l.is_none()) {
            continue;
        }
        let pp = Partition::from_labels(&labels_p);
        let qq = Partition::from_labels(&labels_q);
        assert!(qq.refines(&pp));
        let k = rng.gen_range(1..=3);
        let fs: Vec<DenseFunction> = (0..k).map(|_| random_function(&mut rng, space)).collect();
        let refs: Vec<&DenseFunction> = fs.iter().collect();
        let ep = energy(&pp, &refs);
        let eq = energy(&qq, &refs);
        worst_mono = worst_mono.max(ep - eq);
        let dist = projection_distance(&qq, &pp, &refs).unwrap();
        worst_pyth = worst_pyth.max((eq - ep - dist).abs());
    }
    let mut increments = 0;
    let mut worst_gain_margin = f64::INFINITY;
    let mut inc_ok = true;
    for _ in 0..200 {
        let p = [2u32, 3, 5][rng.gen_range(0..3)];
        let n = match p {
            2 => rng.gen_range(1..=7),
            3 => rng.gen_range(1..=4),
            _ => rng.gen_range(1..=3),
        };
        let space = Space::new(p, n).unwrap();
        let f = random_function(&mut rng, space);
        let eps = rng.gen_range(0.02..0.4);
        match increment_subspace(&f, eps) {
            Ok(Some(inc)) => {
                increments += 1;
                // independent recomputation of the gain from the hyperplane cosets
                let sub = Subspace::full(space.field(), n).hyperplane(&space.decode(inc.z));
                let before = f.mean().norm_sqr();
                let after = energy(&Partition::cosets(&space, &sub), &[&f]);
                let gain = after - before;
                worst_gain_margin = worst_gain_margin.min(gain - eps * eps);
                inc_ok &= gain > eps * eps && (gain - inc.gain).abs() <= EXACT_TOL;
            }
            Ok(None) => {
                inc_ok &= removal_lab::fourier::regularity_norm(&f).norm <= eps + 1e-9;
            }
            Err(_) => inc_ok = false,
        }
    }
    let ok = worst_mono <= EXACT_TOL && worst_pyth <= EXACT_TOL && inc_ok;
    report(
        5,
        "energy laws",
        ok,
        &format!(
            "monotonicity slack {worst_mono:.1e}, pythagoras {worst_pyth:.1e}, {increments} increments, min gain margin {worst_gain_margin:.2e}"
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------

struct RegCase {
    space: Space,
    fs: Vec<DenseFunction>,
    v0: Subspace,
    eps: f64,
}

fn reg_case(rng: &mut ChaCha8Rng, p: u32) -> RegCase {
    let n = if p == 2 {
        rng.gen_range(4..=10)
    } else {
        rng.gen_range(2..=6)
    };
    let space = Space::new(p, n).unwrap();
    let k = rng.gen_range(1..=2);
    let fs = (0..k).map(|_| random_function(rng, space)).collect();
    let v0 = if rng.gen_bool(0.5) {
        Subspace::full(space.field(), n)
    } else {
        let gens: Vec<Vec<u32>> = (0..n - 1).map(|_| random_vec(rng, p, n)).collect();
        Subspace::span(space.field(), n, &gens)
    };
    let eps = [0.25, 0.3, 0.4, 0.5][rng.gen_range(0..4)];
    RegCase { space, fs, v0, eps }
}

#[derive(Default)]
struct Tally {
    passed: usize,
    failed: usize,
    exhausted: usize,
    fallbacks: usize,
}

impl Tally {
    fn record(&mut self, r: Result<bool, Error>) {
        match r {
            Ok(true) => self.passed += 1,
            Ok(false) => self.failed += 1,
            Err(Error::SpaceExhausted(_)) => self.exhausted += 1,
            Err(e) => {
                eprintln!("unexpected error: {e}");
                self.failed += 1
            }
        }
    }
}

#[test]
fn criterion_06_regularization_self_certification() {
    let start = Instant::now();
    let names = [
        "green",
        "strong",
        "weak_decomp",
        "strong_decomp",
        "model_strong",
        "model_decomp",
        "recolor",
    ];
    let mut tallies: Vec<Tally> = names.iter().map(|_| Tally::default()).collect();
    for p in [2u32, 3] {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + p as u64);
        for case_no in 0..50u64 {
            let c = reg_case(&mut rng, p);
            let refs: Vec<&DenseFunction> = c.fs.iter().collect();
            let (eps, v0, space) = (c.eps, &c.v0, c.space);

            tallies[0].record(
                green_regularize(&refs, v0, eps).and_then(|g| {
                    Ok(g.v1.is_subspace_of(v0) && verify_green(&refs, &g.v1, eps)?.0)
                }),
            );

            let delta = 0.1;
            tallies[1].record(
                strong_regularize(&refs, v0, delta, &|m| eps.min(0.5f64.powi(m as i32 / 2)))
                    .and_then(|s| {
                        let gap =
                            coset_energy(&space, &s.v2, &refs) - coset_energy(&space, &s.v1, &refs);
                        Ok(s.v2.is_subspace_of(&s.v1)
                            && s.v1.is_subspace_of(v0)
                            && gap <= delta + 1e-9
                            && verify_green(&refs, &s.v2, s.eps_final)?.0)
                    }),
            );

            let u = Subspace::trailing_coordinates(space.field(), space.dim(), 1);
            tallies[2].record(weak_decomp_regularize(&refs, &u, eps).and_then(|w| {
                w.d.check(&space)?;
                Ok(w.d.u == u && verify_weak(&refs, &w.d, eps)?.0)
            }));

            let sd = strong_decomp_regularize(&refs, v0, eps);
            if matches!(&sd, Ok(s) if s.fallback) {
                tallies[3].fallbacks += 1;
            }
            tallies[3]
                .record(sd.and_then(|s| Ok(verify_strong_decomp(&refs, v0, &s.v1, &s.d, eps)?.ok)));

            for (slot, backend) in [(4, Backend::Strong), (5, Backend::Decomposition)] {
                let res = regular_model(&refs, v0, eps, backend, case_no);
                if let Ok(m) = &res {
                    if m.fallback {
                        tallies[slot].fallbacks += 1;
                    }
                }
                tallies[slot].record(res.and_then(|m| {
                    Ok(m.v0.is_subspace_of(v0)
                        && verify_regular_model(&refs, &m.v0, &m.v1, &m.v2, &m.u, eps, eps)?.ok)
                }));
            }

            let phi = Coloring::random(space, rng.gen_range(1..=3), &mut rng);
            let reps = regularity_recolor(
                &phi,
                0.5,
                &EpsSchedule::Constant(0.3),
                Backend::Strong,
                case_no,
            );
            tallies[6].record(reps.and_then(|r| {
                let chk = verify_recoloring(
                    &r.old,
                    &r.new,
                    &r.v1,
                    &r.v2,
                    &r.u,
                    0.5,
                    r.eps_reg,
                    r.v0.codim(),
                )?;
                Ok(chk.ok && r.changed_count as f64 <= 0.5 * space.size() as f64 + 1e-9)
            }));
        }
    }
    let elapsed = start.elapsed();
    let failures: usize = tallies.iter().map(|t| t.failed).sum();
    let ok = failures == 0 && elapsed < Duration::from_secs(300);
    let summary: Vec<String> = names
        .iter()
        .zip(&tallies)
        .map(|(n, t)| {
            format!(
                "{n} {}/{} ok, {} exhausted, {} trivial",
                t.passed,
                t.passed + t.failed + t.exhausted,
                t.exhausted,
                t.fallbacks
            )
        })
        .collect();
    report(
        6,
        "regularization self-certification",
        ok,
        &format!("{}; {:.1}s", summary.join("; "), elapsed.as_secs_f64()),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------

/// Instance check written out by hand: nonzero vectors, equation, colors.
fn instance_is_valid(h: &ColoredPattern, spec: &CanonicalSpec, x: &[Vec<u32>]) -> bool {
    let p = h.p();
    let f = field(p);
    let colors_ok = x.iter().zip(h.psi()).all(|(v, &c)| {
        v.iter()
            .find(|&&a| a != 0)
            .map(|&a| spec.chi[a as usize - 1])
            == Some(c)
    });
    let eq_ok = (0..h.matrix().rows()).all(|r| {
        (0..x[0].len()).all(|coord| {
            x.iter().enumerate().fold(0, |s, (i, v)| {
                f.add(s, f.mul(h.matrix().get(r, i), v[coord]))
            }) == 0
        })
    });
    colors_ok && eq_ok
}

#[test]
fn criterion_07_dichotomy_soundness() {
    let fam5 = PatternFamily::monochromatic(5, 4, &[vec![1, 1, 1]], 3).unwrap();
    let res = decide_dichotomy(&fam5).unwrap();
    let mut ok = res.case == Case::B;
    let witness = res.witness.clone();
    let mut free_dims = Vec::new();
    if let Some(w) = &witness {
        for n in 3..=5 {
            let free = canonical_is_free(&fam5, w, n).unwrap();
            ok &= free;
            free_dims.push(format!("n={n}:{free}"));
        }
    }
    let fam2 = PatternFamily::monochromatic(2, 1, &[vec![1, 1, 1]], 3).unwrap();
    let res2 = decide_dichotomy(&fam2).unwrap();
    ok &= res2.case == Case::A && res2.certificates.len() == 1;
    for c in &res2.certificates {
        ok &= verify_certificate(&fam2, c).unwrap();
        ok &= instance_is_valid(&fam2.patterns()[c.pattern], &c.spec, &c.instance);
    }
    report(
        7,
        "dichotomy soundness",
        ok,
        &format!(
            "F5 r=4: {:?} witness {:?} free at {}; F2 r=1: {:?} with {} certificate(s)",
            res.case,
            witness.map(|w| w.chi),
            free_dims.join(" "),
            res2.case,
            res2.certificates.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_08_end_to_end_removal() {
    let start = Instant::now();
    let mut free = 0;
    let mut aborted = 0;
    let mut third = 0;
    let mut bad = 0;
    for (p, n, r) in [(2u32, 8usize, 2u32), (3, 5, 3)] {
        let space = Space::new(p, n).unwrap();
        let family = PatternFamily::monochromatic(p, r, &[vec![1, 1, 1]], 3).unwrap();
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(800 + seed);
            let phi = Coloring::random(space, r, &mut rng);
            let mut params = RemovalParams::new(0.5);
            params.seed = seed;
            params.assume_complexity_one = p == 2;
            match induced_removal(&phi, &family, &params) {
                Ok(Outcome::Free(rep)) => {
                    let verified = family
                        .patterns()
                        .iter()
                        .all(|h| pattern_stats(h, &rep.phi_prime).unwrap().is_free);
                    let log_bound = (2.0f64 / params.eps).ln() / (p as f64).ln();
                    let budget_ok = (rep.v1.codim() as f64) < log_bound
                        || rep.changed_count as f64 <= params.eps * space.size() as f64;
                    if verified && budget_ok {
                        free += 1;
                    } else {
                        bad += 1;
                    }
                }
                Ok(Outcome::Aborted(a)) => match a.evidence {
                    Evidence::CaseA {
                        family: fam,
                        certificate,
                        ..
                    } => {
                        let h = &fam.patterns()[certificate.pattern];
                        if instance_is_valid(h, &certificate.spec, &certificate.instance) {
                            aborted += 1;
                        } else {
                            bad += 1;
                        }
                    }
                    Evidence::ResidualInstance { .. } => third += 1,
                },
                Err(e) => {
                    eprintln!("removal error: {e}");
                    bad += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = bad == 0 && third == 0 && elapsed < Duration::from_secs(600);
    report(
        8,
        "end-to-end removal",
        ok,
        &format!(
            "{free} free, {aborted} Case-A aborts, {third} residual, {bad} invalid; {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_09_inhomogeneous_correspondence() {
    let space = Space::new(2, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut ok = true;
    let mut cases = 0;
    let mut identity_cases = 0;
    let mut instances = 0usize;
    for case in 0..40 {
        let k = rng.gen_range(1..=3usize);
        let rows = rng.gen_range(1..=k);
        let r = rng.gen_range(1..=2u32);
        let a_rows: Vec<Vec<i64>> = (0..rows)
            .map(|_| {
                random_vec(&mut rng, 2, k)
                    .into_iter()
                    .map(i64::from)
                    .collect()
            })
            .collect();
        let psi: Vec<u32> = (0..k).map(|_| rng.gen_range(1..=r)).collect();
        let h = ColoredPattern::from_rows(2, r, &a_rows, psi).unwrap();
        let zero = case % 4 == 0;
        let offsets: Vec<Vec<u32>> = (0..rows)
            .map(|_| {
                if zero {
                    vec![0; 4]
                } else {
                    let mut v = random_vec(&mut rng, 2, 4);
                    v[0] = 0;
                    v[1] = 0;
                    v
                }
            })
            .collect();
        let phi = Coloring::random(space, r, &mut rng);
        let op = OffsetPattern::new(h.clone(), offsets.clone()).unwrap();
        let red = inhomogeneous_reduce(&[op], &phi).unwrap();
        cases += 1;

        // brute force (H, b)-instances in φ
        let b_idx: Vec<usize> = offsets.iter().map(|b| space.encode(b)).collect();
        let mut direct = BTreeSet::new();
        let total = space.size().pow(k as u32);
        for code in 0..total {
            let mut c = code;
            let x: Vec<usize> = (0..k)
                .map(|_| {
                    let d = c % space.size();
                    c /= space.size();
                    d
                })
                .collect();
            let eq = (0..rows).all(|row| {
                let mut acc = 0;
                for (i, &xi) in x.iter().enumerate() {
                    if h.matrix().get(row, i) == 1 {
                        acc ^= xi;
                    }
                }
                acc == b_idx[row]
            });
            if eq && x.iter().zip(h.psi()).all(|(&xi, &c)| phi.get(xi) == c) {
                direct.insert(x);
            }
        }

        // instances of the generated patterns, mapped back
        let mut mapped = Vec::new();
        for (g, hp) in red.family.patterns().iter().enumerate() {
            for y in removal_lab::pattern::solutions(hp.matrix(), red.lifted.space()).unwrap() {
                if y.iter()
                    .zip(hp.psi())
                    .all(|(&yi, &c)| red.lifted.get(yi) == c)
                {
                    mapped.push(red.instance_map(g, &y));
                }
            }
        }
        let mapped_set: BTreeSet<Vec<usize>> = mapped.iter().cloned().collect();
        ok &= mapped_set.len() == mapped.len() && mapped_set == direct;
        instances += mapped.len();

        // pattern count formula
        let bsz = red.b.size() as u128;
        let formula =
            bsz.pow((k - h.rank()) as u32) * (r as u128).pow((k * (red.b.size() - 1)) as u32);
        let generated = red.family.len() as u128;
        ok &= generated == 0 || generated == formula;
        if zero {
            identity_cases += 1;
            ok &= red.b.dim() == 0 && generated == 1 && red.family.patterns()[0] == h;
        }
    }
    report(
        9,
        "inhomogeneous correspondence",
        ok,
        &format!("{cases} cases ({identity_cases} with b = 0), {instances} instances matched bijectively"),
    );
    assert!(ok);
}

#[test]
fn criterion_10_constants_recorded_not_asserted() {
    // The quantitative constants are Ackermann-scale; record representative
    // loop bounds that the implementation does check, and name the rest.
    let eps: f64 = 0.25;
    let k = 2.0;
    let weak_rounds = 2.0 * k / eps.powi(3);
    let strong_rounds = k / (eps.powi(3) / 4.0);
    let decomp_rounds = 2.0 * k / eps;
    report(
        10,
        "constants recorded, not asserted",
        true,
        &format!(
            "eps={eps}, k={k}: weak-round bound {weak_rounds:.0}, strong-round bound {strong_rounds:.0}, \
             decomposition-round bound {decomp_rounds:.0}; delta(eps,H), eps_rado, n_rado, n_GR and tower/wowzer growth not computed"
        ),
    );
}
