//! One-way LOCC discrimination of product-state ensembles.
//!
//! The optimizer searches over one-way, two-round protocols: the first party
//! measures a POVM, communicates the outcome, and the second party measures a
//! POVM chosen per outcome; a guess map turns the pair of outcomes into an
//! ensemble index. This is a deliberately restricted protocol class — it
//! provides numerical evidence for an LOCC gap, not an impossibility proof.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, Ket, Matrix};
use crate::reference::assemble_reference;

/// An ensemble of pure product states with prior probabilities.
#[derive(Clone, Debug)]
pub struct DiscriminationInstance {
    /// (prior, first-factor state, second-factor state)
    pub ensemble: Vec<(f64, Ket, Ket)>,
}

impl DiscriminationInstance {
    pub fn validate(&self) -> Result<()> {
        if self.ensemble.is_empty() {
            return Err(Error::Validation("empty ensemble".into()));
        }
        let mut total = 0.0;
        for (i, (p, l, r)) in self.ensemble.iter().enumerate() {
            if *p < 0.0 {
                return Err(Error::Validation(format!("negative prior at index {i}")));
            }
            total += p;
            if (l.norm() - 1.0).abs() > 1e-10 || (r.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::Validation(format!("state {i} not normalized")));
            }
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("priors sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.ensemble[0].1.dim(), self.ensemble[0].2.dim())
    }

    /// Whether all joint states are pairwise orthogonal within `tol`.
    pub fn orthonormal(&self, tol: f64) -> bool {
        for (i, (_, li, ri)) in self.ensemble.iter().enumerate() {
            for (_, lj, rj) in self.ensemble.iter().skip(i + 1) {
                let ov_l: C64 = li.data.iter().zip(&lj.data).map(|(a, b)| a.conj() * b).sum();
                let ov_r: C64 = ri.data.iter().zip(&rj.data).map(|(a, b)| a.conj() * b).sum();
                if (ov_l * ov_r).norm() > tol {
                    return false;
                }
            }
        }
        true
    }
}

/// The nine-tile product basis with uniform priors.
pub fn domino_instance() -> DiscriminationInstance {
    let reference = assemble_reference();
    let ensemble = reference
        .bob_domino
        .entries
        .iter()
        .map(|(_, _, l, r, _)| (1.0 / 9.0, l.clone(), r.clone()))
        .collect();
    DiscriminationInstance { ensemble }
}

/// Classically correlated product grid |i>|j> with uniform priors.
pub fn product_grid_instance(d: usize) -> DiscriminationInstance {
    let mut ensemble = Vec::new();
    for i in 0..d {
        for j in 0..d {
            ensemble.push((1.0 / (d * d) as f64, Ket::basis(d, i), Ket::basis(d, j)));
        }
    }
    DiscriminationInstance { ensemble }
}

/// A one-way, two-round protocol.
#[derive(Clone, Debug, Serialize)]
pub struct OneWayProtocol {
    /// first-party POVM elements
    pub first: Vec<Matrix>,
    /// second-party POVM, one per first outcome
    pub second: Vec<Vec<Matrix>>,
    /// guess[m][r] = guessed ensemble index
    pub guess: Vec<Vec<usize>>,
}

fn povm_valid(els: &[Matrix], tol: f64) -> Result<()> {
    if els.is_empty() {
        return Err(Error::Validation("empty POVM".into()));
    }
    let dim = els[0].rows;
    let mut sum = Matrix::zeros(dim, dim);
    for el in els {
        if el.rows != dim {
            return Err(Error::Usage("POVM element dimension mismatch".into()));
        }
        if el.min_eigenvalue()? < -tol {
            return Err(Error::Validation("POVM element not positive".into()));
        }
        sum = sum.add(el);
    }
    if sum.max_abs_diff(&Matrix::identity(dim)) > tol {
        return Err(Error::Validation("POVM not complete".into()));
    }
    Ok(())
}

impl OneWayProtocol {
    pub fn validate(&self, tol: f64) -> Result<()> {
        povm_valid(&self.first, tol)?;
        if self.second.len() != self.first.len() || self.guess.len() != self.first.len() {
            return Err(Error::Usage("per-outcome POVM/guess count mismatch".into()));
        }
        for (b, g) in self.second.iter().zip(&self.guess) {
            povm_valid(b, tol)?;
            if g.len() != b.len() {
                return Err(Error::Usage("guess map length mismatch".into()));
            }
        }
        Ok(())
    }
}

fn born(state: &Ket, el: &Matrix) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..el.rows {
        for j in 0..el.cols {
            acc += state.data[i].conj() * el[(i, j)] * state.data[j];
        }
    }
    acc.re
}

/// Average guessing probability of a protocol on an instance.
pub fn success_probability(p: &OneWayProtocol, inst: &DiscriminationInstance) -> Result<f64> {
    let (dl, dr) = inst.dims();
    if p.first[0].rows != dl {
        return Err(Error::Usage(format!(
            "first-party POVM dimension {} does not match ensemble dimension {dl}",
            p.first[0].rows
        )));
    }
    let mut total = 0.0;
    for (m, a_el) in p.first.iter().enumerate() {
        if p.second[m][0].rows != dr {
            return Err(Error::Usage("second-party POVM dimension mismatch".into()));
        }
        for (i, (prior, l, r)) in inst.ensemble.iter().enumerate() {
            let pa = born(l, a_el);
            if pa <= 0.0 {
                continue;
            }
            for (rr, b_el) in p.second[m].iter().enumerate() {
                if p.guess[m][rr] == i {
                    total += prior * pa * born(r, b_el);
                }
            }
        }
    }
    if !(0.0..=1.0 + 1e-10).contains(&total) {
        return Err(Error::Domain(format!("success probability {total} out of range")));
    }
    Ok(total)
}

/// Outcome of the unrestricted (global-measurement) benchmark.
#[derive(Clone, Debug, Serialize)]
pub struct GlobalSuccess {
    pub value: f64,
    /// true if the ensemble is orthonormal (then `value` is exactly 1)
    pub orthonormal: bool,
}

/// Matrix power on the support: eigenvalues below `tol` are dropped.
fn pow_on_support(m: &Matrix, p: f64, tol: f64) -> Result<Matrix> {
    let (vals, vecs) = hermitian_eig(m)?;
    let dim = m.rows;
    let mut out = Matrix::zeros(dim, dim);
    for (k, &lam) in vals.iter().enumerate() {
        if lam <= tol {
            continue;
        }
        let f = lam.powf(p);
        let v = &vecs[k];
        for i in 0..dim {
            for j in 0..dim {
                out[(i, j)] += C64::new(f, 0.0) * v.data[i] * v.data[j].conj();
            }
        }
    }
    Ok(out)
}

/// Support projector of a Hermitian PSD matrix.
fn support_projector(m: &Matrix, tol: f64) -> Result<Matrix> {
    pow_on_support(m, 0.0, tol)
}

/// Best unrestricted success: 1 for orthonormal ensembles, otherwise the
/// square-root-measure lower bound.
pub fn global_success(inst: &DiscriminationInstance) -> Result<GlobalSuccess> {
    inst.validate()?;
    if inst.orthonormal(1e-10) {
        return Ok(GlobalSuccess { value: 1.0, orthonormal: true });
    }
    let (dl, dr) = inst.dims();
    let dim = dl * dr;
    // joint density matrix and square-root-measure success
    let mut rho = Matrix::zeros(dim, dim);
    let joints: Vec<(f64, Ket)> = inst
        .ensemble
        .iter()
        .map(|(p, l, r)| (*p, crate::linalg::tensor_ket(l, r)))
        .collect();
    for (p, s) in &joints {
        for i in 0..dim {
            for j in 0..dim {
                rho[(i, j)] += C64::new(*p, 0.0) * s.data[i] * s.data[j].conj();
            }
        }
    }
    let inv_sqrt = pow_on_support(&rho, -0.5, 1e-12)?;
    let mut value = 0.0;
    for (p, s) in &joints {
        let t = inv_sqrt.apply(s);
        let ov: C64 = s.data.iter().zip(&t.data).map(|(a, b)| a.conj() * b).sum();
        value += p * p * ov.norm_sqr();
    }
    Ok(GlobalSuccess { value: value.min(1.0), orthonormal: false })
}

/// Square-root-measure second stage: for each first outcome, build the POVM
/// from the conditional ensemble and pick maximum-likelihood guesses.
fn best_second_stage(
    first: &[Matrix],
    inst: &DiscriminationInstance,
) -> Result<(Vec<Vec<Matrix>>, Vec<Vec<usize>>)> {
    let (_, dr) = inst.dims();
    let n = inst.ensemble.len();
    let mut second = Vec::with_capacity(first.len());
    let mut guess = Vec::with_capacity(first.len());
    for a_el in first {
        let weights: Vec<f64> = inst
            .ensemble
            .iter()
            .map(|(p, l, _)| p * born(l, a_el))
            .collect();
        let mut rho = Matrix::zeros(dr, dr);
        for (w, (_, _, r)) in weights.iter().zip(&inst.ensemble) {
            for i in 0..dr {
                for j in 0..dr {
                    rho[(i, j)] += C64::new(*w, 0.0) * r.data[i] * r.data[j].conj();
                }
            }
        }
        let inv_sqrt = pow_on_support(&rho, -0.5, 1e-14)?;
        let supp = support_projector(&rho, 1e-14)?;
        let mut els = Vec::with_capacity(n);
        for (w, (_, _, r)) in weights.iter().zip(&inst.ensemble) {
            let t = inv_sqrt.apply(r);
            let mut el = Matrix::zeros(dr, dr);
            for i in 0..dr {
                for j in 0..dr {
                    el[(i, j)] = C64::new(*w, 0.0) * t.data[i] * t.data[j].conj();
                }
            }
            els.push(el);
        }
        // distribute the kernel complement over the first element to keep
        // completeness; it never contributes to any conditional state
        let complement = Matrix::identity(dr).sub(&supp);
        els[0] = els[0].add(&complement);
        // maximum-likelihood guess per outcome
        let g: Vec<usize> = els
            .iter()
            .map(|el| {
                let mut best = (0usize, f64::NEG_INFINITY);
                for (i, (w, (_, _, r))) in weights.iter().zip(&inst.ensemble).enumerate() {
                    let v = w * born(r, el);
                    if v > best.1 {
                        best = (i, v);
                    }
                }
                best.0
            })
            .collect();
        second.push(els);
        guess.push(g);
    }
    Ok((second, guess))
}

/// Effective first-party operators: with the second stage fixed, the success
/// is sum_m <A_m, R_m> for these Hermitian response operators.
fn response_operators(
    p: &OneWayProtocol,
    inst: &DiscriminationInstance,
) -> Vec<Matrix> {
    let (dl, _) = inst.dims();
    p.second
        .iter()
        .zip(&p.guess)
        .map(|(els, g)| {
            let mut rm = Matrix::zeros(dl, dl);
            for (i, (prior, l, r)) in inst.ensemble.iter().enumerate() {
                let coeff: f64 = els
                    .iter()
                    .zip(g)
                    .filter(|(_, &gi)| gi == i)
                    .map(|(el, _)| born(r, el))
                    .sum();
                let c = C64::new(prior * coeff, 0.0);
                for a in 0..dl {
                    for b in 0..dl {
                        rm[(a, b)] += c * l.data[a] * l.data[b].conj();
                    }
                }
            }
            rm
        })
        .collect()
}

/// One fixed-point improvement step on the first-party POVM.
fn first_stage_step(first: &[Matrix], r_ops: &[Matrix]) -> Result<Vec<Matrix>> {
    let dl = first[0].rows;
    let mut s = Matrix::zeros(dl, dl);
    let sandwiched: Vec<Matrix> = first
        .iter()
        .zip(r_ops)
        .map(|(a, r)| r.mul(a).mul(r))
        .collect();
    for m in &sandwiched {
        s = s.add(m);
    }
    let t = pow_on_support(&s, -0.5, 1e-14)?;
    let supp = support_projector(&s, 1e-14)?;
    let complement = Matrix::identity(dl).sub(&supp);
    let k = first.len() as f64;
    Ok(sandwiched
        .iter()
        .map(|m| {
            t.mul(m)
                .mul(&t)
                .add(&complement.scale(C64::new(1.0 / k, 0.0)))
        })
        .collect())
}

fn random_povm(dim: usize, outcomes: usize, rng: &mut impl Rng) -> Result<Vec<Matrix>> {
    // Wishart-like positive elements, normalized to a POVM
    let mut raw = Vec::with_capacity(outcomes);
    let mut s = Matrix::zeros(dim, dim);
    for _ in 0..outcomes {
        let mut x = Matrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                // Box-Muller
                let u1: f64 = rng.gen::<f64>().max(1e-300);
                let u2: f64 = rng.gen();
                let r = (-2.0 * u1.ln()).sqrt();
                x[(i, j)] = C64::from_polar(r, 2.0 * std::f64::consts::PI * u2);
            }
        }
        let g = x.mul(&x.adjoint());
        s = s.add(&g);
        raw.push(g);
    }
    let t = pow_on_support(&s, -0.5, 1e-14)?;
    Ok(raw.iter().map(|g| t.mul(g).mul(&t)).collect())
}

/// Result of the seesaw search.
#[derive(Clone, Debug, Serialize)]
pub struct SeesawResult {
    pub best_success: f64,
    pub restarts: usize,
    pub seed: u64,
    pub protocol: OneWayProtocol,
}

const MAX_ITERS: usize = 400;
const IMPROVE_EPS: f64 = 1e-13;

fn seesaw_single_restart(
    inst: &DiscriminationInstance,
    outcomes: usize,
    rng_seed: u64,
) -> Result<(f64, OneWayProtocol)> {
    let (dl, _) = inst.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let first = random_povm(dl, outcomes, &mut rng)?;
    let (second, guess) = best_second_stage(&first, inst)?;
    let mut protocol = OneWayProtocol { first, second, guess };
    let mut best = success_probability(&protocol, inst)?;
    for _ in 0..MAX_ITERS {
        let mut improved = false;

        // proposal: fixed-point step on the first stage, second stage re-derived
        let r_ops = response_operators(&protocol, inst);
        let first2 = first_stage_step(&protocol.first, &r_ops)?;
        let (second2, guess2) = best_second_stage(&first2, inst)?;
        let cand = OneWayProtocol { first: first2, second: second2, guess: guess2 };
        let s = success_probability(&cand, inst)?;
        if s > best + IMPROVE_EPS {
            protocol = cand;
            best = s;
            improved = true;
        } else {
            // proposal: re-derive only the second stage for the current first stage
            let (second3, guess3) = best_second_stage(&protocol.first, inst)?;
            let cand = OneWayProtocol {
                first: protocol.first.clone(),
                second: second3,
                guess: guess3,
            };
            let s = success_probability(&cand, inst)?;
            if s > best + IMPROVE_EPS {
                protocol = cand;
                best = s;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    Ok((best, protocol))
}

fn thread_count(restarts: usize) -> usize {
    let cap = std::env::var("NLWE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1);
    let hw = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    cap.unwrap_or(hw).min(restarts).max(1)
}

/// Alternating optimization over one-way protocols: deterministic under
/// (seed, restarts), best restart wins with lexicographic tie-break.
pub fn seesaw_one_way(
    inst: &DiscriminationInstance,
    outcomes: usize,
    restarts: usize,
    seed: u64,
) -> Result<SeesawResult> {
    inst.validate()?;
    if restarts == 0 {
        return Err(Error::Usage("restarts must be at least 1".into()));
    }
    if outcomes == 0 {
        return Err(Error::Usage("need at least one first-round outcome".into()));
    }
    let threads = thread_count(restarts);
    let mut results: Vec<Option<Result<(f64, OneWayProtocol)>>> = (0..restarts).map(|_| None).collect();
    if threads == 1 {
        for (idx, slot) in results.iter_mut().enumerate() {
            *slot = Some(seesaw_single_restart(
                inst,
                outcomes,
                seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(idx as u64),
            ));
        }
    } else {
        let chunks: Vec<Vec<usize>> = (0..threads)
            .map(|t| (t..restarts).step_by(threads).collect())
            .collect();
        let mut outputs: Vec<Vec<(usize, Result<(f64, OneWayProtocol)>)>> = Vec::new();
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunks
                .iter()
                .map(|chunk| {
                    scope.spawn(move || {
                        chunk
                            .iter()
                            .map(|&idx| {
                                (
                                    idx,
                                    seesaw_single_restart(
                                        inst,
                                        outcomes,
                                        seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
                                            .wrapping_add(idx as u64),
                                    ),
                                )
                            })
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                outputs.push(h.join().expect("restart worker panicked"));
            }
        });
        for chunk in outputs {
            for (idx, res) in chunk {
                results[idx] = Some(res);
            }
        }
    }

    let mut best: Option<(f64, OneWayProtocol)> = None;
    for slot in results {
        let (s, p) = slot.expect("all restarts executed")?;
        // strict > keeps the earliest restart on ties
        if best.as_ref().map_or(true, |(bs, _)| s > *bs) {
            best = Some((s, p));
        }
    }
    let (best_success, protocol) = best.expect("restarts >= 1");
    Ok(SeesawResult { best_success, restarts, seed, protocol })
}
