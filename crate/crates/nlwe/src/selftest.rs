//! Block-operator toolkit and the self-testing isometries.
//!
//! Round 1 (Alice + Bob's b2-marginals) certifies the left source and the
//! side measurements; round 2 repeats the construction with Charlie and
//! Bob's b1-marginals. The composed map appends qutrit ancilla pairs and is
//! evaluated directly from its output formula, term by term, on state
//! vectors. Ancilla factors are appended in application order, so after both
//! rounds the factor layout is (A, B1, B2, C, B2', C', A', B1').

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    apply_on_factors, hermitian_eig, inner, range_projector, regularize_on_block, tensor_ket,
    Ket, Matrix,
};
use crate::realization::{correlations, CorrelationTensor, Realization, Y_DIAMOND};
use crate::reference::{assemble_reference, bob_single_system_families, max_entangled};

/// Which certification round the operators are built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Round {
    /// Side party Alice; Bob coarse-grained over b2.
    One,
    /// Side party Charlie; Bob coarse-grained over b1.
    Two,
}

/// The operator toolkit built from one round's measurement families.
/// "Side" is Alice in round 1 and Charlie in round 2.
#[derive(Clone, Debug)]
pub struct BlockOperators {
    pub round: Round,
    pub dim_side: usize,
    pub dim_bob: usize,
    // side-party Pauli-like differences and their qubit-block identities
    pub z01_side: Matrix,
    pub z12_side: Matrix,
    pub x01_side: Matrix,
    pub x12_side: Matrix,
    pub id_z01_side: Matrix,
    pub id_z12_side: Matrix,
    pub id_x01_side: Matrix,
    pub id_x12_side: Matrix,
    // Bob-side raw differences of coarse-grained elements
    pub d01: Matrix,
    pub d12: Matrix,
    pub e01: Matrix,
    pub e12: Matrix,
    pub id_d01: Matrix,
    pub id_d12: Matrix,
    pub id_e01: Matrix,
    pub id_e12: Matrix,
    // hatted combinations (D +/- E)/sqrt(2); anticommute by construction
    // once the coarse-grained elements square to their block identities
    pub zhat01: Matrix,
    pub xhat01: Matrix,
    pub zhat12: Matrix,
    pub xhat12: Matrix,
    // regularized versions: Hermitian, unitary on the block range, zero outside
    pub z01_bob: Matrix,
    pub x01_bob: Matrix,
    pub z12_bob: Matrix,
    pub x12_bob: Matrix,
    // projectors onto the unions of the D/E ranges
    pub block01: Matrix,
    pub block12: Matrix,
    // qutrit-level projectors P_0, P_1, P_2 on Bob's side
    pub p: [Matrix; 3],
}

/// Unitaries entering the swap isometry, plus the qutrit Fourier matrix.
#[derive(Clone, Debug)]
pub struct SwapOperators {
    pub round: Round,
    pub dim_side: usize,
    pub dim_bob: usize,
    /// sum_j omega^j M_{j|0} on the side party
    pub z_side: Matrix,
    /// sum_j omega^j P_j on Bob
    pub z_bob: Matrix,
    /// X^(0) = identity, X^(1), X^(2) on the side party
    pub x_side: [Matrix; 3],
    /// same on Bob
    pub x_bob: [Matrix; 3],
    /// side party's setting-0 elements M_{j|0}
    pub m_side: [Matrix; 3],
    pub p_bob: [Matrix; 3],
    /// qutrit Fourier transform F|j> = 3^{-1/2} sum_k omega^{jk} |k>
    pub fourier: Matrix,
}

fn omega() -> C64 {
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0)
}

/// Build the Appendix-style operator toolkit for the given round.
pub fn build_block_operators(r: &Realization, round: Round) -> Result<BlockOperators> {
    let (da, db1, db2, dc) = r.dims;
    let (side, dim_side): (&Vec<Vec<Matrix>>, usize) = match round {
        Round::One => (&r.alice, da),
        Round::Two => (&r.charlie, dc),
    };
    let dim_bob = db1 * db2;
    let bm = |y: usize, o: usize| -> Matrix {
        match round {
            Round::One => r.bob_marginal_b1(y, o),
            Round::Two => r.bob_marginal_b2(y, o),
        }
    };
    if side.iter().any(|f| f.iter().any(|m| m.rows != dim_side)) {
        return Err(Error::Usage("side measurement dimension mismatch".into()));
    }

    let z01_side = side[0][0].sub(&side[0][1]);
    let z12_side = side[0][1].sub(&side[0][2]);
    let x01_side = side[1][0].sub(&side[1][1]);
    let x12_side = side[2][1].sub(&side[2][2]);
    let id_z01_side = side[0][0].add(&side[0][1]);
    let id_z12_side = side[0][1].add(&side[0][2]);
    let id_x01_side = side[1][0].add(&side[1][1]);
    let id_x12_side = side[2][1].add(&side[2][2]);

    let d01 = bm(0, 0).sub(&bm(0, 1));
    let d12 = bm(2, 1).sub(&bm(2, 2));
    let e01 = bm(1, 0).sub(&bm(1, 1));
    let e12 = bm(3, 1).sub(&bm(3, 2));
    let id_d01 = bm(0, 0).add(&bm(0, 1));
    let id_d12 = bm(2, 1).add(&bm(2, 2));
    let id_e01 = bm(1, 0).add(&bm(1, 1));
    let id_e12 = bm(3, 1).add(&bm(3, 2));

    let inv_sqrt2 = C64::new(1.0 / 2f64.sqrt(), 0.0);
    let zhat01 = d01.add(&e01).scale(inv_sqrt2);
    let xhat01 = d01.sub(&e01).scale(inv_sqrt2);
    let zhat12 = d12.add(&e12).scale(inv_sqrt2);
    let xhat12 = d12.sub(&e12).scale(inv_sqrt2);

    let block01 = range_projector(&[&d01, &e01])?;
    let block12 = range_projector(&[&d12, &e12])?;

    let z01_bob = regularize_on_block(&zhat01, &block01)?;
    let x01_bob = regularize_on_block(&xhat01, &block01)?;
    let z12_bob = regularize_on_block(&zhat12, &block12)?;
    let x12_bob = regularize_on_block(&xhat12, &block12)?;

    let half = C64::new(0.5, 0.0);
    let p = [
        block01.add(&z01_bob).scale(half),
        block01.sub(&z01_bob).scale(half),
        block12.sub(&z12_bob).scale(half),
    ];

    Ok(BlockOperators {
        round,
        dim_side,
        dim_bob,
        z01_side,
        z12_side,
        x01_side,
        x12_side,
        id_z01_side,
        id_z12_side,
        id_x01_side,
        id_x12_side,
        d01,
        d12,
        e01,
        e12,
        id_d01,
        id_d12,
        id_e01,
        id_e12,
        zhat01,
        xhat01,
        zhat12,
        xhat12,
        z01_bob,
        x01_bob,
        z12_bob,
        x12_bob,
        block01,
        block12,
        p,
    })
}

/// Qutrit Fourier matrix.
pub fn fourier3() -> Matrix {
    let w = omega();
    let mut f = Matrix::zeros(3, 3);
    for j in 0..3 {
        for k in 0..3 {
            // F|j> has amplitude omega^{jk}/sqrt(3) on |k>
            f[(k, j)] = w.powu((j * k) as u32) / 3f64.sqrt();
        }
    }
    f
}

/// Build the swap-isometry unitaries from the block operators.
pub fn build_swap_operators(b: &BlockOperators, r: &Realization) -> Result<SwapOperators> {
    let side = match b.round {
        Round::One => &r.alice,
        Round::Two => &r.charlie,
    };
    let w = omega();
    let mut z_side = Matrix::zeros(b.dim_side, b.dim_side);
    for (j, m) in side[0].iter().enumerate() {
        z_side = z_side.add(&m.scale(w.powu(j as u32)));
    }
    let mut z_bob = Matrix::zeros(b.dim_bob, b.dim_bob);
    for (j, p) in b.p.iter().enumerate() {
        z_bob = z_bob.add(&p.scale(w.powu(j as u32)));
    }

    let id_side = Matrix::identity(b.dim_side);
    let id_bob = Matrix::identity(b.dim_bob);
    let x1_side = b.x01_side.add(&id_side.sub(&b.id_x01_side));
    let x2_side = x1_side.mul(&id_side.sub(&b.id_x12_side).add(&b.x12_side));
    let x1_bob = b.x01_bob.add(&id_bob.sub(&b.block01));
    let x2_bob = x1_bob.mul(&id_bob.sub(&b.block12).add(&b.x12_bob));

    let m_side = [side[0][0].clone(), side[0][1].clone(), side[0][2].clone()];

    Ok(SwapOperators {
        round: b.round,
        dim_side: b.dim_side,
        dim_bob: b.dim_bob,
        z_side,
        z_bob,
        x_side: [id_side, x1_side, x2_side],
        x_bob: [Matrix::identity(b.dim_bob), x1_bob, x2_bob],
        m_side,
        p_bob: b.p.clone(),
        fourier: fourier3(),
    })
}

/// Shared core of both isometry applications: for every ancilla value (j,k)
/// apply the side operator to `side_factor` and the Bob operator to factors
/// 1..3, then append a 9-dimensional ancilla factor at slot anc(j,k).
fn apply_swap_map(
    input: &Ket,
    dims: &[usize],
    side_factor: usize,
    side_ops: &[Matrix; 3],
    bob_ops: &[Matrix; 3],
    anc: impl Fn(usize, usize) -> usize,
) -> Ket {
    let n = input.dim();
    let mut out = Ket::zeros(n * 9);
    for k in 0..3 {
        let wb = apply_on_factors(input, dims, 1, 2, &bob_ops[k]);
        for j in 0..3 {
            let w = apply_on_factors(&wb, dims, side_factor, 1, &side_ops[j]);
            let slot = anc(j, k);
            for (i, &amp) in w.data.iter().enumerate() {
                out.data[i * 9 + slot] += amp;
            }
        }
    }
    out
}

fn composed_ops(s: &SwapOperators) -> ([Matrix; 3], [Matrix; 3]) {
    let side = [
        s.x_side[0].mul(&s.m_side[0]),
        s.x_side[1].mul(&s.m_side[1]),
        s.x_side[2].mul(&s.m_side[2]),
    ];
    let bob = [
        s.x_bob[0].mul(&s.p_bob[0]),
        s.x_bob[1].mul(&s.p_bob[1]),
        s.x_bob[2].mul(&s.p_bob[2]),
    ];
    (side, bob)
}

/// Round-1 swap map: acts on the A factor and the B1 x B2 pair, appending a
/// 9-dim ancilla (A' slow, B1' fast). `dims` are the factor dimensions of
/// `input`; factors beyond the first four are passed through untouched.
pub fn apply_isometry_round1(s: &SwapOperators, input: &Ket, dims: &[usize]) -> Result<Ket> {
    let total: usize = dims.iter().product();
    if input.dim() != total || dims[0] != s.dim_side || dims[1] * dims[2] != s.dim_bob {
        return Err(Error::Usage(format!(
            "round-1 isometry dimension mismatch: input {} vs dims {:?}",
            input.dim(),
            dims
        )));
    }
    let (side, bob) = composed_ops(s);
    Ok(apply_swap_map(input, dims, 0, &side, &bob, |j, k| 3 * j + k))
}

/// Round-2 swap map: acts on the C factor and the B1 x B2 pair, appending a
/// 9-dim ancilla (B2' slow, C' fast).
pub fn apply_isometry_round2(s: &SwapOperators, input: &Ket, dims: &[usize]) -> Result<Ket> {
    let total: usize = dims.iter().product();
    if input.dim() != total || dims[3] != s.dim_side || dims[1] * dims[2] != s.dim_bob {
        return Err(Error::Usage(format!(
            "round-2 isometry dimension mismatch: input {} vs dims {:?}",
            input.dim(),
            dims
        )));
    }
    let (side, bob) = composed_ops(s);
    Ok(apply_swap_map(input, dims, 3, &side, &bob, |j, k| 3 * k + j))
}

/// Outcome of checking one self-testing statement.
#[derive(Clone, Debug, Serialize)]
pub struct ExtractionResult {
    pub statement: String,
    /// overlap of the isometry output with (junk) x (reference ancilla state)
    pub fidelity: f64,
    /// sqrt(2 - 2 fidelity), the normalized vector distance after phase alignment
    pub residual: f64,
    /// |output norm - expected scale|
    pub norm_error: f64,
    /// overlap of this statement's junk with the state statement's junk
    pub junk_state_fidelity: f64,
    /// Schmidt defect (1 - largest squared singular value) of the junk
    /// across the (A B1)|(B2 C) cut
    pub junk_factorization_residual: f64,
    pub pass: bool,
    #[serde(skip)]
    pub junk: Ket,
}

impl ExtractionResult {
    fn evaluate(
        statement: String,
        output: &Ket,
        target_anc: &Ket,
        expected_scale: f64,
        phys_cut: (usize, usize),
        state_junk: Option<&Ket>,
        tol: f64,
    ) -> Self {
        let anc_dim = target_anc.dim();
        let anc_hat = target_anc.normalized();
        let phys_dim = output.dim() / anc_dim;
        // contract the ancilla factors against the normalized target
        let mut junk = Ket::zeros(phys_dim);
        for i in 0..phys_dim {
            let mut acc = C64::new(0.0, 0.0);
            for m in 0..anc_dim {
                acc += anc_hat.data[m].conj() * output.data[i * anc_dim + m];
            }
            junk.data[i] = acc;
        }
        let w_norm = output.norm();
        let j_norm = junk.norm();
        let fidelity = if w_norm > 0.0 { (j_norm / w_norm).min(1.0) } else { 0.0 };
        let residual = (2.0 - 2.0 * fidelity).max(0.0).sqrt();
        let norm_error = (w_norm - expected_scale).abs();
        let junk_hat = if j_norm > 0.0 { junk.normalized() } else { junk.clone() };
        let junk_state_fidelity = match state_junk {
            Some(sj) => inner(sj, &junk_hat).map(|v| v.norm()).unwrap_or(0.0),
            None => 1.0,
        };
        let junk_factorization_residual = product_residual(&junk_hat, phys_cut.0, phys_cut.1);
        let pass = 1.0 - fidelity <= tol
            && norm_error <= 1e-6
            && 1.0 - junk_state_fidelity <= tol
            && junk_factorization_residual <= 1e-9;
        ExtractionResult {
            statement,
            fidelity,
            residual,
            norm_error,
            junk_state_fidelity,
            junk_factorization_residual,
            pass,
            junk: junk_hat,
        }
    }

    fn worse_of(mut self, other: ExtractionResult) -> ExtractionResult {
        if other.fidelity < self.fidelity {
            self.statement = other.statement;
            self.fidelity = other.fidelity;
            self.residual = other.residual;
            self.junk = other.junk;
        }
        self.norm_error = self.norm_error.max(other.norm_error);
        self.junk_state_fidelity = self.junk_state_fidelity.min(other.junk_state_fidelity);
        self.junk_factorization_residual =
            self.junk_factorization_residual.max(other.junk_factorization_residual);
        self.pass = self.pass && other.pass;
        self
    }
}

/// Schmidt defect of a normalized ket across the (left)|(right) cut:
/// 1 minus the largest squared singular value (zero iff the ket is a
/// product across the cut).
fn product_residual(k: &Ket, dim_left: usize, dim_right: usize) -> f64 {
    assert_eq!(k.dim(), dim_left * dim_right);
    // Gram matrix over the right factor
    let mut gram = Matrix::zeros(dim_right, dim_right);
    for l in 0..dim_left {
        for r1 in 0..dim_right {
            let a = k.data[l * dim_right + r1];
            if a == C64::new(0.0, 0.0) {
                continue;
            }
            for r2 in 0..dim_right {
                gram[(r1, r2)] += a.conj() * k.data[l * dim_right + r2];
            }
        }
    }
    let (vals, _) = hermitian_eig(&gram).expect("Gram matrix is Hermitian");
    let top = vals.first().copied().unwrap_or(0.0).clamp(0.0, 1.0);
    (1.0 - top).max(0.0)
}

/// Verification tolerances. `stats` gates the theorem's hypothesis; `residual`
/// gates the extraction statements.
#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    pub stats: f64,
    pub residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { stats: 1e-10, residual: 1e-8 }
    }
}

/// Reference correlation tensor (the theorem's hypothesis target).
pub fn reference_correlations() -> CorrelationTensor {
    correlations(&Realization::reference(&assemble_reference()))
        .expect("reference realization is valid")
}

/// Run every self-testing statement of the main theorem against a
/// realization. Fails with a hypothesis violation if the statistics do not
/// match the reference within `tol.stats`.
pub fn verify_theorem1(r: &Realization, tol: &Tolerances) -> Result<Vec<ExtractionResult>> {
    let t = correlations(r)?;
    let tref = reference_correlations();
    let (dev, idx) = t.worst_entry_diff(&tref);
    if dev > tol.stats {
        return Err(Error::HypothesisViolation {
            deviation: dev,
            x: idx[0],
            y: idx[1],
            z: idx[2],
            a: idx[3],
            b1: idx[4],
            b2: idx[5],
            c: idx[6],
        });
    }

    let blocks1 = build_block_operators(r, Round::One)?;
    let swap1 = build_swap_operators(&blocks1, r)?;
    let blocks2 = build_block_operators(r, Round::Two)?;
    let swap2 = build_swap_operators(&blocks2, r)?;

    let dims = r.factor_dims();
    let psi = r.joint_state();
    let phi_plus = max_entangled(3).expect("d=3");
    let (da, db1, db2, dc) = r.dims;
    let cut = (da * db1, db2 * dc);
    let dims5 = [da, db1, db2, dc, 9];

    let full = |v: &Ket| -> Result<Ket> {
        let w2 = apply_isometry_round2(&swap2, v, &dims)?;
        apply_isometry_round1(&swap1, &w2, &dims5)
    };
    // ancilla order after both rounds is (B2', C', A', B1')
    let anc_target = |ab1: &Ket, b2c: &Ket| tensor_ket(b2c, ab1);

    let mut results = Vec::new();

    // (i) state extraction
    let w_state = full(&psi)?;
    let state_res = ExtractionResult::evaluate(
        "state".into(),
        &w_state,
        &anc_target(&phi_plus, &phi_plus),
        1.0,
        cut,
        None,
        tol.residual,
    );
    let state_junk = state_res.junk.clone();
    results.push(state_res);

    // (ii) Alice and Charlie measurement extraction, all (a,x) x (c,z).
    // Round-2 operators act on B1,B2,C only, so they commute with Alice's
    // element; round 2 is applied once per (z,c) and Alice's side of round 1
    // is folded into the per-term operators.
    let (side1, bob1) = composed_ops(&swap1);
    let mut meas: Option<ExtractionResult> = None;
    for z in 0..3 {
        for c in 0..3 {
            let vc = apply_on_factors(&psi, &dims, 3, 1, &r.charlie[z][c]);
            let w2 = apply_isometry_round2(&swap2, &vc, &dims)?;
            // cache the Bob-side term applications; they do not depend on (x,a)
            let wb: Vec<Ket> = (0..3)
                .map(|k| apply_on_factors(&w2, &dims5, 1, 2, &bob1[k]))
                .collect();
            for x in 0..3 {
                for a in 0..3 {
                    let mut w = Ket::zeros(w2.dim() * 9);
                    for (j, sj) in side1.iter().enumerate() {
                        let op = sj.mul(&r.alice[x][a]);
                        for (k, wbk) in wb.iter().enumerate() {
                            let term = apply_on_factors(wbk, &dims5, 0, 1, &op);
                            let slot = 3 * j + k;
                            for (i, &amp) in term.data.iter().enumerate() {
                                w.data[i * 9 + slot] += amp;
                            }
                        }
                    }
                    let ref_exp = assemble_reference();
                    let t_ab1 = apply_on_factors(&phi_plus, &[3, 3], 0, 1, &ref_exp.alice[x].elements[a].1);
                    let t_b2c = apply_on_factors(&phi_plus, &[3, 3], 1, 1, &ref_exp.charlie[z].elements[c].1);
                    let res = ExtractionResult::evaluate(
                        format!("side-measurements(a={a},x={x},c={c},z={z})"),
                        &w,
                        &anc_target(&t_ab1, &t_b2c),
                        1.0 / 3.0,
                        cut,
                        Some(&state_junk),
                        tol.residual,
                    );
                    meas = Some(match meas.take() {
                        None => res,
                        Some(acc) => acc.worse_of(res),
                    });
                }
            }
        }
    }
    results.push(meas.expect("81 combinations evaluated"));

    // (iii) Bob marginal extraction (round 1 only), y = 0..3, b1 = 0..2.
    // The junk here is the round-1 state junk, not the two-round one.
    let w1_state = apply_isometry_round1(&swap1, &psi, &dims)?;
    let round1_junk = ExtractionResult::evaluate(
        "state-round1".into(),
        &w1_state,
        &phi_plus,
        1.0,
        cut,
        None,
        tol.residual,
    )
    .junk;
    let bob_ref = bob_single_system_families();
    let mut bobres: Option<ExtractionResult> = None;
    for y in 0..4 {
        for b1 in 0..3 {
            let v = apply_on_factors(&psi, &dims, 1, 2, &r.bob_marginal_b1(y, b1));
            let w = apply_isometry_round1(&swap1, &v, &dims)?;
            let t_anc = apply_on_factors(&phi_plus, &[3, 3], 1, 1, &bob_ref[y].elements[b1].1);
            let res = ExtractionResult::evaluate(
                format!("bob-marginals(b1={b1},y={y})"),
                &w,
                &t_anc,
                1.0 / 3f64.sqrt(),
                cut,
                Some(&round1_junk),
                tol.residual,
            );
            bobres = Some(match bobres.take() {
                None => res,
                Some(acc) => acc.worse_of(res),
            });
        }
    }
    results.push(bobres.expect("12 combinations evaluated"));

    // (iv) the domino measurement, all nine outcomes
    let ref_exp = assemble_reference();
    for (b1, b2, psi_b, phi_b, _) in &ref_exp.bob_domino.entries {
        let el = &r.bob[Y_DIAMOND][3 * b1 + b2];
        let v = apply_on_factors(&psi, &dims, 1, 2, el);
        let w = full(&v)?;
        // target ancilla in (B2', C', A', B1') order
        let t_anc = tensor_ket(&tensor_ket(phi_b, phi_b), &tensor_ket(psi_b, psi_b));
        results.push(ExtractionResult::evaluate(
            format!("domino(b1={b1},b2={b2})"),
            &w,
            &t_anc,
            1.0 / 3.0,
            cut,
            Some(&state_junk),
            tol.residual,
        ));
    }

    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::tensor;
    use crate::realization::{randomized_equivalent, JunkDims};

    fn reference_realization() -> Realization {
        Realization::reference(&assemble_reference())
    }

    #[test]
    fn reference_block_operators() {
        let r = reference_realization();
        let b = build_block_operators(&r, Round::One).unwrap();
        // Zhat^B_{0,1} equals Z'_{0,1} (x) I on B1 x B2
        let zp01 = Matrix::from_real(3, 3, &[1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
        let expect = tensor(&zp01, &Matrix::identity(3));
        assert!(b.zhat01.max_abs_diff(&expect) < 1e-10);
        let xp01 = Matrix::from_real(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(b.xhat01.max_abs_diff(&tensor(&xp01, &Matrix::identity(3))) < 1e-10);
        // P_j = |j><j| (x) I on B1
        for j in 0..3 {
            let expect = tensor(&Ket::basis(3, j).projector(), &Matrix::identity(3));
            assert!(b.p[j].max_abs_diff(&expect) < 1e-10);
        }
        // regularized operators square to the block projector
        assert!(b.z01_bob.mul(&b.z01_bob).max_abs_diff(&b.block01) < 1e-9);
        assert!(b.x12_bob.mul(&b.x12_bob).max_abs_diff(&b.block12) < 1e-9);
    }

    #[test]
    fn hatted_operators_anticommute() {
        let r = reference_realization();
        for round in [Round::One, Round::Two] {
            let b = build_block_operators(&r, round).unwrap();
            let anti = b.zhat01.mul(&b.xhat01).add(&b.xhat01.mul(&b.zhat01));
            assert!(anti.max_abs_diff(&Matrix::zeros(9, 9)) < 1e-12);
            let anti12 = b.zhat12.mul(&b.xhat12).add(&b.xhat12.mul(&b.zhat12));
            assert!(anti12.max_abs_diff(&Matrix::zeros(9, 9)) < 1e-12);
        }
    }

    #[test]
    fn reference_swap_operators() {
        let r = reference_realization();
        let b = build_block_operators(&r, Round::One).unwrap();
        let s = build_swap_operators(&b, &r).unwrap();
        // Z^A = diag(1, w, w^2)
        let w = omega();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { w.powu(i as u32) } else { C64::new(0.0, 0.0) };
                assert!((s.z_side[(i, j)] - expect).norm() < 1e-12);
            }
        }
        // Z^A cubed is the identity
        let z3 = s.z_side.mul(&s.z_side).mul(&s.z_side);
        assert!(z3.max_abs_diff(&Matrix::identity(3)) < 1e-12);
        // X^(1) on A swaps |0>,|1> and fixes |2>
        let x1 = &s.x_side[1];
        assert!(x1.apply(&Ket::basis(3, 0)).sub(&Ket::basis(3, 1)).norm() < 1e-12);
        assert!(x1.apply(&Ket::basis(3, 2)).sub(&Ket::basis(3, 2)).norm() < 1e-12);
        // X^(1), X^(2) unitary on both sides
        for ops in [&s.x_side, &s.x_bob] {
            for x in &ops[1..] {
                assert!(x.mul(&x.adjoint()).max_abs_diff(&Matrix::identity(x.rows)) < 1e-9);
            }
        }
        // M_{0|0} = (Z^0 + Z^1 + Z^2)/3
        let zsum = Matrix::identity(3).add(&s.z_side).add(&s.z_side.mul(&s.z_side));
        assert!(zsum.scale(C64::new(1.0 / 3.0, 0.0)).max_abs_diff(&r.alice[0][0]) < 1e-10);
        // Fourier: F|0> = (1,1,1)/sqrt(3)
        let f0 = s.fourier.apply(&Ket::basis(3, 0));
        assert!(f0.sub(&Ket::from_real(&[1.0, 1.0, 1.0]).scale(C64::new(1.0 / 3f64.sqrt(), 0.0))).norm() < 1e-12);
    }

    #[test]
    fn round1_maps_reference_state_to_phi_plus() {
        let r = reference_realization();
        let b = build_block_operators(&r, Round::One).unwrap();
        let s = build_swap_operators(&b, &r).unwrap();
        let psi = r.joint_state();
        let dims = r.factor_dims();
        let w = apply_isometry_round1(&s, &psi, &dims).unwrap();
        assert!((w.norm() - 1.0).abs() < 1e-10);
        // expected: sqrt(3) M_{0|0}^A |psi> (x) |phi_+>^{A'B1'}
        let junk = apply_on_factors(&psi, &dims, 0, 1, &r.alice[0][0]).scale(C64::new(3f64.sqrt(), 0.0));
        let expect = tensor_ket(&junk, &max_entangled(3).unwrap());
        assert!(w.sub(&expect).norm() < 1e-9);

        // zero in, zero out
        let zero = Ket::zeros(psi.dim());
        assert!(apply_isometry_round1(&s, &zero, &dims).unwrap().norm() == 0.0);

        // M_{1|0}^A input lands on |11>/sqrt(3) in the ancilla
        let v = apply_on_factors(&psi, &dims, 0, 1, &r.alice[0][1]);
        let w = apply_isometry_round1(&s, &v, &dims).unwrap();
        let anc = tensor_ket(&Ket::basis(3, 1), &Ket::basis(3, 1));
        let res = ExtractionResult::evaluate(
            "m10".into(),
            &w,
            &anc,
            1.0 / 3f64.sqrt(),
            (9, 9),
            None,
            1e-8,
        );
        assert!(res.pass, "fidelity {} norm_err {}", res.fidelity, res.norm_error);
    }

    #[test]
    fn round1_norm_preserving_on_relevant_span() {
        let r = reference_realization();
        let b = build_block_operators(&r, Round::One).unwrap();
        let s = build_swap_operators(&b, &r).unwrap();
        let psi = r.joint_state();
        let dims = r.factor_dims();
        let mut inputs = vec![psi.clone()];
        for x in 0..3 {
            for a in 0..3 {
                inputs.push(apply_on_factors(&psi, &dims, 0, 1, &r.alice[x][a]));
            }
        }
        for el in &r.bob[Y_DIAMOND] {
            inputs.push(apply_on_factors(&psi, &dims, 1, 2, el));
        }
        for v in &inputs {
            let w = apply_isometry_round1(&s, v, &dims).unwrap();
            let ratio = w.norm() / v.norm();
            assert!((ratio - 1.0).abs() < 1e-9, "ratio {ratio}");
        }
    }

    #[test]
    fn delta_selection_rule() {
        let r = reference_realization();
        let b = build_block_operators(&r, Round::One).unwrap();
        let psi = r.joint_state();
        let dims = r.factor_dims();
        for j in 0..3 {
            let va = apply_on_factors(&psi, &dims, 0, 1, &r.alice[0][j]);
            for k in 0..3 {
                let v = apply_on_factors(&va, &dims, 1, 2, &b.p[k]);
                if j == k {
                    assert!(v.sub(&va).norm() < 1e-9);
                } else {
                    assert!(v.norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn theorem_holds_on_reference() {
        let r = reference_realization();
        let results = verify_theorem1(&r, &Tolerances::default()).unwrap();
        assert_eq!(results.len(), 12);
        for res in &results {
            assert!(
                res.pass,
                "{} failed: fidelity {} residual {} norm_err {} junk_fid {} fact_res {}",
                res.statement,
                res.fidelity,
                res.residual,
                res.norm_error,
                res.junk_state_fidelity,
                res.junk_factorization_residual,
            );
            assert!(res.fidelity >= 1.0 - 1e-9);
            assert!(res.residual <= (2.0 - 2.0 * res.fidelity).max(0.0).sqrt() + 1e-9);
        }
    }

    #[test]
    fn theorem_holds_on_rotated_equivalents() {
        let reference = assemble_reference();
        for (seed, junk) in [
            (41u64, JunkDims::none()),
            (42, JunkDims { a: 2, b1: 1, b2: 1, c: 1 }),
            (43, JunkDims { a: 1, b1: 1, b2: 1, c: 2 }),
        ] {
            let r = randomized_equivalent(&reference, seed, junk).unwrap();
            let results = verify_theorem1(&r, &Tolerances::default()).unwrap();
            for res in &results {
                assert!(
                    res.pass,
                    "seed {seed} {}: fidelity {} norm_err {} junk_fid {} fact {}",
                    res.statement,
                    res.fidelity,
                    res.norm_error,
                    res.junk_state_fidelity,
                    res.junk_factorization_residual
                );
            }
        }
    }

    #[test]
    fn hypothesis_violation_reported() {
        // replace Bob's diamond measurement with the y=0 product measurement
        let mut r = reference_realization();
        r.bob[Y_DIAMOND] = r.bob[0].clone();
        match verify_theorem1(&r, &Tolerances::default()) {
            Err(Error::HypothesisViolation { deviation, y, .. }) => {
                assert_eq!(y, Y_DIAMOND);
                assert!(deviation > 1e-3);
            }
            other => panic!("expected hypothesis violation, got {other:?}"),
        }
    }

    #[test]
    fn norm_facts() {
        let r = reference_realization();
        let psi = r.joint_state();
        let dims = r.factor_dims();
        for el in &r.bob[Y_DIAMOND] {
            let v = apply_on_factors(&psi, &dims, 1, 2, el);
            assert!((v.norm() - 1.0 / 3.0).abs() < 1e-9);
        }
        for x in 0..3 {
            for a in 0..3 {
                let v = apply_on_factors(&psi, &dims, 0, 1, &r.alice[x][a]);
                assert!((v.norm() - 1.0 / 3f64.sqrt()).abs() < 1e-9);
            }
        }
    }
}
