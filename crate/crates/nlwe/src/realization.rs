//! Physical realizations of the bilocality experiment and their statistics.
//!
//! Global subsystem order is A, B1, B2, C. The joint state is always
//! |psi>^{AB1} (x) |psi>^{B2C}, a product of two pure states, which encodes
//! the source-independence assumption structurally.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{apply_on_factors, inner, tensor, tensor_ket, Ket, Matrix};
use crate::reference::ReferenceExperiment;

pub const N_X: usize = 3;
pub const N_Y: usize = 5;
pub const N_Z: usize = 3;
/// Bob's diamond setting sits last in the y index order.
pub const Y_DIAMOND: usize = 4;

/// An arbitrary physical realization: two pure states and POVM families for
/// the three parties. Bob's elements act on the joint B1 x B2 space with no
/// product structure assumed.
#[derive(Clone, Debug)]
pub struct Realization {
    pub dims: (usize, usize, usize, usize),
    pub state_ab1: Ket,
    pub state_b2c: Ket,
    /// 3 settings x 3 outcomes, elements on A.
    pub alice: Vec<Vec<Matrix>>,
    /// 5 settings (0,1,2,3,diamond) x 9 outcomes (index 3*b1+b2), on B1 x B2.
    pub bob: Vec<Vec<Matrix>>,
    /// 3 settings x 3 outcomes, elements on C.
    pub charlie: Vec<Vec<Matrix>>,
}

/// p(a,b1,b2,c|x,y,z), stored flat in [x][y][z][a][b1][b2][c] order.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationTensor {
    pub values: Vec<f64>,
}

impl CorrelationTensor {
    pub const LEN: usize = N_X * N_Y * N_Z * 81;

    #[inline]
    pub fn index(x: usize, y: usize, z: usize, a: usize, b1: usize, b2: usize, c: usize) -> usize {
        ((((((x * N_Y + y) * N_Z + z) * 3 + a) * 3 + b1) * 3 + b2) * 3) + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize, a: usize, b1: usize, b2: usize, c: usize) -> f64 {
        self.values[Self::index(x, y, z, a, b1, b2, c)]
    }

    /// Check entry range and per-setting normalization.
    pub fn validate(&self) -> Result<()> {
        for (i, &v) in self.values.iter().enumerate() {
            if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                return Err(Error::Validation(format!(
                    "correlation entry {i} out of range: {v}"
                )));
            }
        }
        for x in 0..N_X {
            for y in 0..N_Y {
                for z in 0..N_Z {
                    let base = Self::index(x, y, z, 0, 0, 0, 0);
                    let s: f64 = self.values[base..base + 81].iter().sum();
                    if (s - 1.0).abs() > 1e-10 {
                        return Err(Error::Validation(format!(
                            "outcomes for (x={x},y={y},z={z}) sum to {s}, not 1"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Sum over the outcome variables not in `keep`, settings fixed.
    /// Returned values are indexed by the kept variables' outcomes in the
    /// order given, row-major.
    pub fn marginalize(&self, keep: &[OutcomeVar], x: usize, y: usize, z: usize) -> Result<Vec<f64>> {
        if keep.is_empty() || keep.len() > 4 {
            return Err(Error::Usage("marginalize: keep set must name 1..4 variables".into()));
        }
        let mut seen = [false; 4];
        for v in keep {
            let i = *v as usize;
            if seen[i] {
                return Err(Error::Usage("marginalize: duplicate variable in keep set".into()));
            }
            seen[i] = true;
        }
        let mut out = vec![0.0; 3usize.pow(keep.len() as u32)];
        for a in 0..3 {
            for b1 in 0..3 {
                for b2 in 0..3 {
                    for c in 0..3 {
                        let outcomes = [a, b1, b2, c];
                        let mut idx = 0;
                        for v in keep {
                            idx = idx * 3 + outcomes[*v as usize];
                        }
                        out[idx] += self.get(x, y, z, a, b1, b2, c);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Max absolute entrywise difference.
    pub fn distance(&self, other: &CorrelationTensor) -> Result<f64> {
        if self.values.len() != other.values.len() {
            return Err(Error::Usage("tensor shape mismatch".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Worst deviation with its indices, for hypothesis-violation reports.
    pub fn worst_entry_diff(&self, other: &CorrelationTensor) -> (f64, [usize; 7]) {
        let mut worst = (0.0, [0usize; 7]);
        for x in 0..N_X {
            for y in 0..N_Y {
                for z in 0..N_Z {
                    for a in 0..3 {
                        for b1 in 0..3 {
                            for b2 in 0..3 {
                                for c in 0..3 {
                                    let d = (self.get(x, y, z, a, b1, b2, c)
                                        - other.get(x, y, z, a, b1, b2, c))
                                    .abs();
                                    if d > worst.0 {
                                        worst = (d, [x, y, z, a, b1, b2, c]);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        worst
    }
}

/// One of the four outcome variables of the tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutcomeVar {
    A = 0,
    B1 = 1,
    B2 = 2,
    C = 3,
}

pub fn tensor_distance(t1: &CorrelationTensor, t2: &CorrelationTensor) -> Result<f64> {
    t1.distance(t2)
}

impl Realization {
    /// The reference experiment as a realization (all dims 3, Bob's settings
    /// 0..3 then diamond).
    pub fn reference(r: &ReferenceExperiment) -> Realization {
        let mut bob: Vec<Vec<Matrix>> = r
            .bob_product
            .iter()
            .map(|fam| fam.elements.iter().map(|(_, p)| p.clone()).collect())
            .collect();
        bob.push(
            r.bob_domino
                .as_measurement()
                .elements
                .iter()
                .map(|(_, p)| p.clone())
                .collect(),
        );
        Realization {
            dims: (3, 3, 3, 3),
            state_ab1: r.state_ab1.clone(),
            state_b2c: r.state_b2c.clone(),
            alice: r
                .alice
                .iter()
                .map(|fam| fam.elements.iter().map(|(_, p)| p.clone()).collect())
                .collect(),
            bob,
            charlie: r
                .charlie
                .iter()
                .map(|fam| fam.elements.iter().map(|(_, p)| p.clone()).collect())
                .collect(),
        }
    }

    pub fn factor_dims(&self) -> [usize; 4] {
        let (da, db1, db2, dc) = self.dims;
        [da, db1, db2, dc]
    }

    /// |psi>^{AB1} (x) |psi>^{B2C} on A x B1 x B2 x C.
    pub fn joint_state(&self) -> Ket {
        tensor_ket(&self.state_ab1, &self.state_b2c)
    }

    /// Validate dimensions, state norms, and every measurement family
    /// (Hermitian, positive, complete). Reports the first failing check.
    pub fn validate(&self) -> Result<()> {
        let (da, db1, db2, dc) = self.dims;
        if self.state_ab1.dim() != da * db1 {
            return Err(Error::Validation(format!(
                "state_ab1 has dim {}, expected {}",
                self.state_ab1.dim(),
                da * db1
            )));
        }
        if self.state_b2c.dim() != db2 * dc {
            return Err(Error::Validation(format!(
                "state_b2c has dim {}, expected {}",
                self.state_b2c.dim(),
                db2 * dc
            )));
        }
        for (name, st) in [("state_ab1", &self.state_ab1), ("state_b2c", &self.state_b2c)] {
            let n = st.norm();
            if (n - 1.0).abs() > 1e-10 {
                return Err(Error::Validation(format!("{name} has norm {n}, not 1")));
            }
        }
        let sites: [(&str, &Vec<Vec<Matrix>>, usize, usize, usize); 3] = [
            ("alice", &self.alice, 3, 3, da),
            ("bob", &self.bob, 5, 9, db1 * db2),
            ("charlie", &self.charlie, 3, 3, dc),
        ];
        for (site, fams, n_settings, n_outcomes, dim) in sites {
            if fams.len() != n_settings {
                return Err(Error::Validation(format!(
                    "{site}: expected {n_settings} settings, got {}",
                    fams.len()
                )));
            }
            for (s, fam) in fams.iter().enumerate() {
                if fam.len() != n_outcomes {
                    return Err(Error::Validation(format!(
                        "{site} setting {s}: expected {n_outcomes} outcomes, got {}",
                        fam.len()
                    )));
                }
                let mut sum = Matrix::zeros(dim, dim);
                for (o, el) in fam.iter().enumerate() {
                    if el.rows != dim || el.cols != dim {
                        return Err(Error::Validation(format!(
                            "{site} setting {s} outcome {o}: element is {}x{}, expected {dim}x{dim}",
                            el.rows, el.cols
                        )));
                    }
                    let asym = el.max_asymmetry();
                    if asym > 1e-9 {
                        return Err(Error::Validation(format!(
                            "{site} setting {s} outcome {o}: not Hermitian, asymmetry {asym:.3e}"
                        )));
                    }
                    let min_eig = el.min_eigenvalue()?;
                    if min_eig < -1e-10 {
                        return Err(Error::Validation(format!(
                            "{site} setting {s} outcome {o}: negative eigenvalue {min_eig:.3e}"
                        )));
                    }
                    sum = sum.add(el);
                }
                let comp = sum.max_abs_diff(&Matrix::identity(dim));
                if comp > 1e-9 {
                    return Err(Error::Validation(format!(
                        "{site} setting {s}: completeness residual {comp:.3e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Bob's marginal over b2: M_{b1|y} = sum_b2 M_{b1,b2|y}.
    pub fn bob_marginal_b1(&self, y: usize, b1: usize) -> Matrix {
        let mut m = self.bob[y][3 * b1].clone();
        for b2 in 1..3 {
            m = m.add(&self.bob[y][3 * b1 + b2]);
        }
        m
    }

    /// Bob's marginal over b1: M_{b2|y} = sum_b1 M_{b1,b2|y}.
    pub fn bob_marginal_b2(&self, y: usize, b2: usize) -> Matrix {
        let mut m = self.bob[y][b2].clone();
        for b1 in 1..3 {
            m = m.add(&self.bob[y][3 * b1 + b2]);
        }
        m
    }

    /// FNV-1a digest of the serialized form, for report headers.
    pub fn digest(&self) -> String {
        let doc = serialize_realization(self);
        let bytes = serde_json::to_vec(&doc).expect("serialization cannot fail");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

/// Full correlation tensor of a realization (optimized contraction path:
/// measurement operators applied factor-wise to the joint state vector).
pub fn correlations(r: &Realization) -> Result<CorrelationTensor> {
    let (da, db1, db2, dc) = r.dims;
    let dims = [da, db1, db2, dc];
    let psi = r.joint_state();
    for (s, fam) in r.alice.iter().enumerate() {
        if fam.iter().any(|m| m.rows != da) {
            return Err(Error::Usage(format!("alice setting {s}: dimension mismatch with state")));
        }
    }
    for (s, fam) in r.bob.iter().enumerate() {
        if fam.iter().any(|m| m.rows != db1 * db2) {
            return Err(Error::Usage(format!("bob setting {s}: dimension mismatch with state")));
        }
    }
    for (s, fam) in r.charlie.iter().enumerate() {
        if fam.iter().any(|m| m.rows != dc) {
            return Err(Error::Usage(format!("charlie setting {s}: dimension mismatch with state")));
        }
    }

    // cache (M_{a|x} on A)(M_{c|z} on C)|psi> for the 81 side-party combos
    let mut side: Vec<Ket> = Vec::with_capacity(81);
    for x in 0..N_X {
        for a in 0..3 {
            let va = apply_on_factors(&psi, &dims, 0, 1, &r.alice[x][a]);
            for z in 0..N_Z {
                for c in 0..3 {
                    side.push(apply_on_factors(&va, &dims, 3, 1, &r.charlie[z][c]));
                }
            }
        }
    }
    let mut values = vec![0.0; CorrelationTensor::LEN];
    for y in 0..N_Y {
        for (b, el) in r.bob[y].iter().enumerate() {
            let wb = apply_on_factors(&psi, &dims, 1, 2, el);
            let (b1, b2) = (b / 3, b % 3);
            for x in 0..N_X {
                for a in 0..3 {
                    for z in 0..N_Z {
                        for c in 0..3 {
                            let v = &side[((x * 3 + a) * N_Z + z) * 3 + c];
                            // Bob's element is Hermitian, so <psi|A B C|psi> = <B psi|(A C)psi>
                            let p = inner(&wb, v)?;
                            if p.im.abs() > 1e-10 {
                                return Err(Error::Validation(format!(
                                    "complex probability at (x={x},y={y},z={z},a={a},b1={b1},b2={b2},c={c}): im {:.3e}",
                                    p.im
                                )));
                            }
                            values[CorrelationTensor::index(x, y, z, a, b1, b2, c)] = p.re;
                        }
                    }
                }
            }
        }
    }
    Ok(CorrelationTensor { values })
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

type JsonMatrix = Vec<[f64; 2]>;

#[derive(Serialize, Deserialize)]
pub struct RealizationDoc {
    pub dims: [usize; 4],
    pub state_ab1: JsonMatrix,
    pub state_b2c: JsonMatrix,
    pub alice: Vec<Vec<JsonMatrix>>,
    pub bob: Vec<Vec<JsonMatrix>>,
    pub charlie: Vec<Vec<JsonMatrix>>,
}

fn matrix_to_json(m: &Matrix) -> JsonMatrix {
    m.data.iter().map(|c| [c.re, c.im]).collect()
}

fn ket_to_json(k: &Ket) -> JsonMatrix {
    k.data.iter().map(|c| [c.re, c.im]).collect()
}

fn matrix_from_json(j: &JsonMatrix, dim: usize, path: &str) -> Result<Matrix> {
    if j.len() != dim * dim {
        return Err(Error::Parse(format!(
            "{path}: expected {} entries for a {dim}x{dim} matrix, got {}",
            dim * dim,
            j.len()
        )));
    }
    let data: Vec<C64> = j.iter().map(|&[re, im]| C64::new(re, im)).collect();
    if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::Parse(format!("{path}: non-finite entry")));
    }
    Ok(Matrix { rows: dim, cols: dim, data })
}

pub fn serialize_realization(r: &Realization) -> RealizationDoc {
    RealizationDoc {
        dims: [r.dims.0, r.dims.1, r.dims.2, r.dims.3],
        state_ab1: ket_to_json(&r.state_ab1),
        state_b2c: ket_to_json(&r.state_b2c),
        alice: r.alice.iter().map(|f| f.iter().map(matrix_to_json).collect()).collect(),
        bob: r.bob.iter().map(|f| f.iter().map(matrix_to_json).collect()).collect(),
        charlie: r.charlie.iter().map(|f| f.iter().map(matrix_to_json).collect()).collect(),
    }
}

/// Parse and validate a realization document.
pub fn parse_realization(doc: &RealizationDoc) -> Result<Realization> {
    let [da, db1, db2, dc] = doc.dims;
    if da == 0 || db1 == 0 || db2 == 0 || dc == 0 {
        return Err(Error::Parse("dims: all dimensions must be positive".into()));
    }
    let ket_from = |j: &JsonMatrix, dim: usize, path: &str| -> Result<Ket> {
        if j.len() != dim {
            return Err(Error::Parse(format!(
                "{path}: expected {dim} amplitudes, got {}",
                j.len()
            )));
        }
        Ok(Ket { data: j.iter().map(|&[re, im]| C64::new(re, im)).collect() })
    };
    let fams_from = |site: &str, fams: &Vec<Vec<JsonMatrix>>, n_set: usize, n_out: usize, dim: usize| -> Result<Vec<Vec<Matrix>>> {
        if fams.len() != n_set {
            return Err(Error::Parse(format!("{site}: expected {n_set} settings, got {}", fams.len())));
        }
        fams.iter()
            .enumerate()
            .map(|(s, fam)| {
                if fam.len() != n_out {
                    return Err(Error::Parse(format!(
                        "{site}[{s}]: expected {n_out} outcomes, got {}",
                        fam.len()
                    )));
                }
                fam.iter()
                    .enumerate()
                    .map(|(o, m)| matrix_from_json(m, dim, &format!("{site}[{s}][{o}]")))
                    .collect()
            })
            .collect()
    };
    let r = Realization {
        dims: (da, db1, db2, dc),
        state_ab1: ket_from(&doc.state_ab1, da * db1, "state_ab1")?,
        state_b2c: ket_from(&doc.state_b2c, db2 * dc, "state_b2c")?,
        alice: fams_from("alice", &doc.alice, 3, 3, da)?,
        bob: fams_from("bob", &doc.bob, 5, 9, db1 * db2)?,
        charlie: fams_from("charlie", &doc.charlie, 3, 3, dc)?,
    };
    r.validate()?;
    Ok(r)
}

pub fn realization_from_json_str(s: &str) -> Result<Realization> {
    let doc: RealizationDoc =
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
    parse_realization(&doc)
}

pub fn realization_to_json_string(r: &Realization) -> String {
    serde_json::to_string(&serialize_realization(r)).expect("serialization cannot fail")
}

// ---------------------------------------------------------------------------
// randomized local equivalents
// ---------------------------------------------------------------------------

/// Reorder tensor factors of a ket: output factor i is input factor perm[i].
pub fn permute_factors(k: &Ket, dims: &[usize], perm: &[usize]) -> Ket {
    let total: usize = dims.iter().product();
    assert_eq!(k.dim(), total);
    assert_eq!(perm.len(), dims.len());
    let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let mut out = Ket::zeros(total);
    let n = dims.len();
    let mut in_parts = vec![0usize; n];
    for (idx, &amp) in k.data.iter().enumerate() {
        let mut rest = idx;
        for i in (0..n).rev() {
            in_parts[i] = rest % dims[i];
            rest /= dims[i];
        }
        let mut out_idx = 0;
        for (i, &p) in perm.iter().enumerate() {
            out_idx = out_idx * out_dims[i] + in_parts[p];
        }
        out.data[out_idx] = amp;
    }
    out
}

/// Haar-random unitary via QR of a complex Gaussian matrix, with the R
/// diagonal's phases folded into Q (standard unbiased construction).
pub fn haar_unitary(dim: usize, rng: &mut impl Rng) -> Matrix {
    // complex Gaussian entries from Box-Muller
    let mut g = Matrix::zeros(dim, dim);
    for e in g.data.iter_mut() {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        *e = C64::new(r * (2.0 * std::f64::consts::PI * u2).cos(), {
            let u3: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u4: f64 = rng.gen();
            (-2.0 * u3.ln()).sqrt() * (2.0 * std::f64::consts::PI * u4).cos()
        });
    }
    // Gram-Schmidt on columns; normalizing by the real residual norm is the
    // positive-diagonal-R convention that makes QR of a Ginibre matrix Haar.
    let mut q = Matrix::zeros(dim, dim);
    for col in 0..dim {
        let mut v: Vec<C64> = (0..dim).map(|r| g[(r, col)]).collect();
        for _pass in 0..2 {
            for prev in 0..col {
                let mut ov = C64::new(0.0, 0.0);
                for r in 0..dim {
                    ov += q[(r, prev)].conj() * v[r];
                }
                for r in 0..dim {
                    v[r] -= ov * q[(r, prev)];
                }
            }
        }
        let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for r in 0..dim {
            q[(r, col)] = v[r] / norm;
        }
    }
    q
}

/// Junk dimensions per site for [`randomized_equivalent`].
#[derive(Clone, Copy, Debug)]
pub struct JunkDims {
    pub a: usize,
    pub b1: usize,
    pub b2: usize,
    pub c: usize,
}

impl JunkDims {
    pub fn none() -> Self {
        JunkDims { a: 1, b1: 1, b2: 1, c: 1 }
    }

    pub fn uniform(j: usize) -> Self {
        JunkDims { a: j, b1: j, b2: j, c: j }
    }
}

/// Fixed junk pure state: a normalized real ramp (1, 2, ..., j).
fn junk_state(j: usize) -> Ket {
    let v: Vec<f64> = (1..=j).map(|i| i as f64).collect();
    Ket::from_real(&v).normalized()
}

/// A physically distinct realization with identical statistics: each site is
/// optionally enlarged by a junk factor and rotated by an independent
/// Haar-random unitary. Output correlations are verified to match the
/// reference within 1e-10 before returning.
pub fn randomized_equivalent(
    reference: &ReferenceExperiment,
    seed: u64,
    junk: JunkDims,
) -> Result<Realization> {
    assert!(junk.a >= 1 && junk.b1 >= 1 && junk.b2 >= 1 && junk.c >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = Realization::reference(reference);

    let (da, db1, db2, dc) = (3 * junk.a, 3 * junk.b1, 3 * junk.b2, 3 * junk.c);
    let u_a = haar_unitary(da, &mut rng);
    let u_b1 = haar_unitary(db1, &mut rng);
    let u_b2 = haar_unitary(db2, &mut rng);
    let u_c = haar_unitary(dc, &mut rng);

    // site operator: U (M (x) I_junk) U^dagger
    let embed = |m: &Matrix, j: usize, u: &Matrix| -> Matrix {
        u.mul(&tensor(m, &Matrix::identity(j))).mul(&u.adjoint())
    };
    // Bob's joint elements embed per factor before the joint rotation.
    let embed_bob = |m: &Matrix| -> Matrix {
        // reorder (B1, B2, jB1, jB2) -> (B1, jB1, B2, jB2) on the operator by
        // conjugating basis kets; cheaper to rebuild entrywise.
        let d_in = [3usize, 3, junk.b1, junk.b2];
        let full = tensor(&tensor(m, &Matrix::identity(junk.b1)), &Matrix::identity(junk.b2));
        // full is ordered (B1,B2,jB1,jB2); permute both row and column indices
        let perm = [0usize, 2, 1, 3]; // output order B1,jB1,B2,jB2
        let total = db1 * db2;
        let mut out = Matrix::zeros(total, total);
        let map_idx = |idx: usize| -> usize {
            let mut parts = [0usize; 4];
            let mut rest = idx;
            for i in (0..4).rev() {
                parts[i] = rest % d_in[i];
                rest /= d_in[i];
            }
            let out_dims = [3usize, junk.b1, 3, junk.b2];
            let mut o = 0;
            for (i, &p) in perm.iter().enumerate() {
                o = o * out_dims[i] + parts[p];
            }
            o
        };
        for r in 0..total {
            for c in 0..total {
                out[(map_idx(r), map_idx(c))] = full[(r, c)];
            }
        }
        let u = tensor(&u_b1, &u_b2);
        u.mul(&out).mul(&u.adjoint())
    };

    let embed_state = |st: &Ket, j_left: usize, j_right: usize, u_left: &Matrix, u_right: &Matrix| -> Ket {
        // (L, R, jL, jR) -> (L, jL, R, jR), then rotate
        let raw = tensor_ket(&tensor_ket(st, &junk_state(j_left)), &junk_state(j_right));
        let ordered = permute_factors(&raw, &[3, 3, j_left, j_right], &[0, 2, 1, 3]);
        let u = tensor(u_left, u_right);
        u.apply(&ordered)
    };

    let out = Realization {
        dims: (da, db1, db2, dc),
        state_ab1: embed_state(&base.state_ab1, junk.a, junk.b1, &u_a, &u_b1),
        state_b2c: embed_state(&base.state_b2c, junk.b2, junk.c, &u_b2, &u_c),
        alice: base
            .alice
            .iter()
            .map(|fam| fam.iter().map(|m| embed(m, junk.a, &u_a)).collect())
            .collect(),
        bob: base
            .bob
            .iter()
            .map(|fam| fam.iter().map(embed_bob).collect())
            .collect(),
        charlie: base
            .charlie
            .iter()
            .map(|fam| fam.iter().map(|m| embed(m, junk.c, &u_c)).collect())
            .collect(),
    };

    let d = tensor_distance(&correlations(&out)?, &correlations(&base)?)?;
    if d > 1e-10 {
        return Err(Error::Validation(format!(
            "randomized equivalent drifted from reference statistics by {d:.3e}"
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::assemble_reference;

    #[test]
    fn reference_table_entries() {
        let r = Realization::reference(&assemble_reference());
        r.validate().unwrap();
        let t = correlations(&r).unwrap();
        t.validate().unwrap();
        // p(1,0,0,1|0,diamond,0) = 1/9
        assert!((t.get(0, Y_DIAMOND, 0, 1, 0, 0, 1) - 1.0 / 9.0).abs() < 1e-12);
        // Table row (0,1): p(0,0,1,0|0,diamond,1) = 1/9
        assert!((t.get(0, Y_DIAMOND, 1, 0, 0, 1, 0) - 1.0 / 9.0).abs() < 1e-12);
        // marginal p(a=0,b1=0|x=0,y=0) = (2+sqrt(2))/12
        let m = t.marginalize(&[OutcomeVar::A, OutcomeVar::B1], 0, 0, 0).unwrap();
        assert!((m[0] - (2.0 + 2f64.sqrt()) / 12.0).abs() < 1e-12);
    }

    #[test]
    fn reference_marginals_uniform() {
        let t = correlations(&Realization::reference(&assemble_reference())).unwrap();
        let mb = t.marginalize(&[OutcomeVar::B1, OutcomeVar::B2], 0, Y_DIAMOND, 0).unwrap();
        for v in &mb {
            assert!((v - 1.0 / 9.0).abs() < 1e-12);
        }
        for x in 0..3 {
            for z in 0..3 {
                let mac = t.marginalize(&[OutcomeVar::A, OutcomeVar::C], x, 0, z).unwrap();
                for v in &mac {
                    assert!((v - 1.0 / 9.0).abs() < 1e-12);
                }
                let ma = t.marginalize(&[OutcomeVar::A], x, 0, z).unwrap();
                for v in &ma {
                    assert!((v - 1.0 / 3.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn no_signaling() {
        let t = correlations(&Realization::reference(&assemble_reference())).unwrap();
        // Alice's marginal must not depend on y or z
        for x in 0..3 {
            let base = t.marginalize(&[OutcomeVar::A], x, 0, 0).unwrap();
            for y in 0..N_Y {
                for z in 0..N_Z {
                    let m = t.marginalize(&[OutcomeVar::A], x, y, z).unwrap();
                    for (u, v) in base.iter().zip(&m) {
                        assert!((u - v).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn round_trip_serialization() {
        let r = Realization::reference(&assemble_reference());
        let s = realization_to_json_string(&r);
        let back = realization_from_json_str(&s).unwrap();
        assert!(back.state_ab1.sub(&r.state_ab1).norm() < 1e-15);
        let d = tensor_distance(&correlations(&back).unwrap(), &correlations(&r).unwrap()).unwrap();
        assert!(d < 1e-15);
    }

    #[test]
    fn validation_rejects_incomplete_povm() {
        let mut r = Realization::reference(&assemble_reference());
        for el in r.alice[0].iter_mut() {
            *el = el.scale(C64::new(0.9, 0.0));
        }
        match r.validate() {
            Err(Error::Validation(msg)) => {
                assert!(msg.contains("completeness"), "got: {msg}");
                assert!(msg.contains("1.000e-1"), "residual should be 0.1: {msg}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn validation_rejects_negative_element() {
        let mut r = Realization::reference(&assemble_reference());
        // shift weight between two elements to create a negative eigenvalue
        let delta = r.alice[0][1].scale(C64::new(0.05, 0.0));
        r.alice[0][0] = r.alice[0][0].sub(&delta);
        r.alice[0][1] = r.alice[0][1].add(&delta);
        match r.validate() {
            Err(Error::Validation(msg)) => assert!(msg.contains("negative eigenvalue"), "got: {msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn rotated_equivalent_matches_reference() {
        let reference = assemble_reference();
        let base = Realization::reference(&reference);
        let tref = correlations(&base).unwrap();
        let r1 = randomized_equivalent(&reference, 11, JunkDims::none()).unwrap();
        r1.validate().unwrap();
        assert!(tensor_distance(&correlations(&r1).unwrap(), &tref).unwrap() < 1e-10);

        let r2 = randomized_equivalent(
            &reference,
            12,
            JunkDims { a: 2, b1: 1, b2: 1, c: 1 },
        )
        .unwrap();
        r2.validate().unwrap();
        assert!(tensor_distance(&correlations(&r2).unwrap(), &tref).unwrap() < 1e-10);
    }

    #[test]
    fn tensor_distance_cases() {
        let t = correlations(&Realization::reference(&assemble_reference())).unwrap();
        assert_eq!(t.distance(&t).unwrap(), 0.0);
        let mut t2 = t.clone();
        t2.values[5] += 0.01;
        assert!((t.distance(&t2).unwrap() - 0.01).abs() < 1e-15);
    }
}
