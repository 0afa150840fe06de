//! Dense complex linear algebra over small tensor-product spaces.
//!
//! Everything here is double precision and dimension-generic, but tuned for
//! the sizes this crate actually uses (up to a few hundred). The tensor
//! convention is fixed globally: the left factor is the slow (most
//! significant) index, row-major storage throughout.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Threshold below which an eigenvalue counts as zero during regularization.
pub const ZERO_EIG_THRESHOLD: f64 = 1e-9;

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

/// Complex state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    pub data: Vec<C64>,
}

impl serde::Serialize for Matrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let pairs: Vec<[f64; 2]> = self.data.iter().map(|c| [c.re, c.im]).collect();
        let mut st = s.serialize_struct("Matrix", 3)?;
        st.serialize_field("rows", &self.rows)?;
        st.serialize_field("cols", &self.cols)?;
        st.serialize_field("data", &pairs)?;
        st.end()
    }
}

impl serde::Serialize for Ket {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.data.iter().map(|c| [c.re, c.im]).collect();
        pairs.serialize(s)
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Build from real entries, row-major.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), rows * cols);
        Matrix {
            rows,
            cols,
            data: entries.iter().map(|&x| C64::new(x, 0.0)).collect(),
        }
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn adjoint(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    /// Largest |m - m†| entry.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &Ket) -> Ket {
        assert_eq!(self.cols, v.dim());
        let mut out = vec![C64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..self.cols {
                acc += self[(i, j)] * v.data[j];
            }
            out[i] = acc;
        }
        Ket { data: out }
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of a Hermitian matrix (positivity checks).
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (vals, _) = hermitian_eig(self)?;
        Ok(vals.last().copied().unwrap_or(0.0))
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Ket {
    pub fn zeros(dim: usize) -> Self {
        Ket { data: vec![C64::new(0.0, 0.0); dim] }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    /// Computational basis vector |i> in dimension `dim`.
    pub fn basis(dim: usize, i: usize) -> Self {
        assert!(i < dim);
        let mut k = Ket::zeros(dim);
        k.data[i] = C64::new(1.0, 0.0);
        k
    }

    pub fn from_real(entries: &[f64]) -> Self {
        Ket { data: entries.iter().map(|&x| C64::new(x, 0.0)).collect() }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Ket {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize zero vector");
        self.scale(C64::new(1.0 / n, 0.0))
    }

    pub fn scale(&self, s: C64) -> Ket {
        Ket { data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn add(&self, other: &Ket) -> Ket {
        assert_eq!(self.dim(), other.dim());
        Ket { data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Ket) -> Ket {
        assert_eq!(self.dim(), other.dim());
        Ket { data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect() }
    }

    /// |v><v| as a matrix.
    pub fn projector(&self) -> Matrix {
        let n = self.dim();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.data[i] * self.data[j].conj();
            }
        }
        m
    }
}

/// Kronecker product of two matrices, left factor slow.
pub fn tensor(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows * b.rows, a.cols * b.cols);
    for ai in 0..a.rows {
        for aj in 0..a.cols {
            let f = a[(ai, aj)];
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for bi in 0..b.rows {
                for bj in 0..b.cols {
                    out[(ai * b.rows + bi, aj * b.cols + bj)] = f * b[(bi, bj)];
                }
            }
        }
    }
    out
}

/// Kronecker product of two kets, left factor slow.
pub fn tensor_ket(a: &Ket, b: &Ket) -> Ket {
    let mut out = Ket::zeros(a.dim() * b.dim());
    for i in 0..a.dim() {
        for j in 0..b.dim() {
            out.data[i * b.dim() + j] = a.data[i] * b.data[j];
        }
    }
    out
}

/// Conjugate-linear in the first argument: <u|v>.
pub fn inner(u: &Ket, v: &Ket) -> Result<C64> {
    if u.dim() != v.dim() {
        return Err(Error::Usage(format!(
            "inner product dimension mismatch: {} vs {}",
            u.dim(),
            v.dim()
        )));
    }
    Ok(u.data.iter().zip(&v.data).map(|(a, b)| a.conj() * b).sum())
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues in descending order with matching orthonormal
/// eigenvectors. Fails if the input deviates from Hermitian by more than
/// 1e-10 in any entry.
pub fn hermitian_eig(m: &Matrix) -> Result<(Vec<f64>, Vec<Ket>)> {
    if !m.is_square() {
        return Err(Error::Usage(format!("eig of non-square {}x{} matrix", m.rows, m.cols)));
    }
    let asym = m.max_asymmetry();
    if asym > 1e-10 {
        return Err(Error::Domain(format!(
            "matrix not Hermitian: max asymmetry {asym:.3e}"
        )));
    }
    let n = m.rows;
    // Symmetrize exactly before diagonalizing.
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
        }
    }
    // Cyclic complex Jacobi: rotate away off-diagonal entries until
    // convergence. Quadratically convergent; plenty for the sizes used here.
    let scale = a.data.iter().map(|c| c.norm()).fold(0.0f64, f64::max).max(1.0);
    let tol = 1e-15 * scale;
    let mut q = Matrix::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for r in (p + 1)..n {
                off = off.max(a[(p, r)].norm());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = a[(p, r)];
                if apr.norm() <= tol * 1e-2 {
                    continue;
                }
                let app = a[(p, p)].re;
                let arr = a[(r, r)].re;
                let phase = apr / apr.norm();
                let tau = (arr - app) / (2.0 * apr.norm());
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let se = phase * s; // s * e^{i phi}
                // columns: A <- A R with R[p,p]=R[r,r]=c, R[p,r]=se, R[r,p]=-conj(se)
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akr = a[(k, r)];
                    a[(k, p)] = akp * c - akr * se.conj();
                    a[(k, r)] = akp * se + akr * c;
                }
                // rows: A <- R^dagger A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let ark = a[(r, k)];
                    a[(p, k)] = apk * c - ark * se;
                    a[(r, k)] = apk * se.conj() + ark * c;
                }
                // accumulate eigenvectors: Q <- Q R
                for k in 0..n {
                    let qkp = q[(k, p)];
                    let qkr = q[(k, r)];
                    q[(k, p)] = qkp * c - qkr * se.conj();
                    q[(k, r)] = qkp * se + qkr * c;
                }
                a[(p, r)] = C64::new(0.0, 0.0);
                a[(r, p)] = C64::new(0.0, 0.0);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.partial_cmp(&a[(i, i)].re).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors: Vec<Ket> = order
        .iter()
        .map(|&i| Ket { data: (0..n).map(|k| q[(k, i)]).collect() })
        .collect();
    Ok((values, vectors))
}

/// Replace each eigenvalue by its sign, mapping (near-)zero eigenvalues
/// to +1, so the result is a Hermitian unitary.
pub fn regularize_to_unitary(m: &Matrix) -> Result<Matrix> {
    let (vals, vecs) = hermitian_eig(m)?;
    let n = m.rows;
    let mut out = Matrix::zeros(n, n);
    for (lambda, v) in vals.iter().zip(&vecs) {
        let s = if lambda.abs() < ZERO_EIG_THRESHOLD {
            1.0
        } else {
            lambda.signum()
        };
        out = out.add(&v.projector().scale(C64::new(s, 0.0)));
    }
    Ok(out)
}

/// Sign function of a Hermitian matrix with zero eigenvalues dropped:
/// sum of sign(lambda)|v><v| over |lambda| >= threshold. Also returns the
/// projector onto the kept (non-null) eigenspace.
pub fn matrix_sign(m: &Matrix) -> Result<(Matrix, Matrix)> {
    let (vals, vecs) = hermitian_eig(m)?;
    let n = m.rows;
    let mut sign = Matrix::zeros(n, n);
    let mut support = Matrix::zeros(n, n);
    for (lambda, v) in vals.iter().zip(&vecs) {
        if lambda.abs() < ZERO_EIG_THRESHOLD {
            continue;
        }
        let p = v.projector();
        sign = sign.add(&p.scale(C64::new(lambda.signum(), 0.0)));
        support = support.add(&p);
    }
    Ok((sign, support))
}

/// Regularize a Hermitian operator to a "unitary on a subspace": eigenvalues
/// become their sign, zero eigenvalues inside the range of `block` become +1,
/// and everything outside `block` stays zero. Requires range(m) within
/// range(block) (then m commutes with block). The result squares to `block`.
pub fn regularize_on_block(m: &Matrix, block: &Matrix) -> Result<Matrix> {
    let (sign, support) = matrix_sign(m)?;
    // block - support is the zero-eigenvalue part inside the block
    Ok(sign.add(&block.sub(&support)))
}

/// Projector onto the union of ranges of the given Hermitian operators.
pub fn range_projector(ops: &[&Matrix]) -> Result<Matrix> {
    assert!(!ops.is_empty());
    let n = ops[0].rows;
    let mut gram = Matrix::zeros(n, n);
    for op in ops {
        gram = gram.add(&op.mul(op));
    }
    let (vals, vecs) = hermitian_eig(&gram)?;
    let mut proj = Matrix::zeros(n, n);
    for (lambda, v) in vals.iter().zip(&vecs) {
        if *lambda >= ZERO_EIG_THRESHOLD {
            proj = proj.add(&v.projector());
        }
    }
    Ok(proj)
}

/// Partial trace over the factors not in `keep`. `dims` lists the factor
/// dimensions left-to-right; `keep` are factor indices to retain (in their
/// original order).
pub fn partial_trace(m: &Matrix, dims: &[usize], keep: &[usize]) -> Result<Matrix> {
    let total: usize = dims.iter().product();
    if !m.is_square() || m.rows != total {
        return Err(Error::Usage(format!(
            "partial_trace: dims product {} does not match matrix dimension {}",
            total, m.rows
        )));
    }
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::Usage("partial_trace: keep index out of range".into()));
    }
    let kept_dim: usize = keep.iter().map(|&k| dims[k]).product();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let traced_dim: usize = traced.iter().map(|&k| dims[k]).product();

    // Decompose a flat index into per-factor indices.
    let split = |mut idx: usize| -> Vec<usize> {
        let mut parts = vec![0usize; dims.len()];
        for i in (0..dims.len()).rev() {
            parts[i] = idx % dims[i];
            idx /= dims[i];
        }
        parts
    };
    let join = |parts: &[usize], which: &[usize]| -> usize {
        which.iter().fold(0usize, |acc, &w| acc * dims[w] + parts[w])
    };

    let mut out = Matrix::zeros(kept_dim, kept_dim);
    for r in 0..total {
        let rp = split(r);
        for c in 0..total {
            let cp = split(c);
            // off-diagonal in a traced factor contributes nothing
            if traced.iter().any(|&t| rp[t] != cp[t]) {
                continue;
            }
            out[(join(&rp, keep), join(&cp, keep))] += m[(r, c)];
        }
    }
    let _ = traced_dim;
    Ok(out)
}

/// Apply `op` to the contiguous factor group `start..start+count` of a state
/// on the tensor-product space with factor dimensions `dims`.
pub fn apply_on_factors(
    state: &Ket,
    dims: &[usize],
    start: usize,
    count: usize,
    op: &Matrix,
) -> Ket {
    let total: usize = dims.iter().product();
    assert_eq!(state.dim(), total);
    let mid: usize = dims[start..start + count].iter().product();
    assert_eq!(op.rows, mid);
    assert_eq!(op.cols, mid);
    let left: usize = dims[..start].iter().product();
    let right: usize = dims[start + count..].iter().product();

    let mut out = Ket::zeros(total);
    for l in 0..left {
        for r in 0..right {
            for i in 0..mid {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..mid {
                    let x = state.data[(l * mid + j) * right + r];
                    if x != C64::new(0.0, 0.0) {
                        acc += op[(i, j)] * x;
                    }
                }
                out.data[(l * mid + i) * right + r] = acc;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma_z() -> Matrix {
        Matrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])
    }

    fn sigma_x() -> Matrix {
        Matrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])
    }

    #[test]
    fn tensor_identities() {
        let i2 = Matrix::identity(2);
        let i3 = Matrix::identity(3);
        assert_eq!(tensor(&i2, &i3), Matrix::identity(6));

        let v = tensor_ket(&Ket::basis(2, 0), &Ket::basis(2, 1));
        assert_eq!(v, Ket::from_real(&[0.0, 1.0, 0.0, 0.0]));

        let zz = tensor(&sigma_z(), &sigma_z());
        assert_eq!(zz[(1, 1)], C64::new(-1.0, 0.0));
    }

    #[test]
    fn tensor_associative() {
        let a = Matrix::from_real(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = sigma_x();
        let c = Matrix::from_real(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 2.0, 5.0]);
        let lhs = tensor(&tensor(&a, &b), &c);
        let rhs = tensor(&a, &tensor(&b, &c));
        assert!(lhs.max_abs_diff(&rhs) == 0.0);
    }

    #[test]
    fn eig_sigma_z() {
        let (vals, vecs) = hermitian_eig(&sigma_z()).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] + 1.0).abs() < 1e-12);
        assert!((vecs[0].data[0].norm() - 1.0).abs() < 1e-12);
        assert!((vecs[1].data[1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_hadamard_like() {
        // (sz + sx)/sqrt(2): +1 eigenvector (cos pi/8, sin pi/8)
        let h = sigma_z().add(&sigma_x()).scale(C64::new(1.0 / 2f64.sqrt(), 0.0));
        let (vals, vecs) = hermitian_eig(&h).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] + 1.0).abs() < 1e-12);
        let c = (std::f64::consts::PI / 8.0).cos();
        let s = (std::f64::consts::PI / 8.0).sin();
        let target = Ket::from_real(&[c, s]);
        let ov = inner(&target, &vecs[0]).unwrap().norm();
        assert!((ov - 1.0).abs() < 1e-10);
        // residual ||Mv - lambda v||
        let r = h.apply(&vecs[0]).sub(&vecs[0].scale(C64::new(vals[0], 0.0)));
        assert!(r.norm() < 1e-9);
    }

    #[test]
    fn eig_zero_matrix() {
        let z = Matrix::zeros(3, 3);
        let (vals, vecs) = hermitian_eig(&z).unwrap();
        assert!(vals.iter().all(|v| v.abs() < 1e-12));
        for i in 0..3 {
            for j in 0..3 {
                let ov = inner(&vecs[i], &vecs[j]).unwrap().norm();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ov - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = Matrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        match hermitian_eig(&m) {
            Err(Error::Domain(msg)) => assert!(msg.contains("1.000e0") || msg.contains("asymmetry")),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn regularize_examples() {
        let z = sigma_z();
        assert!(regularize_to_unitary(&z).unwrap().max_abs_diff(&z) < 1e-12);

        let d = Matrix::from_real(3, 3, &[2.0, 0.0, 0.0, 0.0, -0.5, 0.0, 0.0, 0.0, 0.0]);
        let expect = Matrix::from_real(3, 3, &[1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(regularize_to_unitary(&d).unwrap().max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn regularize_squares_to_identity() {
        let m = Matrix::from_real(3, 3, &[1.5, 0.3, 0.0, 0.3, -0.7, 0.1, 0.0, 0.1, 0.0]);
        let u = regularize_to_unitary(&m).unwrap();
        assert!(u.mul(&u).max_abs_diff(&Matrix::identity(3)) < 1e-9);
        assert!(u.max_asymmetry() < 1e-9);
    }

    #[test]
    fn partial_trace_maximally_entangled() {
        let phi = crate::reference::max_entangled(3).unwrap();
        let rho = phi.projector();
        let red = partial_trace(&rho, &[3, 3], &[0]).unwrap();
        let expect = Matrix::identity(3).scale(C64::new(1.0 / 3.0, 0.0));
        assert!(red.max_abs_diff(&expect) < 1e-12);
        // trace preserving
        assert!((red.trace() - rho.trace()).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_keep_all_and_product() {
        let m = Matrix::from_real(2, 2, &[0.25, 0.1, 0.1, 0.75]);
        let full = partial_trace(&m, &[2], &[0]).unwrap();
        assert!(full.max_abs_diff(&m) == 0.0);

        let joint = tensor(&Ket::basis(2, 0).projector(), &m);
        let red = partial_trace(&joint, &[2, 2], &[1]).unwrap();
        assert!(red.max_abs_diff(&m) < 1e-14);
    }

    #[test]
    fn partial_trace_dims_mismatch() {
        let m = Matrix::identity(5);
        assert!(matches!(partial_trace(&m, &[2, 3], &[0]), Err(Error::Usage(_))));
    }

    #[test]
    fn inner_basics() {
        let e0 = Ket::basis(2, 0);
        let e1 = Ket::basis(2, 1);
        assert_eq!(inner(&e0, &e0).unwrap(), C64::new(1.0, 0.0));
        assert_eq!(inner(&e0, &e1).unwrap(), C64::new(0.0, 0.0));
        assert!(matches!(inner(&e0, &Ket::basis(3, 0)), Err(Error::Usage(_))));
    }

    #[test]
    fn apply_on_factors_matches_full_kron() {
        let op = sigma_x();
        let dims = [2usize, 2, 3];
        let mut v = Ket::zeros(12);
        for (i, x) in v.data.iter_mut().enumerate() {
            *x = C64::new(i as f64 * 0.1, (i % 3) as f64 * 0.05);
        }
        let full = tensor(&tensor(&Matrix::identity(2), &op), &Matrix::identity(3));
        let expect = full.apply(&v);
        let got = apply_on_factors(&v, &dims, 1, 1, &op);
        assert!(expect.sub(&got).norm() < 1e-14);
    }
}
