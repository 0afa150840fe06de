//! Independent brute-force contraction path for cross-checking the optimized
//! correlation computation. Builds the full joint operator by Kronecker
//! products and contracts with explicit index loops. Slow on purpose; used by
//! tests and the acceptance suite only.

use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::linalg::{tensor, Matrix};
use crate::realization::{CorrelationTensor, Realization, N_X, N_Y, N_Z};

/// Correlation tensor via full Kronecker products and elementwise loops.
pub fn correlations_bruteforce(r: &Realization) -> Result<CorrelationTensor> {
    let psi = r.joint_state();
    let n = psi.dim();
    let mut values = vec![0.0; CorrelationTensor::LEN];
    for x in 0..N_X {
        for y in 0..N_Y {
            for z in 0..N_Z {
                for a in 0..3 {
                    for (b, bob_el) in r.bob[y].iter().enumerate() {
                        for c in 0..3 {
                            let joint: Matrix =
                                tensor(&tensor(&r.alice[x][a], bob_el), &r.charlie[z][c]);
                            let mut acc = C64::new(0.0, 0.0);
                            for i in 0..n {
                                for j in 0..n {
                                    acc += psi.data[i].conj() * joint[(i, j)] * psi.data[j];
                                }
                            }
                            values[CorrelationTensor::index(x, y, z, a, b / 3, b % 3, c)] = acc.re;
                        }
                    }
                }
            }
        }
    }
    Ok(CorrelationTensor { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::realization::{correlations, randomized_equivalent, tensor_distance, JunkDims};
    use crate::reference::assemble_reference;

    #[test]
    fn bruteforce_agrees_with_optimized_path() {
        let reference = assemble_reference();
        // all-dims-3 random realizations via rotated equivalents
        for seed in [3u64, 17, 101] {
            let r = randomized_equivalent(&reference, seed, JunkDims::none()).unwrap();
            let fast = correlations(&r).unwrap();
            let slow = correlations_bruteforce(&r).unwrap();
            assert!(tensor_distance(&fast, &slow).unwrap() < 1e-12);
        }
    }
}
