//! The ideal bilocality experiment: maximally entangled qutrit pairs, the
//! side parties' three ternary measurements, Bob's four product measurements
//! and the domino measurement.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{tensor, Ket, Matrix};

/// A projective measurement: outcome-labeled projectors summing to identity.
#[derive(Clone, Debug)]
pub struct ProjectiveMeasurement {
    pub setting: String,
    /// (outcome label, projector), outcomes in increasing label order.
    pub elements: Vec<(usize, Matrix)>,
}

impl ProjectiveMeasurement {
    /// Check idempotence, Hermiticity, pairwise orthogonality and
    /// completeness; returns the worst residual found.
    pub fn validate(&self, tol: f64) -> Result<f64> {
        let dim = self.elements[0].1.rows;
        let mut worst = 0.0f64;
        let mut sum = Matrix::zeros(dim, dim);
        for (label, p) in &self.elements {
            let herm = p.max_asymmetry();
            let idem = p.mul(p).max_abs_diff(p);
            worst = worst.max(herm).max(idem);
            if herm > tol || idem > tol {
                return Err(Error::Validation(format!(
                    "measurement {} outcome {label}: not a projector (hermiticity {herm:.3e}, idempotence {idem:.3e})",
                    self.setting
                )));
            }
            sum = sum.add(p);
        }
        for (i, (li, pi)) in self.elements.iter().enumerate() {
            for (lj, pj) in self.elements.iter().skip(i + 1) {
                let ortho = pi.mul(pj).max_abs_diff(&Matrix::zeros(dim, dim));
                worst = worst.max(ortho);
                if ortho > tol {
                    return Err(Error::Validation(format!(
                        "measurement {}: outcomes {li},{lj} not orthogonal ({ortho:.3e})",
                        self.setting
                    )));
                }
            }
        }
        let comp = sum.max_abs_diff(&Matrix::identity(dim));
        worst = worst.max(comp);
        if comp > tol {
            return Err(Error::Validation(format!(
                "measurement {}: completeness residual {comp:.3e}",
                self.setting
            )));
        }
        Ok(worst)
    }
}

/// The nine-outcome domino measurement on two qutrits, with the product
/// factor kets recorded per outcome.
#[derive(Clone, Debug)]
pub struct DominoMeasurement {
    /// (b1, b2, ket on B1, ket on B2, joint projector on the 9-dim space)
    pub entries: Vec<(usize, usize, Ket, Ket, Matrix)>,
}

/// Everything the reference experiment consists of.
#[derive(Clone, Debug)]
pub struct ReferenceExperiment {
    pub state_ab1: Ket,
    pub state_b2c: Ket,
    pub alice: Vec<ProjectiveMeasurement>,
    pub charlie: Vec<ProjectiveMeasurement>,
    /// y = 0..3, nine joint outcomes each (index 3*b1 + b2).
    pub bob_product: Vec<ProjectiveMeasurement>,
    pub bob_domino: DominoMeasurement,
}

/// (|j> + sign*|k>)/sqrt(2) in dimension 3.
fn pm_ket(j: usize, k: usize, sign: f64) -> Ket {
    let mut v = [0.0f64; 3];
    v[j] = 1.0 / 2f64.sqrt();
    v[k] = sign / 2f64.sqrt();
    Ket::from_real(&v)
}

/// Maximally entangled state of two d-dimensional systems.
pub fn max_entangled(d: usize) -> Result<Ket> {
    if d < 2 {
        return Err(Error::Usage(format!("max_entangled requires d >= 2, got {d}")));
    }
    let mut k = Ket::zeros(d * d);
    let amp = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    for i in 0..d {
        k.data[i * d + i] = amp;
    }
    Ok(k)
}

/// Alice's (and Charlie's) three ternary measurements.
pub fn alice_charlie_measurements() -> Vec<ProjectiveMeasurement> {
    let e = |i| Ket::basis(3, i);
    let fam0 = vec![e(0).projector(), e(1).projector(), e(2).projector()];
    let fam1 = vec![
        pm_ket(0, 1, 1.0).projector(),
        pm_ket(0, 1, -1.0).projector(),
        e(2).projector(),
    ];
    let fam2 = vec![
        e(0).projector(),
        pm_ket(1, 2, 1.0).projector(),
        pm_ket(1, 2, -1.0).projector(),
    ];
    [fam0, fam1, fam2]
        .into_iter()
        .enumerate()
        .map(|(x, projs)| ProjectiveMeasurement {
            setting: format!("x={x}"),
            elements: projs.into_iter().enumerate().collect(),
        })
        .collect()
}

/// The analytic +/-1 block eigenvectors of (sz + sign*sx)/sqrt(2) embedded on
/// qutrit levels (j,k). For sign=+1 the +1 eigenvector is cos(pi/8)|j> +
/// sin(pi/8)|k>; flipping the sign mirrors the second amplitude.
fn block_eigvecs(j: usize, k: usize, sign: f64) -> (Ket, Ket) {
    let c = (std::f64::consts::PI / 8.0).cos();
    let s = (std::f64::consts::PI / 8.0).sin();
    let mut plus = [0.0f64; 3];
    let mut minus = [0.0f64; 3];
    plus[j] = c;
    plus[k] = sign * s;
    minus[j] = -sign * s;
    minus[k] = c;
    (Ket::from_real(&plus), Ket::from_real(&minus))
}

/// Bob's four single-system ternary families underlying the product
/// measurements. Outcome labels follow the appendix operator definitions:
/// for y=0,1 the differences of outcomes 0 and 1 give (Z' +/- X')/sqrt(2) on
/// the {0,1} block and outcome 2 is pinned to |2>; for y=2,3 the differences
/// of outcomes 1 and 2 give the {1,2}-block operators and outcome 0 is
/// pinned to |0>.
pub fn bob_single_system_families() -> Vec<ProjectiveMeasurement> {
    let mut out = Vec::new();
    for (y, sign) in [(0usize, 1.0f64), (1, -1.0)] {
        let (plus, minus) = block_eigvecs(0, 1, sign);
        out.push(ProjectiveMeasurement {
            setting: format!("y={y}"),
            elements: vec![
                (0, plus.projector()),
                (1, minus.projector()),
                (2, Ket::basis(3, 2).projector()),
            ],
        });
    }
    for (y, sign) in [(2usize, 1.0f64), (3, -1.0)] {
        let (plus, minus) = block_eigvecs(1, 2, sign);
        out.push(ProjectiveMeasurement {
            setting: format!("y={y}"),
            elements: vec![
                (0, Ket::basis(3, 0).projector()),
                (1, plus.projector()),
                (2, minus.projector()),
            ],
        });
    }
    out
}

/// Bob's four product measurements on B1 x B2, joint outcome (b1,b2).
pub fn bob_product_measurements() -> Vec<ProjectiveMeasurement> {
    bob_single_system_families()
        .into_iter()
        .map(|fam| {
            let mut elements = Vec::with_capacity(9);
            for (b1, p1) in &fam.elements {
                for (b2, p2) in &fam.elements {
                    elements.push((3 * b1 + b2, tensor(p1, p2)));
                }
            }
            elements.sort_by_key(|(l, _)| *l);
            ProjectiveMeasurement { setting: fam.setting, elements }
        })
        .collect()
}

/// The nine-outcome domino measurement.
pub fn domino_measurement() -> DominoMeasurement {
    let e = |i| Ket::basis(3, i);
    let table: Vec<(usize, usize, Ket, Ket)> = vec![
        (0, 0, e(1), e(1)),
        (0, 1, e(0), pm_ket(0, 1, 1.0)),
        (0, 2, e(0), pm_ket(0, 1, -1.0)),
        (1, 0, e(2), pm_ket(1, 2, 1.0)),
        (1, 1, e(2), pm_ket(1, 2, -1.0)),
        (1, 2, pm_ket(1, 2, 1.0), e(0)),
        (2, 0, pm_ket(1, 2, -1.0), e(0)),
        (2, 1, pm_ket(0, 1, 1.0), e(2)),
        (2, 2, pm_ket(0, 1, -1.0), e(2)),
    ];
    DominoMeasurement {
        entries: table
            .into_iter()
            .map(|(b1, b2, psi, phi)| {
                let proj = tensor(&psi.projector(), &phi.projector());
                (b1, b2, psi, phi, proj)
            })
            .collect(),
    }
}

impl DominoMeasurement {
    /// View as a nine-outcome projective measurement (outcome 3*b1+b2).
    pub fn as_measurement(&self) -> ProjectiveMeasurement {
        ProjectiveMeasurement {
            setting: "y=diamond".into(),
            elements: self
                .entries
                .iter()
                .map(|(b1, b2, _, _, p)| (3 * b1 + b2, p.clone()))
                .collect(),
        }
    }
}

/// Assemble the full reference experiment.
pub fn assemble_reference() -> ReferenceExperiment {
    let phi_plus = max_entangled(3).expect("d=3 is valid");
    let alice = alice_charlie_measurements();
    ReferenceExperiment {
        state_ab1: phi_plus.clone(),
        state_b2c: phi_plus,
        charlie: alice.clone(),
        alice,
        bob_product: bob_product_measurements(),
        bob_domino: domino_measurement(),
    }
}
