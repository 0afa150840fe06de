//! Fine-grained diagnostic checks: every intermediate relation used by the
//! certification argument, evaluated directly on a realization's operators.
//! Each check is a pure function producing a reportable residual.

use serde::Serialize;

use crate::error::Result;
use crate::linalg::{apply_on_factors, inner, Matrix};
use crate::realization::{CorrelationTensor, OutcomeVar, Realization, Y_DIAMOND};
use crate::selftest::{BlockOperators, ExtractionResult, Round};

/// Default threshold for operator-level residuals (one matrix multiplication
/// looser than the statistics threshold).
pub const RESIDUAL_THRESHOLD: f64 = 1e-9;
/// Threshold for checks evaluated directly on probabilities.
pub const STATS_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub check_id: String,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
    pub context: String,
}

impl CheckResult {
    pub fn new(check_id: impl Into<String>, residual: f64, threshold: f64, context: impl Into<String>) -> Self {
        let check_id = check_id.into();
        CheckResult {
            pass: residual <= threshold,
            check_id,
            residual,
            threshold,
            context: context.into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SelfTestReport {
    pub digest: String,
    pub verdict: String,
    pub note: String,
    pub checks: Vec<CheckResult>,
    pub extractions: Vec<ExtractionResult>,
}

/// The nine diamond-setting input/output patterns that must each occur with
/// probability 1/9: ((x, z), (a, b1, b2, c)).
pub const MATCHED_PATTERNS: [((usize, usize), (usize, usize, usize, usize)); 9] = [
    ((0, 0), (1, 0, 0, 1)),
    ((0, 1), (0, 0, 1, 0)),
    ((0, 1), (0, 0, 2, 1)),
    ((0, 2), (2, 1, 0, 1)),
    ((0, 2), (2, 1, 1, 2)),
    ((2, 0), (1, 1, 2, 0)),
    ((2, 0), (2, 2, 0, 0)),
    ((1, 0), (0, 2, 1, 2)),
    ((1, 0), (1, 2, 2, 2)),
];

/// Statistics-level checks evaluated on the correlation tensor alone.
pub fn check_statistics(t: &CorrelationTensor) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let third = 1.0 / 3.0;
    let ninth = 1.0 / 9.0;

    // single-party 1/3 expectations: (label, party, outcome, setting)
    let singles: [(&str, char, usize, usize); 8] = [
        ("expect-a2-x0", 'A', 2, 0),
        ("expect-a2-x1", 'A', 2, 1),
        ("expect-b2-y0", 'B', 2, 0),
        ("expect-b2-y1", 'B', 2, 1),
        ("expect-a0-x0", 'A', 0, 0),
        ("expect-a0-x2", 'A', 0, 2),
        ("expect-b0-y2", 'B', 0, 2),
        ("expect-b0-y3", 'B', 0, 3),
    ];
    for (id, party, o, s) in singles {
        let v = match party {
            'A' => t.marginalize(&[OutcomeVar::A], s, 0, 0)?[o],
            _ => t.marginalize(&[OutcomeVar::B1], 0, s, 0)?[o],
        };
        out.push(CheckResult::new(id, (v - third).abs(), STATS_THRESHOLD, format!("target 1/3, got {v:.12}")));
    }

    // joint 1/3 expectations: (label, a, x, b1, y)
    let joints: [(&str, usize, usize, usize, usize); 8] = [
        ("expect-a2x0-b2y0", 2, 0, 2, 0),
        ("expect-a2x1-b2y0", 2, 1, 2, 0),
        ("expect-a2x0-b2y1", 2, 0, 2, 1),
        ("expect-a2x1-b2y1", 2, 1, 2, 1),
        ("expect-a0x0-b0y2", 0, 0, 0, 2),
        ("expect-a0x2-b0y2", 0, 2, 0, 2),
        ("expect-a0x0-b0y3", 0, 0, 0, 3),
        ("expect-a0x2-b0y3", 0, 2, 0, 3),
    ];
    for (id, a, x, b1, y) in joints {
        let m = t.marginalize(&[OutcomeVar::A, OutcomeVar::B1], x, y, 0)?;
        let v = m[a * 3 + b1];
        out.push(CheckResult::new(id, (v - third).abs(), STATS_THRESHOLD, format!("target 1/3, got {v:.12}")));
    }

    // the nine matched diamond patterns
    for ((x, z), (a, b1, b2, c)) in MATCHED_PATTERNS {
        let v = t.get(x, Y_DIAMOND, z, a, b1, b2, c);
        out.push(CheckResult::new(
            format!("matched-pattern-x{x}-z{z}-a{a}-b{b1}{b2}-c{c}"),
            (v - ninth).abs(),
            STATS_THRESHOLD,
            format!("target 1/9, got {v:.12}"),
        ));
    }

    // uniform diamond marginal p(b1,b2|diamond)
    let pb = t.marginalize(&[OutcomeVar::B1, OutcomeVar::B2], 0, Y_DIAMOND, 0)?;
    let (worst_b, res_b) = pb
        .iter()
        .enumerate()
        .map(|(i, v)| (i, (v - ninth).abs()))
        .max_by(|l, r| l.1.total_cmp(&r.1))
        .unwrap();
    out.push(CheckResult::new(
        "uniform-diamond-marginal",
        res_b,
        STATS_THRESHOLD,
        format!("worst outcome b1={},b2={}", worst_b / 3, worst_b % 3),
    ));

    // uniform side-party joint p(a,c|x,z)
    let mut worst = (0.0, String::new());
    for x in 0..3 {
        for z in 0..3 {
            let m = t.marginalize(&[OutcomeVar::A, OutcomeVar::C], x, 0, z)?;
            for a in 0..3 {
                for c in 0..3 {
                    let res = (m[a * 3 + c] - ninth).abs();
                    if res > worst.0 {
                        worst = (res, format!("worst at x={x},z={z},a={a},c={c}"));
                    }
                }
            }
        }
    }
    out.push(CheckResult::new("uniform-side-joint", worst.0, STATS_THRESHOLD, worst.1));

    Ok(out)
}

fn side_factor(b: &BlockOperators) -> usize {
    match b.round {
        Round::One => 0,
        Round::Two => 3,
    }
}

fn bob_marginal(r: &Realization, round: Round, y: usize, o: usize) -> Matrix {
    match round {
        Round::One => r.bob_marginal_b1(y, o),
        Round::Two => r.bob_marginal_b2(y, o),
    }
}

fn side_element(r: &Realization, round: Round, x: usize, a: usize) -> Matrix {
    match round {
        Round::One => r.alice[x][a].clone(),
        Round::Two => r.charlie[x][a].clone(),
    }
}

fn round_tag(round: Round) -> &'static str {
    match round {
        Round::One => "r1",
        Round::Two => "r2",
    }
}

/// The eight parallel-vector relations plus the derived block-vector
/// identities and their norms.
pub fn check_parallel_relations(b: &BlockOperators, r: &Realization) -> Result<Vec<CheckResult>> {
    let psi = r.joint_state();
    let dims = r.factor_dims();
    let sf = side_factor(b);
    let tag = round_tag(b.round);
    let mut out = Vec::new();

    // (side outcome, side setting, bob outcome, bob setting)
    let relations: [(usize, usize, usize, usize); 8] = [
        (2, 0, 2, 0),
        (2, 0, 2, 1),
        (2, 1, 2, 0),
        (2, 1, 2, 1),
        (0, 0, 0, 2),
        (0, 0, 0, 3),
        (0, 2, 0, 2),
        (0, 2, 0, 3),
    ];
    for (a, x, o, y) in relations {
        let va = apply_on_factors(&psi, &dims, sf, 1, &side_element(r, b.round, x, a));
        let vb = apply_on_factors(&psi, &dims, 1, 2, &bob_marginal(r, b.round, y, o));
        out.push(CheckResult::new(
            format!("parallel-{tag}-side{a}|{x}-bob{o}|{y}"),
            va.sub(&vb).norm(),
            RESIDUAL_THRESHOLD,
            "side-party element and Bob marginal act identically on the state",
        ));
    }

    // block vectors agree across all four defining operator families
    let sqrt23 = (2f64 / 3.0).sqrt();
    for (blk, ids, idb_d, idb_e) in [
        ("01", [&b.id_z01_side, &b.id_x01_side], &b.id_d01, &b.id_e01),
        ("12", [&b.id_z12_side, &b.id_x12_side], &b.id_d12, &b.id_e12),
    ] {
        let vz = apply_on_factors(&psi, &dims, sf, 1, ids[0]);
        let vx = apply_on_factors(&psi, &dims, sf, 1, ids[1]);
        let vd = apply_on_factors(&psi, &dims, 1, 2, idb_d);
        let ve = apply_on_factors(&psi, &dims, 1, 2, idb_e);
        let res = vz
            .sub(&vx)
            .norm()
            .max(vz.sub(&vd).norm())
            .max(vz.sub(&ve).norm());
        out.push(CheckResult::new(
            format!("block-vector-consistency-{tag}-{blk}"),
            res,
            RESIDUAL_THRESHOLD,
            "identity-block vectors agree across Z/X/D/E families",
        ));
        out.push(CheckResult::new(
            format!("block-vector-norm-{tag}-{blk}"),
            (vz.norm() - sqrt23).abs(),
            RESIDUAL_THRESHOLD,
            "norm equals sqrt(2/3)",
        ));
    }

    Ok(out)
}

/// Bell value, identity-sum, and the squared-term vector identities of the
/// sum-of-squares decomposition, for both qubit blocks.
pub fn check_sos(b: &BlockOperators, r: &Realization) -> Result<Vec<CheckResult>> {
    let psi = r.joint_state();
    let dims = r.factor_dims();
    let sf = side_factor(b);
    let tag = round_tag(b.round);
    let mut out = Vec::new();

    let expect = |side_op: &Matrix, bob_op: &Matrix| -> Result<f64> {
        let v = apply_on_factors(
            &apply_on_factors(&psi, &dims, 1, 2, bob_op),
            &dims,
            sf,
            1,
            side_op,
        );
        Ok(inner(&psi, &v)?.re)
    };

    let bell = expect(&b.z01_side, &b.d01)? + expect(&b.z01_side, &b.e01)?
        + expect(&b.x01_side, &b.d01)?
        - expect(&b.x01_side, &b.e01)?;
    let bell_target = 2.0 / 3.0 * 2.0 * 2f64.sqrt();
    out.push(CheckResult::new(
        format!("sos-bell-{tag}"),
        (bell - bell_target).abs(),
        RESIDUAL_THRESHOLD,
        format!("target (2/3)*2*sqrt(2), got {bell:.12}"),
    ));

    let id = Matrix::identity(b.dim_bob);
    let ids = Matrix::identity(b.dim_side);
    let idsum = expect(&b.id_z01_side, &id)? + expect(&b.id_x01_side, &id)?
        + expect(&ids, &b.id_d01)?
        + expect(&ids, &b.id_e01)?;
    out.push(CheckResult::new(
        format!("sos-identity-sum-{tag}"),
        (idsum - 8.0 / 3.0).abs(),
        RESIDUAL_THRESHOLD,
        format!("target 8/3, got {idsum:.12}"),
    ));

    for (blk, zs, xs, zh, xh) in [
        ("01", &b.z01_side, &b.x01_side, &b.zhat01, &b.xhat01),
        ("12", &b.z12_side, &b.x12_side, &b.zhat12, &b.xhat12),
    ] {
        let vz = apply_on_factors(&psi, &dims, sf, 1, zs)
            .sub(&apply_on_factors(&psi, &dims, 1, 2, zh));
        let vx = apply_on_factors(&psi, &dims, sf, 1, xs)
            .sub(&apply_on_factors(&psi, &dims, 1, 2, xh));
        out.push(CheckResult::new(
            format!("sos-z-vector-{tag}-{blk}"),
            vz.norm(),
            RESIDUAL_THRESHOLD,
            "side Z and hatted Bob Z act identically on the state",
        ));
        out.push(CheckResult::new(
            format!("sos-x-vector-{tag}-{blk}"),
            vx.norm(),
            RESIDUAL_THRESHOLD,
            "side X and hatted Bob X act identically on the state",
        ));
    }

    Ok(out)
}

/// Anticommutation of the Pauli-like pairs on the joint state, both the
/// side-party operators and Bob's hatted operators.
pub fn check_anticommutation(b: &BlockOperators, r: &Realization) -> Result<Vec<CheckResult>> {
    let psi = r.joint_state();
    let dims = r.factor_dims();
    let sf = side_factor(b);
    let tag = round_tag(b.round);
    let mut out = Vec::new();

    let anti_side = |x: &Matrix, z: &Matrix| -> f64 {
        let vzx = apply_on_factors(&apply_on_factors(&psi, &dims, sf, 1, x), &dims, sf, 1, z);
        let vxz = apply_on_factors(&apply_on_factors(&psi, &dims, sf, 1, z), &dims, sf, 1, x);
        vzx.add(&vxz).norm()
    };
    let anti_bob = |x: &Matrix, z: &Matrix| -> f64 {
        let vzx = apply_on_factors(&apply_on_factors(&psi, &dims, 1, 2, x), &dims, 1, 2, z);
        let vxz = apply_on_factors(&apply_on_factors(&psi, &dims, 1, 2, z), &dims, 1, 2, x);
        vzx.add(&vxz).norm()
    };

    out.push(CheckResult::new(
        format!("anticommute-side-{tag}-01"),
        anti_side(&b.x01_side, &b.z01_side),
        RESIDUAL_THRESHOLD,
        "{X01, Z01} annihilates the state on the side party",
    ));
    out.push(CheckResult::new(
        format!("anticommute-side-{tag}-12"),
        anti_side(&b.x12_side, &b.z12_side),
        RESIDUAL_THRESHOLD,
        "{X12, Z12} annihilates the state on the side party",
    ));
    out.push(CheckResult::new(
        format!("anticommute-bob-{tag}-01"),
        anti_bob(&b.xhat01, &b.zhat01),
        RESIDUAL_THRESHOLD,
        "hatted {X01, Z01} annihilates the state on Bob",
    ));
    out.push(CheckResult::new(
        format!("anticommute-bob-{tag}-12"),
        anti_bob(&b.xhat12, &b.zhat12),
        RESIDUAL_THRESHOLD,
        "hatted {X12, Z12} annihilates the state on Bob",
    ));

    Ok(out)
}

/// Selection-rule and norm facts: Bob's qutrit projectors P_k select exactly
/// the matching side-party setting-0 outcome, and the state norms under the
/// diamond / side-party elements take their forced values.
pub fn check_selection_rules(b: &BlockOperators, r: &Realization) -> Result<Vec<CheckResult>> {
    let psi = r.joint_state();
    let dims = r.factor_dims();
    let sf = side_factor(b);
    let tag = round_tag(b.round);
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for j in 0..3 {
        let va = apply_on_factors(&psi, &dims, sf, 1, &side_element(r, b.round, 0, j));
        for k in 0..3 {
            let v = apply_on_factors(&va, &dims, 1, 2, &b.p[k]);
            let res = if j == k { v.sub(&va).norm() } else { v.norm() };
            worst = worst.max(res);
        }
    }
    out.push(CheckResult::new(
        format!("delta-selection-{tag}"),
        worst,
        RESIDUAL_THRESHOLD,
        "P_k acts as a delta on setting-0 side outcomes",
    ));

    let mut worst_dom = 0.0f64;
    for el in &r.bob[Y_DIAMOND] {
        let v = apply_on_factors(&psi, &dims, 1, 2, el);
        worst_dom = worst_dom.max((v.norm() - 1.0 / 3.0).abs());
    }
    out.push(CheckResult::new(
        "norm-diamond-elements",
        worst_dom,
        RESIDUAL_THRESHOLD,
        "each diamond element maps the state to norm 1/3",
    ));

    let mut worst_side = 0.0f64;
    for x in 0..3 {
        for a in 0..3 {
            let v = apply_on_factors(&psi, &dims, sf, 1, &side_element(r, b.round, x, a));
            worst_side = worst_side.max((v.norm() - 1.0 / 3f64.sqrt()).abs());
        }
    }
    out.push(CheckResult::new(
        format!("norm-side-elements-{tag}"),
        worst_side,
        RESIDUAL_THRESHOLD,
        "each side-party element maps the state to norm 1/sqrt(3)",
    ));

    Ok(out)
}

/// Assemble the final report: checks sorted by id, verdict the conjunction of
/// all pass flags, the first failing check named in the verdict.
pub fn compile_report(
    r: &Realization,
    mut checks: Vec<CheckResult>,
    extractions: Vec<ExtractionResult>,
) -> SelfTestReport {
    checks.sort_by(|l, r| l.check_id.cmp(&r.check_id));
    let first_fail = checks
        .iter()
        .map(|c| (c.pass, c.check_id.clone()))
        .chain(extractions.iter().map(|e| (e.pass, e.statement.clone())))
        .find(|(pass, _)| !pass);
    let verdict = match first_fail {
        Some((_, id)) => format!("FAIL({id})"),
        None => "PASS".to_string(),
    };
    let note = if checks.is_empty() && extractions.is_empty() {
        "vacuous".to_string()
    } else {
        String::new()
    };
    SelfTestReport {
        digest: r.digest(),
        verdict,
        note,
        checks,
        extractions,
    }
}

/// Run every operator-level check for both rounds plus the statistics checks.
pub fn run_all_checks(r: &Realization, t: &CorrelationTensor) -> Result<Vec<CheckResult>> {
    let mut checks = check_statistics(t)?;
    for round in [Round::One, Round::Two] {
        let b = crate::selftest::build_block_operators(r, round)?;
        checks.extend(check_parallel_relations(&b, r)?);
        checks.extend(check_sos(&b, r)?);
        checks.extend(check_anticommutation(&b, r)?);
        checks.extend(check_selection_rules(&b, r)?);
    }
    Ok(checks)
}
