//! End-to-end acceptance gate. Each test prints one pass/fail line for its
//! criterion; run with `--nocapture` to see all lines.

use std::time::Instant;

use nlwe::error::Error;
use nlwe::linalg::Ket;
use nlwe::locc::{domino_instance, global_success, product_grid_instance, seesaw_one_way};
use nlwe::oracle::correlations_bruteforce;
use nlwe::realization::{
    correlations, randomized_equivalent, realization_to_json_string, tensor_distance, JunkDims,
    Realization, Y_DIAMOND,
};
use nlwe::reference::assemble_reference;
use nlwe::selftest::{verify_theorem1, Tolerances};
use nlwe::verify::{check_statistics, run_all_checks, MATCHED_PATTERNS};

fn reference_realization() -> Realization {
    Realization::reference(&assemble_reference())
}

fn report(criterion: usize, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_1_reference_statistics() {
    let start = Instant::now();
    let t = correlations(&reference_realization()).unwrap();

    let mut worst: f64 = 0.0;
    // the nine matched diamond patterns at exactly 1/9
    for ((x, z), (a, b1, b2, c)) in MATCHED_PATTERNS {
        worst = worst.max((t.get(x, Y_DIAMOND, z, a, b1, b2, c) - 1.0 / 9.0).abs());
    }
    // the sixteen 1/3 expectations plus the uniform marginals, via the
    // statistics check suite
    let checks = check_statistics(&t).unwrap();
    assert_eq!(
        checks.iter().filter(|c| c.check_id.starts_with("expect-")).count(),
        16
    );
    for c in &checks {
        worst = worst.max(c.residual);
    }
    let elapsed = start.elapsed();
    report(
        1,
        worst <= 1e-10 && elapsed.as_secs_f64() < 1.0,
        &format!("worst statistics residual {worst:.2e}, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_2_sos_values() {
    let start = Instant::now();
    let r = reference_realization();
    let t = correlations(&r).unwrap();
    let checks = run_all_checks(&r, &t).unwrap();
    let bell = checks.iter().find(|c| c.check_id == "sos-bell-r1").unwrap();
    let idsum = checks
        .iter()
        .find(|c| c.check_id == "sos-identity-sum-r1")
        .unwrap();
    let elapsed = start.elapsed();
    report(
        2,
        bell.residual <= 1e-10 && idsum.residual <= 1e-10 && elapsed.as_secs_f64() < 1.0,
        &format!(
            "Bell residual {:.2e}, identity-sum residual {:.2e}, {elapsed:.2?}",
            bell.residual, idsum.residual
        ),
    );
}

#[test]
fn criterion_3_selftest_extraction() {
    let start = Instant::now();
    let tol = Tolerances::default();
    let reference = assemble_reference();

    let mut cases: Vec<(String, Realization)> =
        vec![("reference".into(), reference_realization())];
    // 20 seeded rotated equivalents; junk-dimension-2 embeddings hit each site
    let plans: [(u64, JunkDims); 20] = [
        (100, JunkDims::none()),
        (101, JunkDims::none()),
        (102, JunkDims::none()),
        (103, JunkDims::none()),
        (104, JunkDims::none()),
        (105, JunkDims::none()),
        (106, JunkDims::none()),
        (107, JunkDims::none()),
        (108, JunkDims::none()),
        (109, JunkDims::none()),
        (110, JunkDims { a: 2, b1: 1, b2: 1, c: 1 }),
        (111, JunkDims { a: 1, b1: 2, b2: 1, c: 1 }),
        (112, JunkDims { a: 1, b1: 1, b2: 2, c: 1 }),
        (113, JunkDims { a: 1, b1: 1, b2: 1, c: 2 }),
        (114, JunkDims { a: 2, b1: 1, b2: 1, c: 2 }),
        (115, JunkDims { a: 1, b1: 2, b2: 2, c: 1 }),
        (116, JunkDims { a: 2, b1: 2, b2: 1, c: 1 }),
        (117, JunkDims { a: 1, b1: 1, b2: 2, c: 2 }),
        (118, JunkDims::uniform(2)),
        (119, JunkDims::uniform(2)),
    ];
    for (seed, junk) in plans {
        cases.push((
            format!("seed {seed} junk {junk:?}"),
            randomized_equivalent(&reference, seed, junk).unwrap(),
        ));
    }

    let mut worst_fid = 1.0f64;
    for (label, r) in &cases {
        let results = verify_theorem1(r, &tol).unwrap();
        assert_eq!(results.len(), 12, "{label}");
        for res in &results {
            assert!(res.pass, "{label} / {}: fidelity {}", res.statement, res.fidelity);
            assert!(
                res.fidelity >= 1.0 - 1e-8,
                "{label} / {}: fidelity {}",
                res.statement,
                res.fidelity
            );
            worst_fid = worst_fid.min(res.fidelity);
        }
    }
    let elapsed = start.elapsed();
    report(
        3,
        elapsed.as_secs_f64() < 30.0,
        &format!(
            "{} realizations, worst fidelity {worst_fid:.12}, {elapsed:.2?}",
            cases.len()
        ),
    );
}

#[test]
fn criterion_4_negative_control() {
    // replace the diamond measurement by a different separable basis: the
    // computational product basis
    let mut r = reference_realization();
    r.bob[Y_DIAMOND] = (0..9)
        .map(|b| {
            let k = nlwe::linalg::tensor_ket(&Ket::basis(3, b / 3), &Ket::basis(3, b % 3));
            k.projector()
        })
        .collect();
    r.validate().unwrap();

    // library path: hypothesis violation
    let violated = matches!(
        verify_theorem1(&r, &Tolerances::default()),
        Err(Error::HypothesisViolation { .. })
    );

    // the mismatch is visible as a failing matched-pattern check
    let t = correlations(&r).unwrap();
    let named = check_statistics(&t)
        .unwrap()
        .iter()
        .any(|c| c.check_id.starts_with("matched-pattern") && !c.pass);

    // CLI contract: exit code 4
    let tmp = std::env::temp_dir().join("nlwe-negative-control.json");
    std::fs::write(&tmp, realization_to_json_string(&r)).unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_nlwe"))
        .args(["selftest", "--input", tmp.to_str().unwrap(), "--output"])
        .arg(std::env::temp_dir().join("nlwe-negative-control-out.json"))
        .output()
        .unwrap();
    let code = out.status.code();

    report(
        4,
        violated && named && code == Some(4),
        &format!("hypothesis violation {violated}, pattern named {named}, exit code {code:?}"),
    );
}

#[test]
fn criterion_5_proof_step_suite() {
    let reference = assemble_reference();
    let cases = [
        ("reference".to_string(), reference_realization()),
        (
            "rotated seed 200".into(),
            randomized_equivalent(&reference, 200, JunkDims::none()).unwrap(),
        ),
        (
            "rotated seed 201 junk".into(),
            randomized_equivalent(&reference, 201, JunkDims { a: 2, b1: 1, b2: 1, c: 2 }).unwrap(),
        ),
    ];
    let mut worst = 0.0f64;
    for (label, r) in &cases {
        let t = correlations(r).unwrap();
        for c in run_all_checks(r, &t).unwrap() {
            assert!(
                c.residual < 1e-9,
                "{label} / {}: residual {}",
                c.check_id,
                c.residual
            );
            worst = worst.max(c.residual);
        }
        // junk factorization across the (A B1)|(B2 C) cut
        for res in verify_theorem1(r, &Tolerances::default()).unwrap() {
            assert!(
                res.junk_factorization_residual < 1e-9,
                "{label} / {}: factorization {}",
                res.statement,
                res.junk_factorization_residual
            );
            worst = worst.max(res.junk_factorization_residual);
        }
    }
    report(5, true, &format!("worst proof-step residual {worst:.2e}"));
}

#[test]
fn criterion_6_bruteforce_oracle() {
    let reference = assemble_reference();
    let mut worst = 0.0f64;
    for seed in [301u64, 302, 303] {
        let r = randomized_equivalent(&reference, seed, JunkDims::none()).unwrap();
        let fast = correlations(&r).unwrap();
        let slow = correlations_bruteforce(&r).unwrap();
        worst = worst.max(tensor_distance(&fast, &slow).unwrap());
    }
    report(6, worst <= 1e-12, &format!("worst path disagreement {worst:.2e}"));
}

#[test]
fn criterion_7_nlwe_evidence() {
    let start = Instant::now();
    let domino = domino_instance();
    let global = global_success(&domino).unwrap();
    let seesaw = seesaw_one_way(&domino, 9, 64, 7).unwrap();
    let grid = product_grid_instance(3);
    let grid_best = seesaw_one_way(&grid, 9, 64, 7).unwrap().best_success;
    let elapsed = start.elapsed();
    report(
        7,
        global.value == 1.0
            && seesaw.best_success <= 1.0 - 1e-3
            && grid_best >= 1.0 - 1e-6
            && elapsed.as_secs_f64() < 300.0,
        &format!(
            "global 1.0, one-way best {:.6} (gap {:.4}), grid best {grid_best:.9}, {elapsed:.2?}",
            seesaw.best_success,
            1.0 - seesaw.best_success
        ),
    );
}

#[test]
fn criterion_8_determinism() {
    let bin = env!("CARGO_BIN_EXE_nlwe");
    let run = |args: &[&str]| -> Vec<u8> {
        let out = std::process::Command::new(bin).args(args).output().unwrap();
        assert!(out.status.success(), "{args:?}: {:?}", out.status);
        out.stdout
    };
    let c1 = run(&["correlations", "--reference", "--format", "json"]);
    let c2 = run(&["correlations", "--reference", "--format", "json"]);
    let l1 = run(&["locc", "--seed", "11", "--restarts", "4"]);
    let l2 = run(&["locc", "--seed", "11", "--restarts", "4"]);
    let v1 = run(&["verify", "--reference"]);
    let v2 = run(&["verify", "--reference"]);
    report(
        8,
        c1 == c2 && l1 == l2 && v1 == v2 && !c1.is_empty() && !l1.is_empty(),
        "byte-identical payloads for correlations, locc, and verify reruns",
    );
}
