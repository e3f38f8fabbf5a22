use std::collections::BTreeMap;

use num_complex::Complex64;
use proptest::prelude::*;

use c4chem::c4::{build_unencoded_circuit, LogicalSetting};
use c4chem::chem_io::{emit_pauli_hamiltonian, jordan_wigner, parse_pauli_hamiltonian, FermionOperator};
use c4chem::eigen::{prepare_state, solve_prep_angles, PrepAngles};
use c4chem::pauli::{pauli_expectation, ObservableSum, PauliString};
use c4chem::shadow::{estimate_pauli_pooled, ShadowData};
use c4chem::sim::{enumerate_branches, run_shots, total_variation, NoiseModel};

fn pauli3() -> impl Strategy<Value = PauliString> {
    (0u64..8, 0u64..8, 0u8..4).prop_map(|(x, z, ph)| PauliString::from_masks(3, x, z).unwrap().with_phase(ph))
}

proptest! {
    #[test]
    fn pauli_product_is_associative(a in pauli3(), b in pauli3(), c in pauli3()) {
        let left = a.mul(&b).unwrap().mul(&c).unwrap();
        let right = a.mul(&b.mul(&c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn pauli_product_matches_matrices(a in pauli3(), b in pauli3()) {
        let dense = a.to_matrix().unwrap() * b.to_matrix().unwrap();
        let diff = (dense - a.mul(&b).unwrap().to_matrix().unwrap()).norm();
        prop_assert!(diff < 1e-12);
    }

    #[test]
    fn pauli_text_round_trip(coeffs in prop::collection::vec(-3.0f64..3.0, 16)) {
        let words: Vec<String> = (0..16)
            .map(|i| {
                let l = ['I', 'X', 'Y', 'Z'];
                format!("{}{}", l[i / 4], l[i % 4])
            })
            .collect();
        let h = ObservableSum::from_terms(words.iter().zip(&coeffs).map(|(w, c)| (*c, w.as_str()))).unwrap();
        let back = parse_pauli_hamiltonian(&emit_pauli_hamiltonian(&h)).unwrap();
        for (p, c) in h.terms() {
            prop_assert_eq!(back.coefficient(p), c);
        }
        prop_assert_eq!(back.len(), h.len());
    }

    #[test]
    fn ladder_anticommutation(p in 1usize..5, q in 1usize..5) {
        let mut op = FermionOperator::new();
        op.add_term(vec![(p, false), (q, true)], Complex64::new(1.0, 0.0));
        op.add_term(vec![(q, true), (p, false)], Complex64::new(1.0, 0.0));
        let mut s = jordan_wigner(&op, 4).unwrap();
        s.prune(1e-14);
        let h = s.to_observable(1e-14).unwrap();
        let id = PauliString::identity(4).unwrap();
        prop_assert_eq!(h.coefficient(&id), if p == q { 1.0 } else { 0.0 });
        prop_assert!(h.terms().all(|(w, _)| w.is_identity()));
    }

    #[test]
    fn angle_round_trip(a in -3.1f64..3.1, b in -3.1f64..3.1, g in -3.1f64..3.1) {
        let target = prepare_state(&PrepAngles::new(a, b, g));
        let solved = solve_prep_angles(&target).unwrap();
        let fid = prepare_state(&solved).fidelity(&target).unwrap();
        prop_assert!(fid > 1.0 - 1e-10);
    }
}

fn sampled_distribution(shots: &[c4chem::sim::ShotRecord]) -> BTreeMap<u64, f64> {
    let mut d = BTreeMap::new();
    for s in shots {
        *d.entry(s.bits).or_insert(0.0) += 1.0 / shots.len() as f64;
    }
    d
}

#[test]
fn sampled_shots_match_branch_enumeration() {
    let c = build_unencoded_circuit(&PrepAngles::REFERENCE, LogicalSetting::XZ);
    let exact = enumerate_branches(&c).unwrap();
    let shots = run_shots(&c, &NoiseModel::NONE, 3, 40_000).unwrap();
    // Expected TVD for 4 outcomes at this size is about 0.005.
    assert!(total_variation(&exact, &sampled_distribution(&shots)) < 0.02);
}

#[test]
fn shots_do_not_depend_on_thread_count() {
    let c = build_unencoded_circuit(&PrepAngles::REFERENCE, LogicalSetting::XX);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_shots(&c, &NoiseModel::H1_LIKE, 17, 5_000).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn sampled_zz_matches_dense_expectation() {
    let a = PrepAngles::REFERENCE;
    let shots = run_shots(
        &build_unencoded_circuit(&a, LogicalSetting::ZZ),
        &NoiseModel::NONE,
        9,
        160_000,
    )
    .unwrap();
    let mut data = ShadowData::new(2);
    for s in &shots {
        data.add("ZZ", s.bits, 1.0);
    }
    let zz: PauliString = "ZZ".parse().unwrap();
    let (est, settings, n) = estimate_pauli_pooled(&data, &zz).unwrap().unwrap();
    let exact = pauli_expectation(&prepare_state(&a), &zz).unwrap().re;
    assert_eq!((settings, n), (vec!["ZZ".to_string()], 160_000.0));
    assert!((est.value - exact).abs() < 4.0 * est.std_error);
}
