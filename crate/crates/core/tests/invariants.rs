use proptest::prelude::*;

use qst_core::analysis::{entanglement_report, mix_seed, MediumFamily};
use qst_core::chain::{build_hamiltonian, ChainSpec, ModelKind};
use qst_core::dense::{leakage_outside, DenseEngine};
use qst_core::fermion::FermionEngine;
use qst_core::protocol::{mirror_inversion, mirror_inversion_ket, MediumSpec, ProtocolEngine};
use qst_core::quantum::linalg::{kron, max_abs_diff, matmul, trace};
use qst_core::quantum::state::random_pure_state_with;
use qst_core::quantum::{
    binary_entropy, entropy, partial_trace, projective_measure, random_mixed_state, random_pure_state, seeded_rng,
    MeasurementBasis, Outcome, OutcomeChoice, Pauli, PauliString, Phase, SingleQubitState,
};

fn pauli() -> impl Strategy<Value = Pauli> {
    prop_oneof![Just(Pauli::I), Just(Pauli::X), Just(Pauli::Y), Just(Pauli::Z)]
}

fn phase() -> impl Strategy<Value = Phase> {
    prop_oneof![Just(Phase::One), Just(Phase::I), Just(Phase::MinusOne), Just(Phase::MinusI)]
}

fn string_pair() -> impl Strategy<Value = (PauliString, PauliString)> {
    (1usize..=6).prop_flat_map(|n| {
        let s = || (phase(), prop::collection::vec(pauli(), n)).prop_map(|(p, l)| PauliString::new(p, l));
        (s(), s())
    })
}

fn engineered() -> impl Strategy<Value = ChainSpec> {
    (prop_oneof![Just(ModelKind::IsingEngineered), Just(ModelKind::XxEngineered)], 2usize..=6)
        .prop_map(|(m, n)| ChainSpec::new(m, n, 1.0, None).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn pauli_products_match_matrix_products((p, q) in string_pair()) {
        let lhs = (&p * &q).to_matrix();
        let rhs = matmul(&p.to_matrix(), &q.to_matrix());
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn heisenberg_and_schrodinger_pictures_agree(
        spec in engineered(),
        letters in prop::collection::vec(pauli(), 6),
        t in 0.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let n = spec.n_sites();
        let engine = DenseEngine::new(spec).unwrap();
        let rho = random_mixed_state(n, 1 + (seed % 3) as usize, seed).unwrap();
        let op = PauliString::new(Phase::One, letters[..n].to_vec());
        let heisenberg = rho.expectation(&engine.heisenberg_evolve(t, &op).unwrap());
        let schrodinger = engine.evolve(t, &rho).unwrap().expectation(&op.to_matrix());
        prop_assert!((heisenberg - schrodinger).norm() < 1e-10);
    }

    #[test]
    fn propagators_are_unitary(spec in engineered(), t in -5.0f64..5.0) {
        let u = DenseEngine::new(spec).unwrap().propagator(t).unwrap();
        prop_assert!(u.unitarity_residual() < 1e-10);
    }

    #[test]
    fn measurement_probabilities_sum_to_one(n in 1usize..=5, site in 1usize..=5, seed in any::<u64>()) {
        let site = 1 + (site - 1) % n;
        let psi = random_pure_state(n, seed).unwrap();
        let mut rng = seeded_rng(seed);
        for basis in [MeasurementBasis::X, MeasurementBasis::Z] {
            let p = projective_measure(&psi, site, &basis, OutcomeChoice::Force(Outcome::Plus), &mut rng).unwrap().probability;
            let m = projective_measure(&psi, site, &basis, OutcomeChoice::Force(Outcome::Minus), &mut rng).unwrap().probability;
            prop_assert!((p + m - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_trace_of_product_factorizes(na in 1usize..=3, nb in 1usize..=3, seed in any::<u64>()) {
        let a = random_mixed_state(na, 2, seed).unwrap();
        let b = random_mixed_state(nb, 2, seed ^ 0x5555).unwrap();
        let ab = a.tensor(&b);
        let keep_a: Vec<usize> = (1..=na).collect();
        let keep_b: Vec<usize> = (na + 1..=na + nb).collect();
        prop_assert!(max_abs_diff(partial_trace(&ab, &keep_a).unwrap().matrix(), a.matrix()) < 1e-12);
        prop_assert!(max_abs_diff(partial_trace(&ab, &keep_b).unwrap().matrix(), b.matrix()) < 1e-12);
    }

    #[test]
    fn pure_states_have_zero_entropy(n in 1usize..=5, seed in any::<u64>()) {
        prop_assert!(entropy(&random_pure_state(n, seed).unwrap().to_density()).unwrap().abs() < 1e-9);
    }

    #[test]
    fn mirror_inversion_is_an_involution(n in 1usize..=5, seed in any::<u64>()) {
        let rho = random_mixed_state(n, 2, seed).unwrap();
        let back = mirror_inversion(&mirror_inversion(&rho));
        prop_assert_eq!(back.matrix(), rho.matrix());
        let psi = random_pure_state(n, seed).unwrap();
        let back = mirror_inversion_ket(&mirror_inversion_ket(&psi));
        prop_assert_eq!(back.amplitudes(), psi.amplitudes());
    }

    #[test]
    fn mirror_inversion_reverses_products(seed in any::<u64>()) {
        let a = random_mixed_state(1, 2, seed).unwrap();
        let b = random_mixed_state(2, 2, seed ^ 1).unwrap();
        let swapped = mirror_inversion(&a.tensor(&b));
        let expect = mirror_inversion(&b).tensor(&a);
        prop_assert!(max_abs_diff(swapped.matrix(), expect.matrix()) < 1e-15);
    }

    #[test]
    fn outcome_product_alone_fixes_the_output(spec in engineered(), family in 0usize..8, seed in any::<u64>()) {
        prop_assume!(spec.n_sites() >= 3);
        let mut rng = seeded_rng(seed);
        let family = MediumFamily::standard()[family];
        let medium = family.draw(spec.medium_len(), &mut rng);
        let input = SingleQubitState::from_density(&random_mixed_state(1, 1 + (seed % 2) as usize, seed).unwrap()).unwrap();
        let runs = ProtocolEngine::new(spec).unwrap().run_all_outcomes(&input, &medium, seed).unwrap();
        for (a, b) in [(0, 3), (1, 2)] {
            prop_assert_eq!(runs[a].outcome_product, runs[b].outcome_product);
            prop_assert!((runs[a].output.matrix() - runs[b].output.matrix()).norm() < 1e-10);
        }
        for r in &runs {
            prop_assert!((r.fidelity - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sampled_runs_reach_unit_fidelity(spec in engineered(), family in 0usize..8, seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let medium = MediumFamily::standard()[family].draw(spec.medium_len(), &mut rng);
        let input = SingleQubitState::from_density(&random_pure_state_with(1, &mut rng).unwrap().to_density()).unwrap();
        let run = ProtocolEngine::new(spec).unwrap().run(&input, &medium, OutcomeChoice::Sample, OutcomeChoice::Sample, seed).unwrap();
        prop_assert!((run.fidelity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hamiltonian_matches_its_terms(spec in engineered()) {
        let h = build_hamiltonian(&spec).unwrap();
        let mut sum = qst_core::quantum::Operator::zeros(h.nrows(), h.ncols());
        for term in qst_core::chain::hamiltonian_terms(&spec) {
            sum += term.op.to_matrix() * qst_core::quantum::C64::new(term.coefficient, 0.0);
        }
        prop_assert!(max_abs_diff(&h, &sum) < 1e-12);
    }
}

#[test]
fn evolved_ising_pairs_stay_on_their_sites() {
    for n in 2..=8 {
        let spec = ChainSpec::ising(n).unwrap();
        let engine = DenseEngine::new(spec).unwrap();
        let t = engine.critical_time().unwrap();
        for i in 1..=n / 2 {
            let j = n - i + 1;
            for (a, b) in [(Pauli::I, Pauli::X), (Pauli::Z, Pauli::Y), (Pauli::Z, Pauli::Z)] {
                let op = PauliString::on_sites(n, &[(i, a), (j, b)]).unwrap();
                let evolved = engine.heisenberg_evolve(t, &op).unwrap();
                for k in (1..=n).filter(|&k| k != i && k != j) {
                    for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                        let s = PauliString::on_sites(n, &[(k, p)]).unwrap().to_matrix();
                        let comm = matmul(&evolved, &s) - matmul(&s, &evolved);
                        assert!(comm.iter().all(|z| z.norm() < 1e-8), "n={n} pair ({i},{j}) site {k}");
                    }
                }
                assert!(leakage_outside(&evolved, n, &[i, j]) < 1e-8);
            }
        }
    }
}

#[test]
fn x_eigenstate_in_the_medium_factors_out_at_its_mirror() {
    let mut rng = seeded_rng(4);
    for n in 3..=7 {
        let spec = ChainSpec::ising(n).unwrap();
        let engine = ProtocolEngine::new(spec).unwrap();
        for j in 2..n {
            for sign in [1.0, -1.0] {
                let target = if sign > 0.0 { SingleQubitState::plus() } else { SingleQubitState::minus() };
                let states: Vec<SingleQubitState> = (2..n)
                    .map(|k| {
                        if k == j {
                            target.clone()
                        } else if rand::Rng::random::<bool>(&mut rng) {
                            SingleQubitState::one()
                        } else {
                            SingleQubitState::zero()
                        }
                    })
                    .collect();
                let input = SingleQubitState::from_density(&random_pure_state_with(1, &mut rng).unwrap().to_density()).unwrap();
                let partner = engine.mirror_partner_state(&input, &MediumSpec::ProductStates { states }, j).unwrap();
                let f = qst_core::quantum::state_fidelity(&partner, &target).unwrap();
                assert!((f - 1.0).abs() < 1e-9, "n={n} j={j}");
            }
        }
    }
}

#[test]
fn last_spin_entropy_follows_the_input_x_expectation() {
    for n in 3..=6 {
        let spec = ChainSpec::ising(n).unwrap();
        let mut last = -1.0;
        for k in (0..=8).rev() {
            let x = k as f64 / 8.0;
            let theta = x.asin();
            let psi = SingleQubitState::from_bloch_angles(theta, 0.0).pure_ket().unwrap();
            let bits = vec![0u8; n - 2];
            let r = entanglement_report(&spec, &psi, &MediumSpec::ProductZ { bits }).unwrap();
            let expect = binary_entropy((1.0 + x) / 2.0);
            assert!((r.last_spin_entropy - expect).abs() < 1e-9, "n={n} x={x}");
            assert!(r.last_spin_entropy > last, "entropy must grow as |<X>| falls");
            assert!(r.subadditivity_violation < 1e-8);
            last = r.last_spin_entropy;
        }
    }
}

#[test]
fn fermion_propagator_is_unitary_at_scale() {
    for n in [10, 200, 1000] {
        let fe = FermionEngine::new(&ChainSpec::xx_homogeneous(n, 0.7).unwrap()).unwrap();
        let u = fe.propagator(13.7);
        for col in 0..n {
            assert!((u.column(col).norm() - 1.0).abs() < 1e-10, "n={n} column {col}");
        }
    }
}

#[test]
fn profiles_are_mirror_symmetric_up_to_64_sites() {
    for n in 2..=64 {
        for spec in [ChainSpec::ising(n).unwrap(), ChainSpec::xx(n).unwrap()] {
            assert!(qst_core::chain::coupling_profile(&spec).is_mirror_symmetric(), "{spec:?}");
        }
    }
}

#[test]
fn independent_seeds_are_distinct() {
    let a = mix_seed(7, &[3, 0]);
    let b = mix_seed(7, &[3, 1]);
    let c = mix_seed(8, &[3, 0]);
    assert!(a != b && a != c && b != c);
    assert_eq!(a, mix_seed(7, &[3, 0]));
}

#[test]
fn kron_products_trace_to_one() {
    let a = random_mixed_state(2, 3, 1).unwrap();
    let b = random_mixed_state(1, 2, 2).unwrap();
    let ab = kron(a.matrix(), b.matrix()).unwrap();
    assert!((trace(&ab).re - 1.0).abs() < 1e-12);
}
