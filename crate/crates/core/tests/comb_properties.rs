use combworks::comb::{
    build_from_dilation, conditional_channel, global_output, markov_product, step_output,
    validate_comb, Dilation, InputVector,
};
use combworks::io::{parse_process, serialize_process, ProcessMetadata};
use combworks::nonmarkov::step_residuals;
use combworks::random::{random_channel, random_density, random_unitary, rng_for};
use combworks::DensityMatrix;
use proptest::prelude::*;

fn random_dilation(seed: u64, n: usize, de: usize) -> combworks::comb::ProcessTensor {
    let mut rng = rng_for(seed, 11);
    let env = random_density(de, &mut rng);
    let us = (0..n).map(|_| random_unitary(2 * de, &mut rng)).collect();
    build_from_dilation(&Dilation::new(env, us).unwrap(), n, 2).unwrap()
}

fn inputs(seed: u64, n: usize) -> InputVector {
    let mut rng = rng_for(seed, 12);
    InputVector::new((0..n).map(|_| random_density(2, &mut rng)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dilations_are_valid_combs(seed in any::<u64>(), n in 1usize..4, de in 1usize..3) {
        let rep = validate_comb(&random_dilation(seed, n, de));
        prop_assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn markov_products_are_valid_combs(seed in any::<u64>(), n in 1usize..4) {
        let mut rng = rng_for(seed, 13);
        let chs: Vec<_> = (0..n).map(|_| random_channel(2, 2, 2, &mut rng)).collect();
        prop_assert!(validate_comb(&markov_product(&chs).unwrap()).passed);
    }

    #[test]
    fn markov_conditionals_ignore_the_prefix(seed in any::<u64>()) {
        let mut rng = rng_for(seed, 14);
        let chs: Vec<_> = (0..2).map(|_| random_channel(2, 2, 2, &mut rng)).collect();
        let p = markov_product(&chs).unwrap();
        let prefix = [random_density(2, &mut rng)];
        let c2 = conditional_channel(&p, 2, &prefix).unwrap();
        prop_assert!(c2.choi_distance(&chs[1]) < 1e-10);
        let r = inputs(seed, 2);
        let out = global_output(&p, &r).unwrap();
        let expect = chs[0].apply(&r.states[0]).unwrap().tensor(&chs[1].apply(&r.states[1]).unwrap());
        prop_assert!(out.matrix().max_abs_diff(expect.matrix()) < 1e-10);
    }

    #[test]
    fn marginals_follow_conditionals(seed in any::<u64>()) {
        let p = random_dilation(seed, 2, 2);
        let r = inputs(seed, 2);
        let first = conditional_channel(&p, 1, &[]).unwrap().apply(&r.states[0]).unwrap();
        prop_assert!(step_output(&p, &r, 1).unwrap().matrix().max_abs_diff(first.matrix()) < 1e-10);
        let second = conditional_channel(&p, 2, &r.states[..1]).unwrap().apply(&r.states[1]).unwrap();
        prop_assert!(step_output(&p, &r, 2).unwrap().matrix().max_abs_diff(second.matrix()) < 1e-10);
    }

    #[test]
    fn markov_step_residuals_vanish(seed in any::<u64>()) {
        let mut rng = rng_for(seed, 15);
        let chs: Vec<_> = (0..2).map(|_| random_channel(2, 2, 2, &mut rng)).collect();
        let p = markov_product(&chs).unwrap();
        for res in step_residuals(&p, &chs, &inputs(seed, 2)).unwrap() {
            prop_assert!(res.to_f64().abs() < 1e-9);
        }
    }

    #[test]
    fn process_files_round_trip(seed in any::<u64>()) {
        let p = random_dilation(seed, 2, 2);
        let meta = ProcessMetadata { name: "x".into(), hamiltonian_diag: vec![0.0, 1.0], temperature: Some(1.0) };
        let bytes = serialize_process(&p, &meta);
        let (q, m) = parse_process(&bytes).unwrap();
        prop_assert_eq!(&m, &meta);
        prop_assert!(q.choi().max_abs_diff(p.choi()) == 0.0);
        prop_assert_eq!(serialize_process(&q, &m), bytes);
    }

    #[test]
    fn global_outputs_are_states(seed in any::<u64>()) {
        let p = random_dilation(seed, 2, 2);
        let out = global_output(&p, &inputs(seed, 2)).unwrap();
        prop_assert!(DensityMatrix::new(out.into_matrix()).is_ok());
    }
}
