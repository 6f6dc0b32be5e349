//! Property tests: the eigensolver contract, operator monotonicity of the
//! f_k family, trace contractivity under arbitrary proper maps, and exact
//! chain-file roundtrips.

use proptest::prelude::*;

use contraction_lab::diagnostics::{f_k, spectral_mass};
use contraction_lab::io;
use contraction_lab::matrix::{dot, Matrix};
use contraction_lab::products::{trace_convergence, ProperMap, SigmaKind};
use contraction_lab::rng::Rng;
use contraction_lab::seqgen;
use contraction_lab::symmat::{
    apply_spectral_fn, loewner_witness, sym_eig, SymMatrix,
};

fn random_contraction(rng: &mut Rng, dim: usize) -> SymMatrix {
    let q = rng.orthogonal(dim);
    let values: Vec<f64> = (0..dim).map(|_| rng.uniform()).collect();
    SymMatrix::conjugated_diag(&q, &values)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eig_reconstructs_and_is_orthonormal(seed in any::<u64>(), dim in 1usize..8) {
        let mut rng = Rng::new(seed);
        let raw = rng.normal_matrix(dim);
        let a = SymMatrix::symmetrize(&raw);
        let eig = sym_eig(&a).unwrap();
        prop_assert!(eig.reconstruct().max_abs_diff(&a) < 1e-9);
        let qtq = eig.vectors.transpose().mul(&eig.vectors);
        prop_assert!(qtq.max_abs_diff(&Matrix::identity(dim)) < 1e-10);
        for w in eig.values.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn f_k_is_operator_monotone(seed in any::<u64>(), dim in 2usize..7, k in 1u32..7) {
        let mut rng = Rng::new(seed);
        let scale = rng.uniform_in(0.1, 0.8);
        let a = random_contraction(&mut rng, dim).scale(scale);
        let c = random_contraction(&mut rng, dim).scale(1.0 - scale - 0.01);
        let b = a.add(&c);
        let fa = apply_spectral_fn(&a, |t| f_k(t, k).unwrap()).unwrap();
        let fb = apply_spectral_fn(&b, |t| f_k(t, k).unwrap()).unwrap();
        prop_assert!(loewner_witness(&fa, &fb).unwrap() >= -1e-8);
    }

    #[test]
    fn spectral_mass_totals_and_energy(seed in any::<u64>(), dim in 1usize..7) {
        let mut rng = Rng::new(seed);
        let t = random_contraction(&mut rng, dim);
        let xi = rng.normal_vec(dim);
        let mu = spectral_mass(&t, &xi).unwrap();
        prop_assert!((mu.total() - dot(&xi, &xi)).abs() < 1e-10);
        let txi = t.matvec(&xi);
        let energy = mu.integrate(|x| 1.0 - x * x);
        prop_assert!((energy - (dot(&xi, &xi) - dot(&txi, &txi))).abs() < 1e-10);
    }

    #[test]
    fn traces_contract_under_any_proper_map(
        seed in any::<u64>(),
        sigma_case in 0usize..4,
        stride in 1usize..5,
    ) {
        let mut rng = Rng::new(seed);
        let dim = 2 + (seed % 4) as usize;
        let chain = seqgen::gen_random_decreasing(dim, 12, seed, seed % 2 == 0).unwrap();
        let kind = match sigma_case {
            0 => SigmaKind::Identity,
            1 => SigmaKind::BlockRepeat(stride),
            2 => SigmaKind::Interleave(stride),
            _ => SigmaKind::Explicit {
                prefix: vec![1 + (seed % 12) as usize, 1, 2],
                tail: Box::new(SigmaKind::BlockRepeat(stride)),
            },
        };
        let map = ProperMap::new(kind, 500).unwrap();
        let xi = rng.unit_vector(dim);
        let trace = trace_convergence(&chain, &map, &xi, 60, 2).unwrap();
        for w in trace.steps.windows(2) {
            prop_assert!(w[1].xi_norm <= w[0].xi_norm + 1e-12);
            prop_assert!(w[1].dist_to_p >= 0.0);
        }
    }

    #[test]
    fn chain_files_roundtrip_exactly(seed in any::<u64>(), dim in 2usize..6) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.json");
        let chain = seqgen::gen_random_decreasing(dim, 5, seed, false).unwrap();
        io::save_chain(&chain, &path).unwrap();
        let back = io::load_chain(&path).unwrap();
        prop_assert_eq!(back.len(), chain.len());
        for (a, b) in back.terms().iter().zip(chain.terms()) {
            prop_assert_eq!(a.max_abs_diff(b), 0.0);
        }
    }
}
