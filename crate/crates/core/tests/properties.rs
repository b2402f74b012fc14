use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use weakmeter_core::config::{parse_scenario, write_scenario, Complex, ScenarioConfig};
use weakmeter_core::dynamics::{conditional_readout_moments, readout_moments};
use weakmeter_core::formulas::{conditional_variance_growth, variance_growth_decomposition};
use weakmeter_core::operator::{
    c, expectation, hermitian_exponential, tensor_product, variance, ComplexMatrix,
};
use weakmeter_core::random::{
    random_hermitian, random_scenario, random_state, MeterChoice, StateChoice,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_matrix(seed: u64, dim: usize) -> ComplexMatrix {
    use rand::Rng;
    let mut r = rng(seed);
    ComplexMatrix::from_fn(dim, |_, _| {
        c(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tensor_mixed_product(seed in any::<u64>(), da in 2usize..=3, db in 2usize..=3) {
        let a = random_matrix(seed, da);
        let b = random_matrix(seed ^ 1, db);
        let cm = random_matrix(seed ^ 2, da);
        let d = random_matrix(seed ^ 3, db);
        let lhs = &tensor_product(&a, &b) * &tensor_product(&cm, &d);
        let rhs = tensor_product(&(&a * &cm), &(&b * &d));
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn tensor_bilinear(seed in any::<u64>(), k in -3.0f64..3.0) {
        let a = random_matrix(seed, 2);
        let a2 = random_matrix(seed ^ 5, 2);
        let b = random_matrix(seed ^ 7, 3);
        let lhs = tensor_product(&(&a + &a2.scale_real(k)), &b);
        let rhs = &tensor_product(&a, &b) + &tensor_product(&a2, &b).scale_real(k);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn exponential_additivity(seed in any::<u64>(), dim in 2usize..=4, t1 in -3.0f64..3.0, t2 in -3.0f64..3.0) {
        let h = random_hermitian(&mut rng(seed), dim);
        let lhs = &hermitian_exponential(&h, t1).unwrap() * &hermitian_exponential(&h, t2).unwrap();
        let rhs = hermitian_exponential(&h, t1 + t2).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
    }

    #[test]
    fn expectation_linear_and_variance_shift_invariant(
        seed in any::<u64>(), dim in 2usize..=4, k in -2.0f64..2.0, shift in -5.0f64..5.0,
    ) {
        let mut r = rng(seed);
        let o1 = random_hermitian(&mut r, dim);
        let o2 = random_hermitian(&mut r, dim);
        let state = random_state(&mut r, dim, StateChoice::Either);
        let combined = &o1 + &o2.scale_real(k);
        let lhs = expectation(&state, &combined).unwrap();
        let rhs = expectation(&state, &o1).unwrap() + expectation(&state, &o2).unwrap() * k;
        prop_assert!((lhs - rhs).norm() < 1e-12);

        let shifted = &o1 + &ComplexMatrix::identity(dim).scale_real(shift);
        let v0 = variance(&state, &o1).unwrap();
        let v1 = variance(&state, &shifted).unwrap();
        prop_assert!((v0 - v1).abs() < 1e-10 * (1.0 + shift * shift));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn even_meters_give_even_variance(seed in 0u64..10_000, s in 0.0f64..0.5, gaussian in any::<bool>()) {
        let meter = if gaussian { MeterChoice::GaussianCv } else { MeterChoice::Qubit };
        let sc = random_scenario(seed, meter, StateChoice::Either, true).unwrap();
        let plus = readout_moments(&sc, s).variance;
        let minus = readout_moments(&sc, -s).variance;
        prop_assert!((plus - minus).abs() < 1e-9);
        let plus = conditional_readout_moments(&sc, s).unwrap().variance;
        let minus = conditional_readout_moments(&sc, -s).unwrap().variance;
        prop_assert!((plus - minus).abs() < 1e-9);
    }

    #[test]
    fn growth_totals_are_term_sums(seed in 0u64..10_000, gaussian in any::<bool>()) {
        let meter = if gaussian { MeterChoice::GaussianCv } else { MeterChoice::Qubit };
        let sc = random_scenario(seed, meter, StateChoice::Either, true).unwrap();
        for rep in [variance_growth_decomposition(&sc).unwrap(), conditional_variance_growth(&sc).unwrap()] {
            let sum: f64 = rep.terms().iter().sum();
            prop_assert!((rep.total - sum).abs() <= 1e-12 * rep.total.abs().max(1.0));
        }
    }
}

fn complex_strategy() -> impl Strategy<Value = Complex> {
    (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(re, im)| Complex(c(re, im)))
}

fn config_strategy() -> impl Strategy<Value = ScenarioConfig> {
    (
        prop::collection::vec(complex_strategy(), 2),
        prop::collection::vec(complex_strategy(), 2),
        prop::collection::vec(-1.0f64..1.0, 1..6),
        prop_oneof![Just("pauli_x"), Just("pauli_y"), Just("pauli_z"), Just("spin_j")],
        0.5f64..2.0,
        any::<bool>(),
    )
        .prop_filter("non-zero amplitudes", |(psi, f, ..)| {
            psi.iter().map(|z| z.0.norm_sqr()).sum::<f64>() > 1e-3
                && f.iter().map(|z| z.0.norm_sqr()).sum::<f64>() > 1e-3
        })
        .prop_map(|(psi, f, s_values, observable, hbar, qubit)| {
            let normalize = |v: Vec<Complex>| {
                let n = v.iter().map(|z| z.0.norm_sqr()).sum::<f64>().sqrt();
                v.into_iter().map(|z| Complex(z.0 / n)).collect::<Vec<_>>()
            };
            let text = format!(
                "hbar = {hbar}\n[system]\ndimension = 2\nobservable = \"{observable}\"\nstate = [{}]\n\
                 [postselection]\namplitudes = [{}]\n[meter]\n{}\n[scan]\ns_values = {s_values:?}\n",
                quoted(&normalize(psi)),
                quoted(&normalize(f)),
                if qubit { "kind = \"qubit\"" } else { "kind = \"gaussian_cv\"\nsigma_x2 = 0.5\ncutoff = 8" },
            );
            parse_scenario(&text).unwrap()
        })
}

fn quoted(v: &[Complex]) -> String {
    v.iter()
        .map(|z| format!("\"{z}\""))
        .collect::<Vec<_>>()
        .join(", ")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn config_round_trip(cfg in config_strategy()) {
        let text = write_scenario(&cfg).unwrap();
        prop_assert_eq!(parse_scenario(&text).unwrap(), cfg);
    }
}
