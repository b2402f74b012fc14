use weakmeter_core::formulas::{
    conditional_shift_rate, conditional_variance_growth, curvature_routes,
    gaussian_conditional_growth, projector_product_derivative, unconditioned_shift_rate,
    variance_growth_decomposition, weak_statistics,
};
use weakmeter_core::numdiff::{
    fd_conditional_shift_rate, fd_conditional_variance_growth, fd_postselected_readout_slope,
    fd_postselection_curvature, fd_shift_rate, fd_unconditioned_variance_growth, DEFAULT_LEVELS,
    DEFAULT_STEP,
};
use weakmeter_core::random::{random_scenario, MeterChoice, StateChoice};

const METERS: [MeterChoice; 2] = [MeterChoice::Qubit, MeterChoice::GaussianCv];

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn unconditioned_growth_matches_oracle() {
    for meter in METERS {
        for seed in 0..10 {
            let sc = random_scenario(seed, meter, StateChoice::Either, false).unwrap();
            let rep = variance_growth_decomposition(&sc).unwrap();
            let fd = fd_unconditioned_variance_growth(&sc, DEFAULT_STEP, DEFAULT_LEVELS).unwrap();
            assert!(
                close(rep.total, fd.value, 1e-6),
                "{meter:?} seed {seed}: {} vs {}",
                rep.total,
                fd.value
            );
        }
    }
}

#[test]
fn conditional_growth_matches_oracle() {
    for meter in METERS {
        for seed in 100..110 {
            let sc = random_scenario(seed, meter, StateChoice::Either, true).unwrap();
            let rep = conditional_variance_growth(&sc).unwrap();
            let fd = fd_conditional_variance_growth(&sc, DEFAULT_STEP, DEFAULT_LEVELS).unwrap();
            assert!(
                close(rep.total, fd.value, 1e-6),
                "{meter:?} seed {seed}: {} vs {}",
                rep.total,
                fd.value
            );
        }
    }
}

#[test]
fn shift_rates_match_oracle() {
    for meter in METERS {
        for seed in 200..206 {
            let sc = random_scenario(seed, meter, StateChoice::Either, true).unwrap();
            let fd = fd_shift_rate(&sc, DEFAULT_STEP, DEFAULT_LEVELS).unwrap();
            assert!(close(
                unconditioned_shift_rate(&sc).unwrap(),
                fd.value,
                1e-8
            ));
            let fd = fd_conditional_shift_rate(&sc, DEFAULT_STEP, DEFAULT_LEVELS).unwrap();
            assert!(close(conditional_shift_rate(&sc).unwrap(), fd.value, 1e-8));
        }
    }
}

#[test]
fn projector_product_split_matches_oracle() {
    for meter in METERS {
        for seed in 300..306 {
            let sc = random_scenario(seed, meter, StateChoice::Either, true).unwrap();
            let (weak, back) = projector_product_derivative(&sc).unwrap();
            let fd = fd_postselected_readout_slope(&sc, DEFAULT_STEP, DEFAULT_LEVELS).unwrap();
            assert!(close(weak + back, fd.value, 1e-8));
            // Both reference meters have an unbiased readout-generator correlation.
            assert!(back.abs() < 1e-9);
        }
    }
}

#[test]
fn curvature_routes_match_oracle() {
    for seed in 400..420 {
        let sc = random_scenario(seed, MeterChoice::Qubit, StateChoice::Either, true).unwrap();
        let f = sc.postselection().unwrap();
        let routes = curvature_routes(sc.system_state(), sc.observable(), f, sc.hbar()).unwrap();
        let fd = fd_postselection_curvature(&sc, DEFAULT_STEP, DEFAULT_LEVELS).unwrap();
        assert!(close(routes.commutator, routes.weak_value, 1e-10));
        assert!(close(routes.commutator, fd.value, 1e-7));
    }
}

#[test]
fn pure_state_weak_statistics() {
    for seed in 500..530 {
        let sc = random_scenario(seed, MeterChoice::Qubit, StateChoice::Pure, true).unwrap();
        let ws = weak_statistics(&sc).unwrap();
        let aw = ws.weak_value;
        assert!(close(ws.ozawa, aw.im * aw.im, 1e-10));
        assert!(close(
            ws.v_dyn,
            ws.weak_value_of_a2.re - aw.norm_sqr(),
            1e-10
        ));
        // The weak variance carries the squared imaginary part twice.
        assert!(close(
            ws.weak_variance.unwrap(),
            2.0 * ws.ozawa + ws.v_dyn,
            1e-10
        ));
    }
}

#[test]
fn gaussian_conditional_growth_is_weak_variance_for_pure_states() {
    for seed in 600..606 {
        let sc = random_scenario(seed, MeterChoice::GaussianCv, StateChoice::Pure, true).unwrap();
        let rep = conditional_variance_growth(&sc).unwrap();
        let ws = weak_statistics(&sc).unwrap();
        assert!(
            close(rep.total, ws.weak_variance.unwrap(), 1e-6),
            "seed {seed}"
        );
    }
}

#[test]
fn gaussian_closure_for_any_state() {
    for seed in 700..706 {
        let sc = random_scenario(seed, MeterChoice::GaussianCv, StateChoice::Mixed, true).unwrap();
        let f = sc.postselection().unwrap();
        let closed = gaussian_conditional_growth(sc.system_state(), sc.observable(), f).unwrap();
        let rep = conditional_variance_growth(&sc).unwrap();
        assert!((rep.total - closed).abs() < 2e-4, "seed {seed}");
    }
}

#[test]
fn pseudovariance_takes_both_signs() {
    let v: Vec<f64> = (800..840)
        .map(|seed| {
            let sc = random_scenario(seed, MeterChoice::Qubit, StateChoice::Either, true).unwrap();
            weak_statistics(&sc).unwrap().v_dyn
        })
        .collect();
    assert!(
        v.iter().any(|&x| x > 0.0) && v.iter().any(|&x| x < 0.0),
        "{v:?}"
    );
}
