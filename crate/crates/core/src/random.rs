//! Seeded random system scenarios for property checks and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::Scenario;
use crate::error::Result;
use crate::meter::{build_gaussian_cv_meter, build_qubit_meter, MeterModel};
use crate::operator::{c, ComplexMatrix, QuantumState, StateVector, C64};

pub const MIN_RANDOM_POSTSELECTION: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeterChoice {
    Qubit,
    /// `σ_x² = 0.5`, cutoff 60, `ħ = 1`
    GaussianCv,
}

impl MeterChoice {
    pub fn build(self) -> MeterModel {
        match self {
            MeterChoice::Qubit => build_qubit_meter(),
            MeterChoice::GaussianCv => {
                build_gaussian_cv_meter(0.5f64.sqrt(), 60, 1.0).expect("reference Gaussian meter")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateChoice {
    Pure,
    Mixed,
    Either,
}

fn complex(rng: &mut impl Rng) -> C64 {
    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_vector(rng: &mut impl Rng, dim: usize) -> StateVector {
    loop {
        let v = StateVector::from_fn(dim, |_, _| complex(rng));
        let n = v.norm();
        if n > 1e-3 {
            return v.unscale(n);
        }
    }
}

pub fn random_hermitian(rng: &mut impl Rng, dim: usize) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, |_, _| complex(rng));
    (&g + &g.adjoint()).scale_real(0.5)
}

/// Full-rank density matrix `G G† / tr(G G†)`.
pub fn random_density(rng: &mut impl Rng, dim: usize) -> QuantumState {
    let g = ComplexMatrix::from_fn(dim, |_, _| complex(rng));
    let gg = &g * &g.adjoint();
    let tr = gg.trace().re;
    let rho = gg.scale_real(1.0 / tr);
    let rho = (&rho + &rho.adjoint()).scale_real(0.5);
    QuantumState::mixed(rho).expect("G G† is a valid density matrix")
}

pub fn random_state(rng: &mut impl Rng, dim: usize, kind: StateChoice) -> QuantumState {
    let pure = match kind {
        StateChoice::Pure => true,
        StateChoice::Mixed => false,
        StateChoice::Either => rng.random_bool(0.5),
    };
    if pure {
        QuantumState::Pure(random_vector(rng, dim))
    } else {
        random_density(rng, dim)
    }
}

/// Post-selection state with `⟨f|ρ|f⟩ > min_probability`.
pub fn random_postselection(
    rng: &mut impl Rng,
    rho: &QuantumState,
    min_probability: f64,
) -> StateVector {
    loop {
        let f = random_vector(rng, rho.dim());
        if crate::formulas::postselection_probability(rho, &f) > min_probability {
            return f;
        }
    }
}

/// A scenario with system dimension in 2..=4 drawn deterministically from
/// `seed`.
pub fn random_scenario(
    seed: u64,
    meter: MeterChoice,
    state: StateChoice,
    postselect: bool,
) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(2..=4);
    let a = random_hermitian(&mut rng, dim);
    let rho = random_state(&mut rng, dim, state);
    let f = postselect.then(|| random_postselection(&mut rng, &rho, MIN_RANDOM_POSTSELECTION));
    Scenario::new(a, rho, f, meter.build())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulas::postselection_probability;

    #[test]
    fn scenarios_are_reproducible() {
        let a = random_scenario(7, MeterChoice::Qubit, StateChoice::Either, true).unwrap();
        let b = random_scenario(7, MeterChoice::Qubit, StateChoice::Either, true).unwrap();
        assert_eq!(a.observable(), b.observable());
        assert_eq!(a.postselection(), b.postselection());
    }

    #[test]
    fn postselection_is_not_degenerate() {
        for seed in 0..20 {
            let sc = random_scenario(seed, MeterChoice::Qubit, StateChoice::Either, true).unwrap();
            let p = postselection_probability(sc.system_state(), sc.postselection().unwrap());
            assert!(p > MIN_RANDOM_POSTSELECTION);
            assert!((2..=4).contains(&sc.system_dim()));
        }
    }
}
