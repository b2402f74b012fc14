//! Meter systems: readout `M`, generator `B`, initial meter state and an
//! optional inversion unitary, together with the derived response and
//! saturation operators and the readout/generator correlation `K_MB`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{
    anticommutator, c, commutator, expectation, pauli_x, pauli_y, pauli_z, ComplexMatrix,
    QuantumState, Spectrum, StateVector, C64,
};

/// Residual threshold for every symmetry flag.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Largest population allowed above the nominal Fock cutoff.
pub const TRUNCATION_TOL: f64 = 1e-10;
/// Extra Fock levels carried above the cutoff so that commutator identities
/// only break in levels the state never populates.
pub const FOCK_PADDING: usize = 4;

/// Expectation values of the derived meter operators in the initial meter
/// state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeterMoments {
    pub readout_mean: f64,
    pub readout_second_moment: f64,
    /// `⟨Γ⟩`
    pub response_mean: f64,
    /// `ΔΓ²`
    pub response_variance: f64,
    /// `⟨MΘ + ΘM⟩`
    pub saturation_correlation: f64,
    /// `⟨BM + MB⟩`
    pub readout_generator_correlation: f64,
    pub generator_second_moment: f64,
    /// `½⟨B²M² + M²B²⟩ - ⟨B²⟩⟨M²⟩`
    pub correlation_kmb: f64,
}

#[derive(Clone, Debug)]
pub struct MeterModel {
    readout: ComplexMatrix,
    generator: ComplexMatrix,
    state: QuantumState,
    inversion: Option<ComplexMatrix>,
    hbar: f64,
    fock_cutoff: Option<usize>,
    response: ComplexMatrix,
    saturation: ComplexMatrix,
    generator_spectrum: Spectrum,
    moments: MeterMoments,
}

impl MeterModel {
    pub fn dim(&self) -> usize {
        self.readout.dim()
    }

    pub fn readout(&self) -> &ComplexMatrix {
        &self.readout
    }

    pub fn generator(&self) -> &ComplexMatrix {
        &self.generator
    }

    pub fn state(&self) -> &QuantumState {
        &self.state
    }

    pub fn inversion(&self) -> Option<&ComplexMatrix> {
        self.inversion.as_ref()
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Nominal cutoff for meters built in a truncated Fock basis.
    pub fn fock_cutoff(&self) -> Option<usize> {
        self.fock_cutoff
    }

    pub fn generator_spectrum(&self) -> &Spectrum {
        &self.generator_spectrum
    }

    pub fn moments(&self) -> &MeterMoments {
        &self.moments
    }
}

/// Single-qubit meter with `M = σx`, `B = ħσy/2`, state `|0⟩` and
/// inversion `σz`; the response is `σz` and the saturation equals `M`.
pub fn build_qubit_meter() -> MeterModel {
    build_qubit_meter_with_hbar(1.0).expect("qubit meter is valid")
}

pub fn build_qubit_meter_with_hbar(hbar: f64) -> Result<MeterModel> {
    build_custom_meter(
        pauli_x(),
        pauli_y().scale_real(hbar / 2.0),
        QuantumState::basis(2, 0),
        Some(pauli_z()),
        hbar,
    )
}

/// Truncated ladder operators for a Fock space with `dim` levels:
/// `(x, p, parity)` with `x = σ(a + a†)` and `p = (ħ/2σ) i(a† - a)`.
pub fn fock_quadratures(
    sigma_x: f64,
    dim: usize,
    hbar: f64,
) -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let lowering = ComplexMatrix::from_fn(dim, |i, j| {
        if j == i + 1 {
            c((j as f64).sqrt(), 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let raising = lowering.adjoint();
    let x = (&lowering + &raising).scale_real(sigma_x);
    let p = (&raising - &lowering).scale(c(0.0, hbar / (2.0 * sigma_x)));
    let parity: Vec<f64> = (0..dim)
        .map(|n| if n % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    (x, p, ComplexMatrix::from_real_diagonal(&parity))
}

/// Gaussian position meter: the vacuum of a reference oscillator whose
/// ground state has position variance `sigma_x²`, with `M = x` and `B = p`.
pub fn build_gaussian_cv_meter(sigma_x: f64, cutoff: usize, hbar: f64) -> Result<MeterModel> {
    build_fock_meter(sigma_x, cutoff, &[c(1.0, 0.0)], hbar)
}

/// Position/momentum meter in an arbitrary Fock-basis state given by its
/// leading amplitudes. The amplitudes are zero-padded to the working
/// dimension `cutoff + FOCK_PADDING`.
pub fn build_fock_meter(
    sigma_x: f64,
    cutoff: usize,
    amplitudes: &[C64],
    hbar: f64,
) -> Result<MeterModel> {
    if !sigma_x.is_finite() || sigma_x <= 0.0 {
        return Err(Error::InvalidState(format!(
            "sigma_x must be positive, got {sigma_x}"
        )));
    }
    if cutoff < 2 {
        return Err(Error::InvalidState(format!(
            "Fock cutoff must be at least 2, got {cutoff}"
        )));
    }
    let dim = cutoff + FOCK_PADDING;
    if amplitudes.len() > dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: amplitudes.len(),
        });
    }
    let mut v = StateVector::zeros(dim);
    for (n, &a) in amplitudes.iter().enumerate() {
        v[n] = a;
    }
    let state = QuantumState::pure(v)?;
    check_truncation(&state, cutoff)?;
    let (x, p, parity) = fock_quadratures(sigma_x, dim, hbar);
    let mut meter = build_custom_meter(x, p, state, Some(parity), hbar)?;
    meter.fock_cutoff = Some(cutoff);
    Ok(meter)
}

/// Population of Fock levels strictly above `cutoff`.
pub fn fock_tail_probability(state: &QuantumState, cutoff: usize) -> f64 {
    let rho = state.density_matrix();
    (cutoff + 1..state.dim()).map(|n| rho.get(n, n).re).sum()
}

fn check_truncation(state: &QuantumState, cutoff: usize) -> Result<()> {
    let tail = fock_tail_probability(state, cutoff);
    if tail > TRUNCATION_TOL {
        Err(Error::TruncationLeak { tail, cutoff })
    } else {
        Ok(())
    }
}

pub fn build_custom_meter(
    readout: ComplexMatrix,
    generator: ComplexMatrix,
    state: QuantumState,
    inversion: Option<ComplexMatrix>,
    hbar: f64,
) -> Result<MeterModel> {
    if !hbar.is_finite() || hbar <= 0.0 {
        return Err(Error::InvalidState(format!(
            "hbar must be positive, got {hbar}"
        )));
    }
    let dim = readout.dim();
    for found in [generator.dim(), state.dim()] {
        if found != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found,
            });
        }
    }
    readout.require_hermitian("meter readout")?;
    generator.require_hermitian("meter generator")?;
    if let Some(u) = &inversion {
        if u.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: u.dim(),
            });
        }
        u.require_unitary("meter inversion")?;
    }

    let i_over_hbar = c(0.0, 1.0 / hbar);
    let response = commutator(&generator, &readout)?.scale(i_over_hbar);
    let saturation = commutator(&generator, &response)?.scale(-i_over_hbar);
    let generator_spectrum = generator.eigh()?;
    let moments = compute_moments(&readout, &generator, &response, &saturation, &state)?;

    Ok(MeterModel {
        readout,
        generator,
        state,
        inversion,
        hbar,
        fock_cutoff: None,
        response,
        saturation,
        generator_spectrum,
        moments,
    })
}

fn compute_moments(
    m: &ComplexMatrix,
    b: &ComplexMatrix,
    gamma: &ComplexMatrix,
    theta: &ComplexMatrix,
    state: &QuantumState,
) -> Result<MeterMoments> {
    let ev = |o: &ComplexMatrix| -> Result<f64> { Ok(expectation(state, o)?.re) };
    let m2 = m * m;
    let b2 = b * b;
    let response_mean = ev(gamma)?;
    let kmb_sym = ev(&anticommutator(&b2, &m2)?)? / 2.0;
    let generator_second_moment = ev(&b2)?;
    let readout_second_moment = ev(&m2)?;
    Ok(MeterMoments {
        readout_mean: ev(m)?,
        readout_second_moment,
        response_mean,
        response_variance: ev(&(gamma * gamma))? - response_mean * response_mean,
        saturation_correlation: ev(&anticommutator(m, theta)?)?,
        readout_generator_correlation: ev(&anticommutator(b, m)?)?,
        generator_second_moment,
        correlation_kmb: kmb_sym - generator_second_moment * readout_second_moment,
    })
}

/// `Γ = (i/ħ)[B, M]`
pub fn meter_response(m: &MeterModel) -> &ComplexMatrix {
    &m.response
}

/// `Θ = -(i/ħ)[B, Γ]`
pub fn meter_saturation(m: &MeterModel) -> &ComplexMatrix {
    &m.saturation
}

pub fn meter_correlation_kmb(m: &MeterModel) -> f64 {
    m.moments.correlation_kmb
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryResiduals {
    /// `‖U†MU + M‖`
    pub spectrum: Option<f64>,
    /// `‖U|φ⟩ - |φ⟩‖`, or `‖UρU† - ρ‖` for mixed meter states
    pub state_parity: Option<f64>,
    /// `‖U†BU + B‖`
    pub generator_odd: Option<f64>,
    /// `|⟨BM + MB⟩|`
    pub unbiased_mb: f64,
}

/// Outcome of the meter symmetry checks. The inversion-based flags are
/// `None` when the meter carries no inversion unitary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub spectrum_symmetric: Option<bool>,
    pub state_parity_ok: Option<bool>,
    pub generator_odd_ok: Option<bool>,
    pub unbiased_mb_ok: bool,
    pub residuals: SymmetryResiduals,
}

impl SymmetryReport {
    /// True when every applicable check passes and the inversion is present.
    pub fn all_ok(&self) -> bool {
        self.inversion_checks_ok() && self.unbiased_mb_ok
    }

    /// Spectrum, parity and generator checks all pass (false when absent).
    pub fn inversion_checks_ok(&self) -> bool {
        [
            self.spectrum_symmetric,
            self.state_parity_ok,
            self.generator_odd_ok,
        ]
        .iter()
        .all(|f| *f == Some(true))
    }

    /// Human-readable advisories for every failed or unavailable check.
    pub fn advisories(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut flag = |name: &str, value: Option<bool>, residual: Option<f64>| match value {
            Some(true) => {}
            Some(false) => out.push(format!(
                "{name} check failed (residual {:.3e})",
                residual.unwrap_or(f64::NAN)
            )),
            None => out.push(format!(
                "{name} check not applicable: meter has no inversion unitary"
            )),
        };
        flag(
            "spectrum_symmetric",
            self.spectrum_symmetric,
            self.residuals.spectrum,
        );
        flag(
            "state_parity",
            self.state_parity_ok,
            self.residuals.state_parity,
        );
        flag(
            "generator_odd",
            self.generator_odd_ok,
            self.residuals.generator_odd,
        );
        flag(
            "unbiased_mb",
            Some(self.unbiased_mb_ok),
            Some(self.residuals.unbiased_mb),
        );
        out
    }
}

pub fn validate_meter_symmetry(m: &MeterModel) -> SymmetryReport {
    let unbiased = m.moments.readout_generator_correlation.abs();
    let (spectrum, state_parity, generator_odd) = match &m.inversion {
        None => (None, None, None),
        Some(u) => {
            let ud = u.adjoint();
            let conj = |o: &ComplexMatrix| &(&ud * o) * u;
            let spec = (&conj(&m.readout) + &m.readout).operator_norm();
            let gen = (&conj(&m.generator) + &m.generator).operator_norm();
            let parity = match &m.state {
                QuantumState::Pure(v) => (u.apply(v) - v).norm(),
                mixed @ QuantumState::Mixed(rho) => {
                    (&mixed.transformed(u).density_matrix() - rho).operator_norm()
                }
            };
            (Some(spec), Some(parity), Some(gen))
        }
    };
    let ok = |r: Option<f64>| r.map(|x| x < SYMMETRY_TOL);
    SymmetryReport {
        spectrum_symmetric: ok(spectrum),
        state_parity_ok: ok(state_parity),
        generator_odd_ok: ok(generator_odd),
        unbiased_mb_ok: unbiased < SYMMETRY_TOL,
        residuals: SymmetryResiduals {
            spectrum,
            state_parity,
            generator_odd,
            unbiased_mb: unbiased,
        },
    }
}
