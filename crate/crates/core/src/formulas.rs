//! Closed-form first and second derivatives of the meter readout statistics
//! at zero interaction strength, with term-by-term reporting.
//!
//! Notation used in the docs below, for system state `ρ`, observable `A` and
//! post-selection `|f⟩` with `p = ⟨f|ρ|f⟩`:
//!
//! * weak value `A_w = ⟨f|Aρ|f⟩ / p`
//! * sandwich `⟨f|AρA|f⟩ / p`
//! * curvature `(d²/dφ²)⟨f|U_A(φ)ρU_A(φ)†|f⟩ / p` with `U_A(φ) = exp(-(i/ħ)φA)`

use serde::{Deserialize, Serialize};

use crate::dynamics::{Scenario, DEGENERATE_POSTSELECTION};
use crate::error::{Error, Result};
use crate::meter::{validate_meter_symmetry, SymmetryReport};
use crate::numdiff::DerivativeEstimate;
use crate::operator::{
    anticommutator, c, commutator, expectation, ComplexMatrix, QuantumState, StateVector, C64,
};

/// Agreement required between the two curvature routes, relative to
/// `max(1, |curvature|)`.
pub const CURVATURE_ROUTE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthKind {
    Unconditioned,
    Conditional,
}

/// Decomposition of `d²(variance)/ds²` at `s = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub kind: GrowthKind,
    pub total: f64,
    /// `2⟨Γ⟩²·ΔA²`, or `2⟨Γ⟩²·ε²_A(f)` when conditional
    pub term_linear_response: f64,
    /// `2ΔΓ²·⟨A²⟩`, or `2ΔΓ²·sandwich`
    pub term_response_fluctuation: f64,
    /// `-⟨MΘ + ΘM⟩·⟨A²⟩`, or `-⟨MΘ + ΘM⟩·sandwich`
    pub term_saturation: f64,
    /// `K_MB·curvature`; zero when unconditioned
    pub term_bayesian_update: f64,
    pub oracle: Option<f64>,
    pub oracle_error_estimate: Option<f64>,
    /// `|total - oracle|`
    pub oracle_abs_diff: Option<f64>,
    /// Violated meter preconditions; the terms are still evaluated.
    pub advisories: Vec<String>,
}

impl GrowthReport {
    fn new(kind: GrowthKind, terms: [f64; 4], advisories: Vec<String>) -> Self {
        GrowthReport {
            kind,
            total: terms.iter().sum(),
            term_linear_response: terms[0],
            term_response_fluctuation: terms[1],
            term_saturation: terms[2],
            term_bayesian_update: terms[3],
            oracle: None,
            oracle_error_estimate: None,
            oracle_abs_diff: None,
            advisories,
        }
    }

    pub fn terms(&self) -> [f64; 4] {
        [
            self.term_linear_response,
            self.term_response_fluctuation,
            self.term_saturation,
            self.term_bayesian_update,
        ]
    }

    pub fn with_oracle(mut self, est: &DerivativeEstimate) -> Self {
        self.oracle = Some(est.value);
        self.oracle_error_estimate = Some(est.error_estimate);
        self.oracle_abs_diff = Some((self.total - est.value).abs());
        self
    }

    /// `|total - oracle| / |oracle|`
    pub fn relative_error(&self) -> Option<f64> {
        self.oracle.map(|o| (self.total - o).abs() / o.abs())
    }
}

/// Weak-value statistics of a pre- and post-selected system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakStatistics {
    pub postselection_probability: f64,
    pub weak_value: C64,
    pub sandwiched_second_moment: f64,
    pub weak_value_of_a2: C64,
    /// Ozawa uncertainty `ε²_A(f)`
    pub ozawa: f64,
    pub curvature: f64,
    /// Dynamic pseudovariance `-(ħ²/2)·curvature`
    pub v_dyn: f64,
    /// `Re(wv(A²) - A_w²)`, pure states only
    pub weak_variance: Option<f64>,
}

/// `⟨f|ρ|f⟩`
pub fn postselection_probability(rho: &QuantumState, f: &StateVector) -> f64 {
    match rho {
        QuantumState::Pure(psi) => f.dotc(psi).norm_sqr(),
        QuantumState::Mixed(m) => f.dotc(&m.apply(f)).re,
    }
}

fn checked_probability(rho: &QuantumState, f: &StateVector) -> Result<f64> {
    if f.len() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: f.len(),
        });
    }
    let p = postselection_probability(rho, f);
    if p >= DEGENERATE_POSTSELECTION {
        Ok(p)
    } else {
        Err(Error::DegeneratePostselection { probability: p })
    }
}

/// `⟨f|Oρ|f⟩ / ⟨f|ρ|f⟩`
fn operator_weak_value(rho: &QuantumState, o: &ComplexMatrix, f: &StateVector) -> Result<C64> {
    let p = checked_probability(rho, f)?;
    let of = o.adjoint().apply(f);
    let num = match rho {
        QuantumState::Pure(psi) => of.dotc(psi) * psi.dotc(f),
        QuantumState::Mixed(m) => of.dotc(&m.apply(f)),
    };
    Ok(num / p)
}

pub fn weak_value(rho: &QuantumState, a: &ComplexMatrix, f: &StateVector) -> Result<C64> {
    operator_weak_value(rho, a, f)
}

/// Weak value of `A²`.
pub fn weak_value_of_square(rho: &QuantumState, a: &ComplexMatrix, f: &StateVector) -> Result<C64> {
    operator_weak_value(rho, &(a * a), f)
}

/// `⟨f|AρA|f⟩ / ⟨f|ρ|f⟩`, which collapses to `|A_w|²` for pure states.
pub fn sandwiched_second_moment(
    rho: &QuantumState,
    a: &ComplexMatrix,
    f: &StateVector,
) -> Result<f64> {
    let p = checked_probability(rho, f)?;
    let af = a.apply(f);
    Ok(match rho {
        QuantumState::Pure(psi) => {
            let value = af.dotc(psi).norm_sqr() / p;
            debug_assert!({
                let rho_m = rho.density_matrix();
                let mixed_form = af.dotc(&rho_m.apply(&af)).re / p;
                (mixed_form - value).abs() <= 1e-12 * value.abs().max(1.0)
            });
            value
        }
        QuantumState::Mixed(m) => af.dotc(&m.apply(&af)).re / p,
    })
}

/// `ε²_A(f) = sandwich - (Re A_w)²`, clamped at zero.
pub fn ozawa_uncertainty(rho: &QuantumState, a: &ComplexMatrix, f: &StateVector) -> Result<f64> {
    let sandwich = sandwiched_second_moment(rho, a, f)?;
    let re = weak_value(rho, a, f)?.re;
    Ok((sandwich - re * re).max(0.0))
}

/// The two independent evaluations of the normalized post-selection
/// curvature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureRoutes {
    /// `-(1/ħ²)⟨[A,[A,|f⟩⟨f|]]⟩ / p`
    pub commutator: f64,
    /// `-(2/ħ²)(Re wv(A²) - sandwich)`
    pub weak_value: f64,
}

pub fn curvature_routes(
    rho: &QuantumState,
    a: &ComplexMatrix,
    f: &StateVector,
    hbar: f64,
) -> Result<CurvatureRoutes> {
    let p = checked_probability(rho, f)?;
    let proj = ComplexMatrix::projector(f);
    let double = commutator(a, &commutator(a, &proj)?)?;
    let commutator_route = -expectation(rho, &double)?.re / (hbar * hbar * p);
    let wv2 = weak_value_of_square(rho, a, f)?.re;
    let sandwich = sandwiched_second_moment(rho, a, f)?;
    Ok(CurvatureRoutes {
        commutator: commutator_route,
        weak_value: -2.0 / (hbar * hbar) * (wv2 - sandwich),
    })
}

/// Normalized curvature of the post-selection probability under the system
/// dynamics generated by `A`, from the double-commutator route after
/// checking it against the weak-value route.
pub fn postselection_curvature(
    rho: &QuantumState,
    a: &ComplexMatrix,
    f: &StateVector,
    hbar: f64,
) -> Result<f64> {
    let routes = curvature_routes(rho, a, f, hbar)?;
    let scale = routes.commutator.abs().max(1.0);
    if (routes.commutator - routes.weak_value).abs() > CURVATURE_ROUTE_TOL * scale {
        return Err(Error::RouteDisagreement {
            commutator: routes.commutator,
            weak_value: routes.weak_value,
        });
    }
    Ok(routes.commutator)
}

/// `V_dyn = -(ħ²/2)·curvature`. For pure states the value is also checked
/// against `Re wv(A²) - |A_w|²`.
pub fn dynamic_pseudovariance(
    rho: &QuantumState,
    a: &ComplexMatrix,
    f: &StateVector,
    hbar: f64,
) -> Result<f64> {
    let v_dyn = -0.5 * hbar * hbar * postselection_curvature(rho, a, f, hbar)?;
    if let QuantumState::Pure(_) = rho {
        let pure_form = weak_value_of_square(rho, a, f)?.re - weak_value(rho, a, f)?.norm_sqr();
        if (pure_form - v_dyn).abs() > 1e-10 * v_dyn.abs().max(1.0) {
            return Err(Error::RouteDisagreement {
                commutator: v_dyn,
                weak_value: pure_form,
            });
        }
    }
    Ok(v_dyn)
}

/// `Re(wv(A²) - A_w²)` for a pure pre-selection.
pub fn weak_variance(psi: &QuantumState, a: &ComplexMatrix, f: &StateVector) -> Result<f64> {
    if psi.kind() != crate::operator::StateKind::Pure {
        return Err(Error::PureStateRequired("weak variance"));
    }
    let aw = weak_value(psi, a, f)?;
    let aw2 = weak_value_of_square(psi, a, f)?;
    Ok((aw2 - aw * aw).re)
}

/// `Re wv(A²) + sandwich - 2(Re A_w)²`: the conditional growth for any
/// meter with `Γ = I`, `Θ = 0` and `K_MB = -ħ²/2`.
pub fn gaussian_conditional_growth(
    rho: &QuantumState,
    a: &ComplexMatrix,
    f: &StateVector,
) -> Result<f64> {
    let wv2 = weak_value_of_square(rho, a, f)?.re;
    let sandwich = sandwiched_second_moment(rho, a, f)?;
    let re = weak_value(rho, a, f)?.re;
    Ok(wv2 + sandwich - 2.0 * re * re)
}

pub fn weak_statistics(sc: &Scenario) -> Result<WeakStatistics> {
    let f = sc.require_postselection()?;
    let rho = sc.system_state();
    let a = sc.observable();
    let hbar = sc.hbar();
    let curvature = postselection_curvature(rho, a, f, hbar)?;
    Ok(WeakStatistics {
        postselection_probability: checked_probability(rho, f)?,
        weak_value: weak_value(rho, a, f)?,
        sandwiched_second_moment: sandwiched_second_moment(rho, a, f)?,
        weak_value_of_a2: weak_value_of_square(rho, a, f)?,
        ozawa: ozawa_uncertainty(rho, a, f)?,
        curvature,
        v_dyn: dynamic_pseudovariance(rho, a, f, hbar)?,
        weak_variance: match rho.kind() {
            crate::operator::StateKind::Pure => Some(weak_variance(rho, a, f)?),
            crate::operator::StateKind::Mixed => None,
        },
    })
}

/// Advisories for meters that violate the inversion-symmetry conditions
/// (and, for conditional formulas, `⟨BM + MB⟩ = 0`).
pub fn precondition_advisories(report: &SymmetryReport, conditional: bool) -> Vec<String> {
    let mut out: Vec<String> = report
        .advisories()
        .into_iter()
        .filter(|a| conditional || !a.starts_with("unbiased_mb"))
        .collect();
    out.sort();
    out
}

/// `⟨dM/ds⟩ = ⟨Γ⟩⟨A⟩`
pub fn unconditioned_shift_rate(sc: &Scenario) -> Result<f64> {
    let a_mean = expectation(sc.system_state(), sc.observable())?.re;
    Ok(sc.meter().moments().response_mean * a_mean)
}

/// Unconditioned second derivative of the readout variance.
pub fn variance_growth_decomposition(sc: &Scenario) -> Result<GrowthReport> {
    let rho = sc.system_state();
    let a = sc.observable();
    let a_mean = expectation(rho, a)?.re;
    let a_sq = expectation(rho, &(a * a))?.re;
    let dm = sc.meter().moments();
    let advisories = precondition_advisories(&validate_meter_symmetry(sc.meter()), false);
    Ok(GrowthReport::new(
        GrowthKind::Unconditioned,
        [
            2.0 * dm.response_mean.powi(2) * (a_sq - a_mean * a_mean),
            2.0 * dm.response_variance * a_sq,
            -dm.saturation_correlation * a_sq,
            0.0,
        ],
        advisories,
    ))
}

/// `d⟨M(s|f)⟩/ds = ⟨Γ⟩·Re A_w`, assuming `⟨BM + MB⟩ = 0`.
pub fn conditional_shift_rate(sc: &Scenario) -> Result<f64> {
    let f = sc.require_postselection()?;
    let aw = weak_value(sc.system_state(), sc.observable(), f)?;
    Ok(sc.meter().moments().response_mean * aw.re)
}

/// Second derivative of the post-selected readout variance.
pub fn conditional_variance_growth(sc: &Scenario) -> Result<GrowthReport> {
    let f = sc.require_postselection()?;
    let rho = sc.system_state();
    let a = sc.observable();
    let dm = sc.meter().moments();
    let ozawa = ozawa_uncertainty(rho, a, f)?;
    let sandwich = sandwiched_second_moment(rho, a, f)?;
    let curvature = postselection_curvature(rho, a, f, sc.hbar())?;
    let advisories = precondition_advisories(&validate_meter_symmetry(sc.meter()), true);
    Ok(GrowthReport::new(
        GrowthKind::Conditional,
        [
            2.0 * dm.response_mean.powi(2) * ozawa,
            2.0 * dm.response_variance * sandwich,
            -dm.saturation_correlation * sandwich,
            dm.correlation_kmb * curvature,
        ],
        advisories,
    ))
}

/// Split of `d/ds ⟨(|f⟩⟨f| ⊗ M)(s)⟩` at `s = 0` into the weak-value term
/// `½⟨{A, |f⟩⟨f|}⟩⟨Γ⟩` and the back-action term
/// `⟨(i/ħ)[A, |f⟩⟨f|]⟩·½⟨BM + MB⟩`.
pub fn projector_product_derivative(sc: &Scenario) -> Result<(f64, f64)> {
    let f = sc.require_postselection()?;
    let rho = sc.system_state();
    let a = sc.observable();
    let proj = ComplexMatrix::projector(f);
    let dm = sc.meter().moments();
    let anti = expectation(rho, &anticommutator(a, &proj)?)?.re;
    let rate = expectation(rho, &commutator(a, &proj)?.scale(c(0.0, 1.0 / sc.hbar())))?.re;
    Ok((
        0.5 * anti * dm.response_mean,
        rate * 0.5 * dm.readout_generator_correlation,
    ))
}
