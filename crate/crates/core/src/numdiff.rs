//! Central finite differences with Richardson extrapolation, applied to the
//! exact dynamics. Nothing here reads the closed-form formulas: these
//! estimates are the ground truth the formulas are checked against.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    conditional_readout_moments, evolved_meter, phase_shifted_postselection_probability,
    readout_moments, Scenario,
};
use crate::error::{Error, Result};

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_LEVELS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivativeOrder {
    First,
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeEstimate {
    pub value: f64,
    pub step: f64,
    pub order: DerivativeOrder,
    pub richardson_levels: usize,
    /// Difference between the last two extrapolation levels in the final
    /// row of the Richardson table (for zero levels, between the stencils at
    /// `h` and `h/2`).
    pub error_estimate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumdiffSettings {
    pub step: f64,
    pub richardson_levels: usize,
}

impl Default for NumdiffSettings {
    fn default() -> Self {
        NumdiffSettings {
            step: DEFAULT_STEP,
            richardson_levels: DEFAULT_LEVELS,
        }
    }
}

fn finite(v: f64, x: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("function value at {x}")))
    }
}

fn stencil<F>(f: &mut F, x0: f64, f0: f64, h: f64, order: DerivativeOrder) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let plus = finite(f(x0 + h)?, x0 + h)?;
    let minus = finite(f(x0 - h)?, x0 - h)?;
    Ok(match order {
        DerivativeOrder::First => (plus - minus) / (2.0 * h),
        DerivativeOrder::Second => (plus - 2.0 * f0 + minus) / (h * h),
    })
}

/// Fallible variant of [`central_derivative`].
pub fn try_central_derivative<F>(
    mut f: F,
    x0: f64,
    h: f64,
    order: DerivativeOrder,
    richardson_levels: usize,
) -> Result<DerivativeEstimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::NonFinite(format!("step {h}")));
    }
    let f0 = match order {
        DerivativeOrder::First => 0.0,
        DerivativeOrder::Second => finite(f(x0)?, x0)?,
    };

    // Both stencils have even error expansions in h, so each level removes
    // the next power of h².
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(richardson_levels + 1);
    let mut step = h;
    for i in 0..=richardson_levels {
        let mut row = vec![stencil(&mut f, x0, f0, step, order)?];
        let mut factor = 1.0;
        for k in 1..=i {
            factor *= 4.0;
            let refined = (factor * row[k - 1] - table[i - 1][k - 1]) / (factor - 1.0);
            row.push(refined);
        }
        table.push(row);
        step /= 2.0;
    }

    let value = table[richardson_levels][richardson_levels];
    let error_estimate = if richardson_levels == 0 {
        (stencil(&mut f, x0, f0, h / 2.0, order)? - value).abs()
    } else {
        (value - table[richardson_levels][richardson_levels - 1]).abs()
    };
    Ok(DerivativeEstimate {
        value,
        step: h,
        order,
        richardson_levels,
        error_estimate,
    })
}

/// Central-difference derivative of `f` at `x0` with `richardson_levels`
/// rounds of step halving and extrapolation.
pub fn central_derivative<F>(
    f: F,
    x0: f64,
    h: f64,
    order: DerivativeOrder,
    richardson_levels: usize,
) -> Result<DerivativeEstimate>
where
    F: Fn(f64) -> f64,
{
    try_central_derivative(|x| Ok(f(x)), x0, h, order, richardson_levels)
}

/// `d²/ds²` at `s = 0` of the readout variance: the post-selected variance
/// when the scenario has a post-selection, otherwise the unconditioned one.
pub fn fd_variance_growth(sc: &Scenario, h: f64, levels: usize) -> Result<DerivativeEstimate> {
    if sc.postselection().is_some() {
        fd_conditional_variance_growth(sc, h, levels)
    } else {
        fd_unconditioned_variance_growth(sc, h, levels)
    }
}

pub fn fd_unconditioned_variance_growth(
    sc: &Scenario,
    h: f64,
    levels: usize,
) -> Result<DerivativeEstimate> {
    try_central_derivative(
        |s| Ok(readout_moments(sc, s).variance),
        0.0,
        h,
        DerivativeOrder::Second,
        levels,
    )
}

pub fn fd_conditional_variance_growth(
    sc: &Scenario,
    h: f64,
    levels: usize,
) -> Result<DerivativeEstimate> {
    try_central_derivative(
        |s| Ok(conditional_readout_moments(sc, s)?.variance),
        0.0,
        h,
        DerivativeOrder::Second,
        levels,
    )
}

/// `d⟨M(s)⟩/ds` at `s = 0`.
pub fn fd_shift_rate(sc: &Scenario, h: f64, levels: usize) -> Result<DerivativeEstimate> {
    try_central_derivative(
        |s| Ok(readout_moments(sc, s).mean),
        0.0,
        h,
        DerivativeOrder::First,
        levels,
    )
}

/// `d⟨M(s|f)⟩/ds` at `s = 0`.
pub fn fd_conditional_shift_rate(
    sc: &Scenario,
    h: f64,
    levels: usize,
) -> Result<DerivativeEstimate> {
    try_central_derivative(
        |s| Ok(conditional_readout_moments(sc, s)?.mean),
        0.0,
        h,
        DerivativeOrder::First,
        levels,
    )
}

/// Slope at `s = 0` of the unnormalized post-selected readout
/// `⟨(|f⟩⟨f| ⊗ M)(s)⟩`.
pub fn fd_postselected_readout_slope(
    sc: &Scenario,
    h: f64,
    levels: usize,
) -> Result<DerivativeEstimate> {
    sc.require_postselection()?;
    let m = sc.meter().readout().clone();
    try_central_derivative(
        |s| evolved_meter(sc, s).postselected_expectation(&m),
        0.0,
        h,
        DerivativeOrder::First,
        levels,
    )
}

/// `(d²/dφ²)⟨f|U_A(φ)ρU_A(φ)†|f⟩ / ⟨f|ρ|f⟩` at `φ = 0`.
pub fn fd_postselection_curvature(
    sc: &Scenario,
    h: f64,
    levels: usize,
) -> Result<DerivativeEstimate> {
    let p0 = phase_shifted_postselection_probability(sc, 0.0)?;
    if p0.is_nan() || p0 < crate::dynamics::DEGENERATE_POSTSELECTION {
        return Err(Error::DegeneratePostselection { probability: p0 });
    }
    let mut est = try_central_derivative(
        |phi| phase_shifted_postselection_probability(sc, phi),
        0.0,
        h,
        DerivativeOrder::Second,
        levels,
    )?;
    est.value /= p0;
    est.error_estimate /= p0;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meter::{build_gaussian_cv_meter, build_qubit_meter};
    use crate::operator::{c, pauli_z, QuantumState, StateVector};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn plus() -> QuantumState {
        QuantumState::from_amplitudes(&[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]).unwrap()
    }

    #[test]
    fn quadratic_is_exact() {
        let est = central_derivative(|x| x * x, 0.0, 1e-3, DerivativeOrder::Second, 0).unwrap();
        assert_eq!(est.value, 2.0);
        let est = central_derivative(|x| x * x, 0.0, 1e-3, DerivativeOrder::Second, 2).unwrap();
        assert_abs_diff_eq!(est.value, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn sine_slope() {
        let est = central_derivative(f64::sin, 0.0, 1e-3, DerivativeOrder::First, 2).unwrap();
        assert_abs_diff_eq!(est.value, 1.0, epsilon = 1e-10);
        assert_eq!(est.order, DerivativeOrder::First);
        assert_eq!(est.richardson_levels, 2);
    }

    #[test]
    fn cosine_squared_curvature() {
        let est = central_derivative(
            |x: f64| x.cos().powi(2),
            0.0,
            1e-3,
            DerivativeOrder::Second,
            2,
        )
        .unwrap();
        assert_abs_diff_eq!(est.value, -2.0, epsilon = 1e-8);
    }

    #[test]
    fn richardson_error_shrinks() {
        let funcs: [fn(f64) -> f64; 2] = [f64::sin, f64::exp];
        for f in funcs {
            let errs: Vec<f64> = (0..3)
                .map(|l| {
                    central_derivative(f, 0.3, 0.1, DerivativeOrder::First, l)
                        .unwrap()
                        .error_estimate
                })
                .collect();
            assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
        }
    }

    #[test]
    fn non_finite_values_rejected() {
        let err = central_derivative(|x| 1.0 / x, 0.0, 1e-3, DerivativeOrder::Second, 0);
        assert!(matches!(err, Err(Error::NonFinite(_))));
        assert!(central_derivative(f64::sin, 0.0, 0.0, DerivativeOrder::First, 0).is_err());
    }

    #[test]
    fn qubit_unconditioned_growth_vanishes() {
        let sc =
            crate::dynamics::Scenario::new(pauli_z(), plus(), None, build_qubit_meter()).unwrap();
        let est = fd_variance_growth(&sc, DEFAULT_STEP, DEFAULT_LEVELS).unwrap();
        assert_abs_diff_eq!(est.value, 0.0, epsilon = 1e-8);
    }

    #[test]
    fn gaussian_unconditioned_growth() {
        let meter = build_gaussian_cv_meter(0.5f64.sqrt(), 60, 1.0).unwrap();
        let sc = crate::dynamics::Scenario::new(pauli_z(), plus(), None, meter).unwrap();
        let est = fd_variance_growth(&sc, DEFAULT_STEP, DEFAULT_LEVELS).unwrap();
        // ΔA² = 1
        assert_abs_diff_eq!(est.value, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn gaussian_conditional_growth_imaginary_weak_value() {
        // ψ = (|0⟩ + i|1⟩)/√2, f = |+⟩ gives A_w = -i
        let psi =
            QuantumState::from_amplitudes(&[c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)]).unwrap();
        let f = StateVector::from_column_slice(&[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]);
        let meter = build_gaussian_cv_meter(0.5f64.sqrt(), 60, 1.0).unwrap();
        let sc = crate::dynamics::Scenario::new(pauli_z(), psi, Some(f), meter).unwrap();
        let est = fd_variance_growth(&sc, DEFAULT_STEP, DEFAULT_LEVELS).unwrap();
        assert_abs_diff_eq!(est.value, 2.0, epsilon = 2e-4);
    }

    #[test]
    fn curvature_of_rabi_probability() {
        let f = StateVector::from_column_slice(&[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]);
        for hbar in [1.0, 2.0] {
            let meter = crate::meter::build_qubit_meter_with_hbar(hbar).unwrap();
            let sc =
                crate::dynamics::Scenario::new(pauli_z(), plus(), Some(f.clone()), meter).unwrap();
            let est = fd_postselection_curvature(&sc, DEFAULT_STEP, DEFAULT_LEVELS).unwrap();
            assert_abs_diff_eq!(est.value, -2.0 / (hbar * hbar), epsilon = 1e-8);
        }
    }

    #[test]
    fn stationary_curvature_is_zero() {
        let f = StateVector::from_column_slice(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let sc = crate::dynamics::Scenario::new(
            pauli_z(),
            QuantumState::maximally_mixed(2),
            Some(f),
            build_qubit_meter(),
        )
        .unwrap();
        let est = fd_postselection_curvature(&sc, DEFAULT_STEP, DEFAULT_LEVELS).unwrap();
        assert_abs_diff_eq!(est.value, 0.0, epsilon = 1e-8);
    }
}
