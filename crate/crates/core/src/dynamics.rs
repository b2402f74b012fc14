//! Exact evolution of the joint system ⊗ meter state under
//! `U(s) = exp(-(i/ħ) s A⊗B)` and the readout statistics that follow.
//!
//! The eigenbasis of `A⊗B` is the product of the eigenbases of `A` and `B`
//! with eigenvalues `a_k b_j`, so the evolution is applied as a phase
//! `exp(-i s a_k b_j / ħ)` on product-basis coefficients. Each mixed input
//! is split into weighted pure components which evolve independently.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meter::MeterModel;
use crate::operator::{
    c, hermitian_exponential, tensor_product, ComplexMatrix, QuantumState, Spectrum, StateVector,
    C64, NORM_TOL,
};

/// Post-selection probabilities below this make conditional moments
/// undefined.
pub const DEGENERATE_POSTSELECTION: f64 = 1e-12;
/// Generator eigenvalues closer than this share one joint-statistics row.
pub const EIGENVALUE_MERGE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct Scenario {
    observable: ComplexMatrix,
    system_state: QuantumState,
    postselection: Option<StateVector>,
    meter: MeterModel,
    observable_spectrum: Spectrum,
}

impl Scenario {
    /// The scenario adopts the meter's `ħ`.
    pub fn new(
        observable: ComplexMatrix,
        system_state: QuantumState,
        postselection: Option<StateVector>,
        meter: MeterModel,
    ) -> Result<Self> {
        observable.require_hermitian("system observable")?;
        let dim = observable.dim();
        if system_state.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: system_state.dim(),
            });
        }
        if let Some(f) = &postselection {
            if f.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: f.len(),
                });
            }
            let norm = f.norm();
            if (norm - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidState(format!(
                    "post-selection norm {norm:.15} differs from 1"
                )));
            }
        }
        let observable_spectrum = observable.eigh()?;
        Ok(Scenario {
            observable,
            system_state,
            postselection,
            meter,
            observable_spectrum,
        })
    }

    pub fn observable(&self) -> &ComplexMatrix {
        &self.observable
    }

    pub fn system_state(&self) -> &QuantumState {
        &self.system_state
    }

    pub fn postselection(&self) -> Option<&StateVector> {
        self.postselection.as_ref()
    }

    pub fn require_postselection(&self) -> Result<&StateVector> {
        self.postselection
            .as_ref()
            .ok_or(Error::MissingPostselection)
    }

    pub fn meter(&self) -> &MeterModel {
        &self.meter
    }

    pub fn hbar(&self) -> f64 {
        self.meter.hbar()
    }

    pub fn system_dim(&self) -> usize {
        self.observable.dim()
    }

    pub fn joint_dim(&self) -> usize {
        self.system_dim() * self.meter.dim()
    }

    /// Same scenario with a different (or no) post-selection state.
    pub fn with_postselection(&self, f: Option<StateVector>) -> Result<Self> {
        Scenario::new(
            self.observable.clone(),
            self.system_state.clone(),
            f,
            self.meter.clone(),
        )
    }

    /// Joint pure components `(weight, system amplitudes, meter amplitudes)`
    /// expressed in the eigenbases of `A` and `B`.
    fn eigenbasis_components(&self) -> Vec<(f64, StateVector, StateVector)> {
        let va = self.observable_spectrum.vectors.as_matrix().adjoint();
        let vb = self
            .meter
            .generator_spectrum()
            .vectors
            .as_matrix()
            .adjoint();
        let meter = self.meter.state().ensemble();
        let mut out = Vec::new();
        for (p, psi) in self.system_state.ensemble() {
            let psi_t = &va * &psi;
            for (q, phi) in &meter {
                out.push((p * q, psi_t.clone(), &vb * phi));
            }
        }
        out
    }

    /// Evolved coefficient matrices `C[k, m]` (system row, meter column) for
    /// every pure component. When `meter_in_generator_basis` is set, the
    /// meter index stays in the eigenbasis of `B`.
    fn evolved_components(
        &self,
        s: f64,
        meter_in_generator_basis: bool,
    ) -> Vec<(f64, DMatrix<C64>)> {
        let a = &self.observable_spectrum;
        let b = self.meter.generator_spectrum();
        let va = a.vectors.as_matrix();
        let vb_t = b.vectors.as_matrix().transpose();
        let scale = s / self.hbar();
        self.eigenbasis_components()
            .into_iter()
            .map(|(w, psi, phi)| {
                let coeffs = DMatrix::from_fn(a.dim(), b.dim(), |k, j| {
                    psi[k] * phi[j] * C64::from_polar(1.0, -scale * a.values[k] * b.values[j])
                });
                let sys = va * coeffs;
                let joint = if meter_in_generator_basis {
                    sys
                } else {
                    sys * &vb_t
                };
                (w, joint)
            })
            .collect()
    }
}

/// Moments of the meter readout after the interaction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    /// Present only for post-selected moments.
    pub postselection_probability: Option<f64>,
}

impl MomentSet {
    fn from_moments(mean: f64, second_moment: f64, probability: Option<f64>) -> Self {
        MomentSet {
            mean,
            second_moment,
            variance: second_moment - mean * mean,
            postselection_probability: probability,
        }
    }
}

/// Meter-side marginals of the evolved joint state: the reduced meter
/// density matrix and, with post-selection, the unnormalized meter density
/// matrix `⟨f|ρ_joint|f⟩` whose trace is `p_f(s)`.
#[derive(Clone, Debug)]
pub struct MeterMarginals {
    pub reduced: DMatrix<C64>,
    pub postselected: Option<DMatrix<C64>>,
}

impl MeterMarginals {
    fn expect(rho: &DMatrix<C64>, o: &ComplexMatrix) -> f64 {
        (rho * o.as_matrix()).trace().re
    }

    /// `tr(ρ_M O)`, the unconditioned expectation of `I⊗O`.
    pub fn expectation(&self, o: &ComplexMatrix) -> f64 {
        Self::expect(&self.reduced, o)
    }

    /// `⟨f|⊗I ... ⟩`: the unnormalized expectation of `|f⟩⟨f|⊗O`.
    pub fn postselected_expectation(&self, o: &ComplexMatrix) -> Result<f64> {
        let rho = self
            .postselected
            .as_ref()
            .ok_or(Error::MissingPostselection)?;
        Ok(Self::expect(rho, o))
    }

    pub fn postselection_probability(&self) -> Result<f64> {
        let rho = self
            .postselected
            .as_ref()
            .ok_or(Error::MissingPostselection)?;
        Ok(rho.trace().re)
    }
}

/// Reduced meter statistics of `U(s)(ρ⊗ρ_M)U(s)†`.
pub fn evolved_meter(sc: &Scenario, s: f64) -> MeterMarginals {
    marginals(sc, s, true)
}

fn marginals(sc: &Scenario, s: f64, with_postselection: bool) -> MeterMarginals {
    let dm = sc.meter.dim();
    let mut reduced = DMatrix::<C64>::zeros(dm, dm);
    let mut post = sc
        .postselection
        .as_ref()
        .filter(|_| with_postselection)
        .map(|_| DMatrix::<C64>::zeros(dm, dm));
    for (w, coeffs) in sc.evolved_components(s, false) {
        let wc = c(w, 0.0);
        reduced += (coeffs.transpose() * coeffs.map(|z| z.conj())) * wc;
        if let (Some(f), Some(acc)) = (sc.postselection.as_ref(), post.as_mut()) {
            // g[m] = Σ_k conj(f_k) C[k, m]
            let g = coeffs.transpose() * f.map(|z| z.conj());
            *acc += (&g * g.adjoint()) * wc;
        }
    }
    MeterMarginals {
        reduced,
        postselected: post,
    }
}

pub fn interaction_unitary(sc: &Scenario, s: f64) -> ComplexMatrix {
    let a = &sc.observable_spectrum;
    let b = sc.meter.generator_spectrum();
    let v = tensor_product(&a.vectors, &b.vectors);
    let scale = s / sc.hbar();
    let phases: Vec<C64> = a
        .values
        .iter()
        .flat_map(|&ak| {
            b.values
                .iter()
                .map(move |&bj| C64::from_polar(1.0, -scale * ak * bj))
        })
        .collect();
    let d = ComplexMatrix::from_diagonal(&phases);
    &(&v * &d) * &v.adjoint()
}

/// Unconditioned readout moments; any post-selection is ignored.
pub fn readout_moments(sc: &Scenario, s: f64) -> MomentSet {
    unconditioned_from(&marginals(sc, s, false), sc.meter())
}

fn unconditioned_from(marg: &MeterMarginals, meter: &MeterModel) -> MomentSet {
    let m = meter.readout();
    MomentSet::from_moments(marg.expectation(m), marg.expectation(&(m * m)), None)
}

fn conditional_from(marg: &MeterMarginals, meter: &MeterModel) -> Result<MomentSet> {
    let p = marg.postselection_probability()?;
    if p.is_nan() || p < DEGENERATE_POSTSELECTION {
        return Err(Error::DegeneratePostselection { probability: p });
    }
    let m = meter.readout();
    let mean = marg.postselected_expectation(m)? / p;
    let second = marg.postselected_expectation(&(m * m))? / p;
    Ok(MomentSet::from_moments(mean, second, Some(p)))
}

/// Readout moments conditioned on finding the system in `|f⟩`.
pub fn conditional_readout_moments(sc: &Scenario, s: f64) -> Result<MomentSet> {
    sc.require_postselection()?;
    conditional_from(&evolved_meter(sc, s), sc.meter())
}

/// Unconditioned and (when post-selected) conditional moments from a single
/// evolution.
pub fn all_moments(sc: &Scenario, s: f64) -> Result<(MomentSet, Option<MomentSet>)> {
    let marg = evolved_meter(sc, s);
    let uncond = unconditioned_from(&marg, sc.meter());
    let cond = match sc.postselection {
        Some(_) => Some(conditional_from(&marg, sc.meter())?),
        None => None,
    };
    Ok((uncond, cond))
}

/// Heisenberg-picture route: conjugates `I⊗M` and `I⊗M²` with the full
/// joint unitary and takes expectations in the initial product state.
pub fn readout_moments_heisenberg(sc: &Scenario, s: f64) -> MomentSet {
    let u = interaction_unitary(sc, s);
    let ud = u.adjoint();
    let id = ComplexMatrix::identity(sc.system_dim());
    let m = sc.meter.readout();
    let rho = tensor_product(
        &sc.system_state.density_matrix(),
        &sc.meter.state().density_matrix(),
    );
    let heis = |o: &ComplexMatrix| {
        let op = &(&ud * &tensor_product(&id, o)) * &u;
        (&rho * &op).trace().re
    };
    MomentSet::from_moments(heis(m), heis(&(m * m)), None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    F,
    NotF,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointRow {
    pub eigenvalue: f64,
    pub outcome: Outcome,
    pub probability: f64,
}

/// Joint probabilities of a projective `B` measurement on the meter and the
/// post-selection outcome on the system, both after the interaction. Rows
/// are ordered by ascending eigenvalue, `F` before `NotF`.
pub fn generator_joint_statistics(sc: &Scenario, s: f64) -> Result<Vec<JointRow>> {
    let f = sc.require_postselection()?;
    let values = &sc.meter.generator_spectrum().values;
    let mut p_f = vec![0.0; values.len()];
    let mut p_all = vec![0.0; values.len()];
    let f_conj = f.map(|z| z.conj());
    for (w, coeffs) in sc.evolved_components(s, true) {
        let g = coeffs.transpose() * &f_conj;
        for j in 0..values.len() {
            p_f[j] += w * g[j].norm_sqr();
            p_all[j] += w * coeffs.column(j).norm_squared();
        }
    }

    let mut rows: Vec<JointRow> = Vec::new();
    let mut j = 0;
    while j < values.len() {
        let anchor = values[j];
        let (mut pf, mut pa) = (0.0, 0.0);
        while j < values.len() && (values[j] - anchor).abs() <= EIGENVALUE_MERGE_TOL {
            pf += p_f[j];
            pa += p_all[j];
            j += 1;
        }
        rows.push(JointRow {
            eigenvalue: anchor,
            outcome: Outcome::F,
            probability: pf,
        });
        rows.push(JointRow {
            eigenvalue: anchor,
            outcome: Outcome::NotF,
            probability: pa - pf,
        });
    }
    Ok(rows)
}

/// `⟨f|U_A(φ) ρ U_A(φ)†|f⟩` with `U_A(φ) = exp(-(i/ħ) φ A)`.
pub fn phase_shifted_postselection_probability(sc: &Scenario, phi: f64) -> Result<f64> {
    let f = sc.require_postselection()?;
    let u = hermitian_exponential(&sc.observable, phi / sc.hbar())?;
    Ok(sc
        .system_state
        .ensemble()
        .iter()
        .map(|(w, psi)| w * f.dotc(&u.apply(psi)).norm_sqr())
        .sum())
}
