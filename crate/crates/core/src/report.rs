//! Scans over the interaction strength and the CSV/JSON reports built from
//! them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{MeterKind, ScenarioConfig};
use crate::dynamics::{all_moments, readout_moments, Scenario};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::formulas::{
    conditional_shift_rate, conditional_variance_growth, precondition_advisories,
    unconditioned_shift_rate, variance_growth_decomposition, weak_statistics, GrowthReport,
    WeakStatistics,
};
use crate::meter::{validate_meter_symmetry, MeterMoments, SymmetryReport};
use crate::numdiff::{
    fd_conditional_shift_rate, fd_conditional_variance_growth, fd_shift_rate,
    fd_unconditioned_variance_growth, DerivativeEstimate, NumdiffSettings,
};
use crate::operator::StateKind;

pub const SCHEMA: &str = "weakmeter-report/1";
pub const CSV_HEADER: [&str; 6] = [
    "s",
    "p_f",
    "mean",
    "variance",
    "conditional_mean",
    "conditional_variance",
];
/// A formula agrees with its oracle when
/// `|total - oracle| <= CONSISTENCY_RTOL * max(1, |oracle|) + 10 * error_estimate`.
pub const CONSISTENCY_RTOL: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub s: f64,
    pub p_f: Option<f64>,
    pub mean: f64,
    pub variance: f64,
    pub conditional_mean: Option<f64>,
    pub conditional_variance: Option<f64>,
}

impl ScanRow {
    pub fn compute(sc: &Scenario, s: f64) -> Result<ScanRow> {
        let (plain, cond) = if sc.postselection().is_some() {
            all_moments(sc, s)?
        } else {
            (readout_moments(sc, s), None)
        };
        let row = ScanRow {
            s,
            p_f: cond.and_then(|c| c.postselection_probability),
            mean: plain.mean,
            variance: plain.variance,
            conditional_mean: cond.map(|c| c.mean),
            conditional_variance: cond.map(|c| c.variance),
        };
        let values = [row.mean, row.variance];
        let optional = [row.p_f, row.conditional_mean, row.conditional_variance];
        if values
            .iter()
            .chain(optional.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite(format!("scan row at s = {s}")));
        }
        Ok(row)
    }

    fn fields(&self) -> [Option<f64>; 6] {
        [
            Some(self.s),
            self.p_f,
            Some(self.mean),
            Some(self.variance),
            self.conditional_mean,
            self.conditional_variance,
        ]
    }
}

pub fn scan_rows(sc: &Scenario, s_values: &[f64], exec: Execution) -> Result<Vec<ScanRow>> {
    exec.try_map(s_values, |&s| ScanRow::compute(sc, s))
}

/// 17 significant digits in scientific notation.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the fixed-header CSV. Conditional columns are left empty when the
/// scenario has no post-selection.
pub fn write_csv<W: std::io::Write>(rows: &[ScanRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(
            row.fields()
                .map(|v| v.map(format_value).unwrap_or_default()),
        )?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    /// Formula and oracle disagree while the meter violates a precondition
    /// of the formula.
    PreconditionsViolated,
    Inconsistent,
}

impl Verdict {
    fn combine(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Inconsistent, _) | (_, Inconsistent) => Inconsistent,
            (PreconditionsViolated, _) | (_, PreconditionsViolated) => PreconditionsViolated,
            _ => Consistent,
        }
    }
}

fn agrees(value: f64, est: &DerivativeEstimate) -> bool {
    (value - est.value).abs()
        <= CONSISTENCY_RTOL * est.value.abs().max(1.0) + 10.0 * est.error_estimate
}

pub fn growth_verdict(rep: &GrowthReport) -> Verdict {
    let (Some(oracle), Some(err)) = (rep.oracle, rep.oracle_error_estimate) else {
        return Verdict::Consistent;
    };
    let diff = (rep.total - oracle).abs();
    if diff <= CONSISTENCY_RTOL * oracle.abs().max(1.0) + 10.0 * err {
        Verdict::Consistent
    } else if rep.advisories.is_empty() {
        Verdict::Inconsistent
    } else {
        Verdict::PreconditionsViolated
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftRate {
    pub formula: f64,
    pub oracle: f64,
    pub oracle_error_estimate: f64,
    pub oracle_abs_diff: f64,
}

impl ShiftRate {
    fn new(formula: f64, est: DerivativeEstimate) -> Self {
        ShiftRate {
            formula,
            oracle: est.value,
            oracle_error_estimate: est.error_estimate,
            oracle_abs_diff: (formula - est.value).abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub hbar: f64,
    pub system_dimension: usize,
    pub system_state: StateKind,
    pub postselected: bool,
    pub meter_kind: MeterKind,
    pub meter_dimension: usize,
    pub s_values: usize,
    pub numdiff: NumdiffSettings,
}

impl ScenarioSummary {
    fn new(config: &ScenarioConfig, sc: &Scenario) -> Self {
        ScenarioSummary {
            hbar: sc.hbar(),
            system_dimension: sc.system_dim(),
            system_state: sc.system_state().kind(),
            postselected: sc.postselection().is_some(),
            meter_kind: config.meter.kind,
            meter_dimension: sc.meter().dim(),
            s_values: config.scan.s_values.len(),
            numdiff: config.numdiff_settings(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeterSummary {
    pub moments: MeterMoments,
    pub symmetry: SymmetryReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub schema: String,
    pub scenario: ScenarioSummary,
    pub meter: MeterSummary,
    pub unconditioned: GrowthReport,
    pub conditional: Option<GrowthReport>,
    pub weak_statistics: Option<WeakStatistics>,
    pub shift_rate: ShiftRate,
    pub conditional_shift_rate: Option<ShiftRate>,
    pub verdict: Verdict,
    pub advisories: Vec<String>,
}

/// Formula side of a scan, each total paired with its finite-difference
/// oracle.
pub fn build_report(config: &ScenarioConfig, sc: &Scenario) -> Result<ScanReport> {
    let nd = config.numdiff_settings();
    let (h, levels) = (nd.step, nd.richardson_levels);
    let symmetry = validate_meter_symmetry(sc.meter());

    let unconditioned = variance_growth_decomposition(sc)?
        .with_oracle(&fd_unconditioned_variance_growth(sc, h, levels)?);
    let est = fd_shift_rate(sc, h, levels)?;
    let shift_rate = ShiftRate::new(unconditioned_shift_rate(sc)?, est);
    let mut verdict = growth_verdict(&unconditioned);
    if !agrees(shift_rate.formula, &est) {
        verdict = verdict.combine(Verdict::Inconsistent);
    }

    let (conditional, stats, cond_shift) = if sc.postselection().is_some() {
        let rep = conditional_variance_growth(sc)?
            .with_oracle(&fd_conditional_variance_growth(sc, h, levels)?);
        verdict = verdict.combine(growth_verdict(&rep));
        let est = fd_conditional_shift_rate(sc, h, levels)?;
        let rate = conditional_shift_rate(sc)?;
        if !agrees(rate, &est) {
            let unbiased = symmetry.unbiased_mb_ok;
            verdict = verdict.combine(if unbiased {
                Verdict::Inconsistent
            } else {
                Verdict::PreconditionsViolated
            });
        }
        (
            Some(rep),
            Some(weak_statistics(sc)?),
            Some(ShiftRate::new(rate, est)),
        )
    } else {
        (None, None, None)
    };

    Ok(ScanReport {
        schema: SCHEMA.to_string(),
        scenario: ScenarioSummary::new(config, sc),
        meter: MeterSummary {
            moments: *sc.meter().moments(),
            symmetry,
        },
        unconditioned,
        conditional,
        weak_statistics: stats,
        shift_rate,
        conditional_shift_rate: cond_shift,
        verdict,
        advisories: precondition_advisories(&symmetry, sc.postselection().is_some()),
    })
}

#[derive(Clone, Debug)]
pub struct ScanOutput {
    pub rows: Vec<ScanRow>,
    pub report: ScanReport,
    pub csv_path: PathBuf,
    pub report_path: PathBuf,
}

/// Removes the file on drop unless disarmed.
struct Cleanup(Option<PathBuf>);

impl Drop for Cleanup {
    fn drop(&mut self) {
        if let Some(p) = self.0.take() {
            let _ = fs::remove_file(p);
        }
    }
}

/// Runs the scan and writes `scan.csv` and `report.json` into `out_dir`.
/// On failure neither file is left behind.
pub fn run_scan(config: &ScenarioConfig, out_dir: &Path, exec: Execution) -> Result<ScanOutput> {
    let sc = config.scenario()?;
    fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("scan.csv");
    let report_path = out_dir.join("report.json");
    let mut guards = [
        Cleanup(Some(csv_path.clone())),
        Cleanup(Some(report_path.clone())),
    ];

    let rows = scan_rows(&sc, &config.scan.s_values, exec)?;
    write_csv(&rows, fs::File::create(&csv_path)?)?;
    let report = build_report(config, &sc)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    fs::write(&report_path, json)?;

    for g in &mut guards {
        g.0 = None;
    }
    Ok(ScanOutput {
        rows,
        report,
        csv_path,
        report_path,
    })
}

/// Side-by-side readings of the conditional variance growth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTable {
    pub schema: String,
    pub ozawa_term: f64,
    pub response_fluctuation_term: f64,
    pub saturation_term: f64,
    pub bayesian_update_term: f64,
    pub total: f64,
    /// `None` for mixed system states.
    pub weak_variance_reading: Option<f64>,
    pub fd_oracle: f64,
    pub fd_error_estimate: f64,
    pub total_minus_oracle: f64,
    pub weak_variance_minus_oracle: Option<f64>,
    pub ozawa: f64,
    pub v_dyn: f64,
    pub correlation_kmb: f64,
    pub verdict: Verdict,
    pub advisories: Vec<String>,
}

pub fn compare_decompositions(config: &ScenarioConfig) -> Result<DecompositionTable> {
    let sc = config.scenario()?;
    sc.require_postselection()?;
    let nd = config.numdiff_settings();
    let est = fd_conditional_variance_growth(&sc, nd.step, nd.richardson_levels)?;
    let rep = conditional_variance_growth(&sc)?.with_oracle(&est);
    let ws = weak_statistics(&sc)?;
    Ok(DecompositionTable {
        schema: SCHEMA.to_string(),
        ozawa_term: rep.term_linear_response,
        response_fluctuation_term: rep.term_response_fluctuation,
        saturation_term: rep.term_saturation,
        bayesian_update_term: rep.term_bayesian_update,
        total: rep.total,
        weak_variance_reading: ws.weak_variance,
        fd_oracle: est.value,
        fd_error_estimate: est.error_estimate,
        total_minus_oracle: rep.total - est.value,
        weak_variance_minus_oracle: ws.weak_variance.map(|w| w - est.value),
        ozawa: ws.ozawa,
        v_dyn: ws.v_dyn,
        correlation_kmb: sc.meter().moments().correlation_kmb,
        verdict: growth_verdict(&rep),
        advisories: rep.advisories,
    })
}

impl DecompositionTable {
    pub fn render(&self) -> String {
        let num = |x: f64| format!("{x:>24.15e}");
        let mut out = String::new();
        let rows: [(&str, String); 7] = [
            ("Ozawa term", num(self.ozawa_term)),
            (
                "response-fluctuation term",
                num(self.response_fluctuation_term),
            ),
            ("saturation term", num(self.saturation_term)),
            ("Bayesian-update term", num(self.bayesian_update_term)),
            ("total", num(self.total)),
            (
                "weak-variance reading",
                self.weak_variance_reading
                    .map(num)
                    .unwrap_or_else(|| format!("{:>24}", "n/a")),
            ),
            ("FD oracle", num(self.fd_oracle)),
        ];
        for (name, value) in rows {
            let _ = writeln!(out, "{name:<28}{value}");
        }
        let _ = writeln!(
            out,
            "{:<28}{:>24.3e}",
            "FD error estimate", self.fd_error_estimate
        );
        let _ = writeln!(
            out,
            "{:<28}{:>24.3e}",
            "|total - oracle|",
            self.total_minus_oracle.abs()
        );
        let verdict = match self.verdict {
            Verdict::Consistent => "consistent",
            Verdict::PreconditionsViolated => "preconditions violated",
            Verdict::Inconsistent => "INCONSISTENT",
        };
        let _ = writeln!(out, "{:<28}{:>24}", "verdict", verdict);
        for a in &self.advisories {
            let _ = writeln!(out, "advisory: {a}");
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub schema: String,
    pub meter_kind: MeterKind,
    pub symmetry: SymmetryReport,
    pub moments: MeterMoments,
    pub advisories: Vec<String>,
}

/// Meter symmetry and unbiasedness checks only.
pub fn validate(config: &ScenarioConfig) -> Result<ValidationReport> {
    let meter = config.meter()?;
    let symmetry = validate_meter_symmetry(&meter);
    Ok(ValidationReport {
        schema: SCHEMA.to_string(),
        meter_kind: config.meter.kind,
        symmetry,
        moments: *meter.moments(),
        advisories: symmetry.advisories(),
    })
}
