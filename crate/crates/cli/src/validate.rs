//! Analytic-versus-simulation checks over a matrix of cases.

use log::warn;
use paoi_core::preemptive::prob_success;
use paoi_core::simulator::simulate;
use paoi_core::{Discipline, DistributionSpec, PolicySpec, Threshold, WaitFunction};
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::{resolve, system_config};
use crate::config::{Experiment, PolicyConfig, SimSettings, ValidateCase, ValidateSettings};
use crate::error::{CliError, Stage};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub case: String,
    pub check: &'static str,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub pass: bool,
    pub total: usize,
    pub failed: usize,
    pub warnings: Vec<String>,
    pub checks: Vec<Check>,
}

fn case(
    name: &str,
    system: Discipline,
    t: DistributionSpec,
    c: DistributionSpec,
    policy: PolicyConfig,
    expected: Option<f64>,
) -> ValidateCase {
    ValidateCase {
        name: name.into(),
        system,
        transmission: t,
        computation: c,
        policy,
        expected,
    }
}

/// Built-in matrix covering both systems, every policy kind and the three
/// distribution families.
pub fn default_matrix() -> Vec<ValidateCase> {
    let exp = |r: f64| DistributionSpec::exponential(r).unwrap();
    let det = |v: f64| DistributionSpec::deterministic(v).unwrap();
    let fixed = |v: f64| PolicyConfig::FixedThreshold {
        theta: Some(Threshold::new(v).unwrap()),
    };
    let np = Discipline::NonPreemptive;
    let wp = Discipline::Preemptive;
    vec![
        case("flat exp-exp theta=0.3", np, exp(2.0), exp(2.0), fixed(0.3), Some(2.0)),
        case(
            "flat exp-exp theta=inf",
            np,
            exp(2.0),
            exp(2.0),
            fixed(f64::INFINITY),
            Some(2.0),
        ),
        case(
            "deterministic theta=inf",
            np,
            det(0.5),
            det(0.5),
            fixed(f64::INFINITY),
            Some(2.0),
        ),
        case(
            "exp-exp 3:1 optimal",
            np,
            exp(4.0 / 3.0),
            exp(4.0),
            PolicyConfig::Optimal,
            Some(1.875),
        ),
        case(
            "exp-det randomized",
            np,
            exp(2.0),
            det(0.5),
            PolicyConfig::RandomizedThreshold { theta_dist: exp(3.0) },
            None,
        ),
        case(
            "pareto-exp mean threshold",
            np,
            DistributionSpec::pareto(0.25, 2.5).unwrap(),
            exp(2.0),
            PolicyConfig::MeanThreshold,
            None,
        ),
        case("preemptive best effort", wp, exp(2.0), exp(2.0), fixed(0.0), Some(1.75)),
        case(
            "preemptive exp-exp optimal",
            wp,
            exp(2.0),
            exp(2.0),
            PolicyConfig::Optimal,
            None,
        ),
        case(
            "preemptive pareto-exp transmission-aware",
            wp,
            DistributionSpec::pareto(0.25, 2.5).unwrap(),
            exp(2.0),
            PolicyConfig::TransmissionAware {
                beta: Some(Threshold::Finite(0.6)),
            },
            None,
        ),
        case(
            "preemptive exp-det fixed optimum",
            wp,
            exp(2.5),
            det(0.6),
            PolicyConfig::FixedThreshold { theta: None },
            None,
        ),
    ]
}

fn check(case: &str, name: &'static str, value: f64, target: f64, tolerance: f64) -> Check {
    Check {
        case: case.into(),
        check: name,
        value,
        target,
        tolerance,
        pass: (value - target).abs() <= tolerance,
    }
}

fn wait_function(p: &PolicySpec, c: &DistributionSpec) -> Option<WaitFunction> {
    match p.resolve(c) {
        PolicySpec::FixedThreshold { theta } => Some(WaitFunction::fixed(theta)),
        PolicySpec::TransmissionAware { beta } => WaitFunction::transmission_aware(beta).ok(),
        _ => None,
    }
}

fn run_case(vc: &ValidateCase, settings: &ValidateSettings, sim: &SimSettings) -> Result<Vec<Check>, CliError> {
    let e = Experiment {
        system: vc.system,
        transmission: vc.transmission,
        computation: vc.computation,
        policy: vc.policy,
    };
    let k = settings.se_multiplier;
    let r = resolve(&e, true)?;
    let analytic = r.paoi_analytic.expect("analytic value required");
    let mut out = Vec::new();
    if let Some(x) = vc.expected {
        out.push(check(
            &vc.name,
            "analytic_vs_expected",
            analytic,
            x,
            settings.analytic_tol,
        ));
    }
    let s = simulate(&system_config(&e), &r.policy, sim.packets, sim.seed, sim.batches)
        .map_err(|err| CliError::from_core(Stage::Simulation, err))?;
    out.push(check(
        &vc.name,
        "simulation_vs_analytic",
        s.avg_paoi,
        analytic,
        k * s.paoi_stderr,
    ));
    out.push(Check {
        pass: s.avg_aoi <= s.avg_paoi,
        ..check(&vc.name, "aoi_not_above_paoi", s.avg_aoi, s.avg_paoi, 0.0)
    });
    match vc.system {
        Discipline::NonPreemptive => out.push(check(&vc.name, "delivery_ratio", s.delivery_ratio, 1.0, 0.0)),
        Discipline::Preemptive => {
            if let Some(g) = wait_function(&r.policy, &e.computation) {
                let pr = prob_success(&g, &e.transmission, &e.computation)
                    .map_err(|err| CliError::from_core(Stage::Analytic, err))?;
                out.push(check(
                    &vc.name,
                    "delivery_ratio",
                    s.delivery_ratio,
                    pr,
                    (k * s.delivery_stderr).max(settings.analytic_tol),
                ));
            }
        }
    }
    Ok(out)
}

pub fn run(settings: &ValidateSettings, sim: &SimSettings) -> Result<Report, CliError> {
    let matrix = settings.matrix.clone().unwrap_or_else(default_matrix);
    let mut warnings = Vec::new();
    if matrix.is_empty() {
        let msg = "empty matrix: no checks were run".to_string();
        warn!("{msg}");
        warnings.push(msg);
    }
    let results: Vec<Result<Vec<Check>, CliError>> = matrix.par_iter().map(|vc| run_case(vc, settings, sim)).collect();
    let mut checks = Vec::new();
    for r in results {
        checks.extend(r?);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    Ok(Report {
        pass: failed == 0,
        total: checks.len(),
        failed,
        warnings,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimSettings {
        SimSettings {
            packets: 20_000,
            seed: 42,
            batches: 20,
        }
    }

    #[test]
    fn empty_matrix_passes_with_warning() {
        let s = ValidateSettings {
            matrix: Some(Vec::new()),
            ..ValidateSettings::default()
        };
        let r = run(&s, &small()).unwrap();
        assert!(r.pass);
        assert_eq!(r.total, 0);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn zero_tolerance_fails_statistical_checks() {
        let s = ValidateSettings {
            matrix: Some(default_matrix().into_iter().take(1).collect()),
            se_multiplier: 0.0,
            ..ValidateSettings::default()
        };
        let r = run(&s, &small()).unwrap();
        assert!(!r.pass);
        assert!(r.checks.iter().any(|c| c.check == "simulation_vs_analytic" && !c.pass));
    }

    #[test]
    fn default_matrix_is_well_formed() {
        let m = default_matrix();
        assert!(m.len() >= 8);
        for d in [Discipline::NonPreemptive, Discipline::Preemptive] {
            assert!(m.iter().any(|c| c.system == d));
        }
    }
}
