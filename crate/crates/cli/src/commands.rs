//! Command implementations. Each returns the rows to print.

use std::path::{Path, PathBuf};

use log::{info, warn};
use paoi_core::nonpreemptive::{optimize_threshold, optimize_transmission_aware_wop};
use paoi_core::preemptive::{
    optimal_policy_exp_c, optimize_fixed_threshold_wp, optimize_transmission_aware_wp, DEFAULT_DELTA,
};
use paoi_core::simulator::{analytic_paoi, simulate_on_streams};
use paoi_core::{
    DinkelbachTrace, Discipline, DistributionSpec, Error, OptimizationResult, PolicySpec, SimResult, SystemConfig,
    Threshold,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{split_mean, Experiment, ExperimentConfig, PolicyConfig, SimSettings};
use crate::error::{CliError, Stage};
use crate::output::ResultRow;

/// Optimizer output kept for the trace file.
#[derive(Debug, Clone, Serialize)]
pub struct Optimized {
    pub optimizer: &'static str,
    pub result: OptimizationResult,
    pub dinkelbach: Option<DinkelbachTrace>,
}

/// A config policy turned into something the simulator can run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub policy: PolicySpec,
    pub threshold: Option<Threshold>,
    pub paoi_analytic: Option<f64>,
    pub optimized: Option<Optimized>,
}

fn core_err(e: Stage) -> impl Fn(Error) -> CliError {
    move |err| CliError::from_core(e, err)
}

fn optimize(
    system: Discipline,
    t: &DistributionSpec,
    c: &DistributionSpec,
    policy: PolicyConfig,
) -> Result<Optimized, CliError> {
    let err = core_err(Stage::Analytic);
    let (optimizer, result, dinkelbach) = match (system, policy) {
        (Discipline::NonPreemptive, PolicyConfig::FixedThreshold { .. } | PolicyConfig::Optimal) => {
            let name = match (t.exponential_rate(), c.exponential_rate()) {
                (_, Some(_)) => "exp_computation_rule",
                (Some(_), None) => "piecewise_bisection",
                (None, None) => "grid_golden_section",
            };
            (name, optimize_threshold(t, c).map_err(&err)?, None)
        }
        (Discipline::NonPreemptive, PolicyConfig::TransmissionAware { .. }) => (
            "grid_golden_section",
            optimize_transmission_aware_wop(t, c).map_err(&err)?,
            None,
        ),
        (Discipline::Preemptive, PolicyConfig::FixedThreshold { .. }) => {
            let (r, tr) = optimize_fixed_threshold_wp(t, c, DEFAULT_DELTA).map_err(&err)?;
            ("dinkelbach_fixed", r, Some(tr))
        }
        (Discipline::Preemptive, PolicyConfig::TransmissionAware { .. }) => {
            let (r, tr) = optimize_transmission_aware_wp(t, c, DEFAULT_DELTA).map_err(&err)?;
            ("dinkelbach_transmission_aware", r, Some(tr))
        }
        (Discipline::Preemptive, PolicyConfig::Optimal) => match c.exponential_rate() {
            Some(mu) => {
                let (r, tr) = optimal_policy_exp_c(t, mu, DEFAULT_DELTA).map_err(&err)?;
                ("exp_computation_fixed_point", r, Some(tr))
            }
            None => {
                let (f, ftr) = optimize_fixed_threshold_wp(t, c, DEFAULT_DELTA).map_err(&err)?;
                let (a, atr) = optimize_transmission_aware_wp(t, c, DEFAULT_DELTA).map_err(&err)?;
                if a.paoi < f.paoi {
                    ("dinkelbach_transmission_aware", a, Some(atr))
                } else {
                    ("dinkelbach_fixed", f, Some(ftr))
                }
            }
        },
        (_, other) => {
            return Err(CliError::schema(format!(
                "policy `{}` has no parameter to optimize",
                other.name()
            )))
        }
    };
    Ok(Optimized {
        optimizer,
        result,
        dinkelbach,
    })
}

/// Whether the optimum of a `policy` run is transmission-aware.
fn is_transmission_aware(system: Discipline, c: &DistributionSpec, opt: &Optimized, policy: PolicyConfig) -> bool {
    match policy {
        PolicyConfig::TransmissionAware { .. } => true,
        PolicyConfig::Optimal => {
            system == Discipline::Preemptive
                && (c.exponential_rate().is_some() || opt.optimizer == "dinkelbach_transmission_aware")
        }
        _ => false,
    }
}

/// Turns a config policy into a concrete one, optimizing when the config
/// leaves the parameter open. With `require_analytic` a failed or missing
/// evaluation is an error; otherwise the analytic column is left empty.
pub fn resolve(e: &Experiment, require_analytic: bool) -> Result<Resolved, CliError> {
    let (t, c) = (&e.transmission, &e.computation);
    if e.policy.needs_optimizer() {
        let opt = optimize(e.system, t, c, e.policy)?;
        let th = opt.result.threshold;
        let policy = if is_transmission_aware(e.system, c, &opt, e.policy) {
            PolicySpec::TransmissionAware { beta: th.value() }
        } else {
            PolicySpec::FixedThreshold { theta: th }
        };
        return Ok(Resolved {
            policy,
            threshold: Some(th),
            paoi_analytic: Some(opt.result.paoi),
            optimized: Some(opt),
        });
    }
    let policy = match e.policy {
        PolicyConfig::FixedThreshold { theta: Some(theta) } => PolicySpec::FixedThreshold { theta },
        PolicyConfig::TransmissionAware { beta: Some(b) } => PolicySpec::TransmissionAware { beta: b.value() },
        PolicyConfig::MeanThreshold => PolicySpec::MeanThreshold,
        PolicyConfig::RandomizedThreshold { theta_dist } => PolicySpec::RandomizedThreshold { theta_dist },
        _ => unreachable!("optimizing policies handled above"),
    };
    let cfg = system_config(e);
    let paoi_analytic = match analytic_paoi(&cfg, &policy) {
        Ok(v) => Some(v),
        Err(err @ Error::InvalidParameter(_)) => return Err(CliError::from_core(Stage::Analytic, err)),
        Err(err) if !require_analytic => {
            info!("no analytic value: {err}");
            None
        }
        Err(err) => return Err(CliError::from_core(Stage::Analytic, err)),
    };
    Ok(Resolved {
        threshold: policy.threshold(c),
        policy,
        paoi_analytic,
        optimized: None,
    })
}

pub fn system_config(e: &Experiment) -> SystemConfig {
    SystemConfig {
        discipline: e.system,
        transmission: e.transmission,
        computation: e.computation,
    }
}

fn base_row(e: &Experiment, r: &Resolved) -> ResultRow {
    ResultRow {
        ratio: e.transmission.mean() / e.computation.mean(),
        system: e.system.name().into(),
        policy: e.policy.name().into(),
        threshold: r.threshold,
        paoi_analytic: r.paoi_analytic,
        paoi_sim: None,
        paoi_stderr: None,
        aoi_sim: None,
        delivery_ratio: None,
    }
}

fn fill_sim(row: &mut ResultRow, s: &SimResult) {
    row.paoi_sim = Some(s.avg_paoi);
    row.paoi_stderr = Some(s.paoi_stderr);
    row.aoi_sim = Some(s.avg_aoi);
    row.delivery_ratio = Some(s.delivery_ratio);
}

fn run_sim(e: &Experiment, r: &Resolved, sim: &SimSettings, stream_base: u64) -> Result<SimResult, CliError> {
    simulate_on_streams(
        &system_config(e),
        &r.policy,
        sim.packets,
        sim.seed,
        stream_base,
        sim.batches,
    )
    .map_err(|err| CliError::from_core(Stage::Simulation, err))
}

pub fn eval(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, CliError> {
    let e = cfg.experiment()?;
    let r = resolve(&e, true)?;
    Ok(vec![base_row(&e, &r)])
}

/// Optimizes the policy class named in the config; a fixed parameter in the
/// config is ignored.
pub fn optimize_cmd(cfg: &ExperimentConfig) -> Result<(Vec<ResultRow>, Optimized), CliError> {
    let mut e = cfg.experiment()?;
    e.policy = match e.policy {
        PolicyConfig::FixedThreshold { theta } => {
            if theta.is_some() {
                warn!("ignoring theta: optimize searches the fixed-threshold class");
            }
            PolicyConfig::FixedThreshold { theta: None }
        }
        PolicyConfig::TransmissionAware { beta } => {
            if beta.is_some() {
                warn!("ignoring beta: optimize searches the transmission-aware class");
            }
            PolicyConfig::TransmissionAware { beta: None }
        }
        PolicyConfig::Optimal => PolicyConfig::Optimal,
        other => {
            return Err(CliError::schema(format!(
                "policy `{}` has no parameter to optimize",
                other.name()
            )))
        }
    };
    let r = resolve(&e, true)?;
    let opt = r.optimized.clone().expect("optimizing policy");
    info!(
        "{}: threshold {} PAoI {}",
        opt.optimizer, opt.result.threshold, opt.result.paoi
    );
    Ok((vec![base_row(&e, &r)], opt))
}

pub fn simulate_cmd(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, CliError> {
    let e = cfg.experiment()?;
    let r = resolve(&e, false)?;
    let s = run_sim(&e, &r, &cfg.sim, 0)?;
    let mut row = base_row(&e, &r);
    fill_sim(&mut row, &s);
    Ok(vec![row])
}

/// One sweep point's transmission and computation laws.
pub fn sweep_laws(
    t: &DistributionSpec,
    c: &DistributionSpec,
    total: f64,
    ratio: f64,
) -> paoi_core::Result<(DistributionSpec, DistributionSpec)> {
    let (mt, mc) = split_mean(total, ratio);
    Ok((t.with_mean(mt)?, c.with_mean(mc)?))
}

/// Optimizes and simulates every (ratio, system, policy) cell. Failed cells
/// are logged and left out; rows come back sorted by ratio, then by the order
/// of systems and policies in the config.
pub fn sweep_cmd(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, CliError> {
    let sw = cfg.sweep()?;
    let missing = |f: &str| CliError::schema(format!("config: sweep needs a base `{f}` law"));
    let t0 = cfg.transmission.ok_or_else(|| missing("transmission"))?;
    let c0 = cfg.computation.ok_or_else(|| missing("computation"))?;
    let mut order: Vec<usize> = (0..sw.ratio_grid.len()).collect();
    order.sort_by(|&a, &b| sw.ratio_grid[a].total_cmp(&sw.ratio_grid[b]));
    let mut cells = Vec::new();
    for &ri in &order {
        for &system in &sw.systems {
            for &policy in &sw.policies {
                cells.push((ri, system, policy));
            }
        }
    }
    let rows: Vec<Option<ResultRow>> = cells
        .par_iter()
        .map(|&(ri, system, policy)| {
            let ratio = sw.ratio_grid[ri];
            let cell = || -> Result<ResultRow, CliError> {
                let (t, c) = sweep_laws(&t0, &c0, sw.total_mean, ratio)
                    .map_err(|err| CliError::from_core(Stage::Analytic, err))?;
                let e = Experiment {
                    system,
                    transmission: t,
                    computation: c,
                    policy,
                };
                let r = resolve(&e, false)?;
                let s = run_sim(&e, &r, &cfg.sim, 3 * ri as u64)?;
                let mut row = base_row(&e, &r);
                row.ratio = ratio;
                fill_sim(&mut row, &s);
                Ok(row)
            };
            match cell() {
                Ok(row) => Some(row),
                Err(err) => {
                    warn!(
                        "sweep cell ratio={ratio} system={} policy={} failed: {err}",
                        system.name(),
                        policy.name()
                    );
                    None
                }
            }
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// Path of a file written next to `output`, e.g. `out.csv` → `out.csv.trace.json`.
pub fn sibling(output: &Path, suffix: &str) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Gnuplot script drawing simulated PAoI against the ratio, one curve per
/// (system, policy) pair.
pub fn gnuplot_script(data: &Path, rows: &[ResultRow]) -> String {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for r in rows {
        let p = (r.system.clone(), r.policy.clone());
        if !pairs.contains(&p) {
            pairs.push(p);
        }
    }
    let file = data.display().to_string().replace('\'', "''");
    let mut s = String::from(
        "set datafile separator ','\nset logscale x\nset xlabel 'E[T]/E[C]'\nset ylabel 'average peak age'\nset key outside\n",
    );
    let curves: Vec<String> = pairs
        .iter()
        .map(|(sys, pol)| {
            format!(
                "'{file}' skip 1 using 1:((strcol(2) eq '{sys}' && strcol(3) eq '{pol}') ? $6 : 1/0) with linespoints title '{sys} {pol}'"
            )
        })
        .collect();
    s.push_str("plot ");
    s.push_str(&curves.join(", \\\n     "));
    s.push('\n');
    s
}
