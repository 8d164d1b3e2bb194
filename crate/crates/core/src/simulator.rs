//! Packet-level Monte Carlo simulation of both server disciplines.
//!
//! The source only generates while the channel is idle and the waiting slot is
//! empty, so the sample path is a per-packet recursion rather than an event
//! queue. Packet 0 is generated at `−T₀ − C₀` and delivered at time 0.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{stream_rng, DistributionSpec};
use crate::error::{Error, Result};
use crate::nonpreemptive::{paoi_wop, paoi_wop_randomized, paoi_wop_transmission_aware, Threshold};
use crate::preemptive::{paoi_wp, WaitFunction};

pub const DEFAULT_PACKETS: usize = 1_000_000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_BATCHES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discipline {
    Preemptive,
    NonPreemptive,
}

impl Discipline {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Preemptive => "preemptive",
            Self::NonPreemptive => "non_preemptive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    FixedThreshold { theta: Threshold },
    RandomizedThreshold { theta_dist: DistributionSpec },
    TransmissionAware { beta: f64 },
    MeanThreshold,
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FixedThreshold { .. } => "fixed_threshold",
            Self::RandomizedThreshold { .. } => "randomized_threshold",
            Self::TransmissionAware { .. } => "transmission_aware",
            Self::MeanThreshold => "mean_threshold",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::TransmissionAware { beta } if !(beta >= 0.0) => {
                Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")))
            }
            _ => Ok(()),
        }
    }

    /// Replaces the mean-threshold baseline by the fixed threshold `E[C]`.
    pub fn resolve(&self, computation: &DistributionSpec) -> Self {
        match *self {
            Self::MeanThreshold => Self::FixedThreshold {
                theta: Threshold::Finite(computation.mean()),
            },
            other => other,
        }
    }

    /// The policy's threshold parameter, when it has a single one.
    pub fn threshold(&self, computation: &DistributionSpec) -> Option<Threshold> {
        match self.resolve(computation) {
            Self::FixedThreshold { theta } => Some(theta),
            Self::TransmissionAware { beta } => Threshold::new(beta).ok(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub discipline: Discipline,
    pub transmission: DistributionSpec,
    pub computation: DistributionSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimResult {
    pub avg_paoi: f64,
    pub paoi_stderr: f64,
    pub avg_aoi: f64,
    pub aoi_stderr: f64,
    pub delivery_ratio: f64,
    pub delivery_stderr: f64,
    pub packets_generated: usize,
    pub packets_delivered: usize,
    pub elapsed_model_time: f64,
}

/// One generated packet. For non-preemptive runs `wait` is the time spent in
/// the waiting slot; it is 0 for preemptive runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PacketRecord {
    pub index: usize,
    pub transmission: f64,
    pub computation: f64,
    pub wait: f64,
    /// Threshold draw `ξ` (or `g(T)`) used to time the next generation.
    pub threshold: f64,
    /// Time from this packet's generation to the next generation.
    pub inter_generation: f64,
    pub delivered: bool,
    pub peak: Option<f64>,
    /// Area under the age curve since the previous delivery, and that interval.
    pub aoi_area: f64,
    pub interdelivery: f64,
}

struct Streams {
    t: rand_chacha::ChaCha8Rng,
    c: rand_chacha::ChaCha8Rng,
    theta: rand_chacha::ChaCha8Rng,
}

fn threshold_draw<R: Rng>(policy: &PolicySpec, t: f64, rng: &mut R) -> f64 {
    match *policy {
        PolicySpec::FixedThreshold { theta } => theta.value(),
        PolicySpec::RandomizedThreshold { theta_dist } => theta_dist.sample(rng),
        PolicySpec::TransmissionAware { beta } => (beta - t).max(0.0),
        PolicySpec::MeanThreshold => unreachable!("policies are resolved before simulation"),
    }
}

fn run<F: FnMut(&PacketRecord)>(
    config: &SystemConfig,
    policy: &PolicySpec,
    n_packets: usize,
    seed: u64,
    stream_base: u64,
    mut observe: F,
) -> Result<()> {
    policy.validate()?;
    let policy = policy.resolve(&config.computation);
    let (td, cd) = (&config.transmission, &config.computation);
    let mut s = Streams {
        t: stream_rng(seed, stream_base),
        c: stream_rng(seed, stream_base + 1),
        theta: stream_rng(seed, stream_base + 2),
    };
    match config.discipline {
        Discipline::NonPreemptive => {
            let mut t = td.sample(&mut s.t);
            let mut c = cd.sample(&mut s.c);
            let mut xi = threshold_draw(&policy, t, &mut s.theta);
            let mut w = 0.0;
            for k in 1..=n_packets {
                let z_prev = t + w + xi.min(c);
                let a_prev = t + w + c;
                let t_next = td.sample(&mut s.t);
                let c_next = cd.sample(&mut s.c);
                let w_next = (c - xi.min(c) - t_next).max(0.0);
                let xi_next = threshold_draw(&policy, t_next, &mut s.theta);
                let peak = z_prev + t_next + w_next + c_next;
                let y = peak - a_prev;
                observe(&PacketRecord {
                    index: k,
                    transmission: t_next,
                    computation: c_next,
                    wait: w_next,
                    threshold: xi_next,
                    inter_generation: t_next + w_next + xi_next.min(c_next),
                    delivered: true,
                    peak: Some(peak),
                    aoi_area: a_prev * y + 0.5 * y * y,
                    interdelivery: y,
                });
                (t, c, w, xi) = (t_next, c_next, w_next, xi_next);
            }
        }
        Discipline::Preemptive => {
            let t0 = td.sample(&mut s.t);
            let c0 = cd.sample(&mut s.c);
            let mut a_prev = t0 + c0;
            let mut since_delivery = t0 + c0;
            let mut t = td.sample(&mut s.t);
            let mut c = cd.sample(&mut s.c);
            for i in 1..=n_packets {
                let g = threshold_draw(&policy, t, &mut s.theta);
                let t_next = td.sample(&mut s.t);
                let delivered = c <= g + t_next;
                let z = t + g.min(c);
                let mut record = PacketRecord {
                    index: i,
                    transmission: t,
                    computation: c,
                    wait: 0.0,
                    threshold: g,
                    inter_generation: z,
                    delivered,
                    peak: None,
                    aoi_area: 0.0,
                    interdelivery: 0.0,
                };
                if delivered {
                    let peak = since_delivery + t + c;
                    let y = peak - a_prev;
                    record.peak = Some(peak);
                    record.aoi_area = a_prev * y + 0.5 * y * y;
                    record.interdelivery = y;
                    a_prev = t + c;
                    since_delivery = z;
                } else {
                    since_delivery += z;
                }
                observe(&record);
                t = t_next;
                c = cd.sample(&mut s.c);
            }
        }
    }
    Ok(())
}

/// Number of leading packets excluded from all statistics.
pub fn warmup_len(n_packets: usize) -> usize {
    n_packets.div_ceil(100)
}

#[derive(Default, Clone, Copy)]
struct Batch {
    generated: usize,
    delivered: usize,
    peak_sum: f64,
    area: f64,
    time: f64,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (m, f64::NAN);
    }
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Runs one simulation with the default substreams.
pub fn simulate(
    config: &SystemConfig,
    policy: &PolicySpec,
    n_packets: usize,
    seed: u64,
    batches: usize,
) -> Result<SimResult> {
    simulate_on_streams(config, policy, n_packets, seed, 0, batches)
}

/// Like [`simulate`] but drawing from substreams `stream_base..stream_base+3`.
pub fn simulate_on_streams(
    config: &SystemConfig,
    policy: &PolicySpec,
    n_packets: usize,
    seed: u64,
    stream_base: u64,
    batches: usize,
) -> Result<SimResult> {
    let warm = warmup_len(n_packets);
    if batches < 2 || n_packets < batches || n_packets - warm < batches {
        return Err(Error::InvalidParameter(format!(
            "need packets >= batches >= 2 after warm-up, got {n_packets} packets and {batches} batches"
        )));
    }
    let measured = n_packets - warm;
    let mut acc = vec![Batch::default(); batches];
    run(config, policy, n_packets, seed, stream_base, |r| {
        if r.index <= warm {
            return;
        }
        let b = &mut acc[(r.index - warm - 1) * batches / measured];
        b.generated += 1;
        if let Some(p) = r.peak {
            b.delivered += 1;
            b.peak_sum += p;
            b.area += r.aoi_area;
            b.time += r.interdelivery;
        }
    })?;
    let total = acc.iter().fold(Batch::default(), |mut t, b| {
        t.generated += b.generated;
        t.delivered += b.delivered;
        t.peak_sum += b.peak_sum;
        t.area += b.area;
        t.time += b.time;
        t
    });
    if total.delivered == 0 {
        return Err(Error::NoRenewals);
    }
    let with_renewals: Vec<&Batch> = acc.iter().filter(|b| b.delivered > 0 && b.time > 0.0).collect();
    let paoi_means: Vec<f64> = with_renewals.iter().map(|b| b.peak_sum / b.delivered as f64).collect();
    let aoi_means: Vec<f64> = with_renewals.iter().map(|b| b.area / b.time).collect();
    let ratios: Vec<f64> = acc.iter().map(|b| b.delivered as f64 / b.generated as f64).collect();
    Ok(SimResult {
        avg_paoi: total.peak_sum / total.delivered as f64,
        paoi_stderr: mean_and_se(&paoi_means).1,
        avg_aoi: total.area / total.time,
        aoi_stderr: mean_and_se(&aoi_means).1,
        delivery_ratio: total.delivered as f64 / total.generated as f64,
        delivery_stderr: mean_and_se(&ratios).1,
        packets_generated: total.generated,
        packets_delivered: total.delivered,
        elapsed_model_time: total.time,
    })
}

/// Peaks of the delivered packets after warm-up, in delivery order.
pub fn peak_series(config: &SystemConfig, policy: &PolicySpec, n_packets: usize, seed: u64) -> Result<Vec<f64>> {
    let warm = warmup_len(n_packets);
    let mut out = Vec::new();
    run(config, policy, n_packets, seed, 0, |r| {
        if r.index > warm {
            if let Some(p) = r.peak {
                out.push(p);
            }
        }
    })?;
    if out.is_empty() {
        return Err(Error::NoRenewals);
    }
    Ok(out)
}

/// Every generated packet of a run, warm-up included.
pub fn sample_path(
    config: &SystemConfig,
    policy: &PolicySpec,
    n_packets: usize,
    seed: u64,
) -> Result<Vec<PacketRecord>> {
    let mut out = Vec::with_capacity(n_packets);
    run(config, policy, n_packets, seed, 0, |r| out.push(*r))?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub ratio: f64,
    pub config: SystemConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub point: usize,
    pub policy: usize,
    pub ratio: f64,
    pub result: Result<SimResult>,
}

/// Simulates every (point, policy) pair in parallel. Policies at the same point
/// share transmission and computation draws; different points use disjoint
/// substreams. Cells come back ordered by point, then policy.
pub fn sweep(
    points: &[SweepPoint],
    policies: &[PolicySpec],
    n_packets: usize,
    seed: u64,
    batches: usize,
) -> Vec<SweepCell> {
    let cells: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..policies.len()).map(move |q| (p, q)))
        .collect();
    cells
        .par_iter()
        .map(|&(p, q)| SweepCell {
            point: p,
            policy: q,
            ratio: points[p].ratio,
            result: simulate_on_streams(&points[p].config, &policies[q], n_packets, seed, 3 * p as u64, batches),
        })
        .collect()
}

/// Analytic average peak age of a policy, where an evaluator exists.
pub fn analytic_paoi(config: &SystemConfig, policy: &PolicySpec) -> Result<f64> {
    policy.validate()?;
    let (t, c) = (&config.transmission, &config.computation);
    match (config.discipline, policy.resolve(c)) {
        (Discipline::NonPreemptive, PolicySpec::FixedThreshold { theta }) => Ok(paoi_wop(theta, t, c)?.paoi),
        (Discipline::NonPreemptive, PolicySpec::RandomizedThreshold { theta_dist }) => {
            paoi_wop_randomized(&theta_dist, t, c)
        }
        (Discipline::NonPreemptive, PolicySpec::TransmissionAware { beta }) => {
            Ok(paoi_wop_transmission_aware(beta, t, c)?.paoi)
        }
        (Discipline::Preemptive, PolicySpec::FixedThreshold { theta }) => {
            Ok(paoi_wp(&WaitFunction::fixed(theta), t, c)?.paoi)
        }
        (Discipline::Preemptive, PolicySpec::TransmissionAware { beta }) => {
            Ok(paoi_wp(&WaitFunction::transmission_aware(beta)?, t, c)?.paoi)
        }
        (Discipline::Preemptive, PolicySpec::RandomizedThreshold { .. }) => Err(Error::Unsupported(
            "analytic evaluation of randomized thresholds is available for the non-preemptive system only".into(),
        )),
        (_, PolicySpec::MeanThreshold) => unreachable!("resolved above"),
    }
}
