//! Cross-checks simulated trajectories against analytical bounds.

use serde::Serialize;

use crate::minplus::{h_dev, Bound, ConcaveCurve, ServiceCurve};
use crate::rational::Rational;
use crate::redundancy::{lossy_jitter_output_curve, pef_output_curve_parallel, pef_rto_bound, rbo_from_rto};
use crate::regulators::{ReasonCode, VerdictKind};
use crate::sim::{Scenario, SimRun};
use crate::tfa::{analyze, LossModel, PefModel};
use crate::topology::{DelayInterval, Network, PathDelayBounds, RegulatorMode};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerifyError {
    #[error("the scenario names no network flow")]
    NoLink,
    #[error("the network has no result for flow {flow:?} at {destination:?}")]
    NoSuchFlow { flow: String, destination: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundSource {
    Scenario,
    Network,
}

/// One oracle evaluated on the trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Growth of the regulator delay when no finite bound exists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Divergence {
    pub flow: String,
    pub early_max: Rational,
    pub late_max: Rational,
    pub growing: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub source: BoundSource,
    pub bound: VerdictKind,
    pub final_point: String,
    pub delivered: usize,
    pub lost: usize,
    pub measured_min: Option<Rational>,
    pub measured_max: Option<Rational>,
    /// Unit ids whose delay falls outside the bound.
    pub outside: Vec<u64>,
    pub sound: bool,
    /// The largest measured delay equals a finite upper bound.
    pub attained: bool,
    pub checks: Vec<Check>,
    pub divergence: Option<Divergence>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.sound && self.checks.iter().all(|c| c.passed)
    }
}

fn bounded(lower: Rational, upper: Bound) -> VerdictKind {
    VerdictKind::Bounded { interval: DelayInterval::new(lower, upper) }
}

fn path_branches(s: &Scenario) -> Vec<PathDelayBounds> {
    s.paths.iter().map(|p| PathDelayBounds::new(p.delay.min.clone(), p.delay.max.clone())).collect()
}

/// Arrival curve of a flow after the paths and the optional elimination.
fn merged_curve(s: &Scenario, arrival: &ConcaveCurve) -> ConcaveCurve {
    let branches = path_branches(s);
    if s.pipeline.pef {
        pef_output_curve_parallel(arrival, &branches).expect("validated scenarios have paths")
    } else {
        lossy_jitter_output_curve(arrival, &branches[0])
    }
}

/// End-to-end delay bound derived from the scenario alone: path delay bounds
/// plus the delay each pipeline stage can add.
pub fn scenario_bound(s: &Scenario) -> VerdictKind {
    let (d, big_d) = s.path_hull();
    let lossless = s.is_lossless();
    let single_fifo = s.paths.len() == 1 && s.paths[0].fifo;
    let pof_bound = s.pipeline.pof.as_ref().map(|pof| match (lossless, &pof.timeout) {
        (true, _) => Bound::Finite(big_d.clone()),
        (false, Some(t)) => Bound::Finite(&big_d + t),
        (false, None) => Bound::Unbounded,
    });
    let Some(reg) = &s.pipeline.regulator else {
        return bounded(d, pof_bound.unwrap_or(Bound::Finite(big_d)));
    };
    let interleaved = reg.kind == RegulatorMode::Interleaved && s.flows.len() > 1;
    if let Some(pof) = &s.pipeline.pof {
        // Order restored upstream: the regulator adds nothing, provided it
        // sees the aggregate in its reference order.
        if interleaved && pof.per_flow {
            return VerdictKind::Unbounded { reason: ReasonCode::UnprovenConfiguration };
        }
        return bounded(d, pof_bound.expect("pof present"));
    }
    if single_fifo {
        return bounded(d, Bound::Finite(big_d));
    }
    if interleaved {
        let reason = if s.pipeline.pef && s.paths.len() > 1 {
            ReasonCode::IrAfterPefNoPof
        } else {
            ReasonCode::UnprovenConfiguration
        };
        return VerdictKind::Unbounded { reason };
    }
    let mut upper = Bound::Finite(big_d.clone());
    for (flow, decl) in &s.flows {
        let sigma = &reg.shaping[flow];
        let mut extra = h_dev(&merged_curve(s, &decl.arrival), &ServiceCurve::from(sigma.clone()));
        if sigma.as_token_bucket().is_some() {
            let jitter = Bound::Finite(&big_d - &d);
            if jitter < extra {
                extra = jitter;
            }
        }
        let candidate = extra.plus_finite(&big_d);
        if upper < candidate {
            upper = candidate;
        }
    }
    bounded(d, upper)
}

/// Bound for the scenario's linked flow from a full network analysis.
pub fn network_bound(s: &Scenario, net: &Network) -> Result<VerdictKind, VerifyError> {
    let link = s.network.as_ref().ok_or(VerifyError::NoLink)?;
    let loss = if s.is_lossless() { LossModel::Lossless } else { LossModel::Lossy };
    let report = analyze(net, PefModel::Tight, loss);
    let row = report
        .flow_row(&link.flow, &link.destination)
        .ok_or_else(|| VerifyError::NoSuchFlow { flow: link.flow.clone(), destination: link.destination.clone() })?;
    Ok(VerdictKind::Bounded { interval: row.interval.clone() })
}

pub fn verify(s: &Scenario, run: &SimRun) -> VerifyReport {
    finish(s, run, BoundSource::Scenario, scenario_bound(s))
}

pub fn verify_against_network(s: &Scenario, run: &SimRun, net: &Network) -> Result<VerifyReport, VerifyError> {
    Ok(finish(s, run, BoundSource::Network, network_bound(s, net)?))
}

fn finish(s: &Scenario, run: &SimRun, source: BoundSource, bound: VerdictKind) -> VerifyReport {
    let delays = run.delays();
    let delivered = delays.iter().flatten().count();
    let outside: Vec<u64> = match &bound {
        VerdictKind::Bounded { interval } => delays
            .iter()
            .enumerate()
            .filter_map(|(i, d)| d.as_ref().filter(|d| !interval.contains(d)).map(|_| run.units[i].id))
            .collect(),
        VerdictKind::Unbounded { .. } => Vec::new(),
    };
    let measured_max = run.max_delay();
    let attained = match (&bound, &measured_max) {
        (VerdictKind::Bounded { interval }, Some(m)) => interval.upper.finite() == Some(m),
        _ => false,
    };
    let divergence = match bound {
        VerdictKind::Unbounded { .. } if run.at("reg").is_some() => divergence(run),
        _ => None,
    };
    VerifyReport {
        source,
        final_point: run.final_point().to_string(),
        delivered,
        lost: run.units.len() - delivered,
        measured_min: run.min_delay(),
        measured_max,
        sound: outside.is_empty(),
        outside,
        attained,
        checks: oracle_checks(s, run),
        divergence,
        bound,
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.to_string(), passed, detail }
}

/// Per-flow oracles that hold for any valid trajectory.
pub fn oracle_checks(s: &Scenario, run: &SimRun) -> Vec<Check> {
    let mut out = Vec::new();
    let (d, big_d) = s.path_hull();
    let hull = PathDelayBounds::new(d, big_d);
    for (flow, decl) in &s.flows {
        let source = run.compliance("in", flow, &decl.arrival);
        out.push(check(&format!("{flow}: source compliant"), source.is_ok(), describe(&source)));
        if !(s.pipeline.pef && s.paths.len() > 1) {
            continue;
        }
        let curve = merged_curve(s, &decl.arrival);
        let merged = run.compliance("pef", flow, &curve);
        out.push(check(&format!("{flow}: elimination output compliant"), merged.is_ok(), describe(&merged)));
        let smallest = run.units.iter().filter(|u| &u.flow == flow).map(|u| u.size.clone()).min();
        let l_min = match (&decl.lmin, smallest) {
            (Some(l), Some(m)) => l.clone().min(m),
            (Some(l), None) => l.clone(),
            (None, m) => m.unwrap_or_else(Rational::zero),
        };
        let rto_bound = pef_rto_bound(&decl.arrival, &hull, &l_min);
        let rbo_bound = rbo_from_rto(&curve, &Bound::Finite(rto_bound.clone()));
        let measured = run.reordering("pef", flow);
        out.push(check(
            &format!("{flow}: elimination RTO"),
            measured.rto <= rto_bound,
            format!("measured {} ≤ bound {}", measured.rto, rto_bound),
        ));
        out.push(check(
            &format!("{flow}: elimination RBO"),
            Bound::Finite(measured.rbo.clone()) <= rbo_bound,
            format!("measured {} ≤ bound {}", measured.rbo, rbo_bound),
        ));
    }
    if let Some(reg) = &s.pipeline.regulator {
        for (flow, sigma) in &reg.shaping {
            let shaped = run.compliance("reg", flow, sigma);
            out.push(check(&format!("{flow}: regulator output compliant"), shaped.is_ok(), describe(&shaped)));
        }
    }
    out
}

fn describe(r: &Result<(), crate::sim::ComplianceViolation>) -> String {
    match r {
        Ok(()) => "ok".to_string(),
        Err(v) => format!("{} in [{}, {}] exceeds {}", v.amount, v.start, v.end, v.allowed),
    }
}

/// Regulator delay of each flow, first third against last third of its units.
fn divergence(run: &SimRun) -> Option<Divergence> {
    let mut best: Option<Divergence> = None;
    for flow in run.flows() {
        let mut units: Vec<usize> = (0..run.units.len()).filter(|&i| run.units[i].flow == flow).collect();
        units.sort_by_key(|&i| run.units[i].seq);
        let delays: Vec<Rational> = units
            .iter()
            .filter_map(|&i| Some(run.time_at("reg", i)? - run.time_at("pef", i).or_else(|| run.time_at("in", i))?))
            .collect();
        let third = delays.len() / 3;
        if third == 0 {
            continue;
        }
        let early_max = delays[..third].iter().max().expect("nonempty").clone();
        let late_max = delays[delays.len() - third..].iter().max().expect("nonempty").clone();
        let candidate = Divergence { flow, growing: late_max > early_max, early_max, late_max };
        if best.as_ref().is_none_or(|b| candidate.late_max > b.late_max) {
            best = Some(candidate);
        }
    }
    best
}
