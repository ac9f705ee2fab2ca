//! Deterministic packet-level trajectories through parallel paths and an
//! ideal elimination, ordering and regulation pipeline.
//!
//! A scenario lists data units (flow, generation time, size), the parallel
//! paths with their delay bounds, and for each path a per-unit schedule:
//! forward with a given delay, or drop. The engine replays the schedule and
//! records every unit at every observation point.

pub mod generators;
pub mod measure;

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::minplus::ConcaveCurve;
use crate::rational::Rational;
use crate::topology::{LatencyDoc, RegulatorMode};

pub use measure::{check_compliance, is_fifo_per_flow, measure_reordering, ComplianceViolation, Reordering};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("path {path}: delay {delay} of unit {unit} outside [{min}, {max}]")]
    DelayOutOfBounds { path: String, unit: u64, delay: Rational, min: Rational, max: Rational },
    #[error("path {path} is declared FIFO but unit {later} overtakes unit {earlier}")]
    FifoViolation { path: String, earlier: u64, later: u64 },
    #[error("unit {unit} of size {size} exceeds a shaping burst of flow {flow}")]
    OversizedPacket { unit: u64, flow: String, size: Rational },
    #[error("unit {unit} of flow {flow} can never be released: a shaping segment has rate 0 and too few tokens")]
    NeverReleased { unit: u64, flow: String },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> SimError {
    SimError::Invalid { path: path.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowDecl {
    /// Arrival curve the source is expected to respect.
    pub arrival: ConcaveCurve,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lmin: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitDoc {
    pub id: u64,
    pub flow: String,
    pub time: Rational,
    pub size: Rational,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathDoc {
    pub name: String,
    pub delay: LatencyDoc,
    #[serde(default)]
    pub fifo: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PofDoc {
    /// `None`: wait forever for missing predecessors.
    #[serde(default)]
    pub timeout: Option<Rational>,
    /// Order each flow separately (default) or the whole aggregate.
    #[serde(default = "yes")]
    pub per_flow: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegulatorDoc {
    pub kind: RegulatorMode,
    pub shaping: BTreeMap<String, ConcaveCurve>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineDoc {
    #[serde(default = "yes")]
    pub pef: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pof: Option<PofDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regulator: Option<RegulatorDoc>,
}

impl Default for PipelineDoc {
    fn default() -> Self {
        PipelineDoc { pef: true, pof: None, regulator: None }
    }
}

/// Which network flow and destination a scenario exercises.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkLink {
    pub flow: String,
    pub destination: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub flows: BTreeMap<String, FlowDecl>,
    pub units: Vec<UnitDoc>,
    pub paths: Vec<PathDoc>,
    /// Per path, per unit id: forwarding delay, or `null` for a drop.
    pub schedules: BTreeMap<String, BTreeMap<u64, Option<Rational>>>,
    #[serde(default)]
    pub pipeline: PipelineDoc,
    /// Permits zero-size units, which only degenerate constructions use.
    #[serde(default)]
    pub allow_zero_size: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkLink>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, SimError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(if path == "." { "$".to_string() } else { format!("$.{path}") }, e.into_inner().to_string())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenarios serialize")
    }

    /// Checks structure; delay bounds are checked when running.
    pub fn validate(&self) -> Result<(), SimError> {
        if self.paths.is_empty() {
            return Err(invalid("$.paths", "at least one path is needed"));
        }
        if self.paths.len() > 1 && !self.pipeline.pef {
            return Err(invalid("$.pipeline.pef", "several paths need an eliminating function"));
        }
        let mut ids = BTreeMap::new();
        for (i, u) in self.units.iter().enumerate() {
            let p = format!("$.units[{i}]");
            if ids.insert(u.id, i).is_some() {
                return Err(invalid(format!("{p}.id"), format!("duplicate unit id {}", u.id)));
            }
            if !self.flows.contains_key(&u.flow) {
                return Err(invalid(format!("{p}.flow"), format!("unknown flow {:?}", u.flow)));
            }
            if u.time.is_negative() {
                return Err(invalid(format!("{p}.time"), "negative generation time"));
            }
            if u.size.is_negative() || (u.size.is_zero() && !self.allow_zero_size) {
                return Err(invalid(format!("{p}.size"), "unit sizes must be positive"));
            }
        }
        for (j, path) in self.paths.iter().enumerate() {
            let p = format!("$.paths[{j}]");
            if self.paths[..j].iter().any(|q| q.name == path.name) {
                return Err(invalid(format!("{p}.name"), "duplicate path name"));
            }
            if ["in", "pef", "pof", "reg"].contains(&path.name.as_str()) {
                return Err(invalid(format!("{p}.name"), "reserved observation point name"));
            }
            if path.delay.min.is_negative() || path.delay.min > path.delay.max {
                return Err(invalid(format!("{p}.delay"), "need 0 ≤ min ≤ max"));
            }
            let schedule = self
                .schedules
                .get(&path.name)
                .ok_or_else(|| invalid("$.schedules", format!("no schedule for path {:?}", path.name)))?;
            for id in schedule.keys() {
                if !ids.contains_key(id) {
                    return Err(invalid(format!("$.schedules.{}.{id}", path.name), "unknown unit"));
                }
            }
            if let Some(u) = self.units.iter().find(|u| !schedule.contains_key(&u.id)) {
                return Err(invalid(format!("$.schedules.{}", path.name), format!("unit {} not scheduled", u.id)));
            }
        }
        if let Some(name) = self.schedules.keys().find(|n| !self.paths.iter().any(|p| &p.name == *n)) {
            return Err(invalid(format!("$.schedules.{name}"), "schedule for an undeclared path"));
        }
        if let Some(pof) = &self.pipeline.pof {
            if pof.timeout.as_ref().is_some_and(Rational::is_negative) {
                return Err(invalid("$.pipeline.pof.timeout", "negative timeout"));
            }
        }
        if let Some(reg) = &self.pipeline.regulator {
            for f in self.flows.keys() {
                if !reg.shaping.contains_key(f) {
                    return Err(invalid("$.pipeline.regulator.shaping", format!("no shaping curve for flow {f:?}")));
                }
            }
            if let Some(f) = reg.shaping.keys().find(|f| !self.flows.contains_key(*f)) {
                return Err(invalid(format!("$.pipeline.regulator.shaping.{f}"), "unknown flow"));
            }
        }
        Ok(())
    }

    /// Every unit is forwarded by at least one path.
    pub fn is_lossless(&self) -> bool {
        self.units.iter().all(|u| self.schedules.values().any(|s| matches!(s.get(&u.id), Some(Some(_)))))
    }

    /// Smallest lower and largest upper path delay bound.
    pub fn path_hull(&self) -> (Rational, Rational) {
        let lo = self.paths.iter().map(|p| p.delay.min.clone()).min().expect("validated");
        let hi = self.paths.iter().map(|p| p.delay.max.clone()).max().expect("validated");
        (lo, hi)
    }
}

/// A data unit with its position in the reference (generation) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    pub id: u64,
    pub flow: String,
    pub time: Rational,
    pub size: Rational,
    /// Position in the aggregate order at the source.
    pub seq: usize,
}

/// A unit seen at an observation point. `unit` indexes `SimRun::units`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub time: Rational,
    pub unit: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: Rational,
    pub point: String,
    pub unit: u64,
    pub flow: String,
    pub size: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

pub const TRACE_CSV_HEADER: &str = "time,point,unit,flow,size";

impl Trace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_CSV_HEADER);
        out.push('\n');
        for e in &self.events {
            out.push_str(&format!("{},{},{},{},{}\n", e.time, e.point, e.unit, e.flow, e.size));
        }
        out
    }
}

/// Result of one run: units in reference order and, per observation point,
/// the units seen there in emission order.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub units: Vec<Unit>,
    pub points: Vec<(String, Vec<Observation>)>,
    pub lossless: bool,
    pub zero_size_units: Vec<u64>,
}

impl SimRun {
    pub fn at(&self, point: &str) -> Option<&[Observation]> {
        self.points.iter().find(|(name, _)| name == point).map(|(_, obs)| obs.as_slice())
    }

    pub fn final_point(&self) -> &str {
        &self.points.last().expect("the source point always exists").0
    }

    pub fn final_observations(&self) -> &[Observation] {
        &self.points.last().expect("source point").1
    }

    /// Per unit (reference order): delay from generation to the final point,
    /// `None` when the unit never got there.
    pub fn delays(&self) -> Vec<Option<Rational>> {
        let mut out = vec![None; self.units.len()];
        for o in self.final_observations() {
            out[o.unit] = Some(&o.time - &self.units[o.unit].time);
        }
        out
    }

    pub fn max_delay(&self) -> Option<Rational> {
        self.delays().into_iter().flatten().max()
    }

    pub fn min_delay(&self) -> Option<Rational> {
        self.delays().into_iter().flatten().min()
    }

    pub fn unit_index(&self, id: u64) -> Option<usize> {
        self.units.iter().position(|u| u.id == id)
    }

    /// Time unit `unit` was seen at `point`.
    pub fn time_at(&self, point: &str, unit: usize) -> Option<Rational> {
        self.at(point)?.iter().find(|o| o.unit == unit).map(|o| o.time.clone())
    }

    /// `(time, size)` of one flow's units at a point, in emission order.
    pub fn series(&self, point: &str, flow: &str) -> Vec<(Rational, Rational)> {
        self.at(point)
            .unwrap_or(&[])
            .iter()
            .filter(|o| self.units[o.unit].flow == flow)
            .map(|o| (o.time.clone(), self.units[o.unit].size.clone()))
            .collect()
    }

    pub fn flows(&self) -> Vec<String> {
        let mut f: Vec<String> = self.units.iter().map(|u| u.flow.clone()).collect();
        f.sort();
        f.dedup();
        f
    }

    pub fn trace(&self) -> Trace {
        let events = self
            .points
            .iter()
            .flat_map(|(name, obs)| {
                obs.iter().map(move |o| {
                    let u = &self.units[o.unit];
                    TraceEvent {
                        time: o.time.clone(),
                        point: name.clone(),
                        unit: u.id,
                        flow: u.flow.clone(),
                        size: u.size.clone(),
                    }
                })
            })
            .collect();
        Trace { events }
    }
}

/// Sorts by time, keeping the given order among equal times.
fn stable_by_time(mut obs: Vec<Observation>) -> Vec<Observation> {
    obs.sort_by(|a, b| a.time.cmp(&b.time));
    obs
}

/// Runs a validated scenario.
pub fn run_scenario(scenario: &Scenario) -> Result<SimRun, SimError> {
    scenario.validate()?;
    let mut order: Vec<usize> = (0..scenario.units.len()).collect();
    order.sort_by(|&a, &b| scenario.units[a].time.cmp(&scenario.units[b].time).then(a.cmp(&b)));
    let units: Vec<Unit> = order
        .iter()
        .enumerate()
        .map(|(seq, &i)| {
            let u = &scenario.units[i];
            Unit { id: u.id, flow: u.flow.clone(), time: u.time.clone(), size: u.size.clone(), seq }
        })
        .collect();
    let by_id: BTreeMap<u64, usize> = units.iter().enumerate().map(|(i, u)| (u.id, i)).collect();
    let source: Vec<Observation> =
        (0..units.len()).map(|i| Observation { time: units[i].time.clone(), unit: i }).collect();
    let mut points = vec![("in".to_string(), source)];

    let mut path_exits = Vec::new();
    for path in &scenario.paths {
        let schedule = &scenario.schedules[&path.name];
        let mut exits = Vec::new();
        for (id, delay) in schedule {
            let Some(delay) = delay else { continue };
            let i = by_id[id];
            if *delay < path.delay.min || *delay > path.delay.max {
                return Err(SimError::DelayOutOfBounds {
                    path: path.name.clone(),
                    unit: *id,
                    delay: delay.clone(),
                    min: path.delay.min.clone(),
                    max: path.delay.max.clone(),
                });
            }
            exits.push(Observation { time: &units[i].time + delay, unit: i });
        }
        exits.sort_by_key(|o| o.unit);
        if path.fifo {
            for w in exits.windows(2) {
                if w[1].time < w[0].time {
                    return Err(SimError::FifoViolation {
                        path: path.name.clone(),
                        earlier: units[w[0].unit].id,
                        later: units[w[1].unit].id,
                    });
                }
            }
        }
        let exits = stable_by_time(exits);
        points.push((path.name.clone(), exits.clone()));
        path_exits.push(exits);
    }

    let mut stream = if scenario.pipeline.pef {
        let out = eliminate(&path_exits, units.len());
        points.push(("pef".to_string(), out.clone()));
        out
    } else {
        path_exits.pop().expect("one path")
    };
    if let Some(pof) = &scenario.pipeline.pof {
        stream = order_units(&stream, &units, pof);
        points.push(("pof".to_string(), stream.clone()));
    }
    if let Some(reg) = &scenario.pipeline.regulator {
        stream = regulate(&stream, &units, reg)?;
        points.push(("reg".to_string(), stream));
    }
    let zero_size_units = units.iter().filter(|u| u.size.is_zero()).map(|u| u.id).collect();
    Ok(SimRun { units, points, lossless: scenario.is_lossless(), zero_size_units })
}

/// First copy wins. Ties: earlier time, then earlier-declared path, then
/// reference order.
fn eliminate(path_exits: &[Vec<Observation>], n_units: usize) -> Vec<Observation> {
    let mut all: Vec<(Rational, usize, usize)> = path_exits
        .iter()
        .enumerate()
        .flat_map(|(p, exits)| exits.iter().map(move |o| (o.time.clone(), p, o.unit)))
        .collect();
    all.sort();
    let mut seen = vec![false; n_units];
    let mut out = Vec::new();
    for (time, _, unit) in all {
        if !std::mem::replace(&mut seen[unit], true) {
            out.push(Observation { time, unit });
        }
    }
    out
}

/// Packet ordering function. A unit whose predecessors have all been
/// released (or skipped) leaves at once; others wait for them or for their
/// own timeout, which releases everything buffered up to them. Late units
/// whose position was skipped leave at once. At equal times, arrivals are
/// handled before timeouts expiring at that time.
fn order_units(input: &[Observation], units: &[Unit], pof: &PofDoc) -> Vec<Observation> {
    let group = |u: usize| if pof.per_flow { units[u].flow.clone() } else { String::new() };
    // Reference order within each group.
    let mut members: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for u in 0..units.len() {
        members.entry(group(u)).or_default().push(u);
    }
    let rank: BTreeMap<usize, usize> =
        members.values().flat_map(|m| m.iter().enumerate().map(|(r, &u)| (u, r))).collect();
    let mut next: BTreeMap<String, usize> = members.keys().map(|g| (g.clone(), 0)).collect();
    let mut buffer: BTreeMap<String, BTreeMap<usize, usize>> = BTreeMap::new();
    let mut timeouts: BTreeMap<(Rational, usize), (String, usize)> = BTreeMap::new();
    let mut out = Vec::new();
    let mut seq = 0usize;

    let flush = |g: &str,
                 time: &Rational,
                 next: &mut BTreeMap<String, usize>,
                 buffer: &mut BTreeMap<String, BTreeMap<usize, usize>>,
                 out: &mut Vec<Observation>| {
        let buf = buffer.entry(g.to_string()).or_default();
        let n = next.get_mut(g).expect("known group");
        while let Some(u) = buf.remove(n) {
            out.push(Observation { time: time.clone(), unit: u });
            *n += 1;
        }
    };
    let fire = |g: &str,
                r: usize,
                time: &Rational,
                next: &mut BTreeMap<String, usize>,
                buffer: &mut BTreeMap<String, BTreeMap<usize, usize>>,
                out: &mut Vec<Observation>| {
        let buf = buffer.entry(g.to_string()).or_default();
        if !buf.contains_key(&r) {
            return;
        }
        let keep = buf.split_off(&(r + 1));
        for (_, u) in std::mem::replace(buf, keep) {
            out.push(Observation { time: time.clone(), unit: u });
        }
        next.insert(g.to_string(), r + 1);
        flush(g, time, next, buffer, out);
    };

    for obs in input {
        while let Some(((deadline, _), _)) = timeouts.first_key_value() {
            if *deadline >= obs.time {
                break;
            }
            let ((deadline, _), (g, r)) = timeouts.pop_first().expect("nonempty");
            fire(&g, r, &deadline, &mut next, &mut buffer, &mut out);
        }
        let g = group(obs.unit);
        let r = rank[&obs.unit];
        let n = next[&g];
        if r < n {
            out.push(obs.clone());
        } else if r == n {
            out.push(obs.clone());
            next.insert(g.clone(), n + 1);
            flush(&g, &obs.time, &mut next, &mut buffer, &mut out);
        } else {
            buffer.entry(g.clone()).or_default().insert(r, obs.unit);
            if let Some(t) = &pof.timeout {
                timeouts.insert((&obs.time + t, seq), (g, r));
                seq += 1;
            }
        }
    }
    while let Some(((deadline, _), (g, r))) = timeouts.pop_first() {
        fire(&g, r, &deadline, &mut next, &mut buffer, &mut out);
    }
    stable_by_time(out)
}

/// Token buckets of one shaping curve, one per segment, starting full.
struct Buckets {
    segments: Vec<(Rational, Rational)>,
    tokens: Vec<Rational>,
    last: Rational,
}

impl Buckets {
    fn new(curve: &ConcaveCurve) -> Self {
        let segments: Vec<(Rational, Rational)> =
            curve.segments().iter().map(|s| (s.rate.clone(), s.burst.clone())).collect();
        let tokens = segments.iter().map(|(_, b)| b.clone()).collect();
        Buckets { segments, tokens, last: Rational::zero() }
    }

    fn level(&self, i: usize, t: &Rational) -> Rational {
        let (r, b) = &self.segments[i];
        let grown = &self.tokens[i] + r * (t - &self.last);
        grown.min(b.clone())
    }

    /// Earliest time `≥ ready` with `size` tokens in every bucket.
    fn earliest(&self, ready: &Rational, size: &Rational) -> Option<Rational> {
        let ready = ready.clone().max(self.last.clone());
        let mut t = ready.clone();
        for i in 0..self.segments.len() {
            let (r, b) = &self.segments[i];
            if size > b {
                return None;
            }
            let level = self.level(i, &ready);
            if level < *size {
                if r.is_zero() {
                    return None;
                }
                t = t.max(&ready + (size - &level) / r);
            }
        }
        Some(t)
    }

    fn take(&mut self, t: &Rational, size: &Rational) {
        for i in 0..self.segments.len() {
            self.tokens[i] = self.level(i, t) - size;
        }
        self.last = t.clone();
    }
}

/// Per-flow regulator: one FIFO queue per flow. Interleaved regulator: one
/// FIFO queue for all flows, only the head is examined.
fn regulate(input: &[Observation], units: &[Unit], reg: &RegulatorDoc) -> Result<Vec<Observation>, SimError> {
    let mut buckets: BTreeMap<String, Buckets> =
        reg.shaping.iter().map(|(f, c)| (f.clone(), Buckets::new(c))).collect();
    let mut previous: BTreeMap<String, Rational> = BTreeMap::new();
    let mut queue: VecDeque<&Observation> = input.iter().collect();
    let mut out = Vec::with_capacity(input.len());
    while let Some(obs) = queue.pop_front() {
        let u = &units[obs.unit];
        let key = match reg.kind {
            RegulatorMode::PerFlow => u.flow.clone(),
            RegulatorMode::Interleaved => String::new(),
        };
        let ready = match previous.get(&key) {
            Some(p) => obs.time.clone().max(p.clone()),
            None => obs.time.clone(),
        };
        let b = buckets.get_mut(&u.flow).expect("validated shaping");
        if u.size > b.segments.iter().map(|(_, burst)| burst.clone()).min().expect("nonempty") {
            return Err(SimError::OversizedPacket { unit: u.id, flow: u.flow.clone(), size: u.size.clone() });
        }
        let t =
            b.earliest(&ready, &u.size).ok_or_else(|| SimError::NeverReleased { unit: u.id, flow: u.flow.clone() })?;
        b.take(&t, &u.size);
        previous.insert(key, t.clone());
        out.push(Observation { time: t, unit: obs.unit });
    }
    Ok(stable_by_time(out))
}

#[cfg(test)]
mod tests;
