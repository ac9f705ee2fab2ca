//! Oracles over simulated trajectories: arrival-curve compliance, reordering
//! offsets and per-flow order.

use std::collections::BTreeMap;

use serde::Serialize;

use super::SimRun;
use crate::minplus::ConcaveCurve;
use crate::rational::Rational;

/// A closed window `[start, end]` carrying more than the curve allows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComplianceViolation {
    pub start: Rational,
    pub end: Rational,
    pub amount: Rational,
    pub allowed: Rational,
}

/// Checks `A(t) − A(s⁻) ≤ α(t − s)` over every closed window between event
/// times, counting whole packets. Reports the violation with the earliest
/// end, then the earliest start.
pub fn check_compliance(events: &[(Rational, Rational)], curve: &ConcaveCurve) -> Result<(), ComplianceViolation> {
    let mut sorted: Vec<&(Rational, Rational)> = events.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    // Distinct instants with the cumulative size before and after them.
    let mut instants: Vec<(Rational, Rational, Rational)> = Vec::new();
    let mut total = Rational::zero();
    for (t, l) in sorted {
        match instants.last_mut() {
            Some((last, _, after)) if last == t => *after += l,
            _ => instants.push((t.clone(), total.clone(), &total + l)),
        }
        total += l;
    }
    if complies_per_bucket(&instants, curve) {
        return Ok(());
    }
    for j in 0..instants.len() {
        let (end, _, after) = &instants[j];
        for (start, before, _) in &instants[..=j] {
            let amount = after - before;
            let allowed = curve.eval_closed(&(end - start));
            if amount > allowed {
                return Err(ComplianceViolation { start: start.clone(), end: end.clone(), amount, allowed });
            }
        }
    }
    Ok(())
}

/// Linear check: a concave curve is a minimum of token buckets, and a
/// sequence complies with it iff each bucket, starting full, never runs dry.
fn complies_per_bucket(instants: &[(Rational, Rational, Rational)], curve: &ConcaveCurve) -> bool {
    curve.segments().iter().all(|seg| {
        let mut tokens = seg.burst.clone();
        let mut last: Option<&Rational> = None;
        instants.iter().all(|(t, before, after)| {
            if let Some(prev) = last {
                tokens = (&tokens + &seg.rate * (t - prev)).min(seg.burst.clone());
            }
            last = Some(t);
            tokens -= &(after - before);
            !tokens.is_negative()
        })
    })
}

/// Measured reordering offsets of one flow at one point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reordering {
    /// `max_k (E_k − min_{j>k} E_j)⁺`.
    pub rto: Rational,
    /// `max_k Σ_{j>k, E_j<E_k} l_j`.
    pub rbo: Rational,
}

/// `units` holds `(reference position, time at the point, size)`; lost units
/// are simply absent.
pub fn measure_reordering(units: &[(usize, Rational, Rational)]) -> Reordering {
    let mut v: Vec<&(usize, Rational, Rational)> = units.iter().collect();
    v.sort_by_key(|u| u.0);
    let mut rto = Rational::zero();
    let mut rbo = Rational::zero();
    let mut suffix_min: Option<Rational> = None;
    let mut late = vec![false; v.len()];
    for k in (0..v.len()).rev() {
        if let Some(m) = &suffix_min {
            if v[k].1 > *m {
                late[k] = true;
                rto = rto.max(&v[k].1 - m);
            }
        }
        suffix_min = Some(match suffix_min {
            Some(m) => m.min(v[k].1.clone()),
            None => v[k].1.clone(),
        });
    }
    for k in (0..v.len()).filter(|&k| late[k]) {
        let bytes: Rational = v[k + 1..].iter().filter(|u| u.1 < v[k].1).map(|u| u.2.clone()).sum();
        rbo = rbo.max(bytes);
    }
    Reordering { rto, rbo }
}

/// No unit of a flow is seen strictly before an earlier-generated unit of
/// the same flow.
pub fn is_fifo_per_flow(run: &SimRun, point: &str) -> bool {
    let mut last: BTreeMap<&str, (usize, &Rational)> = BTreeMap::new();
    let mut obs: Vec<_> = run.at(point).unwrap_or(&[]).iter().collect();
    obs.sort_by_key(|o| run.units[o.unit].seq);
    for o in obs {
        let flow = run.units[o.unit].flow.as_str();
        if let Some((_, t)) = last.get(flow) {
            if o.time < **t {
                return false;
            }
        }
        last.insert(flow, (o.unit, &o.time));
    }
    true
}

impl SimRun {
    pub fn reordering(&self, point: &str, flow: &str) -> Reordering {
        let units: Vec<_> = self
            .at(point)
            .unwrap_or(&[])
            .iter()
            .filter(|o| self.units[o.unit].flow == flow)
            .map(|o| (self.units[o.unit].seq, o.time.clone(), self.units[o.unit].size.clone()))
            .collect();
        measure_reordering(&units)
    }

    pub fn compliance(&self, point: &str, flow: &str, curve: &ConcaveCurve) -> Result<(), ComplianceViolation> {
        check_compliance(&self.series(point, flow), curve)
    }

    /// Largest total size seen at a single instant of a point, with the
    /// instant.
    pub fn max_instant_burst(&self, point: &str, flow: Option<&str>) -> Option<(Rational, Rational)> {
        let mut per_instant: BTreeMap<Rational, Rational> = BTreeMap::new();
        for o in self.at(point)? {
            let u = &self.units[o.unit];
            if flow.is_none_or(|f| f == u.flow) {
                *per_instant.entry(o.time.clone()).or_default() += &u.size;
            }
        }
        per_instant.into_iter().map(|(t, s)| (s, t)).max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
    }
}
